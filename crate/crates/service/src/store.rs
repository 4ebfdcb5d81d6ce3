//! Single-writer append-only event log (`events.jsonl`) with periodic state
//! snapshots (`snapshot.json`).

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::event::{Event, EventRecord};
use crate::state::{Inconsistent, State};

pub const LOG: &str = "events.jsonl";
pub const SNAPSHOT: &str = "snapshot.json";
pub const SNAPSHOT_EVERY: u64 = 256;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Inconsistent(#[from] Inconsistent),
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    state: State,
}

pub struct Store {
    dir: PathBuf,
    log: File,
    state: State,
    records: Vec<EventRecord>,
    snapshot_every: u64,
}

/// Reads every complete record. A torn final line (a write cut short) is
/// dropped and truncated away.
fn read_log(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let Ok(f) = File::open(path) else { return Ok(vec![]) };
    let mut reader = BufReader::new(f);
    let mut records = vec![];
    let mut good_len = 0u64;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        n += 1;
        if !line.ends_with('\n') {
            log::warn!("dropping torn record at line {n}");
            OpenOptions::new().write(true).open(path)?.set_len(good_len)?;
            break;
        }
        records.push(serde_json::from_str(&line).map_err(|source| StoreError::Parse { line: n, source })?);
        good_len += read as u64;
    }
    Ok(records)
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        Self::open_with(dir, SNAPSHOT_EVERY)
    }

    pub fn open_with(dir: &Path, snapshot_every: u64) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let records = read_log(&dir.join(LOG))?;
        let mut state = match std::fs::read(dir.join(SNAPSHOT)) {
            Ok(bytes) => serde_json::from_slice::<Snapshot>(&bytes).map(|s| s.state).unwrap_or_default(),
            Err(_) => State::default(),
        };
        if records.iter().all(|r| r.seq != state.seq) && state.seq != 0 {
            // Snapshot ahead of or unrelated to the log: fold from scratch.
            state = State::default();
        }
        let from = state.seq;
        for r in records.iter().filter(|r| r.seq > from) {
            state.apply(r)?;
        }
        let log = OpenOptions::new().create(true).append(true).open(dir.join(LOG))?;
        Ok(Store { dir: dir.to_path_buf(), log, state, records, snapshot_every: snapshot_every.max(1) })
    }

    /// Folds the whole log from scratch, ignoring any snapshot.
    pub fn replay(dir: &Path) -> Result<State, StoreError> {
        let mut state = State::default();
        for r in read_log(&dir.join(LOG))? {
            state.apply(&r)?;
        }
        Ok(state)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn since(&self, seq: u64) -> &[EventRecord] {
        let start = self.records.partition_point(|r| r.seq <= seq);
        &self.records[start..]
    }

    /// Validates, persists and applies one event.
    pub fn append(&mut self, event: Event, at: u64) -> Result<EventRecord, StoreError> {
        let rec = EventRecord { seq: self.state.seq + 1, at, event };
        let mut next = self.state.clone();
        next.apply(&rec)?;
        let mut line = serde_json::to_string(&rec).expect("records serialize");
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.sync_data()?;
        self.state = next;
        self.records.push(rec.clone());
        if rec.seq % self.snapshot_every == 0 {
            self.snapshot()?;
        }
        Ok(rec)
    }

    pub fn snapshot(&self) -> io::Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        let body = serde_json::to_vec(&Snapshot { state: self.state.clone() }).expect("state serializes");
        std::fs::write(&tmp, body)?;
        std::fs::rename(tmp, self.dir.join(SNAPSHOT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Phase;
    use crate::event::{PhaseChange, TeamRegistered};
    use bibifi_scoring::TeamId;

    fn team(n: usize) -> Event {
        Event::Team(TeamRegistered { team: TeamId(format!("t{n}")), members: vec![], token_hash: format!("h{n}") })
    }

    #[test]
    fn snapshots_and_torn_tails() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open_with(dir.path(), 3).unwrap();
            for i in 0..7 {
                s.append(team(i), i as u64).unwrap();
            }
            assert!(s.append(team(0), 9).is_err(), "duplicate team");
            s.append(Event::PhaseChange(PhaseChange { phase: Phase::Build, by: "admin".into() }), 10).unwrap();
        }
        assert!(dir.path().join(SNAPSHOT).exists());
        let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG)).unwrap();
        f.write_all(b"{\"seq\":9,\"at\":1,\"kind\":\"te").unwrap();
        let s = Store::open_with(dir.path(), 3).unwrap();
        assert_eq!(s.state().seq, 8);
        assert_eq!(s.state(), &Store::replay(dir.path()).unwrap());
        assert_eq!(s.since(6).len(), 2);
        assert!(std::fs::read_to_string(dir.path().join(LOG)).unwrap().ends_with("}\n"));
    }
}
