//! Contest operations. Mutations are serialized through the store; builds and
//! adjudications run on background threads and append their results later.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use base64::Engine;
use bibifi_judge::{validate_fix, Adjudication, BreakSubmission, Fix, FixDecision, FixState, OracleBug, Payload};
use bibifi_scoring::{enforce_with, BugCategory, BugReport, FixId, LimitViolation, ReportId, TeamId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auth::{authorize, gate, hash_token, new_token, Action, ApiError, Caller};
use crate::backend::{Backend, PublicChallenge};
use crate::config::{ContestConfig, Phase};
use crate::event::*;
use crate::state::{BreakInfo, FixInfo, Scoreboard, State, SubmissionInfo};
use crate::store::{Store, StoreError};

pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
    }
}

/// A settable clock for tests.
#[derive(Default)]
pub struct ManualClock(pub AtomicU64);

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl ManualClock {
    pub fn set(&self, t: u64) {
        self.0.store(t, Ordering::SeqCst);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub team: String,
    #[serde(default)]
    pub members: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Registered {
    pub team: TeamId,
    pub token: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreakRequest {
    pub target: TeamId,
    pub claim: BugCategory,
    pub payload: Payload,
    /// Base64 executable that replaces the MITM payload's `program`.
    #[serde(default)]
    pub attachment: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixRequest {
    pub covered: Vec<ReportId>,
    pub diff_ref: String,
    /// Base64 gzip tarball of the fixed bundle.
    pub archive: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixDecisionRequest {
    pub fix: FixId,
    pub approve: bool,
    pub judge: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub team: TeamId,
    pub submission: u64,
    pub language: Option<String>,
    /// Reports the caller may still record against this target.
    pub remaining: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reports {
    pub found: Vec<BugReport>,
    pub against: Vec<BugReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: u64,
}

fn valid_name(s: &str, max: usize, extra: &str) -> bool {
    !s.is_empty() && s.len() <= max && s.chars().all(|c| c.is_ascii_alphanumeric() || extra.contains(c))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// The order in which `team` sees the targets: a permutation of the sorted
/// list keyed by the contest seed and the team id.
pub fn target_order<T: Clone>(seed: u64, team: &TeamId, sorted: &[T]) -> Vec<T> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(team.0.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut out = sorted.to_vec();
    out.shuffle(&mut ChaCha8Rng::from_seed(key));
    out
}

#[derive(Default)]
struct Jobs {
    running: Mutex<usize>,
    idle: Condvar,
}

pub struct Contest {
    pub config: ContestConfig,
    store: Mutex<Store>,
    board: RwLock<Arc<Scoreboard>>,
    backend: Arc<dyn Backend>,
    clock: Arc<dyn Clock>,
    admin_hash: String,
    work: PathBuf,
    jobs: Jobs,
}

fn store_err(e: StoreError) -> ApiError {
    match e {
        StoreError::Inconsistent(i) => ApiError::conflict(i.to_string()),
        e => ApiError::internal(e.to_string()),
    }
}

impl Contest {
    /// Opens (or resumes) a contest whose log lives in `data`.
    pub fn open(
        config: ContestConfig,
        data: &std::path::Path,
        backend: Arc<dyn Backend>,
        clock: Arc<dyn Clock>,
        admin_token: &str,
    ) -> Result<Arc<Self>, String> {
        config.validate()?;
        let store = Store::open(data).map_err(|e| e.to_string())?;
        let board = Arc::new(store.state().scoreboard(&config.params()));
        Ok(Arc::new(Contest {
            config,
            store: Mutex::new(store),
            board: RwLock::new(board),
            backend,
            clock,
            admin_hash: hash_token(admin_token),
            work: data.join("work"),
            jobs: Jobs::default(),
        }))
    }

    pub fn now(&self) -> u64 {
        self.clock.now()
    }

    /// A copy of the current state.
    pub fn state(&self) -> State {
        self.store.lock().unwrap().state().clone()
    }

    fn append(&self, store: &mut Store, event: Event) -> Result<EventRecord, ApiError> {
        let rec = store.append(event, self.now()).map_err(store_err)?;
        *self.board.write().unwrap() = Arc::new(store.state().scoreboard(&self.config.params()));
        Ok(rec)
    }

    /// Moves the phase forward when the schedule says so.
    pub fn tick(&self) {
        let Some(schedule) = self.config.schedule else { return };
        let mut store = self.store.lock().unwrap();
        let target = schedule.phase_at(self.now());
        if target > store.state().phase {
            let _ = self.append(&mut store, Event::PhaseChange(PhaseChange { phase: target, by: "schedule".into() }));
        }
    }

    pub fn caller(&self, token: Option<&str>) -> Result<Caller, ApiError> {
        let Some(token) = token else { return Ok(Caller::Anonymous) };
        let h = hash_token(token);
        if h == self.admin_hash {
            return Ok(Caller::Admin);
        }
        let store = self.store.lock().unwrap();
        store.state().team_by_token_hash(&h).map(|t| Caller::Team(t.id.clone())).ok_or_else(ApiError::unauthorized)
    }

    /// Authorization, then the phase gate (including the window end when a
    /// schedule is in force).
    fn check(&self, caller: &Caller, action: &Action, state: &State) -> Result<(), ApiError> {
        authorize(caller, action)?;
        gate(action, state.phase)?;
        if let (Some(s), Some(_)) = (self.config.schedule, action.phases()) {
            if let Some(w) = s.window(state.phase) {
                if self.now() >= w.end {
                    return Err(ApiError::conflict(format!("the {} window has closed", state.phase)));
                }
            }
        }
        Ok(())
    }

    fn team_of(caller: &Caller) -> TeamId {
        match caller {
            Caller::Team(t) => t.clone(),
            _ => unreachable!("authorize admits only teams here"),
        }
    }

    pub fn register(&self, caller: &Caller, req: RegisterRequest) -> Result<Registered, ApiError> {
        self.tick();
        let mut store = self.store.lock().unwrap();
        self.check(caller, &Action::RegisterTeam, store.state())?;
        if !valid_name(&req.team, 64, "_-") || req.team == "admin" {
            return Err(ApiError::unprocessable("team ids are 1-64 letters, digits, '_' or '-'"));
        }
        let team = TeamId(req.team);
        if store.state().teams.contains_key(&team) {
            return Err(ApiError::conflict(format!("team {team} exists")));
        }
        let token = new_token();
        let event = TeamRegistered { team: team.clone(), members: req.members, token_hash: hash_token(&token) };
        self.append(&mut store, Event::Team(event))?;
        Ok(Registered { team, token })
    }

    pub fn submit(self: &Arc<Self>, caller: &Caller, language: Option<String>, archive: Vec<u8>) -> Result<Created, ApiError> {
        self.tick();
        if let Some(l) = &language {
            if !valid_name(l, 32, "+#._-") {
                return Err(ApiError::unprocessable("bad language tag"));
            }
        }
        if archive.len() > bibifi_runner::archive::MAX_ARCHIVE_BYTES {
            return Err(ApiError::new(413, "archive too large"));
        }
        bibifi_runner::archive::validate(&archive).map_err(|e| ApiError::unprocessable(format!("bad archive: {e}")))?;
        let mut store = self.store.lock().unwrap();
        self.check(caller, &Action::Submit, store.state())?;
        let team = Self::team_of(caller);
        let id = store.state().next_submission();
        let dir = self.work.join("submissions").join(id.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::write(dir.join("archive.tar.gz"), &archive).map_err(|e| ApiError::internal(e.to_string()))?;
        let event = SubmissionRecorded { id, team: team.clone(), language, archive_sha256: sha256_hex(&archive) };
        self.append(&mut store, Event::Submission(event))?;
        drop(store);
        let this = self.clone();
        self.spawn(move || this.evaluate(team, id, archive));
        Ok(Created { id })
    }

    fn evaluate(&self, team: TeamId, id: u64, archive: Vec<u8>) {
        let bundle = self.work.join("submissions").join(id.to_string()).join("bundle");
        let result = bibifi_runner::archive::unpack(&archive, &bundle)
            .map_err(|e| e.to_string())
            .and_then(|()| self.backend.evaluate(&team, id, &bundle));
        let (evidence, build_ok) = match result {
            Ok(e) => (e.evidence, e.build_ok),
            Err(e) => {
                log::warn!("submission {id}: {e}");
                (bibifi_scoring::ShipEvidence { team, qualified: false, correctness: vec![], performance: vec![] }, false)
            }
        };
        let mut store = self.store.lock().unwrap();
        if let Err(e) = self.append(&mut store, Event::TestResult(TestResult { submission: id, evidence, build_ok })) {
            log::error!("recording evaluation of {id}: {e}");
        }
    }

    pub fn submission(&self, caller: &Caller, id: u64) -> Result<SubmissionInfo, ApiError> {
        let store = self.store.lock().unwrap();
        let s = store.state().submissions.get(&id).ok_or_else(|| ApiError::not_found(format!("no submission {id}")))?;
        authorize(caller, &Action::ReadSubmission { owner: s.team.clone() })?;
        Ok(s.clone())
    }

    pub fn targets(&self, caller: &Caller) -> Result<Vec<TargetInfo>, ApiError> {
        self.tick();
        let store = self.store.lock().unwrap();
        let state = store.state();
        self.check(caller, &Action::ListTargets, state)?;
        let me = Self::team_of(caller);
        let reports = state.reports();
        let limits = self.config.limits();
        let sorted: Vec<TargetInfo> = state
            .teams
            .values()
            .filter(|t| t.id != me)
            .filter_map(|t| {
                let submission = state.target_submission(&t.id)?;
                let used = reports.iter().filter(|r| r.breaker == me && r.target == t.id).count();
                Some(TargetInfo {
                    team: t.id.clone(),
                    submission,
                    language: state.submissions[&submission].language.clone(),
                    remaining: limits.per_target.saturating_sub(used),
                })
            })
            .collect();
        Ok(target_order(self.config.seed, &me, &sorted))
    }

    pub fn challenges(&self, caller: &Caller, target: &TeamId) -> Result<Vec<PublicChallenge>, ApiError> {
        self.tick();
        let sub = {
            let store = self.store.lock().unwrap();
            self.check(caller, &Action::ReadChallenges, store.state())?;
            store.state().target_submission(target).ok_or_else(|| ApiError::not_found(format!("{target} is not a target")))?
        };
        Ok(self.backend.challenges(sub))
    }

    pub fn submit_break(self: &Arc<Self>, caller: &Caller, req: BreakRequest) -> Result<Created, ApiError> {
        self.tick();
        let mut store = self.store.lock().unwrap();
        let state = store.state();
        self.check(caller, &Action::SubmitBreak, state)?;
        let me = Self::team_of(caller);
        if req.target == me {
            return Err(ApiError::unprocessable("a team cannot break its own submission"));
        }
        let target_submission =
            state.target_submission(&req.target).ok_or_else(|| ApiError::not_found(format!("{} is not a target", req.target)))?;
        if !req.payload.supports(self.config.problem, req.claim) {
            return Err(ApiError::unprocessable(format!("a {} payload cannot show {}", req.payload.kind(), req.claim)));
        }
        let id = state.next_break();
        // The total cap does not depend on the final category, so it is checked up front.
        let probe = BugReport { id, breaker: me.clone(), target: req.target.clone(), category: BugCategory::Correctness, accepted: true, evidence: String::new() };
        let limits = self.config.limits();
        if let Err(v @ LimitViolation::TotalCap { .. }) = enforce_with(bibifi_scoring::SubmissionLimits { per_security_category: None, ..limits }, &state.reports(), &probe) {
            return Err(ApiError::conflict(v.to_string()));
        }
        let mut payload = req.payload;
        if let Some(b64) = &req.attachment {
            let Payload::Mitm { program, strategy: None, .. } = &mut payload else {
                return Err(ApiError::unprocessable("attachments are only for MITM programs"));
            };
            let bytes = base64::engine::general_purpose::STANDARD.decode(b64).map_err(|_| ApiError::unprocessable("attachment is not base64"))?;
            let path = self.work.join("breaks").join(id.0.to_string()).join("mitm");
            write_executable(&path, &bytes).map_err(|e| ApiError::internal(e.to_string()))?;
            *program = Some(path);
        } else if let Payload::Mitm { program: Some(_), .. } = payload {
            return Err(ApiError::unprocessable("MITM programs must be attached"));
        }
        let submission = BreakSubmission { breaker: me, target: req.target, claim: req.claim, payload };
        self.append(&mut store, Event::Break(BreakRecorded { id, target_submission, submission: submission.clone() }))?;
        drop(store);
        let this = self.clone();
        self.spawn(move || this.adjudicate(id, target_submission, submission));
        Ok(Created { id: id.0 })
    }

    fn adjudicate(&self, id: ReportId, target_submission: u64, sub: BreakSubmission) {
        let prior = self.state().reports();
        let decision = match self.backend.adjudicate(&sub, target_submission, &prior, id) {
            Ok(d) => d,
            Err(e) => {
                log::error!("break {id}: {e}");
                bibifi_judge::Decision { outcome: Adjudication::OracleBug { transcript: format!("judge error: {e}") }, report: None }
            }
        };
        let mut store = self.store.lock().unwrap();
        // Limits are checked again here, where recording is serialized.
        let (outcome, recorded) = match decision.report {
            Some(r) => match enforce_with(self.config.limits(), &store.state().reports(), &r) {
                Ok(()) => (decision.outcome, Some(r)),
                Err(violation) => (Adjudication::Limit { violation }, None),
            },
            None => (decision.outcome, None),
        };
        if let Err(e) = self.append(&mut store, Event::JudgeDecision(JudgeDecision::Break { report: id, outcome, recorded })) {
            log::error!("recording break {id}: {e}");
        }
    }

    pub fn break_info(&self, caller: &Caller, id: ReportId) -> Result<BreakInfo, ApiError> {
        let store = self.store.lock().unwrap();
        let b = store.state().breaks.get(&id).ok_or_else(|| ApiError::not_found(format!("no break {id}")))?;
        let action = Action::ReadBreak {
            breaker: b.submission.breaker.clone(),
            target: b.submission.target.clone(),
            accepted: b.recorded.is_some(),
        };
        authorize(caller, &action)?;
        Ok(b.clone())
    }

    pub fn reports(&self, caller: &Caller) -> Result<Reports, ApiError> {
        authorize(caller, &Action::ReadOwnReports)?;
        let me = Self::team_of(caller);
        let all = self.state().reports();
        Ok(Reports {
            found: all.iter().filter(|r| r.breaker == me).cloned().collect(),
            against: all.into_iter().filter(|r| r.target == me).collect(),
        })
    }

    pub fn submit_fix(self: &Arc<Self>, caller: &Caller, req: FixRequest) -> Result<Created, ApiError> {
        self.tick();
        let archive = base64::engine::general_purpose::STANDARD
            .decode(&req.archive)
            .map_err(|_| ApiError::unprocessable("archive is not base64"))?;
        bibifi_runner::archive::validate(&archive).map_err(|e| ApiError::unprocessable(format!("bad archive: {e}")))?;
        let mut store = self.store.lock().unwrap();
        let state = store.state();
        self.check(caller, &Action::SubmitFix, state)?;
        let me = Self::team_of(caller);
        if req.covered.is_empty() {
            return Err(ApiError::unprocessable("a fix must cover at least one report"));
        }
        let reports = state.reports();
        for id in &req.covered {
            if !reports.iter().any(|r| r.id == *id && r.target == me) {
                return Err(ApiError::unprocessable(format!("report {id} is not an accepted report against {me}")));
            }
        }
        let original = state.target_submission(&me).ok_or_else(|| ApiError::conflict("no qualified submission to fix"))?;
        let id = FixId(state.next_fix());
        let fix = Fix { id, builder: me, covered: req.covered.iter().copied().collect(), diff_ref: req.diff_ref, state: FixState::Pending };
        let dir = self.work.join("fixes").join(id.0.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| ApiError::internal(e.to_string()))?;
        std::fs::write(dir.join("archive.tar.gz"), &archive).map_err(|e| ApiError::internal(e.to_string()))?;
        self.append(&mut store, Event::Fix(FixRecorded { fix: fix.clone(), archive_sha256: sha256_hex(&archive) }))?;
        drop(store);
        let this = self.clone();
        self.spawn(move || this.precheck(fix, original, archive));
        Ok(Created { id: id.0 })
    }

    fn precheck(&self, fix: Fix, original: u64, archive: Vec<u8>) {
        let state = self.state();
        let reports = state.reports();
        let subs: Vec<(ReportId, BreakSubmission)> =
            fix.covered.iter().filter_map(|id| Some((*id, state.breaks.get(id)?.submission.clone()))).collect();
        let bundle = self.work.join("fixes").join(fix.id.0.to_string()).join("bundle");
        let precheck = bibifi_runner::archive::unpack(&archive, &bundle)
            .map_err(|e| e.to_string())
            .and_then(|()| self.backend.precheck(&fix, &bundle, original, &reports, &subs))
            .unwrap_or_else(|e| {
                log::warn!("fix {}: {e}", fix.id);
                bibifi_judge::Precheck::default()
            });
        let mut store = self.store.lock().unwrap();
        let state = validate_fix(&fix, &store.state().reports(), &precheck, &store.state().approved_fixes(), None);
        if let Err(e) = self.append(&mut store, Event::JudgeDecision(JudgeDecision::FixPrecheck { fix: fix.id, precheck, state })) {
            log::error!("recording precheck of {}: {e}", fix.id);
        }
    }

    pub fn fix_info(&self, caller: &Caller, id: FixId) -> Result<FixInfo, ApiError> {
        let store = self.store.lock().unwrap();
        let f = store.state().fixes.get(&id.0).ok_or_else(|| ApiError::not_found(format!("no fix {id}")))?;
        authorize(caller, &Action::ReadFix { builder: f.fix.builder.clone() })?;
        Ok(f.clone())
    }

    /// Every fix, for the judges' review queue.
    pub fn review_queue(&self, caller: &Caller) -> Result<Vec<FixInfo>, ApiError> {
        authorize(caller, &Action::ReviewFixes)?;
        Ok(self.state().fixes.into_values().collect())
    }

    pub fn decide_fix(&self, caller: &Caller, req: FixDecisionRequest) -> Result<FixState, ApiError> {
        self.tick();
        authorize(caller, &Action::DecideFix)?;
        if req.judge.trim().is_empty() {
            return Err(ApiError::unprocessable("a decision needs the judge's identity"));
        }
        if !req.approve && req.rationale.trim().is_empty() {
            return Err(ApiError::unprocessable("a rejection needs a rationale"));
        }
        let mut store = self.store.lock().unwrap();
        let state = store.state();
        let info = state.fixes.get(&req.fix.0).ok_or_else(|| ApiError::not_found(format!("no fix {}", req.fix)))?;
        let Some(precheck) = &info.precheck else { return Err(ApiError::conflict("prechecks are still running")) };
        if info.fix.state != FixState::Pending {
            return Err(ApiError::conflict(format!("fix {} is already decided", req.fix)));
        }
        let decision = FixDecision { approve: req.approve, judge: req.judge, at: self.now(), rationale: req.rationale };
        let next = validate_fix(&info.fix, &state.reports(), precheck, &state.approved_fixes(), Some(&decision));
        self.append(&mut store, Event::JudgeDecision(JudgeDecision::FixReview { fix: req.fix, decision, state: next.clone() }))?;
        Ok(next)
    }

    pub fn set_phase(&self, caller: &Caller, phase: Phase) -> Result<Phase, ApiError> {
        authorize(caller, &Action::SetPhase)?;
        let mut store = self.store.lock().unwrap();
        let current = store.state().phase;
        if phase <= current {
            return Err(ApiError::conflict(format!("cannot move from {current} to {phase}")));
        }
        self.append(&mut store, Event::PhaseChange(PhaseChange { phase, by: "admin".into() }))?;
        Ok(phase)
    }

    pub fn scoreboard(&self, caller: &Caller) -> Result<Arc<Scoreboard>, ApiError> {
        self.tick();
        let board = self.board.read().unwrap().clone();
        let hidden = self.config.hide_scores && board.phase != Phase::Closed;
        authorize(caller, &Action::ReadScoreboard { hidden })?;
        Ok(board)
    }

    pub fn scoreboard_csv(&self, caller: &Caller) -> Result<String, ApiError> {
        let board = self.scoreboard(caller)?;
        Ok(board.to_csv(&self.state()))
    }

    /// Records after `since`. Teams and anonymous callers get the public
    /// view: no token hashes, payloads or evidence.
    pub fn events(&self, caller: &Caller, since: u64) -> Result<Vec<serde_json::Value>, ApiError> {
        self.tick();
        authorize(caller, &Action::ReadEvents)?;
        let store = self.store.lock().unwrap();
        Ok(store
            .since(since)
            .iter()
            .map(|r| {
                let v = serde_json::to_value(r).expect("records serialize");
                if *caller == Caller::Admin { v } else { redact(v) }
            })
            .collect())
    }

    pub fn oracle_bugs(&self, caller: &Caller) -> Result<Vec<OracleBug>, ApiError> {
        authorize(caller, &Action::ReadOracleBugs)?;
        Ok(self.backend.oracle_bugs())
    }

    fn spawn(self: &Arc<Self>, job: impl FnOnce() + Send + 'static) {
        *self.jobs.running.lock().unwrap() += 1;
        let this = self.clone();
        std::thread::spawn(move || {
            let guard = JobGuard(&this);
            job();
            drop(guard);
        });
    }

    /// Waits until no background job is running. False on timeout.
    pub fn wait_idle(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut n = self.jobs.running.lock().unwrap();
        while *n > 0 {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return false;
            }
            n = self.jobs.idle.wait_timeout(n, left).unwrap().0;
        }
        true
    }
}

/// Decrements the job count even if the job panics.
struct JobGuard<'a>(&'a Contest);

impl Drop for JobGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.0.jobs.running.lock().unwrap();
        *n -= 1;
        self.0.jobs.idle.notify_all();
    }
}

fn write_executable(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::create_dir_all(path.parent().expect("path has a parent"))?;
    std::fs::write(path, bytes)?;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))
}

fn redact(mut v: serde_json::Value) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("token_hash");
                m.remove("transcript");
                if let Some(serde_json::Value::String(s)) = m.get_mut("evidence") {
                    s.clear();
                }
                if let Some(sub) = m.get_mut("submission").and_then(|s| s.as_object_mut()) {
                    sub.remove("payload");
                }
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    strip(&mut v);
    v
}
