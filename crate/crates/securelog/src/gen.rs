//! Seeded generators for command sequences and tokens.

use rand::distr::{Alphanumeric, SampleString};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::cli::AppendArgs;
use crate::model::{Action, Event, GalleryState, Kind, Location, Person, MAX_NUMBER};

const NAMES: &[&str] = &["Fred", "Jill", "Ann", "Bob", "Cara", "Dmitri", "Eve", "Gus", "Hana", "Ivan"];

pub fn token(rng: &mut impl Rng) -> String {
    let len = rng.random_range(16..=24);
    Alphanumeric.sample_string(rng, len)
}

/// Shape of generated sequences.
#[derive(Clone, Debug)]
pub struct SequenceSpec {
    pub len: usize,
    pub people: usize,
    /// Room ids are drawn from this many values.
    pub rooms: Vec<u64>,
    /// Leave timestamps implicit with this probability.
    pub implicit_ts: f64,
    /// Keep at least one person in the gallery at the end.
    pub end_occupied: bool,
}

impl SequenceSpec {
    pub fn challenge(rng: &mut impl Rng) -> Self {
        let rooms = (0..rng.random_range(2..=5)).map(|_| rng.random_range(0..=MAX_NUMBER)).collect();
        SequenceSpec { len: rng.random_range(8..=30), people: rng.random_range(2..=6), rooms, implicit_ts: 0.0, end_occupied: true }
    }

    pub fn fuzz(rng: &mut impl Rng) -> Self {
        let rooms = (0..rng.random_range(1..=12)).map(|_| rng.random_range(0..=20)).collect();
        SequenceSpec { len: rng.random_range(1..=40), people: rng.random_range(1..=5), rooms, implicit_ts: 0.3, end_occupied: false }
    }
}

fn people(rng: &mut impl Rng, n: usize) -> Vec<Person> {
    let mut names: Vec<&str> = NAMES.to_vec();
    let mut out = Vec::new();
    for _ in 0..n.min(NAMES.len()) {
        let i = rng.random_range(0..names.len());
        let kind = if rng.random_bool(0.5) { Kind::Employee } else { Kind::Guest };
        out.push(Person::new(kind, names.swap_remove(i)));
    }
    out
}

/// A sequence of logappend invocations that the oracle accepts in order.
pub fn valid_sequence(rng: &mut impl Rng, spec: &SequenceSpec, token: &str, log: &str) -> Vec<AppendArgs> {
    let cast = people(rng, spec.people.max(1));
    let mut state = GalleryState::default();
    let mut out = Vec::new();
    for _ in 0..spec.len {
        let person = cast.choose(rng).expect("nonempty cast").clone();
        let (action, room) = match state.location.get(&person) {
            None => (Action::Arrive, None),
            Some(Location::Gallery) => {
                let occupied = state.location.len();
                if rng.random_bool(0.3) && !(spec.end_occupied && occupied == 1) {
                    (Action::Leave, None)
                } else {
                    (Action::Arrive, Some(*spec.rooms.choose(rng).expect("nonempty rooms")))
                }
            }
            Some(Location::Room(r)) => (Action::Leave, Some(*r)),
        };
        let implicit = state.next_ts();
        let ts = if rng.random_bool(spec.implicit_ts) { implicit } else { implicit + rng.random_range(0..5) };
        let event = Event { ts, person: person.clone(), action, room };
        state.apply(&event).expect("generator emits valid events");
        // Implicit timestamps resolve to last + 1, so only those can be omitted.
        let ts_arg = if ts == implicit && spec.implicit_ts > 0.0 && rng.random_bool(spec.implicit_ts) { None } else { Some(ts) };
        out.push(AppendArgs { ts: ts_arg, token: token.to_owned(), person, action, room, log: log.to_owned() });
    }
    out
}

/// Resolves a transcript into events the way the oracle does, dropping
/// invocations it would reject.
pub fn events_of(transcript: &[AppendArgs]) -> Vec<Event> {
    let mut state = GalleryState::default();
    let mut events = Vec::new();
    for a in transcript {
        let e = Event { ts: a.ts.unwrap_or_else(|| state.next_ts()), person: a.person.clone(), action: a.action, room: a.room };
        if e.ts <= MAX_NUMBER && state.apply(&e).is_ok() {
            events.push(e);
        }
    }
    events
}
