use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Largest timestamp or room id accepted on the command line.
pub const MAX_NUMBER: u64 = 1_073_741_823;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Employee,
    Guest,
}

impl Kind {
    pub fn flag(self) -> &'static str {
        match self {
            Kind::Employee => "-E",
            Kind::Guest => "-G",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Person {
    pub kind: Kind,
    pub name: String,
}

impl Person {
    pub fn new(kind: Kind, name: impl Into<String>) -> Self {
        Person { kind, name: name.into() }
    }
}

impl fmt::Display for Person {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.flag(), self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Arrive,
    Leave,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub ts: u64,
    pub person: Person,
    pub action: Action,
    /// `None` for the gallery itself.
    pub room: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Gallery,
    Room(u64),
}

/// One stay inside a room, or inside the gallery when `room` is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stay {
    pub room: Option<u64>,
    pub from: u64,
    pub until: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GalleryState {
    pub location: BTreeMap<Person, Location>,
    /// Every stay per person in event order, gallery and room stays interleaved.
    pub stays: BTreeMap<Person, Vec<Stay>>,
    pub last_ts: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rejected;

impl GalleryState {
    pub fn fold<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, Rejected> {
        let mut state = GalleryState::default();
        for e in events {
            state.apply(e)?;
        }
        Ok(state)
    }

    /// Folds without checking anything; later events simply overwrite locations.
    pub fn fold_lenient<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut state = GalleryState::default();
        for e in events {
            state.record(e);
        }
        state
    }

    pub fn next_ts(&self) -> u64 {
        self.last_ts.map_or(1, |t| t + 1)
    }

    pub fn check(&self, e: &Event) -> Result<(), Rejected> {
        if self.last_ts.is_some_and(|t| e.ts <= t) {
            return Err(Rejected);
        }
        let here = self.location.get(&e.person).copied();
        let ok = match (e.action, e.room, here) {
            (Action::Arrive, None, None) => true,
            (Action::Arrive, Some(_), Some(Location::Gallery)) => true,
            (Action::Leave, Some(r), Some(Location::Room(cur))) => r == cur,
            (Action::Leave, None, Some(Location::Gallery)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Rejected)
        }
    }

    pub fn apply(&mut self, e: &Event) -> Result<(), Rejected> {
        self.check(e)?;
        self.record(e);
        Ok(())
    }

    fn record(&mut self, e: &Event) {
        let stays = self.stays.entry(e.person.clone()).or_default();
        match e.action {
            Action::Arrive => {
                stays.push(Stay { room: e.room, from: e.ts, until: None });
                let loc = e.room.map_or(Location::Gallery, Location::Room);
                self.location.insert(e.person.clone(), loc);
            }
            Action::Leave => {
                if let Some(open) = stays.iter_mut().rev().find(|s| s.room == e.room && s.until.is_none()) {
                    open.until = Some(e.ts);
                }
                match e.room {
                    Some(_) => {
                        self.location.insert(e.person.clone(), Location::Gallery);
                    }
                    None => {
                        // Leaving the gallery closes any room stay left open by a lenient fold.
                        for s in stays.iter_mut().filter(|s| s.until.is_none()) {
                            s.until = Some(e.ts);
                        }
                        self.location.remove(&e.person);
                    }
                }
            }
        }
        self.last_ts = Some(e.ts);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ts: u64, name: &str, action: Action, room: Option<u64>) -> Event {
        Event { ts, person: Person::new(Kind::Guest, name), action, room }
    }

    #[test]
    fn semantic_preconditions() {
        let mut s = GalleryState::default();
        assert!(s.apply(&ev(1, "a", Action::Leave, None)).is_err());
        assert!(s.apply(&ev(1, "a", Action::Arrive, Some(1))).is_err());
        s.apply(&ev(1, "a", Action::Arrive, None)).unwrap();
        assert!(s.apply(&ev(2, "a", Action::Arrive, None)).is_err());
        s.apply(&ev(2, "a", Action::Arrive, Some(3))).unwrap();
        assert!(s.apply(&ev(3, "a", Action::Arrive, Some(4))).is_err());
        assert!(s.apply(&ev(3, "a", Action::Leave, Some(4))).is_err());
        assert!(s.apply(&ev(3, "a", Action::Leave, None)).is_err());
        // Timestamps must strictly increase.
        assert!(s.apply(&ev(2, "a", Action::Leave, Some(3))).is_err());
        s.apply(&ev(5, "a", Action::Leave, Some(3))).unwrap();
        s.apply(&ev(6, "a", Action::Leave, None)).unwrap();
        assert!(s.location.is_empty());
        assert_eq!(s.stays[&Person::new(Kind::Guest, "a")].len(), 2);
    }

    #[test]
    fn kinds_are_distinct_people() {
        let mut s = GalleryState::default();
        s.apply(&ev(1, "a", Action::Arrive, None)).unwrap();
        let emp = Event { ts: 2, person: Person::new(Kind::Employee, "a"), action: Action::Arrive, room: None };
        s.apply(&emp).unwrap();
        assert_eq!(s.location.len(), 2);
    }
}
