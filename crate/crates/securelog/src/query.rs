use std::collections::{BTreeMap, BTreeSet};

use crate::model::{GalleryState, Kind, Location, Person, Stay};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    State,
    History(Person),
    Time(Person),
    Intersection(Vec<Person>),
}

/// How `-S` orders room lines. The oracle sorts rooms numerically.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RoomOrder {
    #[default]
    Numeric,
    Lexicographic,
}

fn lines(lines: Vec<String>) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

pub fn answer(state: &GalleryState, query: &Query, order: RoomOrder) -> String {
    match query {
        Query::State => current_state(state, order),
        Query::History(p) => history(state, p),
        Query::Time(p) => time_spent(state, p),
        Query::Intersection(ps) => intersection(state, ps),
    }
}

pub fn current_state(state: &GalleryState, order: RoomOrder) -> String {
    let mut out = Vec::new();
    for kind in [Kind::Employee, Kind::Guest] {
        // BTreeMap order is (kind, name), so each group is already alphabetical.
        out.extend(state.location.keys().filter(|p| p.kind == kind).map(|p| p.name.clone()));
    }
    let mut rooms: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
    for (p, loc) in &state.location {
        if let Location::Room(r) = loc {
            rooms.entry(*r).or_default().push(&p.name);
        }
    }
    let mut rooms: Vec<(u64, Vec<&str>)> = rooms.into_iter().collect();
    if order == RoomOrder::Lexicographic {
        rooms.sort_by_key(|(r, _)| r.to_string());
    }
    for (r, mut names) in rooms {
        names.sort_unstable();
        out.push(format!("{r}: {}", names.join(",")));
    }
    lines(out)
}

pub fn history(state: &GalleryState, person: &Person) -> String {
    let rooms: Vec<String> = state
        .stays
        .get(person)
        .map(|stays| stays.iter().filter_map(|s| s.room).map(|r| r.to_string()).collect())
        .unwrap_or_default();
    if rooms.is_empty() {
        String::new()
    } else {
        lines(vec![rooms.join(",")])
    }
}

/// Total time inside the gallery; a stay still open runs to the latest timestamp.
pub fn time_spent(state: &GalleryState, person: &Person) -> String {
    let Some(stays) = state.stays.get(person) else { return String::new() };
    let now = state.last_ts.unwrap_or(0);
    let total: u64 =
        stays.iter().filter(|s| s.room.is_none()).map(|s| s.until.unwrap_or(now).saturating_sub(s.from)).sum();
    lines(vec![total.to_string()])
}

/// Rooms that every listed person occupied at the same moment.
pub fn intersection(state: &GalleryState, people: &[Person]) -> String {
    if people.is_empty() || people.iter().any(|p| !state.stays.contains_key(p)) {
        return String::new();
    }
    let room_stays = |p: &Person| -> Vec<Stay> { state.stays[p].iter().filter(|s| s.room.is_some()).copied().collect() };
    let mut candidates: BTreeSet<u64> = room_stays(&people[0]).iter().filter_map(|s| s.room).collect();
    for p in &people[1..] {
        let theirs: BTreeSet<u64> = room_stays(p).iter().filter_map(|s| s.room).collect();
        candidates = candidates.intersection(&theirs).copied().collect();
    }
    let shared: Vec<String> = candidates
        .into_iter()
        .filter(|&room| {
            let per_person: Vec<Vec<(u64, u64)>> = people
                .iter()
                .map(|p| {
                    room_stays(p)
                        .iter()
                        .filter(|s| s.room == Some(room))
                        .map(|s| (s.from, s.until.unwrap_or(u64::MAX)))
                        .collect()
                })
                .collect();
            overlap_exists(&per_person)
        })
        .map(|r| r.to_string())
        .collect();
    if shared.is_empty() {
        String::new()
    } else {
        lines(vec![shared.join(",")])
    }
}

/// Whether one half-open interval can be picked per list so all intersect.
fn overlap_exists(lists: &[Vec<(u64, u64)>]) -> bool {
    fn go(lists: &[Vec<(u64, u64)>], lo: u64, hi: u64) -> bool {
        match lists.split_first() {
            None => lo < hi,
            Some((first, rest)) => first.iter().any(|&(a, b)| {
                let (lo, hi) = (lo.max(a), hi.min(b));
                lo < hi && go(rest, lo, hi)
            }),
        }
    }
    go(lists, 0, u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, Event};

    fn g(name: &str) -> Person {
        Person::new(Kind::Guest, name)
    }

    fn e(name: &str) -> Person {
        Person::new(Kind::Employee, name)
    }

    fn fold(events: &[(u64, Person, Action, Option<u64>)]) -> GalleryState {
        let evs: Vec<Event> =
            events.iter().map(|(ts, p, a, r)| Event { ts: *ts, person: p.clone(), action: *a, room: *r }).collect();
        GalleryState::fold(&evs).unwrap()
    }

    #[test]
    fn state_layout() {
        use Action::*;
        let s = fold(&[
            (1, g("Jill"), Arrive, None),
            (2, e("Zed"), Arrive, None),
            (3, g("Fred"), Arrive, None),
            (4, e("Abe"), Arrive, None),
            (5, g("Fred"), Arrive, Some(10)),
            (6, e("Zed"), Arrive, Some(9)),
            (7, g("Jill"), Arrive, Some(9)),
        ]);
        assert_eq!(current_state(&s, RoomOrder::Numeric), "Abe\nZed\nFred\nJill\n9: Jill,Zed\n10: Fred\n");
        assert_eq!(current_state(&s, RoomOrder::Lexicographic), "Abe\nZed\nFred\nJill\n10: Fred\n9: Jill,Zed\n");
        assert_eq!(current_state(&GalleryState::default(), RoomOrder::Numeric), "");
    }

    #[test]
    fn time_for_one_visit() {
        use Action::*;
        let s = fold(&[(1, g("a"), Arrive, None), (5, g("a"), Leave, None)]);
        assert_eq!(time_spent(&s, &g("a")), "4\n");
        assert_eq!(time_spent(&s, &g("b")), "");
        // An open stay runs to the last timestamp in the log.
        let s = fold(&[(1, g("a"), Arrive, None), (5, g("a"), Leave, None), (7, g("a"), Arrive, None), (9, g("b"), Arrive, None)]);
        assert_eq!(time_spent(&s, &g("a")), "6\n");
    }

    #[test]
    fn history_and_intersection() {
        use Action::*;
        let s = fold(&[
            (1, g("a"), Arrive, None),
            (2, g("b"), Arrive, None),
            (3, g("a"), Arrive, Some(1)),
            (4, g("a"), Leave, Some(1)),
            (5, g("b"), Arrive, Some(1)),
            (6, g("a"), Arrive, Some(2)),
            (7, g("b"), Leave, Some(1)),
            (8, g("b"), Arrive, Some(2)),
        ]);
        assert_eq!(history(&s, &g("a")), "1,2\n");
        assert_eq!(history(&s, &g("zz")), "");
        // Both were in room 1 but never together; room 2 overlaps from t=8 on.
        assert_eq!(intersection(&s, &[g("a"), g("b")]), "2\n");
        assert_eq!(intersection(&s, &[g("a"), g("c")]), "");
    }
}
