use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::defects::{compute_break_scores, group_finders, unify_defects};
use crate::model::{BugReport, CorrectnessOutcome, FixCoverage, PerformanceOutcome, ScoringParams, TeamId, TestKind};
use crate::points::Points;
use crate::ship::{clamp_measure, compute_ship_score, score_performance_test, RankedPerformance};
use crate::ScoreError;

/// Build-phase evidence for one team's latest evaluated submission.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShipEvidence {
    pub team: TeamId,
    pub qualified: bool,
    pub correctness: Vec<CorrectnessOutcome>,
    pub performance: Vec<PerformanceOutcome>,
}

#[derive(Clone, Debug, Default)]
pub struct ScoreInputs {
    pub teams: Vec<TeamId>,
    pub ship: Vec<ShipEvidence>,
    pub reports: Vec<BugReport>,
    pub fixes: Vec<FixCoverage>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetailKind {
    Test,
    Performance,
    Defect,
    Break,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetailLine {
    pub kind: DetailKind,
    pub reference: String,
    pub points: Points,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreLedger {
    pub team: TeamId,
    pub ship: Points,
    pub resilience: Points,
    pub break_score: Points,
    pub details: Vec<DetailLine>,
}

impl ScoreLedger {
    /// Build-it total: ship plus (non-positive) resilience.
    pub fn build_total(&self) -> Points {
        self.ship + self.resilience
    }
}

/// Recomputes every team's ledger from scratch. Teams are returned in id order.
pub fn compute_ledgers(params: &ScoringParams, inputs: &ScoreInputs) -> Result<Vec<ScoreLedger>, ScoreError> {
    let mut teams: BTreeSet<TeamId> = inputs.teams.iter().cloned().collect();
    teams.extend(inputs.ship.iter().map(|s| s.team.clone()));

    let ranges = performance_ranges(&inputs.ship);
    let groups = unify_defects(&inputs.reports, &inputs.fixes, params)?;
    let break_scores = compute_break_scores(&groups, &inputs.reports);

    let mut ledgers: BTreeMap<TeamId, ScoreLedger> = teams
        .into_iter()
        .map(|t| {
            let ledger = ScoreLedger {
                team: t.clone(),
                ship: Points::ZERO,
                resilience: Points::ZERO,
                break_score: Points::ZERO,
                details: Vec::new(),
            };
            (t, ledger)
        })
        .collect();

    for evidence in inputs.ship.iter().filter(|s| s.qualified) {
        let ledger = ledgers.get_mut(&evidence.team).expect("team registered above");
        let ranked: Vec<RankedPerformance> = evidence
            .performance
            .iter()
            .filter_map(|p| {
                let (best, worst) = *ranges.get(&p.test_id)?;
                Some(RankedPerformance { outcome: p.clone(), best, worst })
            })
            .collect();
        ledger.ship = compute_ship_score(&evidence.correctness, &ranked, params)?;
        for c in &evidence.correctness {
            let worth = match (c.passed, c.kind) {
                (false, _) => Points::ZERO,
                (true, TestKind::Mandatory) => params.m(),
                (true, TestKind::Optional) => params.m() / 2,
            };
            ledger.details.push(DetailLine { kind: DetailKind::Test, reference: c.test_id.clone(), points: worth });
        }
        for r in &ranked {
            let v = clamp_measure(r.outcome.measure, r.best, r.worst);
            let worth = score_performance_test(v, r.best, r.worst, params.m())?;
            ledger.details.push(DetailLine {
                kind: DetailKind::Performance,
                reference: r.outcome.test_id.clone(),
                points: worth,
            });
        }
    }

    for group in &groups {
        if let Some(ledger) = ledgers.get_mut(&group.target) {
            ledger.resilience += -group.points;
            ledger.details.push(DetailLine {
                kind: DetailKind::Defect,
                reference: group.id.clone(),
                points: -group.points,
            });
        }
        let finders = group_finders(group, &inputs.reports);
        for team in &finders {
            let ledger = ledgers.entry(team.clone()).or_insert_with(|| ScoreLedger {
                team: team.clone(),
                ship: Points::ZERO,
                resilience: Points::ZERO,
                break_score: Points::ZERO,
                details: Vec::new(),
            });
            ledger.details.push(DetailLine {
                kind: DetailKind::Break,
                reference: group.id.clone(),
                points: group.points / finders.len() as i64,
            });
        }
    }
    for (team, score) in break_scores {
        if let Some(ledger) = ledgers.get_mut(&team) {
            ledger.break_score = score;
        }
    }

    Ok(ledgers.into_values().collect())
}

/// Contest-wide (best, worst) per performance test over qualifying submissions.
pub fn performance_ranges(ship: &[ShipEvidence]) -> BTreeMap<String, (Points, Points)> {
    let mut ranges: BTreeMap<String, (Points, Points)> = BTreeMap::new();
    for p in ship.iter().filter(|s| s.qualified).flat_map(|s| &s.performance) {
        ranges
            .entry(p.test_id.clone())
            .and_modify(|(best, worst)| {
                *best = (*best).min(p.measure);
                *worst = (*worst).max(p.measure);
            })
            .or_insert((p.measure, p.measure));
    }
    ranges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BugCategory, FixId, Problem, ReportId};

    fn evidence(team: &str, perf: i64) -> ShipEvidence {
        ShipEvidence {
            team: team.into(),
            qualified: true,
            correctness: vec![CorrectnessOutcome { test_id: "m1".into(), kind: TestKind::Mandatory, passed: true }],
            performance: vec![PerformanceOutcome {
                test_id: "p1".into(),
                measure: Points::from_integer(perf),
                unit: "ms".into(),
            }],
        }
    }

    #[test]
    fn empty_contest_has_no_rows() {
        let params = ScoringParams::new(Problem::Ehr);
        assert!(compute_ledgers(&params, &ScoreInputs::default()).unwrap().is_empty());
    }

    #[test]
    fn ship_uses_field_wide_range() {
        let params = ScoringParams::new(Problem::Ehr);
        let inputs = ScoreInputs {
            ship: vec![evidence("a", 2), evidence("b", 6), evidence("c", 10)],
            ..Default::default()
        };
        let ledgers = compute_ledgers(&params, &inputs).unwrap();
        let ship: Vec<_> = ledgers.iter().map(|l| l.ship).collect();
        assert_eq!(ship, vec![Points::from_integer(100), Points::from_integer(75), Points::from_integer(50)]);
    }

    #[test]
    fn unqualified_submission_scores_nothing_and_does_not_move_range() {
        let params = ScoringParams::new(Problem::Ehr);
        let mut slow = evidence("z", 1000);
        slow.qualified = false;
        let inputs = ScoreInputs { ship: vec![evidence("a", 2), evidence("b", 10), slow], ..Default::default() };
        let ledgers = compute_ledgers(&params, &inputs).unwrap();
        assert_eq!(ledgers[1].ship, Points::from_integer(50));
        assert_eq!(ledgers[2].ship, Points::ZERO);
    }

    #[test]
    fn fix_resplits_and_restores_resilience() {
        let params = ScoringParams::new(Problem::Ehr);
        let reports = vec![
            BugReport {
                id: ReportId(1),
                breaker: "x".into(),
                target: "t".into(),
                category: BugCategory::Correctness,
                accepted: true,
                evidence: String::new(),
            },
            BugReport {
                id: ReportId(2),
                breaker: "y".into(),
                target: "t".into(),
                category: BugCategory::Correctness,
                accepted: true,
                evidence: String::new(),
            },
        ];
        let mut inputs = ScoreInputs { teams: vec!["t".into()], reports, ..Default::default() };
        let before = compute_ledgers(&params, &inputs).unwrap();
        inputs.fixes.push(FixCoverage {
            id: FixId(1),
            covered: [ReportId(1), ReportId(2)].into_iter().collect(),
            approved: true,
        });
        let after = compute_ledgers(&params, &inputs).unwrap();
        let find = |ls: &[ScoreLedger], t: &str| ls.iter().find(|l| l.team.0 == t).unwrap().clone();
        assert_eq!(find(&before, "t").resilience, Points::from_integer(-50));
        assert_eq!(find(&after, "t").resilience, Points::from_integer(-25));
        assert_eq!(find(&before, "x").break_score, Points::from_integer(25));
        assert_eq!(find(&after, "x").break_score, Points::new(25, 2));
        assert_eq!(find(&after, "y").break_score, Points::new(25, 2));
    }
}
