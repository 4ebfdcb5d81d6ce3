use std::collections::HashSet;

use crate::model::{CorrectnessOutcome, PerformanceOutcome, ScoringParams, TestKind};
use crate::points::Points;
use crate::ScoreError;

/// Worth of one performance test: `M * (worst - v) / (worst - best)`.
///
/// `v` must already be clamped into `[best, worst]`. A uniform field
/// (`worst == best`) earns the full `M`.
pub fn score_performance_test(v: Points, best: Points, worst: Points, m: Points) -> Result<Points, ScoreError> {
    if v.is_negative() || best.is_negative() || worst.is_negative() || m.is_negative() {
        return Err(ScoreError::NegativeInput);
    }
    if best > worst {
        return Err(ScoreError::InvertedRange);
    }
    if v < best || v > worst {
        return Err(ScoreError::MeasureOutOfRange);
    }
    if worst == best {
        return Ok(m);
    }
    Ok(Points(m.0 * (worst.0 - v.0) / (worst.0 - best.0)))
}

/// Clamps a raw measure into the contest-wide range before scoring.
pub fn clamp_measure(v: Points, best: Points, worst: Points) -> Points {
    v.max(best).min(worst)
}

/// A performance outcome paired with the contest-wide best and worst measure.
#[derive(Clone, Debug)]
pub struct RankedPerformance {
    pub outcome: PerformanceOutcome,
    pub best: Points,
    pub worst: Points,
}

pub fn compute_ship_score(
    correctness: &[CorrectnessOutcome],
    perf: &[RankedPerformance],
    params: &ScoringParams,
) -> Result<Points, ScoreError> {
    let mut seen = HashSet::new();
    let ids = correctness.iter().map(|c| &c.test_id).chain(perf.iter().map(|p| &p.outcome.test_id));
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(ScoreError::DuplicateTest(id.clone()));
        }
    }

    let m = params.m();
    let mut total = Points::ZERO;
    for c in correctness.iter().filter(|c| c.passed) {
        total += match c.kind {
            TestKind::Mandatory => m,
            TestKind::Optional => m / 2,
        };
    }
    for p in perf {
        let v = clamp_measure(p.outcome.measure, p.best, p.worst);
        total += score_performance_test(v, p.best, p.worst, m)?;
    }
    Ok(total)
}
