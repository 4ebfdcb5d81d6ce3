use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::model::{BugCategory, BugReport, DefectGroup, FixCoverage, Problem, ReportId, ScoringParams, TeamId};
use crate::points::Points;
use crate::ScoreError;

/// Partitions the accepted reports into defect groups.
///
/// Each approved fix yields one group over the accepted reports it covers.
/// Uncovered reports stand alone, except that for securelog and atm all
/// uncovered privacy (resp. integrity) reports against one target share a
/// single group: a black-box break there proves that *a* vulnerability
/// exists but not which one, so at most one of each is charged.
pub fn unify_defects(
    reports: &[BugReport],
    fixes: &[FixCoverage],
    params: &ScoringParams,
) -> Result<Vec<DefectGroup>, ScoreError> {
    let accepted: BTreeMap<ReportId, &BugReport> =
        reports.iter().filter(|r| r.accepted).map(|r| (r.id, r)).collect();
    let mut owner: HashMap<ReportId, crate::model::FixId> = HashMap::new();
    let mut groups = Vec::new();

    let mut approved: Vec<&FixCoverage> = fixes.iter().filter(|f| f.approved).collect();
    approved.sort_by_key(|f| f.id);
    for fix in approved {
        let members: Vec<&BugReport> = fix.covered.iter().filter_map(|id| accepted.get(id).copied()).collect();
        for r in &members {
            if let Some(prev) = owner.insert(r.id, fix.id) {
                return Err(ScoreError::ReportCoveredTwice { report: r.id, first: prev, second: fix.id });
            }
        }
        if let Some(group) = make_group(format!("fix:{}", fix.id), &members, params)? {
            groups.push(group);
        }
    }

    let merge_security = matches!(params.problem, Problem::Securelog | Problem::Atm);
    let mut pooled: BTreeMap<(TeamId, BugCategory), Vec<&BugReport>> = BTreeMap::new();
    for r in accepted.values().filter(|r| !owner.contains_key(&r.id)) {
        if merge_security && matches!(r.category, BugCategory::Privacy | BugCategory::Integrity) {
            pooled.entry((r.target.clone(), r.category)).or_default().push(r);
        } else if let Some(group) = make_group(format!("report:{}", r.id), &[*r], params)? {
            groups.push(group);
        }
    }
    for ((target, category), members) in pooled {
        if let Some(group) = make_group(format!("{category}:{target}"), &members, params)? {
            groups.push(group);
        }
    }

    groups.sort_by(|a, b| (&a.target, &a.id).cmp(&(&b.target, &b.id)));
    Ok(groups)
}

fn make_group(id: String, members: &[&BugReport], params: &ScoringParams) -> Result<Option<DefectGroup>, ScoreError> {
    let Some(first) = members.first() else {
        return Ok(None);
    };
    if let Some(other) = members.iter().find(|r| r.target != first.target) {
        return Err(ScoreError::MixedTargets { group: id, report: other.id });
    }
    let severity = members.iter().map(|r| r.category.severity()).max().unwrap_or(first.category.severity());
    Ok(Some(DefectGroup {
        id,
        target: first.target.clone(),
        reports: members.iter().map(|r| r.id).collect(),
        severity,
        points: severity.value(params),
    }))
}

/// `-Σ P` over the groups charged to one target.
pub fn compute_resilience(groups: &[DefectGroup]) -> Points {
    -groups.iter().map(|g| g.points).sum::<Points>()
}

/// Resilience per target team.
pub fn resilience_by_target(groups: &[DefectGroup]) -> BTreeMap<TeamId, Points> {
    let mut out: BTreeMap<TeamId, Points> = BTreeMap::new();
    for g in groups {
        *out.entry(g.target.clone()).or_default() += -g.points;
    }
    out
}

/// Splits each group's `P` evenly among the distinct teams that found it.
pub fn compute_break_scores(groups: &[DefectGroup], reports: &[BugReport]) -> BTreeMap<TeamId, Points> {
    let by_id: HashMap<ReportId, &BugReport> = reports.iter().map(|r| (r.id, r)).collect();
    let mut out: BTreeMap<TeamId, Points> = BTreeMap::new();
    for (group, finders) in groups.iter().map(|g| (g, finders(g, &by_id))) {
        if finders.is_empty() {
            continue;
        }
        let share = group.points / finders.len() as i64;
        for team in finders {
            *out.entry(team).or_default() += share;
        }
    }
    out
}

/// Distinct breaker teams with at least one report in the group.
pub fn group_finders(group: &DefectGroup, reports: &[BugReport]) -> BTreeSet<TeamId> {
    let by_id: HashMap<ReportId, &BugReport> = reports.iter().map(|r| (r.id, r)).collect();
    finders(group, &by_id)
}

fn finders(group: &DefectGroup, by_id: &HashMap<ReportId, &BugReport>) -> BTreeSet<TeamId> {
    group.reports.iter().filter_map(|id| by_id.get(id)).map(|r| r.breaker.clone()).collect()
}

/// Checks that approving `candidate` would not cover a report some other
/// approved fix already covers.
pub fn check_fix_approval(approved: &[FixCoverage], candidate: &FixCoverage) -> Result<(), ScoreError> {
    for fix in approved.iter().filter(|f| f.approved && f.id != candidate.id) {
        if let Some(r) = fix.covered.intersection(&candidate.covered).next() {
            return Err(ScoreError::ReportCoveredTwice { report: *r, first: fix.id, second: candidate.id });
        }
    }
    Ok(())
}
