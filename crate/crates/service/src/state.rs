//! The contest state as a fold over the event log.

use std::collections::BTreeMap;

use bibifi_judge::{coverage, Adjudication, BreakSubmission, Fix, FixDecision, FixState, Precheck};
use bibifi_scoring::{
    compute_ledgers, BugReport, FixCoverage, Points, ReportId, ScoreInputs, ScoreLedger, ScoringParams, ShipEvidence,
    TeamId,
};
use serde::{Deserialize, Serialize};

use crate::config::Phase;
use crate::event::{Event, EventRecord, JudgeDecision};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Team {
    pub id: TeamId,
    pub members: Vec<String>,
    pub token_hash: String,
    pub qualified: bool,
    /// Latest evaluated submission.
    pub submission: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionInfo {
    pub id: u64,
    pub team: TeamId,
    pub language: Option<String>,
    pub archive_sha256: String,
    pub at: u64,
    pub evidence: Option<ShipEvidence>,
    pub build_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakInfo {
    pub id: ReportId,
    pub target_submission: u64,
    pub submission: BreakSubmission,
    pub at: u64,
    pub outcome: Option<Adjudication>,
    pub recorded: Option<BugReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixInfo {
    pub fix: Fix,
    pub archive_sha256: String,
    pub at: u64,
    pub precheck: Option<Precheck>,
    pub decision: Option<FixDecision>,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("event {seq}: {msg}")]
pub struct Inconsistent {
    pub seq: u64,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    pub seq: u64,
    pub phase: Phase,
    pub teams: BTreeMap<TeamId, Team>,
    pub submissions: BTreeMap<u64, SubmissionInfo>,
    pub breaks: BTreeMap<ReportId, BreakInfo>,
    pub fixes: BTreeMap<u64, FixInfo>,
}

impl Default for State {
    fn default() -> Self {
        State {
            seq: 0,
            phase: Phase::Registration,
            teams: BTreeMap::new(),
            submissions: BTreeMap::new(),
            breaks: BTreeMap::new(),
            fixes: BTreeMap::new(),
        }
    }
}

/// A team's row on the board.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardRow {
    pub team: TeamId,
    pub qualified: bool,
    pub language: Option<String>,
    pub ship: Points,
    pub resilience: Points,
    pub break_score: Points,
    pub build_total: Points,
    pub details: Vec<bibifi_scoring::DetailLine>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scoreboard {
    /// Sequence number of the last event folded in.
    pub seq: u64,
    pub phase: Phase,
    pub rows: Vec<BoardRow>,
}

impl State {
    pub fn next_submission(&self) -> u64 {
        self.submissions.keys().next_back().map_or(1, |k| k + 1)
    }

    pub fn next_break(&self) -> ReportId {
        ReportId(self.breaks.keys().next_back().map_or(1, |k| k.0 + 1))
    }

    pub fn next_fix(&self) -> u64 {
        self.fixes.keys().next_back().map_or(1, |k| k + 1)
    }

    /// Accepted reports, in id order.
    pub fn reports(&self) -> Vec<BugReport> {
        self.breaks.values().filter_map(|b| b.recorded.clone()).collect()
    }

    pub fn approved_fixes(&self) -> Vec<FixCoverage> {
        self.fixes.values().map(|f| coverage(&f.fix)).filter(|c| c.approved).collect()
    }

    /// The submission breakers attack for `team`, if it qualified.
    pub fn target_submission(&self, team: &TeamId) -> Option<u64> {
        self.teams.get(team).filter(|t| t.qualified).and_then(|t| t.submission)
    }

    pub fn team_by_token_hash(&self, hash: &str) -> Option<&Team> {
        self.teams.values().find(|t| t.token_hash == hash)
    }

    /// Applies one record. Nothing changes when the record is rejected.
    pub fn apply(&mut self, rec: &EventRecord) -> Result<(), Inconsistent> {
        let bad = |msg: String| Inconsistent { seq: rec.seq, msg };
        if rec.seq != self.seq + 1 {
            return Err(bad(format!("expected sequence number {}", self.seq + 1)));
        }
        match &rec.event {
            Event::Team(t) => {
                if self.teams.contains_key(&t.team) {
                    return Err(bad(format!("team {} already registered", t.team)));
                }
                self.teams.insert(
                    t.team.clone(),
                    Team { id: t.team.clone(), members: t.members.clone(), token_hash: t.token_hash.clone(), qualified: false, submission: None },
                );
            }
            Event::Submission(s) => {
                if !self.teams.contains_key(&s.team) || self.submissions.contains_key(&s.id) {
                    return Err(bad(format!("submission {} by {}", s.id, s.team)));
                }
                self.submissions.insert(
                    s.id,
                    SubmissionInfo {
                        id: s.id,
                        team: s.team.clone(),
                        language: s.language.clone(),
                        archive_sha256: s.archive_sha256.clone(),
                        at: rec.at,
                        evidence: None,
                        build_ok: None,
                    },
                );
            }
            Event::TestResult(r) => {
                let Some(sub) = self.submissions.get(&r.submission) else {
                    return Err(bad(format!("no submission {}", r.submission)));
                };
                if sub.team != r.evidence.team || sub.evidence.is_some() {
                    return Err(bad(format!("test result for submission {}", r.submission)));
                }
                let team = self.teams.get_mut(&sub.team).expect("submission team registered");
                // Latest submission wins, whatever order evaluations finish in.
                if team.submission.is_none_or(|prev| prev < r.submission) {
                    team.submission = Some(r.submission);
                    team.qualified = r.evidence.qualified;
                }
                let sub = self.submissions.get_mut(&r.submission).expect("checked above");
                sub.evidence = Some(r.evidence.clone());
                sub.build_ok = Some(r.build_ok);
            }
            Event::Break(b) => {
                if self.breaks.contains_key(&b.id) || !self.submissions.contains_key(&b.target_submission) {
                    return Err(bad(format!("break {}", b.id)));
                }
                self.breaks.insert(
                    b.id,
                    BreakInfo {
                        id: b.id,
                        target_submission: b.target_submission,
                        submission: b.submission.clone(),
                        at: rec.at,
                        outcome: None,
                        recorded: None,
                    },
                );
            }
            Event::Fix(f) => {
                if self.fixes.contains_key(&f.fix.id.0) || !self.teams.contains_key(&f.fix.builder) {
                    return Err(bad(format!("fix {}", f.fix.id)));
                }
                self.fixes.insert(
                    f.fix.id.0,
                    FixInfo { fix: f.fix.clone(), archive_sha256: f.archive_sha256.clone(), at: rec.at, precheck: None, decision: None },
                );
            }
            Event::PhaseChange(p) => {
                if p.phase <= self.phase {
                    return Err(bad(format!("phase {} does not follow {}", p.phase, self.phase)));
                }
                self.phase = p.phase;
            }
            Event::JudgeDecision(JudgeDecision::Break { report, outcome, recorded }) => {
                let Some(b) = self.breaks.get_mut(report) else { return Err(bad(format!("no break {report}"))) };
                if b.outcome.is_some() || recorded.as_ref().is_some_and(|r| r.id != *report || !outcome.is_accepted()) {
                    return Err(bad(format!("decision for break {report}")));
                }
                b.outcome = Some(outcome.clone());
                b.recorded = recorded.clone();
            }
            Event::JudgeDecision(JudgeDecision::FixPrecheck { fix, precheck, state }) => {
                let Some(f) = self.fixes.get_mut(&fix.0) else { return Err(bad(format!("no fix {fix}"))) };
                if f.precheck.is_some() {
                    return Err(bad(format!("second precheck for fix {fix}")));
                }
                f.precheck = Some(precheck.clone());
                f.fix.state = state.clone();
            }
            Event::JudgeDecision(JudgeDecision::FixReview { fix, decision, state }) => {
                let Some(f) = self.fixes.get_mut(&fix.0) else { return Err(bad(format!("no fix {fix}"))) };
                if f.fix.state != FixState::Pending || f.precheck.is_none() {
                    return Err(bad(format!("fix {fix} is not awaiting review")));
                }
                f.decision = Some(decision.clone());
                f.fix.state = state.clone();
            }
        }
        self.seq = rec.seq;
        Ok(())
    }

    pub fn score_inputs(&self) -> ScoreInputs {
        ScoreInputs {
            teams: self.teams.keys().cloned().collect(),
            ship: self
                .teams
                .values()
                .filter_map(|t| self.submissions.get(&t.submission?)?.evidence.clone())
                .collect(),
            reports: self.reports(),
            fixes: self.approved_fixes(),
        }
    }

    pub fn scoreboard(&self, params: &ScoringParams) -> Scoreboard {
        let ledgers = compute_ledgers(params, &self.score_inputs()).expect("event log keeps scoring inputs consistent");
        let rows = ledgers
            .into_iter()
            .map(|l: ScoreLedger| {
                let team = self.teams.get(&l.team);
                let language = team.and_then(|t| self.submissions.get(&t.submission?)).and_then(|s| s.language.clone());
                BoardRow {
                    qualified: team.is_some_and(|t| t.qualified),
                    language,
                    build_total: l.build_total(),
                    team: l.team,
                    ship: l.ship,
                    resilience: l.resilience,
                    break_score: l.break_score,
                    details: l.details,
                }
            })
            .collect();
        Scoreboard { seq: self.seq, phase: self.phase, rows }
    }
}

impl Scoreboard {
    /// One line per team: the per-team export for later analysis.
    pub fn to_csv(&self, state: &State) -> String {
        let mut out = String::from("team,qualified,language,ship,resilience,break_score,build_total,reports_found,reports_against\n");
        let reports = state.reports();
        for r in &self.rows {
            let found = reports.iter().filter(|x| x.breaker == r.team).count();
            let against = reports.iter().filter(|x| x.target == r.team).count();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.team,
                r.qualified,
                r.language.as_deref().unwrap_or(""),
                r.ship.render(),
                r.resilience.render(),
                r.break_score.render(),
                r.build_total.render(),
                found,
                against
            ));
        }
        out
    }
}
