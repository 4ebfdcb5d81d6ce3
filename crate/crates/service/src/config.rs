use std::fmt;
use std::path::Path;
use std::str::FromStr;

use bibifi_scoring::{Problem, ScoringParams, SubmissionLimits};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Registration,
    Build,
    Break,
    Fix,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Registration, Phase::Build, Phase::Break, Phase::Fix, Phase::Closed];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Registration => "registration",
            Phase::Build => "build",
            Phase::Break => "break",
            Phase::Fix => "fix",
            Phase::Closed => "closed",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

/// Half-open interval of unix seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub build: Window,
    #[serde(rename = "break")]
    pub break_: Window,
    pub fix: Window,
}

impl Schedule {
    pub fn window(&self, phase: Phase) -> Option<Window> {
        match phase {
            Phase::Build => Some(self.build),
            Phase::Break => Some(self.break_),
            Phase::Fix => Some(self.fix),
            _ => None,
        }
    }

    /// The latest phase whose window has started by `now`.
    pub fn phase_at(&self, now: u64) -> Phase {
        if now >= self.fix.end {
            Phase::Closed
        } else if now >= self.fix.start {
            Phase::Fix
        } else if now >= self.break_.start {
            Phase::Break
        } else if now >= self.build.start {
            Phase::Build
        } else {
            Phase::Registration
        }
    }
}

fn default_multiplier() -> i64 {
    ScoringParams::DEFAULT_MULTIPLIER
}

fn default_challenges() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub problem: Problem,
    /// Without a schedule, phases move only by admin request.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default = "default_multiplier")]
    pub multiplier: i64,
    #[serde(default)]
    pub limits: Option<SubmissionLimits>,
    #[serde(default)]
    pub seed: u64,
    /// Hide the scoreboard from teams until the contest closes.
    #[serde(default)]
    pub hide_scores: bool,
    /// Challenge logs generated per qualifying log-problem submission.
    #[serde(default = "default_challenges")]
    pub challenges: usize,
}

impl ContestConfig {
    pub fn new(problem: Problem) -> Self {
        ContestConfig {
            problem,
            schedule: None,
            multiplier: default_multiplier(),
            limits: None,
            seed: 0,
            hide_scores: false,
            challenges: default_challenges(),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let c: ContestConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        c.validate().map_err(anyhow::Error::msg)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.multiplier <= 0 {
            return Err("multiplier must be positive".into());
        }
        if let Some(s) = &self.schedule {
            let ws = [s.build, s.break_, s.fix];
            if ws.iter().any(|w| w.start >= w.end) {
                return Err("every phase window must end after it starts".into());
            }
            if ws.windows(2).any(|p| p[0].end > p[1].start) {
                return Err("phase windows must be ordered and must not overlap".into());
            }
        }
        Ok(())
    }

    pub fn limits(&self) -> SubmissionLimits {
        self.limits.unwrap_or_else(|| SubmissionLimits::for_problem(self.problem))
    }

    pub fn params(&self) -> ScoringParams {
        ScoringParams { multiplier: self.multiplier, problem: self.problem }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config_and_validation() {
        let c: ContestConfig = toml::from_str(
            "problem = \"ehr\"\nseed = 7\n[schedule]\nbuild = { start = 10, end = 20 }\nbreak = { start = 20, end = 30 }\nfix = { start = 35, end = 40 }\n",
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.multiplier, 50);
        assert_eq!(c.limits(), SubmissionLimits::for_problem(Problem::Ehr));
        let s = c.schedule.unwrap();
        let at: Vec<Phase> = [0, 10, 19, 20, 31, 35, 40].iter().map(|t| s.phase_at(*t)).collect();
        use Phase::*;
        assert_eq!(at, [Registration, Build, Build, Break, Break, Fix, Closed]);

        let mut bad = c.clone();
        bad.schedule.as_mut().unwrap().break_.start = 15;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.schedule.as_mut().unwrap().fix = Window { start: 36, end: 36 };
        assert!(bad.validate().is_err());
    }
}
