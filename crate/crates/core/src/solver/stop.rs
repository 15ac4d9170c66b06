use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// When a greedy pursuit stops adding taps.
#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    /// Stop once this many taps have been selected.
    MaxIterations(usize),
    /// Stop once `‖r‖₂` drops below the threshold.
    ResidualThreshold(f64),
    /// Stop when an iteration fails to reduce `‖r‖₂`; that tap is discarded.
    NonDecrease,
    /// Stop when any member rule fires.
    Any(Vec<StopRule>),
}

impl StopRule {
    /// Threshold `0.01` with a hard cap of `k` iterations.
    pub fn experiment_default(k: usize) -> Self {
        StopRule::Any(vec![StopRule::ResidualThreshold(0.01), StopRule::MaxIterations(k)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StopRule::MaxIterations(0) => Err(Error::Config("maxiter must be positive".into())),
            StopRule::ResidualThreshold(e) if !(e.is_finite() && *e > 0.0) => {
                Err(Error::Config(format!("threshold must be positive, got {e}")))
            }
            StopRule::Any(rules) if rules.is_empty() => Err(Error::Config("empty stop rule list".into())),
            StopRule::Any(rules) => rules.iter().try_for_each(StopRule::validate),
            _ => Ok(()),
        }
    }

    /// Tightest iteration cap among the members.
    pub fn max_iterations(&self) -> Option<usize> {
        match self {
            StopRule::MaxIterations(t) => Some(*t),
            StopRule::Any(rules) => rules.iter().filter_map(StopRule::max_iterations).min(),
            _ => None,
        }
    }

    /// Largest residual threshold among the members.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            StopRule::ResidualThreshold(e) => Some(*e),
            StopRule::Any(rules) => rules.iter().filter_map(StopRule::threshold).reduce(f64::max),
            _ => None,
        }
    }

    pub fn non_decrease(&self) -> bool {
        match self {
            StopRule::NonDecrease => true,
            StopRule::Any(rules) => rules.iter().any(StopRule::non_decrease),
            _ => false,
        }
    }

    /// Parses a comma-separated list such as `threshold:0.01,maxiter:132`.
    pub fn parse_list(s: &str) -> Result<Self> {
        let mut rules = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<StopRule>>>()?;
        let rule = match rules.len() {
            0 => return Err(Error::Config("empty stop rule".into())),
            1 => rules.pop().unwrap(),
            _ => StopRule::Any(rules),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown stop rule `{s}` (threshold:<eps> | maxiter:<t> | nondecrease)"));
        let rule = if s == "nondecrease" {
            StopRule::NonDecrease
        } else if let Some(v) = s.strip_prefix("threshold:") {
            StopRule::ResidualThreshold(v.parse().map_err(|_| bad())?)
        } else if let Some(v) = s.strip_prefix("maxiter:") {
            StopRule::MaxIterations(v.parse().map_err(|_| bad())?)
        } else {
            return Err(bad());
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopRule::MaxIterations(t) => write!(f, "maxiter:{t}"),
            StopRule::ResidualThreshold(e) => write!(f, "threshold:{e}"),
            StopRule::NonDecrease => f.write_str("nondecrease"),
            StopRule::Any(rules) => {
                for (i, r) in rules.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

/// Why a pursuit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    ResidualThreshold,
    NonDecrease,
    /// The residual is exactly zero.
    ZeroResidual,
    /// `|Λ|` reached `min(K, N_cp)`.
    SupportFull,
    /// The next selected column lies in the span of the current ones, so no
    /// further least-squares progress is possible.
    RankExhausted,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::ResidualThreshold => "residual_threshold",
            StopReason::NonDecrease => "non_decrease",
            StopReason::ZeroResidual => "zero_residual",
            StopReason::SupportFull => "support_full",
            StopReason::RankExhausted => "rank_exhausted",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let r = StopRule::parse_list("threshold:0.01, maxiter:132").unwrap();
        assert_eq!(r, StopRule::experiment_default(132));
        assert_eq!(r.to_string(), "threshold:0.01,maxiter:132");
        assert_eq!(r.max_iterations(), Some(132));
        assert_eq!(r.threshold(), Some(0.01));
        assert!(!r.non_decrease());
        assert_eq!(StopRule::parse_list("nondecrease").unwrap(), StopRule::NonDecrease);
    }

    #[test]
    fn invalid_rules() {
        for s in ["", "maxiter:0", "threshold:-1", "threshold:abc", "omp"] {
            assert!(StopRule::parse_list(s).is_err(), "{s}");
        }
    }
}
