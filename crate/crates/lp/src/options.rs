use std::time::Duration;

use crate::error::LpError;

/// Variable selection rule for branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Fractional part closest to 0.5; ties go to the lowest column index.
    #[default]
    MostFractional,
    /// Product of up/down pseudo-cost estimates; columns without history
    /// start from their objective coefficient.
    PseudoCost,
}

impl Branching {
    pub fn name(self) -> &'static str {
        match self {
            Branching::MostFractional => "most-fractional",
            Branching::PseudoCost => "pseudo-cost",
        }
    }
}

impl std::str::FromStr for Branching {
    type Err = LpError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "most-fractional" => Ok(Branching::MostFractional),
            "pseudo-cost" => Ok(Branching::PseudoCost),
            other => Err(LpError::Options(format!("unknown branching rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Primal feasibility tolerance.
    pub tol_feas: f64,
    /// Distance from an integer below which a value counts as integral.
    pub tol_int: f64,
    /// Reduced-cost tolerance; also the absolute pruning margin.
    pub tol_opt: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Stop once `(objective - bound) / max(1, |objective|)` is at most this.
    pub rel_gap: f64,
    pub branching: Branching,
    pub seed: u64,
    /// Simplex iteration cap per LP; `None` picks a size-based default.
    pub iteration_limit: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-7,
            tol_int: 1e-6,
            tol_opt: 1e-9,
            node_limit: None,
            time_limit: None,
            rel_gap: 0.0,
            branching: Branching::MostFractional,
            seed: 0,
            iteration_limit: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), LpError> {
        for (name, v) in [
            ("tol_feas", self.tol_feas),
            ("tol_int", self.tol_int),
            ("tol_opt", self.tol_opt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LpError::Options(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rel_gap >= 0.0 && self.rel_gap.is_finite()) {
            return Err(LpError::Options(format!(
                "rel_gap must be non-negative, got {}",
                self.rel_gap
            )));
        }
        Ok(())
    }
}
