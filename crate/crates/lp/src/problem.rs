//! Sparse mixed-integer linear program in row form.

use crate::error::LpError;

/// Sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// One constraint `lower <= sum(coef * x) <= upper`.
///
/// Rows built from a relation keep one side infinite; ranged rows (from MPS
/// `RANGES`) carry both.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        let (lower, upper) = match relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Eq => (rhs, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
        };
        Row {
            coefs,
            lower,
            upper,
        }
    }

    /// Relation and right-hand side, or `None` for a genuinely ranged row.
    pub fn relation(&self) -> Option<(Relation, f64)> {
        match (self.lower.is_finite(), self.upper.is_finite()) {
            (true, true) if self.lower == self.upper => Some((Relation::Eq, self.lower)),
            (false, true) => Some((Relation::Le, self.upper)),
            (true, false) => Some((Relation::Ge, self.lower)),
            _ => None,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Amount by which `activity` lies outside `[lower, upper]`.
    pub fn violation(&self, activity: f64) -> f64 {
        if activity < self.lower {
            self.lower - activity
        } else if activity > self.upper {
            activity - self.upper
        } else {
            0.0
        }
    }
}

/// A minimisation problem `min c.x + offset` over rows and column bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<Row>,
    pub col_names: Vec<String>,
    pub row_names: Vec<String>,
    pub name: String,
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Problem {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.coefs.len()).sum()
    }

    pub fn add_col(
        &mut self,
        name: impl Into<String>,
        cost: f64,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> usize {
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.integer.push(integer);
        self.col_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, row: Row) -> usize {
        self.rows.push(row);
        self.row_names.push(name.into());
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn has_integers(&self) -> bool {
        self.integer.iter().any(|&b| b)
    }

    /// Structural checks: dimensions agree, bounds ordered, every row entry
    /// points at a column and is finite and nonzero.
    pub fn check(&self) -> Result<(), LpError> {
        let n = self.n_cols();
        if self.col_lower.len() != n
            || self.col_upper.len() != n
            || self.integer.len() != n
            || self.col_names.len() != n
        {
            return Err(LpError::Malformed("column arrays differ in length".into()));
        }
        if self.row_names.len() != self.rows.len() {
            return Err(LpError::Malformed("row names differ in length".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("non-finite cost on column {j}")));
            }
            if self.col_lower[j] > self.col_upper[j] || self.col_lower[j].is_nan() {
                return Err(LpError::Malformed(format!("bad bounds on column {j}")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.lower > row.upper || row.lower.is_nan() || row.upper.is_nan() {
                return Err(LpError::Malformed(format!("bad bounds on row {r}")));
            }
            for &(c, a) in &row.coefs {
                if c >= n {
                    return Err(LpError::Malformed(format!(
                        "row {r} references column {c} of {n}"
                    )));
                }
                if a == 0.0 || !a.is_finite() {
                    return Err(LpError::Malformed(format!(
                        "row {r} stores coefficient {a} on column {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest row or bound violation of `x` (integrality ignored).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst
                .max(self.col_lower[j] - v)
                .max(v - self.col_upper[j]);
        }
        for row in &self.rows {
            worst = worst.max(row.violation(row.activity(x)));
        }
        worst
    }
}
