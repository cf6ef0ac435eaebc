//! Bounded-variable revised primal simplex.
//!
//! Every row gets a logical variable `s_i = -a_i.x` bounded by the row range,
//! so the constraint system is `A x + s = 0` and the slack basis is the
//! identity. Phase 1 minimises the sum of basic bound violations with
//! piecewise costs recomputed every iteration; phase 2 minimises the real
//! objective. Entering columns are priced with Dantzig's rule, the ratio test
//! is Harris's two-pass test, and after a run of degenerate pivots the method
//! falls back to Bland's rule until a step makes progress.

use std::time::Instant;

use crate::lu::{BasisFactor, SparseCol};
use crate::options::SolverOptions;
use crate::problem::Problem;

const REFACTOR_INTERVAL: usize = 100;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STALL: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl LpStatus {
    pub fn name(self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective including the constant offset; meaningful when optimal.
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One multiplier per row: the rate of change of the optimum per unit of
    /// right-hand side.
    pub dual: Vec<f64>,
    /// `c_j - dual . A_j` per column.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solves the LP relaxation of `problem` (integrality is ignored).
pub fn solve_lp(problem: &Problem, opts: &SolverOptions) -> LpResult {
    solve_with_bounds(problem, &problem.col_lower, &problem.col_upper, opts, None)
}

/// LP relaxation under overridden column bounds. Columns whose bounds meet
/// are substituted out before the simplex runs.
pub(crate) fn solve_with_bounds(
    problem: &Problem,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
    deadline: Option<Instant>,
) -> LpResult {
    let n_orig = problem.n_cols();
    let m = problem.n_rows();
    let infeasible = |iterations| LpResult {
        status: LpStatus::Infeasible,
        objective: f64::INFINITY,
        primal: vec![0.0; n_orig],
        dual: vec![0.0; m],
        reduced_costs: vec![0.0; n_orig],
        iterations,
    };
    if (0..n_orig).any(|j| lower[j] > upper[j]) {
        return infeasible(0);
    }

    let internal = InternalLp::build(problem, lower, upper);
    let mut sx = Simplex::new(&internal, opts, deadline);
    let status = sx.run();
    let iterations = sx.iterations;
    if status == LpStatus::Infeasible {
        return infeasible(iterations);
    }

    // Unscale.
    let mut primal = vec![0.0; n_orig];
    for j in 0..n_orig {
        if let Some(v) = internal.fixed_value[j] {
            primal[j] = v;
        }
    }
    for (k, &j) in internal.kept.iter().enumerate() {
        let mut v = sx.x[k] * internal.col_scale[k];
        // Snap values within rounding of a bound.
        if lower[j].is_finite() && (v - lower[j]).abs() <= 1e-12 * (1.0 + lower[j].abs()) {
            v = lower[j];
        } else if upper[j].is_finite() && (v - upper[j]).abs() <= 1e-12 * (1.0 + upper[j].abs())
        {
            v = upper[j];
        }
        primal[j] = v;
    }
    let y_scaled = sx.duals();
    let dual: Vec<f64> = (0..m).map(|i| y_scaled[i] * internal.row_scale[i]).collect();
    let mut reduced_costs = problem.objective.clone();
    for (i, row) in problem.rows.iter().enumerate() {
        if dual[i] == 0.0 {
            continue;
        }
        for &(c, a) in &row.coefs {
            reduced_costs[c] -= dual[i] * a;
        }
    }
    LpResult {
        status,
        objective: problem.objective_value(&primal),
        primal,
        dual,
        reduced_costs,
        iterations,
    }
}

/// Presolved, scaled copy of the LP in the `A x + s = 0` form.
struct InternalLp {
    m: usize,
    /// Number of structural (non-fixed) columns.
    n: usize,
    /// Columns of all `n + m` variables; logicals are unit columns.
    cols: Vec<SparseCol>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    kept: Vec<usize>,
    fixed_value: Vec<Option<f64>>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
}

impl InternalLp {
    fn build(problem: &Problem, lower: &[f64], upper: &[f64]) -> Self {
        let n_orig = problem.n_cols();
        let m = problem.n_rows();
        let mut fixed_value = vec![None; n_orig];
        let mut kept = Vec::new();
        let mut new_index = vec![usize::MAX; n_orig];
        for j in 0..n_orig {
            if lower[j] == upper[j] {
                fixed_value[j] = Some(lower[j]);
            } else {
                new_index[j] = kept.len();
                kept.push(j);
            }
        }
        let n = kept.len();
        let mut cols: Vec<SparseCol> = vec![Vec::new(); n + m];
        let mut row_lo = vec![0.0; m];
        let mut row_hi = vec![0.0; m];
        for (i, row) in problem.rows.iter().enumerate() {
            let mut fixed_activity = 0.0;
            for &(c, a) in &row.coefs {
                match fixed_value[c] {
                    Some(v) => fixed_activity += a * v,
                    None => cols[new_index[c]].push((i, a)),
                }
            }
            row_lo[i] = row.lower - fixed_activity;
            row_hi[i] = row.upper - fixed_activity;
        }

        // Geometric scaling, rounded to powers of two.
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        for _ in 0..4 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for (k, col) in cols.iter().take(n).enumerate() {
                for &(i, a) in col {
                    let v = (a * col_scale[k]).abs();
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row_scale[i] = pow2(1.0 / (rmin[i] * rmax[i]).sqrt());
                }
            }
            for (k, col) in cols.iter().take(n).enumerate() {
                let mut cmin = f64::INFINITY;
                let mut cmax = 0.0f64;
                for &(i, a) in col {
                    let v = (a * row_scale[i]).abs();
                    cmin = cmin.min(v);
                    cmax = cmax.max(v);
                }
                if cmax > 0.0 {
                    col_scale[k] = pow2(1.0 / (cmin * cmax).sqrt());
                }
            }
        }

        let mut cost = vec![0.0; n + m];
        let mut lo = vec![0.0; n + m];
        let mut hi = vec![0.0; n + m];
        for (k, &j) in kept.iter().enumerate() {
            let cs = col_scale[k];
            for e in cols[k].iter_mut() {
                e.1 *= row_scale[e.0] * cs;
            }
            cost[k] = problem.objective[j] * cs;
            lo[k] = lower[j] / cs;
            hi[k] = upper[j] / cs;
        }
        for i in 0..m {
            cols[n + i] = vec![(i, 1.0)];
            let rs = row_scale[i];
            lo[n + i] = -row_hi[i] * rs;
            hi[n + i] = -row_lo[i] * rs;
        }
        InternalLp {
            m,
            n,
            cols,
            cost,
            lower: lo,
            upper: hi,
            kept,
            fixed_value,
            col_scale,
            row_scale,
        }
    }
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

struct Simplex<'a> {
    lp: &'a InternalLp,
    opts: &'a SolverOptions,
    deadline: Option<Instant>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    factor: Option<BasisFactor>,
    iterations: usize,
    limit: usize,
    phase1: bool,
    y: Vec<f64>,
}

enum Step {
    Flip(f64),
    Pivot { pos: usize, theta: f64, to_upper: bool },
    Unbounded,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a InternalLp, opts: &'a SolverOptions, deadline: Option<Instant>) -> Self {
        let total = lp.n + lp.m;
        let mut x = vec![0.0; total];
        let mut state = vec![State::Basic; total];
        for j in 0..lp.n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            if l.is_finite() {
                x[j] = l;
                state[j] = State::AtLower;
            } else if u.is_finite() {
                x[j] = u;
                state[j] = State::AtUpper;
            } else {
                state[j] = State::Zero;
            }
        }
        let basis = (lp.n..total).collect();
        let limit = opts
            .iteration_limit
            .unwrap_or(10_000 + 20 * (lp.n + lp.m));
        Simplex {
            lp,
            opts,
            deadline,
            x,
            state,
            basis,
            factor: None,
            iterations: 0,
            limit,
            phase1: true,
            y: vec![0.0; lp.m],
        }
    }

    fn refactor(&mut self) {
        let m = self.lp.m;
        loop {
            let cols: Vec<&[(usize, f64)]> =
                self.basis.iter().map(|&v| self.lp.cols[v].as_slice()).collect();
            match BasisFactor::factorize(m, &cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    break;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.free_rows) {
                        let out = self.basis[pos];
                        self.make_nonbasic(out);
                        let logical = self.lp.n + row;
                        self.basis[pos] = logical;
                        self.state[logical] = State::Basic;
                    }
                }
            }
        }
        self.recompute_basics();
    }

    fn make_nonbasic(&mut self, j: usize) {
        let (l, u) = (self.lp.lower[j], self.lp.upper[j]);
        let v = self.x[j];
        if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
            self.x[j] = l;
            self.state[j] = State::AtLower;
        } else if u.is_finite() {
            self.x[j] = u;
            self.state[j] = State::AtUpper;
        } else {
            self.x[j] = 0.0;
            self.state[j] = State::Zero;
        }
    }

    fn recompute_basics(&mut self) {
        let m = self.lp.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.lp.n + m {
            if self.state[j] == State::Basic || self.x[j] == 0.0 {
                continue;
            }
            for &(i, a) in &self.lp.cols[j] {
                rhs[i] -= a * self.x[j];
            }
        }
        self.factor.as_ref().unwrap().ftran(&mut rhs);
        for (p, &v) in self.basis.iter().enumerate() {
            self.x[v] = rhs[p];
        }
    }

    /// Phase-1 cost of a basic variable.
    fn infeasibility_cost(&self, j: usize) -> f64 {
        let tol = self.opts.tol_feas;
        if self.x[j] < self.lp.lower[j] - tol {
            -1.0
        } else if self.x[j] > self.lp.upper[j] + tol {
            1.0
        } else {
            0.0
        }
    }

    fn compute_duals(&mut self) {
        let mut cb: Vec<f64> = self
            .basis
            .iter()
            .map(|&j| {
                if self.phase1 {
                    self.infeasibility_cost(j)
                } else {
                    self.lp.cost[j]
                }
            })
            .collect();
        self.factor.as_ref().unwrap().btran(&mut cb);
        self.y = cb;
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = if self.phase1 { 0.0 } else { self.lp.cost[j] };
        let dot: f64 = self.lp.cols[j].iter().map(|&(i, a)| a * self.y[i]).sum();
        c - dot
    }

    /// Entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool, skip: &[usize]) -> Option<(usize, f64)> {
        let tol = self.opts.tol_opt;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.lp.n + self.lp.m {
            let st = self.state[j];
            if st == State::Basic || self.lp.lower[j] == self.lp.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = match st {
                State::AtLower if d < -tol => 1.0,
                State::AtUpper if d > tol => -1.0,
                State::Zero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if skip.contains(&j) {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        let tol = self.opts.tol_feas;
        let flip = self.lp.upper[q] - self.lp.lower[q];
        // (pos, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let j = self.basis[p];
            let rate = -dir * a;
            let (v, l, u) = (self.x[j], self.lp.lower[j], self.lp.upper[j]);
            if rate < 0.0 {
                let bound = if self.phase1 && v > u + tol {
                    u
                } else if v >= l - tol || !self.phase1 {
                    l
                } else {
                    continue;
                };
                if !bound.is_finite() {
                    continue;
                }
                let exact = (v - bound) / -rate;
                cands.push((p, exact, (v - bound + tol) / -rate, bound == u && bound != l));
            } else {
                let bound = if self.phase1 && v < l - tol {
                    l
                } else if v <= u + tol || !self.phase1 {
                    u
                } else {
                    continue;
                };
                if !bound.is_finite() {
                    continue;
                }
                let exact = (bound - v) / rate;
                cands.push((p, exact, (bound - v + tol) / rate, bound == u));
            }
        }
        if cands.is_empty() {
            return if flip.is_finite() {
                Step::Flip(flip)
            } else {
                Step::Unbounded
            };
        }
        let min_exact = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        if flip.is_finite() && flip <= min_exact {
            return Step::Flip(flip);
        }
        let chosen = if bland {
            let limit = min_exact.max(0.0) + 1e-12 * (1.0 + min_exact.abs());
            cands
                .iter()
                .filter(|c| c.1 <= limit)
                .min_by_key(|c| self.basis[c.0])
                .copied()
                .unwrap()
        } else {
            let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= theta_max)
                .max_by(|a, b| {
                    alpha[a.0]
                        .abs()
                        .partial_cmp(&alpha[b.0].abs())
                        .unwrap()
                        .then(b.0.cmp(&a.0))
                })
                .copied()
                .unwrap()
        };
        Step::Pivot {
            pos: chosen.0,
            theta: chosen.1.max(0.0),
            to_upper: chosen.3,
        }
    }

    fn column_image(&self, q: usize) -> Vec<f64> {
        let mut alpha = vec![0.0; self.lp.m];
        for &(i, a) in &self.lp.cols[q] {
            alpha[i] = a;
        }
        self.factor.as_ref().unwrap().ftran(&mut alpha);
        alpha
    }

    fn any_infeasible(&self) -> bool {
        let tol = self.opts.tol_feas;
        self.basis.iter().any(|&j| {
            self.x[j] < self.lp.lower[j] - tol || self.x[j] > self.lp.upper[j] + tol
        })
    }

    fn run(&mut self) -> LpStatus {
        self.refactor();
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut skip: Vec<usize> = Vec::new();
        let mut fresh = true;
        loop {
            if self.iterations >= self.limit {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 64 == 0 {
                if let Some(d) = self.deadline {
                    if Instant::now() >= d {
                        return LpStatus::IterationLimit;
                    }
                }
            }
            if self.factor.as_ref().unwrap().num_updates() >= REFACTOR_INTERVAL {
                self.refactor();
                fresh = true;
            }
            self.phase1 = self.any_infeasible();
            self.compute_duals();
            let Some((q, dir)) = self.price(bland, &skip) else {
                if !fresh {
                    // Confirm on a fresh factorisation before concluding.
                    self.refactor();
                    fresh = true;
                    skip.clear();
                    continue;
                }
                if !skip.is_empty() {
                    skip.clear();
                    self.refactor();
                    continue;
                }
                return if self.phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let alpha = self.column_image(q);
            match self.ratio_test(q, dir, &alpha, bland) {
                Step::Unbounded => {
                    if self.phase1 {
                        // Numerical trouble; retry from a fresh factorisation.
                        skip.push(q);
                        continue;
                    }
                    return LpStatus::Unbounded;
                }
                Step::Flip(theta) => {
                    self.move_along(q, dir, theta, &alpha);
                    self.state[q] = if dir > 0.0 {
                        State::AtUpper
                    } else {
                        State::AtLower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.lp.upper[q]
                    } else {
                        self.lp.lower[q]
                    };
                    degenerate_run = 0;
                    bland = false;
                }
                Step::Pivot {
                    pos,
                    theta,
                    to_upper,
                } => {
                    if alpha[pos].abs() < 1e-7 && !fresh {
                        // Unstable pivot on a stale factorisation.
                        self.refactor();
                        fresh = true;
                        continue;
                    }
                    self.move_along(q, dir, theta, &alpha);
                    let out = self.basis[pos];
                    if to_upper {
                        self.state[out] = State::AtUpper;
                        self.x[out] = self.lp.upper[out];
                    } else {
                        self.state[out] = State::AtLower;
                        self.x[out] = self.lp.lower[out];
                    }
                    if !self.x[out].is_finite() {
                        self.x[out] = 0.0;
                        self.state[out] = State::Zero;
                    }
                    self.basis[pos] = q;
                    self.state[q] = State::Basic;
                    self.factor.as_mut().unwrap().update(pos, &alpha);
                    fresh = false;
                    if theta <= 1e-12 {
                        degenerate_run += 1;
                        if degenerate_run >= DEGENERATE_STALL {
                            bland = true;
                        }
                    } else {
                        degenerate_run = 0;
                        bland = false;
                    }
                }
            }
            skip.clear();
            self.iterations += 1;
        }
    }

    fn move_along(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let j = self.basis[p];
                self.x[j] -= dir * theta * a;
            }
        }
    }

    /// Row multipliers of the final phase-2 basis in the scaled space.
    fn duals(&mut self) -> Vec<f64> {
        self.phase1 = false;
        self.compute_duals();
        self.y.clone()
    }
}


/// Objective of the Lagrangian dual at row multipliers `dual`: a lower bound
/// on the LP optimum that equals it at an optimal basis. Multipliers or
/// reduced costs of magnitude at most `tol` whose sign points at an infinite
/// side are evaluated at the finite side instead.
pub fn dual_objective(problem: &Problem, dual: &[f64], tol: f64) -> f64 {
    fn side(weight: f64, lower: f64, upper: f64, tol: f64) -> f64 {
        let (want, other) = if weight > 0.0 { (lower, upper) } else { (upper, lower) };
        if want.is_finite() || weight.abs() > tol || !other.is_finite() {
            want
        } else {
            other
        }
    }
    let mut d = problem.objective.clone();
    let mut total = problem.objective_offset;
    for (row, &y) in problem.rows.iter().zip(dual) {
        if y == 0.0 {
            continue;
        }
        for &(j, a) in &row.coefs {
            d[j] -= y * a;
        }
        total += y * side(y, row.lower, row.upper, tol);
    }
    for (j, &dj) in d.iter().enumerate() {
        if dj != 0.0 {
            total += dj * side(dj, problem.col_lower[j], problem.col_upper[j], tol);
        }
    }
    total
}
