//! LP-based branch-and-bound over the integer columns of a [`Problem`].
//!
//! Nodes are explored depth first until the first incumbent exists, then in
//! best-bound order (ties broken by creation order). A round-and-resolve
//! heuristic runs at the root and periodically afterwards: binary columns
//! are rounded up wherever the relaxation uses them, rows made only of
//! binaries are repaired greedily, and the LP is re-solved with the binaries
//! fixed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::options::{Branching, SolverOptions};
use crate::problem::Problem;
use crate::simplex::{solve_with_bounds, LpResult, LpStatus};

const HEURISTIC_PERIOD: usize = 25;
const HEURISTIC_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
}

impl MipStatus {
    pub fn name(self) -> &'static str {
        match self {
            MipStatus::Optimal => "optimal",
            MipStatus::Infeasible => "infeasible",
            MipStatus::Unbounded => "unbounded",
            MipStatus::NodeLimit => "node-limit",
            MipStatus::TimeLimit => "time-limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent objective, `+inf` without one.
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
    pub gap: f64,
    /// LP relaxation value at the root.
    pub root_bound: f64,
    pub lp_iterations: usize,
    /// Global lower bound after each processed node.
    pub bound_trace: Vec<f64>,
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

#[derive(Debug, Clone)]
struct Node {
    /// Bound changes relative to the root, `(col, lower, upper)`.
    changes: Vec<(usize, f64, f64)>,
    bound: f64,
    depth: usize,
    seq: usize,
    /// Branching that created the node: column, up?, distance moved,
    /// parent LP value.
    origin: Option<(usize, bool, f64, f64)>,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // BinaryHeap is a max-heap: smallest bound, then oldest, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

struct PseudoCosts {
    sum: [Vec<f64>; 2],
    count: [Vec<u32>; 2],
    jitter: Vec<f64>,
    /// Estimate for columns without history: the objective coefficient.
    initial: Vec<f64>,
}

impl PseudoCosts {
    fn new(objective: &[f64], seed: u64) -> Self {
        let n = objective.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PseudoCosts {
            sum: [vec![0.0; n], vec![0.0; n]],
            count: [vec![0; n], vec![0; n]],
            jitter: (0..n).map(|_| 1.0 + 1e-6 * rng.gen::<f64>()).collect(),
            initial: objective.iter().map(|c| c.abs()).collect(),
        }
    }

    fn record(&mut self, col: usize, up: bool, dist: f64, gain: f64) {
        if dist <= 0.0 || !gain.is_finite() {
            return;
        }
        let d = up as usize;
        self.sum[d][col] += gain.max(0.0) / dist;
        self.count[d][col] += 1;
    }

    fn average(&self, d: usize) -> f64 {
        let (s, c) = self.sum[d]
            .iter()
            .zip(&self.count[d])
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0u32), |(s, n), (v, &c)| (s + v / c as f64, n + 1));
        if c == 0 {
            1.0
        } else {
            s / c as f64
        }
    }

    fn estimate(&self, col: usize, d: usize, avg: f64) -> f64 {
        if self.count[d][col] > 0 {
            self.sum[d][col] / self.count[d][col] as f64
        } else if self.initial[col] > 0.0 {
            self.initial[col]
        } else {
            avg
        }
    }
}

struct Search<'a> {
    problem: &'a Problem,
    opts: &'a SolverOptions,
    deadline: Option<Instant>,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    lp_iterations: usize,
    pseudo: PseudoCosts,
    /// Column-wise copy of the rows: `(row, coefficient)` per column.
    col_rows: Vec<Vec<(usize, f64)>>,
}

fn column_rows(problem: &Problem) -> Vec<Vec<(usize, f64)>> {
    let mut out = vec![Vec::new(); problem.n_cols()];
    for (r, row) in problem.rows.iter().enumerate() {
        for &(c, a) in &row.coefs {
            out[c].push((r, a));
        }
    }
    out
}

pub fn solve_mip(problem: &Problem, opts: &SolverOptions) -> MipResult {
    solve_mip_with_start(problem, opts, None)
}

/// Branch-and-bound with an optional starting point. A start that satisfies
/// every row, bound and integrality requirement becomes the first incumbent.
pub fn solve_mip_with_start(
    problem: &Problem,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> MipResult {
    let started = Instant::now();
    let deadline = opts.time_limit.map(|d| started + d);
    let n = problem.n_cols();
    let mut root_lower = problem.col_lower.clone();
    let mut root_upper = problem.col_upper.clone();
    for j in 0..n {
        if problem.integer[j] {
            root_lower[j] = (root_lower[j] - opts.tol_int).ceil();
            root_upper[j] = (root_upper[j] + opts.tol_int).floor();
        }
    }
    let mut search = Search {
        problem,
        opts,
        deadline,
        root_lower,
        root_upper,
        incumbent: None,
        incumbent_obj: f64::INFINITY,
        lp_iterations: 0,
        pseudo: PseudoCosts::new(&problem.objective, opts.seed),
        col_rows: column_rows(problem),
    };
    if let Some(x) = start {
        search.offer_start(x);
    }
    search.run()
}

impl<'a> Search<'a> {
    fn offer_start(&mut self, x: &[f64]) {
        if x.len() != self.problem.n_cols() {
            return;
        }
        let integral = (0..x.len())
            .all(|j| !self.problem.integer[j] || (x[j] - x[j].round()).abs() <= self.opts.tol_int);
        if integral && self.problem.max_violation(x) <= self.opts.tol_feas {
            let obj = self.problem.objective_value(x);
            if obj < self.incumbent_obj {
                self.incumbent_obj = obj;
                self.incumbent = Some(x.to_vec());
            }
        }
    }

    fn bounds_for(&self, node: &Node) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.root_lower.clone();
        let mut hi = self.root_upper.clone();
        for &(c, l, u) in &node.changes {
            lo[c] = l;
            hi[c] = u;
        }
        (lo, hi)
    }

    fn solve_node(&mut self, lo: &[f64], hi: &[f64]) -> LpResult {
        let r = solve_with_bounds(self.problem, lo, hi, self.opts, self.deadline);
        self.lp_iterations += r.iterations;
        r
    }

    fn prune_margin(&self) -> f64 {
        if self.incumbent.is_none() {
            return 0.0;
        }
        self.opts
            .tol_opt
            .max(self.opts.rel_gap * self.incumbent_obj.abs().max(1.0))
    }

    fn dominated(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound >= self.incumbent_obj - self.prune_margin()
    }

    fn fractional(&self, x: &[f64]) -> Vec<(usize, f64)> {
        (0..x.len())
            .filter(|&j| self.problem.integer[j])
            .filter_map(|j| {
                let f = x[j] - x[j].floor();
                (f > self.opts.tol_int && f < 1.0 - self.opts.tol_int).then_some((j, f))
            })
            .collect()
    }

    fn choose_branch(&self, fracs: &[(usize, f64)]) -> (usize, f64) {
        match self.opts.branching {
            Branching::PseudoCost => {
                let avg = [self.pseudo.average(0), self.pseudo.average(1)];
                let mut best = fracs[0];
                let mut best_score = f64::NEG_INFINITY;
                for &(j, f) in fracs {
                    let down = f * self.pseudo.estimate(j, 0, avg[0]);
                    let up = (1.0 - f) * self.pseudo.estimate(j, 1, avg[1]);
                    let score = down.max(1e-6) * up.max(1e-6) * self.pseudo.jitter[j];
                    if score > best_score {
                        best_score = score;
                        best = (j, f);
                    }
                }
                best
            }
            _ => {
                let mut best = fracs[0];
                for &(j, f) in &fracs[1..] {
                    if (f - 0.5).abs() < (best.1 - 0.5).abs() {
                        best = (j, f);
                    }
                }
                best
            }
        }
    }

    /// Re-solves the LP with integer columns pinned to `fixed` values and,
    /// when the result is integral, offers it as an incumbent.
    fn polish(&mut self, lo: &[f64], hi: &[f64], fixed: &[(usize, f64)]) -> bool {
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for &(j, v) in fixed {
            if v < lo[j] || v > hi[j] {
                return false;
            }
            lo[j] = v;
            hi[j] = v;
        }
        let r = self.solve_node(&lo, &hi);
        if r.status != LpStatus::Optimal || !self.fractional(&r.primal).is_empty() {
            return false;
        }
        let mut x = r.primal;
        for j in 0..x.len() {
            if self.problem.integer[j] {
                x[j] = x[j].round();
            }
        }
        if self.problem.max_violation(&x) > self.opts.tol_feas * 10.0 {
            return false;
        }
        self.drop_unneeded_binaries(&mut x);
        let obj = self.problem.objective_value(&x);
        if obj < self.incumbent_obj - self.opts.tol_opt.min(1e-12 * obj.abs().max(1.0)) {
            self.incumbent_obj = obj;
            self.incumbent = Some(x);
            return true;
        }
        false
    }

    /// Greedily moves costly binaries from 1 to 0 while every row they touch
    /// stays within bounds; dearest first, repeated until nothing changes.
    fn drop_unneeded_binaries(&self, x: &mut [f64]) {
        let p = self.problem;
        let tol = self.opts.tol_feas;
        let mut activity: Vec<f64> = p.rows.iter().map(|r| r.activity(x)).collect();
        let mut cands: Vec<usize> = (0..x.len())
            .filter(|&j| {
                p.integer[j]
                    && p.objective[j] > 0.0
                    && self.root_lower[j] == 0.0
                    && self.root_upper[j] == 1.0
            })
            .collect();
        cands.sort_by(|&a, &b| p.objective[b].total_cmp(&p.objective[a]).then(a.cmp(&b)));
        loop {
            let mut changed = false;
            for &j in &cands {
                if x[j] != 1.0 {
                    continue;
                }
                let ok = self.col_rows[j].iter().all(|&(r, a)| {
                    let v = activity[r] - a;
                    v <= p.rows[r].upper + tol && v >= p.rows[r].lower - tol
                });
                if ok {
                    x[j] = 0.0;
                    for &(r, a) in &self.col_rows[j] {
                        activity[r] -= a;
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn round_and_resolve(&mut self, lo: &[f64], hi: &[f64], x: &[f64]) -> bool {
        let p = self.problem;
        let tol = self.opts.tol_int;
        let is_binary = |j: usize| p.integer[j] && lo[j] >= 0.0 && hi[j] <= 1.0;
        let mut value: Vec<f64> = (0..x.len())
            .map(|j| {
                if is_binary(j) {
                    if x[j] > tol {
                        hi[j]
                    } else {
                        lo[j]
                    }
                } else {
                    x[j]
                }
            })
            .collect();
        // Repair rows whose support is entirely binary.
        for _ in 0..3 {
            let mut changed = false;
            for row in &p.rows {
                if !row.coefs.iter().all(|&(j, _)| is_binary(j)) {
                    continue;
                }
                let mut act = row.activity(&value);
                if act > row.upper + tol {
                    let mut cands: Vec<&(usize, f64)> = row
                        .coefs
                        .iter()
                        .filter(|&&(j, a)| {
                            (a > 0.0 && value[j] == 1.0 && lo[j] == 0.0)
                                || (a < 0.0 && value[j] == 0.0 && hi[j] == 1.0)
                        })
                        .collect();
                    cands.sort_by(|a, b| x[a.0].total_cmp(&x[b.0]).then(a.0.cmp(&b.0)));
                    for &&(j, a) in &cands {
                        if act <= row.upper + tol {
                            break;
                        }
                        if a > 0.0 {
                            value[j] = 0.0;
                        } else {
                            value[j] = 1.0;
                        }
                        act -= a.abs();
                        changed = true;
                    }
                } else if act < row.lower - tol {
                    let mut cands: Vec<&(usize, f64)> = row
                        .coefs
                        .iter()
                        .filter(|&&(j, a)| {
                            (a > 0.0 && value[j] == 0.0 && hi[j] == 1.0)
                                || (a < 0.0 && value[j] == 1.0 && lo[j] == 0.0)
                        })
                        .collect();
                    cands.sort_by(|a, b| x[b.0].total_cmp(&x[a.0]).then(a.0.cmp(&b.0)));
                    for &&(j, a) in &cands {
                        if act >= row.lower - tol {
                            break;
                        }
                        value[j] = if a > 0.0 { 1.0 } else { 0.0 };
                        act += a.abs();
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let fixed: Vec<(usize, f64)> = (0..x.len())
            .filter(|&j| is_binary(j))
            .map(|j| (j, value[j]))
            .collect();
        self.polish(lo, hi, &fixed)
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn run(mut self) -> MipResult {
        let mut nodes = 0usize;
        let mut seq = 0usize;
        let mut stack: Vec<Node> = Vec::new();
        let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
        let mut bound_trace = Vec::new();
        let mut root_bound = f64::NEG_INFINITY;
        // Bounds of nodes dropped without a resolved LP.
        let mut lost_bound = f64::INFINITY;
        let mut status = None;
        stack.push(Node {
            changes: Vec::new(),
            bound: f64::NEG_INFINITY,
            depth: 0,
            seq,
            origin: None,
        });
        seq += 1;

        loop {
            let diving = self.incumbent.is_none();
            if !diving && !stack.is_empty() {
                for node in stack.drain(..) {
                    heap.push(Queued(node));
                }
            }
            let open_bound = stack
                .iter()
                .map(|n| n.bound)
                .chain(heap.peek().map(|q| q.0.bound))
                .fold(f64::INFINITY, f64::min);
            let global = open_bound.min(lost_bound).min(self.incumbent_obj);
            if stack.is_empty() && heap.is_empty() {
                break;
            }
            if self.incumbent.is_some()
                && relative_gap(self.incumbent_obj, global) <= self.opts.rel_gap
                && self.opts.rel_gap > 0.0
            {
                break;
            }
            if self.opts.node_limit.is_some_and(|l| nodes >= l) {
                status = Some(MipStatus::NodeLimit);
                break;
            }
            if self.out_of_time() {
                status = Some(MipStatus::TimeLimit);
                break;
            }
            let node = match stack.pop() {
                Some(n) => n,
                None => heap.pop().unwrap().0,
            };
            if self.dominated(node.bound) {
                continue;
            }
            nodes += 1;
            let (lo, hi) = self.bounds_for(&node);
            let r = self.solve_node(&lo, &hi);
            match r.status {
                LpStatus::Infeasible => {}
                LpStatus::Unbounded => {
                    if node.depth == 0 {
                        status = Some(MipStatus::Unbounded);
                        break;
                    }
                    lost_bound = lost_bound.min(node.bound);
                }
                LpStatus::IterationLimit => {
                    if self.out_of_time() {
                        // Put it back so the reported bound stays valid.
                        stack.push(node);
                        status = Some(MipStatus::TimeLimit);
                        break;
                    }
                    lost_bound = lost_bound.min(node.bound);
                }
                LpStatus::Optimal => {
                    let obj = r.objective.max(node.bound);
                    if node.depth == 0 {
                        root_bound = r.objective;
                    }
                    if let Some((col, up, dist, parent)) = node.origin {
                        self.pseudo.record(col, up, dist, r.objective - parent);
                    }
                    if !self.dominated(obj) {
                        let fracs = self.fractional(&r.primal);
                        if fracs.is_empty() {
                            let fixed: Vec<(usize, f64)> = (0..r.primal.len())
                                .filter(|&j| self.problem.integer[j])
                                .map(|j| (j, r.primal[j].round()))
                                .collect();
                            self.polish(&lo, &hi, &fixed);
                        } else {
                            if node.depth <= HEURISTIC_DEPTH || nodes % HEURISTIC_PERIOD == 0 {
                                self.round_and_resolve(&lo, &hi, &r.primal);
                            }
                            if !self.dominated(obj) {
                                let (col, f) = self.choose_branch(&fracs);
                                let v = r.primal[col];
                                let mut down = node.changes.clone();
                                down.retain(|c| c.0 != col);
                                let mut up = down.clone();
                                down.push((col, lo[col], v.floor()));
                                up.push((col, v.ceil(), hi[col]));
                                let make = |changes, seq, origin| Node {
                                    changes,
                                    bound: obj,
                                    depth: node.depth + 1,
                                    seq,
                                    origin: Some(origin),
                                };
                                let down_node = make(down, seq, (col, false, f, r.objective));
                                let up_node = make(up, seq + 1, (col, true, 1.0 - f, r.objective));
                                seq += 2;
                                if self.incumbent.is_none() {
                                    // Explore the rounding direction first.
                                    if f >= 0.5 {
                                        stack.push(down_node);
                                        stack.push(up_node);
                                    } else {
                                        stack.push(up_node);
                                        stack.push(down_node);
                                    }
                                } else {
                                    heap.push(Queued(down_node));
                                    heap.push(Queued(up_node));
                                }
                            }
                        }
                    }
                }
            }
            let open_bound = stack
                .iter()
                .map(|n| n.bound)
                .chain(heap.iter().map(|q| q.0.bound))
                .fold(f64::INFINITY, f64::min);
            bound_trace.push(open_bound.min(lost_bound).min(self.incumbent_obj));
        }

        let open_bound = stack
            .iter()
            .map(|n| n.bound)
            .chain(heap.iter().map(|q| q.0.bound))
            .fold(f64::INFINITY, f64::min);
        let mut bound = open_bound.min(lost_bound).min(self.incumbent_obj);
        let status = match status {
            Some(s) => s,
            None if self.incumbent.is_some() => MipStatus::Optimal,
            None if lost_bound.is_finite() => MipStatus::NodeLimit,
            None => MipStatus::Infeasible,
        };
        if status == MipStatus::Infeasible {
            bound = f64::INFINITY;
        }
        let gap = relative_gap(self.incumbent_obj, bound);
        MipResult {
            status,
            objective: self.incumbent_obj,
            incumbent: self.incumbent,
            bound,
            nodes,
            gap,
            root_bound,
            lp_iterations: self.lp_iterations,
            bound_trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Relation, Row};

    fn knapsack() -> Problem {
        // max 5a + 4b + 3c st 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut p = Problem::new("k");
        for (name, c) in [("a", -5.0), ("b", -4.0), ("c", -3.0)] {
            p.add_col(name, c, 0.0, f64::INFINITY, true);
        }
        p.add_row("r1", Row::new(vec![(0, 2.0), (1, 3.0), (2, 1.0)], Relation::Le, 5.0));
        p.add_row("r2", Row::new(vec![(0, 4.0), (1, 1.0), (2, 2.0)], Relation::Le, 11.0));
        p.add_row("r3", Row::new(vec![(0, 3.0), (1, 4.0), (2, 2.0)], Relation::Le, 8.0));
        p
    }

    fn brute(p: &Problem, ub: i32) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..=ub {
            for b in 0..=ub {
                for c in 0..=ub {
                    let x = [a as f64, b as f64, c as f64];
                    if p.max_violation(&x) <= 1e-9 {
                        best = best.min(p.objective_value(&x));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn integer_program_matches_enumeration() {
        let p = knapsack();
        let r = solve_mip(&p, &SolverOptions::default());
        assert_eq!(r.status, MipStatus::Optimal);
        assert_eq!(r.objective, brute(&p, 6));
        assert!(r.bound <= r.objective + 1e-9);
        assert!(r.root_bound <= r.objective);
    }

    #[test]
    fn pseudo_cost_branching_reaches_same_optimum() {
        let p = knapsack();
        let opts = SolverOptions {
            branching: Branching::PseudoCost,
            seed: 3,
            ..Default::default()
        };
        let r = solve_mip(&p, &opts);
        assert_eq!(r.status, MipStatus::Optimal);
        assert_eq!(r.objective, brute(&p, 6));
    }

    #[test]
    fn infeasible_integer_program() {
        let mut p = Problem::new("i");
        p.add_col("x", 1.0, 0.0, 10.0, true);
        p.add_row("r", Row::new(vec![(0, 2.0)], Relation::Eq, 3.0));
        let r = solve_mip(&p, &SolverOptions::default());
        assert_eq!(r.status, MipStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn node_limit_keeps_valid_bound() {
        let p = knapsack();
        let opts = SolverOptions {
            node_limit: Some(1),
            ..Default::default()
        };
        let r = solve_mip(&p, &opts);
        let exact = brute(&p, 6);
        assert!(r.bound <= exact + 1e-9);
        if let Some(x) = &r.incumbent {
            assert!(p.max_violation(x) <= 1e-9);
        }
    }

    #[test]
    fn start_solution_is_used_when_feasible() {
        let p = knapsack();
        let opts = SolverOptions {
            node_limit: Some(0),
            ..Default::default()
        };
        let r = solve_mip_with_start(&p, &opts, Some(&[1.0, 1.0, 0.0]));
        assert_eq!(r.objective, -9.0);
        let r = solve_mip_with_start(&p, &opts, Some(&[5.0, 5.0, 5.0]));
        assert!(r.incumbent.is_none());
    }
}
