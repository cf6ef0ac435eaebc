use gsc_lp::{solve_lp, solve_mip, LpStatus, MipStatus, Problem, Relation, Row, SolverOptions};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    costs: Vec<i32>,
    uppers: Vec<u8>,
    rows: Vec<(Vec<i32>, u8, i32)>,
    anchor: Vec<u8>,
}

fn spec(max_n: usize, max_ub: u8) -> impl Strategy<Value = Spec> {
    (2..=max_n, 1..=4usize).prop_flat_map(move |(n, m)| {
        (
            prop::collection::vec(-9..=9i32, n),
            prop::collection::vec(1..=max_ub, n),
            prop::collection::vec((prop::collection::vec(-5..=5i32, n), 0..3u8, 0..4i32), m),
            prop::collection::vec(0..=max_ub, n),
        )
            .prop_map(|(costs, uppers, rows, anchor)| Spec { costs, uppers, rows, anchor })
    })
}

/// Rows are anchored at an integer point inside the box so every instance
/// is feasible and bounded.
fn build(s: &Spec, integer: bool) -> Problem {
    let mut p = Problem::new("rand");
    let n = s.costs.len();
    let x0: Vec<f64> = (0..n).map(|j| s.anchor[j].min(s.uppers[j]) as f64).collect();
    for j in 0..n {
        p.add_col(format!("x{j}"), s.costs[j] as f64, 0.0, s.uppers[j] as f64, integer);
    }
    for (i, (coefs, kind, slack)) in s.rows.iter().enumerate() {
        let entries: Vec<(usize, f64)> = coefs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(j, &a)| (j, a as f64))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let act: f64 = entries.iter().map(|&(j, a)| a * x0[j]).sum();
        let row = match kind {
            0 => Row::new(entries, Relation::Le, act + *slack as f64),
            1 => Row::new(entries, Relation::Ge, act - *slack as f64),
            _ => Row::new(entries, Relation::Eq, act),
        };
        p.add_row(format!("r{i}"), row);
    }
    p
}

/// Lagrangian lower bound from row multipliers alone.
fn dual_bound(p: &Problem, y: &[f64]) -> f64 {
    let mut d = p.objective.clone();
    let mut total = p.objective_offset;
    for (row, &yi) in p.rows.iter().zip(y) {
        for &(j, a) in &row.coefs {
            d[j] -= yi * a;
        }
        let side = if yi > 0.0 { row.lower } else { row.upper };
        if yi != 0.0 {
            total += yi * side;
        }
    }
    for j in 0..p.n_cols() {
        let side = if d[j] > 0.0 { p.col_lower[j] } else { p.col_upper[j] };
        if d[j] != 0.0 {
            total += d[j] * side;
        }
    }
    total
}

fn enumerate(p: &Problem) -> Option<f64> {
    let n = p.n_cols();
    let mut x = vec![0.0; n];
    let mut best: Option<f64> = None;
    loop {
        if p.max_violation(&x) <= 1e-9 {
            let v = p.objective_value(&x);
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        let mut j = 0;
        while j < n {
            if x[j] < p.col_upper[j] {
                x[j] += 1.0;
                break;
            }
            x[j] = 0.0;
            j += 1;
        }
        if j == n {
            return best;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_optimum_is_certified_by_its_duals(s in spec(6, 10)) {
        let p = build(&s, false);
        let r = solve_lp(&p, &SolverOptions::default());
        prop_assert_eq!(r.status, LpStatus::Optimal);
        prop_assert!(p.max_violation(&r.primal) <= 1e-7);
        prop_assert!((p.objective_value(&r.primal) - r.objective).abs() <= 1e-7);
        // Any multipliers give a lower bound; optimal ones close the gap.
        let lb = dual_bound(&p, &r.dual);
        prop_assert!((lb - r.objective).abs() <= 1e-6 * r.objective.abs().max(1.0),
            "dual bound {} vs primal {}", lb, r.objective);
    }

    #[test]
    fn column_and_row_order_do_not_change_the_optimum(s in spec(6, 10), rot in 0..6usize) {
        let p = build(&s, false);
        let n = p.n_cols();
        let perm: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
        let mut q = Problem::new("perm");
        for &j in &perm {
            q.add_col(p.col_names[j].clone(), p.objective[j], p.col_lower[j], p.col_upper[j], false);
        }
        let pos: Vec<usize> = (0..n).map(|j| perm.iter().position(|&k| k == j).unwrap()).collect();
        for (row, name) in p.rows.iter().zip(&p.row_names).rev() {
            let coefs = row.coefs.iter().map(|&(j, a)| (pos[j], a)).collect();
            q.add_row(name.clone(), Row { coefs, lower: row.lower, upper: row.upper });
        }
        let a = solve_lp(&p, &SolverOptions::default());
        let b = solve_lp(&q, &SolverOptions::default());
        prop_assert_eq!(a.status, LpStatus::Optimal);
        prop_assert_eq!(b.status, LpStatus::Optimal);
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * a.objective.abs().max(1.0));
    }

    #[test]
    fn branch_and_bound_matches_enumeration(s in spec(4, 3)) {
        let p = build(&s, true);
        let exact = enumerate(&p).expect("anchor point is feasible");
        let r = solve_mip(&p, &SolverOptions::default());
        prop_assert_eq!(r.status, MipStatus::Optimal);
        prop_assert!((r.objective - exact).abs() <= 1e-7, "{} vs {}", r.objective, exact);
        let lp = solve_lp(&p, &SolverOptions::default());
        prop_assert!(lp.objective <= r.objective + 1e-7);
        prop_assert!(r.bound_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}
