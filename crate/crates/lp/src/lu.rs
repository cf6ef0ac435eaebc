//! Sparse LU factorisation of a simplex basis with product-form updates.
//!
//! Columns are factorised left to right (Gilbert-Peierls): each new column is
//! pushed through the eta vectors of the previous steps using a depth-first
//! reach, then a pivot row is chosen by threshold partial pivoting with a
//! preference for sparse rows. Basis changes between refactorisations are
//! appended as column etas.

/// Sparse column of the basis matrix, entries `(row, value)`.
pub type SparseCol = Vec<(usize, f64)>;

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
struct Eta {
    /// Basis position whose column was replaced.
    pos: usize,
    pivot: f64,
    /// Off-pivot entries `(position, alpha)`.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BasisFactor {
    m: usize,
    /// `pivot_row[k]` is the row eliminated at step k.
    pivot_row: Vec<usize>,
    /// Basis position factorised at step k.
    step_pos: Vec<usize>,
    /// Step at which a row was pivoted.
    row_step: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal U entries of step k as `(earlier step, value)`.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
}

/// Raised when the basis is numerically singular: the listed basis positions
/// could not be pivoted, and `free_rows` were left without a pivot.
#[derive(Debug, Clone)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

impl BasisFactor {
    /// Factorises the `m` x `m` matrix whose column for basis position `p` is
    /// `cols[p]`. `row_counts` (nonzeros per row) guides pivot choice.
    pub fn factorize(m: usize, cols: &[&[(usize, f64)]]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_counts = vec![0usize; m];
        for col in cols {
            for &(r, _) in col.iter() {
                row_counts[r] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].len(), p));

        let unset = usize::MAX;
        let mut f = BasisFactor {
            m,
            pivot_row: Vec::with_capacity(m),
            step_pos: Vec::with_capacity(m),
            row_step: vec![unset; m],
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
        };

        let mut work = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut visited = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut singular = Vec::new();

        for &pos in &order {
            // Scatter the column.
            pattern.clear();
            for &(r, v) in cols[pos].iter() {
                if !in_pattern[r] {
                    in_pattern[r] = true;
                    pattern.push(r);
                }
                work[r] += v;
            }
            // Steps reachable from the pattern, in topological order.
            topo.clear();
            for idx in 0..pattern.len() {
                let r = pattern[idx];
                let s = f.row_step[r];
                if s == unset || visited[s] {
                    continue;
                }
                visited[s] = true;
                stack.push((s, 0));
                while let Some(&(step, start)) = stack.last() {
                    let lc = &f.l_cols[step];
                    let mut next = start;
                    let mut child = None;
                    while next < lc.len() {
                        let s2 = f.row_step[lc[next].0];
                        next += 1;
                        if s2 != unset && !visited[s2] {
                            child = Some(s2);
                            break;
                        }
                    }
                    let top = stack.len() - 1;
                    stack[top].1 = next;
                    match child {
                        Some(s2) => {
                            visited[s2] = true;
                            stack.push((s2, 0));
                        }
                        None => {
                            topo.push(step);
                            stack.pop();
                        }
                    }
                }
            }
            for &s in &topo {
                visited[s] = false;
            }
            // Apply etas in topological order (reverse postorder).
            for &s in topo.iter().rev() {
                let pr = f.pivot_row[s];
                let xv = work[pr];
                if xv == 0.0 {
                    continue;
                }
                for &(r2, l) in &f.l_cols[s] {
                    if !in_pattern[r2] {
                        in_pattern[r2] = true;
                        pattern.push(r2);
                    }
                    work[r2] -= l * xv;
                }
            }
            // Split into U part and candidate pivots.
            let mut u_col = Vec::new();
            let mut max_abs = 0.0f64;
            for &r in &pattern {
                if f.row_step[r] != unset {
                    if work[r] != 0.0 {
                        u_col.push((f.row_step[r], work[r]));
                    }
                } else {
                    max_abs = max_abs.max(work[r].abs());
                }
            }
            if max_abs <= SINGULAR_TOL {
                singular.push(pos);
                for &r in &pattern {
                    work[r] = 0.0;
                    in_pattern[r] = false;
                }
                continue;
            }
            let mut best: Option<usize> = None;
            for &r in &pattern {
                if f.row_step[r] != unset || work[r].abs() < PIVOT_THRESHOLD * max_abs {
                    continue;
                }
                best = match best {
                    None => Some(r),
                    Some(b) => {
                        let key = (row_counts[r], std::cmp::Reverse(ord(work[r].abs())), r);
                        let bkey = (row_counts[b], std::cmp::Reverse(ord(work[b].abs())), b);
                        if key < bkey {
                            Some(r)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            let prow = best.expect("pivot candidate exists");
            let piv = work[prow];
            let mut l_col = Vec::new();
            for &r in &pattern {
                if f.row_step[r] == unset && r != prow && work[r] != 0.0 {
                    l_col.push((r, work[r] / piv));
                }
            }
            for &r in &pattern {
                work[r] = 0.0;
                in_pattern[r] = false;
            }
            let step = f.pivot_row.len();
            f.row_step[prow] = step;
            f.pivot_row.push(prow);
            f.step_pos.push(pos);
            f.l_cols.push(l_col);
            f.u_cols.push(u_col);
            f.u_diag.push(piv);
        }

        if !singular.is_empty() {
            let free_rows = (0..m).filter(|&r| f.row_step[r] == unset).collect();
            return Err(Singular {
                positions: singular,
                free_rows,
            });
        }
        Ok(f)
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs` in place. On entry `rhs` is indexed by row, on exit
    /// by basis position.
    pub fn ftran(&self, rhs: &mut [f64]) {
        let m = self.m;
        // L solve, indexed by row.
        for s in 0..m {
            let xv = rhs[self.pivot_row[s]];
            if xv == 0.0 {
                continue;
            }
            for &(r, l) in &self.l_cols[s] {
                rhs[r] -= l * xv;
            }
        }
        // U solve into step order.
        let mut z = vec![0.0; m];
        for k in (0..m).rev() {
            let v = rhs[self.pivot_row[k]];
            if v == 0.0 {
                continue;
            }
            let zk = v / self.u_diag[k];
            z[k] = zk;
            for &(p, u) in &self.u_cols[k] {
                rhs[self.pivot_row[p]] -= u * zk;
            }
        }
        for k in 0..m {
            rhs[self.step_pos[k]] = z[k];
        }
        for eta in &self.etas {
            let xr = rhs[eta.pos];
            if xr == 0.0 {
                continue;
            }
            let xr = xr / eta.pivot;
            rhs[eta.pos] = xr;
            for &(i, a) in &eta.entries {
                rhs[i] -= a * xr;
            }
        }
    }

    /// Solves `B^T y = rhs` in place. On entry `rhs` is indexed by basis
    /// position, on exit by row.
    pub fn btran(&self, rhs: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut acc = rhs[eta.pos];
            for &(i, a) in &eta.entries {
                acc -= a * rhs[i];
            }
            rhs[eta.pos] = acc / eta.pivot;
        }
        let mut v = vec![0.0; m];
        for k in 0..m {
            let mut acc = rhs[self.step_pos[k]];
            for &(p, u) in &self.u_cols[k] {
                acc -= u * v[p];
            }
            v[k] = acc / self.u_diag[k];
        }
        for k in 0..m {
            rhs[self.pivot_row[k]] = v[k];
        }
        for s in (0..m).rev() {
            let lc = &self.l_cols[s];
            if lc.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for &(r, l) in lc {
                acc += l * rhs[r];
            }
            rhs[self.pivot_row[s]] -= acc;
        }
    }

    /// Records that basis position `pos` now holds the column whose FTRAN
    /// image (before this update) is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn ord(v: f64) -> u64 {
    v.to_bits()
}
