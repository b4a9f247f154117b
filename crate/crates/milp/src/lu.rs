//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Left-looking elimination (Gilbert-Peierls): columns are processed sparsest
//! first, each one is reduced by the already computed columns of L reachable
//! from its pattern, and the pivot is the largest remaining entry. Basis
//! changes are appended as eta columns until the next refactorization.

const NONE: usize = usize::MAX;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

/// Positions that could not be pivoted and the rows left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

#[derive(Debug, Default)]
struct Lu {
    pivot_row: Vec<usize>,
    col_order: Vec<usize>,
    l_start: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_step: Vec<usize>,
    u_val: Vec<f64>,
    diag: Vec<f64>,
}

#[derive(Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

#[derive(Debug, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    lu: Lu,
    etas: Vec<Eta>,
    eta_nnz: usize,
    scratch: Vec<f64>,
}

impl BasisFactor {
    pub fn needs_refactor(&self) -> bool {
        self.etas.len() >= 64 || self.eta_nnz > 4 * (self.lu.l_val.len() + self.lu.u_val.len() + self.m)
    }

    /// Factorizes the basis whose column at position `p` is produced by `column(p, buf)`.
    pub fn factorize(
        m: usize,
        column: &dyn Fn(usize, &mut Vec<(usize, f64)>),
    ) -> Result<BasisFactor, Singular> {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for p in 0..m {
            let mut buf = Vec::new();
            column(p, &mut buf);
            cols.push(buf);
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].len(), p));

        let mut lu = Lu {
            pivot_row: Vec::with_capacity(m),
            col_order: Vec::with_capacity(m),
            l_start: vec![0],
            u_start: vec![0],
            diag: Vec::with_capacity(m),
            ..Lu::default()
        };
        let mut row_step = vec![NONE; m];
        let mut x = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![NONE; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut singular_positions = Vec::new();

        for (k_col, &p) in order.iter().enumerate() {
            let step = lu.diag.len();
            pattern.clear();
            topo.clear();
            let mut col_norm: f64 = 0.0;
            for &(r, v) in &cols[p] {
                x[r] += v;
                col_norm = col_norm.max(v.abs());
                if !in_pattern[r] {
                    in_pattern[r] = true;
                    pattern.push(r);
                }
            }
            // Reach of the column pattern through L, in reverse postorder.
            for &(r, _) in &cols[p] {
                let s = row_step[r];
                if s == NONE || visited[s] == k_col {
                    continue;
                }
                visited[s] = k_col;
                stack.push((s, lu.l_start[s]));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (j, mut next) = stack[top];
                    let end = lu.l_start[j + 1];
                    let mut child = NONE;
                    while next < end {
                        let si = row_step[lu.l_row[next]];
                        next += 1;
                        if si != NONE && visited[si] != k_col {
                            visited[si] = k_col;
                            child = si;
                            break;
                        }
                    }
                    stack[top].1 = next;
                    if child == NONE {
                        topo.push(j);
                        stack.pop();
                    } else {
                        stack.push((child, lu.l_start[child]));
                    }
                }
            }
            for &j in topo.iter().rev() {
                let xj = x[lu.pivot_row[j]];
                if xj == 0.0 {
                    continue;
                }
                for t in lu.l_start[j]..lu.l_start[j + 1] {
                    let i = lu.l_row[t];
                    if !in_pattern[i] {
                        in_pattern[i] = true;
                        pattern.push(i);
                    }
                    x[i] -= lu.l_val[t] * xj;
                }
            }

            let mut best = NONE;
            let mut best_abs = 0.0;
            for &i in &pattern {
                if row_step[i] == NONE {
                    let a = x[i].abs();
                    if a > best_abs || (a == best_abs && best != NONE && i < best) {
                        best_abs = a;
                        best = i;
                    }
                }
            }
            if best == NONE || best_abs <= SINGULAR_TOL * col_norm.max(1.0) {
                singular_positions.push(p);
            } else {
                for &j in topo.iter().rev() {
                    let v = x[lu.pivot_row[j]];
                    if v.abs() > DROP_TOL {
                        lu.u_step.push(j);
                        lu.u_val.push(v);
                    }
                }
                lu.u_start.push(lu.u_step.len());
                let piv = x[best];
                for &i in &pattern {
                    if i != best && row_step[i] == NONE && x[i].abs() > DROP_TOL {
                        lu.l_row.push(i);
                        lu.l_val.push(x[i] / piv);
                    }
                }
                lu.l_start.push(lu.l_row.len());
                lu.diag.push(piv);
                lu.pivot_row.push(best);
                lu.col_order.push(p);
                row_step[best] = step;
            }
            for &i in &pattern {
                x[i] = 0.0;
                in_pattern[i] = false;
            }
        }

        if !singular_positions.is_empty() {
            let free_rows = (0..m).filter(|&r| row_step[r] == NONE).collect();
            return Err(Singular { positions: singular_positions, free_rows });
        }
        Ok(BasisFactor { m, lu, etas: Vec::new(), eta_nnz: 0, scratch: vec![0.0; m] })
    }

    /// Solves `B x = b`. Input indexed by row, output by basis position.
    pub fn ftran(&mut self, b: &mut [f64]) {
        let lu = &self.lu;
        let m = self.m;
        for j in 0..m {
            let v = b[lu.pivot_row[j]];
            if v != 0.0 {
                for t in lu.l_start[j]..lu.l_start[j + 1] {
                    b[lu.l_row[t]] -= lu.l_val[t] * v;
                }
            }
        }
        let y = &mut self.scratch;
        for j in 0..m {
            y[j] = b[lu.pivot_row[j]];
        }
        for k in (0..m).rev() {
            let z = y[k] / lu.diag[k];
            y[k] = z;
            if z != 0.0 {
                for t in lu.u_start[k]..lu.u_start[k + 1] {
                    y[lu.u_step[t]] -= lu.u_val[t] * z;
                }
            }
        }
        for k in 0..m {
            b[lu.col_order[k]] = y[k];
        }
        for eta in &self.etas {
            let xr = b[eta.pos] / eta.pivot;
            if xr != 0.0 {
                for (&i, &v) in eta.idx.iter().zip(&eta.val) {
                    b[i] -= v * xr;
                }
            }
            b[eta.pos] = xr;
        }
    }

    /// Solves `B^T y = c`. Input indexed by basis position, output by row.
    pub fn btran(&mut self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for (&i, &v) in eta.idx.iter().zip(&eta.val) {
                s -= v * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let lu = &self.lu;
        let m = self.m;
        let w = &mut self.scratch;
        for k in 0..m {
            let mut s = c[lu.col_order[k]];
            for t in lu.u_start[k]..lu.u_start[k + 1] {
                s -= lu.u_val[t] * w[lu.u_step[t]];
            }
            w[k] = s / lu.diag[k];
        }
        for j in (0..m).rev() {
            let mut s = w[j];
            for t in lu.l_start[j]..lu.l_start[j + 1] {
                s -= lu.l_val[t] * c[lu.l_row[t]];
            }
            c[lu.pivot_row[j]] = s;
        }
    }

    /// Records that the column at `pos` was replaced by one whose FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in alpha.iter().enumerate() {
            if i != pos && v.abs() > DROP_TOL {
                idx.push(i);
                val.push(v);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta { pos, pivot: alpha[pos], idx, val });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> impl Fn(usize, &mut Vec<(usize, f64)>) + '_ {
        move |p, buf| {
            for (r, row) in a.iter().enumerate() {
                if row[p] != 0.0 {
                    buf.push((r, row[p]));
                }
            }
        }
    }

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = a[0].len();
        (0..n).map(|j| a.iter().zip(y).map(|(row, yi)| row[j] * yi).sum()).collect()
    }

    #[test]
    fn solves_with_and_without_updates() {
        let mut a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ];
        let mut f = BasisFactor::factorize(4, &dense_cols(&a)).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let mut x = b.clone();
        f.ftran(&mut x);
        for (u, v) in mat_vec(&a, &x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut y = b.clone();
        f.btran(&mut y);
        for (u, v) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }

        // Replace column 1 and check the eta path against the new matrix.
        let new_col = vec![1.0, -1.0, 0.0, 2.0];
        let mut alpha = new_col.clone();
        f.ftran(&mut alpha);
        f.update(1, &alpha);
        for r in 0..4 {
            a[r][1] = new_col[r];
        }
        let mut x = b.clone();
        f.ftran(&mut x);
        for (u, v) in mat_vec(&a, &x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut y = b.clone();
        f.btran(&mut y);
        for (u, v) in mat_t_vec(&a, &y).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn reports_singular_columns() {
        let a = vec![vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]];
        let err = BasisFactor::factorize(3, &dense_cols(&a)).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.free_rows.len(), 1);
    }
}
