//! Row normalization and elimination of variables pinned by equality rows.

use super::linalg::norm_inf;
use super::{row_dot, AffineSystem, ConvexProgram, DenseMatrix, Objective, SparseRow};
use crate::error::{invalid, Result};

/// Rows scaled to unit norm, with all-zero rows removed.
#[derive(Debug, Clone, Default)]
pub(super) struct Normalized {
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<f64>,
    pub norms: Vec<f64>,
    /// Index of each kept row in the caller's system.
    pub source: Vec<usize>,
}

impl Normalized {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn max_abs_rhs(&self) -> f64 {
        norm_inf(&self.rhs)
    }

    /// `b_i − a_i z`.
    pub fn slacks(&self, z: &[f64]) -> Vec<f64> {
        self.rows.iter().zip(&self.rhs).map(|(r, b)| b - row_dot(r, z)).collect()
    }

    /// Appends `row · z ≤ rhs` scaled to unit norm.
    pub fn push_scaled(&mut self, row: SparseRow, rhs: f64, source: usize) {
        let norm = row.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt();
        self.rows.push(row.into_iter().map(|(j, a)| (j, a / norm)).collect());
        self.rhs.push(rhs / norm);
        self.norms.push(norm);
        self.source.push(source);
    }
}

/// An equality row that fixed one variable.
#[derive(Debug, Clone)]
pub(super) struct Pin {
    pub source: usize,
    pub var: usize,
}

/// The program restricted to its free variables.
#[derive(Debug, Clone)]
pub(super) struct Prepared {
    pub n_full: usize,
    pub free: Vec<usize>,
    pub fixed: Vec<Option<f64>>,
    pub eq: Normalized,
    pub ineq: Normalized,
    /// In the order the variables were fixed.
    pub pins: Vec<Pin>,
}

impl Prepared {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn expand(&self, zf: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (&j, &v) in self.free.iter().zip(zf) {
            z[j] = v;
        }
        z
    }

    pub fn restrict(&self, z: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&j| z[j]).collect()
    }
}

fn merged_row(sys: &AffineSystem, i: usize, dim: usize) -> Result<(SparseRow, f64)> {
    let mut row: SparseRow = sys.row(i).to_vec();
    for &(j, a) in &row {
        if j >= dim || !a.is_finite() {
            return Err(invalid(format!("constraint row {i} has entry ({j}, {a}) outside dimension {dim}")));
        }
    }
    let b = sys.rhs(i);
    if !b.is_finite() {
        return Err(invalid(format!("constraint row {i} has a non-finite right-hand side")));
    }
    row.sort_by_key(|&(j, _)| j);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (j, a) in row {
        match out.last_mut() {
            Some((lj, la)) if *lj == j => *la += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    Ok((out, b))
}

/// Splits a row into its free part and the right-hand side left after
/// substituting fixed variables. Also returns the magnitude of what was moved.
fn substitute(row: &[(usize, f64)], b: f64, fixed: &[Option<f64>]) -> (SparseRow, f64, f64) {
    let mut free = Vec::new();
    let mut rhs = b;
    let mut moved = 0.0_f64;
    for &(j, a) in row {
        match fixed[j] {
            Some(v) => {
                rhs -= a * v;
                moved += (a * v).abs();
            }
            None => free.push((j, a)),
        }
    }
    (free, rhs, moved)
}

/// Normalizes every row and eliminates variables fixed by single-variable
/// equality rows. `None` when a row reduces to a contradiction, including an
/// inequality that cannot hold strictly.
pub(super) fn prepare<O: Objective>(program: &ConvexProgram<O>) -> Result<Option<Prepared>> {
    let n = program.dimension();
    let eq_rows = (0..program.eq.len()).map(|i| merged_row(&program.eq, i, n)).collect::<Result<Vec<_>>>()?;
    let ineq_rows = (0..program.ineq.len()).map(|i| merged_row(&program.ineq, i, n)).collect::<Result<Vec<_>>>()?;

    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut pins = Vec::new();
    let mut consumed = vec![false; eq_rows.len()];
    loop {
        let mut changed = false;
        for (i, (row, b)) in eq_rows.iter().enumerate() {
            if consumed[i] {
                continue;
            }
            let (free, rhs, moved) = substitute(row, *b, &fixed);
            match free.len() {
                0 => {
                    if rhs.abs() > 1e-12 * (1.0 + b.abs() + moved) {
                        return Ok(None);
                    }
                    consumed[i] = true;
                }
                1 => {
                    let (j, a) = free[0];
                    fixed[j] = Some(rhs / a);
                    pins.push(Pin { source: i, var: j });
                    consumed[i] = true;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut position = vec![usize::MAX; n];
    for (p, &j) in free.iter().enumerate() {
        position[j] = p;
    }
    let relabel = |row: SparseRow| -> SparseRow { row.into_iter().map(|(j, a)| (position[j], a)).collect() };

    let mut eq = Normalized::default();
    for (i, (row, b)) in eq_rows.iter().enumerate() {
        if consumed[i] {
            continue;
        }
        let (free_part, rhs, _) = substitute(row, *b, &fixed);
        eq.push_scaled(relabel(free_part), rhs, i);
    }
    let mut ineq = Normalized::default();
    for (i, (row, b)) in ineq_rows.iter().enumerate() {
        let (free_part, rhs, moved) = substitute(row, *b, &fixed);
        if free_part.is_empty() {
            if rhs <= 1e-12 * moved {
                return Ok(None);
            }
            continue;
        }
        ineq.push_scaled(relabel(free_part), rhs, i);
    }
    Ok(Some(Prepared { n_full: n, free, fixed, eq, ineq, pins }))
}

/// The objective seen through [`Prepared::expand`].
pub(super) struct Restricted<'a, O> {
    pub inner: &'a O,
    pub prep: &'a Prepared,
}

impl<O: Objective> Restricted<'_, O> {
    fn passthrough(&self) -> bool {
        self.prep.n_free() == self.prep.n_full
    }
}

impl<O: Objective> Objective for Restricted<'_, O> {
    fn dim(&self) -> usize {
        self.prep.n_free()
    }

    fn value(&self, z: &[f64]) -> f64 {
        if self.passthrough() {
            return self.inner.value(z);
        }
        self.inner.value(&self.prep.expand(z))
    }

    fn gradient(&self, z: &[f64], grad: &mut [f64]) {
        if self.passthrough() {
            return self.inner.gradient(z, grad);
        }
        let mut full = vec![0.0; self.prep.n_full];
        self.inner.gradient(&self.prep.expand(z), &mut full);
        for (g, &j) in grad.iter_mut().zip(&self.prep.free) {
            *g = full[j];
        }
    }

    fn add_hessian(&self, z: &[f64], scale: f64, hess: &mut DenseMatrix) {
        if self.passthrough() {
            return self.inner.add_hessian(z, scale, hess);
        }
        let mut full = DenseMatrix::zeros(self.prep.n_full);
        self.inner.add_hessian(&self.prep.expand(z), scale, &mut full);
        for (p, &i) in self.prep.free.iter().enumerate() {
            for (q, &j) in self.prep.free.iter().enumerate() {
                hess.add(p, q, full.get(i, j));
            }
        }
    }
}
