//! Smooth convex minimization over affine constraints.
//!
//! [`minimize`] runs a log-barrier method with damped Newton centering;
//! equality constraints enter the Newton system through a Schur complement.
//! [`phase_one`] finds a strictly interior start or certifies that none exists.
//! Problem sizes here are a few hundred variables, so everything is dense.

mod barrier;
pub mod linalg;
mod reduce;

pub use barrier::{minimize, phase_one, solve};
pub use linalg::DenseMatrix;

/// A smooth convex function with analytic derivatives.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Function value; `f64::INFINITY` (or NaN) outside the domain.
    fn value(&self, z: &[f64]) -> f64;

    /// Writes the gradient into `grad`.
    fn gradient(&self, z: &[f64], grad: &mut [f64]);

    /// Adds `scale · ∇²f(z)` into `hess`.
    fn add_hessian(&self, z: &[f64], scale: f64, hess: &mut DenseMatrix);

    /// `∇²f(z) v`, through the dense Hessian unless overridden.
    fn hessian_vec(&self, z: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = DenseMatrix::zeros(self.dim());
        self.add_hessian(z, 1.0, &mut h);
        h.mul_vec(v)
    }
}

/// Sparse row `Σ coef · z[index]`.
pub type SparseRow = Vec<(usize, f64)>;

/// Rows `a_i · z (≤ or =) b_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineSystem {
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
}

impl AffineSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: SparseRow, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    /// `a_i · z`.
    pub fn eval_row(&self, i: usize, z: &[f64]) -> f64 {
        row_dot(&self.rows[i], z)
    }

    /// `a_i · z − b_i` for every row.
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval_row(i, z) - self.rhs[i]).collect()
    }
}

pub(crate) fn row_dot(row: &[(usize, f64)], z: &[f64]) -> f64 {
    row.iter().map(|&(j, a)| a * z[j]).sum()
}

/// `min f(z)  s.t.  eq z = b_eq,  ineq z ≤ b_in`.
#[derive(Debug, Clone)]
pub struct ConvexProgram<O> {
    pub objective: O,
    pub eq: AffineSystem,
    pub ineq: AffineSystem,
}

impl<O: Objective> ConvexProgram<O> {
    pub fn new(objective: O) -> Self {
        Self { objective, eq: AffineSystem::new(), ineq: AffineSystem::new() }
    }

    pub fn dimension(&self) -> usize {
        self.objective.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub barrier_mu: f64,
    pub barrier_t0: f64,
    /// Threshold on λ²/2 for ending a centering step.
    pub newton_tol: f64,
    /// Barrier bound m/t relative to the current objective magnitude.
    pub duality_gap_tol: f64,
    /// Newton iterations allowed per centering step.
    pub max_newton_iters: usize,
    pub ls_alpha: f64,
    pub ls_beta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            barrier_mu: 10.0,
            barrier_t0: 1.0,
            newton_tol: 1e-9,
            duality_gap_tol: 1e-8,
            max_newton_iters: 200,
            ls_alpha: 0.1,
            ls_beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Scaled optimality residuals, see [`SolveResult`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖∇f + A_inᵀλ + A_eqᵀν‖ / (1 + ‖∇f‖)`.
    pub stationarity: f64,
    /// `max |A_eq z − b_eq| / (1 + max |b_eq|)`, rows normalized.
    pub primal_eq: f64,
    /// `max(0, max(A_in z − b_in)) / (1 + max |b_in|)`, rows normalized.
    pub primal_ineq: f64,
    /// `λᵀ(b_in − A_in z) / (1 + |f|)`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_eq).max(self.primal_ineq).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub z_star: Vec<f64>,
    pub objective_value: f64,
    pub kkt_residuals: KktResiduals,
    pub status: SolveStatus,
    /// Dual estimates for the inequality rows, in the caller's units.
    pub ineq_multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Objective after each completed barrier stage.
    pub stage_objectives: Vec<f64>,
    pub newton_iterations: usize,
    /// Barrier bound `m/t` on the optimality gap, in the caller's units.
    pub gap_bound: f64,
}

/// Outcome of the feasibility search.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    /// A point with every inequality strictly slack.
    Interior(Vec<f64>),
    /// No strictly interior point exists; `margin_bound` is an upper bound on
    /// the best achievable normalized slack.
    Infeasible { margin_bound: f64 },
}
