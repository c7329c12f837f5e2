use super::linalg::{dot, norm2, norm_inf, Cholesky, DenseMatrix};
use super::reduce::{prepare, Normalized, Prepared, Restricted};
use super::{row_dot, ConvexProgram, KktResiduals, Objective, PhaseOne, SolveResult, SolveStatus, SolverOptions};
use crate::error::{invalid, OffloadError, Result};

const MAX_STAGES: usize = 80;
/// Centering tolerance accepted once rounding stalls Newton progress.
const FLOOR_NEWTON_TOL: f64 = 1e-6;
const STALL_ITERS: usize = 5;

fn dense_row(row: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(j, a) in row {
        v[j] += a;
    }
    v
}

struct NewtonStep {
    dz: Vec<f64>,
    /// Equality multipliers of the Newton system (barrier-scaled).
    w: Vec<f64>,
    lambda_sq: f64,
    /// Directional derivative of the barrier function along `dz`.
    slope: f64,
}

struct Core<'a, O: ?Sized> {
    obj: &'a O,
    scale: f64,
    eq: &'a Normalized,
    ineq: &'a Normalized,
    opts: SolverOptions,
}

struct Centering {
    converged: bool,
    iterations: usize,
}

impl<O: Objective + ?Sized> Core<'_, O> {
    fn n(&self) -> usize {
        self.obj.dim()
    }

    fn fval(&self, z: &[f64]) -> f64 {
        self.scale * self.obj.value(z)
    }

    fn newton_step(&self, z: &[f64], t: f64, slacks: &[f64]) -> Option<NewtonStep> {
        let n = self.n();
        let mut g = vec![0.0; n];
        self.obj.gradient(z, &mut g);
        g.iter_mut().for_each(|v| *v *= t * self.scale);
        let mut h = DenseMatrix::zeros(n);
        self.obj.add_hessian(z, t * self.scale, &mut h);
        for (row, &s) in self.ineq.rows.iter().zip(slacks) {
            for &(j, a) in row {
                g[j] += a / s;
            }
            h.add_outer_sparse(row, 1.0 / (s * s));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = Cholesky::factor_regularized(&h)?;
        let m_eq = self.eq.len();
        let eq_resid: Vec<f64> = self.eq.slacks(z);
        let mut schur = None;
        if m_eq > 0 {
            let h_inv_at: Vec<Vec<f64>> = self.eq.rows.iter().map(|r| chol.solve(&dense_row(r, n))).collect();
            let mut s_mat = DenseMatrix::zeros(m_eq);
            for i in 0..m_eq {
                for j in 0..m_eq {
                    s_mat.set(i, j, row_dot(&self.eq.rows[i], &h_inv_at[j]));
                }
            }
            schur = Some((Cholesky::factor_regularized(&s_mat)?, h_inv_at));
        }
        // [H Aᵀ; A 0] (dz, w) = (r1, r2) by block elimination
        let kkt_solve = |r1: &[f64], r2: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let hr = chol.solve(r1);
            let Some((s_chol, h_inv_at)) = &schur else {
                return (hr, Vec::new());
            };
            let rhs: Vec<f64> = (0..m_eq).map(|i| row_dot(&self.eq.rows[i], &hr) - r2[i]).collect();
            let w = s_chol.solve(&rhs);
            let mut dz = hr;
            for (wi, col) in w.iter().zip(h_inv_at) {
                for (d, c) in dz.iter_mut().zip(col) {
                    *d -= wi * c;
                }
            }
            (dz, w)
        };
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let (mut dz, mut w) = kkt_solve(&neg_g, &eq_resid);
        // iterative refinement against the unregularized system
        for _ in 0..2 {
            let mut r1 = h.mul_vec(&dz);
            for (row, wi) in self.eq.rows.iter().zip(&w) {
                for &(j, a) in row {
                    r1[j] += a * wi;
                }
            }
            r1.iter_mut().zip(&neg_g).for_each(|(r, b)| *r = b - *r);
            let r2: Vec<f64> = (0..m_eq).map(|i| eq_resid[i] - row_dot(&self.eq.rows[i], &dz)).collect();
            let (ddz, dw) = kkt_solve(&r1, &r2);
            dz.iter_mut().zip(&ddz).for_each(|(d, e)| *d += e);
            w.iter_mut().zip(&dw).for_each(|(d, e)| *d += e);
        }
        let hdz = h.mul_vec(&dz);
        let lambda_sq = dot(&dz, &hdz).max(0.0);
        let slope = dot(&g, &dz);
        if !lambda_sq.is_finite() || dz.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(NewtonStep { dz, w, lambda_sq, slope })
    }

    /// Decrease of the barrier function too small to resolve: the fixed floor
    /// or the rounding level of `t·f − Σ ln s`, whichever is larger.
    fn floor_tol(&self, z: &[f64], t: f64) -> f64 {
        FLOOR_NEWTON_TOL.max(1e-13 * (t * self.fval(z).abs() + self.ineq.len() as f64))
    }

    fn center(&self, z: &mut Vec<f64>, t: f64) -> Centering {
        let opts = &self.opts;
        let mut best_lambda_sq = f64::INFINITY;
        let mut since_best = 0;
        for iter in 0..opts.max_newton_iters {
            let slacks = self.ineq.slacks(z);
            let Some(step) = self.newton_step(z, t, &slacks) else {
                return Centering { converged: false, iterations: iter };
            };
            if step.lambda_sq / 2.0 <= opts.newton_tol {
                return Centering { converged: true, iterations: iter };
            }
            if step.lambda_sq < 0.5 * best_lambda_sq {
                best_lambda_sq = step.lambda_sq;
                since_best = 0;
            } else {
                since_best += 1;
            }
            // below the rounding floor the direction is noise: the slope no
            // longer matches −λ², or λ² stops shrinking
            let noisy = step.slope > -0.5 * step.lambda_sq || since_best >= STALL_ITERS;
            if noisy && step.lambda_sq / 2.0 <= self.floor_tol(z, t) {
                return Centering { converged: true, iterations: iter };
            }
            // largest step keeping every slack positive
            let mut s_max = f64::INFINITY;
            for (row, &s) in self.ineq.rows.iter().zip(&slacks) {
                let rate = row_dot(row, &step.dz);
                if rate > 0.0 {
                    s_max = s_max.min(s / rate);
                }
            }
            let mut alpha = if s_max.is_finite() { (0.99 * s_max).min(1.0) } else { 1.0 };
            let f0 = self.fval(z);
            let noise = 1e-13 * (t * f0.abs() + self.ineq.len() as f64 + 1.0);
            let mut accepted = false;
            let mut trial = z.clone();
            while alpha > 1e-18 {
                for ((tz, zi), d) in trial.iter_mut().zip(z.iter()).zip(&step.dz) {
                    *tz = zi + alpha * d;
                }
                let new_slacks = self.ineq.slacks(&trial);
                if new_slacks.iter().all(|&s| s > 0.0) {
                    let f1 = self.fval(&trial);
                    if f1.is_finite() {
                        let log_ratio: f64 = new_slacks.iter().zip(&slacks).map(|(a, b)| (a / b).ln()).sum();
                        let delta = t * (f1 - f0) - log_ratio;
                        if delta <= opts.ls_alpha * alpha * step.slope + noise {
                            accepted = true;
                            break;
                        }
                    }
                }
                alpha *= opts.ls_beta;
            }
            if !accepted {
                // no progress possible at working precision
                return Centering { converged: step.lambda_sq / 2.0 <= self.floor_tol(z, t), iterations: iter + 1 };
            }
            std::mem::swap(z, &mut trial);
        }
        Centering { converged: false, iterations: opts.max_newton_iters }
    }
}

enum StageAction {
    Continue,
    Stop,
}

struct Run {
    z: Vec<f64>,
    t: f64,
    stage_values: Vec<f64>,
    newton_iterations: usize,
    all_centered: bool,
    stopped: bool,
}

fn run_barrier<O: Objective + ?Sized>(
    core: &Core<'_, O>,
    mut z: Vec<f64>,
    mut on_stage: impl FnMut(&[f64], f64) -> StageAction,
) -> Run {
    let mut t = core.opts.barrier_t0;
    let mut stage_values = Vec::new();
    let mut newton_iterations = 0;
    let mut all_centered = true;
    for _ in 0..MAX_STAGES {
        let c = core.center(&mut z, t);
        newton_iterations += c.iterations;
        all_centered &= c.converged;
        stage_values.push(core.obj.value(&z));
        if let StageAction::Stop = on_stage(&z, t) {
            return Run { z, t, stage_values, newton_iterations, all_centered, stopped: true };
        }
        if core.ineq.len() == 0 {
            break;
        }
        t *= core.opts.barrier_mu;
    }
    Run { z, t, stage_values, newton_iterations, all_centered, stopped: false }
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    let ok = opts.barrier_mu > 1.0
        && opts.barrier_t0 > 0.0
        && opts.newton_tol > 0.0
        && opts.duality_gap_tol > 0.0
        && opts.max_newton_iters > 0
        && opts.ls_alpha > 0.0
        && opts.ls_alpha < 0.5
        && opts.ls_beta > 0.0
        && opts.ls_beta < 1.0;
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("invalid solver options {opts:?}")))
    }
}

/// Minimizes from a strictly feasible `start`.
///
/// Variables pinned by single-variable equality rows are eliminated first.
/// Each barrier stage then minimizes `t·f(z) − Σ ln(b_i − a_i z)` over the
/// remaining equality set by damped Newton and multiplies `t` by
/// `barrier_mu`. The objective is rescaled internally so that
/// `|f(start)| = 1`; the loop ends once the barrier bound `m/t` drops below
/// `duality_gap_tol` times the current rescaled objective magnitude, floored
/// at `1e-10`.
pub fn minimize<O: Objective>(
    program: &ConvexProgram<O>,
    options: &SolverOptions,
    start: &[f64],
) -> Result<SolveResult> {
    check_options(options)?;
    let n = program.dimension();
    if start.len() != n {
        return Err(invalid(format!("start has length {}, expected {n}", start.len())));
    }
    let Some(prep) = prepare(program)? else {
        return Err(invalid("start cannot be feasible: the constraints are contradictory"));
    };
    for (j, v) in prep.fixed.iter().enumerate() {
        if let Some(v) = v {
            if (start[j] - v).abs() > 1e-9 * (1.0 + v.abs()) {
                return Err(invalid(format!("start sets pinned variable {j} to {} instead of {v}", start[j])));
            }
        }
    }
    let zf = prep.restrict(start);
    let (eq, ineq) = (&prep.eq, &prep.ineq);
    if let Some(i) = ineq.slacks(&zf).iter().position(|&s| !(s > 0.0)) {
        return Err(invalid(format!("start is not strictly feasible for inequality row {}", ineq.source[i])));
    }
    let eq_resid = norm_inf(&eq.slacks(&zf));
    if eq_resid > 1e-6 * (1.0 + eq.max_abs_rhs()) {
        return Err(invalid(format!("start violates the equality constraints by {eq_resid}")));
    }
    let f_start = program.objective.value(start);
    if !f_start.is_finite() {
        return Err(invalid("objective is not finite at the start point"));
    }
    let scale = if f_start.abs() > 0.0 { 1.0 / f_start.abs() } else { 1.0 };
    let restricted = Restricted { inner: &program.objective, prep: &prep };
    let core = Core { obj: &restricted, scale, eq, ineq, opts: *options };
    let m = ineq.len() as f64;
    let gap_tol = options.duality_gap_tol;
    let run = run_barrier(&core, zf, |z, t| {
        let f_hat = core.fval(z).abs().max(1e-10);
        if m / t <= gap_tol * f_hat {
            StageAction::Stop
        } else {
            StageAction::Continue
        }
    });
    let reached_gap = run.stopped || ineq.len() == 0;
    Ok(finish(program, &prep, &core, run, reached_gap))
}

/// Dual estimates and residuals at the final iterate.
fn finish<O: Objective>(
    program: &ConvexProgram<O>,
    prep: &Prepared,
    core: &Core<'_, Restricted<'_, O>>,
    run: Run,
    reached_gap: bool,
) -> SolveResult {
    let nf = prep.n_free();
    let (eq, ineq) = (core.eq, core.ineq);
    let zf = run.z;
    let t = run.t;
    let slacks = ineq.slacks(&zf);
    let mut lam_hat = vec![0.0; ineq.len()];
    let mut nu_hat = vec![0.0; eq.len()];
    if let Some(step) = core.newton_step(&zf, t, &slacks) {
        for (i, (row, &s)) in ineq.rows.iter().zip(&slacks).enumerate() {
            let corr = 1.0 + row_dot(row, &step.dz) / s;
            lam_hat[i] = (corr / (t * s)).max(0.0);
        }
        for (v, w) in nu_hat.iter_mut().zip(&step.w) {
            *v = w / t;
        }
    } else {
        for (i, &s) in slacks.iter().enumerate() {
            lam_hat[i] = 1.0 / (t * s);
        }
    }
    let mut grad = vec![0.0; nf];
    core.obj.gradient(&zf, &mut grad);
    grad.iter_mut().for_each(|g| *g *= core.scale);
    let mut resid = grad.clone();
    for (row, l) in ineq.rows.iter().zip(&lam_hat) {
        for &(j, a) in row {
            resid[j] += l * a;
        }
    }
    for (row, v) in eq.rows.iter().zip(&nu_hat) {
        for &(j, a) in row {
            resid[j] += v * a;
        }
    }
    let f_hat = core.fval(&zf);
    let kkt = KktResiduals {
        stationarity: norm2(&resid) / (1.0 + norm2(&grad)),
        primal_eq: norm_inf(&eq.slacks(&zf)) / (1.0 + eq.max_abs_rhs()),
        primal_ineq: slacks.iter().fold(0.0_f64, |m, &s| m.max(-s)) / (1.0 + ineq.max_abs_rhs()),
        complementarity: dot(&lam_hat, &slacks).abs() / (1.0 + f_hat.abs()),
    };
    let status = if reached_gap && run.all_centered && kkt.max() <= 1e-6 {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };

    let z = prep.expand(&zf);
    let mut ineq_multipliers = vec![0.0; program.ineq.len()];
    for (i, l) in lam_hat.iter().enumerate() {
        ineq_multipliers[ineq.source[i]] = l / (core.scale * ineq.norms[i]);
    }
    let mut eq_multipliers = vec![0.0; program.eq.len()];
    for (i, v) in nu_hat.iter().enumerate() {
        eq_multipliers[eq.source[i]] = v / (core.scale * eq.norms[i]);
    }
    if !prep.pins.is_empty() {
        // stationarity on pinned coordinates, latest pin first
        let mut r = vec![0.0; prep.n_full];
        program.objective.gradient(&z, &mut r);
        for (i, l) in ineq_multipliers.iter().enumerate() {
            for &(j, a) in program.ineq.row(i) {
                r[j] += l * a;
            }
        }
        for (i, v) in eq_multipliers.iter().enumerate() {
            for &(j, a) in program.eq.row(i) {
                r[j] += v * a;
            }
        }
        for pin in prep.pins.iter().rev() {
            let coef: f64 = program.eq.row(pin.source).iter().filter(|e| e.0 == pin.var).map(|e| e.1).sum();
            let nu = -r[pin.var] / coef;
            eq_multipliers[pin.source] = nu;
            for &(j, a) in program.eq.row(pin.source) {
                r[j] += nu * a;
            }
        }
    }
    SolveResult {
        objective_value: program.objective.value(&z),
        z_star: z,
        kkt_residuals: kkt,
        status,
        ineq_multipliers,
        eq_multipliers,
        stage_objectives: run.stage_values,
        newton_iterations: run.newton_iterations,
        gap_bound: ineq.len() as f64 / (t * core.scale),
    }
}

/// Objective `s` of the feasibility problem, the last coordinate.
struct SlackObjective {
    dim: usize,
}

impl Objective for SlackObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        z[self.dim - 1]
    }

    fn gradient(&self, _z: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        grad[self.dim - 1] = 1.0;
    }

    fn add_hessian(&self, _z: &[f64], _scale: f64, _hess: &mut DenseMatrix) {}
}

/// Least-norm solution of the (normalized) equality system, or `None` if it
/// is inconsistent.
fn least_norm(eq: &Normalized, n: usize) -> Option<Vec<f64>> {
    let m = eq.len();
    if m == 0 {
        return Some(vec![0.0; n]);
    }
    let dense: Vec<Vec<f64>> = eq.rows.iter().map(|r| dense_row(r, n)).collect();
    let mut gram = DenseMatrix::zeros(m);
    for i in 0..m {
        for j in 0..m {
            gram.set(i, j, row_dot(&eq.rows[i], &dense[j]));
        }
    }
    let y = Cholesky::factor_regularized(&gram)?.solve(&eq.rhs);
    let mut z = vec![0.0; n];
    for (yi, row) in y.iter().zip(&eq.rows) {
        for &(j, a) in row {
            z[j] += yi * a;
        }
    }
    let resid = norm_inf(&eq.slacks(&z));
    (resid <= 1e-9 * (1.0 + eq.max_abs_rhs())).then_some(z)
}

/// Finds a point with every inequality strictly slack and every equality
/// satisfied, or certifies that none exists.
///
/// Solves `min s  s.t.  a_i z − s ≤ b_i,  A_eq z = b_eq` on normalized rows
/// inside a large box around the least-norm equality solution, with `s`
/// bounded below at the problem's own scale. The search stops once `s` is
/// below `−1e-9·(1 + max|b_in|)` and within a factor two of its optimum,
/// which favors well-centered starts, or once the barrier lower bound on `s`
/// is positive.
pub fn phase_one<O: Objective>(program: &ConvexProgram<O>, options: &SolverOptions) -> Result<PhaseOne> {
    check_options(options)?;
    let Some(prep) = prepare(program)? else {
        return Ok(PhaseOne::Infeasible { margin_bound: f64::NEG_INFINITY });
    };
    let n = prep.n_free();
    let (eq, ineq) = (&prep.eq, &prep.ineq);
    let Some(z0) = least_norm(eq, n) else {
        return Ok(PhaseOne::Infeasible { margin_bound: f64::NEG_INFINITY });
    };
    if ineq.len() == 0 {
        return Ok(PhaseOne::Interior(prep.expand(&z0)));
    }
    let b_max = ineq.max_abs_rhs();
    let margin = 1e-9 * (1.0 + b_max);
    let violation = ineq.rows.iter().zip(&ineq.rhs).map(|(r, b)| row_dot(r, &z0) - b).fold(f64::MIN, f64::max);
    let s0 = violation + 1.0;
    let reach = 1e3 * (1.0 + norm_inf(&z0) + b_max + s0.abs());

    let mut aug_ineq = Normalized::default();
    for (row, &b) in ineq.rows.iter().zip(&ineq.rhs) {
        let mut r = row.clone();
        r.push((n, -1.0));
        aug_ineq.push_scaled(r, b, 0);
    }
    // caps the margin sought in unbounded directions at the problem's own scale
    aug_ineq.push_scaled(vec![(n, -1.0)], 1.0 + b_max + norm_inf(&z0), 0);
    for (j, &zj) in z0.iter().enumerate() {
        aug_ineq.push_scaled(vec![(j, 1.0)], zj + reach, 0);
        aug_ineq.push_scaled(vec![(j, -1.0)], reach - zj, 0);
    }
    let obj = SlackObjective { dim: n + 1 };
    let core = Core { obj: &obj, scale: 1.0, eq, ineq: &aug_ineq, opts: *options };
    let m = aug_ineq.len() as f64;
    let mut start = z0;
    start.push(s0);

    let mut verdict: Option<PhaseOne> = None;
    let run = run_barrier(&core, start, |z, t| {
        let s = z[n];
        let gap = m / t;
        if s < -margin && gap <= 0.5 * s.abs() {
            verdict = Some(PhaseOne::Interior(z[..n].to_vec()));
            return StageAction::Stop;
        }
        if s - gap > 0.0 || (gap <= 1e-12 * (1.0 + s.abs()) && s >= -margin) {
            verdict = Some(PhaseOne::Infeasible { margin_bound: -(s - gap) });
            return StageAction::Stop;
        }
        StageAction::Continue
    });
    match verdict {
        Some(PhaseOne::Interior(zf)) => {
            debug_assert!(ineq.slacks(&zf).iter().all(|&s| s > 0.0));
            Ok(PhaseOne::Interior(prep.expand(&zf)))
        }
        Some(v) => Ok(v),
        None => Err(OffloadError::NotConverged(format!(
            "feasibility search did not settle after {} Newton iterations (slack {})",
            run.newton_iterations, run.z[n]
        ))),
    }
}

/// Phase I followed by [`minimize`]; an empty interior yields status `Infeasible`.
pub fn solve<O: Objective>(program: &ConvexProgram<O>, options: &SolverOptions) -> Result<SolveResult> {
    match phase_one(program, options)? {
        PhaseOne::Interior(z) => minimize(program, options, &z),
        PhaseOne::Infeasible { .. } => Ok(SolveResult {
            z_star: Vec::new(),
            objective_value: f64::NAN,
            kkt_residuals: KktResiduals::default(),
            status: SolveStatus::Infeasible,
            ineq_multipliers: Vec::new(),
            eq_multipliers: Vec::new(),
            stage_objectives: Vec::new(),
            newton_iterations: 0,
            gap_bound: f64::NAN,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SquaredNorm(usize);

    impl Objective for SquaredNorm {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, z: &[f64]) -> f64 {
            dot(z, z)
        }
        fn gradient(&self, z: &[f64], grad: &mut [f64]) {
            for (g, v) in grad.iter_mut().zip(z) {
                *g = 2.0 * v;
            }
        }
        fn add_hessian(&self, _z: &[f64], scale: f64, hess: &mut DenseMatrix) {
            for i in 0..self.0 {
                hess.add(i, i, 2.0 * scale);
            }
        }
    }

    struct SumExp(usize);

    impl Objective for SumExp {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, z: &[f64]) -> f64 {
            z.iter().map(|v| v.exp()).sum()
        }
        fn gradient(&self, z: &[f64], grad: &mut [f64]) {
            for (g, v) in grad.iter_mut().zip(z) {
                *g = v.exp();
            }
        }
        fn add_hessian(&self, z: &[f64], scale: f64, hess: &mut DenseMatrix) {
            for (i, v) in z.iter().enumerate() {
                hess.add(i, i, scale * v.exp());
            }
        }
    }

    fn simplex<O: Objective>(obj: O) -> ConvexProgram<O> {
        let n = obj.dim();
        let mut p = ConvexProgram::new(obj);
        p.eq.push((0..n).map(|j| (j, 1.0)).collect(), 1.0);
        for j in 0..n {
            p.ineq.push(vec![(j, -1.0)], 0.0);
            p.ineq.push(vec![(j, 1.0)], 1.0);
        }
        p
    }

    #[test]
    fn phase_one_finds_simplex_interior() {
        let p = simplex(SquaredNorm(3));
        let PhaseOne::Interior(z) = phase_one(&p, &SolverOptions::default()).unwrap() else {
            panic!("expected interior point");
        };
        assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(z.iter().all(|&v| v > 1e-9 && v < 1.0 - 1e-9));
    }

    #[test]
    fn phase_one_detects_contradiction() {
        let mut p = ConvexProgram::new(SquaredNorm(1));
        p.ineq.push(vec![(0, 1.0)], 0.0);
        p.ineq.push(vec![(0, -1.0)], -1.0);
        assert!(matches!(phase_one(&p, &SolverOptions::default()).unwrap(), PhaseOne::Infeasible { .. }));
    }

    #[test]
    fn phase_one_rejects_touching_sets() {
        // z ≤ 0 and z ≥ 0 has no strict interior
        let mut p = ConvexProgram::new(SquaredNorm(1));
        p.ineq.push(vec![(0, 1.0)], 0.0);
        p.ineq.push(vec![(0, -1.0)], 0.0);
        assert!(matches!(phase_one(&p, &SolverOptions::default()).unwrap(), PhaseOne::Infeasible { .. }));
    }

    #[test]
    fn squared_norm_on_simplex() {
        let p = simplex(SquaredNorm(4));
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        for v in &r.z_star {
            assert!((v - 0.25).abs() < 1e-7, "{v}");
        }
        assert!((r.objective_value - 0.25).abs() < 1e-8);
        assert!(r.kkt_residuals.max() <= 1e-6, "{:?}", r.kkt_residuals);
    }

    #[test]
    fn sum_exp_with_only_equalities() {
        let mut p = ConvexProgram::new(SumExp(2));
        p.eq.push(vec![(0, 1.0), (1, 1.0)], 0.0);
        let r = minimize(&p, &SolverOptions::default(), &[0.7, -0.7]).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.z_star.iter().all(|v| v.abs() < 1e-6));
        assert!((r.objective_value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn active_bound_has_positive_multiplier() {
        // min (z - 2)^2 s.t. z ≤ 1 → z = 1, λ = 2
        struct Shifted;
        impl Objective for Shifted {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, z: &[f64]) -> f64 {
                (z[0] - 2.0).powi(2)
            }
            fn gradient(&self, z: &[f64], g: &mut [f64]) {
                g[0] = 2.0 * (z[0] - 2.0);
            }
            fn add_hessian(&self, _z: &[f64], scale: f64, h: &mut DenseMatrix) {
                h.add(0, 0, 2.0 * scale);
            }
        }
        let mut p = ConvexProgram::new(Shifted);
        p.ineq.push(vec![(0, 3.0)], 3.0);
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.z_star[0] - 1.0).abs() < 1e-7);
        // the row was given as 3z ≤ 3, so its multiplier is 2/3
        assert!((r.ineq_multipliers[0] - 2.0 / 3.0).abs() < 1e-6, "{}", r.ineq_multipliers[0]);
    }

    #[test]
    fn rejects_infeasible_start() {
        let p = simplex(SquaredNorm(2));
        assert!(minimize(&p, &SolverOptions::default(), &[1.0, 0.0]).is_err());
        assert!(minimize(&p, &SolverOptions::default(), &[0.3, 0.3]).is_err());
    }

    #[test]
    fn stage_objectives_do_not_increase() {
        let p = simplex(SumExp(5));
        let r = solve(&p, &SolverOptions::default()).unwrap();
        for w in r.stage_objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn pinned_variables_are_eliminated() {
        let mut p = simplex(SquaredNorm(3));
        p.eq.push(vec![(0, 2.0)], 1.0);
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.z_star[0], 0.5);
        assert!((r.z_star[1] - 0.25).abs() < 1e-7 && (r.z_star[2] - 0.25).abs() < 1e-7);
        // 2·z0 + ν_sum + 2·ν_pin = 0 with ν_sum = −0.5
        assert!((r.eq_multipliers[0] + 0.5).abs() < 1e-6);
        assert!((r.eq_multipliers[1] + 0.25).abs() < 1e-6, "{:?}", r.eq_multipliers);
    }

    #[test]
    fn conflicting_pins_are_infeasible() {
        let mut p = simplex(SquaredNorm(2));
        p.eq.push(vec![(0, 1.0)], 0.2);
        p.eq.push(vec![(0, 1.0)], 0.3);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, SolveStatus::Infeasible);
    }
}
