//! Accelerated proximal gradient (APG) solver for nonnegative tensor ring
//! decomposition, with optional graph regularization of the last core.
//!
//! The outer loop sweeps the cores cyclically. For core `n` the problem
//!
//! ```text
//! min_{G ≥ 0}  ½‖X_[n] − G · Sᵀ‖²_F  (+ β/2 · Tr(Gᵀ H G) when n is the sample mode)
//! ```
//!
//! with `S = G^{≠n}_[2]` fixed is a convex nonnegative least-squares problem.
//! It is solved by `t_max` APG iterations: a projected gradient step of length
//! `1/L` from a momentum-extrapolated search point `Y`, followed by the
//! Nesterov update of the momentum coefficient `α`.
//!
//! The gradient is taken at the search point, and a step that would increase
//! the subproblem objective triggers a momentum restart (`α ← 1`, `Y ← G`).

use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::matrix::{spectral_norm, Matrix};
use crate::ring::{build_subchain, core_fold2, core_unfold2, init_random, RankVector, TrCores};
use crate::tensor::{unfold_tr, DenseTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Inner APG iterations per core update.
    pub t_max: usize,
    /// Cap on outer sweeps over all cores.
    pub max_sweeps: usize,
    /// Stop once the relative objective change of a sweep falls below this.
    pub tol: f64,
    /// Graph regularization weight; 0 disables the regularizer.
    pub beta: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_max: 100,
            max_sweeps: 500,
            tol: 1e-6,
            beta: 0.1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::InvalidParameter("t_max must be at least 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    MaxSweeps,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Tolerance => "tol",
            Termination::MaxSweeps => "max_sweeps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Objective at the initial cores.
    pub initial_objective: f64,
    /// Objective after each sweep, measured on the last-mode matricization.
    pub objective_per_sweep: Vec<f64>,
    pub rel_change_per_sweep: Vec<f64>,
    /// Seconds elapsed since the start of the fit, at the end of each sweep.
    pub elapsed_per_sweep: Vec<f64>,
    pub sweeps_run: usize,
    pub terminated_by: Termination,
    pub wall_seconds: f64,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_per_sweep
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

fn check_subproblem_shapes(g2: &Matrix, subchain2: &Matrix, x_unfold: &Matrix) -> Result<()> {
    if g2.cols() != subchain2.cols()
        || x_unfold.rows() != g2.rows()
        || x_unfold.cols() != subchain2.rows()
    {
        return Err(Error::DimensionMismatch(format!(
            "core unfolding {}x{}, subchain unfolding {}x{}, data unfolding {}x{}",
            g2.rows(),
            g2.cols(),
            subchain2.rows(),
            subchain2.cols(),
            x_unfold.rows(),
            x_unfold.cols()
        )));
    }
    Ok(())
}

fn check_laplacian(h_g: &Matrix, rows: usize) -> Result<()> {
    if h_g.rows() != rows || h_g.cols() != rows {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian is {}x{}, core unfolding has {rows} rows",
            h_g.rows(),
            h_g.cols()
        )));
    }
    Ok(())
}

/// `G · (SᵀS) − X · S`.
pub fn gradient_ntr(g2: &Matrix, subchain2: &Matrix, x_unfold: &Matrix) -> Result<Matrix> {
    check_subproblem_shapes(g2, subchain2, x_unfold)?;
    let gram = subchain2.t_matmul(subchain2)?;
    g2.matmul(&gram)?.sub(&x_unfold.matmul(subchain2)?)
}

/// [`gradient_ntr`] plus `β · H · G`.
pub fn gradient_gntr(
    g2: &Matrix,
    subchain2: &Matrix,
    x_unfold: &Matrix,
    h_g: &Matrix,
    beta: f64,
) -> Result<Matrix> {
    check_laplacian(h_g, g2.rows())?;
    gradient_ntr(g2, subchain2, x_unfold)?.add(&h_g.matmul(g2)?.scale(beta))
}

/// `‖SᵀS‖₂`.
pub fn lipschitz_ntr(subchain2: &Matrix) -> f64 {
    let gram = subchain2
        .t_matmul(subchain2)
        .expect("a matrix always conforms with itself");
    spectral_norm(&gram)
}

/// `‖SᵀS‖₂ + β‖H‖₂`.
pub fn lipschitz_gntr(subchain2: &Matrix, h_g: &Matrix, beta: f64) -> f64 {
    lipschitz_ntr(subchain2) + beta * spectral_norm(h_g)
}

/// Nesterov momentum coefficient update, `(1 + √(4α² + 1)) / 2`.
pub fn alpha_next(alpha: f64) -> f64 {
    (1.0 + (4.0 * alpha * alpha + 1.0).sqrt()) / 2.0
}

/// `G_t + (α_t − 1)/α_{t+1} · (G_t − G_{t−1})`.
pub fn search_point(
    g_curr: &Matrix,
    g_prev: &Matrix,
    alpha_curr: f64,
    alpha_next: f64,
) -> Result<Matrix> {
    let coef = (alpha_curr - 1.0) / alpha_next;
    g_curr.add(&g_curr.sub(g_prev)?.scale(coef))
}

/// `max(0, Y − ∇/L)` elementwise.
pub fn prox_step(y: &Matrix, grad_at_y: &Matrix, lipschitz: f64) -> Result<Matrix> {
    if !(lipschitz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step needs a positive Lipschitz constant, got {lipschitz}"
        )));
    }
    let mut out = y.sub(grad_at_y)?;
    for (o, (&yv, &gv)) in out.data_mut().iter_mut().zip(y.data().iter().zip(grad_at_y.data())) {
        *o = (yv - gv / lipschitz).max(0.0);
    }
    Ok(out)
}

/// Graph regularizer `β/2 · Tr(Gᵀ H G)` applied to one core.
#[derive(Debug, Clone, Copy)]
pub struct Regularizer<'a> {
    pub laplacian: &'a Matrix,
    pub beta: f64,
    laplacian_norm: f64,
}

impl<'a> Regularizer<'a> {
    pub fn new(laplacian: &'a Matrix, beta: f64) -> Self {
        Self {
            laplacian,
            beta,
            laplacian_norm: spectral_norm(laplacian),
        }
    }

    pub fn from_graph(graph: &'a NeighborGraph, beta: f64) -> Self {
        Self {
            laplacian: graph.laplacian(),
            beta,
            laplacian_norm: graph.laplacian_norm(),
        }
    }

    /// `‖β H‖₂`
    pub fn lipschitz(&self) -> f64 {
        self.beta * self.laplacian_norm
    }
}

/// One core's convex subproblem, with the quantities that stay fixed across
/// its inner iterations precomputed.
#[derive(Debug, Clone)]
pub struct Subproblem<'a> {
    gram: Matrix,
    cross: Matrix,
    half_x_sq: f64,
    reg: Option<Regularizer<'a>>,
    lipschitz: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(
        x_unfold: &Matrix,
        subchain2: &Matrix,
        reg: Option<Regularizer<'a>>,
    ) -> Result<Self> {
        if x_unfold.cols() != subchain2.rows() {
            return Err(Error::DimensionMismatch(format!(
                "data unfolding has {} columns, subchain unfolding has {} rows",
                x_unfold.cols(),
                subchain2.rows()
            )));
        }
        if let Some(r) = &reg {
            check_laplacian(r.laplacian, x_unfold.rows())?;
        }
        let gram = subchain2.t_matmul(subchain2)?;
        let mut lipschitz = spectral_norm(&gram);
        if let Some(r) = &reg {
            lipschitz += r.lipschitz();
        }
        Ok(Self {
            cross: x_unfold.matmul(subchain2)?,
            half_x_sq: 0.5 * x_unfold.frobenius_norm().powi(2),
            gram,
            reg,
            lipschitz,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn regularizer(&self) -> Option<Regularizer<'a>> {
        self.reg
    }

    /// Row and column count of the core unfolding this subproblem solves for.
    pub fn unknown_shape(&self) -> (usize, usize) {
        (self.cross.rows(), self.cross.cols())
    }

    pub fn objective(&self, g: &Matrix) -> f64 {
        let g_gram = g.matmul(&self.gram).expect("shape checked at construction");
        let fit = self.half_x_sq - g.frobenius_dot(&self.cross).expect("shape checked")
            + 0.5 * g.frobenius_dot(&g_gram).expect("shape checked");
        fit + self.penalty(g)
    }

    fn penalty(&self, g: &Matrix) -> f64 {
        self.reg.map_or(0.0, |r| {
            let hg = r.laplacian.matmul(g).expect("shape checked");
            0.5 * r.beta * g.frobenius_dot(&hg).expect("shape checked")
        })
    }

    pub fn gradient(&self, g: &Matrix) -> Matrix {
        let mut grad = g
            .matmul(&self.gram)
            .and_then(|m| m.sub(&self.cross))
            .expect("shape checked at construction");
        if let Some(r) = self.reg {
            let hg = r.laplacian.matmul(g).expect("shape checked");
            grad = grad.add(&hg.scale(r.beta)).expect("shape checked");
        }
        grad
    }

    /// Quadratic upper model `φ(G, Y) = f(Y) + ⟨∇f(Y), G − Y⟩ + L/2‖G − Y‖²`.
    pub fn majorizer(&self, g: &Matrix, y: &Matrix) -> f64 {
        let diff = g.sub(y).expect("same shape");
        let grad = self.gradient(y);
        self.objective(y)
            + grad.frobenius_dot(&diff).expect("same shape")
            + 0.5 * self.lipschitz * diff.frobenius_norm().powi(2)
    }
}

/// Optimizer state of one core's inner loop.
#[derive(Debug, Clone)]
pub struct ApgState {
    pub g_curr: Matrix,
    pub g_prev: Matrix,
    pub y: Matrix,
    pub alpha: f64,
    pub lipschitz: f64,
}

impl ApgState {
    pub fn new(g_init: Matrix, lipschitz: f64) -> Self {
        Self {
            g_prev: g_init.clone(),
            y: g_init.clone(),
            g_curr: g_init,
            alpha: 1.0,
            lipschitz,
        }
    }

    /// Whether the search point coincides with the current iterate, in which
    /// case a restart cannot change the next step.
    fn at_rest(&self) -> bool {
        self.y == self.g_curr
    }

    fn restart(&mut self) {
        self.alpha = 1.0;
        self.y = self.g_curr.clone();
    }

    fn advance(&mut self, next: Matrix) {
        let alpha_new = alpha_next(self.alpha);
        self.y = search_point(&next, &self.g_curr, self.alpha, alpha_new)
            .expect("iterates share a shape");
        self.g_prev = std::mem::replace(&mut self.g_curr, next);
        self.alpha = alpha_new;
    }
}

/// One accepted projected-gradient step, as seen by an observer.
#[derive(Debug)]
pub struct ApgStep<'s> {
    pub iteration: usize,
    pub restarted: bool,
    pub search_point: &'s Matrix,
    pub gradient: &'s Matrix,
    pub iterate: &'s Matrix,
    pub objective: f64,
    pub previous_objective: f64,
    pub lipschitz: f64,
}

/// Runs `t_max` APG iterations on `problem` starting from `g_init`.
pub fn solve_subproblem(
    problem: &Subproblem<'_>,
    g_init: Matrix,
    t_max: usize,
    observer: &mut dyn FnMut(&Subproblem<'_>, &ApgStep<'_>),
) -> Result<Matrix> {
    let lipschitz = problem.lipschitz();
    if !(lipschitz > 0.0) {
        return Err(Error::DegenerateSubproblem(
            "subchain is all zero and no regularizer applies".into(),
        ));
    }
    if (g_init.rows(), g_init.cols()) != problem.unknown_shape() {
        return Err(Error::DimensionMismatch(format!(
            "initial iterate is {}x{}, expected {:?}",
            g_init.rows(),
            g_init.cols(),
            problem.unknown_shape()
        )));
    }

    let mut state = ApgState::new(g_init, lipschitz);
    let mut f_curr = problem.objective(&state.g_curr);
    for iteration in 0..t_max {
        let mut grad = problem.gradient(&state.y);
        let mut next = prox_step(&state.y, &grad, lipschitz)?;
        let mut f_next = problem.objective(&next);
        let mut restarted = false;

        if f_next > f_curr && !state.at_rest() {
            state.restart();
            restarted = true;
            grad = problem.gradient(&state.y);
            next = prox_step(&state.y, &grad, lipschitz)?;
            f_next = problem.objective(&next);
        }

        if f_next > f_curr {
            // a plain projected step from the current iterate can only rise
            // by rounding; keep the iterate
            next = state.g_curr.clone();
            f_next = f_curr;
        } else {
            observer(
                problem,
                &ApgStep {
                    iteration,
                    restarted,
                    search_point: &state.y,
                    gradient: &grad,
                    iterate: &next,
                    objective: f_next,
                    previous_objective: f_curr,
                    lipschitz,
                },
            );
        }

        state.advance(next);
        f_curr = f_next;
    }
    Ok(state.g_curr)
}

/// Solves one core subproblem from scratch.
///
/// `h_g` enables the graph term with weight `cfg.beta`; pass it only for the
/// sample-mode core.
pub fn solve_core(
    x_unfold: &Matrix,
    subchain2: &Matrix,
    g_init: &Matrix,
    cfg: &SolverConfig,
    h_g: Option<&Matrix>,
) -> Result<Matrix> {
    cfg.validate()?;
    check_subproblem_shapes(g_init, subchain2, x_unfold)?;
    if !g_init.is_nonnegative() {
        return Err(Error::Domain("initial core has negative entries".into()));
    }
    let reg = h_g.map(|laplacian| Regularizer::new(laplacian, cfg.beta));
    let problem = Subproblem::new(x_unfold, subchain2, reg)?;
    solve_subproblem(&problem, g_init.clone(), cfg.t_max, &mut |_, _| {})
}

/// Fits nonnegative tensor ring cores to `x` from a seeded random start.
///
/// With a graph and `beta > 0` the last core, whose rows index the samples,
/// is graph regularized (GNTR); otherwise this is plain NTR.
pub fn fit(
    x: &DenseTensor,
    ranks: &RankVector,
    cfg: &SolverConfig,
    graph: Option<&NeighborGraph>,
) -> Result<(TrCores, FitReport)> {
    fit_with_observer(x, ranks, cfg, graph, |_, _, _| {})
}

/// [`fit`] with a callback receiving `(mode, subproblem, step)` for every
/// accepted inner step.
pub fn fit_with_observer(
    x: &DenseTensor,
    ranks: &RankVector,
    cfg: &SolverConfig,
    graph: Option<&NeighborGraph>,
    observer: impl FnMut(usize, &Subproblem<'_>, &ApgStep<'_>),
) -> Result<(TrCores, FitReport)> {
    cfg.validate()?;
    validate_data(x)?;
    if ranks.len() != x.order() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            x.order()
        )));
    }
    let init = init_random(x.shape(), ranks, cfg.seed)?;
    fit_from(x, init, cfg, graph, observer)
}

fn validate_data(x: &DenseTensor) -> Result<()> {
    if x.order() < 2 {
        return Err(Error::UnsupportedOrder(x.order()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("data tensor contains NaN or infinity".into()));
    }
    if !x.is_nonnegative() {
        return Err(Error::Domain("data tensor has negative entries".into()));
    }
    Ok(())
}

/// Fits starting from the given nonnegative cores.
pub fn fit_from(
    x: &DenseTensor,
    init: TrCores,
    cfg: &SolverConfig,
    graph: Option<&NeighborGraph>,
    mut observer: impl FnMut(usize, &Subproblem<'_>, &ApgStep<'_>),
) -> Result<(TrCores, FitReport)> {
    cfg.validate()?;
    validate_data(x)?;
    if init.shape() != *x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "cores represent {}, data is {}",
            init.shape(),
            x.shape()
        )));
    }
    if !init.cores().iter().all(DenseTensor::is_nonnegative) {
        return Err(Error::Domain("initial cores have negative entries".into()));
    }
    let d = x.order();
    let last = d - 1;
    if let Some(g) = graph {
        if g.samples() != x.dims()[last] {
            return Err(Error::DimensionMismatch(format!(
                "graph has {} samples, data has {} along its last mode",
                g.samples(),
                x.dims()[last]
            )));
        }
    }
    // beta = 0 takes exactly the unregularized path
    let reg = graph
        .filter(|_| cfg.beta > 0.0)
        .map(|g| Regularizer::from_graph(g, cfg.beta));

    let start = Instant::now();
    let unfoldings = (0..d)
        .map(|n| unfold_tr(x, n))
        .collect::<Result<Vec<_>>>()?;
    let ranks = init.ranks();
    let mut cores = init;

    let sub_last = build_subchain(&cores, last)?.unfold2();
    let initial_objective =
        full_objective(&unfoldings[last], &core_unfold2(cores.core(last))?, &sub_last, reg)?;

    let mut report = FitReport {
        initial_objective,
        objective_per_sweep: Vec::new(),
        rel_change_per_sweep: Vec::new(),
        elapsed_per_sweep: Vec::new(),
        sweeps_run: 0,
        terminated_by: Termination::MaxSweeps,
        wall_seconds: 0.0,
    };

    let mut previous = initial_objective;
    for _ in 0..cfg.max_sweeps {
        let mut sub_last = None;
        for n in 0..d {
            let sub2 = build_subchain(&cores, n)?.unfold2();
            let problem = Subproblem::new(&unfoldings[n], &sub2, reg.filter(|_| n == last))?;
            let g = core_unfold2(cores.core(n))?;
            let updated = solve_subproblem(&problem, g, cfg.t_max, &mut |p, s| observer(n, p, s))
                .map_err(|e| match e {
                    Error::DegenerateSubproblem(msg) => {
                        Error::DegenerateSubproblem(format!("mode {n}: {msg}"))
                    }
                    other => other,
                })?;
            let core = core_fold2(&updated, ranks.left(n), x.dims()[n], ranks.right(n))?;
            cores.set_core(n, core)?;
            if n == last {
                sub_last = Some(sub2);
            }
        }

        // the last core was updated last, so its subchain is still current
        let sub_last = sub_last.expect("d >= 2 so the last mode was visited");
        let objective =
            full_objective(&unfoldings[last], &core_unfold2(cores.core(last))?, &sub_last, reg)?;
        let rel_change = if previous > 0.0 {
            (previous - objective).abs() / previous
        } else {
            0.0
        };
        report.objective_per_sweep.push(objective);
        report.rel_change_per_sweep.push(rel_change);
        report.elapsed_per_sweep.push(start.elapsed().as_secs_f64());
        report.sweeps_run += 1;
        previous = objective;
        if rel_change < cfg.tol {
            report.terminated_by = Termination::Tolerance;
            break;
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((cores, report))
}

/// `½‖X_[n] − G Sᵀ‖² (+ β/2 Tr(GᵀHG))`, from the explicit residual.
pub fn full_objective(
    x_unfold: &Matrix,
    g2: &Matrix,
    subchain2: &Matrix,
    reg: Option<Regularizer<'_>>,
) -> Result<f64> {
    check_subproblem_shapes(g2, subchain2, x_unfold)?;
    let residual = x_unfold.sub(&g2.matmul_t(subchain2)?)?;
    let mut objective = 0.5 * residual.frobenius_norm().powi(2);
    if let Some(r) = reg {
        objective += 0.5 * r.beta * crate::graph::laplacian_quadratic(r.laplacian, g2)?;
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {objective}")));
    }
    Ok(objective)
}

/// The NTR objective `½‖X − reconstruct(cores)‖²` evaluated on the mode-`n`
/// matricization.
pub fn objective_at_mode(x: &DenseTensor, cores: &TrCores, n: usize) -> Result<f64> {
    let sub2 = build_subchain(cores, n)?.unfold2();
    full_objective(&unfold_tr(x, n)?, &core_unfold2(cores.core(n))?, &sub2, None)
}

/// Per-sample feature matrix: the mode-2 unfolding of the last core, one row
/// per sample and `r_d · r_1` columns.
pub fn features(cores: &TrCores) -> Matrix {
    core_unfold2(cores.core(cores.order() - 1)).expect("cores are third order")
}
