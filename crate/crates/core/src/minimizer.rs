//! Discrete minimization of the quotient on an interval, blow-up extraction,
//! the tangent-space coercivity gap and the ε-scaling study.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::bubble::Bubble;
use crate::constants::Constants;
use crate::energy::{gap_argsup, optimal_lambda, GapArgSup};
use crate::error::{Error, Result};
use crate::fit;
use crate::greens_ball::{BallKernel, GreenTable};
use crate::grid::{DomainGrid, Grading};
use std::sync::Arc;
use crate::greens_potential::{GreenOperator, Potential};
use crate::grid::GridFunction;
use crate::linalg;
use crate::params::Params;
use crate::stiffness::StiffnessForm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Relative quotient decrease below which a step counts as stalled.
    pub tol: f64,
    /// Attempt a Newton step every this many inverse-iteration steps.
    pub newton_every: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iter: 2000, tol: 1e-13, newton_every: 4 }
    }
}

/// Result of [`minimize_quotient`].
#[derive(Debug, Clone)]
pub struct Minimized {
    /// Minimizer normalized to ∫|u|^p = A_{N,s}.
    pub u: GridFunction,
    pub quotient: f64,
    pub initial_quotient: f64,
    /// Quotient after every accepted step, starting with the initializer.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
}

/// Quotient operator K + mass(a+εV) on the interior dofs, factored once.
struct QuotientOperator<'a> {
    k: &'a StiffnessForm,
    m: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    p: f64,
    target: f64,
}

impl<'a> QuotientOperator<'a> {
    fn new(a: &Potential, v: &Potential, eps: f64, k: &'a StiffnessForm) -> Result<Self> {
        if !a.grid().same_as(&k.grid) || !v.grid().same_as(&k.grid) {
            return Err(Error::GridMismatch("potentials and stiffness form use different grids".into()));
        }
        let q: Vec<f64> = k.quadrature_points().iter().map(|pt| a.eval(pt.0) + eps * v.eval(pt.0)).collect();
        let m = &k.matrix + k.mass_with(&q);
        let chol = match m.clone().cholesky() {
            Some(c) => c,
            None => {
                let margin = linalg::smallest_gen_eigenvalue(&m, &k.matrix).unwrap_or(f64::NEG_INFINITY);
                return Err(Error::Coercivity(margin));
            }
        };
        let target = Constants::new(&k.params)?.a_big;
        Ok(Self { k, m, chol, p: k.params.p(), target })
    }

    fn quotient(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.m * u)) / self.k.lq_power(u, self.p).powf(2.0 / self.p)
    }

    /// ∫|u|^{p−2}u φ_i.
    fn load(&self, u: &DVector<f64>) -> DVector<f64> {
        let vals: Vec<f64> = self.k.at_points(u).iter().map(|x| x.abs().powf(self.p - 2.0) * x).collect();
        self.k.load_with(&vals)
    }

    fn normalize(&self, u: DVector<f64>) -> DVector<f64> {
        let n = self.k.lq_power(&u, self.p);
        u * (self.target / n).powf(1.0 / self.p)
    }

    fn inverse_step(&self, u: &DVector<f64>) -> DVector<f64> {
        self.normalize(self.chol.solve(&self.load(u)))
    }

    /// Newton direction for J(u) = ½uᵀMu − (1/p)∫|u|^p at the critical scale
    /// of u, returned with that rescaled u.
    fn newton_direction(&self, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let t = (u.dot(&(&self.m * u)) / self.k.lq_power(u, self.p)).powf(1.0 / (self.p - 2.0));
        let u = u * t;
        let grad = &self.m * &u - self.load(&u);
        let w: Vec<f64> = self.k.at_points(&u).iter().map(|x| (self.p - 1.0) * x.abs().powf(self.p - 2.0)).collect();
        let h = &self.m - self.k.mass_with(&w);
        let delta = h.lu().solve(&grad)?;
        delta.iter().all(|x| x.is_finite()).then_some((u, delta))
    }

    /// Backtracking Newton step: the first of the step lengths 1, ½, ¼, …
    /// that lowers the quotient.
    fn newton_step(&self, u: &DVector<f64>, q: f64) -> Option<(DVector<f64>, f64)> {
        let (u, delta) = self.newton_direction(u)?;
        let mut step = 1.0;
        for _ in 0..12 {
            let cand = self.normalize(&u - &delta * step);
            let qc = self.quotient(&cand);
            if qc < q {
                return Some((cand, qc));
            }
            step *= 0.5;
        }
        None
    }
}

/// Normalized inverse iteration u ← M⁻¹(|u|^{p−2}u) with M = K + mass(a+εV),
/// interleaved with Newton steps on the associated functional.  Every
/// accepted step lowers the quotient; Newton steps are kept only when they do.
pub fn minimize_quotient(
    a: &Potential,
    v: &Potential,
    eps: f64,
    stiffness: &StiffnessForm,
    init: &GridFunction,
    opts: &MinimizeOptions,
) -> Result<Minimized> {
    let op = QuotientOperator::new(a, v, eps, stiffness)?;
    let u0 = stiffness.dof_vector(init)?;
    if u0.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroFunction);
    }
    let mut u = op.normalize(u0);
    let mut q = op.quotient(&u);
    let mut history = vec![q];
    let mut newton_steps = 0;
    for iter in 1..=opts.max_iter {
        let mut stalled = true;
        let cand = op.inverse_step(&u);
        let qc = op.quotient(&cand);
        if qc < q {
            stalled = q - qc <= opts.tol * q.abs();
            u = cand;
            q = qc;
            history.push(q);
        }
        if stalled || iter % opts.newton_every == 0 {
            if let Some((cand, qc)) = op.newton_step(&u, q) {
                stalled &= q - qc <= opts.tol * q.abs();
                u = cand;
                q = qc;
                history.push(q);
                newton_steps += 1;
            }
        }
        if stalled {
            return Ok(Minimized {
                u: stiffness.grid_function(&u),
                quotient: q,
                initial_quotient: history[0],
                history,
                iterations: iter,
                newton_steps,
            });
        }
    }
    Err(Error::NonConvergence(format!("quotient iteration did not settle in {} steps", opts.max_iter)))
}

/// PU_{x,λ} = U − E[U] and its parameter derivatives at the grid nodes.
pub struct ProjectedBubble {
    pub pu: DVector<f64>,
    pub d_lambda: DVector<f64>,
    pub d_x: DVector<f64>,
}

/// Interior dof vectors of PU, ∂_λPU and ∂_xPU.  The extension E is linear in
/// the exterior data, so ∂E[U] = E[∂U] and the derivatives are exact.
pub fn projected_bubble_dofs(
    x: f64,
    lambda: f64,
    kernel: &BallKernel,
    grid: &DomainGrid,
    with_derivatives: bool,
) -> Result<ProjectedBubble> {
    let params = kernel.params;
    let b = Bubble::centered_1d(x, lambda)?;
    if kernel.domain.endpoints()? != grid.domain.endpoints()? {
        return Err(Error::GridMismatch("kernel and grid live on different domains".into()));
    }
    if !grid.domain.contains(&[x]) {
        return Err(Error::Domain(format!("bubble centre {x} outside the domain")));
    }
    let m = grid.len() - 2;
    let mut pu = DVector::zeros(m);
    let mut dl = DVector::zeros(m);
    let mut dx = DVector::zeros(m);
    let tol = 1e-13;
    for i in grid.interior() {
        let y = grid.nodes[i];
        pu[i - 1] = b.at(y, &params) - kernel.poisson_extension_1d(y, |z| b.at(z, &params), tol)?;
        if with_derivatives {
            dl[i - 1] = b.d_lambda_at(y, &params) - kernel.poisson_extension_1d(y, |z| b.d_lambda_at(z, &params), tol)?;
            dx[i - 1] = b.d_x_at(y, &params) - kernel.poisson_extension_1d(y, |z| b.d_x_at(z, &params), tol)?;
        }
    }
    Ok(ProjectedBubble { pu, d_lambda: dl, d_x: dx })
}

/// u ≈ α·PU_{x,λ}, the remainder w = u/α − PU measured in the stiffness norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupFit {
    pub alpha: f64,
    pub x: f64,
    pub lambda: f64,
    /// Relative L^p distance ‖u − αPU‖_p / ‖u‖_p, capped at 1.
    pub residual: f64,
    /// ‖(−Δ)^{s/2} w‖.
    pub w_norm: f64,
    pub iterations: usize,
}

/// Peak-to-second-peak ratio above which a function counts as single-peaked.
pub const PEAK_RATIO: f64 = 2.0;

/// Largest local maximum of |u| over the next largest (∞ for one peak).
pub fn peak_ratio(u: &GridFunction) -> f64 {
    let v: Vec<f64> = u.values.iter().map(|x| x.abs()).collect();
    let mut peaks: Vec<f64> = (1..v.len() - 1).filter(|&i| v[i] >= v[i - 1] && v[i] > v[i + 1]).map(|i| v[i]).collect();
    peaks.sort_by(|a, b| b.total_cmp(a));
    match peaks.as_slice() {
        [] | [_] => f64::INFINITY,
        [a, b, ..] => a / b,
    }
}

/// Levenberg–Marquardt fit of u by α·PU_{x,λ} in the stiffness norm.
pub fn extract_blowup(u: &GridFunction, kernel: &BallKernel, stiffness: &StiffnessForm) -> Result<BlowupFit> {
    let params = kernel.params;
    let ratio = peak_ratio(u);
    if ratio <= PEAK_RATIO {
        return Err(Error::MultiPeak(ratio));
    }
    let uv = stiffness.dof_vector(u)?;
    let k = &stiffness.matrix;
    let norm_u = uv.dot(&(k * &uv)).sqrt();
    if norm_u == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let imax = u.argmax_abs();
    let peak = u.values[imax];
    let grid = &*stiffness.grid;
    let (lo, hi) = grid.domain.endpoints()?;
    let mut x = grid.nodes[imax];
    let misfit = |alpha: f64, x: f64, lambda: f64| -> Result<(DVector<f64>, ProjectedBubble)> {
        let pb = projected_bubble_dofs(x, lambda, kernel, grid, true)?;
        Ok((&uv - &pb.pu * alpha, pb))
    };
    let knorm = |r: &DVector<f64>| r.dot(&(k * r)).sqrt();
    // start from the peak height with α = ±1, or from the half-width when
    // that fits better (|α| far from 1)
    let mut starts = vec![(peak.signum(), peak.abs().powf(1.0 / params.beta()))];
    if let Some(l) = half_width_lambda(u, imax, params.beta()) {
        starts.push((peak / l.powf(params.beta()), l));
    }
    let mut best: Option<(f64, f64, DVector<f64>, ProjectedBubble, f64)> = None;
    for (a0, l0) in starts {
        let (r0, pb0) = misfit(a0, x, l0)?;
        let c0 = knorm(&r0);
        if best.as_ref().map_or(true, |b| c0 < b.4) {
            best = Some((a0, l0, r0, pb0, c0));
        }
    }
    let (mut alpha, mut lambda, mut r, mut pb, mut cost) = best.expect("at least one start");
    let mut mu = 1e-3;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        // Jacobian of α·PU in (α, x, ln λ)
        let jac = DMatrix::from_columns(&[pb.pu.clone(), &pb.d_x * alpha, &pb.d_lambda * (alpha * lambda)]);
        let kj = k * &jac;
        let gram = jac.transpose() * &kj;
        let rhs = kj.transpose() * &r;
        let mut damped = gram.clone();
        for i in 0..3 {
            damped[(i, i)] *= 1.0 + mu;
        }
        let Some(step) = damped.lu().solve(&rhs) else {
            return Err(Error::FitDivergence("singular normal equations".into()));
        };
        let (na, nx, nl) = (alpha + step[0], x + step[1], lambda * step[2].clamp(-2.0, 2.0).exp());
        if !(nx > lo && nx < hi) || !nl.is_finite() {
            mu *= 10.0;
            if mu > 1e12 {
                return Err(Error::FitDivergence(format!("left the domain at x = {nx}")));
            }
            continue;
        }
        let (nr, npb) = misfit(na, nx, nl)?;
        let ncost = knorm(&nr);
        if ncost < cost {
            let small = step[0].abs() < 1e-13 * na.abs() && step[1].abs() * nl < 1e-12 && step[2].abs() < 1e-12;
            let done = small || (cost - ncost) <= 1e-15 * norm_u;
            (alpha, x, lambda, r, pb, cost) = (na, nx, nl, nr, npb, ncost);
            mu = (mu * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    if !(alpha.is_finite() && lambda.is_finite()) || lambda * grid.domain.boundary_distance(&[x]) < 1.0 {
        return Err(Error::FitDivergence(format!("λ = {lambda} at x = {x} is not a concentrated bubble")));
    }
    let p = params.p();
    let residual = (stiffness.lq_power(&r, p) / stiffness.lq_power(&uv, p)).powf(1.0 / p).min(1.0);
    Ok(BlowupFit { alpha, x, lambda, residual, w_norm: cost / alpha.abs(), iterations })
}

/// λ from the half-maximum width of |u| around node `imax`, using
/// (1 + λ²r²)^{−β} = 1/2.
fn half_width_lambda(u: &GridFunction, imax: usize, beta: f64) -> Option<f64> {
    let v = &u.values;
    let nodes = &u.grid.nodes;
    let half = 0.5 * v[imax].abs();
    let side = |dir: isize| -> Option<f64> {
        let mut i = imax as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= v.len() {
                return None;
            }
            let (vi, vj) = (v[i as usize].abs(), v[j as usize].abs());
            if vj <= half {
                let t = (vi - half) / (vi - vj);
                let (xi, xj) = (nodes[i as usize], nodes[j as usize]);
                return Some((xi + t * (xj - xi) - nodes[imax]).abs());
            }
            i = j;
        }
    };
    let r = match (side(-1), side(1)) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return None,
    };
    (r > 0.0).then(|| (2f64.powf(1.0 / beta) - 1.0).sqrt() / r)
}

/// T_{x,λ} = span{PU, ∂_λPU, ∂_xPU} with its stiffness Gram matrix.
#[derive(Debug, Clone)]
pub struct TangentSpace {
    pub x: f64,
    pub lambda: f64,
    /// Interior dof vectors, columns PU, ∂_λPU, ∂_xPU.
    pub basis: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

/// Gram matrices with a larger normalized condition number count as singular.
pub const MAX_GRAM_COND: f64 = 1e10;

impl TangentSpace {
    pub fn new(x: f64, lambda: f64, kernel: &BallKernel, stiffness: &StiffnessForm) -> Result<Self> {
        let pb = projected_bubble_dofs(x, lambda, kernel, &stiffness.grid, true)?;
        let basis = DMatrix::from_columns(&[pb.pu, pb.d_lambda, pb.d_x]);
        let gram = basis.transpose() * &stiffness.matrix * &basis;
        let t = Self { x, lambda, basis, gram };
        if !(t.normalized_condition() <= MAX_GRAM_COND) {
            return Err(Error::GramSingular);
        }
        Ok(t)
    }

    /// Condition number of the Gram matrix after unit-diagonal scaling.
    pub fn normalized_condition(&self) -> f64 {
        let d: Vec<f64> = (0..3).map(|i| self.gram[(i, i)].sqrt()).collect();
        if d.iter().any(|&v| !(v > 0.0)) {
            return f64::INFINITY;
        }
        let g = DMatrix::from_fn(3, 3, |i, j| self.gram[(i, j)] / (d[i] * d[j]));
        let e = SymmetricEigen::new(g).eigenvalues;
        let (mx, mn) = e.iter().fold((f64::MIN, f64::MAX), |(a, b), &v| (a.max(v), b.min(v)));
        if mn <= 0.0 {
            f64::INFINITY
        } else {
            mx / mn
        }
    }
}

/// Smallest eigenvalue of (K − c(p−1)mass(U^{p−2}) [+ mass(a)]) against K on
/// the K-orthogonal complement of the first `deflate` tangent vectors.
pub fn deflated_min_eigenvalue(
    tangent: &TangentSpace,
    a: Option<&Potential>,
    stiffness: &StiffnessForm,
    deflate: usize,
) -> Result<f64> {
    let params = stiffness.params;
    let consts = Constants::new(&params)?;
    let b = Bubble::centered_1d(tangent.x, tangent.lambda)?;
    let p = params.p();
    let mut q: Vec<f64> = stiffness
        .quadrature_points()
        .iter()
        .map(|pt| -consts.c * (p - 1.0) * b.at(pt.0, &params).powf(p - 2.0))
        .collect();
    if let Some(a) = a {
        for (qv, pt) in q.iter_mut().zip(stiffness.quadrature_points()) {
            *qv += a.eval(pt.0);
        }
    }
    let k = &stiffness.matrix;
    let form = k + stiffness.mass_with(&q);
    let deflate = deflate.min(3);
    if deflate == 0 {
        return linalg::smallest_gen_eigenvalue(&form, k);
    }
    // orthonormal basis of {v : Bᵀ K v = 0}
    let constraints = (k * tangent.basis.columns(0, deflate)).transpose();
    let m = k.nrows();
    let svd = constraints.clone().svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::EigenFailure("SVD of the constraints".into()))?;
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(smin > smax / MAX_GRAM_COND) {
        return Err(Error::GramSingular);
    }
    // the complement is the unit eigenspace of I − VᵀV
    let proj = DMatrix::identity(m, m) - vt.transpose() * &vt;
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<DVector<f64>> =
        (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.len() != m - deflate {
        return Err(Error::GramSingular);
    }
    let z = DMatrix::from_columns(&cols);
    let fz = z.transpose() * &form * &z;
    let kz = z.transpose() * k * &z;
    linalg::smallest_gen_eigenvalue(&((&fz + fz.transpose()) * 0.5), &((&kz + kz.transpose()) * 0.5))
}

/// Tangent-space coercivity gap at (x, λ); compare with 4s/(N+2s+2).
pub fn coercivity_gap(
    x: f64,
    lambda: f64,
    a: Option<&Potential>,
    kernel: &BallKernel,
    stiffness: &StiffnessForm,
) -> Result<f64> {
    let t = TangentSpace::new(x, lambda, kernel, stiffness)?;
    deflated_min_eigenvalue(&t, a, stiffness, 3)
}

/// 4s/(N+2s+2).
pub fn coercivity_target(params: &Params) -> f64 {
    4.0 * params.s / (params.nf() + 2.0 * params.s + 2.0)
}

/// One ε of a scaling study.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRecord {
    pub eps: f64,
    pub quotient: f64,
    pub gap: f64,
    pub alpha: f64,
    pub x: f64,
    pub lambda: f64,
    pub w_norm: f64,
    pub fit_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub records: Vec<ScalingRecord>,
    /// Fitted slope of ln λ_ε against ln ε; target −1/(4s−N).
    pub lambda_slope: f64,
    /// Fitted slope of ln(S − S_ε) against ln ε; target 2s/(4s−N).
    pub gap_slope: f64,
    /// Fitted slope of ln ‖w‖ against ln λ_ε; target −(N−2s)/2.
    pub w_slope: f64,
    /// Concentration point at the smallest ε.
    pub x_limit: f64,
    /// Arg-sup over N_a(V) on the analysis grid.
    pub argsup: GapArgSup,
    pub argsup_x: f64,
    /// Larger of the two analysis-grid cells at the arg-sup node.
    pub argsup_cell: f64,
    /// λ_ε ε^{1/(4s−N)} over its closed-form limit, at the smallest ε.
    pub lambda_prefactor_ratio: f64,
    pub lambda_limit: f64,
    /// Nodes of the minimization grid.
    pub fine_nodes: usize,
    /// Shift added on the minimization grid to keep a critical there.
    pub fine_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingOptions {
    pub minimize: MinimizeOptions,
    /// Tolerance on |φ_a| defining N_a.
    pub zero_tol: f64,
    /// Mesh size at the arg-sup node of the minimization grid.
    pub h_focus: f64,
    /// Mesh growth away from it.
    pub growth: f64,
    pub h_max: f64,
    pub h_boundary: f64,
    /// Re-impose criticality on the minimization grid, where the finer mesh
    /// moves inf φ_a by a discretization-sized amount.
    pub reshift: bool,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self { minimize: MinimizeOptions::default(), zero_tol: 1e-4, h_focus: 1e-9, growth: 0.05, h_max: 0.03, h_boundary: 1e-3, reshift: true }
    }
}

/// Scaling study in two stages.  The arg-sup of the concentration functional
/// over N_a(V) is located on the potentials' own (analysis) grid.  Then, for
/// every ε, the quotient is minimized on a mesh graded toward that point,
/// starting from PU with λ from the optimal-λ algebra, and the bubble is
/// extracted.  Finally λ_ε, the energy gap and ‖w‖ are regressed.
pub fn scaling_study(a: &Potential, v: &Potential, eps_ladder: &[f64], params: &Params, opts: &ScalingOptions) -> Result<ScalingReport> {
    if !params.refined_regime() {
        return Err(Error::Regime(format!("scaling study needs 8s/3 < N < 4s, got N = {}, s = {}", params.n, params.s)));
    }
    if eps_ladder.len() < 4 {
        return Err(Error::InvalidParams("the ε ladder needs at least 4 points".into()));
    }
    let consts = Constants::new(params)?;
    let coarse = a.grid().clone();
    let g0 = GreenTable::ball(coarse.clone(), params)?;
    let op = GreenOperator::new(&g0)?;
    let sol = op.solve(a)?;
    let sets = sol.zero_sets(v, opts.zero_tol)?;
    let argsup = gap_argsup(&sets, a, params)?.ok_or_else(|| Error::EmptySet("N_a(V) is empty".into()))?;
    let node = argsup.node;
    let qv = sets.q_v[sets.n_a.iter().position(|&n| n == node).expect("arg-sup lies in N_a")];
    let ax = a.at_node(node);
    let pref = consts.quotient_prefactor();
    let a_eps = -pref * consts.alpha_cdb()? * ax;
    let b_eps = -pref * qv;
    let e = 4.0 * params.s - params.nf();
    let lambda_limit =
        (2.0 * params.s * consts.alpha_cdb()? * ax.abs() / ((params.nf() - 2.0 * params.s) * qv.abs())).powf(1.0 / e);
    let x0 = coarse.nodes[node];

    let grading =
        Grading { h_max: opts.h_max, h_boundary: opts.h_boundary, foci: vec![(x0, opts.h_focus)], growth: opts.growth };
    let fine = Arc::new(DomainGrid::graded(coarse.domain.clone(), &grading)?);
    let stiffness = crate::stiffness::assemble_stiffness(fine.clone(), params)?;
    let (mut af, vf) = (a.transfer(fine.clone()), v.transfer(fine.clone()));
    let mut fine_shift = 0.0;
    if opts.reshift {
        let g_fine = GreenTable::ball(fine.clone(), params)?;
        fine_shift = GreenOperator::new(&g_fine)?.critical_shift(&af, 1e-4 * opts.zero_tol)?;
        af = af.shifted(fine_shift);
    }
    let kernel = &g0.kernel;
    let mut records = Vec::with_capacity(eps_ladder.len());
    for &eps in eps_ladder {
        let guess = optimal_lambda(a_eps, b_eps, eps, params)?.lambda0;
        let init = stiffness.grid_function(&projected_bubble_dofs(x0, guess, kernel, &fine, false)?.pu);
        let min = minimize_quotient(&af, &vf, eps, &stiffness, &init, &opts.minimize)?;
        let fit = extract_blowup(&min.u, kernel, &stiffness)?;
        records.push(ScalingRecord {
            eps,
            quotient: min.quotient,
            gap: consts.s_sob - min.quotient,
            alpha: fit.alpha,
            x: fit.x,
            lambda: fit.lambda,
            w_norm: fit.w_norm,
            fit_residual: fit.residual,
            iterations: min.iterations,
        });
    }
    if records.iter().any(|r| r.gap <= 0.0) {
        return Err(Error::Regime("a minimizer did not go below S; the gap cannot be regressed".into()));
    }
    let le: Vec<f64> = records.iter().map(|r| r.eps.ln()).collect();
    let ll: Vec<f64> = records.iter().map(|r| r.lambda.ln()).collect();
    let lg: Vec<f64> = records.iter().map(|r| r.gap.ln()).collect();
    let lw: Vec<f64> = records.iter().map(|r| r.w_norm.ln()).collect();
    let last = records.iter().min_by(|p, q| p.eps.total_cmp(&q.eps)).expect("non-empty ladder");
    let nodes = &coarse.nodes;
    Ok(ScalingReport {
        lambda_slope: fit::ols_slope(&le, &ll),
        gap_slope: fit::ols_slope(&le, &lg),
        w_slope: fit::ols_slope(&ll, &lw),
        x_limit: last.x,
        argsup,
        argsup_x: x0,
        argsup_cell: (nodes[node + 1] - nodes[node]).max(nodes[node] - nodes[node - 1]),
        lambda_prefactor_ratio: last.lambda * last.eps.powf(1.0 / e) / lambda_limit,
        lambda_limit,
        fine_nodes: fine.len(),
        fine_shift,
        records,
    })
}
