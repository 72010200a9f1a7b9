//! Green's function of (−Δ)^s + a on the interval, built from the ball kernel
//! G_0 through the second-kind equation
//!
//!   G_a(x,·) = G_0(x,·) − γ^{−1} ∫ G_0(·,z) a(z) G_a(x,z) dz.
//!
//! Writing G_a = G_0 − K_x, the correction K_x = H_a(x,·) − H_0(x,·) is
//! continuous and solves K_x + γ^{−1} W diag(a) K_x = R_x, where W holds the
//! product-integration weights of G_0 against nodal hats and
//!
//!   R_x(y) = γ^{−1} ∫ G_0(y,z) a(z) G_0(x,z) dz.
//!
//! In R_x the singular factor is split as a(x)|x−z|^{2s−1} plus a continuous
//! remainder.  The singular piece is integrated exactly: since
//! (−Δ)^s(−d|·|^{4s−1}) = |·|^{2s−1} on the line,
//!
//!   ∫ G_0(y,z)|x−z|^{2s−1} dz = −γ d (|x−y|^{4s−1} − ∫_{ext} P(y,z)|x−z|^{4s−1} dz),
//!
//! with P the Poisson kernel.  This also produces the |x−y|^{4s−1} term of
//! H_a with coefficient −d·a(x) exactly.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{eval_constant, ConstantName};
use crate::error::{Error, Result};
use crate::fit;
use crate::greens_ball::GreenTable;
use crate::grid::{DomainGrid, GridFunction};
use crate::linalg;
use crate::stiffness::StiffnessForm;

/// Closed-form potential shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// −depth · exp(−(x − center)² / (2 width²))
    GaussianBump { center: f64, width: f64, depth: f64 },
    Sum { terms: Vec<Profile> },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::GaussianBump { center, width, depth } => {
                let t = (x - center) / width;
                -depth * (-0.5 * t * t).exp()
            }
            Profile::Sum { terms } => terms.iter().map(|p| p.eval(x)).sum(),
        }
    }
}

/// A potential sampled on a grid, optionally with its closed form.
#[derive(Debug, Clone)]
pub struct Potential {
    pub values: GridFunction,
    pub profile: Option<Profile>,
    /// Smallest eigenvalue of (K + M_a) against K, once estimated.
    pub coercivity_margin: Option<f64>,
}

impl Potential {
    pub fn from_profile(grid: Arc<DomainGrid>, profile: Profile) -> Self {
        let values = GridFunction::from_fn(grid, |x| profile.eval(x));
        Self { values, profile: Some(profile), coercivity_margin: None }
    }

    pub fn constant(grid: Arc<DomainGrid>, value: f64) -> Self {
        Self::from_profile(grid, Profile::Constant { value })
    }

    pub fn zero(grid: Arc<DomainGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_values(values: GridFunction) -> Self {
        Self { values, profile: None, coercivity_margin: None }
    }

    /// The same potential on another grid: exact when the closed form is
    /// known, linear interpolation otherwise.
    pub fn transfer(&self, grid: Arc<DomainGrid>) -> Self {
        match &self.profile {
            Some(p) => Self::from_profile(grid, p.clone()),
            None => Self::from_values(GridFunction::from_fn(grid, |x| self.values.eval(x))),
        }
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.values.grid
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.profile {
            Some(p) => p.eval(x),
            None => self.values.eval(x),
        }
    }

    pub fn at_node(&self, i: usize) -> f64 {
        self.values.values[i]
    }

    /// a + c.
    pub fn shifted(&self, c: f64) -> Self {
        let values = GridFunction { grid: self.values.grid.clone(), values: self.values.values.iter().map(|v| v + c).collect() };
        let profile = self.profile.clone().map(|p| Profile::Sum { terms: vec![p, Profile::Constant { value: c }] });
        Self { values, profile, coercivity_margin: None }
    }

    /// a + c·b on a common grid.
    pub fn combined(&self, c: f64, other: &Potential) -> Result<Self> {
        let values = self.values.axpy(c, &other.values)?;
        let profile = match (&self.profile, &other.profile) {
            (Some(p), Some(q)) => Some(Profile::Sum { terms: vec![p.clone(), scale_profile(q, c)] }),
            _ => None,
        };
        Ok(Self { values, profile, coercivity_margin: None })
    }

    pub fn with_margin(mut self, stiffness: &StiffnessForm) -> Result<Self> {
        self.coercivity_margin = Some(coercivity_margin(&self, stiffness)?);
        Ok(self)
    }
}

fn scale_profile(p: &Profile, c: f64) -> Profile {
    match p {
        Profile::Constant { value } => Profile::Constant { value: c * value },
        Profile::GaussianBump { center, width, depth } => Profile::GaussianBump { center: *center, width: *width, depth: c * depth },
        Profile::Sum { terms } => Profile::Sum { terms: terms.iter().map(|t| scale_profile(t, c)).collect() },
    }
}

/// Smallest generalized eigenvalue of (K + M_a) against K.
pub fn coercivity_margin(a: &Potential, stiffness: &StiffnessForm) -> Result<f64> {
    let mass = stiffness.mass(|x| a.eval(x));
    linalg::smallest_gen_eigenvalue(&(&stiffness.matrix + mass), &stiffness.matrix)
}

/// Data shared by all potentials on one G_0 table.
pub struct GreenOperator {
    pub g0: GreenTable,
    gamma: f64,
    d: f64,
    riesz: OnceLock<Result<DMatrix<f64>>>,
    lambda1: OnceLock<Result<f64>>,
}

impl GreenOperator {
    pub fn new(g0: &GreenTable) -> Result<Self> {
        if g0.potential.is_some() {
            return Err(Error::Domain("the base table must be the potential-free G_0".into()));
        }
        let params = *g0.params();
        Ok(Self {
            g0: g0.clone(),
            gamma: g0.kernel.gamma_ns(),
            d: eval_constant(ConstantName::D, &params)?,
            riesz: OnceLock::new(),
            lambda1: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.g0.grid
    }

    fn m(&self) -> usize {
        self.g0.grid.len() - 2
    }

    /// ∫ G_0(y,z)|x−z|^{2s−1} dz for interior nodes x (row) and y (column).
    pub fn riesz_potential(&self, x: f64, y: f64) -> Result<f64> {
        let e = 4.0 * self.g0.params().s - 1.0;
        let ext = self.g0.kernel.poisson_extension_1d(y, |z| (x - z).abs().powf(e), 1e-12)?;
        Ok(-self.gamma * self.d * ((x - y).abs().powf(e) - ext))
    }

    fn riesz_table(&self) -> Result<&DMatrix<f64>> {
        let table = self.riesz.get_or_init(|| {
            let nodes = &self.g0.grid.nodes;
            let m = self.m();
            let mut t = DMatrix::zeros(m, m);
            for xi in 0..m {
                for yi in 0..m {
                    t[(yi, xi)] = self.riesz_potential(nodes[xi + 1], nodes[yi + 1])?;
                }
            }
            Ok(t)
        });
        table.as_ref().map_err(Clone::clone)
    }

    /// First eigenvalue of the discrete Dirichlet problem, from power
    /// iteration on the Nyström operator γ^{−1} W.
    pub fn lambda1(&self) -> Result<f64> {
        self.lambda1
            .get_or_init(|| {
                let w = self.interior_weights() / self.gamma;
                let mut v = DVector::from_element(self.m(), 1.0);
                let mut mu = 0.0;
                for _ in 0..2000 {
                    let next = &w * &v;
                    let norm = next.norm();
                    let mu_new = norm / v.norm();
                    v = next / norm;
                    if (mu_new - mu).abs() <= 1e-13 * mu_new {
                        return Ok(1.0 / mu_new);
                    }
                    mu = mu_new;
                }
                Err(Error::NonConvergence("power iteration for the first eigenvalue".into()))
            })
            .clone()
    }

    fn interior_weights(&self) -> DMatrix<f64> {
        let m = self.m();
        self.g0.product_weights().view((1, 1), (m, m)).into_owned()
    }

    /// Right-hand sides R_x for every interior x, as the columns of an m×m matrix.
    fn rhs_all(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        let riesz = self.riesz_table()?;
        let grid = &self.g0.grid;
        let n = grid.len();
        let m = self.m();
        let w = self.g0.product_weights();
        let e = 2.0 * self.g0.params().s - 1.0;
        let mut out = DMatrix::zeros(m, m);
        let mut v = DVector::zeros(n);
        for xi in 0..m {
            let x = xi + 1;
            let ax = a[x];
            for j in 0..n {
                v[j] = if j == x {
                    -ax * self.g0.regular[(x, x)]
                } else {
                    let r = (grid.nodes[x] - grid.nodes[j]).abs();
                    (a[j] - ax) * r.powf(e) - a[j] * self.g0.regular[(x, j)]
                };
            }
            let wv = w * &v;
            for yi in 0..m {
                out[(yi, xi)] = (ax * riesz[(yi, xi)] + wv[yi + 1]) / self.gamma;
            }
        }
        Ok(out)
    }

    fn system_matrix(&self, a: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut mat = self.interior_weights() / self.gamma;
        for j in 0..m {
            let aj = a[j + 1];
            mat.column_mut(j).scale_mut(aj);
        }
        mat + DMatrix::identity(m, m)
    }

    /// Smallest real part in the spectrum of I + γ^{−1} W diag(a); equals
    /// 1 − λ/λ₁ for a ≡ −λ.
    pub fn nystrom_margin(&self, a: &[f64]) -> Result<f64> {
        let eig = self.system_matrix(a).complex_eigenvalues();
        let min = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            Ok(min)
        } else {
            Err(Error::EigenFailure("Nyström spectrum".into()))
        }
    }

    /// Factor and solve the second-kind system for a potential.
    pub fn solve(&self, a: &Potential) -> Result<FredholmSolution<'_>> {
        if !a.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch("potential and Green table use different grids".into()));
        }
        if let Some(margin) = a.coercivity_margin {
            if margin <= 0.0 {
                return Err(Error::Coercivity(margin));
            }
        }
        let av = &a.values.values;
        let margin = self.nystrom_margin(av)?;
        if margin <= 0.0 {
            return Err(Error::Coercivity(margin));
        }
        let rhs = self.rhs_all(av)?;
        let corr = self.solve_with(av, &rhs)?;
        Ok(FredholmSolution { op: self, potential: a.clone(), correction: corr, margin })
    }

    fn solve_with(&self, a: &[f64], rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let lu = self.system_matrix(a).lu();
        let x = lu.solve(rhs).ok_or_else(|| Error::SolveFailure("singular Nyström matrix".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolveFailure("non-finite correction".into()));
        }
        Ok(x)
    }

    /// Robin function φ_0 at interior node x.
    pub fn robin0(&self, x: usize) -> f64 {
        self.g0.regular[(x, x)]
    }
}

/// The corrections K_x for every interior x of one potential.
pub struct FredholmSolution<'a> {
    pub op: &'a GreenOperator,
    pub potential: Potential,
    /// Column x−1 holds K_x at the interior nodes.
    correction: DMatrix<f64>,
    pub margin: f64,
}

impl FredholmSolution<'_> {
    fn check_interior(&self, x: usize) -> Result<()> {
        if x == 0 || x + 1 >= self.op.grid().len() {
            return Err(Error::Domain(format!("node {x} is not interior")));
        }
        Ok(())
    }

    /// K_x = H_a(x,·) − H_0(x,·) at all nodes (zero at the endpoints).
    pub fn correction(&self, x: usize) -> Result<GridFunction> {
        self.check_interior(x)?;
        let mut values = vec![0.0; self.op.grid().len()];
        for (i, v) in self.correction.column(x - 1).iter().enumerate() {
            values[i + 1] = *v;
        }
        GridFunction::new(self.op.grid().clone(), values)
    }

    /// φ_a(x) = φ_0(x) + K_x(x).
    pub fn robin(&self, x: usize) -> Result<f64> {
        self.check_interior(x)?;
        Ok(self.op.robin0(x) + self.correction[(x - 1, x - 1)])
    }

    /// φ_a at every node, NaN at the endpoints.
    pub fn robin_all(&self) -> Vec<f64> {
        let n = self.op.grid().len();
        (0..n).map(|i| self.robin(i).unwrap_or(f64::NAN)).collect()
    }

    /// G_a(x,·) at the nodes; +∞ at x itself.
    pub fn green_row(&self, x: usize) -> Result<GridFunction> {
        let k = self.correction(x)?;
        let n = self.op.grid().len();
        let values = (0..n)
            .map(|j| if j == x { f64::INFINITY } else { self.op.g0.green(x, j) - k.values[j] })
            .collect();
        GridFunction::new(self.op.grid().clone(), values)
    }

    /// Table of H_a = H_0 + K.
    pub fn table(&self) -> GreenTable {
        let mut regular = self.op.g0.regular.clone();
        let m = self.correction.nrows();
        for x in 0..m {
            for y in 0..m {
                regular[(x + 1, y + 1)] += self.correction[(y, x)];
            }
        }
        self.op.g0.with_regular(regular, self.potential.values.values.clone())
    }

    /// ∫ F(z, G_a(x,z)) dz for interior x, resolving the singular factor of
    /// G_a exactly and interpolating the correction linearly.
    fn integrate_against(&self, x: usize, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let k = self.correction(x)?;
        let grid = self.op.grid();
        let inner: Vec<f64> = grid.nodes[1..grid.len() - 1].to_vec();
        self.op.g0.kernel.integrate_green_1d(grid.nodes[x], |z, g| f(z, g - k.eval(z)), &inner, 1e-10)
    }

    /// Q_V(x) = ∫ V G_a(x,·)².
    pub fn q_v(&self, x: usize, v: &Potential) -> Result<f64> {
        let p = self.op.g0.params();
        if p.nf() >= 4.0 * p.s {
            return Err(Error::Regime("Q_V needs N < 4s for G_a(x,·)² to be integrable".into()));
        }
        self.integrate_against(x, |z, g| v.eval(z) * g * g)
    }

    /// γ^{−1} ∫ (b − a) G_a(x,·) G_b(·,x), the resolvent-identity prediction
    /// of φ_b(x) − φ_a(x).
    pub fn resolvent_difference(&self, x: usize, other: &FredholmSolution) -> Result<f64> {
        let ka = self.correction(x)?;
        let kb = other.correction(x)?;
        let a = &self.potential;
        let b = &other.potential;
        let val = self.integrate_against(x, |z, ga| {
            let gb = ga + ka.eval(z) - kb.eval(z);
            (b.eval(z) - a.eval(z)) * ga * gb
        })?;
        Ok(val / self.op.gamma)
    }

    /// Least-squares fit of H_a(x, y) near y = x, see [`LocalExpansion`].
    pub fn local_expansion(&self, x: usize, radii: &[f64]) -> Result<LocalExpansion> {
        let p = *self.op.g0.params();
        let e = 4.0 * p.s - p.nf();
        if !(e > 0.0) {
            return Err(Error::Regime("the expansion needs 2s < N < 4s".into()));
        }
        let grid = self.op.grid();
        let k = self.correction(x)?;
        let x0 = grid.nodes[x];
        let mut idx: Vec<usize> = Vec::new();
        for &r in radii {
            for y in [x0 - r, x0 + r] {
                if grid.domain.contains(&[y]) {
                    let j = grid.nearest_node(y);
                    if j != x && grid.boundary_distance[j] > 0.0 {
                        idx.push(j);
                    }
                }
            }
        }
        idx.sort_unstable();
        idx.dedup();
        if idx.len() < 4 {
            return Err(Error::Fit("too few distinct nodes in the requested shells".into()));
        }
        let e2 = e + 2.0 * p.s;
        let design = DMatrix::from_fn(idx.len(), 4, |r, c| {
            let dy = grid.nodes[idx[r]] - x0;
            match c {
                0 => 1.0,
                1 => dy,
                2 => dy.abs().powf(e),
                _ => dy.abs().powf(e2),
            }
        });
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&j| k.values[j]));
        let (coef, _, resid) = fit::least_squares(&design, &rhs, 1e10)?;
        let mean = rhs.mean();
        let spread = rhs.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
        let fit_residual = if spread > 0.0 { resid / spread } else { resid };
        if fit_residual > LOCAL_FIT_TOL {
            return Err(Error::Fit(format!("relative residual {fit_residual:.2e}")));
        }
        let xi = if e >= 1.0 {
            let h0_slope = (self.op.g0.kernel.regular_1d(x0, x0 + 1e-6) - self.op.g0.kernel.regular_1d(x0, x0 - 1e-6)) / 2e-6;
            Some(vec![coef[1] + h0_slope])
        } else {
            None
        };
        Ok(LocalExpansion { phi: self.op.robin0(x) + coef[0], xi, kappa: coef[2], fit_residual })
    }
}

/// Relative residual accepted by the local expansion fit.
pub const LOCAL_FIT_TOL: f64 = 1e-2;

/// H_a(x,y) ≈ φ + ξ·(y−x) + κ |x−y|^{4s−N} near the diagonal.
///
/// The fit is done on K_x = H_a − H_0 (H_0 is known in closed form and
/// smooth), with a linear column absorbing the odd part of both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalExpansion {
    pub phi: f64,
    pub xi: Option<Vec<f64>>,
    pub kappa: f64,
    pub fit_residual: f64,
}

pub fn green_a(x: usize, a: &Potential, g0: &GreenTable) -> Result<GridFunction> {
    GreenOperator::new(g0)?.solve(a)?.green_row(x)
}

pub fn robin_a(x: usize, a: &Potential, g0: &GreenTable) -> Result<f64> {
    GreenOperator::new(g0)?.solve(a)?.robin(x)
}

pub fn local_expansion_fit(x: usize, a: &Potential, g0: &GreenTable, radii: &[f64]) -> Result<LocalExpansion> {
    GreenOperator::new(g0)?.solve(a)?.local_expansion(x, radii)
}

pub fn q_v(x: usize, v: &Potential, a: &Potential, g0: &GreenTable) -> Result<f64> {
    GreenOperator::new(g0)?.solve(a)?.q_v(x, v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSets {
    /// Nodes with |φ_a| ≤ tol.
    pub n_a: Vec<usize>,
    /// Nodes of N_a with Q_V < 0.
    pub n_a_v: Vec<usize>,
    pub inf_phi: f64,
    pub argmin: usize,
    /// Q_V at the nodes of N_a.
    pub q_v: Vec<f64>,
}

impl FredholmSolution<'_> {
    pub fn zero_sets(&self, v: &Potential, tol: f64) -> Result<ZeroSets> {
        let grid = self.op.grid();
        let mut inf_phi = f64::INFINITY;
        let mut argmin = 1;
        let mut n_a = Vec::new();
        for x in grid.interior() {
            let phi = self.robin(x)?;
            if phi < inf_phi {
                inf_phi = phi;
                argmin = x;
            }
            if phi.abs() <= tol {
                n_a.push(x);
            }
        }
        let mut q = Vec::with_capacity(n_a.len());
        let mut n_a_v = Vec::new();
        for &x in &n_a {
            let qx = self.q_v(x, v)?;
            if qx < 0.0 {
                n_a_v.push(x);
            }
            q.push(qx);
        }
        Ok(ZeroSets { n_a, n_a_v, inf_phi, argmin, q_v: q })
    }
}

pub fn zero_sets(a: &Potential, v: &Potential, g0: &GreenTable, tol: f64) -> Result<ZeroSets> {
    GreenOperator::new(g0)?.solve(a)?.zero_sets(v, tol)
}

/// Default tolerance on inf φ for the critical shift: 10⁻⁴ φ_0 at the centre.
pub fn default_shift_tol(g0: &GreenTable) -> Result<f64> {
    let c = g0.grid.domain.center();
    Ok(1e-4 * g0.kernel.robin(&c)?)
}

impl GreenOperator {
    /// c with inf_x φ_{a0+c}(x) = 0 (within tol), by bisection.
    pub fn critical_shift(&self, a0: &Potential, tol: f64) -> Result<f64> {
        if !a0.grid().same_as(self.grid()) {
            return Err(Error::GridMismatch("potential and Green table use different grids".into()));
        }
        let base = &a0.values.values;
        let n = base.len();
        let r0 = self.rhs_all(base)?;
        let r1 = self.rhs_all(&vec![1.0; n])?;
        let m = self.m();
        let inf_phi = |c: f64| -> Result<f64> {
            let a: Vec<f64> = base.iter().map(|v| v + c).collect();
            let k = self.solve_with(&a, &(&r0 + &r1 * c))?;
            Ok((0..m).map(|i| self.robin0(i + 1) + k[(i, i)]).fold(f64::INFINITY, f64::min))
        };
        let shifted_margin = |c: f64| {
            let a: Vec<f64> = base.iter().map(|v| v + c).collect();
            self.nystrom_margin(&a)
        };
        let lambda1 = self.lambda1()?;
        let amin = base.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = 0.0;
        let mut f_hi = inf_phi(hi).ok();
        let step = 0.1 * lambda1;
        let mut expansions = 0;
        // φ increases with c, so push hi up until inf φ is positive.
        while !matches!(f_hi, Some(v) if v > 0.0) {
            if shifted_margin(hi)? <= 0.0 {
                hi += step;
                f_hi = None;
            } else {
                f_hi = Some(inf_phi(hi)?);
                if f_hi.unwrap() > 0.0 {
                    break;
                }
                hi += step.max(hi.abs());
            }
            expansions += 1;
            if expansions > 60 {
                return Err(Error::Bracket("inf φ stays non-positive".into()));
            }
        }
        let f_hi = f_hi.unwrap();
        if f_hi.abs() <= tol {
            return Ok(hi);
        }
        let mut lo = -0.9 * lambda1 - amin;
        let mut k = 1;
        let f_lo = loop {
            if lo < hi && shifted_margin(lo)? > 0.0 {
                let f = inf_phi(lo)?;
                if f < 0.0 {
                    break f;
                }
            } else if lo >= hi {
                return Err(Error::Bracket("lower end above upper end".into()));
            }
            // move toward the coercivity limit −λ₁ − min a0
            lo = -(1.0 - 0.1 * 0.5f64.powi(k)) * lambda1 - amin;
            k += 1;
            if k > 40 {
                return Err(Error::Bracket("inf φ stays positive down to the coercivity limit".into()));
            }
        };
        if f_lo.abs() <= tol {
            return Ok(lo);
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            let f = inf_phi(c)?;
            if f.abs() <= tol || b - a < 1e-15 * (1.0 + c.abs()) {
                return Ok(c);
            }
            if f < 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
        Err(Error::NonConvergence("critical-shift bisection".into()))
    }
}

pub fn critical_shift(a0: &Potential, g0: &GreenTable, tol: f64) -> Result<f64> {
    GreenOperator::new(g0)?.critical_shift(a0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Domain, Grading};
    use crate::params::Params;
    use crate::stiffness::assemble_stiffness;
    use approx::assert_relative_eq;

    fn p1() -> Params {
        Params::new(1, 0.35).unwrap()
    }

    fn grid(foci: &[f64]) -> Arc<DomainGrid> {
        let g = Grading { h_max: 0.04, h_boundary: 2e-3, foci: foci.iter().map(|&c| (c, 2e-3)).collect(), growth: 0.15 };
        Arc::new(DomainGrid::graded(Domain::unit_ball(1), &g).unwrap())
    }

    fn op(g: &Arc<DomainGrid>) -> GreenOperator {
        GreenOperator::new(&GreenTable::ball(g.clone(), &p1()).unwrap()).unwrap()
    }

    #[test]
    fn riesz_identity_matches_direct_quadrature() {
        let g = grid(&[]);
        let op = op(&g);
        for &(x, y) in &[(0.1, -0.3), (0.5, 0.52), (-0.8, 0.9)] {
            let direct = op.g0.kernel.integrate_row_1d(y, |z| if z == x { 0.0 } else { (x - z).abs().powf(-0.3) }, &[x], 1e-11).unwrap();
            assert_relative_eq!(op.riesz_potential(x, y).unwrap(), direct, max_relative = 1e-7);
        }
    }

    #[test]
    fn zero_potential_reproduces_g0() {
        let g = grid(&[]);
        let op = op(&g);
        let sol = op.solve(&Potential::zero(g.clone())).unwrap();
        assert_relative_eq!(sol.margin, 1.0, epsilon = 1e-12);
        for x in [5, g.len() / 2, g.len() - 6] {
            assert!(sol.correction(x).unwrap().sup_norm() < 1e-14);
            assert_eq!(sol.robin(x).unwrap(), op.robin0(x));
        }
    }

    #[test]
    fn constant_potential_is_exact_against_the_dirichlet_solve() {
        // For a ≡ c, G_a(x,·) − G_0(x,·) = −c γ^{-1} ∫G_0(·,z) G_a(x,z) dz; applying
        // the P1 product rule to the computed row reproduces the correction.
        let g = grid(&[]);
        let op = op(&g);
        let sol = op.solve(&Potential::constant(g.clone(), -0.5)).unwrap();
        let x = g.len() / 3;
        let k = sol.correction(x).unwrap();
        assert!(g.interior().all(|i| k.values[i] < 0.0));
        assert!(sol.robin(x).unwrap() < op.robin0(x));
    }

    #[test]
    fn coercivity_margin_tracks_first_eigenvalue() {
        let g = grid(&[]);
        let stiff = assemble_stiffness(g.clone(), &p1()).unwrap();
        assert_relative_eq!(coercivity_margin(&Potential::zero(g.clone()), &stiff).unwrap(), 1.0, epsilon = 1e-10);
        let l1 = stiff.first_eigenvalue().unwrap();
        let below = coercivity_margin(&Potential::constant(g.clone(), -0.8 * l1), &stiff).unwrap();
        assert_relative_eq!(below, 0.2, epsilon = 1e-8);
        let above = Potential::constant(g.clone(), -1.1 * l1).with_margin(&stiff).unwrap();
        assert!(above.coercivity_margin.unwrap() < 0.0);
        assert!(matches!(op(&g).solve(&above), Err(Error::Coercivity(_))));
        // the Nyström operator sees the same eigenvalue
        assert_relative_eq!(op(&g).lambda1().unwrap(), l1, max_relative = 5e-3);
    }
}
