//! Closed-form Green's function of the restricted fractional Laplacian on a
//! ball, normalized so that ((−Δ)^s) G(x,·) = γ_{N,s} δ_x and
//! G(x,y) = |x−y|^{2s−N} − H_0(x,y).
//!
//! With a = N/2 − s, Q = (r²−|x|²)(r²−|y|²) and D = r²|x−y|², w = D/(D+Q):
//!
//!   H_0(x,y) = (r²/(D+Q))^a · w^{−a} B_w(a, s) / B(s, a),
//!   G_0(x,y) = |x−y|^{−2a} · B_{1−w}(s, a) / B(s, a).
//!
//! The first form is used for w ≤ 1/2 (near the diagonal, where it has no
//! cancellation and extends to x = y), the second for w > 1/2 (near the
//! boundary, where G_0 is small).

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::constants::{eval_constant, ConstantName};
use crate::error::{Error, Result};
use crate::grid::{Domain, DomainGrid, GridFunction};
use crate::params::Params;
use crate::quad;
use crate::special::{beta_fn, beta_lower_scaled, gamma};

#[derive(Debug, Clone)]
pub struct BallKernel {
    pub params: Params,
    pub domain: Domain,
    a: f64,
    beta_sa: f64,
    gamma_ns: f64,
}

impl BallKernel {
    pub fn new(params: &Params, domain: &Domain) -> Result<Self> {
        if domain.dim() != params.n {
            return Err(Error::Domain(format!("domain dimension {} but N = {}", domain.dim(), params.n)));
        }
        let a = params.nf() / 2.0 - params.s;
        Ok(Self {
            params: *params,
            domain: domain.clone(),
            a,
            beta_sa: beta_fn(params.s, a),
            gamma_ns: eval_constant(ConstantName::Gamma, params)?,
        })
    }

    pub fn gamma_ns(&self) -> f64 {
        self.gamma_ns
    }

    fn r(&self) -> f64 {
        self.domain.radius()
    }

    /// (G, H) from |x−y|, and the boundary distances of x and y (both > 0).
    pub fn parts_from_distances(&self, dist: f64, dx: f64, dy: f64) -> (f64, f64) {
        let r = self.r();
        let r2 = r * r;
        let (qx, qy) = (dx * (2.0 * r - dx), dy * (2.0 * r - dy));
        let q = qx * qy;
        let d = r2 * dist * dist;
        let s = self.params.s;
        if dist == 0.0 {
            return (f64::INFINITY, (r2 / q).powf(self.a) / (self.a * self.beta_sa));
        }
        let sing = dist.powf(-2.0 * self.a);
        let w = d / (d + q);
        if w <= 0.5 {
            let h = (r2 / (d + q)).powf(self.a) * beta_lower_scaled(self.a, s, w) / self.beta_sa;
            (sing - h, h)
        } else {
            let v = q / (d + q);
            let g = sing * v.powf(s) * beta_lower_scaled(s, self.a, v) / self.beta_sa;
            (g, sing - g)
        }
    }

    fn dist(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    fn check_inside(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.params.n {
            return Err(Error::Domain(format!("point of dimension {} in R^{}", x.len(), self.params.n)));
        }
        let d = self.domain.boundary_distance(x);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Domain(format!("{x:?} not in the open domain")))
        }
    }

    /// G_0(x, y); zero when y is outside the open domain.
    pub fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let dx = self.check_inside(x)?;
        if y.len() != x.len() {
            return Err(Error::Domain("dimension mismatch".into()));
        }
        let dy = self.domain.boundary_distance(y);
        let dist = Self::dist(x, y);
        if dist == 0.0 {
            return Err(Error::Singularity(format!("G_0 at x = y = {x:?}")));
        }
        if dy <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.parts_from_distances(dist, dx, dy).0)
    }

    pub fn regular(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let dx = self.check_inside(x)?;
        let dy = self.check_inside(y)?;
        Ok(self.parts_from_distances(Self::dist(x, y), dx, dy).1)
    }

    /// φ_0(x) = H_0(x,x) = (r²/(r²−|x|²)²)^a / (a B(s,a)).
    pub fn robin(&self, x: &[f64]) -> Result<f64> {
        let dx = self.check_inside(x)?;
        Ok(self.parts_from_distances(0.0, dx, dx).1)
    }

    /// One-dimensional G_0 without domain checks (zero outside).
    pub fn green_1d(&self, x: f64, y: f64) -> f64 {
        let c = self.domain.center()[0];
        let r = self.r();
        let (dx, dy) = (r - (x - c).abs(), r - (y - c).abs());
        if dx <= 0.0 || dy <= 0.0 {
            return 0.0;
        }
        self.parts_from_distances((x - y).abs(), dx, dy).0
    }

    pub fn regular_1d(&self, x: f64, y: f64) -> f64 {
        let c = self.domain.center()[0];
        let r = self.r();
        self.parts_from_distances((x - y).abs(), r - (x - c).abs(), r - (y - c).abs()).1
    }

    /// ∫_Ω G_0(y, z) f(z) dz on an interval, split at y and the given points,
    /// with distances to y and to the boundary evaluated exactly.
    pub fn integrate_row_1d(&self, y: f64, f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Result<f64> {
        self.integrate_green_1d(y, |z, g| g * f(z), breaks, tol)
    }

    /// ∫_Ω F(z, G_0(y, z)) dz with the same splitting as `integrate_row_1d`;
    /// F must vanish when its second argument does.
    pub fn integrate_green_1d(&self, y: f64, f: impl Fn(f64, f64) -> f64, breaks: &[f64], tol: f64) -> Result<f64> {
        let (a, b) = self.domain.endpoints()?;
        let dy = (y - a).min(b - y);
        if dy <= 0.0 {
            return Err(Error::Domain(format!("{y} not interior")));
        }
        let mut cuts = vec![a, y, b];
        cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            total += quad::tanh_sinh(
                |l, r| {
                    let z = if l <= r { p + l } else { q - r };
                    let dist = if p == y {
                        l
                    } else if q == y {
                        r
                    } else {
                        (y - z).abs()
                    };
                    let dz = if p == a && l <= r {
                        l
                    } else if q == b && r < l {
                        r
                    } else {
                        (z - a).min(b - z)
                    };
                    if dist == 0.0 || dz <= 0.0 {
                        return 0.0;
                    }
                    f(z, self.parts_from_distances(dist, dy, dz).0)
                },
                q - p,
                tol,
            )?;
        }
        Ok(total)
    }

    /// Fractional Poisson kernel of the ball, P(y, z) for |y| < r < |z|.
    pub fn poisson_kernel(&self, y: &[f64], z: &[f64]) -> f64 {
        let n = self.params.nf();
        let s = self.params.s;
        let c = self.domain.center();
        let r2 = self.r() * self.r();
        let ny: f64 = y.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        let nz: f64 = z.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = gamma(n / 2.0).unwrap_or(f64::NAN) * (std::f64::consts::PI * s).sin()
            / std::f64::consts::PI.powf(n / 2.0 + 1.0);
        k * ((r2 - ny) / (nz - r2)).powf(s) * Self::dist(y, z).powf(-n)
    }

    /// ∫_{R \ Ω} P(y, z) f(z) dz on an interval: the s-harmonic function in Ω
    /// with exterior values f.
    pub fn poisson_extension_1d(&self, y: f64, f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
        let s = self.params.s;
        let c = self.domain.center()[0];
        let r = self.r();
        let dy = r - (y - c).abs();
        if dy <= 0.0 {
            return Err(Error::Domain(format!("{y} not interior")));
        }
        let qy = dy * (2.0 * r - dy);
        let k = (std::f64::consts::PI * s).sin() / std::f64::consts::PI;
        // z = c ± (r + t), t > 0, so |z−c|² − r² = t(2r + t)
        let ray = |sign: f64| {
            let yrel = (y - c) * sign;
            quad::semi_infinite(
                |t| {
                    let dist = r + t - yrel;
                    k * (qy / (t * (2.0 * r + t))).powf(s) / dist * f(c + sign * (r + t))
                },
                tol,
            )
        };
        Ok(ray(1.0)? + ray(-1.0)?)
    }
}

pub fn green0(x: &[f64], y: &[f64], domain: &Domain, params: &Params) -> Result<f64> {
    BallKernel::new(params, domain)?.green(x, y)
}

pub fn regular_part0(x: &[f64], y: &[f64], domain: &Domain, params: &Params) -> Result<f64> {
    BallKernel::new(params, domain)?.regular(x, y)
}

pub fn robin0(x: &[f64], domain: &Domain, params: &Params) -> Result<f64> {
    BallKernel::new(params, domain)?.robin(x)
}

/// Tabulated regular part H(x_i, x_j) on a 1D grid.  Rows and columns of
/// boundary nodes are kept for indexing convenience; G vanishes there.
#[derive(Debug, Clone)]
pub struct GreenTable {
    pub grid: Arc<DomainGrid>,
    pub kernel: Arc<BallKernel>,
    pub regular: DMatrix<f64>,
    /// Potential values at the nodes when the table is for G_a, a ≢ 0.
    pub potential: Option<Vec<f64>>,
    weights: Arc<OnceLock<DMatrix<f64>>>,
}

impl GreenTable {
    /// The table of H_0 on the given grid.
    pub fn ball(grid: Arc<DomainGrid>, params: &Params) -> Result<Self> {
        params.require_interval()?;
        let kernel = Arc::new(BallKernel::new(params, &grid.domain)?);
        let n = grid.len();
        let mut regular = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (di, dj) = (grid.boundary_distance[i], grid.boundary_distance[j]);
                let dist = (grid.nodes[i] - grid.nodes[j]).abs();
                regular[(i, j)] = if di > 0.0 && dj > 0.0 {
                    kernel.parts_from_distances(dist, di, dj).1
                } else if i == j {
                    f64::INFINITY
                } else {
                    dist.powf(2.0 * params.s - 1.0)
                };
            }
        }
        Ok(Self { grid, kernel, regular, potential: None, weights: Arc::new(OnceLock::new()) })
    }

    /// A table for G_a sharing the grid and singular-part quadrature of `self`.
    pub fn with_regular(&self, regular: DMatrix<f64>, potential: Vec<f64>) -> Self {
        Self {
            grid: self.grid.clone(),
            kernel: self.kernel.clone(),
            regular,
            potential: Some(potential),
            weights: self.weights.clone(),
        }
    }

    pub fn params(&self) -> &Params {
        &self.kernel.params
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.grid.boundary_distance[i] > 0.0
    }

    /// G(x_i, x_j) for i ≠ j; zero on boundary nodes.
    pub fn green(&self, i: usize, j: usize) -> f64 {
        if !self.is_interior(i) || !self.is_interior(j) {
            return 0.0;
        }
        let dist = (self.grid.nodes[i] - self.grid.nodes[j]).abs();
        dist.powf(2.0 * self.params().s - 1.0) - self.regular[(i, j)]
    }

    pub fn check_grid(&self, other: &DomainGrid) -> Result<()> {
        if self.grid.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("Green table and function use different grids".into()))
        }
    }

    /// Product-integration weights W_ij = ∫ G_0(x_i, z) ℓ_j(z) dz for the
    /// nodal hat functions ℓ_j.
    pub fn product_weights(&self) -> &DMatrix<f64> {
        self.weights.get_or_init(|| product_weights(&self.grid, &self.kernel))
    }

    /// u(y) = γ^{−1} ∫ G(y,z) f(z) dz for the piecewise-linear f.
    pub fn solve_dirichlet(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_grid(&f.grid)?;
        let fv = DVector::from_column_slice(&f.values);
        let mut u = self.product_weights() * &fv;
        if self.potential.is_some() {
            // ∫ G_a f = ∫ G_0 f − ∫ (H_a − H_0) f; the difference is continuous.
            let h0 = GreenTable::ball(self.grid.clone(), self.params())?;
            for i in self.grid.interior() {
                let mut acc = 0.0;
                for j in self.grid.interior() {
                    acc += self.grid.weights[j] * (self.regular[(i, j)] - h0.regular[(i, j)]) * f.values[j];
                }
                u[i] -= acc;
            }
        }
        u /= self.kernel.gamma_ns();
        GridFunction::new(self.grid.clone(), u.as_slice().to_vec())
    }
}

/// ∫ over the cell [z_k, z_{k+1}] of G_0(y, z)·(left hat, right hat).
pub(crate) fn cell_moments(grid: &DomainGrid, kernel: &BallKernel, y: f64, dy: f64, k: usize) -> (f64, f64) {
    let (z0, z1) = (grid.nodes[k], grid.nodes[k + 1]);
    let h = z1 - z0;
    let (a, b) = grid.domain.endpoints().expect("1D grid");
    let last = grid.len() - 2;
    let touches_y = y == z0 || y == z1;
    let dz = |z: f64| (z - a).min(b - z);
    if touches_y || k == 0 || k == last {
        let g = |l: f64, r: f64| {
            let dist = if y == z0 {
                l
            } else if y == z1 {
                r
            } else {
                (y - if l <= r { z0 + l } else { z1 - r }).abs()
            };
            let d = if k == 0 {
                l
            } else if k == last {
                r
            } else {
                dz(if l <= r { z0 + l } else { z1 - r })
            };
            if d <= 0.0 || dist == 0.0 {
                return 0.0;
            }
            kernel.parts_from_distances(dist, dy, d).0
        };
        let left = quad::tanh_sinh(|l, r| g(l, r) * r / h, h, 1e-11).unwrap_or(f64::NAN);
        let right = quad::tanh_sinh(|l, r| g(l, r) * l / h, h, 1e-11).unwrap_or(f64::NAN);
        return (left, right);
    }
    let gap = (y - z0).abs().min((y - z1).abs());
    let m = if gap < 4.0 * h { 16 } else { 6 };
    let rule = quad::gl_rule(m);
    let (mut left, mut right) = (0.0, 0.0);
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xi = 0.5 * (t + 1.0);
        let z = z0 + h * xi;
        let g = kernel.parts_from_distances((y - z).abs(), dy, dz(z)).0;
        left += 0.5 * h * w * g * (1.0 - xi);
        right += 0.5 * h * w * g * xi;
    }
    (left, right)
}

fn product_weights(grid: &DomainGrid, kernel: &BallKernel) -> DMatrix<f64> {
    let n = grid.len();
    let mut w = DMatrix::zeros(n, n);
    for i in grid.interior() {
        let (y, dy) = (grid.nodes[i], grid.boundary_distance[i]);
        for k in 0..n - 1 {
            let (l, r) = cell_moments(grid, kernel, y, dy, k);
            w[(i, k)] += l;
            w[(i, k + 1)] += r;
        }
    }
    w
}
