//! Sobolev bubbles U_{x,λ}(y) = (λ / (1 + λ²|x−y|²))^{(N−2s)/2}, their
//! derivatives and norms, the correction kernel h, the bubble equation checked
//! by singular-integral quadrature, and the projections PU and ψ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{big_c_variant, eval_constant, sphere_area, CVariant, ConstantName, C_VARIANT};
use crate::error::{Error, Result};
use crate::grid::{Domain, GridFunction};
use crate::greens_ball::GreenTable;
use crate::params::Params;
use crate::quad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub x: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    None,
    Lambda,
    X(usize),
}

impl Bubble {
    pub fn new(x: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParams(format!("λ = {lambda} must be positive")));
        }
        Ok(Self { x, lambda })
    }

    pub fn centered_1d(x: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![x], lambda)
    }

    /// U as a function of the distance r = |y − x|.
    pub fn profile(&self, r: f64, params: &Params) -> f64 {
        let l = self.lambda;
        (l / (1.0 + l * l * r * r)).powf(params.beta())
    }

    /// U at a 1D point.
    pub fn at(&self, y: f64, params: &Params) -> f64 {
        self.profile(y - self.x[0], params)
    }

    /// ∂_λU at a 1D point.
    pub fn d_lambda_at(&self, y: f64, params: &Params) -> f64 {
        let (l, beta) = (self.lambda, params.beta());
        let t = l * l * (y - self.x[0]).powi(2);
        beta * l.powf(beta - 1.0) * (1.0 - t) * (1.0 + t).powf(-beta - 1.0)
    }

    /// ∂_xU at a 1D point.
    pub fn d_x_at(&self, y: f64, params: &Params) -> f64 {
        let (l, beta) = (self.lambda, params.beta());
        let d = self.x[0] - y;
        -2.0 * beta * l.powf(beta + 2.0) * d * (1.0 + l * l * d * d).powf(-beta - 1.0)
    }

    /// U(y)^{p−1} at a 1D point.
    pub fn source_at(&self, y: f64, params: &Params) -> f64 {
        self.at(y, params).powf(params.p() - 1.0)
    }

    /// Breakpoints x ± 4^k/λ that resolve the bubble core for quadrature.
    pub fn breaks_1d(&self) -> Vec<f64> {
        let mut v = vec![self.x[0]];
        let mut w = 0.25 / self.lambda;
        while w < 4.0 {
            v.push(self.x[0] - w);
            v.push(self.x[0] + w);
            w *= 4.0;
        }
        v
    }
}

pub fn bubble_eval(b: &Bubble, y: &[f64], deriv: Deriv, params: &Params) -> Result<f64> {
    if y.len() != b.x.len() || y.len() != params.n {
        return Err(Error::Domain("point dimension does not match N".into()));
    }
    let (l, beta) = (b.lambda, params.beta());
    let r2: f64 = b.x.iter().zip(y).map(|(a, c)| (a - c) * (a - c)).sum();
    let t = l * l * r2;
    Ok(match deriv {
        Deriv::None => (l / (1.0 + t)).powf(beta),
        Deriv::Lambda => beta * l.powf(beta - 1.0) * (1.0 - t) * (1.0 + t).powf(-beta - 1.0),
        Deriv::X(i) => {
            if i >= params.n {
                return Err(Error::Domain(format!("no coordinate {i}")));
            }
            -2.0 * beta * l.powf(beta + 2.0) * (b.x[i] - y[i]) * (1.0 + t).powf(-beta - 1.0)
        }
    })
}

/// ‖U_{x,λ}‖_{L^q(R^N)} by radial quadrature.
pub fn bubble_lq_norm_full(lambda: f64, q: f64, params: &Params) -> Result<f64> {
    let beta = params.beta();
    if q.is_infinite() {
        return Ok(lambda.powf(beta));
    }
    if q * beta <= params.nf() / 2.0 {
        return Err(Error::Regime(format!("U is not in L^{q}(R^N)")));
    }
    let n = params.nf();
    let v = sphere_area(params.n) * quad::semi_infinite(|r| (1.0 + r * r).powf(-q * beta) * r.powf(n - 1.0), 1e-12)?;
    // scaling: ∫ U_{0,λ}^q = λ^{qβ − N} ∫ U_{0,1}^q
    Ok((v * lambda.powf(q * beta - n)).powf(1.0 / q))
}

/// ‖U_{x,λ}‖_{L^q(Ω)} for a model domain (intervals, centred balls, and
/// off-centre balls in N ≤ 3).
pub fn bubble_lq_norm(b: &Bubble, q: f64, domain: &Domain, params: &Params) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParams(format!("q = {q} < 1")));
    }
    if !domain.contains(&b.x) {
        return Err(Error::Domain("bubble centre outside the domain".into()));
    }
    if q.is_infinite() {
        return Ok(b.lambda.powf(params.beta()));
    }
    let tol = 1e-11;
    let l = b.lambda;
    let n = params.nf();
    let core: Vec<f64> = (0..12).map(|k| 4f64.powi(k) * 0.25 / l).collect();
    let radial_to = |rho: f64| -> Result<f64> {
        quad::adaptive(|r| b.profile(r, params).powf(q) * r.powf(n - 1.0), 0.0, rho, &core, tol)
    };
    let c = domain.center();
    let m: f64 = b.x.iter().zip(&c).map(|(a, d)| (a - d) * (a - d)).sum::<f64>().sqrt();
    let big_r = domain.radius();
    let total = match params.n {
        1 => {
            let (a, e) = domain.endpoints()?;
            radial_to(b.x[0] - a)? + radial_to(e - b.x[0])?
        }
        _ if m == 0.0 => sphere_area(params.n) * radial_to(big_r)?,
        2 | 3 => {
            // polar coordinates about x; ρ(θ) is the distance to the sphere
            let rule = quad::gl_rule(64);
            let mut acc = 0.0;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let th = 0.5 * PI * (t + 1.0);
                let rho = -m * th.cos() + (big_r * big_r - m * m * th.sin().powi(2)).sqrt();
                let jac = if params.n == 2 { 2.0 } else { 2.0 * PI * th.sin() };
                acc += 0.5 * PI * w * jac * radial_to(rho)?;
            }
            acc
        }
        _ => return Err(Error::Regime("off-centre bubbles only for N ≤ 3".into())),
    };
    Ok(total.powf(1.0 / q))
}

/// h(z) = |z|^{2s−N} − (1+|z|²)^{−(N−2s)/2} ≥ 0.
pub fn h_eval(z: &[f64], params: &Params) -> Result<f64> {
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Singularity("h at the origin".into()));
    }
    Ok(h_radial(r, params))
}

pub fn h_radial(r: f64, params: &Params) -> f64 {
    let beta = params.beta();
    // r^{−2β} (1 − (1 + r^{−2})^{−β})
    r.powf(-2.0 * beta) * -(-beta * (r * r).recip().ln_1p()).exp_m1()
}

/// (−Δ)^s U_{x,λ}(y) by the symmetrized singular integral
/// (C/2) ∫ (2U(y) − U(y+w) − U(y−w)) |w|^{−N−2s} dw.
pub fn frac_laplacian_bubble(b: &Bubble, y: &[f64], params: &Params, big_c: f64) -> Result<f64> {
    let (n, s, beta, l) = (params.nf(), params.s, params.beta(), b.lambda);
    let yrel: Vec<f64> = y.iter().zip(&b.x).map(|(a, c)| a - c).collect();
    let m = yrel.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u_y = b.profile(m, params);
    let denom = 1.0 + l * l * m * m;
    // radial profile derivatives: U' = r g(r), U'' = g + 4β(β+1)λ^{β+4} r² (1+λ²r²)^{−β−2}
    let g = -2.0 * beta * l.powf(beta + 2.0) * denom.powf(-beta - 1.0);
    let u2 = g + 4.0 * beta * (beta + 1.0) * l.powf(beta + 4.0) * m * m * denom.powf(-beta - 2.0);
    let tol = 1e-11;
    let directional = |t: f64| -> Result<f64> {
        // t = cos of the angle between ω and y − x
        let d2 = u2 * t * t + g * (1.0 - t * t);
        let rho0 = 1e-3 / l;
        let near = -d2 * rho0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        let num = |rho: f64| {
            let ap = -beta * (l * l * (rho * rho + 2.0 * rho * m * t) / denom).ln_1p();
            let am = -beta * (l * l * (rho * rho - 2.0 * rho * m * t) / denom).ln_1p();
            -u_y * (ap.exp_m1() + am.exp_m1())
        };
        let star = m * t.abs();
        let big_r = star + 64.0 / l;
        let mut breaks = vec![star];
        let mut w = 0.25 / l;
        while w < 64.0 / l {
            breaks.push(star + w);
            breaks.push(star - w);
            w *= 2.0;
        }
        let mid = quad::adaptive(|rho| num(rho) * rho.powf(-1.0 - 2.0 * s), rho0, big_r, &breaks, tol)?;
        let far_u = quad::semi_infinite(
            |u| {
                let rho = big_r + u;
                let up = u_y * (-beta * (l * l * (rho * rho + 2.0 * rho * m * t) / denom).ln_1p()).exp();
                let um = u_y * (-beta * (l * l * (rho * rho - 2.0 * rho * m * t) / denom).ln_1p()).exp();
                (up + um) * rho.powf(-1.0 - 2.0 * s)
            },
            tol,
        )?;
        let far = 2.0 * u_y * big_r.powf(-2.0 * s) / (2.0 * s) - far_u;
        Ok(near + mid + far)
    };
    let sphere_integral = if params.n == 1 {
        2.0 * directional(1.0)?
    } else if m == 0.0 {
        sphere_area(params.n) * directional(1.0)?
    } else {
        // ∫_{S^{N−1}} f(ω·ŷ) dω = |S^{N−2}| ∫_0^π f(cos θ) sin^{N−2}θ dθ, symmetric about π/2
        let rule = quad::gl_rule(48);
        let mut acc = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let th = 0.25 * PI * (t + 1.0);
            acc += 0.25 * PI * w * th.sin().powf(n - 2.0) * directional(th.cos())?;
        }
        2.0 * sphere_area(params.n - 1) * acc
    };
    Ok(0.5 * big_c * sphere_integral)
}

/// Largest relative residual of (−Δ)^s U = c U^{p−1} over the test points,
/// with C_{N,s} in the given printed form.
pub fn bubble_pde_residual_with(b: &Bubble, pts: &[Vec<f64>], params: &Params, variant: CVariant) -> Result<f64> {
    let big_c = big_c_variant(params, variant)?;
    let c = eval_constant(ConstantName::SmallC, params)?;
    let mut worst: f64 = 0.0;
    for y in pts {
        let lhs = frac_laplacian_bubble(b, y, params, big_c)?;
        let rhs = c * bubble_eval(b, y, Deriv::None, params)?.powf(params.p() - 1.0);
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    Ok(worst)
}

pub fn bubble_pde_residual(b: &Bubble, pts: &[Vec<f64>], params: &Params) -> Result<f64> {
    bubble_pde_residual_with(b, pts, params, C_VARIANT)
}

/// PU_{x,λ}(y_i) = (c/γ) ∫ G_0(y_i, z) U(z)^{p−1} dz at every grid node.
pub fn project_bubble(b: &Bubble, g: &GreenTable) -> Result<GridFunction> {
    let params = *g.params();
    if !g.grid.domain.contains(&b.x) {
        return Err(Error::Domain("bubble centre outside the Green table's domain".into()));
    }
    let c = eval_constant(ConstantName::SmallC, &params)?;
    let scale = c / g.kernel.gamma_ns();
    let breaks = b.breaks_1d();
    let mut values = vec![0.0; g.grid.len()];
    for i in g.grid.interior() {
        let y = g.grid.nodes[i];
        values[i] = scale * g.kernel.integrate_row_1d(y, |z| b.source_at(z, &params), &breaks, 1e-11)?;
    }
    GridFunction::new(g.grid.clone(), values)
}

/// ψ_{x,λ} = PU − λ^{−(N−2s)/2} (H_a(x,·) − H_0(x,·)) at the grid nodes; x must be a node.
pub fn psi_construct(b: &Bubble, g0: &GreenTable, ga: &GreenTable) -> Result<GridFunction> {
    g0.check_grid(&ga.grid)?;
    let i = g0.grid.node_index(b.x[0])?;
    let pu = project_bubble(b, g0)?;
    let w = b.lambda.powf(-g0.params().beta());
    let mut values = pu.values;
    for j in g0.grid.interior() {
        values[j] -= w * (ga.regular[(i, j)] - g0.regular[(i, j)]);
    }
    GridFunction::new(g0.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainGrid, Grading};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn p1() -> Params {
        Params::new(1, 0.35).unwrap()
    }

    #[test]
    fn values_at_centre() {
        let p = p1();
        assert_eq!(bubble_eval(&Bubble::new(vec![0.0], 1.0).unwrap(), &[0.0], Deriv::None, &p).unwrap(), 1.0);
        let b = Bubble::new(vec![0.0], 7.0).unwrap();
        assert_relative_eq!(bubble_eval(&b, &[0.0], Deriv::None, &p).unwrap(), 7f64.powf(0.15), max_relative = 1e-15);
        let b1 = Bubble::new(vec![0.0], 1.0).unwrap();
        assert_eq!(bubble_eval(&b1, &[1.0], Deriv::Lambda, &p).unwrap(), 0.0);
        let p3 = Params::new(3, 0.9).unwrap();
        let b3 = Bubble::new(vec![0.0; 3], 1.0).unwrap();
        assert!(bubble_eval(&b3, &[0.6, 0.0, 0.8], Deriv::Lambda, &p3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = Params::new(3, 0.9).unwrap();
        let b = Bubble::new(vec![0.1, -0.2, 0.3], 3.0).unwrap();
        let y = [0.4, 0.1, -0.2];
        let e = 1e-6;
        let bl = Bubble::new(b.x.clone(), b.lambda + e).unwrap();
        let br = Bubble::new(b.x.clone(), b.lambda - e).unwrap();
        let fd = (bubble_eval(&bl, &y, Deriv::None, &p).unwrap() - bubble_eval(&br, &y, Deriv::None, &p).unwrap()) / (2.0 * e);
        assert_relative_eq!(bubble_eval(&b, &y, Deriv::Lambda, &p).unwrap(), fd, max_relative = 1e-7);
        let mut xl = b.x.clone();
        xl[1] += e;
        let mut xr = b.x.clone();
        xr[1] -= e;
        let fd = (bubble_eval(&Bubble::new(xl, 3.0).unwrap(), &y, Deriv::None, &p).unwrap()
            - bubble_eval(&Bubble::new(xr, 3.0).unwrap(), &y, Deriv::None, &p).unwrap())
            / (2.0 * e);
        assert_relative_eq!(bubble_eval(&b, &y, Deriv::X(1), &p).unwrap(), fd, max_relative = 1e-7);
        let b1 = Bubble::centered_1d(0.2, 5.0).unwrap();
        let p1 = p1();
        assert_relative_eq!(b1.d_x_at(0.3, &p1), bubble_eval(&b1, &[0.3], Deriv::X(0), &p1).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(b1.d_lambda_at(0.3, &p1), bubble_eval(&b1, &[0.3], Deriv::Lambda, &p1).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn lp_norm_over_whole_space_is_a_power_of_a() {
        for (n, s) in [(1, 0.35), (3, 0.9), (2, 0.6)] {
            let p = Params::new(n, s).unwrap();
            let a = eval_constant(ConstantName::BigA, &p).unwrap();
            assert_relative_eq!(bubble_lq_norm_full(1.0, p.p(), &p).unwrap(), a.powf(1.0 / p.p()), max_relative = 1e-9);
        }
    }

    fn slope_over_lambda(q: f64, p: &Params, dom: &Domain, ks: std::ops::RangeInclusive<i32>) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = ks
            .map(|k| {
                let l = 2f64.powi(k);
                let b = Bubble::new(dom.center(), l).unwrap();
                (l.ln(), bubble_lq_norm(&b, q, dom, p).unwrap().ln())
            })
            .unzip();
        crate::fit::ols_slope(&xs, &ys)
    }

    #[test]
    fn lq_norm_scaling_regimes() {
        let p = Params::new(3, 0.9).unwrap();
        let dom = Domain::unit_ball(3);
        // N/(N−2s) = 2.5: q = 2 lies below it, q = 4 above.  Below the threshold
        // the next correction is only O(λ^{−(N−2s)/2}) relative, so the leading
        // slope needs λ beyond 2^9.
        assert_relative_eq!(slope_over_lambda(2.0, &p, &dom, 10..=15), -0.6, max_relative = 0.01);
        assert_relative_eq!(slope_over_lambda(4.0, &p, &dom, 4..=9), 0.6 - 0.75, max_relative = 0.05);
        let b = Bubble::new(vec![0.0; 3], 40.0).unwrap();
        assert_eq!(bubble_lq_norm(&b, f64::INFINITY, &dom, &p).unwrap(), 40f64.powf(0.6));
    }

    #[test]
    fn off_centre_norm_is_consistent() {
        // a tiny bubble deep inside sees almost the whole-space mass
        let p = Params::new(3, 0.9).unwrap();
        let b = Bubble::new(vec![0.2, 0.0, 0.0], 500.0).unwrap();
        let inside = bubble_lq_norm(&b, p.p(), &Domain::unit_ball(3), &p).unwrap();
        let full = bubble_lq_norm_full(500.0, p.p(), &p).unwrap();
        assert!(inside < full && inside > 0.999 * full);
    }

    #[test]
    fn h_decay_and_sign() {
        for (n, s) in [(1, 0.35), (3, 0.9)] {
            let p = Params::new(n, s).unwrap();
            for r in [1e2, 1e3, 1e4] {
                let v = h_radial(r, &p) * r.powf(p.nf() + 2.0 - 2.0 * s);
                assert_relative_eq!(v, p.beta(), max_relative = 10.0 / (r * r) + 1e-9);
            }
            assert!(matches!(h_eval(&vec![0.0; n], &p), Err(Error::Singularity(_))));
        }
    }

    #[test]
    fn integral_of_u_h_is_alpha() {
        let p = p1();
        let v = 2.0 * quad::semi_infinite(|r| Bubble::centered_1d(0.0, 1.0).unwrap().profile(r, &p) * h_radial(r, &p), 1e-12).unwrap();
        assert_relative_eq!(v, eval_constant(ConstantName::Alpha, &p).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn bubble_equation_one_dimension() {
        let p = p1();
        let b = Bubble::centered_1d(0.0, 1.0).unwrap();
        let pts: Vec<Vec<f64>> = [-1.7, -0.6, 0.0, 0.45, 1.9].iter().map(|&y| vec![y]).collect();
        assert!(bubble_pde_residual(&b, &pts, &p).unwrap() <= 1e-3);
        assert!(bubble_pde_residual(&b, &[vec![0.0]], &p).unwrap() <= 1e-3);
        // the s-in-denominator form is off by the factor s²
        assert!(bubble_pde_residual_with(&b, &pts, &p, CVariant::SInDenominator).unwrap() > 1.0);
        // scale covariance
        let b4 = Bubble::centered_1d(0.0, 4.0).unwrap();
        let pts4: Vec<Vec<f64>> = pts.iter().map(|y| vec![y[0] / 4.0]).collect();
        let (r1, r4) = (bubble_pde_residual(&b, &pts, &p).unwrap(), bubble_pde_residual(&b4, &pts4, &p).unwrap());
        assert!((r1 - r4).abs() < 1e-6);
    }

    #[test]
    fn bubble_equation_three_dimensions() {
        let p = Params::new(3, 0.9).unwrap();
        let b = Bubble::new(vec![0.0; 3], 1.0).unwrap();
        let pts = vec![vec![0.0, 0.0, 0.0], vec![0.3, 0.0, 0.0], vec![0.0, 0.8, 0.6], vec![1.5, -1.0, 0.2], vec![0.0, 0.0, 3.0]];
        assert!(bubble_pde_residual(&b, &pts, &p).unwrap() <= 1e-3);
    }

    fn table(foci: Vec<(f64, f64)>) -> GreenTable {
        let g = Grading { h_max: 0.04, h_boundary: 2e-4, foci, growth: 0.25 };
        let grid = Arc::new(DomainGrid::graded(Domain::Interval { a: -1.0, b: 1.0 }, &g).unwrap());
        GreenTable::ball(grid, &p1()).unwrap()
    }

    #[test]
    fn projection_is_between_zero_and_u_and_matches_poisson_route() {
        let p = p1();
        let t = table(vec![(0.1, 1e-3)]);
        for lambda in [2.0, 10.0, 60.0] {
            let b = Bubble::centered_1d(0.1, lambda).unwrap();
            let pu = project_bubble(&b, &t).unwrap();
            for i in t.grid.interior() {
                let y = t.grid.nodes[i];
                let u = b.at(y, &p);
                assert!(pu.values[i] >= 0.0 && pu.values[i] <= u * (1.0 + 1e-10), "λ={lambda} y={y}");
            }
            for &i in &[t.grid.nearest_node(-0.5), t.grid.node_index(0.1).unwrap(), t.grid.nearest_node(0.93)] {
                let y = t.grid.nodes[i];
                let phi = t.kernel.poisson_extension_1d(y, |z| b.at(z, &p), 1e-12).unwrap();
                assert_relative_eq!(pu.values[i], b.at(y, &p) - phi, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn psi_equals_projection_without_potential() {
        let t = table(vec![(0.0, 1e-3)]);
        let b = Bubble::centered_1d(0.0, 8.0).unwrap();
        let psi = psi_construct(&b, &t, &t).unwrap();
        let pu = project_bubble(&b, &t).unwrap();
        assert_eq!(psi.values, pu.values);
        assert_eq!(psi.values[0], 0.0);
        assert_eq!(*psi.values.last().unwrap(), 0.0);
        let off = Bubble::centered_1d(0.123456, 8.0).unwrap();
        assert!(matches!(psi_construct(&off, &t, &t), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn scale_covariance(x in -1.0f64..1.0, y in -3.0f64..3.0, l in 0.1f64..50.0) {
            let p = p1();
            let lhs = Bubble::centered_1d(x, l).unwrap().at(y, &p);
            let rhs = l.powf(p.beta()) * Bubble::centered_1d(0.0, 1.0).unwrap().at(l * (y - x), &p);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs);
        }

        #[test]
        fn lambda_derivative_bound(y in -3.0f64..3.0, l in 0.1f64..50.0) {
            let p = p1();
            let b = Bubble::centered_1d(0.0, l).unwrap();
            prop_assert!(b.d_lambda_at(y, &p).abs() <= p.beta() / l * b.at(y, &p) * (1.0 + 1e-12));
        }

        #[test]
        fn identity_h(x in -1.0f64..1.0, y in -3.0f64..3.0, l in 0.1f64..50.0) {
            prop_assume!((x - y).abs() > 1e-6);
            let p = p1();
            let beta = p.beta();
            let lhs = l.powf(-beta) * (x - y).abs().powf(-2.0 * beta) - Bubble::centered_1d(x, l).unwrap().at(y, &p);
            let rhs = l.powf(beta) * h_radial(l * (x - y).abs(), &p);
            prop_assert!(lhs >= -1e-14 * rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300) + 1e-13 * l.powf(-beta) * (x - y).abs().powf(-2.0 * beta));
        }
    }
}
