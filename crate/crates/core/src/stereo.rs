//! Stereographic balancing and the nonlocal form I(φ) behind the strict
//! Druet inequality Σ_i I(φ_i) < S(p−2).
//!
//! The density is balanced in place: instead of scaling and translating Ω we
//! compose the stereographic coordinates with z = t(x − y).

use serde::Serialize;

use crate::constants::{eval_constant, ConstantName};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::params::Params;
use crate::quad;

/// Inverse stereographic projection R^N → S^N ⊂ R^{N+1}.
pub fn stereo_coords(y: &[f64]) -> Vec<f64> {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    let den = 1.0 + r2;
    let mut out: Vec<f64> = y.iter().map(|v| 2.0 * v / den).collect();
    out.push((1.0 - r2) / den);
    out
}

/// Balancing point: F(y, t) = G(y, t) = 0 for the normalized density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BalancePoint {
    pub y: f64,
    pub t: f64,
    /// max(|F|, |G|) at (y, t).
    pub residual: f64,
}

const GAUSS_PER_CELL: usize = 8;

/// Weighted quadrature points (x, w·h(x)) of a P1 density, normalized to unit mass.
fn density_points(h: &GridFunction) -> Result<Vec<(f64, f64)>> {
    if h.values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Regime("balancing density must be finite and nonnegative".into()));
    }
    let pts: Vec<(f64, f64)> = h
        .grid
        .gauss_points(GAUSS_PER_CELL)
        .into_iter()
        .map(|(x, w, _, _)| (x, w * h.eval(x)))
        .filter(|p| p.1 > 0.0)
        .collect();
    let mass: f64 = pts.iter().map(|p| p.1).sum();
    if mass <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(pts.into_iter().map(|(x, w)| (x, w / mass)).collect())
}

fn fg_integrands(z: f64) -> (f64, f64) {
    let d = 1.0 + z * z;
    (2.0 * z / d, (1.0 - z * z) / d)
}

/// (F, G) and their Jacobian with respect to (y, ln t).
fn fg_jacobian(pts: &[(f64, f64)], y: f64, t: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let (mut f, mut g) = (0.0, 0.0);
    let mut jac = [[0.0; 2]; 2];
    for &(x, w) in pts {
        let z = t * (x - y);
        let d = 1.0 + z * z;
        let (fi, gi) = fg_integrands(z);
        f += w * fi;
        g += w * gi;
        let df = 2.0 * (1.0 - z * z) / (d * d);
        let dg = -4.0 * z / (d * d);
        jac[0][0] -= w * df * t;
        jac[0][1] += w * df * z;
        jac[1][0] -= w * dg * t;
        jac[1][1] += w * dg * z;
    }
    ([f, g], jac)
}

fn fg(pts: &[(f64, f64)], y: f64, t: f64) -> [f64; 2] {
    pts.iter().fold([0.0, 0.0], |acc, &(x, w)| {
        let (fi, gi) = fg_integrands(t * (x - y));
        [acc[0] + w * fi, acc[1] + w * gi]
    })
}

fn merit(r: [f64; 2]) -> f64 {
    r[0].abs().max(r[1].abs())
}

fn weighted_median_abs(pts: &[(f64, f64)], y: f64) -> f64 {
    let mut d: Vec<(f64, f64)> = pts.iter().map(|&(x, w)| ((x - y).abs(), w)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (r, w) in d {
        acc += w;
        if acc >= 0.5 {
            return r;
        }
    }
    0.0
}

fn newton(pts: &[(f64, f64)], y0: f64, t0: f64, tol: f64) -> Option<(f64, f64, f64)> {
    let (mut y, mut tau) = (y0, t0.ln());
    let (mut r, mut jac) = fg_jacobian(pts, y, tau.exp());
    for _ in 0..100 {
        let m = merit(r);
        if m <= tol {
            return Some((y, tau.exp(), m));
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dy = -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
        let dtau = -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (yn, taun) = (y + step * dy, tau + step * dtau);
            let rn = fg(pts, yn, taun.exp());
            if merit(rn) < (1.0 - 1e-4 * step) * m {
                y = yn;
                tau = taun;
                (r, jac) = fg_jacobian(pts, y, tau.exp());
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Relaxed iteration of the fixed-point map H(y, σ) = (F + y, G + σ) with
/// t = (σ + √(σ² + 4))/2. The y-update is measured in the length scale 1/t,
/// which has the same fixed points and avoids overshooting for large t.
fn fixed_point(pts: &[(f64, f64)], y0: f64, t0: f64, tol: f64) -> Option<(f64, f64, f64)> {
    let t_of = |sig: f64| 0.5 * (sig + (sig * sig + 4.0).sqrt());
    let (mut y, mut sig) = (y0, t0 - 1.0 / t0);
    let mut omega = 1.0;
    let mut r = fg(pts, y, t_of(sig));
    for _ in 0..20_000 {
        let m = merit(r);
        if m <= tol {
            return Some((y, t_of(sig), m));
        }
        let (yn, sn) = (y + omega * r[0] / t_of(sig), sig + omega * r[1]);
        let rn = fg(pts, yn, t_of(sn));
        if merit(rn) < m {
            (y, sig, r) = (yn, sn, rn);
            omega = (omega * 1.5).min(1.0);
        } else {
            omega *= 0.5;
            if omega < 1e-12 {
                return None;
            }
        }
    }
    None
}

/// Finds (y, t) with ∫h·φ_i(t(x − y)) = 0 for all i, i.e. F = G = 0.
pub fn balance(h: &GridFunction, tol: f64) -> Result<BalancePoint> {
    balance_points(&density_points(h)?, tol)
}

fn balance_points(pts: &[(f64, f64)], tol: f64) -> Result<BalancePoint> {
    let y0: f64 = pts.iter().map(|&(x, w)| w * x).sum();
    let med = weighted_median_abs(pts, y0);
    if med <= 0.0 {
        return Err(Error::Regime("density concentrated at a point".into()));
    }
    let t0 = 1.0 / med;
    let (y, t, residual) = newton(pts, y0, t0, tol)
        .or_else(|| fixed_point(pts, y0, t0, tol))
        .ok_or_else(|| Error::NonConvergence("balancing: Newton and fixed-point map both failed".into()))?;
    Ok(BalancePoint { y, t, residual })
}

/// max(|F|, |G|) at (y, t) by adaptive quadrature of the P1 density, cell by
/// cell; independent of the fixed Gauss rule used by `balance`.
pub fn balance_residual(h: &GridFunction, y: f64, t: f64, tol: f64) -> Result<f64> {
    let mass = quad::adaptive(|x| h.eval(x), h.grid.nodes[0], *h.grid.nodes.last().unwrap_or(&0.0), &h.grid.nodes, tol)?;
    if mass <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let (a, b) = (h.grid.nodes[0], *h.grid.nodes.last().unwrap_or(&0.0));
    let f = quad::adaptive(|x| h.eval(x) * fg_integrands(t * (x - y)).0, a, b, &h.grid.nodes, tol)?;
    let g = quad::adaptive(|x| h.eval(x) * fg_integrands(t * (x - y)).1, a, b, &h.grid.nodes, tol)?;
    Ok(merit([f / mass, g / mass]))
}

const PAIR_POINTS: usize = 12;
const NEAR_POINTS: usize = 16;

/// Symmetric double sum Σ_{cells k, l} ∬ f(x, y) for kernels that are smooth
/// off the diagonal and behave like |x − y|^{1−2s}·smooth on it.
fn symmetric_double<F: FnMut(f64, f64) -> f64>(nodes: &[f64], mut f: F) -> f64 {
    let far = quad::gl_rule(PAIR_POINTS);
    let near = quad::gl_rule(NEAR_POINTS);
    let map = |rule: &quad::GlRule, a: f64, b: f64| -> Vec<(f64, f64)> {
        rule.nodes.iter().zip(&rule.weights).map(|(&t, &w)| (a + 0.5 * (b - a) * (t + 1.0), 0.5 * (b - a) * w)).collect()
    };
    // Graded points σ ↦ hσ⁴ on [0, h], concentrating toward σ = 0.
    let graded: Vec<(f64, f64)> = near
        .nodes
        .iter()
        .zip(&near.weights)
        .map(|(&t, &w)| {
            let sg = 0.5 * (t + 1.0);
            (sg.powi(4), 0.5 * w * 4.0 * sg.powi(3))
        })
        .collect();
    let cells: Vec<(f64, f64)> = nodes.windows(2).map(|w| (w[0], w[1])).collect();
    let far_pts: Vec<Vec<(f64, f64)>> = cells.iter().map(|&(a, b)| map(far, a, b)).collect();
    let mut total = 0.0;
    for (k, &(a, b)) in cells.iter().enumerate() {
        let h = b - a;
        // Same cell: 2∫_0^h dr ∫_a^{b−r} f(x, x + r) dx.
        let mut same = 0.0;
        for &(rg, wr) in &graded {
            let r = h * rg;
            for &(x, wx) in &map(near, a, b - r) {
                same += wr * h * wx * f(x, x + r);
            }
        }
        total += 2.0 * same;
        for l in k + 1..cells.len() {
            let (c, d) = cells[l];
            let pair = if l == k + 1 {
                // Corner x = y = b: grade both variables toward it.
                let mut acc = 0.0;
                for &(gx, wx) in &graded {
                    for &(gy, wy) in &graded {
                        acc += wx * h * wy * (d - c) * f(b - h * gx, c + (d - c) * gy);
                    }
                }
                acc
            } else {
                let mut acc = 0.0;
                for &(x, wx) in &far_pts[k] {
                    for &(y, wy) in &far_pts[l] {
                        acc += wx * wy * f(x, y);
                    }
                }
                acc
            };
            total += 2.0 * pair;
        }
    }
    total
}

/// I(φ) = (C_{N,s}/2)∬ u(x)u(y)|φ(x) − φ(y)|²/|x − y|^{N+2s} for a P1 function
/// u vanishing outside its grid.
pub fn i_functional(u: &GridFunction, phi: impl Fn(f64) -> f64, params: &Params) -> Result<f64> {
    params.require_interval()?;
    let big_c = eval_constant(ConstantName::BigC, params)?;
    let e = 1.0 + 2.0 * params.s;
    let val = symmetric_double(&u.grid.nodes, |x, y| {
        let d = (x - y).abs();
        if d == 0.0 {
            return 0.0;
        }
        let dp = phi(x) - phi(y);
        u.eval(x) * u.eval(y) * dp * dp / d.powf(e)
    });
    if !val.is_finite() {
        return Err(Error::NonConvergence("I(φ) quadrature produced a non-finite value".into()));
    }
    Ok(0.5 * big_c * val)
}

/// Outcome of the Druet check for one profile.
#[derive(Debug, Clone, Serialize)]
pub struct DruetReport {
    pub y: f64,
    pub t: f64,
    pub balance_residual: f64,
    /// Σ_i I(φ_i) with φ_i = 𝒮(t(· − y))_i.
    pub sum_i: f64,
    /// Σ_i I(φ_i) / (S(p−2)(∫|u|^p)^{2/p}).
    pub ratio: f64,
    pub margin: f64,
}

/// Balances |u|^p, then evaluates the Druet ratio. The ratio is scale
/// invariant in u; for ∫|u|^p = 1 it is Σ_i I(φ_i)/(S(p−2)).
pub fn druet_check(u: &GridFunction, params: &Params, tol: f64) -> Result<DruetReport> {
    params.require_interval()?;
    let p = params.p();
    let pts: Vec<(f64, f64)> = u
        .grid
        .gauss_points(GAUSS_PER_CELL)
        .into_iter()
        .map(|(x, w, _, _)| (x, w * u.eval(x).abs().powf(p)))
        .filter(|q| q.1 > 0.0)
        .collect();
    let lp: f64 = pts.iter().map(|q| q.1).sum();
    if lp <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let normalized: Vec<(f64, f64)> = pts.iter().map(|&(x, w)| (x, w / lp)).collect();
    let bp = balance_points(&normalized, tol)?;
    let mut sum_i = 0.0;
    for i in 0..=params.n {
        sum_i += i_functional(u, |x| stereo_coords(&[bp.t * (x - bp.y)])[i], params)?;
    }
    let s_sob = eval_constant(ConstantName::S, params)?;
    let ratio = sum_i / (s_sob * (p - 2.0) * lp.powf(2.0 / p));
    Ok(DruetReport { y: bp.y, t: bp.t, balance_residual: bp.residual, sum_i, ratio, margin: 1.0 - ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stereo_landmarks() {
        assert_eq!(stereo_coords(&[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
        let eq = stereo_coords(&[0.6, 0.8]);
        assert!(eq[2].abs() < 1e-15);
        for y in [[3.0, -1.0, 0.2], [1e-8, 0.0, 5e3]] {
            let v = stereo_coords(&y);
            assert_relative_eq!(v.iter().map(|c| c * c).sum::<f64>(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn balance_jacobian_matches_differences() {
        let pts: Vec<(f64, f64)> = (0..50).map(|k| (-0.7 + 0.03 * k as f64, 1.0 + 0.01 * k as f64)).collect();
        let (y, t) = (0.1, 2.0);
        let (_, jac) = fg_jacobian(&pts, y, t);
        let e = 1e-6;
        let dy = [fg(&pts, y + e, t), fg(&pts, y - e, t)];
        let dt = [fg(&pts, y, (t.ln() + e).exp()), fg(&pts, y, (t.ln() - e).exp())];
        for i in 0..2 {
            assert_relative_eq!(jac[i][0], (dy[0][i] - dy[1][i]) / (2.0 * e), max_relative = 1e-6);
            assert_relative_eq!(jac[i][1], (dt[0][i] - dt[1][i]) / (2.0 * e), max_relative = 1e-6);
        }
    }

    #[test]
    fn fixed_point_map_also_balances() {
        let pts: Vec<(f64, f64)> = (0..40).map(|k| (0.1 + 0.02 * k as f64, 1.0 / 40.0)).collect();
        let (y, t, r) = fixed_point(&pts, 0.3, 1.0, 1e-10).unwrap();
        assert!(r <= 1e-10);
        let (yn, tn, _) = newton(&pts, 0.3, 1.0, 1e-12).unwrap();
        assert_relative_eq!(y, yn, epsilon = 1e-8);
        assert_relative_eq!(t, tn, max_relative = 1e-8);
    }

    #[test]
    fn double_sum_of_smooth_kernel() {
        let nodes: Vec<f64> = (0..=20).map(|k| -1.0 + 0.1 * k as f64).collect();
        // ∬_{[-1,1]²} |x − y|^{0.3} = 2·2^{2.3}/(1.3·2.3)
        let v = symmetric_double(&nodes, |x, y| (x - y).abs().powf(0.3));
        assert_relative_eq!(v, 2.0 * 2f64.powf(2.3) / (1.3 * 2.3), max_relative = 1e-9);
    }
}
