//! Closed-form constants of the problem and independent radial-quadrature
//! oracles for the integral ones.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::quad;
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstantName {
    /// Sharp fractional Sobolev constant S_{N,s}.
    S,
    /// Normalization C_{N,s} of the singular-integral fractional Laplacian.
    BigC,
    /// c_{N,s}, the coefficient in (−Δ)^s U = c U^{p−1}.
    SmallC,
    /// γ_{N,s}, the Green's function normalization.
    Gamma,
    D,
    /// A_{N,s} = ∫ U^p.
    BigA,
    /// a_k = ∫ U^{p−k}; a_1 is a_{N,s}.
    Ak(u32),
    SmallB,
    Alpha,
    /// B_{N,s} = ∫ U^{p−2} (∂_λU)².
    BigB,
    Delta,
    Sigma,
}

impl ConstantName {
    pub const ALL: [ConstantName; 13] = [
        ConstantName::S,
        ConstantName::BigC,
        ConstantName::SmallC,
        ConstantName::Gamma,
        ConstantName::D,
        ConstantName::BigA,
        ConstantName::Ak(1),
        ConstantName::Ak(2),
        ConstantName::SmallB,
        ConstantName::Alpha,
        ConstantName::BigB,
        ConstantName::Delta,
        ConstantName::Sigma,
    ];

    pub fn label(&self) -> String {
        match self {
            ConstantName::S => "S".into(),
            ConstantName::BigC => "C".into(),
            ConstantName::SmallC => "c".into(),
            ConstantName::Gamma => "gamma".into(),
            ConstantName::D => "d".into(),
            ConstantName::BigA => "A".into(),
            ConstantName::Ak(k) => format!("a_{k}"),
            ConstantName::SmallB => "b".into(),
            ConstantName::Alpha => "alpha".into(),
            ConstantName::BigB => "B".into(),
            ConstantName::Delta => "delta".into(),
            ConstantName::Sigma => "sigma".into(),
        }
    }

    pub fn has_quadrature(&self) -> bool {
        matches!(
            self,
            ConstantName::BigA
                | ConstantName::Ak(_)
                | ConstantName::SmallB
                | ConstantName::Alpha
                | ConstantName::BigB
                | ConstantName::Delta
        )
    }
}

/// The two printed forms of C_{N,s}, differing in where the factor s sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CVariant {
    SInNumerator,
    SInDenominator,
}

/// The form confirmed by the bubble equation (see `bubble::pde_residual`).
pub const C_VARIANT: CVariant = CVariant::SInNumerator;

pub fn big_c_variant(params: &Params, variant: CVariant) -> Result<f64> {
    let (n, s) = (params.nf(), params.s);
    let core = 4f64.powf(s) * gamma((n + 2.0 * s) / 2.0)? / (PI.powf(n / 2.0) * gamma(1.0 - s)?);
    Ok(match variant {
        CVariant::SInNumerator => s * core,
        CVariant::SInDenominator => core / s,
    })
}

/// Surface area of S^{N−1}; equals 2 for N = 1.
pub fn sphere_area(n: usize) -> f64 {
    let n = n as f64;
    2.0 * PI.powf(n / 2.0) / statrs::function::gamma::gamma(n / 2.0)
}

fn ak(params: &Params, k: u32) -> Result<f64> {
    let (n, s, k) = (params.nf(), params.s, k as f64);
    let num = n / 2.0 * (1.0 - k) + k * s;
    if num <= 0.0 {
        return Err(Error::Regime(format!("a_{k} needs k < N/(N−2s)")));
    }
    Ok(PI.powf(n / 2.0) * gamma(num)? / gamma(n / 2.0 * (2.0 - k) + k * s)?)
}

pub fn eval_constant(name: ConstantName, params: &Params) -> Result<f64> {
    let (n, s) = (params.nf(), params.s);
    let pi_half_n = PI.powf(n / 2.0);
    let four_s = 4f64.powf(s);
    match name {
        ConstantName::S => Ok(four_s
            * PI.powf(s)
            * gamma((n + 2.0 * s) / 2.0)?
            / gamma((n - 2.0 * s) / 2.0)?
            * (gamma(n / 2.0)? / gamma(n)?).powf(2.0 * s / n)),
        ConstantName::BigC => big_c_variant(params, C_VARIANT),
        ConstantName::SmallC => Ok(four_s * gamma((n + 2.0 * s) / 2.0)? / gamma((n - 2.0 * s) / 2.0)?),
        ConstantName::Gamma => Ok(four_s * pi_half_n * gamma(s)? / gamma((n - 2.0 * s) / 2.0)?),
        ConstantName::D => {
            params.require_low_dimensional()?;
            Ok(-gamma((n - 4.0 * s) / 2.0)? * gamma(s)?
                / (four_s * gamma((n - 2.0 * s) / 2.0)? * gamma(2.0 * s)?))
        }
        ConstantName::BigA => ak(params, 0),
        ConstantName::Ak(k) => ak(params, k),
        ConstantName::SmallB => {
            Ok(pi_half_n * gamma(2.0 * s)? * gamma(n / 2.0 - s)? / (gamma(n / 2.0)? * gamma(n / 2.0 + s)?))
        }
        ConstantName::Alpha => {
            let bracket = gamma(s)? / gamma(n / 2.0 - s)? - gamma(n / 2.0)? / gamma(n - 2.0 * s)?;
            Ok(pi_half_n / gamma(n / 2.0)? * gamma(n / 2.0 - 2.0 * s)? * bracket)
        }
        ConstantName::BigB => {
            let beta = params.beta();
            Ok(beta * beta * pi_half_n * gamma(n / 2.0)? / (gamma(n)? * (n + 1.0)))
        }
        ConstantName::Delta => Ok(4f64.powf(1.0 - s) * pi_half_n * gamma(1.0 - s)? / gamma(n / 2.0 + 1.0 - s)?),
        ConstantName::Sigma => {
            params.require_low_dimensional()?;
            let k = Constants::new(params)?;
            let combo = k.alpha + k.c * k.d()? * k.b;
            if combo <= 0.0 {
                return Err(Error::Regime(format!("α + c·d·b = {combo} is not positive")));
            }
            let e = 4.0 * s - n;
            Ok(k.a_big.powf(-(n - 2.0 * s) / n)
                * combo.powf(-(n - 2.0 * s) / e)
                * ((n - 2.0 * s) / (2.0 * s)).powf(2.0 * s / e)
                * e
                / (n - 2.0 * s))
        }
    }
}

/// Adaptive radial quadrature of the defining integral of `name`.
pub fn quadrature_constant(name: ConstantName, params: &Params, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let (n, s) = (params.nf(), params.s);
    let beta = params.beta();
    let area = sphere_area(params.n);
    // ∫_0^∞ (1+r²)^{−e} r^{m} dr
    let radial = |e: f64, m: f64| quad::semi_infinite(|r| (1.0 + r * r).powf(-e) * r.powf(m), tol);
    match name {
        ConstantName::BigA => Ok(area * radial(n, n - 1.0)?),
        ConstantName::Ak(k) => {
            ak(params, k)?;
            Ok(area * radial((params.p() - k as f64) * beta, n - 1.0)?)
        }
        ConstantName::SmallB => Ok(area * radial((n + 2.0 * s) / 2.0, 4.0 * s - 1.0)?),
        ConstantName::Alpha => Ok(area * quad::semi_infinite(|r| alpha_integrand(r, n, s), tol)?),
        ConstantName::BigB => {
            let v = quad::semi_infinite(|r| (1.0 - r * r).powi(2) * (1.0 + r * r).powf(-n - 2.0) * r.powf(n - 1.0), tol)?;
            Ok(area * beta * beta * v)
        }
        ConstantName::Delta => {
            // |S^{N−1}| ∫_0^π (2 sin(θ/2))^{2−N−2s} sin^{N−1}θ dθ, θ measured from the pole.
            // The integrand is θ^{1−2s} g(θ) with g(0) = 1; the pure power is integrated
            // exactly so that s → 1 stays resolvable.
            let e = 1.0 - 2.0 * s;
            let rem = quad::tanh_sinh(
                |th, rest| {
                    let sin_th = if th <= rest { th.sin() } else { rest.sin() };
                    let log_g = (2.0 - n - 2.0 * s) * (2.0 * (th / 2.0).sin() / th).ln() + (n - 1.0) * (sin_th / th).ln();
                    th.powf(e) * log_g.exp_m1()
                },
                PI,
                tol,
            )?;
            let v = rem + PI.powf(e + 1.0) / (e + 1.0);
            Ok(area * v)
        }
        other => Err(Error::InvalidParams(format!("{} has no integral definition", other.label()))),
    }
}

/// r^{N−1} U_{0,1}(r) h(r) with U h written so that the leading decay of the
/// two terms cancels analytically at large r.
pub fn alpha_integrand(r: f64, n: f64, s: f64) -> f64 {
    let beta = (n - 2.0 * s) / 2.0;
    if r <= 1.0 {
        (1.0 + r * r).powf(-beta) * r.powf(2.0 * s - 1.0) - (1.0 + r * r).powf(-2.0 * beta) * r.powf(n - 1.0)
    } else {
        // r^{4s−N−1} [(1+r^{−2})^{−β} − (1+r^{−2})^{−2β}]
        let l = (r * r).recip().ln_1p();
        r.powf(4.0 * s - n - 1.0) * (-beta * l).exp() * -(-beta * l).exp_m1()
    }
}

/// Γ(l + N/2 + s)/Γ(l + N/2 − s), eigenvalues of the Paneitz operator on S^N.
pub fn paneitz_eigenvalue(l: u32, params: &Params) -> f64 {
    let x = l as f64 + params.nf() / 2.0;
    (statrs::function::gamma::ln_gamma(x + params.s) - statrs::function::gamma::ln_gamma(x - params.s)).exp()
}

/// 2 Γ(N) Γ(1/2) / (Γ((N+1)/2) Γ(N/2)), which equals 2^N.
pub fn gamma_identity_2n(n: u32) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let n = n as f64;
    2.0 * (ln_gamma(n) + ln_gamma(0.5) - ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
}

/// All constants for one (N, s), evaluated once.  Constants that are
/// undefined in the regime are stored as `None`.
#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub params: Params,
    pub s_sob: f64,
    pub big_c: Option<f64>,
    pub c: f64,
    pub gamma: f64,
    pub a_big: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub b_big: f64,
    d: Option<f64>,
}

impl Constants {
    pub fn new(params: &Params) -> Result<Self> {
        let get = |n| eval_constant(n, params);
        Ok(Self {
            params: *params,
            s_sob: get(ConstantName::S)?,
            big_c: get(ConstantName::BigC).ok(),
            c: get(ConstantName::SmallC)?,
            gamma: get(ConstantName::Gamma)?,
            a_big: get(ConstantName::BigA)?,
            a: get(ConstantName::Ak(1))?,
            b: get(ConstantName::SmallB)?,
            alpha: get(ConstantName::Alpha)?,
            b_big: get(ConstantName::BigB)?,
            d: get(ConstantName::D).ok(),
        })
    }

    pub fn d(&self) -> Result<f64> {
        self.d.ok_or_else(|| Error::Regime("d is only defined for N < 4s".into()))
    }

    /// A^{−(N−2s)/N}, the prefactor of every correction in the quotient expansion.
    pub fn quotient_prefactor(&self) -> f64 {
        let p = &self.params;
        self.a_big.powf(-(p.nf() - 2.0 * p.s) / p.nf())
    }

    /// α + c·d·b.
    pub fn alpha_cdb(&self) -> Result<f64> {
        Ok(self.alpha + self.c * self.d()? * self.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lattice() -> Vec<Params> {
        [(1, 0.30), (1, 0.35), (2, 0.60), (3, 0.90), (3, 1.0 - 1e-9)]
            .iter()
            .map(|&(n, s)| Params::new(n, s).unwrap())
            .collect()
    }

    #[test]
    fn sobolev_constant_classical_case() {
        let p = Params::new(3, 1.0).unwrap();
        let expect = 3.0 * (PI / 2.0).powf(4.0 / 3.0);
        assert_relative_eq!(eval_constant(ConstantName::S, &p).unwrap(), expect, max_relative = 1e-13);
        assert_relative_eq!(
            eval_constant(ConstantName::BigA, &p).unwrap(),
            PI.powf(1.5) * gamma(1.5).unwrap() / gamma(3.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn product_identities_on_lattice() {
        for p in lattice() {
            let get = |n| eval_constant(n, &p).unwrap();
            let (c, a, a_big) = (get(ConstantName::SmallC), get(ConstantName::Ak(1)), get(ConstantName::BigA));
            assert_relative_eq!(get(ConstantName::Gamma), c * a, max_relative = 1e-10);
            assert_relative_eq!(get(ConstantName::S), c * a_big.powf(2.0 * p.s / p.nf()), max_relative = 1e-10);
        }
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for p in lattice() {
            for name in [
                ConstantName::BigA,
                ConstantName::Ak(1),
                ConstantName::SmallB,
                ConstantName::Alpha,
                ConstantName::BigB,
                ConstantName::Delta,
            ] {
                let Ok(closed) = eval_constant(name, &p) else { continue };
                let q = quadrature_constant(name, &p, 1e-8).unwrap_or_else(|e| panic!("{name:?} {p:?} {e}"));
                assert_relative_eq!(q, closed, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn spec_quadrature_examples() {
        let cases = [(ConstantName::BigA, 3, 1.0), (ConstantName::Alpha, 1, 0.35), (ConstantName::Ak(1), 3, 0.9)];
        for (name, n, s) in cases {
            let p = Params::new(n, s).unwrap();
            assert_relative_eq!(
                quadrature_constant(name, &p, 1e-8).unwrap(),
                eval_constant(name, &p).unwrap(),
                max_relative = 1e-7
            );
        }
    }

    #[test]
    fn a_k_validity_range() {
        let p = Params::new(1, 0.35).unwrap(); // N/(N−2s) = 10/3
        assert!(eval_constant(ConstantName::Ak(3), &p).is_ok());
        assert!(matches!(eval_constant(ConstantName::Ak(4), &p), Err(Error::Regime(_))));
    }

    #[test]
    fn frozen_values() {
        // Independent high-precision evaluation of the Gamma expressions.
        let p = Params::new(1, 0.35).unwrap();
        let get = |n| eval_constant(n, &p).unwrap();
        assert_relative_eq!(get(ConstantName::S), 0.64745582397951377_f64, max_relative = 1e-8);
        assert_relative_eq!(get(ConstantName::D), 1.1299741641080838_f64, max_relative = 1e-8);
        assert_relative_eq!(get(ConstantName::Alpha), 1.0661584744686586_f64, max_relative = 1e-8);
    }

    #[test]
    fn d_and_sigma_regimes() {
        assert!(matches!(eval_constant(ConstantName::D, &Params::new(3, 0.7).unwrap()), Err(Error::Regime(_))));
        assert!(matches!(eval_constant(ConstantName::Sigma, &Params::new(2, 0.4).unwrap()), Err(Error::Regime(_))));
    }

    #[test]
    fn pole_in_big_c_at_s_one() {
        assert!(matches!(eval_constant(ConstantName::BigC, &Params::new(3, 1.0).unwrap()), Err(Error::Pole(_))));
    }

    #[test]
    fn gamma_identity_is_power_of_two() {
        assert_eq!(gamma_identity_2n(1), 2.0);
        for n in 1..=20u32 {
            assert_relative_eq!(gamma_identity_2n(n), 2f64.powi(n as i32), max_relative = 1e-10);
        }
    }

    #[test]
    fn paneitz_examples() {
        let p = Params::new(1, 0.35).unwrap();
        let l: Vec<f64> = (0..4).map(|l| paneitz_eigenvalue(l, &p)).collect();
        assert!(l[0] < l[1] && l[1] < l[2]);
        for k in 0..3 {
            let x = k as f64 + 0.5;
            assert_relative_eq!(l[k + 1] / l[k], (x + 0.35) / (x - 0.35), max_relative = 1e-12);
        }
        let tiny = Params::new(2, 1e-9).unwrap();
        assert_relative_eq!(paneitz_eigenvalue(0, &tiny), 1.0, max_relative = 1e-8);
    }

    proptest! {
        #[test]
        fn d_positive_and_identities(n in 1usize..4, frac in 0.01f64..0.99) {
            // s ∈ (N/4, min(1, N/2)) keeps 2s < N < 4s
            let lo = n as f64 / 4.0;
            let hi = (n as f64 / 2.0).min(1.0);
            let s = lo + frac * (hi - lo);
            prop_assume!(s < hi - 1e-6 && s > lo + 1e-6);
            let p = Params::new(n, s).unwrap();
            prop_assert!(eval_constant(ConstantName::D, &p).unwrap() > 0.0);
            let k = Constants::new(&p).unwrap();
            prop_assert!((k.gamma - k.c * k.a).abs() <= 1e-10 * k.gamma);
            // σ carries exponents ∝ 1/(4s−N) and leaves f64 range as N → 4s
            if p.refined_regime() && 4.0 * s - p.nf() > 0.1 {
                prop_assert!(eval_constant(ConstantName::Sigma, &p).unwrap() > 0.0);
            }
        }

        #[test]
        fn paneitz_strictly_increasing(n in 1usize..6, frac in 0.01f64..0.99, l in 0u32..40) {
            let s = frac * (n as f64 / 2.0).min(1.0);
            let p = Params::new(n, s).unwrap();
            prop_assert!(paneitz_eigenvalue(l + 1, &p) > paneitz_eigenvalue(l, &p));
        }
    }
}
