use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and fractional order, with the derived critical exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub s: f64,
}

impl Params {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if !(s > 0.0 && s <= 1.0) || !s.is_finite() {
            return Err(Error::InvalidParams(format!("s = {s} not in (0,1]")));
        }
        if 2.0 * s >= n as f64 {
            return Err(Error::InvalidParams(format!("need 2s < N, got N = {n}, s = {s}")));
        }
        Ok(Self { n, s })
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Critical exponent 2N/(N−2s).
    pub fn p(&self) -> f64 {
        2.0 * self.nf() / (self.nf() - 2.0 * self.s)
    }

    /// ⌊2s/(N−2s)⌋, the number of Taylor terms surviving in the expansion tails.
    pub fn k_max(&self) -> usize {
        (2.0 * self.s / (self.nf() - 2.0 * self.s)).floor() as usize
    }

    /// (N−2s)/2, the decay exponent of the bubble.
    pub fn beta(&self) -> f64 {
        (self.nf() - 2.0 * self.s) / 2.0
    }

    pub fn low_dimensional(&self) -> bool {
        self.nf() < 4.0 * self.s
    }

    /// 8s/3 < N < 4s.
    pub fn refined_regime(&self) -> bool {
        8.0 * self.s / 3.0 < self.nf() && self.low_dimensional()
    }

    pub fn require_low_dimensional(&self) -> Result<()> {
        if self.low_dimensional() {
            Ok(())
        } else {
            Err(Error::Regime(format!("requires N < 4s (N = {}, s = {})", self.n, self.s)))
        }
    }

    pub fn require_interval(&self) -> Result<()> {
        if self.n == 1 {
            Ok(())
        } else {
            Err(Error::Regime(format!("grid pipeline is interval-only, got N = {}", self.n)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_exponents() {
        let p = Params::new(1, 0.35).unwrap();
        assert!((p.p() - 20.0 / 3.0).abs() < 1e-14);
        assert_eq!(p.k_max(), 2);
        assert!(p.refined_regime());
        let q = Params::new(3, 0.9).unwrap();
        assert_eq!(q.k_max(), 1);
        assert!(q.refined_regime());
        assert!(!Params::new(2, 0.9).unwrap().refined_regime());
        assert_eq!(Params::new(3, 1.0).unwrap().k_max(), 2);
    }

    #[test]
    fn rejects_supercritical_order() {
        assert!(Params::new(1, 0.5).is_err());
        assert!(Params::new(2, 0.0).is_err());
        assert!(Params::new(0, 0.2).is_err());
    }

    #[test]
    fn k_is_positive_iff_n_at_most_4s() {
        for &(n, s) in &[(1, 0.3), (2, 0.6), (3, 0.9), (3, 0.7), (4, 0.9), (5, 0.99)] {
            let p = Params::new(n, s).unwrap();
            assert_eq!(p.k_max() >= 1, p.nf() <= 4.0 * s, "({n},{s})");
        }
    }
}
