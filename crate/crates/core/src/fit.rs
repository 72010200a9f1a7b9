//! Small regression helpers shared by the scaling studies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least-squares slope of y against x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least squares with column equilibration.  Returns the coefficients, the
/// condition number of the equilibrated design and the relative residual.
pub fn least_squares(design: &DMatrix<f64>, rhs: &DVector<f64>, max_cond: f64) -> Result<(DVector<f64>, f64, f64)> {
    let mut scaled = design.clone();
    let scales: Vec<f64> = (0..design.ncols())
        .map(|j| {
            let n = design.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    for (j, &sc) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(sc);
    }
    let svd = scaled.clone().svd(true, true);
    let (smax, smin) = svd.singular_values.iter().fold((0.0f64, f64::INFINITY), |(a, b), &v| (a.max(v), b.min(v)));
    let cond = smax / smin;
    if !(cond <= max_cond) {
        return Err(Error::IllConditionedFit(cond));
    }
    let mut coef = svd.solve(rhs, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    for (j, &sc) in scales.iter().enumerate() {
        coef[j] /= sc;
    }
    let resid = (design * &coef - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    Ok((coef, cond, resid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_line() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_power_law_coefficients() {
        let l: Vec<f64> = (0..8).map(|k| 2f64.powi(k + 3)).collect();
        let design = DMatrix::from_fn(l.len(), 3, |i, j| l[i].powf([0.0, -0.3, -0.7][j]));
        let rhs = DVector::from_iterator(l.len(), l.iter().map(|x| 2.0 + 0.5 * x.powf(-0.3) - 4.0 * x.powf(-0.7)));
        let (c, cond, res) = least_squares(&design, &rhs, 1e8).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10 && (c[1] - 0.5).abs() < 1e-8 && (c[2] + 4.0).abs() < 1e-8);
        assert!(cond > 1.0 && res < 1e-12);
        assert!(matches!(least_squares(&design, &rhs, 2.0), Err(Error::IllConditionedFit(_))));
    }
}
