//! P1 finite elements for the restricted fractional Laplacian on an interval.
//!
//! For continuous piecewise-linear u, v vanishing outside Ω the energy
//!
//!   a(u,v) = (C_{1,s}/2) ∬ (u(x)−u(y))(v(x)−v(y)) / |x−y|^{1+2s}
//!
//! reduces to a finite sum over the slope jumps σ_k, τ_l of u and v:
//! a(u,v) = Σ_k Σ_l σ_k τ_l c_R |x_k − x_l|^{3−2s}, the Riesz potential of
//! order 4−2s applied to the jumps.  That sum cancels badly for distant pairs,
//! which are instead integrated directly as −C ∬ φ_i φ_j |x−y|^{−1−2s}.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constants::{eval_constant, ConstantName};
use crate::error::{Error, Result};
use crate::grid::{DomainGrid, GridFunction};
use crate::linalg;
use crate::params::Params;
use crate::quad;
use crate::special::gamma;

/// Largest neighbour-cell ratio the assembly accepts.
pub const MAX_CELL_RATIO: f64 = 4.0;

/// Gauss points per cell for mass, load and L^p integrals.
pub const GAUSS_PER_CELL: usize = 5;

/// Stiffness matrix on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct StiffnessForm {
    pub grid: Arc<DomainGrid>,
    pub params: Params,
    pub matrix: DMatrix<f64>,
    points: Vec<(f64, f64, usize, f64)>,
}

// N = 1 forces s < 1/2, so Γ(s − 3/2) stays away from its pole at −1.
fn riesz_kernel(s: f64) -> Result<impl Fn(f64) -> f64> {
    let c_r = gamma(s - 1.5)? / (2f64.powf(4.0 - 2.0 * s) * std::f64::consts::PI.sqrt() * gamma(2.0 - s)?);
    Ok(move |r: f64| c_r * r.powf(3.0 - 2.0 * s))
}

pub fn assemble_stiffness(grid: Arc<DomainGrid>, params: &Params) -> Result<StiffnessForm> {
    params.require_interval()?;
    let ratio = grid.max_cell_ratio();
    if ratio > MAX_CELL_RATIO {
        return Err(Error::Grading(format!("neighbour cell ratio {ratio:.2} exceeds {MAX_CELL_RATIO}")));
    }
    let s = params.s;
    let big_c = eval_constant(ConstantName::BigC, params)?;
    let kern = riesz_kernel(s)?;
    let x = &grid.nodes;
    let m = grid.len() - 2;
    // Slope jumps of hat i (node index i+1) at its three nodes.
    let jumps = |i: usize| {
        let k = i + 1;
        let hl = x[k] - x[k - 1];
        let hr = x[k + 1] - x[k];
        [(k - 1, 1.0 / hl), (k, -1.0 / hl - 1.0 / hr), (k + 1, 1.0 / hr)]
    };
    let rule = quad::gl_rule(8);
    let far = |i: usize, j: usize| {
        let cells = |k: usize| [(x[k - 1], x[k], false), (x[k], x[k + 1], true)];
        let mut acc = 0.0;
        for (a0, a1, down_a) in cells(i + 1) {
            for (b0, b1, down_b) in cells(j + 1) {
                let (ha, hb) = (a1 - a0, b1 - b0);
                for (&ta, &wa) in rule.nodes.iter().zip(&rule.weights) {
                    let xa = 0.5 * (ta + 1.0);
                    let pa = if down_a { 1.0 - xa } else { xa };
                    let za = a0 + ha * xa;
                    for (&tb, &wb) in rule.nodes.iter().zip(&rule.weights) {
                        let xb = 0.5 * (tb + 1.0);
                        let pb = if down_b { 1.0 - xb } else { xb };
                        let zb = b0 + hb * xb;
                        acc += 0.25 * ha * hb * wa * wb * pa * pb * (za - zb).abs().powf(-1.0 - 2.0 * s);
                    }
                }
            }
        }
        -big_c * acc
    };
    let mut matrix = DMatrix::zeros(m, m);
    for i in 0..m {
        let ji = jumps(i);
        let (lo_i, hi_i) = (x[i], x[i + 2]);
        for j in i..m {
            let (lo_j, hi_j) = (x[j], x[j + 2]);
            let gap = (lo_j - hi_i).max(lo_i - hi_j);
            let support = (hi_i - lo_i).max(hi_j - lo_j);
            let v = if gap > 2.0 * support {
                far(i, j)
            } else {
                let jj = jumps(j);
                let mut acc = 0.0;
                for &(k, sk) in &ji {
                    for &(l, tl) in &jj {
                        acc += sk * tl * kern((x[k] - x[l]).abs());
                    }
                }
                acc
            };
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let points = grid.gauss_points(GAUSS_PER_CELL);
    Ok(StiffnessForm { grid, params: *params, matrix, points })
}

impl StiffnessForm {
    pub fn dofs(&self) -> usize {
        self.matrix.nrows()
    }

    /// Interior nodal values as a dof vector.
    pub fn dof_vector(&self, u: &GridFunction) -> Result<DVector<f64>> {
        if !u.grid.same_as(&self.grid) {
            return Err(Error::GridMismatch("function and stiffness form use different grids".into()));
        }
        Ok(DVector::from_column_slice(&u.values[1..u.values.len() - 1]))
    }

    pub fn grid_function(&self, v: &DVector<f64>) -> GridFunction {
        let mut values = Vec::with_capacity(v.len() + 2);
        values.push(0.0);
        values.extend(v.iter());
        values.push(0.0);
        GridFunction { grid: self.grid.clone(), values }
    }

    /// ‖(−Δ)^{s/2} u‖² = uᵀ K u.
    pub fn energy(&self, u: &GridFunction) -> Result<f64> {
        let v = self.dof_vector(u)?;
        Ok(v.dot(&(&self.matrix * &v)))
    }

    pub fn quadrature_points(&self) -> &[(f64, f64, usize, f64)] {
        &self.points
    }

    /// Values of the dof vector v at the quadrature points.
    pub fn at_points(&self, v: &DVector<f64>) -> Vec<f64> {
        let m = self.dofs();
        let val = |node: usize| if node == 0 || node > m { 0.0 } else { v[node - 1] };
        self.points.iter().map(|&(_, _, k, xi)| val(k) * (1.0 - xi) + val(k + 1) * xi).collect()
    }

    /// Weighted mass matrix ∫ q φ_i φ_j, with q given at the quadrature points.
    pub fn mass_with(&self, q: &[f64]) -> DMatrix<f64> {
        let m = self.dofs();
        let mut mass = DMatrix::zeros(m, m);
        for (&(_, w, k, xi), &qv) in self.points.iter().zip(q) {
            // cell k joins nodes k and k+1, i.e. dofs k−1 and k
            let phi = [(k, 1.0 - xi), (k + 1, xi)];
            for &(a, pa) in &phi {
                if a == 0 || a > m {
                    continue;
                }
                for &(b, pb) in &phi {
                    if b == 0 || b > m {
                        continue;
                    }
                    mass[(a - 1, b - 1)] += w * qv * pa * pb;
                }
            }
        }
        mass
    }

    /// Mass matrix weighted by a function of position.
    pub fn mass(&self, q: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let qv: Vec<f64> = self.points.iter().map(|p| q(p.0)).collect();
        self.mass_with(&qv)
    }

    /// Load vector ∫ f φ_i with f given at the quadrature points.
    pub fn load_with(&self, f: &[f64]) -> DVector<f64> {
        let m = self.dofs();
        let mut load = DVector::zeros(m);
        for (&(_, w, k, xi), &fv) in self.points.iter().zip(f) {
            if k >= 1 {
                load[k - 1] += w * fv * (1.0 - xi);
            }
            if k < m {
                load[k] += w * fv * xi;
            }
        }
        load
    }

    /// ∫ |v|^q over the quadrature points.
    pub fn lq_power(&self, v: &DVector<f64>, q: f64) -> f64 {
        self.at_points(v).iter().zip(&self.points).map(|(u, p)| p.1 * u.abs().powf(q)).sum()
    }

    /// First discrete Dirichlet eigenvalue of (−Δ)^s.
    pub fn first_eigenvalue(&self) -> Result<f64> {
        let mass = self.mass(|_| 1.0);
        linalg::smallest_gen_eigenvalue(&self.matrix, &mass)
    }
}
