//! Model domains, graded 1D meshes and piecewise-linear grid functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// A model domain: a ball in R^N or an interval (the 1D ball).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Interval { a: f64, b: f64 },
}

impl Domain {
    pub fn unit_ball(n: usize) -> Self {
        Domain::Ball { center: vec![0.0; n], radius: 1.0 }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Domain::Ball { center, .. } => center.clone(),
            Domain::Interval { a, b } => vec![0.5 * (a + b)],
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            Domain::Ball { radius, .. } => *radius,
            Domain::Interval { a, b } => 0.5 * (b - a),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Interval { .. } => 1,
        }
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        crate::constants::sphere_area(n) / n as f64 * self.radius().powi(n as i32)
    }

    /// Distance to the boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let c = self.center();
        let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        self.radius() - r2.sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }

    /// 1D endpoints; only meaningful for one-dimensional domains.
    pub fn endpoints(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::Regime(format!("grids are one-dimensional, domain has N = {}", self.dim())));
        }
        match self {
            Domain::Interval { a, b } => Ok((*a, *b)),
            Domain::Ball { center, radius } => Ok((center[0] - radius, center[0] + radius)),
        }
    }
}

/// Mesh-size control: cells of size ≈ h_focus near each focus point (which is
/// always a node) and near the boundary, growing geometrically with the given
/// ratio up to h_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub h_max: f64,
    pub h_boundary: f64,
    pub foci: Vec<(f64, f64)>,
    pub growth: f64,
}

impl Grading {
    pub fn uniform(h: f64) -> Self {
        Self { h_max: h, h_boundary: h, foci: vec![], growth: 0.2 }
    }

    fn size_at(&self, x: f64, a: f64, b: f64) -> f64 {
        let d = (x - a).min(b - x).max(0.0);
        let mut h = self.h_max.min(self.h_boundary + self.growth * d);
        for &(c, hc) in &self.foci {
            h = h.min(hc + self.growth * (x - c).abs());
        }
        h
    }
}

/// A one-dimensional mesh of a model domain.  Nodes include both endpoints;
/// weights are the lumped (trapezoidal) P1 weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainGrid {
    pub domain: Domain,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub boundary_distance: Vec<f64>,
}

impl DomainGrid {
    pub fn from_nodes(domain: Domain, mut nodes: Vec<f64>) -> Result<Self> {
        let (a, b) = domain.endpoints()?;
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        if nodes.len() < 3 || nodes[0] != a || *nodes.last().unwrap() != b {
            return Err(Error::Grading("nodes must include both endpoints and one interior node".into()));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        let boundary_distance = nodes.iter().map(|&x| (x - a).min(b - x)).collect();
        Ok(Self { domain, nodes, weights, boundary_distance })
    }

    pub fn graded(domain: Domain, grading: &Grading) -> Result<Self> {
        let (a, b) = domain.endpoints()?;
        if !(grading.h_max > 0.0 && grading.h_boundary > 0.0 && grading.growth > 0.0) {
            return Err(Error::Grading("mesh sizes and growth must be positive".into()));
        }
        let mut anchors = vec![a, b];
        for &(c, hc) in &grading.foci {
            if !(c > a && c < b) || hc <= 0.0 {
                return Err(Error::Grading(format!("focus {c} not interior or size {hc} not positive")));
            }
            anchors.push(c);
        }
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        let mut nodes = vec![a];
        for w in anchors.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            // March from both ends toward the middle so that both anchors are resolved.
            let mid = 0.5 * (lo + hi);
            let mut left = vec![lo];
            while *left.last().unwrap() < mid {
                let x = *left.last().unwrap();
                left.push(x + grading.size_at(x, a, b));
            }
            let mut right = vec![hi];
            while *right.last().unwrap() > mid {
                let x = *right.last().unwrap();
                right.push(x - grading.size_at(x, a, b));
            }
            // Drop the overshooting steps, then close the gap between the two
            // marches with cells comparable to their neighbours.
            left.pop();
            right.pop();
            let h_loc = grading.size_at(mid, a, b);
            let gap = |l: &Vec<f64>, r: &Vec<f64>| r.last().unwrap() - l.last().unwrap();
            while gap(&left, &right) < 0.5 * h_loc && left.len() > 1 {
                left.pop();
            }
            let g = gap(&left, &right);
            let pieces = (g / h_loc).round().max(1.0) as usize;
            let start = *left.last().unwrap();
            let mut seg: Vec<f64> = left;
            for k in 1..pieces {
                seg.push(start + g * k as f64 / pieces as f64);
            }
            seg.extend(right.into_iter().rev());
            nodes.extend_from_slice(&seg[1..]);
        }
        Self::from_nodes(domain, nodes)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.nodes.len() - 1
    }

    /// Index of the node closest to x.
    pub fn nearest_node(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v < x);
        if k == 0 {
            0
        } else if k >= self.nodes.len() {
            self.nodes.len() - 1
        } else if x - self.nodes[k - 1] <= self.nodes[k] - x {
            k - 1
        } else {
            k
        }
    }

    /// Index i with nodes[i] == x exactly.
    pub fn node_index(&self, x: f64) -> Result<usize> {
        let i = self.nearest_node(x);
        if self.nodes[i] == x {
            Ok(i)
        } else {
            Err(Error::Domain(format!("{x} is not a grid node")))
        }
    }

    /// Largest ratio between neighbouring cell sizes.
    pub fn max_cell_ratio(&self) -> f64 {
        let h: Vec<f64> = self.cells().map(|(a, b)| b - a).collect();
        h.windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).fold(1.0, f64::max)
    }

    pub fn min_cell(&self) -> f64 {
        self.cells().map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Gauss points and weights on every cell: (x, w, cell index, local coordinate in [0,1]).
    pub fn gauss_points(&self, per_cell: usize) -> Vec<(f64, f64, usize, f64)> {
        let rule = quad::gl_rule(per_cell);
        let mut out = Vec::with_capacity(per_cell * (self.len() - 1));
        for (k, (a, b)) in self.cells().enumerate() {
            let h = b - a;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let xi = 0.5 * (t + 1.0);
                out.push((a + h * xi, 0.5 * h * w, k, xi));
            }
        }
        out
    }

    pub fn same_as(&self, other: &DomainGrid) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

/// Piecewise-linear function on a grid, zero outside the domain.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<DomainGrid>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<DomainGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<DomainGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<DomainGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    /// Same as `from_fn` but forces zero Dirichlet values at the endpoints.
    pub fn from_fn_dirichlet(grid: Arc<DomainGrid>, f: impl Fn(f64) -> f64) -> Self {
        let mut g = Self::from_fn(grid, f);
        let n = g.values.len();
        g.values[0] = 0.0;
        g.values[n - 1] = 0.0;
        g
    }

    pub fn check_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("grid functions live on different grids".into()))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let nodes = &self.grid.nodes;
        let n = nodes.len();
        if x < nodes[0] || x > nodes[n - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (a, b) = (nodes[k - 1], nodes[k]);
        let t = (x - a) / (b - a);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∫ |u|^q with `per_cell` Gauss points per cell (q = ∞ gives the sup norm).
    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.sup_norm();
        }
        self.lq_norm_on(q, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// L^q norm restricted to [lo, hi].
    pub fn lq_norm_on(&self, q: f64, lo: f64, hi: f64) -> f64 {
        let rule = quad::gl_rule(6);
        let mut acc = 0.0;
        for (k, (a, b)) in self.grid.cells().enumerate() {
            let (a2, b2) = (a.max(lo), b.min(hi));
            if b2 <= a2 {
                continue;
            }
            let (u0, u1) = (self.values[k], self.values[k + 1]);
            let h = b - a;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let x = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * t;
                let xi = (x - a) / h;
                acc += 0.5 * (b2 - a2) * w * (u0 + (u1 - u0) * xi).abs().powf(q);
            }
        }
        acc.powf(1.0 / q)
    }

    pub fn integral(&self) -> f64 {
        self.grid.cells().enumerate().map(|(k, (a, b))| 0.5 * (b - a) * (self.values[k] + self.values[k + 1])).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn axpy(&self, c: f64, other: &GridFunction) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn argmax_abs(&self) -> usize {
        (0..self.values.len()).max_by(|&i, &j| self.values[i].abs().total_cmp(&self.values[j].abs())).unwrap_or(0)
    }
}
