#![allow(dead_code)]

use std::sync::Arc;

use fbn_core::grid::{Domain, DomainGrid, Grading};
use fbn_core::Params;

pub fn p1() -> Params {
    Params::new(1, 0.35).unwrap()
}

/// Unit interval graded toward the boundary and the given foci.
pub fn graded(foci: &[(f64, f64)], h_max: f64, growth: f64) -> Arc<DomainGrid> {
    let g = Grading { h_max, h_boundary: 1e-3, foci: foci.to_vec(), growth };
    Arc::new(DomainGrid::graded(Domain::unit_ball(1), &g).unwrap())
}
