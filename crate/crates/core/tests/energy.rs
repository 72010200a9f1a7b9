mod common;

use std::sync::Arc;

use common::{graded, p1};
use fbn_core::constants::{eval_constant, ConstantName};
use fbn_core::energy::*;
use fbn_core::greens_ball::GreenTable;
use fbn_core::greens_potential::{GreenOperator, Potential, Profile};
use fbn_core::grid::{Domain, DomainGrid, Grading, GridFunction};
use fbn_core::stiffness::assemble_stiffness;

fn sweep(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

fn bump() -> Profile {
    Profile::GaussianBump { center: 0.0, width: 0.3, depth: 0.4 }
}

struct Critical {
    grid: Arc<DomainGrid>,
    op: GreenOperator,
    a: Potential,
}

/// Symmetric bump made critical; by symmetry inf φ_a sits at the centre.
fn critical_bump() -> Critical {
    let grid = graded(&[(0.0, 1e-8)], 0.03, 0.1);
    let g0 = GreenTable::ball(grid.clone(), &p1()).unwrap();
    let op = GreenOperator::new(&g0).unwrap();
    let a0 = Potential::from_profile(grid.clone(), bump());
    let c = op.critical_shift(&a0, 1e-9).unwrap();
    Critical { a: a0.shifted(c), grid, op }
}

#[test]
fn quotient_is_scale_invariant_and_rejects_zero() {
    let p = p1();
    let grid = Arc::new(DomainGrid::graded(Domain::unit_ball(1), &Grading::uniform(1.0 / 40.0)).unwrap());
    let k = assemble_stiffness(grid.clone(), &p).unwrap();
    let u = GridFunction::from_fn_dirichlet(grid.clone(), |x| (1.0 - x * x) * (1.0 + 0.3 * x));
    let a = Potential::from_profile(grid.clone(), bump());
    let v = Potential::constant(grid.clone(), 0.7);
    let q = quotient(&u, &a, &v, 0.2, &k).unwrap();
    for c in [-3.0, 1e-4, 250.0] {
        let qc = quotient(&u.scale(c), &a, &v, 0.2, &k).unwrap();
        assert!((qc / q - 1.0).abs() < 1e-12);
    }
    assert!(matches!(quotient(&GridFunction::zeros(grid), &a, &v, 0.2, &k), Err(fbn_core::Error::ZeroFunction)));
}

#[test]
fn projected_bubble_quotient_decreases_to_s_from_above() {
    let p = p1();
    let grid = graded(&[(0.0, 1e-7)], 0.03, 0.1);
    let g0 = GreenTable::ball(grid.clone(), &p).unwrap();
    let op = GreenOperator::new(&g0).unwrap();
    let sol = op.solve(&Potential::zero(grid.clone())).unwrap();
    let tf = TestFunctions::new(&sol, grid.node_index(0.0).unwrap()).unwrap();
    let s = eval_constant(ConstantName::S, &p).unwrap();
    let zero = Potential::zero(grid.clone());
    let gaps: Vec<f64> = sweep(6, 18).iter().map(|&l| tf.parts(l, &zero, false).unwrap().quotient(0.0) - s).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    // the gap decays like λ^{−(N−2s)}
    let ratio = gaps[gaps.len() - 1] / gaps[gaps.len() - 2];
    assert!((ratio / 2f64.powf(-0.3) - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn correction_lowers_the_quotient_for_critical_a() {
    let crit = critical_bump();
    let x = crit.grid.node_index(0.0).unwrap();
    assert!(crit.a.at_node(x) < 0.0);
    let sol = crit.op.solve(&crit.a).unwrap();
    let tf = TestFunctions::new(&sol, x).unwrap();
    let v = Potential::zero(crit.grid.clone());
    for lam in sweep(10, 16) {
        let psi = tf.parts(lam, &v, true).unwrap().quotient(0.0);
        let pu = tf.parts(lam, &v, false).unwrap().quotient(0.0);
        assert!(psi < pu, "λ = {lam}: {psi} vs {pu}");
    }
}

#[test]
fn expansion_recovers_phi_and_qv_coefficients() {
    let p = p1();
    let x0 = 0.2;
    let grid = graded(&[(x0, 1e-8)], 0.03, 0.1);
    let g0 = GreenTable::ball(grid.clone(), &p).unwrap();
    let op = GreenOperator::new(&g0).unwrap();
    let sol = op.solve(&Potential::zero(grid.clone())).unwrap();
    let tf = TestFunctions::new(&sol, grid.node_index(x0).unwrap()).unwrap();
    let v = Potential::constant(grid.clone(), -1.0);
    let basis = ExpansionBasis { tail_order: 6, mixed_order: 0 };
    let fit = expansion_fit(&tf, &v, 0.1, &sweep(8, 22), basis, 1e-6).unwrap();
    let s = eval_constant(ConstantName::S, &p).unwrap();
    assert!((fit.constant / s - 1.0).abs() < 5e-3);
    assert!((fit.coef_phi / fit.target_phi - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.coef_qv / fit.target_qv - 1.0).abs() < 0.10, "{fit:?}");
    assert_eq!(fit.coef_a, 0.0);
    assert_eq!(fit.tail_terms.iter().map(|t| t.0).collect::<Vec<_>>(), vec![2, 3, 4, 5, 6]);
    assert!(!fit.flagged && fit.condition < MAX_FIT_COND);
}

#[test]
fn expansion_recovers_a_coefficient_on_the_critical_set() {
    let crit = critical_bump();
    let x = crit.grid.node_index(0.0).unwrap();
    let sol = crit.op.solve(&crit.a).unwrap();
    let tf = TestFunctions::new(&sol, x).unwrap();
    let v = Potential::constant(crit.grid.clone(), -1.0);
    let basis = ExpansionBasis { tail_order: 2, mixed_order: 3 };
    let fit = expansion_fit(&tf, &v, 0.1, &sweep(8, 22), basis, 1e-5).unwrap();
    // φ_a(x) = 0: no tail, and the λ^{−(N−2s)} coefficient is negligible
    assert!(fit.tail_terms.is_empty());
    assert!(fit.coef_phi.abs() < 1e-2 * fit.target_a.abs());
    assert!((fit.coef_a / fit.target_a - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.coef_qv / fit.target_qv - 1.0).abs() < 0.10, "{fit:?}");
}

#[test]
fn short_sweeps_cannot_separate_exponents() {
    let crit = critical_bump();
    let sol = crit.op.solve(&crit.a).unwrap();
    let tf = TestFunctions::new(&sol, crit.grid.node_index(0.0).unwrap()).unwrap();
    let v = Potential::zero(crit.grid.clone());
    let basis = ExpansionBasis { tail_order: 2, mixed_order: 3 };
    assert!(matches!(
        expansion_fit(&tf, &v, 0.0, &[64.0], basis, 1e-5),
        Err(fbn_core::Error::IllConditionedFit(_))
    ));
    // adjacent λ cannot tell λ^{−0.3} from λ^{−0.7}
    let close: Vec<f64> = (0..8).map(|k| 1000.0 * (1.0 + 1e-3 * k as f64)).collect();
    assert!(matches!(expansion_fit(&tf, &v, 0.0, &close, basis, 1e-5), Err(fbn_core::Error::IllConditionedFit(_))));
}

#[test]
fn subcritical_shift_beats_s_and_critical_does_not() {
    let p = p1();
    let crit = critical_bump();
    let s = eval_constant(ConstantName::S, &p).unwrap();
    let zero = Potential::zero(crit.grid.clone());
    let x = crit.grid.node_index(0.0).unwrap();
    // pushed below criticality, φ_a(x) < 0 and ψ beats S at moderate λ
    let below = crit.a.shifted(-0.05);
    let sol = crit.op.solve(&below).unwrap();
    assert!(sol.robin(x).unwrap() < 0.0);
    let tf = TestFunctions::new(&sol, x).unwrap();
    assert!(sweep(4, 14).iter().any(|&l| tf.parts(l, &zero, true).unwrap().quotient(0.0) < s));
}

#[test]
fn degenerate_regime_never_beats_s() {
    let p = p1();
    let crit = critical_bump();
    let s = eval_constant(ConstantName::S, &p).unwrap();
    let sol = crit.op.solve(&crit.a).unwrap();
    let v = Potential::constant(crit.grid.clone(), 1.0);
    let sets = sol.zero_sets(&v, 1e-4).unwrap();
    assert!(!sets.n_a.is_empty() && sets.q_v.iter().all(|&q| q > 0.0));
    assert!(sets.n_a_v.is_empty());
    assert!(matches!(energy_gap_prediction(&sets, &crit.a, 0.1, &p), Err(fbn_core::Error::EmptySet(_))));
    let tol = 1e-6;
    for x0 in [0.0, 0.1, -0.3, 0.6] {
        let tf = TestFunctions::new(&sol, crit.grid.nearest_node(x0)).unwrap();
        for lam in sweep(4, 20) {
            let parts = tf.parts(lam, &v, true).unwrap();
            for eps in [0.0, 1e-3, 1e-2, 0.1] {
                assert!(parts.quotient(eps) > s - tol, "x = {x0}, λ = {lam}, ε = {eps}");
            }
        }
    }
}

#[test]
fn gap_prediction_agrees_with_optimal_lambda() {
    let p = p1();
    let crit = critical_bump();
    let sol = crit.op.solve(&crit.a).unwrap();
    let v = Potential::constant(crit.grid.clone(), -1.0);
    let sets = sol.zero_sets(&v, 1e-4).unwrap();
    let sup = gap_argsup(&sets, &crit.a, &p).unwrap().unwrap();
    assert!(sets.n_a_v.contains(&sup.node) && sup.refined >= sup.value);
    let consts = fbn_core::constants::Constants::new(&p).unwrap();
    let pref = consts.quotient_prefactor();
    let qv = sets.q_v[sets.n_a.iter().position(|&n| n == sup.node).unwrap()];
    let a_eps = -pref * consts.alpha_cdb().unwrap() * crit.a.at_node(sup.node);
    let b_eps = -pref * qv;
    let mut last = consts.s_sob;
    for eps in [1e-3, 1e-2, 0.1] {
        let opt = optimal_lambda(a_eps, b_eps, eps, &p).unwrap();
        let direct = gap_from_sup(sup.value, eps, &p).unwrap();
        assert!(((consts.s_sob + opt.min_value) - direct).abs() < 1e-12 * consts.s_sob, "{eps}");
        let pred = energy_gap_prediction(&sets, &crit.a, eps, &p).unwrap();
        assert!(pred < consts.s_sob && pred < last);
        last = pred;
    }
}
