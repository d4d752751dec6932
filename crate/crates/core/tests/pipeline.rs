use std::sync::Arc;

use lipbarrier_core::barrier::build_barrier_pair;
use lipbarrier_core::geometry::{BoundaryData, ExteriorBallDomain, Shape};
use lipbarrier_core::growth::{make_regularized, GrowthKind};
use lipbarrier_core::solver::{lambda_fixed_point, triangulate, SolverOptions};
use lipbarrier_core::verify::*;

#[test]
fn flagship_disk_quartic_trig_trace() {
    let dom = ExteriorBallDomain::new(Shape::Disk { radius: 1.0 }, Some(0.5)).unwrap();
    let bd = BoundaryData::TrigTrace { amplitude: 0.3, mode: 2, phase: 0.0, radius: 1.0 };
    let g = GrowthKind::Power { p: 4.0 }.build("power_p4", 0.5).unwrap();
    let rg = make_regularized(&g, 4.0, 1e-3).unwrap();
    let at = dom.at_fraction(0.125).unwrap();
    let pair = build_barrier_pair(&rg, &dom, &bd, at).unwrap();
    let mesh = Arc::new(triangulate(&dom, 0.05).unwrap());
    let fp = lambda_fixed_point(&g, mesh, &bd, 1e-3, 4.0, 5, &SolverOptions::default()).unwrap();
    let sol = &fp.solution;
    let mp = verify_max_principle(sol, pair.norms.sup, 1.0);
    let gp = verify_gradient_principle(sol, 1.0);
    let sw = verify_sandwich(sol, &pair, &bd, 1.0).unwrap();
    let nd = verify_normal_derivative(sol, &pair, 1.0);
    assert!(mp.passed && gp.passed && sw.passed && nd.passed && fp.resolve_consistent);
}
