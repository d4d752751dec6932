use proptest::prelude::*;

use lipbarrier_core::barrier::{
    choose_delta_ring, compute_constants, ring_integral, verify_supersolution_l, BarrierSign, PrototypeBarrier,
    TrueBarrier,
};
use lipbarrier_core::geometry::{ExteriorBallDomain, Shape};
use lipbarrier_core::growth::{inverse_df, lookup, make_regularized};

fn regularized(name: &str, lambda_factor: f64, mu: f64) -> lipbarrier_core::growth::RegularizedGrowth {
    let g = lookup(name).unwrap();
    let lambda = g.lambda0().max(0.5) * lambda_factor;
    make_regularized(&g, lambda, mu).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn splice_is_c2_at_the_threshold(name in prop::sample::select(vec!["power_p2", "power_p3", "power_p4", "eta_log1"]), factor in 1.0f64..20.0) {
        let rg = regularized(name, factor, 0.0);
        let l = rg.lambda();
        let base = rg.base();
        prop_assert_eq!(rg.f_lambda(l), base.f(l));
        let e = 1e-7 * l;
        prop_assert!((rg.f_lambda(l + e) - base.f(l + e)).abs() <= 1e-12 * base.f(l).abs().max(1.0) + e * e * e * base.ddf(l).abs());
        prop_assert!((rg.df_lambda(l + e) - rg.df_lambda(l - e)).abs() <= 4.0 * e * base.ddf(l).abs() + 1e-12 * base.df(l).abs());
        prop_assert!((rg.ddf_lambda(l + e) - rg.ddf_lambda(l - e)).abs() <= 1e-5 * base.ddf(l).abs());
    }

    #[test]
    fn inverse_flux_undoes_flux(name in prop::sample::select(vec!["power_p2", "power_p4", "prototype", "eta_log2"]), factor in 1.0f64..10.0, mu in 0.0f64..1.0, s in 1e-3f64..1e3) {
        let rg = regularized(name, factor, mu);
        let back = inverse_df(&rg, rg.flux(s)).unwrap();
        prop_assert!((back - s).abs() <= 1e-10 * s.max(1.0), "{} -> {}", s, back);
    }

    #[test]
    fn coefficient_derivative_identity(name in prop::sample::select(vec!["power_p3", "power_p4", "eta_log1"]), factor in 1.0f64..10.0, s in 0.05f64..50.0) {
        let rg = regularized(name, factor, 0.0);
        prop_assume!((s / rg.lambda() - 1.0).abs() > 1e-3);
        let h = 1e-6 * s;
        let fd = (rg.a_lambda(s + h) - rg.a_lambda(s - h)) / (2.0 * h);
        let exact = rg.ddf_lambda(s) - rg.df_lambda(s) / s;
        prop_assert!((fd * s - exact).abs() <= 1e-6 * (rg.ddf_lambda(s).abs() + rg.a_lambda(s).abs()));
        prop_assert!((rg.da_lambda(s) * s - exact).abs() <= 1e-12 * exact.abs().max(1e-12));
    }

    #[test]
    fn splice_keeps_the_curvature_threshold(name in prop::sample::select(vec!["power_p2", "power_p4", "eta_log2"]), factor in 1.0f64..30.0, t in 0.0f64..12.0) {
        let rg = regularized(name, factor, 0.0);
        let base = rg.base();
        let g = base.lambda0().max(1e-3) * 10f64.powf(t / 2.0);
        let ratio = g.powf(2.0 - base.delta_growth()) * rg.ddf_lambda(g) / rg.df_lambda(g);
        prop_assert!(ratio >= 1.0 - 1e-9, "g = {}: {}", g, ratio);
    }

    #[test]
    fn upper_barrier_is_a_supersolution_above_the_threshold(
        name in prop::sample::select(vec!["power_p2", "power_p4", "eta_log2"]),
        factor in 1.0f64..8.0,
        big_k in 0.0f64..3.0,
        kr in 0.0f64..1.0,
        kt in 0.0f64..std::f64::consts::TAU,
        theta in 0.0f64..std::f64::consts::TAU,
        depth in 0.0f64..1.0,
        lower in any::<bool>(),
    ) {
        let rg = regularized(name, factor, 0.0);
        let base = rg.base();
        let bc = compute_constants(big_k, base.lambda0(), base.delta_growth(), 1.0, 0.0, 0.5, 2).unwrap();
        let proto = PrototypeBarrier::from_ring(0.5, 0.5 * bc.delta_max, 2).unwrap();
        // b(r) = q/(r − q) ≥ M  ⇔  r ≤ q (1 + 1/M)
        let r_top = proto.q() * (1.0 + 1.0 / bc.m);
        prop_assume!(r_top > 0.5);
        let r = 0.5 + (r_top - 0.5) * depth.max(1e-9);
        let k = [big_k * kr * kt.cos(), big_k * kr * kt.sin()];
        let tb = TrueBarrier {
            proto,
            k,
            c: 0.0,
            sign: if lower { BarrierSign::Lower } else { BarrierSign::Upper },
            threshold: bc.m,
        };
        let rep = verify_supersolution_l(&rg, &tb, [r * theta.cos(), r * theta.sin()]).unwrap();
        prop_assert!(rep.holds, "{:?}", rep);
    }

    #[test]
    fn chosen_delta_is_the_largest_feasible(target in 0.1f64..300.0, eta in 1e-4f64..0.2, r0 in 0.2f64..2.0) {
        let bc = compute_constants(1.0, 1.0, 0.5, 1.0, 1.0, r0, 2).unwrap();
        let delta = choose_delta_ring(&bc, r0, eta, 2, target).unwrap();
        prop_assert!(delta < bc.delta_max);
        prop_assert!(ring_integral(r0, eta, delta, 2).unwrap() >= target);
        let next = delta * (1.0 + 2f64.powi(-19));
        prop_assert!(next >= bc.delta_max || ring_integral(r0, eta, next, 2).unwrap() < target);
        if delta.is_normal() {
            // dyadic with at most 20 fraction bits
            prop_assert_eq!(delta.to_bits() & ((1u64 << 32) - 1), 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn star_patch_lies_between_the_two_spheres(t in 0.0f64..1.0, aspect in 1.0f64..2.0) {
        let dom = ExteriorBallDomain::new(Shape::Ellipse { a: aspect, b: 1.0 }, None).unwrap();
        let graph = dom.local_graph(dom.at_fraction(t).unwrap()).unwrap();
        let r0 = dom.r0();
        let r_max = 1.125 * r0;
        let patch = graph.star_patch(r_max).unwrap();
        prop_assert!(patch.eta > 0.0);
        for p in patch.interior_points(&graph, 12, 6).into_iter().chain(patch.outer_boundary_points(&graph, 33)) {
            let r = p[0].hypot(p[1]);
            prop_assert!(r >= r0 * (1.0 - 1e-12), "{:?}", p);
            prop_assert!(r <= r_max * (1.0 + 1e-12), "{:?}", p);
            let x = graph.frame.to_global(p);
            prop_assert!((x[0] / aspect).powi(2) + x[1] * x[1] <= 1.0 + 1e-12, "{:?} -> {:?}", p, x);
        }
    }
}
