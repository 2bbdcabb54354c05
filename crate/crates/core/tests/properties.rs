use mmflow_core::calculus::{dpm, dual_norm, grad_sq, seminorm_mu};
use mmflow_core::generate::{cycle, grid_2d, path_grid_1d, random_euclidean};
use mmflow_core::heatflow::run_heat_flow;
use mmflow_core::hopflax::{evolve, global_lip};
use mmflow_core::transport::{c_transform, is_c_concave, solve_w2};
use mmflow_core::{CalculusKind, Functional, ProbMeasure, Space};
use proptest::prelude::*;

const KINDS: [CalculusKind; 2] = [CalculusKind::Quadratic, CalculusKind::Slope];

fn space(pick: u8) -> Space {
    match pick % 5 {
        0 => path_grid_1d(6).unwrap(),
        1 => cycle(7).unwrap(),
        2 => grid_2d(2).unwrap(),
        3 => random_euclidean(8, 2, 3).unwrap(),
        _ => random_euclidean(6, 1, 9).unwrap(),
    }
}

/// A space together with `count` per-point vectors drawn from `range`.
fn space_and(count: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = (Space, Vec<Vec<f64>>)> {
    any::<u8>().prop_flat_map(move |pick| {
        let s = space(pick);
        let n = s.len();
        (Just(s), prop::collection::vec(prop::collection::vec(range.clone(), n), count))
    })
}

fn measure(space: &Space, weights: &[f64]) -> ProbMeasure {
    ProbMeasure::normalized(space, weights).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn c_transform_is_idempotent_after_one_step((s, v) in space_and(1, -2.0..2.0)) {
        let phi_c = c_transform(&s, &v[0]);
        let again = c_transform(&s, &c_transform(&s, &phi_c));
        for (a, b) in phi_c.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(is_c_concave(&s, &phi_c, 1e-12).0);
    }

    #[test]
    fn transport_is_a_metric((s, v) in space_and(3, 0.0..1.0)) {
        prop_assume!(v.iter().all(|w| w.iter().sum::<f64>() > 1e-3));
        let m: Vec<_> = v.iter().map(|w| measure(&s, w)).collect();
        let ab = solve_w2(&s, &m[0], &m[1]).unwrap();
        let ba = solve_w2(&s, &m[1], &m[0]).unwrap();
        let bc = solve_w2(&s, &m[1], &m[2]).unwrap();
        let ac = solve_w2(&s, &m[0], &m[2]).unwrap();
        prop_assert!(ab.gap() <= 1e-9);
        prop_assert!(ab.slackness_residual(&s) <= 1e-8);
        prop_assert!((ab.w2 - ba.w2).abs() <= 1e-9);
        prop_assert!(ac.w2 <= ab.w2 + bc.w2 + 1e-9);
        prop_assert!(ab.w2 <= s.diameter() + 1e-12);
        let (ma, mb) = (m[0].masses(&s), m[1].masses(&s));
        for (got, want) in ab.coupling.first_marginal().iter().zip(&ma) {
            prop_assert!((got - want).abs() <= 1e-10);
        }
        for (got, want) in ab.coupling.second_marginal().iter().zip(&mb) {
            prop_assert!((got - want).abs() <= 1e-10);
        }
        prop_assert!(solve_w2(&s, &m[0], &m[0]).unwrap().w2 <= 1e-9);
    }

    #[test]
    fn hopf_lax_contracts_and_decreases((s, v) in space_and(1, -1.0..1.0), t in 0.01f64..2.0, c in -3.0f64..3.0) {
        let f = &v[0];
        let q = evolve(&s, f, t);
        let later = evolve(&s, f, 2.0 * t);
        let shifted = evolve(&s, &f.iter().map(|x| x + c).collect::<Vec<_>>(), t);
        for x in 0..s.len() {
            prop_assert!(q[x] <= f[x]);
            prop_assert!(later[x] <= q[x]);
            prop_assert!((shifted[x] - q[x] - c).abs() <= 1e-12);
        }
        prop_assert!(global_lip(&s, &q) <= 2.0 * global_lip(&s, f) + 1e-12);
    }

    #[test]
    fn gradient_modulus_is_homogeneous((s, v) in space_and(1, -1.0..1.0), alpha in -4.0f64..4.0, c in -2.0f64..2.0) {
        for kind in KINDS {
            let base = grad_sq(&s, kind, &v[0]);
            let scaled = grad_sq(&s, kind, &v[0].iter().map(|x| alpha * x + c).collect::<Vec<_>>());
            for (b, a) in base.iter().zip(&scaled) {
                prop_assert!((a - alpha * alpha * b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn one_sided_derivatives_are_ordered((s, v) in space_and(2, -1.0..1.0)) {
        for kind in KINDS {
            let d = dpm(&s, kind, &v[0], &v[1]).unwrap();
            let own = dpm(&s, kind, &v[1], &v[1]).unwrap();
            let sq = grad_sq(&s, kind, &v[1]);
            for x in 0..s.len() {
                prop_assert!(d.minus[x] <= d.plus[x] + d.certificate[x] + 1e-10);
                prop_assert!((own.plus[x] - sq[x]).abs() <= own.certificate[x] + 1e-9 * (1.0 + sq[x]));
                prop_assert!((own.minus[x] - sq[x]).abs() <= own.certificate[x] + 1e-9 * (1.0 + sq[x]));
            }
        }
    }

    #[test]
    fn dual_norm_bounds_the_functional((s, v) in space_and(3, 0.0..1.0)) {
        prop_assume!(v[0].iter().all(|w| *w > 0.05));
        let mu = measure(&s, &v[0]);
        let mean: f64 = v[1].iter().sum::<f64>() / s.len() as f64;
        let coeffs: Vec<f64> = v[1].iter().map(|x| x - mean).collect();
        let l = Functional { coeffs };
        let n = dual_norm(&s, CalculusKind::Quadratic, &l, &mu).unwrap();
        prop_assert!(n.exact);
        let f = &v[2];
        let seminorm = seminorm_mu(&s, CalculusKind::Quadratic, f, &mu);
        prop_assert!(l.apply(f).abs() <= n.norm * seminorm + 1e-9);
        let phi = n.potential.unwrap();
        let attained = l.apply(&phi);
        prop_assert!((attained - n.norm * n.norm).abs() <= 1e-8 * (1.0 + attained.abs()));
    }

    #[test]
    fn heat_flow_conserves_mass_and_orders((s, v) in space_and(1, 0.0..1.0)) {
        prop_assume!(v[0].iter().sum::<f64>() > 1e-3);
        let rho0 = measure(&s, &v[0]).density;
        let traj = run_heat_flow(&s, &rho0, 0.2, 0.01).unwrap();
        let (lo, hi) = rho0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        let eps = 4.0 * f64::EPSILON * hi;
        for (k, rho) in traj.densities.iter().enumerate() {
            prop_assert!((s.integrate(rho) - 1.0).abs() <= 1e-12);
            prop_assert!(rho.iter().all(|&r| r >= lo - eps && r <= hi + eps));
            if k > 0 {
                prop_assert!(traj.energies[k] <= traj.energies[k - 1] + 1e-12);
            }
        }
    }
}
