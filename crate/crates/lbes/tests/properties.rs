//! Property suites for the numerical invariants that hold for arbitrary
//! inputs, not just the worked examples.

use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use lbes::bump::{chi1, chi2};
use lbes::core::{common_period, make_system, FieldFn, Rational, SimConfig, State};
use lbes::eslaws::law2_u;
use lbes::sim::integrate;

proptest! {
    #[test]
    fn chi1_stays_in_unit_interval(r in -1e6f64..1e6) {
        let v = chi1(r);
        prop_assert!((0.0..1.0).contains(&v));
        if r <= 0.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn chi2_bounds_and_symmetry(r in -10.0f64..11.0) {
        let v = chi2(r);
        prop_assert!((0.0..=1.0).contains(&v));
        let s = v + chi2(1.0 - r);
        prop_assert!((s - 1.0).abs() < 1e-12, "partition identity broke: {}", s);
    }

    #[test]
    fn common_period_is_exact_for_every_frequency(
        fracs in prop::collection::btree_set((1u64..=12, 1u64..=12), 1..5)
    ) {
        let freqs: Vec<Rational> = fracs
            .iter()
            .map(|&(p, q)| Rational::new(p, q).unwrap())
            .collect();
        // Reduction can collapse distinct fractions to the same rational;
        // dedup before the distinctness precondition applies.
        let mut unique = freqs.clone();
        unique.sort();
        unique.dedup();
        let t = common_period(&unique).unwrap();
        for f in &unique {
            // ω·T must be an integer multiple of 2π.
            let half_angle = f.to_f64() * t / 2.0;
            prop_assert!(half_angle.sin().abs() < 1e-12,
                "omega {} with T {} leaves sin {}", f, t, half_angle.sin());
        }
    }

    #[test]
    fn rational_string_round_trip(p in 1u64..10_000, q in 1u64..10_000) {
        let r = Rational::new(p, q).unwrap();
        let back: Rational = r.to_string().parse().unwrap();
        prop_assert_eq!(r, back);
    }

    #[test]
    fn law2_component_is_bounded(
        jval in -1e6f64..1e6,
        tau in 0.0f64..1e4,
        omega in 0.01f64..20.0,
        j in 1usize..=2
    ) {
        let u = law2_u(j, jval, tau, omega);
        prop_assert!(u.abs() <= (2.0 * omega).sqrt() + 1e-12);
    }

    #[test]
    fn trajectory_tau_consistency(
        eps in 0.05f64..1.0,
        tau0 in 0.0f64..10.0,
        x0 in -5.0f64..5.0,
        stride in 1usize..40
    ) {
        let f1: Arc<FieldFn> = Arc::new(|_x, tau| DVector::from_vec(vec![tau.sin()]));
        let f2: Arc<FieldFn> = Arc::new(|x, _tau| DVector::from_vec(vec![-0.3 * x[0]]));
        let sys = make_system(1, f1, f2, None, &[Rational::integer(1)], "prop").unwrap();
        let cfg = SimConfig {
            epsilon: eps,
            t_final: 1.0,
            steps_per_fast_period: 64,
            x0: State::new(vec![x0]).unwrap(),
            tau0,
            seed: 0,
            record_stride: stride,
        };
        let traj = integrate(&sys, &cfg).unwrap();
        let inv_eps2 = 1.0 / (eps * eps);
        prop_assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        for k in 0..traj.len() {
            let expect = tau0 + (traj.times()[k] - traj.times()[0]) * inv_eps2;
            let rel = (traj.taus()[k] - expect).abs() / (1.0 + expect.abs());
            prop_assert!(rel < 1e-9, "sample {}: rel err {}", k, rel);
        }
    }
}
