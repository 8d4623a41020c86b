use circkep::charts::{chart_field_eval, hamiltonian, ChartId};
use circkep::equilibria::{critical_interior_equilibrium, equilibria_for};
use circkep::integrator::{integrate, Constrained, IntegrationConfig};
use circkep::model::CartesianState;
use circkep::regime::{observe_regime, predicted_regime, simulate_outcome, standard_ic, LabConfig, OmegaVerdict, Regime};
use circkep::verification::scaling_deviation;
use circkep::Params;
use proptest::prelude::*;

#[test]
fn gamma_neg_slice_conserves_energy() {
    let p = Params::new(0.5, 0.75, 0.3).unwrap();
    let field = move |_: f64, y: &[f64; 5]| chart_field_eval(ChartId::GammaNeg, &p, y);
    let sys = Constrained { field, nonnegative: &[2] };
    let cfg = IntegrationConfig::until(100.0).with_tolerances(1e-12, 1e-14);
    let tr = integrate(&sys, [1.4, 0.3, 0.0, 0.0, 0.0], &cfg, &[]);
    assert!(tr.termination.is_success());
    let h0 = hamiltonian(1.4, 0.3).h;
    let drift = tr.samples.iter().map(|(_, y)| (hamiltonian(y[0], y[1]).h - h0).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-8, "drift {drift:e}");
}

#[test]
fn scaling_needs_the_critical_line() {
    let u0 = CartesianState::new([1.0, 0.0], [0.0, 0.9]);
    let critical = Params::new(1.0, 1.0, 0.3).unwrap();
    assert!(scaling_deviation(&critical, u0, 4.0, 0.125, &[0.5]) < 1e-6);
    let off = Params::new(0.0, 1.0, 0.3).unwrap();
    assert!(scaling_deviation(&off, u0, 4.0, 0.125, &[0.5]) > 1e-3);
}

#[test]
fn equilibria_are_stationary() {
    for (a, b, d) in [(0.0, 1.0, 0.1), (1.0, 2.0, 0.5), (0.0, 3.0, 0.2), (1.0, 1.0, 0.2), (1.0, 1.0, 0.8), (0.0, 1.5, 1.0)] {
        let p = Params::new(a, b, d).unwrap();
        for r in equilibria_for(&p).unwrap().iter().filter(|r| r.exists) {
            assert!(r.residual < 1e-10, "({a},{b},{d}) {:?}: {}", r.chart, r.residual);
        }
    }
}

#[test]
fn critical_interior_exists_below_half() {
    for (d, exists) in [(0.1, true), (0.49, true), (0.5, false), (0.9, false)] {
        let p = Params::new(1.0, 1.0, d).unwrap();
        let r = critical_interior_equilibrium(&p).unwrap();
        assert_eq!(r.exists, exists, "δ = {d}");
        if exists {
            assert!((r.extras.ecc_sq.unwrap() - 4.0 * d * d).abs() < 1e-12);
        }
    }
}

#[test]
fn circularizing_runs_have_finite_collision_time() {
    let lab = LabConfig::default();
    for (a, b, d) in [(0.0, 1.0, 0.3), (0.5, 0.5, 0.2), (2.0, 0.25, 0.1)] {
        let p = Params::new(a, b, d).unwrap();
        let r = simulate_outcome(&p, &standard_ic(0.9), &lab).unwrap();
        assert_eq!(r.regime_observed, Some(Regime::Circularizing), "({a},{b},{d})");
        assert!(matches!(r.omega, OmegaVerdict::Finite { .. }));
        // the verdict gates the classification
        let mut r2 = r.clone();
        r2.omega = OmegaVerdict::Infinite;
        assert_eq!(observe_regime(&p, &r2), None);
    }
}

proptest! {
    #[test]
    fn delta_only_moves_the_critical_split(a in 0.0f64..4.0, b in 0.0f64..4.0, d1 in 0.01f64..5.0, d2 in 0.01f64..5.0) {
        prop_assume!(a + b > 0.0);
        let (p1, p2) = (Params::new(a, b, d1).unwrap(), Params::new(a, b, d2).unwrap());
        let (r1, r2) = (predicted_regime(&p1), predicted_regime(&p2));
        if p1.gamma() != 0.0 {
            prop_assert_eq!(r1, r2);
        } else {
            prop_assert_eq!(r1 == r2, (d1 < 0.5) == (d2 < 0.5));
        }
    }
}
