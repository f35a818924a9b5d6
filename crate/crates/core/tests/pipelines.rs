use qwalk_core::continuum::{convergence_study, DiracParams};
use qwalk_core::mechanics::{cyclic_momentum_check, run_extended, run_symplectic, ExtendedConfig, Potential};
use qwalk_core::WalkError;
use std::f64::consts::FRAC_PI_2;

#[test]
fn continuum_error_halves_with_epsilon() {
    let table = convergence_study(0.5, FRAC_PI_2, 2.0, &[0.05, 0.025, 0.0125]).unwrap();
    assert!(!table.exact);
    for w in table.rows.windows(2) {
        let ratio = w[0].error / w[1].error;
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }
    assert!((table.order - 1.0).abs() < 0.1);
}

#[test]
fn massless_walk_is_exact() {
    let table = convergence_study(0.0, FRAC_PI_2, 2.0, &[0.05, 0.025, 0.0125]).unwrap();
    assert!(table.exact);
    assert!(table.rows.iter().all(|r| r.error < 1e-10));
}

#[test]
fn continuum_rejects_bad_parameters() {
    assert!(DiracParams::new(1.0, -0.1, 2.0, 1.0).is_err());
    assert!(convergence_study(1.0, FRAC_PI_2, 1.0, &[0.01]).is_err());
}

#[test]
fn extended_free_particle_keeps_pi() {
    let traj = run_extended(0.6, 0.8, 0.1, 300, &Potential::free(), &ExtendedConfig::default()).unwrap();
    let rep = cyclic_momentum_check(&traj, &Potential::free());
    assert!(rep.max_delta_big_pi.unwrap() < 1e-10);
    assert!(traj.t.as_ref().unwrap().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn extended_rejects_nonpositive_step() {
    let err = run_extended(0.0, 1.0, 0.0, 10, &Potential::free(), &ExtendedConfig::default()).unwrap_err();
    assert!(matches!(err, WalkError::NonPositiveTimeStep(_)));
}

#[test]
fn harmonic_energy_stays_bounded() {
    let phi = Potential::harmonic(0.5);
    let run = run_symplectic(1.0, 0.0, &phi, 20_000);
    let h = run.hamiltonian(&phi);
    let spread = h.iter().cloned().fold(f64::MIN, f64::max) - h.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.5, "spread {spread}");
}
