use serde::Serialize;
use serde_json::json;

use qwalk_core::continuum::{convergence_study, extra_term_scaling, EXACT_TOL};
use qwalk_core::extended::{
    alternate_action, coordinate_gradients, functional_derivatives_from_gradients, onshell_energy_momentum_check,
    onshell_psi, sigma_terms, sigma_terms_from_gradients, CoordinateField, GradientSlot, SigmaTerms,
};
use qwalk_core::lorentz::dirac::{clifford_defect, dirac_lagrangian, max_table_dist, DiracSamples, DiracTriplet};
use qwalk_core::lorentz::{
    covariant_action, stress_energy_grid, stress_energy_in_frame, CovariantTerms, FrameSpec, TERM_NAMES,
};
use qwalk_core::mechanics::{
    cyclic_momentum_check, drift_identity_defect, run_extended, run_symplectic, ExtendedConfig, MechTrajectory,
    Potential,
};
use qwalk_core::observables::{
    charge_density, charge_residual_fields, energy_residual_fields, momentum_balance_residual, noether_charge_currents,
    noether_divergence, totals, totals_drift, ScalarField, Totals,
};
use qwalk_core::{evolve, CoinField, CoinSchedule, Component, Mat2, SpinorField, Trajectory, C64};

use crate::config::{CoinSpec, Experiment, InitialState, Polarization, PotentialSpec, RunSpec};
use crate::output::{complex, num, Artifacts};
use crate::{Check, Context, Report, RunError};

/// Tolerances for the exact discrete identities.
const ID_TOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-10;
const VOLUME_TOL: f64 = 1e-13;
const CLIFFORD_TOL: f64 = 1e-13;
const FD_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const ORDER_BOUND: f64 = 0.9;
const PI_TOL: f64 = 1e-10;
/// FD points per gradient slot in the extended experiment.
const FD_SAMPLES: usize = 48;

enum Coins {
    Field(CoinField),
    Schedule(CoinSchedule),
}

impl Coins {
    fn build(spec: &RunSpec) -> Result<Coins, RunError> {
        let n = spec.n_sites;
        Ok(match spec.coin {
            CoinSpec::Hadamard => Coins::Field(CoinField::uniform(n, Mat2::hadamard()).context("coin")?),
            CoinSpec::Identity => Coins::Field(CoinField::identity(n)),
            CoinSpec::Angles([a, b, c, d]) => {
                Coins::Field(CoinField::uniform(n, Mat2::from_angles(a, b, c, d)).context("coin")?)
            }
            CoinSpec::Random(seed) => Coins::Field(CoinField::random_haar(n, seed)),
            CoinSpec::RandomField(seed) => Coins::Field(CoinField::random_field(n, seed)),
            CoinSpec::Schedule(seed) => Coins::Schedule(CoinSchedule::random(n, spec.steps, seed)),
        })
    }

    fn field(self, experiment: Experiment) -> Result<CoinField, RunError> {
        match self {
            Coins::Field(c) => Ok(c),
            Coins::Schedule(_) => Err(RunError::Unsupported(format!(
                "the {} experiment needs a time-independent coin, not a schedule",
                experiment.name()
            ))),
        }
    }
}

fn initial_state(spec: &RunSpec) -> Result<SpinorField, RunError> {
    let n = spec.n_sites;
    let comp = |c: Polarization| match c {
        Polarization::Minus => Component::Minus,
        Polarization::Plus => Component::Plus,
    };
    Ok(match spec.initial_state {
        InitialState::Delta { site, component } => SpinorField::delta(n, site.unwrap_or(n / 2), comp(component)),
        InitialState::PlaneWave { mode, component } => SpinorField::plane_wave(n, mode, comp(component)),
        InitialState::Gaussian { center, width, mode } => {
            let pol = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
            SpinorField::gaussian(n, center, width, mode, pol).context("initial state")?
        }
        InitialState::Random(seed) => SpinorField::random(n, seed),
    })
}

fn potential(spec: &RunSpec) -> Potential {
    match spec.potential {
        PotentialSpec::Free => Potential::free(),
        PotentialSpec::Constant(c) => Potential::constant(c),
        PotentialSpec::Harmonic(k) => Potential::harmonic(k),
        PotentialSpec::Quartic => Potential::quartic(),
    }
}

fn max_abs(fields: &[ScalarField]) -> f64 {
    fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
}

fn random_traj(n: usize, len: usize, seed: u64) -> Trajectory {
    Trajectory::new((0..len as u64).map(|k| SpinorField::random(n, seed * 97 + k)).collect())
        .expect("slices share one size")
}

pub fn run(spec: &RunSpec) -> Result<Report, RunError> {
    let mut out = Artifacts::create(&spec.output_path)?;
    let checks = match spec.experiment {
        Experiment::Simulate => simulate(spec, &mut out)?,
        Experiment::Conserve => conserve(spec, &mut out)?,
        Experiment::Extended => extended(spec, &mut out)?,
        Experiment::Lorentz => lorentz(spec, &mut out)?,
        Experiment::Continuum => continuum(spec, &mut out)?,
        Experiment::Mechanics => mechanics(spec, &mut out)?,
    };
    let mut report = Report { experiment: spec.experiment.name(), checks, artifacts: Vec::new() };
    out.json("checks.json", &report)?;
    report.artifacts = out.written;
    Ok(report)
}

fn write_totals(out: &mut Artifacts, totals: &[Totals]) -> Result<(), RunError> {
    let rows = totals.iter().enumerate().map(|(j, t)| {
        vec![j.to_string(), num(t.charge), num(t.energy.re), num(t.energy.im), num(t.momentum.re), num(t.momentum.im)]
    });
    out.csv("totals.csv", &["j", "charge", "energy_re", "energy_im", "momentum_re", "momentum_im"], rows)
}

fn evolve_any(spec: &RunSpec, coins: &Coins) -> Result<(Trajectory, Vec<Totals>), RunError> {
    let init = initial_state(spec)?;
    let (traj, tot) = match coins {
        Coins::Field(c) => {
            let t = evolve(&init, c, spec.steps).context("evolve")?;
            let tot = totals(&t, c).context("totals")?;
            (t, tot)
        }
        Coins::Schedule(s) => {
            let t = evolve(&init, s, spec.steps).context("evolve")?;
            let tot = totals(&t, s).context("totals")?;
            (t, tot)
        }
    };
    Ok((traj, tot))
}

fn simulate(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let coins = Coins::build(spec)?;
    let (traj, tot) = evolve_any(spec, &coins)?;
    let density: Vec<ScalarField> = traj.slices().iter().map(charge_density).collect();
    out.fields("density.csv", &density)?;
    write_totals(out, &tot)?;
    Ok(vec![Check::at_most("total_charge_drift", totals_drift(&tot).2, ID_TOL)])
}

fn conserve(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let coins = Coins::build(spec)?;
    let (traj, tot) = evolve_any(spec, &coins)?;
    let charge = charge_residual_fields(&traj);
    out.fields("charge_residual.csv", &charge)?;
    write_totals(out, &tot)?;
    let noether = match &coins {
        Coins::Field(c) => noether_divergence(&noether_charge_currents(&traj, c).context("noether currents")?),
        Coins::Schedule(s) => noether_divergence(&noether_charge_currents(&traj, s).context("noether currents")?),
    };
    let (e_drift, p_drift, q_drift) = totals_drift(&tot);
    let mut checks = vec![
        Check::at_most("charge_local", max_abs(&charge), ID_TOL),
        Check::at_most("charge_noether_divergence", max_abs(&noether), ID_TOL),
        Check::at_most("total_charge_drift", q_drift, ID_TOL),
    ];
    match &coins {
        Coins::Field(c) if c.is_homogeneous() => {
            let energy = energy_residual_fields(&traj, c).context("energy residual")?;
            out.fields("energy_residual.csv", &energy)?;
            checks.push(Check::at_most("energy_local", max_abs(&energy), ID_TOL));
            checks.push(Check::at_most("total_energy_drift", e_drift, ID_TOL));
            checks.push(Check::at_most("total_momentum_drift", p_drift, ID_TOL));
        }
        _ => {
            out.fields("energy_residual.csv", &[])?;
            let why = "energy and momentum are conserved only for homogeneous coins";
            checks.push(Check::skip("energy_local", why));
            checks.push(Check::skip("total_energy_drift", why));
            checks.push(Check::skip("total_momentum_drift", why));
        }
    }
    let balance = momentum_balance_residual(&traj).context("momentum balance")?;
    checks.push(Check::skip("momentum_local", format!("reported only, max residual {balance:.3e}")));
    Ok(checks)
}

fn sigma_json(s: &SigmaTerms) -> serde_json::Value {
    json!({
        "M1": complex(s.m1), "M2": complex(s.m2), "M3": complex(s.m3),
        "K_j": complex(s.k_j), "K_p": complex(s.k_p), "K_supp": complex(s.k_supp),
        "sigma": complex(s.sigma),
    })
}

fn extended(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let coin = Coins::build(spec)?.field(spec.experiment)?;
    let (n, j) = (spec.n_sites, spec.steps);
    let seed = match spec.initial_state {
        InitialState::Random(s) => s,
        _ => 1,
    };
    // Σ is an identity in the fields, so the off-shell pair is the stronger test.
    let (phi, psi) = (random_traj(n, j + 1, seed), random_traj(n, j, seed + 1));
    let grid = sigma_terms(&phi, &psi, &coin, &CoordinateField::grid(n, j)).context("sigma")?;
    let alt = alternate_action(&phi, &psi, &coin).context("alternate action")?;

    let w = 2.0 * std::f64::consts::PI / n as f64;
    let x = CoordinateField::affine(n, j, [[1.1, 0.2], [-0.3, 0.9]], [0.0; 2])
        .with_perturbation(|jj, p| [0.05 * (w * p as f64 + 0.3 * jj as f64).sin(), 0.04 * (w * p as f64).cos()]);
    let base = coordinate_gradients(&x).context("gradients")?;
    let d = functional_derivatives_from_gradients(&phi, &psi, &coin, &base).context("derivatives")?;
    let total = j * n;
    let stride = total.div_ceil(FD_SAMPLES).max(1);
    let mut fd_gap = 0.0f64;
    let mut rows = Vec::new();
    for (s, slot) in GradientSlot::ALL.into_iter().enumerate() {
        for idx in (0..total).step_by(stride) {
            let (jj, p) = (idx / n, idx % n);
            let at = |by: f64| -> Result<C64, RunError> {
                let mut g = base.clone();
                *g.slices[jj][p].slot_mut(slot) += by;
                Ok(sigma_terms_from_gradients(&phi, &psi, &coin, &g).context("sigma")?.sigma)
            };
            let fd = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
            let closed = d.slot(slot)[jj].get(p);
            fd_gap = fd_gap.max((fd - closed).norm());
            rows.push(vec![
                s.to_string(),
                jj.to_string(),
                p.to_string(),
                num(closed.re),
                num(closed.im),
                num(fd.re),
                num(fd.im),
            ]);
        }
    }
    out.csv("functional_derivatives.csv", &["slot", "j", "p", "closed_re", "closed_im", "fd_re", "fd_im"], rows)?;

    let onshell_phi = evolve(&SpinorField::random(n, seed + 2), &coin, j).context("evolve")?;
    let onshell = match onshell_energy_momentum_check(&onshell_phi, &coin) {
        Ok(r) => Some(r),
        Err(qwalk_core::WalkError::InhomogeneousCoin) => None,
        Err(e) => return Err(RunError::Walk { context: "on-shell check", source: e }),
    };
    out.json(
        "extended_report.json",
        &json!({
            "grid": sigma_json(&grid),
            "alternate_action": complex(alt),
            "fd_step": FD_STEP,
            "fd_points_per_slot": total.div_ceil(stride),
            "onshell": onshell,
        }),
    )?;

    let mut checks = vec![
        Check::at_most("sigma_grid_minus_alternate", (grid.sigma - alt).norm(), ID_TOL),
        Check::at_most("m2_on_grid", grid.m2.norm(), 0.0),
        Check::at_most("functional_derivative_fd", fd_gap, FD_TOL),
    ];
    checks.push(match onshell {
        Some(r) => Check::at_most("onshell_energy_momentum", r.max_discrepancy, ID_TOL),
        None => Check::skip("onshell_energy_momentum", "needs a homogeneous coin"),
    });
    Ok(checks)
}

fn terms_json(t: &CovariantTerms) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (name, v) in TERM_NAMES.iter().zip(t.as_array()) {
        m.insert(name.to_string(), json!(complex(v)));
    }
    m.insert("sigma_L".into(), json!(complex(t.sigma_l)));
    serde_json::Value::Object(m)
}

fn lorentz(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let coin = Coins::build(spec)?.field(spec.experiment)?;
    let (n, j, frame) = (spec.n_sites, spec.steps, spec.frame);
    let phi = evolve(&initial_state(spec)?, &coin, j).context("evolve")?;
    let psi = onshell_psi(&phi, &coin).context("on-shell psi")?;
    let (phi_r, psi_r) = (random_traj(n, j + 1, 3), random_traj(n, j, 4));
    let rest = covariant_action(&phi, &psi, &coin, &FrameSpec::identity()).context("covariant action")?;
    let moved = covariant_action(&phi, &psi, &coin, &frame).context("covariant action")?;
    let rest_r = covariant_action(&phi_r, &psi_r, &coin, &FrameSpec::identity()).context("covariant action")?;
    let moved_r = covariant_action(&phi_r, &psi_r, &coin, &frame).context("covariant action")?;
    let invariance = (moved.sigma_l - rest.sigma_l).norm().max((moved_r.sigma_l - rest_r.sigma_l).norm());

    let g =
        coordinate_gradients(&CoordinateField::grid(n, j).transformed(frame.coordinate_map())).context("gradients")?;
    let volume = g.slices.iter().flatten().map(|g| (g.delta() - 1.0).abs()).fold(0.0, f64::max);

    let mut stress_checks = Vec::new();
    match stress_energy_grid(&phi, &coin) {
        Ok(t) => {
            let tf = stress_energy_in_frame(&t, &frame).context("stress-energy transform")?;
            let mut rows = Vec::new();
            for lower in 0..2 {
                for upper in 0..2 {
                    for (jj, f) in tf.get(lower, upper).iter().enumerate() {
                        for (p, v) in f.values().iter().enumerate() {
                            rows.push(vec![
                                jj.to_string(),
                                p.to_string(),
                                lower.to_string(),
                                upper.to_string(),
                                num(v.re),
                                num(v.im),
                            ]);
                        }
                    }
                }
            }
            out.csv("stress_energy_frame.csv", &["j", "p", "lower", "upper", "re", "im"], rows)?;
            let [r0, r1] = tf.conservation_residuals();
            stress_checks.push(Check::at_most("stress_energy_frame_conservation", r0.max(r1), ID_TOL));
        }
        Err(qwalk_core::WalkError::InhomogeneousCoin) => {
            stress_checks.push(Check::skip("stress_energy_frame_conservation", "needs a homogeneous coin"));
        }
        Err(e) => return Err(RunError::Walk { context: "stress-energy", source: e }),
    }

    let samples = DiracSamples::random_smooth(24, 32, 0.05, 12).context("dirac samples")?;
    let l_rest = dirac_lagrangian(&samples, 1.0, &FrameSpec::identity()).context("dirac lagrangian")?;
    let l_moved = dirac_lagrangian(&samples, 1.0, &frame).context("dirac lagrangian")?;
    let dirac = max_table_dist(&l_rest, &l_moved);
    let clifford = clifford_defect(&DiracTriplet::standard(), &DiracTriplet::rescaled_basis(frame.lambda));

    out.json(
        "lorentz_report.json",
        &json!({
            "frame": frame,
            "onshell": { "rest": terms_json(&rest), "frame": terms_json(&moved) },
            "offshell": { "rest": terms_json(&rest_r), "frame": terms_json(&moved_r) },
            "max_volume_defect": volume,
            "dirac_lagrangian_gap": dirac,
            "clifford_defect": clifford,
        }),
    )?;

    let mut checks = vec![
        Check::at_most("sigma_l_invariance", invariance, INVARIANCE_TOL),
        Check::at_most("volume_element", volume, VOLUME_TOL),
    ];
    checks.extend(stress_checks);
    checks.push(Check::at_most("dirac_lagrangian_frame", dirac, ID_TOL));
    checks.push(Check::at_most("clifford_relations", clifford, CLIFFORD_TOL));
    Ok(checks)
}

fn continuum(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let (m, k, t) = (spec.mass, spec.k, spec.t_final);
    let table = convergence_study(m, k, t, &spec.epsilon_list).context("convergence study")?;
    let rows =
        table.rows.iter().map(|r| vec![num(r.epsilon), num(r.error), r.local_order.map(num).unwrap_or_default()]);
    out.csv("convergence.csv", &["epsilon", "error", "local_order"], rows)?;
    let scaling = extra_term_scaling(m, k, t, &spec.epsilon_list, &spec.frame).context("term scaling")?;
    let rows = scaling.terms.iter().flat_map(|term| {
        scaling.epsilons.iter().zip(&term.l1).map(|(e, l)| vec![term.name.to_string(), num(*e), num(*l)])
    });
    out.csv("extra_terms.csv", &["term", "epsilon", "l1"], rows)?;
    out.json("continuum_report.json", &json!({ "convergence": table, "scaling": scaling }))?;

    let order = if table.exact {
        let worst = table.rows.iter().map(|r| r.error).fold(0.0, f64::max);
        Check::at_most("walk_error_exact", worst, EXACT_TOL).with_note("massless walk is exact; order not meaningful")
    } else {
        Check::at_least("convergence_order", table.order, ORDER_BOUND)
    };
    let note = format!("main slope {:.3}, margin {}", scaling.main_slope, scaling.margin);
    Ok(vec![order, Check::flag("extra_terms_decay_faster", scaling.passed, note)])
}

#[derive(Serialize)]
struct MechSummary {
    potential: String,
    steps: usize,
    drift_identity_defect: f64,
    symplectic_energy_range: f64,
    extended: Option<serde_json::Value>,
}

fn mechanics_rows(t: &MechTrajectory, phi: &Potential) -> (Vec<&'static str>, Vec<Vec<String>>) {
    match (&t.t, &t.big_pi) {
        (Some(time), Some(pi)) => {
            let rows = (0..t.q.len())
                .map(|j| {
                    let opt = |v: Option<&f64>| v.map(|x| num(*x)).unwrap_or_default();
                    vec![j.to_string(), num(t.q[j]), opt(t.p.get(j)), num(time[j]), opt(pi.get(j))]
                })
                .collect();
            (vec!["j", "q", "p", "t", "big_pi"], rows)
        }
        _ => {
            let h = t.hamiltonian(phi);
            let rows = (0..t.q.len()).map(|j| vec![j.to_string(), num(t.q[j]), num(t.p[j]), num(h[j])]).collect();
            (vec!["j", "q", "p", "H"], rows)
        }
    }
}

fn mechanics(spec: &RunSpec, out: &mut Artifacts) -> Result<Vec<Check>, RunError> {
    let phi = potential(spec);
    let sym = run_symplectic(spec.q0, spec.p0, &phi, spec.steps);
    let (header, rows) = mechanics_rows(&sym, &phi);
    out.csv("mechanics_symplectic.csv", &header, rows)?;
    let drift = drift_identity_defect(&sym, &phi);
    let h = sym.hamiltonian(&phi);
    let h_range = h.iter().cloned().fold(f64::MIN, f64::max) - h.iter().cloned().fold(f64::MAX, f64::min);

    let cfg = ExtendedConfig { solver_tol: spec.solver_tol, ..Default::default() };
    let (ext_check, ext_json) = match run_extended(spec.q0, spec.p0, spec.v0, spec.steps, &phi, &cfg) {
        Ok(t) => {
            let (header, rows) = mechanics_rows(&t, &phi);
            out.csv("mechanics_extended.csv", &header, rows)?;
            let dpi = cyclic_momentum_check(&t, &phi).max_delta_big_pi.unwrap_or(f64::INFINITY);
            let span = t.t.as_ref().and_then(|v| v.last().copied()).unwrap_or(0.0);
            (
                Check::at_most("extended_big_pi_drift", dpi, PI_TOL),
                Some(json!({ "max_delta_big_pi": dpi, "final_time": span })),
            )
        }
        Err(e) => (Check::flag("extended_big_pi_drift", false, e.to_string()), Some(json!({ "error": e.to_string() }))),
    };

    let free = Potential::free();
    let fr = cyclic_momentum_check(&run_symplectic(spec.q0, spec.p0, &free, spec.steps), &free);
    let free_ok = fr.max_delta_p == 0.0 && fr.max_delta_h == Some(0.0);

    out.json(
        "mechanics_report.json",
        &MechSummary {
            potential: format!("{:?}", spec.potential),
            steps: spec.steps,
            drift_identity_defect: drift,
            symplectic_energy_range: h_range,
            extended: ext_json,
        },
    )?;
    Ok(vec![
        Check::at_most("drift_identity", drift, ID_TOL),
        ext_check,
        Check::flag(
            "free_particle_exact",
            free_ok,
            format!("Δp = {:e}, ΔH = {:e}", fr.max_delta_p, fr.max_delta_h.unwrap_or(f64::NAN)),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use qwalk_core::lattice::fourier_k;

    #[test]
    fn plane_wave_modes_match_lattice_k() {
        let spec = parse_config("experiment=simulate\nn_sites=16\ninitial_state=plane_wave:2").unwrap();
        let s = initial_state(&spec).unwrap();
        let k = fourier_k(16, 2);
        let ratio = s.amps()[1][0] / s.amps()[0][0];
        assert!((ratio - C64::from_polar(1.0, k)).norm() < 1e-12);
    }

    #[test]
    fn schedule_rejected_where_static_coin_needed() {
        let spec = parse_config("experiment=lorentz\nrapidity=0.5\ncoin=schedule:3").unwrap();
        let err = Coins::build(&spec).unwrap().field(spec.experiment).err().unwrap();
        assert!(err.to_string().contains("time-independent"));
    }
}
