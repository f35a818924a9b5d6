//! Densities, currents, totals and local conservation residuals.
//!
//! Every residual here uses the averaged time stencil
//! `d_{j+1,p} − (d_{j,p+1} + d_{j,p−1})/2 + (c_{j,p+1} − c_{j,p−1})/2`,
//! which is the form in which the walk's conservation laws close exactly.

use serde::Serialize;

use crate::error::{Result, WalkError};
use crate::lattice::{apply_translation, step_adjoint, CoinField, CoinSource, SpinorField, Trajectory};
use crate::linalg::{canonical_arg, dot, Spinor, C64, I, ZERO};
use crate::par;
use crate::stencil::neighbours;

/// One complex value per site.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<C64>,
}

impl ScalarField {
    pub fn new(values: Vec<C64>) -> Self {
        ScalarField { values }
    }

    pub fn from_real(values: impl IntoIterator<Item = f64>) -> Self {
        ScalarField { values: values.into_iter().map(C64::from).collect() }
    }

    pub fn zeros(n_sites: usize) -> Self {
        ScalarField { values: vec![ZERO; n_sites] }
    }

    pub fn n_sites(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, p: usize) -> C64 {
        self.values[p]
    }

    pub fn total(&self) -> C64 {
        self.values.iter().sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        ScalarField { values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!(self.n_sites(), other.n_sites());
        ScalarField { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// Largest |Re| or |Im| of the entries.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
    }

    pub fn max_dist(&self, other: &ScalarField) -> f64 {
        self.sub(other).max_abs()
    }
}

fn sigma3(a: &Spinor) -> Spinor {
    [a[0], -a[1]]
}

fn pointwise(a: &SpinorField, b: &SpinorField, f: impl Fn(&Spinor, &Spinor) -> C64 + Sync) -> ScalarField {
    assert_eq!(a.n_sites(), b.n_sites());
    let (x, y) = (a.amps(), b.amps());
    ScalarField::new(par::map_range(a.n_sites(), |p| f(&x[p], &y[p])))
}

/// Q = Ψ†Ψ per site.
pub fn charge_density(state: &SpinorField) -> ScalarField {
    ScalarField::from_real(state.amps().iter().map(crate::linalg::norm_sqr))
}

/// 𝒥_Q = −Ψ†σ₃Ψ per site.
pub fn charge_current(state: &SpinorField) -> ScalarField {
    ScalarField::from_real(state.amps().iter().map(|a| a[1].norm_sqr() - a[0].norm_sqr()))
}

/// Moduli and half-sum / half-difference phases of the two components,
/// ψ∓ = ρ∓ e^{i(μ ∓ δ)}.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition {
    pub rho_minus: Vec<f64>,
    pub rho_plus: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
}

impl PolarDecomposition {
    pub fn of(state: &SpinorField) -> Self {
        let n = state.n_sites();
        let mut out = PolarDecomposition {
            rho_minus: Vec::with_capacity(n),
            rho_plus: Vec::with_capacity(n),
            mu: Vec::with_capacity(n),
            delta: Vec::with_capacity(n),
        };
        let phase = |z: C64| if z.norm() == 0.0 { 0.0 } else { canonical_arg(z) };
        for a in state.amps() {
            let (dm, dp) = (phase(a[0]), phase(a[1]));
            out.rho_minus.push(a[0].norm());
            out.rho_plus.push(a[1].norm());
            // Both lie in (−π, π] because dm, dp do.
            out.mu.push(0.5 * (dp + dm));
            out.delta.push(0.5 * (dp - dm));
        }
        out
    }

    pub fn n_sites(&self) -> usize {
        self.mu.len()
    }

    pub fn reconstruct(&self) -> SpinorField {
        let amps = (0..self.n_sites())
            .map(|p| {
                let (m, d) = (self.mu[p], self.delta[p]);
                [C64::from_polar(self.rho_minus[p], m - d), C64::from_polar(self.rho_plus[p], m + d)]
            })
            .collect();
        SpinorField::new(amps).expect("finite polar data")
    }
}

/// J_j = (ρ⁻)² + (ρ⁺)² and J_p = −(ρ⁻)² + (ρ⁺)².
pub fn polar_currents(polar: &PolarDecomposition) -> (ScalarField, ScalarField) {
    let jj = polar.rho_minus.iter().zip(&polar.rho_plus).map(|(m, p)| m * m + p * p);
    let jp = polar.rho_minus.iter().zip(&polar.rho_plus).map(|(m, p)| p * p - m * m);
    (ScalarField::from_real(jj), ScalarField::from_real(jp))
}

/// Charge conservation in stencil form, evaluated on an on-shell trajectory.
///
/// The currents conjugate to the cyclic phase μ live on the translated slice
/// TΨ_j: `J_j = |TΨ_j|²` and, normalized to the undivided difference
/// f_{p+1} − f_{p−1}, `J_p = ½(−|(TΨ_j)⁻|² + |(TΨ_j)⁺|²)`. Both follow from
/// [`polar_currents`] applied to TΨ_j. The returned value is
/// max over 1 ≤ j ≤ J and p of
/// `|((J_j)_{j,p+1} + (J_j)_{j,p−1})/2 − (J_j)_{j−1,p} + (J_p)_{j,p+1} − (J_p)_{j,p−1}|`.
/// It needs no coin, and holds for any unitary coin field.
pub fn charge_conservation_residual(traj: &Trajectory) -> Result<f64> {
    traj.require_len(2)?;
    let fields = charge_residual_fields(traj);
    Ok(fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max))
}

/// Per-site charge residuals for j = 1..=J (entry `j − 1`).
pub fn charge_residual_fields(traj: &Trajectory) -> Vec<ScalarField> {
    let currents: Vec<(ScalarField, ScalarField)> = traj
        .slices()
        .iter()
        .map(|s| {
            let (jj, jp) = polar_currents(&PolarDecomposition::of(&apply_translation(s, false)));
            (jj, jp.scaled(C64::new(0.5, 0.0)))
        })
        .collect();
    par::map_tasks(traj.len().saturating_sub(1), |i| {
        let j = i + 1;
        let (jj, jp) = &currents[j];
        let prev = &currents[j - 1].0;
        let n = jj.n_sites();
        ScalarField::new(
            (0..n)
                .map(|p| {
                    let (m, q) = neighbours(p, n);
                    (jj.get(q) + jj.get(m)) * 0.5 - prev.get(p) + jp.get(q) - jp.get(m)
                })
                .collect(),
        )
    })
}

/// Noether currents of the global phase for arbitrary (possibly off-shell)
/// slices, one pair per j = 0..J−1:
/// `J_j = iΨ†_{j+1,p}(U_jΨ_j)_p`, `J_p = −iΨ†_{j+1,p} W_{j,p} σ₃ (TΨ_j)_p`.
///
/// With these, the derivative of the action with respect to a local phase
/// rotation of Ψ_{j,p} equals minus [`noether_divergence`] at (j, p).
pub fn noether_charge_currents(traj: &Trajectory, coins: &impl CoinSource) -> Result<Vec<(ScalarField, ScalarField)>> {
    traj.require_len(2)?;
    (0..traj.len() - 1)
        .map(|j| {
            let coin = coins.at_step(j);
            let shifted = apply_translation(traj.slice(j), false);
            let next = traj.slice(j + 1).amps();
            let n = shifted.n_sites();
            if coin.n_sites() != n {
                return Err(WalkError::DimensionMismatch { expected: coin.n_sites(), found: n });
            }
            let mut jj = Vec::with_capacity(n);
            let mut jp = Vec::with_capacity(n);
            for p in 0..n {
                let w = coin.at(p);
                let t = shifted.amps()[p];
                jj.push(I * dot(&next[p], &w.apply(&t)));
                jp.push(-I * dot(&next[p], &w.apply(&sigma3(&t))));
            }
            Ok((ScalarField::new(jj), ScalarField::new(jp)))
        })
        .collect()
}

/// `((J_j)_{j,p+1} + (J_j)_{j,p−1})/2 − (J_j)_{j−1,p} + ((J_p)_{j,p+1} − (J_p)_{j,p−1})/2`
/// for j = 1..J−1 (entry `j − 1`).
pub fn noether_divergence(currents: &[(ScalarField, ScalarField)]) -> Vec<ScalarField> {
    (1..currents.len())
        .map(|j| {
            let (jj, jp) = &currents[j];
            let prev = &currents[j - 1].0;
            let n = jj.n_sites();
            ScalarField::new(
                (0..n)
                    .map(|p| {
                        let (m, q) = neighbours(p, n);
                        (jj.get(q) + jj.get(m)) * 0.5 - prev.get(p) + (jp.get(q) - jp.get(m)) * 0.5
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Pieces of the energy density and current: ℋ = Q + h, 𝒥_ℋ = 𝒥_Q + 𝒥_h.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySplit {
    pub q: ScalarField,
    pub h: ScalarField,
    pub j_q: ScalarField,
    pub j_h: ScalarField,
}

impl EnergySplit {
    pub fn density(&self) -> ScalarField {
        self.q.add(&self.h)
    }

    pub fn current(&self) -> ScalarField {
        self.j_q.add(&self.j_h)
    }
}

/// Split of ℋ and 𝒥_ℋ for a homogeneous coin.
pub fn energy_split(state: &SpinorField, coin: &CoinField) -> Result<EnergySplit> {
    coin.require_homogeneous()?;
    energy_split_any(state, coin)
}

fn energy_split_any(state: &SpinorField, coin: &CoinField) -> Result<EnergySplit> {
    let back = step_adjoint(state, coin)?;
    Ok(EnergySplit {
        q: charge_density(state),
        h: pointwise(state, &back, |a, b| -dot(a, b)),
        j_q: charge_current(state),
        j_h: pointwise(state, &back, |a, b| dot(&sigma3(a), b)),
    })
}

/// ℋ = Ψ†((1 − U†)Ψ) per site.
pub fn energy_density(state: &SpinorField, coin: &CoinField) -> Result<ScalarField> {
    Ok(energy_split(state, coin)?.density())
}

/// 𝒥_ℋ = −Ψ†σ₃((1 − U†)Ψ) per site.
pub fn energy_current(state: &SpinorField, coin: &CoinField) -> Result<ScalarField> {
    Ok(energy_split(state, coin)?.current())
}

/// 𝒫 = ½Ψ†σ₃((T − T†)Ψ) per site.
pub fn momentum_density(state: &SpinorField) -> ScalarField {
    let diff = translation_difference(state);
    pointwise(state, &diff, |a, d| dot(&sigma3(a), d) * 0.5)
}

/// 𝒥_𝒫 = −½Ψ†((T − T†)Ψ) per site.
pub fn momentum_current(state: &SpinorField) -> ScalarField {
    let diff = translation_difference(state);
    pointwise(state, &diff, |a, d| -dot(a, d) * 0.5)
}

fn translation_difference(state: &SpinorField) -> SpinorField {
    apply_translation(state, false).sub(&apply_translation(state, true))
}

/// `d_{j+1,p} − (d_{j,p+1}+d_{j,p−1})/2 + (c_{j,p+1}−c_{j,p−1})/2` for
/// j = 0..len−1 (one field per consecutive pair).
pub fn balance_residual_fields(densities: &[ScalarField], currents: &[ScalarField]) -> Vec<ScalarField> {
    assert_eq!(densities.len(), currents.len());
    par::map_tasks(densities.len().saturating_sub(1), |j| {
        let (d, c, next) = (&densities[j], &currents[j], &densities[j + 1]);
        let n = d.n_sites();
        ScalarField::new(
            (0..n)
                .map(|p| {
                    let (m, q) = neighbours(p, n);
                    next.get(p) - (d.get(q) + d.get(m)) * 0.5 + (c.get(q) - c.get(m)) * 0.5
                })
                .collect(),
        )
    })
}

fn max_field(fields: &[ScalarField]) -> f64 {
    fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
}

/// Per-site energy residuals for every consecutive pair of slices.
pub fn energy_residual_fields(traj: &Trajectory, coin: &CoinField) -> Result<Vec<ScalarField>> {
    coin.require_homogeneous()?;
    energy_residual_fields_any(traj, coin)
}

fn energy_residual_fields_any(traj: &Trajectory, coin: &CoinField) -> Result<Vec<ScalarField>> {
    traj.require_len(2)?;
    let splits: Vec<EnergySplit> = traj.slices().iter().map(|s| energy_split_any(s, coin)).collect::<Result<_>>()?;
    let d: Vec<ScalarField> = splits.iter().map(EnergySplit::density).collect();
    let c: Vec<ScalarField> = splits.iter().map(EnergySplit::current).collect();
    Ok(balance_residual_fields(&d, &c))
}

/// Max over all (j, p) and over real and imaginary parts of the local
/// energy balance. Homogeneous coins only.
pub fn energy_conservation_residual(traj: &Trajectory, coin: &CoinField) -> Result<f64> {
    Ok(max_field(&energy_residual_fields(traj, coin)?))
}

/// The same energy balance for a time-independent but site-dependent coin.
/// Exposed for experimentation only; no conservation is claimed here.
pub fn energy_residual_experimental(traj: &Trajectory, coin: &CoinField) -> Result<f64> {
    Ok(max_field(&energy_residual_fields_any(traj, coin)?))
}

/// Local balance of 𝒫 and 𝒥_𝒫 with the energy stencils. Reported, not
/// asserted by the library.
pub fn momentum_balance_fields(traj: &Trajectory) -> Result<Vec<ScalarField>> {
    traj.require_len(2)?;
    let d: Vec<ScalarField> = traj.slices().iter().map(momentum_density).collect();
    let c: Vec<ScalarField> = traj.slices().iter().map(momentum_current).collect();
    Ok(balance_residual_fields(&d, &c))
}

pub fn momentum_balance_residual(traj: &Trajectory) -> Result<f64> {
    Ok(max_field(&momentum_balance_fields(traj)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Totals {
    pub energy: C64Pair,
    pub momentum: C64Pair,
    pub charge: f64,
}

/// Complex number in a serialization-friendly shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C64Pair {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for C64Pair {
    fn from(z: C64) -> Self {
        C64Pair { re: z.re, im: z.im }
    }
}

impl From<C64Pair> for C64 {
    fn from(z: C64Pair) -> Self {
        C64::new(z.re, z.im)
    }
}

/// (H_j, P_j, Q_j) per slice; H_j uses the coin of step j.
pub fn totals(traj: &Trajectory, coins: &impl CoinSource) -> Result<Vec<Totals>> {
    traj.slices()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let e = energy_split_any(s, coins.at_step(j))?;
            Ok(Totals {
                energy: e.density().total().into(),
                momentum: momentum_density(s).total().into(),
                charge: s.norm_sqr(),
            })
        })
        .collect()
}

/// Largest deviation of each total from its value on slice 0:
/// (energy, momentum, charge), each relative to max(1, |X_0|).
pub fn totals_drift(totals: &[Totals]) -> (f64, f64, f64) {
    let Some(first) = totals.first() else { return (0.0, 0.0, 0.0) };
    let dev = |a: C64, b: C64| {
        let d = a - b;
        d.re.abs().max(d.im.abs()) / b.norm().max(1.0)
    };
    totals.iter().fold((0.0, 0.0, 0.0), |(e, p, q), t| {
        (
            f64::max(e, dev(t.energy.into(), first.energy.into())),
            f64::max(p, dev(t.momentum.into(), first.momentum.into())),
            f64::max(q, (t.charge - first.charge).abs() / first.charge.max(1.0)),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{evolve, fourier_k, step, CoinSchedule, Component};
    use crate::linalg::{Mat2, ONE};
    use std::f64::consts::PI;

    fn site_state(n: usize, p: usize, a: Spinor) -> SpinorField {
        let mut amps = vec![[ZERO; 2]; n];
        amps[p] = a;
        SpinorField::new(amps).unwrap()
    }

    #[test]
    fn charge_examples() {
        let s = site_state(4, 2, [C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        assert!((charge_density(&s).get(2).re - 1.0).abs() < 1e-15);
        assert_eq!(charge_density(&SpinorField::zeros(5)).max_abs(), 0.0);
        let r = SpinorField::random(64, 3);
        assert!((charge_density(&r).total().re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn polar_round_trip() {
        for seed in 0..20 {
            let s = SpinorField::random(32, seed);
            let polar = PolarDecomposition::of(&s);
            assert!(polar.reconstruct().max_dist(&s) < 1e-12);
            assert!(polar.mu.iter().chain(&polar.delta).all(|&x| x > -PI && x <= PI));
        }
        let z = PolarDecomposition::of(&SpinorField::zeros(3));
        assert!(z.mu.iter().all(|&x| x == 0.0));
        // negative real axis with a signed zero still maps to +π
        let s = site_state(1, 0, [C64::new(-1.0, -0.0), C64::new(-2.0, -0.0)]);
        let polar = PolarDecomposition::of(&s);
        assert_eq!(polar.mu[0], PI);
        assert!(polar.reconstruct().max_dist(&s) < 1e-15);
    }

    #[test]
    fn polar_current_examples() {
        let polar = PolarDecomposition {
            rho_minus: vec![0.6, 0.3],
            rho_plus: vec![0.8, 0.0],
            mu: vec![0.0; 2],
            delta: vec![0.0; 2],
        };
        let (jj, jp) = polar_currents(&polar);
        assert!((jj.get(0).re - 1.0).abs() < 1e-15);
        assert!((jp.get(0).re - 0.28).abs() < 1e-15);
        assert!((jp.get(1) + jj.get(1)).norm() < 1e-15);

        let s = SpinorField::random(16, 4);
        let (jj, jp) = polar_currents(&PolarDecomposition::of(&s));
        assert!(jj.max_dist(&charge_density(&s)) < 1e-12);
        assert!(jp.max_dist(&charge_current(&s)) < 1e-12);
    }

    #[test]
    fn charge_residual_homogeneous_inhomogeneous_and_off_shell() {
        let s = SpinorField::random(32, 1);
        let hom = evolve(&s, &CoinField::random_haar(32, 2), 20).unwrap();
        assert!(charge_conservation_residual(&hom).unwrap() < 1e-12);
        let inh = evolve(&s, &CoinSchedule::random(32, 20, 3), 20).unwrap();
        assert!(charge_conservation_residual(&inh).unwrap() < 1e-12);
        let off = Trajectory::new((0..6).map(|k| SpinorField::random(32, 100 + k)).collect()).unwrap();
        assert!(charge_conservation_residual(&off).unwrap() > 1e-3);
        assert!(charge_conservation_residual(&Trajectory::new(vec![s]).unwrap()).is_err());
    }

    #[test]
    fn pointwise_currents_on_untranslated_slices_do_not_balance() {
        // The same stencil fed with J_j = Q_j and J_p = −Ψ_j†σ₃Ψ_j at each
        // slice does not vanish on-shell, even for the identity coin.
        let coin = CoinField::identity(8);
        let t = evolve(&SpinorField::delta(8, 3, Component::Minus), &coin, 4).unwrap();
        let mut worst: f64 = 0.0;
        for j in 1..t.len() {
            let (jj, jp) = polar_currents(&PolarDecomposition::of(t.slice(j)));
            let prev = charge_density(t.slice(j - 1));
            for p in 0..8 {
                let (m, q) = neighbours(p, 8);
                let r = (jj.get(q) + jj.get(m)) * 0.5 - prev.get(p) + jp.get(q) - jp.get(m);
                worst = worst.max(r.norm());
            }
        }
        assert!(worst > 0.4, "{worst}");
    }

    #[test]
    fn noether_currents_reduce_to_translated_polar_currents_on_shell() {
        let coins = CoinSchedule::random(16, 6, 9);
        let t = evolve(&SpinorField::random(16, 2), &coins, 6).unwrap();
        let cur = noether_charge_currents(&t, &coins).unwrap();
        for (j, (jj, jp)) in cur.iter().enumerate() {
            let (aj, ap) = polar_currents(&PolarDecomposition::of(&apply_translation(t.slice(j), false)));
            assert!(jj.max_dist(&aj.scaled(I)) < 1e-13);
            assert!(jp.max_dist(&ap.scaled(I)) < 1e-13);
        }
        assert!(noether_divergence(&cur).iter().all(|f| f.max_abs() < 1e-13));
    }

    #[test]
    fn local_phase_derivative_of_action_is_noether_divergence() {
        // Independent oracle: rotate Ψ_{j,p} by e^{ih} and difference S.
        let n = 8;
        let coins = CoinSchedule::random(n, 5, 4);
        let t = Trajectory::new((0..5).map(|k| SpinorField::random(n, 30 + k)).collect()).unwrap();
        let div = noether_divergence(&noether_charge_currents(&t, &coins).unwrap());
        let h = 1e-5;
        for j in 1..t.len() - 1 {
            for p in 0..n {
                let rotated = |angle: f64| {
                    let mut slices = t.slices().to_vec();
                    let mut amps = slices[j].clone().into_amps();
                    let r = C64::from_polar(1.0, angle);
                    amps[p] = [amps[p][0] * r, amps[p][1] * r];
                    slices[j] = SpinorField::new(amps).unwrap();
                    crate::lattice::action_s(&Trajectory::new(slices).unwrap(), &coins).unwrap()
                };
                let fd = (rotated(h) - rotated(-h)) / (2.0 * h);
                assert!((fd + div[j - 1].get(p)).norm() < 1e-8, "j={j} p={p}");
            }
        }
    }

    #[test]
    fn energy_plane_wave_example() {
        let s = SpinorField::plane_wave(4, 1, Component::Plus);
        let h = energy_density(&s, &CoinField::identity(4)).unwrap();
        let per_site = C64::new(0.25, -0.25);
        assert!(h.values().iter().all(|v| (v - per_site).norm() < 1e-15));
        assert!((h.total() - C64::new(1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn energy_of_eigenstate() {
        // Plane wave through a homogeneous coin: U restricted to mode k is
        // W·diag(e^{ik}, e^{−ik}); take its eigenvectors.
        let n = 16;
        let w = Mat2::haar(&mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        let coin = CoinField::uniform(n, w).unwrap();
        let k = fourier_k(n, 3);
        let sym = w * Mat2::diag(C64::from_polar(1.0, k), C64::from_polar(1.0, -k));
        let (vals, basis) = crate::linalg::normal_eigen(&sym).unwrap();
        for c in 0..2 {
            let v = [basis.0[0][c], basis.0[1][c]];
            let s = SpinorField::from_fn(n, |p| {
                let e = C64::from_polar(1.0 / (n as f64).sqrt(), k * p as f64);
                [v[0] * e, v[1] * e]
            })
            .unwrap();
            assert!(step(&s, &coin).unwrap().max_dist(&s.scaled(vals[c])) < 1e-13);
            let total = energy_density(&s, &coin).unwrap().total();
            assert!((total - (ONE - vals[c].conj())).norm() < 1e-13);
        }
    }

    #[test]
    fn energy_currents_single_component_and_split() {
        let coin = CoinField::identity(12);
        let minus = SpinorField::gaussian(12, 5.0, 2.0, 1, [ONE, ZERO]).unwrap();
        let plus = SpinorField::gaussian(12, 5.0, 2.0, 1, [ZERO, ONE]).unwrap();
        let (hm, jm) = (energy_density(&minus, &coin).unwrap(), energy_current(&minus, &coin).unwrap());
        assert!(jm.max_dist(&hm.scaled(-ONE)) < 1e-15);
        let (hp, jp) = (energy_density(&plus, &coin).unwrap(), energy_current(&plus, &coin).unwrap());
        assert!(jp.max_dist(&hp) < 1e-15);

        let coin = CoinField::random_haar(12, 7);
        let s = SpinorField::random(12, 7);
        let split = energy_split(&s, &coin).unwrap();
        let back = step_adjoint(&s, &coin).unwrap();
        let direct_h = pointwise(&s, &s.sub(&back), dot);
        let direct_j = pointwise(&s, &s.sub(&back), |a, b| -dot(&sigma3(a), b));
        assert!(split.density().max_dist(&direct_h) < 1e-13);
        assert!(split.current().max_dist(&direct_j) < 1e-13);
        assert!(split.j_q.max_dist(&charge_current(&s)) < 1e-15);
        assert_eq!(energy_density(&SpinorField::zeros(12), &coin).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn energy_rejects_inhomogeneous() {
        let coin = CoinField::random_field(8, 1);
        let s = SpinorField::random(8, 1);
        assert_eq!(energy_density(&s, &coin).unwrap_err(), WalkError::InhomogeneousCoin);
        let t = evolve(&s, &coin, 2).unwrap();
        assert!(energy_conservation_residual(&t, &coin).is_err());
    }

    #[test]
    fn energy_residual_identity_and_off_shell() {
        let coin = CoinField::identity(32);
        let t = evolve(&SpinorField::random(32, 5), &coin, 16).unwrap();
        assert!(energy_conservation_residual(&t, &coin).unwrap() < 1e-14);
        let coin = CoinField::random_haar(32, 5);
        let off = Trajectory::new((0..4).map(|k| SpinorField::random(32, 50 + k)).collect()).unwrap();
        assert!(energy_conservation_residual(&off, &coin).unwrap() > 1e-3);
    }

    #[test]
    fn momentum_examples() {
        let n = 64;
        for c in [Component::Minus, Component::Plus] {
            for mode in [1, 8, -5] {
                let s = SpinorField::plane_wave(n, mode, c);
                let k = fourier_k(n, mode);
                assert!((momentum_density(&s).total() - C64::new(0.0, k.sin())).norm() < 1e-13);
            }
        }
        let uniform = SpinorField::plane_wave(n, 0, Component::Minus);
        assert!(momentum_density(&uniform).total().norm() < 1e-15);
        let real_gauss = SpinorField::gaussian(n, 20.0, 4.0, 0, [ONE, ZERO]).unwrap();
        assert!(momentum_density(&real_gauss).total().norm() < 1e-15);

        let minus = SpinorField::gaussian(n, 20.0, 4.0, 3, [ONE, ZERO]).unwrap();
        let plus = SpinorField::gaussian(n, 20.0, 4.0, 3, [ZERO, ONE]).unwrap();
        assert!(momentum_current(&minus).max_dist(&momentum_density(&minus).scaled(-ONE)) < 1e-15);
        assert!(momentum_current(&plus).max_dist(&momentum_density(&plus)) < 1e-15);
        assert_eq!(momentum_current(&SpinorField::zeros(4)).max_abs(), 0.0);
    }

    #[test]
    fn totals_conserved_for_homogeneous_coin() {
        let coin = CoinField::random_haar(32, 9);
        let t = evolve(&SpinorField::random(32, 9), &coin, 40).unwrap();
        let (e, p, q) = totals_drift(&totals(&t, &coin).unwrap());
        assert!(e < 1e-12 && p < 1e-12 && q < 1e-12, "{e} {p} {q}");
    }

    #[test]
    fn time_dependent_coin_keeps_charge_but_not_energy() {
        let coins = CoinSchedule::random(32, 40, 9);
        let t = evolve(&SpinorField::random(32, 9), &coins, 40).unwrap();
        let (e, _, q) = totals_drift(&totals(&t, &coins).unwrap());
        assert!(q < 1e-12);
        assert!(e > 1e-3, "{e}");
    }

    #[test]
    fn densities_are_phase_invariant() {
        let coin = CoinField::random_haar(16, 2);
        let s = SpinorField::random(16, 2);
        let r = s.scaled(C64::from_polar(1.0, 2.1));
        assert!(energy_density(&s, &coin).unwrap().max_dist(&energy_density(&r, &coin).unwrap()) < 1e-15);
        assert!(momentum_density(&s).max_dist(&momentum_density(&r)) < 1e-15);
        assert!(momentum_current(&s).max_dist(&momentum_current(&r)) < 1e-15);
        assert!(charge_density(&s).max_dist(&charge_density(&r)) < 1e-15);
    }
}
