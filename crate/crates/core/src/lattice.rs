//! Walk states, coins, evolution and the basic action.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, WalkError};
use crate::linalg::{dot, norm_sqr, Mat2, Spinor, C64, ZERO};
use crate::par;
use crate::stencil::neighbours;

/// Tolerance on ‖W†W − 1‖_max accepted for coins.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// ψ⁻, index 0, moves towards lower p under T.
    Minus,
    /// ψ⁺, index 1, moves towards higher p under T.
    Plus,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::Minus => 0,
            Component::Plus => 1,
        }
    }
}

/// Two complex amplitudes (ψ⁻, ψ⁺) per site of a periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    amps: Vec<Spinor>,
}

impl SpinorField {
    pub fn new(amps: Vec<Spinor>) -> Result<Self> {
        if amps.is_empty() {
            return Err(WalkError::InvalidParameter("n_sites must be positive".into()));
        }
        if let Some(site) = amps.iter().position(|a| !(a[0].is_finite() && a[1].is_finite())) {
            return Err(WalkError::NonFinite { site });
        }
        Ok(SpinorField { amps })
    }

    /// Internal constructor for amplitudes produced from finite inputs.
    pub(crate) fn from_vec(amps: Vec<Spinor>) -> Self {
        debug_assert!(!amps.is_empty());
        SpinorField { amps }
    }

    pub fn from_fn(n_sites: usize, f: impl Fn(usize) -> Spinor) -> Result<Self> {
        SpinorField::new((0..n_sites).map(f).collect())
    }

    pub fn zeros(n_sites: usize) -> Self {
        SpinorField::from_vec(vec![[ZERO; 2]; n_sites.max(1)])
    }

    pub fn delta(n_sites: usize, site: usize, component: Component) -> Self {
        let mut s = SpinorField::zeros(n_sites);
        s.amps[site % n_sites][component.index()] = C64::new(1.0, 0.0);
        s
    }

    /// Normalized plane wave e^{ikp}/√N with k = 2π·mode/N in one component.
    pub fn plane_wave(n_sites: usize, mode: i64, component: Component) -> Self {
        let k = fourier_k(n_sites, mode);
        let a = 1.0 / (n_sites as f64).sqrt();
        let c = component.index();
        SpinorField::from_vec(
            (0..n_sites)
                .map(|p| {
                    let mut s = [ZERO; 2];
                    s[c] = C64::from_polar(a, k * p as f64);
                    s
                })
                .collect(),
        )
    }

    /// Normalized periodic Gaussian packet with carrier mode and polarization.
    pub fn gaussian(n_sites: usize, center: f64, width: f64, mode: i64, pol: Spinor) -> Result<Self> {
        if width <= 0.0 {
            return Err(WalkError::InvalidParameter("gaussian width must be positive".into()));
        }
        let n = n_sites as f64;
        let k = fourier_k(n_sites, mode);
        let raw = SpinorField::from_fn(n_sites, |p| {
            // shortest periodic distance to the center
            let d = (p as f64 - center + n / 2.0).rem_euclid(n) - n / 2.0;
            let env = C64::from_polar((-d * d / (2.0 * width * width)).exp(), k * p as f64);
            [pol[0] * env, pol[1] * env]
        })?;
        raw.normalized()
    }

    /// Normalized state with i.i.d. complex Gaussian amplitudes.
    pub fn random(n_sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let raw = SpinorField::from_vec((0..n_sites.max(1)).map(|_| [g(), g()]).collect());
        raw.normalized().expect("gaussian sample has nonzero norm")
    }

    pub fn n_sites(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Spinor] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Spinor> {
        self.amps
    }

    /// Amplitude pair at a periodic site index.
    pub fn at(&self, p: isize) -> Spinor {
        self.amps[crate::stencil::wrap(p, self.amps.len())]
    }

    pub fn component(&self, c: Component) -> Vec<C64> {
        self.amps.iter().map(|a| a[c.index()]).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(norm_sqr).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(WalkError::InvalidParameter("cannot normalize the zero state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    /// ⟨self|other⟩ = Σ_p Σ_σ conj(self^σ_p) other^σ_p.
    pub fn inner(&self, other: &SpinorField) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| dot(a, b)).sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.map(|a| [a[0] * s, a[1] * s])
    }

    pub fn map(&self, f: impl Fn(&Spinor) -> Spinor) -> Self {
        SpinorField::from_vec(self.amps.iter().map(f).collect())
    }

    pub fn zip_with(&self, other: &SpinorField, f: impl Fn(&Spinor, &Spinor) -> Spinor) -> Self {
        assert_eq!(self.n_sites(), other.n_sites());
        SpinorField::from_vec(self.amps.iter().zip(&other.amps).map(|(a, b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &SpinorField) -> Self {
        self.zip_with(other, |a, b| [a[0] + b[0], a[1] + b[1]])
    }

    pub fn sub(&self, other: &SpinorField) -> Self {
        self.zip_with(other, |a, b| [a[0] - b[0], a[1] - b[1]])
    }

    /// Applies one 2x2 matrix at every site.
    pub fn apply_matrix(&self, m: &Mat2) -> Self {
        self.map(|a| m.apply(a))
    }

    /// (Φ_{p+1} − Φ_{p−1})/2 in both components.
    pub fn grad_p(&self) -> Self {
        self.neighbour_map(|lo, hi| [(hi[0] - lo[0]) * 0.5, (hi[1] - lo[1]) * 0.5])
    }

    /// (Φ_{p+1} + Φ_{p−1})/2 in both components.
    pub fn avg_c(&self) -> Self {
        self.neighbour_map(|lo, hi| [(hi[0] + lo[0]) * 0.5, (hi[1] + lo[1]) * 0.5])
    }

    fn neighbour_map(&self, f: impl Fn(&Spinor, &Spinor) -> Spinor) -> Self {
        let n = self.n_sites();
        SpinorField::from_vec(
            (0..n)
                .map(|p| {
                    let (m, q) = neighbours(p, n);
                    f(&self.amps[m], &self.amps[q])
                })
                .collect(),
        )
    }

    pub fn max_dist(&self, other: &SpinorField) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm()))
            .fold(0.0, f64::max)
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Spinor] {
        &mut self.amps
    }
}

/// Lattice wavenumber 2π·mode/N.
pub fn fourier_k(n_sites: usize, mode: i64) -> f64 {
    2.0 * std::f64::consts::PI * mode as f64 / n_sites as f64
}

/// One U(2) matrix per site, or a single shared matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinField {
    n_sites: usize,
    matrices: Vec<Mat2>,
}

impl CoinField {
    pub fn uniform(n_sites: usize, w: Mat2) -> Result<Self> {
        check_unitary(&w)?;
        if n_sites == 0 {
            return Err(WalkError::InvalidParameter("n_sites must be positive".into()));
        }
        Ok(CoinField { n_sites, matrices: vec![w] })
    }

    pub fn from_sites(matrices: Vec<Mat2>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(WalkError::InvalidParameter("n_sites must be positive".into()));
        }
        for w in &matrices {
            check_unitary(w)?;
        }
        Ok(CoinField { n_sites: matrices.len(), matrices })
    }

    pub fn identity(n_sites: usize) -> Self {
        CoinField::uniform(n_sites, Mat2::identity()).expect("identity is unitary")
    }

    /// Single Haar-random matrix shared by all sites.
    pub fn random_haar(n_sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CoinField::uniform(n_sites, Mat2::haar(&mut rng)).expect("Haar sample is unitary")
    }

    /// Independent Haar-random matrix at every site.
    pub fn random_field(n_sites: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = (0..n_sites).map(|_| Mat2::haar(&mut rng)).collect();
        CoinField::from_sites(m).expect("Haar samples are unitary")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn is_homogeneous(&self) -> bool {
        self.matrices.len() == 1
    }

    /// The shared matrix of a homogeneous coin.
    pub fn matrix(&self) -> Option<&Mat2> {
        self.is_homogeneous().then(|| &self.matrices[0])
    }

    pub fn at(&self, p: usize) -> &Mat2 {
        if self.matrices.len() == 1 {
            &self.matrices[0]
        } else {
            &self.matrices[p]
        }
    }

    pub(crate) fn require_homogeneous(&self) -> Result<&Mat2> {
        self.matrix().ok_or(WalkError::InhomogeneousCoin)
    }
}

fn check_unitary(w: &Mat2) -> Result<()> {
    let deviation = w.unitarity_defect();
    if !w.is_finite() || deviation >= UNITARY_TOL {
        return Err(WalkError::NotUnitary { deviation });
    }
    Ok(())
}

/// Source of the coin used for the step j → j+1.
pub trait CoinSource: Sync {
    fn n_sites(&self) -> usize;
    fn at_step(&self, j: usize) -> &CoinField;
}

impl CoinSource for CoinField {
    fn n_sites(&self) -> usize {
        self.n_sites
    }
    fn at_step(&self, _j: usize) -> &CoinField {
        self
    }
}

/// Time-dependent coins; step j uses entry `j % len`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoinSchedule {
    coins: Vec<CoinField>,
}

impl CoinSchedule {
    pub fn new(coins: Vec<CoinField>) -> Result<Self> {
        let first = coins.first().ok_or_else(|| WalkError::InvalidParameter("empty coin schedule".into()))?;
        if let Some(c) = coins.iter().find(|c| c.n_sites != first.n_sites) {
            return Err(WalkError::DimensionMismatch { expected: first.n_sites, found: c.n_sites });
        }
        Ok(CoinSchedule { coins })
    }

    /// Independent Haar matrix at every (j, p).
    pub fn random(n_sites: usize, steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coins = (0..steps.max(1))
            .map(|_| {
                let m = (0..n_sites).map(|_| Mat2::haar(&mut rng)).collect();
                CoinField::from_sites(m).expect("Haar samples are unitary")
            })
            .collect();
        CoinSchedule { coins }
    }
}

impl CoinSource for CoinSchedule {
    fn n_sites(&self) -> usize {
        self.coins[0].n_sites
    }
    fn at_step(&self, j: usize) -> &CoinField {
        &self.coins[j % self.coins.len()]
    }
}

/// Time slices Ψ_0 … Ψ_J sharing one lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    slices: Vec<SpinorField>,
}

impl Trajectory {
    pub fn new(slices: Vec<SpinorField>) -> Result<Self> {
        let n = slices.first().ok_or(WalkError::TrajectoryTooShort { needed: 1, found: 0 })?.n_sites();
        if let Some(s) = slices.iter().find(|s| s.n_sites() != n) {
            return Err(WalkError::DimensionMismatch { expected: n, found: s.n_sites() });
        }
        Ok(Trajectory { slices })
    }

    pub fn slices(&self) -> &[SpinorField] {
        &self.slices
    }

    pub fn slice(&self, j: usize) -> &SpinorField {
        &self.slices[j]
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.slices[0].n_sites()
    }

    pub fn map_slices(&self, f: impl Fn(&SpinorField) -> SpinorField) -> Self {
        Trajectory { slices: self.slices.iter().map(f).collect() }
    }

    pub(crate) fn require_len(&self, needed: usize) -> Result<()> {
        if self.len() < needed {
            return Err(WalkError::TrajectoryTooShort { needed, found: self.len() });
        }
        Ok(())
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(WalkError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// T: ψ⁻_p ← ψ⁻_{p+1}, ψ⁺_p ← ψ⁺_{p−1}. The adjoint shifts the other way.
pub fn apply_translation(state: &SpinorField, dagger: bool) -> SpinorField {
    let n = state.n_sites();
    let a = state.amps();
    SpinorField::from_vec(
        (0..n)
            .map(|p| {
                let (lo, hi) = neighbours(p, n);
                if dagger {
                    [a[lo][0], a[hi][1]]
                } else {
                    [a[hi][0], a[lo][1]]
                }
            })
            .collect(),
    )
}

/// UΨ with (UΨ)_p = W_p (TΨ)_p.
pub fn step(state: &SpinorField, coin: &CoinField) -> Result<SpinorField> {
    check_dims(coin.n_sites(), state.n_sites())?;
    let n = state.n_sites();
    let a = state.amps();
    Ok(SpinorField::from_vec(par::map_range(n, |p| {
        let (lo, hi) = neighbours(p, n);
        coin.at(p).apply(&[a[hi][0], a[lo][1]])
    })))
}

/// U†Ψ = T†(W†Ψ).
pub fn step_adjoint(state: &SpinorField, coin: &CoinField) -> Result<SpinorField> {
    check_dims(coin.n_sites(), state.n_sites())?;
    let n = state.n_sites();
    let rotated: Vec<Spinor> = par::map_range(n, |p| coin.at(p).adjoint().apply(&state.amps()[p]));
    Ok(apply_translation(&SpinorField::from_vec(rotated), true))
}

pub fn evolve(initial: &SpinorField, coins: &impl CoinSource, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(WalkError::InvalidParameter("steps must be at least 1".into()));
    }
    check_dims(coins.n_sites(), initial.n_sites())?;
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(initial.clone());
    for j in 0..steps {
        let next = step(&slices[j], coins.at_step(j))?;
        slices.push(next);
    }
    Ok(Trajectory { slices })
}

/// S = Σ_j ⟨Ψ_{j+1} | Ψ_{j+1} − U_j Ψ_j⟩.
pub fn action_s(traj: &Trajectory, coins: &impl CoinSource) -> Result<C64> {
    traj.require_len(2)?;
    check_dims(coins.n_sites(), traj.n_sites())?;
    let terms: Vec<Result<C64>> = par::map_tasks(traj.len() - 1, |j| bracket(traj, coins, j));
    terms.into_iter().sum()
}

fn bracket(traj: &Trajectory, coins: &impl CoinSource, j: usize) -> Result<C64> {
    let next = traj.slice(j + 1);
    let pushed = step(traj.slice(j), coins.at_step(j))?;
    Ok(next.inner(&next.sub(&pushed)))
}

/// Velocity form in the variables Φ_j = U†Ψ_j:
/// S̃ = Σ_j ⟨Ψ_j | (Φ_{j+1} − Φ_j) − (U − 1)Φ_j⟩ with a time-independent coin.
///
/// On-shell it coincides with [`action_s`]; off-shell the two satisfy
/// S̃ = conj(‖Ψ_J‖² − ‖Ψ_0‖² − S).
pub fn action_velocity_form(traj: &Trajectory, coin: &CoinField) -> Result<C64> {
    traj.require_len(2)?;
    check_dims(coin.n_sites(), traj.n_sites())?;
    let phis: Vec<SpinorField> = traj.slices().iter().map(|s| step_adjoint(s, coin)).collect::<Result<_>>()?;
    let mut total = ZERO;
    for j in 0..traj.len() - 1 {
        let velocity = phis[j + 1].sub(&phis[j]);
        let u_phi = step(&phis[j], coin)?;
        let rhs = velocity.sub(&u_phi.sub(&phis[j]));
        total += traj.slice(j).inner(&rhs);
    }
    Ok(total)
}

/// Largest central finite-difference derivative of Re S and Im S with
/// respect to the real and imaginary parts of every amplitude of the
/// interior slices 1..J−1.
pub fn stationarity_residual(traj: &Trajectory, coins: &impl CoinSource, fd_step: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&fd_step) {
        return Err(WalkError::InvalidParameter(format!("fd_step {fd_step} outside [1e-7, 1e-3]")));
    }
    traj.require_len(2)?;
    check_dims(coins.n_sites(), traj.n_sites())?;
    let n = traj.n_sites();
    let interior = traj.len().saturating_sub(2);
    // One task per (slice, site, component, real/imag) slot.
    let slots = interior * n * 4;
    let grads: Vec<Result<f64>> = par::map_range(slots, |idx| {
        let j = 1 + idx / (4 * n);
        let p = (idx / 4) % n;
        let comp = (idx / 2) % 2;
        let dir = if idx % 2 == 0 { C64::new(fd_step, 0.0) } else { C64::new(0.0, fd_step) };
        let mut plus = traj.slice(j).clone();
        plus.amps_mut()[p][comp] += dir;
        let mut minus = traj.slice(j).clone();
        minus.amps_mut()[p][comp] -= dir;
        let d = (local_action(traj, coins, j, &plus)? - local_action(traj, coins, j, &minus)?) / (2.0 * fd_step);
        Ok(d.re.abs().max(d.im.abs()))
    });
    grads.into_iter().try_fold(0.0_f64, |acc, g| g.map(|g| acc.max(g)))
}

/// The two brackets of S that involve slice j, with slice j replaced.
fn local_action(traj: &Trajectory, coins: &impl CoinSource, j: usize, replaced: &SpinorField) -> Result<C64> {
    let pushed_in = step(traj.slice(j - 1), coins.at_step(j - 1))?;
    let mut s = replaced.inner(&replaced.sub(&pushed_in));
    if j + 1 < traj.len() {
        let next = traj.slice(j + 1);
        s += next.inner(&next.sub(&step(replaced, coins.at_step(j))?));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use std::f64::consts::PI;

    #[test]
    fn translation_examples() {
        let s = SpinorField::delta(4, 1, Component::Minus);
        assert_eq!(apply_translation(&s, false), SpinorField::delta(4, 0, Component::Minus));
        let s = SpinorField::delta(4, 1, Component::Plus);
        assert_eq!(apply_translation(&s, false), SpinorField::delta(4, 2, Component::Plus));
        assert_eq!(apply_translation(&s, true), SpinorField::delta(4, 0, Component::Plus));
        let r = SpinorField::random(13, 4);
        assert_eq!(apply_translation(&apply_translation(&r, false), true), r);
        assert_eq!(apply_translation(&apply_translation(&r, true), false), r);
    }

    #[test]
    fn step_examples() {
        let s = SpinorField::delta(4, 1, Component::Minus);
        assert_eq!(step(&s, &CoinField::identity(4)).unwrap(), SpinorField::delta(4, 0, Component::Minus));
        let swap = CoinField::uniform(4, Mat2::sigma1()).unwrap();
        let s = SpinorField::delta(4, 1, Component::Plus);
        assert_eq!(step(&s, &swap).unwrap(), SpinorField::delta(4, 2, Component::Minus));
    }

    #[test]
    fn step_rejects_mismatch() {
        let err = step(&SpinorField::zeros(4), &CoinField::identity(6)).unwrap_err();
        assert_eq!(err, WalkError::DimensionMismatch { expected: 6, found: 4 });
    }

    #[test]
    fn step_adjoint_inverts_step() {
        let coin = CoinField::random_field(17, 2);
        let s = SpinorField::random(17, 9);
        let back = step_adjoint(&step(&s, &coin).unwrap(), &coin).unwrap();
        assert!(back.max_dist(&s) < 1e-14);
    }

    #[test]
    fn coin_validation() {
        assert!(matches!(CoinField::uniform(4, Mat2::real(1.0, 0.0, 0.0, 2.0)), Err(WalkError::NotUnitary { .. })));
        assert!(CoinField::random_haar(8, 1).is_homogeneous());
        assert!(!CoinField::random_field(8, 1).is_homogeneous());
    }

    #[test]
    fn evolve_examples() {
        let s = SpinorField::random(8, 1);
        let coin = CoinField::random_haar(8, 3);
        let t = evolve(&s, &coin, 1).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.slice(1), &step(&s, &coin).unwrap());

        let t = evolve(&SpinorField::delta(8, 2, Component::Minus), &CoinField::identity(8), 2).unwrap();
        assert_eq!(t.slice(2), &SpinorField::delta(8, 0, Component::Minus));
        assert!(evolve(&s, &coin, 0).is_err());
    }

    #[test]
    fn plane_wave_is_translation_eigenstate() {
        let n = 32;
        let steps = 11;
        let k = 2.0 * PI / n as f64;
        let init = SpinorField::plane_wave(n, 1, Component::Plus);
        let t = evolve(&init, &CoinField::identity(n), steps).unwrap();
        let expected = init.scaled(C64::from_polar(1.0, -k * steps as f64));
        assert!(t.slice(steps).max_dist(&expected) < 1e-13);
    }

    #[test]
    fn action_on_shell_vanishes() {
        let coin = CoinField::random_field(16, 5);
        let t = evolve(&SpinorField::random(16, 6), &coin, 8).unwrap();
        assert!(action_s(&t, &coin).unwrap().norm() <= 1e-13 * 8.0 * 16.0);
    }

    #[test]
    fn action_two_identical_plane_wave_slices() {
        let n = 16;
        for mode in [1, 3, -2] {
            let k = fourier_k(n, mode);
            let s = SpinorField::plane_wave(n, mode, Component::Minus);
            let t = Trajectory::new(vec![s.clone(), s]).unwrap();
            let a = action_s(&t, &CoinField::identity(n)).unwrap();
            assert!((a - (ONE - C64::from_polar(1.0, k))).norm() < 1e-13);
        }
    }

    #[test]
    fn action_orthogonal_slice() {
        let coin = CoinField::identity(4);
        let s0 = SpinorField::delta(4, 1, Component::Minus);
        // U s0 = delta at 0 (minus); pick an orthogonal unit state.
        let s1 = SpinorField::delta(4, 3, Component::Plus);
        let t = Trajectory::new(vec![s0, s1]).unwrap();
        assert!((action_s(&t, &coin).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn action_global_phase_invariance() {
        let coin = CoinField::random_haar(12, 2);
        let s0 = SpinorField::random(12, 1);
        let t = Trajectory::new(vec![s0.clone(), SpinorField::random(12, 2), s0]).unwrap();
        let rotated = t.map_slices(|s| s.scaled(C64::from_polar(1.0, 0.83)));
        let (a, b) = (action_s(&t, &coin).unwrap(), action_s(&rotated, &coin).unwrap());
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn velocity_form_matches_on_and_off_shell() {
        let coin = CoinField::random_haar(10, 8);
        let on = evolve(&SpinorField::random(10, 3), &coin, 5).unwrap();
        assert!((action_velocity_form(&on, &coin).unwrap() - action_s(&on, &coin).unwrap()).norm() < 1e-13);

        let off = Trajectory::new(
            (0..4).map(|s| SpinorField::random(10, 40 + s).scaled(C64::new(1.0 + s as f64, 0.0))).collect(),
        )
        .unwrap();
        let s = action_s(&off, &coin).unwrap();
        let st = action_velocity_form(&off, &coin).unwrap();
        let boundary = off.slice(3).norm_sqr() - off.slice(0).norm_sqr();
        assert!((st - (C64::new(boundary, 0.0) - s).conj()).norm() < 1e-12);
    }

    #[test]
    fn stationarity_on_and_off_shell() {
        let coin = CoinField::random_haar(8, 1);
        let on = evolve(&SpinorField::random(8, 2), &coin, 4).unwrap();
        let r1 = stationarity_residual(&on, &coin, 1e-5).unwrap();
        let r2 = stationarity_residual(&on, &coin, 5e-6).unwrap();
        assert!(r1 <= 1e-7 && r2 <= 1e-7, "{r1} {r2}");

        let s0 = SpinorField::random(8, 2);
        let u0 = step(&s0, &coin).unwrap();
        let off = Trajectory::new(vec![s0.clone(), s0, u0]).unwrap();
        assert!(stationarity_residual(&off, &coin, 1e-5).unwrap() > 1e-3);
        assert!(stationarity_residual(&off, &coin, 1.0).is_err());
    }

    #[test]
    fn schedule_cycles() {
        let sched = CoinSchedule::random(6, 3, 1);
        assert_eq!(sched.at_step(4), sched.at_step(1));
        let t = evolve(&SpinorField::random(6, 1), &sched, 7).unwrap();
        assert!(action_s(&t, &sched).unwrap().norm() < 1e-13);
    }
}
