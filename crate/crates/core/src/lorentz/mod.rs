//! Spin frames, the SOLT law, the frame-covariant form of Σ and the
//! stress-energy in boosted frames.

pub mod dirac;

use serde::Serialize;

use crate::error::{Result, WalkError};
use crate::extended::{check_inputs, coordinate_gradients, time_gradient, CoordGradient, CoordinateField, Tetrad};
use crate::lattice::{apply_translation, CoinField, SpinorField, Trajectory};
use crate::linalg::{canonical_arg, dot, normal_eigen, Mat2, C64, ZERO};
use crate::observables::{
    balance_residual_fields, energy_current, energy_density, momentum_current, momentum_density, ScalarField,
};
use crate::par;

/// Eigenbasis (b_L, b_R) of Wσ₃ together with the scaling λ of the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinFrame {
    pub lambda: f64,
    pub alpha_l: f64,
    pub alpha_r: f64,
    /// Columns b_L, b_R in the original (ψ⁻, ψ⁺) basis.
    pub basis: Mat2,
    /// σ̄₃ = B diag(1, −1) B† in the original basis.
    pub sigma_bar3: Mat2,
}

impl SpinFrame {
    /// Wσ₃σ̄₃ in the b_f basis: diag(e^{iα_L}, −e^{iα_R}).
    pub fn d_p_matrix(&self) -> [C64; 2] {
        [C64::from_polar(1.0, self.alpha_l), -C64::from_polar(1.0, self.alpha_r)]
    }
}

/// Eigenphases sorted ascending in (−π, π]; eigenvectors phase-fixed so the
/// first non-vanishing component is real positive. A degenerate Wσ₃ gives
/// the identity basis and σ̄₃ = σ₃.
pub fn spin_frame_of(coin_matrix: &Mat2, lambda: f64) -> Result<SpinFrame> {
    let d = coin_matrix.unitarity_defect();
    if d >= crate::lattice::UNITARY_TOL {
        return Err(WalkError::NotUnitary { deviation: d });
    }
    check_lambda(lambda)?;
    let ws = *coin_matrix * Mat2::sigma3();
    let (alpha_l, alpha_r, basis) = match normal_eigen(&ws) {
        Some((vals, b)) => (canonical_arg(vals[0]), canonical_arg(vals[1]), b),
        None => {
            let a = canonical_arg(ws.trace() * 0.5);
            (a, a, Mat2::identity())
        }
    };
    let sigma_bar3 = basis * Mat2::sigma3() * basis.adjoint();
    Ok(SpinFrame { lambda, alpha_l, alpha_r, basis, sigma_bar3 })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(WalkError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// O^L_L → λ²O^L_L, O^R_R → λ^{−2}O^R_R, off-diagonal entries unchanged.
pub fn solt_transform(op: &Mat2, lambda: f64) -> Mat2 {
    let s = Mat2::diag(C64::new(lambda, 0.0), C64::new(1.0 / lambda, 0.0));
    s * *op * s
}

/// A Lorentz frame: spin scaling λ = e^{φ/2} paired with the coordinate map
/// X' = Λ(φ)X, Λ(φ) = [[cosh φ, sinh φ], [sinh φ, cosh φ]].
///
/// This pairing is the one for which the frame's own tetrad, the inverse of
/// Λ, equals the boosted 2-bein with (e')^t₀ = (λ² + λ^{−2})/2 and
/// (e')^t₁ = (λ^{−2} − λ²)/2, so that the covariant action is invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameSpec {
    pub rapidity: f64,
    pub lambda: f64,
}

pub const FRAME_TOL: f64 = 1e-12;

impl FrameSpec {
    pub fn new(rapidity: f64, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let expected = rapidity.exp();
        if (lambda * lambda - expected).abs() > FRAME_TOL * expected.max(1.0) {
            return Err(WalkError::InconsistentFrame { lambda_sq: lambda * lambda, expected });
        }
        Ok(FrameSpec { rapidity, lambda })
    }

    pub fn from_rapidity(rapidity: f64) -> Self {
        FrameSpec { rapidity, lambda: (0.5 * rapidity).exp() }
    }

    pub fn from_lambda(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(FrameSpec { rapidity: 2.0 * lambda.ln(), lambda })
    }

    pub fn identity() -> Self {
        FrameSpec { rapidity: 0.0, lambda: 1.0 }
    }

    /// Λ with X' = ΛX.
    pub fn coordinate_map(&self) -> [[f64; 2]; 2] {
        let (c, s) = (self.rapidity.cosh(), self.rapidity.sinh());
        [[c, s], [s, c]]
    }

    /// C-coefficients of the frame coordinates relative to the grid: Λ^{−1}.
    pub fn tetrad(&self) -> Tetrad {
        let (c, s) = (self.rapidity.cosh(), self.rapidity.sinh());
        Tetrad { cj0: c, cp0: -s, cj1: -s, cp1: c }
    }

    /// U^μ: image of the grid velocity (1, 0).
    pub fn u_upper(&self) -> [f64; 2] {
        let l = self.coordinate_map();
        [l[0][0], l[1][0]]
    }

    /// V^μ: image of (0, 1).
    pub fn v_upper(&self) -> [f64; 2] {
        let l = self.coordinate_map();
        [l[0][1], l[1][1]]
    }

    pub fn u_lower(&self) -> [f64; 2] {
        lower(self.u_upper())
    }

    pub fn v_lower(&self) -> [f64; 2] {
        lower(self.v_upper())
    }

    /// Π_{μν} = η_{μν} − U_μU_ν.
    pub fn projector(&self) -> [[f64; 2]; 2] {
        let u = self.u_lower();
        let eta = [[1.0, 0.0], [0.0, -1.0]];
        let mut pi = [[0.0; 2]; 2];
        for m in 0..2 {
            for n in 0..2 {
                pi[m][n] = eta[m][n] - u[m] * u[n];
            }
        }
        pi
    }
}

/// η_{μν} = diag(1, −1).
pub fn lower(v: [f64; 2]) -> [f64; 2] {
    [v[0], -v[1]]
}

pub fn minkowski(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] - a[1] * b[1]
}

/// Totals of the covariant terms; Σ_L is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariantTerms {
    pub k_bar: C64,
    pub delta_k_j: C64,
    pub delta_k_p: C64,
    pub k_supp: C64,
    pub m1: C64,
    pub m2: C64,
    pub m3: C64,
    pub sigma_l: C64,
}

impl CovariantTerms {
    pub fn as_array(&self) -> [C64; 7] {
        [self.k_bar, self.delta_k_j, self.delta_k_p, self.k_supp, self.m1, self.m2, self.m3]
    }
}

pub const TERM_NAMES: [&str; 7] = ["K_bar", "dK_j", "dK_p", "K_supp", "M1", "M2", "M3"];

/// Per-site densities of every covariant term, indexed [term][j][p] in the
/// order of [`TERM_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantDensities {
    pub terms: [Vec<Vec<C64>>; 7],
}

impl CovariantDensities {
    pub fn totals(&self) -> CovariantTerms {
        let t: Vec<C64> = self.terms.iter().map(|term| term.iter().flatten().sum()).collect();
        CovariantTerms {
            k_bar: t[0],
            delta_k_j: t[1],
            delta_k_p: t[2],
            k_supp: t[3],
            m1: t[4],
            m2: t[5],
            m3: t[6],
            sigma_l: t.iter().sum(),
        }
    }

    /// Σ_{j,p} |density| for one term.
    pub fn l1(&self, term: usize) -> f64 {
        self.terms[term].iter().flatten().map(|z| z.norm()).sum()
    }
}

/// Σ_L in the given frame, on grid base coordinates.
pub fn covariant_action(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    frame: &FrameSpec,
) -> Result<CovariantTerms> {
    let x = CoordinateField::grid(phi.n_sites(), phi.len().saturating_sub(1));
    Ok(covariant_densities(phi, psi, coin, frame, &x)?.totals())
}

/// Σ_L in the given frame for arbitrary base coordinates X; the frame sees
/// X' = ΛX.
pub fn covariant_action_with_base(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    frame: &FrameSpec,
    base: &CoordinateField,
) -> Result<CovariantTerms> {
    Ok(covariant_densities(phi, psi, coin, frame, base)?.totals())
}

type FieldOp<'a> = Box<dyn Fn(&SpinorField) -> SpinorField + Sync + 'a>;

/// Builds every covariant density in the frame.
///
/// Spinors are taken to frame components Φ' = S^{−1}B†Φ with
/// S = diag(λ, 1/λ); grid-basis operators act as O' = S B† O B S, which is
/// the SOLT image of their b_f representation; η' is the identity; the
/// tetrad, Δ and U_μ, V_μ come from the frame coordinates ΛX.
pub fn covariant_densities(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    frame: &FrameSpec,
    base: &CoordinateField,
) -> Result<CovariantDensities> {
    let frame = FrameSpec::new(frame.rapidity, frame.lambda)?;
    let w = *coin.require_homogeneous()?;
    let xf = base.transformed(frame.coordinate_map());
    let grads = coordinate_gradients(&xf)?;
    let j_count = check_inputs(phi, psi, grads.n_slices(), grads.n_sites())?;
    let sf = spin_frame_of(&w, frame.lambda)?;

    let lam = frame.lambda;
    let s = Mat2::diag(C64::new(lam, 0.0), C64::new(1.0 / lam, 0.0));
    let s_inv = Mat2::diag(C64::new(1.0 / lam, 0.0), C64::new(lam, 0.0));
    let to_primed = s_inv * sf.basis.adjoint();
    let from_primed = sf.basis * s;
    let out_primed = s * sf.basis.adjoint();
    let primed_op = |op: &FieldOp, f: &SpinorField| op(&f.apply_matrix(&from_primed)).apply_matrix(&out_primed);

    let ws = w * Mat2::sigma3();
    let (s3, sb3) = (Mat2::sigma3(), sf.sigma_bar3);
    let t = |f: &SpinorField| apply_translation(f, false);
    let one_minus_wc = move |f: &SpinorField| f.sub(&f.avg_c().apply_matrix(&w));
    let m1: FieldOp = Box::new(move |f| one_minus_wc(&f.add(&t(f)).scaled(C64::new(0.5, 0.0))));
    let m2: FieldOp = Box::new(move |f| one_minus_wc(&f.sub(&t(f)).scaled(C64::new(0.5, 0.0))));
    let k_supp: FieldOp = Box::new(move |f| f.sub(&t(f)));
    let dk_u: FieldOp = Box::new(move |f| f.apply_matrix(&(s3 - sb3)));
    let dk_v: FieldOp = Box::new(move |f| t(f).sub(f));
    let dk_j: FieldOp = Box::new(move |f| {
        let tm1 = t(f).sub(f);
        f.apply_matrix(&(s3 - sb3)).add(&tm1.apply_matrix(&sb3)).add(&tm1.apply_matrix(&(s3 - sb3))).apply_matrix(&ws)
    });

    let (u_l, v_l) = (frame.u_lower(), frame.v_lower());
    let gamma_sign = [-1.0, 1.0];
    let dp_diag = sf.d_p_matrix();

    let per_slice: Vec<Result<[Vec<C64>; 7]>> = par::map_tasks(j_count, |j| {
        let psi_p = psi.slice(j).apply_matrix(&to_primed);
        let phi_p = phi.slice(j).apply_matrix(&to_primed);
        let gj = time_gradient(phi, j).apply_matrix(&to_primed);
        let gp = phi_p.grad_p();
        let o_m1 = primed_op(&m1, &phi_p);
        let o_m2 = primed_op(&m2, &phi_p);
        let o_supp = primed_op(&k_supp, &gj);
        let o_dkj = primed_op(&dk_j, &gp);
        let o_dku = primed_op(&dk_u, &gj);
        let o_dkv = primed_op(&dk_v, &gj);
        let n = psi_p.n_sites();
        let mut out: [Vec<C64>; 7] = Default::default();
        for v in out.iter_mut() {
            v.reserve(n);
        }
        for p in 0..n {
            let g: &CoordGradient = &grads.slices[j][p];
            let delta = g.delta();
            let c = Tetrad::from_gradient(g)?;
            let a = psi_p.amps()[p];
            let (dj, dpv) = (gj.amps()[p], gp.amps()[p]);
            let mut kbar = ZERO;
            for f in 0..2 {
                let cj = c.cj0 + gamma_sign[f] * c.cj1;
                let cp = c.cp0 + gamma_sign[f] * c.cp1;
                kbar += a[f].conj() * (dj[f] * cj + dp_diag[f] * dpv[f] * cp);
            }
            let u_dj = u_l[0] * g.dj0 + u_l[1] * g.dj1;
            let v_dj = v_l[0] * g.dj0 + v_l[1] * g.dj1;
            let u_dp = u_l[0] * g.dp0 + u_l[1] * g.dp1;
            let v_dp = v_l[0] * g.dp0 + v_l[1] * g.dp1;
            let b = |f: &SpinorField| dot(&a, &f.amps()[p]);
            out[0].push(kbar * delta);
            out[1].push(b(&o_dkj) * v_dj);
            out[2].push(b(&o_dku) * u_dp - b(&o_dkv) * v_dp);
            out[3].push(b(&o_supp));
            out[4].push(b(&o_m1) * delta);
            out[5].push(b(&o_m2) * (u_dj + v_dp));
            out[6].push(b(&o_m2));
        }
        Ok(out)
    });
    let mut terms: [Vec<Vec<C64>>; 7] = Default::default();
    for slice in per_slice {
        for (dst, src) in terms.iter_mut().zip(slice?) {
            dst.push(src);
        }
    }
    Ok(CovariantDensities { terms })
}

/// 𝒯_a^u per slice, `components[a][u]` with a the lower (form) index and
/// u ∈ {j, p} the upper index.
#[derive(Debug, Clone, PartialEq)]
pub struct StressEnergyField {
    pub components: [[Vec<ScalarField>; 2]; 2],
}

impl StressEnergyField {
    pub fn n_slices(&self) -> usize {
        self.components[0][0].len()
    }

    pub fn get(&self, lower: usize, upper: usize) -> &[ScalarField] {
        &self.components[lower][upper]
    }

    /// Max residuals of ∇_j𝒯_a^j + ∇_p𝒯_a^p for a = 0, 1.
    pub fn conservation_residuals(&self) -> [f64; 2] {
        let r = |a: usize| {
            balance_residual_fields(&self.components[a][0], &self.components[a][1])
                .iter()
                .map(ScalarField::max_abs)
                .fold(0.0, f64::max)
        };
        [r(0), r(1)]
    }

    pub fn max_dist(&self, other: &StressEnergyField) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..2 {
            for u in 0..2 {
                for (x, y) in self.components[a][u].iter().zip(&other.components[a][u]) {
                    worst = worst.max(x.max_dist(y));
                }
            }
        }
        worst
    }
}

/// 𝒯_j^j = ℋ, 𝒯_j^p = 𝒥_ℋ, 𝒯_p^j = 𝒫, 𝒯_p^p = 𝒥_𝒫 on every slice.
pub fn stress_energy_grid(traj: &Trajectory, coin: &CoinField) -> Result<StressEnergyField> {
    coin.require_homogeneous()?;
    let mut c: [[Vec<ScalarField>; 2]; 2] = Default::default();
    for s in traj.slices() {
        c[0][0].push(energy_density(s, coin)?);
        c[0][1].push(energy_current(s, coin)?);
        c[1][0].push(momentum_density(s));
        c[1][1].push(momentum_current(s));
    }
    Ok(StressEnergyField { components: c })
}

/// 𝒯_a^u = C^j_a 𝒯_j^u + C^p_a 𝒯_p^u with constant C-coefficients.
pub fn stress_energy_transform(t: &StressEnergyField, c: &Tetrad) -> Result<StressEnergyField> {
    if c.det().abs() < 1e-12 || !c.det().is_finite() {
        return Err(WalkError::DegenerateCoordinates { j: 0, p: 0, det: c.det() });
    }
    let mut out: [[Vec<ScalarField>; 2]; 2] = Default::default();
    for a in 0..2 {
        for u in 0..2 {
            out[a][u] = t.components[0][u]
                .iter()
                .zip(&t.components[1][u])
                .map(|(tj, tp)| tj.scaled(C64::new(c.get(0, a), 0.0)).add(&tp.scaled(C64::new(c.get(1, a), 0.0))))
                .collect();
        }
    }
    Ok(StressEnergyField { components: out })
}

/// Convenience: transform to the coordinates of a frame.
pub fn stress_energy_in_frame(t: &StressEnergyField, frame: &FrameSpec) -> Result<StressEnergyField> {
    stress_energy_transform(t, &frame.tetrad())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extended::{onshell_psi, sigma_terms};
    use crate::lattice::evolve;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spin_frame_special_cases() {
        let f = spin_frame_of(&Mat2::sigma3(), 1.0).unwrap();
        assert_eq!(f.basis, Mat2::identity());
        assert!(f.sigma_bar3.dist(&Mat2::sigma3()) < 1e-15);

        let f = spin_frame_of(&Mat2::identity(), 1.0).unwrap();
        assert!(f.basis.dist(&Mat2::identity()) < 1e-15);
        assert!(f.alpha_l.abs() < 1e-15 && (f.alpha_r - std::f64::consts::PI).abs() < 1e-15);
        assert!(spin_frame_of(&Mat2::real(1.0, 1.0, 0.0, 1.0), 1.0).is_err());
        assert!(spin_frame_of(&Mat2::identity(), 0.0).is_err());
    }

    #[test]
    fn spin_frame_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let w = Mat2::haar(&mut rng);
            let f = spin_frame_of(&w, 1.3).unwrap();
            let ws = w * Mat2::sigma3();
            let d = f.basis.adjoint() * ws * f.basis;
            let target = Mat2::diag(C64::from_polar(1.0, f.alpha_l), C64::from_polar(1.0, f.alpha_r));
            assert!(d.dist(&target) < 1e-12);
            assert!(f.sigma_bar3.dist(&f.sigma_bar3.adjoint()) < 1e-12);
            assert!((f.sigma_bar3 * f.sigma_bar3).dist(&Mat2::identity()) < 1e-12);
            assert!((f.sigma_bar3 * ws).dist(&(ws * f.sigma_bar3)) < 1e-12);
            assert!(f.alpha_l <= f.alpha_r);
        }
    }

    #[test]
    fn solt_examples() {
        let a = C64::new(1.5, -0.5);
        let b = C64::new(-2.0, 0.25);
        let m = Mat2::new(a, C64::new(0.3, 0.1), C64::new(-0.7, 0.2), b);
        assert!(solt_transform(&m, 1.0).dist(&m) < 1e-15);
        let d = solt_transform(&Mat2::diag(a, b), 2.0);
        assert!(d.dist(&Mat2::diag(a * 4.0, b / 4.0)) < 1e-15);
        let anti = Mat2::new(ZERO, a, b, ZERO);
        assert!(solt_transform(&anti, 3.7).dist(&anti) < 1e-15);
    }

    #[test]
    fn frame_consistency() {
        let f = FrameSpec::from_rapidity(0.8);
        assert!((f.lambda * f.lambda - 0.8f64.exp()).abs() < 1e-12);
        assert!(FrameSpec::new(0.8, f.lambda).is_ok());
        assert!(matches!(FrameSpec::new(0.8, 1.0), Err(WalkError::InconsistentFrame { .. })));
        let g = FrameSpec::from_lambda(2.0).unwrap();
        assert!((g.rapidity - 2.0 * 2f64.ln()).abs() < 1e-15);
        // U·U = 1, V·V = −1, U·V = 0 in every frame.
        for phi in [-1.0, 0.3, 2.0] {
            let f = FrameSpec::from_rapidity(phi);
            assert!((minkowski(f.u_upper(), f.u_upper()) - 1.0).abs() < 1e-12);
            assert!((minkowski(f.v_upper(), f.v_upper()) + 1.0).abs() < 1e-12);
            assert!(minkowski(f.u_upper(), f.v_upper()).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_onto_orthogonal_of_u() {
        // With η = diag(1, −1), V·V = −1, so Π_{μν}A^ν = −(A·V)V_μ.
        for phi in [0.0, 0.4, -1.2] {
            let f = FrameSpec::from_rapidity(phi);
            let pi = f.projector();
            for a in [[1.0, 0.0], [0.3, -2.0], [-1.5, 0.7]] {
                let lhs = [pi[0][0] * a[0] + pi[0][1] * a[1], pi[1][0] * a[0] + pi[1][1] * a[1]];
                let av = minkowski(a, f.v_upper());
                let vl = f.v_lower();
                assert!((lhs[0] + av * vl[0]).abs() < 1e-12 && (lhs[1] + av * vl[1]).abs() < 1e-12);
                // Π annihilates U
                let pu = [
                    pi[0][0] * f.u_upper()[0] + pi[0][1] * f.u_upper()[1],
                    pi[1][0] * f.u_upper()[0] + pi[1][1] * f.u_upper()[1],
                ];
                assert!(pu[0].abs() < 1e-12 && pu[1].abs() < 1e-12);
            }
        }
    }

    fn onshell_pair(n: usize, steps: usize, seed: u64) -> (Trajectory, Trajectory, CoinField) {
        let coin = CoinField::random_haar(n, seed);
        let phi = evolve(&SpinorField::random(n, seed + 1), &coin, steps).unwrap();
        let psi = onshell_psi(&phi, &coin).unwrap();
        (phi, psi, coin)
    }

    fn random_traj(n: usize, len: usize, seed: u64) -> Trajectory {
        Trajectory::new((0..len as u64).map(|k| SpinorField::random(n, seed * 31 + k)).collect()).unwrap()
    }

    #[test]
    fn identity_frame_reproduces_sigma() {
        let coin = CoinField::random_haar(12, 4);
        let (phi, psi) = (random_traj(12, 5, 1), random_traj(12, 4, 2));
        let x = CoordinateField::grid(12, 4);
        let s = sigma_terms(&phi, &psi, &coin, &x).unwrap();
        let c = covariant_action(&phi, &psi, &coin, &FrameSpec::identity()).unwrap();
        assert!((c.sigma_l - s.sigma).norm() < 1e-12);
        assert!((c.m1 - s.m1).norm() < 1e-12 && (c.m3 - s.m3).norm() < 1e-12);
        assert!((c.k_bar + c.delta_k_j + c.delta_k_p - s.k_j - s.k_p).norm() < 1e-12);
        assert!(c.delta_k_j.norm() < 1e-12 && c.m2.norm() < 1e-12);

        // any base coordinates: Σ_L(identity) = Σ(X)
        let w = 2.0 * std::f64::consts::PI / 12.0;
        let bx = CoordinateField::affine(12, 4, [[1.2, 0.1], [0.2, 0.8]], [0.0; 2])
            .with_perturbation(|j, p| [0.03 * (w * p as f64 + j as f64).sin(), 0.02 * (w * p as f64).cos()]);
        let s = sigma_terms(&phi, &psi, &coin, &bx).unwrap();
        let c = covariant_action_with_base(&phi, &psi, &coin, &FrameSpec::identity(), &bx).unwrap();
        assert!((c.sigma_l - s.sigma).norm() < 1e-12);
    }

    #[test]
    fn every_term_is_frame_invariant() {
        let coin = CoinField::random_haar(10, 7);
        let (phi, psi) = (random_traj(10, 4, 3), random_traj(10, 3, 4));
        let base = covariant_action(&phi, &psi, &coin, &FrameSpec::identity()).unwrap();
        for phi_r in [-1.0, -0.5, 0.1, 0.5, 1.0] {
            let c = covariant_action(&phi, &psi, &coin, &FrameSpec::from_rapidity(phi_r)).unwrap();
            for (a, b) in c.as_array().iter().zip(base.as_array()) {
                assert!((a - b).norm() < 1e-10, "rapidity {phi_r}");
            }
        }
    }

    #[test]
    fn onshell_sigma_l_invariant_and_zero() {
        let (phi, psi, coin) = onshell_pair(16, 6, 3);
        let s0 = covariant_action(&phi, &psi, &coin, &FrameSpec::identity()).unwrap().sigma_l;
        let s1 = covariant_action(&phi, &psi, &coin, &FrameSpec::from_rapidity(0.5)).unwrap().sigma_l;
        assert!((s0 - s1).norm() < 1e-10 && s0.norm() < 1e-12);
    }

    #[test]
    fn wrong_lambda_breaks_invariance() {
        // The opposite pairing λ = e^{−φ/2} is rejected by FrameSpec::new.
        assert!(FrameSpec::new(0.5, (-0.25f64).exp()).is_err());
    }

    #[test]
    fn boosted_volume_is_one() {
        for phi in [0.1, 0.5, 1.0, -2.0] {
            let f = FrameSpec::from_rapidity(phi);
            let x = CoordinateField::grid(8, 3).transformed(f.coordinate_map());
            let g = coordinate_gradients(&x).unwrap();
            assert!(g.slices.iter().flatten().all(|g| (g.delta() - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn stress_energy_grid_components() {
        let (phi, _, coin) = onshell_pair(16, 5, 8);
        let t = stress_energy_grid(&phi, &coin).unwrap();
        for (j, s) in phi.slices().iter().enumerate() {
            assert!(t.get(0, 0)[j].max_dist(&energy_density(s, &coin).unwrap()) < 1e-13);
            assert!(t.get(1, 1)[j].max_dist(&momentum_current(s)) < 1e-13);
        }
        let z = stress_energy_grid(&Trajectory::new(vec![SpinorField::zeros(8); 2]).unwrap(), &CoinField::identity(8))
            .unwrap();
        assert!(z.components.iter().flatten().flatten().all(|f| f.max_abs() == 0.0));

        let pw = Trajectory::new(vec![SpinorField::plane_wave(16, 3, crate::lattice::Component::Minus)]).unwrap();
        let t = stress_energy_grid(&pw, &coin).unwrap();
        for comp in t.components.iter().flatten() {
            let v = comp[0].values();
            assert!(v.iter().all(|z| (z - v[0]).norm() < 1e-15));
        }
    }

    #[test]
    fn stress_energy_transform_examples() {
        let (phi, _, coin) = onshell_pair(16, 6, 2);
        let t = stress_energy_grid(&phi, &coin).unwrap();
        assert!(stress_energy_transform(&t, &Tetrad::IDENTITY).unwrap().max_dist(&t) < 1e-15);

        let r = 0.6f64;
        let spec_boost = CoordinateField::affine(16, 1, [[r.cosh(), -r.sinh()], [-r.sinh(), r.cosh()]], [0.0; 2]);
        let c = crate::extended::c_coefficients(&spec_boost).unwrap()[0][0];
        let b = stress_energy_transform(&t, &c).unwrap();
        for j in 0..t.n_slices() {
            let expect =
                t.get(0, 0)[j].scaled(C64::new(r.cosh(), 0.0)).add(&t.get(1, 0)[j].scaled(C64::new(r.sinh(), 0.0)));
            assert!(b.get(0, 0)[j].max_dist(&expect) < 1e-13);
        }
        for phi_r in [0.1, 0.5, 1.0] {
            let tf = stress_energy_in_frame(&t, &FrameSpec::from_rapidity(phi_r)).unwrap();
            let [r0, r1] = tf.conservation_residuals();
            assert!(r0 < 1e-12 && r1 < 1e-12);
        }
        let degenerate = Tetrad { cj0: 1.0, cp0: 1.0, cj1: 1.0, cp1: 1.0 };
        assert!(stress_energy_transform(&t, &degenerate).is_err());
    }
}
