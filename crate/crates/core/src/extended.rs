//! Space-time coordinates on the grid and the extended action Σ.
//!
//! All terms share one density convention: a bilinear Ψ†_{j,p}(OΦ_j)_p
//! multiplied by geometric scalars built from ∇X at the same (j, p).

use crate::error::{Result, WalkError};
use crate::lattice::{apply_translation, step, step_adjoint, CoinField, SpinorField, Trajectory};
use crate::linalg::{dot, Mat2, Spinor, C64, ZERO};
use crate::observables::{
    balance_residual_fields, energy_current, energy_density, momentum_current, momentum_density, ScalarField,
};
use crate::par;
use crate::stencil::neighbours;
use serde::Serialize;

/// Coordinates X^μ_{j,p} = A^μ_ν (j, p)^ν + b^μ + δX^μ_{j,p}.
///
/// The affine part is evaluated at the unwrapped index, so linear maps such
/// as the grid or a boost are exact on the torus. The periodic perturbation
/// δX is stored for the time slices j = −1 … n_slices−1 that the gradient
/// stencils reach.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateField {
    n_sites: usize,
    n_slices: usize,
    affine: [[f64; 2]; 2],
    offset: [f64; 2],
    perturbation: Option<Vec<Vec<[f64; 2]>>>,
}

impl CoordinateField {
    pub fn affine(n_sites: usize, n_slices: usize, matrix: [[f64; 2]; 2], offset: [f64; 2]) -> Self {
        CoordinateField { n_sites, n_slices, affine: matrix, offset, perturbation: None }
    }

    /// X⁰ = j, X¹ = p.
    pub fn grid(n_sites: usize, n_slices: usize) -> Self {
        CoordinateField::affine(n_sites, n_slices, [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])
    }

    /// Adds a periodic perturbation `f(j, p)` for j = −1 … n_slices−1.
    pub fn with_perturbation(mut self, f: impl Fn(isize, usize) -> [f64; 2]) -> Self {
        let table = (-1..self.n_slices as isize).map(|j| (0..self.n_sites).map(|p| f(j, p)).collect()).collect();
        self.perturbation = Some(table);
        self
    }

    /// Shifts X^μ at one stored point; used for chain-rule checks.
    pub fn nudged(&self, j: isize, p: usize, mu: usize, by: f64) -> Self {
        let mut out = self.clone();
        let (n, s) = (self.n_sites, self.n_slices);
        let table = out.perturbation.get_or_insert_with(|| vec![vec![[0.0; 2]; n]; s + 1]);
        table[(j + 1) as usize][p][mu] += by;
        out
    }

    /// X' = L X for a constant 2x2 matrix L.
    pub fn transformed(&self, l: [[f64; 2]; 2]) -> Self {
        let apply = |v: [f64; 2]| [l[0][0] * v[0] + l[0][1] * v[1], l[1][0] * v[0] + l[1][1] * v[1]];
        let a = &self.affine;
        let col0 = apply([a[0][0], a[1][0]]);
        let col1 = apply([a[0][1], a[1][1]]);
        CoordinateField {
            n_sites: self.n_sites,
            n_slices: self.n_slices,
            affine: [[col0[0], col1[0]], [col0[1], col1[1]]],
            offset: apply(self.offset),
            perturbation: self
                .perturbation
                .as_ref()
                .map(|t| t.iter().map(|row| row.iter().map(|&d| apply(d)).collect()).collect()),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    /// X at slice j ∈ [−1, n_slices) and unwrapped site index p.
    pub fn value(&self, j: isize, p: isize) -> [f64; 2] {
        let a = &self.affine;
        let (jf, pf) = (j as f64, p as f64);
        let mut x = [a[0][0] * jf + a[0][1] * pf + self.offset[0], a[1][0] * jf + a[1][1] * pf + self.offset[1]];
        if let Some(t) = &self.perturbation {
            let d = t[(j + 1) as usize][crate::stencil::wrap(p, self.n_sites)];
            x[0] += d[0];
            x[1] += d[1];
        }
        x
    }
}

/// The four coordinate gradients at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoordGradient {
    /// ∇_j X⁰
    pub dj0: f64,
    /// ∇_p X⁰
    pub dp0: f64,
    /// ∇_j X¹
    pub dj1: f64,
    /// ∇_p X¹
    pub dp1: f64,
}

impl CoordGradient {
    pub const GRID: CoordGradient = CoordGradient { dj0: 1.0, dp0: 0.0, dj1: 0.0, dp1: 1.0 };

    /// Δ(∇X) = ∇_jX⁰ ∇_pX¹ − ∇_pX⁰ ∇_jX¹.
    pub fn delta(&self) -> f64 {
        self.dj0 * self.dp1 - self.dp0 * self.dj1
    }

    pub fn get(&self, slot: GradientSlot) -> f64 {
        match slot {
            GradientSlot::Dj0 => self.dj0,
            GradientSlot::Dp0 => self.dp0,
            GradientSlot::Dj1 => self.dj1,
            GradientSlot::Dp1 => self.dp1,
        }
    }

    pub fn slot_mut(&mut self, slot: GradientSlot) -> &mut f64 {
        match slot {
            GradientSlot::Dj0 => &mut self.dj0,
            GradientSlot::Dp0 => &mut self.dp0,
            GradientSlot::Dj1 => &mut self.dj1,
            GradientSlot::Dp1 => &mut self.dp1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSlot {
    Dj0,
    Dp0,
    Dj1,
    Dp1,
}

impl GradientSlot {
    pub const ALL: [GradientSlot; 4] = [GradientSlot::Dj0, GradientSlot::Dp0, GradientSlot::Dj1, GradientSlot::Dp1];
}

/// Components C^q_a of the inverse Jacobian (the 2-bein e^q_a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tetrad {
    pub cj0: f64,
    pub cp0: f64,
    pub cj1: f64,
    pub cp1: f64,
}

impl Tetrad {
    pub const IDENTITY: Tetrad = Tetrad { cj0: 1.0, cp0: 0.0, cj1: 0.0, cp1: 1.0 };

    pub fn from_gradient(g: &CoordGradient) -> Result<Tetrad> {
        let d = g.delta();
        if d.abs() < DEGENERATE_TOL || !d.is_finite() {
            return Err(WalkError::DegenerateCoordinates { j: 0, p: 0, det: d });
        }
        Ok(Tetrad { cj0: g.dp1 / d, cp0: -g.dj1 / d, cj1: -g.dp0 / d, cp1: g.dj0 / d })
    }

    pub fn det(&self) -> f64 {
        self.cj0 * self.cp1 - self.cp0 * self.cj1
    }

    /// C^q_a for q ∈ {j, p} (0, 1) and a ∈ {0, 1}.
    pub fn get(&self, q: usize, a: usize) -> f64 {
        match (q, a) {
            (0, 0) => self.cj0,
            (1, 0) => self.cp0,
            (0, 1) => self.cj1,
            _ => self.cp1,
        }
    }
}

const DEGENERATE_TOL: f64 = 1e-12;

/// Gradients for slices j = 0 … n_slices−1.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub slices: Vec<Vec<CoordGradient>>,
}

impl GradientField {
    pub fn uniform(n_sites: usize, n_slices: usize, g: CoordGradient) -> Self {
        GradientField { slices: vec![vec![g; n_sites]; n_slices] }
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn n_sites(&self) -> usize {
        self.slices.first().map_or(0, Vec::len)
    }

    fn check_nondegenerate(&self) -> Result<()> {
        for (j, row) in self.slices.iter().enumerate() {
            for (p, g) in row.iter().enumerate() {
                let det = g.delta();
                if det.abs() < DEGENERATE_TOL || !det.is_finite() {
                    return Err(WalkError::DegenerateCoordinates { j, p, det });
                }
            }
        }
        Ok(())
    }
}

/// (∇_jX)_{j,p} = (X_{j,p−1} + X_{j,p+1})/2 − X_{j−1,p},
/// (∇_pX)_{j,p} = (X_{j,p+1} − X_{j,p−1})/2.
pub fn coordinate_gradients(x: &CoordinateField) -> Result<GradientField> {
    let n = x.n_sites as isize;
    let slices = (0..x.n_slices as isize)
        .map(|j| {
            (0..n)
                .map(|p| {
                    let (lo, hi, prev) = (x.value(j, p - 1), x.value(j, p + 1), x.value(j - 1, p));
                    CoordGradient {
                        dj0: 0.5 * (lo[0] + hi[0]) - prev[0],
                        dp0: 0.5 * (hi[0] - lo[0]),
                        dj1: 0.5 * (lo[1] + hi[1]) - prev[1],
                        dp1: 0.5 * (hi[1] - lo[1]),
                    }
                })
                .collect()
        })
        .collect();
    let field = GradientField { slices };
    field.check_nondegenerate()?;
    Ok(field)
}

pub fn c_coefficients(x: &CoordinateField) -> Result<Vec<Vec<Tetrad>>> {
    let g = coordinate_gradients(x)?;
    g.slices
        .iter()
        .enumerate()
        .map(|(j, row)| {
            row.iter()
                .enumerate()
                .map(|(p, g)| {
                    Tetrad::from_gradient(g).map_err(|_| WalkError::DegenerateCoordinates { j, p, det: g.delta() })
                })
                .collect()
        })
        .collect()
}

/// Totals of the terms of Σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaTerms {
    pub m1: C64,
    pub m2: C64,
    pub m3: C64,
    pub k_j: C64,
    pub k_p: C64,
    pub k_supp: C64,
    pub sigma: C64,
}

/// Bilinears Ψ†(OΦ) at one site for the operators entering Σ.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Bilinears {
    /// (1 − WC)(1 + T)/2 Φ
    pub o1: C64,
    /// (1 − WC)(1 − T)/2 Φ
    pub o2: C64,
    /// Wσ₃ ∇_pΦ
    pub ws_gp: C64,
    /// U ∇_pΦ
    pub u_gp: C64,
    /// σ₃ ∇_jΦ
    pub s3_gj: C64,
    /// T ∇_jΦ
    pub t_gj: C64,
    /// (1 − T) ∇_jΦ
    pub supp: C64,
}

/// Inputs validated for Σ: J action slices need Φ_0..Φ_J and Ψ_0..Ψ_{J−1}.
pub(crate) fn check_inputs(
    phi: &Trajectory,
    psi: &Trajectory,
    n_grad_slices: usize,
    n_grad_sites: usize,
) -> Result<usize> {
    phi.require_len(2)?;
    let j_count = phi.len() - 1;
    if psi.len() < j_count {
        return Err(WalkError::TrajectoryTooShort { needed: j_count, found: psi.len() });
    }
    if psi.n_sites() != phi.n_sites() {
        return Err(WalkError::DimensionMismatch { expected: phi.n_sites(), found: psi.n_sites() });
    }
    if n_grad_sites != phi.n_sites() {
        return Err(WalkError::DimensionMismatch { expected: phi.n_sites(), found: n_grad_sites });
    }
    if n_grad_slices != j_count {
        return Err(WalkError::DimensionMismatch { expected: j_count, found: n_grad_slices });
    }
    Ok(j_count)
}

/// ∇_jΦ = Φ_{j+1} − Φ_j.
pub(crate) fn time_gradient(phi: &Trajectory, j: usize) -> SpinorField {
    phi.slice(j + 1).sub(phi.slice(j))
}

/// Applies (1 − WC) to a field.
fn one_minus_wc(f: &SpinorField, w: &Mat2) -> SpinorField {
    f.sub(&f.avg_c().apply_matrix(w))
}

pub(crate) fn slice_bilinears(
    psi: &SpinorField,
    phi: &SpinorField,
    grad_j: &SpinorField,
    coin: &CoinField,
) -> Result<Vec<Bilinears>> {
    let w = coin.require_homogeneous()?;
    let t_phi = apply_translation(phi, false);
    let half_plus = phi.add(&t_phi).scaled(C64::new(0.5, 0.0));
    let half_minus = phi.sub(&t_phi).scaled(C64::new(0.5, 0.0));
    let o1 = one_minus_wc(&half_plus, w);
    let o2 = one_minus_wc(&half_minus, w);
    let gp = phi.grad_p();
    let ws_gp = gp.apply_matrix(&(*w * Mat2::sigma3()));
    let u_gp = step(&gp, coin)?;
    let s3_gj = grad_j.apply_matrix(&Mat2::sigma3());
    let t_gj = apply_translation(grad_j, false);
    let supp = grad_j.sub(&t_gj);
    let a = psi.amps();
    Ok(par::map_range(psi.n_sites(), |p| Bilinears {
        o1: dot(&a[p], &o1.amps()[p]),
        o2: dot(&a[p], &o2.amps()[p]),
        ws_gp: dot(&a[p], &ws_gp.amps()[p]),
        u_gp: dot(&a[p], &u_gp.amps()[p]),
        s3_gj: dot(&a[p], &s3_gj.amps()[p]),
        t_gj: dot(&a[p], &t_gj.amps()[p]),
        supp: dot(&a[p], &supp.amps()[p]),
    }))
}

/// Per-site term densities, in the order (M¹, M², M³, K^j, K^p, K^supp).
fn term_densities(b: &Bilinears, g: &CoordGradient) -> [C64; 6] {
    [
        b.o1 * g.delta(),
        b.o2 * (g.dj0 - g.dp1),
        b.o2,
        -b.ws_gp * g.dj0 - b.u_gp * g.dj1,
        b.s3_gj * g.dp0 + b.t_gj * g.dp1,
        b.supp,
    ]
}

/// Σ = Σ_j (K_j + M_j) with coordinates X.
pub fn sigma_terms(phi: &Trajectory, psi: &Trajectory, coin: &CoinField, x: &CoordinateField) -> Result<SigmaTerms> {
    sigma_terms_from_gradients(phi, psi, coin, &coordinate_gradients(x)?)
}

/// Σ evaluated on explicit gradient values, treating each of the four
/// gradients per site as an independent variable.
pub fn sigma_terms_from_gradients(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    grads: &GradientField,
) -> Result<SigmaTerms> {
    let j_count = check_inputs(phi, psi, grads.n_slices(), grads.n_sites())?;
    coin.require_homogeneous()?;
    let mut acc = [ZERO; 6];
    for j in 0..j_count {
        let b = slice_bilinears(psi.slice(j), phi.slice(j), &time_gradient(phi, j), coin)?;
        for (bp, g) in b.iter().zip(&grads.slices[j]) {
            for (a, d) in acc.iter_mut().zip(term_densities(bp, g)) {
                *a += d;
            }
        }
    }
    Ok(SigmaTerms {
        m1: acc[0],
        m2: acc[1],
        m3: acc[2],
        k_j: acc[3],
        k_p: acc[4],
        k_supp: acc[5],
        sigma: acc.iter().sum(),
    })
}

/// The alternate action S̃ = Σ_j ⟨Ψ_j | ∇_jΦ − Wσ₃∇_pΦ − (WC − 1)Φ⟩ for
/// independent Φ and Ψ.
pub fn alternate_action(phi: &Trajectory, psi: &Trajectory, coin: &CoinField) -> Result<C64> {
    let w = *coin.require_homogeneous()?;
    let j_count = check_inputs(phi, psi, phi.len() - 1, phi.n_sites())?;
    let mut total = ZERO;
    for j in 0..j_count {
        let f = phi.slice(j);
        let rhs = time_gradient(phi, j)
            .sub(&f.grad_p().apply_matrix(&(w * Mat2::sigma3())))
            .sub(&f.avg_c().apply_matrix(&w).sub(f));
        total += psi.slice(j).inner(&rhs);
    }
    Ok(total)
}

/// Diagnostic: S̃ with ∇_j → C^j_0∇_j + C^p_0∇_p and ∇_p → C^j_1∇_j + C^p_1∇_p.
/// Not claimed to be a correct extended action; exposed for comparison.
pub fn naive_coordinate_action(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    x: &CoordinateField,
) -> Result<C64> {
    let w = *coin.require_homogeneous()?;
    let grads = coordinate_gradients(x)?;
    let j_count = check_inputs(phi, psi, grads.n_slices(), grads.n_sites())?;
    let ws = w * Mat2::sigma3();
    let mut total = ZERO;
    for j in 0..j_count {
        let f = phi.slice(j);
        let (gj, gp) = (time_gradient(phi, j), f.grad_p());
        let wcm1 = f.avg_c().apply_matrix(&w).sub(f);
        for p in 0..f.n_sites() {
            let c = Tetrad::from_gradient(&grads.slices[j][p])?;
            let d0 = lin(c.cj0, &gj.amps()[p], c.cp0, &gp.amps()[p]);
            let d1 = ws.apply(&lin(c.cj1, &gj.amps()[p], c.cp1, &gp.amps()[p]));
            let r = [d0[0] - d1[0] - wcm1.amps()[p][0], d0[1] - d1[1] - wcm1.amps()[p][1]];
            total += dot(&psi.slice(j).amps()[p], &r);
        }
    }
    Ok(total)
}

fn lin(a: f64, x: &Spinor, b: f64, y: &Spinor) -> Spinor {
    [x[0] * a + y[0] * b, x[1] * a + y[1] * b]
}

/// δΣ/δ(∇X) per slice and site.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDerivatives {
    /// δΣ/δ(∇_jX⁰)
    pub dj0: Vec<ScalarField>,
    /// δΣ/δ(∇_pX⁰)
    pub dp0: Vec<ScalarField>,
    /// δΣ/δ(∇_jX¹)
    pub dj1: Vec<ScalarField>,
    /// δΣ/δ(∇_pX¹)
    pub dp1: Vec<ScalarField>,
}

impl FunctionalDerivatives {
    pub fn slot(&self, slot: GradientSlot) -> &[ScalarField] {
        match slot {
            GradientSlot::Dj0 => &self.dj0,
            GradientSlot::Dp0 => &self.dp0,
            GradientSlot::Dj1 => &self.dj1,
            GradientSlot::Dp1 => &self.dp1,
        }
    }
}

/// Closed forms of the four functional derivatives of Σ:
///
/// ```text
/// δΣ/δ∇_jX⁰ = Ψ†(−Wσ₃∇_pΦ + m²Φ + m¹Φ ∇_pX¹)
/// δΣ/δ∇_pX⁰ = Ψ†( σ₃∇_jΦ        − m¹Φ ∇_jX¹)
/// δΣ/δ∇_jX¹ = Ψ†(−U∇_pΦ         − m¹Φ ∇_pX⁰)
/// δΣ/δ∇_pX¹ = Ψ†( T∇_jΦ  − m²Φ  + m¹Φ ∇_jX⁰)
/// ```
/// with m¹ = (1 − WC)(1 + T)/2 and m² = (1 − WC)(1 − T)/2.
pub fn functional_derivatives_closed_form(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    x: &CoordinateField,
) -> Result<FunctionalDerivatives> {
    functional_derivatives_from_gradients(phi, psi, coin, &coordinate_gradients(x)?)
}

pub fn functional_derivatives_from_gradients(
    phi: &Trajectory,
    psi: &Trajectory,
    coin: &CoinField,
    grads: &GradientField,
) -> Result<FunctionalDerivatives> {
    let j_count = check_inputs(phi, psi, grads.n_slices(), grads.n_sites())?;
    coin.require_homogeneous()?;
    let mut out = FunctionalDerivatives { dj0: vec![], dp0: vec![], dj1: vec![], dp1: vec![] };
    for j in 0..j_count {
        let b = slice_bilinears(psi.slice(j), phi.slice(j), &time_gradient(phi, j), coin)?;
        let g = &grads.slices[j];
        let field = |f: &dyn Fn(&Bilinears, &CoordGradient) -> C64| {
            ScalarField::new(b.iter().zip(g).map(|(b, g)| f(b, g)).collect())
        };
        out.dj0.push(field(&|b, g| -b.ws_gp + b.o2 + b.o1 * g.dp1));
        out.dp0.push(field(&|b, g| b.s3_gj - b.o1 * g.dj1));
        out.dj1.push(field(&|b, g| -b.u_gp - b.o1 * g.dp0));
        out.dp1.push(field(&|b, g| b.t_gj - b.o2 + b.o1 * g.dj0));
    }
    Ok(out)
}

/// Outcome of comparing the closed-form derivatives with the walk's
/// energy-momentum densities on grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnShellReport {
    /// max |δΣ/δ∇X − (−ℋ, −𝒥_ℋ, −𝒫, −𝒥_𝒫)| over all sites and slices
    pub max_discrepancy: f64,
    /// local balance of the energy row of the derived stress-energy
    pub energy_residual: f64,
    /// local balance of the momentum row
    pub momentum_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const ONSHELL_TOL: f64 = 1e-12;

/// Sets Ψ_j = UΦ_j, evaluates the closed forms on grid coordinates and
/// compares them with −ℋ, −𝒥_ℋ, −𝒫, −𝒥_𝒫 computed from Ψ_j.
pub fn onshell_energy_momentum_check(phi: &Trajectory, coin: &CoinField) -> Result<OnShellReport> {
    let psi = onshell_psi(phi, coin)?;
    let x = CoordinateField::grid(phi.n_sites(), phi.len() - 1);
    let d = functional_derivatives_closed_form(phi, &psi, coin, &x)?;
    let mut worst: f64 = 0.0;
    let neg = C64::new(-1.0, 0.0);
    for j in 0..phi.len() - 1 {
        let s = psi.slice(j);
        worst = worst
            .max(d.dj0[j].max_dist(&energy_density(s, coin)?.scaled(neg)))
            .max(d.dp0[j].max_dist(&energy_current(s, coin)?.scaled(neg)))
            .max(d.dj1[j].max_dist(&momentum_density(s).scaled(neg)))
            .max(d.dp1[j].max_dist(&momentum_current(s).scaled(neg)));
    }
    let max_of = |fs: Vec<ScalarField>| fs.iter().map(ScalarField::max_abs).fold(0.0, f64::max);
    let energy_residual = max_of(balance_residual_fields(&d.dj0, &d.dp0));
    let momentum_residual = max_of(balance_residual_fields(&d.dj1, &d.dp1));
    Ok(OnShellReport {
        max_discrepancy: worst,
        energy_residual,
        momentum_residual,
        tolerance: ONSHELL_TOL,
        passed: worst < ONSHELL_TOL,
    })
}

/// Ψ_j = UΦ_j for every slice of Φ.
pub fn onshell_psi(phi: &Trajectory, coin: &CoinField) -> Result<Trajectory> {
    Trajectory::new(phi.slices().iter().map(|s| step(s, coin)).collect::<Result<_>>()?)
}

/// Φ_j = U†Ψ_j for every slice.
pub fn pullback_phi(psi: &Trajectory, coin: &CoinField) -> Result<Trajectory> {
    Trajectory::new(psi.slices().iter().map(|s| step_adjoint(s, coin)).collect::<Result<_>>()?)
}

/// Convenience: the per-site values of ∂Σ/∂X^μ_{j,p} obtained by chaining
/// the closed forms through the gradient stencils, for slices whose
/// coordinates only enter interior gradients (0 ≤ j ≤ J−2).
pub fn coordinate_derivative(d: &FunctionalDerivatives, j: usize, p: usize, mu: usize) -> C64 {
    let (dj, dp) = if mu == 0 { (&d.dj0, &d.dp0) } else { (&d.dj1, &d.dp1) };
    let n = dj[j].n_sites();
    let (lo, hi) = neighbours(p, n);
    let mut v = (dj[j].get(hi) + dj[j].get(lo)) * 0.5 + (dp[j].get(lo) - dp[j].get(hi)) * 0.5;
    if j + 1 < dj.len() {
        v -= dj[j + 1].get(p);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{evolve, Component};

    fn random_traj(n: usize, len: usize, seed: u64) -> Trajectory {
        Trajectory::new((0..len as u64).map(|k| SpinorField::random(n, seed * 100 + k)).collect()).unwrap()
    }

    fn smooth_x(n: usize, slices: usize) -> CoordinateField {
        let w = 2.0 * std::f64::consts::PI / n as f64;
        CoordinateField::affine(n, slices, [[1.1, 0.2], [-0.3, 0.9]], [0.5, -1.0]).with_perturbation(|j, p| {
            let (jf, pf) = (j as f64, p as f64);
            [0.05 * (w * pf + 0.3 * jf).sin(), 0.04 * (2.0 * w * pf - 0.1 * jf).cos()]
        })
    }

    #[test]
    fn grid_and_boost_gradients() {
        let g = coordinate_gradients(&CoordinateField::grid(8, 3)).unwrap();
        for row in &g.slices {
            for x in row {
                assert_eq!(*x, CoordGradient::GRID);
            }
        }
        let (c, s) = (0.7f64.cosh(), 0.7f64.sinh());
        let b = CoordinateField::affine(8, 3, [[c, -s], [-s, c]], [0.0; 2]);
        let g = coordinate_gradients(&b).unwrap();
        for x in g.slices.iter().flatten() {
            assert!((x.dj0 - c).abs() < 1e-13 && (x.dp0 + s).abs() < 1e-13);
            assert!((x.dj1 + s).abs() < 1e-13 && (x.dp1 - c).abs() < 1e-13);
            assert!((x.delta() - 1.0).abs() < 1e-13);
        }
        let t = c_coefficients(&b).unwrap();
        for x in t.iter().flatten() {
            assert!((x.cj0 - c).abs() < 1e-13 && (x.cp0 - s).abs() < 1e-13);
            assert!((x.cj1 - s).abs() < 1e-13 && (x.cp1 - c).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_maps_are_exact() {
        let m = [[2.0, 0.5], [-1.5, 3.0]];
        let g = coordinate_gradients(&CoordinateField::affine(6, 4, m, [3.0, 7.0])).unwrap();
        for x in g.slices.iter().flatten() {
            assert!((x.dj0 - 2.0).abs() < 1e-13 && (x.dp0 - 0.5).abs() < 1e-13);
            assert!((x.dj1 + 1.5).abs() < 1e-13 && (x.dp1 - 3.0).abs() < 1e-13);
            assert!((x.delta() - (6.0 + 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_rejected() {
        let x = CoordinateField::affine(6, 2, [[1.0, 2.0], [2.0, 4.0]], [0.0; 2]);
        assert!(matches!(coordinate_gradients(&x), Err(WalkError::DegenerateCoordinates { .. })));
        assert!(c_coefficients(&x).is_err());
    }

    #[test]
    fn tetrad_inverts_gradient() {
        let x = smooth_x(16, 5);
        let g = coordinate_gradients(&x).unwrap();
        let t = c_coefficients(&x).unwrap();
        for (gr, tr) in g.slices.iter().zip(&t) {
            for (g, c) in gr.iter().zip(tr) {
                // (C^q_a)(∇_q X^b) = δ_a^b
                let m = [[g.dj0, g.dj1], [g.dp0, g.dp1]]; // m[q][b]
                for a in 0..2 {
                    for bb in 0..2 {
                        let s: f64 = (0..2).map(|q| c.get(q, a) * m[q][bb]).sum();
                        assert!((s - if a == bb { 1.0 } else { 0.0 }).abs() < 1e-12);
                    }
                }
                assert!((c.det() - 1.0 / g.delta()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sigma_on_grid_is_alternate_action() {
        let coin = CoinField::random_haar(12, 3);
        let (phi, psi) = (random_traj(12, 5, 1), random_traj(12, 4, 2));
        let x = CoordinateField::grid(12, 4);
        let s = sigma_terms(&phi, &psi, &coin, &x).unwrap();
        let st = alternate_action(&phi, &psi, &coin).unwrap();
        assert!((s.sigma - st).norm() < 1e-12);
        assert_eq!(s.m2, ZERO);
    }

    #[test]
    fn sigma_vanishes_on_shell_and_for_zero_fields() {
        let coin = CoinField::random_haar(12, 3);
        let phi = evolve(&SpinorField::random(12, 8), &coin, 6).unwrap();
        let psi = onshell_psi(&phi, &coin).unwrap();
        let x = CoordinateField::grid(12, 6);
        assert!(sigma_terms(&phi, &psi, &coin, &x).unwrap().sigma.norm() < 1e-12);

        let zero = Trajectory::new(vec![SpinorField::zeros(12); 3]).unwrap();
        let s = sigma_terms(&zero, &zero, &coin, &smooth_x(12, 2)).unwrap();
        for v in [s.m1, s.m2, s.m3, s.k_j, s.k_p, s.k_supp, s.sigma] {
            assert_eq!(v, ZERO);
        }
        let d = functional_derivatives_closed_form(&zero, &zero, &coin, &smooth_x(12, 2)).unwrap();
        assert!(d.dj0.iter().chain(&d.dp1).all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn closed_forms_match_gradient_slot_differences() {
        let n = 8;
        let coin = CoinField::random_haar(n, 5);
        let (phi, psi) = (random_traj(n, 4, 3), random_traj(n, 3, 4));
        let base = coordinate_gradients(&smooth_x(n, 3)).unwrap();
        let d = functional_derivatives_from_gradients(&phi, &psi, &coin, &base).unwrap();
        let h = 1e-5;
        for slot in GradientSlot::ALL {
            for j in 0..3 {
                for p in 0..n {
                    let shifted = |by: f64| {
                        let mut g = base.clone();
                        *g.slices[j][p].slot_mut(slot) += by;
                        sigma_terms_from_gradients(&phi, &psi, &coin, &g).unwrap().sigma
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    assert!((fd - d.slot(slot)[j].get(p)).norm() < 1e-6, "{slot:?} j={j} p={p}");
                }
            }
        }
    }

    #[test]
    fn chain_rule_through_coordinates() {
        let n = 8;
        let coin = CoinField::random_haar(n, 6);
        let (phi, psi) = (random_traj(n, 4, 5), random_traj(n, 3, 6));
        let x = smooth_x(n, 3);
        let d = functional_derivatives_closed_form(&phi, &psi, &coin, &x).unwrap();
        let h = 1e-5;
        for mu in 0..2 {
            for j in 0..3 {
                for p in 0..n {
                    let at = |by: f64| sigma_terms(&phi, &psi, &coin, &x.nudged(j as isize, p, mu, by)).unwrap().sigma;
                    let fd = (at(h) - at(-h)) / (2.0 * h);
                    assert!((fd - coordinate_derivative(&d, j, p, mu)).norm() < 1e-6, "mu={mu} j={j} p={p}");
                }
            }
        }
    }

    #[test]
    fn onshell_identification() {
        let coin = CoinField::random_haar(16, 11);
        let phi = evolve(&SpinorField::random(16, 3), &coin, 8).unwrap();
        let r = onshell_energy_momentum_check(&phi, &coin).unwrap();
        assert!(r.passed && r.max_discrepancy < 1e-12, "{r:?}");
        assert!(r.energy_residual < 1e-12 && r.momentum_residual < 1e-12);

        let id = CoinField::identity(16);
        let phi = evolve(&SpinorField::random(16, 3), &id, 8).unwrap();
        assert!(onshell_energy_momentum_check(&phi, &id).unwrap().max_discrepancy < 1e-14);

        let off = random_traj(16, 5, 9);
        let r = onshell_energy_momentum_check(&off, &coin).unwrap();
        assert!(!r.passed && r.max_discrepancy > 1e-3);
    }

    #[test]
    fn naive_action_reduces_on_grid() {
        let coin = CoinField::random_haar(10, 2);
        let (phi, psi) = (random_traj(10, 4, 7), random_traj(10, 3, 8));
        let naive = naive_coordinate_action(&phi, &psi, &coin, &CoordinateField::grid(10, 3)).unwrap();
        assert!((naive - alternate_action(&phi, &psi, &coin).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn inputs_are_validated() {
        let coin = CoinField::random_field(8, 1);
        let t = random_traj(8, 3, 1);
        assert_eq!(sigma_terms(&t, &t, &coin, &CoordinateField::grid(8, 2)).unwrap_err(), WalkError::InhomogeneousCoin);
        let coin = CoinField::identity(8);
        assert!(sigma_terms(&t, &t, &coin, &CoordinateField::grid(8, 5)).is_err());
        let psi = Trajectory::new(vec![SpinorField::delta(8, 0, Component::Plus)]).unwrap();
        assert!(sigma_terms(&t, &psi, &coin, &CoordinateField::grid(8, 2)).is_err());
    }
}
