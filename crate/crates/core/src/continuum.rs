//! Continuum limit of the walk with W(ε) = exp(iεmσ₁).
//!
//! Lattice site p sits at x = εp and step j at t = εj. With the translation
//! convention of [`crate::lattice::step`] the ψ⁻ component moves left and ψ⁺
//! moves right, and the walk obeys
//! (∂_t − ∂_x)ψ⁻ = imψ⁺, (∂_t + ∂_x)ψ⁺ = imψ⁻ to first order in ε.
//! That is the free Dirac system (∂_t ∓ ∂_x)ψ^∓ + iMψ^± = 0 with M = −m,
//! which is what [`dirac_reference`] integrates.

use serde::Serialize;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Result, WalkError};
use crate::extended::CoordinateField;
use crate::lattice::{step, CoinField, SpinorField, Trajectory};
use crate::linalg::{canonical_arg, normal_eigen, Mat2, Spinor, C64, I};
use crate::lorentz::{covariant_densities, FrameSpec, TERM_NAMES};
use crate::par;

const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiracParams {
    pub m: f64,
    pub epsilon: f64,
    pub k: f64,
    pub t_final: f64,
}

impl DiracParams {
    pub fn new(m: f64, epsilon: f64, k: f64, t_final: f64) -> Result<Self> {
        let p = DiracParams { m, epsilon, k, t_final };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(WalkError::InvalidParameter(format!("mass must be finite and non-negative, got {}", self.m)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(WalkError::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) || !self.k.is_finite() {
            return Err(WalkError::InvalidParameter("t_final must be positive and k finite".into()));
        }
        self.steps().map(|_| ())
    }

    /// t_final / ε, which must be a positive integer.
    pub fn steps(&self) -> Result<usize> {
        let r = self.t_final / self.epsilon;
        let n = r.round();
        if n < 1.0 || (r - n).abs() > STEP_TOL * r.max(1.0) {
            return Err(WalkError::InvalidParameter(format!("t_final/epsilon = {r} is not a positive integer")));
        }
        Ok(n as usize)
    }

    /// Smallest periodic lattice on which kε is a Fourier mode: N = 2π/(|k|ε),
    /// carrying mode ±1.
    pub fn lattice(&self) -> Result<(usize, i64)> {
        if self.k == 0.0 {
            return Err(WalkError::InvalidParameter("k = 0 has no natural period; supply n_sites".into()));
        }
        let r = 2.0 * PI / (self.k.abs() * self.epsilon);
        let n = r.round();
        if n < 4.0 || (r - n).abs() > STEP_TOL * r {
            return Err(WalkError::InvalidParameter(format!(
                "k·epsilon = {} is not on a lattice Fourier grid (2π/(kε) = {r})",
                self.k * self.epsilon
            )));
        }
        Ok((n as usize, self.k.signum() as i64))
    }
}

/// exp(iεmσ₁) = cos(εm) + i sin(εm)σ₁.
pub fn coin_of_epsilon(params: &DiracParams) -> Mat2 {
    let (s, c) = (params.epsilon * params.m).sin_cos();
    Mat2::new(C64::new(c, 0.0), I * s, I * s, C64::new(c, 0.0))
}

/// Plane-wave polarization used by the convergence study.
pub const DEFAULT_POLARIZATION: Spinor = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)];

/// e^{ikx}·pol sampled at x = εp.
pub fn initial_plane_wave(params: &DiracParams, n_sites: usize, pol: Spinor) -> SpinorField {
    SpinorField::from_vec(
        (0..n_sites)
            .map(|p| {
                let e = C64::from_polar(1.0, params.k * params.epsilon * p as f64);
                [pol[0] * e, pol[1] * e]
            })
            .collect(),
    )
}

/// Symbol H with ∂_tψ̂ = iHψ̂ for the mode e^{ikx}: H = kσ₃ + mσ₁.
fn dirac_symbol(m: f64, k: f64) -> Mat2 {
    Mat2::sigma3().scale(C64::new(k, 0.0)) + Mat2::sigma1().scale(C64::new(m, 0.0))
}

/// exp(iHt) through the eigendecomposition of the Hermitian symbol;
/// eigenvalues ±√(k² + m²).
fn dirac_propagator(m: f64, k: f64, t: f64) -> Mat2 {
    let h = dirac_symbol(m, k);
    match normal_eigen(&h) {
        Some((vals, b)) => {
            let d = Mat2::diag(C64::from_polar(1.0, vals[0].re * t), C64::from_polar(1.0, vals[1].re * t));
            b * d * b.adjoint()
        }
        None => Mat2::identity(),
    }
}

/// Analytic Dirac evolution of e^{ikx}·pol to t_final, sampled at x = εp.
pub fn dirac_reference(params: &DiracParams, n_sites: usize, pol: Spinor) -> Result<SpinorField> {
    params.validate()?;
    let u = dirac_propagator(params.m, params.k, params.t_final);
    let amp = u.apply(&pol);
    Ok(SpinorField::from_vec(
        (0..n_sites)
            .map(|p| {
                let e = C64::from_polar(1.0, params.k * params.epsilon * p as f64);
                [amp[0] * e, amp[1] * e]
            })
            .collect(),
    ))
}

/// Relative L² distance over one period.
pub fn relative_l2(a: &SpinorField, reference: &SpinorField) -> f64 {
    let diff = a.sub(reference).norm_sqr();
    (diff / reference.norm_sqr()).sqrt()
}

/// Walk from the plane wave to t_final and its error against the reference.
pub fn walk_error(params: &DiracParams, pol: Spinor) -> Result<f64> {
    let (n, mode) = params.lattice()?;
    let steps = params.steps()?;
    let coin = CoinField::uniform(n, coin_of_epsilon(params))?;
    let mut state = initial_plane_wave(params, n, pol);
    debug_assert_eq!(mode.abs(), 1);
    for _ in 0..steps {
        state = step(&state, &coin)?;
    }
    Ok(relative_l2(&state, &dirac_reference(params, n, pol)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub error: f64,
    /// log(e_{i−1}/e_i) / log(ε_{i−1}/ε_i) against the previous row.
    pub local_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub m: f64,
    pub k: f64,
    pub t_final: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log ε.
    pub order: f64,
    /// Every error sits at round-off, so the fitted order carries no
    /// information (the massless walk transports exactly).
    pub exact: bool,
}

pub const EXACT_TOL: f64 = 1e-12;

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn check_eps_list(eps: &[f64]) -> Result<()> {
    if eps.len() < 3 {
        return Err(WalkError::InvalidParameter(format!("need at least 3 epsilons, got {}", eps.len())));
    }
    let ratio = eps[1] / eps[0];
    if !(ratio > 0.0 && ratio != 1.0) {
        return Err(WalkError::InvalidParameter("epsilons must be distinct and positive".into()));
    }
    for w in eps.windows(2) {
        if ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9 {
            return Err(WalkError::InvalidParameter("epsilons must form a geometric progression".into()));
        }
    }
    Ok(())
}

pub fn convergence_study(m: f64, k: f64, t_final: f64, eps_list: &[f64]) -> Result<ConvergenceTable> {
    check_eps_list(eps_list)?;
    let params: Vec<DiracParams> =
        eps_list.iter().map(|&e| DiracParams::new(m, e, k, t_final)).collect::<Result<_>>()?;
    let errors: Vec<f64> = par::map_tasks(params.len(), |i| walk_error(&params[i], DEFAULT_POLARIZATION))
        .into_iter()
        .collect::<Result<_>>()?;
    let rows = eps_list
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (&epsilon, &error))| ConvergenceRow {
            epsilon,
            error,
            local_order: (i > 0).then(|| (errors[i - 1] / error).ln() / (eps_list[i - 1] / epsilon).ln()),
        })
        .collect();
    let lx: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(ConvergenceTable {
        m,
        k,
        t_final,
        rows,
        order: fit_slope(&lx, &ly),
        exact: errors.iter().all(|&e| e < EXACT_TOL),
    })
}

/// Eigenphases of the walk symbol W(ε)·diag(e^{ikε}, e^{−ikε}) for the mode
/// of physical wavenumber k, sorted ascending.
pub fn walk_eigenphases(m: f64, k: f64, epsilon: f64) -> [f64; 2] {
    let (s, c) = (epsilon * m).sin_cos();
    let w = Mat2::new(C64::new(c, 0.0), I * s, I * s, C64::new(c, 0.0));
    let t = Mat2::diag(C64::from_polar(1.0, k * epsilon), C64::from_polar(1.0, -k * epsilon));
    match normal_eigen(&(w * t)) {
        Some((v, _)) => [canonical_arg(v[0]), canonical_arg(v[1])],
        None => {
            let a = canonical_arg((w * t).trace() * 0.5);
            [a, a]
        }
    }
}

/// max over k of ||θ(k, ε)| − ε√(k² + m²)| for both branches.
pub fn eigenphase_defect(m: f64, epsilon: f64, ks: &[f64]) -> f64 {
    ks.iter()
        .map(|&k| {
            let w = epsilon * (k * k + m * m).sqrt();
            let th = walk_eigenphases(m, k, epsilon);
            (th[0] + w).abs().max((th[1] - w).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermScaling {
    pub name: &'static str,
    /// ε² Σ_{j,p} |density| for each ε.
    pub l1: Vec<f64>,
    /// Slope of log l1 against log ε; None if the term vanishes identically.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtraTermReport {
    pub epsilons: Vec<f64>,
    pub terms: Vec<TermScaling>,
    /// max of the K̄ and M¹ slopes
    pub main_slope: f64,
    /// each extra term must decay with slope ≥ main_slope + margin
    pub margin: f64,
    pub passed: bool,
}

pub const SCALING_MARGIN: f64 = 0.9;
/// Spatial period of the test field.
pub const SCALING_PERIOD: f64 = 16.0;
/// Polarization of the test field; its σ₁ bilinear is nonzero so the mass
/// term is genuinely first order.
const SCALING_POLARIZATION: Spinor = [C64::new(0.8, 0.0), C64::new(0.6, 0.0)];

/// Smooth test field (1 + ½cos(4πx/L))e^{i(kx − ωt)}·pol, ω = √(k² + m²).
fn smooth_field(k: f64, m: f64, t: f64, x: f64) -> Spinor {
    let om = (k * k + m * m).sqrt();
    let env = 1.0 + 0.5 * (4.0 * PI * x / SCALING_PERIOD).cos();
    let e = C64::from_polar(env, k * x - om * t);
    [SCALING_POLARIZATION[0] * e, SCALING_POLARIZATION[1] * e]
}

/// Evaluates every covariant term on ε-sampled smooth fields (Φ = Ψ = the
/// same sampled field, grid coordinates seen from `frame`) and compares how
/// fast the extra terms shrink with ε against K̄ and M¹.
pub fn extra_term_scaling(
    m: f64,
    k: f64,
    t_final: f64,
    eps_list: &[f64],
    frame: &FrameSpec,
) -> Result<ExtraTermReport> {
    check_eps_list(eps_list)?;
    let per_eps: Vec<Result<[f64; 7]>> = par::map_tasks(eps_list.len(), |i| {
        let eps = eps_list[i];
        let params = DiracParams::new(m, eps, k, t_final)?;
        let slices = params.steps()?;
        let n = (SCALING_PERIOD / eps).round() as usize;
        let sample = |j: usize| {
            SpinorField::from_vec((0..n).map(|p| smooth_field(k, m, eps * j as f64, eps * p as f64)).collect())
        };
        let phi = Trajectory::new((0..=slices).map(sample).collect())?;
        let psi = Trajectory::new((0..slices).map(sample).collect())?;
        let coin = CoinField::uniform(n, coin_of_epsilon(&params))?;
        let d = covariant_densities(&phi, &psi, &coin, frame, &CoordinateField::grid(n, slices))?;
        let mut out = [0.0; 7];
        for (t, o) in out.iter_mut().enumerate() {
            *o = eps * eps * d.l1(t);
        }
        Ok(out)
    });
    let per_eps: Vec<[f64; 7]> = per_eps.into_iter().collect::<Result<_>>()?;
    let lx: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let terms: Vec<TermScaling> = (0..7)
        .map(|t| {
            let l1: Vec<f64> = per_eps.iter().map(|r| r[t]).collect();
            let scale = per_eps.iter().map(|r| r[0]).fold(0.0, f64::max);
            let slope = if l1.iter().all(|&v| v <= 1e-14 * scale) {
                None
            } else {
                Some(fit_slope(&lx, &l1.iter().map(|v| v.ln()).collect::<Vec<_>>()))
            };
            TermScaling { name: TERM_NAMES[t], l1, slope }
        })
        .collect();
    // indices 0 (K̄) and 4 (M¹) are the leading terms
    let main_slope = terms[0].slope.unwrap_or(f64::NAN).max(terms[4].slope.unwrap_or(f64::NAN));
    let passed = main_slope.is_finite()
        && terms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 0 && *i != 4)
            .all(|(_, t)| t.slope.is_none_or(|s| s >= main_slope + SCALING_MARGIN));
    Ok(ExtraTermReport { epsilons: eps_list.to_vec(), terms, main_slope, margin: SCALING_MARGIN, passed })
}
