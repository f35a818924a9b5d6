//! The flat 2D Dirac Lagrangian in different spin bases and 2-beins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FrameSpec;
use crate::error::{Result, WalkError};
use crate::linalg::{Mat2, Spinor, C64, I, ZERO};

/// Spin metric, gamma matrices and 2-bein components e[μ][a] (μ ∈ {t, x}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracTriplet {
    pub eta: Mat2,
    pub gamma0: Mat2,
    pub gamma1: Mat2,
    pub bein: [[f64; 2]; 2],
}

impl DiracTriplet {
    /// η = 1, γ⁰ = σ₁, γ¹ = iσ₂ and the trivial 2-bein.
    pub fn standard() -> Self {
        DiracTriplet {
            eta: Mat2::identity(),
            gamma0: Mat2::real(0.0, 1.0, 1.0, 0.0),
            gamma1: Mat2::real(0.0, 1.0, -1.0, 0.0),
            bein: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Components of (η, γ) on the rescaled basis b_{−'} = λb_−, b_{+'} = b_+/λ,
    /// with the 2-bein left alone.
    pub fn rescaled_basis(lambda: f64) -> Self {
        let l2 = lambda * lambda;
        DiracTriplet {
            eta: Mat2::real(l2, 0.0, 0.0, 1.0 / l2),
            gamma0: Mat2::real(0.0, 1.0 / l2, l2, 0.0),
            gamma1: Mat2::real(0.0, 1.0 / l2, -l2, 0.0),
            bein: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// η' = 1, standard γ and the boosted 2-bein.
    pub fn boosted(lambda: f64) -> Self {
        let (l2, il2) = (lambda * lambda, 1.0 / (lambda * lambda));
        let (c, s) = (0.5 * (l2 + il2), 0.5 * (il2 - l2));
        DiracTriplet { bein: [[c, s], [s, c]], ..Self::standard() }
    }

    fn operator_rows(&self) -> [Mat2; 2] {
        // e^μ_a γ⁰γ^a, for μ = t and μ = x
        let g00 = self.gamma0 * self.gamma0;
        let g01 = self.gamma0 * self.gamma1;
        let row = |mu: usize| g00.scale(C64::new(self.bein[mu][0], 0.0)) + g01.scale(C64::new(self.bein[mu][1], 0.0));
        [row(0), row(1)]
    }

    /// η_{σδ}(Ψ^δ)*(e^μ_a γ⁰γ^a∂_μ + imγ⁰)^σ_ω Ψ^ω at one point.
    pub fn density(&self, psi: &Spinor, dt: &Spinor, dx: &Spinor, m: f64) -> C64 {
        let [kt, kx] = self.operator_rows();
        let ot = kt.apply(dt);
        let ox = kx.apply(dx);
        let om = self.gamma0.apply(psi);
        let mut acc = ZERO;
        for s in 0..2 {
            let o = ot[s] + ox[s] + I * m * om[s];
            for d in 0..2 {
                acc += self.eta.0[s][d] * psi[d].conj() * o;
            }
        }
        acc
    }
}

/// Max deviation of (γ⁰)², (γ¹)², γ⁰γ¹ and η·γ⁰ between two triplets.
pub fn clifford_defect(a: &DiracTriplet, b: &DiracTriplet) -> f64 {
    let rel = |t: &DiracTriplet| [t.gamma0 * t.gamma0, t.gamma1 * t.gamma1, t.gamma0 * t.gamma1, t.eta * t.gamma0];
    rel(a).iter().zip(rel(b)).map(|(x, y)| x.dist(&y)).fold(0.0, f64::max)
}

/// Spinor samples on a uniform (t, x) grid, row-major in t.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracSamples {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    values: Vec<Spinor>,
}

impl DiracSamples {
    pub fn from_fn(nt: usize, nx: usize, dt: f64, dx: f64, f: impl Fn(f64, f64) -> Spinor) -> Result<Self> {
        if nt < 3 || nx < 3 {
            return Err(WalkError::InvalidParameter("need at least 3×3 samples".into()));
        }
        if !(dt > 0.0 && dx > 0.0) {
            return Err(WalkError::InvalidParameter("sample spacings must be positive".into()));
        }
        let values = (0..nt)
            .flat_map(|it| (0..nx).map(move |ix| (it, ix)))
            .map(|(it, ix)| f(it as f64 * dt, ix as f64 * dx))
            .collect();
        Ok(DiracSamples { nt, nx, dt, dx, values })
    }

    /// A sum of a few random plane waves in both components.
    pub fn random_smooth(nt: usize, nx: usize, h: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, [C64; 2])> = (0..4)
            .map(|_| {
                let k = rng.random_range(-2.0..2.0);
                let w = rng.random_range(-2.0..2.0);
                let mut c = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                (k, w, [c(), c()])
            })
            .collect();
        Self::from_fn(nt, nx, h, h, |t, x| {
            let mut out = [ZERO; 2];
            for (k, w, c) in &modes {
                let e = C64::from_polar(1.0, k * x - w * t);
                out[0] += c[0] * e;
                out[1] += c[1] * e;
            }
            out
        })
    }

    pub fn get(&self, it: usize, ix: usize) -> Spinor {
        self.values[it * self.nx + ix]
    }

    pub fn map(&self, f: impl Fn(&Spinor) -> Spinor) -> Self {
        DiracSamples { values: self.values.iter().map(f).collect(), ..*self }
    }

    /// Central differences (∂_tΨ, ∂_xΨ) at an interior sample.
    fn derivatives(&self, it: usize, ix: usize) -> (Spinor, Spinor) {
        let d = |a: Spinor, b: Spinor, h: f64| [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)];
        (d(self.get(it + 1, ix), self.get(it - 1, ix), self.dt), d(self.get(it, ix + 1), self.get(it, ix - 1), self.dx))
    }

    fn interior<T>(&self, f: impl Fn(usize, usize) -> T) -> Vec<Vec<T>> {
        (1..self.nt - 1).map(|it| (1..self.nx - 1).map(|ix| f(it, ix)).collect()).collect()
    }
}

/// Lagrangian of `triplet` on interior samples whose components are already
/// those of the triplet's spin basis.
pub fn lagrangian_with(samples: &DiracSamples, m: f64, triplet: &DiracTriplet) -> Vec<Vec<C64>> {
    samples.interior(|it, ix| {
        let (dt, dx) = samples.derivatives(it, ix);
        triplet.density(&samples.get(it, ix), &dt, &dx, m)
    })
}

/// Ψ^{−'} = Ψ⁻/λ, Ψ^{+'} = λΨ⁺.
pub fn to_rescaled_basis(samples: &DiracSamples, lambda: f64) -> DiracSamples {
    samples.map(|s| [s[0] / lambda, s[1] * lambda])
}

/// The Lagrangian evaluated with the frame's triplet: primed components,
/// η' = 1, standard γ and the boosted 2-bein. The identity frame gives the
/// standard triplet on the original components.
pub fn dirac_lagrangian(samples: &DiracSamples, m: f64, frame: &FrameSpec) -> Result<Vec<Vec<C64>>> {
    let frame = FrameSpec::new(frame.rapidity, frame.lambda)?;
    let primed = to_rescaled_basis(samples, frame.lambda);
    Ok(lagrangian_with(&primed, m, &DiracTriplet::boosted(frame.lambda)))
}

/// The written-out form on primed components:
/// λ²(Ψ^{−'})*(∂_t − ∂_x)Ψ^{−'} + λ^{−2}(Ψ^{+'})*(∂_t + ∂_x)Ψ^{+'} + im[(Ψ^{−'})*Ψ^{+'} + c.c. partner].
pub fn dirac_lagrangian_explicit(samples: &DiracSamples, m: f64, lambda: f64) -> Vec<Vec<C64>> {
    let primed = to_rescaled_basis(samples, lambda);
    let l2 = lambda * lambda;
    primed.interior(|it, ix| {
        let (dt, dx) = primed.derivatives(it, ix);
        let s = primed.get(it, ix);
        s[0].conj() * (dt[0] - dx[0]) * l2
            + s[1].conj() * (dt[1] + dx[1]) / l2
            + I * m * (s[0].conj() * s[1] + s[1].conj() * s[0])
    })
}

/// (e')^μ_a = (N^{−1})^μ_{ν'}(e')^{ν'}_a, with N^{μ'}_ν = ∂x^{μ'}/∂x^ν given as
/// [[∂t'/∂t, ∂t'/∂x], [∂x'/∂t, ∂x'/∂x]] and components indexed [μ][a].
pub fn two_bein_change(e_prime: [[f64; 2]; 2], n: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let [[tt, tx], [xt, xx]] = n;
    let delta = tt * xx - tx * xt;
    if delta.abs() < 1e-14 || !delta.is_finite() {
        return Err(WalkError::DegenerateCoordinates { j: 0, p: 0, det: delta });
    }
    let ninv = [[xx / delta, -tx / delta], [-xt / delta, tt / delta]];
    let mut out = [[0.0; 2]; 2];
    for mu in 0..2 {
        for a in 0..2 {
            out[mu][a] = ninv[mu][0] * e_prime[0][a] + ninv[mu][1] * e_prime[1][a];
        }
    }
    Ok(out)
}

/// Largest absolute difference between two per-site tables.
pub fn max_table_dist(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
