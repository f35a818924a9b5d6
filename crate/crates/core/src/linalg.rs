//! Fixed-size 2x2 complex matrices and spinors.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type Spinor = [C64; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major 2x2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, ZERO, ZERO, d)
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    pub const fn sigma1() -> Self {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub const fn sigma2() -> Self {
        Mat2::new(ZERO, C64::new(0.0, -1.0), I, ZERO)
    }

    pub const fn sigma3() -> Self {
        Mat2::new(ONE, ZERO, ZERO, C64::new(-1.0, 0.0))
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Mat2::real(s, s, s, -s)
    }

    /// General U(2) element e^{iδ}[[e^{iξ}cosθ, e^{iζ}sinθ], [−e^{−iζ}sinθ, e^{−iξ}cosθ]].
    pub fn from_angles(theta: f64, xi: f64, zeta: f64, delta: f64) -> Self {
        let g = C64::from_polar(1.0, delta);
        let (s, c) = theta.sin_cos();
        Mat2::new(
            g * C64::from_polar(c, xi),
            g * C64::from_polar(s, zeta),
            -g * C64::from_polar(s, -zeta),
            g * C64::from_polar(c, -xi),
        )
    }

    /// Haar-distributed unitary: QR of a complex Ginibre matrix with the
    /// phases of R's diagonal absorbed into Q.
    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut g = || C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let (a, c, b, d) = (g(), g(), g(), g());
        // Gram-Schmidt on the columns (a, c) and (b, d).
        let n1 = (a.norm_sqr() + c.norm_sqr()).sqrt();
        let (q1a, q1c) = (a / n1, c / n1);
        let r12 = q1a.conj() * b + q1c.conj() * d;
        let (vb, vd) = (b - r12 * q1a, d - r12 * q1c);
        let n2 = (vb.norm_sqr() + vd.norm_sqr()).sqrt();
        Mat2::new(q1a, vb / n2, q1c, vd / n2)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn apply(&self, v: &Spinor) -> Spinor {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.0;
        Mat2::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).dist(&Mat2::identity())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        let e = |i: usize, k: usize| a[i][0] * b[0][k] + a[i][1] * b[1][k];
        Mat2::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1))
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &o.0);
        Mat2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

/// Eigen-decomposition of a normal 2x2 matrix.
///
/// Eigenvalues are ordered by ascending phase in (−π, π]. Each eigenvector
/// is normalized with its first non-vanishing component real and positive.
/// Returns `None` when the spectrum is degenerate.
pub fn normal_eigen(a: &Mat2) -> Option<([C64; 2], Mat2)> {
    let half_tr = a.trace() * 0.5;
    let disc = (half_tr * half_tr - a.det()).sqrt();
    let mut vals = [half_tr + disc, half_tr - disc];
    if (vals[0] - vals[1]).norm() < 1e-12 {
        return None;
    }
    let phase = |z: C64| canonical_arg(z);
    if phase(vals[0]) > phase(vals[1]) {
        vals.swap(0, 1);
    }
    let v0 = null_vector(a, vals[0]);
    // For a normal matrix the second eigenvector is the orthogonal complement.
    let v1 = fix_phase([-v0[1].conj(), v0[0].conj()]);
    let basis = Mat2::new(v0[0], v1[0], v0[1], v1[1]);
    Some((vals, basis))
}

/// Argument reduced to (−π, π], mapping the −π branch (from −0.0) to π.
pub fn canonical_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

fn null_vector(a: &Mat2, lambda: C64) -> Spinor {
    let m = &a.0;
    let c1 = [m[0][1], lambda - m[0][0]];
    let c2 = [lambda - m[1][1], m[1][0]];
    let n = |v: &Spinor| v[0].norm_sqr() + v[1].norm_sqr();
    let v = if n(&c1) >= n(&c2) { c1 } else { c2 };
    let s = n(&v).sqrt();
    fix_phase([v[0] / s, v[1] / s])
}

fn fix_phase(v: Spinor) -> Spinor {
    let lead = if v[0].norm() > 1e-14 { v[0] } else { v[1] };
    let rot = lead.conj() / lead.norm();
    [v[0] * rot, v[1] * rot]
}

pub fn dot(a: &Spinor, b: &Spinor) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn norm_sqr(a: &Spinor) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr()
}
