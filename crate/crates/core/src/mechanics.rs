//! Discrete mechanics for S = Σ_j [½(q_{j+1} − q_j)² − φ(q_j)]: the
//! symplectic scheme, its energy drift, and the extended scheme with a time
//! variable t_j whose equation of motion conserves Π = −½u² − φ(q).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, WalkError};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// φ(q) together with its analytic derivative.
#[derive(Clone)]
pub struct Potential {
    value: RealFn,
    derivative: RealFn,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Potential")
    }
}

impl Potential {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Potential { value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    pub fn free() -> Self {
        Self::new(|_| 0.0, |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| 0.0)
    }

    /// ½kq²
    pub fn harmonic(k: f64) -> Self {
        Self::new(move |q| 0.5 * k * q * q, move |q| k * q)
    }

    /// ¼q⁴
    pub fn quartic() -> Self {
        Self::new(|q| 0.25 * q.powi(4), |q| q.powi(3))
    }

    pub fn value(&self, q: f64) -> f64 {
        (self.value)(q)
    }

    pub fn derivative(&self, q: f64) -> f64 {
        (self.derivative)(q)
    }

    /// Largest gap between φ′ and a central difference of φ over `samples`.
    pub fn consistency_defect(&self, samples: &[f64]) -> f64 {
        let h = 1e-5;
        samples
            .iter()
            .map(|&q| ((self.value(q + h) - self.value(q - h)) / (2.0 * h) - self.derivative(q)).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_consistency(&self, samples: &[f64]) -> Result<()> {
        let d = self.consistency_defect(samples);
        if d > 1e-6 {
            return Err(WalkError::InvalidParameter(format!(
                "potential derivative inconsistent with value (defect {d:e})"
            )));
        }
        Ok(())
    }
}

/// q and momenta of either scheme. For the extended scheme `q` and `t` hold
/// the nodes 0..=n while the momenta `p` (π_j) and Π_j belong to the n
/// intervals; for the symplectic scheme `q` and `p` share the nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechTrajectory {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: Option<Vec<f64>>,
    pub big_pi: Option<Vec<f64>>,
}

impl MechTrajectory {
    /// H_j = p_j²/2 + φ(q_j) on the shared nodes.
    pub fn hamiltonian(&self, phi: &Potential) -> Vec<f64> {
        self.q.iter().zip(&self.p).map(|(&q, &p)| 0.5 * p * p + phi.value(q)).collect()
    }

    pub fn time_steps(&self) -> Option<Vec<f64>> {
        self.t.as_ref().map(|t| t.windows(2).map(|w| w[1] - w[0]).collect())
    }
}

/// p_j = p_{j−1} − φ′(q_j), q_{j+1} = q_j + p_j.
pub fn symplectic_step(q: f64, p_prev: f64, phi: &Potential) -> (f64, f64) {
    let p = p_prev - phi.derivative(q);
    (q + p, p)
}

/// Undoes [`symplectic_step`]: from (q_{j+1}, p_j) back to (q_j, p_{j−1}).
pub fn symplectic_step_back(q_next: f64, p: f64, phi: &Potential) -> (f64, f64) {
    let q = q_next - p;
    (q, p + phi.derivative(q))
}

/// Runs `steps` symplectic updates from q_0 with the supplied p_{−1}.
/// Returns the nodes j = 0..=steps with p_j taken after each kick.
pub fn run_symplectic(q0: f64, p_before: f64, phi: &Potential, steps: usize) -> MechTrajectory {
    let mut q = Vec::with_capacity(steps + 1);
    let mut p = Vec::with_capacity(steps + 1);
    let (mut qj, mut pprev) = (q0, p_before);
    for _ in 0..=steps {
        let (qn, pj) = symplectic_step(qj, pprev, phi);
        q.push(qj);
        p.push(pj);
        qj = qn;
        pprev = pj;
    }
    MechTrajectory { q, p, t: None, big_pi: None }
}

/// H_{j+1} − H_j = φ(q_j + p_j) − φ(q_j) − p_jφ′(q_{j+1}) + ½φ′(q_{j+1})².
pub fn energy_drift(q: f64, p: f64, phi: &Potential) -> f64 {
    let q_next = q + p;
    let d = phi.derivative(q_next);
    phi.value(q_next) - phi.value(q) - p * d + 0.5 * d * d
}

/// Π = −½u² − φ(q).
pub fn big_pi(u: f64, q: f64, phi: &Potential) -> f64 {
    -0.5 * u * u - phi.value(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedStep {
    pub q_next: f64,
    pub t_next: f64,
    /// π_j = u_j = (q_{j+1} − q_j)/(t_{j+1} − t_j)
    pub pi: f64,
    pub v: f64,
    pub iterations: usize,
}

pub const MAX_NEWTON: usize = 50;

struct StepProblem<'a> {
    q: f64,
    t: f64,
    pi_prev: f64,
    pi_target: f64,
    phi: &'a Potential,
}

impl StepProblem<'_> {
    /// (momentum balance, Π − Π_target) at unknowns (q_next, t_next).
    fn residual(&self, qn: f64, tn: f64) -> [f64; 2] {
        let v = tn - self.t;
        let u = (qn - self.q) / v;
        [u - self.pi_prev + v * self.phi.derivative(self.q), big_pi(u, self.q, self.phi) - self.pi_target]
    }

    fn newton(&self, mut qn: f64, mut tn: f64, tol: f64) -> Result<ExtendedStep> {
        let dphi = self.phi.derivative(self.q);
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut r = self.residual(qn, tn);
        for it in 0..=MAX_NEWTON {
            if norm(r) <= tol {
                let v = tn - self.t;
                if v <= 0.0 {
                    return Err(WalkError::NonPositiveTimeStep(v));
                }
                return Ok(ExtendedStep { q_next: qn, t_next: tn, pi: (qn - self.q) / v, v, iterations: it });
            }
            if it == MAX_NEWTON {
                break;
            }
            let v = tn - self.t;
            let u = (qn - self.q) / v;
            let (a, b, c, d) = (1.0 / v, -u / v + dphi, -u / v, u * u / v);
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dq = (d * r[0] - b * r[1]) / det;
            let dt = (-c * r[0] + a * r[1]) / det;
            // Damping: halve until the residual drops and V stays positive.
            let mut s = 1.0;
            loop {
                let (q2, t2) = (qn - s * dq, tn - s * dt);
                if t2 > self.t {
                    let r2 = self.residual(q2, t2);
                    if norm(r2) < norm(r) || s < 1e-6 {
                        qn = q2;
                        tn = t2;
                        r = r2;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-12 {
                    return Err(WalkError::NoConvergence { iterations: it, residual: norm(r) });
                }
            }
        }
        Err(WalkError::NoConvergence { iterations: MAX_NEWTON, residual: norm(r) })
    }
}

/// Solves the momentum balance and Π_j = Π_target for (q_{j+1}, t_{j+1}) by
/// damped Newton, starting from one symplectic step with step `v_guess`.
/// A free particle (φ′(q_j) = 0) leaves V undetermined; it is set to
/// `v_guess`.
pub fn extended_step(
    q: f64,
    t: f64,
    pi_prev: f64,
    pi_target: f64,
    phi: &Potential,
    solver_tol: f64,
    v_guess: f64,
) -> Result<ExtendedStep> {
    if !(solver_tol > 0.0) {
        return Err(WalkError::InvalidParameter("solver_tol must be positive".into()));
    }
    if !(v_guess > 0.0) {
        return Err(WalkError::NonPositiveTimeStep(v_guess));
    }
    let prob = StepProblem { q, t, pi_prev, pi_target, phi };
    let dphi = phi.derivative(q);
    if dphi == 0.0 {
        let (qn, tn) = (q + pi_prev * v_guess, t + v_guess);
        let r = prob.residual(qn, tn);
        if r[1].abs() > solver_tol {
            return Err(WalkError::NoConvergence { iterations: 0, residual: r[1].abs() });
        }
        return Ok(ExtendedStep { q_next: qn, t_next: tn, pi: pi_prev, v: v_guess, iterations: 0 });
    }
    let u = pi_prev - v_guess * dphi;
    prob.newton(q + u * v_guess, t + v_guess, solver_tol)
}

/// Every admissible (V > 0) solution of one extended step, sorted by V.
/// Newton is started from the symplectic guess and from the mirror of the
/// first root found (u → −u); at most two roots exist.
pub fn extended_branches(
    q: f64,
    t: f64,
    pi_prev: f64,
    pi_target: f64,
    phi: &Potential,
    solver_tol: f64,
    v_guess: f64,
) -> Vec<ExtendedStep> {
    // Energy shell: ½u² = −Π − φ(q) must be reachable.
    let s2 = 2.0 * (-pi_target - phi.value(q));
    if s2 < -solver_tol {
        return Vec::new();
    }
    let dphi = phi.derivative(q);
    let mut roots: Vec<ExtendedStep> = Vec::with_capacity(2);
    if let Ok(r) = extended_step(q, t, pi_prev, pi_target, phi, solver_tol, v_guess) {
        roots.push(r);
    }
    if dphi != 0.0 {
        let seeds: Vec<f64> = match roots.first() {
            Some(r) => vec![-r.pi],
            None => {
                let s = s2.max(0.0).sqrt();
                vec![s, -s]
            }
        };
        let prob = StepProblem { q, t, pi_prev, pi_target, phi };
        for u in seeds {
            let v = (pi_prev - u) / dphi;
            if v > 0.0 {
                if let Ok(r) = prob.newton(q + u * v, t + v, solver_tol) {
                    if roots.iter().all(|o| (o.v - r.v).abs() > 1e-9 * r.v.max(1.0)) {
                        roots.push(r);
                    }
                }
            }
        }
    }
    roots.sort_by(|a, b| a.v.total_cmp(&b.v));
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedConfig {
    pub solver_tol: f64,
    /// Search budget, in visited nodes per requested step.
    pub nodes_per_step: usize,
}

impl Default for ExtendedConfig {
    fn default() -> Self {
        ExtendedConfig { solver_tol: 1e-12, nodes_per_step: 100 }
    }
}

/// Extended-scheme trajectory from (q_0, u_0, V_0): the first interval is
/// q_1 = q_0 + u_0V_0, t_1 = V_0, which fixes Π_target = −½u_0² − φ(q_0).
///
/// After that, each step may admit two branches: u keeps its sign or
/// reverses. Some branches stall later, when the energy shell becomes
/// unreachable or no root has V > 0. The driver does a depth-first
/// search, taking the branch with the smaller V first and backtracking
/// from dead ends.
pub fn run_extended(
    q0: f64,
    u0: f64,
    v0: f64,
    steps: usize,
    phi: &Potential,
    cfg: &ExtendedConfig,
) -> Result<MechTrajectory> {
    if !(v0 > 0.0) {
        return Err(WalkError::NonPositiveTimeStep(v0));
    }
    if steps == 0 {
        return Err(WalkError::InvalidParameter("steps must be at least 1".into()));
    }
    let pi_target = big_pi(u0, q0, phi);
    let first = ExtendedStep { q_next: q0 + u0 * v0, t_next: v0, pi: u0, v: v0, iterations: 0 };
    let mut path = vec![first];
    let mut options: Vec<(Vec<ExtendedStep>, usize)> = Vec::new();
    let budget = cfg.nodes_per_step.saturating_mul(steps);
    let mut nodes = 0usize;
    let mut deepest = 1usize;
    while path.len() < steps {
        nodes += 1;
        if nodes > budget {
            return Err(WalkError::NoAdmissibleBranch(deepest));
        }
        if options.len() < path.len() {
            let last = path[path.len() - 1];
            options.push((
                extended_branches(last.q_next, last.t_next, last.pi, pi_target, phi, cfg.solver_tol, last.v),
                0,
            ));
        }
        let (choices, next) = options.last_mut().expect("frame pushed above");
        if *next < choices.len() {
            path.push(choices[*next]);
            *next += 1;
            deepest = deepest.max(path.len());
        } else {
            options.pop();
            path.pop();
            if path.is_empty() {
                return Err(WalkError::NoAdmissibleBranch(deepest));
            }
        }
    }
    let mut q = vec![q0];
    let mut t = vec![0.0];
    let mut p = Vec::with_capacity(steps);
    let mut pis = Vec::with_capacity(steps);
    for (j, s) in path.iter().enumerate() {
        pis.push(big_pi(s.pi, q[j], phi));
        p.push(s.pi);
        q.push(s.q_next);
        t.push(s.t_next);
    }
    Ok(MechTrajectory { q, p, t: Some(t), big_pi: Some(pis) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CyclicReport {
    /// max_j |p_{j+1} − p_j|
    pub max_delta_p: f64,
    /// max_j |H_{j+1} − H_j| (symplectic runs)
    pub max_delta_h: Option<f64>,
    /// max_j |Π_j − Π_0| (extended runs)
    pub max_delta_big_pi: Option<f64>,
}

pub fn cyclic_momentum_check(traj: &MechTrajectory, phi: &Potential) -> CyclicReport {
    let max_step = |v: &[f64]| v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    match &traj.big_pi {
        Some(pis) => CyclicReport {
            max_delta_p: max_step(&traj.p),
            max_delta_h: None,
            max_delta_big_pi: Some(pis.iter().map(|x| (x - pis[0]).abs()).fold(0.0, f64::max)),
        },
        None => CyclicReport {
            max_delta_p: max_step(&traj.p),
            max_delta_h: Some(max_step(&traj.hamiltonian(phi))),
            max_delta_big_pi: None,
        },
    }
}

/// max_j |(H_{j+1} − H_j) − energy_drift(q_j, p_j)| over a symplectic run.
pub fn drift_identity_defect(traj: &MechTrajectory, phi: &Potential) -> f64 {
    let h = traj.hamiltonian(phi);
    (0..traj.q.len() - 1)
        .map(|j| ((h[j + 1] - h[j]) - energy_drift(traj.q[j], traj.p[j], phi)).abs())
        .fold(0.0, f64::max)
}
