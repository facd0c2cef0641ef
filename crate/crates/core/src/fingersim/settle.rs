//! Quasi-static equilibrium of the passive finger.
//!
//! Minimizes E(q) = ½k‖q‖² + Σ ½k_c·d² (+ optional gravity potential) over
//! the finger joints with a bound-projected Newton method. The Hessian is a
//! central difference of the analytic gradient; every accepted step
//! satisfies an Armijo decrease, so E never increases.

use nalgebra::{DMatrix, DVector};

use super::contact::{contact_record, penetration_vector, penetrations, ContactRecord};
use super::kinematics::{chain, check_arm, ArmState, FingerState, Vec3};
use super::{SceneConfig, SimError, FINGER_JOINTS};

type Joints = [f64; FINGER_JOINTS];

#[derive(Clone, Debug, PartialEq)]
pub struct SettleOptions {
    /// Stop once the projected gradient norm drops below this (N·m).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Joints the solver may move; the rest keep their warm-start values.
    pub free: [bool; FINGER_JOINTS],
}

impl Default for SettleOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 500, free: [true; FINGER_JOINTS] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SettleResult {
    pub finger: FingerState,
    pub contact: ContactRecord,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy at the start and after every accepted iteration.
    pub energy_trace: Vec<f64>,
}

struct Energy<'a> {
    arm: ArmState,
    scene: &'a SceneConfig,
}

impl Energy<'_> {
    fn value(&self, q: &Joints) -> f64 {
        let s = self.scene;
        let pose = chain(&self.arm, q, s);
        let spring = 0.5 * s.spring_k * q.iter().map(|v| v * v).sum::<f64>();
        let contact: f64 = pose
            .links
            .iter()
            .flat_map(|l| penetrations(&l.tip, s))
            .map(|p| 0.5 * s.contact_k * p.depth * p.depth)
            .sum();
        let gravity: f64 = pose.links.iter().map(|l| s.link_mass * s.gravity * l.tip.z).sum();
        spring + contact + gravity
    }

    fn gradient(&self, q: &Joints) -> Joints {
        let s = self.scene;
        let pose = chain(&self.arm, q, s);
        let weight = Vec3::new(0.0, 0.0, s.link_mass * s.gravity);
        // ∂E/∂tip_i for the contact and gravity terms
        let forces: Vec<Vec3> = pose.links.iter().map(|l| weight - penetration_vector(&l.tip, s) * s.contact_k).collect();
        // ∂E/∂q_j = Σ_{i≥j} ω_j·((tip_i − o_j) × F_i), accumulated from the tip
        let mut grad = [0.0; FINGER_JOINTS];
        let mut moment = Vec3::zeros();
        let mut total = Vec3::zeros();
        for j in (0..FINGER_JOINTS).rev() {
            let link = &pose.links[j];
            moment += link.tip.cross(&forces[j]);
            total += forces[j];
            let torque = moment - link.origin.cross(&total);
            grad[j] = s.spring_k * q[j] + link.axis.dot(&torque);
        }
        grad
    }
}

/// Gradient with frozen joints and outward-pushing bound-active joints zeroed.
fn projected(grad: &Joints, q: &Joints, lim: f64, free: &[bool; FINGER_JOINTS]) -> Joints {
    std::array::from_fn(|i| {
        let pinned = (q[i] <= -lim && grad[i] > 0.0) || (q[i] >= lim && grad[i] < 0.0);
        if free[i] && !pinned {
            grad[i]
        } else {
            0.0
        }
    })
}

fn norm(v: &Joints) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton direction on the active joints, or `None` if it is not a descent direction.
fn newton_direction(energy: &Energy, q: &Joints, pg: &Joints, active: &[usize]) -> Option<Joints> {
    const EPS: f64 = 1e-6;
    let n = active.len();
    let mut h = DMatrix::<f64>::zeros(n, n);
    for (col, &j) in active.iter().enumerate() {
        let mut plus = *q;
        let mut minus = *q;
        plus[j] += EPS;
        minus[j] -= EPS;
        let (gp, gm) = (energy.gradient(&plus), energy.gradient(&minus));
        for (row, &i) in active.iter().enumerate() {
            h[(row, col)] = (gp[i] - gm[i]) / (2.0 * EPS);
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    let rhs = DVector::from_iterator(n, active.iter().map(|&i| -pg[i]));
    let scale = 1.0 + h.diagonal().amax();
    let mut lambda = 0.0;
    for _ in 0..20 {
        let damped = &h + DMatrix::identity(n, n) * lambda;
        if let Some(chol) = damped.cholesky() {
            let step = chol.solve(&rhs);
            let mut d = [0.0; FINGER_JOINTS];
            for (k, &i) in active.iter().enumerate() {
                d[i] = step[k];
            }
            let descent: f64 = d.iter().zip(pg).map(|(a, b)| a * b).sum();
            return (descent < 0.0).then_some(d);
        }
        lambda = if lambda == 0.0 { 1e-10 * scale } else { lambda * 10.0 };
    }
    None
}

/// Backtracking along `dir` with projection onto the joint limits.
fn line_search(
    energy: &Energy,
    q: &Joints,
    e0: f64,
    grad: &Joints,
    dir: &Joints,
    lim: f64,
) -> Option<(Joints, f64)> {
    const ARMIJO: f64 = 1e-4;
    let mut alpha = 1.0;
    for _ in 0..60 {
        let cand: Joints = std::array::from_fn(|i| (q[i] + alpha * dir[i]).clamp(-lim, lim));
        let e = energy.value(&cand);
        let decrease: f64 = grad.iter().zip(cand.iter().zip(q)).map(|(g, (c, x))| g * (c - x)).sum();
        if e <= e0 + ARMIJO * decrease && e <= e0 && cand != *q {
            return Some((cand, e));
        }
        alpha *= 0.5;
    }
    None
}

/// Equilibrium finger configuration for arm pose `arm`, starting from `warm`.
pub fn settle(
    arm: &ArmState,
    scene: &SceneConfig,
    warm: &FingerState,
    opts: &SettleOptions,
) -> Result<SettleResult, SimError> {
    check_arm(arm, scene)?;
    let lim = scene.joint_limit;
    let energy = Energy { arm: *arm, scene };
    let mut q: Joints = std::array::from_fn(|i| warm.q[i].clamp(-lim, lim));
    let mut e = energy.value(&q);
    let mut trace = vec![e];
    let mut converged = false;
    let mut iterations = 0;
    let mut gnorm;

    loop {
        let grad = energy.gradient(&q);
        let pg = projected(&grad, &q, lim, &opts.free);
        gnorm = norm(&pg);
        if gnorm < opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let active: Vec<usize> = (0..FINGER_JOINTS).filter(|&i| pg[i] != 0.0).collect();
        let mut step = newton_direction(&energy, &q, &pg, &active).and_then(|mut d| {
            let big = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if big > 0.5 {
                d.iter_mut().for_each(|v| *v *= 0.5 / big);
            }
            line_search(&energy, &q, e, &grad, &d, lim)
        });
        if step.is_none() {
            let sd: Joints = std::array::from_fn(|i| -pg[i] * 0.1 / gnorm);
            step = line_search(&energy, &q, e, &grad, &sd, lim);
        }
        let Some((next, e_next)) = step else { break };
        debug_assert!(e_next <= e, "energy increased: {e} -> {e_next}");
        q = next;
        e = e_next;
        trace.push(e);
    }

    let pose = chain(arm, &q, scene);
    let tips: Vec<Vec3> = pose.links.iter().map(|l| l.tip).collect();
    Ok(SettleResult {
        finger: FingerState { q },
        contact: contact_record(&tips, scene),
        energy: e,
        gradient_norm: gnorm,
        iterations,
        converged,
        energy_trace: trace,
    })
}

/// Energy of a finger configuration, exposed for diagnostics and tests.
pub fn finger_energy(arm: &ArmState, finger: &FingerState, scene: &SceneConfig) -> f64 {
    Energy { arm: *arm, scene }.value(&finger.q)
}

/// Analytic energy gradient with respect to the finger joints.
pub fn finger_energy_gradient(arm: &ArmState, finger: &FingerState, scene: &SceneConfig) -> [f64; FINGER_JOINTS] {
    Energy { arm: *arm, scene }.gradient(&finger.q)
}
