//! Fidelity-error objectives on the dynamical subspace.
//!
//! Gradients are central finite differences, but each perturbed parameter
//! only touches one propagator: a forward sweep caches the intermediate
//! states and a backward sweep caches the readout vectors, so one perturbed
//! evaluation costs a single local propagator instead of a full run.

use std::f64::consts::PI;

use crate::dynamics::DynamicalSubspace;
use crate::linalg::{CMatrix, CVector};

use super::bfgs::Objective;

fn readout_fidelity(readout: &[CVector], v: &CVector) -> f64 {
    readout.iter().map(|w| w.dotc(v).norm_sqr()).sum()
}

/// `epsilon(u)` for `n` equal segments with `f_k = f_cap tanh(u_k)` and
/// `g_k = g_cap tanh(u_{n+k})`.
pub(crate) struct ScheduleObjective<'a> {
    sub: &'a DynamicalSubspace,
    n: usize,
    dt: f64,
    f_cap: f64,
    g_cap: f64,
}

impl<'a> ScheduleObjective<'a> {
    pub fn new(sub: &'a DynamicalSubspace, total: f64, n: usize, f_cap: f64, g_cap: f64) -> Self {
        Self {
            sub,
            n,
            dt: total / n as f64,
            f_cap,
            g_cap,
        }
    }

    pub fn amplitudes(&self, x: &[f64]) -> Vec<(f64, f64)> {
        (0..self.n)
            .map(|k| (self.f_cap * x[k].tanh(), self.g_cap * x[self.n + k].tanh()))
            .collect()
    }

    /// Inverse of [`Self::amplitudes`], clamping to 0.999 of each cap.
    pub fn parameters(&self, amps: &[(f64, f64)]) -> Vec<f64> {
        let inv = |a: f64, cap: f64| (a / cap).clamp(-0.999, 0.999).atanh();
        let mut x: Vec<f64> = amps.iter().map(|&(f, _)| inv(f, self.f_cap)).collect();
        x.extend(amps.iter().map(|&(_, g)| inv(g, self.g_cap)));
        x
    }

    fn propagators(&self, x: &[f64]) -> Vec<CMatrix> {
        self.amplitudes(x)
            .into_iter()
            .map(|(f, g)| self.sub.segment_propagator(self.dt, f, g))
            .collect()
    }
}

impl Objective for ScheduleObjective<'_> {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut c = self.sub.initial().clone();
        for (f, g) in self.amplitudes(x) {
            c = self.sub.segment_propagator(self.dt, f, g) * c;
        }
        1.0 - self.sub.fidelity(&c)
    }

    fn gradient(&self, x: &[f64], step: f64) -> Vec<f64> {
        let props = self.propagators(x);
        let mut states = Vec::with_capacity(self.n + 1);
        states.push(self.sub.initial().clone());
        for u in &props {
            let next = u * states.last().unwrap();
            states.push(next);
        }
        // back[k] holds the readout vectors pulled back to just after segment k.
        let mut back: Vec<Vec<CVector>> = vec![Vec::new(); self.n];
        let mut r: Vec<CVector> = self.sub.readout().to_vec();
        for k in (0..self.n).rev() {
            back[k] = r.clone();
            r = r.iter().map(|w| props[k].ad_mul(w)).collect();
        }
        let mut grad = vec![0.0; 2 * self.n];
        for k in 0..self.n {
            let f = |u: f64| self.f_cap * u.tanh();
            let g = |u: f64| self.g_cap * u.tanh();
            let (uf, ug) = (x[k], x[self.n + k]);
            let fid = |ff: f64, gg: f64| {
                let v = self.sub.segment_propagator(self.dt, ff, gg) * &states[k];
                readout_fidelity(&back[k], &v)
            };
            let (f0, g0) = (f(uf), g(ug));
            grad[k] = -(fid(f(uf + step), g0) - fid(f(uf - step), g0)) / (2.0 * step);
            grad[self.n + k] = -(fid(f0, g(ug + step)) - fid(f0, g(ug - step))) / (2.0 * step);
        }
        grad
    }
}

/// `epsilon` over free QAOA angles in the flat layout `[beta_1, gamma_1, ...]`.
pub(crate) struct QaoaObjective<'a> {
    sub: &'a DynamicalSubspace,
    layers: usize,
}

impl<'a> QaoaObjective<'a> {
    pub fn new(sub: &'a DynamicalSubspace, layers: usize) -> Self {
        Self { sub, layers }
    }

    /// Gate `m` in application order: even `m` is the phase gate of layer
    /// `m / 2` (angle index `m + 1`), odd `m` its mixer (angle index `m - 1`).
    fn gate(&self, m: usize) -> (bool, usize) {
        if m.is_multiple_of(2) {
            (true, m + 1)
        } else {
            (false, m - 1)
        }
    }

    fn apply(&self, phase: bool, angle: f64, v: &CVector) -> CVector {
        if phase {
            self.sub.eig_f().evolve(v, angle)
        } else {
            self.sub.eig_i().evolve(v, angle)
        }
    }

    /// `d epsilon / d angle` by central differences with cached sweeps.
    pub fn angle_gradient(&self, a: &[f64], step: f64) -> Vec<f64> {
        let gates = 2 * self.layers;
        let mut states = Vec::with_capacity(gates + 1);
        states.push(self.sub.initial().clone());
        for m in 0..gates {
            let (phase, idx) = self.gate(m);
            let next = self.apply(phase, a[idx], states.last().unwrap());
            states.push(next);
        }
        let mut back: Vec<Vec<CVector>> = vec![Vec::new(); gates];
        let mut r: Vec<CVector> = self.sub.readout().to_vec();
        for m in (0..gates).rev() {
            back[m] = r.clone();
            let (phase, idx) = self.gate(m);
            r = r.iter().map(|w| self.apply(phase, -a[idx], w)).collect();
        }
        let mut grad = vec![0.0; gates];
        for m in 0..gates {
            let (phase, idx) = self.gate(m);
            let fid =
                |angle: f64| readout_fidelity(&back[m], &self.apply(phase, angle, &states[m]));
            grad[idx] = -(fid(a[idx] + step) - fid(a[idx] - step)) / (2.0 * step);
        }
        grad
    }
}

impl Objective for QaoaObjective<'_> {
    fn dim(&self) -> usize {
        2 * self.layers
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut c = self.sub.initial().clone();
        for m in 0..2 * self.layers {
            let (phase, idx) = self.gate(m);
            c = self.apply(phase, x[idx], &c);
        }
        1.0 - self.sub.fidelity(&c)
    }

    fn gradient(&self, x: &[f64], step: f64) -> Vec<f64> {
        self.angle_gradient(x, step)
    }
}

/// QAOA angles constrained to a runtime budget `T` and the periodic range:
/// `a_k = 2 pi tanh(x_k / 2 pi)` with `x_k = T softmax(v)_k sin(theta_k)`,
/// so `sum |a_k| <= sum |x_k| <= T` and `|a_k| < 2 pi`. Parameters are
/// `[v_1..v_2L, theta_1..theta_2L]`.
pub(crate) struct BudgetQaoaObjective<'a> {
    inner: QaoaObjective<'a>,
    budget: f64,
}

impl<'a> BudgetQaoaObjective<'a> {
    pub fn new(sub: &'a DynamicalSubspace, layers: usize, budget: f64) -> Self {
        Self {
            inner: QaoaObjective::new(sub, layers),
            budget,
        }
    }

    fn weights(&self, v: &[f64]) -> Vec<f64> {
        let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    pub fn angles(&self, p: &[f64]) -> Vec<f64> {
        let k = 2 * self.inner.layers;
        let w = self.weights(&p[..k]);
        (0..k)
            .map(|j| 2.0 * PI * (self.budget * w[j] * p[k + j].sin() / (2.0 * PI)).tanh())
            .collect()
    }

    /// Parameters reproducing `angles`, rescaled into the budget if needed.
    pub fn parameters(&self, angles: &[f64]) -> Vec<f64> {
        let k = 2 * self.inner.layers;
        let lim = 2.0 * PI * (1.0 - 1e-9);
        let mut x: Vec<f64> = angles
            .iter()
            .map(|a| 2.0 * PI * (a.clamp(-lim, lim) / (2.0 * PI)).atanh())
            .collect();
        let total: f64 = x.iter().map(|v| v.abs()).sum();
        if total > 0.999 * self.budget {
            let shrink = 0.999 * self.budget / total;
            x.iter_mut().for_each(|v| *v *= shrink);
        }
        let total: f64 = x.iter().map(|v| v.abs()).sum();
        let slack = (1.0 - total / self.budget) / k as f64;
        let w: Vec<f64> = x.iter().map(|v| v.abs() / self.budget + slack).collect();
        let mut p: Vec<f64> = w.iter().map(|wi| wi.ln()).collect();
        p.extend(
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| (xi / (self.budget * wi)).clamp(-1.0, 1.0).asin()),
        );
        p
    }
}

impl Objective for BudgetQaoaObjective<'_> {
    fn dim(&self) -> usize {
        4 * self.inner.layers
    }

    fn value(&self, p: &[f64]) -> f64 {
        self.inner.value(&self.angles(p))
    }

    fn gradient(&self, p: &[f64], step: f64) -> Vec<f64> {
        let k = 2 * self.inner.layers;
        let w = self.weights(&p[..k]);
        let a = self.angles(p);
        let ga = self.inner.angle_gradient(&a, step);
        // d epsilon / d x_k through a_k = 2 pi tanh(x_k / 2 pi).
        let gx: Vec<f64> = (0..k)
            .map(|j| ga[j] * (1.0 - (a[j] / (2.0 * PI)).powi(2)))
            .collect();
        let sin: Vec<f64> = p[k..].iter().map(|t| t.sin()).collect();
        let mean: f64 = (0..k).map(|j| gx[j] * sin[j] * w[j]).sum();
        let mut grad = vec![0.0; 2 * k];
        for j in 0..k {
            grad[j] = self.budget * w[j] * (gx[j] * sin[j] - mean);
            grad[k + j] = gx[j] * self.budget * w[j] * p[k + j].cos();
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{grover_problem_dim, perturbed_pspin_problem};
    use crate::optimize::bfgs::central_difference;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn schedule_gradient_matches_plain_differences() {
        let p = perturbed_pspin_problem(3, 2, 1.0, 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let obj = ScheduleObjective::new(&sub, 2.5, 7, 3.0, 1.0);
        let x: Vec<f64> = (0..14)
            .map(|k| ((k * 37 % 11) as f64 - 5.0) / 4.0)
            .collect();
        let fast = obj.gradient(&x, 1e-6);
        let slow = central_difference(&obj, &x, 1e-6);
        assert!(max_diff(&fast, &slow) < 1e-8, "{}", max_diff(&fast, &slow));
    }

    #[test]
    fn schedule_gradient_two_level_path() {
        let p = grover_problem_dim(16, &[3], 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let obj = ScheduleObjective::new(&sub, 4.0, 9, 20.0, 1.0);
        let x: Vec<f64> = (0..18).map(|k| (k as f64 * 0.61).sin()).collect();
        assert!(max_diff(&obj.gradient(&x, 1e-6), &central_difference(&obj, &x, 1e-6)) < 1e-8);
    }

    #[test]
    fn amplitude_parameter_round_trip() {
        let p = grover_problem_dim(4, &[1], 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let obj = ScheduleObjective::new(&sub, 1.0, 3, 20.0, 1.0);
        let amps = vec![(3.0, -0.5), (-19.0, 0.25), (0.0, 0.9)];
        let back = obj.amplitudes(&obj.parameters(&amps));
        for (a, b) in amps.iter().zip(&back) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn qaoa_gradient_matches_plain_differences() {
        let p = perturbed_pspin_problem(4, 2, 1.0, 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let obj = QaoaObjective::new(&sub, 3);
        let x = [0.4, -1.2, 2.0, 0.3, -0.7, 1.1];
        assert!(max_diff(&obj.gradient(&x, 1e-6), &central_difference(&obj, &x, 1e-6)) < 1e-8);
    }

    #[test]
    fn budget_map_respects_constraints_and_gradient() {
        let p = perturbed_pspin_problem(3, 2, 1.0, 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let obj = BudgetQaoaObjective::new(&sub, 2, 9.0);
        let x = [0.3, -0.2, 1.5, 0.0, 1.0, -0.4, 0.8, 2.2];
        let a = obj.angles(&x);
        assert!(a.iter().map(|v| v.abs()).sum::<f64>() <= 9.0);
        assert!(a.iter().all(|v| v.abs() < 2.0 * PI));
        assert!(max_diff(&obj.gradient(&x, 1e-6), &central_difference(&obj, &x, 1e-6)) < 1e-7);
        let back = obj.angles(&obj.parameters(&a));
        assert!(max_diff(&a, &back) < 1e-9);
    }

    #[test]
    fn objective_matches_full_dynamics() {
        use crate::dynamics::{fidelity, qaoa_evolve, QaoaAngles};
        let p = perturbed_pspin_problem(3, 3, 0.5, 1.0, 1.0).unwrap();
        let sub = DynamicalSubspace::new(&p).unwrap();
        let x = [0.9, -0.4, 1.7, 2.5];
        let eps = QaoaObjective::new(&sub, 2).value(&x);
        let full = qaoa_evolve(&p, &QaoaAngles::from_flat(&x).unwrap()).unwrap();
        assert!((1.0 - eps - fidelity(&full, &p.ground_projector).unwrap()).abs() < 1e-10);
    }
}
