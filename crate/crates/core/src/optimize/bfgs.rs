use nalgebra::{DMatrix, DVector};

/// A real-valued function of a real vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Central finite differences unless overridden.
    fn gradient(&self, x: &[f64], step: f64) -> Vec<f64> {
        central_difference(self, x, step)
    }
}

pub fn central_difference<O: Objective + ?Sized>(obj: &O, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + step;
            let up = obj.value(&xp);
            xp[k] = x[k] - step;
            let down = obj.value(&xp);
            xp[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Closure adapter.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step: f64,
    /// Stop as soon as the objective drops below this.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Returned when the objective is not finite at the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonFinite;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// Quasi-Newton minimization with inverse-Hessian BFGS updates and an
/// Armijo backtracking line search. The returned value never exceeds the
/// starting value.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    x0: &[f64],
    settings: &BfgsSettings,
) -> Result<BfgsOutcome, NonFinite> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut f = obj.value(x.as_slice());
    if !f.is_finite() {
        return Err(NonFinite);
    }
    let mut g = DVector::from_vec(obj.gradient(x.as_slice(), settings.step));
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        if settings.target.is_some_and(|t| f < t) || g.norm() < settings.gradient_tolerance {
            converged = true;
            break;
        }
        if !g.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut p = -(&h * &g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            h.fill_with_identity();
            fresh = true;
            p = -&g;
            slope = -g.norm_squared();
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &p * alpha;
            let ft = obj.value(trial.as_slice());
            if ft.is_finite() && ft <= f + ARMIJO_C1 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                break;
            }
            // Retry from steepest descent with a reset curvature model.
            h.fill_with_identity();
            fresh = true;
            continue;
        };
        iterations += 1;
        let g_new = DVector::from_vec(obj.gradient(x_new.as_slice(), settings.step));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            if fresh {
                h *= sy / y.norm_squared();
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    if !converged {
        converged =
            settings.target.is_some_and(|t| f < t) || g.norm() < settings.gradient_tolerance;
    }
    Ok(BfgsOutcome {
        x: x.as_slice().to_vec(),
        value: f,
        iterations,
        converged,
    })
}
