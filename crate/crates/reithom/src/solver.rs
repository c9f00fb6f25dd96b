//! Projected gradient descent with Barzilai-Borwein steps.
//!
//! The cell problems and the direct epsilon-problems are convex, so a BB step
//! with a nonmonotone safeguard converges robustly without line-search
//! machinery. On non-monotone energy the step falls back to halving until the
//! trial point is acceptable against the worst of the recent energies.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    pub max_iter: usize,
    /// Stop when the projected gradient 2-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the best energy improves by less than this relative amount
    /// over `energy_window` iterations.
    pub energy_tol: f64,
    pub energy_window: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iter: 20_000,
            grad_tol: 1e-8,
            energy_tol: 1e-12,
            energy_window: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    EnergyStall,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub stop: StopReason,
}

/// A smooth convex objective over a flat parameter vector, together with the
/// affine constraint set it lives on.
pub trait Objective {
    /// Energy and gradient at `x`; `grad` has the same length as `x`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Project a point onto the feasible set (mean-zero, pinned nodes, ...).
    fn project_point(&self, _x: &mut [f64]) {}

    /// Project a gradient onto the tangent space of the feasible set.
    fn project_grad(&self, _g: &mut [f64]) {}
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn minimize(obj: &dyn Objective, x0: Vec<f64>, params: &SolverParams) -> SolveResult {
    let n = x0.len();
    let mut x = x0;
    obj.project_point(&mut x);

    let mut grad = vec![0.0; n];
    let mut energy = obj.eval(&x, &mut grad);
    obj.project_grad(&mut grad);
    let mut gnorm = norm2(&grad);

    let mut best_energy = energy;
    let mut best_x = x.clone();
    // recent energies for the nonmonotone acceptance test
    let mut recent: Vec<f64> = vec![energy];
    // best-energy trace for the stall test
    let mut best_trace: Vec<f64> = vec![energy];

    let mut alpha = 1.0 / gnorm.max(1.0);
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    let mut iterations = 0;
    let mut stop = StopReason::MaxIter;

    if gnorm <= params.grad_tol {
        return SolveResult {
            x,
            energy,
            iterations: 0,
            grad_norm: gnorm,
            converged: true,
            stop: StopReason::GradTol,
        };
    }

    'outer: for iter in 1..=params.max_iter {
        iterations = iter;
        let e_ref = recent.iter().cloned().fold(f64::MIN, f64::max);

        // take the BB step, halving on unacceptable energy
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] - alpha * grad[i];
            }
            obj.project_point(&mut trial);
            let e_new = obj.eval(&trial, &mut trial_grad);
            if e_new.is_finite() && e_new <= e_ref + 1e-10 * e_ref.abs().max(1e-300) {
                obj.project_grad(&mut trial_grad);
                // BB1 step from the accepted displacement
                let mut sy = 0.0;
                let mut ss = 0.0;
                for i in 0..n {
                    let s = trial[i] - x[i];
                    let y = trial_grad[i] - grad[i];
                    sy += s * y;
                    ss += s * s;
                }
                alpha = if sy > 1e-300 {
                    (ss / sy).clamp(1e-14, 1e14)
                } else {
                    // flat curvature: grow the step
                    (alpha * 2.0).min(1e14)
                };
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                energy = e_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-300 {
                break;
            }
        }
        if !accepted {
            // step collapsed to nothing: the iterate is numerically stationary
            stop = StopReason::EnergyStall;
            break 'outer;
        }

        gnorm = norm2(&grad);
        if energy < best_energy {
            best_energy = energy;
            best_x.copy_from_slice(&x);
        }

        recent.push(energy);
        if recent.len() > params.energy_window {
            recent.remove(0);
        }
        best_trace.push(best_energy);

        if gnorm <= params.grad_tol {
            stop = StopReason::GradTol;
            break 'outer;
        }
        if best_trace.len() > params.energy_window {
            let before = best_trace[best_trace.len() - 1 - params.energy_window];
            let drop = before - best_energy;
            if drop <= params.energy_tol * best_energy.abs().max(1e-300) {
                stop = StopReason::EnergyStall;
                break 'outer;
            }
        }
    }

    let converged = !matches!(stop, StopReason::MaxIter);
    SolveResult {
        x: best_x,
        energy: best_energy,
        iterations,
        grad_norm: gnorm,
        converged,
        stop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            let mut e = 0.0;
            for i in 0..x.len() {
                e += 0.5 * self.diag[i] * x[i] * x[i];
                grad[i] = self.diag[i] * x[i];
            }
            e
        }
    }

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let n = 64;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + (i * i) as f64).collect();
        let obj = Quadratic { diag };
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
        let res = minimize(&obj, x0, &SolverParams::default());
        assert!(res.converged, "{:?}", res.stop);
        assert!(res.energy < 1e-14, "energy {}", res.energy);
    }

    struct MeanZeroQuadratic {
        weights: Vec<f64>,
        shift: f64,
    }

    impl Objective for MeanZeroQuadratic {
        fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            let mut e = 0.0;
            for i in 0..x.len() {
                let v = x[i] + self.shift;
                e += 0.5 * self.weights[i] * v * v;
                grad[i] = self.weights[i] * v;
            }
            e
        }

        fn project_point(&self, x: &mut [f64]) {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            x.iter_mut().for_each(|v| *v -= mean);
        }

        fn project_grad(&self, g: &mut [f64]) {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            g.iter_mut().for_each(|v| *v -= mean);
        }
    }

    #[test]
    fn respects_mean_zero_constraint() {
        let n = 32;
        let weights: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
        let obj = MeanZeroQuadratic {
            weights,
            shift: 1.0,
        };
        let res = minimize(&obj, vec![0.0; n], &SolverParams::default());
        assert!(res.converged);
        let mean = res.x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn immediate_convergence_at_stationary_start() {
        let obj = Quadratic { diag: vec![2.0; 8] };
        let res = minimize(&obj, vec![0.0; 8], &SolverParams::default());
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
        assert_eq!(res.stop, StopReason::GradTol);
    }

    #[test]
    fn max_iter_reported_as_not_converged() {
        let obj = Quadratic { diag: vec![1.0; 4] };
        let params = SolverParams {
            max_iter: 1,
            grad_tol: 1e-300,
            energy_tol: 0.0,
            ..Default::default()
        };
        let res = minimize(&obj, vec![1.0; 4], &params);
        assert!(!res.converged);
        assert_eq!(res.stop, StopReason::MaxIter);
    }
}
