//! Derivative-free minimization (Nelder–Mead simplex).

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Stop when `max f − min f` over the simplex falls below this.
    pub ftol: f64,
    /// Evaluation budget per start, restarts included.
    pub max_evals: usize,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig { ftol: 1e-6, max_evals: 500, initial_step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite values are treated as `+∞`.
///
/// After convergence the simplex is rebuilt around the best point with a smaller
/// step and the search continues; the run ends once a restart no longer improves
/// the best value by more than `ftol`.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], config: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    if n == 0 {
        let value = eval(x0, &mut evals);
        return Minimum { x: Vec::new(), value, evaluations: evals, converged: true };
    }

    let mut best = x0.to_vec();
    let mut best_value = eval(x0, &mut evals);
    let mut step = config.initial_step;
    let mut converged = false;
    for _restart in 0..8 {
        let (x, value, ok) = simplex_run(&mut eval, &best, best_value, step, config, &mut evals);
        let improvement = best_value - value;
        if value <= best_value {
            best = x;
            best_value = value;
        }
        if !ok {
            converged = false;
            break;
        }
        converged = true;
        if !(improvement > config.ftol) {
            break;
        }
        step *= 0.1;
    }
    Minimum { x: best, value: best_value, evaluations: evals, converged }
}

fn simplex_run(
    eval: &mut impl FnMut(&[f64], &mut usize) -> f64,
    start: &[f64],
    start_value: f64,
    step: f64,
    config: &NelderMeadConfig,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut values = vec![start_value];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        values.push(eval(&p, evals));
        simplex.push(p);
    }
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        // Stable sort keeps ties in insertion order, so runs are reproducible.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (lo, hi) = (order[0], order[n]);
        let spread = values[hi] - values[lo];
        if spread <= config.ftol && values[lo].is_finite() {
            return (simplex[lo].clone(), values[lo], true);
        }
        if *evals >= config.max_evals {
            return (simplex[lo].clone(), values[lo], false);
        }
        let second = order[n - 1];
        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[hi]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, evals);
        if fr < values[lo] {
            let xe = along(2.0);
            let fe = eval(&xe, evals);
            if fe < fr {
                simplex[hi] = xe;
                values[hi] = fe;
            } else {
                simplex[hi] = xr;
                values[hi] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[hi] = xr;
            values[hi] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[hi] {
            let x = along(0.5);
            let v = eval(&x, evals);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, evals);
            (x, v)
        };
        if fc < values[hi].min(fr) {
            simplex[hi] = xc;
            values[hi] = fc;
            continue;
        }
        let anchor = simplex[lo].clone();
        for &k in &order[1..] {
            let p: Vec<f64> = anchor.iter().zip(&simplex[k]).map(|(a, x)| a + 0.5 * (x - a)).collect();
            values[k] = eval(&p, evals);
            simplex[k] = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * x[0] * x[1],
            &[0.0, 0.0],
            &NelderMeadConfig::default(),
        );
        assert!(m.converged);
        // Stationary point of the quadratic.
        let a = 72.0 / 47.0;
        let b = -2.0 - a / 12.0;
        assert!((m.x[0] - a).abs() < 2e-3 && (m.x[1] - b).abs() < 2e-3, "{:?}", m.x);
    }

    #[test]
    fn rosenbrock_within_budget() {
        let cfg = NelderMeadConfig { ftol: 1e-12, max_evals: 2000, initial_step: 0.5 };
        let m = nelder_mead(|x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2), &[-1.2, 1.0], &cfg);
        assert!(m.value < 1e-6, "{m:?}");
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let m = nelder_mead(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.2).powi(2) },
            &[1.0],
            &NelderMeadConfig::default(),
        );
        assert!((m.x[0] - 0.2).abs() < 1e-2);
    }

    #[test]
    fn budget_exhaustion_reports_nonconvergence() {
        let cfg = NelderMeadConfig { ftol: 0.0, max_evals: 20, initial_step: 1.0 };
        let m = nelder_mead(|x| x[0].abs().sqrt() + x[1] * x[1], &[3.0, 3.0], &cfg);
        assert!(!m.converged);
        assert!(m.evaluations <= 20 + 3);
    }
}
