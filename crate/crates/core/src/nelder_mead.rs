//! Nelder–Mead downhill simplex with the standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when every vertex lies within this distance of the best one.
    pub xtol: f64,
    /// Stop when the spread of objective values falls below
    /// `ftol * (|f_best| + ftol)`, or below `ftol` absolutely.
    pub ftol: f64,
    pub max_iterations: usize,
    /// Size of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-6,
            ftol: 1e-12,
            max_iterations: 2000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0`. The objective must be `Sync` because
/// shrink steps evaluate the new vertices concurrently. Non-finite values
/// are treated as +∞.
pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut evaluations = 1;
    let f0 = eval(x0);
    if f0 == 0.0 || n == 0 {
        return SimplexResult {
            x: x0.to_vec(),
            value: f0,
            iterations: 0,
            evaluations,
            converged: true,
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    let others: Vec<_> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut x = x0.to_vec();
            x[k] += opts.initial_step;
            let v = eval(&x);
            (x, v)
        })
        .collect();
    evaluations += n;
    simplex.extend(others);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = worst - best;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best == 0.0 || (diameter <= opts.xtol && (spread <= opts.ftol * (best.abs() + opts.ftol) || spread <= opts.ftol)) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(1.0);
        let fr = eval(&xr);
        evaluations += 1;
        if fr < best {
            let xe = along(2.0);
            let fe = eval(&xe);
            evaluations += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let x = along(0.5);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x);
            (x, v)
        };
        evaluations += 1;
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        let shrunk: Vec<_> = simplex[1..]
            .par_iter()
            .map(|(x, _)| {
                let y: Vec<f64> = anchor.iter().zip(x).map(|(a, b)| a + 0.5 * (b - a)).collect();
                let v = eval(&y);
                (y, v)
            })
            .collect();
        evaluations += n;
        simplex.truncate(1);
        simplex.extend(shrunk);
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    SimplexResult {
        x,
        value,
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(|x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], &SimplexOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 2.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            xtol: 1e-9,
            ftol: 1e-16,
            max_iterations: 5000,
            initial_step: 0.5,
        };
        let r = minimize(f, &[-1.2, 1.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn zero_at_start_returns_immediately() {
        let r = minimize(|x| x.iter().map(|v| v * v).sum(), &[0.0, 0.0, 0.0], &SimplexOptions::default());
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = SimplexOptions {
            max_iterations: 3,
            ..SimplexOptions::default()
        };
        let r = minimize(|x| (x[0] - 5.0).powi(2) + 1.0, &[0.0], &opts);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.value < 26.0);
    }
}
