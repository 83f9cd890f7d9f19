//! Derivative-free and numerically differentiated local minimizers.
//!
//! [`nelder_mead`] is the default local kernel (simplex with adaptive
//! restarts); [`lbfgs_numgrad`] is a quasi-Newton alternative with
//! central-difference gradients that scales to the wide boundary-cone
//! objectives, where the gradient components are evaluated in parallel.

use rayon::prelude::*;

/// Result of a scalar or multivariate local minimization.
#[derive(Debug, Clone)]
pub struct MinResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Golden-section search on a bracketing triple `a < b < c` with
/// `f(b) < min(f(a), f(c))`.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    c: f64,
    xtol: f64,
) -> MinResult {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut evals = 0;
    let (mut lo, mut hi) = (a, c);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    // seed with the bracket midpoint information by fresh evaluations
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    evals += 2;
    let _ = b;
    while hi - lo > xtol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    MinResult { x: vec![x], value, evaluations: evals, converged: true }
}

/// Scan a grid for a bracketing triple around the minimum.
///
/// Returns `None` when the minimum sits on the grid edge.
pub fn bracket_on_grid<F: FnMut(f64) -> f64>(mut f: F, grid: &[f64]) -> Option<(f64, f64, f64)> {
    assert!(grid.len() >= 3);
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v < vals[best] {
            best = i;
        }
    }
    if best == 0 || best + 1 == grid.len() {
        return None;
    }
    Some((grid[best - 1], grid[best], grid[best + 1]))
}

#[derive(Debug, Clone)]
pub struct NmOptions {
    /// Convergence width on the simplex values.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Re-seed the simplex at the best point with a shrunken scale this
    /// many times after each convergence.
    pub restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self { f_tol: 1e-10, max_iter: 20_000, restarts: 2 }
    }
}

/// Nelder-Mead simplex with adaptive restarts.
///
/// `scales` sets the initial simplex extent per coordinate.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scales: &[f64],
    opts: &NmOptions,
) -> MinResult {
    assert_eq!(x0.len(), scales.len());
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut evals = 0usize;
    let mut best_x = x0.to_vec();
    let mut best_f = f(&best_x);
    evals += 1;
    let mut converged = false;

    let mut scale_factor = 1.0;
    for _restart in 0..=opts.restarts {
        // simplex seeded at the current best point
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(best_x.clone());
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += scales[i] * scale_factor;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
        evals += n + 1;

        for _ in 0..opts.max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
            let reorder_s: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
            let reorder_v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            simplex = reorder_s;
            values = reorder_v;

            if values[n] - values[0] < opts.f_tol {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
                .collect();
            let reflect: Vec<f64> = (0..n)
                .map(|k| centroid[k] + alpha * (centroid[k] - simplex[n][k]))
                .collect();
            let fr = f(&reflect);
            evals += 1;
            if fr < values[0] {
                let expand: Vec<f64> = (0..n)
                    .map(|k| centroid[k] + gamma * (reflect[k] - centroid[k]))
                    .collect();
                let fe = f(&expand);
                evals += 1;
                if fe < fr {
                    simplex[n] = expand;
                    values[n] = fe;
                } else {
                    simplex[n] = reflect;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = reflect;
                values[n] = fr;
            } else {
                let contract: Vec<f64> = if fr < values[n] {
                    (0..n).map(|k| centroid[k] + rho * (reflect[k] - centroid[k])).collect()
                } else {
                    (0..n).map(|k| centroid[k] + rho * (simplex[n][k] - centroid[k])).collect()
                };
                let fc = f(&contract);
                evals += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = contract;
                    values[n] = fc;
                } else {
                    // shrink toward the best vertex
                    for i in 1..=n {
                        for k in 0..n {
                            simplex[i][k] =
                                simplex[0][k] + sigma * (simplex[i][k] - simplex[0][k]);
                        }
                        values[i] = f(&simplex[i]);
                    }
                    evals += n;
                }
            }
        }
        let i_best = (0..=n)
            .min_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap())
            .unwrap();
        if values[i_best] < best_f - opts.f_tol {
            best_f = values[i_best];
            best_x = simplex[i_best].clone();
            converged = false;
        } else {
            if values[i_best] < best_f {
                best_f = values[i_best];
                best_x = simplex[i_best].clone();
            }
            converged = true;
        }
        scale_factor *= 0.1;
    }
    MinResult { x: best_x, value: best_f, evaluations: evals, converged }
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the max-abs gradient component falls below this.
    pub g_tol: f64,
    /// Stop when a step improves the value by less than this.
    pub f_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 12, max_iter: 400, g_tol: 1e-8, f_tol: 1e-12, fd_step: 1e-6 }
    }
}

/// L-BFGS with central-difference gradients and a backtracking Armijo
/// line search. The objective must be thread-safe: the `2n` gradient
/// evaluations per iteration run in parallel.
pub fn lbfgs_numgrad<F>(f: F, x0: &[f64], opts: &LbfgsOptions) -> MinResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let evals = std::sync::atomic::AtomicUsize::new(0);
    let eval = |x: &[f64]| -> f64 {
        evals.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        f(x)
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        let h = opts.fd_step;
        (0..n)
            .into_par_iter()
            .map(|k| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                (eval(&xp) - eval(&xm)) / (2.0 * h)
            })
            .collect()
    };

    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    let mut g = grad(&x);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < opts.g_tol {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &q);
            alphas[i] = a;
            axpy(&mut q, -a, &y_hist[i]);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let scale = dot(s, y) / dot(y, y).max(1e-300);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &q);
            axpy(&mut q, alphas[i] - b, &s_hist[i]);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        // backtracking Armijo search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let ft = eval(&xt);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((xt, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft)) = accepted else {
            converged = true;
            break;
        };
        let gt = grad(&xt);
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 {
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
        }
        let improved = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        if improved < opts.f_tol {
            converged = true;
            break;
        }
    }
    MinResult {
        x,
        value: fx,
        evaluations: evals.load(std::sync::atomic::Ordering::Relaxed),
        converged,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_section_quadratic() {
        let f = |x: f64| (x - 1.3) * (x - 1.3) + 2.0;
        let r = golden_section(f, -1.0, 1.0, 4.0, 1e-10);
        assert_abs_diff_eq!(r.x[0], 1.3, epsilon = 1e-6);
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_from_grid() {
        let grid: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
        let (a, b, c) = bracket_on_grid(|x| (x - 2.04).powi(2), &grid).unwrap();
        assert!(a < 2.04 && 2.04 < c && (b - 2.0).abs() < 0.11);
        assert!(bracket_on_grid(|x| x, &grid).is_none());
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], &NmOptions::default());
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-4);
        assert!(r.value < 1e-9);
    }

    #[test]
    fn lbfgs_wide_quadratic() {
        // 60-dimensional ill-scaled quadratic
        let n = 60;
        let f = |x: &[f64]| -> f64 {
            x.iter()
                .enumerate()
                .map(|(i, v)| (1.0 + i as f64 / 7.0) * (v - 0.3 * i as f64).powi(2))
                .sum()
        };
        let x0 = vec![0.0; n];
        let r = lbfgs_numgrad(f, &x0, &LbfgsOptions::default());
        for (i, v) in r.x.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.3 * i as f64, epsilon = 1e-5);
        }
        assert!(r.converged);
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let f = |x: &[f64]| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let r = lbfgs_numgrad(
            f,
            &[-1.2, 1.0],
            &LbfgsOptions { max_iter: 2000, ..Default::default() },
        );
        assert!(r.value < 1e-8, "value {}", r.value);
    }
}
