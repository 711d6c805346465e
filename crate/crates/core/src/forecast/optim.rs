//! Derivative-free and quasi-Newton minimizers.
//!
//! Objectives may return `f64::INFINITY` (or NaN) to mark infeasible points;
//! both methods then shrink toward the best feasible point.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clean(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

fn settled(f_old: f64, f_new: f64, tol: f64) -> bool {
    (f_old - f_new).abs() <= tol * (f_old.abs() + f_new.abs() + tol)
}

/// Nelder-Mead with the standard coefficients (1, 2, ½, ½). The initial
/// simplex steps `step[i]` along each axis.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        let v = clean(f(x0));
        return Minimum {
            x: Vec::new(),
            f: v,
            iterations: 0,
            converged: true,
        };
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), clean(f(x0))));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let v = clean(f(&x));
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best.is_finite() && worst.is_finite() && settled(best, worst, tol) {
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
        let towards = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = towards(-1.0, &simplex[n].0);
        let fr = clean(f(&reflected));
        if fr < simplex[0].1 {
            let expanded = towards(-2.0, &simplex[n].0);
            let fe = clean(f(&expanded));
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[n].1 {
            let x = towards(-0.5, &simplex[n].0);
            let v = clean(f(&x));
            (x, v)
        } else {
            let x = towards(0.5, &simplex[n].0);
            let v = clean(f(&x));
            (x, v)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best_x = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best_x) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            *v = clean(f(x));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        iterations,
        converged,
    }
}

/// Central-difference gradient.
pub fn numeric_gradient<F>(f: &mut F, x: &[f64]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = clean(f(&probe));
        probe[i] = x[i] - h;
        let down = clean(f(&probe));
        probe[i] = x[i];
        g[i] = if up.is_finite() && down.is_finite() {
            (up - down) / (2.0 * h)
        } else {
            f64::NAN
        };
    }
    g
}

/// BFGS with numerical gradients and a backtracking (Armijo) line search.
pub fn bfgs<F>(mut f: F, x0: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = clean(f(&x));
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            f: fx,
            iterations: 0,
            converged: n == 0,
        };
    }
    let mut g = numeric_gradient(&mut f, &x);
    let mut h_inv = identity(n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h_inv[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            // Lost positive definiteness: restart along steepest descent.
            h_inv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, d)| xi + t * d).collect();
            let ft = clean(f(&trial));
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent possible along the search direction.
            converged = true;
            break;
        };
        let g_new = numeric_gradient(&mut f, &x_new);
        let done = settled(fx, f_new, tol);

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 && y.iter().all(|v| v.is_finite()) {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h_inv[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h_inv[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if done {
            converged = true;
            break;
        }
    }
    Minimum {
        x,
        f: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.1, 0.1], 1e-14, 5000);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{m:?}");
    }

    #[test]
    fn bfgs_finds_rosenbrock_minimum() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], 1e-12, 500);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.2).powi(2) };
        let m = nelder_mead(f, &[1.0], &[0.1], 1e-12, 500);
        assert!((m.x[0] - 0.5).abs() < 1e-3, "{m:?}");
        let m = bfgs(f, &[1.0], 1e-12, 500);
        assert!(m.x[0] >= 0.5 && m.x[0] < 0.51, "{m:?}");
    }
}
