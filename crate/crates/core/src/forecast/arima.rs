//! Seasonal ARIMA by bounded grid search.
//!
//! Every order in the grid is fitted by conditional sum of squares; the best
//! few by CSS-AICc are refined by exact Gaussian likelihood (Kalman filter)
//! and the final choice is by likelihood AICc. All candidates are fitted on
//! the same number of observations so their criteria are comparable.

use std::fmt;

use super::ets::aicc;
use super::optim::bfgs;
use super::FitConfig;

/// Candidates kept after the CSS pass.
pub const SHORTLIST: usize = 5;
const STATIONARITY_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub sp: usize,
    pub sd: usize,
    pub sq: usize,
}

impl ArimaOrder {
    /// p, q ∈ {0,1,2}; d, P, D, Q ∈ {0,1}.
    pub fn grid() -> Vec<ArimaOrder> {
        let mut out = Vec::with_capacity(144);
        for d in 0..=1 {
            for sd in 0..=1 {
                for p in 0..=2 {
                    for q in 0..=2 {
                        for sp in 0..=1 {
                            for sq in 0..=1 {
                                out.push(ArimaOrder { p, d, q, sp, sd, sq });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn has_mean(&self) -> bool {
        self.d + self.sd == 0
    }

    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.sp + self.sq + usize::from(self.has_mean())
    }

    /// Observations lost to differencing.
    pub fn lost(&self, period: usize) -> usize {
        self.d + period * self.sd
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})({},{},{})", self.p, self.d, self.q, self.sp, self.sd, self.sq)
    }
}

/// Coefficients in the layout `[φ₁…φp, θ₁…θq, Φ, Θ, μ]` (absent terms omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaCoefficients {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    pub mean: f64,
}

impl ArimaCoefficients {
    fn from_vec(order: &ArimaOrder, v: &[f64]) -> Self {
        let mut i = 0;
        let mut take = |k: usize| {
            let s = v[i..i + k].to_vec();
            i += k;
            s
        };
        let ar = take(order.p);
        let ma = take(order.q);
        let sar = take(order.sp);
        let sma = take(order.sq);
        let mean = if order.has_mean() { take(1)[0] } else { 0.0 };
        Self { ar, ma, sar, sma, mean }
    }

    pub fn to_vec(&self, order: &ArimaOrder) -> Vec<f64> {
        let mut v = [&self.ar[..], &self.ma, &self.sar, &self.sma].concat();
        if order.has_mean() {
            v.push(self.mean);
        }
        v
    }

    /// Expanded AR coefficients `a` with `φ(B)Φ(Bᵐ) = 1 − Σ aᵢBⁱ`.
    pub fn expanded_ar(&self, period: usize) -> Vec<f64> {
        let lhs = lag_poly(&self.ar, 1, -1.0);
        let rhs = lag_poly(&self.sar, period, -1.0);
        poly_mul(&lhs, &rhs)[1..].iter().map(|c| -c).collect()
    }

    /// Expanded MA coefficients `c` with `θ(B)Θ(Bᵐ) = 1 + Σ cⱼBʲ`.
    pub fn expanded_ma(&self, period: usize) -> Vec<f64> {
        let lhs = lag_poly(&self.ma, 1, 1.0);
        let rhs = lag_poly(&self.sma, period, 1.0);
        poly_mul(&lhs, &rhs)[1..].to_vec()
    }

    /// Stationary and invertible, with a small margin from the unit circle.
    pub fn admissible(&self) -> bool {
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
        stationary(&self.ar) && stationary(&self.sar) && stationary(&neg(&self.ma)) && stationary(&neg(&self.sma))
    }
}

/// `1 + sign·Σ cᵢ B^(i·lag)` as a dense coefficient vector.
fn lag_poly(c: &[f64], lag: usize, sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len() * lag + 1];
    out[0] = 1.0;
    for (i, v) in c.iter().enumerate() {
        out[(i + 1) * lag] = sign * v;
    }
    out
}

pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Stationarity of `xₜ = Σ aᵢ xₜ₋ᵢ + εₜ` by the step-down (reverse
/// Levinson) recursion: all partial autocorrelations inside the unit interval.
pub fn stationary(a: &[f64]) -> bool {
    let mut cur = a.to_vec();
    while let Some(&k) = cur.last() {
        if !k.is_finite() || k.abs() >= 1.0 - STATIONARITY_MARGIN {
            return false;
        }
        let p = cur.len();
        let denom = 1.0 - k * k;
        cur = (0..p - 1).map(|j| (cur[j] + k * cur[p - 2 - j]) / denom).collect();
    }
    true
}

pub fn difference(y: &[f64], lag: usize) -> Vec<f64> {
    (lag..y.len()).map(|t| y[t] - y[t - lag]).collect()
}

/// Differenced series trimmed to the common length `n − (1 + period)`.
fn working_series(y: &[f64], order: &ArimaOrder, period: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..order.d {
        w = difference(&w, 1);
    }
    for _ in 0..order.sd {
        w = difference(&w, period);
    }
    let drop = (1 + period) - order.lost(period);
    w.split_off(drop)
}

/// Conditional residuals: zero before `a.len()`, MA terms start from zero.
pub fn css_residuals(w: &[f64], a: &[f64], c: &[f64], mean: f64) -> Vec<f64> {
    let start = a.len();
    let mut e = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut v = w[t] - mean;
        for (i, ai) in a.iter().enumerate() {
            v -= ai * (w[t - i - 1] - mean);
        }
        for (j, cj) in c.iter().enumerate() {
            if t > j {
                v -= cj * e[t - j - 1];
            }
        }
        e[t] = v;
    }
    e
}

/// Innovations of the exact likelihood: `(Σ v²/F, Σ ln F)` for the
/// zero-mean ARMA with AR coefficients `a` and MA coefficients `c`,
/// innovation variance one.
pub fn kalman_innovations(w: &[f64], a: &[f64], c: &[f64]) -> Option<(f64, f64)> {
    let r = a.len().max(c.len() + 1);
    let tcol: Vec<f64> = (0..r).map(|i| a.get(i).copied().unwrap_or(0.0)).collect();
    let rvec: Vec<f64> = (0..r).map(|i| if i == 0 { 1.0 } else { c.get(i - 1).copied().unwrap_or(0.0) }).collect();
    let rr: Vec<Vec<f64>> = (0..r).map(|i| (0..r).map(|j| rvec[i] * rvec[j]).collect()).collect();
    let mut p = stationary_covariance(&tcol, &rr)?;
    let mut x = vec![0.0; r];
    let (mut ssq, mut sumlog) = (0.0, 0.0);
    for &obs in w {
        let f = p[0][0];
        if !(f.is_finite() && f > 0.0) {
            return None;
        }
        let v = obs - x[0];
        ssq += v * v / f;
        sumlog += f.ln();
        let k: Vec<f64> = (0..r).map(|i| p[i][0] / f).collect();
        for i in 0..r {
            x[i] += k[i] * v;
        }
        let row0 = p[0].clone();
        for i in 0..r {
            for j in 0..r {
                p[i][j] -= k[i] * row0[j];
            }
        }
        x = transition(&tcol, &x);
        p = transition_sandwich(&tcol, &p);
        for i in 0..r {
            for j in 0..r {
                p[i][j] += rr[i][j];
            }
        }
    }
    Some((ssq, sumlog))
}

/// `T x` with `T` = [a | I; 0].
fn transition(a: &[f64], x: &[f64]) -> Vec<f64> {
    let r = x.len();
    (0..r).map(|i| a[i] * x[0] + if i + 1 < r { x[i + 1] } else { 0.0 }).collect()
}

/// `T P Tᵀ` using the companion structure of `T`.
fn transition_sandwich(a: &[f64], p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let r = a.len();
    let tp: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..r).map(|j| a[i] * p[0][j] + if i + 1 < r { p[i + 1][j] } else { 0.0 }).collect())
        .collect();
    (0..r)
        .map(|i| (0..r).map(|j| a[j] * tp[i][0] + if j + 1 < r { tp[i][j + 1] } else { 0.0 }).collect())
        .collect()
}

/// Solves `P = T P Tᵀ + Q` by doubling.
fn stationary_covariance(a: &[f64], q: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let r = a.len();
    let mut t: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..r).map(|j| if j == 0 { a[i] } else if j == i + 1 { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut p = q.to_vec();
    for _ in 0..64 {
        let tp = matmul(&t, &p);
        let tpt = matmul_t(&tp, &t);
        let mut delta = 0.0f64;
        let mut size = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                p[i][j] += tpt[i][j];
                delta = delta.max(tpt[i][j].abs());
                size = size.max(p[i][j].abs());
            }
        }
        if !size.is_finite() {
            return None;
        }
        if delta <= 1e-15 * size {
            return Some(p);
        }
        t = matmul(&t, &t);
    }
    None
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let r = a.len();
    let mut out = vec![vec![0.0; r]; r];
    for i in 0..r {
        for k in 0..r {
            let v = a[i][k];
            if v != 0.0 {
                for j in 0..r {
                    out[i][j] += v * b[k][j];
                }
            }
        }
    }
    out
}

/// `A Bᵀ`.
fn matmul_t(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let r = a.len();
    (0..r)
        .map(|i| (0..r).map(|j| (0..r).map(|k| a[i][k] * b[j][k]).sum()).collect())
        .collect()
}

/// Exact Gaussian log-likelihood with σ² profiled out, and the σ² estimate.
/// `var_floor` keeps exact fits finite.
pub fn exact_loglik(w: &[f64], coef: &ArimaCoefficients, period: usize, var_floor: f64) -> Option<(f64, f64)> {
    let centred: Vec<f64> = w.iter().map(|v| v - coef.mean).collect();
    let (ssq, sumlog) = kalman_innovations(&centred, &coef.expanded_ar(period), &coef.expanded_ma(period))?;
    let n = w.len() as f64;
    let sigma2 = (ssq / n).max(var_floor);
    let ll = -0.5 * (n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + sumlog);
    ll.is_finite().then_some((ll, sigma2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub period: usize,
    pub coefficients: ArimaCoefficients,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
    /// Observations in the likelihood (after differencing and trimming).
    pub n_used: usize,
    /// Variance floor applied to σ².
    pub var_floor: f64,
    /// Conditional residuals aligned with the last `n_used` observations.
    pub residuals: Vec<f64>,
    pub history: Vec<f64>,
    pub converged: bool,
}

impl ArimaFit {
    pub fn n_params(&self) -> usize {
        self.order.n_coefficients() + 1
    }

    /// Recursive conditional expectations from the undifferenced form.
    pub fn predict(&self, h: usize) -> Vec<f64> {
        let m = self.period;
        let mut poly = lag_poly(&[], 1, -1.0);
        for _ in 0..self.order.d {
            poly = poly_mul(&poly, &[1.0, -1.0]);
        }
        for _ in 0..self.order.sd {
            poly = poly_mul(&poly, &lag_poly(&[1.0], m, -1.0));
        }
        let a = self.coefficients.expanded_ar(m);
        let full = poly_mul(&poly, &lag_poly(&a, 1, -1.0));
        let big_a: Vec<f64> = full[1..].iter().map(|c| -c).collect();
        let c = self.coefficients.expanded_ma(m);
        let mu = self.coefficients.mean;

        let n = self.history.len();
        let mut y: Vec<f64> = self.history.iter().map(|v| v - mu).collect();
        let mut e = vec![0.0; n - self.residuals.len()];
        e.extend_from_slice(&self.residuals);
        for _ in 0..h {
            let t = y.len();
            let mut v = 0.0;
            for (i, ai) in big_a.iter().enumerate() {
                if t > i {
                    v += ai * y[t - i - 1];
                }
            }
            for (j, cj) in c.iter().enumerate() {
                if t > j {
                    v += cj * e[t - j - 1];
                }
            }
            y.push(v);
            e.push(0.0);
        }
        y[n..].iter().map(|v| v + mu).collect()
    }
}

struct Candidate {
    order: ArimaOrder,
    w: Vec<f64>,
    start: Vec<f64>,
    css_aicc: f64,
}

fn fit_css(order: ArimaOrder, y: &[f64], period: usize, floor: f64, config: &FitConfig) -> Option<Candidate> {
    let w = working_series(y, &order, period);
    let n = w.len();
    let k = order.n_coefficients();
    let mut x0 = vec![0.0; k];
    if order.has_mean() {
        x0[k - 1] = w.iter().sum::<f64>() / n as f64;
    }
    let ncond = order.p + period * order.sp;
    let objective = |v: &[f64]| {
        let coef = ArimaCoefficients::from_vec(&order, v);
        if !coef.admissible() {
            return f64::INFINITY;
        }
        let e = css_residuals(&w, &coef.expanded_ar(period), &coef.expanded_ma(period), coef.mean);
        let css: f64 = e.iter().map(|v| v * v).sum();
        (css / (n - ncond) as f64).max(floor).ln()
    };
    let best = bfgs(objective, &x0, config.tolerance, config.max_iterations);
    if !best.f.is_finite() {
        return None;
    }
    let n_c = n - ncond;
    let sigma2 = best.f.exp();
    let ll = -0.5 * n_c as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Some(Candidate {
        order,
        css_aicc: aicc(ll, k + 1, n_c),
        start: best.x,
        w,
    })
}

fn fit_ml(cand: &Candidate, y: &[f64], period: usize, floor: f64, config: &FitConfig) -> Option<ArimaFit> {
    let order = cand.order;
    let start = if ArimaCoefficients::from_vec(&order, &cand.start).admissible() {
        cand.start.clone()
    } else {
        let mut z = vec![0.0; cand.start.len()];
        if order.has_mean() {
            z[cand.start.len() - 1] = cand.start[cand.start.len() - 1];
        }
        z
    };
    let w = &cand.w;
    let n = w.len();
    let objective = |v: &[f64]| {
        let coef = ArimaCoefficients::from_vec(&order, v);
        if !coef.admissible() {
            return f64::INFINITY;
        }
        exact_loglik(w, &coef, period, floor).map_or(f64::INFINITY, |(ll, _)| -ll / n as f64)
    };
    let best = bfgs(objective, &start, config.tolerance, config.max_iterations);
    let coefficients = ArimaCoefficients::from_vec(&order, &best.x);
    let (loglik, sigma2) = exact_loglik(w, &coefficients, period, floor)?;
    let residuals = css_residuals(w, &coefficients.expanded_ar(period), &coefficients.expanded_ma(period), coefficients.mean);
    let k = order.n_coefficients() + 1;
    Some(ArimaFit {
        order,
        period,
        sigma2,
        loglik,
        aicc: aicc(loglik, k, n),
        n_used: n,
        var_floor: floor,
        residuals,
        history: y.to_vec(),
        converged: best.converged,
        coefficients,
    })
}

/// Variance floor relative to the data scale.
pub fn variance_floor(y: &[f64]) -> f64 {
    let scale = 1.0 + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (1e-8 * scale).powi(2)
}

/// Grid search; `None` when no candidate yields a finite admissible fit.
pub fn fit(y: &[f64], period: usize, config: &FitConfig) -> Option<ArimaFit> {
    let floor = variance_floor(y);
    let mut cands: Vec<Candidate> = ArimaOrder::grid()
        .into_iter()
        .filter_map(|o| fit_css(o, y, period, floor, config))
        .filter(|c| c.css_aicc.is_finite())
        .collect();
    // Stable: grid order breaks ties.
    cands.sort_by(|a, b| a.css_aicc.total_cmp(&b.css_aicc));
    let mut best: Option<ArimaFit> = None;
    for cand in cands.iter().take(SHORTLIST) {
        let Some(fit) = fit_ml(cand, y, period, floor, config) else {
            continue;
        };
        if fit.aicc.is_finite() && best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
            best = Some(fit);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_144_orders() {
        let g = ArimaOrder::grid();
        assert_eq!(g.len(), 144);
        let unique: std::collections::HashSet<_> = g.iter().collect();
        assert_eq!(unique.len(), 144);
    }

    #[test]
    fn expanded_polynomials() {
        let c = ArimaCoefficients {
            ar: vec![0.5, 0.2],
            ma: vec![0.3],
            sar: vec![0.4],
            sma: vec![-0.6],
            mean: 0.0,
        };
        let a = c.expanded_ar(7);
        // (1 − .5B − .2B²)(1 − .4B⁷) = 1 − .5B − .2B² − .4B⁷ + .2B⁸ + .08B⁹
        let want = [0.5, 0.2, 0.0, 0.0, 0.0, 0.0, 0.4, -0.2, -0.08];
        assert_eq!(a.len(), want.len());
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        let m = c.expanded_ma(7);
        let want = [0.3, 0.0, 0.0, 0.0, 0.0, 0.0, -0.6, -0.18];
        for (x, y) in m.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn step_down_stationarity() {
        assert!(stationary(&[0.5]));
        assert!(!stationary(&[1.0]));
        assert!(!stationary(&[-1.2]));
        // AR(2) triangle: φ₂ < 1 − |φ₁|.
        assert!(stationary(&[0.5, 0.3]));
        assert!(!stationary(&[0.5, 0.6]));
        assert!(!stationary(&[0.1, -1.0]));
        assert!(stationary(&[]));
    }

    #[test]
    fn kalman_matches_closed_form_ar1() {
        // Exact AR(1) likelihood: first term uses variance 1/(1−φ²).
        let w = [0.3, -0.2, 0.8, 0.1, -0.5];
        let phi = 0.6;
        let (ssq, sumlog) = kalman_innovations(&w, &[phi], &[]).unwrap();
        let mut want = w[0] * w[0] * (1.0 - phi * phi);
        for t in 1..w.len() {
            want += (w[t] - phi * w[t - 1]).powi(2);
        }
        assert!((ssq - want).abs() < 1e-12);
        assert!((sumlog + (1.0f64 - phi * phi).ln()).abs() < 1e-12);
    }

    #[test]
    fn working_series_has_common_length() {
        let y: Vec<f64> = (0..40).map(f64::from).collect();
        for o in ArimaOrder::grid() {
            assert_eq!(working_series(&y, &o, 7).len(), 32);
        }
    }
}
