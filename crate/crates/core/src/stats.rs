//! Small statistics toolkit: moments, jackknife errors, log-log fits, trend
//! tests and one-dimensional minimization.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Sum by recursive halving; error grows like `log n`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    pub fn of_mean(xs: &[f64]) -> Self {
        Self { value: mean(xs), se: std_error(xs) }
    }

    /// `value ± k·se`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.value - k * self.se, self.value + k * self.se)
    }
}

/// Delete-one jackknife of `stat`.
pub fn jackknife(xs: &[f64], stat: impl Fn(&[f64]) -> f64) -> Estimate {
    let n = xs.len();
    let full = stat(xs);
    if n < 2 {
        return Estimate::new(full, f64::NAN);
    }
    let mut buf = Vec::with_capacity(n - 1);
    let leave: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(&xs[..i]);
            buf.extend_from_slice(&xs[i + 1..]);
            stat(&buf)
        })
        .collect();
    let lm = mean(&leave);
    let dev: Vec<f64> = leave.iter().map(|x| (x - lm) * (x - lm)).collect();
    let se = ((n - 1) as f64 / n as f64 * pairwise_sum(&dev)).sqrt();
    Estimate::new(full, se)
}

/// Jackknife of the sample variance in `O(n)`, using the closed form of each
/// leave-one-out variance.
pub fn jackknife_variance(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let full = variance(xs);
    if n < 3 {
        return Estimate::new(full, f64::NAN);
    }
    let m = mean(xs);
    let ss = variance(xs) * (n - 1) as f64;
    let nf = n as f64;
    let leave: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let d = x - m;
            (ss - d * d * nf / (nf - 1.0)) / (nf - 2.0)
        })
        .collect();
    let lm = mean(&leave);
    let dev: Vec<f64> = leave.iter().map(|x| (x - lm) * (x - lm)).collect();
    Estimate::new(full, ((nf - 1.0) / nf * pairwise_sum(&dev)).sqrt())
}

/// Linear interpolation between order statistics; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Fit(format!("{n} abscissae for {} ordinates", y.len())));
    }
    if n < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite fit input".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx = pairwise_sum(&x.iter().map(|a| (a - mx) * (a - mx)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect::<Vec<_>>());
    let syy = pairwise_sum(&y.iter().map(|b| (b - my) * (b - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pairwise_sum(&x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).collect::<Vec<_>>());
    let rel = rss / syy.max(f64::MIN_POSITIVE);
    let r2 = if syy == 0.0 || rss <= 1e-24 * syy.max(1.0) { 1.0 } else { 1.0 - rel };
    let (slope_se, intercept_se) = if n > 2 {
        let s2 = rss / (n - 2) as f64;
        ((s2 / sxx).sqrt(), (s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LinearFit { slope, slope_se, intercept, intercept_se, r2, n })
}

/// Weighted least squares with weights `1/σ²`; falls back to OLS errors
/// scaled by the residual when all `σ` are zero.
pub fn wls(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    if sigma.iter().all(|s| *s == 0.0) {
        return ols(x, y);
    }
    let n = x.len();
    if n != y.len() || n != sigma.len() {
        return Err(Error::Fit("fit inputs differ in length".into()));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Fit("weights need positive errors".into()));
    }
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw = pairwise_sum(&w);
    let mx = pairwise_sum(&w.iter().zip(x).map(|(a, b)| a * b).collect::<Vec<_>>()) / sw;
    let my = pairwise_sum(&w.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<_>>()) / sw;
    let sxx = pairwise_sum(&(0..n).map(|i| w[i] * (x[i] - mx).powi(2)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy = pairwise_sum(&(0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).collect::<Vec<_>>());
    let syy = pairwise_sum(&(0..n).map(|i| w[i] * (y[i] - my).powi(2)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = pairwise_sum(&(0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).collect::<Vec<_>>());
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    Ok(LinearFit {
        slope,
        slope_se: (1.0 / sxx).sqrt(),
        intercept,
        intercept_se: (1.0 / sw + mx * mx / sxx).sqrt(),
        r2,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannKendall {
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    /// Two-sided normal-approximation p-value.
    pub p_value: f64,
    pub trend: Trend,
}

/// Mann-Kendall trend test at level `alpha`, with tie correction.
pub fn mann_kendall(xs: &[f64], alpha: f64) -> MannKendall {
    let n = xs.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for k in i + 1..n {
            s += match xs[k].partial_cmp(&xs[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut k = i;
        while k + 1 < n && sorted[k + 1] == sorted[i] {
            k += 1;
        }
        let t = (k - i + 1) as f64;
        ties += t * (t - 1.0) * (2.0 * t + 5.0);
        i = k + 1;
    }
    let nf = n as f64;
    let var_s = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ties) / 18.0;
    let z = if var_s <= 0.0 {
        0.0
    } else if s > 0 {
        (s as f64 - 1.0) / var_s.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var_s.sqrt()
    } else {
        0.0
    };
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2);
    let trend = if p_value < alpha {
        if z > 0.0 {
            Trend::Increasing
        } else {
            Trend::Decreasing
        }
    } else {
        Trend::None
    };
    MannKendall { s, var_s, z, p_value, trend }
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `n` points spaced evenly in `log` between `lo` and `hi`, inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        let big: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&big), 499_500.0);
    }

    #[test]
    fn jackknife_of_mean_equals_standard_error() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let jk = jackknife(&xs, mean);
        assert!((jk.se - std_error(&xs)).abs() < 1e-12);
    }

    #[test]
    fn fast_variance_jackknife_matches_generic() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 * 0.3 - 1.0).collect();
        let a = jackknife(&xs, variance);
        let b = jackknife_variance(&xs);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.se - b.se).abs() < 1e-12);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = ols(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-14);
        assert_eq!(f.r2, 1.0);
        let flat = ols(&x, &[2.0; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert_eq!(flat.r2, 1.0);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn trend_detection() {
        let up: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(mann_kendall(&up, 0.05).trend, Trend::Increasing);
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(mann_kendall(&down, 0.05).trend, Trend::Decreasing);
        assert_eq!(mann_kendall(&[1.0, 3.0, 2.0, 2.5], 0.05).trend, Trend::None);
        // n = 4 increasing: S = 6, Var = 4·3·13/18
        let mk = mann_kendall(&[1.0, 2.0, 3.0, 4.0], 0.05);
        assert_eq!(mk.s, 6);
        assert!((mk.var_s - 26.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.3).powi(2) + 2.0, 0.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 5.0);
        assert_eq!(quantile(&s, 0.25), 2.0);
        let g = log_space(1e-6, 10.0, 25);
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-6).abs() < 1e-20 && (g[24] - 10.0).abs() < 1e-12);
    }
}
