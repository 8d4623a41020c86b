//! Least-squares rate fits: power laws in log-log space and exponential
//! tails in semi-log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope and coefficient of determination of a straight-line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Fitted power law `s ≈ C τ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    #[serde(skip)]
    pub log_prefactor: f64,
}

pub const MIN_SAMPLES: usize = 20;

/// Ordinary least squares `y = slope·x + intercept`. `r² = 1` when `y` is
/// constant (nothing left to explain).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::Fit(format!("need at least 2 paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    if !(slope.is_finite() && intercept.is_finite()) {
        return Err(Error::Fit("non-finite regression".into()));
    }
    Ok(LineFit { slope, intercept, r_squared, n })
}

fn check_positive(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples, got {}", samples.len())));
    }
    if let Some(&(t, s)) = samples.iter().find(|(t, s)| !(*t > 0.0 && *s > 0.0 && t.is_finite() && s.is_finite())) {
        return Err(Error::Fit(format!("samples must be positive and finite, got ({t}, {s})")));
    }
    Ok(())
}

/// Power-law fit over the trailing decade `[τ_max/10, τ_max]`.
///
/// Requires at least 20 positive samples spanning at least one decade.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerFit> {
    check_positive(samples)?;
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (t, _)| (lo.min(*t), hi.max(*t)));
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(Error::Fit(format!("samples span [{lo}, {hi}], less than one decade")));
    }
    fit_power_law_window(samples, hi / 10.0, hi)
}

/// Power-law fit restricted to `lo ≤ τ ≤ hi`.
pub fn fit_power_law_window(samples: &[(f64, f64)], lo: f64, hi: f64) -> Result<PowerFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .map(|(t, s)| (t.ln(), s.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::Fit(format!("only {} samples in the fit window", xs.len())));
    }
    if let Some(bad) = xs.iter().chain(&ys).find(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("non-positive sample in window ({bad})")));
    }
    let f = linear_fit(&xs, &ys)?;
    Ok(PowerFit { exponent: f.slope, r_squared: f.r_squared, log_prefactor: f.intercept })
}

/// Fit of `ln s` against `τ` on `lo ≤ τ ≤ hi` (exponential rate = slope).
pub fn fit_exponential_window(samples: &[(f64, f64)], lo: f64, hi: f64) -> Result<LineFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|(t, s)| *t >= lo && *t <= hi && *s > 0.0)
        .map(|(t, s)| (*t, s.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::Fit(format!("only {} samples in the fit window", xs.len())));
    }
    linear_fit(&xs, &ys)
}

/// Power-law fit of the upper envelope of an oscillating series: the maximum
/// of each consecutive `period`-wide bin over the trailing decade is fitted
/// against the bin midpoint.
pub fn fit_power_law_envelope(samples: &[(f64, f64)], period: f64) -> Result<PowerFit> {
    check_positive(samples)?;
    if !(period > 0.0) {
        return Err(Error::Fit(format!("envelope period must be positive, got {period}")));
    }
    let hi = samples.iter().fold(0.0f64, |m, s| m.max(s.0));
    let lo = hi / 10.0;
    let nbins = ((hi - lo) / period).floor() as usize;
    let mut peaks = vec![0.0f64; nbins];
    for &(t, s) in samples.iter().filter(|s| s.0 >= lo) {
        let k = (((t - lo) / period) as usize).min(nbins.saturating_sub(1));
        if k < nbins {
            peaks[k] = peaks[k].max(s);
        }
    }
    let env: Vec<(f64, f64)> = peaks
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, &p)| (lo + (k as f64 + 0.5) * period, p))
        .collect();
    if env.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("only {} envelope bins in the trailing decade", env.len())));
    }
    fit_power_law_window(&env, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn envelope_of_oscillation() {
        let s: Vec<_> = (1..200_000)
            .map(|i| i as f64 * 0.05)
            .map(|t| (t, t.powi(-2) * (1.5 + (t).sin()) + t.powi(-3)))
            .collect();
        let f = fit_power_law_envelope(&s, 2.0 * std::f64::consts::PI).unwrap();
        assert!((f.exponent + 2.0).abs() < 0.01, "{}", f.exponent);
        assert!(f.r_squared > 0.999);
    }

    #[test]
    fn exact_power_law() {
        let s: Vec<_> = grid(50, 1.0, 1000.0).into_iter().map(|t| (t, 3.0 * t.powf(-1.7))).collect();
        let f = fit_power_law(&s).unwrap();
        assert!((f.exponent + 1.7).abs() < 1e-6);
        assert!(f.r_squared > 0.999999);
    }

    #[test]
    fn noisy_inverse() {
        let mut rng = StdRng::seed_from_u64(7);
        let s: Vec<_> = grid(200, 1.0, 100.0)
            .into_iter()
            .map(|t| (t, 5.0 / t * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))))
            .collect();
        let f = fit_power_law(&s).unwrap();
        assert!((f.exponent + 1.0).abs() < 0.05, "{}", f.exponent);
    }

    #[test]
    fn constant_series() {
        let s: Vec<_> = grid(30, 1.0, 20.0).into_iter().map(|t| (t, 4.2)).collect();
        let f = fit_power_law(&s).unwrap();
        assert!(f.exponent.abs() < 1e-9);
        assert!((0.0..=1.0).contains(&f.r_squared));
    }

    #[test]
    fn rejects_bad_input() {
        let few: Vec<_> = grid(10, 1.0, 100.0).into_iter().map(|t| (t, t)).collect();
        assert!(fit_power_law(&few).is_err());
        let narrow: Vec<_> = grid(30, 1.0, 5.0).into_iter().map(|t| (t, t)).collect();
        assert!(fit_power_law(&narrow).is_err());
        let mut neg: Vec<_> = grid(30, 1.0, 100.0).into_iter().map(|t| (t, t)).collect();
        neg[3].1 = -1.0;
        assert!(fit_power_law(&neg).is_err());
    }

    #[test]
    fn exponential_rate() {
        let s: Vec<_> = (0..100).map(|i| (i as f64, 2.0 * (-0.3 * i as f64).exp())).collect();
        let f = fit_exponential_window(&s, 0.0, 100.0).unwrap();
        assert!((f.slope + 0.3).abs() < 1e-12);
    }
}
