//! Small statistical toolkit used by the Monte Carlo harness.

use rand_core::RngCore;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::rng::below;

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance and its standard error from the fourth moment.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `Q(x) = 2 sum (-1)^(j-1) exp(-2 j^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `xs` against the standard normal.
pub fn ks_test_normal(xs: &[f64]) -> Result<KsResult> {
    if xs.len() < 5 {
        return Err(domain("KS test needs at least 5 samples"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sq = n.sqrt();
    let p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsResult { statistic: d, p_value: p })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. `probs` must cover the whole support (put any
/// tail mass in the last bin); adjacent bins are pooled until each expects
/// at least 5 counts.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(domain("observed and expected bins differ in length"));
    }
    let total_p: f64 = probs.iter().sum();
    if (total_p - 1.0).abs() > 1e-9 {
        return Err(domain(format!("bin probabilities sum to {total_p}, not 1")));
    }
    let n = observed.iter().sum::<u64>() as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob as f64;
        e += p * n;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InsufficientTail("too few counts for a chi-square test".into()));
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

/// Hill estimate of the tail index from the `top` largest values.
pub fn hill(sorted_desc: &[f64], top: usize) -> f64 {
    let threshold = sorted_desc[top].ln();
    let s: f64 = sorted_desc[..top].iter().map(|x| x.ln() - threshold).sum();
    top as f64 / s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub index: f64,
    pub std_error: f64,
    pub top: usize,
}

/// Hill estimator on the top `fraction` of the positive samples, with a
/// bootstrap standard error.
pub fn hill_bootstrap(xs: &[f64], fraction: f64, resamples: usize, rng: &mut impl RngCore) -> Result<HillEstimate> {
    let mut pos: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    let top = (fraction * pos.len() as f64).floor() as usize;
    if top < 100 || top >= pos.len() {
        return Err(Error::InsufficientTail(format!("only {top} points in the tail")));
    }
    pos.sort_by(|a, b| b.total_cmp(a));
    if pos[top] >= pos[0] {
        return Err(Error::InsufficientTail("tail is degenerate".into()));
    }
    let index = hill(&pos, top);
    let mut boots = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; pos.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = pos[below(rng, pos.len() as u64) as usize];
        }
        buf.sort_by(|a, b| b.total_cmp(a));
        let h = hill(&buf, top);
        if h.is_finite() {
            boots.push(h);
        }
    }
    let (_, se) = mean_se(&boots);
    let std_error = se * (boots.len() as f64).sqrt();
    Ok(HillEstimate { index, std_error, top })
}
