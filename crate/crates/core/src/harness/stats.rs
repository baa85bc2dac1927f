//! Small descriptive and inferential helpers for experiment outputs.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    /// One-sided p-value for a positive mean difference.
    pub p_greater: f64,
}

/// Paired t-test of `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument("paired test needs two equal samples of size >= 2".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let md = mean(&d);
    let se = std_dev(&d) / (n as f64).sqrt();
    let (t, p_greater) = if se == 0.0 {
        let t = if md > 0.0 { f64::INFINITY } else if md < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        (t, if md > 0.0 { 0.0 } else if md < 0.0 { 1.0 } else { 0.5 })
    } else {
        let t = md / se;
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::NumericalDegeneracy(e.to_string()))?;
        (t, 1.0 - dist.cdf(t))
    };
    Ok(PairedTest { n, mean_difference: md, t, p_greater })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankCorrelation {
    pub n: usize,
    pub rho: f64,
    /// One-sided p-value for positive association (t approximation).
    pub p_greater: f64,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument("rank correlation needs two equal samples of size >= 3".into()));
    }
    let n = x.len();
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    let p_greater = if rho >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::NumericalDegeneracy(e.to_string()))?;
        1.0 - dist.cdf(t)
    };
    Ok(RankCorrelation { n, rho, p_greater })
}
