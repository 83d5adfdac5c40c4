#![allow(dead_code)]

/// One-sample Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Critical KS statistic at the 1% level (Stephens' finite-n correction).
pub fn ks_critical_1pct(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    1.628 / (s + 0.12 + 0.11 / s)
}

/// Kendall tau-a of `ys` against their index order.
pub fn kendall_tau(ys: &[f64]) -> f64 {
    let n = ys.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            score += match ys[j].partial_cmp(&ys[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Signed periodic displacement from `from` to `to`, in `[-L/2, L/2)`.
pub fn signed_displacement(from: f64, to: f64, length: f64) -> f64 {
    let d = (to - from).rem_euclid(length);
    if d >= length / 2.0 {
        d - length
    } else {
        d
    }
}
