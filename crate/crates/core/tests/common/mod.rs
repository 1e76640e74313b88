#![allow(dead_code)]

use recsim::ModelSpec;

/// `E[T^kappa]` for geometric `T`, summed term by term from the probability
/// mass function until the terms are negligible.
pub fn direct_cost(rho: f64, kappa: f64) -> f64 {
    let q = 1.0 - rho;
    let mut total = 0.0;
    let mut pmf = rho;
    let mut l = 1.0f64;
    loop {
        let term = l.powf(kappa) * pmf;
        total += term;
        if l > 10.0 && term < 1e-16 * total {
            return total;
        }
        pmf *= q;
        l += 1.0;
    }
}

pub fn direct_expected_cost(spec: &ModelSpec, x: &[f64], theta: &[f64]) -> f64 {
    (0..spec.topics())
        .map(|n| {
            let rho: f64 = (0..spec.sites()).map(|m| x[m] * spec.coverage(m, n)).sum();
            theta[n] * direct_cost(rho, spec.kappa())
        })
        .sum()
}

/// Expected reward straight from the conditional acceptance law.
pub fn direct_expected_reward(spec: &ModelSpec, x: &[f64], theta: &[f64]) -> f64 {
    (0..spec.topics())
        .map(|n| {
            let rho: f64 = (0..spec.sites()).map(|m| x[m] * spec.coverage(m, n)).sum();
            let mean: f64 = (0..spec.sites())
                .map(|m| spec.rewards()[m] * x[m] * spec.coverage(m, n) / rho)
                .sum();
            theta[n] * mean
        })
        .sum()
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|m| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[m] += h;
            lo[m] -= h;
            (f(&hi) - f(&lo)) / (2.0 * h)
        })
        .collect()
}

/// `|a - b|_inf / max(|b|_inf, 1)`.
pub fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
