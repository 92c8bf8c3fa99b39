//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// CDF of a unit-variance Gaussian mixture.
pub fn mixture_cdf(weights: &[f64], means: &[f64], x: f64) -> f64 {
    weights.iter().zip(means).map(|(w, m)| w * normal_cdf(x - m)).sum()
}

pub fn mixture_pdf(weights: &[f64], means: &[f64], x: f64) -> f64 {
    weights.iter().zip(means).map(|(w, m)| w * normal_pdf(x - m)).sum()
}

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Pearson chi-square p-value of `counts` against `probs`; bins with
/// expected count below 5 are pooled.
pub fn chi_square_p_value(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        o_acc += c as f64;
        e_acc += p * n as f64;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => bins.push((o_acc, e_acc)),
        }
    }
    if bins.len() < 2 {
        return 1.0;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(stat)
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov critical value at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// All spin vectors of length `d` in lexicographic order with -1 before +1.
pub fn all_spins(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d)
        .map(|m| (0..d).map(|j| if m >> (d - 1 - j) & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// Brute-force grid Ising distribution `p(z) ∝ exp(σ Σ_<ij> z_i z_j)`.
pub fn ising_probs(rows: usize, cols: usize, coupling: f64) -> Vec<(Vec<f64>, f64)> {
    let states = all_spins(rows * cols);
    let energy = |z: &[f64]| {
        let mut e = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    e += z[i] * z[i + 1];
                }
                if r + 1 < rows {
                    e += z[i] * z[i + cols];
                }
            }
        }
        coupling * e
    };
    let w: Vec<f64> = states.iter().map(|z| energy(z).exp()).collect();
    let total: f64 = w.iter().sum();
    states.into_iter().zip(w).map(|(z, w)| (z, w / total)).collect()
}

/// Brute-force RBM visible marginal, summing hidden bits explicitly.
pub fn rbm_probs(weight: &[Vec<f64>], b: &[f64], c: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let d = b.len();
    let m = c.len();
    let states = all_spins(d);
    let w: Vec<f64> = states
        .iter()
        .map(|z| {
            let mut total = 0.0;
            for hm in 0..1usize << m {
                let h: Vec<f64> = (0..m).map(|k| (hm >> k & 1) as f64).collect();
                let mut e: f64 = z.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
                e += h.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
                for i in 0..d {
                    for k in 0..m {
                        e += z[i] * weight[i][k] * h[k];
                    }
                }
                total += e.exp();
            }
            total
        })
        .collect();
    let total: f64 = w.iter().sum();
    states.into_iter().zip(w).map(|(z, w)| (z, w / total)).collect()
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            y[j] = x[j] + h;
            let up = f(&y);
            y[j] = x[j] - h;
            let down = f(&y);
            y[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - b| / max(|b|, floor)` over coordinates.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Test accuracy of a logistic regression with intercept fitted by
/// full-batch gradient descent; a reference for linearly separable-ish data.
pub fn logistic_regression_accuracy(train_x: &[Vec<f64>], train_y: &[usize], test_x: &[Vec<f64>], test_y: &[usize]) -> f64 {
    let d = train_x[0].len();
    let mut w = vec![0.0; d + 1];
    let n = train_x.len() as f64;
    for _ in 0..2000 {
        let mut g = vec![0.0; d + 1];
        for (x, &y) in train_x.iter().zip(train_y) {
            let t = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-t).exp());
            let r = p - y as f64;
            for j in 0..d {
                g[j] += r * x[j];
            }
            g[d] += r;
        }
        for j in 0..=d {
            w[j] -= 0.5 * g[j] / n;
        }
    }
    let correct = test_x
        .iter()
        .zip(test_y)
        .filter(|(x, &y)| {
            let t = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            (t > 0.0) == (y == 1)
        })
        .count();
    correct as f64 / test_x.len() as f64
}

/// Empirical frequencies of each enumerated state among `samples`.
pub fn state_counts(samples: &[Vec<f64>], states: &[Vec<f64>]) -> Vec<u64> {
    let mut counts = vec![0u64; states.len()];
    for s in samples {
        let i = states.iter().position(|z| z == s).expect("sample is a valid state");
        counts[i] += 1;
    }
    counts
}
