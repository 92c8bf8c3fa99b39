//! Goodness-of-fit testing with the gradient-free kernelized Stein
//! discrepancy, plus the Hamming-kernel MMD two-sample baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::DiscreteModel;
use crate::numkit::{median_bandwidth, RandomStream, BANDWIDTH_FLOOR};
use crate::sampler::Bandwidth;
use crate::transform::{ContinuousParameterization, LogDensity, Surrogate, SurrogateMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GofConfig {
    /// Number of bootstrap replicates `m`.
    pub bootstraps: usize,
    pub alpha: f64,
    pub surrogate: SurrogateMode,
    pub bandwidth: Bandwidth,
    /// Report `(1 + #{S* > S}) / (m + 1)` instead of `#{S* > S} / m`.
    pub smoothed_p_value: bool,
}

impl Default for GofConfig {
    fn default() -> Self {
        Self {
            bootstraps: 1000,
            alpha: 0.05,
            surrogate: SurrogateMode::BaseOnly,
            bandwidth: Bandwidth::Median,
            smoothed_p_value: false,
        }
    }
}

impl GofConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.bootstraps < 100 {
            return Err(Error::Config(format!(
                "need at least 100 bootstrap replicates, got {}",
                self.bootstraps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

/// Stein kernel of an RBF kernel with bandwidth `h`, given the surrogate
/// scores `sx`, `sy` at `x`, `y`.
pub fn stein_kernel(x: &[f64], y: &[f64], sx: &[f64], sy: &[f64], h: f64) -> f64 {
    let d = x.len();
    let mut sq = 0.0;
    let mut ss = 0.0;
    let mut cross = 0.0;
    for t in 0..d {
        let diff = x[t] - y[t];
        sq += diff * diff;
        ss += sx[t] * sy[t];
        // sxᵀ∇_y k + syᵀ∇_x k, without the common factor 2k/h.
        cross += (sx[t] - sy[t]) * diff;
    }
    let k = (-sq / h).exp();
    k * (ss + 2.0 * cross / h + 2.0 * d as f64 / h - 4.0 * sq / (h * h))
}

/// `κ_ρ(x, y)` with scores from `surrogate`.
pub fn kappa_rho<S: Surrogate + ?Sized>(x: &[f64], y: &[f64], surrogate: &S, h: f64) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    let mut sx = vec![0.0; x.len()];
    let mut sy = vec![0.0; y.len()];
    surrogate.log_and_grad(x, &mut sx);
    surrogate.log_and_grad(y, &mut sy);
    if sx.iter().chain(&sy).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite surrogate score".into()));
    }
    Ok(stein_kernel(x, y, &sx, &sy, h))
}

/// The weighted Stein kernel matrix `M_ij = w_i κ_ρ(x_i, x_j) w_j`, diagonal
/// set to zero, with `w = ρ/p_c` normalized to mean 1.
#[derive(Debug, Clone)]
pub struct SteinMatrix {
    n: usize,
    entries: Vec<f64>,
    weights: Vec<f64>,
    bandwidth: f64,
}

impl SteinMatrix {
    pub fn new<T, S>(points: &[Vec<f64>], target: &T, surrogate: &S, bandwidth: Bandwidth) -> Result<Self>
    where
        T: LogDensity + ?Sized,
        S: Surrogate + ?Sized,
    {
        let n = points.len();
        if n < 2 {
            return Err(Error::Argument(format!("need at least 2 points, got {n}")));
        }
        let d = points[0].len();
        for p in points {
            check_dim(d, p.len())?;
        }
        let flat = points.concat();
        let h = match bandwidth {
            Bandwidth::Median => median_bandwidth(&flat, d)?.max(BANDWIDTH_FLOOR),
            Bandwidth::Fixed(h) => h,
        };
        let mut scores = vec![0.0; n * d];
        let mut log_w = Vec::with_capacity(n);
        for (i, (p, s)) in points.iter().zip(scores.chunks_mut(d)).enumerate() {
            let lr = surrogate.log_and_grad(p, s);
            let lp = target.log_density(p);
            if lp == f64::NEG_INFINITY {
                return Err(Error::ZeroMass { index: i });
            }
            if !(lr.is_finite() && lp.is_finite()) || s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite density or score at point {i}")));
            }
            log_w.push(lr - lp);
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let mean = weights.iter().sum::<f64>() / n as f64;
        weights.iter_mut().for_each(|w| *w /= mean);

        let mut entries = vec![0.0; n * n];
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let (xi, si) = (&points[i], &scores[i * d..(i + 1) * d]);
            for (j, e) in row.iter_mut().enumerate() {
                if i != j {
                    let k = stein_kernel(xi, &points[j], si, &scores[j * d..(j + 1) * d], h);
                    *e = weights[i] * k * weights[j];
                }
            }
        });
        Ok(Self {
            n,
            entries,
            weights,
            bandwidth: h,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// `Σ_{i≠j} M_ij / (n (n - 1))`.
    pub fn u_statistic(&self) -> f64 {
        let total: f64 = self.entries.chunks(self.n).map(|r| r.iter().sum::<f64>()).sum();
        total / (self.n * (self.n - 1)) as f64
    }

    /// `Σ_{i≠j} v_i M_ij v_j`.
    fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.entries
            .chunks(self.n)
            .zip(v)
            .map(|(row, vi)| vi * row.iter().zip(v).map(|(m, vj)| m * vj).sum::<f64>())
            .sum()
    }

    /// Bootstrap replicates `Σ_{i≠j} (u_i - 1)/n · M_ij · (u_j - 1)/n` with
    /// `u ~ Multi(n; 1/n, …, 1/n)`. Replicate `r` uses child stream `r`.
    pub fn bootstrap(&self, m: usize, seed: u64) -> Vec<f64> {
        let root = RandomStream::new(seed);
        (0..m)
            .into_par_iter()
            .map(|r| {
                let counts = multinomial_counts(self.n, &mut root.child(r as u64));
                let v: Vec<f64> = counts.iter().map(|&c| (c as f64 - 1.0) / self.n as f64).collect();
                self.quadratic_form(&v)
            })
            .collect()
    }
}

/// Counts of `n` uniform draws over `n` indices.
pub fn multinomial_counts(n: usize, rng: &mut RandomStream) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.index(n)] += 1;
    }
    counts
}

/// The GF-KSD U-statistic of continuous points against `target`.
pub fn gfksd_ustat<T, S>(points: &[Vec<f64>], target: &T, surrogate: &S, bandwidth: Bandwidth) -> Result<f64>
where
    T: LogDensity + ?Sized,
    S: Surrogate + ?Sized,
{
    Ok(SteinMatrix::new(points, target, surrogate, bandwidth)?.u_statistic())
}

/// Fraction of replicates strictly above the statistic.
pub fn bootstrap_p_value(statistic: f64, replicates: &[f64], smoothed: bool) -> f64 {
    let above = replicates.iter().filter(|&&r| r > statistic).count() as f64;
    if smoothed {
        (1.0 + above) / (replicates.len() as f64 + 1.0)
    } else {
        above / replicates.len() as f64
    }
}

/// Tests `H0: data ~ model` from discrete samples.
///
/// Each state is mapped to a point of its cell; the statistic is then
/// compared with multinomial bootstrap replicates.
pub fn run_gof_test<M: DiscreteModel>(
    data: &[Vec<f64>],
    cp: &ContinuousParameterization<M>,
    config: &GofConfig,
    seed: u64,
) -> Result<GofResult> {
    config.validate()?;
    let rng = RandomStream::new(seed);
    let points = cp.data_to_continuous(data, &mut rng.child(0))?;
    let surrogate = cp.surrogate(config.surrogate)?;
    let matrix = SteinMatrix::new(&points, cp, &surrogate, config.bandwidth)?;
    let statistic = matrix.u_statistic();
    let replicates = matrix.bootstrap(config.bootstraps, rng.child(1).seed());
    let p_value = bootstrap_p_value(statistic, &replicates, config.smoothed_p_value);
    Ok(GofResult {
        statistic,
        replicates,
        p_value,
        reject: p_value < config.alpha,
        alpha: config.alpha,
        m: config.bootstraps,
        n: data.len(),
        seed,
    })
}

/// `exp(-H(a, b))` with `H` the normalized Hamming distance.
pub fn hamming_kernel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    (-(diff as f64) / a.len() as f64).exp()
}

fn check_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Argument("MMD needs at least 2 states per sample".into()));
    }
    let d = a[0].len();
    for z in a.iter().chain(b) {
        check_dim(d, z.len())?;
    }
    Ok(d)
}

/// Unbiased MMD² estimate under the exponentiated Hamming kernel.
pub fn mmd_hamming(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_samples(a, b)?;
    let within = |s: &[Vec<f64>]| {
        let n = s.len();
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| (0..n).filter(|&j| j != i).map(|j| hamming_kernel(&s[i], &s[j])).sum::<f64>())
            .sum();
        total / (n * (n - 1)) as f64
    };
    let cross: f64 = a
        .par_iter()
        .map(|x| b.iter().map(|y| hamming_kernel(x, y)).sum::<f64>())
        .sum::<f64>()
        / (a.len() * b.len()) as f64;
    Ok(within(a) + within(b) - 2.0 * cross)
}

/// MMD² from a precomputed pooled Gram matrix and a group assignment.
fn mmd_from_gram(gram: &[f64], n: usize, first: &[usize], second: &[usize]) -> f64 {
    let within = |idx: &[usize]| {
        let mut t = 0.0;
        for &i in idx {
            for &j in idx {
                if i != j {
                    t += gram[i * n + j];
                }
            }
        }
        t / (idx.len() * (idx.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for &i in first {
        for &j in second {
            cross += gram[i * n + j];
        }
    }
    within(first) + within(second) - 2.0 * cross / (first.len() * second.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Permutation test of `a` and `b` having the same distribution.
pub fn mmd_permutation_test(a: &[Vec<f64>], b: &[Vec<f64>], shuffles: usize, alpha: f64, seed: u64) -> Result<MmdTestResult> {
    check_samples(a, b)?;
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let n = pooled.len();
    let mut gram = vec![0.0; n * n];
    gram.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, g) in row.iter_mut().enumerate() {
            *g = hamming_kernel(pooled[i], pooled[j]);
        }
    });
    let idx: Vec<usize> = (0..n).collect();
    let statistic = mmd_from_gram(&gram, n, &idx[..a.len()], &idx[a.len()..]);
    let root = RandomStream::new(seed);
    let above = (0..shuffles)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = root.child(r as u64);
            let mut perm = idx.clone();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            mmd_from_gram(&gram, n, &perm[..a.len()], &perm[a.len()..]) >= statistic
        })
        .count();
    let p_value = (1.0 + above as f64) / (shuffles as f64 + 1.0);
    Ok(MmdTestResult {
        statistic,
        p_value,
        reject: p_value < alpha,
    })
}
