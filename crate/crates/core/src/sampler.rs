//! Particle engine: SVGD for differentiable targets and its gradient-free,
//! importance-weighted variant for the piecewise densities of
//! [`crate::transform`].

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::DiscreteModel;
use crate::numkit::{median_bandwidth, AdamState, RandomStream, BANDWIDTH_FLOOR};
use crate::transform::{ContinuousParameterization, EvenPartition, LogDensity, Surrogate, SurrogateMode};

/// How importance weights `ρ/p_c` enter the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `w_j ∝ ρ(x_j) / p_c(x_j)`.
    #[default]
    Importance,
    /// `γ_j = n / #{k : μ_k ≥ μ_j}` on the raw ratios `μ`.
    Rank,
}

/// How the aggregated direction moves a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Per-particle Adam on the direction, learning rate = step size.
    #[default]
    Adam,
    /// `x += ε φ(x)`.
    Plain,
}

/// Kernel bandwidth policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median heuristic, recomputed every iteration.
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub weights: WeightScheme,
    pub update: UpdateRule,
    pub bandwidth: Bandwidth,
    pub seed: u64,
    pub init_mean: f64,
    pub init_std: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            step_size: AdamState::DEFAULT_STEP_SIZE,
            iterations: 500,
            weights: WeightScheme::Importance,
            update: UpdateRule::Adam,
            bandwidth: Bandwidth::Median,
            seed: 0,
            init_mean: 0.0,
            init_std: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) || !self.init_mean.is_finite() {
            return Err(Error::Config(
                "initial distribution must have finite mean and positive std".into(),
            ));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!("fixed bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// `n` particles in `R^d` with their optimizer state.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    n: usize,
    d: usize,
    positions: Vec<f64>,
    iteration: u64,
    adam: Vec<AdamState>,
}

impl ParticleEnsemble {
    /// Particles from a flat row-major `n × d` buffer.
    pub fn from_flat(positions: Vec<f64>, d: usize, step_size: f64) -> Result<Self> {
        if d == 0 || positions.is_empty() || positions.len() % d != 0 {
            return Err(Error::Argument(format!(
                "{} coordinates do not form particles of dimension {d}",
                positions.len()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("initial positions must be finite".into()));
        }
        let n = positions.len() / d;
        Ok(Self {
            n,
            d,
            positions,
            iteration: 0,
            adam: (0..n).map(|_| AdamState::new(d, step_size)).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], step_size: f64) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        for r in rows {
            check_dim(d, r.len())?;
        }
        Self::from_flat(rows.concat(), d, step_size)
    }

    /// I.i.d. `N(mean, std²)` coordinates.
    pub fn gaussian(n: usize, d: usize, mean: f64, std: f64, step_size: f64, rng: &mut RandomStream) -> Result<Self> {
        let positions = (0..n * d).map(|_| mean + std * rng.normal()).collect();
        Self::from_flat(positions, d, step_size)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.positions.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in self.positions.chunks(self.d) {
            m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// `Γ` of every particle.
    pub fn discretize(&self, partition: &EvenPartition) -> Result<Vec<Vec<f64>>> {
        self.positions.chunks(self.d).map(|x| partition.gamma(x)).collect()
    }
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iteration: u64,
    pub bandwidth: f64,
    /// Shannon entropy of the normalized weights.
    pub weight_entropy: f64,
    pub mean_abs_update: f64,
}

fn resolve_bandwidth(ens: &ParticleEnsemble, bw: Bandwidth) -> Result<f64> {
    match bw {
        Bandwidth::Median if ens.n < 2 => Ok(1.0),
        Bandwidth::Median => Ok(median_bandwidth(&ens.positions, ens.d)?.max(BANDWIDTH_FLOOR)),
        Bandwidth::Fixed(h) => Ok(h),
    }
}

/// Scores and log surrogate values at every particle.
fn evaluate_surrogate<S: Surrogate + ?Sized>(ens: &ParticleEnsemble, surrogate: &S) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = ens.d;
    let mut scores = vec![0.0; ens.positions.len()];
    let logs: Vec<f64> = scores
        .par_chunks_mut(d)
        .zip(ens.positions.par_chunks(d))
        .map(|(g, x)| surrogate.log_and_grad(x, g))
        .collect();
    for (i, g) in scores.chunks(d).enumerate() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore { particle: i });
        }
    }
    Ok((logs, scores))
}

/// Normalized importance weights `ρ/p_c` from log values, computed with
/// max-subtraction. Particles with `p_c = 0` get weight 0.
pub fn importance_weights(log_rho: &[f64], log_pc: &[f64]) -> Result<Vec<f64>> {
    check_dim(log_rho.len(), log_pc.len())?;
    let mut lw = Vec::with_capacity(log_rho.len());
    for (i, (&r, &p)) in log_rho.iter().zip(log_pc).enumerate() {
        if p == f64::NEG_INFINITY {
            lw.push(f64::NEG_INFINITY);
        } else if r.is_finite() && p.is_finite() {
            lw.push(r - p);
        } else {
            return Err(Error::NonFiniteScore { particle: i });
        }
    }
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::DegenerateEnsemble);
    }
    let mut w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `γ_j = n / #{k : μ_k ≥ μ_j}`; ties share a weight.
pub fn rank_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Argument("rank weights need at least one value".into()));
    }
    if raw.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("rank weights must not be NaN".into()));
    }
    let n = raw.len();
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(raw
        .iter()
        .map(|&m| {
            let below = sorted.partition_point(|&s| s < m);
            n as f64 / (n - below) as f64
        })
        .collect())
}

/// Rank weights on log ratios, normalized to sum 1; zero-mass particles get 0.
fn normalized_rank_weights(log_rho: &[f64], log_pc: &[f64]) -> Result<Vec<f64>> {
    // Validates finiteness and degeneracy the same way.
    let imp = importance_weights(log_rho, log_pc)?;
    let log_ratio: Vec<f64> = log_rho.iter().zip(log_pc).map(|(r, p)| r - p).collect();
    let mut g = rank_weights(&log_ratio)?;
    for (gi, wi) in g.iter_mut().zip(&imp) {
        if *wi == 0.0 {
            *gi = 0.0;
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    Ok(g)
}

fn weight_entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `φ_i = Σ_j w_j (s_j k(x_j, x_i) + ∇_{x_j} k(x_j, x_i))` with `Σ w = 1`.
///
/// Parallel over `i`; the sum over `j` runs in index order, so results do not
/// depend on the thread count.
pub fn weighted_stein_directions(positions: &[f64], d: usize, scores: &[f64], weights: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; positions.len()];
    out.par_chunks_mut(d).enumerate().for_each(|(i, phi)| {
        let xi = &positions[i * d..(i + 1) * d];
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let xj = &positions[j * d..(j + 1) * d];
            let sq: f64 = xj.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
            let k = (-sq / h).exp();
            let sj = &scores[j * d..(j + 1) * d];
            let c = 2.0 * k / h;
            for t in 0..d {
                phi[t] += w * (k * sj[t] - c * (xj[t] - xi[t]));
            }
        }
    });
    out
}

fn apply_directions(ens: &mut ParticleEnsemble, phi: &[f64], step: f64, rule: UpdateRule) -> Result<f64> {
    let d = ens.d;
    let mut total = 0.0;
    let mut inc = vec![0.0; d];
    for (i, (x, g)) in ens.positions.chunks_mut(d).zip(phi.chunks(d)).enumerate() {
        match rule {
            UpdateRule::Adam => ens.adam[i].update_into(g, &mut inc)?,
            UpdateRule::Plain => inc.iter_mut().zip(g).for_each(|(a, b)| *a = step * b),
        }
        for (xv, iv) in x.iter_mut().zip(&inc) {
            *xv += iv;
            total += iv.abs();
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("particle {i} left the finite range")));
        }
    }
    ens.iteration += 1;
    Ok(total / ens.positions.len() as f64)
}

/// One SVGD step toward the density whose score `surrogate` returns.
pub fn svgd_step<S: Surrogate + ?Sized>(
    ens: &mut ParticleEnsemble,
    score: &S,
    bandwidth: Bandwidth,
    step: f64,
    rule: UpdateRule,
) -> Result<StepStats> {
    let h = resolve_bandwidth(ens, bandwidth)?;
    let (_, scores) = evaluate_surrogate(ens, score)?;
    let w = vec![1.0 / ens.n as f64; ens.n];
    let phi = weighted_stein_directions(&ens.positions, ens.d, &scores, &w, h);
    let mean_abs_update = apply_directions(ens, &phi, step, rule)?;
    Ok(StepStats {
        iteration: ens.iteration,
        bandwidth: h,
        weight_entropy: weight_entropy(&w),
        mean_abs_update,
    })
}

/// One gradient-free SVGD step toward `target` using surrogate `ρ`.
pub fn gf_svgd_step<T, S>(
    ens: &mut ParticleEnsemble,
    target: &T,
    surrogate: &S,
    scheme: WeightScheme,
    bandwidth: Bandwidth,
    step: f64,
    rule: UpdateRule,
) -> Result<StepStats>
where
    T: LogDensity + ?Sized,
    S: Surrogate + ?Sized,
{
    let h = resolve_bandwidth(ens, bandwidth)?;
    let (log_rho, scores) = evaluate_surrogate(ens, surrogate)?;
    let log_pc: Vec<f64> = ens.positions.par_chunks(ens.d).map(|x| target.log_density(x)).collect();
    let w = match scheme {
        WeightScheme::Importance => importance_weights(&log_rho, &log_pc)?,
        WeightScheme::Rank => normalized_rank_weights(&log_rho, &log_pc)?,
    };
    let phi = weighted_stein_directions(&ens.positions, ens.d, &scores, &w, h);
    let mean_abs_update = apply_directions(ens, &phi, step, rule)?;
    Ok(StepStats {
        iteration: ens.iteration,
        bandwidth: h,
        weight_entropy: weight_entropy(&w),
        mean_abs_update,
    })
}

/// Final particles, their discretization and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SamplerOutput {
    pub ensemble: ParticleEnsemble,
    pub samples: Vec<Vec<f64>>,
    pub trace: Vec<StepStats>,
}

/// Runs `config.iterations` gradient-free steps from `ens`.
pub fn run_gf_svgd<T, S>(
    mut ens: ParticleEnsemble,
    target: &T,
    surrogate: &S,
    partition: &EvenPartition,
    config: &SamplerConfig,
) -> Result<SamplerOutput>
where
    T: LogDensity + ?Sized,
    S: Surrogate + ?Sized,
{
    config.validate()?;
    check_dim(partition.dim(), ens.dim())?;
    let mut trace = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        trace.push(gf_svgd_step(
            &mut ens,
            target,
            surrogate,
            config.weights,
            config.bandwidth,
            config.step_size,
            config.update,
        )?);
    }
    let samples = ens.discretize(partition)?;
    Ok(SamplerOutput {
        ensemble: ens,
        samples,
        trace,
    })
}

/// Samples `n` states of `cp`'s model: Gaussian initialization from
/// `config`, then [`run_gf_svgd`].
pub fn sample_model<M: DiscreteModel>(
    cp: &ContinuousParameterization<M>,
    mode: SurrogateMode,
    n: usize,
    config: &SamplerConfig,
) -> Result<SamplerOutput> {
    config.validate()?;
    if n == 0 {
        return Err(Error::Argument("need at least one particle".into()));
    }
    let mut rng = RandomStream::new(config.seed);
    let ens = ParticleEnsemble::gaussian(n, cp.dim(), config.init_mean, config.init_std, config.step_size, &mut rng)?;
    let surrogate = cp.surrogate(mode)?;
    run_gf_svgd(ens, cp, &surrogate, cp.partition(), config)
}

/// Writes `iteration,bandwidth,weight_entropy,mean_abs_update` rows.
pub fn write_trace(path: impl AsRef<Path>, trace: &[StepStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in trace {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one discretized state per row.
pub fn write_samples(path: impl AsRef<Path>, samples: &[Vec<f64>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        let row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_samples`].
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Argument(format!("bad sample value {f:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}
