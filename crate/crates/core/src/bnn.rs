//! Toy binarized networks: a bias-free `input-hidden-classes` MLP with sign
//! weights and sign activations, trained as a GF-SVGD ensemble over latent
//! real weights, plus a straight-through bagging baseline.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::{soft_sign, soft_sign_deriv};
use crate::numkit::{log_sum_exp, median_bandwidth, AdamState, RandomStream};
use crate::sampler::rank_weights;

/// Latent weights are kept strictly inside `(-CLIP, CLIP)`.
pub const CLIP: f64 = 1.0 - 1e-6;

/// `sign` with `sign(0) = +1`.
#[inline]
pub fn hard_sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self> {
        let a = Self { input, hidden, classes };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden == 0 || self.classes < 2 {
            return Err(Error::Argument(format!(
                "architecture {}-{}-{} needs positive widths and at least two classes",
                self.input, self.hidden, self.classes
            )));
        }
        Ok(())
    }

    /// First-layer weights (`hidden × input`, row-major) followed by the
    /// output layer (`classes × hidden`).
    pub fn num_weights(&self) -> usize {
        self.hidden * self.input + self.classes * self.hidden
    }

    fn split(&self) -> usize {
        self.hidden * self.input
    }
}

/// Feature rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        check_dim(features.len(), labels.len())?;
        let Some(first) = features.first() else {
            return Err(Error::Argument("dataset is empty".into()));
        };
        let p = first.len();
        for row in &features {
            check_dim(p, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument("dataset features must be finite".into()));
            }
        }
        Ok(Self { features, labels })
    }

    /// Two Gaussian blobs with unit covariance centred at `±(separation / 2)
    /// · (1, 1) / √2`; class 1 is the positive blob. Labels alternate.
    pub fn two_blobs(n: usize, separation: f64, rng: &mut RandomStream) -> Result<Self> {
        if n < 2 || !separation.is_finite() {
            return Err(Error::Argument("two blobs need n >= 2 and a finite separation".into()));
        }
        let c = 0.5 * separation / std::f64::consts::SQRT_2;
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2;
            let s = if y == 1 { c } else { -c };
            features.push(vec![s + rng.normal(), s + rng.normal()]);
            labels.push(y);
        }
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `size` rows drawn uniformly with replacement.
    pub fn sample_batch(&self, size: usize, rng: &mut RandomStream) -> Self {
        let idx: Vec<usize> = (0..size.max(1)).map(|_| rng.index(self.len())).collect();
        self.subset(&idx)
    }

    /// Bootstrap resample of the full data set.
    pub fn resample(&self, rng: &mut RandomStream) -> Self {
        self.sample_batch(self.len(), rng)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        check_dim(arch.input, self.input_dim())?;
        if let Some(&y) = self.labels.iter().find(|&&y| y >= arch.classes) {
            return Err(Error::Argument(format!(
                "label {y} out of range for {} classes",
                arch.classes
            )));
        }
        Ok(())
    }

    /// CSV without header: feature columns then the label column.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Config(format!("dataset row {}: {what}", line + 1));
            if rec.len() < 2 {
                return Err(bad("needs at least one feature and a label"));
            }
            let x = rec
                .iter()
                .take(rec.len() - 1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("feature is not a number"))?;
            let y = rec[rec.len() - 1]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("label is not a class index"))?;
            features.push(x);
            labels.push(y);
        }
        Self::new(features, labels)
    }
}

fn log_softmax(logits: &mut [f64]) {
    let z = log_sum_exp(logits);
    logits.iter_mut().for_each(|v| *v -= z);
}

/// Result of a smooth forward/backward pass over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPass {
    pub log_probs: Vec<Vec<f64>>,
    /// `Σ_n log p(y_n | x_n)` under the relaxed network.
    pub log_likelihood: f64,
    /// Gradient of `log_likelihood` in the latent weights.
    pub grad: Vec<f64>,
}

/// A binarized MLP described by its latent real weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMlp {
    arch: Architecture,
    weights: Vec<f64>,
}

impl BinaryMlp {
    pub fn new(arch: Architecture, weights: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        check_dim(arch.num_weights(), weights.len())?;
        Ok(Self { arch, weights })
    }

    /// Latent weights uniform on `(-1, 1)`.
    pub fn random(arch: Architecture, rng: &mut RandomStream) -> Result<Self> {
        let w = (0..arch.num_weights()).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        Self::new(arch, w)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Class log-probabilities with sign weights and sign activations.
    pub fn forward_binary(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let Architecture { input, hidden, classes } = self.arch;
        let (w1, w2) = self.weights.split_at(self.arch.split());
        inputs
            .iter()
            .map(|x| {
                check_dim(input, x.len())?;
                let h: Vec<f64> = (0..hidden)
                    .map(|k| {
                        hard_sign(
                            w1[k * input..(k + 1) * input]
                                .iter()
                                .zip(x)
                                .map(|(w, v)| hard_sign(*w) * v)
                                .sum(),
                        )
                    })
                    .collect();
                let mut out: Vec<f64> = (0..classes)
                    .map(|c| {
                        w2[c * hidden..(c + 1) * hidden]
                            .iter()
                            .zip(&h)
                            .map(|(w, v)| hard_sign(*w) * v)
                            .sum()
                    })
                    .collect();
                log_softmax(&mut out);
                Ok(out)
            })
            .collect()
    }

    pub fn binary_log_likelihood(&self, data: &Dataset) -> Result<f64> {
        data.check(&self.arch)?;
        let lp = self.forward_binary(data.features())?;
        Ok(lp.iter().zip(data.labels()).map(|(l, &y)| l[y]).sum())
    }

    /// Relaxed pass with every `sign` replaced by `σ(t) = tanh(t/2)`, and
    /// the exact gradient of the batch log-likelihood.
    pub fn forward_smooth(&self, data: &Dataset) -> Result<SmoothPass> {
        data.check(&self.arch)?;
        let Architecture { input, hidden, classes } = self.arch;
        let (w1, w2) = self.weights.split_at(self.arch.split());
        let u1: Vec<f64> = w1.iter().map(|&w| soft_sign(w)).collect();
        let u2: Vec<f64> = w2.iter().map(|&w| soft_sign(w)).collect();
        let mut g1 = vec![0.0; u1.len()];
        let mut g2 = vec![0.0; u2.len()];
        let mut log_probs = Vec::with_capacity(data.len());
        let mut ll = 0.0;
        let mut dh = vec![0.0; hidden];
        for (x, &y) in data.features().iter().zip(data.labels()) {
            let a: Vec<f64> = (0..hidden)
                .map(|k| u1[k * input..(k + 1) * input].iter().zip(x).map(|(w, v)| w * v).sum())
                .collect();
            let h: Vec<f64> = a.iter().map(|&t| soft_sign(t)).collect();
            let mut lp: Vec<f64> = (0..classes)
                .map(|c| u2[c * hidden..(c + 1) * hidden].iter().zip(&h).map(|(w, v)| w * v).sum())
                .collect();
            log_softmax(&mut lp);
            ll += lp[y];
            dh.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..classes {
                let delta = f64::from(u8::from(c == y)) - lp[c].exp();
                let row = c * hidden..(c + 1) * hidden;
                for ((g, u), (hk, dk)) in g2[row.clone()].iter_mut().zip(&u2[row]).zip(h.iter().zip(dh.iter_mut())) {
                    *g += delta * hk;
                    *dk += delta * u;
                }
            }
            for k in 0..hidden {
                let da = dh[k] * soft_sign_deriv(a[k]);
                for (g, v) in g1[k * input..(k + 1) * input].iter_mut().zip(x) {
                    *g += da * v;
                }
            }
            log_probs.push(lp);
        }
        let grad = g1
            .into_iter()
            .zip(w1)
            .chain(g2.into_iter().zip(w2))
            .map(|(g, &w)| g * soft_sign_deriv(w))
            .collect();
        Ok(SmoothPass {
            log_probs,
            log_likelihood: ll,
            grad,
        })
    }

    /// Log-likelihood gradient with straight-through sign derivatives
    /// (`1` on `[-1, 1]`, `0` outside).
    pub fn straight_through_grad(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.check(&self.arch)?;
        let Architecture { input, hidden, classes } = self.arch;
        let (w1, w2) = self.weights.split_at(self.arch.split());
        let ste = |t: f64| f64::from(u8::from(t.abs() <= 1.0));
        let s1: Vec<f64> = w1.iter().map(|&w| hard_sign(w)).collect();
        let s2: Vec<f64> = w2.iter().map(|&w| hard_sign(w)).collect();
        let mut grad = vec![0.0; self.weights.len()];
        let (g1, g2) = grad.split_at_mut(s1.len());
        let mut dh = vec![0.0; hidden];
        for (x, &y) in data.features().iter().zip(data.labels()) {
            let a: Vec<f64> = (0..hidden)
                .map(|k| s1[k * input..(k + 1) * input].iter().zip(x).map(|(w, v)| w * v).sum())
                .collect();
            let h: Vec<f64> = a.iter().map(|&t| hard_sign(t)).collect();
            let mut lp: Vec<f64> = (0..classes)
                .map(|c| s2[c * hidden..(c + 1) * hidden].iter().zip(&h).map(|(w, v)| w * v).sum())
                .collect();
            log_softmax(&mut lp);
            dh.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..classes {
                let delta = f64::from(u8::from(c == y)) - lp[c].exp();
                for k in 0..hidden {
                    g2[c * hidden + k] += delta * h[k];
                    dh[k] += delta * s2[c * hidden + k];
                }
            }
            for k in 0..hidden {
                let da = dh[k] * ste(a[k]);
                for (g, v) in g1[k * input..(k + 1) * input].iter_mut().zip(x) {
                    *g += da * v;
                }
            }
        }
        for (g, &w) in grad.iter_mut().zip(&self.weights) {
            *g *= ste(w);
        }
        Ok(grad)
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        data.check(&self.arch)?;
        let lp = self.forward_binary(data.features())?;
        Ok(accuracy_of(&lp, data.labels()))
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn accuracy_of(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let hits = scores.iter().zip(labels).filter(|(s, &y)| argmax(s) == y).count();
    hits as f64 / labels.len() as f64
}

/// Members sharing one architecture; predictions average member softmax outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnEnsemble {
    pub architecture: Architecture,
    pub members: Vec<Vec<f64>>,
}

impl BnnEnsemble {
    pub fn new(architecture: Architecture, members: Vec<Vec<f64>>) -> Result<Self> {
        architecture.validate()?;
        if members.is_empty() {
            return Err(Error::Argument("ensemble needs at least one member".into()));
        }
        for m in &members {
            check_dim(architecture.num_weights(), m.len())?;
        }
        Ok(Self { architecture, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> BinaryMlp {
        BinaryMlp {
            arch: self.architecture,
            weights: self.members[i].clone(),
        }
    }

    /// Mean of member class probabilities for each input.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let per: Vec<Vec<Vec<f64>>> = (0..self.len())
            .map(|i| self.member(i).forward_binary(inputs))
            .collect::<Result<_>>()?;
        Ok((0..inputs.len())
            .map(|r| {
                let mut p = vec![0.0; self.architecture.classes];
                for m in &per {
                    p.iter_mut().zip(&m[r]).for_each(|(a, l)| *a += l.exp());
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                p
            })
            .collect())
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        data.check(&self.architecture)?;
        Ok(accuracy_of(&self.predict(data.features())?, data.labels()))
    }

    pub fn member_accuracies(&self, data: &Dataset) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.member(i).accuracy(data)).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let e: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(e.architecture, e.members)
    }
}

/// Mean member class probabilities; see [`BnnEnsemble::predict`].
pub fn ensemble_predict(ensemble: &BnnEnsemble, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    ensemble.predict(inputs)
}

/// Training schedule shared by the ensemble and the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnnTrainConfig {
    pub members: usize,
    pub hidden: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub step_size: f64,
}

impl Default for BnnTrainConfig {
    fn default() -> Self {
        Self {
            members: 4,
            hidden: 8,
            steps: 300,
            batch_size: 50,
            step_size: 0.05,
        }
    }
}

impl BnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 || self.hidden == 0 || self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "bnn members, hidden, steps and batch_size must be positive".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "bnn step_size must be positive, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// GF-SVGD ensemble over latent weights with rank weights and Adam.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    ensemble: BnnEnsemble,
    adam: Vec<AdamState>,
    steps: u64,
}

impl EnsembleState {
    pub fn new(ensemble: BnnEnsemble, step_size: f64) -> Self {
        let d = ensemble.architecture.num_weights();
        let adam = (0..ensemble.len()).map(|_| AdamState::new(d, step_size)).collect();
        Self {
            ensemble,
            adam,
            steps: 0,
        }
    }

    /// `n` members with latent weights uniform on `(-1, 1)`.
    pub fn random(arch: Architecture, n: usize, step_size: f64, rng: &mut RandomStream) -> Result<Self> {
        let members = (0..n)
            .map(|_| BinaryMlp::random(arch, rng).map(|m| m.weights))
            .collect::<Result<_>>()?;
        Ok(Self::new(BnnEnsemble::new(arch, members)?, step_size))
    }

    pub fn ensemble(&self) -> &BnnEnsemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> BnnEnsemble {
        self.ensemble
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update with batch `i` driving member `i`.
    ///
    /// For member `i`, every member `j` is scored on batch `i`: the surrogate
    /// score is the relaxed log-likelihood gradient plus the Gaussian base
    /// term `-w_j`, and the raw ratio is `μ_j = exp(smooth - binary)`
    /// log-likelihood (the base density cancels). Rank weights of `μ`
    /// normalized to sum 1 weight the Stein direction. Latent weights are
    /// clipped to `(-1, 1)` after the Adam increment.
    pub fn step(&mut self, batches: &[Dataset]) -> Result<()> {
        let n = self.ensemble.len();
        check_dim(n, batches.len())?;
        let arch = self.ensemble.architecture;
        let d = arch.num_weights();
        let flat: Vec<f64> = self.ensemble.members.concat();
        let h = median_bandwidth(&flat, d)?;
        let members: Vec<BinaryMlp> = (0..n).map(|j| self.ensemble.member(j)).collect();
        let phis: Vec<Vec<f64>> = batches
            .par_iter()
            .enumerate()
            .map(|(i, batch)| -> Result<Vec<f64>> {
                let mut log_mu = Vec::with_capacity(n);
                let mut scores = Vec::with_capacity(n);
                for m in &members {
                    let pass = m.forward_smooth(batch)?;
                    log_mu.push(pass.log_likelihood - m.binary_log_likelihood(batch)?);
                    let s: Vec<f64> = pass.grad.iter().zip(m.weights()).map(|(g, w)| g - w).collect();
                    scores.push(s);
                }
                let mut gamma = rank_weights(&log_mu)?;
                let total: f64 = gamma.iter().sum();
                gamma.iter_mut().for_each(|g| *g /= total);
                let wi = members[i].weights();
                let mut phi = vec![0.0; d];
                for ((m, s), g) in members.iter().zip(&scores).zip(&gamma) {
                    let wj = m.weights();
                    let sq: f64 = wj.iter().zip(wi).map(|(a, b)| (a - b) * (a - b)).sum();
                    let k = (-sq / h).exp();
                    let c = 2.0 * k / h;
                    for t in 0..d {
                        phi[t] += g * (k * s[t] - c * (wj[t] - wi[t]));
                    }
                }
                Ok(phi)
            })
            .collect::<Result<_>>()?;
        let mut inc = vec![0.0; d];
        for ((w, adam), phi) in self.ensemble.members.iter_mut().zip(&mut self.adam).zip(&phis) {
            adam.update_into(phi, &mut inc)?;
            for (x, v) in w.iter_mut().zip(&inc) {
                *x = (*x + v).clamp(-CLIP, CLIP);
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("latent weight left the finite range".into()));
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Trains a GF-SVGD ensemble; member `i` draws its batches from child
/// stream `i`. `observe` is called after every step.
pub fn train_gf_svgd_with(
    data: &Dataset,
    config: &BnnTrainConfig,
    seed: u64,
    mut observe: impl FnMut(&EnsembleState),
) -> Result<EnsembleState> {
    config.validate()?;
    let arch = Architecture::new(
        data.input_dim(),
        config.hidden,
        data.labels().iter().max().map_or(2, |m| (m + 1).max(2)),
    )?;
    data.check(&arch)?;
    let root = RandomStream::new(seed);
    let mut init = root.child(0);
    let mut state = EnsembleState::random(arch, config.members, config.step_size, &mut init)?;
    let mut streams: Vec<RandomStream> = (0..config.members).map(|i| root.child(1 + i as u64)).collect();
    for _ in 0..config.steps {
        let batches: Vec<Dataset> = streams.iter_mut().map(|r| data.sample_batch(config.batch_size, r)).collect();
        state.step(&batches)?;
        observe(&state);
    }
    Ok(state)
}

pub fn train_gf_svgd(data: &Dataset, config: &BnnTrainConfig, seed: u64) -> Result<EnsembleState> {
    train_gf_svgd_with(data, config, seed, |_| {})
}

/// One network trained with straight-through gradients, Adam and `[-1, 1]`
/// clipping.
pub fn train_straight_through(data: &Dataset, config: &BnnTrainConfig, rng: &mut RandomStream) -> Result<BinaryMlp> {
    config.validate()?;
    let arch = Architecture::new(
        data.input_dim(),
        config.hidden,
        data.labels().iter().max().map_or(2, |m| (m + 1).max(2)),
    )?;
    data.check(&arch)?;
    let mut net = BinaryMlp::random(arch, rng)?;
    let mut adam = AdamState::new(arch.num_weights(), config.step_size);
    let mut inc = vec![0.0; arch.num_weights()];
    for _ in 0..config.steps {
        let batch = data.sample_batch(config.batch_size, rng);
        let g = net.straight_through_grad(&batch)?;
        adam.update_into(&g, &mut inc)?;
        for (w, v) in net.weights.iter_mut().zip(&inc) {
            *w = (*w + v).clamp(-1.0, 1.0);
        }
    }
    Ok(net)
}

/// `config.members` straight-through networks, each on its own bootstrap
/// resample; member `i` uses child stream `i` of `seed`.
pub fn bagging_baseline(data: &Dataset, config: &BnnTrainConfig, seed: u64) -> Result<BnnEnsemble> {
    config.validate()?;
    let root = RandomStream::new(seed);
    let nets: Vec<BinaryMlp> = (0..config.members)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i as u64);
            let boot = data.resample(&mut rng);
            train_straight_through(&boot, config, &mut rng)
        })
        .collect::<Result<_>>()?;
    let arch = nets[0].arch;
    BnnEnsemble::new(arch, nets.into_iter().map(|n| n.weights).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (BinaryMlp, Dataset) {
        let mut rng = RandomStream::new(4);
        let arch = Architecture::new(2, 4, 2).unwrap();
        let w = (0..arch.num_weights()).map(|_| 1.5 * rng.normal()).collect();
        let net = BinaryMlp::new(arch, w).unwrap();
        let data = Dataset::two_blobs(6, 2.0, &mut rng).unwrap();
        (net, data)
    }

    #[test]
    fn zero_input_gives_uniform_classes() {
        let (net, _) = tiny();
        let lp = net.forward_binary(&[vec![0.0, 0.0]]).unwrap();
        // sign(0) = +1 makes every hidden unit +1; the output is then the
        // column sum of sign weights, which need not be equal across classes,
        // so use an output layer with matching signs.
        let mut w = net.weights().to_vec();
        let split = net.architecture().split();
        for v in &mut w[split..] {
            *v = 0.3;
        }
        let net = BinaryMlp::new(net.architecture(), w).unwrap();
        let lp2 = net.forward_binary(&[vec![0.0, 0.0]]).unwrap();
        assert!((lp2[0][0] - lp2[0][1]).abs() < 1e-15);
        let total: f64 = lp[0].iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_output_ignores_magnitude() {
        let (net, data) = tiny();
        let scaled = BinaryMlp::new(net.architecture(), net.weights().iter().map(|w| w * 7.3).collect()).unwrap();
        assert_eq!(
            net.forward_binary(data.features()).unwrap(),
            scaled.forward_binary(data.features()).unwrap()
        );
    }

    #[test]
    fn smooth_gradient_matches_finite_differences() {
        let (net, data) = tiny();
        let pass = net.forward_smooth(&data).unwrap();
        for t in 0..net.weights().len() {
            let eps = 1e-5;
            let mut wp = net.weights().to_vec();
            let mut wm = wp.clone();
            wp[t] += eps;
            wm[t] -= eps;
            let lp = BinaryMlp::new(net.architecture(), wp)
                .unwrap()
                .forward_smooth(&data)
                .unwrap()
                .log_likelihood;
            let lm = BinaryMlp::new(net.architecture(), wm)
                .unwrap()
                .forward_smooth(&data)
                .unwrap()
                .log_likelihood;
            let fd = (lp - lm) / (2.0 * eps);
            let g = pass.grad[t];
            assert!((fd - g).abs() <= 1e-4 * g.abs().max(1e-3), "weight {t}: fd {fd} analytic {g}");
        }
    }

    #[test]
    fn saturated_smooth_matches_binary() {
        let (net, _) = tiny();
        let w: Vec<f64> = net.weights().iter().map(|v| 40.0 * hard_sign(*v)).collect();
        let net = BinaryMlp::new(net.architecture(), w).unwrap();
        // Large inputs saturate the activations as well.
        let data = Dataset::new(vec![vec![50.0, 90.0], vec![-80.0, 45.0]], vec![0, 1]).unwrap();
        let b = net.forward_binary(data.features()).unwrap();
        let s = net.forward_smooth(&data).unwrap().log_probs;
        for (x, y) in b.iter().flatten().zip(s.iter().flatten()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn batch_of_one_equals_per_example() {
        let (net, data) = tiny();
        let full = net.forward_smooth(&data).unwrap();
        let mut ll = 0.0;
        for i in 0..data.len() {
            let one = net.forward_smooth(&data.subset(&[i])).unwrap();
            assert_eq!(one.log_probs[0], full.log_probs[i]);
            ll += one.log_likelihood;
        }
        assert!((ll - full.log_likelihood).abs() < 1e-12);
    }

    #[test]
    fn identical_members_move_identically() {
        let (net, data) = tiny();
        let w: Vec<f64> = net.weights().iter().map(|v| v.clamp(-0.9, 0.9)).collect();
        let e = BnnEnsemble::new(net.architecture(), vec![w.clone(), w]).unwrap();
        let mut s = EnsembleState::new(e, 0.01);
        s.step(&[data.clone(), data]).unwrap();
        assert_eq!(s.ensemble().members[0], s.ensemble().members[1]);
    }

    #[test]
    fn single_member_ensemble_matches_member() {
        let (net, data) = tiny();
        let e = BnnEnsemble::new(net.architecture(), vec![net.weights().to_vec()]).unwrap();
        let p = e.predict(data.features()).unwrap();
        let q = net.forward_binary(data.features()).unwrap();
        for (a, b) in p.iter().flatten().zip(q.iter().flatten()) {
            assert!((a - b.exp()).abs() < 1e-12);
        }
        let twin = BnnEnsemble::new(net.architecture(), vec![net.weights().to_vec(); 3]).unwrap();
        for (a, b) in twin
            .predict(data.features())
            .unwrap()
            .iter()
            .flatten()
            .zip(p.iter().flatten())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_errors() {
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]).is_err());
        let d = Dataset::new(vec![vec![1.0, 2.0]], vec![3]).unwrap();
        let (net, _) = tiny();
        assert!(net.accuracy(&d).is_err());
    }
}
