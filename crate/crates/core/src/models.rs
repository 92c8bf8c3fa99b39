//! Discrete target models: a 1-D categorical distribution, the grid Ising
//! model and the Bernoulli RBM (visible marginal through its free energy).
//!
//! Spins are encoded as `i8` values in `{-1, +1}`. The generic
//! [`DiscreteModel`] interface works on per-dimension cell indices instead,
//! with cell 0 standing for spin `-1` and cell 1 for `+1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numkit::{log_sum_exp, logistic, softplus, RandomStream};

/// Largest state space that [`enumerate_log_mass`] will tabulate.
pub const MAX_ENUMERATION: usize = 1 << 20;

/// A distribution over a finite product space, known up to normalization.
pub trait DiscreteModel: Send + Sync {
    fn dim(&self) -> usize;

    /// State labels of dimension `dim`, strictly increasing.
    fn labels(&self, dim: usize) -> &[f64];

    /// Unnormalized log mass of the state whose dimension `j` sits in cell
    /// `cells[j]`. Zero-mass states return `-inf`.
    fn log_mass_cells(&self, cells: &[usize]) -> f64;

    /// Smooth relaxation `log p~(sigma(x))` and its gradient in `x`, for
    /// binary models whose states are the signs of `x`.
    fn smooth_log_density(&self, _x: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }

    fn has_smooth_relaxation(&self) -> bool {
        false
    }

    fn num_states(&self, dim: usize) -> usize {
        self.labels(dim).len()
    }
}

pub(crate) const SPIN_LABELS: [f64; 2] = [-1.0, 1.0];

/// Sign relaxation `2 / (1 + exp(-t)) - 1`, equal to `tanh(t / 2)`.
#[inline]
pub fn soft_sign(t: f64) -> f64 {
    (0.5 * t).tanh()
}

/// Derivative of [`soft_sign`].
#[inline]
pub fn soft_sign_deriv(t: f64) -> f64 {
    let s = soft_sign(t);
    0.5 * (1.0 - s * s)
}

pub fn validate_spins(z: &[i8]) -> Result<()> {
    match z.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::Argument(format!("spin {i} is {}, expected -1 or +1", z[i]))),
        None => Ok(()),
    }
}

/// Converts real labels to spins, rejecting anything other than exactly `±1`.
pub fn spins_from_labels(labels: &[f64]) -> Result<Vec<i8>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 1.0 {
                Ok(1)
            } else if v == -1.0 {
                Ok(-1)
            } else {
                Err(Error::Argument(format!("label {i} is {v}, expected -1 or +1")))
            }
        })
        .collect()
}

#[inline]
pub(crate) fn spin_of_cell(c: usize) -> f64 {
    if c == 0 {
        -1.0
    } else {
        1.0
    }
}

/// One-dimensional categorical distribution over real-valued states.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalModel {
    states: Vec<f64>,
    log_weights: Vec<f64>,
}

impl CategoricalModel {
    /// Builds the model from nonnegative (possibly unnormalized) weights.
    pub fn new(states: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Argument("categorical weights must be finite and nonnegative".into()));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self::from_log_weights(states, log_weights)
    }

    pub fn from_log_weights(states: Vec<f64>, log_weights: Vec<f64>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Argument(format!(
                "categorical model needs at least 2 states, got {}",
                states.len()
            )));
        }
        check_dim(states.len(), log_weights.len())?;
        if states.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("categorical states must be strictly increasing".into()));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::Argument("categorical log-weights must not be NaN or +inf".into()));
        }
        if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
            return Err(Error::Argument("categorical model has no positive mass".into()));
        }
        Ok(Self { states, log_weights })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let lz = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - lz).exp()).collect()
    }

    /// Same model with every weight multiplied by `exp(shift)`.
    pub fn rescaled(&self, shift: f64) -> Self {
        Self {
            states: self.states.clone(),
            log_weights: self.log_weights.iter().map(|w| w + shift).collect(),
        }
    }
}

impl DiscreteModel for CategoricalModel {
    fn dim(&self) -> usize {
        1
    }

    fn labels(&self, _dim: usize) -> &[f64] {
        &self.states
    }

    fn log_mass_cells(&self, cells: &[usize]) -> f64 {
        self.log_weights[cells[0]]
    }
}

/// Pairwise binary model `p(z) ∝ exp(Σ_(i,j) σ_ij z_i z_j)` on a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    rows: usize,
    cols: usize,
    edges: Vec<(usize, usize, f64)>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl IsingModel {
    /// Non-periodic 4-nearest-neighbour grid with uniform coupling.
    pub fn grid(rows: usize, cols: usize, coupling: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Argument("grid must have at least one row and column".into()));
        }
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1, coupling));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols, coupling));
                }
            }
        }
        Self::with_edges(rows, cols, edges)
    }

    /// Arbitrary edge list over `rows * cols` sites.
    pub fn with_edges(rows: usize, cols: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let d = rows * cols;
        if d == 0 {
            return Err(Error::Argument("Ising model needs at least one site".into()));
        }
        let mut neighbors = vec![Vec::new(); d];
        let mut seen = std::collections::HashSet::new();
        for &(i, j, s) in &edges {
            if i >= d || j >= d {
                return Err(Error::Argument(format!("edge ({i}, {j}) outside [0, {d})")));
            }
            if i == j {
                return Err(Error::Argument(format!("self-loop at site {i}")));
            }
            if !s.is_finite() {
                return Err(Error::Argument(format!("edge ({i}, {j}) has non-finite coupling")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::Argument(format!("duplicate edge ({i}, {j})")));
            }
            neighbors[i].push((j, s));
            neighbors[j].push((i, s));
        }
        Ok(Self {
            rows,
            cols,
            edges,
            neighbors,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Same graph with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let edges = self.edges.iter().map(|&(i, j, s)| (i, j, s * factor)).collect();
        Self::with_edges(self.rows, self.cols, edges).expect("scaling keeps a valid graph")
    }

    /// `Σ_(i,j) σ_ij z_i z_j`, the log of the unnormalized mass.
    pub fn log_mass(&self, z: &[i8]) -> Result<f64> {
        check_dim(self.num_sites(), z.len())?;
        validate_spins(z)?;
        Ok(self
            .edges
            .iter()
            .map(|&(i, j, s)| s * f64::from(z[i]) * f64::from(z[j]))
            .sum())
    }

    /// `Σ σ_ij s(x_i) s(x_j)` with `s` the sign relaxation, plus its gradient.
    pub fn smooth_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.num_sites(), x.len())?;
        Ok(self.smooth_unchecked(x))
    }

    fn smooth_unchecked(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s: Vec<f64> = x.iter().map(|&t| soft_sign(t)).collect();
        let value = self.edges.iter().map(|&(i, j, c)| c * s[i] * s[j]).sum();
        let grad = x
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let field: f64 = self.neighbors[i].iter().map(|&(j, c)| c * s[j]).sum();
                field * soft_sign_deriv(t)
            })
            .collect();
        (value, grad)
    }

    /// `Σ_j σ_site,j z_j` over the neighbours of `site`.
    pub fn local_field(&self, z: &[i8], site: usize) -> f64 {
        self.neighbors[site].iter().map(|&(j, s)| s * f64::from(z[j])).sum()
    }

    /// `P(z_site = +1 | rest) = logistic(2 Σ_j σ_site,j z_j)`.
    pub fn conditional(&self, z: &[i8], site: usize) -> Result<f64> {
        check_dim(self.num_sites(), z.len())?;
        if site >= self.num_sites() {
            return Err(Error::Argument(format!(
                "site {site} out of range for {} sites",
                self.num_sites()
            )));
        }
        validate_spins(z)?;
        Ok(logistic(2.0 * self.local_field(z, site)))
    }
}

impl DiscreteModel for IsingModel {
    fn dim(&self) -> usize {
        self.num_sites()
    }

    fn labels(&self, _dim: usize) -> &[f64] {
        &SPIN_LABELS
    }

    fn log_mass_cells(&self, cells: &[usize]) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j, s)| s * spin_of_cell(cells[i]) * spin_of_cell(cells[j]))
            .sum()
    }

    fn smooth_log_density(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some(self.smooth_unchecked(x))
    }

    fn has_smooth_relaxation(&self) -> bool {
        true
    }
}

/// Bernoulli RBM with `±1` visible units and energy
/// `E(z, h) = -(zᵀWh + zᵀb + hᵀc)`.
///
/// Hidden units are encoded as bits `h ∈ {0, 1}^M`, the encoding under which
/// summing out `h` yields the softplus free energy.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliRbm {
    visible: usize,
    hidden: usize,
    /// Row-major `visible × hidden`.
    weight: Vec<f64>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
}

impl BernoulliRbm {
    pub fn new(weight: Vec<Vec<f64>>, visible_bias: Vec<f64>, hidden_bias: Vec<f64>) -> Result<Self> {
        let visible = weight.len();
        if visible == 0 {
            return Err(Error::Argument("RBM needs at least one visible unit".into()));
        }
        let hidden = weight[0].len();
        if hidden == 0 {
            return Err(Error::Argument("RBM needs at least one hidden unit".into()));
        }
        for row in &weight {
            check_dim(hidden, row.len())?;
        }
        check_dim(visible, visible_bias.len())?;
        check_dim(hidden, hidden_bias.len())?;
        let weight: Vec<f64> = weight.into_iter().flatten().collect();
        if weight.iter().chain(&visible_bias).chain(&hidden_bias).any(|v| !v.is_finite()) {
            return Err(Error::Argument("RBM parameters must be finite".into()));
        }
        Ok(Self {
            visible,
            hidden,
            weight,
            visible_bias,
            hidden_bias,
        })
    }

    /// Random RBM with `W ~ N(0, weight_std²)` and biases `~ N(0, bias_std²)`.
    pub fn random(visible: usize, hidden: usize, weight_std: f64, bias_std: f64, rng: &mut RandomStream) -> Result<Self> {
        let weight = (0..visible)
            .map(|_| (0..hidden).map(|_| weight_std * rng.normal()).collect())
            .collect();
        let b = (0..visible).map(|_| bias_std * rng.normal()).collect();
        let c = (0..hidden).map(|_| bias_std * rng.normal()).collect();
        Self::new(weight, b, c)
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.weight[i * self.hidden + k]
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weight.chunks(self.hidden).map(<[f64]>::to_vec).collect()
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    /// Hidden activations `W_·kᵀ v + c_k` for a real visible vector.
    fn hidden_activations(&self, v: &[f64]) -> Vec<f64> {
        let mut act = self.hidden_bias.clone();
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.weight[i * self.hidden..(i + 1) * self.hidden];
            for (a, w) in act.iter_mut().zip(row) {
                *a += w * vi;
            }
        }
        act
    }

    fn free_energy_real(&self, v: &[f64]) -> f64 {
        let lin: f64 = v.iter().zip(&self.visible_bias).map(|(a, b)| a * b).sum();
        lin + self.hidden_activations(v).into_iter().map(softplus).sum::<f64>()
    }

    /// Visible log mass `zᵀb + Σ_k log(1 + exp(W_·kᵀz + c_k))`.
    pub fn free_energy_log_mass(&self, z: &[i8]) -> Result<f64> {
        check_dim(self.visible, z.len())?;
        validate_spins(z)?;
        let v: Vec<f64> = z.iter().map(|&s| f64::from(s)).collect();
        Ok(self.free_energy_real(&v))
    }

    /// Smooth relaxation of [`BernoulliRbm::free_energy_log_mass`] with `z`
    /// replaced by the sign relaxation of `x`, and its gradient in `x`.
    pub fn smooth_log_density(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.visible, x.len())?;
        Ok(self.smooth_unchecked(x))
    }

    fn smooth_unchecked(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let s: Vec<f64> = x.iter().map(|&t| soft_sign(t)).collect();
        let act = self.hidden_activations(&s);
        let value =
            s.iter().zip(&self.visible_bias).map(|(a, b)| a * b).sum::<f64>() + act.iter().map(|&a| softplus(a)).sum::<f64>();
        let sig: Vec<f64> = act.iter().map(|&a| logistic(a)).collect();
        let grad = x
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let row = &self.weight[i * self.hidden..(i + 1) * self.hidden];
                let ds = self.visible_bias[i] + row.iter().zip(&sig).map(|(w, g)| w * g).sum::<f64>();
                ds * soft_sign_deriv(t)
            })
            .collect();
        (value, grad)
    }

    /// `zᵀWh + zᵀb + hᵀc` for visible spins `z` and hidden bits `h ∈ {0, 1}^M`.
    ///
    /// Summing `exp` of this over `h` gives exactly the free-energy mass.
    pub fn joint_log_mass(&self, z: &[i8], h: &[u8]) -> Result<f64> {
        check_dim(self.visible, z.len())?;
        check_dim(self.hidden, h.len())?;
        validate_spins(z)?;
        validate_bits(h)?;
        let mut total = 0.0;
        for (i, &zi) in z.iter().enumerate() {
            let zi = f64::from(zi);
            total += zi * self.visible_bias[i];
            for (k, &hk) in h.iter().enumerate() {
                total += zi * self.weight(i, k) * f64::from(hk);
            }
        }
        total += h.iter().zip(&self.hidden_bias).map(|(&hk, c)| f64::from(hk) * c).sum::<f64>();
        Ok(total)
    }

    /// `P(h_k = 1 | z) = logistic(W_·kᵀz + c_k)`.
    pub fn hidden_conditionals(&self, z: &[i8]) -> Result<Vec<f64>> {
        check_dim(self.visible, z.len())?;
        validate_spins(z)?;
        let v: Vec<f64> = z.iter().map(|&s| f64::from(s)).collect();
        Ok(self.hidden_activations(&v).into_iter().map(logistic).collect())
    }

    /// `P(z_i = +1 | h) = logistic(2 (W_i·h + b_i))`.
    pub fn visible_conditionals(&self, h: &[u8]) -> Result<Vec<f64>> {
        check_dim(self.hidden, h.len())?;
        validate_bits(h)?;
        Ok((0..self.visible)
            .map(|i| {
                let row = &self.weight[i * self.hidden..(i + 1) * self.hidden];
                let a = self.visible_bias[i] + row.iter().zip(h).map(|(w, &hk)| w * f64::from(hk)).sum::<f64>();
                logistic(2.0 * a)
            })
            .collect())
    }
}

fn validate_bits(h: &[u8]) -> Result<()> {
    match h.iter().position(|&b| b > 1) {
        Some(k) => Err(Error::Argument(format!("hidden unit {k} is {}, expected 0 or 1", h[k]))),
        None => Ok(()),
    }
}

impl DiscreteModel for BernoulliRbm {
    fn dim(&self) -> usize {
        self.visible
    }

    fn labels(&self, _dim: usize) -> &[f64] {
        &SPIN_LABELS
    }

    fn log_mass_cells(&self, cells: &[usize]) -> f64 {
        let v: Vec<f64> = cells.iter().map(|&c| spin_of_cell(c)).collect();
        self.free_energy_real(&v)
    }

    fn smooth_log_density(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some(self.smooth_unchecked(x))
    }

    fn has_smooth_relaxation(&self) -> bool {
        true
    }
}

/// Exhaustive, normalized probability table of a small model.
///
/// States are indexed in mixed-radix counting order with dimension 0 as the
/// least significant digit; for binary models cell 0 (`-1`) is bit 0.
#[derive(Debug, Clone)]
pub struct EnumerationTable {
    radices: Vec<usize>,
    labels: Vec<Vec<f64>>,
    log_mass: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EnumerationTable {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.radices.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_masses(&self) -> &[f64] {
        &self.log_mass
    }

    pub fn cells(&self, index: usize) -> Vec<usize> {
        let mut rem = index;
        self.radices
            .iter()
            .map(|&k| {
                let c = rem % k;
                rem /= k;
                c
            })
            .collect()
    }

    pub fn index_of(&self, cells: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (c, k) in cells.iter().zip(&self.radices) {
            idx += c * stride;
            stride *= k;
        }
        idx
    }

    pub fn labels_of(&self, index: usize) -> Vec<f64> {
        self.cells(index)
            .into_iter()
            .enumerate()
            .map(|(j, c)| self.labels[j][c])
            .collect()
    }

    /// `(labels, probability)` pairs in table order.
    pub fn entries(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.len()).map(|i| (self.labels_of(i), self.probs[i])).collect()
    }

    /// Exact expectation of each coordinate's label.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim()];
        for (i, &p) in self.probs.iter().enumerate() {
            for (m, v) in mean.iter_mut().zip(self.labels_of(i)) {
                *m += p * v;
            }
        }
        mean
    }

    /// Draws a state index by inverse CDF on the cumulative table.
    pub fn sample_index(&self, rng: &mut RandomStream) -> usize {
        let u = rng.uniform() * self.cumulative[self.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        let idx = idx.min(self.len() - 1);
        // Skip zero-mass states that share a cumulative value with their successor.
        if self.probs[idx] == 0.0 {
            return (idx..self.len())
                .find(|&i| self.probs[i] > 0.0)
                .or_else(|| (0..idx).rev().find(|&i| self.probs[i] > 0.0))
                .expect("table has positive mass");
        }
        idx
    }
}

/// Tabulates every state of `model` with its normalized probability.
pub fn enumerate_log_mass(model: &dyn DiscreteModel) -> Result<EnumerationTable> {
    let radices: Vec<usize> = (0..model.dim()).map(|j| model.num_states(j)).collect();
    let total = radices.iter().map(|&k| k as f64).product::<f64>();
    if total > MAX_ENUMERATION as f64 {
        return Err(Error::Capacity {
            states: total,
            limit: MAX_ENUMERATION,
        });
    }
    let total = total as usize;
    let labels = (0..model.dim()).map(|j| model.labels(j).to_vec()).collect();
    let mut cells = vec![0usize; radices.len()];
    let mut log_mass = Vec::with_capacity(total);
    for _ in 0..total {
        log_mass.push(model.log_mass_cells(&cells));
        for (c, &k) in cells.iter_mut().zip(&radices) {
            *c += 1;
            if *c < k {
                break;
            }
            *c = 0;
        }
    }
    let lz = log_sum_exp(&log_mass);
    if !lz.is_finite() {
        return Err(Error::Numeric("model has no finite positive mass".into()));
    }
    let probs: Vec<f64> = log_mass.iter().map(|l| (l - lz).exp()).collect();
    let mut acc = 0.0;
    let cumulative = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(EnumerationTable {
        radices,
        labels,
        log_mass,
        probs,
        cumulative,
    })
}

/// Model parameter file contents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Grid Ising model. `edges` entries `[i, j, coupling]` override the
    /// coupling of existing grid edges.
    Ising {
        rows: usize,
        cols: usize,
        #[serde(default)]
        coupling: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<Vec<(usize, usize, f64)>>,
    },
    Rbm {
        #[serde(rename = "W")]
        weight: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    },
    Categorical {
        states: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Ising {
                rows,
                cols,
                coupling,
                edges,
            } => {
                let grid = IsingModel::grid(*rows, *cols, *coupling)?;
                let Some(overrides) = edges else {
                    return Ok(Model::Ising(grid));
                };
                let mut list = grid.edges().to_vec();
                for &(i, j, s) in overrides {
                    let key = (i.min(j), i.max(j));
                    let slot = list
                        .iter_mut()
                        .find(|(a, b, _)| (*a.min(b), *a.max(b)) == key)
                        .ok_or_else(|| Error::Argument(format!("edge ({i}, {j}) is not a grid edge")))?;
                    slot.2 = s;
                }
                Ok(Model::Ising(IsingModel::with_edges(*rows, *cols, list)?))
            }
            ModelSpec::Rbm { weight, b, c } => Ok(Model::Rbm(BernoulliRbm::new(weight.clone(), b.clone(), c.clone())?)),
            ModelSpec::Categorical { states, probs } => {
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Argument(format!("categorical probabilities sum to {sum}, expected 1")));
                }
                Ok(Model::Categorical(CategoricalModel::new(states.clone(), probs.clone())?))
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let text = std::fs::read_to_string(path)?;
        let spec: ModelSpec = serde_json::from_str(&text)?;
        spec.build()
    }
}

/// Any of the bundled models.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Categorical(CategoricalModel),
    Ising(IsingModel),
    Rbm(BernoulliRbm),
}

impl Model {
    pub fn to_spec(&self) -> ModelSpec {
        match self {
            Model::Categorical(m) => ModelSpec::Categorical {
                states: m.states().to_vec(),
                probs: m.probabilities(),
            },
            Model::Ising(m) => ModelSpec::Ising {
                rows: m.rows(),
                cols: m.cols(),
                coupling: 0.0,
                edges: Some(m.edges().to_vec()),
            },
            Model::Rbm(m) => ModelSpec::Rbm {
                weight: m.weight_rows(),
                b: m.visible_bias().to_vec(),
                c: m.hidden_bias().to_vec(),
            },
        }
    }

    pub fn is_binary(&self) -> bool {
        !matches!(self, Model::Categorical(_))
    }

    fn inner(&self) -> &dyn DiscreteModel {
        match self {
            Model::Categorical(m) => m,
            Model::Ising(m) => m,
            Model::Rbm(m) => m,
        }
    }
}

impl DiscreteModel for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn labels(&self, dim: usize) -> &[f64] {
        self.inner().labels(dim)
    }

    fn log_mass_cells(&self, cells: &[usize]) -> f64 {
        self.inner().log_mass_cells(cells)
    }

    fn smooth_log_density(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.inner().smooth_log_density(x)
    }

    fn has_smooth_relaxation(&self) -> bool {
        self.inner().has_smooth_relaxation()
    }
}
