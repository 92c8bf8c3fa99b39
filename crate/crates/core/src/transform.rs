//! Continuous parameterization of a discrete distribution.
//!
//! A product base density `p_0` is cut into `K` cells of equal base mass per
//! dimension. The piecewise density `p_c(x) ∝ p_0(x) p_*(Γ(x))`, where `Γ`
//! maps `x` to the label of its cell, pushes forward to exactly `p_*`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::{enumerate_log_mass, DiscreteModel, EnumerationTable, SPIN_LABELS};
use crate::numkit::{std_normal_cdf, std_normal_quantile, RandomStream};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// One-dimensional factor of a product base density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseComponent {
    StdGaussian,
    /// Mixture of unit-variance Gaussians.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
    },
}

impl BaseComponent {
    pub fn mixture(weights: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        check_dim(weights.len(), means.len())?;
        if weights.is_empty() {
            return Err(Error::Argument("mixture needs at least one component".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Argument("mixture weights must be positive and means finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self::GaussianMixture { weights, means })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Self::StdGaussian => -0.5 * x * x - LN_SQRT_2PI,
            Self::GaussianMixture { weights, means } => {
                let terms: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .map(|(w, m)| w.ln() - 0.5 * (x - m).powi(2))
                    .collect();
                crate::numkit::log_sum_exp(&terms) - LN_SQRT_2PI
            }
        }
    }

    /// `d/dx log p(x)`.
    pub fn score(&self, x: f64) -> f64 {
        match self {
            Self::StdGaussian => -x,
            Self::GaussianMixture { weights, means } => {
                let logs: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .map(|(w, m)| w.ln() - 0.5 * (x - m).powi(2))
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut num = 0.0;
                let mut den = 0.0;
                for (l, m) in logs.iter().zip(means) {
                    let r = (l - top).exp();
                    num += r * (m - x);
                    den += r;
                }
                num / den
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::StdGaussian => std_normal_cdf(x),
            Self::GaussianMixture { weights, means } => weights.iter().zip(means).map(|(w, m)| w * std_normal_cdf(x - m)).sum(),
        }
    }

    /// Inverse CDF on `(0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            Self::StdGaussian => std_normal_quantile(u),
            Self::GaussianMixture { means, .. } => {
                if !(u > 0.0 && u < 1.0) {
                    return Err(Error::Argument(format!("quantile level {u} outside (0, 1)")));
                }
                // Every component quantile brackets the mixture quantile.
                let z = std_normal_quantile(u)?;
                let lo_mean = means.iter().copied().fold(f64::INFINITY, f64::min);
                let hi_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut lo = lo_mean + z - 1.0;
                let mut hi = hi_mean + z + 1.0;
                if !(self.cdf(lo) <= u && self.cdf(hi) >= u) {
                    return Err(Error::Numeric(format!("could not bracket mixture quantile at {u}")));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Product of one-dimensional base components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseDensity {
    components: Vec<BaseComponent>,
}

impl BaseDensity {
    pub fn std_gaussian(dim: usize) -> Self {
        Self::iid(dim, BaseComponent::StdGaussian)
    }

    pub fn iid(dim: usize, component: BaseComponent) -> Self {
        Self {
            components: vec![component; dim],
        }
    }

    pub fn new(components: Vec<BaseComponent>) -> Self {
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, dim: usize) -> &BaseComponent {
        &self.components[dim]
    }

    pub fn is_std_gaussian(&self) -> bool {
        self.components.iter().all(|c| *c == BaseComponent::StdGaussian)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.components).map(|(&v, c)| c.log_pdf(v)).sum()
    }

    /// Writes `∇ log p_0(x)` into `grad` and returns `log p_0(x)`.
    pub fn log_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut total = 0.0;
        for ((g, &v), c) in grad.iter_mut().zip(x).zip(&self.components) {
            total += c.log_pdf(v);
            *g = c.score(v);
        }
        total
    }
}

/// Per-dimension cell boundaries of equal base mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvenPartition {
    /// Interior boundaries `η_1 < … < η_{K-1}` for each dimension.
    boundaries: Vec<Vec<f64>>,
    labels: Vec<Vec<f64>>,
    /// Every dimension is the sign cell pair `(-inf, 0), [0, inf)`.
    #[serde(skip)]
    sign: bool,
}

impl EvenPartition {
    /// Cells bounded by the `i/K` quantiles of each base component.
    pub fn new(base: &BaseDensity, labels: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(base.dim(), labels.len())?;
        let mut boundaries = Vec::with_capacity(labels.len());
        for (j, lab) in labels.iter().enumerate() {
            let k = lab.len();
            if k < 2 {
                return Err(Error::Argument(format!("dimension {j} has {k} states, need at least 2")));
            }
            if lab.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Argument(format!("labels of dimension {j} are not increasing")));
            }
            let comp = base.component(j);
            let eta = (1..k)
                .map(|i| comp.quantile(i as f64 / k as f64))
                .collect::<Result<Vec<f64>>>()?;
            if eta.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Numeric(format!("boundaries of dimension {j} are not increasing")));
            }
            boundaries.push(eta);
        }
        let sign = base.is_std_gaussian() && labels.iter().all(|l| l[..] == SPIN_LABELS);
        if sign {
            // The median of a standard Gaussian is exactly 0.
            boundaries.iter_mut().for_each(|b| b[0] = 0.0);
        }
        Ok(Self {
            boundaries,
            labels,
            sign,
        })
    }

    /// The binary partition `Γ(x) = sign(x)` under a standard Gaussian base.
    pub fn sign(dim: usize) -> Self {
        Self {
            boundaries: vec![vec![0.0]; dim],
            labels: vec![SPIN_LABELS.to_vec(); dim],
            sign: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn num_cells(&self, dim: usize) -> usize {
        self.labels[dim].len()
    }

    pub fn boundaries(&self, dim: usize) -> &[f64] {
        &self.boundaries[dim]
    }

    pub fn labels(&self, dim: usize) -> &[f64] {
        &self.labels[dim]
    }

    pub fn is_sign(&self) -> bool {
        self.sign
    }

    /// Index of the half-open cell `[η_{i-1}, η_i)` holding `x`; boundary
    /// points go to the upper cell.
    #[inline]
    pub fn cell(&self, dim: usize, x: f64) -> usize {
        if self.sign {
            usize::from(x >= 0.0)
        } else {
            self.boundaries[dim].partition_point(|&b| b <= x)
        }
    }

    pub fn cells_into(&self, x: &[f64], out: &mut [usize]) {
        for (j, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            *o = self.cell(j, v);
        }
    }

    pub fn cells(&self, x: &[f64]) -> Vec<usize> {
        let mut out = vec![0; x.len()];
        self.cells_into(x, &mut out);
        out
    }

    /// `Γ(x)`: the label of each coordinate's cell.
    pub fn gamma(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(x.iter().enumerate().map(|(j, &v)| self.labels[j][self.cell(j, v)]).collect())
    }

    /// Cell index of a label, matched exactly.
    pub fn cell_of_label(&self, dim: usize, label: f64) -> Result<usize> {
        self.labels[dim]
            .iter()
            .position(|&a| a == label)
            .ok_or_else(|| Error::Argument(format!("{label} is not a state of dimension {dim}")))
    }

    /// Draw `x` from the base restricted to a cell: `y ~ U[c/K, (c+1)/K)`,
    /// `x = F⁻¹(y)`.
    pub fn draw_in_cell(&self, base: &BaseDensity, dim: usize, cell: usize, rng: &mut RandomStream) -> Result<f64> {
        let k = self.num_cells(dim) as f64;
        let y = (cell as f64 + rng.uniform_open()) / k;
        let x = base.component(dim).quantile(y)?;
        // Guard against rounding across a boundary.
        let b = &self.boundaries[dim];
        let x = if cell > 0 && x < b[cell - 1] { b[cell - 1] } else { x };
        let x = if cell < b.len() && x >= b[cell] {
            b[cell].next_down()
        } else {
            x
        };
        Ok(x)
    }
}

/// A differentiable log density, known up to a constant.
pub trait Surrogate: Sync {
    /// Writes the gradient into `grad` and returns the log density.
    fn log_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> Surrogate for F
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn log_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self(x, grad)
    }
}

/// A possibly non-differentiable target log density, known up to a constant.
pub trait LogDensity: Sync {
    /// Returns `-inf` where the density vanishes.
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<F> LogDensity for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn log_density(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// How the surrogate `ρ` is built from a parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    /// `ρ = p_0`.
    #[default]
    BaseOnly,
    /// `ρ ∝ p_0(x) p~(σ(x))` with the model's smooth relaxation.
    Smooth,
}

/// `p_c(x) ∝ p_0(x) p_*(Γ(x))` for a discrete model and a product base.
#[derive(Debug, Clone)]
pub struct ContinuousParameterization<M> {
    model: M,
    base: BaseDensity,
    partition: EvenPartition,
}

impl<M: DiscreteModel> ContinuousParameterization<M> {
    pub fn new(model: M, base: BaseDensity) -> Result<Self> {
        check_dim(model.dim(), base.dim())?;
        let labels = (0..model.dim()).map(|j| model.labels(j).to_vec()).collect();
        let partition = EvenPartition::new(&base, labels)?;
        Ok(Self { model, base, partition })
    }

    /// Standard Gaussian base, the default choice.
    pub fn gaussian(model: M) -> Result<Self> {
        let base = BaseDensity::std_gaussian(model.dim());
        Self::new(model, base)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn base(&self) -> &BaseDensity {
        &self.base
    }

    pub fn partition(&self) -> &EvenPartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn gamma(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.partition.gamma(x)
    }

    /// `log p_0(x) + log p_*(Γ(x))`, `-inf` on zero-mass cells.
    pub fn log_pc(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.log_pc_unchecked(x))
    }

    fn log_pc_unchecked(&self, x: &[f64]) -> f64 {
        let cells = self.partition.cells(x);
        let lm = self.model.log_mass_cells(&cells);
        if lm == f64::NEG_INFINITY {
            return lm;
        }
        self.base.log_density(x) + lm
    }

    /// Builds a surrogate `ρ` in the given mode.
    pub fn surrogate(&self, mode: SurrogateMode) -> Result<ModelSurrogate<'_>> {
        if mode == SurrogateMode::Smooth {
            if !self.model.has_smooth_relaxation() {
                return Err(Error::Unsupported("model has no smooth relaxation".into()));
            }
            if !self.partition.is_sign() {
                return Err(Error::Unsupported(
                    "smooth surrogates need the sign partition (binary model, Gaussian base)".into(),
                ));
            }
        }
        Ok(ModelSurrogate {
            base: &self.base,
            model: (mode == SurrogateMode::Smooth).then_some(&self.model as &dyn DiscreteModel),
        })
    }

    /// Maps one discrete state (labels) to a point of its cell.
    pub fn to_continuous(&self, z: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        check_dim(self.dim(), z.len())?;
        z.iter()
            .enumerate()
            .map(|(j, &a)| {
                let c = self.partition.cell_of_label(j, a)?;
                self.partition.draw_in_cell(&self.base, j, c, rng)
            })
            .collect()
    }

    /// Maps a data set of discrete states to continuous points.
    pub fn data_to_continuous(&self, data: &[Vec<f64>], rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        data.iter().map(|z| self.to_continuous(z, rng)).collect()
    }

    /// Exact sampler for `p_c`, available when `p_*` is enumerable.
    pub fn exact_sampler(&self) -> Result<ExactPcSampler<'_, M>> {
        Ok(ExactPcSampler {
            cp: self,
            table: enumerate_log_mass(&self.model)?,
        })
    }
}

impl<M: DiscreteModel> LogDensity for ContinuousParameterization<M> {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_pc_unchecked(x)
    }
}

/// Surrogate built from a parameterization: `p_0`, optionally times the
/// model's smooth relaxation.
#[derive(Clone, Copy)]
pub struct ModelSurrogate<'a> {
    base: &'a BaseDensity,
    model: Option<&'a dyn DiscreteModel>,
}

impl ModelSurrogate<'_> {
    pub fn mode(&self) -> SurrogateMode {
        if self.model.is_some() {
            SurrogateMode::Smooth
        } else {
            SurrogateMode::BaseOnly
        }
    }
}

impl Surrogate for ModelSurrogate<'_> {
    fn log_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut value = self.base.log_and_grad(x, grad);
        if let Some(model) = self.model {
            let (v, g) = model
                .smooth_log_density(x)
                .expect("smooth relaxation checked at construction");
            value += v;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        value
    }
}

/// Draws `z ~ p_*` from the enumerated table, then `x` within the cell of `z`.
pub struct ExactPcSampler<'a, M> {
    cp: &'a ContinuousParameterization<M>,
    table: EnumerationTable,
}

impl<M: DiscreteModel> ExactPcSampler<'_, M> {
    pub fn table(&self) -> &EnumerationTable {
        &self.table
    }

    pub fn draw(&self, rng: &mut RandomStream) -> Result<Vec<f64>> {
        let idx = self.table.sample_index(rng);
        self.table
            .cells(idx)
            .into_iter()
            .enumerate()
            .map(|(j, c)| self.cp.partition.draw_in_cell(&self.cp.base, j, c, rng))
            .collect()
    }
}
