//! Scalar numerical primitives shared by the samplers and tests: the RBF
//! kernel with its median-heuristic bandwidth, Adam, the standard normal
//! CDF/quantile pair, and seeded random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Bandwidth used when every pairwise distance is zero.
pub const BANDWIDTH_FLOOR: f64 = 1e-6;

/// Squared-exponential kernel `k(x, y) = exp(-|x - y|^2 / h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    bandwidth: f64,
}

impl RbfKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Argument(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    /// Kernel with the median-heuristic bandwidth of `points` (row-major, `dim` columns).
    pub fn median(points: &[f64], dim: usize) -> Result<Self> {
        Self::new(median_bandwidth(points, dim)?)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value. Slices must have equal length; this is the unchecked hot path.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (-sq_dist(x, y) / self.bandwidth).exp()
    }

    /// Writes `grad_x k(x, y)` into `out` and returns `k(x, y)`.
    #[inline]
    pub fn eval_with_grad(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        let k = self.eval(x, y);
        let scale = -2.0 * k / self.bandwidth;
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = scale * (a - b);
        }
        k
    }

    pub fn grad_first(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_with_grad(x, y, &mut out);
        out
    }
}

#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_kernel_args(x: &[f64], y: &[f64], h: f64) -> Result<RbfKernel> {
    check_dim(x.len(), y.len())?;
    RbfKernel::new(h)
}

/// `exp(-|x - y|^2 / h)`.
pub fn rbf_eval(x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    Ok(check_kernel_args(x, y, h)?.eval(x, y))
}

/// Gradient of the RBF kernel in its first argument: `(-2/h)(x - y) k(x, y)`.
pub fn rbf_grad_first(x: &[f64], y: &[f64], h: f64) -> Result<Vec<f64>> {
    Ok(check_kernel_args(x, y, h)?.grad_first(x, y))
}

/// Median heuristic `med^2 / (2 log(n + 1))`, where `med` is the lower median
/// of the `n(n-1)/2` pairwise Euclidean distances between the rows of `points`.
pub fn median_bandwidth(points: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Argument(format!(
            "point buffer of length {} is not a multiple of dimension {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if n < 2 {
        return Err(Error::Argument(format!("median bandwidth needs at least 2 points, got {n}")));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = &points[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            dists.push(sq_dist(xi, &points[j * dim..(j + 1) * dim]));
        }
    }
    // Squared distances share the ordering of distances, so the median can be
    // selected without taking square roots.
    let mid = (dists.len() - 1) / 2;
    let (_, med_sq, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let med_sq = *med_sq;
    if med_sq <= 0.0 {
        return Ok(BANDWIDTH_FLOOR);
    }
    Ok(med_sq / (2.0 * ((n + 1) as f64).ln()))
}

/// Adam moment estimates for a single parameter vector.
///
/// `update` returns an ascent increment: for a constant gradient `g` the
/// increment tends to `step_size * sign(g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub const DEFAULT_STEP_SIZE: f64 = 1e-4;

    pub fn new(dim: usize, step_size: f64) -> Self {
        Self {
            first: vec![0.0; dim],
            second: vec![0.0; dim],
            steps: 0,
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second
    }

    pub fn update(&mut self, grad: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; grad.len()];
        self.update_into(grad, &mut out)?;
        Ok(out)
    }

    /// Like [`AdamState::update`] but writes the increment into `out`.
    pub fn update_into(&mut self, grad: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), grad.len())?;
        check_dim(self.dim(), out.len())?;
        self.steps += 1;
        let t = self.steps as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for (((m, v), g), o) in self
            .first
            .iter_mut()
            .zip(self.second.iter_mut())
            .zip(grad)
            .zip(out.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *o = self.step_size * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Complementary error function, accurate to a few ulp across the real line.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on the open unit interval.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley refinement against the CDF. Upper-half inputs are reflected so the
/// refinement always runs on a lower-tail probability, where `1 - u` is exact.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Argument(format!("normal quantile needs u in (0, 1), got {u}")));
    }
    if u > 0.5 {
        return Ok(-lower_quantile(1.0 - u));
    }
    Ok(lower_quantile(u))
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = std_normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Logistic function `1 / (1 + exp(-t))`, stable for large `|t|`.
#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `log(sum(exp(v)))`; returns `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Seeded pseudo-random stream.
///
/// The generator is ChaCha8 (256-bit key, 64-bit stream id, 64-bit counter)
/// seeded through `SeedableRng::seed_from_u64`. Its output is fixed across
/// platforms, which keeps golden files reproducible.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `index`, derived from the parent's seed only.
    pub fn child(&self, index: u64) -> Self {
        Self::new(derive_seed(self.seed, index))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in the open interval `(0, 1)`.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer over `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
