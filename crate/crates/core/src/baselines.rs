//! Reference samplers: single-site Gibbs for the Ising model, block Gibbs
//! for the RBM and exact Monte Carlo for enumerable models.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::models::{enumerate_log_mass, validate_spins, BernoulliRbm, DiscreteModel, IsingModel, Model};
use crate::numkit::{logistic, RandomStream};

/// Site visiting order of a single-site Gibbs sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Sites in index order.
    #[default]
    Systematic,
    /// `d` sites drawn uniformly with replacement.
    Random,
}

/// A Gibbs chain over `±1` spins, with hidden bits for the RBM.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    state: Vec<i8>,
    hidden: Vec<u8>,
    sweeps: u64,
    rng: RandomStream,
    scan: ScanOrder,
}

impl GibbsChain {
    pub fn new(state: Vec<i8>, rng: RandomStream) -> Result<Self> {
        validate_spins(&state)?;
        Ok(Self {
            state,
            hidden: Vec::new(),
            sweeps: 0,
            rng,
            scan: ScanOrder::Systematic,
        })
    }

    /// Uniformly random initial spins.
    pub fn random(dim: usize, mut rng: RandomStream) -> Self {
        let state = (0..dim).map(|_| if rng.bernoulli(0.5) { 1 } else { -1 }).collect();
        Self::new(state, rng).expect("spins are valid")
    }

    pub fn with_scan(mut self, scan: ScanOrder) -> Self {
        self.scan = scan;
        self
    }

    pub fn state(&self) -> &[i8] {
        &self.state
    }

    pub fn labels(&self) -> Vec<f64> {
        self.state.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn hidden(&self) -> &[u8] {
        &self.hidden
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    fn resample_site(&mut self, model: &IsingModel, site: usize) {
        let p = logistic(2.0 * model.local_field(&self.state, site));
        self.state[site] = if self.rng.uniform() < p { 1 } else { -1 };
    }

    /// One pass of single-site updates from the Ising conditionals.
    pub fn sweep_ising(&mut self, model: &IsingModel) -> Result<()> {
        check_dim(model.num_sites(), self.state.len())?;
        let d = self.state.len();
        match self.scan {
            ScanOrder::Systematic => (0..d).for_each(|s| self.resample_site(model, s)),
            ScanOrder::Random => {
                for _ in 0..d {
                    let s = self.rng.index(d);
                    self.resample_site(model, s);
                }
            }
        }
        self.sweeps += 1;
        Ok(())
    }

    /// One alternation `h | z` then `z | h`.
    pub fn sweep_rbm(&mut self, model: &BernoulliRbm) -> Result<()> {
        check_dim(model.visible(), self.state.len())?;
        let ph = model.hidden_conditionals(&self.state)?;
        self.hidden = ph.iter().map(|&p| u8::from(self.rng.uniform() < p)).collect();
        let pz = model.visible_conditionals(&self.hidden)?;
        for (z, p) in self.state.iter_mut().zip(pz) {
            *z = if self.rng.uniform() < p { 1 } else { -1 };
        }
        self.sweeps += 1;
        Ok(())
    }

    /// One sweep of whichever kernel suits `model`.
    pub fn sweep(&mut self, model: &Model) -> Result<()> {
        match model {
            Model::Ising(m) => self.sweep_ising(m),
            Model::Rbm(m) => self.sweep_rbm(m),
            Model::Categorical(_) => Err(Error::Unsupported("Gibbs sampling needs a binary model".into())),
        }
    }
}

/// `n` i.i.d. draws from the enumerated distribution, as state labels.
pub fn exact_mc_sample(model: &dyn DiscreteModel, n: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
    let table = enumerate_log_mass(model)?;
    Ok((0..n).map(|_| table.labels_of(table.sample_index(rng))).collect())
}

/// Final states of `n` independent chains after `sweeps` sweeps each.
///
/// Chain `i` uses child stream `i` of `seed`. Initial spins are the
/// signs of `N(init_mean, 1)` draws, mirroring particle initialization.
pub fn parallel_chains(model: &Model, n: usize, sweeps: usize, init_mean: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    let root = RandomStream::new(seed);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(i as u64);
            let init = (0..model.dim())
                .map(|_| if init_mean + rng.normal() >= 0.0 { 1 } else { -1 })
                .collect();
            let mut chain = GibbsChain::new(init, rng)?;
            for _ in 0..sweeps {
                chain.sweep(model)?;
            }
            Ok(chain.labels())
        })
        .collect()
}

/// One long chain: `burn_in` sweeps, then one state every `thin` sweeps.
pub fn long_chain(model: &Model, samples: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if thin == 0 {
        return Err(Error::Argument("thinning interval must be at least 1".into()));
    }
    let mut chain = GibbsChain::random(model.dim(), RandomStream::new(seed));
    for _ in 0..burn_in {
        chain.sweep(model)?;
    }
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        for _ in 0..thin {
            chain.sweep(model)?;
        }
        out.push(chain.labels());
    }
    Ok(out)
}
