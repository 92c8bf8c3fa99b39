mod common;

use common::*;
use discrete_stein::baselines::{exact_mc_sample, long_chain, parallel_chains, GibbsChain, ScanOrder};
use discrete_stein::models::{BernoulliRbm, CategoricalModel, IsingModel, Model};
use discrete_stein::numkit::RandomStream;
use discrete_stein::Error;

fn split(oracle: Vec<(Vec<f64>, f64)>) -> (Vec<Vec<f64>>, Vec<f64>) {
    oracle.into_iter().unzip()
}

#[test]
fn ising_gibbs_chains_reach_the_target() {
    let model = Model::Ising(IsingModel::grid(2, 3, 0.4).unwrap());
    let (states, probs) = split(ising_probs(2, 3, 0.4));
    let samples = parallel_chains(&model, 20_000, 30, 0.0, 1).unwrap();
    let p = chi_square_p_value(&state_counts(&samples, &states), &probs);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn random_scan_has_the_same_target() {
    let ising = IsingModel::grid(2, 2, 0.6).unwrap();
    let (states, probs) = split(ising_probs(2, 2, 0.6));
    let root = RandomStream::new(4);
    let samples: Vec<Vec<f64>> = (0..10_000)
        .map(|i| {
            let mut c = GibbsChain::random(4, root.child(i)).with_scan(ScanOrder::Random);
            for _ in 0..30 {
                c.sweep_ising(&ising).unwrap();
            }
            c.labels()
        })
        .collect();
    let p = chi_square_p_value(&state_counts(&samples, &states), &probs);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn rbm_block_gibbs_reaches_the_visible_marginal() {
    let mut rng = RandomStream::new(8);
    let rbm = BernoulliRbm::random(5, 3, 0.8, 0.7, &mut rng).unwrap();
    let (states, probs) = split(rbm_probs(&rbm.weight_rows(), rbm.visible_bias(), rbm.hidden_bias()));
    let samples = long_chain(&Model::Rbm(rbm), 20_000, 200, 5, 2).unwrap();
    let p = chi_square_p_value(&state_counts(&samples, &states), &probs);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn exact_mc_follows_the_pmf() {
    let probs = vec![0.1, 0.2, 0.25, 0.15, 0.3];
    let model = CategoricalModel::new(vec![-2.0, -1.0, 0.0, 1.0, 2.0], probs.clone()).unwrap();
    let samples = exact_mc_sample(&model, 20_000, &mut RandomStream::new(3)).unwrap();
    let states: Vec<Vec<f64>> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|&s| vec![s]).collect();
    let p = chi_square_p_value(&state_counts(&samples, &states), &probs);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn exact_mc_mean_error_decays_like_one_over_n() {
    // Mean squared error of the sample mean is Var/n; fit the log-log slope.
    let model = IsingModel::grid(2, 2, 0.3).unwrap();
    let ns = [20usize, 40, 80, 160, 320];
    let root = RandomStream::new(10);
    let mse: Vec<f64> = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (0..400)
                .map(|t| {
                    let mut rng = root.child((k * 1000 + t) as u64);
                    let s = exact_mc_sample(&model, n, &mut rng).unwrap();
                    (0..4)
                        .map(|j| (s.iter().map(|z| z[j]).sum::<f64>() / n as f64).powi(2))
                        .sum::<f64>()
                        / 4.0
                })
                .sum::<f64>()
                / 400.0
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = mse.iter().map(|m| m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 5.0;
    let my = ys.iter().sum::<f64>() / 5.0;
    let slope =
        xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn chains_are_reproducible() {
    let model = Model::Ising(IsingModel::grid(3, 3, 0.2).unwrap());
    assert_eq!(
        parallel_chains(&model, 10, 5, -1.0, 42).unwrap(),
        parallel_chains(&model, 10, 5, -1.0, 42).unwrap()
    );
    assert_ne!(
        parallel_chains(&model, 10, 5, -1.0, 42).unwrap(),
        parallel_chains(&model, 10, 5, -1.0, 43).unwrap()
    );
}

#[test]
fn gibbs_rejects_bad_input() {
    assert!(matches!(
        GibbsChain::new(vec![1, 0, -1], RandomStream::new(0)),
        Err(Error::Argument(_))
    ));
    let ising = IsingModel::grid(2, 2, 0.1).unwrap();
    let mut chain = GibbsChain::random(3, RandomStream::new(0));
    assert!(matches!(chain.sweep_ising(&ising), Err(Error::DimensionMismatch { .. })));
    let cat = Model::Categorical(CategoricalModel::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap());
    assert!(matches!(parallel_chains(&cat, 2, 1, 0.0, 0), Err(Error::Unsupported(_))));
}
