//! Release-level properties of the mechanism with short chains.

use pmse_core::cart::{FitConfig, TreeFitter};
use pmse_core::mechanism::{run_mechanism, synthesize_from_theta, ChainConfig, MechanismConfig};
use pmse_core::models::{GenerativeModel, SequentialGaussianModel, ThetaVector};
use pmse_core::seeding::stream_rng;

fn quick_config(epsilon_total: f64, l: usize) -> MechanismConfig {
    MechanismConfig {
        epsilon_total,
        num_datasets: l,
        replicates_m: 2,
        chain: ChainConfig {
            iterations: 6,
            burn_in: 3,
            init_candidates: 4,
            ..ChainConfig::default()
        },
        fitter: TreeFitter::Greedy(FitConfig::with_depth(Some(3), 0.01)),
        ..MechanismConfig::default()
    }
}

fn original(n: usize, seed: u64) -> pmse_core::DataMatrix {
    let model = SequentialGaussianModel::new(n);
    let theta = ThetaVector::from_f64(&[2.0, 10.0, -2.5, 0.5, 3.0]);
    model.sample(&theta, &mut stream_rng(seed, 0)).unwrap()
}

#[test]
fn budget_is_spent_exactly_and_split_evenly() {
    let x = original(200, 1);
    let model = SequentialGaussianModel::new(200);
    for (eps, l) in [(1.0, 10), (0.3, 3), (4.0, 1), (0.7, 7)] {
        let out = run_mechanism(&x, &model, &quick_config(eps, l), &mut stream_rng(2, 0)).unwrap();
        assert!((out.epsilon_spent - eps).abs() < 1e-12);
        assert!((out.per_draw_epsilon * l as f64 - eps).abs() < 1e-12);
        assert_eq!(out.datasets.len(), l);
        assert_eq!(out.delta_u, 1.0 / 200.0);
    }
}

#[test]
fn datasets_regenerate_from_theta_and_seed() {
    let x = original(150, 3);
    let model = SequentialGaussianModel::new(150);
    let out = run_mechanism(&x, &model, &quick_config(1.0, 4), &mut stream_rng(4, 0)).unwrap();
    for ((theta, seed), data) in out
        .thetas
        .iter()
        .zip(&out.synthesis_seeds)
        .zip(&out.datasets)
    {
        assert_eq!(&synthesize_from_theta(&model, theta, *seed).unwrap(), data);
        assert!(GenerativeModel::<f64>::validate(&model, theta).is_ok());
    }
}

#[test]
fn same_seed_same_release() {
    let x = original(120, 5);
    let model = SequentialGaussianModel::new(120);
    let cfg = quick_config(0.5, 2);
    let a = run_mechanism(&x, &model, &cfg, &mut stream_rng(6, 0)).unwrap();
    let b = run_mechanism(&x, &model, &cfg, &mut stream_rng(6, 0)).unwrap();
    assert_eq!(a, b);
}
