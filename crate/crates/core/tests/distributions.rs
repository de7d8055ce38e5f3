//! Moment and frequency oracles for the random generators.

use pmse_core::baselines::{
    laplace_noise, noisy_bppd_scales, nondp_bppd_synthesize, smooth_histogram_fit,
    smooth_histogram_sample, smoothing_lambda, Bounds,
};
use pmse_core::dataset::DataMatrix;
use pmse_core::models::{GenerativeModel, SequentialGaussianModel, ThetaVector};
use pmse_core::seeding::stream_rng;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (
        m,
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0),
    )
}

fn slope(x: &DataMatrix<f64>) -> (f64, f64) {
    let xs: Vec<f64> = x.column(0).collect();
    let ys: Vec<f64> = x.column(1).collect();
    let (mx, vx) = mean_var(&xs);
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b1 = sxy / (vx * (xs.len() as f64 - 1.0));
    (my - b1 * mx, b1)
}

#[test]
fn laplace_moments() {
    let scale = 1.7;
    let n = 1_000_000;
    let mut rng = stream_rng(11, 0);
    let draws: Vec<f64> = (0..n)
        .map(|_| laplace_noise(scale, &mut rng).unwrap())
        .collect();
    let (m, v) = mean_var(&draws);
    let var = 2.0 * scale * scale;
    // Fourth central moment of the Laplace distribution is 24·b⁴.
    let se_mean = (var / n as f64).sqrt();
    let se_var = ((24.0 * scale.powi(4) - var * var) / n as f64).sqrt();
    assert!(m.abs() < 4.0 * se_mean, "mean {m}");
    assert!((v - var).abs() < 4.0 * se_var, "variance {v} vs {var}");
}

#[test]
fn laplace_is_seed_deterministic() {
    let a = laplace_noise(2.0, &mut stream_rng(5, 1)).unwrap();
    let b = laplace_noise(2.0, &mut stream_rng(5, 1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn model_moments_and_regression() {
    let n = 200_000;
    let model = SequentialGaussianModel::new(n);
    let theta = ThetaVector::<f64>::from_f64(&[1.5, 4.0, -2.0, 0.75, 2.0]);
    let x = model.sample(&theta, &mut stream_rng(3, 0)).unwrap();
    let x1: Vec<f64> = x.column(0).collect();
    let (m1, v1) = mean_var(&x1);
    assert!((m1 - 1.5).abs() < 4.0 * 4.0 / (n as f64).sqrt());
    // Var of the sample variance of a normal is 2σ⁴/(n-1).
    assert!((v1 - 16.0).abs() < 4.0 * (2.0 * 256.0 / n as f64).sqrt());
    let (b0, b1) = slope(&x);
    let se_b1 = 2.0 / (4.0 * (n as f64).sqrt());
    assert!((b1 - 0.75).abs() < 4.0 * se_b1, "slope {b1}");
    // Intercept SE: σ·sqrt(1/n + x̄²/Sxx).
    let se_b0 = 2.0 * (1.0 / n as f64 + 1.5 * 1.5 / (16.0 * n as f64)).sqrt();
    assert!((b0 + 2.0).abs() < 4.0 * se_b0, "intercept {b0}");
}

#[test]
fn nondp_posterior_concentrates_on_fitted_values() {
    let n = 100_000;
    let model = SequentialGaussianModel::new(n);
    let theta = ThetaVector::<f64>::from_f64(&[2.0, 10.0, -2.5, 0.5, 3.0]);
    let x = model.sample(&theta, &mut stream_rng(8, 0)).unwrap();
    let (_, fitted_b1) = slope(&x);
    let xbar = x.column(0).sum::<f64>() / n as f64;
    let sxx = (n as f64 - 1.0) * mean_var(&x.column(0).collect::<Vec<_>>()).1;
    let synthetic = nondp_bppd_synthesize(&x, 3, &mut stream_rng(8, 1)).unwrap();
    for s in &synthetic {
        // Posterior draw plus resampling: twice the sampling variance.
        let se_mean = (2.0 * 100.0 / n as f64).sqrt();
        let se_slope = (2.0 * 9.0 / sxx).sqrt();
        let sbar = s.column(0).sum::<f64>() / n as f64;
        assert!((sbar - xbar).abs() < 4.0 * se_mean);
        assert!((slope(s).1 - fitted_b1).abs() < 4.0 * se_slope);
    }
}

#[test]
fn histogram_cell_frequencies_match_probabilities() {
    let bounds = Bounds::<f64>::new(vec![0.0, -1.0], vec![4.0, 1.0]).unwrap();
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 / 200.0;
            vec![4.0 * t * t, (6.0 * t).sin()]
        })
        .collect();
    let x = DataMatrix::from_unnamed_rows(&rows).unwrap();
    let h = smooth_histogram_fit(&x, &bounds, 4, 50.0).unwrap();
    assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(h.probabilities.iter().all(|p| *p > 0.0));
    assert_eq!(h.lambda, smoothing_lambda(16, 200, 50.0).unwrap());

    let n_out = 1_000_000;
    let s = smooth_histogram_sample(&h, n_out, &mut stream_rng(21, 0)).unwrap();
    assert!(bounds.contains(&s));
    let mut counts = vec![0usize; h.cells()];
    for row in s.rows() {
        counts[h.cell_of(row)] += 1;
    }
    for (k, (&c, &p)) in counts.iter().zip(&h.probabilities).enumerate() {
        let freq = c as f64 / n_out as f64;
        let se = (p * (1.0 - p) / n_out as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "cell {k}: {freq} vs {p}");
    }
}

#[test]
fn single_cell_histogram_is_uniform_on_box() {
    let bounds = Bounds::<f64>::new(vec![-2.0], vec![3.0]).unwrap();
    let x = DataMatrix::from_unnamed_rows(&[vec![0.0], vec![1.0], vec![2.5]]).unwrap();
    let h = smooth_histogram_fit(&x, &bounds, 1, 1.0).unwrap();
    let n = 200_000;
    let s = smooth_histogram_sample(&h, n, &mut stream_rng(2, 0)).unwrap();
    let (m, v) = mean_var(&s.column(0).collect::<Vec<_>>());
    // Uniform on [-2, 3]: mean 0.5, variance 25/12.
    assert!((m - 0.5).abs() < 4.0 * (25.0f64 / 12.0 / n as f64).sqrt());
    // Fourth central moment of a uniform of width w is w⁴/80.
    let se_var = ((625.0 / 80.0 - (25.0f64 / 12.0).powi(2)) / n as f64).sqrt();
    assert!((v - 25.0 / 12.0).abs() < 4.0 * se_var);
}

#[test]
fn data_outside_bounds_is_rejected() {
    let bounds = Bounds::<f64>::new(vec![0.0], vec![1.0]).unwrap();
    let x = DataMatrix::from_unnamed_rows(&[vec![0.5], vec![1.5]]).unwrap();
    assert!(smooth_histogram_fit(&x, &bounds, 4, 1.0).is_err());
    assert!(smooth_histogram_fit(&bounds.clamp(&x).unwrap(), &bounds, 4, 1.0).is_ok());
}

#[test]
fn wider_bounds_mean_more_noise() {
    let narrow = Bounds::<f64>::centered(&[2.0, -1.5], &[10.0, 34f64.sqrt()], 2.0).unwrap();
    let wide = Bounds::<f64>::centered(&[2.0, -1.5], &[10.0, 34f64.sqrt()], 10.0).unwrap();
    let a = noisy_bppd_scales(&narrow, 0.1).unwrap();
    let b = noisy_bppd_scales(&wide, 0.1).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| y > x));
}
