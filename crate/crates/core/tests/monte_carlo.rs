//! Statistical checks at a scale that runs in a few seconds; the acceptance
//! suite repeats the main ones at full size.

use advdesign::estimate::{grad_k_hat, k_hat};
use advdesign::linalg::{cholesky_unit_det, trace_quadratic_form, AdversaryParams, Matrix};
use advdesign::models::{
    Design, FisherModel, GaussianModel, PkModel, PoissonMode, PoissonModel, ThetaSample,
};
use advdesign::posterior::{importance_posterior, sample_posterior};
use advdesign::rng::{standard_normal, stream, StreamId};
use advdesign::score::{draw_noise, k_hat_score};
use advdesign::Result;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn poisson_per_theta_k_hat_is_unbiased() {
    let per = PoissonModel::new(2.0, 1.0, PoissonMode::PerTheta).unwrap();
    let exact = PoissonModel::default();
    let design = Design::from_natural(&[0.3], per.spec().constraint).unwrap();
    let eta = AdversaryParams::new(2, vec![0.2, -0.4]).unwrap();
    let a = cholesky_unit_det(&eta);
    let want = grad_k_hat(&exact, &[ThetaSample(vec![1.0, 1.0])], &design, &eta).unwrap();

    let mut rng = stream(11, StreamId::Theta);
    let (mut ks, mut gd, mut ga0, mut ga1) = (vec![], vec![], vec![], vec![]);
    for _ in 0..20_000 {
        let batch = per.sample_prior(1, &mut rng);
        let g = grad_k_hat(&per, &batch, &design, &eta).unwrap();
        ks.push(k_hat(&per, &batch, &design, &a).unwrap());
        gd.push(g.design[0]);
        ga0.push(g.adversary[0]);
        ga1.push(g.adversary[1]);
    }
    for (xs, target, label) in [
        (&ks, want.value, "K"),
        (&gd, want.design[0], "dK/dλ"),
        (&ga0, want.adversary[0], "dK/dη11"),
        (&ga1, want.adversary[1], "dK/dη21"),
    ] {
        let (m, se) = mean_se(xs);
        assert!(
            (m - target).abs() < 4.0 * se,
            "{label}: mean {m} vs {target} (se {se})"
        );
    }
}

#[test]
fn pk_prior_medians() {
    let m = PkModel::default();
    let mut rng = stream(12, StreamId::Theta);
    let draws = m.sample_prior(20_001, &mut rng);
    for (k, want) in [0.1, 1.0, 20.0].into_iter().enumerate() {
        let mut v: Vec<f64> = draws.iter().map(|t| t.values()[k]).collect();
        v.sort_by(f64::total_cmp);
        let med = v[v.len() / 2];
        assert!((med / want).ln().abs() < 0.01, "median {med} vs {want}");
        let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let (_, se) = mean_se(&logs);
        let var = se * se * logs.len() as f64;
        assert!((var - 0.05).abs() < 0.003, "log variance {var}");
    }
}

#[test]
fn score_estimator_matches_closed_form_in_mean() {
    let m = PkModel::default();
    let tau: Vec<f64> = (0..15).map(|i| 0.3 + 1.6 * i as f64).collect();
    let design = Design::from_natural(&tau, m.spec().constraint).unwrap();
    let a = cholesky_unit_det(&AdversaryParams::new(3, vec![0.1, -0.2, 0.3, 0.05, -0.1]).unwrap());
    let mut rng = stream(13, StreamId::Theta);
    let mut noise_rng = stream(13, StreamId::Noise);
    let mut diffs = Vec::new();
    for _ in 0..10_000 {
        let theta = m.sample_prior(1, &mut rng);
        let eps = draw_noise(1, 15, &mut noise_rng);
        let s = k_hat_score(&m, &theta, &eps, &design, &a).unwrap();
        let c = k_hat(&m, &theta, &design, &a).unwrap();
        diffs.push(s - c);
    }
    let (mean, se) = mean_se(&diffs);
    assert!(mean.abs() < 4.0 * se, "mean difference {mean} (se {se})");
}

/// `y_i = θ τ_i + σ ε_i` with a N(0, 1) prior: the posterior mean is known.
struct Linear {
    sigma: f64,
}

impl GaussianModel for Linear {
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn mean(&self, theta: &ThetaSample, tau: &[f64]) -> Result<Vec<f64>> {
        Ok(tau.iter().map(|t| theta.values()[0] * t).collect())
    }
    fn jacobian(&self, _theta: &ThetaSample, tau: &[f64]) -> Result<Matrix> {
        Matrix::from_row_major(tau.len(), 1, tau.to_vec())
    }
    fn jacobian_dt(&self, _theta: &ThetaSample, tau: &[f64]) -> Result<Matrix> {
        Matrix::from_row_major(tau.len(), 1, vec![1.0; tau.len()])
    }
}

#[test]
fn importance_posterior_matches_conjugate_mean() {
    let model = Linear { sigma: 1.0 };
    let tau = [0.5, 1.0, -0.3];
    let y = [0.4, 1.1, -0.2];
    let mut rng = stream(14, StreamId::Posterior);
    let samples: Vec<ThetaSample> = (0..200_000)
        .map(|_| ThetaSample(vec![standard_normal(&mut rng)]))
        .collect();
    let post = importance_posterior(&model, &tau, &y, samples).unwrap();
    let precision = 1.0 + tau.iter().map(|t| t * t).sum::<f64>();
    let want = tau.iter().zip(&y).map(|(t, v)| t * v).sum::<f64>() / precision;
    assert!((post.weighted_mean()[0] - want).abs() < 0.01);
    assert!((post.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(!post.degenerate());
}

#[test]
fn pk_posterior_concentrates_near_truth() {
    let m = PkModel::default().with_sigma(1.0).unwrap();
    let tau: Vec<f64> = [1.1; 6]
        .iter()
        .chain(&[3.4; 4])
        .chain(&[14.0; 5])
        .copied()
        .collect();
    let truth = ThetaSample(vec![0.1, 1.0, 20.0]);
    let post = sample_posterior(&m, &tau, &truth, 50_000, 3).unwrap();
    assert!(post.effective_sample_size > 10.0);
    let mean = post.weighted_mean();
    // the data should pin the volume parameter far tighter than its prior
    assert!((mean[2] / 20.0).ln().abs() < 0.1, "posterior mean {mean:?}");
    let again = sample_posterior(&m, &tau, &truth, 50_000, 3).unwrap();
    assert_eq!(post, again);
}

#[test]
fn k_hat_exact_mode_matches_closed_form() {
    let m = PoissonModel::default();
    let design = Design::from_natural(&[0.25], m.spec().constraint).unwrap();
    let a = Matrix::identity(2);
    let k = k_hat(
        &m,
        &m.sample_prior(3, &mut stream(1, StreamId::Theta)),
        &design,
        &a,
    )
    .unwrap();
    let want = -trace_quadratic_form(&a, &m.expected_fisher(0.25).unwrap()).unwrap();
    assert_eq!(k, want);
    assert!((k + 1.25).abs() < 1e-15);
}

/// θ₂, θ₃ held at the truth: the posterior of `log θ₁` is close to normal,
/// with mode and curvature from Gauss-Newton on the log posterior.
fn conjugate_reduction(sigma: f64, samples: usize, seed: u64) -> (f64, f64, f64, f64) {
    use advdesign::posterior::importance_posterior;
    use advdesign::rng::{lognormal, uniform};

    let m = PkModel::default().with_sigma(sigma).unwrap();
    let tau: Vec<f64> = [1.1; 6]
        .iter()
        .chain(&[3.4; 4])
        .chain(&[14.0; 5])
        .copied()
        .collect();
    let (t2, t3) = (1.0, 20.0);
    let mu = 0.1f64.ln();
    let var = m.prior_log_variance();
    let mut rng = stream(seed, StreamId::Posterior);
    let truth = ThetaSample(vec![0.1, t2, t3]);
    let y: Vec<f64> = m
        .mean(&truth, &tau)
        .unwrap()
        .iter()
        .map(|x| x + sigma * standard_normal(&mut rng))
        .collect();
    let draws: Vec<ThetaSample> = (0..samples)
        .map(|_| ThetaSample(vec![lognormal(&mut rng, mu, var), t2, t3]))
        .collect();
    let post = importance_posterior(&m, &tau, &y, draws).unwrap();
    let phi: Vec<f64> = post.samples.iter().map(|s| s.values()[0].ln()).collect();
    let est = phi
        .iter()
        .zip(&post.weights)
        .map(|(p, w)| p * w)
        .sum::<f64>();

    // Gauss-Newton for the mode of log θ₁
    let mut mode = mu;
    let mut precision = 1.0 / var;
    for _ in 0..50 {
        let th = ThetaSample(vec![mode.exp(), t2, t3]);
        let x = m.mean(&th, &tau).unwrap();
        let j = m.jacobian(&th, &tau).unwrap();
        let g: Vec<f64> = (0..tau.len()).map(|i| j[(i, 0)] * mode.exp()).collect();
        let grad = -(mode - mu) / var
            + g.iter()
                .zip(y.iter().zip(&x))
                .map(|(gi, (yi, xi))| gi * (yi - xi))
                .sum::<f64>()
                / (sigma * sigma);
        precision = 1.0 / var + g.iter().map(|v| v * v).sum::<f64>() / (sigma * sigma);
        mode += grad / precision;
    }

    // bootstrap over (sample, weight) pairs
    let mut boot_rng = stream(seed + 1, StreamId::Posterior);
    let raw: Vec<f64> = post.weights.clone();
    let reps: Vec<f64> = (0..200)
        .map(|_| {
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..samples {
                let k = (uniform(&mut boot_rng, 0.0, samples as f64) as usize).min(samples - 1);
                num += raw[k] * phi[k];
                den += raw[k];
            }
            num / den
        })
        .collect();
    let (_, se) = mean_se(&reps);
    let boot_se = se * (reps.len() as f64).sqrt();
    (est, mode, boot_se, precision.recip().sqrt())
}

#[test]
fn conjugate_reduction_matches_normal_approximation() {
    let (est, mode, se, _) = conjugate_reduction(0.1, 100_000, 21);
    assert!(
        (est - mode).abs() < 4.0 * se,
        "weighted mean {est} vs mode {mode} (bootstrap se {se:e})"
    );
}
