mod common;

use advdesign::estimate::{criterion, k_hat, Objective};
use advdesign::exchange::{candidate_pool, point_exchange};
use advdesign::linalg::{cholesky_unit_det, determinant, AdversaryParams, Matrix};
use advdesign::models::{
    mean_fisher, reparameterized_expected_fisher, AnyModel, Design, FisherModel, GeostatModel,
    PkModel, PoissonMode, PoissonModel,
};
use advdesign::rng::{stream, StreamId};
use common::{random_design, symmetric_eigenvalues};
use proptest::prelude::*;

fn eta_strategy() -> impl Strategy<Value = AdversaryParams> {
    (1usize..=6).prop_flat_map(|p| {
        prop::collection::vec(-3.0f64..3.0, AdversaryParams::len_for(p))
            .prop_map(move |v| AdversaryParams::new(p, v).unwrap())
    })
}

fn model_strategy() -> impl Strategy<Value = AnyModel> {
    prop_oneof![
        Just(AnyModel::Poisson(
            PoissonModel::new(2.0, 1.0, PoissonMode::PerTheta).unwrap()
        )),
        Just(AnyModel::Poisson(PoissonModel::default())),
        Just(AnyModel::Pk(PkModel::default())),
        Just(AnyModel::Geostat(
            GeostatModel::new(1.0, 3.0, 0.05, 12, 1e3).unwrap()
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unit_determinant(eta in eta_strategy()) {
        let a = cholesky_unit_det(&eta);
        prop_assert!((determinant(&a) - 1.0).abs() < 1e-12);
        for i in 0..a.rows() {
            prop_assert!(a[(i, i)] > 0.0);
            for j in i + 1..a.rows() {
                prop_assert_eq!(a[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn fisher_symmetric_psd(model in model_strategy(), seed in 0u64..10_000) {
        let mut rng = stream(seed, StreamId::Theta);
        let theta = model.sample_prior(1, &mut rng).remove(0);
        let tau = random_design(&model, &mut rng).natural();
        let f = model.fisher(&theta, &tau).unwrap();
        let scale = f.max_abs().max(f64::MIN_POSITIVE);
        prop_assert!(f.asymmetry() <= 1e-10 * scale);
        for ev in symmetric_eigenvalues(&f) {
            prop_assert!(ev >= -1e-10 * scale, "eigenvalue {} (scale {})", ev, scale);
        }
    }

    #[test]
    fn k_hat_depends_on_a_only_through_a_at(
        model in model_strategy(),
        seed in 0u64..10_000,
        raw in prop::collection::vec(-1.5f64..1.5, 9),
    ) {
        let p = model.spec().p;
        let mut rng = stream(seed, StreamId::Theta);
        let batch = model.sample_prior(3, &mut rng);
        let design = random_design(&model, &mut rng);
        // general square A with a well-conditioned A Aᵀ
        let mut a = Matrix::from_row_major(p, p, raw[..p * p].to_vec()).unwrap();
        for i in 0..p {
            a[(i, i)] += 2.0;
        }
        let l = a.matmul(&a.transpose()).unwrap().cholesky().unwrap();
        let k1 = k_hat(&model, &batch, &design, &a).unwrap();
        let k2 = k_hat(&model, &batch, &design, &l).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-10 * k1.abs().max(1e-300));
    }

    #[test]
    fn adv_criterion_scales_with_det_b(
        model in model_strategy(),
        seed in 0u64..10_000,
        raw in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let p = model.spec().p;
        let mut rng = stream(seed, StreamId::Theta);
        let batch = model.sample_prior(4, &mut rng);
        let tau = random_design(&model, &mut rng).natural();
        let fbar = mean_fisher(&model, &batch, &tau).unwrap();
        let mut b = Matrix::from_row_major(p, p, raw[..p * p].to_vec()).unwrap();
        for i in 0..p {
            b[(i, i)] += 2.5;
        }
        let det_b = determinant(&b);
        let reparam = reparameterized_expected_fisher(&fbar, &b).unwrap();
        let want = criterion(&fbar, Objective::Adv) / (det_b * det_b);
        let got = criterion(&reparam, Objective::Adv);
        prop_assert!((got - want).abs() <= 1e-8 * want.abs(), "{} vs {}", got, want);
    }

    #[test]
    fn point_exchange_never_decreases_j(seed in 0u64..10_000, fig in any::<bool>()) {
        let model = PkModel::default();
        let kind = if fig { Objective::Fig } else { Objective::Adv };
        let mut rng = stream(seed, StreamId::Diagnostic);
        let fixed = model.sample_prior(20, &mut rng);
        let tau = random_design(&model, &mut rng).natural();
        let pool = candidate_pool(&tau, 1, 2.0);
        let out = point_exchange(&model, &fixed, &tau, &pool, kind, 50).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
        prop_assert!(out.j_hat_after >= out.j_hat_before * (1.0 - 1e-12));
    }

    #[test]
    fn logit_design_round_trips(natural in prop::collection::vec(0.001f64..0.999, 1..5)) {
        let d = Design::from_natural(&natural, advdesign::models::ConstraintMode::LogitTransformed).unwrap();
        for (a, b) in d.natural().iter().zip(&natural) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
