use xai_alignment::blackbox::LinearModel;
use xai_alignment::datagen::{gen_loan_independent, gen_random_linear};
use xai_alignment::lime::LimeConfig;
use xai_alignment::matrix::Matrix;
use xai_alignment::metrics::{evaluate, DEFAULT_EPS1, DEFAULT_EPS2};
use xai_alignment::mitigate::{
    average_over_models, average_shap_lime, borda_aggregate, borda_points, explain_with, explained_instances,
    pipeline_from_sweep, recommended_pipeline, Aggregation, EnsembleSpec, ExplainerCfg, PipelineConfig, Strategy,
};
use xai_alignment::models::{complexity_sweep, TrainConfig};
use xai_alignment::shap::{self, ShapConfig};

fn lime_cfg(seed: u64) -> ExplainerCfg {
    ExplainerCfg::Lime {
        cfg: LimeConfig {
            seed,
            ..Default::default()
        },
        n_seeds: 1,
    }
}

#[test]
fn single_model_single_explainer_is_identity() {
    let m = [LinearModel::new(vec![1.0, -2.0, 0.5], 0.1)];
    let ex = [lime_cfg(3)];
    let spec = EnsembleSpec {
        models: &m,
        explainers: &ex,
        aggregation: Aggregation::Mean,
        max_normalize_before_mix: false,
    };
    let xi = [0.2, 0.4, -1.0];
    assert_eq!(
        average_over_models(&spec, &xi).unwrap(),
        explain_with(&m[0], &ex[0], &xi).unwrap()
    );
}

#[test]
fn opposite_models_cancel() {
    let m = [
        LinearModel::new(vec![1.0, -2.0, 0.5], 0.0),
        LinearModel::new(vec![-1.0, 2.0, -0.5], 0.0),
    ];
    let ex = [ExplainerCfg::Shap {
        cfg: ShapConfig::default(),
        normalize: false,
    }];
    let spec = EnsembleSpec {
        models: &m,
        explainers: &ex,
        aggregation: Aggregation::Mean,
        max_normalize_before_mix: false,
    };
    let v = average_over_models(&spec, &[0.3, 0.6, -0.9]).unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-12), "{v:?}");
}

#[test]
fn shap_lime_mix_example() {
    assert_eq!(average_shap_lime(&[2.0, 1.0], &[4.0, 2.0]).unwrap(), vec![1.0, 0.5]);
    let same = average_shap_lime(&[3.0, -1.0, 2.0], &[3.0, -1.0, 2.0]).unwrap();
    assert_eq!(same, vec![1.0, -1.0 / 3.0, 2.0 / 3.0]);
}

#[test]
fn borda_examples() {
    assert_eq!(borda_aggregate(&[vec![2, 0, 1]]).unwrap(), vec![2, 0, 1]);
    let ballots = vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2]];
    assert_eq!(borda_points(&ballots).unwrap(), vec![8, 6, 4]);
    assert_eq!(borda_aggregate(&ballots).unwrap(), vec![0, 1, 2]);

    // Every permutation of three candidates once: a full tie.
    let all = vec![
        vec![0, 1, 2],
        vec![0, 2, 1],
        vec![1, 0, 2],
        vec![1, 2, 0],
        vec![2, 0, 1],
        vec![2, 1, 0],
    ];
    let pts = borda_points(&all).unwrap();
    assert!(pts.iter().all(|&p| p == pts[0]));
    assert_eq!(borda_aggregate(&all).unwrap(), vec![0, 1, 2]);
}

fn small_cfg() -> PipelineConfig {
    PipelineConfig {
        m: 3,
        hidden_grid: vec![2, 3, 4, 5, 6],
        seed_grid: vec![1, 2, 3, 4],
        epsilon_auc: 1.0,
        n_models: 10,
        sweep_epochs: 5,
        train: TrainConfig::default(),
        lime_nu: 1e4,
        lime_samples: 500,
        lime_seeds: 10,
        shap_permutations: 100,
        ..Default::default()
    }
}

#[test]
fn lime_track_uses_hundred_explainers_per_instance() {
    let g = gen_random_linear(4, 400, 3).unwrap();
    let out = recommended_pipeline(&g.dataset, Strategy::LimeTrack, &small_cfg()).unwrap();
    assert_eq!(out.models.len(), 10);
    assert_eq!(out.explainers_per_instance, 100);
    assert_eq!(out.explanations.rows(), 3);
    let again = recommended_pipeline(&g.dataset, Strategy::LimeTrack, &small_cfg()).unwrap();
    assert_eq!(out.explanations, again.explanations);
}

#[test]
fn shap_track_is_normalized_shap_of_one_model() {
    let g = gen_random_linear(4, 400, 3).unwrap();
    let cfg = small_cfg();
    let sweep = complexity_sweep(
        &g.dataset,
        &cfg.hidden_grid,
        &cfg.seed_grid,
        cfg.epsilon_auc,
        1,
        &cfg.train,
        cfg.sweep_epochs,
    )
    .unwrap();
    let out = pipeline_from_sweep(&g.dataset, Strategy::ShapTrack, &cfg, &sweep).unwrap();
    assert_eq!(out.models.len(), 1);
    assert_eq!(out.explainers_per_instance, 1);
    let bg = g.dataset.train_means();
    for (i, &r) in out.instances.iter().enumerate() {
        let xi = g.dataset.x.row(r);
        let e = shap::shap_exact(
            &out.models[0],
            xi,
            &ShapConfig {
                background: Some(bg.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        let want = shap::normalize_shap(&e, xi, &bg, shap::DEFAULT_EPS_DIV).unwrap().values;
        for (a, b) in out.explanations.row(i).iter().zip(&want) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }
}

#[test]
fn model_averaging_does_not_hurt_concordance_on_independent_data() {
    let g = gen_loan_independent(3000, 12).unwrap();
    let ds = &g.dataset;
    let beta = g.truth.observed_beta();
    let sweep = complexity_sweep(
        ds,
        &[10],
        &(1..=10).collect::<Vec<_>>(),
        1.0,
        10,
        &TrainConfig::default(),
        150,
    )
    .unwrap();
    assert_eq!(sweep.selected.len(), 10);
    assert!(sweep.selected.iter().all(|m| m.test_auc().unwrap() >= 0.9));
    let ex = [lime_cfg(77)];
    let rows = explained_instances(ds, 60);
    let single_spec = EnsembleSpec {
        models: &sweep.selected[..1],
        explainers: &ex,
        aggregation: Aggregation::Mean,
        max_normalize_before_mix: false,
    };
    let ens_spec = EnsembleSpec {
        models: &sweep.selected[..],
        ..single_spec
    };
    let explain_all = |spec: &EnsembleSpec<'_, _>| {
        Matrix::from_rows(
            &rows
                .iter()
                .map(|&r| average_over_models(spec, ds.x.row(r)).unwrap())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    };
    let single = evaluate(
        &explain_all(&single_spec),
        &beta,
        &ds.feature_names,
        &[3],
        DEFAULT_EPS1,
        DEFAULT_EPS2,
    )
    .unwrap();
    let ens = evaluate(
        &explain_all(&ens_spec),
        &beta,
        &ds.feature_names,
        &[3],
        DEFAULT_EPS1,
        DEFAULT_EPS2,
    )
    .unwrap();
    assert!(
        ens.concordance_mean >= single.concordance_mean,
        "ensemble {} vs single {}",
        ens.concordance_mean,
        single.concordance_mean
    );
}
