use depwsd::classify::{
    evaluate, load_model, lr_train, mlp_train, save_model, Classifier, Model, ModelFile, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Points on either side of `x + y = 0`, at least `margin` away from it.
fn separable(n: usize, margin: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < n {
        let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let side = p[0] * normal[0] + p[1] * normal[1];
        if side.abs() < margin {
            continue;
        }
        ys.push(u8::from(side > 0.0));
        xs.push(p.to_vec());
    }
    (xs, ys)
}

fn toy_mlp_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        batch_size: 4,
        max_epochs: 200,
        validation_fraction: 0.0,
        hidden: Some(2),
        ..TrainConfig::mlp().with_seed(seed)
    }
}

#[test]
fn two_hidden_units_fit_a_separable_set() {
    let (xs, ys) = separable(20, 0.5, 11);
    assert!(ys.contains(&0) && ys.contains(&1));
    for seed in 0..4 {
        let model = mlp_train(&xs, &ys, &toy_mlp_config(seed)).unwrap();
        assert_eq!(model.hidden, 2);
        assert_eq!(evaluate(&model, &xs, &ys).unwrap(), 1.0, "seed {seed}");
    }
}

#[test]
fn logistic_regression_fits_the_same_set() {
    let (xs, ys) = separable(20, 0.5, 11);
    let cfg = TrainConfig {
        l2: 1e-3,
        ..TrainConfig::logreg()
    };
    let model = lr_train(&xs, &ys, &cfg).unwrap();
    assert_eq!(evaluate(&model, &xs, &ys).unwrap(), 1.0);
    assert!(model.w[0] > 0.0 && model.w[1] > 0.0);
}

#[test]
fn training_is_a_function_of_the_seed() {
    let (xs, ys) = separable(40, 0.2, 5);
    let a = mlp_train(&xs, &ys, &toy_mlp_config(3)).unwrap();
    let b = mlp_train(&xs, &ys, &toy_mlp_config(3)).unwrap();
    let c = mlp_train(&xs, &ys, &toy_mlp_config(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.w1, c.w1);
}

#[test]
fn saved_models_predict_identically() {
    let (xs, ys) = separable(30, 0.3, 8);
    let probes = separable(50, 0.0, 9).0;
    let dir = tempfile::tempdir().unwrap();
    let models = [
        Model::Mlp(mlp_train(&xs, &ys, &toy_mlp_config(1)).unwrap()),
        Model::LogReg(lr_train(&xs, &ys, &TrainConfig::logreg()).unwrap()),
    ];
    for (k, model) in models.into_iter().enumerate() {
        let file = ModelFile {
            model,
            meta: [("variant".to_string(), "toy".to_string())].into(),
        };
        let path = dir.path().join(format!("m{k}.model"));
        save_model(&path, &file).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, file);
        for x in &probes {
            let p = file.model.prob_positive(x).unwrap();
            let q = back.model.prob_positive(x).unwrap();
            assert_eq!(p.to_bits(), q.to_bits());
            assert_eq!(file.model.predict(x).unwrap(), back.model.predict(x).unwrap());
        }
    }
}
