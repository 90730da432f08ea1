//! End-to-end flows across module boundaries.

use std::sync::Arc;

use dsekl::data::generate_xor;
use dsekl::kernel::KernelSpec;
use dsekl::model::{load_model, save_model, DecisionModel};
use dsekl::optimizer::{train_serial, TrainConfig};
use dsekl::rng::rng_from_seed;

#[test]
fn linear_kernel_cannot_separate_xor() {
    // the class pattern is sign(x1 * x2); any linear decision function is
    // near chance on it
    let data = Arc::new(generate_xor(1000, &mut rng_from_seed(17)));
    let test = Arc::new(generate_xor(1000, &mut rng_from_seed(18)));
    let config = TrainConfig {
        grad_batch_size: 100,
        expansion_size: 50,
        lambda: 1e-3,
        eta0: 0.1,
        max_epochs: 30,
        seed: 3,
        ..TrainConfig::default()
    };
    let (model, _) = train_serial(&data, &KernelSpec::linear(), &config, None).unwrap();
    let err = model.error_rate(&test).unwrap();
    assert!(err > 0.4, "linear model reached {err} on XOR");

    let (rbf_model, _) = train_serial(&data, &KernelSpec::rbf(1.0).unwrap(), &config, None).unwrap();
    let rbf_err = rbf_model.error_rate(&test).unwrap();
    assert!(rbf_err < 0.1, "RBF reference failed to learn: {rbf_err}");
}

#[test]
fn train_save_load_predict_pipeline() {
    let data = Arc::new(generate_xor(120, &mut rng_from_seed(5)));
    let test = Arc::new(generate_xor(200, &mut rng_from_seed(6)));
    let config = TrainConfig {
        max_epochs: 40,
        seed: 12,
        ..TrainConfig::default()
    };
    let spec = KernelSpec::rbf(1.0).unwrap();
    let (model, record) = train_serial(&data, &spec, &config, Some(&test)).unwrap();
    assert!(record.last_validation_error().is_some());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("xor.model");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();

    let direct = model.predict(&test).unwrap();
    let via_file = loaded.predict(&test).unwrap();
    assert_eq!(direct, via_file, "predictions changed across save/load");
    assert!(model.error_rate(&test).unwrap() < 0.15);
}
