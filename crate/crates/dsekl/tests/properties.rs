//! Property tests for the structural invariants: kernel symmetry and range,
//! block/pointwise agreement, serialization round-trips, partition and split
//! coverage, and sampling contracts.

use std::sync::Arc;

use proptest::prelude::*;

use dsekl::data::{parse_libsvm, split, write_libsvm, Dataset, SparseRow};
use dsekl::kernel::{eval_kernel, gram_block, KernelSpec};
use dsekl::model::{load_model, save_model, DecisionModel, DualModel};
use dsekl::model_selection::two_fold_split;
use dsekl::objective::objective_value;
use dsekl::optimizer::{sample_indices, train_serial, StepSchedule, TrainConfig};
use dsekl::parallel::partition_batches;
use dsekl::rng::rng_from_seed;

fn row_strategy(dim: usize) -> impl Strategy<Value = SparseRow> {
    prop::collection::vec(-3.0f64..3.0, dim).prop_map(|v| SparseRow::from_dense(&v))
}

fn dataset_strategy(max_n: usize) -> impl Strategy<Value = Dataset> {
    (1usize..=max_n, 1usize..=4).prop_flat_map(|(n, dim)| {
        (
            prop::collection::vec(row_strategy(dim), n),
            prop::collection::vec(prop::bool::ANY, n),
        )
            .prop_map(|(rows, signs)| {
                let labels = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
                Dataset::new(rows, labels).expect("uniform dim by construction")
            })
    })
}

fn spec_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|s| KernelSpec::rbf(s).unwrap()),
        Just(KernelSpec::linear()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_with_unit_diagonal(
        a in row_strategy(3),
        b in row_strategy(3),
        spec in spec_strategy(),
    ) {
        let kab = eval_kernel(&a, &b, &spec).unwrap();
        let kba = eval_kernel(&b, &a, &spec).unwrap();
        prop_assert_eq!(kab, kba);
        if matches!(spec.family, dsekl::kernel::KernelFamily::Rbf) {
            prop_assert!(kab > 0.0 && kab <= 1.0, "RBF value {} out of (0, 1]", kab);
            let kaa = eval_kernel(&a, &a, &spec).unwrap();
            prop_assert!((kaa - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_block_agrees_with_pointwise_kernel(
        data in dataset_strategy(12),
        spec in spec_strategy(),
        seed in 0u64..1000,
    ) {
        let mut rng = rng_from_seed(seed);
        let rows = sample_indices(data.len(), 5, &mut rng);
        let cols = sample_indices(data.len(), 7, &mut rng);
        let block = gram_block(&data, &rows, &cols, &spec).unwrap();
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                let direct = eval_kernel(data.row(i), data.row(j), &spec).unwrap();
                prop_assert_eq!(block.get(bi, bj), direct);
            }
        }
    }

    #[test]
    fn libsvm_round_trip_is_identity(data in dataset_strategy(20)) {
        let mut buf = Vec::new();
        write_libsvm(&mut buf, &data).unwrap();
        let back = parse_libsvm(&buf[..]).unwrap();
        prop_assert_eq!(back.len(), data.len());
        for i in 0..data.len() {
            prop_assert_eq!(back.label(i), data.label(i));
            prop_assert_eq!(back.row(i).indices(), data.row(i).indices());
            prop_assert_eq!(back.row(i).values(), data.row(i).values());
        }
    }

    #[test]
    fn model_file_round_trip_preserves_decisions(
        data in dataset_strategy(10),
        alphas in prop::collection::vec(-2.0f64..2.0, 10),
        zero_mask in prop::collection::vec(prop::bool::ANY, 10),
        probe in row_strategy(3),
    ) {
        let n = data.len();
        let alpha: Vec<f64> = (0..n)
            .map(|j| if zero_mask[j] { 0.0 } else { alphas[j] })
            .collect();
        let spec = KernelSpec::rbf(1.3).unwrap();
        let model = DualModel::new(alpha, Arc::new(data.clone()), spec).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        prop_assert_eq!(loaded.support().len(), model.support().len());
        if data.dim() == probe.dim() {
            let direct = model.decision(&probe).unwrap();
            let via_file = loaded.decision(&probe).unwrap();
            prop_assert!((direct - via_file).abs() < 1e-12,
                "decision drifted through the file: {} vs {}", direct, via_file);
        }
    }

    #[test]
    fn sample_indices_are_distinct_and_in_range(
        n in 1usize..200,
        size in 1usize..250,
        seed in 0u64..1000,
    ) {
        let mut rng = rng_from_seed(seed);
        let idx = sample_indices(n, size, &mut rng);
        prop_assert_eq!(idx.len(), size.min(n));
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), idx.len(), "duplicate indices");
        prop_assert!(idx.iter().all(|&i| i < n));
        if size >= n {
            prop_assert_eq!(idx, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn partition_blocks_are_disjoint_sized_and_in_range(
        n in 1usize..300,
        b in 1usize..100,
        k in 1usize..6,
        seed in 0u64..1000,
    ) {
        let mut rng = rng_from_seed(seed);
        let (grad, exp) = partition_batches(n, b, k, &mut rng);
        for family in [&grad, &exp] {
            prop_assert!(!family.is_empty());
            let mut seen = vec![false; n];
            for block in family {
                prop_assert_eq!(block.len(), b.min(n));
                for &i in block {
                    prop_assert!(i < n);
                    prop_assert!(!seen[i], "index {} appears in two blocks", i);
                    seen[i] = true;
                }
            }
        }
    }

    #[test]
    fn split_produces_disjoint_rounded_subsets(
        data in dataset_strategy(40),
        f1 in 0.1f64..0.5,
        f2 in 0.1f64..0.5,
        seed in 0u64..1000,
    ) {
        let parts = split(&data, &[f1, f2], &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(parts.len(), 2);
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let expect_total = ((f1 * data.len() as f64).round() as usize
            + (f2 * data.len() as f64).round() as usize)
            .min(data.len());
        prop_assert_eq!(total, expect_total);
    }

    #[test]
    fn two_folds_partition_everything(n in 4usize..200, seed in 0u64..1000) {
        let (a, b) = two_fold_split(n, &mut rng_from_seed(seed));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(a.len().abs_diff(b.len()) <= 1);
    }

    #[test]
    fn objective_dominates_regularizer(
        data in dataset_strategy(8),
        raw_alpha in prop::collection::vec(-1.5f64..1.5, 8),
        lambda in 1e-4f64..1.0,
    ) {
        let n = data.len();
        let alpha = raw_alpha[..n].to_vec();
        let sq: f64 = alpha.iter().map(|a| a * a).sum();
        let spec = KernelSpec::rbf(1.0).unwrap();
        let model = DualModel::new(alpha, Arc::new(data), spec).unwrap();
        let batch: Vec<usize> = (0..n).collect();
        let obj = objective_value(&model, &batch, lambda).unwrap();
        prop_assert!(obj >= lambda * sq - 1e-12);
        prop_assert!(obj.is_finite());
    }

    #[test]
    fn one_epoch_support_fits_in_sampled_coordinates(
        seed in 0u64..500,
        j in 1usize..10,
    ) {
        let data = Arc::new(dsekl::data::generate_xor(40, &mut rng_from_seed(7)));
        let config = TrainConfig {
            grad_batch_size: 40,
            expansion_size: j,
            max_epochs: 1,
            seed,
            step_schedule: StepSchedule::InverseIter,
            ..TrainConfig::default()
        };
        let spec = KernelSpec::rbf(1.0).unwrap();
        let (model, _) = train_serial(&data, &spec, &config, None).unwrap();
        prop_assert!(model.support().len() <= j, "support {} > J {}", model.support().len(), j);
    }
}
