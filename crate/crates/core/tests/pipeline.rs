use proptest::prelude::*;
use slim_core::adapter::saliency_vector;
use slim_core::fixtures::{gaussian_matrix, laplace_matrix};
use slim_core::io::artifact::layer_to_tensors;
use slim_core::io::compute_calibration;
use slim_core::io::container::to_bytes;
use slim_core::pipeline::{
    compress_layer, error_report, layer_output, AdapterMethod, ChannelScalingParams, QuantMethod,
    ScoreMethod,
};
use slim_core::tensor::rng::seeded;
use slim_core::{LayerCompressionConfig, SparsityPattern};

fn quant() -> impl Strategy<Value = QuantMethod> {
    prop_oneof![
        Just(QuantMethod::Absmax),
        Just(QuantMethod::GroupAbsmax),
        Just(QuantMethod::SlimQuant),
        Just(QuantMethod::SlimQuantO),
        Just(QuantMethod::None),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slim_adapter_never_increases_weighted_error(
        seed in any::<u64>(), groups in 2usize..8, d_out in 2usize..16, q in quant(), bits in 2u32..=8, rank_ratio in 0.05f32..1.0,
    ) {
        let mut rng = seeded(seed);
        let d_in = 4 * groups;
        let w = gaussian_matrix(&mut rng, d_in, d_out, 0.05);
        let x = laplace_matrix(&mut rng, 24, d_in, 1.0);
        let stats = compute_calibration([&x]).unwrap();
        let base = LayerCompressionConfig { quant_method: q, weight_bits: bits, adapter_method: AdapterMethod::None, ..Default::default() };
        let with = LayerCompressionConfig { adapter_method: AdapterMethod::Slim, rank_ratio: Some(rank_ratio), ..base.clone() };
        let a = compress_layer(&w, &stats, &base).unwrap();
        let b = compress_layer(&w, &stats, &with).unwrap();
        let sal = saliency_vector(&stats).unwrap();
        let ra = error_report(&w, &a, &x, &sal).unwrap();
        let rb = error_report(&w, &b, &x, &sal).unwrap();
        prop_assert!(rb.weighted_weight_mse <= ra.weighted_weight_mse * (1.0 + 1e-5) + 1e-12);

        let mask = b.mask.as_ref().unwrap();
        let stored = b.stored_weight();
        for j in 0..d_out {
            for g in 0..groups {
                let kept = (4 * g..4 * g + 4).filter(|&i| mask.is_kept(i, j)).count();
                prop_assert_eq!(kept, 2);
                prop_assert!((4 * g..4 * g + 4).filter(|&i| stored.get(i, j) != 0.0).count() <= 2);
            }
        }
    }

    #[test]
    fn compression_is_deterministic(seed in any::<u64>(), q in quant(), unstructured in any::<bool>(), naive in any::<bool>()) {
        let mut rng = seeded(seed);
        let w = gaussian_matrix(&mut rng, 16, 9, 0.1);
        let x = gaussian_matrix(&mut rng, 10, 16, 1.0);
        let stats = compute_calibration([&x]).unwrap();
        let cfg = LayerCompressionConfig {
            quant_method: q,
            sparsity: Some(if unstructured { SparsityPattern::Unstructured { ratio: 0.3 } } else { SparsityPattern::SemiStructured { n: 2, m: 4 } }),
            adapter_method: if naive { AdapterMethod::Naive } else { AdapterMethod::Slim },
            quantize_adapters: true,
            ..Default::default()
        };
        let a = compress_layer(&w, &stats, &cfg).unwrap();
        let b = compress_layer(&w, &stats, &cfg).unwrap();
        prop_assert_eq!(to_bytes(&layer_to_tensors(&a)), to_bytes(&layer_to_tensors(&b)));
    }

    #[test]
    fn scaling_without_quantization_keeps_outputs(seed in any::<u64>(), d_in in 1usize..40, d_out in 1usize..12, fraction in 0.01f32..1.0, magnitude in any::<bool>()) {
        let mut rng = seeded(seed);
        let w = gaussian_matrix(&mut rng, d_in, d_out, 0.1);
        let x = laplace_matrix(&mut rng, 8, d_in, 1.0);
        let stats = compute_calibration([&x]).unwrap();
        let plain = LayerCompressionConfig {
            prune_scores: if magnitude { ScoreMethod::Magnitude } else { ScoreMethod::Wanda },
            ..LayerCompressionConfig::identity()
        };
        let scaled = LayerCompressionConfig { channel_scaling: Some(ChannelScalingParams { fraction, factor: 2.0 }), ..plain.clone() };
        let y0 = layer_output(&x, &compress_layer(&w, &stats, &plain).unwrap()).unwrap();
        let y1 = layer_output(&x, &compress_layer(&w, &stats, &scaled).unwrap()).unwrap();
        let gap = y1.sub(&y0).unwrap().frobenius_norm() / y0.frobenius_norm().max(1e-12);
        prop_assert!(gap <= 1e-6);
    }
}
