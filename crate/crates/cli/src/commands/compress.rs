use std::collections::BTreeMap;

use rayon::prelude::*;
use slim_core::adapter::{saliency_vector, SaliencyVector};
use slim_core::io::{serialize_compressed_layer, CalibrationStats};
use slim_core::pipeline::{compress_layer, error_report};
use slim_core::{ErrorReport, LayerCompressionConfig, Matrix, SlimError};

use crate::args::CompressArgs;
use crate::error::{CliError, CliResult};
use crate::load;

fn config(a: &CompressArgs) -> LayerCompressionConfig {
    LayerCompressionConfig {
        quant_method: a.quant.into(),
        weight_bits: a.wbits,
        group_size: a.group_size,
        sparsity: a.sparsity.0,
        prune_scores: a.scores.into(),
        adapter_method: a.lora.into(),
        rank_ratio: a.rank_ratio,
        quantize_adapters: a.quantize_lora,
        adapter_bits: a.lora_bits,
        adapter_group_size: a.group_size,
        input_fp8: a.input_fp8,
        channel_scaling: None,
    }
}

struct Shared<'a> {
    cfg: &'a LayerCompressionConfig,
    calib: Option<&'a CalibrationStats>,
    inputs: Option<&'a Matrix>,
    args: &'a CompressArgs,
}

fn compress_one(name: &str, w: &Matrix, ctx: &Shared<'_>) -> CliResult<ErrorReport> {
    let uniform;
    let stats = match ctx.calib {
        Some(s) => s,
        None => {
            uniform = CalibrationStats::uniform(w.rows());
            &uniform
        }
    };
    let mut layer = compress_layer(w, stats, ctx.cfg).map_err(|e| match e {
        SlimError::ShapeMismatch(msg) => SlimError::ShapeMismatch(format!("{name}: {msg}")),
        other => other,
    })?;
    layer = layer.with_name(name);
    layer.provenance.created_unix = load::source_date_epoch();
    serialize_compressed_layer(&layer, ctx.args.out.join(load::artifact_name(name)))?;

    let identity;
    let x_eval = match ctx.inputs {
        Some(x) => x,
        None => {
            identity = Matrix::identity(w.rows());
            &identity
        }
    };
    let saliency = match ctx.calib {
        Some(s) => saliency_vector(s)?,
        None => SaliencyVector::constant(w.rows(), 1.0)?,
    };
    Ok(error_report(w, &layer, x_eval, &saliency)?)
}

pub fn run(a: CompressArgs) -> CliResult {
    let cfg = config(&a);
    cfg.validate()?;
    if cfg.needs_calibration() && a.calib.is_none() {
        return Err(CliError::Usage(
            "--calib is required for slim adapters, slim-o quantization and wanda-scored pruning"
                .into(),
        ));
    }
    let weights = load::matrices(&a.weights)?;
    let calib = match &a.calib {
        Some(p) => Some(CalibrationStats::from_tensors(&load::container(p)?)?),
        None => None,
    };
    let inputs = match &a.inputs {
        Some(p) => Some(load::single_matrix(p)?),
        None => None,
    };
    load::create_dir(&a.out)?;

    let ctx = Shared {
        cfg: &cfg,
        calib: calib.as_ref(),
        inputs: inputs.as_ref(),
        args: &a,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    let results: Vec<CliResult<ErrorReport>> = pool.install(|| {
        weights
            .par_iter()
            .map(|(name, w)| compress_one(name, w, &ctx))
            .collect()
    });

    let mut reports = BTreeMap::new();
    for ((name, _), r) in weights.iter().zip(results) {
        let r = r?;
        println!(
            "{name}: weight_mse {:.4e} weighted_mse {:.4e} output_mse {:.4e} density {:.4} bits/weight {:.3}",
            r.weight_mse, r.weighted_weight_mse, r.output_mse, r.density, r.effective_bits_per_weight
        );
        reports.insert(name.clone(), r);
    }
    if let Some(path) = &a.report {
        load::write_text(
            path,
            &serde_json::to_string_pretty(&reports).expect("report serializes"),
        )?;
    }
    Ok(())
}
