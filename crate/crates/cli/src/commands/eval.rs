use slim_core::adapter::saliency_vector;
use slim_core::io::{compute_calibration, deserialize_compressed_layer};
use slim_core::pipeline::error_report;
use slim_core::SlimError;

use crate::args::EvalArgs;
use crate::error::CliResult;
use crate::load;

pub fn run(a: EvalArgs) -> CliResult {
    let layer = deserialize_compressed_layer(&a.compressed)?;
    let originals = load::matrices(&a.original)?;
    let wanted = a.tensor.clone().or_else(|| layer.provenance.name.clone());
    let w = match wanted {
        Some(name) => originals
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| {
                SlimError::SchemaViolation(format!(
                    "tensor '{name}' not in {}",
                    a.original.display()
                ))
            })?,
        None if originals.len() == 1 => originals.into_iter().next().expect("one tensor").1,
        None => {
            return Err(SlimError::SchemaViolation(
                "original holds several tensors; pass --tensor".into(),
            )
            .into())
        }
    };
    let x = load::single_matrix(&a.inputs)?;
    let saliency = saliency_vector(&compute_calibration([&x])?)?;
    let report = error_report(&w, &layer, &x, &saliency)?;
    println!(
        "weight_mse {:.6e} weighted_mse {:.6e} output_mse {:.6e} output_mse_no_adapter {:.6e} density {:.4} bits/weight {:.3}",
        report.weight_mse,
        report.weighted_weight_mse,
        report.output_mse,
        report.output_mse_no_adapter,
        report.density,
        report.effective_bits_per_weight
    );
    if let Some(path) = &a.report {
        load::write_text(
            path,
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?;
    }
    Ok(())
}
