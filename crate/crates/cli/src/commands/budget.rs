use std::path::Path;

use slim_core::metrics::{flop_reduction, memory_reduction, ArchConfig, SchemeConfig};

use crate::args::BudgetArgs;
use crate::error::{CliError, CliResult};

fn load_arch(name_or_path: &str) -> CliResult<ArchConfig> {
    if let Some(arch) = ArchConfig::preset(name_or_path) {
        return Ok(arch);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        let names: Vec<_> = ArchConfig::preset_names().collect();
        return Err(CliError::Usage(format!(
            "'{name_or_path}' is neither a file nor a preset (presets: {})",
            names.join(", ")
        )));
    }
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {name_or_path}"), e))?;
    ArchConfig::from_json(&text).map_err(|e| CliError::Usage(e.to_string()))
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

pub fn run(a: BudgetArgs) -> CliResult {
    let arch = load_arch(&a.arch)?;
    let scheme = SchemeConfig {
        density: a.density,
        weight_bits: a.wbits,
        dense_bits: a.dense_bits,
        rank_ratio: a.rank_ratio,
        adapter_bits: a.adapter_bits,
        sparsity_metadata_bits: a.metadata_bits,
    };
    let memory = memory_reduction(&arch, &scheme)?;
    let flops = flop_reduction(&arch, &scheme)?;
    if a.json {
        let out = serde_json::json!({ "memory_reduction": round4(memory), "flop_reduction": round4(flops) });
        println!("{out}");
    } else {
        println!("memory_reduction {memory:.4}");
        println!("flop_reduction {flops:.4}");
    }
    Ok(())
}
