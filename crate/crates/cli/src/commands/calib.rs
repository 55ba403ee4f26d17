use slim_core::io::{write_container, CalibrationAccumulator};

use crate::args::CalibArgs;
use crate::error::CliResult;
use crate::load;

pub fn run(a: CalibArgs) -> CliResult {
    let batches = load::matrices(&a.inputs)?;
    let mut acc = CalibrationAccumulator::new(batches[0].1.cols());
    for (name, x) in &batches {
        log::debug!("calibration batch '{name}': {}x{}", x.rows(), x.cols());
        acc.push(x)?;
    }
    let stats = acc.finish()?;
    write_container(&a.out, &stats.to_tensors())?;
    println!(
        "calibration: {} channels, {} tokens -> {}",
        stats.d_in,
        stats.token_count,
        a.out.display()
    );
    Ok(())
}
