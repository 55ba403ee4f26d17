use slim_core::quantizer::{dense_grid_search, slimquant_search, SearchParams};
use slim_core::AbsHistogram;

use crate::args::OracleArgs;
use crate::error::CliResult;
use crate::load;

pub fn run(a: OracleArgs) -> CliResult {
    for (name, w) in load::matrices(&a.weights)? {
        let hist = AbsHistogram::build(&w, a.bins)?;
        let dense = dense_grid_search(&hist, a.wbits, a.grid_points as usize)?;
        let found = slimquant_search(&hist, a.wbits, SearchParams::default())?;
        let ratio = if dense.error > 0.0 {
            found.error / dense.error
        } else if found.error == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        println!(
            "{name}: grid alpha {:.6} error {:.6e} | search alpha {:.6} error {:.6e} | ratio {ratio:.4}",
            dense.alpha, dense.error, found.alpha, found.error
        );
    }
    Ok(())
}
