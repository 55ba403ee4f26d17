use slim_core::fixtures::generate;
use slim_core::io::{write_container, Tensor, TensorMap};

use crate::args::FixtureArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: FixtureArgs) -> CliResult {
    if !(a.scale.is_finite() && a.scale > 0.0) {
        return Err(CliError::Usage(format!(
            "--scale must be positive, got {}",
            a.scale
        )));
    }
    let m = generate(a.dist, a.shape.0, a.shape.1, a.scale, a.seed);
    let mut map = TensorMap::new();
    map.insert(a.name.clone(), Tensor::from_matrix(&m));
    write_container(&a.out, &map)?;
    println!(
        "{} {}x{} seed {} -> {}",
        a.dist,
        a.shape.0,
        a.shape.1,
        a.seed,
        a.out.display()
    );
    Ok(())
}
