//! Running a JSON scenario file the way the `simulate` subcommand does and
//! listing the artifacts it writes.
//!
//! ```bash
//! cargo run --release -p apdsim --example run_config -- crates/core/configs/branching.json /tmp/apdsim-run
//! ```

use std::path::PathBuf;

use apdsim::cli::cmd_simulate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/linear_regime_n1.json"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("apdsim-run"));

    let run = cmd_simulate(&config, None, Some(&out))?;
    for f in &run.files {
        println!("wrote {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&run.summary)?);
    Ok(())
}
