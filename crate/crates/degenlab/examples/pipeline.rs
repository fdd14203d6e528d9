//! End-to-end run through the experiment runner: renormalization trace, PDE
//! solve, cross-checks (shoring of the renormalized family, fitted decay
//! constant), and the hashed artifact manifest, the same path the
//! `degenlab` binary drives from a JSON config.
//!
//! ```text
//! cargo run --release --example pipeline
//! ```

use degenlab::experiment::{run, ExperimentConfig};

fn main() {
    let config = ExperimentConfig::from_json(
        r#"{
            "command": "pipeline",
            "seed": 7,
            "output_dir": "target/pipeline-demo",
            "threads": 2,
            "modulus": {"family": "power", "alpha": 1.0, "domain_end": 1e300},
            "renorm": {"beta": 0.75, "depth": 40},
            "pde": {
                "mesh": 0.002,
                "boundary": {"offset": 0.9428090415820634},
                "xi_sweep": [0.0, 10.0],
                "fit_depth": 4
            }
        }"#,
    )
    .unwrap();

    let base = std::env::current_dir().unwrap();
    let manifest = run(&config, &base).unwrap();

    println!("pipeline finished in {:.2}s; artifacts:", manifest.wall_time_secs);
    for entry in &manifest.outputs {
        println!("  {:<24} {:>9} bytes  sha256 {}", entry.path, entry.bytes, &entry.sha256[..16]);
    }
    let dir = base.join("target/pipeline-demo");
    println!("\ncross-check summary ({}):", dir.join("pipeline.json").display());
    println!("{}", std::fs::read_to_string(dir.join("pipeline.json")).unwrap());
}
