//! The same path the `bench` subcommand takes: a TOML config in, run CSVs and
//! a summary out.
//!
//! cargo run --release --example bench_from_config

use std::path::Path;

use moccas::config::ExperimentConfig;
use moccas::experiment;

const CONFIG: &str = r#"
problem = "ridges"
dim = 3
objectives = 2
pool_size = 1500
policies = ["random", "one_step", "moc_cas"]
trials = 2
n_init = 10
budget = 30
t_at = [10, 20]
"#;

fn main() -> moccas::Result<()> {
    let config = ExperimentConfig::from_toml_str(CONFIG, Path::new("inline.toml"))?;
    let out = std::env::temp_dir().join("moccas-bench-example");
    let report = experiment::bench(&config, &out, 0)?;
    println!("config hash {}", report.config_hash);
    println!("wrote {}", out.display());
    for entry in std::fs::read_dir(out.join("runs"))? {
        println!("  runs/{}", entry?.file_name().to_string_lossy());
    }
    println!("{}", std::fs::read_to_string(out.join("summary.json"))?);
    Ok(())
}
