//! Run a configured experiment end to end and read back its manifest.

use chx::harness::{run, ExperimentConfig};
use chx::Result;

const CONFIG: &str = r#"
experiment = "partition-check"
seed = 42

[partition-check]
grids = [{ d = 1, n = 128 }, { d = 2, n = 32 }]
fields = 5
"#;

fn main() -> Result<()> {
    let out = std::env::temp_dir().join("chx-examples").join("partition-check");
    let config = ExperimentConfig::from_toml_str(CONFIG)?.with_overrides(None, None, Some(out.clone()))?;
    let manifest = run(&config)?;
    for v in &manifest.verdicts {
        println!("{} {}: {:.2e}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.value);
    }
    println!("artifacts in {}: {:?}", out.display(), manifest.artifacts);
    print!("{}", std::fs::read_to_string(out.join("series.csv"))?);
    Ok(())
}
