//! Configuration-driven experiment runner.
//!
//! A run reads one TOML config naming an experiment and an optional table of
//! parameters for it, executes the experiment, and writes `manifest.toml`,
//! `series.csv` and any field dumps into the output directory.

pub mod corpus;
pub mod experiments;
pub mod lemma2;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::io::{write_field, write_toml, write_trajectory_archive};
use crate::solver::Trajectory;

pub use experiments::*;

/// Field snapshots kept per written trajectory archive.
const SNAPSHOTS_PER_TRAJECTORY: usize = 20;

/// Names accepted in the `experiment` key.
pub const EXPERIMENTS: [&str; 12] = [
    "partition-check",
    "bernstein",
    "embedding",
    "bony",
    "schauder",
    "wick",
    "regularity",
    "lemma2",
    "solve",
    "equivalence",
    "converge",
    "stability",
];

/// Parameters of the selected experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Experiment {
    PartitionCheck(PartitionParams),
    Bernstein(BernsteinParams),
    Embedding(EmbeddingParams),
    Bony(BonyParams),
    Schauder(SchauderParams),
    Wick(WickParams),
    Regularity(RegularityParams),
    Lemma2(Lemma2Params),
    Solve(SolveParams),
    Equivalence(EquivalenceParams),
    Converge(ConvergeParams),
    Stability(StabilityParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::PartitionCheck(_) => "partition-check",
            Experiment::Bernstein(_) => "bernstein",
            Experiment::Embedding(_) => "embedding",
            Experiment::Bony(_) => "bony",
            Experiment::Schauder(_) => "schauder",
            Experiment::Wick(_) => "wick",
            Experiment::Regularity(_) => "regularity",
            Experiment::Lemma2(_) => "lemma2",
            Experiment::Solve(_) => "solve",
            Experiment::Equivalence(_) => "equivalence",
            Experiment::Converge(_) => "converge",
            Experiment::Stability(_) => "stability",
        }
    }

    /// Default parameters of the named experiment.
    pub fn defaults(name: &str) -> Result<Self> {
        Self::parse(name, toml::Table::new())
    }

    fn parse(name: &str, section: toml::Table) -> Result<Self> {
        Ok(match name {
            "partition-check" => Experiment::PartitionCheck(section_params(name, section)?),
            "bernstein" => Experiment::Bernstein(section_params(name, section)?),
            "embedding" => Experiment::Embedding(section_params(name, section)?),
            "bony" => Experiment::Bony(section_params(name, section)?),
            "schauder" => Experiment::Schauder(section_params(name, section)?),
            "wick" => Experiment::Wick(section_params(name, section)?),
            "regularity" => Experiment::Regularity(section_params(name, section)?),
            "lemma2" => Experiment::Lemma2(section_params(name, section)?),
            "solve" => Experiment::Solve(section_params(name, section)?),
            "equivalence" => Experiment::Equivalence(section_params(name, section)?),
            "converge" => Experiment::Converge(section_params(name, section)?),
            "stability" => Experiment::Stability(section_params(name, section)?),
            other => {
                return Err(Error::config(
                    "experiment",
                    format!("unknown experiment `{other}`; expected one of {}", EXPERIMENTS.join(", ")),
                ))
            }
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Experiment::PartitionCheck(p) => p.validate(),
            Experiment::Bernstein(p) => p.validate(),
            Experiment::Embedding(p) => p.validate(),
            Experiment::Bony(p) => p.validate(),
            Experiment::Schauder(p) => p.validate(),
            Experiment::Wick(p) => p.validate(),
            Experiment::Regularity(p) => p.validate(),
            Experiment::Lemma2(p) => p.validate(),
            Experiment::Solve(p) => p.validate(),
            Experiment::Equivalence(p) => p.validate(),
            Experiment::Converge(p) => p.validate(),
            Experiment::Stability(p) => p.validate(),
        }
    }

    /// Override the experiment's Monte Carlo or corpus size.
    pub fn set_mc(&mut self, k: usize) {
        match self {
            Experiment::PartitionCheck(p) => p.fields = k,
            Experiment::Bernstein(p) => p.corpus.size = k,
            Experiment::Embedding(p) => p.corpus.size = k,
            Experiment::Bony(p) => {
                p.pairs = k;
                p.corpus.size = k;
            }
            Experiment::Schauder(p) => p.corpus.size = k,
            Experiment::Wick(p) => p.paths = k,
            Experiment::Regularity(p) => p.paths = k,
            Experiment::Lemma2(_) => {}
            Experiment::Solve(_) => {}
            Experiment::Equivalence(p) => p.paths = k,
            Experiment::Converge(p) => {
                p.noise_x.paths = k;
                p.noise_wick.paths = k;
                p.solution.paths = k;
            }
            Experiment::Stability(p) => p.pairs = k,
        }
    }

    fn execute(&self, seed: u64) -> Result<Outcome> {
        match self {
            Experiment::PartitionCheck(p) => run_partition_check(p, seed),
            Experiment::Bernstein(p) => run_bernstein(p, seed),
            Experiment::Embedding(p) => run_embedding(p, seed),
            Experiment::Bony(p) => run_bony(p, seed),
            Experiment::Schauder(p) => run_schauder(p, seed),
            Experiment::Wick(p) => run_wick(p, seed),
            Experiment::Regularity(p) => run_regularity(p, seed),
            Experiment::Lemma2(p) => run_lemma2(p),
            Experiment::Solve(p) => run_solve(p, seed),
            Experiment::Equivalence(p) => run_equivalence(p, seed),
            Experiment::Converge(p) => run_converge(p, seed),
            Experiment::Stability(p) => run_stability(p, seed),
        }
    }
}

fn section_params<T: DeserializeOwned>(name: &str, section: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(section)).map_err(|e| {
        let msg = e.to_string();
        let key = msg
            .split("unknown field `")
            .nth(1)
            .and_then(|rest| rest.split('`').next())
            .map(|field| format!("{name}.{field}"))
            .unwrap_or_else(|| name.to_string());
        Error::config(key, msg.trim().to_string())
    })
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub mc: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parse and validate; nothing is computed before every key has been checked.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.to_string().trim().to_string()))?;
        let name = match table.remove("experiment") {
            Some(toml::Value::String(s)) => s,
            Some(_) => return Err(Error::config("experiment", "must be a string")),
            None => return Err(Error::config("experiment", "missing")),
        };
        let section = match table.remove(&name) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(Error::config(name, "must be a table")),
            None => toml::Table::new(),
        };
        let mut experiment = Experiment::parse(&name, section)?;
        let seed = match table.remove("seed") {
            Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
            Some(_) => return Err(Error::config("seed", "must be a non-negative integer")),
            None => 0,
        };
        let mc = match table.remove("mc") {
            Some(toml::Value::Integer(k)) if k > 0 => Some(k as usize),
            Some(_) => return Err(Error::config("mc", "must be a positive integer")),
            None => None,
        };
        let out = match table.remove("out") {
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(Error::config("out", "must be a string")),
            None => None,
        };
        if let Some(key) = table.keys().next() {
            return Err(Error::config(key.clone(), format!("not a parameter of experiment `{name}`")));
        }
        if let Some(k) = mc {
            experiment.set_mc(k);
        }
        experiment.validate()?;
        Ok(Self { experiment, seed, mc, out })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Parse a config for an experiment named on the command line. The
    /// `experiment` key may be omitted; if present it must agree.
    pub fn for_experiment(name: &str, text: &str) -> Result<Self> {
        if !EXPERIMENTS.contains(&name) {
            return Err(Error::config("experiment", format!("unknown experiment `{name}`; expected one of {}", EXPERIMENTS.join(", "))));
        }
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("config", e.to_string().trim().to_string()))?;
        match table.get("experiment") {
            None => {
                table.insert("experiment".into(), name.into());
            }
            Some(toml::Value::String(s)) if s == name => {}
            Some(other) => return Err(Error::config("experiment", format!("config names {other} but the command line names `{name}`"))),
        }
        Self::from_toml_str(&toml::to_string(&table).map_err(|e| Error::InvalidInput(e.to_string()))?)
    }

    /// Defaults for the named experiment.
    pub fn defaults(name: &str) -> Result<Self> {
        Ok(Self { experiment: Experiment::defaults(name)?, seed: 0, mc: None, out: None })
    }

    /// Apply command-line overrides and re-validate.
    pub fn with_overrides(mut self, seed: Option<u64>, mc: Option<usize>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(k) = mc {
            if k == 0 {
                return Err(Error::config("mc", "must be a positive integer"));
            }
            self.mc = Some(k);
            self.experiment.set_mc(k);
        }
        if out.is_some() {
            self.out = out;
        }
        self.experiment.validate()?;
        Ok(self)
    }

    /// The effective configuration as TOML, echoed into the manifest.
    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::new();
        table.insert("experiment".into(), self.experiment.name().into());
        table.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        if let Some(k) = self.mc {
            table.insert("mc".into(), toml::Value::Integer(k as i64));
        }
        if let Some(o) = &self.out {
            table.insert("out".into(), o.display().to_string().into());
        }
        let params = toml::Value::try_from(&self.experiment).map_err(|e| Error::InvalidInput(e.to_string()))?;
        table.insert(self.experiment.name().into(), params);
        toml::to_string(&table).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// One pass/fail decision and the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    /// How `value` is compared with `tolerance`.
    pub rule: String,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, rule: "value <= tolerance".into() }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: (value - target).abs() <= tolerance,
            value,
            tolerance,
            rule: format!("|value - {target}| <= tolerance"),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, rule: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: if passed { 1.0 } else { 0.0 }, tolerance: 1.0, rule: rule.into() }
    }
}

/// A CSV table: header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma-separated, `.` decimal separator, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip representation of a float; deterministic across runs.
pub fn cell(v: f64) -> String {
    format!("{v:?}")
}

/// What an experiment produces before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub series: Table,
    pub summary: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub dumps: Vec<(String, Field)>,
    pub trajectories: Vec<(String, Trajectory)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub passed: bool,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<String>,
    /// The effective configuration, verbatim TOML.
    pub config: String,
    pub summary: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

/// Run the configured experiment and write its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let name = config.experiment.name();
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out").join(name));
    let echo = config.to_toml()?;
    let start = Instant::now();
    let outcome = config.experiment.execute(config.seed).map_err(|e| e.context(format!("experiment {name}")))?;
    let wall = start.elapsed().as_secs_f64();
    fs::create_dir_all(&out).map_err(|e| Error::from(e).context(format!("creating {}", out.display())))?;
    let mut artifacts = vec!["series.csv".to_string()];
    fs::write(out.join("series.csv"), outcome.series.to_csv())?;
    for (stem, field) in &outcome.dumps {
        fs::create_dir_all(out.join("fields"))?;
        write_field(&out.join("fields").join(stem), field, stem)?;
        artifacts.push(format!("fields/{stem}.bin"));
    }
    for (stem, traj) in &outcome.trajectories {
        let every = (traj.fields.len() / SNAPSHOTS_PER_TRAJECTORY).max(1);
        write_trajectory_archive(&out.join(stem), traj, stem, every)?;
        artifacts.push(format!("{stem}/trajectory.csv"));
    }
    let manifest = RunManifest {
        experiment: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        passed: outcome.passed(),
        wall_clock_seconds: wall,
        artifacts,
        config: echo,
        summary: outcome.summary,
        verdicts: outcome.verdicts,
    };
    write_toml(&out.join("manifest.toml"), &manifest)?;
    Ok(manifest)
}
