use std::path::PathBuf;

use clap::Args;
use curvlab_core::{MetricSpec, Region};
use serde::Serialize;

use crate::config::{CliError, CliResult};
use crate::output::{emit, Report, Table};
use crate::GlobalArgs;

/// File stem and builtin reference of every catalog entry.
const CATALOG: [(&str, &str); 5] = [
    ("flat", "flat(2)"),
    ("poincare_disk", "poincare_polydisk(1)"),
    ("poincare_polydisk", "poincare_polydisk(2)"),
    ("example22", "example22(2, 0.1)"),
    ("hopf", "hopf(2)"),
];

#[derive(Args, Debug, Clone, Serialize)]
pub struct FixturesArgs {
    /// Write each fixture as `DIR/NAME.json` in the metric-file format.
    #[arg(long)]
    pub write: Option<PathBuf>,
}

#[derive(Serialize)]
struct Entry {
    name: &'static str,
    builtin: String,
    n: usize,
    region: Region,
    entries: Vec<Vec<String>>,
    file: Option<String>,
}

pub fn run(g: &GlobalArgs, args: &FixturesArgs) -> CliResult<bool> {
    if let Some(dir) = &args.write {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {}", dir.display(), e)))?;
    }
    let mut results = Vec::new();
    for (name, builtin) in CATALOG {
        let spec = MetricSpec::from_builtin(builtin)?;
        let file = match &args.write {
            Some(dir) => {
                let path = dir.join(format!("{}.json", name));
                std::fs::write(&path, spec.to_json() + "\n")
                    .map_err(|e| CliError::Config(format!("cannot write {}: {}", path.display(), e)))?;
                Some(path.display().to_string())
            }
            None => None,
        };
        results.push(Entry {
            name,
            builtin: format!("builtin:{}", builtin.replace(' ', "")),
            n: spec.n,
            region: spec.region,
            entries: spec.entries.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect(),
            file,
        });
    }
    let mut table = Table::new(&["name", "builtin", "n", "region", "file"]);
    for e in &results {
        table.push(vec![
            e.name.to_string(),
            e.builtin.clone(),
            e.n.to_string(),
            serde_json::to_string(&e.region).unwrap_or_default(),
            e.file.clone().unwrap_or_default(),
        ]);
    }
    let report = Report {
        command: "fixtures",
        version: env!("CARGO_PKG_VERSION"),
        global: g,
        config: args,
        scheme: None,
        tolerance: None,
        passed: true,
        results,
    };
    emit(g, &report, &table)?;
    Ok(true)
}
