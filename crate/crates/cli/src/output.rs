//! Artifact emission: field files and the run summary.

use crate::{Cli, Format};
use serde_json::{Map, Value};
use std::time::Instant;
use weakhj_core::hamiltonian::bounds_ledger;
use weakhj_core::{GridField, Result, SystemSpec};

/// Collected summary.json content. Every run writes one; failures surface
/// before the write, so a summary on disk means the command completed.
pub struct Summary {
    map: Map<String, Value>,
}

impl Summary {
    pub fn new(cli: &Cli) -> Self {
        let mut map = Map::new();
        map.insert("command".into(), format!("{:?}", cli.command).into());
        map.insert("seed".into(), cli.seed.into());
        map.insert("threads".into(), crate::thread_cap().into());
        if let Some(g) = cli.grid {
            map.insert("grid_override".into(), g.into());
        }
        Summary { map }
    }

    /// Echo the parsed config back into the summary so runs are auditable
    /// without the original file.
    pub fn echo_config(&mut self, cfg: &weakhj_core::ConfigFile) {
        self.map
            .insert("config_echo".into(), format!("{cfg:?}").into());
    }

    pub fn record_ledger(&mut self, spec: &SystemSpec) {
        match bounds_ledger(spec) {
            Ok(ledger) => {
                self.map
                    .insert("ledger".into(), serde_json::to_value(&ledger).unwrap());
            }
            Err(e) => {
                self.map.insert("ledger_error".into(), e.to_string().into());
            }
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.map.insert(key.into(), value);
    }

    /// Writes summary.json. Wall time is the one nondeterministic field.
    pub fn finish(mut self, cli: &Cli, start: Instant, outcome: &str) -> Result<()> {
        self.map.insert("outcome".into(), outcome.into());
        self.map
            .insert("wall_time_s".into(), start.elapsed().as_secs_f64().into());
        let text = serde_json::to_string_pretty(&Value::Object(self.map))?;
        std::fs::write(cli.out.join("summary.json"), text)?;
        Ok(())
    }
}

/// Writes one file per component, `<stem>_component_<i>.<ext>`.
pub fn write_fields(cli: &Cli, stem: &str, fields: &[GridField]) -> Result<()> {
    for (i, f) in fields.iter().enumerate() {
        match cli.format {
            Format::Csv => {
                let mut buf = Vec::new();
                f.write_csv(&mut buf)?;
                std::fs::write(cli.out.join(format!("{stem}_component_{i}.csv")), buf)?;
            }
            Format::Json => {
                let grid = f.grid();
                let xs: Vec<f64> = grid.nodes().collect();
                let v = serde_json::json!({ "x": xs, "value": f.values() });
                std::fs::write(
                    cli.out.join(format!("{stem}_component_{i}.json")),
                    serde_json::to_string_pretty(&v)?,
                )?;
            }
        }
    }
    Ok(())
}
