//! Scenario files (TOML) and rejection-table output.

use std::fs;
use std::io::Write;
use std::path::Path;

use cifeq_core::simulation::{monte_carlo, RejectionTable, Scenario};

use crate::error::{CliError, Result};

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.to_path_buf()),
        _ => CliError::Io(e),
    })?;
    parse_scenario(&text)
}

pub fn run_simulation(path: &Path) -> Result<(Scenario, RejectionTable)> {
    let sc = load_scenario(path)?;
    let table = monte_carlo(&sc)?;
    Ok((sc, table))
}

/// Columns `scenario_id,test,proportion,se,wallclock_s`.
pub fn write_rejection_csv<W: Write>(tables: &[RejectionTable], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario_id", "test", "proportion", "se", "wallclock_s"])?;
    for t in tables {
        for r in &t.rows {
            w.write_record([
                r.scenario_id.clone(),
                r.test.to_string(),
                r.proportion.to_string(),
                r.se.to_string(),
                format!("{:.3}", r.wallclock_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
