use std::path::Path;

use tsk_core::data::write_dense_csv;

use super::create;
use crate::config::RunConfig;
use crate::error::Result;

/// Writes the configured synthetic dataset to `out` as CSV.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let cfg = RunConfig { data: crate::config::DataConfig { path: None, ..cfg.data.clone() }, ..cfg.clone() };
    let ds = cfg.load_data(cfg.seed)?;
    write_dense_csv(&ds, create(out)?)?;
    Ok(())
}
