pub mod eval;
pub mod gradcheck;
pub mod hsweep;
pub mod sweep;
pub mod synth;
pub mod train;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

pub use eval::{cmd_eval, EvalSplit};
pub use gradcheck::{cmd_gradcheck, GradCheckSummary};
pub use hsweep::{cmd_hsweep, HSweepSummary};
pub use sweep::cmd_sweep;
pub use synth::cmd_synth;
pub use train::{cmd_train, RunReport};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
