//! On-disk form of a constructed extension: `bundle.json` holds the
//! configuration and every intermediate object, `grid.bin` the envelope grid
//! as row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lft::{EnvelopeGrid, GridAxis};
use crate::pipeline::{ExtensionResult, PipelineConfig};

pub const BUNDLE_VERSION: &str = "1";
pub const BUNDLE_FILE: &str = "bundle.json";
pub const GRID_FILE: &str = "grid.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    version: String,
    config: PipelineConfig,
    result: ExtensionResult,
    /// Axes of `grid.bin`, absent when no grid was built.
    grid: Option<Vec<GridAxis>>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: PipelineConfig,
    pub result: ExtensionResult,
}

pub fn write_bundle(dir: &Path, config: &PipelineConfig, result: &ExtensionResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = BundleFile {
        version: BUNDLE_VERSION.into(),
        config: config.clone(),
        result: result.clone(),
        grid: result.grid.as_ref().map(|g| g.axes.clone()),
    };
    fs::write(dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&file)?)?;
    let grid_path = dir.join(GRID_FILE);
    match &result.grid {
        Some(g) => fs::write(grid_path, g.to_bytes())?,
        None if grid_path.exists() => fs::remove_file(grid_path)?,
        None => {}
    }
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let text = fs::read_to_string(dir.join(BUNDLE_FILE))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(BUNDLE_VERSION) => {}
        other => {
            return Err(Error::Parse(format!(
                "unsupported bundle version {other:?}, expected \"{BUNDLE_VERSION}\""
            )))
        }
    }
    let file: BundleFile = serde_json::from_value(value)?;
    let mut result = file.result;
    result.grid = match file.grid {
        Some(axes) => Some(EnvelopeGrid::from_bytes(axes, &fs::read(dir.join(GRID_FILE))?)?),
        None => None,
    };
    Ok(Bundle { config: file.config, result })
}
