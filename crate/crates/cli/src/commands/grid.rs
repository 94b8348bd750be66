use std::path::{Path, PathBuf};

use dualcloak::evaluation::comparison_grid;
use dualcloak::image::{load_image, save_image};

use crate::error::{CliError, CliResult};
use crate::util::list_images;

/// Parses `LABEL=PATH[,PATH...]`; a directory expands to its images in
/// name order.
pub fn parse_row(spec: &str) -> CliResult<(String, Vec<PathBuf>)> {
    let (label, paths) = spec
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("grid row `{spec}` is not LABEL=PATH[,PATH...]")))?;
    let mut out = Vec::new();
    for p in paths.split(',').filter(|p| !p.is_empty()) {
        let p = PathBuf::from(p);
        if p.is_dir() {
            out.extend(list_images(&p)?.into_values());
        } else {
            out.push(p);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("grid row `{label}` has no images")));
    }
    Ok((label.to_string(), out))
}

pub fn cmd_grid(rows: &[(String, Vec<PathBuf>)], out: &Path) -> CliResult<()> {
    let mut loaded = Vec::with_capacity(rows.len());
    for (label, paths) in rows {
        let imgs = paths.iter().map(load_image).collect::<Result<Vec<_>, _>>()?;
        loaded.push((label.clone(), imgs));
    }
    let grid = comparison_grid(&loaded).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        crate::util::create_dir(dir)?;
    }
    save_image(&grid, out)?;
    Ok(())
}
