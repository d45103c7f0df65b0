use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use randbc_core::MatrixKind;

/// Optional TOML configuration; keys mirror the command-line flags.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub matrix_type: Vec<String>,
    pub size: Option<usize>,
    pub recursions: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub precision: Option<String>,
    pub perturb_sigma: Option<f64>,
    pub perturb_extra: Option<usize>,
    pub variant: Option<String>,
    #[serde(default)]
    pub algorithm: Vec<String>,
    pub schedule: Option<String>,
    pub formula: Option<PathBuf>,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn parse_kinds(names: &[String]) -> Result<Vec<MatrixKind>> {
    let mut kinds = Vec::new();
    for name in names.iter().flat_map(|n| n.split(',')).map(str::trim).filter(|n| !n.is_empty()) {
        if name == "all" {
            kinds.extend(MatrixKind::ALL);
        } else {
            kinds.push(name.parse()?);
        }
    }
    kinds.sort();
    kinds.dedup();
    Ok(kinds)
}

/// `N` means `1..=N`; `A-B` an inclusive range; otherwise a comma list.
pub fn parse_recursions(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<usize>().with_context(|| format!("bad recursion depth '{t}'"));
    let out: Vec<usize> = if s.contains(',') {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<_>>()?
    } else if let Some((a, b)) = s.split_once('-') {
        (num(a)?..=num(b)?).collect()
    } else {
        (1..=num(s)?).collect()
    };
    if out.is_empty() {
        bail!("empty recursion list '{s}'");
    }
    Ok(out)
}
