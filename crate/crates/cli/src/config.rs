//! Optional TOML configuration; command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use unitlint_core::deduction::MiningConfig;
use unitlint_core::units::{parse_frame, parse_unit_string, UnitType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Human,
    Json,
}

/// Trusted conversion function: unit string with an optional frame.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Conversion {
    Unit(String),
    Framed { unit: String, frame: String },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub protocol: Option<PathBuf>,
    pub qoi: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub format: Option<Format>,
    pub dedup: Option<bool>,
    #[serde(default)]
    pub ignore_fns: Vec<String>,
    #[serde(default)]
    pub conversions: BTreeMap<String, Conversion>,
    pub mining: Option<MiningConfig>,
}

impl Config {
    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.protocol, &mut cfg.qoi, &mut cfg.db]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(m) = &cfg.mining {
            m.validate()
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(cfg)
    }

    pub fn conversion_units(&self) -> Result<BTreeMap<String, UnitType>, String> {
        self.conversions
            .iter()
            .map(|(name, c)| {
                let (unit, frame) = match c {
                    Conversion::Unit(u) => (u.as_str(), "Any"),
                    Conversion::Framed { unit, frame } => (unit.as_str(), frame.as_str()),
                };
                let bad = |e: String| format!("conversion `{name}`: {e}");
                let u = parse_unit_string(unit).map_err(|e| bad(e.to_string()))?;
                let f = parse_frame(frame).map_err(|e| bad(e.to_string()))?;
                Ok((name.clone(), u.with_frame(f)))
            })
            .collect()
    }
}
