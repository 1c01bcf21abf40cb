use std::fs;
use std::path::{Path, PathBuf};

use inkbench_core::experiment::ProtocolConfig;
use inkbench_core::sensor::{spec_from_toml, MaterialParams, SensorSpec};
use inkbench_core::toolpath::{CureSchedule, PrintParams};
use serde::Deserialize;

use crate::Failure;

/// Environment variable naming a workbench config file.
pub const CONFIG_ENV: &str = "INKBENCH_CONFIG";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Paths {
    specs_dir: Option<PathBuf>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Repeatability {
    pub sensors: usize,
    /// Relative spread applied to resistivity or permittivity per sensor.
    pub material_std_rel: f64,
}

impl Default for Repeatability {
    fn default() -> Self {
        Self {
            sensors: 7,
            material_std_rel: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    paths: Paths,
    print: PrintParams,
    protocol: ProtocolConfig,
    cure: CureSchedule,
    repeatability: Repeatability,
    materials: Option<toml::Table>,
}

/// Workbench defaults. Relative paths resolve against the config file's
/// directory, or the working directory when no file is used.
#[derive(Debug, Clone)]
pub struct WorkbenchConfig {
    pub specs_dir: PathBuf,
    pub output_dir: PathBuf,
    pub print: PrintParams,
    pub protocol: ProtocolConfig,
    pub cure: CureSchedule,
    pub repeatability: Repeatability,
    /// Material keys layered over each kind's defaults.
    pub materials: Option<toml::Table>,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        Self::from_raw(RawConfig::default(), Path::new(".")).expect("defaults are valid")
    }
}

impl WorkbenchConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input("config", format!("{}: {e}", path.display())))?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| Failure::input("config", format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Self::from_raw(raw, base)
    }

    fn from_raw(raw: RawConfig, base: &Path) -> Result<Self, Failure> {
        let resolve = |p: Option<PathBuf>| match p {
            Some(p) if p.is_relative() => base.join(p),
            Some(p) => p,
            None => base.to_path_buf(),
        };
        let explicit_specs = raw.paths.specs_dir.is_some();
        let specs_dir = resolve(raw.paths.specs_dir);
        let output_dir = resolve(raw.paths.output_dir);
        if explicit_specs && !specs_dir.is_dir() {
            return Err(Failure::input(
                "config",
                format!("specs_dir {} is not a directory", specs_dir.display()),
            ));
        }
        if let Some(parent) = output_dir.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(Failure::input(
                    "config",
                    format!("output_dir parent {} does not exist", parent.display()),
                ));
            }
        }
        raw.print
            .validate()
            .map_err(|e| Failure::input("config", e.to_string()))?;
        raw.protocol
            .validate()
            .map_err(|e| Failure::input("config", e.to_string()))?;
        if let Some(m) = &raw.materials {
            // the layer must at least deserialize on its own
            let mut t = toml::Table::try_from(MaterialParams::default())
                .map_err(|e| Failure::internal("config", e.to_string()))?;
            t.extend(m.clone());
            let params: MaterialParams = toml::Value::Table(t)
                .try_into()
                .map_err(|e| Failure::input("config", format!("materials: {e}")))?;
            params
                .validate()
                .map_err(|e| Failure::input("config", e.to_string()))?;
        }
        if raw.repeatability.sensors < 2 {
            return Err(Failure::input(
                "config",
                "repeatability.sensors must be at least 2".into(),
            ));
        }
        if !(raw.repeatability.material_std_rel >= 0.0) {
            return Err(Failure::input(
                "config",
                "repeatability.material_std_rel must be non-negative".into(),
            ));
        }
        Ok(Self {
            specs_dir,
            output_dir,
            print: raw.print,
            protocol: raw.protocol,
            cure: raw.cure,
            repeatability: raw.repeatability,
            materials: raw.materials,
        })
    }

    /// `--config`, then the environment variable, then built-in defaults.
    pub fn discover(flag: Option<&Path>) -> Result<Self, Failure> {
        match flag {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    /// A spec path as given, or else relative to the specs directory.
    pub fn spec_path(&self, given: &Path) -> PathBuf {
        if given.is_relative() && !given.exists() {
            let candidate = self.specs_dir.join(given);
            if candidate.exists() {
                return candidate;
            }
        }
        given.to_path_buf()
    }

    pub fn load_spec(&self, given: &Path) -> Result<SensorSpec, Failure> {
        let path = self.spec_path(given);
        let text = fs::read_to_string(&path)
            .map_err(|e| Failure::input("spec", format!("{}: {e}", path.display())))?;
        spec_from_toml(&text, self.materials.as_ref())
            .map_err(|e| Failure::input("spec", format!("{}: {e}", path.display())))
    }
}
