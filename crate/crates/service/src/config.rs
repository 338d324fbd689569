use std::fmt;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use trajseg_core::SegmenterParams;

/// Environment variable overriding [`ServiceConfig::listen`].
pub const ENV_LISTEN: &str = "TRAJ_LISTEN";
/// Environment variable overriding [`ServiceConfig::data_dir`].
pub const ENV_DATA_DIR: &str = "TRAJ_DATA_DIR";

/// Service settings. Read from a TOML file (every key optional), then
/// `TRAJ_LISTEN` / `TRAJ_DATA_DIR` override the file.
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// data_dir = "./trajseg-data"
/// min_r = 15.0
/// min_density = 0.1
/// cors_allow = ["http://localhost:5173"]
/// raw_cap = 100000
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    /// Segmenter parameters for a fresh store. An existing store in
    /// `data_dir` keeps the parameters it was built with.
    pub min_r: f64,
    pub min_density: f64,
    /// Allowed browser origins; `"*"` allows any. Empty disables CORS.
    pub cors_allow: Vec<String>,
    /// Largest raw slice served, in points; bigger requests get 413.
    pub raw_cap: usize,
    /// Largest accepted request body (CSV uploads), in bytes.
    pub max_body_bytes: usize,
    /// Largest heatmap grid served, in cells.
    pub max_heat_cells: usize,
    /// Write the store back to `data_dir` after every ingest.
    pub persist: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("./trajseg-data"),
            min_r: 15.0,
            min_density: 0.1,
            cors_allow: Vec::new(),
            raw_cap: 100_000,
            max_body_bytes: 256 << 20,
            max_heat_cells: 4_000_000,
            persist: true,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ServiceConfig {
    /// File (if any) plus overrides from `env`; validated.
    pub fn load(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(v) = env(ENV_LISTEN) {
            cfg.listen = v;
        }
        if let Some(v) = env(ENV_DATA_DIR) {
            cfg.data_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_process_env(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(path, |k| std::env::var(k).ok())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen
            .parse()
            .map_err(|e| ConfigError(format!("listen: {:?} is not host:port ({e})", self.listen)))
    }

    pub fn params(&self) -> Result<SegmenterParams, ConfigError> {
        SegmenterParams::new(self.min_r, self.min_density).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        self.params()?;
        if self.raw_cap == 0 {
            return Err(ConfigError("raw_cap: must be at least 1".into()));
        }
        if self.max_heat_cells == 0 {
            return Err(ConfigError("max_heat_cells: must be at least 1".into()));
        }
        Ok(())
    }

    /// Creates `data_dir` if needed and checks it is writable.
    pub fn prepare_data_dir(&self) -> Result<(), ConfigError> {
        let fail = |e: std::io::Error| ConfigError(format!("data_dir {}: {e}", self.data_dir.display()));
        fs::create_dir_all(&self.data_dir).map_err(fail)?;
        let probe = self.data_dir.join(".write-probe");
        fs::write(&probe, b"ok").map_err(fail)?;
        fs::remove_file(&probe).map_err(fail)?;
        Ok(())
    }
}
