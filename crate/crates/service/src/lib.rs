//! HTTP facade over the trajectory stores and query engine.
//!
//! Index-only routes read nothing but the summary index; the raw store is
//! read by the raw-slice route, the heatmap and hybrid queries only.

pub mod api;
pub mod config;

pub use api::{router, ApiError, AppState};
pub use config::{ConfigError, ServiceConfig, ENV_DATA_DIR, ENV_LISTEN};

use trajseg_core::store::Database;

/// Opens the store in `cfg.data_dir`, or creates an empty one.
pub fn open_database(cfg: &ServiceConfig) -> Result<Database, ConfigError> {
    cfg.prepare_data_dir()?;
    if Database::exists(&cfg.data_dir) {
        let db = Database::open(&cfg.data_dir)
            .map_err(|e| ConfigError(format!("data_dir {}: {e}", cfg.data_dir.display())))?;
        if *db.params() != cfg.params()? {
            eprintln!(
                "note: store in {} keeps its own parameters {:?}",
                cfg.data_dir.display(),
                db.params()
            );
        }
        Ok(db)
    } else {
        Database::new(cfg.params()?).map_err(|e| ConfigError(e.to_string()))
    }
}
