//! Persistence: manifests, descriptor caches, metric models, and reports.

pub mod cache;
pub mod manifest;
pub mod model;
pub mod report;

pub use cache::{read_cache, read_cache_checked, read_cache_header, write_cache, CacheHeader};
pub use manifest::{load_manifest, manifest_from_camera_dirs, parse_manifest, write_manifest};
pub use model::{read_model, read_model_header, write_model, ModelHeader};
pub use report::{report_to_json, write_rank_csv, write_report_json};
