//! Project layer: `vl.toml`, `vl.lock`, the dependency cache and build
//! planning.

pub mod error;
pub mod fetch;
pub mod lockfile;
pub mod manifest;
pub mod resolve;

pub use error::{ProjectError, Warning};
pub use fetch::{Cache, Fetcher, GitFetcher};
pub use lockfile::{LockEntry, Lockfile, LOCK_FILE};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use resolve::{build_plan, discover_sources, resolve_dependencies, DependencySource, PlanUnit, Resolved};
