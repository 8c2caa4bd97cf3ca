//! Shared fixtures for the criterion benchmarks.

use std::path::PathBuf;

use hopfid_core::ProtocolRegistry;

/// Registry shipped in `data/jansen.json`, or the built-in one if missing.
pub fn shipped_registry() -> ProtocolRegistry {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/jansen.json");
    ProtocolRegistry::from_path(path).unwrap_or_else(|_| ProtocolRegistry::builtin())
}
