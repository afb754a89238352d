#![allow(dead_code)]

#[path = "../../../core/tests/common/oracle.rs"]
pub mod oracle;

pub mod fixtures;

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Rewrites committed fixtures instead of checking them when set.
pub fn regenerating() -> bool {
    std::env::var_os("REGENERATE_FIXTURES").is_some()
}
