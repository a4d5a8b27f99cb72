//! Provenance headers and number formatting shared by every output file.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "ladder-inversion";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the compact JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize infallibly");
    hex::encode(Sha256::digest(&bytes))
}

/// `# ladder-inversion <version> config_sha256=<hash>`
pub fn header_line(hash: &str) -> String {
    format!("# {TOOL_NAME} {TOOL_VERSION} config_sha256={hash}")
}

/// Twelve significant digits in scientific notation.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "NaN".to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(hash: &str) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_sha256: hash.to_string(),
        }
    }
}

/// Drops `#` comment lines, leaving the data section of a CSV file.
pub fn data_section(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_round_trips_at_twelve_digits() {
        for x in [0.451_300_123_456_789_f64, -1.0, 1e-17, 123456.789012345] {
            let s = sig12(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(sig12(back), s);
            assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&vec![1.0, 2.0]);
        assert_eq!(a, config_hash(&vec![1.0, 2.0]));
        assert_ne!(a, config_hash(&vec![1.0, 2.5]));
        assert_eq!(a.len(), 64);
    }
}
