use std::fs;
use std::path::Path;

use super::types::Network;
use super::validate::validate;
use crate::error::{Error, Result};

/// Reads and validates a JSON network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let net: Network = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let violations = validate(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(net).expect("network serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
