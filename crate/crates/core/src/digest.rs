use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

/// SHA-256 hex digest of the compact JSON encoding of `value`.
///
/// Struct fields serialise in declaration order and maps used in hashed
/// values are `BTreeMap`s, so the encoding is canonical.
pub(crate) fn json_sha256<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
