//! Content hashes used for cache keys, config pinning and manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Hash of the compact JSON encoding of `value`. Struct field order is fixed
/// by the type definition, so this is stable for a given schema.
pub fn json_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(bytes)
}
