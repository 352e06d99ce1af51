//! Canonical JSON: object keys sorted, no insignificant whitespace.
//!
//! Audit payloads and exports are compared byte-for-byte, so every snapshot
//! goes through here rather than through a type's own field order.

use serde::Serialize;

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<serde_json::Value> {
    // serde_json's Map is a BTreeMap (preserve_order is not enabled), so
    // routing through Value sorts every object's keys.
    serde_json::to_value(value)
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_value(value)?)
}

pub fn to_vec<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    serde_json::to_vec(&to_value(value)?)
}
