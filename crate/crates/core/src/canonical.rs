//! Canonical JSON encoding and the hashing helpers built on it.
//!
//! The encoding is plain JSON with three restrictions: object keys are
//! emitted in byte order, no whitespace is written between tokens, and
//! only integers are allowed as numbers. Binary fields are carried as
//! unpadded base64url strings (see [`b64`]).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Errors from canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CanonicalError {
    #[error("value cannot be represented as JSON: {0}")]
    NotJson(String),
    #[error("floating-point numbers are not canonical")]
    Float,
}

/// Serializes `value` into canonical JSON bytes.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    let tree = serde_json::to_value(value).map_err(|e| CanonicalError::NotJson(e.to_string()))?;
    let mut out = Vec::with_capacity(256);
    write_value(&tree, &mut out)?;
    Ok(out)
}

/// Canonical encoding of an already-parsed JSON tree.
pub fn value_to_canonical_bytes(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    let mut out = Vec::with_capacity(256);
    write_value(value, &mut out)?;
    Ok(out)
}

fn write_value(value: &Value, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.extend_from_slice(alloc::format!("{i}").as_bytes());
            } else if let Some(u) = n.as_u64() {
                out.extend_from_slice(alloc::format!("{u}").as_bytes());
            } else {
                return Err(CanonicalError::Float);
            }
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_unstable_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(k, out);
                out.push(b':');
                write_value(v, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    out.push(b'"');
    for ch in s.chars() {
        match ch {
            '"' => out.extend_from_slice(b"\\\""),
            '\\' => out.extend_from_slice(b"\\\\"),
            '\n' => out.extend_from_slice(b"\\n"),
            '\r' => out.extend_from_slice(b"\\r"),
            '\t' => out.extend_from_slice(b"\\t"),
            '\u{08}' => out.extend_from_slice(b"\\b"),
            '\u{0c}' => out.extend_from_slice(b"\\f"),
            c if (c as u32) < 0x20 => {
                out.extend_from_slice(alloc::format!("\\u{:04x}", c as u32).as_bytes());
            }
            c => {
                let mut buf = [0u8; 4];
                out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
    }
    out.push(b'"');
}

/// SHA-256 digest of `bytes`.
pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(sha256(bytes))
}

/// Lowercase hex SHA-256 of the canonical encoding of `value`.
pub fn canonical_hash<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonicalError> {
    Ok(sha256_hex(&to_canonical_bytes(value)?))
}

/// True if `s` is a 64-character lowercase hex string.
pub fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

pub fn b64url_encode(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

pub fn b64url_decode(s: &str) -> Result<Vec<u8>, base64::DecodeError> {
    URL_SAFE_NO_PAD.decode(s)
}

/// Serde adapter for byte fields stored as unpadded base64url.
pub mod b64 {
    use alloc::string::String;
    use alloc::vec::Vec;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&super::b64url_encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        super::b64url_decode(&s).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use serde_json::json;

    #[test]
    fn keys_are_sorted() {
        let mut m = BTreeMap::new();
        m.insert("b", 1);
        m.insert("a", 2);
        assert_eq!(to_canonical_bytes(&m).unwrap(), br#"{"a":2,"b":1}"#.to_vec());
        let v = json!({"b": 1, "a": {"z": [1, 2], "y": null}});
        assert_eq!(
            value_to_canonical_bytes(&v).unwrap(),
            br#"{"a":{"y":null,"z":[1,2]},"b":1}"#.to_vec()
        );
    }

    #[test]
    fn byte_order_not_locale_order() {
        let v = json!({"a": 1, "B": 2, "_": 3, "é": 4});
        assert_eq!(
            value_to_canonical_bytes(&v).unwrap(),
            "{\"B\":2,\"_\":3,\"a\":1,\"é\":4}".as_bytes().to_vec()
        );
    }

    #[test]
    fn floats_are_rejected() {
        assert_eq!(value_to_canonical_bytes(&json!({"x": 1.5})), Err(CanonicalError::Float));
    }

    #[test]
    fn integers_minimal() {
        let v = json!([0, -1, 42, u64::MAX, i64::MIN]);
        assert_eq!(
            value_to_canonical_bytes(&v).unwrap(),
            b"[0,-1,42,18446744073709551615,-9223372036854775808]".to_vec()
        );
    }

    #[test]
    fn strings_escape_controls() {
        let v = json!("a\"b\\c\nd\u{01}");
        assert_eq!(value_to_canonical_bytes(&v).unwrap(), br#""a\"b\\c\nd\u0001""#.to_vec());
    }

    #[test]
    fn canonical_output_parses_back() {
        let v = json!({"k": ["x", {"n": -3}], "e": "\u{2603}"});
        let bytes = value_to_canonical_bytes(&v).unwrap();
        let back: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(is_sha256_hex(&sha256_hex(b"")));
        assert!(!is_sha256_hex("ABC"));
    }

    #[test]
    fn b64_no_padding() {
        assert_eq!(b64url_encode(&[0x80]), "gA");
        assert_eq!(b64url_decode("gA").unwrap(), vec![0x80]);
        assert!(b64url_decode("gA==").is_err());
    }
}
