//! Bit-exact JSON encodings for doubles.
//!
//! Arrays are stored as base64 of their little-endian IEEE-754 bytes and
//! scalars as the 16-digit hex of their bit pattern, so round trips never
//! pass through decimal.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{de, Deserialize, Deserializer, Serializer};

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(s: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of doubles", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn encode_f64(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn decode_f64(s: &str) -> Result<f64, String> {
    u64::from_str_radix(s.trim_start_matches("0x"), 16)
        .map(f64::from_bits)
        .map_err(|e| e.to_string())
}

/// `#[serde(with = "serial::f64_array")]`
pub mod f64_array {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_f64s(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let s = String::deserialize(d)?;
        decode_f64s(&s).map_err(de::Error::custom)
    }
}

/// `#[serde(with = "serial::f64_bits")]`
pub mod f64_bits {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_f64(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode_f64(&s).map_err(de::Error::custom)
    }
}
