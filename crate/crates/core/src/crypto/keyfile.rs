//! Plain-text key export: one `name value` pair per line, big integers in hex.
//!
//! ```text
//! lambda 128
//! p <hex>
//! q <hex>
//! g <hex>
//! h <hex>
//! s <hex>
//! ```

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use super::{CryptoError, GroupParams, PublicKey, SecretKey};
use crate::hex::{parse_hex, to_hex};

const FIELDS: [&str; 6] = ["lambda", "p", "q", "g", "h", "s"];

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("lambda {stated} does not match the {actual}-bit modulus")]
    LambdaMismatch { stated: u64, actual: u64 },
    #[error(transparent)]
    Invalid(#[from] CryptoError),
}

pub fn format_key_file(pk: &PublicKey, sk: &SecretKey) -> String {
    format!(
        "lambda {}\np {}\nq {}\ng {}\nh {}\ns {}\n",
        pk.bits(),
        to_hex(pk.p()),
        to_hex(pk.q()),
        to_hex(pk.g()),
        to_hex(pk.h()),
        to_hex(sk.s()),
    )
}

/// Parses and fully re-validates a key file (primality, subgroup membership, `g^s = h`).
pub fn parse_key_file<R: Rng + ?Sized>(text: &str, rng: &mut R) -> Result<(PublicKey, SecretKey), KeyFileError> {
    let mut values: BTreeMap<&str, &str> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end();
        if raw.is_empty() {
            continue;
        }
        let syntax = |msg: String| KeyFileError::Syntax { line, msg };
        let (key, value) = raw.split_once(' ').ok_or_else(|| syntax(format!("expected `name value`, got {raw:?}")))?;
        if !FIELDS.contains(&key) {
            return Err(syntax(format!("unknown field `{key}`")));
        }
        if values.insert(key, value).is_some() {
            return Err(syntax(format!("duplicate field `{key}`")));
        }
    }

    let get = |name: &'static str| values.get(name).copied().ok_or(KeyFileError::Missing(name));
    let line_of =
        |name: &str| text.lines().position(|l| l.split_once(' ').is_some_and(|(k, _)| k == name)).map_or(0, |i| i + 1);
    let hex_field = |name: &'static str| {
        let v = get(name)?;
        parse_hex(v).ok_or_else(|| KeyFileError::Syntax {
            line: line_of(name),
            msg: format!("`{name}` is not canonical lowercase hex: {v:?}"),
        })
    };

    let lambda_str = get("lambda")?;
    let lambda: u64 = lambda_str.parse().map_err(|_| KeyFileError::Syntax {
        line: line_of("lambda"),
        msg: format!("`lambda` is not an integer: {lambda_str:?}"),
    })?;
    let (p, q, g, h, s) = (hex_field("p")?, hex_field("q")?, hex_field("g")?, hex_field("h")?, hex_field("s")?);
    if p.bits() != lambda {
        return Err(KeyFileError::LambdaMismatch { stated: lambda, actual: p.bits() });
    }
    let group = GroupParams::new(p, q, g, rng)?;
    let pk = PublicKey::new(group, h)?;
    let sk = SecretKey::new(&pk, s)?;
    Ok((pk, sk))
}
