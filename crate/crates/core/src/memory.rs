//! Secure motion memory: two ciphertext sequences (angle, estimated external
//! torque) plus enough header to load them back under the right key and gain.
//!
//! Nothing in here takes a secret key. Scaling multiplies every record by one
//! encrypted scale factor per sequence, so it works on ciphertexts alone.
//!
//! File format (UTF-8, one item per line):
//!
//! ```text
//! EMCDATA 1
//! lambda 128
//! p <hex>
//! g <hex>
//! h <hex>
//! gamma_xi 1000000
//! gamma_alpha 1
//! Ts 0.02
//! N 750
//! scenario free
//! 0 <c1θ> <c2θ> <c1τ> <c2τ>
//! ...
//! 750 <c1θ> <c2θ> <c1τ> <c2τ>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::crypto::{cmult, Ciphertext, CryptoError, GroupParams, PublicKey};
use crate::hex::{parse_hex, to_hex};

pub const MAGIC: &str = "EMCDATA 1";

/// Largest signal magnitude (rad, N·m) the scaling headroom check allows for.
/// Saved angles and torques are orders of magnitude below this.
pub const MAX_SIGNAL_MAGNITUDE: f64 = 1e3;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("dataset already holds all {0} records")]
    Full(usize),
    #[error("record index {k} is out of range 0..={n}")]
    OutOfRange { k: usize, n: usize },
    #[error("ciphertext does not belong to the dataset's key")]
    ForeignCiphertext,
    #[error("public key does not match the dataset header")]
    KeyMismatch,
    #[error("dataset has {got} of {expected} records")]
    Incomplete { got: usize, expected: usize },
    #[error("scaled values could reach q/2: {0}")]
    ScalingOverflow(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid header: {0}")]
    Header(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MemoryError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingParams {
    pub alpha_x: f64,
    pub alpha_y: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self { alpha_x: 1.0, alpha_y: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub lambda: u64,
    pub p: BigUint,
    pub g: BigUint,
    pub h: BigUint,
    pub gamma_xi: f64,
    /// Product of every `γ_α` applied by scaling; `1` if never scaled.
    pub gamma_alpha: f64,
    pub ts: f64,
    pub n: usize,
    pub scenario: String,
}

impl DatasetHeader {
    pub fn for_key(pk: &PublicKey, gamma_xi: f64, ts: f64, n: usize, scenario: &str) -> Self {
        Self {
            lambda: pk.bits(),
            p: pk.p().clone(),
            g: pk.g().clone(),
            h: pk.h().clone(),
            gamma_xi,
            gamma_alpha: 1.0,
            ts,
            n,
            scenario: scenario.to_string(),
        }
    }

    pub fn matches(&self, pk: &PublicKey) -> bool {
        self.lambda == pk.bits() && self.p == *pk.p() && self.g == *pk.g() && self.h == *pk.h()
    }

    /// Rebuilds the public key from the header alone (re-validating the group).
    pub fn public_key<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PublicKey> {
        if self.p.bits() != self.lambda {
            return Err(MemoryError::Header(format!("lambda {} but p has {} bits", self.lambda, self.p.bits())));
        }
        if self.p < BigUint::from(5u32) {
            return Err(MemoryError::Header("p is too small".into()));
        }
        let q = (&self.p - 1u32) >> 1u32;
        let group = GroupParams::new(self.p.clone(), q, self.g.clone(), rng)?;
        Ok(PublicKey::new(group, self.h.clone())?)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma_xi", self.gamma_xi), ("gamma_alpha", self.gamma_alpha), ("Ts", self.ts)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MemoryError::Header(format!("{name} must be positive, got {v}")));
            }
        }
        if self.scenario.is_empty() || self.scenario.chars().any(char::is_whitespace) {
            return Err(MemoryError::Header(format!("scenario label {:?} must be one word", self.scenario)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDataset {
    header: DatasetHeader,
    records: Vec<(Ciphertext, Ciphertext)>,
}

impl MotionDataset {
    pub fn new(header: DatasetHeader) -> Self {
        let cap = header.n + 1;
        Self { header, records: Vec::with_capacity(cap) }
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == self.header.n + 1
    }

    pub fn records(&self) -> &[(Ciphertext, Ciphertext)] {
        &self.records
    }

    fn owns(&self, c: &Ciphertext) -> bool {
        c.c1() < &self.header.p && c.c2() < &self.header.p
    }

    /// Appends `(Enc(θ_k), Enc(τ̂e_k))` at the next index.
    pub fn record(&mut self, c_theta: Ciphertext, c_tau: Ciphertext) -> Result<()> {
        if self.is_complete() {
            return Err(MemoryError::Full(self.header.n + 1));
        }
        if !self.owns(&c_theta) || !self.owns(&c_tau) {
            return Err(MemoryError::ForeignCiphertext);
        }
        self.records.push((c_theta, c_tau));
        Ok(())
    }

    pub fn fetch(&self, k: usize) -> Result<(&Ciphertext, &Ciphertext)> {
        self.records.get(k).map(|(a, b)| (a, b)).ok_or(MemoryError::OutOfRange { k, n: self.header.n })
    }

    /// Overwrites one record. For building negative controls in tests.
    #[doc(hidden)]
    pub fn replace_record(&mut self, k: usize, c_theta: Ciphertext, c_tau: Ciphertext) -> Result<()> {
        let n = self.header.n;
        let slot = self.records.get_mut(k).ok_or(MemoryError::OutOfRange { k, n })?;
        *slot = (c_theta, c_tau);
        Ok(())
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Refuses incomplete datasets so that every file on disk is loadable.
    pub fn to_text(&self) -> Result<String> {
        if !self.is_complete() {
            return Err(MemoryError::Incomplete { got: self.records.len(), expected: self.header.n + 1 });
        }
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "lambda {}", h.lambda);
        let _ = writeln!(out, "p {}", to_hex(&h.p));
        let _ = writeln!(out, "g {}", to_hex(&h.g));
        let _ = writeln!(out, "h {}", to_hex(&h.h));
        let _ = writeln!(out, "gamma_xi {}", h.gamma_xi);
        let _ = writeln!(out, "gamma_alpha {}", h.gamma_alpha);
        let _ = writeln!(out, "Ts {}", h.ts);
        let _ = writeln!(out, "N {}", h.n);
        let _ = writeln!(out, "scenario {}", h.scenario);
        for (k, (a, b)) in self.records.iter().enumerate() {
            let _ = writeln!(out, "{k} {} {} {} {}", to_hex(a.c1()), to_hex(a.c2()), to_hex(b.c1()), to_hex(b.c2()));
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, msg: String| MemoryError::Parse { line, msg };

        match lines.next() {
            Some((_, MAGIC)) => {}
            Some((line, other)) => return Err(err(line, format!("expected {MAGIC:?}, found {other:?}"))),
            None => return Err(err(1, "empty file".into())),
        }

        let mut field = |name: &str| -> Result<(usize, String)> {
            let (line, raw) = lines.next().ok_or_else(|| err(0, format!("file ends before header field `{name}`")))?;
            match raw.split_once(' ') {
                Some((k, v)) if k == name && !v.is_empty() => Ok((line, v.to_string())),
                _ => Err(err(line, format!("expected `{name} <value>`, found {raw:?}"))),
            }
        };
        let hex_field = |(line, v): (usize, String), name: &str| {
            parse_hex(&v).ok_or_else(|| err(line, format!("`{name}` is not canonical lowercase hex")))
        };
        fn num<T: std::str::FromStr>((line, v): (usize, String), name: &str) -> Result<T> {
            v.parse().map_err(|_| MemoryError::Parse { line, msg: format!("`{name}` has unparsable value {v:?}") })
        }

        let lambda: u64 = num(field("lambda")?, "lambda")?;
        let p = hex_field(field("p")?, "p")?;
        let g = hex_field(field("g")?, "g")?;
        let h = hex_field(field("h")?, "h")?;
        let gamma_xi: f64 = num(field("gamma_xi")?, "gamma_xi")?;
        let gamma_alpha: f64 = num(field("gamma_alpha")?, "gamma_alpha")?;
        let ts: f64 = num(field("Ts")?, "Ts")?;
        let n: usize = num(field("N")?, "N")?;
        let (_, scenario) = field("scenario")?;
        let header = DatasetHeader { lambda, p, g, h, gamma_xi, gamma_alpha, ts, n, scenario };
        header.validate()?;

        let mut ds = MotionDataset::new(header);
        let mut last_line = 10;
        for (line, raw) in lines {
            last_line = line;
            let fields: Vec<&str> = raw.split(' ').collect();
            if fields.len() != 5 {
                return Err(err(line, format!("expected 5 fields, found {}", fields.len())));
            }
            let k: usize = fields[0].parse().map_err(|_| err(line, format!("bad record index {:?}", fields[0])))?;
            if k != ds.len() {
                return Err(err(line, format!("record index {k}, expected {}", ds.len())));
            }
            if k > ds.header.n {
                return Err(err(line, format!("more than N + 1 = {} records", ds.header.n + 1)));
            }
            let mut parts = Vec::with_capacity(4);
            for f in &fields[1..] {
                let v = parse_hex(f).ok_or_else(|| err(line, format!("not canonical lowercase hex: {f:?}")))?;
                if v == BigUint::default() || v >= ds.header.p {
                    return Err(err(line, "ciphertext component outside [1, p-1]".into()));
                }
                parts.push(v);
            }
            let mut it = parts.into_iter();
            let mut next = || it.next().expect("four parts");
            let ct = |c1, c2| Ciphertext::from_parts_unchecked(c1, c2);
            ds.records.push((ct(next(), next()), ct(next(), next())));
        }
        if !ds.is_complete() {
            return Err(err(last_line + 1, format!("file ends after {} of {} records", ds.len(), ds.header.n + 1)));
        }
        Ok(ds)
    }
}

/// Multiplies every angle record by `Enc(α̌_x)` and every torque record by
/// `Enc(α̌_y)`, one fresh encryption per sequence, reused for all records.
///
/// The result decodes at `γ_ξ · γ_α`; the header's `gamma_alpha` is
/// multiplied by `gamma_alpha` to say so.
pub fn scale_dataset<R: Rng + ?Sized>(
    pk: &PublicKey,
    dataset: &MotionDataset,
    alpha: ScalingParams,
    gamma_alpha: f64,
    rng: &mut R,
) -> Result<MotionDataset> {
    if !dataset.header.matches(pk) {
        return Err(MemoryError::KeyMismatch);
    }
    if !dataset.is_complete() {
        return Err(MemoryError::Incomplete { got: dataset.len(), expected: dataset.header.n + 1 });
    }
    let applied = dataset.header.gamma_alpha * gamma_alpha;
    let largest = alpha.alpha_x.abs().max(alpha.alpha_y.abs());
    let worst = dataset.header.gamma_xi * applied * largest * MAX_SIGNAL_MAGNITUDE;
    let limit = pk.q().to_f64().unwrap_or(f64::INFINITY) / 2.0;
    if !(worst < limit) {
        return Err(MemoryError::ScalingOverflow(format!(
            "γ_ξ·γ_α·|α|·{MAX_SIGNAL_MAGNITUDE} = {worst:e} ≥ {limit:e}"
        )));
    }
    let enc_x = codec::enc_real(pk, alpha.alpha_x, gamma_alpha, rng)?;
    let enc_y = codec::enc_real(pk, alpha.alpha_y, gamma_alpha, rng)?;

    let mut header = dataset.header.clone();
    header.gamma_alpha = applied;
    let records = dataset.records.iter().map(|(a, b)| (cmult(pk, a, &enc_x), cmult(pk, b, &enc_y))).collect();
    Ok(MotionDataset { header, records })
}

/// Plaintext scale factors as `scale_dataset` encodes them; `(α̌_x, α̌_y)`.
pub fn encoded_alpha(pk: &PublicKey, alpha: ScalingParams, gamma_alpha: f64) -> Result<(BigUint, BigUint)> {
    Ok((
        codec::encode(pk, alpha.alpha_x, gamma_alpha)?.into_inner(),
        codec::encode(pk, alpha.alpha_y, gamma_alpha)?.into_inner(),
    ))
}
