//! Fixed-point encoding of signed reals into the residue subgroup.
//!
//! A real `x` becomes the residue nearest to `round(γx) mod p`. Decoding reads
//! residues above `q` as negative (`m - p`) and divides by the gain. Products
//! of encodings decode with the product of their gains, which is what the
//! encrypted controller and the scaling step rely on.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{self, Ciphertext, CryptoError, Plaintext, PublicKey, SecretKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("|gamma*x| = {magnitude:e} reaches the q/2 headroom limit ({limit:e})")]
    Overflow { magnitude: f64, limit: f64 },
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("gain must be positive and finite, got {0}")]
    BadGain(f64),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

pub type Result<T> = std::result::Result<T, CodecError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationGains {
    pub gamma_xi: f64,
    pub gamma_phi: f64,
    pub gamma_alpha: f64,
}

impl Default for QuantizationGains {
    fn default() -> Self {
        Self { gamma_xi: 1e6, gamma_phi: 1e6, gamma_alpha: 1e6 }
    }
}

impl QuantizationGains {
    pub fn validate(&self) -> Result<()> {
        for g in [self.gamma_xi, self.gamma_phi, self.gamma_alpha] {
            check_gain(g)?;
        }
        Ok(())
    }
}

fn check_gain(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(CodecError::BadGain(gamma))
    }
}

/// An encoding together with what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub plaintext: Plaintext,
    /// `round(γx)` before residue rounding.
    pub target: BigInt,
    /// Distance from `target mod p` to the chosen residue.
    pub residue_distance: BigUint,
}

impl Encoded {
    /// `|decode(plaintext) - x|` in real units.
    pub fn abs_error(&self, pk: &PublicKey, x: f64, gamma: f64) -> f64 {
        (decode(pk, &self.plaintext, gamma) - x).abs()
    }
}

/// Encodes `x` at gain `gamma`, reporting the rounding target and residue distance.
pub fn encode_detailed(pk: &PublicKey, x: f64, gamma: f64) -> Result<Encoded> {
    check_gain(gamma)?;
    if !x.is_finite() {
        return Err(CodecError::NonFinite(x));
    }
    let scaled = gamma * x;
    let target = BigInt::from_f64(scaled.round()).ok_or(CodecError::NonFinite(scaled))?;
    // |round(γx)| ≥ q/2  ⇔  2·|round(γx)| ≥ q  (q odd)
    let q = BigInt::from_biguint(Sign::Plus, pk.q().clone());
    if (target.abs() << 1u32) >= q {
        return Err(CodecError::Overflow { magnitude: scaled.abs(), limit: q.to_f64().unwrap_or(f64::INFINITY) / 2.0 });
    }
    let p = BigInt::from_biguint(Sign::Plus, pk.p().clone());
    let wrapped = if target.is_negative() { &p + &target } else { target.clone() };
    let wrapped = wrapped.to_biguint().expect("non-negative by construction");
    let plaintext = crypto::nearest_plaintext(pk, &wrapped)?;
    let residue_distance =
        if *plaintext.value() >= wrapped { plaintext.value() - &wrapped } else { &wrapped - plaintext.value() };
    Ok(Encoded { plaintext, target, residue_distance })
}

pub fn encode(pk: &PublicKey, x: f64, gamma: f64) -> Result<Plaintext> {
    encode_detailed(pk, x, gamma).map(|e| e.plaintext)
}

/// Signed representative: `m` if `m ≤ q`, otherwise `m - p`.
pub fn signed_residue(pk: &PublicKey, m: &BigUint) -> BigInt {
    let m_signed = BigInt::from_biguint(Sign::Plus, m.clone());
    if m <= pk.q() {
        m_signed
    } else {
        m_signed - BigInt::from_biguint(Sign::Plus, pk.p().clone())
    }
}

pub fn decode(pk: &PublicKey, m: &Plaintext, gamma: f64) -> f64 {
    decode_signed(&signed_residue(pk, m.value()), gamma)
}

/// Divides an already-signed integer (a single residue or a sum of them) by the gain.
pub fn decode_signed(v: &BigInt, gamma: f64) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    v.to_f64().unwrap_or(f64::NAN) / gamma
}

pub fn enc_real<R: Rng + ?Sized>(pk: &PublicKey, x: f64, gamma: f64, rng: &mut R) -> Result<Ciphertext> {
    let m = encode(pk, x, gamma)?;
    Ok(crypto::encrypt(pk, &m, rng))
}

pub fn dec_real(pk: &PublicKey, sk: &SecretKey, c: &Ciphertext, gamma: f64) -> Result<f64> {
    let m = crypto::decrypt(pk, sk, c)?;
    Ok(decode(pk, &m, gamma))
}

/// Largest residue distance seen when encoding `samples` uniform targets in
/// `[-span, span]` at integer resolution. A per-key empirical `d_near`.
pub fn measure_residue_gap<R: Rng + ?Sized>(pk: &PublicKey, span: f64, samples: usize, rng: &mut R) -> Result<u64> {
    let mut worst = 0u64;
    for _ in 0..samples {
        let x = rng.gen_range(-span..=span);
        let e = encode_detailed(pk, x, 1.0)?;
        worst = worst.max(e.residue_distance.to_u64().unwrap_or(u64::MAX));
    }
    Ok(worst)
}
