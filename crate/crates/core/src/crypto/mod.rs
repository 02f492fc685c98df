//! ElGamal over the quadratic-residue subgroup of a safe-prime field.
//!
//! With `p = 2q + 1` and both primes, the squares modulo `p` form a cyclic
//! subgroup of prime order `q`. Keys, plaintexts and both ciphertext
//! components all live in that subgroup, so the only homomorphic operation
//! is component-wise multiplication (`cmult`).

mod keyfile;
mod prime;

pub use keyfile::{format_key_file, parse_key_file, KeyFileError};
pub use prime::{is_probable_prime, MAX_SAFE_PRIME_CANDIDATES, MILLER_RABIN_ROUNDS};

use std::cell::Cell;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

/// Smallest accepted key length. Anything shorter leaves no room for the codec.
pub const MIN_KEY_BITS: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("key length {0} bits is below the minimum of {MIN_KEY_BITS}")]
    KeyTooShort(u64),
    #[error("no {bits}-bit safe prime found in {attempts} candidates")]
    PrimeSearchExhausted { bits: u64, attempts: u64 },
    #[error("invalid group parameters: {0}")]
    InvalidGroup(&'static str),
    #[error("value {0:#x} is outside [1, p-1]")]
    OutOfRange(BigUint),
    #[error("value {0:#x} is not a quadratic residue")]
    NotAPlaintext(BigUint),
    #[error("encryption nonce must lie in [1, q-1]")]
    BadNonce,
    #[error("secret key does not match public key")]
    KeyMismatch,
}

pub type Result<T> = std::result::Result<T, CryptoError>;

thread_local! {
    static CMULT_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of `cmult` calls made on the current thread since it started.
///
/// Take the difference of two readings to count the multiplications in a region.
pub fn cmult_calls() -> u64 {
    CMULT_CALLS.with(Cell::get)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
}

impl GroupParams {
    /// Validates `p = 2q + 1` with both prime and `g` a non-trivial residue.
    pub fn new<R: Rng + ?Sized>(p: BigUint, q: BigUint, g: BigUint, rng: &mut R) -> Result<Self> {
        if p != (&q << 1u32) + 1u32 {
            return Err(CryptoError::InvalidGroup("p != 2q + 1"));
        }
        if !is_probable_prime(&q, rng) || !is_probable_prime(&p, rng) {
            return Err(CryptoError::InvalidGroup("p or q is not prime"));
        }
        if g.is_zero() || g >= p || g.is_one() || !g.modpow(&q, &p).is_one() {
            return Err(CryptoError::InvalidGroup("g does not generate the residue subgroup"));
        }
        Ok(Self { p, q, g })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    /// Bit length of `p`.
    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    fn in_range(&self, x: &BigUint) -> bool {
        !x.is_zero() && *x < self.p
    }

    fn is_residue(&self, x: &BigUint) -> bool {
        self.in_range(x) && x.modpow(&self.q, &self.p).is_one()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    group: GroupParams,
    h: BigUint,
}

impl PublicKey {
    pub fn new(group: GroupParams, h: BigUint) -> Result<Self> {
        if !group.is_residue(&h) {
            return Err(CryptoError::InvalidGroup("h is not in the residue subgroup"));
        }
        Ok(Self { group, h })
    }

    pub fn group(&self) -> &GroupParams {
        &self.group
    }

    pub fn p(&self) -> &BigUint {
        &self.group.p
    }

    pub fn q(&self) -> &BigUint {
        &self.group.q
    }

    pub fn g(&self) -> &BigUint {
        &self.group.g
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    pub fn bits(&self) -> u64 {
        self.group.bits()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    s: BigUint,
}

impl SecretKey {
    /// Accepts `s` only if it lies in `[1, q-1]` and `g^s = h`.
    pub fn new(pk: &PublicKey, s: BigUint) -> Result<Self> {
        if s.is_zero() || s >= *pk.q() {
            return Err(CryptoError::InvalidGroup("s is outside [1, q-1]"));
        }
        if pk.g().modpow(&s, pk.p()) != *pk.h() {
            return Err(CryptoError::KeyMismatch);
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> &BigUint {
        &self.s
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// An element of the plaintext space: a quadratic residue modulo `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plaintext(BigUint);

impl Plaintext {
    pub fn new(pk: &PublicKey, m: BigUint) -> Result<Self> {
        if !pk.group.in_range(&m) {
            return Err(CryptoError::OutOfRange(m));
        }
        if !pk.group.is_residue(&m) {
            return Err(CryptoError::NotAPlaintext(m));
        }
        Ok(Self(m))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    c1: BigUint,
    c2: BigUint,
}

impl Ciphertext {
    /// Both components must lie in `[1, p-1]`.
    pub fn new(pk: &PublicKey, c1: BigUint, c2: BigUint) -> Result<Self> {
        for c in [&c1, &c2] {
            if !pk.group.in_range(c) {
                return Err(CryptoError::OutOfRange(c.clone()));
            }
        }
        Ok(Self { c1, c2 })
    }

    /// For parsers that have already range-checked both components.
    pub(crate) fn from_parts_unchecked(c1: BigUint, c2: BigUint) -> Self {
        Self { c1, c2 }
    }

    pub fn c1(&self) -> &BigUint {
        &self.c1
    }

    pub fn c2(&self) -> &BigUint {
        &self.c2
    }
}

/// Generates a fresh `bits`-long safe-prime group and a key pair in it.
pub fn keygen<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<(PublicKey, SecretKey)> {
    if bits < MIN_KEY_BITS {
        return Err(CryptoError::KeyTooShort(bits));
    }
    let (p, q) = prime::find_safe_prime(bits, rng)
        .ok_or(CryptoError::PrimeSearchExhausted { bits, attempts: MAX_SAFE_PRIME_CANDIDATES })?;

    // Squaring any unit other than ±1 lands on a generator of the order-q subgroup.
    let two = BigUint::from(2u32);
    let p_minus_one = &p - 1u32;
    let g = loop {
        let a = rng.gen_biguint_range(&two, &p_minus_one);
        let g = a.modpow(&two, &p);
        if !g.is_one() {
            break g;
        }
    };
    let s = rng.gen_biguint_range(&BigUint::one(), &q);
    let h = g.modpow(&s, &p);

    let group = GroupParams { p, q, g };
    Ok((PublicKey { group, h }, SecretKey { s }))
}

/// Encrypts with a nonce drawn uniformly from `[1, q-1]`.
pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, m: &Plaintext, rng: &mut R) -> Ciphertext {
    let r = rng.gen_biguint_range(&BigUint::one(), pk.q());
    encrypt_with_nonce(pk, m, &r).expect("nonce drawn from [1, q-1]")
}

/// `(g^r, m·h^r) mod p`.
pub fn encrypt_with_nonce(pk: &PublicKey, m: &Plaintext, r: &BigUint) -> Result<Ciphertext> {
    if r.is_zero() || r >= pk.q() {
        return Err(CryptoError::BadNonce);
    }
    let p = pk.p();
    if !pk.group.in_range(&m.0) {
        return Err(CryptoError::OutOfRange(m.0.clone()));
    }
    let c1 = pk.g().modpow(r, p);
    let c2 = (&m.0 * pk.h().modpow(r, p)) % p;
    Ok(Ciphertext { c1, c2 })
}

/// `c2 · (c1^s)^-1 mod p`.
pub fn decrypt(pk: &PublicKey, sk: &SecretKey, c: &Ciphertext) -> Result<Plaintext> {
    let p = pk.p();
    for x in [&c.c1, &c.c2] {
        if !pk.group.in_range(x) {
            return Err(CryptoError::OutOfRange(x.clone()));
        }
    }
    let shared = c.c1.modpow(&sk.s, p);
    // p is prime, so the inverse is shared^(p-2).
    let inv = shared.modpow(&(p - 2u32), p);
    Ok(Plaintext((&c.c2 * inv) % p))
}

/// Component-wise product; decrypts to the product of the two plaintexts.
pub fn cmult(pk: &PublicKey, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
    CMULT_CALLS.with(|n| n.set(n.get() + 1));
    let p = pk.p();
    Ciphertext { c1: (&a.c1 * &b.c1) % p, c2: (&a.c2 * &b.c2) % p }
}

/// `t^q = 1 (mod p)`, i.e. `t` is a quadratic residue.
pub fn is_plaintext(pk: &PublicKey, t: &BigUint) -> Result<bool> {
    if !pk.group.in_range(t) {
        return Err(CryptoError::OutOfRange(t.clone()));
    }
    Ok(pk.group.is_residue(t))
}

/// Closest residue to `t`; on a tie the smaller one wins.
pub fn nearest_plaintext(pk: &PublicKey, t: &BigUint) -> Result<Plaintext> {
    let p = pk.p();
    if t >= p {
        return Err(CryptoError::OutOfRange(t.clone()));
    }
    let mut d = BigUint::zero();
    loop {
        if *t >= d {
            let below = t - &d;
            if pk.group.is_residue(&below) {
                return Ok(Plaintext(below));
            }
        }
        let above = t + &d;
        if above < *p && pk.group.is_residue(&above) {
            return Ok(Plaintext(above));
        }
        d += 1u32;
    }
}

/// A uniformly random plaintext: the square of a random unit.
pub fn random_plaintext<R: Rng + ?Sized>(pk: &PublicKey, rng: &mut R) -> Plaintext {
    let a = rng.gen_biguint_range(&BigUint::one(), pk.p());
    Plaintext((&a * &a) % pk.p())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// p = 23, q = 11, g = 4, s = 3.
    pub(crate) fn toy_key() -> (PublicKey, SecretKey) {
        let group = GroupParams { p: 23u32.into(), q: 11u32.into(), g: 4u32.into() };
        let pk = PublicKey { group, h: 18u32.into() };
        let sk = SecretKey { s: 3u32.into() };
        (pk, sk)
    }

    fn pt(pk: &PublicKey, m: u32) -> Plaintext {
        Plaintext::new(pk, m.into()).unwrap()
    }

    // Squares mod 23, by hand: 1 4 9 16 2 13 3 18 12 8 6.
    const RESIDUES_23: [u32; 11] = [1, 2, 3, 4, 6, 8, 9, 12, 13, 16, 18];

    #[test]
    fn toy_group_is_valid() {
        let (pk, sk) = toy_key();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        GroupParams::new(23u32.into(), 11u32.into(), 4u32.into(), &mut rng).unwrap();
        SecretKey::new(&pk, sk.s.clone()).unwrap();
    }

    #[test]
    fn toy_encryption_by_hand() {
        let (pk, sk) = toy_key();
        let c = encrypt_with_nonce(&pk, &pt(&pk, 9), &2u32.into()).unwrap();
        assert_eq!((c.c1(), c.c2()), (&16u32.into(), &18u32.into()));
        assert_eq!(decrypt(&pk, &sk, &c).unwrap(), pt(&pk, 9));
    }

    #[test]
    fn toy_cmult() {
        let (pk, sk) = toy_key();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = encrypt(&pk, &pt(&pk, 9), &mut rng);
        let b = encrypt(&pk, &pt(&pk, 4), &mut rng);
        assert_eq!(decrypt(&pk, &sk, &cmult(&pk, &a, &b)).unwrap(), pt(&pk, 13));
    }

    #[test]
    fn toy_residue_table() {
        let (pk, _) = toy_key();
        for t in 1u32..23 {
            assert_eq!(is_plaintext(&pk, &t.into()).unwrap(), RESIDUES_23.contains(&t), "t = {t}");
        }
        assert!(is_plaintext(&pk, &0u32.into()).is_err());
        assert!(is_plaintext(&pk, &23u32.into()).is_err());
    }

    #[test]
    fn toy_nearest() {
        let (pk, _) = toy_key();
        let near = |t: u32| nearest_plaintext(&pk, &t.into()).unwrap().into_inner();
        assert_eq!(near(5), 4u32.into());
        assert_eq!(near(0), 1u32.into());
        assert_eq!(near(13), 13u32.into());
        assert_eq!(near(22), 18u32.into());
        // brute force over the whole field
        for t in 0u32..23 {
            let best = RESIDUES_23.iter().min_by_key(|&&m| ((m as i64 - t as i64).abs(), m)).unwrap();
            assert_eq!(near(t), (*best).into(), "t = {t}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (pk, sk) = toy_key();
        assert!(matches!(Plaintext::new(&pk, 5u32.into()), Err(CryptoError::NotAPlaintext(_))));
        assert!(matches!(Plaintext::new(&pk, 0u32.into()), Err(CryptoError::OutOfRange(_))));
        assert!(Ciphertext::new(&pk, 0u32.into(), 1u32.into()).is_err());
        assert!(Ciphertext::new(&pk, 1u32.into(), 23u32.into()).is_err());
        assert!(encrypt_with_nonce(&pk, &pt(&pk, 1), &0u32.into()).is_err());
        assert!(encrypt_with_nonce(&pk, &pt(&pk, 1), &11u32.into()).is_err());
        let rogue = Ciphertext { c1: 0u32.into(), c2: 3u32.into() };
        assert!(decrypt(&pk, &sk, &rogue).is_err());
        assert!(matches!(SecretKey::new(&pk, 4u32.into()), Err(CryptoError::KeyMismatch)));
        assert!(keygen(15, &mut ChaCha20Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = keygen(16, &mut ChaCha20Rng::seed_from_u64(42)).unwrap();
        let b = keygen(16, &mut ChaCha20Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_keys_pass_trial_division() {
        let small_primes: Vec<u64> =
            (2u64..256).filter(|n| (2..*n).take_while(|d| d * d <= *n).all(|d| n % d != 0)).collect();
        for seed in 0..20 {
            let (pk, sk) = keygen(16, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
            let p: u64 = pk.p().try_into().unwrap();
            let q: u64 = pk.q().try_into().unwrap();
            assert_eq!(pk.bits(), 16);
            assert_eq!(p, 2 * q + 1);
            for &d in &small_primes {
                assert!(!p.is_multiple_of(d) && !q.is_multiple_of(d), "p={p} q={q} d={d}");
            }
            assert!(!pk.g().is_one());
            assert!(pk.g().modpow(pk.q(), pk.p()).is_one());
            assert_eq!(pk.g().modpow(sk.s(), pk.p()), *pk.h());
            // -1 is never a residue when p = 3 mod 4
            assert!(!is_plaintext(&pk, &(pk.p() - 1u32)).unwrap());
        }
    }

    #[test]
    fn exhaustive_round_trip_small_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let (pk, sk) = keygen(16, &mut rng).unwrap();
        let p: u64 = pk.p().try_into().unwrap();
        let mut count = 0u64;
        for t in 1..p {
            let t = BigUint::from(t);
            if is_plaintext(&pk, &t).unwrap() {
                let m = Plaintext(t);
                let c = encrypt(&pk, &m, &mut rng);
                assert_eq!(decrypt(&pk, &sk, &c).unwrap(), m);
                count += 1;
            }
        }
        assert_eq!(BigUint::from(count), *pk.q());
    }

    #[test]
    fn probabilistic_encryption() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (pk, _) = keygen(128, &mut rng).unwrap();
        let m = random_plaintext(&pk, &mut rng);
        assert_ne!(encrypt(&pk, &m, &mut rng), encrypt(&pk, &m, &mut rng));
    }

    #[test]
    fn inverse_pair_decrypts_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (pk, sk) = keygen(64, &mut rng).unwrap();
        for _ in 0..20 {
            let m = random_plaintext(&pk, &mut rng);
            let inv = m.value().modpow(&(pk.p() - 2u32), pk.p());
            let a = encrypt(&pk, &m, &mut rng);
            let b = encrypt(&pk, &Plaintext::new(&pk, inv).unwrap(), &mut rng);
            assert!(decrypt(&pk, &sk, &cmult(&pk, &a, &b)).unwrap().value().is_one());
        }
    }

    #[test]
    fn cmult_counter_counts() {
        let (pk, _) = toy_key();
        let c = Ciphertext { c1: 2u32.into(), c2: 3u32.into() };
        let before = cmult_calls();
        for _ in 0..7 {
            cmult(&pk, &c, &c);
        }
        assert_eq!(cmult_calls() - before, 7);
    }
}
