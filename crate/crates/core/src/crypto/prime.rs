//! Primality testing and safe-prime search.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

/// Miller–Rabin rounds per candidate. Each round has error at most 1/4,
/// so 40 rounds keep a composite's survival probability below 2^-80.
pub const MILLER_RABIN_ROUNDS: usize = 40;

/// Upper bound on candidates drawn before `find_safe_prime` gives up.
pub const MAX_SAFE_PRIME_CANDIDATES: u64 = 2_000_000;

/// Odd primes below 1024, used to sieve candidates before Miller–Rabin.
pub(crate) static SIEVE_PRIMES: std::sync::LazyLock<Vec<u32>> = std::sync::LazyLock::new(|| {
    (3u32..1024)
        .step_by(2)
        .filter(|&n| (3..).step_by(2).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d)))
        .collect()
});

/// Probabilistic primality test with `MILLER_RABIN_ROUNDS` random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    if let Some(small) = n.to_u64() {
        if small < 4 {
            return small == 2 || small == 3;
        }
    }
    if n.is_even() {
        return false;
    }
    for &sp in SIEVE_PRIMES.iter() {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    miller_rabin(n, MILLER_RABIN_ROUNDS, rng)
}

fn miller_rabin<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let one = BigUint::one();
    let n_minus_one = n - &one;
    let twos = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> twos;
    let two = BigUint::from(2u32);

    'witness: for _ in 0..rounds {
        // base in [2, n-2]
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..twos {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `true` unless a sieve prime divides `q` or `2q + 1` (the primes themselves excepted).
fn survives_sieve(q: &BigUint) -> bool {
    let p = (q << 1u32) + 1u32;
    SIEVE_PRIMES.iter().all(|&sp| {
        let sp_big = BigUint::from(sp);
        let q_ok = *q == sp_big || !(q % sp).is_zero();
        let p_ok = p == sp_big || !(&p % sp).is_zero();
        q_ok && p_ok
    })
}

/// Draws random `(p, q)` with `p = 2q + 1`, both prime and `p` exactly `bits` long.
///
/// Returns `None` once `MAX_SAFE_PRIME_CANDIDATES` candidates have been rejected.
pub(crate) fn find_safe_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Option<(BigUint, BigUint)> {
    debug_assert!(bits >= 3);
    for _ in 0..MAX_SAFE_PRIME_CANDIDATES {
        let mut q = rng.gen_biguint(bits - 1);
        q.set_bit(bits - 2, true);
        q.set_bit(0, true);
        if !survives_sieve(&q) {
            continue;
        }
        if !is_probable_prime(&q, rng) {
            continue;
        }
        let p = (&q << 1u32) + 1u32;
        if is_probable_prime(&p, rng) {
            return Some((p, q));
        }
    }
    None
}
