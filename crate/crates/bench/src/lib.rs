//! Shared fixtures for the benchmarks.

use encmotion_core::controller::{
    default_phi, encrypt_phi, ControllerState, EncryptedMatrix, ExogenousInput, StepGains,
};
use encmotion_core::crypto::{keygen, PublicKey, SecretKey};
use encmotion_core::QuantizationGains;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Key lengths the benchmarks sweep.
pub const KEY_BITS: [u64; 3] = [64, 128, 256];

pub struct Fixture {
    pub pk: PublicKey,
    pub sk: SecretKey,
    pub enc_phi: EncryptedMatrix,
    pub gains: StepGains,
    pub rng: ChaCha20Rng,
}

pub fn fixture(bits: u64) -> Fixture {
    let mut rng = ChaCha20Rng::seed_from_u64(bits);
    let (pk, sk) = keygen(bits, &mut rng).expect("key generation");
    let gains = QuantizationGains::default();
    let enc_phi = encrypt_phi(&pk, &default_phi(), gains.gamma_phi, &mut rng).expect("Φ fits the key");
    Fixture { pk, sk, enc_phi, gains: StepGains::saving(&gains), rng }
}

/// A mid-motion controller input, roughly what a free run sees.
pub fn typical_input() -> (ControllerState, ExogenousInput) {
    let state = ControllerState { e: 0.004, e_dot: 0.1, q_s: -0.02, z_s: 0.01, i_cmd: -0.05 };
    let v = ExogenousInput {
        theta_other: -0.31,
        theta_own: -0.314,
        omega_own: 0.6,
        tau_e_other: 0.002,
        tau_e_own: -0.003,
        friction: -0.009,
    };
    (state, v)
}
