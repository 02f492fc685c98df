//! The shared 8×11 bilateral controller `ψ = Φ ξ`, in plaintext and over ciphertexts.
//!
//! Input layout (both sides use the same `Φ`):
//!
//! | index | 0 | 1 | 2 | 3 | 4 | 5 | 6 | 7 | 8 | 9 | 10 |
//! |-------|---|---|---|---|---|---|---|---|---|---|----|
//! | ξ     | e | ė | q | z | i | θ_other | θ_own | ω_own | τ̂e_other | τ̂e_own | f(θ_own, ω_own) |
//!
//! Output: `ψ = [x_next (5), τ̂d, τ̂e, i]`.
//!
//! The printed `B_c` has only four rows. Its fifth row is taken to be the third
//! row of `D_c`, the same way the fifth row of `A_c` equals the third row of
//! `C_c`: both rows produce the current command.

mod encrypted;
mod matrix_file;

pub use encrypted::{
    dec_plus, encrypt_input, encrypt_phi, error_budget, eval_encrypted, phi_quantization_error,
    step_encrypted_controller, EncryptedInput, EncryptedMatrix, EncryptedProducts, EncryptedStep, StepGains,
};
pub use matrix_file::{format_matrix_file, parse_matrix_file, MatrixFileError};

use thiserror::Error;

use crate::codec::CodecError;
use crate::crypto::CryptoError;

pub const STATE_DIM: usize = 5;
pub const EXO_DIM: usize = 6;
pub const INPUT_DIM: usize = STATE_DIM + EXO_DIM;
pub const OUTPUT_DIM: usize = STATE_DIM + 3;

/// Input slots, by name.
pub mod slot {
    pub const E: usize = 0;
    pub const E_DOT: usize = 1;
    pub const Q: usize = 2;
    pub const Z: usize = 3;
    pub const I: usize = 4;
    pub const THETA_OTHER: usize = 5;
    pub const THETA_OWN: usize = 6;
    pub const OMEGA_OWN: usize = 7;
    pub const TAU_E_OTHER: usize = 8;
    pub const TAU_E_OWN: usize = 9;
    pub const FRICTION: usize = 10;
}

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("expected {expected} ciphertexts, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("ciphertext at index {0} does not belong to this key")]
    ForeignCiphertext(usize),
    #[error("override index {0} is out of range")]
    BadOverride(usize),
    #[error("row {row}: signed product sum reaches q/2; gains too large for this key")]
    SumOverflow { row: usize },
}

pub type Result<T> = std::result::Result<T, ControllerError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerMatrix {
    rows: [[f64; INPUT_DIM]; OUTPUT_DIM],
}

impl ControllerMatrix {
    pub fn from_rows(rows: [[f64; INPUT_DIM]; OUTPUT_DIM]) -> Self {
        Self { rows }
    }

    pub fn from_blocks(
        a: [[f64; STATE_DIM]; STATE_DIM],
        b: [[f64; EXO_DIM]; STATE_DIM],
        c: [[f64; STATE_DIM]; 3],
        d: [[f64; EXO_DIM]; 3],
    ) -> Self {
        let mut rows = [[0.0; INPUT_DIM]; OUTPUT_DIM];
        for i in 0..STATE_DIM {
            rows[i][..STATE_DIM].copy_from_slice(&a[i]);
            rows[i][STATE_DIM..].copy_from_slice(&b[i]);
        }
        for i in 0..3 {
            rows[STATE_DIM + i][..STATE_DIM].copy_from_slice(&c[i]);
            rows[STATE_DIM + i][STATE_DIM..].copy_from_slice(&d[i]);
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[[f64; INPUT_DIM]; OUTPUT_DIM] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn a_c(&self) -> [[f64; STATE_DIM]; STATE_DIM] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[i][j]))
    }

    pub fn b_c(&self) -> [[f64; EXO_DIM]; STATE_DIM] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[i][STATE_DIM + j]))
    }

    pub fn c_c(&self) -> [[f64; STATE_DIM]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[STATE_DIM + i][j]))
    }

    pub fn d_c(&self) -> [[f64; EXO_DIM]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.rows[STATE_DIM + i][STATE_DIM + j]))
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Default for ControllerMatrix {
    fn default() -> Self {
        default_phi()
    }
}

/// The published bilateral controller, with the missing fifth `B_c` row filled in.
pub fn default_phi() -> ControllerMatrix {
    let a = [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [-50.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.333333, 0.0, 0.333333],
        [0.0, 0.0, 0.0, 0.333333, 0.333333],
        [-0.615, 0.0, 1.333333, 0.0, 0.333333],
    ];
    let b = [
        [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        [50.0, -50.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0013667, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0013667, 0.0, 0.0, -0.666667],
        // not printed; equals the third row of D_c
        [0.0, 0.0, 0.0013667, 0.0, 0.0, -0.666667],
    ];
    let c = [
        [0.0, 0.0, 0.666667, 0.0, 0.1666667],
        [0.0, 0.0, 0.0, 0.666667, 0.1666667],
        [-0.615, 0.0, 1.333333, 0.0, 0.333333],
    ];
    let d = [
        [0.0, 0.0, -0.001367, 0.0, 0.0, 0.0],
        [0.0, 0.0, -0.001367, 0.0, 0.0, -0.333333],
        [0.0, 0.0, 0.0013667, 0.0, 0.0, -0.666667],
    ];
    ControllerMatrix::from_blocks(a, b, c, d)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ControllerState {
    pub e: f64,
    pub e_dot: f64,
    pub q_s: f64,
    pub z_s: f64,
    pub i_cmd: f64,
}

impl ControllerState {
    pub fn to_array(self) -> [f64; STATE_DIM] {
        [self.e, self.e_dot, self.q_s, self.z_s, self.i_cmd]
    }

    pub fn from_array(x: [f64; STATE_DIM]) -> Self {
        let [e, e_dot, q_s, z_s, i_cmd] = x;
        Self { e, e_dot, q_s, z_s, i_cmd }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExogenousInput {
    pub theta_other: f64,
    pub theta_own: f64,
    pub omega_own: f64,
    pub tau_e_other: f64,
    pub tau_e_own: f64,
    pub friction: f64,
}

impl ExogenousInput {
    pub fn to_array(self) -> [f64; EXO_DIM] {
        [self.theta_other, self.theta_own, self.omega_own, self.tau_e_other, self.tau_e_own, self.friction]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerInput {
    pub xi: [f64; INPUT_DIM],
}

impl ControllerInput {
    pub fn new(state: ControllerState, v: ExogenousInput) -> Self {
        let mut xi = [0.0; INPUT_DIM];
        xi[..STATE_DIM].copy_from_slice(&state.to_array());
        xi[STATE_DIM..].copy_from_slice(&v.to_array());
        Self { xi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub psi: [f64; OUTPUT_DIM],
}

impl ControllerOutput {
    pub fn next_state(&self) -> ControllerState {
        ControllerState::from_array(std::array::from_fn(|i| self.psi[i]))
    }

    pub fn tau_d_hat(&self) -> f64 {
        self.psi[STATE_DIM]
    }

    pub fn tau_e_hat(&self) -> f64 {
        self.psi[STATE_DIM + 1]
    }

    /// Actuated current, from the output block (the state block carries a copy).
    pub fn current(&self) -> f64 {
        self.psi[STATE_DIM + 2]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.psi.iter().zip(&other.psi).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn eval_plain(phi: &ControllerMatrix, xi: &ControllerInput) -> ControllerOutput {
    let psi = std::array::from_fn(|i| phi.rows[i].iter().zip(&xi.xi).map(|(a, x)| a * x).sum());
    ControllerOutput { psi }
}
