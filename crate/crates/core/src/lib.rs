//! Encrypted motion copying: a bilateral leader/follower controller evaluated
//! over ElGamal ciphertexts, an encrypted motion memory that can be rescaled
//! without decryption, and a simulator that runs the saving and loading phases.

// `!(x > 0.0)` is how validation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code reads better with explicit row/column indices.
#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod controller;
pub mod crypto;
pub mod hex;
pub mod memory;
pub mod plant;
pub mod runner;

pub use codec::{dec_real, enc_real, CodecError, QuantizationGains};
pub use controller::{
    ControllerError, ControllerInput, ControllerMatrix, ControllerOutput, ControllerState, ExogenousInput,
};
pub use crypto::{Ciphertext, CryptoError, PublicKey, SecretKey};
pub use memory::{DatasetHeader, MemoryError, MotionDataset, ScalingParams};
pub use plant::{ContactModel, PlantError, PlantParams, PlantState, Trajectory};
pub use runner::{RunnerError, Scenario, ScenarioConfig, StepLog};
