//! Encrypted evaluation: the cloud side multiplies ciphertexts element-wise and
//! never sees a key; the plant side decrypts the 88 products and sums rows.

use num_bigint::{BigInt, Sign};
use num_traits::Signed;
use rand::Rng;

use super::{
    ControllerError, ControllerInput, ControllerMatrix, ControllerOutput, ControllerState, ExogenousInput, Result,
    INPUT_DIM, OUTPUT_DIM,
};
use crate::codec::{self, decode_signed, encode_detailed, signed_residue, QuantizationGains};
use crate::crypto::{self, cmult, Ciphertext, PublicKey, SecretKey};

/// `Enc(Φ̌)`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedMatrix {
    entries: Vec<Ciphertext>,
}

impl EncryptedMatrix {
    pub fn from_entries(entries: Vec<Ciphertext>) -> Result<Self> {
        check_len(&entries, OUTPUT_DIM * INPUT_DIM)?;
        Ok(Self { entries })
    }

    pub fn get(&self, i: usize, j: usize) -> &Ciphertext {
        &self.entries[i * INPUT_DIM + j]
    }

    pub fn entries(&self) -> &[Ciphertext] {
        &self.entries
    }
}

/// `Enc(ξ̌)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedInput {
    entries: Vec<Ciphertext>,
}

impl EncryptedInput {
    pub fn from_entries(entries: Vec<Ciphertext>) -> Result<Self> {
        check_len(&entries, INPUT_DIM)?;
        Ok(Self { entries })
    }

    pub fn get(&self, j: usize) -> &Ciphertext {
        &self.entries[j]
    }

    pub fn entries(&self) -> &[Ciphertext] {
        &self.entries
    }
}

/// `Ψ`: entry `(i, j)` encrypts `Φ̌_ij · ξ̌_j mod p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedProducts {
    entries: Vec<Ciphertext>,
}

impl EncryptedProducts {
    pub fn get(&self, i: usize, j: usize) -> &Ciphertext {
        &self.entries[i * INPUT_DIM + j]
    }

    pub fn entries(&self) -> &[Ciphertext] {
        &self.entries
    }
}

fn check_len(entries: &[Ciphertext], expected: usize) -> Result<()> {
    if entries.len() != expected {
        return Err(ControllerError::Shape { expected, got: entries.len() });
    }
    Ok(())
}

pub fn encrypt_phi<R: Rng + ?Sized>(
    pk: &PublicKey,
    phi: &ControllerMatrix,
    gamma_phi: f64,
    rng: &mut R,
) -> Result<EncryptedMatrix> {
    let mut entries = Vec::with_capacity(OUTPUT_DIM * INPUT_DIM);
    for row in phi.rows() {
        for &v in row {
            entries.push(codec::enc_real(pk, v, gamma_phi, rng)?);
        }
    }
    Ok(EncryptedMatrix { entries })
}

/// `|decode(encode(Φ_ij)) - Φ_ij|` per entry. Deterministic; needs no randomness.
pub fn phi_quantization_error(
    pk: &PublicKey,
    phi: &ControllerMatrix,
    gamma_phi: f64,
) -> Result<[[f64; INPUT_DIM]; OUTPUT_DIM]> {
    let mut err = [[0.0; INPUT_DIM]; OUTPUT_DIM];
    for (i, row) in phi.rows().iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            err[i][j] = encode_detailed(pk, v, gamma_phi)?.abs_error(pk, v, gamma_phi);
        }
    }
    Ok(err)
}

/// Encodes and encrypts `ξ` at `gamma`, except for the slots in `supplied`,
/// which take the given ciphertexts as they are.
///
/// Returns the ciphertexts and the per-slot encoding error; supplied slots
/// report zero since their plaintext is not known here.
pub fn encrypt_input<R: Rng + ?Sized>(
    pk: &PublicKey,
    xi: &ControllerInput,
    gamma: f64,
    supplied: &[(usize, Ciphertext)],
    rng: &mut R,
) -> Result<(EncryptedInput, [f64; INPUT_DIM])> {
    let mut entries: Vec<Option<Ciphertext>> = vec![None; INPUT_DIM];
    for (j, c) in supplied {
        let slot = entries.get_mut(*j).ok_or(ControllerError::BadOverride(*j))?;
        *slot = Some(c.clone());
    }
    let mut err = [0.0; INPUT_DIM];
    let entries = entries
        .into_iter()
        .enumerate()
        .map(|(j, given)| match given {
            Some(c) => Ok(c),
            None => {
                let enc = encode_detailed(pk, xi.xi[j], gamma)?;
                err[j] = enc.abs_error(pk, xi.xi[j], gamma);
                Ok(crypto::encrypt(pk, &enc.plaintext, rng))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((EncryptedInput { entries }, err))
}

/// The 88 element-wise products. Uses only the public modulus.
pub fn eval_encrypted(pk: &PublicKey, enc_phi: &EncryptedMatrix, enc_xi: &EncryptedInput) -> Result<EncryptedProducts> {
    let p = pk.p();
    let foreign = |c: &Ciphertext| c.c1() >= p || c.c2() >= p;
    if let Some(idx) = enc_phi.entries.iter().position(foreign) {
        return Err(ControllerError::ForeignCiphertext(idx));
    }
    if let Some(idx) = enc_xi.entries.iter().position(foreign) {
        return Err(ControllerError::ForeignCiphertext(OUTPUT_DIM * INPUT_DIM + idx));
    }
    let mut entries = Vec::with_capacity(OUTPUT_DIM * INPUT_DIM);
    for i in 0..OUTPUT_DIM {
        for j in 0..INPUT_DIM {
            entries.push(cmult(pk, enc_phi.get(i, j), enc_xi.get(j)));
        }
    }
    Ok(EncryptedProducts { entries })
}

/// Decrypts every product, reads each as a signed integer, sums rows exactly
/// and divides once by the composed gain.
pub fn dec_plus(pk: &PublicKey, sk: &SecretKey, products: &EncryptedProducts, gamma: f64) -> Result<ControllerOutput> {
    let q = BigInt::from_biguint(Sign::Plus, pk.q().clone());
    let mut psi = [0.0; OUTPUT_DIM];
    for (i, out) in psi.iter_mut().enumerate() {
        let mut sum = BigInt::default();
        for j in 0..INPUT_DIM {
            let m = crypto::decrypt(pk, sk, products.get(i, j))?;
            sum += signed_residue(pk, m.value());
        }
        if (sum.abs() << 1u32) >= q {
            return Err(ControllerError::SumOverflow { row: i });
        }
        *out = decode_signed(&sum, gamma);
    }
    Ok(ControllerOutput { psi })
}

/// Worst-case `|ψ̃_i - ψ_i|` given per-entry absolute errors of the decoded factors:
/// `Σ_j |Φ_ij| e_ξj + |ξ_j| e_Φij + e_ξj e_Φij`, plus a little room for the
/// floating-point evaluation of both sides.
pub fn error_budget(
    phi: &ControllerMatrix,
    phi_err: &[[f64; INPUT_DIM]; OUTPUT_DIM],
    xi: &ControllerInput,
    xi_err: &[f64; INPUT_DIM],
) -> [f64; OUTPUT_DIM] {
    std::array::from_fn(|i| {
        let mut b = 0.0;
        let mut magnitude = 0.0;
        for j in 0..INPUT_DIM {
            let (a, x) = (phi.get(i, j).abs(), xi.xi[j].abs());
            b += a * xi_err[j] + x * phi_err[i][j] + xi_err[j] * phi_err[i][j];
            magnitude += (a + phi_err[i][j]) * (x + xi_err[j]);
        }
        b + 1e-12 * (1.0 + magnitude)
    })
}

/// Gains for one controller round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGains {
    /// Gain applied to locally encoded `ξ` entries.
    pub input: f64,
    /// Gain `dec_plus` divides by.
    pub decoder: f64,
}

impl StepGains {
    /// `γ_ξ` in, `γ_ξ γ_Φ` out.
    pub fn saving(g: &QuantizationGains) -> Self {
        Self { input: g.gamma_xi, decoder: g.gamma_xi * g.gamma_phi }
    }

    /// Every factor pair carries `γ_ξ γ_α γ_Φ`: local entries are encoded at
    /// `γ_ξ γ_α` to match loaded entries, which picked up `γ_α` from scaling.
    pub fn loading(g: &QuantizationGains, gamma_alpha_applied: f64) -> Self {
        Self { input: g.gamma_xi * gamma_alpha_applied, decoder: g.gamma_xi * g.gamma_phi * gamma_alpha_applied }
    }
}

#[derive(Debug, Clone)]
pub struct EncryptedStep {
    pub output: ControllerOutput,
    pub input: EncryptedInput,
    pub input_error: [f64; INPUT_DIM],
}

impl EncryptedStep {
    pub fn next_state(&self) -> ControllerState {
        self.output.next_state()
    }
}

/// One plant → cloud → plant round trip for one side: encode and encrypt `ξ`,
/// evaluate over ciphertexts, then `dec_plus`.
#[allow(clippy::too_many_arguments)]
pub fn step_encrypted_controller<R: Rng + ?Sized>(
    pk: &PublicKey,
    sk: &SecretKey,
    enc_phi: &EncryptedMatrix,
    state: ControllerState,
    v: ExogenousInput,
    gains: StepGains,
    supplied: &[(usize, Ciphertext)],
    rng: &mut R,
) -> Result<EncryptedStep> {
    let xi = ControllerInput::new(state, v);
    let (input, input_error) = encrypt_input(pk, &xi, gains.input, supplied, rng)?;
    let products = eval_encrypted(pk, enc_phi, &input)?;
    let output = dec_plus(pk, sk, &products, gains.decoder)?;
    Ok(EncryptedStep { output, input, input_error })
}
