//! Saving, scaling and loading phases wired end to end.
//!
//! Saving runs the leader and follower under the encrypted controller and taps
//! `Enc(θ_l)` and `Enc(τ̂e_l)` into a [`MotionDataset`]. Scaling multiplies the
//! dataset by encrypted factors using only the public key. Loading replays the
//! dataset into the follower alone.
//!
//! Every phase draws from its own ChaCha20 stream of one seed, so a config
//! fully determines keys, ciphertexts, logs and files.

mod bench;
mod config;
mod verify;

pub use bench::{bench, BenchReport};
pub use config::{CryptoConfig, OperatorConfig, PathsConfig, Scenario, ScenarioConfig, VerifyConfig};
pub use verify::{run_pipeline, third_law_ratio, verify, Check, PipelineOutcome, VerifyReport};

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::codec::{self, encode_detailed, CodecError};
use crate::controller::{
    encrypt_phi, error_budget, phi_quantization_error, slot, step_encrypted_controller, ControllerError,
    ControllerInput, ControllerMatrix, ControllerOutput, ControllerState, EncryptedMatrix, ExogenousInput, StepGains,
    INPUT_DIM, OUTPUT_DIM,
};
use crate::crypto::{self, cmult_calls, Ciphertext, CryptoError, PublicKey, SecretKey};
use crate::memory::{scale_dataset, DatasetHeader, MemoryError, MotionDataset, ScalingParams};
use crate::plant::{
    external_torque, friction_torque, operator_torque, step_plant_with, ContactModel, PlantError, PlantParams,
    PlantState,
};

pub const STREAM_KEYGEN: u64 = 0;
pub const STREAM_SAVING: u64 = 1;
pub const STREAM_SCALING: u64 = 2;
pub const STREAM_LOADING: u64 = 3;
/// Miller–Rabin bases when re-validating a group read from a file.
pub const STREAM_VALIDATION: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Leader,
    Follower,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Leader => "leader",
            Side::Follower => "follower",
        })
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("step {step}, {side}: {source}")]
    Controller {
        step: usize,
        side: Side,
        #[source]
        source: ControllerError,
    },
    #[error("step {step}: {source}")]
    Plant {
        step: usize,
        #[source]
        source: PlantError,
    },
    #[error("step {step}, {side}, row {row}: |ψ̃ - ψ| = {deviation:e} exceeds the quantization budget {budget:e}")]
    Equivalence { step: usize, side: Side, row: usize, deviation: f64, budget: f64 },
    #[error("dataset does not fit this run: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RunnerError>;

/// One seed, one independent stream per phase.
pub fn phase_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The single key pair every phase of a run shares, regenerated from the seed.
pub fn derive_keys(config: &ScenarioConfig) -> Result<(PublicKey, SecretKey)> {
    let mut rng = phase_rng(config.crypto.seed, STREAM_KEYGEN);
    Ok(crypto::keygen(config.crypto.lambda, &mut rng)?)
}

/// One control period. Angles and velocities are as the encoders report them.
/// Loading logs carry the decoded reference in the leader columns and `NaN`
/// where there is no leader signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub k: usize,
    pub t: f64,
    pub theta_l: f64,
    pub theta_f: f64,
    pub omega_l: f64,
    pub omega_f: f64,
    pub tau_e_hat_l: f64,
    pub tau_e_hat_f: f64,
    pub i_l: f64,
    pub i_f: f64,
    /// Seconds spent on the encrypted controller round trips of this step.
    pub step_wall_time: f64,
}

pub const CSV_COLUMNS: &str = "k,t,theta_l,theta_f,omega_l,omega_f,tau_e_hat_l,tau_e_hat_f,i_l,i_f";

/// Header row plus one row per step. Wall time varies run to run, so it is
/// only written when asked for; without it the output is reproducible byte for byte.
pub fn logs_to_csv(logs: &[StepLog], with_wall_time: bool) -> String {
    let mut out = String::from(CSV_COLUMNS);
    if with_wall_time {
        out.push_str(",step_wall_time");
    }
    out.push('\n');
    for l in logs {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            l.k, l.t, l.theta_l, l.theta_f, l.omega_l, l.omega_f, l.tau_e_hat_l, l.tau_e_hat_f, l.i_l, l.i_f
        );
        if with_wall_time {
            let _ = write!(out, ",{}", l.step_wall_time);
        }
        out.push('\n');
    }
    out
}

/// Running maxima of the per-step encrypted-vs-plaintext comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EquivalenceStats {
    pub evaluations: usize,
    /// Largest `|ψ̃_i - ψ_i|` seen.
    pub max_deviation: f64,
    /// Largest `|ψ̃_i - ψ_i| / B_i` seen; at most 1 or the run would have stopped.
    pub max_budget_ratio: f64,
    /// Largest budget `B_i` seen.
    pub max_budget: f64,
}

impl EquivalenceStats {
    #[allow(clippy::too_many_arguments)]
    fn check(
        &mut self,
        step: usize,
        side: Side,
        phi: &ControllerMatrix,
        phi_err: &[[f64; INPUT_DIM]; OUTPUT_DIM],
        xi: &ControllerInput,
        xi_err: &[f64; INPUT_DIM],
        encrypted: &ControllerOutput,
    ) -> Result<()> {
        let plain = crate::controller::eval_plain(phi, xi);
        let budget = error_budget(phi, phi_err, xi, xi_err);
        for row in 0..OUTPUT_DIM {
            let deviation = (encrypted.psi[row] - plain.psi[row]).abs();
            if !(deviation <= budget[row]) {
                return Err(RunnerError::Equivalence { step, side, row, deviation, budget: budget[row] });
            }
            self.max_deviation = self.max_deviation.max(deviation);
            self.max_budget = self.max_budget.max(budget[row]);
            self.max_budget_ratio = self.max_budget_ratio.max(deviation / budget[row]);
        }
        self.evaluations += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SavingRun {
    pub logs: Vec<StepLog>,
    pub dataset: MotionDataset,
    pub equivalence: EquivalenceStats,
    /// Ciphertext multiplications per control step (both sides).
    pub cmults_per_step: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct LoadingRun {
    pub logs: Vec<StepLog>,
    pub equivalence: EquivalenceStats,
}

struct Cloud {
    phi: ControllerMatrix,
    enc_phi: EncryptedMatrix,
    phi_err: [[f64; INPUT_DIM]; OUTPUT_DIM],
}

impl Cloud {
    fn new(config: &ScenarioConfig, pk: &PublicKey, rng: &mut ChaCha20Rng) -> Result<Self> {
        let phi = config.controller_matrix()?;
        let wrap = |source| RunnerError::Controller { step: 0, side: Side::Leader, source };
        let enc_phi = encrypt_phi(pk, &phi, config.gains.gamma_phi, rng).map_err(wrap)?;
        let phi_err = phi_quantization_error(pk, &phi, config.gains.gamma_phi).map_err(wrap)?;
        Ok(Self { phi, enc_phi, phi_err })
    }
}

fn measure(state: &PlantState, params: &PlantParams) -> (f64, f64, f64) {
    let (theta, omega) = state.measured(params);
    (theta, omega, friction_torque(state.theta, state.omega, params))
}

fn advance_follower(
    state: PlantState,
    i: f64,
    config: &ScenarioConfig,
    wall: &ContactModel,
    t: f64,
    step: usize,
) -> Result<PlantState> {
    step_plant_with(state, i, &config.plant, t, config.ts, config.substeps, |_, s| Ok(external_torque(s, wall)))
        .map_err(|source| RunnerError::Plant { step, source })
}

pub fn run_saving(config: &ScenarioConfig) -> Result<SavingRun> {
    config.validate()?;
    let (pk, sk) = derive_keys(config)?;
    run_saving_with_keys(config, &pk, &sk)
}

/// The saving phase: both arms under the encrypted controller for `steps + 1`
/// control periods, recording `(Enc(θ_l), Enc(τ̂e_l))` each period.
///
/// `Enc(θ_l)` is the ciphertext the leader already sends as `ξ_l[θ_own]`.
/// `τ̂e_l` comes out of the controller, so it is encrypted once, recorded, and
/// sent back as next period's `ξ_l[τe_own]`.
pub fn run_saving_with_keys(config: &ScenarioConfig, pk: &PublicKey, sk: &SecretKey) -> Result<SavingRun> {
    config.validate()?;
    let mut rng = phase_rng(config.crypto.seed, STREAM_SAVING);
    let cloud = Cloud::new(config, pk, &mut rng)?;
    let gains = StepGains::saving(&config.gains);
    let operator = config.operator_profile();
    let wall = config.environment(config.scenario);
    let n = config.steps;

    let mut dataset =
        MotionDataset::new(DatasetHeader::for_key(pk, config.gains.gamma_xi, config.ts, n, config.scenario.as_str()));
    let mut logs = Vec::with_capacity(n + 1);
    let mut cmults_per_step = Vec::with_capacity(n + 1);
    let mut stats = EquivalenceStats::default();

    let (mut leader, mut follower) = (PlantState::default(), PlantState::default());
    let (mut x_l, mut x_f) = (ControllerState::default(), ControllerState::default());
    let (mut tau_l, mut tau_f) = (0.0, 0.0);
    let mut tau_l_sent: Option<(Ciphertext, f64)> = None;

    for k in 0..=n {
        let t = k as f64 * config.ts;
        let (th_l, om_l, f_l) = measure(&leader, &config.plant);
        let (th_f, om_f, f_f) = measure(&follower, &config.plant);
        let v_l = ExogenousInput {
            theta_other: th_f,
            theta_own: th_l,
            omega_own: om_l,
            tau_e_other: tau_f,
            tau_e_own: tau_l,
            friction: f_l,
        };
        let v_f = ExogenousInput {
            theta_other: th_l,
            theta_own: th_f,
            omega_own: om_f,
            tau_e_other: tau_l,
            tau_e_own: tau_f,
            friction: f_f,
        };
        let supplied: Vec<(usize, Ciphertext)> = tau_l_sent.iter().map(|(c, _)| (slot::TAU_E_OWN, c.clone())).collect();

        let cmults_before = cmult_calls();
        let started = Instant::now();
        let step_l = step_encrypted_controller(pk, sk, &cloud.enc_phi, x_l, v_l, gains, &supplied, &mut rng)
            .map_err(|source| RunnerError::Controller { step: k, side: Side::Leader, source })?;
        let step_f = step_encrypted_controller(pk, sk, &cloud.enc_phi, x_f, v_f, gains, &[], &mut rng)
            .map_err(|source| RunnerError::Controller { step: k, side: Side::Follower, source })?;
        let elapsed = started.elapsed().as_secs_f64();
        cmults_per_step.push(cmult_calls() - cmults_before);

        let mut err_l = step_l.input_error;
        if let Some((_, e)) = &tau_l_sent {
            err_l[slot::TAU_E_OWN] = *e;
        }
        let xi_l = ControllerInput::new(x_l, v_l);
        let xi_f = ControllerInput::new(x_f, v_f);
        stats.check(k, Side::Leader, &cloud.phi, &cloud.phi_err, &xi_l, &err_l, &step_l.output)?;
        stats.check(k, Side::Follower, &cloud.phi, &cloud.phi_err, &xi_f, &step_f.input_error, &step_f.output)?;

        let (out_l, out_f) = (step_l.output, step_f.output);
        let tau_enc = encode_detailed(pk, out_l.tau_e_hat(), config.gains.gamma_xi)?;
        let tau_err = tau_enc.abs_error(pk, out_l.tau_e_hat(), config.gains.gamma_xi);
        let c_tau = crypto::encrypt(pk, &tau_enc.plaintext, &mut rng);
        dataset.record(step_l.input.get(slot::THETA_OWN).clone(), c_tau.clone())?;
        tau_l_sent = Some((c_tau, tau_err));

        logs.push(StepLog {
            k,
            t,
            theta_l: th_l,
            theta_f: th_f,
            omega_l: om_l,
            omega_f: om_f,
            tau_e_hat_l: out_l.tau_e_hat(),
            tau_e_hat_f: out_f.tau_e_hat(),
            i_l: out_l.current(),
            i_f: out_f.current(),
            step_wall_time: elapsed,
        });

        x_l = out_l.next_state();
        x_f = out_f.next_state();
        tau_l = out_l.tau_e_hat();
        tau_f = out_f.tau_e_hat();

        if k < n {
            let hold = config.operator.setpoint_hold;
            leader = step_plant_with(leader, out_l.current(), &config.plant, t, config.ts, config.substeps, |ts, s| {
                operator_torque(if hold { t } else { ts }, s, &operator)
            })
            .map_err(|source| RunnerError::Plant { step: k, source })?;
            follower = advance_follower(follower, out_f.current(), config, &wall, t, k)?;
        }
    }

    Ok(SavingRun { logs, dataset, equivalence: stats, cmults_per_step })
}

/// Scales a saved dataset. Needs no secret key: the public key is rebuilt
/// from the dataset header.
pub fn run_scaling(config: &ScenarioConfig, dataset: &MotionDataset, alpha: ScalingParams) -> Result<MotionDataset> {
    let pk = dataset.header().public_key(&mut phase_rng(config.crypto.seed, STREAM_VALIDATION))?;
    let mut rng = phase_rng(config.crypto.seed, STREAM_SCALING);
    Ok(scale_dataset(&pk, dataset, alpha, config.gains.gamma_alpha, &mut rng)?)
}

pub fn run_loading(config: &ScenarioConfig, dataset: &MotionDataset) -> Result<LoadingRun> {
    config.validate()?;
    let (pk, sk) = derive_keys(config)?;
    run_loading_with_keys(config, &pk, &sk, dataset)
}

/// The loading phase: the follower alone, with `θ_l` and `τ̂e_l` slots filled
/// by the stored ciphertexts. Local slots are encoded at `γ_ξ γ_α` so every
/// product carries the same total gain. The follower's own `τ̂e` is the live one.
///
/// The wall follows the dataset's scenario label; step count and period come
/// from its header.
pub fn run_loading_with_keys(
    config: &ScenarioConfig,
    pk: &PublicKey,
    sk: &SecretKey,
    dataset: &MotionDataset,
) -> Result<LoadingRun> {
    config.validate()?;
    let header = dataset.header();
    if !header.matches(pk) {
        return Err(RunnerError::Dataset("dataset was saved under a different key".into()));
    }
    if !dataset.is_complete() || dataset.is_empty() {
        return Err(RunnerError::Dataset(format!("dataset has {} of {} records", dataset.len(), header.n + 1)));
    }
    if header.gamma_xi != config.gains.gamma_xi {
        return Err(RunnerError::Dataset(format!(
            "dataset gamma_xi {} differs from configured {}",
            header.gamma_xi, config.gains.gamma_xi
        )));
    }
    if header.ts != config.ts {
        return Err(RunnerError::Dataset(format!("dataset Ts {} differs from configured {}", header.ts, config.ts)));
    }
    let scenario: Scenario = header.scenario.parse()?;
    let wall = config.environment(scenario);

    let mut rng = phase_rng(config.crypto.seed, STREAM_LOADING);
    let cloud = Cloud::new(config, pk, &mut rng)?;
    let gains = StepGains::loading(&config.gains, header.gamma_alpha);
    let ref_gain = header.gamma_xi * header.gamma_alpha;
    let n = header.n;

    let mut logs = Vec::with_capacity(n + 1);
    let mut stats = EquivalenceStats::default();
    let mut follower = PlantState::default();
    let mut x_f = ControllerState::default();
    let mut tau_f = 0.0;

    for k in 0..=n {
        let t = k as f64 * config.ts;
        let (c_theta, c_tau) = dataset.fetch(k)?;
        // for the log and the plaintext reference only
        let ref_theta = codec::dec_real(pk, sk, c_theta, ref_gain)?;
        let ref_tau = codec::dec_real(pk, sk, c_tau, ref_gain)?;

        let (th_f, om_f, f_f) = measure(&follower, &config.plant);
        let v = ExogenousInput {
            theta_other: ref_theta,
            theta_own: th_f,
            omega_own: om_f,
            tau_e_other: ref_tau,
            tau_e_own: tau_f,
            friction: f_f,
        };
        let supplied = [(slot::THETA_OTHER, c_theta.clone()), (slot::TAU_E_OTHER, c_tau.clone())];
        let started = Instant::now();
        let step = step_encrypted_controller(pk, sk, &cloud.enc_phi, x_f, v, gains, &supplied, &mut rng)
            .map_err(|source| RunnerError::Controller { step: k, side: Side::Follower, source })?;
        let elapsed = started.elapsed().as_secs_f64();

        let xi = ControllerInput::new(x_f, v);
        stats.check(k, Side::Follower, &cloud.phi, &cloud.phi_err, &xi, &step.input_error, &step.output)?;

        let out = step.output;
        logs.push(StepLog {
            k,
            t,
            theta_l: ref_theta,
            theta_f: th_f,
            omega_l: f64::NAN,
            omega_f: om_f,
            tau_e_hat_l: ref_tau,
            tau_e_hat_f: out.tau_e_hat(),
            i_l: f64::NAN,
            i_f: out.current(),
            step_wall_time: elapsed,
        });
        x_f = out.next_state();
        tau_f = out.tau_e_hat();
        if k < n {
            follower = advance_follower(follower, out.current(), config, &wall, t, k)?;
        }
    }
    Ok(LoadingRun { logs, equivalence: stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario, steps: usize) -> ScenarioConfig {
        ScenarioConfig { scenario, steps, crypto: CryptoConfig { lambda: 128, seed: 5 }, ..Default::default() }
    }

    #[test]
    fn phase_streams_differ() {
        use rand::RngCore;
        let a = phase_rng(1, STREAM_SAVING).next_u64();
        let b = phase_rng(1, STREAM_LOADING).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, phase_rng(1, STREAM_SAVING).next_u64());
    }

    #[test]
    fn saving_records_every_step() {
        let run = run_saving(&small(Scenario::Free, 20)).unwrap();
        assert_eq!(run.logs.len(), 21);
        assert_eq!(run.dataset.len(), 21);
        assert!(run.dataset.is_complete());
        assert!(run.cmults_per_step.iter().all(|&c| c == 176));
        assert_eq!(run.equivalence.evaluations, 42);
        assert!(run.equivalence.max_budget_ratio <= 1.0);
    }

    #[test]
    fn loading_rejects_mismatched_datasets() {
        let cfg = small(Scenario::Free, 5);
        let saved = run_saving(&cfg).unwrap().dataset;

        let other_key = ScenarioConfig { crypto: CryptoConfig { lambda: 128, seed: 6 }, ..cfg.clone() };
        assert!(matches!(run_loading(&other_key, &saved), Err(RunnerError::Dataset(_))));

        let other_gain =
            ScenarioConfig { gains: codec::QuantizationGains { gamma_xi: 1e5, ..cfg.gains }, ..cfg.clone() };
        assert!(matches!(run_loading(&other_gain, &saved), Err(RunnerError::Dataset(_))));

        let (pk, _) = derive_keys(&cfg).unwrap();
        let empty = MotionDataset::new(DatasetHeader::for_key(&pk, 1e6, 0.02, 5, "free"));
        assert!(matches!(run_loading(&cfg, &empty), Err(RunnerError::Dataset(_))));
    }

    #[test]
    fn loading_logs_have_no_leader_state() {
        let cfg = small(Scenario::Free, 5);
        let saved = run_saving(&cfg).unwrap();
        let loaded = run_loading(&cfg, &saved.dataset).unwrap();
        assert_eq!(loaded.logs.len(), 6);
        assert!(loaded.logs.iter().all(|l| l.omega_l.is_nan() && l.i_l.is_nan()));
        for (s, l) in saved.logs.iter().zip(&loaded.logs) {
            assert!((s.theta_l - l.theta_l).abs() < 2e-6);
        }
    }

    #[test]
    fn csv_shape() {
        let run = run_saving(&small(Scenario::Free, 3)).unwrap();
        let csv = logs_to_csv(&run.logs, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 10));
        let timed = logs_to_csv(&run.logs, true);
        assert!(timed.lines().all(|l| l.split(',').count() == 11));
    }
}
