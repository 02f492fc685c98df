//! Post-run checks: equivalence maxima, data-path exactness, scaling,
//! tracking and the contact third-law residual.

use std::fmt;

use num_bigint::BigUint;

use super::{
    derive_keys, run_loading_with_keys, run_saving_with_keys, run_scaling, LoadingRun, Result, SavingRun, Scenario,
    ScenarioConfig, StepLog,
};
use crate::codec::{self, encode_detailed};
use crate::crypto::{decrypt, PublicKey, SecretKey};
use crate::memory::{encoded_alpha, MotionDataset, ScalingParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= limit`.
    fn at_most(name: &'static str, value: f64, limit: f64, detail: String) -> Self {
        Self { name, value, limit, passed: value <= limit, detail }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<22} {:>12.4e} <= {:<10.4e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit,
                c.detail
            )?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "verification FAILED" })
    }
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Mean `|τ̂e_l + τ̂e_f|` over mean `|τ̂e_l|` for samples with `t` in `window`.
pub fn third_law_ratio(logs: &[StepLog], window: [f64; 2]) -> f64 {
    let inside: Vec<&StepLog> = logs.iter().filter(|l| l.t >= window[0] && l.t <= window[1]).collect();
    if inside.is_empty() {
        return f64::INFINITY;
    }
    let residual: f64 = inside.iter().map(|l| (l.tau_e_hat_l + l.tau_e_hat_f).abs()).sum();
    let magnitude: f64 = inside.iter().map(|l| l.tau_e_hat_l.abs()).sum();
    residual / magnitude
}

/// Number of records whose plaintext differs from the encoding of the logged
/// leader signal (times `α̌` when scaled). Zero tolerance.
fn data_path_mismatches(
    pk: &PublicKey,
    sk: &SecretKey,
    saved: &[StepLog],
    dataset: &MotionDataset,
    gamma_xi: f64,
    alpha: Option<(BigUint, BigUint)>,
) -> Result<(usize, usize)> {
    let mut bad = (0, 0);
    for (log, (c_theta, c_tau)) in saved.iter().zip(dataset.records()) {
        let mut want_theta = codec::encode(pk, log.theta_l, gamma_xi)?.into_inner();
        let mut want_tau = codec::encode(pk, log.tau_e_hat_l, gamma_xi)?.into_inner();
        if let Some((ax, ay)) = &alpha {
            want_theta = want_theta * ax % pk.p();
            want_tau = want_tau * ay % pk.p();
        }
        bad.0 += usize::from(*decrypt(pk, sk, c_theta)?.value() != want_theta);
        bad.1 += usize::from(*decrypt(pk, sk, c_tau)?.value() != want_tau);
    }
    let missing = saved.len().abs_diff(dataset.len());
    Ok((bad.0 + missing, bad.1 + missing))
}

/// Largest `|decoded - α x| / bound` over a sequence, where the bound is the
/// product law of the two encodings: `|α| e_x + |x| e_α + e_x e_α`.
fn scaling_ratio(
    pk: &PublicKey,
    saved: &[f64],
    loaded: &[f64],
    alpha: f64,
    gamma_xi: f64,
    gamma_alpha: f64,
) -> Result<(f64, f64)> {
    let e_alpha = encode_detailed(pk, alpha, gamma_alpha)?.abs_error(pk, alpha, gamma_alpha);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for (&x, &y) in saved.iter().zip(loaded) {
        let e_x = encode_detailed(pk, x, gamma_xi)?.abs_error(pk, x, gamma_xi);
        let bound = alpha.abs() * e_x + x.abs() * e_alpha + e_x * e_alpha + 1e-12 * (1.0 + (alpha * x).abs());
        let dev = (y - alpha * x).abs();
        worst_dev = worst_dev.max(dev);
        worst_ratio = worst_ratio.max(dev / bound);
    }
    Ok((worst_ratio, worst_dev))
}

/// Checks a saving run against the dataset that was loaded and the loading run.
/// `alpha` is the scaling applied between them, if any, at `config.gains.gamma_alpha`.
pub fn verify(
    config: &ScenarioConfig,
    pk: &PublicKey,
    sk: &SecretKey,
    saving: &SavingRun,
    loaded_dataset: &MotionDataset,
    loading: &LoadingRun,
    alpha: Option<ScalingParams>,
) -> Result<VerifyReport> {
    let v = &config.verify;
    let gamma_xi = config.gains.gamma_xi;
    let mut checks = Vec::new();

    for (name, stats) in [("saving_equivalence", &saving.equivalence), ("loading_equivalence", &loading.equivalence)] {
        checks.push(Check::at_most(
            name,
            stats.max_deviation,
            v.equivalence_max,
            format!("{} controller evaluations, max |ψ̃-ψ|/B = {:.3}", stats.evaluations, stats.max_budget_ratio),
        ));
    }

    let encoded = alpha.map(|a| encoded_alpha(pk, a, config.gains.gamma_alpha)).transpose()?;
    let (bad_theta, bad_tau) = data_path_mismatches(pk, sk, &saving.logs, loaded_dataset, gamma_xi, encoded)?;
    let records = loaded_dataset.len();
    checks.push(Check::at_most("data_path_theta", bad_theta as f64, 0.0, format!("mismatched of {records} records")));
    checks.push(Check::at_most("data_path_tau", bad_tau as f64, 0.0, format!("mismatched of {records} records")));

    let a = alpha.unwrap_or_default();
    let ga = if alpha.is_some() { config.gains.gamma_alpha } else { 1.0 };
    let saved_theta: Vec<f64> = saving.logs.iter().map(|l| l.theta_l).collect();
    let saved_tau: Vec<f64> = saving.logs.iter().map(|l| l.tau_e_hat_l).collect();
    let loaded_theta: Vec<f64> = loading.logs.iter().map(|l| l.theta_l).collect();
    let loaded_tau: Vec<f64> = loading.logs.iter().map(|l| l.tau_e_hat_l).collect();
    let (r, dev) = scaling_ratio(pk, &saved_theta, &loaded_theta, a.alpha_x, gamma_xi, ga)?;
    checks.push(Check::at_most(
        "scaling_theta",
        r,
        1.0,
        format!("max |dev|/bound; α_x = {}, max dev {dev:.3e}", a.alpha_x),
    ));
    let (r, dev) = scaling_ratio(pk, &saved_tau, &loaded_tau, a.alpha_y, gamma_xi, ga)?;
    checks.push(Check::at_most(
        "scaling_tau",
        r,
        1.0,
        format!("max |dev|/bound; α_y = {}, max dev {dev:.3e}", a.alpha_y),
    ));

    let tracking = rms(saving.logs.iter().zip(&loading.logs).map(|(s, l)| l.theta_f - a.alpha_x * s.theta_l));
    checks.push(Check::at_most(
        "tracking_rms",
        tracking,
        v.tracking_rms_max,
        format!("loaded θ_f vs {} · saved θ_l (rad)", a.alpha_x),
    ));

    if config.scenario == Scenario::Contact {
        let ratio = third_law_ratio(&saving.logs, v.contact_window);
        checks.push(Check::at_most(
            "third_law",
            ratio,
            v.third_law_ratio_max,
            format!("mean|τ̂e_l+τ̂e_f| / mean|τ̂e_l| on [{}, {}] s", v.contact_window[0], v.contact_window[1]),
        ));
    }

    Ok(VerifyReport { checks })
}

/// Everything one end-to-end run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub pk: PublicKey,
    pub sk: SecretKey,
    pub saving: SavingRun,
    /// The dataset handed to loading: the saved one, or its scaled copy.
    pub loaded_dataset: MotionDataset,
    pub loading: LoadingRun,
    pub report: VerifyReport,
}

/// Save, optionally scale, load, verify.
pub fn run_pipeline(config: &ScenarioConfig, alpha: Option<ScalingParams>) -> Result<PipelineOutcome> {
    config.validate()?;
    let (pk, sk) = derive_keys(config)?;
    let saving = run_saving_with_keys(config, &pk, &sk)?;
    let loaded_dataset = match alpha {
        Some(a) => run_scaling(config, &saving.dataset, a)?,
        None => saving.dataset.clone(),
    };
    let loading = run_loading_with_keys(config, &pk, &sk, &loaded_dataset)?;
    let report = verify(config, &pk, &sk, &saving, &loaded_dataset, &loading, alpha)?;
    Ok(PipelineOutcome { pk, sk, saving, loaded_dataset, loading, report })
}
