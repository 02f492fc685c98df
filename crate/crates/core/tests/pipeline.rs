use encmotion_core::codec::dec_real;
use encmotion_core::crypto::{format_key_file, keygen, parse_key_file};
use encmotion_core::memory::{MotionDataset, ScalingParams};
use encmotion_core::runner::{
    derive_keys, logs_to_csv, run_loading, run_pipeline, run_saving, run_scaling, CryptoConfig, RunnerError, Scenario,
    ScenarioConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn cfg(scenario: Scenario, steps: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig { scenario, steps, crypto: CryptoConfig { lambda: 128, seed }, ..Default::default() }
}

#[test]
fn save_scale_load_through_files() {
    let config = cfg(Scenario::Free, 60, 3);
    let dir = tempfile::tempdir().unwrap();
    let saved = run_saving(&config).unwrap();
    let raw = dir.path().join("raw.emc");
    saved.dataset.save_file(&raw).unwrap();

    let alpha = ScalingParams { alpha_x: 2.0, alpha_y: 1.0 };
    let scaled = run_scaling(&config, &MotionDataset::load_file(&raw).unwrap(), alpha).unwrap();
    let scaled_path = dir.path().join("scaled.emc");
    scaled.save_file(&scaled_path).unwrap();

    let reread = MotionDataset::load_file(&scaled_path).unwrap();
    assert_eq!(reread, scaled);
    let loaded = run_loading(&config, &reread).unwrap();
    for (s, l) in saved.logs.iter().zip(&loaded.logs) {
        assert!((l.theta_l - 2.0 * s.theta_l).abs() < 2e-5, "k={}", s.k);
        assert!((l.tau_e_hat_l - s.tau_e_hat_l).abs() < 2e-5, "k={}", s.k);
    }
}

#[test]
fn stored_records_are_the_leader_signals() {
    let config = cfg(Scenario::Contact, 40, 4);
    let (pk, sk) = derive_keys(&config).unwrap();
    let saved = run_saving(&config).unwrap();
    assert_eq!(saved.dataset.len(), 41);
    for (log, (c_theta, c_tau)) in saved.logs.iter().zip(saved.dataset.records()) {
        assert!((dec_real(&pk, &sk, c_theta, 1e6).unwrap() - log.theta_l).abs() < 1e-5);
        assert!((dec_real(&pk, &sk, c_tau, 1e6).unwrap() - log.tau_e_hat_l).abs() < 1e-5);
    }
}

#[test]
fn same_seed_same_bytes_other_seed_other_bytes() {
    let a = run_saving(&cfg(Scenario::Contact, 25, 11)).unwrap();
    let b = run_saving(&cfg(Scenario::Contact, 25, 11)).unwrap();
    let c = run_saving(&cfg(Scenario::Contact, 25, 12)).unwrap();
    assert_eq!(a.dataset.to_text().unwrap(), b.dataset.to_text().unwrap());
    assert_eq!(logs_to_csv(&a.logs, false), logs_to_csv(&b.logs, false));
    assert_ne!(a.dataset.to_text().unwrap(), c.dataset.to_text().unwrap());
    // the plant never sees ciphertexts, only decoded values: close but not bit-equal
    let max_diff = a.logs.iter().zip(&c.logs).map(|(x, y)| (x.theta_f - y.theta_f).abs()).fold(0.0, f64::max);
    assert!(max_diff < 1e-4);
}

#[test]
fn key_file_matches_the_seeded_key() {
    let config = cfg(Scenario::Free, 1, 5);
    let (pk, sk) = derive_keys(&config).unwrap();
    let text = format_key_file(&pk, &sk);
    let (pk2, _) = parse_key_file(&text, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
    assert_eq!(pk2, pk);
    assert_eq!(derive_keys(&config).unwrap().0, pk);
}

#[test]
fn loading_refuses_foreign_and_truncated_data() {
    let config = cfg(Scenario::Free, 10, 6);
    let saved = run_saving(&config).unwrap();

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (other_pk, _) = keygen(128, &mut rng).unwrap();
    assert_ne!(&other_pk, &derive_keys(&config).unwrap().0);
    let other = ScenarioConfig { crypto: CryptoConfig { lambda: 128, seed: 7 }, ..config.clone() };
    assert!(matches!(run_loading(&other, &saved.dataset), Err(RunnerError::Dataset(_))));

    let text = saved.dataset.to_text().unwrap();
    let truncated: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
    assert!(MotionDataset::from_text(&truncated).is_err());

    let slower = ScenarioConfig { ts: 0.01, ..config };
    assert!(matches!(run_loading(&slower, &saved.dataset), Err(RunnerError::Dataset(_))));
}

#[test]
fn contact_label_brings_the_wall_to_loading() {
    // a free-motion config loading a contact dataset still meets the wall
    let contact = cfg(Scenario::Contact, 300, 8);
    let saved = run_saving(&contact).unwrap();
    let free = ScenarioConfig { scenario: Scenario::Free, ..contact.clone() };
    let loaded = run_loading(&free, &saved.dataset).unwrap();
    let same = run_loading(&contact, &saved.dataset).unwrap();
    assert_eq!(logs_to_csv(&loaded.logs, false), logs_to_csv(&same.logs, false));
    assert!(loaded.logs.iter().any(|l| l.tau_e_hat_f.abs() > 0.05));
}

#[test]
fn free_motion_has_near_zero_torque_estimates() {
    let out = run_pipeline(&cfg(Scenario::Free, 300, 9), None).unwrap();
    assert!(out.report.passed(), "{}", out.report);
    let peak_theta = out.saving.logs.iter().map(|l| l.theta_l.abs()).fold(0.0, f64::max);
    let mean_tau = out.saving.logs.iter().map(|l| l.tau_e_hat_f.abs()).sum::<f64>() / out.saving.logs.len() as f64;
    assert!(peak_theta > 0.3);
    assert!(mean_tau < 0.05, "mean |τ̂e_f| = {mean_tau}");
}

#[test]
fn bad_config_is_rejected_before_running() {
    let zero = ScenarioConfig { steps: 0, ..Default::default() };
    assert!(matches!(run_saving(&zero), Err(RunnerError::Config(_))));
    let tiny = cfg(Scenario::Free, 5, 1);
    let tiny = ScenarioConfig { crypto: CryptoConfig { lambda: 8, ..tiny.crypto }, ..tiny };
    assert!(matches!(run_saving(&tiny), Err(RunnerError::Config(_))));
}
