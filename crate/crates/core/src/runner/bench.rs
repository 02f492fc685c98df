use std::fmt;

use super::{run_saving, Result, ScenarioConfig};

/// Wall time of one control step: both controller round trips, i.e. two
/// encryptions of ξ, 176 ciphertext multiplications and 176 decryptions.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub lambda: u64,
    pub steps: usize,
    pub ts: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub mean: f64,
    pub fits_within_ts: bool,
    /// Ciphertext multiplications per step; the same for every step or `None`.
    pub cmults_per_step: Option<u64>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |s: f64| s * 1e3;
        writeln!(f, "lambda           {} bit", self.lambda)?;
        writeln!(f, "steps            {}", self.steps)?;
        match self.cmults_per_step {
            Some(c) => writeln!(f, "cmults/step      {c}")?,
            None => writeln!(f, "cmults/step      varies")?,
        }
        writeln!(f, "step p50         {:.3} ms", ms(self.p50))?;
        writeln!(f, "step p95         {:.3} ms", ms(self.p95))?;
        writeln!(f, "step max         {:.3} ms", ms(self.max))?;
        writeln!(f, "step mean        {:.3} ms", ms(self.mean))?;
        write!(f, "fits within Ts   {} (Ts = {:.3} ms, judged on p95)", self.fits_within_ts, ms(self.ts))
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times a saving run of `config.steps` steps.
pub fn bench(config: &ScenarioConfig) -> Result<BenchReport> {
    let run = run_saving(config)?;
    let mut times: Vec<f64> = run.logs.iter().map(|l| l.step_wall_time).collect();
    times.sort_by(f64::total_cmp);
    let p95 = percentile(&times, 95.0);
    let first = run.cmults_per_step[0];
    Ok(BenchReport {
        lambda: config.crypto.lambda,
        steps: times.len(),
        ts: config.ts,
        p50: percentile(&times, 50.0),
        p95,
        max: *times.last().expect("at least one step"),
        mean: times.iter().sum::<f64>() / times.len() as f64,
        fits_within_ts: p95 <= config.ts,
        cmults_per_step: run.cmults_per_step.iter().all(|&c| c == first).then_some(first),
    })
}
