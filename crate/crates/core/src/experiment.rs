//! Seeded multi-trial experiments and their CSV output.
//!
//! Every `(snr, trial)` cell derives its own seed from the base seed, the SNR
//! and the training length, so a cell's outcome does not depend on which
//! worker runs it or in which order. Rows come back in canonical order
//! (equalizer, snr, trial) whatever the pool size.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{cma_train, equalize_apply, mmse_lms_train, slicer_qpsk, AdaptConfig};
use crate::error::{invalid_config, Error, Result};
use crate::eval::{channel_alignment_distance, resolve_ambiguity};
use crate::rng::derive_seed;
use crate::signal::{generate_dataset, ChannelSpec, Dataset, DEFAULT_TEST_LEN};
use crate::vae::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EqualizerKind {
    Vae,
    Cma,
    Mmse,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 3] = [EqualizerKind::Vae, EqualizerKind::Cma, EqualizerKind::Mmse];

    pub fn name(self) -> &'static str {
        match self {
            EqualizerKind::Vae => "vae",
            EqualizerKind::Cma => "cma",
            EqualizerKind::Mmse => "mmse",
        }
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vae" => Ok(EqualizerKind::Vae),
            "cma" => Ok(EqualizerKind::Cma),
            "mmse" => Ok(EqualizerKind::Mmse),
            other => Err(invalid_config(format!("unknown equalizer {other:?}, expected vae, cma or mmse"))),
        }
    }
}

/// One sweep over an SNR grid at a fixed training length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Name written to the `channel` column.
    pub channel_name: String,
    pub channel: ChannelSpec,
    pub snr_grid: Vec<f64>,
    pub train_len: usize,
    pub trials: usize,
    pub test_len: usize,
    /// Run in this order; duplicates are rejected.
    pub equalizers: Vec<EqualizerKind>,
    pub base_seed: u64,
    /// VAE settings. `init_seed` is replaced by each cell's seed.
    pub vae: TrainConfig,
    pub cma: AdaptConfig,
    pub mmse: AdaptConfig,
    /// Appended to the equalizer name in every row, e.g. `[N=10]`.
    pub tag: String,
}

impl ExperimentSpec {
    /// Paper defaults: 20 trials, 10 000 test symbols, all three equalizers,
    /// sub-sequence length `min(128, train_len)`.
    pub fn new(channel_name: impl Into<String>, channel: ChannelSpec, snr_grid: Vec<f64>, train_len: usize) -> Self {
        let vae = TrainConfig {
            subseq_len: train_len.min(128),
            ..TrainConfig::default()
        };
        Self {
            channel_name: channel_name.into(),
            channel,
            snr_grid,
            train_len,
            trials: 20,
            test_len: DEFAULT_TEST_LEN,
            equalizers: EqualizerKind::ALL.to_vec(),
            base_seed: 0,
            vae,
            cma: AdaptConfig::cma(),
            mmse: AdaptConfig::mmse(),
            tag: String::new(),
        }
    }

    /// Delay search radius shared by every equalizer of the spec.
    pub fn max_delay(&self) -> usize {
        self.vae.hhat_len.max(self.cma.taps).max(self.mmse.taps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid_config("at least one trial is required"));
        }
        if self.snr_grid.is_empty() || self.equalizers.is_empty() {
            return Err(invalid_config("SNR grid and equalizer list must be non-empty"));
        }
        if let Some(bad) = self.snr_grid.iter().find(|s| !s.is_finite()) {
            return Err(invalid_config(format!("SNR {bad} is not finite")));
        }
        let mut kinds = self.equalizers.clone();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.equalizers.len() {
            return Err(invalid_config("equalizer list has duplicates"));
        }
        if self.train_len == 0 {
            return Err(invalid_config("training length must be positive"));
        }
        if self.test_len <= self.max_delay() {
            return Err(invalid_config(format!(
                "test length {} must exceed the delay search radius {}",
                self.test_len,
                self.max_delay()
            )));
        }
        if self.equalizers.contains(&EqualizerKind::Vae) {
            self.vae.validate()?;
        }
        if self.tag.contains([',', '"', '\n', '\r']) {
            return Err(invalid_config("tag must not contain CSV delimiters"));
        }
        Ok(())
    }

    /// Seed of the `(snr, trial)` cell. Arms of different equalizers, ĥ
    /// lengths or sub-sequence lengths share data when their training length
    /// matches.
    pub fn cell_seed(&self, snr_db: f64, trial: usize) -> u64 {
        derive_seed(self.base_seed, &[snr_db.to_bits(), self.train_len as u64, trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Equalizer name plus the spec tag.
    pub equalizer: String,
    pub channel: String,
    pub snr_db: f64,
    pub trial: usize,
    pub outcome: std::result::Result<TrialMetrics, String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub ser: f64,
    pub rotation_deg: u32,
    pub delay: i64,
    /// VAE only.
    pub updates: Option<usize>,
    /// VAE only.
    pub hhat_distance: Option<f64>,
}

fn run_one(spec: &ExperimentSpec, kind: EqualizerKind, data: &Dataset, seed: u64) -> Result<TrialMetrics> {
    let d = spec.max_delay();
    let (estimate, updates, hhat_distance) = match kind {
        EqualizerKind::Vae => {
            let cfg = TrainConfig {
                init_seed: seed,
                ..spec.vae.clone()
            };
            let out = train(&data.train_observed, &cfg)?;
            let distance = channel_alignment_distance(&spec.channel.taps, &out.model.hhat);
            (out.model.detect(&data.test_observed)?, Some(out.report.updates_used), Some(distance))
        }
        EqualizerKind::Cma => {
            let eq = cma_train(&data.train_observed, &spec.cma)?;
            (slicer_qpsk(&equalize_apply(&eq, &data.test_observed)), None, None)
        }
        EqualizerKind::Mmse => {
            let eq = mmse_lms_train(&data.train_observed, &data.truth_train_symbols, &spec.mmse)?;
            (slicer_qpsk(&equalize_apply(&eq, &data.test_observed)), None, None)
        }
    };
    let resolved = resolve_ambiguity(&estimate, &data.test_symbols, d)?;
    Ok(TrialMetrics {
        ser: resolved.ser,
        rotation_deg: resolved.rotation.degrees(),
        delay: resolved.delay,
        updates,
        hhat_distance,
    })
}

fn run_cell(spec: &ExperimentSpec, snr_db: f64, trial: usize) -> Vec<TrialResult> {
    let seed = spec.cell_seed(snr_db, trial);
    let data = generate_dataset(&spec.channel, spec.train_len, spec.test_len, snr_db, seed);
    spec.equalizers
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let outcome = match &data {
                Ok(data) => run_one(spec, kind, data, seed),
                Err(e) => Err(e.clone()),
            };
            TrialResult {
                equalizer: format!("{}{}", kind.name(), spec.tag),
                channel: spec.channel_name.clone(),
                snr_db,
                trial,
                outcome: outcome.map_err(|e| e.to_string()),
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

/// Runs every `(snr, trial)` cell on `jobs` worker threads (0 = all cores).
/// Per-trial failures become failed rows.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.snr_grid.len())
        .flat_map(|s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid_config(format!("cannot start worker pool: {e}")))?;
    let per_cell: Vec<Vec<TrialResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(s, t)| run_cell(spec, spec.snr_grid[s], t))
            .collect()
    });
    // Cells come back in (snr, trial) order; regroup by equalizer.
    let mut rows = Vec::with_capacity(cells.len() * spec.equalizers.len());
    for e in 0..spec.equalizers.len() {
        rows.extend(per_cell.iter().map(|cell| cell[e].clone()));
    }
    Ok(rows)
}

/// Mean and median SER of one `(equalizer, snr)` group over its successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub equalizer: String,
    pub channel: String,
    pub snr_db: f64,
    pub mean_ser: Option<f64>,
    pub median_ser: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Groups consecutive rows sharing `(equalizer, channel, snr)`, keeping first-seen order.
pub fn summarize(rows: &[TrialResult]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for row in rows {
        let same = |s: &SummaryRow| {
            s.equalizer == row.equalizer && s.channel == row.channel && s.snr_db.to_bits() == row.snr_db.to_bits()
        };
        let idx = match out.iter().position(|(s, _)| same(s)) {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        equalizer: row.equalizer.clone(),
                        channel: row.channel.clone(),
                        snr_db: row.snr_db,
                        mean_ser: None,
                        median_ser: None,
                        trials: 0,
                        failures: 0,
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        let (summary, sers) = &mut out[idx];
        summary.trials += 1;
        match &row.outcome {
            Ok(m) => sers.push(m.ser),
            Err(_) => summary.failures += 1,
        }
    }
    out.into_iter()
        .map(|(mut s, sers)| {
            if !sers.is_empty() {
                s.mean_ser = Some(sers.iter().sum::<f64>() / sers.len() as f64);
                s.median_ser = median(&sers);
            }
            s
        })
        .collect()
}

pub const RESULTS_HEADER: [&str; 11] = [
    "equalizer",
    "channel",
    "snr_db",
    "trial",
    "ser",
    "rotation_deg",
    "delay",
    "updates",
    "hhat_distance",
    "wall_time_s",
    "failed",
];

pub const SUMMARY_HEADER: [&str; 7] = [
    "equalizer",
    "channel",
    "snr_db",
    "mean_ser",
    "median_ser",
    "trials",
    "failures",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes per-trial rows. Wall time is left blank unless `with_timings`,
/// since it is the only field that differs between identical runs.
pub fn write_results_csv<W: Write>(out: W, rows: &[TrialResult], with_timings: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_error)?;
    for row in rows {
        let m = row.outcome.as_ref().ok();
        let timing = if with_timings { row.wall_time_s.to_string() } else { String::new() };
        w.write_record([
            row.equalizer.clone(),
            row.channel.clone(),
            row.snr_db.to_string(),
            row.trial.to_string(),
            opt(m.map(|m| m.ser)),
            opt(m.map(|m| m.rotation_deg)),
            opt(m.map(|m| m.delay)),
            opt(m.and_then(|m| m.updates)),
            opt(m.and_then(|m| m.hhat_distance)),
            timing,
            u8::from(m.is_none()).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_error)?;
    for row in rows {
        w.write_record([
            row.equalizer.clone(),
            row.channel.clone(),
            row.snr_db.to_string(),
            opt(row.mean_ser),
            opt(row.median_ser),
            row.trials.to_string(),
            row.failures.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new("h1", ChannelSpec::preset("h1").unwrap(), vec![8.0, 10.0], 300);
        spec.trials = 2;
        spec.test_len = 500;
        spec.vae.max_updates = 300;
        spec.cma.passes = 3;
        spec.mmse.passes = 3;
        spec
    }

    #[test]
    fn row_order_and_cardinality() {
        let spec = small_spec();
        let rows = run_experiment(&spec, 2).unwrap();
        assert_eq!(rows.len(), 3 * 2 * 2);
        let keys: Vec<(String, f64, usize)> = rows.iter().map(|r| (r.equalizer.clone(), r.snr_db, r.trial)).collect();
        assert_eq!(keys[0], ("vae".to_string(), 8.0, 0));
        assert_eq!(keys[3], ("vae".to_string(), 10.0, 1));
        assert_eq!(keys[4], ("cma".to_string(), 8.0, 0));
        assert_eq!(keys[11], ("mmse".to_string(), 10.0, 1));
        for r in &rows {
            let m = r.outcome.as_ref().unwrap();
            assert!((0.0..=1.0).contains(&m.ser));
            assert_eq!(m.updates.is_some(), r.equalizer == "vae");
            assert_eq!(m.hhat_distance.is_some(), r.equalizer == "vae");
        }
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 6);
        assert!(summary.iter().all(|s| s.trials == 2 && s.failures == 0));
    }

    #[test]
    fn csv_is_independent_of_worker_count() {
        let spec = small_spec();
        let bytes = |jobs| {
            let rows = run_experiment(&spec, jobs).unwrap();
            let mut buf = Vec::new();
            write_results_csv(&mut buf, &rows, false).unwrap();
            write_summary_csv(&mut buf, &summarize(&rows)).unwrap();
            buf
        };
        assert_eq!(bytes(1), bytes(3));
    }

    #[test]
    fn diverging_trials_become_failed_rows() {
        let mut spec = small_spec();
        spec.equalizers = vec![EqualizerKind::Cma];
        spec.cma.step_size = 10.0;
        let rows = run_experiment(&spec, 1).unwrap();
        assert!(rows.iter().all(|r| r.outcome.is_err()));
        let summary = summarize(&rows);
        assert_eq!(summary[0].failures, 2);
        assert_eq!(summary[0].mean_ser, None);
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &rows, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
        assert!(text.lines().nth(1).unwrap().ends_with(",,,,,,,1"));
    }

    #[test]
    fn validation() {
        let mut spec = small_spec();
        spec.trials = 0;
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.equalizers = vec![EqualizerKind::Cma, EqualizerKind::Cma];
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.test_len = 15;
        assert!(spec.validate().is_err());
        assert!("lms".parse::<EqualizerKind>().is_err());
        assert_eq!("VAE".parse::<EqualizerKind>().unwrap(), EqualizerKind::Vae);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
