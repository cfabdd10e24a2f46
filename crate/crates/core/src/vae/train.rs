use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid_config, invalid_input, Result};
use crate::rng::{substream, Substream};
use crate::signal::{fir_convolve, ComplexSeq, PaddingMode};
use crate::vae::adam::{Adam, AdamConfig};
use crate::vae::decoder::{decoder_forward, detect_symbols, DecoderParams, SymbolPosteriors, CONV1_LEN};
use crate::vae::grad::loss_gradients;


#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Sub-sequence length per update; clipped to the training length.
    pub subseq_len: usize,
    pub adam: AdamConfig,
    pub max_updates: usize,
    /// Updates without a significant improvement of the monitored fit before stopping.
    pub patience_window: usize,
    /// Updates between evaluations of the monitored fit.
    pub monitor_every: usize,
    /// Leading samples of the training sequence used for the monitored fit.
    pub monitor_len: usize,
    /// Smallest relative drop of the monitored residual energy that counts as progress.
    pub rel_tol: f64,
    pub hhat_len: usize,
    pub padding_mode: PaddingMode,
    pub init_seed: u64,
    pub hhat_init_std: f64,
    pub decoder_init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            subseq_len: 128,
            adam: AdamConfig::default(),
            max_updates: 100_000,
            patience_window: 500,
            monitor_every: 10,
            monitor_len: 4096,
            rel_tol: 2e-2,
            hhat_len: 5,
            padding_mode: PaddingMode::Centered,
            init_seed: 0,
            hhat_init_std: 0.01,
            decoder_init_std: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subseq_len < CONV1_LEN {
            return Err(invalid_config(format!(
                "sub-sequence length must be at least {CONV1_LEN}, got {}",
                self.subseq_len
            )));
        }
        if self.hhat_len == 0 || self.hhat_len > self.subseq_len {
            return Err(invalid_config(format!(
                "channel estimate length {} must lie in 1..={}",
                self.hhat_len, self.subseq_len
            )));
        }
        self.padding_mode.origin(self.hhat_len)?;
        if self.patience_window == 0 || self.max_updates == 0 || self.monitor_every == 0 || self.monitor_len == 0 {
            return Err(invalid_config(
                "patience window, monitor interval, monitor length and update budget must be positive",
            ));
        }
        if !(self.adam.learning_rate > 0.0) || !(self.rel_tol >= 0.0) {
            return Err(invalid_config("learning rate must be positive and tolerance non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub updates_used: usize,
    /// Update count at which the returned parameters were captured.
    pub best_update: usize,
    /// Sub-sequence loss of every update.
    pub loss_trace: Vec<f64>,
    /// `(update, ln of the mean hard-decision residual energy)` at every evaluation.
    pub monitor_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub hhat: ComplexSeq,
    pub sigma2_hat: f64,
    /// Sub-sequence length actually used.
    pub subseq_len: usize,
}

/// Jointly learned decoder and channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub decoder: DecoderParams,
    pub hhat: ComplexSeq,
    pub padding_mode: PaddingMode,
}

impl VaeModel {
    /// Impulse channel estimate plus small complex Gaussian jitter, random decoder.
    pub fn initial(cfg: &TrainConfig) -> Result<Self> {
        let origin = cfg.padding_mode.origin(cfg.hhat_len)?;
        let mut rng = substream(cfg.init_seed, Substream::Init);
        let decoder = DecoderParams::random(&mut rng, cfg.decoder_init_std);
        let jitter = Normal::new(0.0, cfg.hhat_init_std).map_err(|e| invalid_config(e.to_string()))?;
        let mut hhat = ComplexSeq::impulse(cfg.hhat_len, origin);
        for t in 0..cfg.hhat_len {
            let v = hhat.get(t) + Complex64::new(jitter.sample(&mut rng), jitter.sample(&mut rng));
            hhat.set(t, v);
        }
        Ok(Self {
            decoder,
            hhat,
            padding_mode: cfg.padding_mode,
        })
    }

    pub fn posteriors(&self, y: &ComplexSeq) -> Result<SymbolPosteriors> {
        decoder_forward(&self.decoder, y)
    }

    pub fn detect(&self, y: &ComplexSeq) -> Result<ComplexSeq> {
        self.posteriors(y).map(|q| detect_symbols(&q))
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.decoder.to_flat();
        flat.extend_from_slice(self.hhat.re());
        flat.extend_from_slice(self.hhat.im());
        flat
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let (dec, h) = flat.split_at(DecoderParams::FLAT_LEN);
        self.decoder = DecoderParams::from_flat(dec)?;
        let m = self.hhat.len();
        self.hhat.re_mut().copy_from_slice(&h[..m]);
        self.hhat.im_mut().copy_from_slice(&h[m..]);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: VaeModel,
    pub report: TrainReport,
}

/// Fits decoder and channel estimate to `train_observed` by Adam on the
/// profiled negative ELBO, one random contiguous sub-sequence per update.
///
/// Progress is tracked on a fixed leading block of the training data through
/// `ln(mean |y - x̂ ∗ ĥ|²)` with hard decisions `x̂`. The ELBO itself keeps
/// creeping down while posteriors sharpen without changing any decision, and
/// its minibatch values are too noisy to compare. Training stops once this
/// fit has not dropped by `rel_tol` for `patience_window` updates, and the
/// parameters from the last significant drop are returned.
pub fn train(train_observed: &ComplexSeq, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let total = train_observed.len();
    let n = cfg.subseq_len.min(total);
    if n < CONV1_LEN {
        return Err(invalid_input(format!(
            "training sequence of length {total} is shorter than the decoder's {CONV1_LEN} taps"
        )));
    }
    if cfg.hhat_len > n {
        return Err(invalid_input(format!(
            "channel estimate length {} exceeds sub-sequence length {n}",
            cfg.hhat_len
        )));
    }

    let monitor_block = train_observed.slice(0, total.min(cfg.monitor_len));
    let monitored = |model: &VaeModel| -> Result<f64> {
        let x = model.detect(&monitor_block)?;
        let fit = fir_convolve(&x, &model.hhat, model.padding_mode)?;
        let r: f64 = fit.iter().zip(monitor_block.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((r / monitor_block.len() as f64).max(f64::MIN_POSITIVE).ln())
    };

    let mut model = VaeModel::initial(cfg)?;
    let mut flat = model.to_flat();
    let mut adam = Adam::new(flat.len(), cfg.adam);
    let mut batches = substream(cfg.init_seed, Substream::Batches);

    let mut trace = Vec::with_capacity(cfg.max_updates.min(1 << 16));
    let first = monitored(&model)?;
    let mut monitor_trace = vec![(0, first)];
    let (mut best_loss, mut best_update, mut best_flat) = (first, 0, flat.clone());
    let mut converged = false;
    let mut grad_flat = Vec::with_capacity(flat.len());
    while trace.len() < cfg.max_updates {
        let start = batches.random_range(0..=total - n);
        let y = train_observed.slice(start, n);
        let g = loss_gradients(&y, &model.decoder, &model.hhat, model.padding_mode)?;
        trace.push(g.breakdown.loss);

        grad_flat.clear();
        grad_flat.extend(g.decoder.to_flat());
        grad_flat.extend_from_slice(g.hhat.re());
        grad_flat.extend_from_slice(g.hhat.im());
        adam.update(&mut flat, &grad_flat);
        model.load_flat(&flat)?;

        let t = trace.len();
        if t % cfg.monitor_every == 0 {
            let current = monitored(&model)?;
            monitor_trace.push((t, current));
            if best_loss - current > cfg.rel_tol {
                best_loss = current;
                best_update = t;
                best_flat.copy_from_slice(&flat);
            } else if t - best_update >= cfg.patience_window {
                converged = true;
                break;
            }
        }
    }
    model.load_flat(&best_flat)?;

    let q = model.posteriors(train_observed)?;
    let sigma2_hat = crate::vae::elbo::loss(train_observed, &model.hhat, model.padding_mode, &q)?.sigma2_hat;
    let report = TrainReport {
        updates_used: trace.len(),
        best_update,
        loss_trace: trace,
        monitor_trace,
        converged,
        hhat: model.hhat.clone(),
        sigma2_hat,
        subseq_len: n,
    };
    Ok(TrainOutcome { model, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::resolve_ambiguity;
    use crate::signal::{generate_dataset, ChannelSpec};

    #[test]
    fn learns_the_delta_channel_exactly() {
        let delta = ChannelSpec::preset("h1").map(|mut c| {
            c.taps = ComplexSeq::impulse(1, 0);
            c
        });
        let data = generate_dataset(&delta.unwrap(), 2000, 5000, 300.0, 11).unwrap();
        let out = train(&data.train_observed, &TrainConfig::default()).unwrap();
        let est = out.model.detect(&data.test_observed).unwrap();
        let r = resolve_ambiguity(&est, &data.test_symbols, 5).unwrap();
        assert_eq!(r.errors, 0, "{r:?}");
    }

    #[test]
    fn same_seed_same_report() {
        let data = generate_dataset(&ChannelSpec::preset("h1").unwrap(), 400, 10, 8.0, 3).unwrap();
        let cfg = TrainConfig {
            max_updates: 400,
            init_seed: 5,
            ..TrainConfig::default()
        };
        let a = train(&data.train_observed, &cfg).unwrap();
        let b = train(&data.train_observed, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&data.train_observed, &TrainConfig { init_seed: 6, ..cfg }).unwrap();
        assert_ne!(a.report.loss_trace, c.report.loss_trace);
    }

    #[test]
    fn budget_and_report_invariants() {
        let data = generate_dataset(&ChannelSpec::preset("h1").unwrap(), 300, 10, 6.0, 4).unwrap();
        let cfg = TrainConfig {
            max_updates: 120,
            ..TrainConfig::default()
        };
        let out = train(&data.train_observed, &cfg).unwrap();
        let r = &out.report;
        assert!(!r.converged);
        assert_eq!(r.updates_used, 120);
        assert_eq!(r.loss_trace.len(), 120);
        assert!(r.best_update <= r.updates_used);
        assert_eq!(r.hhat, out.model.hhat);
        assert_eq!(r.monitor_trace.len(), 1 + 120 / cfg.monitor_every);
        assert!(r.sigma2_hat > 0.0);
    }

    #[test]
    fn short_inputs_use_the_whole_sequence() {
        let data = generate_dataset(&ChannelSpec::preset("h1").unwrap(), 50, 10, 10.0, 5).unwrap();
        let cfg = TrainConfig {
            max_updates: 30,
            ..TrainConfig::default()
        };
        assert_eq!(train(&data.train_observed, &cfg).unwrap().report.subseq_len, 50);
        assert!(train(&data.train_observed.slice(0, 4), &cfg).is_err());
        let bad = TrainConfig {
            hhat_len: 4,
            ..TrainConfig::default()
        };
        assert!(matches!(bad.validate(), Err(crate::Error::InvalidConfig(_))));
    }
}
