//! Complex sequences, the QPSK source, the FIR ISI channel and calibrated AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid_config, invalid_input, Result};
use crate::rng::{substream, Substream};

/// Complex samples stored as separate in-phase and quadrature rails.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexSeq {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexSeq {
    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(invalid_input(format!(
                "rail lengths differ: {} real vs {} imaginary",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn from_complex<I: IntoIterator<Item = Complex64>>(samples: I) -> Self {
        let (re, im) = samples.into_iter().map(|c| (c.re, c.im)).unzip();
        Self { re, im }
    }

    /// Unit impulse of length `len` at `index`.
    pub fn impulse(len: usize, index: usize) -> Self {
        let mut s = Self::zeros(len);
        s.re[index] = 1.0;
        s
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn re_mut(&mut self) -> &mut [f64] {
        &mut self.re
    }

    pub fn im_mut(&mut self) -> &mut [f64] {
        &mut self.im
    }

    #[inline]
    pub fn get(&self, k: usize) -> Complex64 {
        Complex64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: Complex64) {
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Complex64> + '_ {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        self.iter().collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::from_complex(self.iter().map(|c| c * factor))
    }

    /// Element-wise sum. Panics on length mismatch.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "length mismatch in add");
        Self::from_complex(self.iter().zip(other.iter()).map(|(a, b)| a + b))
    }

    /// Contiguous window `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        Self {
            re: self.re[start..start + len].to_vec(),
            im: self.im[start..start + len].to_vec(),
        }
    }
}

impl FromIterator<Complex64> for ComplexSeq {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        Self::from_complex(iter)
    }
}

/// How a length-M filter is aligned against the input when the output keeps
/// the input length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingMode {
    /// Taps `h_0..h_{M-1}`, input zero before index 0.
    #[default]
    Causal,
    /// Taps `h_{-(M-1)/2}..h_{(M-1)/2}`, input zero-padded on both sides. Odd M only.
    Centered,
}

impl PaddingMode {
    /// Index of `h_0` inside the stored tap vector.
    pub fn origin(self, taps: usize) -> Result<usize> {
        match self {
            PaddingMode::Causal => Ok(0),
            PaddingMode::Centered if taps % 2 == 1 => Ok((taps - 1) / 2),
            PaddingMode::Centered => Err(invalid_config(format!(
                "centered padding needs an odd tap count, got {taps}"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PaddingMode::Causal => "causal",
            PaddingMode::Centered => "centered",
        }
    }
}

impl std::str::FromStr for PaddingMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(PaddingMode::Causal),
            "centered" => Ok(PaddingMode::Centered),
            other => Err(invalid_config(format!("unknown padding mode {other:?}"))),
        }
    }
}

/// Generative channel parameters: FIR taps and total complex noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub taps: ComplexSeq,
    pub noise_variance: f64,
    pub padding_mode: PaddingMode,
}

impl ChannelSpec {
    pub fn new(taps: ComplexSeq, noise_variance: f64, padding_mode: PaddingMode) -> Result<Self> {
        if taps.is_empty() {
            return Err(invalid_config("channel needs at least one tap"));
        }
        if !(noise_variance >= 0.0) {
            return Err(invalid_input(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        padding_mode.origin(taps.len())?;
        Ok(Self {
            taps,
            noise_variance,
            padding_mode,
        })
    }

    /// Noiseless causal channel from one of the built-in presets.
    pub fn preset(name: &str) -> Result<Self> {
        let taps = preset_taps(name).ok_or_else(|| {
            invalid_config(format!(
                "unknown channel {name:?}; presets are {}",
                PRESET_NAMES.join(", ")
            ))
        })?;
        Self::new(taps, 0.0, PaddingMode::Causal)
    }
}

pub const PRESET_NAMES: [&str; 3] = ["h1", "h2", "h3"];

const H1: [(f64, f64); 5] = [
    (0.0545, 0.05),
    (0.2832, -0.11971),
    (-0.7676, 0.2788),
    (-0.0641, -0.0576),
    (0.0466, -0.02275),
];

const H2: [(f64, f64); 4] = [
    (0.0554, 0.0165),
    (-1.3449, -0.4523),
    (1.0067, 1.1524),
    (0.3476, 0.3153),
];

const H3: [(f64, f64); 10] = [
    (0.0410, 0.0109),
    (0.0495, 0.0123),
    (0.0672, 0.017),
    (0.0919, 0.0235),
    (0.7920, 0.1281),
    (0.396, 0.0871),
    (0.2715, 0.048),
    (0.2291, 0.0415),
    (0.1287, 0.0154),
    (0.1032, 0.0119),
];

/// Taps of the non-minimum-phase test channels `h1`, `h2`, `h3`.
pub fn preset_taps(name: &str) -> Option<ComplexSeq> {
    let taps: &[(f64, f64)] = match name {
        "h1" => &H1,
        "h2" => &H2,
        "h3" => &H3,
        _ => return None,
    };
    Some(taps.iter().map(|&(r, i)| Complex64::new(r, i)).collect())
}

/// Maps bit pairs to QPSK symbols, `0 -> -1` and `1 -> +1` on each rail.
pub fn qpsk_modulate(bits: &[u8]) -> Result<ComplexSeq> {
    if bits.len() % 2 != 0 {
        return Err(invalid_input(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    let rail = |b: u8| if b != 0 { 1.0 } else { -1.0 };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex64::new(rail(p[0]), rail(p[1])))
        .collect())
}

/// Hard decision back to bits, `sign(0)` counted as `1`.
pub fn qpsk_demodulate(symbols: &ComplexSeq) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re >= 0.0), u8::from(s.im >= 0.0)])
        .collect()
}

pub fn random_qpsk(len: usize, rng: &mut ChaCha8Rng) -> ComplexSeq {
    let bits: Vec<u8> = (0..2 * len).map(|_| u8::from(rng.random::<bool>())).collect();
    qpsk_modulate(&bits).expect("even bit count")
}

/// `y_n = sum_t taps[t] * x[n - t + origin]`, x treated as zero outside `[0, N)`.
pub(crate) fn convolve_at(x: &ComplexSeq, taps: &ComplexSeq, origin: usize) -> ComplexSeq {
    let n_len = x.len() as isize;
    let mut out = ComplexSeq::zeros(x.len());
    for n in 0..x.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..taps.len() {
            let k = n as isize - t as isize + origin as isize;
            if (0..n_len).contains(&k) {
                acc += taps.get(t) * x.get(k as usize);
            }
        }
        out.set(n, acc);
    }
    out
}

/// Length-preserving FIR filtering `y = x * h`.
pub fn fir_convolve(x: &ComplexSeq, h: &ComplexSeq, mode: PaddingMode) -> Result<ComplexSeq> {
    if x.is_empty() || h.is_empty() {
        return Err(invalid_input("convolution needs non-empty input and taps"));
    }
    let origin = mode.origin(h.len())?;
    Ok(convolve_at(x, h, origin))
}

fn gaussian_noise(len: usize, variance: f64, rng: &mut ChaCha8Rng) -> ComplexSeq {
    let std = (variance / 2.0).sqrt();
    let mut noise = ComplexSeq::zeros(len);
    for k in 0..len {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        noise.set(k, Complex64::new(std * re, std * im));
    }
    noise
}

/// Adds circular complex Gaussian noise of total variance `noise_variance`.
/// Returns the noisy sequence and the noise itself.
pub fn add_awgn(y: &ComplexSeq, noise_variance: f64, seed: u64) -> Result<(ComplexSeq, ComplexSeq)> {
    if !(noise_variance >= 0.0) {
        return Err(invalid_input(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    let mut rng = substream(seed, Substream::Raw);
    let noise = gaussian_noise(y.len(), noise_variance, &mut rng);
    Ok((y.add(&noise), noise))
}

/// `20 log10(‖signal‖ / ‖noise‖)`.
pub fn snr_db(signal: &ComplexSeq, noise: &ComplexSeq) -> f64 {
    20.0 * (signal.norm() / noise.norm()).log10()
}

/// Rescales `noise` so that the realized SNR against `signal` is exactly
/// `snr_db`. Returns the scaled noise and its implied complex variance.
pub fn scale_noise_to_snr(
    signal: &ComplexSeq,
    noise: &ComplexSeq,
    snr_db: f64,
) -> Result<(ComplexSeq, f64)> {
    let (s_norm, w_norm) = (signal.norm(), noise.norm());
    if !(s_norm > 0.0) || !(w_norm > 0.0) {
        return Err(invalid_input("SNR scaling needs non-zero signal and noise"));
    }
    if !snr_db.is_finite() {
        return Err(invalid_input(format!("SNR must be finite, got {snr_db}")));
    }
    let target = s_norm / 10f64.powf(snr_db / 20.0);
    let scaled = noise.scaled(Complex64::new(target / w_norm, 0.0));
    let sigma2 = scaled.norm_sqr() / scaled.len() as f64;
    Ok((scaled, sigma2))
}

/// Training and held-out test data drawn through one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_observed: ComplexSeq,
    pub truth_train_symbols: ComplexSeq,
    pub test_symbols: ComplexSeq,
    pub test_observed: ComplexSeq,
    pub realized_snr_db: f64,
    /// Complex noise variance realized on the training block.
    pub train_sigma2: f64,
    pub seed: u64,
}

pub const DEFAULT_TEST_LEN: usize = 10_000;

fn pass_through(
    symbols: &ComplexSeq,
    channel: &ChannelSpec,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ComplexSeq, f64, f64)> {
    let clean = fir_convolve(symbols, &channel.taps, channel.padding_mode)?;
    let raw = gaussian_noise(symbols.len(), 1.0, rng);
    let (noise, sigma2) = scale_noise_to_snr(&clean, &raw, snr_db)?;
    let realized = self::snr_db(&clean, &noise);
    Ok((clean.add(&noise), sigma2, realized))
}

/// Draws independent train and test symbol streams from substreams of
/// `seed`, filters them through `channel` and adds noise at exactly `snr_db`.
pub fn generate_dataset(
    channel: &ChannelSpec,
    train_len: usize,
    test_len: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Dataset> {
    if train_len == 0 || test_len == 0 {
        return Err(invalid_input("dataset lengths must be at least 1"));
    }
    let truth_train_symbols = random_qpsk(train_len, &mut substream(seed, Substream::TrainSymbols));
    let test_symbols = random_qpsk(test_len, &mut substream(seed, Substream::TestSymbols));
    let (train_observed, train_sigma2, realized_snr_db) = pass_through(
        &truth_train_symbols,
        channel,
        snr_db,
        &mut substream(seed, Substream::TrainNoise),
    )?;
    let (test_observed, _, _) = pass_through(
        &test_symbols,
        channel,
        snr_db,
        &mut substream(seed, Substream::TestNoise),
    )?;
    Ok(Dataset {
        train_observed,
        truth_train_symbols,
        test_symbols,
        test_observed,
        realized_snr_db,
        train_sigma2,
        seed,
    })
}
