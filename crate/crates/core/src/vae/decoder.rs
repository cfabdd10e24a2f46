//! The inference network `q(x | y)`: a two-layer complex convolutional ResNet
//! block ending in per-rail sigmoids.
//!
//! ```text
//! y ──► conv1 (5 taps) ──► softsign ──► (+) ──► conv2 (2 taps) ──► sigmoid ──► q
//! │                                      ▲
//! └──────────────────────────────────────┘
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid_input, Result};
use crate::signal::ComplexSeq;

/// Posterior clamp applied before any logarithm.
pub const EPS_Q: f64 = 1e-7;
pub const CONV1_LEN: usize = 5;
pub const CONV2_LEN: usize = 2;

/// Complex FIR taps plus a complex bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFilter {
    pub taps: ComplexSeq,
    pub bias: Complex64,
}

impl ComplexFilter {
    pub fn zeros(len: usize) -> Self {
        Self {
            taps: ComplexSeq::zeros(len),
            bias: Complex64::new(0.0, 0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Left zero-padding used by [`complex_conv1d`]; the remainder goes on the right.
    pub fn pad_left(&self) -> usize {
        (self.len() - 1) / 2
    }
}

/// Decoder weights. The two filters hold the 14 real coefficients; the two
/// biases add four more.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub conv1: ComplexFilter,
    pub conv2: ComplexFilter,
}

impl DecoderParams {
    /// Number of real entries in `to_flat`.
    pub const FLAT_LEN: usize = 2 * (CONV1_LEN + CONV2_LEN) + 4;

    pub fn zeros() -> Self {
        Self {
            conv1: ComplexFilter::zeros(CONV1_LEN),
            conv2: ComplexFilter::zeros(CONV2_LEN),
        }
    }

    /// I.i.d. Gaussian filter taps with the given std, zero biases.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut p = Self::zeros();
        for f in [&mut p.conv1, &mut p.conv2] {
            for k in 0..f.len() {
                let v = Complex64::new(normal.sample(rng), normal.sample(rng));
                f.taps.set(k, v);
            }
        }
        p
    }

    /// Real filter coefficients, biases excluded.
    pub fn filter_coefficient_count(&self) -> usize {
        2 * (self.conv1.len() + self.conv2.len())
    }

    /// `conv1.re, conv1.im, conv1.bias, conv2.re, conv2.im, conv2.bias`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::FLAT_LEN);
        for f in [&self.conv1, &self.conv2] {
            out.extend_from_slice(f.taps.re());
            out.extend_from_slice(f.taps.im());
            out.push(f.bias.re);
            out.push(f.bias.im);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::FLAT_LEN {
            return Err(invalid_input(format!(
                "decoder parameter vector has {} entries, expected {}",
                flat.len(),
                Self::FLAT_LEN
            )));
        }
        let mut p = Self::zeros();
        let mut rest = flat;
        for f in [&mut p.conv1, &mut p.conv2] {
            let k = f.len();
            f.taps.re_mut().copy_from_slice(&rest[..k]);
            f.taps.im_mut().copy_from_slice(&rest[k..2 * k]);
            f.bias = Complex64::new(rest[2 * k], rest[2 * k + 1]);
            rest = &rest[2 * k + 2..];
        }
        Ok(p)
    }
}

/// Per-symbol Bernoulli parameters `q^I_j = q(x^I_j = +1 | y)` and
/// `q^Q_j = q(x^Q_j = +1 | y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPosteriors {
    pub qi: Vec<f64>,
    pub qq: Vec<f64>,
}

impl SymbolPosteriors {
    /// Builds posteriors from raw probabilities, clamping to `[EPS_Q, 1 - EPS_Q]`.
    pub fn new(qi: Vec<f64>, qq: Vec<f64>) -> Result<Self> {
        if qi.len() != qq.len() {
            return Err(invalid_input("posterior rails differ in length"));
        }
        Ok(Self {
            qi: qi.into_iter().map(clamp_q).collect(),
            qq: qq.into_iter().map(clamp_q).collect(),
        })
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            qi: vec![0.5; len],
            qq: vec![0.5; len],
        }
    }

    pub fn len(&self) -> usize {
        self.qi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qi.is_empty()
    }

    /// `E[x_k] = (2 q^I_k - 1) + j (2 q^Q_k - 1)`.
    pub fn mean_symbols(&self) -> ComplexSeq {
        self.qi
            .iter()
            .zip(&self.qq)
            .map(|(&i, &q)| Complex64::new(2.0 * i - 1.0, 2.0 * q - 1.0))
            .collect()
    }
}

pub(crate) fn clamp_q(q: f64) -> f64 {
    q.clamp(EPS_Q, 1.0 - EPS_Q)
}

/// Same-length complex cross-correlation with `(K-1)/2` zeros on the left:
///
/// `out[n] = sum_t f[t] * in[n + t - (K-1)/2] + b`
///
/// written on the I/Q rails as
/// `out_I = in_I*f_I - in_Q*f_Q + b_I`, `out_Q = in_I*f_Q + in_Q*f_I + b_Q`.
pub fn complex_conv1d(input: &ComplexSeq, filter: &ComplexFilter) -> Result<ComplexSeq> {
    if filter.is_empty() || filter.len() > input.len() {
        return Err(invalid_input(format!(
            "filter of length {} does not fit input of length {}",
            filter.len(),
            input.len()
        )));
    }
    let n_len = input.len() as isize;
    let pad = filter.pad_left() as isize;
    let (in_i, in_q) = (input.re(), input.im());
    let (f_i, f_q) = (filter.taps.re(), filter.taps.im());
    let mut out_i = Vec::with_capacity(input.len());
    let mut out_q = Vec::with_capacity(input.len());
    for n in 0..input.len() {
        let (mut acc_i, mut acc_q) = (filter.bias.re, filter.bias.im);
        for t in 0..filter.len() {
            let j = n as isize + t as isize - pad;
            if (0..n_len).contains(&j) {
                let j = j as usize;
                acc_i += in_i[j] * f_i[t] - in_q[j] * f_q[t];
                acc_q += in_i[j] * f_q[t] + in_q[j] * f_i[t];
            }
        }
        out_i.push(acc_i);
        out_q.push(acc_q);
    }
    ComplexSeq::new(out_i, out_q)
}

#[inline]
pub(crate) fn softsign(x: f64) -> f64 {
    x / (x.abs() + 1.0)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    /// conv1 output before softsign.
    pub pre1: ComplexSeq,
    /// softsign output plus the skip connection.
    pub resid: ComplexSeq,
    /// Unclamped sigmoid outputs.
    pub raw_qi: Vec<f64>,
    pub raw_qq: Vec<f64>,
}

pub(crate) fn forward_traced(params: &DecoderParams, y: &ComplexSeq) -> Result<(SymbolPosteriors, ForwardTrace)> {
    if y.len() < CONV1_LEN {
        return Err(invalid_input(format!(
            "decoder needs at least {CONV1_LEN} samples, got {}",
            y.len()
        )));
    }
    let pre1 = complex_conv1d(y, &params.conv1)?;
    let resid: ComplexSeq = pre1
        .iter()
        .zip(y.iter())
        .map(|(a, yk)| Complex64::new(softsign(a.re), softsign(a.im)) + yk)
        .collect();
    let z = complex_conv1d(&resid, &params.conv2)?;
    let raw_qi: Vec<f64> = z.re().iter().map(|&v| sigmoid(v)).collect();
    let raw_qq: Vec<f64> = z.im().iter().map(|&v| sigmoid(v)).collect();
    let q = SymbolPosteriors {
        qi: raw_qi.iter().copied().map(clamp_q).collect(),
        qq: raw_qq.iter().copied().map(clamp_q).collect(),
    };
    Ok((
        q,
        ForwardTrace {
            pre1,
            resid,
            raw_qi,
            raw_qq,
        },
    ))
}

/// Runs the decoder over a whole observation block.
pub fn decoder_forward(params: &DecoderParams, y: &ComplexSeq) -> Result<SymbolPosteriors> {
    forward_traced(params, y).map(|(q, _)| q)
}

/// Hard decision per rail: `+1` where `q >= 0.5`, else `-1`.
pub fn detect_symbols(q: &SymbolPosteriors) -> ComplexSeq {
    let sign = |p: f64| if 2.0 * p - 1.0 >= 0.0 { 1.0 } else { -1.0 };
    q.qi
        .iter()
        .zip(&q.qq)
        .map(|(&i, &qq)| Complex64::new(sign(i), sign(qq)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};
    use rand_distr::StandardNormal;

    fn random_seq(len: usize, seed: u64) -> ComplexSeq {
        let mut rng = substream(seed, Substream::Raw);
        (0..len)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }

    fn filter(taps: &[Complex64], bias: Complex64) -> ComplexFilter {
        ComplexFilter {
            taps: taps.iter().copied().collect(),
            bias,
        }
    }

    #[test]
    fn unit_and_j_filters() {
        let y = random_seq(9, 1);
        let zero = Complex64::new(0.0, 0.0);
        let out = complex_conv1d(&y, &filter(&[Complex64::new(1.0, 0.0)], zero)).unwrap();
        assert_eq!(out, y);
        let out = complex_conv1d(&y, &filter(&[Complex64::new(0.0, 1.0)], zero)).unwrap();
        for k in 0..y.len() {
            assert_eq!(out.re()[k], -y.im()[k]);
            assert_eq!(out.im()[k], y.re()[k]);
        }
    }

    #[test]
    fn matches_complex_arithmetic_oracle() {
        for (len, k, seed) in [(12, 5, 2), (7, 2, 3), (5, 5, 4), (30, 4, 5)] {
            let y = random_seq(len, seed);
            let f = random_seq(k, seed + 100);
            let b = Complex64::new(0.3, -0.8);
            let out = complex_conv1d(&y, &filter(&f.to_vec(), b)).unwrap();
            let pad = (k - 1) / 2;
            for n in 0..len {
                let mut want = b;
                for t in 0..k {
                    if let Some(j) = (n + t).checked_sub(pad).filter(|&j| j < len) {
                        want += f.get(t) * y.get(j);
                    }
                }
                let got = out.get(n);
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn oversized_filter_rejected() {
        let y = random_seq(3, 1);
        assert!(complex_conv1d(&y, &ComplexFilter::zeros(5)).is_err());
    }

    #[test]
    fn zero_decoder_is_uniform() {
        let y = random_seq(20, 6);
        let q = decoder_forward(&DecoderParams::zeros(), &y).unwrap();
        assert_eq!(q, SymbolPosteriors::uniform(20));
    }

    #[test]
    fn outputs_are_clamped_and_length_preserving() {
        let y = random_seq(40, 7).scaled(Complex64::new(50.0, 0.0));
        let mut p = DecoderParams::random(&mut substream(8, Substream::Init), 3.0);
        p.conv2.bias = Complex64::new(40.0, -40.0);
        let q = decoder_forward(&p, &y).unwrap();
        assert_eq!(q.len(), 40);
        for v in q.qi.iter().chain(&q.qq) {
            assert!((EPS_Q..=1.0 - EPS_Q).contains(v));
        }
        assert!(decoder_forward(&p, &random_seq(4, 1)).is_err());
    }

    #[test]
    fn flat_round_trip_and_counts() {
        let p = DecoderParams::random(&mut substream(9, Substream::Init), 0.05);
        assert_eq!(p.filter_coefficient_count(), 14);
        assert_eq!(DecoderParams::from_flat(&p.to_flat()).unwrap(), p);
        assert!(DecoderParams::from_flat(&[0.0; 3]).is_err());
    }

    #[test]
    fn detection_thresholds() {
        let q = SymbolPosteriors::new(vec![0.9, 0.5, 0.2], vec![0.1, 0.5, 0.7]).unwrap();
        let x = detect_symbols(&q);
        assert_eq!(
            x.to_vec(),
            vec![
                Complex64::new(1.0, -1.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(-1.0, 1.0)
            ]
        );
    }
}
