//! Hand-written reverse pass through the decoder and the closed-form loss.
//!
//! Complex quantities carry gradients packed as `∂L/∂re + j ∂L/∂im`. With
//! that packing, for `out = f · in` the pullbacks are `g · conj(in)` for the
//! filter and `g · conj(f)` for the input.

use num_complex::Complex64;

use crate::error::Result;
use crate::signal::{ComplexSeq, PaddingMode};
use crate::vae::decoder::{forward_traced, ComplexFilter, DecoderParams, EPS_Q};
use crate::vae::elbo::{assemble, kl_term_a, residual_parts, LossBreakdown, EPS_C};

/// Loss value together with its gradient for every trainable entry.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub decoder: DecoderParams,
    pub hhat: ComplexSeq,
    pub breakdown: LossBreakdown,
}

/// Exact derivatives of `loss(y, ĥ, decoder_forward(params, y))`. Clamped
/// posteriors and a floored `C` pass no gradient.
pub fn loss_gradients(
    y: &ComplexSeq,
    params: &DecoderParams,
    hhat: &ComplexSeq,
    mode: PaddingMode,
) -> Result<Gradients> {
    let (q, trace) = forward_traced(params, y)?;
    let parts = residual_parts(y, hhat, mode, &q)?;
    let n_len = y.len();
    let breakdown = assemble(n_len, kl_term_a(&q), parts.c);
    let dloss_dc = if parts.c > EPS_C {
        n_len as f64 / parts.c
    } else {
        0.0
    };

    let origin = parts.origin as isize;
    let inside = |k: isize| (0..n_len as isize).contains(&k);

    // ∂C/∂m_k: residual part -2 Σ_n r_n conj(ĥ_{n-k}), variance part -2 E_k m_k.
    let mut grad_hhat = ComplexSeq::zeros(hhat.len());
    let mut grad_means = vec![Complex64::new(0.0, 0.0); n_len];
    for t in 0..hhat.len() {
        let h_t = hhat.get(t);
        let h_energy = h_t.norm_sqr();
        let mut g_h = Complex64::new(0.0, 0.0);
        let mut var_sum = 0.0;
        for n in 0..n_len {
            let k = n as isize - t as isize + origin;
            if !inside(k) {
                continue;
            }
            let k = k as usize;
            let r_n = parts.residual.get(n);
            let m_k = parts.means.get(k);
            g_h -= 2.0 * r_n * m_k.conj();
            var_sum += parts.variances[k];
            grad_means[k] -= 2.0 * r_n * h_t.conj() + 2.0 * h_energy * m_k;
        }
        g_h += 2.0 * h_t * var_sum;
        grad_hhat.set(t, dloss_dc * g_h);
    }

    // Through m = 2q - 1, the entropy, the clamp and the sigmoid.
    let rail_grad = |g_mean: f64, q: f64, raw: f64| {
        if !(EPS_Q..=1.0 - EPS_Q).contains(&raw) {
            return 0.0;
        }
        let dloss_dq = dloss_dc * 2.0 * g_mean + (q / (1.0 - q)).ln();
        dloss_dq * raw * (1.0 - raw)
    };
    let grad_z: Vec<Complex64> = (0..n_len)
        .map(|k| {
            Complex64::new(
                rail_grad(grad_means[k].re, q.qi[k], trace.raw_qi[k]),
                rail_grad(grad_means[k].im, q.qq[k], trace.raw_qq[k]),
            )
        })
        .collect();

    let mut grad_decoder = DecoderParams::zeros();
    let grad_resid = conv_backward(&trace.resid, &params.conv2, &grad_z, &mut grad_decoder.conv2);
    let softsign_slope = |x: f64| 1.0 / (1.0 + x.abs()).powi(2);
    let grad_pre1: Vec<Complex64> = grad_resid
        .iter()
        .zip(trace.pre1.iter())
        .map(|(g, a)| Complex64::new(g.re * softsign_slope(a.re), g.im * softsign_slope(a.im)))
        .collect();
    conv_backward(y, &params.conv1, &grad_pre1, &mut grad_decoder.conv1);

    Ok(Gradients {
        decoder: grad_decoder,
        hhat: grad_hhat,
        breakdown,
    })
}

/// Accumulates filter and bias gradients into `grad_filter` and returns the
/// gradient with respect to `input`.
fn conv_backward(
    input: &ComplexSeq,
    filter: &ComplexFilter,
    grad_out: &[Complex64],
    grad_filter: &mut ComplexFilter,
) -> Vec<Complex64> {
    let n_len = input.len() as isize;
    let pad = filter.pad_left() as isize;
    let mut grad_in = vec![Complex64::new(0.0, 0.0); input.len()];
    let mut grad_taps = vec![Complex64::new(0.0, 0.0); filter.len()];
    let mut grad_bias = Complex64::new(0.0, 0.0);
    for (n, &g) in grad_out.iter().enumerate() {
        grad_bias += g;
        for (t, gt) in grad_taps.iter_mut().enumerate() {
            let j = n as isize + t as isize - pad;
            if (0..n_len).contains(&j) {
                let j = j as usize;
                *gt += g * input.get(j).conj();
                grad_in[j] += g * filter.taps.get(t).conj();
            }
        }
    }
    for (t, gt) in grad_taps.into_iter().enumerate() {
        grad_filter.taps.set(t, gt);
    }
    grad_filter.bias = grad_bias;
    grad_in
}
