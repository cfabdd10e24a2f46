//! Closed-form evidence lower bound for QPSK through a linear channel under a
//! mean-field Bernoulli posterior.
//!
//! The KL part `A` is `-2N log 2 + H(q)`. The expected residual
//! `C = E_q ‖y - x * ĥ‖²` splits per output sample into
//! `|y_n|² - 2 α_n + β_n` where, with `m_k = E[x_k]` and `s_n = (m * ĥ)_n`,
//!
//! * `α_n = Re(conj(y_n) s_n)`
//! * `β_n = |s_n|² + Σ_k |ĥ_{n-k}|² (2 - |m_k|²)`
//!
//! and `2 - |m_k|² = 4q^I + 4q^Q - 4(q^I)² - 4(q^Q)²` is the posterior
//! variance of `x_k`. Eliminating the noise variance at its optimum `C/N`
//! leaves the training loss `N log C - A`.

use std::f64::consts::{LN_2, PI};

use crate::error::{invalid_input, Result};
use crate::signal::{convolve_at, ComplexSeq, PaddingMode};
use crate::vae::decoder::SymbolPosteriors;

/// Floor applied to `C` inside the logarithm.
pub const EPS_C: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// `-KL(q ‖ p)`, always `<= 0`.
    pub a: f64,
    /// Expected squared residual.
    pub c: f64,
    pub loss: f64,
    /// Noise variance maximizing the bound, `C / N`.
    pub sigma2_hat: f64,
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

/// `Σ (h(q) - log 2)` over both rails; every term is exactly 0 at `q = 1/2`.
fn entropy_deficit(q: &SymbolPosteriors) -> f64 {
    q.qi.iter().chain(&q.qq).map(|&p| binary_entropy(p) - LN_2).sum()
}

/// Entropy of the factorized posterior in nats.
pub fn entropy_term(q: &SymbolPosteriors) -> f64 {
    2.0 * q.len() as f64 * LN_2 + entropy_deficit(q)
}

/// `A = -KL(q ‖ uniform prior) = -2N log 2 + H(q)`.
pub fn kl_term_a(q: &SymbolPosteriors) -> f64 {
    entropy_deficit(q)
}

pub(crate) struct ResidualParts {
    pub c: f64,
    /// `y - m * ĥ`.
    pub residual: ComplexSeq,
    pub means: ComplexSeq,
    /// `2 - |m_k|²`.
    pub variances: Vec<f64>,
    pub origin: usize,
}

pub(crate) fn residual_parts(
    y: &ComplexSeq,
    hhat: &ComplexSeq,
    mode: PaddingMode,
    q: &SymbolPosteriors,
) -> Result<ResidualParts> {
    if y.len() != q.len() {
        return Err(invalid_input(format!(
            "observation length {} differs from posterior length {}",
            y.len(),
            q.len()
        )));
    }
    if hhat.is_empty() || y.is_empty() {
        return Err(invalid_input("empty observation or channel estimate"));
    }
    let origin = mode.origin(hhat.len())?;
    let n_len = y.len() as isize;
    let means = q.mean_symbols();
    let variances: Vec<f64> = q
        .qi
        .iter()
        .zip(&q.qq)
        .map(|(&i, &qq)| 4.0 * i + 4.0 * qq - 4.0 * i * i - 4.0 * qq * qq)
        .collect();
    let s = convolve_at(&means, hhat, origin);

    let mut c = 0.0;
    for n in 0..y.len() {
        let yn = y.get(n);
        let sn = s.get(n);
        let alpha = (yn.conj() * sn).re;
        let mut spread = 0.0;
        for t in 0..hhat.len() {
            let k = n as isize - t as isize + origin as isize;
            if (0..n_len).contains(&k) {
                spread += hhat.get(t).norm_sqr() * variances[k as usize];
            }
        }
        let beta = sn.norm_sqr() + spread;
        c += yn.norm_sqr() - 2.0 * alpha + beta;
    }
    let residual: ComplexSeq = y.iter().zip(s.iter()).map(|(a, b)| a - b).collect();
    Ok(ResidualParts {
        c,
        residual,
        means,
        variances,
        origin,
    })
}

/// `C = E_q ‖y - x * ĥ‖²`, with `ĥ` aligned by `mode`.
pub fn residual_term_c(
    y: &ComplexSeq,
    hhat: &ComplexSeq,
    mode: PaddingMode,
    q: &SymbolPosteriors,
) -> Result<f64> {
    residual_parts(y, hhat, mode, q).map(|p| p.c)
}

pub(crate) fn assemble(n: usize, a: f64, c: f64) -> LossBreakdown {
    let n_f = n as f64;
    LossBreakdown {
        a,
        c,
        loss: n_f * c.max(EPS_C).ln() - a,
        sigma2_hat: c / n_f,
    }
}

/// Training loss `N log C - A` with the noise variance profiled out.
pub fn loss(
    y: &ComplexSeq,
    hhat: &ComplexSeq,
    mode: PaddingMode,
    q: &SymbolPosteriors,
) -> Result<LossBreakdown> {
    let c = residual_term_c(y, hhat, mode, q)?;
    Ok(assemble(y.len(), kl_term_a(q), c))
}

/// Negative ELBO `-A - B(σ²)` at an explicit noise variance, constants included.
pub fn negative_elbo(n: usize, a: f64, c: f64, sigma2: f64) -> f64 {
    let n_f = n as f64;
    -a + n_f * PI.ln() + n_f * sigma2.ln() + c / sigma2
}

/// Sum of `|ĥ|²` over the taps that land inside the block for output `n`.
#[cfg(test)]
fn covered_energy(hhat: &ComplexSeq, origin: usize, n: usize, len: usize) -> f64 {
    (0..hhat.len())
        .filter(|&t| {
            let k = n as isize - t as isize + origin as isize;
            (0..len as isize).contains(&k)
        })
        .map(|t| hhat.get(t).norm_sqr())
        .sum()
}
