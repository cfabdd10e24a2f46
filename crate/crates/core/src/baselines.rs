//! Reference linear equalizers: blind Godard CMA and supervised (N)LMS.

use num_complex::Complex64;

use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::signal::{convolve_at, ComplexSeq};

/// Centered FIR equalizer, `z_n = sum_t taps[t] * y[n - t + center]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEqualizer {
    pub taps: ComplexSeq,
    pub center_index: usize,
}

impl LinearEqualizer {
    /// Unit spike at the center tap.
    pub fn center_spike(taps: usize) -> Result<Self> {
        if taps == 0 || taps % 2 == 0 {
            return Err(invalid_config(format!(
                "equalizer length must be odd and positive, got {taps}"
            )));
        }
        let center_index = (taps - 1) / 2;
        Ok(Self {
            taps: ComplexSeq::impulse(taps, center_index),
            center_index,
        })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    pub step_size: f64,
    pub passes: usize,
    pub taps: usize,
    /// NLMS: divide the step by the window energy (MMSE only).
    pub normalize: bool,
    /// Dispersion constant `E|x|^4 / E|x|^2`; 2 for unit-rail QPSK.
    pub cma_r2: f64,
}

pub const QPSK_R2: f64 = 2.0;
const NLMS_DELTA: f64 = 1e-6;

impl AdaptConfig {
    pub fn cma() -> Self {
        Self {
            step_size: 1e-3,
            passes: 50,
            taps: 15,
            normalize: false,
            cma_r2: QPSK_R2,
        }
    }

    pub fn mmse() -> Self {
        Self {
            step_size: 5e-2,
            passes: 50,
            taps: 15,
            normalize: true,
            cma_r2: QPSK_R2,
        }
    }

    fn validate(&self, len: usize) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(invalid_config(format!("step size must be non-negative, got {}", self.step_size)));
        }
        if self.passes == 0 {
            return Err(invalid_config("at least one pass is required"));
        }
        if self.taps == 0 || self.taps % 2 == 0 {
            return Err(invalid_config(format!("equalizer length must be odd, got {}", self.taps)));
        }
        if len < self.taps {
            return Err(invalid_input(format!(
                "{len} samples cannot train a {}-tap equalizer",
                self.taps
            )));
        }
        Ok(())
    }
}

/// Regressor window for output `n`: `u[t] = y[n - t + center]`, zero outside.
fn fill_window(y: &ComplexSeq, n: usize, center: usize, window: &mut [Complex64]) {
    let len = y.len() as isize;
    for (t, u) in window.iter_mut().enumerate() {
        let k = n as isize - t as isize + center as isize;
        *u = if (0..len).contains(&k) {
            y.get(k as usize)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
}

fn output(taps: &[Complex64], window: &[Complex64]) -> Complex64 {
    taps.iter().zip(window).map(|(w, u)| w * u).sum()
}

/// Runs `passes` sweeps of a stochastic-gradient update. `correction(n, z, u)`
/// returns the complex error term `e` with `taps -= step * e * conj(u)`.
fn adapt<F>(
    y: &ComplexSeq,
    init: LinearEqualizer,
    cfg: &AdaptConfig,
    mut correction: F,
) -> Result<LinearEqualizer>
where
    F: FnMut(usize, Complex64) -> Complex64,
{
    let t_len = init.len();
    let mut taps = init.taps.to_vec();
    let mut window = vec![Complex64::new(0.0, 0.0); t_len];
    for pass in 0..cfg.passes {
        for n in 0..y.len() {
            fill_window(y, n, init.center_index, &mut window);
            let z = output(&taps, &window);
            let e = correction(n, z);
            let step = if cfg.normalize {
                let energy: f64 = window.iter().map(|u| u.norm_sqr()).sum();
                cfg.step_size / (energy + NLMS_DELTA)
            } else {
                cfg.step_size
            };
            for (w, u) in taps.iter_mut().zip(&window) {
                *w -= step * e * u.conj();
            }
            if !e.is_finite() || taps.iter().any(|w| !w.is_finite()) {
                return Err(Error::Diverged {
                    sample: pass * y.len() + n,
                });
            }
        }
    }
    Ok(LinearEqualizer {
        taps: taps.into_iter().collect(),
        center_index: init.center_index,
    })
}

/// Godard (p = 2) constant-modulus adaptation from a center spike.
pub fn cma_train(y: &ComplexSeq, cfg: &AdaptConfig) -> Result<LinearEqualizer> {
    cfg.validate(y.len())?;
    let r2 = cfg.cma_r2;
    adapt(y, LinearEqualizer::center_spike(cfg.taps)?, cfg, |_, z| {
        (z.norm_sqr() - r2) * z
    })
}

/// Supervised (N)LMS towards the symbol aligned with the center tap.
pub fn mmse_lms_train(y: &ComplexSeq, x_true: &ComplexSeq, cfg: &AdaptConfig) -> Result<LinearEqualizer> {
    mmse_lms_train_from(y, x_true, LinearEqualizer::center_spike(cfg.taps)?, cfg)
}

/// As [`mmse_lms_train`] but starting from given taps.
pub fn mmse_lms_train_from(
    y: &ComplexSeq,
    x_true: &ComplexSeq,
    init: LinearEqualizer,
    cfg: &AdaptConfig,
) -> Result<LinearEqualizer> {
    if y.len() != x_true.len() {
        return Err(invalid_input(format!(
            "observed length {} differs from reference length {}",
            y.len(),
            x_true.len()
        )));
    }
    cfg.validate(y.len())?;
    if init.len() != cfg.taps {
        return Err(invalid_config("initial taps do not match the configured length"));
    }
    adapt(y, init, cfg, |n, z| z - x_true.get(n))
}

/// Length-preserving centered filtering.
pub fn equalize_apply(eq: &LinearEqualizer, y: &ComplexSeq) -> ComplexSeq {
    convolve_at(y, &eq.taps, eq.center_index)
}

/// Nearest QPSK point per sample, ties to `+1` on each rail.
pub fn slicer_qpsk(z: &ComplexSeq) -> ComplexSeq {
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    z.iter().map(|s| Complex64::new(sign(s.re), sign(s.im))).collect()
}

/// Mean constant-modulus cost `mean (|z|^2 - r2)^2`.
pub fn cm_cost(z: &ComplexSeq, r2: f64) -> f64 {
    z.iter().map(|s| (s.norm_sqr() - r2).powi(2)).sum::<f64>() / z.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};
    use crate::signal::{fir_convolve, random_qpsk, PaddingMode};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_step_keeps_spike() {
        let y = random_qpsk(200, &mut substream(1, Substream::Raw));
        let cfg = AdaptConfig {
            step_size: 0.0,
            ..AdaptConfig::cma()
        };
        let eq = cma_train(&y, &cfg).unwrap();
        assert_eq!(eq, LinearEqualizer::center_spike(15).unwrap());
    }

    #[test]
    fn cma_on_identity_channel() {
        let y = random_qpsk(2000, &mut substream(2, Substream::Raw));
        let eq = cma_train(&y, &AdaptConfig::cma()).unwrap();
        let z = equalize_apply(&eq, &y);
        assert!(cm_cost(&z, QPSK_R2) <= 1e-2);
        let energy: Vec<f64> = eq.taps.iter().map(|w| w.norm_sqr()).collect();
        let total: f64 = energy.iter().sum();
        let peak = energy.iter().cloned().fold(0.0, f64::max);
        assert!((total - peak) / total <= 0.05);
    }

    #[test]
    fn cma_divergence_is_reported() {
        let y = random_qpsk(500, &mut substream(3, Substream::Raw)).scaled(c(30.0, 0.0));
        let cfg = AdaptConfig {
            step_size: 1.0,
            ..AdaptConfig::cma()
        };
        assert!(matches!(cma_train(&y, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn wiener_start_is_a_fixed_point() {
        let x = random_qpsk(400, &mut substream(4, Substream::Raw));
        let init = LinearEqualizer::center_spike(15).unwrap();
        let eq = mmse_lms_train_from(&x, &x, init.clone(), &AdaptConfig::mmse()).unwrap();
        for (a, b) in eq.taps.iter().zip(init.taps.iter()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn lms_learns_identity_from_a_perturbed_start() {
        let x = random_qpsk(2000, &mut substream(5, Substream::Raw));
        let mut init = LinearEqualizer::center_spike(15).unwrap();
        init.taps.set(3, c(0.3, -0.2));
        init.taps.set(7, c(0.6, 0.1));
        let eq = mmse_lms_train_from(&x, &x, init, &AdaptConfig::mmse()).unwrap();
        let z = equalize_apply(&eq, &x);
        let mse = z.iter().zip(x.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / 2000.0;
        assert!(mse <= 1e-4, "mse {mse}");
    }

    #[test]
    fn length_checks() {
        let y = random_qpsk(10, &mut substream(6, Substream::Raw));
        assert!(cma_train(&y, &AdaptConfig::cma()).is_err());
        let x = random_qpsk(20, &mut substream(6, Substream::Raw));
        assert!(mmse_lms_train(&x, &y, &AdaptConfig::mmse()).is_err());
        assert!(LinearEqualizer::center_spike(4).is_err());
    }

    #[test]
    fn apply_examples() {
        let y: ComplexSeq = (0..12).map(|k| c(k as f64 * 0.3 - 1.0, 0.5 - k as f64 * 0.1)).collect();
        let spike = LinearEqualizer::center_spike(5).unwrap();
        assert_eq!(equalize_apply(&spike, &y), y);
        let rot = LinearEqualizer {
            taps: spike.taps.scaled(c(0.0, 1.0)),
            center_index: 2,
        };
        assert_eq!(equalize_apply(&rot, &y), y.scaled(c(0.0, 1.0)));
        let taps: ComplexSeq = (0..7).map(|t| c((t as f64).cos(), (t as f64 * 1.3).sin())).collect();
        let eq = LinearEqualizer { taps: taps.clone(), center_index: 3 };
        let want = fir_convolve(&y, &taps, PaddingMode::Centered).unwrap();
        for (a, b) in equalize_apply(&eq, &y).iter().zip(want.iter()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn slicer_examples() {
        let z: ComplexSeq = [c(0.3, -0.2), c(0.0, 0.0), c(-1.0, 1.0)].into_iter().collect();
        assert_eq!(
            slicer_qpsk(&z).to_vec(),
            vec![c(1.0, -1.0), c(1.0, 1.0), c(-1.0, 1.0)]
        );
    }
}
