//! Symbol error rate under the rotation and delay ambiguity of blind QPSK
//! recovery, and the matching alignment distance for channel estimates.

use num_complex::Complex64;

use crate::error::{invalid_input, Result};
use crate::signal::ComplexSeq;

/// The four QPSK constellation symmetries, in reporting order.
pub const ROTATIONS: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// `j^k` for a rotation of `k · 90°`.
    pub fn factor(self) -> Complex64 {
        match self {
            Rotation::R0 => Complex64::new(1.0, 0.0),
            Rotation::R90 => Complex64::new(0.0, 1.0),
            Rotation::R180 => Complex64::new(-1.0, 0.0),
            Rotation::R270 => Complex64::new(0.0, -1.0),
        }
    }
}

/// Best hypothesis: the estimate equals the truth rotated by `rotation` and
/// delayed by `delay` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityResolution {
    pub rotation: Rotation,
    pub delay: i64,
    pub ser: f64,
    pub errors: usize,
    pub compared: usize,
}

#[inline]
fn differs(a: Complex64, b: Complex64) -> bool {
    (a.re >= 0.0) != (b.re >= 0.0) || (a.im >= 0.0) != (b.im >= 0.0)
}

/// Fraction of positions whose QPSK decisions differ on either rail.
pub fn ser(estimated: &ComplexSeq, truth: &ComplexSeq) -> Result<f64> {
    if estimated.len() != truth.len() || truth.is_empty() {
        return Err(invalid_input(format!(
            "SER needs equal non-empty lengths, got {} and {}",
            estimated.len(),
            truth.len()
        )));
    }
    let errors = estimated
        .iter()
        .zip(truth.iter())
        .filter(|&(a, b)| differs(a, b))
        .count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Delays searched in tie-break order: 0, 1, -1, 2, -2, ...
fn delay_order(max_delay: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_delay as i64).flat_map(|d| [d, -d]))
}

/// Exhaustive search over the four rotations and integer delays in
/// `[-max_delay, max_delay]`. Ties prefer smaller `|delay|`, then positive
/// delay, then rotation order.
pub fn resolve_ambiguity(
    estimated: &ComplexSeq,
    truth: &ComplexSeq,
    max_delay: usize,
) -> Result<AmbiguityResolution> {
    if estimated.len() != truth.len() {
        return Err(invalid_input("estimate and truth differ in length"));
    }
    let len = truth.len() as i64;
    if len <= max_delay as i64 {
        return Err(invalid_input(format!(
            "delay radius {max_delay} leaves no overlap with {len} symbols"
        )));
    }
    let mut best: Option<AmbiguityResolution> = None;
    for delay in delay_order(max_delay) {
        // estimated[k] ~ rot · truth[k - delay]
        let (start, end) = (delay.max(0), len.min(len + delay));
        let compared = (end - start) as usize;
        for rotation in ROTATIONS {
            let undo = rotation.factor().conj();
            let errors = (start..end)
                .filter(|&k| differs(undo * estimated.get(k as usize), truth.get((k - delay) as usize)))
                .count();
            let better = match &best {
                None => true,
                Some(b) => (errors as u128) * (b.compared as u128) < (b.errors as u128) * (compared as u128),
            };
            if better {
                best = Some(AmbiguityResolution {
                    rotation,
                    delay,
                    ser: errors as f64 / compared as f64,
                    errors,
                    compared,
                });
            }
        }
    }
    best.ok_or_else(|| invalid_input("no hypotheses"))
}

/// Smallest `‖h_true - r · shift(h_est)‖ / ‖h_true‖` over the four rotations
/// and every integer shift with any overlap, zero-padding both vectors.
pub fn channel_alignment_distance(h_true: &ComplexSeq, h_est: &ComplexSeq) -> f64 {
    let (lt, le) = (h_true.len() as i64, h_est.len() as i64);
    let zero = Complex64::new(0.0, 0.0);
    let at = |h: &ComplexSeq, len: i64, i: i64| if (0..len).contains(&i) { h.get(i as usize) } else { zero };
    let mut best = f64::INFINITY;
    // h_est[i] is placed at index i + shift of h_true's frame.
    for shift in (1 - le)..lt {
        let (lo, hi) = (shift.min(0), lt.max(le + shift));
        for rotation in ROTATIONS {
            let r = rotation.factor();
            let d2: f64 = (lo..hi)
                .map(|j| (at(h_true, lt, j) - r * at(h_est, le, j - shift)).norm_sqr())
                .sum();
            best = best.min(d2);
        }
    }
    let true_energy = h_true.norm_sqr();
    if true_energy == 0.0 {
        return best.sqrt();
    }
    (best / true_energy).sqrt()
}
