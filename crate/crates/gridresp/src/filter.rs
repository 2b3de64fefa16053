//! Digital filters: a zero-phase band-pass for detrending measurement
//! records, and a causal low-pass cascade that imitates the smoothing
//! inside phasor-style frequency estimators.
//!
//! The band-pass is a fourth-order Butterworth run forward and backward
//! (two passes). The analog prototype corner is widened by
//! `(1/(sqrt(2)-1))^(1/4)` so that the half-power points of the
//! *two-pass* response land exactly on the configured band edges.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Two-pass corner-widening factor, `(1/(sqrt(2)-1))^(1/4)`.
fn corner_widening() -> f64 {
    (1.0 / (std::f64::consts::SQRT_2 - 1.0)).powf(0.25)
}

/// One second-order section, direct form II transposed.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Steady state for a constant input level, valid because every
    /// section here has zero DC gain (b0 + b1 + b2 = 0).
    fn rest_state(&self, level: f64) -> [f64; 2] {
        [-self.b0 * level, -(self.b0 + self.b1) * level]
    }

    fn run_in_place(&self, x: &mut [f64], mut state: [f64; 2]) {
        for v in x.iter_mut() {
            let xn = *v;
            let yn = self.b0 * xn + state[0];
            state[0] = self.b1 * xn - self.a1 * yn + state[1];
            state[1] = self.b2 * xn - self.a2 * yn;
            *v = yn;
        }
    }

    fn response(&self, z: Complex64) -> Complex64 {
        let zi = 1.0 / z;
        (self.b0 + self.b1 * zi + self.b2 * zi * zi) / (1.0 + self.a1 * zi + self.a2 * zi * zi)
    }
}

/// Zero-phase fourth-order Butterworth band-pass.
#[derive(Debug, Clone)]
pub struct BandpassFilter {
    sections: [Biquad; 2],
    low_hz: f64,
    high_hz: f64,
    rate_hz: f64,
}

/// Designs the band-pass for a record sampled at `rate_hz`. Requires
/// `0 < low_hz < high_hz < rate_hz / 2`.
pub fn design_bandpass(low_hz: f64, high_hz: f64, rate_hz: f64) -> Result<BandpassFilter> {
    if !(rate_hz > 0.0) {
        return Err(Error::FilterDesign(format!(
            "sample rate must be positive, got {rate_hz}"
        )));
    }
    if !(low_hz > 0.0) {
        return Err(Error::FilterDesign(format!(
            "low edge must be positive, got {low_hz}"
        )));
    }
    if !(high_hz > low_hz) {
        return Err(Error::FilterDesign(format!(
            "band edges out of order: {low_hz} >= {high_hz}"
        )));
    }
    if !(high_hz < rate_hz / 2.0) {
        return Err(Error::FilterDesign(format!(
            "high edge {high_hz} Hz reaches the Nyquist rate {} Hz",
            rate_hz / 2.0
        )));
    }

    // Prewarped analog edges for the unit-interval bilinear transform.
    let w1 = (std::f64::consts::PI * low_hz / rate_hz).tan();
    let w2 = (std::f64::consts::PI * high_hz / rate_hz).tan();
    let w0sq = w1 * w2;
    let bw = w2 - w1;

    // Upper prototype pole of the second-order Butterworth low-pass,
    // widened for the two-pass edge placement.
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let p = corner_widening() * Complex64::new(-half, half);

    // Low-pass to band-pass: each prototype pole yields a pair of
    // band-pass poles; conjugates pair up into real sections.
    let pb = p * bw;
    let root = (pb * pb - 4.0 * w0sq).sqrt();
    let s_poles = [(pb + root) / 2.0, (pb - root) / 2.0];

    let theta0 = 2.0 * w0sq.sqrt().atan();
    let z0 = Complex64::new(0.0, theta0).exp();
    let sections = s_poles.map(|s| {
        let zp = (1.0 + s) / (1.0 - s);
        let mut sec = Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -2.0 * zp.re,
            a2: zp.norm_sqr(),
        };
        let g = 1.0 / sec.response(z0).norm();
        sec.b0 *= g;
        sec.b2 *= g;
        sec
    });

    Ok(BandpassFilter {
        sections,
        low_hz,
        high_hz,
        rate_hz,
    })
}

impl BandpassFilter {
    pub fn low_hz(&self) -> f64 {
        self.low_hz
    }

    pub fn high_hz(&self) -> f64 {
        self.high_hz
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Shortest record the filter will accept, ten periods of the slow
    /// corner's time constant.
    pub fn min_record_s(&self) -> f64 {
        10.0 / (2.0 * std::f64::consts::PI * self.low_hz)
    }

    /// Single-pass magnitude response at a frequency in Hz.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        let z = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f_hz / self.rate_hz).exp();
        self.sections
            .iter()
            .map(|s| s.response(z).norm())
            .product()
    }

    /// Two-pass (forward-backward) filtering. Zero phase; the amplitude
    /// response is `magnitude` squared. The record is extended on both
    /// ends by odd reflection, one slow-corner period long, to suppress
    /// warm-up transients. Removes the mean before filtering and the
    /// residual mean after.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        let have_s = n as f64 / self.rate_hz;
        let need_s = self.min_record_s();
        if have_s < need_s {
            return Err(Error::RecordTooShort { have_s, need_s });
        }

        let mean = x.iter().sum::<f64>() / n as f64;
        let pad = ((self.rate_hz / self.low_hz).ceil() as usize).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in 0..pad {
            ext.push((2.0 * x[0] - x[pad - i]) - mean);
        }
        ext.extend(x.iter().map(|v| v - mean));
        for i in 0..pad {
            ext.push((2.0 * x[n - 1] - x[n - 2 - i]) - mean);
        }

        for _pass in 0..2 {
            for sec in &self.sections {
                let zi = sec.rest_state(ext[0]);
                sec.run_in_place(&mut ext, zi);
            }
            ext.reverse();
        }

        let mut out: Vec<f64> = ext[pad..pad + n].to_vec();
        let residual = out.iter().sum::<f64>() / n as f64;
        for v in &mut out {
            *v -= residual;
        }
        Ok(out)
    }
}

/// Causal cascade of identical one-pole low-pass stages,
/// `y[n] = a y[n-1] + (1-a) x[n]` with `a = exp(-2 pi fc / rate)`.
/// Models the group-delay smoothing of practical frequency estimates.
#[derive(Debug, Clone, Copy)]
pub struct LowPassCascade {
    a: f64,
    order: usize,
    rate_hz: f64,
    cutoff_hz: f64,
}

impl LowPassCascade {
    pub fn design(cutoff_hz: f64, order: usize, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::FilterDesign(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
            return Err(Error::FilterDesign(format!(
                "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
                rate_hz / 2.0
            )));
        }
        if order == 0 {
            return Err(Error::FilterDesign("cascade order must be >= 1".into()));
        }
        Ok(LowPassCascade {
            a: (-2.0 * std::f64::consts::PI * cutoff_hz / rate_hz).exp(),
            order,
            rate_hz,
            cutoff_hz,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Applies the cascade. Each stage starts at its first input value,
    /// so a constant record passes through unchanged.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for _ in 0..self.order {
            if let Some(&first) = y.first() {
                let mut state = first;
                for v in y.iter_mut() {
                    state = self.a * state + (1.0 - self.a) * *v;
                    *v = state;
                }
            }
        }
        y
    }

    pub fn magnitude(&self, f_hz: f64) -> f64 {
        let z = Complex64::new(0.0, -2.0 * std::f64::consts::PI * f_hz / self.rate_hz).exp();
        let h = (1.0 - self.a) / (1.0 - self.a * z).norm();
        h.powi(self.order as i32)
    }
}
