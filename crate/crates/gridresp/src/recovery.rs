//! Recovery of impulse responses from ambient measurement records.
//!
//! Pipeline: pick a source and a target channel, detrend the record,
//! cross-correlate, differentiate in lag as the channel kinds require,
//! and scale. Which derivative order turns a correlation into which
//! response kind is fixed by the relation table in `classify_relation`;
//! the theoretical scale is `2 gamma / alpha` with a sign from the same
//! table.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::filter::design_bandpass;
use crate::response::{ImpulseResponse, ResponseKind};
use crate::trace::{ChannelKind, SignalTrace};

/// Broad signal class a channel belongs to for relation lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalClass {
    Angle,
    Freq,
    Flow,
}

impl SignalClass {
    fn of(kind: ChannelKind) -> Option<SignalClass> {
        if kind.is_angle() {
            Some(SignalClass::Angle)
        } else if kind.is_freq() {
            Some(SignalClass::Freq)
        } else if kind.is_flow() {
            Some(SignalClass::Flow)
        } else {
            None
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SignalClass::Angle => "angle",
            SignalClass::Freq => "freq",
            SignalClass::Flow => "flow",
        }
    }
}

/// One admissible (source class, target class, derivative order) entry.
#[derive(Debug, Clone, Copy)]
pub struct Relation {
    pub source_class: SignalClass,
    pub target_class: SignalClass,
    pub order: usize,
    /// Kind of response the entry produces.
    pub response: ResponseKind,
    /// Sign applied with the theoretical `2 gamma / alpha` scale.
    pub sign: f64,
}

impl Relation {
    pub fn tag(&self) -> String {
        format!(
            "{}-{}/order{}",
            self.source_class.as_str(),
            self.target_class.as_str(),
            self.order
        )
    }
}

/// Looks up which response a (source kind, target kind, order) triple
/// yields. The differentiated correlation of frequency with frequency
/// needs a positive scale; every other admissible combination carries a
/// negative one.
pub fn classify_relation(
    source: ChannelKind,
    target: ChannelKind,
    order: usize,
) -> Result<Relation> {
    let unsupported = || Error::UnsupportedRelation {
        from: source.as_str().into(),
        to: target.as_str().into(),
        order,
    };
    let sc = SignalClass::of(source).ok_or_else(unsupported)?;
    let tc = SignalClass::of(target).ok_or_else(unsupported)?;
    let angle_kind = if target == ChannelKind::BusAngle {
        ResponseKind::BusAngle
    } else {
        ResponseKind::Angle
    };
    let (response, sign) = match (sc, tc, order) {
        (SignalClass::Freq, SignalClass::Freq, 0) => (ResponseKind::Frequency, 1.0),
        (SignalClass::Angle, SignalClass::Angle, 1) => (angle_kind, -1.0),
        (SignalClass::Angle, SignalClass::Angle, 2) => (ResponseKind::Frequency, -1.0),
        (SignalClass::Freq, SignalClass::Angle, 0) => (angle_kind, -1.0),
        (SignalClass::Freq, SignalClass::Angle, 1) => (ResponseKind::Frequency, -1.0),
        (SignalClass::Angle, SignalClass::Flow, 1) => (ResponseKind::LineFlow, -1.0),
        (SignalClass::Freq, SignalClass::Flow, 0) => (ResponseKind::LineFlow, -1.0),
        _ => return Err(unsupported()),
    };
    Ok(Relation {
        source_class: sc,
        target_class: tc,
        order,
        response,
        sign,
    })
}

/// How to place the recovered curve in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Leave the differentiated correlation as is.
    None,
    /// Multiply by `sign * 2 gamma / alpha`, valid when the forcing
    /// intensity and damping ratio are known.
    Theoretical { gamma: f64, alpha: f64 },
    /// Match the curve's largest-magnitude extremum to a reference
    /// value observed by other means.
    NadirMatch { reference: f64 },
}

/// Estimator backend; both give the same numbers to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMethod {
    Direct,
    #[default]
    Fft,
}

/// Full recovery setup for one channel pair.
#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub source: String,
    pub target: String,
    pub differentiation_order: usize,
    /// Zero-phase band-pass applied to every measurement channel before
    /// correlation; `None` skips filtering and only removes means.
    pub passband_hz: Option<(f64, f64)>,
    pub max_lag_s: f64,
    pub scaling: Scaling,
    /// Subtract the across-channel mean from angle channels, removing
    /// the common drift they all share.
    pub subtract_reference_angle: bool,
    pub method: CorrelationMethod,
}

impl RecoveryConfig {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        RecoveryConfig {
            source: source.into(),
            target: target.into(),
            differentiation_order: 0,
            passband_hz: Some((0.1, 0.8)),
            max_lag_s: 10.0,
            scaling: Scaling::None,
            subtract_reference_angle: true,
            method: CorrelationMethod::Fft,
        }
    }
}

/// Detrends a record for correlation work. Angle channels first lose
/// their across-channel mean (when enabled and at least two are
/// present), then every measurement channel is band-pass filtered, or
/// just de-meaned when no passband is given. Input channels pass
/// through untouched.
pub fn preprocess(
    trace: &SignalTrace,
    passband_hz: Option<(f64, f64)>,
    subtract_reference_angle: bool,
) -> Result<SignalTrace> {
    let n = trace.len();
    let mut working: Vec<Vec<f64>> = trace.channels().iter().map(|c| c.samples.clone()).collect();

    if subtract_reference_angle {
        let angle_idx: Vec<usize> = trace
            .channels()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind.is_angle())
            .map(|(i, _)| i)
            .collect();
        if angle_idx.len() >= 2 {
            let inv = 1.0 / angle_idx.len() as f64;
            for m in 0..n {
                let reference: f64 = angle_idx.iter().map(|&i| working[i][m]).sum::<f64>() * inv;
                for &i in &angle_idx {
                    working[i][m] -= reference;
                }
            }
        }
    }

    let bandpass = match passband_hz {
        Some((lo, hi)) => Some(design_bandpass(lo, hi, trace.rate_hz())?),
        None => None,
    };
    for (i, c) in trace.channels().iter().enumerate() {
        if !c.kind.is_measurement() {
            continue;
        }
        match &bandpass {
            Some(f) => working[i] = f.filtfilt(&working[i])?,
            None => {
                let mean = working[i].iter().sum::<f64>() / n as f64;
                working[i].iter_mut().for_each(|v| *v -= mean);
            }
        }
    }

    let mut it = working.into_iter();
    Ok(trace.map_samples(|_| it.next().expect("one slot per channel")))
}

/// Biased sample cross-correlation `C[tau] = (1/M) sum_m x[m+tau] y[m]`
/// for lags `0..=max_lag`. The `1/M` normalization keeps the statistic
/// comparable across lags and record lengths.
pub fn cross_correlate(
    x: &[f64],
    y: &[f64],
    max_lag: usize,
    method: CorrelationMethod,
) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "records of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let m = x.len();
    if max_lag >= m {
        return Err(Error::CurveTooShort {
            len: m,
            need: max_lag + 1,
        });
    }
    match method {
        CorrelationMethod::Direct => {
            let inv = 1.0 / m as f64;
            Ok((0..=max_lag)
                .map(|tau| {
                    let mut acc = 0.0;
                    for i in 0..m - tau {
                        acc += x[i + tau] * y[i];
                    }
                    acc * inv
                })
                .collect())
        }
        CorrelationMethod::Fft => {
            let size = (m + max_lag).next_power_of_two();
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(size);
            let ifft = planner.plan_fft_inverse(size);

            let mut xf: Vec<Complex64> = x
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .chain(std::iter::repeat(Complex64::ZERO))
                .take(size)
                .collect();
            let mut yf: Vec<Complex64> = y
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .chain(std::iter::repeat(Complex64::ZERO))
                .take(size)
                .collect();
            fft.process(&mut xf);
            fft.process(&mut yf);
            for (a, b) in xf.iter_mut().zip(&yf) {
                *a *= b.conj();
            }
            ifft.process(&mut xf);
            let norm = 1.0 / (size as f64 * m as f64);
            Ok(xf[..=max_lag].iter().map(|v| v.re * norm).collect())
        }
    }
}

/// Second-order finite differences on a uniform grid. Order 0 copies,
/// order 1 uses centered first differences, order 2 the three-point
/// curvature stencil; both fall back to one-sided stencils of the same
/// accuracy at the ends.
pub fn differentiate(x: &[f64], dt: f64, order: usize) -> Result<Vec<f64>> {
    if order > 2 {
        return Err(Error::Config(format!(
            "differentiation order {order} not supported (0, 1, or 2)"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {dt}")));
    }
    let n = x.len();
    if n < 2 * order + 1 {
        return Err(Error::CurveTooShort {
            len: n,
            need: 2 * order + 1,
        });
    }
    match order {
        0 => Ok(x.to_vec()),
        1 => {
            let h2 = 2.0 * dt;
            let mut d = Vec::with_capacity(n);
            d.push((-3.0 * x[0] + 4.0 * x[1] - x[2]) / h2);
            for i in 1..n - 1 {
                d.push((x[i + 1] - x[i - 1]) / h2);
            }
            d.push((3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / h2);
            Ok(d)
        }
        _ => {
            let hh = dt * dt;
            let mut d = Vec::with_capacity(n);
            d.push((2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / hh);
            for i in 1..n - 1 {
                d.push((x[i + 1] - 2.0 * x[i] + x[i - 1]) / hh);
            }
            d.push((2.0 * x[n - 1] - 5.0 * x[n - 2] + 4.0 * x[n - 3] - x[n - 4]) / hh);
            Ok(d)
        }
    }
}

/// Runs the whole pipeline on one channel pair and returns the
/// recovered impulse response on the lag grid `0..=max_lag`. The lag
/// range is capped at a quarter of the record so the correlation
/// estimate keeps most of the record behind every lag.
pub fn recover(trace: &SignalTrace, cfg: &RecoveryConfig) -> Result<ImpulseResponse> {
    let source = trace.require(&cfg.source)?;
    let target = trace.require(&cfg.target)?;
    let relation = classify_relation(source.kind, target.kind, cfg.differentiation_order)?;

    let pre = preprocess(trace, cfg.passband_hz, cfg.subtract_reference_angle)?;
    let x = &pre.require(&cfg.source)?.samples;
    let y = &pre.require(&cfg.target)?.samples;

    if !(cfg.max_lag_s > 0.0) {
        return Err(Error::Config(format!(
            "max lag must be positive, got {}",
            cfg.max_lag_s
        )));
    }
    let dt = trace.dt();
    let max_lag = ((cfg.max_lag_s * trace.rate_hz()).round() as usize).min(trace.len() / 4);
    let corr = cross_correlate(x, y, max_lag, cfg.method)?;
    let curve = differentiate(&corr, dt, cfg.differentiation_order)?;

    let scale = match cfg.scaling {
        Scaling::None => 1.0,
        Scaling::Theoretical { gamma, alpha } => {
            if !(gamma > 0.0) || !(alpha > 0.0) {
                return Err(Error::Config(format!(
                    "theoretical scaling needs positive gamma and alpha, got {gamma} and {alpha}"
                )));
            }
            relation.sign * 2.0 * gamma / alpha
        }
        Scaling::NadirMatch { reference } => {
            let extremum = curve
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);
            if extremum == 0.0 {
                return Err(Error::Degenerate(
                    "curve has no extremum to match".into(),
                ));
            }
            reference / extremum
        }
    };

    Ok(ImpulseResponse {
        start_lag_s: 0.0,
        lag_step_s: dt,
        values: curve.into_iter().map(|v| v * scale).collect(),
        source: cfg.source.clone(),
        target: cfg.target.clone(),
        kind: relation.response,
        relation: Some(relation.tag()),
        scale_applied: scale,
    })
}
