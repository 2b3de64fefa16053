//! Impulse response curves on a uniform lag grid.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Physical quantity an impulse response curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseKind {
    Frequency,
    Angle,
    BusAngle,
    LineFlow,
}

impl ResponseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseKind::Frequency => "frequency",
            ResponseKind::Angle => "angle",
            ResponseKind::BusAngle => "bus_angle",
            ResponseKind::LineFlow => "line_flow",
        }
    }
}

impl FromStr for ResponseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" => Ok(ResponseKind::Frequency),
            "angle" => Ok(ResponseKind::Angle),
            "bus_angle" => Ok(ResponseKind::BusAngle),
            "line_flow" => Ok(ResponseKind::LineFlow),
            other => Err(Error::Config(format!("unknown response kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A sampled impulse response: value `values[i]` at lag
/// `start_lag_s + i * lag_step_s`. Carries the endpoints it relates and,
/// for recovered curves, the relation tag and the scale that was applied.
#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    pub start_lag_s: f64,
    pub lag_step_s: f64,
    pub values: Vec<f64>,
    pub source: String,
    pub target: String,
    pub kind: ResponseKind,
    /// `"<src>-<tgt>/order<k>"` for recovered curves, `None` for
    /// analytic or simulated ones.
    pub relation: Option<String>,
    /// Multiplier that turned the raw correlation statistic into
    /// response units; 1 for analytic curves.
    pub scale_applied: f64,
}

impl ImpulseResponse {
    /// An analytic or simulated curve starting at lag zero.
    pub fn analytic(
        lag_step_s: f64,
        values: Vec<f64>,
        source: impl Into<String>,
        target: impl Into<String>,
        kind: ResponseKind,
    ) -> Self {
        ImpulseResponse {
            start_lag_s: 0.0,
            lag_step_s,
            values,
            source: source.into(),
            target: target.into(),
            kind,
            relation: None,
            scale_applied: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lag(&self, i: usize) -> f64 {
        self.start_lag_s + i as f64 * self.lag_step_s
    }

    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.lag(i))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Linear interpolation at an arbitrary lag inside the grid. Lags
    /// landing on a grid point up to rounding return the sample itself,
    /// so matching grids compare sample-for-sample.
    pub fn value_at(&self, lag_s: f64) -> Option<f64> {
        if self.values.is_empty() || self.lag_step_s <= 0.0 {
            return None;
        }
        let pos = (lag_s - self.start_lag_s) / self.lag_step_s;
        if pos < -1e-9 || pos > (self.len() - 1) as f64 + 1e-9 {
            return None;
        }
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            return Some(self.values[nearest.clamp(0.0, (self.len() - 1) as f64) as usize]);
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.len() {
            return Some(self.values[self.len() - 1]);
        }
        let frac = pos - i as f64;
        Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }
}
