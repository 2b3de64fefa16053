//! Uniformly sampled multichannel records.
//!
//! Channels are named `<kind>:<location>`, e.g. `rotor_freq:2`,
//! `bus_angle:1`, `line_flow:1-2`, `input:3`. The kind determines how a
//! channel is treated downstream: angle kinds are reference-subtracted,
//! frequency kinds can be degraded by measurement filters, and input
//! channels pass through preprocessing untouched.

use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    RotorAngle,
    RotorFreq,
    BusAngle,
    BusFreq,
    LineFlow,
    Input,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::RotorAngle => "rotor_angle",
            ChannelKind::RotorFreq => "rotor_freq",
            ChannelKind::BusAngle => "bus_angle",
            ChannelKind::BusFreq => "bus_freq",
            ChannelKind::LineFlow => "line_flow",
            ChannelKind::Input => "input",
        }
    }

    pub fn is_angle(self) -> bool {
        matches!(self, ChannelKind::RotorAngle | ChannelKind::BusAngle)
    }

    pub fn is_freq(self) -> bool {
        matches!(self, ChannelKind::RotorFreq | ChannelKind::BusFreq)
    }

    pub fn is_flow(self) -> bool {
        self == ChannelKind::LineFlow
    }

    /// Input channels record the forcing, not a measurement; they are
    /// exempt from noise, filtering, and reference subtraction.
    pub fn is_measurement(self) -> bool {
        self != ChannelKind::Input
    }
}

impl FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotor_angle" => Ok(ChannelKind::RotorAngle),
            "rotor_freq" => Ok(ChannelKind::RotorFreq),
            "bus_angle" => Ok(ChannelKind::BusAngle),
            "bus_freq" => Ok(ChannelKind::BusFreq),
            "line_flow" => Ok(ChannelKind::LineFlow),
            "input" => Ok(ChannelKind::Input),
            other => Err(Error::Config(format!("unknown channel kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One named sample stream.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    pub kind: ChannelKind,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(kind: ChannelKind, location: impl std::fmt::Display, samples: Vec<f64>) -> Self {
        Channel {
            name: format!("{kind}:{location}"),
            kind,
            samples,
        }
    }

    /// Splits a `<kind>:<location>` name back into its parts.
    pub fn parse_name(name: &str) -> Result<(ChannelKind, &str)> {
        let (kind, loc) = name
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("channel name {name:?} lacks a kind prefix")))?;
        Ok((kind.parse()?, loc))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// A set of equally long channels on a shared uniform time grid.
/// Sample `m` sits at `start_time_s + m / rate_hz`.
#[derive(Debug, Clone)]
pub struct SignalTrace {
    rate_hz: f64,
    start_time_s: f64,
    channels: Vec<Channel>,
}

impl SignalTrace {
    pub fn new(rate_hz: f64, start_time_s: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(rate_hz > 0.0) || !rate_hz.is_finite() {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::Config("trace has no channels".into()));
        }
        let len = channels[0].samples.len();
        if let Some(c) = channels.iter().find(|c| c.samples.len() != len) {
            return Err(Error::Dimension(format!(
                "channel {} has {} samples, expected {}",
                c.name,
                c.samples.len(),
                len
            )));
        }
        let mut names: Vec<&str> = channels.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != channels.len() {
            return Err(Error::Config("duplicate channel name in trace".into()));
        }
        Ok(SignalTrace {
            rate_hz,
            start_time_s,
            channels,
        })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn len(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    pub fn time(&self, m: usize) -> f64 {
        self.start_time_s + m as f64 / self.rate_hz
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Channel> {
        self.channel(name).ok_or_else(|| Error::MissingChannel {
            requested: name.to_string(),
            available: self.channel_names(),
        })
    }

    pub fn channels_of_kind(&self, kind: ChannelKind) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(move |c| c.kind == kind)
    }

    /// Appends a channel; the name must be new and the length must match.
    pub fn push(&mut self, channel: Channel) -> Result<()> {
        if channel.samples.len() != self.len() {
            return Err(Error::Dimension(format!(
                "channel {} has {} samples, trace has {}",
                channel.name,
                channel.samples.len(),
                self.len()
            )));
        }
        if self.channel(&channel.name).is_some() {
            return Err(Error::Config(format!(
                "channel {} already in trace",
                channel.name
            )));
        }
        self.channels.push(channel);
        Ok(())
    }

    /// Replaces every channel's samples through a function; used by
    /// filters that keep the channel structure intact.
    pub fn map_samples<F>(&self, mut f: F) -> SignalTrace
    where
        F: FnMut(&Channel) -> Vec<f64>,
    {
        let channels = self
            .channels
            .iter()
            .map(|c| Channel {
                name: c.name.clone(),
                kind: c.kind,
                samples: f(c),
            })
            .collect();
        SignalTrace {
            rate_hz: self.rate_hz,
            start_time_s: self.start_time_s,
            channels,
        }
    }
}
