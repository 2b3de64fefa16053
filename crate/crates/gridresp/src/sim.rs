//! Time-domain simulation of the swing dynamics.
//!
//! The continuous state is `x = (angles, frequencies)` with
//! `x' = A x + B u`; both the homogeneous flow and the input coupling
//! are discretized exactly through one augmented matrix exponential, so
//! the stepper is exact for piecewise-constant inputs at any step size.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filter::LowPassCascade;
use crate::grid::{GridCase, OutputSpec};
use crate::trace::{Channel, ChannelKind, SignalTrace};

/// Exact one-step update matrices for a fixed step size.
#[derive(Debug, Clone)]
pub struct Discretized {
    a_d: DMatrix<f64>,
    b_d: DMatrix<f64>,
    dt: f64,
}

/// Discretizes a case at step `dt`. Works for any damping profile; the
/// uniform-ratio requirement belongs to the modal layer only.
pub fn discretize(case: &GridCase, dt: f64) -> Result<Discretized> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let n = case.n();
    let m = case.inertia();
    let k = case.jacobian();
    let d = case.damping();

    // Augment [[A, B], [0, 0]]; its exponential carries both the state
    // transition (top-left) and the held-input coupling (top-right).
    let dim = 2 * n + n;
    let mut aug = DMatrix::zeros(dim, dim);
    for i in 0..n {
        aug[(i, n + i)] = 1.0;
        for j in 0..n {
            aug[(n + i, j)] = -k[(i, j)] / m[i];
        }
        aug[(n + i, n + i)] -= d[i] / m[i];
        aug[(n + i, 2 * n + i)] = 1.0 / m[i];
    }
    let e = (aug * dt).exp();
    Ok(Discretized {
        a_d: e.view((0, 0), (2 * n, 2 * n)).into(),
        b_d: e.view((0, 2 * n), (2 * n, n)).into(),
        dt,
    })
}

impl Discretized {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state_dim(&self) -> usize {
        self.a_d.nrows()
    }

    /// Advances one step under an input held constant over the step.
    pub fn step(&self, x: &mut DVector<f64>, scratch: &mut DVector<f64>, u: &DVector<f64>) {
        scratch.gemv(1.0, &self.a_d, x, 0.0);
        scratch.gemv(1.0, &self.b_d, u, 1.0);
        std::mem::swap(x, scratch);
    }

    pub fn a_d(&self) -> &DMatrix<f64> {
        &self.a_d
    }

    pub fn b_d(&self) -> &DMatrix<f64> {
        &self.b_d
    }
}

/// Where the stochastic forcing enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// Independent white torque at every machine with variance
    /// `alpha * inertia / dt` per sample, the inertia-scaled profile
    /// under which the analytic correlation formulas hold.
    GeneratorWhite,
    /// Unit-intensity white load changes (`alpha / dt` per sample) at a
    /// selected machine subset.
    LoadPerturb,
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "generator_white" => Ok(InputMode::GeneratorWhite),
            "load_perturb" => Ok(InputMode::LoadPerturb),
            other => Err(Error::Config(format!(
                "unknown input mode {other:?} (have generator_white, load_perturb)"
            ))),
        }
    }
}

impl std::fmt::Display for InputMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputMode::GeneratorWhite => "generator_white",
            InputMode::LoadPerturb => "load_perturb",
        })
    }
}

/// Slow periodic swell of the forcing amplitude.
#[derive(Debug, Clone, Copy)]
pub struct Modulation {
    pub period_s: f64,
    /// Relative amplitude in [0, 1]; the per-step scale is
    /// `1 + depth * sin(2 pi t / period)`.
    pub depth: f64,
}

/// Ambient simulation setup.
#[derive(Debug, Clone)]
pub struct AmbientConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Forcing intensity; see `InputMode`.
    pub alpha: f64,
    pub seed: u64,
    pub input_mode: InputMode,
    /// Machines receiving load perturbations; `None` means all.
    /// Ignored under `GeneratorWhite`.
    pub load_machines: Option<Vec<u32>>,
    /// Additive measurement noise, as a fraction of each channel's
    /// stationary fluctuation scale: for angle channels the RMS around
    /// the shared drift, for everything else the plain RMS.
    pub measurement_noise_rel: f64,
    /// Record the forcing samples as `input:<id>` channels.
    pub record_input: bool,
    pub modulation: Option<Modulation>,
}

impl Default for AmbientConfig {
    fn default() -> Self {
        AmbientConfig {
            duration_s: 600.0,
            rate_hz: 100.0,
            alpha: 0.01,
            seed: 0,
            input_mode: InputMode::GeneratorWhite,
            load_machines: None,
            measurement_noise_rel: 0.0,
            record_input: false,
            modulation: None,
        }
    }
}

/// Simulates ambient operation from rest under seeded stochastic
/// forcing. Emits rotor angle and frequency channels for every machine,
/// then per requested output a bus angle plus bus frequency pair or a
/// line flow, then optionally the input records. Reruns with one config
/// are sample-identical.
pub fn simulate_ambient(
    case: &GridCase,
    cfg: &AmbientConfig,
    outputs: &[OutputSpec],
) -> Result<SignalTrace> {
    if !(cfg.duration_s > 0.0) {
        return Err(Error::Config(format!(
            "duration must be positive, got {}",
            cfg.duration_s
        )));
    }
    if !(cfg.alpha > 0.0) {
        return Err(Error::Config(format!(
            "forcing intensity must be positive, got {}",
            cfg.alpha
        )));
    }
    if !(cfg.measurement_noise_rel >= 0.0) {
        return Err(Error::Config(format!(
            "measurement noise fraction must be nonnegative, got {}",
            cfg.measurement_noise_rel
        )));
    }
    if let Some(m) = &cfg.modulation {
        if !(m.period_s > 0.0) || !(0.0..=1.0).contains(&m.depth) {
            return Err(Error::Config(format!(
                "modulation needs period > 0 and depth in [0, 1], got {} and {}",
                m.period_s, m.depth
            )));
        }
    }

    let n = case.n();
    let dt = 1.0 / cfg.rate_hz;
    let disc = discretize(case, dt)?;
    let steps = (cfg.duration_s * cfg.rate_hz).round() as usize;
    if steps < 2 {
        return Err(Error::Config("record would hold fewer than 2 samples".into()));
    }

    // Per-machine forcing scale per sample.
    let mut sigma = vec![0.0; n];
    match cfg.input_mode {
        InputMode::GeneratorWhite => {
            for i in 0..n {
                sigma[i] = (cfg.alpha * case.inertia()[i] / dt).sqrt();
            }
        }
        InputMode::LoadPerturb => {
            let s = (cfg.alpha / dt).sqrt();
            match &cfg.load_machines {
                None => sigma.iter_mut().for_each(|v| *v = s),
                Some(ids) => {
                    for &id in ids {
                        let i = case
                            .index_of(id)
                            .ok_or_else(|| Error::UnknownReference(format!("machine {id}")))?;
                        sigma[i] = s;
                    }
                }
            }
        }
    }

    let mut process_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = DVector::zeros(2 * n);
    let mut scratch = DVector::zeros(2 * n);
    let mut u = DVector::zeros(n);

    let mut angles = vec![Vec::with_capacity(steps); n];
    let mut freqs = vec![Vec::with_capacity(steps); n];
    let mut inputs = if cfg.record_input {
        vec![Vec::with_capacity(steps); n]
    } else {
        Vec::new()
    };

    for m in 0..steps {
        let swell = match &cfg.modulation {
            Some(md) => {
                let t = m as f64 * dt;
                1.0 + md.depth * (2.0 * std::f64::consts::PI * t / md.period_s).sin()
            }
            None => 1.0,
        };
        for i in 0..n {
            let g: f64 = process_rng.sample(StandardNormal);
            u[i] = sigma[i] * swell * g;
        }
        if cfg.record_input {
            for i in 0..n {
                inputs[i].push(u[i]);
            }
        }
        disc.step(&mut x, &mut scratch, &u);
        for i in 0..n {
            angles[i].push(x[i]);
            freqs[i].push(x[n + i]);
        }
    }

    let mut channels = Vec::new();
    for (i, samples) in angles.into_iter().enumerate() {
        channels.push(Channel::new(ChannelKind::RotorAngle, case.ids()[i], samples));
    }
    for (i, samples) in freqs.into_iter().enumerate() {
        channels.push(Channel::new(ChannelKind::RotorFreq, case.ids()[i], samples));
    }

    for spec in outputs {
        let rows = case.output_matrix(&[*spec])?;
        let row: Vec<f64> = rows.row(0).iter().copied().collect();
        let project = |per_machine: &[&Channel]| -> Vec<f64> {
            (0..steps)
                .map(|m| {
                    row.iter()
                        .enumerate()
                        .map(|(i, &w)| w * per_machine[i].samples[m])
                        .sum()
                })
                .collect()
        };
        let angle_chans: Vec<&Channel> = channels[..n].iter().collect();
        let freq_chans: Vec<&Channel> = channels[n..2 * n].iter().collect();
        match *spec {
            OutputSpec::Bus(id) => {
                let bus_angle = project(&angle_chans);
                let bus_freq = project(&freq_chans);
                channels.push(Channel::new(ChannelKind::BusAngle, id, bus_angle));
                channels.push(Channel::new(ChannelKind::BusFreq, id, bus_freq));
            }
            OutputSpec::Line(a, b) => {
                let flow = project(&angle_chans);
                channels.push(Channel::new(ChannelKind::LineFlow, format!("{a}-{b}"), flow));
            }
        }
    }

    if cfg.measurement_noise_rel > 0.0 {
        // Angle channels share a growing drift; their noise scale is
        // the fluctuation around the across-channel mean, so it does
        // not grow with record length the way the raw RMS does.
        let angle_count = channels.iter().filter(|c| c.kind.is_angle()).count();
        let angle_ref: Option<Vec<f64>> = if angle_count >= 2 {
            let mut acc = vec![0.0; steps];
            for c in channels.iter().filter(|c| c.kind.is_angle()) {
                for (m, v) in c.samples.iter().enumerate() {
                    acc[m] += v;
                }
            }
            for v in &mut acc {
                *v /= angle_count as f64;
            }
            Some(acc)
        } else {
            None
        };

        let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        noise_rng.set_stream(1);
        for c in channels.iter_mut().filter(|c| c.kind.is_measurement()) {
            let base = match (&angle_ref, c.kind.is_angle()) {
                (Some(reference), true) => {
                    let ss: f64 = c
                        .samples
                        .iter()
                        .zip(reference)
                        .map(|(v, r)| (v - r) * (v - r))
                        .sum();
                    (ss / steps as f64).sqrt()
                }
                _ => c.rms(),
            };
            let s = cfg.measurement_noise_rel * base;
            for v in &mut c.samples {
                let g: f64 = noise_rng.sample(StandardNormal);
                *v += s * g;
            }
        }
    }

    if cfg.record_input {
        for (i, samples) in inputs.into_iter().enumerate() {
            channels.push(Channel::new(ChannelKind::Input, case.ids()[i], samples));
        }
    }

    SignalTrace::new(cfg.rate_hz, dt, channels)
}

/// Simulates the response to a unit impulse at one machine: a pulse of
/// height `1/dt` held over the first step. Samples land at the step
/// midpoints (`start_time = dt/2`), where the held-pulse approximation
/// of the ideal impulse is second-order accurate.
pub fn simulate_impulse(
    case: &GridCase,
    source_id: u32,
    rate_hz: f64,
    horizon_s: f64,
) -> Result<SignalTrace> {
    if !(horizon_s > 0.0) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon_s}"
        )));
    }
    let k = case
        .index_of(source_id)
        .ok_or_else(|| Error::UnknownReference(format!("machine {source_id}")))?;
    let n = case.n();
    let dt = 1.0 / rate_hz;
    let disc = discretize(case, dt)?;
    let steps = (horizon_s * rate_hz).round() as usize;
    if steps < 2 {
        return Err(Error::Config("horizon holds fewer than 2 samples".into()));
    }

    let mut x: DVector<f64> = disc.b_d.column(k).into_owned() / dt;
    let mut scratch = DVector::zeros(2 * n);
    let zero = DVector::zeros(n);

    let mut angles = vec![Vec::with_capacity(steps); n];
    let mut freqs = vec![Vec::with_capacity(steps); n];
    for _ in 0..steps {
        for i in 0..n {
            angles[i].push(x[i]);
            freqs[i].push(x[n + i]);
        }
        disc.step(&mut x, &mut scratch, &zero);
    }

    let mut channels = Vec::new();
    for (i, samples) in angles.into_iter().enumerate() {
        channels.push(Channel::new(ChannelKind::RotorAngle, case.ids()[i], samples));
    }
    for (i, samples) in freqs.into_iter().enumerate() {
        channels.push(Channel::new(ChannelKind::RotorFreq, case.ids()[i], samples));
    }
    SignalTrace::new(rate_hz, dt / 2.0, channels)
}

/// Appends observable channels computed sample-wise from the rotor
/// angle channels already in a trace: `bus_angle:<id>` rows of the bus
/// angle map and `line_flow:<a>-<b>` signed angle differences.
pub fn map_outputs(
    trace: &SignalTrace,
    case: &GridCase,
    outputs: &[OutputSpec],
) -> Result<SignalTrace> {
    let n = case.n();
    let mut angle_chans = Vec::with_capacity(n);
    for &id in case.ids() {
        angle_chans.push(trace.require(&format!("rotor_angle:{id}"))?);
    }

    let mut out = trace.clone();
    for spec in outputs {
        let rows = case.output_matrix(&[*spec])?;
        let samples: Vec<f64> = (0..trace.len())
            .map(|m| {
                (0..n)
                    .map(|i| rows[(0, i)] * angle_chans[i].samples[m])
                    .sum()
            })
            .collect();
        let channel = match *spec {
            OutputSpec::Bus(id) => Channel::new(ChannelKind::BusAngle, id, samples),
            OutputSpec::Line(a, b) => {
                Channel::new(ChannelKind::LineFlow, format!("{a}-{b}"), samples)
            }
        };
        out.push(channel)?;
    }
    Ok(out)
}

/// Returns a copy of the trace with every frequency channel smoothed by
/// a causal low-pass cascade, imitating the internal averaging of
/// practical frequency measurements. Angle and flow channels pass
/// through untouched.
pub fn degrade_frequency(trace: &SignalTrace, cutoff_hz: f64, order: usize) -> Result<SignalTrace> {
    let lp = LowPassCascade::design(cutoff_hz, order, trace.rate_hz())?;
    Ok(trace.map_samples(|c| {
        if c.kind.is_freq() {
            lp.apply(&c.samples)
        } else {
            c.samples.clone()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{self, GridCase};
    use crate::modal;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn free_machine(gamma: f64) -> GridCase {
        GridCase::new(
            vec![1],
            vec![1.0],
            vec![gamma],
            DMatrix::from_row_slice(1, 1, &[0.0]),
            None,
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn discretization_matches_closed_form_for_free_machine() {
        let g: f64 = 0.5;
        let dt = 0.02;
        let disc = discretize(&free_machine(g), dt).unwrap();
        let decay = (-g * dt).exp();
        let ramp = (1.0 - decay) / g;
        assert_abs_diff_eq!(disc.a_d()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(disc.a_d()[(0, 1)], ramp, epsilon = 1e-12);
        assert_abs_diff_eq!(disc.a_d()[(1, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(disc.a_d()[(1, 1)], decay, epsilon = 1e-12);
        assert_abs_diff_eq!(disc.b_d()[(0, 0)], (dt - ramp) / g, epsilon = 1e-12);
        assert_abs_diff_eq!(disc.b_d()[(1, 0)], ramp, epsilon = 1e-12);
    }

    #[test]
    fn impulse_simulation_tracks_modal_curves() {
        let case = grid::wscc9_reduced_case();
        let md = modal::decompose(&case).unwrap();
        let rate = 200.0;
        let trace = simulate_impulse(&case, 1, rate, 20.0).unwrap();
        assert_abs_diff_eq!(trace.start_time_s(), 0.5 / rate, epsilon = 1e-15);

        let taus: Vec<f64> = (0..trace.len()).map(|m| trace.time(m)).collect();
        let truth_f = md.impulse_frequency(1, 0, &taus).unwrap();
        let truth_a = md.impulse_angle(1, 0, &taus).unwrap();
        let sim_f = &trace.require("rotor_freq:2").unwrap().samples;
        let sim_a = &trace.require("rotor_angle:2").unwrap().samples;

        let scale_f = truth_f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let scale_a = truth_a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for m in 0..trace.len() {
            assert!((sim_f[m] - truth_f[m]).abs() < 1e-4 * scale_f, "freq sample {m}");
            assert!((sim_a[m] - truth_a[m]).abs() < 1e-4 * scale_a, "angle sample {m}");
        }
    }

    fn quick_cfg(seed: u64) -> AmbientConfig {
        AmbientConfig {
            duration_s: 20.0,
            rate_hz: 50.0,
            seed,
            ..AmbientConfig::default()
        }
    }

    #[test]
    fn ambient_is_seed_deterministic() {
        let case = grid::two_machine_case();
        let a = simulate_ambient(&case, &quick_cfg(5), &[]).unwrap();
        let b = simulate_ambient(&case, &quick_cfg(5), &[]).unwrap();
        let c = simulate_ambient(&case, &quick_cfg(6), &[]).unwrap();
        assert_eq!(
            a.require("rotor_freq:1").unwrap().samples,
            b.require("rotor_freq:1").unwrap().samples
        );
        assert_ne!(
            a.require("rotor_freq:1").unwrap().samples,
            c.require("rotor_freq:1").unwrap().samples
        );
    }

    #[test]
    fn input_samples_have_configured_variance() {
        let case = grid::two_machine_case();
        let cfg = AmbientConfig {
            duration_s: 600.0,
            rate_hz: 100.0,
            alpha: 0.01,
            seed: 3,
            record_input: true,
            ..AmbientConfig::default()
        };
        let t = simulate_ambient(&case, &cfg, &[]).unwrap();
        let expect = cfg.alpha * cfg.rate_hz;
        // Sample variance of n draws concentrates within
        // var * sqrt(2/(n-1)) per standard error.
        let tol = 3.0 * expect * (2.0 / (t.len() as f64 - 1.0)).sqrt();
        for id in [1, 2] {
            let u = t.require(&format!("input:{id}")).unwrap();
            let var = u.samples.iter().map(|x| x * x).sum::<f64>() / u.samples.len() as f64;
            assert!(
                (var - expect).abs() < tol,
                "input:{id} variance {var} vs {expect}"
            );
        }
    }

    #[test]
    fn load_subset_leaves_other_machines_unforced() {
        let case = grid::two_machine_case();
        let cfg = AmbientConfig {
            duration_s: 10.0,
            rate_hz: 50.0,
            input_mode: InputMode::LoadPerturb,
            load_machines: Some(vec![2]),
            record_input: true,
            ..AmbientConfig::default()
        };
        let t = simulate_ambient(&case, &cfg, &[]).unwrap();
        assert!(t.require("input:1").unwrap().samples.iter().all(|&v| v == 0.0));
        assert!(t.require("input:2").unwrap().rms() > 0.0);
    }

    #[test]
    fn unit_inertia_makes_both_input_modes_identical() {
        // With unit inertias the generator-white and all-machine load
        // profiles have the same covariance and share the seed stream.
        let case = grid::two_machine_case();
        let base = quick_cfg(11);
        let gw = simulate_ambient(&case, &base, &[]).unwrap();
        let lp = simulate_ambient(
            &case,
            &AmbientConfig {
                input_mode: InputMode::LoadPerturb,
                ..base
            },
            &[],
        )
        .unwrap();
        assert_eq!(
            gw.require("rotor_angle:2").unwrap().samples,
            lp.require("rotor_angle:2").unwrap().samples
        );
    }

    #[test]
    fn bus_outputs_with_identity_map_mirror_rotor_channels() {
        let case = grid::two_machine_case();
        let t = simulate_ambient(&case, &quick_cfg(1), &[OutputSpec::Bus(1)]).unwrap();
        assert_eq!(
            t.require("bus_angle:1").unwrap().samples,
            t.require("rotor_angle:1").unwrap().samples
        );
        assert_eq!(
            t.require("bus_freq:1").unwrap().samples,
            t.require("rotor_freq:1").unwrap().samples
        );
    }

    #[test]
    fn line_flow_is_signed_angle_difference() {
        let case = grid::two_machine_case();
        let t = simulate_ambient(&case, &quick_cfg(2), &[OutputSpec::Line(1, 2)]).unwrap();
        let a1 = &t.require("rotor_angle:1").unwrap().samples;
        let a2 = &t.require("rotor_angle:2").unwrap().samples;
        let flow = &t.require("line_flow:1-2").unwrap().samples;
        for m in 0..t.len() {
            assert_abs_diff_eq!(flow[m], a1[m] - a2[m], epsilon = 1e-12);
        }
    }

    #[test]
    fn map_outputs_appends_channels_after_the_fact() {
        let case = grid::wscc9_reduced_case();
        let t = simulate_ambient(&case, &quick_cfg(4), &[]).unwrap();
        let mapped = map_outputs(&t, &case, &[OutputSpec::Bus(3), OutputSpec::Line(2, 3)]).unwrap();
        assert_eq!(
            mapped.require("bus_angle:3").unwrap().samples,
            t.require("rotor_angle:3").unwrap().samples
        );
        let a2 = &t.require("rotor_angle:2").unwrap().samples;
        let a3 = &t.require("rotor_angle:3").unwrap().samples;
        let flow = &mapped.require("line_flow:2-3").unwrap().samples;
        for m in 0..t.len() {
            assert_abs_diff_eq!(flow[m], 0.138 * (a2[m] - a3[m]), epsilon = 1e-12);
        }
    }

    #[test]
    fn measurement_noise_scales_with_channel_rms() {
        let case = grid::two_machine_case();
        let clean = simulate_ambient(&case, &quick_cfg(8), &[]).unwrap();
        let noisy = simulate_ambient(
            &case,
            &AmbientConfig {
                measurement_noise_rel: 0.01,
                ..quick_cfg(8)
            },
            &[],
        )
        .unwrap();
        let c = clean.require("rotor_freq:1").unwrap();
        let x = noisy.require("rotor_freq:1").unwrap();
        let diff_rms = (c
            .samples
            .iter()
            .zip(&x.samples)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / c.samples.len() as f64)
            .sqrt();
        let rel = diff_rms / c.rms();
        assert!((0.005..0.02).contains(&rel), "relative noise {rel}");
    }

    #[test]
    fn zero_depth_modulation_changes_nothing() {
        let case = grid::two_machine_case();
        let plain = simulate_ambient(&case, &quick_cfg(9), &[]).unwrap();
        let modulated = simulate_ambient(
            &case,
            &AmbientConfig {
                modulation: Some(Modulation {
                    period_s: 60.0,
                    depth: 0.0,
                }),
                ..quick_cfg(9)
            },
            &[],
        )
        .unwrap();
        assert_eq!(
            plain.require("rotor_angle:1").unwrap().samples,
            modulated.require("rotor_angle:1").unwrap().samples
        );
    }

    #[test]
    fn degrade_touches_only_frequency_channels() {
        let case = grid::two_machine_case();
        let t = simulate_ambient(&case, &quick_cfg(10), &[OutputSpec::Bus(2)]).unwrap();
        let d = degrade_frequency(&t, 1.5, 2).unwrap();
        assert_eq!(
            d.require("rotor_angle:1").unwrap().samples,
            t.require("rotor_angle:1").unwrap().samples
        );
        assert_ne!(
            d.require("rotor_freq:1").unwrap().samples,
            t.require("rotor_freq:1").unwrap().samples
        );
        assert_ne!(
            d.require("bus_freq:2").unwrap().samples,
            t.require("bus_freq:2").unwrap().samples
        );
        // Smoothing shrinks the high-frequency content, so RMS drops.
        assert!(d.require("rotor_freq:1").unwrap().rms() < t.require("rotor_freq:1").unwrap().rms());
    }

    #[test]
    fn ambient_rejects_unknown_load_machine() {
        let case = grid::two_machine_case();
        let cfg = AmbientConfig {
            input_mode: InputMode::LoadPerturb,
            load_machines: Some(vec![9]),
            ..quick_cfg(0)
        };
        assert!(matches!(
            simulate_ambient(&case, &cfg, &[]),
            Err(Error::UnknownReference(_))
        ));
    }

    #[test]
    fn impulse_rejects_unknown_source() {
        let case = grid::two_machine_case();
        assert!(simulate_impulse(&case, 7, 100.0, 5.0).is_err());
    }
}
