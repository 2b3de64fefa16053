//! Scoring recovered curves and extracting engineering quantities.

use crate::error::{Error, Result};
use crate::response::ImpulseResponse;

/// Shape distance between two curves on the truth's lag grid.
///
/// Each curve is first divided by its own peak magnitude, so the score
/// compares shapes, not units: identical shapes give 0, a flat estimate
/// gives 1, a sign-flipped copy gives 2. The estimate is linearly
/// interpolated onto the truth's lags; only lags inside both supports
/// count.
pub fn normalized_mse(truth: &ImpulseResponse, est: &ImpulseResponse) -> Result<f64> {
    let t_peak = truth.max_abs();
    if t_peak == 0.0 {
        return Err(Error::Degenerate("truth curve is identically zero".into()));
    }
    let e_peak = est.max_abs();
    let e_scale = if e_peak > 0.0 { e_peak } else { 1.0 };

    let mut num = 0.0;
    let mut den = 0.0;
    let mut points = 0usize;
    for (i, lag) in truth.lags().enumerate() {
        if let Some(e) = est.value_at(lag) {
            let t = truth.values[i] / t_peak;
            let c = e / e_scale;
            num += (t - c) * (t - c);
            den += t * t;
            points += 1;
        }
    }
    if points < 2 {
        return Err(Error::Degenerate(
            "curves share fewer than 2 lag points".into(),
        ));
    }
    if den == 0.0 {
        return Err(Error::Degenerate(
            "truth curve is zero on the shared lags".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Lowest point of a response after lag zero.
#[derive(Debug, Clone, Copy)]
pub struct Nadir {
    pub time_s: f64,
    pub value: f64,
    /// False when the minimum sits on the end of the searched range,
    /// where it cannot be refined and may be an artifact.
    pub interior: bool,
}

/// Global minimum over strictly positive lags, refined by a parabola
/// through the three surrounding samples when it lies in the interior.
/// Ties resolve to the earliest lag.
pub fn nadir(resp: &ImpulseResponse) -> Result<Nadir> {
    let first = resp
        .lags()
        .position(|l| l > 0.0)
        .ok_or(Error::CurveTooShort {
            len: 0,
            need: 3,
        })?;
    let n = resp.len();
    if n - first < 3 {
        return Err(Error::CurveTooShort {
            len: n - first,
            need: 3,
        });
    }

    let mut imin = first;
    for i in first + 1..n {
        if resp.values[i] < resp.values[imin] {
            imin = i;
        }
    }

    if imin == first || imin == n - 1 {
        return Ok(Nadir {
            time_s: resp.lag(imin),
            value: resp.values[imin],
            interior: false,
        });
    }

    let (fm, f0, fp) = (
        resp.values[imin - 1],
        resp.values[imin],
        resp.values[imin + 1],
    );
    let denom = fm - 2.0 * f0 + fp;
    let mut offset = 0.0;
    if denom.abs() > 1e-300 {
        offset = (0.5 * (fm - fp) / denom).clamp(-0.5, 0.5);
    }
    Ok(Nadir {
        time_s: resp.lag(imin) + offset * resp.lag_step_s,
        value: f0 - 0.25 * (fm - fp) * offset,
        interior: true,
    })
}

/// Straight-line speed from paired distances and arrival lags, the
/// least-squares slope (with intercept) of distance against lag.
pub fn propagation_speed(distances_mi: &[f64], lags_s: &[f64]) -> Result<f64> {
    if distances_mi.len() != lags_s.len() {
        return Err(Error::Dimension(format!(
            "{} distances vs {} lags",
            distances_mi.len(),
            lags_s.len()
        )));
    }
    let n = distances_mi.len();
    if n < 2 {
        return Err(Error::CurveTooShort { len: n, need: 2 });
    }
    let nf = n as f64;
    let lbar = lags_s.iter().sum::<f64>() / nf;
    let dbar = distances_mi.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var = 0.0;
    for i in 0..n {
        cov += (lags_s[i] - lbar) * (distances_mi[i] - dbar);
        var += (lags_s[i] - lbar) * (lags_s[i] - lbar);
    }
    if var == 0.0 {
        return Err(Error::Degenerate("all arrival lags are equal".into()));
    }
    Ok(cov / var)
}

/// Oscillation frequency and per-cycle log ratio read off a curve.
#[derive(Debug, Clone, Copy)]
pub struct ModeEstimate {
    pub freq_hz: f64,
    /// Mean `ln(A_j / A_{j+1})` over consecutive peaks; positive for a
    /// decaying oscillation.
    pub log_decrement: f64,
    pub peaks: usize,
}

/// Reads the dominant oscillation off a response by peak timing.
///
/// The curve is median-detrended (the median of a decaying oscillation
/// sits at its DC level, where the mean is biased toward the early
/// large-amplitude cycles); strict local maxima taller than 1% of the
/// detrended peak magnitude count as oscillation peaks, each refined by
/// a three-point parabola. Needs at least two peaks.
pub fn log_decrement(resp: &ImpulseResponse) -> Result<ModeEstimate> {
    let n = resp.len();
    if n < 3 {
        return Err(Error::CurveTooShort { len: n, need: 3 });
    }
    let mut sorted = resp.values.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let x: Vec<f64> = resp.values.iter().map(|v| v - median).collect();
    let max_amp = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if max_amp == 0.0 {
        return Err(Error::Degenerate("curve is constant".into()));
    }

    let mut times = Vec::new();
    let mut amps = Vec::new();
    for i in 1..n - 1 {
        if x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] > 0.01 * max_amp {
            let denom = x[i - 1] - 2.0 * x[i] + x[i + 1];
            let mut offset = 0.0;
            if denom.abs() > 1e-300 {
                offset = (0.5 * (x[i - 1] - x[i + 1]) / denom).clamp(-0.5, 0.5);
            }
            times.push(resp.lag(i) + offset * resp.lag_step_s);
            amps.push(x[i] - 0.25 * (x[i - 1] - x[i + 1]) * offset);
        }
    }
    if times.len() < 2 {
        return Err(Error::Degenerate(format!(
            "found {} oscillation peaks, need at least 2",
            times.len()
        )));
    }

    let cycles = (times.len() - 1) as f64;
    let freq_hz = cycles / (times[times.len() - 1] - times[0]);
    let log_decrement = amps
        .windows(2)
        .map(|w| (w[0] / w[1]).ln())
        .sum::<f64>()
        / cycles;
    Ok(ModeEstimate {
        freq_hz,
        log_decrement,
        peaks: times.len(),
    })
}

/// Everything the evaluation layer can say about one recovered curve.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub source: String,
    pub target: String,
    pub relation: String,
    pub normalized_mse: Option<f64>,
    pub nadir: Option<Nadir>,
    pub mode: Option<ModeEstimate>,
}

impl RecoveryReport {
    /// Scores an estimate, against a truth curve when one is supplied.
    /// Metrics that do not apply to the curve (no clear nadir, fewer
    /// than two peaks) are left empty rather than failing.
    pub fn from_curves(est: &ImpulseResponse, truth: Option<&ImpulseResponse>) -> Self {
        RecoveryReport {
            source: est.source.clone(),
            target: est.target.clone(),
            relation: est.relation.clone().unwrap_or_default(),
            normalized_mse: truth.and_then(|t| normalized_mse(t, est).ok()),
            nadir: nadir(est).ok(),
            mode: log_decrement(est).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::ResponseKind;
    use approx::assert_abs_diff_eq;

    fn curve(step: f64, values: Vec<f64>) -> ImpulseResponse {
        ImpulseResponse::analytic(step, values, "input:1", "rotor_freq:1", ResponseKind::Frequency)
    }

    #[test]
    fn identical_curves_score_zero() {
        let t = curve(0.1, (0..50).map(|i| (i as f64 * 0.3).sin()).collect());
        assert_abs_diff_eq!(normalized_mse(&t, &t).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scaled_copy_scores_zero() {
        let t = curve(0.1, (0..50).map(|i| (i as f64 * 0.3).sin()).collect());
        let mut e = t.clone();
        for v in &mut e.values {
            *v *= 37.0;
        }
        assert_abs_diff_eq!(normalized_mse(&t, &e).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_estimate_scores_one_and_negation_two() {
        let t = curve(0.1, (0..50).map(|i| (i as f64 * 0.3).sin()).collect());
        let flat = curve(0.1, vec![0.0; 50]);
        assert_abs_diff_eq!(normalized_mse(&t, &flat).unwrap(), 1.0, epsilon = 1e-12);
        let mut neg = t.clone();
        for v in &mut neg.values {
            *v = -*v;
        }
        assert_abs_diff_eq!(normalized_mse(&t, &neg).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_truth_is_degenerate() {
        let t = curve(0.1, vec![0.0; 50]);
        let e = curve(0.1, vec![1.0; 50]);
        assert!(matches!(normalized_mse(&t, &e), Err(Error::Degenerate(_))));
    }

    #[test]
    fn estimate_on_finer_grid_is_resampled() {
        // Peak at tau = 0 sits on both grids, so the per-curve max-abs
        // scaling agrees and only interpolation error remains.
        let f = |tau: f64| (tau * 2.0).cos() * (-tau).exp();
        let t = curve(0.2, (0..20).map(|i| f(i as f64 * 0.2)).collect());
        let e = curve(0.05, (0..80).map(|i| f(i as f64 * 0.05)).collect());
        assert!(normalized_mse(&t, &e).unwrap() < 1e-9);
    }

    #[test]
    fn nadir_refines_to_off_grid_minimum() {
        // Quadratic with its exact minimum at 1.43, between grid points.
        let t = curve(
            0.02,
            (0..150)
                .map(|i| {
                    let tau = i as f64 * 0.02;
                    (tau - 1.43) * (tau - 1.43) - 1.0
                })
                .collect(),
        );
        let n = nadir(&t).unwrap();
        assert!(n.interior);
        assert_abs_diff_eq!(n.time_s, 1.43, epsilon = 1e-9);
        assert_abs_diff_eq!(n.value, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn nadir_tie_resolves_earliest() {
        let t = curve(1.0, vec![0.0, -1.0, 0.0, -1.0, 0.0]);
        let n = nadir(&t).unwrap();
        assert_abs_diff_eq!(n.time_s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nadir_at_range_end_is_not_interior() {
        let t = curve(0.5, vec![3.0, 2.0, 1.0, 0.5, 0.25]);
        let n = nadir(&t).unwrap();
        assert!(!n.interior);
        assert_abs_diff_eq!(n.time_s, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn nadir_ignores_lag_zero() {
        // Deep value at lag 0 must not win.
        let t = curve(0.5, vec![-9.0, 1.0, -1.0, 1.0, 2.0]);
        let n = nadir(&t).unwrap();
        assert_abs_diff_eq!(n.time_s, 1.0, epsilon = 0.26);
        assert!(n.value >= -1.01);
    }

    #[test]
    fn speed_matches_hand_computed_slope() {
        let d = [0.0, 370.0, 535.0, 670.0];
        let l = [0.0, 0.24, 0.44, 0.50];
        let v = propagation_speed(&d, &l).unwrap();
        assert_abs_diff_eq!(v, 1270.9, epsilon = 0.05);
    }

    #[test]
    fn speed_rejects_equal_lags() {
        assert!(matches!(
            propagation_speed(&[0.0, 100.0], &[0.3, 0.3]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn speed_is_exact_on_a_perfect_line() {
        let l = [0.1, 0.2, 0.3, 0.4];
        let d: Vec<f64> = l.iter().map(|x| 50.0 + 800.0 * x).collect();
        assert_abs_diff_eq!(propagation_speed(&d, &l).unwrap(), 800.0, epsilon = 1e-9);
    }

    #[test]
    fn log_decrement_reads_a_damped_sine() {
        // exp(-0.3 t) sin(2 pi 0.64 t): period 1.5625 s, so the peak
        // ratio ln equals 0.3 * 1.5625 = 0.46875.
        let rate = 100.0;
        let t = curve(
            1.0 / rate,
            (0..800)
                .map(|i| {
                    let tau = i as f64 / rate;
                    (-0.3 * tau).exp() * (2.0 * std::f64::consts::PI * 0.64 * tau).sin()
                })
                .collect(),
        );
        let m = log_decrement(&t).unwrap();
        assert!(m.peaks >= 4, "peaks {}", m.peaks);
        assert!((m.freq_hz - 0.64).abs() < 0.02 * 0.64, "freq {}", m.freq_hz);
        assert!(
            (m.log_decrement - 0.46875).abs() < 0.05 * 0.46875,
            "decrement {}",
            m.log_decrement
        );
    }

    #[test]
    fn log_decrement_needs_two_peaks() {
        let t = curve(0.1, (0..30).map(|i| -(i as f64)).collect());
        assert!(log_decrement(&t).is_err());
    }

    #[test]
    fn report_collects_available_metrics() {
        let t = curve(
            0.01,
            (0..800)
                .map(|i| {
                    let tau = i as f64 * 0.01;
                    (-0.3 * tau).exp() * (2.0 * std::f64::consts::PI * 0.64 * tau).sin()
                })
                .collect(),
        );
        let r = RecoveryReport::from_curves(&t, Some(&t));
        assert_abs_diff_eq!(r.normalized_mse.unwrap(), 0.0, epsilon = 1e-12);
        assert!(r.nadir.is_some());
        assert!(r.mode.is_some());
    }
}
