//! Compares a measured angle cross-correlation against its stationary
//! closed form.
//!
//! The closed form requires every mode to be restoring, so the coupling
//! matrix is stiffened with a shunt term on the diagonal. Without it
//! the rigid shift random-walks and the angle correlation never
//! converges. Thirty minutes of ambient data gets the sample estimate
//! within a few percent of the analytic curve.

use gridresp::grid::wscc9_reduced_case;
use gridresp::{
    cross_correlate, decompose, normalized_mse, simulate_ambient, AmbientConfig, GridCase,
    ImpulseResponse, ResponseKind,
};

fn shunted_case() -> gridresp::Result<GridCase> {
    let base = wscc9_reduced_case();
    let mut k = base.jacobian().clone();
    for i in 0..base.n() {
        k[(i, i)] += 0.5;
    }
    GridCase::new(
        base.ids().to_vec(),
        base.inertia().iter().copied().collect(),
        base.damping().iter().copied().collect(),
        k,
        None,
        base.lines().to_vec(),
        None,
    )
}

fn main() -> gridresp::Result<()> {
    let case = shunted_case()?;
    let md = decompose(&case)?;
    let alpha = 0.01;

    let cfg = AmbientConfig {
        duration_s: 1800.0,
        alpha,
        seed: 7,
        ..AmbientConfig::default()
    };
    let trace = simulate_ambient(&case, &cfg, &[])?;

    let a2 = &trace.require("rotor_angle:2")?.samples;
    let a1 = &trace.require("rotor_angle:1")?.samples;
    let dt = trace.dt();
    let max_lag = (10.0 / dt) as usize;
    let measured = cross_correlate(a2, a1, max_lag, gridresp::recovery::CorrelationMethod::Fft)?;

    let taus: Vec<f64> = (0..=max_lag).map(|m| m as f64 * dt).collect();
    let analytic = md.analytic_crosscorr_angle(alpha, 1, 0, &taus)?;

    let est = ImpulseResponse {
        start_lag_s: 0.0,
        lag_step_s: dt,
        values: measured,
        source: "rotor_angle:2".into(),
        target: "rotor_angle:1".into(),
        kind: ResponseKind::Angle,
        relation: None,
        scale_applied: 1.0,
    };
    let truth = ImpulseResponse::analytic(dt, analytic, "rotor_angle:2", "rotor_angle:1", ResponseKind::Angle);

    let nmse = normalized_mse(&truth, &est)?;
    println!("record: {} s at {} Hz, seed {}", cfg.duration_s, cfg.rate_hz, cfg.seed);
    println!("normalized mse over lags [0, 10] s: {nmse:.4}");

    println!("\n{:>6}  {:>12}  {:>12}", "lag", "measured", "analytic");
    for m in (0..=max_lag).step_by(max_lag / 10) {
        println!(
            "{:>6.1}  {:>12.6}  {:>12.6}",
            taus[m], est.values[m], truth.values[m]
        );
    }
    Ok(())
}
