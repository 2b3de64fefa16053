//! Reads oscillation frequency and damping off recovered curves and
//! compares them with the values the model implies.
//!
//! Both sides go through the same peak-timing estimator, so the
//! comparison isolates what the ambient recovery loses, not what the
//! estimator loses.

use gridresp::grid::wscc9_reduced_case;
use gridresp::{
    decompose, log_decrement, recover, simulate_ambient, AmbientConfig, ImpulseResponse,
    RecoveryConfig, ResponseKind,
};

fn main() -> gridresp::Result<()> {
    let case = wscc9_reduced_case();
    let md = decompose(&case)?;

    // Model side: the analytic frequency response over the same ten
    // second lag window the recoveries use, so both sides hand the
    // estimator the same number of peaks.
    let taus: Vec<f64> = (0..1000).map(|m| m as f64 * 0.01).collect();
    let reference = ImpulseResponse::analytic(
        0.01,
        md.impulse_frequency(0, 1, &taus)?,
        "input:2",
        "rotor_freq:1",
        ResponseKind::Frequency,
    );
    let model = log_decrement(&reference)?;
    println!("model:  {:.4} Hz, decrement {:.4} ({} peaks)", model.freq_hz, model.log_decrement, model.peaks);

    // Data side: one recovery per seed, same estimator.
    println!("\n{:>5}  {:>9}  {:>10}  {:>6}", "seed", "freq", "decrement", "peaks");
    for seed in 0..5 {
        let cfg = AmbientConfig {
            measurement_noise_rel: 2e-5,
            seed,
            ..AmbientConfig::default()
        };
        let trace = simulate_ambient(&case, &cfg, &[])?;
        let mut rc = RecoveryConfig::new("rotor_freq:2", "rotor_freq:1");
        rc.passband_hz = Some((0.01, 1.6));
        let est = recover(&trace, &rc)?;
        let m = log_decrement(&est)?;
        let df = m.freq_hz - model.freq_hz;
        println!(
            "{seed:>5}  {:>9.4}  {:>10.4}  {:>6}   (freq off by {df:+.4} Hz)",
            m.freq_hz, m.log_decrement, m.peaks
        );
    }
    Ok(())
}
