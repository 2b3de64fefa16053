//! Checks the matrix-exponential time stepper against the closed-form
//! impulse responses on a three-machine case.
//!
//! The simulator injects a unit-area pulse held over one step and
//! samples at step midpoints, where that pulse approximates an ideal
//! impulse to second order. Errors here should track dt^2.

use gridresp::grid::wscc9_reduced_case;
use gridresp::{decompose, simulate_impulse};

fn main() -> gridresp::Result<()> {
    let case = wscc9_reduced_case();
    let md = decompose(&case)?;
    let source = 2u32;
    let horizon = 20.0;

    println!(
        "{:>8}  {:>12}  {:>12}  {:>10}",
        "dt", "freq err", "angle err", "err ratio"
    );
    let mut prev: Option<f64> = None;
    for &dt in &[8e-3, 4e-3, 2e-3, 1e-3] {
        let trace = simulate_impulse(&case, source, 1.0 / dt, horizon)?;
        let taus: Vec<f64> = (0..trace.len()).map(|m| trace.time(m)).collect();

        let mut freq_err = 0.0f64;
        let mut angle_err = 0.0f64;
        for (i, &id) in case.ids().iter().enumerate() {
            let l = case.index_of(source).unwrap();
            let f_ref = md.impulse_frequency(i, l, &taus)?;
            let a_ref = md.impulse_angle(i, l, &taus)?;
            let f_sim = &trace.require(&format!("rotor_freq:{id}"))?.samples;
            let a_sim = &trace.require(&format!("rotor_angle:{id}"))?.samples;
            for m in 0..taus.len() {
                freq_err = freq_err.max((f_sim[m] - f_ref[m]).abs());
                angle_err = angle_err.max((a_sim[m] - a_ref[m]).abs());
            }
        }

        let worst = freq_err.max(angle_err);
        let ratio = prev.map(|p| p / worst).unwrap_or(f64::NAN);
        println!("{dt:>8.0e}  {freq_err:>12.3e}  {angle_err:>12.3e}  {ratio:>10.2}");
        prev = Some(worst);
    }
    println!("\nhalving dt should divide the error by about four");
    Ok(())
}
