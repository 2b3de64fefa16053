//! Builds a random synthetic network, prints its structure, and round-trips
//! it through the plain-text case format.
//!
//! Run with `cargo run --example synthetic_case`.

use gridresp::{make_synthetic_case, mass_stiffness_eigs, parse_case, Topology};

fn main() -> gridresp::Result<()> {
    let case = make_synthetic_case(6, Topology::Ring, 42)?;

    println!("machines: {}", case.n());
    println!("{:>4}  {:>9}  {:>9}  {:>7}", "id", "inertia", "damping", "d/m");
    for (i, &id) in case.ids().iter().enumerate() {
        let m = case.inertia()[i];
        let d = case.damping()[i];
        println!("{id:>4}  {m:>9.4}  {d:>9.4}  {:>7.3}", d / m);
    }

    let check = case.jacobian_check();
    println!(
        "\ncoupling matrix: symmetric={} psd={} max asymmetry {:.2e}",
        check.symmetric, check.positive_semidefinite, check.max_asymmetry
    );
    println!("lines:");
    for line in case.lines() {
        println!("  {} susceptance {:.4}", line.label(), line.susceptance);
    }

    // Row sums vanish for a pure coupling matrix: each machine feels
    // only angle differences, so a uniform shift is force-free.
    let k = case.jacobian();
    let worst_row_sum = (0..case.n())
        .map(|i| k.row(i).sum().abs())
        .fold(0.0, f64::max);
    println!("largest coupling row sum: {worst_row_sum:.2e}");

    // Damping ratios vary machine to machine here, which the response
    // machinery rejects, but the inertia-stiffness eigenproblem does
    // not involve damping at all.
    let (shapes, lambdas) = mass_stiffness_eigs(&case)?;
    println!("\nmode frequencies (Hz), 0 = the rigid shift:");
    for (i, lam) in lambdas.iter().enumerate() {
        println!("  mode {i}: {:.4}", lam.sqrt() / std::f64::consts::TAU);
    }

    let m = nalgebra::DMatrix::from_diagonal(case.inertia());
    let ortho = (shapes.transpose() * m * &shapes
        - nalgebra::DMatrix::identity(case.n(), case.n()))
    .abs()
    .max();
    println!("inertia orthonormality residual: {ortho:.2e}");

    let text = case.to_case_string();
    let back = parse_case(&text)?;
    let delta = (case.jacobian() - back.jacobian()).abs().max();
    println!("\nround-trip through case text: jacobian delta {delta:.2e}");
    print!("\n--- case file ---\n{text}");
    Ok(())
}
