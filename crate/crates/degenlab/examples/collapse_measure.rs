//! Collapsing measure of modulus families: the power ladder {t^j} collapses
//! over the whole interval as the member budget grows, finite families never
//! do, and a shored-up family keeps a positive floor along its pin points.
//!
//! ```text
//! cargo run --release --example collapse_measure
//! ```

use degenlab::collapse::{collapsing_measure_estimate, is_shored_up, noncollapse_witness, ModulusFamily};
use degenlab::modulus::Modulus;

fn main() {
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();

    println!("power ladder {{t^j}}, threshold 0.5:");
    for budget in [10, 50, 200, 800] {
        let fam = ModulusFamily::power_ladder(budget).unwrap();
        let r = collapsing_measure_estimate(&fam, &grid, budget, 0.5).unwrap();
        println!("  budget {budget:>4}: mu estimate = {:.4}", r.mu_estimate);
    }

    let pair = ModulusFamily::finite(vec![
        Modulus::power(1.0, 1.0).unwrap(),
        Modulus::power(2.0, 1.0).unwrap(),
    ])
    .unwrap();
    let r = collapsing_measure_estimate(&pair, &grid, 10, 1e-12).unwrap();
    println!("\nfinite pair {{t, t^2}}, threshold 1e-12: mu estimate = {}", r.mu_estimate);

    println!("\nnon-collapse witnesses inf sigma(a) for the ladder:");
    let fam = ModulusFamily::power_ladder(200).unwrap();
    for a in [1.0, 0.9, 0.5] {
        let w = noncollapse_witness(&fam, a, 200).unwrap();
        println!("  a = {a:<4}: {w:.3e}");
    }

    // shoring-up: gamma_n -> 0 with sigma_n(gamma_n) pinned at 1
    let gammas: Vec<f64> = (1..=30).map(|n| 1.0 / n as f64).collect();
    let pins = gammas.clone();
    let report = is_shored_up(|n, t| Ok(t / pins[n - 1]), &gammas, 1.0).unwrap();
    println!(
        "\npinned family sigma_n(t) = t/gamma_n: shored up = {}, min value {} at step {}",
        report.shored_up, report.min_value, report.witness
    );

    // a family that cannot be shored at these points: sqrt law with gamma = 1/n^2
    let gammas: Vec<f64> = (1..=30).map(|n| 1.0 / (n as f64 * n as f64)).collect();
    let sqrt_law = Modulus::power(0.5, 1.0).unwrap();
    let report = is_shored_up(|_, t| Ok(sqrt_law.eval(t)?), &gammas, 0.5).unwrap();
    println!(
        "sqrt law at gamma_n = 1/n^2: shored up = {} (min value {:.3e} -> 0)",
        report.shored_up, report.min_value
    );
}
