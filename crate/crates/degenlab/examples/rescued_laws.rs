//! Working with laws that are not honest moduli of continuity: an
//! oscillating degeneracy sandwiched between C^-1 rho and C rho adopts the
//! monotone rho as its working law, and problem normalization rescales any
//! setup into the unit regime with the inverse law transforming by r/K.
//!
//! ```text
//! cargo run --release --example rescued_laws
//! ```

use degenlab::modulus::{equivalent_law_rescue, Modulus};
use degenlab::pde::{normalize_problem, ProblemSpec};

fn main() {
    // sigma_raw(t) = t (2 + sin(1/t)) oscillates but sits inside [rho, 3 rho]
    let rho = Modulus::power(1.0, 1.0).unwrap();
    let grid: Vec<f64> = (1..=2000).map(|i| i as f64 / 2000.0).collect();
    let raw = |t: f64| t * (2.0 + (1.0 / t).sin());
    match equivalent_law_rescue(raw, &rho, 3.0, &grid) {
        Ok(rescued) => println!(
            "oscillating law accepted with sandwich constant {} around rho(t) = t",
            rescued.sandwich_constant
        ),
        Err(e) => println!("rejected: {e}"),
    }

    // a genuinely incompatible pair is rejected with the witness point
    match equivalent_law_rescue(|t| t * t, &rho, 2.0, &[0.5, 0.1]) {
        Ok(_) => println!("unexpected acceptance"),
        Err(e) => println!("quadratic against linear rho: {e}"),
    }

    // normalization: K = 1/(sup|u| + sup|f|), r = eps, law argument scaled by K/r
    let law = degenlab::experiment::identity_law();
    let p = ProblemSpec::one_d(law, |_| 1.0, 0.0, 0.0, 0.0, 0.01).unwrap();
    let scaled = normalize_problem(&p, 0.1, Some(3.0)).unwrap();
    println!(
        "\nnormalized problem: r = {}, K = {}, rescaled source bound = {}",
        scaled.r, scaled.k, scaled.source_bar_bound
    );
    let sigma = p.sigma.sigma();
    let ratio = scaled.r / scaled.k;
    for y in [0.1, 0.5, 0.9] {
        let direct = scaled.sigma_bar.sigma().inverse_evaluate(y, 1e-13).unwrap();
        let scaled_inv = ratio * sigma.inverse_evaluate(y, 1e-13).unwrap();
        println!("  inverse check at {y}: {direct:.6e} vs (r/K) sigma^-1 = {scaled_inv:.6e}");
    }
}
