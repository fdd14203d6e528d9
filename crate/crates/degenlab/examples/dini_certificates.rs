//! Certify the Dini condition for the builtin modulus families and compare
//! the certified brackets against closed-form integrals.
//!
//! ```text
//! cargo run --release --example dini_certificates
//! ```

use degenlab::modulus::Modulus;

fn main() {
    let cases: Vec<(String, Modulus, Option<f64>)> = vec![
        (
            "t^0.5".into(),
            Modulus::power(0.5, 1.0).unwrap(),
            Some(2.0), // integral of t^alpha/t over (0,1] is 1/alpha
        ),
        ("t^2".into(), Modulus::power(2.0, 1.0).unwrap(), Some(0.5)),
        (
            "(1-ln t)^-2".into(),
            Modulus::log_power(2.0, 1.0).unwrap(),
            Some(1.0), // substitution u = 1 - ln t
        ),
        ("(1-ln t)^-1".into(), Modulus::log_power(1.0, 1.0).unwrap(), None),
        (
            "sum 2^-j t^(1/j), 40 terms".into(),
            Modulus::root_series(40).unwrap(),
            Some(2.0 - 42.0 * 0.5f64.powi(40)), // sum j 2^-j truncated
        ),
        (
            "tilde-phi, 20 terms".into(),
            Modulus::tilde_phi(20).unwrap(),
            Some(1.0 - 0.5f64.powi(20)), // coefficients built to integrate to 1
        ),
    ];

    println!(
        "{:<28} {:>12} {:>14} {:>14} {:>14} {:>10}",
        "modulus", "verdict", "lower", "upper", "exact", "terms"
    );
    for (name, modulus, exact) in &cases {
        // tilde-phi's slowest term needs a coarse tail tolerance
        let tol = if name.starts_with("tilde") { 2e-2 } else { 1e-6 };
        let cert = modulus.dini_integral(1.0, 0.5, 1e6, tol).unwrap();
        println!(
            "{:<28} {:>12} {:>14.6e} {:>14.6e} {:>14} {:>10}",
            name,
            format!("{:?}", cert.verdict),
            cert.lower_bound,
            cert.upper_bound,
            exact.map(|e| format!("{e:.6e}")).unwrap_or_else(|| "divergent".into()),
            cert.terms_used
        );
        if let Some(e) = exact {
            assert!(cert.lower_bound <= *e && *e <= cert.upper_bound, "bracket misses the oracle");
        }
    }

    // the bracket holds for every geometric ratio
    println!("\nbracketing of the identity law across ratios:");
    let m = Modulus::power(1.0, 1.0).unwrap();
    for theta in [0.1, 0.25, 0.5, 0.9] {
        let cert = m.dini_integral(1.0, theta, 1e6, 1e-9).unwrap();
        println!(
            "  theta = {theta:<5} [{:.6}, {:.6}] contains 1",
            cert.lower_bound, cert.upper_bound
        );
    }
}
