//! The shoring-up renormalization for the identity law sigma(t) = t:
//! initial scale r = 1/256, mu_1 = 1/16, then the per-step selection that
//! keeps every renormalized law pinned at sigma_k(c_k) >= 1 while the
//! products tau_k stay summable. The summed products assemble the C^1
//! modulus gamma(t).
//!
//! ```text
//! cargo run --release --example renormalization
//! ```

use degenlab::modulus::{DegeneracyLaw, Modulus};
use degenlab::renorm::{run_shoring_algorithm, Branch, RenormParams};

fn main() {
    let sigma = DegeneracyLaw::normalized(Modulus::power(1.0, f64::INFINITY).unwrap()).unwrap();
    let params = RenormParams::new(sigma, 2.0, 0.75, 0.375, 1.0 / 20.0, 40).unwrap();
    let trace = run_shoring_algorithm(&params).unwrap();

    println!(
        "case {:?}: r = {:.8}, mu_1 = {:.8}, theta = {:.8}, sigma_1(1) = {:.12}",
        trace.scale.case_tag, trace.scale.r, trace.scale.mu1, trace.scale.theta, trace.scale.sigma1_at_one
    );
    println!("clamped steps: {}\n", trace.clamp_count);

    println!("{:>3} {:>12} {:>14} {:>12} {:>14} {:>8}", "k", "mu_k", "tau_k", "c_k", "sigma_k(c_k)", "branch");
    for s in trace.steps.iter().take(14) {
        let branch = match s.branch {
            Branch::Initial => "initial",
            Branch::Kept => "kept",
            Branch::Raised => "raised",
            Branch::Clamped => "clamped",
        };
        println!(
            "{:>3} {:>12.6} {:>14.6e} {:>12.6} {:>14.9} {:>8}",
            s.k, s.mu, s.tau, s.c, s.sigma_at_c, branch
        );
    }
    let raised = trace.steps.iter().filter(|s| s.branch == Branch::Raised).count();
    let kept = trace.steps.iter().filter(|s| s.branch == Branch::Kept).count();
    println!("... ({} steps total: {raised} raised, {kept} kept)\n", trace.steps.len());

    println!(
        "sum of tau over the trace plus certified continuation: {:.8}",
        trace.tau_l1_bound.unwrap()
    );
    println!("certified tail beyond depth: {:.3e}\n", trace.tail_bound.unwrap());

    println!("C^1 modulus gamma(t) = sum of tau_i from i = floor(ln 1/t):");
    for m in [0usize, 2, 5, 10, 20, 35] {
        let t = (-(m as f64)).exp() * 0.99;
        let g = trace.c1_modulus(1.0, t).unwrap();
        println!("  t = {t:<12.4e} gamma = {g:.6e}");
    }
}
