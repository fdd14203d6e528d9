//! Build c0 modulator sequences: dividing an l1 sequence by the modulator
//! keeps its norm within `[eps(1 - delta/2), eps(1 + delta)]` times the
//! original, with certified arithmetic throughout. Also runs the compact
//! variant, one modulator serving a whole family.
//!
//! ```text
//! cargo run --release --example modulators
//! ```

use degenlab::sequences::{modulator, modulator_for_family, SummableSequence};

fn main() {
    let a = SummableSequence::geometric(0.5).unwrap();
    let res = modulator(&a, 0.5, 0.1).unwrap();
    println!("a_j = 2^-j, eps = 0.5, delta = 0.1");
    println!("  ||a||     = {} (± {:.2e})", res.a_norm.value, res.a_norm.error);
    let starts = res.modulator.block_starts();
    println!("  blocks at  {:?}... ({} materialized)", &starts[..8.min(starts.len())], starts.len());
    println!("  max c      = {}", res.modulator.max_c());
    println!(
        "  ||a/c||    = {:.6} (± {:.2e}) within [{:.6}, {:.6}]",
        res.b_norm.value, res.b_norm.error, res.b_norm_bounds.0, res.b_norm_bounds.1
    );

    println!("\n  j :   c_j        block");
    for j in 1..=16u64 {
        println!(
            "  {j:>2} :   {:<10.6} {}",
            res.modulator.c(j).unwrap(),
            res.modulator.block_index(j)
        );
    }

    // one modulator for a compact family: thresholds follow the smallest norm
    let family = vec![
        SummableSequence::geometric(0.5).unwrap(),
        SummableSequence::geometric(1.0 / 3.0).unwrap(),
        SummableSequence::power_decay(2.0).unwrap(),
    ];
    let results = modulator_for_family(&family, 0.5, 0.05).unwrap();
    let shared = results[0].modulator.block_starts();
    println!("\ncompact family (shared blocks {:?}...):", &shared[..6.min(shared.len())]);
    for (i, r) in results.iter().enumerate() {
        let ok = r.b_norm.lo() >= r.b_norm_bounds.0 - 1e-9 && r.b_norm.hi() <= r.b_norm_bounds.1 + 1e-9;
        println!(
            "  member {i}: ||a|| = {:.6}, ||a/c|| = {:.6} in [{:.6}, {:.6}] -> {}",
            r.a_norm.value,
            r.b_norm.value,
            r.b_norm_bounds.0,
            r.b_norm_bounds.1,
            if ok { "ok" } else { "VIOLATED" }
        );
        assert!(ok);
    }
}
