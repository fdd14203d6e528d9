//! No single c0 modulator works for every unit-norm l1 sequence: for any
//! given c0 sequence, a monotone opponent with norm one makes the divided
//! sums blow past any target. Each block k of the opponent sits where
//! c < 2^-(2k+3), carries mass 2^-(k+1), and contributes at least 2^(k+2).
//!
//! ```text
//! cargo run --release --example adversarial
//! ```

use degenlab::sequences::{adversarial_for, VanishingSequence};

fn main() {
    let cases = vec![
        ("c_j = 1/j", VanishingSequence::reciprocal()),
        ("c_j = 2^-j", VanishingSequence::geometric(0.5)),
        ("c_j = 1/ln(j+1)", VanishingSequence::reciprocal_log()),
    ];
    for (name, c) in cases {
        let res = adversarial_for(&c, 1000.0).unwrap();
        let norm = res.sequence.l1_norm_best_effort().unwrap();
        println!("{name}:");
        println!("  ||a|| = {} (± {:.1e})", norm.value, norm.error);
        println!(
            "  certified partial sum of a/c: {} > 1000 by ln-index {:.4e}{}",
            res.certified_partial_sum,
            res.divergence_index_ln,
            res.divergence_index
                .map(|i| format!(" (index {i})"))
                .unwrap_or_else(|| " (index beyond u64)".into())
        );
        println!("  first blocks (k, ln n_k, ln n_k+1, mass, certified contribution):");
        for b in res.blocks.iter().take(6) {
            println!(
                "    {:>2}  {:>12.4}  {:>12.4}  {:>10.3e}  {:>8}",
                b.k, b.ln_start, b.ln_end, b.mass, b.divergence_contribution
            );
        }
        // direct verification where the indices are small enough to sum
        if let Some(idx) = res.divergence_index {
            let mut s = 0.0;
            for j in 1..=idx {
                s += res.sequence.term(j).unwrap() / c.value(j as f64);
            }
            println!("  direct partial sum at {idx}: {s:.1}");
        }
        println!();
    }
}
