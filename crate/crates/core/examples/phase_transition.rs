//! Sweep the Curie-Weiss model through its phase transition and print the
//! spontaneous magnetization found by the mean-field fixed point.
//!
//!     cargo run --release -p isingmf --example phase_transition

use isingmf::meanfield::mf_iterate;
use isingmf::model::ProductDistribution;
use isingmf::{generate, Result};

fn main() -> Result<()> {
    let n = 400;
    println!("{:>6} {:>12} {:>8}", "beta", "|m|", "steps");
    let mut beta = 0.2;
    while beta <= 2.01 {
        let model = generate::curie_weiss(n, beta, 0.0)?;
        // A slightly magnetized start breaks the ± symmetry above beta = 1.
        let x0 = ProductDistribution::constant(n, 0.2)?;
        let trace = mf_iterate(&model, &x0, 1e-10, 5000);
        let m = trace.final_iterate().means()[0].abs();
        println!("{beta:>6.2} {m:>12.6} {:>8}", trace.steps);
        beta += 0.2;
    }
    Ok(())
}
