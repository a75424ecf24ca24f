use std::time::Instant;

use quasinorm::harness::{gen_lowrank, gen_mask};
use quasinorm::make_split;
use quasinorm::schatten::schatten_power;
use quasinorm::solve::{factored_complete, CompletionProblem, PenaltySpec};
use quasinorm::SchattenExponent;

fn main() -> quasinorm::Result<()> {
    let seed = 7;
    let truth = gen_lowrank(60, 60, 4, seed)?;
    let mask = gen_mask(60, 60, 0.5, seed)?;
    let observed = mask.iter().filter(|&&b| b).count();
    let lambda = 1e-4 * truth.zip_map(&mask, |v, b| if b { v } else { 0.0 }).norm();
    let prob = CompletionProblem::new(truth.clone(), mask, lambda, PenaltySpec::new(make_split(0.5, &[1.0, 1.0])?, 8)?)?;

    let start = Instant::now();
    let report = factored_complete(&prob)?;
    let x = report.reconstruct();
    println!("60x60 rank 4, {observed} observed entries, lambda {lambda:.4e}");
    println!(
        "{} sweeps in {:.2?}, objective {:.6e} -> {:.6e}",
        report.iterations,
        start.elapsed(),
        report.objective_trace[0],
        report.final_objective
    );
    println!("relative error {:.3e}", (&x - &truth).norm() / truth.norm());
    println!(
        "||X||_S1/2^1/2 of the estimate: {:.6}",
        schatten_power(&x, SchattenExponent::new(0.5)?)?
    );
    Ok(())
}
