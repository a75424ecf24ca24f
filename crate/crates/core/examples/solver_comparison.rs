use std::time::Instant;

use quasinorm::harness::{gen_lowrank, gen_mask};
use quasinorm::make_split;
use quasinorm::solve::{factored_complete, irls_baseline, CompletionProblem, PenaltySpec, SolveReport};

fn main() -> quasinorm::Result<()> {
    let truth = gen_lowrank(60, 60, 4, 3)?;
    let mask = gen_mask(60, 60, 0.5, 3)?;
    let lambda = 1e-4 * truth.zip_map(&mask, |v, b| if b { v } else { 0.0 }).norm();
    let prob = CompletionProblem::new(truth.clone(), mask, lambda, PenaltySpec::new(make_split(0.5, &[1.0, 1.0])?, 8)?)?;

    let show = |name: &str, report: &SolveReport, secs: f64| {
        let err = (report.reconstruct() - &truth).norm() / truth.norm();
        println!(
            "{name:>8}: relative error {err:.3e}, {} iterations, converged {}, {secs:.2}s",
            report.iterations, report.converged
        );
        err
    };
    let t = Instant::now();
    let factored = factored_complete(&prob)?;
    let e_factored = show("factored", &factored, t.elapsed().as_secs_f64());
    let t = Instant::now();
    let irls = irls_baseline(&prob, 0.5, 1.0)?;
    let e_irls = show("irls", &irls, t.elapsed().as_secs_f64());
    println!("error ratio irls / factored: {:.2}", e_irls / e_factored);
    Ok(())
}
