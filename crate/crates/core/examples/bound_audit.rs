use quasinorm::harness::gen_lowrank;
use quasinorm::make_split;
use quasinorm::verify::bound_audit;

fn main() -> quasinorm::Result<()> {
    let x = gen_lowrank(7, 5, 3, 2)?;
    for (p, parts) in [(0.5, vec![1.0, 1.0]), (2.0 / 3.0, vec![1.0, 2.0]), (1.0 / 3.0, vec![1.0; 3])] {
        let split = make_split(p, &parts)?;
        let report = bound_audit(&x, &split, 4, 2000, 42)?;
        println!(
            "p = {p:.4} parts = {parts:?}: target {:.8}, best {:.8}, worst trial excess {:.3e}, \
             worst Young gap {:.3e}, {} trials ({} discarded)",
            report.target_norm,
            report.best_found,
            report.worst_trial_gap.unwrap_or(f64::NAN),
            report.worst_young_gap.unwrap_or(f64::NAN),
            report.trials,
            report.discarded,
        );
    }
    Ok(())
}
