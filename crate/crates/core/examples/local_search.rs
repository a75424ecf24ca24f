use quasinorm::harness::gen_lowrank;
use quasinorm::verify::{local_min_search, local_min_search_from, DEFAULT_MAX_ITERS};
use quasinorm::{make_split, optimal_factors_m};

fn main() -> quasinorm::Result<()> {
    let x = gen_lowrank(8, 6, 3, 5)?;
    for (p, parts) in [(2.0 / 3.0, vec![4.0 / 3.0; 2]), (0.5, vec![1.5; 3]), (1.0, vec![2.0, 2.0])] {
        let split = make_split(p, &parts)?;
        let cold = local_min_search(&x, &split, 6, 20, DEFAULT_MAX_ITERS, 1)?;
        let warm = local_min_search_from(&x, &split, &optimal_factors_m(&x, &split, 6)?, DEFAULT_MAX_ITERS)?;
        println!(
            "p = {p:.4} parts = {parts:?}: target {:.10}, random starts {:.10} (gap {:.2e}, {} iterations), \
             warm start {} iterations",
            cold.target_norm, cold.best_found, cold.gap, cold.outer_iterations, warm.outer_iterations
        );
    }

    // quasi-norm factor exponents are left to the audit
    let bi_nuclear = make_split(0.5, &[1.0, 1.0])?;
    if let Err(e) = local_min_search(&x, &bi_nuclear, 6, 1, 10, 0) {
        println!("p = 0.5 parts = [1, 1]: {e}");
    }
    Ok(())
}
