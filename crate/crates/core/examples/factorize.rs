use num_rational::Ratio;
use quasinorm::factorize::factor_powers;
use quasinorm::harness::gen_lowrank;
use quasinorm::{
    optimal_factors_m, product_objective, schatten_norm, weighted_sum_objective, ExponentSplit,
    SchattenExponent,
};

fn main() -> quasinorm::Result<()> {
    let x = gen_lowrank(8, 6, 3, 11)?;
    let splits = [
        ExponentSplit::from_ratios(Ratio::new(1, 2), &[Ratio::from(1), Ratio::from(1)])?,
        ExponentSplit::from_ratios(Ratio::new(2, 3), &[Ratio::new(4, 3), Ratio::new(4, 3)])?,
        ExponentSplit::from_ratios(Ratio::new(2, 5), &[Ratio::new(1, 2), Ratio::from(2)])?,
        ExponentSplit::from_ratios(Ratio::new(1, 3), &[Ratio::from(1); 3])?,
    ];
    for split in &splits {
        let fs = optimal_factors_m(&x, split, 4)?;
        let norm = schatten_norm(&x, SchattenExponent::new(split.p())?)?;
        let err = (fs.reconstruct() - &x).norm() / x.norm();
        println!("p = {:.4} parts = {:?}", split.p(), split.parts());
        println!("  ||X||_Sp          {norm:.12}");
        println!("  product objective {:.12}", product_objective(&fs, split)?);
        println!("  weighted sum      {:.12}", weighted_sum_objective(&fs, split)?);
        println!("  factor norms^p_i  {:?}", factor_powers(&fs, split)?);
        println!("  reconstruction    {err:.2e}");
    }
    Ok(())
}
