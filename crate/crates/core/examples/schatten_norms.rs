use quasinorm::linalg::random_orthogonal;
use quasinorm::schatten::rotation_trace_gap;
use quasinorm::{schatten_norm, thin_svd, DenseMatrix, SchattenExponent};

fn main() -> quasinorm::Result<()> {
    let x = DenseMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
    let svd = thin_svd(&x, None)?;
    println!("singular values: {:?} (rank {})", svd.significant_sigma(), svd.rank());

    for p in [0.2, 1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0, 2.0] {
        let norm = schatten_norm(&x, SchattenExponent::new(p)?)?;
        println!("p = {p:.4}  ||X||_Sp = {norm:.10}");
    }

    // rotating the spectrum never lowers sum_k (A S A^T)_kk^p for p <= 1
    let sigma = [3.0, 1.0, 0.25];
    let p = SchattenExponent::new(0.5)?;
    let worst = (0..200)
        .map(|seed| rotation_trace_gap(&sigma, &random_orthogonal(3, seed).unwrap(), p).unwrap())
        .fold(f64::INFINITY, f64::min);
    println!("smallest rotation trace gap over 200 rotations: {worst:.3e}");
    Ok(())
}
