use quasinorm::solve::{lp_prox_scalar, schatten_prox};
use quasinorm::{thin_svd, DenseMatrix};

fn main() -> quasinorm::Result<()> {
    let tau = 0.5;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "y", "p=1/2", "p=2/3", "p=1", "p=4/3", "p=2");
    for k in 0..=12 {
        let y = -1.5 + 0.25 * k as f64;
        let row: Vec<String> = [0.5, 2.0 / 3.0, 1.0, 4.0 / 3.0, 2.0]
            .iter()
            .map(|&p| format!("{:>10.5}", lp_prox_scalar(y, tau, p).unwrap()))
            .collect();
        println!("{y:>6.2} {}", row.join(" "));
    }

    let y = DenseMatrix::from_row_slice(3, 3, &[3.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.4]);
    for p in [0.5, 1.0] {
        let x = schatten_prox(&y, tau, p)?;
        println!("p = {p}: singular values {:?} -> {:?}", thin_svd(&y, None)?.sigma, thin_svd(&x, None)?.sigma);
    }
    Ok(())
}
