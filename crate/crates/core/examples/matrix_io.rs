use quasinorm::io::{load_matrix, load_matrix_auto, parse_matrix_market, save_matrix, MatrixFormat};
use quasinorm::DenseMatrix;

fn main() -> quasinorm::Result<()> {
    let dir = std::env::temp_dir().join("quasinorm-matrix-io");
    std::fs::create_dir_all(&dir)?;
    let x = DenseMatrix::from_row_slice(2, 3, &[1.0, -2.5e-7, 3.0, 0.1, 0.0, 6.02214076e23]);

    for (name, format) in [("x.mtx", MatrixFormat::MatrixMarket), ("x.csv", MatrixFormat::Csv)] {
        let path = dir.join(name);
        save_matrix(&x, &path, format)?;
        let back = load_matrix(&path, format)?;
        println!("{}:\n{}", path.display(), std::fs::read_to_string(&path)?.trim_end());
        println!("round trip exact: {}\n", back == x);
    }
    println!("auto-detected: {}", load_matrix_auto(dir.join("x.csv"))?);

    // coordinate entries that repeat are summed
    let coo = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n1 1 2.5\n2 2 1\n";
    println!("coordinate file: {}", parse_matrix_market(coo)?);
    Ok(())
}
