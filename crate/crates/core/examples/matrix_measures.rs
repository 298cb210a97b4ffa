//! Matrix measures vs induced norms vs spectral abscissa for a few matrices.

use wicnode::densela::{eig2x2, induced_norm, matrix_measure, DenseMatrix, PNorm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        ("diagonal", DenseMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -3.0]])?),
        ("spiral", DenseMatrix::from_rows(&[vec![-1.0, 0.8], vec![-0.8, -1.0]])?),
        ("shear", DenseMatrix::from_rows(&[vec![-1.0, 4.0], vec![0.0, -1.0]])?),
        ("saddle", DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]])?),
    ];
    println!("{:<10} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}", "matrix", "alpha", "mu_1", "mu_2", "mu_inf", "|A|_1", "|A|_inf");
    for (name, a) in &cases {
        let alpha = eig2x2(a)?.max_real_part();
        println!(
            "{name:<10} {alpha:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            matrix_measure(a, PNorm::One)?,
            matrix_measure(a, PNorm::Two)?,
            matrix_measure(a, PNorm::Inf)?,
            induced_norm(a, PNorm::One)?,
            induced_norm(a, PNorm::Inf)?,
        );
    }
    Ok(())
}
