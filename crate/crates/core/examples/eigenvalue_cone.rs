//! Classifies 2x2 matrices by their eigenvalues and builds weight witnesses.

use wicnode::conelab::{cone_verdict, wwic_random_search, wwic_witness_2x2, WitnessOutcome};
use wicnode::densela::{DenseMatrix, PNorm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = [
        DenseMatrix::from_rows(&[vec![-2.0, 1.0], vec![-1.0, -2.0]])?,
        DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -1.0]])?,
        DenseMatrix::from_rows(&[vec![-1.0, 3.0], vec![0.5, -4.0]])?,
        DenseMatrix::from_rows(&[vec![0.2, 1.0], vec![-1.0, -0.1]])?,
    ];
    for a in &cases {
        let v = cone_verdict(a)?;
        println!("A = {:?}  tau {:+.3} delta {:+.3}  region {}", a.as_slice(), v.tau, v.delta, v.region);
        match wwic_witness_2x2(a, PNorm::One)? {
            WitnessOutcome::Found(w) => println!("  witness W = {:?}, mu_1(WAW^-1) = {:+.4}", w.w.as_slice(), w.achieved_mu),
            WitnessOutcome::Violation { re, im } => {
                let s = wwic_random_search(a, PNorm::One, 2000, 0)?;
                println!("  eigenvalue {re:+.3}{im:+.3}i is outside the cone; best random weight gives {:+.4}", s.min_mu);
            }
        }
    }
    Ok(())
}
