//! Builds a contracting field from a random network and a dense weight, then
//! certifies it by sampling.

use wicnode::densela::{DenseMatrix, PNorm};
use wicnode::lipnet::{ActivationKind, LipschitzNet};
use wicnode::wicfield::{synthesize, SamplingBox};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.25;
    let p = PNorm::Inf;
    let phi = LipschitzNet::init(&[3, 24, 3], ActivationKind::SinSplit, p, 11)?;
    let w = DenseMatrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.0, 1.0, -0.3], vec![0.4, 0.0, 0.7]])?;
    let f = synthesize(phi, eps, p, Some(w))?;
    println!("gamma = {:.4}", f.gamma());
    for radius in [1.0, 10.0, 100.0] {
        let rep = f.certify(SamplingBox::new(radius), 5000, 1)?;
        println!("box {radius:>5}: max mu {:+.5} (bound {:+.2}), contracting: {}", rep.max_mu, -eps, rep.max_mu <= -eps + 1e-9);
    }
    Ok(())
}
