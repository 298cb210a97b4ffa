//! Recovers the linear-plus-Lipschitz split of an opinion network.

use wicnode::densela::PNorm;
use wicnode::expkit::gen_opinion_system;
use wicnode::wicfield::{decompose, SamplingBox};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = gen_opinion_system(0);
    let d = decompose(&sys, PNorm::Inf, SamplingBox::new(10.0), 10_000, 0)?;
    let max_degree = sys.out_degrees().iter().copied().fold(0.0, f64::max);
    println!("gamma_hat {:.6}, largest out-degree {max_degree:.6}", d.gamma);
    println!("max |D phi_hat|_inf over samples {:.6}", d.max_residual_norm);
    let x = [1.0, -0.5, 0.25, 2.0];
    println!("phi_hat({x:?}) = {:?}", d.residual(&x));
    Ok(())
}
