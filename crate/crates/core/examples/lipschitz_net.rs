//! Layer-product Lipschitz bound of a random network vs sampled Jacobian norms.

use wicnode::densela::PNorm;
use wicnode::lipnet::{ActivationKind, LipschitzNet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    for act in [ActivationKind::Abs, ActivationKind::CRelu, ActivationKind::SinSplit] {
        for p in [PNorm::One, PNorm::Inf] {
            let net = LipschitzNet::init(&[4, 32, 32, 4], act, p, seed)?;
            let bound = net.lipschitz_bound(p)?;
            let seen = net.empirical_lipschitz(p, 2000, 5.0, seed)?;
            println!("{act:?} p={p}: bound {bound:.4}, sampled max {seen:.4} ({:.0}% of bound)", 100.0 * seen / bound);
        }
    }
    Ok(())
}
