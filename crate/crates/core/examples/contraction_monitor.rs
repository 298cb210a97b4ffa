//! Distance between two trajectories of a contracting field, against the
//! exponential envelope.

use wicnode::densela::PNorm;
use wicnode::lipnet::{ActivationKind, LipschitzNet};
use wicnode::odeint::contraction_monitor;
use wicnode::wicfield::{WicField, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 0.5;
    let p = PNorm::One;
    let phi = LipschitzNet::init(&[2, 16, 2], ActivationKind::CRelu, p, 4)?;
    let f = WicField::new(phi, eps, p, Weighting::DiagPositive { log_diag: vec![0.5, -0.5] })?;
    let w = f.weight_matrix();
    let (t, n) = (4.0, 200);
    let d = contraction_monitor(&f, &[3.0, -1.0], &[-2.0, 2.5], p, Some(&w), t, n)?;
    for k in (0..=n).step_by(25) {
        let time = t * k as f64 / n as f64;
        println!("t {time:.2}: distance {:.6e}, envelope {:.6e}", d[k], d[0] * (-eps * time).exp());
    }
    Ok(())
}
