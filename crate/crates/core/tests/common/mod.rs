#![allow(dead_code)]

use rand::Rng;
use wicnode::densela::{invert, DenseMatrix, PNorm};
use wicnode::lipnet::{ActivationKind, LipschitzNet};
use wicnode::seed::stream_rng;
use wicnode::wicfield::{Weighting, WicField};

pub const ACTIVATIONS: [ActivationKind; 3] = [ActivationKind::Abs, ActivationKind::CRelu, ActivationKind::SinSplit];

/// Random residual network with nonzero biases and weights well away from
/// the small default initialization.
pub fn random_net(seed: u64, dims: &[usize], act: ActivationKind, p: PNorm) -> LipschitzNet {
    let net = LipschitzNet::init(dims, act, p, seed).unwrap();
    let mut rng = stream_rng(seed, 99);
    let params: Vec<f64> = net.params().iter().map(|v| 3.0 * v + rng.random_range(-0.3..0.3)).collect();
    net.with_params(&params).unwrap()
}

pub fn random_weighting(seed: u64, n: usize, kind: usize) -> Weighting {
    let mut rng = stream_rng(seed, 98);
    match kind % 3 {
        0 => Weighting::Identity,
        1 => Weighting::DiagPositive { log_diag: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() },
        _ => loop {
            let m = DenseMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let m = m.add(&DenseMatrix::scaled_identity(n, 1.5)).unwrap();
            if let Ok(inv) = invert(&m) {
                if m.norm1() * inv.norm1() < 50.0 {
                    break Weighting::dense(m).unwrap();
                }
            }
        },
    }
}

/// The `index`-th field of a fixed family covering dimensions 2 and 4,
/// margins 0 and 0.5, both norms, every activation and weighting mode.
pub fn family_field(index: u64) -> WicField {
    let n = if index % 2 == 0 { 2 } else { 4 };
    let eps = if (index / 2) % 2 == 0 { 0.0 } else { 0.5 };
    let p = if (index / 4) % 2 == 0 { PNorm::One } else { PNorm::Inf };
    let act = ACTIVATIONS[(index % 3) as usize];
    let dims: Vec<usize> = if index % 5 == 0 { vec![n, 8, 8, n] } else { vec![n, 8, n] };
    let net = random_net(1000 + index, &dims, act, p);
    WicField::new(net, eps, p, random_weighting(2000 + index, n, (index / 8) as usize)).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
