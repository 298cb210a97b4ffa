//! Reverse-mode gradients for the training pipeline.
//!
//! Kinks follow `sign(0) = 0` and `step(0) = 0`; norm subgradients break
//! ties toward the lowest index.

use crate::densela::{DenseMatrix, DenseVector, PNorm};
use crate::lipnet::{LipschitzNet, NetError};

/// Gradients of a scalar with respect to every layer and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct GradTape {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<DenseVector>,
    pub input: DenseVector,
}

impl GradTape {
    pub fn zeros_like(net: &LipschitzNet) -> Self {
        Self {
            weights: net
                .layers()
                .iter()
                .map(|l| DenseMatrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: net.layers().iter().map(|l| DenseVector::zeros(l.bias.dim())).collect(),
            input: DenseVector::zeros(net.input_dim()),
        }
    }

    /// Parameter gradients in the order of [`LipschitzNet::params`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    /// `self += scale · other` on the parameter part.
    pub fn accumulate(&mut self, other: &GradTape, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += scale * y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            let mut v = a.to_vec();
            v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += scale * y);
            *a = DenseVector::from_raw(v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
            && self.input.iter().all(|v| v.is_finite())
    }
}

/// Gradients of `⟨cotangent, net(x)⟩`.
pub fn net_vjp(net: &LipschitzNet, x: &[f64], cotangent: &[f64]) -> Result<GradTape, NetError> {
    if x.len() != net.input_dim() || cotangent.len() != net.output_dim() {
        return Err(NetError::Shape(format!(
            "vjp with input {} / cotangent {} for a {}→{} network",
            x.len(),
            cotangent.len(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    let cache = net.forward_cached(x);
    Ok(vjp_from_cache(net, &cache, cotangent))
}

pub(crate) fn vjp_from_cache(
    net: &LipschitzNet,
    cache: &crate::lipnet::ForwardCache,
    cotangent: &[f64],
) -> GradTape {
    let layers = net.layers();
    let n = layers.len();
    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    let mut g = cotangent.to_vec();
    for l in (0..n).rev() {
        let input = &cache.inputs[l];
        let (rows, cols) = (layers[l].weight.rows(), layers[l].weight.cols());
        let mut dw = vec![0.0; rows * cols];
        for (i, gi) in g.iter().enumerate() {
            if *gi != 0.0 {
                for (d, a) in dw[i * cols..(i + 1) * cols].iter_mut().zip(input) {
                    *d = gi * a;
                }
            }
        }
        weights.push(DenseMatrix::from_raw(rows, cols, dw));
        biases.push(DenseVector::from_raw(g.clone()));
        let ga = layers[l].weight.matvec_transpose(&g);
        g = if l > 0 { net.activation().pullback(&cache.pre[l - 1], &ga) } else { ga };
    }
    weights.reverse();
    biases.reverse();
    GradTape { weights, biases, input: DenseVector::from_raw(g) }
}

/// Subgradient of the induced 1- or ∞-norm: signs on the maximizing
/// column (p = 1) or row (p = ∞), lowest index on ties.
pub fn norm_subgradient(a: &DenseMatrix, p: PNorm) -> DenseMatrix {
    let (rows, cols) = (a.rows(), a.cols());
    let mut g = DenseMatrix::zeros(rows, cols);
    let sgn = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
    match p {
        PNorm::One => {
            let mut sums = vec![0.0; cols];
            for i in 0..rows {
                for (s, v) in sums.iter_mut().zip(a.row(i)) {
                    *s += v.abs();
                }
            }
            if let Some(j) = argmax_first(&sums) {
                for i in 0..rows {
                    g[(i, j)] = sgn(a[(i, j)]);
                }
            }
        }
        PNorm::Inf => {
            let sums: Vec<f64> =
                (0..rows).map(|i| a.row(i).iter().map(|v| v.abs()).sum()).collect();
            if let Some(i) = argmax_first(&sums) {
                for j in 0..cols {
                    g[(i, j)] = sgn(a[(i, j)]);
                }
            }
        }
        PNorm::Two => panic!("norm_subgradient supports p ∈ {{1, ∞}} only"),
    }
    g
}

fn argmax_first(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| *x > b) {
            best = Some((i, *x));
        }
    }
    best.map(|(i, _)| i)
}

/// Gradient of `Π_ℓ ‖W_ℓ‖_p` with respect to each weight matrix.
pub fn lipschitz_bound_grad(net: &LipschitzNet, p: PNorm) -> Vec<DenseMatrix> {
    let norms: Vec<f64> = net
        .layers()
        .iter()
        .map(|l| match p {
            PNorm::One => l.weight.norm1(),
            _ => l.weight.norm_inf(),
        })
        .collect();
    net.layers()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let others: f64 =
                norms.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, n)| n).product();
            norm_subgradient(&l.weight, p).scale(others)
        })
        .collect()
}

/// Central-difference check of an analytic gradient. Returns
/// `max_i |g_i − fd_i| / (1 + |g_i|)`.
pub fn finite_diff_check<F>(f: F, analytic: &[f64], point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(analytic.len(), point.len());
    let mut x = point.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs() / (1.0 + analytic[i].abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::induced_norm;
    use crate::lipnet::{ActivationKind, Layer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn linear_adjoint() {
        let w = mat(&[&[1.0, 2.0, 3.0], &[-1.0, 0.5, 4.0]]);
        let net = LipschitzNet::linear(w.clone(), PNorm::One);
        let c = [0.3, -2.0];
        let tape = net_vjp(&net, &[1.0, 1.0, 1.0], &c).unwrap();
        assert_eq!(tape.input.to_vec(), w.matvec_transpose(&c));
    }

    #[test]
    fn zero_cotangent_gives_zero_tape() {
        let net = LipschitzNet::init(&[2, 6, 2], ActivationKind::SinSplit, PNorm::One, 1).unwrap();
        let tape = net_vjp(&net, &[0.4, -0.2], &[0.0, 0.0]).unwrap();
        assert_eq!(tape, GradTape::zeros_like(&net));
    }

    #[test]
    fn sin_split_vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let net = LipschitzNet::init(&[3, 6, 2], ActivationKind::SinSplit, PNorm::One, trial)
                .unwrap();
            // Spread weights so sin terms matter.
            let net = net.with_params(
                &net.params().iter().map(|w| w * 20.0 + rng.random_range(-0.1..0.1)).collect::<Vec<_>>(),
            )
            .unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tape = net_vjp(&net, &x, &c).unwrap();
            let dot = |y: Vec<f64>| y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let params = net.params();
            let err = finite_diff_check(
                |p| dot(net.with_params(p).unwrap().forward(&x)),
                &tape.flat_params(),
                &params,
                1e-5,
            );
            assert!(err <= 1e-5, "param grad error {err}");
            let err = finite_diff_check(|xx| dot(net.forward(xx)), &tape.input, &x, 1e-5);
            assert!(err <= 1e-5, "input grad error {err}");
        }
    }

    #[test]
    fn kink_conventions() {
        // |0| has sign 0 and CReLU's step(0) = 0: no gradient flows.
        let net = LipschitzNet::new(
            vec![Layer::linear(mat(&[&[1.0]])), Layer::linear(mat(&[&[1.0, 1.0]]))],
            ActivationKind::CRelu,
            PNorm::One,
        )
        .unwrap();
        let tape = net_vjp(&net, &[0.0], &[1.0]).unwrap();
        assert_eq!(tape.input.to_vec(), vec![0.0]);
    }

    #[test]
    fn subgradient_examples() {
        let g = norm_subgradient(&DenseMatrix::diag(&[2.0, 3.0]).unwrap(), PNorm::One);
        assert_eq!(g, mat(&[&[0.0, 0.0], &[0.0, 1.0]]));
        let a = mat(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let g = norm_subgradient(&a, PNorm::One);
        assert_eq!(g, mat(&[&[0.0, -1.0], &[0.0, 1.0]]));
        // Finite differences of the column-sum norm agree entrywise.
        let h = 1e-7;
        for i in 0..2 {
            for j in 0..2 {
                let mut up = a.clone();
                up[(i, j)] += h;
                let mut dn = a.clone();
                dn[(i, j)] -= h;
                let fd = (induced_norm(&up, PNorm::One).unwrap() - induced_norm(&dn, PNorm::One).unwrap())
                    / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() < 1e-6);
            }
        }
        let tie = norm_subgradient(&DenseMatrix::identity(2), PNorm::One);
        assert_eq!(tie, mat(&[&[1.0, 0.0], &[0.0, 0.0]]));
        let row = norm_subgradient(&a, PNorm::Inf);
        assert_eq!(row, mat(&[&[0.0, 0.0], &[1.0, 1.0]]));
    }

    #[test]
    fn finite_diff_check_examples() {
        let x = [0.3, -1.2, 2.0];
        let err = finite_diff_check(|v| 0.5 * v.iter().map(|a| a * a).sum::<f64>(), &x, &x, 1e-5);
        assert!(err <= 1e-9);
        let err = finite_diff_check(|_| 4.0, &[0.0; 3], &x, 1e-5);
        assert!(err <= 1e-5);
    }

    #[test]
    fn bound_gradient_chains_through_product() {
        let net = LipschitzNet::init(&[3, 4, 3], ActivationKind::Abs, PNorm::Inf, 8).unwrap();
        for p in [PNorm::One, PNorm::Inf] {
            let grads = lipschitz_bound_grad(&net, p);
            let flat: Vec<f64> = grads
                .iter()
                .zip(net.layers())
                .flat_map(|(g, l)| g.as_slice().iter().copied().chain(vec![0.0; l.bias.dim()]))
                .collect();
            let err = finite_diff_check(
                |q| net.with_params(q).unwrap().lipschitz_bound(p).unwrap(),
                &flat,
                &net.params(),
                1e-7,
            );
            assert!(err < 1e-6, "{p}: {err}");
        }
    }
}
