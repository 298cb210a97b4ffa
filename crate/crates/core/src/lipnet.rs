//! Multilayer perceptrons whose Lipschitz constant is certified by the
//! product of layer norms.
//!
//! Hidden layers use saturated polyactivations: every coordinate `z` is
//! mapped to `K` outputs whose Jacobian has unit induced norm almost
//! everywhere (in the norms listed on [`ActivationKind`]), so the product
//! bound is tight with respect to the weights. Outputs are laid out
//! block-wise: all first components, then all second components.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{induced_norm, DenseMatrix, DenseVector, LinalgError, PNorm};
use crate::seed::stream_rng;
use crate::serial;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("activation kink at coordinate {0}; perturb the input")]
    MeasureZeroInput(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("network JSON: {0}")]
    Json(String),
}

/// Hidden-layer activation.
///
/// | kind       | map                                   | K | saturates   |
/// |------------|---------------------------------------|---|-------------|
/// | `Abs`      | `x ↦ |x|`                             | 1 | 1, 2, ∞     |
/// | `CRelu`    | `x ↦ (max(0,x), max(0,−x))`           | 2 | 1           |
/// | `SinSplit` | `x ↦ ((x+sin x)/2, (x−sin x)/2)`      | 2 | 1           |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Abs,
    #[serde(rename = "crelu")]
    CRelu,
    SinSplit,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl ActivationKind {
    pub fn expansion(self) -> usize {
        match self {
            ActivationKind::Abs => 1,
            ActivationKind::CRelu | ActivationKind::SinSplit => 2,
        }
    }

    /// Whether the map is non-differentiable at 0.
    pub fn has_kink(self) -> bool {
        !matches!(self, ActivationKind::SinSplit)
    }

    pub fn apply(self, z: &[f64]) -> Vec<f64> {
        let d = z.len();
        match self {
            ActivationKind::Abs => z.iter().map(|x| x.abs()).collect(),
            ActivationKind::CRelu => {
                let mut out = vec![0.0; 2 * d];
                for (i, x) in z.iter().enumerate() {
                    out[i] = x.max(0.0);
                    out[d + i] = (-x).max(0.0);
                }
                out
            }
            ActivationKind::SinSplit => {
                let mut out = vec![0.0; 2 * d];
                for (i, x) in z.iter().enumerate() {
                    let s = x.sin();
                    out[i] = 0.5 * (x + s);
                    out[d + i] = 0.5 * (x - s);
                }
                out
            }
        }
    }

    /// Per-coordinate derivatives `(∂out_i/∂z_i, ∂out_{d+i}/∂z_i)`; the
    /// second block is empty for `K = 1`. Uses `sign(0) = step(0) = 0`.
    pub(crate) fn derivative_blocks(self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActivationKind::Abs => (z.iter().map(|x| sign(*x)).collect(), Vec::new()),
            ActivationKind::CRelu => (
                z.iter().map(|x| step(*x)).collect(),
                z.iter().map(|x| -step(-x)).collect(),
            ),
            ActivationKind::SinSplit => {
                let c: Vec<f64> = z.iter().map(|x| x.cos()).collect();
                (
                    c.iter().map(|c| 0.5 * (1.0 + c)).collect(),
                    c.iter().map(|c| 0.5 * (1.0 - c)).collect(),
                )
            }
        }
    }

    /// Pulls a cotangent on the activation output back to its input.
    pub(crate) fn pullback(self, z: &[f64], cotangent: &[f64]) -> Vec<f64> {
        let d = z.len();
        let (d1, d2) = self.derivative_blocks(z);
        (0..d)
            .map(|i| {
                let mut g = d1[i] * cotangent[i];
                if !d2.is_empty() {
                    g += d2[i] * cotangent[d + i];
                }
                g
            })
            .collect()
    }

    /// Full `(K·d) × d` Jacobian.
    pub fn jacobian(self, z: &[f64]) -> DenseMatrix {
        let d = z.len();
        let k = self.expansion();
        let (d1, d2) = self.derivative_blocks(z);
        let mut j = DenseMatrix::zeros(k * d, d);
        for i in 0..d {
            j[(i, i)] = d1[i];
            if k == 2 {
                j[(d + i, i)] = d2[i];
            }
        }
        j
    }

    /// True when the activation Jacobian has unit `p`-norm almost
    /// everywhere.
    pub fn saturates(self, p: PNorm) -> bool {
        matches!(
            (self, p),
            (ActivationKind::Abs, _)
                | (ActivationKind::CRelu, PNorm::One)
                | (ActivationKind::SinSplit, PNorm::One)
        )
    }
}

pub fn activation_apply(kind: ActivationKind, v: &DenseVector) -> DenseVector {
    DenseVector::from_raw(kind.apply(v))
}

/// Induced norm of the activation Jacobian at `v`. Exactly 1 for the
/// saturating (kind, p) pairs.
pub fn activation_jacobian_norm(
    kind: ActivationKind,
    v: &DenseVector,
    p: PNorm,
) -> Result<f64, NetError> {
    if kind.has_kink() {
        if let Some(i) = v.iter().position(|x| *x == 0.0) {
            return Err(NetError::MeasureZeroInput(i));
        }
    }
    if kind.saturates(p) {
        return Ok(1.0);
    }
    Ok(induced_norm(&kind.jacobian(v), p)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: DenseVector,
}

impl Layer {
    pub fn new(weight: DenseMatrix, bias: DenseVector) -> Result<Self, NetError> {
        if bias.dim() != weight.rows() {
            return Err(NetError::Shape(format!(
                "bias of length {} for a weight with {} rows",
                bias.dim(),
                weight.rows()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn linear(weight: DenseMatrix) -> Self {
        let bias = DenseVector::zeros(weight.rows());
        Self { weight, bias }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[ℓ]` is what layer `ℓ` multiplies (so `inputs[0] = x`).
    pub inputs: Vec<Vec<f64>>,
    /// Affine outputs of every layer; the last entry is the network output.
    pub pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzNet {
    layers: Vec<Layer>,
    activation: ActivationKind,
    p: PNorm,
}

impl LipschitzNet {
    pub fn new(layers: Vec<Layer>, activation: ActivationKind, p: PNorm) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::Shape("network needs at least one layer".into()));
        }
        let k = activation.expansion();
        for (l, pair) in layers.windows(2).enumerate() {
            let want = k * pair[0].weight.rows();
            if pair[1].weight.cols() != want {
                return Err(NetError::Shape(format!(
                    "layer {} takes {} inputs but the activation produces {want}",
                    l + 1,
                    pair[1].weight.cols()
                )));
            }
        }
        Ok(Self { layers, activation, p })
    }

    /// Single affine layer, no activation.
    pub fn linear(weight: DenseMatrix, p: PNorm) -> Self {
        Self {
            layers: vec![Layer::linear(weight)],
            activation: ActivationKind::Abs,
            p,
        }
    }

    /// Random network with layer widths `dims = [input, hidden.., output]`.
    /// Weights are uniform in `[−1/fan_in, 1/fan_in]`, biases zero.
    pub fn init(dims: &[usize], activation: ActivationKind, p: PNorm, seed: u64) -> Result<Self, NetError> {
        if dims.len() < 2 {
            return Err(NetError::Shape("need input and output widths".into()));
        }
        let mut rng = stream_rng(seed, crate::seed::streams::NET_INIT);
        let k = activation.expansion();
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let fan_in = if l == 0 { dims[0] } else { k * dims[l] };
            let rows = dims[l + 1];
            let a = 1.0 / fan_in.max(1) as f64;
            let w = (0..rows * fan_in).map(|_| rng.random_range(-a..=a)).collect();
            layers.push(Layer::linear(DenseMatrix::new(rows, fan_in, w)?));
        }
        Self::new(layers, activation, p)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn p(&self) -> PNorm {
        self.p
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.rows()
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.input_dim(), "network input dimension");
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matvec(&a);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
            }
            let next = if l + 1 < n { self.activation.apply(&z) } else { Vec::new() };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        ForwardCache { inputs, pre }
    }

    /// Unchecked forward pass on a slice; panics on dimension mismatch.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = self.layers.len();
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matvec(&a);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
            }
            a = if l + 1 < n { self.activation.apply(&z) } else { z };
        }
        a
    }

    /// Jacobian at `x` by pushing the identity through the layers.
    pub fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        let cache = self.forward_cached(x);
        self.jacobian_from_cache(&cache)
    }

    pub(crate) fn jacobian_from_cache(&self, cache: &ForwardCache) -> DenseMatrix {
        let n = self.layers.len();
        let mut j = self.layers[0].weight.clone();
        for l in 1..n {
            let z = &cache.pre[l - 1];
            let expanded = self.activation.jacobian(z).matmul(&j).expect("activation shape");
            j = self.layers[l].weight.matmul(&expanded).expect("layer shape");
        }
        j
    }

    /// Whether any hidden pre-activation sits exactly on a kink.
    pub fn at_kink(&self, x: &[f64]) -> bool {
        if !self.activation.has_kink() {
            return false;
        }
        let cache = self.forward_cached(x);
        cache.pre[..cache.pre.len() - 1].iter().flatten().any(|z| *z == 0.0)
    }

    /// Product of layer norms: `Π_ℓ ‖W_ℓ‖_p`. O(Σ rows·cols) for p ∈ {1, ∞}.
    pub fn lipschitz_bound(&self, p: PNorm) -> Result<f64, LinalgError> {
        self.layers
            .iter()
            .try_fold(1.0, |acc, l| Ok(acc * induced_norm(&l.weight, p)?))
    }

    /// Largest sampled Jacobian norm over the ∞-ball of the given radius.
    pub fn empirical_lipschitz(
        &self,
        p: PNorm,
        n_samples: usize,
        radius: f64,
        seed: u64,
    ) -> Result<f64, NetError> {
        let mut rng = stream_rng(seed, crate::seed::streams::CERTIFY);
        let d = self.input_dim();
        let mut best = 0.0_f64;
        let mut taken = 0;
        while taken < n_samples {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..=radius)).collect();
            if self.at_kink(&x) {
                continue;
            }
            best = best.max(induced_norm(&self.jacobian(&x), p)?);
            taken += 1;
        }
        Ok(best)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows() * l.weight.cols() + l.bias.dim())
            .sum()
    }

    /// Parameters flattened as `[W_1 (row-major), b_1, W_2, b_2, ...]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self, NetError> {
        if params.len() != self.num_params() {
            return Err(NetError::Shape(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (r, c) = (l.weight.rows(), l.weight.cols());
            let w = DenseMatrix::new(r, c, params[offset..offset + r * c].to_vec())?;
            offset += r * c;
            let b = DenseVector::new(params[offset..offset + r].to_vec())?;
            offset += r;
            layers.push(Layer { weight: w, bias: b });
        }
        Ok(Self { layers, activation: self.activation, p: self.p })
    }

    pub fn to_json(&self) -> NetJson {
        NetJson {
            activation: self.activation,
            p: self.p,
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    weights: l.weight.as_slice().to_vec(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &NetJson) -> Result<Self, NetError> {
        let layers = json
            .layers
            .iter()
            .map(|l| {
                let w = DenseMatrix::new(l.rows, l.cols, l.weights.clone())?;
                Layer::new(w, DenseVector::new(l.bias.clone())?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers, json.activation, json.p)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, NetError> {
        let json: NetJson = serde_json::from_str(s).map_err(|e| NetError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

/// On-disk network: `{activation, p, layers: [{rows, cols, weights, bias}]}`
/// with `weights` (row-major) and `bias` as base64 little-endian doubles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetJson {
    pub activation: ActivationKind,
    pub p: PNorm,
    pub layers: Vec<LayerJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerJson {
    pub rows: usize,
    pub cols: usize,
    #[serde(with = "serial::f64_array")]
    pub weights: Vec<f64>,
    #[serde(with = "serial::f64_array")]
    pub bias: Vec<f64>,
}

/// Checked forward pass.
pub fn net_forward(net: &LipschitzNet, x: &DenseVector) -> Result<DenseVector, NetError> {
    if x.dim() != net.input_dim() {
        return Err(NetError::Shape(format!(
            "input of length {} for a network expecting {}",
            x.dim(),
            net.input_dim()
        )));
    }
    Ok(DenseVector::from_raw(net.forward(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn activation_examples() {
        assert_eq!(activation_apply(ActivationKind::Abs, &v(&[-3.0, 2.0])).to_vec(), vec![3.0, 2.0]);
        assert_eq!(activation_apply(ActivationKind::CRelu, &v(&[-3.0])).to_vec(), vec![0.0, 3.0]);
        assert_eq!(activation_apply(ActivationKind::SinSplit, &v(&[0.0])).to_vec(), vec![0.0, 0.0]);
        let out = ActivationKind::CRelu.apply(&[1.0, -2.0]);
        assert_eq!(out, vec![1.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn jacobian_norm_examples() {
        let n = activation_jacobian_norm(ActivationKind::SinSplit, &v(&[0.7]), PNorm::One).unwrap();
        assert_eq!(n, 1.0);
        let n = activation_jacobian_norm(ActivationKind::Abs, &v(&[-2.0, 5.0]), PNorm::Inf).unwrap();
        assert_eq!(n, 1.0);
        let n = activation_jacobian_norm(ActivationKind::CRelu, &v(&[1.5]), PNorm::One).unwrap();
        assert_eq!(n, 1.0);
        assert!(matches!(
            activation_jacobian_norm(ActivationKind::Abs, &v(&[1.0, 0.0]), PNorm::One),
            Err(NetError::MeasureZeroInput(1))
        ));
        // Non-saturated pair: SinSplit in ∞ is max((1 ± cos x)/2).
        let x = 0.7_f64;
        let n = activation_jacobian_norm(ActivationKind::SinSplit, &v(&[x]), PNorm::Inf).unwrap();
        assert!((n - 0.5 * (1.0 + x.cos())).abs() < 1e-15);
    }

    #[test]
    fn sin_split_column_sums_are_one() {
        for x in [-3.0, -0.2, 0.0, 1.1, 5.0] {
            let j = ActivationKind::SinSplit.jacobian(&[x]);
            assert!((j.norm1() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_examples() {
        let zero = LipschitzNet::new(
            vec![
                Layer::new(DenseMatrix::zeros(3, 2), v(&[0.0; 3])).unwrap(),
                Layer::new(DenseMatrix::zeros(2, 3), v(&[1.5, -2.0])).unwrap(),
            ],
            ActivationKind::Abs,
            PNorm::One,
        )
        .unwrap();
        assert_eq!(net_forward(&zero, &v(&[4.0, 1.0])).unwrap().to_vec(), vec![1.5, -2.0]);

        let lin = LipschitzNet::linear(DenseMatrix::scaled_identity(2, 2.0), PNorm::One);
        assert_eq!(lin.forward(&[1.0, -3.0]), vec![2.0, -6.0]);

        let abs = LipschitzNet::new(
            vec![Layer::linear(mat(&[&[1.0]])), Layer::linear(mat(&[&[1.0]]))],
            ActivationKind::Abs,
            PNorm::One,
        )
        .unwrap();
        assert_eq!(abs.forward(&[3.0]), vec![3.0]);
        assert_eq!(abs.forward(&[-3.0]), vec![3.0]);
        assert!(net_forward(&abs, &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn rejects_mismatched_layer_widths() {
        let r = LipschitzNet::new(
            vec![Layer::linear(DenseMatrix::zeros(3, 2)), Layer::linear(DenseMatrix::zeros(2, 3))],
            ActivationKind::CRelu,
            PNorm::One,
        );
        assert!(matches!(r, Err(NetError::Shape(_))));
    }

    #[test]
    fn bound_examples() {
        let zero = LipschitzNet::linear(DenseMatrix::zeros(2, 2), PNorm::One);
        assert_eq!(zero.lipschitz_bound(PNorm::One).unwrap(), 0.0);
        let w = mat(&[&[1.0, -2.0], &[3.0, 4.0]]);
        let single = LipschitzNet::linear(w.clone(), PNorm::One);
        assert_eq!(single.lipschitz_bound(PNorm::One).unwrap(), 6.0);
        let two = LipschitzNet::new(
            vec![Layer::linear(w), Layer::linear(DenseMatrix::scaled_identity(2, 0.5))],
            ActivationKind::Abs,
            PNorm::One,
        )
        .unwrap();
        assert_eq!(two.lipschitz_bound(PNorm::One).unwrap(), 3.0);
        let emp = two.empirical_lipschitz(PNorm::One, 2_000, 3.0, 1).unwrap();
        assert!(emp <= 3.0 + 1e-9);
        // Abs is ±1 on the diagonal: the sup is attained, 6·0.5.
        assert!(emp > 2.9);
    }

    #[test]
    fn linear_net_empirical_equals_norm() {
        let w = mat(&[&[0.3, -1.2], &[2.0, 0.1]]);
        let net = LipschitzNet::linear(w.clone(), PNorm::Inf);
        for p in [PNorm::One, PNorm::Inf] {
            let e = net.empirical_lipschitz(p, 10, 1.0, 9).unwrap();
            assert_eq!(e, induced_norm(&w, p).unwrap());
        }
    }

    #[test]
    fn init_respects_fan_in_scale() {
        let net = LipschitzNet::init(&[2, 40, 2], ActivationKind::SinSplit, PNorm::One, 3).unwrap();
        assert_eq!(net.layers()[1].weight.cols(), 80);
        assert!(net.layers()[0].weight.as_slice().iter().all(|w| w.abs() <= 0.5));
        assert!(net.layers()[1].weight.as_slice().iter().all(|w| w.abs() <= 1.0 / 80.0));
        assert!(net.layers().iter().all(|l| l.bias.iter().all(|b| *b == 0.0)));
        assert_eq!(net, LipschitzNet::init(&[2, 40, 2], ActivationKind::SinSplit, PNorm::One, 3).unwrap());
    }

    #[test]
    fn params_round_trip() {
        let net = LipschitzNet::init(&[3, 5, 2], ActivationKind::CRelu, PNorm::Inf, 4).unwrap();
        let back = net.with_params(&net.params()).unwrap();
        assert_eq!(back, net);
        assert!(net.with_params(&[0.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let net = LipschitzNet::init(&[2, 7, 2], ActivationKind::SinSplit, PNorm::One, 12).unwrap();
        let s = net.to_json_string();
        let back = LipschitzNet::from_json_str(&s).unwrap();
        assert_eq!(back.params().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   net.params().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert!(s.contains("\"activation\": \"sin_split\""));
        assert!(s.contains("\"p\": \"1\""));
    }
}
