//! Weakly infinitesimally contracting vector fields.
//!
//! A [`WicField`] is `f(x) = −γx + W⁻¹φ(Wx)` where `φ` is a
//! [`LipschitzNet`] and `γ = ε + Π‖W_ℓ‖_p`. For `p ∈ {1, ∞}` this is
//! contracting in `‖Wx‖_p` with margin `ε` for every parameter value, so
//! training never needs projections. [`decompose`] goes the other way: it
//! splits a given field into a scalar decay and a residual, and
//! [`certify_wic`] samples the weighted matrix measure of the Jacobian.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adgrad::{lipschitz_bound_grad, vjp_from_cache};
use crate::densela::{invert, matrix_measure, DenseMatrix, LinalgError, PNorm};
use crate::lipnet::{LipschitzNet, NetError, NetJson};
use crate::seed::{derive_seed, streams};
use crate::serial;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("contraction margin must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("contracting synthesis needs p ∈ {{1, ∞}}, got p = {0}")]
    UnsupportedNorm(PNorm),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite Jacobian sample at {0:?}")]
    NonFiniteJacobian(Vec<f64>),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("field JSON: {0}")]
    Json(String),
}

/// An autonomous vector field with Jacobian access.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> DenseMatrix;
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (**self).eval(x)
    }
    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        (**self).jacobian(x)
    }
}

/// `ẋ = A x`.
#[derive(Debug, Clone)]
pub struct LinearField(pub DenseMatrix);

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.0.rows()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.0.matvec(x)
    }
    fn jacobian(&self, _x: &[f64]) -> DenseMatrix {
        self.0.clone()
    }
}

/// A field given by a pair of closures.
pub struct FnField<E, J> {
    pub dim: usize,
    pub eval: E,
    pub jacobian: J,
}

impl<E, J> VectorField for FnField<E, J>
where
    E: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DenseMatrix,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }
    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        (self.jacobian)(x)
    }
}

/// The norm weight `W` of `‖Wx‖_p`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    Identity,
    /// `W = diag(exp(w))`, invertible for every `w`.
    DiagPositive { log_diag: Vec<f64> },
    Dense { matrix: DenseMatrix, inverse: DenseMatrix },
}

impl Weighting {
    pub fn dense(matrix: DenseMatrix) -> Result<Self, LinalgError> {
        let inverse = invert(&matrix)?;
        Ok(Weighting::Dense { matrix, inverse })
    }

    pub fn matrix(&self, n: usize) -> DenseMatrix {
        match self {
            Weighting::Identity => DenseMatrix::identity(n),
            Weighting::DiagPositive { log_diag } => {
                DenseMatrix::diag(&log_diag.iter().map(|w| w.exp()).collect::<Vec<_>>())
                    .expect("finite weights")
            }
            Weighting::Dense { matrix, .. } => matrix.clone(),
        }
    }

    pub fn inverse_matrix(&self, n: usize) -> DenseMatrix {
        match self {
            Weighting::Identity => DenseMatrix::identity(n),
            Weighting::DiagPositive { log_diag } => {
                DenseMatrix::diag(&log_diag.iter().map(|w| (-w).exp()).collect::<Vec<_>>())
                    .expect("finite weights")
            }
            Weighting::Dense { inverse, .. } => inverse.clone(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Identity => x.to_vec(),
            Weighting::DiagPositive { log_diag } => {
                x.iter().zip(log_diag).map(|(v, w)| v * w.exp()).collect()
            }
            Weighting::Dense { matrix, .. } => matrix.matvec(x),
        }
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Dense { matrix, .. } => matrix.matvec_transpose(x),
            _ => self.apply(x),
        }
    }

    fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Identity => y.to_vec(),
            Weighting::DiagPositive { log_diag } => {
                y.iter().zip(log_diag).map(|(v, w)| v * (-w).exp()).collect()
            }
            Weighting::Dense { inverse, .. } => inverse.matvec(y),
        }
    }

    fn apply_inverse_transpose(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Weighting::Dense { inverse, .. } => inverse.matvec_transpose(y),
            _ => self.apply_inverse(y),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Weighting::Identity => 0,
            Weighting::DiagPositive { log_diag } => log_diag.len(),
            Weighting::Dense { matrix, .. } => matrix.rows() * matrix.cols(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Weighting::Identity => Vec::new(),
            Weighting::DiagPositive { log_diag } => log_diag.clone(),
            Weighting::Dense { matrix, .. } => matrix.as_slice().to_vec(),
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self, FieldError> {
        if params.len() != self.num_params() {
            return Err(FieldError::Shape(format!(
                "{} weight parameters, expected {}",
                params.len(),
                self.num_params()
            )));
        }
        Ok(match self {
            Weighting::Identity => Weighting::Identity,
            Weighting::DiagPositive { .. } => {
                if let Some(bad) = params.iter().find(|v| !v.is_finite()) {
                    return Err(LinalgError::InvalidInput(format!("weight {bad}")).into());
                }
                Weighting::DiagPositive { log_diag: params.to_vec() }
            }
            Weighting::Dense { matrix, .. } => {
                Weighting::dense(DenseMatrix::new(matrix.rows(), matrix.cols(), params.to_vec())?)?
            }
        })
    }

    /// Maps `∂L/∂W` onto this parameterization.
    fn param_grad(&self, dw: &DenseMatrix) -> Vec<f64> {
        match self {
            Weighting::Identity => Vec::new(),
            Weighting::DiagPositive { log_diag } => {
                log_diag.iter().enumerate().map(|(i, w)| dw[(i, i)] * w.exp()).collect()
            }
            Weighting::Dense { .. } => dw.as_slice().to_vec(),
        }
    }
}

/// Gradients of a scalar loss routed through one field evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrad {
    pub x: Vec<f64>,
    /// Flat network parameters, excluding the path through `γ`.
    pub net: Vec<f64>,
    pub weight: Vec<f64>,
    /// `∂L/∂γ`.
    pub gamma: f64,
}

impl FieldGrad {
    pub fn zeros(field: &WicField) -> Self {
        Self {
            x: vec![0.0; field.dim()],
            net: vec![0.0; field.phi.num_params()],
            weight: vec![0.0; field.weighting.num_params()],
            gamma: 0.0,
        }
    }

    pub fn add_assign(&mut self, other: &FieldGrad) {
        add_into(&mut self.x, &other.x);
        add_into(&mut self.net, &other.net);
        add_into(&mut self.weight, &other.weight);
        self.gamma += other.gamma;
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

#[derive(Debug, Clone, PartialEq)]
pub struct WicField {
    phi: LipschitzNet,
    epsilon: f64,
    p: PNorm,
    weighting: Weighting,
    gamma: f64,
}

/// Builds `f(x) = −γx + W⁻¹φ(Wx)` with `γ = ε + ‖φ‖` (`W = I` when absent).
pub fn synthesize(
    phi: LipschitzNet,
    epsilon: f64,
    p: PNorm,
    w: Option<DenseMatrix>,
) -> Result<WicField, FieldError> {
    let weighting = match w {
        None => Weighting::Identity,
        Some(m) => Weighting::dense(m)?,
    };
    WicField::new(phi, epsilon, p, weighting)
}

impl WicField {
    pub fn new(
        phi: LipschitzNet,
        epsilon: f64,
        p: PNorm,
        weighting: Weighting,
    ) -> Result<Self, FieldError> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(FieldError::NegativeEpsilon(epsilon));
        }
        if p == PNorm::Two {
            return Err(FieldError::UnsupportedNorm(p));
        }
        let n = phi.input_dim();
        if phi.output_dim() != n {
            return Err(FieldError::Shape(format!(
                "residual network maps {n} → {}, needs a square map",
                phi.output_dim()
            )));
        }
        match &weighting {
            Weighting::DiagPositive { log_diag } if log_diag.len() != n => {
                return Err(FieldError::Shape(format!("{} diagonal weights for dim {n}", log_diag.len())));
            }
            Weighting::Dense { matrix, .. } if matrix.rows() != n || !matrix.is_square() => {
                return Err(FieldError::Shape(format!(
                    "{}x{} weight for dim {n}",
                    matrix.rows(),
                    matrix.cols()
                )));
            }
            _ => {}
        }
        let gamma = epsilon + phi.lipschitz_bound(p)?;
        Ok(Self { phi, epsilon, p, weighting, gamma })
    }

    pub fn dim(&self) -> usize {
        self.phi.input_dim()
    }

    pub fn phi(&self) -> &LipschitzNet {
        &self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self) -> PNorm {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weighting(&self) -> &Weighting {
        &self.weighting
    }

    pub fn weight_matrix(&self) -> DenseMatrix {
        self.weighting.matrix(self.dim())
    }

    /// `−γx + W⁻¹φ(Wx)`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let y = self.phi.forward(&self.weighting.apply(x));
        let z = self.weighting.apply_inverse(&y);
        z.iter().zip(x).map(|(zi, xi)| zi - self.gamma * xi).collect()
    }

    /// `−γI + W⁻¹ Dφ(Wx) W`.
    pub fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        let n = self.dim();
        let dphi = self.phi.jacobian(&self.weighting.apply(x));
        let inner = match &self.weighting {
            Weighting::Identity => dphi,
            Weighting::DiagPositive { log_diag } => {
                let mut j = dphi;
                for i in 0..n {
                    for k in 0..n {
                        j[(i, k)] *= (log_diag[k] - log_diag[i]).exp();
                    }
                }
                j
            }
            Weighting::Dense { matrix, inverse } => inverse
                .matmul(&dphi.matmul(matrix).expect("square"))
                .expect("square"),
        };
        inner.shift_diagonal(-self.gamma)
    }

    /// Reverse-mode pullback of `cotangent` through `f(x)`.
    pub fn vjp(&self, x: &[f64], cotangent: &[f64]) -> FieldGrad {
        let u = self.weighting.apply(x);
        let cache = self.phi.forward_cached(&u);
        let z = self.weighting.apply_inverse(cache.output());
        let g = self.weighting.apply_inverse_transpose(cotangent);
        let tape = vjp_from_cache(&self.phi, &cache, &g);
        let du = tape.input.as_slice();
        let wt_du = self.weighting.apply_transpose(du);
        let dx: Vec<f64> =
            wt_du.iter().zip(cotangent).map(|(a, c)| a - self.gamma * c).collect();
        let dgamma = -cotangent.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
        let weight = if self.weighting.num_params() == 0 {
            Vec::new()
        } else {
            let n = self.dim();
            let mut dw = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for k in 0..n {
                    dw[(i, k)] = du[i] * x[k] - g[i] * z[k];
                }
            }
            self.weighting.param_grad(&dw)
        };
        FieldGrad { x: dx, net: tape.flat_params(), weight, gamma: dgamma }
    }

    pub fn num_params(&self) -> usize {
        self.phi.num_params() + self.weighting.num_params()
    }

    /// Trainable parameters: network (see [`LipschitzNet::params`]) then weight.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.phi.params();
        out.extend(self.weighting.params());
        out
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self, FieldError> {
        let k = self.phi.num_params();
        if params.len() != self.num_params() {
            return Err(FieldError::Shape(format!(
                "{} parameters, expected {}",
                params.len(),
                self.num_params()
            )));
        }
        let phi = self.phi.with_params(&params[..k])?;
        let weighting = self.weighting.with_params(&params[k..])?;
        Self::new(phi, self.epsilon, self.p, weighting)
    }

    /// Folds `∂L/∂γ` into the network weights through `γ = ε + Π‖W_ℓ‖_p`
    /// and returns `(∂L/∂params, ∂L/∂ε)` in the order of [`Self::params`].
    pub fn param_gradient(&self, g: &FieldGrad) -> (Vec<f64>, f64) {
        let mut net = g.net.clone();
        if g.gamma != 0.0 {
            let mut offset = 0;
            for (layer, dg) in self.phi.layers().iter().zip(lipschitz_bound_grad(&self.phi, self.p)) {
                for (a, b) in net[offset..].iter_mut().zip(dg.as_slice()) {
                    *a += g.gamma * b;
                }
                offset += layer.weight.rows() * layer.weight.cols() + layer.bias.dim();
            }
        }
        net.extend_from_slice(&g.weight);
        (net, g.gamma)
    }

    /// Sampled certificate in the field's own weighted norm.
    pub fn certify(&self, domain: SamplingBox, n_samples: usize, seed: u64) -> Result<CertReport, FieldError> {
        let w = match self.weighting {
            Weighting::Identity => None,
            _ => Some(self.weight_matrix()),
        };
        certify_wic(self, self.p, w.as_ref(), domain, n_samples, seed)
    }

    pub fn to_json(&self) -> FieldJson {
        FieldJson {
            net: self.phi.to_json(),
            epsilon: self.epsilon,
            p: self.p,
            weight: match &self.weighting {
                Weighting::Identity => WeightJson::Identity,
                Weighting::DiagPositive { log_diag } => {
                    WeightJson::DiagPositive { log_diag: log_diag.clone() }
                }
                Weighting::Dense { matrix, .. } => WeightJson::Dense {
                    rows: matrix.rows(),
                    cols: matrix.cols(),
                    entries: matrix.as_slice().to_vec(),
                },
            },
        }
    }

    pub fn from_json(json: &FieldJson) -> Result<Self, FieldError> {
        let phi = LipschitzNet::from_json(&json.net)?;
        let weighting = match &json.weight {
            WeightJson::Identity => Weighting::Identity,
            WeightJson::DiagPositive { log_diag } => Weighting::DiagPositive { log_diag: log_diag.clone() },
            WeightJson::Dense { rows, cols, entries } => {
                Weighting::dense(DenseMatrix::new(*rows, *cols, entries.clone())?)?
            }
        };
        Self::new(phi, json.epsilon, json.p, weighting)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, FieldError> {
        let json: FieldJson = serde_json::from_str(s).map_err(|e| FieldError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

impl VectorField for WicField {
    fn dim(&self) -> usize {
        WicField::dim(self)
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        WicField::eval(self, x)
    }
    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        WicField::jacobian(self, x)
    }
}

/// On-disk field: the network JSON plus `epsilon` (hex bits), `p`, and the
/// weight entries (base64).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldJson {
    pub net: NetJson,
    #[serde(with = "serial::f64_bits")]
    pub epsilon: f64,
    pub p: PNorm,
    pub weight: WeightJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightJson {
    Identity,
    DiagPositive {
        #[serde(with = "serial::f64_array")]
        log_diag: Vec<f64>,
    },
    Dense {
        rows: usize,
        cols: usize,
        #[serde(with = "serial::f64_array")]
        entries: Vec<f64>,
    },
}

/// Axis-aligned sampling box `center + [−radius, radius]ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingBox {
    pub radius: f64,
}

impl SamplingBox {
    pub fn new(radius: f64) -> Self {
        Self { radius }
    }

    /// Sample `index`; index 0 is the center (the origin).
    pub fn sample(&self, dim: usize, seed: u64, index: usize) -> Vec<f64> {
        if index == 0 {
            return vec![0.0; dim];
        }
        let mut rng = crate::seed::stream_rng(derive_seed(seed, streams::CERTIFY), index as u64);
        (0..dim).map(|_| rng.random_range(-self.radius..=self.radius)).collect()
    }
}

impl Default for SamplingBox {
    fn default() -> Self {
        Self { radius: 10.0 }
    }
}

/// Result of [`decompose`]: `f(x) = −γ̂x + φ̂(x)`.
pub struct Decomposition<'a, F: ?Sized> {
    pub gamma: f64,
    /// Largest sampled `‖Dφ̂‖_p`; at most `γ̂` (up to roundoff) when `f` is WIC.
    pub max_residual_norm: f64,
    pub p: PNorm,
    pub n_samples: usize,
    field: &'a F,
}

impl<F: VectorField + ?Sized> Decomposition<'_, F> {
    /// `φ̂(x) = f(x) + γ̂x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.field.eval(x).iter().zip(x).map(|(f, xi)| f + self.gamma * xi).collect()
    }

    pub fn residual_jacobian(&self, x: &[f64]) -> DenseMatrix {
        self.field.jacobian(x).shift_diagonal(self.gamma)
    }
}

/// Splits `f` into `−γ̂·id + φ̂` with `γ̂ = max(0, −min ∂f_i/∂x_i)` over the
/// samples. Sampling only lower-bounds the infimum over all of ℝⁿ.
pub fn decompose<F: VectorField + Sync + ?Sized>(
    f: &F,
    p: PNorm,
    domain: SamplingBox,
    n_samples: usize,
    seed: u64,
) -> Result<Decomposition<'_, F>, FieldError> {
    assert!(n_samples >= 1, "decompose needs at least one sample");
    let dim = f.dim();
    let jacobians: Vec<DenseMatrix> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let x = domain.sample(dim, seed, k);
            let j = f.jacobian(&x);
            if j.is_finite() { Ok(j) } else { Err(FieldError::NonFiniteJacobian(x)) }
        })
        .collect::<Result<_, _>>()?;
    let min_diag = jacobians
        .iter()
        .flat_map(|j| (0..dim).map(move |i| j[(i, i)]))
        .fold(f64::INFINITY, f64::min);
    let gamma = (-min_diag).max(0.0);
    let max_residual_norm = jacobians
        .iter()
        .map(|j| crate::densela::induced_norm(&j.shift_diagonal(gamma), p))
        .try_fold(0.0_f64, |m, n| n.map(|n| m.max(n)))?;
    Ok(Decomposition { gamma, max_residual_norm, p, n_samples, field: f })
}

/// Outcome of a sampled contraction check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub p: PNorm,
    pub n_samples: usize,
    pub max_mu: f64,
    pub argmax: Vec<f64>,
    /// "sampled certificate": sampling cannot prove the supremum over ℝⁿ.
    pub kind: String,
}

impl CertReport {
    pub fn contracting(&self, tol: f64) -> bool {
        self.max_mu <= tol
    }
}

/// Max over samples of `μ_p(W Df(x) W⁻¹)`. Sample 0 is the origin.
pub fn certify_wic<F: VectorField + Sync + ?Sized>(
    f: &F,
    p: PNorm,
    w: Option<&DenseMatrix>,
    domain: SamplingBox,
    n_samples: usize,
    seed: u64,
) -> Result<CertReport, FieldError> {
    let dim = f.dim();
    let pair = match w {
        Some(m) => Some((m.clone(), invert(m)?)),
        None => None,
    };
    let (max_mu, idx) = (0..n_samples.max(1))
        .into_par_iter()
        .map(|k| {
            let x = domain.sample(dim, seed, k);
            let j = f.jacobian(&x);
            let j = match &pair {
                Some((m, mi)) => m.matmul(&j)?.matmul(mi)?,
                None => j,
            };
            Ok((matrix_measure(&j, p)?, k))
        })
        .try_reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )
        .map_err(|e: LinalgError| FieldError::from(e))?;
    Ok(CertReport {
        p,
        n_samples: n_samples.max(1),
        max_mu,
        argmax: domain.sample(dim, seed, idx),
        kind: "sampled certificate".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adgrad::finite_diff_check;
    use crate::lipnet::ActivationKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_net(n: usize, p: PNorm) -> LipschitzNet {
        LipschitzNet::linear(DenseMatrix::zeros(n, n), p)
    }

    fn random_field(seed: u64, n: usize, eps: f64, p: PNorm, weighted: bool) -> WicField {
        let act = [ActivationKind::Abs, ActivationKind::CRelu, ActivationKind::SinSplit][seed as usize % 3];
        let net = LipschitzNet::init(&[n, 6, n], act, p, seed).unwrap();
        let net = net.with_params(&net.params().iter().map(|v| v * 3.0 + 0.01).collect::<Vec<_>>()).unwrap();
        let weighting = if weighted {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Weighting::DiagPositive { log_diag: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() }
        } else {
            Weighting::Identity
        };
        WicField::new(net, eps, p, weighting).unwrap()
    }

    #[test]
    fn zero_residual_gives_pure_decay() {
        let f = synthesize(zero_net(2, PNorm::One), 1.0, PNorm::One, None).unwrap();
        assert_eq!(f.eval(&[1.0, -1.0]), vec![-1.0, 1.0]);
        assert_eq!(f.jacobian(&[0.3, 0.2]), DenseMatrix::scaled_identity(2, -1.0));
        let f = synthesize(zero_net(2, PNorm::Inf), 2.0, PNorm::Inf, None).unwrap();
        assert_eq!(f.eval(&[1.0, -1.0]), vec![-2.0, 2.0]);
        assert_eq!(matrix_measure(&f.jacobian(&[5.0, 1.0]), PNorm::Inf).unwrap(), -2.0);
    }

    #[test]
    fn linear_residual_is_weakly_contracting() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = DenseMatrix::new(3, 3, (0..9).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let f = synthesize(LipschitzNet::linear(a.clone(), PNorm::One), 0.0, PNorm::One, None).unwrap();
            assert_eq!(f.gamma(), a.norm1());
            assert_eq!(f.jacobian(&[0.0; 3]), a.shift_diagonal(-a.norm1()));
            let mu = matrix_measure(&a.shift_diagonal(-a.norm1()), PNorm::One).unwrap();
            assert!(mu <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            synthesize(zero_net(2, PNorm::One), -0.1, PNorm::One, None),
            Err(FieldError::NegativeEpsilon(_))
        ));
        let singular = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            synthesize(zero_net(2, PNorm::One), 0.0, PNorm::One, Some(singular)),
            Err(FieldError::Linalg(LinalgError::Singular { .. }))
        ));
        assert!(matches!(
            synthesize(zero_net(2, PNorm::Two), 0.0, PNorm::Two, None),
            Err(FieldError::UnsupportedNorm(PNorm::Two))
        ));
    }

    #[test]
    fn origin_is_an_equilibrium_with_zero_biases() {
        let net = LipschitzNet::init(&[3, 6, 3], ActivationKind::SinSplit, PNorm::Inf, 2).unwrap();
        let f = WicField::new(net, 0.5, PNorm::Inf, Weighting::DiagPositive { log_diag: vec![0.1, 0.2, -0.3] }).unwrap();
        assert_eq!(f.eval(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn eval_matches_recomposition() {
        let f = random_field(5, 3, 0.25, PNorm::One, true);
        let x = [0.4, -1.1, 2.0];
        let w = f.weight_matrix();
        let wi = invert(&w).unwrap();
        let phi = f.phi().forward(&w.matvec(&x));
        let expect: Vec<f64> = wi.matvec(&phi).iter().zip(&x).map(|(a, b)| a - f.gamma() * b).collect();
        for (a, b) in f.eval(&x).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (seed, weighted) in [(2u64, false), (5, true)] {
            let f = random_field(seed, 3, 0.1, PNorm::One, weighted);
            let x = [0.31, -0.72, 1.13];
            let j = f.jacobian(&x);
            for i in 0..3 {
                let row: Vec<f64> = j.row(i).to_vec();
                let err = finite_diff_check(|y| f.eval(y)[i], &row, &x, 1e-6);
                assert!(err < 1e-6, "row {i}: {err}");
            }
        }
    }

    #[test]
    fn dense_weight_jacobian_and_certificate() {
        let net = LipschitzNet::init(&[2, 8, 2], ActivationKind::SinSplit, PNorm::One, 3).unwrap();
        let w = DenseMatrix::from_rows(&[vec![1.0, 0.4], vec![-0.3, 2.0]]).unwrap();
        let f = synthesize(net, 0.2, PNorm::One, Some(w)).unwrap();
        let x = [0.3, -0.9];
        let j = f.jacobian(&x);
        for i in 0..2 {
            let err = finite_diff_check(|y| f.eval(y)[i], j.row(i), &x, 1e-6);
            assert!(err < 1e-6);
        }
        let rep = f.certify(SamplingBox::new(5.0), 500, 1).unwrap();
        assert!(rep.max_mu <= -0.2 + 1e-9, "{}", rep.max_mu);
    }

    #[test]
    fn construction_guarantee_on_random_fields() {
        for seed in 0..12 {
            let p = if seed % 2 == 0 { PNorm::One } else { PNorm::Inf };
            let eps = if seed % 3 == 0 { 0.0 } else { 0.5 };
            let f = random_field(seed, 2 + (seed as usize % 3), eps, p, seed % 4 < 2);
            let rep = f.certify(SamplingBox::new(5.0), 300, seed).unwrap();
            assert!(rep.max_mu <= -eps + 1e-9, "seed {seed}: {}", rep.max_mu);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        for (seed, weighted) in [(2u64, false), (8, true)] {
            let f = random_field(seed, 3, 0.3, PNorm::Inf, weighted);
            let x = [0.37, -0.81, 0.52];
            let c = [0.7, -0.4, 1.1];
            let dot = |f: &WicField, y: &[f64]| f.eval(y).iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let g = f.vjp(&x, &c);
            assert!(finite_diff_check(|y| dot(&f, y), &g.x, &x, 1e-6) < 1e-6);
            let (pg, eg) = f.param_gradient(&g);
            let err = finite_diff_check(|q| dot(&f.with_params(q).unwrap(), &x), &pg, &f.params(), 1e-6);
            assert!(err < 1e-5, "param error {err}");
            let de = (dot(&WicField::new(f.phi().clone(), 0.3 + 1e-6, f.p(), f.weighting().clone()).unwrap(), &x)
                - dot(&WicField::new(f.phi().clone(), 0.3 - 1e-6, f.p(), f.weighting().clone()).unwrap(), &x))
                / 2e-6;
            assert!((de - eg).abs() < 1e-6);
        }
    }

    #[test]
    fn decompose_pure_decay() {
        let f = LinearField(DenseMatrix::scaled_identity(3, -1.0));
        let d = decompose(&f, PNorm::One, SamplingBox::default(), 50, 1).unwrap();
        assert_eq!(d.gamma, 1.0);
        assert_eq!(d.max_residual_norm, 0.0);
        assert_eq!(d.residual(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn decompose_round_trip() {
        for seed in 0..6 {
            let p = if seed % 2 == 0 { PNorm::One } else { PNorm::Inf };
            let f = random_field(seed, 3, 0.5 * (seed % 2) as f64, p, false);
            let d = decompose(&f, p, SamplingBox::new(10.0), 500, seed).unwrap();
            // |∂φ_i/∂x_i| ≤ ‖φ‖ so the recovered decay is within one bound of γ.
            let bound = f.phi().lipschitz_bound(p).unwrap();
            assert!(d.gamma <= f.gamma() + bound + 1e-9);
            assert!(d.gamma >= f.gamma() - bound - 1e-9);
            assert!(d.max_residual_norm <= d.gamma + 1e-8);
            let x = [0.1, 0.2, -0.3];
            let back: Vec<f64> = d.residual(&x).iter().zip(&x).map(|(r, xi)| r - d.gamma * xi).collect();
            for (a, b) in back.iter().zip(f.eval(&x)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn certify_simple_linear_fields() {
        let contracting = LinearField(DenseMatrix::scaled_identity(2, -1.0));
        let r = certify_wic(&contracting, PNorm::Inf, None, SamplingBox::new(5.0), 100, 0).unwrap();
        assert_eq!(r.max_mu, -1.0);
        assert!(r.contracting(0.0));
        let expanding = LinearField(DenseMatrix::identity(2));
        let r = certify_wic(&expanding, PNorm::One, None, SamplingBox::new(5.0), 100, 0).unwrap();
        assert_eq!(r.max_mu, 1.0);
        assert!(!r.contracting(0.0));
        assert_eq!(r.argmax, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_weight_matches_unweighted() {
        let f = random_field(3, 3, 0.0, PNorm::One, false);
        let eye = DenseMatrix::identity(3);
        let a = certify_wic(&f, PNorm::One, None, SamplingBox::new(4.0), 200, 9).unwrap();
        let b = certify_wic(&f, PNorm::One, Some(&eye), SamplingBox::new(4.0), 200, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = random_field(7, 3, 0.1 + 1e-17, PNorm::One, true);
        let back = WicField::from_json_str(&f.to_json_string()).unwrap();
        assert_eq!(back, f);
        let dense = synthesize(
            f.phi().clone(),
            0.3,
            PNorm::One,
            Some(DenseMatrix::from_rows(&[vec![1.0, 0.1, 0.0], vec![0.0, 2.0, 0.0], vec![0.3, 0.0, 1.0]]).unwrap()),
        )
        .unwrap();
        assert_eq!(WicField::from_json_str(&dense.to_json_string()).unwrap(), dense);
    }
}
