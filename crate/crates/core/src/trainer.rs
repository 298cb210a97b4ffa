//! Losses, optimizers and the full-batch training loop.
//!
//! Every iterate is a [`WicField`], so the model is contracting by
//! construction at every step; training only moves the network weights and
//! the norm weight `W`.

use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{DenseMatrix, PNorm};
use crate::expkit::PairDataset;
use crate::lipnet::{ActivationKind, LipschitzNet, NetError};
use crate::odeint::{flow, rollout_vjp, OdeError, TRAIN_STEPS};
use crate::seed::{derive_seed, streams};
use crate::wicfield::{FieldError, SamplingBox, WicField, Weighting};

/// Ridge added to the residual covariance.
pub const DET_RIDGE: f64 = 1e-8;
/// Slack allowed in the per-step safety certificate.
pub const SAFETY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("safety certificate failed after step {step}: sampled measure {mu} > {bound}")]
    Safety { step: usize, mu: f64, bound: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Cocob,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `det(Σ̂ + λI)` of the endpoint residuals.
    DetResidual,
    /// `log det(Σ̂ + λI)`.
    LogDetResidual,
    /// Mean squared endpoint error.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Identity,
    DiagPositive,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default)]
    pub seed: u64,
    pub epsilon: f64,
    pub p: PNorm,
    pub width: usize,
    pub activation: ActivationKind,
    pub weight_mode: WeightMode,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_alpha")]
    pub cocob_alpha: f64,
    /// Test loss is recorded every this many steps (and at the end).
    #[serde(default = "default_test_every")]
    pub test_every: usize,
    #[serde(default = "default_safety_every")]
    pub safety_every: usize,
    #[serde(default = "default_safety_samples")]
    pub safety_samples: usize,
    #[serde(default = "default_safety_box")]
    pub safety_box: f64,
}

fn default_n_steps() -> usize {
    TRAIN_STEPS
}
fn default_lr() -> f64 {
    1e-3
}
fn default_alpha() -> f64 {
    100.0
}
fn default_test_every() -> usize {
    10
}
fn default_safety_every() -> usize {
    100
}
fn default_safety_samples() -> usize {
    100
}
fn default_safety_box() -> f64 {
    10.0
}

impl TrainConfig {
    /// Planar flow fitting: p = 1, sin-split, diagonal weight, coin betting.
    pub fn toy() -> Self {
        Self {
            steps: 400,
            optimizer: OptimizerKind::Cocob,
            loss: LossKind::DetResidual,
            horizon: 1.0,
            n_steps: TRAIN_STEPS,
            seed: 0,
            epsilon: 0.01,
            p: PNorm::One,
            width: 40,
            activation: ActivationKind::SinSplit,
            weight_mode: WeightMode::DiagPositive,
            learning_rate: default_lr(),
            cocob_alpha: default_alpha(),
            test_every: default_test_every(),
            safety_every: default_safety_every(),
            safety_samples: default_safety_samples(),
            safety_box: default_safety_box(),
        }
    }

    /// Opinion-network fitting: p = ∞, absolute value, no weight.
    pub fn opinion() -> Self {
        Self {
            steps: 2000,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::Mse,
            horizon: 2.0,
            p: PNorm::Inf,
            activation: ActivationKind::Abs,
            weight_mode: WeightMode::Identity,
            ..Self::toy()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("T must be positive");
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1");
        }
        if self.width == 0 {
            return bad("width must be at least 1");
        }
        if self.p == PNorm::Two {
            return bad("p must be 1 or inf");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be a finite nonnegative number");
        }
        if !(self.learning_rate > 0.0) || !(self.cocob_alpha > 0.0) {
            return bad("optimizer constants must be positive");
        }
        if self.test_every == 0 || self.safety_every == 0 || self.safety_samples == 0 {
            return bad("test_every, safety_every and safety_samples must be at least 1");
        }
        Ok(())
    }
}

fn check_residuals<R: Deref<Target = [f64]>>(residuals: &[R]) -> Result<usize, TrainError> {
    let dim = residuals.first().map(|r| r.len()).ok_or_else(|| TrainError::Data("no residuals".into()))?;
    if residuals.iter().any(|r| r.len() != dim) {
        return Err(TrainError::Data("residuals of mixed dimension".into()));
    }
    if residuals.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(TrainError::Data("non-finite residual".into()));
    }
    Ok(dim)
}

/// `(1/N)Σ r rᵀ + λI` as a lower Cholesky factor.
fn covariance_cholesky<R: Deref<Target = [f64]>>(residuals: &[R], dim: usize) -> DenseMatrix {
    let n = residuals.len() as f64;
    let mut m = DenseMatrix::scaled_identity(dim, DET_RIDGE);
    for r in residuals {
        for i in 0..dim {
            for j in 0..=i {
                m[(i, j)] += r[i] * r[j] / n;
            }
        }
    }
    let mut l = DenseMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let d = d.max(f64::MIN_POSITIVE).sqrt();
        l[(j, j)] = d;
        for i in j + 1..dim {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    l
}

fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

fn log_det_from(l: &DenseMatrix) -> f64 {
    (0..l.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

/// `det((1/N)Σ r rᵀ + λI)`. Fewer residuals than dimensions leave the
/// covariance rank deficient; the ridge keeps the value defined.
pub fn det_residual_loss<R: Deref<Target = [f64]>>(residuals: &[R]) -> Result<f64, TrainError> {
    let dim = check_residuals(residuals)?;
    Ok(log_det_from(&covariance_cholesky(residuals, dim)).exp())
}

/// `∂L/∂r_i = (2/N)·det(M)·M⁻¹r_i`.
pub fn det_residual_grad<R: Deref<Target = [f64]>>(residuals: &[R]) -> Result<Vec<Vec<f64>>, TrainError> {
    let dim = check_residuals(residuals)?;
    let l = covariance_cholesky(residuals, dim);
    let scale = 2.0 * log_det_from(&l).exp() / residuals.len() as f64;
    Ok(residuals.iter().map(|r| cholesky_solve(&l, r).into_iter().map(|v| scale * v).collect()).collect())
}

pub fn log_det_residual_loss<R: Deref<Target = [f64]>>(residuals: &[R]) -> Result<f64, TrainError> {
    let dim = check_residuals(residuals)?;
    Ok(log_det_from(&covariance_cholesky(residuals, dim)))
}

/// `∂L/∂r_i = (2/N)·M⁻¹r_i`.
pub fn log_det_residual_grad<R: Deref<Target = [f64]>>(residuals: &[R]) -> Result<Vec<Vec<f64>>, TrainError> {
    let dim = check_residuals(residuals)?;
    let l = covariance_cholesky(residuals, dim);
    let scale = 2.0 / residuals.len() as f64;
    Ok(residuals.iter().map(|r| cholesky_solve(&l, r).into_iter().map(|v| scale * v).collect()).collect())
}

/// `(1/N)Σ‖pred_i − target_i‖₂²`.
pub fn mse_loss<R: Deref<Target = [f64]>, S: Deref<Target = [f64]>>(pred: &[R], target: &[S]) -> Result<f64, TrainError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(TrainError::Data(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    let mut total = 0.0;
    for (a, b) in pred.iter().zip(target) {
        if a.len() != b.len() {
            return Err(TrainError::Data("prediction and target dimensions differ".into()));
        }
        total += a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    Ok(total / pred.len() as f64)
}

fn mse_grad(residuals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let s = 2.0 / residuals.len() as f64;
    residuals.iter().map(|r| r.iter().map(|v| s * v).collect()).collect()
}

/// Loss of `pred − target` and its gradient with respect to `pred`.
pub fn loss_and_grad(kind: LossKind, residuals: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
    check_residuals(residuals)?;
    Ok(match kind {
        LossKind::Mse => {
            let n = residuals.len() as f64;
            let v = residuals.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / n;
            (v, mse_grad(residuals))
        }
        LossKind::DetResidual => (det_residual_loss(residuals)?, det_residual_grad(residuals)?),
        LossKind::LogDetResidual => (log_det_residual_loss(residuals)?, log_det_residual_grad(residuals)?),
    })
}

pub fn loss_value(kind: LossKind, residuals: &[Vec<f64>]) -> Result<f64, TrainError> {
    match kind {
        LossKind::Mse => {
            check_residuals(residuals)?;
            let n = residuals.len() as f64;
            Ok(residuals.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>()).sum::<f64>() / n)
        }
        LossKind::DetResidual => det_residual_loss(residuals),
        LossKind::LogDetResidual => log_det_residual_loss(residuals),
    }
}

/// Coin-betting state, one set of accumulators per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CocobState {
    alpha: f64,
    w1: Vec<f64>,
    max_grad: Vec<f64>,
    abs_sum: Vec<f64>,
    reward: Vec<f64>,
    grad_sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Cocob(CocobState),
    Adam(AdamState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub state: OptimizerState,
    pub step: usize,
}

impl Optimizer {
    /// Coin betting anchored at `initial`.
    pub fn cocob(initial: &[f64], alpha: f64) -> Self {
        let n = initial.len();
        Self {
            state: OptimizerState::Cocob(CocobState {
                alpha,
                w1: initial.to_vec(),
                max_grad: vec![1e-8; n],
                abs_sum: vec![0.0; n],
                reward: vec![0.0; n],
                grad_sum: vec![0.0; n],
            }),
            step: 0,
        }
    }

    pub fn adam(n: usize, lr: f64) -> Self {
        Self { state: OptimizerState::Adam(AdamState { lr, m: vec![0.0; n], v: vec![0.0; n] }), step: 0 }
    }

    pub fn for_config(cfg: &TrainConfig, initial: &[f64]) -> Self {
        match cfg.optimizer {
            OptimizerKind::Cocob => Self::cocob(initial, cfg.cocob_alpha),
            OptimizerKind::Adam => Self::adam(initial.len(), cfg.learning_rate),
        }
    }

    /// One in-place update.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        if grads.len() != params.len() {
            return Err(TrainError::Data(format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient { step: self.step });
        }
        self.step += 1;
        match &mut self.state {
            OptimizerState::Cocob(s) => {
                for i in 0..params.len() {
                    let g = -grads[i];
                    s.max_grad[i] = s.max_grad[i].max(g.abs());
                    s.abs_sum[i] += g.abs();
                    s.reward[i] = (s.reward[i] + (params[i] - s.w1[i]) * g).max(0.0);
                    s.grad_sum[i] += g;
                    let l = s.max_grad[i];
                    let denom = l * (s.abs_sum[i] + l).max(s.alpha * l);
                    params[i] = s.w1[i] + s.grad_sum[i] / denom * (l + s.reward[i]);
                }
            }
            OptimizerState::Adam(s) => {
                let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                let t = self.step as i32;
                let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
                for i in 0..params.len() {
                    s.m[i] = b1 * s.m[i] + (1.0 - b1) * grads[i];
                    s.v[i] = b2 * s.v[i] + (1.0 - b2) * grads[i] * grads[i];
                    params[i] -= s.lr * (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Training loss before update `k` for `k < steps`, then after the last update.
    pub train_loss: Vec<f64>,
    /// `(step, loss)` on the test set.
    pub test_loss: Vec<(usize, f64)>,
    /// `(step, largest sampled weighted measure)` from the periodic safety check.
    pub safety: Vec<(usize, f64)>,
    pub field: WicField,
}

impl TrainHistory {
    pub fn initial_train_loss(&self) -> Option<f64> {
        self.train_loss.first().copied()
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }

    pub fn initial_test_loss(&self) -> Option<f64> {
        self.test_loss.first().map(|t| t.1)
    }

    pub fn final_test_loss(&self) -> Option<f64> {
        self.test_loss.last().map(|t| t.1)
    }

    /// `step,train_loss,test_loss`, test column empty where not measured.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,train_loss,test_loss\n");
        let mut tests = self.test_loss.iter().peekable();
        for (k, l) in self.train_loss.iter().enumerate() {
            let t = match tests.peek() {
                Some(&&(s, v)) if s == k => {
                    tests.next();
                    format!("{v:.17e}")
                }
                _ => String::new(),
            };
            out.push_str(&format!("{k},{l:.17e},{t}\n"));
        }
        out
    }
}

/// The untrained field for `cfg` on `dim`-dimensional states.
pub fn initial_field(cfg: &TrainConfig, dim: usize) -> Result<WicField, TrainError> {
    cfg.validate()?;
    let net = LipschitzNet::init(&[dim, cfg.width, dim], cfg.activation, cfg.p, derive_seed(cfg.seed, streams::NET_INIT))?;
    let weighting = match cfg.weight_mode {
        WeightMode::Identity => Weighting::Identity,
        WeightMode::DiagPositive => Weighting::DiagPositive { log_diag: vec![0.0; dim] },
        WeightMode::Dense => Weighting::dense(DenseMatrix::identity(dim)).map_err(FieldError::from)?,
    };
    Ok(WicField::new(net, cfg.epsilon, cfg.p, weighting)?)
}

fn check_data(data: &PairDataset, dim: usize) -> Result<(), TrainError> {
    if data.is_empty() {
        return Err(TrainError::Data("empty dataset".into()));
    }
    if data.dim() != dim {
        return Err(TrainError::Data(format!("dataset dim {} for a {dim}-dimensional field", data.dim())));
    }
    Ok(())
}

/// Endpoint residuals `x̂(T) − x(T)` under `field`.
pub fn residuals(field: &WicField, data: &PairDataset, n_steps: usize) -> Result<Vec<Vec<f64>>, TrainError> {
    data.pairs
        .par_iter()
        .map(|(x0, xt)| {
            let end = flow(field, x0, data.horizon, n_steps)?;
            Ok(end.iter().zip(xt.iter()).map(|(a, b)| a - b).collect())
        })
        .collect()
}

pub fn dataset_loss(field: &WicField, data: &PairDataset, kind: LossKind, n_steps: usize) -> Result<f64, TrainError> {
    loss_value(kind, &residuals(field, data, n_steps)?)
}

/// Loss and its gradient in the order of [`WicField::params`].
pub fn loss_gradient(
    field: &WicField,
    data: &PairDataset,
    kind: LossKind,
    n_steps: usize,
) -> Result<(f64, Vec<f64>), TrainError> {
    let res = residuals(field, data, n_steps)?;
    let (loss, cot) = loss_and_grad(kind, &res)?;
    let grads = data
        .pairs
        .par_iter()
        .zip(cot.par_iter())
        .map(|((x0, _), c)| rollout_vjp(field, x0, data.horizon, n_steps, c).map(|g| g.params))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = vec![0.0; field.num_params()];
    for g in &grads {
        total.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, total))
}

/// Trains a fresh field built from `cfg`.
pub fn train(cfg: &TrainConfig, train_set: &PairDataset, test_set: Option<&PairDataset>) -> Result<TrainHistory, TrainError> {
    let field = initial_field(cfg, train_set.dim())?;
    train_field(cfg, field, train_set, test_set)
}

/// Trains `field` in place of the default initialization.
pub fn train_field(
    cfg: &TrainConfig,
    mut field: WicField,
    train_set: &PairDataset,
    test_set: Option<&PairDataset>,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    check_data(train_set, field.dim())?;
    if let Some(t) = test_set {
        check_data(t, field.dim())?;
    }
    let mut history = TrainHistory { train_loss: Vec::new(), test_loss: Vec::new(), safety: Vec::new(), field: field.clone() };
    if cfg.steps == 0 {
        return Ok(history);
    }
    let mut params = field.params();
    let mut opt = Optimizer::for_config(cfg, &params);
    let bound = -field.epsilon() + SAFETY_TOL;
    let cert_seed = derive_seed(cfg.seed, streams::CERTIFY);

    let record_test = |field: &WicField, step: usize, history: &mut TrainHistory| -> Result<(), TrainError> {
        if let Some(t) = test_set {
            let v = dataset_loss(field, t, cfg.loss, cfg.n_steps)?;
            if !v.is_finite() {
                return Err(TrainError::NonFiniteLoss { step });
            }
            history.test_loss.push((step, v));
        }
        Ok(())
    };

    for step in 0..cfg.steps {
        let (loss, grad) = loss_gradient(&field, train_set, cfg.loss, cfg.n_steps)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { step });
        }
        history.train_loss.push(loss);
        if step % cfg.test_every == 0 {
            record_test(&field, step, &mut history)?;
        }
        opt.update(&mut params, &grad)?;
        field = field.with_params(&params)?;

        let done = step + 1;
        if done % cfg.safety_every == 0 || done == cfg.steps {
            let rep = field.certify(SamplingBox::new(cfg.safety_box), cfg.safety_samples, derive_seed(cert_seed, done as u64))?;
            history.safety.push((done, rep.max_mu));
            if rep.max_mu > bound {
                return Err(TrainError::Safety { step: done, mu: rep.max_mu, bound });
            }
        }
    }
    let last = dataset_loss(&field, train_set, cfg.loss, cfg.n_steps)?;
    if !last.is_finite() {
        return Err(TrainError::NonFiniteLoss { step: cfg.steps });
    }
    history.train_loss.push(last);
    record_test(&field, cfg.steps, &mut history)?;
    history.field = field;
    Ok(history)
}
