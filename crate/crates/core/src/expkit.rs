//! Ground-truth systems and `(x(0), x(T))` datasets.
//!
//! The opinion model is `ẋ = −Dx + ν·tanh(Ax)` on a strongly connected
//! weighted digraph with `D = diag(A·1)`; for `ν ≤ 1` it is weakly
//! contracting in the ∞-norm. The toy flow is a linear spiral whose
//! eigenvalues sit inside the 1-norm cone.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{DenseMatrix, DenseVector, LinalgError};
use crate::odeint::{flow, OdeError, MONITOR_STEPS};
use crate::seed::{derive_seed, standard_normal, stream_rng, streams};
use crate::wicfield::{LinearField, VectorField};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("JSON: {0}")]
    Json(String),
}

/// Breadth-first reachability from node 0 in both edge directions.
pub fn strongly_connected(a: &DenseMatrix) -> bool {
    let n = a.rows();
    if n == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let w = if forward { a[(i, j)] } else { a[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionSystem {
    a: DenseMatrix,
    degrees: Vec<f64>,
    nu: f64,
}

impl OpinionSystem {
    pub fn new(a: DenseMatrix, nu: f64) -> Result<Self, ExpError> {
        if !a.is_square() {
            return Err(ExpError::InvalidSystem("adjacency must be square".into()));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(ExpError::InvalidSystem(format!("ν = {nu} outside [0, 1]")));
        }
        let n = a.rows();
        if a.as_slice().iter().any(|w| *w < 0.0) {
            return Err(ExpError::InvalidSystem("adjacency has negative weights".into()));
        }
        if (0..n).any(|i| a[(i, i)] != 0.0) {
            return Err(ExpError::InvalidSystem("adjacency has self-loops".into()));
        }
        if !strongly_connected(&a) {
            return Err(ExpError::InvalidSystem("digraph is not strongly connected".into()));
        }
        let degrees = (0..n).map(|i| a.row(i).iter().sum()).collect();
        Ok(Self { a, degrees, nu })
    }

    pub fn adjacency(&self) -> &DenseMatrix {
        &self.a
    }

    /// Diagonal of `D = diag(A·1)`.
    pub fn out_degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree_matrix(&self) -> DenseMatrix {
        DenseMatrix::diag(&self.degrees).expect("finite degrees")
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn to_json(&self) -> SystemJson {
        SystemJson { a: self.a.as_slice().to_vec(), nu: self.nu }
    }

    pub fn from_json(json: &SystemJson) -> Result<Self, ExpError> {
        let n = (json.a.len() as f64).sqrt().round() as usize;
        if n * n != json.a.len() {
            return Err(ExpError::Json(format!("{} entries is not a square matrix", json.a.len())));
        }
        Self::new(DenseMatrix::new(n, n, json.a.clone())?, json.nu)
    }
}

impl VectorField for OpinionSystem {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.a.matvec(x);
        (0..x.len()).map(|i| -self.degrees[i] * x[i] + self.nu * ax[i].tanh()).collect()
    }

    /// `−D + ν·diag(sech²(Ax))·A`, with `sech² = 1 − tanh²`.
    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        let n = x.len();
        let ax = self.a.matvec(x);
        let mut j = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let t = ax[i].tanh();
            let s = self.nu * (1.0 - t * t);
            for k in 0..n {
                j[(i, k)] = s * self.a[(i, k)];
            }
            j[(i, i)] -= self.degrees[i];
        }
        j
    }
}

/// Checked `−Dx + ν tanh(Ax)`.
pub fn opinion_field(sys: &OpinionSystem, x: &DenseVector) -> Result<DenseVector, ExpError> {
    if x.dim() != sys.dim() {
        return Err(ExpError::InvalidSystem(format!(
            "state of dimension {} for a {}-node network",
            x.dim(),
            sys.dim()
        )));
    }
    DenseVector::new(sys.eval(x)).map_err(Into::into)
}

/// Directed `n`-cycle plus two random chords, weights uniform in
/// `[0.3, 1]`, zero diagonal.
pub fn gen_opinion_system_with(n: usize, nu: f64, seed: u64) -> Result<OpinionSystem, ExpError> {
    if n < 2 {
        return Err(ExpError::InvalidSystem("need at least two nodes".into()));
    }
    let mut rng = stream_rng(seed, streams::SYSTEM);
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, (i + 1) % n)] = rng.random_range(0.3..=1.0);
    }
    let mut free: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && a[(i, j)] == 0.0)
        .collect();
    free.shuffle(&mut rng);
    for &(i, j) in free.iter().take(2) {
        a[(i, j)] = rng.random_range(0.3..=1.0);
    }
    OpinionSystem::new(a, nu)
}

/// The 4-node, `ν = 1` network.
pub fn gen_opinion_system(seed: u64) -> OpinionSystem {
    gen_opinion_system_with(4, 1.0, seed).expect("cycle construction is strongly connected")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub pairs: Vec<(DenseVector, DenseVector)>,
    pub horizon: f64,
}

impl PairDataset {
    pub fn new(pairs: Vec<(DenseVector, DenseVector)>, horizon: f64) -> Result<Self, ExpError> {
        let dim = pairs.first().map_or(0, |p| p.0.dim());
        if pairs.iter().any(|(a, b)| a.dim() != dim || b.dim() != dim) {
            return Err(ExpError::InvalidDataset("inconsistent pair dimensions".into()));
        }
        if !(horizon > 0.0) {
            return Err(ExpError::InvalidDataset(format!("horizon {horizon} must be positive")));
        }
        Ok(Self { pairs, horizon })
    }

    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.0.dim())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_json(&self) -> DatasetJson {
        DatasetJson {
            dim: self.dim(),
            t: self.horizon,
            pairs: self
                .pairs
                .iter()
                .map(|(a, b)| PairJson { x0: a.to_vec(), xt: b.to_vec() })
                .collect(),
        }
    }

    pub fn from_json(json: &DatasetJson) -> Result<Self, ExpError> {
        let pairs = json
            .pairs
            .iter()
            .map(|p| Ok((DenseVector::new(p.x0.clone())?, DenseVector::new(p.xt.clone())?)))
            .collect::<Result<Vec<_>, LinalgError>>()?;
        let ds = Self::new(pairs, json.t)?;
        if !ds.is_empty() && ds.dim() != json.dim {
            return Err(ExpError::InvalidDataset(format!("declared dim {} but pairs have {}", json.dim, ds.dim())));
        }
        Ok(ds)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializable")
    }

    pub fn from_json_str(s: &str) -> Result<Self, ExpError> {
        let json: DatasetJson = serde_json::from_str(s).map_err(|e| ExpError::Json(e.to_string()))?;
        Self::from_json(&json)
    }
}

/// `{dim, T, pairs: [{x0, xT}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetJson {
    pub dim: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub pairs: Vec<PairJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairJson {
    pub x0: Vec<f64>,
    #[serde(rename = "xT")]
    pub xt: Vec<f64>,
}

/// `{A (row-major), nu}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub nu: f64,
}

fn gaussian_pairs<F: VectorField + ?Sized>(
    f: &F,
    count: usize,
    std: f64,
    horizon: f64,
    seed: u64,
) -> Result<PairDataset, ExpError> {
    let dim = f.dim();
    let pairs = (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let x0: Vec<f64> = (0..dim).map(|_| std * standard_normal(&mut rng)).collect();
            let xt = flow(f, &x0, horizon, MONITOR_STEPS)?;
            Ok((DenseVector::from_raw(x0), DenseVector::from_raw(xt)))
        })
        .collect::<Result<Vec<_>, ExpError>>()?;
    PairDataset::new(pairs, horizon)
}

/// Initial conditions `x(0) ~ N(0, 4I)`, endpoints by a 200-step rollout.
pub fn gen_opinion_dataset(
    sys: &OpinionSystem,
    n_train: usize,
    n_test: usize,
    horizon: f64,
    seed: u64,
) -> Result<(PairDataset, PairDataset), ExpError> {
    if n_train == 0 || n_test == 0 {
        return Err(ExpError::InvalidDataset("dataset sizes must be positive".into()));
    }
    let train = gaussian_pairs(sys, n_train, 2.0, horizon, derive_seed(seed, streams::TRAIN_DATA))?;
    let test = gaussian_pairs(sys, n_test, 2.0, horizon, derive_seed(seed, streams::TEST_DATA))?;
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyMode {
    /// Start and end points both uniform in `[−2, 2]²`.
    RandomPairs,
    /// Start uniform in `[−2, 2]²`, end by the flow of [`toy_spiral`].
    GroundTruthFlow,
}

/// `[[−1, 0.8], [−0.8, −1]]`: eigenvalues `−1 ± 0.8i`, `μ₁ = −0.2`.
pub fn toy_spiral() -> DenseMatrix {
    DenseMatrix::from_rows(&[vec![-1.0, 0.8], vec![-0.8, -1.0]]).expect("finite")
}

pub fn gen_toy_pairs(seed: u64, n: usize, mode: ToyMode, horizon: f64) -> Result<PairDataset, ExpError> {
    if n == 0 {
        return Err(ExpError::InvalidDataset("need at least one pair".into()));
    }
    let spiral = LinearField(toy_spiral());
    let base = derive_seed(seed, streams::TRAIN_DATA);
    let pairs = (0..n)
        .map(|i| {
            let mut rng = stream_rng(base, i as u64);
            let mut draw = || -> Vec<f64> { (0..2).map(|_| rng.random_range(-2.0..=2.0)).collect() };
            let x0 = draw();
            let xt = match mode {
                ToyMode::RandomPairs => draw(),
                ToyMode::GroundTruthFlow => flow(&spiral, &x0, horizon, MONITOR_STEPS)?,
            };
            Ok((DenseVector::from_raw(x0), DenseVector::from_raw(xt)))
        })
        .collect::<Result<Vec<_>, ExpError>>()?;
    PairDataset::new(pairs, horizon)
}
