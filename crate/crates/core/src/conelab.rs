//! Eigenvalue cones for 2x2 matrices.
//!
//! A real 2x2 diagonalizable `A` admits an invertible `W` with
//! `μ₁(WAW⁻¹) ≤ 0` (equivalently `μ∞`) exactly when every eigenvalue
//! `α + βi` satisfies `α ≤ 0` and `|β| ≤ −α`. In trace/determinant
//! coordinates `τ = tr A`, `δ = det A` this is the region `τ ≤ 0`,
//! `0 < δ ≤ τ²/2`, strictly smaller than the Hurwitz quadrant.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densela::{eig2x2, invert, matrix_measure, ComplexPair, DenseMatrix, LinalgError, PNorm};
use crate::plot::Svg;
use crate::seed::{derive_seed, standard_normal, stream_rng, streams};

/// Tolerance for landing on the parabola `δ = τ²/2`.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Largest witness measure still counted as `≤ 0`.
pub const WITNESS_TOL: f64 = 1e-10;
/// Random search rejects candidates above this 1-norm condition number.
pub const SEARCH_MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("expected a 2x2 matrix, got {rows}x{cols}")]
    NotTwoByTwo { rows: usize, cols: usize },
    #[error("matrix is not diagonalizable (repeated eigenvalue {eigenvalue} with a Jordan block)")]
    NotDiagonalizable { eigenvalue: f64 },
    #[error("the eigenvalue cone is only defined for p = 1 and p = inf")]
    UnsupportedNorm,
    #[error("search budget must be at least 1")]
    EmptyBudget,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `τ > 0`, `δ ≤ 0`, or purely imaginary eigenvalues.
    Unstable,
    /// Hurwitz but outside the cone: `τ < 0`, `δ > τ²/2`.
    Stable2NormOnly,
    /// `τ < 0`, `0 < δ < τ²/2`.
    WicCone,
    /// Within [`BOUNDARY_TOL`] of `δ = τ²/2` (still inside the cone).
    Boundary,
}

impl Region {
    /// Whether some weighting makes the matrix weakly infinitesimally contracting.
    pub fn admits_witness(self) -> bool {
        matches!(self, Region::WicCone | Region::Boundary)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Unstable => "unstable",
            Region::Stable2NormOnly => "stable_2norm_only",
            Region::WicCone => "wic_cone",
            Region::Boundary => "boundary",
        })
    }
}

/// `α ≤ 0` and `|β| ≤ −α` for both eigenvalues.
pub fn cone_membership(eigs: &ComplexPair) -> bool {
    [(eigs.re1, eigs.im1), (eigs.re2, eigs.im2)].iter().all(|&(a, b)| a <= 0.0 && b.abs() <= -a)
}

pub fn trace_det_classify(tau: f64, delta: f64) -> Region {
    if tau > 0.0 || delta <= 0.0 || tau == 0.0 {
        return Region::Unstable;
    }
    let edge = tau * tau / 2.0;
    if (delta - edge).abs() <= BOUNDARY_TOL {
        Region::Boundary
    } else if delta < edge {
        Region::WicCone
    } else {
        Region::Stable2NormOnly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub eigenvalues: ComplexPair,
    pub in_cone: bool,
    pub tau: f64,
    pub delta: f64,
    pub region: Region,
}

pub fn cone_verdict(a: &DenseMatrix) -> Result<ConeVerdict, ConeError> {
    check_2x2(a)?;
    let eigenvalues = eig2x2(a)?;
    let tau = a.trace();
    let delta = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    Ok(ConeVerdict {
        in_cone: cone_membership(&eigenvalues),
        eigenvalues,
        tau,
        delta,
        region: trace_det_classify(tau, delta),
    })
}

fn check_2x2(a: &DenseMatrix) -> Result<(), ConeError> {
    if a.rows() != 2 || a.cols() != 2 {
        return Err(ConeError::NotTwoByTwo { rows: a.rows(), cols: a.cols() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub w: DenseMatrix,
    /// `μ_p(W·A·W⁻¹)`.
    pub achieved_mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessOutcome {
    Found(Witness),
    /// The eigenvalue `re + im·i` lies outside the cone.
    Violation { re: f64, im: f64 },
}

impl WitnessOutcome {
    pub fn witness(&self) -> Option<&Witness> {
        match self {
            WitnessOutcome::Found(w) => Some(w),
            WitnessOutcome::Violation { .. } => None,
        }
    }
}

pub fn weighted_measure(a: &DenseMatrix, w: &DenseMatrix, p: PNorm) -> Result<f64, LinalgError> {
    let w_inv = invert(w)?;
    matrix_measure(&w.matmul(a)?.matmul(&w_inv)?, p)
}

/// Builds `W` from the real canonical form of `A`.
///
/// Real eigenvalues give `WAW⁻¹ = diag(λ₁, λ₂)`; a complex pair `α ± βi`
/// gives `WAW⁻¹ = [[α, β], [−β, α]]`, whose 1- and ∞-measures are `α + |β|`.
pub fn wwic_witness_2x2(a: &DenseMatrix, p: PNorm) -> Result<WitnessOutcome, ConeError> {
    check_2x2(a)?;
    if p == PNorm::Two {
        return Err(ConeError::UnsupportedNorm);
    }
    let eigs = eig2x2(a)?;
    if !cone_membership(&eigs) {
        let (re, im) = if eigs.re1 > 0.0 || eigs.im1.abs() > -eigs.re1 {
            (eigs.re1, eigs.im1)
        } else {
            (eigs.re2, eigs.im2)
        };
        return Ok(WitnessOutcome::Violation { re, im });
    }
    let (a11, b, c, d) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let disc = (a11 - d) * (a11 - d) + 4.0 * b * c;

    let p_mat = if disc.abs() <= 1e-14 * scale * scale {
        let lambda = 0.5 * (a11 + d);
        let off = [a11 - lambda, b, c, d - lambda].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if off > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(ConeError::NotDiagonalizable { eigenvalue: lambda });
        }
        DenseMatrix::identity(2)
    } else if eigs.is_real() {
        if b == 0.0 && c == 0.0 {
            DenseMatrix::identity(2)
        } else {
            let (l1, l2) = (eigs.re1, eigs.re2);
            let cols = if b.abs() >= c.abs() {
                [(b, l1 - a11), (b, l2 - a11)]
            } else {
                [(l1 - d, c), (l2 - d, c)]
            };
            DenseMatrix::from_rows(&[vec![cols[0].0, cols[1].0], vec![cols[0].1, cols[1].1]])?
        }
    } else {
        let (alpha, beta) = (eigs.re1, eigs.im1);
        // v = (b, α − a + βi) = u + i·w solves A v = (α + βi) v.
        DenseMatrix::from_rows(&[vec![b, 0.0], vec![alpha - a11, beta]])?
    };
    let w = invert(&p_mat).map_err(|e| match e {
        LinalgError::Singular { .. } => ConeError::NotDiagonalizable { eigenvalue: eigs.re1 },
        other => other.into(),
    })?;
    let achieved_mu = matrix_measure(&w.matmul(a)?.matmul(&p_mat)?, p)?;
    Ok(WitnessOutcome::Found(Witness { w, achieved_mu }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub min_mu: f64,
    pub best_w: DenseMatrix,
    pub evaluated: usize,
}

/// Minimum of `μ_p(WAW⁻¹)` over `W = I` followed by `budget − 1` random
/// Gaussian `W` with condition number at most [`SEARCH_MAX_CONDITION`].
/// Evidence only: a positive minimum is consistent with the cone
/// obstruction but proves nothing.
pub fn wwic_random_search(a: &DenseMatrix, p: PNorm, budget: usize, seed: u64) -> Result<SearchResult, ConeError> {
    check_2x2(a)?;
    if budget == 0 {
        return Err(ConeError::EmptyBudget);
    }
    let mut best = SearchResult { min_mu: matrix_measure(a, p)?, best_w: DenseMatrix::identity(2), evaluated: 1 };
    let mut rng = stream_rng(seed, streams::SEARCH);
    while best.evaluated < budget {
        let w = DenseMatrix::new(2, 2, (0..4).map(|_| standard_normal(&mut rng)).collect())?;
        let Ok(w_inv) = invert(&w) else { continue };
        if w.norm1() * w_inv.norm1() > SEARCH_MAX_CONDITION {
            continue;
        }
        let mu = matrix_measure(&w.matmul(a)?.matmul(&w_inv)?, p)?;
        best.evaluated += 1;
        if mu < best.min_mu {
            best.min_mu = mu;
            best.best_w = w;
        }
    }
    Ok(best)
}

/// Evenly spaced values `start, start + step, …` up to `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, ConeError> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(ConeError::InvalidGrid(format!("{start}:{stop}:{step}")));
        }
        let axis = Self { start, stop, step };
        if axis.len() > 1_000_000 {
            return Err(ConeError::InvalidGrid("more than 10^6 points on one axis".into()));
        }
        Ok(axis)
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }
}

impl FromStr for GridAxis {
    type Err = ConeError;

    /// `start:stop:step`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || ConeError::InvalidGrid(format!("expected start:stop:step, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts.iter().map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub tau: GridAxis,
    pub delta: GridAxis,
    pub p: PNorm,
    /// Every `stride`-th cell along each axis gets a witness check.
    pub stride: usize,
    pub search_budget: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub tau: f64,
    pub delta: f64,
    pub region: Region,
    /// Constructive witness measure, or the random-search minimum when no
    /// witness exists.
    pub witness_mu: Option<f64>,
    /// Classification and witness agree; `None` when unchecked or on `δ = 0`.
    pub agrees: Option<bool>,
}

/// Companion form for real eigenvalues, scaled rotation for complex ones.
pub fn representative(tau: f64, delta: f64) -> DenseMatrix {
    let quarter = tau * tau / 4.0;
    let rows = if delta < quarter {
        [vec![0.0, 1.0], vec![-delta, tau]]
    } else {
        let s = (delta - quarter).sqrt();
        [vec![tau / 2.0, s], vec![-s, tau / 2.0]]
    };
    DenseMatrix::from_rows(&rows).expect("finite grid values")
}

fn check_cell(tau: f64, delta: f64, cfg: &ScanConfig, index: u64) -> Result<(Option<f64>, Option<bool>), ConeError> {
    let a = representative(tau, delta);
    let mu = match wwic_witness_2x2(&a, cfg.p)? {
        WitnessOutcome::Found(w) => w.achieved_mu,
        WitnessOutcome::Violation { .. } => {
            wwic_random_search(&a, cfg.p, cfg.search_budget, derive_seed(cfg.seed, index))?.min_mu
        }
    };
    let agrees = (delta != 0.0).then(|| trace_det_classify(tau, delta).admits_witness() == (mu <= WITNESS_TOL));
    Ok((Some(mu), agrees))
}

pub fn cone_scan(cfg: &ScanConfig) -> Result<Vec<ScanCell>, ConeError> {
    if cfg.stride == 0 {
        return Err(ConeError::InvalidGrid("stride must be at least 1".into()));
    }
    if cfg.p == PNorm::Two {
        return Err(ConeError::UnsupportedNorm);
    }
    let (nt, nd) = (cfg.tau.len(), cfg.delta.len());
    (0..nt * nd)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nd, k % nd);
            let (tau, delta) = (cfg.tau.value(i), cfg.delta.value(j));
            let region = trace_det_classify(tau, delta);
            let (witness_mu, agrees) = if i % cfg.stride == 0 && j % cfg.stride == 0 {
                check_cell(tau, delta, cfg, k as u64)?
            } else {
                (None, None)
            };
            Ok(ScanCell { tau, delta, region, witness_mu, agrees })
        })
        .collect()
}

/// `tau,delta,region,witness_mu`, empty `witness_mu` for unchecked cells.
pub fn scan_to_csv(cells: &[ScanCell]) -> String {
    let mut out = String::from("tau,delta,region,witness_mu\n");
    for c in cells {
        let mu = c.witness_mu.map(|m| format!("{m:.17e}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", c.tau, c.delta, c.region, mu));
    }
    out
}

/// Region map with the parabolas `δ = τ²/2` and `δ = τ²/4`.
pub fn scan_to_svg(cells: &[ScanCell], cfg: &ScanConfig) -> String {
    let (t0, t1) = (cfg.tau.start, cfg.tau.value(cfg.tau.len() - 1));
    let (d0, d1) = (cfg.delta.start, cfg.delta.value(cfg.delta.len() - 1));
    let mut svg = Svg::new(640.0, 480.0, (t0, t1), (d0, d1));
    let (ht, hd) = (cfg.tau.step / 2.0, cfg.delta.step / 2.0);
    for c in cells {
        let fill = match c.region {
            Region::Unstable => "#f4c7c3",
            Region::Stable2NormOnly => "#fce8b2",
            Region::WicCone | Region::Boundary => "#b7e1cd",
        };
        let clip = |v: f64, lo: f64, hi: f64| v.clamp(lo, hi);
        svg.rect(
            (clip(c.tau - ht, t0, t1), clip(c.delta - hd, d0, d1)),
            (clip(c.tau + ht, t0, t1), clip(c.delta + hd, d0, d1)),
            fill,
        );
    }
    for (k, colour) in [(2.0, "#0b6e4f"), (4.0, "#555555")] {
        let pts: Vec<(f64, f64)> = (0..=200)
            .map(|i| t0 + (t1 - t0) * i as f64 / 200.0)
            .map(|t| (t, t * t / k))
            .map(|(t, d)| if d >= d0 && d <= d1 { (t, d) } else { (f64::NAN, f64::NAN) })
            .collect();
        svg.polyline(&pts, colour, 2.0);
    }
    svg.axes("trace τ", "det δ");
    svg.finish()
}
