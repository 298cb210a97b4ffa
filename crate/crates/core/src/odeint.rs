//! Fixed-step RK4 integration, rollouts, unrolled reverse sweeps, and
//! pairwise contraction monitoring.

use std::fmt::Write as _;

use thiserror::Error;

use crate::densela::{DenseMatrix, DenseVector, PNorm};
use crate::wicfield::{FieldGrad, VectorField, WicField};

/// Steps used by training rollouts.
pub const TRAIN_STEPS: usize = 20;
/// Steps used by certification and monitoring rollouts.
pub const MONITOR_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("integration blew up (non-finite state) at t = {time}")]
    BlowUp { time: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DenseVector>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DenseVector] {
        &self.states
    }

    pub fn endpoint(&self) -> &DenseVector {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t,x0,...,x{n-1}` with 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.dim());
        let mut out = String::from("t");
        for i in 0..n {
            write!(out, ",x{i}").unwrap();
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{}", fmt17(*t)).unwrap();
            for v in x.iter() {
                write!(out, ",{}", fmt17(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_finite(v: &[f64], time: f64) -> Result<(), OdeError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OdeError::BlowUp { time })
    }
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// Classical four-stage Runge–Kutta step. A blow-up reports `t = h`
/// (rollouts rewrite it to the absolute time).
pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>, OdeError> {
    if !(h > 0.0) {
        return Err(OdeError::InvalidArgument(format!("step size {h} must be positive")));
    }
    check_finite(x, 0.0)?;
    let k1 = f.eval(x);
    let k2 = f.eval(&axpy(x, 0.5 * h, &k1));
    let k3 = f.eval(&axpy(x, 0.5 * h, &k2));
    let k4 = f.eval(&axpy(x, h, &k3));
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    check_finite(&next, h)?;
    Ok(next)
}

fn check_horizon(t_final: f64, n_steps: usize) -> Result<f64, OdeError> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(OdeError::InvalidArgument(format!("horizon {t_final} must be positive")));
    }
    if n_steps == 0 {
        return Err(OdeError::InvalidArgument("need at least one step".into()));
    }
    Ok(t_final / n_steps as f64)
}

fn step_at<F: VectorField + ?Sized>(f: &F, x: &[f64], h: f64, t: f64) -> Result<Vec<f64>, OdeError> {
    rk4_step(f, x, h).map_err(|e| match e {
        OdeError::BlowUp { time } => OdeError::BlowUp { time: t + time },
        other => other,
    })
}

/// `n_steps` equal RK4 steps over `[0, t_final]`.
pub fn rollout<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    t_final: f64,
    n_steps: usize,
) -> Result<Trajectory, OdeError> {
    let h = check_horizon(t_final, n_steps)?;
    check_finite(x0, 0.0)?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(DenseVector::from_raw(x.clone()));
    for k in 0..n_steps {
        let t = k as f64 * h;
        x = step_at(f, &x, h, t)?;
        times.push(if k + 1 == n_steps { t_final } else { (k + 1) as f64 * h });
        states.push(DenseVector::from_raw(x.clone()));
    }
    Ok(Trajectory { times, states })
}

/// Endpoint of [`rollout`] without storing the path.
pub fn flow<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    t_final: f64,
    n_steps: usize,
) -> Result<Vec<f64>, OdeError> {
    let h = check_horizon(t_final, n_steps)?;
    check_finite(x0, 0.0)?;
    let mut x = x0.to_vec();
    for k in 0..n_steps {
        x = step_at(f, &x, h, k as f64 * h)?;
    }
    Ok(x)
}

/// Gradients of `⟨cotangent, x(T)⟩` through the unrolled RK4 map.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGrad {
    pub endpoint: Vec<f64>,
    pub x0: Vec<f64>,
    /// In the order of [`WicField::params`], including the path through `γ`.
    pub params: Vec<f64>,
    pub epsilon: f64,
}

/// Exact reverse sweep of the discrete flow (discretize-then-optimize).
pub fn rollout_vjp(
    field: &WicField,
    x0: &[f64],
    t_final: f64,
    n_steps: usize,
    cotangent: &[f64],
) -> Result<RolloutGrad, OdeError> {
    let h = check_horizon(t_final, n_steps)?;
    if cotangent.len() != field.dim() || x0.len() != field.dim() {
        return Err(OdeError::InvalidArgument("dimension mismatch".into()));
    }
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(x0.to_vec());
    for k in 0..n_steps {
        let next = step_at(field, &states[k], h, k as f64 * h)?;
        states.push(next);
    }
    let mut acc = FieldGrad::zeros(field);
    let mut adj = cotangent.to_vec();
    for k in (0..n_steps).rev() {
        let x = &states[k];
        let k1 = field.eval(x);
        let s2 = axpy(x, 0.5 * h, &k1);
        let k2 = field.eval(&s2);
        let s3 = axpy(x, 0.5 * h, &k2);
        let k3 = field.eval(&s3);
        let s4 = axpy(x, h, &k3);

        let dk4: Vec<f64> = adj.iter().map(|a| a * h / 6.0).collect();
        let mut dk3: Vec<f64> = adj.iter().map(|a| a * h / 3.0).collect();
        let mut dk2 = dk3.clone();
        let mut dk1 = dk4.clone();
        let mut dx = adj;

        let g4 = field.vjp(&s4, &dk4);
        add(&mut dx, &g4.x);
        add_scaled(&mut dk3, &g4.x, h);
        let g3 = field.vjp(&s3, &dk3);
        add(&mut dx, &g3.x);
        add_scaled(&mut dk2, &g3.x, 0.5 * h);
        let g2 = field.vjp(&s2, &dk2);
        add(&mut dx, &g2.x);
        add_scaled(&mut dk1, &g2.x, 0.5 * h);
        let g1 = field.vjp(x, &dk1);
        add(&mut dx, &g1.x);

        for g in [&g4, &g3, &g2, &g1] {
            acc.add_assign(g);
        }
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::BlowUp { time: k as f64 * h });
        }
        adj = dx;
    }
    let (params, epsilon) = field.param_gradient(&acc);
    Ok(RolloutGrad {
        endpoint: states.pop().expect("non-empty"),
        x0: adj,
        params,
        epsilon,
    })
}

fn add(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn add_scaled(a: &mut [f64], b: &[f64], s: f64) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
}

/// `d_k = ‖W(x_a(t_k) − x_b(t_k))‖_p` along two rollouts.
pub fn contraction_monitor<F: VectorField + ?Sized>(
    f: &F,
    x0a: &[f64],
    x0b: &[f64],
    p: PNorm,
    w: Option<&DenseMatrix>,
    t_final: f64,
    n_steps: usize,
) -> Result<Vec<f64>, OdeError> {
    let a = rollout(f, x0a, t_final, n_steps)?;
    let b = rollout(f, x0b, t_final, n_steps)?;
    Ok(a.states()
        .iter()
        .zip(b.states())
        .map(|(xa, xb)| {
            let d: Vec<f64> = xa.iter().zip(xb.iter()).map(|(u, v)| u - v).collect();
            match w {
                Some(m) => p.vector_norm(&m.matvec(&d)),
                None => p.vector_norm(&d),
            }
        })
        .collect())
}
