//! Fits a contracting planar flow to endpoint pairs of a spiral.

use wicnode::expkit::{gen_toy_pairs, ToyMode};
use wicnode::odeint::flow;
use wicnode::trainer::{train, TrainConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map_or(Ok(400), |s| s.parse())?;
    let cfg = TrainConfig { steps, ..TrainConfig::toy() };
    let data = gen_toy_pairs(cfg.seed, 20, ToyMode::GroundTruthFlow, cfg.horizon)?;
    let t = std::time::Instant::now();
    let history = train(&cfg, &data, None)?;
    let (first, last) = (history.initial_train_loss().unwrap_or(f64::NAN), history.final_train_loss().unwrap_or(f64::NAN));
    println!("det loss {first:.3e} -> {last:.3e} in {:.1?}", t.elapsed());

    let field = &history.field;
    let mut errors = Vec::new();
    let mut moves = Vec::new();
    for (x0, xt) in &data.pairs {
        let end = flow(field, x0, cfg.horizon, cfg.n_steps)?;
        errors.push(end.iter().zip(xt.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        moves.push(x0.iter().zip(xt.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
    }
    println!("median endpoint error {:.4}, median displacement {:.4}", median(errors), median(moves));
    Ok(())
}
