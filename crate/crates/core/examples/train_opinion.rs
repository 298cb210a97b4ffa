//! Learns the dynamics of a four-node opinion network from trajectory pairs.

use wicnode::expkit::{gen_opinion_dataset, gen_opinion_system};
use wicnode::trainer::{train, OptimizerKind, TrainConfig};
use wicnode::wicfield::SamplingBox;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(Ok(2000), |s| s.parse())?;
    let optimizer = match args.next().as_deref() {
        Some("cocob") => OptimizerKind::Cocob,
        _ => OptimizerKind::Adam,
    };
    let cfg = TrainConfig { steps, optimizer, test_every: 100, ..TrainConfig::opinion() };
    let system = gen_opinion_system(cfg.seed);
    let (train_set, test_set) = gen_opinion_dataset(&system, 100, 50, cfg.horizon, cfg.seed)?;

    let t = std::time::Instant::now();
    let history = train(&cfg, &train_set, Some(&test_set))?;
    for (step, loss) in &history.test_loss {
        println!("step {step:5}  test mse {loss:.5}");
    }
    println!("trained in {:.1?}", t.elapsed());
    let report = history.field.certify(SamplingBox::new(5.0), 1000, 1)?;
    println!("sampled weighted measure ≤ {:.3e} (ε = {})", report.max_mu, cfg.epsilon);
    Ok(())
}
