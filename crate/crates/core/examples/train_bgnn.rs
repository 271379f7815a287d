//! Train the interaction network on the synthetic Yield/Ignore set.
//!
//! ```text
//! cargo run --release --example train_bgnn -- [layers] [embed_dim] [steps]
//! ```

use riskcot::interaction::{synthetic_interaction_set, train, BgnnParams, InteractionConfig, TrainConfig, FEATURE_DIM};

fn main() -> riskcot::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let defaults = InteractionConfig::default();
    let cfg = InteractionConfig {
        layers: args.first().copied().unwrap_or(defaults.layers),
        embed_dim: args.get(1).copied().unwrap_or(defaults.embed_dim),
        ..defaults
    };
    // A small KL weight; with 1/|batch| the summed KL swamps the data term on 64 graphs.
    let tcfg = TrainConfig {
        steps: args.get(2).copied().unwrap_or(200),
        beta: Some(1e-4),
        ..TrainConfig::default()
    };
    let data = synthetic_interaction_set(64, 7);
    let mut params = BgnnParams::init(FEATURE_DIM, &cfg, 1);
    let start = std::time::Instant::now();
    let report = train(&mut params, &data, &tcfg, cfg.prior_std)?;
    for (t, loss) in report.losses.iter().enumerate().step_by((tcfg.steps / 10).max(1)) {
        println!("step {t:4}  loss {loss:.4}");
    }
    println!(
        "final loss {:.4}  training accuracy {:.3}  ({:.1?})",
        report.losses.last().copied().unwrap_or(f64::NAN),
        report.accuracy,
        start.elapsed()
    );
    Ok(())
}
