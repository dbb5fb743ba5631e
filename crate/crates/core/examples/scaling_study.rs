//! Accuracy as the network grows: certified bound vs simulated steady state.
//!
//! Usage: `scaling_study [family] [trials]`, family one of `bga_cycle`,
//! `saga_cycle`, `aaga_complete`, `pbga_complete`.

use consensus_accuracy::experiments::{render, scaling, Format, ScalingConfig, X0Spec};
use consensus_accuracy::montecarlo::SteadyRule;

fn main() -> consensus_accuracy::Result<()> {
    let mut args = std::env::args().skip(1);
    let family = args.next().unwrap_or_else(|| "bga_cycle".into()).parse()?;
    let trials = args.next().map_or(2_000, |t| t.parse().expect("trials must be an integer"));
    let cfg = ScalingConfig {
        family,
        n_list: vec![8, 16, 32],
        q: 0.5,
        trials,
        seed: 1,
        x0: X0Spec::IidUniform { seed: 5 },
        rule: SteadyRule::default(),
    };
    print!("{}", render(&scaling(&cfg)?, Format::Csv)?);
    Ok(())
}
