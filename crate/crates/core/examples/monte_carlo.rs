//! Monte Carlo estimates against the exact oracle and the bound.

use consensus_accuracy::certify::{deviation_bound, theorem_gamma};
use consensus_accuracy::graph::{disagreement, generate, GraphKind};
use consensus_accuracy::models::{ModelKind, UpdateModel};
use consensus_accuracy::montecarlo::{estimate_mean_preservation, estimate_mse, Stride};
use consensus_accuracy::oracle::mse_trajectory;

fn main() -> consensus_accuracy::Result<()> {
    let model = UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, 6, 1.0, 0)?, 0.5)?;
    let x0 = [1.0, 0.0, 0.5, -1.0, 0.25, 2.0];
    let bound = deviation_bound(theorem_gamma(&model)?.gamma.unwrap(), 6, disagreement(&x0)?);
    let exact = mse_trajectory(&model.enumerate_events(64)?, &x0, 200)?;
    println!("t    MC mean       +- 4 sigma    exact         bound");
    for e in estimate_mse(&model, &x0, 200, 20_000, 42, Stride::Every(20))? {
        println!("{:<4} {:.6e}  {:.2e}  {:.6e}  {:.6e}", e.t, e.mse_mean, e.ci_half_width, exact[e.t], bound);
    }
    let means = estimate_mean_preservation(&model, &x0, 100, 20_000, 43, Stride::Every(50))?;
    for m in means {
        println!("t={}: mean of xbar {:.5} +- {:.5}", m.t, m.mean, m.ci_half_width);
    }
    Ok(())
}
