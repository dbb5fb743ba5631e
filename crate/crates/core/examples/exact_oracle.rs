//! Exact second-moment propagation on the tight two-node instance.

use consensus_accuracy::certify::deviation_bound;
use consensus_accuracy::graph::{generate, GraphKind};
use consensus_accuracy::models::{ModelKind, UpdateModel};
use consensus_accuracy::oracle::{steady_state_mse, trajectory, STEADY_MAX_STEPS};

fn main() -> consensus_accuracy::Result<()> {
    let q: f64 = std::env::args().nth(1).map_or(Ok(0.5), |s| s.parse()).expect("q must be a number");
    let model = UpdateModel::new(ModelKind::Aaga, generate(GraphKind::Complete, 2, 0.5, 0)?, q)?;
    let events = model.enumerate_events(4)?;
    let x0 = [0.0, 1.0];
    let gamma = q / (1.0 - q);
    println!("t  E[(xbar - xbar0)^2]  E[V]  E[C]");
    for r in trajectory(&events, &x0, 12, Some(gamma))? {
        println!("{:<2} {:.12} {:.3e} {:.6}", r.t, r.mse, r.disagreement, r.lyapunov.unwrap());
    }
    let ss = steady_state_mse(&events, &x0, STEADY_MAX_STEPS)?;
    println!("steady state {:.12} after {} steps; bound {:.12}", ss.mse, ss.steps, deviation_bound(gamma, 2, 0.25));
    Ok(())
}
