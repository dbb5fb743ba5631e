//! The quadratic `C(y) = y*(11* + gamma I)y` decreases in expectation exactly
//! when `gamma` is a certificate.

use consensus_accuracy::certify::{check_condition, supermartingale_gap, CERT_TOL};
use consensus_accuracy::graph::{generate, GraphKind};
use consensus_accuracy::models::{ModelKind, UpdateModel};
use consensus_accuracy::oracle::lyapunov_check;

fn main() -> consensus_accuracy::Result<()> {
    let model = UpdateModel::new(ModelKind::Pbga, generate(GraphKind::Complete, 4, 1.0, 0)?, 0.5)?;
    let events = model.enumerate_events(1 << 10)?;
    let moments = model.exact_moments()?;
    let x0 = [1.0, -1.0, 0.0, 2.0];
    for gamma in [1.0, 2.0, 3.0, 4.0, 6.0] {
        let cond = check_condition(&moments, gamma, CERT_TOL)?;
        let gap = supermartingale_gap(&events, 4, gamma, CERT_TOL)?;
        let c = lyapunov_check(&events, &x0, gamma, 30)?;
        let increases = c.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
        println!(
            "gamma {gamma}: condition {}, decrement PSD {}, E[C] increases on {increases}/30 steps",
            cond.valid, gap.psd
        );
    }
    Ok(())
}
