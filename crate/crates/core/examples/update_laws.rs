//! The four update laws: sampling, exact support, and moment matrices.

use consensus_accuracy::graph::{generate, GraphKind};
use consensus_accuracy::models::{stream_rng, CorrelationCase, ModelKind, ModelSpec, UpdateModel};

fn main() -> consensus_accuracy::Result<()> {
    let models = [
        UpdateModel::new(ModelKind::Aaga, generate(GraphKind::Complete, 4, 1.0 / 12.0, 0)?, 0.5)?,
        UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, 4, 1.0, 0)?, 0.5)?,
        UpdateModel::new(ModelKind::Saga, generate(GraphKind::Cycle, 4, 0.5, 0)?, 0.5)?,
        UpdateModel::new(ModelKind::Pbga, generate(GraphKind::Complete, 4, 0.5, 0)?, 0.5)?,
    ];
    let mut rng = stream_rng(1, 0);
    for m in &models {
        let draw = m.sample(&mut rng);
        let events = m.enumerate_events(1 << 12)?;
        println!("{} on 4 nodes: one draw touches {} coefficients; support {}", m.kind(), draw.coefficients.len(), events.len());
        let exact = m.exact_moments()?;
        let empirical = m.empirical_moments(200_000, 3)?;
        println!(
            "  E[L*11*L] exact vs 2e5 draws: max gap {:.2e}; mean preserving: {}",
            (&exact.el11l - &empirical.el11l).amax(),
            exact.is_mean_preserving(1e-12)
        );
        println!("  {:?}", m.structure_bounds());
        let cov = m.covariance_structure(CorrelationCase::Updates, 1 << 12)?;
        println!("  rows uncorrelated: {} (max |cov| {:.2e})", cov.holds, cov.max_violation);
    }

    let spec: ModelSpec = serde_json::from_str(r#"{"kind":"BGA","q":0.3,"graph":{"family":"star","n":5}}"#)?;
    let star = spec.build()?;
    println!("BGA star from JSON: E[L] = (q/N) L(W)?  gap {:.1e}", (star.closed_form_mean() - star.exact_moments()?.el).amax());
    Ok(())
}
