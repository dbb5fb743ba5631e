//! Certificates: direct check, minimal gamma, closed-form gammas, and the bound.

use consensus_accuracy::certify::{check_condition, deviation_bound, minimal_gamma, theorem_gamma, CERT_TOL};
use consensus_accuracy::experiments::standard_instances;
use consensus_accuracy::graph::{generate, GraphKind};
use consensus_accuracy::models::{ModelKind, UpdateModel};

fn main() -> consensus_accuracy::Result<()> {
    let pair = UpdateModel::new(ModelKind::Aaga, generate(GraphKind::Complete, 2, 0.5, 0)?, 0.5)?;
    let m = pair.exact_moments()?;
    for gamma in [0.5, 1.0, 2.0] {
        let c = check_condition(&m, gamma, CERT_TOL)?;
        println!("pair q=0.5, gamma {gamma}: valid {} (min eig {:.3e})", c.valid, c.psd_min_eig.unwrap());
    }

    println!("{:<22} {:>10} {:>10} {:>12}", "instance", "theorem", "minimal", "bound/V0");
    for inst in standard_instances() {
        let m = inst.model.exact_moments()?;
        let thm = theorem_gamma(&inst.model)?.verify(&m, CERT_TOL)?;
        let min = minimal_gamma(&m, CERT_TOL)?;
        let g = thm.gamma.unwrap();
        println!(
            "{:<22} {:>10.4} {:>10.4} {:>12.5}  {:?}{}",
            inst.label,
            g,
            min.gamma.unwrap(),
            deviation_bound(g, inst.model.n(), 1.0),
            thm.method,
            if thm.valid { "" } else { "  INVALID" }
        );
    }

    let degenerate = UpdateModel::degenerate(ModelKind::Aaga, generate(GraphKind::Complete, 2, 0.5, 0)?, 1.0)?;
    let c = minimal_gamma(&degenerate.exact_moments()?, CERT_TOL)?;
    println!("pair with q = 1: gamma {:?}", c.gamma);
    Ok(())
}
