//! Our bound next to the earlier analyses, on cycles of growing size.

use consensus_accuracy::experiments::{compare_bounds, ScalingFamily};

fn main() -> consensus_accuracy::Result<()> {
    for (family, label) in [
        (ScalingFamily::BgaCycle, "BGA cycle"),
        (ScalingFamily::SagaCycle, "SAGA cycle"),
        (ScalingFamily::AagaComplete, "AAGA complete"),
    ] {
        for n in [8, 32, 128] {
            let model = family.model(n, 0.5)?;
            print!("{label} N={n}:");
            for row in compare_bounds(&model, 1.0, None)? {
                match row.value {
                    Some(v) => print!("  {} {:.4}{}", row.bound_name, v, if row.vacuous { " (vacuous)" } else { "" }),
                    None => print!("  {} n/a", row.bound_name),
                }
            }
            println!();
        }
    }
    Ok(())
}
