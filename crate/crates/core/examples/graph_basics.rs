//! Generators, Laplacians, structural statistics and the disagreement.

use consensus_accuracy::graph::{disagreement, generate, laplacian, GraphKind, WeightedGraph};

fn main() -> consensus_accuracy::Result<()> {
    let cycle = generate(GraphKind::Cycle, 6, 1.0, 0)?;
    println!("6-cycle Laplacian:{}", laplacian(&cycle));

    let er = generate("erdos_renyi:0.4".parse()?, 8, 1.0, 7)?;
    let s = er.stats();
    println!("G(8, 0.4) seed 7: {} edges, d_max = {}, W_max = {}", er.edge_count(), s.d_max, s.w_max);

    let directed = WeightedGraph::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]])?;
    println!("one-way pair balanced: {}", directed.stats().is_balanced);
    println!("graph JSON: {}", serde_json::to_string(&directed)?);

    for y in [vec![0.0, 1.0], vec![1.0, 2.0, 3.0], vec![4.0; 5]] {
        println!("V({y:?}) = {}", disagreement(&y)?);
    }
    Ok(())
}
