//! Jacobi eigen-decomposition, PSD tests and graph spectra.

use consensus_accuracy::graph::{generate, laplacian, GraphKind, Matrix};
use consensus_accuracy::spectral::{eig_sym, graph_spectrum, is_psd};

fn main() -> consensus_accuracy::Result<()> {
    let m = Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    let e = eig_sym(&m)?;
    println!("eigenvalues of [[2,-1],[-1,2]]: {:?} (residual {:.1e})", e.values, e.residual);

    let indefinite = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    println!("[[1,2],[2,1]]: {:?}", is_psd(&indefinite, 1e-9)?);

    for n in [4, 8, 32] {
        let g = generate(GraphKind::Cycle, n, 1.0, 0)?;
        let s = graph_spectrum(&g)?;
        println!(
            "cycle {n}: lambda_1 = {:.6}, lambda_max = {:.6}, connected = {}",
            s.lambda_1.unwrap(),
            s.lambda_last.unwrap(),
            s.is_connected()
        );
        println!("  Laplacian PSD: {}", is_psd(&laplacian(&g), 1e-10)?.psd);
    }

    let half = generate(GraphKind::Cycle, 8, 0.5, 0)?;
    let s = graph_spectrum(&half)?;
    println!("half-weight 8-cycle: esr = {:.6}, second modulus = {:.6}", s.esr, s.esr_modulus);
    Ok(())
}
