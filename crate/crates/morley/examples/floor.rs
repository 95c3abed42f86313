//! Scratch probe: attainable true-residual floor of the super-penalty system.

use morley::element::MorleySpace;
use morley::forms::{build_system, MethodParams, QuadratureDegrees};
use morley::mesh::unit_square_uniform;
use morley::problems::smooth_rhs;
use morley::solver::{solve_spd_with, Preconditioner};

fn main() {
    let mesh = unit_square_uniform::<f64>(1 << 7).unwrap();
    let space = MorleySpace::build(&mesh).unwrap();
    let params = MethodParams::super_penalty(0.0, 1.0);
    let sys = build_system(&space, params, QuadratureDegrees::default(), smooth_rhs::<f64, 2>(0.0)).unwrap();
    let n = sys.n_unknowns();

    // Scale diagnostics.
    let mut row_norm: f64 = 0.0;
    for i in 0..n {
        let (_, vals) = sys.matrix.row(i);
        row_norm = row_norm.max(vals.iter().map(|v| v.abs()).sum());
    }
    let norm_b = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Converge hard with a loose-but-checked tolerance, then examine floor.
    let report = solve_spd_with(&sys, 3e-10, 40_000, Preconditioner::IncompleteCholesky).unwrap();
    let norm_x = report.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ax = vec![0.0; n];
    sys.matrix.matvec(&report.x, &mut ax);
    let rr: f64 = ax.iter().zip(&sys.rhs).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    println!("norm_inf(A) {row_norm:.3e}, ||b|| {norm_b:.3e}, ||x|| {norm_x:.3e}");
    println!("floor estimate eps*||A||*||x||/||b|| = {:.3e}", 2.2e-16 * row_norm * norm_x / norm_b);
    println!("achieved true rel residual {:.3e} in {} iters", rr / norm_b, report.iterations);
}
