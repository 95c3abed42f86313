//! Scratch probe: residual history shape of the hard super-penalty solve.

use morley::element::MorleySpace;
use morley::forms::{build_system, MethodParams, QuadratureDegrees};
use morley::mesh::unit_square_uniform;
use morley::problems::smooth_rhs;
use morley::solver::{solve_spd, SolverError};

fn main() {
    let mesh = unit_square_uniform::<f64>(1 << 7).unwrap();
    let space = MorleySpace::build(&mesh).unwrap();
    let params = MethodParams::super_penalty(1.0, 1.0);
    let sys = build_system(&space, params, QuadratureDegrees::default(), smooth_rhs::<f64, 2>(1.0)).unwrap();
    match solve_spd(&sys, 1e-10, 13750) {
        Ok(r) => println!("converged {} iters res {:.3e}", r.iterations, r.rel_residual),
        Err(SolverError::NoConvergence { residual_history, .. }) => {
            let first = residual_history.iter().position(|&r| r <= 1e-10);
            println!("history len {}", residual_history.len());
            println!("first recursive pass at iter {:?}", first);
            let below = residual_history.iter().filter(|&&r| r <= 1e-10).count();
            println!("iterations with recursive residual below tol: {below}");
            let tail: Vec<String> = residual_history[residual_history.len().saturating_sub(8)..]
                .iter().map(|r| format!("{r:.2e}")).collect();
            println!("tail: {}", tail.join(" "));
        }
        Err(e) => println!("{e}"),
    }
}
