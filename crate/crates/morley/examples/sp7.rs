//! Scratch probe: super-penalty solve cost at level 7.

use morley::element::MorleySpace;
use morley::forms::{build_system, MethodKind, MethodParams, QuadratureDegrees};
use morley::mesh::unit_square_uniform;
use morley::problems::smooth_rhs;
use morley::solver::solve_spd;
use std::time::Instant;

fn main() {
    for eps in [0.0, 1.0] {
        let t = Instant::now();
        let mesh = unit_square_uniform::<f64>(1 << 7).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let mut params = MethodParams::super_penalty(eps, 1.0);
        params.method = MethodKind::SuperPenalty;
        let sys = build_system(&space, params, QuadratureDegrees::default(), smooth_rhs::<f64, 2>(eps)).unwrap();
        let n = sys.n_unknowns();
        let max_iter = 50 * (n as f64).sqrt() as usize + 1000;
        match solve_spd(&sys, 1e-10, max_iter) {
            Ok(r) => println!("spmwx eps {eps} level 7: iters {} (budget {max_iter}), res {:.2e}, {:?}", r.iterations, r.rel_residual, t.elapsed()),
            Err(e) => println!("spmwx eps {eps} level 7: FAILED {e}"),
        }
    }
}
