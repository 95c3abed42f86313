//! Scratch probe: solver cost at the finest benchmark levels.

use morley::element::MorleySpace;
use morley::forms::{build_system, MethodParams, QuadratureDegrees};
use morley::mesh::{unit_cube_uniform, unit_square_uniform};
use morley::problems::{layer_rhs, smooth_rhs};
use morley::solver::solve_spd;
use std::time::Instant;

fn main() {
    let degrees = QuadratureDegrees::default();

    for (level, eps) in [(6usize, 1.0), (7, 1.0), (7, 0.1), (7, 0.0)] {
        let t = Instant::now();
        let mesh = unit_square_uniform::<f64>(1 << level).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let t_setup = t.elapsed();
        let sys = build_system(
            &space,
            MethodParams::interior_penalty(eps),
            degrees,
            smooth_rhs::<f64, 2>(eps),
        )
        .unwrap();
        let t_asm = t.elapsed();
        let n = sys.n_unknowns();
        let max_iter = 50 * (n as f64).sqrt() as usize + 1000;
        let report = solve_spd(&sys, 1e-10, max_iter).unwrap();
        println!(
            "2d level {level} eps {eps:>5}: n {n}, iters {} (budget {max_iter}), res {:.1e}, setup {:.1?}, asm {:.1?}, total {:.1?}",
            report.iterations, report.rel_residual, t_setup, t_asm - t_setup, t.elapsed()
        );
    }

    {
        let t = Instant::now();
        let mesh = unit_square_uniform::<f64>(1 << 8).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let sys = build_system(
            &space,
            MethodParams::interior_penalty(1e-6),
            degrees,
            layer_rhs::<f64, 2>(),
        )
        .unwrap();
        let n = sys.n_unknowns();
        let max_iter = 50 * (n as f64).sqrt() as usize + 1000;
        let report = solve_spd(&sys, 1e-10, max_iter).unwrap();
        println!(
            "2d level 8 eps 1e-6: n {n}, iters {} (budget {max_iter}), res {:.1e}, total {:.1?}",
            report.iterations, report.rel_residual, t.elapsed()
        );
    }

    for eps in [1.0, 0.0] {
        let t = Instant::now();
        let mesh = unit_cube_uniform::<f64>(1 << 4).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let mut params = MethodParams::interior_penalty(eps);
        params.sigma = 10.0;
        let sys = build_system(&space, params, degrees, smooth_rhs::<f64, 3>(eps)).unwrap();
        let n = sys.n_unknowns();
        let max_iter = 50 * (n as f64).sqrt() as usize + 1000;
        let report = solve_spd(&sys, 1e-10, max_iter).unwrap();
        println!(
            "3d level 4 eps {eps}: n {n}, iters {} (budget {max_iter}), res {:.1e}, total {:.1?}",
            report.iterations, report.rel_residual, t.elapsed()
        );
    }
}
