//! Scratch probe: coarse-level energy errors for eyeballing against the
//! published tables.

use morley::forms::MethodKind;
use morley::study::{emit_table, run_convergence_study, BenchConfig, ExampleId, TableFormat};

fn main() {
    let t0 = std::time::Instant::now();
    let mut cfg = BenchConfig::<f64>::new(ExampleId::Smooth2d, MethodKind::InteriorPenalty);
    cfg.eps_list = vec![1.0, 1e-2, 0.0];
    cfg.min_level = 2;
    cfg.max_level = 5;
    let table = run_convergence_study(&cfg).unwrap();
    emit_table(&table, TableFormat::Markdown, &mut std::io::stdout()).unwrap();
    println!("ip elapsed {:?}", t0.elapsed());

    let mut cfg = BenchConfig::<f64>::new(ExampleId::Smooth2d, MethodKind::SuperPenalty);
    cfg.eps_list = vec![1.0, 0.0];
    cfg.min_level = 2;
    cfg.max_level = 5;
    let table = run_convergence_study(&cfg).unwrap();
    emit_table(&table, TableFormat::Markdown, &mut std::io::stdout()).unwrap();

    let t3 = std::time::Instant::now();
    let mut cfg = BenchConfig::<f64>::new(ExampleId::Smooth3d, MethodKind::InteriorPenalty);
    cfg.eps_list = vec![1.0, 1e-4, 0.0];
    cfg.min_level = 1;
    cfg.max_level = 3;
    cfg.sigma = 10.0;
    let table = run_convergence_study(&cfg).unwrap();
    emit_table(&table, TableFormat::Markdown, &mut std::io::stdout()).unwrap();
    println!("3d elapsed {:?}", t3.elapsed());

    let mut cfg = BenchConfig::<f64>::new(ExampleId::Layer2d, MethodKind::InteriorPenalty);
    cfg.min_level = 2;
    cfg.max_level = 5;
        let table = run_convergence_study(&cfg).unwrap();
    emit_table(&table, TableFormat::Markdown, &mut std::io::stdout()).unwrap();
    for row in &table.rows {
        println!(
            "layer level {}: l2 {:.4E} (rate {:?})  h1 {:.4E} (rate {:?})  energy {:.4E}",
            row.level, row.errors.l2, row.rate_l2, row.errors.h1_broken, row.rate_h1,
            row.errors.energy
        );
    }
    println!("total elapsed {:?}", t0.elapsed());
}
