//! Scratch probe: full-space spectra for the Nitsche variant.

use morley::element::MorleySpace;
use morley::forms::{assemble_a, assemble_b_ip, assemble_nitsche_correction};
use morley::mesh::unit_square_uniform;

fn main() {
    for n in [4usize, 8] {
        let mesh = unit_square_uniform::<f64>(n).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        for sigma in [5.0, 10.0, 20.0] {
            let b = assemble_b_ip(&space, sigma, 4).unwrap();
            let eig = b.to_dense().symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            println!("2d n={n} full-space b sigma {sigma}: min eig {min:.6e}");
        }
        // Nitsche-corrected full system at eps = 1e-6, sigma1 = sigma2 = 5.
        let a = assemble_a(&space);
        let nc = assemble_nitsche_correction(&space, 5.0, 5.0, 4).unwrap();
        let an = a.linear_combination(1.0, &nc, 1.0);
        let b = assemble_b_ip(&space, 5.0, 4).unwrap();
        let eps2 = 1e-12;
        let m = an.linear_combination(eps2, &b, 1.0);
        let eig = m.to_dense().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        println!("2d n={n} nitsche system eps 1e-6: min eig {min:.6e}");
        // And eps = 1e-3 for comparison.
        let m = an.linear_combination(1e-6, &b, 1.0);
        let eig = m.to_dense().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        println!("2d n={n} nitsche system eps 1e-3: min eig {min:.6e}");
    }
}
