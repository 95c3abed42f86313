//! Scratch probe: spectrum of the 3D gradient-penalty block.

use morley::element::MorleySpace;
use morley::forms::{assemble_b_ip, assemble_a};
use morley::mesh::unit_cube_uniform;

fn main() {
    for n in [1, 2, 4] {
        let mesh = unit_cube_uniform::<f64>(n).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let keep = space.dofs.free_to_global().to_vec();
        let position: Vec<Option<usize>> =
            (0..space.n_dofs()).map(|d| space.dofs.free_index(d)).collect();
        for sigma in [5.0, 7.0, 10.0] {
            let b = assemble_b_ip(&space, sigma, 4).unwrap();
            let restricted = b.restrict(&keep, &position);
            let eig = restricted.to_dense().symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            println!("3d n={n} sigma {sigma}: free {} min eig {min:.6e}", keep.len());
        }
    }
    let mesh = unit_cube_uniform::<f64>(2).unwrap();
    let space = MorleySpace::build(&mesh).unwrap();
    let keep = space.dofs.free_to_global().to_vec();
    let position: Vec<Option<usize>> =
        (0..space.n_dofs()).map(|d| space.dofs.free_index(d)).collect();
    for sigma in [5.0, 7.5, 10.0, 15.0, 20.0, 40.0] {
        let b = assemble_b_ip(&space, sigma, 4).unwrap();
        let restricted = b.restrict(&keep, &position);
        let eig = restricted.to_dense().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        println!("sigma {sigma:6.1}: min eig {min:.6e}, max {max:.3e}");
    }
    // Full-space spectrum at sigma = 5 (includes boundary dofs).
    let b = assemble_b_ip(&space, 5.0, 4).unwrap();
    let eig = b.to_dense().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    println!("full space sigma 5: min eig {min:.6e}");

    // And the epsilon-weighted combination at 1e-4.
    let a = assemble_a(&space);
    let m = a.linear_combination(1e-8, &b, 1.0).restrict(&keep, &position);
    let eig = m.to_dense().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    println!("eps 1e-4 system: min eig {min:.6e}");

    // 2D comparison.
    let mesh2 = morley::mesh::unit_square_uniform::<f64>(4).unwrap();
    let space2 = MorleySpace::build(&mesh2).unwrap();
    let keep2 = space2.dofs.free_to_global().to_vec();
    let pos2: Vec<Option<usize>> =
        (0..space2.n_dofs()).map(|d| space2.dofs.free_index(d)).collect();
    for sigma in [1.0, 2.0, 5.0] {
        let b = assemble_b_ip(&space2, sigma, 4).unwrap();
        let eig = b.restrict(&keep2, &pos2).to_dense().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        println!("2d sigma {sigma:4.1}: min eig {min:.6e}");
    }
}
