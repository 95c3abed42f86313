//! Assembly of the discrete bilinear forms and load vectors.
//!
//! Three method variants share the machinery:
//! - interior penalty: gradient form stabilized with consistency terms and a
//!   `sigma / h_F` jump penalty over all faces,
//! - super penalty: gradient form plus a `h_F^-(2p+1)` jump penalty only,
//! - Nitsche: interior penalty plus boundary correction terms on the Hessian
//!   block, keeping the full space (no dof elimination).
//!
//! Local face blocks are written in a swap-invariant form and scattered in a
//! fixed order, so assembled matrices are symmetric bit for bit.

use crate::element::{face_quadrature, CellField, MorleySpace};
use crate::mesh::SimplexMesh;
use crate::num::{count, lit, Real};
use crate::quadrature::{simplex_rule, QuadratureError};
use crate::sparse::CsrMatrix;
use nalgebra::SVector;

#[derive(Debug, thiserror::Error)]
pub enum FormsError {
    #[error("penalty parameter sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("super-penalty exponent p must lie in (0, 1], got {0}")]
    InvalidPenaltyExponent(f64),
    #[error("Nitsche penalties sigma1, sigma2 must be positive, got {0}, {1}")]
    NonPositiveNitschePenalty(f64, f64),
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("the Nitsche variant needs epsilon > 0; its boundary terms sit in the Hessian block")]
    NitscheZeroEpsilon,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Discretization variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    InteriorPenalty,
    SuperPenalty,
    Nitsche,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::InteriorPenalty => "ipmwx",
            MethodKind::SuperPenalty => "spmwx",
            MethodKind::Nitsche => "nitsche",
        }
    }
}

/// Parameters of the assembled bilinear form.
#[derive(Debug, Clone, Copy)]
pub struct MethodParams<R> {
    pub method: MethodKind,
    pub epsilon: R,
    /// Interior penalty weight (also used by the Nitsche variant's gradient
    /// block).
    pub sigma: R,
    /// Super-penalty exponent in (0, 1].
    pub p: R,
    /// Nitsche boundary penalty on the normal derivative.
    pub sigma1: R,
    /// Nitsche boundary penalty on the value.
    pub sigma2: R,
}

impl<R: Real> MethodParams<R> {
    pub fn interior_penalty(epsilon: R) -> Self {
        MethodParams {
            method: MethodKind::InteriorPenalty,
            epsilon,
            sigma: lit(5.0),
            p: R::one(),
            sigma1: lit(5.0),
            sigma2: lit(5.0),
        }
    }

    pub fn super_penalty(epsilon: R, p: R) -> Self {
        MethodParams { method: MethodKind::SuperPenalty, p, ..Self::interior_penalty(epsilon) }
    }

    pub fn nitsche(epsilon: R) -> Self {
        MethodParams { method: MethodKind::Nitsche, ..Self::interior_penalty(epsilon) }
    }

    fn validate(&self) -> Result<(), FormsError> {
        if self.epsilon < R::zero() {
            return Err(FormsError::NegativeEpsilon(self.epsilon.to_f64_lossy()));
        }
        match self.method {
            MethodKind::InteriorPenalty => check_sigma(self.sigma)?,
            MethodKind::SuperPenalty => check_penalty_exponent(self.p)?,
            MethodKind::Nitsche => {
                check_sigma(self.sigma)?;
                if !(self.sigma1 > R::zero() && self.sigma2 > R::zero()) {
                    return Err(FormsError::NonPositiveNitschePenalty(
                        self.sigma1.to_f64_lossy(),
                        self.sigma2.to_f64_lossy(),
                    ));
                }
                if self.epsilon == R::zero() {
                    return Err(FormsError::NitscheZeroEpsilon);
                }
            }
        }
        Ok(())
    }
}

fn check_sigma<R: Real>(sigma: R) -> Result<(), FormsError> {
    if sigma > R::zero() {
        Ok(())
    } else {
        Err(FormsError::NonPositiveSigma(sigma.to_f64_lossy()))
    }
}

fn check_penalty_exponent<R: Real>(p: R) -> Result<(), FormsError> {
    if p > R::zero() && p <= R::one() {
        Ok(())
    } else {
        Err(FormsError::InvalidPenaltyExponent(p.to_f64_lossy()))
    }
}

/// Quadrature degrees used during assembly.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureDegrees {
    /// Stiffness and penalty terms (quadratic integrands of degree <= 4).
    pub assembly: usize,
    /// Load vectors against general right-hand sides.
    pub load: usize,
}

impl Default for QuadratureDegrees {
    fn default() -> Self {
        QuadratureDegrees { assembly: 4, load: 6 }
    }
}

/// Sparse system over the free dofs (interior penalty / super penalty) or
/// over the full space (Nitsche), plus the free-to-global permutation.
#[derive(Debug, Clone)]
pub struct AssembledSystem<R: Real> {
    pub matrix: CsrMatrix<R>,
    pub rhs: Vec<R>,
    pub params: MethodParams<R>,
    /// Row index in the system -> global dof.
    pub free_to_global: Vec<usize>,
    pub n_total_dofs: usize,
}

impl<R: Real> AssembledSystem<R> {
    pub fn n_unknowns(&self) -> usize {
        self.matrix.nrows()
    }

    /// Scatters a solution over the free dofs back to a full coefficient
    /// vector with zero boundary values.
    pub fn expand(&self, x: &[R]) -> Vec<R> {
        let mut full = vec![R::zero(); self.n_total_dofs];
        for (i, &dof) in self.free_to_global.iter().enumerate() {
            full[dof] = x[i];
        }
        full
    }
}

fn cell_pattern<R: Real, const D: usize>(space: &MorleySpace<R, D>) -> Vec<Vec<usize>> {
    let n = space.n_dofs();
    let mut pattern = vec![Vec::new(); n];
    for k in 0..space.mesh.n_cells() {
        let dofs = space.dofs.cell_dofs(k);
        for &i in dofs {
            pattern[i].extend_from_slice(dofs);
        }
    }
    pattern
}

fn face_pattern<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    boundary_only: bool,
) -> Vec<Vec<usize>> {
    let mesh = space.mesh;
    let n = space.n_dofs();
    let mut pattern = vec![Vec::new(); n];
    let mut stack: Vec<usize> = Vec::new();
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        if boundary_only && !face.is_boundary() {
            continue;
        }
        stack.clear();
        stack.extend_from_slice(space.dofs.cell_dofs(face.owner));
        if let Some(nb) = face.neighbor {
            stack.extend_from_slice(space.dofs.cell_dofs(nb));
        }
        for &i in &stack {
            pattern[i].extend_from_slice(&stack);
        }
    }
    pattern
}

fn merge_patterns(mut a: Vec<Vec<usize>>, b: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for (ra, rb) in a.iter_mut().zip(b) {
        ra.extend(rb);
    }
    a
}

/// Hessian form: `sum_K (hess w, hess v)_K`. Hessians of quadratics are
/// constant, so each cell contributes `|K| (H_i : H_j)`.
pub fn assemble_a<R: Real, const D: usize>(space: &MorleySpace<R, D>) -> CsrMatrix<R> {
    let mesh = space.mesh;
    let nb = space.dofs.nb();
    let mut matrix = CsrMatrix::from_pattern(space.n_dofs(), space.n_dofs(), cell_pattern(space));
    for k in 0..mesh.n_cells() {
        let basis = space.basis(k);
        let measure = mesh.cell_measure(k);
        let dofs = space.dofs.cell_dofs(k);
        for i in 0..nb {
            let hi = basis.hessian(i);
            for j in 0..nb {
                let hj = basis.hessian(j);
                let mut frob = R::zero();
                for a in 0..D {
                    for b in 0..D {
                        frob += hi[(a, b)] * hj[(a, b)];
                    }
                }
                matrix.add(dofs[i], dofs[j], measure * frob);
            }
        }
    }
    matrix
}

/// Gradient volume Gram matrix, shared by both penalty variants.
fn assemble_gradient_gram<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    matrix: &mut CsrMatrix<R>,
    degree: usize,
) -> Result<(), FormsError> {
    let mesh = space.mesh;
    let nb = space.dofs.nb();
    let rule = simplex_rule::<R, D>(degree)?;
    let mut grads = vec![SVector::<R, D>::zeros(); nb];
    let mut block = vec![R::zero(); nb * nb];
    for k in 0..mesh.n_cells() {
        let basis = space.basis(k);
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        block.iter_mut().for_each(|v| *v = R::zero());
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            basis.gradients_at(x, &mut grads);
            for i in 0..nb {
                for j in 0..nb {
                    block[i * nb + j] += w * grads[i].dot(&grads[j]);
                }
            }
        }
        let dofs = space.dofs.cell_dofs(k);
        for i in 0..nb {
            for j in 0..nb {
                matrix.add(dofs[i], dofs[j], block[i * nb + j]);
            }
        }
    }
    Ok(())
}

/// How a face loop weights its jump terms.
enum FaceTerms<R> {
    /// Consistency terms plus `sigma / h_F` penalty (interior penalty form).
    Consistency { sigma: R },
    /// Pure `h_F^-(2p+1)` penalty (super penalty form).
    PenaltyOnly { p: R },
}

fn assemble_face_terms<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    matrix: &mut CsrMatrix<R>,
    terms: FaceTerms<R>,
    degree: usize,
) -> Result<(), FormsError> {
    let mesh = space.mesh;
    let nb = space.dofs.nb();
    let rule = face_quadrature::<R, D>(degree)?;

    let mut sides: Vec<(usize, R)> = Vec::with_capacity(2);
    // Dofs shared by both incident cells get a single stack slot, so the
    // jump and average of each global basis function accumulate both traces
    // and every matrix entry is scattered exactly once (which is what makes
    // the result bit-symmetric).
    let mut stack: Vec<usize> = Vec::with_capacity(2 * nb);
    let mut side_slots: Vec<usize> = Vec::with_capacity(2 * nb);
    let mut vals = vec![R::zero(); nb];
    let mut grads = vec![SVector::<R, D>::zeros(); nb];
    let mut jump = vec![R::zero(); 2 * nb];
    let mut avg = vec![R::zero(); 2 * nb];
    let mut block = vec![R::zero(); 4 * nb * nb];

    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let trace = mesh.face_trace(f).expect("face id in range");
        sides.clear();
        stack.clear();
        side_slots.clear();
        for (cell, sign) in trace.sides() {
            sides.push((cell, lit(sign as f64)));
            for &dof in space.dofs.cell_dofs(cell) {
                let slot = stack.iter().position(|&d| d == dof).unwrap_or_else(|| {
                    stack.push(dof);
                    stack.len() - 1
                });
                side_slots.push(slot);
            }
        }
        let n_stack = stack.len();
        let avg_w = R::one() / count::<R>(sides.len());
        let penalty = match terms {
            FaceTerms::Consistency { sigma } => sigma / face.diameter,
            FaceTerms::PenaltyOnly { p } => {
                face.diameter.powf(-(lit::<R>(2.0) * p + R::one()))
            }
        };
        let consistency = matches!(terms, FaceTerms::Consistency { .. });

        let mapped = rule.map_to_face(mesh, f)?;
        block[..n_stack * n_stack].iter_mut().for_each(|v| *v = R::zero());
        let normal = face.normal;
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            jump[..n_stack].iter_mut().for_each(|v| *v = R::zero());
            avg[..n_stack].iter_mut().for_each(|v| *v = R::zero());
            for (s, &(cell, sign)) in sides.iter().enumerate() {
                let basis = space.basis(cell);
                basis.values_at(x, &mut vals);
                basis.gradients_at(x, &mut grads);
                for j in 0..nb {
                    let slot = side_slots[s * nb + j];
                    jump[slot] += sign * vals[j];
                    avg[slot] += avg_w * grads[j].dot(&normal);
                }
            }
            for e1 in 0..n_stack {
                let (jv1, ga1) = (jump[e1], avg[e1]);
                for e2 in 0..n_stack {
                    let (jv2, ga2) = (jump[e2], avg[e2]);
                    // Swap-invariant grouping keeps the block symmetric bit
                    // for bit.
                    let mut term = penalty * (jv1 * jv2);
                    if consistency {
                        term -= ga1 * jv2 + ga2 * jv1;
                    }
                    block[e1 * n_stack + e2] += w * term;
                }
            }
        }
        for e1 in 0..n_stack {
            for e2 in 0..n_stack {
                matrix.add(stack[e1], stack[e2], block[e1 * n_stack + e2]);
            }
        }
    }
    Ok(())
}

/// Interior penalty gradient form over all faces (boundary faces use the
/// single-sided jump and average).
pub fn assemble_b_ip<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    sigma: R,
    degree: usize,
) -> Result<CsrMatrix<R>, FormsError> {
    check_sigma(sigma)?;
    let pattern = merge_patterns(cell_pattern(space), face_pattern(space, false));
    let mut matrix = CsrMatrix::from_pattern(space.n_dofs(), space.n_dofs(), pattern);
    assemble_gradient_gram(space, &mut matrix, degree)?;
    assemble_face_terms(space, &mut matrix, FaceTerms::Consistency { sigma }, degree)?;
    Ok(matrix)
}

/// Super penalty gradient form: volume Gram plus `h_F^-(2p+1)` jump penalty,
/// no consistency terms.
pub fn assemble_b_sp<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    p: R,
    degree: usize,
) -> Result<CsrMatrix<R>, FormsError> {
    check_penalty_exponent(p)?;
    let pattern = merge_patterns(cell_pattern(space), face_pattern(space, false));
    let mut matrix = CsrMatrix::from_pattern(space.n_dofs(), space.n_dofs(), pattern);
    assemble_gradient_gram(space, &mut matrix, degree)?;
    assemble_face_terms(space, &mut matrix, FaceTerms::PenaltyOnly { p }, degree)?;
    Ok(matrix)
}

/// Nitsche boundary correction to the Hessian form: over boundary faces only,
/// `-(d2nn w, dn v) - (dn w, d2nn v) + sigma1/h (dn w, dn v)
///  + sigma2/h^3 (w, v)`.
pub fn assemble_nitsche_correction<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    sigma1: R,
    sigma2: R,
    degree: usize,
) -> Result<CsrMatrix<R>, FormsError> {
    if !(sigma1 > R::zero() && sigma2 > R::zero()) {
        return Err(FormsError::NonPositiveNitschePenalty(
            sigma1.to_f64_lossy(),
            sigma2.to_f64_lossy(),
        ));
    }
    let mesh = space.mesh;
    let nb = space.dofs.nb();
    let mut matrix =
        CsrMatrix::from_pattern(space.n_dofs(), space.n_dofs(), face_pattern(space, true));
    let rule = face_quadrature::<R, D>(degree)?;

    let mut vals = vec![R::zero(); nb];
    let mut grads = vec![SVector::<R, D>::zeros(); nb];
    let mut hnn = vec![R::zero(); nb];
    let mut block = vec![R::zero(); nb * nb];

    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        if !face.is_boundary() {
            continue;
        }
        let cell = face.owner;
        let basis = space.basis(cell);
        let normal = face.normal;
        for j in 0..nb {
            hnn[j] = (basis.hessian(j) * normal).dot(&normal);
        }
        let h = face.diameter;
        let w1 = sigma1 / h;
        let w2 = sigma2 / (h * h * h);
        let mapped = rule.map_to_face(mesh, f)?;
        block.iter_mut().for_each(|v| *v = R::zero());
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            basis.values_at(x, &mut vals);
            basis.gradients_at(x, &mut grads);
            for i in 0..nb {
                let gi = grads[i].dot(&normal);
                for j in 0..nb {
                    let gj = grads[j].dot(&normal);
                    let term = w1 * (gi * gj) + w2 * (vals[i] * vals[j])
                        - (hnn[i] * gj + hnn[j] * gi);
                    block[i * nb + j] += w * term;
                }
            }
        }
        let dofs = space.dofs.cell_dofs(cell);
        for i in 0..nb {
            for j in 0..nb {
                matrix.add(dofs[i], dofs[j], block[i * nb + j]);
            }
        }
    }
    Ok(matrix)
}

/// Load vector `(f, phi_i)` over all global dofs.
pub fn assemble_load<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    f: impl Fn(&SVector<R, D>) -> R,
    degree: usize,
) -> Result<Vec<R>, FormsError> {
    let mesh = space.mesh;
    let nb = space.dofs.nb();
    let rule = simplex_rule::<R, D>(degree)?;
    let mut rhs = vec![R::zero(); space.n_dofs()];
    let mut vals = vec![R::zero(); nb];
    for k in 0..mesh.n_cells() {
        let basis = space.basis(k);
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        let dofs = space.dofs.cell_dofs(k);
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let fx = f(x);
            basis.values_at(x, &mut vals);
            for i in 0..nb {
                rhs[dofs[i]] += w * fx * vals[i];
            }
        }
    }
    Ok(rhs)
}

/// Assembles the full method matrix `eps^2 A + B` (with the Nitsche boundary
/// correction folded into `A` for that variant) and the load vector, then
/// eliminates boundary dofs for the penalty methods. `epsilon = 0` skips the
/// Hessian block entirely.
pub fn build_system<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    params: MethodParams<R>,
    degrees: QuadratureDegrees,
    f: impl Fn(&SVector<R, D>) -> R,
) -> Result<AssembledSystem<R>, FormsError> {
    params.validate()?;
    let b = match params.method {
        MethodKind::SuperPenalty => assemble_b_sp(space, params.p, degrees.assembly)?,
        _ => assemble_b_ip(space, params.sigma, degrees.assembly)?,
    };
    let full = if params.epsilon == R::zero() {
        b
    } else {
        let a = assemble_a(space);
        let a = match params.method {
            MethodKind::Nitsche => {
                let correction = assemble_nitsche_correction(
                    space,
                    params.sigma1,
                    params.sigma2,
                    degrees.assembly,
                )?;
                a.linear_combination(R::one(), &correction, R::one())
            }
            _ => a,
        };
        let eps2 = params.epsilon * params.epsilon;
        a.linear_combination(eps2, &b, R::one())
    };
    let load = assemble_load(space, f, degrees.load)?;

    let n_total = space.n_dofs();
    match params.method {
        MethodKind::Nitsche => Ok(AssembledSystem {
            matrix: full,
            rhs: load,
            params,
            free_to_global: (0..n_total).collect(),
            n_total_dofs: n_total,
        }),
        _ => {
            let keep = space.dofs.free_to_global().to_vec();
            let position: Vec<Option<usize>> =
                (0..n_total).map(|dof| space.dofs.free_index(dof)).collect();
            let matrix = full.restrict(&keep, &position);
            let rhs = keep.iter().map(|&dof| load[dof]).collect();
            Ok(AssembledSystem { matrix, rhs, params, free_to_global: keep, n_total_dofs: n_total })
        }
    }
}

/// Evaluates the Hessian form on a pair of cell-aware fields by quadrature.
pub fn apply_a<R: Real, const D: usize>(
    mesh: &SimplexMesh<R, D>,
    w: &impl CellField<R, D>,
    v: &impl CellField<R, D>,
    degree: usize,
) -> Result<R, FormsError> {
    let rule = simplex_rule::<R, D>(degree)?;
    let mut acc = R::zero();
    for k in 0..mesh.n_cells() {
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        acc += mapped.integrate(|x| {
            let hw = w.hessian(k, x);
            let hv = v.hessian(k, x);
            let mut frob = R::zero();
            for a in 0..D {
                for b in 0..D {
                    frob += hw[(a, b)] * hv[(a, b)];
                }
            }
            frob
        });
    }
    Ok(acc)
}

/// Evaluates the interior penalty gradient form on a pair of cell-aware
/// fields by quadrature (volume, consistency and penalty terms).
pub fn apply_b_ip<R: Real, const D: usize>(
    mesh: &SimplexMesh<R, D>,
    w: &impl CellField<R, D>,
    v: &impl CellField<R, D>,
    sigma: R,
    degree: usize,
) -> Result<R, FormsError> {
    check_sigma(sigma)?;
    let rule = simplex_rule::<R, D>(degree)?;
    let mut acc = R::zero();
    for k in 0..mesh.n_cells() {
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        acc += mapped.integrate(|x| w.gradient(k, x).dot(&v.gradient(k, x)));
    }
    let face_rule = face_quadrature::<R, D>(degree)?;
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let trace = mesh.face_trace(f).expect("face id in range");
        let normal = face.normal;
        let avg_w = R::one() / count::<R>(trace.ncells());
        let penalty = sigma / face.diameter;
        let mapped = face_rule.map_to_face(mesh, f)?;
        acc += mapped.integrate(|x| {
            let mut jump_w = R::zero();
            let mut jump_v = R::zero();
            let mut avg_w_grad = R::zero();
            let mut avg_v_grad = R::zero();
            for (cell, sign) in trace.sides() {
                let s = lit::<R>(sign as f64);
                jump_w += s * w.value(cell, x);
                jump_v += s * v.value(cell, x);
                avg_w_grad += avg_w * w.gradient(cell, x).dot(&normal);
                avg_v_grad += avg_w * v.gradient(cell, x).dot(&normal);
            }
            penalty * jump_w * jump_v - avg_w_grad * jump_v - avg_v_grad * jump_w
        });
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{AnalyticField, FeFunction, ScalarField, Smooth};
    use crate::mesh::unit_square_uniform;
    use approx::assert_relative_eq;
    use nalgebra::{SMatrix, SVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sin_squared_2d() -> impl ScalarField<f64, 2> {
        let pi = std::f64::consts::PI;
        AnalyticField {
            value: move |x: &SVector<f64, 2>| {
                ((pi * x[0]).sin() * (pi * x[1]).sin()).powi(2)
            },
            gradient: move |x: &SVector<f64, 2>| {
                let (s0, s1) = ((pi * x[0]).sin(), (pi * x[1]).sin());
                SVector::<f64, 2>::new(
                    pi * (2.0 * pi * x[0]).sin() * s1 * s1,
                    pi * (2.0 * pi * x[1]).sin() * s0 * s0,
                )
            },
            hessian: move |x: &SVector<f64, 2>| {
                let (s0, s1) = ((pi * x[0]).sin(), (pi * x[1]).sin());
                let hxx = 2.0 * pi * pi * (2.0 * pi * x[0]).cos() * s1 * s1;
                let hyy = 2.0 * pi * pi * (2.0 * pi * x[1]).cos() * s0 * s0;
                let hxy = pi * pi * (2.0 * pi * x[0]).sin() * (2.0 * pi * x[1]).sin();
                SMatrix::<f64, 2, 2>::new(hxx, hxy, hxy, hyy)
            },
        }
    }

    #[test]
    fn hessian_form_is_positive_semidefinite() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let a = assemble_a(&space);
        assert!(a.is_symmetric());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..a.nrows()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut y = vec![0.0; a.nrows()];
            a.matvec(&x, &mut y);
            let quad: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(quad >= -1e-12, "quadratic form {quad}");
        }
    }

    #[test]
    fn linear_function_has_zero_hessian_energy() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let linear = AnalyticField {
            value: |x: &SVector<f64, 2>| 3.0 * x[0] - 0.5 * x[1] + 2.0,
            gradient: |_: &SVector<f64, 2>| SVector::<f64, 2>::new(3.0, -0.5),
            hessian: |_: &SVector<f64, 2>| SMatrix::<f64, 2, 2>::zeros(),
        };
        let fe = space.interpolate(&linear, 4).unwrap();
        let a = assemble_a(&space);
        let mut y = vec![0.0; a.nrows()];
        a.matvec(&fe.coeffs, &mut y);
        let quad: f64 = fe.coeffs.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(quad.abs() <= 1e-12, "a(v, v) = {quad}");
    }

    #[test]
    fn single_cell_hessian_matrix_matches_quadrature_oracle() {
        let verts = vec![
            SVector::<f64, 2>::new(0.1, 0.05),
            SVector::<f64, 2>::new(0.8, 0.2),
            SVector::<f64, 2>::new(0.35, 0.9),
        ];
        let mesh = SimplexMesh::from_cells(verts, vec![0, 1, 2]).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let a = assemble_a(&space);
        let rule = simplex_rule::<f64, 2>(6).unwrap();
        let mapped = rule.map_to(&mesh.cell_points(0)).unwrap();
        let basis = space.basis(0);
        for i in 0..6 {
            for j in 0..6 {
                let oracle = mapped.integrate(|_| {
                    let (hi, hj) = (basis.hessian(i), basis.hessian(j));
                    (0..2)
                        .flat_map(|a| (0..2).map(move |b| (a, b)))
                        .map(|(a, b)| hi[(a, b)] * hj[(a, b)])
                        .sum()
                });
                let dofs = space.dofs.cell_dofs(0);
                assert_relative_eq!(a.get(dofs[i], dofs[j]), oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn smooth_compatible_pair_reduces_to_gradient_inner_product() {
        let mesh = unit_square_uniform::<f64>(3).unwrap();
        let u = Smooth(sin_squared_2d());
        // b_h on globally C^1 functions vanishing on the boundary: all face
        // terms drop, leaving the gradient inner product.
        let b = apply_b_ip(&mesh, &u, &u, 5.0, 8).unwrap();
        let rule = simplex_rule::<f64, 2>(8).unwrap();
        let mut grad2 = 0.0;
        for k in 0..mesh.n_cells() {
            let mapped = rule.map_to(&mesh.cell_points(k)).unwrap();
            grad2 += mapped.integrate(|x| u.gradient(k, x).norm_squared());
        }
        assert_relative_eq!(b, grad2, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn penalty_matrices_are_bit_symmetric() {
        let mesh = unit_square_uniform::<f64>(3).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        assert!(assemble_b_ip(&space, 5.0, 4).unwrap().is_symmetric());
        assert!(assemble_b_sp(&space, 0.7, 4).unwrap().is_symmetric());
        assert!(assemble_nitsche_correction(&space, 5.0, 5.0, 4).unwrap().is_symmetric());
    }

    /// Brute-force face-term oracle on the two-triangle mesh: each of the
    /// three face integrals is evaluated separately from traces.
    #[test]
    fn face_terms_match_per_term_quadrature_oracle() {
        let mesh = unit_square_uniform::<f64>(1).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let sigma = 5.0;
        let b = assemble_b_ip(&space, sigma, 4).unwrap();
        let n = space.n_dofs();

        let rule = face_quadrature::<f64, 2>(6).unwrap();
        let vol_rule = simplex_rule::<f64, 2>(6).unwrap();
        let unit = |i: usize| {
            let mut fe = FeFunction::zeros(n);
            fe.coeffs[i] = 1.0;
            fe
        };
        for i in 0..n {
            let fi = unit(i);
            let wi = space.field(&fi);
            for j in 0..n {
                let fj = unit(j);
                let wj = space.field(&fj);
                let mut oracle = 0.0;
                for k in 0..mesh.n_cells() {
                    let mapped = vol_rule.map_to(&mesh.cell_points(k)).unwrap();
                    oracle += mapped.integrate(|x| wi.gradient(k, x).dot(&wj.gradient(k, x)));
                }
                for f in 0..mesh.n_faces() {
                    let face = mesh.face(f);
                    let trace = mesh.face_trace(f).unwrap();
                    let navg = 1.0 / trace.ncells() as f64;
                    let mapped = rule.map_to_face(&mesh, f).unwrap();
                    // Term 1: -( {dn w_i}, [w_j] )
                    let t1 = mapped.integrate(|x| {
                        let avg: f64 = trace
                            .sides()
                            .map(|(k, _)| navg * wi.gradient(k, x).dot(&face.normal))
                            .sum();
                        let jump: f64 = trace
                            .sides()
                            .map(|(k, s)| s as f64 * wj.value(k, x))
                            .sum();
                        avg * jump
                    });
                    // Term 2: -( {dn w_j}, [w_i] )
                    let t2 = mapped.integrate(|x| {
                        let avg: f64 = trace
                            .sides()
                            .map(|(k, _)| navg * wj.gradient(k, x).dot(&face.normal))
                            .sum();
                        let jump: f64 = trace
                            .sides()
                            .map(|(k, s)| s as f64 * wi.value(k, x))
                            .sum();
                        avg * jump
                    });
                    // Term 3: sigma/h ( [w_i], [w_j] )
                    let t3 = mapped.integrate(|x| {
                        let ji: f64 = trace
                            .sides()
                            .map(|(k, s)| s as f64 * wi.value(k, x))
                            .sum();
                        let jj: f64 = trace
                            .sides()
                            .map(|(k, s)| s as f64 * wj.value(k, x))
                            .sum();
                        ji * jj
                    });
                    oracle += -t1 - t2 + sigma / face.diameter * t3;
                }
                assert!(
                    (b.get(i, j) - oracle).abs() <= 1e-12,
                    "entry ({i}, {j}): {} vs {oracle}",
                    b.get(i, j)
                );
            }
        }
    }

    #[test]
    fn super_penalty_weight_and_structure() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        // h_F = 1/2 on the axis-aligned faces: weight h^-3 = 8.
        let h: f64 = 0.5;
        assert_relative_eq!(h.powf(-(2.0 * 1.0 + 1.0)), 8.0, epsilon = 1e-12);

        let b_sp = assemble_b_sp(&space, 1.0, 4).unwrap();
        let mut gram =
            CsrMatrix::from_pattern(space.n_dofs(), space.n_dofs(), cell_pattern(&space));
        assemble_gradient_gram(&space, &mut gram, 4).unwrap();
        let diff = b_sp.linear_combination(1.0, &gram, -1.0).prune_zeros();
        // The penalty difference only couples dofs sharing a face stack.
        let allowed = {
            let pat = face_pattern(&space, false);
            move |i: usize, j: usize| pat[i].contains(&j)
        };
        for i in 0..diff.nrows() {
            let (cols, _) = diff.row(i);
            for &j in cols {
                assert!(allowed(i, j), "unexpected coupling ({i}, {j})");
            }
        }

        // Positive definite on free-dof vectors (here: any nonzero vector).
        let free = space.dofs.free_to_global();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut x = vec![0.0; space.n_dofs()];
            for &dof in free {
                x[dof] = rng.gen::<f64>() - 0.5;
            }
            let mut y = vec![0.0; space.n_dofs()];
            b_sp.matvec(&x, &mut y);
            let quad: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn parameter_validation_errors() {
        let mesh = unit_square_uniform::<f64>(1).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        assert!(matches!(
            assemble_b_ip(&space, 0.0, 4),
            Err(FormsError::NonPositiveSigma(_))
        ));
        assert!(matches!(
            assemble_b_sp(&space, 0.0, 4),
            Err(FormsError::InvalidPenaltyExponent(_))
        ));
        assert!(matches!(
            assemble_b_sp(&space, 1.5, 4),
            Err(FormsError::InvalidPenaltyExponent(_))
        ));
        assert!(matches!(
            assemble_nitsche_correction(&space, -1.0, 5.0, 4),
            Err(FormsError::NonPositiveNitschePenalty(..))
        ));
        let mut params = MethodParams::<f64>::nitsche(0.0);
        let degrees = QuadratureDegrees::default();
        assert!(matches!(
            build_system(&space, params, degrees, |_| 0.0),
            Err(FormsError::NitscheZeroEpsilon)
        ));
        params.epsilon = -1.0;
        assert!(matches!(
            build_system(&space, params, degrees, |_| 0.0),
            Err(FormsError::NegativeEpsilon(_))
        ));
    }

    #[test]
    fn nitsche_correction_is_boundary_local() {
        let mesh = unit_square_uniform::<f64>(4).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let correction = assemble_nitsche_correction(&space, 5.0, 5.0, 4).unwrap();
        // Dofs all of whose cells avoid the boundary must have zero rows.
        let mut touches_boundary = vec![false; space.n_dofs()];
        for k in 0..mesh.n_cells() {
            let on_boundary =
                mesh.cell_faces(k).iter().any(|&f| mesh.face(f).is_boundary());
            if on_boundary {
                for &dof in space.dofs.cell_dofs(k) {
                    touches_boundary[dof] = true;
                }
            }
        }
        for i in 0..space.n_dofs() {
            if !touches_boundary[i] {
                let (_, vals) = correction.row(i);
                assert!(vals.iter().all(|&v| v == 0.0), "row {i} not zero");
            }
        }
    }

    #[test]
    fn nitsche_single_face_matches_per_term_oracle() {
        let mesh = unit_square_uniform::<f64>(1).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let (s1, s2) = (3.0, 7.0);
        let correction = assemble_nitsche_correction(&space, s1, s2, 4).unwrap();
        let rule = face_quadrature::<f64, 2>(6).unwrap();
        let n = space.n_dofs();
        let unit = |i: usize| {
            let mut fe = FeFunction::zeros(n);
            fe.coeffs[i] = 1.0;
            fe
        };
        for i in 0..n {
            let fi = unit(i);
            let wi = space.field(&fi);
            for j in 0..n {
                let fj = unit(j);
                let wj = space.field(&fj);
                let mut oracle = 0.0;
                for f in 0..mesh.n_faces() {
                    let face = mesh.face(f);
                    if !face.is_boundary() {
                        continue;
                    }
                    let k = face.owner;
                    let nrm = face.normal;
                    let h = face.diameter;
                    let mapped = rule.map_to_face(&mesh, f).unwrap();
                    let hi = (wi.hessian(k, &mesh.face_centroid(f)) * nrm).dot(&nrm);
                    let hj = (wj.hessian(k, &mesh.face_centroid(f)) * nrm).dot(&nrm);
                    let t1 = mapped.integrate(|x| hi * wj.gradient(k, x).dot(&nrm));
                    let t2 = mapped.integrate(|x| wi.gradient(k, x).dot(&nrm) * hj);
                    let t3 = mapped.integrate(|x| {
                        wi.gradient(k, x).dot(&nrm) * wj.gradient(k, x).dot(&nrm)
                    });
                    let t4 = mapped.integrate(|x| wi.value(k, x) * wj.value(k, x));
                    oracle += -t1 - t2 + s1 / h * t3 + s2 / h.powi(3) * t4;
                }
                assert!(
                    (correction.get(i, j) - oracle).abs() <= 1e-12,
                    "entry ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn load_vector_basics() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let zero = assemble_load(&space, |_| 0.0, 6).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        // Constant-reproducing combination against f = 1 on one cell gives
        // the cell measure (partition of unity in dof space).
        let rule = simplex_rule::<f64, 2>(4).unwrap();
        let k = 3;
        let basis = space.basis(k);
        let mapped = rule.map_to(&mesh.cell_points(k)).unwrap();
        let mut local = [0.0; 6];
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let mut vals = [0.0; 6];
            basis.values_at(x, &mut vals);
            for i in 0..6 {
                local[i] += w * vals[i];
            }
        }
        // Constant 1 has dof vector (1, 1, 1, 0, 0, 0).
        let combo: f64 = local[..3].iter().sum();
        assert_relative_eq!(combo, mesh.cell_measure(k), epsilon = 1e-14);
    }

    /// Frozen oracle: exact integrals of `2 pi^2 sin(pi x) sin(pi y)` against
    /// the six dual basis functions of the cell with vertices (0,0),
    /// (1/2,0), (1/2,1/2) on the n = 2 uniform mesh, computed independently
    /// with 30-digit adaptive quadrature from first principles.
    #[test]
    fn sine_load_matches_frozen_exact_oracle() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let pi = std::f64::consts::PI;
        let f = |x: &SVector<f64, 2>| 2.0 * pi * pi * (pi * x[0]).sin() * (pi * x[1]).sin();
        let rule = simplex_rule::<f64, 2>(8).unwrap();
        let k = 0;
        assert_eq!(mesh.cell_verts(k), &[0, 1, 4]);
        let basis = space.basis(k);
        let mapped = rule.map_to(&mesh.cell_points(k)).unwrap();
        let mut local = [0.0; 6];
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let mut vals = [0.0; 6];
            basis.values_at(x, &mut vals);
            for i in 0..6 {
                local[i] += w * f(x) * vals[i];
            }
        }
        const EXPECTED: [f64; 6] = [
            0.16073786034774311404,
            0.46267007559646051460,
            0.37659206405579637136,
            -0.072628513128783057032,
            -0.056027203704307597321,
            -0.10132118364233777144,
        ];
        // Degree-8 quadrature on an h = 1/2 cell resolves this integrand to
        // about 1e-7; the exact reference pins sign conventions, not digits.
        for i in 0..6 {
            assert_relative_eq!(local[i], EXPECTED[i], epsilon = 5e-7);
        }
    }

    #[test]
    fn build_system_free_count_and_eps_zero() {
        let mesh = unit_square_uniform::<f64>(4).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let degrees = QuadratureDegrees::default();
        let sys = build_system(
            &space,
            MethodParams::interior_penalty(1.0),
            degrees,
            |_| 1.0,
        )
        .unwrap();
        assert_eq!(sys.n_unknowns(), 49);
        assert!(sys.matrix.is_symmetric());

        // epsilon = 0 drops the Hessian block exactly.
        let sys0 = build_system(
            &space,
            MethodParams::super_penalty(0.0, 1.0),
            degrees,
            |_| 1.0,
        )
        .unwrap();
        let b = assemble_b_sp(&space, 1.0, degrees.assembly).unwrap();
        let keep = space.dofs.free_to_global().to_vec();
        let position: Vec<Option<usize>> =
            (0..space.n_dofs()).map(|dof| space.dofs.free_index(dof)).collect();
        let restricted = b.restrict(&keep, &position);
        assert_eq!(sys0.matrix, restricted);
    }

    #[test]
    fn interior_penalty_matrix_is_positive_definite_on_small_mesh() {
        let mesh = unit_square_uniform::<f64>(4).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let sys = build_system(
            &space,
            MethodParams::interior_penalty(1.0),
            QuadratureDegrees::default(),
            |_| 0.0,
        )
        .unwrap();
        let dense = sys.matrix.to_dense();
        let eig = dense.symmetric_eigen();
        let min = eig.eigenvalues.iter().fold(f64::MAX, |a, &b| a.min(b));
        assert!(min > 0.0, "smallest eigenvalue {min}");
    }

    #[test]
    fn load_scaling_is_linear() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let f = |x: &SVector<f64, 2>| (3.0 * x[0] - x[1]).exp();
        let base = assemble_load(&space, f, 6).unwrap();
        let scaled = assemble_load(&space, |x| 2.0 * f(x), 6).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn assembly_values_stable_under_quadrature_refinement() {
        let mesh = unit_square_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let b4 = assemble_b_ip(&space, 5.0, 4).unwrap();
        let b6 = assemble_b_ip(&space, 5.0, 6).unwrap();
        for i in 0..b4.nrows() {
            let (cols, vals) = b4.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = b6.get(i, j);
                let scale = v.abs().max(w.abs()).max(1e-30);
                assert!(
                    (v - w).abs() / scale <= 1e-12 || (v - w).abs() <= 1e-15,
                    "entry ({i}, {j}): {v} vs {w}"
                );
            }
        }
    }

    /// Same brute-force face-term oracle as the 2D test, on the Kuhn cube.
    #[test]
    fn face_terms_match_per_term_quadrature_oracle_3d() {
        use crate::mesh::unit_cube_uniform;
        let mesh = unit_cube_uniform::<f64>(1).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let sigma = 5.0;
        let b = assemble_b_ip(&space, sigma, 4).unwrap();
        let n = space.n_dofs();

        let rule = face_quadrature::<f64, 3>(6).unwrap();
        let vol_rule = simplex_rule::<f64, 3>(6).unwrap();
        let unit = |i: usize| {
            let mut fe = FeFunction::zeros(n);
            fe.coeffs[i] = 1.0;
            fe
        };
        // A representative batch of rows keeps the n^2 oracle affordable.
        for i in (0..n).step_by(3) {
            let fi = unit(i);
            let wi = space.field(&fi);
            for j in (i..n).step_by(4) {
                let fj = unit(j);
                let wj = space.field(&fj);
                let mut oracle = 0.0;
                for k in 0..mesh.n_cells() {
                    let mapped = vol_rule.map_to(&mesh.cell_points(k)).unwrap();
                    oracle += mapped.integrate(|x| wi.gradient(k, x).dot(&wj.gradient(k, x)));
                }
                for f in 0..mesh.n_faces() {
                    let face = mesh.face(f);
                    let trace = mesh.face_trace(f).unwrap();
                    let navg = 1.0 / trace.ncells() as f64;
                    let mapped = rule.map_to_face(&mesh, f).unwrap();
                    oracle += mapped.integrate(|x| {
                        let avg_i: f64 = trace
                            .sides()
                            .map(|(k, _)| navg * wi.gradient(k, x).dot(&face.normal))
                            .sum();
                        let avg_j: f64 = trace
                            .sides()
                            .map(|(k, _)| navg * wj.gradient(k, x).dot(&face.normal))
                            .sum();
                        let jump_i: f64 =
                            trace.sides().map(|(k, s)| s as f64 * wi.value(k, x)).sum();
                        let jump_j: f64 =
                            trace.sides().map(|(k, s)| s as f64 * wj.value(k, x)).sum();
                        sigma / face.diameter * jump_i * jump_j
                            - avg_i * jump_j
                            - avg_j * jump_i
                    });
                }
                assert!(
                    (b.get(i, j) - oracle).abs() <= 1e-12,
                    "entry ({i}, {j}): {} vs {oracle}",
                    b.get(i, j)
                );
            }
        }
    }

    /// On tetrahedral meshes the default penalty sits below the coercivity
    /// threshold: the gradient-penalty block has a small negative eigenvalue
    /// at sigma = 5 (about -2.7e-2 at n = 1, decaying under refinement but
    /// staying negative), and turns positive definite from about sigma = 7.
    #[test]
    fn penalty_of_five_is_not_coercive_in_3d() {
        use crate::mesh::unit_cube_uniform;
        let mesh = unit_cube_uniform::<f64>(2).unwrap();
        let space = MorleySpace::build(&mesh).unwrap();
        let keep = space.dofs.free_to_global().to_vec();
        let position: Vec<Option<usize>> =
            (0..space.n_dofs()).map(|d| space.dofs.free_index(d)).collect();

        let b5 = assemble_b_ip(&space, 5.0, 4).unwrap().restrict(&keep, &position);
        let min5 = b5
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::MAX, f64::min);
        assert!(min5 < 0.0, "expected indefiniteness at sigma 5, min eig {min5}");

        let b10 = assemble_b_ip(&space, 10.0, 4).unwrap().restrict(&keep, &position);
        let min10 = b10
            .to_dense()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::MAX, f64::min);
        assert!(min10 > 0.0, "sigma 10 must be coercive, min eig {min10}");
    }

    use crate::mesh::SimplexMesh;
}
