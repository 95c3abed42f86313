//! Broken norms, error breakdowns against reference solutions, data
//! oscillation and residual indicators.

use crate::element::{face_quadrature, CellField, FeFunction, MorleySpace};
use crate::mesh::SimplexMesh;
use crate::num::{lit, Real};
use crate::quadrature::{simplex_rule, QuadratureError};
use nalgebra::{DMatrix, DVector, SVector};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("convergence rates need positive errors, got {0}")]
    NonPositiveError(f64),
    #[error("local projection mass matrix is singular")]
    SingularProjection,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Error measures of a difference of two fields.
///
/// `jump` is the square root of the weighted jump sum
/// `sum_F w_F ||[e]||_F^2` with `w_F = h_F^-1`, or `h_F^-(2p+1)` when a
/// super-penalty exponent is given. `triple` combines it with the broken H1
/// seminorm, and `energy` adds the eps-weighted broken H2 part.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBreakdown<R> {
    pub l2: R,
    pub h1_broken: R,
    pub h2_broken: R,
    pub jump: R,
    pub triple: R,
    pub energy: R,
    /// Data oscillation; filled separately by [`oscillation`].
    pub osc: R,
}

/// Norms of `a - b` over the mesh. Face jump terms evaluate both fields from
/// each incident cell, so a continuous reference contributes nothing to
/// interior jumps and exactly its trace on boundary faces.
pub fn error_norms<R: Real, const D: usize>(
    mesh: &SimplexMesh<R, D>,
    a: &impl CellField<R, D>,
    b: &impl CellField<R, D>,
    epsilon: R,
    super_penalty_p: Option<R>,
    degree: usize,
) -> Result<ErrorBreakdown<R>, AnalysisError> {
    let rule = simplex_rule::<R, D>(degree)?;
    let mut l2_sq = R::zero();
    let mut h1_sq = R::zero();
    let mut h2_sq = R::zero();
    for k in 0..mesh.n_cells() {
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let dv = a.value(k, x) - b.value(k, x);
            l2_sq += w * dv * dv;
            let dg = a.gradient(k, x) - b.gradient(k, x);
            h1_sq += w * dg.norm_squared();
            let dh = a.hessian(k, x) - b.hessian(k, x);
            let mut frob = R::zero();
            for r in 0..D {
                for c in 0..D {
                    frob += dh[(r, c)] * dh[(r, c)];
                }
            }
            h2_sq += w * frob;
        }
    }

    let face_rule = face_quadrature::<R, D>(degree)?;
    let mut jump_sq = R::zero();
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        let trace = mesh.face_trace(f).expect("face id in range");
        let weight = match super_penalty_p {
            None => R::one() / face.diameter,
            Some(p) => face.diameter.powf(-(lit::<R>(2.0) * p + R::one())),
        };
        let mapped = face_rule.map_to_face(mesh, f)?;
        let mut norm_sq = R::zero();
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let mut jump = R::zero();
            for (cell, sign) in trace.sides() {
                jump += lit::<R>(sign as f64) * (a.value(cell, x) - b.value(cell, x));
            }
            norm_sq += w * jump * jump;
        }
        jump_sq += weight * norm_sq;
    }

    let triple_sq = h1_sq + jump_sq;
    let energy_sq = epsilon * epsilon * h2_sq + h1_sq + jump_sq;
    Ok(ErrorBreakdown {
        l2: l2_sq.sqrt(),
        h1_broken: h1_sq.sqrt(),
        h2_broken: h2_sq.sqrt(),
        jump: jump_sq.sqrt(),
        triple: triple_sq.sqrt(),
        energy: energy_sq.sqrt(),
        osc: R::zero(),
    })
}

fn monomials_up_to(d: usize, r: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    match d {
        2 => {
            for total in 0..=r {
                for a in (0..=total).rev() {
                    out.push([a, total - a, 0]);
                }
            }
        }
        3 => {
            for total in 0..=r {
                for a in (0..=total).rev() {
                    for b in (0..=total - a).rev() {
                        out.push([a, b, total - a - b]);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Data oscillation `(sum_K h_K^2 ||f - Q_K^r f||_K^2)^(1/2)` where `Q_K^r`
/// is the local L2 projection onto polynomials of degree `r`.
pub fn oscillation<R: Real, const D: usize>(
    mesh: &SimplexMesh<R, D>,
    f: impl Fn(&SVector<R, D>) -> R,
    r: usize,
    degree: usize,
) -> Result<R, AnalysisError> {
    let exps = monomials_up_to(D, r);
    let m = exps.len();
    let quad_degree = degree.max(2 * r);
    let rule = simplex_rule::<R, D>(quad_degree)?;
    let mut total = R::zero();

    let mono = |exp: &[usize; 3], xi: &SVector<R, D>| -> R {
        let mut v = R::one();
        for i in 0..D {
            v *= xi[i].powi(exp[i] as i32);
        }
        v
    };

    for k in 0..mesh.n_cells() {
        let center = mesh.cell_centroid(k);
        let scale = mesh.cell_diameter(k);
        let mapped = rule.map_to(&mesh.cell_points(k))?;

        let mut mass = DMatrix::<R>::zeros(m, m);
        let mut rhs = DVector::<R>::zeros(m);
        let mut basis = vec![R::zero(); m];
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let xi = (x - center) / scale;
            for (i, exp) in exps.iter().enumerate() {
                basis[i] = mono(exp, &xi);
            }
            let fx = f(x);
            for i in 0..m {
                for j in 0..m {
                    mass[(i, j)] += w * basis[i] * basis[j];
                }
                rhs[i] += w * fx * basis[i];
            }
        }
        let coeffs = mass
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| mass.lu().solve(&rhs))
            .ok_or(AnalysisError::SingularProjection)?;

        let mut err_sq = R::zero();
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let xi = (x - center) / scale;
            let mut proj = R::zero();
            for (i, exp) in exps.iter().enumerate() {
                proj += coeffs[i] * mono(exp, &xi);
            }
            let d = f(x) - proj;
            err_sq += w * d * d;
        }
        let h = mesh.cell_diameter(k);
        total += h * h * err_sq;
    }
    Ok(total.sqrt())
}

/// Residual quantities of a discrete function: the volume residual
/// `||f + lap w_h||_K` per cell, the Hessian jump `||[d2nn w_h]||_F` per
/// interior face, and the gradient jump `||[dn w_h]||_F` per face.
#[derive(Debug, Clone)]
pub struct IndicatorField<R> {
    pub volume: Vec<R>,
    /// Aligned with `mesh.interior_faces()`.
    pub hessian_jump: Vec<R>,
    /// Aligned with face ids; boundary entries measure the trace itself.
    pub grad_jump: Vec<R>,
}

impl<R: Real> IndicatorField<R> {
    /// Mesh-weighted aggregate commensurate with the energy error at
    /// `eps = 1`: `h_K^2` on volume residuals, `h_F^(1/2)` on Hessian jumps
    /// and `h_F^(3/2)` on gradient jumps.
    pub fn weighted_total<const D: usize>(&self, mesh: &SimplexMesh<R, D>) -> R {
        let mut total = R::zero();
        for (k, v) in self.volume.iter().enumerate() {
            let h = mesh.cell_diameter(k);
            total += h.powi(4) * *v * *v;
        }
        for (&f, hj) in mesh.interior_faces().iter().zip(&self.hessian_jump) {
            let h = mesh.face(f).diameter;
            total += h * *hj * *hj;
        }
        for (f, gj) in self.grad_jump.iter().enumerate() {
            let h = mesh.face(f).diameter;
            total += h.powi(3) * *gj * *gj;
        }
        total.sqrt()
    }
}

/// Evaluates the residual indicators of a discrete solution `w_h` against
/// the load `f`.
pub fn residual_indicators<R: Real, const D: usize>(
    space: &MorleySpace<R, D>,
    f: impl Fn(&SVector<R, D>) -> R,
    w_h: &FeFunction<R>,
    degree: usize,
) -> Result<IndicatorField<R>, AnalysisError> {
    let mesh = space.mesh;
    let rule = simplex_rule::<R, D>(degree)?;

    let mut volume = Vec::with_capacity(mesh.n_cells());
    for k in 0..mesh.n_cells() {
        // The Laplacian of the cell quadratic is constant.
        let lap = space.eval_hessian(w_h, k).trace();
        let mapped = rule.map_to(&mesh.cell_points(k))?;
        let mut acc = R::zero();
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let res = f(x) + lap;
            acc += w * res * res;
        }
        volume.push(acc.sqrt());
    }

    let mut hessian_jump = Vec::with_capacity(mesh.interior_faces().len());
    for &fid in mesh.interior_faces() {
        let face = mesh.face(fid);
        let normal = face.normal;
        let trace = mesh.face_trace(fid).expect("face id in range");
        let mut jump = R::zero();
        for (cell, sign) in trace.sides() {
            let hnn = (space.eval_hessian(w_h, cell) * normal).dot(&normal);
            jump += lit::<R>(sign as f64) * hnn;
        }
        hessian_jump.push(jump.abs() * face.measure.sqrt());
    }

    let face_rule = face_quadrature::<R, D>(degree.max(2))?;
    let mut grad_jump = Vec::with_capacity(mesh.n_faces());
    for fid in 0..mesh.n_faces() {
        let face = mesh.face(fid);
        let normal = face.normal;
        let trace = mesh.face_trace(fid).expect("face id in range");
        let mapped = face_rule.map_to_face(mesh, fid)?;
        let mut acc = R::zero();
        for (x, &w) in mapped.points.iter().zip(&mapped.weights) {
            let mut jump = R::zero();
            for (cell, sign) in trace.sides() {
                jump += lit::<R>(sign as f64)
                    * space.eval_gradient(w_h, cell, x).dot(&normal);
            }
            acc += w * jump * jump;
        }
        grad_jump.push(acc.sqrt());
    }

    Ok(IndicatorField { volume, hessian_jump, grad_jump })
}

/// `rate_k = log2(e_(k-1) / e_k)` for errors on meshes whose spacing halves
/// per level; the first entry has no predecessor.
pub fn convergence_rates<R: Real>(errors: &[R]) -> Result<Vec<Option<R>>, AnalysisError> {
    for &e in errors {
        if !(e > R::zero()) {
            return Err(AnalysisError::NonPositiveError(e.to_f64_lossy()));
        }
    }
    let mut rates = vec![None];
    for w in errors.windows(2) {
        rates.push(Some((w[0] / w[1]).log2()));
    }
    rates.truncate(errors.len().max(1));
    if errors.is_empty() {
        rates.clear();
    }
    Ok(rates)
}
