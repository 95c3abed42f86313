//! The Morley-Wang-Xu element: piecewise quadratics on simplices whose
//! degrees of freedom are mean values over (d-2)-subsimplices (point values
//! in 2D, edge means in 3D) and mean normal derivatives over (d-1)-faces.
//!
//! Every cell gets its own dual basis, solved from the nodal conditions in a
//! centered and scaled local frame. Mapping a reference basis would not work
//! here: the normal-derivative functionals are not affine-equivalent, and the
//! per-cell solve also keeps the sign of each face functional tied to the
//! globally fixed face normal.

use crate::mesh::SimplexMesh;
use crate::num::{count, lit, Real};
use crate::quadrature::{simplex_rule, QuadratureError};
use nalgebra::{DMatrix, SMatrix, SVector};

#[derive(Debug, thiserror::Error)]
pub enum ElementError {
    #[error("nodal system of cell {0} is singular")]
    SingularNodalSystem(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// What a global degree of freedom is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofCarrier {
    /// Value mean over a (d-2)-subsimplex.
    Subface(usize),
    /// Normal-derivative mean over a (d-1)-face.
    Face(usize),
}

/// Global enumeration of the element's degrees of freedom: all subface value
/// means first (in mesh order), then all face normal-derivative means.
#[derive(Debug, Clone)]
pub struct DofMap {
    n_subfaces: usize,
    n_faces: usize,
    boundary: Vec<bool>,
    /// Local-to-global indices per cell, stride `nb`.
    cell_dofs: Vec<usize>,
    nb: usize,
    /// Free (interior) index per global dof, `usize::MAX` on the boundary.
    free_index: Vec<usize>,
    free_to_global: Vec<usize>,
}

impl DofMap {
    pub fn build<R: Real, const D: usize>(mesh: &SimplexMesh<R, D>) -> Self {
        let n_subfaces = mesh.n_subfaces();
        let n_faces = mesh.n_faces();
        let total = n_subfaces + n_faces;
        let nb = SimplexMesh::<R, D>::subfaces_per_cell() + D + 1;

        let mut boundary = vec![false; total];
        for (s, sf) in mesh.subfaces().iter().enumerate() {
            boundary[s] = sf.boundary;
        }
        for (f, face) in mesh.faces().iter().enumerate() {
            boundary[n_subfaces + f] = face.is_boundary();
        }

        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * nb);
        for k in 0..mesh.n_cells() {
            for &s in mesh.cell_subfaces(k) {
                cell_dofs.push(s);
            }
            for &f in mesh.cell_faces(k) {
                cell_dofs.push(n_subfaces + f);
            }
        }

        let mut free_index = vec![usize::MAX; total];
        let mut free_to_global = Vec::new();
        for (dof, &on_boundary) in boundary.iter().enumerate() {
            if !on_boundary {
                free_index[dof] = free_to_global.len();
                free_to_global.push(dof);
            }
        }

        DofMap { n_subfaces, n_faces, boundary, cell_dofs, nb, free_index, free_to_global }
    }

    /// Total number of degrees of freedom (subfaces + faces).
    pub fn total(&self) -> usize {
        self.n_subfaces + self.n_faces
    }

    /// Number of interior (non-boundary) degrees of freedom.
    pub fn n_free(&self) -> usize {
        self.free_to_global.len()
    }

    /// Local basis size per cell: 6 in 2D, 10 in 3D.
    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    pub fn subface_dof(&self, s: usize) -> usize {
        s
    }

    pub fn face_dof(&self, f: usize) -> usize {
        self.n_subfaces + f
    }

    pub fn carrier(&self, dof: usize) -> DofCarrier {
        if dof < self.n_subfaces {
            DofCarrier::Subface(dof)
        } else {
            DofCarrier::Face(dof - self.n_subfaces)
        }
    }

    /// Global dof indices of cell `k` in local order: subface dofs first,
    /// then the face dofs of the facets opposite each local vertex.
    pub fn cell_dofs(&self, k: usize) -> &[usize] {
        &self.cell_dofs[k * self.nb..(k + 1) * self.nb]
    }

    /// Free index of a global dof, or `None` on the boundary.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.free_index[dof];
        (i != usize::MAX).then_some(i)
    }

    pub fn free_to_global(&self) -> &[usize] {
        &self.free_to_global
    }
}

/// Monomial exponents in the local frame; the first `D` entries are used.
const EXP_2D: [[usize; 3]; 6] =
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0], [1, 1, 0], [0, 2, 0]];
const EXP_3D: [[usize; 3]; 10] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
];

fn exponents<const D: usize>() -> &'static [[usize; 3]] {
    if D == 2 {
        &EXP_2D
    } else {
        &EXP_3D
    }
}

fn mono_value<R: Real, const D: usize>(exp: &[usize; 3], xi: &SVector<R, D>) -> R {
    let mut v = R::one();
    for i in 0..D {
        v *= xi[i].powi(exp[i] as i32);
    }
    v
}

fn mono_gradient<R: Real, const D: usize>(exp: &[usize; 3], xi: &SVector<R, D>) -> SVector<R, D> {
    let mut g = SVector::<R, D>::zeros();
    for i in 0..D {
        if exp[i] == 0 {
            continue;
        }
        let mut v = count::<R>(exp[i]) * xi[i].powi(exp[i] as i32 - 1);
        for j in 0..D {
            if j != i {
                v *= xi[j].powi(exp[j] as i32);
            }
        }
        g[i] = v;
    }
    g
}

fn mono_hessian<R: Real, const D: usize>(exp: &[usize; 3]) -> SMatrix<R, D, D> {
    let mut h = SMatrix::<R, D, D>::zeros();
    for i in 0..D {
        if exp[i] == 2 {
            h[(i, i)] = lit(2.0);
        }
        for j in i + 1..D {
            if exp[i] == 1 && exp[j] == 1 {
                h[(i, j)] = R::one();
                h[(j, i)] = R::one();
            }
        }
    }
    h
}

/// The quadratic dual basis of one cell, stored as monomial coefficients in
/// the cell's centered and scaled frame.
#[derive(Debug, Clone)]
pub struct CellBasis<R: Real, const D: usize> {
    pub cell: usize,
    center: SVector<R, D>,
    scale: R,
    /// Column `j` holds the monomial coefficients of basis function `j`.
    coeffs: DMatrix<R>,
    /// Constant physical Hessian per basis function.
    hessians: Vec<SMatrix<R, D, D>>,
}

impl<R: Real, const D: usize> CellBasis<R, D> {
    /// Solves the nodal conditions on cell `k`: basis function `j` takes the
    /// value 1 under local functional `j` and 0 under the others. Normal
    /// derivatives are taken along the globally fixed face normals.
    pub fn build(mesh: &SimplexMesh<R, D>, k: usize) -> Result<Self, ElementError> {
        let nb = DofMap::nb_for::<D>();
        let center = mesh.cell_centroid(k);
        let scale = mesh.cell_diameter(k);
        let exps = exponents::<D>();
        let to_xi = |x: &SVector<R, D>| (x - center) / scale;

        let mut nodal = DMatrix::<R>::zeros(nb, nb);
        let mut row = 0;

        if D == 2 {
            for &v in mesh.cell_verts(k) {
                let xi = to_xi(mesh.vertex(v));
                for (m, exp) in exps.iter().enumerate() {
                    nodal[(row, m)] = mono_value(exp, &xi);
                }
                row += 1;
            }
        } else {
            for &s in mesh.cell_subfaces(k) {
                let verts = mesh.subface(s).verts();
                let a = *mesh.vertex(verts[0]);
                let b = *mesh.vertex(verts[1]);
                let mid = (a + b) / lit::<R>(2.0);
                let (xa, xm, xb) = (to_xi(&a), to_xi(&mid), to_xi(&b));
                let sixth = lit::<R>(1.0 / 6.0);
                for (m, exp) in exps.iter().enumerate() {
                    // Simpson: exact edge mean for cubics.
                    nodal[(row, m)] = (mono_value(exp, &xa)
                        + lit::<R>(4.0) * mono_value(exp, &xm)
                        + mono_value(exp, &xb))
                        * sixth;
                }
                row += 1;
            }
        }

        for &f in mesh.cell_faces(k) {
            let normal = mesh.face(f).normal;
            let xi = to_xi(&mesh.face_centroid(f));
            for (m, exp) in exps.iter().enumerate() {
                // The gradient is affine, so its face mean is its centroid
                // value; the 1/scale accounts for the local frame.
                nodal[(row, m)] = mono_gradient(exp, &xi).dot(&normal) / scale;
            }
            row += 1;
        }
        debug_assert_eq!(row, nb);

        let coeffs = nodal
            .lu()
            .try_inverse()
            .ok_or(ElementError::SingularNodalSystem(k))?;

        let hessians = (0..nb)
            .map(|j| {
                let mut h = SMatrix::<R, D, D>::zeros();
                for (m, exp) in exps.iter().enumerate() {
                    h += mono_hessian::<R, D>(exp) * coeffs[(m, j)];
                }
                h / (scale * scale)
            })
            .collect();

        Ok(CellBasis { cell: k, center, scale, coeffs, hessians })
    }

    pub fn nb(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn value(&self, j: usize, x: &SVector<R, D>) -> R {
        let xi = (x - self.center) / self.scale;
        let mut v = R::zero();
        for (m, exp) in exponents::<D>().iter().enumerate() {
            v += self.coeffs[(m, j)] * mono_value(exp, &xi);
        }
        v
    }

    pub fn gradient(&self, j: usize, x: &SVector<R, D>) -> SVector<R, D> {
        let xi = (x - self.center) / self.scale;
        let mut g = SVector::<R, D>::zeros();
        for (m, exp) in exponents::<D>().iter().enumerate() {
            g += mono_gradient(exp, &xi) * self.coeffs[(m, j)];
        }
        g / self.scale
    }

    pub fn hessian(&self, j: usize) -> &SMatrix<R, D, D> {
        &self.hessians[j]
    }

    pub fn laplacian(&self, j: usize) -> R {
        self.hessians[j].trace()
    }

    /// All basis values at `x`.
    pub fn values_at(&self, x: &SVector<R, D>, out: &mut [R]) {
        let xi = (x - self.center) / self.scale;
        let exps = exponents::<D>();
        for (j, slot) in out.iter_mut().enumerate() {
            let mut v = R::zero();
            for (m, exp) in exps.iter().enumerate() {
                v += self.coeffs[(m, j)] * mono_value(exp, &xi);
            }
            *slot = v;
        }
    }

    /// All basis gradients at `x`.
    pub fn gradients_at(&self, x: &SVector<R, D>, out: &mut [SVector<R, D>]) {
        let xi = (x - self.center) / self.scale;
        let exps = exponents::<D>();
        for (j, slot) in out.iter_mut().enumerate() {
            let mut g = SVector::<R, D>::zeros();
            for (m, exp) in exps.iter().enumerate() {
                g += mono_gradient(exp, &xi) * self.coeffs[(m, j)];
            }
            *slot = g / self.scale;
        }
    }
}

impl DofMap {
    const fn nb_for<const D: usize>() -> usize {
        if D == 2 {
            6
        } else {
            10
        }
    }
}

/// The assembled global element space: dof map plus one dual basis per cell.
#[derive(Debug)]
pub struct MorleySpace<'m, R: Real, const D: usize> {
    pub mesh: &'m SimplexMesh<R, D>,
    pub dofs: DofMap,
    bases: Vec<CellBasis<R, D>>,
}

impl<'m, R: Real, const D: usize> MorleySpace<'m, R, D> {
    pub fn build(mesh: &'m SimplexMesh<R, D>) -> Result<Self, ElementError> {
        let dofs = DofMap::build(mesh);
        let bases = (0..mesh.n_cells())
            .map(|k| CellBasis::build(mesh, k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MorleySpace { mesh, dofs, bases })
    }

    pub fn basis(&self, k: usize) -> &CellBasis<R, D> {
        &self.bases[k]
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.total()
    }

    /// Evaluates a coefficient vector on cell `k`.
    pub fn eval_value(&self, fe: &FeFunction<R>, k: usize, x: &SVector<R, D>) -> R {
        let basis = &self.bases[k];
        let mut v = R::zero();
        for (j, &dof) in self.dofs.cell_dofs(k).iter().enumerate() {
            v += fe.coeffs[dof] * basis.value(j, x);
        }
        v
    }

    pub fn eval_gradient(&self, fe: &FeFunction<R>, k: usize, x: &SVector<R, D>) -> SVector<R, D> {
        let basis = &self.bases[k];
        let mut g = SVector::<R, D>::zeros();
        for (j, &dof) in self.dofs.cell_dofs(k).iter().enumerate() {
            g += basis.gradient(j, x) * fe.coeffs[dof];
        }
        g
    }

    /// The Hessian of a piecewise quadratic is constant per cell.
    pub fn eval_hessian(&self, fe: &FeFunction<R>, k: usize) -> SMatrix<R, D, D> {
        let basis = &self.bases[k];
        let mut h = SMatrix::<R, D, D>::zeros();
        for (j, &dof) in self.dofs.cell_dofs(k).iter().enumerate() {
            h += basis.hessian(j) * fe.coeffs[dof];
        }
        h
    }

    /// Nodal interpolation: every dof is the corresponding functional of `u`
    /// (point/edge value means and face normal-derivative means, evaluated by
    /// quadrature of the given degree so non-polynomial data works too).
    pub fn interpolate(
        &self,
        u: &impl ScalarField<R, D>,
        quad_degree: usize,
    ) -> Result<FeFunction<R>, ElementError> {
        let mesh = self.mesh;
        let mut coeffs = vec![R::zero(); self.n_dofs()];

        if D == 2 {
            for (s, sf) in mesh.subfaces().iter().enumerate() {
                coeffs[self.dofs.subface_dof(s)] = u.value(mesh.vertex(sf.verts()[0]));
            }
        } else {
            let rule = simplex_rule::<R, 1>(quad_degree)?;
            for (s, sf) in mesh.subfaces().iter().enumerate() {
                let pts = [*mesh.vertex(sf.verts()[0]), *mesh.vertex(sf.verts()[1])];
                let mapped = rule.map_to(&pts)?;
                let integral = mapped.integrate(|x| u.value(x));
                coeffs[self.dofs.subface_dof(s)] = integral / sf.measure;
            }
        }

        let face_rule = face_quadrature::<R, D>(quad_degree)?;
        for (f, face) in mesh.faces().iter().enumerate() {
            let mapped = face_rule.map_to_face(mesh, f)?;
            let normal = face.normal;
            let integral = mapped.integrate(|x| u.gradient(x).dot(&normal));
            coeffs[self.dofs.face_dof(f)] = integral / face.measure;
        }

        Ok(FeFunction { coeffs })
    }

    /// Cell-aware view for norm and form evaluation.
    pub fn field<'a>(&'a self, fe: &'a FeFunction<R>) -> FeField<'a, 'm, R, D> {
        FeField { space: self, fe }
    }
}

/// A coefficient vector over the global dofs of a [`MorleySpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction<R: Real> {
    pub coeffs: Vec<R>,
}

impl<R: Real> FeFunction<R> {
    pub fn zeros(n: usize) -> Self {
        FeFunction { coeffs: vec![R::zero(); n] }
    }
}

/// A smooth scalar function with derivatives through second order.
pub trait ScalarField<R: Real, const D: usize> {
    fn value(&self, x: &SVector<R, D>) -> R;
    fn gradient(&self, x: &SVector<R, D>) -> SVector<R, D>;
    fn hessian(&self, x: &SVector<R, D>) -> SMatrix<R, D, D>;
}

/// A field whose traces depend on the cell it is evaluated from; finite
/// element functions are of this kind, globally smooth fields trivially so.
pub trait CellField<R: Real, const D: usize> {
    fn value(&self, cell: usize, x: &SVector<R, D>) -> R;
    fn gradient(&self, cell: usize, x: &SVector<R, D>) -> SVector<R, D>;
    fn hessian(&self, cell: usize, x: &SVector<R, D>) -> SMatrix<R, D, D>;
}

/// Adapter treating a globally smooth field as a (trivially) cell-aware one.
pub struct Smooth<T>(pub T);

impl<R: Real, const D: usize, T: ScalarField<R, D>> CellField<R, D> for Smooth<T> {
    fn value(&self, _cell: usize, x: &SVector<R, D>) -> R {
        self.0.value(x)
    }

    fn gradient(&self, _cell: usize, x: &SVector<R, D>) -> SVector<R, D> {
        self.0.gradient(x)
    }

    fn hessian(&self, _cell: usize, x: &SVector<R, D>) -> SMatrix<R, D, D> {
        self.0.hessian(x)
    }
}

/// Borrowing view pairing a coefficient vector with its space.
pub struct FeField<'a, 'm, R: Real, const D: usize> {
    pub space: &'a MorleySpace<'m, R, D>,
    pub fe: &'a FeFunction<R>,
}

impl<R: Real, const D: usize> CellField<R, D> for FeField<'_, '_, R, D> {
    fn value(&self, cell: usize, x: &SVector<R, D>) -> R {
        self.space.eval_value(self.fe, cell, x)
    }

    fn gradient(&self, cell: usize, x: &SVector<R, D>) -> SVector<R, D> {
        self.space.eval_gradient(self.fe, cell, x)
    }

    fn hessian(&self, cell: usize, _x: &SVector<R, D>) -> SMatrix<R, D, D> {
        self.space.eval_hessian(self.fe, cell)
    }
}

/// A scalar field defined by closures; handy for manufactured solutions.
pub struct AnalyticField<V, G, H> {
    pub value: V,
    pub gradient: G,
    pub hessian: H,
}

impl<R, const D: usize, V, G, H> ScalarField<R, D> for AnalyticField<V, G, H>
where
    R: Real,
    V: Fn(&SVector<R, D>) -> R,
    G: Fn(&SVector<R, D>) -> SVector<R, D>,
    H: Fn(&SVector<R, D>) -> SMatrix<R, D, D>,
{
    fn value(&self, x: &SVector<R, D>) -> R {
        (self.value)(x)
    }

    fn gradient(&self, x: &SVector<R, D>) -> SVector<R, D> {
        (self.gradient)(x)
    }

    fn hessian(&self, x: &SVector<R, D>) -> SMatrix<R, D, D> {
        (self.hessian)(x)
    }
}

/// Rule on the (d-1)-dimensional face simplex, wrapped so callers do not need
/// to spell the face dimension.
pub struct FaceRule<R: Real>(FaceRuleInner<R>);

enum FaceRuleInner<R: Real> {
    Segment(crate::quadrature::QuadratureRule<R, 1>),
    Triangle(crate::quadrature::QuadratureRule<R, 2>),
}

impl<R: Real> FaceRule<R> {
    pub fn map_to_face<const D: usize>(
        &self,
        mesh: &SimplexMesh<R, D>,
        f: usize,
    ) -> Result<crate::quadrature::MappedRule<R, D>, QuadratureError> {
        let pts = mesh.face_points(f);
        match &self.0 {
            FaceRuleInner::Segment(rule) => rule.map_to(&pts),
            FaceRuleInner::Triangle(rule) => rule.map_to(&pts),
        }
    }
}

/// Quadrature on faces: segments in 2D, triangles in 3D.
pub fn face_quadrature<R: Real, const D: usize>(
    degree: usize,
) -> Result<FaceRule<R>, QuadratureError> {
    Ok(FaceRule(if D == 2 {
        FaceRuleInner::Segment(simplex_rule::<R, 1>(degree)?)
    } else {
        FaceRuleInner::Triangle(simplex_rule::<R, 2>(degree)?)
    }))
}
