//! Structured simplicial meshes of the unit square/cube with the face and
//! subface connectivity needed by nonconforming fourth-order elements.
//!
//! Faces are the (d-1)-subsimplices (edges in 2D, triangles in 3D) and carry
//! a globally fixed unit normal: the outward normal of the incident cell with
//! the smaller index. Subfaces are the (d-2)-subsimplices (vertices in 2D,
//! edges in 3D). Both carry boundary flags and incident-cell lists, which is
//! all the degree-of-freedom layer needs.

use crate::num::{count, Real};
use nalgebra::{SMatrix, SVector};
use std::collections::HashMap;
use std::io;

/// Errors from mesh construction and queries.
#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("subdivision count must be at least 1")]
    ZeroSubdivision,
    #[error("cell list length is not a multiple of d + 1")]
    RaggedCells,
    #[error("cell {0} is degenerate (measure {1:.3e})")]
    DegenerateCell(usize, f64),
    #[error("cell {cell} references vertex {vertex}, but there are only {nverts} vertices")]
    VertexOutOfRange { cell: usize, vertex: usize, nverts: usize },
    #[error("cell {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("a face is shared by more than two cells")]
    NonManifold,
    #[error("invalid face id {0}")]
    InvalidFace(usize),
}

/// A (d-1)-subsimplex with fixed orientation data.
#[derive(Debug, Clone)]
pub struct Face<R: Real, const D: usize> {
    /// Vertex ids, sorted ascending.
    pub verts: [usize; D],
    /// Incident cell with the smaller index; the fixed normal points out of it.
    pub owner: usize,
    /// Second incident cell for interior faces.
    pub neighbor: Option<usize>,
    /// Unit normal, outward with respect to `owner`.
    pub normal: SVector<R, D>,
    /// Diameter (length in 2D, longest edge in 3D).
    pub diameter: R,
    /// Measure (length in 2D, area in 3D).
    pub measure: R,
}

impl<R: Real, const D: usize> Face<R, D> {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

/// A (d-2)-subsimplex: a vertex in 2D, an edge in 3D.
#[derive(Debug, Clone)]
pub struct Subface<R: Real> {
    verts: [usize; 2],
    nverts: usize,
    /// Incident cells, ascending.
    pub cells: Vec<usize>,
    /// Measure against which averages are taken: edge length in 3D, 1 in 2D
    /// (the mean over a point is the point value).
    pub measure: R,
    pub boundary: bool,
}

impl<R: Real> Subface<R> {
    /// Vertex ids (one in 2D, two in 3D), sorted ascending.
    pub fn verts(&self) -> &[usize] {
        &self.verts[..self.nverts]
    }
}

/// Oriented trace context of a face: the cell pair ordered so that the fixed
/// face normal is outward for `plus`, with jump signs `+1` / `-1`.
#[derive(Debug, Clone, Copy)]
pub struct FaceTrace {
    pub plus: usize,
    pub minus: Option<usize>,
}

impl FaceTrace {
    /// Incident cells with their jump sign factors `n_F . n_K`.
    pub fn sides(&self) -> impl Iterator<Item = (usize, i32)> {
        [Some((self.plus, 1)), self.minus.map(|k| (k, -1))]
            .into_iter()
            .flatten()
    }

    pub fn ncells(&self) -> usize {
        1 + self.minus.is_some() as usize
    }
}

/// Local vertex pairs spanning the edges of a tetrahedron, lexicographic.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Conforming simplicial mesh of a polytope in `D` dimensions (`D` = 2 or 3).
#[derive(Debug, Clone)]
pub struct SimplexMesh<R: Real, const D: usize> {
    vertices: Vec<SVector<R, D>>,
    /// Cell-to-vertex connectivity, flattened with stride `D + 1`.
    cells: Vec<usize>,
    faces: Vec<Face<R, D>>,
    subfaces: Vec<Subface<R>>,
    /// Face id of the facet opposite local vertex `j`, stride `D + 1`.
    cell_faces: Vec<usize>,
    /// Subface ids per cell: the 3 vertices in 2D, the 6 edges in
    /// lexicographic local pair order in 3D.
    cell_subfaces: Vec<usize>,
    /// Outward unit normal of facet `j` per cell, stride `D + 1`.
    cell_normals: Vec<SVector<R, D>>,
    cell_diameters: Vec<R>,
    cell_measures: Vec<R>,
    interior_faces: Vec<usize>,
}

impl<R: Real, const D: usize> SimplexMesh<R, D> {
    /// Builds the full topology from raw vertices and flattened cell tuples
    /// (stride `D + 1`). Cell orientation is arbitrary; measures are unsigned.
    pub fn from_cells(vertices: Vec<SVector<R, D>>, cells: Vec<usize>) -> Result<Self, MeshError> {
        assert!(D == 2 || D == 3, "only 2D and 3D meshes are supported");
        if cells.len() % (D + 1) != 0 {
            return Err(MeshError::RaggedCells);
        }
        let ncells = cells.len() / (D + 1);
        let nverts = vertices.len();

        for k in 0..ncells {
            let cv = &cells[k * (D + 1)..(k + 1) * (D + 1)];
            for &v in cv {
                if v >= nverts {
                    return Err(MeshError::VertexOutOfRange { cell: k, vertex: v, nverts });
                }
            }
            for i in 0..D + 1 {
                for j in i + 1..D + 1 {
                    if cv[i] == cv[j] {
                        return Err(MeshError::RepeatedVertex(k));
                    }
                }
            }
        }

        let mut mesh = SimplexMesh {
            vertices,
            cells,
            faces: Vec::new(),
            subfaces: Vec::new(),
            cell_faces: vec![0; ncells * (D + 1)],
            cell_subfaces: Vec::new(),
            cell_normals: vec![SVector::zeros(); ncells * (D + 1)],
            cell_diameters: vec![R::zero(); ncells],
            cell_measures: vec![R::zero(); ncells],
            interior_faces: Vec::new(),
        };
        mesh.build_cell_geometry()?;
        mesh.build_faces()?;
        mesh.build_subfaces();
        Ok(mesh)
    }

    fn build_cell_geometry(&mut self) -> Result<(), MeshError> {
        let factorial = count::<R>((1..=D).product::<usize>());
        for k in 0..self.n_cells() {
            let pts = self.cell_points(k);
            let mut edge_mat = SMatrix::<R, D, D>::zeros();
            for i in 0..D {
                edge_mat.set_column(i, &(pts[i + 1] - pts[0]));
            }
            let measure = det_small(&edge_mat).abs() / factorial;

            let mut diam = R::zero();
            for i in 0..D + 1 {
                for j in i + 1..D + 1 {
                    let d = (pts[i] - pts[j]).norm();
                    if d > diam {
                        diam = d;
                    }
                }
            }
            if !(measure > R::default_epsilon() * diam.powi(D as i32)) {
                return Err(MeshError::DegenerateCell(k, measure.to_f64_lossy()));
            }
            self.cell_measures[k] = measure;
            self.cell_diameters[k] = diam;

            // Outward unit normal of the facet opposite each local vertex.
            for j in 0..D + 1 {
                let facet: Vec<SVector<R, D>> =
                    (0..D + 1).filter(|&i| i != j).map(|i| pts[i]).collect();
                let mut n = facet_normal(&facet);
                let mut mid = SVector::<R, D>::zeros();
                for p in &facet {
                    mid += p;
                }
                mid /= count::<R>(D);
                if n.dot(&(mid - pts[j])) < R::zero() {
                    n = -n;
                }
                self.cell_normals[k * (D + 1) + j] = n;
            }
        }
        Ok(())
    }

    fn build_faces(&mut self) -> Result<(), MeshError> {
        let ncells = self.n_cells();
        let mut index: HashMap<[usize; D], usize> = HashMap::new();
        let mut incidence: Vec<Vec<(usize, usize)>> = Vec::new();

        for k in 0..ncells {
            for j in 0..D + 1 {
                let mut key = [0usize; D];
                let cv = self.cell_verts(k);
                let mut m = 0;
                for (i, &v) in cv.iter().enumerate() {
                    if i != j {
                        key[m] = v;
                        m += 1;
                    }
                }
                key.sort_unstable();
                let fid = *index.entry(key).or_insert_with(|| {
                    incidence.push(Vec::new());
                    incidence.len() - 1
                });
                incidence[fid].push((k, j));
                self.cell_faces[k * (D + 1) + j] = fid;
            }
        }

        // Recover the sorted vertex keys in face-id order.
        let mut keys = vec![[0usize; D]; incidence.len()];
        for (key, &fid) in &index {
            keys[fid] = *key;
        }

        for (fid, inc) in incidence.iter_mut().enumerate() {
            inc.sort_unstable();
            if inc.len() > 2 {
                return Err(MeshError::NonManifold);
            }
            let (owner, owner_facet) = inc[0];
            let neighbor = inc.get(1).map(|&(k, _)| k);
            let verts = keys[fid];
            let pts: Vec<SVector<R, D>> = verts.iter().map(|&v| self.vertices[v]).collect();

            let (measure, diameter) = if D == 2 {
                let len = (pts[1] - pts[0]).norm();
                (len, len)
            } else {
                let area = cross3(&(pts[1] - pts[0]), &(pts[2] - pts[0])).norm() / count::<R>(2);
                let mut diam = R::zero();
                for i in 0..3 {
                    for j in i + 1..3 {
                        let d = (pts[i] - pts[j]).norm();
                        if d > diam {
                            diam = d;
                        }
                    }
                }
                (area, diam)
            };

            self.faces.push(Face {
                verts,
                owner,
                neighbor,
                normal: self.cell_normals[owner * (D + 1) + owner_facet],
                diameter,
                measure,
            });
            if neighbor.is_some() {
                self.interior_faces.push(fid);
            }
        }
        Ok(())
    }

    fn build_subfaces(&mut self) {
        let ncells = self.n_cells();
        let stride = Self::subfaces_per_cell();
        self.cell_subfaces = vec![0; ncells * stride];

        if D == 2 {
            // Subfaces are the vertices themselves, in vertex order.
            self.subfaces = (0..self.n_vertices())
                .map(|v| Subface {
                    verts: [v, usize::MAX],
                    nverts: 1,
                    cells: Vec::new(),
                    measure: R::one(),
                    boundary: false,
                })
                .collect();
            for k in 0..ncells {
                let cv: Vec<usize> = self.cell_verts(k).to_vec();
                for (j, &v) in cv.iter().enumerate() {
                    self.cell_subfaces[k * stride + j] = v;
                    self.subfaces[v].cells.push(k);
                }
            }
        } else {
            let mut index: HashMap<[usize; 2], usize> = HashMap::new();
            for k in 0..ncells {
                let cv: Vec<usize> = self.cell_verts(k).to_vec();
                for (e, &(a, b)) in TET_EDGES.iter().enumerate() {
                    let mut key = [cv[a], cv[b]];
                    key.sort_unstable();
                    let next = self.subfaces.len();
                    let sid = *index.entry(key).or_insert(next);
                    if sid == next {
                        let len = (self.vertices[key[1]] - self.vertices[key[0]]).norm();
                        self.subfaces.push(Subface {
                            verts: key,
                            nverts: 2,
                            cells: Vec::new(),
                            measure: len,
                            boundary: false,
                        });
                    }
                    self.cell_subfaces[k * stride + e] = sid;
                    self.subfaces[sid].cells.push(k);
                }
            }
            for sf in &mut self.subfaces {
                sf.cells.sort_unstable();
                sf.cells.dedup();
            }
        }

        // A subface is on the boundary iff it lies in some boundary face.
        let mut vert_subfaces: HashMap<[usize; 2], usize> = HashMap::new();
        for (sid, sf) in self.subfaces.iter().enumerate() {
            vert_subfaces.insert(sf.verts, sid);
        }
        let mut on_boundary = vec![false; self.subfaces.len()];
        for face in &self.faces {
            if !face.is_boundary() {
                continue;
            }
            if D == 2 {
                for &v in &face.verts {
                    on_boundary[vert_subfaces[&[v, usize::MAX]]] = true;
                }
            } else {
                for i in 0..3 {
                    for j in i + 1..3 {
                        let mut key = [face.verts[i], face.verts[j]];
                        key.sort_unstable();
                        on_boundary[vert_subfaces[&key]] = true;
                    }
                }
            }
        }
        for (sf, flag) in self.subfaces.iter_mut().zip(on_boundary) {
            sf.boundary = flag;
        }
    }

    /// Number of spatial dimensions.
    pub const fn dim(&self) -> usize {
        D
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (D + 1)
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_subfaces(&self) -> usize {
        self.subfaces.len()
    }

    pub fn vertex(&self, v: usize) -> &SVector<R, D> {
        &self.vertices[v]
    }

    pub fn cell_verts(&self, k: usize) -> &[usize] {
        &self.cells[k * (D + 1)..(k + 1) * (D + 1)]
    }

    /// Coordinates of the cell's vertices in local order.
    pub fn cell_points(&self, k: usize) -> Vec<SVector<R, D>> {
        self.cell_verts(k).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn face(&self, f: usize) -> &Face<R, D> {
        &self.faces[f]
    }

    pub fn faces(&self) -> &[Face<R, D>] {
        &self.faces
    }

    pub fn subface(&self, s: usize) -> &Subface<R> {
        &self.subfaces[s]
    }

    pub fn subfaces(&self) -> &[Subface<R>] {
        &self.subfaces
    }

    /// Face ids of cell `k`; entry `j` is the facet opposite local vertex `j`.
    pub fn cell_faces(&self, k: usize) -> &[usize] {
        &self.cell_faces[k * (D + 1)..(k + 1) * (D + 1)]
    }

    /// Subface ids of cell `k` (3 vertices in 2D, 6 edges in 3D).
    pub fn cell_subfaces(&self, k: usize) -> &[usize] {
        let stride = Self::subfaces_per_cell();
        &self.cell_subfaces[k * stride..(k + 1) * stride]
    }

    pub const fn subfaces_per_cell() -> usize {
        if D == 2 {
            3
        } else {
            6
        }
    }

    /// Outward unit normal of facet `j` of cell `k`.
    pub fn cell_outward_normal(&self, k: usize, j: usize) -> &SVector<R, D> {
        &self.cell_normals[k * (D + 1) + j]
    }

    pub fn cell_diameter(&self, k: usize) -> R {
        self.cell_diameters[k]
    }

    pub fn cell_measure(&self, k: usize) -> R {
        self.cell_measures[k]
    }

    pub fn cell_centroid(&self, k: usize) -> SVector<R, D> {
        let mut c = SVector::<R, D>::zeros();
        for &v in self.cell_verts(k) {
            c += self.vertices[v];
        }
        c / count::<R>(D + 1)
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> R {
        self.cell_diameters
            .iter()
            .copied()
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn interior_faces(&self) -> &[usize] {
        &self.interior_faces
    }

    /// Oriented trace context of face `f` for jump/average evaluation.
    pub fn face_trace(&self, f: usize) -> Result<FaceTrace, MeshError> {
        let face = self.faces.get(f).ok_or(MeshError::InvalidFace(f))?;
        Ok(FaceTrace {
            plus: face.owner,
            minus: face.neighbor,
        })
    }

    /// Coordinates of the face's vertices (sorted vertex order).
    pub fn face_points(&self, f: usize) -> Vec<SVector<R, D>> {
        self.faces[f].verts.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn face_centroid(&self, f: usize) -> SVector<R, D> {
        let mut c = SVector::<R, D>::zeros();
        for &v in &self.faces[f].verts {
            c += self.vertices[v];
        }
        c / count::<R>(D)
    }

    /// Plain-text dump: dimension, vertex count, vertex lines, cell count,
    /// cell lines.
    pub fn write_dump<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", D)?;
        writeln!(out, "{}", self.n_vertices())?;
        for v in &self.vertices {
            let coords: Vec<String> = v.iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{}", coords.join(" "))?;
        }
        writeln!(out, "{}", self.n_cells())?;
        for k in 0..self.n_cells() {
            let ids: Vec<String> = self.cell_verts(k).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", ids.join(" "))?;
        }
        Ok(())
    }
}

/// Determinant for the small fixed sizes used here (1 to 3).
pub(crate) fn det_small<R: Real, const N: usize>(m: &SMatrix<R, N, N>) -> R {
    match N {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => unreachable!("determinant only needed up to 3x3"),
    }
}

fn facet_normal<R: Real, const D: usize>(pts: &[SVector<R, D>]) -> SVector<R, D> {
    let mut n = SVector::<R, D>::zeros();
    if D == 2 {
        let t = pts[1] - pts[0];
        n[0] = t[1];
        n[1] = -t[0];
    } else {
        let c = cross3(&(pts[1] - pts[0]), &(pts[2] - pts[0]));
        n.copy_from_slice(c.as_slice());
    }
    n.normalize()
}

fn cross3<R: Real, const D: usize>(a: &SVector<R, D>, b: &SVector<R, D>) -> SVector<R, 3> {
    debug_assert_eq!(D, 3);
    SVector::<R, 3>::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

/// Uniform triangulation of the unit square: an `n x n` grid of squares, each
/// split by the diagonal from its lower-left to its upper-right corner.
pub fn unit_square_uniform<R: Real>(n: usize) -> Result<SimplexMesh<R, 2>, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivision);
    }
    let step = R::one() / count::<R>(n);
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(SVector::<R, 2>::new(count::<R>(i) * step, count::<R>(j) * step));
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n * 3);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            cells.extend_from_slice(&[a, b, c]);
            cells.extend_from_slice(&[a, c, d]);
        }
    }
    SimplexMesh::from_cells(vertices, cells)
}

/// Uniform triangulation of the unit cube: each subcube of an `n^3` grid is
/// split into the six tetrahedra sharing its main diagonal (Kuhn split,
/// conforming across subcubes).
pub fn unit_cube_uniform<R: Real>(n: usize) -> Result<SimplexMesh<R, 3>, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroSubdivision);
    }
    let step = R::one() / count::<R>(n);
    let vid = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(SVector::<R, 3>::new(
                    count::<R>(i) * step,
                    count::<R>(j) * step,
                    count::<R>(k) * step,
                ));
            }
        }
    }
    const AXIS_ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(6 * n * n * n * 4);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut corner = [i, j, k];
                    let mut tet = [vid(corner[0], corner[1], corner[2]); 4];
                    for (step_idx, &axis) in order.iter().enumerate() {
                        corner[axis] += 1;
                        tet[step_idx + 1] = vid(corner[0], corner[1], corner[2]);
                    }
                    cells.extend_from_slice(&tet);
                }
            }
        }
    }
    SimplexMesh::from_cells(vertices, cells)
}
