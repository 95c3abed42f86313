//! Fixed-order quadrature on reference simplices (segment, triangle,
//! tetrahedron).
//!
//! All rules are hard-coded tables with strictly positive weights and points
//! inside the simplex. Up to degree 6 (degree 8 on the triangle) they are
//! symmetric Gauss-type rules; tetrahedral degrees 7-9 are served by a
//! conical-product table. Points are stored in reference-simplex coordinates
//! `x_1..x_S` (the trailing barycentric coordinates); weights sum to the
//! reference measure `1/S!`.

use crate::num::{count, lit, Real};
use nalgebra::{SMatrix, SVector};

/// Errors from rule lookup and mapping.
#[derive(Debug, thiserror::Error)]
pub enum QuadratureError {
    #[error("no rule of degree {degree} on the {dim}-simplex (max {max})")]
    UnsupportedDegree { dim: usize, degree: usize, max: usize },
    #[error("cannot map rule onto a degenerate simplex (measure {0:.3e})")]
    DegenerateSimplex(f64),
}

/// Quadrature rule on the reference `S`-simplex.
#[derive(Debug, Clone)]
pub struct QuadratureRule<R: Real, const S: usize> {
    points: Vec<SVector<R, S>>,
    weights: Vec<R>,
    exactness: usize,
}

/// A rule pushed forward onto a physical simplex embedded in `D` dimensions.
#[derive(Debug, Clone)]
pub struct MappedRule<R: Real, const D: usize> {
    pub points: Vec<SVector<R, D>>,
    pub weights: Vec<R>,
}

impl<R: Real, const D: usize> MappedRule<R, D> {
    pub fn integrate(&self, mut f: impl FnMut(&SVector<R, D>) -> R) -> R {
        let mut acc = R::zero();
        for (x, &w) in self.points.iter().zip(&self.weights) {
            acc += w * f(x);
        }
        acc
    }
}

impl<R: Real, const S: usize> QuadratureRule<R, S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SVector<R, S>] {
        &self.points
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    /// Total polynomial degree the rule integrates exactly.
    pub fn exactness_degree(&self) -> usize {
        self.exactness
    }

    /// Full barycentric coordinates of point `i` (leading coordinate first).
    pub fn barycentric(&self, i: usize) -> (R, SVector<R, S>) {
        let p = self.points[i];
        let mut first = R::one();
        for c in p.iter() {
            first -= *c;
        }
        (first, p)
    }

    /// Affine image of the rule on the simplex spanned by `verts`
    /// (`S + 1` points in `D`-space, `S <= D`), with weights scaled by the
    /// simplex measure over the reference measure.
    pub fn map_to<const D: usize>(
        &self,
        verts: &[SVector<R, D>],
    ) -> Result<MappedRule<R, D>, QuadratureError> {
        assert_eq!(verts.len(), S + 1, "simplex needs S + 1 vertices");
        let mut edges = nalgebra::SMatrix::<R, D, S>::zeros();
        for i in 0..S {
            edges.set_column(i, &(verts[i + 1] - verts[0]));
        }
        let ref_measure_inv = count::<R>((1..=S).product::<usize>());
        let gram: SMatrix<R, S, S> = edges.transpose() * edges;
        let measure = crate::mesh::det_small(&gram).sqrt() / ref_measure_inv;
        if !(measure > R::zero()) {
            return Err(QuadratureError::DegenerateSimplex(measure.to_f64_lossy()));
        }
        let scale = measure * ref_measure_inv;
        let points = self
            .points
            .iter()
            .map(|q| {
                let mut x = verts[0];
                for i in 0..S {
                    x += (verts[i + 1] - verts[0]) * q[i];
                }
                x
            })
            .collect();
        let weights = self.weights.iter().map(|&w| w * scale).collect();
        Ok(MappedRule { points, weights })
    }
}

/// Returns a rule on the reference `S`-simplex exact for polynomials of total
/// degree at least `degree`.
pub fn simplex_rule<R: Real, const S: usize>(
    degree: usize,
) -> Result<QuadratureRule<R, S>, QuadratureError> {
    let wanted = degree.max(1);
    let not_found = |max| QuadratureError::UnsupportedDegree { dim: S, degree, max };
    match S {
        1 => {
            const DEGREES: [usize; 5] = [1, 3, 5, 7, 9];
            let table: [&[[f64; 2]]; 5] = [&SEG_D1, &SEG_D3, &SEG_D5, &SEG_D7, &SEG_D9];
            for (&d, t) in DEGREES.iter().zip(table) {
                if d >= wanted {
                    return Ok(from_table::<R, S, 2>(t, d));
                }
            }
            Err(not_found(9))
        }
        2 => {
            const DEGREES: [usize; 6] = [1, 2, 4, 5, 6, 8];
            let table: [&[[f64; 3]]; 6] = [&TRI_D1, &TRI_D2, &TRI_D4, &TRI_D5, &TRI_D6, &TRI_D8];
            for (&d, t) in DEGREES.iter().zip(table) {
                if d >= wanted {
                    return Ok(from_table::<R, S, 3>(t, d));
                }
            }
            Err(not_found(8))
        }
        3 => {
            const DEGREES: [usize; 5] = [1, 2, 5, 6, 9];
            let table: [&[[f64; 4]]; 5] = [&TET_D1, &TET_D2, &TET_D5, &TET_D6, &TET_D9];
            for (&d, t) in DEGREES.iter().zip(table) {
                if d >= wanted {
                    return Ok(from_table::<R, S, 4>(t, d));
                }
            }
            Err(not_found(9))
        }
        _ => Err(not_found(0)),
    }
}

fn from_table<R: Real, const S: usize, const W: usize>(
    rows: &[[f64; W]],
    exactness: usize,
) -> QuadratureRule<R, S> {
    debug_assert_eq!(W, S + 1);
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for row in rows {
        let mut p = SVector::<R, S>::zeros();
        for i in 0..S {
            p[i] = lit(row[i]);
        }
        points.push(p);
        weights.push(lit(row[S]));
    }
    QuadratureRule { points, weights, exactness }
}

// Rows are `[x_1..x_S, weight]`; weights include the reference measure, so
// they sum to 1, 1/2, 1/6 for S = 1, 2, 3.

// SEG_D1: 1 points, exact to total degree 1
const SEG_D1: [[f64; 2]; 1] = [
    [5.00000000000000000e-01, 1.00000000000000000e+00],
];

// SEG_D3: 2 points, exact to total degree 3
const SEG_D3: [[f64; 2]; 2] = [
    [2.11324865405187134e-01, 5.00000000000000000e-01],
    [7.88675134594812866e-01, 5.00000000000000000e-01],
];

// SEG_D5: 3 points, exact to total degree 5
const SEG_D5: [[f64; 2]; 3] = [
    [1.12701665379258298e-01, 2.77777777777777901e-01],
    [5.00000000000000000e-01, 4.44444444444444142e-01],
    [8.87298334620741702e-01, 2.77777777777777901e-01],
];

// SEG_D7: 4 points, exact to total degree 7
const SEG_D7: [[f64; 2]; 4] = [
    [6.94318442029737137e-02, 1.73927422568726897e-01],
    [3.30009478207571871e-01, 3.26072577431273103e-01],
    [6.69990521792428129e-01, 3.26072577431273103e-01],
    [9.30568155797026286e-01, 1.73927422568726897e-01],
];

// SEG_D9: 5 points, exact to total degree 9
const SEG_D9: [[f64; 2]; 5] = [
    [4.69100770306680285e-02, 1.18463442528094530e-01],
    [2.30765344947158454e-01, 2.39314335249683235e-01],
    [5.00000000000000000e-01, 2.84444444444444469e-01],
    [7.69234655052841546e-01, 2.39314335249683235e-01],
    [9.53089922969331972e-01, 1.18463442528094530e-01],
];

// TRI_D1: 1 points, exact to total degree 1
const TRI_D1: [[f64; 3]; 1] = [
    [3.33333333333333315e-01, 3.33333333333333315e-01, 5.00000000000000000e-01],
];

// TRI_D2: 3 points, exact to total degree 2
const TRI_D2: [[f64; 3]; 3] = [
    [1.66666666666666657e-01, 1.66666666666666657e-01, 1.66666666666666657e-01],
    [1.66666666666666657e-01, 6.66666666666666630e-01, 1.66666666666666657e-01],
    [6.66666666666666630e-01, 1.66666666666666657e-01, 1.66666666666666657e-01],
];

// TRI_D4: 6 points, exact to total degree 4
const TRI_D4: [[f64; 3]; 6] = [
    [4.45948490915964779e-01, 4.45948490915964779e-01, 1.11690794839005569e-01],
    [1.08103018168070442e-01, 4.45948490915964779e-01, 1.11690794839005569e-01],
    [4.45948490915964779e-01, 1.08103018168070442e-01, 1.11690794839005569e-01],
    [9.15762135097710206e-02, 8.16847572980457959e-01, 5.49758718276611158e-02],
    [8.16847572980457959e-01, 9.15762135097710206e-02, 5.49758718276611158e-02],
    [9.15762135097710206e-02, 9.15762135097710206e-02, 5.49758718276611158e-02],
];

// TRI_D5: 7 points, exact to total degree 5
const TRI_D5: [[f64; 3]; 7] = [
    [3.33333333333333315e-01, 3.33333333333333315e-01, 1.12500000000000003e-01],
    [4.70142064105115109e-01, 4.70142064105115109e-01, 6.61970763942530820e-02],
    [5.97158717897698205e-02, 4.70142064105115109e-01, 6.61970763942530820e-02],
    [4.70142064105115109e-01, 5.97158717897698205e-02, 6.61970763942530820e-02],
    [1.01286507323456329e-01, 7.97426985353087322e-01, 6.29695902724135762e-02],
    [7.97426985353087322e-01, 1.01286507323456329e-01, 6.29695902724135762e-02],
    [1.01286507323456329e-01, 1.01286507323456329e-01, 6.29695902724135762e-02],
];

// TRI_D6: 12 points, exact to total degree 6
const TRI_D6: [[f64; 3]; 12] = [
    [2.49286745170910414e-01, 2.49286745170910414e-01, 5.83931378631896840e-02],
    [5.01426509658179173e-01, 2.49286745170910414e-01, 5.83931378631896840e-02],
    [2.49286745170910414e-01, 5.01426509658179173e-01, 5.83931378631896840e-02],
    [6.30890144915022161e-02, 6.30890144915022161e-02, 2.54224531851034084e-02],
    [8.73821971016995568e-01, 6.30890144915022161e-02, 2.54224531851034084e-02],
    [6.30890144915022161e-02, 8.73821971016995568e-01, 2.54224531851034084e-02],
    [5.31450498448169383e-02, 3.10352451033784393e-01, 4.14255378091867827e-02],
    [5.31450498448169383e-02, 6.36502499121398668e-01, 4.14255378091867827e-02],
    [3.10352451033784393e-01, 5.31450498448169383e-02, 4.14255378091867827e-02],
    [3.10352451033784393e-01, 6.36502499121398668e-01, 4.14255378091867827e-02],
    [6.36502499121398668e-01, 5.31450498448169383e-02, 4.14255378091867827e-02],
    [6.36502499121398668e-01, 3.10352451033784393e-01, 4.14255378091867827e-02],
];

// TRI_D8: 16 points, exact to total degree 8
const TRI_D8: [[f64; 3]; 16] = [
    [3.33333333333333315e-01, 3.33333333333333315e-01, 7.21578038388935697e-02],
    [4.59292588292723125e-01, 4.59292588292723125e-01, 4.75458171336424246e-02],
    [8.14148234145537497e-02, 4.59292588292723125e-01, 4.75458171336424246e-02],
    [4.59292588292723125e-01, 8.14148234145537497e-02, 4.75458171336424246e-02],
    [1.70569307751760193e-01, 1.70569307751760193e-01, 5.16086852673591592e-02],
    [6.58861384496479557e-01, 1.70569307751760193e-01, 5.16086852673591592e-02],
    [1.70569307751760193e-01, 6.58861384496479557e-01, 5.16086852673591592e-02],
    [5.05472283170309566e-02, 5.05472283170309566e-02, 1.62292488115990402e-02],
    [8.98905543365938087e-01, 5.05472283170309566e-02, 1.62292488115990402e-02],
    [5.05472283170309566e-02, 8.98905543365938087e-01, 1.62292488115990402e-02],
    [8.39477740995760531e-03, 2.63112829634638113e-01, 1.36151570872174971e-02],
    [8.39477740995760531e-03, 7.28492392955404282e-01, 1.36151570872174971e-02],
    [2.63112829634638113e-01, 8.39477740995760531e-03, 1.36151570872174971e-02],
    [2.63112829634638113e-01, 7.28492392955404282e-01, 1.36151570872174971e-02],
    [7.28492392955404282e-01, 8.39477740995760531e-03, 1.36151570872174971e-02],
    [7.28492392955404282e-01, 2.63112829634638113e-01, 1.36151570872174971e-02],
];

// TET_D1: 1 points, exact to total degree 1
const TET_D1: [[f64; 4]; 1] = [
    [2.50000000000000000e-01, 2.50000000000000000e-01, 2.50000000000000000e-01, 1.66666666666666657e-01],
];

// TET_D2: 4 points, exact to total degree 2
const TET_D2: [[f64; 4]; 4] = [
    [1.38196601125010504e-01, 1.38196601125010504e-01, 5.85410196624968437e-01, 4.16666666666666644e-02],
    [1.38196601125010504e-01, 5.85410196624968437e-01, 1.38196601125010504e-01, 4.16666666666666644e-02],
    [5.85410196624968437e-01, 1.38196601125010504e-01, 1.38196601125010504e-01, 4.16666666666666644e-02],
    [1.38196601125010504e-01, 1.38196601125010504e-01, 1.38196601125010504e-01, 4.16666666666666644e-02],
];

// TET_D5: 14 points, exact to total degree 5
const TET_D5: [[f64; 4]; 14] = [
    [3.10885919263300610e-01, 3.10885919263300610e-01, 6.73422422100981706e-02, 1.87813209530026417e-02],
    [3.10885919263300610e-01, 6.73422422100981706e-02, 3.10885919263300610e-01, 1.87813209530026417e-02],
    [6.73422422100981706e-02, 3.10885919263300610e-01, 3.10885919263300610e-01, 1.87813209530026417e-02],
    [3.10885919263300610e-01, 3.10885919263300610e-01, 3.10885919263300610e-01, 1.87813209530026417e-02],
    [9.27352503108912305e-02, 9.27352503108912305e-02, 7.21794249067326308e-01, 1.22488405193936582e-02],
    [9.27352503108912305e-02, 7.21794249067326308e-01, 9.27352503108912305e-02, 1.22488405193936582e-02],
    [7.21794249067326308e-01, 9.27352503108912305e-02, 9.27352503108912305e-02, 1.22488405193936582e-02],
    [9.27352503108912305e-02, 9.27352503108912305e-02, 9.27352503108912305e-02, 1.22488405193936582e-02],
    [4.55037041256496495e-02, 4.55037041256496495e-02, 4.54496295874350351e-01, 7.09100346284691107e-03],
    [4.55037041256496495e-02, 4.54496295874350351e-01, 4.55037041256496495e-02, 7.09100346284691107e-03],
    [4.55037041256496495e-02, 4.54496295874350351e-01, 4.54496295874350351e-01, 7.09100346284691107e-03],
    [4.54496295874350351e-01, 4.55037041256496495e-02, 4.55037041256496495e-02, 7.09100346284691107e-03],
    [4.54496295874350351e-01, 4.55037041256496495e-02, 4.54496295874350351e-01, 7.09100346284691107e-03],
    [4.54496295874350351e-01, 4.54496295874350351e-01, 4.55037041256496495e-02, 7.09100346284691107e-03],
];

// TET_D6: 24 points, exact to total degree 6
const TET_D6: [[f64; 4]; 24] = [
    [2.14602871259119088e-01, 2.14602871259119088e-01, 3.56191386222642681e-01, 6.65379170969892294e-03],
    [2.14602871259119088e-01, 3.56191386222642681e-01, 2.14602871259119088e-01, 6.65379170969892294e-03],
    [3.56191386222642681e-01, 2.14602871259119088e-01, 2.14602871259119088e-01, 6.65379170969892294e-03],
    [2.14602871259119088e-01, 2.14602871259119088e-01, 2.14602871259119088e-01, 6.65379170969892294e-03],
    [4.06739585346164653e-02, 4.06739585346164653e-02, 8.77978124396150639e-01, 1.67953517588706491e-03],
    [4.06739585346164653e-02, 8.77978124396150639e-01, 4.06739585346164653e-02, 1.67953517588706491e-03],
    [8.77978124396150639e-01, 4.06739585346164653e-02, 4.06739585346164653e-02, 1.67953517588706491e-03],
    [4.06739585346164653e-02, 4.06739585346164653e-02, 4.06739585346164653e-02, 1.67953517588706491e-03],
    [3.22337890142282757e-01, 3.22337890142282757e-01, 3.22337890142282757e-01, 9.22619692393971368e-03],
    [3.29863295731517292e-02, 3.22337890142282757e-01, 3.22337890142282757e-01, 9.22619692393971368e-03],
    [3.22337890142282757e-01, 3.29863295731517292e-02, 3.22337890142282757e-01, 9.22619692393971368e-03],
    [3.22337890142282757e-01, 3.22337890142282757e-01, 3.29863295731517292e-02, 9.22619692393971368e-03],
    [6.36610018750150553e-02, 2.69672331458319647e-01, 6.03005664791650187e-01, 8.03571428571365522e-03],
    [6.36610018750150553e-02, 6.03005664791650187e-01, 2.69672331458319647e-01, 8.03571428571365522e-03],
    [2.69672331458319647e-01, 6.36610018750150553e-02, 6.03005664791650187e-01, 8.03571428571365522e-03],
    [2.69672331458319647e-01, 6.03005664791650187e-01, 6.36610018750150553e-02, 8.03571428571365522e-03],
    [6.03005664791650187e-01, 6.36610018750150553e-02, 2.69672331458319647e-01, 8.03571428571365522e-03],
    [6.03005664791650187e-01, 2.69672331458319647e-01, 6.36610018750150553e-02, 8.03571428571365522e-03],
    [6.36610018750150553e-02, 6.36610018750150553e-02, 6.03005664791650187e-01, 8.03571428571365522e-03],
    [6.36610018750150553e-02, 6.03005664791650187e-01, 6.36610018750150553e-02, 8.03571428571365522e-03],
    [6.03005664791650187e-01, 6.36610018750150553e-02, 6.36610018750150553e-02, 8.03571428571365522e-03],
    [6.36610018750150553e-02, 6.36610018750150553e-02, 2.69672331458319647e-01, 8.03571428571365522e-03],
    [6.36610018750150553e-02, 2.69672331458319647e-01, 6.36610018750150553e-02, 8.03571428571365522e-03],
    [2.69672331458319647e-01, 6.36610018750150553e-02, 6.36610018750150553e-02, 8.03571428571365522e-03],
];

// TET_D9: 125 points, exact to total degree 9 (conical product)
const TET_D9: [[f64; 4]; 125] = include!("tet_d9_table.inc");
