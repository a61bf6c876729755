//! Linear operators between the orthonormal bases: curl, divergence,
//! gradient, tangential and normal face traces, surface curl and degree
//! transfers, plus the edge-compatibility test for multi-face trace data.
//!
//! Each operator is assembled as the L² projection of the exact image of
//! every source basis member. The images lie in the target spaces, so the
//! projection loses nothing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::element::{ElementSpaces, FaceSet, OperatorKey};
use crate::error::{Error, Result};
use crate::polyspace::{rule_degree, weighted_inner, FieldCoefficients, FieldValues, PointSet, Quantity, SpaceTag};
use crate::quadrature::edge_rule;

/// A linear map between two bases, `target_dim x source_dim`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub source: SpaceTag,
    pub target: SpaceTag,
    pub matrix: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn apply(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        &self.matrix * coeffs
    }
}

fn check_face(face: usize) -> Result<()> {
    if face > 3 {
        return Err(Error::InvalidParameter(format!("face index {face} out of range")));
    }
    Ok(())
}

fn assemble(
    spaces: &ElementSpaces,
    source: SpaceTag,
    target: SpaceTag,
    points: &PointSet,
    quantity: Quantity,
    transform: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Result<OperatorMatrix> {
    let src = spaces.basis(source)?;
    let tgt = spaces.basis(target)?;
    let image = transform(&src.samples(points, quantity));
    let tgt_samples = tgt.samples(points, Quantity::Value);
    let ncomp = tgt.ncomp(Quantity::Value);
    Ok(OperatorMatrix {
        source,
        target,
        matrix: weighted_inner(&tgt_samples, &image, &points.weights, ncomp),
    })
}

/// curl : N_p -> RT_p.
pub fn curl_matrix(spaces: &ElementSpaces, p: usize) -> Result<OperatorMatrix> {
    let pts = PointSet::volume_rule(spaces.tetrahedron(), rule_degree(p))?;
    assemble(spaces, SpaceTag::Nedelec(p), SpaceTag::RaviartThomas(p), &pts, Quantity::Curl, |m| m.clone())
}

/// div : RT_p -> P_p.
pub fn div_matrix(spaces: &ElementSpaces, p: usize) -> Result<OperatorMatrix> {
    let pts = PointSet::volume_rule(spaces.tetrahedron(), rule_degree(p))?;
    assemble(
        spaces,
        SpaceTag::RaviartThomas(p),
        SpaceTag::ScalarP(p),
        &pts,
        Quantity::Divergence,
        |m| m.clone(),
    )
}

/// grad : P_{p+1} -> N_p.
pub fn gradient_matrix(spaces: &ElementSpaces, p: usize) -> Result<OperatorMatrix> {
    let pts = PointSet::volume_rule(spaces.tetrahedron(), rule_degree(p))?;
    assemble(
        spaces,
        SpaceTag::ScalarP(p + 1),
        SpaceTag::Nedelec(p),
        &pts,
        Quantity::Gradient,
        |m| m.clone(),
    )
}

/// Tangential component on face `face` : N_p -> N_p^tau(F).
pub fn tangential_trace_matrix(spaces: &ElementSpaces, p: usize, face: usize) -> Result<OperatorMatrix> {
    check_face(face)?;
    let pts = PointSet::face_rule(spaces.tetrahedron(), face, rule_degree(p))?;
    let normal = spaces.tetrahedron().face(face).normal;
    assemble(
        spaces,
        SpaceTag::Nedelec(p),
        SpaceTag::FaceTrace { degree: p, face },
        &pts,
        Quantity::Value,
        |m| {
            let mut out = m.clone();
            for q in 0..m.nrows() / 3 {
                for j in 0..m.ncols() {
                    let dot = (0..3).map(|c| m[(3 * q + c, j)] * normal[c]).sum::<f64>();
                    for c in 0..3 {
                        out[(3 * q + c, j)] -= dot * normal[c];
                    }
                }
            }
            out
        },
    )
}

/// Normal component `v . n_F` on face `face` : RT_p -> P_p(F).
pub fn normal_trace_matrix(spaces: &ElementSpaces, p: usize, face: usize) -> Result<OperatorMatrix> {
    check_face(face)?;
    let pts = PointSet::face_rule(spaces.tetrahedron(), face, rule_degree(p))?;
    let normal = spaces.tetrahedron().face(face).normal;
    assemble(
        spaces,
        SpaceTag::RaviartThomas(p),
        SpaceTag::FaceScalarP { degree: p, face },
        &pts,
        Quantity::Value,
        |m| {
            DMatrix::from_fn(m.nrows() / 3, m.ncols(), |q, j| {
                (0..3).map(|c| m[(3 * q + c, j)] * normal[c]).sum()
            })
        },
    )
}

/// Surface curl `d_t1 (w . t2) - d_t2 (w . t1)` : N_p^tau(F) -> P_p(F).
pub fn surface_curl_matrix(spaces: &ElementSpaces, p: usize, face: usize) -> Result<OperatorMatrix> {
    check_face(face)?;
    let pts = PointSet::face_rule(spaces.tetrahedron(), face, rule_degree(p))?;
    assemble(
        spaces,
        SpaceTag::FaceTrace { degree: p, face },
        SpaceTag::FaceScalarP { degree: p, face },
        &pts,
        Quantity::SurfaceCurl,
        |m| m.clone(),
    )
}

/// Coefficients of the `from` basis expressed in the `to` basis (same
/// family and domain, `to` of degree at least `from`'s).
pub fn transfer_matrix(spaces: &ElementSpaces, from: SpaceTag, to: SpaceTag) -> Result<OperatorMatrix> {
    if from.with_degree(to.degree()) != to || to.degree() < from.degree() {
        return Err(Error::InvalidParameter(format!("cannot transfer {from} into {to}")));
    }
    let tgt = spaces.basis(to)?;
    let pts = tgt.rule(rule_degree(to.degree()))?;
    assemble(spaces, from, to, &pts, Quantity::Value, |m| m.clone())
}

/// Per-face tangential trace data of a common degree.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub degree: usize,
    /// `(face, coefficients in FaceTrace(degree, face))`, at most one entry
    /// per face, in increasing face order.
    pub faces: Vec<(usize, DVector<f64>)>,
}

impl TraceData {
    pub fn empty(degree: usize) -> Self {
        Self {
            degree,
            faces: Vec::new(),
        }
    }

    pub fn face_set(&self) -> FaceSet {
        FaceSet::from_faces(&self.faces.iter().map(|(f, _)| *f).collect::<Vec<_>>())
    }

    pub fn get(&self, face: usize) -> Option<&DVector<f64>> {
        self.faces.iter().find(|(f, _)| *f == face).map(|(_, c)| c)
    }

    /// Euclidean norm of all coefficients (= L²(Gamma_F) norm).
    pub fn norm(&self) -> f64 {
        self.faces.iter().map(|(_, c)| c.norm_squared()).sum::<f64>().sqrt()
    }

    /// Tangential traces of a Nédélec field on the faces of `faces`.
    pub fn from_field(spaces: &ElementSpaces, p: usize, faces: FaceSet, field: &DVector<f64>) -> Result<Self> {
        let mut out = Self::empty(p);
        for face in faces.iter() {
            let op = spaces.operator(OperatorKey::TangentialTrace { degree: p, face })?;
            out.faces.push((face, op.apply(field)));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatReport {
    /// Largest L²(e) norm of the jump of `w . tau_e` over shared edges.
    pub max_edge_residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Relative tolerance of the edge-compatibility test.
pub const EDGE_COMPAT_TOLERANCE: f64 = 1e-9;

/// Checks that the tangential components along every edge shared by two
/// faces of the data agree in L²(e).
pub fn edge_compat_check(spaces: &ElementSpaces, data: &TraceData) -> Result<CompatReport> {
    let tet = spaces.tetrahedron();
    let p = data.degree;
    let data_scale = data.faces.iter().map(|(_, c)| c.norm()).fold(1.0, f64::max);
    let threshold = EDGE_COMPAT_TOLERANCE * data_scale;
    let mut max_edge_residual = 0.0f64;
    for (i, (fa, ca)) in data.faces.iter().enumerate() {
        for (fb, cb) in data.faces.iter().skip(i + 1) {
            let Some(edge) = tet.shared_edge(*fa, *fb) else {
                continue;
            };
            let rule = edge_rule(2 * p + 1, tet, edge)?;
            let points = rule.physical_points(tet, edge);
            let tangent = tet.edges()[edge].tangent;
            let along = |face: usize, coeffs: &DVector<f64>| -> Result<Vec<f64>> {
                let basis = spaces.basis(SpaceTag::FaceTrace { degree: p, face })?;
                let field = FieldCoefficients::new(basis, coeffs.clone())?;
                match field.evaluate(&points) {
                    FieldValues::Vector(v) => Ok(v.iter().map(|w| w.dot(&tangent)).collect()),
                    FieldValues::Scalar(_) => unreachable!("trace fields are vector valued"),
                }
            };
            let a = along(*fa, ca)?;
            let b = along(*fb, cb)?;
            let residual = a
                .iter()
                .zip(&b)
                .zip(&rule.weights)
                .map(|((x, y), w)| w * (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            max_edge_residual = max_edge_residual.max(residual);
        }
    }
    Ok(CompatReport {
        max_edge_residual,
        threshold,
        pass: max_edge_residual <= threshold,
    })
}

/// Convenience: field coefficients of a basis held by `spaces`.
pub fn field(spaces: &ElementSpaces, tag: SpaceTag, coeffs: DVector<f64>) -> Result<FieldCoefficients> {
    FieldCoefficients::new(spaces.basis(tag)?, coeffs)
}

/// Shared handle alias for operators returned by the cache.
pub type SharedOperator = Arc<OperatorMatrix>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Tetrahedron};
    use crate::minsolve::svd_rank;
    use crate::polyspace::rule_points;

    fn skewed() -> Arc<ElementSpaces> {
        ElementSpaces::new(
            Tetrahedron::from_arrays([
                [0.1, -0.2, 0.0],
                [1.3, 0.1, 0.2],
                [0.2, 0.9, -0.1],
                [0.4, 0.3, 0.6],
            ])
            .unwrap(),
        )
    }

    /// L² projection of a closure onto a basis, by quadrature.
    fn project_fn(spaces: &ElementSpaces, tag: SpaceTag, f: impl Fn(&Point) -> Point) -> DVector<f64> {
        let b = spaces.basis(tag).unwrap();
        let pts = rule_points(spaces.tetrahedron(), tag, rule_degree(tag.degree()) + 2).unwrap();
        let mut vals = DMatrix::zeros(3 * pts.len(), 1);
        for (q, x) in pts.x.iter().enumerate() {
            let v = f(x);
            for c in 0..3 {
                vals[(3 * q + c, 0)] = v[c];
            }
        }
        b.project(&pts, &vals).column(0).into_owned()
    }

    fn project_scalar(spaces: &ElementSpaces, tag: SpaceTag, f: impl Fn(&Point) -> f64) -> DVector<f64> {
        let b = spaces.basis(tag).unwrap();
        let pts = rule_points(spaces.tetrahedron(), tag, rule_degree(tag.degree()) + 2).unwrap();
        let vals = DMatrix::from_iterator(pts.len(), 1, pts.x.iter().map(&f));
        b.project(&pts, &vals).column(0).into_owned()
    }

    #[test]
    fn curl_of_rotation_is_constant() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        let v = project_fn(&spaces, SpaceTag::Nedelec(0), |x| Point::new(-x.y, x.x, 0.0));
        let c = spaces.operator(OperatorKey::Curl(0)).unwrap().apply(&v);
        let expected = project_fn(&spaces, SpaceTag::RaviartThomas(0), |_| Point::new(0.0, 0.0, 2.0));
        assert!((c - expected).norm() < 1e-12);
    }

    #[test]
    fn curl_kills_gradients_and_has_expected_rank() {
        let spaces = skewed();
        for p in 0..=3 {
            let grad = spaces.operator(OperatorKey::Gradient(p)).unwrap();
            let curl = spaces.operator(OperatorKey::Curl(p)).unwrap();
            let prod = &curl.matrix * &grad.matrix;
            assert!(prod.abs().max() < 1e-10, "p={p}");
        }
        let curl0 = spaces.operator(OperatorKey::Curl(0)).unwrap();
        assert_eq!(svd_rank(&curl0.matrix, 1e-10), 3);
    }

    #[test]
    fn gradients_lie_in_nedelec() {
        let spaces = skewed();
        for p in 0..=3 {
            let grad = spaces.operator(OperatorKey::Gradient(p)).unwrap();
            // column norms equal the gradient norms iff nothing was lost
            let sb = spaces.basis(SpaceTag::ScalarP(p + 1)).unwrap();
            let pts = PointSet::volume_rule(spaces.tetrahedron(), rule_degree(p + 1)).unwrap();
            let g = sb.samples(&pts, Quantity::Gradient);
            let exact = weighted_inner(&g, &g, &pts.weights, 3);
            for j in 0..grad.matrix.ncols() {
                let lost = exact[(j, j)] - grad.matrix.column(j).norm_squared();
                assert!(lost.abs() < 1e-9 * (1.0 + exact[(j, j)]), "p={p} j={j}: {lost}");
            }
        }
    }

    #[test]
    fn divergence() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        let x = project_fn(&spaces, SpaceTag::RaviartThomas(0), |x| *x);
        let d = spaces.operator(OperatorKey::Divergence(0)).unwrap().apply(&x);
        let three = project_scalar(&spaces, SpaceTag::ScalarP(0), |_| 3.0);
        assert!((d - three).norm() < 1e-12);
        let e1 = project_fn(&spaces, SpaceTag::RaviartThomas(0), |_| Point::new(1.0, 0.0, 0.0));
        assert!(spaces.operator(OperatorKey::Divergence(0)).unwrap().apply(&e1).norm() < 1e-13);
        let div0 = spaces.operator(OperatorKey::Divergence(0)).unwrap();
        assert_eq!(svd_rank(&div0.matrix, 1e-10), 1);
    }

    #[test]
    fn div_curl_vanishes() {
        let spaces = skewed();
        for p in 0..=4 {
            let curl = spaces.operator(OperatorKey::Curl(p)).unwrap();
            let div = spaces.operator(OperatorKey::Divergence(p)).unwrap();
            let norm = (&div.matrix * &curl.matrix).norm();
            assert!(norm < 1e-11, "p={p}: {norm}");
        }
    }

    #[test]
    fn tangential_trace_examples() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        // face 2 is z = 0 with normal (0,0,-1)
        let n = project_fn(&spaces, SpaceTag::Nedelec(0), |_| Point::new(0.0, 0.0, -1.0));
        let tr = spaces.operator(OperatorKey::TangentialTrace { degree: 0, face: 2 }).unwrap();
        assert!(tr.apply(&n).norm() < 1e-13);
        let e1 = project_fn(&spaces, SpaceTag::Nedelec(0), |_| Point::new(1.0, 0.0, 0.0));
        // ||e1||_{L2(F)} = sqrt(1/2)
        assert!((tr.apply(&e1).norm() - 0.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn tangential_trace_is_exact_and_surjective() {
        let spaces = skewed();
        for p in 0..=3 {
            for face in 0..4 {
                let tr = spaces.operator(OperatorKey::TangentialTrace { degree: p, face }).unwrap();
                let dim = tr.matrix.nrows();
                assert_eq!(svd_rank(&tr.matrix, 1e-10), dim, "p={p} face={face}");
                // projection loses nothing: trace norms by quadrature equal
                // the coefficient norms
                let nb = spaces.basis(SpaceTag::Nedelec(p)).unwrap();
                let pts = PointSet::face_rule(spaces.tetrahedron(), face, rule_degree(p)).unwrap();
                let vals = nb.samples(&pts, Quantity::Value);
                let nrm = spaces.tetrahedron().face(face).normal;
                for j in [0, nb.dim() / 2, nb.dim() - 1] {
                    let mut direct = 0.0;
                    for q in 0..pts.len() {
                        let v = Point::new(vals[(3 * q, j)], vals[(3 * q + 1, j)], vals[(3 * q + 2, j)]);
                        let t = v - nrm * v.dot(&nrm);
                        direct += pts.weights[q] * t.norm_squared();
                    }
                    let proj = tr.matrix.column(j).norm_squared();
                    assert!((direct - proj).abs() < 1e-10 * (1.0 + direct));
                }
            }
        }
    }

    #[test]
    fn normal_trace_examples() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        let op = spaces.operator(OperatorKey::NormalTrace { degree: 0, face: 2 }).unwrap();
        let x = project_fn(&spaces, SpaceTag::RaviartThomas(0), |x| *x);
        assert!(op.apply(&x).norm() < 1e-13);
        let e3 = project_fn(&spaces, SpaceTag::RaviartThomas(0), |_| Point::new(0.0, 0.0, 1.0));
        let minus_one = project_scalar(&spaces, SpaceTag::FaceScalarP { degree: 0, face: 2 }, |_| -1.0);
        assert!((op.apply(&e3) - minus_one).norm() < 1e-13);
        for face in 0..4 {
            let op = spaces.operator(OperatorKey::NormalTrace { degree: 0, face }).unwrap();
            assert_eq!(svd_rank(&op.matrix, 1e-10), 1);
        }
    }

    #[test]
    fn surface_curl_examples() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        let v = project_fn(&spaces, SpaceTag::Nedelec(0), |x| Point::new(-x.y, x.x, 0.0));
        let w = spaces.operator(OperatorKey::TangentialTrace { degree: 0, face: 2 }).unwrap().apply(&v);
        let s = spaces.operator(OperatorKey::SurfaceCurl { degree: 0, face: 2 }).unwrap().apply(&w);
        let minus_two = project_scalar(&spaces, SpaceTag::FaceScalarP { degree: 0, face: 2 }, |_| -2.0);
        assert!((s - minus_two).norm() < 1e-12);
        let c = project_fn(&spaces, SpaceTag::Nedelec(0), |_| Point::new(1.0, 2.0, 0.0));
        let w = spaces.operator(OperatorKey::TangentialTrace { degree: 0, face: 2 }).unwrap().apply(&c);
        let s = spaces.operator(OperatorKey::SurfaceCurl { degree: 0, face: 2 }).unwrap().apply(&w);
        assert!(s.norm() < 1e-13);
    }

    #[test]
    fn surface_curl_identity_on_generic_fields() {
        let spaces = skewed();
        let p = 3;
        let dim = spaces.basis(SpaceTag::Nedelec(p)).unwrap().dim();
        let v = DVector::from_fn(dim, |i, _| ((i * 37 + 11) % 17) as f64 / 8.0 - 1.0);
        let curl_v = spaces.operator(OperatorKey::Curl(p)).unwrap().apply(&v);
        for face in 0..4 {
            let w = spaces.operator(OperatorKey::TangentialTrace { degree: p, face }).unwrap().apply(&v);
            let lhs = spaces.operator(OperatorKey::SurfaceCurl { degree: p, face }).unwrap().apply(&w);
            let rhs = spaces.operator(OperatorKey::NormalTrace { degree: p, face }).unwrap().apply(&curl_v);
            assert!((lhs - rhs).norm() <= 1e-9 * v.norm(), "face {face}");
        }
    }

    #[test]
    fn edge_compatibility() {
        let spaces = skewed();
        let p = 2;
        let dim = spaces.basis(SpaceTag::Nedelec(p)).unwrap().dim();
        let v = DVector::from_fn(dim, |i, _| ((i * 13 + 5) % 7) as f64 - 3.0);
        let data = TraceData::from_field(&spaces, p, FaceSet::from_faces(&[0, 1, 3]), &v).unwrap();
        let report = edge_compat_check(&spaces, &data).unwrap();
        assert!(report.pass);
        assert!(report.max_edge_residual < 1e-12 * v.norm());

        let mut broken = data.clone();
        let len = broken.faces[1].1.len();
        broken.faces[1].1 += DVector::from_fn(len, |i, _| 1e-3 * (((i * 7) % 5) as f64 - 2.0));
        assert!(!edge_compat_check(&spaces, &broken).unwrap().pass);

        let single = TraceData::from_field(&spaces, p, FaceSet::from_faces(&[2]), &v).unwrap();
        assert!(edge_compat_check(&spaces, &single).unwrap().pass);
    }

    #[test]
    fn transfers_embed_lower_degrees() {
        let spaces = skewed();
        for tag in [SpaceTag::Nedelec(1), SpaceTag::RaviartThomas(2), SpaceTag::FaceTrace { degree: 1, face: 3 }] {
            let to = tag.with_degree(tag.degree() + 2);
            let t = spaces.operator(OperatorKey::Transfer { from: tag, to }).unwrap();
            // isometric embedding: T^T T = I
            let g = t.matrix.tr_mul(&t.matrix);
            let dev = (g - DMatrix::identity(t.matrix.ncols(), t.matrix.ncols())).abs().max();
            assert!(dev < 1e-9, "{tag}: {dev}");
        }
    }
}
