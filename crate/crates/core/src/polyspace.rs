//! L²-orthonormal bases of the polynomial spaces on a tetrahedron and on its
//! faces.
//!
//! Every basis is stored as a coefficient matrix over a spanning generator
//! set. Generators are products of the orthonormal scalar polynomials from
//! [`crate::ortho`] with constant vectors, with the local position
//! `(x - c_K) / h_K` (cross or radial products), or, on a face, with the
//! rotated local position `n_F x (x - c_F) / h_K`. Redundant generator sets are
//! reduced by an eigen-decomposition of their Gram matrix.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tetrahedron};
use crate::ortho::{scalar_dim, tet_recurrence, tri_recurrence, MAX_SCALAR_DEGREE};
use crate::quadrature::{tet_rule, tri_rule};

/// Highest degree supported for the Nédélec, Raviart–Thomas and trace spaces.
pub const MAX_DEGREE: usize = 10;

/// Default relative eigenvalue cutoff used to discard redundant generator
/// directions.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Largest admissible entrywise deviation of a basis Gram matrix from the
/// identity.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceTag {
    /// Scalar polynomials of total degree <= p on K.
    ScalarP(usize),
    /// Vector fields with components in `ScalarP(p)`.
    VectorP(usize),
    /// First-kind Nédélec space `P_p^3 + x x P_p^3`.
    Nedelec(usize),
    /// Raviart–Thomas space `P_p^3 + x P_p`.
    RaviartThomas(usize),
    /// Scalar polynomials of degree <= p on one face.
    FaceScalarP { degree: usize, face: usize },
    /// Tangential traces of `Nedelec(p)` on one face.
    FaceTrace { degree: usize, face: usize },
}

impl SpaceTag {
    pub fn degree(&self) -> usize {
        match *self {
            SpaceTag::ScalarP(p)
            | SpaceTag::VectorP(p)
            | SpaceTag::Nedelec(p)
            | SpaceTag::RaviartThomas(p) => p,
            SpaceTag::FaceScalarP { degree, .. } | SpaceTag::FaceTrace { degree, .. } => degree,
        }
    }

    pub fn face(&self) -> Option<usize> {
        match *self {
            SpaceTag::FaceScalarP { face, .. } | SpaceTag::FaceTrace { face, .. } => Some(face),
            _ => None,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, SpaceTag::ScalarP(_) | SpaceTag::FaceScalarP { .. })
    }

    /// Same family at another degree.
    pub fn with_degree(&self, p: usize) -> SpaceTag {
        match *self {
            SpaceTag::ScalarP(_) => SpaceTag::ScalarP(p),
            SpaceTag::VectorP(_) => SpaceTag::VectorP(p),
            SpaceTag::Nedelec(_) => SpaceTag::Nedelec(p),
            SpaceTag::RaviartThomas(_) => SpaceTag::RaviartThomas(p),
            SpaceTag::FaceScalarP { face, .. } => SpaceTag::FaceScalarP { degree: p, face },
            SpaceTag::FaceTrace { face, .. } => SpaceTag::FaceTrace { degree: p, face },
        }
    }

    fn max_degree(&self) -> usize {
        match self {
            SpaceTag::ScalarP(_) | SpaceTag::VectorP(_) | SpaceTag::FaceScalarP { .. } => {
                MAX_SCALAR_DEGREE
            }
            _ => MAX_DEGREE,
        }
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTag::ScalarP(p) => write!(f, "P{p}"),
            SpaceTag::VectorP(p) => write!(f, "P{p}^3"),
            SpaceTag::Nedelec(p) => write!(f, "N{p}"),
            SpaceTag::RaviartThomas(p) => write!(f, "RT{p}"),
            SpaceTag::FaceScalarP { degree, face } => write!(f, "P{degree}(F{face})"),
            SpaceTag::FaceTrace { degree, face } => write!(f, "N{degree}^tau(F{face})"),
        }
    }
}

/// Closed-form dimension of a space.
pub fn dimension(tag: SpaceTag) -> usize {
    match tag {
        SpaceTag::ScalarP(p) => (p + 1) * (p + 2) * (p + 3) / 6,
        SpaceTag::VectorP(p) => (p + 1) * (p + 2) * (p + 3) / 2,
        SpaceTag::Nedelec(p) => (p + 1) * (p + 3) * (p + 4) / 2,
        SpaceTag::RaviartThomas(p) => (p + 1) * (p + 2) * (p + 4) / 2,
        SpaceTag::FaceScalarP { degree: p, .. } => (p + 1) * (p + 2) / 2,
        SpaceTag::FaceTrace { degree: p, .. } => (p + 1) * (p + 3),
    }
}

/// Spanning field of a space. `index` refers to the orthonormal scalar
/// polynomials on the element (volume variants) or on the face (face
/// variants).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Scalar { index: usize },
    /// `e_component * phi`.
    Coordinate { component: usize, index: usize },
    /// `x_loc x e_component * phi`.
    Cross { component: usize, index: usize },
    /// `x_loc * phi`.
    Radial { index: usize },
    FaceScalar { index: usize },
    /// `t_direction * psi` with the face frame vector `t_direction`.
    FaceTangent { direction: usize, index: usize },
    /// `(n_F x y_loc) * psi`.
    FaceRotated { index: usize },
}

/// Spanning set of `tag`. The Nédélec set is redundant; all others are
/// linearly independent.
pub fn generators(tag: SpaceTag) -> Vec<Generator> {
    let volume_top = |p: usize| {
        let lo = if p == 0 { 0 } else { scalar_dim(3, p - 1) };
        lo..scalar_dim(3, p)
    };
    let face_top = |p: usize| {
        let lo = if p == 0 { 0 } else { scalar_dim(2, p - 1) };
        lo..scalar_dim(2, p)
    };
    let coordinates = |p: usize| {
        (0..3).flat_map(move |component| {
            (0..scalar_dim(3, p)).map(move |index| Generator::Coordinate { component, index })
        })
    };
    match tag {
        SpaceTag::ScalarP(p) => (0..scalar_dim(3, p)).map(|index| Generator::Scalar { index }).collect(),
        SpaceTag::VectorP(p) => coordinates(p).collect(),
        SpaceTag::Nedelec(p) => coordinates(p)
            .chain((0..3).flat_map(|component| {
                volume_top(p).map(move |index| Generator::Cross { component, index })
            }))
            .collect(),
        SpaceTag::RaviartThomas(p) => coordinates(p)
            .chain(volume_top(p).map(|index| Generator::Radial { index }))
            .collect(),
        SpaceTag::FaceScalarP { degree, .. } => (0..scalar_dim(2, degree))
            .map(|index| Generator::FaceScalar { index })
            .collect(),
        SpaceTag::FaceTrace { degree, .. } => (0..2)
            .flat_map(|direction| {
                (0..scalar_dim(2, degree)).map(move |index| Generator::FaceTangent { direction, index })
            })
            .chain(face_top(degree).map(|index| Generator::FaceRotated { index }))
            .collect(),
    }
}

/// Which derived quantity of a field is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Quantity {
    Value,
    Gradient,
    Curl,
    Divergence,
    SurfaceCurl,
}

/// Points on the element, with everything generator evaluation needs.
#[derive(Debug, Clone)]
pub(crate) struct PointSet {
    pub face: Option<usize>,
    pub xi: Vec<[f64; 3]>,
    pub eta: Vec<[f64; 2]>,
    pub x: Vec<Point>,
    /// Physical quadrature weights; empty for plain evaluation points.
    pub weights: Vec<f64>,
}

impl PointSet {
    pub fn volume_rule(tet: &Tetrahedron, degree: usize) -> Result<Self> {
        let rule = tet_rule(degree, tet)?;
        let xi = rule.points.iter().map(|l| [l[1], l[2], l[3]]).collect();
        Ok(Self {
            face: None,
            xi,
            eta: Vec::new(),
            x: rule.physical_points(tet),
            weights: rule.weights,
        })
    }

    pub fn face_rule(tet: &Tetrahedron, face: usize, degree: usize) -> Result<Self> {
        let rule = tri_rule(degree, tet, face)?;
        let eta = rule.points.iter().map(|l| [l[1], l[2]]).collect::<Vec<_>>();
        let x = rule.physical_points(tet, face);
        let xi = x.iter().map(|p| tet.to_simplex(p)).collect();
        Ok(Self {
            face: Some(face),
            xi,
            eta,
            x,
            weights: rule.weights,
        })
    }

    pub fn volume_points(tet: &Tetrahedron, points: &[Point]) -> Self {
        Self {
            face: None,
            xi: points.iter().map(|p| tet.to_simplex(p)).collect(),
            eta: Vec::new(),
            x: points.to_vec(),
            weights: Vec::new(),
        }
    }

    pub fn face_points(tet: &Tetrahedron, face: usize, points: &[Point]) -> Self {
        Self {
            face: Some(face),
            xi: points.iter().map(|p| tet.to_simplex(p)).collect(),
            eta: points.iter().map(|p| tet.face_coordinates(face, p)).collect(),
            x: points.to_vec(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }
}

/// Number of rows per point for a quantity sampled on a space.
pub(crate) fn components(tag: SpaceTag, quantity: Quantity) -> usize {
    match quantity {
        Quantity::Value => {
            if tag.is_scalar() {
                1
            } else {
                3
            }
        }
        Quantity::Gradient | Quantity::Curl => 3,
        Quantity::Divergence | Quantity::SurfaceCurl => 1,
    }
}

/// Samples `quantity` of every generator at `points`; rows are
/// `point * ncomp + component`.
pub(crate) fn eval_generators(
    tet: &Tetrahedron,
    tag: SpaceTag,
    gens: &[Generator],
    points: &PointSet,
    quantity: Quantity,
) -> DMatrix<f64> {
    let ncomp = components(tag, quantity);
    let npts = points.len();
    let mut out = DMatrix::<f64>::zeros(npts * ncomp, gens.len());

    let mut volume_count = 0;
    let mut face_count = 0;
    for g in gens {
        match *g {
            Generator::Scalar { index }
            | Generator::Coordinate { index, .. }
            | Generator::Cross { index, .. }
            | Generator::Radial { index } => volume_count = volume_count.max(index + 1),
            Generator::FaceScalar { index }
            | Generator::FaceTangent { index, .. }
            | Generator::FaceRotated { index } => face_count = face_count.max(index + 1),
        }
    }

    let volume = (volume_count > 0).then(|| tet_recurrence().evaluate(&points.xi, volume_count));
    let volume_scale = 1.0 / (6.0 * tet.volume()).sqrt();
    let jac_inv_t = tet.simplex_jacobian_inv().transpose();
    let h = tet.length_scale();
    let centroid = tet.centroid();

    let face_data = if face_count > 0 {
        let face = points.face.expect("face generators need face points");
        let samples = tri_recurrence().evaluate(&points.eta, face_count);
        let [d1, d2] = tet.face_tangents(face);
        let metric = Matrix2::new(d1.dot(&d1), d1.dot(&d2), d2.dot(&d1), d2.dot(&d2));
        let metric_inv = metric.try_inverse().expect("non-degenerate face");
        Some((face, samples, [d1, d2], metric_inv))
    } else {
        None
    };

    for q in 0..npts {
        let x_loc = (points.x[q] - centroid) / h;
        for (j, g) in gens.iter().enumerate() {
            let mut vals = [0.0f64; 3];
            match *g {
                Generator::Scalar { .. }
                | Generator::Coordinate { .. }
                | Generator::Cross { .. }
                | Generator::Radial { .. } => {
                    let s = volume.as_ref().expect("volume samples");
                    let (value, grad) = match *g {
                        Generator::Scalar { index }
                        | Generator::Coordinate { index, .. }
                        | Generator::Cross { index, .. }
                        | Generator::Radial { index } => {
                            let gref = Point::new(
                                s.gradients[0][(q, index)],
                                s.gradients[1][(q, index)],
                                s.gradients[2][(q, index)],
                            );
                            (s.values[(q, index)] * volume_scale, jac_inv_t * gref * volume_scale)
                        }
                        _ => unreachable!(),
                    };
                    let field = |v: Point| [v.x, v.y, v.z];
                    match (*g, quantity) {
                        (Generator::Scalar { .. }, Quantity::Value) => vals[0] = value,
                        (Generator::Scalar { .. }, Quantity::Gradient) => vals = field(grad),
                        (Generator::Coordinate { component, .. }, Quantity::Value) => {
                            vals[component] = value
                        }
                        (Generator::Coordinate { component, .. }, Quantity::Curl) => {
                            vals = field(grad.cross(&unit(component)))
                        }
                        (Generator::Coordinate { component, .. }, Quantity::Divergence) => {
                            vals[0] = grad[component]
                        }
                        (Generator::Cross { component, .. }, quantity) => {
                            let a = x_loc.cross(&unit(component));
                            match quantity {
                                Quantity::Value => vals = field(a * value),
                                // curl(x_loc x e_c) = -2 e_c / h
                                Quantity::Curl => {
                                    vals = field(grad.cross(&a) - unit(component) * (2.0 * value / h))
                                }
                                Quantity::Divergence => vals[0] = grad.dot(&a),
                                _ => panic!("{quantity:?} undefined for {g:?}"),
                            }
                        }
                        (Generator::Radial { .. }, quantity) => match quantity {
                            Quantity::Value => vals = field(x_loc * value),
                            Quantity::Curl => vals = field(grad.cross(&x_loc)),
                            Quantity::Divergence => vals[0] = grad.dot(&x_loc) + 3.0 * value / h,
                            _ => panic!("{quantity:?} undefined for {g:?}"),
                        },
                        _ => panic!("{quantity:?} undefined for {g:?}"),
                    }
                }
                Generator::FaceScalar { index }
                | Generator::FaceTangent { index, .. }
                | Generator::FaceRotated { index } => {
                    let (face, s, [d1, d2], metric_inv) = face_data.as_ref().expect("face samples");
                    let f = tet.face(*face);
                    let scale = 1.0 / (2.0 * f.area).sqrt();
                    let value = s.values[(q, index)] * scale;
                    let g_eta = metric_inv
                        * nalgebra::Vector2::new(s.gradients[0][(q, index)], s.gradients[1][(q, index)])
                        * scale;
                    let grad = d1 * g_eta[0] + d2 * g_eta[1];
                    let normal = f.normal;
                    match (*g, quantity) {
                        (Generator::FaceScalar { .. }, Quantity::Value) => vals[0] = value,
                        (Generator::FaceScalar { .. }, Quantity::Gradient) => {
                            vals = [grad.x, grad.y, grad.z]
                        }
                        (Generator::FaceTangent { direction, .. }, Quantity::Value) => {
                            let v = f.frame[direction] * value;
                            vals = [v.x, v.y, v.z];
                        }
                        (Generator::FaceTangent { direction, .. }, Quantity::SurfaceCurl) => {
                            vals[0] = grad.cross(&f.frame[direction]).dot(&normal);
                        }
                        (Generator::FaceRotated { .. }, Quantity::Value) => {
                            let y_loc = (points.x[q] - f.centroid) / h;
                            let v = normal.cross(&y_loc) * value;
                            vals = [v.x, v.y, v.z];
                        }
                        (Generator::FaceRotated { .. }, Quantity::SurfaceCurl) => {
                            let y_loc = (points.x[q] - f.centroid) / h;
                            let a = normal.cross(&y_loc);
                            vals[0] = grad.cross(&a).dot(&normal) + 2.0 * value / h;
                        }
                        _ => panic!("{quantity:?} undefined for {g:?}"),
                    }
                }
            }
            for c in 0..ncomp {
                out[(q * ncomp + c, j)] = vals[c];
            }
        }
    }
    out
}

fn unit(component: usize) -> Point {
    let mut e = Point::zeros();
    e[component] = 1.0;
    e
}

/// `a^T diag(w) b` with each weight repeated over `ncomp` consecutive rows.
pub(crate) fn weighted_inner(a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &[f64], ncomp: usize) -> DMatrix<f64> {
    let mut wb = b.clone();
    for (r, mut row) in wb.row_iter_mut().enumerate() {
        row *= weights[r / ncomp];
    }
    a.tr_mul(&wb)
}

fn degree_check(tag: SpaceTag) -> Result<()> {
    if tag.degree() > tag.max_degree() {
        return Err(Error::UnsupportedDegree {
            requested: tag.degree(),
            max: tag.max_degree(),
        });
    }
    if let Some(face) = tag.face() {
        if face > 3 {
            return Err(Error::InvalidParameter(format!("face index {face} out of range")));
        }
    }
    Ok(())
}

/// Quadrature rule used for Gram matrices of degree-`p` spaces.
pub(crate) fn rule_degree(p: usize) -> usize {
    2 * p + 3
}

pub(crate) fn rule_points(tet: &Tetrahedron, tag: SpaceTag, degree: usize) -> Result<PointSet> {
    match tag.face() {
        Some(face) => PointSet::face_rule(tet, face, degree),
        None => PointSet::volume_rule(tet, degree),
    }
}

fn generator_gram(tet: &Tetrahedron, tag: SpaceTag) -> Result<(Vec<Generator>, PointSet, DMatrix<f64>, DMatrix<f64>)> {
    degree_check(tag)?;
    let gens = generators(tag);
    let pts = rule_points(tet, tag, rule_degree(tag.degree()))?;
    let samples = eval_generators(tet, tag, &gens, &pts, Quantity::Value);
    let ncomp = components(tag, Quantity::Value);
    let gram = weighted_inner(&samples, &samples, &pts.weights, ncomp);
    Ok((gens, pts, samples, gram))
}

/// Sorted (descending) eigen-decomposition of a symmetric matrix.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Numerical rank of the generator set of `tag`: the number of Gram
/// eigenvalues above `tolerance * largest`.
pub fn numerical_rank(tag: SpaceTag, tet: &Tetrahedron, tolerance: f64) -> Result<usize> {
    let (_, _, _, gram) = generator_gram(tet, tag)?;
    let (values, _) = sorted_eigen(gram);
    let cutoff = tolerance * values.first().copied().unwrap_or(0.0);
    Ok(values.iter().filter(|&&v| v > cutoff).count())
}

#[derive(Debug, Clone)]
pub struct PolySpaceBasis {
    tag: SpaceTag,
    tet: Arc<Tetrahedron>,
    generators: Vec<Generator>,
    /// `dim x n_generators`.
    coeffs: DMatrix<f64>,
}

/// Orthonormal basis of `tag` on `tet` with the default rank cutoff.
pub fn orthonormal_basis(tag: SpaceTag, tet: &Arc<Tetrahedron>) -> Result<PolySpaceBasis> {
    PolySpaceBasis::build(tag, tet, RANK_TOLERANCE)
}

impl PolySpaceBasis {
    pub fn build(tag: SpaceTag, tet: &Arc<Tetrahedron>, rank_tolerance: f64) -> Result<Self> {
        let (gens, pts, samples, gram) = generator_gram(tet, tag)?;
        let ncomp = components(tag, Quantity::Value);
        let (values, vectors) = sorted_eigen(gram);
        let cutoff = rank_tolerance * values.first().copied().unwrap_or(0.0);
        let rank = values.iter().filter(|&&v| v > cutoff).count();
        let expected = dimension(tag);
        if rank != expected {
            return Err(Error::RankMismatch {
                space: tag.to_string(),
                expected,
                found: rank,
            });
        }
        let mut coeffs = DMatrix::<f64>::zeros(rank, gens.len());
        for k in 0..rank {
            let s = 1.0 / values[k].sqrt();
            for j in 0..gens.len() {
                coeffs[(k, j)] = vectors[(j, k)] * s;
            }
        }

        // second pass: symmetric correction by Gram^{-1/2}
        let basis_samples = &samples * coeffs.transpose();
        let gram2 = weighted_inner(&basis_samples, &basis_samples, &pts.weights, ncomp);
        let (vals2, vecs2) = sorted_eigen(gram2);
        if vals2.last().copied().unwrap_or(1.0) <= 0.0 {
            return Err(Error::ConditioningFailure {
                space: tag.to_string(),
                deviation: f64::INFINITY,
            });
        }
        let inv_sqrt = DMatrix::from_fn(rank, rank, |r, c| {
            (0..rank).map(|k| vecs2[(r, k)] * vecs2[(c, k)] / vals2[k].sqrt()).sum::<f64>()
        });
        let coeffs = inv_sqrt * coeffs;

        let basis_samples = &samples * coeffs.transpose();
        let gram3 = weighted_inner(&basis_samples, &basis_samples, &pts.weights, ncomp);
        let deviation = (gram3 - DMatrix::<f64>::identity(rank, rank)).abs().max();
        if !(deviation <= ORTHONORMALITY_TOLERANCE) {
            return Err(Error::ConditioningFailure {
                space: tag.to_string(),
                deviation,
            });
        }
        Ok(Self {
            tag,
            tet: Arc::clone(tet),
            generators: gens,
            coeffs,
        })
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn tetrahedron(&self) -> &Arc<Tetrahedron> {
        &self.tet
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// `dim x n_generators` coefficient matrix.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Samples of `quantity` for every basis member; `points*ncomp x dim`.
    pub(crate) fn samples(&self, points: &PointSet, quantity: Quantity) -> DMatrix<f64> {
        eval_generators(&self.tet, self.tag, &self.generators, points, quantity) * self.coeffs.transpose()
    }

    pub(crate) fn ncomp(&self, quantity: Quantity) -> usize {
        components(self.tag, quantity)
    }

    /// Points of the space's domain (volume or face) for plain evaluation.
    pub(crate) fn point_set(&self, points: &[Point]) -> PointSet {
        match self.tag.face() {
            Some(face) => PointSet::face_points(&self.tet, face, points),
            None => PointSet::volume_points(&self.tet, points),
        }
    }

    /// Quadrature points of the space's domain exact to `degree`.
    pub(crate) fn rule(&self, degree: usize) -> Result<PointSet> {
        rule_points(&self.tet, self.tag, degree)
    }

    /// L² projection of samples given at `points` (a quadrature point set of
    /// the same domain) onto this basis.
    pub(crate) fn project(&self, points: &PointSet, values: &DMatrix<f64>) -> DMatrix<f64> {
        let mine = self.samples(points, Quantity::Value);
        weighted_inner(&mine, values, &points.weights, self.ncomp(Quantity::Value))
    }

    /// The L² Gram matrix of the basis computed with a rule exact to
    /// `degree`.
    pub fn gram(&self, degree: usize) -> Result<DMatrix<f64>> {
        let pts = self.rule(degree)?;
        let s = self.samples(&pts, Quantity::Value);
        Ok(weighted_inner(&s, &s, &pts.weights, self.ncomp(Quantity::Value)))
    }

    pub fn zero_field(self: &Arc<Self>) -> FieldCoefficients {
        FieldCoefficients::new(Arc::clone(self), DVector::zeros(self.dim())).expect("length matches")
    }
}

/// Values of a field at a list of points.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    Scalar(Vec<f64>),
    Vector(Vec<Point>),
}

/// A field expanded in an orthonormal basis; its L² norm is the Euclidean
/// norm of the coefficients.
#[derive(Debug, Clone)]
pub struct FieldCoefficients {
    basis: Arc<PolySpaceBasis>,
    coeffs: DVector<f64>,
}

impl FieldCoefficients {
    pub fn new(basis: Arc<PolySpaceBasis>, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::LengthMismatch {
                expected: basis.dim(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<PolySpaceBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coefficients(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Point values. Face fields expect points on their face.
    pub fn evaluate(&self, points: &[Point]) -> FieldValues {
        let pts = self.basis.point_set(points);
        let samples = self.basis.samples(&pts, Quantity::Value) * &self.coeffs;
        if self.basis.tag.is_scalar() {
            FieldValues::Scalar(samples.iter().copied().collect())
        } else {
            FieldValues::Vector(
                (0..points.len())
                    .map(|q| Point::new(samples[3 * q], samples[3 * q + 1], samples[3 * q + 2]))
                    .collect(),
            )
        }
    }

    /// L² norm recomputed by quadrature (independent of orthonormality).
    pub fn quadrature_norm(&self) -> Result<f64> {
        let p = self.basis.tag.degree();
        let pts = self.basis.rule(rule_degree(p))?;
        let samples = self.basis.samples(&pts, Quantity::Value) * &self.coeffs;
        let ncomp = self.basis.ncomp(Quantity::Value);
        Ok(samples
            .iter()
            .enumerate()
            .map(|(r, v)| v * v * pts.weights[r / ncomp])
            .sum::<f64>()
            .sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> Arc<Tetrahedron> {
        Arc::new(Tetrahedron::reference())
    }

    fn skewed() -> Arc<Tetrahedron> {
        Arc::new(
            Tetrahedron::from_arrays([
                [0.1, -0.2, 0.0],
                [1.3, 0.1, 0.2],
                [0.2, 0.9, -0.1],
                [0.4, 0.3, 0.6],
            ])
            .unwrap(),
        )
    }

    #[test]
    fn generator_counts() {
        assert_eq!(generators(SpaceTag::Nedelec(0)).len(), 6);
        assert_eq!(generators(SpaceTag::RaviartThomas(0)).len(), 4);
        assert_eq!(generators(SpaceTag::Nedelec(1)).len(), 21);
        assert_eq!(generators(SpaceTag::FaceTrace { degree: 1, face: 0 }).len(), 8);
    }

    #[test]
    fn closed_form_dimensions() {
        assert_eq!(dimension(SpaceTag::Nedelec(2)), 45);
        assert_eq!(dimension(SpaceTag::RaviartThomas(1)), 15);
        assert_eq!(dimension(SpaceTag::FaceTrace { degree: 0, face: 3 }), 3);
    }

    #[test]
    fn rank_oracle_matches_closed_forms() {
        let k = skewed();
        for p in 0..=3 {
            for tag in [
                SpaceTag::ScalarP(p),
                SpaceTag::Nedelec(p),
                SpaceTag::RaviartThomas(p),
                SpaceTag::FaceScalarP { degree: p, face: 1 },
                SpaceTag::FaceTrace { degree: p, face: 2 },
            ] {
                assert_eq!(numerical_rank(tag, &k, RANK_TOLERANCE).unwrap(), dimension(tag), "{tag}");
            }
        }
        assert_eq!(numerical_rank(SpaceTag::Nedelec(1), &k, RANK_TOLERANCE).unwrap(), 20);
    }

    #[test]
    fn constant_scalar_basis_on_reference() {
        let basis = Arc::new(orthonormal_basis(SpaceTag::ScalarP(0), &reference()).unwrap());
        let f = FieldCoefficients::new(basis, DVector::from_element(1, 1.0)).unwrap();
        match f.evaluate(&[Point::new(0.1, 0.2, 0.3)]) {
            FieldValues::Scalar(v) => assert!((v[0].abs() - 6f64.sqrt()).abs() < 1e-13),
            _ => panic!("scalar expected"),
        }
    }

    #[test]
    fn bases_are_orthonormal() {
        let k = skewed();
        for tag in [
            SpaceTag::Nedelec(0),
            SpaceTag::Nedelec(4),
            SpaceTag::RaviartThomas(3),
            SpaceTag::FaceTrace { degree: 3, face: 0 },
            SpaceTag::FaceScalarP { degree: 4, face: 3 },
        ] {
            let b = orthonormal_basis(tag, &k).unwrap();
            assert_eq!(b.dim(), dimension(tag));
            let g = b.gram(2 * tag.degree() + 5).unwrap();
            let dev = (g - DMatrix::identity(b.dim(), b.dim())).abs().max();
            assert!(dev < 1e-10, "{tag}: {dev}");
        }
    }

    #[test]
    fn evaluation_and_reprojection() {
        let k = skewed();
        let b = Arc::new(orthonormal_basis(SpaceTag::Nedelec(2), &k).unwrap());
        let zero = b.zero_field();
        match zero.evaluate(&[k.centroid()]) {
            FieldValues::Vector(v) => assert_eq!(v[0], Point::zeros()),
            _ => panic!(),
        }
        let pts = b.rule(rule_degree(2)).unwrap();
        let member = b.samples(&pts, Quantity::Value).column(5).into_owned();
        let coords = b.project(&pts, &DMatrix::from_column_slice(member.len(), 1, member.as_slice()));
        for i in 0..b.dim() {
            let expected = if i == 5 { 1.0 } else { 0.0 };
            assert!((coords[(i, 0)] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn cross_generator_arithmetic() {
        // (x_loc x e_3) at the point c_K + h e_1 equals (0, -1, 0)
        let k = reference();
        let gens = [Generator::Cross { component: 2, index: 0 }];
        let x = k.centroid() + Point::new(k.length_scale(), 0.0, 0.0);
        let pts = PointSet::volume_points(&k, &[x]);
        let s = eval_generators(&k, SpaceTag::Nedelec(0), &gens, &pts, Quantity::Value);
        let phi0 = 6f64.sqrt();
        assert!((s[(0, 0)]).abs() < 1e-14);
        assert!((s[(1, 0)] + phi0).abs() < 1e-13);
        assert!((s[(2, 0)]).abs() < 1e-14);
    }

    #[test]
    fn quadrature_norm_equals_coefficient_norm() {
        let k = skewed();
        let b = Arc::new(orthonormal_basis(SpaceTag::RaviartThomas(2), &k).unwrap());
        let c = DVector::from_fn(b.dim(), |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
        let f = FieldCoefficients::new(b, c).unwrap();
        let qn = f.quadrature_norm().unwrap();
        assert!((qn - f.norm()).abs() < 1e-10 * f.norm());
    }

    #[test]
    fn unsupported_degree() {
        let k = reference();
        assert!(matches!(
            orthonormal_basis(SpaceTag::Nedelec(MAX_DEGREE + 1), &k),
            Err(Error::UnsupportedDegree { .. })
        ));
    }
}
