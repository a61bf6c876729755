//! Tetrahedra, their faces and edges, and affine maps between them.
//!
//! Faces are numbered by the vertex they do not contain: face `i` is
//! opposite vertex `i`. Two distinct faces `i` and `j` therefore share the
//! edge joining the two remaining vertices.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Relative threshold on `|signed volume| / h^3` below which a vertex set is
/// rejected.
pub const DEGENERACY_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Vertex indices in increasing order.
    pub vertices: [usize; 3],
    /// Outward unit normal.
    pub normal: Point,
    pub area: f64,
    pub centroid: Point,
    /// Orthonormal in-plane frame with `t1 x t2 = normal`; `t1` follows the
    /// first face edge `vertices[0] -> vertices[1]`.
    pub frame: [Point; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Vertex indices, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Unit tangent from `vertices[0]` to `vertices[1]`.
    pub tangent: Point,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tetrahedron {
    vertices: [Point; 4],
    faces: [Face; 4],
    edges: [Edge; 6],
    volume: f64,
    signed_volume: f64,
    diameter: f64,
    insphere_diameter: f64,
    centroid: Point,
    /// Columns `v_k - v_0`, k = 1..3.
    edge_matrix: Matrix3<f64>,
    edge_matrix_inv: Matrix3<f64>,
}

/// Vertex index pairs of the six edges.
pub const EDGE_VERTICES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

impl Tetrahedron {
    pub fn new(vertices: [Point; 4]) -> Result<Self> {
        let diameter = EDGE_VERTICES
            .iter()
            .map(|[a, b]| (vertices[*b] - vertices[*a]).norm())
            .fold(0.0, f64::max);
        let edge_matrix = Matrix3::from_columns(&[
            vertices[1] - vertices[0],
            vertices[2] - vertices[0],
            vertices[3] - vertices[0],
        ]);
        let signed_volume = edge_matrix.determinant() / 6.0;
        let threshold = DEGENERACY_TOLERANCE * diameter.powi(3);
        if !(signed_volume.abs() > threshold) {
            return Err(Error::DegenerateTetrahedron {
                volume: signed_volume.abs(),
                threshold,
            });
        }
        let edge_matrix_inv = edge_matrix
            .try_inverse()
            .ok_or(Error::DegenerateTetrahedron {
                volume: signed_volume.abs(),
                threshold,
            })?;
        let centroid = vertices.iter().sum::<Point>() / 4.0;

        let faces = std::array::from_fn(|opposite| {
            let mut idx = [0usize; 3];
            let mut k = 0;
            for v in 0..4 {
                if v != opposite {
                    idx[k] = v;
                    k += 1;
                }
            }
            let [a, b, c] = idx.map(|i| vertices[i]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            let face_centroid = (a + b + c) / 3.0;
            let mut normal = cross / cross.norm();
            if normal.dot(&(face_centroid - centroid)) < 0.0 {
                normal = -normal;
            }
            let t1 = (b - a).normalize();
            let t2 = normal.cross(&t1);
            Face {
                vertices: idx,
                normal,
                area,
                centroid: face_centroid,
                frame: [t1, t2],
            }
        });

        let edges = EDGE_VERTICES.map(|[a, b]| {
            let d = vertices[b] - vertices[a];
            let length = d.norm();
            Edge {
                vertices: [a, b],
                tangent: d / length,
                length,
            }
        });

        let total_area: f64 = faces.iter().map(|f| f.area).sum();
        let volume = signed_volume.abs();
        Ok(Self {
            vertices,
            faces,
            edges,
            volume,
            signed_volume,
            diameter,
            insphere_diameter: 6.0 * volume / total_area,
            centroid,
            edge_matrix,
            edge_matrix_inv,
        })
    }

    pub fn from_arrays(vertices: [[f64; 3]; 4]) -> Result<Self> {
        Self::new(vertices.map(Point::from))
    }

    /// The reference element with vertices (1,0,0), (0,1,0), (0,0,1), (0,0,0).
    pub fn reference() -> Self {
        Self::from_arrays([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
        ])
        .expect("reference tetrahedron is non-degenerate")
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face; 4] {
        &self.faces
    }

    pub fn face(&self, index: usize) -> &Face {
        &self.faces[index]
    }

    pub fn edges(&self) -> &[Edge; 6] {
        &self.edges
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn signed_volume(&self) -> f64 {
        self.signed_volume
    }

    /// h_K, the largest vertex distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// rho_K, diameter of the inscribed sphere (6 V / total area).
    pub fn insphere_diameter(&self) -> f64 {
        self.insphere_diameter
    }

    /// kappa_K = h_K / rho_K.
    pub fn shape_regularity(&self) -> f64 {
        self.diameter / self.insphere_diameter
    }

    /// Length scale used in the H(curl) norm; fixed to the diameter.
    pub fn length_scale(&self) -> f64 {
        self.diameter
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    /// Index of the edge shared by two distinct faces.
    pub fn shared_edge(&self, face_a: usize, face_b: usize) -> Option<usize> {
        if face_a == face_b || face_a > 3 || face_b > 3 {
            return None;
        }
        let mut rest = (0..4).filter(|v| *v != face_a && *v != face_b);
        let pair = [rest.next()?, rest.next()?];
        EDGE_VERTICES.iter().position(|e| *e == pair)
    }

    /// Inverse Jacobian of `xi -> v0 + E xi` from the unit simplex
    /// {xi >= 0, sum xi <= 1}.
    pub(crate) fn simplex_jacobian_inv(&self) -> &Matrix3<f64> {
        &self.edge_matrix_inv
    }

    #[cfg(test)]
    pub(crate) fn from_simplex(&self, xi: [f64; 3]) -> Point {
        self.vertices[0] + self.edge_matrix * Point::from(xi)
    }

    pub(crate) fn to_simplex(&self, x: &Point) -> [f64; 3] {
        let xi = self.edge_matrix_inv * (x - self.vertices[0]);
        [xi[0], xi[1], xi[2]]
    }

    /// Barycentric coordinates of `x` (weights of vertices 0..3).
    pub fn barycentric(&self, x: &Point) -> [f64; 4] {
        let [a, b, c] = self.to_simplex(x);
        [1.0 - a - b - c, a, b, c]
    }

    pub fn point_from_barycentric(&self, lambda: &[f64; 4]) -> Point {
        self.vertices
            .iter()
            .zip(lambda)
            .map(|(v, l)| v * *l)
            .sum()
    }

    /// Coordinates of a point on face `face` in the parametrization
    /// `x = P_a + eta_1 (P_b - P_a) + eta_2 (P_c - P_a)`.
    pub(crate) fn face_coordinates(&self, face: usize, x: &Point) -> [f64; 2] {
        let lambda = self.barycentric(x);
        let [_, b, c] = self.faces[face].vertices;
        [lambda[b], lambda[c]]
    }

    #[cfg(test)]
    pub(crate) fn face_point(&self, face: usize, eta: [f64; 2]) -> Point {
        let [a, b, c] = self.faces[face].vertices.map(|i| self.vertices[i]);
        a + (b - a) * eta[0] + (c - a) * eta[1]
    }

    /// Columns `P_b - P_a`, `P_c - P_a` of the face parametrization.
    pub(crate) fn face_tangents(&self, face: usize) -> [Point; 2] {
        let [a, b, c] = self.faces[face].vertices.map(|i| self.vertices[i]);
        [b - a, c - a]
    }
}

/// `x = J x_hat + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub jacobian: Matrix3<f64>,
    pub offset: Point,
    pub det: f64,
    pub inverse_jacobian: Matrix3<f64>,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self {
            jacobian: Matrix3::identity(),
            offset: Point::zeros(),
            det: 1.0,
            inverse_jacobian: Matrix3::identity(),
        }
    }

    pub fn apply(&self, x_hat: &Point) -> Point {
        self.jacobian * x_hat + self.offset
    }

    pub fn apply_inverse(&self, x: &Point) -> Point {
        self.inverse_jacobian * (x - self.offset)
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            jacobian: self.inverse_jacobian,
            offset: -(self.inverse_jacobian * self.offset),
            det: 1.0 / self.det,
            inverse_jacobian: self.jacobian,
        }
    }

    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            jacobian: self.jacobian * inner.jacobian,
            offset: self.jacobian * inner.offset + self.offset,
            det: self.det * inner.det,
            inverse_jacobian: inner.inverse_jacobian * self.inverse_jacobian,
        }
    }

    /// The map sending `source` vertex `i` to `target` vertex
    /// `permutation[i]`. The determinant may be negative.
    pub fn between(
        source: &Tetrahedron,
        target: &Tetrahedron,
        permutation: [usize; 4],
    ) -> Result<Self> {
        let mut seen = [false; 4];
        for &p in &permutation {
            if p > 3 || seen[p] {
                return Err(Error::InvalidParameter(format!(
                    "{permutation:?} is not a permutation of 0..4"
                )));
            }
            seen[p] = true;
        }
        let src = source.vertices();
        let dst = permutation.map(|i| target.vertices()[i]);
        let source_edges = Matrix3::from_columns(&[src[1] - src[0], src[2] - src[0], src[3] - src[0]]);
        let target_edges = Matrix3::from_columns(&[dst[1] - dst[0], dst[2] - dst[0], dst[3] - dst[0]]);
        let source_inv = source_edges.try_inverse().ok_or(Error::DegenerateTetrahedron {
            volume: source.volume(),
            threshold: DEGENERACY_TOLERANCE * source.diameter().powi(3),
        })?;
        let jacobian = target_edges * source_inv;
        let inverse_jacobian = jacobian.try_inverse().ok_or_else(|| {
            Error::NumericalBreakdown("affine map jacobian is singular".into())
        })?;
        let offset = dst[0] - jacobian * src[0];
        Ok(Self {
            jacobian,
            offset,
            det: jacobian.determinant(),
            inverse_jacobian,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn regular() -> Tetrahedron {
        let s = 1.0 / (2.0 * 2f64.sqrt());
        Tetrahedron::from_arrays([
            [s, s, s],
            [s, -s, -s],
            [-s, s, -s],
            [-s, -s, s],
        ])
        .unwrap()
    }

    #[test]
    fn reference_element_quantities() {
        let k = Tetrahedron::reference();
        assert!(close(k.volume(), 1.0 / 6.0, 1e-15));
        assert!(close(k.diameter(), 2f64.sqrt(), 1e-15));
        // face opposite (0,0,0) lies in x + y + z = 1
        let n = k.face(3).normal;
        let expected = Point::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        assert!((n - expected).norm() < 1e-15);
        // face z = 0 is opposite vertex 2
        assert!((k.face(2).normal - Point::new(0.0, 0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn regular_tetrahedron_attains_sqrt6() {
        let k = regular();
        for e in k.edges() {
            assert!(close(e.length, 1.0, 1e-14), "{}", e.length);
        }
        assert!(close(k.shape_regularity(), 6f64.sqrt(), 1e-13));
    }

    #[test]
    fn coplanar_points_are_rejected() {
        let err = Tetrahedron::from_arrays([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ])
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateTetrahedron { .. }));
    }

    #[test]
    fn normals_are_unit_and_outward() {
        let k = Tetrahedron::from_arrays([
            [0.3, -0.1, 0.2],
            [1.4, 0.2, -0.3],
            [0.1, 1.1, 0.4],
            [0.2, 0.3, 1.7],
        ])
        .unwrap();
        for f in k.faces() {
            assert!((f.normal.norm() - 1.0).abs() < 1e-14);
            assert!(f.normal.dot(&(f.centroid - k.centroid())) > 0.0);
            let [t1, t2] = f.frame;
            assert!((t1.cross(&t2) - f.normal).norm() < 1e-14);
        }
        let rho = 6.0 * k.volume() / k.faces().iter().map(|f| f.area).sum::<f64>();
        assert!(close(k.insphere_diameter(), rho, 1e-15));
        assert!(k.shape_regularity() >= 6f64.sqrt());
    }

    #[test]
    fn shared_edges() {
        let k = Tetrahedron::reference();
        // faces 0 and 1 share the edge between vertices 2 and 3
        let e = k.shared_edge(0, 1).unwrap();
        assert_eq!(k.edges()[e].vertices, [2, 3]);
        assert_eq!(k.shared_edge(2, 2), None);
    }

    #[test]
    fn affine_maps() {
        let k = Tetrahedron::reference();
        let id = AffineMap::between(&k, &k, [0, 1, 2, 3]).unwrap();
        assert!((id.jacobian - Matrix3::identity()).norm() < 1e-15);
        assert!(id.offset.norm() < 1e-15);

        let doubled = Tetrahedron::new(k.vertices().map(|v| v * 2.0)).unwrap();
        let scale = AffineMap::between(&k, &doubled, [0, 1, 2, 3]).unwrap();
        assert!((scale.jacobian - Matrix3::identity() * 2.0).norm() < 1e-14);
        assert!(close(scale.det, 8.0, 1e-14));
        assert!(close(scale.det.abs() * k.volume(), doubled.volume(), 1e-12));

        let swap = AffineMap::between(&k, &k, [1, 0, 2, 3]).unwrap();
        assert!(close(swap.det, -1.0, 1e-14));

        let composed = swap.compose(&swap.inverse());
        assert!((composed.jacobian - Matrix3::identity()).norm() < 1e-12);
        assert!(composed.offset.norm() < 1e-12);

        for (i, v) in k.vertices().iter().enumerate() {
            let target = k.vertices()[[1, 0, 2, 3][i]];
            assert!((swap.apply(v) - target).norm() < 1e-13);
        }
        assert!(AffineMap::between(&k, &k, [0, 0, 2, 3]).is_err());
    }

    #[test]
    fn simplex_coordinates_round_trip() {
        let k = regular();
        let x = k.from_simplex([0.2, 0.3, 0.1]);
        let xi = k.to_simplex(&x);
        assert!((xi[0] - 0.2).abs() + (xi[1] - 0.3).abs() + (xi[2] - 0.1).abs() < 1e-14);
        let eta = k.face_coordinates(1, &k.face_point(1, [0.25, 0.5]));
        assert!((eta[0] - 0.25).abs() + (eta[1] - 0.5).abs() < 1e-14);
    }
}
