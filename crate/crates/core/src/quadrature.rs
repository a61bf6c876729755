//! Conical-product (collapsed Gauss–Jacobi) rules on the tetrahedron and on
//! its triangular faces, plus Gauss–Legendre rules on edges.
//!
//! Rules are first built on the unit simplex and then mapped to the physical
//! element. All weights are positive.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tetrahedron};

/// Largest polynomial degree a rule can be requested for.
pub const MAX_RULE_DEGREE: usize = 61;

/// Quadrature rule on an `N`-vertex simplex: points in barycentric
/// coordinates, weights in the measure of the physical domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const N: usize> {
    pub points: Vec<[f64; N]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

pub type TetRule = QuadratureRule<4>;
pub type TriRule = QuadratureRule<3>;
pub type EdgeRule = QuadratureRule<2>;

impl<const N: usize> QuadratureRule<N> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Weighted sum of `values` against the rule's weights.
pub fn integrate<const N: usize>(values: &[f64], rule: &QuadratureRule<N>) -> Result<f64> {
    if values.len() != rule.len() {
        return Err(Error::LengthMismatch {
            expected: rule.len(),
            actual: values.len(),
        });
    }
    Ok(values.iter().zip(&rule.weights).map(|(v, w)| v * w).sum())
}

fn points_for(degree: usize) -> Result<usize> {
    if degree > MAX_RULE_DEGREE {
        return Err(Error::UnsupportedDegree {
            requested: degree,
            max: MAX_RULE_DEGREE,
        });
    }
    Ok(degree / 2 + 1)
}

/// Gauss–Jacobi nodes and weights on [-1, 1] for the weight
/// `(1 - x)^alpha (1 + x)^beta`.
///
/// Golub–Welsch for the initial nodes, then Newton on the Jacobi polynomial
/// and the closed-form Christoffel weights.
pub fn gauss_jacobi(n: usize, alpha: u32, beta: u32) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "gauss_jacobi needs at least one node");
    let (a, b) = (alpha as f64, beta as f64);
    let ab = a + b;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jacobi[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s = 2.0 * k1 + ab;
            let off = 2.0 / s * (k1 * (k1 + a) * (k1 + b) * (k1 + ab) / ((s + 1.0) * (s - 1.0))).sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());

    for x in nodes.iter_mut() {
        for _ in 0..100 {
            let (p, dp) = jacobi_with_derivative(n, a, b, *x);
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }

    // w_i = 2^{a+b+1} G(n+a+1) G(n+b+1) / (G(n+a+b+1) n! (1-x^2) P_n'(x)^2)
    let log_const = (ab + 1.0) * std::f64::consts::LN_2 + ln_factorial(n + alpha as usize)
        + ln_factorial(n + beta as usize)
        - ln_factorial(n + (alpha + beta) as usize)
        - ln_factorial(n);
    let constant = log_const.exp();
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = jacobi_with_derivative(n, a, b, x);
            constant / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    (nodes, weights)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// P_n^{(a,b)}(x) and its derivative.
fn jacobi_with_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let p = jacobi(n, a, b, x);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)
    };
    (p, dp)
}

fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 0.5 * ((a + b + 2.0) * x + (a - b));
    for k in 2..=n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let c1 = 2.0 * kf * (kf + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s;
        let next = (c2 * cur - c3 * prev) / c1;
        prev = cur;
        cur = next;
    }
    cur
}

/// Nodes and weights on [0, 1] for the weight `(1 - t)^alpha`.
fn unit_interval_jacobi(n: usize, alpha: u32) -> Vec<(f64, f64)> {
    let (x, w) = gauss_jacobi(n, alpha, 0);
    let scale = 0.5f64.powi(alpha as i32 + 1);
    x.into_iter()
        .zip(w)
        .map(|(x, w)| (0.5 * (x + 1.0), w * scale))
        .collect()
}

/// Rule on the unit simplex {xi >= 0, sum xi <= 1} as (xi, weight) pairs;
/// the weights sum to 1/6.
pub(crate) fn unit_tet_rule(degree: usize) -> Result<Vec<([f64; 3], f64)>> {
    let n = points_for(degree)?;
    let ra = unit_interval_jacobi(n, 2);
    let rb = unit_interval_jacobi(n, 1);
    let rc = unit_interval_jacobi(n, 0);
    let mut out = Vec::with_capacity(n * n * n);
    for &(a, wa) in &ra {
        for &(b, wb) in &rb {
            for &(c, wc) in &rc {
                let xi = [a, b * (1.0 - a), c * (1.0 - a) * (1.0 - b)];
                out.push((xi, wa * wb * wc));
            }
        }
    }
    Ok(out)
}

/// Rule on the unit triangle {eta >= 0, eta_1 + eta_2 <= 1}; weights sum to 1/2.
pub(crate) fn unit_tri_rule(degree: usize) -> Result<Vec<([f64; 2], f64)>> {
    let n = points_for(degree)?;
    let ra = unit_interval_jacobi(n, 1);
    let rb = unit_interval_jacobi(n, 0);
    let mut out = Vec::with_capacity(n * n);
    for &(a, wa) in &ra {
        for &(b, wb) in &rb {
            out.push(([a, b * (1.0 - a)], wa * wb));
        }
    }
    Ok(out)
}

/// Gauss–Legendre rule on [0, 1]; weights sum to 1.
pub(crate) fn unit_interval_rule(degree: usize) -> Result<Vec<(f64, f64)>> {
    Ok(unit_interval_jacobi(points_for(degree)?, 0))
}

fn exactness(degree: usize) -> usize {
    2 * (degree / 2 + 1) - 1
}

/// Rule on `tet` exact for polynomials of total degree `degree`.
pub fn tet_rule(degree: usize, tet: &Tetrahedron) -> Result<TetRule> {
    let scale = 6.0 * tet.volume();
    let (points, weights) = unit_tet_rule(degree)?
        .into_iter()
        .map(|([a, b, c], w)| ([1.0 - a - b - c, a, b, c], w * scale))
        .unzip();
    Ok(TetRule {
        points,
        weights,
        exactness_degree: exactness(degree),
    })
}

/// Rule on face `face` of `tet`; barycentric coordinates refer to the face
/// vertices in the order stored on the face.
pub fn tri_rule(degree: usize, tet: &Tetrahedron, face: usize) -> Result<TriRule> {
    if face > 3 {
        return Err(Error::InvalidParameter(format!("face index {face} out of range")));
    }
    let scale = 2.0 * tet.face(face).area;
    let (points, weights) = unit_tri_rule(degree)?
        .into_iter()
        .map(|([a, b], w)| ([1.0 - a - b, a, b], w * scale))
        .unzip();
    Ok(TriRule {
        points,
        weights,
        exactness_degree: exactness(degree),
    })
}

/// Gauss–Legendre rule on edge `edge` of `tet`.
pub fn edge_rule(degree: usize, tet: &Tetrahedron, edge: usize) -> Result<EdgeRule> {
    let length = tet.edges()[edge].length;
    let (points, weights) = unit_interval_rule(degree)?
        .into_iter()
        .map(|(t, w)| ([1.0 - t, t], w * length))
        .unzip();
    Ok(EdgeRule {
        points,
        weights,
        exactness_degree: exactness(degree),
    })
}

impl TetRule {
    pub fn physical_points(&self, tet: &Tetrahedron) -> Vec<Point> {
        self.points.iter().map(|l| tet.point_from_barycentric(l)).collect()
    }
}

impl TriRule {
    pub fn physical_points(&self, tet: &Tetrahedron, face: usize) -> Vec<Point> {
        let [a, b, c] = tet.face(face).vertices.map(|i| tet.vertices()[i]);
        self.points
            .iter()
            .map(|l| a * l[0] + b * l[1] + c * l[2])
            .collect()
    }
}

impl EdgeRule {
    pub fn physical_points(&self, tet: &Tetrahedron, edge: usize) -> Vec<Point> {
        let [a, b] = tet.edges()[edge].vertices.map(|i| tet.vertices()[i]);
        self.points.iter().map(|l| a * l[0] + b * l[1]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gauss_jacobi_matches_moments() {
        // int_{-1}^{1} (1-x)^2 x^k dx for k = 0..5, closed forms
        let (x, w) = gauss_jacobi(3, 2, 0);
        let exact = [8.0 / 3.0, -4.0 / 3.0, 16.0 / 15.0, -4.0 / 5.0, 24.0 / 35.0, -4.0 / 7.0];
        for (k, e) in exact.iter().enumerate() {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            assert!(rel(q, *e) < 1e-14, "k={k}: {q} vs {e}");
        }
    }

    #[test]
    fn degree_zero_rule_is_centroid() {
        let k = Tetrahedron::reference();
        let rule = tet_rule(0, &k).unwrap();
        assert_eq!(rule.len(), 1);
        assert!((rule.weights[0] - 1.0 / 6.0).abs() < 1e-15);
        for l in rule.points[0] {
            assert!((l - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_monomials() {
        let k = Tetrahedron::reference();
        let rule = tet_rule(4, &k).unwrap();
        let pts = rule.physical_points(&k);
        let x2: Vec<f64> = pts.iter().map(|p| p.x * p.x).collect();
        assert!(rel(integrate(&x2, &rule).unwrap(), 1.0 / 60.0) < 1e-13);
        let x2y2: Vec<f64> = pts.iter().map(|p| p.x * p.x * p.y * p.y).collect();
        assert!(rel(integrate(&x2y2, &rule).unwrap(), 1.0 / 1260.0) < 1e-13);

        let rule2 = tet_rule(2, &k).unwrap();
        let ones = vec![1.0; rule2.len()];
        assert!(rel(integrate(&ones, &rule2).unwrap(), 1.0 / 6.0) < 1e-14);
        let xs: Vec<f64> = rule2.physical_points(&k).iter().map(|p| p.x).collect();
        assert!(rel(integrate(&xs, &rule2).unwrap(), 1.0 / 24.0) < 1e-14);
        assert!(matches!(
            integrate(&[], &rule2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn face_rules() {
        let k = Tetrahedron::reference();
        // z = 0 is face 2
        let r0 = tri_rule(0, &k, 2).unwrap();
        assert!(rel(r0.total_weight(), 0.5) < 1e-15);
        let r2 = tri_rule(2, &k, 2).unwrap();
        let pts = r2.physical_points(&k, 2);
        for p in &pts {
            assert!(p.z.abs() < 1e-15);
        }
        let x2: Vec<f64> = pts.iter().map(|p| p.x * p.x).collect();
        assert!(rel(integrate(&x2, &r2).unwrap(), 1.0 / 12.0) < 1e-14);
        let r1 = tri_rule(1, &k, 2).unwrap();
        let x: Vec<f64> = r1.physical_points(&k, 2).iter().map(|p| p.x).collect();
        assert!(rel(integrate(&x, &r1).unwrap(), 1.0 / 6.0) < 1e-14);
    }

    #[test]
    fn exactness_sweep_to_degree_13() {
        let k = Tetrahedron::reference();
        let rule = tet_rule(13, &k).unwrap();
        let pts = rule.physical_points(&k);
        for a in 0..=13u32 {
            for b in 0..=(13 - a) {
                for c in 0..=(13 - a - b) {
                    let vals: Vec<f64> = pts
                        .iter()
                        .map(|p| p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32))
                        .collect();
                    let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3);
                    let q = integrate(&vals, &rule).unwrap();
                    assert!(rel(q, exact) < 1e-12, "({a},{b},{c}): {q} vs {exact}");
                }
            }
        }
        let tri = tri_rule(13, &k, 2).unwrap();
        let pts = tri.physical_points(&k, 2);
        for a in 0..=13u32 {
            for b in 0..=(13 - a) {
                let vals: Vec<f64> = pts
                    .iter()
                    .map(|p| p.x.powi(a as i32) * p.y.powi(b as i32))
                    .collect();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!(rel(integrate(&vals, &tri).unwrap(), exact) < 1e-12);
            }
        }
    }

    #[test]
    fn weights_positive_and_sum_to_measure() {
        let k = Tetrahedron::from_arrays([
            [0.1, 0.0, 0.2],
            [2.0, 0.3, 0.0],
            [0.4, 1.5, 0.1],
            [0.3, 0.2, 0.9],
        ])
        .unwrap();
        for degree in [0, 3, 8, 23] {
            let rule = tet_rule(degree, &k).unwrap();
            assert!(rule.weights.iter().all(|w| *w > 0.0));
            assert!(rel(rule.total_weight(), k.volume()) < 1e-13);
            for f in 0..4 {
                let tri = tri_rule(degree, &k, f).unwrap();
                assert!(tri.weights.iter().all(|w| *w > 0.0));
                assert!(rel(tri.total_weight(), k.face(f).area) < 1e-13);
            }
        }
        assert!(matches!(
            tet_rule(MAX_RULE_DEGREE + 1, &k),
            Err(Error::UnsupportedDegree { .. })
        ));
    }

    #[test]
    fn edge_rule_integrates_polynomials() {
        let k = Tetrahedron::reference();
        let rule = edge_rule(7, &k, 0).unwrap();
        let pts = rule.physical_points(&k, 0);
        // edge 0 runs from (1,0,0) to (0,1,0); length sqrt(2); int y^7 = sqrt(2)/8
        let vals: Vec<f64> = pts.iter().map(|p| p.y.powi(7)).collect();
        assert!(rel(integrate(&vals, &rule).unwrap(), 2f64.sqrt() / 8.0) < 1e-14);
    }
}
