//! L²-orthonormal scalar polynomials on the unit triangle and unit
//! tetrahedron, generated by an Arnoldi-type recurrence.
//!
//! Function `n` is obtained by multiplying an earlier function by one
//! centered coordinate and orthogonalizing against every earlier function
//! (two Gram–Schmidt passes). The multiplication pattern follows the graded
//! monomial order, so the first `dim P_d` functions span `P_d` for every `d`.
//! Evaluating at new points replays the recurrence, which is far better
//! conditioned than expanding in monomials.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::quadrature::{unit_tet_rule, unit_tri_rule};

/// Highest scalar degree the recurrences are built for.
pub const MAX_SCALAR_DEGREE: usize = 12;

#[derive(Debug)]
struct Step {
    axis: usize,
    parent: usize,
    coeffs: Vec<f64>,
    norm: f64,
}

#[derive(Debug)]
pub(crate) struct OrthoRecurrence<const D: usize> {
    constant: f64,
    center: [f64; D],
    steps: Vec<Step>,
}

/// Values and reference-coordinate gradients of the first `count` functions
/// at a point set. Matrices are `points x count`.
pub(crate) struct ScalarSamples<const D: usize> {
    pub values: DMatrix<f64>,
    pub gradients: [DMatrix<f64>; D],
}

pub(crate) fn scalar_dim(dim: usize, degree: usize) -> usize {
    match dim {
        2 => (degree + 1) * (degree + 2) / 2,
        3 => (degree + 1) * (degree + 2) * (degree + 3) / 6,
        _ => unreachable!("only 2D and 3D simplices"),
    }
}

fn graded_indices<const D: usize>(max_degree: usize) -> Vec<[usize; D]> {
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        let mut level = Vec::new();
        collect_level::<D>(degree, 0, [0; D], &mut level);
        out.extend(level);
    }
    out
}

fn collect_level<const D: usize>(remaining: usize, axis: usize, cur: [usize; D], out: &mut Vec<[usize; D]>) {
    if axis == D - 1 {
        let mut m = cur;
        m[axis] = remaining;
        out.push(m);
        return;
    }
    for k in (0..=remaining).rev() {
        let mut m = cur;
        m[axis] = k;
        collect_level::<D>(remaining - k, axis + 1, m, out);
    }
}

impl<const D: usize> OrthoRecurrence<D> {
    fn build(max_degree: usize, rule: &[([f64; D], f64)], measure: f64, center: [f64; D]) -> Self {
        let indices = graded_indices::<D>(max_degree);
        let lookup: HashMap<[usize; D], usize> =
            indices.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let npts = rule.len();
        let n = indices.len();
        let constant = 1.0 / measure.sqrt();
        let weights = DVector::from_iterator(npts, rule.iter().map(|(_, w)| *w));
        let mut values = DMatrix::<f64>::zeros(npts, n);
        values.column_mut(0).fill(constant);
        let mut steps = Vec::with_capacity(n);

        for (idx, m) in indices.iter().enumerate().skip(1) {
            let axis = (0..D).find(|&k| m[k] > 0).expect("nonzero multi-index");
            let mut parent_index = *m;
            parent_index[axis] -= 1;
            let parent = lookup[&parent_index];
            let mut v = DVector::from_iterator(
                npts,
                rule.iter()
                    .enumerate()
                    .map(|(q, (x, _))| (x[axis] - center[axis]) * values[(q, parent)]),
            );
            let previous = values.columns(0, idx);
            let mut coeffs = DVector::<f64>::zeros(idx);
            for _ in 0..2 {
                let h = previous.tr_mul(&v.component_mul(&weights));
                v -= &previous * &h;
                coeffs += h;
            }
            let norm = v.component_mul(&v).dot(&weights).sqrt();
            values.column_mut(idx).copy_from(&(v / norm));
            steps.push(Step {
                axis,
                parent,
                coeffs: coeffs.iter().copied().collect(),
                norm,
            });
        }
        Self {
            constant,
            center,
            steps,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len() + 1
    }

    /// Evaluates the first `count` functions and their gradients.
    pub fn evaluate(&self, points: &[[f64; D]], count: usize) -> ScalarSamples<D> {
        assert!(count <= self.len(), "requested {count} functions of {}", self.len());
        let npts = points.len();
        let mut values = DMatrix::<f64>::zeros(npts, count);
        let mut gradients: [DMatrix<f64>; D] = std::array::from_fn(|_| DMatrix::zeros(npts, count));
        if count == 0 {
            return ScalarSamples { values, gradients };
        }
        values.column_mut(0).fill(self.constant);
        for (i, step) in self.steps.iter().take(count - 1).enumerate() {
            let idx = i + 1;
            let h = DVector::from_column_slice(&step.coeffs);
            let shifted: Vec<f64> = points.iter().map(|x| x[step.axis] - self.center[step.axis]).collect();

            let mut v = DVector::from_iterator(
                npts,
                shifted.iter().enumerate().map(|(q, s)| s * values[(q, step.parent)]),
            );
            v -= values.columns(0, idx) * &h;
            values.column_mut(idx).copy_from(&(v / step.norm));

            for (d, grad) in gradients.iter_mut().enumerate() {
                let mut g = DVector::from_iterator(
                    npts,
                    shifted.iter().enumerate().map(|(q, s)| {
                        let product_rule = if d == step.axis { values[(q, step.parent)] } else { 0.0 };
                        product_rule + s * grad[(q, step.parent)]
                    }),
                );
                g -= grad.columns(0, idx) * &h;
                grad.column_mut(idx).copy_from(&(g / step.norm));
            }
        }
        ScalarSamples { values, gradients }
    }
}

/// Orthonormal basis on the unit tetrahedron (measure 1/6).
pub(crate) fn tet_recurrence() -> &'static OrthoRecurrence<3> {
    static CELL: OnceLock<OrthoRecurrence<3>> = OnceLock::new();
    CELL.get_or_init(|| {
        let rule = unit_tet_rule(2 * MAX_SCALAR_DEGREE + 1).expect("supported degree");
        OrthoRecurrence::build(MAX_SCALAR_DEGREE, &rule, 1.0 / 6.0, [0.25; 3])
    })
}

/// Orthonormal basis on the unit triangle (measure 1/2).
pub(crate) fn tri_recurrence() -> &'static OrthoRecurrence<2> {
    static CELL: OnceLock<OrthoRecurrence<2>> = OnceLock::new();
    CELL.get_or_init(|| {
        let rule = unit_tri_rule(2 * MAX_SCALAR_DEGREE + 1).expect("supported degree");
        OrthoRecurrence::build(MAX_SCALAR_DEGREE, &rule, 0.5, [1.0 / 3.0; 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order_counts() {
        assert_eq!(graded_indices::<3>(4).len(), scalar_dim(3, 4));
        assert_eq!(graded_indices::<2>(5).len(), scalar_dim(2, 5));
        assert_eq!(graded_indices::<3>(1), vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]);
    }

    #[test]
    fn tet_basis_is_orthonormal() {
        let rec = tet_recurrence();
        let rule = unit_tet_rule(2 * MAX_SCALAR_DEGREE + 3).unwrap();
        let pts: Vec<[f64; 3]> = rule.iter().map(|(x, _)| *x).collect();
        let s = rec.evaluate(&pts, rec.len());
        let w = DVector::from_iterator(rule.len(), rule.iter().map(|(_, w)| *w));
        let weighted = DMatrix::from_fn(s.values.nrows(), s.values.ncols(), |i, j| s.values[(i, j)] * w[i]);
        let gram = s.values.tr_mul(&weighted);
        let dev = (gram - DMatrix::identity(rec.len(), rec.len())).abs().max();
        assert!(dev < 1e-12, "deviation {dev}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let rec = tri_recurrence();
        let x = [0.21, 0.33];
        let h = 1e-6;
        let count = scalar_dim(2, 6);
        let s = rec.evaluate(&[x], count);
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let fp = rec.evaluate(&[xp], count).values;
            let fm = rec.evaluate(&[xm], count).values;
            for n in 0..count {
                let fd = (fp[(0, n)] - fm[(0, n)]) / (2.0 * h);
                let an = s.gradients[d][(0, n)];
                assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "n={n} d={d}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn prefix_spans_lower_degrees() {
        // the degree-1 prefix must reproduce the linear function xi_0 exactly
        let rec = tet_recurrence();
        let rule = unit_tet_rule(4).unwrap();
        let pts: Vec<[f64; 3]> = rule.iter().map(|(x, _)| *x).collect();
        let s = rec.evaluate(&pts, 4);
        let target = DVector::from_iterator(pts.len(), pts.iter().map(|x| x[0]));
        let w = DVector::from_iterator(rule.len(), rule.iter().map(|(_, w)| *w));
        let coeffs = s.values.tr_mul(&target.component_mul(&w));
        let fit = &s.values * coeffs;
        assert!((fit - target).abs().max() < 1e-13);
    }
}
