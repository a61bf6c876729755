//! Covariant Piola mapping `v_hat = J^T (v o T)` between two tetrahedra and
//! randomized checks of its properties on Nédélec fields.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::element::{ElementSpaces, OperatorKey};
use crate::error::{Error, Result};
use crate::geometry::{AffineMap, Point, Tetrahedron};
use crate::minsolve::svd_rank;
use crate::polyspace::{rule_degree, FieldCoefficients, PointSet, Quantity, SpaceTag};

/// Largest condition number of the random maps.
pub const MAX_MAP_CONDITION: f64 = 100.0;

/// `T : K_hat -> K` together with the discrete spaces on both elements.
pub struct PiolaContext {
    map: AffineMap,
    /// `K_hat` vertex `i` goes to `K` vertex `permutation[i]`.
    permutation: [usize; 4],
    source: Arc<ElementSpaces>,
    target: Arc<ElementSpaces>,
    pullbacks: Mutex<HashMap<usize, Arc<DMatrix<f64>>>>,
    pushforwards: Mutex<HashMap<usize, Arc<DMatrix<f64>>>>,
}

impl std::fmt::Debug for PiolaContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiolaContext")
            .field("map", &self.map)
            .field("permutation", &self.permutation)
            .finish_non_exhaustive()
    }
}

impl PiolaContext {
    /// The map from `source` onto `target` sending vertex `i` to vertex
    /// `permutation[i]`.
    pub fn new(source: Tetrahedron, target: Tetrahedron, permutation: [usize; 4]) -> Result<Self> {
        let map = AffineMap::between(&source, &target, permutation)?;
        Ok(Self::with_spaces(map, permutation, ElementSpaces::new(source), ElementSpaces::new(target)))
    }

    /// `K = T(K_hat)` for the reference element `K_hat`.
    pub fn from_map(map: AffineMap) -> Result<Self> {
        let source = Tetrahedron::reference();
        let target = Tetrahedron::new(source.vertices().map(|v| map.apply(&v)))?;
        Ok(Self::with_spaces(map, [0, 1, 2, 3], ElementSpaces::new(source), ElementSpaces::new(target)))
    }

    fn with_spaces(map: AffineMap, permutation: [usize; 4], source: Arc<ElementSpaces>, target: Arc<ElementSpaces>) -> Self {
        Self {
            map,
            permutation,
            source,
            target,
            pullbacks: Mutex::new(HashMap::new()),
            pushforwards: Mutex::new(HashMap::new()),
        }
    }

    pub fn map(&self) -> &AffineMap {
        &self.map
    }

    /// Spaces on `K_hat`.
    pub fn source(&self) -> &Arc<ElementSpaces> {
        &self.source
    }

    /// Spaces on `K`.
    pub fn target(&self) -> &Arc<ElementSpaces> {
        &self.target
    }

    /// The face of `K_hat` that `T` maps onto face `face` of `K`.
    pub fn source_face(&self, face: usize) -> usize {
        self.permutation.iter().position(|&p| p == face).expect("valid permutation")
    }

    /// `dim x dim` matrix of the pullback in the two Nédélec bases.
    pub fn pullback_matrix(&self, p: usize) -> Result<Arc<DMatrix<f64>>> {
        if let Some(m) = self.pullbacks.lock().expect("lock").get(&p) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(map_nedelec(&self.target, &self.source, &self.map, p)?);
        self.pullbacks.lock().expect("lock").insert(p, Arc::clone(&m));
        Ok(m)
    }

    /// Matrix of the inverse map `v = J^{-T} (v_hat o T^{-1})`.
    pub fn pushforward_matrix(&self, p: usize) -> Result<Arc<DMatrix<f64>>> {
        if let Some(m) = self.pushforwards.lock().expect("lock").get(&p) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(map_nedelec(&self.source, &self.target, &self.map.inverse(), p)?);
        self.pushforwards.lock().expect("lock").insert(p, Arc::clone(&m));
        Ok(m)
    }
}

/// Coefficients on `to` of `J^T (v o T)` for every basis field `v` on
/// `from`, where `T : to -> from`.
fn map_nedelec(from: &ElementSpaces, to: &ElementSpaces, t: &AffineMap, p: usize) -> Result<DMatrix<f64>> {
    let tag = SpaceTag::Nedelec(p);
    let to_basis = to.basis(tag)?;
    let from_basis = from.basis(tag)?;
    let pts = PointSet::volume_rule(to.tetrahedron(), rule_degree(p))?;
    let mapped: Vec<Point> = pts.x.iter().map(|x| t.apply(x)).collect();
    let values = from_basis.samples(&PointSet::volume_points(from.tetrahedron(), &mapped), Quantity::Value);
    let pulled = apply_transpose(&t.jacobian, &values);
    Ok(to_basis.project(&pts, &pulled))
}

/// Applies `J^T` to every 3-row block of `values`.
fn apply_transpose(jacobian: &Matrix3<f64>, values: &DMatrix<f64>) -> DMatrix<f64> {
    let jt = jacobian.transpose();
    let mut out = values.clone();
    for q in 0..values.nrows() / 3 {
        for j in 0..values.ncols() {
            let v = jt * Point::new(values[(3 * q, j)], values[(3 * q + 1, j)], values[(3 * q + 2, j)]);
            for c in 0..3 {
                out[(3 * q + c, j)] = v[c];
            }
        }
    }
    out
}

fn check_field(field: &FieldCoefficients, from: &Arc<ElementSpaces>) -> Result<usize> {
    let tag = field.basis().tag();
    let SpaceTag::Nedelec(p) = tag else {
        return Err(Error::InvalidParameter(format!("Piola map acts on Nédélec fields, got {tag}")));
    };
    let expected = from.basis(tag)?;
    if !Arc::ptr_eq(field.basis(), &expected) {
        return Err(Error::InvalidParameter("field does not live on the context's element".into()));
    }
    Ok(p)
}

/// `v_hat = J^T (v o T)` on `K_hat` for `v` in `N_p(K)`.
pub fn covariant_pullback(v: &FieldCoefficients, ctx: &PiolaContext) -> Result<FieldCoefficients> {
    let p = check_field(v, &ctx.target)?;
    let m = ctx.pullback_matrix(p)?;
    FieldCoefficients::new(ctx.source.basis(SpaceTag::Nedelec(p))?, &*m * v.coefficients())
}

/// Inverse of [`covariant_pullback`].
pub fn covariant_pushforward(v_hat: &FieldCoefficients, ctx: &PiolaContext) -> Result<FieldCoefficients> {
    let p = check_field(v_hat, &ctx.source)?;
    let m = ctx.pushforward_matrix(p)?;
    FieldCoefficients::new(ctx.target.basis(SpaceTag::Nedelec(p))?, &*m * v_hat.coefficients())
}

/// Tangential trace on face `face_hat` of `K_hat` of `J^T (w o T)`, for the
/// tangential field `w` on the image face, in the face-trace basis of
/// `K_hat`. `coeffs` are `w`'s coefficients on `K`.
pub fn pull_back_trace(ctx: &PiolaContext, p: usize, face: usize, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
    let face_hat = ctx.source_face(face);
    let src = ctx.source.basis(SpaceTag::FaceTrace { degree: p, face: face_hat })?;
    let tgt = ctx.target.basis(SpaceTag::FaceTrace { degree: p, face })?;
    let pts = PointSet::face_rule(ctx.source.tetrahedron(), face_hat, rule_degree(p))?;
    let mapped: Vec<Point> = pts.x.iter().map(|x| ctx.map.apply(x)).collect();
    let w = tgt.samples(&PointSet::face_points(ctx.target.tetrahedron(), face, &mapped), Quantity::Value) * coeffs;
    let mut pulled = apply_transpose(&ctx.map.jacobian, &DMatrix::from_column_slice(w.len(), 1, w.as_slice()));
    let n = ctx.source.tetrahedron().face(face_hat).normal;
    for q in 0..pts.len() {
        let v = Point::new(pulled[3 * q], pulled[3 * q + 1], pulled[3 * q + 2]);
        let t = v - n * v.dot(&n);
        for c in 0..3 {
            pulled[3 * q + c] = t[c];
        }
    }
    Ok(src.project(&pts, &pulled).column(0).into_owned())
}

/// Largest violation of each property over the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PiolaReport {
    pub degree: usize,
    pub trials: usize,
    /// Number of trials where exactly one side was curl free.
    pub curl_free_mismatches: usize,
    /// `rank(curl_hat P) - rank(curl)` in absolute value.
    pub curl_rank_difference: usize,
    /// Relative excess over the two-sided L² bound (zero when it holds).
    pub stability_violation: f64,
    /// Smallest and largest observed `|det J|^{1/2} |v_hat| / |v|`.
    pub stability_range: (f64, f64),
    /// Lower and upper constants of the bound.
    pub stability_bounds: (f64, f64),
    /// Largest relative difference between the two trace routes.
    pub trace_violation: f64,
}

/// Default slack of the property checks.
pub const PIOLA_SLACK: f64 = 1e-9;

/// Randomized checks of the covariant Piola map on `N_p(K)`:
///
/// (a) `curl v = 0` iff `curl v_hat = 0` (trials alternate between
///     gradients and generic fields), and the mapped curl image has the
///     same rank;
/// (b) `(rho_K / h_Khat) |v| <= |det J|^{1/2} |v_hat| <= (h_K / rho_Khat) |v|`;
/// (c) the trace of the pullback equals the pullback of the trace on every
///     face.
pub fn check_piola_properties(p: usize, ctx: &PiolaContext, trials: usize, seed: u64) -> Result<PiolaReport> {
    let report = measure_piola_properties(p, ctx, trials, seed)?;
    let fail = |check: &str, trial: usize, violation: f64| {
        Err(Error::PropertyViolation {
            check: format!("piola {check} (p = {p})"),
            trial,
            violation,
        })
    };
    if report.curl_free_mismatches > 0 {
        return fail("curl-free equivalence", 0, report.curl_free_mismatches as f64);
    }
    if report.curl_rank_difference > 0 {
        return fail("curl rank", 0, report.curl_rank_difference as f64);
    }
    if report.stability_violation > PIOLA_SLACK {
        return fail("L2 stability", 0, report.stability_violation);
    }
    if report.trace_violation > PIOLA_SLACK {
        return fail("trace commutation", 0, report.trace_violation);
    }
    Ok(report)
}

/// As [`check_piola_properties`] but returns the measured violations
/// without judging them.
pub fn measure_piola_properties(p: usize, ctx: &PiolaContext, trials: usize, seed: u64) -> Result<PiolaReport> {
    let k = ctx.target.tetrahedron();
    let k_hat = ctx.source.tetrahedron();
    let nb = ctx.target.basis(SpaceTag::Nedelec(p))?;
    let pull = ctx.pullback_matrix(p)?;
    let curl = ctx.target.operator(OperatorKey::Curl(p))?;
    let curl_hat = ctx.source.operator(OperatorKey::Curl(p))?;
    let grad = ctx.target.operator(OperatorKey::Gradient(p))?;

    let rank = svd_rank(&curl.matrix, 1e-10);
    let rank_hat = svd_rank(&(&curl_hat.matrix * &*pull), 1e-10);

    let lower = k.insphere_diameter() / k_hat.diameter();
    let upper = k.diameter() / k_hat.insphere_diameter();
    let sqrt_det = ctx.map.det.abs().sqrt();
    let mut report = PiolaReport {
        degree: p,
        trials,
        curl_free_mismatches: 0,
        curl_rank_difference: rank.abs_diff(rank_hat),
        stability_violation: 0.0,
        stability_range: (f64::INFINITY, 0.0),
        stability_bounds: (lower, upper),
        trace_violation: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let v = if trial % 2 == 0 {
            let q = DVector::from_fn(grad.matrix.ncols(), |_, _| StandardNormal.sample(&mut rng));
            grad.apply(&q)
        } else {
            DVector::from_fn(nb.dim(), |_, _| StandardNormal.sample(&mut rng))
        };
        let v_hat = &*pull * &v;

        // (a) thresholds relative to the field size over the element size
        let free = curl.apply(&v).norm() <= PIOLA_SLACK * v.norm() / k.diameter();
        let free_hat = curl_hat.apply(&v_hat).norm() <= PIOLA_SLACK * v_hat.norm() / k_hat.diameter();
        if free != free_hat {
            report.curl_free_mismatches += 1;
        }

        // (b)
        let ratio = sqrt_det * v_hat.norm() / v.norm();
        report.stability_range.0 = report.stability_range.0.min(ratio);
        report.stability_range.1 = report.stability_range.1.max(ratio);
        let excess = ((lower - ratio) / lower).max((ratio - upper) / upper).max(0.0);
        report.stability_violation = report.stability_violation.max(excess);

        // (c)
        for face in 0..4 {
            let face_hat = ctx.source_face(face);
            let direct = ctx
                .source
                .operator(OperatorKey::TangentialTrace { degree: p, face: face_hat })?
                .apply(&v_hat);
            let trace = ctx.target.operator(OperatorKey::TangentialTrace { degree: p, face })?.apply(&v);
            let via_trace = pull_back_trace(ctx, p, face, &trace)?;
            let diff = (&direct - via_trace).norm() / (1.0 + direct.norm());
            report.trace_violation = report.trace_violation.max(diff);
        }
    }
    Ok(report)
}

/// Random affine map with condition number at most [`MAX_MAP_CONDITION`]
/// and determinant of the requested sign.
pub fn random_affine_map(rng: &mut impl Rng, orientation_reversing: bool) -> AffineMap {
    let orthogonal = |rng: &mut dyn rand::RngCore| {
        let g = Matrix3::<f64>::from_fn(|_, _| StandardNormal.sample(rng));
        let q = g.qr().q();
        if q.determinant() < 0.0 {
            -q
        } else {
            q
        }
    };
    let u = orthogonal(rng);
    let v = orthogonal(rng);
    // singular values in [0.2, 5] keep the condition number at most 25
    let mut s = Matrix3::from_diagonal(&nalgebra::Vector3::<f64>::from_fn(|_, _| {
        (rng.random_range(-1.0..1.0) * 5f64.ln()).exp()
    }));
    if orientation_reversing {
        s[(2, 2)] = -s[(2, 2)];
    }
    let jacobian = u * s * v.transpose();
    let offset = Point::from_fn(|_, _| rng.random_range(-1.0..1.0));
    AffineMap {
        jacobian,
        offset,
        det: jacobian.determinant(),
        inverse_jacobian: jacobian.try_inverse().expect("well-conditioned by construction"),
    }
}

/// Five maps from `seed`: four orientation preserving, the last one
/// orientation reversing.
pub fn standard_maps(seed: u64) -> Vec<AffineMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5).map(|i| random_affine_map(&mut rng, i == 4)).collect()
}
