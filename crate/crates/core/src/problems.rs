//! The element-level minimization problems: minimal L² norm fields with
//! prescribed curl (or divergence) and prescribed tangential (or normal)
//! traces on a subset of faces.
//!
//! Data are generated from a random discrete field, which makes every
//! compatibility condition hold exactly and supplies a feasible point.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::{edge_compat_check, CompatReport, TraceData};
use crate::element::{ElementSpaces, FaceSet, OperatorKey, SystemFamily, SystemKey};
use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::minsolve::{ConstraintSystem, LeastNormFactor, MinResult, RowLabel, DEFAULT_TOLERANCE};
use crate::polyspace::{rule_degree, SpaceTag};

/// Relative tolerance of the data validators.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Hcurl,
    Hdiv,
    CurlOnly,
    TraceOnly,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [ProblemKind::Hcurl, ProblemKind::Hdiv, ProblemKind::CurlOnly, ProblemKind::TraceOnly];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemKind::Hcurl => "hcurl",
            ProblemKind::Hdiv => "hdiv",
            ProblemKind::CurlOnly => "curl_only",
            ProblemKind::TraceOnly => "trace_only",
        }
    }

    /// Whether the kind is defined for a face subset: curl-only problems
    /// have no faces, trace-only problems need at least one.
    pub fn admits(&self, faces: FaceSet) -> bool {
        match self {
            ProblemKind::CurlOnly => faces.is_empty(),
            ProblemKind::TraceOnly => !faces.is_empty(),
            _ => true,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem kind '{s}'")))
    }
}

/// Outcome of the data validators.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// `|div r_K|` (H(curl) data) or the mean-value mismatch (H(div) data).
    pub volume_residual: f64,
    /// Per face: `|r_K . n_F - scurl_F r_F|_{0,F}` (zero for H(div) data).
    pub face_residuals: Vec<(usize, f64)>,
    pub edge: Option<CompatReport>,
    pub pass: bool,
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn transfer(spaces: &ElementSpaces, from: SpaceTag, to_degree: usize, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
    if from.degree() == to_degree {
        return Ok(coeffs.clone());
    }
    let to = from.with_degree(to_degree);
    Ok(spaces.operator(OperatorKey::Transfer { from, to })?.apply(coeffs))
}

/// Data of the H(curl) problem: `curl v = r_K` and `pi_F v = r_F` for
/// `F` in `faces`.
#[derive(Debug, Clone)]
pub struct HcurlProblem {
    pub spaces: Arc<ElementSpaces>,
    pub degree: usize,
    pub faces: FaceSet,
    /// Coefficients in `RaviartThomas(degree)`.
    pub r_k: DVector<f64>,
    pub r_f: TraceData,
    /// The field the data were generated from, when known.
    pub generator: Option<DVector<f64>>,
    pub validation: Validation,
}

impl HcurlProblem {
    pub fn new(
        spaces: Arc<ElementSpaces>,
        degree: usize,
        faces: FaceSet,
        r_k: DVector<f64>,
        r_f: TraceData,
    ) -> Result<Self> {
        let rt = spaces.basis(SpaceTag::RaviartThomas(degree))?;
        if r_k.len() != rt.dim() {
            return Err(Error::LengthMismatch {
                expected: rt.dim(),
                actual: r_k.len(),
            });
        }
        if r_f.degree != degree || r_f.face_set() != faces || r_f.faces.len() != faces.len() {
            return Err(Error::IncompatibleData(format!(
                "trace data cover {} at degree {}, expected {faces} at degree {degree}",
                r_f.face_set(),
                r_f.degree
            )));
        }
        for (face, c) in &r_f.faces {
            let dim = spaces.basis(SpaceTag::FaceTrace { degree, face: *face })?.dim();
            if c.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
        }
        let validation = validate_hcurl(&spaces, degree, &r_k, &r_f)?;
        Ok(Self {
            spaces,
            degree,
            faces,
            r_k,
            r_f,
            generator: None,
            validation,
        })
    }

    pub fn tetrahedron(&self) -> &Arc<Tetrahedron> {
        self.spaces.tetrahedron()
    }

    /// `1 + |data coefficients|`.
    pub fn scale(&self) -> f64 {
        1.0 + (self.r_k.norm_squared() + self.r_f.norm().powi(2)).sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.validation.pass
    }

    /// The stacked constraint system of the degree-`degree` problem.
    pub fn constraint_system(&self) -> Result<ConstraintSystem> {
        let p = self.degree;
        let n = self.spaces.basis(SpaceTag::Nedelec(p))?.dim();
        let mut sys = ConstraintSystem::empty(n);
        sys.push(RowLabel::Curl, &self.spaces.operator(OperatorKey::Curl(p))?.matrix, &self.r_k)?;
        for (face, c) in &self.r_f.faces {
            let op = self.spaces.operator(OperatorKey::TangentialTrace { degree: p, face: *face })?;
            sys.push(RowLabel::TangentialTrace(*face), &op.matrix, c)?;
        }
        Ok(sys)
    }

    /// The same data posed in the degree-`q` spaces (`q >= degree`).
    pub fn lifted(&self, q: usize) -> Result<Self> {
        let p = self.degree;
        let r_k = transfer(&self.spaces, SpaceTag::RaviartThomas(p), q, &self.r_k)?;
        let mut r_f = TraceData::empty(q);
        for (face, c) in &self.r_f.faces {
            let tag = SpaceTag::FaceTrace { degree: p, face: *face };
            r_f.faces.push((*face, transfer(&self.spaces, tag, q, c)?));
        }
        let generator = match &self.generator {
            Some(w) => Some(transfer(&self.spaces, SpaceTag::Nedelec(p), q, w)?),
            None => None,
        };
        let mut lifted = Self::new(Arc::clone(&self.spaces), q, self.faces, r_k, r_f)?;
        lifted.generator = generator;
        Ok(lifted)
    }
}

fn validate_hcurl(spaces: &ElementSpaces, p: usize, r_k: &DVector<f64>, r_f: &TraceData) -> Result<Validation> {
    let div = spaces.operator(OperatorKey::Divergence(p))?.apply(r_k);
    let volume_residual = div.norm();
    let mut pass = volume_residual <= VALIDATION_TOLERANCE * r_k.norm();
    let mut face_residuals = Vec::new();
    for (face, c) in &r_f.faces {
        let normal = spaces.operator(OperatorKey::NormalTrace { degree: p, face: *face })?.apply(r_k);
        let scurl = spaces.operator(OperatorKey::SurfaceCurl { degree: p, face: *face })?.apply(c);
        let res = (normal - scurl).norm();
        pass &= res <= VALIDATION_TOLERANCE * (r_k.norm() + c.norm());
        face_residuals.push((*face, res));
    }
    let edge = if r_f.faces.len() >= 2 {
        let report = edge_compat_check(spaces, r_f)?;
        pass &= report.pass;
        Some(report)
    } else {
        None
    };
    Ok(Validation {
        volume_residual,
        face_residuals,
        edge,
        pass,
    })
}

/// Data of the H(div) problem: `div v = r_K` and `v . n_F = r_F` for `F` in
/// `faces`.
#[derive(Debug, Clone)]
pub struct HdivProblem {
    pub spaces: Arc<ElementSpaces>,
    pub degree: usize,
    pub faces: FaceSet,
    /// Coefficients in `ScalarP(degree)`.
    pub r_k: DVector<f64>,
    /// Per face, coefficients in `FaceScalarP(degree, face)`.
    pub r_f: Vec<(usize, DVector<f64>)>,
    pub generator: Option<DVector<f64>>,
    pub validation: Validation,
}

/// `(f, 1)` for every member of the basis of `tag`.
fn mean_functional(spaces: &ElementSpaces, tag: SpaceTag) -> Result<DVector<f64>> {
    let basis = spaces.basis(tag)?;
    let pts = basis.rule(rule_degree(tag.degree()))?;
    let ones = DMatrix::from_element(pts.len(), 1, 1.0);
    Ok(basis.project(&pts, &ones).column(0).into_owned())
}

impl HdivProblem {
    pub fn new(
        spaces: Arc<ElementSpaces>,
        degree: usize,
        faces: FaceSet,
        r_k: DVector<f64>,
        mut r_f: Vec<(usize, DVector<f64>)>,
    ) -> Result<Self> {
        r_f.sort_by_key(|(f, _)| *f);
        let given = FaceSet::from_faces(&r_f.iter().map(|(f, _)| *f).collect::<Vec<_>>());
        if given != faces || r_f.len() != faces.len() {
            return Err(Error::IncompatibleData(format!("face data cover {given}, expected {faces}")));
        }
        let dim = spaces.basis(SpaceTag::ScalarP(degree))?.dim();
        if r_k.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: r_k.len(),
            });
        }
        for (face, c) in &r_f {
            let dim = spaces.basis(SpaceTag::FaceScalarP { degree, face: *face })?.dim();
            if c.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
        }
        let mut problem = Self {
            spaces,
            degree,
            faces,
            r_k,
            r_f,
            generator: None,
            validation: Validation {
                volume_residual: 0.0,
                face_residuals: Vec::new(),
                edge: None,
                pass: true,
            },
        };
        problem.validation = problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<Validation> {
        let mut volume_residual = 0.0;
        let mut pass = true;
        if self.faces == FaceSet::ALL {
            let p = self.degree;
            let mut mismatch = mean_functional(&self.spaces, SpaceTag::ScalarP(p))?.dot(&self.r_k);
            for (face, c) in &self.r_f {
                mismatch -= mean_functional(&self.spaces, SpaceTag::FaceScalarP { degree: p, face: *face })?.dot(c);
            }
            volume_residual = mismatch.abs();
            pass = volume_residual <= VALIDATION_TOLERANCE * self.scale();
        }
        Ok(Validation {
            volume_residual,
            face_residuals: Vec::new(),
            edge: None,
            pass,
        })
    }

    pub fn scale(&self) -> f64 {
        let faces: f64 = self.r_f.iter().map(|(_, c)| c.norm_squared()).sum();
        1.0 + (self.r_k.norm_squared() + faces).sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.validation.pass
    }

    pub fn constraint_system(&self) -> Result<ConstraintSystem> {
        let p = self.degree;
        let n = self.spaces.basis(SpaceTag::RaviartThomas(p))?.dim();
        let mut sys = ConstraintSystem::empty(n);
        sys.push(RowLabel::Divergence, &self.spaces.operator(OperatorKey::Divergence(p))?.matrix, &self.r_k)?;
        for (face, c) in &self.r_f {
            let op = self.spaces.operator(OperatorKey::NormalTrace { degree: p, face: *face })?;
            sys.push(RowLabel::NormalTrace(*face), &op.matrix, c)?;
        }
        Ok(sys)
    }

    pub fn lifted(&self, q: usize) -> Result<Self> {
        let p = self.degree;
        let r_k = transfer(&self.spaces, SpaceTag::ScalarP(p), q, &self.r_k)?;
        let r_f = self
            .r_f
            .iter()
            .map(|(face, c)| Ok((*face, transfer(&self.spaces, SpaceTag::FaceScalarP { degree: p, face: *face }, q, c)?)))
            .collect::<Result<Vec<_>>>()?;
        let generator = match &self.generator {
            Some(w) => Some(transfer(&self.spaces, SpaceTag::RaviartThomas(p), q, w)?),
            None => None,
        };
        let mut lifted = Self::new(Arc::clone(&self.spaces), q, self.faces, r_k, r_f)?;
        lifted.generator = generator;
        Ok(lifted)
    }
}

/// Draws `w` in `N_p` with standard normal coefficients and sets
/// `r_K = curl w`, `r_F = pi_F w`.
pub fn generate_compatible_hcurl_data(
    spaces: &Arc<ElementSpaces>,
    p: usize,
    faces: FaceSet,
    seed: u64,
) -> Result<HcurlProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spaces.basis(SpaceTag::Nedelec(p))?.dim();
    hcurl_from_field(spaces, p, faces, random_vector(&mut rng, n))
}

/// Curl-free data: `w = grad q` with `q` in `P_{p+1}` random.
pub fn generate_curl_free_data(spaces: &Arc<ElementSpaces>, p: usize, faces: FaceSet, seed: u64) -> Result<HcurlProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spaces.basis(SpaceTag::ScalarP(p + 1))?.dim();
    let q = random_vector(&mut rng, n);
    let w = spaces.operator(OperatorKey::Gradient(p))?.apply(&q);
    let mut problem = hcurl_from_field(spaces, p, faces, w)?;
    // curl grad vanishes up to rounding; make it exact
    problem.r_k.fill(0.0);
    problem.validation = validate_hcurl(spaces, p, &problem.r_k, &problem.r_f)?;
    Ok(problem)
}

/// Data of the H(curl) problem generated by a given Nédélec field.
pub fn hcurl_from_field(spaces: &Arc<ElementSpaces>, p: usize, faces: FaceSet, w: DVector<f64>) -> Result<HcurlProblem> {
    let r_k = spaces.operator(OperatorKey::Curl(p))?.apply(&w);
    let r_f = TraceData::from_field(spaces, p, faces, &w)?;
    let mut problem = HcurlProblem::new(Arc::clone(spaces), p, faces, r_k, r_f)?;
    problem.generator = Some(w);
    Ok(problem)
}

/// Draws `w` in `RT_p` and sets `r_K = div w`, `r_F = w . n_F`.
pub fn generate_compatible_hdiv_data(spaces: &Arc<ElementSpaces>, p: usize, faces: FaceSet, seed: u64) -> Result<HdivProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spaces.basis(SpaceTag::RaviartThomas(p))?.dim();
    hdiv_from_field(spaces, p, faces, random_vector(&mut rng, n))
}

pub fn hdiv_from_field(spaces: &Arc<ElementSpaces>, p: usize, faces: FaceSet, w: DVector<f64>) -> Result<HdivProblem> {
    let r_k = spaces.operator(OperatorKey::Divergence(p))?.apply(&w);
    let r_f = faces
        .iter()
        .map(|face| Ok((face, spaces.operator(OperatorKey::NormalTrace { degree: p, face })?.apply(&w))))
        .collect::<Result<Vec<_>>>()?;
    let mut problem = HdivProblem::new(Arc::clone(spaces), p, faces, r_k, r_f)?;
    problem.generator = Some(w);
    Ok(problem)
}

/// Stacked constraint matrix for a system key, built from cached operators.
fn system_matrix(spaces: &ElementSpaces, key: SystemKey) -> Result<DMatrix<f64>> {
    let p = key.degree;
    let (volume, face_op): (OperatorKey, fn(usize, usize) -> OperatorKey) = match key.family {
        SystemFamily::Curl => (OperatorKey::Curl(p), |degree, face| OperatorKey::TangentialTrace { degree, face }),
        SystemFamily::Divergence => (OperatorKey::Divergence(p), |degree, face| OperatorKey::NormalTrace { degree, face }),
    };
    let mut blocks = vec![spaces.operator(volume)?];
    for face in key.faces.iter() {
        blocks.push(spaces.operator(face_op(p, face))?);
    }
    let rows: usize = blocks.iter().map(|b| b.matrix.nrows()).sum();
    let cols = blocks[0].matrix.ncols();
    let mut m = DMatrix::zeros(rows, cols);
    let mut start = 0;
    for b in &blocks {
        m.rows_mut(start, b.matrix.nrows()).copy_from(&b.matrix);
        start += b.matrix.nrows();
    }
    Ok(m)
}

/// Cached factorization of the stacked constraint matrix.
pub fn system_factor(spaces: &ElementSpaces, key: SystemKey) -> Result<Arc<LeastNormFactor>> {
    spaces.factor(key, || LeastNormFactor::new(&system_matrix(spaces, key)?, DEFAULT_TOLERANCE))
}

fn solve_stacked(
    spaces: &ElementSpaces,
    key: SystemKey,
    volume_rhs: &DVector<f64>,
    face_rhs: &[(usize, &DVector<f64>)],
) -> Result<MinResult> {
    let factor = system_factor(spaces, key)?;
    let mut rhs: Vec<f64> = volume_rhs.iter().copied().collect();
    for (_, c) in face_rhs {
        rhs.extend(c.iter());
    }
    let rhs = DVector::from_vec(rhs);
    let mut result = factor.solve(&rhs).map_err(|e| match e {
        Error::Infeasible { gap, tolerance } => Error::IncompatibleData(format!(
            "data are not in the range of the constraints (gap {gap:.3e} > {tolerance:.3e})"
        )),
        other => other,
    })?;
    // residual from the individual operators, independent of the factor
    let p = key.degree;
    let x = &result.x_star;
    let (volume, face_key): (OperatorKey, fn(usize, usize) -> OperatorKey) = match key.family {
        SystemFamily::Curl => (OperatorKey::Curl(p), |degree, face| OperatorKey::TangentialTrace { degree, face }),
        SystemFamily::Divergence => (OperatorKey::Divergence(p), |degree, face| OperatorKey::NormalTrace { degree, face }),
    };
    let mut res2 = (spaces.operator(volume)?.apply(x) - volume_rhs).norm_squared();
    for (face, c) in face_rhs {
        res2 += (spaces.operator(face_key(p, *face))?.apply(x) - *c).norm_squared();
    }
    result.residual = res2.sqrt();
    Ok(result)
}

/// Minimal norm `v` in `N_p` with `curl v = r_K` and the prescribed
/// tangential traces.
pub fn solve_min_hcurl(problem: &HcurlProblem) -> Result<MinResult> {
    let key = SystemKey {
        family: SystemFamily::Curl,
        degree: problem.degree,
        faces: problem.faces,
    };
    let faces: Vec<(usize, &DVector<f64>)> = problem.r_f.faces.iter().map(|(f, c)| (*f, c)).collect();
    solve_stacked(&problem.spaces, key, &problem.r_k, &faces)
}

/// Minimal norm `v` in `N_p` with `curl v = r_K` and no trace constraint.
pub fn solve_min_curl_only(spaces: &ElementSpaces, p: usize, r_k: &DVector<f64>) -> Result<MinResult> {
    let key = SystemKey {
        family: SystemFamily::Curl,
        degree: p,
        faces: FaceSet::EMPTY,
    };
    solve_stacked(spaces, key, r_k, &[])
}

/// Minimal norm curl-free `v` in `N_p` with prescribed tangential traces.
pub fn solve_min_trace_only(spaces: &ElementSpaces, r_f: &TraceData) -> Result<MinResult> {
    let faces = r_f.face_set();
    if faces.is_empty() {
        return Err(Error::InvalidParameter("trace-only problem needs at least one face".into()));
    }
    let p = r_f.degree;
    let key = SystemKey {
        family: SystemFamily::Curl,
        degree: p,
        faces,
    };
    let zero = DVector::zeros(spaces.basis(SpaceTag::RaviartThomas(p))?.dim());
    let data: Vec<(usize, &DVector<f64>)> = r_f.faces.iter().map(|(f, c)| (*f, c)).collect();
    solve_stacked(spaces, key, &zero, &data)
}

/// Minimal norm `v` in `RT_p` with `div v = r_K` and prescribed normal
/// traces.
pub fn solve_min_hdiv(problem: &HdivProblem) -> Result<MinResult> {
    let key = SystemKey {
        family: SystemFamily::Divergence,
        degree: problem.degree,
        faces: problem.faces,
    };
    let faces: Vec<(usize, &DVector<f64>)> = problem.r_f.iter().map(|(f, c)| (*f, c)).collect();
    solve_stacked(&problem.spaces, key, &problem.r_k, &faces)
}

/// Either kind of problem, for code that treats them uniformly.
#[derive(Debug, Clone)]
pub enum Problem {
    Hcurl(HcurlProblem),
    Hdiv(HdivProblem),
}

impl Problem {
    pub fn degree(&self) -> usize {
        match self {
            Problem::Hcurl(p) => p.degree,
            Problem::Hdiv(p) => p.degree,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Problem::Hcurl(p) => p.scale(),
            Problem::Hdiv(p) => p.scale(),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Problem::Hcurl(p) => p.is_valid(),
            Problem::Hdiv(p) => p.is_valid(),
        }
    }

    pub fn generator(&self) -> Option<&DVector<f64>> {
        match self {
            Problem::Hcurl(p) => p.generator.as_ref(),
            Problem::Hdiv(p) => p.generator.as_ref(),
        }
    }

    pub fn solve(&self) -> Result<MinResult> {
        match self {
            Problem::Hcurl(p) => solve_min_hcurl(p),
            Problem::Hdiv(p) => solve_min_hdiv(p),
        }
    }

    pub fn lifted(&self, q: usize) -> Result<Problem> {
        Ok(match self {
            Problem::Hcurl(p) => Problem::Hcurl(p.lifted(q)?),
            Problem::Hdiv(p) => Problem::Hdiv(p.lifted(q)?),
        })
    }

    pub fn constraint_system(&self) -> Result<ConstraintSystem> {
        match self {
            Problem::Hcurl(p) => p.constraint_system(),
            Problem::Hdiv(p) => p.constraint_system(),
        }
    }
}

/// Enriched-degree reference norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceReport {
    /// Minimal norms at degrees `p, p+1, ..., p+delta`.
    pub values: Vec<f64>,
    /// The degree-`p+delta` value.
    pub value: f64,
    /// `(value(delta-1) - value(delta)) / value(delta-1)`, zero when
    /// `delta = 0` or the values vanish.
    pub relative_gap: f64,
    /// Largest increase along the chain (should be at most rounding).
    pub max_increase: f64,
}

/// Solves the same data in the spaces of degree `p + d`, `d = 0..=delta`.
/// Feasible sets are nested, so the values do not increase.
pub fn reference_min_norm(problem: &Problem, delta: usize) -> Result<ReferenceReport> {
    let p = problem.degree();
    let mut values = Vec::with_capacity(delta + 1);
    for d in 0..=delta {
        let lifted = if d == 0 { problem.clone() } else { problem.lifted(p + d)? };
        values.push(lifted.solve()?.norm);
    }
    let value = *values.last().expect("delta + 1 values");
    let relative_gap = if delta > 0 && values[delta - 1] > 0.0 {
        (values[delta - 1] - value) / values[delta - 1]
    } else {
        0.0
    };
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(ReferenceReport {
        values,
        value,
        relative_gap,
        max_increase,
    })
}

/// The two-stage construction of a feasible field: a curl-only minimizer
/// followed by a curl-free correction matching the remaining traces.
#[derive(Debug, Clone)]
pub struct Step3Report {
    pub xi: DVector<f64>,
    pub xi_tilde: DVector<f64>,
    pub w: DVector<f64>,
    /// Largest `|scurl_F (r_F - pi_F xi)|_{0,F}` over the faces.
    pub surface_curl_residual: f64,
    /// Constraint residual of `w` for the original problem.
    pub feasibility_residual: f64,
    pub w_norm: f64,
    pub min_norm: f64,
    pub scale: f64,
    pub pass: bool,
}

pub fn step3_decomposition(problem: &HcurlProblem) -> Result<Step3Report> {
    if problem.faces.is_empty() {
        return Err(Error::InvalidParameter("the decomposition needs at least one face".into()));
    }
    let spaces = &problem.spaces;
    let p = problem.degree;
    let scale = problem.scale();
    let xi = solve_min_curl_only(spaces, p, &problem.r_k)?.x_star;
    let mut corrected = TraceData::empty(p);
    let mut surface_curl_residual = 0.0f64;
    for (face, c) in &problem.r_f.faces {
        let tr = spaces.operator(OperatorKey::TangentialTrace { degree: p, face: *face })?.apply(&xi);
        let r = c - tr;
        let scurl = spaces.operator(OperatorKey::SurfaceCurl { degree: p, face: *face })?.apply(&r);
        surface_curl_residual = surface_curl_residual.max(scurl.norm());
        corrected.faces.push((*face, r));
    }
    let xi_tilde = solve_min_trace_only(spaces, &corrected)?.x_star;
    let w = &xi + &xi_tilde;
    let sys = problem.constraint_system()?;
    let feasibility_residual = (&sys.matrix * &w - &sys.rhs).norm();
    let min_norm = solve_min_hcurl(problem)?.norm;
    let w_norm = w.norm();
    let pass = surface_curl_residual <= VALIDATION_TOLERANCE * scale
        && feasibility_residual <= VALIDATION_TOLERANCE * scale
        && w_norm >= min_norm - 1e-10 * scale;
    Ok(Step3Report {
        xi,
        xi_tilde,
        w,
        surface_curl_residual,
        feasibility_residual,
        w_norm,
        min_norm,
        scale,
        pass,
    })
}

fn write_vector(out: &mut String, label: &str, v: &DVector<f64>) {
    write!(out, "{label} {}", v.len()).unwrap();
    for x in v.iter() {
        write!(out, " {x:.16e}").unwrap();
    }
    out.push('\n');
}

impl Problem {
    /// Plain-text record: vertices, kind, degree, face mask and coefficient
    /// vectors, one item per line. Coefficients refer to the orthonormal
    /// bases, which are a deterministic function of the vertices.
    pub fn to_text(&self) -> String {
        let (spaces, kind, degree, faces) = match self {
            Problem::Hcurl(p) => (&p.spaces, "hcurl", p.degree, p.faces),
            Problem::Hdiv(p) => (&p.spaces, "hdiv", p.degree, p.faces),
        };
        let mut out = String::new();
        writeln!(out, "kind {kind}").unwrap();
        for v in spaces.tetrahedron().vertices() {
            writeln!(out, "vertex {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z).unwrap();
        }
        writeln!(out, "degree {degree}").unwrap();
        writeln!(out, "faces {}", faces.mask()).unwrap();
        match self {
            Problem::Hcurl(p) => {
                write_vector(&mut out, "r_K", &p.r_k);
                for (face, c) in &p.r_f.faces {
                    write_vector(&mut out, &format!("r_F {face}"), c);
                }
                if let Some(w) = &p.generator {
                    write_vector(&mut out, "generator", w);
                }
            }
            Problem::Hdiv(p) => {
                write_vector(&mut out, "r_K", &p.r_k);
                for (face, c) in &p.r_f {
                    write_vector(&mut out, &format!("r_F {face}"), c);
                }
                if let Some(w) = &p.generator {
                    write_vector(&mut out, "generator", w);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Problem> {
        let bad = |msg: &str| Error::InvalidParameter(format!("problem record: {msg}"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
        let mut kind = None;
        let mut vertices = Vec::new();
        let mut degree = None;
        let mut faces = None;
        let mut r_k = None;
        let mut r_f = Vec::new();
        let mut generator = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let vector = |items: &[&str]| -> Result<DVector<f64>> {
                let (len, vals) = items.split_first().ok_or_else(|| bad("empty vector"))?;
                let len: usize = len.parse().map_err(|_| bad("bad vector length"))?;
                if vals.len() != len {
                    return Err(bad("vector length mismatch"));
                }
                Ok(DVector::from_vec(vals.iter().map(|s| num(s)).collect::<Result<_>>()?))
            };
            match key {
                "kind" => kind = rest.first().map(|s| s.to_string()),
                "vertex" => {
                    if rest.len() != 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    vertices.push([num(rest[0])?, num(rest[1])?, num(rest[2])?]);
                }
                "degree" => degree = Some(rest.first().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad("degree"))?),
                "faces" => faces = Some(rest.first().and_then(|s| s.parse::<u8>().ok()).ok_or_else(|| bad("faces"))?),
                "r_K" => r_k = Some(vector(&rest)?),
                "r_F" => {
                    let face: usize = rest.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad("face index"))?;
                    r_f.push((face, vector(&rest[1..])?));
                }
                "generator" => generator = Some(vector(&rest)?),
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        let vertices: [[f64; 3]; 4] = vertices.try_into().map_err(|_| bad("need four vertices"))?;
        let spaces = ElementSpaces::new(Tetrahedron::from_arrays(vertices)?);
        let degree = degree.ok_or_else(|| bad("missing degree"))?;
        let faces = FaceSet::from_mask(faces.ok_or_else(|| bad("missing faces"))?);
        let r_k = r_k.ok_or_else(|| bad("missing r_K"))?;
        match kind.as_deref() {
            Some("hcurl") => {
                let mut data = TraceData::empty(degree);
                r_f.sort_by_key(|(f, _)| *f);
                data.faces = r_f;
                let mut p = HcurlProblem::new(spaces, degree, faces, r_k, data)?;
                p.generator = generator;
                Ok(Problem::Hcurl(p))
            }
            Some("hdiv") => {
                let mut p = HdivProblem::new(spaces, degree, faces, r_k, r_f)?;
                p.generator = generator;
                Ok(Problem::Hdiv(p))
            }
            _ => Err(bad("kind must be hcurl or hdiv")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::minsolve::oracle_solve;
    use crate::polyspace::FieldValues;

    fn reference() -> Arc<ElementSpaces> {
        ElementSpaces::new(Tetrahedron::reference())
    }

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

    fn rotation_problem(spaces: &Arc<ElementSpaces>, faces: FaceSet) -> HcurlProblem {
        // w = (-y, x, 0) has curl (0, 0, 2)
        let basis = spaces.basis(SpaceTag::Nedelec(0)).unwrap();
        let pts = basis.rule(4).unwrap();
        let vals = DMatrix::from_fn(3 * pts.len(), 1, |r, _| {
            let x = pts.x[r / 3];
            [-x.y, x.x, 0.0][r % 3]
        });
        let w = basis.project(&pts, &vals).column(0).into_owned();
        hcurl_from_field(spaces, 0, faces, w).unwrap()
    }

    #[test]
    fn closed_form_curl_only_minimizer() {
        let spaces = reference();
        let problem = rotation_problem(&spaces, FaceSet::EMPTY);
        let r = solve_min_hcurl(&problem).unwrap();
        assert!((r.norm - 1.0 / 80f64.sqrt()).abs() < 1e-12, "{}", r.norm);
        let basis = spaces.basis(SpaceTag::Nedelec(0)).unwrap();
        let pts = vec![Point::new(0.1, 0.2, 0.3), Point::new(0.25, 0.25, 0.25), Point::new(0.7, 0.1, 0.1)];
        let field = crate::polyspace::FieldCoefficients::new(basis, r.x_star.clone()).unwrap();
        let FieldValues::Vector(v) = field.evaluate(&pts) else { panic!() };
        for (x, v) in pts.iter().zip(v) {
            let expected = Point::new(0.25 - x.y, x.x - 0.25, 0.0);
            assert!((v - expected).norm() < 1e-12);
        }
        let o = oracle_solve(&problem.constraint_system().unwrap()).unwrap();
        assert!((o.x_star - &r.x_star).norm() < 1e-12);
    }

    #[test]
    fn rotation_traces_are_compatible() {
        let spaces = reference();
        let problem = rotation_problem(&spaces, FaceSet::ALL);
        assert!(problem.is_valid(), "{:?}", problem.validation);
        // face 2 is z = 0: scurl r_F = -2 = r_K . n_F
        let scurl = spaces
            .operator(OperatorKey::SurfaceCurl { degree: 0, face: 2 })
            .unwrap()
            .apply(problem.r_f.get(2).unwrap());
        let basis = spaces.basis(SpaceTag::FaceScalarP { degree: 0, face: 2 }).unwrap();
        let FieldValues::Scalar(s) = crate::polyspace::FieldCoefficients::new(basis, scurl.clone())
            .unwrap()
            .evaluate(&[Point::new(0.2, 0.2, 0.0)])
        else {
            panic!()
        };
        assert!((s[0] + 2.0).abs() < 1e-12, "{}", s[0]);
    }

    #[test]
    fn zero_data() {
        let spaces = skewed();
        let n = spaces.basis(SpaceTag::Nedelec(2)).unwrap().dim();
        let problem = hcurl_from_field(&spaces, 2, FaceSet::ALL, DVector::zeros(n)).unwrap();
        assert_eq!(solve_min_hcurl(&problem).unwrap().norm, 0.0);
        let m = spaces.basis(SpaceTag::RaviartThomas(2)).unwrap().dim();
        let problem = hdiv_from_field(&spaces, 2, FaceSet::ALL, DVector::zeros(m)).unwrap();
        assert_eq!(solve_min_hdiv(&problem).unwrap().norm, 0.0);
    }

    #[test]
    fn generated_data_are_valid_and_bounded_by_the_generator() {
        let spaces = skewed();
        for p in 0..=3 {
            for faces in FaceSet::representatives() {
                let problem = generate_compatible_hcurl_data(&spaces, p, faces, 11 + p as u64).unwrap();
                assert!(problem.is_valid(), "p={p} {faces}: {:?}", problem.validation);
                let r = solve_min_hcurl(&problem).unwrap();
                assert!(r.residual <= 1e-9 * problem.scale());
                assert!(r.norm <= problem.generator.as_ref().unwrap().norm() + 1e-10 * problem.scale());

                let problem = generate_compatible_hdiv_data(&spaces, p, faces, 5).unwrap();
                assert!(problem.is_valid());
                let r = solve_min_hdiv(&problem).unwrap();
                assert!(r.residual <= 1e-9 * problem.scale());
                assert!(r.norm <= problem.generator.as_ref().unwrap().norm() + 1e-10 * problem.scale());
            }
        }
    }

    #[test]
    fn oracle_agreement() {
        let spaces = skewed();
        for p in 0..=2 {
            for faces in [FaceSet::EMPTY, FaceSet::from_mask(3), FaceSet::ALL] {
                let problem = Problem::Hcurl(generate_compatible_hcurl_data(&spaces, p, faces, 3).unwrap());
                let a = problem.solve().unwrap();
                let b = oracle_solve(&problem.constraint_system().unwrap()).unwrap();
                assert!((&a.x_star - &b.x_star).norm() <= 1e-10 * (1.0 + a.norm), "p={p} {faces}");
                let problem = Problem::Hdiv(generate_compatible_hdiv_data(&spaces, p, faces, 3).unwrap());
                let a = problem.solve().unwrap();
                let b = oracle_solve(&problem.constraint_system().unwrap()).unwrap();
                assert!((&a.x_star - &b.x_star).norm() <= 1e-10 * (1.0 + a.norm), "p={p} {faces}");
            }
        }
    }

    #[test]
    fn trace_only_single_face_gradient() {
        let spaces = reference();
        // r_F = trace of grad(xy) = (y, x, 0) on face 2 (z = 0)
        let basis = spaces.basis(SpaceTag::Nedelec(1)).unwrap();
        let pts = basis.rule(5).unwrap();
        let vals = DMatrix::from_fn(3 * pts.len(), 1, |r, _| {
            let x = pts.x[r / 3];
            [x.y, x.x, 0.0][r % 3]
        });
        let w = basis.project(&pts, &vals).column(0).into_owned();
        let data = TraceData::from_field(&spaces, 1, FaceSet::from_faces(&[2]), &w).unwrap();
        let r = solve_min_trace_only(&spaces, &data).unwrap();
        assert!(r.norm <= w.norm() + 1e-12);
        let problem = HcurlProblem::new(
            Arc::clone(&spaces),
            1,
            FaceSet::from_faces(&[2]),
            DVector::zeros(spaces.basis(SpaceTag::RaviartThomas(1)).unwrap().dim()),
            data,
        )
        .unwrap();
        let o = oracle_solve(&problem.constraint_system().unwrap()).unwrap();
        assert!((o.x_star - &r.x_star).norm() < 1e-10);
        // the minimizer is curl free
        let curl = spaces.operator(OperatorKey::Curl(1)).unwrap().apply(&r.x_star);
        assert!(curl.norm() < 1e-10);
    }

    #[test]
    fn hdiv_constant_divergence() {
        let spaces = reference();
        let basis = spaces.basis(SpaceTag::ScalarP(0)).unwrap();
        let pts = basis.rule(2).unwrap();
        let r_k = basis.project(&pts, &DMatrix::from_element(pts.len(), 1, 3.0)).column(0).into_owned();
        let problem = HdivProblem::new(Arc::clone(&spaces), 0, FaceSet::EMPTY, r_k, Vec::new()).unwrap();
        let r = solve_min_hdiv(&problem).unwrap();
        let o = oracle_solve(&problem.constraint_system().unwrap()).unwrap();
        assert!((o.x_star - &r.x_star).norm() < 1e-12);
        // div(a + x) = 3 for every constant a; the smallest is x - c_K
        let rt = spaces.basis(SpaceTag::RaviartThomas(0)).unwrap();
        let FieldValues::Vector(v) = crate::polyspace::FieldCoefficients::new(rt, r.x_star.clone())
            .unwrap()
            .evaluate(&[Point::new(0.1, 0.2, 0.3)])
        else {
            panic!()
        };
        assert!((v[0] - (Point::new(0.1, 0.2, 0.3) - Point::new(0.25, 0.25, 0.25))).norm() < 1e-12);
    }

    #[test]
    fn hdiv_mean_condition() {
        let spaces = skewed();
        let mut problem = generate_compatible_hdiv_data(&spaces, 1, FaceSet::ALL, 9).unwrap();
        assert!(problem.is_valid());
        problem.r_f[0].1[0] += 1e-3;
        let broken = HdivProblem::new(Arc::clone(&spaces), 1, FaceSet::ALL, problem.r_k.clone(), problem.r_f.clone()).unwrap();
        assert!(!broken.is_valid());
        assert!(matches!(solve_min_hdiv(&broken), Err(Error::IncompatibleData(_))));
    }

    #[test]
    fn broken_edge_compatibility_is_rejected() {
        let spaces = skewed();
        let mut problem = generate_compatible_hcurl_data(&spaces, 2, FaceSet::from_mask(3), 4).unwrap();
        problem.r_f.faces[1].1[0] += 1e-3;
        let broken = HcurlProblem::new(Arc::clone(&spaces), 2, problem.faces, problem.r_k.clone(), problem.r_f.clone()).unwrap();
        assert!(!broken.is_valid());
        assert!(matches!(solve_min_hcurl(&broken), Err(Error::IncompatibleData(_))));
    }

    #[test]
    fn enrichment_is_monotone() {
        let spaces = skewed();
        let problem = Problem::Hcurl(generate_compatible_hcurl_data(&spaces, 1, FaceSet::from_mask(7), 2).unwrap());
        let report = reference_min_norm(&problem, 3).unwrap();
        assert_eq!(report.values.len(), 4);
        assert!(report.max_increase <= 1e-10 * problem.scale(), "{:?}", report.values);
        let zero = Problem::Hdiv(
            hdiv_from_field(&spaces, 1, FaceSet::ALL, DVector::zeros(spaces.basis(SpaceTag::RaviartThomas(1)).unwrap().dim()))
                .unwrap(),
        );
        assert!(reference_min_norm(&zero, 2).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_form_reference_is_lower() {
        let spaces = reference();
        let problem = Problem::Hcurl(rotation_problem(&spaces, FaceSet::EMPTY));
        let report = reference_min_norm(&problem, 3).unwrap();
        assert!(report.value <= 1.0 / 80f64.sqrt() + 1e-12);
    }

    #[test]
    fn step3() {
        let spaces = skewed();
        for faces in [FaceSet::from_mask(1), FaceSet::from_mask(6), FaceSet::ALL] {
            let problem = generate_compatible_hcurl_data(&spaces, 2, faces, 21).unwrap();
            let report = step3_decomposition(&problem).unwrap();
            assert!(report.pass, "{faces}: {report:?}");
        }
        let curl_free = generate_curl_free_data(&spaces, 2, FaceSet::from_mask(5), 8).unwrap();
        let report = step3_decomposition(&curl_free).unwrap();
        assert_eq!(report.xi.norm(), 0.0);
        assert!((&report.w - &report.xi_tilde).norm() == 0.0);
    }

    #[test]
    fn text_round_trip() {
        let spaces = skewed();
        let problem = Problem::Hcurl(generate_compatible_hcurl_data(&spaces, 1, FaceSet::from_mask(9), 1).unwrap());
        let back = Problem::from_text(&problem.to_text()).unwrap();
        let (Problem::Hcurl(a), Problem::Hcurl(b)) = (&problem, &back) else { panic!() };
        assert_eq!(a.r_k, b.r_k);
        assert_eq!(a.r_f, b.r_f);
        assert_eq!(a.generator, b.generator);
        let problem = Problem::Hdiv(generate_compatible_hdiv_data(&spaces, 1, FaceSet::from_mask(2), 1).unwrap());
        let back = Problem::from_text(&problem.to_text()).unwrap();
        assert!((back.solve().unwrap().norm - problem.solve().unwrap().norm).abs() < 1e-14);
        assert!(Problem::from_text("kind hcurl\n").is_err());
    }
}
