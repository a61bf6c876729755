//! Property suites behind `check --suite`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::shapes::shape_family;
use crate::calculus::TraceData;
use crate::element::{ElementSpaces, FaceSet, OperatorKey};
use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::minsolve::{least_norm_solve, oracle_solve, DEFAULT_TOLERANCE};
use crate::piola::{measure_piola_properties, standard_maps, PiolaContext, PIOLA_SLACK};
use crate::polyspace::{dimension, numerical_rank, SpaceTag, RANK_TOLERANCE};
use crate::problems::{
    generate_compatible_hcurl_data, generate_compatible_hdiv_data, generate_curl_free_data, solve_min_curl_only,
    step3_decomposition, HcurlProblem, HdivProblem, ProblemKind,
};
use crate::quadrature::{edge_rule, tet_rule, tri_rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Piola,
    Calculus,
    Solver,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piola" => Ok(Suite::Piola),
            "calculus" => Ok(Suite::Calculus),
            "solver" => Ok(Suite::Solver),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite '{other}' (expected piola, calculus, solver or all)"
            ))),
        }
    }
}

/// One judged property.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn judge(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    /// Turns an error raised while measuring into a failed check.
    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => Self::judge(name, pass, detail),
            Err(e) => Self::judge(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Sizes of the randomized checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub max_quadrature_degree: usize,
    pub max_dimension_degree: usize,
    pub identity_fields: usize,
    pub identity_max_degree: usize,
    pub piola_trials: usize,
    pub piola_max_degree: usize,
    pub oracle_problems: usize,
    pub oracle_max_degree: usize,
    pub step3_problems: usize,
    pub perturbations: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            max_quadrature_degree: 13,
            max_dimension_degree: 5,
            identity_fields: 50,
            identity_max_degree: 6,
            piola_trials: 50,
            piola_max_degree: 5,
            oracle_problems: 100,
            oracle_max_degree: 2,
            step3_problems: 50,
            perturbations: 100,
        }
    }
}

impl SuiteOptions {
    /// Small sizes for smoke tests.
    pub fn quick() -> Self {
        Self {
            max_quadrature_degree: 8,
            max_dimension_degree: 2,
            identity_fields: 6,
            identity_max_degree: 3,
            piola_trials: 4,
            piola_max_degree: 2,
            oracle_problems: 12,
            step3_problems: 6,
            perturbations: 12,
            ..Self::default()
        }
    }
}

/// Elements the suites run on: the reference element, a flattened one and
/// a generic one.
pub fn check_elements() -> Vec<(String, Tetrahedron)> {
    vec![
        ("reference".into(), Tetrahedron::reference()),
        ("flatten-0.1".into(), shape_family("flatten", 0.1).expect("valid family")),
        (
            "skewed".into(),
            Tetrahedron::from_arrays([[0.1, 0.0, 0.0], [1.2, 0.1, 0.0], [0.3, 0.9, 0.1], [0.2, 0.3, 1.1]])
                .expect("nondegenerate"),
        ),
    ]
}

pub fn run_suite(suite: Suite, options: &SuiteOptions) -> Vec<CheckResult> {
    match suite {
        Suite::Calculus => calculus_suite(options),
        Suite::Piola => piola_suite(options),
        Suite::Solver => solver_suite(options),
        Suite::All => {
            let mut out = calculus_suite(options);
            out.extend(piola_suite(options));
            out.extend(solver_suite(options));
            out
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn calculus_suite(o: &SuiteOptions) -> Vec<CheckResult> {
    let elements: Vec<(String, Arc<ElementSpaces>)> =
        check_elements().into_iter().map(|(n, t)| (n, ElementSpaces::new(t))).collect();
    vec![
        CheckResult::from_result("quadrature exactness", quadrature_exactness(o.max_quadrature_degree)),
        CheckResult::from_result("space dimensions", space_dimensions(o.max_dimension_degree)),
        CheckResult::from_result("div curl = 0", complex_property(&elements, o.identity_max_degree, true)),
        CheckResult::from_result("curl grad = 0", complex_property(&elements, o.identity_max_degree, false)),
        CheckResult::from_result("surface curl identity", surface_curl_identity(&elements, o)),
    ]
}

/// Monomials of total degree `<= d` integrated on the reference element,
/// its faces `z = 0` and edge `x`-axis against the exact values
/// `a! b! c! / (a+b+c+3)!`, `a! b! / (a+b+2)!` and `1 / (a+1)`.
pub fn quadrature_exactness(max_degree: usize) -> Result<(bool, String)> {
    let tet = Tetrahedron::reference();
    let face = (0..4)
        .find(|&f| tet.face(f).vertices.iter().all(|&v| tet.vertices()[v].z == 0.0))
        .expect("reference element has a face in z = 0");
    let edge = (0..6)
        .find(|&e| {
            tet.edges()[e]
                .vertices
                .iter()
                .all(|&v| tet.vertices()[v].y == 0.0 && tet.vertices()[v].z == 0.0)
        })
        .expect("reference element has an edge on the x axis");
    let mut worst = 0.0f64;
    for d in 0..=max_degree {
        let vol = tet_rule(d, &tet)?;
        let vol_pts = vol.physical_points(&tet);
        let tri = tri_rule(d, &tet, face)?;
        let tri_pts = tri.physical_points(&tet, face);
        let seg = edge_rule(d, &tet, edge)?;
        let seg_pts = seg.physical_points(&tet, edge);
        for a in 0..=d {
            for b in 0..=d - a {
                let c = d - a - b;
                let q: f64 = vol_pts
                    .iter()
                    .zip(&vol.weights)
                    .map(|(x, w)| w * x.x.powi(a as i32) * x.y.powi(b as i32) * x.z.powi(c as i32))
                    .sum();
                let exact = factorial(a) * factorial(b) * factorial(c) / factorial(d + 3);
                worst = worst.max((q - exact).abs() / exact);
            }
            let b = d - a;
            let q: f64 = tri_pts
                .iter()
                .zip(&tri.weights)
                .map(|(x, w)| w * x.x.powi(a as i32) * x.y.powi(b as i32))
                .sum();
            let exact = factorial(a) * factorial(b) / factorial(d + 2);
            worst = worst.max((q - exact).abs() / exact);
        }
        let q: f64 = seg_pts.iter().zip(&seg.weights).map(|(x, w)| w * x.x.powi(d as i32)).sum();
        worst = worst.max((q - 1.0 / (d as f64 + 1.0)).abs() * (d as f64 + 1.0));
    }
    Ok((worst <= 1e-12, format!("degrees 0..={max_degree}, worst relative error {worst:.2e} (limit 1e-12)")))
}

/// Numerical ranks of the spanning sets on a generic element against the
/// closed-form dimensions.
pub fn space_dimensions(max_degree: usize) -> Result<(bool, String)> {
    let tet = check_elements().pop().expect("three elements").1;
    let mut mismatches = Vec::new();
    for p in 0..=max_degree {
        for tag in [
            SpaceTag::Nedelec(p),
            SpaceTag::RaviartThomas(p),
            SpaceTag::FaceTrace { degree: p, face: 1 },
        ] {
            let rank = numerical_rank(tag, &tet, RANK_TOLERANCE)?;
            if rank != dimension(tag) {
                mismatches.push(format!("{tag}: rank {rank} vs {}", dimension(tag)));
            }
        }
    }
    Ok((
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("N_p, RT_p and face traces match for p = 0..={max_degree}")
        } else {
            mismatches.join("; ")
        },
    ))
}

/// Spectral norm, from the largest eigenvalue of `A^T A`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = if a.nrows() >= a.ncols() { a.transpose() * a } else { a * a.transpose() };
    g.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

/// Largest degree at which `|div curl|` and `|curl grad|` are judged in
/// absolute terms; above it, and on other elements, only relative to
/// `|div| |curl|`.
pub const ABSOLUTE_COMPLEX_DEGREE: usize = 5;

/// `div curl` (or `curl grad`) in the spectral norm: absolute on the
/// reference element up to [`ABSOLUTE_COMPLEX_DEGREE`] (limit 1e-11),
/// relative to the factor norms everywhere (limit 1e-14).
///
/// The rounding error of the product scales like `eps |div| |curl|`, and
/// both norms grow with `p` and with the aspect ratio, so no absolute
/// bound holds uniformly.
fn complex_property(elements: &[(String, Arc<ElementSpaces>)], max_degree: usize, div_curl: bool) -> Result<(bool, String)> {
    let (mut abs_worst, mut rel_worst) = ((0.0f64, String::new()), (0.0f64, String::new()));
    for (name, spaces) in elements {
        for p in 0..=max_degree {
            let curl = &spaces.operator(OperatorKey::Curl(p))?.matrix;
            let (left, right) = if div_curl {
                (spaces.operator(OperatorKey::Divergence(p))?.matrix.clone(), curl.clone())
            } else {
                (curl.clone(), spaces.operator(OperatorKey::Gradient(p))?.matrix.clone())
            };
            let norm = spectral_norm(&(&left * &right));
            let rel = norm / (spectral_norm(&left) * spectral_norm(&right));
            if name == "reference" && p <= ABSOLUTE_COMPLEX_DEGREE && norm >= abs_worst.0 {
                abs_worst = (norm, format!("p = {p}"));
            }
            if rel >= rel_worst.0 {
                rel_worst = (rel, format!("{name}, p = {p}"));
            }
        }
    }
    Ok((
        abs_worst.0 <= 1e-11 && rel_worst.0 <= 1e-14,
        format!(
            "reference element, p <= {ABSOLUTE_COMPLEX_DEGREE}: max norm {:.2e} at {} (limit 1e-11); \
             all elements, p <= {max_degree}: max relative norm {:.2e} at {} (limit 1e-14)",
            abs_worst.0, abs_worst.1, rel_worst.0, rel_worst.1
        ),
    ))
}

/// `scurl_F(pi_F v) = (curl v) . n_F` on every face for random `v`.
fn surface_curl_identity(elements: &[(String, Arc<ElementSpaces>)], o: &SuiteOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x5C);
    let mut worst = 0.0f64;
    for trial in 0..o.identity_fields {
        let spaces = &elements[trial % elements.len()].1;
        let p = trial % (o.identity_max_degree + 1);
        let v = gaussian(&mut rng, spaces.basis(SpaceTag::Nedelec(p))?.dim());
        let curl_v = spaces.operator(OperatorKey::Curl(p))?.apply(&v);
        for face in 0..4 {
            let trace = spaces.operator(OperatorKey::TangentialTrace { degree: p, face })?.apply(&v);
            let lhs = spaces.operator(OperatorKey::SurfaceCurl { degree: p, face })?.apply(&trace);
            let rhs = spaces.operator(OperatorKey::NormalTrace { degree: p, face })?.apply(&curl_v);
            let rel = (&lhs - &rhs).norm() / rhs.norm().max(v.norm());
            worst = worst.max(rel);
        }
    }
    Ok((
        worst <= 1e-9,
        format!(
            "{} fields, p <= {}, all faces: worst relative error {worst:.2e} (limit 1e-9)",
            o.identity_fields, o.identity_max_degree
        ),
    ))
}

pub fn piola_suite(o: &SuiteOptions) -> Vec<CheckResult> {
    let maps = standard_maps(o.seed);
    let cells: Vec<(usize, usize)> = (0..maps.len())
        .flat_map(|m| (0..=o.piola_max_degree).map(move |p| (m, p)))
        .collect();
    let contexts: Vec<Result<PiolaContext>> = maps.into_iter().map(PiolaContext::from_map).collect();
    let reports: Vec<(usize, usize, Result<crate::piola::PiolaReport>)> = cells
        .par_iter()
        .map(|&(m, p)| {
            let r = match &contexts[m] {
                Ok(ctx) => measure_piola_properties(p, ctx, o.piola_trials, o.seed.wrapping_add((m * 97 + p) as u64)),
                Err(e) => Err(e.clone()),
            };
            (m, p, r)
        })
        .collect();
    let scope = format!(
        "{} trials x {} maps (one orientation reversing) x p = 0..={}",
        o.piola_trials,
        contexts.len(),
        o.piola_max_degree
    );
    let mut errors = Vec::new();
    let (mut mismatches, mut rank_diff, mut stability, mut trace) = (0usize, 0usize, 0.0f64, 0.0f64);
    for (m, p, r) in reports {
        match r {
            Ok(rep) => {
                mismatches += rep.curl_free_mismatches;
                rank_diff = rank_diff.max(rep.curl_rank_difference);
                stability = stability.max(rep.stability_violation);
                trace = trace.max(rep.trace_violation);
            }
            Err(e) => errors.push(format!("map {m}, p = {p}: {e}")),
        }
    }
    let err_note = if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join("; ")) };
    vec![
        CheckResult::judge(
            "piola curl-free equivalence",
            errors.is_empty() && mismatches == 0 && rank_diff == 0,
            format!("{scope}: {mismatches} mismatches, max curl rank difference {rank_diff}{err_note}"),
        ),
        CheckResult::judge(
            "piola L2 stability",
            errors.is_empty() && stability <= PIOLA_SLACK,
            format!("{scope}: max relative excess {stability:.2e} (slack {PIOLA_SLACK:e}){err_note}"),
        ),
        CheckResult::judge(
            "piola trace commutation",
            errors.is_empty() && trace <= PIOLA_SLACK,
            format!("{scope}: max relative difference {trace:.2e} (slack {PIOLA_SLACK:e}){err_note}"),
        ),
    ]
}

pub fn solver_suite(o: &SuiteOptions) -> Vec<CheckResult> {
    vec![
        CheckResult::from_result("closed-form minimizer", closed_form_minimizer()),
        CheckResult::from_result("oracle agreement", oracle_agreement(o)),
        CheckResult::from_result("two-stage decomposition", two_stage_decomposition(o)),
        CheckResult::from_result("incompatibility detection", incompatibility_detection(o)),
    ]
}

/// Curl-only problem on the reference element with `r_K = (0, 0, 2)`: the
/// minimizer is `(1/4 - y, x - 1/4, 0)` with norm `1/sqrt(80)`.
pub fn closed_form_minimizer() -> Result<(bool, String)> {
    let spaces = ElementSpaces::new(Tetrahedron::reference());
    let rt = spaces.basis(SpaceTag::RaviartThomas(0))?;
    let pts = rt.rule(2)?;
    let constant = DMatrix::from_fn(3 * pts.len(), 1, |r, _| if r % 3 == 2 { 2.0 } else { 0.0 });
    let r_k = rt.project(&pts, &constant).column(0).into_owned();
    let result = solve_min_curl_only(&spaces, 0, &r_k)?;
    let ned = spaces.basis(SpaceTag::Nedelec(0))?;
    let pts = ned.rule(2)?;
    let expected = DMatrix::from_fn(3 * pts.len(), 1, |r, _| {
        let x = pts.x[r / 3];
        [0.25 - x.y, x.x - 0.25, 0.0][r % 3]
    });
    let expected = ned.project(&pts, &expected).column(0).into_owned();
    // orthonormal basis: coefficient distance is the L2 distance
    let field_err = (&result.x_star - &expected).norm();
    let norm_err = (result.norm - 1.0 / 80f64.sqrt()).abs();
    Ok((
        norm_err <= 1e-10 && field_err <= 1e-9,
        format!("|norm - 1/sqrt(80)| = {norm_err:.2e} (limit 1e-10), L2 field error {field_err:.2e} (limit 1e-9)"),
    ))
}

/// Constraint system of a random compatible problem of the given kind.
fn random_problem_system(
    spaces: &Arc<ElementSpaces>,
    kind: ProblemKind,
    p: usize,
    faces: FaceSet,
    seed: u64,
) -> Result<crate::minsolve::ConstraintSystem> {
    match kind {
        ProblemKind::Hcurl | ProblemKind::CurlOnly => generate_compatible_hcurl_data(spaces, p, faces, seed)?.constraint_system(),
        ProblemKind::TraceOnly => generate_curl_free_data(spaces, p, faces, seed)?.constraint_system(),
        ProblemKind::Hdiv => generate_compatible_hdiv_data(spaces, p, faces, seed)?.constraint_system(),
    }
}

fn random_faces(rng: &mut ChaCha8Rng, kind: ProblemKind) -> FaceSet {
    loop {
        let faces = FaceSet::from_mask(rng.random_range(0..16));
        let faces = if kind == ProblemKind::CurlOnly { FaceSet::EMPTY } else { faces };
        if kind.admits(faces) {
            return faces;
        }
    }
}

/// SVD solver against the QR oracle on random problems of all kinds.
pub fn oracle_agreement(o: &SuiteOptions) -> Result<(bool, String)> {
    let elements: Vec<Arc<ElementSpaces>> = check_elements().into_iter().map(|(_, t)| ElementSpaces::new(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x0AC1E);
    let mut worst = 0.0f64;
    for i in 0..o.oracle_problems {
        let kind = ProblemKind::ALL[i % 4];
        let p = (i / 4) % (o.oracle_max_degree + 1);
        let faces = random_faces(&mut rng, kind);
        let spaces = &elements[(i / 12) % elements.len()];
        let sys = random_problem_system(spaces, kind, p, faces, rng.random())?;
        let a = least_norm_solve(&sys, DEFAULT_TOLERANCE)?;
        let b = oracle_solve(&sys)?;
        worst = worst.max((&a.x_star - &b.x_star).amax());
    }
    Ok((
        worst <= 1e-10,
        format!(
            "{} problems, p <= {}, all kinds: max coefficient difference {worst:.2e} (limit 1e-10)",
            o.oracle_problems, o.oracle_max_degree
        ),
    ))
}

/// Curl-only minimizer plus curl-free trace correction on random problems.
pub fn two_stage_decomposition(o: &SuiteOptions) -> Result<(bool, String)> {
    let elements: Vec<Arc<ElementSpaces>> = check_elements().into_iter().map(|(_, t)| ElementSpaces::new(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0x57E9);
    let (mut failed, mut scurl, mut feas, mut deficit) = (0usize, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..o.step3_problems {
        let spaces = &elements[i % elements.len()];
        let p = i % 5;
        let faces = FaceSet::from_mask(rng.random_range(1..16));
        let problem = generate_compatible_hcurl_data(spaces, p, faces, rng.random())?;
        let r = step3_decomposition(&problem)?;
        failed += usize::from(!r.pass);
        scurl = scurl.max(r.surface_curl_residual / r.scale);
        feas = feas.max(r.feasibility_residual / r.scale);
        deficit = deficit.max((r.min_norm - r.w_norm) / r.scale);
    }
    Ok((
        failed == 0,
        format!(
            "{} problems: max scurl residual {scurl:.2e}, max feasibility {feas:.2e} (limits 1e-9 x scale), \
             max (min - |w|) {deficit:.2e} x scale (limit 1e-10)",
            o.step3_problems
        ),
    ))
}

fn is_rejected_hcurl(spaces: &Arc<ElementSpaces>, p: usize, faces: FaceSet, r_k: DVector<f64>, r_f: TraceData) -> bool {
    match HcurlProblem::new(Arc::clone(spaces), p, faces, r_k, r_f) {
        Ok(problem) => !problem.is_valid(),
        Err(e) => matches!(e, Error::IncompatibleData(_)),
    }
}

fn is_rejected_hdiv(spaces: &Arc<ElementSpaces>, p: usize, r_k: DVector<f64>, r_f: Vec<(usize, DVector<f64>)>) -> bool {
    match HdivProblem::new(Arc::clone(spaces), p, FaceSet::ALL, r_k, r_f) {
        Ok(problem) => !problem.is_valid(),
        Err(e) => matches!(e, Error::IncompatibleData(_)),
    }
}

/// Perturbations of size 1e-3 that break compatibility, alternating
/// between the two mechanisms.
///
/// Even trials add the face trace of a gradient to one face of H(curl)
/// data: the surface curl is unchanged, so only the edge values disagree
/// with the neighbouring faces. Odd trials perturb the volume datum of
/// H(div) data prescribed on all faces, which breaks the mean condition.
pub fn incompatibility_detection(o: &SuiteOptions) -> Result<(bool, String)> {
    let elements: Vec<Arc<ElementSpaces>> = check_elements().into_iter().map(|(_, t)| ElementSpaces::new(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed ^ 0xBAD);
    let (mut detected, mut edge_trials, mut edge_detected) = (0usize, 0usize, 0usize);
    for i in 0..o.perturbations {
        let spaces = &elements[i % elements.len()];
        let p = (i / 2) % 4;
        if i % 2 == 0 {
            let faces = loop {
                let f = FaceSet::from_mask(rng.random_range(3..16));
                if f.len() >= 2 {
                    break f;
                }
            };
            let mut problem = generate_compatible_hcurl_data(spaces, p, faces, rng.random())?;
            let members: Vec<usize> = faces.iter().collect();
            let slot = rng.random_range(0..members.len());
            let face = members[slot];
            let q = gaussian(&mut rng, spaces.basis(SpaceTag::ScalarP(p + 1))?.dim());
            let grad = spaces.operator(OperatorKey::Gradient(p))?.apply(&q);
            let mut delta = spaces.operator(OperatorKey::TangentialTrace { degree: p, face })?.apply(&grad);
            delta *= 1e-3 / delta.norm();
            let entry = problem.r_f.faces.iter_mut().find(|(f, _)| *f == face).expect("face present");
            entry.1 += delta;
            edge_trials += 1;
            if is_rejected_hcurl(spaces, p, faces, problem.r_k, problem.r_f) {
                detected += 1;
                edge_detected += 1;
            }
        } else {
            let problem = generate_compatible_hdiv_data(spaces, p, FaceSet::ALL, rng.random())?;
            let mut delta = gaussian(&mut rng, problem.r_k.len());
            delta *= 1e-3 / delta.norm();
            if is_rejected_hdiv(spaces, p, problem.r_k + delta, problem.r_f) {
                detected += 1;
            }
        }
    }
    let rate = detected as f64 / o.perturbations.max(1) as f64;
    Ok((
        rate >= 0.95,
        format!(
            "{detected}/{} detected ({:.1}%, limit 95%); edge perturbations {edge_detected}/{edge_trials}",
            o.perturbations,
            100.0 * rate
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn quick_suites_pass() {
        let results = run_suite(Suite::All, &SuiteOptions::quick());
        assert_eq!(results.len(), 12);
        for r in &results {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn failures_are_reported() {
        let r = CheckResult::from_result("x", Err(Error::InvalidParameter("boom".into())));
        assert!(!r.pass);
        assert_eq!(r.to_string(), "FAIL x: error: invalid parameter: boom");
    }
}
