//! Browser demo: element shapes, discrete/reference ratios and minimizer
//! samples, returned to JavaScript as JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use minnorm::element::{ElementSpaces, FaceSet};
use minnorm::geometry::Tetrahedron;
use minnorm::harness::shape_family;
use minnorm::harness::sweep::{make_problem, norm_ratio};
use minnorm::polyspace::{FieldCoefficients, FieldValues, SpaceTag};
use minnorm::problems::{reference_min_norm, Problem, ProblemKind};

/// Largest degree the page offers; keeps each click well under a second.
pub const DEMO_MAX_DEGREE: usize = 5;

#[derive(Serialize)]
struct ShapeInfo {
    vertices: Vec<[f64; 3]>,
    kappa: f64,
    diameter: f64,
    insphere_diameter: f64,
    volume: f64,
}

#[derive(Serialize)]
struct CurvePoint {
    p: usize,
    discrete: f64,
    reference: f64,
    ratio: f64,
    rank: usize,
}

#[derive(Serialize)]
struct Sample {
    point: [f64; 3],
    value: [f64; 3],
}

#[derive(Serialize)]
struct Minimizer {
    norm: f64,
    residual: f64,
    rank: usize,
    unknowns: usize,
    samples: Vec<Sample>,
}

fn element(family: &str, parameter: f64) -> Result<Tetrahedron, String> {
    shape_family(family, parameter).map_err(|e| e.to_string())
}

fn problem(family: &str, parameter: f64, kind: &str, p: usize, faces: u8, seed: u64) -> Result<Problem, String> {
    if p > DEMO_MAX_DEGREE {
        return Err(format!("degree {p} exceeds the demo limit {DEMO_MAX_DEGREE}"));
    }
    if faces > 15 {
        return Err(format!("face mask {faces} exceeds 15"));
    }
    let kind: ProblemKind = kind.parse().map_err(|e: minnorm::Error| e.to_string())?;
    let spaces = ElementSpaces::new(element(family, parameter)?);
    make_problem(&spaces, kind, p, FaceSet::from_mask(faces), seed, false).map_err(|e| e.to_string())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

pub fn shape_info_json(family: &str, parameter: f64) -> Result<String, String> {
    let tet = element(family, parameter)?;
    Ok(json(&ShapeInfo {
        vertices: tet.vertices().iter().map(|v| [v.x, v.y, v.z]).collect(),
        kappa: tet.shape_regularity(),
        diameter: tet.diameter(),
        insphere_diameter: tet.insphere_diameter(),
        volume: tet.volume(),
    }))
}

/// Discrete and enriched (`p + delta`) minimal norms of one data draw per
/// degree `0..=p_max`.
pub fn ratio_curve_json(
    family: &str,
    parameter: f64,
    kind: &str,
    faces: u8,
    p_max: usize,
    delta: usize,
    seed: u64,
) -> Result<String, String> {
    if p_max + delta > DEMO_MAX_DEGREE + 2 {
        return Err(format!("p_max + delta must not exceed {}", DEMO_MAX_DEGREE + 2));
    }
    let mut points = Vec::new();
    for p in 0..=p_max {
        let problem = problem(family, parameter, kind, p, faces, seed)?;
        let result = problem.solve().map_err(|e| e.to_string())?;
        let reference = reference_min_norm(&problem, delta).map_err(|e| e.to_string())?.value;
        points.push(CurvePoint {
            p,
            discrete: result.norm,
            reference,
            ratio: norm_ratio(result.norm, reference),
            rank: result.rank,
        });
    }
    Ok(json(&points))
}

/// The minimizer of one problem sampled on a barycentric lattice with `n`
/// points per edge.
pub fn minimizer_json(family: &str, parameter: f64, kind: &str, p: usize, faces: u8, seed: u64, n: usize) -> Result<String, String> {
    let problem = problem(family, parameter, kind, p, faces, seed)?;
    let result = problem.solve().map_err(|e| e.to_string())?;
    let (spaces, tag) = match &problem {
        Problem::Hcurl(h) => (&h.spaces, SpaceTag::Nedelec(p)),
        Problem::Hdiv(h) => (&h.spaces, SpaceTag::RaviartThomas(p)),
    };
    let tet = spaces.tetrahedron();
    let n = n.clamp(2, 12);
    let mut points = Vec::new();
    for i in 0..n {
        for j in 0..n - i {
            for k in 0..n - i - j {
                let (a, b, c) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64, (k as f64 + 0.5) / n as f64);
                if a + b + c < 1.0 {
                    points.push(tet.point_from_barycentric(&[1.0 - a - b - c, a, b, c]));
                }
            }
        }
    }
    let basis = spaces.basis(tag).map_err(|e| e.to_string())?;
    let unknowns = basis.dim();
    let field = FieldCoefficients::new(basis, result.x_star.clone()).map_err(|e| e.to_string())?;
    let FieldValues::Vector(values) = field.evaluate(&points) else {
        return Err("expected a vector field".into());
    };
    let samples = points
        .iter()
        .zip(values)
        .map(|(x, v)| Sample {
            point: [x.x, x.y, x.z],
            value: [v.x, v.y, v.z],
        })
        .collect();
    Ok(json(&Minimizer {
        norm: result.norm,
        residual: result.residual,
        rank: result.rank,
        unknowns,
        samples,
    }))
}

#[wasm_bindgen]
pub fn shape_info(family: &str, parameter: f64) -> Result<String, JsValue> {
    shape_info_json(family, parameter).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ratio_curve(family: &str, parameter: f64, kind: &str, faces: u8, p_max: usize, delta: usize, seed: u32) -> Result<String, JsValue> {
    ratio_curve_json(family, parameter, kind, faces, p_max, delta, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn minimizer(family: &str, parameter: f64, kind: &str, p: usize, faces: u8, seed: u32, n: usize) -> Result<String, JsValue> {
    minimizer_json(family, parameter, kind, p, faces, seed as u64, n).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_info_reports_kappa() {
        let v: serde_json::Value = serde_json::from_str(&shape_info_json("flatten", 0.5).unwrap()).unwrap();
        assert_eq!(v["vertices"].as_array().unwrap().len(), 4);
        assert!(v["kappa"].as_f64().unwrap() > 1.0);
        assert!(shape_info_json("flatten", 2.0).is_err());
    }

    #[test]
    fn curve_ratios_are_at_least_one() {
        let v: serde_json::Value =
            serde_json::from_str(&ratio_curve_json("reference", 1.0, "hcurl", 3, 2, 1, 5).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        assert_eq!(pts.len(), 3);
        for pt in pts {
            assert!(pt["ratio"].as_f64().unwrap() >= 1.0 - 1e-8);
        }
        assert!(ratio_curve_json("reference", 1.0, "maxwell", 0, 1, 1, 5).is_err());
        assert!(ratio_curve_json("reference", 1.0, "hcurl", 0, 6, 2, 5).is_err());
    }

    #[test]
    fn minimizer_samples_lie_inside() {
        let v: serde_json::Value =
            serde_json::from_str(&minimizer_json("needle", 0.5, "hdiv", 1, 1, 2, 4).unwrap()).unwrap();
        let samples = v["samples"].as_array().unwrap();
        assert!(!samples.is_empty());
        for s in samples {
            let x: Vec<f64> = s["point"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
            assert!(x.iter().all(|c| *c >= 0.0) && x[0] / 0.5 + x[1] / 0.5 + x[2] <= 1.0);
        }
        assert!(v["residual"].as_f64().unwrap() < 1e-9);
    }
}
