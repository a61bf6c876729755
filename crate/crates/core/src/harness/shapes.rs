//! Named one-parameter families of tetrahedra.

use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;

/// `flatten`: apex `(1/3, 1/3, a)` over the unit right triangle, so the
/// element flattens as `a -> 0`. `needle`: base `(0,0,0), (a,0,0), (0,a,0)`
/// under the apex `(0,0,1)`, so it thins into a needle as `a -> 0`.
pub fn shape_family(name: &str, parameter: f64) -> Result<Tetrahedron> {
    if !(parameter > 0.0 && parameter <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "shape parameter must lie in (0, 1], got {parameter}"
        )));
    }
    let a = parameter;
    match name {
        "flatten" => Tetrahedron::from_arrays([
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, a],
        ]),
        "needle" => Tetrahedron::from_arrays([[0.0, 0.0, 0.0], [a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, 1.0]]),
        "reference" => Ok(Tetrahedron::reference()),
        other => Err(Error::InvalidParameter(format!("unknown shape family '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_degrades_with_parameter() {
        let kappa: Vec<f64> = [1.0, 0.5, 0.1]
            .iter()
            .map(|a| shape_family("flatten", *a).unwrap().shape_regularity())
            .collect();
        assert!(kappa[0] < kappa[1] && kappa[1] < kappa[2], "{kappa:?}");
        assert!((shape_family("flatten", 1.0).unwrap().volume() - 1.0 / 6.0).abs() < 1e-15);
        assert!((shape_family("flatten", 0.1).unwrap().volume() - 0.1 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn needle_at_one_is_congruent_to_reference() {
        let n = shape_family("needle", 1.0).unwrap();
        let r = Tetrahedron::reference();
        assert!((n.volume() - r.volume()).abs() < 1e-15);
        assert!((n.shape_regularity() - r.shape_regularity()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(shape_family("flatten", 0.0).is_err());
        assert!(shape_family("flatten", 1.5).is_err());
        assert!(shape_family("blob", 0.5).is_err());
        assert!(matches!(shape_family("needle", 1e-8), Err(Error::DegenerateTetrahedron { .. })));
    }
}
