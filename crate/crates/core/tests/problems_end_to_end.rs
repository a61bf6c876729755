use std::sync::Arc;

use minnorm::element::{ElementSpaces, FaceSet};
use minnorm::geometry::Tetrahedron;
use minnorm::harness::shape_family;
use minnorm::problems::{
    generate_compatible_hcurl_data, generate_compatible_hdiv_data, reference_min_norm, Problem, ProblemKind,
};

fn spaces(tet: Tetrahedron) -> Arc<ElementSpaces> {
    ElementSpaces::new(tet)
}

#[test]
fn hcurl_on_reference_is_feasible_up_to_degree_four() {
    let s = spaces(Tetrahedron::reference());
    for p in 0..=4 {
        for faces in FaceSet::representatives() {
            for trial in 0..5 {
                let problem = generate_compatible_hcurl_data(&s, p, faces, 100 * p as u64 + trial).unwrap();
                assert!(problem.is_valid());
                let r = Problem::Hcurl(problem.clone()).solve().unwrap();
                assert!(r.residual <= 1e-9 * problem.scale(), "p={p} faces={faces}: {}", r.residual);
                // the generating field is feasible, so the minimum is no larger
                assert!(r.norm <= problem.generator.as_ref().unwrap().norm() + 1e-12);
            }
        }
    }
}

#[test]
fn enriched_norms_do_not_increase() {
    let s = spaces(shape_family("flatten", 0.5).unwrap());
    for (i, faces) in FaceSet::representatives().into_iter().enumerate() {
        let hcurl = Problem::Hcurl(generate_compatible_hcurl_data(&s, 1, faces, i as u64).unwrap());
        let hdiv = Problem::Hdiv(generate_compatible_hdiv_data(&s, 1, faces, i as u64).unwrap());
        for problem in [hcurl, hdiv] {
            let report = reference_min_norm(&problem, 4).unwrap();
            for w in report.values.windows(2) {
                assert!(w[1] <= w[0] + 1e-10 * problem.scale(), "{:?}", report.values);
            }
            assert!(report.value > 0.0);
        }
    }
}

#[test]
fn problem_text_round_trip() {
    let s = spaces(shape_family("needle", 0.4).unwrap());
    let original = Problem::Hdiv(generate_compatible_hdiv_data(&s, 2, FaceSet::from_faces(&[0, 3]), 9).unwrap());
    let restored = Problem::from_text(&original.to_text()).unwrap();
    let (a, b) = (original.solve().unwrap(), restored.solve().unwrap());
    assert!((a.norm - b.norm).abs() <= 1e-13 * (1.0 + a.norm));
}

#[test]
fn kinds_and_face_sets() {
    assert!(ProblemKind::CurlOnly.admits(FaceSet::EMPTY));
    assert!(!ProblemKind::CurlOnly.admits(FaceSet::ALL));
    assert!(!ProblemKind::TraceOnly.admits(FaceSet::EMPTY));
    for kind in ProblemKind::ALL {
        assert_eq!(kind.as_str().parse::<ProblemKind>().unwrap(), kind);
    }
}

#[test]
fn minimum_is_invariant_under_rigid_motion() {
    // the reference element rotated about the z axis
    let (c, sn) = (0.6f64, 0.8f64);
    let moved = Tetrahedron::from_arrays([
        [c, sn, 0.0],
        [-sn, c, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0],
    ])
    .unwrap();
    let a = spaces(Tetrahedron::reference());
    let b = spaces(moved);
    let pa = generate_compatible_hdiv_data(&a, 0, FaceSet::EMPTY, 1).unwrap();
    let pb = generate_compatible_hdiv_data(&b, 0, FaceSet::EMPTY, 1).unwrap();
    // for constant divergence the minimum is |r_K| times a congruence invariant
    let ra = Problem::Hdiv(pa.clone()).solve().unwrap().norm / pa.r_k.norm();
    let rb = Problem::Hdiv(pb.clone()).solve().unwrap().norm / pb.r_k.norm();
    assert!((ra - rb).abs() <= 1e-12, "{ra} {rb}");
}
