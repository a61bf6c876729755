//! Randomized sweeps over elements, degrees, face subsets and trials.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::SweepConfig;
use crate::calculus::TraceData;
use crate::element::{ElementSpaces, FaceSet};
use crate::error::{Error, Result};
use crate::polyspace::SpaceTag;
use crate::problems::{
    generate_compatible_hcurl_data, generate_compatible_hdiv_data, generate_curl_free_data, reference_min_norm,
    HcurlProblem, HdivProblem, Problem, ProblemKind,
};

/// One solved problem. Field names double as the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub tet_id: String,
    pub kappa_k: f64,
    pub p: usize,
    /// Bitmask, bit `i` standing for face `i`.
    pub face_subset: u8,
    pub trial: usize,
    pub problem_kind: ProblemKind,
    pub discrete_norm: f64,
    pub reference_norm: f64,
    /// `discrete_norm / reference_norm`, with `0/0 = 1`.
    pub ratio: f64,
    /// Constraint residual of the discrete minimizer over `1 + |data|`.
    pub feasibility_residual: f64,
    pub rank: usize,
    pub wall_time_ms: f64,
}

pub const CSV_HEADER: [&str; 12] = [
    "tet_id",
    "kappa_K",
    "p",
    "face_subset",
    "trial",
    "problem_kind",
    "discrete_norm",
    "reference_norm",
    "ratio",
    "feasibility_residual",
    "rank",
    "wall_time_ms",
];

/// Diagnostics kept next to each record but not written to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordDetail {
    /// Largest increase of the enriched norms along `p, p+1, ..., p+delta`,
    /// relative to the data scale.
    pub enrichment_increase: f64,
    /// Relative gap between the last two enriched norms.
    pub stabilization_gap: f64,
    /// Solver or validation failure, if any.
    pub error: Option<String>,
}

/// Per-(tetrahedron, kind) summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub tet_id: String,
    pub kappa_k: f64,
    pub problem_kind: ProblemKind,
    /// `(p, max ratio at p)`.
    pub max_ratio_by_p: Vec<(usize, f64)>,
    pub max_ratio: f64,
    /// Least-squares slope of `log(max ratio at p)` against `p`.
    pub log_slope: f64,
    /// `max ratio / max ratio at the lowest degree`.
    pub growth_over_lowest: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub details: Vec<RecordDetail>,
    pub summary: Vec<SeriesSummary>,
    pub elapsed_ms: f64,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.details.iter().filter(|d| d.error.is_some()).count()
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, a function of the cell only (never of scheduling or
/// of the position of the element in the configuration).
pub fn trial_seed(master: u64, tet_id: &str, p: usize, faces: FaceSet, trial: usize, kind: ProblemKind) -> u64 {
    let tet = tet_id.bytes().fold(mix(tet_id.len() as u64), |h, b| mix(h ^ b as u64));
    [tet, p as u64, faces.mask() as u64, trial as u64, kind as u64]
        .iter()
        .fold(mix(master), |h, v| mix(h ^ v))
}

fn zero_problem(spaces: &Arc<ElementSpaces>, kind: ProblemKind, p: usize, faces: FaceSet) -> Result<Problem> {
    Ok(match kind {
        ProblemKind::Hdiv => {
            let r_k = DVector::zeros(spaces.basis(SpaceTag::ScalarP(p))?.dim());
            let r_f = faces
                .iter()
                .map(|face| Ok((face, DVector::zeros(spaces.basis(SpaceTag::FaceScalarP { degree: p, face })?.dim()))))
                .collect::<Result<Vec<_>>>()?;
            Problem::Hdiv(HdivProblem::new(Arc::clone(spaces), p, faces, r_k, r_f)?)
        }
        _ => {
            let r_k = DVector::zeros(spaces.basis(SpaceTag::RaviartThomas(p))?.dim());
            let mut r_f = TraceData::empty(p);
            for face in faces.iter() {
                r_f.faces.push((face, DVector::zeros(spaces.basis(SpaceTag::FaceTrace { degree: p, face })?.dim())));
            }
            Problem::Hcurl(HcurlProblem::new(Arc::clone(spaces), p, faces, r_k, r_f)?)
        }
    })
}

/// The problem of one sweep cell.
pub fn make_problem(
    spaces: &Arc<ElementSpaces>,
    kind: ProblemKind,
    p: usize,
    faces: FaceSet,
    seed: u64,
    zero_data: bool,
) -> Result<Problem> {
    if !kind.admits(faces) {
        return Err(Error::InvalidParameter(format!("{kind} is not defined for faces {faces}")));
    }
    if zero_data {
        return zero_problem(spaces, kind, p, faces);
    }
    Ok(match kind {
        ProblemKind::Hcurl | ProblemKind::CurlOnly => Problem::Hcurl(generate_compatible_hcurl_data(spaces, p, faces, seed)?),
        ProblemKind::TraceOnly => Problem::Hcurl(generate_curl_free_data(spaces, p, faces, seed)?),
        ProblemKind::Hdiv => Problem::Hdiv(generate_compatible_hdiv_data(spaces, p, faces, seed)?),
    })
}

/// `discrete / reference` with `0/0 = 1`.
pub fn norm_ratio(discrete: f64, reference: f64) -> f64 {
    if reference == 0.0 && discrete == 0.0 {
        1.0
    } else {
        discrete / reference
    }
}

struct Cell {
    tet: usize,
    kind: ProblemKind,
    p: usize,
    faces: FaceSet,
    trial: usize,
}

fn run_cell(
    config: &SweepConfig,
    spaces: &Arc<ElementSpaces>,
    tet_id: &str,
    kappa: f64,
    cell: &Cell,
) -> (SweepRecord, RecordDetail) {
    let start = Instant::now();
    let seed = trial_seed(config.seed, tet_id, cell.p, cell.faces, cell.trial, cell.kind);
    let outcome = (|| -> Result<(f64, f64, f64, usize, f64, f64)> {
        let problem = make_problem(spaces, cell.kind, cell.p, cell.faces, seed, config.zero_data)?;
        let scale = problem.scale();
        let result = problem.solve()?;
        let reference = reference_min_norm(&problem, config.delta)?;
        Ok((
            result.norm,
            reference.value,
            result.residual / scale,
            result.rank,
            reference.max_increase / scale,
            reference.relative_gap,
        ))
    })();
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut record = SweepRecord {
        tet_id: tet_id.to_string(),
        kappa_k: kappa,
        p: cell.p,
        face_subset: cell.faces.mask(),
        trial: cell.trial,
        problem_kind: cell.kind,
        discrete_norm: f64::NAN,
        reference_norm: f64::NAN,
        ratio: f64::NAN,
        feasibility_residual: f64::NAN,
        rank: 0,
        wall_time_ms,
    };
    let detail = match outcome {
        Ok((discrete, reference, residual, rank, increase, gap)) => {
            record.discrete_norm = discrete;
            record.reference_norm = reference;
            record.ratio = norm_ratio(discrete, reference);
            record.feasibility_residual = residual;
            record.rank = rank;
            RecordDetail {
                enrichment_increase: increase,
                stabilization_gap: gap,
                error: None,
            }
        }
        Err(e) => RecordDetail {
            enrichment_increase: f64::NAN,
            stabilization_gap: f64::NAN,
            error: Some(e.to_string()),
        },
    };
    (record, detail)
}

/// Runs the sweep on `threads` workers (all cores when `None`).
///
/// Records come back in the canonical order (tet_id, kind, p, subset, trial),
/// and every random stream depends only on its cell, so the output does not
/// depend on the number of workers.
pub fn run_sweep(config: &SweepConfig, threads: Option<usize>) -> Result<SweepOutcome> {
    config.validate()?;
    let start = Instant::now();
    let kinds = config.problem_kinds()?;
    let subsets = config.face_subsets.resolve()?;
    let mut elements = Vec::new();
    for spec in &config.tetrahedra {
        let tet = spec.build()?;
        let kappa = tet.shape_regularity();
        elements.push((spec.label(), kappa, ElementSpaces::new(tet)));
    }

    let mut cells = Vec::new();
    for tet in 0..elements.len() {
        for &kind in &kinds {
            for p in config.p_min..=config.p_max {
                for &faces in subsets.iter().filter(|f| kind.admits(**f)) {
                    for trial in 0..config.trials {
                        cells.push(Cell {
                            tet,
                            kind,
                            p,
                            faces,
                            trial,
                        });
                    }
                }
            }
        }
    }

    cells.sort_by(|a, b| {
        (&elements[a.tet].0, a.kind, a.p, a.faces, a.trial).cmp(&(&elements[b.tet].0, b.kind, b.p, b.faces, b.trial))
    });

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParameter("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    // highest degrees first so the long cells do not trail at the end
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(cells[i].p));
    let mut results: Vec<(usize, SweepRecord, RecordDetail)> = pool.install(|| {
        order
            .par_iter()
            .map(|&i| {
                let cell = &cells[i];
                let (id, kappa, spaces) = &elements[cell.tet];
                let (record, detail) = run_cell(config, spaces, id, *kappa, cell);
                (i, record, detail)
            })
            .collect()
    });
    results.sort_by_key(|(i, _, _)| *i);
    let (records, details): (Vec<_>, Vec<_>) = results.into_iter().map(|(_, r, d)| (r, d)).unzip();
    let summary = summarize(&records);
    Ok(SweepOutcome {
        records,
        details,
        summary,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Least-squares slope of `y` against `x`; zero for fewer than two points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Groups records by (tetrahedron, kind) in first-appearance order.
pub fn summarize(records: &[SweepRecord]) -> Vec<SeriesSummary> {
    let mut out: Vec<SeriesSummary> = Vec::new();
    for r in records {
        let idx = match out.iter().position(|s| s.tet_id == r.tet_id && s.problem_kind == r.problem_kind) {
            Some(i) => i,
            None => {
                out.push(SeriesSummary {
                    tet_id: r.tet_id.clone(),
                    kappa_k: r.kappa_k,
                    problem_kind: r.problem_kind,
                    max_ratio_by_p: Vec::new(),
                    max_ratio: f64::NEG_INFINITY,
                    log_slope: 0.0,
                    growth_over_lowest: 1.0,
                    failures: 0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        if !r.ratio.is_finite() {
            s.failures += 1;
            continue;
        }
        match s.max_ratio_by_p.iter_mut().find(|(p, _)| *p == r.p) {
            Some((_, m)) => *m = m.max(r.ratio),
            None => s.max_ratio_by_p.push((r.p, r.ratio)),
        }
        s.max_ratio = s.max_ratio.max(r.ratio);
    }
    for s in &mut out {
        s.max_ratio_by_p.sort_by_key(|(p, _)| *p);
        let pts: Vec<(f64, f64)> = s
            .max_ratio_by_p
            .iter()
            .filter(|(_, m)| *m > 0.0)
            .map(|(p, m)| (*p as f64, m.ln()))
            .collect();
        s.log_slope = least_squares_slope(&pts);
        if let Some((_, lowest)) = s.max_ratio_by_p.first() {
            s.growth_over_lowest = s.max_ratio / lowest;
        }
    }
    out
}

fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes records as CSV with 17 significant digits.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.tet_id.clone(),
            format_float(r.kappa_k),
            r.p.to_string(),
            r.face_subset.to_string(),
            r.trial.to_string(),
            r.problem_kind.to_string(),
            format_float(r.discrete_norm),
            format_float(r.reference_norm),
            format_float(r.ratio),
            format_float(r.feasibility_residual),
            r.rank.to_string(),
            format!("{:.3}", r.wall_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[SweepRecord], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(records, std::fs::File::create(path)?)
}

/// Reads records written by [`write_csv`]. An empty input yields no rows.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h?,
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidParameter(format!(
            "unexpected CSV header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rows.enumerate() {
        let row = row?;
        let bad = |field: &str| Error::InvalidParameter(format!("row {}: bad {field}", line + 2));
        let float = |i: usize, name: &str| row[i].parse::<f64>().map_err(|_| bad(name));
        let int = |i: usize, name: &str| row[i].parse::<usize>().map_err(|_| bad(name));
        out.push(SweepRecord {
            tet_id: row[0].to_string(),
            kappa_k: float(1, "kappa_K")?,
            p: int(2, "p")?,
            face_subset: row[3].parse().map_err(|_| bad("face_subset"))?,
            trial: int(4, "trial")?,
            problem_kind: row[5].parse().map_err(|_| bad("problem_kind"))?,
            discrete_norm: float(6, "discrete_norm")?,
            reference_norm: float(7, "reference_norm")?,
            ratio: float(8, "ratio")?,
            feasibility_residual: float(9, "feasibility_residual")?,
            rank: int(10, "rank")?,
            wall_time_ms: float(11, "wall_time_ms")?,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

/// Human-readable summary table.
pub fn format_summary(summary: &[SeriesSummary]) -> String {
    let mut out = String::from("tet_id            kappa_K  kind        max_ratio  log_slope  growth  failures\n");
    for s in summary {
        out.push_str(&format!(
            "{:<16} {:>8.3}  {:<10} {:>10.4} {:>10.4} {:>7.3} {:>9}\n",
            s.tet_id,
            s.kappa_k,
            s.problem_kind.as_str(),
            s.max_ratio,
            s.log_slope,
            s.growth_over_lowest,
            s.failures
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{FaceSubsetSelector, TetSpec};

    fn small_config() -> SweepConfig {
        SweepConfig {
            tetrahedra: vec![TetSpec::reference(), TetSpec::family("flatten", 0.5)],
            p_min: 0,
            p_max: 2,
            face_subsets: FaceSubsetSelector::Masks(vec![0, 1, 15]),
            trials: 2,
            seed: 3,
            delta: 1,
            kinds: vec!["hcurl".into(), "hdiv".into(), "curl_only".into(), "trace_only".into()],
            zero_data: false,
            output: None,
        }
    }

    #[test]
    fn seeds_differ_per_cell() {
        let a = trial_seed(1, "a", 2, FaceSet::from_mask(3), 4, ProblemKind::Hcurl);
        assert_ne!(a, trial_seed(1, "a", 2, FaceSet::from_mask(3), 5, ProblemKind::Hcurl));
        assert_ne!(a, trial_seed(1, "a", 2, FaceSet::from_mask(3), 4, ProblemKind::Hdiv));
        assert_ne!(a, trial_seed(2, "a", 2, FaceSet::from_mask(3), 4, ProblemKind::Hcurl));
        assert_ne!(a, trial_seed(1, "b", 2, FaceSet::from_mask(3), 4, ProblemKind::Hcurl));
        assert_eq!(a, trial_seed(1, "a", 2, FaceSet::from_mask(3), 4, ProblemKind::Hcurl));
    }

    #[test]
    fn sweep_is_deterministic_and_sane() {
        let config = small_config();
        let a = run_sweep(&config, Some(1)).unwrap();
        let b = run_sweep(&config, Some(4)).unwrap();
        // hcurl 3 + hdiv 3 + curl_only 1 + trace_only 2 subsets, 3 degrees, 2 trials, 2 elements
        assert_eq!(a.records.len(), 9 * 3 * 2 * 2);
        assert_eq!(a.failures(), 0, "{:?}", a.details.iter().find(|d| d.error.is_some()));
        let strip = |o: &SweepOutcome| {
            let mut v = Vec::new();
            write_csv(&o.records.iter().cloned().map(|mut r| { r.wall_time_ms = 0.0; r }).collect::<Vec<_>>(), &mut v).unwrap();
            v
        };
        assert_eq!(strip(&a), strip(&b));
        for r in &a.records {
            assert!(r.ratio >= 1.0 - 1e-8, "{r:?}");
            assert!(r.feasibility_residual <= 1e-9, "{r:?}");
        }
        assert_eq!(a.summary.len(), 8);
    }

    #[test]
    fn zero_data_gives_unit_ratios() {
        let mut config = small_config();
        config.zero_data = true;
        let out = run_sweep(&config, Some(2)).unwrap();
        assert!(out.records.iter().all(|r| r.ratio == 1.0));
    }

    #[test]
    fn csv_round_trip() {
        let out = run_sweep(&SweepConfig { p_max: 0, ..small_config() }, Some(2)).unwrap();
        let mut bytes = Vec::new();
        write_csv(&out.records, &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("tet_id,kappa_K,p,face_subset,trial,problem_kind,discrete_norm"));
        let back = read_csv(&bytes[..]).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in back.iter().zip(&out.records) {
            assert_eq!(a.discrete_norm, b.discrete_norm);
            assert_eq!(a.ratio, b.ratio);
            assert_eq!(a.problem_kind, b.problem_kind);
        }
        assert!(read_csv(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn slope() {
        assert_eq!(least_squares_slope(&[(0.0, 1.0)]), 0.0);
        assert!((least_squares_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ratio_convention() {
        assert_eq!(norm_ratio(0.0, 0.0), 1.0);
        assert_eq!(norm_ratio(2.0, 1.0), 2.0);
    }
}
