//! Sweep configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::shapes::shape_family;
use crate::element::FaceSet;
use crate::error::{Error, Result};
use crate::geometry::Tetrahedron;
use crate::polyspace::MAX_DEGREE;
use crate::problems::ProblemKind;

/// One tetrahedron of a sweep: either explicit vertices or a named family
/// with its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TetSpec {
    /// Label used in the `tet_id` column; derived from the family when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<[[f64; 3]; 4]>,
}

impl TetSpec {
    pub fn family(name: &str, parameter: f64) -> Self {
        Self {
            id: None,
            family: Some(name.to_string()),
            parameter: Some(parameter),
            vertices: None,
        }
    }

    pub fn reference() -> Self {
        Self {
            id: None,
            family: Some("reference".to_string()),
            parameter: None,
            vertices: None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        match (&self.family, self.parameter) {
            (Some(f), Some(a)) if f != "reference" => format!("{f}-{a}"),
            (Some(f), _) => f.clone(),
            _ => "custom".to_string(),
        }
    }

    pub fn build(&self) -> Result<Tetrahedron> {
        match (&self.vertices, &self.family) {
            (Some(v), None) => Tetrahedron::from_arrays(*v),
            (None, Some(f)) if f == "reference" => Ok(Tetrahedron::reference()),
            (None, Some(f)) => {
                let a = self
                    .parameter
                    .ok_or_else(|| Error::InvalidConfig(format!("family '{f}' needs a parameter")))?;
                shape_family(f, a)
            }
            (Some(_), Some(_)) => Err(Error::InvalidConfig("give either vertices or a family, not both".into())),
            (None, None) => Err(Error::InvalidConfig("tetrahedron needs vertices or a family".into())),
        }
    }
}

/// Which face subsets are swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaceSubsetSelector {
    /// `"representative"` (one subset per size) or `"all"` (all sixteen).
    Named(String),
    /// Explicit bitmasks, bit `i` standing for face `i`.
    Masks(Vec<u8>),
}

impl Default for FaceSubsetSelector {
    fn default() -> Self {
        FaceSubsetSelector::Named("representative".to_string())
    }
}

impl FaceSubsetSelector {
    pub fn resolve(&self) -> Result<Vec<FaceSet>> {
        match self {
            FaceSubsetSelector::Named(n) if n == "representative" => Ok(FaceSet::representatives()),
            FaceSubsetSelector::Named(n) if n == "all" => Ok(FaceSet::all_subsets()),
            FaceSubsetSelector::Named(n) => Err(Error::InvalidConfig(format!(
                "face_subsets must be \"representative\", \"all\" or a list of masks, got \"{n}\""
            ))),
            FaceSubsetSelector::Masks(m) => {
                if let Some(bad) = m.iter().find(|x| **x > 15) {
                    return Err(Error::InvalidConfig(format!("face mask {bad} exceeds 15")));
                }
                let mut sets: Vec<FaceSet> = m.iter().map(|x| FaceSet::from_mask(*x)).collect();
                sets.sort();
                sets.dedup();
                Ok(sets)
            }
        }
    }
}

fn default_kinds() -> Vec<String> {
    ProblemKind::ALL.iter().map(|k| k.to_string()).collect()
}

fn default_delta() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tetrahedra: Vec<TetSpec>,
    pub p_min: usize,
    pub p_max: usize,
    #[serde(default)]
    pub face_subsets: FaceSubsetSelector,
    pub trials: usize,
    pub seed: u64,
    /// Degree increment of the reference proxy.
    #[serde(default = "default_delta")]
    pub delta: usize,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
    /// Replace every datum by zero (smoke test of the 0/0 convention).
    #[serde(default)]
    pub zero_data: bool,
    /// Default CSV destination; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    /// The default sweep: reference element and two flattened elements,
    /// degrees 0 to 6, representative subsets, 10 trials, delta 3.
    pub fn default_sweep() -> Self {
        Self {
            tetrahedra: vec![TetSpec::reference(), TetSpec::family("flatten", 0.5), TetSpec::family("flatten", 0.1)],
            p_min: 0,
            p_max: 6,
            face_subsets: FaceSubsetSelector::default(),
            trials: 10,
            seed: 20_240_601,
            delta: 3,
            kinds: default_kinds(),
            zero_data: false,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: SweepConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.tetrahedra.is_empty() {
            return bad("at least one tetrahedron is required".into());
        }
        if self.p_min > self.p_max {
            return bad(format!("p_min {} exceeds p_max {}", self.p_min, self.p_max));
        }
        if self.p_max + self.delta > MAX_DEGREE {
            return bad(format!(
                "p_max + delta = {} exceeds the largest supported degree {MAX_DEGREE}",
                self.p_max + self.delta
            ));
        }
        self.problem_kinds()?;
        self.face_subsets.resolve()?;
        let mut labels = Vec::new();
        for spec in &self.tetrahedra {
            spec.build()?;
            let label = spec.label();
            if labels.contains(&label) {
                return bad(format!("duplicate tetrahedron id '{label}'"));
            }
            labels.push(label);
        }
        Ok(())
    }

    pub fn problem_kinds(&self) -> Result<Vec<ProblemKind>> {
        if self.kinds.is_empty() {
            return Err(Error::InvalidConfig("kinds must not be empty".into()));
        }
        let mut kinds = self
            .kinds
            .iter()
            .map(|k| k.parse::<ProblemKind>().map_err(|e| Error::InvalidConfig(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        kinds.sort();
        kinds.dedup();
        Ok(kinds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
p_min = 0
p_max = 2
trials = 3
seed = 7
kinds = ["hcurl", "trace_only"]
face_subsets = [0, 5]

[[tetrahedra]]
family = "reference"

[[tetrahedra]]
id = "flat"
family = "flatten"
parameter = 0.25

[[tetrahedra]]
vertices = [[0, 0, 0], [2, 0, 0], [0, 1, 0], [0, 0, 1]]
"#;

    #[test]
    fn parses_sample() {
        let c = SweepConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.delta, 3);
        assert_eq!(c.tetrahedra.len(), 3);
        assert_eq!(c.tetrahedra[1].label(), "flat");
        assert_eq!(c.tetrahedra[2].label(), "custom");
        assert_eq!(c.face_subsets.resolve().unwrap(), vec![FaceSet::from_mask(0), FaceSet::from_mask(5)]);
        assert_eq!(c.problem_kinds().unwrap(), vec![ProblemKind::Hcurl, ProblemKind::TraceOnly]);
    }

    #[test]
    fn round_trips() {
        let c = SweepConfig::default_sweep();
        assert_eq!(SweepConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_invalid() {
        let zero_trials = SAMPLE.replace("trials = 3", "trials = 0");
        assert!(matches!(SweepConfig::from_toml(&zero_trials), Err(Error::InvalidConfig(_))));
        let too_high = SAMPLE.replace("p_max = 2", "p_max = 9");
        assert!(SweepConfig::from_toml(&too_high).is_err());
        let bad_kind = SAMPLE.replace("\"trace_only\"", "\"maxwell\"");
        assert!(SweepConfig::from_toml(&bad_kind).is_err());
        let bad_mask = SAMPLE.replace("[0, 5]", "[16]");
        assert!(SweepConfig::from_toml(&bad_mask).is_err());
        assert!(SweepConfig::from_toml(&format!("{SAMPLE}\nunknown = 1")).is_err());
    }
}
