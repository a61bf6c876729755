//! Per-tetrahedron cache of bases, operator matrices and factorized
//! constraint systems.
//!
//! Every entry is built at most once; concurrent requests for the same key
//! wait for the first builder.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

use crate::calculus::{self, OperatorMatrix};
use crate::error::Result;
use crate::geometry::Tetrahedron;
use crate::minsolve::LeastNormFactor;
use crate::polyspace::{orthonormal_basis, PolySpaceBasis, SpaceTag};

/// Subset of the four faces, stored as a bitmask (bit `i` = face `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FaceSet(u8);

impl FaceSet {
    pub const EMPTY: FaceSet = FaceSet(0);
    pub const ALL: FaceSet = FaceSet(0b1111);

    pub fn from_mask(mask: u8) -> Self {
        FaceSet(mask & 0b1111)
    }

    pub fn from_faces(faces: &[usize]) -> Self {
        FaceSet(faces.iter().fold(0u8, |m, f| m | (1 << f)) & 0b1111)
    }

    pub fn mask(&self) -> u8 {
        self.0
    }

    pub fn contains(&self, face: usize) -> bool {
        face < 4 && self.0 & (1 << face) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..4).filter(move |f| self.contains(*f))
    }

    pub fn without(&self, face: usize) -> Self {
        FaceSet(self.0 & !(1 << face))
    }

    /// One subset per cardinality: {}, {0}, {0,1}, {0,1,2}, {0,1,2,3}.
    pub fn representatives() -> Vec<FaceSet> {
        vec![FaceSet(0), FaceSet(1), FaceSet(3), FaceSet(7), FaceSet(15)]
    }

    pub fn all_subsets() -> Vec<FaceSet> {
        (0..16).map(FaceSet).collect()
    }
}

impl fmt::Display for FaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let faces: Vec<String> = self.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", faces.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKey {
    Curl(usize),
    Divergence(usize),
    Gradient(usize),
    TangentialTrace { degree: usize, face: usize },
    NormalTrace { degree: usize, face: usize },
    SurfaceCurl { degree: usize, face: usize },
    Transfer { from: SpaceTag, to: SpaceTag },
}

/// Which constraint operators a system stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemFamily {
    /// Curl rows followed by tangential trace rows (N_p unknowns).
    Curl,
    /// Divergence rows followed by normal trace rows (RT_p unknowns).
    Divergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemKey {
    pub family: SystemFamily,
    pub degree: usize,
    pub faces: FaceSet,
}

struct Cache<K, V> {
    slots: Mutex<HashMap<K, Arc<OnceLock<Result<V>>>>>,
}

impl<K: Eq + Hash + Copy, V: Clone> Cache<K, V> {
    fn new() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
        }
    }

    fn get_or_build(&self, key: K, build: impl FnOnce() -> Result<V>) -> Result<V> {
        let slot = {
            let mut map = self.slots.lock().expect("cache lock poisoned");
            Arc::clone(map.entry(key).or_default())
        };
        slot.get_or_init(build).clone()
    }
}

/// A tetrahedron together with lazily built discrete spaces on it.
pub struct ElementSpaces {
    tet: Arc<Tetrahedron>,
    bases: Cache<SpaceTag, Arc<PolySpaceBasis>>,
    operators: Cache<OperatorKey, Arc<OperatorMatrix>>,
    factors: Cache<SystemKey, Arc<LeastNormFactor>>,
}

impl fmt::Debug for ElementSpaces {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ElementSpaces").field("tet", &self.tet).finish_non_exhaustive()
    }
}

impl ElementSpaces {
    pub fn new(tet: Tetrahedron) -> Arc<Self> {
        Arc::new(Self {
            tet: Arc::new(tet),
            bases: Cache::new(),
            operators: Cache::new(),
            factors: Cache::new(),
        })
    }

    pub fn tetrahedron(&self) -> &Arc<Tetrahedron> {
        &self.tet
    }

    pub fn basis(&self, tag: SpaceTag) -> Result<Arc<PolySpaceBasis>> {
        self.bases
            .get_or_build(tag, || orthonormal_basis(tag, &self.tet).map(Arc::new))
    }

    pub fn operator(&self, key: OperatorKey) -> Result<Arc<OperatorMatrix>> {
        self.operators.get_or_build(key, || {
            let op = match key {
                OperatorKey::Curl(p) => calculus::curl_matrix(self, p),
                OperatorKey::Divergence(p) => calculus::div_matrix(self, p),
                OperatorKey::Gradient(p) => calculus::gradient_matrix(self, p),
                OperatorKey::TangentialTrace { degree, face } => {
                    calculus::tangential_trace_matrix(self, degree, face)
                }
                OperatorKey::NormalTrace { degree, face } => calculus::normal_trace_matrix(self, degree, face),
                OperatorKey::SurfaceCurl { degree, face } => calculus::surface_curl_matrix(self, degree, face),
                OperatorKey::Transfer { from, to } => calculus::transfer_matrix(self, from, to),
            };
            op.map(Arc::new)
        })
    }

    pub(crate) fn factor(
        &self,
        key: SystemKey,
        build: impl FnOnce() -> Result<LeastNormFactor>,
    ) -> Result<Arc<LeastNormFactor>> {
        self.factors.get_or_build(key, || build().map(Arc::new))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_sets() {
        let s = FaceSet::from_faces(&[0, 2]);
        assert_eq!(s.mask(), 5);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.without(0), FaceSet::from_mask(4));
        assert_eq!(s.to_string(), "{0,2}");
        assert_eq!(FaceSet::representatives().len(), 5);
    }

    #[test]
    fn bases_are_cached() {
        let spaces = ElementSpaces::new(Tetrahedron::reference());
        let a = spaces.basis(SpaceTag::Nedelec(1)).unwrap();
        let b = spaces.basis(SpaceTag::Nedelec(1)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
