use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::DistortionKind;
use crate::error::{Error, Result};
use crate::seed;

/// Distortion kinds ranked from most to least similar to the original.
///
/// A full ordering ranks all six kinds; orderings over a subset (at least two
/// kinds) restrict triplet generation to those kinds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<DistortionKind>", into = "Vec<DistortionKind>")]
pub struct DistortionOrdering {
    kinds: Vec<DistortionKind>,
}

impl DistortionOrdering {
    pub fn new(kinds: Vec<DistortionKind>) -> Result<Self> {
        if kinds.len() < 2 {
            return Err(Error::InvalidOrdering("an ordering needs at least two kinds".into()));
        }
        let unique: BTreeSet<_> = kinds.iter().collect();
        if unique.len() != kinds.len() {
            return Err(Error::InvalidOrdering(format!("repeated kind in {kinds:?}")));
        }
        Ok(Self { kinds })
    }

    /// An ordering over all six kinds.
    pub fn full(kinds: Vec<DistortionKind>) -> Result<Self> {
        if kinds.len() != DistortionKind::ALL.len() {
            return Err(Error::InvalidOrdering(format!(
                "a full ordering lists all six kinds, got {}",
                kinds.len()
            )));
        }
        Self::new(kinds)
    }

    /// Uniformly random permutation of all six kinds.
    pub fn random(rng: &mut seed::Rng) -> Self {
        let mut kinds = DistortionKind::ALL.to_vec();
        kinds.shuffle(rng);
        Self { kinds }
    }

    /// `count` distinct random full orderings; duplicates are re-drawn.
    pub fn random_distinct(count: usize, seed: u64) -> Result<Vec<Self>> {
        const PERMUTATIONS: usize = 720;
        if count == 0 || count > PERMUTATIONS {
            return Err(Error::InvalidOrdering(format!(
                "can draw between 1 and {PERMUTATIONS} distinct orderings, asked for {count}"
            )));
        }
        let mut rng = seed::rng(seed);
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let o = Self::random(&mut rng);
            if seen.insert(o.kinds.clone()) {
                out.push(o);
            }
        }
        Ok(out)
    }

    pub fn kinds(&self) -> &[DistortionKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Position of `kind`; 0 is the most similar.
    pub fn rank(&self, kind: DistortionKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    /// Whether `a` counts as more similar than `b`.
    pub fn prefers(&self, a: DistortionKind, b: DistortionKind) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(ra), Some(rb)) => ra < rb,
            _ => false,
        }
    }

    pub fn reversed(&self) -> Self {
        let mut kinds = self.kinds.clone();
        kinds.reverse();
        Self { kinds }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

impl TryFrom<Vec<DistortionKind>> for DistortionOrdering {
    type Error = Error;

    fn try_from(kinds: Vec<DistortionKind>) -> Result<Self> {
        Self::new(kinds)
    }
}

impl From<DistortionOrdering> for Vec<DistortionKind> {
    fn from(o: DistortionOrdering) -> Self {
        o.kinds
    }
}

impl fmt::Display for DistortionOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.kinds.iter().map(|k| k.name()).collect();
        f.write_str(&names.join("<"))
    }
}
