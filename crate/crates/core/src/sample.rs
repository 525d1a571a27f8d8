//! The hierarchical nerve-tree data model: trees within samples, samples
//! within subjects, subjects within diagnostic groups.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_data, Error, Result};
use crate::geometry::{find_duplicate, Point, PointPattern, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Healthy,
    Mild,
    Moderate,
}

impl Group {
    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Healthy => "healthy",
            Group::Mild => "mild",
            Group::Moderate => "moderate",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "healthy" => Ok(Group::Healthy),
            "mild" => Ok(Group::Mild),
            "moderate" => Ok(Group::Moderate),
            other => Err(invalid_data(format!(
                "unknown group '{other}' (expected healthy, mild or moderate)"
            ))),
        }
    }
}

/// A base point with the end points connected to it.
#[derive(Debug, Clone, PartialEq)]
pub struct NerveTree {
    pub tree_id: u64,
    pub base: Point,
    pub ends: Vec<Point>,
}

impl NerveTree {
    pub fn new(tree_id: u64, base: Point, ends: Vec<Point>) -> Self {
        Self {
            tree_id,
            base,
            ends,
        }
    }

    pub fn n_ends(&self) -> usize {
        self.ends.len()
    }
}

/// One biopsy image: a set of nerve trees observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct NerveSample {
    pub sample_id: String,
    pub subject_id: String,
    pub group: Group,
    trees: Vec<NerveTree>,
    window: Window,
}

impl NerveSample {
    pub fn new(
        sample_id: impl Into<String>,
        subject_id: impl Into<String>,
        group: Group,
        trees: Vec<NerveTree>,
        window: Window,
    ) -> Result<Self> {
        let sample = Self {
            sample_id: sample_id.into(),
            subject_id: subject_id.into(),
            group,
            trees,
            window,
        };
        sample.validate()?;
        Ok(sample)
    }

    fn validate(&self) -> Result<()> {
        self.window.validate()?;
        let mut ids = HashSet::with_capacity(self.trees.len());
        for tree in &self.trees {
            if !ids.insert(tree.tree_id) {
                return Err(invalid_data(format!(
                    "sample {}: duplicate tree_id {}",
                    self.sample_id, tree.tree_id
                )));
            }
            for p in std::iter::once(&tree.base).chain(&tree.ends) {
                if !p.is_finite() || !self.window.contains(p) {
                    return Err(invalid_data(format!(
                        "sample {}, tree {}: point ({}, {}) outside window",
                        self.sample_id, tree.tree_id, p.x, p.y
                    )));
                }
            }
        }
        let bases: Vec<Point> = self.trees.iter().map(|t| t.base).collect();
        if let Some((i, j)) = find_duplicate(&bases) {
            return Err(invalid_data(format!(
                "sample {}: trees {} and {} share a base point",
                self.sample_id, self.trees[i].tree_id, self.trees[j].tree_id
            )));
        }
        Ok(())
    }

    /// Same metadata with a subset of this sample's trees.
    pub(crate) fn with_trees(&self, trees: Vec<NerveTree>) -> NerveSample {
        NerveSample {
            sample_id: self.sample_id.clone(),
            subject_id: self.subject_id.clone(),
            group: self.group,
            trees,
            window: self.window,
        }
    }

    pub fn trees(&self) -> &[NerveTree] {
        &self.trees
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_ends(&self) -> usize {
        self.trees.iter().map(NerveTree::n_ends).sum()
    }

    pub fn base_points(&self) -> Vec<Point> {
        self.trees.iter().map(|t| t.base).collect()
    }

    pub fn end_points(&self) -> Vec<Point> {
        self.trees.iter().flat_map(|t| t.ends.iter().copied()).collect()
    }

    pub fn bases(&self) -> PointPattern {
        PointPattern::from_trusted(self.base_points(), self.window)
    }

    /// End points as a pattern. Coincident end points are not rejected here.
    pub fn ends(&self) -> PointPattern {
        PointPattern::from_trusted(self.end_points(), self.window)
    }
}

/// A collection of samples, keyed by `(subject_id, sample_id)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    samples: Vec<NerveSample>,
}

impl SampleSet {
    pub fn new(samples: Vec<NerveSample>) -> Result<Self> {
        let mut keys = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !keys.insert((s.subject_id.as_str(), s.sample_id.as_str())) {
                return Err(invalid_data(format!(
                    "duplicate (subject_id, sample_id) = ({}, {})",
                    s.subject_id, s.sample_id
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[NerveSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<NerveSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn group(&self, group: Group) -> SampleSet {
        SampleSet {
            samples: self
                .samples
                .iter()
                .filter(|s| s.group == group)
                .cloned()
                .collect(),
        }
    }

    /// Samples grouped by subject, subjects in sorted order.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<&NerveSample>> {
        let mut map: BTreeMap<&str, Vec<&NerveSample>> = BTreeMap::new();
        for s in &self.samples {
            map.entry(s.subject_id.as_str()).or_default().push(s);
        }
        map
    }

    pub fn find(&self, sample_id: &str) -> Option<&NerveSample> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(id: u64, base: (f64, f64), ends: &[(f64, f64)]) -> NerveTree {
        NerveTree::new(
            id,
            Point::new(base.0, base.1),
            ends.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        )
    }

    #[test]
    fn sample_invariants() {
        let w = Window::default();
        let ok = NerveSample::new(
            "s1",
            "p1",
            Group::Healthy,
            vec![tree(1, (10.0, 10.0), &[(12.0, 11.0)]), tree(2, (50.0, 50.0), &[])],
            w,
        )
        .unwrap();
        assert_eq!(ok.n_trees(), 2);
        assert_eq!(ok.n_ends(), 1);
        assert_eq!(ok.bases().len(), 2);

        let dup_id = NerveSample::new(
            "s1",
            "p1",
            Group::Healthy,
            vec![tree(1, (10.0, 10.0), &[]), tree(1, (20.0, 10.0), &[])],
            w,
        );
        assert!(dup_id.is_err());
        let dup_base = NerveSample::new(
            "s1",
            "p1",
            Group::Mild,
            vec![tree(1, (10.0, 10.0), &[]), tree(2, (10.0, 10.0), &[])],
            w,
        );
        assert!(dup_base.is_err());
        let outside = NerveSample::new(
            "s1",
            "p1",
            Group::Mild,
            vec![tree(1, (10.0, 10.0), &[(500.0, 1.0)])],
            w,
        );
        assert!(outside.is_err());
    }

    #[test]
    fn set_keys_unique() {
        let w = Window::default();
        let s = NerveSample::new("a", "p", Group::Healthy, vec![], w).unwrap();
        assert!(SampleSet::new(vec![s.clone(), s.clone()]).is_err());
        let mut t = s.clone();
        t.subject_id = "q".into();
        let set = SampleSet::new(vec![s, t]).unwrap();
        assert_eq!(set.by_subject().len(), 2);
    }

    #[test]
    fn group_parsing() {
        assert_eq!("mild".parse::<Group>().unwrap(), Group::Mild);
        assert!("severe".parse::<Group>().is_err());
    }
}
