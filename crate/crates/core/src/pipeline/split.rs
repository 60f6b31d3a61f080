//! Stratified video-level train/validation/test partitioning.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::landmark_data::Label;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl Fractions {
    fn validate(&self) -> Result<(), PipelineError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(PipelineError::InvalidFractions(*self));
        }
        Ok(())
    }
}

/// Floor of `n * fraction`, tolerant of the representation error in
/// fractions such as 0.15.
fn floor_share(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 1e-9).floor() as usize
}

/// Video counts `(train, validation, test)`: validation and test are floored,
/// the remainder goes to train.
pub fn partition_sizes(n: usize, fractions: &Fractions) -> (usize, usize, usize) {
    let test = floor_share(n, fractions.test);
    let validation = floor_share(n, fractions.validation);
    (n - test - validation, validation, test)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn partition_of(&self, video_id: &str) -> Option<Partition> {
        [
            (Partition::Train, &self.train),
            (Partition::Validation, &self.validation),
            (Partition::Test, &self.test),
        ]
        .into_iter()
        .find(|(_, ids)| ids.iter().any(|v| v == video_id))
        .map(|(p, _)| p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// Shuffles each class with `seed`, interleaves the classes so that every
/// prefix is close to the corpus class ratio, then takes test, validation
/// and train in that order.
pub fn split(videos: &[(String, Label)], fractions: &Fractions, seed_value: u64) -> Result<SplitPlan, PipelineError> {
    fractions.validate()?;
    let mut by_class: BTreeMap<Label, BTreeSet<&str>> = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for (id, label) in videos {
        if let Some(prev) = seen.insert(id.as_str(), *label) {
            if prev != *label {
                return Err(PipelineError::ConflictingLabel(id.clone()));
            }
        }
        by_class.entry(*label).or_default().insert(id);
    }
    if seen.len() < 3 {
        return Err(PipelineError::TooFewVideos(seen.len()));
    }
    let mut rng = seed::rng(seed_value);
    let mut keyed: Vec<(f64, Label, &str)> = Vec::with_capacity(seen.len());
    for (&label, ids) in &by_class {
        let mut ids: Vec<&str> = ids.iter().copied().collect();
        ids.shuffle(&mut rng);
        let n = ids.len() as f64;
        keyed.extend(ids.into_iter().enumerate().map(|(rank, id)| ((rank as f64 + 0.5) / n, label, id)));
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let order: Vec<String> = keyed.into_iter().map(|(_, _, id)| id.to_string()).collect();

    let (_, n_val, n_test) = partition_sizes(order.len(), fractions);
    Ok(SplitPlan {
        test: order[..n_test].to_vec(),
        validation: order[n_test..n_test + n_val].to_vec(),
        train: order[n_test + n_val..].to_vec(),
        seed: seed_value,
    })
}

/// Checks that the plan's partitions are pairwise disjoint and cover
/// exactly `videos`.
pub fn audit(plan: &SplitPlan, videos: &[(String, Label)]) -> Result<(), PipelineError> {
    let mut owner: BTreeMap<&str, Partition> = BTreeMap::new();
    for (p, ids) in [
        (Partition::Train, &plan.train),
        (Partition::Validation, &plan.validation),
        (Partition::Test, &plan.test),
    ] {
        for id in ids {
            if owner.insert(id, p).is_some() {
                return Err(PipelineError::Leakage(format!("video {id:?} appears in more than one partition")));
            }
        }
    }
    let expected: BTreeSet<&str> = videos.iter().map(|(id, _)| id.as_str()).collect();
    let covered: BTreeSet<&str> = owner.keys().copied().collect();
    if expected != covered {
        let missing: Vec<_> = expected.difference(&covered).collect();
        let extra: Vec<_> = covered.difference(&expected).collect();
        return Err(PipelineError::Leakage(format!("missing {missing:?}, unknown {extra:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(real: usize, fake: usize) -> Vec<(String, Label)> {
        (0..real)
            .map(|i| (format!("real_{i:03}"), Label::Real))
            .chain((0..fake).map(|i| (format!("fake_{i:03}"), Label::Fake)))
            .collect()
    }

    #[test]
    fn twenty_balanced_videos_split_fourteen_three_three() {
        let v = corpus(10, 10);
        let plan = split(&v, &Fractions::default(), 7).unwrap();
        assert_eq!((plan.train.len(), plan.validation.len(), plan.test.len()), (14, 3, 3));
        audit(&plan, &v).unwrap();
        assert_eq!(plan, split(&v, &Fractions::default(), 7).unwrap());
        assert_ne!(plan, split(&v, &Fractions::default(), 8).unwrap());
    }

    #[test]
    fn stratification_keeps_test_balanced() {
        let v = corpus(60, 60);
        let plan = split(&v, &Fractions::default(), 42).unwrap();
        assert_eq!((plan.train.len(), plan.validation.len(), plan.test.len()), (84, 18, 18));
        let fakes = |ids: &[String]| ids.iter().filter(|id| id.starts_with("fake")).count();
        assert_eq!(fakes(&plan.test), 9);
        assert_eq!(fakes(&plan.validation), 9);
    }

    #[test]
    fn input_order_does_not_matter() {
        let v = corpus(7, 5);
        let mut rev = v.clone();
        rev.reverse();
        assert_eq!(split(&v, &Fractions::default(), 3).unwrap(), split(&rev, &Fractions::default(), 3).unwrap());
    }

    #[test]
    fn errors() {
        assert!(matches!(split(&corpus(1, 1), &Fractions::default(), 0), Err(PipelineError::TooFewVideos(2))));
        let mut v = corpus(3, 3);
        v.push(("real_000".into(), Label::Fake));
        assert!(matches!(split(&v, &Fractions::default(), 0), Err(PipelineError::ConflictingLabel(_))));
        let bad = Fractions {
            train: 0.5,
            validation: 0.5,
            test: 0.5,
        };
        assert!(matches!(split(&corpus(3, 3), &bad, 0), Err(PipelineError::InvalidFractions(_))));
    }

    #[test]
    fn audit_detects_overlap_and_gaps() {
        let v = corpus(5, 5);
        let mut plan = split(&v, &Fractions::default(), 1).unwrap();
        let moved = plan.train[0].clone();
        plan.test.push(moved);
        assert!(audit(&plan, &v).is_err());
        plan.test.pop();
        plan.train.remove(0);
        assert!(audit(&plan, &v).is_err());
    }
}
