use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};
use crate::training::{auc_or_chance, random_search, Prepared, SearchOutcome};

pub const MAX_DEPTHS: [usize; 3] = [3, 4, 5];
pub const TREE_COUNTS: [usize; 4] = [32, 64, 128, 256];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub max_depth: usize,
    pub n_trees: usize,
    pub seed: u64,
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        if !MAX_DEPTHS.contains(&self.max_depth) || !TREE_COUNTS.contains(&self.n_trees) {
            return Err(Error::invalid(format!(
                "forest needs depth in {MAX_DEPTHS:?} and tree count in {TREE_COUNTS:?}, got {} and {}",
                self.max_depth, self.n_trees
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfSample {
    pub age: f64,
    pub sex: u8,
    pub label: bool,
}

impl From<&Prepared> for RfSample {
    fn from(p: &Prepared) -> Self {
        Self {
            age: p.age as f64,
            sex: p.demographics.sex as u8,
            label: p.label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Split {
    /// `age <= threshold` goes left.
    Age(f64),
    /// Male (0) goes left.
    Sex,
}

impl Split {
    fn goes_left(self, age: f64, sex: u8) -> bool {
        match self {
            Split::Age(t) => age <= t,
            Split::Sex => sex == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    Branch {
        split: Split,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, age: f64, sex: u8) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Branch { split, left, right } => {
                if split.goes_left(age, sex) {
                    left.predict(age, sex)
                } else {
                    right.predict(age, sex)
                }
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Branch { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> Vec<f64> {
        match self {
            Node::Leaf(v) => vec![*v],
            Node::Branch { left, right, .. } => {
                let mut out = left.leaves();
                out.extend(right.leaves());
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

impl DecisionTree {
    pub fn predict(&self, age: f64, sex: u8) -> f64 {
        self.root.predict(age, sex)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<DecisionTree>,
}

fn gini(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn weighted_gini(samples: &[RfSample], split: Split) -> f64 {
    let (mut l, mut lp, mut r, mut rp) = (0, 0, 0, 0);
    for s in samples {
        if split.goes_left(s.age, s.sex) {
            l += 1;
            lp += s.label as usize;
        } else {
            r += 1;
            rp += s.label as usize;
        }
    }
    let n = samples.len() as f64;
    (l as f64 * gini(lp, l) + r as f64 * gini(rp, r)) / n
}

/// Candidate splits in a fixed order: sex first, then age midpoints ascending.
fn candidates(samples: &[RfSample]) -> Vec<Split> {
    let mut out = Vec::new();
    let has_both_sexes = samples.iter().any(|s| s.sex == 0) && samples.iter().any(|s| s.sex != 0);
    if has_both_sexes {
        out.push(Split::Sex);
    }
    let mut ages: Vec<f64> = samples.iter().map(|s| s.age).collect();
    ages.sort_by(f64::total_cmp);
    ages.dedup();
    out.extend(ages.windows(2).map(|w| Split::Age((w[0] + w[1]) / 2.0)));
    out
}

fn grow(samples: &[RfSample], depth_left: usize) -> Node {
    let positives = samples.iter().filter(|s| s.label).count();
    let leaf = Node::Leaf(if samples.is_empty() {
        0.5
    } else {
        positives as f64 / samples.len() as f64
    });
    if depth_left == 0 || samples.len() < 2 {
        return leaf;
    }
    let parent = gini(positives, samples.len());
    let mut best: Option<(f64, Split)> = None;
    for split in candidates(samples) {
        let g = weighted_gini(samples, split);
        if best.is_none_or(|(bg, _)| g < bg) {
            best = Some((g, split));
        }
    }
    match best {
        Some((g, split)) if g < parent - 1e-12 => {
            let (left, right): (Vec<RfSample>, Vec<RfSample>) =
                samples.iter().partition(|s| split.goes_left(s.age, s.sex));
            Node::Branch {
                split,
                left: Box::new(grow(&left, depth_left - 1)),
                right: Box::new(grow(&right, depth_left - 1)),
            }
        }
        _ => leaf,
    }
}

/// Greedy CART on Gini impurity; splits only while impurity strictly drops.
pub fn grow_tree(samples: &[RfSample], max_depth: usize) -> DecisionTree {
    DecisionTree {
        root: grow(samples, max_depth),
    }
}

/// Bootstrap resample for tree `tree` of a forest seeded with `seed_value`.
pub fn bootstrap_sample(samples: &[RfSample], seed_value: u64, tree: usize) -> Vec<RfSample> {
    let mut rng = seed::derived_rng(seed_value, Stream::Forest, tree as u64);
    (0..samples.len())
        .map(|_| samples[rng.random_range(0..samples.len())])
        .collect()
}

pub fn fit_random_forest(train: &[RfSample], config: RfConfig) -> Result<RfModel> {
    if train.is_empty() {
        return Err(Error::Empty("forest training data"));
    }
    if config.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(&bootstrap_sample(train, config.seed, t), config.max_depth))
        .collect();
    Ok(RfModel { trees })
}

pub fn rf_predict(model: &RfModel, age: f64, sex: u8) -> f64 {
    model.trees.iter().map(|t| t.predict(age, sex)).sum::<f64>() / model.trees.len() as f64
}

/// Random search over depth and tree count, selected by validation AUC.
pub fn search_forest(
    train: &[Prepared],
    validation: &[Prepared],
    budget: usize,
    master: u64,
) -> Result<SearchOutcome<RfConfig, RfModel>> {
    let samples: Vec<RfSample> = train.iter().map(RfSample::from).collect();
    let val_labels: Vec<bool> = validation.iter().map(|p| p.label).collect();
    random_search(
        budget,
        master,
        |rng| RfConfig {
            max_depth: MAX_DEPTHS[rng.random_range(0..MAX_DEPTHS.len())],
            n_trees: TREE_COUNTS[rng.random_range(0..TREE_COUNTS.len())],
            seed: 0,
        },
        |config, trial_seed| {
            let config = RfConfig {
                seed: trial_seed,
                ..*config
            };
            let model = fit_random_forest(&samples, config)?;
            let scores: Vec<f64> = validation
                .iter()
                .map(|p| rf_predict(&model, p.age as f64, p.demographics.sex as u8))
                .collect();
            Ok((auc_or_chance(&scores, &val_labels), model))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(age: f64, sex: u8, label: bool) -> RfSample {
        RfSample { age, sex, label }
    }

    fn toy() -> Vec<RfSample> {
        let mut rng = seed::rng(31);
        (0..60)
            .map(|_| {
                let age = rng.random_range(18..80) as f64;
                let sex = rng.random_bool(0.5) as u8;
                let label = rng.random_bool(if sex == 1 { 0.7 } else { 0.3 } * if age > 45.0 { 1.2 } else { 0.8 });
                sample(age, sex, label)
            })
            .collect()
    }

    #[test]
    fn sex_separable() {
        let train: Vec<RfSample> = (0..40).map(|i| sample(20.0 + i as f64, (i % 2) as u8, i % 2 == 1)).collect();
        let model = fit_random_forest(
            &train,
            RfConfig {
                max_depth: 5,
                n_trees: 32,
                seed: 1,
            },
        )
        .unwrap();
        for t in &model.trees {
            assert_eq!(t.root.depth(), 1);
            assert!(matches!(t.root, Node::Branch { split: Split::Sex, .. }));
        }
        for s in &train {
            assert_eq!(rf_predict(&model, s.age, s.sex) >= 0.5, s.label);
        }
    }

    #[test]
    fn single_label_is_constant() {
        let train: Vec<RfSample> = (0..10).map(|i| sample(30.0 + i as f64, (i % 2) as u8, true)).collect();
        let model = fit_random_forest(&train, RfConfig { max_depth: 3, n_trees: 32, seed: 2 }).unwrap();
        assert_eq!(rf_predict(&model, 10.0, 0), 1.0);
        assert_eq!(rf_predict(&model, 99.0, 1), 1.0);
    }

    #[test]
    fn stump_matches_exhaustive_search() {
        let train = toy();
        let config = RfConfig {
            max_depth: 1,
            n_trees: 1,
            seed: 12,
        };
        let model = fit_random_forest(&train, config).unwrap();
        let boot = bootstrap_sample(&train, 12, 0);

        // exhaustive stump: every sex split and every integer-spaced age cut
        let frac = |xs: &[&RfSample]| xs.iter().filter(|s| s.label).count() as f64 / xs.len() as f64;
        let impurity = |xs: &[&RfSample]| {
            if xs.is_empty() {
                0.0
            } else {
                let p = frac(xs);
                xs.len() as f64 * 2.0 * p * (1.0 - p)
            }
        };
        let mut best: Option<(f64, Box<dyn Fn(&RfSample) -> bool>)> = None;
        let mut consider = |rule: Box<dyn Fn(&RfSample) -> bool>| {
            let (l, r): (Vec<&RfSample>, Vec<&RfSample>) = boot.iter().partition(|s| rule(s));
            if l.is_empty() || r.is_empty() {
                return;
            }
            let g = impurity(&l) + impurity(&r);
            if best.as_ref().is_none_or(|(bg, _)| g < *bg) {
                best = Some((g, rule));
            }
        };
        consider(Box::new(|s| s.sex == 0));
        let mut ages: Vec<f64> = boot.iter().map(|s| s.age).collect();
        ages.sort_by(f64::total_cmp);
        ages.dedup();
        for w in ages.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            consider(Box::new(move |s| s.age <= t));
        }
        let (_, rule) = best.unwrap();
        let (l, r): (Vec<&RfSample>, Vec<&RfSample>) = boot.iter().partition(|s| rule(s));
        let (fl, fr) = (frac(&l), frac(&r));
        for age in 15..85 {
            for sex in 0..2u8 {
                let probe = sample(age as f64 + 0.25, sex, false);
                let expected = if rule(&probe) { fl } else { fr };
                assert_eq!(rf_predict(&model, probe.age, sex), expected);
            }
        }
    }

    #[test]
    fn depth_bound_and_leaf_range() {
        let train = toy();
        for depth in MAX_DEPTHS {
            let model = fit_random_forest(&train, RfConfig { max_depth: depth, n_trees: 64, seed: 5 }).unwrap();
            for t in &model.trees {
                assert!(t.root.depth() <= depth);
                assert!(t.root.leaves().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn identical_trees_average_to_one_tree() {
        let tree = grow_tree(&toy(), 3);
        let single = RfModel { trees: vec![tree.clone()] };
        let many = RfModel { trees: vec![tree; 9] };
        for age in [18.0, 40.5, 77.0] {
            for sex in [0, 1] {
                assert!((rf_predict(&single, age, sex) - rf_predict(&many, age, sex)).abs() < 1e-15);
            }
        }
    }
}
