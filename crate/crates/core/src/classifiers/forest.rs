//! CART trees with Gini impurity, bagged into a random forest.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierError, EncodedLabels, FeatureMatrix};

/// Number of candidate features examined at each split. Serialized as
/// `"sqrt"`, `"all"` or an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MaxFeaturesRepr", into = "MaxFeaturesRepr")]
pub enum MaxFeatures {
    /// `floor(sqrt(n_features))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxFeaturesRepr {
    Count(usize),
    Name(String),
}

impl From<MaxFeatures> for MaxFeaturesRepr {
    fn from(m: MaxFeatures) -> Self {
        match m {
            MaxFeatures::Sqrt => MaxFeaturesRepr::Name("sqrt".into()),
            MaxFeatures::All => MaxFeaturesRepr::Name("all".into()),
            MaxFeatures::Count(k) => MaxFeaturesRepr::Count(k),
        }
    }
}

impl TryFrom<MaxFeaturesRepr> for MaxFeatures {
    type Error = String;

    fn try_from(r: MaxFeaturesRepr) -> Result<Self, Self::Error> {
        match r {
            MaxFeaturesRepr::Count(k) => Ok(MaxFeatures::Count(k)),
            MaxFeaturesRepr::Name(n) if n == "sqrt" => Ok(MaxFeatures::Sqrt),
            MaxFeaturesRepr::Name(n) if n == "all" => Ok(MaxFeatures::All),
            MaxFeaturesRepr::Name(n) => Err(format!("max_features must be \"sqrt\", \"all\" or an integer, got {n:?}")),
        }
    }
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k.min(n_features),
        };
        k.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RandomForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
            max_depth: None,
            seed: 42,
        }
    }
}

impl RandomForestConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| {
            Err(ClassifierError::InvalidConfig {
                kind: "random_forest",
                message: m.to_string(),
            })
        };
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be >= 2");
        }
        if self.max_features == MaxFeatures::Count(0) {
            return bad("max_features must be >= 1");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1");
        }
        Ok(())
    }
}

/// Nodes are stored flat; children are indices into the tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Index into the classifier's class list.
        class: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Class index of the leaf reached by `x`.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Number of trees voting for each class.
    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n_classes];
        for t in &self.trees {
            v[t.predict_index(x)] += 1.0;
        }
        v
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    max_features: usize,
    min_samples_split: usize,
    max_depth: Option<usize>,
    nodes: Vec<TreeNode>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn majority(&self, samples: &[usize]) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &s in samples {
            counts[self.y[s]] += 1.0;
        }
        argmax(&counts)
    }

    fn best_split<R: Rng>(&self, samples: &[usize], rng: &mut R) -> Option<Split> {
        let n_features = self.rows.first().map_or(0, Vec::len);
        let mut order: Vec<usize> = (0..n_features).collect();
        order.shuffle(rng);

        let mut best: Option<Split> = None;
        let mut examined = 0;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for &f in &order {
            if examined == self.max_features {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&s| (self.rows[s][f], self.y[s])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                // Constant within this node; does not count as examined.
                continue;
            }
            examined += 1;

            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for &(_, c) in &sorted {
                right[c] += 1;
            }
            let n = sorted.len();
            for i in 0..n - 1 {
                let c = sorted[i].1;
                left[c] += 1;
                right[c] -= 1;
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let (nl, nr) = (i + 1, n - i - 1);
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                    let mut threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
                    // The midpoint of adjacent doubles can round up to the upper value.
                    if threshold >= sorted[i + 1].0 {
                        threshold = sorted[i].0;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }

    fn grow<R: Rng>(&mut self, samples: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            class: self.majority(&samples),
        });
        let first = self.y[samples[0]];
        let pure = samples.iter().all(|&s| self.y[s] == first);
        let depth_capped = self.max_depth.is_some_and(|m| depth >= m);
        if pure || samples.len() < self.min_samples_split || depth_capped {
            return id;
        }
        let Some(split) = self.best_split(&samples, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.rows[s][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub(crate) fn train_forest(
    features: &FeatureMatrix,
    enc: &EncodedLabels,
    config: &RandomForestConfig,
) -> Result<RandomForest, ClassifierError> {
    config.validate()?;
    let rows = features.to_dense_rows();
    let n = rows.len();
    let max_features = config.max_features.resolve(features.dim());
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(config.seed, t);
            let samples: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                rows: &rows,
                y: &enc.y,
                n_classes: enc.classes.len(),
                max_features,
                min_samples_split: config.min_samples_split,
                max_depth: config.max_depth,
                nodes: Vec::new(),
            };
            b.grow(samples, 0, &mut rng);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(RandomForest {
        n_classes: enc.classes.len(),
        trees,
    })
}
