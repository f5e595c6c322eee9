//! Independent reference computations used by the acceptance checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use conseq_core::corpus::{Dataset, Taxonomy};
use conseq_core::textprep::TokenizedDocument;
use conseq_core::tfidf::TfidfConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SAMPLE_DATASET: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/sample_dataset.json");

// tf-idf ----------------------------------------------------------------------

fn grams(tokens: &[String], lo: usize, hi: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in lo..=hi {
        if tokens.len() >= n {
            for i in 0..=tokens.len() - n {
                out.push(tokens[i..i + n].join(" "));
            }
        }
    }
    out
}

pub fn brute_force_df(docs: &[TokenizedDocument], lo: usize, hi: usize) -> HashMap<String, usize> {
    let mut df = HashMap::new();
    for d in docs {
        let distinct: BTreeSet<String> = grams(d.tokens(), lo, hi).into_iter().collect();
        for g in distinct {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    df
}

/// tf-idf computed densely from the textbook definitions.
pub struct DenseTfidf {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    range: (usize, usize),
    normalize: bool,
}

impl DenseTfidf {
    pub fn fit(docs: &[TokenizedDocument], cfg: &TfidfConfig) -> Self {
        let (lo, hi) = cfg.ngram_range;
        let n = docs.len();
        let max_df = (cfg.max_df_ratio * n as f64 - 1e-9).ceil() as usize;
        let df = brute_force_df(docs, lo, hi);
        let mut terms: Vec<String> = df
            .iter()
            .filter(|(_, &c)| c >= cfg.min_df && c <= max_df)
            .map(|(t, _)| t.clone())
            .collect();
        terms.sort();
        let idf = terms
            .iter()
            .map(|t| {
                let (n, d) = (n as f64, df[t] as f64);
                if cfg.smooth_idf {
                    ((1.0 + n) / (1.0 + d)).ln() + 1.0
                } else {
                    (n / d).ln()
                }
            })
            .collect();
        Self {
            terms,
            idf,
            range: cfg.ngram_range,
            normalize: cfg.l2_normalize,
        }
    }

    pub fn transform(&self, doc: &TokenizedDocument) -> Vec<f64> {
        let stream = grams(doc.tokens(), self.range.0, self.range.1);
        let mut row = vec![0.0; self.terms.len()];
        let mut total = 0.0;
        for g in &stream {
            if let Some(j) = self.terms.iter().position(|t| t == g) {
                row[j] += 1.0;
                total += 1.0;
            }
        }
        if total == 0.0 {
            return row;
        }
        for (v, idf) in row.iter_mut().zip(&self.idf) {
            *v = *v / total * idf;
        }
        if self.normalize {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        row
    }
}

// Doc2Vec ---------------------------------------------------------------------

/// Eighteen documents with private vocabularies plus a shared pool, then
/// two identical documents `dup_1` and `dup_2`.
pub fn toy_doc2vec_corpus() -> Vec<(String, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let shared: Vec<String> = (0..10).map(|i| format!("common{i}")).collect();
    let make = |topic: &str, rng: &mut ChaCha8Rng| -> Vec<String> {
        let own: Vec<String> = (0..8).map(|i| format!("{topic}w{i}")).collect();
        (0..30)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    shared.choose(rng).unwrap().clone()
                } else {
                    own.choose(rng).unwrap().clone()
                }
            })
            .collect()
    };
    let mut docs: Vec<(String, Vec<String>)> = (0..18).map(|i| (format!("doc{i}"), make(&format!("t{i}"), &mut rng))).collect();
    let dup = make("dup", &mut rng);
    docs.push(("dup_1".into(), dup.clone()));
    docs.push(("dup_2".into(), dup));
    docs
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn nearest_to(vectors: &[&[f64]], query: &[f64]) -> usize {
    (0..vectors.len())
        .max_by(|&i, &j| cosine(vectors[i], query).total_cmp(&cosine(vectors[j], query)))
        .unwrap()
}

pub fn nearest_other(vectors: &[&[f64]], i: usize) -> usize {
    (0..vectors.len())
        .filter(|&j| j != i)
        .max_by(|&a, &b| cosine(vectors[a], vectors[i]).total_cmp(&cosine(vectors[b], vectors[i])))
        .unwrap()
}

// Classifiers -----------------------------------------------------------------

pub struct Blobs {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u32>,
    seed: u64,
}

/// Three unit-variance Gaussian clusters in the positive quadrant, far
/// enough apart in both position and direction that every model family
/// (including multinomial NB) can separate them.
pub fn three_blobs(n: usize, seed: u64) -> Blobs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: [[f64; 2]; 3] = [[12.0, 12.0], [20.0, 4.0], [4.0, 20.0]];
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % 3;
        let c = centres[k];
        x.push(vec![
            (c[0] + noise.sample(&mut rng)).max(0.0f64),
            (c[1] + noise.sample(&mut rng)).max(0.0f64),
        ]);
        y.push(k as u32 + 1);
    }
    Blobs { x, y, seed }
}

impl Blobs {
    pub fn split(&self, train_fraction: f64) -> (Vec<Vec<f64>>, Vec<u32>, Vec<Vec<f64>>, Vec<u32>) {
        let mut order: Vec<usize> = (0..self.x.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed + 1));
        let cut = (self.x.len() as f64 * train_fraction).round() as usize;
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u32>) {
            (idx.iter().map(|&i| self.x[i].clone()).collect(), idx.iter().map(|&i| self.y[i]).collect())
        };
        let (a, b) = pick(&order[..cut]);
        let (c, d) = pick(&order[cut..]);
        (a, b, c, d)
    }
}

pub fn accuracy(pred: &[u32], truth: &[u32]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// `0.5‖w‖² + C Σ max(0, 1 − t(w·x + b))²` for the one-vs-rest problem of `class`.
pub fn squared_hinge_objective(x: &[Vec<f64>], y: &[u32], class: u32, w: &[f64], b: f64, c: f64) -> f64 {
    let mut f = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for (xi, &yi) in x.iter().zip(y) {
        let t = if yi == class { 1.0 } else { -1.0 };
        let s: f64 = xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let m = (1.0 - t * s).max(0.0);
        f += c * m * m;
    }
    f
}

/// One-vs-rest linear SVC trained by plain subgradient descent with a
/// decaying step, keeping the best iterate.
pub struct SubgradientSvc {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl SubgradientSvc {
    pub fn fit(x: &[Vec<f64>], y: &[u32], classes: &[u32], c: f64, iters: usize) -> Self {
        let d = x[0].len();
        let lipschitz = 1.0 + 2.0 * c * x.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0).sum::<f64>();
        let mut ws = Vec::new();
        let mut bs = Vec::new();
        for &class in classes {
            let (mut w, mut b) = (vec![0.0; d], 0.0);
            let mut best = (squared_hinge_objective(x, y, class, &w, b, c), w.clone(), b);
            for it in 0..iters {
                let mut gw = w.clone();
                let mut gb = 0.0;
                for (xi, &yi) in x.iter().zip(y) {
                    let t = if yi == class { 1.0 } else { -1.0 };
                    let s: f64 = xi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
                    let m = 1.0 - t * s;
                    if m > 0.0 {
                        for (g, v) in gw.iter_mut().zip(xi) {
                            *g -= 2.0 * c * t * m * v;
                        }
                        gb -= 2.0 * c * t * m;
                    }
                }
                let step = 1.0 / (lipschitz * (1.0 + it as f64 / iters as f64));
                for (wj, g) in w.iter_mut().zip(&gw) {
                    *wj -= step * g;
                }
                b -= step * gb;
                let f = squared_hinge_objective(x, y, class, &w, b, c);
                if f < best.0 {
                    best = (f, w.clone(), b);
                }
            }
            ws.push(best.1);
            bs.push(best.2);
        }
        Self { w: ws, b: bs }
    }

    pub fn objective(&self, x: &[Vec<f64>], y: &[u32], k: usize, class: u32, c: f64) -> f64 {
        squared_hinge_objective(x, y, class, &self.w[k], self.b[k], c)
    }

    pub fn predict_all(&self, x: &[Vec<f64>], classes: &[u32]) -> Vec<u32> {
        x.iter()
            .map(|xi| {
                let scores: Vec<f64> = self
                    .w
                    .iter()
                    .zip(&self.b)
                    .map(|(w, b)| xi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b)
                    .collect();
                let k = (0..scores.len()).max_by(|&i, &j| scores[i].total_cmp(&scores[j])).unwrap();
                classes[k]
            })
            .collect()
    }
}

/// Largest |analytic − central difference| over all coordinates.
pub fn max_fd_error(params: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let h = 1e-6;
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p);
        p[i] = orig - h;
        let down = f(&p);
        p[i] = orig;
        worst = worst.max(((up - down) / (2.0 * h) - analytic[i]).abs());
    }
    worst
}

/// Posterior of the first class for a two-class multinomial model with
/// Laplace smoothing, evaluated directly from the counts.
pub fn multinomial_posterior(first: &[&[f64]], second: &[&[f64]], query: &[f64], alpha: f64) -> f64 {
    let n = (first.len() + second.len()) as f64;
    let class_score = |rows: &[&[f64]]| {
        let d = query.len();
        let totals: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
        let all: f64 = totals.iter().sum();
        let mut p = rows.len() as f64 / n;
        for j in 0..d {
            p *= ((totals[j] + alpha) / (all + alpha * d as f64)).powf(query[j]);
        }
        p
    };
    let (a, b) = (class_score(first), class_score(second));
    a / (a + b)
}

// Metrics ---------------------------------------------------------------------

pub struct HandConfusion {
    pub counts: Vec<Vec<usize>>,
}

impl HandConfusion {
    pub fn from_labels(truth: &[u32], pred: &[u32]) -> Self {
        let classes: BTreeSet<u32> = truth.iter().chain(pred).copied().collect();
        let classes: Vec<u32> = classes.into_iter().collect();
        let mut counts = vec![vec![0; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(pred) {
            let i = classes.iter().position(|c| c == t).unwrap();
            let j = classes.iter().position(|c| c == p).unwrap();
            counts[i][j] += 1;
        }
        Self { counts }
    }

    /// Support-weighted precision, recall and F1 with 0 for empty ratios.
    pub fn weighted(&self) -> (f64, f64, f64) {
        let k = self.counts.len();
        let n: usize = self.counts.iter().flatten().sum();
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        for i in 0..k {
            let tp = self.counts[i][i] as f64;
            let support: usize = self.counts[i].iter().sum();
            let predicted: usize = (0..k).map(|j| self.counts[j][i]).sum();
            let pi = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let ri = if support > 0 { tp / support as f64 } else { 0.0 };
            let fi = if pi + ri > 0.0 { 2.0 * pi * ri / (pi + ri) } else { 0.0 };
            let w = support as f64 / n as f64;
            p += w * pi;
            r += w * ri;
            f += w * fi;
        }
        (p, r, f)
    }
}

// Corpus ----------------------------------------------------------------------

pub fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// 72 records over ten clusters where clusters 1, 2 and 9 are too rare to
/// keep, mirroring the published class distribution.
pub fn reference_histogram() -> BTreeMap<u8, usize> {
    BTreeMap::from([(1, 2), (2, 1), (3, 12), (4, 14), (5, 10), (6, 9), (7, 10), (8, 5), (9, 1), (10, 8)])
}

pub fn dataset_with_histogram(histogram: &BTreeMap<u8, usize>) -> Dataset {
    let taxonomy = Taxonomy::standard();
    let mut records = Vec::new();
    for (&label, &n) in histogram {
        let c = taxonomy.clusters().iter().find(|c| c.id.get() == label).unwrap();
        let ids = if c.is_combination() {
            c.constituent_ids.clone()
        } else {
            vec![label]
        };
        for j in 0..n {
            records.push(serde_json::json!({
                "id": format!("c{label}-{j}"),
                "name": format!("attack {label}-{j}"),
                "descriptions": [format!("description of attack {label} number {j}")],
                "consequences": ids.iter().map(|k| format!("consequence {k}")).collect::<Vec<_>>(),
                "cluster_ids": ids,
            }));
        }
    }
    let doc = serde_json::json!({ "taxonomy": taxonomy, "records": records });
    Dataset::from_json_str(&doc.to_string()).unwrap()
}
