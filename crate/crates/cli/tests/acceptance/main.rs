//! Acceptance checks, one line per criterion.
//!
//! Every numeric expectation here comes from an oracle in this file
//! (brute-force recounts, finite differences, hand-filled tables) rather
//! than from the library under test.

mod oracles;

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use conseq_core::artifact::PipelineArtifact;
use conseq_core::classifiers::{
    self, linear, FeatureMatrix, LogisticConfig, MlpConfig, ModelKind, ModelParams, MultinomialNbConfig, TrainConfig,
};
use conseq_core::config::RunConfig;
use conseq_core::corpus::{filter_rare_classes, stratified_split, ClusterId, Dataset, Taxonomy};
use conseq_core::doc2vec::{Doc2VecConfig, Doc2VecModel, TaggedDocument};
use conseq_core::eval::{evaluate, ComparisonTable};
use conseq_core::pipeline::{prepare_features, FeaturizerKind};
use conseq_core::textprep::{CleaningOptions, TokenizedDocument};
use conseq_core::tfidf::{TfidfConfig, TfidfModel};
use conseq_core::workflow::train_run;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracles::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Criterion {
    number: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, name: "tf-idf dense oracle", budget: Duration::from_secs(1), check: tfidf_oracle },
        Criterion { number: 2, name: "idf monotonicity and tf scale invariance", budget: Duration::from_secs(30), check: tfidf_properties },
        Criterion { number: 3, name: "Doc2Vec descent and similarity", budget: Duration::from_secs(60), check: doc2vec_toy },
        Criterion { number: 4, name: "classifier sanity suite", budget: Duration::from_secs(60), check: classifier_suite },
        Criterion { number: 5, name: "metrics correctness", budget: Duration::from_secs(5), check: metrics },
        Criterion { number: 6, name: "preprocessing fidelity", budget: Duration::from_secs(1), check: preprocessing },
        Criterion { number: 7, name: "end-to-end comparison", budget: Duration::from_secs(120), check: comparison },
        Criterion { number: 8, name: "determinism and persistence", budget: Duration::from_secs(120), check: persistence },
    ];
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));

    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.number)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; over budget of {:?}", c.budget)),
            other => other,
        };
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {}. {} ({:.2}s): {detail}", c.number, c.name, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

fn doc(text: &str) -> TokenizedDocument {
    TokenizedDocument::from_tokens(text.split_whitespace())
}

// 1 -------------------------------------------------------------------------

fn tfidf_oracle() -> Outcome {
    let texts = [
        "udp flood overwhelms the server with udp packets",
        "attacker floods server with syn packets",
        "phishing email steals account password",
        "attacker sends phishing email with malicious link",
        "malicious link installs malware on the server",
    ];
    let docs: Vec<_> = texts.iter().map(|t| doc(t)).collect();
    let config = TfidfConfig::default();
    let model = TfidfModel::fit(&docs, &config).map_err(|e| e.to_string())?;
    let oracle = DenseTfidf::fit(&docs, &config);

    ensure!(model.vocabulary().terms() == oracle.terms.as_slice(), "vocabulary differs from brute-force recount");
    for (t, idf) in oracle.terms.iter().zip(&oracle.idf) {
        ensure!(model.idf(t) == Some(*idf), "idf({t}) = {:?}, oracle {idf}", model.idf(t));
    }
    let mut worst = 0.0f64;
    for d in &docs {
        let got = model.transform(d).to_dense(model.dim());
        for (g, w) in got.iter().zip(oracle.transform(d)) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure!(worst <= 1e-12, "max entry difference {worst:e}");
    Ok(format!("{} terms, max |diff| {worst:.1e}", oracle.terms.len()))
}

// 2 -------------------------------------------------------------------------

fn tfidf_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let words: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let mut pairs = 0usize;
    for trial in 0..1000 {
        let n_docs = rng.gen_range(1..=10);
        let docs: Vec<TokenizedDocument> = (0..n_docs)
            .map(|_| {
                let len = rng.gen_range(1..=30);
                TokenizedDocument::from_tokens((0..len).map(|_| words[rng.gen_range(0..words.len())].clone()))
            })
            .collect();

        for smooth in [true, false] {
            let cfg = TfidfConfig {
                min_df: 1,
                max_df_ratio: 1.0,
                ngram_range: (1, 1),
                smooth_idf: smooth,
                l2_normalize: true,
            };
            let model = TfidfModel::fit(&docs, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
            let df = brute_force_df(&docs, 1, 1);
            let terms = model.vocabulary().terms();
            for a in terms {
                for b in terms {
                    if df[a] < df[b] {
                        pairs += 1;
                        let (ia, ib) = (model.idf(a).unwrap(), model.idf(b).unwrap());
                        ensure!(ia > ib, "trial {trial}: df {} < {} but idf {ia} <= {ib}", df[a], df[b]);
                    }
                }
            }
        }

        let cfg = TfidfConfig {
            min_df: 1,
            ngram_range: (1, 1),
            l2_normalize: false,
            ..TfidfConfig::default()
        };
        let model = TfidfModel::fit(&docs, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        for d in &docs {
            let doubled = TokenizedDocument::from_tokens(d.tokens().iter().flat_map(|t| [t.clone(), t.clone()]));
            let (x, y) = (model.transform(d), model.transform(&doubled));
            ensure!(x.indices() == y.indices(), "trial {trial}: support changed when tokens were doubled");
            for (a, b) in x.values().iter().zip(y.values()) {
                ensure!((a - b).abs() <= 1e-12, "trial {trial}: tf changed {a} -> {b}");
            }
        }
    }
    Ok(format!("1000 corpora, {pairs} ordered df pairs checked"))
}

// 3 -------------------------------------------------------------------------

fn doc2vec_toy() -> Outcome {
    let corpus = toy_doc2vec_corpus();
    let tagged: Vec<TaggedDocument> = corpus
        .iter()
        .map(|(tag, toks)| TaggedDocument::new(tag.clone(), TokenizedDocument::from_tokens(toks.clone())))
        .collect();
    let config = Doc2VecConfig {
        dim: 16,
        epochs: 50,
        seed: 3,
        ..Doc2VecConfig::default()
    };
    let model = Doc2VecModel::train(&tagged, &config).map_err(|e| e.to_string())?;

    let trace = model.loss_trace();
    ensure!(trace.iter().all(|l| l.is_finite()), "non-finite loss in trace");
    let first = trace[..5].iter().sum::<f64>() / 5.0;
    let last = trace[trace.len() - 5..].iter().sum::<f64>() / 5.0;
    ensure!(last < first, "loss did not descend: first-5 mean {first}, last-5 mean {last}");

    let vectors: Vec<&[f64]> = (0..tagged.len()).map(|i| model.doc_vectors().row(i)).collect();
    let dup = (tagged.len() - 2, tagged.len() - 1);
    ensure!(
        nearest_other(&vectors, dup.0) == dup.1 && nearest_other(&vectors, dup.1) == dup.0,
        "duplicated documents are not mutual nearest neighbours"
    );

    let unique = tagged.len() - 2;
    let mut hits = 0;
    for trial in 0..20u64 {
        let d = trial as usize % unique;
        let inferred = model.infer_vector(&tagged[d].tokens, config.infer_epochs, 100 + trial);
        let best = nearest_to(&vectors, &inferred.vector);
        if best == d {
            hits += 1;
        }
    }
    ensure!(hits >= 16, "inference recovered the source in {hits}/20 trials");
    Ok(format!("loss {first:.3} -> {last:.3}, duplicates mutual, inference {hits}/20"))
}

// 4 -------------------------------------------------------------------------

fn classifier_suite() -> Outcome {
    let blobs = three_blobs(200, 4);
    let (train_x, train_y, test_x, test_y) = blobs.split(0.7);
    let x_train = FeatureMatrix::dense(train_x.clone()).map_err(|e| e.to_string())?;
    let x_test = FeatureMatrix::dense(test_x).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default().with_seed(4);

    let mut accs = Vec::new();
    for kind in ModelKind::ALL {
        let model = classifiers::train(kind, &x_train, &train_y, &cfg).map_err(|e| format!("{kind}: {e}"))?;
        let acc = accuracy(&model.predict(&x_test).map_err(|e| e.to_string())?, &test_y);
        ensure!(acc >= 0.95, "{kind} test accuracy {acc}");
        accs.push(format!("{kind} {acc:.2}"));

        if kind == ModelKind::LinearSvc {
            let ModelParams::LinearSvc(m) = model.params() else { unreachable!() };
            let classes = model.classes().to_vec();
            let reference = SubgradientSvc::fit(&train_x, &train_y, &classes, cfg.linear_svc.c, 20_000);
            let agree = reference
                .predict_all(&x_test.to_dense_rows(), &classes)
                .iter()
                .zip(model.predict(&x_test).unwrap())
                .filter(|(a, b)| **a == *b)
                .count() as f64
                / test_y.len() as f64;
            ensure!(agree >= 0.95, "linear SVC agrees with the subgradient reference on {agree} of test points");
            for (k, &c) in classes.iter().enumerate() {
                let ours = squared_hinge_objective(&train_x, &train_y, c, m.weights.row(k), m.bias[k], cfg.linear_svc.c);
                let theirs = reference.objective(&train_x, &train_y, k, c, cfg.linear_svc.c);
                ensure!(
                    ours <= theirs * (1.0 + 1e-6),
                    "class {c}: objective {ours} worse than reference {theirs}"
                );
            }
        }
    }

    // XOR
    let xor = FeatureMatrix::dense(vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let xor_y = [0u32, 1, 1, 0];
    let mlp_cfg = MlpConfig {
        hidden_layers: vec![8],
        learning_rate: 0.01,
        seed: 4,
        ..MlpConfig::default()
    };
    let mlp = classifiers::train_mlp(&xor, &xor_y, &mlp_cfg).map_err(|e| e.to_string())?;
    ensure!(mlp.predict(&xor).unwrap() == xor_y, "MLP does not solve XOR");

    // Logistic gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let lr_x = FeatureMatrix::dense((0..5).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()).unwrap();
    let lr_y = [0usize, 1, 2, 1, 0];
    let mut model = linear::LinearModel::zeros(3, 3);
    model.weights.as_mut_slice().iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
    model.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
    let c = LogisticConfig::default().c;
    let (_, grad) = linear::logistic_objective(&lr_x, &lr_y, &model, c);
    let analytic: Vec<f64> = grad.weights.as_slice().iter().chain(&grad.bias).copied().collect();
    let flat: Vec<f64> = model.weights.as_slice().iter().chain(&model.bias).copied().collect();
    let lr_diff = max_fd_error(&flat, &analytic, |p| {
        let mut m = linear::LinearModel::zeros(3, 3);
        m.weights.as_mut_slice().copy_from_slice(&p[..9]);
        m.bias.copy_from_slice(&p[9..]);
        linear::logistic_objective(&lr_x, &lr_y, &m, c).0
    });
    ensure!(lr_diff < 1e-6, "logistic gradient differs from finite differences by {lr_diff:e}");

    // MLP gradient.
    let mlp_x = FeatureMatrix::dense((0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()).unwrap();
    let mlp_y = [0usize, 2, 1];
    let alpha = 1e-2;
    let net = classifiers::Mlp::initialize(4, &[5, 3], 3, &mut rng);
    let (_, analytic) = net.loss_and_gradient(&mlp_x, &mlp_y, alpha);
    let mlp_diff = max_fd_error(&net.params(), &analytic, |p| {
        let mut n = net.clone();
        n.set_params(p);
        n.loss_and_gradient(&mlp_x, &mlp_y, alpha).0
    });
    ensure!(mlp_diff < 1e-5, "MLP gradient differs from finite differences by {mlp_diff:e}");

    // Multinomial NB posterior.
    let counts = FeatureMatrix::dense(vec![vec![2.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 4.0]]).unwrap();
    let nb = classifiers::train_multinomial_nb(&counts, &[1, 1, 2, 2], &MultinomialNbConfig { alpha: 1.0 })
        .map_err(|e| e.to_string())?;
    let query = FeatureMatrix::dense(vec![vec![1.0, 0.0]]).unwrap();
    let posterior = nb.predict_proba(&query).unwrap().unwrap()[0][0];
    let expected = multinomial_posterior(&[&[2.0, 0.0], &[3.0, 0.0]], &[&[0.0, 2.0], &[0.0, 4.0]], &[1.0, 0.0], 1.0);
    ensure!(nb.predict(&query).unwrap() == [1], "multinomial NB did not pick class 1");
    ensure!((posterior - expected).abs() < 1e-12, "posterior {posterior}, hand value {expected}");

    Ok(format!(
        "{}; XOR solved; fd errors logistic {lr_diff:.1e}, mlp {mlp_diff:.1e}; NB posterior {posterior:.6}",
        accs.join(", ")
    ))
}

// 5 -------------------------------------------------------------------------

fn metrics() -> Outcome {
    let report = evaluate(&[1, 1, 2, 2], &[1, 2, 2, 2]).map_err(|e| e.to_string())?;
    let hand = HandConfusion::from_labels(&[1, 1, 2, 2], &[1, 2, 2, 2]);
    ensure!(report.confusion.counts == hand.counts, "confusion matrix {:?}", report.confusion.counts);
    ensure!((report.accuracy - 0.75).abs() < 1e-9, "accuracy {}", report.accuracy);
    ensure!((report.precision_weighted - 5.0 / 6.0).abs() < 1e-9, "weighted precision {}", report.precision_weighted);
    let (p, r, f) = hand.weighted();
    ensure!(
        (report.recall_weighted - r).abs() < 1e-9 && (report.f1_weighted - f).abs() < 1e-9 && (p - 5.0 / 6.0).abs() < 1e-12,
        "weighted recall/f1 {} {} vs hand {r} {f}",
        report.recall_weighted,
        report.f1_weighted
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..500 {
        let n = rng.gen_range(1..60);
        let k = rng.gen_range(1..7);
        let truth: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<u32> = (0..n).map(|_| rng.gen_range(0..k + 1)).collect();
        let rep = evaluate(&truth, &pred).map_err(|e| e.to_string())?;
        let acc = accuracy(&pred, &truth);
        ensure!((rep.accuracy - acc).abs() < 1e-12, "trial {trial}: accuracy {} vs {acc}", rep.accuracy);
        ensure!(
            (rep.accuracy - rep.recall_weighted).abs() < 1e-12,
            "trial {trial}: accuracy {} != weighted recall {}",
            rep.accuracy,
            rep.recall_weighted
        );
        let (hp, _, hf) = HandConfusion::from_labels(&truth, &pred).weighted();
        ensure!(
            (rep.precision_weighted - hp).abs() < 1e-12 && (rep.f1_weighted - hf).abs() < 1e-12,
            "trial {trial}: weighted precision/f1 disagree with recount"
        );
    }
    Ok("hand example and 500 random label vectors agree".into())
}

// 6 -------------------------------------------------------------------------

fn preprocessing() -> Outcome {
    let taxonomy = Taxonomy::standard();
    for (ids, expected) in [(vec![2u8, 7, 7], 10u8), (vec![6, 5, 3], 8)] {
        for perm in permutations(&ids) {
            let got = taxonomy.assign_combined_label(&perm).map_err(|e| e.to_string())?;
            ensure!(got == ClusterId(expected), "{perm:?} -> {got}, expected {expected}");
        }
    }

    let histogram = reference_histogram();
    let dataset = dataset_with_histogram(&histogram);
    let kept = filter_rare_classes(&dataset, 3).map_err(|e| e.to_string())?;
    let mut kept_classes: Vec<u8> = kept.labels().iter().map(|c| c.get()).collect();
    kept_classes.dedup();
    kept_classes.sort_unstable();
    kept_classes.dedup();
    let expected: Vec<u8> = histogram.iter().filter(|(_, n)| **n >= 3).map(|(c, _)| *c).collect();
    ensure!(kept_classes == expected, "kept {kept_classes:?}, expected {expected:?}");
    let expected_len: usize = histogram.iter().filter(|(_, n)| **n >= 3).map(|(_, n)| n).sum();
    ensure!(kept.len() == expected_len, "kept {} records, expected {expected_len}", kept.len());
    ensure!(dataset.len() == 72, "input dataset changed");
    Ok(format!("permutations map to 10 and 8; kept classes {kept_classes:?}"))
}

// 7 -------------------------------------------------------------------------

fn comparison() -> Outcome {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_conseq"))
            .args(["--format", "json", "compare", SAMPLE_DATASET])
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "compare failed: {}", String::from_utf8_lossy(&out.stderr));
        Ok(out.stdout)
    };
    let first = run()?;
    let second = run()?;
    ensure!(first == second, "two runs with the same seed differ");
    let table: ComparisonTable = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    ensure!(table.rows.len() == 10, "{} rows", table.rows.len());
    for f in FeaturizerKind::ALL {
        for m in f.compared_models() {
            ensure!(table.row(f, m).is_some(), "missing row {f} / {m}");
        }
    }
    let best = table.best().ok_or("no rows")?;
    ensure!(
        best.weighted.accuracy >= table.baseline.accuracy,
        "best accuracy {} below baseline {}",
        best.weighted.accuracy,
        table.baseline.accuracy
    );
    Ok(format!(
        "10 rows, identical reruns; best {} / {} accuracy {:.3} vs baseline {:.3}",
        best.featurizer, best.model, best.weighted.accuracy, table.baseline.accuracy
    ))
}

// 8 -------------------------------------------------------------------------

fn persistence() -> Outcome {
    let dataset = Dataset::sample();

    for (featurizer, model) in [(FeaturizerKind::Tfidf, ModelKind::LinearSvc), (FeaturizerKind::Doc2vec, ModelKind::Mlp)] {
        let mut cfg = RunConfig::default();
        cfg.featurizer = featurizer;
        cfg.model = model;
        let a = train_run(&dataset, &cfg, 0).map_err(|e| e.to_string())?.artifact.to_json();
        let b = train_run(&dataset, &cfg, 0).map_err(|e| e.to_string())?.artifact.to_json();
        ensure!(a == b, "{featurizer}/{model}: artifacts differ between identical runs");

        let loaded = PipelineArtifact::from_json(&a).map_err(|e| e.to_string())?;
        ensure!(loaded.to_json() == a, "{featurizer}/{model}: re-serialized artifact differs");
        let original: PipelineArtifact = serde_json::from_str::<serde_json::Value>(&a)
            .ok()
            .and_then(|v| serde_json::from_value(v["payload"].clone()).ok())
            .ok_or("payload does not parse")?;
        ensure!(
            bit_identical(&original, &loaded, &dataset.documents()),
            "{featurizer}/{model}: round-trip scores are not bit-identical"
        );
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_conseq"))
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .args(["train", SAMPLE_DATASET, "--out"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "train failed: {}", String::from_utf8_lossy(&out.stderr));
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure!(files[0] == files[1], "CLI artifacts are not byte-identical");

    let probes = leak_probe(&dataset)?;
    Ok(format!("byte-identical artifacts, bit-exact round trips, leak probe clean ({probes})"))
}

fn bit_identical(a: &PipelineArtifact, b: &PipelineArtifact, texts: &[String]) -> bool {
    if a != b {
        return false;
    }
    let features = |p: &PipelineArtifact| {
        let docs = conseq_core::pipeline::tokenize_all(texts, &p.pipeline.cleaning);
        p.pipeline.featurizer.transform(&docs).unwrap().features
    };
    let (fa, fb) = (features(a), features(b));
    let (sa, sb) = (a.pipeline.classifier.scores(&fa).unwrap(), b.pipeline.classifier.scores(&fb).unwrap());
    sa.iter()
        .flatten()
        .zip(sb.iter().flatten())
        .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Plants a marker word in every test document and checks that neither
/// featurizer learns it, with a positive control fitted on all documents.
fn leak_probe(dataset: &Dataset) -> Result<String, String> {
    const MARKER: &str = "zzleakmarker";
    let cfg = RunConfig::default();
    let filtered = filter_rare_classes(dataset, cfg.min_count).map_err(|e| e.to_string())?;
    let (train, test) = stratified_split(&filtered, &cfg.split_config()).map_err(|e| e.to_string())?;
    let test = with_marker(&test, MARKER)?;
    let cleaning = CleaningOptions::default();
    let mut fcfg = cfg.featurizer_config();
    fcfg.doc2vec.dim = 32;
    fcfg.doc2vec.epochs = 5;
    fcfg.doc2vec.infer_epochs = 5;

    let vocab_has_marker = |f: &conseq_core::pipeline::Featurizer| match f {
        conseq_core::pipeline::Featurizer::Tfidf { model } => model.vocabulary().contains(MARKER),
        conseq_core::pipeline::Featurizer::Doc2vec { model, .. } => model.vocab().contains(MARKER),
    };
    for kind in FeaturizerKind::ALL {
        let prepared = prepare_features(&train, &test, kind, &cleaning, &fcfg).map_err(|e| e.to_string())?;
        ensure!(!vocab_has_marker(&prepared.featurizer), "{kind} vocabulary contains a test-only word");
        if let conseq_core::pipeline::Featurizer::Doc2vec { model, .. } = &prepared.featurizer {
            for r in test.records() {
                ensure!(model.tag_index(&r.id).is_none(), "doc2vec trained a vector for test record {}", r.id);
            }
        }
        let control = prepare_features(&test, &test, kind, &cleaning, &fcfg).map_err(|e| e.to_string())?;
        ensure!(vocab_has_marker(&control.featurizer), "{kind} positive control missed the marker");
    }
    Ok(format!("{} train / {} test records", train.len(), test.len()))
}

fn with_marker(ds: &Dataset, marker: &str) -> Result<Dataset, String> {
    let mut v: serde_json::Value = serde_json::from_str(&ds.to_canonical_json()).map_err(|e| e.to_string())?;
    for r in v["records"].as_array_mut().ok_or("records")? {
        let d = r["descriptions"][0].as_str().ok_or("description")?.to_string();
        r["descriptions"][0] = serde_json::Value::String(format!("{d} {marker}"));
    }
    Dataset::from_json_str(&v.to_string()).map_err(|e| e.to_string())
}
