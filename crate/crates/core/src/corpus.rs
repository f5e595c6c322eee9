//! Attack/consequence dataset: taxonomy, records, loading, label assignment,
//! rare-class filtering and stratified splitting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The bundled sample dataset in canonical JSON form.
pub const SAMPLE_DATASET_JSON: &str = include_str!("../data/sample_dataset.json");
/// The CSV source the canonical sample was ingested from.
pub const SAMPLE_DATASET_CSV: &str = include_str!("../data/sample_dataset.csv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid record {record:?}, field `{field}`: {message}")]
    Validation {
        record: String,
        field: &'static str,
        message: String,
    },
    #[error("invalid taxonomy entry {id}: {message}")]
    Taxonomy { id: u8, message: String },
    #[error("no combination cluster covers base clusters {0:?}")]
    UnmappedCombination(Vec<u8>),
    #[error("dataset is empty after filtering")]
    Empty,
    #[error("class {class} has {count} instance(s); at least 2 are needed to split")]
    UnderPopulatedClass { class: ClusterId, count: usize },
    #[error("train_fraction must be strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("min_count must be at least 1")]
    InvalidMinCount,
}

/// A consequence cluster number, 1 through 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u8);

impl ClusterId {
    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<ClusterId> for u32 {
    fn from(c: ClusterId) -> u32 {
        c.0 as u32
    }
}

pub const BASE_CLUSTERS: std::ops::RangeInclusive<u8> = 1..=7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceCluster {
    pub id: ClusterId,
    pub label: String,
    /// Base cluster ids this cluster combines; empty for base clusters.
    #[serde(rename = "constituents", default)]
    pub constituent_ids: Vec<u8>,
}

impl ConsequenceCluster {
    pub fn is_combination(&self) -> bool {
        !self.constituent_ids.is_empty()
    }

    fn support(&self) -> BTreeSet<u8> {
        self.constituent_ids.iter().copied().collect()
    }
}

const BASE_LABELS: [&str; 7] = [
    "The attacker sent you emails that could lead to an attack if their request is granted.",
    "The attacker disrupted your access to your computer or the Internet.",
    "The attacker gained access to your computer or one of your online accounts.",
    "The attacker altered your computer or its contents to allow them to use it for their purposes without you knowing.",
    "The attacker manipulated your use of or understanding about a website.",
    "The attacker changed or intercepted information that you have on the Internet.",
    "The attacker made your computer operate inefficiently or not at all.",
];

/// Ordered list of clusters with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Taxonomy(Vec<ConsequenceCluster>);

impl Taxonomy {
    pub fn new(clusters: Vec<ConsequenceCluster>) -> Result<Self, CorpusError> {
        let t = Self(clusters);
        t.validate()?;
        Ok(t)
    }

    /// The seven base clusters plus the three combination clusters
    /// {6,5,3} → 8, {4,7,2} → 9 and {2,7,7} → 10. Combination labels are
    /// the constituent sentences joined in listed order.
    pub fn standard() -> Self {
        let mut clusters: Vec<ConsequenceCluster> = BASE_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| ConsequenceCluster {
                id: ClusterId(i as u8 + 1),
                label: l.to_string(),
                constituent_ids: Vec::new(),
            })
            .collect();
        for (id, parts) in [(8u8, vec![6u8, 5, 3]), (9, vec![4, 7, 2]), (10, vec![2, 7, 7])] {
            let mut seen = BTreeSet::new();
            let label = parts
                .iter()
                .filter(|p| seen.insert(**p))
                .map(|&p| BASE_LABELS[p as usize - 1])
                .collect::<Vec<_>>()
                .join(" ");
            clusters.push(ConsequenceCluster {
                id: ClusterId(id),
                label,
                constituent_ids: parts,
            });
        }
        Self(clusters)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        let mut supports: Vec<(ClusterId, BTreeSet<u8>)> = Vec::new();
        for c in &self.0 {
            let id = c.id.0;
            let err = |message: String| CorpusError::Taxonomy { id, message };
            if !(1..=10).contains(&id) {
                return Err(err("id must be in 1..=10".into()));
            }
            if !ids.insert(id) {
                return Err(err("duplicate id".into()));
            }
            if c.label.trim().is_empty() {
                return Err(err("empty label".into()));
            }
            if BASE_CLUSTERS.contains(&id) {
                if c.is_combination() {
                    return Err(err("base clusters cannot have constituents".into()));
                }
            } else {
                if !(2..=3).contains(&c.constituent_ids.len()) {
                    return Err(err("combination clusters need 2-3 constituents".into()));
                }
                if c.constituent_ids.iter().any(|k| !BASE_CLUSTERS.contains(k)) {
                    return Err(err("constituents must be base clusters 1..=7".into()));
                }
                let support = c.support();
                if support.len() < 2 {
                    return Err(err("constituents must name at least two distinct clusters".into()));
                }
                if let Some((other, _)) = supports.iter().find(|(_, s)| *s == support) {
                    return Err(err(format!("same constituent set as cluster {other}")));
                }
                supports.push((c.id, support));
            }
        }
        Ok(())
    }

    pub fn clusters(&self) -> &[ConsequenceCluster] {
        &self.0
    }

    pub fn get(&self, id: ClusterId) -> Option<&ConsequenceCluster> {
        self.0.iter().find(|c| c.id == id)
    }

    pub fn label(&self, id: ClusterId) -> Option<&str> {
        self.get(id).map(|c| c.label.as_str())
    }

    pub fn contains(&self, id: ClusterId) -> bool {
        self.get(id).is_some()
    }

    /// Maps the base clusters of an attack's consequences to one label.
    ///
    /// A single distinct id maps to itself; otherwise the combination
    /// cluster whose constituent *set* equals the distinct ids is chosen, so
    /// `{2,7,7}` and `{7,2,2}` both map to the same cluster.
    pub fn assign_combined_label(&self, raw_cluster_ids: &[u8]) -> Result<ClusterId, CorpusError> {
        let support: BTreeSet<u8> = raw_cluster_ids.iter().copied().collect();
        if support.is_empty() || support.iter().any(|k| !BASE_CLUSTERS.contains(k)) {
            return Err(CorpusError::UnmappedCombination(support.into_iter().collect()));
        }
        if support.len() == 1 {
            let id = ClusterId(*support.first().unwrap());
            if self.contains(id) {
                return Ok(id);
            }
            return Err(CorpusError::UnmappedCombination(vec![id.0]));
        }
        self.0
            .iter()
            .find(|c| c.is_combination() && c.support() == support)
            .map(|c| c.id)
            .ok_or_else(|| CorpusError::UnmappedCombination(support.into_iter().collect()))
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackRecord {
    pub id: String,
    pub name: String,
    pub descriptions: Vec<String>,
    pub consequences: Vec<String>,
    /// One base cluster id per consequence.
    pub raw_cluster_ids: Vec<u8>,
    pub cluster_label: ClusterId,
    pub synthetic: bool,
}

impl AttackRecord {
    /// All descriptions joined with single spaces: one document per attack.
    pub fn document_text(&self) -> String {
        self.descriptions.join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub synthetic_records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<AttackRecord>,
    taxonomy: Taxonomy,
    metadata: Option<DatasetMetadata>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Json,
}

impl DatasetFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

// Wire formats ---------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<DatasetMetadata>,
    taxonomy: Taxonomy,
    records: Vec<JsonRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    name: String,
    descriptions: Vec<String>,
    consequences: Vec<String>,
    cluster_ids: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cluster_label: Option<ClusterId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    synthetic: bool,
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    name: String,
    descriptions: String,
    consequences: String,
    cluster_ids: String,
    #[serde(default)]
    synthetic: Option<String>,
}

struct RawRecord {
    id: String,
    name: String,
    descriptions: Vec<String>,
    consequences: Vec<String>,
    cluster_ids: Vec<u8>,
    cluster_label: Option<ClusterId>,
    synthetic: bool,
}

impl Dataset {
    /// Validates records against the taxonomy and assigns labels.
    fn from_raw(
        raw: Vec<RawRecord>,
        taxonomy: Taxonomy,
        metadata: Option<DatasetMetadata>,
    ) -> Result<Self, CorpusError> {
        taxonomy.validate()?;
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(raw.len());
        for r in raw {
            let invalid = |field: &'static str, message: String| CorpusError::Validation {
                record: r.id.clone(),
                field,
                message,
            };
            if r.id.trim().is_empty() {
                return Err(invalid("id", "empty id".into()));
            }
            if !seen.insert(r.id.clone()) {
                return Err(invalid("id", format!("duplicate record id {:?}", r.id)));
            }
            if r.descriptions.is_empty() || r.descriptions.len() > 3 {
                return Err(invalid("descriptions", format!("expected 1-3 descriptions, got {}", r.descriptions.len())));
            }
            if let Some(i) = r.descriptions.iter().position(|d| d.trim().is_empty()) {
                return Err(invalid("descriptions", format!("description {} is empty", i + 1)));
            }
            if r.consequences.len() != r.cluster_ids.len() {
                return Err(invalid(
                    "cluster_ids",
                    format!("{} consequences but {} cluster ids", r.consequences.len(), r.cluster_ids.len()),
                ));
            }
            if r.cluster_ids.is_empty() || r.cluster_ids.len() > 3 {
                return Err(invalid("cluster_ids", format!("expected 1-3 cluster ids, got {}", r.cluster_ids.len())));
            }
            if let Some(bad) = r.cluster_ids.iter().find(|k| !BASE_CLUSTERS.contains(k)) {
                return Err(invalid("cluster_ids", format!("unknown base cluster id {bad}")));
            }
            let label = taxonomy
                .assign_combined_label(&r.cluster_ids)
                .map_err(|e| invalid("cluster_ids", e.to_string()))?;
            if let Some(stored) = r.cluster_label {
                if stored != label {
                    return Err(invalid(
                        "cluster_label",
                        format!("stored label {stored} disagrees with assigned label {label}"),
                    ));
                }
            }
            records.push(AttackRecord {
                id: r.id,
                name: r.name,
                descriptions: r.descriptions,
                consequences: r.consequences,
                raw_cluster_ids: r.cluster_ids,
                cluster_label: label,
                synthetic: r.synthetic,
            });
        }
        Ok(Self {
            records,
            taxonomy,
            metadata,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, CorpusError> {
        let parsed: JsonDataset = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        let raw = parsed
            .records
            .into_iter()
            .map(|r| RawRecord {
                id: r.id,
                name: r.name,
                descriptions: r.descriptions,
                consequences: r.consequences,
                cluster_ids: r.cluster_ids,
                cluster_label: r.cluster_label,
                synthetic: r.synthetic,
            })
            .collect();
        Self::from_raw(raw, parsed.taxonomy, parsed.metadata)
    }

    /// Reads the CSV layout: a mandatory header row
    /// `id,name,descriptions,consequences,cluster_ids[,synthetic]`, pipe-separated
    /// descriptions/consequences and comma-separated cluster ids. The standard
    /// taxonomy is used.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(&e, "header"))?.clone();
        if headers.is_empty() || headers.iter().all(str::is_empty) {
            return Err(CorpusError::Parse {
                location: "row 1".into(),
                message: "missing header row".into(),
            });
        }
        for required in ["id", "name", "descriptions", "consequences", "cluster_ids"] {
            if !headers.iter().any(|h| h == required) {
                return Err(CorpusError::Parse {
                    location: "row 1".into(),
                    message: format!("header is missing column {required:?}"),
                });
            }
        }
        let mut raw = Vec::new();
        for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
            // Header is row 1.
            let row_no = i + 2;
            let row = row.map_err(|e| csv_error(&e, &format!("row {row_no}")))?;
            let bad = |message: String| CorpusError::Parse {
                location: format!("row {row_no}"),
                message,
            };
            let cluster_ids = split_cell(&row.cluster_ids, ',')
                .into_iter()
                .map(|s| s.parse::<u8>().map_err(|_| bad(format!("cluster id {s:?} is not an integer"))))
                .collect::<Result<Vec<_>, _>>()?;
            let synthetic = match row.synthetic.as_deref().map(str::trim) {
                None | Some("") | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err(bad(format!("synthetic must be true/false, got {other:?}"))),
            };
            raw.push(RawRecord {
                id: row.id.trim().to_string(),
                name: row.name.trim().to_string(),
                descriptions: split_cell(&row.descriptions, '|'),
                consequences: split_cell(&row.consequences, '|'),
                cluster_ids,
                cluster_label: None,
                synthetic,
            });
        }
        if raw.is_empty() {
            return Err(CorpusError::Parse {
                location: "row 2".into(),
                message: "no records".into(),
            });
        }
        let synthetic_records = raw.iter().filter(|r| r.synthetic).count();
        let metadata = (synthetic_records > 0).then_some(DatasetMetadata {
            description: None,
            synthetic_records,
        });
        Self::from_raw(raw, Taxonomy::standard(), metadata)
    }

    pub fn load(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        match format {
            DatasetFormat::Json => Self::from_json_str(&std::fs::read_to_string(path).map_err(io)?),
            DatasetFormat::Csv => Self::from_csv_reader(std::fs::File::open(path).map_err(io)?),
        }
    }

    /// The bundled 72-record sample.
    pub fn sample() -> Self {
        Self::from_json_str(SAMPLE_DATASET_JSON).expect("bundled sample dataset is valid")
    }

    /// Canonical JSON: pretty-printed, labels included, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let doc = JsonDataset {
            metadata: self.metadata.clone(),
            taxonomy: self.taxonomy.clone(),
            records: self
                .records
                .iter()
                .map(|r| JsonRecord {
                    id: r.id.clone(),
                    name: r.name.clone(),
                    descriptions: r.descriptions.clone(),
                    consequences: r.consequences.clone(),
                    cluster_ids: r.raw_cluster_ids.clone(),
                    cluster_label: Some(r.cluster_label),
                    synthetic: r.synthetic,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("dataset serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn canonical_digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_canonical_json()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn records(&self) -> &[AttackRecord] {
        &self.records
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn metadata(&self) -> Option<&DatasetMetadata> {
        self.metadata.as_ref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<ClusterId> {
        self.records.iter().map(|r| r.cluster_label).collect()
    }

    pub fn documents(&self) -> Vec<String> {
        self.records.iter().map(AttackRecord::document_text).collect()
    }

    fn with_records(&self, records: Vec<AttackRecord>) -> Self {
        Self {
            records,
            taxonomy: self.taxonomy.clone(),
            metadata: self.metadata.clone(),
        }
    }

    /// Keeps the records at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Self {
        self.with_records(indices.iter().map(|&i| self.records[i].clone()).collect())
    }
}

fn split_cell(cell: &str, sep: char) -> Vec<String> {
    cell.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn csv_error(e: &csv::Error, fallback: &str) -> CorpusError {
    let location = match e.position() {
        Some(p) => format!("row {}", p.line()),
        None => fallback.to_string(),
    };
    CorpusError::Parse {
        location,
        message: e.to_string(),
    }
}

/// Counts records per label. Labels with no records are absent.
pub fn class_histogram(dataset: &Dataset) -> BTreeMap<ClusterId, usize> {
    let mut h = BTreeMap::new();
    for r in dataset.records() {
        *h.entry(r.cluster_label).or_insert(0) += 1;
    }
    h
}

/// Drops every record whose label has fewer than `min_count` instances.
pub fn filter_rare_classes(dataset: &Dataset, min_count: usize) -> Result<Dataset, CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::InvalidMinCount);
    }
    let hist = class_histogram(dataset);
    let kept: Vec<AttackRecord> = dataset
        .records()
        .iter()
        .filter(|r| hist[&r.cluster_label] >= min_count)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(dataset.with_records(kept))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(CorpusError::InvalidFraction(self.train_fraction))
        }
    }

    /// Training share for a class of `n` instances: round half up, then
    /// clamped to `1..=n-1`.
    pub fn train_count(&self, n: usize) -> usize {
        let raw = (self.train_fraction * n as f64 + 0.5).floor() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Index-level split result; both lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn stratified_split_indices(dataset: &Dataset, config: &SplitConfig) -> Result<SplitIndices, CorpusError> {
    config.validate()?;
    let mut by_class: BTreeMap<ClusterId, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records().iter().enumerate() {
        by_class.entry(r.cluster_label).or_default().push(i);
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < 2) {
        return Err(CorpusError::UnderPopulatedClass {
            class,
            count: members.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let k = config.train_count(members.len());
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Per-class seeded split; record order within each half follows the input.
pub fn stratified_split(dataset: &Dataset, config: &SplitConfig) -> Result<(Dataset, Dataset), CorpusError> {
    let idx = stratified_split_indices(dataset, config)?;
    Ok((dataset.subset(&idx.train), dataset.subset(&idx.test)))
}
