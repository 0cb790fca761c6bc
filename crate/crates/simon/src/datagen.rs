//! Seeded synthetic columns, the categorical/ordinal heuristics, and
//! the statistical bootstrap labeler.
//!
//! Generators are template grammars: self-contained, hermetic, and
//! deterministic under seed. The bootstrap labeler is a one-vs-all
//! random forest over three per-column character statistics; its output
//! is a candidate label set meant for review, not final truth.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::encode::Column;
use crate::error::{Result, SimonError};
use crate::ingest::{GeoRecord, GeoTable};

/// The nine base semantic classes covered by synthetic generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseClass {
    Address,
    Boolean,
    Datetime,
    Email,
    Float,
    Int,
    Phone,
    Text,
    Uri,
}

impl BaseClass {
    pub const ALL: [BaseClass; 9] = [
        BaseClass::Address,
        BaseClass::Boolean,
        BaseClass::Datetime,
        BaseClass::Email,
        BaseClass::Float,
        BaseClass::Int,
        BaseClass::Phone,
        BaseClass::Text,
        BaseClass::Uri,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaseClass::Address => "address",
            BaseClass::Boolean => "boolean",
            BaseClass::Datetime => "datetime",
            BaseClass::Email => "email",
            BaseClass::Float => "float",
            BaseClass::Int => "int",
            BaseClass::Phone => "phone",
            BaseClass::Text => "text",
            BaseClass::Uri => "uri",
        }
    }
}

impl fmt::Display for BaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The seven geographic classes, sampled from a place table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeoClass {
    State,
    City,
    PostalCode,
    Latitude,
    Longitude,
    Country,
    CountryCode,
}

impl GeoClass {
    pub const ALL: [GeoClass; 7] = [
        GeoClass::State,
        GeoClass::City,
        GeoClass::PostalCode,
        GeoClass::Latitude,
        GeoClass::Longitude,
        GeoClass::Country,
        GeoClass::CountryCode,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GeoClass::State => "state",
            GeoClass::City => "city",
            GeoClass::PostalCode => "postal_code",
            GeoClass::Latitude => "latitude",
            GeoClass::Longitude => "longitude",
            GeoClass::Country => "country",
            GeoClass::CountryCode => "country_code",
        }
    }
}

impl fmt::Display for GeoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const CATEGORICAL_LABEL: &str = "categorical";
pub const ORDINAL_LABEL: &str = "ordinal";

const WORDS: &[&str] = &[
    "alder", "arbor", "basin", "birch", "brook", "cedar", "cliff", "cloud", "coral", "crane",
    "delta", "drift", "ember", "fable", "fern", "finch", "gale", "glade", "grove", "harbor",
    "hazel", "heron", "iris", "jasper", "lark", "linden", "maple", "meadow", "mesa", "north",
    "oak", "onyx", "opal", "pine", "quarry", "reef", "ridge", "sable", "thorn", "wren",
];

const TLDS: &[&str] = &["com", "org", "net", "edu", "io", "gov"];

const STREET_SUFFIXES: &[&str] = &["St", "Ave", "Rd", "Blvd", "Ln", "Dr", "Way", "Ct"];

fn word<R: Rng>(rng: &mut R) -> &'static str {
    WORDS.choose(rng).unwrap()
}

fn capitalized<R: Rng>(rng: &mut R) -> String {
    let w = word(rng);
    let mut out = String::with_capacity(w.len());
    let mut chars = w.chars();
    out.extend(chars.next().map(|c| c.to_ascii_uppercase()));
    out.extend(chars);
    out
}

/// A run of `width` digits with no leading zero (single digits may be 0).
fn digit_run<R: Rng>(width: usize, rng: &mut R) -> String {
    let mut out = String::with_capacity(width);
    for i in 0..width {
        let low = if i == 0 && width > 1 { 1 } else { 0 };
        out.push(char::from(b'0' + rng.gen_range(low..=9u8)));
    }
    out
}

/// Classes with several surface formats pick one per column, to mimic a
/// real table's internal consistency.
fn pick_variant<R: Rng>(class: BaseClass, rng: &mut R) -> usize {
    match class {
        BaseClass::Datetime | BaseClass::Phone => rng.gen_range(0..3),
        _ => 0,
    }
}

fn make_cell<R: Rng>(class: BaseClass, variant: usize, rng: &mut R) -> String {
    match class {
        BaseClass::Int => {
            let sign = if rng.gen_bool(0.15) { "-" } else { "" };
            let width = rng.gen_range(1..=8);
            format!("{sign}{}", digit_run(width, rng))
        }
        BaseClass::Float => {
            let sign = if rng.gen_bool(0.15) { "-" } else { "" };
            let frac = digit_run(rng.gen_range(1..=4), rng);
            format!("{sign}{}.{frac}", rng.gen_range(0..10_000))
        }
        BaseClass::Boolean => (*["true", "false", "yes", "no"].choose(rng).unwrap()).to_string(),
        BaseClass::Datetime => {
            let (y, m, d) = (rng.gen_range(1950..=2029), rng.gen_range(1..=12), rng.gen_range(1..=28));
            match variant {
                0 => format!("{y:04}-{m:02}-{d:02}"),
                1 => {
                    let (h, mi, s) =
                        (rng.gen_range(0..24), rng.gen_range(0..60), rng.gen_range(0..60));
                    format!("{y:04}-{m:02}-{d:02} {h:02}:{mi:02}:{s:02}")
                }
                _ => format!("{m}/{d}/{y}"),
            }
        }
        BaseClass::Email => {
            let local = match rng.gen_range(0..3) {
                0 => word(rng).to_string(),
                1 => format!("{}.{}", word(rng), word(rng)),
                _ => format!("{}{}", word(rng), rng.gen_range(1..=99)),
            };
            format!("{local}@{}.{}", word(rng), TLDS.choose(rng).unwrap())
        }
        BaseClass::Phone => {
            let (a, b, c) =
                (rng.gen_range(200..=989), rng.gen_range(100..=999), rng.gen_range(0..=9999));
            match variant {
                0 => format!("({a:03}) {b:03}-{c:04}"),
                1 => format!("{a:03}-{b:03}-{c:04}"),
                _ => format!("+1-{a:03}-{b:03}-{c:04}"),
            }
        }
        BaseClass::Text => {
            let k = rng.gen_range(3..=8);
            let mut s = (0..k).map(|_| word(rng)).collect::<Vec<_>>().join(" ");
            if rng.gen_bool(0.5) {
                s.push('.');
            }
            s
        }
        BaseClass::Uri => {
            let scheme = if rng.gen_bool(0.5) { "https" } else { "http" };
            let www = if rng.gen_bool(0.3) { "www." } else { "" };
            let mut s = format!("{scheme}://{www}{}.{}", word(rng), TLDS.choose(rng).unwrap());
            for _ in 0..rng.gen_range(0..=2) {
                s.push('/');
                s.push_str(word(rng));
            }
            s
        }
        BaseClass::Address => {
            let mut s = format!(
                "{} {} {}",
                rng.gen_range(1..=9999),
                capitalized(rng),
                STREET_SUFFIXES.choose(rng).unwrap()
            );
            if rng.gen_bool(0.4) {
                s.push_str(", ");
                s.push_str(&capitalized(rng));
            }
            s
        }
    }
}

/// Generate one synthetic column of `n_cells` cells of the class.
pub fn generate_base_column<R: Rng>(class: BaseClass, n_cells: usize, rng: &mut R) -> Column {
    assert!(n_cells >= 1, "n_cells must be >= 1");
    let variant = pick_variant(class, rng);
    let cells = (0..n_cells).map(|_| make_cell(class, variant, rng)).collect();
    Column::new(class.name(), cells).with_provenance("synthetic")
}

/// Generate a low-cardinality column: cells are drawn from a pool of at
/// most `pool_size` generated values, so the column also satisfies the
/// categorical heuristic whenever `pool_size` is small.
pub fn generate_base_column_pooled<R: Rng>(
    class: BaseClass,
    n_cells: usize,
    pool_size: usize,
    rng: &mut R,
) -> Column {
    assert!(n_cells >= 1, "n_cells must be >= 1");
    assert!(pool_size >= 1, "pool_size must be >= 1");
    let variant = pick_variant(class, rng);
    let pool: Vec<String> = (0..pool_size).map(|_| make_cell(class, variant, rng)).collect();
    let cells = (0..n_cells).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
    Column::new(class.name(), cells).with_provenance("synthetic")
}

/// `n_per_class` columns for every base class, in class order.
pub fn synthesize_base_corpus<R: Rng>(
    n_per_class: usize,
    n_cells: usize,
    rng: &mut R,
) -> Vec<(BaseClass, Column)> {
    let mut out = Vec::with_capacity(n_per_class * BaseClass::ALL.len());
    for class in BaseClass::ALL {
        for _ in 0..n_per_class {
            out.push((class, generate_base_column(class, n_cells, rng)));
        }
    }
    out
}

fn non_empty(s: &str) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

fn geo_field(record: &GeoRecord, class: GeoClass) -> Option<String> {
    match class {
        GeoClass::State => non_empty(&record.admin),
        GeoClass::City => non_empty(&record.name),
        GeoClass::PostalCode => non_empty(&record.postal),
        GeoClass::Country => non_empty(&record.country),
        GeoClass::CountryCode => non_empty(&record.country_code),
        GeoClass::Latitude => record.latitude.map(|v| v.to_string()),
        GeoClass::Longitude => record.longitude.map(|v| v.to_string()),
    }
}

/// Sample a geographic column from the relevant field of `source`,
/// with replacement. Records missing the field are not candidates; a
/// table with no candidates at all is a data error.
pub fn generate_geo_column<R: Rng>(
    class: GeoClass,
    n_cells: usize,
    source: &GeoTable,
    rng: &mut R,
) -> Result<Column> {
    assert!(n_cells >= 1, "n_cells must be >= 1");
    let candidates: Vec<String> =
        source.records.iter().filter_map(|r| geo_field(r, class)).collect();
    if candidates.is_empty() {
        return Err(SimonError::Data(format!(
            "geographic source has no usable '{class}' values"
        )));
    }
    let cells =
        (0..n_cells).map(|_| candidates[rng.gen_range(0..candidates.len())].clone()).collect();
    Ok(Column::new(class.name(), cells).with_provenance("geonames"))
}

/// Add `categorical` (and, for numeric columns, `ordinal`) to a label
/// set when the column's statistics warrant them. One pass over every
/// cell, no sampling: categorical needs few uniques (at most 20, or at
/// most a tenth of the cells, exact integer arithmetic); ordinal
/// additionally needs every non-empty cell to parse as an int or a
/// finite float, with at least one such cell.
pub fn apply_stat_heuristics(column: &Column, existing: &BTreeSet<String>) -> BTreeSet<String> {
    stat_labels_streamed(&column.cells, column.cells.len(), existing)
}

/// [`apply_stat_heuristics`] over a cell stream, for columns too large
/// to hold in memory. `n_cells` must equal the stream length. At most
/// max(n_cells / 10, 20) + 1 distinct values are retained: once the set
/// outgrows that bound, both branches of the categorical rule are
/// settled false, so capping it there keeps memory proportional to the
/// bound without changing the outcome.
pub fn stat_labels_streamed<I>(
    cells: I,
    n_cells: usize,
    existing: &BTreeSet<String>,
) -> BTreeSet<String>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut labels = existing.clone();
    if n_cells == 0 {
        return labels;
    }
    let cap = (n_cells / 10).max(20);
    let mut unique: HashSet<String> = HashSet::new();
    let mut seen = 0usize;
    let mut any_value = false;
    let mut all_numeric = true;
    for cell in cells {
        seen += 1;
        let cell = cell.as_ref();
        if unique.len() <= cap && !unique.contains(cell) {
            unique.insert(cell.to_string());
        }
        let t = cell.trim();
        if t.is_empty() {
            continue;
        }
        any_value = true;
        if all_numeric {
            // Textual inf/nan parse as f64 but do not count as numeric.
            let numeric = t.parse::<i64>().is_ok()
                || t.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false);
            all_numeric = numeric;
        }
    }
    assert_eq!(seen, n_cells, "cell stream length must match n_cells");
    let u = unique.len();
    if u <= 20 || 10 * u <= n_cells {
        labels.insert(CATEGORICAL_LABEL.to_string());
        if any_value && all_numeric {
            labels.insert(ORDINAL_LABEL.to_string());
        }
    }
    labels
}

/// Per-cell character-class counts averaged over a column. Feature
/// order everywhere: decimals, letters, punctuation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatFeatures {
    pub avg_decimals: f64,
    pub avg_letters: f64,
    pub avg_punctuation: f64,
}

impl StatFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [self.avg_decimals, self.avg_letters, self.avg_punctuation]
    }
}

/// The punctuation class: the alphabet's visible specials, i.e. every
/// special except space, tab, and newline. Kept in sync with the
/// encoding alphabet by test.
const PUNCTUATION: &[char] = &[
    '-', ',', ';', '.', '!', '?', ':', '\'', '"', '/', '\\', '|', '_', '@', '#', '$', '%', '^',
    '&', '*', '~', '`', '+', '=', '<', '>', '(', ')', '[', ']', '{', '}',
];

/// Average counts of digit, letter, and punctuation characters per
/// cell. Empty cells contribute zeros; an empty column is all zeros.
pub fn featurize_column(column: &Column) -> StatFeatures {
    let (mut decimals, mut letters, mut punctuation) = (0u64, 0u64, 0u64);
    for cell in &column.cells {
        for c in cell.chars() {
            if c.is_ascii_digit() {
                decimals += 1;
            } else if c.is_ascii_alphabetic() {
                letters += 1;
            } else if PUNCTUATION.contains(&c) {
                punctuation += 1;
            }
        }
    }
    let n = column.cells.len().max(1) as f64;
    StatFeatures {
        avg_decimals: decimals as f64 / n,
        avg_letters: letters as f64 / n,
        avg_punctuation: punctuation as f64 / n,
    }
}

/// Bootstrap forest hyperparameters.
#[derive(Clone, Debug)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub vote_threshold: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 25, max_depth: 4, vote_threshold: 0.5 }
    }
}

#[derive(Clone, Debug)]
enum TreeNode {
    Leaf { p: f64 },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    fn score(&self, x: &[f64; 3]) -> f64 {
        match self {
            TreeNode::Leaf { p } => *p,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.score(x)
                } else {
                    right.score(x)
                }
            }
        }
    }
}

/// One-vs-all ensemble for a single base class.
#[derive(Clone, Debug)]
pub struct ForestModel {
    pub class: BaseClass,
    vote_threshold: f64,
    trees: Vec<TreeNode>,
}

impl ForestModel {
    /// Mean leaf probability over the ensemble, in [0, 1].
    pub fn score(&self, features: &StatFeatures) -> f64 {
        let x = features.as_array();
        self.trees.iter().map(|t| t.score(&x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn is_positive(&self, features: &StatFeatures) -> bool {
        self.score(features) >= self.vote_threshold
    }
}

const N_FEATURES: usize = 3;
// ceil(sqrt(3)): the usual per-split feature subset size.
const SPLIT_FEATURES: usize = 2;

fn gini(pos: usize, n: usize) -> f64 {
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best (gain, threshold) for one feature over the node's samples, or
/// None when every value is identical. Thresholds are midpoints
/// between consecutive distinct values; only strictly positive gains
/// qualify.
fn best_split(points: &[([f64; 3], bool)], idx: &[usize], feature: usize) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, bool)> =
        idx.iter().map(|&i| (points[i].0[feature], points[i].1)).collect();
    vals.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));
    let n = vals.len();
    let total_pos = vals.iter().filter(|v| v.1).count();
    let node = gini(total_pos, n);
    let mut best: Option<(f64, f64)> = None;
    let mut pos_left = 0;
    for i in 0..n - 1 {
        if vals[i].1 {
            pos_left += 1;
        }
        if vals[i].0 == vals[i + 1].0 {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        let weighted =
            (nl as f64 * gini(pos_left, nl) + nr as f64 * gini(total_pos - pos_left, nr)) / n as f64;
        let gain = node - weighted;
        if gain > 1e-12 && best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, (vals[i].0 + vals[i + 1].0) / 2.0));
        }
    }
    best
}

fn build_tree<R: Rng>(
    points: &[([f64; 3], bool)],
    idx: &[usize],
    depth: usize,
    max_depth: usize,
    rng: &mut R,
) -> TreeNode {
    let pos = idx.iter().filter(|&&i| points[i].1).count();
    let p = pos as f64 / idx.len() as f64;
    if depth >= max_depth || pos == 0 || pos == idx.len() {
        return TreeNode::Leaf { p };
    }
    let mut order = [0usize; N_FEATURES];
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.shuffle(rng);
    // A random subset of features is offered first; the search widens
    // to the rest only when the subset yields no valid split.
    let mut best: Option<(f64, usize, f64)> = None;
    for (k, &feature) in order.iter().enumerate() {
        if k >= SPLIT_FEATURES && best.is_some() {
            break;
        }
        if let Some((gain, threshold)) = best_split(points, idx, feature) {
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, feature, threshold));
            }
        }
    }
    match best {
        None => TreeNode::Leaf { p },
        Some((_, feature, threshold)) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| points[i].0[feature] <= threshold);
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(build_tree(points, &left, depth + 1, max_depth, rng)),
                right: Box::new(build_tree(points, &right, depth + 1, max_depth, rng)),
            }
        }
    }
}

/// Train a one-vs-all forest for `class` on featurized columns: bagged
/// samples per tree, random feature subsets per split, Gini impurity.
/// Training data must contain both the class and its complement.
pub fn train_bootstrap_forest<R: Rng>(
    labeled: &[(BaseClass, Column)],
    class: BaseClass,
    params: &ForestParams,
    rng: &mut R,
) -> Result<ForestModel> {
    if params.n_trees == 0 || params.max_depth == 0 {
        return Err(SimonError::InvalidParameter(
            "forest needs at least one tree and depth at least one".into(),
        ));
    }
    let points: Vec<([f64; 3], bool)> = labeled
        .iter()
        .map(|(c, column)| (featurize_column(column).as_array(), *c == class))
        .collect();
    let pos = points.iter().filter(|p| p.1).count();
    if points.is_empty() || pos == 0 || pos == points.len() {
        return Err(SimonError::DegenerateInput(format!(
            "one-vs-all training for '{class}' needs both positive and negative columns, \
             got {pos} of {} positive",
            points.len()
        )));
    }
    let trees = (0..params.n_trees)
        .map(|_| {
            let bag: Vec<usize> =
                (0..points.len()).map(|_| rng.gen_range(0..points.len())).collect();
            build_tree(&points, &bag, 0, params.max_depth, rng)
        })
        .collect();
    Ok(ForestModel { class, vote_threshold: params.vote_threshold, trees })
}

/// Candidate classes for a column: every forest that votes positive.
/// Meant to seed human review, not to be final truth.
pub fn bootstrap_label(forests: &[ForestModel], column: &Column) -> Vec<BaseClass> {
    let features = featurize_column(column);
    forests.iter().filter(|f| f.is_positive(&features)).map(|f| f.class).collect()
}
