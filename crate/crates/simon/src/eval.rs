//! Metrics, ROC generation, the similarity score against manual
//! annotations, the rule-based primitive-dtype baseline, and the
//! full-column heuristic override policy.
//!
//! Aggregate metrics are micro-averaged over (example, label) pairs;
//! macro variants exist but are secondary. Zero denominators yield 0,
//! never NaN, so reports stay numeric.

use std::collections::BTreeSet;
use std::io;

use serde::Serialize;

use crate::datagen::{apply_stat_heuristics, CATEGORICAL_LABEL, ORDINAL_LABEL};
use crate::encode::Column;
use crate::error::{Result, SimonError};

fn check_aligned(a: &[Vec<f32>], b: &[Vec<f32>], op: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(SimonError::ShapeMismatch { op, left: vec![a.len()], right: vec![b.len()] });
    }
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(SimonError::ShapeMismatch {
                op,
                left: vec![a.len(), x.len()],
                right: vec![b.len(), y.len()],
            });
        }
    }
    Ok(())
}

fn is_positive(v: f32) -> bool {
    v >= 0.5
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn confusion(predictions: &[Vec<f32>], targets: &[Vec<f32>]) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (row_p, row_t) in predictions.iter().zip(targets) {
        for (&p, &t) in row_p.iter().zip(row_t) {
            match (is_positive(p), is_positive(t)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    (tp, fp, fn_, tn)
}

/// Fraction of correct (example, label) decisions: (TP + TN) / (m * n).
pub fn binary_accuracy(predictions: &[Vec<f32>], targets: &[Vec<f32>]) -> Result<f64> {
    check_aligned(predictions, targets, "binary_accuracy")?;
    let (tp, fp, fn_, tn) = confusion(predictions, targets);
    Ok(ratio(tp + tn, tp + fp + fn_ + tn))
}

/// Micro-averaged precision, recall, and F1 over all (example, label)
/// pairs. Zero denominators yield 0.
pub fn precision_recall_f1(
    predictions: &[Vec<f32>],
    targets: &[Vec<f32>],
) -> Result<(f64, f64, f64)> {
    check_aligned(predictions, targets, "precision_recall_f1")?;
    let (tp, fp, fn_, _) = confusion(predictions, targets);
    Ok(prf_from_counts(tp, fp, fn_))
}

fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Macro-averaged variant: per-label precision/recall/F1, then the
/// unweighted mean across labels.
pub fn precision_recall_f1_macro(
    predictions: &[Vec<f32>],
    targets: &[Vec<f32>],
) -> Result<(f64, f64, f64)> {
    check_aligned(predictions, targets, "precision_recall_f1_macro")?;
    let n_labels = predictions.first().map_or(0, |r| r.len());
    if n_labels == 0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for label in 0..n_labels {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (row_p, row_t) in predictions.iter().zip(targets) {
            match (is_positive(row_p[label]), is_positive(row_t[label])) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let (p, r, f) = prf_from_counts(tp, fp, fn_);
        sp += p;
        sr += r;
        sf += f;
    }
    let n = n_labels as f64;
    Ok((sp / n, sr / n, sf / n))
}

/// Probabilities to hard {0,1} decisions at `threshold` (p >= t is 1).
pub fn threshold_probabilities(probabilities: &[Vec<f32>], threshold: f32) -> Vec<Vec<f32>> {
    probabilities
        .iter()
        .map(|row| row.iter().map(|&p| if p >= threshold { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Micro-averaged ROC curve: (fpr, tpr) pairs swept over
/// `n_thresholds + 1` thresholds from 1 down to 0 inclusive, with the
/// (0,0) and (1,1) endpoints always present. Both coordinates are
/// non-decreasing along the list.
pub fn roc_points(
    probabilities: &[Vec<f32>],
    targets: &[Vec<f32>],
    n_thresholds: usize,
) -> Result<Vec<(f64, f64)>> {
    check_aligned(probabilities, targets, "roc_points")?;
    if n_thresholds == 0 {
        return Err(SimonError::InvalidParameter("roc needs at least one threshold step".into()));
    }
    let pairs: Vec<(f32, bool)> = probabilities
        .iter()
        .zip(targets)
        .flat_map(|(row_p, row_t)| {
            row_p.iter().zip(row_t).map(|(&p, &t)| (p, is_positive(t)))
        })
        .collect();
    let total_pos = pairs.iter().filter(|x| x.1).count();
    let total_neg = pairs.len() - total_pos;
    let mut points = vec![(0.0, 0.0)];
    for k in 0..=n_thresholds {
        let t = 1.0 - k as f64 / n_thresholds as f64;
        let (mut tp, mut fp) = (0, 0);
        for &(p, is_pos) in &pairs {
            if f64::from(p) >= t {
                if is_pos {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        points.push((ratio(fp, total_neg), ratio(tp, total_pos)));
    }
    points.push((1.0, 1.0));
    points.dedup();
    Ok(points)
}

/// Trapezoidal area under an ROC point list.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
}

/// Aggregate metrics at one decision threshold, with the ROC curve.
#[derive(Clone, Debug, Serialize)]
pub struct MetricSummary {
    pub binary_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub threshold: f32,
    pub roc_points: Vec<(f64, f64)>,
}

/// Threshold the probabilities and compute every aggregate metric.
pub fn summarize_metrics(
    probabilities: &[Vec<f32>],
    targets: &[Vec<f32>],
    threshold: f32,
    n_thresholds: usize,
) -> Result<MetricSummary> {
    let predictions = threshold_probabilities(probabilities, threshold);
    let binary_accuracy = binary_accuracy(&predictions, targets)?;
    let (precision, recall, f1) = precision_recall_f1(&predictions, targets)?;
    let roc = roc_points(probabilities, targets, n_thresholds)?;
    let auc = roc_auc(&roc);
    Ok(MetricSummary { binary_accuracy, precision, recall, f1, auc, threshold, roc_points: roc })
}

pub fn render_metric_text(summary: &MetricSummary) -> String {
    format!(
        "binary_accuracy {:.4}\nprecision {:.4}\nrecall {:.4}\nf1 {:.4}\nauc {:.4}\nthreshold {}\n",
        summary.binary_accuracy,
        summary.precision,
        summary.recall,
        summary.f1,
        summary.auc,
        summary.threshold
    )
}

/// ROC points as two-column CSV for external plotting.
pub fn write_roc_csv<W: io::Write>(writer: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr"]).map_err(csv_io)?;
    for (fpr, tpr) in points {
        w.write_record([fpr.to_string(), tpr.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> SimonError {
    SimonError::Format(format!("csv write: {e}"))
}

/// One column's verdict in a similarity comparison.
#[derive(Clone, Debug, Serialize)]
pub struct SimilarityRecord {
    pub column: String,
    pub manual: String,
    pub matched: bool,
}

/// Outcome of comparing multi-label annotations to single manual
/// labels: `score = matching / (matching + unique)`.
#[derive(Clone, Debug, Serialize)]
pub struct SimilarityReport {
    pub matching: usize,
    pub unique: usize,
    pub score: f64,
    pub records: Vec<SimilarityRecord>,
}

pub fn similarity_from_counts(matching: usize, unique: usize) -> f64 {
    ratio(matching, matching + unique)
}

/// Compare per-column label sets against single manual labels. A
/// column matches when the manual label appears anywhere in its set.
/// The two lists must name the same columns in the same order.
pub fn similarity_score(
    annotations: &[(String, Vec<String>)],
    manual: &[(String, String)],
) -> Result<SimilarityReport> {
    if annotations.len() != manual.len() {
        return Err(SimonError::Usage(format!(
            "annotation sets cover {} and {} columns",
            annotations.len(),
            manual.len()
        )));
    }
    let mut records = Vec::with_capacity(manual.len());
    let mut matching = 0;
    for (i, ((column, labels), (manual_column, manual_label))) in
        annotations.iter().zip(manual).enumerate()
    {
        if column != manual_column {
            return Err(SimonError::Usage(format!(
                "annotation sets disagree at position {i}: '{column}' vs '{manual_column}'"
            )));
        }
        let matched = labels.contains(manual_label);
        if matched {
            matching += 1;
        }
        records.push(SimilarityRecord {
            column: column.clone(),
            manual: manual_label.clone(),
            matched,
        });
    }
    let unique = manual.len() - matching;
    Ok(SimilarityReport { matching, unique, score: similarity_from_counts(matching, unique), records })
}

pub fn render_similarity_text(report: &SimilarityReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        let verdict = if r.matched { "matched" } else { "unique" };
        out.push_str(&format!("{}: {} {}\n", r.column, r.manual, verdict));
    }
    out.push_str(&format!(
        "similarity {:.2} (matching {}, unique {})\n",
        report.score, report.matching, report.unique
    ));
    out
}

/// Reference outcomes for the benchmark suite of manually annotated
/// open datasets: (dataset, matching, unique, two-decimal score). The
/// similarity formula must reproduce every score from its counts.
pub const BENCHMARK_SIMILARITY_ROWS: &[(&str, usize, usize, f64)] = &[
    ("22_handgeometry", 3, 0, 1.00),
    ("26_radon_seed", 15, 15, 0.50),
    ("27_WordLevels", 13, 1, 0.93),
    ("30_personae", 7, 0, 1.00),
    ("31_urbansound", 5, 1, 0.83),
    ("32_wikiqa", 4, 0, 1.00),
    ("38_sick", 29, 2, 0.94),
    ("49_facebook", 4, 0, 1.00),
    ("56_sunspots", 4, 0, 1.00),
    ("59_umls", 5, 0, 1.00),
    ("60_jester", 4, 0, 1.00),
    ("66_chlConcentration", 3, 0, 1.00),
    ("185_baseball", 18, 1, 0.95),
    ("196_autoMpg", 9, 0, 1.00),
    ("299_librasmove", 92, 0, 1.00),
    ("313_spectrometer", 102, 2, 0.98),
    ("534_cps_85_wages", 12, 0, 1.00),
    ("1491_100_plants", 66, 0, 1.00),
    ("1567_poker_hand", 12, 0, 1.00),
    ("4550_MiceProtein", 82, 1, 0.99),
    ("6_70_com_amazon", 3, 0, 1.00),
    ("6_86_com_DBLP", 3, 0, 1.00),
    ("DS01876", 3, 0, 1.00),
    ("LL0_1100_popularkids", 11, 1, 0.92),
    ("LL0_186_braziltourism", 9, 1, 0.90),
    ("LL0_207_autoPrice", 17, 0, 1.00),
    ("LL0_acled", 29, 2, 0.94),
    ("LL0_acled_reduced", 17, 11, 0.61),
    ("LL1_336_MS_Geolife", 5, 3, 0.63),
    ("336_MS_Geolife_2", 7, 2, 0.78),
    ("LL1_736_stock_market", 6, 0, 1.00),
    ("LL1_pedestrian", 2, 1, 0.67),
    ("uu1_datasmash", 3, 0, 1.00),
    ("uu2_gp_hyperparameter", 4, 0, 1.00),
    ("uu2_gp_hp_v2", 4, 0, 1.00),
    ("uu3_world_dev_ind", 6, 1, 0.86),
    ("uu4_SPECT", 46, 22, 0.68),
    ("57_hypothyroid", 29, 2, 0.94),
];

/// Single primitive dtype for a column, the way generic dataframe
/// inference would see it: int, then float, then boolean, else string.
/// Only non-empty cells count; a column with no values is a string.
pub fn baseline_dtype_annotate(column: &Column) -> &'static str {
    let values: Vec<&str> =
        column.cells.iter().map(|c| c.trim()).filter(|c| !c.is_empty()).collect();
    if values.is_empty() {
        return "string";
    }
    if values.iter().all(|v| v.parse::<i128>().is_ok()) {
        return "int";
    }
    if values.iter().all(|v| v.parse::<f64>().map(|x| x.is_finite()).unwrap_or(false)) {
        return "float";
    }
    let boolean_forms = ["true", "false", "0", "1"];
    if values.iter().all(|v| boolean_forms.iter().any(|b| v.eq_ignore_ascii_case(b))) {
        return "boolean";
    }
    "string"
}

/// One column's annotation: every label's probability, the decided
/// label set, optional ground truth, and which decisions were
/// overridden by full-column heuristics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnAnnotation {
    pub column: String,
    pub probabilities: Vec<(String, f32)>,
    pub predicted: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<String>>,
    pub overridden: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnotationReport {
    pub threshold: f32,
    pub columns: Vec<ColumnAnnotation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverridePolicy {
    On,
    Off,
}

/// Replace the network's categorical/ordinal decisions with the
/// statistical heuristics computed over each full column. Only labels
/// the report actually carries are touched; probabilities and all
/// other labels stay exactly as they were. `columns` must align with
/// the report. Off returns the report unchanged.
pub fn apply_override(
    report: &AnnotationReport,
    columns: &[Column],
    policy: OverridePolicy,
) -> Result<AnnotationReport> {
    if policy == OverridePolicy::Off {
        return Ok(report.clone());
    }
    if report.columns.len() != columns.len() {
        return Err(SimonError::Usage(format!(
            "report covers {} columns but {} were supplied",
            report.columns.len(),
            columns.len()
        )));
    }
    let mut out = report.clone();
    for (annotation, column) in out.columns.iter_mut().zip(columns) {
        let heuristics = apply_stat_heuristics(column, &BTreeSet::new());
        annotation.overridden.clear();
        for label in [CATEGORICAL_LABEL, ORDINAL_LABEL] {
            if !annotation.probabilities.iter().any(|(name, _)| name == label) {
                continue;
            }
            annotation.predicted.retain(|l| l != label);
            if heuristics.contains(label) {
                annotation.predicted.push(label.to_string());
            }
            annotation.overridden.push(label.to_string());
        }
        let order: Vec<&String> = annotation.probabilities.iter().map(|(n, _)| n).collect();
        annotation
            .predicted
            .sort_by_key(|l| order.iter().position(|n| *n == l).unwrap_or(usize::MAX));
    }
    Ok(out)
}

pub fn render_text_report(report: &AnnotationReport) -> String {
    let mut out = String::new();
    let mut decided: std::collections::BTreeMap<&str, usize> = Default::default();
    for col in &report.columns {
        out.push_str(&format!("column {}\n", col.column));
        let labels: Vec<String> = col
            .predicted
            .iter()
            .map(|l| {
                let p = col
                    .probabilities
                    .iter()
                    .find(|(n, _)| n == l)
                    .map(|(_, p)| format!(" ({p:.4})"))
                    .unwrap_or_default();
                format!("{l}{p}")
            })
            .collect();
        out.push_str(&format!(
            "  labels: {}\n",
            if labels.is_empty() { "(none)".to_string() } else { labels.join(", ") }
        ));
        if let Some(truth) = &col.truth {
            out.push_str(&format!("  truth: {}\n", truth.join(", ")));
        }
        if !col.overridden.is_empty() {
            out.push_str(&format!("  overridden: {}\n", col.overridden.join(", ")));
        }
        for l in &col.predicted {
            *decided.entry(l).or_insert(0) += 1;
        }
    }
    out.push_str(&format!(
        "summary: {} columns, threshold {}\n",
        report.columns.len(),
        report.threshold
    ));
    for (label, count) in decided {
        out.push_str(&format!("  {label}: {count}\n"));
    }
    out
}

pub fn render_json_report(report: &AnnotationReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| SimonError::Format(format!("report serialization: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f32]]) -> Vec<Vec<f32>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn binary_accuracy_counts_every_decision() {
        let perfect = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(binary_accuracy(&perfect, &perfect).unwrap(), 1.0);
        let inverted = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(binary_accuracy(&perfect, &inverted).unwrap(), 0.0);
        let predictions = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let targets = m(&[&[1.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(binary_accuracy(&predictions, &targets).unwrap(), 0.75);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = m(&[&[1.0, 0.0]]);
        let b = m(&[&[1.0]]);
        assert!(matches!(binary_accuracy(&a, &b), Err(SimonError::ShapeMismatch { .. })));
        let c = m(&[&[1.0], &[0.0]]);
        assert!(matches!(precision_recall_f1(&a, &c), Err(SimonError::ShapeMismatch { .. })));
    }

    #[test]
    fn precision_recall_f1_hand_count() {
        // TP=2 FP=1 FN=1: p = r = f1 = 2/3.
        let predictions = m(&[&[1.0, 1.0, 1.0, 0.0]]);
        let targets = m(&[&[1.0, 1.0, 0.0, 1.0]]);
        let (p, r, f1) = precision_recall_f1(&predictions, &targets).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_yield_zero() {
        let none = m(&[&[0.0, 0.0]]);
        assert_eq!(precision_recall_f1(&none, &none).unwrap(), (0.0, 0.0, 0.0));
    }

    fn oracle_prf(predictions: &[Vec<f32>], targets: &[Vec<f32>]) -> (f64, f64, f64) {
        // Deliberately re-derived: classify every pair one by one and
        // apply the textbook formulas.
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..predictions.len() {
            for j in 0..predictions[i].len() {
                let p = predictions[i][j] >= 0.5;
                let t = targets[i][j] >= 0.5;
                if p && t {
                    tp += 1.0;
                } else if p && !t {
                    fp += 1.0;
                } else if !p && t {
                    fn_ += 1.0;
                }
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        (precision, recall, f1)
    }

    proptest! {
        #[test]
        fn prf_matches_brute_force_oracle(bits in proptest::collection::vec(proptest::collection::vec(0u8..2, 8), 5)) {
            let predictions: Vec<Vec<f32>> = bits.iter().map(|r| r[..4].iter().map(|&b| b as f32).collect()).collect();
            let targets: Vec<Vec<f32>> = bits.iter().map(|r| r[4..].iter().map(|&b| b as f32).collect()).collect();
            let got = precision_recall_f1(&predictions, &targets).unwrap();
            let want = oracle_prf(&predictions, &targets);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn metrics_stay_in_unit_interval(bits in proptest::collection::vec(proptest::collection::vec(0u8..2, 6), 1..8)) {
            let predictions: Vec<Vec<f32>> = bits.iter().map(|r| r[..3].iter().map(|&b| b as f32).collect()).collect();
            let targets: Vec<Vec<f32>> = bits.iter().map(|r| r[3..].iter().map(|&b| b as f32).collect()).collect();
            let acc = binary_accuracy(&predictions, &targets).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            let (p, r, f1) = precision_recall_f1(&predictions, &targets).unwrap();
            for v in [p, r, f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let (p, r, f1) = precision_recall_f1_macro(&predictions, &targets).unwrap();
            for v in [p, r, f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn roc_is_monotone_with_fixed_endpoints(pairs in proptest::collection::vec((0.001f32..0.999, 0u8..2), 1..60)) {
            let probabilities: Vec<Vec<f32>> = pairs.iter().map(|&(p, _)| vec![p]).collect();
            let targets: Vec<Vec<f32>> = pairs.iter().map(|&(_, t)| vec![t as f32]).collect();
            let points = roc_points(&probabilities, &targets, 50).unwrap();
            prop_assert_eq!(points[0], (0.0, 0.0));
            prop_assert_eq!(*points.last().unwrap(), (1.0, 1.0));
            for w in points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }
    }

    #[test]
    fn perfect_separator_has_unit_auc() {
        let probabilities = m(&[&[0.9], &[0.9], &[0.1], &[0.1]]);
        let targets = m(&[&[1.0], &[1.0], &[0.0], &[0.0]]);
        let points = roc_points(&probabilities, &targets, 100).unwrap();
        assert_eq!(roc_auc(&points), 1.0);
        assert!(points.contains(&(0.0, 1.0)));
    }

    #[test]
    fn uninformative_probabilities_have_half_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut probabilities = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..2000 {
            probabilities.push(vec![rng.gen_range(0.001f32..0.999)]);
            targets.push(vec![if rng.gen_bool(0.5) { 1.0 } else { 0.0 }]);
        }
        let points = roc_points(&probabilities, &targets, 200).unwrap();
        let auc = roc_auc(&points);
        assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    }

    #[test]
    fn roc_rejects_zero_threshold_steps() {
        let x = m(&[&[0.5]]);
        assert!(matches!(roc_points(&x, &x, 0), Err(SimonError::InvalidParameter(_))));
    }

    #[test]
    fn summarize_metrics_combines_everything() {
        let probabilities = m(&[&[0.9, 0.2], &[0.3, 0.8]]);
        let targets = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = summarize_metrics(&probabilities, &targets, 0.5, 20).unwrap();
        assert_eq!(s.binary_accuracy, 1.0);
        assert_eq!(s.f1, 1.0);
        assert_eq!(s.auc, 1.0);
        assert_eq!(s.threshold, 0.5);
        let text = render_metric_text(&s);
        assert!(text.contains("binary_accuracy 1.0000"));
    }

    #[test]
    fn roc_csv_has_two_columns() {
        let mut buf = Vec::new();
        write_roc_csv(&mut buf, &[(0.0, 0.0), (0.25, 0.75), (1.0, 1.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("fpr,tpr"));
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("0.25,0.75"));
    }

    #[test]
    fn similarity_known_counts() {
        assert_eq!(similarity_from_counts(15, 15), 0.5);
        assert!((similarity_from_counts(13, 1) - 0.93).abs() < 0.005);
        assert_eq!(similarity_from_counts(3, 0), 1.0);
        assert_eq!(similarity_from_counts(0, 0), 0.0);
    }

    #[test]
    fn similarity_reproduces_every_benchmark_row() {
        assert_eq!(BENCHMARK_SIMILARITY_ROWS.len(), 38);
        for &(dataset, matching, unique, published) in BENCHMARK_SIMILARITY_ROWS {
            let score = similarity_from_counts(matching, unique);
            assert!(
                (score - published).abs() <= 0.005 + 1e-9,
                "{dataset}: computed {score}, published {published}"
            );
            assert_eq!(
                (score * 100.0).round() as i64,
                (published * 100.0).round() as i64,
                "{dataset} rounds differently"
            );
        }
    }

    #[test]
    fn similarity_score_walks_aligned_columns() {
        let annotations = vec![
            ("age".to_string(), vec!["int".to_string(), "categorical".to_string()]),
            ("name".to_string(), vec!["text".to_string()]),
            ("zip".to_string(), vec!["postal_code".to_string()]),
        ];
        let manual = vec![
            ("age".to_string(), "int".to_string()),
            ("name".to_string(), "text".to_string()),
            ("zip".to_string(), "categorical".to_string()),
        ];
        let report = similarity_score(&annotations, &manual).unwrap();
        assert_eq!((report.matching, report.unique), (2, 1));
        assert!((report.score - 2.0 / 3.0).abs() < 1e-12);
        assert!(report.records[0].matched && !report.records[2].matched);
        let text = render_similarity_text(&report);
        assert!(text.contains("similarity 0.67 (matching 2, unique 1)"));
    }

    #[test]
    fn similarity_score_rejects_misalignment() {
        let annotations = vec![("a".to_string(), vec![])];
        let manual = vec![("b".to_string(), "int".to_string())];
        assert!(matches!(similarity_score(&annotations, &manual), Err(SimonError::Usage(_))));
        let manual = vec![
            ("a".to_string(), "int".to_string()),
            ("b".to_string(), "int".to_string()),
        ];
        assert!(matches!(similarity_score(&annotations, &manual), Err(SimonError::Usage(_))));
    }

    fn col(cells: Vec<&str>) -> Column {
        Column::new("t", cells.into_iter().map(String::from).collect())
    }

    #[test]
    fn baseline_dtype_precedence() {
        assert_eq!(baseline_dtype_annotate(&col(vec!["1", "2", "3"])), "int");
        assert_eq!(baseline_dtype_annotate(&col(vec!["1.5", "2"])), "float");
        assert_eq!(baseline_dtype_annotate(&col(vec!["boy", "girl"])), "string");
        assert_eq!(baseline_dtype_annotate(&col(vec!["true", "false"])), "boolean");
        assert_eq!(baseline_dtype_annotate(&col(vec!["TRUE", "0"])), "boolean");
        assert_eq!(baseline_dtype_annotate(&col(vec!["", "7"])), "int");
        assert_eq!(baseline_dtype_annotate(&col(vec!["", ""])), "string");
        assert_eq!(baseline_dtype_annotate(&col(vec!["0", "1"])), "int");
    }

    fn report_fixture() -> AnnotationReport {
        AnnotationReport {
            threshold: 0.5,
            columns: vec![ColumnAnnotation {
                column: "c0".into(),
                probabilities: vec![
                    ("int".into(), 0.93),
                    ("categorical".into(), 0.21),
                    ("ordinal".into(), 0.11),
                ],
                predicted: vec!["int".into()],
                truth: None,
                overridden: vec![],
            }],
        }
    }

    #[test]
    fn override_replaces_categorical_decisions_from_the_full_column() {
        let report = report_fixture();
        let column = Column::new("c0", (0..300).map(|i| (i % 3).to_string()).collect());
        let out = apply_override(&report, &[column], OverridePolicy::On).unwrap();
        let annotation = &out.columns[0];
        assert!(annotation.predicted.contains(&"categorical".to_string()));
        assert!(annotation.predicted.contains(&"ordinal".to_string()));
        assert!(annotation.predicted.contains(&"int".to_string()));
        assert_eq!(annotation.overridden, vec!["categorical", "ordinal"]);
        // Probabilities are reported untouched.
        assert_eq!(annotation.probabilities, report.columns[0].probabilities);
        // Decided labels keep label-space order.
        assert_eq!(annotation.predicted, vec!["int", "categorical", "ordinal"]);
    }

    #[test]
    fn override_can_also_remove_a_network_decision() {
        let mut report = report_fixture();
        report.columns[0].predicted = vec!["int".into(), "categorical".into()];
        let column = Column::new("c0", (0..500).map(|i| i.to_string()).collect());
        let out = apply_override(&report, &[column], OverridePolicy::On).unwrap();
        assert!(!out.columns[0].predicted.contains(&"categorical".to_string()));
        assert!(out.columns[0].predicted.contains(&"int".to_string()));
        assert_eq!(out.columns[0].overridden, vec!["categorical", "ordinal"]);
    }

    #[test]
    fn override_off_and_unknown_labels_change_nothing() {
        let report = report_fixture();
        let column = Column::new("c0", vec!["1".into(), "1".into()]);
        let off = apply_override(&report, std::slice::from_ref(&column), OverridePolicy::Off).unwrap();
        assert_eq!(off, report);

        let mut no_cat = report.clone();
        no_cat.columns[0].probabilities.retain(|(n, _)| n == "int");
        let on = apply_override(&no_cat, &[column], OverridePolicy::On).unwrap();
        assert_eq!(on.columns[0].predicted, no_cat.columns[0].predicted);
        assert!(on.columns[0].overridden.is_empty());
    }

    #[test]
    fn override_misalignment_is_a_usage_error() {
        let report = report_fixture();
        assert!(matches!(
            apply_override(&report, &[], OverridePolicy::On),
            Err(SimonError::Usage(_))
        ));
    }

    #[test]
    fn text_report_lists_labels_and_summary() {
        let mut report = report_fixture();
        report.columns[0].truth = Some(vec!["int".into()]);
        report.columns[0].overridden = vec!["categorical".into()];
        let text = render_text_report(&report);
        assert!(text.contains("column c0"));
        assert!(text.contains("int (0.9300)"));
        assert!(text.contains("truth: int"));
        assert!(text.contains("overridden: categorical"));
        assert!(text.contains("summary: 1 columns"));
        let json = render_json_report(&report).unwrap();
        assert!(json.contains("\"column\": \"c0\""));
    }
}
