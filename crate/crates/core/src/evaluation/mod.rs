//! Corner-distance accuracy metrics and the baseline grid-search tuner.
//!
//! A predicted corner is correct at threshold `d` when its euclidean distance
//! to the same-labeled reference corner is at most `d` pixels. Corner accuracy
//! counts correct corners over `4 * images`; receipt accuracy counts images
//! whose four corners are all correct. Images without a prediction stay in
//! both denominators.

mod tuner;

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::detections::{corners_from_detections, DetectionRecord};
use crate::error::{Error, Result};
use crate::geometry::{CornerLabel, CornerSet, Point2};

pub use tuner::{tune_baseline, ComboResult, ParamGrid, TuneOptions, TuneOutcome};

pub const DEFAULT_THRESHOLDS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

/// Reference annotation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub corners: CornerSet,
}

#[derive(Serialize, Deserialize)]
struct LabeledPoint {
    label: CornerLabel,
    x: f64,
    y: f64,
}

impl GroundTruth {
    pub fn to_json(&self) -> Value {
        let corners: Vec<LabeledPoint> = self
            .corners
            .labeled()
            .iter()
            .map(|&(label, p)| LabeledPoint { label, x: p.x, y: p.y })
            .collect();
        serde_json::json!({ "image_id": self.image_id, "corners": corners })
    }
}

/// Reads `{"image_id": str, "corners": [{"label","x","y"} x 4]}` lines.
pub fn parse_ground_truth(reader: impl BufRead) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let err = |field: &str, msg: String| Error::Parse {
            line: n,
            field: field.to_string(),
            message: msg,
        };
        let line = line.map_err(|e| err("<stream>", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| err("<record>", e.to_string()))?;
        let image_id = v
            .get("image_id")
            .and_then(Value::as_str)
            .ok_or_else(|| err("image_id", "missing or not a string".into()))?
            .to_string();
        let raw = v
            .get("corners")
            .cloned()
            .ok_or_else(|| err("corners", "missing".into()))?;
        let pts: Vec<LabeledPoint> =
            serde_json::from_value(raw).map_err(|e| err("corners", e.to_string()))?;
        let mut slots: [Option<Point2>; 4] = [None; 4];
        for p in &pts {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(err("corners", format!("non-finite {} corner", p.label)));
            }
            if slots[p.label.index()].replace(Point2::new(p.x, p.y)).is_some() {
                return Err(err("corners", format!("duplicate label {}", p.label)));
            }
        }
        if pts.len() != 4 {
            return Err(err("corners", format!("expected 4 corners, got {}", pts.len())));
        }
        let corners = CornerSet::from_array(slots.map(|s| s.expect("all labels present")));
        out.push(GroundTruth { image_id, corners });
    }
    Ok(out)
}

pub fn corner_error(pred: Point2, reference: Point2) -> f64 {
    pred.distance(reference)
}

/// Per-corner errors of a prediction against its reference, `None` if absent.
pub fn corner_errors(gt: &CornerSet, pred: Option<&CornerSet>) -> Option<[f64; 4]> {
    pred.map(|p| {
        let (g, q) = (gt.to_array(), p.to_array());
        std::array::from_fn(|i| corner_error(q[i], g[i]))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub correct_corners: usize,
    pub correct_receipts: usize,
    pub corner_accuracy: f64,
    pub receipt_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub n_images: usize,
    pub n_corners: usize,
    /// Images with no (complete) prediction.
    pub n_absent: usize,
    pub rows: Vec<ThresholdRow>,
}

impl EvalReport {
    /// Builds a report from per-image corner errors (`None` = no detection).
    pub fn from_errors(method: &str, errors: &[Option<[f64; 4]>], thresholds: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Report("no images to evaluate".into()));
        }
        validate_thresholds(thresholds)?;
        let n = errors.len();
        let rows = thresholds
            .iter()
            .map(|&d| {
                let mut corners = 0;
                let mut receipts = 0;
                for e in errors.iter().flatten() {
                    let ok = e.iter().filter(|&&v| v <= d).count();
                    corners += ok;
                    receipts += usize::from(ok == 4);
                }
                ThresholdRow {
                    threshold: d,
                    correct_corners: corners,
                    correct_receipts: receipts,
                    corner_accuracy: corners as f64 / (4 * n) as f64,
                    receipt_accuracy: receipts as f64 / n as f64,
                }
            })
            .collect();
        Ok(EvalReport {
            method: method.to_string(),
            n_images: n,
            n_corners: 4 * n,
            n_absent: errors.iter().filter(|e| e.is_none()).count(),
            rows,
        })
    }

    pub fn row(&self, threshold: f64) -> Option<&ThresholdRow> {
        self.rows.iter().find(|r| r.threshold == threshold)
    }

    pub fn receipt_accuracy(&self, threshold: f64) -> Option<f64> {
        self.row(threshold).map(|r| r.receipt_accuracy)
    }

    pub fn corner_accuracy(&self, threshold: f64) -> Option<f64> {
        self.row(threshold).map(|r| r.corner_accuracy)
    }

    /// CSV with header `method,threshold,corner_accuracy,receipt_accuracy,n_images`.
    pub fn to_csv(reports: &[EvalReport]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "threshold", "corner_accuracy", "receipt_accuracy", "n_images"])
            .expect("in-memory csv");
        for r in reports {
            for row in &r.rows {
                w.write_record([
                    r.method.clone(),
                    row.threshold.to_string(),
                    format!("{:.6}", row.corner_accuracy),
                    format!("{:.6}", row.receipt_accuracy),
                    r.n_images.to_string(),
                ])
                .expect("in-memory csv");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Human-readable table, one line per threshold.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{}: {} images, {} without detection\n{:>9} {:>9} {:>9}\n",
            self.method, self.n_images, self.n_absent, "threshold", "corners", "receipts"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>9} {:>8.1}% {:>8.1}%\n",
                r.threshold,
                100.0 * r.corner_accuracy,
                100.0 * r.receipt_accuracy
            ));
        }
        s
    }
}

fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::param("thresholds", "at least one threshold required"));
    }
    if let Some(t) = thresholds.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::param("thresholds", format!("{t} is not a non-negative distance")));
    }
    Ok(())
}

/// Scores predictions against references at each distance threshold.
pub fn evaluate(pairs: &[(GroundTruth, Option<CornerSet>)], thresholds: &[f64]) -> Result<EvalReport> {
    evaluate_named("predictions", pairs, thresholds)
}

pub fn evaluate_named(
    method: &str,
    pairs: &[(GroundTruth, Option<CornerSet>)],
    thresholds: &[f64],
) -> Result<EvalReport> {
    let errors: Vec<_> = pairs
        .iter()
        .map(|(gt, pred)| corner_errors(&gt.corners, pred.as_ref()))
        .collect();
    EvalReport::from_errors(method, &errors, thresholds)
}

/// Pairs every reference with the prediction of the same `image_id`.
///
/// Both sides must cover exactly the same ids; otherwise the error lists the
/// ids present on only one side.
pub fn match_predictions(
    truth: &[GroundTruth],
    predictions: &[DetectionRecord],
    min_score: f64,
) -> Result<Vec<(GroundTruth, Option<CornerSet>)>> {
    let mut by_id: BTreeMap<&str, &DetectionRecord> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.image_id.as_str(), p).is_some() {
            return Err(Error::Report(format!("duplicate prediction for image `{}`", p.image_id)));
        }
    }
    let mut seen = BTreeSet::new();
    for g in truth {
        if !seen.insert(g.image_id.as_str()) {
            return Err(Error::Report(format!("duplicate ground truth for image `{}`", g.image_id)));
        }
    }
    let missing: Vec<&str> = seen.iter().filter(|id| !by_id.contains_key(*id)).copied().collect();
    let extra: Vec<&str> = by_id.keys().filter(|id| !seen.contains(*id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = String::from("image ids do not match");
        if !missing.is_empty() {
            msg.push_str(&format!("; without prediction: {}", missing.join(", ")));
        }
        if !extra.is_empty() {
            msg.push_str(&format!("; without ground truth: {}", extra.join(", ")));
        }
        return Err(Error::Report(msg));
    }
    Ok(truth
        .iter()
        .map(|g| (g.clone(), corners_from_detections(by_id[g.image_id.as_str()], min_score)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect() -> CornerSet {
        CornerSet::from_array([(100.0, 100.0), (400.0, 100.0), (400.0, 900.0), (100.0, 900.0)].map(Point2::from))
    }

    fn gt(id: &str) -> GroundTruth {
        GroundTruth { image_id: id.into(), corners: rect() }
    }

    #[test]
    fn corner_error_examples() {
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(3.0, 4.0));
        assert_eq!(corner_error(a, a), 0.0);
        assert_eq!(corner_error(a, b), 5.0);
        assert_eq!(corner_error(b, a), corner_error(a, b));
    }

    #[test]
    fn perfect_prediction() {
        let r = evaluate(&[(gt("a"), Some(rect()))], &DEFAULT_THRESHOLDS).unwrap();
        for row in &r.rows {
            assert_eq!((row.corner_accuracy, row.receipt_accuracy), (1.0, 1.0));
        }
    }

    #[test]
    fn absent_prediction_counts_against_both() {
        let r = evaluate(&[(gt("a"), Some(rect())), (gt("b"), None)], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(r.n_absent, 1);
        for row in &r.rows {
            assert_eq!((row.corner_accuracy, row.receipt_accuracy), (0.5, 0.5));
        }
    }

    #[test]
    fn mixed_errors() {
        // Offsets along x give errors of 5, 15, 25 and 45 px.
        let g = rect();
        let pred = CornerSet::new(
            Point2::new(g.tl.x + 5.0, g.tl.y),
            Point2::new(g.tr.x - 15.0, g.tr.y),
            Point2::new(g.br.x, g.br.y + 25.0),
            Point2::new(g.bl.x, g.bl.y - 45.0),
        );
        let r = evaluate(&[(gt("a"), Some(pred))], &DEFAULT_THRESHOLDS).unwrap();
        let got: Vec<(f64, f64)> = r.rows.iter().map(|x| (x.corner_accuracy, x.receipt_accuracy)).collect();
        assert_eq!(got, vec![(0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (0.75, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(evaluate(&[], &DEFAULT_THRESHOLDS), Err(Error::Report(_))));
        assert!(evaluate(&[(gt("a"), None)], &[]).is_err());
    }

    #[test]
    fn ground_truth_round_trip_and_validation() {
        let line = gt("img-7").to_json().to_string();
        let parsed = parse_ground_truth(line.as_bytes()).unwrap();
        assert_eq!(parsed, vec![gt("img-7")]);
        let dup = line.replace("\"tr\"", "\"tl\"");
        assert!(matches!(parse_ground_truth(dup.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let three = r#"{"image_id":"x","corners":[{"label":"tl","x":1,"y":1},{"label":"tr","x":2,"y":1},{"label":"br","x":2,"y":2}]}"#;
        assert!(parse_ground_truth(three.as_bytes()).is_err());
    }

    #[test]
    fn matching_reports_unmatched_ids() {
        let preds = vec![
            DetectionRecord::from_corners("a", 500, 1000, Some(&rect())),
            DetectionRecord::from_corners("z", 500, 1000, None),
        ];
        let err = match_predictions(&[gt("a"), gt("b")], &preds, 0.5).unwrap_err().to_string();
        assert!(err.contains("without prediction: b"), "{err}");
        assert!(err.contains("without ground truth: z"), "{err}");
        let ok = match_predictions(&[gt("a")], &preds[..1], 0.5).unwrap();
        assert_eq!(ok[0].1, Some(rect()));
    }

    #[test]
    fn csv_layout() {
        let r = evaluate_named("baseline", &[(gt("a"), Some(rect()))], &[10.0, 50.0]).unwrap();
        let csv = EvalReport::to_csv(&[r]);
        assert_eq!(
            csv,
            "method,threshold,corner_accuracy,receipt_accuracy,n_images\n\
             baseline,10,1.000000,1.000000,1\nbaseline,50,1.000000,1.000000,1\n"
        );
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(GroundTruth, Option<CornerSet>)>> {
        let pair = (any::<bool>(), prop::array::uniform8(-60.0f64..60.0)).prop_map(|(present, d)| {
            let g = rect();
            let pred = present.then(|| {
                CornerSet::new(
                    Point2::new(g.tl.x + d[0], g.tl.y + d[1]),
                    Point2::new(g.tr.x + d[2], g.tr.y + d[3]),
                    Point2::new(g.br.x + d[4], g.br.y + d[5]),
                    Point2::new(g.bl.x + d[6], g.bl.y + d[7]),
                )
            });
            (gt("x"), pred)
        });
        prop::collection::vec(pair, 1..30)
    }

    proptest! {
        #[test]
        fn accuracies_are_monotone_in_threshold(pairs in arb_pairs()) {
            let r = evaluate(&pairs, &DEFAULT_THRESHOLDS).unwrap();
            for w in r.rows.windows(2) {
                prop_assert!(w[0].corner_accuracy <= w[1].corner_accuracy);
                prop_assert!(w[0].receipt_accuracy <= w[1].receipt_accuracy);
            }
            for row in &r.rows {
                prop_assert!((0.0..=1.0).contains(&row.corner_accuracy));
                prop_assert!((0.0..=1.0).contains(&row.receipt_accuracy));
            }
        }

        #[test]
        fn permutation_invariant(pairs in arb_pairs(), k in 0usize..30) {
            let mut shuffled = pairs.clone();
            let k = k % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert_eq!(
                evaluate(&pairs, &DEFAULT_THRESHOLDS).unwrap(),
                evaluate(&shuffled, &DEFAULT_THRESHOLDS).unwrap()
            );
        }
    }
}
