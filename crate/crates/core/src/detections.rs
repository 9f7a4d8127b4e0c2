//! Detector-agnostic predictions: one JSON record per image with labeled,
//! scored boxes in original-image pixels. A corner is the center of its box.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{CornerLabel, CornerSet, Point2};

/// Score cut used when none is given.
pub const DEFAULT_MIN_SCORE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: CornerLabel,
    pub score: f64,
    /// `[xmin, ymin, xmax, ymax]`.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
}

impl Detection {
    pub fn center(&self) -> Point2 {
        let [x0, y0, x1, y1] = self.bbox;
        Point2::new((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }

    pub fn area(&self) -> f64 {
        let [x0, y0, x1, y1] = self.bbox;
        (x1 - x0) * (y1 - y0)
    }

    /// Zero-size box of score 1 at a corner position.
    pub fn point(label: CornerLabel, p: Point2) -> Self {
        Detection {
            label,
            score: 1.0,
            bbox: [p.x, p.y, p.x, p.y],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub detections: Vec<Detection>,
}

impl DetectionRecord {
    pub fn from_corners(image_id: impl Into<String>, width: usize, height: usize, corners: Option<&CornerSet>) -> Self {
        let detections = corners
            .map(|c| c.labeled().iter().map(|&(l, p)| Detection::point(l, p)).collect())
            .unwrap_or_default();
        DetectionRecord {
            image_id: image_id.into(),
            width,
            height,
            detections,
        }
    }
}

fn field_err(line: usize, field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn get_number(obj: &Value, key: &str, line: usize, path: &str) -> Result<f64> {
    obj.get(key)
        .ok_or_else(|| field_err(line, path, "missing"))?
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| field_err(line, path, "expected a finite number"))
}

fn get_dim(obj: &Value, key: &str, line: usize) -> Result<usize> {
    let v = obj.get(key).ok_or_else(|| field_err(line, key, "missing"))?;
    match v.as_u64() {
        Some(n) if n > 0 => Ok(n as usize),
        _ => Err(field_err(line, key, "expected a positive integer")),
    }
}

/// Parses and validates one predictions line (1-based `line` for errors).
pub fn parse_record(text: &str, line: usize) -> Result<DetectionRecord> {
    let v: Value = serde_json::from_str(text).map_err(|e| field_err(line, "<record>", e.to_string()))?;
    if !v.is_object() {
        return Err(field_err(line, "<record>", "expected a JSON object"));
    }
    let image_id = v
        .get("image_id")
        .ok_or_else(|| field_err(line, "image_id", "missing"))?
        .as_str()
        .ok_or_else(|| field_err(line, "image_id", "expected a string"))?
        .to_string();
    let width = get_dim(&v, "width", line)?;
    let height = get_dim(&v, "height", line)?;
    let dets = v
        .get("detections")
        .ok_or_else(|| field_err(line, "detections", "missing"))?
        .as_array()
        .ok_or_else(|| field_err(line, "detections", "expected an array"))?;

    let mut detections = Vec::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        let path = |f: &str| format!("detections[{i}].{f}");
        let label: CornerLabel = d
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| field_err(line, path("label"), "missing or not a string"))?
            .parse()
            .map_err(|e: String| field_err(line, path("label"), e))?;
        let score = get_number(d, "score", line, &path("score"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(field_err(line, path("score"), format!("{score} outside [0, 1]")));
        }
        let b = d
            .get("box")
            .and_then(Value::as_array)
            .filter(|a| a.len() == 4)
            .ok_or_else(|| field_err(line, path("box"), "expected [xmin, ymin, xmax, ymax]"))?;
        let mut bbox = [0.0; 4];
        for (k, slot) in bbox.iter_mut().enumerate() {
            *slot = b[k]
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| field_err(line, path("box"), "coordinates must be finite numbers"))?;
        }
        let [x0, y0, x1, y1] = bbox;
        if x0 > x1 {
            return Err(field_err(line, path("box"), format!("xmin {x0} > xmax {x1}")));
        }
        if y0 > y1 {
            return Err(field_err(line, path("box"), format!("ymin {y0} > ymax {y1}")));
        }
        if x0 < 0.0 || y0 < 0.0 || x1 > width as f64 || y1 > height as f64 {
            return Err(field_err(
                line,
                path("box"),
                format!("{bbox:?} outside {width}x{height} image"),
            ));
        }
        detections.push(Detection { label, score, bbox });
    }
    Ok(DetectionRecord {
        image_id,
        width,
        height,
        detections,
    })
}

/// Reads predictions JSONL. Blank lines are ignored; the first malformed line aborts.
pub fn parse_predictions(reader: impl BufRead) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| field_err(i + 1, "<stream>", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

/// Per label, the best detection scoring at least `min_score` (higher score,
/// then larger box, then earlier). Indexed by [`CornerLabel::index`].
pub fn best_per_label(r: &DetectionRecord, min_score: f64) -> [Option<&Detection>; 4] {
    let mut best: [Option<&Detection>; 4] = [None; 4];
    for d in r.detections.iter().filter(|d| d.score >= min_score) {
        let slot = &mut best[d.label.index()];
        let better = match slot {
            None => true,
            Some(b) => d.score > b.score || (d.score == b.score && d.area() > b.area()),
        };
        if better {
            *slot = Some(d);
        }
    }
    best
}

/// Corner set from box centers when all four labels clear `min_score`.
pub fn corners_from_detections(r: &DetectionRecord, min_score: f64) -> Option<CornerSet> {
    let best = best_per_label(r, min_score);
    let mut pts = [Point2::default(); 4];
    for (slot, d) in pts.iter_mut().zip(best) {
        *slot = d?.center();
    }
    Some(CornerSet::from_array(pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FOUR: &str = r#"{"image_id":"a","width":100,"height":80,"detections":[
        {"label":"tl","score":0.9,"box":[0,0,20,20]},
        {"label":"tr","score":0.8,"box":[80,0,100,20]},
        {"label":"br","score":0.7,"box":[70,60,90,80]},
        {"label":"bl","score":0.6,"box":[0,50,30,80]}]}"#;

    fn one_line(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join("")
    }

    #[test]
    fn empty_stream() {
        assert!(parse_predictions("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn one_record_four_detections() {
        let recs = parse_predictions(one_line(FOUR).as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].detections.len(), 4);
        let cs = corners_from_detections(&recs[0], 0.0).unwrap();
        assert_eq!(cs.tl, Point2::new(10.0, 10.0));
        assert_eq!(cs.br, Point2::new(80.0, 70.0));
        assert_eq!(cs.bl, Point2::new(15.0, 65.0));
    }

    #[test]
    fn inverted_box_is_a_parse_error_at_its_line() {
        let good = one_line(FOUR);
        let bad = good.replace("[80,0,100,20]", "[100,0,80,20]");
        let text = format!("{good}\n\n{bad}\n");
        match parse_predictions(text.as_bytes()) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "detections[1].box");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_violations_name_the_field() {
        let cases = [
            (r#"{"width":1,"height":1,"detections":[]}"#, "image_id"),
            (r#"{"image_id":"x","width":0,"height":1,"detections":[]}"#, "width"),
            (r#"{"image_id":"x","width":5,"height":5,"detections":[{"label":"top","score":1,"box":[0,0,1,1]}]}"#, "detections[0].label"),
            (r#"{"image_id":"x","width":5,"height":5,"detections":[{"label":"tl","score":1.5,"box":[0,0,1,1]}]}"#, "detections[0].score"),
            (r#"{"image_id":"x","width":5,"height":5,"detections":[{"label":"tl","score":1,"box":[0,0,9,1]}]}"#, "detections[0].box"),
            ("not json", "<record>"),
        ];
        for (text, want) in cases {
            match parse_predictions(text.as_bytes()) {
                Err(Error::Parse { line: 1, field, .. }) => assert_eq!(field, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_point_boxes_are_accepted() {
        let r = DetectionRecord::from_corners(
            "p",
            50,
            50,
            Some(&CornerSet::from_array([(1.0, 2.0), (40.0, 2.0), (40.0, 45.0), (1.0, 45.0)].map(Point2::from))),
        );
        let line = serde_json::to_string(&r).unwrap();
        let back = parse_predictions(line.as_bytes()).unwrap();
        assert_eq!(back[0], r);
        assert_eq!(corners_from_detections(&back[0], 0.5).unwrap().tr, Point2::new(40.0, 2.0));
    }

    #[test]
    fn missing_label_gives_none() {
        let mut r = parse_record(&one_line(FOUR), 1).unwrap();
        r.detections.retain(|d| d.label != CornerLabel::Tl);
        assert_eq!(corners_from_detections(&r, 0.0), None);
    }

    #[test]
    fn max_score_wins() {
        let mut r = parse_record(&one_line(FOUR), 1).unwrap();
        r.detections.push(Detection { label: CornerLabel::Tr, score: 0.4, bbox: [50.0, 10.0, 60.0, 20.0] });
        r.detections.push(Detection { label: CornerLabel::Tr, score: 0.9, bbox: [60.0, 0.0, 70.0, 10.0] });
        assert_eq!(corners_from_detections(&r, 0.0).unwrap().tr, Point2::new(65.0, 5.0));
    }

    #[test]
    fn score_ties_prefer_larger_then_earlier_boxes() {
        let mut r = parse_record(&one_line(FOUR), 1).unwrap();
        r.detections.push(Detection { label: CornerLabel::Tl, score: 0.9, bbox: [0.0, 0.0, 40.0, 40.0] });
        r.detections.push(Detection { label: CornerLabel::Tl, score: 0.9, bbox: [10.0, 10.0, 50.0, 50.0] });
        assert_eq!(corners_from_detections(&r, 0.0).unwrap().tl, Point2::new(20.0, 20.0));
    }

    #[test]
    fn min_score_filters() {
        let r = parse_record(&one_line(FOUR), 1).unwrap();
        assert!(corners_from_detections(&r, 0.6).is_some());
        assert!(corners_from_detections(&r, 0.65).is_none());
    }

    fn arb_record() -> impl Strategy<Value = DetectionRecord> {
        let det = (0usize..4, 0.0f64..1.0, 0.0f64..500.0, 0.0f64..500.0, 1.0f64..100.0).prop_map(
            |(l, score, x, y, s)| Detection {
                label: CornerLabel::ALL[l],
                // Coarse scores make ties likely.
                score: (score * 4.0).round() / 4.0,
                bbox: [x, y, x + s, y + s],
            },
        );
        prop::collection::vec(det, 0..12).prop_map(|detections| DetectionRecord {
            image_id: "r".into(),
            width: 1000,
            height: 1000,
            detections,
        })
    }

    proptest! {
        #[test]
        fn order_invariant(r in arb_record(), rot in 0usize..12) {
            let mut shuffled = r.clone();
            if !shuffled.detections.is_empty() {
                let k = rot % shuffled.detections.len();
                shuffled.detections.rotate_left(k);
                shuffled.detections.reverse();
            }
            // Exact duplicates in score and area may legitimately resolve to either box.
            let dup = r.detections.iter().enumerate().any(|(i, a)| r.detections[i + 1..].iter()
                .any(|b| a.label == b.label && a.score == b.score && a.area() == b.area() && a.bbox != b.bbox));
            if !dup {
                prop_assert_eq!(corners_from_detections(&r, 0.5), corners_from_detections(&shuffled, 0.5));
            }
        }

        #[test]
        fn translation_equivariant(r in arb_record(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            let mut moved = r.clone();
            for d in &mut moved.detections {
                d.bbox = [d.bbox[0] + dx, d.bbox[1] + dy, d.bbox[2] + dx, d.bbox[3] + dy];
            }
            match (corners_from_detections(&r, 0.25), corners_from_detections(&moved, 0.25)) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    for (p, q) in a.to_array().iter().zip(b.to_array()) {
                        prop_assert!((q.x - p.x - dx).abs() < 1e-9 && (q.y - p.y - dy).abs() < 1e-9);
                    }
                }
                other => prop_assert!(false, "{:?}", other),
            }
        }

        #[test]
        fn raising_min_score_never_creates_a_detection(r in arb_record(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            if corners_from_detections(&r, lo).is_none() {
                prop_assert!(corners_from_detections(&r, hi).is_none());
            }
        }
    }
}
