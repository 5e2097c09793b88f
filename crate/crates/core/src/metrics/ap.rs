//! IoU-based average precision, overall and per distance ring.
//!
//! Per class: detections are matched frame by frame in descending score
//! order to the unmatched ground truth box of highest IoU (lower index on
//! ties) at or above the class threshold. The resulting true/false positive
//! sequence, in global score order, yields a precision/recall curve whose
//! interpolated precision is averaged over evenly spaced recall positions.
//!
//! Ring buckets use the planar distance of the box centre. A matched
//! detection inherits the bucket of its ground truth box; an unmatched one
//! falls in the bucket of its own centre.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use super::iou::iou_3d;
use super::{ApVector, MetricsError};
use crate::exec::{self, Execution};
use crate::geometry::{RangeSpec, RingSlot};

/// Default IoU threshold for a class name.
pub fn default_iou_threshold(class: &str) -> f64 {
    match class {
        "pedestrian" => 0.3,
        "cyclist" => 0.5,
        _ => 0.7,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    pub class: String,
    pub iou_threshold: f64,
}

impl ClassThreshold {
    pub fn new(class: &str) -> Self {
        Self {
            class: class.to_string(),
            iou_threshold: default_iou_threshold(class),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub ranges: RangeSpec,
    pub recall_positions: usize,
    pub classes: Vec<ClassThreshold>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ranges: RangeSpec::default(),
            recall_positions: 40,
            classes: ["vehicle", "car", "bus", "truck", "pedestrian", "cyclist"]
                .into_iter()
                .map(ClassThreshold::new)
                .collect(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.recall_positions == 0 {
            return Err(MetricsError::InvalidConfig("recall_positions must be positive".into()));
        }
        for c in &self.classes {
            if !(c.iou_threshold > 0.0 && c.iou_threshold <= 1.0) {
                return Err(MetricsError::InvalidConfig(format!(
                    "threshold for {} must lie in (0, 1]",
                    c.class
                )));
            }
        }
        Ok(())
    }

    fn threshold(&self, class: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.class == class).map(|c| c.iou_threshold)
    }
}

/// Ground truth and detections of one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameBoxes {
    pub frame_id: String,
    pub ground_truth: Vec<Box3D>,
    pub detections: Vec<Box3D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: String,
    pub ap: ApVector,
    pub gt_total: usize,
    /// Ground-truth count per ring; boxes past the last edge are not listed.
    pub gt_per_range: Vec<usize>,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub per_class: Vec<ClassAp>,
    /// Unweighted mean over the classes that have ground truth in each bucket.
    pub mean: ApVector,
}

/// One scored detection after matching.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    score: f64,
    frame: usize,
    index: usize,
    true_positive: bool,
    bucket: Option<usize>,
}

fn bucket(ranges: &RangeSpec, b: &Box3D) -> Option<usize> {
    match ranges.locate(b.planar_distance()) {
        RingSlot::Ring(r) => Some(r),
        _ => None,
    }
}

fn by_score_desc(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// Greedy score-ordered matching within one frame. Returns, for each
/// detection index, the matched ground-truth index.
pub fn greedy_match(ground_truth: &[&Box3D], detections: &[&Box3D], threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        by_score_desc(detections[a].score.unwrap_or(0.0), detections[b].score.unwrap_or(0.0)).then(a.cmp(&b))
    });
    let mut taken = vec![false; ground_truth.len()];
    let mut matched = vec![None; detections.len()];
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in ground_truth.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = iou_3d(detections[d], gt);
            if iou >= threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            matched[d] = Some(g);
        }
    }
    matched
}

/// Interpolated AP from a score-ordered true-positive sequence.
pub fn average_precision(true_positive: &[bool], gt_count: usize, recall_positions: usize) -> f64 {
    if gt_count == 0 || true_positive.is_empty() {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(true_positive.len());
    let mut precision = Vec::with_capacity(true_positive.len());
    let mut tp = 0usize;
    for (i, &hit) in true_positive.iter().enumerate() {
        if hit {
            tp += 1;
        }
        recall.push(tp as f64 / gt_count as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // precision envelope: max precision at any later (higher recall) cutoff
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut total = 0.0;
    for k in 1..=recall_positions {
        let r = k as f64 / recall_positions as f64;
        let i = recall.partition_point(|&x| x < r);
        if i < recall.len() {
            total += precision[i];
        }
    }
    total / recall_positions as f64
}

/// Per-class and class-mean AP over a set of frames.
pub fn per_range_ap(frames: &[FrameBoxes], config: &EvalConfig, exec: Execution) -> Result<ApReport, MetricsError> {
    config.validate()?;
    for frame in frames {
        for (index, b) in frame.ground_truth.iter().chain(&frame.detections).enumerate() {
            if config.threshold(&b.class).is_none() {
                return Err(MetricsError::UnknownClass {
                    class: b.class.clone(),
                    frame: frame.frame_id.clone(),
                });
            }
            if !b.is_valid() {
                return Err(MetricsError::InvalidBox {
                    frame: frame.frame_id.clone(),
                    index,
                });
            }
        }
        for (index, d) in frame.detections.iter().enumerate() {
            match d.score {
                None => {
                    return Err(MetricsError::MissingScore {
                        frame: frame.frame_id.clone(),
                        index,
                    })
                }
                Some(s) if !(s >= 0.0) || !s.is_finite() => {
                    return Err(MetricsError::NegativeScore {
                        frame: frame.frame_id.clone(),
                        index,
                        score: s,
                    })
                }
                _ => {}
            }
        }
    }

    let rings = config.ranges.ring_count();
    let per_class: Vec<ClassAp> = config
        .classes
        .iter()
        .map(|c| evaluate_class(frames, config, &c.class, c.iou_threshold, exec))
        .collect();

    let mean = class_mean(&per_class, rings);
    Ok(ApReport { per_class, mean })
}

fn evaluate_class(frames: &[FrameBoxes], config: &EvalConfig, class: &str, threshold: f64, exec: Execution) -> ClassAp {
    let rings = config.ranges.ring_count();
    let ranges = &config.ranges;
    let per_frame: Vec<(Vec<Option<usize>>, Vec<Outcome>)> = exec::map_range(exec, frames.len(), |f| {
        let frame = &frames[f];
        let gt: Vec<&Box3D> = frame.ground_truth.iter().filter(|b| b.class == class).collect();
        let det_idx: Vec<usize> = frame
            .detections
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class == class)
            .map(|(i, _)| i)
            .collect();
        let dets: Vec<&Box3D> = det_idx.iter().map(|&i| &frame.detections[i]).collect();
        let matched = greedy_match(&gt, &dets, threshold);
        let outcomes = matched
            .iter()
            .enumerate()
            .map(|(k, m)| Outcome {
                score: dets[k].score.unwrap_or(0.0),
                frame: f,
                index: det_idx[k],
                true_positive: m.is_some(),
                bucket: match m {
                    Some(g) => bucket(ranges, gt[*g]),
                    None => bucket(ranges, dets[k]),
                },
            })
            .collect();
        let gt_buckets = gt.iter().map(|b| bucket(ranges, b)).collect();
        (gt_buckets, outcomes)
    });

    let mut gt_per_range = vec![0usize; rings];
    let mut gt_total = 0usize;
    let mut outcomes = Vec::new();
    for (gt_buckets, o) in per_frame {
        gt_total += gt_buckets.len();
        for r in gt_buckets.into_iter().flatten() {
            gt_per_range[r] += 1;
        }
        outcomes.extend(o);
    }
    outcomes.sort_by(|a, b| {
        by_score_desc(a.score, b.score)
            .then(a.frame.cmp(&b.frame))
            .then(a.index.cmp(&b.index))
    });

    let flags: Vec<bool> = outcomes.iter().map(|o| o.true_positive).collect();
    let overall = average_precision(&flags, gt_total, config.recall_positions);
    let ranges_ap = (0..rings)
        .map(|r| {
            let flags: Vec<bool> = outcomes
                .iter()
                .filter(|o| o.bucket == Some(r))
                .map(|o| o.true_positive)
                .collect();
            average_precision(&flags, gt_per_range[r], config.recall_positions)
        })
        .collect();
    let tp = flags.iter().filter(|f| **f).count();
    ClassAp {
        class: class.to_string(),
        ap: ApVector {
            overall,
            ranges: ranges_ap,
        },
        gt_total,
        gt_per_range,
        true_positives: tp,
        false_positives: flags.len() - tp,
    }
}

fn class_mean(per_class: &[ClassAp], rings: usize) -> ApVector {
    let mean_of = |values: Vec<f64>| {
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    let overall = mean_of(
        per_class
            .iter()
            .filter(|c| c.gt_total > 0)
            .map(|c| c.ap.overall)
            .collect(),
    );
    let ranges = (0..rings)
        .map(|r| {
            mean_of(
                per_class
                    .iter()
                    .filter(|c| c.gt_per_range[r] > 0)
                    .map(|c| c.ap.ranges[r])
                    .collect(),
            )
        })
        .collect();
    ApVector { overall, ranges }
}
