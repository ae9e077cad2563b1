//! Object Keypoint Similarity, AP over ten OKS thresholds, and pipeline
//! diagnostics.
//!
//! OKS follows the keypoint benchmark definition: for each visible
//! ground-truth joint `exp(-d^2 / (2 s^2 k^2))`, averaged over visible joints,
//! with `s^2` the ground-truth box area. Missing predicted joints score zero.

use std::cmp::Ordering;

use crate::error::{PoseError, Result};
use crate::geometry::BoundingBox;
use crate::parse::ParsedPose;
use crate::pose::{Pose, SceneAnnotation};
use crate::skeleton::{Joint, NUM_JOINTS};

/// OKS thresholds 0.50, 0.55, ..., 0.95.
pub const OKS_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OksConfig {
    /// Per-joint falloff constants, indexed by joint slot.
    pub per_joint_k: [f64; NUM_JOINTS],
}

impl Default for OksConfig {
    /// COCO keypoint sigmas (k = 2 sigma); head-top uses the nose value and
    /// neck the shoulder value.
    fn default() -> Self {
        let mut k = [0.0; NUM_JOINTS];
        for j in Joint::ALL {
            let sigma = match j {
                Joint::RightShoulder | Joint::LeftShoulder | Joint::Neck => 0.079,
                Joint::RightElbow | Joint::LeftElbow => 0.072,
                Joint::RightWrist | Joint::LeftWrist => 0.062,
                Joint::RightHip | Joint::LeftHip => 0.107,
                Joint::RightKnee | Joint::LeftKnee => 0.087,
                Joint::RightAnkle | Joint::LeftAnkle => 0.089,
                Joint::HeadTop => 0.026,
            };
            k[j.index()] = 2.0 * sigma;
        }
        Self { per_joint_k: k }
    }
}

impl OksConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_joint_k.iter().all(|&k| k > 0.0 && k.is_finite()) {
            Ok(())
        } else {
            Err(PoseError::InvalidConfig(
                "all OKS constants must be > 0".into(),
            ))
        }
    }
}

pub fn oks(pred: &Pose, gt: &Pose, gt_box: &BoundingBox, cfg: &OksConfig) -> Result<f64> {
    let area = gt_box.area();
    let mut sum = 0.0;
    let mut visible = 0usize;
    for j in 0..NUM_JOINTS {
        let Some(g) = gt.joints[j] else { continue };
        visible += 1;
        if let Some(p) = pred.joints[j] {
            let d2 = {
                let d = p.location - g.location;
                d.dot(d)
            };
            let k = cfg.per_joint_k[j];
            sum += (-d2 / (2.0 * area * k * k)).exp();
        }
    }
    if visible == 0 {
        return Err(PoseError::NoVisibleJoints);
    }
    Ok(sum / visible as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ap: f64,
    pub ap_per_threshold: [f64; 10],
    /// Mean OKS of the prediction/ground-truth pairs matched at OKS 0.5.
    pub mean_oks: f64,
    /// Pose counts at OKS 0.5.
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
}

/// Indices of `preds` sorted by confidence, highest first, stable.
fn by_confidence(preds: &[ParsedPose]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    order
}

/// Greedy matching in row order: each row takes the still-free column with
/// the highest similarity at or above `threshold` (lowest column on ties).
pub fn greedy_match(similarity: &[Vec<f64>], n_cols: usize, threshold: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; n_cols];
    similarity
        .iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (c, &s) in row.iter().enumerate() {
                if taken[c] || s < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((c, s));
                }
            }
            let (c, _) = best?;
            taken[c] = true;
            Some(c)
        })
        .collect()
}

/// All-point interpolated area under the precision/recall curve.
///
/// Detections with equal confidence are added as one step, so the result
/// does not depend on how ties are ordered.
pub fn average_precision_from_ranked(detections: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 || detections.is_empty() {
        return 0.0;
    }
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new(); // (recall, precision)
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let conf = sorted[i].0;
        while i < sorted.len() && sorted[i].0.total_cmp(&conf) == Ordering::Equal {
            tp += sorted[i].1 as usize;
            seen += 1;
            i += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / seen as f64));
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..points.len() {
        let envelope = points[k..].iter().map(|p| p.1).fold(0.0, f64::max);
        ap += (points[k].0 - prev_recall) * envelope;
        prev_recall = points[k].0;
    }
    ap
}

/// Similarities between one scene's predictions (rows, confidence order) and
/// its ground-truth people.
pub fn oks_matrix(
    preds: &[&ParsedPose],
    gt: &SceneAnnotation,
    cfg: &OksConfig,
) -> Result<Vec<Vec<f64>>> {
    let boxes = (0..gt.persons.len())
        .map(|k| {
            gt.person_box(k).ok_or_else(|| {
                PoseError::InvalidValue(format!("ground-truth person {k} has no usable box"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    preds
        .iter()
        .map(|p| {
            gt.persons
                .iter()
                .zip(&boxes)
                .map(|(g, b)| oks(&p.pose, g, b, cfg))
                .collect()
        })
        .collect()
}

/// AP over the ten OKS thresholds for scenes aligned by position.
pub fn average_precision(
    pred_scenes: &[Vec<ParsedPose>],
    gt_scenes: &[SceneAnnotation],
    cfg: &OksConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if pred_scenes.len() != gt_scenes.len() {
        return Err(PoseError::ShapeMismatch(format!(
            "{} prediction scenes vs {} ground-truth scenes",
            pred_scenes.len(),
            gt_scenes.len()
        )));
    }
    let n_gt: usize = gt_scenes.iter().map(|s| s.persons.len()).sum();
    if n_gt == 0 {
        return Err(PoseError::EmptyInput("no ground-truth poses"));
    }

    let mut per_scene = Vec::with_capacity(gt_scenes.len());
    for (preds, gt) in pred_scenes.iter().zip(gt_scenes) {
        let ordered: Vec<&ParsedPose> = by_confidence(preds)
            .into_iter()
            .map(|i| &preds[i])
            .collect();
        let sims = oks_matrix(&ordered, gt, cfg)?;
        per_scene.push((ordered, sims, gt.persons.len()));
    }

    let mut ap_per_threshold = [0.0; 10];
    let (mut matched, mut oks_sum) = (0usize, 0.0);
    for (t, &threshold) in OKS_THRESHOLDS.iter().enumerate() {
        let mut detections = Vec::new();
        for (ordered, sims, n_cols) in &per_scene {
            let assignment = greedy_match(sims, *n_cols, threshold);
            for (row, m) in assignment.iter().enumerate() {
                detections.push((ordered[row].confidence, m.is_some()));
                if t == 0 {
                    if let Some(c) = m {
                        matched += 1;
                        oks_sum += sims[row][*c];
                    }
                }
            }
        }
        ap_per_threshold[t] = average_precision_from_ranked(&detections, n_gt);
    }
    let n_pred: usize = pred_scenes.iter().map(Vec::len).sum();
    Ok(EvalReport {
        ap: ap_per_threshold.iter().sum::<f64>() / ap_per_threshold.len() as f64,
        ap_per_threshold,
        mean_oks: if matched > 0 {
            oks_sum / matched as f64
        } else {
            0.0
        },
        matched,
        missed: n_gt - matched,
        spurious: n_pred - matched,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Predictions whose best ground-truth match was already claimed.
    pub duplicate_poses: usize,
    pub mean_joints_per_pose: f64,
    /// Visible ground-truth joints not covered by their matched prediction.
    pub disconnected_joints: usize,
}

/// Duplicate, joint-count, and disconnected-joint statistics for one scene.
///
/// Predictions are visited by confidence; each claims the ground-truth person
/// it matches best (OKS at least 0.5) unless that person is already claimed.
pub fn pipeline_diagnostics(
    result: &[ParsedPose],
    gt: &SceneAnnotation,
    cfg: &OksConfig,
) -> Result<Diagnostics> {
    let ordered: Vec<&ParsedPose> = by_confidence(result)
        .into_iter()
        .map(|i| &result[i])
        .collect();
    let sims = oks_matrix(&ordered, gt, cfg)?;
    let mut claimed: Vec<Option<usize>> = vec![None; gt.persons.len()];
    let mut duplicates = 0;
    for (row, s) in sims.iter().enumerate() {
        let best = s
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= 0.5)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)));
        if let Some((g, _)) = best {
            if claimed[g].is_some() {
                duplicates += 1;
            } else {
                claimed[g] = Some(row);
            }
        }
    }
    let mut disconnected = 0;
    for (g, person) in gt.persons.iter().enumerate() {
        for j in 0..NUM_JOINTS {
            if person.joints[j].is_none() {
                continue;
            }
            let covered = claimed[g].is_some_and(|row| ordered[row].pose.joints[j].is_some());
            if !covered {
                disconnected += 1;
            }
        }
    }
    let mean_joints = if result.is_empty() {
        0.0
    } else {
        result.iter().map(|p| p.pose.joint_count()).sum::<usize>() as f64 / result.len() as f64
    };
    Ok(Diagnostics {
        duplicate_poses: duplicates,
        mean_joints_per_pose: mean_joints,
        disconnected_joints: disconnected,
    })
}
