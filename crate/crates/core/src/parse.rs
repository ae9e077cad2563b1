//! Box-constrained pose assembly, pose NMS, and pose completion.
//!
//! Inside each box, limbs are visited in the skeleton's depth-first order.
//! For each limb the box's connections are accepted greedily by score,
//! never letting two accepted connections share a candidate. An accepted
//! connection either extends the person that already owns its parent
//! candidate or starts a new person.

use std::collections::{HashMap, HashSet};

use crate::detect::{
    detect_all_peaks, score_connections_where, CandidateConnection, CandidateJoint, DetectConfig,
};
use crate::error::{PoseError, Result};
use crate::geometry::{extent_area, BoundingBox};
use crate::grid::FieldGrid;
use crate::pose::{Pose, PoseJoint};
use crate::skeleton::{Skeleton, NUM_JOINTS, NUM_LIMBS};

/// What the connection term of the pose confidence averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConnectionAverage {
    /// Mean over the connections actually used by the pose.
    #[default]
    Accepted,
    /// Sum over used connections divided by the number of limbs.
    AllLimbs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseConfig {
    /// Weight of the mean joint score.
    pub alpha: f64,
    /// Weight of the mean connection score.
    pub beta: f64,
    /// Weight of the pose-extent to box area ratio.
    pub gamma: f64,
    /// Poses at distance `<= eta` from a more confident pose are dropped.
    pub eta: f64,
    pub completion_min_score: f64,
    pub min_connection_score: f64,
    pub connection_average: ConnectionAverage,
    pub nms: bool,
    pub completion: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.2,
            gamma: 0.6,
            eta: 0.5,
            completion_min_score: DetectConfig::default().peak_threshold,
            min_connection_score: 0.05,
            connection_average: ConnectionAverage::Accepted,
            nms: true,
            completion: true,
        }
    }
}

impl ParseConfig {
    pub fn validate(&self) -> Result<()> {
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PoseError::InvalidConfig(format!(
                "alpha + beta + gamma must be 1, got {sum}"
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(PoseError::InvalidConfig(format!(
                "eta must be in [0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub detect: DetectConfig,
    pub parse: ParseConfig,
}

/// A pose assembled inside one box together with the connections it used.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPose {
    pub pose: Pose,
    pub connections: Vec<CandidateConnection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPose {
    pub pose: Pose,
    pub confidence: f64,
    pub box_index: usize,
}

/// Greedy depth-first assembly of the candidates inside `bbox`.
///
/// `connections` must be ordered as produced by
/// [`crate::detect::score_all_connections`].
pub fn parse_box(
    bbox: &BoundingBox,
    candidates: &[CandidateJoint],
    connections: &[CandidateConnection],
    skeleton: &Skeleton,
    cfg: &ParseConfig,
) -> Vec<AssembledPose> {
    let inside: HashMap<usize, &CandidateJoint> = candidates
        .iter()
        .filter(|c| bbox.contains(c.location))
        .map(|c| (c.id, c))
        .collect();
    if inside.is_empty() {
        return Vec::new();
    }

    let mut per_limb: Vec<Vec<&CandidateConnection>> = vec![Vec::new(); skeleton.limbs.len()];
    for conn in connections {
        if conn.score >= cfg.min_connection_score
            && inside.contains_key(&conn.start)
            && inside.contains_key(&conn.end)
        {
            if let Some(list) = per_limb.get_mut(conn.limb_class) {
                list.push(conn);
            }
        }
    }

    // person index -> (joint ids, used connections)
    let mut persons: Vec<(Vec<usize>, Vec<CandidateConnection>)> = Vec::new();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for limb_conns in &per_limb {
        let mut used = HashSet::new();
        let mut accepted = Vec::new();
        for conn in limb_conns {
            if used.contains(&conn.start) || used.contains(&conn.end) {
                continue;
            }
            used.insert(conn.start);
            used.insert(conn.end);
            accepted.push(**conn);
        }
        for conn in accepted {
            // Under depth-first order the child class is reached by this limb
            // only, so the end candidate cannot already belong to anyone.
            assert!(
                !owner.contains_key(&conn.end),
                "candidate {} assigned twice; limb order is not depth-first",
                conn.end
            );
            match owner.get(&conn.start) {
                Some(&k) => {
                    persons[k].0.push(conn.end);
                    persons[k].1.push(conn);
                    owner.insert(conn.end, k);
                }
                None => {
                    let k = persons.len();
                    persons.push((vec![conn.start, conn.end], vec![conn]));
                    owner.insert(conn.start, k);
                    owner.insert(conn.end, k);
                }
            }
        }
    }

    persons
        .into_iter()
        .map(|(ids, conns)| {
            let mut pose = Pose::empty();
            pose.source_box = Some(*bbox);
            for id in ids {
                let c = inside[&id];
                pose.joints[c.joint_class] = Some(PoseJoint {
                    location: c.location,
                    score: c.score,
                    candidate: Some(c.id),
                });
            }
            AssembledPose {
                pose,
                connections: conns,
            }
        })
        .collect()
}

/// Weighted mix of mean joint score, mean connection score, and the ratio
/// of the pose's own extent to the box area.
pub fn pose_confidence(
    pose: &Pose,
    connection_scores: &[f64],
    bbox: &BoundingBox,
    cfg: &ParseConfig,
) -> f64 {
    let s1 = pose.mean_joint_score();
    let s2 = match (cfg.connection_average, connection_scores.len()) {
        (_, 0) => 0.0,
        (ConnectionAverage::Accepted, n) => connection_scores.iter().sum::<f64>() / n as f64,
        (ConnectionAverage::AllLimbs, _) => {
            connection_scores.iter().sum::<f64>() / NUM_LIMBS as f64
        }
    };
    let area = bbox.area();
    let ratio = if area > 0.0 {
        extent_area(pose.present_locations()) / area
    } else {
        0.0
    };
    cfg.alpha * s1 + cfg.beta * s2 + cfg.gamma * ratio
}

fn same_joint(a: &PoseJoint, b: &PoseJoint) -> bool {
    match (a.candidate, b.candidate) {
        (Some(x), Some(y)) => x == y,
        _ => a.location.distance(b.location) <= 1.0,
    }
}

/// Fraction of joint slots on which the poses disagree, relative to the
/// larger joint count. Slots empty in both poses agree.
pub fn pose_distance(a: &Pose, b: &Pose) -> Result<f64> {
    let n = a.joint_count().max(b.joint_count());
    if n == 0 {
        return Err(PoseError::EmptyInput("both poses are empty"));
    }
    let unmatched = a
        .joints
        .iter()
        .zip(&b.joints)
        .filter(|(x, y)| match (x, y) {
            (None, None) => false,
            (Some(x), Some(y)) => !same_joint(x, y),
            _ => true,
        })
        .count();
    Ok(unmatched as f64 / n as f64)
}

fn ranking(poses: &[ParsedPose]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..poses.len()).collect();
    order.sort_by(|&i, &j| {
        poses[j]
            .confidence
            .total_cmp(&poses[i].confidence)
            .then(poses[i].box_index.cmp(&poses[j].box_index))
            .then(i.cmp(&j))
    });
    order
}

/// Confidence-ordered elimination of redundant poses.
///
/// The most confident surviving pose repeatedly eliminates every other
/// survivor within distance `eta`. Afterwards only the most confident pose
/// of each box is kept. Output is sorted by confidence, then box index.
pub fn pose_nms(poses: Vec<ParsedPose>, cfg: &ParseConfig) -> Vec<ParsedPose> {
    let order = ranking(&poses);
    let mut alive = vec![true; poses.len()];
    for (rank, &i) in order.iter().enumerate() {
        if !alive[i] {
            continue;
        }
        for &j in &order[rank + 1..] {
            if alive[j] && pose_distance(&poses[i].pose, &poses[j].pose).unwrap_or(0.0) <= cfg.eta {
                alive[j] = false;
            }
        }
    }
    let mut seen_boxes = HashSet::new();
    let keep: HashSet<usize> = order
        .iter()
        .copied()
        .filter(|&i| alive[i] && seen_boxes.insert(poses[i].box_index))
        .collect();
    let mut slots: Vec<Option<ParsedPose>> = poses.into_iter().map(Some).collect();
    order
        .into_iter()
        .filter(|i| keep.contains(i))
        .filter_map(|i| slots[i].take())
        .collect()
}

/// Fills empty joint slots with the best unassigned candidate of that class
/// inside the pose's box. Adopted ids are added to `assigned`.
pub fn complete_pose(
    pose: &Pose,
    assigned: &mut HashSet<usize>,
    candidates: &[CandidateJoint],
    cfg: &ParseConfig,
) -> Pose {
    let mut out = pose.clone();
    let Some(bbox) = pose.source_box else {
        return out;
    };
    for j in 0..NUM_JOINTS {
        if out.joints[j].is_some() {
            continue;
        }
        let best = candidates
            .iter()
            .filter(|c| c.joint_class == j && bbox.contains(c.location))
            .filter(|c| !assigned.contains(&c.id) && c.score >= cfg.completion_min_score)
            .min_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
        if let Some(c) = best {
            assigned.insert(c.id);
            out.joints[j] = Some(PoseJoint {
                location: c.location,
                score: c.score,
                candidate: Some(c.id),
            });
        }
    }
    out
}

/// Intermediate products of [`parse_scene_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParse {
    pub candidates: Vec<CandidateJoint>,
    pub connections: Vec<CandidateConnection>,
    pub poses: Vec<ParsedPose>,
}

/// Full decode: peaks, connection scores, per-box assembly, confidence,
/// pose NMS, and completion. Boxes are expected to be extended already.
///
/// Candidates sit at grid-cell centers, so a candidate counts as inside a
/// box when its cell overlaps the box: each box is grown by half a cell
/// before assembly and completion.
pub fn parse_scene(
    boxes: &[BoundingBox],
    maps: &[FieldGrid],
    fields: &[FieldGrid],
    skeleton: &Skeleton,
    cfg: &PipelineConfig,
) -> Result<Vec<ParsedPose>> {
    parse_scene_detailed(boxes, maps, fields, skeleton, cfg).map(|s| s.poses)
}

pub fn parse_scene_detailed(
    boxes: &[BoundingBox],
    maps: &[FieldGrid],
    fields: &[FieldGrid],
    skeleton: &Skeleton,
    cfg: &PipelineConfig,
) -> Result<SceneParse> {
    cfg.detect.validate()?;
    cfg.parse.validate()?;
    if maps.len() != NUM_JOINTS || fields.len() != NUM_LIMBS {
        return Err(PoseError::ShapeMismatch(format!(
            "expected {NUM_JOINTS} maps and {NUM_LIMBS} fields, got {} and {}",
            maps.len(),
            fields.len()
        )));
    }
    for m in maps {
        if m.channels() != 1 {
            return Err(PoseError::ShapeMismatch(
                "confidence maps must be scalar".into(),
            ));
        }
    }
    for f in fields {
        if f.channels() != 2 {
            return Err(PoseError::ShapeMismatch(
                "direction fields must have 2 channels".into(),
            ));
        }
    }
    if boxes.is_empty() {
        return Ok(SceneParse {
            candidates: Vec::new(),
            connections: Vec::new(),
            poses: Vec::new(),
        });
    }

    let half_cell = 0.5 * maps[0].stride() as f64;
    let boxes: Vec<BoundingBox> = boxes
        .iter()
        .map(|b| BoundingBox {
            x_min: b.x_min - half_cell,
            y_min: b.y_min - half_cell,
            x_max: b.x_max + half_cell,
            y_max: b.y_max + half_cell,
        })
        .collect();
    let candidates = detect_all_peaks(maps, &cfg.detect);
    // Only pairs that share a box can ever be connected.
    let membership: Vec<Vec<usize>> = candidates
        .iter()
        .map(|c| {
            boxes
                .iter()
                .enumerate()
                .filter(|(_, b)| b.contains(c.location))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let connections =
        score_connections_where(&candidates, fields, skeleton, &cfg.detect, |p, q| {
            let (a, b) = (&membership[p.id], &membership[q.id]);
            a.iter().any(|i| b.contains(i))
        });

    let mut poses = Vec::new();
    for (box_index, bbox) in boxes.iter().enumerate() {
        for assembled in parse_box(bbox, &candidates, &connections, skeleton, &cfg.parse) {
            let scores: Vec<f64> = assembled.connections.iter().map(|c| c.score).collect();
            let confidence = pose_confidence(&assembled.pose, &scores, bbox, &cfg.parse);
            poses.push(ParsedPose {
                pose: assembled.pose,
                confidence,
                box_index,
            });
        }
    }

    let mut poses = if cfg.parse.nms {
        pose_nms(poses, &cfg.parse)
    } else {
        let order = ranking(&poses);
        let mut slots: Vec<Option<ParsedPose>> = poses.into_iter().map(Some).collect();
        order.into_iter().filter_map(|i| slots[i].take()).collect()
    };

    if cfg.parse.completion {
        let mut assigned: HashSet<usize> =
            poses.iter().flat_map(|p| p.pose.candidate_ids()).collect();
        for p in &mut poses {
            p.pose = complete_pose(&p.pose, &mut assigned, &candidates, &cfg.parse);
        }
    }

    Ok(SceneParse {
        candidates,
        connections,
        poses,
    })
}
