//! JSON scene and pose files.
//!
//! Ground truth and predictions share one layout. Predictions carry
//! `person_scores`; detector boxes may carry `box_scores`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use posebox::parse::ParsedPose;
use posebox::{BoundingBox, Point2, Pose, SceneAnnotation, NUM_JOINTS};

use crate::error::{CliError, CliResult};

/// One joint as `[x, y, visibility]`; visibility 0 means absent.
pub type JointTriple = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default)]
    pub image_id: String,
    pub image_width: usize,
    pub image_height: usize,
    #[serde(default)]
    pub persons: Vec<[JointTriple; NUM_JOINTS]>,
    #[serde(default)]
    pub boxes: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_scores: Option<Vec<f64>>,
}

pub fn pose_to_triples(pose: &Pose) -> [JointTriple; NUM_JOINTS] {
    let mut out = [[0.0; 3]; NUM_JOINTS];
    for (slot, j) in out.iter_mut().zip(&pose.joints) {
        if let Some(j) = j {
            *slot = [j.location.x, j.location.y, 1.0];
        }
    }
    out
}

pub fn triples_to_pose(triples: &[JointTriple; NUM_JOINTS]) -> CliResult<Pose> {
    let mut locs = [None; NUM_JOINTS];
    for (j, t) in triples.iter().enumerate() {
        if !t.iter().all(|v| v.is_finite()) {
            return Err(CliError::Data(format!("joint {j} has a non-finite value")));
        }
        if t[2] > 0.0 {
            locs[j] = Some(Point2::new(t[0], t[1]));
        } else if t[2] < 0.0 {
            return Err(CliError::Data(format!("joint {j} has visibility {}", t[2])));
        }
    }
    Ok(Pose::from_locations(locs))
}

fn box_to_array(b: &BoundingBox) -> [f64; 4] {
    [b.x_min, b.y_min, b.x_max, b.y_max]
}

impl SceneFile {
    pub fn from_annotation(image_id: &str, scene: &SceneAnnotation) -> Self {
        Self {
            image_id: image_id.to_string(),
            image_width: scene.image_width,
            image_height: scene.image_height,
            persons: scene.persons.iter().map(pose_to_triples).collect(),
            boxes: scene.boxes.iter().map(box_to_array).collect(),
            box_scores: None,
            person_scores: None,
        }
    }

    /// A prediction file: one person per parsed pose, scored by confidence,
    /// with the box the pose was parsed from.
    pub fn from_predictions(
        image_id: &str,
        image_width: usize,
        image_height: usize,
        poses: &[ParsedPose],
    ) -> Self {
        Self {
            image_id: image_id.to_string(),
            image_width,
            image_height,
            persons: poses.iter().map(|p| pose_to_triples(&p.pose)).collect(),
            boxes: poses
                .iter()
                .filter_map(|p| {
                    p.pose
                        .source_box
                        .or_else(|| BoundingBox::enclosing(p.pose.present_locations()))
                })
                .map(|b| box_to_array(&b))
                .collect(),
            box_scores: None,
            person_scores: Some(poses.iter().map(|p| p.confidence).collect()),
        }
    }

    pub fn bounding_boxes(&self) -> CliResult<Vec<BoundingBox>> {
        self.boxes
            .iter()
            .map(|b| BoundingBox::new(b[0], b[1], b[2], b[3]).map_err(CliError::from))
            .collect()
    }

    pub fn to_annotation(&self) -> CliResult<SceneAnnotation> {
        let mut scene = SceneAnnotation::new(self.image_width, self.image_height);
        for p in &self.persons {
            scene.persons.push(triples_to_pose(p)?);
        }
        scene.boxes = self.bounding_boxes()?;
        scene.validate()?;
        Ok(scene)
    }

    /// Persons as scored predictions; missing scores count as 1.
    pub fn to_predictions(&self) -> CliResult<Vec<ParsedPose>> {
        if let Some(s) = &self.person_scores {
            if s.len() != self.persons.len() {
                return Err(CliError::Data(format!(
                    "{}: {} persons but {} person_scores",
                    self.image_id,
                    self.persons.len(),
                    s.len()
                )));
            }
        }
        self.persons
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let confidence = self.person_scores.as_ref().map_or(1.0, |s| s[i]);
                if !confidence.is_finite() {
                    return Err(CliError::Data(format!("person {i} has a non-finite score")));
                }
                Ok(ParsedPose {
                    pose: triples_to_pose(p)?,
                    confidence,
                    box_index: i,
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene files always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::json(path, e))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

/// Reads one scene file, or every `*.json` file of a directory in name order.
pub fn read_scene_set(path: &Path) -> CliResult<Vec<SceneFile>> {
    if !path.is_dir() {
        return Ok(vec![SceneFile::read(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| CliError::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files.iter().map(|p| SceneFile::read(p)).collect()
}
