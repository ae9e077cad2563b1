use crate::error::{PoseError, Result};
use crate::geometry::{BoundingBox, Point2};
use crate::skeleton::NUM_JOINTS;

/// One occupied joint slot of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseJoint {
    pub location: Point2,
    /// In `[0, 1]`.
    pub score: f64,
    /// Identity of the detected candidate this joint came from, if any.
    /// Ground-truth poses carry `None`.
    pub candidate: Option<usize>,
}

impl PoseJoint {
    pub fn annotated(location: Point2) -> Self {
        Self {
            location,
            score: 1.0,
            candidate: None,
        }
    }
}

/// Up to 14 joints indexed by [`crate::Joint`] slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pose {
    pub joints: [Option<PoseJoint>; NUM_JOINTS],
    pub source_box: Option<BoundingBox>,
}

impl Pose {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Ground-truth pose from optional joint locations.
    pub fn from_locations(locations: [Option<Point2>; NUM_JOINTS]) -> Self {
        let mut pose = Self::empty();
        for (slot, loc) in pose.joints.iter_mut().zip(locations) {
            *slot = loc.map(PoseJoint::annotated);
        }
        pose
    }

    pub fn joint_count(&self) -> usize {
        self.joints.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.joint_count() == 0
    }

    pub fn location(&self, joint: usize) -> Option<Point2> {
        self.joints[joint].map(|j| j.location)
    }

    pub fn present_locations(&self) -> impl Iterator<Item = Point2> + '_ {
        self.joints.iter().flatten().map(|j| j.location)
    }

    pub fn candidate_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.joints.iter().flatten().filter_map(|j| j.candidate)
    }

    pub fn mean_joint_score(&self) -> f64 {
        let n = self.joint_count();
        if n == 0 {
            return 0.0;
        }
        self.joints.iter().flatten().map(|j| j.score).sum::<f64>() / n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(PoseError::InvalidValue("pose has no joints".into()));
        }
        for j in self.joints.iter().flatten() {
            if !j.location.is_finite() {
                return Err(PoseError::InvalidValue("non-finite joint location".into()));
            }
            if !(0.0..=1.0).contains(&j.score) {
                return Err(PoseError::InvalidValue(format!(
                    "joint score {} outside [0, 1]",
                    j.score
                )));
            }
        }
        Ok(())
    }
}

/// Image size, ground-truth people, and boxes for one image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneAnnotation {
    pub image_width: usize,
    pub image_height: usize,
    pub persons: Vec<Pose>,
    pub boxes: Vec<BoundingBox>,
}

impl SceneAnnotation {
    pub fn new(image_width: usize, image_height: usize) -> Self {
        Self {
            image_width,
            image_height,
            ..Self::default()
        }
    }

    /// Checks that every visible joint lies inside the image.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        for (k, person) in self.persons.iter().enumerate() {
            for (j, joint) in person.joints.iter().enumerate() {
                if let Some(joint) = joint {
                    let p = joint.location;
                    if !p.is_finite() || p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                        return Err(PoseError::InvalidValue(format!(
                            "person {k} joint {j} at ({}, {}) is outside the {w}x{h} image",
                            p.x, p.y
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Box used to scale person `k`: its listed box when boxes are one per
    /// person, otherwise the minimal box around its joints.
    pub fn person_box(&self, k: usize) -> Option<BoundingBox> {
        if self.boxes.len() == self.persons.len() {
            return self.boxes.get(k).copied();
        }
        BoundingBox::enclosing(self.persons.get(k)?.present_locations())
    }
}
