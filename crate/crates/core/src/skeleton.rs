//! The fixed 14-joint / 13-limb body tree.

pub const NUM_JOINTS: usize = 14;
pub const NUM_LIMBS: usize = 13;

/// Joint slots, in the AI Challenger 14-keypoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Joint {
    RightShoulder = 0,
    RightElbow = 1,
    RightWrist = 2,
    LeftShoulder = 3,
    LeftElbow = 4,
    LeftWrist = 5,
    RightHip = 6,
    RightKnee = 7,
    RightAnkle = 8,
    LeftHip = 9,
    LeftKnee = 10,
    LeftAnkle = 11,
    HeadTop = 12,
    Neck = 13,
}

impl Joint {
    pub const ALL: [Joint; NUM_JOINTS] = [
        Joint::RightShoulder,
        Joint::RightElbow,
        Joint::RightWrist,
        Joint::LeftShoulder,
        Joint::LeftElbow,
        Joint::LeftWrist,
        Joint::RightHip,
        Joint::RightKnee,
        Joint::RightAnkle,
        Joint::LeftHip,
        Joint::LeftKnee,
        Joint::LeftAnkle,
        Joint::HeadTop,
        Joint::Neck,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::RightShoulder => "right_shoulder",
            Joint::RightElbow => "right_elbow",
            Joint::RightWrist => "right_wrist",
            Joint::LeftShoulder => "left_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightHip => "right_hip",
            Joint::RightKnee => "right_knee",
            Joint::RightAnkle => "right_ankle",
            Joint::LeftHip => "left_hip",
            Joint::LeftKnee => "left_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::HeadTop => "head_top",
            Joint::Neck => "neck",
        }
    }
}

/// A directed skeleton edge from the joint nearer the root to the one
/// further away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limb {
    pub parent: usize,
    pub child: usize,
}

/// Joint names, limbs in depth-first order, and the root joint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub joints: [&'static str; NUM_JOINTS],
    pub limbs: [Limb; NUM_LIMBS],
    pub root: usize,
}

const fn limb(parent: Joint, child: Joint) -> Limb {
    Limb {
        parent: parent as usize,
        child: child as usize,
    }
}

const DFS_LIMBS: [Limb; NUM_LIMBS] = [
    limb(Joint::Neck, Joint::HeadTop),
    limb(Joint::Neck, Joint::RightShoulder),
    limb(Joint::RightShoulder, Joint::RightElbow),
    limb(Joint::RightElbow, Joint::RightWrist),
    limb(Joint::Neck, Joint::LeftShoulder),
    limb(Joint::LeftShoulder, Joint::LeftElbow),
    limb(Joint::LeftElbow, Joint::LeftWrist),
    limb(Joint::Neck, Joint::RightHip),
    limb(Joint::RightHip, Joint::RightKnee),
    limb(Joint::RightKnee, Joint::RightAnkle),
    limb(Joint::Neck, Joint::LeftHip),
    limb(Joint::LeftHip, Joint::LeftKnee),
    limb(Joint::LeftKnee, Joint::LeftAnkle),
];

/// The skeleton every other module assumes, rooted at the neck.
pub fn canonical_skeleton() -> Skeleton {
    let mut joints = [""; NUM_JOINTS];
    for j in Joint::ALL {
        joints[j.index()] = j.name();
    }
    Skeleton {
        joints,
        limbs: DFS_LIMBS,
        root: Joint::Neck.index(),
    }
}

impl Skeleton {
    /// Index of the limb whose child is `joint`, or `None` for the root.
    pub fn incoming_limb(&self, joint: usize) -> Option<usize> {
        self.limbs.iter().position(|l| l.child == joint)
    }

    /// True when walking `limbs` in order only ever extends from joints that
    /// are already reached.
    pub fn is_depth_first(&self) -> bool {
        let mut reached = [false; NUM_JOINTS];
        reached[self.root] = true;
        for l in &self.limbs {
            if !reached[l.parent] || reached[l.child] {
                return false;
            }
            reached[l.child] = true;
        }
        reached.iter().all(|&r| r)
    }
}
