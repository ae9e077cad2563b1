//! Replayable synthetic scenes and simulated prediction error.
//!
//! All randomness comes from [`CounterRng`], a counter-based generator: the
//! `i`-th draw of stream `s` under seed `k` is
//! `splitmix64(key + i * 0x9E3779B97F4A7C15)` with
//! `key = splitmix64(k ^ splitmix64(s))`, where `splitmix64` is the standard
//! SplitMix64 output function. Uniform reals use the top 53 bits. A corpus is
//! therefore identical on every platform for a given seed.

use crate::codec::{in_limb_rectangle, EncoderConfig};
use crate::error::{PoseError, Result};
use crate::geometry::{extent, BoundingBox, Point2};
use crate::grid::FieldGrid;
use crate::pose::{Pose, SceneAnnotation};
use crate::skeleton::{Joint, Skeleton, NUM_JOINTS};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based random stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: splitmix64(seed ^ splitmix64(stream)),
            counter: 0,
        }
    }

    /// The `index`-th draw of a stream without stepping through it.
    #[inline]
    pub fn at(seed: u64, stream: u64, index: u64) -> u64 {
        let key = splitmix64(seed ^ splitmix64(stream));
        splitmix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline]
    pub fn unit_from(bits: u64) -> f64 {
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        splitmix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        Self::unit_from(self.next_u64())
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    /// Limb class whose direction field is zeroed.
    pub limb: usize,
    /// Chance that any given person is occluded.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Inclusive range of people per scene.
    pub num_persons: (usize, usize),
    /// Inclusive range of person heights in pixels.
    pub person_scale: (f64, f64),
    /// Minimum distance between person box centers.
    pub min_separation: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub noise_amplitude: f64,
    pub occlusion: Option<Occlusion>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_persons: (1, 5),
            person_scale: (80.0, 130.0),
            min_separation: 120.0,
            image_width: 848,
            image_height: 480,
            noise_amplitude: 0.0,
            occlusion: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.num_persons;
        if lo > hi {
            return Err(PoseError::InvalidConfig(format!(
                "empty person range {lo}..={hi}"
            )));
        }
        let (slo, shi) = self.person_scale;
        if !(slo > 0.0 && slo <= shi && shi.is_finite()) {
            return Err(PoseError::InvalidConfig(format!(
                "bad person scale range {slo}..={shi}"
            )));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(PoseError::InvalidConfig(
                "noise_amplitude must be >= 0".into(),
            ));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(PoseError::InvalidConfig("image must be non-empty".into()));
        }
        if let Some(o) = self.occlusion {
            if !(0.0..=1.0).contains(&o.probability) {
                return Err(PoseError::InvalidConfig(
                    "occlusion probability must be in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub scene: SceneAnnotation,
    /// People asked for; more than `scene.persons.len()` when packing failed.
    pub requested_persons: usize,
}

const PLACEMENT_ATTEMPTS: usize = 200;
const EDGE_MARGIN: f64 = 2.0;

/// Direction at angle `theta` from straight down, turning toward +x.
fn dir(theta: f64) -> Point2 {
    Point2::new(theta.sin(), theta.cos())
}

/// Joint offsets from the neck for a roughly upright figure of height `h`.
fn sample_figure(rng: &mut CounterRng, h: f64) -> [Point2; NUM_JOINTS] {
    let mut j = [Point2::default(); NUM_JOINTS];
    let neck = Point2::default();
    j[Joint::Neck.index()] = neck;
    j[Joint::HeadTop.index()] =
        neck + dir(std::f64::consts::PI + rng.uniform(-0.25, 0.25)).scale(0.13 * h);

    // Image-left is the person's right side.
    for (side, sho, elb, wri, hip, kne, ank) in [
        (
            -1.0,
            Joint::RightShoulder,
            Joint::RightElbow,
            Joint::RightWrist,
            Joint::RightHip,
            Joint::RightKnee,
            Joint::RightAnkle,
        ),
        (
            1.0,
            Joint::LeftShoulder,
            Joint::LeftElbow,
            Joint::LeftWrist,
            Joint::LeftHip,
            Joint::LeftKnee,
            Joint::LeftAnkle,
        ),
    ] {
        let shoulder = neck
            + Point2::new(
                side * rng.uniform(0.10, 0.12) * h,
                rng.uniform(0.0, 0.03) * h,
            );
        let upper = side * rng.uniform(0.15, 1.1);
        let elbow = shoulder + dir(upper).scale(0.17 * h);
        let fore = upper + side * rng.uniform(-0.4, 0.9);
        let wrist = elbow + dir(fore).scale(0.15 * h);

        let hip_pt = neck
            + Point2::new(
                side * rng.uniform(0.06, 0.08) * h,
                rng.uniform(0.31, 0.35) * h,
            );
        let thigh = side * rng.uniform(0.0, 0.3);
        let knee = hip_pt + dir(thigh).scale(0.24 * h);
        let shin = thigh + side * rng.uniform(-0.2, 0.15);
        let ankle = knee + dir(shin).scale(0.23 * h);

        j[sho.index()] = shoulder;
        j[elb.index()] = elbow;
        j[wri.index()] = wrist;
        j[hip.index()] = hip_pt;
        j[kne.index()] = knee;
        j[ank.index()] = ankle;
    }

    let tilt = rng.uniform(-0.17, 0.17);
    let (s, c) = tilt.sin_cos();
    j.map(|p| Point2::new(c * p.x - s * p.y, s * p.x + c * p.y))
}

/// Samples articulated figures and places them with center separation of at
/// least `min_separation`. Ground-truth boxes are the minimal joint boxes.
pub fn generate_scene(cfg: &SynthConfig) -> Result<GeneratedScene> {
    cfg.validate()?;
    let mut rng = CounterRng::new(cfg.seed, 0);
    let requested = rng.range_inclusive(cfg.num_persons.0, cfg.num_persons.1);
    let (w, h) = (cfg.image_width as f64, cfg.image_height as f64);
    let mut scene = SceneAnnotation::new(cfg.image_width, cfg.image_height);
    let mut centers: Vec<Point2> = Vec::new();

    'people: for _ in 0..requested {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let height = rng.uniform(cfg.person_scale.0, cfg.person_scale.1);
            let figure = sample_figure(&mut rng, height);
            let (lo, hi) = extent(figure).expect("figure has joints");
            let (x0, x1) = (EDGE_MARGIN - lo.x, w - EDGE_MARGIN - hi.x);
            let (y0, y1) = (EDGE_MARGIN - lo.y, h - EDGE_MARGIN - hi.y);
            let (u, v) = (rng.next_f64(), rng.next_f64());
            if x0 > x1 || y0 > y1 {
                continue;
            }
            let neck = Point2::new(x0 + (x1 - x0) * u, y0 + (y1 - y0) * v);
            let joints = figure.map(|p| p + neck);
            let Some(bbox) = BoundingBox::enclosing(joints) else {
                continue;
            };
            let center = bbox.center();
            if centers
                .iter()
                .any(|c| c.distance(center) < cfg.min_separation)
            {
                continue;
            }
            centers.push(center);
            scene.persons.push(Pose::from_locations(joints.map(Some)));
            scene.boxes.push(bbox);
            continue 'people;
        }
        break;
    }
    Ok(GeneratedScene {
        scene,
        requested_persons: requested,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub maps: Vec<FieldGrid>,
    pub fields: Vec<FieldGrid>,
    /// Indices of people whose configured limb was zeroed.
    pub occluded_persons: Vec<usize>,
}

const MAP_STREAM: u64 = 1 << 32;
const FIELD_STREAM: u64 = 2 << 32;
const OCCLUSION_STREAM: u64 = 3 << 32;

/// `v + noise`, limited to `[lo, hi]`, and never more than `amplitude` away
/// from `v` after rounding to f32.
fn add_bounded(v: f32, noise: f64, amplitude: f64, lo: f64, hi: f64) -> f32 {
    let mut out = (v as f64 + noise).clamp(lo, hi) as f32;
    while (out as f64 - v as f64).abs() > amplitude {
        out = if out > v {
            next_down(out)
        } else {
            next_up(out)
        };
    }
    out
}

fn next_up(x: f32) -> f32 {
    if x == 0.0 {
        f32::from_bits(1)
    } else if x > 0.0 {
        f32::from_bits(x.to_bits() + 1)
    } else {
        f32::from_bits(x.to_bits() - 1)
    }
}

fn next_down(x: f32) -> f32 {
    -next_up(-x)
}

/// Adds seeded zero-mean uniform noise in `[-amplitude, amplitude]` to every
/// map and field value (maps are kept in `[0, 1]`), then zeroes the
/// configured limb's field inside the rectangles of selected people.
pub fn perturb_fields(
    maps: &[FieldGrid],
    fields: &[FieldGrid],
    scene: &SceneAnnotation,
    encoder: &EncoderConfig,
    skeleton: &Skeleton,
    cfg: &SynthConfig,
) -> Result<Perturbed> {
    cfg.validate()?;
    let a = cfg.noise_amplitude;
    let noise = |stream: u64, i: usize| {
        a * (2.0 * CounterRng::unit_from(CounterRng::at(cfg.seed, stream, i as u64)) - 1.0)
    };
    let mut maps = maps.to_vec();
    let mut fields = fields.to_vec();
    if a > 0.0 {
        for (j, m) in maps.iter_mut().enumerate() {
            for (i, v) in m.data_mut().iter_mut().enumerate() {
                *v = add_bounded(*v, noise(MAP_STREAM + j as u64, i), a, 0.0, 1.0);
            }
        }
        for (c, f) in fields.iter_mut().enumerate() {
            for (i, v) in f.data_mut().iter_mut().enumerate() {
                *v = add_bounded(*v, noise(FIELD_STREAM + c as u64, i), a, f64::MIN, f64::MAX);
            }
        }
    }

    let mut occluded = Vec::new();
    if let Some(occ) = cfg.occlusion {
        let limb = *skeleton.limbs.get(occ.limb).ok_or_else(|| {
            PoseError::InvalidConfig(format!("occluded limb {} out of range", occ.limb))
        })?;
        let field = fields
            .get_mut(occ.limb)
            .ok_or_else(|| PoseError::ShapeMismatch("missing field for occluded limb".into()))?;
        for (k, person) in scene.persons.iter().enumerate() {
            let draw = CounterRng::unit_from(CounterRng::at(cfg.seed, OCCLUSION_STREAM, k as u64));
            if draw >= occ.probability {
                continue;
            }
            let (Some(pa), Some(pb)) = (person.location(limb.parent), person.location(limb.child))
            else {
                continue;
            };
            occluded.push(k);
            for row in 0..field.height() {
                for col in 0..field.width() {
                    if in_limb_rectangle(pa, pb, encoder.delta, field.cell_center(col, row)) {
                        field.set(col, row, 0, 0.0);
                        field.set(col, row, 1, 0.0);
                    }
                }
            }
        }
    }
    Ok(Perturbed {
        maps,
        fields,
        occluded_persons: occluded,
    })
}
