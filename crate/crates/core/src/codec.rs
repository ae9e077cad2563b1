//! Ground-truth field synthesis and the per-stage supervision loss.
//!
//! Confidence maps place an untruncated Gaussian `exp(-|p - x|^2 / sigma^2)`
//! on every visible joint and keep the per-cell maximum over people. Values
//! below [`STORE_FLOOR`] are stored as zero. Direction fields hold the unit
//! limb vector inside a rectangle of half-width `delta` around each limb and
//! average the non-zero per-person vectors where rectangles overlap.
//!
//! The background map is taken to be `1 - max_j S_j`.

use crate::error::{PoseError, Result};
use crate::geometry::Point2;
use crate::grid::FieldGrid;
use crate::pose::SceneAnnotation;
use crate::skeleton::{Skeleton, NUM_JOINTS, NUM_LIMBS};

/// Confidence values below this are written as zero.
pub const STORE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Gaussian spread in pixels.
    pub sigma: f64,
    /// Limb rectangle half-width in pixels.
    pub delta: f64,
    /// Pixels per grid cell.
    pub stride: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            sigma: 7.0,
            delta: 8.0,
            stride: 1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(PoseError::InvalidConfig(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(PoseError::InvalidConfig(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.stride == 0 {
            return Err(PoseError::InvalidConfig("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Single-person confidence at `p` for a joint at `joint`.
#[inline]
pub fn gaussian_confidence(p: Point2, joint: Point2, sigma: f64) -> f64 {
    let d = p - joint;
    (-(d.dot(d)) / (sigma * sigma)).exp()
}

/// True when `p` lies in the rectangle of half-width `delta` spanning the
/// segment `a -> b`. Always false for a zero-length segment.
#[inline]
pub fn in_limb_rectangle(a: Point2, b: Point2, delta: f64, p: Point2) -> bool {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return false;
    }
    let v = d.scale(1.0 / len);
    let r = p - a;
    let along = r.dot(v);
    let across = r.x * -v.y + r.y * v.x;
    (0.0..=len).contains(&along) && across.abs() <= delta
}

fn grid_dims(scene: &SceneAnnotation, stride: usize) -> (usize, usize) {
    (
        scene.image_width.max(1).div_ceil(stride),
        scene.image_height.max(1).div_ceil(stride),
    )
}

/// Inclusive cell index range whose centers may fall in `[lo, hi]` pixels.
fn cell_range(lo: f64, hi: f64, stride: usize, n: usize) -> Option<(usize, usize)> {
    let s = stride as f64;
    let first = ((lo / s) - 0.5).ceil().max(0.0);
    let last = ((hi / s) - 0.5).floor().min((n - 1) as f64);
    if first > last {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

/// One map per joint slot, each the per-cell max over people.
pub fn encode_confidence_maps(
    scene: &SceneAnnotation,
    cfg: &EncoderConfig,
) -> Result<Vec<FieldGrid>> {
    cfg.validate()?;
    let (w, h) = grid_dims(scene, cfg.stride);
    let mut maps: Vec<FieldGrid> = (0..NUM_JOINTS)
        .map(|_| FieldGrid::zeros(w, h, 1, cfg.stride))
        .collect();
    let radius = cfg.sigma * (1.0 / STORE_FLOOR).ln().sqrt();
    for person in &scene.persons {
        for (j, joint) in person.joints.iter().enumerate() {
            let Some(joint) = joint else { continue };
            let x = joint.location;
            let map = &mut maps[j];
            let Some((c0, c1)) = cell_range(x.x - radius, x.x + radius, cfg.stride, w) else {
                continue;
            };
            let Some((r0, r1)) = cell_range(x.y - radius, x.y + radius, cfg.stride, h) else {
                continue;
            };
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let v = gaussian_confidence(map.cell_center(col, row), x, cfg.sigma);
                    if v >= STORE_FLOOR && v as f32 > map.get(col, row, 0) {
                        map.set(col, row, 0, v as f32);
                    }
                }
            }
        }
    }
    Ok(maps)
}

/// Direction fields plus a count of limbs skipped for zero length.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFields {
    pub fields: Vec<FieldGrid>,
    pub degenerate_limbs: usize,
}

/// One two-channel field per limb, in skeleton limb order.
pub fn encode_direction_fields(
    scene: &SceneAnnotation,
    cfg: &EncoderConfig,
    skeleton: &Skeleton,
) -> Result<DirectionFields> {
    cfg.validate()?;
    let (w, h) = grid_dims(scene, cfg.stride);
    let mut fields = Vec::with_capacity(NUM_LIMBS);
    let mut degenerate = 0;
    let mut counts = vec![0u16; w * h];
    let mut sums = vec![[0.0f64; 2]; w * h];
    for limb in &skeleton.limbs {
        counts.fill(0);
        sums.fill([0.0; 2]);
        for person in &scene.persons {
            let (Some(a), Some(b)) = (person.location(limb.parent), person.location(limb.child))
            else {
                continue;
            };
            let d = b - a;
            let len = d.norm();
            if len == 0.0 {
                degenerate += 1;
                continue;
            }
            let v = d.scale(1.0 / len);
            let pad = cfg.delta;
            let Some((c0, c1)) = cell_range(a.x.min(b.x) - pad, a.x.max(b.x) + pad, cfg.stride, w)
            else {
                continue;
            };
            let Some((r0, r1)) = cell_range(a.y.min(b.y) - pad, a.y.max(b.y) + pad, cfg.stride, h)
            else {
                continue;
            };
            let s = cfg.stride as f64;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let p = Point2::new(s * (col as f64 + 0.5), s * (row as f64 + 0.5));
                    if in_limb_rectangle(a, b, cfg.delta, p) {
                        let i = row * w + col;
                        counts[i] += 1;
                        sums[i][0] += v.x;
                        sums[i][1] += v.y;
                    }
                }
            }
        }
        let mut field = FieldGrid::zeros(w, h, 2, cfg.stride);
        let data = field.data_mut();
        for (i, (&n, sum)) in counts.iter().zip(&sums).enumerate() {
            if n > 0 {
                data[2 * i] = (sum[0] / n as f64) as f32;
                data[2 * i + 1] = (sum[1] / n as f64) as f32;
            }
        }
        fields.push(field);
    }
    Ok(DirectionFields {
        fields,
        degenerate_limbs: degenerate,
    })
}

/// `1 - max_j S_j` per cell.
pub fn background_map(confidence_maps: &[FieldGrid]) -> Result<FieldGrid> {
    let first = confidence_maps
        .first()
        .ok_or(PoseError::EmptyInput("no confidence maps"))?;
    if first.channels() != 1 {
        return Err(PoseError::ShapeMismatch(
            "confidence maps must be scalar".into(),
        ));
    }
    for m in &confidence_maps[1..] {
        first.check_same_shape(m)?;
    }
    let mut out = FieldGrid::zeros(first.width(), first.height(), 1, first.stride());
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let max = confidence_maps
            .iter()
            .map(|m| m.data()[i])
            .fold(0.0f32, f32::max);
        *v = (1.0 - max.clamp(0.0, 1.0)).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Confidence maps, background, and direction fields for one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMaps {
    pub maps: Vec<FieldGrid>,
    pub background: FieldGrid,
    pub fields: Vec<FieldGrid>,
}

impl StageMaps {
    /// Encodes a scene into its ground-truth stage tensors.
    pub fn encode(
        scene: &SceneAnnotation,
        cfg: &EncoderConfig,
        skeleton: &Skeleton,
    ) -> Result<Self> {
        let maps = encode_confidence_maps(scene, cfg)?;
        let background = background_map(&maps)?;
        let fields = encode_direction_fields(scene, cfg, skeleton)?.fields;
        Ok(Self {
            maps,
            background,
            fields,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// Background term weight.
    pub lambda: f64,
    /// Binary mask, zero where annotation is missing.
    pub mask: FieldGrid,
}

impl LossWeights {
    pub fn unmasked(width: usize, height: usize, stride: usize, lambda: f64) -> Self {
        Self {
            lambda,
            mask: FieldGrid::filled(width, height, 1, stride, 1.0),
        }
    }
}

/// Confidence and direction-field loss for one stage, as `(loss_s, loss_l)`.
///
/// The mask weights the per-joint and per-limb terms; the background term is
/// weighted by `lambda` only.
pub fn supervision_loss(pred: &StageMaps, gt: &StageMaps, w: &LossWeights) -> Result<(f64, f64)> {
    if w.lambda.is_nan() || w.lambda < 0.0 {
        return Err(PoseError::InvalidConfig("lambda must be >= 0".into()));
    }
    if w.mask.channels() != 1 {
        return Err(PoseError::ShapeMismatch(
            "mask must be single-channel".into(),
        ));
    }
    if pred.maps.len() != gt.maps.len() || pred.fields.len() != gt.fields.len() {
        return Err(PoseError::ShapeMismatch(format!(
            "prediction has {}/{} maps/fields, ground truth {}/{}",
            pred.maps.len(),
            pred.fields.len(),
            gt.maps.len(),
            gt.fields.len()
        )));
    }
    let mask = w.mask.data();
    let check = |a: &FieldGrid, b: &FieldGrid, channels: usize| -> Result<()> {
        a.check_same_shape(b)?;
        if a.channels() != channels || a.width() != w.mask.width() || a.height() != w.mask.height()
        {
            return Err(PoseError::ShapeMismatch(format!(
                "tensor {}x{}x{} incompatible with {}x{} mask",
                a.width(),
                a.height(),
                a.channels(),
                w.mask.width(),
                w.mask.height()
            )));
        }
        Ok(())
    };

    let masked_sq = |a: &FieldGrid, b: &FieldGrid| -> f64 {
        let c = a.channels();
        a.data()
            .chunks_exact(c)
            .zip(b.data().chunks_exact(c))
            .zip(mask)
            .map(|((x, y), &m)| {
                let sq: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(&u, &v)| (u as f64 - v as f64).powi(2))
                    .sum();
                m as f64 * sq
            })
            .sum()
    };

    let mut loss_s = 0.0;
    for (p, g) in pred.maps.iter().zip(&gt.maps) {
        check(p, g, 1)?;
        loss_s += masked_sq(p, g);
    }
    check(&pred.background, &gt.background, 1)?;
    let bg: f64 = pred
        .background
        .data()
        .iter()
        .zip(gt.background.data())
        .map(|(&u, &v)| (u as f64 - v as f64).powi(2))
        .sum();
    loss_s += w.lambda * bg;

    let mut loss_l = 0.0;
    for (p, g) in pred.fields.iter().zip(&gt.fields) {
        check(p, g, 2)?;
        loss_l += masked_sq(p, g);
    }
    Ok((loss_s, loss_l))
}
