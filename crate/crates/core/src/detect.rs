//! Candidate joints from confidence maps, connection scores from direction
//! fields, multi-scale fusion, and detector box extension.

use std::cmp::Ordering;

use crate::error::{PoseError, Result};
use crate::geometry::{BoundingBox, Point2};
use crate::grid::FieldGrid;
use crate::skeleton::Skeleton;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Minimum confidence for a peak, in `(0, 1)`.
    pub peak_threshold: f64,
    /// Side of the square suppression window in cells; odd and at least 3.
    pub nms_window: usize,
    /// Pixel spacing of line-integral samples.
    pub sample_step: f64,
    /// Fraction of box width (height) added on each side of detector boxes.
    pub box_extension: f64,
    /// Refine peak locations with a per-axis quadratic fit.
    pub subpixel: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            peak_threshold: 0.1,
            nms_window: 5,
            sample_step: 1.0,
            box_extension: 0.10,
            subpixel: false,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(PoseError::InvalidConfig(format!(
                "peak_threshold must be in (0, 1), got {}",
                self.peak_threshold
            )));
        }
        if self.nms_window < 3 || self.nms_window.is_multiple_of(2) {
            return Err(PoseError::InvalidConfig(format!(
                "nms_window must be odd and >= 3, got {}",
                self.nms_window
            )));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(PoseError::InvalidConfig("sample_step must be > 0".into()));
        }
        if !(self.box_extension >= 0.0 && self.box_extension.is_finite()) {
            return Err(PoseError::InvalidConfig(
                "box_extension must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// A confidence-map peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateJoint {
    pub id: usize,
    pub joint_class: usize,
    pub location: Point2,
    pub score: f64,
}

/// A scored pairing of a parent-class and a child-class candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateConnection {
    pub limb_class: usize,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Local maxima of `map` over the suppression window, at or above the
/// threshold. Equal-valued neighbours resolve to the lowest row-major index.
/// Ids are assigned from zero in row-major order.
pub fn detect_peaks(
    map: &FieldGrid,
    joint_class: usize,
    cfg: &DetectConfig,
) -> Vec<CandidateJoint> {
    let mut out = Vec::new();
    detect_peaks_into(map, joint_class, cfg, &mut out);
    for (i, c) in out.iter_mut().enumerate() {
        c.id = i;
    }
    out
}

/// Peaks for every map; ids are unique across the whole pass, ordered by
/// joint class then row-major position.
pub fn detect_all_peaks(maps: &[FieldGrid], cfg: &DetectConfig) -> Vec<CandidateJoint> {
    let mut out = Vec::new();
    for (j, map) in maps.iter().enumerate() {
        detect_peaks_into(map, j, cfg, &mut out);
    }
    for (i, c) in out.iter_mut().enumerate() {
        c.id = i;
    }
    out
}

fn detect_peaks_into(
    map: &FieldGrid,
    joint_class: usize,
    cfg: &DetectConfig,
    out: &mut Vec<CandidateJoint>,
) {
    assert_eq!(map.channels(), 1, "confidence maps are single-channel");
    let (w, h) = (map.width(), map.height());
    let half = cfg.nms_window / 2;
    let data = map.data();
    let threshold = cfg.peak_threshold;
    for row in 0..h {
        let r0 = row.saturating_sub(half);
        let r1 = (row + half).min(h - 1);
        for col in 0..w {
            let idx = row * w + col;
            let v = data[idx];
            if (v as f64) < threshold {
                continue;
            }
            let c0 = col.saturating_sub(half);
            let c1 = (col + half).min(w - 1);
            let mut is_peak = true;
            'window: for nr in r0..=r1 {
                for nc in c0..=c1 {
                    let nidx = nr * w + nc;
                    if nidx == idx {
                        continue;
                    }
                    let nv = data[nidx];
                    if nv > v || (nv == v && nidx < idx) {
                        is_peak = false;
                        break 'window;
                    }
                }
            }
            if !is_peak {
                continue;
            }
            let mut location = map.cell_center(col, row);
            if cfg.subpixel {
                let s = map.stride() as f64;
                let dx = quadratic_offset(col, w, |c| data[row * w + c]);
                let dy = quadratic_offset(row, h, |r| data[r * w + col]);
                location = Point2::new(location.x + dx * s, location.y + dy * s);
            }
            out.push(CandidateJoint {
                id: 0,
                joint_class,
                location,
                score: (v as f64).clamp(0.0, 1.0),
            });
        }
    }
}

/// Vertex offset of the parabola through three neighbouring samples, in
/// cells, limited to half a cell.
fn quadratic_offset(i: usize, n: usize, at: impl Fn(usize) -> f32) -> f64 {
    if i == 0 || i + 1 >= n {
        return 0.0;
    }
    let (l, c, r) = (at(i - 1) as f64, at(i) as f64, at(i + 1) as f64);
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

/// Mean cosine between the field and the direction `a -> b`, sampled at
/// evenly spaced points on the segment including both ends.
///
/// The number of samples is `max(2, ceil(|b - a| / sample_step))`.
pub fn connection_score(
    field: &FieldGrid,
    a: Point2,
    b: Point2,
    cfg: &DetectConfig,
) -> Result<f64> {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 || !len.is_finite() {
        return Err(PoseError::DegenerateSegment { x: a.x, y: a.y });
    }
    let dir = d.scale(1.0 / len);
    let n = ((len / cfg.sample_step).ceil() as usize).max(2);
    let last = (n - 1) as f64;
    let mut sum = 0.0;
    let mut max_mag: f64 = 0.0;
    for i in 0..n {
        let q = a + d.scale(i as f64 / last);
        let [fx, fy] = field.sample_vec2(q);
        sum += fx * dir.x + fy * dir.y;
        max_mag = max_mag.max(fx.hypot(fy));
    }
    Ok((sum / n as f64).clamp(-max_mag, max_mag))
}

/// Scores every parent/child candidate pair of every limb.
///
/// Ordered by limb class, then score descending, then `(start, end)`.
pub fn score_all_connections(
    candidates: &[CandidateJoint],
    fields: &[FieldGrid],
    skeleton: &Skeleton,
    cfg: &DetectConfig,
) -> Vec<CandidateConnection> {
    score_connections_where(candidates, fields, skeleton, cfg, |_, _| true)
}

/// As [`score_all_connections`], restricted to pairs accepted by `keep`.
pub fn score_connections_where(
    candidates: &[CandidateJoint],
    fields: &[FieldGrid],
    skeleton: &Skeleton,
    cfg: &DetectConfig,
    mut keep: impl FnMut(&CandidateJoint, &CandidateJoint) -> bool,
) -> Vec<CandidateConnection> {
    let mut out = Vec::new();
    for (c, limb) in skeleton.limbs.iter().enumerate() {
        let Some(field) = fields.get(c) else { break };
        let parents = candidates.iter().filter(|k| k.joint_class == limb.parent);
        for p in parents {
            for q in candidates.iter().filter(|k| k.joint_class == limb.child) {
                if !keep(p, q) {
                    continue;
                }
                // Coincident candidates have no direction; they never connect.
                let Ok(score) = connection_score(field, p.location, q.location, cfg) else {
                    continue;
                };
                out.push(CandidateConnection {
                    limb_class: c,
                    start: p.id,
                    end: q.id,
                    score,
                });
            }
        }
    }
    out.sort_by(compare_connections);
    out
}

pub(crate) fn compare_connections(a: &CandidateConnection, b: &CandidateConnection) -> Ordering {
    a.limb_class
        .cmp(&b.limb_class)
        .then_with(|| b.score.total_cmp(&a.score))
        .then_with(|| (a.start, a.end).cmp(&(b.start, b.end)))
}

/// Maps and fields predicted at one input scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOutput {
    /// Input resize factor relative to the base image.
    pub scale: f64,
    pub maps: Vec<FieldGrid>,
    pub fields: Vec<FieldGrid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
    pub stride: usize,
}

impl GridShape {
    pub fn of(grid: &FieldGrid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            stride: grid.stride(),
        }
    }
}

/// Resamples each scale's grids onto `base` and averages them per cell.
///
/// A base cell centered at pixel `p` reads the scale-`f` grid at `f * p`.
pub fn fuse_scales(
    per_scale: &[ScaleOutput],
    base: GridShape,
) -> Result<(Vec<FieldGrid>, Vec<FieldGrid>)> {
    let first = per_scale
        .first()
        .ok_or(PoseError::EmptyInput("no scales to fuse"))?;
    for s in per_scale {
        if !(s.scale > 0.0 && s.scale.is_finite()) {
            return Err(PoseError::InvalidConfig(format!(
                "scale factor {} must be > 0",
                s.scale
            )));
        }
        if s.maps.len() != first.maps.len() || s.fields.len() != first.fields.len() {
            return Err(PoseError::ShapeMismatch(
                "scales disagree on the number of maps or fields".into(),
            ));
        }
    }
    // Fixed summation order makes the result independent of input order.
    let mut order: Vec<usize> = (0..per_scale.len()).collect();
    order.sort_by(|&a, &b| per_scale[a].scale.total_cmp(&per_scale[b].scale));

    let fuse = |pick: &dyn Fn(&ScaleOutput) -> &FieldGrid, channels: usize| -> Result<FieldGrid> {
        let mut out = FieldGrid::zeros(base.width, base.height, channels, base.stride);
        for s in per_scale {
            if pick(s).channels() != channels {
                return Err(PoseError::ShapeMismatch(
                    "channel count differs across scales".into(),
                ));
            }
        }
        let n = per_scale.len() as f64;
        for row in 0..base.height {
            for col in 0..base.width {
                let p = out.cell_center(col, row);
                let mut acc = [0.0f64; 2];
                for &i in &order {
                    let s = &per_scale[i];
                    let v = pick(s).sample_vec2(p.scale(s.scale));
                    acc[0] += v[0];
                    acc[1] += v[1];
                }
                for (ch, a) in acc.iter().take(channels).enumerate() {
                    out.set(col, row, ch, (a / n) as f32);
                }
            }
        }
        Ok(out)
    };

    let maps = (0..first.maps.len())
        .map(|j| fuse(&|s: &ScaleOutput| &s.maps[j], 1))
        .collect::<Result<Vec<_>>>()?;
    let fields = (0..first.fields.len())
        .map(|c| fuse(&|s: &ScaleOutput| &s.fields[c], 2))
        .collect::<Result<Vec<_>>>()?;
    Ok((maps, fields))
}

/// Moves every edge outward by `fraction` of the box width (left/right) or
/// height (top/bottom), then clips to the image.
pub fn extend_box(b: &BoundingBox, image_w: f64, image_h: f64, fraction: f64) -> BoundingBox {
    let gx = fraction * b.width();
    let gy = fraction * b.height();
    let clipped = BoundingBox {
        x_min: (b.x_min - gx).max(0.0),
        y_min: (b.y_min - gy).max(0.0),
        x_max: (b.x_max + gx).min(image_w),
        y_max: (b.y_max + gy).min(image_h),
    };
    if clipped.x_min < clipped.x_max && clipped.y_min < clipped.y_max {
        clipped
    } else {
        // Entirely outside the image; leave it alone rather than collapse it.
        *b
    }
}
