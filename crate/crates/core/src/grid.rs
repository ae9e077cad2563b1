//! Dense row-major grids of scalars or 2-vectors.
//!
//! Cell `(col, row)` covers pixels `[stride*col, stride*(col+1))` and its
//! center sits at `stride*(col+0.5)`. Sampling at a continuous pixel location
//! interpolates bilinearly between the four surrounding cell centers and
//! clamps to the border cells outside the grid.

use crate::error::{PoseError, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    width: usize,
    height: usize,
    stride: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FieldGrid {
    pub fn zeros(width: usize, height: usize, channels: usize, stride: usize) -> Self {
        assert!(width > 0 && height > 0, "grid must be non-empty");
        assert!(channels == 1 || channels == 2, "channels must be 1 or 2");
        assert!(stride >= 1, "stride must be at least 1");
        Self {
            width,
            height,
            stride,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, stride: usize, v: f32) -> Self {
        let mut g = Self::zeros(width, height, channels, stride);
        g.data.fill(v);
        g
    }

    /// Grid sized to cover an image of `image_w` x `image_h` pixels.
    pub fn for_image(image_w: usize, image_h: usize, channels: usize, stride: usize) -> Self {
        Self::zeros(
            image_w.div_ceil(stride.max(1)),
            image_h.div_ceil(stride.max(1)),
            channels,
            stride,
        )
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        stride: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(PoseError::ShapeMismatch("grid must be non-empty".into()));
        }
        if channels != 1 && channels != 2 {
            return Err(PoseError::ShapeMismatch(format!(
                "channels must be 1 or 2, got {channels}"
            )));
        }
        if stride == 0 {
            return Err(PoseError::InvalidConfig("stride must be at least 1".into()));
        }
        if data.len() != width * height * channels {
            return Err(PoseError::ShapeMismatch(format!(
                "data length {} != {width} x {height} x {channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(PoseError::InvalidValue(format!(
                "non-finite grid value at flat index {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            stride,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn same_shape(&self, other: &FieldGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channels == other.channels
            && self.stride == other.stride
    }

    pub fn check_same_shape(&self, other: &FieldGrid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(PoseError::ShapeMismatch(format!(
                "{}x{}x{} (stride {}) vs {}x{}x{} (stride {})",
                self.width,
                self.height,
                self.channels,
                self.stride,
                other.width,
                other.height,
                other.channels,
                other.stride
            )))
        }
    }

    #[inline]
    fn offset(&self, col: usize, row: usize) -> usize {
        (row * self.width + col) * self.channels
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, channel: usize) -> f32 {
        self.data[self.offset(col, row) + channel]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, channel: usize, v: f32) {
        let i = self.offset(col, row) + channel;
        self.data[i] = v;
    }

    /// Pixel location of a cell center.
    #[inline]
    pub fn cell_center(&self, col: usize, row: usize) -> Point2 {
        let s = self.stride as f64;
        Point2::new(s * (col as f64 + 0.5), s * (row as f64 + 0.5))
    }

    /// Bilinear sample at pixel location `p`, one value per channel.
    pub fn sample_bilinear(&self, p: Point2) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.sample_into(p, &mut out);
        out
    }

    /// Scalar sample of channel 0.
    #[inline]
    pub fn sample_scalar(&self, p: Point2) -> f64 {
        let mut out = [0.0; 2];
        self.sample_into(p, &mut out[..self.channels]);
        out[0]
    }

    /// Vector sample; the second component is zero for scalar grids.
    #[inline]
    pub fn sample_vec2(&self, p: Point2) -> [f64; 2] {
        let mut out = [0.0; 2];
        self.sample_into(p, &mut out[..self.channels]);
        out
    }

    fn sample_into(&self, p: Point2, out: &mut [f64]) {
        let s = self.stride as f64;
        let (c0, c1, fx) = axis_weights(p.x / s - 0.5, self.width);
        let (r0, r1, fy) = axis_weights(p.y / s - 0.5, self.height);
        for (ch, o) in out.iter_mut().enumerate() {
            let v00 = self.get(c0, r0, ch) as f64;
            let v10 = self.get(c1, r0, ch) as f64;
            let v01 = self.get(c0, r1, ch) as f64;
            let v11 = self.get(c1, r1, ch) as f64;
            let top = v00 + (v10 - v00) * fx;
            let bottom = v01 + (v11 - v01) * fx;
            *o = top + (bottom - top) * fy;
        }
    }
}

/// Neighbouring indices and the fractional weight toward the upper one,
/// after clamping `u` to `[0, n-1]`.
#[inline]
fn axis_weights(u: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, max) };
    let i0 = u.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, u - i0 as f64)
}
