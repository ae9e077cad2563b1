//! Skeleton overlays drawn onto a blank canvas.

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use posebox::{Pose, Skeleton};

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

pub const BACKGROUND: Rgb<u8> = Rgb([0, 0, 0]);

pub fn person_color(k: usize) -> Rgb<u8> {
    Rgb(PALETTE[k % PALETTE.len()])
}

fn dimmed(c: Rgb<u8>) -> Rgb<u8> {
    Rgb(c.0.map(|v| v / 2))
}

pub fn render(
    width: u32,
    height: u32,
    persons: &[Pose],
    boxes: &[[f64; 4]],
    skeleton: &Skeleton,
) -> RgbImage {
    let mut img = RgbImage::from_pixel(width.max(1), height.max(1), BACKGROUND);
    for (k, b) in boxes.iter().enumerate() {
        let (x0, y0) = (b[0].round() as i32, b[1].round() as i32);
        let w = (b[2] - b[0]).round().max(1.0) as u32;
        let h = (b[3] - b[1]).round().max(1.0) as u32;
        draw_hollow_rect_mut(
            &mut img,
            Rect::at(x0, y0).of_size(w, h),
            dimmed(person_color(k)),
        );
    }
    for (k, pose) in persons.iter().enumerate() {
        let color = person_color(k);
        for limb in &skeleton.limbs {
            if let (Some(a), Some(b)) = (pose.location(limb.parent), pose.location(limb.child)) {
                draw_line_segment_mut(
                    &mut img,
                    (a.x as f32, a.y as f32),
                    (b.x as f32, b.y as f32),
                    color,
                );
            }
        }
        for p in pose.present_locations() {
            draw_filled_circle_mut(&mut img, (p.x.round() as i32, p.y.round() as i32), 2, color);
        }
    }
    img
}
