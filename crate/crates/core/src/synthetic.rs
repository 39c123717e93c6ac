//! Procedurally drawn stroke glyphs for smoke tests and demos.
//!
//! Each class is a fixed arrangement of line segments. Every sample jitters
//! position, scale, rotation, stroke width and endpoints, and is drawn as
//! dark ink on a slightly noisy white 28×28 page, like a raw scanned crop.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pgm::write_pgm;
use crate::preprocess::{RawImage, CONTENT_SIDE};

type Segment = [(f64, f64); 2];

/// Segment templates in unit coordinates (x right, y down).
const TEMPLATES: &[&[Segment]] = &[
    // T
    &[[(0.15, 0.2), (0.85, 0.2)], [(0.5, 0.2), (0.5, 0.85)]],
    // L
    &[[(0.3, 0.15), (0.3, 0.85)], [(0.3, 0.85), (0.8, 0.85)]],
    // X
    &[[(0.2, 0.2), (0.8, 0.8)], [(0.8, 0.2), (0.2, 0.8)]],
    // square
    &[
        [(0.2, 0.2), (0.8, 0.2)],
        [(0.8, 0.2), (0.8, 0.8)],
        [(0.8, 0.8), (0.2, 0.8)],
        [(0.2, 0.8), (0.2, 0.2)],
    ],
    // plus
    &[[(0.5, 0.15), (0.5, 0.85)], [(0.15, 0.5), (0.85, 0.5)]],
    // V
    &[[(0.2, 0.2), (0.5, 0.85)], [(0.5, 0.85), (0.8, 0.2)]],
    // equals
    &[[(0.2, 0.35), (0.8, 0.35)], [(0.2, 0.65), (0.8, 0.65)]],
    // triangle
    &[
        [(0.5, 0.15), (0.85, 0.8)],
        [(0.85, 0.8), (0.15, 0.8)],
        [(0.15, 0.8), (0.5, 0.15)],
    ],
    // Z
    &[
        [(0.2, 0.2), (0.8, 0.2)],
        [(0.8, 0.2), (0.2, 0.8)],
        [(0.2, 0.8), (0.8, 0.8)],
    ],
    // H
    &[
        [(0.25, 0.15), (0.25, 0.85)],
        [(0.75, 0.15), (0.75, 0.85)],
        [(0.25, 0.5), (0.75, 0.5)],
    ],
];

pub const GLYPH_CLASSES: usize = TEMPLATES.len();

/// Draws one jittered sample of `class`.
pub fn render_glyph<R: Rng + ?Sized>(class: usize, rng: &mut R) -> Result<RawImage> {
    let template = TEMPLATES
        .get(class)
        .ok_or_else(|| Error::Argument(format!("glyph class {class} out of range (0..{GLYPH_CLASSES})")))?;
    let side = CONTENT_SIDE as f64;
    let scale = rng.random_range(0.85..1.1) * side;
    let angle = rng.random_range(-0.12..0.12) * PI / 2.0;
    let (sin, cos) = angle.sin_cos();
    let shift = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let half_width = rng.random_range(0.8..1.4);

    let mut place = |(x, y): (f64, f64)| -> (f64, f64) {
        let (x, y) = (
            x - 0.5 + rng.random_range(-0.03..0.03),
            y - 0.5 + rng.random_range(-0.03..0.03),
        );
        (
            (x * cos - y * sin) * scale + side / 2.0 + shift.0,
            (x * sin + y * cos) * scale + side / 2.0 + shift.1,
        )
    };
    let segments: Vec<Segment> = template.iter().map(|[a, b]| [place(*a), place(*b)]).collect();

    let ink = rng.random_range(0.0..40.0);
    let mut pixels = Vec::with_capacity(CONTENT_SIDE * CONTENT_SIDE);
    for r in 0..CONTENT_SIDE {
        for c in 0..CONTENT_SIDE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let d = segments
                .iter()
                .map(|s| distance_to_segment(p, s))
                .fold(f64::INFINITY, f64::min);
            // Full ink inside the stroke, linear falloff over one pixel.
            let coverage = (half_width + 0.5 - d).clamp(0.0, 1.0);
            let paper = 255.0 - rng.random_range(0.0..20.0);
            pixels.push((paper - coverage * (paper - ink)).round() as u8);
        }
    }
    RawImage::gray(CONTENT_SIDE, CONTENT_SIDE, pixels)
}

fn distance_to_segment((px, py): (f64, f64), [(ax, ay), (bx, by)]: &Segment) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// `per_class` samples of each of the first `classes` glyphs, class-major.
pub fn glyph_dataset(classes: usize, per_class: usize, seed: u64) -> Result<Vec<(RawImage, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        for _ in 0..per_class {
            out.push((render_glyph(class, &mut rng)?, class));
        }
    }
    Ok(out)
}

/// Writes a glyph dataset as `root/glyph_<k>/<n>.pgm`.
pub fn write_glyph_tree(root: &Path, classes: usize, per_class: usize, seed: u64) -> Result<()> {
    for (i, (img, class)) in glyph_dataset(classes, per_class, seed)?.into_iter().enumerate() {
        let dir = root.join(format!("glyph_{class}"));
        std::fs::create_dir_all(&dir)?;
        write_pgm(&dir.join(format!("{:05}.pgm", i % per_class)), &img)?;
    }
    Ok(())
}
