//! Raw scans to network input: grayscale, inversion, background
//! suppression, 2-pixel zero padding and scaling to [0, 1].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Side of the character content area in a raw crop.
pub const CONTENT_SIDE: usize = 28;
/// Side of a padded network input.
pub const PADDED_SIDE: usize = 32;
pub const PADDING: usize = (PADDED_SIDE - CONTENT_SIDE) / 2;
/// Inverted pixels darker than this are treated as background.
pub const DEFAULT_BACKGROUND_THRESHOLD: u8 = 26;

/// An 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("image size {width}×{height} is empty")));
        }
        if !matches!(channels, 1 | 3) {
            return Err(Error::format(
                "channels",
                format!("{channels} channels, expected 1 or 3"),
            ));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{} bytes for a {width}×{height}×{channels} image",
                pixels.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, pixels)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::gray(width, height, vec![value; width * height]).expect("valid size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> u8 {
        self.pixels[(row * self.width + col) * self.channels]
    }

    fn require_gray(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::format(
                "channels",
                format!("{op} needs a grayscale image, got {} channels", self.channels),
            ));
        }
        Ok(())
    }

    fn map_gray(&self, op: &str, f: impl Fn(u8) -> u8) -> Result<RawImage> {
        self.require_gray(op)?;
        Ok(RawImage {
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
            ..self.clone()
        })
    }
}

/// Luma `0.299 R + 0.587 G + 0.114 B`, rounded half up. Gray images pass
/// through unchanged.
pub fn to_grayscale(img: &RawImage) -> Result<RawImage> {
    match img.channels {
        1 => Ok(img.clone()),
        3 => {
            // Integer weights in thousandths keep the rounding exact.
            let pixels = img
                .pixels
                .chunks_exact(3)
                .map(|px| {
                    let luma = 299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32;
                    ((luma + 500) / 1000) as u8
                })
                .collect();
            RawImage::gray(img.width, img.height, pixels)
        }
        n => Err(Error::format("channels", format!("unsupported channel count {n}"))),
    }
}

/// `255 − p` for every pixel, turning dark ink on white into bright ink on black.
pub fn invert(img: &RawImage) -> Result<RawImage> {
    img.map_gray("invert", |p| 255 - p)
}

/// Zeroes every pixel below `threshold`; brighter pixels are kept as is.
pub fn suppress_background(img: &RawImage, threshold: u8) -> Result<RawImage> {
    img.map_gray("background suppression", |p| if p < threshold { 0 } else { p })
}

/// Centres a 28×28 crop in a 32×32 zero frame.
pub fn pad_to_32(img: &RawImage) -> Result<RawImage> {
    img.require_gray("padding")?;
    if img.width != CONTENT_SIDE || img.height != CONTENT_SIDE {
        return Err(Error::Shape(format!(
            "padding expects a {CONTENT_SIDE}×{CONTENT_SIDE} image, got {}×{}",
            img.width, img.height
        )));
    }
    let mut out = vec![0u8; PADDED_SIDE * PADDED_SIDE];
    for (r, row) in img.pixels.chunks_exact(CONTENT_SIDE).enumerate() {
        let start = (r + PADDING) * PADDED_SIDE + PADDING;
        out[start..start + CONTENT_SIDE].copy_from_slice(row);
    }
    RawImage::gray(PADDED_SIDE, PADDED_SIDE, out)
}

/// `p / 255` as an H×W×1 tensor.
pub fn normalize<T: Scalar>(img: &RawImage) -> Result<Tensor<T>> {
    img.require_gray("normalize")?;
    let scale = T::of(255.0);
    let data = img.pixels.iter().map(|&p| T::of(p as f64) / scale).collect();
    Tensor::from_vec(&[img.height, img.width, 1], data)
}

/// Runs the byte-level pipeline, stopping before normalisation.
///
/// Raw 28×28 crops go through grayscale, inversion, background suppression
/// and padding. Already-processed 32×32 images are only converted to gray.
pub fn preprocess_bytes(img: &RawImage, already_processed: bool, threshold: u8) -> Result<RawImage> {
    let expected = if already_processed { PADDED_SIDE } else { CONTENT_SIDE };
    if img.width != expected || img.height != expected {
        return Err(Error::Shape(format!(
            "expected a {CONTENT_SIDE}×{CONTENT_SIDE} raw crop or a {PADDED_SIDE}×{PADDED_SIDE} processed image ({}), got {}×{}",
            if already_processed { "processed path" } else { "raw path" },
            img.width,
            img.height
        )));
    }
    let gray = to_grayscale(img)?;
    if already_processed {
        return Ok(gray);
    }
    pad_to_32(&suppress_background(&invert(&gray)?, threshold)?)
}

/// The full pipeline with the default background threshold.
pub fn preprocess<T: Scalar>(img: &RawImage, already_processed: bool) -> Result<Tensor<T>> {
    preprocess_with(img, already_processed, DEFAULT_BACKGROUND_THRESHOLD)
}

pub fn preprocess_with<T: Scalar>(img: &RawImage, already_processed: bool, threshold: u8) -> Result<Tensor<T>> {
    normalize(&preprocess_bytes(img, already_processed, threshold)?)
}

/// Picks the pipeline path from the image size: 28×28 is a raw crop,
/// 32×32 an already-processed image.
pub fn preprocess_auto<T: Scalar>(img: &RawImage, threshold: u8) -> Result<Tensor<T>> {
    let already_processed = img.width == PADDED_SIDE && img.height == PADDED_SIDE;
    preprocess_with(img, already_processed, threshold)
}

/// A problem found in an image that should already be processed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    WrongSize {
        width: usize,
        height: usize,
    },
    NotGrayscale {
        channels: usize,
    },
    /// Count of nonzero pixels in the 2-pixel frame.
    NonzeroBorder {
        pixels: usize,
    },
    /// Count of faint pixels in `(0, threshold)`, i.e. unsuppressed background.
    UnsuppressedBackground {
        pixels: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::WrongSize { width, height } => {
                write!(f, "size {width}×{height}, expected {PADDED_SIDE}×{PADDED_SIDE}")
            }
            Violation::NotGrayscale { channels } => write!(f, "{channels} channels, expected 1"),
            Violation::NonzeroBorder { pixels } => write!(f, "{pixels} nonzero border pixels"),
            Violation::UnsuppressedBackground { pixels } => {
                write!(f, "{pixels} faint background pixels not suppressed to 0")
            }
        }
    }
}

/// Checks a processed image for size, zero border and zero background.
pub fn verify_processed(img: &RawImage, threshold: u8) -> Vec<Violation> {
    if img.channels != 1 {
        return vec![Violation::NotGrayscale { channels: img.channels }];
    }
    if img.width != PADDED_SIDE || img.height != PADDED_SIDE {
        return vec![Violation::WrongSize {
            width: img.width,
            height: img.height,
        }];
    }
    let mut border = 0;
    let mut faint = 0;
    for r in 0..PADDED_SIDE {
        for c in 0..PADDED_SIDE {
            let p = img.pixel(r, c);
            let in_frame = r < PADDING || c < PADDING || r >= PADDED_SIDE - PADDING || c >= PADDED_SIDE - PADDING;
            if in_frame && p != 0 {
                border += 1;
            } else if p > 0 && p < threshold {
                faint += 1;
            }
        }
    }
    let mut out = Vec::new();
    if border > 0 {
        out.push(Violation::NonzeroBorder { pixels: border });
    }
    if faint > 0 {
        out.push(Violation::UnsuppressedBackground { pixels: faint });
    }
    out
}
