//! Binary PGM ("P5", maxval 255) reading and writing.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::RawImage;

/// Decodes a binary PGM. Header tokens are whitespace separated and may be
/// interleaved with `#` comments; a single whitespace byte separates the
/// header from the raster.
pub fn decode_pgm(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format("magic", "not a binary PGM (expected \"P5\")"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (slot, name) in fields.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = next_number(bytes, &mut pos, name)?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format("maxval", format!("{maxval}, only 255 is supported")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("header", "missing whitespace before raster")),
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::format("width", "image dimensions overflow"))?;
    let raster = &bytes[pos..];
    if raster.len() < n {
        return Err(Error::format(
            "raster",
            format!("{} bytes for a {width}×{height} image", raster.len()),
        ));
    }
    RawImage::gray(width, height, raster[..n].to_vec())
}

fn next_number(bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::format(name, "header ended early")),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::format(name, "expected a positive integer"))
}

/// Encodes a grayscale image as binary PGM.
pub fn encode_pgm(img: &RawImage) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        return Err(Error::format("channels", "PGM holds grayscale images only"));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.write_all(img.pixels())?;
    Ok(out)
}

pub fn write_pgm(path: &Path, img: &RawImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img)?)?;
    Ok(())
}

/// Turns file bytes into an image. The default handles PGM and, with the
/// `png` feature, PNG.
pub trait ImageDecoder: Sync {
    fn decode(&self, bytes: &[u8]) -> Result<RawImage>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DefaultDecoder;

impl ImageDecoder for DefaultDecoder {
    fn decode(&self, bytes: &[u8]) -> Result<RawImage> {
        decode_image(bytes)
    }
}

impl<F> ImageDecoder for F
where
    F: Fn(&[u8]) -> Result<RawImage> + Sync,
{
    fn decode(&self, bytes: &[u8]) -> Result<RawImage> {
        self(bytes)
    }
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Sniffs the format from the leading bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RawImage> {
    if bytes.starts_with(PNG_SIGNATURE) {
        return decode_png(bytes);
    }
    decode_pgm(bytes)
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> Result<RawImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format("png", e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(g) => RawImage::gray(w, h, g.into_raw()),
        other => RawImage::new(w, h, 3, other.into_rgb8().into_raw()),
    }
}

#[cfg(not(feature = "png"))]
fn decode_png(_bytes: &[u8]) -> Result<RawImage> {
    Err(Error::format(
        "png",
        "PNG support is not enabled (build with the `png` feature)",
    ))
}
