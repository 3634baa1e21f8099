//! Binary PGM/PPM and PNG files.

use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

use super::ImageBuffer;

fn format_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::ImageFormat(format!("{}: {e}", path.display()))
}

/// Decode a PGM, PPM or PNG file. Gray inputs give one channel, colour
/// inputs three; alpha and 16-bit depth are dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| format_error(path, e))?;
    decode_dynamic(img)
}

fn decode_dynamic(img: DynamicImage) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        ImageBuffer::new(w, h, 3, img.to_rgb8().into_raw())
    } else {
        ImageBuffer::new(w, h, 1, img.to_luma8().into_raw())
    }
}

/// Encode by extension: `.pgm`/`.ppm`/`.pnm` as binary PNM, `.png` as PNG.
pub fn encode_image(img: &ImageBuffer, extension: &str) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let color = if img.channels() == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
    let mut out = Vec::new();
    let result = match extension.to_ascii_lowercase().as_str() {
        "pgm" | "ppm" | "pnm" => {
            let subtype = if img.channels() == 1 {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            };
            PnmEncoder::new(&mut out).with_subtype(subtype).write_image(img.data(), w, h, color)
        }
        "png" => PngEncoder::new(&mut out).write_image(img.data(), w, h, color),
        other => return Err(Error::ImageFormat(format!("unsupported output extension `{other}`"))),
    };
    result.map_err(|e| Error::ImageFormat(e.to_string()))?;
    Ok(out)
}

/// Atomically write `img` in the format named by the path's extension.
pub fn write_image(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<()> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    write_atomic(path, &encode_image(img, ext)?)
}

/// Whether the file name has an extension this module reads.
pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "ppm" | "pnm" | "png")
    )
}
