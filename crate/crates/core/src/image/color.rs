use crate::error::{Error, Result};

use super::ImageBuffer;

/// Luma `round(0.299 R + 0.587 G + 0.114 B)` of an RGB image.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::ImageFormat(format!(
            "grayscale conversion needs 3 channels, got {}",
            img.channels()
        )));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| super::buffer::clamp_u8(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(p: [u8; 3]) -> u8 {
        to_grayscale(&ImageBuffer::new(1, 1, 3, p.to_vec()).unwrap()).unwrap().data()[0]
    }

    #[test]
    fn luma_examples() {
        assert_eq!(rgb([255, 255, 255]), 255);
        assert_eq!(rgb([0, 0, 0]), 0);
        assert_eq!(rgb([0, 255, 0]), 150);
        for v in [1u8, 17, 128, 254] {
            assert_eq!(rgb([v, v, v]), v);
        }
    }

    #[test]
    fn rejects_gray_input() {
        assert!(to_grayscale(&ImageBuffer::filled(2, 2, 1, 0)).is_err());
    }
}
