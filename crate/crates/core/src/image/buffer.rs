use crate::error::{Error, Result};

/// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ImageFormat(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::ImageFormat(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::ImageFormat(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        ImageBuffer::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid dimensions")
    }

    pub fn gray_from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        ImageBuffer::new(width, height, 1, data).expect("valid dimensions")
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

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub(crate) fn require_gray(&self, what: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::ImageFormat(format!(
                "{what} needs a single-channel image, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    /// Samples as `f64`, single channel only.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Round and clamp wide samples back to 8 bits.
    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Self {
        let data = values.iter().map(|&v| clamp_u8(v)).collect();
        ImageBuffer::new(width, height, 1, data).expect("valid dimensions")
    }

    /// One channel as a wide-scalar plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).map(|&v| v as f64).collect()
    }

    /// Interleave rounded, clamped planes back into an image.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        let mut data = vec![0u8; width * height * channels];
        for (c, p) in planes.iter().enumerate() {
            if p.len() != width * height {
                return Err(Error::ImageFormat(format!(
                    "plane {c} has {} samples for a {width}x{height} image",
                    p.len()
                )));
            }
            for (i, &v) in p.iter().enumerate() {
                data[i * channels + c] = clamp_u8(v);
            }
        }
        ImageBuffer::new(width, height, channels, data)
    }

    /// Apply `f` to every channel plane independently.
    pub fn map_planes(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> ImageBuffer {
        let planes: Vec<Vec<f64>> = (0..self.channels).map(|c| f(&self.plane(c))).collect();
        ImageBuffer::from_planes(self.width, self.height, &planes).expect("planes keep dimensions")
    }

    /// Every sample is 0 or 255.
    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0 || v == 255)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

pub(crate) fn clamp_u8(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Per-pixel probabilities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMask {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ProbMask {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height || width == 0 || height == 0 {
            return Err(Error::ImageFormat(format!(
                "{width}x{height} mask needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ImageFormat(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbMask {
            width,
            height,
            data,
        })
    }

    /// Map tanh-range generator output `g` to `p = (g + 1) / 2`.
    pub fn from_tanh(width: usize, height: usize, g: &[f64]) -> Result<Self> {
        let data = g.iter().map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0)).collect();
        ProbMask::new(width, height, data)
    }

    pub fn from_image(img: &ImageBuffer) -> Result<Self> {
        img.require_gray("probability mask")?;
        ProbMask::new(
            img.width(),
            img.height(),
            img.data().iter().map(|&v| v as f64 / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `round(p · 255)` as a gray image.
    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::from_f64(
            self.width,
            self.height,
            &self.data.iter().map(|p| p * 255.0).collect::<Vec<_>>(),
        )
    }

    /// Binary image: 255 where `p > threshold`.
    pub fn threshold(&self, threshold: f64) -> ImageBuffer {
        let data = self
            .data
            .iter()
            .map(|&p| if p > threshold { 255 } else { 0 })
            .collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("valid dimensions")
    }
}
