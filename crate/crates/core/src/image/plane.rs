use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Single-channel image with nominal range `[0, 1]`, row-major.
///
/// Values outside the nominal range are allowed (resampling rings); they are
/// clamped when quantized.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::contract(
                "ImagePlane::new",
                format!(
                    "{height}x{width} plane needs {} values, got {}",
                    height * width,
                    values.len()
                ),
            ));
        }
        Ok(ImagePlane {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ImagePlane {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                values.push(f(i, j));
            }
        }
        ImagePlane {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.width + j] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePlane {
        ImagePlane {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> ImagePlane {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImagePlane> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::contract(
                "ImagePlane::crop",
                format!(
                    "window {height}x{width} at ({top},{left}) exceeds {}x{}",
                    self.height, self.width
                ),
            ));
        }
        Ok(ImagePlane::from_fn(height, width, |i, j| {
            self.get(top + i, left + j)
        }))
    }

    /// Center crop so both dimensions are multiples of `scale`.
    pub fn crop_to_multiple(&self, scale: usize) -> Result<ImagePlane> {
        if scale == 0 || self.height < scale || self.width < scale {
            return Err(Error::contract(
                "crop_to_multiple",
                format!(
                    "{}x{} image cannot be cropped to a multiple of {scale}",
                    self.height, self.width
                ),
            ));
        }
        let h = self.height - self.height % scale;
        let w = self.width - self.width % scale;
        self.crop((self.height - h) / 2, (self.width - w) / 2, h, w)
    }

    pub fn flip_horizontal(&self) -> ImagePlane {
        ImagePlane::from_fn(self.height, self.width, |i, j| {
            self.get(i, self.width - 1 - j)
        })
    }

    pub fn flip_vertical(&self) -> ImagePlane {
        ImagePlane::from_fn(self.height, self.width, |i, j| {
            self.get(self.height - 1 - i, j)
        })
    }

    /// Rotate counter-clockwise by `quarter_turns · 90°`.
    pub fn rotate90(&self, quarter_turns: usize) -> ImagePlane {
        let (h, w) = (self.height, self.width);
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => ImagePlane::from_fn(w, h, |i, j| self.get(j, w - 1 - i)),
            2 => ImagePlane::from_fn(h, w, |i, j| self.get(h - 1 - i, w - 1 - j)),
            _ => ImagePlane::from_fn(w, h, |i, j| self.get(h - 1 - j, i)),
        }
    }

    /// As a `[1, 1, h, w]` tensor.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([1, 1, self.height, self.width], self.values.clone())
            .expect("plane length matches its dimensions")
    }

    /// Batch item `b`, channel 0, of a single-channel tensor.
    pub fn from_tensor(t: &Tensor, b: usize) -> Result<ImagePlane> {
        let [n, c, h, w] = t.shape();
        if c != 1 || b >= n {
            return Err(Error::contract(
                "ImagePlane::from_tensor",
                format!("cannot take item {b} of a tensor shaped {:?}", t.shape()),
            ));
        }
        ImagePlane::new(h, w, t.item(b).to_vec())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    pub fn mean_abs_diff(&self, other: &ImagePlane) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.values.len() as f64
    }
}

/// 8-bit RGB raster, interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::contract(
                "RgbImage::new",
                format!(
                    "{height}x{width} RGB needs {} bytes, got {}",
                    3 * height * width,
                    data.len()
                ),
            ));
        }
        Ok(RgbImage {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, i: usize, j: usize) -> [u8; 3] {
        let k = 3 * (i * self.width + j);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    /// One channel (0 = R, 1 = G, 2 = B) as a `[0, 1]` plane.
    pub fn channel(&self, c: usize) -> ImagePlane {
        ImagePlane::from_fn(self.height, self.width, |i, j| {
            f64::from(self.data[3 * (i * self.width + j) + c]) / 255.0
        })
    }

    /// Quantize three planes of equal size back to RGB.
    pub fn from_planes(r: &ImagePlane, g: &ImagePlane, b: &ImagePlane) -> Result<RgbImage> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(Error::contract(
                "RgbImage::from_planes",
                "channel dimensions differ",
            ));
        }
        let mut data = Vec::with_capacity(3 * r.values().len());
        for ((&rv, &gv), &bv) in r.values().iter().zip(g.values()).zip(b.values()) {
            data.extend([quantize(rv), quantize(gv), quantize(bv)]);
        }
        RgbImage::new(r.height(), r.width(), data)
    }
}

/// Clamp to `[0, 1]` and round to the nearest 8-bit level.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
