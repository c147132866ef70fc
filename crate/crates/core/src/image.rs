//! Linear RGB images, PFM/PPM files and error metrics.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<Vec3>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![Vec3::ZERO; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Vec3 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> Vec3 {
        self.pixels.iter().fold(Vec3::ZERO, |a, &p| a + p) / self.pixels.len() as f64
    }

    /// Pixels of the `w x h` window with top-left corner `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Image {
        let mut out = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.pixels[y * w + x] = self.get(x0 + x, y0 + y);
            }
        }
        out
    }

    pub fn write_pfm(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.width * 12);
        // PFM stores rows bottom to top.
        for y in (0..self.height).rev() {
            buf.clear();
            for p in &self.pixels[y * self.width..(y + 1) * self.width] {
                for c in [p.x, p.y, p.z] {
                    buf.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_pfm(r: &mut impl Read) -> Result<Image> {
        let mut r = BufReader::new(r);
        let magic = read_token(&mut r)?;
        if magic != "PF" {
            return Err(Error::Image(format!("expected PF header, found '{magic}'")));
        }
        let width = parse_token::<usize>(&mut r)?;
        let height = parse_token::<usize>(&mut r)?;
        let scale = parse_token::<f64>(&mut r)?;
        let little = scale < 0.0;
        let mut data = vec![0u8; width * height * 12];
        r.read_exact(&mut data)
            .map_err(|e| Error::Image(format!("truncated PFM data: {e}")))?;
        let mut img = Image::new(width, height);
        for (i, chunk) in data.chunks_exact(12).enumerate() {
            let f = |k: usize| {
                let b: [u8; 4] = chunk[4 * k..4 * k + 4].try_into().unwrap();
                (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
            };
            let (x, y_up) = (i % width, i / width);
            img.pixels[(height - 1 - y_up) * width + x] = Vec3::new(f(0), f(1), f(2));
        }
        Ok(img)
    }

    /// 8-bit sRGB-ish preview with gamma 2.2.
    pub fn write_ppm(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .flat_map(|p| [p.x, p.y, p.z])
            .map(encode_gamma)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_ppm(r: &mut impl Read) -> Result<Image> {
        let mut r = BufReader::new(r);
        let magic = read_token(&mut r)?;
        if magic != "P6" {
            return Err(Error::Image(format!("expected P6 header, found '{magic}'")));
        }
        let width = parse_token::<usize>(&mut r)?;
        let height = parse_token::<usize>(&mut r)?;
        let max = parse_token::<u32>(&mut r)?;
        if max != 255 {
            return Err(Error::Image(format!("unsupported PPM max value {max}")));
        }
        let mut data = vec![0u8; width * height * 3];
        r.read_exact(&mut data)
            .map_err(|e| Error::Image(format!("truncated PPM data: {e}")))?;
        let pixels = data
            .chunks_exact(3)
            .map(|c| Vec3::new(decode_gamma(c[0]), decode_gamma(c[1]), decode_gamma(c[2])))
            .collect();
        Ok(Image { width, height, pixels })
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pfm(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Image> {
        Image::read_pfm(&mut std::fs::File::open(path)?)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_ppm(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn encode_gamma(v: f64) -> u8 {
    (v.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0).round() as u8
}

pub fn decode_gamma(b: u8) -> f64 {
    (b as f64 / 255.0).powf(2.2)
}

/// Reads one whitespace-delimited header token and the single whitespace byte after it.
fn read_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        if r.read(&mut byte)? == 0 {
            break;
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
    }
    if tok.is_empty() {
        return Err(Error::Image("unexpected end of header".into()));
    }
    String::from_utf8(tok).map_err(|_| Error::Image("non-ASCII header".into()))
}

fn parse_token<T: std::str::FromStr>(r: &mut impl BufRead) -> Result<T> {
    let t = read_token(r)?;
    t.parse().map_err(|_| Error::Image(format!("bad header field '{t}'")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageError {
    /// Squared error averaged over pixels, then over the three channels.
    pub mse: f64,
    /// `mse / mean(reference^2)`.
    pub relative: f64,
}

/// Compares `image` against `reference`.
pub fn compare(image: &Image, reference: &Image) -> Result<ImageError> {
    if image.width != reference.width || image.height != reference.height {
        return Err(Error::DimensionMismatch(
            image.width,
            image.height,
            reference.width,
            reference.height,
        ));
    }
    let n = (image.pixels.len() * 3) as f64;
    let mut se = 0.0;
    let mut energy = 0.0;
    for (a, b) in image.pixels.iter().zip(&reference.pixels) {
        let d = *a - *b;
        se += d.dot(d);
        energy += b.dot(*b);
    }
    let mse = se / n;
    let mean_sq = energy / n;
    Ok(ImageError {
        mse,
        relative: if mean_sq > 0.0 { mse / mean_sq } else { f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient(w: usize, h: usize) -> Image {
        let mut img = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                img.pixels[y * w + x] = Vec3::new(x as f64 * 0.25, y as f64 * 0.5, 1.5);
            }
        }
        img
    }

    #[test]
    fn identical_images_have_zero_error() {
        let a = gradient(4, 3);
        assert_eq!(compare(&a, &a).unwrap().mse, 0.0);
    }

    #[test]
    fn constant_offset_convention() {
        let b = gradient(4, 3);
        let mut a = b.clone();
        for p in &mut a.pixels {
            *p += Vec3::ONE;
        }
        assert_eq!(compare(&a, &b).unwrap().mse, 1.0);
    }

    #[test]
    fn hand_computed_pair() {
        // Two pixels; squared errors per entry: (1, 0, 4) and (0, 9, 0) -> 14 / 6.
        let a = Image {
            width: 2,
            height: 1,
            pixels: vec![Vec3::new(1.0, 1.0, 2.0), Vec3::new(0.0, 3.0, 1.0)],
        };
        let b = Image {
            width: 2,
            height: 1,
            pixels: vec![Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)],
        };
        let e = compare(&a, &b).unwrap();
        assert!((e.mse - 14.0 / 6.0).abs() < 1e-15);
        // mean(b^2) = (0 + 1 + 0 + 0 + 0 + 1) / 6
        assert!((e.relative - 14.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            compare(&gradient(2, 2), &gradient(2, 3)),
            Err(Error::DimensionMismatch(2, 2, 2, 3))
        ));
    }

    #[test]
    fn pfm_orientation_and_header() {
        let img = gradient(3, 2);
        let mut bytes = Vec::new();
        img.write_pfm(&mut bytes).unwrap();
        assert!(bytes.starts_with(b"PF\n3 2\n-1.0\n"));
        // First stored row is the bottom one: pixel (0, 1) = (0, 0.5, 1.5).
        let off = b"PF\n3 2\n-1.0\n".len();
        let g = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
        assert_eq!(g, 0.5);
    }

    proptest! {
        #[test]
        fn pfm_round_trip_is_exact(w in 1usize..6, h in 1usize..6, vals in prop::collection::vec(-1e6f32..1e6, 108)) {
            let mut img = Image::new(w, h);
            for (i, p) in img.pixels.iter_mut().enumerate() {
                *p = Vec3::new(vals[3 * i] as f64, vals[3 * i + 1] as f64, vals[3 * i + 2] as f64);
            }
            let mut bytes = Vec::new();
            img.write_pfm(&mut bytes).unwrap();
            let back = Image::read_pfm(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(back, img);
        }

        #[test]
        fn ppm_round_trip_after_quantization(vals in prop::collection::vec(0.0f64..1.5, 12)) {
            let img = Image {
                width: 2,
                height: 2,
                pixels: vals.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            };
            let mut bytes = Vec::new();
            img.write_ppm(&mut bytes).unwrap();
            let back = Image::read_ppm(&mut bytes.as_slice()).unwrap();
            for (a, b) in img.pixels.iter().zip(&back.pixels) {
                for c in 0..3 {
                    prop_assert_eq!(encode_gamma(a[c]), encode_gamma(b[c]));
                }
            }
        }
    }
}
