//! Binary PGM (`P5`) and PPM (`P6`) images and the sRGB to CIE Lab transform.

use std::fs;
use std::path::Path;

use super::result::write_atomic;
use crate::error::{Error, Result};

/// Interleaved samples scaled to `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 for gray, 3 for RGB.
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(Error::invalid(format!(
                "bad image shape {width}x{height} with {channels} channels"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::SizeMismatch {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let at = (row * self.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let at = (row * self.width + col) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    /// RGB copy; gray channels are replicated.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Per-pixel `(L, a, b)`, flattened row-major.
    pub fn to_lab(&self) -> Vec<f64> {
        let rgb = self.to_rgb();
        rgb.data
            .chunks_exact(3)
            .flat_map(|p| rgb_to_lab([p[0], p[1], p[2]]))
            .collect()
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&c) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if c == b'\n' || c == b'\r' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad PNM header: missing {what}")))
    }
}

/// Parses a `P5` or `P6` image with `maxval < 65536`.
pub fn read_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::invalid("only binary PGM (P5) and PPM (P6) are supported")),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::invalid(format!("bad PNM maxval {maxval}")));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::invalid("bad PNM header: no separator before raster"));
    }
    let raster = &bytes[h.pos + 1..];
    let count = width * height * channels;
    let wide = maxval > 255;
    let need = if wide { 2 * count } else { count };
    if raster.len() < need {
        return Err(Error::invalid(format!(
            "truncated PNM raster: need {need} bytes, found {}",
            raster.len()
        )));
    }
    let scale = maxval as f64;
    let data = if wide {
        raster[..need]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
            .collect()
    } else {
        raster[..need].iter().map(|&b| b as f64 / scale).collect()
    };
    Image::new(width, height, channels, data)
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pnm(&bytes).map_err(|e| match e {
        Error::InvalidInput(m) => Error::invalid(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// 8-bit `P5`/`P6` encoding; samples are clamped to `[0, 1]` and rounded.
pub fn write_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn save_pnm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &write_pnm(img))
}

/// sRGB in `[0, 1]` to CIE L*a*b* under the D65 white point.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| {
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    });
    let x = 0.4124564 * lin[0] + 0.3575761 * lin[1] + 0.1804375 * lin[2];
    let y = 0.2126729 * lin[0] + 0.7151522 * lin[1] + 0.0721750 * lin[2];
    let z = 0.0193339 * lin[0] + 0.1191920 * lin[1] + 0.9503041 * lin[2];
    const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let f = |t: f64| {
        if t > EPS {
            t.cbrt()
        } else {
            (KAPPA * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x / WHITE[0]), f(y / WHITE[1]), f(z / WHITE[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lab_reference_colors() {
        let close = |a: [f64; 3], b: [f64; 3], tol: f64| a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol);
        assert!(close(rgb_to_lab([1.0, 1.0, 1.0]), [100.0, 0.0, 0.0], 1e-3));
        assert!(close(rgb_to_lab([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0], 1e-9));
        assert!(close(rgb_to_lab([1.0, 0.0, 0.0]), [53.2408, 80.0925, 67.2032], 1e-2));
        assert!(close(rgb_to_lab([0.0, 1.0, 0.0]), [87.7347, -86.1827, 83.1793], 1e-2));
        assert!(close(rgb_to_lab([0.0, 0.0, 1.0]), [32.2970, 79.1875, -107.8602], 1e-2));
    }

    #[test]
    fn round_trip_and_header_comments() {
        let img = Image::new(2, 1, 3, vec![0.0, 0.5, 1.0, 1.0, 0.0, 0.2]).unwrap();
        let bytes = write_pnm(&img);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        let back = read_pnm(&bytes).unwrap();
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() <= 0.5 / 255.0);
        }
        let commented = b"P5 # gray\n# size\n2 2\n# max\n3\n\x00\x01\x02\x03";
        let g = read_pnm(commented).unwrap();
        assert_eq!(g.data, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let wide = b"P5 1 1 1000\n\x01\xf4";
        assert_eq!(read_pnm(wide).unwrap().data, vec![0.5]);
    }

    #[test]
    fn rejects_unsupported_or_truncated() {
        assert!(read_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(read_pnm(b"P6\n2 2\n255\n\x00").is_err());
        assert!(read_pnm(b"P5\n1 1\n0\n\x00").is_err());
    }
}
