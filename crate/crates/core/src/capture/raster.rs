use std::io::{self, Read, Write};
use std::path::Path;

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, pixels: vec![0; width as usize * height as usize * 3] }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.pixels.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.index(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Mean of (r + g + b) / 3 over all pixels, in [0, 255].
    pub fn mean_luminance(&self) -> f64 {
        let sum: u64 = self.pixels.iter().map(|&v| v as u64).sum();
        sum as f64 / self.pixels.len().max(1) as f64
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated PPM header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII PPM header"))?.to_string());
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("only 8-bit P6 images are supported"));
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad PPM dimension"));
        let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
        let data = &bytes[(pos + 1).min(bytes.len())..];
        let len = width as usize * height as usize * 3;
        if data.len() < len {
            return Err(bad("truncated PPM pixel data"));
        }
        Ok(Self { width, height, pixels: data[..len].to_vec() })
    }

    pub fn write_ppm(&self, path: &Path) -> io::Result<()> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_ppm())?;
        f.flush()
    }

    pub fn read_ppm(path: &Path) -> io::Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_ppm(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = RasterImage::filled(17, 16, [10, 20, 30]);
        img.set(3, 4, [255, 0, 7]);
        let back = RasterImage::from_ppm(&img.to_ppm()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.get(3, 4), [255, 0, 7]);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(RasterImage::from_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(RasterImage::from_ppm(b"P6\n2 2\n255\nabc").is_err());
    }
}
