use std::io::Write;

use crate::error::{HazeError, Result};

/// 8-bit RGB raster, row-major from the top-left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn write_ppm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        out.write_all(&bytes)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pixels.len() * 3 + 32);
        self.write_ppm(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Root-mean-square difference over all channels, in 8-bit units.
    pub fn rmse(&self, other: &Image) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(HazeError::Parameter(format!(
                "image sizes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        if self.pixels.is_empty() {
            return Ok(0.0);
        }
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] as f64 - b[c] as f64).powi(2)))
            .sum();
        Ok((sum / (self.pixels.len() * 3) as f64).sqrt())
    }

    pub fn differing_pixels(&self, other: &Image) -> usize {
        self.pixels.iter().zip(&other.pixels).filter(|(a, b)| a != b).count()
    }
}

fn next_token<'a>(data: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &data[start..*pos])
}

/// Parses a binary PPM (P6, maxval 255).
pub fn read_ppm(data: &[u8]) -> Result<Image> {
    let bad = |m: &str| HazeError::Parameter(format!("invalid PPM: {m}"));
    let mut pos = 0;
    if next_token(data, &mut pos) != Some(b"P6".as_slice()) {
        return Err(bad("missing P6 magic"));
    }
    let mut num = |what: &str| -> Result<usize> {
        next_token(data, &mut pos)
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(what))
    };
    let width = num("width")?;
    let height = num("height")?;
    if num("maxval")? != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * 3;
    if data.len() < pos + need {
        return Err(bad("truncated raster"));
    }
    let pixels = data[pos..pos + need]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(Image { width, height, pixels })
}

/// Per-pixel step counts as a P5-style map with 32-bit big-endian samples.
pub fn write_step_map<W: Write>(mut out: W, width: usize, height: usize, counts: &[u32]) -> Result<()> {
    if counts.len() != width * height {
        return Err(HazeError::Parameter(format!(
            "step map has {} entries for a {width}x{height} image",
            counts.len()
        )));
    }
    let io = |e| HazeError::io("step map", e);
    write!(out, "P5\n{width} {height}\n4294967295\n").map_err(io)?;
    let bytes: Vec<u8> = counts.iter().flat_map(|c| c.to_be_bytes()).collect();
    out.write_all(&bytes).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ppm_header_and_layout() {
        let mut img = Image::new(2, 1, [0, 0, 0]);
        img.set(1, 0, [1, 2, 3]);
        let bytes = img.to_ppm();
        assert_eq!(&bytes[..11], b"P6\n2 1\n255\n");
        assert_eq!(&bytes[11..], &[0, 0, 0, 1, 2, 3]);
    }

    #[test]
    fn ppm_reader_skips_comments() {
        let data = b"P6\n# made by hand\n1 1\n255\n\x07\x08\x09";
        let img = read_ppm(data).unwrap();
        assert_eq!(img.get(0, 0), [7, 8, 9]);
    }

    #[test]
    fn rejects_truncated_raster() {
        assert!(read_ppm(b"P6\n2 2\n255\n\x00\x00").is_err());
    }

    #[test]
    fn rmse_of_uniform_offset() {
        let a = Image::new(3, 2, [10, 10, 10]);
        let b = Image::new(3, 2, [13, 6, 10]);
        // channels differ by 3, 4, 0
        let expect = ((9.0 + 16.0) / 3.0f64).sqrt();
        assert!((a.rmse(&b).unwrap() - expect).abs() < 1e-12);
        assert_eq!(a.differing_pixels(&b), 6);
    }

    #[test]
    fn step_map_is_big_endian() {
        let mut buf = Vec::new();
        write_step_map(&mut buf, 2, 1, &[1, 0x0102_0304]).unwrap();
        let header = b"P5\n2 1\n4294967295\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0, 0, 0, 1, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn ppm_round_trip(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            let mut img = Image::new(w, h, [0, 0, 0]);
            let mut s = seed;
            for p in img.pixels.iter_mut() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *p = [(s >> 40) as u8, (s >> 48) as u8, (s >> 56) as u8];
            }
            prop_assert_eq!(read_ppm(&img.to_ppm()).unwrap(), img);
        }
    }
}
