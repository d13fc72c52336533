//! Grayscale netpbm images: reads ASCII (`P2`) and binary (`P5`), writes `P5`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each at most `maxval`.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        let fail = |msg: String| Err(Error::InvalidDimensions(msg));
        if width == 0 || height == 0 {
            return fail(format!("image must be non-empty, got {width}x{height}"));
        }
        if maxval == 0 {
            return fail("maxval must be positive".into());
        }
        if pixels.len() != width * height {
            return fail(format!("{} samples for a {width}x{height} image", pixels.len()));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > maxval) {
            return fail(format!("sample {p} exceeds maxval {maxval}"));
        }
        Ok(Self { width, height, maxval, pixels })
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

pub fn parse_pgm(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let bad = |msg: &str| Error::Image {
        path: origin.to_path_buf(),
        msg: msg.to_string(),
    };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(bad("not a P2 or P5 graymap")),
    };
    let mut hdr = Header { bytes, pos: 2 };
    let width = hdr.number().ok_or_else(|| bad("bad width"))? as usize;
    let height = hdr.number().ok_or_else(|| bad("bad height"))? as usize;
    let maxval = hdr.number().ok_or_else(|| bad("bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero-sized image"));
    }
    if maxval == 0 || maxval > u16::MAX as u32 {
        return Err(bad("maxval must be in 1..=65535"));
    }
    let count = width * height;

    let pixels: Vec<u16> = if binary {
        // exactly one whitespace byte separates the header from the raster
        if !bytes.get(hdr.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("missing separator before raster"));
        }
        let raster = &bytes[hdr.pos + 1..];
        if maxval < 256 {
            if raster.len() < count {
                return Err(bad("truncated raster"));
            }
            raster[..count].iter().map(|&b| b as u16).collect()
        } else {
            if raster.len() < 2 * count {
                return Err(bad("truncated raster"));
            }
            raster[..2 * count]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    } else {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let v = hdr.number().ok_or_else(|| bad("truncated or malformed sample"))?;
            out.push(u16::try_from(v).map_err(|_| bad("sample out of range"))?);
        }
        out
    };
    if pixels.iter().any(|&p| p as u32 > maxval) {
        return Err(bad("sample exceeds maxval"));
    }
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
}

/// Binary `P5` encoding; two big-endian bytes per sample when `maxval > 255`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    } else {
        for p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

/// ASCII `P2` encoding.
pub fn encode_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n{}\n", img.width, img.height, img.maxval);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(u16::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> &'static Path {
        Path::new("mem.pgm")
    }

    #[test]
    fn ascii_with_comments() {
        let src = b"P2\n# made by hand\n3 2 # w h\n10\n0 1 2\n# mid\n3 4 10\n";
        let img = parse_pgm(src, origin()).unwrap();
        assert_eq!((img.width, img.height, img.maxval), (3, 2, 10));
        assert_eq!(img.pixels, vec![0, 1, 2, 3, 4, 10]);
    }

    #[test]
    fn binary_round_trip_8_and_16_bit() {
        for maxval in [1u16, 255, 256, 65535] {
            let pixels: Vec<u16> = (0..12).map(|i| (i * 7919 % (maxval as u32 + 1)) as u16).collect();
            let img = GrayImage::new(4, 3, maxval, pixels).unwrap();
            assert_eq!(parse_pgm(&encode_pgm(&img), origin()).unwrap(), img);
            assert_eq!(parse_pgm(&encode_pgm_ascii(&img), origin()).unwrap(), img);
        }
    }

    #[test]
    fn raster_may_start_with_whitespace_byte() {
        // sample value 10 is '\n'; only one separator byte is consumed
        let mut src = b"P5 2 1 255\n".to_vec();
        src.extend([10, 32]);
        assert_eq!(parse_pgm(&src, origin()).unwrap().pixels, vec![10, 32]);
    }

    #[test]
    fn rejects_malformed() {
        for src in [
            &b"P6\n1 1\n255\n\0"[..],
            b"P5\n2 2\n255\n\0\0\0",
            b"P2\n2 1\n5\n1 6\n",
            b"P2\n0 1\n5\n",
            b"P2\n1 1\n70000\n1\n",
            b"P2\n2 1\n5\n1\n",
        ] {
            assert!(parse_pgm(src, origin()).is_err(), "{:?}", String::from_utf8_lossy(src));
        }
    }
}
