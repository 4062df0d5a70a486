//! Binary PPM (P6) and PGM (P5) with maxval 255.
//!
//! The writer emits exactly `P6\n{w} {h}\n255\n` followed by raw samples.
//! The reader additionally accepts `#` comments and arbitrary whitespace
//! inside the header, as the format allows.

use std::fs;
use std::path::Path;

use crate::FileError;

/// Decoded 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, length `3 * width * height`.
    pub pixels: Vec<u8>,
}

/// Decoded 8-bit single-channel raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayBuffer {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderParser { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn integer(&mut self) -> Result<usize, FileError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FileError::Format("expected an integer in header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FileError::Format("integer out of range".into()))
    }

    /// Consumes the single whitespace byte that terminates the header.
    fn finish_header(&mut self) -> Result<usize, FileError> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(FileError::Format(
                "header must end with a whitespace byte".into(),
            ));
        }
        Ok(self.pos + 1)
    }
}

fn decode(bytes: &[u8], magic: &[u8], samples: usize) -> Result<(usize, usize, Vec<u8>), FileError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(FileError::Format(format!(
            "wrong magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut p = HeaderParser::new(&bytes[2..]);
    let width = p.integer()?;
    let height = p.integer()?;
    let maxval = p.integer()?;
    if maxval != 255 {
        return Err(FileError::Unsupported(format!(
            "maxval {maxval}, only 255 is handled"
        )));
    }
    if width == 0 || height == 0 {
        return Err(FileError::Format("zero image dimension".into()));
    }
    let data_start = 2 + p.finish_header()?;
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(samples))
        .ok_or_else(|| FileError::Format("dimensions overflow".into()))?;
    let data = &bytes[data_start..];
    if data.len() != expected {
        return Err(FileError::Corruption(format!(
            "expected {expected} sample bytes, found {}",
            data.len()
        )));
    }
    Ok((width, height, data.to_vec()))
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer, FileError> {
    let (width, height, pixels) = decode(bytes, b"P6", 3)?;
    Ok(ImageBuffer {
        width,
        height,
        pixels,
    })
}

pub fn encode_ppm(image: &ImageBuffer) -> Vec<u8> {
    assert_eq!(image.pixels.len(), 3 * image.width * image.height);
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayBuffer, FileError> {
    let (width, height, pixels) = decode(bytes, b"P5", 1)?;
    Ok(GrayBuffer {
        width,
        height,
        pixels,
    })
}

pub fn encode_pgm(image: &GrayBuffer) -> Vec<u8> {
    assert_eq!(image.pixels.len(), image.width * image.height);
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer, FileError> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(image: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), FileError> {
    Ok(fs::write(path, encode_ppm(image))?)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayBuffer, FileError> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(image: &GrayBuffer, path: impl AsRef<Path>) -> Result<(), FileError> {
    Ok(fs::write(path, encode_pgm(image))?)
}
