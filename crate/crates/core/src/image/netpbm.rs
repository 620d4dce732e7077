//! Binary Netpbm: P5 (gray) and P6 (RGB), maxval 255 only.
//!
//! Files are written with the canonical header `P5\n<w> <h>\n255\n`, so any
//! file in that form round-trips byte for byte.

use std::path::Path;

use super::plane::{quantize, ImagePlane, RgbImage};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum NetpbmImage {
    Gray(ImagePlane),
    Rgb(RgbImage),
}

impl NetpbmImage {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            NetpbmImage::Gray(p) => p.dims(),
            NetpbmImage::Rgb(img) => (img.height(), img.width()),
        }
    }

    /// The plane the network sees: the gray plane itself, or the BT.601 luma
    /// of an RGB image.
    pub fn luminance(&self) -> ImagePlane {
        match self {
            NetpbmImage::Gray(p) => p.clone(),
            NetpbmImage::Rgb(img) => super::color::rgb_to_ycbcr(img).0,
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                msg: format!("{what} out of range"),
            })
    }
}

pub fn parse_netpbm(bytes: &[u8]) -> Result<NetpbmImage> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(cur.err("unknown magic, expected P5 or P6")),
    };
    cur.pos = 2;
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_offset = cur.pos;
    let maxval = cur.header_number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_offset,
            msg: format!("maxval {maxval} not supported, expected 255"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected a single whitespace byte after maxval")),
    }
    let body_len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let body = &bytes[cur.pos..];
    if body.len() < body_len {
        cur.pos = bytes.len();
        return Err(cur.err(format!(
            "truncated body: expected {body_len} bytes, found {}",
            body.len()
        )));
    }
    let body = &body[..body_len];
    Ok(if channels == 1 {
        let values = body.iter().map(|&b| f64::from(b) / 255.0).collect();
        NetpbmImage::Gray(ImagePlane::new(height, width, values)?)
    } else {
        NetpbmImage::Rgb(RgbImage::new(height, width, body.to_vec())?)
    })
}

pub fn encode_netpbm(image: &NetpbmImage) -> Vec<u8> {
    let (h, w) = image.dims();
    let (magic, body): (&str, Vec<u8>) = match image {
        NetpbmImage::Gray(p) => ("P5", p.values().iter().map(|&v| quantize(v)).collect()),
        NetpbmImage::Rgb(img) => ("P6", img.data().to_vec()),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend(body);
    out
}

pub fn load_netpbm(path: impl AsRef<Path>) -> Result<NetpbmImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_netpbm(&bytes)
}

pub fn save_netpbm(image: &NetpbmImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_netpbm(image)).map_err(|e| Error::io(path, e))
}
