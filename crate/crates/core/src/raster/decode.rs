use std::io::Write;

use crate::error::{Error, Result};
use crate::raster::Raster;

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decode a PGM/PPM (plain or binary) or PNG image into a normalized raster.
///
/// PNM samples are divided by the header's maxval exactly; PNG samples are
/// normalized by their bit depth.
pub fn decode_image(bytes: &[u8]) -> Result<Raster> {
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png(bytes);
    }
    match bytes.get(..2) {
        Some(b"P2") | Some(b"P3") | Some(b"P5") | Some(b"P6") => decode_pnm(bytes),
        Some(b"P1") | Some(b"P4") | Some(b"P7") => Err(Error::UnsupportedFormat(
            "bitmap/PAM variants of PNM are not supported".into(),
        )),
        _ if bytes.len() < 2 => Err(Error::Decode("input too short".into())),
        _ => Err(Error::UnsupportedFormat("expected a PGM, PPM or PNG file".into())),
    }
}

struct Header {
    binary: bool,
    channels: usize,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
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

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Decode(if self.pos >= self.bytes.len() {
                format!("truncated header while reading {what}")
            } else {
                format!("expected a number for {what}")
            }));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Decode(format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let (binary, channels) = match &bytes[..2] {
        b"P2" => (false, 1),
        b"P3" => (false, 3),
        b"P5" => (true, 1),
        b"P6" => (true, 3),
        _ => unreachable!("magic checked by caller"),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Decode(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from binary data.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        Some(_) => return Err(Error::Decode("malformed header terminator".into())),
        None => return Err(Error::Decode("truncated header".into())),
    }
    Ok(Header {
        binary,
        channels,
        width,
        height,
        maxval,
        data_start: cur.pos,
    })
}

fn decode_pnm(bytes: &[u8]) -> Result<Raster> {
    let h = parse_header(bytes)?;
    let count = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(h.channels))
        .ok_or_else(|| Error::Decode("image dimensions overflow".into()))?;
    let scale = h.maxval as f64;
    let mut data = Vec::with_capacity(count);

    let mut push = |v: u32| -> Result<()> {
        if v > h.maxval {
            return Err(Error::Decode(format!("sample {v} exceeds maxval {}", h.maxval)));
        }
        data.push((v as f64 / scale) as f32);
        Ok(())
    };

    let body = &bytes[h.data_start..];
    if h.binary {
        let wide = h.maxval > 255;
        let needed = if wide { count * 2 } else { count };
        if body.len() < needed {
            return Err(Error::Decode(format!(
                "truncated pixel data: expected {needed} bytes, found {}",
                body.len()
            )));
        }
        if wide {
            for pair in body[..needed].chunks_exact(2) {
                push(u16::from_be_bytes([pair[0], pair[1]]) as u32)?;
            }
        } else {
            for &b in &body[..needed] {
                push(b as u32)?;
            }
        }
    } else {
        let mut cur = Cursor {
            bytes,
            pos: h.data_start,
        };
        for _ in 0..count {
            push(cur.number("sample")?)?;
        }
    }
    Raster::new(h.width, h.height, h.channels, data)
}

fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => Error::Decode(other.to_string()),
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let data = img.to_rgb32f().into_raw();
        Raster::new(width, height, 3, data)
    } else {
        let data = img.to_luma32f().into_raw();
        Raster::new(width, height, 1, data)
    }
}

/// Write a single-channel raster as an 8-bit binary PGM (values clamped to `[0, 1]`).
pub fn encode_pgm(img: &Raster, mut sink: impl Write) -> Result<usize> {
    img.ensure_single_channel("encode_pgm")?;
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    sink.write_all(header.as_bytes())?;
    let body: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    sink.write_all(&body)?;
    Ok(header.len() + body.len())
}
