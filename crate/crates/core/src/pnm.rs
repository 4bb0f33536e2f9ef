//! Binary Netpbm codecs: 8-bit P6 color and 16-bit big-endian P5 gray.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::image::{Grid, RgbImage};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    Malformed(String),
    #[error("truncated raster: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::Malformed("file too short".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and `#` comments may separate header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(PnmError::Malformed("header ends early".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(PnmError::Malformed(format!("expected a number at byte {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| PnmError::Malformed(format!("number out of range: {text}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PnmError::Malformed("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(PnmError::Malformed("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::Malformed(format!("maxval {maxval} out of range")));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval,
        data_offset: pos,
    })
}

fn raster<'a>(bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8], PnmError> {
    let bps = if header.maxval > 255 { 2 } else { 1 };
    let expected = header.width * header.height * channels * bps;
    let found = bytes.len() - header.data_offset;
    if found < expected {
        return Err(PnmError::Truncated { expected, found });
    }
    Ok(&bytes[header.data_offset..header.data_offset + expected])
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, PnmError> {
    let header = parse_header(bytes)?;
    if &header.magic != b"P6" {
        return Err(PnmError::Malformed("expected P6 magic".into()));
    }
    if header.maxval != 255 {
        return Err(PnmError::Malformed(format!(
            "expected maxval 255, found {}",
            header.maxval
        )));
    }
    let data = raster(bytes, &header, 3)?;
    let pixels = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Grid::from_vec(header.width, header.height, pixels).expect("length checked"))
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 3);
    for px in img.data() {
        out.extend_from_slice(px);
    }
    out
}

/// Decodes a P5 file. 8-bit rasters are widened; 16-bit ones are big-endian.
pub fn decode_pgm16(bytes: &[u8]) -> Result<Grid<u16>, PnmError> {
    let header = parse_header(bytes)?;
    if &header.magic != b"P5" {
        return Err(PnmError::Malformed("expected P5 magic".into()));
    }
    let data = raster(bytes, &header, 1)?;
    let values = if header.maxval > 255 {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data.iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Grid::from_vec(header.width, header.height, values).expect("length checked"))
}

/// Encodes a 16-bit P5 file with maxval 65535.
pub fn encode_pgm16(img: &Grid<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.len() * 2);
    for v in img.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, PnmError> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), PnmError> {
    Ok(fs::write(path, encode_ppm(img))?)
}

pub fn read_pgm16(path: &Path) -> Result<Grid<u16>, PnmError> {
    decode_pgm16(&fs::read(path)?)
}

pub fn write_pgm16(path: &Path, img: &Grid<u16>) -> Result<(), PnmError> {
    Ok(fs::write(path, encode_pgm16(img))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5 # depth\n# more\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x05, 0xDC, 0x00, 0x00]);
        let img = decode_pgm16(&bytes).unwrap();
        assert_eq!(img.data(), &[1500, 0]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        assert!(matches!(
            decode_ppm(b"P5\n1 1\n255\n\0"),
            Err(PnmError::Malformed(_))
        ));
        assert!(matches!(
            decode_ppm(b"P6\n2 2\n255\n\0\0\0"),
            Err(PnmError::Truncated { .. })
        ));
        assert!(matches!(decode_pgm16(b"P5\n2"), Err(PnmError::Malformed(_))));
    }

    #[test]
    fn eight_bit_pgm_widens() {
        let img = decode_pgm16(b"P5\n2 1\n255\n\x07\xff").unwrap();
        assert_eq!(img.data(), &[7, 255]);
    }

    proptest! {
        #[test]
        fn pgm16_roundtrip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let img = Grid::from_fn(w, h, |x, y| (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13) as u64) % 65536) as u16);
            prop_assert_eq!(decode_pgm16(&encode_pgm16(&img)).unwrap(), img);
        }

        #[test]
        fn ppm_roundtrip(w in 1usize..9, h in 1usize..9, v in any::<u8>()) {
            let img = Grid::from_fn(w, h, |x, y| [v, x as u8, y as u8]);
            prop_assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img);
        }
    }
}
