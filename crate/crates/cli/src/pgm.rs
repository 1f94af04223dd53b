//! Image file I/O.
//!
//! Greyscale images travel as PGM: binary `P5` on write, `P5` or ASCII
//! `P2` on read, maxval 255 in both directions (`pixel = byte / 255`).
//!
//! Noisy observations are a different animal: they are real-valued (the
//! noise is not clamped), so quantizing them to PGM would silently change
//! the posterior. They get their own little container: one JSON header
//! line, then raw little-endian f64 samples in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{message} at byte offset {offset}")]
    Parse { message: String, offset: usize },

    #[error("image dimensions {width}x{height} do not match {pixels} pixels")]
    DimensionMismatch {
        width: usize,
        height: usize,
        pixels: usize,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("bad noisy-image header: {0}")]
    NoisyHeader(String),
}

fn io_err(path: &Path, source: std::io::Error) -> PgmError {
    PgmError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A greyscale image with intensities in `[0,1]` (8-bit on disk).
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, PgmError> {
        if pixels.len() != width * height {
            return Err(PgmError::DimensionMismatch {
                width,
                height,
                pixels: pixels.len(),
            });
        }
        Ok(PgmImage {
            width,
            height,
            pixels,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Binary P5 bytes, maxval 255, pixels rounded and clamped.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_pixels() + 32);
        out.extend_from_slice(format!("P5\n{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend(
            self.pixels
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), PgmError> {
        let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
        file.write_all(&self.encode()).map_err(|e| io_err(path, e))
    }

    /// Parses binary `P5` or ASCII `P2`, maxval 255; parse failures carry
    /// the byte offset.
    pub fn decode(data: &[u8]) -> Result<Self, PgmError> {
        let mut cursor = Cursor { data, pos: 0 };
        let magic = cursor.token("magic number")?;
        let binary = match magic.as_str() {
            "P5" => true,
            "P2" => false,
            other => {
                return Err(PgmError::Parse {
                    message: format!("expected magic P5 or P2, found {other:?}"),
                    offset: 0,
                })
            }
        };
        let width = cursor.integer("width")?;
        let height = cursor.integer("height")?;
        let maxval = cursor.integer("maxval")?;
        if maxval != 255 {
            return Err(PgmError::Parse {
                message: format!("unsupported maxval {maxval} (only 255)"),
                offset: cursor.pos,
            });
        }
        if width == 0 || height == 0 {
            return Err(PgmError::Parse {
                message: format!("degenerate dimensions {width}x{height}"),
                offset: cursor.pos,
            });
        }
        let count = width * height;
        let mut pixels = Vec::with_capacity(count);
        if binary {
            // exactly one whitespace byte separates the header from the raster
            cursor.expect_single_whitespace()?;
            if cursor.data.len() - cursor.pos < count {
                return Err(PgmError::Parse {
                    message: format!(
                        "raster truncated: need {count} bytes, found {}",
                        cursor.data.len() - cursor.pos
                    ),
                    offset: cursor.pos,
                });
            }
            pixels.extend(
                cursor.data[cursor.pos..cursor.pos + count]
                    .iter()
                    .map(|&b| b as f64 / 255.0),
            );
        } else {
            for _ in 0..count {
                let v = cursor.integer("pixel")?;
                if v > 255 {
                    return Err(PgmError::Parse {
                        message: format!("pixel value {v} above maxval"),
                        offset: cursor.pos,
                    });
                }
                pixels.push(v as f64 / 255.0);
            }
        }
        PgmImage::new(width, height, pixels)
    }

    pub fn read(path: &Path) -> Result<Self, PgmError> {
        let data = fs::read(path).map_err(|e| io_err(path, e))?;
        PgmImage::decode(&data)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_filler(&mut self) {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<String, PgmError> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::Parse {
                message: format!("missing {what}"),
                offset: start,
            });
        }
        String::from_utf8(self.data[start..self.pos].to_vec()).map_err(|_| PgmError::Parse {
            message: format!("{what} is not ASCII"),
            offset: start,
        })
    }

    fn integer(&mut self, what: &str) -> Result<usize, PgmError> {
        let start_hint = self.pos;
        let token = self.token(what)?;
        token.parse().map_err(|_| PgmError::Parse {
            message: format!("invalid {what} {token:?}"),
            offset: start_hint,
        })
    }

    fn expect_single_whitespace(&mut self) -> Result<(), PgmError> {
        if self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            Err(PgmError::Parse {
                message: "expected whitespace before binary raster".to_string(),
                offset: self.pos,
            })
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NoisyHeader {
    format: String,
    dtype: String,
    width: usize,
    height: usize,
}

const NOISY_FORMAT: &str = "mixbound-noisy-v1";

/// A real-valued degraded observation, stored losslessly.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl NoisyImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, PgmError> {
        if values.len() != width * height {
            return Err(PgmError::DimensionMismatch {
                width,
                height,
                pixels: values.len(),
            });
        }
        Ok(NoisyImage {
            width,
            height,
            values,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = NoisyHeader {
            format: NOISY_FORMAT.to_string(),
            dtype: "f64le".to_string(),
            width: self.width,
            height: self.height,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(data: &[u8]) -> Result<Self, PgmError> {
        let newline = data
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PgmError::NoisyHeader("missing header line".to_string()))?;
        let header: NoisyHeader = serde_json::from_slice(&data[..newline])
            .map_err(|e| PgmError::NoisyHeader(e.to_string()))?;
        if header.format != NOISY_FORMAT || header.dtype != "f64le" {
            return Err(PgmError::NoisyHeader(format!(
                "unsupported format {}/{}",
                header.format, header.dtype
            )));
        }
        let body = &data[newline + 1..];
        let count = header.width * header.height;
        if body.len() != count * 8 {
            return Err(PgmError::NoisyHeader(format!(
                "body has {} bytes, expected {}",
                body.len(),
                count * 8
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        NoisyImage::new(header.width, header.height, values)
    }

    pub fn write(&self, path: &Path) -> Result<(), PgmError> {
        fs::write(path, self.encode()).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, PgmError> {
        let data = fs::read(path).map_err(|e| io_err(path, e))?;
        NoisyImage::decode(&data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_roundtrip_is_byte_exact() {
        let pixels: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let img = PgmImage::new(4, 3, pixels).unwrap();
        let bytes = img.encode();
        let back = PgmImage::decode(&bytes).unwrap();
        assert_eq!(back.width, 4);
        assert_eq!(back.height, 3);
        // re-encoding the decoded image reproduces the bytes exactly
        assert_eq!(back.encode(), bytes);
    }

    #[test]
    fn p2_parses_with_comments() {
        let text = b"P2\n# a comment\n3 2\n255\n0 128 255\n64 32 16\n";
        let img = PgmImage::decode(text).unwrap();
        assert_eq!(img.width, 3);
        assert_eq!(img.height, 2);
        assert!((img.pixels[1] - 128.0 / 255.0).abs() < 1e-12);
        assert!((img.pixels[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let err = PgmImage::decode(b"P3\n2 2\n255\n").unwrap_err();
        assert!(matches!(err, PgmError::Parse { offset: 0, .. }), "{err}");

        let err = PgmImage::decode(b"P5\n2 2\n63\n").unwrap_err();
        match err {
            PgmError::Parse { message, offset } => {
                assert!(message.contains("maxval"), "{message}");
                assert!(offset > 0);
            }
            other => panic!("unexpected {other}"),
        }

        let err = PgmImage::decode(b"P5\n4 4\n255\nxx").unwrap_err();
        match err {
            PgmError::Parse { message, offset } => {
                assert!(message.contains("truncated"), "{message}");
                assert_eq!(offset, 11);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn noisy_image_roundtrip_is_lossless() {
        let values = vec![-0.25, 0.5, 1.75, 1e-17, f64::MIN_POSITIVE, -3.5];
        let noisy = NoisyImage::new(3, 2, values.clone()).unwrap();
        let back = NoisyImage::decode(&noisy.encode()).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.encode(), noisy.encode());
    }

    #[test]
    fn noisy_image_rejects_mangled_header() {
        let noisy = NoisyImage::new(1, 1, vec![0.5]).unwrap();
        let mut bytes = noisy.encode();
        bytes[2] = b'X';
        assert!(matches!(
            NoisyImage::decode(&bytes),
            Err(PgmError::NoisyHeader(_))
        ));
    }
}
