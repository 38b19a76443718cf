//! Minimal portable graymap (PGM) reader and writer, 8-bit only.
//!
//! Writes binary `P5`; reads both `P5` and ASCII `P2`.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Result, SmoError};

pub fn write_pgm(path: &Path, image: &Array2<u8>) -> Result<()> {
    let (h, w) = image.dim();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{w} {h}\n255\n")?;
    let data: Vec<u8> = image.iter().copied().collect();
    f.write_all(&data)?;
    f.flush()?;
    Ok(())
}

/// Quantize values in [0, 1] to 8 bits.
pub fn quantize(values: &Array2<f64>) -> Array2<u8> {
    values.mapv(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Binary image to 0/255.
pub fn binary_to_gray(values: &Array2<u8>) -> Array2<u8> {
    values.mapv(|v| if v > 0 { 255 } else { 0 })
}

fn parse_err(path: &Path, msg: impl Into<String>) -> SmoError {
    SmoError::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: msg.into(),
    }
}

pub fn read_pgm(path: &Path) -> Result<Array2<u8>> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes, path)
}

pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Array2<u8>> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos).ok_or_else(|| parse_err(path, "empty file"))?;
    let num = |pos: &mut usize, what: &str| -> Result<usize> {
        next_token(pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(path, format!("bad PGM {what}")))
    };
    let w = num(&mut pos, "width")?;
    let h = num(&mut pos, "height")?;
    let maxval = num(&mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(path, format!("unsupported maxval {maxval}")));
    }
    let scale = |v: usize| -> u8 { ((v * 255 + maxval / 2) / maxval) as u8 };
    let data: Vec<u8> = match magic.as_str() {
        "P5" => {
            pos += 1; // single whitespace after maxval
            let end = pos + w * h;
            if end > bytes.len() {
                return Err(parse_err(path, "truncated P5 data"));
            }
            bytes[pos..end].iter().map(|&b| scale(b as usize)).collect()
        }
        "P2" => {
            let mut v = Vec::with_capacity(w * h);
            for _ in 0..w * h {
                v.push(scale(num(&mut pos, "sample")?));
            }
            v
        }
        other => return Err(parse_err(path, format!("unsupported magic {other:?}"))),
    };
    Array2::from_shape_vec((h, w), data).map_err(|e| parse_err(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_p5() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = Array2::from_shape_fn((5, 7), |(i, j)| (i * 40 + j) as u8);
        write_pgm(&p, &img).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
    }

    #[test]
    fn reads_p2_with_comments() {
        let text = b"P2\n# comment\n3 2\n15\n0 15 7\n15 0 0\n";
        let img = parse_pgm(text, Path::new("x")).unwrap();
        assert_eq!(img.dim(), (2, 3));
        assert_eq!(img[[0, 1]], 255);
        assert_eq!(img[[1, 1]], 0);
        assert!(img[[0, 2]] < 128);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_pgm(b"P7\n1 1\n255\n\0", Path::new("x")).is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\0", Path::new("x")).is_err());
    }
}
