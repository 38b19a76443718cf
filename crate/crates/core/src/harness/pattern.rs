//! Pattern ingestion: rectangle lists and binary-threshold graymaps.
//!
//! Rectangle files hold one `RECT x1 y1 x2 y2` per line in integer nm with
//! the origin at the lower-left corner of the tile. Blank lines and lines
//! starting with `#` are skipped. A pixel is filled when its center lies in
//! the half-open box `[x1, x2) × [y1, y2)`, and overlapping rectangles are
//! unioned.

use std::path::Path;

use ndarray::{s, Array2};

use super::pgm::{parse_pgm, write_pgm};
use crate::config::OpticalConfig;
use crate::error::{Result, SmoError};
use crate::target::TargetPattern;

/// Axis-aligned rectangle in tile nm, lower-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl Rect {
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        Rect { x1, y1, x2, y2 }
    }

    pub fn translated(self, dx: i64, dy: i64) -> Self {
        Rect::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RECT {} {} {} {}", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Parsed contents of a pattern file.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternFile {
    Rects(Vec<Rect>),
    Raster(Array2<u8>),
}

pub fn parse_rects(text: &str, path: &Path) -> Result<Vec<Rect>> {
    let mut rects = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| SmoError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let mut parts = line.split_whitespace();
        if parts.next() != Some("RECT") {
            return Err(err(format!("expected `RECT x1 y1 x2 y2`, got {line:?}")));
        }
        let nums: Vec<i64> = parts
            .map(|p| p.parse::<i64>().map_err(|_| err(format!("not an integer: {p:?}"))))
            .collect::<Result<_>>()?;
        let [x1, y1, x2, y2] = nums[..] else {
            return Err(err(format!("expected 4 coordinates, got {}", nums.len())));
        };
        if x2 <= x1 || y2 <= y1 {
            return Err(err(format!("degenerate rectangle {line:?}")));
        }
        rects.push(Rect::new(x1, y1, x2, y2));
    }
    Ok(rects)
}

/// Fill a `n × n` raster (row 0 at the top) from rectangles.
pub fn rasterize(rects: &[Rect], n: usize, pixel_nm: f64) -> Result<Array2<u8>> {
    let tile = n as f64 * pixel_nm;
    let mut px = Array2::zeros((n, n));
    for r in rects {
        if r.x1 < 0 || r.y1 < 0 || r.x2 as f64 > tile || r.y2 as f64 > tile {
            return Err(SmoError::Validation(format!("{r} lies outside the {tile} nm tile")));
        }
        // Index range of pixel centers c = (k + 0.5)·p with lo ≤ c < hi.
        let range = |lo: i64, hi: i64| {
            let first = ((lo as f64 / pixel_nm) - 0.5).ceil().max(0.0) as usize;
            let end = (((hi as f64 / pixel_nm) - 0.5).ceil().max(0.0) as usize).min(n);
            first..end
        };
        let cols = range(r.x1, r.x2);
        let from_bottom = range(r.y1, r.y2);
        if cols.is_empty() || from_bottom.is_empty() {
            continue;
        }
        let rows = (n - from_bottom.end)..(n - from_bottom.start);
        px.slice_mut(s![rows, cols]).fill(1);
    }
    Ok(px)
}

/// Bring a raster to `n × n` by integer-factor replication or block majority.
pub fn resample(raster: &Array2<u8>, n: usize) -> Result<Array2<u8>> {
    let (h, w) = raster.dim();
    if h != w {
        return Err(SmoError::Validation(format!("raster must be square, got {h}x{w}")));
    }
    if h == n {
        return Ok(raster.clone());
    }
    if h > 0 && n.is_multiple_of(h) {
        let k = n / h;
        return Ok(Array2::from_shape_fn((n, n), |(i, j)| raster[[i / k, j / k]]));
    }
    if n > 0 && h % n == 0 {
        let k = h / n;
        return Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            let block = raster.slice(s![i * k..(i + 1) * k, j * k..(j + 1) * k]);
            let on = block.iter().filter(|&&v| v > 0).count();
            u8::from(2 * on >= k * k)
        }));
    }
    Err(SmoError::Validation(format!(
        "raster side {h} is not an integer multiple or divisor of {n}"
    )))
}

pub fn read_pattern_file(path: &Path) -> Result<PatternFile> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        let gray = parse_pgm(&bytes, path)?;
        return Ok(PatternFile::Raster(gray.mapv(|v| u8::from(v >= 128))));
    }
    let text = String::from_utf8(bytes).map_err(|e| SmoError::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("not UTF-8 text: {e}"),
    })?;
    Ok(PatternFile::Rects(parse_rects(&text, path)?))
}

impl PatternFile {
    pub fn to_target(&self, cfg: &OpticalConfig) -> Result<TargetPattern> {
        let pixels = match self {
            PatternFile::Rects(r) => rasterize(r, cfg.n_mask, cfg.pixel_nm)?,
            PatternFile::Raster(r) => resample(r, cfg.n_mask)?,
        };
        TargetPattern::from_pixels(pixels, cfg.pixel_nm)
    }
}

/// Read a rectangle list or graymap and rasterize it on the configured grid.
pub fn ingest_pattern(path: &Path, cfg: &OpticalConfig) -> Result<TargetPattern> {
    read_pattern_file(path)?.to_target(cfg)
}

pub fn write_rects(path: &Path, rects: &[Rect]) -> Result<()> {
    let text: String = rects.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}

/// Write a binary target as a 0/255 graymap.
pub fn write_target_pgm(path: &Path, target: &TargetPattern) -> Result<()> {
    write_pgm(path, &super::pgm::binary_to_gray(&target.pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> OpticalConfig {
        OpticalConfig::desk()
    }

    #[test]
    fn single_rect_fill() {
        let px = rasterize(&[Rect::new(100, 100, 200, 200)], 128, 4.0).unwrap();
        assert_eq!(px.iter().filter(|&&v| v == 1).count(), 625);
        // y from 100 to 200 nm maps to rows counted from the top.
        assert_eq!(px[[128 - 26, 25]], 1);
        assert_eq!(px[[128 - 25, 25]], 0);
        assert_eq!(px[[128 - 50, 49]], 1);
        assert_eq!(px[[128 - 51, 50]], 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let p = Path::new("t.rect");
        let e = parse_rects("# ok\nRECT 0 0 10 10\nRECT 1 2 3\n", p).unwrap_err();
        assert!(matches!(e, SmoError::Parse { line: 3, .. }));
        let e = parse_rects("BOX 0 0 1 1\n", p).unwrap_err();
        assert!(matches!(e, SmoError::Parse { line: 1, .. }));
        let e = parse_rects("RECT 0 0 a 1\n", p).unwrap_err();
        assert!(matches!(e, SmoError::Parse { line: 1, .. }));
        assert!(parse_rects("RECT 5 0 5 10\n", p).is_err());
    }

    #[test]
    fn out_of_tile_is_rejected() {
        let e = rasterize(&[Rect::new(0, 0, 513, 10)], 128, 4.0).unwrap_err();
        assert!(matches!(e, SmoError::Validation(_)));
        assert!(rasterize(&[Rect::new(-4, 0, 10, 10)], 128, 4.0).is_err());
        assert!(rasterize(&[Rect::new(0, 0, 512, 512)], 128, 4.0).is_ok());
    }

    #[test]
    fn empty_list_is_blank() {
        let t = PatternFile::Rects(vec![]).to_target(&cfg()).unwrap();
        assert!(t.is_empty());
        assert!(t.edge_segments.is_empty());
    }

    #[test]
    fn resample_by_integer_factors() {
        let small = Array2::from_shape_fn((4, 4), |(i, j)| u8::from(i < 2 && j >= 2));
        let big = resample(&small, 16).unwrap();
        assert_eq!(big.iter().filter(|&&v| v == 1).count(), 64);
        assert_eq!(resample(&big, 4).unwrap(), small);
        assert!(resample(&small, 6).is_err());
    }
}
