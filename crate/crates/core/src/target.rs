//! Binary target patterns and their axis-aligned edge segments.
//!
//! Grids are stored row-major with row 0 at the top of the tile. Layout
//! coordinates in nm use a lower-left origin, so `y_nm = (n - row) * pixel`.

use ndarray::Array2;

use crate::error::{Result, SmoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Runs along x; lies between two rows.
    Horizontal,
    /// Runs along y; lies between two columns.
    Vertical,
}

/// A maximal straight piece of the target boundary, in pixel-grid units.
///
/// `boundary` is the index of the grid line (0..=n): for a horizontal edge the
/// line above row `boundary`, for a vertical edge the line left of column
/// `boundary`. The edge covers pixels `start..end` along its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSegment {
    pub orientation: Orientation,
    pub boundary: usize,
    pub start: usize,
    pub end: usize,
    /// The feature lies on the lower-index side (above / left) of the line.
    pub inside_before: bool,
}

impl EdgeSegment {
    pub fn len_px(&self) -> usize {
        self.end - self.start
    }

    pub fn length_nm(&self, pixel_nm: f64) -> f64 {
        self.len_px() as f64 * pixel_nm
    }

    /// End points `(x1, y1, x2, y2)` in nm with a lower-left origin.
    pub fn endpoints_nm(&self, n: usize, pixel_nm: f64) -> (f64, f64, f64, f64) {
        let p = pixel_nm;
        match self.orientation {
            Orientation::Horizontal => {
                let y = (n - self.boundary) as f64 * p;
                (self.start as f64 * p, y, self.end as f64 * p, y)
            }
            Orientation::Vertical => {
                let x = self.boundary as f64 * p;
                (x, (n - self.end) as f64 * p, x, (n - self.start) as f64 * p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPattern {
    pub pixels: Array2<u8>,
    pub pixel_nm: f64,
    pub edge_segments: Vec<EdgeSegment>,
}

impl TargetPattern {
    pub fn from_pixels(pixels: Array2<u8>, pixel_nm: f64) -> Result<Self> {
        if pixels.nrows() != pixels.ncols() {
            return Err(SmoError::Validation("target must be square".into()));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(SmoError::Validation("target pixels must be 0 or 1".into()));
        }
        let edge_segments = extract_edges(&pixels);
        Ok(TargetPattern {
            pixels,
            pixel_nm,
            edge_segments,
        })
    }

    pub fn side(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn as_f64(&self) -> Array2<f64> {
        self.pixels.mapv(f64::from)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0)
    }

    /// Rotate the pattern by 180° about the tile center.
    pub fn rotated_180(&self) -> Self {
        let n = self.side();
        let px = Array2::from_shape_fn((n, n), |(i, j)| self.pixels[[n - 1 - i, n - 1 - j]]);
        Self::from_pixels(px, self.pixel_nm).expect("rotation keeps a valid target")
    }
}

/// Collect maximal boundary runs between 0 and 1 pixels (the tile border
/// counts as 0).
pub fn extract_edges(pixels: &Array2<u8>) -> Vec<EdgeSegment> {
    let n = pixels.nrows();
    let at = |r: isize, c: isize| -> bool {
        r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n && pixels[[r as usize, c as usize]] == 1
    };
    let mut out = Vec::new();
    for orientation in [Orientation::Horizontal, Orientation::Vertical] {
        for b in 0..=n {
            let mut run: Option<(usize, bool)> = None;
            for k in 0..=n {
                let side = if k < n {
                    let (before, after) = match orientation {
                        Orientation::Horizontal => (at(b as isize - 1, k as isize), at(b as isize, k as isize)),
                        Orientation::Vertical => (at(k as isize, b as isize - 1), at(k as isize, b as isize)),
                    };
                    (before != after).then_some(before)
                } else {
                    None
                };
                match (run, side) {
                    (Some((_, s0)), Some(s1)) if s0 == s1 => {}
                    (prev, next) => {
                        if let Some((start, inside_before)) = prev {
                            out.push(EdgeSegment {
                                orientation,
                                boundary: b,
                                start,
                                end: k,
                                inside_before,
                            });
                        }
                        run = next.map(|s| (k, s));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(n: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> Array2<u8> {
        Array2::from_shape_fn((n, n), |(i, j)| {
            u8::from((r0..r1).contains(&i) && (c0..c1).contains(&j))
        })
    }

    #[test]
    fn rectangle_has_four_edges() {
        let t = TargetPattern::from_pixels(rect(32, 5, 15, 8, 20), 4.0).unwrap();
        assert_eq!(t.edge_segments.len(), 4);
        let lens: Vec<usize> = t.edge_segments.iter().map(|e| e.len_px()).collect();
        assert_eq!(lens.iter().filter(|&&l| l == 12).count(), 2);
        assert_eq!(lens.iter().filter(|&&l| l == 10).count(), 2);
        let top = t
            .edge_segments
            .iter()
            .find(|e| e.orientation == Orientation::Horizontal && e.boundary == 5)
            .unwrap();
        assert!(!top.inside_before);
        assert_eq!(top.endpoints_nm(32, 4.0), (32.0, 108.0, 80.0, 108.0));
    }

    #[test]
    fn empty_target_has_no_edges() {
        let t = TargetPattern::from_pixels(Array2::zeros((16, 16)), 1.0).unwrap();
        assert!(t.edge_segments.is_empty());
        assert!(t.is_empty());
    }

    #[test]
    fn l_shape_edges() {
        let mut px = rect(32, 4, 20, 4, 10);
        px += &rect(32, 14, 20, 10, 24);
        let t = TargetPattern::from_pixels(px, 1.0).unwrap();
        assert_eq!(t.edge_segments.len(), 6);
        let perimeter: usize = t.edge_segments.iter().map(|e| e.len_px()).sum();
        assert_eq!(perimeter, 2 * (20 + 16));
    }

    #[test]
    fn rejects_non_binary() {
        let mut px = Array2::zeros((8, 8));
        px[[0, 0]] = 2;
        assert!(TargetPattern::from_pixels(px, 1.0).is_err());
    }
}
