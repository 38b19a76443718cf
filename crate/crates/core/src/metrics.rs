//! Evaluation metrics on binarized resist images: squared L2 error, process
//! variation band area and edge placement error.

use ndarray::{Array2, Zip};

use crate::config::{parse_value, Settings};
use crate::error::{check_shape, Result, SmoError};
use crate::imaging::ResistImage;
use crate::target::{EdgeSegment, Orientation, TargetPattern};

/// A strictly 0/1 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub pixels: Array2<u8>,
}

impl BinaryImage {
    pub fn new(pixels: Array2<u8>) -> Result<Self> {
        if pixels.iter().any(|&p| p > 1) {
            return Err(SmoError::Validation("binary image pixels must be 0 or 1".into()));
        }
        Ok(BinaryImage { pixels })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }
}

impl From<&TargetPattern> for BinaryImage {
    fn from(t: &TargetPattern) -> Self {
        BinaryImage {
            pixels: t.pixels.clone(),
        }
    }
}

pub const DEFAULT_CUT: f64 = 0.5;

/// Threshold a resist image: a pixel prints when its value is at least `cut`.
pub fn binarize(z: &ResistImage, cut: f64) -> Result<BinaryImage> {
    if !(cut > 0.0 && cut < 1.0) {
        return Err(SmoError::Validation(format!(
            "binarization cut must lie in (0, 1), got {cut}"
        )));
    }
    Ok(BinaryImage {
        pixels: z.values.mapv(|v| u8::from(v >= cut)),
    })
}

fn differing(a: &Array2<u8>, b: &Array2<u8>) -> usize {
    Zip::from(a).and(b).fold(0, |acc, &x, &y| acc + usize::from(x != y))
}

/// Number of pixels where the print differs from the target, in nm².
pub fn metric_l2(z: &BinaryImage, target: &TargetPattern) -> Result<f64> {
    check_shape("L2 metric", target.pixels.dim(), z.dim())?;
    Ok(differing(&z.pixels, &target.pixels) as f64 * target.pixel_nm * target.pixel_nm)
}

/// XOR area of the two extreme-dose prints, in nm².
pub fn metric_pvb(z_min: &BinaryImage, z_max: &BinaryImage, pixel_nm: f64) -> Result<f64> {
    check_shape("PVB metric", z_min.dim(), z_max.dim())?;
    Ok(differing(&z_min.pixels, &z_max.pixels) as f64 * pixel_nm * pixel_nm)
}

/// Edge placement measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpeSpec {
    /// Spacing of measurement points along each target edge.
    pub sample_step_nm: f64,
    /// A point violates when its displacement exceeds this.
    pub threshold_nm: f64,
}

impl Default for EpeSpec {
    fn default() -> Self {
        EpeSpec {
            sample_step_nm: 40.0,
            threshold_nm: 15.0,
        }
    }
}

impl EpeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_step_nm > 0.0 && self.threshold_nm > 0.0) {
            return Err(SmoError::Config(format!(
                "EPE sample step and threshold must be positive, got {} and {}",
                self.sample_step_nm, self.threshold_nm
            )));
        }
        Ok(())
    }
}

impl Settings for EpeSpec {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "epe_step_nm" => self.sample_step_nm = parse_value(key, value)?,
            "epe_threshold_nm" => self.threshold_nm = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One measurement point on a target edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpeSample {
    pub segment: usize,
    /// Position along the edge from its start, in nm.
    pub offset_nm: f64,
    /// Signed displacement of the printed contour, positive outward.
    pub displacement_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpeReport {
    pub samples: Vec<EpeSample>,
    pub violations: usize,
    /// Mean absolute displacement over all points (0 when there are none).
    pub mean_abs_nm: f64,
}

/// Offsets of the measurement points along an edge of length `len`: one every
/// `step`, centered on the edge, or the midpoint for edges shorter than `step`.
pub fn sample_offsets(len: f64, step: f64) -> Vec<f64> {
    let count = ((len / step).floor() as usize).max(1);
    let first = (len - (count - 1) as f64 * step) / 2.0;
    (0..count).map(|k| first + k as f64 * step).collect()
}

/// Signed contour displacement at pixel `along` of `seg`, scanning at most
/// `horizon` pixels. Reaching the horizon reports the horizon distance.
fn displacement_px(print: &Array2<u8>, seg: &EdgeSegment, along: usize, horizon: usize) -> isize {
    let n = print.nrows() as isize;
    let b = seg.boundary as isize;
    // Unit step pointing out of the feature, and the first pixel on each side.
    let (outward, inside0, outside0) = if seg.inside_before {
        (1, b - 1, b)
    } else {
        (-1, b, b - 1)
    };
    let at = |k: isize| -> u8 {
        if k < 0 || k >= n {
            return 0;
        }
        match seg.orientation {
            Orientation::Horizontal => print[[k as usize, along]],
            Orientation::Vertical => print[[along, k as usize]],
        }
    };
    if at(outside0) == 1 {
        let grown = (0..horizon as isize)
            .take_while(|&s| at(outside0 + s * outward) == 1)
            .count();
        grown as isize
    } else if at(inside0) == 0 {
        let shrunk = (0..horizon as isize)
            .take_while(|&s| at(inside0 - s * outward) == 0)
            .count();
        -(shrunk as isize)
    } else {
        0
    }
}

/// Measure the printed contour at every sample point of every target edge.
pub fn epe_report(z: &BinaryImage, target: &TargetPattern, spec: &EpeSpec) -> Result<EpeReport> {
    spec.validate()?;
    check_shape("EPE metric", target.pixels.dim(), z.dim())?;
    if target.edge_segments.is_empty() {
        log::warn!("EPE requested on a target without edges; reporting 0 violations");
        return Ok(EpeReport {
            samples: Vec::new(),
            violations: 0,
            mean_abs_nm: 0.0,
        });
    }
    let p = target.pixel_nm;
    let horizon = (2.0 * spec.threshold_nm / p).ceil() as usize;
    let mut samples = Vec::new();
    for (idx, seg) in target.edge_segments.iter().enumerate() {
        for offset in sample_offsets(seg.length_nm(p), spec.sample_step_nm) {
            let along = (seg.start + (offset / p).floor() as usize).min(seg.end - 1);
            let d = displacement_px(&z.pixels, seg, along, horizon) as f64 * p;
            samples.push(EpeSample {
                segment: idx,
                offset_nm: offset,
                displacement_nm: d,
            });
        }
    }
    let violations = samples
        .iter()
        .filter(|s| s.displacement_nm.abs() > spec.threshold_nm)
        .count();
    let mean_abs_nm = samples.iter().map(|s| s.displacement_nm.abs()).sum::<f64>() / samples.len() as f64;
    Ok(EpeReport {
        samples,
        violations,
        mean_abs_nm,
    })
}

/// Count of measurement points whose displacement exceeds the threshold.
pub fn metric_epe(z: &BinaryImage, target: &TargetPattern, spec: &EpeSpec) -> Result<usize> {
    Ok(epe_report(z, target, spec)?.violations)
}

/// All three metrics of one print.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrintMetrics {
    pub l2_nm2: f64,
    pub pvb_nm2: f64,
    pub epe_violations: usize,
    pub epe_mean_abs_nm: f64,
}

/// Binarize the three dose images at [`DEFAULT_CUT`] and measure them.
pub fn evaluate_print(
    nominal: &ResistImage,
    min: &ResistImage,
    max: &ResistImage,
    target: &TargetPattern,
    spec: &EpeSpec,
) -> Result<PrintMetrics> {
    let z = binarize(nominal, DEFAULT_CUT)?;
    let epe = epe_report(&z, target, spec)?;
    Ok(PrintMetrics {
        l2_nm2: metric_l2(&z, target)?,
        pvb_nm2: metric_pvb(
            &binarize(min, DEFAULT_CUT)?,
            &binarize(max, DEFAULT_CUT)?,
            target.pixel_nm,
        )?,
        epe_violations: epe.violations,
        epe_mean_abs_nm: epe.mean_abs_nm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> Array2<u8> {
        Array2::from_shape_fn((n, n), |(i, j)| {
            u8::from((r0..r1).contains(&i) && (c0..c1).contains(&j))
        })
    }

    #[test]
    fn binarize_boundary_is_inclusive() {
        let z = ResistImage {
            values: Array2::from_elem((4, 4), 0.5),
        };
        assert_eq!(binarize(&z, 0.5).unwrap().count_ones(), 16);
        assert!(binarize(&z, 1.0).is_err());
    }

    #[test]
    fn l2_counts_pixel_area() {
        let t = TargetPattern::from_pixels(Array2::zeros((8, 8)), 4.0).unwrap();
        let mut px = Array2::zeros((8, 8));
        px.iter_mut().take(10).for_each(|p| *p = 1);
        let z = BinaryImage::new(px).unwrap();
        assert_eq!(metric_l2(&z, &t).unwrap(), 160.0);
    }

    #[test]
    fn offsets_are_centered() {
        assert_eq!(sample_offsets(100.0, 40.0), vec![30.0, 70.0]);
        assert_eq!(sample_offsets(20.0, 40.0), vec![10.0]);
        assert_eq!(sample_offsets(120.0, 40.0), vec![20.0, 60.0, 100.0]);
    }

    #[test]
    fn perfect_print_has_no_epe() {
        let t = TargetPattern::from_pixels(block(64, 10, 50, 20, 40), 4.0).unwrap();
        let r = epe_report(&BinaryImage::from(&t), &t, &EpeSpec::default()).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.mean_abs_nm, 0.0);
        assert!(!r.samples.is_empty());
    }

    #[test]
    fn displacement_sign_follows_the_normal() {
        // Right edge pushed out by 3 px, left edge pulled in by 2 px.
        let t = TargetPattern::from_pixels(block(64, 10, 50, 20, 40), 1.0).unwrap();
        let z = BinaryImage::new(block(64, 10, 50, 22, 43)).unwrap();
        let spec = EpeSpec {
            sample_step_nm: 8.0,
            threshold_nm: 15.0,
        };
        let r = epe_report(&z, &t, &spec).unwrap();
        for s in &r.samples {
            let seg = t.edge_segments[s.segment];
            if seg.orientation == Orientation::Vertical {
                let expected = if seg.inside_before { 3.0 } else { -2.0 };
                assert_eq!(s.displacement_nm, expected);
            }
        }
    }

    #[test]
    fn empty_target_reports_zero() {
        let t = TargetPattern::from_pixels(Array2::zeros((8, 8)), 4.0).unwrap();
        let z = BinaryImage::new(Array2::ones((8, 8))).unwrap();
        assert_eq!(metric_epe(&z, &t, &EpeSpec::default()).unwrap(), 0);
    }
}
