//! Bundled synthetic targets and small random instances.
//!
//! The suite holds six rectilinear layouts drawn on a 512 nm tile (128 px at
//! 4 nm). Geometry is scaled to other tile sizes and jittered by a seeded
//! whole-pattern translation so every target is reproducible.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pattern::{rasterize, Rect};
use crate::config::OpticalConfig;
use crate::error::Result;
use crate::params::{ParamField, ParamKind};
use crate::target::TargetPattern;

/// Names of the bundled targets, in suite order.
pub const SUITE_NAMES: [&str; 6] = [
    "isolated_line",
    "dense_lines",
    "l_shape",
    "t_junction",
    "contact_array",
    "mixed",
];

const REFERENCE_TILE_NM: i64 = 512;

fn base_rects(name: &str) -> Option<Vec<Rect>> {
    let r = Rect::new;
    Some(match name {
        "isolated_line" => vec![r(216, 96, 296, 416)],
        "dense_lines" => vec![r(124, 96, 188, 416), r(224, 96, 288, 416), r(324, 96, 388, 416)],
        "l_shape" => vec![r(128, 128, 224, 400), r(128, 128, 384, 224)],
        "t_junction" => vec![r(112, 320, 400, 400), r(216, 112, 296, 320)],
        "contact_array" => vec![
            r(76, 76, 148, 148),
            r(220, 76, 292, 148),
            r(364, 76, 436, 148),
            r(76, 220, 148, 292),
            r(220, 220, 292, 292),
            r(364, 220, 436, 292),
            r(76, 364, 148, 436),
            r(220, 364, 292, 436),
            r(364, 364, 436, 436),
        ],
        "mixed" => vec![
            r(96, 96, 168, 416),
            r(280, 328, 352, 400),
            r(240, 104, 416, 176),
            r(344, 104, 416, 256),
        ],
        _ => return None,
    })
}

/// Rectangles of a suite target for the tile implied by `cfg`, with a seeded
/// translation of up to ±16 nm (reference scale) on each axis.
pub fn suite_rects(name: &str, cfg: &OpticalConfig, seed: u64) -> Option<Vec<Rect>> {
    let base = base_rects(name)?;
    let tile = (cfg.n_mask as f64 * cfg.pixel_nm).round() as i64;
    let idx = SUITE_NAMES.iter().position(|&n| n == name)? as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + idx));
    let (dx, dy) = (4 * rng.gen_range(-4i64..=4), 4 * rng.gen_range(-4i64..=4));
    let scale = |v: i64| (v * tile + REFERENCE_TILE_NM / 2).div_euclid(REFERENCE_TILE_NM);
    Some(
        base.into_iter()
            .map(|b| {
                let t = b.translated(dx, dy);
                Rect::new(scale(t.x1), scale(t.y1), scale(t.x2), scale(t.y2))
            })
            .collect(),
    )
}

pub fn suite_target(name: &str, cfg: &OpticalConfig, seed: u64) -> Result<Option<TargetPattern>> {
    let Some(rects) = suite_rects(name, cfg, seed) else {
        return Ok(None);
    };
    let pixels = rasterize(&rects, cfg.n_mask, cfg.pixel_nm)?;
    Ok(Some(TargetPattern::from_pixels(pixels, cfg.pixel_nm)?))
}

/// All six targets, in suite order.
pub fn suite(cfg: &OpticalConfig, seed: u64) -> Result<Vec<(&'static str, TargetPattern)>> {
    SUITE_NAMES
        .iter()
        .map(|&name| Ok((name, suite_target(name, cfg, seed)?.expect("bundled name"))))
        .collect()
}

/// A small seeded problem for gradient audits and tests.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub cfg: OpticalConfig,
    pub target: TargetPattern,
    pub theta_j: ParamField,
    pub theta_m: ParamField,
}

/// Random rectangles on a 512 nm tile sampled at `n_mask` pixels, with
/// grayscale (non-saturated) parameters so every gradient entry is
/// exercised.
pub fn synthetic_instance(n_mask: usize, n_source: usize, seed: u64) -> Result<SyntheticInstance> {
    let cfg = OpticalConfig {
        n_mask,
        n_source,
        pixel_nm: REFERENCE_TILE_NM as f64 / n_mask as f64,
        ..OpticalConfig::desk()
    };
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tile = REFERENCE_TILE_NM;
    let rects: Vec<Rect> = (0..3)
        .map(|_| {
            let w = 4 * rng.gen_range(16..40);
            let h = 4 * rng.gen_range(16..40);
            let x = 4 * rng.gen_range(8..(tile - w) / 4 - 8);
            let y = 4 * rng.gen_range(8..(tile - h) / 4 - 8);
            Rect::new(x, y, x + w, y + h)
        })
        .collect();
    let target = TargetPattern::from_pixels(rasterize(&rects, n_mask, cfg.pixel_nm)?, cfg.pixel_nm)?;
    let noise = Normal::new(0.0, 0.3).expect("valid normal");
    let m0 = cfg.m0;
    let theta_m = Array2::from_shape_fn((n_mask, n_mask), |(i, j)| {
        let base = if target.pixels[[i, j]] == 1 { m0 } else { -m0 };
        0.3 * base + noise.sample(&mut rng)
    });
    let theta_j = Array2::from_shape_fn((n_source, n_source), |_| rng.gen_range(-1.5..1.5));
    Ok(SyntheticInstance {
        theta_j: ParamField {
            values: theta_j,
            kind: ParamKind::SourceParams,
        },
        theta_m: ParamField {
            values: theta_m,
            kind: ParamKind::MaskParams,
        },
        cfg,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_reproducible_and_nonempty() {
        let cfg = OpticalConfig::desk();
        let a = suite(&cfg, 7).unwrap();
        let b = suite(&cfg, 7).unwrap();
        assert_eq!(a.len(), 6);
        for ((na, ta), (nb, tb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            assert_eq!(ta.pixels, tb.pixels);
            assert!(!ta.is_empty());
            assert!(ta.edge_segments.len() >= 4);
        }
        assert!(suite_target("nope", &cfg, 0).unwrap().is_none());
    }

    #[test]
    fn synthetic_instance_shapes() {
        let inst = synthetic_instance(32, 3, 1).unwrap();
        assert_eq!(inst.theta_m.dim(), (32, 32));
        assert_eq!(inst.theta_j.dim(), (3, 3));
        assert!(!inst.target.is_empty());
    }
}
