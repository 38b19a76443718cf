//! Parametric illumination templates used to initialize θ_J.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::config::OpticalConfig;
use crate::error::{Result, SmoError};
use crate::params::{source_coords, ParamField, ParamKind};

/// Angular opening of each quasar pole.
pub const QUASAR_OPENING_DEG: f64 = 45.0;
/// Angular opening of each dipole pole.
pub const DIPOLE_OPENING_DEG: f64 = 90.0;

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTemplate {
    Annular,
    Quasar,
    Dipole,
}

impl FromStr for SourceTemplate {
    type Err = SmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "annular" => Ok(SourceTemplate::Annular),
            "quasar" => Ok(SourceTemplate::Quasar),
            "dipole" => Ok(SourceTemplate::Dipole),
            _ => Err(SmoError::Config(format!("unknown source template {s:?}"))),
        }
    }
}

impl fmt::Display for SourceTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceTemplate::Annular => "annular",
            SourceTemplate::Quasar => "quasar",
            SourceTemplate::Dipole => "dipole",
        })
    }
}

fn in_wedges(x: f64, y: f64, centers_deg: &[f64], opening_deg: f64) -> bool {
    if x == 0.0 && y == 0.0 {
        return true;
    }
    let angle = y.atan2(x);
    let half = opening_deg.to_radians() / 2.0;
    centers_deg.iter().any(|c| {
        let mut d = (angle - c.to_radians()).rem_euclid(2.0 * PI);
        if d > PI {
            d = 2.0 * PI - d;
        }
        d <= half + EDGE_TOL
    })
}

impl SourceTemplate {
    /// Whether the σ-unit point `(x, y)` lies inside the template.
    pub fn contains(self, x: f64, y: f64, sigma_inner: f64, sigma_outer: f64) -> bool {
        let r = x.hypot(y);
        let annulus = r >= sigma_inner - EDGE_TOL && r <= sigma_outer + EDGE_TOL;
        annulus
            && match self {
                SourceTemplate::Annular => true,
                SourceTemplate::Quasar => in_wedges(x, y, &[45.0, 135.0, 225.0, 315.0], QUASAR_OPENING_DEG),
                SourceTemplate::Dipole => in_wedges(x, y, &[0.0, 180.0], DIPOLE_OPENING_DEG),
            }
    }

    /// Binary template J_0 on the configured source grid.
    pub fn mask(self, cfg: &OpticalConfig) -> Array2<u8> {
        source_coords(cfg.n_source).mapv(|(x, y)| u8::from(self.contains(x, y, cfg.sigma_inner, cfg.sigma_outer)))
    }
}

pub fn init_source_params(template: SourceTemplate, cfg: &OpticalConfig) -> Result<ParamField> {
    cfg.validate()?;
    let j0 = cfg.j0;
    Ok(ParamField {
        values: template.mask(cfg).mapv(|b| if b == 1 { j0 } else { -j0 }),
        kind: ParamKind::SourceParams,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> OpticalConfig {
        OpticalConfig {
            n_source: n,
            ..OpticalConfig::desk()
        }
    }

    #[test]
    fn annulus_membership_by_radius() {
        let t = SourceTemplate::Annular;
        assert!(t.contains(0.8, 0.0, 0.63, 0.95));
        assert!(!t.contains(0.3, 0.0, 0.63, 0.95));
        assert!(!t.contains(0.0, 0.0, 0.63, 0.95));
        assert!(t.contains(0.63, 0.0, 0.63, 0.95));
        assert!(t.contains(0.0, 0.95, 0.63, 0.95));
    }

    #[test]
    fn center_pixel_is_off() {
        let c = cfg(11);
        for t in [SourceTemplate::Annular, SourceTemplate::Quasar, SourceTemplate::Dipole] {
            let th = init_source_params(t, &c).unwrap();
            assert_eq!(th.values[[5, 5]], -c.j0);
        }
    }

    #[test]
    fn annulus_count_matches_enumeration() {
        // 11x11 grid has pitch 0.2, so membership is 0.63² <= 0.04·(i²+j²) <= 0.95²,
        // i.e. i²+j² in [10, 22]. Enumerate the integer lattice directly.
        let mut expected = 0;
        for i in -5i32..=5 {
            for j in -5i32..=5 {
                let s = i * i + j * j;
                if (10..=22).contains(&s) {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 40);
        let th = init_source_params(SourceTemplate::Annular, &cfg(11)).unwrap();
        assert_eq!(th.values.iter().filter(|&&v| v == 5.0).count(), expected);
    }

    #[test]
    fn quasar_and_dipole_are_subsets_of_annulus() {
        let c = cfg(15);
        let ann = SourceTemplate::Annular.mask(&c);
        for t in [SourceTemplate::Quasar, SourceTemplate::Dipole] {
            let m = t.mask(&c);
            assert!(m.iter().zip(ann.iter()).all(|(&a, &b)| a <= b));
            assert!(m.iter().any(|&v| v == 1));
            assert!(m.iter().filter(|&&v| v == 1).count() < ann.iter().filter(|&&v| v == 1).count());
        }
        // dipole poles sit on the horizontal axis
        let d = SourceTemplate::Dipole.mask(&c);
        assert_eq!(d[[7, 14]], 0); // x = 1.0 is outside σ_o
        assert_eq!(d[[7, 13]], 1);
        assert_eq!(d[[1, 7]], 0);
    }

    #[test]
    fn template_is_deterministic() {
        let c = cfg(35);
        let a = init_source_params(SourceTemplate::Quasar, &c).unwrap();
        let b = init_source_params(SourceTemplate::Quasar, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_names() {
        assert_eq!("Annular".parse::<SourceTemplate>().unwrap(), SourceTemplate::Annular);
        assert!("ring".parse::<SourceTemplate>().is_err());
    }
}
