//! Optical configuration and the `key=value` text format shared by every
//! configurable struct in the crate.
//!
//! A config file holds one `key = value` pair per line. Blank lines are
//! ignored and `#` starts a comment that runs to the end of the line.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SmoError};

/// Optical, resist and loss-weight settings for one lithography setup.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalConfig {
    pub wavelength_nm: f64,
    pub na: f64,
    pub pixel_nm: f64,
    pub n_mask: usize,
    pub n_source: usize,
    pub sigma_outer: f64,
    pub sigma_inner: f64,
    pub dose_min: f64,
    pub dose_max: f64,
    pub resist_threshold: f64,
    pub resist_steepness: f64,
    pub alpha_m: f64,
    pub m0: f64,
    pub alpha_j: f64,
    pub j0: f64,
    pub gamma: f64,
    pub eta: f64,
    pub q_kernels: usize,
    pub parallel_width: usize,
    /// Source points with intensity at or below this value are skipped. A
    /// negative value disables the cut, so an all-dark source images to zero
    /// instead of failing.
    pub source_threshold: f64,
    /// Sum per-point partial images in fixed index order.
    pub deterministic: bool,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl OpticalConfig {
    /// Full-scale settings: 2048 px tiles at 1 nm with a 35x35 source.
    pub fn full_scale() -> Self {
        OpticalConfig {
            wavelength_nm: 193.0,
            na: 1.35,
            pixel_nm: 1.0,
            n_mask: 2048,
            n_source: 35,
            sigma_outer: 0.95,
            sigma_inner: 0.63,
            dose_min: 0.98,
            dose_max: 1.02,
            resist_threshold: 0.225,
            resist_steepness: 30.0,
            alpha_m: 9.0,
            m0: 1.0,
            alpha_j: 2.0,
            j0: 5.0,
            gamma: 1000.0,
            eta: 3000.0,
            q_kernels: 24,
            parallel_width: 256,
            source_threshold: 1e-6,
            deterministic: true,
        }
    }

    /// Desk-scale settings: 128 px tiles at 4 nm.
    ///
    /// At this pitch the pupil cutoff spans about 3.6 frequency bins, so a
    /// source grid finer than 7x7 only lands on the same rounded shifts.
    pub fn desk() -> Self {
        OpticalConfig {
            pixel_nm: 4.0,
            n_mask: 128,
            n_source: 7,
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SmoError::Config(msg));
        if !(self.wavelength_nm > 0.0 && self.na > 0.0 && self.pixel_nm > 0.0) {
            return fail("wavelength_nm, na and pixel_nm must be positive".into());
        }
        if self.n_mask < 8 {
            return fail(format!("n_mask must be >= 8, got {}", self.n_mask));
        }
        if self.n_source < 3 || self.n_source.is_multiple_of(2) {
            return fail(format!("n_source must be odd and >= 3, got {}", self.n_source));
        }
        if !(0.0 <= self.sigma_inner && self.sigma_inner < self.sigma_outer && self.sigma_outer <= 1.0) {
            return fail(format!(
                "need 0 <= sigma_inner < sigma_outer <= 1, got {} / {}",
                self.sigma_inner, self.sigma_outer
            ));
        }
        if !(0.0 < self.dose_min && self.dose_min <= 1.0 && 1.0 <= self.dose_max) {
            return fail(format!(
                "need 0 < dose_min <= 1 <= dose_max, got {} / {}",
                self.dose_min, self.dose_max
            ));
        }
        if !(self.resist_steepness > 0.0) {
            return fail("resist_steepness must be positive".into());
        }
        if !(self.gamma >= 0.0 && self.eta >= 0.0) {
            return fail("gamma and eta must be non-negative".into());
        }
        if self.parallel_width < 1 {
            return fail("parallel_width must be >= 1".into());
        }
        if self.source_threshold.is_nan() {
            return fail("source_threshold must not be NaN".into());
        }
        let finite = [
            self.wavelength_nm,
            self.na,
            self.pixel_nm,
            self.dose_min,
            self.dose_max,
            self.resist_threshold,
            self.resist_steepness,
            self.alpha_m,
            self.m0,
            self.alpha_j,
            self.j0,
            self.gamma,
            self.eta,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all real-valued settings must be finite".into());
        }
        Ok(())
    }

    /// Pupil cutoff NA/λ in 1/nm.
    pub fn cutoff(&self) -> f64 {
        self.na / self.wavelength_nm
    }

    /// Frequency bin spacing of the mask grid in 1/nm.
    pub fn freq_step(&self) -> f64 {
        1.0 / (self.n_mask as f64 * self.pixel_nm)
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_nm * self.pixel_nm
    }

    /// Serialize to the `key = value` format understood by [`Settings::set`].
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("wavelength_nm", self.wavelength_nm.to_string()),
            ("na", self.na.to_string()),
            ("pixel_nm", self.pixel_nm.to_string()),
            ("n_mask", self.n_mask.to_string()),
            ("n_source", self.n_source.to_string()),
            ("sigma_outer", self.sigma_outer.to_string()),
            ("sigma_inner", self.sigma_inner.to_string()),
            ("dose_min", self.dose_min.to_string()),
            ("dose_max", self.dose_max.to_string()),
            ("resist_threshold", self.resist_threshold.to_string()),
            ("resist_steepness", self.resist_steepness.to_string()),
            ("alpha_m", self.alpha_m.to_string()),
            ("m0", self.m0.to_string()),
            ("alpha_j", self.alpha_j.to_string()),
            ("j0", self.j0.to_string()),
            ("gamma", self.gamma.to_string()),
            ("eta", self.eta.to_string()),
            ("q_kernels", self.q_kernels.to_string()),
            ("parallel_width", self.parallel_width.to_string()),
            ("source_threshold", self.source_threshold.to_string()),
            ("deterministic", self.deterministic.to_string()),
        ]
    }
}

/// A struct whose fields can be overridden by `key = value` pairs.
pub trait Settings {
    /// Apply one setting. Returns `Ok(false)` if the key is not recognised.
    fn set(&mut self, key: &str, value: &str) -> Result<bool>;
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| SmoError::Config(format!("invalid value {value:?} for {key}")))
}

impl Settings for OpticalConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "wavelength_nm" => self.wavelength_nm = parse_value(key, value)?,
            "na" => self.na = parse_value(key, value)?,
            "pixel_nm" => self.pixel_nm = parse_value(key, value)?,
            "n_mask" => self.n_mask = parse_value(key, value)?,
            "n_source" => self.n_source = parse_value(key, value)?,
            "sigma_outer" => self.sigma_outer = parse_value(key, value)?,
            "sigma_inner" => self.sigma_inner = parse_value(key, value)?,
            "dose_min" => self.dose_min = parse_value(key, value)?,
            "dose_max" => self.dose_max = parse_value(key, value)?,
            "resist_threshold" => self.resist_threshold = parse_value(key, value)?,
            "resist_steepness" => self.resist_steepness = parse_value(key, value)?,
            "alpha_m" => self.alpha_m = parse_value(key, value)?,
            "m0" => self.m0 = parse_value(key, value)?,
            "alpha_j" => self.alpha_j = parse_value(key, value)?,
            "j0" => self.j0 = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "eta" => self.eta = parse_value(key, value)?,
            "q_kernels" => self.q_kernels = parse_value(key, value)?,
            "parallel_width" => self.parallel_width = parse_value(key, value)?,
            "source_threshold" => self.source_threshold = parse_value(key, value)?,
            "deterministic" => self.deterministic = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One `key = value` pair with the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Split config text into entries. `origin` is only used in error messages.
pub fn parse_kv(text: &str, origin: &Path) -> Result<Vec<KvEntry>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(SmoError::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key=value, got {line:?}"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(SmoError::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg: "empty key".into(),
            });
        }
        out.push(KvEntry {
            line: idx + 1,
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

/// Parse a `key=value` override as given on the command line.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| SmoError::Config(format!("override must be key=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Apply command-line `key=value` overrides to several targets in turn.
pub fn apply_overrides<S: AsRef<str>>(overrides: &[S], targets: &mut [&mut dyn Settings]) -> Result<()> {
    let entries = overrides
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (key, value) = parse_override(s.as_ref())?;
            Ok(KvEntry {
                line: i + 1,
                key,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    apply_entries(&entries, targets, Path::new("<overrides>"))
}

/// Apply entries to several targets in turn; every key must be claimed by one.
pub fn apply_entries(entries: &[KvEntry], targets: &mut [&mut dyn Settings], origin: &Path) -> Result<()> {
    'entries: for e in entries {
        for t in targets.iter_mut() {
            match t.set(&e.key, &e.value) {
                Ok(true) => continue 'entries,
                Ok(false) => {}
                Err(err) => {
                    return Err(SmoError::Parse {
                        path: origin.to_path_buf(),
                        line: e.line,
                        msg: err.to_string(),
                    })
                }
            }
        }
        return Err(SmoError::Parse {
            path: origin.to_path_buf(),
            line: e.line,
            msg: format!("unknown key {:?}", e.key),
        });
    }
    Ok(())
}

impl OpticalConfig {
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let origin = Path::new("<config>");
        let entries = parse_kv(text, origin)?;
        let mut cfg = OpticalConfig::default();
        apply_entries(&entries, &mut [&mut cfg], origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let entries = parse_kv(&text, path)?;
        let mut cfg = OpticalConfig::default();
        apply_entries(&entries, &mut [&mut cfg], path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
