//! Experiment specification, run orchestration and result files.
//!
//! A run writes into its own output directory:
//!
//! | file                    | content                                             |
//! |-------------------------|-----------------------------------------------------|
//! | `loss_curve.csv`        | iter, total, l2_term, pvb_term, wall_clock_s        |
//! | `final_mask.pgm`        | activated mask transmission, 8-bit                  |
//! | `final_mask_binary.pgm` | mask thresholded at 0.5, 0/255                      |
//! | `final_source.pgm`      | activated source intensities, 8-bit                 |
//! | `resist_nominal.pgm`    | binarized nominal-dose print, 0/255                 |
//! | `summary.csv`           | method, target, metrics, iterations, error record   |
//! | `timing.csv`            | total and per-iteration wall-clock seconds          |
//! | `config.txt`            | every effective setting in `key = value` form       |
//!
//! Everything except `timing.csv` and the wall-clock column of the loss curve
//! is a pure function of the spec.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use super::pattern::ingest_pattern;
use super::pgm::{binary_to_gray, quantize, write_pgm};
use super::suite::suite_target;
use crate::config::{apply_entries, apply_overrides, parse_kv, parse_value, KvEntry, OpticalConfig, Settings};
use crate::error::{Result, SmoError};
use crate::loss::{SmoEval, SmoModel};
use crate::metrics::{evaluate_print, EpeSpec, PrintMetrics};
use crate::optim::{run, Method, OptimizerConfig, RunInit, RunReport, SmoProblem};
use crate::params::{init_mask_params, ParamField, ParamKind};
use crate::source::{init_source_params, SourceTemplate};
use crate::target::TargetPattern;

/// Where the target layout comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternSource {
    /// A rectangle list or graymap on disk.
    File(PathBuf),
    /// One of the bundled targets, written `suite:<name>`.
    Suite(String),
}

impl FromStr for PatternSource {
    type Err = SmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("suite:") {
            Some(name) if super::suite::SUITE_NAMES.contains(&name) => Ok(PatternSource::Suite(name.to_string())),
            Some(name) => Err(SmoError::Config(format!(
                "unknown suite target {name:?}; expected one of {:?}",
                super::suite::SUITE_NAMES
            ))),
            None => Ok(PatternSource::File(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for PatternSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternSource::File(p) => write!(f, "{}", p.display()),
            PatternSource::Suite(n) => write!(f, "suite:{n}"),
        }
    }
}

impl PatternSource {
    /// Short name used in result tables.
    pub fn name(&self) -> String {
        match self {
            PatternSource::Suite(n) => n.clone(),
            PatternSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }

    pub fn load(&self, cfg: &OpticalConfig, seed: u64) -> Result<TargetPattern> {
        match self {
            PatternSource::File(p) => ingest_pattern(p, cfg),
            PatternSource::Suite(n) => {
                suite_target(n, cfg, seed)?.ok_or_else(|| SmoError::Config(format!("unknown suite target {n:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub pattern: PatternSource,
    pub optical: OpticalConfig,
    pub optimizer: OptimizerConfig,
    pub epe: EpeSpec,
    pub method: Method,
    /// Source initialization shared by every method.
    pub template: SourceTemplate,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Desk-scale defaults for `pattern` and `method`.
    pub fn new(pattern: PatternSource, method: Method, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            pattern,
            optical: OpticalConfig::desk(),
            optimizer: OptimizerConfig::default(),
            epe: EpeSpec::default(),
            method,
            template: SourceTemplate::Annular,
            output_dir: output_dir.into(),
            seed: 0,
        }
    }

    /// Apply `key=value` overrides; every key must belong to some part of
    /// the spec.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        let mut run = RunSettings {
            method: &mut self.method,
            template: &mut self.template,
            seed: &mut self.seed,
        };
        apply_overrides(
            overrides,
            &mut [&mut self.optical, &mut self.optimizer, &mut self.epe, &mut run],
        )
    }

    /// Apply a `key = value` file, as written to `config.txt`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_entries(&parse_kv(&text, path)?, path)
    }

    fn apply_entries(&mut self, entries: &[KvEntry], origin: &Path) -> Result<()> {
        let mut run = RunSettings {
            method: &mut self.method,
            template: &mut self.template,
            seed: &mut self.seed,
        };
        apply_entries(
            entries,
            &mut [&mut self.optical, &mut self.optimizer, &mut self.epe, &mut run],
            origin,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.optical.validate()?;
        self.optimizer.validate()?;
        self.epe.validate()
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "# experiment\npattern = {}\nmethod = {}\nsource_template = {}\nseed = {}\n# optics\n{}# optimizer\n{}# metrics\nepe_step_nm = {}\nepe_threshold_nm = {}\n",
            self.pattern,
            self.method,
            self.template,
            self.seed,
            self.optical.to_kv_string(),
            self.optimizer.to_kv_string(),
            self.epe.sample_step_nm,
            self.epe.threshold_nm,
        )
    }
}

struct RunSettings<'a> {
    method: &'a mut Method,
    template: &'a mut SourceTemplate,
    seed: &'a mut u64,
}

impl Settings for RunSettings<'_> {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "method" => *self.method = value.trim().parse()?,
            "source_template" => *self.template = value.trim().parse()?,
            "seed" => *self.seed = parse_value(key, value)?,
            // Written to config.txt for reference; the pattern itself is
            // chosen by the caller.
            "pattern" => {}
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub target: String,
    pub l2_nm2: f64,
    pub pvb_nm2: f64,
    pub epe_violations: usize,
    pub epe_mean_abs_nm: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iters: usize,
    pub converged: bool,
    pub error: String,
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "method",
    "target",
    "l2_nm2",
    "pvb_nm2",
    "epe_violations",
    "epe_mean_abs_nm",
    "initial_loss",
    "final_loss",
    "iters",
    "converged",
    "error",
];

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.target.clone(),
            self.l2_nm2.to_string(),
            self.pvb_nm2.to_string(),
            self.epe_violations.to_string(),
            self.epe_mean_abs_nm.to_string(),
            self.initial_loss.to_string(),
            self.final_loss.to_string(),
            self.iters.to_string(),
            self.converged.to_string(),
            self.error.clone(),
        ]
    }

    fn from_record(r: &csv::StringRecord, path: &Path) -> Result<Self> {
        let field = |i: usize| r.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| SmoError::Parse {
                path: path.to_path_buf(),
                line: r.position().map_or(0, |p| p.line() as usize),
                msg: format!("bad number {:?} in column {}", field(i), SUMMARY_HEADER[i]),
            })
        };
        Ok(SummaryRow {
            method: field(0).parse()?,
            target: field(1).to_string(),
            l2_nm2: num(2)?,
            pvb_nm2: num(3)?,
            epe_violations: num(4)? as usize,
            epe_mean_abs_nm: num(5)?,
            initial_loss: num(6)?,
            final_loss: num(7)?,
            iters: num(8)? as usize,
            converged: field(9) == "true",
            error: field(10).to_string(),
        })
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records().map(|rec| SummaryRow::from_record(&rec?, path)).collect()
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: RunReport,
    pub summary: SummaryRow,
    pub metrics: PrintMetrics,
    pub target: TargetPattern,
}

impl ExperimentOutcome {
    /// Mean wall-clock seconds per outer iteration.
    pub fn seconds_per_iter(&self) -> f64 {
        self.report.wall_clock_s() / self.report.iters_run().max(1) as f64
    }
}

/// Initial (θ_J, θ_M) for a target: the source template and the
/// target-shaped mask.
pub fn initial_params(spec: &ExperimentSpec, target: &TargetPattern) -> Result<(ParamField, ParamField)> {
    Ok((
        init_source_params(spec.template, &spec.optical)?,
        init_mask_params(target, &spec.optical)?,
    ))
}

fn fields(model: &SmoModel, inner: &Array2<f64>, outer: &Array2<f64>) -> Result<SmoEval> {
    let tj = ParamField {
        values: inner.clone(),
        kind: ParamKind::SourceParams,
    };
    let tm = ParamField {
        values: outer.clone(),
        kind: ParamKind::MaskParams,
    };
    model.evaluate(&tj, &tm)
}

/// Run one experiment and write its artifacts to `spec.output_dir`.
///
/// A numeric abort still writes every file, from the last good iterate, with
/// the error recorded in the summary.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let target = spec.pattern.load(&spec.optical, spec.seed)?;
    let model = SmoModel::new(&spec.optical, &target)?;
    let (tj, tm) = initial_params(spec, &target)?;
    let problem = SmoProblem::new(model);
    log::info!(
        "{} on {} ({})",
        spec.method.label(),
        spec.pattern.name(),
        spec.output_dir.display()
    );
    let report = run(
        &problem,
        spec.method,
        RunInit::fresh(tj.values, tm.values),
        &spec.optimizer,
    )?;

    let eval = fields(&problem.model, report.final_inner(), report.final_outer())?;
    let w = &eval.window;
    let metrics = evaluate_print(&w.nominal, &w.min, &w.max, &target, &spec.epe)?;
    let summary = SummaryRow {
        method: spec.method,
        target: spec.pattern.name(),
        l2_nm2: metrics.l2_nm2,
        pvb_nm2: metrics.pvb_nm2,
        epe_violations: metrics.epe_violations,
        epe_mean_abs_nm: metrics.epe_mean_abs_nm,
        initial_loss: report.initial_loss().map_or(f64::NAN, |l| l.total),
        final_loss: report.final_loss().map_or(f64::NAN, |l| l.total),
        iters: report.iters_run(),
        converged: report.state.converged,
        error: report.aborted.clone().unwrap_or_default(),
    };
    let outcome = ExperimentOutcome {
        report,
        summary,
        metrics,
        target,
    };
    write_artifacts(spec, &outcome, &eval)?;
    Ok(outcome)
}

fn write_artifacts(spec: &ExperimentSpec, out: &ExperimentOutcome, eval: &SmoEval) -> Result<()> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir)?;

    let mut curve = csv::Writer::from_path(dir.join("loss_curve.csv"))?;
    curve.write_record(["iter", "total", "l2_term", "pvb_term", "wall_clock_s"])?;
    for p in out.report.trajectory() {
        curve.write_record([
            p.iter.to_string(),
            p.loss.total.to_string(),
            p.loss.l2_term.to_string(),
            p.loss.pvb_term.to_string(),
            p.wall_clock_s.to_string(),
        ])?;
    }
    curve.flush()?;

    write_pgm(&dir.join("final_mask.pgm"), &quantize(&eval.mask.transmission))?;
    write_pgm(&dir.join("final_mask_binary.pgm"), &binary_to_gray(&eval.mask.binary()))?;
    write_pgm(&dir.join("final_source.pgm"), &quantize(&eval.source.intensities))?;
    let print = eval
        .window
        .nominal
        .values
        .mapv(|v| u8::from(v >= crate::metrics::DEFAULT_CUT));
    write_pgm(&dir.join("resist_nominal.pgm"), &binary_to_gray(&print))?;

    write_summary(&dir.join("summary.csv"), std::slice::from_ref(&out.summary))?;

    let mut timing = csv::Writer::from_path(dir.join("timing.csv"))?;
    timing.write_record(["method", "target", "total_s", "per_iter_s"])?;
    timing.write_record([
        spec.method.to_string(),
        out.summary.target.clone(),
        out.report.wall_clock_s().to_string(),
        out.seconds_per_iter().to_string(),
    ])?;
    timing.flush()?;

    std::fs::write(dir.join("config.txt"), spec.to_kv_string())?;
    Ok(())
}

/// Result of a forward-only evaluation of the initial source and mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub target: TargetPattern,
    pub loss: crate::loss::LossValue,
    pub metrics: PrintMetrics,
    /// Peak aerial intensity, relative to a clear field.
    pub peak_intensity: f64,
}

/// Image the initial source and mask of `spec` without optimizing. Writes
/// `aerial.pgm` (scaled to its peak), the three binarized dose prints and
/// `metrics.csv` to `spec.output_dir`.
pub fn simulate(spec: &ExperimentSpec) -> Result<SimulationOutcome> {
    spec.validate()?;
    let target = spec.pattern.load(&spec.optical, spec.seed)?;
    let model = SmoModel::new(&spec.optical, &target)?;
    let (tj, tm) = initial_params(spec, &target)?;
    let eval = model.evaluate(&tj, &tm)?;
    let w = &eval.window;
    let metrics = evaluate_print(&w.nominal, &w.min, &w.max, &target, &spec.epe)?;
    let intensity = &eval.aerial().intensity;
    let peak_intensity = intensity.iter().copied().fold(0.0, f64::max);

    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir)?;
    let scale = if peak_intensity > 0.0 {
        1.0 / peak_intensity
    } else {
        0.0
    };
    write_pgm(&dir.join("aerial.pgm"), &quantize(&(intensity * scale)))?;
    let cut = crate::metrics::DEFAULT_CUT;
    for (name, z) in [
        ("resist_nominal", &w.nominal),
        ("resist_min", &w.min),
        ("resist_max", &w.max),
    ] {
        let print = z.values.mapv(|v| u8::from(v >= cut));
        write_pgm(&dir.join(format!("{name}.pgm")), &binary_to_gray(&print))?;
    }
    let mut csv = csv::Writer::from_path(dir.join("metrics.csv"))?;
    csv.write_record([
        "target",
        "loss",
        "l2_nm2",
        "pvb_nm2",
        "epe_violations",
        "epe_mean_abs_nm",
        "peak_intensity",
    ])?;
    csv.write_record([
        spec.pattern.name(),
        eval.loss.total.to_string(),
        metrics.l2_nm2.to_string(),
        metrics.pvb_nm2.to_string(),
        metrics.epe_violations.to_string(),
        metrics.epe_mean_abs_nm.to_string(),
        peak_intensity.to_string(),
    ])?;
    csv.flush()?;
    std::fs::write(dir.join("config.txt"), spec.to_kv_string())?;
    Ok(SimulationOutcome {
        target,
        loss: eval.loss,
        metrics,
        peak_intensity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_sources_parse() {
        assert_eq!(
            "suite:l_shape".parse::<PatternSource>().unwrap(),
            PatternSource::Suite("l_shape".into())
        );
        assert!("suite:nope".parse::<PatternSource>().is_err());
        let f: PatternSource = "layouts/a.rect".parse().unwrap();
        assert_eq!(f.name(), "a");
        assert_eq!(f.to_string(), "layouts/a.rect");
    }

    #[test]
    fn overrides_reach_every_section() {
        let mut spec = ExperimentSpec::new(PatternSource::Suite("dense_lines".into()), Method::Mo, "out");
        spec.apply_overrides(&[
            "na=1.2",
            "t=4",
            "epe_threshold_nm=10",
            "method=CG",
            "seed=9",
            "source_template=quasar",
        ])
        .unwrap();
        assert_eq!(spec.optical.na, 1.2);
        assert_eq!(spec.optimizer.unroll_t, 4);
        assert_eq!(spec.epe.threshold_nm, 10.0);
        assert_eq!(spec.method, Method::Cg);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.template, SourceTemplate::Quasar);
        assert!(spec.apply_overrides(&["bogus=1"]).is_err());
        assert!(spec.apply_overrides(&["na"]).is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let mut spec = ExperimentSpec::new(PatternSource::Suite("mixed".into()), Method::Nmn, "out");
        spec.apply_overrides(&["k=7", "gamma=2.5", "seed=3"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        std::fs::write(&path, spec.to_kv_string()).unwrap();
        let mut back = ExperimentSpec::new(PatternSource::Suite("mixed".into()), Method::Mo, "out");
        back.apply_file(&path).unwrap();
        assert_eq!(back, spec);
    }
}
