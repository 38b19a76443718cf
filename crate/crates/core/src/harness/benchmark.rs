//! Timing comparisons: Abbe against Hopkins forward imaging, and the
//! optimization methods against each other on a set of experiments.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::experiment::{run_experiment, ExperimentOutcome, ExperimentSpec};
use crate::config::OpticalConfig;
use crate::error::{Result, SmoError};
use crate::imaging::{build_pupil, build_tcc, socs_decompose, AbbeImager, HopkinsImager};
use crate::optim::Method;
use crate::params::{activate_mask, activate_source};
use crate::source::SourceTemplate;
use crate::target::TargetPattern;

/// One Abbe/Hopkins forward timing at a given parallel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardTiming {
    pub width: usize,
    /// Source points above the activity threshold (σ).
    pub active_points: usize,
    /// Distinct coherent fields the Abbe imager evaluates for them.
    pub active_groups: usize,
    pub q_kernels: usize,
    /// Median seconds per forward evaluation.
    pub abbe_s: f64,
    pub hopkins_s: f64,
}

impl ForwardTiming {
    /// Measured Abbe / Hopkins time ratio.
    pub fn ratio(&self) -> f64 {
        self.abbe_s / self.hopkins_s
    }

    /// ⌈σ/P⌉ / ⌈Q/P⌉: the ratio of parallel rounds each method needs.
    pub fn theory_ratio(&self) -> f64 {
        let rounds = |k: usize| k.div_ceil(self.width) as f64;
        rounds(self.active_points) / rounds(self.q_kernels)
    }
}

fn median_seconds<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Time one forward image of `target` with each model at each width in
/// `widths`. A width of 0 stands for the active source point count.
///
/// The Hopkins kernels are built once up front; only per-iteration imaging
/// is timed.
pub fn forward_timing(
    cfg: &OpticalConfig,
    target: &TargetPattern,
    template: SourceTemplate,
    widths: &[usize],
    repeats: usize,
) -> Result<Vec<ForwardTiming>> {
    cfg.validate()?;
    let pupil = build_pupil(cfg);
    let theta_j = crate::source::init_source_params(template, cfg)?;
    let theta_m = crate::params::init_mask_params(target, cfg)?;
    let source = activate_source(&theta_j, cfg)?;
    let mask = activate_mask(&theta_m, cfg)?;
    let kernels = socs_decompose(&build_tcc(&source, &pupil, cfg)?, cfg.q_kernels);
    let base = AbbeImager::new(cfg, &pupil)?.with_deterministic(cfg.deterministic);
    let active_points = base.active_points(&source);
    let active_groups = base.active_groups(&source);

    widths
        .iter()
        .map(|&w| {
            let width = if w == 0 { active_points.max(1) } else { w };
            let abbe = base.clone().with_parallel_width(width);
            let hopkins = HopkinsImager::new(&kernels, width, cfg.deterministic);
            let abbe_s = median_seconds(repeats, || abbe.forward(&source, &mask).map(drop))?;
            let hopkins_s = median_seconds(repeats, || hopkins.aerial(&mask).map(drop))?;
            Ok(ForwardTiming {
                width,
                active_points,
                active_groups,
                q_kernels: kernels.q_used,
                abbe_s,
                hopkins_s,
            })
        })
        .collect()
}

/// Aggregated results of one method over several experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub avg_l2_nm2: f64,
    pub avg_pvb_nm2: f64,
    pub avg_epe: f64,
    pub avg_final_loss: f64,
    pub avg_s_per_iter: f64,
    /// Total turnaround time over all runs of this method.
    pub total_s: f64,
}

pub const METHOD_TABLE_HEADER: [&str; 10] = [
    "method",
    "runs",
    "failures",
    "avg_l2_nm2",
    "avg_pvb_nm2",
    "avg_epe",
    "avg_final_loss",
    "avg_s_per_iter",
    "total_s",
    "label",
];

/// Outcome of every spec, in input order, with the per-method table.
#[derive(Debug)]
pub struct BenchmarkResult {
    pub runs: Vec<Result<ExperimentOutcome>>,
    pub table: Vec<MethodRow>,
}

/// Run every spec, at most `workers` at a time, and aggregate per method.
/// Failed runs are counted but do not stop the others. Rows are sorted by
/// average L2 error.
pub fn benchmark(specs: &[ExperimentSpec], workers: usize) -> Result<BenchmarkResult> {
    if specs.is_empty() {
        return Err(SmoError::Validation("benchmark needs at least one experiment".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SmoError::Config(format!("cannot build worker pool: {e}")))?;
    let runs: Vec<Result<ExperimentOutcome>> = pool.install(|| specs.par_iter().map(run_experiment).collect());

    let mut table = Vec::new();
    for method in Method::ALL {
        let of_method: Vec<_> = specs.iter().zip(&runs).filter(|(s, _)| s.method == method).collect();
        if of_method.is_empty() {
            continue;
        }
        let ok: Vec<&ExperimentOutcome> = of_method.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
        for (spec, r) in &of_method {
            if let Err(e) = r {
                log::error!("{} on {} failed: {e}", method.label(), spec.pattern);
            }
        }
        let mean = |f: &dyn Fn(&ExperimentOutcome) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
            }
        };
        table.push(MethodRow {
            method,
            runs: of_method.len(),
            failures: of_method.len() - ok.len(),
            avg_l2_nm2: mean(&|o| o.summary.l2_nm2),
            avg_pvb_nm2: mean(&|o| o.summary.pvb_nm2),
            avg_epe: mean(&|o| o.summary.epe_violations as f64),
            avg_final_loss: mean(&|o| o.summary.final_loss),
            avg_s_per_iter: mean(&|o| o.seconds_per_iter()),
            total_s: ok.iter().map(|o| o.report.wall_clock_s()).sum(),
        });
    }
    table.sort_by(|a, b| a.avg_l2_nm2.total_cmp(&b.avg_l2_nm2));
    Ok(BenchmarkResult { runs, table })
}

/// One spec per (method, pattern) pair, each writing to
/// `root/<method>/<pattern>`.
pub fn method_grid(
    base: &ExperimentSpec,
    methods: &[Method],
    patterns: &[super::PatternSource],
    root: &Path,
) -> Vec<ExperimentSpec> {
    methods
        .iter()
        .flat_map(|&method| {
            patterns.iter().map(move |p| ExperimentSpec {
                pattern: p.clone(),
                method,
                output_dir: root.join(method.to_string()).join(p.name()),
                ..base.clone()
            })
        })
        .collect()
}

pub fn write_method_table(path: &Path, rows: &[MethodRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METHOD_TABLE_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.runs.to_string(),
            r.failures.to_string(),
            r.avg_l2_nm2.to_string(),
            r.avg_pvb_nm2.to_string(),
            r.avg_epe.to_string(),
            r.avg_final_loss.to_string(),
            r.avg_s_per_iter.to_string(),
            r.total_s.to_string(),
            r.method.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_forward_timings(path: &Path, rows: &[ForwardTiming]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "width",
        "active_points",
        "active_groups",
        "q_kernels",
        "abbe_s",
        "hopkins_s",
        "ratio",
        "theory_ratio",
    ])?;
    for t in rows {
        w.write_record([
            t.width.to_string(),
            t.active_points.to_string(),
            t.active_groups.to_string(),
            t.q_kernels.to_string(),
            t.abbe_s.to_string(),
            t.hopkins_s.to_string(),
            t.ratio().to_string(),
            t.theory_ratio().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Forward timings for the target and source template of `spec`.
pub fn spec_forward_timing(spec: &ExperimentSpec, widths: &[usize], repeats: usize) -> Result<Vec<ForwardTiming>> {
    let target = spec.pattern.load(&spec.optical, spec.seed)?;
    forward_timing(&spec.optical, &target, spec.template, widths, repeats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theory_ratio_counts_parallel_rounds() {
        let t = ForwardTiming {
            width: 8,
            active_points: 20,
            active_groups: 20,
            q_kernels: 24,
            abbe_s: 1.0,
            hopkins_s: 1.0,
        };
        assert_eq!(t.theory_ratio(), 1.0);
        let serial = ForwardTiming { width: 1, ..t };
        assert!((serial.theory_ratio() - 20.0 / 24.0).abs() < 1e-15);
        let wide = ForwardTiming { width: 32, ..t };
        assert_eq!(wide.theory_ratio(), 1.0);
    }

    #[test]
    fn empty_benchmark_is_rejected() {
        assert!(benchmark(&[], 1).is_err());
    }
}
