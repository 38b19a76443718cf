use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use litho_smo::config::{apply_entries, apply_overrides, parse_kv};
use litho_smo::harness::benchmark::{spec_forward_timing, write_forward_timings, write_method_table};
use litho_smo::harness::{
    benchmark, gradcheck, method_grid, run_experiment, simulate, ExperimentSpec, GradcheckSpec, PatternSource,
    SUITE_NAMES,
};
use litho_smo::optim::Method;
use litho_smo::{Result, SmoError};

/// Source-mask co-optimization on desk-scale lithography tiles.
#[derive(Parser)]
#[command(name = "litho-smo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Image the initial source and mask of a pattern, without optimizing.
    Simulate(Common),
    /// Optimize source and mask for one pattern.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// MO, AM, FD, NMN or CG.
        #[arg(long, default_value = "NMN")]
        method: Method,
    },
    /// Compare analytic gradients with finite differences on a small instance.
    Gradcheck {
        #[arg(long, default_value_t = 32)]
        n_mask: usize,
        #[arg(long, default_value_t = 3)]
        n_source: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        /// Scale the analytic mask gradient before comparing (negative control).
        #[arg(long, hide = true)]
        corrupt_gradient: Option<f64>,
        /// A `key = value` file with n_mask, n_source, seed, fd_step or hvp_eps.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a setting, as key=value.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Time Abbe against Hopkins imaging and compare methods over patterns.
    Benchmark {
        /// Patterns to run; defaults to the whole bundled suite.
        #[arg(long = "pattern", value_name = "PATTERN")]
        patterns: Vec<PatternSource>,
        /// Methods to compare; defaults to all five.
        #[arg(long = "method", value_name = "METHOD")]
        methods: Vec<Method>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Forward evaluations per timing measurement.
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        /// Only measure forward imaging.
        #[arg(long)]
        timing_only: bool,
        #[arg(long, default_value = "benchmark_out")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override any setting, as key=value.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Rectangle list, graymap, or `suite:<name>`.
    #[arg(long, default_value = "suite:dense_lines")]
    pattern: PatternSource,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// A `key = value` settings file applied before --set overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any setting, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_spec(
    pattern: PatternSource,
    method: Method,
    out: PathBuf,
    config: Option<&PathBuf>,
    overrides: &[String],
) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(pattern, method, out);
    if let Some(path) = config {
        spec.apply_file(path)?;
    }
    spec.apply_overrides(overrides)?;
    spec.validate()?;
    Ok(spec)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(c) => {
            let spec = build_spec(c.pattern, Method::Mo, c.out, c.config.as_ref(), &c.overrides)?;
            let s = simulate(&spec)?;
            println!("target           {}", spec.pattern);
            println!("loss             {:.6e}", s.loss.total);
            println!("peak intensity   {:.4}", s.peak_intensity);
            println!("L2               {} nm^2", s.metrics.l2_nm2);
            println!("PVB              {} nm^2", s.metrics.pvb_nm2);
            println!("EPE violations   {}", s.metrics.epe_violations);
            println!("artifacts        {}", spec.output_dir.display());
        }
        Command::Optimize { common: c, method } => {
            let spec = build_spec(c.pattern, method, c.out, c.config.as_ref(), &c.overrides)?;
            let o = run_experiment(&spec)?;
            let s = &o.summary;
            println!("{} on {}", method.label(), spec.pattern);
            println!(
                "loss             {:.6e} -> {:.6e} in {} iterations",
                s.initial_loss, s.final_loss, s.iters
            );
            println!("L2               {} nm^2", s.l2_nm2);
            println!("PVB              {} nm^2", s.pvb_nm2);
            println!("EPE violations   {}", s.epe_violations);
            println!("wall clock       {:.2} s", o.report.wall_clock_s());
            println!("artifacts        {}", spec.output_dir.display());
            if !s.error.is_empty() {
                return Err(SmoError::Numeric(s.error.clone()));
            }
        }
        Command::Gradcheck {
            n_mask,
            n_source,
            seed,
            corrupt_gradient,
            config,
            overrides,
        } => {
            let mut spec = GradcheckSpec {
                n_mask,
                n_source,
                seed,
                corrupt_mask_gradient: corrupt_gradient,
                ..GradcheckSpec::default()
            };
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)?;
                apply_entries(&parse_kv(&text, &path)?, &mut [&mut spec], &path)?;
            }
            apply_overrides(&overrides, &mut [&mut spec])?;
            let r = gradcheck(&spec)?;
            println!("mask gradient    max rel error {:.3e}", r.mask_error);
            println!("source gradient  max rel error {:.3e}", r.source_error);
            println!("HVP symmetry     residual      {:.3e}", r.hvp_symmetry);
            println!("bilevel fixture  max rel error {:.3e}", r.fixture_error);
            r.into_result()?;
            println!("PASS");
        }
        Command::Benchmark {
            patterns,
            methods,
            workers,
            repeats,
            timing_only,
            out,
            config,
            overrides,
        } => {
            let patterns = if patterns.is_empty() {
                SUITE_NAMES
                    .iter()
                    .map(|n| PatternSource::Suite(n.to_string()))
                    .collect()
            } else {
                patterns
            };
            let methods = if methods.is_empty() {
                Method::ALL.to_vec()
            } else {
                methods
            };
            let base = build_spec(
                patterns[0].clone(),
                methods[0],
                out.clone(),
                config.as_ref(),
                &overrides,
            )?;
            std::fs::create_dir_all(&out)?;

            let timing_spec = ExperimentSpec {
                pattern: patterns[0].clone(),
                ..base.clone()
            };
            let timings = spec_forward_timing(&timing_spec, &[0, 1], repeats)?;
            write_forward_timings(&out.join("forward_timing.csv"), &timings)?;
            println!(
                "forward imaging on {} (Q = {})",
                timing_spec.pattern, base.optical.q_kernels
            );
            println!(
                "{:>6} {:>7} {:>7} {:>11} {:>11} {:>7} {:>7}",
                "width", "points", "fields", "abbe ms", "hopkins ms", "ratio", "theory"
            );
            for t in &timings {
                println!(
                    "{:>6} {:>7} {:>7} {:>11.3} {:>11.3} {:>7.2} {:>7.2}",
                    t.width,
                    t.active_points,
                    t.active_groups,
                    t.abbe_s * 1e3,
                    t.hopkins_s * 1e3,
                    t.ratio(),
                    t.theory_ratio()
                );
            }
            if timing_only {
                return Ok(());
            }

            let specs = method_grid(&base, &methods, &patterns, &out);
            let result = benchmark(&specs, workers)?;
            write_method_table(&out.join("methods.csv"), &result.table)?;
            println!();
            println!(
                "{:<10} {:>5} {:>12} {:>12} {:>8} {:>14} {:>10} {:>10}",
                "method", "runs", "avg L2", "avg PVB", "avg EPE", "avg loss", "s/iter", "total s"
            );
            for r in &result.table {
                println!(
                    "{:<10} {:>5} {:>12.1} {:>12.1} {:>8.2} {:>14.6e} {:>10.4} {:>10.2}",
                    r.method.label(),
                    r.runs - r.failures,
                    r.avg_l2_nm2,
                    r.avg_pvb_nm2,
                    r.avg_epe,
                    r.avg_final_loss,
                    r.avg_s_per_iter,
                    r.total_s
                );
            }
            let failures: usize = result.table.iter().map(|r| r.failures).sum();
            if failures > 0 {
                return Err(SmoError::Numeric(format!("{failures} benchmark run(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
