//! Outer optimization loops: mask-only, alternating and bilevel.
//!
//! Every driver counts one outer iteration per recorded trajectory point.
//! For the alternating driver that is one gradient step of whichever phase
//! is active; for the bilevel drivers it is T inner steps followed by one
//! hypergradient step on the outer variables.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;

use super::config::{OptimizerConfig, StepRule};
use super::hypergrad::{hypergrad_cg, hypergrad_fd, hypergrad_neumann};
use super::problem::{require_audit, AuditReport, BilevelProblem};
use super::step::{step, StepState};
use crate::error::{check_shape, Result, SmoError};
use crate::loss::LossValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Outer variables only, inner variables frozen.
    Mo,
    /// Alternating inner and outer phases.
    Am,
    /// Bilevel, one-step finite-difference hypergradient.
    Fd,
    /// Bilevel, truncated Neumann series.
    Nmn,
    /// Bilevel, conjugate-gradient solve.
    Cg,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mo, Method::Am, Method::Fd, Method::Nmn, Method::Cg];

    pub fn label(self) -> &'static str {
        match self {
            Method::Mo => "MO",
            Method::Am => "AM-SMO",
            Method::Fd => "BiSMO-FD",
            Method::Nmn => "BiSMO-NMN",
            Method::Cg => "BiSMO-CG",
        }
    }

    pub fn is_bilevel(self) -> bool {
        matches!(self, Method::Fd | Method::Nmn | Method::Cg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mo => "MO",
            Method::Am => "AM",
            Method::Fd => "FD",
            Method::Nmn => "NMN",
            Method::Cg => "CG",
        })
    }
}

impl FromStr for Method {
    type Err = SmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MO" => Ok(Method::Mo),
            "AM" | "AM-SMO" => Ok(Method::Am),
            "FD" | "BISMO-FD" => Ok(Method::Fd),
            "NMN" | "BISMO-NMN" => Ok(Method::Nmn),
            "CG" | "BISMO-CG" => Ok(Method::Cg),
            _ => Err(SmoError::Config(format!(
                "unknown method {s:?} (MO | AM | FD | NMN | CG)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub loss: LossValue,
    pub wall_clock_s: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub inner: Array2<f64>,
    pub outer: Array2<f64>,
    pub inner_step: StepState,
    pub outer_step: StepState,
    /// Last CG solution, reused as the next starting point.
    pub cg_warm: Option<Array2<f64>>,
    /// Outer iterations completed.
    pub iter: usize,
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
    pub elapsed_s: f64,
}

impl RunState {
    pub fn new(inner: Array2<f64>, outer: Array2<f64>) -> Self {
        RunState {
            inner_step: StepState::new(inner.dim()),
            outer_step: StepState::new(outer.dim()),
            inner,
            outer,
            cg_warm: None,
            iter: 0,
            trajectory: Vec::new(),
            converged: false,
            elapsed_s: 0.0,
        }
    }
}

/// Counters collected while running.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub neumann_truncations: usize,
    pub cg_iterations: usize,
    pub cg_negative_curvature: usize,
    pub audit: Option<AuditReport>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub method: Method,
    pub state: RunState,
    /// Set when a numeric failure stopped the run; `state` is the last good one.
    pub aborted: Option<String>,
    pub diagnostics: Diagnostics,
}

impl RunReport {
    pub fn trajectory(&self) -> &[TrajectoryPoint] {
        &self.state.trajectory
    }

    pub fn iters_run(&self) -> usize {
        self.state.iter
    }

    pub fn initial_loss(&self) -> Option<LossValue> {
        self.state.trajectory.first().map(|p| p.loss)
    }

    pub fn final_loss(&self) -> Option<LossValue> {
        self.state.trajectory.last().map(|p| p.loss)
    }

    pub fn final_inner(&self) -> &Array2<f64> {
        &self.state.inner
    }

    pub fn final_outer(&self) -> &Array2<f64> {
        &self.state.outer
    }

    pub fn wall_clock_s(&self) -> f64 {
        self.state.trajectory.last().map_or(0.0, |p| p.wall_clock_s)
    }
}

/// Where a run starts.
#[derive(Debug, Clone)]
pub enum RunInit {
    Fresh { inner: Array2<f64>, outer: Array2<f64> },
    Resume(Box<RunState>),
}

impl RunInit {
    pub fn fresh(inner: Array2<f64>, outer: Array2<f64>) -> Self {
        RunInit::Fresh { inner, outer }
    }
}

fn is_numeric(e: &SmoError) -> bool {
    matches!(e, SmoError::Numeric(_) | SmoError::DarkSource { .. })
}

fn iterate<P: BilevelProblem + ?Sized>(
    problem: &P,
    method: Method,
    s: &mut RunState,
    cfg: &OptimizerConfig,
    diag: &mut Diagnostics,
) -> Result<()> {
    let rule = cfg.step_rule;
    let scale = problem.step_scale();
    let lr = |base: f64| match rule {
        StepRule::GradientDescent => base * scale,
        StepRule::Adam { .. } => base,
    };
    match method {
        Method::Mo => {
            let (_, _, go) = problem.upper_grads(&s.inner, &s.outer)?;
            step(&mut s.outer, &go, lr(cfg.lr_outer), rule, &mut s.outer_step)?;
        }
        Method::Am => {
            let cycle = cfg.so_epoch_iters + cfg.mo_epoch_iters;
            if s.iter % cycle < cfg.so_epoch_iters {
                let (gi, _) = problem.lower_grads(&s.inner, &s.outer)?;
                step(&mut s.inner, &gi, lr(cfg.lr_inner), rule, &mut s.inner_step)?;
            } else {
                let (_, _, go) = problem.upper_grads(&s.inner, &s.outer)?;
                step(&mut s.outer, &go, lr(cfg.lr_outer), rule, &mut s.outer_step)?;
            }
        }
        Method::Fd | Method::Nmn | Method::Cg => {
            let unroll = if method == Method::Fd { 1 } else { cfg.unroll_t };
            inner_unroll(problem, s, unroll, cfg)?;
            let hg = match method {
                Method::Fd => hypergrad_fd(problem, &s.inner, &s.outer, cfg.lr_fd * scale, cfg.hvp_eps)?,
                Method::Nmn => {
                    let out = hypergrad_neumann(
                        problem,
                        &s.inner,
                        &s.outer,
                        cfg.neumann_k,
                        cfg.lr_inner * scale,
                        cfg.hvp_eps,
                    )?;
                    diag.neumann_truncations += usize::from(out.truncated);
                    out.grad
                }
                _ => {
                    let out = hypergrad_cg(problem, &s.inner, &s.outer, cfg.cg_k, s.cg_warm.as_ref(), cfg.hvp_eps)?;
                    diag.cg_iterations += out.iterations;
                    diag.cg_negative_curvature += usize::from(out.negative_curvature);
                    s.cg_warm = Some(out.w);
                    out.grad
                }
            };
            step(&mut s.outer, &hg, lr(cfg.lr_outer), rule, &mut s.outer_step)?;
        }
    }
    Ok(())
}

/// `steps` gradient steps on the lower loss with the outer variables fixed.
pub fn inner_unroll<P: BilevelProblem + ?Sized>(
    problem: &P,
    s: &mut RunState,
    steps: usize,
    cfg: &OptimizerConfig,
) -> Result<()> {
    let lr = match cfg.step_rule {
        StepRule::GradientDescent => cfg.lr_inner * problem.step_scale(),
        StepRule::Adam { .. } => cfg.lr_inner,
    };
    for _ in 0..steps {
        let (gi, _) = problem.lower_grads(&s.inner, &s.outer)?;
        step(&mut s.inner, &gi, lr, cfg.step_rule, &mut s.inner_step)?;
    }
    Ok(())
}

fn has_converged(trajectory: &[TrajectoryPoint], window: usize, tol: f64) -> bool {
    let n = trajectory.len();
    if n <= window {
        return false;
    }
    let prev = trajectory[n - 1 - window].loss.total;
    let last = trajectory[n - 1].loss.total;
    (prev - last).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE)
}

/// Run `method` until convergence or `cfg.max_outer_iters` total iterations.
///
/// A resumed run continues the iteration count, optimizer moments, CG warm
/// start and convergence history of the state it is given.
pub fn run<P: BilevelProblem + ?Sized>(
    problem: &P,
    method: Method,
    init: RunInit,
    cfg: &OptimizerConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    let mut state = match init {
        RunInit::Fresh { inner, outer } => RunState::new(inner, outer),
        RunInit::Resume(s) => *s,
    };
    check_shape("initial inner variables", problem.inner_shape(), state.inner.dim())?;
    check_shape("initial outer variables", problem.outer_shape(), state.outer.dim())?;
    let clock = Instant::now();
    let offset = state.elapsed_s;
    let wall = || offset + clock.elapsed().as_secs_f64();
    let mut diag = Diagnostics::default();
    // A single alternating phase can leave the loss flat, so the alternating
    // driver judges convergence over at least one full cycle.
    let window = match method {
        Method::Am => cfg.convergence_window.max(cfg.so_epoch_iters + cfg.mo_epoch_iters),
        _ => cfg.convergence_window,
    };
    let mut aborted = None;

    if state.trajectory.is_empty() {
        if cfg.audit {
            diag.audit = Some(require_audit(problem, &state.inner, &state.outer)?);
        }
        let loss = problem.upper_grads(&state.inner, &state.outer)?.0;
        state.trajectory.push(TrajectoryPoint {
            iter: 0,
            loss,
            wall_clock_s: wall(),
        });
    }

    while state.iter < cfg.max_outer_iters && !state.converged {
        let before = state.clone();
        let outcome = iterate(problem, method, &mut state, cfg, &mut diag)
            .and_then(|()| Ok(problem.upper_grads(&state.inner, &state.outer)?.0))
            .and_then(|loss| {
                if loss.total.is_finite() {
                    Ok(loss)
                } else {
                    Err(SmoError::Numeric(format!("non-finite loss {}", loss.total)))
                }
            });
        let loss = match outcome {
            Ok(loss) => loss,
            Err(e) if is_numeric(&e) => {
                log::error!("{} aborted at iteration {}: {e}", method.label(), before.iter + 1);
                aborted = Some(e.to_string());
                state = before;
                break;
            }
            Err(e) => return Err(e),
        };
        let stationary = state.inner == before.inner && state.outer == before.outer;
        state.iter += 1;
        state.trajectory.push(TrajectoryPoint {
            iter: state.iter,
            loss,
            wall_clock_s: wall(),
        });
        state.converged = stationary || has_converged(&state.trajectory, window, cfg.convergence_rel_tol);
    }

    if aborted.is_none() && cfg.post_polish_iters > 0 {
        inner_unroll(problem, &mut state, cfg.post_polish_iters, cfg)?;
        let loss = problem.upper_grads(&state.inner, &state.outer)?.0;
        state.trajectory.push(TrajectoryPoint {
            iter: state.iter + 1,
            loss,
            wall_clock_s: wall(),
        });
    }
    state.elapsed_s = wall();
    Ok(RunReport {
        method,
        state,
        aborted,
        diagnostics: diag,
    })
}

pub fn am_smo<P: BilevelProblem + ?Sized>(problem: &P, init: RunInit, cfg: &OptimizerConfig) -> Result<RunReport> {
    run(problem, Method::Am, init, cfg)
}

pub fn mo_only<P: BilevelProblem + ?Sized>(problem: &P, init: RunInit, cfg: &OptimizerConfig) -> Result<RunReport> {
    run(problem, Method::Mo, init, cfg)
}

pub fn bismo_run<P: BilevelProblem + ?Sized>(
    problem: &P,
    init: RunInit,
    method: Method,
    cfg: &OptimizerConfig,
) -> Result<RunReport> {
    if !method.is_bilevel() {
        return Err(SmoError::Config(format!("{method} is not a bilevel method")));
    }
    run(problem, method, init, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(iter: usize, total: f64) -> TrajectoryPoint {
        TrajectoryPoint {
            iter,
            loss: LossValue::new(total, 0.0, 1.0, 0.0),
            wall_clock_s: 0.0,
        }
    }

    #[test]
    fn convergence_needs_a_full_window() {
        let flat: Vec<_> = (0..5).map(|i| point(i, 1.0)).collect();
        assert!(!has_converged(&flat, 5, 1e-4));
        let flat: Vec<_> = (0..6).map(|i| point(i, 1.0)).collect();
        assert!(has_converged(&flat, 5, 1e-4));
        let falling: Vec<_> = (0..6).map(|i| point(i, 1.0 - 0.01 * i as f64)).collect();
        assert!(!has_converged(&falling, 5, 1e-4));
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("xx".parse::<Method>().is_err());
    }
}
