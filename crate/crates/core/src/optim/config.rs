use std::fmt;
use std::str::FromStr;

use crate::config::{parse_value, Settings};
use crate::error::{Result, SmoError};

/// Parameter update rule shared by inner and outer steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl StepRule {
    pub const fn adam() -> Self {
        StepRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::GradientDescent => f.write_str("gd"),
            StepRule::Adam { .. } => f.write_str("adam"),
        }
    }
}

impl FromStr for StepRule {
    type Err = SmoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" | "sgd" | "gradientdescent" | "gradient_descent" => Ok(StepRule::GradientDescent),
            "adam" => Ok(StepRule::adam()),
            _ => Err(SmoError::Config(format!("unknown step rule {s:?} (gd | adam)"))),
        }
    }
}

/// Hyperparameters of the alternating and bilevel drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Inner gradient steps per outer iteration (T).
    pub unroll_t: usize,
    /// Neumann series terms (K).
    pub neumann_k: usize,
    /// Conjugate-gradient iterations (K).
    pub cg_k: usize,
    /// Inner step size ξ_J; also scales the Neumann recursion.
    pub lr_inner: f64,
    /// Outer step size ξ_M.
    pub lr_outer: f64,
    /// ξ of the one-step finite-difference hypergradient.
    pub lr_fd: f64,
    pub step_rule: StepRule,
    pub max_outer_iters: usize,
    pub convergence_rel_tol: f64,
    pub convergence_window: usize,
    pub so_epoch_iters: usize,
    pub mo_epoch_iters: usize,
    pub hvp_eps: f64,
    /// Extra inner steps run after the outer loop finishes; 0 disables.
    pub post_polish_iters: usize,
    /// Spot-check both gradients against finite differences at iteration 0.
    pub audit: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            unroll_t: 3,
            neumann_k: 5,
            cg_k: 5,
            lr_inner: 0.1,
            lr_outer: 0.1,
            lr_fd: 0.1,
            step_rule: StepRule::adam(),
            max_outer_iters: 200,
            convergence_rel_tol: 1e-4,
            convergence_window: 5,
            so_epoch_iters: 10,
            mo_epoch_iters: 10,
            hvp_eps: crate::grad::DEFAULT_HVP_EPS,
            post_polish_iters: 0,
            audit: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SmoError::Config(m.to_string()));
        if self.unroll_t < 1 {
            return bad("unroll_t must be at least 1");
        }
        for (name, v) in [
            ("lr_inner", self.lr_inner),
            ("lr_outer", self.lr_outer),
            ("lr_fd", self.lr_fd),
            ("hvp_eps", self.hvp_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_outer_iters < 1 {
            return bad("max_outer_iters must be at least 1");
        }
        if self.convergence_window < 1 {
            return bad("convergence_window must be at least 1");
        }
        if !(self.convergence_rel_tol >= 0.0) {
            return bad("convergence_rel_tol must be non-negative");
        }
        if self.so_epoch_iters < 1 || self.mo_epoch_iters < 1 {
            return bad("phase lengths must be at least 1");
        }
        if let StepRule::Adam { beta1, beta2, eps } = self.step_rule {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return bad("Adam needs 0 <= beta < 1 and eps > 0");
            }
        }
        Ok(())
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = format!(
            "unroll_t = {}\nneumann_k = {}\ncg_k = {}\nlr_inner = {}\nlr_outer = {}\nlr_fd = {}\nstep_rule = {}\n",
            self.unroll_t, self.neumann_k, self.cg_k, self.lr_inner, self.lr_outer, self.lr_fd, self.step_rule
        );
        if let StepRule::Adam { beta1, beta2, eps } = self.step_rule {
            s += &format!("adam_beta1 = {beta1}\nadam_beta2 = {beta2}\nadam_eps = {eps}\n");
        }
        s += &format!(
            "max_outer_iters = {}\nconvergence_rel_tol = {}\nconvergence_window = {}\nso_epoch_iters = {}\nmo_epoch_iters = {}\nhvp_eps = {}\npost_polish_iters = {}\naudit = {}\n",
            self.max_outer_iters,
            self.convergence_rel_tol,
            self.convergence_window,
            self.so_epoch_iters,
            self.mo_epoch_iters,
            self.hvp_eps,
            self.post_polish_iters,
            self.audit
        );
        s
    }

    fn set_adam(&mut self, key: &str, value: &str) -> Result<()> {
        let StepRule::Adam { beta1, beta2, eps } = &mut self.step_rule else {
            return Err(SmoError::Config(format!("{key} requires step_rule = adam")));
        };
        let v = parse_value(key, value)?;
        match key {
            "adam_beta1" => *beta1 = v,
            "adam_beta2" => *beta2 = v,
            _ => *eps = v,
        }
        Ok(())
    }
}

impl Settings for OptimizerConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "unroll_t" | "t" => self.unroll_t = parse_value(key, value)?,
            "neumann_k" => self.neumann_k = parse_value(key, value)?,
            "cg_k" => self.cg_k = parse_value(key, value)?,
            "k" => {
                self.neumann_k = parse_value(key, value)?;
                self.cg_k = self.neumann_k;
            }
            "lr_inner" => self.lr_inner = parse_value(key, value)?,
            "lr_outer" => self.lr_outer = parse_value(key, value)?,
            "lr_fd" => self.lr_fd = parse_value(key, value)?,
            "lr" => {
                let v = parse_value(key, value)?;
                (self.lr_inner, self.lr_outer, self.lr_fd) = (v, v, v);
            }
            "step_rule" => self.step_rule = value.trim().parse()?,
            "adam_beta1" | "adam_beta2" | "adam_eps" => self.set_adam(key, value)?,
            "max_outer_iters" => self.max_outer_iters = parse_value(key, value)?,
            "convergence_rel_tol" => self.convergence_rel_tol = parse_value(key, value)?,
            "convergence_window" => self.convergence_window = parse_value(key, value)?,
            "so_epoch_iters" => self.so_epoch_iters = parse_value(key, value)?,
            "mo_epoch_iters" => self.mo_epoch_iters = parse_value(key, value)?,
            "hvp_eps" => self.hvp_eps = parse_value(key, value)?,
            "post_polish_iters" => self.post_polish_iters = parse_value(key, value)?,
            "audit" => self.audit = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
