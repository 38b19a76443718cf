//! Source-mask co-optimization for optical lithography.
//!
//! The crate covers partially coherent forward imaging (Abbe source-point
//! summation and Hopkins/SOCS), a sigmoid resist model with a ±dose process
//! window, analytic gradients of the combined L2 + PVB loss with respect to
//! both the source and the mask parameters, and four optimization drivers:
//! alternating minimization and three bilevel hypergradient schemes
//! (finite difference, truncated Neumann series, conjugate gradient).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod fft;
pub mod grad;
pub mod harness;
pub mod imaging;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod source;
pub mod target;

pub use config::OpticalConfig;
pub use error::{Result, SmoError};
pub use grad::{grad_smo, hvp_so_jj, jvp_so_mj, GradPair};
pub use loss::{loss_l2, loss_pvb, loss_smo, LossValue, SmoModel};
pub use metrics::{binarize, metric_epe, metric_l2, metric_pvb, BinaryImage, EpeSpec};
pub use params::{activate_mask, activate_source, init_mask_params, MaskGrid, ParamField, ParamKind, SourceGrid};
pub use source::{init_source_params, SourceTemplate};
pub use target::TargetPattern;
