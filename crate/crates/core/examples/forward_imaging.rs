//! Image one bundled target with the Abbe engine and with truncated Hopkins
//! kernels, and show how the truncation error falls as kernels are added.
//!
//! ```text
//! cargo run --release --example forward_imaging -- contact_array
//! ```

use std::time::Instant;

use litho_smo::harness::suite_target;
use litho_smo::imaging::{build_pupil, build_tcc, socs_decompose, AbbeImager, HopkinsImager};
use litho_smo::{activate_mask, activate_source, init_mask_params, init_source_params, OpticalConfig, SourceTemplate};
use ndarray::Array2;

fn main() -> litho_smo::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "contact_array".into());
    let cfg = OpticalConfig::desk();
    let target = suite_target(&name, &cfg, 0)?.unwrap_or_else(|| panic!("unknown suite target {name}"));

    let source = activate_source(&init_source_params(SourceTemplate::Annular, &cfg)?, &cfg)?;
    let mask = activate_mask(&init_mask_params(&target, &cfg)?, &cfg)?;
    let pupil = build_pupil(&cfg);

    let clock = Instant::now();
    let abbe = AbbeImager::new(&cfg, &pupil)?.aerial(&source, &mask)?.intensity;
    println!("Abbe image of {name}: {:.2} ms", clock.elapsed().as_secs_f64() * 1e3);

    let clock = Instant::now();
    let tcc = build_tcc(&source, &pupil, &cfg)?;
    let kernels = socs_decompose(&tcc, tcc.dim());
    println!(
        "TCC of dimension {} decomposed in {:.1} ms, leading eigenvalue {:.4}",
        tcc.dim(),
        clock.elapsed().as_secs_f64() * 1e3,
        kernels.eigenvalues[0]
    );

    let parts = HopkinsImager::new(&kernels, 1, true).kernel_images(&mask)?;
    let norm = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reference = norm(&abbe);
    let mut partial = Array2::<f64>::zeros(abbe.dim());
    println!("{:>5} {:>14}", "Q", "rel. L2 error");
    for (q, img) in parts.iter().enumerate() {
        partial += img;
        let q = q + 1;
        if q.is_power_of_two() || q == parts.len() || q == cfg.q_kernels {
            println!("{q:>5} {:>14.3e}", norm(&(&partial - &abbe)) / reference);
        }
    }
    Ok(())
}
