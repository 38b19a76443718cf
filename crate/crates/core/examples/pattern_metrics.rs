//! Read a rectangle list, image it with the default annular source and
//! score the printed result.
//!
//! ```text
//! cargo run --release --example pattern_metrics -- my_layout.rect
//! ```
//!
//! Without an argument a small two-line layout is written to a temporary
//! file and used instead.

use std::path::PathBuf;

use litho_smo::harness::pattern::write_rects;
use litho_smo::harness::{ingest_pattern, Rect};
use litho_smo::metrics::evaluate_print;
use litho_smo::{init_mask_params, init_source_params, EpeSpec, OpticalConfig, SmoModel, SourceTemplate};

fn main() -> litho_smo::Result<()> {
    let cfg = OpticalConfig::desk();
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("litho_smo_two_lines.rect");
            write_rects(&p, &[Rect::new(96, 128, 176, 384), Rect::new(336, 128, 416, 384)])?;
            p
        }
    };
    let target = ingest_pattern(&path, &cfg)?;
    println!(
        "{}: {} pattern pixels, {} edges",
        path.display(),
        target.pixels.iter().filter(|&&v| v == 1).count(),
        target.edge_segments.len()
    );

    let model = SmoModel::new(&cfg, &target)?;
    let eval = model.evaluate(
        &init_source_params(SourceTemplate::Annular, &cfg)?,
        &init_mask_params(&target, &cfg)?,
    )?;
    let w = &eval.window;
    let m = evaluate_print(&w.nominal, &w.min, &w.max, &target, &EpeSpec::default())?;
    println!("loss             {:.4e}", eval.loss.total);
    println!("L2               {} nm^2", m.l2_nm2);
    println!("PVB              {} nm^2", m.pvb_nm2);
    println!(
        "EPE violations   {} (mean |EPE| {:.1} nm)",
        m.epe_violations, m.epe_mean_abs_nm
    );
    Ok(())
}
