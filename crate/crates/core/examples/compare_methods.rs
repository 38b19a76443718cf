//! Run every optimization method over a few bundled targets at reduced
//! resolution and print the averaged comparison table.
//!
//! ```text
//! cargo run --release --example compare_methods
//! ```

use litho_smo::harness::{benchmark, method_grid, ExperimentSpec, PatternSource};
use litho_smo::optim::Method;

fn main() -> litho_smo::Result<()> {
    let root = std::env::temp_dir().join("litho_smo_compare");
    let mut base = ExperimentSpec::new(PatternSource::Suite("l_shape".into()), Method::Mo, &root);
    base.apply_overrides(&["n_mask=64", "pixel_nm=8", "max_outer_iters=60"])?;
    let patterns: Vec<PatternSource> = ["l_shape", "t_junction", "isolated_line"]
        .iter()
        .map(|n| PatternSource::Suite(n.to_string()))
        .collect();

    let specs = method_grid(&base, &Method::ALL, &patterns, &root);
    let result = benchmark(&specs, 1)?;
    println!(
        "{:<10} {:>10} {:>10} {:>8} {:>12} {:>8}",
        "method", "L2", "PVB", "EPE", "loss", "s/iter"
    );
    for row in &result.table {
        println!(
            "{:<10} {:>10.0} {:>10.0} {:>8.1} {:>12.4e} {:>8.4}",
            row.method.label(),
            row.avg_l2_nm2,
            row.avg_pvb_nm2,
            row.avg_epe,
            row.avg_final_loss,
            row.avg_s_per_iter
        );
    }
    Ok(())
}
