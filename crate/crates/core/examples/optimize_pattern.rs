//! Optimize source and mask for one bundled target and write the artifacts.
//!
//! ```text
//! cargo run --release --example optimize_pattern -- l_shape CG out/l_shape
//! ```

use std::path::PathBuf;

use litho_smo::harness::{run_experiment, ExperimentSpec, PatternSource};
use litho_smo::optim::Method;

fn main() -> litho_smo::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "l_shape".into());
    let method: Method = args.next().as_deref().unwrap_or("CG").parse()?;
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("litho_smo_{name}")));

    let mut spec = ExperimentSpec::new(PatternSource::Suite(name), method, out);
    spec.apply_overrides(&["max_outer_iters=100"])?;
    let outcome = run_experiment(&spec)?;

    for p in outcome.report.trajectory().iter().step_by(10) {
        println!(
            "iter {:>4}  loss {:.5e}  ({:.1} s)",
            p.iter, p.loss.total, p.wall_clock_s
        );
    }
    let s = &outcome.summary;
    println!(
        "\n{}: L2 {} nm^2, PVB {} nm^2, {} EPE violations, artifacts in {}",
        method.label(),
        s.l2_nm2,
        s.pvb_nm2,
        s.epe_violations,
        spec.output_dir.display()
    );
    Ok(())
}
