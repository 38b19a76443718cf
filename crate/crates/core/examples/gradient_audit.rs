//! Check the analytic source and mask gradients against central finite
//! differences on a small random instance.
//!
//! ```text
//! cargo run --release --example gradient_audit -- 32 3
//! ```

use litho_smo::harness::{gradcheck, GradcheckSpec};

fn main() {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer argument"));
    let spec = GradcheckSpec {
        n_mask: args.next().unwrap_or(32),
        n_source: args.next().unwrap_or(3),
        ..GradcheckSpec::default()
    };
    for seed in 0..3 {
        let report = gradcheck(&GradcheckSpec { seed, ..spec.clone() }).expect("gradient check setup");
        println!(
            "seed {seed}: mask {:.2e}  source {:.2e}  HVP symmetry {:.2e}  bilevel fixture {:.2e}  -> {}",
            report.mask_error,
            report.source_error,
            report.hvp_symmetry,
            report.fixture_error,
            if report.passed() { "ok" } else { "MISMATCH" }
        );
    }
}
