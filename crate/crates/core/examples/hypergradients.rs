//! Compare the three approximate hypergradients with the exact implicit one
//! on a quadratic bilevel problem, where everything has a closed form.
//!
//! ```text
//! cargo run --release --example hypergradients
//! ```

use litho_smo::grad::max_relative_error;
use litho_smo::optim::{hypergrad_cg, hypergrad_fd, hypergrad_neumann, BilevelProblem, QuadraticBilevel};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> litho_smo::Result<()> {
    // Inner Hessian eigenvalues in [0.5, 2]; an inner step of 0.4 keeps the
    // Neumann series contractive.
    let problem = QuadraticBilevel::random(12, 6, 0.5, 2.0, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inner = Array2::from_shape_fn(problem.inner_shape(), |_| rng.gen_range(-1.0..1.0));
    let outer = Array2::from_shape_fn(problem.outer_shape(), |_| rng.gen_range(-1.0..1.0));
    let exact = problem.ift_hypergradient(&inner, &outer);
    let lr = 0.4;
    let eps = 1e-3;

    let fd = hypergrad_fd(&problem, &inner, &outer, lr, eps)?;
    println!(
        "first-order (one unrolled step)   {:.3e}",
        max_relative_error(&fd, &exact)
    );

    println!("\n{:>4} {:>14} {:>14}", "K", "Neumann", "conjugate gr.");
    for k in [0, 1, 2, 4, 8, 16, 32] {
        let nmn = hypergrad_neumann(&problem, &inner, &outer, k, lr, eps)?;
        let cg = hypergrad_cg(&problem, &inner, &outer, k, None, eps)?;
        println!(
            "{k:>4} {:>14.3e} {:>14.3e}",
            max_relative_error(&nmn.grad, &exact),
            max_relative_error(&cg.grad, &exact)
        );
    }
    Ok(())
}
