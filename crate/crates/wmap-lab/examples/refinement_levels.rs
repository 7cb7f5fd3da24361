//! Solves one inverse problem at increasing truncation levels and watches
//! the weak modes converge: successive differences of the zero-extended
//! solutions shrink as the discretization refines.
//!
//! Run with `cargo run --example refinement_levels`.

use wmap_lab::cli::runner::{builtin_problem, default_smoothing_prior, smoothing_problem};
use wmap_lab::solvers::{refinement_study, RefinementNorm, SolveOptions};

fn main() -> wmap_lab::Result<()> {
    let seed = 42;
    let make = |n: usize| builtin_problem("smoothing", n, seed);
    let opts = SolveOptions {
        grad_tol: 1e-10,
        max_iter: 200_000,
        ..SolveOptions::default()
    };

    println!("euclidean differences between successive weak modes:");
    println!("   N    |u_N - u_prev|   objective      residual    iters");
    let study = refinement_study(&make, &[8, 16, 32, 64, 128], &opts, &RefinementNorm::Euclid)?;
    for level in &study {
        let diff = level
            .diff_from_prev
            .map_or("        -".to_string(), |d| format!("{d:>12.3e}"));
        println!(
            "  {:>3}  {diff}   {:.8}   {:.3e}   {:>5}",
            level.trunc, level.result.objective, level.result.residual, level.result.iterations
        );
    }

    // The same study under the prior's own Besov norm, which weights tail
    // coordinates more heavily than the Euclidean one.
    let besov = RefinementNorm::Besov { s: 1.5, p: 1.5, d: 1 };
    let study = refinement_study(&make, &[8, 16, 32, 64, 128], &opts, &besov)?;
    println!("\nbesov-norm differences:");
    for level in study.iter().skip(1) {
        println!("  N = {:>3}: {:.3e}", level.trunc, level.diff_from_prev.unwrap());
    }

    // Nesting is what makes the comparison meaningful: the operator at a
    // coarse level is literally a column prefix of the fine one.
    let coarse = smoothing_problem(8, seed, 32, 1.5, default_smoothing_prior(8)?)?;
    let fine = smoothing_problem(128, seed, 32, 1.5, default_smoothing_prior(128)?)?;
    let same = (0..32).all(|k| (0..8).all(|l| coarse.op().matrix()[(k, l)] == fine.op().matrix()[(k, l)]));
    println!("\ncoarse operator is a prefix of the fine one: {same}");
    println!("data identical across levels: {}", coarse.data() == fine.data());
    Ok(())
}
