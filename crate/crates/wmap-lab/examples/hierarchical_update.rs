//! Weak-mode estimation for the hierarchical prior, whose state carries a
//! mean hyperparameter alongside the coefficients.
//!
//! Run with `cargo run --example hierarchical_update`.

use wmap_lab::fomin::{om_ratio_exact, unit_directions};
use wmap_lab::posterior::{ForwardOperator, PosteriorModel};
use wmap_lab::priors::PriorModel;
use wmap_lab::seqspace::CoeffVec;
use wmap_lab::solvers::{solve_wmap, SolveOptions};

fn main() -> wmap_lab::Result<()> {
    // One coefficient with prior mean t*1 and unit precision, t ~ N(0, 1),
    // identity observation of m = 3. The joint normal equations give
    // (u, t) = (2, 1): the hyperparameter absorbs a third of the data pull.
    let post = PosteriorModel::new(
        PriorModel::hierarchical(vec![1.0], CoeffVec::new(vec![1.0])?, 1.0)?,
        ForwardOperator::from_rows(&[vec![1.0]])?,
        vec![3.0],
    )?;
    let result = solve_wmap(&post, &SolveOptions::default())?;
    let flat = result.argmin.flat();
    println!("hier-1d: m = 3, expect (u, t) = (2, 1)");
    println!("  u = {:.12}", flat[0]);
    println!("  t = {:.12}", flat[1]);
    println!("  objective {:.12}, residual {:.2e}", result.objective, result.residual);

    // The scan includes the hyperparameter direction `tau`; every ratio at
    // the mode stays at or below one.
    println!("\ntranslation-density scan at the mode:");
    for (id, dir) in unit_directions(&result.argmin) {
        let fwd = om_ratio_exact(&post, &result.argmin, &dir)?;
        let back = om_ratio_exact(&post, &result.argmin, &dir.scaled(-1.0)?)?;
        println!("  {id:>4}: r = {fwd:.6}   -{id}: r = {back:.6}");
    }

    // Away from the mode the inequality fails for the translation that
    // lands back on it.
    let e1 = unit_directions(&result.argmin)[0].1.clone();
    let off = result.argmin.translate(&e1, 0.5)?;
    println!(
        "\noff the mode (u + 0.5): r for the step back = {:.4} (> 1 flags the improvement)",
        om_ratio_exact(&post, &off, &e1.scaled(0.5)?)?
    );
    Ok(())
}
