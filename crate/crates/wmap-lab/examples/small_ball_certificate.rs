//! Certifies a weak mode through small-ball probabilities: the ratio
//! P(|v - (u-h)| <= eps) / P(|v - u| <= eps) estimates the translation
//! density r_h(u) as eps shrinks, so ratios at or below one around a
//! candidate point back the mode property with Monte Carlo evidence that
//! never touches the density formula.
//!
//! Run with `cargo run --example small_ball_certificate`.

use wmap_lab::fomin::om_ratio_exact;
use wmap_lab::posterior::{small_ball_prob, ForwardOperator, PosteriorModel};
use wmap_lab::priors::{Dir, PriorModel};
use wmap_lab::seqspace::CoeffVec;
use wmap_lab::solvers::{solve_wmap, SolveOptions};

fn main() -> wmap_lab::Result<()> {
    // Two-dimensional Gaussian posterior: everything is exact, so the ball
    // ratios can be judged against the true translation density.
    let post = PosteriorModel::new(
        PriorModel::gaussian_diag(vec![1.0, 2.0])?,
        ForwardOperator::identity(2)?,
        vec![1.0, -0.5],
    )?;
    let batch = post.sample_is(2024, 400_000)?;
    println!(
        "posterior batch: {} draws, effective sample size {:.0}",
        batch.len(),
        batch.ess()
    );

    let map = solve_wmap(&post, &SolveOptions::default())?;
    let eps = 0.05;
    let center = small_ball_prob(&post, &map.argmin, eps, &batch)?;
    println!(
        "\nball at the weak mode (eps = {eps}): P = {:.5} +- {:.5} ({} hits)",
        center.estimate, center.stderr, center.hits
    );

    println!("\n  direction          ball ratio      r_h(u)   agree?");
    let dirs = [
        ("+0.15 e1", Dir::Coeff(CoeffVec::new(vec![0.15, 0.0])?)),
        ("-0.15 e1", Dir::Coeff(CoeffVec::new(vec![-0.15, 0.0])?)),
        ("+0.15 e2", Dir::Coeff(CoeffVec::new(vec![0.0, 0.15])?)),
        ("mixed", Dir::Coeff(CoeffVec::new(vec![0.1, -0.1])?)),
    ];
    for (label, dir) in dirs {
        let shifted = map.argmin.translate(&dir, -1.0)?;
        let ball = small_ball_prob(&post, &shifted, eps, &batch)?;
        let ratio = ball.estimate / center.estimate;
        let exact = om_ratio_exact(&post, &map.argmin, &dir)?;
        let ok = (ratio - exact).abs() <= 0.1 * exact;
        println!("  {label:<12}  {ratio:>12.4}  {exact:>10.4}   {ok}");
    }
    println!("\nexact r_h stays at or below 1: no translation improves on the mode");
    Ok(())
}
