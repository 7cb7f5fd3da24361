//! Draws from the three prior families and checks their closed-form moments.
//!
//! Run with `cargo run --example prior_sampling`.

use wmap_lab::priors::{fisher_information, Point, PriorModel};
use wmap_lab::seqspace::BesovWeights;

fn moment_summary(label: &str, draws: &[Point], index: usize) {
    let k = draws.len() as f64;
    let values: Vec<f64> = draws.iter().map(|d| d.flat()[index]).collect();
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    println!("{label}: mean {mean:+.4}, variance {var:.4}");
}

fn main() -> wmap_lab::Result<()> {
    let count = 50_000;
    let seed = 7;

    // Gaussian diagonal: coordinate l has variance 1/q_l.
    let gauss = PriorModel::gaussian_diag(vec![1.0, 4.0])?;
    let draws = gauss.sample(2, seed, count)?.into_draws();
    println!("gaussian-diag, q = (1, 4); expect variances 1 and 0.25");
    moment_summary("  u1", &draws, 0);
    moment_summary("  u2", &draws, 1);

    // Besov p-power prior: the standardized coordinate X has E|X|^p = 1/p.
    let p = 1.5;
    let wts = BesovWeights::new(1.2, p, 1, 4)?;
    let scales = wts.sampling_scales().to_vec();
    let besov = PriorModel::besov(wts);
    let draws = besov.sample(4, seed, count)?.into_draws();
    println!("\nbesov s=1.2 p={p}; expect E|X|^p = 1/p = {:.4}", 1.0 / p);
    for l in 0..4 {
        let k = draws.len() as f64;
        let mp = draws
            .iter()
            .map(|d| (d.flat()[l].abs() / scales[l]).powf(p))
            .sum::<f64>()
            / k;
        println!("  coordinate {}: E|X|^p = {mp:.4}", l + 1);
    }

    // Hierarchical prior: u_l = t e_l + N(0, 1/q_l), t ~ N(0, rho).
    let hier = PriorModel::hierarchical(vec![1.0, 1.0], wmap_lab::seqspace::CoeffVec::new(vec![1.0, -1.0])?, 2.0)?;
    let draws = hier.sample(2, seed, count)?.into_draws();
    println!("\nhierarchical, rho = 2, e = (1, -1)");
    let t_idx = draws[0].flat().len() - 1;
    moment_summary("  t (expect var 2)", &draws, t_idx);
    moment_summary("  u1 (expect var rho*e1^2 + 1 = 3)", &draws, 0);

    // Fisher information of the standardized Besov coordinate; equals 2 at
    // the Gaussian end p = 2.
    println!();
    for p in [1.2, 1.5, 2.0] {
        println!("fisher information at p = {p}: {:.8}", fisher_information(p)?);
    }
    Ok(())
}
