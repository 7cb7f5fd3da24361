//! Translation densities `r_h(u)` two ways: quadrature of the directional
//! logarithmic derivative along the path, and exact log-density differences.
//!
//! The quadrature route only uses pointwise derivative evaluations — the
//! form that survives in infinite dimensions — while the exact route needs
//! the finite-truncation density itself. The two must agree to rounding.
//!
//! Run with `cargo run --example translation_density`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmap_lab::fomin::{om_ratio_exact, om_ratio_quadrature, PriorField};
use wmap_lab::priors::{Dir, Point, PriorModel};
use wmap_lab::seqspace::{BesovWeights, CoeffVec};

fn main() -> wmap_lab::Result<()> {
    // Closed form first: standard normal, translating from the mode.
    let gauss = PriorModel::white_noise(1)?;
    let field = PriorField(&gauss);
    let u: Point = CoeffVec::new(vec![0.0])?.into();
    let h: Dir = CoeffVec::new(vec![1.0])?.into();
    println!("standard normal at the mode: r_h(0) = phi(-1)/phi(0) = e^(-1/2)");
    println!("  quadrature (2 nodes): {:.16}", om_ratio_quadrature(&field, &u, &h, 2)?);
    println!("  exact:                {:.16}", om_ratio_exact(&field, &u, &h)?);
    println!("  e^(-1/2):             {:.16}", (-0.5f64).exp());

    // A rough Besov field (p < 2): the derivative has kinks where a
    // coordinate crosses zero along the path, and the quadrature splits the
    // integral there. Agreement still reaches 1e-10 territory at 64 nodes.
    let besov = PriorModel::besov(BesovWeights::new(1.5, 1.5, 1, 6)?);
    let field = PriorField(&besov);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("\nbesov s=1.5 p=1.5, 6 coordinates, random u and h (64 nodes):");
    let mut worst: f64 = 0.0;
    for case in 1..=8 {
        let u: Point =
            CoeffVec::new((0..6).map(|_| rng.random_range(-1.5..1.5)).collect())?.into();
        let h: Dir = CoeffVec::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect())?.into();
        let quad = om_ratio_quadrature(&field, &u, &h, 64)?;
        let exact = om_ratio_exact(&field, &u, &h)?;
        let rel = (quad - exact).abs() / exact;
        worst = worst.max(rel);
        println!("  case {case}: r = {exact:.6e}, relative error {rel:.2e}");
    }
    println!("  worst relative error: {worst:.2e}");

    // The ratios compose along a path: r_{2h}(u) = r_h(u) * r_h(u - h).
    let u: Point = CoeffVec::new(vec![0.9, -0.4, 0.2, 0.7, -1.1, 0.3])?.into();
    let h: Dir = CoeffVec::new(vec![0.3, 0.2, -0.1, 0.25, 0.4, -0.2])?.into();
    let two_h = h.scaled(2.0)?;
    let whole = om_ratio_exact(&field, &u, &two_h)?;
    let first = om_ratio_exact(&field, &u, &h)?;
    let second = om_ratio_exact(&field, &u.translate(&h, -1.0)?, &h)?;
    println!("\ncomposition along a doubled step:");
    println!("  r_2h(u)          = {whole:.10e}");
    println!("  r_h(u) r_h(u-h)  = {:.10e}", first * second);
    Ok(())
}
