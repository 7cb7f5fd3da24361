//! Acceptance gate: twelve end-to-end checks, each against an independent
//! oracle (closed forms, hand-rolled dense solves, central differences, or
//! Monte Carlo with explicit error bars).
//!
//! Every test prints one `criterion NN PASS/FAIL [name] ...` line with the
//! measured quantities; run with `-- --nocapture` to see the lines for
//! passing criteria too.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use wmap_lab::bregman::{bayes_cost_diff, compare_map_cm, Verdict};
use wmap_lab::cli::report::Format;
use wmap_lab::cli::runner::{self, builtin_problem, builtin_problem_with};
use wmap_lab::fomin::{
    om_ratio_exact, om_ratio_quadrature, optimality_residual, LogDensityField, PriorField,
};
use wmap_lab::posterior::{cm_estimate, small_ball_prob, ForwardOperator, PosteriorModel};
use wmap_lab::priors::{fisher_information, Dir, HierState, Point, PriorModel};
use wmap_lab::seqspace::{BesovWeights, CoeffVec};
use wmap_lab::solvers::{
    refinement_study, solve_wmap, verify_solution, RefinementNorm, SolveOptions,
};

const NODES: usize = 64;

fn report(id: usize, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {status} [{name}] {detail}");
    assert!(ok, "criterion {id:02} [{name}]: {detail}");
}

fn cv(entries: Vec<f64>) -> CoeffVec {
    CoeffVec::new(entries).unwrap()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn random_operator(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ForwardOperator {
    let scale = 1.0 / (n as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| scale * normal(rng)).collect())
        .collect();
    ForwardOperator::from_rows(&rows).unwrap()
}

fn random_gaussian(rng: &mut ChaCha8Rng, n: usize) -> PriorModel {
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
    PriorModel::gaussian_diag(q).unwrap()
}

fn random_besov(rng: &mut ChaCha8Rng, n: usize) -> PriorModel {
    let s = rng.random_range(0.6..1.8);
    let p = rng.random_range(1.1..2.0);
    PriorModel::besov(BesovWeights::new(s, p, 1, n).unwrap())
}

fn random_hier(rng: &mut ChaCha8Rng, n: usize) -> PriorModel {
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
    let e: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let rho = rng.random_range(0.3..3.0);
    PriorModel::hierarchical(q, cv(e), rho).unwrap()
}

/// Prior-scaled point with coordinates in `amp * (-1, 1)` per sampling scale.
fn random_point(model: &PriorModel, rng: &mut ChaCha8Rng, amp: f64) -> Point {
    let (scales, hyper) = model.sampling_scales();
    let coeffs: Vec<f64> = scales
        .iter()
        .map(|a| amp * a * rng.random_range(-1.0..1.0))
        .collect();
    match hyper {
        None => cv(coeffs).into(),
        Some(sd) => HierState::new(cv(coeffs), amp * sd * rng.random_range(-1.0..1.0))
            .unwrap()
            .into(),
    }
}

fn random_dir(model: &PriorModel, rng: &mut ChaCha8Rng, amp: f64) -> Dir {
    let (scales, hyper) = model.sampling_scales();
    let coeffs: Vec<f64> = scales.iter().map(|a| amp * a * normal(rng)).collect();
    match hyper {
        None => cv(coeffs).into(),
        Some(sd) => Dir::hier(cv(coeffs), amp * sd * normal(rng)).unwrap(),
    }
}

/// Dense solve by Gaussian elimination with partial pivoting; deliberately
/// not the library's factorization path.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 0.0, "singular oracle system");
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// `AᵀA + diag(q)` and `Aᵀm`, assembled by plain loops from the row view.
fn normal_equations(op: &ForwardOperator, q: &[f64], data: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = op.trunc();
    let mat = op.matrix();
    let mut gram = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for r in 0..op.m_rows() {
                acc += mat[(r, i)] * mat[(r, j)];
            }
            gram[i][j] = acc;
        }
        gram[i][i] += q[i];
        let mut acc = 0.0;
        for r in 0..op.m_rows() {
            acc += mat[(r, i)] * data[r];
        }
        rhs[i] = acc;
    }
    (gram, rhs)
}

#[test]
fn criterion_01_translation_density_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let truncs = [1usize, 4, 16];
    let mut worst = 0.0_f64;
    let mut cases = 0;
    while cases < 200 {
        let n = truncs[(cases / 6) % truncs.len()];
        let model = match cases % 3 {
            0 => random_gaussian(&mut rng, n),
            1 => random_besov(&mut rng, n),
            _ => random_hier(&mut rng, n),
        };
        let u = random_point(&model, &mut rng, 1.5);
        let h = random_dir(&model, &mut rng, 1.0);
        let rel = if (cases / 3) % 2 == 0 {
            let field = PriorField(&model);
            let exact = om_ratio_exact(&field, &u, &h).unwrap();
            (om_ratio_quadrature(&field, &u, &h, NODES).unwrap() - exact).abs() / exact
        } else {
            let m_rows = n + 2;
            let op = random_operator(&mut rng, m_rows, n);
            let data: Vec<f64> = (0..m_rows).map(|_| normal(&mut rng)).collect();
            let post = PosteriorModel::new(model, op, data).unwrap();
            let exact = om_ratio_exact(&post, &u, &h).unwrap();
            (om_ratio_quadrature(&post, &u, &h, NODES).unwrap() - exact).abs() / exact
        };
        worst = worst.max(rel);
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "om-oracle",
        worst <= 1e-6 && secs < 10.0,
        &format!("max rel err {worst:.3e} over 200 cases (tol 1e-6), {secs:.2} s"),
    );
}

#[test]
fn criterion_02_log_derivative_finite_difference() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let eps = 1e-6;
    let mut worst_err = 0.0_f64;
    let mut worst_margin = 0.0_f64;
    for family in 0..3 {
        for _ in 0..500 {
            let n = 1 + rng.random_range(0..8usize);
            let model = match family {
                0 => random_gaussian(&mut rng, n),
                1 => random_besov(&mut rng, n),
                _ => random_hier(&mut rng, n),
            };
            // Kinked families get coordinates bounded away from zero so the
            // central difference sees a locally smooth path.
            let u = if matches!(model, PriorModel::Besov(_)) {
                let (scales, _) = model.sampling_scales();
                let coeffs: Vec<f64> = scales
                    .iter()
                    .map(|a| {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        a * sign * (0.1 + normal(&mut rng).abs())
                    })
                    .collect();
                cv(coeffs).into()
            } else {
                random_point(&model, &mut rng, 1.5)
            };
            let h = random_dir(&model, &mut rng, 1.0);
            let field = PriorField(&model);
            let beta = field.log_deriv(&u, &h).unwrap();
            let plus = field.log_density(&u.translate(&h, eps).unwrap()).unwrap();
            let minus = field.log_density(&u.translate(&h, -eps).unwrap()).unwrap();
            let fd = (plus - minus) / (2.0 * eps);
            let err = (fd - beta).abs();
            let tol = 1e-6_f64.max(1e-4 * beta.abs());
            worst_err = worst_err.max(err);
            worst_margin = worst_margin.max(err / tol);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "beta-fd",
        worst_margin <= 1.0 && secs < 5.0,
        &format!(
            "max |beta - fd| {worst_err:.3e}, worst err/tol {worst_margin:.2e}, 1500 cases, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_03_gaussian_closed_form() {
    let start = Instant::now();
    let post = builtin_problem("gauss-1d", 1, 0).unwrap();
    let res = solve_wmap(&post, &SolveOptions::default()).unwrap();
    let u1 = res.argmin.coeff_part().entries()[0];
    let mut worst_coeff = (u1 - 1.0).abs();
    let mut worst_res = optimality_residual(&post, &res.argmin).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..20 {
        let n = 1 + rng.random_range(0..32usize);
        let m_rows = n + rng.random_range(0..9usize);
        let op = random_operator(&mut rng, m_rows, n);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
        let data: Vec<f64> = (0..m_rows).map(|_| 2.0 * normal(&mut rng)).collect();
        let (gram, rhs) = normal_equations(&op, &q, &data);
        let reference = solve_dense(gram, rhs);
        let post = PosteriorModel::new(PriorModel::gaussian_diag(q).unwrap(), op, data).unwrap();
        let res = solve_wmap(&post, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        for (a, b) in res.argmin.coeff_part().entries().iter().zip(&reference) {
            worst_coeff = worst_coeff.max((a - b).abs());
        }
        worst_res = worst_res.max(optimality_residual(&post, &res.argmin).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        "gaussian-oracle",
        worst_coeff <= 1e-7 && worst_res <= 1e-8 && secs < 5.0,
        &format!(
            "max coeff dev {worst_coeff:.3e} (tol 1e-7), max residual {worst_res:.3e} (tol 1e-8), 21 problems, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_04_hierarchical_closed_form() {
    let start = Instant::now();
    let post = builtin_problem("hier-1d", 1, 0).unwrap();
    let res = solve_wmap(&post, &SolveOptions::default()).unwrap();
    let (u1, t1) = match &res.argmin {
        Point::Hier(s) => (s.coeffs().entries()[0], s.hyper()),
        Point::Coeff(_) => unreachable!("hierarchical prior yields joint states"),
    };
    let builtin_dev = (u1 - 2.0).abs().max((t1 - 1.0).abs());

    let mut worst_random = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..20 {
        let n = 1 + rng.random_range(0..6usize);
        let m_rows = n + rng.random_range(0..4usize);
        let op = random_operator(&mut rng, m_rows, n);
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let rho = rng.random_range(0.3..3.0);
        let data: Vec<f64> = (0..m_rows).map(|_| 2.0 * normal(&mut rng)).collect();

        // Joint normal equations over (u, t):
        //   [AᵀA + Q   −Qe ] [u]   [Aᵀm]
        //   [−(Qe)ᵀ  eᵀQe + 1/ρ] [t] = [ 0 ]
        let (mut gram, mut rhs) = normal_equations(&op, &q, &data);
        for (row, (qi, ei)) in gram.iter_mut().zip(q.iter().zip(&e)) {
            row.push(-qi * ei);
        }
        let mut last: Vec<f64> = q.iter().zip(&e).map(|(qi, ei)| -qi * ei).collect();
        last.push(q.iter().zip(&e).map(|(qi, ei)| qi * ei * ei).sum::<f64>() + 1.0 / rho);
        gram.push(last);
        rhs.push(0.0);
        let reference = solve_dense(gram, rhs);

        let prior = PriorModel::hierarchical(q, cv(e), rho).unwrap();
        let post = PosteriorModel::new(prior, op, data).unwrap();
        let res = solve_wmap(&post, &SolveOptions::default()).unwrap();
        assert!(res.converged);
        let (coeffs, hyper) = match &res.argmin {
            Point::Hier(s) => (s.coeffs().entries(), s.hyper()),
            Point::Coeff(_) => unreachable!("hierarchical prior yields joint states"),
        };
        for (a, b) in coeffs.iter().zip(&reference[..n]) {
            worst_random = worst_random.max((a - b).abs());
        }
        worst_random = worst_random.max((hyper - reference[n]).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "hierarchical-oracle",
        builtin_dev <= 1e-10 && worst_random <= 1e-7 && secs < 5.0,
        &format!(
            "hier-1d dev {builtin_dev:.3e} from (2, 1) (tol 1e-10), max joint-solve dev {worst_random:.3e} (tol 1e-7), {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_05_wmap_first_order_condition() {
    let start = Instant::now();
    let post = builtin_problem_with("smoothing", 64, 5, Some(32), None, None).unwrap();
    let opts = SolveOptions {
        max_iter: 200_000,
        grad_tol: 1e-9,
        ..SolveOptions::default()
    };
    let res = solve_wmap(&post, &opts).unwrap();
    assert!(res.converged);
    let rep = verify_solution(&post, &res, 100, 5, 1e-8).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        "wmap-certificate",
        res.residual <= 1e-8 && rep.passed && rep.max_ratio <= 1.0 + 1e-8 && secs < 60.0,
        &format!(
            "residual {:.3e} (tol 1e-8), max ratio {:.12} over {} directions, {} iterations, {secs:.2} s",
            res.residual,
            rep.max_ratio,
            rep.scans.len(),
            res.iterations
        ),
    );
}

#[test]
fn criterion_06_small_ball_certificate() {
    let start = Instant::now();
    let prior = PriorModel::gaussian_diag(vec![1.0, 2.0]).unwrap();
    let op = ForwardOperator::from_rows(&[vec![1.0, 0.4], vec![0.0, 0.9]]).unwrap();
    let post = PosteriorModel::new(prior, op, vec![0.7, -0.3]).unwrap();
    let res = solve_wmap(&post, &SolveOptions::default()).unwrap();
    let mode = &res.argmin;

    let eps = 0.05;
    let batch = post.sample_is(606, 1_000_000).unwrap();
    let center = small_ball_prob(&post, mode, eps, &batch).unwrap();
    assert!(center.hits > 100, "vacuous center estimate");

    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let mut worst_rel = 0.0_f64;
    let mut worst_mode_margin = f64::NEG_INFINITY;
    for _ in 0..10 {
        let h = random_dir(post.prior(), &mut rng, 0.15);
        let shifted = mode.translate(&h, -1.0).unwrap();
        let ball = small_ball_prob(&post, &shifted, eps, &batch).unwrap();
        assert!(ball.hits > 100, "vacuous shifted estimate");
        let ratio = ball.estimate / center.estimate;
        let exact = om_ratio_exact(&post, mode, &h).unwrap();
        worst_rel = worst_rel.max((ratio - exact).abs() / exact);
        let se = ratio
            * ((ball.stderr / ball.estimate).powi(2) + (center.stderr / center.estimate).powi(2))
                .sqrt();
        worst_mode_margin = worst_mode_margin.max((ratio - 1.0) / se);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "small-ball",
        worst_rel <= 0.10 && worst_mode_margin <= 3.0 && secs < 120.0,
        &format!(
            "max |ratio/exact - 1| {worst_rel:.3} (tol 0.10), max (ratio-1)/se {worst_mode_margin:.2} (tol 3), K=1e6, eps={eps}, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_07_bayes_cost_constant_offset() {
    let start = Instant::now();
    let post = builtin_problem("smoothing", 16, 21).unwrap();
    let batch = post.sample_is(707, 100_000).unwrap();
    assert!(!batch.is_degenerate(), "importance batch degenerated");
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    let mut worst_margin = 0.0_f64;
    for _ in 0..20 {
        let u1 = random_point(post.prior(), &mut rng, 0.8);
        let u2 = random_point(post.prior(), &mut rng, 0.8);
        let (gdiff, se) = bayes_cost_diff(&post, &u1, &u2, &batch).unwrap();
        let fdiff = post.objective(&u1).unwrap() - post.objective(&u2).unwrap();
        worst_margin = worst_margin.max((gdiff - fdiff).abs() / se);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        "cost-offset",
        worst_margin <= 3.0 && secs < 60.0,
        &format!(
            "max |G-diff - F-diff|/se {worst_margin:.2} over 20 pairs (tol 3), ess {:.0}, {secs:.2} s",
            batch.ess()
        ),
    );
}

#[test]
fn criterion_08_map_versus_cm() {
    let start = Instant::now();
    // Sparse Besov problem: the weak mode must not lose to the posterior mean.
    let post = builtin_problem("smoothing", 16, 21).unwrap();
    let opts = SolveOptions {
        max_iter: 200_000,
        grad_tol: 1e-9,
        ..SolveOptions::default()
    };
    let map = solve_wmap(&post, &opts).unwrap();
    let batch = post.sample_is(808, 100_000).unwrap();
    let cm = cm_estimate(&batch).unwrap();
    let rep = compare_map_cm(&post, &map.argmin, &cm.mean, &batch).unwrap();

    // Gaussian problem: mode and mean coincide, so the costs must tie.
    let gprior = PriorModel::gaussian_diag(vec![1.0, 2.0]).unwrap();
    let gop = ForwardOperator::from_rows(&[vec![1.0, 0.4], vec![0.0, 0.9]]).unwrap();
    let gpost = PosteriorModel::new(gprior, gop, vec![0.7, -0.3]).unwrap();
    let gmap = solve_wmap(&gpost, &SolveOptions::default()).unwrap();
    let gbatch = gpost.sample_is(809, 100_000).unwrap();
    let gcm = cm_estimate(&gbatch).unwrap();
    let grep = compare_map_cm(&gpost, &gmap.argmin, &gcm.mean, &gbatch).unwrap();
    let tie_margin = grep.paired_diff.0.abs() / grep.paired_diff.1;

    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        "map-vs-cm",
        rep.verdict == Verdict::MapLeqCm
            && grep.verdict == Verdict::MapLeqCm
            && tie_margin <= 3.0
            && secs < 120.0,
        &format!(
            "besov verdict {}, paired diff {:+.4e} +- {:.1e}; gaussian |diff|/se {tie_margin:.2} (tol 3), {secs:.2} s",
            rep.verdict, rep.paired_diff.0, rep.paired_diff.1
        ),
    );
}

#[test]
fn criterion_09_sampler_moments() {
    let start = Instant::now();
    let mut detail = String::new();
    let mut ok = true;
    for (i, p) in [1.2, 1.5, 2.0].into_iter().enumerate() {
        let model = PriorModel::besov(BesovWeights::new(1.0, p, 1, 1).unwrap());
        let batch = model.sample(1, 900 + i as u64, 100_000).unwrap();
        let values: Vec<f64> = batch
            .draws()
            .iter()
            .map(|d| d.coeff_part().entries()[0].abs().powf(p))
            .collect();
        let (mean, se) = batch.summarize(&values).unwrap();
        let dev = (mean - 1.0 / p).abs();
        ok &= dev <= 3.0 * se;
        detail.push_str(&format!("p={p}: E|X|^p {mean:.4} vs {:.4} ({:.1} se); ", 1.0 / p, dev / se));
    }
    let fisher_dev = (fisher_information(2.0).unwrap() - 2.0).abs();
    ok &= fisher_dev <= 1e-8;
    let secs = start.elapsed().as_secs_f64();
    report(
        9,
        "sampler-moments",
        ok && secs < 10.0,
        &format!("{detail}|fisher(2) - 2| {fisher_dev:.1e} (tol 1e-8), {secs:.2} s"),
    );
}

#[test]
fn criterion_10_zero_mean_posterior_derivative() {
    let start = Instant::now();
    let mut worst_margin = 0.0_f64;
    let mut worst_problem = "";
    for name in ["gauss-1d", "hier-1d", "smoothing"] {
        let trunc = if name == "smoothing" { 16 } else { 1 };
        let post = builtin_problem(name, trunc, 21).unwrap();
        let batch = post.sample_is(1000, 100_000).unwrap();
        assert!(!batch.is_degenerate(), "importance batch degenerated on {name}");
        let mut rng = ChaCha8Rng::seed_from_u64(1001);
        for _ in 0..10 {
            let h = random_dir(post.prior(), &mut rng, 1.0);
            let values: Vec<f64> = batch
                .draws()
                .iter()
                .map(|d| post.log_deriv(d, &h).unwrap())
                .collect();
            let (mean, se) = batch.summarize(&values).unwrap();
            let margin = mean.abs() / se;
            if margin > worst_margin {
                worst_margin = margin;
                worst_problem = name;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        10,
        "zero-mean-score",
        worst_margin <= 3.0 && secs < 60.0,
        &format!(
            "max |mean beta|/se {worst_margin:.2} (tol 3, worst on {worst_problem}), 3 problems x 10 directions, K=1e5, {secs:.2} s"
        ),
    );
}

#[test]
fn criterion_11_refinement_study() {
    let start = Instant::now();
    let opts = SolveOptions {
        max_iter: 200_000,
        grad_tol: 1e-10,
        ..SolveOptions::default()
    };
    let levels = refinement_study(
        &|n| builtin_problem("smoothing", n, 21),
        &[16, 32, 64, 128],
        &opts,
        &RefinementNorm::Euclid,
    )
    .unwrap();
    let diffs: Vec<f64> = levels[1..]
        .iter()
        .map(|l| l.diff_from_prev.unwrap())
        .collect();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]) && diffs.iter().all(|d| *d > 0.0);
    let secs = start.elapsed().as_secs_f64();
    report(
        11,
        "refinement",
        decreasing && secs < 120.0,
        &format!(
            "diffs {:.3e} > {:.3e} > {:.3e} at N=32/64/128, {secs:.2} s",
            diffs[0], diffs[1], diffs[2]
        ),
    );
}

#[test]
fn criterion_12_golden_determinism() {
    let start = Instant::now();
    let base = std::env::temp_dir().join(format!("wmap-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    let formats = [Format::Csv, Format::Json];
    let configs = [
        (
            "gauss-1d",
            r#"{"problem": {"builtin": {"name": "gauss-1d"}}, "trunc": 1, "seed": 7, "task": {"solve-map": {}}}"#,
        ),
        (
            "hier-1d",
            r#"{"problem": {"builtin": {"name": "hier-1d"}}, "trunc": 1, "seed": 7, "task": {"solve-map": {}}}"#,
        ),
    ];
    let mut compared = 0usize;
    for (name, body) in configs {
        let cfg = base.join(format!("{name}.json"));
        std::fs::write(&cfg, body).unwrap();
        let out_a = base.join(format!("{name}-a"));
        let out_b = base.join(format!("{name}-b"));
        runner::run(&cfg, &out_a, &formats).unwrap();
        runner::run(&cfg, &out_b, &formats).unwrap();
        let mut csvs: Vec<String> = std::fs::read_dir(&out_a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|f| f.ends_with(".csv"))
            .collect();
        csvs.sort();
        assert!(!csvs.is_empty(), "no CSV output for {name}");
        for f in &csvs {
            let a = std::fs::read(out_a.join(f)).unwrap();
            let b = std::fs::read(out_b.join(f)).unwrap();
            assert_eq!(a, b, "{name}/{f} differs between runs");
            compared += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    let secs = start.elapsed().as_secs_f64();
    report(
        12,
        "determinism",
        compared >= 4,
        &format!("{compared} CSVs byte-identical across repeated runs (threads=1), {secs:.2} s"),
    );
}
