//! Behaviour the theory leaves open, measured rather than assumed.

use egreg_core::estimators::{fit_egreg, fit_niece, Design, MethodSpec};
use egreg_core::matrix::{center_standardize, Dataset, Scaling};
use egreg_core::risk::{reducible_risk_egreg, TruthSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn centered(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let means: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j])
}

/// The conditional risk formula assumes the scores come from an independent
/// copy of the response. Check that the Monte Carlo harness reproduces the
/// formula in that case, then report how far it drifts when the scores are
/// computed from the same response that is being fitted.
#[test]
fn risk_formula_with_scores_from_the_fitted_response() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (n, p) = (40, 8);
    let sx = {
        let a = gaussian(&mut rng, p, p);
        &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.5
    };
    let x = centered(gaussian(&mut rng, n, p) * sx.clone().cholesky().unwrap().l().transpose());
    let truth = TruthSpec::new(gaussian(&mut rng, p, 1) * 0.5, sx, DMatrix::from_element(1, 1, 1.0)).unwrap();
    let design = Design::new(x).unwrap();
    let (svd, r) = (design.svd(), design.rank());
    let draw = |rng: &mut ChaCha8Rng| centered(design.x() * &truth.beta_star + gaussian(rng, n, 1));
    let lambda = {
        let y = draw(&mut rng);
        0.3 * design.scores(&design.project(&y), r).phi.max()
    };

    let reps = 20_000;
    let (mut formula_ind, mut loss_ind, mut formula_same, mut loss_same) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..reps {
        let y0 = draw(&mut rng);
        let y = draw(&mut rng);
        let s0 = design.scores(&design.project(&y0), r);
        formula_ind += reducible_risk_egreg(svd, &s0, &truth, r, lambda).unwrap().total();
        let c = design.project(&y);
        let mut beta = DMatrix::zeros(p, 1);
        for k in 0..r {
            let w = s0.phi[k] / (s0.phi[k] + lambda) / svd.d[k];
            beta += svd.v.column(k) * (c[(k, 0)] * w);
        }
        loss_ind += truth.loss(&beta);

        let s = design.scores(&c, r);
        formula_same += reducible_risk_egreg(svd, &s, &truth, r, lambda).unwrap().total();
        let fit = design.fit(&y, &MethodSpec::EgReg { d: Some(r), lambda }).unwrap();
        loss_same += truth.loss(&fit.beta);
    }
    let gap_ind = (loss_ind - formula_ind) / formula_ind;
    let gap_same = (loss_same - formula_same) / formula_same;
    eprintln!("independent scores: {gap_ind:+.4}; same-response scores: {gap_same:+.4}");
    assert!(gap_ind.abs() < 0.02, "harness disagrees with the formula: {gap_ind}");
    assert!(gap_same.is_finite());
}

/// With more predictors than observations, NIECE keeping every component is
/// the minimum-norm least-squares fit; EgReg's small-penalty limit should
/// land on the same coefficients, including when some direction carries no
/// signal at all.
#[test]
fn niece_beyond_n_matches_the_small_penalty_egreg_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..20 {
        let (n, p) = (15 + case % 5, 40 + 3 * case);
        let x = gaussian(&mut rng, n, p);
        let mut y = gaussian(&mut rng, n, 2);
        if case % 4 == 0 {
            // make the response orthogonal to the leading sample PC
            let xc = centered(x.clone());
            let u1 = xc.svd(true, false).u.unwrap().column(0).into_owned();
            let yc = centered(y.clone());
            y = &yc - &u1 * (u1.transpose() * &yc);
        }
        let data = center_standardize(&Dataset::new(x, y).unwrap(), Scaling::Center).unwrap();
        let r = Design::new(data.x().clone()).unwrap().rank();
        let niece = fit_niece(&data, r, None).unwrap();
        let top = niece.beta.norm();
        for lambda in [1e-8, 1e-10] {
            let eg = fit_egreg(&data, None, lambda).unwrap();
            let rel = (&eg.beta - &niece.beta).norm() / top;
            assert!(rel < 1e-5, "case {case}, lambda {lambda}: {rel:e}");
        }
    }
}
