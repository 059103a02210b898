use egreg_demo::{limit_curve_rows, risk_path_rows, shrinkage_rows, Scenario};

const SCENARIO: Scenario = Scenario {
    n: 60,
    p: 40,
    u_star: 3,
    decay: 0.15,
    seed: 4,
};

#[test]
fn limit_curve_hits_closed_form_points() {
    let rows = limit_curve_rows(10.0, 10.0, 4.0, 8).unwrap();
    assert_eq!(rows.len(), 8);
    // gamma = 0.5: tr(Sigma_eps) gamma / (1 - gamma) = 10
    assert!((rows[0][0] - 0.5).abs() < 1e-15);
    assert!((rows[0][1] - 10.0).abs() < 1e-12);
    // gamma = 2: tr/(gamma - 1) + c^2 (1 - 1/gamma) = 15
    assert!((rows[3][1] - 15.0).abs() < 1e-12);
    assert!(rows[1][1].is_nan(), "gamma = 1 sits in the singular band");
    for r in rows.iter().filter(|r| r[1].is_finite()) {
        assert!(r[2] < r[1]);
        assert!((r[3] - r[0]).abs() < 1e-12, "lambda* = tr gamma / c^2 = gamma here");
    }
}

#[test]
fn limit_curve_rejects_bad_input() {
    assert!(limit_curve_rows(10.0, 10.0, 4.0, 1).is_err());
    assert!(limit_curve_rows(-1.0, 10.0, 4.0, 10).is_err());
}

#[test]
fn shrinkage_factors_are_filters() {
    let rows = shrinkage_rows(SCENARIO, 0.01).unwrap();
    assert_eq!(rows.len(), 40);
    for w in rows.windows(2) {
        assert!(w[0][0] >= w[1][0], "variance order");
        assert!(w[0][3] >= w[1][3], "ridge shrinks low-variance directions more");
    }
    for r in &rows {
        assert!((0.0..=1.0).contains(&r[2]) && (0.0..=1.0).contains(&r[3]));
        // EgReg's factor is monotone in the score, not the variance
        let expected = r[1] / (r[1] + 0.01 * rows.iter().map(|x| x[1]).fold(0.0, f64::max));
        assert!((r[2] - expected).abs() < 1e-14);
    }
    let none = shrinkage_rows(SCENARIO, 0.0).unwrap();
    assert!(none.iter().all(|r| r[3] == 1.0));
}

#[test]
fn risk_path_is_deterministic_and_has_sensible_ends() {
    let a = risk_path_rows(SCENARIO, 12).unwrap();
    let b = risk_path_rows(SCENARIO, 12).unwrap();
    assert_eq!(a.len(), 13);
    for (x, y) in a.iter().zip(&b) {
        for k in 0..3 {
            assert!(x[k].to_bits() == y[k].to_bits());
        }
    }
    // heavy penalties drive both estimators to zero: loss -> beta*' Sigma beta*
    let last = a[11];
    assert!((last[1] - last[2]).abs() / last[2] < 0.05, "{last:?}");
    assert!(a[12][0].is_nan() && a[12][1] > 0.0);
}

#[test]
fn scenario_validation() {
    let bad = Scenario { u_star: 30, ..SCENARIO };
    assert!(shrinkage_rows(bad, 0.1).is_err());
    assert!(risk_path_rows(SCENARIO, 1).is_err());
}
