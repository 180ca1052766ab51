use adaspider::verify::{run_suite, Rhs, Suite};

#[test]
fn every_inequality_suite_can_fail() {
    for suite in [
        Suite::Sqrt,
        Suite::Log,
        Suite::Variance,
        Suite::Trajectory,
        Suite::Cumulative,
        Suite::Weighted,
        Suite::Rate,
    ] {
        let stated = &run_suite(suite, 3, Rhs::Stated).unwrap()[0];
        assert!(stated.pass, "{}", stated.summary());
        let negated = &run_suite(suite, 3, Rhs::Negated).unwrap()[0];
        assert!(
            !negated.pass,
            "{} passed with a negated right-hand side",
            suite.as_str()
        );
        assert!(negated.first_violation.is_some());
    }
}

#[test]
fn estimator_check_is_an_equality() {
    let r = &run_suite(Suite::Estimator, 3, Rhs::Negated).unwrap()[0];
    assert!(r.pass);
}

#[test]
fn all_expands_to_every_suite() {
    let reports = run_suite(Suite::All, 1, Rhs::Stated).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.lemma.as_str()).collect();
    assert_eq!(
        names,
        [
            "sqrt",
            "log",
            "variance",
            "estimator",
            "trajectory",
            "cumulative",
            "weighted",
            "rate"
        ]
    );
    assert!(reports.iter().all(|r| r.pass));
}
