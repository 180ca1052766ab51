//! The two scalar inequalities on running sums of non-negative numbers that
//! turn accumulated-norm step sizes into rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{LemmaReport, Rhs};
use crate::error::{Error, Result};

pub const SEQUENCE_SLACK: f64 = 1e-12;
pub const DEFAULT_SEQUENCES: usize = 1000;
pub const MAX_SEQUENCE_LEN: usize = 100;
pub const MAX_SEQUENCE_VALUE: f64 = 1e3;

fn check_non_negative(alphas: &[f64]) -> Result<()> {
    match alphas.iter().position(|a| !(*a >= 0.0) || !a.is_finite()) {
        None => Ok(()),
        Some(j) => Err(Error::invalid(
            "alphas",
            format!("entry {j} is {}, need a finite non-negative value", alphas[j]),
        )),
    }
}

/// `(√Σα, Σ_t α_t / √(Σ_{s≤t} α_s))` with `0/0 := 0`.
pub fn sqrt_lemma_sides(alphas: &[f64]) -> Result<(f64, f64)> {
    check_non_negative(alphas)?;
    let mut running = 0.0;
    let mut rhs = 0.0;
    for &a in alphas {
        running += a;
        if running > 0.0 {
            rhs += a / running.sqrt();
        }
    }
    Ok((running.sqrt(), rhs))
}

/// `(Σ_t α_t / (1 + Σ_{s≤t} α_s), ln(1 + Σα))`.
pub fn log_lemma_sides(alphas: &[f64]) -> Result<(f64, f64)> {
    check_non_negative(alphas)?;
    let mut running = 0.0;
    let mut lhs = 0.0;
    for &a in alphas {
        running += a;
        lhs += a / (1.0 + running);
    }
    Ok((lhs, running.ln_1p()))
}

pub fn check_sqrt_lemma(alphas: &[f64]) -> Result<LemmaReport> {
    check_sqrt_lemma_with(alphas, Rhs::Stated)
}

pub fn check_sqrt_lemma_with(alphas: &[f64], rhs: Rhs) -> Result<LemmaReport> {
    let (l, r) = sqrt_lemma_sides(alphas)?;
    let mut report = LemmaReport::new("sqrt");
    report.record(l, rhs.apply(r), SEQUENCE_SLACK);
    Ok(report)
}

pub fn check_log_lemma(alphas: &[f64]) -> Result<LemmaReport> {
    check_log_lemma_with(alphas, Rhs::Stated)
}

pub fn check_log_lemma_with(alphas: &[f64], rhs: Rhs) -> Result<LemmaReport> {
    let (l, r) = log_lemma_sides(alphas)?;
    let mut report = LemmaReport::new("log");
    report.record(l, rhs.apply(r), SEQUENCE_SLACK);
    Ok(report)
}

/// Random sequence of length `1..=MAX_SEQUENCE_LEN` in `[0, MAX_SEQUENCE_VALUE]`,
/// mixing exact zeros, uniform values and log-uniform values down to 1e-9
/// so both tiny and large running sums are exercised.
pub fn random_sequence<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    let len = rng.random_range(1..=MAX_SEQUENCE_LEN);
    (0..len)
        .map(|_| match rng.random_range(0..5u8) {
            0 => 0.0,
            1 | 2 => rng.random_range(0.0..=MAX_SEQUENCE_VALUE),
            _ => 10f64.powf(rng.random_range(-9.0..=MAX_SEQUENCE_VALUE.log10())),
        })
        .collect()
}

fn sweep(
    lemma: &str,
    seed: u64,
    sequences: usize,
    check: impl Fn(&[f64]) -> Result<LemmaReport>,
) -> Result<LemmaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport::new(lemma);
    for _ in 0..sequences {
        report.absorb(check(&random_sequence(&mut rng))?);
    }
    Ok(report.with_detail(format!(
        "{sequences} random sequences, length <= {MAX_SEQUENCE_LEN}, values <= {MAX_SEQUENCE_VALUE:e}, slack {SEQUENCE_SLACK:e}"
    )))
}

pub fn sqrt_lemma_sweep(seed: u64, sequences: usize, rhs: Rhs) -> Result<LemmaReport> {
    sweep("sqrt", seed, sequences, |a| check_sqrt_lemma_with(a, rhs))
}

pub fn log_lemma_sweep(seed: u64, sequences: usize, rhs: Rhs) -> Result<LemmaReport> {
    sweep("log", seed, sequences, |a| check_log_lemma_with(a, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sqrt_four_ones() {
        let (l, r) = sqrt_lemma_sides(&[1.0; 4]).unwrap();
        assert_eq!(l, 2.0);
        let expected = 1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5;
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 2.7845).abs() < 1e-4);
        assert!(check_sqrt_lemma(&[1.0; 4]).unwrap().pass);
    }

    #[test]
    fn sqrt_single_term_is_tight() {
        for c in [1e-9, 0.3, 7.0, 1e3] {
            let (l, r) = sqrt_lemma_sides(&[c]).unwrap();
            assert!((l - r).abs() <= 1e-12 * l.max(1.0));
        }
    }

    #[test]
    fn zero_prefix_contributes_nothing() {
        let (l, r) = sqrt_lemma_sides(&[0.0, 0.0, 4.0]).unwrap();
        assert_eq!((l, r), (2.0, 2.0));
        assert_eq!(sqrt_lemma_sides(&[0.0; 3]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn log_examples() {
        let (l, r) = log_lemma_sides(&[1.0]).unwrap();
        assert_eq!(l, 0.5);
        assert!((r - 2f64.ln()).abs() < 1e-16);
        assert_eq!(log_lemma_sides(&[0.0; 5]).unwrap(), (0.0, 0.0));
        assert!(check_log_lemma(&[0.0; 5]).unwrap().pass);
    }

    #[test]
    fn negative_input_rejected() {
        assert!(check_sqrt_lemma(&[1.0, -0.5]).is_err());
        assert!(check_log_lemma(&[f64::NAN]).is_err());
    }

    #[test]
    fn sweeps_pass() {
        assert!(sqrt_lemma_sweep(7, DEFAULT_SEQUENCES, Rhs::Stated).unwrap().pass);
        assert!(log_lemma_sweep(7, DEFAULT_SEQUENCES, Rhs::Stated).unwrap().pass);
    }

    #[test]
    fn sweeps_catch_mutation() {
        let r = sqrt_lemma_sweep(7, 50, Rhs::Negated).unwrap();
        assert!(!r.pass);
        assert!(r.first_violation.is_some());
        assert!(!log_lemma_sweep(7, 50, Rhs::Negated).unwrap().pass);
    }

    proptest! {
        #[test]
        fn both_lemmas_hold(alphas in prop::collection::vec(0.0f64..1e3, 1..100)) {
            let (l, r) = sqrt_lemma_sides(&alphas).unwrap();
            prop_assert!(l <= r + SEQUENCE_SLACK);
            let (l, r) = log_lemma_sides(&alphas).unwrap();
            prop_assert!(l <= r + SEQUENCE_SLACK);
        }
    }
}
