use serde::{Deserialize, Serialize};

/// Which right-hand side a checker compares against. `Negated` deliberately
/// corrupts the inequality so tests can confirm each checker can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rhs {
    #[default]
    Stated,
    Negated,
}

impl Rhs {
    pub fn apply(self, rhs: f64) -> f64 {
        match self {
            Rhs::Stated => rhs,
            Rhs::Negated => -rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative here.
    pub margin: f64,
}

/// Outcome of checking `lhs ≤ rhs` over a number of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub trials: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` seen; `None` when no trial ran.
    pub worst_margin: Option<f64>,
    pub pass: bool,
    pub first_violation: Option<Violation>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl LemmaReport {
    pub fn new(lemma: impl Into<String>) -> Self {
        LemmaReport {
            lemma: lemma.into(),
            trials: 0,
            violations: 0,
            worst_margin: None,
            pass: true,
            first_violation: None,
            detail: String::new(),
        }
    }

    /// Records one trial of `lhs ≤ rhs + slack`.
    pub fn record(&mut self, lhs: f64, rhs: f64, slack: f64) {
        let trial = self.trials;
        self.trials += 1;
        let margin = rhs - lhs;
        self.worst_margin = Some(self.worst_margin.map_or(margin, |m| m.min(margin)));
        // written so that NaN on either side counts as a violation
        if !(lhs <= rhs + slack) {
            self.violations += 1;
            self.pass = false;
            if self.first_violation.is_none() {
                self.first_violation = Some(Violation {
                    trial,
                    lhs,
                    rhs,
                    margin,
                });
            }
        }
    }

    /// Appends the trials of `other`, renumbering them after this report's.
    pub fn absorb(&mut self, other: LemmaReport) {
        if let (None, Some(mut v)) = (&self.first_violation, other.first_violation) {
            v.trial += self.trials;
            self.first_violation = Some(v);
        }
        self.trials += other.trials;
        self.violations += other.violations;
        self.worst_margin = match (self.worst_margin, other.worst_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.pass = self.violations == 0;
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// One human-readable line; names the first failing trial.
    pub fn summary(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{status} {}: {} trials, {} violations",
            self.lemma, self.trials, self.violations
        );
        if let Some(m) = self.worst_margin {
            line.push_str(&format!(", worst margin {m:.3e}"));
        }
        if let Some(v) = &self.first_violation {
            line.push_str(&format!(
                "; first violation at trial {}: lhs {:.6e} > rhs {:.6e}",
                v.trial, v.lhs, v.rhs
            ));
        }
        line
    }
}
