//! Bell-experiment statistics: behaviours, settings distributions and their
//! validity checks.
//!
//! A [`Behaviour`] holds `P(a,b|x,y)` for two parties with binary outcomes.
//! Outcomes are stored as indices, `0 ↦ +1` and `1 ↦ −1`; the correlator uses
//! the signed values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Environment variable that overrides [`DEFAULT_TOL`] for the CLI.
pub const TOL_ENV_VAR: &str = "BELLMETER_TOL";

/// Absolute tolerance used by every approximate comparison.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tolerance(f64);

impl Tolerance {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps >= 0.0 {
            Ok(Tolerance(eps))
        } else {
            Err(BellError::Domain(format!("tolerance must be finite and >= 0, got {eps}")))
        }
    }

    /// Reads `BELLMETER_TOL`, falling back to the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(TOL_ENV_VAR) {
            Ok(raw) => {
                let eps: f64 = raw.trim().parse().map_err(|_| {
                    BellError::Config(format!("{TOL_ENV_VAR}={raw:?} is not a number"))
                })?;
                Tolerance::new(eps)
            }
            Err(_) => Ok(Tolerance::default()),
        }
    }

    pub fn eps(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(DEFAULT_TOL)
    }
}

/// Signed value of an outcome index.
#[inline]
pub fn outcome_sign(index: usize) -> f64 {
    if index == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Outcome index of a signed value (`+1 ↦ 0`, anything else `↦ 1`).
#[inline]
pub fn outcome_index(sign: i8) -> usize {
    if sign > 0 {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("Alice"),
            Party::Bob => f.write_str("Bob"),
        }
    }
}

/// Joint outcome distributions `P(a,b|x,y)` for every setting pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Behaviour {
    num_settings_a: usize,
    num_settings_b: usize,
    // [x][y][a][b], row-major
    probs: Vec<f64>,
}

impl Behaviour {
    /// Builds a behaviour from a flat `[x][y][a][b]` table.
    ///
    /// Only the shape and finiteness are checked here; use
    /// [`Behaviour::validate`] for the probabilistic constraints.
    pub fn new(num_settings_a: usize, num_settings_b: usize, probs: Vec<f64>) -> Result<Self> {
        if num_settings_a == 0 || num_settings_b == 0 {
            return Err(BellError::Structural(
                "setting counts must be positive".to_string(),
            ));
        }
        let expected = num_settings_a * num_settings_b * 4;
        if probs.len() != expected {
            return Err(BellError::Structural(format!(
                "expected {expected} probabilities for {num_settings_a}x{num_settings_b} settings, got {}",
                probs.len()
            )));
        }
        if let Some(pos) = probs.iter().position(|p| !p.is_finite()) {
            return Err(BellError::Structural(format!("entry {pos} is not finite")));
        }
        Ok(Behaviour {
            num_settings_a,
            num_settings_b,
            probs,
        })
    }

    pub fn from_fn(
        num_settings_a: usize,
        num_settings_b: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(num_settings_a * num_settings_b * 4);
        for x in 0..num_settings_a {
            for y in 0..num_settings_b {
                for a in 0..2 {
                    for b in 0..2 {
                        probs.push(f(x, y, a, b));
                    }
                }
            }
        }
        Behaviour::new(num_settings_a, num_settings_b, probs)
    }

    /// `P(a,b|x,y) = 1/4` everywhere.
    pub fn uniform(num_settings_a: usize, num_settings_b: usize) -> Result<Self> {
        Behaviour::from_fn(num_settings_a, num_settings_b, |_, _, _, _| 0.25)
    }

    /// Product behaviour `P(a|x)·P(b|y)` from per-setting probabilities of outcome `+1`.
    pub fn product(alice_plus: &[f64], bob_plus: &[f64]) -> Result<Self> {
        let marginal = |p: f64, idx: usize| if idx == 0 { p } else { 1.0 - p };
        Behaviour::from_fn(alice_plus.len(), bob_plus.len(), |x, y, a, b| {
            marginal(alice_plus[x], a) * marginal(bob_plus[y], b)
        })
    }

    /// Like [`Behaviour::new`], but entries within `tol` outside `[0, 1]` are
    /// clamped into range with a warning. Used by the file loaders, where LP
    /// output and round-trips leave tiny negative noise.
    pub fn new_clamped(
        num_settings_a: usize,
        num_settings_b: usize,
        mut probs: Vec<f64>,
        tol: Tolerance,
    ) -> Result<Self> {
        let mut clamped = 0usize;
        for p in probs.iter_mut() {
            if *p < 0.0 && *p >= -tol.eps() {
                *p = 0.0;
                clamped += 1;
            } else if *p > 1.0 && *p <= 1.0 + tol.eps() {
                *p = 1.0;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::warn!("clamped {clamped} probability entries lying within tolerance of [0, 1]");
        }
        Behaviour::new(num_settings_a, num_settings_b, probs)
    }

    pub fn num_settings_a(&self) -> usize {
        self.num_settings_a
    }

    pub fn num_settings_b(&self) -> usize {
        self.num_settings_b
    }

    /// Common setting count when both parties have the same number of settings.
    pub fn square_settings(&self) -> Option<usize> {
        (self.num_settings_a == self.num_settings_b).then_some(self.num_settings_a)
    }

    /// Errors unless both parties have exactly `m` settings.
    pub fn require_settings(&self, m: usize) -> Result<()> {
        if self.num_settings_a == m && self.num_settings_b == m {
            Ok(())
        } else {
            Err(BellError::WrongSettingCount {
                expected: m,
                got_a: self.num_settings_a,
                got_b: self.num_settings_b,
            })
        }
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (x * self.num_settings_b + y) * 4
    }

    /// `P(a,b|x,y)`; panics on out-of-range indices.
    #[inline]
    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        debug_assert!(a < 2 && b < 2);
        self.probs[self.offset(x, y) + 2 * a + b]
    }

    /// The four entries for one setting pair, ordered `(++, +−, −+, −−)`.
    pub fn row(&self, x: usize, y: usize) -> [f64; 4] {
        let o = self.offset(x, y);
        [self.probs[o], self.probs[o + 1], self.probs[o + 2], self.probs[o + 3]]
    }

    /// Flat `[x][y][a][b]` table.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Nested `[x][y][a][b]` table, the layout of the JSON schema.
    pub fn to_nested(&self) -> Vec<Vec<[[f64; 2]; 2]>> {
        (0..self.num_settings_a)
            .map(|x| {
                (0..self.num_settings_b)
                    .map(|y| {
                        [
                            [self.p(x, y, 0, 0), self.p(x, y, 0, 1)],
                            [self.p(x, y, 1, 0), self.p(x, y, 1, 1)],
                        ]
                    })
                    .collect()
            })
            .collect()
    }

    fn check_same_shape(&self, other: &Behaviour) -> Result<()> {
        if self.num_settings_a != other.num_settings_a || self.num_settings_b != other.num_settings_b
        {
            return Err(BellError::Structural(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.num_settings_a, self.num_settings_b, other.num_settings_a, other.num_settings_b
            )));
        }
        Ok(())
    }

    /// Convex mixture `weight·self + (1 − weight)·other`.
    pub fn mix(&self, other: &Behaviour, weight: f64) -> Result<Behaviour> {
        self.check_same_shape(other)?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| weight * p + (1.0 - weight) * q)
            .collect();
        Behaviour::new(self.num_settings_a, self.num_settings_b, probs)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Behaviour) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }

    /// Lists every violated probabilistic constraint; empty means valid.
    pub fn validate(&self, tol: Tolerance) -> ValidationReport {
        let eps = tol.eps();
        let mut violations = Vec::new();
        for x in 0..self.num_settings_a {
            for y in 0..self.num_settings_b {
                let row = self.row(x, y);
                for (i, &p) in row.iter().enumerate() {
                    let (a, b) = (i / 2, i % 2);
                    if p < -eps {
                        violations.push(Violation::NegativeEntry { x, y, a, b, value: p });
                    } else if p > 1.0 + eps {
                        violations.push(Violation::ExceedsOne { x, y, a, b, value: p });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > eps {
                    violations.push(Violation::Normalization { x, y, sum });
                }
            }
        }
        ValidationReport { violations }
    }

    /// Returns `Err(InvalidBehaviour)` carrying the report when invalid.
    pub fn ensure_valid(&self, tol: Tolerance) -> Result<()> {
        let report = self.validate(tol);
        if report.is_valid() {
            Ok(())
        } else {
            Err(BellError::InvalidBehaviour(report))
        }
    }

    /// Alice's marginal `P(a|x)` computed at Bob's setting `y`.
    pub fn alice_marginal(&self, x: usize, y: usize, a: usize) -> f64 {
        self.p(x, y, a, 0) + self.p(x, y, a, 1)
    }

    /// Bob's marginal `P(b|y)` computed at Alice's setting `x`.
    pub fn bob_marginal(&self, x: usize, y: usize, b: usize) -> f64 {
        self.p(x, y, 0, b) + self.p(x, y, 1, b)
    }

    /// First marginal that depends on the other party's setting by more
    /// than `tol`, or `None` if the behaviour is non-signalling.
    pub fn signalling_witness(&self, tol: Tolerance) -> Option<SignallingWitness> {
        let eps = tol.eps();
        for x in 0..self.num_settings_a {
            for a in 0..2 {
                let reference = self.alice_marginal(x, 0, a);
                for y in 1..self.num_settings_b {
                    let d = self.alice_marginal(x, y, a) - reference;
                    if d.abs() > eps {
                        return Some(SignallingWitness {
                            party: Party::Alice,
                            outcome: a,
                            setting: x,
                            other_settings: (0, y),
                            discrepancy: d,
                        });
                    }
                }
            }
        }
        for y in 0..self.num_settings_b {
            for b in 0..2 {
                let reference = self.bob_marginal(0, y, b);
                for x in 1..self.num_settings_a {
                    let d = self.bob_marginal(x, y, b) - reference;
                    if d.abs() > eps {
                        return Some(SignallingWitness {
                            party: Party::Bob,
                            outcome: b,
                            setting: y,
                            other_settings: (0, x),
                            discrepancy: d,
                        });
                    }
                }
            }
        }
        None
    }

    pub fn is_non_signalling(&self, tol: Tolerance) -> bool {
        self.signalling_witness(tol).is_none()
    }

    /// Validity plus non-signalling, the precondition of every measure.
    pub fn ensure_non_signalling(&self, tol: Tolerance) -> Result<()> {
        self.ensure_valid(tol)?;
        match self.signalling_witness(tol) {
            None => Ok(()),
            Some(w) => Err(BellError::Signalling(w)),
        }
    }

    /// `⟨ab⟩_xy = Σ a·b·P(a,b|x,y)` with `a, b ∈ {±1}`.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        if x >= self.num_settings_a || y >= self.num_settings_b {
            return Err(BellError::IndexOutOfRange(format!(
                "setting pair ({x}, {y}) outside {}x{}",
                self.num_settings_a, self.num_settings_b
            )));
        }
        let r = self.row(x, y);
        Ok(r[0] - r[1] - r[2] + r[3])
    }
}

/// One violated constraint of a behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeEntry { x: usize, y: usize, a: usize, b: usize, value: f64 },
    ExceedsOne { x: usize, y: usize, a: usize, b: usize, value: f64 },
    Normalization { x: usize, y: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeEntry { x, y, a, b, value } => {
                write!(f, "P({a},{b}|{x},{y}) = {value} is negative")
            }
            Violation::ExceedsOne { x, y, a, b, value } => {
                write!(f, "P({a},{b}|{x},{y}) = {value} exceeds 1")
            }
            Violation::Normalization { x, y, sum } => {
                write!(f, "row ({x},{y}) sums to {sum}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A marginal of `party` for `outcome` at its own `setting` that differs by
/// `discrepancy` between the two listed settings of the other party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignallingWitness {
    pub party: Party,
    pub outcome: usize,
    pub setting: usize,
    pub other_settings: (usize, usize),
    pub discrepancy: f64,
}

impl fmt::Display for SignallingWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} marginal for outcome {} at setting {} shifts by {} between other-party settings {} and {}",
            self.party,
            self.outcome,
            self.setting,
            self.discrepancy,
            self.other_settings.0,
            self.other_settings.1
        )
    }
}

/// Distribution `P(x,y)` of setting pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingsDistribution {
    num_settings_a: usize,
    num_settings_b: usize,
    probs: Vec<f64>,
}

impl SettingsDistribution {
    pub fn new(
        num_settings_a: usize,
        num_settings_b: usize,
        probs: Vec<f64>,
        tol: Tolerance,
    ) -> Result<Self> {
        if num_settings_a == 0 || num_settings_b == 0 {
            return Err(BellError::Structural(
                "setting counts must be positive".to_string(),
            ));
        }
        if probs.len() != num_settings_a * num_settings_b {
            return Err(BellError::Structural(format!(
                "expected {} setting probabilities, got {}",
                num_settings_a * num_settings_b,
                probs.len()
            )));
        }
        let eps = tol.eps();
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < -eps || **p > 1.0 + eps)
        {
            return Err(BellError::Domain(format!(
                "setting probability {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > eps {
            return Err(BellError::Domain(format!(
                "settings distribution sums to {sum}"
            )));
        }
        let probs = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(SettingsDistribution {
            num_settings_a,
            num_settings_b,
            probs,
        })
    }

    pub fn uniform(num_settings_a: usize, num_settings_b: usize) -> Result<Self> {
        let n = num_settings_a * num_settings_b;
        SettingsDistribution::new(
            num_settings_a,
            num_settings_b,
            vec![1.0 / n as f64; n],
            Tolerance::default(),
        )
    }

    pub fn num_settings_a(&self) -> usize {
        self.num_settings_a
    }

    pub fn num_settings_b(&self) -> usize {
        self.num_settings_b
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.num_settings_b + y]
    }

    /// Flat `[x][y]` table.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.probs
            .chunks(self.num_settings_b)
            .map(|c| c.to_vec())
            .collect()
    }

    /// Every setting pair is probed with positive probability.
    pub fn is_nontrivial(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn matches_shape(&self, b: &Behaviour) -> bool {
        self.num_settings_a == b.num_settings_a() && self.num_settings_b == b.num_settings_b()
    }

    pub fn max_abs_diff(&self, other: &SettingsDistribution) -> Result<f64> {
        if self.probs.len() != other.probs.len() || self.num_settings_b != other.num_settings_b {
            return Err(BellError::Structural(
                "settings distributions have different shapes".to_string(),
            ));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn uniform_is_valid_and_uncorrelated() {
        let b = Behaviour::uniform(2, 2).unwrap();
        assert!(b.validate(tol()).is_valid());
        assert!(b.is_non_signalling(tol()));
        assert_eq!(b.correlator(1, 0).unwrap(), 0.0);
    }

    #[test]
    fn short_row_reports_normalization_at_that_pair() {
        let mut probs = Behaviour::uniform(2, 2).unwrap().into_vec();
        // row (1, 0) now sums to 0.9
        probs[8] = 0.15;
        let b = Behaviour::new(2, 2, probs).unwrap();
        let report = b.validate(tol());
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::Normalization { x, y, sum } => {
                assert_eq!((*x, *y), (1, 0));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn negative_entry_is_located() {
        let b = Behaviour::from_fn(1, 1, |_, _, a, b| match (a, b) {
            (0, 0) => -0.1,
            (1, 1) => 0.6,
            _ => 0.25,
        })
        .unwrap();
        let report = b.validate(tol());
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::NegativeEntry { x: 0, y: 0, a: 0, b: 0, .. }
        )));
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let err = Behaviour::new(2, 2, vec![0.25; 12]).unwrap_err();
        assert!(matches!(err, BellError::Structural(_)));
        assert!(matches!(
            Behaviour::new(0, 2, vec![]).unwrap_err(),
            BellError::Structural(_)
        ));
    }

    #[test]
    fn perfectly_correlated_row_has_correlator_one() {
        let b = Behaviour::from_fn(1, 1, |_, _, a, b| if a == b { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(b.correlator(0, 0).unwrap(), 1.0);
    }

    #[test]
    fn correlator_index_out_of_range() {
        let b = Behaviour::uniform(2, 3).unwrap();
        assert!(b.correlator(1, 2).is_ok());
        assert!(matches!(
            b.correlator(2, 0).unwrap_err(),
            BellError::IndexOutOfRange(_)
        ));
    }

    #[test]
    fn product_behaviour_is_non_signalling() {
        let b = Behaviour::product(&[0.3, 0.9], &[0.5, 0.2, 0.7]).unwrap();
        assert!(b.validate(tol()).is_valid());
        assert!(b.is_non_signalling(tol()));
    }

    #[test]
    fn alice_copying_bobs_setting_signals() {
        // a = 2y − 1 in signed form: a = +1 when y = 1, a = −1 when y = 0
        let b = Behaviour::from_fn(2, 2, |_, y, a, _| {
            let a_sign = if y == 1 { 0 } else { 1 };
            if a == a_sign {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let w = b.signalling_witness(tol()).expect("signalling");
        assert_eq!(w.party, Party::Alice);
        assert!((w.discrepancy.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamping_removes_tiny_noise_only() {
        let mut probs = vec![0.25; 4];
        probs[0] = -1e-17;
        probs[1] = 0.25 + 1e-17;
        let b = Behaviour::new_clamped(1, 1, probs.clone(), tol()).unwrap();
        assert_eq!(b.p(0, 0, 0, 0), 0.0);

        probs[0] = -1e-3;
        let b = Behaviour::new_clamped(1, 1, probs, tol()).unwrap();
        assert_eq!(b.p(0, 0, 0, 0), -1e-3);
    }

    #[test]
    fn settings_distribution_checks() {
        assert!(SettingsDistribution::new(2, 2, vec![0.7, 0.1, 0.1, 0.1], tol())
            .unwrap()
            .is_nontrivial());
        assert!(!SettingsDistribution::new(2, 2, vec![1.0, 0.0, 0.0, 0.0], tol())
            .unwrap()
            .is_nontrivial());
        assert!(SettingsDistribution::new(2, 2, vec![0.5, 0.1, 0.1, 0.1], tol()).is_err());
        assert!(SettingsDistribution::new(2, 2, vec![0.5; 3], tol()).is_err());
    }

    #[test]
    fn tolerance_rejects_negative() {
        assert!(Tolerance::new(-1.0).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
        assert_eq!(Tolerance::new(0.0).unwrap().eps(), 0.0);
    }
}
