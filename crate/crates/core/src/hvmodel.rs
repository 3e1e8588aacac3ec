//! Finite hidden-variable models, their locality/free-choice classification,
//! and the constructions used to build and recombine them.
//!
//! A model stores, for each hidden value `λ`: its prior `P_λ`, the
//! conditionals `P_λ|xy` and `P_xy|λ`, and the outcome table `P_ab|xyλ`.
//! Both conditionals are kept because `P_xy|λ` is not recoverable from
//! `P_λ|xy` when `P_λ = 0`; the two must agree through Bayes' rule.

use serde::Serialize;

use crate::behaviour::{Behaviour, SettingsDistribution, Tolerance};
use crate::error::{BellError, Result};
use crate::polytope::{self, LocalContentOptions, LocalDeterministicVertex};

/// Per-λ local response tables: probability of outcome `+1` for each setting.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalResponse {
    pub alice_plus: Vec<f64>,
    pub bob_plus: Vec<f64>,
}

impl LocalResponse {
    pub fn deterministic(v: &LocalDeterministicVertex) -> Self {
        let plus = |o: &usize| if *o == 0 { 1.0 } else { 0.0 };
        LocalResponse {
            alice_plus: v.alice.iter().map(plus).collect(),
            bob_plus: v.bob.iter().map(plus).collect(),
        }
    }

    pub fn table(&self) -> Result<Behaviour> {
        Behaviour::product(&self.alice_plus, &self.bob_plus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HvModel {
    num_settings_a: usize,
    num_settings_b: usize,
    p_lambda: Vec<f64>,
    // [λ][x][y]
    p_lambda_given_xy: Vec<f64>,
    // [λ][x][y]
    p_xy_given_lambda: Vec<f64>,
    outcomes: Vec<Behaviour>,
    factorized: Option<Vec<LocalResponse>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LambdaClassification {
    pub local: Vec<usize>,
    pub nonlocal: Vec<usize>,
    pub free: Vec<usize>,
    pub nonfree: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelMeasures {
    pub locality_mass: f64,
    pub freedom_mass: f64,
}

fn model_err(msg: impl Into<String>) -> BellError {
    BellError::Model(msg.into())
}

fn check_distribution(values: &[f64], what: &str, tol: Tolerance) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -tol.eps()) {
        return Err(model_err(format!("{what} has invalid entry {v}")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > tol.eps() {
        return Err(model_err(format!("{what} sums to {sum}")));
    }
    Ok(())
}

impl HvModel {
    /// Builds and validates a model.
    ///
    /// `p_lambda_given_xy` and `p_xy_given_lambda` are flat `[λ][x][y]` tables.
    pub fn new(
        num_settings_a: usize,
        num_settings_b: usize,
        p_lambda: Vec<f64>,
        p_lambda_given_xy: Vec<f64>,
        p_xy_given_lambda: Vec<f64>,
        outcomes: Vec<Behaviour>,
        factorized: Option<Vec<LocalResponse>>,
        tol: Tolerance,
    ) -> Result<Self> {
        let k = p_lambda.len();
        let cells = num_settings_a * num_settings_b;
        if k == 0 {
            return Err(BellError::Structural("model has no hidden values".to_string()));
        }
        if cells == 0 {
            return Err(BellError::Structural("setting counts must be positive".to_string()));
        }
        if p_lambda_given_xy.len() != k * cells || p_xy_given_lambda.len() != k * cells {
            return Err(BellError::Structural(format!(
                "conditional tables must have {} entries",
                k * cells
            )));
        }
        if outcomes.len() != k {
            return Err(BellError::Structural(format!(
                "expected {k} outcome tables, got {}",
                outcomes.len()
            )));
        }
        for (l, t) in outcomes.iter().enumerate() {
            if t.num_settings_a() != num_settings_a || t.num_settings_b() != num_settings_b {
                return Err(BellError::Structural(format!(
                    "outcome table {l} has the wrong setting counts"
                )));
            }
            t.ensure_valid(tol)
                .map_err(|e| model_err(format!("outcome table {l}: {e}")))?;
        }
        if let Some(f) = &factorized {
            if f.len() != k {
                return Err(BellError::Structural(format!(
                    "expected {k} factorized entries, got {}",
                    f.len()
                )));
            }
            for (l, (r, t)) in f.iter().zip(&outcomes).enumerate() {
                if r.alice_plus.len() != num_settings_a || r.bob_plus.len() != num_settings_b {
                    return Err(BellError::Structural(format!(
                        "factorized entry {l} has the wrong setting counts"
                    )));
                }
                if r.table()?.max_abs_diff(t)? > tol.eps() {
                    return Err(model_err(format!(
                        "factorized entry {l} does not reproduce its outcome table"
                    )));
                }
            }
        }

        check_distribution(&p_lambda, "P_λ", tol)?;
        for xy in 0..cells {
            let column: Vec<f64> = (0..k).map(|l| p_lambda_given_xy[l * cells + xy]).collect();
            check_distribution(&column, &format!("P_λ|xy at setting pair {xy}"), tol)?;
        }
        for l in 0..k {
            check_distribution(
                &p_xy_given_lambda[l * cells..(l + 1) * cells],
                &format!("P_xy|λ at λ = {l}"),
                tol,
            )?;
        }

        let model = HvModel {
            num_settings_a,
            num_settings_b,
            p_lambda,
            p_lambda_given_xy,
            p_xy_given_lambda,
            outcomes,
            factorized,
        };
        model.check_bayes(tol)?;
        Ok(model)
    }

    fn cells(&self) -> usize {
        self.num_settings_a * self.num_settings_b
    }

    pub fn num_settings_a(&self) -> usize {
        self.num_settings_a
    }

    pub fn num_settings_b(&self) -> usize {
        self.num_settings_b
    }

    pub fn lambda_count(&self) -> usize {
        self.p_lambda.len()
    }

    pub fn p_lambda(&self) -> &[f64] {
        &self.p_lambda
    }

    pub fn p_lambda_given_xy(&self, lambda: usize, x: usize, y: usize) -> f64 {
        self.p_lambda_given_xy[lambda * self.cells() + x * self.num_settings_b + y]
    }

    /// `P_xy|λ` as a flat `[x][y]` slice.
    pub fn p_xy_given_lambda(&self, lambda: usize) -> &[f64] {
        let c = self.cells();
        &self.p_xy_given_lambda[lambda * c..(lambda + 1) * c]
    }

    pub fn outcome_table(&self, lambda: usize) -> &Behaviour {
        &self.outcomes[lambda]
    }

    pub fn outcome_tables(&self) -> &[Behaviour] {
        &self.outcomes
    }

    pub fn factorized(&self) -> Option<&[LocalResponse]> {
        self.factorized.as_deref()
    }

    fn raw_settings(&self) -> Vec<f64> {
        let c = self.cells();
        let mut s = vec![0.0; c];
        for (l, pl) in self.p_lambda.iter().enumerate() {
            for (acc, v) in s.iter_mut().zip(self.p_xy_given_lambda(l)) {
                *acc += v * pl;
            }
        }
        s
    }

    fn check_bayes(&self, tol: Tolerance) -> Result<()> {
        let s = self.raw_settings();
        let c = self.cells();
        for l in 0..self.lambda_count() {
            for xy in 0..c {
                let lhs = self.p_lambda_given_xy[l * c + xy] * s[xy];
                let rhs = self.p_xy_given_lambda[l * c + xy] * self.p_lambda[l];
                if (lhs - rhs).abs() > tol.eps() {
                    return Err(model_err(format!(
                        "Bayes' rule fails at λ = {l}, setting pair {xy}: {lhs} vs {rhs}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `P_xy = Σ_λ P_xy|λ · P_λ`, after re-checking Bayes consistency.
    pub fn reconstruct_settings(&self, tol: Tolerance) -> Result<SettingsDistribution> {
        self.check_bayes(tol)?;
        SettingsDistribution::new(self.num_settings_a, self.num_settings_b, self.raw_settings(), tol)
    }

    /// `P_ab|xy = Σ_λ P_ab|xyλ · P_λ|xy`.
    pub fn reconstruct_behaviour(&self) -> Behaviour {
        let mb = self.num_settings_b;
        Behaviour::from_fn(self.num_settings_a, mb, |x, y, a, b| {
            self.outcomes
                .iter()
                .enumerate()
                .map(|(l, t)| t.p(x, y, a, b) * self.p_lambda_given_xy(l, x, y))
                .sum()
        })
        .expect("shape is consistent")
    }

    /// Whether `P_ab|xyλ = P_a|xλ · P_b|yλ` for every setting pair, with
    /// marginals independent of the remote setting.
    pub fn is_local(&self, lambda: usize, tol: Tolerance) -> bool {
        let t = &self.outcomes[lambda];
        if !t.is_non_signalling(tol) {
            return false;
        }
        for x in 0..self.num_settings_a {
            for y in 0..self.num_settings_b {
                for a in 0..2 {
                    for b in 0..2 {
                        let prod = t.alice_marginal(x, y, a) * t.bob_marginal(x, y, b);
                        if (t.p(x, y, a, b) - prod).abs() > tol.eps() {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Whether `λ` is independent of the settings: `P_λ|xy = P_λ` and
    /// `P_xy|λ = P_xy` for every setting pair.
    pub fn is_free(&self, lambda: usize, tol: Tolerance) -> bool {
        let s = self.raw_settings();
        let pl = self.p_lambda[lambda];
        let c = self.cells();
        (0..c).all(|xy| {
            (self.p_lambda_given_xy[lambda * c + xy] - pl).abs() <= tol.eps()
                && (self.p_xy_given_lambda[lambda * c + xy] - s[xy]).abs() <= tol.eps()
        })
    }

    pub fn classify(&self, tol: Tolerance) -> LambdaClassification {
        let mut c = LambdaClassification {
            local: Vec::new(),
            nonlocal: Vec::new(),
            free: Vec::new(),
            nonfree: Vec::new(),
        };
        for l in 0..self.lambda_count() {
            if self.is_local(l, tol) {
                c.local.push(l);
            } else {
                c.nonlocal.push(l);
            }
            if self.is_free(l, tol) {
                c.free.push(l);
            } else {
                c.nonfree.push(l);
            }
        }
        c
    }

    pub fn measures(&self, tol: Tolerance) -> ModelMeasures {
        let c = self.classify(tol);
        let mass = |set: &[usize]| set.iter().map(|&l| self.p_lambda[l]).sum::<f64>().min(1.0);
        ModelMeasures {
            locality_mass: mass(&c.local),
            freedom_mass: mass(&c.free),
        }
    }

    /// Restriction to a subset of hidden values.
    ///
    /// Returns `p_S = Σ_{λ∈S} P_λ` and the model with `P_λ/p_S`. Each column
    /// `P_λ|xy` is renormalized over `S`; for free/non-free splits of a
    /// Bayes-consistent model the normalizer is `p_S` for every setting pair.
    /// A setting pair that `S` never produces keeps the rescaled prior.
    pub fn restrict(&self, subset: &[usize], tol: Tolerance) -> Result<(f64, HvModel)> {
        if subset.is_empty() {
            return Err(model_err("cannot restrict to an empty set"));
        }
        let mut seen = vec![false; self.lambda_count()];
        for &l in subset {
            if l >= self.lambda_count() {
                return Err(BellError::IndexOutOfRange(format!(
                    "hidden value {l} not below {}",
                    self.lambda_count()
                )));
            }
            if std::mem::replace(&mut seen[l], true) {
                return Err(model_err(format!("hidden value {l} listed twice")));
            }
        }
        let p_s: f64 = subset.iter().map(|&l| self.p_lambda[l]).sum();
        if p_s <= tol.eps() {
            return Err(model_err("cannot restrict to a set of zero mass"));
        }
        let c = self.cells();
        let p_lambda: Vec<f64> = subset.iter().map(|&l| self.p_lambda[l] / p_s).collect();
        let mut given_xy = vec![0.0; subset.len() * c];
        for xy in 0..c {
            let norm: f64 = subset.iter().map(|&l| self.p_lambda_given_xy[l * c + xy]).sum();
            for (i, &l) in subset.iter().enumerate() {
                given_xy[i * c + xy] = if norm > tol.eps() {
                    self.p_lambda_given_xy[l * c + xy] / norm
                } else {
                    p_lambda[i]
                };
            }
        }
        let xy_given: Vec<f64> = subset
            .iter()
            .flat_map(|&l| self.p_xy_given_lambda(l).iter().copied())
            .collect();
        let outcomes = subset.iter().map(|&l| self.outcomes[l].clone()).collect();
        let factorized = self
            .factorized
            .as_ref()
            .map(|f| subset.iter().map(|&l| f[l].clone()).collect());
        let model = HvModel::new(
            self.num_settings_a,
            self.num_settings_b,
            p_lambda,
            given_xy,
            xy_given,
            outcomes,
            factorized,
            Tolerance::new(tol.eps() / p_s.min(1.0))?,
        )?;
        Ok((p_s, model))
    }
}

/// Weighted disjoint union of models sharing the same settings distribution.
/// Components with zero weight are dropped.
pub fn compose(parts: &[(f64, &HvModel)], tol: Tolerance) -> Result<HvModel> {
    let first = parts
        .first()
        .ok_or_else(|| model_err("nothing to compose"))?
        .1;
    let (ma, mb) = (first.num_settings_a, first.num_settings_b);
    if let Some((w, _)) = parts.iter().find(|(w, _)| !w.is_finite() || *w < 0.0) {
        return Err(model_err(format!("negative or non-finite weight {w}")));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > tol.eps() {
        return Err(model_err(format!("weights sum to {total}")));
    }
    let settings = first.reconstruct_settings(tol)?;
    for (i, (_, m)) in parts.iter().enumerate() {
        if m.num_settings_a != ma || m.num_settings_b != mb {
            return Err(model_err(format!("component {i} has different setting counts")));
        }
        let d = m.reconstruct_settings(tol)?.max_abs_diff(&settings)?;
        if d > tol.eps() {
            return Err(model_err(format!(
                "component {i} has a different settings distribution (max difference {d})"
            )));
        }
    }

    let mut p_lambda = Vec::new();
    let mut given_xy = Vec::new();
    let mut xy_given = Vec::new();
    let mut outcomes = Vec::new();
    let mut factorized = Some(Vec::new());
    for (w, m) in parts.iter().filter(|(w, _)| *w > 0.0) {
        p_lambda.extend(m.p_lambda.iter().map(|p| w * p));
        given_xy.extend(m.p_lambda_given_xy.iter().map(|p| w * p));
        xy_given.extend_from_slice(&m.p_xy_given_lambda);
        outcomes.extend(m.outcomes.iter().cloned());
        factorized = match (factorized, &m.factorized) {
            (Some(mut acc), Some(f)) => {
                acc.extend(f.iter().cloned());
                Some(acc)
            }
            _ => None,
        };
    }
    HvModel::new(ma, mb, p_lambda, given_xy, xy_given, outcomes, factorized, tol)
}

/// Index of `λ = (u, v, α, β)` in a dilation with `mb` settings for Bob.
pub fn dilation_index(mb: usize, u: usize, v: usize, alpha: usize, beta: usize) -> usize {
    ((u * mb + v) * 2 + alpha) * 2 + beta
}

/// Inverse of [`dilation_index`]: `(u, v, α, β)`.
pub fn dilation_label(mb: usize, index: usize) -> (usize, usize, usize, usize) {
    let beta = index % 2;
    let alpha = (index / 2) % 2;
    let uv = index / 4;
    (uv / mb, uv % mb, alpha, beta)
}

/// Fully local, fully non-free model reproducing `b` under settings `s`.
///
/// One hidden value per `(u, v, α, β)`: it fixes the outcomes to `(α, β)`
/// whatever the settings, and it only occurs when the settings are `(u, v)`.
pub fn dilate(b: &Behaviour, s: &SettingsDistribution, tol: Tolerance) -> Result<HvModel> {
    b.ensure_valid(tol)?;
    if !s.matches_shape(b) {
        return Err(BellError::Structural(
            "settings distribution and behaviour have different setting counts".to_string(),
        ));
    }
    let (ma, mb) = (b.num_settings_a(), b.num_settings_b());
    let c = ma * mb;
    let k = 4 * c;
    let mut p_lambda = vec![0.0; k];
    let mut given_xy = vec![0.0; k * c];
    let mut xy_given = vec![0.0; k * c];
    let mut outcomes = Vec::with_capacity(k);
    let mut factorized = Vec::with_capacity(k);
    for l in 0..k {
        let (u, v, alpha, beta) = dilation_label(mb, l);
        let uv = u * mb + v;
        let p = b.p(u, v, alpha, beta).max(0.0);
        p_lambda[l] = p * s.get(u, v);
        given_xy[l * c + uv] = p;
        xy_given[l * c + uv] = 1.0;
        let response = LocalResponse {
            alice_plus: vec![if alpha == 0 { 1.0 } else { 0.0 }; ma],
            bob_plus: vec![if beta == 0 { 1.0 } else { 0.0 }; mb],
        };
        outcomes.push(response.table()?);
        factorized.push(response);
    }
    HvModel::new(ma, mb, p_lambda, given_xy, xy_given, outcomes, Some(factorized), tol)
}

/// Single-λ model whose outcome table is `b`, under uniform settings.
pub fn trivial_fhv(b: &Behaviour, tol: Tolerance) -> Result<HvModel> {
    let s = SettingsDistribution::uniform(b.num_settings_a(), b.num_settings_b())?;
    trivial_fhv_with(b, &s, tol)
}

/// Single-λ model whose outcome table is `b`, under settings `s`.
pub fn trivial_fhv_with(b: &Behaviour, s: &SettingsDistribution, tol: Tolerance) -> Result<HvModel> {
    b.ensure_valid(tol)?;
    if !s.matches_shape(b) {
        return Err(BellError::Structural(
            "settings distribution and behaviour have different setting counts".to_string(),
        ));
    }
    let c = b.num_settings_a() * b.num_settings_b();
    HvModel::new(
        b.num_settings_a(),
        b.num_settings_b(),
        vec![1.0],
        vec![1.0; c],
        s.as_slice().to_vec(),
        vec![b.clone()],
        None,
        tol,
    )
}

/// Free local model: one hidden value per weighted deterministic strategy.
/// Weights are normalized to sum to one.
pub fn local_free_model(
    strategies: &[(f64, LocalDeterministicVertex)],
    s: &SettingsDistribution,
    tol: Tolerance,
) -> Result<HvModel> {
    let total: f64 = strategies.iter().map(|(w, _)| w).sum();
    if strategies.is_empty() || total <= 0.0 {
        return Err(model_err("no strategies with positive weight"));
    }
    let (ma, mb) = (s.num_settings_a(), s.num_settings_b());
    let mut p_lambda = Vec::new();
    let mut given_xy = Vec::new();
    let mut xy_given = Vec::new();
    let mut outcomes = Vec::new();
    let mut factorized = Vec::new();
    for (w, v) in strategies {
        if v.alice.len() != ma || v.bob.len() != mb {
            return Err(BellError::Structural(
                "strategy and settings distribution have different setting counts".to_string(),
            ));
        }
        let p = w / total;
        p_lambda.push(p);
        given_xy.extend(std::iter::repeat(p).take(ma * mb));
        xy_given.extend_from_slice(s.as_slice());
        let r = LocalResponse::deterministic(v);
        outcomes.push(r.table()?);
        factorized.push(r);
    }
    HvModel::new(ma, mb, p_lambda, given_xy, xy_given, outcomes, Some(factorized), tol)
}

/// Local model of `b` under settings `s` whose free mass equals the local
/// content `μ` found by the linear program: the local strategies form the
/// free part and the dilation of the remainder the non-free part.
pub fn max_free_local_model(
    b: &Behaviour,
    s: &SettingsDistribution,
    opts: impl Into<LocalContentOptions>,
) -> Result<HvModel> {
    let opts = opts.into();
    let tol = opts.tol;
    let lc = polytope::local_content_lp(b, opts)?;
    let strategies: Vec<(f64, LocalDeterministicVertex)> = lc
        .weights
        .iter()
        .map(|vw| (vw.weight, vw.vertex.clone()))
        .collect();
    match (&lc.remainder, lc.mu > 0.0 && !strategies.is_empty()) {
        (None, _) => local_free_model(&strategies, s, tol),
        (Some(rest), false) => dilate(rest, s, tol),
        (Some(rest), true) => {
            let free = local_free_model(&strategies, s, tol)?;
            let nonfree = dilate(rest, s, tol)?;
            compose(&[(lc.mu, &free), (1.0 - lc.mu, &nonfree)], tol)
        }
    }
}

/// Re-targets a local model to the settings distribution `s_new`, keeping
/// its behaviour and free mass.
///
/// Free hidden values simply get `P_xy|λ := s_new`; the non-free part is
/// replaced by the dilation of its own behaviour under `s_new`.
pub fn readjust_settings(m: &HvModel, s_new: &SettingsDistribution, tol: Tolerance) -> Result<HvModel> {
    if s_new.num_settings_a() != m.num_settings_a || s_new.num_settings_b() != m.num_settings_b {
        return Err(BellError::Structural(
            "settings distribution and model have different setting counts".to_string(),
        ));
    }
    if !s_new.is_nontrivial() {
        return Err(model_err("target settings distribution must give every pair positive probability"));
    }
    let class = m.classify(tol);
    if !class.nonlocal.is_empty() {
        return Err(model_err(format!(
            "model is not local: {} hidden values violate factorization",
            class.nonlocal.len()
        )));
    }

    let c = m.cells();
    let free_part = if class.free.is_empty() {
        None
    } else {
        match m.restrict(&class.free, tol) {
            Ok((p_f, f)) => {
                let given_xy = (0..f.lambda_count())
                    .flat_map(|l| std::iter::repeat(f.p_lambda[l]).take(c))
                    .collect();
                let xy_given = (0..f.lambda_count())
                    .flat_map(|_| s_new.as_slice().iter().copied())
                    .collect();
                let rebuilt = HvModel::new(
                    f.num_settings_a,
                    f.num_settings_b,
                    f.p_lambda.clone(),
                    given_xy,
                    xy_given,
                    f.outcomes.clone(),
                    f.factorized.clone(),
                    tol,
                )?;
                Some((p_f, rebuilt))
            }
            // free values of zero total mass contribute nothing
            Err(BellError::Model(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let nonfree_part = if class.nonfree.is_empty() {
        None
    } else {
        match m.restrict(&class.nonfree, tol) {
            Ok((p_nf, nf)) => Some((p_nf, dilate(&nf.reconstruct_behaviour(), s_new, tol)?)),
            Err(BellError::Model(_)) => None,
            Err(e) => return Err(e),
        }
    };
    match (free_part, nonfree_part) {
        (Some((_, f)), None) => Ok(f),
        (None, Some((_, d))) => Ok(d),
        (Some((p_f, f)), Some((_, d))) => compose(&[(p_f, &f), (1.0 - p_f, &d)], tol),
        (None, None) => Err(model_err("model has no hidden value of positive mass")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::PrBox;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn dilation_labels_round_trip() {
        for mb in 1..4 {
            for i in 0..4 * 3 * mb {
                let (u, v, a, b) = dilation_label(mb, i);
                assert_eq!(dilation_index(mb, u, v, a, b), i);
            }
        }
    }

    #[test]
    fn dilation_of_pr_box() {
        let pr = PrBox::new(1).unwrap();
        let s = SettingsDistribution::uniform(2, 2).unwrap();
        let m = dilate(pr.behaviour(), &s, tol()).unwrap();
        assert_eq!(m.lambda_count(), 16);
        assert!(m.reconstruct_behaviour().max_abs_diff(pr.behaviour()).unwrap() < 1e-12);
        assert!(m.reconstruct_settings(tol()).unwrap().max_abs_diff(&s).unwrap() < 1e-12);
        let c = m.classify(tol());
        assert_eq!(c.local.len(), 16);
        assert!(c.free.is_empty());
        let ms = m.measures(tol());
        assert_eq!(ms.freedom_mass, 0.0);
        assert!((ms.locality_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dilation_with_skewed_settings() {
        let b = polytope::sample_nonsignalling(7);
        let s = SettingsDistribution::new(2, 2, vec![0.7, 0.1, 0.1, 0.1], tol()).unwrap();
        let m = dilate(&b, &s, tol()).unwrap();
        let got = m.reconstruct_settings(tol()).unwrap();
        assert!(got.max_abs_diff(&s).unwrap() < 1e-12);
    }

    #[test]
    fn single_setting_dilation_is_response_decomposition() {
        let b = Behaviour::new(1, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m = dilate(&b, &SettingsDistribution::uniform(1, 1).unwrap(), tol()).unwrap();
        assert_eq!(m.lambda_count(), 4);
        assert_eq!(m.p_lambda(), b.as_slice());
        assert!(m.reconstruct_behaviour().max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn trivial_fhv_classification() {
        let pr = trivial_fhv(PrBox::new(1).unwrap().behaviour(), tol()).unwrap();
        let c = pr.classify(tol());
        assert_eq!(c.free, vec![0]);
        assert_eq!(c.nonlocal, vec![0]);

        let prod = trivial_fhv(&Behaviour::product(&[0.3, 0.9], &[0.5, 0.2]).unwrap(), tol()).unwrap();
        let c = prod.classify(tol());
        assert_eq!((c.free.len(), c.local.len()), (1, 1));

        let uni = trivial_fhv(&Behaviour::uniform(2, 2).unwrap(), tol()).unwrap();
        assert_eq!(
            uni.measures(tol()),
            ModelMeasures {
                locality_mass: 1.0,
                freedom_mass: 1.0
            }
        );
    }

    #[test]
    fn signalling_lambda_is_not_local() {
        // outcome of Alice copies Bob's setting: factorizes per cell but is nonlocal
        let t = Behaviour::from_fn(2, 2, |_, y, a, b| if a == y && b == 0 { 1.0 } else { 0.0 }).unwrap();
        let m = trivial_fhv(&t, tol()).unwrap();
        assert!(!m.is_local(0, tol()));
    }

    #[test]
    fn compose_and_restrict_are_inverse() {
        let b1 = PrBox::new(1).unwrap().behaviour().clone();
        let b2 = Behaviour::uniform(2, 2).unwrap();
        let m1 = trivial_fhv(&b1, tol()).unwrap();
        let m2 = trivial_fhv(&b2, tol()).unwrap();
        let m = compose(&[(0.5, &m1), (0.5, &m2)], tol()).unwrap();
        let expected = b1.mix(&b2, 0.5).unwrap();
        assert!(m.reconstruct_behaviour().max_abs_diff(&expected).unwrap() < 1e-15);
        let (w, r) = m.restrict(&[0], tol()).unwrap();
        assert_eq!(w, 0.5);
        assert_eq!(r, m1);
        let (w, r) = m.restrict(&[0, 1], tol()).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(r, m);
    }

    #[test]
    fn compose_rejects_mismatched_settings() {
        let b = Behaviour::uniform(2, 2).unwrap();
        let s = SettingsDistribution::new(2, 2, vec![0.4, 0.2, 0.2, 0.2], tol()).unwrap();
        let m1 = trivial_fhv(&b, tol()).unwrap();
        let m2 = trivial_fhv_with(&b, &s, tol()).unwrap();
        assert!(matches!(
            compose(&[(0.5, &m1), (0.5, &m2)], tol()).unwrap_err(),
            BellError::Model(_)
        ));
        assert!(compose(&[(0.6, &m1), (0.6, &m1)], tol()).is_err());
    }

    #[test]
    fn restrict_dilation_block_gives_trivial_behaviour() {
        let b = polytope::sample_nonsignalling(3);
        let s = SettingsDistribution::new(2, 2, vec![0.4, 0.3, 0.2, 0.1], tol()).unwrap();
        let m = dilate(&b, &s, tol()).unwrap();
        let (u, v) = (1, 0);
        let block: Vec<usize> = (0..4).map(|ab| dilation_index(2, u, v, ab / 2, ab % 2)).collect();
        let (w, r) = m.restrict(&block, tol()).unwrap();
        assert!((w - s.get(u, v)).abs() < 1e-15);
        let rb = r.reconstruct_behaviour();
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for bb in 0..2 {
                        assert!((rb.p(x, y, a, bb) - b.p(u, v, a, bb)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn restrict_rejects_bad_subsets() {
        let m = dilate(
            PrBox::new(1).unwrap().behaviour(),
            &SettingsDistribution::uniform(2, 2).unwrap(),
            tol(),
        )
        .unwrap();
        assert!(m.restrict(&[], tol()).is_err());
        assert!(m.restrict(&[99], tol()).is_err());
        // (u,v,α,β) = (0,0,0,1) has zero mass under the PR-box
        assert!(m.restrict(&[dilation_index(2, 0, 0, 0, 1)], tol()).is_err());
    }

    #[test]
    fn bayes_violation_detected() {
        let b = Behaviour::uniform(1, 2).unwrap();
        let err = HvModel::new(
            1,
            2,
            vec![0.5, 0.5],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![b.clone(), b],
            None,
            tol(),
        )
        .unwrap_err();
        assert!(matches!(err, BellError::Model(_)));
    }

    #[test]
    fn max_free_local_model_of_isotropic_box() {
        let iso = PrBox::new(1)
            .unwrap()
            .behaviour()
            .mix(&Behaviour::uniform(2, 2).unwrap(), 0.75)
            .unwrap();
        let s = SettingsDistribution::uniform(2, 2).unwrap();
        let m = max_free_local_model(&iso, &s, tol()).unwrap();
        assert!(m.reconstruct_behaviour().max_abs_diff(&iso).unwrap() < 1e-12);
        let ms = m.measures(tol());
        assert!((ms.freedom_mass - 0.5).abs() < 1e-9);
        assert!((ms.locality_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn readjust_moves_dilation_to_new_settings() {
        let b = polytope::sample_nonsignalling(11);
        let s = SettingsDistribution::uniform(2, 2).unwrap();
        let s2 = SettingsDistribution::new(2, 2, vec![0.1, 0.2, 0.3, 0.4], tol()).unwrap();
        let m = dilate(&b, &s, tol()).unwrap();
        let r = readjust_settings(&m, &s2, tol()).unwrap();
        assert!(r.reconstruct_behaviour().max_abs_diff(&b).unwrap() < 1e-12);
        assert!(r.reconstruct_settings(tol()).unwrap().max_abs_diff(&s2).unwrap() < 1e-12);
        assert_eq!(r.measures(tol()).freedom_mass, 0.0);
    }

    #[test]
    fn readjust_rejects_nonlocal_and_trivial() {
        let pr = trivial_fhv(PrBox::new(1).unwrap().behaviour(), tol()).unwrap();
        let s = SettingsDistribution::uniform(2, 2).unwrap();
        assert!(readjust_settings(&pr, &s, tol()).is_err());
        let uni = trivial_fhv(&Behaviour::uniform(2, 2).unwrap(), tol()).unwrap();
        let degenerate = SettingsDistribution::new(2, 2, vec![1.0, 0.0, 0.0, 0.0], tol()).unwrap();
        assert!(readjust_settings(&uni, &degenerate, tol()).is_err());
        assert!(readjust_settings(&uni, &s, tol()).is_ok());
    }
}
