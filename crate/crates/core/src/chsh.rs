//! The four CHSH expressions for two-setting behaviours and the closed-form
//! local/free fraction derived from the largest of them.
//!
//! Settings are 0-based:
//!
//! ```text
//! S1 =  ⟨ab⟩00 + ⟨ab⟩01 + ⟨ab⟩10 − ⟨ab⟩11
//! S2 =  ⟨ab⟩00 + ⟨ab⟩01 − ⟨ab⟩10 + ⟨ab⟩11
//! S3 =  ⟨ab⟩00 − ⟨ab⟩01 + ⟨ab⟩10 + ⟨ab⟩11
//! S4 = −⟨ab⟩00 + ⟨ab⟩01 + ⟨ab⟩10 + ⟨ab⟩11
//! ```

use serde::Serialize;

use crate::behaviour::{Behaviour, Tolerance};
use crate::error::{BellError, Result};

/// Local bound of every CHSH expression.
pub const LOCAL_BOUND: f64 = 2.0;
/// Algebraic maximum of `|S_i|`.
pub const ALGEBRAIC_BOUND: f64 = 4.0;

// Rounding slack admitted when an S_max computed in floating point lands
// just outside [0, 4].
const SMAX_SLACK: f64 = 1e-9;

/// Sign of `⟨ab⟩_xy` in `S_i`, indexed `[i][2x + y]`.
pub const CHSH_SIGNS: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, 1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshReport {
    pub s_values: [f64; 4],
    pub s_max: f64,
    pub measure: f64,
}

fn correlators(b: &Behaviour) -> Result<[f64; 4]> {
    b.require_settings(2)?;
    Ok([
        b.correlator(0, 0)?,
        b.correlator(0, 1)?,
        b.correlator(1, 0)?,
        b.correlator(1, 1)?,
    ])
}

/// `(S1, S2, S3, S4)`; defined for any two-setting behaviour, signalling or not.
pub fn chsh_values(b: &Behaviour) -> Result<[f64; 4]> {
    let c = correlators(b)?;
    let mut s = [0.0; 4];
    for (si, signs) in s.iter_mut().zip(CHSH_SIGNS.iter()) {
        *si = signs.iter().zip(&c).map(|(sg, v)| sg * v).sum();
    }
    Ok(s)
}

pub fn s_max(values: &[f64; 4]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Index (0-based) and value of the expression with the largest magnitude.
/// Ties go to the lowest index.
pub fn dominant(values: &[f64; 4]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..4 {
        if values[i].abs() > values[best].abs() {
            best = i;
        }
    }
    (best, values[best])
}

/// `1` when `s_max ≤ 2`, otherwise `(4 − s_max)/2`.
pub fn measure_from_smax(s_max: f64) -> Result<f64> {
    measure_with_slack(s_max, SMAX_SLACK)
}

/// As [`measure_from_smax`], but admits the drift that entries accepted at
/// tolerance `tol` can add to a CHSH value (four correlators, each off by
/// at most `4 tol`).
pub fn measure_from_smax_tol(s_max: f64, tol: Tolerance) -> Result<f64> {
    measure_with_slack(s_max, SMAX_SLACK.max(16.0 * tol.eps()))
}

fn measure_with_slack(s_max: f64, slack: f64) -> Result<f64> {
    if !s_max.is_finite() || s_max < -slack || s_max > ALGEBRAIC_BOUND + slack {
        return Err(BellError::Domain(format!(
            "S_max = {s_max} lies outside [0, 4]"
        )));
    }
    let s = s_max.clamp(0.0, ALGEBRAIC_BOUND);
    Ok(if s <= LOCAL_BOUND {
        1.0
    } else {
        (ALGEBRAIC_BOUND - s) / 2.0
    })
}

/// CHSH values together with the closed-form measure.
///
/// The measure is only meaningful for non-signalling behaviours, so this
/// entry point rejects signalling input.
pub fn chsh_report(b: &Behaviour, tol: Tolerance) -> Result<ChshReport> {
    b.require_settings(2)?;
    b.ensure_non_signalling(tol)?;
    let s_values = chsh_values(b)?;
    let s_max = s_max(&s_values);
    Ok(ChshReport {
        s_values,
        s_max,
        measure: measure_from_smax_tol(s_max, tol)?,
    })
}

/// `|S_i| + |S_j| ≤ 4 + tol` for every `i ≠ j`.
pub fn pairwise_bound_check(b: &Behaviour, tol: Tolerance) -> Result<bool> {
    let s = chsh_values(b)?;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if s[i].abs() + s[j].abs() > ALGEBRAIC_BOUND + tol.eps() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
