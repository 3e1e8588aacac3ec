//! Born-rule behaviours of two-qubit pure states measured in the x–z plane,
//! Bell expressions, and the free-choice upper bound they imply.
//!
//! A basis is given by the angle `φ` of its `+1` vector
//! `|φ⟩ = cos φ|0⟩ + sin φ|1⟩`; the `−1` vector is `−sin φ|0⟩ + cos φ|1⟩`.
//! On the Bloch sphere this is a rotation by `2φ`, so for `|Φ+⟩` the
//! correlator is `cos 2(α − β)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::behaviour::{Behaviour, Tolerance};
use crate::error::{BellError, Result};

/// `cos(θ/2)|00⟩ + sin(θ/2)|11⟩`, `θ ∈ [0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPureState {
    theta: f64,
}

impl TwoQubitPureState {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI / 2.0 + 1e-12).contains(&theta) {
            return Err(BellError::Domain(format!("state angle {theta} not in [0, π/2]")));
        }
        Ok(TwoQubitPureState {
            theta: theta.min(PI / 2.0),
        })
    }

    /// The maximally entangled state `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        TwoQubitPureState { theta: PI / 2.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Amplitudes in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn amplitudes(&self) -> [Complex64; 4] {
        let h = self.theta / 2.0;
        [
            Complex64::new(h.cos(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h.sin(), 0.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementBasis {
    pub angle: f64,
}

impl MeasurementBasis {
    pub fn new(angle: f64) -> Self {
        MeasurementBasis { angle }
    }

    /// Basis vector for outcome index 0 (`+1`) or 1 (`−1`).
    pub fn vector(&self, outcome: usize) -> [Complex64; 2] {
        let (s, c) = self.angle.sin_cos();
        if outcome == 0 {
            [Complex64::new(c, 0.0), Complex64::new(s, 0.0)]
        } else {
            [Complex64::new(-s, 0.0), Complex64::new(c, 0.0)]
        }
    }
}

pub fn bases(angles: &[f64]) -> Vec<MeasurementBasis> {
    angles.iter().copied().map(MeasurementBasis::new).collect()
}

/// `P(a,b|x,y) = |⟨a_x b_y|ψ⟩|²`.
pub fn born_behaviour(
    state: &TwoQubitPureState,
    alice: &[MeasurementBasis],
    bob: &[MeasurementBasis],
) -> Result<Behaviour> {
    if alice.is_empty() || bob.is_empty() {
        return Err(BellError::Domain("measurement lists must be nonempty".to_string()));
    }
    let psi = state.amplitudes();
    let b = Behaviour::from_fn(alice.len(), bob.len(), |x, y, a, b| {
        let u = alice[x].vector(a);
        let v = bob[y].vector(b);
        let mut amp = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                amp += (u[i] * v[j]).conj() * psi[2 * i + j];
            }
        }
        amp.norm_sqr()
    })?;
    debug_assert!(b.validate(Tolerance::default()).is_valid());
    debug_assert!(b.is_non_signalling(Tolerance::default()));
    Ok(b)
}

/// Alice `{0, π/4}`, Bob `{π/8, 3π/8}`: `|Φ+⟩` reaches `S3 = 2√2`.
pub fn tsirelson_settings() -> (Vec<MeasurementBasis>, Vec<MeasurementBasis>) {
    (bases(&[0.0, PI / 4.0]), bases(&[PI / 8.0, 3.0 * PI / 8.0]))
}

/// Settings maximizing CHSH for the state with angle `θ`: Alice `{0, π/4}`,
/// Bob `{±μ/2}` with `tan μ = sin θ`, giving `S = 2√(1 + sin²θ)`.
pub fn chsh_optimal_settings(theta: f64) -> (Vec<MeasurementBasis>, Vec<MeasurementBasis>) {
    let mu = theta.sin().atan();
    (bases(&[0.0, PI / 4.0]), bases(&[mu / 2.0, -mu / 2.0]))
}

fn require_chain_length(m: usize) -> Result<()> {
    if m < 2 {
        return Err(BellError::Domain(format!("chained settings need M ≥ 2, got {m}")));
    }
    Ok(())
}

/// Angular step `π/(2M − 1)` between neighbouring chained settings.
pub fn chained_step(m: usize) -> f64 {
    PI / (2 * m - 1) as f64
}

/// Alice at `xθ`, Bob at `(y + 1/2)θ` for 0-based `x, y`, with `θ = π/(2M − 1)`.
pub fn chained_settings(m: usize) -> Result<(Vec<MeasurementBasis>, Vec<MeasurementBasis>)> {
    require_chain_length(m)?;
    let step = chained_step(m);
    let alice = (0..m).map(|x| MeasurementBasis::new(x as f64 * step)).collect();
    let bob = (0..m).map(|y| MeasurementBasis::new((y as f64 + 0.5) * step)).collect();
    Ok((alice, bob))
}

/// Chained settings applied to `|Φ+⟩`.
pub fn chained_behaviour(m: usize) -> Result<Behaviour> {
    let (a, b) = chained_settings(m)?;
    born_behaviour(&TwoQubitPureState::phi_plus(), &a, &b)
}

/// Linear combination `Σ α_xy ⟨ab⟩_xy` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BellExpression {
    num_settings_a: usize,
    num_settings_b: usize,
    // [x][y]
    coefficients: Vec<i8>,
}

impl BellExpression {
    pub fn new(num_settings_a: usize, num_settings_b: usize, coefficients: Vec<i8>) -> Result<Self> {
        if num_settings_a == 0 || num_settings_b == 0 {
            return Err(BellError::Structural("setting counts must be positive".to_string()));
        }
        if coefficients.len() != num_settings_a * num_settings_b {
            return Err(BellError::Structural(format!(
                "expected {} coefficients, got {}",
                num_settings_a * num_settings_b,
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !(-1..=1).contains(c)) {
            return Err(BellError::Domain("coefficients must lie in {-1, 0, 1}".to_string()));
        }
        Ok(BellExpression {
            num_settings_a,
            num_settings_b,
            coefficients,
        })
    }

    pub fn num_settings_a(&self) -> usize {
        self.num_settings_a
    }

    pub fn num_settings_b(&self) -> usize {
        self.num_settings_b
    }

    pub fn coefficient(&self, x: usize, y: usize) -> i8 {
        self.coefficients[x * self.num_settings_b + y]
    }

    /// Algebraic maximum `Σ |α_xy|`.
    pub fn s_sharp(&self) -> f64 {
        self.coefficients.iter().map(|c| c.unsigned_abs() as f64).sum()
    }

    /// Local maximum over deterministic `a_x, b_y = ±1`.
    ///
    /// For fixed Alice signs the best Bob sign is chosen per column, so only
    /// Alice's `2^M_A` assignments are enumerated.
    pub fn s_loc(&self) -> f64 {
        let (ma, mb) = (self.num_settings_a, self.num_settings_b);
        assert!(ma < 32, "too many settings for local enumeration");
        let mut best = i64::MIN;
        for signs in 0u64..(1u64 << ma) {
            let mut total = 0i64;
            for y in 0..mb {
                let col: i64 = (0..ma)
                    .map(|x| {
                        let a = if signs >> x & 1 == 0 { 1 } else { -1 };
                        a * self.coefficient(x, y) as i64
                    })
                    .sum();
                total += col.abs();
            }
            best = best.max(total);
        }
        best as f64
    }

    /// `Σ α_xy ⟨ab⟩_xy`.
    pub fn evaluate(&self, b: &Behaviour) -> Result<f64> {
        if b.num_settings_a() != self.num_settings_a || b.num_settings_b() != self.num_settings_b {
            return Err(BellError::WrongSettingCount {
                expected: self.num_settings_a,
                got_a: b.num_settings_a(),
                got_b: b.num_settings_b(),
            });
        }
        let mut s = 0.0;
        for x in 0..self.num_settings_a {
            for y in 0..self.num_settings_b {
                let c = self.coefficient(x, y);
                if c != 0 {
                    s += c as f64 * b.correlator(x, y)?;
                }
            }
        }
        Ok(s)
    }

    /// `(S# − S)/(S# − S_loc)` clamped to `[0, 1]`: an upper bound on the
    /// free fraction of any local model reproducing `b`.
    pub fn free_choice_upper_bound(&self, b: &Behaviour, tol: Tolerance) -> Result<f64> {
        b.ensure_valid(tol)?;
        let sharp = self.s_sharp();
        let loc = self.s_loc();
        if sharp <= loc {
            return Err(BellError::Domain(
                "expression has no gap between local and algebraic maxima".to_string(),
            ));
        }
        Ok(((sharp - self.evaluate(b)?) / (sharp - loc)).clamp(0.0, 1.0))
    }
}

/// `+1` on `(k, k)` and `(k + 1, k)`, `−1` on `(0, M − 1)` (0-based).
pub fn chained_expression(m: usize) -> Result<BellExpression> {
    require_chain_length(m)?;
    let mut c = vec![0i8; m * m];
    for k in 0..m {
        c[k * m + k] = 1;
        if k + 1 < m {
            c[(k + 1) * m + k] = 1;
        }
    }
    c[m - 1] = -1;
    BellExpression::new(m, m, c)
}

/// Closed-form `|Φ+⟩` value of the chained expression, `(2M − 1)cos(π/(2M − 1)) + 1`.
pub fn chained_quantum_value(m: usize) -> f64 {
    let n = (2 * m - 1) as f64;
    n * (PI / n).cos() + 1.0
}

/// `π²/(4(2M − 1))`, the large-`M` envelope of the chained free-choice bound.
pub fn chained_bound_envelope(m: usize) -> f64 {
    PI * PI / (4.0 * (2 * m - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainedReport {
    pub m: usize,
    pub s_sharp: f64,
    pub s_loc: f64,
    pub s_value: f64,
    pub bound_exact: f64,
    pub bound_envelope: f64,
}

/// Chained expression evaluated on the chained `|Φ+⟩` behaviour.
pub fn chained_report(m: usize, tol: Tolerance) -> Result<(Behaviour, ChainedReport)> {
    let e = chained_expression(m)?;
    let b = chained_behaviour(m)?;
    let s_value = e.evaluate(&b)?;
    let report = ChainedReport {
        m,
        s_sharp: e.s_sharp(),
        s_loc: e.s_loc(),
        s_value,
        bound_exact: e.free_choice_upper_bound(&b, tol)?,
        bound_envelope: chained_bound_envelope(m),
    };
    Ok((b, report))
}
