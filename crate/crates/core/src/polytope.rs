//! Extremal points of the non-signalling polytope, the PR-box decomposition
//! of two-setting behaviours, and the local-content linear program.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::Serialize;

use crate::behaviour::{Behaviour, Tolerance};
use crate::chsh::{self, measure_from_smax_tol};
use crate::error::{BellError, Result};
use crate::lp::{self, LpProblem, LpStatus, SolverError, SolverOptions};

/// Default cap on the number of deterministic vertices (4^M ≤ 4096, i.e. M ≤ 6).
pub const DEFAULT_VERTEX_CAP: usize = 4096;

/// A deterministic local strategy: each party answers with a fixed outcome per setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalDeterministicVertex {
    /// Outcome index (0 ↦ +1, 1 ↦ −1) for each of Alice's settings.
    pub alice: Vec<usize>,
    /// Outcome index for each of Bob's settings.
    pub bob: Vec<usize>,
}

impl LocalDeterministicVertex {
    pub fn behaviour(&self) -> Behaviour {
        Behaviour::from_fn(self.alice.len(), self.bob.len(), |x, y, a, b| {
            if a == self.alice[x] && b == self.bob[y] {
                1.0
            } else {
                0.0
            }
        })
        .expect("vertex shape is consistent")
    }
}

/// All `2^ma · 2^mb` deterministic vertices, ordered by Alice's strategy then Bob's.
pub fn enumerate_vertices(ma: usize, mb: usize, cap: usize) -> Result<Vec<LocalDeterministicVertex>> {
    if ma == 0 || mb == 0 {
        return Err(BellError::Domain("setting counts must be positive".to_string()));
    }
    let count = 1u128
        .checked_shl((ma + mb) as u32)
        .filter(|_| ma + mb < 127)
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(BellError::VertexCap { count, cap });
    }
    let strategy = |bits: usize, m: usize| (0..m).map(|s| (bits >> s) & 1).collect::<Vec<_>>();
    let mut out = Vec::with_capacity(count as usize);
    for fa in 0..(1usize << ma) {
        for fb in 0..(1usize << mb) {
            out.push(LocalDeterministicVertex {
                alice: strategy(fa, ma),
                bob: strategy(fb, mb),
            });
        }
    }
    Ok(out)
}

/// Deterministic vertices for `m` settings per party.
pub fn enumerate_local_vertices(m: usize, cap: usize) -> Result<Vec<LocalDeterministicVertex>> {
    enumerate_vertices(m, m, cap)
}

/// One of the eight PR-boxes of the two-setting scenario.
///
/// Box `k` has `P(a,b|x,y) = 1/2` when `a ⊕ b = (x ⊕ fx)(y ⊕ fy) ⊕ γ` (outcome
/// bits `+1 ↦ 0`), with `(fx, fy)` chosen by `(k − 1) / 2` and `γ = (k − 1) mod 2`.
/// It saturates `S_i = ±4` for `i = (k + 1) / 2`, with sign `+` for odd `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrBox {
    index: usize,
    behaviour: Behaviour,
}

impl PrBox {
    /// `index` in `1..=8`.
    pub fn new(index: usize) -> Result<Self> {
        if !(1..=8).contains(&index) {
            return Err(BellError::IndexOutOfRange(format!("PR-box index {index} not in 1..=8")));
        }
        let group = (index - 1) / 2;
        let gamma = (index - 1) % 2;
        // group 0: S1, 1: S2 (y flipped), 2: S3 (x flipped), 3: S4 (both)
        let (fx, fy) = match group {
            0 => (0, 0),
            1 => (0, 1),
            2 => (1, 0),
            _ => (1, 1),
        };
        let behaviour = Behaviour::from_fn(2, 2, |x, y, a, b| {
            if a ^ b == ((x ^ fx) & (y ^ fy)) ^ gamma {
                0.5
            } else {
                0.0
            }
        })?;
        Ok(PrBox { index, behaviour })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// 0-based index of the CHSH expression this box saturates.
    pub fn saturated_expression(&self) -> usize {
        (self.index - 1) / 2
    }

    pub fn behaviour(&self) -> &Behaviour {
        &self.behaviour
    }
}

pub fn pr_boxes() -> Vec<PrBox> {
    (1..=8).map(|k| PrBox::new(k).expect("valid index")).collect()
}

/// The 24 extremal points of the two-setting polytope: 16 local vertices then 8 PR-boxes.
pub fn nonsignalling_extremal_points() -> Vec<Behaviour> {
    let mut pts: Vec<Behaviour> = enumerate_local_vertices(2, DEFAULT_VERTEX_CAP)
        .expect("16 vertices")
        .iter()
        .map(LocalDeterministicVertex::behaviour)
        .collect();
    pts.extend(pr_boxes().into_iter().map(|b| b.behaviour));
    pts
}

/// Convex combination of the 24 extremal points with the given weights.
pub fn mix_extremal_points(weights: &[f64; 24]) -> Behaviour {
    let pts = nonsignalling_extremal_points();
    let mut probs = vec![0.0; 16];
    for (w, p) in weights.iter().zip(&pts) {
        for (acc, v) in probs.iter_mut().zip(p.as_slice()) {
            *acc += w * v;
        }
    }
    Behaviour::new(2, 2, probs).expect("2x2 table")
}

/// Random two-setting non-signalling behaviour, Dirichlet(1)-distributed over
/// the 24 extremal points. Deterministic per seed.
pub fn sample_nonsignalling(seed: u64) -> Behaviour {
    sample_nonsignalling_with(seed, 1.0)
}

/// As [`sample_nonsignalling`] with a symmetric Dirichlet concentration
/// `alpha`. Small `alpha` favours sparse mixtures and hence CHSH violation.
pub fn sample_nonsignalling_with(seed: u64, alpha: f64) -> Behaviour {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirichlet = Dirichlet::<f64, 24>::new([alpha; 24]).expect("positive concentration");
    let weights = dirichlet.sample(&mut rng);
    mix_extremal_points(&weights)
}

/// Input flip used to move a violated CHSH expression to `S1 > 2`.
/// Every flip is an involution and they commute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Relabelling {
    flip_x: bool,
    flip_y: bool,
    flip_a: bool,
}

impl Relabelling {
    /// Relabelling that maps expression `index` with the given sign onto `+S1`.
    fn to_canonical(index: usize, negative: bool) -> Self {
        // x → 1−x swaps S1↔S3, y → 1−y swaps S1↔S2, both swap S1↔S4; a → −a flips sign.
        let (flip_x, flip_y) = match index {
            0 => (false, false),
            1 => (false, true),
            2 => (true, false),
            _ => (true, true),
        };
        Relabelling {
            flip_x,
            flip_y,
            flip_a: negative,
        }
    }

    fn apply(&self, b: &Behaviour) -> Behaviour {
        let fx = self.flip_x as usize;
        let fy = self.flip_y as usize;
        let fa = self.flip_a as usize;
        Behaviour::from_fn(2, 2, |x, y, a, bb| b.p(x ^ fx, y ^ fy, a ^ fa, bb)).expect("2x2")
    }

    fn pr_box_index(&self) -> usize {
        let group = match (self.flip_x, self.flip_y) {
            (false, false) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (true, true) => 3,
        };
        2 * group + self.flip_a as usize + 1
    }
}

/// `input = p·local_part + (1 − p)·pr_part`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrDecomposition {
    pub p: f64,
    pub local_part: Behaviour,
    /// Index of the PR-box in `1..=8`, absent when the input is local.
    pub pr_index: Option<usize>,
    pub pr_part: Option<Behaviour>,
}

impl PrDecomposition {
    pub fn reconstruct(&self) -> Behaviour {
        match &self.pr_part {
            Some(pr) => self.local_part.mix(pr, self.p).expect("same shape"),
            None => self.local_part.clone(),
        }
    }
}

/// Splits a two-setting non-signalling behaviour into a local behaviour and a
/// single PR-box with local weight `p = (4 − S_max)/2`.
///
/// When the input is itself a PR-box (`p ≤ tol`), `p = 0`, the PR part is the
/// input and the local part is the uniform behaviour.
pub fn split_local_pr(b: &Behaviour, tol: Tolerance) -> Result<PrDecomposition> {
    b.require_settings(2)?;
    b.ensure_non_signalling(tol)?;
    let s = chsh::chsh_values(b)?;
    let s_max = chsh::s_max(&s);
    let p = measure_from_smax_tol(s_max, tol)?;
    if p >= 1.0 {
        return Ok(PrDecomposition {
            p: 1.0,
            local_part: b.clone(),
            pr_index: None,
            pr_part: None,
        });
    }

    let (index, value) = chsh::dominant(&s);
    let relabel = Relabelling::to_canonical(index, value < 0.0);
    let pr_index = relabel.pr_box_index();

    if p <= tol.eps() {
        return Ok(PrDecomposition {
            p: 0.0,
            local_part: Behaviour::uniform(2, 2)?,
            pr_index: Some(pr_index),
            pr_part: Some(b.clone()),
        });
    }

    let canonical = relabel.apply(b);
    let pr1 = PrBox::new(1)?;
    let q = (1.0 - p) / p;
    let local_canonical = Behaviour::new(
        2,
        2,
        canonical
            .as_slice()
            .iter()
            .zip(pr1.behaviour().as_slice())
            .map(|(v, pr)| v / p - q * pr)
            .collect(),
    )?;
    Ok(PrDecomposition {
        p,
        local_part: relabel.apply(&local_canonical),
        pr_index: Some(pr_index),
        pr_part: Some(relabel.apply(pr1.behaviour())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexWeight {
    pub vertex: LocalDeterministicVertex,
    pub weight: f64,
}

/// Result of the local-content linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalContent {
    /// Maximal total weight of deterministic local strategies under the behaviour.
    pub mu: f64,
    /// Vertices with positive weight.
    pub weights: Vec<VertexWeight>,
    /// `(b − Σ w_j D_j)/(1 − μ)`, absent when `μ = 1`.
    pub remainder: Option<Behaviour>,
}

impl LocalContent {
    /// `Σ w_j D_j + (1 − μ)·remainder`.
    pub fn reconstruct(&self, ma: usize, mb: usize) -> Behaviour {
        let mut probs = vec![0.0; ma * mb * 4];
        for vw in &self.weights {
            for (acc, v) in probs.iter_mut().zip(vw.vertex.behaviour().as_slice()) {
                *acc += vw.weight * v;
            }
        }
        if let Some(r) = &self.remainder {
            for (acc, v) in probs.iter_mut().zip(r.as_slice()) {
                *acc += (1.0 - self.mu) * v;
            }
        }
        Behaviour::new(ma, mb, probs).expect("shape")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LocalContentOptions {
    pub tol: Tolerance,
    pub vertex_cap: usize,
    pub max_pivots: usize,
}

impl Default for LocalContentOptions {
    fn default() -> Self {
        LocalContentOptions {
            tol: Tolerance::default(),
            vertex_cap: DEFAULT_VERTEX_CAP,
            max_pivots: lp::DEFAULT_MAX_PIVOTS,
        }
    }
}

impl From<Tolerance> for LocalContentOptions {
    fn from(tol: Tolerance) -> Self {
        LocalContentOptions {
            tol,
            ..LocalContentOptions::default()
        }
    }
}

/// Maximizes `Σ w_j` over `w ≥ 0` with `Σ w_j D_j ≤ b` entrywise, where `D_j`
/// ranges over all deterministic vertices.
pub fn local_content_lp(b: &Behaviour, opts: impl Into<LocalContentOptions>) -> Result<LocalContent> {
    let opts = opts.into();
    let tol = opts.tol;
    b.ensure_non_signalling(tol)?;
    let (ma, mb) = (b.num_settings_a(), b.num_settings_b());
    let vertices = enumerate_vertices(ma, mb, opts.vertex_cap)?;
    let rows = ma * mb * 4;
    let n = vertices.len();

    // Column j of the constraint matrix is vertex j's probability table.
    let mut matrix = vec![0.0; rows * n];
    for (j, v) in vertices.iter().enumerate() {
        for x in 0..ma {
            for y in 0..mb {
                let r = (x * mb + y) * 4 + 2 * v.alice[x] + v.bob[y];
                matrix[r * n + j] = 1.0;
            }
        }
    }
    let bounds: Vec<f64> = b.as_slice().iter().map(|p| p.max(0.0)).collect();
    let problem = LpProblem::from_dense(vec![1.0; n], matrix, bounds)?;
    let solution = lp::solve(
        &problem,
        &SolverOptions {
            tol: tol.eps().max(1e-12),
            max_pivots: opts.max_pivots,
        },
    )?;
    if solution.status != LpStatus::Optimal {
        return Err(BellError::Solver(SolverError::Numerical(format!(
            "local-content LP reported {:?}",
            solution.status
        ))));
    }

    let mut mu = solution.value.clamp(0.0, 1.0);
    if 1.0 - mu <= tol.eps() {
        mu = 1.0;
    }
    let weights: Vec<VertexWeight> = vertices
        .into_iter()
        .zip(&solution.primal)
        .filter(|(_, &w)| w > 0.0)
        .map(|(vertex, &weight)| VertexWeight { vertex, weight })
        .collect();

    let remainder = if mu < 1.0 {
        let mut rest = b.as_slice().to_vec();
        for vw in &weights {
            for x in 0..ma {
                for y in 0..mb {
                    rest[(x * mb + y) * 4 + 2 * vw.vertex.alice[x] + vw.vertex.bob[y]] -= vw.weight;
                }
            }
        }
        let scale = 1.0 - mu;
        let rem = Behaviour::new(ma, mb, rest.into_iter().map(|v| v / scale).collect())?;
        let loose = Tolerance::new(tol.eps() * 10.0 / scale)?;
        if !rem.validate(loose).is_valid() || !rem.is_non_signalling(loose) {
            return Err(BellError::Solver(SolverError::Numerical(
                "remainder of the local-content decomposition is not a non-signalling behaviour"
                    .to_string(),
            )));
        }
        Some(rem)
    } else {
        None
    };

    Ok(LocalContent {
        mu,
        weights,
        remainder,
    })
}
