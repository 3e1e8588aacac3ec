//! Independent reference computations used only by the tests.
#![allow(dead_code)]

use bellmeter::lp::LpProblem;

/// `|ψ⟩ = cos(θ/2)|00⟩ + sin(θ/2)|11⟩` as a real 4×4 density matrix.
pub fn density_matrix(theta: f64) -> [[f64; 4]; 4] {
    let psi = [(theta / 2.0).cos(), 0.0, 0.0, (theta / 2.0).sin()];
    let mut rho = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = psi[i] * psi[j];
        }
    }
    rho
}

/// Rank-one projector onto `cos φ|0⟩ + sin φ|1⟩` (outcome 0) or its complement.
pub fn projector(phi: f64, outcome: usize) -> [[f64; 2]; 2] {
    let (c, s) = (phi.cos(), phi.sin());
    if outcome == 0 {
        [[c * c, c * s], [c * s, s * s]]
    } else {
        [[s * s, -c * s], [-c * s, c * c]]
    }
}

pub fn kron(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 4]; 4] {
    let mut k = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    k[2 * i + p][2 * j + q] = a[i][j] * b[p][q];
                }
            }
        }
    }
    k
}

/// `Tr[ρ · (P_a ⊗ P_b)]`.
pub fn trace_probability(theta: f64, alpha: f64, beta: f64, a: usize, b: usize) -> f64 {
    let rho = density_matrix(theta);
    let op = kron(&projector(alpha, a), &projector(beta, b));
    let mut t = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            t += rho[i][j] * op[j][i];
        }
    }
    t
}

pub fn trace_correlator(theta: f64, alpha: f64, beta: f64) -> f64 {
    let mut c = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if a == b { 1.0 } else { -1.0 };
            c += sign * trace_probability(theta, alpha, beta, a, b);
        }
    }
    c
}

/// Maximum of `Σ α_xy a_x b_y` over all `2^(ma+mb)` sign assignments.
pub fn brute_force_local_max(coeff: &[i8], ma: usize, mb: usize) -> i64 {
    let mut best = i64::MIN;
    for bits in 0u64..(1u64 << (ma + mb)) {
        let sign = |k: usize| if bits >> k & 1 == 0 { 1i64 } else { -1 };
        let mut s = 0;
        for x in 0..ma {
            for y in 0..mb {
                s += coeff[x * mb + y] as i64 * sign(x) * sign(ma + y);
            }
        }
        best = best.max(s);
    }
    best
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Optimum of `max c·w, A w ≤ b, w ≥ 0` by enumerating every basic solution.
/// Only suitable for a handful of variables; assumes the feasible set is bounded.
pub fn vertex_enumeration_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let m = p.num_constraints();
    // rows 0..m are A w ≤ b, rows m..m+n are −w ≤ 0
    let row = |r: usize| -> (Vec<f64>, f64) {
        if r < m {
            ((0..n).map(|j| p.coefficient(r, j)).collect(), p.bounds()[r])
        } else {
            let mut v = vec![0.0; n];
            v[r - m] = -1.0;
            (v, 0.0)
        }
    };
    let total = m + n;
    let mut best: Option<f64> = None;
    let mut choose = vec![0usize; n];
    fn next(choose: &mut [usize], total: usize) -> bool {
        let k = choose.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if choose[i] < total - k + i {
                choose[i] += 1;
                for j in i + 1..k {
                    choose[j] = choose[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, c) in choose.iter_mut().enumerate() {
        *c = i;
    }
    loop {
        let (a, b): (Vec<_>, Vec<_>) = choose.iter().map(|&r| row(r)).unzip();
        if let Some(w) = solve_square(a, b) {
            let feasible = w.iter().all(|&v| v >= -1e-9) && p.max_violation(&w) <= 1e-9;
            if feasible {
                let val: f64 = w.iter().zip(p.objective()).map(|(x, c)| x * c).sum();
                best = Some(best.map_or(val, |bv: f64| bv.max(val)));
            }
        }
        if !next(&mut choose, total) {
            break;
        }
    }
    best
}
