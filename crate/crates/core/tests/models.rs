use bellmeter::behaviour::{Behaviour, SettingsDistribution, Tolerance};
use bellmeter::hvmodel::{
    compose, dilate, dilation_index, local_free_model, readjust_settings, trivial_fhv, trivial_fhv_with, HvModel,
};
use bellmeter::polytope::{enumerate_local_vertices, sample_nonsignalling, PrBox, DEFAULT_VERTEX_CAP};
use bellmeter::schema::{model_from_json, model_to_json};
use bellmeter::sim::{self, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn skewed() -> SettingsDistribution {
    SettingsDistribution::new(2, 2, vec![0.7, 0.1, 0.1, 0.1], tol()).unwrap()
}

/// `P(a,b|x,y)` summed directly over hidden values, with `P_λ|xy` obtained
/// from `P_xy|λ · P_λ / P_xy`.
fn direct_sum(m: &HvModel, s: &SettingsDistribution) -> Behaviour {
    let mb = m.num_settings_b();
    Behaviour::from_fn(m.num_settings_a(), mb, |x, y, a, b| {
        (0..m.lambda_count())
            .map(|l| {
                let joint = m.p_xy_given_lambda(l)[x * mb + y] * m.p_lambda()[l];
                m.outcome_table(l).p(x, y, a, b) * joint / s.get(x, y)
            })
            .sum()
    })
    .unwrap()
}

#[test]
fn three_setting_dilation_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<[f64; 4]> = (0..9)
        .map(|_| {
            let r: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
            let t: f64 = r.iter().sum();
            r.map(|v| v / t)
        })
        .collect();
    let b = Behaviour::from_fn(3, 3, |x, y, a, bb| rows[x * 3 + y][2 * a + bb]).unwrap();
    let raw: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
    let total: f64 = raw.iter().sum();
    let s = SettingsDistribution::new(3, 3, raw.iter().map(|v| v / total).collect(), tol()).unwrap();
    let m = dilate(&b, &s, tol()).unwrap();
    assert_eq!(m.lambda_count(), 36);
    assert!(direct_sum(&m, &s).max_abs_diff(&b).unwrap() < 1e-12);
    assert!(m.reconstruct_behaviour().max_abs_diff(&b).unwrap() < 1e-12);
    let (u, v, alpha, beta) = (2, 1, 1, 0);
    let l = dilation_index(3, u, v, alpha, beta);
    assert!((m.p_lambda()[l] - b.p(u, v, alpha, beta) * s.get(u, v)).abs() < 1e-15);
}

#[test]
fn skewed_settings_survive_dilation() {
    let m = dilate(PrBox::new(1).unwrap().behaviour(), &skewed(), tol()).unwrap();
    assert!(m.reconstruct_settings(tol()).unwrap().max_abs_diff(&skewed()).unwrap() < 1e-15);
}

#[test]
fn free_models_return_their_settings() {
    let b = sample_nonsignalling(8);
    let m = trivial_fhv_with(&b, &skewed(), tol()).unwrap();
    assert_eq!(m.reconstruct_settings(tol()).unwrap(), skewed());
    assert_eq!(m.reconstruct_behaviour(), b);
}

#[test]
fn composing_one_model_is_identity() {
    let m = dilate(&sample_nonsignalling(2), &skewed(), tol()).unwrap();
    assert_eq!(compose(&[(1.0, &m)], tol()).unwrap(), m);
}

#[test]
fn restricting_composition_recovers_first_component() {
    let a = trivial_fhv(&Behaviour::uniform(2, 2).unwrap(), tol()).unwrap();
    let d = dilate(
        PrBox::new(5).unwrap().behaviour(),
        &SettingsDistribution::uniform(2, 2).unwrap(),
        tol(),
    )
    .unwrap();
    let m = compose(&[(0.3, &a), (0.7, &d)], tol()).unwrap();
    let (w, first) = m.restrict(&[0], tol()).unwrap();
    assert!((w - 0.3).abs() < 1e-15);
    assert!(first.reconstruct_behaviour().max_abs_diff(&a.reconstruct_behaviour()).unwrap() < 1e-15);
    assert_eq!(first.measures(tol()).freedom_mass, 1.0);
}

#[test]
fn half_free_half_dilated_masses() {
    let fhv = trivial_fhv(PrBox::new(1).unwrap().behaviour(), tol()).unwrap();
    let dil = dilate(&Behaviour::uniform(2, 2).unwrap(), &SettingsDistribution::uniform(2, 2).unwrap(), tol()).unwrap();
    let m = compose(&[(0.5, &fhv), (0.5, &dil)], tol()).unwrap();
    let ms = m.measures(tol());
    assert!((ms.freedom_mass - 0.5).abs() < 1e-15);
    // the PR-box part is not local
    assert!((ms.locality_mass - 0.5).abs() < 1e-15);
}

#[test]
fn deterministic_free_model_is_local_and_free() {
    let vertices = enumerate_local_vertices(2, DEFAULT_VERTEX_CAP).unwrap();
    let strategies: Vec<_> = vertices.iter().take(5).map(|v| (1.0, v.clone())).collect();
    let m = local_free_model(&strategies, &SettingsDistribution::uniform(2, 2).unwrap(), tol()).unwrap();
    let c = m.classify(tol());
    assert_eq!(c.local.len(), 5);
    assert_eq!(c.free.len(), 5);
}

#[test]
fn readjusting_a_free_model_installs_new_settings() {
    let vertices = enumerate_local_vertices(2, DEFAULT_VERTEX_CAP).unwrap();
    let strategies: Vec<_> = vertices.iter().step_by(3).map(|v| (1.0, v.clone())).collect();
    let m = local_free_model(&strategies, &SettingsDistribution::uniform(2, 2).unwrap(), tol()).unwrap();
    let r = readjust_settings(&m, &skewed(), tol()).unwrap();
    assert_eq!(r.lambda_count(), m.lambda_count());
    for (p, q) in r.p_lambda().iter().zip(m.p_lambda()) {
        assert!((p - q).abs() < 1e-15);
    }
    assert!(r.reconstruct_settings(tol()).unwrap().max_abs_diff(&skewed()).unwrap() < 1e-15);
    assert!((r.measures(tol()).freedom_mass - m.measures(tol()).freedom_mass).abs() < 1e-15);
}

#[test]
fn readjusting_a_dilation_gives_the_new_dilation() {
    let b = sample_nonsignalling(21);
    let m = dilate(&b, &SettingsDistribution::uniform(2, 2).unwrap(), tol()).unwrap();
    let r = readjust_settings(&m, &skewed(), tol()).unwrap();
    let expected = dilate(&b, &skewed(), tol()).unwrap();
    assert_eq!(r.lambda_count(), expected.lambda_count());
    for l in 0..r.lambda_count() {
        assert!((r.p_lambda()[l] - expected.p_lambda()[l]).abs() < 1e-12);
    }
}

#[test]
fn readjusting_keeps_partial_free_mass() {
    let vertices = enumerate_local_vertices(2, DEFAULT_VERTEX_CAP).unwrap();
    let strategies: Vec<_> = vertices.iter().take(4).map(|v| (1.0, v.clone())).collect();
    let u = SettingsDistribution::uniform(2, 2).unwrap();
    let free = local_free_model(&strategies, &u, tol()).unwrap();
    let dil = dilate(PrBox::new(2).unwrap().behaviour(), &u, tol()).unwrap();
    let m = compose(&[(0.6, &free), (0.4, &dil)], tol()).unwrap();
    let r = readjust_settings(&m, &skewed(), tol()).unwrap();
    assert!((r.measures(tol()).freedom_mass - 0.6).abs() < 1e-12);
    assert!(r.reconstruct_behaviour().max_abs_diff(&m.reconstruct_behaviour()).unwrap() < 1e-12);
}

#[test]
fn model_json_round_trip() {
    let m = dilate(&sample_nonsignalling(4), &skewed(), tol()).unwrap();
    assert_eq!(model_from_json(&model_to_json(&m), tol()).unwrap(), m);
}

fn three_sigma(p: f64, n: u64) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-6
}

#[test]
fn simulated_tallies_converge_to_model_masses() {
    let iso = PrBox::new(1).unwrap().behaviour().mix(&Behaviour::uniform(2, 2).unwrap(), 0.8).unwrap();
    let fhv = trivial_fhv_with(&iso, &skewed(), tol()).unwrap();
    let dil = dilate(&sample_nonsignalling(9), &skewed(), tol()).unwrap();
    let m = compose(&[(0.35, &fhv), (0.65, &dil)], tol()).unwrap();
    let n = 1_000_000;
    let r = sim::run(&m, &SimConfig::new(n, 77), tol()).unwrap();
    let ms = m.measures(tol());
    assert!((ms.freedom_mass - 0.35).abs() < 1e-12);
    assert!((r.free_fraction() - ms.freedom_mass).abs() <= three_sigma(ms.freedom_mass, n));
    assert!((r.local_fraction() - ms.locality_mass).abs() <= three_sigma(ms.locality_mass, n));

    let settings = m.reconstruct_settings(tol()).unwrap();
    for x in 0..2 {
        for y in 0..2 {
            let p = settings.get(x, y);
            assert!((r.settings[x][y] - p).abs() <= three_sigma(p, n));
        }
    }
    let exact = m.reconstruct_behaviour();
    for x in 0..2 {
        for y in 0..2 {
            let cell_trials = (settings.get(x, y) * n as f64) as u64;
            for a in 0..2 {
                for b in 0..2 {
                    let p = exact.p(x, y, a, b);
                    let got = r.empirical(x, y, a, b).unwrap();
                    assert!((got - p).abs() <= three_sigma(p, cell_trials) * 1.2);
                }
            }
        }
    }
}

#[test]
fn dilated_pr_box_simulation() {
    let pr = PrBox::new(1).unwrap();
    let m = dilate(pr.behaviour(), &SettingsDistribution::uniform(2, 2).unwrap(), tol()).unwrap();
    let r = sim::run(&m, &SimConfig::new(1_000_000, 1), tol()).unwrap();
    assert_eq!(r.free_trials, 0);
    assert_eq!(r.local_trials, 1_000_000);
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let got = r.empirical(x, y, a, b).unwrap();
                    assert!((got - pr.behaviour().p(x, y, a, b)).abs() <= 5e-3);
                }
            }
        }
    }
    assert_eq!(sim::run(&m, &SimConfig::new(1_000_000, 1), tol()).unwrap(), r);
}
