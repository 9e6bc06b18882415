use hsp_core::*;

struct Fixture {
    data: SimulatedData,
    cfg: RetrievalConfig,
}

fn fixture(seed: u64) -> Fixture {
    let g = make_grid(-1.0, 1.0, 64).unwrap();
    let r = gaussian_mode(g, 0.3, 0.0).unwrap();
    let u = r
        .with_quadratic_phase(&QuadraticPhase::new(K_800NM, 34.0).unwrap())
        .unwrap();
    let data =
        simulate_experiment(&u, &r, 0.91, 2200, 10_000, &DetectorConfig::default(), seed).unwrap();
    Fixture {
        data,
        cfg: RetrievalConfig::for_grid(&g, K_800NM, 75.0),
    }
}

fn scaled<C: CountData>(c: &C, factor: u64) -> C {
    c.with_counts(c.counts().iter().map(|v| v * factor).collect())
}

fn run(f: &Fixture, factor: u64, n_trials: usize, seed: u64) -> McSummary {
    let mc = McConfig {
        n_trials,
        ..Default::default()
    };
    mc_run(
        &scaled(&f.data.hologram, factor),
        &scaled(&f.data.marginal_u, factor),
        &scaled(&f.data.marginal_r, factor),
        &f.cfg,
        &mc,
        seed,
    )
    .unwrap()
}

#[test]
fn mc_is_deterministic() {
    let f = fixture(2);
    let a = run(&f, 1, 8, 5);
    let b = run(&f, 1, 8, 5);
    assert_eq!(a, b);
    assert_eq!(a.seeds.len(), 8);
    let c = run(&f, 1, 8, 6);
    assert_ne!(a.phase_std, c.phase_std);
}

#[test]
fn std_shrinks_with_counts() {
    let f = fixture(3);
    let low = run(&f, 1, 40, 1);
    let high = run(&f, 100, 40, 1);
    assert_eq!(low.central_mask, high.central_mask);
    for i in 0..low.central_mask.len() {
        if low.central_mask[i] {
            let (a, b) = (low.phase_std[i].unwrap(), high.phase_std[i].unwrap());
            assert!(b < a, "bin {i}: {b} at 100x vs {a} at 1x");
        }
    }
}

#[test]
fn noise_free_limit() {
    let f = fixture(4);
    let s = run(&f, 10_000, 16, 2);
    let worst = s.max_central_std().unwrap();
    assert!(worst < 0.02, "central std {worst}");
    assert!(s.phase_std.iter().flatten().all(|v| *v >= 0.0));
}

#[test]
fn gauge_unification_absorbs_sign_flips() {
    let f = fixture(5);
    let base = retrieve_phase(
        &f.data.hologram,
        &f.data.marginal_u,
        &f.data.marginal_r,
        &f.cfg,
        1,
    )
    .unwrap();
    let trials: Vec<TrialOutcome> = (0..12)
        .map(|t| {
            let mut o = TrialOutcome::from_result(&base).unwrap();
            for (i, p) in o.phase.iter_mut().enumerate() {
                if let Some(p) = p {
                    *p += 0.05 * ((i * (t + 1)) as f64).sin();
                }
            }
            o.visibility += 0.001 * t as f64;
            o
        })
        .collect();
    let flipped: Vec<TrialOutcome> = trials
        .iter()
        .enumerate()
        .map(|(t, o)| {
            let mut o = o.clone();
            if t % 2 == 0 {
                o.phase.iter_mut().flatten().for_each(|p| *p = -*p);
            }
            o
        })
        .collect();
    let seeds: Vec<u64> = (0..12).collect();
    let a = summarize_trials(&base, &trials, seeds.clone(), 0).unwrap();
    let b = summarize_trials(&base, &flipped, seeds.clone(), 0).unwrap();
    assert_eq!(a, b);

    let shifted: Vec<TrialOutcome> = flipped
        .iter()
        .enumerate()
        .map(|(t, o)| {
            let mut o = o.clone();
            o.phase
                .iter_mut()
                .flatten()
                .for_each(|p| *p += 0.7 * t as f64 - 2.0);
            o
        })
        .collect();
    let c = summarize_trials(&base, &shifted, seeds, 0).unwrap();
    for (x, y) in a.phase_std.iter().zip(&c.phase_std) {
        if let (Some(x), Some(y)) = (x, y) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn summary_serializes() {
    let f = fixture(6);
    let s = run(&f, 1, 3, 9);
    let json = serde_json::to_string(&s).unwrap();
    assert!(json.contains("\"phase_std\""));
    assert!(!json.contains("trial_phases"));
}

#[test]
fn rejects_too_few_trials() {
    let f = fixture(7);
    let mc = McConfig {
        n_trials: 1,
        ..Default::default()
    };
    let err = mc_run(
        &f.data.hologram,
        &f.data.marginal_u,
        &f.data.marginal_r,
        &f.cfg,
        &mc,
        0,
    )
    .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Input);
}
