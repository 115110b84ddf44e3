use super::*;
use crate::random::haar_state;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn quick() -> SearchConfig {
    SearchConfig::default()
}

fn build(n: usize) -> WignerModel {
    build_wigner_model(&WignerProbeSpec::uniform(n), &quick(), &tol()).unwrap()
}

/// `(1 − λ)/(3 + λ)` with `λ = cos(π/(⌈n/2⌉ + 1))`: a sine-shaped probe on one
/// parity class of levels.
fn optimized_closed_form(n: usize) -> f64 {
    let m = n.div_ceil(2) as f64;
    let lam = (PI / (m + 1.0)).cos();
    (1.0 - lam) / (3.0 + lam)
}

#[test]
fn sector_examples() {
    let s = build_sectors(1);
    assert_eq!(s.sectors.len(), 2);
    assert!(s.sectors.iter().all(|x| x.indices.len() == 1));

    let s = build_sectors(3);
    let sizes: Vec<usize> = s.sectors.iter().map(|x| x.indices.len()).collect();
    assert_eq!(sizes, vec![1, 2, 2, 1]);

    for d in 1..8 {
        let s = build_sectors(d);
        assert_eq!(s.sectors.len(), d + 1);
        let mut seen: Vec<usize> = s.sectors.iter().flat_map(|x| x.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..2 * d).collect::<Vec<_>>());
        // each sector is an eigenspace of Λ
        for sec in &s.sectors {
            for &i in &sec.indices {
                let (spin, j) = (i / d, i % d);
                let lam = if spin == 0 { 0.5 } else { -0.5 } + j as f64;
                assert_eq!(lam, sec.eigenvalue);
            }
        }
    }
}

#[test]
fn single_level_probe_gives_one_third() {
    let m = build(1);
    assert!((m.eta_sq - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn odd_uniform_probes_follow_the_law() {
    for n in [3, 5, 7, 9] {
        let e = minimal_eta_norm(&WignerProbeSpec::uniform(n), &quick()).unwrap();
        assert!((e - formula(n)).abs() < 1e-7, "n = {n}: {e}");
    }
}

#[test]
fn even_uniform_probes_match_constrained_oracle() {
    // Values from an independent SLSQP solve of the same reduced problem.
    for (n, want) in [
        (4, 3.0 / 13.0),
        (6, 0.125_480_818_362_231_7),
        (8, 0.084_613_520_514_402_99),
        (10, 0.063_564_612_433_093_57),
    ] {
        let e = minimal_eta_norm(&WignerProbeSpec::uniform(n), &quick()).unwrap();
        assert!((e - want).abs() < 1e-7, "n = {n}: {e} vs {want}");
    }
}

#[test]
fn two_level_uniform_probe_is_infeasible() {
    match build_wigner_model(&WignerProbeSpec::uniform(2), &quick(), &tol()) {
        Err(Error::Construction { residual, .. }) => assert!((residual - 0.5).abs() < 1e-12),
        other => panic!("expected a construction error, got {other:?}"),
    }
}

#[test]
fn uniform_minimum_is_not_monotone_between_three_and_four() {
    let e3 = minimal_eta_norm(&WignerProbeSpec::uniform(3), &quick()).unwrap();
    let e4 = minimal_eta_norm(&WignerProbeSpec::uniform(4), &quick()).unwrap();
    assert!(e4 > e3 + 0.03);
}

#[test]
fn optimized_profile_matches_closed_form() {
    for n in [2, 3, 4, 5, 7] {
        let e = minimal_eta_norm(&WignerProbeSpec::optimized(n), &quick()).unwrap();
        assert!((e - optimized_closed_form(n)).abs() < 1e-7, "n = {n}: {e}");
    }
    let two = minimal_eta_norm(&WignerProbeSpec::optimized(2), &quick()).unwrap();
    assert!(two <= 1.0 / 3.0 + 1e-12);
}

#[test]
fn custom_profile_is_respected() {
    let w = vec![0.6, 0.0, 0.8];
    let m = build_wigner_model(&WignerProbeSpec::custom(w.clone()), &quick(), &tol()).unwrap();
    assert_eq!(m.weights, w);
    // gap in the middle: t = 0.48
    assert!((m.eta_sq - eta_sq_of(0.48)).abs() < 1e-12);
    assert!(WignerProbeSpec::custom(vec![1.0, 1.0]).validate().is_err());
}

#[test]
fn model_invariants() {
    for n in (1..=8).filter(|&n| n != 2) {
        let m = build(n);
        let [a, b, cpm] = m.orthogonality();
        assert!(a <= 1e-8 && b <= 1e-8 && cpm <= 1e-8, "n = {n}");
        assert!(m.conservation_residual <= 1e-8);
        assert!(m.form_residual <= 1e-8);
        assert!((m.pointer_plus.norm_squared() + m.eta_sq - 1.0).abs() <= 1e-8);
        assert!((m.pointer_minus.norm_squared() + m.eta_sq - 1.0).abs() <= 1e-8);
        assert!(m.u.unitarity_defect() < 1e-12);

        let closed = effects_from_model(&m);
        let induced = m.scheme.induced_povm().unwrap();
        for (label, e) in closed.effects() {
            assert!(e.distance(induced.effect(label).unwrap()) <= 1e-8, "n = {n}, {label}");
        }
        assert!(closed.completeness_residual() < 1e-15);
    }
}

#[test]
fn pointer_gauge_is_real_positive() {
    for n in [1, 3, 4] {
        let m = build(n);
        let first = m.pointer_plus.iter().find(|z| z.norm() > 1e-12).unwrap();
        assert!(first.re > 0.0 && first.im.abs() < 1e-14);
    }
}

#[test]
fn large_probe_effects_approach_projectors() {
    let m = build(10);
    let e = effects_from_model(&m);
    for (sign, label) in [(1.0, LABEL_PLUS), (-1.0, LABEL_MINUS)] {
        let p = Operator::projector(&sx_eigenstate(sign));
        let gap = e.effect(label).unwrap().distance(&p);
        assert!(gap <= 2.0 / 19.0);
        assert!(gap <= 2.0 * m.eta_sq);
    }
}

#[test]
fn uncertain_outcome_is_not_repeatable() {
    let m = build(3);
    let psi = haar_state(2, &mut rng_for(5, 0));
    let povm = m.scheme.induced_povm().unwrap();
    let rep = m
        .scheme
        .conditional_states(&psi)
        .unwrap()
        .into_iter()
        .find(|r| r.label == LABEL_UNCERTAIN)
        .unwrap();
    let hat = rep.rho_hat.unwrap();
    let t = crate::linalg::expectation(povm.effect(LABEL_UNCERTAIN).unwrap(), &hat).unwrap().re;
    assert!((t - m.eta_sq).abs() < 1e-10);
    let dev = m.scheme.repeatability_deviation(&[psi]).unwrap();
    assert!(dev >= 1.0 - m.eta_sq - 1e-10);
}

#[test]
fn yanase_residual_is_the_pointer_commutator() {
    let m = build(3);
    let pair = m.conserved_pair();
    let r = m.scheme.yanase_residual(&pair).unwrap();
    let explicit = crate::linalg::commutator(m.scheme.pointer(), pair.l2()).unwrap();
    assert_eq!(r, explicit.max_abs());
    assert!(r > 0.1);
}

#[test]
fn scaling_preconditions() {
    let cfg = quick();
    assert!(scaling_study(4, 3, &Profile::Uniform, &cfg, &tol()).is_err());
    assert!(scaling_study(0, 3, &Profile::Uniform, &cfg, &tol()).is_err());
    assert!(scaling_study(2, 25, &Profile::Uniform, &cfg, &tol()).is_err());
}

#[test]
fn scaling_rows_record_failures_and_fit() {
    let s = scaling_study(1, 5, &Profile::Uniform, &quick(), &tol()).unwrap();
    assert_eq!(s.rows.len(), 5);
    assert!(s.rows[1].model.is_err());
    let ok: Vec<_> = s.rows.iter().filter(|r| r.model.is_ok()).collect();
    assert_eq!(ok.len(), 4);
    assert!(s.slope.unwrap() < 0.0);
}

#[test]
fn slope_fit_recovers_power_law() {
    let x: Vec<f64> = (1..6).map(|v| (v as f64).ln()).collect();
    let y: Vec<f64> = x.iter().map(|v| 0.3 - 1.7 * v).collect();
    assert!((fit_slope(&x, &y).unwrap() + 1.7).abs() < 1e-12);
    assert!(fit_slope(&[1.0], &[2.0]).is_none());
}

#[test]
fn sequential_and_parallel_searches_agree() {
    let spec = WignerProbeSpec::optimized(6);
    let a = minimal_eta_norm(&spec, &SearchConfig { exec: Execution::Sequential, ..quick() }).unwrap();
    let b = minimal_eta_norm(&spec, &SearchConfig { exec: Execution::Parallel, ..quick() }).unwrap();
    assert_eq!(a, b);
}

/// Independent oracle: every chain sector gets a general U(2) block
/// `e^{iδ}[[e^{iα}cosθ, e^{iβ}sinθ], [−e^{−iβ}sinθ, e^{−iα}cosθ]]`, and the
/// form and orthogonality conditions enter as a quadratic penalty.
mod general_sector_oracle {
    use super::*;

    struct Eval {
        eta_sq: f64,
        violation: f64,
    }

    fn evaluate(w: &[f64], p: &[f64]) -> Eval {
        let n = w.len();
        // window-local probe vectors, levels −1 ..= n (offset by one)
        let len = n + 2;
        let mut a = vec![ZERO; len];
        let mut b = vec![ZERO; len];
        let mut cc = vec![ZERO; len];
        let mut d = vec![ZERO; len];
        let wv = |k: isize| if k >= 0 && (k as usize) < n { w[k as usize] } else { 0.0 };
        for s in 0..=n {
            // sector pairs (↑, m), (↓, m+1) with m = s − 1 in window coordinates
            let m = s as isize - 1;
            let q = &p[4 * s..4 * s + 4];
            let (th, al, be, de) = (q[0], q[1], q[2], q[3]);
            let g = C64::from_polar(1.0, de);
            let b00 = g * C64::from_polar(th.cos(), al);
            let b01 = g * C64::from_polar(th.sin(), be);
            let b10 = -g * C64::from_polar(th.sin(), -be);
            let b11 = g * C64::from_polar(th.cos(), -al);
            let (im, im1) = ((m + 1) as usize, (m + 2) as usize);
            a[im] += b00 * wv(m);
            b[im1] += b10 * wv(m);
            cc[im] += b01 * wv(m + 1);
            d[im1] += b11 * wv(m + 1);
        }
        let dot = |x: &[C64], y: &[C64]| -> C64 { x.iter().zip(y).map(|(u, v)| u.conj() * v).sum() };
        let eta: Vec<C64> = cc.iter().zip(&b).map(|(x, y)| (x - y) * 0.5).collect();
        let pp: Vec<C64> = (0..len).map(|i| (a[i] + d[i]) * 0.5 + (b[i] + cc[i]) * 0.5).collect();
        let pm: Vec<C64> = (0..len).map(|i| (a[i] + d[i]) * 0.5 - (b[i] + cc[i]) * 0.5).collect();
        let form: f64 = a.iter().zip(&d).map(|(x, y)| (x - y).norm_sqr()).sum();
        let violation = form
            + dot(&eta, &pp).norm_sqr()
            + dot(&eta, &pm).norm_sqr()
            + dot(&pp, &pm).norm_sqr();
        Eval { eta_sq: dot(&eta, &eta).re, violation }
    }

    /// Returns (best ‖η‖², its constraint violation).
    fn solve(n: usize) -> (f64, f64) {
        let w = vec![1.0 / (n as f64).sqrt(); n];
        let dim = 4 * (n + 1);
        let opts = SearchOptions { initial_step: 0.4, min_step: 1e-7, ..Default::default() };
        let mut best = (f64::INFINITY, f64::INFINITY);
        for start in 0..12u64 {
            let mut rng = rng_for(2024, start);
            use rand::Rng;
            let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-PI..PI)).collect();
            for weight in [1e1, 1e3, 1e5, 1e7] {
                let r = crate::optimize::compass_search(
                    |p| {
                        let e = evaluate(&w, p);
                        e.eta_sq + weight * e.violation
                    },
                    &x,
                    &opts,
                );
                x = r.x;
            }
            let e = evaluate(&w, &x);
            let score = (e.violation > 1e-8, e.eta_sq);
            let incumbent = (best.1 > 1e-8, best.0);
            if score < incumbent {
                best = (e.eta_sq, e.violation);
            }
        }
        best
    }

    #[test]
    fn confirms_minimum_for_one_and_three_levels() {
        for n in [1, 3] {
            let (oracle, violation) = solve(n);
            let ours = minimal_eta_norm(&WignerProbeSpec::uniform(n), &quick()).unwrap();
            assert!(violation < 1e-8, "n = {n}: oracle violation {violation:e}");
            assert!((oracle - ours).abs() < 1e-4, "n = {n}: oracle {oracle} vs {ours}");
        }
    }

    #[test]
    fn finds_no_feasible_point_for_two_levels() {
        let (_, violation) = solve(2);
        assert!(violation > 1e-4, "violation {violation:e}");
    }

    #[test]
    fn reduced_model_is_a_feasible_point_of_the_oracle() {
        // Read the sector blocks back out of a built model.
        let m = build(3);
        let d = m.probe_dim();
        let u = m.u.matrix();
        let w = &m.weights;
        let mut a = CVector::zeros(d);
        for (k, wk) in w.iter().enumerate() {
            a[2 + k] = c(*wk, 0.0);
        }
        let up = u.columns(0, d) * &a;
        let down = u.columns(d, d) * &a;
        let (aa, dd) = (up.rows(0, d).into_owned(), down.rows(d, d).into_owned());
        assert!((aa - dd).norm() < 1e-12);
    }
}
