use std::sync::OnceLock;

use rand::Rng;

use super::*;
use crate::linalg::{hermitian_eig, max_abs};
use crate::parallel::Execution;
use crate::random::{haar_state, rng_for};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn lat() -> Lattice {
    Lattice::standard(1.0).unwrap()
}

fn yanase() -> &'static LatticeScheme {
    static CELL: OnceLock<LatticeScheme> = OnceLock::new();
    CELL.get_or_init(|| preset_yanase(&lat(), &lat().gaussian(0.0, 2.0).unwrap(), &tol()).unwrap())
}

fn conserving() -> &'static LatticeScheme {
    static CELL: OnceLock<LatticeScheme> = OnceLock::new();
    CELL.get_or_init(|| preset_conserving(&lat(), 1.0, &lat().gaussian(0.0, 2.5).unwrap(), &tol()).unwrap())
}

fn family() -> Vec<StateVector> {
    AdmissibleFamily::default().states(&lat(), &tol()).unwrap()
}

/// Displacement `δ` wrapped into `[−N/2, N/2)`.
fn wrap(delta: i64, n: i64) -> i64 {
    (delta + n / 2).rem_euclid(n) - n / 2
}

/// `Σ_j |ψ_j|² Σ_{i∈X} e(x_j − x_i)` by a direct double sum.
fn double_sum(psi: &StateVector, kernel_of: impl Fn(i64) -> f64, bin: &[usize], n: usize) -> f64 {
    let mut total = 0.0;
    for (j, amp) in psi.amplitudes().iter().enumerate() {
        for &i in bin {
            total += amp.norm_sqr() * kernel_of(wrap(j as i64 - i as i64, n as i64));
        }
    }
    total
}

#[test]
fn lattice_validation() {
    assert!(Lattice::new(6, 1.0, 1.0).is_err());
    assert!(Lattice::new(9, 1.0, 1.0).is_err());
    assert!(Lattice::new(8, 0.0, 1.0).is_err());
    assert!(Lattice::new(8, 1.0, -1.0).is_err());
    let l = Lattice::new(16, 0.5, 2.0).unwrap();
    assert_eq!(l.position(0), -4.0);
    assert!((l.momentum_step() - 2.0 * PI * 2.0 / 8.0).abs() < 1e-15);
    assert_eq!(l.site_of(1.5), Some(11));
    assert_eq!(l.site_of(1.25), None);
}

#[test]
fn fourier_is_unitary() {
    for l in [lat(), Lattice::new(8, 0.3, 0.7).unwrap()] {
        let f = l.fourier();
        let n = l.sites();
        assert!(max_abs(&(f.adjoint() * &f - CMatrix::identity(n, n))) <= 1e-12);
    }
}

#[test]
fn spectra_are_the_grids() {
    let l = lat();
    let ops = l.ops();
    assert!(ops.q.hermiticity_defect() <= 1e-12 && ops.p.hermiticity_defect() <= 1e-12);
    let qe = hermitian_eig(&ops.q).unwrap();
    for (got, want) in qe.values.iter().zip(l.positions()) {
        assert_eq!(*got, want);
    }
    let pe = hermitian_eig(&ops.p).unwrap();
    for (got, want) in pe.values.iter().zip(l.momenta()) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn commutator_holds_on_admissible_states() {
    let l = lat();
    for psi in family() {
        assert!(l.commutator_defect(&psi).unwrap() <= 1e-6 * l.hbar());
    }
    // packet of full width 4a
    let wide = l.gaussian(0.0, 2.0).unwrap();
    assert!(l.is_admissible(&wide, &tol()).unwrap());
    assert!(l.commutator_defect(&wide).unwrap() <= 1e-6);
}

#[test]
fn commutator_fails_at_the_boundary() {
    let l = lat();
    let edge = l.gaussian(l.position(0), 1.5).unwrap();
    assert!(!l.is_admissible(&edge, &tol()).unwrap());
    assert!(l.commutator_defect(&edge).unwrap() > 0.1 * l.hbar());
}

#[test]
fn hbar_scales_the_commutator() {
    let l = Lattice::new(32, 1.0, 2.5).unwrap();
    let psi = l.gaussian(0.0, 1.5).unwrap();
    assert!(l.commutator_defect(&psi).unwrap() <= 1e-6 * 2.5);
}

#[test]
fn admissibility_predicate() {
    let l = lat();
    let t = tol();
    assert!(!l.is_admissible(&l.gaussian(0.0, 0.5).unwrap(), &t).unwrap());
    assert!(!l.is_admissible(&l.gaussian(0.0, 4.0).unwrap(), &t).unwrap());
    assert!(!l.is_admissible(&l.gaussian(10.0, 1.5).unwrap(), &t).unwrap());
    let bad = AdmissibleFamily { centers: vec![0.0, 12.0], widths: vec![1.5] };
    assert!(matches!(bad.states(&l, &t), Err(Error::Contract(_))));
    assert_eq!(family().len(), 9);
}

#[test]
fn kernel_validation() {
    let mut w = vec![0.0; 32];
    w[16] = 1.0;
    assert!(SmearKernel::new(w.clone()).is_ok());
    w[17] = -0.1;
    w[16] = 1.1;
    assert!(SmearKernel::new(w).is_err());
    let mut w = vec![0.0; 32];
    w[16] = 0.9;
    assert!(SmearKernel::new(w).is_err());
    let mut w = vec![0.0; 32];
    w[16] = 0.5;
    w[16 + 9] = 0.5;
    assert!(SmearKernel::new(w).is_err(), "support beyond N/4");
    assert!(SmearKernel::uniform(32, 8).is_ok());
    assert!(SmearKernel::uniform(32, 9).is_err());
}

#[test]
fn point_mass_gives_sharp_position() {
    let l = lat();
    let povm = smeared_position_povm(&l, &SmearKernel::point_mass(32).unwrap(), &site_bins(&l), &tol()).unwrap();
    for (j, (label, e)) in povm.effects().iter().enumerate() {
        assert_eq!(label, &j.to_string());
        let want = Operator::projector(&StateVector::basis(32, j));
        assert_eq!(e.distance(&want), 0.0);
    }
    assert!(SmearKernel::point_mass(32).unwrap().width(&l) == 0.0);
}

#[test]
fn uniform_kernel_on_basis_state() {
    let l = lat();
    let k = SmearKernel::uniform(32, 1).unwrap();
    let povm = smeared_position_povm(&l, &k, &site_bins(&l), &tol()).unwrap();
    let psi = StateVector::basis(32, 10);
    let probs = povm.probabilities(&psi).unwrap();
    for (i, p) in probs.iter().enumerate() {
        let oracle = double_sum(&psi, |d| if d.abs() <= 1 { 1.0 / 3.0 } else { 0.0 }, &[i], 32);
        assert!((p - oracle).abs() <= 1e-12);
    }
    assert!((probs[9] - 1.0 / 3.0).abs() < 1e-15 && probs[12] == 0.0);
}

#[test]
fn smeared_probabilities_match_double_sum() {
    let l = lat();
    let n = l.sites();
    let mut rng = rng_for(8, 0);
    for trial in 0..50 {
        let half = rng.random_range(0..=n / 4);
        let mut w = vec![0.0; n];
        for v in &mut w[n / 2 - half..=n / 2 + half] {
            *v = rng.random::<f64>();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        // renormalize exactly enough for the 1e−12 check
        let s: f64 = w.iter().sum();
        w[n / 2] += 1.0 - s;
        let kernel = SmearKernel::new(w.clone()).unwrap();
        // random contiguous bins
        let mut cuts: Vec<usize> = (0..4).map(|_| rng.random_range(1..n)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut bins = Vec::new();
        let mut start = 0;
        for &c0 in cuts.iter().chain(std::iter::once(&n)) {
            bins.push((format!("bin{start}"), (start..c0).collect::<Vec<_>>()));
            start = c0;
        }
        let povm = smeared_position_povm(&l, &kernel, &bins, &tol()).unwrap();
        assert!(povm.completeness_residual() <= 1e-12);
        let psi = haar_state(n, &mut rng_for(8, 1 + trial));
        let probs = povm.probabilities(&psi).unwrap();
        let kernel_of = |d: i64| w[(d + n as i64 / 2) as usize];
        for ((_, bin), p) in bins.iter().zip(&probs) {
            assert!((p - double_sum(&psi, kernel_of, bin, n)).abs() <= 1e-12);
        }
    }
}

#[test]
fn bins_must_partition() {
    let l = lat();
    let k = SmearKernel::point_mass(32).unwrap();
    let mut bins = site_bins(&l);
    bins.pop();
    assert!(matches!(smeared_position_povm(&l, &k, &bins, &tol()), Err(Error::Contract(_))));
    let mut bins = site_bins(&l);
    bins[0].1.push(1);
    assert!(matches!(smeared_position_povm(&l, &k, &bins, &tol()), Err(Error::Contract(_))));
    let mut bins = site_bins(&l);
    bins[0].1.push(40);
    assert!(smeared_position_povm(&l, &k, &bins, &tol()).is_err());
}

#[test]
fn von_neumann_smears_by_the_probe_density() {
    let l = lat();
    let phi = l.gaussian(0.0, 1.5).unwrap();
    let vn = preset_von_neumann(&l, 1.0, &phi, &tol()).unwrap();
    let povm = vn.scheme().induced_povm().unwrap();
    let density: Vec<f64> = phi.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let mut rng = rng_for(9, 0);
    for _ in 0..5 {
        let psi = haar_state(32, &mut rng);
        let probs = povm.probabilities(&psi).unwrap();
        for ((label, _), p) in povm.effects().iter().zip(&probs) {
            let i: usize = label.parse().unwrap();
            let oracle = double_sum(&psi, |d| density[(d + 16) as usize], &[i], 32);
            assert!((p - oracle).abs() < 1e-10, "site {i}: {p} vs {oracle}");
        }
    }
    assert!(vn.conservation_residual() > 0.01);
}

#[test]
fn von_neumann_at_zero_coupling_is_trivial() {
    let l = lat();
    let phi = l.gaussian(0.0, 1.5).unwrap();
    let vn = preset_von_neumann(&l, 0.0, &phi, &tol()).unwrap();
    assert!(vn.scheme().coupling().distance(&Operator::identity(1024)) < 1e-12);
    for (label, e) in vn.scheme().induced_povm().unwrap().effects() {
        let i: usize = label.parse().unwrap();
        let w = phi.amplitudes()[i].norm_sqr();
        assert!(e.distance(&Operator::identity(32).scale(c(w, 0.0))) < 1e-12);
    }
    assert!(preset_von_neumann(&l, -1.0, &phi, &tol()).is_err());
}

#[test]
fn conserving_preset_invariants() {
    let ls = conserving();
    let l = lat();
    assert!(ls.conservation_residual() <= 1e-10);
    assert!(information_transfer(ls).unwrap() >= 0.5);
    // the pointer Q_A fails the Yanase condition by about ħ on the probe
    let phi = ls.scheme().probe_state();
    assert!((l.commutator_defect(phi).unwrap()) < 1e-6);
    assert!(ls.scheme().yanase_residual(&ls.pair()).unwrap() > 1.0);
    let ctx = ls.context().unwrap();
    for psi in family() {
        assert!(ctx.ozawa_rhs(&psi).unwrap().numerator <= 1e-6 * l.hbar());
    }
}

#[test]
fn weak_conserving_coupling_is_rejected() {
    let l = lat();
    let err = preset_conserving(&l, 0.02, &l.gaussian(0.0, 2.5).unwrap(), &tol()).unwrap_err();
    assert!(matches!(err, Error::Construction { residual, .. } if residual > 0.0));
}

#[test]
fn yanase_preset_invariants() {
    let ls = yanase();
    let l = lat();
    assert!(ls.conservation_residual() <= 1e-10);
    assert!(ls.scheme().yanase_residual(&ls.pair()).unwrap() <= 1e-10);
    for (v, x) in ls.scheme().pointer_values().iter().zip(l.positions()) {
        assert!((v - x).abs() < 1e-10);
    }
    let ctx = ls.context().unwrap();
    for psi in family() {
        let num = ctx.ozawa_rhs(&psi).unwrap().numerator;
        let reduced = crate::metrics::yanase_numerator_value(&l.position_op(), &l.momentum_op(), &psi).unwrap();
        assert!((num * num - reduced).abs() <= 1e-7);
    }
    let bound = ctx.position_bound();
    let worst = family().iter().map(|p| ctx.noise(p).unwrap().powi(2)).fold(0.0, f64::max);
    assert!(worst >= bound - 1e-6, "{worst} < {bound}");
}

#[test]
fn relative_position_commutes_with_total_momentum() {
    let l = lat();
    let fam = family();
    let states: Vec<StateVector> =
        fam.iter().zip(fam.iter().rev()).map(|(a, b)| a.tensor(b)).collect();
    assert!(relative_position_check(&l, &states).unwrap() <= 1e-6 * l.hbar());
    let control = summed_position_check(&l, &states).unwrap();
    assert!((control - 2.0 * l.hbar()).abs() < 1e-6, "{control}");
    assert!(relative_position_check(&l, &[StateVector::basis(32, 0)]).is_err());
}

#[test]
fn kernel_of_von_neumann_is_the_probe_density() {
    let l = lat();
    let phi = l.gaussian(0.0, 1.5).unwrap();
    let vn = preset_von_neumann(&l, 1.0, &phi, &tol()).unwrap();
    let k = extract_kernel(vn.scheme(), &l).unwrap();
    assert!(!k.flagged && k.off_diagonal < 1e-12 && k.residual < 1e-10);
    for (w, a) in k.weights.iter().zip(phi.amplitudes()) {
        assert!((w - a.norm_sqr()).abs() < 1e-10);
    }
    assert!((k.width - 1.5).abs() < 1e-3, "width {}", k.width);
}

#[test]
fn sharp_scheme_has_point_kernel() {
    let l = lat();
    let vn = preset_von_neumann(&l, 1.0, &StateVector::basis(32, 16), &tol()).unwrap();
    let k = extract_kernel(vn.scheme(), &l).unwrap();
    assert!(k.width < 0.5 * l.spacing());
    assert!((k.weights[16] - 1.0).abs() < 1e-10);
}

#[test]
fn covariant_kernel_narrows_with_probe_momentum_spread() {
    let l = lat();
    let cfg = SweepConfig {
        kind: PresetKind::Covariant,
        lambdas: vec![],
        widths: vec![1.7, 1.8, 1.9, 2.0, 2.1, 2.2],
        family: AdmissibleFamily::default(),
        exec: Execution::Parallel,
    };
    let rows: Vec<SweepRow> = position_sweep(&l, &cfg, &tol()).unwrap().into_iter().map(|r| r.unwrap()).collect();
    let widths: Vec<f64> = rows.iter().map(|r| r.kernel_width).collect();
    let spreads: Vec<f64> = rows.iter().map(|r| r.delta_pa).collect();
    assert!(rows.iter().all(|r| !r.kernel_flagged));
    assert!(spearman(&widths, &spreads) <= -0.9);
    // closed form for a smeared reading Q + P_A/g − Q_A on a Gaussian probe
    let g = l.momentum_step() / l.spacing();
    for r in &rows {
        let want = (r.delta_pa.powi(2) / (g * g) + r.probe_width.powi(2)).sqrt();
        assert!((r.kernel_width - want).abs() < 0.02 * want, "{} vs {want}", r.kernel_width);
    }
}

#[test]
fn sweep_is_execution_independent() {
    let l = lat();
    let mut cfg = SweepConfig {
        kind: PresetKind::Yanase,
        lambdas: vec![],
        widths: vec![1.8, 2.2],
        family: AdmissibleFamily { centers: vec![0.0, 2.0], widths: vec![1.5] },
        exec: Execution::Sequential,
    };
    let seq = position_sweep(&l, &cfg, &tol()).unwrap();
    cfg.exec = Execution::Parallel;
    let par = position_sweep(&l, &cfg, &tol()).unwrap();
    assert_eq!(seq, par);
    let row = seq[0].as_ref().unwrap();
    assert!(row.applicable && row.slack_eps >= -1e-6 && row.slack_mu >= -1e-6);
    assert_eq!(row.bound_kind, BoundKind::Position);
}

#[test]
fn position_pointer_rows_fall_back_to_generic_bound() {
    let l = lat();
    let cfg = SweepConfig {
        kind: PresetKind::Conserving,
        lambdas: vec![1.0],
        widths: vec![2.5],
        family: AdmissibleFamily::default(),
        exec: Execution::Sequential,
    };
    let rows = position_sweep(&l, &cfg, &tol()).unwrap();
    let row = rows[0].as_ref().unwrap();
    // ε² sits far below the position bound, which does not apply here
    assert!(!row.applicable && row.epsilon_sq < row.bound_eq7);
    assert_eq!(row.bound_kind, BoundKind::Generic);
    assert!(row.slack_eps >= -1e-9 && row.slack_mu >= -1e-9);
}

#[test]
fn sweep_rejects_empty_lists() {
    let l = lat();
    let cfg = SweepConfig {
        kind: PresetKind::Conserving,
        lambdas: vec![],
        widths: vec![2.0],
        family: AdmissibleFamily::default(),
        exec: Execution::Sequential,
    };
    assert!(position_sweep(&l, &cfg, &tol()).is_err());
    let cfg = SweepConfig { kind: PresetKind::Yanase, widths: vec![], ..cfg };
    assert!(position_sweep(&l, &cfg, &tol()).is_err());
}

#[test]
fn preset_names_round_trip() {
    for k in PresetKind::ALL {
        assert_eq!(k.name().parse::<PresetKind>().unwrap(), k);
    }
    assert!("ozawa".parse::<PresetKind>().is_err());
}

#[test]
fn spearman_examples() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    // ties share their average rank
    let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
    assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
}
