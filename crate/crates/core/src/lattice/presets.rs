//! Position-measurement presets on the lattice and the probe-width sweep.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{c, matmul, matmul_adjoint, CMatrix, Operator, StateVector, C64, ZERO};
use crate::metrics::MetricContext;
use crate::parallel::{map_indices, Execution};
use crate::scheme::{ConservedPair, MeasurementScheme};

use super::{extract_kernel, AdmissibleFamily, Lattice};

/// Minimal total variation between the pointer distributions of two
/// packets `4a` apart for a scheme to count as a position measurement.
pub const TRANSFER_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetKind {
    /// `exp(−iλ Q⊗P_A/ħ)`, pointer `Q_A`. Does not conserve momentum.
    VonNeumann,
    /// Momentum-conserving coupling in the relative coordinate, pointer `Q_A`.
    Conserving,
    /// Momentum-conserving coupling with a pointer commuting with `P_A`.
    Yanase,
    /// Translation-covariant chirp coupling with the Yanase pointer. Its
    /// effects are exactly smeared position; momentum is conserved only on
    /// admissible states.
    Covariant,
}

impl PresetKind {
    pub const ALL: [PresetKind; 4] =
        [PresetKind::VonNeumann, PresetKind::Conserving, PresetKind::Yanase, PresetKind::Covariant];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::VonNeumann => "von-neumann",
            PresetKind::Conserving => "conserving",
            PresetKind::Yanase => "yanase",
            PresetKind::Covariant => "covariant",
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown lattice preset `{s}`")))
    }
}

/// A preset scheme together with its lattice data.
#[derive(Clone, Debug)]
pub struct LatticeScheme {
    kind: PresetKind,
    lambda: f64,
    lattice: Lattice,
    scheme: MeasurementScheme,
    conservation_residual: f64,
}

impl LatticeScheme {
    fn build(
        kind: PresetKind,
        lambda: f64,
        lat: &Lattice,
        u: Operator,
        z: Operator,
        probe: &StateVector,
        tol: &Tolerances,
    ) -> Result<Self> {
        let scheme = MeasurementScheme::with_value_labels(lat.dims(), u, probe.clone(), z, tol, |v| {
            lat.site_label(v)
        })?;
        let conservation_residual = scheme.conservation_residual(&momentum_pair(lat))?;
        Ok(Self { kind, lambda, lattice: *lat, scheme, conservation_residual })
    }

    pub fn kind(&self) -> PresetKind {
        self.kind
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn scheme(&self) -> &MeasurementScheme {
        &self.scheme
    }

    /// `‖U†(P⊗1 + 1⊗P_A)U − (P⊗1 + 1⊗P_A)‖_max`
    pub fn conservation_residual(&self) -> f64 {
        self.conservation_residual
    }

    /// `(P, P_A)`
    pub fn pair(&self) -> ConservedPair {
        momentum_pair(&self.lattice)
    }

    /// Metric context with `M = Q` and `L = P⊗1 + 1⊗P_A`.
    pub fn context(&self) -> Result<MetricContext> {
        MetricContext::new(self.scheme.clone(), self.lattice.position_op(), self.pair(), self.lattice.hbar())
    }

    /// Same coupling and pointer with another probe state.
    pub fn with_probe(&self, probe: &StateVector, tol: &Tolerances) -> Result<Self> {
        let scheme = MeasurementScheme::with_value_labels(
            self.lattice.dims(),
            self.scheme.coupling().clone(),
            probe.clone(),
            self.scheme.pointer().clone(),
            tol,
            |v| self.lattice.site_label(v),
        )?;
        Ok(Self { scheme, ..self.clone() })
    }
}

fn momentum_pair(lat: &Lattice) -> ConservedPair {
    let p = lat.momentum_op();
    ConservedPair::new(p.clone(), p).expect("Hermitian by construction")
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling strength must be ≥ 0, got {lambda}")));
    }
    Ok(())
}

/// `U = exp(−iλ Q⊗P_A/ħ)`: the probe is translated by `λx` when the system
/// sits at `x`. Pointer `Q_A`.
pub fn preset_von_neumann(lat: &Lattice, lambda: f64, probe: &StateVector, tol: &Tolerances) -> Result<LatticeScheme> {
    check_lambda(lambda)?;
    let n = lat.sites();
    let f = lat.fourier();
    let hbar = lat.hbar();
    let mut u = CMatrix::zeros(n * n, n * n);
    for j in 0..n {
        let x = lat.position(j);
        let mut phased = f.clone();
        for (m, mut row) in phased.row_iter_mut().enumerate() {
            row *= C64::from_polar(1.0, -lambda * x * lat.momentum(m) / hbar);
        }
        let block = f.adjoint() * phased;
        u.view_mut((j * n, j * n), (n, n)).copy_from(&block);
    }
    let u = Operator::from_matrix(u)?;
    LatticeScheme::build(PresetKind::VonNeumann, lambda, lat, u, lat.position_op(), probe, tol)
}

/// Momentum-conserving coupling generated by `λ(Q − Q_A)(P + P_A)`, with
/// pointer `Q_A` (violating the Yanase condition).
///
/// Built exactly in the total-momentum basis: each block of fixed
/// `m + m'` is diagonalized in its own relative coordinate, so the total
/// momentum commutes with `U` to rounding.
pub fn preset_conserving(lat: &Lattice, lambda: f64, probe: &StateVector, tol: &Tolerances) -> Result<LatticeScheme> {
    check_lambda(lambda)?;
    let hbar = lat.hbar();
    let u = blockwise_coupling(lat, |k_total, r| lambda * k_total * r / hbar)?;
    let ls = LatticeScheme::build(PresetKind::Conserving, lambda, lat, u, lat.position_op(), probe, tol)?;
    let tv = information_transfer(&ls)?;
    if tv < TRANSFER_THRESHOLD {
        return Err(Error::Construction {
            message: format!(
                "conserving preset at λ = {lambda} barely reads position: total variation {tv:.3} < {TRANSFER_THRESHOLD}"
            ),
            residual: TRANSFER_THRESHOLD - tv,
        });
    }
    Ok(ls)
}

/// Momentum-conserving coupling `exp(−i g (Q − Q_A)²/(2ħ))` with
/// `g = 2πħ/(Na²)` and pointer `P_A/g`. The pointer commutes with `P_A`, and
/// its eigenvalues are exactly the site positions. It evolves to
/// `Q + P_A/g − Q_A`, a smeared position reading.
pub fn preset_yanase(lat: &Lattice, probe: &StateVector, tol: &Tolerances) -> Result<LatticeScheme> {
    let hbar = lat.hbar();
    let g = lat.momentum_step() / lat.spacing();
    let u = blockwise_coupling(lat, |_, r| g * r * r / (2.0 * hbar))?;
    let z = lat.momentum_op().scale(c(1.0 / g, 0.0));
    LatticeScheme::build(PresetKind::Yanase, g, lat, u, z, probe, tol)
}

/// `U|j, j_A⟩ = e^{−iπ(j − j_A)²/N}|j, j_A⟩`, which is `exp(−i g (Q − Q_A)²/(2ħ))`
/// with the difference taken cyclically; the phase is `N`-periodic because
/// `N` is even. Pointer `P_A/g` as in [`preset_yanase`].
pub fn preset_covariant(lat: &Lattice, probe: &StateVector, tol: &Tolerances) -> Result<LatticeScheme> {
    let n = lat.sites();
    let g = lat.momentum_step() / lat.spacing();
    let mut phases = Vec::with_capacity(n * n);
    for j in 0..n {
        for ja in 0..n {
            let d = (j as f64 - ja as f64).powi(2);
            phases.push(C64::from_polar(1.0, -PI * d / n as f64));
        }
    }
    let u = Operator::from_matrix(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases)))?;
    let z = lat.momentum_op().scale(c(1.0 / g, 0.0));
    LatticeScheme::build(PresetKind::Covariant, g, lat, u, z, probe, tol)
}

/// `U = (F⊗F)† [⊕_s V_s† diag(e^{−i θ(K_s, r)}) V_s] (F⊗F)`, where block `s`
/// collects the momentum pairs with `m + m' = s`, `K_s` is their total
/// momentum and `V_s` diagonalizes the relative position `r` on them.
fn blockwise_coupling(lat: &Lattice, theta: impl Fn(f64, f64) -> f64) -> Result<Operator> {
    let n = lat.sites();
    let hbar = lat.hbar();
    let extent = n as f64 * lat.spacing();
    let mut um = CMatrix::zeros(n * n, n * n);
    for s in 0..2 * n - 1 {
        let ms: Vec<usize> = (s.saturating_sub(n - 1)..=s.min(n - 1)).collect();
        let len = ms.len();
        let idx: Vec<usize> = ms.iter().map(|&m| m * n + (s - m)).collect();
        let k_total = lat.momentum(ms[0]) + lat.momentum(s - ms[0]);
        let r: Vec<f64> = (0..len).map(|l| extent / len as f64 * (l as f64 - len as f64 / 2.0)).collect();
        let norm = 1.0 / (len as f64).sqrt();
        let v = CMatrix::from_fn(len, len, |l, t| {
            let q = (lat.momentum(ms[t]) - lat.momentum(s - ms[t])) / 2.0;
            C64::from_polar(norm, q * r[l] / hbar)
        });
        let mut dv = v.clone();
        for (l, mut row) in dv.row_iter_mut().enumerate() {
            row *= C64::from_polar(1.0, -theta(k_total, r[l]));
        }
        let block = v.adjoint() * dv;
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                um[(ia, ib)] = block[(a, b)];
            }
        }
    }
    let f = lat.fourier();
    let ff = f.kronecker(&f);
    let u = matmul_adjoint(&ff, &matmul(&um, &ff));
    debug_assert!(u.iter().all(|z| z.is_finite()) && um.iter().any(|z| *z != ZERO));
    Operator::from_matrix(u)
}

/// Total variation between the pointer distributions for packets at `±2a`
/// of width `1.5a`.
pub fn information_transfer(ls: &LatticeScheme) -> Result<f64> {
    let lat = ls.lattice();
    let a = lat.spacing();
    let left = ls.scheme().pointer_probabilities(&lat.gaussian(-2.0 * a, 1.5 * a)?)?;
    let right = ls.scheme().pointer_probabilities(&lat.gaussian(2.0 * a, 1.5 * a)?)?;
    Ok(0.5 * left.iter().zip(&right).map(|(p, q)| (p - q).abs()).sum::<f64>())
}

/// A probe-width sweep over one preset.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub kind: PresetKind,
    /// Ignored by the Yanase and covariant presets, whose strength is fixed.
    pub lambdas: Vec<f64>,
    /// Probe position spreads, in units of the spacing.
    pub widths: Vec<f64>,
    pub family: AdmissibleFamily,
    pub exec: Execution,
}

/// Which inequality a row's slack columns are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `ħ²/(4 Δ_φP_A²)`, valid once the Yanase condition and conservation hold.
    Position,
    /// The pointwise generic bound, minimized over the family. Used when
    /// the position bound does not apply.
    Generic,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Position => "position",
            BoundKind::Generic => "generic",
        }
    }
}

/// One sweep row. ε² and μ² are maxima over the admissible family.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub preset: PresetKind,
    pub lambda: f64,
    pub probe_width: f64,
    /// `Δ_φ P_A`
    pub delta_pa: f64,
    pub epsilon_sq: f64,
    /// `ħ²/(4 Δ_φP_A²)`
    pub bound_eq7: f64,
    /// Measured against [`SweepRow::bound_kind`].
    pub slack_eps: f64,
    pub mu_sq: f64,
    pub bound_mu: f64,
    pub slack_mu: f64,
    pub yanase_residual: f64,
    pub conservation_residual: f64,
    pub kernel_width: f64,
    pub kernel_flagged: bool,
    /// Largest `|⟨[N, L]⟩|` over the family.
    pub numerator_eps: f64,
    /// Largest `|⟨[M_f − Z_f, L]⟩|` over the family.
    pub numerator_mu: f64,
    /// Largest `|⟨[Q, P]⟩ − iħ|` over the family and the probe.
    pub commutator_defect: f64,
    /// Yanase and conservation residuals within the lattice tolerance.
    pub applicable: bool,
    /// `Position` exactly when `applicable`.
    pub bound_kind: BoundKind,
}

/// Rows ordered by λ, then width; each row is an independent result.
pub fn position_sweep(lat: &Lattice, cfg: &SweepConfig, tol: &Tolerances) -> Result<Vec<Result<SweepRow>>> {
    if cfg.widths.is_empty() {
        return Err(Error::InvalidArgument("probe width list is empty".into()));
    }
    let lambdas = match cfg.kind {
        PresetKind::Yanase | PresetKind::Covariant => vec![f64::NAN],
        _ if cfg.lambdas.is_empty() => return Err(Error::InvalidArgument("λ list is empty".into())),
        _ => cfg.lambdas.clone(),
    };
    let family = cfg.family.states(lat, tol)?;
    let seed_probe = lat.gaussian(0.0, cfg.widths[0] * lat.spacing())?;
    let bases: Vec<Result<LatticeScheme>> = map_indices(lambdas.len(), cfg.exec, |i| match cfg.kind {
        PresetKind::VonNeumann => preset_von_neumann(lat, lambdas[i], &seed_probe, tol),
        PresetKind::Conserving => preset_conserving(lat, lambdas[i], &seed_probe, tol),
        PresetKind::Yanase => preset_yanase(lat, &seed_probe, tol),
        PresetKind::Covariant => preset_covariant(lat, &seed_probe, tol),
    });
    let nw = cfg.widths.len();
    Ok(map_indices(lambdas.len() * nw, cfg.exec, |k| {
        let base = bases[k / nw].as_ref().map_err(Clone::clone)?;
        sweep_row(base, cfg.widths[k % nw], &family, tol)
    }))
}

fn sweep_row(base: &LatticeScheme, width: f64, family: &[StateVector], tol: &Tolerances) -> Result<SweepRow> {
    let lat = base.lattice();
    let probe = lat.gaussian(0.0, width * lat.spacing())?;
    let ls = base.with_probe(&probe, tol)?;
    let ctx = ls.context()?;
    let (mut eps_sq, mut mu_sq, mut num_eps, mut num_mu) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut generic_eps, mut generic_mu) = (f64::INFINITY, f64::INFINITY);
    let mut defect = lat.commutator_defect(&probe)?;
    for psi in family {
        let (e, m) = (ctx.noise(psi)?.powi(2), ctx.repeatability_noise(psi)?.powi(2));
        let (re, rm) = (ctx.ozawa_rhs(psi)?, ctx.mu_rhs(psi)?);
        eps_sq = eps_sq.max(e);
        mu_sq = mu_sq.max(m);
        num_eps = num_eps.max(re.numerator);
        num_mu = num_mu.max(rm.numerator);
        generic_eps = generic_eps.min(e - re.value);
        generic_mu = generic_mu.min(m - rm.value);
        defect = defect.max(lat.commutator_defect(psi)?);
    }
    let bound = ctx.position_bound();
    let yanase_residual = ls.scheme().yanase_residual(&ls.pair())?;
    let conservation_residual = ls.conservation_residual();
    let kernel = extract_kernel(ls.scheme(), lat)?;
    let applicable = yanase_residual <= tol.lattice && conservation_residual <= tol.lattice;
    let (slack_eps, slack_mu, bound_kind) = if applicable {
        (eps_sq - bound, mu_sq - bound, BoundKind::Position)
    } else {
        (generic_eps, generic_mu, BoundKind::Generic)
    };
    Ok(SweepRow {
        preset: ls.kind(),
        lambda: ls.lambda(),
        probe_width: width,
        delta_pa: ctx.probe_spread(),
        epsilon_sq: eps_sq,
        bound_eq7: bound,
        slack_eps,
        mu_sq,
        bound_mu: bound,
        slack_mu,
        yanase_residual,
        conservation_residual,
        kernel_width: kernel.width,
        kernel_flagged: kernel.flagged,
        numerator_eps: num_eps,
        numerator_mu: num_mu,
        commutator_defect: defect,
        applicable,
        bound_kind,
    })
}
