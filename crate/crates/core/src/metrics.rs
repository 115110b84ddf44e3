//! Noise and repeatability measures and the error/disturbance bounds.
//!
//! With `Ψ = ψ⊗φ`, `Z_f = U†(1⊗Z)U`, `M_f = U†(M⊗1)U` and
//! `L = L1⊗1 + 1⊗L2`:
//!
//! * noise `N = Z_f − M⊗1`, `ε(ψ)² = ‖NΨ‖²`;
//! * repeatability `μ(ψ)² = ‖(M_f − Z_f)Ψ‖²`;
//! * the pointwise bounds `ε(ψ)² ≥ ¼|⟨[N, L]⟩|² / (Δ_ψL1² + Δ_φL2²)` and the
//!   same with `M_f − Z_f` in place of `N`.
//!
//! Everything is evaluated on `J: ψ ↦ ψ⊗φ`, so a lattice context never forms
//! a joint-space product.

use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    apply_probe_factor, apply_system_factor, attach_probe, commutator, expectation, matmul, matmul_adjoint, max_eigenvalue,
    tensor, variance, CMatrix, CVector, Operator, StateVector,
};
use crate::parallel::{map_indices, Execution};
use crate::random::{haar_state, rng_for};
use crate::scheme::{ConservedPair, MeasurementScheme};

/// A scheme plus the target observable and conserved pair.
#[derive(Clone, Debug)]
pub struct MetricContext {
    scheme: MeasurementScheme,
    m: Operator,
    pair: ConservedPair,
    hbar: f64,
    /// `N J`
    noise_j: CMatrix,
    /// `(M_f − Z_f) J`
    repeat_j: CMatrix,
    /// `L J`
    l_j: CMatrix,
    /// Δ_φ L2 squared.
    probe_var_l2: f64,
}

impl MetricContext {
    pub fn new(scheme: MeasurementScheme, m: Operator, pair: ConservedPair, hbar: f64) -> Result<Self> {
        let dims = scheme.dims();
        if m.dim() != dims.system {
            return Err(dim_err("target observable M", dims.system, m.dim()));
        }
        if pair.dims() != dims {
            return Err(Error::Dimension(format!(
                "conserved pair acts on {:?}, scheme on {:?}",
                pair.dims(),
                dims
            )));
        }
        let d = m.hermiticity_defect();
        if d > crate::linalg::HERMITIAN_INPUT_TOL {
            return Err(Error::Contract(format!("M is not Hermitian (defect {d:.3e})")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("ħ must be positive, got {hbar}")));
        }
        let j = attach_probe(dims, scheme.probe_state());
        let g = scheme.image();
        let ud = scheme.coupling().matrix().adjoint();
        let zf_j = matmul(&ud, &apply_probe_factor(scheme.pointer(), dims, g));
        let mf_j = matmul(&ud, &apply_system_factor(&m, dims, g));
        let m_j = apply_system_factor(&m, dims, &j);
        let noise_j = &zf_j - m_j;
        let repeat_j = mf_j - zf_j;
        let l_j = pair.apply(&j);
        let probe_var_l2 = variance(pair.l2(), scheme.probe_state())?;
        Ok(Self { scheme, m, pair, hbar, noise_j, repeat_j, l_j, probe_var_l2 })
    }

    pub fn scheme(&self) -> &MeasurementScheme {
        &self.scheme
    }
    pub fn target(&self) -> &Operator {
        &self.m
    }
    pub fn pair(&self) -> &ConservedPair {
        &self.pair
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.scheme.dims().system {
            return Err(dim_err("system state", self.scheme.dims().system, psi.dim()));
        }
        Ok(())
    }

    /// `U†(1⊗Z)U` on the joint space.
    pub fn heisenberg_pointer(&self) -> Result<Operator> {
        let dims = self.scheme.dims();
        let u = self.scheme.coupling().matrix();
        let zu = apply_probe_factor(self.scheme.pointer(), dims, u);
        Operator::from_matrix(matmul_adjoint(u, &zu)).map(|o| o.hermitian_part())
    }

    /// `U†(M⊗1)U` on the joint space.
    pub fn heisenberg_system(&self) -> Result<Operator> {
        let dims = self.scheme.dims();
        let u = self.scheme.coupling().matrix();
        let mu = apply_system_factor(&self.m, dims, u);
        Operator::from_matrix(matmul_adjoint(u, &mu)).map(|o| o.hermitian_part())
    }

    /// `ε(ψ)`
    pub fn noise(&self, psi: &StateVector) -> Result<f64> {
        self.check(psi)?;
        Ok((&self.noise_j * psi.vector()).norm())
    }

    /// `μ(ψ)`
    pub fn repeatability_noise(&self, psi: &StateVector) -> Result<f64> {
        self.check(psi)?;
        Ok((&self.repeat_j * psi.vector()).norm())
    }

    /// `ε = sup_ψ ε(ψ)`, the root of the largest eigenvalue of `J†N²J`.
    pub fn global_noise(&self) -> Result<f64> {
        Ok(self.global_of(&self.noise_j, None)?.sqrt())
    }

    /// `μ = sup_ψ μ(ψ)`.
    pub fn global_repeatability(&self) -> Result<f64> {
        Ok(self.global_of(&self.repeat_j, None)?.sqrt())
    }

    /// `sup ε(ψ)²` over unit vectors in the span of `basis` (orthonormal columns).
    pub fn restricted_noise_sq(&self, basis: &CMatrix) -> Result<f64> {
        self.global_of(&self.noise_j, Some(basis))
    }

    /// `sup μ(ψ)²` over the span of `basis`.
    pub fn restricted_repeatability_sq(&self, basis: &CMatrix) -> Result<f64> {
        self.global_of(&self.repeat_j, Some(basis))
    }

    fn global_of(&self, x: &CMatrix, basis: Option<&CMatrix>) -> Result<f64> {
        let y = match basis {
            Some(v) => x * v,
            None => x.clone(),
        };
        let b = Operator::from_matrix(y.adjoint() * &y)?.hermitian_part();
        Ok(max_eigenvalue(&b)?.max(0.0))
    }

    /// `Δ_ψL1² + Δ_φL2²`
    pub fn conserved_variance(&self, psi: &StateVector) -> Result<f64> {
        Ok(variance(self.pair.l1(), psi)? + self.probe_var_l2)
    }

    /// `|⟨Ψ|[X, L]|Ψ⟩|` from `XΨ` and `LΨ`.
    fn commutator_modulus(x_psi: &CVector, l_psi: &CVector) -> f64 {
        // ⟨[X, L]⟩ = 2i·Im⟨XΨ|LΨ⟩ for Hermitian X, L
        2.0 * x_psi.dotc(l_psi).im.abs()
    }

    fn rhs(&self, x: &CMatrix, psi: &StateVector) -> Result<Rhs> {
        self.check(psi)?;
        let x_psi = x * psi.vector();
        let l_psi = &self.l_j * psi.vector();
        let numerator = Self::commutator_modulus(&x_psi, &l_psi);
        let raw = self.conserved_variance(psi)?;
        let floor = self.scheme.tolerances().denominator_floor;
        let degenerate = raw < floor;
        let value = 0.25 * numerator * numerator / raw.max(floor);
        Ok(Rhs { value, numerator, denominator: raw, degenerate })
    }

    /// Right-hand side of Ozawa's inequality for `ε(ψ)²`.
    pub fn ozawa_rhs(&self, psi: &StateVector) -> Result<Rhs> {
        self.rhs(&self.noise_j, psi)
    }

    /// Right-hand side of the repeatability analog for `μ(ψ)²`.
    pub fn mu_rhs(&self, psi: &StateVector) -> Result<Rhs> {
        self.rhs(&self.repeat_j, psi)
    }

    /// Same as [`Self::ozawa_rhs`], by forming every joint operator explicitly.
    /// Meant for cross-checking on small spaces.
    pub fn ozawa_rhs_literal(&self, psi: &StateVector) -> Result<f64> {
        let zf = self.heisenberg_pointer()?;
        let dims = self.scheme.dims();
        let m1 = tensor(&self.m, &Operator::identity(dims.probe))?;
        self.literal_rhs(&(&zf - &m1), psi)
    }

    /// Same as [`Self::mu_rhs`], literally.
    pub fn mu_rhs_literal(&self, psi: &StateVector) -> Result<f64> {
        let x = &self.heisenberg_system()? - &self.heisenberg_pointer()?;
        self.literal_rhs(&x, psi)
    }

    fn literal_rhs(&self, x: &Operator, psi: &StateVector) -> Result<f64> {
        let l = self.pair.joint()?;
        let big = psi.tensor(self.scheme.probe_state());
        let num = expectation(&commutator(x, &l)?, &big)?.norm();
        let den = variance(self.pair.l1(), psi)? + variance(self.pair.l2(), self.scheme.probe_state())?;
        let floor = self.scheme.tolerances().denominator_floor;
        Ok(0.25 * num * num / den.max(floor))
    }

    /// `|⟨ψ|[M, L1]|ψ⟩|²`, the numerator once the Yanase condition and
    /// conservation hold. `None` when either residual exceeds `1e−8`.
    pub fn yanase_numerator(&self, psi: &StateVector) -> Result<Option<f64>> {
        self.check(psi)?;
        let ok = self.scheme.yanase_residual(&self.pair)? <= 1e-8
            && self.scheme.conservation_residual(&self.pair)? <= 1e-8;
        if !ok {
            return Ok(None);
        }
        Ok(Some(yanase_numerator_value(&self.m, self.pair.l1(), psi)?))
    }

    /// `ħ² / (4 Δ_φ L2²)`: the position bound, meaningful for `M = Q`,
    /// `L1 = P`, `L2 = P_A`.
    pub fn position_bound(&self) -> f64 {
        self.hbar * self.hbar / (4.0 * self.probe_var_l2.max(self.scheme.tolerances().denominator_floor))
    }

    /// `Δ_φ L2`
    pub fn probe_spread(&self) -> f64 {
        self.probe_var_l2.sqrt()
    }

    /// One row of pointwise quantities.
    pub fn report(&self, id: usize, psi: &StateVector) -> Result<BoundReport> {
        let epsilon_sq = self.noise(psi)?.powi(2);
        let mu_sq = self.repeatability_noise(psi)?.powi(2);
        let eps = self.ozawa_rhs(psi)?;
        let mu = self.mu_rhs(psi)?;
        Ok(BoundReport {
            state_id: id,
            epsilon_sq,
            rhs_generic: eps.value,
            mu_sq,
            rhs_mu: mu.value,
            slack_eps: epsilon_sq - eps.value,
            slack_mu: mu_sq - mu.value,
            numerator_eps: eps.numerator,
            numerator_mu: mu.numerator,
            degenerate: eps.degenerate,
        })
    }

    /// Reports for `count` seeded Haar-random states; state `i` uses stream `i`.
    pub fn sample_reports(&self, count: usize, seed: u64, exec: Execution) -> Result<Vec<BoundReport>> {
        let dim = self.scheme.dims().system;
        map_indices(count, exec, |i| {
            let psi = haar_state(dim, &mut rng_for(seed, i as u64));
            self.report(i, &psi)
        })
        .into_iter()
        .collect()
    }
}

/// `|⟨ψ|[M, L1]|ψ⟩|²`
pub fn yanase_numerator_value(m: &Operator, l1: &Operator, psi: &StateVector) -> Result<f64> {
    Ok(expectation(&commutator(m, l1)?, psi)?.norm_sqr())
}

/// A right-hand side with its pieces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rhs {
    pub value: f64,
    /// `|⟨[X, L]⟩|`
    pub numerator: f64,
    /// Unfloored `Δ_ψL1² + Δ_φL2²`.
    pub denominator: f64,
    /// The denominator was below the floor.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub state_id: usize,
    pub epsilon_sq: f64,
    pub rhs_generic: f64,
    pub mu_sq: f64,
    pub rhs_mu: f64,
    pub slack_eps: f64,
    pub slack_mu: f64,
    pub numerator_eps: f64,
    pub numerator_mu: f64,
    pub degenerate: bool,
}

/// Aggregate over a sampled ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub count: usize,
    pub min_slack_eps: f64,
    pub min_slack_mu: f64,
    pub max_epsilon_sq: f64,
    pub max_mu_sq: f64,
    /// Largest sampled RHS; a lower bound on its supremum.
    pub max_rhs_eps: f64,
    pub degenerate_rows: usize,
}

pub fn summarize(rows: &[BoundReport]) -> EnsembleSummary {
    let fold = |f: &dyn Fn(&BoundReport) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        rows.iter().map(f).fold(init, pick)
    };
    EnsembleSummary {
        count: rows.len(),
        min_slack_eps: fold(&|r| r.slack_eps, f64::INFINITY, f64::min),
        min_slack_mu: fold(&|r| r.slack_mu, f64::INFINITY, f64::min),
        max_epsilon_sq: fold(&|r| r.epsilon_sq, 0.0, f64::max),
        max_mu_sq: fold(&|r| r.mu_sq, 0.0, f64::max),
        max_rhs_eps: fold(&|r| r.rhs_generic, 0.0, f64::max),
        degenerate_rows: rows.iter().filter(|r| r.degenerate).count(),
    }
}
