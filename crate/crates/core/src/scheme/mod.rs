//! Measurement schemes `⟨K, U, φ, Z, h⟩`.
//!
//! A scheme couples a system to a probe prepared in `φ`, evolves with `U`
//! and reads the pointer `Z`; `h` groups pointer eigenvalues into outcome
//! labels. From this we derive the induced POVM, outcome-conditional system
//! states and the conservation and Yanase residuals.

pub mod format;

use crate::config::Tolerances;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    apply_probe_factor, apply_system_factor, attach_probe, c, hermitian_eig, max_abs, tensor,
    BipartiteDims, CMatrix, DensityOperator, Operator, StateVector, ZERO,
};

/// Partition of pointer eigenvalue indices into labelled outcomes.
///
/// Indices refer to the distinct eigenvalues of `Z` in ascending order,
/// after merging near-degenerate ones.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeMap {
    outcomes: Vec<(String, Vec<usize>)>,
}

impl OutcomeMap {
    /// Validates disjointness, totality over `0..n_indices` and label uniqueness.
    pub fn new(outcomes: Vec<(String, Vec<usize>)>, n_indices: usize) -> Result<Self> {
        let mut seen = vec![false; n_indices];
        for (i, (label, idx)) in outcomes.iter().enumerate() {
            if outcomes[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::Contract(format!("duplicate outcome label `{label}`")));
            }
            for &k in idx {
                if k >= n_indices {
                    return Err(Error::Contract(format!(
                        "label `{label}` refers to pointer index {k}, but Z has {n_indices} distinct eigenvalues"
                    )));
                }
                if seen[k] {
                    return Err(Error::Contract(format!("pointer index {k} mapped twice")));
                }
                seen[k] = true;
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Contract(format!("pointer index {k} has no outcome label")));
        }
        Ok(Self { outcomes })
    }

    /// One outcome per distinct eigenvalue, labelled by `label(value)`.
    pub fn by_value(values: &[f64], label: impl Fn(f64) -> String) -> Result<Self> {
        let outcomes = values
            .iter()
            .enumerate()
            .map(|(k, &v)| (label(v), vec![k]))
            .collect();
        Self::new(outcomes, values.len())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|(l, _)| l.as_str())
    }

    pub fn entries(&self) -> &[(String, Vec<usize>)] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }
}

/// Distinct eigenvalues of a Hermitian operator with their spectral projectors.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub projectors: Vec<Operator>,
}

/// Groups eigenvalues closer than `merge_tol` (chained) into single entries.
pub fn spectral_projectors(a: &Operator, merge_tol: f64) -> Result<Spectrum> {
    let eig = hermitian_eig(a)?;
    let n = a.dim();
    let mut values = Vec::new();
    let mut projectors: Vec<CMatrix> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    let mut count = 0usize;
    for (k, &lam) in eig.values.iter().enumerate() {
        if values.is_empty() || lam - last > merge_tol {
            if count > 0 {
                let v = values.len() - 1;
                values[v] /= count as f64;
            }
            values.push(0.0);
            projectors.push(CMatrix::zeros(n, n));
            count = 0;
        }
        let v = eig.vector(k);
        let slot = values.len() - 1;
        values[slot] += lam;
        projectors[slot] += &v * v.adjoint();
        count += 1;
        last = lam;
    }
    let v = values.len() - 1;
    values[v] /= count as f64;
    Ok(Spectrum {
        values,
        projectors: projectors
            .into_iter()
            .map(|p| Operator::from_matrix(p).expect("square"))
            .collect(),
    })
}

/// Finite list of labelled effects.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<(String, Operator)>,
}

impl Povm {
    /// Validates Hermiticity, positivity and completeness.
    pub fn new(effects: Vec<(String, Operator)>, tol: &Tolerances) -> Result<Self> {
        let povm = Self::unchecked(effects)?;
        for (label, e) in &povm.effects {
            let d = e.hermiticity_defect();
            if d > tol.hermitian {
                return Err(Error::Contract(format!(
                    "effect `{label}` is not Hermitian (defect {d:.3e})"
                )));
            }
        }
        let lo = povm.min_eigenvalue()?;
        if lo < -tol.positivity {
            return Err(Error::Contract(format!(
                "POVM has an effect with eigenvalue {lo:.3e} < 0"
            )));
        }
        let r = povm.completeness_residual();
        if r > tol.completeness {
            return Err(Error::Contract(format!(
                "POVM completeness residual ‖ΣE − 1‖ = {r:.3e} exceeds {:.1e}",
                tol.completeness
            )));
        }
        Ok(povm)
    }

    /// Only checks that the effects share a dimension.
    pub fn unchecked(effects: Vec<(String, Operator)>) -> Result<Self> {
        let dim = effects
            .first()
            .map(|(_, e)| e.dim())
            .ok_or_else(|| Error::Contract("a POVM needs at least one effect".into()))?;
        if let Some((l, e)) = effects.iter().find(|(_, e)| e.dim() != dim) {
            return Err(dim_err(&format!("effect `{l}`"), dim, e.dim()));
        }
        Ok(Self { effects })
    }

    pub fn dim(&self) -> usize {
        self.effects[0].1.dim()
    }

    pub fn effects(&self) -> &[(String, Operator)] {
        &self.effects
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.effects.iter().map(|(l, _)| l.as_str())
    }

    pub fn effect(&self, label: &str) -> Result<&Operator> {
        self.effects
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, e)| e)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// `‖Σ E − 1‖_max`
    pub fn completeness_residual(&self) -> f64 {
        let n = self.dim();
        let mut sum = CMatrix::zeros(n, n);
        for (_, e) in &self.effects {
            sum += e.matrix();
        }
        max_abs(&(sum - CMatrix::identity(n, n)))
    }

    /// Smallest eigenvalue over all effects.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (_, e) in &self.effects {
            lo = lo.min(hermitian_eig(&e.hermitian_part())?.values[0]);
        }
        Ok(lo)
    }

    /// `⟨ψ|E(X)|ψ⟩` for every label, in order.
    pub fn probabilities(&self, psi: &StateVector) -> Result<Vec<f64>> {
        if psi.dim() != self.dim() {
            return Err(dim_err("state", self.dim(), psi.dim()));
        }
        Ok(self
            .effects
            .iter()
            .map(|(_, e)| psi.vector().dotc(&(e.matrix() * psi.vector())).re)
            .collect())
    }

    /// `Σ_X value(X)·E(X)` when every label parses as a number.
    pub fn first_moment(&self) -> Option<Operator> {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (l, e) in &self.effects {
            let v: f64 = l.trim().parse().ok()?;
            m += e.matrix() * c(v, 0.0);
        }
        Operator::from_matrix(m).ok()
    }
}

/// Observables `L1` (system) and `L2` (probe) whose sum is conserved.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedPair {
    l1: Operator,
    l2: Operator,
}

impl ConservedPair {
    pub fn new(l1: Operator, l2: Operator) -> Result<Self> {
        for (name, op) in [("L1", &l1), ("L2", &l2)] {
            let d = op.hermiticity_defect();
            if d > crate::linalg::HERMITIAN_INPUT_TOL {
                return Err(Error::Contract(format!("{name} is not Hermitian (defect {d:.3e})")));
            }
        }
        Ok(Self { l1, l2 })
    }

    pub fn l1(&self) -> &Operator {
        &self.l1
    }

    pub fn l2(&self) -> &Operator {
        &self.l2
    }

    pub fn dims(&self) -> BipartiteDims {
        BipartiteDims {
            system: self.l1.dim(),
            probe: self.l2.dim(),
        }
    }

    /// `L1 ⊗ 1 + 1 ⊗ L2`
    pub fn joint(&self) -> Result<Operator> {
        let a = tensor(&self.l1, &Operator::identity(self.l2.dim()))?;
        let b = tensor(&Operator::identity(self.l1.dim()), &self.l2)?;
        Ok(&a + &b)
    }

    /// `L·X` for a joint block without forming the joint operator.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let dims = self.dims();
        apply_system_factor(&self.l1, dims, x) + apply_probe_factor(&self.l2, dims, x)
    }
}

/// Outcome-conditional system state.
#[derive(Clone, Debug)]
pub struct ConditionalStateReport {
    pub label: String,
    /// Unnormalized `ρ_X`.
    pub rho: Operator,
    pub probability: f64,
    /// `ρ_X / tr ρ_X`, absent for (near) zero-probability outcomes.
    pub rho_hat: Option<DensityOperator>,
}

/// A validated measurement scheme.
#[derive(Clone, Debug)]
pub struct MeasurementScheme {
    dims: BipartiteDims,
    u: Operator,
    phi: StateVector,
    z: Operator,
    h: OutcomeMap,
    tol: Tolerances,
    spectrum: Spectrum,
    /// Pointer projector per label, in `h` order.
    pointer: Vec<Operator>,
    /// `U·J`: column `s` is `U(|s⟩⊗φ)`.
    image: CMatrix,
}

impl MeasurementScheme {
    pub fn new(
        dims: BipartiteDims,
        u: Operator,
        phi: StateVector,
        z: Operator,
        h: OutcomeMap,
        tol: &Tolerances,
    ) -> Result<Self> {
        if u.dim() != dims.joint() {
            return Err(dim_err("coupling U", dims.joint(), u.dim()));
        }
        if phi.dim() != dims.probe {
            return Err(dim_err("probe state", dims.probe, phi.dim()));
        }
        if z.dim() != dims.probe {
            return Err(dim_err("pointer Z", dims.probe, z.dim()));
        }
        let defect = u.unitarity_defect();
        if defect > tol.unitarity {
            return Err(Error::Contract(format!(
                "coupling is not unitary: ‖U†U − 1‖_max = {defect:.3e} > {:.1e}",
                tol.unitarity
            )));
        }
        let zh = z.hermiticity_defect();
        if zh > tol.hermitian {
            return Err(Error::Contract(format!("pointer Z is not Hermitian (defect {zh:.3e})")));
        }
        let spectrum = spectral_projectors(&z, tol.degeneracy)?;
        // Revalidate the map against the merged spectrum.
        let h = OutcomeMap::new(h.outcomes, spectrum.values.len())?;
        let pointer = h
            .entries()
            .iter()
            .map(|(_, idx)| {
                let mut p = CMatrix::zeros(dims.probe, dims.probe);
                for &k in idx {
                    p += spectrum.projectors[k].matrix();
                }
                Operator::from_matrix(p).expect("square")
            })
            .collect();
        let image = crate::linalg::matmul(u.matrix(), &attach_probe(dims, &phi));
        Ok(Self {
            dims,
            u,
            phi,
            z,
            h,
            tol: tol.clone(),
            spectrum,
            pointer,
            image,
        })
    }

    /// Scheme whose outcomes are the distinct pointer eigenvalues, labelled
    /// by `label(value)`.
    pub fn with_value_labels(
        dims: BipartiteDims,
        u: Operator,
        phi: StateVector,
        z: Operator,
        tol: &Tolerances,
        label: impl Fn(f64) -> String,
    ) -> Result<Self> {
        let spec = spectral_projectors(&z, tol.degeneracy)?;
        let h = OutcomeMap::by_value(&spec.values, label)?;
        Self::new(dims, u, phi, z, h, tol)
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }
    pub fn coupling(&self) -> &Operator {
        &self.u
    }
    pub fn probe_state(&self) -> &StateVector {
        &self.phi
    }
    pub fn pointer(&self) -> &Operator {
        &self.z
    }
    pub fn outcome_map(&self) -> &OutcomeMap {
        &self.h
    }
    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }
    /// Distinct pointer eigenvalues, ascending.
    pub fn pointer_values(&self) -> &[f64] {
        &self.spectrum.values
    }
    /// `U·J` with `J: ψ ↦ ψ⊗φ`.
    pub fn image(&self) -> &CMatrix {
        &self.image
    }

    fn check_system_state(&self, psi: &StateVector) -> Result<()> {
        if psi.dim() != self.dims.system {
            return Err(dim_err("system state", self.dims.system, psi.dim()));
        }
        Ok(())
    }

    /// `Ψ_f = U(ψ ⊗ φ)`
    pub fn final_state(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_system_state(psi)?;
        StateVector::normalized(&self.image * psi.vector())
    }

    /// Sum of the pointer eigenprojectors mapped to `label`.
    pub fn pointer_projector(&self, label: &str) -> Result<&Operator> {
        Ok(&self.pointer[self.h.position(label)?])
    }

    /// Pointer projectors in outcome order.
    pub fn pointer_projectors(&self) -> &[Operator] {
        &self.pointer
    }

    /// `E(X) = J† U† (1 ⊗ Π_X) U J` for every label.
    pub fn induced_povm(&self) -> Result<Povm> {
        let effects = self
            .h
            .labels()
            .zip(&self.pointer)
            .map(|(label, p)| {
                let projected = apply_probe_factor(p, self.dims, &self.image);
                let e = self.image.adjoint() * projected;
                let e = Operator::from_matrix(e).expect("square").hermitian_part();
                (label.to_string(), e)
            })
            .collect();
        Povm::new(effects, &self.tol).map_err(|err| match err {
            Error::Contract(m) => Error::Contract(format!(
                "induced POVM invalid (non-total h or non-unitary U?): {m}"
            )),
            other => other,
        })
    }

    /// Pointer statistics `⟨Ψ_f|1⊗Π_X|Ψ_f⟩` for every label.
    pub fn pointer_probabilities(&self, psi: &StateVector) -> Result<Vec<f64>> {
        let fin = self.final_state(psi)?;
        let col = CMatrix::from_column_slice(fin.dim(), 1, fin.amplitudes());
        Ok(self
            .pointer
            .iter()
            .map(|p| {
                let projected = apply_probe_factor(p, self.dims, &col);
                col.column(0).dotc(&projected.column(0)).re
            })
            .collect())
    }

    /// Largest deviation between pointer statistics and `target` over the test states.
    pub fn reproducibility_deviation(&self, target: &Povm, states: &[StateVector]) -> Result<f64> {
        let labels: Vec<&str> = self.h.labels().collect();
        let target_labels: Vec<&str> = target.labels().collect();
        let mut sorted_a = labels.clone();
        let mut sorted_b = target_labels.clone();
        sorted_a.sort_unstable();
        sorted_b.sort_unstable();
        if sorted_a != sorted_b {
            return Err(Error::Contract(format!(
                "target labels {target_labels:?} do not match scheme labels {labels:?}"
            )));
        }
        let mut worst = 0.0f64;
        for psi in states {
            let pointer = self.pointer_probabilities(psi)?;
            for (label, p) in labels.iter().zip(pointer) {
                let e = target.effect(label)?;
                let q = psi.vector().dotc(&(e.matrix() * psi.vector())).re;
                worst = worst.max((p - q).abs());
            }
        }
        Ok(worst)
    }

    /// `ρ_X = Tr_K[(1⊗Π_X)|Ψ_f⟩⟨Ψ_f|(1⊗Π_X)]` for every label.
    pub fn conditional_states(&self, psi: &StateVector) -> Result<Vec<ConditionalStateReport>> {
        let fin = self.final_state(psi)?;
        let (ds, dp) = (self.dims.system, self.dims.probe);
        // Ψ_f reshaped as a ds × dp matrix, so (1⊗Π)Ψ_f ↦ W Πᵀ.
        let w = CMatrix::from_fn(ds, dp, |s, p| fin.vector()[s * dp + p]);
        self.h
            .labels()
            .zip(&self.pointer)
            .map(|(label, p)| {
                let wp = &w * p.matrix().transpose();
                let rho = Operator::from_matrix(&wp * wp.adjoint())?.hermitian_part();
                let probability = rho.trace().re;
                let rho_hat = if probability > self.tol.probability_floor {
                    Some(DensityOperator::new(
                        rho.scale(c(1.0 / probability, 0.0)),
                    )?)
                } else {
                    None
                };
                Ok(ConditionalStateReport {
                    label: label.to_string(),
                    rho,
                    probability,
                    rho_hat,
                })
            })
            .collect()
    }

    /// Largest `|tr[ρ̂_X E(X)] − 1|` over outcomes with non-negligible probability.
    pub fn repeatability_deviation(&self, states: &[StateVector]) -> Result<f64> {
        let povm = self.induced_povm()?;
        let mut worst = 0.0f64;
        for psi in states {
            for rep in self.conditional_states(psi)? {
                if rep.probability <= self.tol.repeatability_floor {
                    continue;
                }
                let hat = rep.rho_hat.as_ref().expect("probability above floor");
                let e = povm.effect(&rep.label)?;
                let t = crate::linalg::expectation(e, hat)?.re;
                worst = worst.max((t - 1.0).abs());
            }
        }
        Ok(worst)
    }

    /// Same quantity evaluated on the joint state:
    /// `|⟨Ψ_f|E(X)⊗Π_X|Ψ_f⟩ / p_X − 1|`, with `p_X = ⟨Ψ_f|1⊗Π_X|Ψ_f⟩`.
    pub fn repeatability_deviation_joint(&self, states: &[StateVector]) -> Result<f64> {
        let povm = self.induced_povm()?;
        let mut worst = 0.0f64;
        for psi in states {
            let fin = self.final_state(psi)?;
            let col = CMatrix::from_column_slice(fin.dim(), 1, fin.amplitudes());
            for ((_, e), p) in povm.effects().iter().zip(&self.pointer) {
                let pi_f = apply_probe_factor(p, self.dims, &col);
                let prob = col.column(0).dotc(&pi_f.column(0)).re;
                if prob <= self.tol.repeatability_floor {
                    continue;
                }
                let both = apply_system_factor(e, self.dims, &pi_f);
                let joint = col.column(0).dotc(&both.column(0)).re;
                worst = worst.max((joint / prob - 1.0).abs());
            }
        }
        Ok(worst)
    }

    /// `‖U†(L1⊗1 + 1⊗L2)U − (L1⊗1 + 1⊗L2)‖_max`
    pub fn conservation_residual(&self, pair: &ConservedPair) -> Result<f64> {
        if pair.dims() != self.dims {
            return Err(Error::Dimension(format!(
                "conserved pair acts on {:?}, scheme on {:?}",
                pair.dims(),
                self.dims
            )));
        }
        let u = self.u.matrix();
        let lu = pair.apply(u);
        let conj = crate::linalg::matmul_adjoint(u, &lu);
        let mut diff = conj;
        // subtract L without forming it densely
        let (ds, dp) = (self.dims.system, self.dims.probe);
        let (l1, l2) = (pair.l1.matrix(), pair.l2.matrix());
        for s in 0..ds {
            for t in 0..ds {
                let w = l1[(s, t)];
                if w != ZERO {
                    for p in 0..dp {
                        diff[(s * dp + p, t * dp + p)] -= w;
                    }
                }
            }
            for p in 0..dp {
                for q in 0..dp {
                    diff[(s * dp + p, s * dp + q)] -= l2[(p, q)];
                }
            }
        }
        Ok(max_abs(&diff))
    }

    /// `‖[Z, L2]‖_max`
    pub fn yanase_residual(&self, pair: &ConservedPair) -> Result<f64> {
        if pair.l2.dim() != self.dims.probe {
            return Err(dim_err("L2", self.dims.probe, pair.l2.dim()));
        }
        Ok(crate::linalg::commutator(&self.z, &pair.l2)?.max_abs())
    }

    /// Same scheme with `U → (1⊗W)U(1⊗W†)`-style probe relabelling:
    /// `U' = (1⊗W)U`, `Z' = W Z W†`. Statistics are unchanged.
    pub fn rotate_probe_readout(&self, w: &Operator) -> Result<Self> {
        if w.dim() != self.dims.probe {
            return Err(dim_err("probe rotation", self.dims.probe, w.dim()));
        }
        let u = Operator::from_matrix(apply_probe_factor(w, self.dims, self.u.matrix()))?;
        let z = (&(w * &self.z) * &w.adjoint()).hermitian_part();
        Self::new(self.dims, u, self.phi.clone(), z, self.h.clone(), &self.tol)
    }
}
