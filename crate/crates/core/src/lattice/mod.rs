//! Cyclic lattice model of position and momentum.
//!
//! Sites `x_j = a(j − N/2)`, momenta `k_m = (2πħ/Na)(m − N/2)`, and
//! `P = F† diag(k) F` with the unitary DFT `F_mj = e^{−i k_m x_j/ħ}/√N`.
//! Canonical commutation only holds on states that keep away from the
//! cyclic boundary in both representations; see [`Lattice::is_admissible`].
//!
//! Kernels are indexed by displacement: entry `d` is the weight of the
//! displacement `a(d − N/2)`.

mod nnls;
mod presets;

pub use nnls::{nnls, NnlsSolution};
pub use presets::{
    information_transfer, position_sweep, preset_conserving, preset_covariant, preset_von_neumann,
    preset_yanase, BoundKind, LatticeScheme, PresetKind, SweepConfig, SweepRow,
};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{c, BipartiteDims, CMatrix, CVector, Operator, StateVector, C64};
use crate::scheme::{MeasurementScheme, Povm};

/// Kernel normalization tolerance.
pub const KERNEL_SUM_TOL: f64 = 1e-12;
/// Off-diagonal mass above which an induced POVM is not treated as a
/// smeared position observable.
pub const OFF_DIAGONAL_LIMIT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    sites: usize,
    spacing: f64,
    hbar: f64,
}

impl Lattice {
    pub const DEFAULT_SITES: usize = 32;

    pub fn new(sites: usize, spacing: f64, hbar: f64) -> Result<Self> {
        if sites < 8 || !sites.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "lattice needs an even number of sites ≥ 8, got {sites}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("ħ must be positive, got {hbar}")));
        }
        Ok(Self { sites, spacing, hbar })
    }

    /// 32 sites, unit spacing.
    pub fn standard(hbar: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_SITES, 1.0, hbar)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn dims(&self) -> BipartiteDims {
        BipartiteDims { system: self.sites, probe: self.sites }
    }

    fn centered(&self, j: usize) -> f64 {
        j as f64 - (self.sites / 2) as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        self.spacing * self.centered(j)
    }

    /// Momentum grid step `2πħ/(Na)`.
    pub fn momentum_step(&self) -> f64 {
        2.0 * PI * self.hbar / (self.sites as f64 * self.spacing)
    }

    pub fn momentum(&self, m: usize) -> f64 {
        self.momentum_step() * self.centered(m)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.sites).map(|j| self.position(j)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.sites).map(|m| self.momentum(m)).collect()
    }

    /// Site whose position is `x`, if `x` sits on the grid.
    pub fn site_of(&self, x: f64) -> Option<usize> {
        let u = x / self.spacing + (self.sites / 2) as f64;
        let j = u.round();
        ((u - j).abs() < 1e-6 && j >= 0.0 && (j as usize) < self.sites).then_some(j as usize)
    }

    /// Outcome label for a pointer reading: the site index.
    pub fn site_label(&self, x: f64) -> String {
        match self.site_of(x) {
            Some(j) => j.to_string(),
            None => format!("{x}"),
        }
    }

    pub fn fourier(&self) -> CMatrix {
        let n = self.sites;
        let norm = 1.0 / (n as f64).sqrt();
        CMatrix::from_fn(n, n, |m, j| {
            C64::from_polar(norm, -self.momentum(m) * self.position(j) / self.hbar)
        })
    }

    pub fn position_op(&self) -> Operator {
        Operator::diag(&self.positions())
    }

    pub fn momentum_op(&self) -> Operator {
        let f = self.fourier();
        let mut fk = f.clone();
        for (m, mut row) in fk.row_iter_mut().enumerate() {
            row *= c(self.momentum(m), 0.0);
        }
        Operator::from_matrix(f.adjoint() * fk).expect("square").hermitian_part()
    }

    /// `Q`, `P` and their probe copies.
    pub fn ops(&self) -> LatticeOps {
        let q = self.position_op();
        let p = self.momentum_op();
        LatticeOps { q_a: q.clone(), p_a: p.clone(), q, p }
    }

    /// Site-sampled Gaussian packet `∝ exp(−(x − c)²/(4σ²))`; `σ` is the
    /// position spread of the continuum packet.
    pub fn gaussian(&self, center: f64, width: f64) -> Result<StateVector> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidArgument(format!("packet width must be positive, got {width}")));
        }
        let amps: Vec<f64> = self
            .positions()
            .iter()
            .map(|x| (-(x - center).powi(2) / (4.0 * width * width)).exp())
            .collect();
        StateVector::from_real(&amps)
    }

    /// Momentum-space amplitudes `Fψ`.
    pub fn momentum_amplitudes(&self, psi: &StateVector) -> CVector {
        self.fourier() * psi.vector()
    }

    /// Probability outside the central half of the position and the
    /// momentum grids.
    pub fn boundary_mass(&self, psi: &StateVector) -> Result<BoundaryMass> {
        if psi.dim() != self.sites {
            return Err(dim_err("lattice state", self.sites, psi.dim()));
        }
        let quarter = self.sites as f64 / 4.0;
        let outside = |v: &CVector| -> f64 {
            v.iter()
                .enumerate()
                .filter(|(j, _)| self.centered(*j).abs() >= quarter)
                .map(|(_, a)| a.norm_sqr())
                .sum()
        };
        Ok(BoundaryMass {
            position: outside(psi.vector()),
            momentum: outside(&self.momentum_amplitudes(psi)),
        })
    }

    pub fn is_admissible(&self, psi: &StateVector, tol: &Tolerances) -> Result<bool> {
        let b = self.boundary_mass(psi)?;
        Ok(b.position <= tol.admissible_mass && b.momentum <= tol.admissible_mass)
    }

    /// `|⟨[Q, P]⟩ − iħ|`
    pub fn commutator_defect(&self, psi: &StateVector) -> Result<f64> {
        if psi.dim() != self.sites {
            return Err(dim_err("lattice state", self.sites, psi.dim()));
        }
        let ops = self.ops();
        let qpsi = ops.q.apply(psi.vector());
        let ppsi = ops.p.apply(psi.vector());
        // ⟨[Q, P]⟩ = 2i·Im⟨Qψ|Pψ⟩
        let value = c(0.0, 2.0 * qpsi.dotc(&ppsi).im);
        Ok((value - c(0.0, self.hbar)).norm())
    }
}


#[derive(Clone, Debug)]
pub struct LatticeOps {
    pub q: Operator,
    pub p: Operator,
    pub q_a: Operator,
    pub p_a: Operator,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryMass {
    pub position: f64,
    pub momentum: f64,
}

/// Gaussian packets on a grid of centers and widths.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleFamily {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl Default for AdmissibleFamily {
    fn default() -> Self {
        Self { centers: vec![-2.0, 0.0, 2.0], widths: vec![1.2, 1.5, 2.0] }
    }
}

impl AdmissibleFamily {
    /// Every member, centers outermost. Fails on the first inadmissible one.
    pub fn states(&self, lat: &Lattice, tol: &Tolerances) -> Result<Vec<StateVector>> {
        if self.centers.is_empty() || self.widths.is_empty() {
            return Err(Error::InvalidArgument("admissible family is empty".into()));
        }
        let mut out = Vec::with_capacity(self.centers.len() * self.widths.len());
        for &c0 in &self.centers {
            for &w in &self.widths {
                let psi = lat.gaussian(c0 * lat.spacing(), w * lat.spacing())?;
                if !lat.is_admissible(&psi, tol)? {
                    let b = lat.boundary_mass(&psi)?;
                    return Err(Error::Contract(format!(
                        "packet at {c0} with width {w} is not admissible: boundary mass {:.2e} (position), {:.2e} (momentum) > {:.1e}",
                        b.position, b.momentum, tol.admissible_mass
                    )));
                }
                out.push(psi);
            }
        }
        Ok(out)
    }
}

/// Nonnegative weights over displacements summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SmearKernel {
    weights: Vec<f64>,
}

impl SmearKernel {
    /// Validates nonnegativity, normalization and support within `N/4`
    /// sites of zero displacement, so the cyclic convolution never wraps.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel length must be an even lattice size ≥ 8, got {n}"
            )));
        }
        if let Some((d, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Contract(format!("kernel weight {w} at index {d} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > KERNEL_SUM_TOL {
            return Err(Error::Contract(format!("kernel sums to {sum}, not 1")));
        }
        let half = n / 2;
        let extent = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(d, _)| d.abs_diff(half))
            .max()
            .unwrap_or(0);
        if extent > n / 4 {
            return Err(Error::Contract(format!(
                "kernel support reaches {extent} sites, more than N/4 = {}",
                n / 4
            )));
        }
        Ok(Self { weights })
    }

    pub fn point_mass(sites: usize) -> Result<Self> {
        let mut w = vec![0.0; sites];
        if sites > 0 {
            w[sites / 2] = 1.0;
        }
        Self::new(w)
    }

    /// Uniform over the `2·half_width + 1` sites around zero displacement.
    pub fn uniform(sites: usize, half_width: usize) -> Result<Self> {
        let count = 2 * half_width + 1;
        let mut w = vec![0.0; sites];
        let (lo, hi) = ((sites / 2).saturating_sub(half_width), (sites / 2 + half_width).min(sites.saturating_sub(1)));
        if lo <= hi {
            w[lo..=hi].fill(1.0 / count as f64);
        }
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Standard deviation of the displacement in length units.
    pub fn width(&self, lat: &Lattice) -> f64 {
        displacement_std(lat, &self.weights)
    }
}

fn displacement_std(lat: &Lattice, weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return f64::NAN;
    }
    let mean: f64 = weights.iter().enumerate().map(|(d, w)| w * lat.position(d)).sum::<f64>() / total;
    let var: f64 =
        weights.iter().enumerate().map(|(d, w)| w * (lat.position(d) - mean).powi(2)).sum::<f64>() / total;
    var.max(0.0).sqrt()
}

/// One bin per site, labelled by the site index.
pub fn site_bins(lat: &Lattice) -> Vec<(String, Vec<usize>)> {
    (0..lat.sites()).map(|j| (j.to_string(), vec![j])).collect()
}

/// `Q^e(X) = (χ_X ⊛ e)(Q)`, a diagonal effect per bin.
pub fn smeared_position_povm(
    lat: &Lattice,
    kernel: &SmearKernel,
    bins: &[(String, Vec<usize>)],
    tol: &Tolerances,
) -> Result<Povm> {
    let n = lat.sites();
    if kernel.len() != n {
        return Err(dim_err("smearing kernel", n, kernel.len()));
    }
    let mut seen = vec![false; n];
    for (label, sites) in bins {
        for &j in sites {
            if j >= n {
                return Err(Error::Contract(format!("bin `{label}` names site {j} outside the lattice")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Contract(format!("site {j} appears in more than one bin")));
            }
        }
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(Error::Contract(format!("bins do not cover site {j}")));
    }
    let e = kernel.weights();
    let effects = bins
        .iter()
        .map(|(label, sites)| {
            let diag: Vec<f64> = (0..n)
                .map(|j| sites.iter().map(|&i| e[(j + n + n / 2 - i) % n]).sum())
                .collect();
            (label.clone(), Operator::diag(&diag))
        })
        .collect();
    Povm::new(effects, tol)
}

/// `max |⟨Ψ|[Q⊗1 + sign·1⊗Q_A, P⊗1 + 1⊗P_A]|Ψ⟩|` over joint states.
fn two_body_commutator(lat: &Lattice, states: &[StateVector], sign: f64) -> Result<f64> {
    let dims = lat.dims();
    let ops = lat.ops();
    let mut worst = 0.0f64;
    for psi in states {
        if psi.dim() != dims.joint() {
            return Err(dim_err("joint lattice state", dims.joint(), psi.dim()));
        }
        let col = CMatrix::from_column_slice(dims.joint(), 1, psi.amplitudes());
        let pos = crate::linalg::apply_system_factor(&ops.q, dims, &col)
            + crate::linalg::apply_probe_factor(&ops.q_a, dims, &col) * c(sign, 0.0);
        let mom = crate::linalg::apply_system_factor(&ops.p, dims, &col)
            + crate::linalg::apply_probe_factor(&ops.p_a, dims, &col);
        let value = 2.0 * pos.column(0).dotc(&mom.column(0)).im.abs();
        worst = worst.max(value);
    }
    Ok(worst)
}

/// `max |⟨[Q⊗1 − 1⊗Q_A, P⊗1 + 1⊗P_A]⟩|`; vanishes on admissible states.
pub fn relative_position_check(lat: &Lattice, states: &[StateVector]) -> Result<f64> {
    two_body_commutator(lat, states, -1.0)
}

/// Same with `Q⊗1 + 1⊗Q_A`, which does not commute: about `2ħ`.
pub fn summed_position_check(lat: &Lattice, states: &[StateVector]) -> Result<f64> {
    two_body_commutator(lat, states, 1.0)
}

/// A kernel recovered from an induced POVM.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedKernel {
    /// Displacement-indexed weights, normalized to sum 1.
    pub weights: Vec<f64>,
    /// Standard deviation of the displacement.
    pub width: f64,
    /// NNLS residual `‖Ae − b‖₂`.
    pub residual: f64,
    /// Off-diagonal Frobenius fraction of the effects in the site basis.
    pub off_diagonal: f64,
    /// Set when the POVM is not a smeared position observable.
    pub flagged: bool,
}

/// Deconvolves the site diagonals of a scheme's induced effects against
/// the bin indicators, over the central half of the sites. Outcome labels
/// must be site indices.
pub fn extract_kernel(scheme: &MeasurementScheme, lat: &Lattice) -> Result<ExtractedKernel> {
    extract_kernel_from(&scheme.induced_povm()?, lat)
}

pub fn extract_kernel_from(povm: &Povm, lat: &Lattice) -> Result<ExtractedKernel> {
    let n = lat.sites();
    if povm.dim() != n {
        return Err(dim_err("position POVM", n, povm.dim()));
    }
    let mut bins = Vec::with_capacity(povm.effects().len());
    for (label, _) in povm.effects() {
        let site: usize = label
            .parse()
            .ok()
            .filter(|&j: &usize| j < n)
            .ok_or_else(|| Error::UnknownLabel(format!("`{label}` is not a site index")))?;
        bins.push(site);
    }
    // Only bulk sites enter: wrap-around at the cyclic boundary is not
    // part of the kernel, and admissible states never reach it.
    let bulk: Vec<usize> = (0..n).filter(|&j| j.abs_diff(n / 2) < n / 4).collect();
    let rows = bins.len() * bulk.len();
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DVector::<f64>::zeros(rows);
    let (mut off, mut total) = (0.0, 0.0);
    for (x, ((_, effect), &i)) in povm.effects().iter().zip(&bins).enumerate() {
        let m = effect.matrix();
        for (r, &j) in bulk.iter().enumerate() {
            a[(x * bulk.len() + r, (j + n + n / 2 - i) % n)] = 1.0;
            b[x * bulk.len() + r] = m[(j, j)].re;
            for &k in &bulk {
                let s = m[(j, k)].norm_sqr();
                total += s;
                if j != k {
                    off += s;
                }
            }
        }
    }
    let sol = nnls(&a, &b)?;
    let sum: f64 = sol.x.iter().sum();
    let weights: Vec<f64> = if sum > 0.0 { sol.x.iter().map(|w| w / sum).collect() } else { sol.x.iter().copied().collect() };
    let off_diagonal = if total > 0.0 { (off / total).sqrt() } else { 0.0 };
    let flagged = off_diagonal > OFF_DIAGONAL_LIMIT || sol.residual > OFF_DIAGONAL_LIMIT * b.norm();
    Ok(ExtractedKernel {
        width: displacement_std(lat, &weights),
        weights,
        residual: sol.residual,
        off_diagonal,
        flagged,
    })
}

/// Spearman rank correlation, ties given average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let ranks = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut end = k;
            while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
                end += 1;
            }
            let avg = (k + end) as f64 / 2.0;
            for &i in &idx[k..=end] {
                r[i] = avg;
            }
            k = end + 1;
        }
        r
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests;
