//! Wigner's spin-½ measurement model under `s_z + J_z` conservation.
//!
//! The system is a spin-½ with basis `↑` (index 0, `s_z = +½`) and `↓`
//! (index 1). The probe carries `J_z = diag(0, 1, …, D−1)` with
//! `D = n + 2·buffer`; the initial probe state populates the `n` window levels
//! `buffer..buffer+n`. Joint index is `s·D + j`.
//!
//! `Λ = s_z⊗1 + 1⊗J_z` has one-dimensional sectors `{|↓,0⟩}`, `{|↑,D−1⟩}` and
//! two-dimensional sectors `{|↑,m⟩, |↓,m+1⟩}`, so any conserving coupling is
//! block diagonal.
//!
//! Writing `U(|↑⟩φ) = |↑⟩a + |↓⟩b` and `U(|↓⟩φ) = |↑⟩c + |↓⟩d`, the images of
//! the `s_x` eigenstates take the coupling form
//! `φ_±⊗φ ↦ φ_±⊗φ_± ± φ_∓⊗η` exactly when `a = d`, and then
//! `η = (c − b)/2`, `φ_± = a ± (b + c)/2`.
//!
//! # The search family
//!
//! Every chain sector `m = buffer−1 ..= buffer+n−1` gets the block
//! `[[cosθ, −sinθ·z̄_m], [sinθ·z_m, cosθ]]` with a common angle and unit
//! phases `z_m`; all other sectors act trivially. A common `cosθ` gives
//! `a = d` outright. With `W1_m = w_m·w_{m+1}` and
//! `T = Σ z_{m−1} z_m w_{m−1} w_{m+1}` the orthogonality conditions reduce to
//!
//! * `Σ z_m W1_m = 0`,
//! * `T` real and negative (fixed by a global rotation of the phases),
//! * `sin²θ = 2/(3 + |T|)`,
//!
//! leaving `‖η‖² = (1 − t)/(3 + t)` with `t = |T|`. The search maximizes `t`
//! over the phases (and, for [`Profile::Optimize`], the weights), solving the
//! linear constraint for the two phases with the largest `W1`.

use std::f64::consts::PI;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{c, BipartiteDims, CMatrix, CVector, Operator, StateVector, C64, ONE, ZERO};
use crate::optimize::{multistart, SearchOptions};
use crate::parallel::{map_indices, Execution};
use crate::random::rng_for;
use crate::scheme::{ConservedPair, MeasurementScheme, OutcomeMap, Povm};

pub const DEFAULT_BUFFER: usize = 2;
pub const LABEL_PLUS: &str = "+";
pub const LABEL_MINUS: &str = "-";
pub const LABEL_UNCERTAIN: &str = "?";

/// Which probe amplitudes the search may use.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `w_ν = 1/√n`.
    Uniform,
    /// Weights are searched along with the phases.
    Optimize,
    /// Fixed real weights; must be normalized.
    Custom(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerProbeSpec {
    pub n: usize,
    pub profile: Profile,
    pub buffer: usize,
}

impl WignerProbeSpec {
    pub fn uniform(n: usize) -> Self {
        Self { n, profile: Profile::Uniform, buffer: DEFAULT_BUFFER }
    }

    pub fn optimized(n: usize) -> Self {
        Self { n, profile: Profile::Optimize, buffer: DEFAULT_BUFFER }
    }

    pub fn custom(weights: Vec<f64>) -> Self {
        Self { n: weights.len(), profile: Profile::Custom(weights), buffer: DEFAULT_BUFFER }
    }

    pub fn probe_dim(&self) -> usize {
        self.n + 2 * self.buffer
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("probe needs at least one populated level".into()));
        }
        if self.buffer == 0 {
            return Err(Error::InvalidArgument(
                "buffer must be at least 1 so sector shifts stay inside the probe space".into(),
            ));
        }
        if let Profile::Custom(w) = &self.profile {
            if w.len() != self.n {
                return Err(Error::InvalidArgument(format!(
                    "{} custom weights for n = {}",
                    w.len(),
                    self.n
                )));
            }
            let norm: f64 = w.iter().map(|x| x * x).sum();
            if (norm - 1.0).abs() > 1e-12 || w.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "custom weights must satisfy Σw² = 1 (got {norm})"
                )));
            }
        }
        Ok(())
    }
}

/// Multistart settings for the search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub starts: usize,
    pub seed: u64,
    pub exec: Execution,
    pub options: SearchOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 42,
            exec: Execution::Parallel,
            options: SearchOptions::default(),
        }
    }
}

/// One sector of `Λ`, listed by joint basis indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    pub eigenvalue: f64,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorDecomposition {
    pub probe_dim: usize,
    pub sectors: Vec<Sector>,
}

/// Eigenspaces of `s_z⊗1 + 1⊗J_z` in ascending order.
pub fn build_sectors(probe_dim: usize) -> SectorDecomposition {
    assert!(probe_dim >= 1, "probe dimension must be positive");
    let d = probe_dim;
    let mut sectors = vec![Sector { eigenvalue: -0.5, indices: vec![d] }];
    for m in 0..d - 1 {
        sectors.push(Sector { eigenvalue: m as f64 + 0.5, indices: vec![m, d + m + 1] });
    }
    sectors.push(Sector { eigenvalue: d as f64 - 0.5, indices: vec![d - 1] });
    SectorDecomposition { probe_dim, sectors }
}

/// `(s_z, J_z)` for a probe of dimension `probe_dim`.
pub fn conserved_pair(probe_dim: usize) -> ConservedPair {
    let jz: Vec<f64> = (0..probe_dim).map(|j| j as f64).collect();
    ConservedPair::new(Operator::diag(&[0.5, -0.5]), Operator::diag(&jz)).expect("diagonal")
}

/// `s_x = σx/2`
pub fn spin_x() -> Operator {
    Operator::pauli_x().scale(c(0.5, 0.0))
}

/// `(|↑⟩ ± |↓⟩)/√2`
pub fn sx_eigenstate(sign: f64) -> StateVector {
    StateVector::from_real(&[1.0, sign]).expect("nonzero")
}

/// Reduced-family parameters at one point.
#[derive(Clone, Debug, PartialEq)]
struct ChainPoint {
    /// Phase of each interior pair `(ν, ν+1)` of the window.
    z: Vec<C64>,
    t: f64,
}

/// Solves `Σ z_k W1_k = 0` for the two dominant pairs, given trial phases.
/// Returns the constraint violation on failure.
fn solve_chain(w: &[f64], x: &[f64]) -> std::result::Result<ChainPoint, f64> {
    let n = w.len();
    if n < 2 {
        return Ok(ChainPoint { z: vec![], t: 0.0 });
    }
    let w1: Vec<f64> = (0..n - 1).map(|k| w[k] * w[k + 1]).collect();
    let mut z: Vec<C64> = x.iter().map(|&a| C64::from_polar(1.0, a)).collect();
    let scale = w1.iter().cloned().fold(0.0, f64::max);
    let mut active: Vec<usize> = (0..n - 1).filter(|&k| w1[k] > 1e-14 * scale.max(1e-300)).collect();
    active.sort_by(|&a, &b| w1[b].total_cmp(&w1[a]).then(a.cmp(&b)));

    let t_of = |z: &[C64]| -> f64 {
        let mut acc = ZERO;
        for k in 1..n - 1 {
            acc += z[k - 1] * z[k] * (w[k - 1] * w[k + 1]);
        }
        acc.norm()
    };

    match active.len() {
        0 => {}
        1 => return Err(w1[active[0]]),
        _ => {
            let (i, j) = (active[0], active[1]);
            let rest: C64 = (0..n - 1)
                .filter(|&k| k != i && k != j)
                .map(|k| z[k] * w1[k])
                .sum();
            let (a, b) = (w1[i], w1[j]);
            let r = rest.norm();
            let (lo, hi) = ((a - b).abs(), a + b);
            if r < lo - 1e-15 {
                return Err(lo - r);
            }
            if r > hi + 1e-15 {
                return Err(r - hi);
            }
            if r <= 1e-15 * hi {
                // a == b: the two phases just cancel
                z[j] = -z[i];
            } else {
                let target = -rest;
                let cos_alpha = ((a * a + r * r - b * b) / (2.0 * a * r)).clamp(-1.0, 1.0);
                let alpha = cos_alpha.acos();
                let mut best: Option<(f64, C64, C64)> = None;
                for sign in [1.0, -1.0] {
                    let zi = C64::from_polar(1.0, target.arg() + sign * alpha);
                    let zj = (target - zi * a) / b;
                    let zj = zj / zj.norm();
                    z[i] = zi;
                    z[j] = zj;
                    let t = t_of(&z);
                    if best.is_none_or(|(bt, _, _)| t > bt) {
                        best = Some((t, zi, zj));
                    }
                }
                let (_, zi, zj) = best.expect("two branches");
                z[i] = zi;
                z[j] = zj;
            }
        }
    }
    let t = t_of(&z);
    Ok(ChainPoint { z, t })
}

fn eta_sq_of(t: f64) -> f64 {
    (1.0 - t) / (3.0 + t)
}

/// Objective: `‖η‖²` when feasible, `1 + violation` otherwise.
fn objective(w: &[f64], x: &[f64]) -> f64 {
    match solve_chain(w, x) {
        Ok(p) => eta_sq_of(p.t),
        Err(v) => 1.0 + v,
    }
}

/// Maps unconstrained search variables to normalized nonnegative weights.
fn weights_from(u: &[f64]) -> Option<Vec<f64>> {
    let clipped: Vec<f64> = u.iter().map(|&v| v.max(0.0)).collect();
    let norm = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 1e-12).then(|| clipped.iter().map(|v| v / norm).collect())
}

/// Best point found by the search.
#[derive(Clone, Debug)]
struct SearchOutcome {
    weights: Vec<f64>,
    point: ChainPoint,
}

fn search(spec: &WignerProbeSpec, cfg: &SearchConfig) -> Result<SearchOutcome> {
    spec.validate()?;
    let n = spec.n;
    let n_phases = n.saturating_sub(1);
    let alternating: Vec<f64> = (0..n_phases).map(|k| if k % 2 == 0 { 0.0 } else { PI }).collect();

    let starts_for = |dim_u: usize, structured: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut starts = structured;
        starts.truncate(cfg.starts.max(1));
        for s in starts.len()..cfg.starts.max(1) {
            let mut rng = rng_for(cfg.seed, s as u64);
            use rand::Rng;
            // Negative draws clip to zero weight, so starts also sample sparse profiles.
            let mut v: Vec<f64> = (0..dim_u).map(|_| rng.random_range(-0.5..1.0)).collect();
            v.extend((0..n_phases).map(|_| rng.random_range(-PI..PI)));
            starts.push(v);
        }
        starts
    };

    let (weights, best_x, best_value) = match &spec.profile {
        Profile::Uniform | Profile::Custom(_) => {
            let w = match &spec.profile {
                Profile::Custom(w) => w.clone(),
                _ => vec![1.0 / (n as f64).sqrt(); n],
            };
            let starts = starts_for(0, vec![alternating]);
            let ms = multistart(|x| objective(&w, x), &starts, &cfg.options, cfg.exec);
            let best = ms.best();
            (w, best.x.clone(), best.value)
        }
        Profile::Optimize => {
            // Structured starts: a sine over all levels, and sines over each
            // parity class alone. On one parity class every W1 vanishes, a
            // region the pattern search cannot reach by single-coordinate moves.
            let sine = |levels: &[usize]| -> Vec<f64> {
                let mut u = vec![-1.0; n];
                for (i, &k) in levels.iter().enumerate() {
                    u[k] = (PI * (i + 1) as f64 / (levels.len() + 1) as f64).sin();
                }
                u.extend(alternating.iter().copied());
                u
            };
            let all: Vec<usize> = (0..n).collect();
            let even: Vec<usize> = (0..n).step_by(2).collect();
            let odd: Vec<usize> = (1..n).step_by(2).collect();
            let mut structured = vec![sine(&all), sine(&even)];
            if !odd.is_empty() {
                structured.push(sine(&odd));
            }
            let starts = starts_for(n, structured);
            let f = |v: &[f64]| match weights_from(&v[..n]) {
                Some(w) => objective(&w, &v[n..]),
                None => 2.0,
            };
            let ms = multistart(f, &starts, &cfg.options, cfg.exec);
            let best = ms.best();
            let w = weights_from(&best.x[..n]).ok_or_else(|| Error::Construction {
                message: "profile search collapsed to zero weights".into(),
                residual: 1.0,
            })?;
            (w, best.x[n..].to_vec(), best.value)
        }
    };

    match solve_chain(&weights, &best_x) {
        Ok(point) => Ok(SearchOutcome { weights, point }),
        Err(violation) => Err(Error::Construction {
            message: format!(
                "no coupling of the required form exists in the search family for n = {n} \
                 (best objective {best_value:.6})"
            ),
            residual: violation,
        }),
    }
}

/// A constructed Wigner model.
#[derive(Clone, Debug)]
pub struct WignerModel {
    pub spec: WignerProbeSpec,
    /// Window amplitudes of the initial probe state.
    pub weights: Vec<f64>,
    /// Joint coupling.
    pub u: Operator,
    /// Probe vector paired with `φ_+` in the coupling display. Norm² is `1 − ‖η‖²`.
    pub pointer_plus: CVector,
    pub pointer_minus: CVector,
    pub eta: CVector,
    pub eta_sq: f64,
    /// `‖a − d‖`: how far the images are from the coupling form.
    pub form_residual: f64,
    pub conservation_residual: f64,
    pub scheme: MeasurementScheme,
}

impl WignerModel {
    pub fn probe_dim(&self) -> usize {
        self.spec.probe_dim()
    }

    pub fn pointer_plus_unit(&self) -> CVector {
        &self.pointer_plus / c(self.pointer_plus.norm(), 0.0)
    }

    pub fn pointer_minus_unit(&self) -> CVector {
        &self.pointer_minus / c(self.pointer_minus.norm(), 0.0)
    }

    /// `(|⟨η|φ_+⟩|, |⟨η|φ_−⟩|, |⟨φ_+|φ_−⟩|)`
    pub fn orthogonality(&self) -> [f64; 3] {
        [
            self.eta.dotc(&self.pointer_plus).norm(),
            self.eta.dotc(&self.pointer_minus).norm(),
            self.pointer_plus.dotc(&self.pointer_minus).norm(),
        ]
    }

    pub fn conserved_pair(&self) -> ConservedPair {
        conserved_pair(self.probe_dim())
    }

    /// Metric context with `M = s_x` and the conserved `J_z`.
    pub fn context(&self, hbar: f64) -> Result<crate::metrics::MetricContext> {
        crate::metrics::MetricContext::new(self.scheme.clone(), spin_x(), self.conserved_pair(), hbar)
    }
}

/// Images `(a, b, c, d)` of `|↑⟩φ` and `|↓⟩φ`.
fn images(u: &CMatrix, phi: &CVector) -> [CVector; 4] {
    let d = phi.len();
    let col = |s: usize| -> CVector {
        let mut v = CVector::zeros(2 * d);
        for j in 0..d {
            let amp = phi[j];
            if amp != ZERO {
                v += u.column(s * d + j) * amp;
            }
        }
        v
    };
    let (up, down) = (col(0), col(1));
    [
        up.rows(0, d).into_owned(),
        up.rows(d, d).into_owned(),
        down.rows(0, d).into_owned(),
        down.rows(d, d).into_owned(),
    ]
}

fn assemble(spec: &WignerProbeSpec, found: &SearchOutcome, tol: &Tolerances) -> Result<WignerModel> {
    let (n, buffer) = (spec.n, spec.buffer);
    let d = spec.probe_dim();
    let w = &found.weights;

    // Rotate every phase by κ so that T becomes −|T|; T is quadratic in z.
    let mut tsum = ZERO;
    for k in 1..n.saturating_sub(1) {
        tsum += found.point.z[k - 1] * found.point.z[k] * (w[k - 1] * w[k + 1]);
    }
    let kappa = if tsum.norm() > 0.0 { (PI - tsum.arg()) / 2.0 } else { 0.0 };
    let rot = C64::from_polar(1.0, kappa);
    let t = tsum.norm();
    let s2 = 2.0 / (3.0 + t);
    let (sn, cs) = (s2.sqrt(), (1.0 - s2).sqrt());

    let mut u = CMatrix::identity(2 * d, 2 * d);
    // chain sectors m = buffer−1 ..= buffer+n−1; interior pair k sits at m = buffer+k
    for m in buffer - 1..buffer + n {
        let z = if m >= buffer && m - buffer < n.saturating_sub(1) {
            found.point.z[m - buffer] * rot
        } else {
            ONE
        };
        let (up, dn) = (m, d + m + 1);
        u[(up, up)] = c(cs, 0.0);
        u[(dn, up)] = z * sn;
        u[(up, dn)] = -z.conj() * sn;
        u[(dn, dn)] = c(cs, 0.0);
    }

    let mut phi = CVector::zeros(d);
    for (k, &wk) in w.iter().enumerate() {
        phi[buffer + k] = c(wk, 0.0);
    }

    let plus_of = |u: &CMatrix| {
        let [a, b, cc, dd] = images(u, &phi);
        let half = c(0.5, 0.0);
        let mid = (&a + &dd) * half;
        let cross = (&b + &cc) * half;
        (&mid + &cross, &mid - &cross, (&cc - &b) * half, (&a - &dd).norm())
    };

    // Gauge: first nonzero coordinate of φ_+ real and positive.
    let (p0, _, _, _) = plus_of(&u);
    let cutoff = 1e-12 * p0.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if let Some(first) = p0.iter().find(|z| z.norm() > cutoff) {
        let phase = C64::from_polar(1.0, -first.arg());
        u *= phase;
    }
    let (pp, pm, eta, form_residual) = plus_of(&u);
    let eta_sq = eta.norm_squared();

    let u = Operator::from_matrix(u)?;
    let pair = conserved_pair(d);
    let phi_state = StateVector::normalized(phi)?;

    let unit_p = &pp / c(pp.norm(), 0.0);
    let unit_m = &pm / c(pm.norm(), 0.0);
    let z = Operator::from_matrix(&unit_p * unit_p.adjoint() - &unit_m * unit_m.adjoint())?.hermitian_part();
    let h_values = crate::scheme::spectral_projectors(&z, tol.degeneracy)?.values;
    let h = OutcomeMap::by_value(&h_values, |v| {
        if v > 0.5 {
            LABEL_PLUS
        } else if v < -0.5 {
            LABEL_MINUS
        } else {
            LABEL_UNCERTAIN
        }
        .to_string()
    })?;
    let scheme = MeasurementScheme::new(BipartiteDims::new(2, d)?, u.clone(), phi_state, z, h, tol)?;
    let conservation_residual = scheme.conservation_residual(&pair)?;

    let model = WignerModel {
        spec: spec.clone(),
        weights: w.clone(),
        u,
        pointer_plus: pp,
        pointer_minus: pm,
        eta,
        eta_sq,
        form_residual,
        conservation_residual,
        scheme,
    };

    let worst = model
        .orthogonality()
        .into_iter()
        .chain([form_residual, conservation_residual])
        .fold(0.0, f64::max);
    if worst > tol.wigner_residual {
        return Err(Error::Construction {
            message: format!("model for n = {n} misses the coupling constraints"),
            residual: worst,
        });
    }
    Ok(model)
}

/// Searches the family and assembles the best model.
pub fn build_wigner_model(spec: &WignerProbeSpec, cfg: &SearchConfig, tol: &Tolerances) -> Result<WignerModel> {
    let found = search(spec, cfg)?;
    assemble(spec, &found, tol)
}

/// Smallest `‖η‖²` reachable in the search family.
pub fn minimal_eta_norm(spec: &WignerProbeSpec, cfg: &SearchConfig) -> Result<f64> {
    Ok(eta_sq_of(search(spec, cfg)?.point.t))
}

/// `E_± = (1 − ‖η‖²)·P[φ_±]`, `E_? = ‖η‖²·1` on the spin.
pub fn effects_from_model(model: &WignerModel) -> Povm {
    let keep = c(1.0 - model.eta_sq, 0.0);
    let effects = vec![
        (LABEL_MINUS.to_string(), Operator::projector(&sx_eigenstate(-1.0)).scale(keep)),
        (LABEL_UNCERTAIN.to_string(), Operator::identity(2).scale(c(model.eta_sq, 0.0))),
        (LABEL_PLUS.to_string(), Operator::projector(&sx_eigenstate(1.0)).scale(keep)),
    ];
    Povm::unchecked(effects).expect("same dimension")
}

/// `1/(2n − 1)`
pub fn formula(n: usize) -> f64 {
    1.0 / (2.0 * n as f64 - 1.0)
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub n: usize,
    /// `Err` carries the construction failure for this `n`.
    pub model: std::result::Result<ScalingValues, Error>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingValues {
    pub eta_sq: f64,
    pub formula: f64,
    pub ratio: f64,
    pub conservation_residual: f64,
    pub form_residual: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln ‖η‖²` against `ln n` over successful rows.
    pub slope: Option<f64>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Builds a model for each `n` in `n_min..=n_max` and fits the log-log slope.
pub fn scaling_study(
    n_min: usize,
    n_max: usize,
    profile: &Profile,
    cfg: &SearchConfig,
    tol: &Tolerances,
) -> Result<ScalingStudy> {
    if !(1 <= n_min && n_min <= n_max && n_max <= 24) {
        return Err(Error::InvalidArgument(format!(
            "scaling range must satisfy 1 ≤ n_min ≤ n_max ≤ 24, got {n_min}..={n_max}"
        )));
    }
    if matches!(profile, Profile::Custom(_)) {
        return Err(Error::InvalidArgument("scaling studies take uniform or optimized profiles".into()));
    }
    let count = n_max - n_min + 1;
    // Rows run concurrently; each row's multistart then runs sequentially.
    let inner = SearchConfig { exec: Execution::Sequential, ..cfg.clone() };
    let rows = map_indices(count, cfg.exec, |i| {
        let n = n_min + i;
        let spec = WignerProbeSpec { n, profile: profile.clone(), buffer: DEFAULT_BUFFER };
        let model = build_wigner_model(&spec, &inner, tol).map(|m| ScalingValues {
            eta_sq: m.eta_sq,
            formula: formula(n),
            ratio: m.eta_sq / formula(n),
            conservation_residual: m.conservation_residual,
            form_residual: m.form_residual,
            weights: m.weights,
        });
        ScalingRow { n, model }
    });
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.model.as_ref().ok().map(|v| ((r.n as f64).ln(), v.eta_sq.ln())))
        .unzip();
    let slope = fit_slope(&xs, &ys);
    Ok(ScalingStudy { rows, slope })
}

#[cfg(test)]
mod tests;
