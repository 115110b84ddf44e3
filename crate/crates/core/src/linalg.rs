//! Dense complex linear algebra on finite-dimensional Hilbert spaces.
//!
//! Joint spaces are always system-major: the basis index of `|s⟩⊗|p⟩`
//! is `s * dim_probe + p`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::DEFAULT_MAX_JOINT_DIM;
use crate::error::{dim_err, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Hermiticity threshold for the [`Operator::is_hermitian`] predicate.
pub const HERMITIAN_PREDICATE_TOL: f64 = 1e-12;
/// Threshold used by the spectral routines and by [`variance`].
pub const HERMITIAN_INPUT_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `A·B` through the blocked complex kernel of `matrixmultiply`.
///
/// nalgebra's generic complex product is several times slower at the
/// 1024-dimensional joint spaces of the lattice presets.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul dimension mismatch");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut out = CMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    // SAFETY: Complex<f64> is #[repr(C)] { re, im }, layout-identical to
    // [f64; 2]. nalgebra storage is column-major and contiguous, so element
    // (i, j) sits at offset i + j·rows. `out` does not alias the inputs.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    out
}

/// `A†·B`
pub fn matmul_adjoint(a: &CMatrix, b: &CMatrix) -> CMatrix {
    matmul(&a.adjoint(), b)
}

/// Square complex matrix. Hermiticity is queryable, not enforced.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: CMatrix,
}

impl Operator {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Contract("operator has non-finite entries".into()));
        }
        Ok(Self { m })
    }

    /// Builds from row-major entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows of unequal length".into()));
        }
        Self::from_matrix(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self {
            m: CMatrix::from_diagonal(&CVector::from_iterator(
                values.len(),
                values.iter().map(|&x| c(x, 0.0)),
            )),
        }
    }

    /// `|ψ⟩⟨ψ|`
    pub fn projector(psi: &StateVector) -> Self {
        let v = psi.vector();
        Self { m: v * v.adjoint() }
    }

    pub fn pauli_x() -> Self {
        Self::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap()
    }
    pub fn pauli_y() -> Self {
        Self::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]).unwrap()
    }
    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.m - self.m.adjoint()))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_PREDICATE_TOL
    }

    /// `‖U†U − 1‖_max`
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs(&(matmul_adjoint(&self.m, &self.m) - CMatrix::identity(n, n)))
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn apply(&self, psi: &CVector) -> CVector {
        &self.m * psi
    }

    /// Hermitian part `(A + A†)/2`; used to scrub rounding asymmetry.
    pub fn hermitian_part(&self) -> Self {
        Self {
            m: (&self.m + self.m.adjoint()) * c(0.5, 0.0),
        }
    }

    /// Max entrywise distance to another operator of the same dimension.
    pub fn distance(&self, other: &Operator) -> f64 {
        max_abs(&(&self.m - &other.m))
    }
}

macro_rules! binop {
    (@apply *, $a:expr, $b:expr) => { matmul($a, $b) };
    (@apply $op:tt, $a:expr, $b:expr) => { $a $op $b };
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Operator> for &Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
                Operator { m: binop!(@apply $op, &self.m, &rhs.m) }
            }
        }
        impl $tr<Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: Operator) -> Operator {
                &self $op &rhs
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    v: CVector,
}

impl StateVector {
    /// Accepts an already-normalized vector.
    pub fn new(v: CVector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Dimension("empty state vector".into()));
        }
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!("state norm {n} is not 1")));
        }
        Ok(Self { v })
    }

    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn normalized(v: CVector) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Numeric("cannot normalize a zero vector".into()));
        }
        Ok(Self { v: v / c(n, 0.0) })
    }

    pub fn from_amplitudes(a: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(a))
    }

    pub fn from_real(a: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(a.len(), a.iter().map(|&x| c(x, 0.0))))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index out of range");
        let mut v = CVector::zeros(dim);
        v[k] = ONE;
        Self { v }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn vector(&self) -> &CVector {
        &self.v
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.v.as_slice()
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector {
            v: self.v.kronecker(&other.v),
        }
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            op: Operator::projector(self),
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.v.dotc(&other.v)
    }
}

/// Mixed state: Hermitian, positive, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: Operator,
}

impl DensityOperator {
    pub fn new(op: Operator) -> Result<Self> {
        if op.hermiticity_defect() > NORM_TOL {
            return Err(Error::Contract("density operator is not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::Contract(format!("density operator trace {tr} is not 1")));
        }
        let lo = hermitian_eig(&op)?.values[0];
        if lo < -NORM_TOL {
            return Err(Error::Contract(format!(
                "density operator has negative eigenvalue {lo:e}"
            )));
        }
        Ok(Self { op })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: Operator::identity(dim).scale(c(1.0 / dim as f64, 0.0)),
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn purity(&self) -> f64 {
        (self.op.matrix() * self.op.matrix()).trace().re
    }
}

/// Anything `⟨A⟩` can be taken in.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// `⟨A⟩` without dimension checking.
    fn expect_unchecked(&self, a: &CMatrix) -> C64;
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn expect_unchecked(&self, a: &CMatrix) -> C64 {
        self.v.dotc(&(a * &self.v))
    }
}

impl QuantumState for DensityOperator {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn expect_unchecked(&self, a: &CMatrix) -> C64 {
        // tr(ρA) without forming the product
        let r = self.op.matrix();
        let n = r.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += r[(i, j)] * a[(j, i)];
            }
        }
        acc
    }
}

/// Dimensions of a system ⊗ probe pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartiteDims {
    pub system: usize,
    pub probe: usize,
}

impl BipartiteDims {
    pub fn new(system: usize, probe: usize) -> Result<Self> {
        if system == 0 || probe == 0 {
            return Err(Error::Dimension("factor dimensions must be positive".into()));
        }
        Ok(Self { system, probe })
    }

    pub fn joint(&self) -> usize {
        self.system * self.probe
    }

    pub fn index(&self, s: usize, p: usize) -> usize {
        s * self.probe + p
    }
}

/// Which tensor factor an operation acts on (or removes).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    System,
    Probe,
}

/// `A ⊗ B`, limited to the default maximum joint dimension.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    tensor_with_limit(a, b, DEFAULT_MAX_JOINT_DIM)
}

pub fn tensor_with_limit(a: &Operator, b: &Operator, max_dim: usize) -> Result<Operator> {
    let dim = a.dim() * b.dim();
    if dim > max_dim {
        return Err(Error::Capacity { dim, max: max_dim });
    }
    Ok(Operator {
        m: a.m.kronecker(&b.m),
    })
}

/// Traces out the factor named by `traced`.
pub fn partial_trace(j: &Operator, dims: BipartiteDims, traced: Factor) -> Result<Operator> {
    if j.dim() != dims.joint() {
        return Err(dim_err("partial trace", dims.joint(), j.dim()));
    }
    let (ds, dp) = (dims.system, dims.probe);
    let m = j.matrix();
    let out = match traced {
        Factor::Probe => CMatrix::from_fn(ds, ds, |a, b| {
            (0..dp).map(|p| m[(a * dp + p, b * dp + p)]).sum()
        }),
        Factor::System => CMatrix::from_fn(dp, dp, |a, b| {
            (0..ds).map(|s| m[(s * dp + a, s * dp + b)]).sum()
        }),
    };
    Ok(Operator { m: out })
}

/// `(A ⊗ 1)·X` for a joint-space block `X` (columns are joint vectors).
pub fn apply_system_factor(a: &Operator, dims: BipartiteDims, x: &CMatrix) -> CMatrix {
    let (ds, dp) = (dims.system, dims.probe);
    assert_eq!(a.dim(), ds);
    assert_eq!(x.nrows(), dims.joint());
    let am = a.matrix();
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for col in 0..x.ncols() {
        for s in 0..ds {
            for t in 0..ds {
                let w = am[(s, t)];
                if w == ZERO {
                    continue;
                }
                for p in 0..dp {
                    out[(s * dp + p, col)] += w * x[(t * dp + p, col)];
                }
            }
        }
    }
    out
}

/// `(1 ⊗ B)·X` for a joint-space block `X`.
pub fn apply_probe_factor(b: &Operator, dims: BipartiteDims, x: &CMatrix) -> CMatrix {
    let (ds, dp) = (dims.system, dims.probe);
    assert_eq!(b.dim(), dp);
    assert_eq!(x.nrows(), dims.joint());
    let bm = b.matrix();
    let mut out = CMatrix::zeros(x.nrows(), x.ncols());
    for col in 0..x.ncols() {
        for s in 0..ds {
            let chunk = x.view((s * dp, col), (dp, 1));
            let r = bm * chunk;
            out.view_mut((s * dp, col), (dp, 1)).copy_from(&r);
        }
    }
    out
}

/// The isometry `J: ψ ↦ ψ ⊗ φ` as a `joint × dim_system` matrix.
pub fn attach_probe(dims: BipartiteDims, phi: &StateVector) -> CMatrix {
    let dp = dims.probe;
    let mut j = CMatrix::zeros(dims.joint(), dims.system);
    for s in 0..dims.system {
        for p in 0..dp {
            j[(s * dp + p, s)] = phi.vector()[p];
        }
    }
    j
}

/// `J† A J`: the system operator `ψ ↦ ⟨ψ⊗φ| A |ψ⊗φ⟩` as a quadratic form.
pub fn compress(a: &Operator, dims: BipartiteDims, phi: &StateVector) -> Result<Operator> {
    if a.dim() != dims.joint() {
        return Err(dim_err("compression", dims.joint(), a.dim()));
    }
    if phi.dim() != dims.probe {
        return Err(dim_err("probe state", dims.probe, phi.dim()));
    }
    let j = attach_probe(dims, phi);
    Operator::from_matrix(j.adjoint() * a.matrix() * j)
}

/// `⟨A⟩` in a pure or mixed state.
pub fn expectation<S: QuantumState>(a: &Operator, state: &S) -> Result<C64> {
    if a.dim() != state.dim() {
        return Err(dim_err("expectation", a.dim(), state.dim()));
    }
    Ok(state.expect_unchecked(a.matrix()))
}

/// `⟨A⟩` of a Hermitian `A`, imaginary rounding dropped.
pub fn expectation_real<S: QuantumState>(a: &Operator, state: &S) -> Result<f64> {
    Ok(expectation(a, state)?.re)
}

/// `⟨A²⟩ − ⟨A⟩²`, clamped at zero.
pub fn variance<S: QuantumState>(a: &Operator, state: &S) -> Result<f64> {
    if a.hermiticity_defect() > HERMITIAN_INPUT_TOL {
        return Err(Error::Contract("variance needs a Hermitian observable".into()));
    }
    let m1 = expectation(a, state)?.re;
    let m2 = state.expect_unchecked(&(a.matrix() * a.matrix())).re;
    Ok((m2 - m1 * m1).max(0.0))
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    if a.dim() != b.dim() {
        return Err(dim_err("commutator", a.dim(), b.dim()));
    }
    Ok(Operator {
        m: matmul(&a.m, &b.m) - matmul(&b.m, &a.m),
    })
}

/// Spectral decomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `V f(Λ) V†`
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let v = &self.vectors;
        let mut scaled = v.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= s;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn hermitian_eig(a: &Operator) -> Result<Eigen> {
    let defect = a.hermiticity_defect();
    if defect > HERMITIAN_INPUT_TOL {
        return Err(Error::Contract(format!(
            "eigendecomposition needs a Hermitian operator (defect {defect:.3e})"
        )));
    }
    let herm = a.hermitian_part();
    let se = herm.m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    if se.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("eigensolver produced non-finite values".into()));
    }
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.dim(), a.dim(), |r, k| se.eigenvectors[(r, order[k])]);

    let scale = 1.0 + a.max_abs();
    let resid = max_abs(&(&herm.m * &vectors - &vectors * CMatrix::from_diagonal(
        &CVector::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0))),
    )));
    if resid > 1e-9 * scale {
        return Err(Error::Numeric(format!(
            "eigendecomposition residual {resid:.3e} exceeds 1e-9·(1+‖A‖) = {:.3e}",
            1e-9 * scale
        )));
    }
    Ok(Eigen { values, vectors })
}

pub fn max_eigenvalue(a: &Operator) -> Result<f64> {
    Ok(*hermitian_eig(a)?.values.last().expect("non-empty"))
}

/// `exp(−iHt/ħ)` via the eigendecomposition of `H`.
pub fn unitary_from_generator(h: &Operator, t: f64, hbar: f64) -> Result<Operator> {
    let eig = hermitian_eig(h)?;
    let u = Operator {
        m: eig.apply_fn(|lam| C64::from_polar(1.0, -lam * t / hbar)),
    };
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        let spread = eig.values.last().unwrap() - eig.values[0];
        return Err(Error::Numeric(format!(
            "generated unitary off by {defect:.3e} (spectral spread {spread:.3e}, t = {t})"
        )));
    }
    Ok(u)
}
