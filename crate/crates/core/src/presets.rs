//! Small qubit schemes used as references throughout the test suite.

use crate::config::Tolerances;
use crate::error::Result;
use crate::linalg::{BipartiteDims, Operator, StateVector, ONE, ZERO};
use crate::scheme::{ConservedPair, MeasurementScheme, OutcomeMap};

fn sign_label(v: f64) -> String {
    if v > 0.0 { "+1" } else { "-1" }.to_string()
}

/// Controlled-NOT with the system as control, probe in `|0⟩`, pointer `σz`.
///
/// Outcome `+1` reads pointer `|0⟩`, i.e. system `|0⟩`. This is a sharp,
/// repeatable measurement of `σz`.
pub fn cnot(tol: &Tolerances) -> Result<MeasurementScheme> {
    let mut rows = vec![vec![ZERO; 4]; 4];
    rows[0][0] = ONE;
    rows[1][1] = ONE;
    rows[2][3] = ONE;
    rows[3][2] = ONE;
    MeasurementScheme::with_value_labels(
        BipartiteDims::new(2, 2)?,
        Operator::from_rows(&rows)?,
        StateVector::basis(2, 0),
        Operator::pauli_z(),
        tol,
        sign_label,
    )
}

/// No coupling at all: `U = 1` on a `dim_system`-dimensional system, probe
/// qubit in `|+⟩`, pointer `σz`. Every effect is `½·1`.
pub fn trivial(dim_system: usize, tol: &Tolerances) -> Result<MeasurementScheme> {
    MeasurementScheme::with_value_labels(
        BipartiteDims::new(dim_system, 2)?,
        Operator::identity(2 * dim_system),
        StateVector::from_real(&[1.0, 1.0])?,
        Operator::pauli_z(),
        tol,
        sign_label,
    )
}

/// Trivial scheme with an explicit probe state and pointer.
pub fn uncoupled(
    dim_system: usize,
    phi: StateVector,
    z: Operator,
    h: OutcomeMap,
    tol: &Tolerances,
) -> Result<MeasurementScheme> {
    let dims = BipartiteDims::new(dim_system, phi.dim())?;
    MeasurementScheme::new(dims, Operator::identity(dims.joint()), phi, z, h, tol)
}

/// `(σz, 0)`: conserved by the CNOT coupling.
pub fn cnot_pair() -> ConservedPair {
    ConservedPair::new(Operator::pauli_z(), Operator::zeros(2)).expect("Hermitian")
}

/// Haar-random coupling, probe state and nondegenerate pointer.
pub fn random_scheme<R: rand::Rng>(
    dim_system: usize,
    dim_probe: usize,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<MeasurementScheme> {
    use crate::random::{haar_state, haar_unitary, random_hermitian};
    let dims = BipartiteDims::new(dim_system, dim_probe)?;
    let u = haar_unitary(dims.joint(), rng);
    let phi = haar_state(dim_probe, rng);
    let z = random_hermitian(dim_probe, rng);
    MeasurementScheme::with_value_labels(dims, u, phi, z, tol, |v| format!("{v:.6}"))
}
