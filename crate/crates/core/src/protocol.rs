//! Entangling-gate reset protocol: controlled two-qubit unitaries, the
//! coherence-suppression factor kappa = Tr[rho_2 V0^dag V1], and exact or
//! error-perturbed gate application.
//!
//! Applying U = |0><0| (x) V0 + |1><1| (x) V1 to a product state rho_1 (x)
//! rho_2 acts on the q1 marginal as a pure dephasing channel: populations
//! are untouched and the coherence is multiplied by kappa. Gates with
//! kappa = 0 delocalize all local q1 coherence into the joint state.

use ndarray::array;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, CMat};
use crate::state::qubit::{c, identity, projector, sigma_x};
use crate::state::DensityMatrix;

const UNITARITY_TOL: f64 = 1e-12;

/// A two-qubit controlled unitary, |0><0| (x) v0 + |1><1| (x) v1, with the
/// first qubit as control.
#[derive(Debug, Clone)]
pub struct ControlledGate {
    pub v0: CMat,
    pub v1: CMat,
}

impl ControlledGate {
    pub fn new(v0: CMat, v1: CMat) -> Result<Self> {
        for (name, v) in [("v0", &v0), ("v1", &v1)] {
            if v.nrows() != 2 || v.ncols() != 2 {
                return Err(Error::DimensionMismatch(format!("{name} must be 2x2")));
            }
            if !linalg::is_unitary(v, UNITARITY_TOL) {
                return Err(Error::InvalidParameter(format!("{name} not unitary")));
            }
        }
        Ok(Self { v0, v1 })
    }

    /// Assembled 4x4 unitary on (control, target).
    pub fn unitary(&self) -> CMat {
        kron(&projector(0, 2), &self.v0) + kron(&projector(1, 2), &self.v1)
    }

    /// The branch contrast W = V0^dag V1 whose trace against the ancilla
    /// gives kappa.
    pub fn branch_contrast(&self) -> CMat {
        linalg::dagger(&self.v0).dot(&self.v1)
    }
}

/// Ancilla preparation: ground population and (optional) coherence.
#[derive(Debug, Clone, Copy)]
pub struct AncillaState {
    pub p0: f64,
    pub coherence: C64,
}

impl AncillaState {
    pub fn new(p0: f64, coherence: C64) -> Result<Self> {
        let s = Self { p0, coherence };
        s.density()?;
        Ok(s)
    }

    pub fn diagonal(p0: f64) -> Result<Self> {
        Self::new(p0, c(0.0, 0.0))
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        crate::state::qubit::mixed(self.p0, self.coherence)
    }
}

/// Controlled R_y(pi): v1 = [[0, -1], [1, 0]].
pub fn cry_pi() -> ControlledGate {
    ControlledGate {
        v0: identity(2),
        v1: array![[c(0.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
    }
}

/// CNOT: v1 = sigma_x.
pub fn cnot() -> ControlledGate {
    ControlledGate {
        v0: identity(2),
        v1: sigma_x(),
    }
}

/// Coherence-suppression factor kappa = Tr[rho_2 V0^dag V1]; after the gate
/// the q1-marginal coherence <1|rho|0> is kappa times its input value (and
/// <0|rho|1> picks up the conjugate).
pub fn kappa(rho2: &AncillaState, gate: &ControlledGate) -> Result<C64> {
    let rho = rho2.density()?;
    Ok(linalg::trace(&rho.matrix().dot(&gate.branch_contrast())))
}

/// Conjugate a two-qubit state by the assembled gate unitary.
pub fn apply_gate(gate: &ControlledGate, rho12: &DensityMatrix) -> Result<DensityMatrix> {
    if rho12.dim() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "gate acts on two qubits, state has dimension {}",
            rho12.dim()
        )));
    }
    let u = gate.unitary();
    let out = u.dot(rho12.matrix()).dot(&linalg::dagger(&u));
    DensityMatrix::from_propagation(out, vec![2, 2], 1e-12)
}

fn rotation_x(theta: f64) -> CMat {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    array![[c(ch, 0.0), c(0.0, -sh)], [c(0.0, -sh), c(ch, 0.0)]]
}

fn rotation_y(theta: f64) -> CMat {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    array![[c(ch, 0.0), c(-sh, 0.0)], [c(sh, 0.0), c(ch, 0.0)]]
}

/// Which side of the intended y rotation the spurious x rotation acts on.
/// The physical error model does not fix this; both readings are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorOrder {
    /// v1 = R_x(dtheta_x) . R_y(pi + dtheta_y)  (default)
    XAfterY,
    /// v1 = R_y(pi + dtheta_y) . R_x(dtheta_x)
    XBeforeY,
}

/// Controlled-R_y(pi) with systematic rotation errors on the controlled
/// branch: an over/under-rotation dtheta_y and a spurious x rotation
/// dtheta_x.
pub fn perturbed_cry(dtheta_x: f64, dtheta_y: f64) -> ControlledGate {
    perturbed_cry_with_order(dtheta_x, dtheta_y, ErrorOrder::XAfterY)
}

pub fn perturbed_cry_with_order(
    dtheta_x: f64,
    dtheta_y: f64,
    order: ErrorOrder,
) -> ControlledGate {
    let rx = rotation_x(dtheta_x);
    let ry = rotation_y(std::f64::consts::PI + dtheta_y);
    let v1 = match order {
        ErrorOrder::XAfterY => rx.dot(&ry),
        ErrorOrder::XBeforeY => ry.dot(&rx),
    };
    ControlledGate {
        v0: identity(2),
        v1,
    }
}
