//! Reference data for the third-order benchmark: published feedback gains and
//! the canonical scenario built around them.

use nalgebra::{DMatrix, DVector};

use crate::controllers::{ControllerKind, ControllerSettings};
use crate::gains::GainSet;
use crate::sim::{ScenarioConfig, SignalSpec, Waveform};

pub const REFERENCE_K: [f64; 3] = [-310.4000, -91.7333, -12.0000];

pub const REFERENCE_P: [[f64; 3]; 3] = [
    [60.2035, 14.0373, 1.1637],
    [14.0373, 3.4227, 0.3023],
    [1.1637, 0.3023, 0.0302],
];

pub const REFERENCE_RHO1: f64 = 1.0;
pub const REFERENCE_DELTA: f64 = 1.0;
/// `ϱ₂` attached to the reference gains: the best-margin point of the 19-point scan
/// over `(0, ϱ₁/Δ²)`.
pub const REFERENCE_RHO2: f64 = 0.95;

pub const REFERENCE_X0: [f64; 3] = [0.1, 1.0, 3.0];
pub const REFERENCE_STEP: f64 = 5e-3;
pub const REFERENCE_HORIZON: f64 = 10.0;
pub const REFERENCE_ETA: f64 = 0.1;
pub const REFERENCE_CHI: f64 = 1.1;
pub const REFERENCE_V_MIN: f64 = 0.1;
pub const REFERENCE_NOISE: f64 = 0.1;
pub const REFERENCE_SEED: u64 = 42;

pub fn reference_p() -> DMatrix<f64> {
    DMatrix::from_row_iterator(3, 3, REFERENCE_P.iter().flatten().copied())
}

pub fn reference_k() -> DVector<f64> {
    DVector::from_row_slice(&REFERENCE_K)
}

/// The published `(K, P)` with `X = P⁻¹`, `Y = K X`.
pub fn reference_gains() -> GainSet {
    GainSet::from_feedback(reference_k(), reference_p(), REFERENCE_RHO1, REFERENCE_RHO2, REFERENCE_DELTA)
        .expect("reference gains are well formed")
}

/// `d = sin(10t)`, `δ = (0.03 sin 3t, 0.05 cos 5t, 0)`, `w_i ~ U[0, amplitude]`.
pub fn reference_signals(noise_amplitude: f64) -> SignalSpec {
    SignalSpec {
        matched: Waveform::Sine { amplitude: 1.0, omega: 10.0 },
        delta_bound: REFERENCE_DELTA,
        mismatched: vec![
            Waveform::Sine { amplitude: 0.03, omega: 3.0 },
            Waveform::Cosine { amplitude: 0.05, omega: 5.0 },
            Waveform::Zero,
        ],
        noise: vec![noise_amplitude; 3],
    }
}

/// Matched disturbance only: no noise, no mismatched perturbation.
pub fn reference_matched_only_signals() -> SignalSpec {
    SignalSpec {
        mismatched: vec![Waveform::Zero; 3],
        noise: vec![0.0; 3],
        ..reference_signals(0.0)
    }
}

pub fn reference_scenario(kind: ControllerKind) -> ScenarioConfig {
    ScenarioConfig {
        n: 3,
        horizon: REFERENCE_HORIZON,
        step: REFERENCE_STEP,
        x0: REFERENCE_X0.to_vec(),
        eta: REFERENCE_ETA,
        chi: REFERENCE_CHI,
        controller: ControllerSettings { kind, v_min: REFERENCE_V_MIN, ..ControllerSettings::default() },
        gains: reference_gains(),
        signals: reference_signals(REFERENCE_NOISE),
        seed: REFERENCE_SEED,
    }
}
