//! Control laws: the finite-time ILF feedback, its delayed counterpart built on
//! the functional `Ψ`, and first-order / super-twisting baselines.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::ilf::IlfSolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    FiniteTime,
    Delayed,
    Smc1,
    SuperTwisting,
    Linear,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::FiniteTime => "finite_time",
            ControllerKind::Delayed => "delayed",
            ControllerKind::Smc1 => "smc1",
            ControllerKind::SuperTwisting => "super_twisting",
            ControllerKind::Linear => "linear",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim() {
            "finite_time" => Ok(ControllerKind::FiniteTime),
            "delayed" => Ok(ControllerKind::Delayed),
            "smc1" => Ok(ControllerKind::Smc1),
            "super_twisting" => Ok(ControllerKind::SuperTwisting),
            "linear" => Ok(ControllerKind::Linear),
            other => Err(Error::config(format!("unknown controller '{other}'"))),
        }
    }
}

/// Controller selection and tuning as it appears in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSettings {
    pub kind: ControllerKind,
    /// Lower clamp on the ILF value inside the dilation.
    pub v_min: f64,
    /// First-order SMC amplitude `k`.
    pub k: f64,
    /// Sliding surface slope `a` in `σ = y₂ + a y₁`.
    pub a: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self { kind: ControllerKind::Delayed, v_min: 0.1, k: 5.0, a: 1.0, l1: 1.5, l2: 1.1 }
    }
}

/// Full controller configuration, including the delay parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub chi: f64,
    pub eta: f64,
    pub v_min: f64,
    pub k: f64,
    pub a: f64,
    pub l1: f64,
    pub l2: f64,
}

impl ControllerConfig {
    pub fn new(settings: &ControllerSettings, chi: f64, eta: f64) -> Self {
        Self {
            kind: settings.kind,
            chi,
            eta,
            v_min: settings.v_min,
            k: settings.k,
            a: settings.a,
            l1: settings.l1,
            l2: settings.l2,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.v_min >= 0.0) {
            return Err(Error::config("v_min must be nonnegative"));
        }
        match self.kind {
            ControllerKind::Delayed => {
                if !(self.chi > 1.0) || !(self.eta > 0.0) {
                    return Err(Error::config("delayed controller needs chi > 1 and eta > 0"));
                }
            }
            ControllerKind::Smc1 | ControllerKind::SuperTwisting => {
                if n != 2 {
                    return Err(Error::config(format!("{} is defined for n = 2 only", self.kind.name())));
                }
                if !(self.a > 0.0) {
                    return Err(Error::config("surface slope a must be positive"));
                }
                if self.kind == ControllerKind::Smc1 && !(self.k > 0.0) {
                    return Err(Error::config("smc gain k must be positive"));
                }
                if self.kind == ControllerKind::SuperTwisting && !(self.l1 > 0.0 && self.l2 > 0.0) {
                    return Err(Error::config("super-twisting gains must be positive"));
                }
            }
            ControllerKind::FiniteTime | ControllerKind::Linear => {}
        }
        Ok(())
    }
}

/// Past ILF values over the delay window, one sample per integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayBuffer {
    capacity: usize,
    step: f64,
    samples: VecDeque<(f64, f64)>,
}

impl DelayBuffer {
    /// Capacity `round(η/h) + 1`; `η` must be a multiple of `h`.
    pub fn new(eta: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(eta >= step) {
            return Err(Error::config(format!("need eta >= h > 0 (eta = {eta}, h = {step})")));
        }
        let ratio = eta / step;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio {
            return Err(Error::config(format!("eta = {eta} is not a multiple of h = {step}")));
        }
        Ok(Self::with_capacity(m as usize + 1, step))
    }

    pub fn with_capacity(capacity: usize, step: f64) -> Self {
        Self { capacity: capacity.max(1), step, samples: VecDeque::with_capacity(capacity.max(1)) }
    }

    /// Fills the whole window with `value` at times `t0 − capacity·h, …, t0 − h`.
    pub fn fill_constant(&mut self, t0: f64, value: f64) -> Result<()> {
        self.samples.clear();
        for j in (1..=self.capacity).rev() {
            self.push(t0 - j as f64 * self.step, value)?;
        }
        Ok(())
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::State(format!("ILF sample must be finite and nonnegative, got {value}")));
        }
        if let Some(&(last, _)) = self.samples.back() {
            if !(t > last) || ((t - last) - self.step).abs() > 1e-6 * self.step {
                return Err(Error::State(format!(
                    "sample at t = {t} does not follow t = {last} by one step {}",
                    self.step
                )));
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, value));
        Ok(())
    }

    pub fn max(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.1).reduce(f64::max)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.samples.iter()
    }
}

/// `Ψ = max[V_now, e^{1−χ} min(M, M^χ)]` with `M` the window maximum.
pub fn psi(v_now: f64, buffer: &DelayBuffer, chi: f64) -> Result<f64> {
    if !(chi > 1.0) {
        return Err(Error::domain(format!("chi must exceed 1, got {chi}")));
    }
    let m = buffer.max().ok_or_else(|| Error::State("empty delay buffer".into()))?;
    Ok(v_now.max((1.0 - chi).exp() * m.min(m.powf(chi))))
}

/// `K · D_r(s⁻¹) · y`, zero when `s = 0`.
fn dilated_feedback(g: &GainSet, y: &[f64], s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let w = g.ilf().weights().powers(1.0 / s);
    g.k().iter().zip(&w).zip(y).map(|((k, w), y)| k * w * y).sum()
}

/// ILF feedback `u = K D_r(max(V_y, V_min)⁻¹) y`; returns `(u, V_y)`.
pub fn finite_time_control(y: &[f64], g: &GainSet, v_min: f64, solver: &IlfSolverSettings) -> Result<(f64, f64)> {
    let v = g.ilf().solve(y, solver)?;
    if v == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((dilated_feedback(g, y, v.max(v_min)), v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedOutput {
    pub u: f64,
    pub v: f64,
    pub psi: f64,
}

/// Delayed ILF feedback `u = K D_r(max(Ψ, V_min)⁻¹) y`.
///
/// The buffer is read, not updated: the caller appends `V_y` after the step.
pub fn delayed_control(
    y: &[f64],
    buffer: &DelayBuffer,
    g: &GainSet,
    cfg: &ControllerConfig,
    solver: &IlfSolverSettings,
) -> Result<DelayedOutput> {
    if cfg.kind != ControllerKind::Delayed {
        return Err(Error::config(format!("delayed_control called with kind {}", cfg.kind.name())));
    }
    let v = g.ilf().solve(y, solver)?;
    let psi = psi(v, buffer, cfg.chi)?;
    Ok(DelayedOutput { u: dilated_feedback(g, y, psi.max(cfg.v_min)), v, psi })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `u = −k sign(y₂ + a y₁)`, `sign(0) = 0`.
pub fn smc_first_order(y: [f64; 2], k: f64, a: f64) -> f64 {
    -k * sign(y[1] + a * y[0])
}

/// `u = −ℓ₁ √|σ| sign σ + z`, and the Euler update `z⁺ = z − ℓ₂ sign(σ) h`.
pub fn super_twisting_step(sigma: f64, z: f64, l1: f64, l2: f64, h: f64) -> (f64, f64) {
    let s = sign(sigma);
    (-l1 * sigma.abs().sqrt() * s + z, z - l2 * s * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    /// `V_y(y)` from the gain set's ILF (recorded for every kind).
    pub v: f64,
    /// `Ψ` for the delayed law, `V_y` otherwise.
    pub psi: f64,
}

/// One controller instance with its private state (delay window, integral term).
#[derive(Debug, Clone)]
pub struct ControlLaw<'g> {
    cfg: ControllerConfig,
    gains: &'g GainSet,
    solver: IlfSolverSettings,
    buffer: Option<DelayBuffer>,
    z: f64,
    step: f64,
}

impl<'g> ControlLaw<'g> {
    /// `initial_v` seeds the delay window as a constant history before `t0`.
    pub fn new(
        cfg: ControllerConfig,
        gains: &'g GainSet,
        solver: IlfSolverSettings,
        step: f64,
        t0: f64,
        initial_v: f64,
    ) -> Result<Self> {
        cfg.validate(gains.n())?;
        let buffer = if cfg.kind == ControllerKind::Delayed {
            let mut b = DelayBuffer::new(cfg.eta, step)?;
            b.fill_constant(t0, initial_v)?;
            Some(b)
        } else {
            None
        };
        Ok(Self { cfg, gains, solver, buffer, z: 0.0, step })
    }

    pub fn buffer(&self) -> Option<&DelayBuffer> {
        self.buffer.as_ref()
    }

    /// Control at time `t` from measurement `y`; advances internal state.
    pub fn step(&mut self, t: f64, y: &[f64]) -> Result<ControlOutput> {
        let g = self.gains;
        let out = match self.cfg.kind {
            ControllerKind::FiniteTime => {
                let (u, v) = finite_time_control(y, g, self.cfg.v_min, &self.solver)?;
                ControlOutput { u, v, psi: v }
            }
            ControllerKind::Delayed => {
                let buffer = self.buffer.as_mut().expect("delayed law owns a buffer");
                let o = delayed_control(y, buffer, g, &self.cfg, &self.solver)?;
                buffer.push(t, o.v)?;
                ControlOutput { u: o.u, v: o.v, psi: o.psi }
            }
            ControllerKind::Linear => {
                let v = g.ilf().solve(y, &self.solver)?;
                ControlOutput { u: g.k().iter().zip(y).map(|(k, y)| k * y).sum(), v, psi: v }
            }
            ControllerKind::Smc1 => {
                let v = g.ilf().solve(y, &self.solver)?;
                ControlOutput { u: smc_first_order([y[0], y[1]], self.cfg.k, self.cfg.a), v, psi: v }
            }
            ControllerKind::SuperTwisting => {
                let v = g.ilf().solve(y, &self.solver)?;
                let sigma = y[1] + self.cfg.a * y[0];
                let (u, z) = super_twisting_step(sigma, self.z, self.cfg.l1, self.cfg.l2, self.step);
                self.z = z;
                ControlOutput { u, v, psi: v }
            }
        };
        Ok(out)
    }
}
