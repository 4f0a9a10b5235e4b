//! Fixed-step Euler simulation of the perturbed integrator chain
//! `ẋ = A x + b (u + d) + δ`, `y = x + w`, under a zero-order-hold controller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControlLaw, ControllerConfig, ControllerKind, ControllerSettings};
use crate::error::{Error, Result};
use crate::gains::{fmt17, GainSet};
use crate::ilf::IlfSolverSettings;
use crate::linalg;
use crate::presets;

/// Identifier of the noise generator, recorded in run metadata.
pub const PRNG_ID: &str = "chacha8/rand_chacha-0.9/uniform-f64-53bit";

const DIVERGENCE_LIMIT: f64 = 1e12;

/// Deterministic time signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Waveform {
    Zero,
    Constant { value: f64 },
    Sine { amplitude: f64, omega: f64 },
    Cosine { amplitude: f64, omega: f64 },
}

impl Waveform {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Waveform::Zero => 0.0,
            Waveform::Constant { value } => value,
            Waveform::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            Waveform::Cosine { amplitude, omega } => amplitude * (omega * t).cos(),
        }
    }

    /// `sup_t |s(t)|`.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Waveform::Zero => 0.0,
            Waveform::Constant { value } => value.abs(),
            Waveform::Sine { amplitude, .. } | Waveform::Cosine { amplitude, .. } => amplitude.abs(),
        }
    }
}

/// Matched disturbance `d`, mismatched perturbation `δ` and measurement noise `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub matched: Waveform,
    /// Bound `Δ` with `sup |d| ≤ Δ`.
    pub delta_bound: f64,
    /// One waveform per state channel; the last one must vanish (`bᵀδ = 0`).
    pub mismatched: Vec<Waveform>,
    /// Per-channel amplitude: `w_i ~ U[0, amplitude_i]`.
    pub noise: Vec<f64>,
}

impl SignalSpec {
    pub fn zero(n: usize) -> Self {
        Self { matched: Waveform::Zero, delta_bound: 0.0, mismatched: vec![Waveform::Zero; n], noise: vec![0.0; n] }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.delta_bound >= 0.0) {
            return Err(Error::config("delta_bound must be nonnegative"));
        }
        if self.matched.sup_abs() > self.delta_bound {
            return Err(Error::config(format!(
                "matched disturbance amplitude {} exceeds Delta = {}",
                self.matched.sup_abs(),
                self.delta_bound
            )));
        }
        if self.mismatched.len() != n || self.noise.len() != n {
            return Err(Error::config(format!("mismatched and noise specs must have {n} channels")));
        }
        if self.mismatched[n - 1].sup_abs() != 0.0 {
            return Err(Error::config("last mismatched channel must be zero (b^T delta = 0)"));
        }
        if self.noise.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::config("noise amplitudes must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Seeded noise source.
#[derive(Debug, Clone)]
pub struct SignalRng(ChaCha8Rng);

impl SignalRng {
    pub fn seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn word_pos(&self) -> u128 {
        self.0.get_word_pos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSample {
    pub d: f64,
    pub delta: Vec<f64>,
    pub w: Vec<f64>,
}

/// Evaluates `d(t)`, `δ(t)` and draws `w(t)`. Channels with zero amplitude consume no draw.
pub fn eval_signals(t: f64, spec: &SignalSpec, rng: &mut SignalRng) -> SignalSample {
    let delta = spec.mismatched.iter().map(|s| s.eval(t)).collect();
    let w = spec
        .noise
        .iter()
        .map(|&amp| if amp > 0.0 { amp * rng.0.random::<f64>() } else { 0.0 })
        .collect();
    SignalSample { d: spec.matched.eval(t), delta, w }
}

/// `(x₂, …, x_n, u + d) + δ`.
pub fn plant_derivative(x: &[f64], u: f64, d: f64, delta: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 || delta.len() != n {
        return Err(Error::structural(format!("state of length {n}, perturbation of length {}", delta.len())));
    }
    if delta[n - 1] != 0.0 {
        return Err(Error::Contract(format!(
            "mismatched perturbation has a matched component {}",
            delta[n - 1]
        )));
    }
    let mut dx: Vec<f64> = (0..n).map(|i| if i + 1 < n { x[i + 1] } else { u + d }).collect();
    for (o, p) in dx.iter_mut().zip(delta) {
        *o += p;
    }
    Ok(dx)
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n: usize,
    pub horizon: f64,
    pub step: f64,
    pub x0: Vec<f64>,
    pub eta: f64,
    pub chi: f64,
    pub controller: ControllerSettings,
    pub gains: GainSet,
    pub signals: SignalSpec,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig::new(&self.controller, self.chi, self.eta)
    }

    pub fn with_controller(&self, kind: ControllerKind) -> Self {
        let mut c = self.clone();
        c.controller.kind = kind;
        c
    }

    /// Number of integration steps, `floor(T/h)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || self.x0.len() != n || self.gains.n() != n {
            return Err(Error::config(format!(
                "dimension mismatch: n = {n}, x0 has {}, gains have {}",
                self.x0.len(),
                self.gains.n()
            )));
        }
        if !(self.step > 0.0) || !(self.horizon >= self.step) {
            return Err(Error::config("need h > 0 and T >= h"));
        }
        if !(self.eta >= self.step) {
            return Err(Error::config("need eta >= h"));
        }
        let ratio = self.eta / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::config("eta must be a multiple of h"));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("x0 must be finite"));
        }
        self.signals.validate(n)?;
        self.controller_config().validate(n)
    }

    /// Parses a scenario document; omitted fields take the reference values.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDocument =
            serde_json::from_str(text).map_err(|e| Error::config(format!("scenario file: {e}")))?;
        doc.resolve()
    }

    /// Fully resolved document (gains included) that parses back to the same configuration.
    pub fn to_json_value(&self) -> serde_json::Value {
        let gains: serde_json::Value =
            serde_json::from_str(&self.gains.to_json()).expect("gain document is valid JSON");
        serde_json::json!({
            "n": self.n,
            "horizon": self.horizon,
            "step": self.step,
            "x0": self.x0,
            "eta": self.eta,
            "chi": self.chi,
            "controller": self.controller,
            "gains": gains,
            "signals": self.signals,
            "seed": self.seed,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    n: Option<usize>,
    horizon: Option<f64>,
    step: Option<f64>,
    x0: Option<Vec<f64>>,
    eta: Option<f64>,
    chi: Option<f64>,
    controller: Option<ControllerSettings>,
    gains: Option<serde_json::Value>,
    signals: Option<SignalSpec>,
    seed: Option<u64>,
}

impl ScenarioDocument {
    fn resolve(self) -> Result<ScenarioConfig> {
        let base = presets::reference_scenario(ControllerKind::Delayed);
        let gains = match self.gains {
            Some(v) => GainSet::from_json(&v.to_string())?,
            None => base.gains.clone(),
        };
        let n = self.n.unwrap_or(gains.n());
        let cfg = ScenarioConfig {
            n,
            horizon: self.horizon.unwrap_or(base.horizon),
            step: self.step.unwrap_or(base.step),
            x0: self.x0.unwrap_or(base.x0),
            eta: self.eta.unwrap_or(base.eta),
            chi: self.chi.unwrap_or(base.chi),
            controller: self.controller.unwrap_or(base.controller),
            gains,
            signals: self.signals.unwrap_or(base.signals),
            seed: self.seed.unwrap_or(base.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sampled record of one run; every channel has `floor(T/h) + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    pub step: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
    pub d: Vec<f64>,
    pub delta_norm: Vec<f64>,
    pub w_norm: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize, step: f64, len: usize) -> Self {
        Self {
            n,
            step,
            times: Vec::with_capacity(len),
            x: Vec::with_capacity(len),
            y: Vec::with_capacity(len),
            u: Vec::with_capacity(len),
            v: Vec::with_capacity(len),
            psi: Vec::with_capacity(len),
            d: Vec::with_capacity(len),
            delta_norm: Vec::with_capacity(len),
            w_norm: Vec::with_capacity(len),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x{i}")));
        cols.extend((1..=n).map(|i| format!("y{i}")));
        cols.extend(["u", "V", "Psi", "d", "delta_norm", "w_norm"].map(String::from));
        cols.join(",")
    }

    /// CSV with 17 significant digits, one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header(self.n);
        out.push('\n');
        for k in 0..self.len() {
            let mut row: Vec<String> = Vec::with_capacity(2 * self.n + 7);
            row.push(fmt17(self.times[k]));
            row.extend(self.x[k].iter().map(|v| fmt17(*v)));
            row.extend(self.y[k].iter().map(|v| fmt17(*v)));
            for v in [self.u[k], self.v[k], self.psi[k], self.d[k], self.delta_norm[k], self.w_norm[k]] {
                row.push(fmt17(v));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs the closed loop; the delay window starts as the constant history `V(x₀)`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let solver = IlfSolverSettings::default();
    let h = cfg.step;
    let steps = cfg.steps();
    let v0 = cfg.gains.ilf().solve(&cfg.x0, &solver)?;
    let mut law = ControlLaw::new(cfg.controller_config(), &cfg.gains, solver, h, 0.0, v0)?;
    let mut rng = SignalRng::seed(cfg.seed);
    let mut traj = Trajectory::with_capacity(cfg.n, h, steps + 1);
    let mut x = cfg.x0.clone();

    for k in 0..=steps {
        let t = k as f64 * h;
        let sig = eval_signals(t, &cfg.signals, &mut rng);
        let y: Vec<f64> = x.iter().zip(&sig.w).map(|(xi, wi)| xi + wi).collect();
        let out = law.step(t, &y)?;

        traj.times.push(t);
        traj.x.push(x.clone());
        traj.y.push(y);
        traj.u.push(out.u);
        traj.v.push(out.v);
        traj.psi.push(out.psi);
        traj.d.push(sig.d);
        traj.delta_norm.push(linalg::norm(&sig.delta));
        traj.w_norm.push(linalg::norm(&sig.w));

        if k == steps {
            break;
        }
        let dx = plant_derivative(&x, out.u, sig.d, &sig.delta)?;
        for (xi, dxi) in x.iter_mut().zip(&dx) {
            *xi += h * dxi;
        }
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Diverged {
                step: k + 1,
                time: (k + 1) as f64 * h,
                reason: format!("|x| exceeded {DIVERGENCE_LIMIT:e}"),
            });
        }
    }
    Ok(traj)
}
