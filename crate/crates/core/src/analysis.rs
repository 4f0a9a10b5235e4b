//! Post-processing of trajectories: chattering, decay-rate diagnostics,
//! disturbance identification, tail bounds and decrease monitors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::{GainSet, IssGains};
use crate::ilf::{int_pow, IlfSolverSettings};
use crate::linalg;
use crate::sim::Trajectory;

/// `Σ |u_{k+1} − u_k|`.
pub fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Least-squares slope of `log(−log V)` against `t` over samples with `t ∈ [t_a, t_b]`.
pub fn hyperexp_diagnostic(times: &[f64], v: &[f64], window: (f64, f64)) -> Result<f64> {
    if times.len() != v.len() {
        return Err(Error::structural("times and V have different lengths"));
    }
    let (ta, tb) = window;
    let mut pts = Vec::new();
    for (&t, &vk) in times.iter().zip(v) {
        if t < ta || t > tb {
            continue;
        }
        if !(vk > 0.0 && vk < 1.0) {
            return Err(Error::domain(format!("V = {vk} at t = {t} is outside (0, 1)")));
        }
        pts.push((t, (-vk.ln()).ln()));
    }
    if pts.len() < 2 {
        return Err(Error::domain("window holds fewer than two samples"));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let zm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxz: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - zm)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("window has no time spread"));
    }
    Ok(sxz / sxx)
}

/// Interval from the first sample with `V ≤ upper` to the first later sample with `V ≤ lower`.
pub fn decay_window(times: &[f64], v: &[f64], upper: f64, lower: f64) -> Option<(f64, f64)> {
    let start = v.iter().position(|&x| x <= upper)?;
    let end = start + v[start..].iter().position(|&x| x <= lower)?;
    (end > start + 1).then(|| (times[start], times[end]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentificationQuality {
    pub mean_abs_error: f64,
    /// Pearson correlation of `u` and `−d`; zero when either is constant.
    pub correlation: f64,
    pub samples: usize,
}

/// How well `u` tracks `−d` on `t ≥ t_start`.
pub fn identification_error(times: &[f64], u: &[f64], d: &[f64], t_start: f64) -> Result<IdentificationQuality> {
    if times.len() != u.len() || u.len() != d.len() {
        return Err(Error::structural("times, u and d have different lengths"));
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= t_start).collect();
    if idx.is_empty() {
        return Err(Error::domain(format!("no samples at or after t = {t_start}")));
    }
    let m = idx.len() as f64;
    let mean_abs_error = idx.iter().map(|&k| (u[k] + d[k]).abs()).sum::<f64>() / m;
    let um = idx.iter().map(|&k| u[k]).sum::<f64>() / m;
    let nm = idx.iter().map(|&k| -d[k]).sum::<f64>() / m;
    let (mut suu, mut snn, mut sun) = (0.0, 0.0, 0.0);
    for &k in &idx {
        let a = u[k] - um;
        let b = -d[k] - nm;
        suu += a * a;
        snn += b * b;
        sun += a * b;
    }
    let correlation = if suu > 0.0 && snn > 0.0 { (sun / (suu * snn).sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
    Ok(IdentificationQuality { mean_abs_error, correlation, samples: idx.len() })
}

/// `sup |x(t)|` over `t ≥ t_start` (0 when no sample qualifies).
pub fn steady_state_bound(traj: &Trajectory, t_start: f64) -> f64 {
    traj.times
        .iter()
        .zip(&traj.x)
        .filter(|(t, _)| **t >= t_start)
        .map(|(_, x)| linalg::norm(x))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub observed: f64,
    pub required: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MonitorReport {
    pub checked_steps: usize,
    /// Steps where the monitored frame held and the decrease bound was tested.
    pub triggered_steps: usize,
    pub violations: Vec<Violation>,
    /// Largest `observed − required` over violations; 0 when there are none.
    pub max_violation: f64,
}

impl MonitorReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, step: usize, observed: f64, required: f64) {
        self.triggered_steps += 1;
        if observed > required {
            self.max_violation = self.max_violation.max(observed - required);
            self.violations.push(Violation { step, observed, required });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorSettings {
    /// Steps with `V(x_k) ≤ v_min` are skipped.
    pub v_min: f64,
    /// Slack added to the required bound.
    pub tol: f64,
}

impl MonitorSettings {
    /// Slack `2h(ϱ₁ − ϱ₂Δ²)`.
    pub fn for_step(g: &GainSet, step: f64, v_min: f64) -> Self {
        Self { v_min, tol: 2.0 * step * g.decrease_margin() }
    }
}

/// ILF of the recorded true states.
pub fn state_ilf(traj: &Trajectory, g: &GainSet) -> Result<Vec<f64>> {
    let settings = IlfSolverSettings::default();
    traj.x.iter().map(|x| g.ilf().solve(x, &settings)).collect()
}

fn check_channels(traj: &Trajectory, n: usize) -> Result<()> {
    let len = traj.times.len();
    let ok = traj.n == n
        && [traj.x.len(), traj.y.len(), traj.u.len(), traj.v.len(), traj.psi.len(), traj.delta_norm.len()]
            .iter()
            .all(|&l| l == len)
        && traj.x.iter().chain(&traj.y).all(|r| r.len() == n);
    if ok {
        Ok(())
    } else {
        Err(Error::structural("trajectory channels are missing or misaligned"))
    }
}

/// Decrease monitor for the delayed controller.
///
/// At each step where `Ψ = V_y`, the noise is small relative to `V(x)`,
/// `y` lies between the ILF level sets at `V/ξ` and `ξV`, and `ρ_δ(|δ|) ≤ V`,
/// the forward difference of `V(x)` must not exceed `−(ϱ₁ − ϱ₂Δ²)/2 + tol`.
pub fn razumikhin_monitor(
    traj: &Trajectory,
    g: &GainSet,
    iss: &IssGains,
    settings: &MonitorSettings,
) -> Result<MonitorReport> {
    check_channels(traj, g.n())?;
    let v = state_ilf(traj, g)?;
    let n = g.n() as u32;
    let h = traj.step;
    let required = -iss.decrease_margin / 2.0 + settings.tol;
    let ilf = g.ilf();
    let mut report = MonitorReport { checked_steps: traj.len().saturating_sub(1), ..Default::default() };

    for k in 0..report.checked_steps {
        let vk = v[k];
        if !(vk > settings.v_min) {
            continue;
        }
        let delay_inactive = traj.psi[k] <= traj.v[k];
        let w: Vec<f64> = traj.y[k].iter().zip(&traj.x[k]).map(|(y, x)| y - x).collect();
        let s = vk / iss.xi;
        let noise_small = linalg::norm(&w) <= iss.alpha.sqrt() * s.min(int_pow(s, n));
        let y = &traj.y[k];
        let sandwiched = ilf.form_at(iss.xi / vk, y) >= 1.0 && ilf.form_at(1.0 / (iss.xi * vk), y) <= 1.0;
        let delta_small = iss.rho_delta(traj.delta_norm[k])? <= vk;
        if delay_inactive && noise_small && sandwiched && delta_small {
            report.record(k, (v[k + 1] - vk) / h, required);
        }
    }
    Ok(report)
}

/// Checks `(V(x_{k+1}) − V(x_k))/h ≤ −rate + tol` at every step with `V(x_k) > v_min`.
pub fn decrease_rate_monitor(
    traj: &Trajectory,
    g: &GainSet,
    rate: f64,
    settings: &MonitorSettings,
) -> Result<MonitorReport> {
    check_channels(traj, g.n())?;
    let v = state_ilf(traj, g)?;
    let required = -rate + settings.tol;
    let mut report = MonitorReport { checked_steps: traj.len().saturating_sub(1), ..Default::default() };
    for k in 0..report.checked_steps {
        if v[k] > settings.v_min {
            report.record(k, (v[k + 1] - v[k]) / traj.step, required);
        }
    }
    Ok(report)
}

/// Metric bundle exported per run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub controller: String,
    pub steps: usize,
    pub total_variation: f64,
    pub identification: IdentificationQuality,
    pub identification_start: f64,
    pub steady_state_bound: f64,
    pub final_v: f64,
    pub max_abs_u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorReport>,
}

impl RunMetrics {
    pub fn compute(controller: &str, traj: &Trajectory, t_start: f64) -> Result<Self> {
        Ok(Self {
            controller: controller.to_string(),
            steps: traj.len().saturating_sub(1),
            total_variation: total_variation(&traj.u),
            identification: identification_error(&traj.times, &traj.u, &traj.d, t_start)?,
            identification_start: t_start,
            steady_state_bound: steady_state_bound(traj, t_start),
            final_v: traj.v.last().copied().unwrap_or(0.0),
            max_abs_u: traj.u.iter().fold(0.0, |m, u| m.max(u.abs())),
            monitor: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
