//! End-to-end checks on gains produced by the synthesizer for the reference
//! third-order scenario: certificate, ISS constants, convergence and monitors.

use hosmc_core::analysis::{decay_window, decrease_rate_monitor, hyperexp_diagnostic, razumikhin_monitor, MonitorSettings};
use hosmc_core::gains::{find_gammas, inflate_gamma2_for_contraction, synthesize_gains, verify_lmi, GainSet, IssGains};
use hosmc_core::{linalg, presets, run_scenario, ControllerKind, ScenarioConfig, DEFAULT_EIG_TOL};

const ISS_EIG_TOL: f64 = 1e-6;

fn gains() -> GainSet {
    synthesize_gains(3, presets::REFERENCE_RHO1, presets::REFERENCE_RHO2, presets::REFERENCE_DELTA).unwrap()
}

fn iss(g: &GainSet) -> IssGains {
    let gm = find_gammas(g, ISS_EIG_TOL).unwrap();
    inflate_gamma2_for_contraction(g, &gm, presets::REFERENCE_CHI, ISS_EIG_TOL).unwrap().1
}

fn noise_free(kind: ControllerKind, g: &GainSet) -> ScenarioConfig {
    let mut cfg = presets::reference_scenario(kind);
    cfg.gains = g.clone();
    cfg.signals = presets::reference_matched_only_signals();
    cfg
}

#[test]
fn synthesized_gains_pass_every_block() {
    let g = gains();
    let r = verify_lmi(&g, DEFAULT_EIG_TOL).unwrap();
    assert!(r.passed(), "{r:?}");
    let pg = g.p() * linalg::generator(3) + linalg::generator(3) * g.p();
    assert!(linalg::lambda_min(&pg) >= 1.0 - 1e-6);
}

#[test]
fn iss_constants_contract() {
    let g = gains();
    let gm = find_gammas(&g, ISS_EIG_TOL).unwrap();
    assert!(gm.lambda_max <= ISS_EIG_TOL);
    let iss = iss(&g);
    assert!(iss.contraction && iss.rho_v_coeff < 1.0);
    assert!(iss.alpha > 0.0 && iss.xi > 1.0);
    for k in 0..=120 {
        let s = 10f64.powf(-6.0 + k as f64 * 0.1);
        assert!(iss.rho_v(s) < s);
    }
}

#[test]
fn delayed_law_converges_hyperexponentially_without_violations() {
    let g = gains();
    let cfg = noise_free(ControllerKind::Delayed, &g);
    let traj = run_scenario(&cfg).unwrap();
    assert!(traj.v.iter().any(|v| *v <= 0.2));
    let window = decay_window(&traj.times, &traj.v, 0.9, 0.2).unwrap();
    assert!(hyperexp_diagnostic(&traj.times, &traj.v, window).unwrap() > 0.0);
    let settings = MonitorSettings::for_step(&g, cfg.step, cfg.controller.v_min);
    let report = razumikhin_monitor(&traj, &g, &iss(&g), &settings).unwrap();
    assert!(report.triggered_steps > 0);
    assert!(report.passed(), "{:?}", &report.violations[..report.violations.len().min(5)]);
}

#[test]
fn finite_time_law_meets_the_certified_rate() {
    let g = gains();
    let mut cfg = noise_free(ControllerKind::FiniteTime, &g);
    cfg.signals.mismatched = vec![hosmc_core::Waveform::Zero; 3];
    cfg.step = 5e-4;
    let traj = run_scenario(&cfg).unwrap();
    let settings = MonitorSettings::for_step(&g, cfg.step, cfg.controller.v_min);
    let report = decrease_rate_monitor(&traj, &g, g.decrease_margin(), &settings).unwrap();
    assert!(report.triggered_steps > 0);
    assert!(report.passed(), "max violation {}", report.max_violation);
}

#[test]
fn delayed_law_identifies_the_disturbance() {
    let g = gains();
    let traj = run_scenario(&noise_free(ControllerKind::Delayed, &g)).unwrap();
    let q = hosmc_core::identification_error(&traj.times, &traj.u, &traj.d, 5.0).unwrap();
    assert!(q.correlation >= 0.9, "{q:?}");
}
