//! Output directory bookkeeping, digests and the comparison tables.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use hosmc_core::gains::fmt17;
use hosmc_core::{RunMetrics, Trajectory};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the recorded disturbance, perturbation-norm and noise-norm channels.
pub fn signal_digest(traj: &Trajectory) -> String {
    let mut h = Sha256::new();
    for k in 0..traj.len() {
        for v in [traj.times[k], traj.d[k], traj.delta_norm[k], traj.w_norm[k]] {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that remembers every file written to it.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(root).map_err(|e| Failure::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| Failure::io(&path, e))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Writes `manifest.json` last, listing every artifact with its digest.
    pub fn finish(self, mut manifest: Value) -> Result<(), Failure> {
        manifest["artifacts"] =
            self.written.iter().map(|(name, digest)| json!({ "file": name, "sha256": digest })).collect();
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }
}

/// `metric,controller_a,controller_b` table.
pub fn comparison_csv(a: &RunMetrics, b: &RunMetrics) -> String {
    let rows: [(&str, f64, f64); 6] = [
        ("total_variation", a.total_variation, b.total_variation),
        ("identification_mean_abs_error", a.identification.mean_abs_error, b.identification.mean_abs_error),
        ("identification_correlation", a.identification.correlation, b.identification.correlation),
        ("steady_state_bound", a.steady_state_bound, b.steady_state_bound),
        ("final_v", a.final_v, b.final_v),
        ("max_abs_u", a.max_abs_u, b.max_abs_u),
    ];
    let mut out = String::from("metric,controller_a,controller_b\n");
    out.push_str(&format!("controller,{},{}\n", a.controller, b.controller));
    for (name, va, vb) in rows {
        out.push_str(&format!("{name},{},{}\n", fmt17(va), fmt17(vb)));
    }
    out
}

/// Long format `controller,t,channel,value` for plotting tools.
pub fn long_csv(trajs: &[(&str, Trajectory)]) -> String {
    let mut out = String::from("controller,t,channel,value\n");
    for (name, traj) in trajs {
        for k in 0..traj.len() {
            let t = fmt17(traj.times[k]);
            let mut emit = |channel: &str, v: f64| out.push_str(&format!("{name},{t},{channel},{}\n", fmt17(v)));
            for (i, v) in traj.x[k].iter().enumerate() {
                emit(&format!("x{}", i + 1), *v);
            }
            emit("u", traj.u[k]);
            emit("V", traj.v[k]);
            emit("Psi", traj.psi[k]);
            emit("d", traj.d[k]);
        }
    }
    out
}
