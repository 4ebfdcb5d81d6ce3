//! Problem plugins are separate programs. The runner writes one
//! [`RunManifest`] JSON document to the plugin's stdin and reads one
//! [`PluginVerdict`] JSON document from its stdout.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use bibifi_scoring::Points;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::sandbox::{IsolationProvider, Limits, RunRequest, Verdict};
use crate::testing::TestOutcome;
use crate::RunnerError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub problem: String,
    /// Directory holding the built artifacts.
    pub submission_path: PathBuf,
    pub test_id: String,
    #[serde(default)]
    pub ports: BTreeMap<String, u16>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PluginVerdict {
    pub test_id: String,
    pub passed: bool,
    pub measure: Option<f64>,
    pub transcript: String,
}

impl From<&TestOutcome> for PluginVerdict {
    fn from(o: &TestOutcome) -> Self {
        PluginVerdict {
            test_id: o.test_id.clone(),
            passed: o.passed,
            measure: o.measure.map(points_to_f64),
            transcript: o.transcript.clone(),
        }
    }
}

fn points_to_f64(p: Points) -> f64 {
    p.0.to_f64().unwrap_or(f64::NAN)
}

/// Converts a wire measure back to an exact value at microsecond resolution.
pub fn measure_from_f64(v: f64) -> Option<Points> {
    if !v.is_finite() || v < 0.0 {
        return None;
    }
    Some(Points::new((v * 1_000_000.0).round() as i64, 1_000_000))
}

/// Invokes a plugin executable for one test.
pub fn run_plugin<P: IsolationProvider + ?Sized>(
    plugin: &Path,
    manifest: &RunManifest,
    provider: &P,
    timeout: Duration,
) -> Result<PluginVerdict, RunnerError> {
    let input = serde_json::to_vec(manifest).map_err(|e| RunnerError::Plugin(e.to_string()))?;
    let sandbox = provider.provision()?;
    let ports: Vec<u16> = manifest.ports.values().copied().collect();
    let req = RunRequest::new(plugin).stdin(input).limits(Limits::test().with_wall(timeout).with_ports(&ports));
    let res = provider.execute(&sandbox, &req);
    provider.destroy(sandbox);
    let res = res?;
    if res.verdict == Verdict::Timeout {
        return Err(RunnerError::Plugin(format!("plugin timed out on {}", manifest.test_id)));
    }
    let verdict: PluginVerdict = serde_json::from_slice(&res.stdout).map_err(|e| {
        RunnerError::Plugin(format!("bad verdict ({e}); stderr: {}", String::from_utf8_lossy(&res.stderr).trim_end()))
    })?;
    if verdict.test_id != manifest.test_id {
        return Err(RunnerError::Plugin(format!("verdict for {:?}, asked for {:?}", verdict.test_id, manifest.test_id)));
    }
    Ok(verdict)
}

/// Plugin side: reads the manifest from `input`, writes the verdict to `output`.
pub fn serve_plugin(
    mut input: impl Read,
    mut output: impl Write,
    handler: impl FnOnce(RunManifest) -> Result<PluginVerdict, RunnerError>,
) -> Result<(), RunnerError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let manifest: RunManifest = serde_json::from_slice(&buf).map_err(|e| RunnerError::Plugin(e.to_string()))?;
    let verdict = handler(manifest)?;
    serde_json::to_writer(&mut output, &verdict).map_err(|e| RunnerError::Plugin(e.to_string()))?;
    output.write_all(b"\n")?;
    Ok(())
}
