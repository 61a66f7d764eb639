//! Run manifest: every command drops a manifest.json next to its outputs
//! recording the tool version, the exact invocation, the input digest, and
//! the resolved parameters, so any output can be traced to and reproduced
//! from its run. Re-executing the recorded command reproduces the numeric
//! outputs byte-identically; only the manifest timestamp differs.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use ridgecond::Result;

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}

/// Writes manifest.json into `out_dir`. `params` holds the fully resolved
/// parameter set (defaults and environment fallbacks applied); serde_json
/// keeps object keys sorted, making the file deterministic up to the
/// timestamp.
pub fn write_manifest(
    out_dir: &Path,
    input: Option<&Path>,
    params: Map<String, Value>,
    outputs: &[&str],
) -> Result<()> {
    let (input_path, input_sha256) = match input {
        Some(p) => (
            Value::String(p.display().to_string()),
            Value::String(sha256_hex(p)?),
        ),
        None => (Value::Null, Value::Null),
    };
    let mut output_list: Vec<String> = outputs.iter().map(|o| o.to_string()).collect();
    output_list.push("manifest.json".into());
    let manifest = json!({
        "tool": "ridgecond",
        "version": env!("CARGO_PKG_VERSION"),
        "command": std::env::args().collect::<Vec<String>>(),
        "created_utc": Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        "input_path": input_path,
        "input_sha256": input_sha256,
        "params": Value::Object(params),
        "outputs": output_list,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is valid json");
    std::fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
