//! File writers and readers for run artifacts.
//!
//! CSV is for human-read tables, JSON for machine-read objects. Every
//! floating-point CSV field is printed with 17 significant digits, which
//! round-trips any f64 bit-faithfully; JSON goes through serde_json,
//! whose shortest-representation printing is exact by construction.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::picard::IterationRecord;
use crate::sde::TrajectoryBundle;
use crate::{Error, Result};

/// One f64 as a CSV field: 17 significant digits in scientific notation.
pub fn float_field(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a serializable object as pretty-printed JSON.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON file back into a typed object.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Writes recorded particle clouds as rows (t, particle, x0, ..).
pub fn write_trajectories_csv(path: &Path, bundle: &TrajectoryBundle) -> Result<()> {
    let d = bundle.dim();
    let mut out = String::from("t,particle");
    for a in 0..d {
        out.push_str(&format!(",x{a}"));
    }
    out.push('\n');
    for (&t, cloud) in bundle.times().iter().zip(bundle.states()) {
        for (i, p) in cloud.coords().chunks_exact(d).enumerate() {
            out.push_str(&float_field(t));
            out.push_str(&format!(",{i}"));
            for &x in p {
                out.push(',');
                out.push_str(&float_field(x));
            }
            out.push('\n');
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the fixed-point iteration log as rows (iter, rho, ratio); the
/// bootstrap row has no ratio and leaves the field empty.
pub fn write_iterations_csv(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut out = String::from("iter,rho,ratio\n");
    for rec in log {
        out.push_str(&format!("{},{}", rec.iter, float_field(rec.rho)));
        match rec.ratio {
            Some(r) => out.push_str(&format!(",{}\n", float_field(r))),
            None => out.push_str(",\n"),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a two-column (name, value) table.
pub fn write_named_values_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut out = String::from("name,value\n");
    for (name, value) in rows {
        out.push_str(&format!("{name},{}\n", float_field(*value)));
    }
    fs::write(path, out)?;
    Ok(())
}
