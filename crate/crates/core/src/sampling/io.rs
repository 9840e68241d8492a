//! Trajectory persistence: CSV `t,y_1..y_m[,x]` plus a JSON metadata sidecar.
//!
//! Values are written in shortest round-trip form, so reading back yields
//! bit-identical `f64`s.

use super::{Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// Shortest decimal that parses back to exactly `v`.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn parse_f64(s: &str, what: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse()
            .map_err(|_| Error::config(what.to_string(), format!("`{t}` is not a number"))),
    }
}

/// Path of the metadata sidecar for a trajectory CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_trajectory(traj: &Trajectory, csv_path: &Path) -> Result<()> {
    let m = traj.obs_dim();
    let p = traj.hidden.as_ref().and_then(|h| h.first()).map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("y_{i}")));
    match p {
        0 => {}
        1 => header.push("x".into()),
        _ => header.extend((1..=p).map(|i| format!("x_{i}"))),
    }
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(&header)?;
    for (k, row) in traj.rows().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        if let Some(h) = &traj.hidden {
            rec.extend(h[k].iter().map(|&v| fmt_f64(v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    fs::write(sidecar_path(csv_path), serde_json::to_string_pretty(&traj.meta)? + "\n")?;
    Ok(())
}

/// Read a trajectory CSV; metadata comes from the sidecar when present.
pub fn read_trajectory(csv_path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(csv_path)?;
    let header = r.headers()?.clone();
    let y_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("y_"))
        .map(|(i, _)| i)
        .collect();
    let x_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "x" || h.starts_with("x_"))
        .map(|(i, _)| i)
        .collect();
    if y_cols.is_empty() {
        return Err(Error::config("data", "CSV has no y_ columns"));
    }
    let mut obs = Vec::new();
    let mut hidden = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for &i in &y_cols {
            obs.push(parse_f64(&rec[i], &header[i])?);
        }
        if !x_cols.is_empty() {
            hidden.push(
                x_cols
                    .iter()
                    .map(|&i| parse_f64(&rec[i], &header[i]))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
    }
    let side = sidecar_path(csv_path);
    let meta = if side.exists() {
        serde_json::from_str(&fs::read_to_string(side)?)?
    } else {
        TrajectoryMeta::new("unknown", 0, vec![])
    };
    let hidden = (!x_cols.is_empty()).then_some(hidden);
    Trajectory::from_parts(obs, y_cols.len(), hidden, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn float_text_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back = parse_f64(&fmt_f64(v), "v").unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
