//! File emission: diagnostics CSV, study tables, fit summaries, metadata.
//!
//! CSV schema (fixed):
//!   t,E,diss_visc_cum,G,diss_struct_cum,src_struct_cum,curl_res,l2_u,
//!   l2_gradF,l2_lapF[,lr_F_<r>...]
//! Numbers are printed with 17 significant digits, which round-trips f64
//! exactly. Identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::evolution::{RunMeta, SolverConfig, Trajectory};
use crate::experiments::{GalerkinResult, MmsReport, StudyResult};
use crate::snapshot;

/// 17 significant digits: exact f64 round-trip through text.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(lr_exponents: &[f64]) -> String {
    let mut header = String::from(
        "t,E,diss_visc_cum,G,diss_struct_cum,src_struct_cum,curl_res,l2_u,l2_gradF,l2_lapF",
    );
    for &r in lr_exponents {
        header.push_str(&format!(",lr_F_{r}"));
    }
    header
}

pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    let mut row = [
        rec.t,
        rec.energy,
        rec.diss_visc_cum,
        rec.structure,
        rec.diss_struct_cum,
        rec.src_struct_cum,
        rec.curl_res,
        rec.l2_u,
        rec.l2_grad_f,
        rec.l2_lap_f,
    ]
    .iter()
    .map(|&v| format_float(v))
    .collect::<Vec<_>>()
    .join(",");
    for (_, value) in &rec.lr_f {
        row.push(',');
        row.push_str(&format_float(*value));
    }
    row
}

pub fn write_diagnostics_csv(
    path: &Path,
    records: &[DiagnosticsRecord],
    lr_exponents: &[f64],
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{}", csv_header(lr_exponents))?;
    for rec in records {
        writeln!(file, "{}", csv_row(rec))?;
    }
    Ok(())
}

/// Parse one diagnostics CSV back into (header, rows of floats).
pub fn read_diagnostics_csv(path: &Path) -> Result<(String, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty diagnostics CSV".into()))?
        .to_string();
    let width = header.split(',').count();
    let mut rows = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (i, line) in lines.enumerate() {
        let values: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{v}' in CSV row {}", i + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != width {
            return Err(Error::Format(format!(
                "CSV row {} has {} columns, header has {width}",
                i + 2,
                values.len()
            )));
        }
        if values[0] <= prev_t {
            return Err(Error::Format("CSV times not strictly increasing".into()));
        }
        prev_t = values[0];
        rows.push(values);
    }
    Ok((header, rows))
}

/// Write a completed run: diagnostics CSV, state snapshots, and metadata.
pub fn write_run(
    dir: &Path,
    config: &SolverConfig,
    config_echo: &str,
    trajectory: &Trajectory,
    lr_exponents: &[f64],
    snapshots_enabled: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_diagnostics_csv(&dir.join("diagnostics.csv"), &trajectory.records, lr_exponents)?;
    if snapshots_enabled {
        for (i, (t, state)) in trajectory.snapshots.iter().enumerate() {
            let _ = t;
            snapshot::write_state(dir, &format!("snap_{i:05}"), state)?;
        }
    }
    write_meta(&dir.join("meta.txt"), config, &trajectory.meta)?;
    std::fs::write(dir.join("config.cfg"), config_echo)?;
    Ok(())
}

fn write_meta(path: &Path, config: &SolverConfig, meta: &RunMeta) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "config_fingerprint: {:016x}", meta.config_fingerprint)?;
    writeln!(file, "scheme: {}", config.scheme.name())?;
    writeln!(file, "wall_secs: {:.3}", meta.wall_secs)?;
    for warning in &meta.warnings {
        writeln!(file, "warning: {warning}")?;
    }
    Ok(())
}

/// Study outputs: errors.csv (one row per (param, t, r)), u_errors.csv,
/// and fits.json with the rate fits and the rate-bound evaluation.
pub fn write_study(dir: &Path, result: &StudyResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut file = std::fs::File::create(dir.join("errors.csv"))?;
    writeln!(file, "param,t,r,error")?;
    for row in &result.rows {
        writeln!(
            file,
            "{},{},{},{}",
            format_float(row.param),
            format_float(row.t),
            row.r,
            format_float(row.error)
        )?;
    }
    let mut file = std::fs::File::create(dir.join("u_errors.csv"))?;
    writeln!(file, "param,t,error")?;
    for row in &result.u_rows {
        writeln!(
            file,
            "{},{},{}",
            format_float(row.param),
            format_float(row.t),
            format_float(row.error)
        )?;
    }
    let json = serde_json::to_string_pretty(result)
        .map_err(|e| Error::Format(format!("serializing study result: {e}")))?;
    std::fs::write(dir.join("fits.json"), json)?;
    // member diagnostics in per-parameter subdirectories
    for member in &result.member_records {
        let sub = dir.join(format!("{}_{}", result.sweep, member.param));
        std::fs::create_dir_all(&sub)?;
        let lr: Vec<f64> = member
            .records
            .first()
            .map(|r| r.lr_f.iter().map(|(r, _)| *r).collect())
            .unwrap_or_default();
        write_diagnostics_csv(&sub.join("diagnostics.csv"), &member.records, &lr)?;
    }
    Ok(())
}

pub fn write_galerkin(dir: &Path, result: &GalerkinResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut file = std::fs::File::create(dir.join("galerkin.csv"))?;
    writeln!(file, "cutoff,t,error_F,error_u")?;
    for row in &result.rows {
        writeln!(
            file,
            "{},{},{},{}",
            row.cutoff,
            format_float(row.t),
            format_float(row.error_f),
            format_float(row.error_u)
        )?;
    }
    Ok(())
}

pub fn write_mms(dir: &Path, report: &MmsReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut file = std::fs::File::create(dir.join("mms_temporal.csv"))?;
    writeln!(file, "dt,error_y,error_u")?;
    for row in &report.temporal {
        writeln!(
            file,
            "{},{},{}",
            format_float(row.dt),
            format_float(row.error_y),
            format_float(row.error_u)
        )?;
    }
    let mut file = std::fs::File::create(dir.join("mms_spatial.csv"))?;
    writeln!(file, "n,error_y,error_u,resolved")?;
    for row in &report.spatial {
        writeln!(
            file,
            "{},{},{},{}",
            row.n,
            format_float(row.error_y),
            format_float(row.error_u),
            row.resolved
        )?;
    }
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("serializing mms report: {e}")))?;
    std::fs::write(dir.join("mms_fits.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_roundtrips() {
        for v in [0.0, 1.0, -1.5, 0.1, std::f64::consts::PI, 1e-300, 2.2250738585072014e-308] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn header_includes_lr_columns() {
        assert_eq!(
            csv_header(&[]),
            "t,E,diss_visc_cum,G,diss_struct_cum,src_struct_cum,curl_res,l2_u,l2_gradF,l2_lapF"
        );
        assert!(csv_header(&[1.5, 3.0]).ends_with(",lr_F_1.5,lr_F_3"));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = DiagnosticsRecord {
            t: 0.1,
            energy: std::f64::consts::E,
            diss_visc_cum: 1e-7,
            structure: 0.3,
            diss_struct_cum: 2e-9,
            src_struct_cum: 0.25,
            curl_res: 1e-15,
            l2_u: 0.5,
            l2_grad_f: 1.25,
            l2_lap_f: 7.5,
            lr_f: vec![(1.5, 0.875)],
            rate_visc: 0.0,
            rate_lap: 0.0,
            rate_hessian: 0.0,
            rate_gradu: 0.0,
            rate_src: 0.0,
        };
        let mut rec2 = rec.clone();
        rec2.t = 0.2;
        let path = dir.path().join("d.csv");
        write_diagnostics_csv(&path, &[rec.clone(), rec2], &[1.5]).unwrap();
        let (header, rows) = read_diagnostics_csv(&path).unwrap();
        assert_eq!(header, csv_header(&[1.5]));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][1].to_bits(), rec.energy.to_bits());
        assert_eq!(rows[0][10].to_bits(), 0.875f64.to_bits());
    }
}
