//! File output: diagnostics and metric tables as CSV, ray fans, two-column
//! plot data and JSON reports.
//!
//! Floats are written with 17 significant digits so that a run can be
//! compared byte for byte against a rerun.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::experiments::{DataTable, ExperimentReport};
use crate::geometric_optics::RayBundle;
use crate::norms::DiagnosticsRow;
use crate::scalar::Real;

/// `{:.16e}`, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_error(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.into_iter().map(format_float)).map_err(csv_error)?;
    }
    w.flush()
}

/// Diagnostics as CSV, columns in [`DiagnosticsRow::COLUMNS`] order.
pub fn write_diagnostics_csv<T: Real>(path: &Path, rows: &[DiagnosticsRow<T>]) -> io::Result<()> {
    write_rows(path, &DiagnosticsRow::<T>::COLUMNS, rows.iter().map(|r| r.to_array().map(|v| v.as_f64())))
}

pub fn write_table_csv(path: &Path, table: &DataTable) -> io::Result<()> {
    let header: Vec<&str> = table.columns.iter().map(String::as_str).collect();
    write_rows(path, &header, table.rows.iter().map(|r| r.iter().copied()))
}

/// Whitespace-separated `x y` pairs with a `#` header line.
pub fn write_plot_data(path: &Path, labels: (&str, &str), points: impl IntoIterator<Item = (f64, f64)>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {} {}", labels.0, labels.1)?;
    for (x, y) in points {
        writeln!(w, "{} {}", format_float(x), format_float(y))?;
    }
    w.flush()
}

/// One row per ray and recorded time: `t, y, x, xi, J, phi` (vector columns
/// are split per axis in 2D).
pub fn write_rays_csv<T: Real>(path: &Path, bundle: &RayBundle<T>) -> io::Result<()> {
    let d = bundle.dim();
    let header: Vec<String> = if d == 1 {
        ["t", "y", "x", "xi", "J", "phi"].iter().map(|s| s.to_string()).collect()
    } else {
        let mut h = vec!["t".to_string()];
        for name in ["y", "x", "xi"] {
            h.extend((0..d).map(|a| format!("{name}_{a}")));
        }
        h.push("J".into());
        h.push("phi".into());
        h
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = bundle.times().iter().enumerate().flat_map(|(k, &t)| {
        bundle.slice(k).iter().zip(bundle.launch_points()).map(move |(s, y)| {
            let mut row = vec![t.as_f64()];
            row.extend(y[..d].iter().map(|v| v.as_f64()));
            row.extend(s.x[..d].iter().map(|v| v.as_f64()));
            row.extend(s.xi[..d].iter().map(|v| v.as_f64()));
            row.push(s.jacobian(d).as_f64());
            row.push(s.phi.as_f64());
            row
        })
    });
    write_rows(path, &header, rows)
}

/// Writes `<dir>/<report.name>/`: `report.json`, one CSV per table and a
/// `.dat` plot file per two-column table. Records the written paths in
/// `report.artifacts` and returns them.
pub fn write_report(dir: &Path, report: &mut ExperimentReport) -> io::Result<Vec<PathBuf>> {
    let out = dir.join(&report.name);
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for table in &report.tables {
        let csv = out.join(format!("{}.csv", table.name));
        write_table_csv(&csv, table)?;
        written.push(csv);
        if table.columns.len() == 2 {
            let dat = out.join(format!("{}.dat", table.name));
            write_plot_data(&dat, (&table.columns[0], &table.columns[1]), table.rows.iter().map(|r| (r[0], r[1])))?;
            written.push(dat);
        }
    }
    let json = out.join("report.json");
    written.push(json.clone());
    report.artifacts = written
        .iter()
        .map(|p| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    let text = serde_json::to_string_pretty(&*report).map_err(io::Error::other)?;
    fs::write(&json, text + "\n")?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometric_optics::trace_rays_at;
    use crate::potentials::Potential;
    use crate::spectral::{make_grid, WaveField};

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn diagnostics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid::<f64>(1, 8.0, 64).unwrap();
        let u = WaveField::from_real_fn(&g, |x| (-x[0] * x[0]).exp());
        let p = Potential::harmonic(&[1.0]).unwrap();
        let rows = vec![DiagnosticsRow::compute(&u, &p, 1.0, 1.0, 0.0), DiagnosticsRow::compute(&u, &p, 1.0, 1.0, 0.5)];
        let path = dir.path().join("d.csv");
        write_diagnostics_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,mass,kinetic,potential_energy,nonlinear_energy,total_E,modified_E_lambda,sigma_norm,sigma_tilde_norm,b1_norm,sup_norm"
        );
        let second: Vec<f64> = lines.nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(second, rows[1].to_array().to_vec());
    }

    #[test]
    fn report_and_rays() {
        let dir = tempfile::tempdir().unwrap();
        let p = Potential::harmonic(&[1.0]).unwrap();
        let b = trace_rays_at(&p, &[[0.5, 0.0], [1.0, 0.0]], &[0.1], 1e-3).unwrap();
        let rays = dir.path().join("rays.csv");
        write_rays_csv(&rays, &b).unwrap();
        let text = fs::read_to_string(&rays).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        assert!(text.starts_with("t,y,x,xi,J,phi\n"));

        let mut rep = ExperimentReport::new("regime-table");
        rep.measure("x", 1.0);
        let mut t = DataTable::new("curve", &["t", "y"]);
        t.rows.push(vec![0.0, 1.0]);
        rep.tables.push(t);
        let files = write_report(dir.path(), &mut rep).unwrap();
        assert_eq!(files.len(), 3);
        assert!(files.iter().all(|f| f.exists()));
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(files.last().unwrap()).unwrap()).unwrap();
        assert_eq!(json["name"], "regime-table");
        assert!(!rep.artifacts.is_empty());
    }
}
