//! CSV and two-column data files.
//!
//! Floats are written as `{:.16e}`, which round-trips every `f64` exactly.

use std::fs;
use std::path::{Path, PathBuf};

use homlab::harness::{Cell, CellStatus, Quantity, RateReport, SweepData, UniformityReport};
use homlab::spectral::SpectralParameter;
use homlab::{Error, Result};

pub const CELLS_HEADER: [&str; 7] = ["epsilon", "lambda_modulus", "lambda_angle", "p", "norm", "error", "status"];
pub const RATES_HEADER: [&str; 8] = ["lambda_modulus", "lambda_angle", "p", "norm", "slope", "constant", "residual", "pass"];
pub const UNIFORMITY_HEADER: [&str; 7] = ["p", "norm", "min", "max", "spread", "limit", "pass"];

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Argument of `λ` in `[0, 2π)`; 0 for `λ = 0`.
pub fn lambda_angle(l: &SpectralParameter) -> f64 {
    l.argument().unwrap_or(0.0)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(format!("{}: {e}", path.display())))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

/// One row per sweep cell, in sweep order.
pub fn write_cells(path: &Path, cells: &[Cell]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CELLS_HEADER).map_err(|e| csv_err(path, e))?;
    for c in cells {
        let status = match &c.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(msg) => format!("failed: {msg}"),
        };
        w.write_record([
            float(c.eps),
            float(c.lambda.modulus()),
            float(lambda_angle(&c.lambda)),
            float(c.p),
            c.quantity.name().to_string(),
            float(c.value),
            status,
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed `cells.csv` row; `λ` is kept in polar form as written.
#[derive(Clone, Debug, PartialEq)]
pub struct CellRecord {
    pub eps: f64,
    pub lambda_modulus: f64,
    pub lambda_angle: f64,
    pub p: f64,
    pub quantity: Quantity,
    pub value: f64,
    pub status: CellStatus,
}

impl CellRecord {
    pub fn from_cell(c: &Cell) -> Self {
        Self {
            eps: c.eps,
            lambda_modulus: c.lambda.modulus(),
            lambda_angle: lambda_angle(&c.lambda),
            p: c.p,
            quantity: c.quantity,
            value: c.value,
            status: c.status.clone(),
        }
    }
}

pub fn read_cells(path: &Path) -> Result<Vec<CellRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(CELLS_HEADER) {
        return Err(Error::config("cells.csv", format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = format!("cells.csv[{}]", i + 1);
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::config(format!("{row}.{}", CELLS_HEADER[k]), e.to_string()))
        };
        let quantity = Quantity::from_name(&rec[4])
            .ok_or_else(|| Error::config(format!("{row}.norm"), format!("unknown norm `{}`", &rec[4])))?;
        let status = match &rec[6] {
            "ok" => CellStatus::Ok,
            s => CellStatus::Failed(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
        };
        out.push(CellRecord {
            eps: num(0)?,
            lambda_modulus: num(1)?,
            lambda_angle: num(2)?,
            p: num(3)?,
            quantity,
            value: num(5)?,
            status,
        });
    }
    Ok(out)
}

/// Rebuild sweep cells from records, matching `λ` against the configured shifts.
pub fn cells_from_records(records: &[CellRecord], lambdas: &[SpectralParameter]) -> Result<Vec<Cell>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let lambda = lambdas
                .iter()
                .find(|l| {
                    let m = l.modulus();
                    (m - r.lambda_modulus).abs() <= 1e-12 * m.max(1.0)
                        && (m == 0.0 || (lambda_angle(l) - r.lambda_angle).abs() <= 1e-12)
                })
                .ok_or_else(|| {
                    Error::config(
                        format!("cells.csv[{}]", i + 1),
                        format!("shift ({}, {}) is not in the configuration", r.lambda_modulus, r.lambda_angle),
                    )
                })?;
            Ok(Cell {
                eps: r.eps,
                lambda: *lambda,
                p: r.p,
                quantity: r.quantity,
                value: r.value,
                status: r.status.clone(),
            })
        })
        .collect()
}

pub fn write_rates(path: &Path, report: &RateReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RATES_HEADER).map_err(|e| csv_err(path, e))?;
    for row in &report.rows {
        let (slope, constant, residual) = match row.fit {
            Some(f) => (float(f.slope), float(f.constant), float(f.residual)),
            None => ("nan".into(), "nan".into(), "nan".into()),
        };
        w.write_record([
            float(row.lambda.modulus()),
            float(lambda_angle(&row.lambda)),
            float(row.p),
            row.quantity.name().to_string(),
            slope,
            constant,
            residual,
            row.pass.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_uniformity(path: &Path, report: &UniformityReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(UNIFORMITY_HEADER).map_err(|e| csv_err(path, e))?;
    for row in &report.rows {
        w.write_record([
            float(row.p),
            row.quantity.name().to_string(),
            float(row.min),
            float(row.max),
            float(row.spread),
            float(report.limit),
            row.pass.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot-ready whitespace-separated columns.
pub fn write_dat(path: &Path, header: &str, rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut s = format!("# {header}\n");
    for (x, y) in rows {
        s.push_str(&format!("{} {}\n", float(x), float(y)));
    }
    fs::write(path, s)?;
    Ok(())
}

/// `rate_<norm>_p<p>_l<k>.dat` for every row: `ε` against the error.
pub fn write_rate_dats(dir: &Path, report: &RateReport, lambdas: &[SpectralParameter]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for row in &report.rows {
        let k = lambdas.iter().position(|l| *l == row.lambda).unwrap_or(usize::MAX);
        let label = homlab::domain::p_label(row.p).replace('/', "over");
        let path = dir.join(format!("rate_{}_p{label}_l{k}.dat", row.quantity.name()));
        write_dat(
            &path,
            &format!("epsilon {} (lambda = {})", row.norm_label(), row.lambda.value()),
            row.eps.iter().copied().zip(row.errors.iter().copied()),
        )?;
        out.push(path);
    }
    Ok(out)
}

/// Every table of a finished sweep.
pub fn emit_tables(
    dir: &Path,
    sweep: &SweepData,
    rates: &RateReport,
    uniformity: Option<&UniformityReport>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![dir.join("cells.csv"), dir.join("rates.csv")];
    write_cells(&files[0], &sweep.cells)?;
    write_rates(&files[1], rates)?;
    if let Some(u) = uniformity {
        let p = dir.join("uniformity.csv");
        write_uniformity(&p, u)?;
        files.push(p);
    }
    files.extend(write_rate_dats(dir, rates, &sweep.config.lambdas)?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn any_cell() -> impl Strategy<Value = Cell> {
        (
            1e-4f64..1.0,
            -1e4f64..0.0,
            -1e4f64..1e4,
            1.01f64..8.0,
            0usize..4,
            prop_oneof![Just(f64::NAN), 0.0f64..1e3, Just(0.0)],
            any::<bool>(),
        )
            .prop_map(|(eps, re, im, p, q, value, ok)| Cell {
                eps,
                lambda: SpectralParameter::new(Complex64::new(re, im)).unwrap(),
                p,
                quantity: Quantity::ALL[q],
                value,
                status: if ok {
                    CellStatus::Ok
                } else {
                    CellStatus::Failed("no convergence, 10 iterations".into())
                },
            })
    }

    fn same(a: &CellRecord, b: &CellRecord) -> bool {
        let eq = |x: f64, y: f64| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan());
        eq(a.eps, b.eps)
            && eq(a.lambda_modulus, b.lambda_modulus)
            && eq(a.lambda_angle, b.lambda_angle)
            && eq(a.p, b.p)
            && eq(a.value, b.value)
            && a.quantity == b.quantity
            && a.status == b.status
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn cells_round_trip(cells in prop::collection::vec(any_cell(), 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("cells.csv");
            write_cells(&path, &cells).unwrap();
            let back = read_cells(&path).unwrap();
            prop_assert_eq!(back.len(), cells.len());
            for (c, r) in cells.iter().zip(&back) {
                prop_assert!(same(&CellRecord::from_cell(c), r), "{:?} vs {:?}", c, r);
            }
        }
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
