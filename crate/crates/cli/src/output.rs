//! `series.csv` and canonical JSON.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use viscowave_core::functionals::{EnergyLedger, LedgerRecord};

/// Column order of `series.csv`; downstream tooling depends on it.
pub const SERIES_HEADER: [&str; 14] = [
    "t",
    "E",
    "I",
    "J",
    "g_circ",
    "grad_sq",
    "lp",
    "v_sq",
    "v_bdry_sq",
    "M_coeff",
    "diss_rate",
    "F",
    "G",
    "H",
];

fn row(r: &LedgerRecord) -> [f64; 14] {
    [
        r.t,
        r.e,
        r.i,
        r.j,
        r.g_circ,
        r.grad_sq,
        r.lp,
        r.v_sq,
        r.v_bdry_sq,
        r.m_coeff,
        r.diss_rate,
        r.f,
        r.g,
        r.h,
    ]
}

pub fn write_series(w: impl Write, ledger: &EnergyLedger) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(SERIES_HEADER)?;
    for r in &ledger.records {
        out.write_record(row(r).iter().map(|v| format!("{v:.16e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a series written by [`write_series`]. Columns absent from the CSV
/// are left at zero in the returned records.
pub fn read_series(path: &Path) -> Result<EnergyLedger, String> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(SERIES_HEADER) {
        return Err(format!("{}: unexpected header", path.display()));
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let mut v = [0.0; 14];
        for (k, field) in rec.iter().enumerate() {
            v[k] = field.parse().map_err(|_| {
                format!(
                    "{}: row {} column {} is not a number",
                    path.display(),
                    i + 2,
                    k + 1
                )
            })?;
        }
        records.push(LedgerRecord {
            t: v[0],
            e: v[1],
            i: v[2],
            j: v[3],
            g_circ: v[4],
            grad_sq: v[5],
            grad_4: v[5] * v[5],
            lp: v[6],
            v_sq: v[7],
            v_bdry_sq: v[8],
            m_coeff: v[9],
            diss_rate: v[10],
            f: v[11],
            g: v[12],
            h: v[13],
            ..Default::default()
        });
    }
    Ok(EnergyLedger { records })
}

/// Compact JSON with every float printed as `{:.16e}` (17 significant digits).
struct CanonicalFloats;

impl Formatter for CanonicalFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes through `serde_json::Value`, which sorts object keys, so that
/// re-reading and re-writing the output reproduces it byte for byte.
/// Non-finite floats become `null`.
pub fn canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFloats);
    v.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
