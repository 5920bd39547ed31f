//! CSV form of sweep datasets.
//!
//! ```text
//! # copkit-dataset schema=1 scenario_seed=42 cio=-10:10:2 hom=0:10:2
//! cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db,outage_count
//! -10.000000,-10.000000,-10.000000,0.000000,0.000000,0.000000,7.123457,0
//! ```
//!
//! The leading comment line is optional on input. Floats carry six decimals;
//! full-outage rows hold `NaN`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ParameterGrid, SweepDataset, SweepRecord, SCHEMA_VERSION};
use crate::error::{CopError, Result};
use crate::scenario::MobilityConfig;

pub const DATASET_COLUMNS: [&str; 8] = [
    "cio1",
    "cio2",
    "cio3",
    "hom1",
    "hom2",
    "hom3",
    "mean_sinr_db",
    "outage_count",
];

const MAGIC: &str = "# copkit-dataset";

fn fmt_f64(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        // avoid "-0.000000"
        let v = if v == 0.0 { 0.0 } else { v };
        let _ = write!(out, "{v:.6}");
    }
}

impl SweepDataset {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 2));
        let _ = write!(out, "{MAGIC} schema={}", self.schema_version);
        if let Some(seed) = self.scenario_seed {
            let _ = write!(out, " scenario_seed={seed}");
        }
        if let Some(g) = &self.grid {
            let _ = write!(
                out,
                " cio={}:{}:{} hom={}:{}:{}",
                g.cio_min, g.cio_max, g.cio_step, g.hom_min, g.hom_max, g.hom_step
            );
        }
        out.push('\n');
        out.push_str(&DATASET_COLUMNS.join(","));
        out.push('\n');
        for r in &self.records {
            for v in r.config.genes() {
                fmt_f64(&mut out, v);
                out.push(',');
            }
            fmt_f64(&mut out, r.mean_sinr_db);
            let _ = writeln!(out, ",{}", r.outage_count);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| CopError::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SweepDataset> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
        Self::from_csv_str(&text, path)
    }

    /// Parses dataset CSV text; `origin` only labels error messages.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<SweepDataset> {
        let (meta, body, skipped) = split_meta(text, origin)?;
        let rows = parse_rows(body, &DATASET_COLUMNS, origin, skipped)?;
        let mut records = Vec::with_capacity(rows.len());
        for (line, values) in rows {
            let genes = [
                values[0], values[1], values[2], values[3], values[4], values[5],
            ];
            let config = MobilityConfig::from_genes(genes).map_err(|e| CopError::Parse {
                path: origin.into(),
                line,
                message: e.to_string(),
            })?;
            let outage = values[7];
            if !(outage >= 0.0 && outage.fract() == 0.0) {
                return Err(CopError::Parse {
                    path: origin.into(),
                    line,
                    message: format!("outage_count {outage} is not a non-negative integer"),
                });
            }
            records.push(SweepRecord {
                config,
                mean_sinr_db: values[6],
                outage_count: outage as u64,
            });
        }
        Ok(SweepDataset {
            records,
            scenario_seed: meta.scenario_seed,
            grid: meta.grid,
            schema_version: meta.schema_version,
        })
    }
}

/// Reads a `cio1..hom3,mean_sinr_db` table (an `outage_count` column, if
/// present, is ignored). Used to import predictions made elsewhere.
pub fn read_prediction_table(path: impl AsRef<Path>) -> Result<Vec<([f64; 6], f64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
    let (_, body, skipped) = split_meta(&text, path)?;
    let rows = parse_rows(body, &DATASET_COLUMNS[..7], path, skipped)?;
    rows.into_iter()
        .map(|(line, v)| {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CopError::Parse {
                    path: path.into(),
                    line,
                    message: "prediction tables must be finite".into(),
                });
            }
            Ok(([v[0], v[1], v[2], v[3], v[4], v[5]], v[6]))
        })
        .collect()
}

struct Meta {
    schema_version: u32,
    scenario_seed: Option<u64>,
    grid: Option<ParameterGrid>,
}

fn split_meta<'a>(text: &'a str, origin: &Path) -> Result<(Meta, &'a str, u64)> {
    let mut meta = Meta {
        schema_version: SCHEMA_VERSION,
        scenario_seed: None,
        grid: None,
    };
    let Some(rest) = text.strip_prefix(MAGIC) else {
        return Ok((meta, text, 0));
    };
    let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
    let bad = |message: String| CopError::Parse {
        path: origin.into(),
        line: 1,
        message,
    };
    let (mut cio, mut hom) = (None, None);
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed metadata field {field:?}")))?;
        match key {
            "schema" => {
                meta.schema_version = value
                    .parse()
                    .map_err(|_| bad(format!("bad schema version {value:?}")))?
            }
            "scenario_seed" => {
                meta.scenario_seed = Some(
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad scenario seed {value:?}")))?,
                )
            }
            "cio" => cio = Some(parse_axis(value).ok_or_else(|| bad(format!("bad axis {value:?}")))?),
            "hom" => hom = Some(parse_axis(value).ok_or_else(|| bad(format!("bad axis {value:?}")))?),
            _ => log::debug!("ignoring dataset metadata {key}"),
        }
    }
    if meta.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "unsupported schema version {}",
            meta.schema_version
        )));
    }
    if let (Some(c), Some(h)) = (cio, hom) {
        meta.grid = Some(ParameterGrid {
            cio_min: c[0],
            cio_max: c[1],
            cio_step: c[2],
            hom_min: h[0],
            hom_max: h[1],
            hom_step: h[2],
        });
    }
    Ok((meta, body, 1))
}

fn parse_axis(value: &str) -> Option<[f64; 3]> {
    let mut parts = value.split(':').map(str::parse::<f64>);
    let axis = [parts.next()?.ok()?, parts.next()?.ok()?, parts.next()?.ok()?];
    parts.next().is_none().then_some(axis)
}

/// Parses the CSV body, returning `(line_number, values)` with values in
/// the order of `columns`. `skipped` is the number of lines consumed before
/// `body` started.
fn parse_rows(
    body: &str,
    columns: &[&str],
    origin: &Path,
    skipped: u64,
) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let parse_err = |line: u64, message: String| CopError::Parse {
        path: origin.into(),
        line: line + skipped,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let mut index = Vec::with_capacity(columns.len());
    for &col in columns {
        let i = position
            .get(col)
            .ok_or_else(|| parse_err(1, format!("missing column {col:?}")))?;
        index.push(*i);
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let values = index
            .iter()
            .zip(columns)
            .map(|(&i, col)| {
                let raw = record.get(i).unwrap_or("");
                raw.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("column {col}: cannot parse {raw:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepDataset {
        let grid = ParameterGrid::with_steps(10.0, 10.0);
        let records = super::super::enumerate_grid(&grid)
            .unwrap()
            .take(5)
            .enumerate()
            .map(|(i, config)| SweepRecord {
                config,
                mean_sinr_db: if i == 3 { f64::NAN } else { 7.25 - i as f64 * 0.125 },
                outage_count: i as u64,
            })
            .collect();
        SweepDataset {
            records,
            scenario_seed: Some(42),
            grid: Some(grid),
            schema_version: SCHEMA_VERSION,
        }
    }

    fn same(a: &SweepDataset, b: &SweepDataset) -> bool {
        a.scenario_seed == b.scenario_seed
            && a.grid == b.grid
            && a.records.len() == b.records.len()
            && a.records.iter().zip(&b.records).all(|(x, y)| {
                x.config == y.config
                    && x.outage_count == y.outage_count
                    && (x.mean_sinr_db == y.mean_sinr_db
                        || (x.is_full_outage() && y.is_full_outage()))
            })
    }

    #[test]
    fn round_trip() {
        let d = sample();
        let text = d.to_csv_string();
        let back = SweepDataset::from_csv_str(&text, Path::new("mem")).unwrap();
        assert!(same(&d, &back));
        assert_eq!(text, back.to_csv_string());
    }

    #[test]
    fn header_and_format() {
        let text = sample().to_csv_string();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# copkit-dataset schema=1 scenario_seed=42 cio=-10:10:10 hom=0:10:10"
        );
        assert_eq!(
            lines.next().unwrap(),
            "cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db,outage_count"
        );
        assert_eq!(
            lines.next().unwrap(),
            "-10.000000,-10.000000,-10.000000,0.000000,0.000000,0.000000,7.250000,0"
        );
        assert!(text.lines().nth(5).unwrap().contains(",NaN,3"));
    }

    #[test]
    fn reads_without_metadata() {
        let text = "cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db,outage_count\n0,0,0,0,0,0,1.5,0\n";
        let d = SweepDataset::from_csv_str(text, Path::new("mem")).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.scenario_seed, None);
        assert_eq!(d.records[0].mean_sinr_db, 1.5);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "cio1,cio2,cio3,hom1,hom2,hom3,outage_count\n0,0,0,0,0,0,0\n";
        let err = SweepDataset::from_csv_str(text, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("mean_sinr_db"), "{err}");
    }

    #[test]
    fn bad_value_reports_line() {
        let d = sample();
        let mut text = d.to_csv_string();
        text = text.replacen("7.125000", "seven", 1);
        let err = SweepDataset::from_csv_str(&text, Path::new("data.csv")).unwrap_err();
        match err {
            CopError::Parse { line, message, .. } => {
                // metadata line, header, first record, then the bad one
                assert_eq!(line, 4);
                assert!(message.contains("mean_sinr_db"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn off_range_config_is_rejected() {
        let text = "cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db,outage_count\n0,0,0,0,0,12,1.5,0\n";
        assert!(SweepDataset::from_csv_str(text, Path::new("mem")).is_err());
    }

    #[test]
    fn prediction_table_ignores_outage_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        fs::write(
            &path,
            "cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db\n0,0,0,0,0,0,8.5\n2,0,0,0,0,0,9\n",
        )
        .unwrap();
        let table = read_prediction_table(&path).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table[1], ([2.0, 0.0, 0.0, 0.0, 0.0, 0.0], 9.0));
    }
}
