//! Series file format. CSV with one metadata comment line, a fixed header
//! prefix (`n,samples,estimate,stderr`) and command-specific extra columns;
//! floats are printed with Rust's shortest round-trip formatting so parsing
//! an emitted file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::LabError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesMeta {
    pub schema: u32,
    pub command: String,
    pub hash: String,
    pub offset: u64,
    pub replicas: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub n: i32,
    pub samples: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub extras: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub meta: SeriesMeta,
    pub extra_names: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# perc-series schema={} command={} hash={} offset={} replicas={}",
            self.meta.schema, self.meta.command, self.meta.hash, self.meta.offset,
            self.meta.replicas
        );
        out.push_str("n,samples,estimate,stderr");
        for name in &self.extra_names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for row in &self.rows {
            assert_eq!(row.extras.len(), self.extra_names.len());
            let _ = write!(out, "{},{},{},{}", row.n, row.samples, row.estimate, row.stderr);
            for x in &row.extras {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| LabError::Io(format!("write {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Series, LabError> {
        let bad = |msg: String| LabError::Format(msg);
        let mut lines = text.lines();
        let meta_line = lines
            .next()
            .ok_or_else(|| bad("empty series file".into()))?
            .strip_prefix("# perc-series ")
            .ok_or_else(|| bad("missing metadata line".into()))?;
        let mut meta = SeriesMeta {
            schema: 0,
            command: String::new(),
            hash: String::new(),
            offset: 0,
            replicas: 0,
        };
        for field in meta_line.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("bad metadata field {field:?}")))?;
            match k {
                "schema" => {
                    meta.schema =
                        v.parse().map_err(|_| bad(format!("bad schema {v:?}")))?
                }
                "command" => meta.command = v.to_string(),
                "hash" => meta.hash = v.to_string(),
                "offset" => {
                    meta.offset = v.parse().map_err(|_| bad(format!("bad offset {v:?}")))?
                }
                "replicas" => {
                    meta.replicas =
                        v.parse().map_err(|_| bad(format!("bad replicas {v:?}")))?
                }
                other => return Err(bad(format!("unknown metadata field {other:?}"))),
            }
        }
        if meta.schema != SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema {}", meta.schema)));
        }
        let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let mut cols = header.split(',');
        for expected in ["n", "samples", "estimate", "stderr"] {
            if cols.next() != Some(expected) {
                return Err(bad(format!("header must start with n,samples,estimate,stderr: {header:?}")));
            }
        }
        let extra_names: Vec<String> = cols.map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let mut next = |what: &str| {
                it.next()
                    .ok_or_else(|| bad(format!("row {}: missing {what}", i + 1)))
            };
            let n = next("n")?
                .parse()
                .map_err(|_| bad(format!("row {}: bad n", i + 1)))?;
            let samples = next("samples")?
                .parse()
                .map_err(|_| bad(format!("row {}: bad samples", i + 1)))?;
            let estimate = next("estimate")?
                .parse()
                .map_err(|_| bad(format!("row {}: bad estimate", i + 1)))?;
            let stderr = next("stderr")?
                .parse()
                .map_err(|_| bad(format!("row {}: bad stderr", i + 1)))?;
            let mut extras = Vec::with_capacity(extra_names.len());
            for name in &extra_names {
                extras.push(
                    next(name)?
                        .parse()
                        .map_err(|_| bad(format!("row {}: bad {name}", i + 1)))?,
                );
            }
            if it.next().is_some() {
                return Err(bad(format!("row {}: too many columns", i + 1)));
            }
            rows.push(SeriesRow { n, samples, estimate, stderr, extras });
        }
        Ok(Series { meta, extra_names, rows })
    }

    pub fn read(path: &Path) -> Result<Series, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("read {}: {e}", path.display())))?;
        Series::parse(&text)
    }

    /// Index of a value column by name; the fixed columns count too.
    pub fn column(&self, name: &str) -> Result<ValueColumn, LabError> {
        match name {
            "estimate" => Ok(ValueColumn::Estimate),
            "stderr" => Ok(ValueColumn::Stderr),
            _ => self
                .extra_names
                .iter()
                .position(|x| x == name)
                .map(ValueColumn::Extra)
                .ok_or_else(|| LabError::Usage(format!("no column named {name:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ValueColumn {
    Estimate,
    Stderr,
    Extra(usize),
}

impl ValueColumn {
    pub fn get(self, row: &SeriesRow) -> f64 {
        match self {
            ValueColumn::Estimate => row.estimate,
            ValueColumn::Stderr => row.stderr,
            ValueColumn::Extra(i) => row.extras[i],
        }
    }
}

/// The exponent targets echoed into every JSON summary, exact rationals next
/// to their decimal values.
pub fn target_table() -> serde_json::Value {
    let entry = |name: &str, num: i64, den: i64| {
        serde_json::json!({
            "name": name,
            "numerator": num,
            "denominator": den,
            "value": num as f64 / den as f64,
        })
    };
    serde_json::Value::Array(vec![
        entry("one_arm", 5, 48),
        entry("two_arm", 3, 12),
        entry("four_arm", 15, 12),
        entry("mean_conditioned_volume", 91, 48),
        entry("variance_conditioned_volume", 91, 24),
    ])
}
