use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Method, OutputConfig, OutputFormat, ResultRecord};
use crate::error::{Error, Result};

const COLUMNS: [&str; 13] = [
    "scenario", "method", "delta_theta", "n", "d_anc", "p_err", "p_succ", "status", "seed", "qfi", "angle", "wall_time",
    "detail",
];

/// Twelve significant digits in scientific notation.
fn fmt_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// CSV text for `records`. Wall times are left blank unless `timings`.
pub fn records_to_csv(records: &[ResultRecord], timings: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.scenario.clone(),
            r.method.name().to_string(),
            opt(r.delta_theta, fmt_float),
            r.n.to_string(),
            opt(r.d_anc, |d| d.to_string()),
            opt(r.p_err, fmt_float),
            opt(r.p_succ, fmt_float),
            r.status.clone(),
            opt(r.seed, |s| s.to_string()),
            opt(r.qfi, fmt_float),
            opt(r.angle, fmt_float),
            if timings { opt(r.wall_time, fmt_float) } else { String::new() },
            r.detail.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn parse_field<T: std::str::FromStr>(s: &str, column: &str, line: usize) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Config(format!("line {line}: bad {column} `{s}`")))
}

/// Reads CSV written by [`records_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(Error::Config(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let f = |k: usize| row.get(k).unwrap_or("");
        let method = Method::parse(f(1)).ok_or_else(|| Error::Config(format!("line {line}: unknown method `{}`", f(1))))?;
        let n = parse_field(f(3), "n", line)?.ok_or_else(|| Error::Config(format!("line {line}: missing n")))?;
        out.push(ResultRecord {
            scenario: f(0).to_string(),
            method,
            delta_theta: parse_field(f(2), "delta_theta", line)?,
            n,
            d_anc: parse_field(f(4), "d_anc", line)?,
            p_err: parse_field(f(5), "p_err", line)?,
            p_succ: parse_field(f(6), "p_succ", line)?,
            status: f(7).to_string(),
            seed: parse_field(f(8), "seed", line)?,
            qfi: parse_field(f(9), "qfi", line)?,
            angle: parse_field(f(10), "angle", line)?,
            wall_time: parse_field(f(11), "wall_time", line)?,
            detail: f(12).to_string(),
        });
    }
    Ok(out)
}

pub fn records_to_json(records: &[ResultRecord], timings: bool) -> Result<String> {
    let stripped: Vec<ResultRecord>;
    let view = if timings {
        records
    } else {
        stripped = records.iter().cloned().map(|r| ResultRecord { wall_time: None, ..r }).collect();
        &stripped
    };
    let mut s = serde_json::to_string_pretty(view).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `p_err` against `N` for one `(method, Δθ, d_A)` combination.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub scenario: String,
    pub method: Method,
    pub delta_theta: Option<f64>,
    pub d_anc: Option<usize>,
    pub points: Vec<(usize, f64)>,
}

impl PlotSeries {
    pub fn file_name(&self) -> String {
        let mut s = format!("{}_{}", self.scenario, self.method.name());
        if let Some(dt) = self.delta_theta {
            s.push_str(&format!("_dt{dt}"));
        }
        if let Some(d) = self.d_anc {
            s.push_str(&format!("_dA{d}"));
        }
        s.push_str(".dat");
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# N p_err\n");
        for (n, p) in &self.points {
            s.push_str(&format!("{n} {}\n", fmt_float(*p)));
        }
        s
    }
}

/// Groups records with a value into plot series, skipping skipped and
/// failed cells.
pub fn plot_series(records: &[ResultRecord]) -> Vec<PlotSeries> {
    let mut groups: BTreeMap<(String, Method, Option<u64>, Option<usize>), PlotSeries> = BTreeMap::new();
    for r in records {
        let Some(p) = r.p_err else { continue };
        let key = (r.scenario.clone(), r.method, r.delta_theta.map(f64::to_bits), r.d_anc);
        groups
            .entry(key)
            .or_insert_with(|| PlotSeries {
                scenario: r.scenario.clone(),
                method: r.method,
                delta_theta: r.delta_theta,
                d_anc: r.d_anc,
                points: Vec::new(),
            })
            .points
            .push((r.n, p));
    }
    let mut out: Vec<PlotSeries> = groups.into_values().collect();
    for s in &mut out {
        s.points.sort_by_key(|&(n, _)| n);
    }
    out.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.delta_theta.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.delta_theta.unwrap_or(f64::NEG_INFINITY)))
            .then(a.d_anc.cmp(&b.d_anc))
    });
    out
}

/// Writes `<dir>/<scenario>.csv` (or `.json`) and, if requested, one plot
/// file per series under `<dir>/plot/`. Returns the written paths.
/// Identical records produce identical bytes.
pub fn emit_results(records: &[ResultRecord], scenario: &str, dir: &Path, out: &OutputConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let (ext, text) = match out.format {
        OutputFormat::Csv => ("csv", records_to_csv(records, out.timings)?),
        OutputFormat::Json => ("json", records_to_json(records, out.timings)?),
    };
    let path = dir.join(format!("{scenario}.{ext}"));
    fs::write(&path, text)?;
    written.push(path);
    if out.plot_data {
        let plot_dir = dir.join("plot");
        fs::create_dir_all(&plot_dir)?;
        for s in plot_series(records) {
            let path = plot_dir.join(s.file_name());
            fs::write(&path, s.to_text())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ResultRecord> {
        let base = ResultRecord::new("demo, \"quoted\"", Method::Seesaw, Some(0.3), 4);
        vec![
            ResultRecord { d_anc: Some(2), seed: Some(7), wall_time: Some(1.25), ..base.clone().with_p_err(0.123456789012345) },
            ResultRecord { qfi: Some(398.123456789), angle: Some(1.2), ..base.clone().with_p_err(1.0 / 3.0) },
            base.clone().skipped("too large"),
            ResultRecord { method: Method::Exact, delta_theta: None, ..base.with_p_err(2.5e-7) },
        ]
    }

    fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() <= tol,
            _ => false,
        }
    }

    #[test]
    fn csv_round_trip() {
        let recs = sample();
        let back = parse_csv(&records_to_csv(&recs, true).unwrap()).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!((&a.scenario, a.method, a.n, a.d_anc, a.seed), (&b.scenario, b.method, b.n, b.d_anc, b.seed));
            assert_eq!((&a.status, &a.detail), (&b.status, &b.detail));
            // Probabilities lie in [0, 1], where twelve significant digits
            // resolve 1e-12.
            assert!(close(a.p_err, b.p_err, 1e-12) && close(a.p_succ, b.p_succ, 1e-12));
            for (x, y) in [(a.delta_theta, b.delta_theta), (a.qfi, b.qfi), (a.angle, b.angle), (a.wall_time, b.wall_time)] {
                let scale = x.map_or(0.0, f64::abs);
                assert!(close(x, y, 5e-12 * scale), "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn timings_only_on_request() {
        let recs = sample();
        let quiet = parse_csv(&records_to_csv(&recs, false).unwrap()).unwrap();
        assert!(quiet.iter().all(|r| r.wall_time.is_none()));
        assert!(!records_to_json(&recs, false).unwrap().contains("1.25"));
    }

    #[test]
    fn emission_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputConfig::default();
        let mut recs = sample();
        recs[0].scenario = "demo".into();
        let a = emit_results(&recs, "demo", &dir.path().join("a"), &out).unwrap();
        recs[0].wall_time = Some(99.0);
        let b = emit_results(&recs, "demo", &dir.path().join("b"), &out).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn plot_series_skip_missing_values() {
        let series = plot_series(&sample());
        let total: usize = series.iter().map(|s| s.points.len()).sum();
        assert_eq!(total, 3);
    }
}
