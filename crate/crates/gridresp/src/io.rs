//! On-disk formats: trace CSV with a metadata sidecar, response CSV,
//! report CSV, and a small sectioned key=value format shared by
//! sidecars and experiment definitions.
//!
//! All numbers are written with the shortest representation that
//! parses back to the identical value, and all writes go through a
//! temp-file rename, so repeated runs with the same inputs produce
//! byte-identical files and readers never observe partial output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluate::RecoveryReport;
use crate::response::ImpulseResponse;
use crate::trace::{Channel, SignalTrace};

/// Writes through a temporary file in the target directory, then
/// renames over the destination.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Error::io(path, e))?;
    std::fs::write(tmp.path(), bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Sidecar path for a data file: same location, `.meta` extension.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Writes a trace as `t,<channel>,...` CSV plus a key=value sidecar
/// holding the sampling grid and any extra annotations.
pub fn write_trace_csv(
    path: &Path,
    trace: &SignalTrace,
    extra_meta: &[(String, String)],
) -> Result<()> {
    let mut csv = String::from("t");
    for c in trace.channels() {
        csv.push(',');
        csv.push_str(&c.name);
    }
    csv.push('\n');
    for m in 0..trace.len() {
        write!(csv, "{}", trace.time(m)).unwrap();
        for c in trace.channels() {
            write!(csv, ",{}", c.samples[m]).unwrap();
        }
        csv.push('\n');
    }
    atomic_write(path, csv.as_bytes())?;

    let mut meta = String::new();
    writeln!(meta, "rate_hz = {}", trace.rate_hz()).unwrap();
    writeln!(meta, "start_time_s = {}", trace.start_time_s()).unwrap();
    writeln!(meta, "samples = {}", trace.len()).unwrap();
    for (k, v) in extra_meta {
        writeln!(meta, "{k} = {v}").unwrap();
    }
    atomic_write(&meta_path(path), meta.as_bytes())
}

/// Reads a trace CSV. The sampling grid comes from the sidecar when one
/// is present, otherwise from the time column, which must be uniform.
pub fn read_trace_csv(path: &Path) -> Result<SignalTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(Error::Config(format!(
            "{}: first column must be t, got {:?}",
            path.display(),
            cols.first().unwrap_or(&"")
        )));
    }

    let mut kinds = Vec::with_capacity(cols.len() - 1);
    for name in &cols[1..] {
        let (kind, _) = Channel::parse_name(name)?;
        kinds.push(kind);
    }

    let mut times: Vec<f64> = Vec::new();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); cols.len() - 1];
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Config(format!(
                "{}:{}: {} fields, expected {}",
                path.display(),
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                Error::Config(format!(
                    "{}:{}: bad number {s:?}",
                    path.display(),
                    lineno + 2
                ))
            })
        };
        times.push(parse(fields[0])?);
        for (i, f) in fields[1..].iter().enumerate() {
            samples[i].push(parse(f)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Config(format!(
            "{}: need at least 2 samples",
            path.display()
        )));
    }

    let meta = read_meta(path).unwrap_or_default();
    let lookup = |key: &str| -> Option<f64> {
        meta.iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
    };
    let (rate, start) = match (lookup("rate_hz"), lookup("start_time_s")) {
        (Some(r), Some(s)) => (r, s),
        _ => {
            let dt = times[1] - times[0];
            for w in times.windows(2) {
                if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs().max(1e-12) {
                    return Err(Error::Config(format!(
                        "{}: time column is not uniform",
                        path.display()
                    )));
                }
            }
            (1.0 / dt, times[0])
        }
    };

    let channels = cols[1..]
        .iter()
        .zip(kinds)
        .zip(samples)
        .map(|((name, kind), samples)| Channel {
            name: name.to_string(),
            kind,
            samples,
        })
        .collect();
    SignalTrace::new(rate, start, channels)
}

/// Reads the sidecar for a data file, if present.
pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>> {
    let mp = meta_path(path);
    if !mp.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    Ok(parse_kv(&text)?.globals)
}

/// Writes a response as `tau,value,source,target,kind` CSV.
pub fn write_response_csv(path: &Path, resp: &ImpulseResponse) -> Result<()> {
    let mut csv = String::from("tau,value,source,target,kind\n");
    for (i, lag) in resp.lags().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{}",
            lag,
            resp.values[i],
            resp.source,
            resp.target,
            resp.kind
        )
        .unwrap();
    }
    atomic_write(path, csv.as_bytes())
}

/// Reads a response CSV written by `write_response_csv`. The lag column
/// must be uniform; endpoint names and the kind come from the rows and
/// must be consistent throughout.
pub fn read_response_csv(path: &Path) -> Result<ImpulseResponse> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty file", path.display())))?;
    if header != "tau,value,source,target,kind" {
        return Err(Error::Config(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }

    let mut lags = Vec::new();
    let mut values = Vec::new();
    let mut ident: Option<(String, String, String)> = None;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Config(format!(
                "{}:{}: {} fields, expected 5",
                path.display(),
                lineno + 2,
                f.len()
            )));
        }
        let bad = |what: &str, s: &str| {
            Error::Config(format!(
                "{}:{}: bad {what} {s:?}",
                path.display(),
                lineno + 2
            ))
        };
        lags.push(f[0].parse::<f64>().map_err(|_| bad("lag", f[0]))?);
        values.push(f[1].parse::<f64>().map_err(|_| bad("value", f[1]))?);
        let row_ident = (f[2].to_string(), f[3].to_string(), f[4].to_string());
        match &ident {
            None => ident = Some(row_ident),
            Some(prev) if *prev != row_ident => {
                return Err(Error::Config(format!(
                    "{}:{}: endpoint columns change mid-file",
                    path.display(),
                    lineno + 2
                )));
            }
            _ => {}
        }
    }
    let (source, target, kind) =
        ident.ok_or_else(|| Error::Config(format!("{}: no data rows", path.display())))?;
    if lags.len() < 2 {
        return Err(Error::Config(format!(
            "{}: need at least 2 rows",
            path.display()
        )));
    }
    let step = lags[1] - lags[0];
    for w in lags.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step.abs().max(1e-12) {
            return Err(Error::Config(format!(
                "{}: lag column is not uniform",
                path.display()
            )));
        }
    }
    Ok(ImpulseResponse {
        start_lag_s: lags[0],
        lag_step_s: step,
        values,
        source,
        target,
        kind: kind.parse()?,
        relation: None,
        scale_applied: 1.0,
    })
}

/// Writes recovery reports, one row per curve. Metrics a curve does not
/// support are left as empty cells.
pub fn write_report_csv(path: &Path, reports: &[RecoveryReport]) -> Result<()> {
    let mut csv = String::from(
        "source,target,relation,normalized_mse,nadir_time_s,nadir_value,est_osc_freq_hz,est_damping\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in reports {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.source,
            r.target,
            r.relation,
            opt(r.normalized_mse),
            opt(r.nadir.map(|n| n.time_s)),
            opt(r.nadir.map(|n| n.value)),
            opt(r.mode.map(|m| m.freq_hz)),
            opt(r.mode.map(|m| m.log_decrement)),
        )
        .unwrap();
    }
    atomic_write(path, csv.as_bytes())
}

/// A parsed key=value file: top-level pairs followed by named sections.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    pub globals: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl KvFile {
    pub fn global(&self, key: &str) -> Option<&str> {
        self.globals
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Parses `key = value` lines with `#` comments and `[section]` headers.
pub fn parse_kv(text: &str) -> Result<KvFile> {
    let mut out = KvFile::default();
    let mut current: Option<usize> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: unterminated section header {line:?}",
                    lineno + 1
                ))
            })?;
            out.sections.push((name.to_string(), Vec::new()));
            current = Some(out.sections.len() - 1);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
        })?;
        let pair = (k.trim().to_string(), v.trim().to_string());
        match current {
            Some(i) => out.sections[i].1.push(pair),
            None => out.globals.push(pair),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::ResponseKind;
    use crate::trace::ChannelKind;
    use approx::assert_abs_diff_eq;

    fn demo_trace() -> SignalTrace {
        SignalTrace::new(
            100.0,
            0.005,
            vec![
                Channel::new(ChannelKind::RotorAngle, 1, vec![0.1, 0.2, 0.3]),
                Channel::new(ChannelKind::LineFlow, "1-2", vec![-1.0, 0.5, 0.25]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn trace_round_trips_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let t = demo_trace();
        write_trace_csv(&path, &t, &[("seed".into(), "7".into())]).unwrap();

        let meta = read_meta(&path).unwrap();
        assert!(meta.iter().any(|(k, v)| k == "seed" && v == "7"));

        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.rate_hz(), 100.0);
        assert_eq!(back.start_time_s(), 0.005);
        assert_eq!(back.len(), 3);
        let flow = back.require("line_flow:1-2").unwrap();
        assert_eq!(flow.kind, ChannelKind::LineFlow);
        assert_eq!(flow.samples, vec![-1.0, 0.5, 0.25]);
    }

    #[test]
    fn trace_reads_without_sidecar_from_time_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        atomic_write(
            &path,
            b"t,rotor_freq:1\n0.5,1\n0.6,2\n0.7,3\n",
        )
        .unwrap();
        let t = read_trace_csv(&path).unwrap();
        assert_abs_diff_eq!(t.rate_hz(), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.start_time_s(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trace_rejects_nonuniform_times() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        atomic_write(&path, b"t,rotor_freq:1\n0,1\n0.1,2\n0.3,3\n").unwrap();
        assert!(read_trace_csv(&path).is_err());
    }

    #[test]
    fn identical_writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let t = demo_trace();
        write_trace_csv(&a, &t, &[]).unwrap();
        write_trace_csv(&b, &t, &[]).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn response_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resp.csv");
        let r = ImpulseResponse::analytic(
            0.01,
            vec![0.0, 0.5, 0.8, 0.9],
            "input:2",
            "rotor_freq:1",
            ResponseKind::Frequency,
        );
        write_response_csv(&path, &r).unwrap();
        let back = read_response_csv(&path).unwrap();
        assert_eq!(back.values, r.values);
        assert_eq!(back.source, "input:2");
        assert_eq!(back.kind, ResponseKind::Frequency);
        assert_abs_diff_eq!(back.lag_step_s, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn report_rows_leave_missing_metrics_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let rows = vec![RecoveryReport {
            source: "rotor_freq:1".into(),
            target: "rotor_freq:2".into(),
            relation: "freq-freq/order0".into(),
            normalized_mse: Some(0.25),
            nadir: None,
            mode: None,
        }];
        write_report_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "rotor_freq:1,rotor_freq:2,freq-freq/order0,0.25,,,,");
    }

    #[test]
    fn missing_file_errors_carry_the_path() {
        let e = read_trace_csv(Path::new("/nonexistent/trace.csv")).unwrap_err();
        match e {
            Error::Io { path, .. } => assert!(path.to_string_lossy().contains("nonexistent")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kv_sections_and_comments() {
        let text = "alpha = 0.01 # noise\n[pair one]\nsource = a\ntarget = b\n[pair two]\nsource = c\n";
        let kv = parse_kv(text).unwrap();
        assert_eq!(kv.global("alpha"), Some("0.01"));
        assert_eq!(kv.sections.len(), 2);
        assert_eq!(kv.sections[0].0, "pair one");
        assert_eq!(kv.sections[1].1[0].1, "c");
    }

    #[test]
    fn kv_rejects_bare_words() {
        assert!(parse_kv("not a pair\n").is_err());
    }
}
