//! Result files: sweep CSVs, metadata sidecars, heatmaps, optimizer traces and
//! the plain-text 0-1 program format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sim_ofdma_core::allocation::MilpInstance;
use sim_ofdma_core::joint::TraceEntry;
use sim_ofdma_core::nalgebra::DMatrix;

use crate::settings::ExperimentConfig;
use crate::RunError;

/// One CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scheme: String,
    pub sweep_key: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
    pub config_hash: String,
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, RunError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<Row>, _>>()?;
    Ok(rows)
}

/// Sidecar with the verb, the hash and the full resolved configuration.
pub fn write_metadata(path: &Path, config: &ExperimentConfig, verb: &str) -> Result<(), RunError> {
    let resolved: toml::Table = toml::from_str(&config.to_toml())
        .map_err(|e| RunError::Config(e.message().to_string()))?;
    let mut meta = toml::Table::new();
    meta.insert("verb".into(), verb.into());
    meta.insert("config_hash".into(), config.hash().into());
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("config".into(), toml::Value::Table(resolved));
    let text = toml::to_string(&meta).map_err(|e| RunError::Config(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Row-major, space-separated, one `#` header line with the provenance.
pub fn format_matrix(m: &DMatrix<f64>, seed: u64, hash: &str) -> String {
    let mut s = format!("# seed={seed} config_hash={hash} rows={} cols={}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, RunError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| RunError::Config(format!("matrix entry `{v}`: {e}"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(RunError::Config("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

pub fn format_trace(trace: &[TraceEntry], seed: u64, hash: &str) -> String {
    let mut s = String::from("iteration,step,gamma,alpha,max_slack,seed,config_hash\n");
    for t in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{seed},{hash}",
            t.iteration, t.step, t.gamma, t.alpha, t.max_slack
        );
    }
    s
}

/// Header `K N_c K_c`, then `c` with one row per user, then `d` with one row
/// per user pair `p q` followed by its `N_c` values.
pub fn format_milp(instance: &MilpInstance) -> String {
    let (k, n) = (instance.users(), instance.subcarriers());
    let mut s = format!("{k} {n} {}\nc\n", instance.k_c());
    for p in 0..k {
        let row: Vec<String> = (0..n).map(|i| instance.linear(p, i).to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s.push_str("d\n");
    for p in 0..k {
        for q in p + 1..k {
            let row: Vec<String> = (0..n).map(|i| instance.pair(p, q, i).to_string()).collect();
            let _ = writeln!(s, "{p} {q} {}", row.join(" "));
        }
    }
    s
}

pub fn parse_milp(text: &str) -> Result<MilpInstance, RunError> {
    let bad = |what: &str| RunError::Config(format!("MILP instance: {what}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let nums = |l: &str| -> Result<Vec<f64>, RunError> {
        l.split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad(&format!("bad number `{v}`"))))
            .collect()
    };
    let header = nums(lines.next().ok_or_else(|| bad("empty"))?)?;
    let [k, n, k_c] = header[..] else {
        return Err(bad("header must be `K N_c K_c`"));
    };
    let (k, n, k_c) = (k as usize, n as usize, k_c as usize);
    if lines.next().map(str::trim) != Some("c") {
        return Err(bad("missing `c` section"));
    }
    let mut linear = Vec::with_capacity(k * n);
    for _ in 0..k {
        let row = nums(lines.next().ok_or_else(|| bad("short `c` section"))?)?;
        if row.len() != n {
            return Err(bad("`c` row length"));
        }
        linear.extend(row);
    }
    if lines.next().map(str::trim) != Some("d") {
        return Err(bad("missing `d` section"));
    }
    let mut pair = Vec::with_capacity(k * k.saturating_sub(1) / 2 * n);
    for p in 0..k {
        for q in p + 1..k {
            let row = nums(lines.next().ok_or_else(|| bad("short `d` section"))?)?;
            if row.len() != n + 2 || row[0] as usize != p || row[1] as usize != q {
                return Err(bad(&format!("`d` row for pair {p} {q}")));
            }
            pair.extend(&row[2..]);
        }
    }
    if lines.next().is_some() {
        return Err(bad("trailing data"));
    }
    Ok(MilpInstance::from_costs(k, n, k_c, linear, pair)?)
}
