use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_LINE: &str = "# schema=1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub env: String,
    pub epsilon: f64,
    pub dataset_size: usize,
    pub algorithm: String,
    /// Empty for OfflineQ.
    pub formula: Option<String>,
    pub planning_steps: usize,
    pub iterations: usize,
    pub seed: usize,
    pub avg_per_step_reward: f64,
    pub wall_time_ms: u64,
    pub w_min: Option<f64>,
    pub w_mean: Option<f64>,
    pub w_max: Option<f64>,
    pub p_entropy: Option<f64>,
    pub q_change_norm: Option<f64>,
}

impl ResultRow {
    /// Everything identifying the config point, without the seed.
    pub fn point(&self) -> PointKey {
        PointKey {
            env: self.env.clone(),
            epsilon: self.epsilon,
            dataset_size: self.dataset_size,
            algorithm: self.algorithm.clone(),
            planning_steps: self.planning_steps,
            iterations: self.iterations,
        }
    }

    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.point().cmp(&other.point()).then(self.seed.cmp(&other.seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointKey {
    pub env: String,
    pub epsilon: f64,
    pub dataset_size: usize,
    pub algorithm: String,
    pub planning_steps: usize,
    pub iterations: usize,
}

impl Eq for PointKey {}

impl Ord for PointKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.env
            .cmp(&other.env)
            .then(self.epsilon.total_cmp(&other.epsilon))
            .then(self.dataset_size.cmp(&other.dataset_size))
            .then(self.algorithm.cmp(&other.algorithm))
            .then(self.planning_steps.cmp(&other.planning_steps))
            .then(self.iterations.cmp(&other.iterations))
    }
}

impl PartialOrd for PointKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::canonical_cmp);
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != SCHEMA_LINE {
        bail!("{}: expected '{SCHEMA_LINE}' on the first line", path.display());
    }
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub point: PointKey,
    pub n: usize,
    pub mean: f64,
    /// Sample variance (n − 1 denominator); 0 for a single seed.
    pub variance: f64,
    pub std_dev: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<PointSummary> {
    let mut groups: BTreeMap<PointKey, Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups.entry(row.point()).or_default().push(row.avg_per_step_reward);
    }
    groups
        .into_iter()
        .map(|(point, xs)| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let variance = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            PointSummary { point, n, mean, variance, std_dev: variance.sqrt() }
        })
        .collect()
}

pub fn render_summary(summaries: &[PointSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<13} {:>7} {:>6} {:<17} {:>4} {:>4} {:>4} {:>11} {:>11} {:>11}",
        "env", "epsilon", "size", "algorithm", "ps", "it", "n", "mean", "variance", "std"
    );
    for s in summaries {
        let p = &s.point;
        let _ = writeln!(
            out,
            "{:<13} {:>7} {:>6} {:<17} {:>4} {:>4} {:>4} {:>11.5} {:>11.6} {:>11.5}",
            p.env, p.epsilon, p.dataset_size, p.algorithm, p.planning_steps, p.iterations, s.n, s.mean, s.variance, s.std_dev
        );
    }
    if summaries.iter().any(|s| s.point.algorithm.ends_with("F3")) {
        out.push_str("\nnote: F3 uses 1/K over the K known pairs as its base term.\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, seed: usize, r: f64) -> ResultRow {
        ResultRow {
            env: "Taxi".into(),
            epsilon: 0.1,
            dataset_size: 500,
            algorithm: alg.into(),
            formula: None,
            planning_steps: 10,
            iterations: 1,
            seed,
            avg_per_step_reward: r,
            wall_time_ms: 3,
            w_min: Some(0.5),
            w_mean: None,
            w_max: Some(f64::MAX),
            p_entropy: None,
            q_change_norm: Some(1e-300),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![row("DynaQ", 0, -0.1234567890123), row("OfflineQ", 1, 1.0 / 3.0)];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema=1\nenv,epsilon,dataset_size,algorithm,formula,"));
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn missing_schema_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "env,epsilon\n").unwrap();
        assert!(read_csv(&path).is_err());
    }

    #[test]
    fn summary_statistics() {
        let rows = vec![row("DynaQ", 0, 1.0), row("DynaQ", 1, 3.0), row("OfflineQ", 0, 2.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].n, s[0].mean, s[0].variance), (2, 2.0, 2.0));
        assert_eq!(s[1].variance, 0.0);
        let text = render_summary(&s);
        assert!(text.contains("variance") && !text.contains("F3"));
    }

    #[test]
    fn canonical_order() {
        let mut rows = vec![row("OfflineQ", 0, 0.0), row("DynaQ", 1, 0.0), row("DynaQ", 0, 0.0)];
        sort_rows(&mut rows);
        let order: Vec<_> = rows.iter().map(|r| (r.algorithm.as_str(), r.seed)).collect();
        assert_eq!(order, [("DynaQ", 0), ("DynaQ", 1), ("OfflineQ", 0)]);
    }
}
