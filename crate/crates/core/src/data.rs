//! Synthetic correlated multi-attribute datasets, CSV I/O and splitting.
//!
//! All tasks of a generated dataset read their clean labels off the same
//! latent draw `z`, so attributes are statistically dependent the way real
//! face attributes are. Features are a noisy nonlinear view of `z`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::task::{validate_tasks, TaskKind, TaskSpec};

// independent random streams of one generator seed
const STREAM_STRUCTURE: u64 = 0;
const STREAM_SAMPLES: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Array2<f64>,
    /// One label column per task: class index for nominal, rank for ordinal.
    pub labels: Vec<Vec<usize>>,
    pub tasks: Vec<TaskSpec>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<Vec<usize>>,
        tasks: Vec<TaskSpec>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            features,
            labels,
            tasks,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        validate_tasks(&self.tasks)?;
        if self.labels.len() != self.tasks.len() {
            return Err(Error::Dimension {
                layer: "label columns".into(),
                expected: self.tasks.len(),
                got: self.labels.len(),
            });
        }
        for (t, (col, spec)) in self.labels.iter().zip(&self.tasks).enumerate() {
            if col.len() != self.len() {
                return Err(Error::Dimension {
                    layer: format!("labels of task {}", spec.name),
                    expected: self.len(),
                    got: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|&y| !spec.label_in_range(y as i64)) {
                return Err(Error::LabelOutOfRange {
                    row,
                    label: col[row] as i64,
                }
                .in_task(t));
            }
        }
        Ok(())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), indices),
            labels: self
                .labels
                .iter()
                .map(|col| indices.iter().map(|&i| col[i]).collect())
                .collect(),
            tasks: self.tasks.clone(),
        }
    }

    /// Counts of each label value of task `t`, indexed from the task's
    /// smallest label.
    pub fn histogram(&self, t: usize) -> Vec<usize> {
        let spec = &self.tasks[t];
        let mut counts = vec![0; spec.cardinality()];
        for &y in &self.labels[t] {
            counts[y - spec.min_label()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub tasks: Vec<TaskSpec>,
    /// Per-task corruption probability in `[0, 0.5)`.
    pub label_noise: Vec<f64>,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        validate_tasks(&self.tasks)?;
        if self.n == 0 || self.latent_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config(
                "n, latent_dim and feature_dim must be positive".into(),
            ));
        }
        if self.label_noise.len() != self.tasks.len() {
            return Err(Error::Config(format!(
                "label_noise has {} entries for {} tasks",
                self.label_noise.len(),
                self.tasks.len()
            )));
        }
        if let Some(p) = self.label_noise.iter().find(|p| !(0.0..0.5).contains(*p)) {
            return Err(Error::Config(format!("label_noise {p} outside [0, 0.5)")));
        }
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

enum LabelMap {
    /// Row `c` scores class `c`.
    Nominal(Array2<f64>),
    /// Unit direction and interior bin edges.
    Ordinal(Array1<f64>, Vec<f64>),
}

impl LabelMap {
    fn new(spec: &TaskSpec, latent_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        match spec.kind {
            TaskKind::Nominal { classes } => {
                LabelMap::Nominal(gaussian_matrix(rng, classes, latent_dim, 1.0))
            }
            TaskKind::Ordinal { ranks } => {
                let mut dir = gaussian_matrix(rng, 1, latent_dim, 1.0).row(0).to_owned();
                let norm = dir.dot(&dir).sqrt();
                dir /= norm;
                // score = dir·z is standard normal, so these edges make ranks
                // equally likely
                let unit = Normal::standard();
                let edges = (1..ranks)
                    .map(|j| unit.inverse_cdf(j as f64 / ranks as f64))
                    .collect();
                LabelMap::Ordinal(dir, edges)
            }
        }
    }

    fn label(&self, z: &Array1<f64>) -> usize {
        match self {
            LabelMap::Nominal(w) => {
                let scores = w.dot(z);
                let mut best = 0;
                for (c, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = c;
                    }
                }
                best
            }
            LabelMap::Ordinal(dir, edges) => {
                let score = dir.dot(z);
                1 + edges.iter().filter(|&&e| score > e).count()
            }
        }
    }
}

/// Replaces a clean label with a different valid one.
///
/// Nominal labels move to a uniformly chosen other class. Ordinal labels move
/// one rank up or down; at either end of the scale the only in-range
/// neighbour is used.
fn corrupt(spec: &TaskSpec, clean: usize, pick: u64) -> usize {
    match spec.kind {
        TaskKind::Nominal { classes } => {
            let r = (pick % (classes as u64 - 1)) as usize;
            if r < clean {
                r
            } else {
                r + 1
            }
        }
        TaskKind::Ordinal { ranks } => {
            let up = pick.is_multiple_of(2);
            if (up && clean < ranks) || clean == 1 {
                clean + 1
            } else {
                clean - 1
            }
        }
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut structure = stream(cfg.seed, STREAM_STRUCTURE);
    let mixing = gaussian_matrix(
        &mut structure,
        cfg.feature_dim,
        cfg.latent_dim,
        1.0 / (cfg.latent_dim as f64).sqrt(),
    );
    let maps: Vec<LabelMap> = cfg
        .tasks
        .iter()
        .map(|t| LabelMap::new(t, cfg.latent_dim, &mut structure))
        .collect();

    let mut samples = stream(cfg.seed, STREAM_SAMPLES);
    let mut noise = stream(cfg.seed, STREAM_NOISE);
    let mut features = Array2::zeros((cfg.n, cfg.feature_dim));
    let mut labels = vec![Vec::with_capacity(cfg.n); cfg.tasks.len()];
    for i in 0..cfg.n {
        let z: Array1<f64> =
            Array1::from_shape_simple_fn(cfg.latent_dim, || samples.sample(StandardNormal));
        let clean_view = mixing.dot(&z);
        for (f, &v) in features.row_mut(i).iter_mut().zip(&clean_view) {
            let eps: f64 = samples.sample(StandardNormal);
            *f = v.tanh() + 0.1 * eps;
        }
        for (t, map) in maps.iter().enumerate() {
            let clean = map.label(&z);
            // both draws are taken unconditionally so that the clean labels
            // and corruption pattern do not depend on the noise level
            let u: f64 = noise.random();
            let pick: u64 = noise.random();
            let y = if u < cfg.label_noise[t] {
                corrupt(&cfg.tasks[t], clean, pick)
            } else {
                clean
            };
            labels[t].push(y);
        }
    }
    Dataset::new(
        format!("synthetic-{}", cfg.seed),
        features,
        labels,
        cfg.tasks.clone(),
    )
}

/// Row indices `(train, test)` after a seeded shuffle.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Config(format!(
            "test_fraction {test_fraction} of {n} samples leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n - n_test);
    Ok((order, test))
}

pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

pub fn header(feature_dim: usize, tasks: &[TaskSpec]) -> String {
    let mut cols: Vec<String> = (0..feature_dim).map(|j| format!("feat_{j}")).collect();
    cols.extend(tasks.iter().map(|t| format!("task:{}", t.name)));
    cols.join(",")
}

/// Writes `feat_0,…,feat_{D-1},task:<name>,…` followed by one row per sample.
pub fn write_csv<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header(ds.feature_dim(), &ds.tasks))?;
    let mut line = String::new();
    for i in 0..ds.len() {
        line.clear();
        for (j, v) in ds.features.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            // shortest representation that parses back to the same f64
            line.push_str(&format!("{v}"));
        }
        for col in &ds.labels {
            line.push(',');
            line.push_str(&col[i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save(ds: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parses a dataset CSV whose task columns must match `tasks` by name and order.
pub fn read_csv<R: Read>(input: R, tasks: &[TaskSpec], path: &Path) -> Result<Dataset> {
    validate_tasks(tasks)?;
    let mut lines = BufReader::new(input).lines();
    let head = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::parse(path, 1, "malformed header: empty file")),
    };
    let cols: Vec<&str> = head.split(',').collect();
    let feature_dim = cols.iter().take_while(|c| c.starts_with("feat_")).count();
    let expected = header(feature_dim, tasks);
    if feature_dim == 0 || head != expected {
        return Err(Error::parse(
            path,
            1,
            format!("malformed header: expected {expected:?}"),
        ));
    }
    let width = feature_dim + tasks.len();

    let mut values = Vec::new();
    let mut labels = vec![Vec::new(); tasks.len()];
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        for f in &fields[..feature_dim] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad feature value {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, lineno, "non-finite feature value"));
            }
            values.push(v);
        }
        for (t, spec) in tasks.iter().enumerate() {
            let raw = fields[feature_dim + t];
            let y: i64 = raw
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad label {raw:?}")))?;
            if !spec.label_in_range(y) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!(
                        "label {y} of task {} outside [{}, {}]",
                        spec.name,
                        spec.min_label(),
                        spec.max_label()
                    ),
                ));
            }
            labels[t].push(y as usize);
        }
    }
    let n = labels.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::parse(path, 2, "dataset has no rows"));
    }
    let features = Array2::from_shape_vec((n, feature_dim), values).expect("row widths checked");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, features, labels, tasks.to_vec())
}

pub fn load(path: &Path, tasks: &[TaskSpec]) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, tasks, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn two_task_cfg(n: usize, noise: [f64; 2]) -> GenConfig {
        GenConfig {
            n,
            latent_dim: 4,
            feature_dim: 16,
            tasks: vec![TaskSpec::ordinal("age", 4), TaskSpec::nominal("gender", 3)],
            label_noise: noise.to_vec(),
            seed: 42,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = two_task_cfg(300, [0.0, 0.0]);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
    }

    #[test]
    fn ordinal_ranks_are_balanced() {
        let ds = generate(&two_task_cfg(100_000, [0.0, 0.0])).unwrap();
        for count in ds.histogram(0) {
            let freq = count as f64 / ds.len() as f64;
            assert!((freq - 0.25).abs() < 0.02, "rank frequency {freq}");
        }
    }

    /// Plug-in mutual information (nats) from the empirical joint.
    fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len() as f64;
        let (ka, kb) = (a.iter().max().unwrap() + 1, b.iter().max().unwrap() + 1);
        let mut joint = vec![vec![0.0; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            joint[x][y] += 1.0 / n;
        }
        let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let pb: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
        let mut mi = 0.0;
        for i in 0..ka {
            for j in 0..kb {
                if joint[i][j] > 0.0 {
                    mi += joint[i][j] * (joint[i][j] / (pa[i] * pb[j])).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn tasks_share_information() {
        let ds = generate(&two_task_cfg(100_000, [0.0, 0.0])).unwrap();
        let mi = mutual_information(&ds.labels[0], &ds.labels[1]);
        // plug-in bias for a 4x3 table at this n is ~3e-5 nats
        assert!(mi > 0.01, "mutual information {mi}");
    }

    #[test]
    fn flip_rate_matches_noise() {
        let clean = generate(&two_task_cfg(20_000, [0.0, 0.0])).unwrap();
        let noisy = generate(&two_task_cfg(20_000, [0.4, 0.4])).unwrap();
        assert_eq!(clean.features, noisy.features);
        for t in 0..2 {
            let flips = clean.labels[t]
                .iter()
                .zip(&noisy.labels[t])
                .filter(|(a, b)| a != b)
                .count() as f64
                / clean.len() as f64;
            assert!((flips - 0.4).abs() < 0.02, "task {t} flip rate {flips}");
        }
        // ordinal corruption moves exactly one rank and stays in range
        for (a, b) in clean.labels[0].iter().zip(&noisy.labels[0]) {
            assert!(a.abs_diff(*b) <= 1);
            assert!((1..=4).contains(b));
        }
    }

    #[test]
    fn noise_config_rejected() {
        let mut cfg = two_task_cfg(10, [0.5, 0.0]);
        assert!(generate(&cfg).is_err());
        cfg.label_noise = vec![0.1];
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn split_sizes_and_partition() {
        let (train, test) = split_indices(10, 0.2, 5).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let all: HashSet<usize> = train.iter().chain(&test).copied().collect();
        assert_eq!(all.len(), 10);
        assert_eq!(split_indices(10, 0.2, 5).unwrap(), (train, test));
        assert!(split_indices(10, 0.01, 5).is_err());
        assert!(split_indices(10, 0.99, 5).is_err());
        assert!(split_indices(10, 0.0, 5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate(&two_task_cfg(50, [0.2, 0.1])).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &ds.tasks, Path::new("mem.csv")).unwrap();
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.features, ds.features);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("feat_0,"));
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn csv_rejections() {
        let tasks = vec![TaskSpec::ordinal("age", 3)];
        let p = Path::new("x.csv");
        let err = read_csv("".as_bytes(), &tasks, p).unwrap_err();
        assert!(err.to_string().contains("malformed header"), "{err}");

        let bad_label = "feat_0,task:age\n0.5,2\n0.1,4\n";
        match read_csv(bad_label.as_bytes(), &tasks, p) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let bad_cols = "feat_0,task:age\n0.5,2,1\n";
        assert!(matches!(
            read_csv(bad_cols.as_bytes(), &tasks, p),
            Err(Error::Parse { line: 2, .. })
        ));
        let wrong_task = "feat_0,task:gender\n0.5,2\n";
        assert!(matches!(
            read_csv(wrong_task.as_bytes(), &tasks, p),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
