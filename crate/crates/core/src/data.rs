//! Datasets, row sharding, the synthetic two-Gaussian generator and
//! grouped-feature table ingestion.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CrsvmError, Result};
use crate::penalty::GroupPartition;

/// Number of informative coordinates in the synthetic design.
pub const SIGNAL_FEATURES: usize = 10;

#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    groups: Option<GroupPartition>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(CrsvmError::Shape(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
            return Err(CrsvmError::Data(format!(
                "label at row {i} is {}, expected -1 or +1",
                y[i]
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % x.nrows(), pos / x.nrows());
            return Err(CrsvmError::Data(format!(
                "non-finite feature value at row {row}, column {col}"
            )));
        }
        Ok(Dataset {
            x,
            y,
            groups: None,
            feature_names: None,
        })
    }

    pub fn with_groups(mut self, groups: GroupPartition) -> Result<Self> {
        if groups.num_features() != self.p() {
            return Err(CrsvmError::Shape(format!(
                "partition covers {} features, data has {}",
                groups.num_features(),
                self.p()
            )));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(CrsvmError::Shape(format!(
                "{} feature names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn groups(&self) -> Option<&GroupPartition> {
        self.groups.as_ref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v > 0.0).count();
        (pos, self.y.len() - pos)
    }

    /// Training needs at least two rows and both classes.
    pub fn check_trainable(&self) -> Result<()> {
        let (pos, neg) = self.class_counts();
        if self.n() < 2 || pos == 0 || neg == 0 {
            return Err(CrsvmError::InvalidArgument(format!(
                "training data needs both classes (got {pos} positive, {neg} negative)"
            )));
        }
        Ok(())
    }

    fn replace_x(&self, x: DMatrix<f64>) -> Dataset {
        Dataset {
            x,
            y: self.y.clone(),
            groups: self.groups.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// One worker's block of rows, with the sign-absorbed design `Y_k X_k` cached.
#[derive(Clone, Debug)]
pub struct DataShard {
    id: usize,
    rows: Vec<usize>,
    y: DVector<f64>,
    xbar: DMatrix<f64>,
}

impl DataShard {
    pub fn new(id: usize, rows: Vec<usize>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() || rows.len() != y.len() {
            return Err(CrsvmError::Shape(format!(
                "shard {id}: {} rows, {} labels, {} row ids",
                x.nrows(),
                y.len(),
                rows.len()
            )));
        }
        let mut xbar = x;
        for (i, &yi) in y.iter().enumerate() {
            xbar.row_mut(i).scale_mut(yi);
        }
        Ok(DataShard { id, rows, y, xbar })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.xbar.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `Y_k X_k`.
    pub fn xbar(&self) -> &DMatrix<f64> {
        &self.xbar
    }
}

/// Permutes rows with `seed`, then cuts them into `k` contiguous blocks whose
/// sizes differ by at most one.
pub fn shard(data: &Dataset, k: usize, seed: u64) -> Result<Vec<DataShard>> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(CrsvmError::InvalidArgument(format!(
            "cannot split {n} rows across {k} workers"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / k;
    let extra = n % k;
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for id in 0..k {
        let len = base + usize::from(id < extra);
        let rows = order[start..start + len].to_vec();
        start += len;
        let x = data.x.select_rows(rows.iter());
        let y = DVector::from_iterator(len, rows.iter().map(|&r| data.y[r]));
        shards.push(DataShard::new(id, rows, x, y)?);
    }
    Ok(shards)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < SIGNAL_FEATURES {
            return Err(CrsvmError::InvalidArgument(format!(
                "synthetic data needs p >= {SIGNAL_FEATURES}, got {}",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(CrsvmError::InvalidArgument(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(CrsvmError::InvalidArgument(format!(
                "noise fraction must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.n < 2 {
            return Err(CrsvmError::InvalidArgument("need at least 2 rows".into()));
        }
        Ok(())
    }
}

/// Two Gaussian classes with means `+-1` on the first ten coordinates and an
/// equicorrelated signal block; a fraction `alpha` of rows is replaced by
/// centred noise points with coin-flip labels.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let SyntheticSpec { n, p, rho, alpha, seed } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let own = (1.0 - rho).sqrt();
    let shared = rho.sqrt();

    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = vec![0.0; n];
    let draw_row = |rng: &mut ChaCha8Rng, x: &mut DMatrix<f64>, i: usize, mean: f64| {
        let common: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = if j < SIGNAL_FEATURES {
                mean + own * z + shared * common
            } else {
                z
            };
        }
    };
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        y[i] = label;
        draw_row(&mut rng, &mut x, i, label);
    }
    let n_noise = (alpha * n as f64).floor() as usize;
    let noisy = rand::seq::index::sample(&mut rng, n, n_noise).into_vec();
    for i in noisy {
        y[i] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        draw_row(&mut rng, &mut x, i, 0.0);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y)?.with_feature_names(names)
}

/// Sign of the sum of the signal block; ties go to `+1`.
pub fn bayes_rule(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let s: f64 = (0..SIGNAL_FEATURES.min(x.ncols())).map(|j| x[(i, j)]).sum();
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Per-feature centring and scaling, replayed at prediction time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Scaling {
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn invert(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let mut out = z.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|v| *v = *v * s + m);
        }
        Ok(out)
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.means.len() {
            return Err(CrsvmError::Shape(format!(
                "scaling record has {} features, input has {}",
                self.means.len(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

/// Centres every column and divides by its sample standard deviation;
/// constant columns keep divisor 1.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Scaling)> {
    let n = data.n();
    if n < 2 {
        return Err(CrsvmError::InvalidArgument(
            "standardisation needs at least 2 rows".into(),
        ));
    }
    let mut means = Vec::with_capacity(data.p());
    let mut scales = Vec::with_capacity(data.p());
    for col in data.x.column_iter() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        means.push(mean);
        scales.push(if sd > f64::EPSILON * mean.abs().max(1.0) { sd } else { 1.0 });
    }
    let scaling = Scaling { means, scales };
    let x = scaling.apply(&data.x)?;
    Ok((data.replace_x(x), scaling))
}

/// How the label column of a delimited file is interpreted.
#[derive(Clone, Debug)]
pub struct LabelSpec {
    /// Header name of the label column; `None` means the first column.
    pub column: Option<String>,
    pub positive: String,
    /// When absent, exactly one other token must occur and it is negative.
    pub negative: Option<String>,
}

impl Default for LabelSpec {
    fn default() -> Self {
        LabelSpec {
            column: None,
            positive: "1".into(),
            negative: Some("-1".into()),
        }
    }
}

/// A parsed delimited file: feature columns plus the optional raw label column.
#[derive(Clone, Debug)]
pub struct Table {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads a header-led comma- or tab-separated file. A named label column is
/// optional so that unlabeled files can be scored; `None` takes the first column.
pub fn read_table(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Table> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CrsvmError::io(path, e))?;
    let header_line = text
        .lines()
        .next()
        .ok_or_else(|| CrsvmError::Data(format!("{} is empty", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CrsvmError::Parse(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = match label_column {
        Some(name) => headers.iter().position(|h| h == name),
        None if headers.is_empty() => None,
        None => Some(0),
    };
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CrsvmError::Parse(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(CrsvmError::Parse(format!(
                "row {} has {} fields, header has {}",
                r + 1,
                record.len(),
                headers.len()
            )));
        }
        for (i, field) in record.iter().enumerate() {
            if Some(i) == label_idx {
                if let Some(l) = labels.as_mut() {
                    l.push(field.to_owned());
                }
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    CrsvmError::Parse(format!(
                        "row {}, column '{}': '{field}' is not a number",
                        r + 1,
                        headers[i]
                    ))
                })?;
                values.push(v);
            }
        }
        rows += 1;
    }
    let x = DMatrix::from_row_slice(rows, names.len(), &values);
    Ok(Table { names, x, labels })
}

pub fn map_labels(raw: &[String], spec: &LabelSpec) -> Result<Vec<f64>> {
    let negative = match &spec.negative {
        Some(neg) => neg.clone(),
        None => {
            let mut others: Vec<&String> = raw.iter().filter(|t| **t != spec.positive).collect();
            others.sort();
            others.dedup();
            match others.as_slice() {
                [] => String::new(),
                [one] => (*one).clone(),
                many => {
                    return Err(CrsvmError::Data(format!(
                        "label column has {} non-positive tokens ({}); declare the negative class",
                        many.len(),
                        many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
    };
    raw.iter()
        .enumerate()
        .map(|(i, t)| {
            if *t == spec.positive {
                Ok(1.0)
            } else if *t == negative {
                Ok(-1.0)
            } else {
                Err(CrsvmError::Data(format!(
                    "row {}: label '{t}' is neither '{}' nor '{negative}'",
                    i + 1,
                    spec.positive
                )))
            }
        })
        .collect()
}

/// Loads a labelled table without grouping.
pub fn load_table(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    let table = read_table(path, labels.column.as_deref())?;
    let raw = table.labels.ok_or_else(|| {
        CrsvmError::Data(format!(
            "no label column '{}'",
            labels.column.as_deref().unwrap_or_default()
        ))
    })?;
    let y = map_labels(&raw, labels)?;
    Dataset::new(table.x, y)?.with_feature_names(table.names)
}

/// One entry of a group map file.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default)]
    pub prefix: Vec<String>,
    #[serde(default)]
    pub columns: Vec<String>,
    /// Catch-all: takes every column no other group claims.
    #[serde(default)]
    pub rest: bool,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GroupMap {
    #[serde(rename = "group")]
    pub groups: Vec<GroupSpec>,
}

impl GroupMap {
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct RawSpec {
            name: String,
            #[serde(default)]
            prefix: Option<toml::Value>,
            #[serde(default)]
            columns: Vec<String>,
            #[serde(default)]
            rest: bool,
        }
        #[derive(Deserialize)]
        struct RawMap {
            group: Vec<RawSpec>,
        }
        let raw: RawMap = toml::from_str(text).map_err(|e| CrsvmError::Parse(e.to_string()))?;
        let mut groups = Vec::with_capacity(raw.group.len());
        for g in raw.group {
            let prefix = match g.prefix {
                None => Vec::new(),
                Some(toml::Value::String(s)) => vec![s],
                Some(toml::Value::Array(items)) => items
                    .into_iter()
                    .map(|v| match v {
                        toml::Value::String(s) => Ok(s),
                        other => Err(CrsvmError::Parse(format!(
                            "group '{}': prefix entries must be strings, got {other}",
                            g.name
                        ))),
                    })
                    .collect::<Result<_>>()?,
                Some(other) => {
                    return Err(CrsvmError::Parse(format!(
                        "group '{}': prefix must be a string or list, got {other}",
                        g.name
                    )))
                }
            };
            if prefix.is_empty() && g.columns.is_empty() && !g.rest {
                return Err(CrsvmError::Parse(format!(
                    "group '{}' has no prefix, columns or rest flag",
                    g.name
                )));
            }
            groups.push(GroupSpec {
                name: g.name,
                prefix,
                columns: g.columns,
                rest: g.rest,
            });
        }
        if groups.iter().filter(|g| g.rest).count() > 1 {
            return Err(CrsvmError::Parse("more than one catch-all group".into()));
        }
        Ok(GroupMap { groups })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CrsvmError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Assigns every column to exactly one group. Returns, per group, the
    /// column indices in their original order.
    pub fn assign(&self, names: &[String]) -> Result<Vec<Vec<usize>>> {
        let index: HashMap<&str, usize> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut owner: Vec<Option<usize>> = vec![None; names.len()];
        let claim = |col: usize, g: usize, owner: &mut Vec<Option<usize>>| -> Result<()> {
            match owner[col] {
                Some(prev) if prev != g => Err(CrsvmError::Data(format!(
                    "column '{}' is assigned to both '{}' and '{}'",
                    names[col], self.groups[prev].name, self.groups[g].name
                ))),
                Some(_) => Err(CrsvmError::Data(format!(
                    "column '{}' is listed twice in group '{}'",
                    names[col], self.groups[g].name
                ))),
                None => {
                    owner[col] = Some(g);
                    Ok(())
                }
            }
        };
        for (g, spec) in self.groups.iter().enumerate() {
            for col in &spec.columns {
                let i = *index.get(col.as_str()).ok_or_else(|| {
                    CrsvmError::Data(format!("group '{}' names unknown column '{col}'", spec.name))
                })?;
                claim(i, g, &mut owner)?;
            }
            if !spec.prefix.is_empty() {
                let mut matched = false;
                for (i, name) in names.iter().enumerate() {
                    if spec.prefix.iter().any(|pre| name.starts_with(pre.as_str())) {
                        matched = true;
                        if owner[i] != Some(g) {
                            claim(i, g, &mut owner)?;
                        }
                    }
                }
                if !matched {
                    return Err(CrsvmError::Data(format!(
                        "group '{}': no column matches prefixes {:?}",
                        spec.name, spec.prefix
                    )));
                }
            }
        }
        if let Some(rest) = self.groups.iter().position(|g| g.rest) {
            for o in owner.iter_mut().filter(|o| o.is_none()) {
                *o = Some(rest);
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(CrsvmError::Data(format!(
                "column '{}' belongs to no group",
                names[i]
            )));
        }
        let mut members = vec![Vec::new(); self.groups.len()];
        for (i, o) in owner.iter().enumerate() {
            members[o.expect("checked above")].push(i);
        }
        if let Some(g) = members.iter().position(Vec::is_empty) {
            return Err(CrsvmError::Data(format!(
                "group '{}' received no columns",
                self.groups[g].name
            )));
        }
        Ok(members)
    }
}

/// Loads a labelled table and reorders its columns so that each group of
/// the map is contiguous, in map order.
pub fn load_grouped_table(
    data_path: impl AsRef<Path>,
    groupmap_path: impl AsRef<Path>,
    labels: &LabelSpec,
) -> Result<Dataset> {
    let map = GroupMap::load(groupmap_path)?;
    let data = load_table(data_path, labels)?;
    apply_group_map(&data, &map)
}

pub fn apply_group_map(data: &Dataset, map: &GroupMap) -> Result<Dataset> {
    let names = data
        .feature_names()
        .ok_or_else(|| CrsvmError::Data("grouping needs named columns".into()))?
        .to_vec();
    let members = map.assign(&names)?;
    let order: Vec<usize> = members.iter().flatten().copied().collect();
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let x = data.x.select_columns(order.iter());
    let reordered_names = order.iter().map(|&i| names[i].clone()).collect();
    Dataset::new(x, data.y.clone())?
        .with_feature_names(reordered_names)?
        .with_groups(GroupPartition::from_sizes(&sizes)?)
}

/// Writes `label,<features...>` with a header row; labels as `1` / `-1`.
pub fn write_table(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(data.n() * data.p() * 20);
    out.push_str("label");
    let default_names: Vec<String>;
    let names = match data.feature_names() {
        Some(n) => n,
        None => {
            default_names = (1..=data.p()).map(|j| format!("x{j}")).collect();
            &default_names
        }
    };
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(if data.y[i] > 0.0 { "1" } else { "-1" });
        for j in 0..data.p() {
            out.push(',');
            out.push_str(&format!("{}", data.x[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CrsvmError::io(path, e))
}
