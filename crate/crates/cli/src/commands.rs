use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crsvm_core::data::{apply_group_map, read_table, write_table};
use crsvm_core::experiment::bench;
use crsvm_core::select::grid_search;
use crsvm_core::{
    accuracy, generate_synthetic, standardize, train, CrsvmError, Dataset, GridCell, GroupMap, LabelSpec,
    MetricsReport, ModelFile, Result, Scaling, SvmicParams, SyntheticRun, SyntheticSpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{BenchArgs, DatagenArgs, InputArgs, PredictArgs, SyntheticArgs, TrainArgs, TuneArgs};

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CrsvmError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CrsvmError::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when there is none.
fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CrsvmError::Io { path: "<stdout>".into(), source: e }),
    }
}

fn synthetic_spec(args: &SyntheticArgs, seed: u64) -> SyntheticSpec {
    SyntheticSpec { n: args.n, p: args.p, rho: args.rho, alpha: args.alpha, seed }
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub data_file: String,
    pub spec: SyntheticSpec,
    pub signal_features: usize,
}

pub fn datagen(args: &DatagenArgs) -> Result<()> {
    let spec = synthetic_spec(&args.synthetic, args.seed);
    let data = generate_synthetic(&spec)?;
    write_table(&args.out, &data)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".manifest.json");
        PathBuf::from(s)
    });
    let manifest = Manifest {
        generator: concat!("crsvm ", env!("CARGO_PKG_VERSION")).into(),
        data_file: args.out.display().to_string(),
        spec,
        signal_features: crsvm_core::data::SIGNAL_FEATURES,
    };
    write_file(&manifest_path, &to_json(&manifest)?)
}

/// Loads, groups and optionally standardises a training table.
fn load_training(input: &InputArgs) -> Result<(Dataset, Option<Scaling>)> {
    let labels = LabelSpec {
        column: input.label_col.clone(),
        positive: input.pos_label.clone(),
        negative: input.neg_label.clone(),
    };
    let mut data = crsvm_core::load_table(&input.data, &labels)?;
    if let Some(path) = &input.groups {
        data = apply_group_map(&data, &GroupMap::load(path)?)?;
    }
    if input.standardize {
        let (z, scaling) = standardize(&data)?;
        Ok((z, Some(scaling)))
    } else {
        Ok((data, None))
    }
}

fn training_car(data: &Dataset, fit: &crsvm_core::FitResult) -> Result<f64> {
    Ok(accuracy(&fit.predict(data.x())?.labels, data.y()))
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    if args.model.structure == "sgl" && args.input.groups.is_none() {
        return Err(CrsvmError::Config("--structure sgl needs a group map (--groups)".into()));
    }
    let (data, scaling) = load_training(&args.input)?;
    let config = args.model.config(data.groups())?;
    let fit = train(&data, &config)?;
    let model = ModelFile::from_fit(
        &fit,
        data.n(),
        scaling,
        data.groups().cloned(),
        data.feature_names().map(<[String]>::to_vec),
    );
    model.save(&args.model_out)?;
    let report = MetricsReport::from_fit(&fit, Some(training_car(&data, &fit)?), None);
    emit(args.metrics_out.as_ref(), &to_json(&report)?)
}

#[derive(Serialize, Deserialize)]
pub struct PredictMetrics {
    pub n: usize,
    pub car: f64,
}

pub fn predict_cmd(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model_in)?;
    let label_col = args.label_col.clone().unwrap_or_else(|| "label".into());
    let table = read_table(&args.data, Some(&label_col))?;
    let x = model.align(&table.x, &table.names)?;
    let pred = model.predict(&x)?;
    let mut out = String::from("score,label\n");
    for (s, l) in pred.scores.iter().zip(&pred.labels) {
        out.push_str(&format!("{s},{l}\n"));
    }
    emit(args.out.as_ref(), &out)?;
    if let Some(raw) = &table.labels {
        let spec = LabelSpec {
            column: Some(label_col),
            positive: args.pos_label.clone(),
            negative: args.neg_label.clone(),
        };
        let y = crsvm_core::data::map_labels(raw, &spec)?;
        let metrics = PredictMetrics { n: y.len(), car: accuracy(&pred.labels, &y) };
        let text = to_json(&metrics)?;
        match &args.metrics_out {
            Some(p) => write_file(p, &text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct TuneFile {
    grid: SvmicParams,
}

#[derive(Serialize, Deserialize)]
pub struct TuneReport {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
    pub metrics: MetricsReport,
}

pub fn tune_cmd(args: &TuneArgs) -> Result<()> {
    if args.model.structure == "sgl" && args.input.groups.is_none() {
        return Err(CrsvmError::Config("--structure sgl needs a group map (--groups)".into()));
    }
    let text = fs::read_to_string(&args.config).map_err(|e| CrsvmError::Io {
        path: args.config.display().to_string(),
        source: e,
    })?;
    let file: TuneFile = toml::from_str(&text).map_err(|e| CrsvmError::Config(e.to_string()))?;
    let mut params = file.grid;
    if let Some(g) = args.gamma {
        params.gamma = g;
    }
    let (data, scaling) = load_training(&args.input)?;
    let base = args.model.config(data.groups())?;
    let outcome = grid_search(&data, &base, &params)?;
    let model = ModelFile::from_fit(
        &outcome.fit,
        data.n(),
        scaling,
        data.groups().cloned(),
        data.feature_names().map(<[String]>::to_vec),
    );
    model.save(&args.model_out)?;
    let car = training_car(&data, &outcome.fit)?;
    let report = TuneReport {
        best: outcome.best,
        cells: outcome.cells,
        metrics: MetricsReport::from_fit(&outcome.fit, Some(car), None),
    };
    emit(args.metrics_out.as_ref(), &to_json(&report)?)
}

pub fn bench_cmd(args: &BenchArgs) -> Result<()> {
    let mut single = args.model.clone();
    single.workers = vec![1];
    let base = single.config(None)?;
    let run = SyntheticRun {
        train: synthetic_spec(&args.synthetic, args.model.seed),
        test_n: args.test_n,
        test_alpha: args.test_alpha,
        standardize: args.standardize,
    };
    let rows = bench(&run, &base, &args.model.workers, args.repeats)?;
    let text = if args.csv {
        let mut s = String::from(crsvm_core::BenchRow::CSV_HEADER);
        s.push('\n');
        for r in &rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    } else {
        to_json(&rows)?
    };
    emit(args.metrics_out.as_ref(), &text)
}
