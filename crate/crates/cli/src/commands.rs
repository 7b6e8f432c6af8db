use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use moclust::io::{
    label_rows, read_dataset_file, read_labels, write_dataset_file, write_labels, write_model_file,
    write_trace, ModelFile, TraceRow,
};
use moclust::metrics::{
    ari, outlier_eval, truth_with_outlier_class, ConfusionRates, OUTLIER_CLASS,
};
use moclust::nullmodel::{kl_divergence, subset_logliks, KlEstimate, NullGammaMixture};
use moclust::simgen::{generate, LabeledDataSet, SimConfig};
use moclust::{fit, run_oclust, FitResult, OclustOptions};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Cli, Command};

pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(moclust::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<moclust::Error> for CliError {
    fn from(e: moclust::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<u8> {
    let seed = cli.seed;
    let out = cli.out;
    match cli.command {
        Command::Simulate {
            family,
            count,
            n,
            contamination,
        } => simulate(family.into(), seed, count, n, contamination, &out),
        Command::Fit { data, g, fit } => fit_cmd(&data, g, &fit.config(seed), &out),
        Command::Oclust {
            data,
            g,
            max_outliers,
            fit,
            subset,
            gross_quantile,
            emit_plot,
            lean,
        } => {
            let opts = OclustOptions {
                gross_quantile,
                subset_refit: subset.mode(),
                keep_models: !lean,
            };
            oclust(
                &data,
                g,
                max_outliers,
                &fit.config(seed),
                &opts,
                emit_plot,
                &out,
            )
        }
        Command::Eval { pred, truth } => eval(&pred, &truth, &out),
        Command::Nullcheck {
            data,
            g,
            fit,
            subset,
        } => nullcheck(&data, g, &fit.config(seed), subset.mode(), &out),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn simulate(
    family: moclust::simgen::Family,
    seed: u64,
    count: u64,
    n: Option<usize>,
    contamination: Option<usize>,
    out: &Path,
) -> Result<u8> {
    fs::create_dir_all(out)?;
    let mut manifest = String::new();
    for k in 0..count {
        let s = seed.wrapping_add(k);
        let cfg = SimConfig {
            n_override: n,
            contamination_override: contamination,
            ..SimConfig::new(family, s)
        };
        let d = generate(&cfg)?;
        let name = format!("{family}_seed{s}.jsonl");
        let path = out.join(&name);
        write_dataset_file(&path, &d.data)?;
        manifest.push_str(&format!("{}  {name}\n", sha256_hex(&fs::read(&path)?)));
    }
    fs::write(out.join("manifest.sha256"), &manifest)?;
    print!("{manifest}");
    Ok(0)
}

fn write_fit_outputs(
    out: &Path,
    ids: &[String],
    result: &FitResult,
    removed: &[String],
) -> Result<()> {
    write_model_file(
        out.join("model.json"),
        &ModelFile::from_model(&result.model, Some(result.loglik)),
    )?;
    let rows = label_rows(ids, &result.hard_labels, &result.zhat, removed);
    write_labels(
        BufWriter::new(File::create(out.join("labels.csv"))?),
        result.model.n_components(),
        &rows,
    )?;
    Ok(())
}

fn fit_cmd(data: &Path, g: usize, cfg: &moclust::FitConfig, out: &Path) -> Result<u8> {
    let data = read_dataset_file(data)?;
    if g == 0 || g > data.len() {
        return Err(moclust::Error::Precondition(format!("G={g} with n={}", data.len())).into());
    }
    let result = fit(&data, g, cfg)?;
    fs::create_dir_all(out)?;
    write_fit_outputs(out, data.ids(), &result, &[])?;
    println!(
        "loglik {} after {} iterations (start {})",
        result.loglik, result.n_iters, result.start
    );
    if result.converged {
        Ok(0)
    } else {
        eprintln!(
            "moclust: fit did not converge within {} iterations",
            cfg.max_iters
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

#[derive(Serialize)]
struct Summary {
    f_star: usize,
    kl_min: f64,
    n_outliers: usize,
    n_gross: usize,
    n_iterations: usize,
    loglik: f64,
    runtime_secs: f64,
    truncated: Option<String>,
}

/// Min-max normalized KL per row; all zeros when the trace is flat.
fn normalized_kl(rows: &[TraceRow]) -> Vec<(usize, f64)> {
    let lo = rows.iter().map(|r| r.kl).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.kl).fold(f64::NEG_INFINITY, f64::max);
    rows.iter()
        .map(|r| {
            let v = if hi > lo {
                (r.kl - lo) / (hi - lo)
            } else {
                0.0
            };
            (r.f, v)
        })
        .collect()
}

fn oclust(
    data: &Path,
    g: usize,
    max_outliers: usize,
    cfg: &moclust::FitConfig,
    opts: &OclustOptions,
    emit_plot: bool,
    out: &Path,
) -> Result<u8> {
    let data = read_dataset_file(data)?;
    let start = Instant::now();
    let res = run_oclust(&data, g, max_outliers, cfg, opts)?;
    let runtime = start.elapsed().as_secs_f64();
    fs::create_dir_all(out)?;

    let rows: Vec<TraceRow> = res.trace.iter().map(TraceRow::from).collect();
    write_trace(BufWriter::new(File::create(out.join("trace.csv"))?), &rows)?;
    let mut outliers = String::new();
    for id in &res.outlier_ids {
        outliers.push_str(id);
        outliers.push('\n');
    }
    fs::write(out.join("outliers.txt"), outliers)?;
    write_fit_outputs(out, &res.retained_ids, &res.final_fit, &res.outlier_ids)?;
    if emit_plot {
        let mut csv = String::from("f,kl_normalized\n");
        for (f, v) in normalized_kl(&rows) {
            csv.push_str(&format!("{f},{v}\n"));
        }
        fs::write(out.join("kl_plot.csv"), csv)?;
    }
    let summary = Summary {
        f_star: res.f_star,
        kl_min: res.kl_min(),
        n_outliers: res.outlier_ids.len(),
        n_gross: res.gross_ids.len(),
        n_iterations: res.trace.len(),
        loglik: res.final_fit.loglik,
        runtime_secs: runtime,
        truncated: res.truncated.clone(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    if let Some(t) = &res.truncated {
        eprintln!("moclust: warning: trace truncated: {t}");
    }
    println!(
        "f_star {} (KL {:.6}), {} trimming iterations in {runtime:.2} s",
        res.f_star,
        res.kl_min(),
        res.trace.len()
    );
    Ok(0)
}

#[derive(Serialize)]
struct EvalRun {
    pred: PathBuf,
    truth: PathBuf,
    ari: f64,
    n_predicted: usize,
    rates: ConfusionRates,
}

#[derive(Serialize)]
struct EvalMean {
    ari: f64,
    n_predicted: f64,
    tpr: Option<f64>,
    fpr: Option<f64>,
    tnr: Option<f64>,
    fnr: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    runs: Vec<EvalRun>,
    mean: EvalMean,
}

fn eval_one(pred: &Path, truth_path: &Path) -> Result<EvalRun> {
    let truth = LabeledDataSet::from_dataset(read_dataset_file(truth_path)?)?;
    let rows = read_labels(File::open(pred.join("labels.csv"))?)?;
    let by_id: HashMap<&str, usize> = rows.iter().map(|r| (r.id.as_str(), r.label)).collect();
    if by_id.len() != rows.len() || rows.len() != truth.data.len() {
        return Err(moclust::Error::Format(format!(
            "{} has {} labels for {} observations",
            pred.display(),
            rows.len(),
            truth.data.len()
        ))
        .into());
    }
    let predicted = truth
        .data
        .ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| moclust::Error::UnknownId(id.clone()))
        })
        .collect::<moclust::Result<Vec<usize>>>()?;
    let outliers: Vec<&str> = rows
        .iter()
        .filter(|r| r.label == OUTLIER_CLASS)
        .map(|r| r.id.as_str())
        .collect();
    Ok(EvalRun {
        pred: pred.to_path_buf(),
        truth: truth_path.to_path_buf(),
        ari: ari(&predicted, &truth_with_outlier_class(&truth))?,
        n_predicted: outliers.len(),
        rates: outlier_eval(&outliers, &truth)?,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn eval(pred: &[PathBuf], truth: &[PathBuf], out: &Path) -> Result<u8> {
    if pred.len() != truth.len() {
        return Err(CliError::Usage(format!(
            "{} result bundles but {} truth files",
            pred.len(),
            truth.len()
        )));
    }
    let runs = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| eval_one(p, t))
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    let mean = EvalMean {
        ari: runs.iter().map(|r| r.ari).sum::<f64>() / k,
        n_predicted: runs.iter().map(|r| r.n_predicted as f64).sum::<f64>() / k,
        tpr: mean_defined(runs.iter().map(|r| r.rates.tpr)),
        fpr: mean_defined(runs.iter().map(|r| r.rates.fpr)),
        tnr: mean_defined(runs.iter().map(|r| r.rates.tnr)),
        fnr: mean_defined(runs.iter().map(|r| r.rates.fnr)),
    };
    let fmt_rate = |r: Option<f64>| r.map_or("NA".to_string(), |v| format!("{v:.4}"));
    for r in &runs {
        println!(
            "{}\tARI {:.4}\tpredicted {}\tTPR {}\tFPR {}",
            r.pred.display(),
            r.ari,
            r.n_predicted,
            fmt_rate(r.rates.tpr),
            fmt_rate(r.rates.fpr)
        );
    }
    println!(
        "mean\tARI {:.4}\tpredicted {:.2}\tTPR {}\tFPR {}",
        mean.ari,
        mean.n_predicted,
        fmt_rate(mean.tpr),
        fmt_rate(mean.fpr)
    );
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &EvalReport { runs, mean })?;
    Ok(0)
}

#[derive(Serialize)]
struct NullcheckEntry {
    id: String,
    y: Option<f64>,
    cluster: usize,
}

#[derive(Serialize)]
struct NullcheckReport {
    loglik: f64,
    n: usize,
    n_failures: usize,
    ys: Vec<NullcheckEntry>,
    null: NullGammaMixture,
    kl: KlEstimate,
}

fn nullcheck(
    data: &Path,
    g: usize,
    cfg: &moclust::FitConfig,
    mode: moclust::nullmodel::SubsetRefit,
    out: &Path,
) -> Result<u8> {
    let data = read_dataset_file(data)?;
    let full = fit(&data, g, cfg)?;
    let ys = subset_logliks(&data, cfg, &full, mode)?;
    let null = NullGammaMixture::from_model(&full.model)?;
    let kl = kl_divergence(&ys, &null)?;
    println!(
        "KL {:.6} over {} values ({} failed refits)",
        kl.value,
        ys.ys.len() - ys.n_failures(),
        ys.n_failures()
    );
    let report = NullcheckReport {
        loglik: full.loglik,
        n: data.len(),
        n_failures: ys.n_failures(),
        ys: data
            .ids()
            .iter()
            .zip(&ys.ys)
            .zip(&ys.subset_labels)
            .map(|((id, &y), &cluster)| NullcheckEntry {
                id: id.clone(),
                y,
                cluster,
            })
            .collect(),
        null,
        kl,
    };
    fs::create_dir_all(out)?;
    write_json(&out.join("nullcheck.json"), &report)?;
    Ok(0)
}
