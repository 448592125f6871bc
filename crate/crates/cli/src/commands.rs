use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;

use mimest_core::bench::{
    read_records, run_sweep, summarize, write_records, write_summaries, CsvAppender, EstimateRecord, RecordFormat,
    SweepConfig, SweepRun, DATA_STREAM, STATUS_OK,
};
use mimest_core::copula::fit_copula;
use mimest_core::estimators::{estimate, EstimatorConfig, MiEstimate};
use mimest_core::exec::with_threads;
use mimest_core::ndmath::Rng;
use mimest_core::synth::{PairedDataset, Task, TaskFamily, Transform, TransformPair};
use mimest_core::{Error, Execution};

use crate::args::{Cli, Command, Format, TaskArgs};
use crate::Failure;

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let Cli { seed, threads, output, format, command } = cli;
    with_threads(threads, move || match command {
        Command::Generate { task, n } => generate(&task, n, seed, output, format),
        Command::Oracle { task, mc_samples } => oracle(&task, mc_samples, seed, format),
        Command::FitCopula { input } => fit(&input, output),
        Command::Estimate { input, task, n, estimator, mode, config, desk, width, record } => {
            let mut cfg = estimator_config(config.as_deref(), desk)?;
            if let Some(w) = width {
                cfg.width = w;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            cfg.validate_for(estimator).map_err(usage)?;
            let start = Instant::now();
            let (result, inline) = match input {
                Some(path) => {
                    let ds = PairedDataset::load(&path).with_context(|| format!("reading {}", path.display()))?;
                    (estimate(estimator, &ds, &cfg, seed)?, None)
                }
                None => {
                    let task = build_task(&task)?;
                    let ds = task.generate(n, &mut Rng::new(seed).split(DATA_STREAM));
                    (estimate(estimator, &ds, &cfg, seed)?, Some(task))
                }
            };
            let elapsed = start.elapsed().as_secs_f64();
            print_estimate(&result, format)?;
            if let (Some(path), Some(task)) = (record, inline) {
                let truth =
                    task.ground_truth(mimest_core::synth::DEFAULT_MC_SAMPLES, &Rng::new(seed), Execution::Parallel)?;
                append_record(&path, &record_for(&task, n, &result, truth.value, truth.std_error, elapsed))?;
            }
            Ok(())
        }
        Command::Sweep { config, resume } => sweep(&config, resume, output, format),
        Command::Summarize { input } => summarize_cmd(&input, output, format),
    })
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn build_task(args: &TaskArgs) -> Result<Task, Failure> {
    Task::new(
        args.task.unwrap_or(TaskFamily::Gauss),
        args.d.unwrap_or(1) as usize,
        args.rho.unwrap_or(0.0),
        args.transform.unwrap_or(TransformPair::both(Transform::Identity)),
    )
    .map_err(usage)
}

fn stdout_line(line: impl std::fmt::Display) -> Result<(), Failure> {
    writeln!(io::stdout().lock(), "{line}").map_err(|e| Failure::Runtime(e.into()))
}

fn generate(args: &TaskArgs, n: usize, seed: u64, output: Option<PathBuf>, format: Option<Format>) -> Outcome {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let task = build_task(args)?;
    if matches!(format, Some(Format::Json)) {
        return Err(usage("--format for datasets must be csv or bin"));
    }
    let ds = task.generate(n, &mut Rng::new(seed).split(DATA_STREAM));
    match output {
        Some(path) => {
            let binary = match format {
                Some(f) => f == Format::Bin,
                None => path.extension().is_some_and(|e| e == "bin"),
            };
            let file = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            if binary {
                ds.write_binary(file)?;
            } else {
                ds.write_csv(file)?;
            }
            stdout_line(format!("n {}\ndx {}\ndy {}\nseed {seed}\npath {}", ds.n(), ds.dx(), ds.dy(), path.display()))
        }
        None => {
            if format == Some(Format::Bin) {
                return Err(usage("binary datasets need --output"));
            }
            ds.write_csv(io::stdout().lock())?;
            log::info!("n {} dx {} dy {} seed {seed}", ds.n(), ds.dx(), ds.dy());
            Ok(())
        }
    }
}

fn oracle(args: &TaskArgs, mc_samples: usize, seed: u64, format: Option<Format>) -> Outcome {
    let task = build_task(args)?;
    if matches!(task, Task::Mog { .. }) && mc_samples < 1000 {
        return Err(usage(format!("--mc-samples must be at least 1000, got {mc_samples}")));
    }
    let truth = task.ground_truth(mc_samples, &Rng::new(seed), Execution::Parallel)?;
    if format == Some(Format::Json) {
        let v = serde_json::json!({ "mi_true": truth.value, "std_error": truth.std_error });
        return stdout_line(v);
    }
    stdout_line(format!("mi_true {:.4}", truth.value))?;
    if matches!(task, Task::Mog { .. }) {
        stdout_line(format!("std_error {:.4}", truth.std_error))?;
    }
    Ok(())
}

fn fit(input: &Path, output: Option<PathBuf>) -> Outcome {
    let ds = PairedDataset::load(input).with_context(|| format!("reading {}", input.display()))?;
    let model = fit_copula(&ds)?;
    let path = output.unwrap_or_else(|| input.with_extension("copula.json"));
    model.save_json(&path).with_context(|| format!("writing {}", path.display()))?;
    stdout_line(format!(
        "dx {}\ndy {}\ngaussian_mi {:.4}\npath {}",
        model.dx(),
        model.dy(),
        model.gaussian_mi(),
        path.display()
    ))
}

fn estimator_config(path: Option<&Path>, desk: bool) -> Result<EstimatorConfig, Failure> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("--config {}: {e}", p.display())))
        }
        None if desk => Ok(EstimatorConfig::desk()),
        None => Ok(EstimatorConfig::default()),
    }
}

fn print_estimate(e: &MiEstimate, format: Option<Format>) -> Outcome {
    if format == Some(Format::Json) {
        return stdout_line(serde_json::to_string(e).map_err(anyhow::Error::from)?);
    }
    stdout_line(format!(
        "mi_est {:.4}\nestimator {}\nmode {}\neval_samples {}\nseed {}",
        e.value, e.estimator, e.mode, e.eval_samples, e.seed
    ))
}

fn record_for(task: &Task, n: usize, e: &MiEstimate, truth: f64, stderr: f64, elapsed: f64) -> EstimateRecord {
    EstimateRecord {
        task: task.family(),
        transform: task.transforms(),
        d: task.d(),
        rho: task.rho(),
        n,
        seed: e.seed,
        estimator: e.estimator,
        mi_true: truth,
        mi_true_stderr: stderr,
        mi_est: Some(e.value),
        mode: e.mode,
        wall_time_seconds: elapsed.max(1e-9),
        status: STATUS_OK.into(),
    }
}

/// Appends one CSV row, writing the header first if the file is new or empty.
fn append_record(path: &Path, r: &EstimateRecord) -> Outcome {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = CsvAppender::new(file, fresh);
    w.push(r)?;
    Ok(())
}

fn records_format(path: &Path, format: Option<Format>) -> Result<RecordFormat, Failure> {
    match format {
        None => Ok(RecordFormat::from_path(path)),
        Some(Format::Csv) => Ok(RecordFormat::Csv),
        Some(Format::Json) => Ok(RecordFormat::Json),
        Some(Format::Bin) => Err(usage("records are written as csv or json")),
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".partial");
    PathBuf::from(name)
}

fn sweep(config: &Path, resume: bool, output: Option<PathBuf>, format: Option<Format>) -> Outcome {
    let cfg = SweepConfig::load(config).map_err(|e| match e {
        Error::Io(io) => Failure::Runtime(anyhow::Error::new(io).context(format!("reading {}", config.display()))),
        other => usage(other),
    })?;
    let path = output
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| usage("no output path: pass --output or set `output` in the config"))?;
    let fmt = records_format(&path, format)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let partial = partial_path(&path);

    let mut previous = Vec::new();
    if resume {
        if path.exists() {
            previous.extend(read_records(&path, fmt).with_context(|| format!("reading {}", path.display()))?);
        }
        if partial.exists() {
            previous.extend(
                read_records(&partial, RecordFormat::Csv).with_context(|| format!("reading {}", partial.display()))?,
            );
        }
        log::info!("resuming with {} earlier rows", previous.len());
    }

    // Rows already in the progress file stay there; new ones are appended
    // as they finish so an interrupted sweep loses nothing.
    let fresh = !resume || !partial.exists();
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&partial)
        .with_context(|| format!("opening {}", partial.display()))?;
    let appender = Mutex::new(CsvAppender::new(file, fresh));
    let sink = |r: &EstimateRecord| {
        if let Err(e) = appender.lock().expect("progress file lock").push(r) {
            log::warn!("could not append to {}: {e}", partial.display());
        }
    };
    let rows = run_sweep(&cfg, SweepRun { exec: Execution::Parallel, previous: &previous, sink: &sink })?;
    drop(appender);
    write_records(&rows, &path, fmt).with_context(|| format!("writing {}", path.display()))?;
    fs::remove_file(&partial).ok();
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    stdout_line(format!("rows {}\nfailed {failed}\npath {}", rows.len(), path.display()))
}

fn summarize_cmd(input: &Path, output: Option<PathBuf>, format: Option<Format>) -> Outcome {
    let records =
        read_records(input, RecordFormat::from_path(input)).with_context(|| format!("reading {}", input.display()))?;
    let rows = summarize(&records).map_err(|e| match e {
        Error::EmptyInput => usage(format!("{} has no records", input.display())),
        other => other.into(),
    })?;
    match output {
        Some(path) => {
            let fmt = records_format(&path, format)?;
            write_summaries(&rows, &path, fmt).with_context(|| format!("writing {}", path.display()))?;
            stdout_line(format!("groups {}\npath {}", rows.len(), path.display()))
        }
        None => {
            let fmt = match format {
                Some(Format::Json) => RecordFormat::Json,
                Some(Format::Bin) => return Err(usage("summaries are written as csv or json")),
                _ => RecordFormat::Csv,
            };
            mimest_core::bench::write_summaries_to(&rows, io::stdout().lock(), fmt)?;
            Ok(())
        }
    }
}
