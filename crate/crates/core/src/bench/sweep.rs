use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::error::Result;
use crate::estimators::{estimate, EstimatorConfig, EstimatorKind, MiEstimate};
use crate::exec::Execution;
use crate::ndmath::{mix_seed, Rng};
use crate::synth::{GroundTruth, Task};

use super::{EstimateRecord, SweepConfig, STATUS_OK};

/// Sub-stream of a run seed that generates the run's dataset. The
/// estimator itself uses low-numbered sub-streams of the same seed.
pub const DATA_STREAM: u64 = 0xDA7A;
const ORACLE_STREAM: u64 = 0x0AC1E;

/// One point of the task grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub task: Task,
    pub n: usize,
}

impl Cell {
    /// Seed of repetition `rep`, a pure function of the master seed and
    /// the cell index.
    pub fn seed(&self, master_seed: u64, rep: usize) -> u64 {
        mix_seed(mix_seed(master_seed, self.index as u64), rep as u64)
    }
}

/// Resolves the grid in config order. Parameters a family ignores (`rho`
/// for mixtures, `d` and transforms for the Swiss roll) collapse, so each
/// distinct task appears once.
pub fn cells(cfg: &SweepConfig) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for &family in &cfg.tasks {
        for &transforms in &cfg.transforms {
            for &d in &cfg.d {
                for &rho in &cfg.rho {
                    for &n in &cfg.n {
                        let task = Task::new(family, d, rho, transforms)?;
                        let key = (family, task.transforms(), task.d(), task.rho().to_bits(), n);
                        if seen.insert(key) {
                            out.push(Cell { index: out.len(), task, n });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Generates the dataset for `seed` and runs one estimator on it. This is
/// exactly what a sweep does for one row.
pub fn run_record(task: &Task, n: usize, kind: EstimatorKind, cfg: &EstimatorConfig, seed: u64) -> Result<MiEstimate> {
    let ds = task.generate(n, &mut Rng::new(seed).split(DATA_STREAM));
    estimate(kind, &ds, cfg, seed)
}

/// Options for [`run_sweep`].
pub struct SweepRun<'a> {
    pub exec: Execution,
    /// Rows from an earlier run; successful ones are reused verbatim.
    pub previous: &'a [EstimateRecord],
    /// Called once per newly computed row, in completion order.
    pub sink: &'a (dyn Fn(&EstimateRecord) + Sync),
}

impl Default for SweepRun<'_> {
    fn default() -> Self {
        SweepRun { exec: Execution::Parallel, previous: &[], sink: &|_| {} }
    }
}

type RowKey = (String, String, usize, u64, usize, u64, EstimatorKind);

fn row_key(task: &Task, n: usize, seed: u64, kind: EstimatorKind) -> RowKey {
    (task.family().to_string(), task.transforms().to_string(), task.d(), task.rho().to_bits(), n, seed, kind)
}

/// Runs every cell × seed × estimator and returns the rows ordered by
/// cell, then seed, then estimator, whatever the execution order.
pub fn run_sweep(cfg: &SweepConfig, run: SweepRun<'_>) -> Result<Vec<EstimateRecord>> {
    cfg.validate()?;
    let grid = cells(cfg)?;
    let done: HashMap<RowKey, &EstimateRecord> = run
        .previous
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| Some((row_key(&r.task_spec().ok()?, r.n, r.seed, r.estimator), r)))
        .collect();

    let mut slots: Vec<Option<EstimateRecord>> = Vec::new();
    let mut pending = Vec::new();
    for cell in &grid {
        for rep in 0..cfg.seeds {
            let seed = cell.seed(cfg.master_seed, rep);
            for &kind in &cfg.estimators {
                match done.get(&row_key(&cell.task, cell.n, seed, kind)) {
                    Some(r) => slots.push(Some((*r).clone())),
                    None => {
                        pending.push((slots.len(), cell.index, seed, kind));
                        slots.push(None);
                    }
                }
            }
        }
    }
    log::info!(
        "{} cells, {} rows, {} reused, {} to run",
        grid.len(),
        slots.len(),
        slots.len() - pending.len(),
        pending.len()
    );

    let mut need_truth: Vec<usize> = pending.iter().map(|p| p.1).collect();
    need_truth.dedup();
    let oracle = Rng::new(mix_seed(cfg.master_seed, ORACLE_STREAM));
    let truths = need_truth
        .iter()
        .map(|&c| grid[c].task.ground_truth(cfg.mc_samples, &oracle.split(c as u64), run.exec).map(|t| (c, t)))
        .collect::<Result<HashMap<usize, GroundTruth>>>()?;

    let finished = AtomicUsize::new(0);
    let rows = run.exec.map(pending.len(), |i| {
        let (_, c, seed, kind) = pending[i];
        let cell = &grid[c];
        let start = Instant::now();
        let result = run_record(&cell.task, cell.n, kind, &cfg.estimator_config, seed);
        let elapsed = start.elapsed().as_secs_f64().max(1e-9);
        let truth = truths[&c];
        let (mi_est, status) = match result {
            Ok(e) if e.value.is_finite() => (Some(e.value), STATUS_OK.to_string()),
            Ok(e) => (None, format!("error: non-finite estimate {}", e.value)),
            Err(e) => (None, format!("error: {e}")),
        };
        let record = EstimateRecord {
            task: cell.task.family(),
            transform: cell.task.transforms(),
            d: cell.task.d(),
            rho: cell.task.rho(),
            n: cell.n,
            seed,
            estimator: kind,
            mi_true: truth.value,
            mi_true_stderr: truth.std_error,
            mi_est,
            mode: kind.mode_for(cfg.estimator_config.mode),
            wall_time_seconds: elapsed,
            status,
        };
        let k = finished.fetch_add(1, Ordering::Relaxed) + 1;
        log::info!(
            "[{k}/{}] {} {} d={} rho={} n={} {}: {}",
            pending.len(),
            record.task,
            record.transform,
            record.d,
            record.rho,
            record.n,
            kind,
            record.mi_est.map_or(record.status.clone(), |v| format!("{v:.4}"))
        );
        (run.sink)(&record);
        record
    });
    for ((slot, ..), row) in pending.iter().zip(rows) {
        slots[*slot] = Some(row);
    }
    Ok(slots.into_iter().map(|r| r.expect("every slot filled")).collect())
}
