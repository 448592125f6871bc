//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits 0 once every criterion has been evaluated, whatever the outcome;
//! set `MIMEST_ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.
//! `MIMEST_FULL_SWEEP=1` makes the reproducibility check rerun the whole
//! shipped sweep instead of a slice of it. `MIMEST_ACCEPTANCE_CONFIG` names a
//! JSON estimator config to use instead of the single-core preset.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use mimest_core::bench::{read_records, run_record, run_sweep, write_records, RecordFormat, SweepConfig, SweepRun};
use mimest_core::copula::fit_copula;
use mimest_core::estimators::{telescoped_ratio, train, EstimatorConfig, EstimatorKind};
use mimest_core::ndmath::{mix_seed, Matrix, Rng};
use mimest_core::neural::{softmax_xent, softmax_xent_backward, Mlp, MlpConfig};
use mimest_core::synth::{MogSpec, Task, TaskFamily, Transform, TransformPair};
use mimest_core::Execution;

const SEEDS: u64 = 10;
const ROOT_SEED: u64 = 0x5EED_ACCE;
const N: usize = 10_000;

fn seeds() -> Vec<u64> {
    (0..SEEDS).map(|i| mix_seed(ROOT_SEED, i)).collect()
}

fn gauss(d: usize, rho: f64, t: Transform) -> Task {
    Task::new(TaskFamily::Gauss, d, rho, TransformPair::both(t)).unwrap()
}

fn analytic(d: usize, rho: f64) -> f64 {
    -0.5 * d as f64 * (1.0 - rho * rho).ln()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn median_abs_error(v: &[f64], truth: f64) -> f64 {
    median(&v.iter().map(|e| (e - truth).abs()).collect::<Vec<_>>())
}

fn fmt_all(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

/// Estimates over the ten seeds, memoized so criteria sharing a setting
/// share the runs.
struct Runs {
    cfg: EstimatorConfig,
    cache: Mutex<HashMap<(String, usize, EstimatorKind), Vec<f64>>>,
}

impl Runs {
    fn get(&self, task: &Task, n: usize, kind: EstimatorKind) -> Vec<f64> {
        let key = (format!("{task:?}"), n, kind);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let seeds = seeds();
        let v: Vec<f64> = Execution::Parallel.map(seeds.len(), |i| {
            run_record(task, n, kind, &self.cfg, seeds[i]).unwrap_or_else(|e| panic!("{kind} on {task:?}: {e}")).value
        });
        self.cache.lock().unwrap().insert(key, v.clone());
        v
    }
}

type Outcome = (bool, String);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn c1_gradients() -> Outcome {
    let mut rng = Rng::new(ROOT_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let hidden = rng.below(3);
        let width = 1 + rng.below(16);
        let din = 1 + rng.below(8);
        let k = 2 + rng.below(3);
        let skip = rng.below(2) == 1;
        let cfg = MlpConfig::new(din, k).with_hidden(hidden, if hidden == 0 { 0 } else { width }).with_skip(skip);
        let net = Mlp::new(cfg.clone(), &mut rng).unwrap();
        let rows = 1 + rng.below(6);
        let x = Matrix::from_fn(rows, din, |_, _| rng.standard_normal());
        let labels: Vec<usize> = (0..rows).map(|_| rng.below(k)).collect();
        let (_, analytic) = softmax_xent_backward(&net, &x, &labels).unwrap();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..net.num_params())
            .map(|p| {
                let loss_at = |delta: f64| {
                    let mut params = net.params().to_vec();
                    params[p] += delta;
                    let shifted = Mlp::from_params(cfg.clone(), params).unwrap();
                    softmax_xent(&shifted.forward(&x).unwrap(), &labels).unwrap()
                };
                (loss_at(h) - loss_at(-h)) / (2.0 * h)
            })
            .collect();
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / (norm(&analytic) + norm(&numeric)).max(1e-12));
    }
    (worst < 1e-4, format!("worst relative error {worst:.2e} over 100 networks"))
}

fn c2_telescoping() -> Outcome {
    let cfg = EstimatorConfig { max_epochs: 5, ..EstimatorConfig::desk() };
    let task = gauss(2, 0.6, Transform::Cube);
    let worst = Execution::Parallel
        .map(10, |i| {
            let seed = mix_seed(ROOT_SEED ^ 2, i as u64);
            let ds = task.generate(2000, &mut Rng::new(seed));
            let trained = train(EstimatorKind::Mime, &ds, &cfg, seed).unwrap();
            let mut rng = Rng::new(seed ^ 1);
            let inputs = Matrix::from_fn(1000, 4, |_, _| 3.0 * rng.standard_normal());
            let logits = trained.network().unwrap().forward(&inputs).unwrap();
            logits
                .iter_rows()
                .map(|r| {
                    let (direct, summed) = telescoped_ratio(r);
                    (direct - summed).abs()
                })
                .fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max);
    (worst < 1e-12, format!("max |r14 - (r12 + r23 + r34)| = {worst:.1e} over 10 nets x 1000 inputs"))
}

fn c3_independence(runs: &Runs) -> Outcome {
    let mut ok = true;
    let mut worst = (0.0, String::new());
    for d in [1, 4] {
        for t in Transform::ALL {
            let task = gauss(d, 0.0, t);
            for kind in EstimatorKind::ALL {
                let v = runs.get(&task, N, kind);
                let m = median(&v.iter().map(|e| e.abs()).collect::<Vec<_>>());
                println!("    d={d} {:<8} {:<12} median |est| {m:.4}", t.name(), kind.name());
                ok &= m <= 0.1;
                if m > worst.0 {
                    worst = (m, format!("d={d} {} {kind}", t.name()));
                }
            }
        }
    }
    (ok, format!("largest median |estimate| {:.4} ({}), bound 0.1", worst.0, worst.1))
}

fn c4_low_mi(runs: &Runs) -> Outcome {
    let truth = analytic(1, 0.5);
    let task = gauss(1, 0.5, Transform::Identity);
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [
        EstimatorKind::Mime,
        EstimatorKind::Mine,
        EstimatorKind::Nwj,
        EstimatorKind::InfoNce,
        EstimatorKind::DoeGaussian,
    ] {
        let v = runs.get(&task, N, kind);
        let m = median(&v);
        println!("    {:<12} median {m:.4}  runs {}", kind.name(), fmt_all(&v));
        ok &= (m - truth).abs() <= 0.05;
        parts.push(format!("{kind} {m:.4}"));
    }
    (ok, format!("truth {truth:.4} +- 0.05: {}", parts.join(", ")))
}

fn c5_tanh(runs: &Runs) -> Outcome {
    let truth = analytic(4, 0.7);
    let v = runs.get(&gauss(4, 0.7, Transform::Tanh), N, EstimatorKind::Mime);
    let m = median(&v);
    println!("    mime runs {}", fmt_all(&v));
    let ok = (m - truth).abs() <= 0.2 * truth;
    (ok, format!("mime median {m:.4}, truth {truth:.4}, allowed [{:.4}, {:.4}]", 0.8 * truth, 1.2 * truth))
}

fn c6_high_mi(runs: &Runs) -> Outcome {
    let truth = analytic(8, 0.9);
    let task = gauss(8, 0.9, Transform::Cube);
    let mime = runs.get(&task, N, EstimatorKind::Mime);
    let mine = runs.get(&task, N, EstimatorKind::Mine);
    let nce = runs.get(&task, N, EstimatorKind::InfoNce);
    for (name, v) in [("mime", &mime), ("mine", &mine), ("infonce", &nce)] {
        println!("    {name:<8} median {:.4}  runs {}", median(v), fmt_all(v));
    }
    let (e_mime, e_mine, e_nce) =
        (median_abs_error(&mime, truth), median_abs_error(&mine, truth), median_abs_error(&nce, truth));
    let batch = runs.cfg.contrastive_batch() as f64;
    let cap = 512f64.ln();
    let nce_max = nce.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ok = e_mime <= e_mine && e_mime <= e_nce && nce_max <= cap && nce_max <= batch.ln();
    (
        ok,
        format!(
            "median abs error mime {e_mime:.4}, mine {e_mine:.4}, infonce {e_nce:.4}; max infonce {nce_max:.4} \
             (ln {batch} = {:.4}, ln 512 = {cap:.4})",
            batch.ln()
        ),
    )
}

fn c7_mc_oracle() -> Outcome {
    let spec = MogSpec::new(4, vec![0.0], vec![0.7]).unwrap();
    let (value, se) = spec.true_mi(1_000_000, &Rng::new(ROOT_SEED), Execution::Parallel).unwrap();
    let truth = analytic(4, 0.7);
    let ok = se < 0.01 && (value - truth).abs() <= 3.0 * se;
    (ok, format!("MC {value:.5} +- {se:.5}, closed form {truth:.5}, {:.2} std errors", (value - truth).abs() / se))
}

fn ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn c8_copula_marginals() -> Outcome {
    let n = 100_000;
    let ds = gauss(4, 0.7, Transform::Cube).generate(n, &mut Rng::new(ROOT_SEED));
    let model = fit_copula(&ds).unwrap();
    let samples = model.sample_joint(n, &mut Rng::new(ROOT_SEED ^ 8));
    let data = ds.joint();
    let mut foreign = 0;
    let mut worst_ks: f64 = 0.0;
    for j in 0..data.cols() {
        let observed = data.column(j);
        let set: HashSet<u64> = observed.iter().map(|v| v.to_bits()).collect();
        let drawn = samples.column(j);
        foreign += drawn.iter().filter(|v| !set.contains(&v.to_bits())).count();
        worst_ks = worst_ks.max(ks(&drawn, &observed));
    }
    (
        foreign == 0 && worst_ks < 0.02,
        format!("{foreign} sampled values outside the observed marginals; max KS {worst_ks:.4} (bound 0.02)"),
    )
}

fn c9_consistency(runs: &Runs) -> Outcome {
    let truth = analytic(1, 0.5);
    let task = gauss(1, 0.5, Transform::Identity);
    let errs: Vec<f64> = [1250, 2500, N]
        .iter()
        .map(|&n| {
            let v = runs.get(&task, n, EstimatorKind::Mime);
            println!("    n={n:<6} median {:.4}  runs {}", median(&v), fmt_all(&v));
            median_abs_error(&v, truth)
        })
        .collect();
    let ok = errs[0] >= errs[1] && errs[1] >= errs[2];
    (ok, format!("median abs error at n = 1250, 2500, 10000: {:.4}, {:.4}, {:.4}", errs[0], errs[1], errs[2]))
}

fn c10_ablation(runs: &Runs) -> Outcome {
    let truth = analytic(4, 0.7);
    let task = gauss(4, 0.7, Transform::Cube);
    let mime = runs.get(&task, N, EstimatorKind::Mime);
    let mre = runs.get(&task, N, EstimatorKind::Mre);
    println!("    mime runs {}", fmt_all(&mime));
    println!("    mre  runs {}", fmt_all(&mre));
    let (a, b) = (median_abs_error(&mime, truth), median_abs_error(&mre, truth));
    (a <= b, format!("median abs error mime {a:.4} vs mre {b:.4} (truth {truth:.4})"))
}

fn masked_csv(path: &Path) -> String {
    let records = read_records(path, RecordFormat::Csv).unwrap();
    let masked: Vec<_> =
        records.into_iter().map(|r| mimest_core::bench::EstimateRecord { wall_time_seconds: 1.0, ..r }).collect();
    let out = path.with_extension("masked.csv");
    write_records(&masked, &out, RecordFormat::Csv).unwrap();
    std::fs::read_to_string(out).unwrap()
}

fn c11_reproducibility() -> Outcome {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default_sweep.json");
    let mut cfg = SweepConfig::load(&shipped).unwrap();
    let full = std::env::var("MIMEST_FULL_SWEEP").is_ok_and(|v| v == "1");
    if !full {
        cfg.d = vec![1];
        cfg.rho = vec![0.0, 0.5];
        cfg.seeds = 2;
    }
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let first = run_sweep(&cfg, SweepRun::default()).unwrap();
    write_records(&first, &a, RecordFormat::Csv).unwrap();
    let second = run_sweep(&cfg, SweepRun { exec: Execution::Sequential, ..SweepRun::default() }).unwrap();
    write_records(&second, &b, RecordFormat::Csv).unwrap();
    let identical = masked_csv(&a) == masked_csv(&b);

    let mut mismatched = 0;
    for r in first.iter().filter(|r| r.is_ok()).step_by(5) {
        let again = run_record(&r.task_spec().unwrap(), r.n, r.estimator, &cfg.estimator_config, r.seed).unwrap();
        if Some(again.value.to_bits()) != r.mi_est.map(f64::to_bits) {
            mismatched += 1;
        }
    }
    let failed = first.iter().filter(|r| !r.is_ok()).count();
    (
        identical && mismatched == 0 && failed == 0,
        format!(
            "{} sweep, {} rows: reruns identical apart from wall time = {identical}; \
             isolated reruns differing = {mismatched}; failed rows = {failed}",
            if full { "full" } else { "sliced" },
            first.len()
        ),
    )
}

fn main() {
    let cfg = match std::env::var("MIMEST_ACCEPTANCE_CONFIG") {
        Ok(path) => serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap(),
        Err(_) => EstimatorConfig::desk(),
    };
    let runs = Runs { cfg, cache: Mutex::new(HashMap::new()) };
    let criteria: Vec<(&str, Check<'_>)> = vec![
        ("1 gradient correctness", Box::new(c1_gradients)),
        ("2 telescoping identity", Box::new(c2_telescoping)),
        ("3 independence zero-point", Box::new(|| c3_independence(&runs))),
        ("4 closed-form recovery, low MI", Box::new(|| c4_low_mi(&runs))),
        ("5 closed-form recovery, tanh d=4", Box::new(|| c5_tanh(&runs))),
        ("6 high-MI advantage", Box::new(|| c6_high_mi(&runs))),
        ("7 MC oracle validity", Box::new(c7_mc_oracle)),
        ("8 copula marginal preservation", Box::new(c8_copula_marginals)),
        ("9 consistency trend", Box::new(|| c9_consistency(&runs))),
        ("10 ablation direction", Box::new(|| c10_ablation(&runs))),
        ("11 reproducibility", Box::new(c11_reproducibility)),
    ];
    let only: Option<Vec<String>> =
        std::env::args().nth(1).filter(|a| !a.starts_with('-')).map(|a| a.split(',').map(String::from).collect());

    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in &criteria {
        let id = name.split(' ').next().unwrap();
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = check();
        ran += 1;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.0}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("MIMEST_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
