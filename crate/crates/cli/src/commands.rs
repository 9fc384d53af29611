use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use fluidtree::dataset::{
    all_patterns, augment, generate as generate_dataset, partition, round_label, sample_states, Dataset,
    GenerationConfig, GenerationStats, LabelBook, SupportPattern, EPS_ZERO,
};
use fluidtree::fluid::{
    resolve_horizon, solve_fluid, verify_pontryagin, DiscretizationConfig, Horizon,
};
use fluidtree::network::{random_reentrant, standard_crisscross, standard_rybko_stolyar, NetworkSpec};
use fluidtree::octree::{accuracy, train as train_tree, tune_depth, TrainConfig};
use fluidtree::policy::{compare_cost, default_step, simulate as simulate_policy, FallbackRule, PartitionedPolicy, PolicyCell};

use crate::manifest::{manifest_path, phase, phase_seed, RunManifest};
use crate::{
    BenchArgs, EvaluateArgs, ExportArgs, Family, GenerateArgs, GridArgs, NetworkArgs, SimulateArgs, SolveArgs,
    TrainArgs, TreeFormat,
};

const DATASET_FILE: &str = "dataset.csv";
const LABELS_FILE: &str = "labels.json";
const STATS_FILE: &str = "stats.json";
const GENERATION_FILE: &str = "generation.json";
const POLICY_FILE: &str = "policy.json";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_spec(path: &Path) -> Result<NetworkSpec<f64>> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("invalid network spec {}", path.display()))
}

fn read_policy(dir: &Path) -> Result<PartitionedPolicy> {
    let path = dir.join(POLICY_FILE);
    PartitionedPolicy::from_json(&read_text(&path)?).with_context(|| format!("invalid policy {}", path.display()))
}

fn read_dataset(dir: &Path) -> Result<(Dataset, LabelBook)> {
    let eps = match fs::read_to_string(dir.join(GENERATION_FILE)) {
        Ok(text) => serde_json::from_str::<GenerationConfig>(&text)
            .with_context(|| format!("invalid {}", dir.join(GENERATION_FILE).display()))?
            .eps_zero,
        Err(_) => EPS_ZERO,
    };
    let csv_path = dir.join(DATASET_FILE);
    let file = fs::File::open(&csv_path).with_context(|| format!("cannot read {}", csv_path.display()))?;
    let ds = Dataset::read_csv(file, eps).with_context(|| format!("invalid dataset {}", csv_path.display()))?;
    let book = LabelBook::from_json(&read_text(&dir.join(LABELS_FILE))?)?;
    if let Some(bad) = ds.samples.iter().find(|s| s.label >= book.len()) {
        bail!("dataset label {} is missing from {}", bad.label, LABELS_FILE);
    }
    Ok((ds, book))
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("invalid {what} entry {s:?}")))
        .collect()
}

fn parse_state(text: &str, n: usize) -> Result<Vec<f64>> {
    let x = parse_list(text, "state")?;
    if x.len() != n {
        bail!("state has {} entries, the network has {n} classes", x.len());
    }
    Ok(x)
}

fn parse_auto(text: &str, what: &str) -> Result<Option<f64>> {
    if text == "auto" {
        return Ok(None);
    }
    let v: f64 = text.parse().with_context(|| format!("{what} must be `auto` or a number, got {text:?}"))?;
    if !(v > 0.0 && v.is_finite()) {
        bail!("{what} must be positive, got {v}");
    }
    Ok(Some(v))
}

fn grid_config(g: &GridArgs) -> Result<DiscretizationConfig> {
    let horizon = match parse_auto(&g.horizon, "horizon")? {
        None => Horizon::Auto,
        Some(t) => Horizon::Fixed(t),
    };
    let cfg = DiscretizationConfig {
        horizon,
        intervals: g.intervals,
        grading: g.grading,
        refine: g.refine,
        ..Default::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn fmt_control(u: &[f64]) -> String {
    let parts: Vec<String> = u.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(","))
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

pub fn network(a: NetworkArgs) -> Result<()> {
    let mut m = RunManifest::new("network", &a)?;
    let spec = match a.make {
        Family::Crisscross => standard_crisscross(),
        Family::Rybko => standard_rybko_stolyar(),
        Family::Reentrant => {
            use rand::SeedableRng;
            let seed = phase_seed(a.seed, phase::NETWORK);
            m.seed("network", seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            random_reentrant(a.m, a.load, &mut rng)?
        }
    };
    ensure_parent(&a.out)?;
    m.output(&a.out, serde_json::to_string_pretty(&spec)?.as_bytes())?;
    m.write(&manifest_path(&a.out, false))?;
    println!("{} classes, {} servers -> {}", spec.n(), spec.m(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    solution: &'a fluidtree::fluid::FluidSolution,
    #[serde(skip_serializing_if = "Option::is_none")]
    pontryagin: Option<fluidtree::fluid::PontryaginReport>,
}

pub fn solve(a: SolveArgs) -> Result<()> {
    let mut m = RunManifest::new("solve", &a)?;
    let spec = read_spec(&a.spec)?;
    let x0 = parse_state(&a.x0, spec.n())?;
    let cfg = grid_config(&a.grid)?;
    let sol = m.time("solve", || solve_fluid(&spec, &x0, &cfg))?;
    let pontryagin = a.pontryagin_tol.map(|tol| verify_pontryagin(&spec, &sol, tol)).transpose()?;
    ensure_parent(&a.out)?;
    let out = SolveOutput { solution: &sol, pontryagin };
    m.output(&a.out, serde_json::to_string_pretty(&out)?.as_bytes())?;
    if let Some(path) = &a.trajectory {
        ensure_parent(path)?;
        let mut buf = Vec::new();
        sol.write_trajectory_csv(&mut buf)?;
        m.output(path, &buf)?;
    }
    m.write(&manifest_path(&a.out, false))?;
    println!("objective {:.10}", sol.objective);
    println!("horizon {:.6}, {} intervals, {} simplex iterations", sol.horizon(), sol.intervals(), sol.lp_iterations);
    println!("initial control {}", fmt_control(&round_label(&sol.u_pieces[0])));
    if let Some(r) = &out.pontryagin {
        println!("pontryagin pass fraction {:.4}, terminal costate ok: {}", r.pass_fraction, r.terminal_ok);
    }
    Ok(())
}

fn select_patterns(text: &str, n: usize, seed: u64) -> Result<Vec<SupportPattern>> {
    if text == "all" {
        return Ok(all_patterns(n));
    }
    if text == "interior" {
        return Ok(vec![SupportPattern::full(n)]);
    }
    if let Some(k) = text.strip_prefix("random:") {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let k: usize = k.parse().with_context(|| format!("invalid pattern count in {text:?}"))?;
        // draw from patterns of size n/2 .. n-1 without enumerating all 2^n subsets
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![SupportPattern::full(n)];
        let mut tries = 0;
        while out.len() < k + 1 {
            tries += 1;
            if tries > 1000 * (k + 1) {
                bail!("cannot draw {k} distinct boundary patterns for {n} classes");
            }
            let size = n.div_ceil(2).max(1) + rand::Rng::gen_range(&mut rng, 0..(n - n.div_ceil(2)).max(1));
            if size >= n {
                continue;
            }
            let mut classes: Vec<usize> = (0..n).collect();
            classes.shuffle(&mut rng);
            let p = SupportPattern::new(classes.into_iter().take(size))?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        return Ok(out);
    }
    let list: Vec<SupportPattern> = serde_json::from_str(&read_text(Path::new(text))?)
        .with_context(|| format!("{text} must hold a list of 1-based class lists"))?;
    Ok(list)
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let mut m = RunManifest::new("generate", &a)?;
    let spec = read_spec(&a.spec)?;
    let scfg = grid_config(&a.grid)?;
    let pattern_seed = phase_seed(a.seed, phase::PATTERNS);
    let sample_seed = phase_seed(a.seed, phase::SAMPLE);
    m.seed("patterns", pattern_seed);
    m.seed("sample", sample_seed);
    let alphas = parse_list(&a.alphas, "alpha")?;
    if a.scaled_only && alphas.is_empty() {
        bail!("--scaled-only needs at least one --alphas value");
    }
    let gcfg = GenerationConfig {
        patterns: select_patterns(&a.patterns, spec.n(), pattern_seed)?,
        per_pattern: a.per_pattern,
        times: parse_list(&a.times, "time")?,
        alphas: alphas.clone(),
        filter: !a.no_filter,
        eps_zero: a.eps_zero,
        seed: sample_seed,
        chunk_size: a.chunk_size,
        ..Default::default()
    };
    gcfg.validate(spec.n())?;
    let (base, book, stats) = m.time("generate", || generate_dataset(&spec, &gcfg, &scfg))?;
    let ds = if alphas.is_empty() {
        base
    } else {
        let mut aug = augment(&base, &alphas);
        if a.scaled_only {
            aug.samples.drain(..base.len());
        }
        aug
    };
    ensure_dir(&a.out)?;
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    m.output(&a.out.join(DATASET_FILE), &csv)?;
    m.output(&a.out.join(LABELS_FILE), book.to_json()?.as_bytes())?;
    m.output(&a.out.join(STATS_FILE), serde_json::to_string_pretty(&stats)?.as_bytes())?;
    m.output(&a.out.join(GENERATION_FILE), serde_json::to_string_pretty(&gcfg)?.as_bytes())?;
    m.write(&manifest_path(&a.out, true))?;
    print_stats(&stats, &ds, &book);
    Ok(())
}

fn print_stats(stats: &GenerationStats, ds: &Dataset, book: &LabelBook) {
    println!(
        "{} instances: {} solved, {} failed, {} filtered; {} samples written",
        stats.instances,
        stats.solved,
        stats.failed,
        stats.filtered,
        ds.len()
    );
    for (label, count) in ds.label_counts() {
        println!("  label {label} {}: {count}", fmt_control(book.control(label).unwrap_or(&[])));
    }
}

/// Deterministic train/validation split keyed on sample index.
fn split_validation(ds: &Dataset, fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let cut = (fraction * u32::MAX as f64) as u64;
    let mut train = Dataset::new(ds.n());
    let mut valid = Dataset::new(ds.n());
    for (i, s) in ds.samples.iter().enumerate() {
        if phase_seed(seed, i as u64) & 0xFFFF_FFFF < cut {
            valid.samples.push(s.clone());
        } else {
            train.samples.push(s.clone());
        }
    }
    (train, valid)
}

#[derive(Serialize)]
struct CellSummary {
    patterns: Vec<SupportPattern>,
    samples: usize,
    depth: usize,
    leaves: usize,
    train_accuracy: f64,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train", &a)?;
    let (ds, book) = read_dataset(&a.data)?;
    if ds.is_empty() {
        bail!("dataset {} is empty", a.data.display());
    }
    let n = ds.n();
    let cells: Vec<Vec<SupportPattern>> = match a.cells.as_str() {
        "per-pattern" => ds.pattern_counts().into_keys().map(|p| vec![p]).collect(),
        "single" => {
            let mut pats: Vec<SupportPattern> = ds.pattern_counts().into_keys().collect();
            if !pats.contains(&SupportPattern::full(n)) {
                pats.push(SupportPattern::full(n));
            }
            vec![pats]
        }
        file => serde_json::from_str(&read_text(Path::new(file))?)
            .with_context(|| format!("{file} must hold a list of cells, each a list of 1-based class lists"))?,
    };
    let parts = partition(&ds, &cells)?;
    let depth_grid: Vec<usize> = parse_list(&a.depth_grid, "depth")?.into_iter().map(|d| d as usize).collect();
    let fixed_depth = match a.max_depth.as_str() {
        "auto" => None,
        d => Some(d.parse::<usize>().with_context(|| format!("--max-depth must be `auto` or an integer, got {d:?}"))?),
    };
    let train_seed = phase_seed(a.seed, phase::TRAIN);
    let split_seed = phase_seed(a.seed, phase::SPLIT);
    m.seed("train", train_seed);
    m.seed("split", split_seed);

    let mut policy_cells = Vec::with_capacity(cells.len());
    let mut summary = Vec::with_capacity(cells.len());
    for (k, (patterns, cell_ds)) in cells.into_iter().zip(parts.cells).enumerate() {
        if cell_ds.is_empty() {
            bail!("cell {k} has no training samples");
        }
        let base = TrainConfig {
            max_depth: fixed_depth.unwrap_or(5),
            min_leaf: a.min_leaf,
            restarts: a.restarts,
            sparsity: a.sparsity,
            seed: phase_seed(train_seed, k as u64),
            depth_grid: depth_grid.clone(),
            ..Default::default()
        };
        base.validate()?;
        let cfg = match fixed_depth {
            Some(_) => base,
            None => {
                let (tr, va) = split_validation(&cell_ds, a.valid_fraction, phase_seed(split_seed, k as u64));
                if tr.is_empty() || va.is_empty() || cell_ds.label_counts().len() < 2 {
                    base
                } else {
                    m.time(&format!("tune cell {k}"), || tune_depth(&tr, &va, &base))?
                }
            }
        };
        let tree = m.time(&format!("train cell {k}"), || train_tree(&cell_ds, &cfg))?;
        let acc = accuracy(&tree, &cell_ds)?;
        summary.push(CellSummary {
            patterns: patterns.clone(),
            samples: cell_ds.len(),
            depth: tree.depth,
            leaves: tree.num_leaves(),
            train_accuracy: acc,
        });
        policy_cells.push(PolicyCell { patterns, tree });
    }
    let policy = PartitionedPolicy::new(n, policy_cells, book, a.eps_zero, FallbackRule::ClosestSuperset)?;
    ensure_dir(&a.out)?;
    m.output(&a.out.join(POLICY_FILE), policy.to_json()?.as_bytes())?;
    m.output(&a.out.join("cells.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    m.write(&manifest_path(&a.out, true))?;
    for (k, s) in summary.iter().enumerate() {
        let pats: Vec<String> = s.patterns.iter().take(4).map(|p| p.to_string()).collect();
        let more = if s.patterns.len() > 4 { format!(" +{}", s.patterns.len() - 4) } else { String::new() };
        println!(
            "cell {k} [{}{more}]: {} samples, depth {}, {} leaves, train accuracy {:.4}",
            pats.join(" "),
            s.samples,
            s.depth,
            s.leaves,
            s.train_accuracy
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    samples: usize,
    accuracy: f64,
    accuracy_by_pattern: BTreeMap<String, f64>,
    /// Counts keyed by true control, then predicted control.
    confusion: BTreeMap<String, BTreeMap<String, usize>>,
    fallback_samples: usize,
    cost_ratios: Vec<f64>,
    max_cost_ratio: Option<f64>,
    median_solver_seconds: f64,
    median_inference_seconds: f64,
    speed_up: f64,
}

/// Median seconds per call of `f`, timing repeated calls until a measurable span has passed.
fn time_call(mut f: impl FnMut()) -> f64 {
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        let el = start.elapsed().as_secs_f64();
        if el > 1e-3 || reps >= 1 << 20 {
            return el / reps as f64;
        }
        reps *= 4;
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut m = RunManifest::new("evaluate", &a)?;
    let spec = read_spec(&a.spec)?;
    let policy = read_policy(&a.model)?;
    let (test, test_book) = read_dataset(&a.test)?;
    let scfg = grid_config(&a.grid)?;
    if test.n() != spec.n() || policy.n() != spec.n() {
        bail!("network, model and test data dimensions differ");
    }
    if test.is_empty() {
        bail!("test dataset is empty");
    }
    let mut hits = 0usize;
    let mut fallback = 0usize;
    let mut by_pattern: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    m.time("classify", || -> Result<()> {
        for s in &test.samples {
            let truth = test_book.control(s.label).expect("labels checked on load");
            let d = policy.decide(&s.x)?;
            fallback += d.fallback as usize;
            let ok = d.control.iter().zip(truth).all(|(p, q)| (p - q).abs() <= 1e-6);
            hits += ok as usize;
            let e = by_pattern.entry(s.pattern.to_string()).or_default();
            e.0 += ok as usize;
            e.1 += 1;
            *confusion.entry(fmt_control(truth)).or_default().entry(fmt_control(&d.control)).or_default() += 1;
        }
        Ok(())
    })?;

    let cost_states: Vec<&[f64]> = test.samples.iter().take(a.cost_samples).map(|s| s.x.as_slice()).collect();
    let cost_ratios: Vec<f64> = m.time("closed loop", || {
        cost_states.par_iter().map(|x| compare_cost(&spec, &policy, x, &scfg, None)).collect::<Result<Vec<_>, _>>()
    })?;

    let timing_states: Vec<&[f64]> = test.samples.iter().take(a.timing_samples).map(|s| s.x.as_slice()).collect();
    let (solve_times, infer_times) = m.time("latency", || -> Result<(Vec<f64>, Vec<f64>)> {
        let mut st = Vec::new();
        let mut it = Vec::new();
        for x in &timing_states {
            let start = Instant::now();
            solve_fluid(&spec, x, &scfg)?;
            st.push(start.elapsed().as_secs_f64());
            it.push(time_call(|| {
                std::hint::black_box(policy.act(std::hint::black_box(x)).ok());
            }));
        }
        Ok((st, it))
    })?;
    let (ms, mi) = (median(solve_times), median(infer_times));
    let report = EvaluationReport {
        samples: test.len(),
        accuracy: hits as f64 / test.len() as f64,
        accuracy_by_pattern: by_pattern.into_iter().map(|(k, (h, t))| (k, h as f64 / t as f64)).collect(),
        confusion,
        fallback_samples: fallback,
        max_cost_ratio: cost_ratios.iter().copied().reduce(f64::max),
        cost_ratios,
        median_solver_seconds: ms,
        median_inference_seconds: mi,
        speed_up: ms / mi,
    };
    ensure_parent(&a.report)?;
    m.output(&a.report, serde_json::to_string_pretty(&report)?.as_bytes())?;
    m.write(&manifest_path(&a.report, false))?;
    println!("accuracy {:.4} on {} samples ({} routed by fallback)", report.accuracy, report.samples, fallback);
    if let Some(r) = report.max_cost_ratio {
        println!("max closed-loop cost ratio {r:.4} over {} states", report.cost_ratios.len());
    }
    println!("median solve {:.3e} s, median inference {:.3e} s, speed-up {:.0}x", ms, mi, report.speed_up);
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let mut m = RunManifest::new("simulate", &a)?;
    let spec = read_spec(&a.spec)?;
    let policy = read_policy(&a.model)?;
    let x0 = parse_state(&a.x0, spec.n())?;
    let horizon = match parse_auto(&a.horizon, "horizon")? {
        Some(t) => t,
        None => resolve_horizon(&spec, &x0, &DiscretizationConfig::default())?,
    };
    let h = parse_auto(&a.h, "step")?.unwrap_or(default_step(horizon));
    let res = m.time("simulate", || simulate_policy(&spec, &policy, &x0, horizon, h))?;
    ensure_parent(&a.out)?;
    let mut buf = Vec::new();
    res.write_csv(&mut buf)?;
    m.output(&a.out, &buf)?;
    m.write(&manifest_path(&a.out, false))?;
    println!("cost {:.10}", res.cost);
    println!(
        "horizon {horizon:.6}, step {h:.3e}, terminal norm {:.3e}, max clamp {:.3e}, fallback steps {}",
        res.terminal_norm, res.max_violation, res.fallback_steps
    );
    Ok(())
}

pub fn export_tree(a: ExportArgs) -> Result<()> {
    let policy = read_policy(&a.model)?;
    let cells: Vec<(usize, &PolicyCell)> = match a.cell {
        Some(k) => vec![(k, policy.cells().get(k).with_context(|| format!("model has no cell {k}"))?)],
        None => policy.cells().iter().enumerate().collect(),
    };
    let text = match a.format {
        TreeFormat::Json => {
            let trees: Vec<&fluidtree::octree::ObliqueTree> = cells.iter().map(|(_, c)| &c.tree).collect();
            if trees.len() == 1 {
                serde_json::to_string_pretty(trees[0])?
            } else {
                serde_json::to_string_pretty(&trees)?
            }
        }
        TreeFormat::Text | TreeFormat::Dot => {
            let mut out = String::new();
            for (k, c) in &cells {
                let pats: Vec<String> = c.patterns.iter().map(|p| p.to_string()).collect();
                if a.format == TreeFormat::Text {
                    out.push_str(&format!("# cell {k}: patterns {}\n", pats.join(" ")));
                    out.push_str(&c.tree.to_text(policy.book()));
                } else {
                    out.push_str(&format!("// cell {k}: patterns {}\n", pats.join(" ")));
                    out.push_str(&c.tree.to_dot(policy.book()));
                }
            }
            out
        }
    };
    match &a.out {
        Some(path) => {
            ensure_parent(path)?;
            let mut m = RunManifest::new("export-tree", &a)?;
            m.output(path, text.as_bytes())?;
            m.write(&manifest_path(path, false))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    samples: usize,
    intervals: usize,
    solver_seconds: Vec<f64>,
    median_solver_seconds: f64,
    median_inference_seconds: Option<f64>,
    speed_up: Option<f64>,
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let mut m = RunManifest::new("bench", &a)?;
    let spec = read_spec(&a.spec)?;
    let scfg = grid_config(&a.grid)?;
    let policy = a.model.as_deref().map(read_policy).transpose()?;
    let seed = phase_seed(a.seed, phase::EVAL);
    m.seed("states", seed);
    let gcfg = GenerationConfig {
        patterns: vec![SupportPattern::full(spec.n())],
        per_pattern: a.samples.max(1),
        seed,
        ..Default::default()
    };
    let states = sample_states(spec.n(), &gcfg);
    let mut solver = Vec::with_capacity(states.len());
    let mut infer = Vec::new();
    for x in &states {
        let start = Instant::now();
        solve_fluid(&spec, x, &scfg)?;
        solver.push(start.elapsed().as_secs_f64());
        if let Some(p) = &policy {
            infer.push(time_call(|| {
                std::hint::black_box(p.act(std::hint::black_box(x)).ok());
            }));
        }
    }
    let ms = median(solver.clone());
    let mi = policy.as_ref().map(|_| median(infer));
    let report = BenchReport {
        samples: states.len(),
        intervals: scfg.intervals,
        solver_seconds: solver,
        median_solver_seconds: ms,
        median_inference_seconds: mi,
        speed_up: mi.map(|t| ms / t),
    };
    println!("median solve {ms:.3e} s over {} states at N = {}", report.samples, scfg.intervals);
    if let (Some(t), Some(s)) = (mi, report.speed_up) {
        println!("median inference {t:.3e} s, speed-up {s:.0}x");
    }
    if let Some(path) = &a.out {
        ensure_parent(path)?;
        m.output(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
        m.write(&manifest_path(path, false))?;
    }
    Ok(())
}
