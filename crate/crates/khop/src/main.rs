//! Command-line front end for the `khop` library.
//!
//! Every subcommand is a pure function of its flags, the optional config
//! file, and the seed: re-running with the same inputs reproduces the output
//! files byte for byte. Values may come from three places, in order of
//! precedence: an explicit flag, a `key=value` line in `--config`, then the
//! preset (or built-in default).

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use khop::analysis::{
    basins, energy_landscape, metastable_distribution, BasinConfig, GridSpec, MetaConfig,
    SupportHistogram,
};
use khop::capacity::{capacity_bound, optimal_code_size, separation_sandwich};
use khop::io;
use khop::patterns::{generate_synthetic, idx_like_fixture_bytes, load_idx, parse_idx};
use khop::presets::{
    basins_five_point, contours_four_point, contours_two_point, mnist_meta, synthetic_meta,
    QUERY_SEED_OFFSET, W0_SEED_OFFSET,
};
use khop::spherical::{brute_force_optimal_code, cross_polytope_code, simplex_code, SphericalCode};
use khop::uhop::{train, TrainConfig};
use khop::{Error, FeatureMap, NormKind, PatternSet, Result, RetrievalConfig};

#[derive(Parser)]
#[command(
    name = "khop",
    version,
    about = "Kernelized Hopfield memories: retrieval, separation training, capacity tools"
)]
struct Cli {
    /// Cap the worker-thread count (default: one per logical CPU).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// key=value file supplying defaults for any long flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a feature map on a pattern set and save it with its loss log.
    Train(TrainArgs),
    /// Run retrieval dynamics on seeded queries and save the traces.
    Retrieve(RetrieveArgs),
    /// Histogram metastable-state sizes before and after training.
    Meta(MetaArgs),
    /// Sample the energy surface over a planar grid.
    Landscape(LandscapeArgs),
    /// Label the basin of attraction of every planar grid cell.
    Basins(BasinsArgs),
    /// Evaluate the storage-capacity bound and related separation bounds.
    Capacity(CapacityArgs),
    /// Construct spherical codes (brute-force search or analytic).
    Codes(CodesArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Preset supplying defaults: synthetic-meta, mnist-meta, contours-2pt,
    /// contours-4pt, or basins-5pt.
    #[arg(long)]
    preset: Option<String>,
    /// Number of stored patterns (synthetic data).
    #[arg(long)]
    m: Option<usize>,
    /// Pattern dimension (synthetic data).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_phi: Option<usize>,
    /// Training iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// IDX image file to use instead of synthetic patterns.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Keep only the first N images of the IDX file.
    #[arg(long)]
    limit: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// softmax, sparsemax, or entmax15.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Fixed-point tolerance on successive iterates.
    #[arg(long)]
    tol: Option<f64>,
    /// Number of seeded queries.
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Feature map saved by `train` (.json or .bin); omitted = plain model.
    #[arg(long)]
    phi: Option<PathBuf>,
    /// IDX image file to use instead of synthetic patterns.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct MetaArgs {
    /// synthetic-meta (default) or mnist-meta.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_phi: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    update_iters: Option<usize>,
    /// Support threshold for dense weight vectors.
    #[arg(long)]
    threshold: Option<f64>,
    /// Queries per seed (synthetic preset; the image preset queries the
    /// stored patterns themselves).
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Aggregate over this many consecutive seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// before, after, or both.
    #[arg(long, default_value = "both")]
    phase: String,
    /// Also histogram the no-feature-map baseline.
    #[arg(long)]
    nomap: bool,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct LandscapeArgs {
    /// contours-2pt (default) or contours-4pt.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// before, after, or both.
    #[arg(long, default_value = "both")]
    phase: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BasinsArgs {
    /// basins-5pt is the only stock preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    update_iters: Option<usize>,
    /// Capture radius around each memory.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// before, after, or both.
    #[arg(long, default_value = "both")]
    phase: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    d_phi: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Failure-probability knob of the bound (p > 0, p != 1; p < 1 flags the result).
    #[arg(long)]
    p: Option<f64>,
    /// Separation radius of the stored code.
    #[arg(long)]
    r_phi: Option<f64>,
    /// Also report the separation sandwich for an M-point optimal code.
    #[arg(long)]
    m: Option<usize>,
    /// Also report code-size bounds at this angular distance (radians).
    #[arg(long)]
    theta: Option<f64>,
    /// Write the JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CodesArgs {
    /// search (default), simplex, or cross-polytope.
    #[arg(long)]
    construction: Option<String>,
    /// Ambient dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of points (search construction only).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Values from `--config`, consulted when a flag was not given.
struct Ctx {
    file: HashMap<String, String>,
}

impl Ctx {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => io::parse_config_file(p)?,
            None => HashMap::new(),
        };
        Ok(Self { file })
    }

    /// Flag value if present, else the config-file value, else `default`.
    fn get<T: FromStr + Copy>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad value for `{key}`: `{raw}`"))),
            None => Ok(default),
        }
    }

    fn get_string(&self, key: &str, flag: Option<&str>, default: &str) -> String {
        if let Some(v) = flag {
            return v.to_string();
        }
        self.file
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }
}

fn parse_norm(s: &str) -> Result<NormKind> {
    match s {
        "softmax" => Ok(NormKind::Softmax),
        "sparsemax" => Ok(NormKind::Sparsemax),
        "entmax15" => Ok(NormKind::Entmax15),
        other => Err(Error::Config(format!(
            "unknown normalization `{other}` (expected softmax, sparsemax, or entmax15)"
        ))),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Before,
    After,
    Both,
}

impl Phase {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "before" => Ok(Phase::Before),
            "after" => Ok(Phase::After),
            "both" => Ok(Phase::Both),
            other => Err(Error::Config(format!(
                "unknown phase `{other}` (expected before, after, or both)"
            ))),
        }
    }

    fn runs_before(self) -> bool {
        matches!(self, Phase::Before | Phase::Both)
    }

    fn runs_after(self) -> bool {
        matches!(self, Phase::After | Phase::Both)
    }
}

/// Where a pattern set came from, echoed into metadata sidecars.
enum DataSource {
    Synthetic { m: usize, d: usize, seed: u64 },
    File(PathBuf),
    Fixture { count: usize, seed: u64 },
}

impl DataSource {
    fn describe(&self) -> serde_json::Value {
        match self {
            DataSource::Synthetic { m, d, seed } => json!({
                "data_source": "synthetic",
                "m": m, "d": d, "pattern_seed": seed,
            }),
            DataSource::File(p) => json!({
                "data_source": "file",
                "path": p.display().to_string(),
            }),
            DataSource::Fixture { count, seed } => json!({
                "data_source": "fixture",
                "count": count, "pattern_seed": seed,
            }),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Load image patterns from `--data`, then `$UHOP_DATA_DIR`, then the
/// built-in generated stand-in.
fn image_patterns(
    data: Option<&Path>,
    limit: usize,
    seed: u64,
) -> Result<(PatternSet, DataSource)> {
    if let Some(path) = data {
        let set = load_idx(path, Some(limit))?;
        return Ok((set, DataSource::File(path.to_path_buf())));
    }
    if let Ok(root) = std::env::var("UHOP_DATA_DIR") {
        let path = Path::new(&root).join("train-images-idx3-ubyte");
        if path.is_file() {
            let set = load_idx(&path, Some(limit))?;
            return Ok((set, DataSource::File(path)));
        }
    }
    let bytes = idx_like_fixture_bytes(limit, seed);
    let set = parse_idx(&bytes, None)?;
    Ok((set, DataSource::Fixture { count: limit, seed }))
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let preset = ctx.get_string("preset", a.preset.as_deref(), "synthetic-meta");
    // Defaults per preset; every field can still be overridden.
    let (dm, dd, dphi, base) = match preset.as_str() {
        "synthetic-meta" => {
            let p = synthetic_meta();
            (p.m, p.d, p.d_phi, p.train_config(0))
        }
        "mnist-meta" => {
            let p = mnist_meta();
            (p.subsample, p.d, p.d_phi, p.train_config(0))
        }
        "contours-2pt" => {
            let p = contours_two_point();
            (p.m, 2, 2, p.train_config(0))
        }
        "contours-4pt" => {
            let p = contours_four_point();
            (p.m, 2, 2, p.train_config(0))
        }
        "basins-5pt" => {
            let p = basins_five_point();
            (p.m, 2, 2, p.train_config(0))
        }
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    let m = ctx.get("m", a.m, dm)?;
    let d = ctx.get("d", a.d, dd)?;
    let d_phi = ctx.get("d-phi", a.d_phi, dphi)?;
    let seed = ctx.get("seed", a.seed, 0u64)?;
    let cfg = TrainConfig {
        iters: ctx.get("iters", a.iters, base.iters)?,
        lr: ctx.get("lr", a.lr, base.lr)?,
        tau: ctx.get("tau", a.tau, base.tau)?,
        lipschitz: base.lipschitz,
        seed: seed.wrapping_add(W0_SEED_OFFSET),
    };

    let (set, source) = if preset == "mnist-meta" || a.data.is_some() {
        let limit = ctx.get("limit", a.limit, m)?;
        image_patterns(a.data.as_deref(), limit, seed)?
    } else {
        (
            generate_synthetic(m, d, seed)?,
            DataSource::Synthetic { m, d, seed },
        )
    };

    let out = train(&set, d_phi, &cfg)?;
    io::save_feature_map_json(&a.out.join("featuremap.json"), &out.phi)?;
    io::save_feature_map_binary(&a.out.join("featuremap.bin"), &out.phi)?;
    io::write_all(&a.out.join("trainlog.csv"), &io::train_log_csv(&out.log))?;

    let stats = out.phi.separation_stats(&set)?;
    let last = out.log.last();
    let meta = json!({
        "command": "train",
        "preset": preset,
        "patterns": source.describe(),
        "d_phi": d_phi,
        "train": {
            "iters": cfg.iters, "lr": cfg.lr, "tau": cfg.tau,
            "seed": seed, "w0_seed": cfg.seed,
        },
        "initial_loss": out.initial_loss,
        "final_loss": last.map(|r| r.loss),
        "final_hardmax": last.map(|r| r.hardmax),
        "delta_min": stats.delta_min,
        "r_phi": stats.r_phi,
        "outputs": ["featuremap.json", "featuremap.bin", "trainlog.csv"],
    });
    io::write_json(&a.out.join("train.meta.json"), &meta)?;
    println!(
        "trained {} iters: loss {} -> {}, delta_min {}",
        cfg.iters,
        io::fmt_sig(out.initial_loss),
        io::fmt_sig(last.map(|r| r.loss).unwrap_or(out.initial_loss)),
        io::fmt_sig(stats.delta_min)
    );
    Ok(())
}

fn load_feature_map(path: &Path) -> Result<FeatureMap> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => io::load_feature_map_binary(path, true),
        _ => io::load_feature_map_json(path),
    }
}

fn cmd_retrieve(ctx: &Ctx, a: &RetrieveArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let m = ctx.get("m", a.m, 10usize)?;
    let d = ctx.get("d", a.d, 5usize)?;
    let beta = ctx.get("beta", a.beta, 4.0f64)?;
    let norm = parse_norm(&ctx.get_string("norm", a.norm.as_deref(), "softmax"))?;
    let max_iters = ctx.get("max-iters", a.max_iters, 20usize)?;
    let tol = ctx.get("tol", a.tol, 1e-6f64)?;
    let n_queries = ctx.get("queries", a.queries, 1usize)?;
    let seed = ctx.get("seed", a.seed, 0u64)?;

    let (set, source) = if a.data.is_some() {
        let limit = ctx.get("limit", a.limit, m)?;
        image_patterns(a.data.as_deref(), limit, seed)?
    } else {
        (
            generate_synthetic(m, d, seed)?,
            DataSource::Synthetic { m, d, seed },
        )
    };
    let phi = match &a.phi {
        Some(p) => Some(load_feature_map(p)?),
        None => None,
    };
    let cfg = RetrievalConfig::new(beta)
        .norm(norm)
        .max_iters(max_iters)
        .tol(tol);

    let query_seed = seed.wrapping_add(QUERY_SEED_OFFSET);
    let queries = generate_synthetic(n_queries, set.dim(), query_seed)?;
    let mut traces = Vec::with_capacity(n_queries);
    let mut converged = 0usize;
    for q in 0..n_queries {
        let x0 = queries.column(q)?;
        let r = khop::retrieve(&set, phi.as_ref(), &cfg, &x0)?;
        converged += usize::from(r.converged);
        traces.push(io::TraceJson::from_result(&r));
    }
    io::write_json(&a.out.join("traces.json"), &traces)?;

    let meta = json!({
        "command": "retrieve",
        "patterns": source.describe(),
        "beta": beta,
        "norm": norm.to_string(),
        "max_iters": max_iters,
        "tol": tol,
        "queries": n_queries,
        "query_seed": query_seed,
        "feature_map": a.phi.as_ref().map(|p| p.display().to_string()),
        "converged": converged,
        "outputs": ["traces.json"],
    });
    io::write_json(&a.out.join("retrieve.meta.json"), &meta)?;
    println!("{converged}/{n_queries} queries converged");
    Ok(())
}

/// Pool per-seed histograms into one (equal query counts per seed).
fn pool(hists: &[SupportHistogram]) -> SupportHistogram {
    let mut counts = [0usize; 10];
    let mut total = 0usize;
    for h in hists {
        for (acc, c) in counts.iter_mut().zip(h.counts.iter()) {
            *acc += c;
        }
        total += h.total;
    }
    SupportHistogram { counts, total }
}

fn cmd_meta(ctx: &Ctx, a: &MetaArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let preset = ctx.get_string("preset", a.preset.as_deref(), "synthetic-meta");
    struct MetaDefaults {
        m: usize,
        d: usize,
        d_phi: usize,
        beta: f64,
        norm: NormKind,
        update_iters: usize,
        threshold: f64,
        queries: usize,
        train: TrainConfig,
        image_data: bool,
    }
    let defs = match preset.as_str() {
        "synthetic-meta" => {
            let p = synthetic_meta();
            MetaDefaults {
                m: p.m,
                d: p.d,
                d_phi: p.d_phi,
                beta: p.beta,
                norm: p.norm,
                update_iters: p.update_iters,
                threshold: p.threshold,
                queries: p.queries,
                train: p.train_config(0),
                image_data: false,
            }
        }
        "mnist-meta" => {
            let p = mnist_meta();
            MetaDefaults {
                m: p.subsample,
                d: p.d,
                d_phi: p.d_phi,
                beta: p.beta,
                norm: p.norm,
                update_iters: p.update_iters,
                threshold: p.threshold,
                queries: 0,
                train: p.train_config(0),
                image_data: true,
            }
        }
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };

    let m = ctx.get("m", a.m, defs.m)?;
    let d = ctx.get("d", a.d, defs.d)?;
    let d_phi = ctx.get("d-phi", a.d_phi, defs.d_phi)?;
    let beta = ctx.get("beta", a.beta, defs.beta)?;
    let norm = match &a.norm {
        Some(s) => parse_norm(s)?,
        None => match ctx.file.get("norm") {
            Some(s) => parse_norm(s)?,
            None => defs.norm,
        },
    };
    let update_iters = ctx.get("update-iters", a.update_iters, defs.update_iters)?;
    let threshold = ctx.get("threshold", a.threshold, defs.threshold)?;
    let n_queries = ctx.get("queries", a.queries, defs.queries)?;
    let base_seed = ctx.get("seed", a.seed, 0u64)?;
    let n_seeds = ctx.get("seeds", a.seeds, 1usize)?;
    if n_seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let phase = Phase::parse(&ctx.get_string("phase", Some(a.phase.as_str()), "both"))?;
    let image_data = defs.image_data || a.data.is_some();

    let mcfg = MetaConfig {
        beta,
        norm,
        update_iters,
        threshold,
    };
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut nomap_hists = Vec::new();
    let mut sources = Vec::new();
    for k in 0..n_seeds {
        let seed = base_seed.wrapping_add(k as u64);
        let (set, source) = if image_data {
            let limit = ctx.get("limit", a.limit, m)?;
            image_patterns(a.data.as_deref(), limit, seed)?
        } else {
            (
                generate_synthetic(m, d, seed)?,
                DataSource::Synthetic { m, d, seed },
            )
        };
        // The image protocol queries the stored patterns themselves; the
        // synthetic protocol draws a fresh seeded query set.
        let queries = if image_data {
            None
        } else {
            Some(generate_synthetic(
                n_queries,
                d,
                seed.wrapping_add(QUERY_SEED_OFFSET),
            )?)
        };
        let queries = queries.as_ref().unwrap_or(&set);

        if a.nomap {
            nomap_hists.push(metastable_distribution(&set, None, &mcfg, queries)?);
        }
        if phase.runs_before() {
            let w0 = FeatureMap::random(set.dim(), d_phi, seed.wrapping_add(W0_SEED_OFFSET))?;
            before.push(metastable_distribution(&set, Some(&w0), &mcfg, queries)?);
        }
        if phase.runs_after() {
            let tcfg = TrainConfig {
                iters: ctx.get("iters", a.iters, defs.train.iters)?,
                lr: ctx.get("lr", a.lr, defs.train.lr)?,
                tau: ctx.get("tau", a.tau, defs.train.tau)?,
                lipschitz: defs.train.lipschitz,
                seed: seed.wrapping_add(W0_SEED_OFFSET),
            };
            let trained = train(&set, d_phi, &tcfg)?;
            after.push(metastable_distribution(
                &set,
                Some(&trained.phi),
                &mcfg,
                queries,
            )?);
        }
        sources.push(source);
    }

    let mut outputs = Vec::new();
    let mut summary = serde_json::Map::new();
    let mut emit = |name: &str, hists: &[SupportHistogram]| -> Result<()> {
        if hists.is_empty() {
            return Ok(());
        }
        let pooled = pool(hists);
        io::write_all(
            &a.out.join(format!("histogram_{name}.csv")),
            &io::histogram_csv(&pooled),
        )?;
        outputs.push(format!("histogram_{name}.csv"));
        summary.insert(format!("bucket1_{name}_percent"), json!(pooled.percent(1)));
        Ok(())
    };
    emit("before", &before)?;
    emit("after", &after)?;
    emit("nomap", &nomap_hists)?;

    let meta = json!({
        "command": "meta",
        "preset": preset,
        "patterns": sources[0].describe(),
        "d_phi": d_phi,
        "beta": beta,
        "norm": norm.to_string(),
        "update_iters": update_iters,
        "threshold": threshold,
        "queries_per_seed": if image_data { m } else { n_queries },
        "seed": base_seed,
        "seeds": n_seeds,
        "phase": a.phase,
        "summary": summary,
        "outputs": outputs,
    });
    io::write_json(&a.out.join("meta.meta.json"), &meta)?;
    for (name, hists) in [("before", &before), ("after", &after)] {
        if !hists.is_empty() {
            println!("bucket 1 {name}: {}%", io::fmt_sig(pool(hists).percent(1)));
        }
    }
    Ok(())
}

fn grid_from(
    ctx: &Ctx,
    n: Option<usize>,
    lo: Option<f64>,
    hi: Option<f64>,
    dn: usize,
    dlo: f64,
    dhi: f64,
) -> Result<GridSpec> {
    Ok(GridSpec::square(
        ctx.get("lo", lo, dlo)?,
        ctx.get("hi", hi, dhi)?,
        ctx.get("grid-n", n, dn)?,
    ))
}

fn cmd_landscape(ctx: &Ctx, a: &LandscapeArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let preset = ctx.get_string("preset", a.preset.as_deref(), "contours-2pt");
    let p = match preset.as_str() {
        "contours-2pt" => contours_two_point(),
        "contours-4pt" => contours_four_point(),
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    let m = ctx.get("m", a.m, p.m)?;
    let beta = ctx.get("beta", a.beta, p.beta)?;
    let seed = ctx.get("seed", a.seed, 0u64)?;
    let grid = grid_from(ctx, a.grid_n, a.lo, a.hi, p.grid_n, p.grid_lo, p.grid_hi)?;
    let phase = Phase::parse(&ctx.get_string("phase", Some(a.phase.as_str()), "both"))?;

    let set = generate_synthetic(m, 2, seed)?;
    let mut outputs = Vec::new();
    if phase.runs_before() {
        let g = energy_landscape(&set, None, beta, &grid)?;
        io::write_all(&a.out.join("landscape_before.csv"), &io::grid_csv(&g))?;
        outputs.push("landscape_before.csv");
    }
    if phase.runs_after() {
        let tcfg = TrainConfig {
            iters: ctx.get("iters", a.iters, p.train_iters)?,
            lr: ctx.get("lr", a.lr, p.lr)?,
            tau: ctx.get("tau", a.tau, p.tau)?,
            lipschitz: khop::uhop::LipschitzMode::Backtracking,
            seed: seed.wrapping_add(W0_SEED_OFFSET),
        };
        let trained = train(&set, 2, &tcfg)?;
        let g = energy_landscape(&set, Some(&trained.phi), beta, &grid)?;
        io::write_all(&a.out.join("landscape_after.csv"), &io::grid_csv(&g))?;
        outputs.push("landscape_after.csv");
    }

    let meta = json!({
        "command": "landscape",
        "preset": preset,
        "patterns": DataSource::Synthetic { m, d: 2, seed }.describe(),
        "beta": beta,
        "grid": { "n": grid.nx, "lo": grid.x_min, "hi": grid.x_max },
        "phase": a.phase,
        "outputs": outputs,
    });
    io::write_json(&a.out.join("landscape.meta.json"), &meta)?;
    Ok(())
}

fn cmd_basins(ctx: &Ctx, a: &BasinsArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let preset = ctx.get_string("preset", a.preset.as_deref(), "basins-5pt");
    let p = match preset.as_str() {
        "basins-5pt" => basins_five_point(),
        other => return Err(Error::Config(format!("unknown preset `{other}`"))),
    };
    let m = ctx.get("m", a.m, p.m)?;
    let beta = ctx.get("beta", a.beta, p.beta)?;
    let norm = match &a.norm {
        Some(s) => parse_norm(s)?,
        None => match ctx.file.get("norm") {
            Some(s) => parse_norm(s)?,
            None => p.norm,
        },
    };
    let seed = ctx.get("seed", a.seed, 0u64)?;
    let grid = grid_from(ctx, a.grid_n, a.lo, a.hi, p.grid_n, p.grid_lo, p.grid_hi)?;
    let phase = Phase::parse(&ctx.get_string("phase", Some(a.phase.as_str()), "both"))?;
    let bcfg = BasinConfig {
        beta,
        norm,
        update_iters: ctx.get("update-iters", a.update_iters, p.update_iters)?,
        eps: ctx.get("eps", a.eps, p.eps)?,
    };

    let set = generate_synthetic(m, 2, seed)?;
    let mut outputs = Vec::new();
    if phase.runs_before() {
        let g = basins(&set, None, &bcfg, &grid)?;
        io::write_all(&a.out.join("basins_before.csv"), &io::grid_csv(&g))?;
        outputs.push("basins_before.csv");
    }
    if phase.runs_after() {
        let tcfg = TrainConfig {
            iters: ctx.get("iters", a.iters, p.train_iters)?,
            lr: ctx.get("lr", a.lr, p.lr)?,
            tau: ctx.get("tau", a.tau, p.tau)?,
            lipschitz: khop::uhop::LipschitzMode::Backtracking,
            seed: seed.wrapping_add(W0_SEED_OFFSET),
        };
        let trained = train(&set, 2, &tcfg)?;
        let g = basins(&set, Some(&trained.phi), &bcfg, &grid)?;
        io::write_all(&a.out.join("basins_after.csv"), &io::grid_csv(&g))?;
        outputs.push("basins_after.csv");
    }

    let meta = json!({
        "command": "basins",
        "preset": preset,
        "patterns": DataSource::Synthetic { m, d: 2, seed }.describe(),
        "beta": beta,
        "norm": norm.to_string(),
        "update_iters": bcfg.update_iters,
        "eps": bcfg.eps,
        "grid": { "n": grid.nx, "lo": grid.x_min, "hi": grid.x_max },
        "phase": a.phase,
        "outputs": outputs,
    });
    io::write_json(&a.out.join("basins.meta.json"), &meta)?;
    Ok(())
}

fn cmd_capacity(ctx: &Ctx, a: &CapacityArgs) -> Result<()> {
    let d_phi = ctx.get("d-phi", a.d_phi, 64usize)?;
    let beta = ctx.get("beta", a.beta, 1.0f64)?;
    let p = ctx.get("p", a.p, 2.0f64)?;
    let r_phi = ctx.get("r-phi", a.r_phi, 0.5f64)?;

    let bound = capacity_bound(d_phi, beta, p, r_phi)?;
    let mut doc = json!({
        "command": "capacity",
        "d_phi": d_phi,
        "beta": beta,
        "p": p,
        "r_phi": r_phi,
        "capacity": bound,
    });
    if let Some(m) = a.m {
        let (lower, upper) = separation_sandwich(m, d_phi)?;
        doc["separation_sandwich"] = json!({ "m": m, "lower": lower, "upper": upper });
    }
    if let Some(theta) = a.theta {
        let sizes = optimal_code_size(theta, d_phi)?;
        doc["code_size"] =
            serde_json::to_value(&sizes).map_err(|e| Error::Config(e.to_string()))?;
    }
    let text = io::to_json_string(&doc)?;
    print!("{text}");
    if let Some(path) = &a.out {
        io::write_all(path, &text)?;
    }
    Ok(())
}

fn code_json(code: &SphericalCode, rho: f64) -> serde_json::Value {
    let pts: Vec<Vec<f64>> = (0..code.len())
        .map(|i| code.points().column(i).to_vec())
        .collect();
    json!({
        "dim": code.dim(),
        "n": code.len(),
        "max_correlation": rho,
        "points": pts,
    })
}

fn cmd_codes(ctx: &Ctx, a: &CodesArgs) -> Result<()> {
    let construction = ctx.get_string("construction", a.construction.as_deref(), "search");
    let dim = ctx.get("dim", a.dim, 3usize)?;
    let mut doc = match construction.as_str() {
        "search" => {
            let cfg = khop::spherical::CodeSearchConfig {
                restarts: ctx.get("restarts", a.restarts, 20usize)?,
                iters: ctx.get("iters", a.iters, 400usize)?,
                seed: ctx.get("seed", a.seed, 0u64)?,
            };
            let n = ctx.get("n", a.n, dim + 1)?;
            let (code, rho) = brute_force_optimal_code(dim, n, &cfg)?;
            let mut v = code_json(&code, rho);
            v["construction"] = json!("search");
            v["restarts"] = json!(cfg.restarts);
            v["iters"] = json!(cfg.iters);
            v["seed"] = json!(cfg.seed);
            v
        }
        "simplex" => {
            let code = simplex_code(dim)?;
            let rho = code.max_cross_correlation()?;
            let mut v = code_json(&code, rho);
            v["construction"] = json!("simplex");
            v
        }
        "cross-polytope" => {
            let code = cross_polytope_code(dim)?;
            let rho = code.max_cross_correlation()?;
            let mut v = code_json(&code, rho);
            v["construction"] = json!("cross-polytope");
            v
        }
        other => {
            return Err(Error::Config(format!(
                "unknown construction `{other}` (expected search, simplex, or cross-polytope)"
            )))
        }
    };
    doc["command"] = json!("codes");
    let text = io::to_json_string(&doc)?;
    print!("{text}");
    if let Some(path) = &a.out {
        io::write_all(path, &text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Ctx::load(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Train(a) => cmd_train(&ctx, a),
        Cmd::Retrieve(a) => cmd_retrieve(&ctx, a),
        Cmd::Meta(a) => cmd_meta(&ctx, a),
        Cmd::Landscape(a) => cmd_landscape(&ctx, a),
        Cmd::Basins(a) => cmd_basins(&ctx, a),
        Cmd::Capacity(a) => cmd_capacity(&ctx, a),
        Cmd::Codes(a) => cmd_codes(&ctx, a),
    }
}

fn main() -> ExitCode {
    // Usage errors exit 2 via clap; runtime failures exit 1 with a JSON
    // line on stderr.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
