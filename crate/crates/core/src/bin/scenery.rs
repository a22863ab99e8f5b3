use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use scenery::acceptance::{run_all, Options, DEFAULT_SEED};
use scenery::config::{
    CorrelateConfig, CorrelationMethod, EvaluateConfig, FourierConfig, InvertConfig, InvertOracle,
    Meta, SimulateConfig,
};
use scenery::correlations::{
    correlation_csv, estimate_temporal, exact_temporal_fourier, exact_temporal_quadrature,
    simulate_trace, CorrelationRow,
};
use scenery::inversion::{
    moment_grid, recover_spatial_fourier_separable, ExactTemporal, MonteCarloTemporal,
    SpatialFourierTable, TemporalOracle, TraceTemporal,
};
use scenery::reconstruct::{read_trace, reconstruct_pipeline, PipelineConfig};
use scenery::torus::{aligned_distance, SceneryJson};
use scenery::{Error, Scenery, StepLaw};

const EXIT_CONFIG: u8 = 2;
const EXIT_UPSTREAM: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "scenery",
    version,
    about = "Reconstruct a scenery on the torus from its observed correlations"
)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write an observation trace `time,value` to trace.csv.
    Simulate(Common),
    /// Write the exact spatial Fourier table to fourier.json.
    Fourier(Common),
    /// Write temporal correlations to correlations.csv.
    Correlate(Common),
    /// Recover a spatial Fourier table from temporal correlations.
    Invert(Common),
    /// Run the reconstruction chain and write reconstruction.json.
    Reconstruct(Common),
    /// Compare an estimate with the truth up to shift and write evaluation.json.
    Evaluate(Common),
    /// Run the acceptance criteria and print one line per criterion.
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
        /// Negative control: corrupt the Brownian coefficient.
        #[arg(long, hide = true)]
        corrupt_gamma_hat: bool,
    },
}

enum Failure {
    Config(String),
    Upstream(String),
    Acceptance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Upstream(_) => EXIT_UPSTREAM,
            Failure::Acceptance(_) => EXIT_ACCEPTANCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Upstream(m) | Failure::Acceptance(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::MissingLowerOrder(_) => Failure::Upstream(e.to_string()),
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
                Failure::Upstream(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Fourier(c) => fourier(c),
        Command::Correlate(c) => correlate(c),
        Command::Invert(c) => invert(c),
        Command::Reconstruct(c) => reconstruct(c),
        Command::Evaluate(c) => evaluate(c),
        Command::Selftest {
            seed,
            corrupt_gamma_hat,
        } => selftest(*seed, *corrupt_gamma_hat),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Parsed configuration with its raw JSON, used for the hash.
fn load<T: DeserializeOwned>(path: &Path) -> std::result::Result<(T, Value), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("config {} is not JSON: {e}", path.display())))?;
    let parsed = serde_json::from_value(raw.clone())
        .map_err(|e| Failure::Config(format!("config {}: {e}", path.display())))?;
    Ok((parsed, raw))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

fn require(path: &Path, what: &str) -> Outcome {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Upstream(format!(
            "missing {what}: {}",
            path.display()
        )))
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Outcome {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_json(dir: &Path, name: &str, mut body: Value, meta: &Meta) -> Outcome {
    if let Value::Object(map) = &mut body {
        map.insert(
            "meta".into(),
            serde_json::to_value(meta).expect("meta json"),
        );
    }
    let text = serde_json::to_string_pretty(&body).expect("output json") + "\n";
    write_out(dir, name, &text)
}

fn seed_of(cli: Option<u64>, cfg: Option<u64>) -> u64 {
    cli.or(cfg).unwrap_or(0)
}

fn simulate(c: &Common) -> Outcome {
    let (cfg, raw): (SimulateConfig, _) = load(&c.config)?;
    let seed = seed_of(c.seed, cfg.seed);
    let law = StepLaw::from_json(&cfg.law)?;
    let s = Scenery::from_json(&cfg.scenery)?;
    let trace = simulate_trace(&law, &s, cfg.dt, cfg.horizon, seed)?;
    let mut meta = Meta::new("simulate", &raw, seed);
    meta.tolerances.push("exact sampling, no truncation".into());
    let mut out = String::new();
    for line in meta.header_lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("time,value\n");
    for (t, v) in trace {
        out.push_str(&format!("{t},{v}\n"));
    }
    write_out(&c.out, "trace.csv", &out)
}

fn fourier(c: &Common) -> Outcome {
    let (cfg, raw): (FourierConfig, _) = load(&c.config)?;
    let s = Scenery::from_json(&cfg.scenery)?;
    if cfg.n == 0 {
        return Err(Failure::Config("order n must be at least 1".into()));
    }
    let table = SpatialFourierTable::exact(&s, cfg.n, cfg.cutoff);
    let mut meta = Meta::new("fourier", &raw, seed_of(c.seed, None));
    meta.tolerances
        .push("closed form, exact to rounding".into());
    write_json(&c.out, "fourier.json", table.to_json_value(), &meta)
}

fn correlate(c: &Common) -> Outcome {
    let (cfg, raw): (CorrelateConfig, _) = load(&c.config)?;
    let seed = seed_of(c.seed, cfg.seed);
    let law = StepLaw::from_json(&cfg.law)?;
    let s = Scenery::from_json(&cfg.scenery)?;
    let mut rows = Vec::with_capacity(cfg.times.len());
    for (i, t) in cfg.times.iter().enumerate() {
        let row = match cfg.method {
            CorrelationMethod::Mc => {
                // distinct rows get independent streams
                let row_seed = seed.wrapping_add((i as u64).wrapping_mul(1 << 20));
                let e = estimate_temporal(&law, &s, t, cfg.samples, cfg.gap, row_seed)?;
                CorrelationRow {
                    times: t.clone(),
                    value: e.value,
                    stderr: e.stderr,
                    samples: e.samples,
                    method: "mc".into(),
                }
            }
            CorrelationMethod::Exact => {
                let e = exact_temporal_fourier(&law, &s, t, cfg.cutoff)?;
                CorrelationRow {
                    times: t.clone(),
                    value: e.value,
                    stderr: e.truncation,
                    samples: 0,
                    method: "exact".into(),
                }
            }
            CorrelationMethod::Quadrature => {
                let v = exact_temporal_quadrature(&law, &s, t)?;
                CorrelationRow {
                    times: t.clone(),
                    value: v,
                    stderr: 0.0,
                    samples: 0,
                    method: "quadrature".into(),
                }
            }
        };
        rows.push(row);
    }
    let mut meta = Meta::new("correlate", &raw, seed);
    meta.tolerances.push(match cfg.method {
        CorrelationMethod::Mc => "stderr column is the Monte Carlo standard error".into(),
        CorrelationMethod::Exact => format!(
            "stderr column is the series truncation estimate at K = {}",
            cfg.cutoff
        ),
        CorrelationMethod::Quadrature => "adaptive quadrature, relative tolerance 1e-10".into(),
    });
    write_out(
        &c.out,
        "correlations.csv",
        &correlation_csv(&rows, &meta.header_lines()),
    )
}

fn invert(c: &Common) -> Outcome {
    let (cfg, raw): (InvertConfig, _) = load(&c.config)?;
    let seed = seed_of(c.seed, cfg.seed);
    let base = config_dir(&c.config);
    let law = StepLaw::from_json(&cfg.law)?;
    if cfg.n == 0 {
        return Err(Failure::Config("order n must be at least 1".into()));
    }
    let mut lower = Vec::with_capacity(cfg.lower_tables.len());
    for p in &cfg.lower_tables {
        let full = resolve(&base, p);
        require(&full, "lower-order table")?;
        let text = fs::read_to_string(&full).map_err(Error::from)?;
        lower.push(SpatialFourierTable::from_json_str(&text)?);
    }
    lower.sort_by_key(|t| t.n);
    let truth = cfg.scenery.as_ref().map(Scenery::from_json).transpose()?;
    let run = |oracle: &dyn TemporalOracle| -> std::result::Result<Value, Failure> {
        let alphas = cfg.alphas.clone().unwrap_or_else(|| vec![1.0; cfg.n]);
        if alphas.len() != cfg.n {
            return Err(Failure::Config(format!(
                "need {} multipliers, got {}",
                cfg.n,
                alphas.len()
            )));
        }
        let solve = cfg.cutoff + cfg.guard;
        let band = 2 * solve + 1;
        let moments = cfg.moments.unwrap_or(2 * band.pow(law.dim() as u32));
        let grid = moment_grid(oracle, &law, cfg.t0, &alphas, moments, &lower)?;
        let rec =
            recover_spatial_fourier_separable(&grid, &law, cfg.t0, &alphas, cfg.cutoff, solve)?;
        let mut body = rec.table.to_json_value();
        if let Value::Object(map) = &mut body {
            map.insert(
                "recovery".into(),
                json!({
                    "condition": rec.condition,
                    "residual_norm": rec.residual_norm,
                    "trusted": rec.trusted,
                    "queries": grid.queries,
                    "max_stderr": grid.stderr.iter().fold(0.0f64, |a, &b| a.max(b)),
                }),
            );
        }
        Ok(body)
    };
    let body = match (cfg.oracle, &truth) {
        (InvertOracle::Trace, _) => {
            let path = cfg
                .trace_file
                .as_ref()
                .ok_or_else(|| Failure::Config("oracle \"trace\" needs trace_file".into()))?;
            let full = resolve(&base, path);
            require(&full, "trace file")?;
            let (values, dt) = read_trace(&full)?;
            run(&TraceTemporal::new(values, dt)?)?
        }
        (_, None) => {
            return Err(Failure::Config(
                "oracles exact and mc need a scenery".into(),
            ))
        }
        (InvertOracle::Exact, Some(s)) => run(&ExactTemporal {
            law: &law,
            scenery: s,
            cutoff: cfg.fourier_cutoff,
        })?,
        (InvertOracle::Mc, Some(s)) => run(&MonteCarloTemporal {
            law: &law,
            scenery: s,
            samples: cfg.samples,
            gap: None,
            seed,
        })?,
    };
    let mut meta = Meta::new("invert", &raw, seed);
    meta.tolerances
        .push("recovered entries trusted only when the condition estimate is at most 1e12".into());
    if let Some(r) = body.get("recovery") {
        meta.tolerances
            .push(format!("condition {}", r["condition"]));
    }
    write_json(
        &c.out,
        &format!("spatial_fourier_n{}.json", cfg.n),
        body,
        &meta,
    )
}

fn reconstruct(c: &Common) -> Outcome {
    let (mut cfg, raw): (PipelineConfig, _) = load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let base = config_dir(&c.config);
    if let Some(p) = &cfg.trace_file {
        require(&resolve(&base, p), "trace file")?;
    }
    let out = reconstruct_pipeline(&cfg, Some(&base))?;
    let mut meta = Meta::new("reconstruct", &raw, cfg.seed);
    for (k, v) in &out.diagnostics.tolerances {
        meta.tolerances.push(format!("{k} {v:e}"));
    }
    let body = serde_json::to_value(&out).expect("pipeline output json");
    write_json(&c.out, "reconstruction.json", body, &meta)
}

/// A scenery from a file holding a scenery, or an object with an
/// `estimate` or `scenery` field.
fn read_scenery(path: &Path, what: &str) -> std::result::Result<Scenery, Failure> {
    require(path, what)?;
    let text = fs::read_to_string(path).map_err(Error::from)?;
    let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
    let inner = ["estimate", "scenery"]
        .iter()
        .find_map(|k| v.get(*k).cloned())
        .unwrap_or(v);
    let json: SceneryJson = serde_json::from_value(inner).map_err(Error::from)?;
    Ok(Scenery::from_json(&json)?)
}

fn evaluate(c: &Common) -> Outcome {
    let (cfg, raw): (EvaluateConfig, _) = load(&c.config)?;
    let base = config_dir(&c.config);
    let estimate = read_scenery(&resolve(&base, &cfg.estimate), "estimate")?;
    let truth = read_scenery(&resolve(&base, &cfg.truth), "truth")?;
    let a = aligned_distance(&estimate, &truth, cfg.resolution, cfg.allow_reflection)?;
    let mut meta = Meta::new("evaluate", &raw, seed_of(c.seed, None));
    meta.tolerances
        .push(format!("shift grid step 2pi/{}", cfg.resolution));
    println!("aligned distance {:.6e}", a.distance);
    let body = json!({
        "distance": a.distance,
        "shift": a.shift,
        "reflected": a.reflected,
        "measure_estimate": estimate.measure(),
        "measure_truth": truth.measure(),
    });
    write_json(&c.out, "evaluation.json", body, &meta)
}

fn selftest(seed: Option<u64>, corrupt: bool) -> Outcome {
    let opts = Options {
        seed: seed.unwrap_or(DEFAULT_SEED),
        corrupt_gamma_hat: corrupt,
    };
    let results = run_all(&opts);
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "failed criteria: {}",
            failed.join(", ")
        )))
    }
}
