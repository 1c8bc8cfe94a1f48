//! The `gmmv` command line: simulate, invert, validate, presets.
//!
//! Every file a command produces goes under its `--out` directory, and
//! `manifest.json` is written last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dataio::{add_noise, read_dataset, write_dataset};
use crate::error::Error;
use crate::imaging::{export_field, to_db, ExportFormat, ImageField};
use crate::model::config::ConfigFile;
use crate::model::presets::{preset, PRESET_NAMES};
use crate::model::{load_config, ExperimentConfig};
use crate::pipeline::{
    cached_operator, build_operator, image_metrics, invert_gmmv, invert_lsm, save_operator, simulate, truth_map,
    validate_config, OperatorRoute,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gmmv", version, about = "Joint-sparse shape reconstruction from multi-frequency scattered fields")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "GMMV_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset from a configured scene.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Signal-to-noise ratio in dB, or `inf`.
        #[arg(long, default_value = "inf")]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reconstruct images from a dataset.
    Invert {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        /// Comma-separated subset of the dataset frequencies, in Hz.
        #[arg(long, value_delimiter = ',')]
        freqs: Option<Vec<f64>>,
        #[arg(long)]
        delta_n: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Residual target for data without a CV split.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum, default_value_t = Route::Greens)]
        operator: Route,
        /// Kernel cache to read; ignored when built for other inputs.
        #[arg(long)]
        operator_cache: Option<PathBuf>,
        /// Also write the kernels to `<out>/operator.gmmvop`.
        #[arg(long)]
        save_operator: bool,
    },
    /// Run the numerical self-checks for a configuration.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        operator_cache: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the named scenarios, or write their configurations.
    Presets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ConfigArg {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named scenario instead of a file.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gmmv,
    Lsm,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Greens,
    Fdfd,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.code() {
            "LINESEARCH_FAILED" | "MAX_ITERATIONS" | "NO_CONVERGENCE" | "SINGULAR_MATRIX" | "ZERO_RESIDUAL"
            | "NONNEGATIVE_DERIVATIVE" => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: format!("{}: {e}", e.code()),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return EXIT_USAGE;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load(arg: &ConfigArg) -> CliResult<(ExperimentConfig, Option<PathBuf>)> {
    match (&arg.config, &arg.preset) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(usage(format!("configuration file {} not found", path.display())));
            }
            Ok((load_config(path)?, Some(path.clone())))
        }
        (None, Some(name)) => Ok((preset(name)?.validate()?, None)),
        (None, None) => Err(usage("give --config or --preset")),
    }
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Output directory bookkeeping for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| CliError::from(Error::Io(e)))
    }

    fn image(&mut self, stem: &str, img: &ImageField) -> CliResult<()> {
        export_field(img, self.path(&format!("{stem}.csv")), ExportFormat::CsvGrid)?;
        let db = to_db(img)?;
        export_field(&db, self.path(&format!("{stem}_db.csv")), ExportFormat::CsvGrid)?;
        export_field(&db, self.path(&format!("{stem}.pgm")), ExportFormat::Pgm8)?;
        Ok(())
    }

    fn manifest(self, mut body: BTreeMap<&'static str, Value>) -> CliResult<()> {
        let mut listed = Vec::new();
        for f in &self.files {
            listed.push(json!({"path": f, "sha256": sha256_file(&self.dir.join(f))?}));
        }
        body.insert("outputs", Value::Array(listed));
        body.insert("version", json!(env!("CARGO_PKG_VERSION")));
        let text = serde_json::to_string_pretty(&body).expect("manifest serializes");
        std::fs::write(self.dir.join("manifest.json"), text + "\n").map_err(|e| CliError::from(Error::Io(e)))
    }
}

fn inputs(paths: &[&Path]) -> CliResult<Value> {
    let mut m = serde_json::Map::new();
    for p in paths {
        m.insert(p.display().to_string(), json!(sha256_file(p)?));
    }
    Ok(Value::Object(m))
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    serde_json::from_str(&cfg.to_json()).expect("configuration is valid JSON")
}

fn execute(command: Command) -> CliResult<i32> {
    match command {
        Command::Simulate { config, out, snr, seed } => cmd_simulate(&config, &out, snr, seed),
        Command::Invert {
            dataset,
            config,
            out,
            method,
            freqs,
            delta_n,
            max_iter,
            sigma,
            operator,
            operator_cache,
            save_operator,
        } => cmd_invert(InvertArgs {
            dataset,
            config,
            out,
            method,
            freqs,
            delta_n,
            max_iter,
            sigma,
            operator,
            operator_cache,
            save_operator,
        }),
        Command::Validate {
            config,
            operator_cache,
            out,
        } => cmd_validate(&config, operator_cache.as_deref(), out.as_deref()),
        Command::Presets { out } => cmd_presets(out.as_deref()),
    }
}

fn cmd_simulate(arg: &ConfigArg, out: &Path, snr: f64, seed: u64) -> CliResult<i32> {
    let (cfg, path) = load(arg)?;
    if snr.is_nan() {
        return Err(usage("--snr must be a number or inf"));
    }
    let mut outputs = Outputs::new(out)?;
    let t = Instant::now();
    let clean = simulate(&cfg)?;
    let t_sim = t.elapsed().as_secs_f64();
    let ds = add_noise(&clean, snr, seed)?;
    write_dataset(&ds, outputs.path("dataset.gmmvds"))?;
    outputs.write("config.json", cfg.to_json() + "\n")?;
    let mut body = BTreeMap::new();
    body.insert("command", json!("simulate"));
    body.insert("config", config_value(&cfg));
    body.insert("inputs", inputs(&path.iter().map(PathBuf::as_path).collect::<Vec<_>>())?);
    body.insert("noise", serde_json::to_value(ds.noise).expect("serializable"));
    body.insert("timings_s", json!({"simulate": t_sim}));
    outputs.manifest(body)?;
    Ok(EXIT_OK)
}

struct InvertArgs {
    dataset: PathBuf,
    config: ConfigArg,
    out: PathBuf,
    method: Method,
    freqs: Option<Vec<f64>>,
    delta_n: Option<usize>,
    max_iter: Option<usize>,
    sigma: Option<f64>,
    operator: Route,
    operator_cache: Option<PathBuf>,
    save_operator: bool,
}

fn residual_csv(r_rec: &[f64], r_cv: &[f64]) -> String {
    let mut s = String::from("iteration,r_rec,r_cv\n");
    for (k, (a, b)) in r_rec.iter().zip(r_cv).enumerate() {
        s.push_str(&format!("{k},{a:e},{b:e}\n"));
    }
    s
}

fn cmd_invert(a: InvertArgs) -> CliResult<i32> {
    let (mut cfg, path) = load(&a.config)?;
    if !a.dataset.is_file() {
        return Err(usage(format!("dataset {} not found", a.dataset.display())));
    }
    let mut ds = read_dataset(&a.dataset)?;
    if let Some(list) = &a.freqs {
        let mut idx = Vec::new();
        for f in list {
            match ds.freqs().hz().iter().position(|h| (h - f).abs() <= 1e-9 * h) {
                Some(i) => idx.push(i),
                None => return Err(usage(format!("frequency {f} Hz is not in the dataset"))),
            }
        }
        ds = ds.subset_frequencies(&idx)?;
    }
    if let Some(d) = a.delta_n {
        cfg.solver.delta_n = d;
    }
    if let Some(m) = a.max_iter {
        cfg.solver.max_iterations = m;
    }
    let issues = cfg.solver.issues("solver");
    if !issues.is_empty() {
        return Err(Error::Config(issues).into());
    }
    let sigma = if ds.measurement().has_cv() {
        None
    } else {
        match a.sigma {
            Some(s) => Some(s),
            None if a.method != Method::Lsm => {
                return Err(usage("dataset has no CV receivers; give --sigma"));
            }
            None => None,
        }
    };

    let mut outputs = Outputs::new(&a.out)?;
    let mut timings = serde_json::Map::new();
    let mut body = BTreeMap::new();
    body.insert("command", json!("invert"));
    let mut input_paths: Vec<&Path> = vec![a.dataset.as_path()];
    if let Some(p) = &path {
        input_paths.push(p);
    }
    if let Some(p) = a.operator_cache.as_deref().filter(|p| p.is_file()) {
        input_paths.push(p);
    }
    body.insert("inputs", inputs(&input_paths)?);

    let truth = if cfg.scene.is_empty() { None } else { Some(truth_map(&cfg)?) };
    let mut metrics = serde_json::Map::new();

    if a.method != Method::Lsm {
        let route = match a.operator {
            Route::Greens => OperatorRoute::Greens,
            Route::Fdfd => OperatorRoute::Fdfd(1),
        };
        let t = Instant::now();
        let (op, cached) = match &a.operator_cache {
            Some(p) => cached_operator(&cfg.grid, ds.measurement(), ds.freqs(), &cfg.background, &cfg.simulation, route, p)?,
            None => (build_operator(&cfg.grid, ds.measurement(), ds.freqs(), &cfg.background, &cfg.simulation, route)?, false),
        };
        timings.insert("operator".into(), json!(t.elapsed().as_secs_f64()));
        if a.save_operator {
            save_operator(&op, &cfg.background, route, &outputs.path("operator.gmmvop"))?;
        }
        let run = invert_gmmv(&op, &ds, &cfg.solver, sigma)?;
        timings.insert("gmmv".into(), json!(run.seconds));
        outputs.image("gmmv_gamma", &run.image)?;
        let r = &run.result;
        outputs.write("gmmv_residuals.csv", residual_csv(&r.r_rec, &r.r_cv))?;
        let mut pareto = String::from("outer,tau,phi,certificate,converged,inner_iterations\n");
        for (k, o) in r.outer.iter().enumerate() {
            pareto.push_str(&format!(
                "{k},{:e},{:e},{:e},{},{}\n",
                o.tau, o.phi, o.certificate, o.converged, o.inner_iterations
            ));
        }
        outputs.write("gmmv_pareto.csv", pareto)?;
        body.insert(
            "solver",
            json!({
                "operator": route.tag(),
                "operator_from_cache": cached,
                "stop": r.stop,
                "n_iter": r.n_iter,
                "n_opt": r.n_opt,
                "sigma_hat": r.sigma_hat,
                "y_norm": r.y_norm,
                "tau": r.tau,
                "outer_iterations": r.outer.len(),
            }),
        );
        if let Some(t) = &truth {
            metrics.insert("gmmv".into(), serde_json::to_value(image_metrics(&run.image, t, ds.freqs())?).expect("serializable"));
        }
    }
    if a.method != Method::Gmmv {
        let (img, secs) = invert_lsm(&ds, &cfg.grid, &cfg.background)?;
        timings.insert("lsm".into(), json!(secs));
        outputs.image("lsm_gamma", &img)?;
        if let Some(t) = &truth {
            metrics.insert("lsm".into(), serde_json::to_value(image_metrics(&img, t, ds.freqs())?).expect("serializable"));
        }
    }
    if !metrics.is_empty() {
        outputs.write("metrics.json", serde_json::to_string_pretty(&metrics).expect("serializable") + "\n")?;
    }
    let mut used = cfg.clone();
    used.file.frequencies = Some(ds.freqs().hz().to_vec());
    body.insert("config", config_value(&used));
    body.insert("timings_s", Value::Object(timings));
    outputs.manifest(body)?;
    Ok(EXIT_OK)
}

fn cmd_validate(arg: &ConfigArg, cache: Option<&Path>, out: Option<&Path>) -> CliResult<i32> {
    let (cfg, path) = load(arg)?;
    let report = validate_config(&cfg, cache);
    for c in &report.checks {
        println!(
            "{:<18} {}  value {:.4e}  limit {:.4e}  {}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.limit,
            c.detail
        );
    }
    if let Some(dir) = out {
        let mut outputs = Outputs::new(dir)?;
        outputs.write("validation.json", serde_json::to_string_pretty(&report).expect("serializable") + "\n")?;
        let mut body = BTreeMap::new();
        body.insert("command", json!("validate"));
        body.insert("config", config_value(&cfg));
        let mut ins: Vec<&Path> = path.iter().map(PathBuf::as_path).collect();
        if let Some(c) = cache.filter(|c| c.is_file()) {
            ins.push(c);
        }
        body.insert("inputs", inputs(&ins)?);
        body.insert("pass", json!(report.pass()));
        outputs.manifest(body)?;
    }
    Ok(if report.pass() { EXIT_OK } else { EXIT_SOLVER })
}

fn cmd_presets(out: Option<&Path>) -> CliResult<i32> {
    match out {
        None => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
        Some(dir) => {
            let mut outputs = Outputs::new(dir)?;
            for name in PRESET_NAMES {
                let cfg: ConfigFile = preset(name)?;
                outputs.write(&format!("{name}.json"), cfg.to_json() + "\n")?;
            }
            let mut body = BTreeMap::new();
            body.insert("command", json!("presets"));
            outputs.manifest(body)?;
        }
    }
    Ok(EXIT_OK)
}
