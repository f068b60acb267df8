//! `simulate`: preset experiment grids and JSON run configurations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, SimulateArgs};
use crate::estimators::EstimatorKind;
use crate::glm::{GlmFamily, SolverConfig};
use crate::inference::{Hypothesis, TestMethod};
use crate::sharding::ShardingStrategy;
use crate::sim::{
    calibrate_beta_alt, run_estimation_experiment, run_lrt_experiment, write_estimation_report, write_lrt_report,
    CovariateLaw, LrtConfig, SimConfig, TransportKind,
};

/// Environment variable naming the default run configuration.
pub const CONFIG_ENV: &str = "ONESTEP_GLM_CONFIG";

const DEFAULT_REPS: usize = 500;
const DEFAULT_SEED: u64 = 20_240_601;
const PILOT_FRACTIONS: [f64; 3] = [0.05, 0.1, 0.2];
/// Default alternative slope for the test presets.
pub const DEFAULT_BETA_ALT: f64 = 0.1;
/// Calibration target: global-test power at this many rows.
pub const CALIBRATION_POWER: f64 = 0.96;
pub const CALIBRATION_N: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
}

impl Preset {
    fn family(self) -> GlmFamily {
        match self {
            Preset::Table1 | Preset::Table3 => GlmFamily::Logistic,
            Preset::Table2 | Preset::Table4 => GlmFamily::Poisson,
        }
    }

    fn is_lrt(self) -> bool {
        matches!(self, Preset::Table3 | Preset::Table4)
    }

    fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Table2 => "table2",
            Preset::Table3 => "table3",
            Preset::Table4 => "table4",
        }
    }

    /// Intercept used by the test presets.
    pub fn lrt_intercept(family: GlmFamily) -> f64 {
        match family {
            GlmFamily::Logistic => 0.2,
            GlmFamily::Poisson => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Estimation,
    Lrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrtSection {
    pub hypothesis: Hypothesis,
    /// `None` calibrates the slope from the asymptotic power.
    #[serde(default)]
    pub beta_alt: Option<f64>,
    pub methods: Vec<TestMethod>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

/// A complete simulation run as a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub sim: SimConfig,
    #[serde(default)]
    pub lrt: Option<LrtSection>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub stem: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn lrt_config(&self) -> Result<LrtConfig, CliError> {
        let sec = self.lrt.as_ref().ok_or_else(|| CliError::Config("lrt: required in lrt mode".into()))?;
        let beta_alt = match sec.beta_alt {
            Some(b) => b,
            None => calibrated_alt(&self.sim)?,
        };
        Ok(LrtConfig {
            sim: self.sim.clone(),
            hypothesis: sec.hypothesis.clone(),
            beta_alt,
            methods: sec.methods.clone(),
            alpha: sec.alpha,
        })
    }
}

fn calibrated_alt(sim: &SimConfig) -> Result<f64, CliError> {
    let b1 = sim.beta_true.first().copied().unwrap_or(0.0);
    Ok(calibrate_beta_alt(sim.family, b1, CALIBRATION_N, CALIBRATION_POWER, 0.05)?)
}

/// One (N, K, sharding) cell of a preset grid, with every pilot fraction.
pub fn preset_cells(preset: Preset, reps: usize, seed: u64) -> Vec<SimConfig> {
    let family = preset.family();
    let (beta, law, ns, ks): (Vec<f64>, _, Vec<usize>, Vec<usize>) = match preset {
        Preset::Table1 => (vec![1.0, 2.0, 1.0], CovariateLaw::StdNormal, vec![10_000, 20_000, 100_000], vec![2, 5, 10]),
        Preset::Table2 => (vec![1.0, -1.0, -0.5], CovariateLaw::Uniform01, vec![10_000, 20_000, 100_000], vec![2, 5, 10]),
        Preset::Table3 | Preset::Table4 => (
            vec![Preset::lrt_intercept(family), 0.0],
            CovariateLaw::InterceptPlusUniform01,
            vec![10_000, 20_000, 50_000],
            vec![5],
        ),
    };
    let mut cells = Vec::new();
    for sharding in [ShardingStrategy::Random, ShardingStrategy::CovariateSumOrdered] {
        for &n in &ns {
            for &k in &ks {
                cells.push(SimConfig {
                    family,
                    beta_true: beta.clone(),
                    n_total: n,
                    workers: k,
                    pilot_fractions: PILOT_FRACTIONS.to_vec(),
                    sharding,
                    estimators: EstimatorKind::ALL.to_vec(),
                    replications: reps,
                    base_seed: seed,
                    covariate_law: law,
                    force_csl: false,
                    solver: SolverConfig::default(),
                    transport: TransportKind::InProcess,
                });
            }
        }
    }
    cells
}

/// Applies a `key=value,...` cell filter. Keys: N, K, p, sharding.
fn filter_cells(cells: Vec<SimConfig>, spec: &str) -> Result<Vec<SimConfig>, CliError> {
    let (mut n, mut k, mut p, mut sharding) = (None, None, None, None);
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) =
            part.split_once('=').ok_or_else(|| CliError::Config(format!("--cell: '{part}' is not key=value")))?;
        let bad = |_| CliError::Config(format!("--cell: bad value for {key}: '{value}'"));
        match key.trim() {
            "N" | "n" => n = Some(value.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "K" | "k" => k = Some(value.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "p" => p = Some(value.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "sharding" => sharding = Some(value.trim().parse::<ShardingStrategy>()?),
            other => return Err(CliError::Config(format!("--cell: unknown key '{other}'"))),
        }
    }
    let out: Vec<SimConfig> = cells
        .into_iter()
        .filter(|c| n.is_none_or(|n| c.n_total == n))
        .filter(|c| k.is_none_or(|k| c.workers == k))
        .filter(|c| sharding.is_none_or(|s| c.sharding == s))
        .map(|mut c| {
            if let Some(p) = p {
                c.pilot_fractions = vec![p];
            }
            c
        })
        .collect();
    if out.is_empty() {
        return Err(CliError::Config(format!("--cell: '{spec}' matches no cell of the preset")));
    }
    Ok(out)
}

fn cell_stem(prefix: &str, c: &SimConfig) -> String {
    format!("{prefix}_{}_{}_N{}_K{}", c.family, c.sharding, c.n_total, c.workers)
}

fn run_estimation(cfg: &SimConfig, out: &Path, stem: &str) -> Result<(), CliError> {
    let report = run_estimation_experiment(cfg)?;
    let (csv, json) = write_estimation_report(&report, out, stem)?;
    println!("{} {} N={} K={} B={}", cfg.family, cfg.sharding, cfg.n_total, cfg.workers, cfg.replications);
    for s in &report.summary {
        let p = s.pilot_fraction.map(|p| format!(" p={p}")).unwrap_or_default();
        println!("  {:<9}{:<8} ARMSE {:.4}  (failures {})", s.estimator.label(), p, s.armse, s.failures);
    }
    println!("  wrote {} and {} ({:.1}s)", csv.display(), json.display(), report.wall_clock_secs);
    Ok(())
}

fn run_lrt(cfg: &LrtConfig, out: &Path, stem: &str) -> Result<(), CliError> {
    let report = run_lrt_experiment(cfg)?;
    let (csv, json) = write_lrt_report(&report, out, stem)?;
    let s = &cfg.sim;
    println!("{} {} N={} K={} B={} beta_alt={:.4}", s.family, s.sharding, s.n_total, s.workers, s.replications, cfg.beta_alt);
    for t in &report.summary {
        let p = t.pilot_fraction.map(|p| format!(" p={p}")).unwrap_or_default();
        println!("  {:<9}{:<8} size {:.3}  power {:.3}", t.method.label(), p, t.size, t.power);
    }
    println!("  wrote {} and {} ({:.1}s)", csv.display(), json.display(), report.wall_clock_secs);
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub(super) fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config_path = args.config.clone().or_else(|| {
        if args.preset.is_none() {
            std::env::var_os(CONFIG_ENV).map(PathBuf::from)
        } else {
            None
        }
    });
    if let Some(path) = config_path {
        if args.preset.is_some() {
            return Err(CliError::Config("--config and --preset are mutually exclusive".into()));
        }
        let mut rc = RunConfig::load(&path)?;
        if let Some(r) = args.reps {
            rc.sim.replications = r;
        }
        if let Some(s) = args.seed {
            rc.sim.base_seed = s;
        }
        if let Some(m) = &args.mode {
            let want = if m == "lrt" { Mode::Lrt } else { Mode::Estimation };
            if want != rc.mode {
                return Err(CliError::Config(format!("--mode {m} disagrees with the configuration file")));
            }
        }
        let out = rc.output_dir.clone().unwrap_or(args.out.clone());
        let stem = rc.stem.clone().unwrap_or_else(|| cell_stem("run", &rc.sim));
        let threads = args.threads.or(rc.threads);
        return match rc.mode {
            Mode::Estimation => {
                rc.sim.validate()?;
                with_threads(threads, || run_estimation(&rc.sim, &out, &stem))?
            }
            Mode::Lrt => {
                let cfg = rc.lrt_config()?;
                cfg.validate()?;
                with_threads(threads, || run_lrt(&cfg, &out, &stem))?
            }
        };
    }

    let preset = args.preset.ok_or_else(|| {
        CliError::Config(format!("nothing to run: pass --preset or --config (or set {CONFIG_ENV})"))
    })?;
    if let Some(m) = &args.mode {
        if (m == "lrt") != preset.is_lrt() {
            return Err(CliError::Config(format!("--mode {m} does not match preset {}", preset.name())));
        }
    }
    let reps = args.reps.unwrap_or(DEFAULT_REPS);
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let mut cells = preset_cells(preset, reps, seed);
    if let Some(spec) = &args.cell {
        cells = filter_cells(cells, spec)?;
    }
    if let Some(t) = &args.transport {
        let kind = if t == "tcp" { TransportKind::Tcp } else { TransportKind::InProcess };
        cells.iter_mut().for_each(|c| c.transport = kind);
    }
    for cell in &cells {
        cell.validate()?;
    }
    with_threads(args.threads, || -> Result<(), CliError> {
        for cell in &cells {
            let stem = cell_stem(preset.name(), cell);
            if preset.is_lrt() {
                let beta_alt = match args.beta_alt.as_deref() {
                    None => DEFAULT_BETA_ALT,
                    Some("calibrate") => calibrated_alt(cell)?,
                    Some(v) => v.parse().map_err(|_| CliError::Config(format!("--beta-alt: '{v}' is not a number")))?,
                };
                let cfg = LrtConfig {
                    sim: cell.clone(),
                    hypothesis: Hypothesis::new(vec![(1, 0.0)])?,
                    beta_alt,
                    methods: TestMethod::ALL.to_vec(),
                    alpha: 0.05,
                };
                run_lrt(&cfg, &args.out, &stem)?;
            } else {
                run_estimation(cell, &args.out, &stem)?;
            }
        }
        Ok(())
    })?
}
