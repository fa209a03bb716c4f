//! Command-line front end. Flags and an optional JSON config (which wins
//! over flags) resolve into one [`RunConfig`]; every JSON report embeds the
//! resolved config, so feeding a report back through `--config` reruns it.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::duality::{check_theorem1_eq410_consistency, DualityVariant, IdentityChecker, IdentityKind};
use crate::error::{Error, Result};
use crate::evolve::{build_step_matrix, check_l3, check_lf, check_lf_twisted, check_step_window_extension, BoundarySpec, Direction, LeftBoundary, RightBoundary, StepSpec};
use crate::examples::{check_asep_limit, example1, example1_closed_form, example2};
use crate::exec::Exec;
use crate::montecarlo::{chi_square_source, simulate, SimSpec, StepSampler};
use crate::params::ParamSampler;
use crate::qarith::Rational;
use crate::report::CheckReport;
use crate::state::{Configuration, LatticeWindow};
use crate::suite::{Suite, CRITERIA};
use crate::vertex::{check_charge_reversal, write_weights_csv, ModelParams};

/// Significance level below which a simulated first step counts as off.
pub const SIMULATE_P_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPreset {
    /// Forward sweep, particles leave through the right edge.
    Exit,
    /// Reversed sweep, holes enter on the right, particles absorbed on the left.
    Absorb,
    /// Reversed sweep, one top-color particle enters on the right each step.
    Inject,
    /// Both edges closed (substochastic).
    Closed,
}

impl BoundaryPreset {
    fn spec(self) -> BoundarySpec {
        match self {
            BoundaryPreset::Exit => BoundarySpec::FORWARD_EXIT,
            BoundaryPreset::Absorb => BoundarySpec::REVERSED_ABSORB,
            BoundaryPreset::Inject => BoundarySpec::REVERSED_INJECT,
            BoundaryPreset::Closed => BoundarySpec {
                left: LeftBoundary::Closed,
                right: RightBoundary::Closed,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionArg {
    Forward,
    Reversed,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Reversed => Direction::Reversed,
        }
    }
}

/// Everything a run depends on. Unset fields take defaults or seeded draws
/// at resolution time, and the resolved values are written back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Horizontal capacity; only 1 is implemented.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exterior_capacity: Option<u32>,
    /// `lo..hi`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zvec: Option<Vec<Rational>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<DualityVariant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// `x:color:count,...`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Configuration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub which: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only: Option<Vec<u8>>,
    /// Output paths are not part of the run; reports omit them.
    #[serde(skip_serializing)]
    pub json: Option<PathBuf>,
    /// Output paths are not part of the run; reports omit them.
    #[serde(skip_serializing)]
    pub csv: Option<PathBuf>,
    /// Output paths are not part of the run; reports omit them.
    #[serde(skip_serializing)]
    pub summary_csv: Option<PathBuf>,
}

impl RunConfig {
    /// Field by field, `over` wins where set.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            command: over.command.or(self.command),
            identities: if over.identities.is_empty() { self.identities } else { over.identities },
            n: over.n.or(self.n),
            l: over.l.or(self.l),
            m: over.m.or(self.m),
            capacities: over.capacities.or(self.capacities),
            exterior_capacity: over.exterior_capacity.or(self.exterior_capacity),
            window: over.window.or(self.window),
            q: over.q.or(self.q),
            zvec: over.zvec.or(self.zvec),
            direction: over.direction.or(self.direction),
            boundary: over.boundary.or(self.boundary),
            variant: over.variant.or(self.variant),
            trials: over.trials.or(self.trials),
            seed: over.seed.or(self.seed),
            steps: over.steps.or(self.steps),
            particles: over.particles.or(self.particles),
            initial: over.initial.or(self.initial),
            which: over.which.or(self.which),
            k: over.k.or(self.k),
            r: over.r.or(self.r),
            eps: over.eps.or(self.eps),
            only: over.only.or(self.only),
            json: over.json.or(self.json),
            csv: over.csv.or(self.csv),
            summary_csv: over.summary_csv.or(self.summary_csv),
        }
    }

    /// Reads a bare config or the `config` embedded in a JSON report.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)?;
        let inner = match v.get("config") {
            Some(c) if v.get("command").is_none() => c.clone(),
            _ => v,
        };
        Ok(serde_json::from_value(inner)?)
    }

    fn n(&self) -> usize {
        self.n.unwrap_or(1)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn bounds(&self) -> Result<(i64, i64)> {
        let w = self.window.as_deref().ok_or_else(|| Error::Config("--window lo..hi is required".into()))?;
        parse_window(w)
    }

    /// Fills capacities and the exterior capacity; the window comes from `--window`.
    fn resolve_window(&mut self) -> Result<LatticeWindow> {
        let (lo, hi) = self.bounds()?;
        let len = usize::try_from(hi - lo + 1).map_err(|_| Error::Config(format!("empty window {lo}..{hi}")))?;
        let caps = match &self.capacities {
            Some(c) if c.len() == len => c.clone(),
            Some(c) => return Err(Error::Config(format!("{} capacities for {len} sites", c.len()))),
            None => vec![self.m.unwrap_or(1); len],
        };
        let ext = self.exterior_capacity.unwrap_or(caps[0]);
        self.capacities = Some(caps.clone());
        self.exterior_capacity = Some(ext);
        LatticeWindow::new(lo, hi, caps, ext)
    }

    /// Fills `q` and one `z` per capacity, drawing from the seed when unset.
    fn resolve_params(&mut self, caps: &[u32], homogeneous: bool) -> Result<(Rational, Vec<Rational>)> {
        let mut sampler = ParamSampler::new(self.seed());
        let q = match &self.q {
            Some(q) => q.clone(),
            None => sampler.q(),
        };
        let zvec = match &self.zvec {
            Some(z) if z.len() == 1 => vec![z[0].clone(); caps.len()],
            Some(z) if z.len() == caps.len() => z.clone(),
            Some(z) => return Err(Error::Config(format!("{} spectral parameters for {} sites", z.len(), caps.len()))),
            None if homogeneous => vec![sampler.z_for(&q, caps); caps.len()],
            None => caps.iter().map(|&m| sampler.z_for(&q, &[m])).collect(),
        };
        self.q = Some(q.clone());
        self.zvec = Some(zvec.clone());
        Ok((q, zvec))
    }

    fn step_spec(&mut self) -> Result<StepSpec> {
        let window = self.resolve_window()?;
        let (q, zvec) = self.resolve_params(&window.capacities, false)?;
        let direction = self.direction.unwrap_or(match self.boundary {
            Some(BoundaryPreset::Absorb | BoundaryPreset::Inject) => DirectionArg::Reversed,
            _ => DirectionArg::Forward,
        });
        let boundary = self.boundary.unwrap_or(match direction {
            DirectionArg::Forward => BoundaryPreset::Exit,
            DirectionArg::Reversed => BoundaryPreset::Absorb,
        });
        self.direction = Some(direction);
        self.boundary = Some(boundary);
        let spec = StepSpec::new(self.n(), q, window, zvec, direction.into(), boundary.spec());
        spec.boundary.validate(spec.direction)?;
        Ok(spec)
    }
}

fn parse_window(s: &str) -> Result<(i64, i64)> {
    let bad = || Error::Parse(format!("window {s:?} is not lo..hi"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let lo: i64 = a.trim().parse().map_err(|_| bad())?;
    let hi: i64 = b.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn parse_particles(s: &str) -> Result<Vec<(i64, usize, u32)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let bad = || Error::Parse(format!("particle spec {p:?} is not x:color:count"));
            let f: Vec<&str> = p.trim().split(':').collect();
            match f.as_slice() {
                [x, c, k] => Ok((x.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?)),
                [x, c] => Ok((x.parse().map_err(|_| bad())?, c.parse().map_err(|_| bad())?, 1)),
                _ => Err(bad()),
            }
        })
        .collect()
}

fn rational_arg(s: &str) -> std::result::Result<Rational, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn variant_arg(s: &str) -> std::result::Result<DualityVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "vertex-duality", version, about = "Exact checks and sampling for the multi-species stochastic vertex model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Vertex weights as CSV: j, beta, k, delta, weight.
    Weights(Flags),
    /// One-step transition matrix as CSV.
    StepMatrix(Flags),
    /// Exact identity checks.
    Check {
        /// theorem1, remark-dfrak, corollary, corollary-proof, eq-4-10,
        /// theorem1-vs-eq-4-10, l3, lf, lf-species-reversed, charge-reversal,
        /// asep, step-window-extension
        identities: Vec<String>,
        #[command(flatten)]
        flags: Flags,
    },
    /// The worked examples, term by term.
    Examples(Flags),
    /// Monte Carlo trajectories with a first-step chi-square check.
    Simulate(Flags),
    /// The acceptance battery.
    Suite(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// JSON config (bare or a previous report); its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write CSV data here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Simulation summary CSV.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    caps: Option<Vec<u32>>,
    #[arg(long)]
    exterior_capacity: Option<u32>,
    /// lo..hi
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, value_parser = rational_arg)]
    q: Option<Rational>,
    /// One value, or one per site.
    #[arg(long, value_delimiter = ',', value_parser = rational_arg)]
    z: Option<Vec<Rational>>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryPreset>,
    #[arg(long, value_parser = variant_arg)]
    variant: Option<DualityVariant>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// x:color:count,...
    #[arg(long, allow_hyphen_values = true)]
    particles: Option<String>,
    #[arg(long)]
    which: Option<u8>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, value_parser = rational_arg)]
    eps: Option<Rational>,
    /// Criteria to run.
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<u8>>,
}

impl Flags {
    fn into_config(self, command: &str, identities: Vec<String>) -> (RunConfig, Option<PathBuf>, bool) {
        let cfg = RunConfig {
            command: Some(command.to_string()),
            identities,
            n: self.n,
            l: self.l,
            m: self.m,
            capacities: self.caps,
            exterior_capacity: self.exterior_capacity,
            window: self.window,
            q: self.q,
            zvec: self.z,
            direction: self.direction,
            boundary: self.boundary,
            variant: self.variant,
            trials: self.trials,
            seed: self.seed,
            steps: self.steps,
            particles: self.particles,
            initial: None,
            which: self.which,
            k: self.k,
            r: self.r,
            eps: self.eps,
            only: self.only,
            json: self.json,
            csv: self.csv,
            summary_csv: self.summary_csv,
        };
        (cfg, self.config, self.sequential)
    }
}

/// Output of one command before it is written.
struct Outcome {
    text: String,
    json: Value,
    ok: bool,
}

/// Parses `argv` and runs the command: 0 when every requested check passes,
/// 1 when one fails, 2 on usage or parameter errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (name, identities, flags) = match cli.command {
        Command::Weights(f) => ("weights", vec![], f),
        Command::StepMatrix(f) => ("step-matrix", vec![], f),
        Command::Check { identities, flags } => ("check", identities, flags),
        Command::Examples(f) => ("examples", vec![], f),
        Command::Simulate(f) => ("simulate", vec![], f),
        Command::Suite(f) => ("suite", vec![], f),
    };
    let (from_flags, config_path, sequential) = flags.into_config(name, identities);
    let exec = if sequential { Exec::Sequential } else { Exec::default() };
    match execute(name, from_flags, config_path, exec) {
        Ok(ok) => i32::from(!ok),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Defect(_) => 1,
                _ => 2,
            }
        }
    }
}

fn execute(name: &str, from_flags: RunConfig, config_path: Option<PathBuf>, exec: Exec) -> Result<bool> {
    let mut cfg = match &config_path {
        Some(p) => from_flags.merged(RunConfig::load(p)?),
        None => from_flags,
    };
    if cfg.command.as_deref() != Some(name) {
        return Err(Error::Config(format!("config is for {:?}, not {name}", cfg.command.unwrap_or_default())));
    }
    if cfg.l.is_some_and(|l| l != 1) {
        return Err(Error::Config("only horizontal capacity l = 1 is implemented".into()));
    }
    let out = match name {
        "weights" => weights(&mut cfg)?,
        "step-matrix" => step_matrix(&mut cfg, exec)?,
        "check" => check(&mut cfg, exec)?,
        "examples" => examples(&mut cfg)?,
        "simulate" => run_simulation(&mut cfg, exec)?,
        "suite" => suite(&mut cfg, exec)?,
        _ => unreachable!("clap only admits known subcommands"),
    };
    print!("{}", out.text);
    if let Some(path) = &cfg.json {
        let mut doc = json!({ "config": cfg });
        if let (Value::Object(d), Value::Object(o)) = (&mut doc, out.json) {
            d.extend(o);
        }
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
    }
    Ok(out.ok)
}

fn csv_sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn weights(cfg: &mut RunConfig) -> Result<Outcome> {
    let m = cfg.m.unwrap_or(1);
    cfg.m = Some(m);
    let (q, z) = cfg.resolve_params(&[m], true)?;
    cfg.zvec = Some(vec![z[0].clone()]);
    let p = ModelParams::new(cfg.n(), q, z[0].clone())?;
    write_weights_csv(&p, m, csv_sink(&cfg.csv)?)?;
    Ok(Outcome {
        text: String::new(),
        json: json!({}),
        ok: true,
    })
}

fn step_matrix(cfg: &mut RunConfig, exec: Exec) -> Result<Outcome> {
    let spec = cfg.step_spec()?;
    let matrix = build_step_matrix(&spec, exec)?;
    if !matrix.substochastic {
        matrix.validate_stochastic()?;
    }
    matrix.validate_conservation()?;
    matrix.write_csv(csv_sink(&cfg.csv)?)?;
    let entries: usize = matrix.outcomes.iter().map(Vec::len).sum();
    let text = match cfg.csv {
        Some(_) => format!("states: {}  entries: {}  substochastic: {}\n", matrix.size(), entries, matrix.substochastic),
        None => String::new(),
    };
    Ok(Outcome {
        text,
        json: json!({ "states": matrix.size(), "entries": entries, "substochastic": matrix.substochastic }),
        ok: true,
    })
}

fn check(cfg: &mut RunConfig, exec: Exec) -> Result<Outcome> {
    if cfg.identities.is_empty() {
        return Err(Error::Config("name at least one identity to check".into()));
    }
    let window = cfg.resolve_window()?;
    let needs_homogeneous = cfg
        .identities
        .iter()
        .any(|i| matches!(i.as_str(), "corollary" | "corollary-proof" | "lf" | "lf-species-reversed" | "asep"));
    let (q, zvec) = cfg.resolve_params(&window.capacities, needs_homogeneous)?;
    let n = cfg.n();
    cfg.n = Some(n);
    let seed = cfg.seed();
    cfg.seed = Some(seed);
    let variant = cfg.variant.unwrap_or(DualityVariant::Normalized);
    let sample = cfg.trials.map(|t| t as usize);
    let homogeneous = || -> Result<Rational> {
        if zvec.iter().any(|z| *z != zvec[0]) {
            return Err(Error::Precondition("this identity needs one z for every site".into()));
        }
        Ok(zvec[0].clone())
    };
    let mut reports: Vec<CheckReport> = Vec::new();
    for id in cfg.identities.clone() {
        let rep = match id.as_str() {
            "theorem1-vs-eq-4-10" => {
                cfg.variant = Some(variant);
                check_theorem1_eq410_consistency(variant, n, &q, &window, &zvec, exec, seed)?
            }
            "l3" => check_l3(n, &q, &window, &zvec, exec)?,
            "lf" => check_lf(n, &q, &homogeneous()?, &window, exec)?,
            "lf-species-reversed" => check_lf_twisted(n, &q, &homogeneous()?, &window, exec)?,
            "charge-reversal" => {
                let mut rep = CheckReport::new("charge-reversal");
                let mut seen = Vec::new();
                for (m, z) in window.capacities.iter().zip(&zvec) {
                    if seen.contains(&(m, z)) {
                        continue;
                    }
                    seen.push((m, z));
                    rep.absorb(&check_charge_reversal(&ModelParams::new(n, q.clone(), z.clone())?, *m)?);
                }
                rep
            }
            "asep" => {
                let eps = cfg.eps.clone().unwrap_or_else(|| Rational::new(1, 1000));
                cfg.eps = Some(eps.clone());
                check_asep_limit(&q, &window, &eps)?
            }
            "step-window-extension" => {
                let spec = cfg.step_spec()?;
                let right = usize::from(spec.boundary.right != RightBoundary::InjectTop);
                check_step_window_extension(&spec, 1, right, 0, exec)?
            }
            other => {
                let kind: IdentityKind = other.parse()?;
                cfg.variant = Some(variant);
                IdentityChecker::new(kind, variant, n, &q, &window, &zvec)?.check_with(exec, seed, sample)?
            }
        };
        reports.push(rep);
    }
    let ok = reports.iter().all(CheckReport::passed);
    let text = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n");
    Ok(Outcome {
        text,
        json: json!({ "reports": reports }),
        ok,
    })
}

fn examples(cfg: &mut RunConfig) -> Result<Outcome> {
    let which = cfg.which.unwrap_or(1);
    cfg.which = Some(which);
    let reports = match which {
        1 => {
            let m = cfg.m.unwrap_or(2);
            let k = cfg.k.unwrap_or(1);
            cfg.m = Some(m);
            cfg.k = Some(k);
            let (q, z) = cfg.resolve_params(&[m], true)?;
            cfg.zvec = Some(vec![z[0].clone()]);
            let variant = cfg.variant.unwrap_or(DualityVariant::ExampleConsistent);
            cfg.variant = Some(variant);
            vec![example1(m, k, &q, &z[0], variant)?, example1_closed_form(m, k, &q, &z[0])?]
        }
        2 => {
            let caps = cfg.capacities.clone().unwrap_or_else(|| vec![1, 2, 2]);
            let r = cfg.r.unwrap_or(1);
            cfg.capacities = Some(caps.clone());
            cfg.r = Some(r);
            let (q, z) = cfg.resolve_params(&caps, true)?;
            cfg.zvec = Some(vec![z[0].clone()]);
            vec![example2(&caps, r, &q, &z[0])?]
        }
        w => return Err(Error::Config(format!("there is no example {w}; choose 1 or 2"))),
    };
    let ok = reports.iter().all(CheckReport::passed);
    let text = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n");
    Ok(Outcome {
        text,
        json: json!({ "reports": reports }),
        ok,
    })
}

fn run_simulation(cfg: &mut RunConfig, exec: Exec) -> Result<Outcome> {
    let step = cfg.step_spec()?;
    let initial = match (&cfg.initial, &cfg.particles) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => Configuration::with_particles(step.n, &step.window, &parse_particles(p)?)?,
        (None, None) => Configuration::empty(step.n, &step.window),
    };
    if initial.window != step.window {
        return Err(Error::Config("the initial configuration lives on a different window".into()));
    }
    let sim = SimSpec {
        step,
        steps: cfg.steps.unwrap_or(10),
        trials: cfg.trials.unwrap_or(1000) as usize,
        seed: cfg.seed(),
    };
    sim.validate()?;
    cfg.steps = Some(sim.steps);
    cfg.trials = Some(sim.trials as u64);
    cfg.seed = Some(sim.seed);
    let result = simulate(&sim, &initial, cfg.csv.is_some(), exec)?;
    if cfg.csv.is_some() {
        result.write_trajectories_csv(csv_sink(&cfg.csv)?)?;
    }
    let mut text = String::new();
    match &cfg.summary_csv {
        Some(_) => result.write_summary_csv(csv_sink(&cfg.summary_csv)?)?,
        None => {
            let mut buf = Vec::new();
            result.write_summary_csv(&mut buf)?;
            text.push_str(&String::from_utf8_lossy(&buf));
        }
    }
    let sampler = StepSampler::new(&sim.step)?;
    let source = sampler.kernel().space.index(&initial).expect("checked above");
    let chi = chi_square_source(&sampler, source, sim.trials as u64, sim.seed, exec)?;
    let ok = chi.passes(SIMULATE_P_THRESHOLD);
    text.push_str(&format!(
        "first step against the exact column: chi-square {:.3} on {} dof, p = {:.4}{}\n",
        chi.statistic,
        chi.dof,
        chi.p_value,
        if ok { "" } else { " (below threshold)" }
    ));
    let summary: Vec<Value> = result
        .summary
        .iter()
        .map(|(step, name, e)| json!({ "step": step, "observable": name, "mean": e.mean, "var_of_mean": e.var_of_mean }))
        .collect();
    Ok(Outcome {
        text,
        json: json!({ "summary": summary, "first_step_chi_square": { "statistic": chi.statistic, "dof": chi.dof, "p_value": chi.p_value } }),
        ok,
    })
}

fn suite(cfg: &mut RunConfig, exec: Exec) -> Result<Outcome> {
    let seed = cfg.seed();
    cfg.seed = Some(seed);
    let ids: Vec<u8> = cfg.only.clone().unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    let suite = Suite::new(seed, exec);
    let mut text = String::new();
    let mut outcomes = Vec::new();
    for id in ids {
        let c = suite.run(id)?;
        let line = format!("{c}\n");
        // progress goes out as it happens; the suite is long
        print!("{line}");
        let _ = io::stdout().flush();
        outcomes.push(c);
    }
    let ok = outcomes.iter().all(|c| c.passed);
    let passed = outcomes.iter().filter(|c| c.passed).count();
    text.push_str(&format!("{passed}/{} criteria pass\n", outcomes.len()));
    Ok(Outcome {
        text,
        json: json!({ "criteria": outcomes }),
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_and_particles_parse() {
        assert_eq!(parse_window("-3..-1").unwrap(), (-3, -1));
        assert!(parse_window("2..1").is_err());
        assert!(parse_window("1-2").is_err());
        assert_eq!(parse_particles("-2:1:1,0:2").unwrap(), vec![(-2, 1, 1), (0, 2, 1)]);
        assert!(parse_particles("1:x:1").is_err());
    }

    #[test]
    fn config_wins_over_flags() {
        let flags = RunConfig {
            command: Some("check".into()),
            n: Some(1),
            seed: Some(3),
            ..Default::default()
        };
        let file = RunConfig {
            n: Some(2),
            ..Default::default()
        };
        let m = flags.merged(file);
        assert_eq!((m.n, m.seed), (Some(2), Some(3)));
    }

    #[test]
    fn unset_parameters_are_drawn_and_recorded() {
        let mut cfg = RunConfig {
            window: Some("-2..-1".into()),
            seed: Some(5),
            ..Default::default()
        };
        let w = cfg.resolve_window().unwrap();
        let (q, z) = cfg.resolve_params(&w.capacities, false).unwrap();
        assert_eq!(cfg.q.as_ref(), Some(&q));
        assert_eq!(cfg.zvec.as_ref(), Some(&z));
        let mut again = RunConfig {
            window: Some("-2..-1".into()),
            seed: Some(5),
            ..Default::default()
        };
        let w = again.resolve_window().unwrap();
        assert_eq!(again.resolve_params(&w.capacities, false).unwrap(), (q, z));
    }
}
