use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::builder::TypedValueParser;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use nrm_core::assortment::{compute_assort_bid_prices, gen_random_assortment, AssortBidPricePolicy, AssortBounds};
use nrm_core::experiment::{average_bbp_gap, reproduce, rows_to_csv, DEFAULT_REPS};
use nrm_core::instances::{
    encode_high_variance, encode_independent, gen_airline, gen_random_small, read_instance, to_json, AirlineConfig,
    RandomBounds, Setting, SurvivalSpec, DEFAULT_CAPACITY_KAPPA, SCHEMA_VERSION,
};
use nrm_core::lp::{build_adp_lp_with, build_assort_adp_lp, build_fluid_uf_lp, extract_weights, solve_with, write_lp_format, AdpLpOptions, Backend};
use nrm_core::model::{bundle_size_l, Instance};
use nrm_core::policies::{compute_bid_prices, AdpHeuristicPolicy, BidPricePolicy, GreedyPolicy, Policy};
use nrm_core::simulate::{monte_carlo, monte_carlo_assort, replication_seed, run_assort_policy, run_policy, sample_trajectory, trace_csv};
use nrm_core::verify::{verify_instance, InstanceReport, VerifyOptions};
use nrm_core::{CustomerType, Resource};

const EXIT_USAGE: u8 = 2;
const EXIT_GENERATION: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_INVARIANT: u8 = 5;

#[derive(Parser)]
#[command(name = "nrm", version, about = "Bid-price control for network revenue management with Markov-modulated arrivals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    A,
    B,
    Hv,
    Indep,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Bbp,
    Adp,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Dense,
    Highs,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Dense => Backend::Dense,
            BackendArg::Highs => Backend::Highs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file.
    Generate {
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long, default_value_t = 40.0)]
        mu: f64,
        #[arg(long, default_value_t = 10.0)]
        sigma: f64,
        #[arg(long, env = "NRM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_CAPACITY_KAPPA)]
        capacity_kappa: f64,
        #[arg(long)]
        horizon_override: Option<usize>,
        /// Survival rates / type mixes with types and resources (hv, indep).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// With --setting random: draw a tiny instance with a substitutable choice model.
        #[arg(long)]
        assort: bool,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Solve the ADP linear program and print its value.
    UpperBound {
        file: PathBuf,
        #[arg(long)]
        assort: bool,
        /// Fluid bound of a high-variance instance instead.
        #[arg(long, conflicts_with = "assort")]
        fluid: bool,
        #[arg(long, value_enum, default_value = "auto")]
        backend: BackendArg,
        /// Also write the program in LP text format.
        #[arg(long)]
        export_lp: Option<PathBuf>,
    },
    /// Monte-Carlo a policy and print the result as JSON.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "bbp")]
        policy: PolicyArg,
        #[arg(long, default_value_t = DEFAULT_REPS, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        reps: usize,
        #[arg(long, env = "NRM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        assort: bool,
        /// Per-replication CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Check bounds and guarantees against the exact oracle.
    Verify {
        #[arg(required_unless_present = "random_corpus", conflicts_with = "random_corpus")]
        file: Option<PathBuf>,
        #[arg(long)]
        random_corpus: Option<usize>,
        /// Add this many random assortment instances to the corpus.
        #[arg(long, default_value_t = 0, requires = "random_corpus")]
        assort_corpus: usize,
        #[arg(long, env = "NRM_SEED", default_value_t = 0)]
        seed: u64,
        /// Negative control: corrupt the bid-price table before checking.
        #[arg(long)]
        debug_corrupt_nu: bool,
        /// Where violating instances are written.
        #[arg(long, default_value = ".")]
        failures_dir: PathBuf,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Run the experiment grid for one setting and write a CSV.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
        #[arg(long, env = "NRM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REPS, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_CAPACITY_KAPPA)]
        capacity_kappa: f64,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Export the bid-price table as JSON.
    BidPrices {
        file: PathBuf,
        #[arg(long)]
        assort: bool,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

type CliResult<T> = Result<T, Failure>;

/// Writes `text` to `path` (and its manifest) or to stdout.
fn emit(path: Option<&Path>, text: &str, manifest: &serde_json::Value) -> CliResult<()> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => {
            fs::write(p, text).with_context(|| format!("writing {}", p.display())).exit_with(EXIT_USAGE)?;
            write_manifest(p, manifest)
        }
    }
}

fn write_manifest(output: &Path, extra: &serde_json::Value) -> CliResult<()> {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    let manifest = json!({
        "command": std::env::args().collect::<Vec<_>>(),
        "parameters": extra,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "instance_schema": SCHEMA_VERSION,
        "created": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        "output": output.display().to_string(),
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    fs::write(&name, text).with_context(|| format!("writing {}", Path::new(&name).display())).exit_with(EXIT_USAGE)
}

fn load(path: &Path) -> CliResult<Instance> {
    read_instance(path).exit_with(EXIT_USAGE)
}

fn choice_of(instance: &Instance) -> CliResult<&nrm_core::ChoiceModel> {
    instance.choice.as_ref().ok_or_else(|| Failure {
        code: EXIT_USAGE,
        error: anyhow!("--assort needs an instance with a \"choice\" block"),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodingFile {
    #[serde(default)]
    rho: Option<Vec<f64>>,
    lambdas: Vec<Vec<f64>>,
    types: Vec<CustomerType>,
    resources: Vec<Resource>,
}

fn summary(instance: &Instance) -> String {
    format!(
        "T={} m={} n={} |S|={} L={} capacities={:?}",
        instance.horizon(),
        instance.m(),
        instance.n(),
        instance.num_states(),
        bundle_size_l(instance),
        instance.capacities()
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    setting: SettingArg,
    mu: f64,
    sigma: f64,
    seed: u64,
    kappa: f64,
    horizon_override: Option<usize>,
    spec: Option<PathBuf>,
    assort: bool,
    output: Option<PathBuf>,
) -> CliResult<()> {
    if assort && !matches!(setting, SettingArg::Random) {
        return Err(Failure { code: EXIT_USAGE, error: anyhow!("--assort only applies to --setting random") });
    }
    let instance = match setting {
        SettingArg::A | SettingArg::B => {
            let mut config = AirlineConfig::new(mu, sigma, seed);
            config.capacity_kappa = kappa;
            config.horizon_override = horizon_override;
            let s = if matches!(setting, SettingArg::A) { Setting::A } else { Setting::B };
            gen_airline(s, &config).exit_with(EXIT_GENERATION)?
        }
        SettingArg::Hv | SettingArg::Indep => {
            let path = spec.ok_or_else(|| Failure { code: EXIT_USAGE, error: anyhow!("--spec FILE is required for this setting") })?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display())).exit_with(EXIT_USAGE)?;
            let enc: EncodingFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).exit_with(EXIT_USAGE)?;
            if matches!(setting, SettingArg::Hv) {
                let rho = enc.rho.ok_or_else(|| Failure { code: EXIT_USAGE, error: anyhow!("high-variance spec needs \"rho\"") })?;
                encode_high_variance(&SurvivalSpec { rho, lambdas: enc.lambdas }, enc.types, enc.resources).exit_with(EXIT_GENERATION)?
            } else {
                encode_independent(&enc.lambdas, enc.types, enc.resources).exit_with(EXIT_GENERATION)?
            }
        }
        SettingArg::Random if assort => gen_random_assortment(seed, AssortBounds::default()),
        SettingArg::Random => gen_random_small(seed, RandomBounds::new(3, 4, 6, 5, 3)),
    };
    let text = to_json(&instance);
    if output.is_some() {
        println!("{}", summary(&instance));
    } else {
        eprintln!("{}", summary(&instance));
    }
    emit(
        output.as_deref(),
        &text,
        &json!({ "seed": seed, "mu": mu, "sigma": sigma, "capacity_kappa": kappa, "horizon_override": horizon_override }),
    )
}

fn cmd_upper_bound(file: PathBuf, assort: bool, fluid: bool, backend: BackendArg, export: Option<PathBuf>) -> CliResult<()> {
    let instance = load(&file)?;
    let lp = if fluid {
        build_fluid_uf_lp(&instance).exit_with(EXIT_USAGE)?
    } else if assort {
        build_assort_adp_lp(&instance, choice_of(&instance)?).exit_with(EXIT_SOLVER)?.0
    } else {
        build_adp_lp_with(&instance, AdpLpOptions::auto(&instance)).0
    };
    if let Some(path) = &export {
        fs::write(path, write_lp_format(&lp)).with_context(|| format!("writing {}", path.display())).exit_with(EXIT_USAGE)?;
    }
    let sol = solve_with(&lp, backend.into()).exit_with(EXIT_SOLVER)?.require_optimal().exit_with(EXIT_SOLVER)?;
    println!("{}", json!({ "lp_value": sol.objective, "status": sol.status }));
    Ok(())
}

fn cmd_simulate(
    file: PathBuf,
    policy: PolicyArg,
    reps: usize,
    seed: u64,
    assort: bool,
    trace: Option<PathBuf>,
    output: Option<PathBuf>,
) -> CliResult<()> {
    let instance = load(&file)?;
    let (result, traces) = if assort {
        let choice = choice_of(&instance)?;
        if policy != PolicyArg::Bbp {
            return Err(Failure { code: EXIT_USAGE, error: anyhow!("assortment simulation supports --policy bbp only") });
        }
        let pol = AssortBidPricePolicy::new(&instance, choice).exit_with(EXIT_SOLVER)?;
        let result = monte_carlo_assort(&instance, choice, &pol, reps, seed).exit_with(EXIT_SOLVER)?;
        let traces = match &trace {
            Some(_) => (0..reps)
                .map(|r| run_assort_policy(&instance, choice, &pol, &sample_trajectory(&instance.arrival, replication_seed(seed, r))))
                .collect::<Result<Vec<_>, _>>()
                .exit_with(EXIT_SOLVER)?,
            None => Vec::new(),
        };
        (result, traces)
    } else {
        let pol: Box<dyn Policy + '_> = match policy {
            PolicyArg::Bbp => Box::new(BidPricePolicy::new(&instance)),
            PolicyArg::Greedy => Box::new(GreedyPolicy(&instance)),
            PolicyArg::Adp => {
                let (lp, idx) = build_adp_lp_with(&instance, AdpLpOptions::auto(&instance));
                let sol = solve_with(&lp, Backend::Auto).exit_with(EXIT_SOLVER)?;
                let weights = extract_weights(&sol, &idx).exit_with(EXIT_SOLVER)?;
                Box::new(AdpHeuristicPolicy { weights, instance: &instance })
            }
        };
        let result = monte_carlo(&instance, pol.as_ref(), reps, seed).exit_with(EXIT_SOLVER)?;
        let traces = match &trace {
            Some(_) => (0..reps)
                .map(|r| run_policy(&instance, pol.as_ref(), &sample_trajectory(&instance.arrival, replication_seed(seed, r))))
                .collect::<Result<Vec<_>, _>>()
                .exit_with(EXIT_SOLVER)?,
            None => Vec::new(),
        };
        (result, traces)
    };
    let params = json!({ "seed": seed, "reps": reps, "assort": assort, "input": file.display().to_string() });
    if let Some(path) = &trace {
        emit(Some(path), &trace_csv(&traces), &params)?;
    }
    let text = serde_json::to_string_pretty(&result).expect("result serialises") + "\n";
    emit(output.as_deref(), &text, &params)
}

fn report_line(rep: &InstanceReport) -> String {
    let status = if rep.passed() { "PASS" } else { "FAIL" };
    let mut line = format!(
        "{status} {}: dp={:.6} lp={:.6} policy={:.6} lower={:.6} ratio={:.6} bound=1/{}",
        rep.label,
        rep.dp_value,
        rep.lp_value,
        rep.policy_value,
        rep.lower_bound,
        rep.ratio,
        rep.bundle_size + 1
    );
    for f in rep.failures() {
        line.push_str(&format!("\n    {}: {}", f.name, f.detail));
    }
    line
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    file: Option<PathBuf>,
    random_corpus: Option<usize>,
    assort_corpus: usize,
    seed: u64,
    corrupt: bool,
    failures_dir: PathBuf,
    output: Option<PathBuf>,
) -> CliResult<()> {
    let opts = VerifyOptions { corrupt_nu: corrupt };
    let corpus: Vec<(String, Instance)> = match (file, random_corpus) {
        (Some(path), _) => vec![(path.display().to_string(), load(&path)?)],
        (None, Some(n)) => {
            let mut v: Vec<(String, Instance)> = (0..n as u64)
                .map(|k| {
                    let s = seed.wrapping_add(k);
                    (format!("random-{s}"), gen_random_small(s, RandomBounds::new(3, 4, 6, 5, 3)))
                })
                .collect();
            v.extend((0..assort_corpus as u64).map(|k| {
                let s = seed.wrapping_add(k);
                (format!("assort-{s}"), gen_random_assortment(s, AssortBounds::default()))
            }));
            v
        }
        (None, None) => unreachable!("clap requires one of the two"),
    };

    let mut reports = Vec::with_capacity(corpus.len());
    let mut failed = 0;
    for (label, inst) in &corpus {
        let rep = verify_instance(label, inst, opts).exit_with(EXIT_SOLVER)?;
        println!("{}", report_line(&rep));
        if !rep.passed() {
            failed += 1;
            fs::create_dir_all(&failures_dir).exit_with(EXIT_USAGE)?;
            let path = failures_dir.join(format!("verify-failure-{}.json", sanitize(label)));
            fs::write(&path, to_json(inst)).with_context(|| format!("writing {}", path.display())).exit_with(EXIT_USAGE)?;
            eprintln!("violating instance written to {}", path.display());
        }
        reports.push(rep);
    }
    println!("{} instances, {} failed", corpus.len(), failed);
    if let Some(path) = &output {
        let text = serde_json::to_string_pretty(&reports).expect("reports serialise") + "\n";
        emit(Some(path), &text, &json!({ "seed": seed, "random_corpus": random_corpus, "corrupt_nu": corrupt }))?;
    }
    if failed > 0 {
        return Err(Failure { code: EXIT_INVARIANT, error: anyhow!("{failed} instance(s) violated an invariant") });
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn cmd_reproduce(table: u8, seed: u64, reps: usize, kappa: f64, output: Option<PathBuf>) -> CliResult<()> {
    let setting = if table == 1 { Setting::A } else { Setting::B };
    let rows = reproduce(setting, seed, reps, kappa).exit_with(EXIT_SOLVER)?;
    eprintln!("average BBP gap {:.2}%", 100.0 * average_bbp_gap(&rows));
    emit(output.as_deref(), &rows_to_csv(&rows), &json!({ "table": table, "seed": seed, "reps": reps, "capacity_kappa": kappa }))
}

fn cmd_bid_prices(file: PathBuf, assort: bool, output: Option<PathBuf>) -> CliResult<()> {
    let instance = load(&file)?;
    let text = if assort {
        let table = compute_assort_bid_prices(&instance, choice_of(&instance)?).exit_with(EXIT_SOLVER)?;
        serde_json::to_string(&table).expect("table serialises")
    } else {
        compute_bid_prices(&instance).to_json()
    } + "\n";
    emit(output.as_deref(), &text, &json!({ "input": file.display().to_string(), "assort": assort }))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { setting, mu, sigma, seed, capacity_kappa, horizon_override, spec, assort, output } => {
            cmd_generate(setting, mu, sigma, seed, capacity_kappa, horizon_override, spec, assort, output)
        }
        Command::UpperBound { file, assort, fluid, backend, export_lp } => cmd_upper_bound(file, assort, fluid, backend, export_lp),
        Command::Simulate { file, policy, reps, seed, assort, trace, output } => {
            cmd_simulate(file, policy, reps, seed, assort, trace, output)
        }
        Command::Verify { file, random_corpus, assort_corpus, seed, debug_corrupt_nu, failures_dir, output } => {
            cmd_verify(file, random_corpus, assort_corpus, seed, debug_corrupt_nu, failures_dir, output)
        }
        Command::Reproduce { table, seed, reps, capacity_kappa, output } => cmd_reproduce(table, seed, reps, capacity_kappa, output),
        Command::BidPrices { file, assort, output } => cmd_bid_prices(file, assort, output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
