//! The `usage-testgen` command line.
//!
//! Machine-readable results go to `--out` files (written atomically, and
//! only on success); summaries go to stdout and diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 invalid model or document, 2 infeasible model
//! or unusable sampler, 3 enumeration limit exceeded, 4 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::campaign::{
    coverage_report, export_campaign, generate_campaign, import_campaign, ExportFormat, Strategy,
};
use crate::canon::{g17, Node};
use crate::convergence::{diagnostics, optimize_alpha, point_mass, DEFAULT_ALPHA_BUDGET};
use crate::error::{Error, Result};
use crate::exact::{check_positivity, joint_distribution, merge_parameters, DEFAULT_LIMIT};
use crate::io::{parse_model, serialize_model};
use crate::model::{validate_model, Model};
use crate::sampler::{
    self, initial_state, run_chains, AlphaVector, SamplerConfig, SamplerKind, DEFAULT_BURN_IN_PERIODIC,
    DEFAULT_BURN_IN_RSGS,
};

/// Environment variable overriding the enumeration cap (`--limit` wins).
pub const LIMIT_ENV: &str = "USAGE_TESTGEN_LIMIT";

const USAGE_EXIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "usage-testgen", version, about = "Usage-model-driven test generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model and list every diagnostic.
    Validate {
        model: PathBuf,
    },
    /// Enumerate the exact joint distribution.
    Exact {
        model: PathBuf,
        #[command(flatten)]
        limit: LimitArg,
        /// Number of most probable configurations to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run a Gibbs sampler and export the trace.
    Sample {
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Independent chains; chain i is seeded from the master seed.
        #[arg(long, default_value_t = 1)]
        chains: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Exact kernel diagnostics: stationarity, detailed balance, Dobrushin
    /// coefficient, ergodicity and the contraction table.
    Analyze {
        model: PathBuf,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Seed of the initial state used for the contraction table.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        #[command(flatten)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Search the site-selection probabilities minimizing the Dobrushin
    /// coefficient of the random-scan kernel.
    OptimizeAlpha {
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA_BUDGET)]
        budget: usize,
        #[command(flatten)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Merge parameters into one macro-parameter.
    Merge {
        model: PathBuf,
        /// Comma-separated parameter ids.
        #[arg(long, value_delimiter = ',', required = true)]
        ids: Vec<String>,
        #[command(flatten)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a test campaign.
    Campaign {
        model: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long)]
        size: usize,
        /// Required for the profile strategy.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Coverage report of a structured campaign export.
    Report {
        campaign: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
struct LimitArg {
    /// Enumeration cap (default 200000, or USAGE_TESTGEN_LIMIT).
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    #[arg(long, value_enum, default_value_t = SamplerArg::Rsgs)]
    sampler: SamplerArg,
    /// Comma-separated site probabilities in chain order (rsgs).
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated parameter ids (periodic).
    #[arg(long, value_delimiter = ',')]
    sweep_order: Option<Vec<String>>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long, default_value_t = 1)]
    thin: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SamplerArg {
    Rsgs,
    Periodic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Profile,
    Coverage,
    Topk,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Structured,
    Csv,
}

/// Output of one invocation. Streams are flushed in any case; files are
/// written only when the command succeeded.
#[derive(Default)]
struct Outcome {
    stdout: String,
    stderr: String,
    files: Vec<(PathBuf, String)>,
}

impl Outcome {
    /// Routes a document to `path`, or to stdout when there is none.
    fn emit(&mut self, path: Option<&Path>, doc: String) {
        match path {
            Some(p) => self.files.push((p.to_path_buf(), doc)),
            None => self.stdout.push_str(&doc),
        }
    }
}

/// Runs the CLI on the process arguments and environment.
pub fn main() -> i32 {
    let env_limit = std::env::var(LIMIT_ENV).ok();
    run(
        std::env::args_os(),
        env_limit.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// Runs one invocation. `env_limit` is the value of [`LIMIT_ENV`], if set.
pub fn run<I, T>(args: I, env_limit: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let env_limit = match env_limit.map(str::parse::<usize>).transpose() {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {LIMIT_ENV}: {e}");
            return USAGE_EXIT;
        }
    };
    let mut outcome = Outcome::default();
    let result = dispatch(cli.command, env_limit, &mut outcome).and_then(|()| {
        outcome.files.iter().try_for_each(|(path, doc)| write_atomic(path, doc))
    });
    let _ = out.write_all(outcome.stdout.as_bytes());
    let _ = err.write_all(outcome.stderr.as_bytes());
    match result {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e, err);
            e.exit_code()
        }
    }
}

fn report_error(e: &Error, err: &mut dyn Write) {
    if let Error::Invalid(diags) = e {
        for d in diags {
            let _ = writeln!(err, "{d}");
        }
    }
    let _ = writeln!(err, "error[{}]: {e}", e.code());
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load(path: &Path) -> Result<Model> {
    Model::compile(&parse_model(&read(path)?)?)
}

fn resolve_limit(flag: &LimitArg, env: Option<usize>) -> usize {
    flag.limit.or(env).unwrap_or(DEFAULT_LIMIT)
}

fn sampler_kind(model: &Model, args: &SamplerArgs) -> Result<SamplerKind> {
    match args.sampler {
        SamplerArg::Rsgs => {
            if args.sweep_order.is_some() {
                return Err(Error::Shape("--sweep-order applies to the periodic sampler".into()));
            }
            let alpha = match &args.alpha {
                Some(text) => AlphaVector::parse(text)?,
                None => AlphaVector::uniform(model.len()),
            };
            if alpha.len() != model.len() {
                return Err(Error::Alpha(format!("{} entries for {} parameters", alpha.len(), model.len())));
            }
            Ok(SamplerKind::Rsgs { alpha })
        }
        SamplerArg::Periodic => {
            if args.alpha.is_some() {
                return Err(Error::Shape("--alpha applies to the rsgs sampler".into()));
            }
            let sweep_order = match &args.sweep_order {
                Some(ids) => ids
                    .iter()
                    .map(|id| model.site(id).ok_or_else(|| Error::UnknownRef(format!("parameter `{id}`"))))
                    .collect::<Result<Vec<_>>>()?,
                None => (0..model.len()).collect(),
            };
            Ok(SamplerKind::Periodic { sweep_order })
        }
    }
}

fn sampler_config(model: &Model, args: &SamplerArgs, n: usize, seed: u64) -> Result<SamplerConfig> {
    let kind = sampler_kind(model, args)?;
    let default_burn_in = match kind {
        SamplerKind::Rsgs { .. } => DEFAULT_BURN_IN_RSGS,
        SamplerKind::Periodic { .. } => DEFAULT_BURN_IN_PERIODIC,
    };
    Ok(SamplerConfig {
        kind,
        burn_in: args.burn_in.unwrap_or(default_burn_in),
        thinning: args.thin,
        n_samples: n,
        seed,
    })
}

fn dispatch(command: Command, env_limit: Option<usize>, o: &mut Outcome) -> Result<()> {
    match command {
        Command::Validate { model } => {
            let report = match parse_model(&read(&model)?) {
                Ok(usage) => validate_model(&usage),
                Err(Error::Invalid(diagnostics)) => crate::model::validate::ValidationReport { diagnostics },
                Err(e) => return Err(e),
            };
            let _ = writeln!(o.stdout, "{} errors, {} warnings", report.error_count(), report.warning_count());
            if !report.is_ok() {
                return Err(Error::Invalid(report.diagnostics));
            }
            for d in &report.diagnostics {
                let _ = writeln!(o.stderr, "{d}");
            }
        }
        Command::Exact { model, limit, top, out } => {
            let m = load(&model)?;
            let limit = resolve_limit(&limit, env_limit);
            let d = joint_distribution(&m, limit)?;
            let pos = check_positivity(&d, &m, limit).ok();
            let mut s = String::new();
            let _ = writeln!(s, "model              {}", m.name());
            let _ = writeln!(s, "parameters         {}", m.len());
            let _ = writeln!(s, "product space      {}", m.product_space_size());
            let _ = writeln!(s, "support            {}", d.len());
            let _ = writeln!(s, "zero-mass feasible {}", d.zero_mass_feasible());
            let _ = writeln!(s, "raw mass           {}", g17(d.z_raw()));
            if let Some(p) = &pos {
                let _ = writeln!(s, "positive           {}", if p.holds { "yes" } else { "no" });
            }
            for (site, id) in m.site_ids().enumerate() {
                let cells: Vec<String> = d
                    .marginal(site)
                    .iter()
                    .enumerate()
                    .map(|(c, p)| format!("{}={p:.6}", m.class_id(site, c)))
                    .collect();
                let _ = writeln!(s, "  {id}: {}", cells.join(" "));
            }
            for (x, p) in d.top_k(top) {
                let _ = writeln!(s, "{p:.6}  {}", m.display(&x));
            }
            let configs = d
                .configs()
                .iter()
                .zip(d.probs())
                .map(|(x, p)| {
                    Node::obj()
                        .field("classes", Node::strs(m.class_ids(x)))
                        .field("probability", Node::float(*p))
                        .field("energy", Node::float(d.energy_of(x)))
                        .build()
                })
                .collect();
            let marginals = (0..m.len())
                .map(|site| {
                    Node::obj()
                        .field("param", Node::str(m.site_id(site)))
                        .field("probabilities", Node::Arr(d.marginal(site).into_iter().map(Node::float).collect()))
                        .build()
                })
                .collect();
            let doc = Node::obj()
                .field("model", Node::str(m.name()))
                .field("temperature", Node::float(m.temperature()))
                .field("parameters", Node::strs(m.site_ids()))
                .field("z_raw", Node::float(d.z_raw()))
                .field("support", Node::Int(d.len() as i128))
                .field("zero_mass_feasible", Node::Int(d.zero_mass_feasible() as i128))
                .opt("positive", pos.map(|p| Node::Bool(p.holds)))
                .field("marginals", Node::Arr(marginals))
                .field("configurations", Node::Arr(configs))
                .build()
                .render();
            match out.out {
                Some(path) => {
                    o.stdout = s;
                    o.files.push((path, doc));
                }
                None => o.stdout = s,
            }
        }
        Command::Sample {
            model,
            seed,
            n,
            sampler,
            chains,
            out,
        } => {
            let m = load(&model)?;
            let cfg = sampler_config(&m, &sampler, n, seed)?;
            let doc = if chains <= 1 {
                sampler::run(&m, &cfg)?.to_tsv(&m)
            } else {
                run_chains(&m, &cfg, chains)?
                    .iter()
                    .enumerate()
                    .map(|(i, t)| format!("# chain: {i}\n{}", t.to_tsv(&m)))
                    .collect()
            };
            if out.out.is_some() {
                let _ = writeln!(
                    o.stdout,
                    "{} samples x {} chain(s) from `{}` ({}, seed {seed})",
                    n,
                    chains.max(1),
                    m.name(),
                    cfg.kind.name()
                );
            }
            o.emit(out.out.as_deref(), doc);
        }
        Command::Analyze {
            model,
            sampler,
            seed,
            n_max,
            limit,
            out,
        } => {
            let m = load(&model)?;
            let kind = sampler_kind(&m, &sampler)?;
            let d = joint_distribution(&m, resolve_limit(&limit, env_limit))?;
            let mu0 = point_mass(&d, &initial_state(&m, seed)?)?;
            let report = diagnostics(&m, &d, &kind, &mu0, n_max)?;
            let table = report.table();
            if !report.is_ergodic() {
                o.stderr.push_str(&table);
                let why = if report.ergodicity.irreducible {
                    format!("kernel is periodic (period {})", report.ergodicity.period.unwrap_or(0))
                } else {
                    "kernel is reducible: some feasible configurations cannot reach each other".to_string()
                };
                return Err(Error::NotErgodic(why));
            }
            match out.out {
                Some(path) => {
                    o.stdout = table;
                    o.files.push((path, report.to_node(&m).render()));
                }
                None => o.stdout = report.to_node(&m).render(),
            }
        }
        Command::OptimizeAlpha {
            model,
            budget,
            limit,
            out,
        } => {
            let m = load(&model)?;
            let d = joint_distribution(&m, resolve_limit(&limit, env_limit))?;
            let r = optimize_alpha(&m, &d, budget)?;
            let mut s = String::new();
            for (id, a) in m.site_ids().zip(r.alpha.as_slice()) {
                let _ = writeln!(s, "{id:<16} {a:.6}");
            }
            let _ = writeln!(s, "dobrushin {} (uniform {})", g17(r.dobrushin), g17(r.uniform_dobrushin));
            let _ = writeln!(s, "evaluations {}", r.evaluations);
            let doc = Node::obj()
                .field("model", Node::str(m.name()))
                .field("parameters", Node::strs(m.site_ids()))
                .field("alpha", Node::Arr(r.alpha.as_slice().iter().map(|a| Node::float(*a)).collect()))
                .field("dobrushin", Node::float(r.dobrushin))
                .field("uniform_dobrushin", Node::float(r.uniform_dobrushin))
                .field("evaluations", Node::Int(r.evaluations as i128))
                .build()
                .render();
            match out.out {
                Some(path) => {
                    o.stdout = s;
                    o.files.push((path, doc));
                }
                None => o.stdout = doc,
            }
        }
        Command::Merge { model, ids, limit, out } => {
            let m = load(&model)?;
            let merged = merge_parameters(&m, &ids, resolve_limit(&limit, env_limit))?;
            if out.out.is_some() {
                let _ = writeln!(
                    o.stdout,
                    "merged {} into `{}`: {} -> {} parameters",
                    ids.join(","),
                    crate::exact::macro_id(&ids),
                    m.len(),
                    merged.parameters.len()
                );
            }
            o.emit(out.out.as_deref(), serialize_model(&merged));
        }
        Command::Campaign {
            model,
            strategy,
            size,
            seed,
            format,
            limit,
            out,
        } => {
            let m = load(&model)?;
            let strategy = match strategy {
                StrategyArg::Profile => Strategy::Profile,
                StrategyArg::Coverage => Strategy::Coverage,
                StrategyArg::Topk => Strategy::Topk,
            };
            let seed = match (strategy, seed) {
                (_, Some(s)) => s,
                (Strategy::Profile, None) => {
                    return Err(Error::Shape("the profile strategy requires --seed".into()));
                }
                (_, None) => 0,
            };
            let format = match format {
                Some(FormatArg::Csv) => ExportFormat::Csv,
                Some(FormatArg::Structured) => ExportFormat::Structured,
                None if out.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "csv")) => ExportFormat::Csv,
                None => ExportFormat::Structured,
            };
            let limit = resolve_limit(&limit, env_limit);
            let c = generate_campaign(&m, strategy, size, seed, limit)?;
            if out.out.is_some() {
                let cov = coverage_report(&c, &m, limit);
                let _ = writeln!(
                    o.stdout,
                    "{} cases ({strategy}), {} duplicates eliminated; coverage: class {:.4}, pair {:.4}, requirement {:.4}",
                    c.cases.len(),
                    c.duplicates_eliminated,
                    cov.class_coverage,
                    cov.pair_coverage,
                    cov.requirement_coverage
                );
            }
            o.emit(out.out.as_deref(), export_campaign(&c, &m, format));
        }
        Command::Report {
            campaign,
            model,
            limit,
            out,
        } => {
            let m = load(&model)?;
            let c = import_campaign(&read(&campaign)?, &m)?;
            let r = coverage_report(&c, &m, resolve_limit(&limit, env_limit));
            let mut s = String::new();
            let _ = writeln!(s, "campaign           {} ({}, {} cases)", c.model_name, c.strategy, c.cases.len());
            let _ = writeln!(s, "class coverage     {:.4}", r.class_coverage);
            let _ = writeln!(s, "pair coverage      {:.4}", r.pair_coverage);
            let _ = writeln!(s, "requirement cov.   {:.4}", r.requirement_coverage);
            if !r.exact {
                let _ = writeln!(s, "(structural denominators: model too large to enumerate)");
            }
            for i in r.classes.iter().filter(|i| i.cases == 0) {
                let _ = writeln!(s, "  uncovered class {}={}", i.param, i.class);
            }
            for i in r.requirements.iter() {
                let _ = writeln!(s, "  {} covered by {} case(s)", i.id, i.cases);
            }
            match out.out {
                Some(path) => {
                    o.stdout = s;
                    o.files.push((path, r.to_node().render()));
                }
                None => o.stdout = s,
            }
        }
    }
    Ok(())
}
