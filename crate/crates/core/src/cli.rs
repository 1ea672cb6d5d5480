//! The `mpt-mdl` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or usage,
//! 3 numerical failure, 4 enumeration refused.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fia::{c_fia, integrate_sqrt_det, DEFAULT_SAMPLES};
use crate::model::MptModel;
use crate::nml::{c_nml_with, Allocation, NmlOptions, DEFAULT_CAP};
use crate::parse::{parse_model, parse_rational};
use crate::reports::{self, CurveKind, EstimateRecord};
use crate::zoo::{self, Preset};

#[derive(Debug, Parser)]
#[command(name = "mpt-mdl", version, about = "MDL complexities and N' for MPT models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// C_FIA(N), or the log-integral alone when no N is given.
    Fia(RunArgs),
    /// Lower-bound N' of a model set.
    Nprime(RunArgs),
    /// Exact C_NML(N) by enumeration.
    Nml(RunArgs),
    /// FIA and NML curves over an N range, with the FIA intersection.
    Curves(RunArgs),
    /// N' for the three built-in model families at the Table 1 proportions.
    Table1(Table1Args),
    /// Built-in models.
    List(FormatArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct FormatArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in model ids or paths to model files, comma separated.
    #[arg(long = "model", visible_alias = "models", value_delimiter = ',', required = true)]
    pub models: Vec<String>,
    /// A sample size or a `start:end:step` range.
    #[arg(long = "N")]
    pub n: Option<NRange>,
    /// Share of the focal tree (`30%`) or `equal`; built-in models only.
    #[arg(long, conflicts_with = "weights")]
    pub preset: Option<Preset>,
    /// Explicit tree weights, comma separated rationals.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<String>>,
    #[arg(long, env = "MPT_MDL_SAMPLES", default_value_t = DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest outcome space NML will enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
    #[command(flatten)]
    pub out: FormatArgs,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, env = "MPT_MDL_SAMPLES", default_value_t = DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: FormatArgs,
}

/// Sample sizes given as `N` or `start:end:step` (inclusive).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NRange(pub Vec<u64>);

impl FromStr for NRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad N {s:?}; use 80 or 3:60:3"));
        let parts: Vec<u64> = s
            .split(':')
            .map(|p| p.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let ns: Vec<u64> = match parts[..] {
            [n] => vec![n],
            [start, end] => (start..=end).collect(),
            [start, end, step] if step > 0 => (start..=end).step_by(step as usize).collect(),
            _ => return Err(bad()),
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::InvalidArgument(format!("N range {s:?} is empty or contains 0")));
        }
        Ok(NRange(ns))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        Error::EnumerationRefused { .. } => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = std::env::var("MPT_MDL_WORKERS").ok().and_then(|v| v.parse().ok()) {
        // the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    let (text, out) = match command {
        Command::Fia(a) => (cmd_fia(a)?, &a.out),
        Command::Nprime(a) => (cmd_nprime(a)?, &a.out),
        Command::Nml(a) => (cmd_nml(a)?, &a.out),
        Command::Curves(a) => (cmd_curves(a)?, &a.out),
        Command::Table1(a) => (cmd_table1(a)?, &a.out),
        Command::List(a) => (cmd_list(a)?, a),
    };
    match &out.output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Resolve a model argument: a built-in id, else a model file.
pub fn load_model(arg: &str, preset: Option<Preset>, weights: Option<&[String]>) -> Result<MptModel> {
    let builtin = zoo::get(arg).ok();
    let model = match builtin {
        Some(entry) => entry.model()?,
        None => {
            let text = std::fs::read_to_string(arg).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::UnknownModel(arg.to_string()),
                _ => e.into(),
            })?;
            parse_model(&text)?
        }
    };
    match (preset, weights) {
        (Some(p), _) => {
            let entry = builtin.ok_or_else(|| {
                Error::InvalidArgument(format!("--preset needs a built-in model; use --weights for {arg}"))
            })?;
            entry.model_with(p)
        }
        (None, Some(w)) => {
            let w = w
                .iter()
                .map(|s| parse_rational(s).ok_or_else(|| Error::InvalidArgument(format!("bad weight {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            model.with_weights(&w)
        }
        (None, None) => Ok(model),
    }
}

fn models_of(a: &RunArgs) -> Result<Vec<MptModel>> {
    a.models
        .iter()
        .map(|m| load_model(m, a.preset, a.weights.as_deref()))
        .collect()
}

fn json_lines<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

fn records_text(records: &[EstimateRecord], format: Format) -> String {
    match format {
        Format::Json => json_lines(records),
        Format::Csv => {
            let mut s = String::from("model,N,kind,value,se\n");
            for r in records {
                let n = r.n.map(|n| n.to_string()).unwrap_or_default();
                let kind = serde_json::to_value(r.estimate.kind).expect("kind serializes");
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.model,
                    n,
                    kind.as_str().unwrap_or_default(),
                    r.estimate.value,
                    r.estimate.std_error
                );
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:<14} {:>7} {:>12} {:>10}\n", "model", "N", "value", "se");
            for r in records {
                let n = r.n.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:<14} {:>7} {:>12.6} {:>10.6}",
                    r.model, n, r.estimate.value, r.estimate.std_error
                );
            }
            s
        }
    }
}

fn cmd_fia(a: &RunArgs) -> Result<String> {
    let models = models_of(a)?;
    let mut records = Vec::new();
    for m in &models {
        let li = integrate_sqrt_det(m, a.samples, a.seed)?;
        match &a.n {
            None => records.push(EstimateRecord {
                model: m.name().to_string(),
                n: None,
                estimate: li,
            }),
            Some(ns) => {
                for &n in &ns.0 {
                    records.push(EstimateRecord {
                        model: m.name().to_string(),
                        n: Some(n),
                        estimate: c_fia(&li, m.free_count(), n as f64)?,
                    });
                }
            }
        }
    }
    Ok(records_text(&records, a.out.format.unwrap_or(Format::Json)))
}

fn cmd_nml(a: &RunArgs) -> Result<String> {
    let ns = a
        .n
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("nml needs --N".into()))?;
    let opts = NmlOptions {
        cap: a.cap,
        ..Default::default()
    };
    let mut records = Vec::new();
    for m in models_of(a)? {
        for &n in &ns.0 {
            let alloc = Allocation::for_model(&m, n)?;
            records.push(EstimateRecord {
                model: m.name().to_string(),
                n: Some(n),
                estimate: c_nml_with(&m, &alloc, &opts)?,
            });
        }
    }
    Ok(records_text(&records, a.out.format.unwrap_or(Format::Json)))
}

fn cmd_nprime(a: &RunArgs) -> Result<String> {
    let models = models_of(a)?;
    let r = reports::n_prime_report(&models, a.samples, a.seed)?;
    Ok(match a.out.format.unwrap_or(Format::Json) {
        Format::Json => json_lines(&[&r]),
        Format::Csv => {
            let mut s = String::from("model_i,model_j,nprime,se\n");
            for i in 0..models.len() {
                for j in i + 1..models.len() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{}",
                        r.models[i], r.models[j], r.result.pairwise[i][j], r.result.per_pair_se[i][j]
                    );
                }
            }
            s
        }
        Format::Table => {
            let mut s = String::new();
            for (i, name) in r.models.iter().enumerate() {
                let li = &r.log_integrals[i];
                let _ = writeln!(
                    s,
                    "{name:<14} S={} ln integral = {:.6} ± {:.6}",
                    r.free_counts[i], li.value, li.std_error
                );
            }
            let _ = writeln!(
                s,
                "N' = {:.1} ± {:.1} (FIA ranks settled from N = {})",
                r.result.lower_bound, r.result.lower_bound_se, r.minimum_integer_n
            );
            s
        }
    })
}

fn cmd_curves(a: &RunArgs) -> Result<String> {
    let ns = a
        .n
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("curves needs an N range".into()))?;
    let opts = NmlOptions {
        cap: a.cap,
        ..Default::default()
    };
    let c = reports::curves(&models_of(a)?, &ns.0, a.samples, a.seed, &opts)?;
    Ok(match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => json_lines(&[&c]),
        Format::Csv | Format::Table => {
            let mut s = String::from("model,N,kind,value,se\n");
            for p in &c.points {
                let kind = match p.kind {
                    CurveKind::Fia => "fia",
                    CurveKind::Nml => "nml",
                };
                let _ = writeln!(s, "{},{},{},{},{}", p.model, p.n, kind, p.value, p.se);
            }
            if let Some(np) = &c.n_prime {
                let _ = writeln!(
                    s,
                    "{},,nprime,{},{}",
                    np.models.join("|"),
                    np.result.lower_bound,
                    np.result.lower_bound_se
                );
            }
            s
        }
    })
}

fn cmd_table1(a: &Table1Args) -> Result<String> {
    let rows = reports::table1(a.samples, a.seed)?;
    Ok(match a.out.format.unwrap_or(Format::Table) {
        Format::Json => json_lines(&rows),
        Format::Csv => {
            let mut s = String::from("family,preset,nprime,se\n");
            for r in &rows {
                for c in &r.cells {
                    let _ = writeln!(s, "{},{},{},{}", r.family, c.preset, c.n_prime, c.std_error);
                }
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:<22}", "");
            for c in &rows[0].cells {
                let _ = write!(s, "{:>16}", c.preset);
            }
            s.push('\n');
            for r in &rows {
                let _ = write!(s, "{:<22}", r.family);
                for c in &r.cells {
                    let _ = write!(s, "{:>16}", format!("{:.0} ± {:.0}", c.n_prime, c.std_error));
                }
                s.push('\n');
            }
            s
        }
    })
}

#[derive(serde::Serialize)]
struct ListRow {
    id: &'static str,
    free_parameters: usize,
    trees: usize,
    constraints: String,
    relation: String,
}

fn cmd_list(a: &FormatArgs) -> Result<String> {
    let mut rows = Vec::new();
    for e in zoo::list() {
        let m = e.model()?;
        let names = m.space().names();
        let mut constraints: Vec<String> = m
            .space()
            .declared_upper_bounds()
            .iter()
            .map(|(&s, b)| format!("{} <= {b}", names[s]))
            .collect();
        constraints.extend(
            m.space()
                .order_constraints()
                .iter()
                .map(|&(i, j)| format!("{} <= {}", names[i], names[j])),
        );
        rows.push(ListRow {
            id: e.id,
            free_parameters: m.free_count(),
            trees: m.trees().len(),
            constraints: constraints.join(", "),
            relation: match e.relation {
                Some(zoo::Relation::NestedIn(o)) => format!("nested in {o}"),
                Some(zoo::Relation::NonNested(o)) => format!("non-nested with {o}"),
                None => String::new(),
            },
        });
    }
    Ok(match a.format.unwrap_or(Format::Table) {
        Format::Json => json_lines(&rows),
        Format::Csv => {
            let mut s = String::from("id,S,trees,constraints,relation\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},\"{}\",{}",
                    r.id, r.free_parameters, r.trees, r.constraints, r.relation
                );
            }
            s
        }
        Format::Table => {
            let mut s = format!("{:<14} {:>2} {:>5}  {:<28} {}\n", "id", "S", "trees", "constraints", "relation");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:<14} {:>2} {:>5}  {:<28} {}",
                    r.id, r.free_parameters, r.trees, r.constraints, r.relation
                );
            }
            s
        }
    })
}
