//! Batch driver: run configuration, verification suites over parameter grids,
//! and text or machine-readable reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;

use crate::bider::{classify, family_map, is_biderivation, solve_biderivations, FamilySpec};
use crate::error::{Error, Result};
use crate::linmap::{
    canonical_derivation, is_derivation, predicted_derivation_dimension, solve_derivations,
    CanonicalDerivation,
};
use crate::postlie::triviality_sweep;
use crate::scalar::Scalar;
use crate::wab::{BasisVector, Element, Params};

pub const SCHEMA_VERSION: &str = "wab-report/1";

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "WAB_WORKERS";

/// Marks the end of the comparable part of a machine report.
const TIMING_HEADER: &str = "# timing (not compared)";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Jacobi,
    Derivations,
    Biderivations,
    Classify,
    Postlie,
    Full,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Jacobi => "jacobi",
            Command::Derivations => "derivations",
            Command::Biderivations => "biderivations",
            Command::Classify => "classify",
            Command::Postlie => "postlie",
            Command::Full => "full",
        }
    }

    fn suites(&self) -> Vec<Command> {
        match self {
            Command::Full => vec![
                Command::Jacobi,
                Command::Derivations,
                Command::Biderivations,
                Command::Classify,
                Command::Postlie,
            ],
            c => vec![*c],
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "jacobi" => Command::Jacobi,
            "derivations" => Command::Derivations,
            "biderivations" => Command::Biderivations,
            "classify" => Command::Classify,
            "postlie" => Command::Postlie,
            "full" => Command::Full,
            _ => return Err(Error::Parse(format!("unknown command `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Machine,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "machine" => Ok(Format::Machine),
            _ => Err(Error::Parse(format!("unknown format `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params_grid: Vec<Params>,
    pub radius: i64,
    pub interior_margin: i64,
    pub k_min: i64,
    pub k_max: i64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Machine report whose comparable payload the run must reproduce.
    pub golden: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Full,
            params_grid: Params::standard_grid(),
            radius: 6,
            interior_margin: 2,
            k_min: -4,
            k_max: 4,
            output_path: None,
            format: Format::Text,
            golden: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interior_margin < 0 || self.radius < self.interior_margin + 2 {
            return Err(Error::Validation(format!(
                "radius {} must be at least interior_margin {} + 2",
                self.radius, self.interior_margin
            )));
        }
        if self.k_min > self.k_max {
            return Err(Error::Validation(format!(
                "empty k range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.params_grid.is_empty() {
            return Err(Error::Validation("empty parameter grid".into()));
        }
        Ok(())
    }
}

fn config_error(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses `a,b; a,b; ...` or `default`.
fn parse_grid(value: &str) -> Result<Vec<Params>> {
    if value == "default" {
        return Ok(Params::standard_grid());
    }
    value
        .split(';')
        .map(|point| {
            let (a, b) = point
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("grid point `{}` is not `a,b`", point.trim())))?;
            Ok(Params::new(a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

/// Parses the flat `key = value` configuration format. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let mut a: Option<(usize, Scalar)> = None;
    let mut b: Option<(usize, Scalar)> = None;
    let mut grid_set = false;
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| config_error(line, text, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        let wrap = |e: Error| config_error(line, key, e.to_string());
        let int = |v: &str| {
            v.parse::<i64>()
                .map_err(|e| config_error(line, key, format!("`{v}`: {e}")))
        };
        match key {
            "command" => config.command = value.parse().map_err(wrap)?,
            "a" => a = Some((line, value.parse().map_err(wrap)?)),
            "b" => b = Some((line, value.parse().map_err(wrap)?)),
            "grid" => {
                config.params_grid = parse_grid(value).map_err(wrap)?;
                grid_set = true;
            }
            "radius" => config.radius = int(value)?,
            "interior_margin" | "margin" => config.interior_margin = int(value)?,
            "k_min" => config.k_min = int(value)?,
            "k_max" => config.k_max = int(value)?,
            "format" => config.format = value.parse().map_err(wrap)?,
            "output" | "output_path" => config.output_path = Some(PathBuf::from(value)),
            "golden" => config.golden = Some(PathBuf::from(value)),
            _ => return Err(config_error(line, key, "unknown key")),
        }
    }
    match (a, b) {
        (Some((la, _)), _) | (_, Some((la, _))) if grid_set => {
            return Err(config_error(la, "grid", "give either a grid or a and b, not both"));
        }
        (Some((_, a)), Some((_, b))) => config.params_grid = vec![Params::new(a, b)],
        (Some((line, _)), None) => return Err(config_error(line, "b", "a is set but b is missing")),
        (None, Some((line, _))) => return Err(config_error(line, "a", "b is set but a is missing")),
        (None, None) => {}
    }
    config.validate()?;
    Ok(config)
}

/// One line of a result block: a record name and ordered fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub name: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    fn new(name: &str) -> Self {
        Record {
            name: name.to_string(),
            fields: Vec::new(),
        }
    }

    fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Block {
    pub params: Params,
    pub command: Command,
    pub pass: bool,
    pub records: Vec<Record>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub schema_version: &'static str,
    pub config: RunConfig,
    pub blocks: Vec<Block>,
    /// Outcome of the golden comparison, when one was requested.
    pub golden_match: Option<bool>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.blocks.iter().all(|b| b.pass) && self.golden_match != Some(false)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => self.render_machine(),
            Format::Text => self.render_text(),
        }
    }

    fn render_machine(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "schema_version={}", self.schema_version);
        let _ = writeln!(
            out,
            "run command={} radius={} interior_margin={} k_min={} k_max={} points={}",
            c.command.name(),
            c.radius,
            c.interior_margin,
            c.k_min,
            c.k_max,
            c.params_grid.len()
        );
        for block in &self.blocks {
            let _ = writeln!(
                out,
                "block suite={} a={} b={} verdict={}",
                block.command.name(),
                block.params.a,
                block.params.b,
                verdict(block.pass)
            );
            for r in &block.records {
                let _ = write!(out, "  {}", r.name);
                for (k, v) in &r.fields {
                    let _ = write!(out, " {k}={}", quote(v));
                }
                out.push('\n');
            }
        }
        let failed = self.blocks.iter().filter(|b| !b.pass).count();
        let blocks_pass = failed == 0;
        let _ = writeln!(
            out,
            "summary blocks={} failed={} verdict={}",
            self.blocks.len(),
            failed,
            verdict(blocks_pass)
        );
        let _ = writeln!(out, "{TIMING_HEADER}");
        for block in &self.blocks {
            let _ = writeln!(
                out,
                "timing suite={} a={} b={} seconds={:.3}",
                block.command.name(),
                block.params.a,
                block.params.b,
                block.seconds
            );
        }
        out
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "{} over {} parameter point(s), R = {}, margin = {}, k in [{}, {}]",
            c.command.name(),
            c.params_grid.len(),
            c.radius,
            c.interior_margin,
            c.k_min,
            c.k_max
        );
        for block in &self.blocks {
            let _ = writeln!(
                out,
                "\n[{}] {} {} ({:.2}s)",
                verdict(block.pass),
                block.command.name(),
                block.params,
                block.seconds
            );
            for r in &block.records {
                let fields: Vec<String> = r.fields.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                let _ = writeln!(out, "    {:<12} {}", r.name, fields.join(", "));
            }
        }
        let failed = self.blocks.iter().filter(|b| !b.pass).count();
        let _ = writeln!(out, "\n{} of {} blocks failed", failed, self.blocks.len());
        if let Some(m) = self.golden_match {
            let _ = writeln!(out, "golden payload {}", if m { "matches" } else { "DIFFERS" });
        }
        let _ = writeln!(out, "overall: {}", verdict(self.pass()));
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(char::is_whitespace) {
        format!("\"{v}\"")
    } else {
        v.to_string()
    }
}

/// The part of a machine report that must be identical across runs.
pub fn comparable_payload(machine: &str) -> &str {
    match machine.find(TIMING_HEADER) {
        Some(i) => &machine[..i],
        None => machine,
    }
}

fn jacobi_block(params: &Params, radius: i64) -> (bool, Vec<Record>) {
    let window: Vec<Element> = BasisVector::window(radius).map(Element::from).collect();
    let mut checked = 0usize;
    let mut first: Option<String> = None;
    let mut nonzero = 0usize;
    for (i, x) in window.iter().enumerate() {
        for (j, y) in window.iter().enumerate().skip(i + 1) {
            for z in window.iter().skip(j + 1) {
                checked += 1;
                let r = params.check_jacobi(x, y, z);
                if !r.is_zero() {
                    nonzero += 1;
                    first.get_or_insert_with(|| format!("({x}, {y}, {z}) -> {r}"));
                }
            }
        }
    }
    let mut rec = Record::new("jacobi")
        .field("radius", radius)
        .field("triples", checked)
        .field("nonzero", nonzero);
    if let Some(f) = first {
        rec = rec.field("first", f);
    }
    (nonzero == 0, vec![rec])
}

fn derivations_block(params: &Params, config: &RunConfig) -> Result<(bool, Vec<Record>)> {
    // the expected counts are stated for Re(a) in [0, 1)
    let normalized = params.normalized();
    let mut records = vec![Record::new("normalized")
        .field("a", &normalized.a)
        .field("b", &normalized.b)];
    let mut pass = true;
    for k in config.k_min..=config.k_max {
        let r = solve_derivations(&normalized, k, config.radius, config.interior_margin)?;
        let predicted = predicted_derivation_dimension(&normalized, k).expect("normalized");
        let ok = r.certified_dimension == predicted;
        pass &= ok;
        let mut rec = Record::new("shift")
            .field("k", k)
            .field("raw", r.raw_dimension)
            .field("certified", r.certified_dimension)
            .field("predicted", predicted);
        if k == 0 {
            for which in CanonicalDerivation::ALL {
                if which.valid_at(&normalized) {
                    let d = canonical_derivation(which, config.radius);
                    let ok = r.contains(&d) && is_derivation(&normalized, &d).is_empty();
                    pass &= ok;
                    rec = rec.field(which.name(), if ok { "in_space" } else { "MISSING" });
                }
            }
        }
        records.push(rec.field("verdict", verdict(ok)));
    }
    Ok((pass, records))
}

fn biderivations_block(params: &Params, config: &RunConfig) -> Result<(bool, Vec<Record>)> {
    let mut records = Vec::new();
    let mut pass = true;
    let unit = || [(1, Scalar::one()), (-2, Scalar::frac(1, 2))];
    let specs = [
        FamilySpec::inner(Scalar::int(3)),
        FamilySpec::psi(unit()),
        FamilySpec::upsilon(unit()),
        FamilySpec::theta(Scalar::int(2)),
    ];
    for spec in specs.iter().filter(|s| s.validate(params).is_ok()) {
        let f = family_map(params, spec, config.radius)?;
        let violations = is_biderivation(params, &f).len();
        pass &= violations == 0;
        records.push(
            Record::new("family")
                .field("kind", spec.kind.name())
                .field("violations", violations),
        );
    }
    for k in config.k_min..=config.k_max {
        let r = solve_biderivations(params, k, config.radius, config.interior_margin)?;
        let violations: usize = r.basis.iter().map(|b| is_biderivation(params, b).len()).sum();
        pass &= violations == 0;
        records.push(
            Record::new("shift")
                .field("k", k)
                .field("raw", r.raw_dimension)
                .field("certified", r.certified_dimension)
                .field("basis_violations", violations),
        );
    }
    Ok((pass, records))
}

fn classify_block(params: &Params, config: &RunConfig) -> Result<(bool, Vec<Record>)> {
    let v = classify(params, config.k_min..=config.k_max, config.radius, config.interior_margin)?;
    let records = v
        .rows
        .iter()
        .map(|row| {
            let families: Vec<&str> = row.predicted.iter().map(|s| s.kind.name()).collect();
            Record::new("shift")
                .field("k", row.k)
                .field("certified", row.certified_dimension)
                .field("predicted", row.predicted.len())
                .field("families", if families.is_empty() { "-".to_string() } else { families.join("+") })
                .field("residual", row.family_residual)
                .field("verdict", verdict(row.pass))
        })
        .collect();
    Ok((v.pass, records))
}

fn postlie_block(params: &Params, config: &RunConfig) -> Result<(bool, Vec<Record>)> {
    let v = triviality_sweep(params, config.k_min..=config.k_max, config.radius, config.interior_margin)?;
    let mut records = vec![Record::new("classification").field("verdict", verdict(v.classification_pass))];
    for row in &v.rows {
        let mut rec = Record::new("direction")
            .field("k", row.k)
            .field("index", row.index)
            .field("kind", format!("{:?}", row.kind).to_lowercase())
            .field("quadratic_vanishes", row.quadratic_vanishes);
        rec = match &row.witness {
            Some(w) => {
                let args: Vec<String> = w.indices.iter().map(|b| b.to_string()).collect();
                rec.field("axiom", w.axiom.name())
                    .field("at", args.join(","))
                    .field("residual", &w.residual)
            }
            None => rec.field("axiom", "NONE"),
        };
        records.push(rec);
    }
    Ok((v.pass, records))
}

fn run_suite(params: &Params, command: Command, config: &RunConfig) -> Block {
    let start = Instant::now();
    let outcome = match command {
        Command::Jacobi => Ok(jacobi_block(params, config.radius)),
        Command::Derivations => derivations_block(params, config),
        Command::Biderivations => biderivations_block(params, config),
        Command::Classify => classify_block(params, config),
        Command::Postlie => postlie_block(params, config),
        Command::Full => unreachable!("full is expanded into suites"),
    };
    let (pass, records) = outcome.unwrap_or_else(|e| (false, vec![Record::new("error").field("message", e)]));
    Block {
        params: params.clone(),
        command,
        pass,
        records,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Validation(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every suite on every grid point. Grid points run in parallel on the
/// current rayon pool; blocks come back in grid order. Solver errors become
/// failing blocks. A golden file is compared but never written.
pub fn run(config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let suites = config.command.suites();
    let jobs: Vec<(Params, Command)> = suites
        .iter()
        .flat_map(|c| config.params_grid.iter().map(move |p| (p.clone(), *c)))
        .collect();
    let blocks: Vec<Block> = jobs
        .par_iter()
        .map(|(p, c)| run_suite(p, *c, config))
        .collect();
    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        blocks,
        golden_match: None,
    };
    if let Some(path) = &config.golden {
        let golden = std::fs::read_to_string(path)?;
        let ours = report.render(Format::Machine);
        report.golden_match = Some(comparable_payload(&golden) == comparable_payload(&ours));
    }
    Ok(report)
}

#[derive(Debug, Parser)]
#[command(name = "wab", about = "Verify derivations, biderivations and post-Lie structures of W(a,b)")]
pub struct Args {
    /// Configuration file (flat `key = value` lines)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// jacobi, derivations, biderivations, classify, postlie or full
    #[arg(long)]
    pub command: Option<String>,
    /// Parameter a, e.g. `1/3` or `1/2+1/1i`
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Parameter b
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long)]
    pub radius: Option<i64>,
    #[arg(long)]
    pub margin: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<i64>,
    /// text or machine
    #[arg(long)]
    pub format: Option<String>,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Machine report to compare against; a mismatch fails the run
    #[arg(long)]
    pub golden: Option<PathBuf>,
}

/// Builds the run configuration: the config file if any, then flags on top.
pub fn config_from_args(args: &Args) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &args.command {
        config.command = c.parse()?;
    }
    match (&args.a, &args.b) {
        (Some(a), Some(b)) => config.params_grid = vec![Params::new(a.parse()?, b.parse()?)],
        (None, None) => {}
        _ => return Err(Error::Validation("--a and --b must be given together".into())),
    }
    if let Some(r) = args.radius {
        config.radius = r;
    }
    if let Some(m) = args.margin {
        config.interior_margin = m;
    }
    if let Some(k) = args.k_min {
        config.k_min = k;
    }
    if let Some(k) = args.k_max {
        config.k_max = k;
    }
    if let Some(f) = &args.format {
        config.format = f.parse()?;
    }
    if let Some(out) = &args.out {
        config.output_path = Some(out.clone());
    }
    if let Some(g) = &args.golden {
        config.golden = Some(g.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Entry point shared by the binary: returns the process exit code
/// (0 all pass, 1 some verdict failed, 2 usage or I/O error).
pub fn main_with_args(args: Args) -> i32 {
    let outcome = (|| -> Result<i32> {
        let config = config_from_args(&args)?;
        let report = match workers_from_env()? {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Validation(e.to_string()))?
                .install(|| run(&config))?,
            None => run(&config)?,
        };
        let text = report.render(config.format);
        match &config.output_path {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(report.exit_code())
    })();
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        2
    })
}
