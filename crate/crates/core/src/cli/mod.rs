//! Spec and certificate documents and the commands behind the `cmn` binary.
//!
//! Exit codes: 0 pass, 1 fail or inconclusive, 2 invalid input.

mod document;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::covering::Verdict;
use crate::dynamics::{
    auto_loop, empirical_entropy, itinerary, periodic_point, DynamicsError, Itinerary, PeriodicOrbitCertificate,
    Perturbation,
};
use crate::network::{
    conjugacy_audit, theorem1_check, theorem2_check, AuditReport, CheckOptions, CouplingKind, NetworkError,
    NetworkSpec, TheoremReport,
};
use crate::symbolic::entropy_lower_bound;

pub use document::{canonical_json, load_spec, parse_real, DocumentError, Real, SpecDocument, FORMAT_VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

const AUDIT_SAMPLES: usize = 1000;
const AUDIT_TOL: f64 = 1e-9;
const PERIODIC_TOL: f64 = 1e-10;

pub const TOOL: &str = "cmn-verify";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "cmn", version, about = "Covering relations, periodic orbits and entropy bounds for coupled map networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Residual tolerance (audit 1e-9 and periodic orbits 1e-10 by default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Grid points per axis for sampled stretches.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Seed for sampling and perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON document here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network and write a certificate.
    Verify {
        spec: PathBuf,
        /// 1 or 2; defaults to the one matching the coupling kind.
        #[arg(long)]
        theorem: Option<u8>,
    },
    /// Print the entropy lower bound, optionally against a simulation.
    Entropy {
        spec: PathBuf,
        #[arg(long, num_args = 3, value_names = ["DEPTH", "SAMPLES", "SEED"])]
        empirical: Option<Vec<u64>>,
    },
    /// Find a periodic orbit along a loop of product h-sets.
    Periodic {
        spec: PathBuf,
        /// Steps separated by commas, node indices within a step by dots,
        /// one-based: "1.2,2.1".
        #[arg(long = "loop", conflicts_with = "auto")]
        word: Option<String>,
        /// The loop through the first h-sets following the permutations.
        #[arg(long)]
        auto: bool,
        /// Amplitude of a seeded perturbation.
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Print the persistence margin and the binding entry.
    Margin { spec: PathBuf },
    /// Iterate the network from a point and print its itinerary.
    Simulate {
        spec: PathBuf,
        /// Comma-separated initial state.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long)]
        perturb: Option<f64>,
    },
}

/// Everything a verify run establishes about one spec.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateDocument {
    pub tool: String,
    pub version: String,
    pub spec_digest: String,
    pub report: TheoremReport,
    pub audit: AuditReport,
    #[serde(serialize_with = "crate::report::real::opt")]
    pub epsilon: Option<f64>,
    #[serde(serialize_with = "crate::report::real::opt")]
    pub entropy_bound: Option<f64>,
    pub periodic_orbits: Vec<PeriodicOrbitCertificate>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicDocument {
    pub tool: String,
    pub version: String,
    pub spec_digest: String,
    pub orbits: Vec<PeriodicOrbitCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct SimulationDocument {
    spec_digest: String,
    states: Vec<Vec<f64>>,
    itinerary: Itinerary,
}

/// Caps the global thread pool at `CMN_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("CMN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Semantic digest of a loaded spec.
pub fn spec_digest(spec: &NetworkSpec) -> String {
    SpecDocument::from_spec(spec).digest()
}

/// Whether `cert` was produced from a spec with this content.
pub fn certificate_matches(cert_json: &str, spec: &NetworkSpec) -> bool {
    serde_json::from_str::<serde_json::Value>(cert_json)
        .ok()
        .and_then(|v| v.get("spec_digest").and_then(|d| d.as_str()).map(str::to_owned))
        .is_some_and(|d| d == spec_digest(spec))
}

/// Runs a parsed command line, writing the human-readable report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> i32 {
    match execute(cli, out) {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(out, "{message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(m: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INVALID,
            message: format!("error: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::invalid(e)
    }
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        Self::invalid(e)
    }
}

fn load(path: &Path) -> Result<NetworkSpec, Failure> {
    Ok(load_spec(path)?.1)
}

fn options(g: &Global) -> CheckOptions {
    let mut o = CheckOptions::default();
    if let Some(n) = g.grid {
        o.grid = n.max(2);
    }
    o
}

fn check(spec: &NetworkSpec, theorem: Option<u8>, g: &Global) -> Result<TheoremReport, Failure> {
    let t = theorem.unwrap_or(match spec.kind() {
        CouplingKind::TypeI => 1,
        CouplingKind::TypeII => 2,
    });
    let r = match t {
        1 => theorem1_check(spec, &options(g)),
        2 => theorem2_check(spec, &options(g)),
        _ => return Err(Failure::invalid("theorem must be 1 or 2")),
    };
    r.map_err(|e| match e {
        NetworkError::Invalid(rep) => Failure::invalid(format!("invalid spec\n{rep}")),
        e => Failure::invalid(e),
    })
}

fn write_doc<T: Serialize>(g: &Global, doc: &T, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(p) = &g.out {
        std::fs::write(p, canonical_json(doc))?;
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn verdict_code(v: Verdict) -> i32 {
    if v == Verdict::Pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn explain(report: &TheoremReport, out: &mut dyn Write) -> std::io::Result<()> {
    if let Some(b) = report.binding_entry() {
        writeln!(out, "binding entry {} (slack {})", b.index, fmt_real(b.slack))?;
        for m in &b.messages {
            writeln!(out, "  {m}")?;
        }
    }
    for m in &report.messages {
        writeln!(out, "{m}")?;
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Verify { spec, theorem } => {
            let spec = load(spec)?;
            let report = check(&spec, *theorem, g)?;
            let audit = conjugacy_audit(&spec, AUDIT_SAMPLES, g.seed).map_err(Failure::invalid)?;
            let tol = g.tol.unwrap_or(AUDIT_TOL);
            let audit_ok = audit.worst_residual < tol;
            let mut verdict = report.verdict;
            if !audit_ok {
                verdict = verdict.and(Verdict::Fail);
            }
            let mut orbits = Vec::new();
            if report.verdict == Verdict::Pass && report.period.is_some() {
                match auto_loop(&spec).and_then(|lp| periodic_point(&spec, &lp, None)) {
                    Ok(c) => orbits.push(c),
                    Err(e) => writeln!(out, "periodic orbit: {e}")?,
                }
            }
            writeln!(out, "verdict {}", verdict_word(verdict))?;
            writeln!(out, "entries {}", report.entries.len())?;
            writeln!(out, "audit residual {:e} over {} samples", audit.worst_residual, audit.samples)?;
            if !audit_ok {
                writeln!(out, "coupling is not conjugate to its linear model (worst at {})", audit.worst_entry)?;
            }
            if let Some(e) = report.entropy_bound {
                writeln!(out, "entropy_bound {e:.6}")?;
            }
            if let Some(p) = report.period {
                writeln!(out, "period {p}")?;
            }
            if let Some(e) = report.global_eps {
                writeln!(out, "eps* {}", fmt_real(e))?;
            }
            if verdict != Verdict::Pass {
                explain(&report, out)?;
            }
            let doc = CertificateDocument {
                tool: TOOL.into(),
                version: VERSION.into(),
                spec_digest: spec_digest(&spec),
                epsilon: report.global_eps,
                entropy_bound: report.entropy_bound,
                report,
                audit,
                periodic_orbits: orbits,
                verdict,
            };
            write_doc(g, &doc, out)?;
            Ok(verdict_code(verdict))
        }
        Command::Entropy { spec, empirical } => {
            let spec = load(spec)?;
            let report = check(&spec, None, g)?;
            let bound = entropy_lower_bound(&spec.transitions());
            writeln!(out, "bound {bound:.6}")?;
            writeln!(out, "certified {}", verdict_word(report.verdict))?;
            if let Some(e) = empirical {
                let est = empirical_entropy(&spec, e[0] as usize, e[1] as usize, e[2]).map_err(Failure::invalid)?;
                writeln!(out, "estimate {:.6}", est.estimate)?;
                writeln!(out, "gap {:.6}", bound - est.estimate)?;
                writeln!(out, "distinct {}", est.distinct)?;
                writeln!(out, "word_bound {:.6}", est.word_bound)?;
                write_doc(g, &est, out)?;
            }
            if report.verdict != Verdict::Pass {
                explain(&report, out)?;
            }
            Ok(verdict_code(report.verdict))
        }
        Command::Periodic {
            spec,
            word,
            auto,
            perturb,
        } => {
            let spec = load(spec)?;
            let lp = match (word, auto) {
                (Some(w), false) => parse_loop(w, spec.d()).map_err(Failure::invalid)?,
                (None, true) => auto_loop(&spec).map_err(Failure::invalid)?,
                _ => return Err(Failure::invalid("give exactly one of --loop and --auto")),
            };
            let pert = perturb.map(|a| Perturbation::for_spec(&spec, a, g.seed));
            let cert = periodic_point(&spec, &lp, pert.as_ref()).map_err(|e| match e {
                DynamicsError::Inadmissible(_) | DynamicsError::Argument(_) | DynamicsError::Dimension { .. } => {
                    Failure::invalid(e)
                }
                e => Failure {
                    code: EXIT_FAIL,
                    message: format!("no certificate: {e}"),
                },
            })?;
            let tol = g.tol.unwrap_or(PERIODIC_TOL);
            writeln!(out, "period {}", cert.period)?;
            writeln!(out, "point {}", fmt_vec(&cert.point))?;
            writeln!(out, "residual {:e}", cert.residual)?;
            let min_margin = cert.interior_margins.iter().copied().fold(f64::INFINITY, f64::min);
            writeln!(out, "min interior margin {min_margin}")?;
            let ok = cert.residual < tol;
            if !ok {
                writeln!(out, "residual exceeds {tol:e}")?;
            }
            let doc = PeriodicDocument {
                tool: TOOL.into(),
                version: VERSION.into(),
                spec_digest: spec_digest(&spec),
                orbits: vec![cert],
            };
            write_doc(g, &doc, out)?;
            Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::Margin { spec } => {
            let spec = load(spec)?;
            let report = check(&spec, None, g)?;
            match (report.verdict, report.global_eps) {
                (Verdict::Pass, Some(e)) => {
                    writeln!(out, "eps* {}", fmt_real(e))?;
                    if let Some(b) = report.binding_entry() {
                        writeln!(out, "binding entry {}", b.index)?;
                    }
                    write_doc(g, &report, out)?;
                    Ok(EXIT_PASS)
                }
                (v, _) => {
                    writeln!(out, "no margin: the check gives {}", verdict_word(v))?;
                    explain(&report, out)?;
                    Ok(EXIT_FAIL)
                }
            }
        }
        Command::Simulate {
            spec,
            x0,
            steps,
            perturb,
        } => {
            let spec = load(spec)?;
            let x: Vec<f64> = x0
                .split(',')
                .map(parse_real)
                .collect::<Result<_, _>>()
                .map_err(Failure::invalid)?;
            let pert = perturb.map(|a| Perturbation::for_spec(&spec, a, g.seed));
            let it = itinerary(&spec, &x, *steps, pert.as_ref()).map_err(Failure::invalid)?;
            let mut states = vec![x];
            while states.len() < it.steps.len() {
                let next = crate::dynamics::step(&spec, states.last().expect("nonempty"), pert.as_ref())
                    .map_err(Failure::invalid)?;
                states.push(next);
            }
            for (t, (w, s)) in it.steps.iter().zip(&states).enumerate() {
                let w: Vec<String> = w.iter().map(|i| (i + 1).to_string()).collect();
                writeln!(out, "{t} ({}) {}", w.join(","), fmt_vec(s))?;
            }
            match it.escaped_at {
                Some(t) => writeln!(out, "escaped at step {t}")?,
                None => writeln!(out, "stayed {} steps", it.steps.len())?,
            }
            if it.ties > 0 {
                writeln!(out, "ties {}", it.ties)?;
            }
            let doc = SimulationDocument {
                spec_digest: spec_digest(&spec),
                states,
                itinerary: it,
            };
            write_doc(g, &doc, out)?;
            Ok(EXIT_PASS)
        }
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Parses `"1.2,2.1"` into zero-based multi-indices for `d` nodes.
pub fn parse_loop(word: &str, d: usize) -> Result<Vec<Vec<usize>>, String> {
    word.split(',')
        .map(|step| {
            let idx: Vec<usize> = step
                .split('.')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .ok()
                        .and_then(|v| v.checked_sub(1))
                        .ok_or_else(|| format!("{t:?} is not a one-based index"))
                })
                .collect::<Result<_, _>>()?;
            if idx.len() != d {
                return Err(format!("step {step:?} names {} nodes, the network has {d}", idx.len()));
            }
            Ok(idx)
        })
        .collect()
}

#[cfg(test)]
mod tests;
