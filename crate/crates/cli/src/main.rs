//! `stochcert` command-line driver.
//!
//! Exit codes: 0 success/certified, 1 a condition is refuted, 2 invalid
//! input, 3 undecided or precision exhausted.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stochcert::certificate::{
    self, CertError, CertVerdict, Certificate, CheckReport, DeriveReport, OrbitReport, TuneReport,
};
use stochcert::orbit::iterate_critical;
use stochcert::quadratic::quadratic_setup;
use stochcert::tuner::{tune, CandidateInputs, SearchSpace, TuneOptions};
use stochcert::{Decimal, FormulaMode, Precision, Verdict};

const EXIT_OK: u8 = 0;
const EXIT_REFUTED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "stochcert",
    version,
    about = "Certified parameter-exclusion bounds for x^2 - a"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Starting constants and geometry bounds for (delta, iota, eps).
    Derive(Common),
    /// Constant chain and its conditions, without orbit checks.
    Check(Common),
    /// Full pipeline including orbit verification; emits a certificate.
    Certify(Common),
    /// Search the free constants for the smallest certified eta.
    Tune(TuneArgs),
    /// Orbit checks only.
    OrbitVerify(OrbitArgs),
    /// Render a certificate JSON file as a table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Clone)]
struct Common {
    /// delta = 10^-DELTA_EXP
    #[arg(long)]
    delta_exp: Option<String>,
    #[arg(long)]
    iota: Option<String>,
    /// eps = 10^-EPS_EXP
    #[arg(long)]
    eps_exp: Option<String>,
    /// compat or strict
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    s_alpha1: Option<String>,
    #[arg(long)]
    s_gamma1: Option<String>,
    #[arg(long)]
    s_gamma2: Option<String>,
    #[arg(long)]
    s_lambda0: Option<String>,
    /// Working precision of the constant chain.
    #[arg(long)]
    prec_bits: Option<String>,
    /// Working precision of the orbit iteration.
    #[arg(long)]
    orbit_bits: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// INI-style `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Search {
    /// Chain only during the search, orbit checks on the winner.
    Fast,
    /// Orbit checks on every candidate.
    Certifying,
}

#[derive(Args)]
struct TuneArgs {
    /// Each value flag accepts a comma-separated list.
    #[command(flatten)]
    common: Common,
    /// Maximum number of evaluated candidates.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, value_enum, default_value = "fast")]
    search: Search,
    /// Skip orbit verification of the winner in fast mode.
    #[arg(long)]
    no_orbit: bool,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    common: Common,
    /// Write the step-by-step enclosures of the critical orbit here.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Certificate (or check/derive/orbit/tune report) in JSON.
    path: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Undecided(String),
}

impl From<CertError> for Failure {
    fn from(e: CertError) -> Self {
        match e {
            CertError::Invalid(m) => Failure::Invalid(m),
            CertError::Undecided(m) => Failure::Undecided(m),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn invalid(m: impl Into<String>) -> Failure {
    Failure::Invalid(m.into())
}

/// Flag values merged over the config file.
struct Settings {
    values: BTreeMap<String, String>,
    format: Format,
}

impl Settings {
    fn load(c: &Common) -> Res<Self> {
        let mut values = match &c.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("delta_exp", &c.delta_exp),
            ("iota", &c.iota),
            ("eps_exp", &c.eps_exp),
            ("mode", &c.mode),
            ("s_alpha1", &c.s_alpha1),
            ("s_gamma1", &c.s_gamma1),
            ("s_gamma2", &c.s_gamma2),
            ("s_lambda0", &c.s_lambda0),
            ("prec_bits", &c.prec_bits),
            ("orbit_bits", &c.orbit_bits),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v.trim().to_string());
            }
        }
        Ok(Self {
            values,
            format: c.format,
        })
    }

    fn raw(&self, key: &str, default: &str) -> String {
        self.values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    fn parse<T: FromStr>(&self, key: &str, default: &str) -> Res<T> {
        let v = self.raw(key, default);
        v.parse()
            .map_err(|_| invalid(format!("{key}: cannot parse {v:?}")))
    }

    fn list<T: FromStr>(&self, key: &str, default: &str) -> Res<Vec<T>> {
        let v = self.raw(key, default);
        v.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| invalid(format!("{key}: cannot parse {x:?}")))
            })
            .collect()
    }

    fn mode(&self) -> Res<FormulaMode> {
        self.parse("mode", "compat")
    }

    fn precision(&self, key: &str, default: u32) -> Res<Precision> {
        let bits: u32 = self.parse(key, &default.to_string())?;
        Precision::new(bits).map_err(|e| invalid(format!("{key}: {e}")))
    }

    fn chain_prec(&self) -> Res<Precision> {
        self.precision("prec_bits", Precision::chain().bits())
    }

    fn orbit_prec(&self) -> Res<Precision> {
        self.precision("orbit_bits", Precision::orbit().bits())
    }

    fn inputs(&self) -> Res<CandidateInputs> {
        let p = CandidateInputs::reference();
        Ok(CandidateInputs {
            delta_exp: self.parse("delta_exp", &p.delta_exp.to_string())?,
            iota: self.parse("iota", &p.iota.to_string())?,
            eps_exp: self.parse("eps_exp", &p.eps_exp.to_string())?,
            s_alpha1: self.parse("s_alpha1", &p.s_alpha1.to_string())?,
            s_gamma1: self.parse("s_gamma1", &p.s_gamma1.to_string())?,
            s_gamma2: self.parse("s_gamma2", &p.s_gamma2.to_string())?,
            s_lambda0: self.parse("s_lambda0", &p.s_lambda0.to_string())?,
        })
    }

    fn space(&self) -> Res<SearchSpace> {
        let p = CandidateInputs::reference();
        Ok(SearchSpace::new(
            self.list("delta_exp", &p.delta_exp.to_string())?,
            self.list::<Decimal>("iota", &p.iota.to_string())?,
            self.list("eps_exp", &p.eps_exp.to_string())?,
            self.list::<Decimal>("s_alpha1", &p.s_alpha1.to_string())?,
            self.list::<Decimal>("s_gamma1", &p.s_gamma1.to_string())?,
            self.list::<Decimal>("s_gamma2", &p.s_gamma2.to_string())?,
            self.list::<Decimal>("s_lambda0", &p.s_lambda0.to_string())?,
        ))
    }
}

fn read_config(path: &Path) -> Res<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            invalid(format!(
                "{}:{}: expected key = value",
                path.display(),
                i + 1
            ))
        })?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce(&T) -> String) -> Res<()> {
    let s = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Text => text(value),
    };
    let mut out = io::stdout().lock();
    // A closed pipe is not worth a non-zero exit.
    let _ = out.write_all(s.as_bytes());
    let _ = out.flush();
    Ok(())
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Proved => EXIT_OK,
        Verdict::Refuted => EXIT_REFUTED,
        Verdict::Undecided => EXIT_UNDECIDED,
    }
}

fn run_derive(c: &Common) -> Res<u8> {
    let s = Settings::load(c)?;
    let r: DeriveReport = certificate::derive(&s.inputs()?, s.mode()?, s.chain_prec()?)?;
    emit(s.format, &r, certificate::render_derive)?;
    Ok(EXIT_OK)
}

fn run_check(c: &Common) -> Res<u8> {
    let s = Settings::load(c)?;
    let r: CheckReport = certificate::check(&s.inputs()?, s.mode()?, s.chain_prec()?)?;
    if let Some(f) = &r.first_failure {
        eprintln!("first failing condition: {f}");
    }
    emit(s.format, &r, certificate::render_check)?;
    Ok(verdict_code(r.verdict))
}

fn run_certify(c: &Common) -> Res<u8> {
    let s = Settings::load(c)?;
    let cert: Certificate =
        certificate::certify(&s.inputs()?, s.mode()?, s.chain_prec()?, s.orbit_prec()?)?;
    emit(s.format, &cert, certificate::render_certificate)?;
    Ok(match cert.verdict {
        CertVerdict::Certified => EXIT_OK,
        CertVerdict::Failed => EXIT_REFUTED,
        CertVerdict::Undecided => EXIT_UNDECIDED,
    })
}

fn run_tune(t: &TuneArgs) -> Res<u8> {
    let s = Settings::load(&t.common)?;
    let space = s.space()?;
    let (mode, prec, orbit) = (s.mode()?, s.chain_prec()?, s.orbit_prec()?);
    let opts = match t.search {
        Search::Fast => TuneOptions {
            orbit_for_winner: (!t.no_orbit).then_some(orbit),
            ..TuneOptions::default()
        },
        Search::Certifying => TuneOptions {
            orbit_during_search: Some(orbit),
            ..TuneOptions::default()
        },
    };
    let result = tune(&space, t.budget, mode, prec, &opts).map_err(|e| invalid(e.to_string()))?;
    let report = TuneReport::new(&result, mode, prec);
    emit(s.format, &report, certificate::render_tune)?;
    let code = match (&result.best, &result.winner_orbit) {
        (None, _) => EXIT_REFUTED,
        (Some(_), Some(o)) => verdict_code(o.overall()),
        (Some(_), None) => EXIT_OK,
    };
    Ok(code)
}

fn run_orbit(o: &OrbitArgs) -> Res<u8> {
    let s = Settings::load(&o.common)?;
    let (inputs, mode, prec, orbit) = (s.inputs()?, s.mode()?, s.chain_prec()?, s.orbit_prec()?);
    let r: OrbitReport = certificate::orbit_verify(&inputs, mode, prec, orbit)?;
    if let Some(path) = &o.dump_trace {
        let setup = quadratic_setup(&inputs.quadratic(), mode, prec).map_err(CertError::from)?;
        let trace = iterate_critical(&setup.window, setup.start.n, orbit)
            .map_err(|e| Failure::Undecided(e.to_string()))?;
        let file = fs::File::create(path)
            .map_err(|e| invalid(format!("cannot create {}: {e}", path.display())))?;
        trace
            .dump(io::BufWriter::new(file))
            .map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    emit(s.format, &r, certificate::render_orbit_report)?;
    Ok(verdict_code(r.orbit.overall))
}

fn run_report(r: &ReportArgs) -> Res<u8> {
    let text = fs::read_to_string(&r.path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", r.path.display())))?;
    let rendered = if let Ok(c) = serde_json::from_str::<Certificate>(&text) {
        certificate::render_certificate(&c)
    } else if let Ok(c) = serde_json::from_str::<CheckReport>(&text) {
        certificate::render_check(&c)
    } else if let Ok(d) = serde_json::from_str::<DeriveReport>(&text) {
        certificate::render_derive(&d)
    } else if let Ok(o) = serde_json::from_str::<OrbitReport>(&text) {
        certificate::render_orbit_report(&o)
    } else if let Ok(t) = serde_json::from_str::<TuneReport>(&text) {
        certificate::render_tune(&t)
    } else {
        return Err(invalid(format!(
            "{} is not a recognised report",
            r.path.display()
        )));
    };
    let _ = io::stdout().lock().write_all(rendered.as_bytes());
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Derive(c) => run_derive(c),
        Command::Check(c) => run_check(c),
        Command::Certify(c) => run_certify(c),
        Command::Tune(t) => run_tune(t),
        Command::OrbitVerify(o) => run_orbit(o),
        Command::Report(r) => run_report(r),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Undecided(m)) => {
            eprintln!("undecided: {m}");
            ExitCode::from(EXIT_UNDECIDED)
        }
    }
}
