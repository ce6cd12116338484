//! Serializable records: derived constants, chain checks and certificates.
//!
//! Every real number is written as a decimal string (intervals as
//! `{"lo": …, "hi": …}`), every integer as a string, so certificates are
//! free of binary-float lossiness. Maps are ordered, and nothing depends on
//! time or environment, which makes the output byte-for-byte reproducible.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{ArithError, IntervalRepr, Precision, RInterval};
use crate::chain::{
    check_conditions, evaluate_chain, measure_bound, AuxChain, ChainError, ConditionReport,
    FormulaMode, FreeChoices, Verdict,
};
use crate::orbit::{verify_orbit, OrbitError, OrbitVerdicts};
use crate::quadratic::{quadratic_setup, QuadraticError, QuadraticSetup};
use crate::tuner::{CandidateInputs, Evaluation, Outcome, TuneResult};

pub const SCHEMA_VERSION: &str = "1.0";

/// Fixed remarks attached to every certificate.
pub const NOTES: &[&str] = &[
    "A headline coefficient of 0.97 is sometimes quoted for the reference configuration; it is \
     not reproduced. The certified fraction is 1 - eta (about 0.9173 with eta about 0.08271), \
     which is what the constants actually support.",
    "alpha1 = s_alpha1 * alpha0 + (1 - s_alpha1) * lambda0.",
    "M2 = 2, the exact value of |f''| for x^2 - a.",
    "kappa = 1 stands in for M2/L2 in the distortion bounds of the quadratic family.",
    "alpha0 is the exact upper endpoint of an enclosure of ln(1/delta)/N, so alpha0 >= \
     ln(delta^(-1/N)) holds by construction.",
    "D2, D3 and the non-resonance check use Ntilde = N; the escape condition uses the first \
     n with 2 - c_n(a*) >= 1/4.",
    "compat mode follows the reference worksheet formulas for D1, gamma0, tau and the C1b \
     margin; strict mode follows the displayed equations.",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerically undecided: {0}")]
    Undecided(String),
}

impl From<QuadraticError> for CertError {
    fn from(e: QuadraticError) -> Self {
        match e {
            QuadraticError::InvalidInput(m) => CertError::Invalid(m),
            QuadraticError::Arith(a) => arith(a),
            other => CertError::Undecided(other.to_string()),
        }
    }
}

impl From<ChainError> for CertError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::InvalidInput(m) => CertError::Invalid(m),
            ChainError::Arith(a) => arith(a),
            other => CertError::Undecided(other.to_string()),
        }
    }
}

impl From<OrbitError> for CertError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::InvalidInput(m) => CertError::Invalid(m),
            other => CertError::Undecided(other.to_string()),
        }
    }
}

fn arith(a: ArithError) -> CertError {
    match a {
        ArithError::Parse(_) | ArithError::InvalidPrecision(_) => CertError::Invalid(a.to_string()),
        _ => CertError::Undecided(a.to_string()),
    }
}

/// A named value: an integer (as a string) or an interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Int(String),
    Interval(IntervalRepr),
}

pub type FieldMap = BTreeMap<String, Field>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputsRecord {
    pub delta_exp: String,
    pub iota: String,
    pub eps_exp: String,
    pub s_alpha1: String,
    pub s_gamma1: String,
    pub s_gamma2: String,
    pub s_lambda0: String,
}

impl From<&CandidateInputs> for InputsRecord {
    fn from(c: &CandidateInputs) -> Self {
        Self {
            delta_exp: c.delta_exp.to_string(),
            iota: c.iota.to_string(),
            eps_exp: c.eps_exp.to_string(),
            s_alpha1: c.s_alpha1.to_string(),
            s_gamma1: c.s_gamma1.to_string(),
            s_gamma2: c.s_gamma2.to_string(),
            s_lambda0: c.s_lambda0.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub relation: crate::chain::Relation,
    pub holds: Verdict,
    pub margin: IntervalRepr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub precision_bits: String,
    pub a2: Verdict,
    pub ntilde: Option<String>,
    pub range_len: Option<IntervalRepr>,
    pub a3: Verdict,
    pub a3_margin: IntervalRepr,
    pub a4: Verdict,
    pub a4_margin: IntervalRepr,
    pub d2_direct: IntervalRepr,
    pub d3_direct: IntervalRepr,
    pub geometry_consistent: bool,
    pub n1: Verdict,
    pub derivative_identity: bool,
    pub min_c: IntervalRepr,
    pub overall: Verdict,
}

impl From<&OrbitVerdicts> for OrbitRecord {
    fn from(v: &OrbitVerdicts) -> Self {
        Self {
            precision_bits: v.prec_bits.to_string(),
            a2: v.a2,
            ntilde: v.ntilde.map(|n| n.to_string()),
            range_len: v.range_len.as_ref().map(RInterval::to_repr),
            a3: v.a3,
            a3_margin: v.a3_margin.to_repr(),
            a4: v.a4,
            a4_margin: v.a4_margin.to_repr(),
            d2_direct: v.d2_direct.to_repr(),
            d3_direct: v.d3_direct.to_repr(),
            geometry_consistent: v.geometry_consistent,
            n1: v.n1_ok,
            derivative_identity: v.identity_ok,
            min_c: v.min_c.to_repr(),
            overall: v.overall(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertVerdict {
    Certified,
    Failed,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: String,
    pub family: String,
    pub mode: FormulaMode,
    pub precision_bits: String,
    pub inputs: InputsRecord,
    pub starting_constants: FieldMap,
    pub geometry: FieldMap,
    pub chain: FieldMap,
    pub conditions: Vec<ConditionRecord>,
    pub orbit: Option<OrbitRecord>,
    pub verdict: CertVerdict,
    pub omega_len: IntervalRepr,
    pub one_minus_eta: Option<IntervalRepr>,
    pub measure_bound: Option<IntervalRepr>,
    pub notes: Vec<String>,
}

/// Output of the chain-only `check`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: String,
    pub family: String,
    pub mode: FormulaMode,
    pub precision_bits: String,
    pub inputs: InputsRecord,
    pub starting_constants: FieldMap,
    pub geometry: FieldMap,
    pub chain: FieldMap,
    pub conditions: Vec<ConditionRecord>,
    pub verdict: Verdict,
    pub first_failure: Option<String>,
}

/// Output of `derive`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeriveReport {
    pub schema_version: String,
    pub mode: FormulaMode,
    pub precision_bits: String,
    pub inputs: InputsRecord,
    pub starting_constants: FieldMap,
    pub geometry: FieldMap,
    pub pending: Vec<String>,
}

fn start_map(setup: &QuadraticSetup) -> FieldMap {
    let mut m = FieldMap::new();
    m.insert("N".into(), Field::Int(setup.start.n.to_string()));
    for (k, v) in setup.start.fields() {
        m.insert(k.into(), Field::Interval(v.to_repr()));
    }
    m
}

fn geom_map(setup: &QuadraticSetup) -> FieldMap {
    let mut m = FieldMap::new();
    m.insert("N1".into(), Field::Int(setup.geom.n1.to_string()));
    m.insert("Ntilde".into(), Field::Int(setup.geom.ntilde.to_string()));
    for (k, v) in setup.geom.fields() {
        m.insert(k.into(), Field::Interval(v.to_repr()));
    }
    m
}

fn chain_map(aux: &AuxChain) -> FieldMap {
    aux.fields()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Field::Interval(v.to_repr())))
        .collect()
}

fn condition_records(r: &ConditionReport) -> Vec<ConditionRecord> {
    r.checks
        .iter()
        .map(|c| ConditionRecord {
            name: c.name.to_string(),
            relation: c.relation,
            holds: c.holds,
            margin: c.margin.to_repr(),
        })
        .collect()
}

fn validate(inputs: &CandidateInputs) -> Result<(), CertError> {
    inputs.quadratic().validate()?;
    for (n, s) in [
        ("s_alpha1", &inputs.s_alpha1),
        ("s_gamma1", &inputs.s_gamma1),
        ("s_gamma2", &inputs.s_gamma2),
    ] {
        if !s.in_open_unit() {
            return Err(CertError::Invalid(format!("{n} = {s} is not in (0, 1)")));
        }
    }
    if inputs.delta_exp == 0 || inputs.eps_exp == 0 {
        return Err(CertError::Invalid("exponents must be positive".into()));
    }
    Ok(())
}

pub fn derive(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
) -> Result<DeriveReport, CertError> {
    validate(inputs)?;
    let setup = quadratic_setup(&inputs.quadratic(), mode, prec)?;
    Ok(DeriveReport {
        schema_version: SCHEMA_VERSION.into(),
        mode,
        precision_bits: prec.bits().to_string(),
        inputs: inputs.into(),
        starting_constants: start_map(&setup),
        geometry: geom_map(&setup),
        pending: setup.pending.iter().map(|s| s.to_string()).collect(),
    })
}

struct Evaluated {
    setup: QuadraticSetup,
    aux: AuxChain,
    report: ConditionReport,
}

fn evaluate(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
) -> Result<Evaluated, CertError> {
    validate(inputs)?;
    let setup = quadratic_setup(&inputs.quadratic(), mode, prec)?;
    let choices =
        FreeChoices::from_decimals(&inputs.s_alpha1, &inputs.s_gamma1, &inputs.s_gamma2, prec)?;
    let aux = evaluate_chain(&setup.start, &setup.geom, &choices, mode, prec)?;
    let report = check_conditions(&setup.start, &setup.geom, &aux)?;
    Ok(Evaluated { setup, aux, report })
}

pub fn check(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
) -> Result<CheckReport, CertError> {
    let ev = evaluate(inputs, mode, prec)?;
    Ok(CheckReport {
        schema_version: SCHEMA_VERSION.into(),
        family: "quadratic".into(),
        mode,
        precision_bits: prec.bits().to_string(),
        inputs: inputs.into(),
        starting_constants: start_map(&ev.setup),
        geometry: geom_map(&ev.setup),
        chain: chain_map(&ev.aux),
        conditions: condition_records(&ev.report),
        verdict: ev.report.overall(),
        first_failure: ev.report.first_failure().map(|c| c.name.to_string()),
    })
}

/// The full pipeline: setup, chain, conditions, orbit checks, bound.
pub fn certify(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
    orbit_prec: Precision,
) -> Result<Certificate, CertError> {
    let ev = evaluate(inputs, mode, prec)?;
    let orbit = verify_orbit(
        &ev.setup.window,
        &ev.setup.start,
        &ev.setup.geom,
        orbit_prec,
    )?;
    let verdict = match ev.report.overall().and(orbit.overall()) {
        Verdict::Proved => CertVerdict::Certified,
        Verdict::Refuted => CertVerdict::Failed,
        Verdict::Undecided => CertVerdict::Undecided,
    };
    let omega = ev.setup.window.omega_len().clone();
    let (one_minus_eta, bound) = if verdict == CertVerdict::Certified {
        let one = RInterval::one(prec);
        (
            Some((one - &ev.aux.eta).to_repr()),
            Some(measure_bound(&ev.aux.eta, &omega)?.to_repr()),
        )
    } else {
        (None, None)
    };
    Ok(Certificate {
        schema_version: SCHEMA_VERSION.into(),
        family: "quadratic".into(),
        mode,
        precision_bits: prec.bits().to_string(),
        inputs: inputs.into(),
        starting_constants: start_map(&ev.setup),
        geometry: geom_map(&ev.setup),
        chain: chain_map(&ev.aux),
        conditions: condition_records(&ev.report),
        orbit: Some((&orbit).into()),
        verdict,
        omega_len: omega.to_repr(),
        one_minus_eta,
        measure_bound: bound,
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Output of `orbit_verify`: the orbit checks alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub schema_version: String,
    pub inputs: InputsRecord,
    pub n: String,
    pub orbit: OrbitRecord,
}

pub fn orbit_verify(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
    orbit_prec: Precision,
) -> Result<OrbitReport, CertError> {
    validate(inputs)?;
    let setup = quadratic_setup(&inputs.quadratic(), mode, prec)?;
    let v = verify_orbit(&setup.window, &setup.start, &setup.geom, orbit_prec)?;
    Ok(OrbitReport {
        schema_version: SCHEMA_VERSION.into(),
        inputs: inputs.into(),
        n: setup.start.n.to_string(),
        orbit: (&v).into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub inputs: InputsRecord,
    /// `eta` on success, absent on failure.
    pub eta: Option<IntervalRepr>,
    pub failure: Option<String>,
}

impl From<&Evaluation> for CandidateRecord {
    fn from(e: &Evaluation) -> Self {
        let (eta, failure) = match &e.outcome {
            Outcome::Success { eta, .. } => (Some(eta.to_repr()), None),
            Outcome::Failure { condition } => (None, Some(condition.clone())),
        };
        Self {
            inputs: (&e.inputs).into(),
            eta,
            failure,
        }
    }
}

/// Serializable form of a tuning run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneReport {
    pub schema_version: String,
    pub mode: FormulaMode,
    pub precision_bits: String,
    pub best: Option<CandidateRecord>,
    pub frontier: Vec<CandidateRecord>,
    pub evaluated: String,
    pub failures: BTreeMap<String, String>,
    pub winner_orbit: Option<OrbitRecord>,
}

impl TuneReport {
    pub fn new(r: &TuneResult, mode: FormulaMode, prec: Precision) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            mode,
            precision_bits: prec.bits().to_string(),
            best: r.best.as_ref().map(Into::into),
            frontier: r.frontier.iter().map(Into::into).collect(),
            evaluated: r.evaluated.to_string(),
            failures: r
                .failures
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            winner_orbit: r.winner_orbit.as_ref().map(Into::into),
        }
    }
}

/// Display order for the text report; anything else follows alphabetically.
const ORDER: &[&str] = &[
    "C1",
    "lambda",
    "N",
    "delta",
    "iota",
    "alpha0",
    "lambda0",
    "alpha1",
    "N1",
    "Ntilde",
    "D1",
    "D2",
    "D3",
    "M1",
    "M2",
    "L1",
    "L2",
    "I_len",
    "kappa",
    "gamma0",
    "gamma1max",
    "gamma1",
    "gamma2",
    "gamma",
    "Dhat",
    "Dhathat",
    "Dist",
    "Gamma1",
    "k0",
    "tau1",
    "tau0",
    "C3",
    "C3tilde",
    "alpha1_tau1",
    "gamma1min",
    "tau",
    "alpha",
    "etatilde",
    "eta",
    "NR",
];

fn render_field(f: &Field, prec: Precision, digits: usize) -> String {
    match f {
        Field::Int(s) => s.clone(),
        Field::Interval(r) => render_repr(r, prec, digits),
    }
}

fn render_repr(r: &IntervalRepr, prec: Precision, digits: usize) -> String {
    match RInterval::from_repr(r, prec) {
        Ok(x) => x.to_decimal_string(digits),
        Err(_) => format!("[{}, {}]", r.lo, r.hi),
    }
}

fn render_maps(out: &mut String, maps: &[&FieldMap], prec: Precision) {
    let mut merged: BTreeMap<&str, &Field> = BTreeMap::new();
    for m in maps {
        for (k, v) in m.iter() {
            merged.insert(k.as_str(), v);
        }
    }
    let mut keys: Vec<&str> = ORDER
        .iter()
        .copied()
        .filter(|k| merged.contains_key(k))
        .collect();
    keys.extend(merged.keys().copied().filter(|k| !ORDER.contains(k)));
    for k in keys {
        let _ = writeln!(out, "  {:<14} {}", k, render_field(merged[k], prec, 15));
    }
}

fn render_conditions(out: &mut String, conds: &[ConditionRecord], prec: Precision) {
    let _ = writeln!(out, "conditions");
    for c in conds {
        let _ = writeln!(
            out,
            "  {:<20} {:<9} margin {}",
            c.name,
            c.holds.as_str(),
            render_repr(&c.margin, prec, 15)
        );
    }
}

fn prec_of(bits: &str) -> Precision {
    bits.parse::<u32>()
        .ok()
        .and_then(|b| Precision::new(b).ok())
        .unwrap_or_else(Precision::chain)
}

fn render_inputs(out: &mut String, i: &InputsRecord, mode: FormulaMode, bits: &str) {
    let _ = writeln!(
        out,
        "inputs: delta = 1e-{}, iota = {}, eps = 1e-{}, s_alpha1 = {}, s_gamma1 = {}, \
         s_gamma2 = {}, s_lambda0 = {}",
        i.delta_exp, i.iota, i.eps_exp, i.s_alpha1, i.s_gamma1, i.s_gamma2, i.s_lambda0
    );
    let _ = writeln!(out, "mode: {}, precision: {} bits", mode.as_str(), bits);
}

fn render_orbit(out: &mut String, o: &OrbitRecord) {
    let oprec = prec_of(&o.precision_bits);
    let _ = writeln!(out, "orbit ({} bits)", o.precision_bits);
    let _ = writeln!(
        out,
        "  A2 {} (Ntilde = {}), A3 {}, A4 {}, N1 {}, identity {}, geometry {}",
        o.a2.as_str(),
        o.ntilde.as_deref().unwrap_or("none"),
        o.a3.as_str(),
        o.a4.as_str(),
        o.n1.as_str(),
        o.derivative_identity,
        o.geometry_consistent
    );
    let _ = writeln!(
        out,
        "  A3 margin      {}",
        render_repr(&o.a3_margin, oprec, 15)
    );
    let _ = writeln!(
        out,
        "  A4 margin      {}",
        render_repr(&o.a4_margin, oprec, 15)
    );
    let _ = writeln!(
        out,
        "  D2 direct      {}",
        render_repr(&o.d2_direct, oprec, 15)
    );
    let _ = writeln!(
        out,
        "  D3 direct      {}",
        render_repr(&o.d3_direct, oprec, 15)
    );
    let _ = writeln!(out, "  min c_n        {}", render_repr(&o.min_c, oprec, 15));
}

/// Human-readable table with 15 significant digits per value.
pub fn render_certificate(c: &Certificate) -> String {
    let prec = prec_of(&c.precision_bits);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "certificate (schema {}), family {}",
        c.schema_version, c.family
    );
    render_inputs(&mut out, &c.inputs, c.mode, &c.precision_bits);
    let _ = writeln!(out, "constants");
    render_maps(
        &mut out,
        &[&c.starting_constants, &c.geometry, &c.chain],
        prec,
    );
    render_conditions(&mut out, &c.conditions, prec);
    if let Some(o) = &c.orbit {
        render_orbit(&mut out, o);
    }
    let _ = writeln!(out, "verdict: {:?}", c.verdict);
    if let Some(m) = &c.one_minus_eta {
        let _ = writeln!(out, "1 - eta:        {}", render_repr(m, prec, 15));
    }
    if let Some(m) = &c.measure_bound {
        let _ = writeln!(out, "measure bound:  {}", render_repr(m, prec, 15));
    }
    for n in &c.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

pub fn render_check(c: &CheckReport) -> String {
    let prec = prec_of(&c.precision_bits);
    let mut out = String::new();
    render_inputs(&mut out, &c.inputs, c.mode, &c.precision_bits);
    let _ = writeln!(out, "constants");
    render_maps(
        &mut out,
        &[&c.starting_constants, &c.geometry, &c.chain],
        prec,
    );
    render_conditions(&mut out, &c.conditions, prec);
    let _ = writeln!(out, "verdict: {}", c.verdict.as_str());
    if let Some(f) = &c.first_failure {
        let _ = writeln!(out, "first failing condition: {f}");
    }
    out
}

pub fn render_derive(d: &DeriveReport) -> String {
    let prec = prec_of(&d.precision_bits);
    let mut out = String::new();
    render_inputs(&mut out, &d.inputs, d.mode, &d.precision_bits);
    render_maps(&mut out, &[&d.starting_constants, &d.geometry], prec);
    let _ = writeln!(out, "pending orbit verification: {}", d.pending.join(", "));
    out
}

pub fn render_orbit_report(r: &OrbitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "N = {}", r.n);
    render_orbit(&mut out, &r.orbit);
    let _ = writeln!(out, "verdict: {}", r.orbit.overall.as_str());
    out
}

fn render_candidate(out: &mut String, c: &CandidateRecord, prec: Precision) {
    let i = &c.inputs;
    let tail = match (&c.eta, &c.failure) {
        (Some(e), _) => format!("eta {}", render_repr(e, prec, 15)),
        (None, Some(f)) => format!("failed at {f}"),
        (None, None) => String::new(),
    };
    let _ = writeln!(
        out,
        "  delta 1e-{} iota {} eps 1e-{} s_alpha1 {} s_gamma1 {} s_gamma2 {} s_lambda0 {}  {}",
        i.delta_exp, i.iota, i.eps_exp, i.s_alpha1, i.s_gamma1, i.s_gamma2, i.s_lambda0, tail
    );
}

pub fn render_tune(t: &TuneReport) -> String {
    let prec = prec_of(&t.precision_bits);
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}, evaluated: {}", t.mode.as_str(), t.evaluated);
    match &t.best {
        Some(b) => {
            let _ = writeln!(out, "best");
            render_candidate(&mut out, b, prec);
        }
        None => {
            let _ = writeln!(out, "no candidate passed every check");
        }
    }
    if !t.frontier.is_empty() {
        let _ = writeln!(out, "frontier ({})", t.frontier.len());
        for c in &t.frontier {
            render_candidate(&mut out, c, prec);
        }
    }
    if !t.failures.is_empty() {
        let _ = writeln!(out, "failures");
        for (k, v) in &t.failures {
            let _ = writeln!(out, "  {k:<20} {v}");
        }
    }
    if let Some(o) = &t.winner_orbit {
        render_orbit(&mut out, o);
    }
    out
}
