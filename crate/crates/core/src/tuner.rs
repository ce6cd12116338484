//! Deterministic search over the free inputs for the smallest certified `η`.
//!
//! The search is an exhaustive lexicographic sweep of the grid (up to the
//! budget) followed, if budget remains, by coordinate descent on the mixing
//! fractions with step halving. Candidates are ranked by `eta.hi`, the
//! certified side of the enclosure.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use rug::Float;
use thiserror::Error;

use crate::arith::{Decimal, Precision, RInterval};
use crate::chain::{
    check_conditions, evaluate_chain, ChainError, ConditionReport, FormulaMode, FreeChoices,
};
use crate::orbit::{verify_orbit, OrbitVerdicts};
use crate::quadratic::{quadratic_setup, QuadraticInputs};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TuneError {
    #[error("search space is empty or the budget is zero")]
    EmptySpace,
}

/// One point of the search space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateInputs {
    pub delta_exp: u32,
    pub iota: Decimal,
    pub eps_exp: u32,
    pub s_alpha1: Decimal,
    pub s_gamma1: Decimal,
    pub s_gamma2: Decimal,
    pub s_lambda0: Decimal,
}

impl CandidateInputs {
    pub fn reference() -> Self {
        let d = |m: i128, e: i32| Decimal::new(m, e);
        Self {
            delta_exp: 1000,
            iota: d(8, -1),
            eps_exp: 4990,
            s_alpha1: d(8, -1),
            s_gamma1: d(85, -2),
            s_gamma2: d(8, -1),
            s_lambda0: d(8, -1),
        }
    }

    pub fn quadratic(&self) -> QuadraticInputs {
        QuadraticInputs {
            delta: Decimal::pow10(-(self.delta_exp as i32)),
            iota: self.iota.clone(),
            eps: Decimal::pow10(-(self.eps_exp as i32)),
            s_lambda0: self.s_lambda0.clone(),
        }
    }

    fn fraction_mut(&mut self, k: usize) -> &mut Decimal {
        match k {
            0 => &mut self.s_alpha1,
            1 => &mut self.s_gamma1,
            2 => &mut self.s_gamma2,
            _ => &mut self.s_lambda0,
        }
    }
}

/// Grids per input, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub delta_exp: Vec<u32>,
    pub iota: Vec<Decimal>,
    pub eps_exp: Vec<u32>,
    pub s_alpha1: Vec<Decimal>,
    pub s_gamma1: Vec<Decimal>,
    pub s_gamma2: Vec<Decimal>,
    pub s_lambda0: Vec<Decimal>,
}

fn sorted<T: Ord + Clone>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

impl SearchSpace {
    /// Sorts and de-duplicates every grid.
    pub fn new(
        delta_exp: Vec<u32>,
        iota: Vec<Decimal>,
        eps_exp: Vec<u32>,
        s_alpha1: Vec<Decimal>,
        s_gamma1: Vec<Decimal>,
        s_gamma2: Vec<Decimal>,
        s_lambda0: Vec<Decimal>,
    ) -> Self {
        Self {
            delta_exp: sorted(delta_exp),
            iota: sorted(iota),
            eps_exp: sorted(eps_exp),
            s_alpha1: sorted(s_alpha1),
            s_gamma1: sorted(s_gamma1),
            s_gamma2: sorted(s_gamma2),
            s_lambda0: sorted(s_lambda0),
        }
    }

    /// The single reference configuration.
    pub fn reference_point() -> Self {
        let p = CandidateInputs::reference();
        Self::new(
            vec![p.delta_exp],
            vec![p.iota],
            vec![p.eps_exp],
            vec![p.s_alpha1],
            vec![p.s_gamma1],
            vec![p.s_gamma2],
            vec![p.s_lambda0],
        )
    }

    pub fn count(&self) -> usize {
        [
            self.delta_exp.len(),
            self.iota.len(),
            self.eps_exp.len(),
            self.s_alpha1.len(),
            self.s_gamma1.len(),
            self.s_gamma2.len(),
            self.s_lambda0.len(),
        ]
        .iter()
        .product()
    }

    /// The first `limit` candidates in lexicographic order (last field fastest).
    pub fn candidates(&self, limit: usize) -> Vec<CandidateInputs> {
        let mut out = Vec::new();
        'outer: for d in &self.delta_exp {
            for i in &self.iota {
                for e in &self.eps_exp {
                    for a1 in &self.s_alpha1 {
                        for g1 in &self.s_gamma1 {
                            for g2 in &self.s_gamma2 {
                                for l0 in &self.s_lambda0 {
                                    if out.len() >= limit {
                                        break 'outer;
                                    }
                                    out.push(CandidateInputs {
                                        delta_exp: *d,
                                        iota: i.clone(),
                                        eps_exp: *e,
                                        s_alpha1: a1.clone(),
                                        s_gamma1: g1.clone(),
                                        s_gamma2: g2.clone(),
                                        s_lambda0: l0.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success {
        eta: RInterval,
        report: ConditionReport,
    },
    /// Name of the first failing check, or of the error class that stopped
    /// the evaluation.
    Failure { condition: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub inputs: CandidateInputs,
    pub outcome: Outcome,
}

impl Evaluation {
    pub fn eta(&self) -> Option<&RInterval> {
        match &self.outcome {
            Outcome::Success { eta, .. } => Some(eta),
            Outcome::Failure { .. } => None,
        }
    }
}

fn failure(condition: impl Into<String>) -> Outcome {
    Outcome::Failure {
        condition: condition.into(),
    }
}

fn chain_failure(e: &ChainError) -> String {
    match e {
        ChainError::ChainSingularity { field } => format!("singular:{field}"),
        ChainError::Arith(a) => format!("arith:{}", arith_class(a)),
        ChainError::InvalidEta(_) => "C4".into(),
        ChainError::InvalidInput(_) => "input".into(),
    }
}

fn arith_class(e: &crate::arith::ArithError) -> &'static str {
    use crate::arith::ArithError::*;
    match e {
        DivisionByZeroInterval => "division_by_zero",
        DomainError { .. } => "domain",
        Overflow { .. } => "overflow",
        Underflow { .. } => "underflow",
        AmbiguousFloor { .. } => "ambiguous_floor",
        InvalidPrecision(_) => "precision",
        InvalidInterval => "interval",
        Parse(_) => "parse",
    }
}

fn orbit_failure(v: &OrbitVerdicts) -> Option<&'static str> {
    use crate::chain::Verdict::Proved;
    [
        ("orbit:A2", v.a2 == Proved),
        ("orbit:A3", v.a3 == Proved),
        ("orbit:A4", v.a4 == Proved),
        ("orbit:N1", v.n1_ok == Proved),
        ("orbit:identity", v.identity_ok),
        ("orbit:geometry", v.geometry_consistent),
    ]
    .into_iter()
    .find(|(_, ok)| !ok)
    .map(|(n, _)| n)
}

/// Setup → chain → conditions, and the orbit checks when `orbit_prec` is
/// given. Errors become failures; nothing here panics on bad inputs.
pub fn evaluate_candidate(
    inputs: &CandidateInputs,
    mode: FormulaMode,
    prec: Precision,
    orbit_prec: Option<Precision>,
) -> Evaluation {
    let outcome = (|| {
        let setup = match quadratic_setup(&inputs.quadratic(), mode, prec) {
            Ok(s) => s,
            Err(crate::quadratic::QuadraticError::NonResonanceFailure) => {
                return failure("D3_positive")
            }
            Err(_) => return failure("setup"),
        };
        let choices = match FreeChoices::from_decimals(
            &inputs.s_alpha1,
            &inputs.s_gamma1,
            &inputs.s_gamma2,
            prec,
        ) {
            Ok(c) => c,
            Err(_) => return failure("input"),
        };
        let aux = match evaluate_chain(&setup.start, &setup.geom, &choices, mode, prec) {
            Ok(a) => a,
            Err(e) => return failure(chain_failure(&e)),
        };
        let report = match check_conditions(&setup.start, &setup.geom, &aux) {
            Ok(r) => r,
            Err(e) => return failure(chain_failure(&e)),
        };
        if let Some(c) = report.first_failure() {
            return failure(c.name);
        }
        if let Some(op) = orbit_prec {
            match verify_orbit(&setup.window, &setup.start, &setup.geom, op) {
                Ok(v) => {
                    if let Some(name) = orbit_failure(&v) {
                        return failure(name);
                    }
                }
                Err(_) => return failure("orbit:error"),
            }
        }
        Outcome::Success {
            eta: aux.eta,
            report,
        }
    })();
    Evaluation {
        inputs: inputs.clone(),
        outcome,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    pub frontier_cap: usize,
    /// Verify the orbit conditions during the search (certifying mode).
    pub orbit_during_search: Option<Precision>,
    /// Verify the orbit conditions once on the winner (fast mode).
    pub orbit_for_winner: Option<Precision>,
    /// Initial coordinate-descent step for the fractions.
    pub initial_step: Decimal,
    /// Number of step halvings before descent stops.
    pub max_halvings: u32,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            frontier_cap: 100,
            orbit_during_search: None,
            orbit_for_winner: None,
            initial_step: Decimal::new(5, -2),
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: Option<Evaluation>,
    /// Proved candidates sorted by `eta.hi`, capped.
    pub frontier: Vec<Evaluation>,
    pub evaluated: usize,
    pub failures: BTreeMap<String, usize>,
    pub winner_orbit: Option<OrbitVerdicts>,
}

struct Search<'a> {
    mode: FormulaMode,
    prec: Precision,
    opts: &'a TuneOptions,
    seen: HashSet<CandidateInputs>,
    /// All evaluations in evaluation order.
    log: Vec<Evaluation>,
}

impl Search<'_> {
    /// Evaluates (in parallel) the candidates not seen before, keeping order.
    fn run(&mut self, batch: Vec<CandidateInputs>) -> Vec<Evaluation> {
        let fresh: Vec<CandidateInputs> = batch
            .into_iter()
            .filter(|c| self.seen.insert(c.clone()))
            .collect();
        let (mode, prec, orbit) = (self.mode, self.prec, self.opts.orbit_during_search);
        let evals: Vec<Evaluation> = fresh
            .par_iter()
            .map(|c| evaluate_candidate(c, mode, prec, orbit))
            .collect();
        self.log.extend(evals.iter().cloned());
        evals
    }
}

fn better(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.eta(), b.eta()) {
        (Some(x), Some(y)) => x.hi() < y.hi(),
        (Some(_), None) => true,
        _ => false,
    }
}

fn neighbours(center: &CandidateInputs, step: &Decimal) -> Vec<CandidateInputs> {
    let mut out = Vec::new();
    for k in 0..4 {
        for up in [true, false] {
            let mut c = center.clone();
            let f = c.fraction_mut(k);
            let moved = if up {
                f.checked_add(step)
            } else {
                f.checked_sub(step)
            };
            if let Some(v) = moved.filter(|v| v.in_open_unit()) {
                *f = v;
                out.push(c);
            }
        }
    }
    out
}

pub fn tune(
    space: &SearchSpace,
    budget: usize,
    mode: FormulaMode,
    prec: Precision,
    opts: &TuneOptions,
) -> Result<TuneResult, TuneError> {
    if budget == 0 || space.count() == 0 {
        return Err(TuneError::EmptySpace);
    }
    let mut s = Search {
        mode,
        prec,
        opts,
        seen: HashSet::new(),
        log: Vec::new(),
    };
    let grid = s.run(space.candidates(budget));
    let mut best: Option<Evaluation> = None;
    for e in &grid {
        if best.as_ref().map_or(e.eta().is_some(), |b| better(e, b)) {
            best = Some(e.clone());
        }
    }

    if let Some(mut center) = best.clone() {
        let mut step = opts.initial_step.clone();
        let mut halvings = 0;
        while s.log.len() < budget && halvings <= opts.max_halvings {
            let room = budget - s.log.len();
            let mut cands = neighbours(&center.inputs, &step);
            cands.retain(|c| !s.seen.contains(c));
            cands.truncate(room);
            let evals = s.run(cands);
            let mut improved = false;
            for e in evals {
                if better(&e, &center) {
                    center = e;
                    improved = true;
                }
            }
            if !improved {
                match step.checked_half() {
                    Some(h) => step = h,
                    None => break,
                }
                halvings += 1;
            }
        }
        best = Some(center);
    }

    let mut failures = BTreeMap::new();
    let mut frontier: Vec<Evaluation> = Vec::new();
    for e in &s.log {
        match &e.outcome {
            Outcome::Failure { condition } => *failures.entry(condition.clone()).or_insert(0) += 1,
            Outcome::Success { .. } => frontier.push(e.clone()),
        }
    }
    // Stable sort: ties keep evaluation order.
    frontier.sort_by(|a, b| {
        let (x, y): (&Float, &Float) = (a.eta().unwrap().hi(), b.eta().unwrap().hi());
        x.partial_cmp(y).expect("finite eta")
    });
    frontier.truncate(opts.frontier_cap.max(1));
    let best = frontier
        .first()
        .cloned()
        .or(best.filter(|b| b.eta().is_some()));

    let winner_orbit = match (&best, opts.orbit_for_winner) {
        (Some(b), Some(op)) => quadratic_setup(&b.inputs.quadratic(), mode, prec)
            .ok()
            .and_then(|setup| verify_orbit(&setup.window, &setup.start, &setup.geom, op).ok()),
        _ => None,
    };

    Ok(TuneResult {
        best,
        frontier,
        evaluated: s.log.len(),
        failures,
        winner_orbit,
    })
}
