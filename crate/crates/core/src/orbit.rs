//! Interval iteration of the critical orbit over the whole parameter window.
//!
//! Conventions: `c₀(a) = −a`, `c_{n+1} = c_n² − a`, `(fⁿ)′(c₀) = ∏_{j<n} 2c_j`,
//! `∂c₀/∂a = −1`, `∂c_{n+1}/∂a = 2c_n·∂c_n/∂a − 1`. With these,
//! `∂c_n/∂a = −(fⁿ)′(c₀)·(1 + Σ_{i≤n} 1/(fⁱ)′(c₀))`, which is checked at
//! every step in absolute value.
//!
//! The iteration runs at high precision, but the stored trace is re-rounded
//! outward to [`TRACE_BITS`] bits with the true enclosure width recorded
//! separately; a full-precision trace of the reference window would need
//! hundreds of megabytes.

use std::io::{self, Write};

use rug::float::Round;
use rug::Float;
use thiserror::Error;

use crate::arith::{format_float, ArithError, Precision, RInterval};
use crate::chain::{GeometryBounds, StartingConstants, Verdict};
use crate::quadratic::FamilyWindow;

/// Precision of the stored trace values.
pub const TRACE_BITS: u32 = 256;

/// Automatic precision doublings after [`OrbitError::PrecisionExhausted`].
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("enclosure of c_{n} is wider than 1/2 (width ≈ {width:e})")]
    PrecisionExhausted { n: u64, width: f64, retryable: bool },
    #[error("no escape found up to n = {0}")]
    NotFound(u64),
    #[error("partial sum {0} of the non-resonance series is not bounded away from zero")]
    Undecided(u64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

type Result<T> = std::result::Result<T, OrbitError>;

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitStep {
    pub n: u64,
    pub c: RInterval,
    pub dprod: RInterval,
    pub csum: RInterval,
    pub cprime: RInterval,
    /// Upper bound on the full-precision width of `c`.
    pub c_width: Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub prec_bits: u32,
    pub steps: Vec<OrbitStep>,
    /// First step where `|c′_n|` and `|csum_n·dprod_n|` failed to intersect.
    pub identity_failure: Option<u64>,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn identity_holds(&self) -> bool {
        self.identity_failure.is_none()
    }

    /// `n <tab> lo <tab> hi` per step.
    pub fn dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.steps {
            writeln!(
                w,
                "{}\t{}\t{}",
                s.n,
                format_float(s.c.lo(), 40, Round::Down),
                format_float(s.c.hi(), 40, Round::Up)
            )?;
        }
        Ok(())
    }
}

fn point(x: &Float) -> RInterval {
    RInterval::point(x.clone()).expect("finite")
}

fn width_f64(x: &RInterval) -> f64 {
    x.width().to_f64()
}

/// A-priori bound `(10/9)·4^{n−1}·3ε` on the box width of `c_n`,
/// including the slack from treating `a` independently at every step.
fn apriori_width(eps: &RInterval, n: u64) -> f64 {
    let e = Float::with_val_round(64, eps.hi(), Round::Up).0;
    let shift = 2 * (n.saturating_sub(1)).min(1 << 28) as i32;
    let mut b = Float::with_val(64, &e * 3u32);
    b <<= shift;
    b.to_f64() * 10.0 / 9.0
}

/// Iterate over the parameter box `a`, requiring widths `≤ 1/2` for
/// `n ≤ limit_until`.
fn iterate_box(
    a: &RInterval,
    n_max: u64,
    prec: Precision,
    limit_until: u64,
    eps_hint: Option<&RInterval>,
) -> Result<OrbitTrace> {
    if n_max == 0 {
        return Err(OrbitError::InvalidInput("n_max must be at least 1".into()));
    }
    let bits = prec.bits();
    let a = a.round_to(bits);
    let one = RInterval::one(prec);
    let half = one.mul_pow2(-1);
    let quarter = one.mul_pow2(-2);
    let two = RInterval::from_int(2, prec);
    let bound = if a.is_positive() && *a.hi() <= 2 {
        two.neg().hull(&two)
    } else {
        RInterval::entire(prec)
    };

    let mut c = a.neg();
    let mut dprod = one.clone();
    let mut csum = one.clone();
    let mut cprime = one.neg();
    let mut steps = Vec::with_capacity(n_max as usize);
    let mut identity_failure = None;

    for n in 1..=n_max {
        let next_c = if n == 1 {
            // a² − a = (a − ½)² − ¼, free of the dependency on a.
            (&a - &half).sqr() - &quarter
        } else {
            c.sqr() - &a
        };
        // For 0 < a ≤ 2 the orbit of the critical value stays in [−a, a] ⊂ [−2, 2].
        let next_c = match next_c.intersect(&bound) {
            Some(x) => x,
            None => next_c,
        };
        let two_c = c.mul_pow2(1);
        cprime = &two_c * &cprime - &one;
        dprod = &dprod * &two_c;
        // A derivative product straddling zero leaves the series unbounded.
        csum = match dprod.recip() {
            Ok(r) => csum + r,
            Err(_) => RInterval::entire(prec),
        };
        c = next_c;

        if !(dprod.is_finite() && cprime.is_finite() && c.is_finite()) {
            return Err(ArithError::Overflow {
                op: "iterate_critical",
            }
            .into());
        }
        let w = c.width();
        if n <= limit_until && w > 0.5 {
            let retryable = eps_hint.is_some_and(|e| apriori_width(e, n) < 0.25);
            return Err(OrbitError::PrecisionExhausted {
                n,
                width: w.to_f64(),
                retryable,
            });
        }
        if identity_failure.is_none() && !cprime.abs().intersects(&(&csum * &dprod).abs()) {
            identity_failure = Some(n);
        }
        steps.push(OrbitStep {
            n,
            c: c.round_to(TRACE_BITS),
            dprod: dprod.round_to(TRACE_BITS),
            csum: csum.round_to(TRACE_BITS),
            cprime: cprime.round_to(TRACE_BITS),
            c_width: Float::with_val_round(64, &w, Round::Up).0,
        });
    }
    Ok(OrbitTrace {
        prec_bits: bits,
        steps,
        identity_failure,
    })
}

/// Critical-orbit trace over the box `a ∈ [a*, 2]`.
pub fn iterate_critical(window: &FamilyWindow, n_max: u64, prec: Precision) -> Result<OrbitTrace> {
    iterate_critical_box(&window_box(window, prec), n_max, prec)
}

/// Same as [`iterate_critical`] for an arbitrary parameter box.
pub fn iterate_critical_box(a: &RInterval, n_max: u64, prec: Precision) -> Result<OrbitTrace> {
    iterate_box(a, n_max, prec, u64::MAX, None)
}

fn window_box(window: &FamilyWindow, prec: Precision) -> RInterval {
    let two = RInterval::from_int(2, prec);
    let a_star = window.eps_decimal().to_interval(prec);
    (&two - &a_star).hull(&two)
}

/// `min_{1≤n≤N} (inf|c_n| − e^{−α₀n})`.
pub fn verify_a3(trace: &OrbitTrace, alpha0: &RInterval, n: u64) -> Result<RInterval> {
    if (trace.len() as u64) < n || n == 0 {
        return Err(OrbitError::InvalidInput(format!(
            "trace of length {} does not reach N = {n}",
            trace.len()
        )));
    }
    let prec = Precision::new(alpha0.prec().max(TRACE_BITS))?;
    let decay = alpha0.neg().exp()?;
    let mut factor = RInterval::one(prec);
    let mut margin: Option<RInterval> = None;
    for s in &trace.steps[..n as usize] {
        factor = &factor * &decay;
        let inf_abs = s.c.abs();
        let low = point(inf_abs.lo());
        let m = low - &factor;
        margin = Some(match margin {
            None => m,
            Some(prev) => prev.min(&m),
        });
    }
    Ok(margin.expect("n ≥ 1"))
}

/// Outcome of the escape search for (A2).
#[derive(Debug, Clone, PartialEq)]
pub struct Escape {
    pub ntilde: u64,
    /// Enclosure of `2 − c_Ñ(a*)`, a lower bound for the length of the
    /// parameter image `{c_Ñ(a) : a ∈ Ω}`.
    pub range_len: RInterval,
}

/// Smallest `n` with `2 − c_n(a*) ≥ 1/4`, by point iteration at `a*`.
pub fn find_ntilde_escape(window: &FamilyWindow, prec: Precision, limit: u64) -> Result<Escape> {
    let two = RInterval::from_int(2, prec);
    let a = &two - window.eps_decimal().to_interval(prec);
    let quarter = RInterval::one(prec).mul_pow2(-2);
    let mut c = a.neg();
    for n in 1..=limit {
        c = c.sqr() - &a;
        if width_f64(&c) > 0.5 {
            return Err(OrbitError::PrecisionExhausted {
                n,
                width: width_f64(&c),
                retryable: true,
            });
        }
        let gap = &two - &c;
        if *gap.lo() >= *quarter.hi() {
            return Ok(Escape {
                ntilde: n,
                range_len: gap,
            });
        }
    }
    Err(OrbitError::NotFound(limit))
}

/// Result of the non-resonance check.
#[derive(Debug, Clone, PartialEq)]
pub struct NonResonance {
    pub margin: RInterval,
    pub d2_direct: RInterval,
    pub d3_direct: RInterval,
}

/// Checks `csum_k ≠ 0` for `k ≤ Ñ`, the margin
/// `1 − |csum_Ñ − 1| − e^{−λ₀(Ñ+1)}/(1 − e^{−λ₀})`, and the directly
/// computed distortion constants `D₂` and `D₃`.
pub fn verify_a4_nonresonance(
    trace: &OrbitTrace,
    ntilde: u64,
    lambda0: &RInterval,
) -> Result<NonResonance> {
    if ntilde == 0 || (trace.len() as u64) < ntilde {
        return Err(OrbitError::InvalidInput(format!(
            "trace of length {} does not reach Ntilde = {ntilde}",
            trace.len()
        )));
    }
    let prec = Precision::new(lambda0.prec().max(TRACE_BITS))?;
    let one = RInterval::one(prec);
    let mut max_abs: Option<RInterval> = None;
    let mut min_abs: Option<RInterval> = None;
    for s in &trace.steps[..ntilde as usize] {
        if s.csum.contains_zero() {
            return Err(OrbitError::Undecided(s.n));
        }
        let a = s.csum.abs();
        max_abs = Some(max_abs.map_or(a.clone(), |m| m.max(&a)));
        min_abs = Some(min_abs.map_or(a.clone(), |m| m.min(&a)));
    }
    let last = &trace.steps[ntilde as usize - 1].csum;
    let tail = (RInterval::from_int(ntilde as i64 + 1, prec) * lambda0)
        .neg()
        .exp()?
        .div(&lambda0.neg().exp_m1()?.neg())?;
    let margin = &one - (last - &one).abs() - &tail;
    let d2 = max_abs.expect("ntilde ≥ 1").max(&(last.abs() + &tail));
    let lower = min_abs.expect("ntilde ≥ 1").min(&margin);
    if !lower.is_positive() {
        return Err(OrbitError::Undecided(ntilde));
    }
    Ok(NonResonance {
        margin,
        d2_direct: d2,
        d3_direct: one.div(&lower)?,
    })
}

/// Iterates `Δ₀ = [−a_hi, δ² − a_lo]` under the box map and checks that the
/// first `N₁ + 1` images (`i = 0..=N₁`) keep distance at least 1 from 0.
/// A failure is confirmed by a point orbit from `x² = δ²(1 − 2⁻³²)` at
/// `a = 2`, which lies in every window.
pub fn verify_n1(
    window: &FamilyWindow,
    delta: &RInterval,
    n1: u64,
    prec: Precision,
) -> Result<Verdict> {
    if n1 == 0 {
        return Err(OrbitError::InvalidInput("N1 must be at least 1".into()));
    }
    let d2 = delta.round_to(prec.bits()).sqr();
    if *d2.hi() >= 1 || !d2.is_positive() {
        return Err(OrbitError::InvalidInput(
            "delta^2 must lie in (0, 1)".into(),
        ));
    }
    let a = window_box(window, prec);
    let one = RInterval::one(prec);
    let lo = point(a.hi()).neg();
    let hi = &d2 - point(a.lo());
    let mut y = lo.hull(&hi);
    let mut proved = true;
    for i in 0..=n1 {
        if i > 0 {
            y = y.sqr() - &a;
        }
        if *y.abs().lo() < 1 {
            proved = false;
            break;
        }
    }
    if proved {
        return Ok(Verdict::Proved);
    }
    let two = RInterval::from_int(2, prec);
    let x2 = &d2 - d2.mul_pow2(-32);
    let mut z = &x2 - &two;
    for _ in 0..=n1 {
        if *z.abs().hi() < *one.lo() {
            return Ok(Verdict::Refuted);
        }
        if width_f64(&z) > 0.5 {
            break;
        }
        z = z.sqr() - &two;
    }
    Ok(Verdict::Undecided)
}

/// Serializable summary of all orbit checks.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitVerdicts {
    pub prec_bits: u32,
    pub a2: Verdict,
    pub ntilde: Option<u64>,
    pub range_len: Option<RInterval>,
    pub a3: Verdict,
    pub a3_margin: RInterval,
    pub a4: Verdict,
    pub a4_margin: RInterval,
    pub d2_direct: RInterval,
    pub d3_direct: RInterval,
    /// Direct `D₂, D₃` do not exceed the closed-form bounds.
    pub geometry_consistent: bool,
    pub n1_ok: Verdict,
    pub identity_ok: bool,
    /// Smallest `inf c_n` over `1 ≤ n ≤ N`.
    pub min_c: RInterval,
}

impl OrbitVerdicts {
    pub fn overall(&self) -> Verdict {
        let base = self.a2.and(self.a3).and(self.a4).and(self.n1_ok);
        if base == Verdict::Proved && !(self.identity_ok && self.geometry_consistent) {
            Verdict::Undecided
        } else {
            base
        }
    }
}

fn decide_positive(m: &RInterval) -> Verdict {
    crate::chain::Relation::Positive.decide(m)
}

/// One attempt of the full orbit verification at `prec`.
fn verify_once(
    window: &FamilyWindow,
    start: &StartingConstants,
    geom: &GeometryBounds,
    prec: Precision,
) -> Result<OrbitVerdicts> {
    let n = start.n;
    let escape = find_ntilde_escape(window, prec, 2 * n.max(1));
    let (ntilde, range_len) = match &escape {
        Ok(e) => (Some(e.ntilde), Some(e.range_len.clone())),
        Err(OrbitError::NotFound(_)) => (None, None),
        Err(e) => return Err(e.clone()),
    };
    let horizon = n.max(geom.ntilde).max(ntilde.unwrap_or(0));
    let trace = iterate_box(
        &window_box(window, prec),
        horizon,
        prec,
        n,
        Some(window.eps()),
    )?;

    let delta_iota = start.delta.pow(&start.iota)?;
    let a2 = match (ntilde, &range_len) {
        (Some(nt), Some(len)) if nt >= n => {
            let reach = trace.steps[..nt as usize]
                .iter()
                .map(|s| decide_positive(&(s.c.abs() - &delta_iota)))
                .fold(Verdict::Proved, Verdict::and);
            reach.and(decide_positive(&(len - &delta_iota)))
        }
        // Escaping before N only means this criterion is inconclusive.
        _ => Verdict::Undecided,
    };

    let a3_margin = verify_a3(&trace, &start.alpha0, n)?;
    let a3 = decide_positive(&a3_margin);

    let (a4, nr) = match verify_a4_nonresonance(&trace, geom.ntilde, &start.lambda0) {
        Ok(nr) => (decide_positive(&nr.margin), Some(nr)),
        Err(OrbitError::Undecided(_)) => (Verdict::Undecided, None),
        Err(e) => return Err(e),
    };
    let nan = || RInterval::zero(Precision::new(TRACE_BITS).expect("valid"));
    let (a4_margin, d2_direct, d3_direct) = match nr {
        Some(nr) => (nr.margin, nr.d2_direct, nr.d3_direct),
        None => (nan(), nan(), nan()),
    };
    let geometry_consistent = a4 == Verdict::Proved
        && *d2_direct.hi() <= *geom.d2.lo()
        && *d3_direct.hi() <= *geom.d3.lo();

    let n1_ok = verify_n1(window, &start.delta, geom.n1, prec)?;
    let min_c = trace.steps[..n as usize]
        .iter()
        .map(|s| point(s.c.lo()))
        .reduce(|a, b| a.min(&b))
        .expect("n ≥ 1");

    Ok(OrbitVerdicts {
        prec_bits: prec.bits(),
        a2,
        ntilde,
        range_len,
        a3,
        a3_margin,
        a4,
        a4_margin,
        d2_direct,
        d3_direct,
        geometry_consistent,
        n1_ok,
        identity_ok: trace.identity_holds(),
        min_c,
    })
}

/// Full orbit verification of (A2), (A3), (A4) and `N₁`, doubling the
/// precision up to [`MAX_RETRIES`] times when enclosures become too wide.
pub fn verify_orbit(
    window: &FamilyWindow,
    start: &StartingConstants,
    geom: &GeometryBounds,
    prec: Precision,
) -> Result<OrbitVerdicts> {
    let mut p = prec;
    let mut attempt = 0;
    loop {
        match verify_once(window, start, geom, p) {
            Err(OrbitError::PrecisionExhausted {
                retryable: true, ..
            }) if attempt < MAX_RETRIES => {
                attempt += 1;
                p = p.doubled();
            }
            other => return other,
        }
    }
}
