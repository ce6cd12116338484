//! The auxiliary-constant chain and the inequalities (C1)–(C4).
//!
//! Everything here is a pure function of [`StartingConstants`],
//! [`GeometryBounds`] and [`FreeChoices`]. Two formula variants are offered
//! through [`FormulaMode`]; they share all code except the four places
//! where the variants genuinely differ (`D1`, `gamma0`, `tau` and the C1b
//! margin).
//!
//! Large constants such as `Dist` and `Gamma1` only enter later formulas
//! through their logarithms, so the chain keeps `ln Dist`, `ln Gamma1`,
//! `ln C3` and `ln C3tilde` alongside the values themselves. This avoids
//! needless exponent-range pressure and keeps the enclosures tight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{ArithError, Decimal, Precision, RInterval};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("singular denominator while computing {field}")]
    ChainSingularity { field: &'static str },
    #[error("eta must be below 1 (upper bound is {0})")]
    InvalidEta(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

type Result<T> = std::result::Result<T, ChainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FormulaMode {
    /// The equations as displayed in the body of the theory.
    Strict,
    /// The formulas of the reference numeric worksheet.
    #[default]
    Compat,
}

impl FormulaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Strict => "strict",
            Self::Compat => "compat",
        }
    }
}

impl std::str::FromStr for FormulaMode {
    type Err = ChainError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::Strict),
            "compat" => Ok(Self::Compat),
            _ => Err(ChainError::InvalidInput(format!("unknown mode '{s}'"))),
        }
    }
}

/// `N, δ, ι, C₁, λ, α₀, λ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct StartingConstants {
    pub n: u64,
    pub delta: RInterval,
    pub iota: RInterval,
    pub c1: RInterval,
    pub lambda: RInterval,
    pub alpha0: RInterval,
    pub lambda0: RInterval,
}

impl StartingConstants {
    pub fn fields(&self) -> Vec<(&'static str, &RInterval)> {
        vec![
            ("delta", &self.delta),
            ("iota", &self.iota),
            ("C1", &self.c1),
            ("lambda", &self.lambda),
            ("alpha0", &self.alpha0),
            ("lambda0", &self.lambda0),
        ]
    }
}

/// Family-dependent bounds. `kappa` stands in for `M₂/L₂` in the
/// distortion formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBounds {
    pub m1: RInterval,
    pub m2: RInterval,
    pub l1: RInterval,
    pub l2: RInterval,
    pub n1: u64,
    pub i_len: RInterval,
    pub kappa: RInterval,
    pub d2: RInterval,
    pub d3: RInterval,
    pub ntilde: u64,
}

impl GeometryBounds {
    pub fn fields(&self) -> Vec<(&'static str, &RInterval)> {
        vec![
            ("M1", &self.m1),
            ("M2", &self.m2),
            ("L1", &self.l1),
            ("L2", &self.l2),
            ("I_len", &self.i_len),
            ("kappa", &self.kappa),
            ("D2", &self.d2),
            ("D3", &self.d3),
        ]
    }
}

/// Mixing fractions, each strictly inside `(0, 1)`:
/// `α₁ = s_α1·α₀ + (1 − s_α1)·λ₀`, `γ₁ = s_γ1·γ₁max`, `γ₂ = s_γ2·(1 − γ₀ − γ₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeChoices {
    pub s_alpha1: RInterval,
    pub s_gamma1: RInterval,
    pub s_gamma2: RInterval,
}

impl FreeChoices {
    pub fn from_decimals(
        s_alpha1: &Decimal,
        s_gamma1: &Decimal,
        s_gamma2: &Decimal,
        prec: Precision,
    ) -> Result<Self> {
        for (name, s) in [
            ("s_alpha1", s_alpha1),
            ("s_gamma1", s_gamma1),
            ("s_gamma2", s_gamma2),
        ] {
            if !s.in_open_unit() {
                return Err(ChainError::InvalidInput(format!(
                    "{name} = {s} is not in (0, 1)"
                )));
            }
        }
        Ok(Self {
            s_alpha1: s_alpha1.to_interval(prec),
            s_gamma1: s_gamma1.to_interval(prec),
            s_gamma2: s_gamma2.to_interval(prec),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxChain {
    pub mode: FormulaMode,
    pub alpha1: RInterval,
    pub d1: RInterval,
    pub gamma0: RInterval,
    pub gamma1max: RInterval,
    pub gamma1: RInterval,
    pub gamma2: RInterval,
    pub gamma: RInterval,
    pub dhat: RInterval,
    pub dhathat: RInterval,
    pub dist: RInterval,
    pub gamma1_big: RInterval,
    pub k0: RInterval,
    pub tau1: RInterval,
    pub tau0: RInterval,
    pub c3: RInterval,
    pub c3tilde: RInterval,
    pub alpha1_tau1: RInterval,
    pub gamma1min: RInterval,
    pub tau: RInterval,
    pub alpha: RInterval,
    pub etatilde: RInterval,
    pub eta: RInterval,
    /// `e^{−2λ₀}/(1 − e^{−λ₀})`, the non-resonance tail for `Ñ = 1`.
    pub nr_tail: RInterval,
    pub ln_dist: RInterval,
    pub ln_gamma1: RInterval,
}

impl AuxChain {
    /// Named fields in declaration order (the logarithmic helpers excluded).
    pub fn fields(&self) -> Vec<(&'static str, &RInterval)> {
        vec![
            ("alpha1", &self.alpha1),
            ("D1", &self.d1),
            ("gamma0", &self.gamma0),
            ("gamma1max", &self.gamma1max),
            ("gamma1", &self.gamma1),
            ("gamma2", &self.gamma2),
            ("gamma", &self.gamma),
            ("Dhat", &self.dhat),
            ("Dhathat", &self.dhathat),
            ("Dist", &self.dist),
            ("Gamma1", &self.gamma1_big),
            ("k0", &self.k0),
            ("tau1", &self.tau1),
            ("tau0", &self.tau0),
            ("C3", &self.c3),
            ("C3tilde", &self.c3tilde),
            ("alpha1_tau1", &self.alpha1_tau1),
            ("gamma1min", &self.gamma1min),
            ("tau", &self.tau),
            ("alpha", &self.alpha),
            ("etatilde", &self.etatilde),
            ("eta", &self.eta),
            ("NR", &self.nr_tail),
        ]
    }

    pub fn get(&self, name: &str) -> Option<&RInterval> {
        self.fields()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proved,
    Refuted,
    Undecided,
}

impl Verdict {
    /// Conjunction: any refutation wins, then any undecided.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Refuted, _) | (_, Refuted) => Refuted,
            (Undecided, _) | (_, Undecided) => Undecided,
            _ => Proved,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Proved => "proved",
            Self::Refuted => "refuted",
            Self::Undecided => "undecided",
        }
    }
}

/// Which comparison of a margin against zero is being certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// `margin > 0`
    Positive,
    /// `margin ≥ 0`
    NonNegative,
}

impl Relation {
    pub fn decide(&self, m: &RInterval) -> Verdict {
        match self {
            Relation::Positive if *m.lo() > 0 => Verdict::Proved,
            Relation::Positive if *m.hi() <= 0 => Verdict::Refuted,
            Relation::NonNegative if *m.lo() >= 0 => Verdict::Proved,
            Relation::NonNegative if *m.hi() < 0 => Verdict::Refuted,
            _ => Verdict::Undecided,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub relation: Relation,
    pub holds: Verdict,
    pub margin: RInterval,
}

impl ConditionCheck {
    fn new(name: &'static str, relation: Relation, margin: RInterval) -> Self {
        Self {
            name,
            relation,
            holds: relation.decide(&margin),
            margin,
        }
    }
}

/// Checks in canonical order: C1a, C1b, the range checks, C2, C3, C4.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn overall(&self) -> Verdict {
        self.checks
            .iter()
            .fold(Verdict::Proved, |acc, c| acc.and(c.holds))
    }

    /// First check that is not proved.
    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.holds != Verdict::Proved)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sing(field: &'static str) -> impl Fn(ArithError) -> ChainError {
    move |e| match e {
        ArithError::DivisionByZeroInterval => ChainError::ChainSingularity { field },
        other => ChainError::Arith(other),
    }
}

fn dv(a: &RInterval, b: &RInterval, field: &'static str) -> Result<RInterval> {
    a.div(b).map_err(sing(field))
}

/// `1 − e^{−x}` without cancellation for small `x`.
fn one_minus_exp_neg(x: &RInterval) -> Result<RInterval> {
    Ok(x.neg().exp_m1()?.neg())
}

/// `max((ln(D₁/L₁) + λ₀ + α₁)/ln δ^{−ι}, 0)` with `ln D₁` passed directly.
pub fn k0_clamped(
    ln_d1: &RInterval,
    l1: &RInterval,
    lambda0: &RInterval,
    alpha1: &RInterval,
    ln_delta_iota_inv: &RInterval,
) -> Result<RInterval> {
    let num = ln_d1 - l1.ln()? + lambda0 + alpha1;
    let q = dv(&num, ln_delta_iota_inv, "k0")?;
    Ok(q.max(&RInterval::zero(Precision::new(q.prec())?)))
}

pub fn evaluate_chain(
    start: &StartingConstants,
    geom: &GeometryBounds,
    choices: &FreeChoices,
    mode: FormulaMode,
    prec: Precision,
) -> Result<AuxChain> {
    let c = |n: i64| RInterval::from_int(n, prec);
    let one = c(1);
    let two = c(2);
    let (lambda, lambda0, alpha0) = (&start.lambda, &start.lambda0, &start.alpha0);
    let (l1, kappa, d2, d3) = (&geom.l1, &geom.kappa, &geom.d2, &geom.d3);

    let ln_dinv = start.delta.ln()?.neg();
    let ell = &start.iota * &ln_dinv; // ln δ^{−ι}
    let lnln_dinv = ln_dinv.ln()?;
    let lnln_iota = ell.ln()?;
    let ln2 = RInterval::ln2(prec);

    let alpha1 = &choices.s_alpha1 * alpha0 + (&one - &choices.s_alpha1) * lambda0;
    let gap = &alpha1 - alpha0;
    let q_gap = one_minus_exp_neg(&gap)?;

    let n1p = c(geom.n1 as i64 + 1);
    let x = &n1p * &gap;
    let tail = dv(&x.neg().exp()?, &one_minus_exp_neg(&x)?, "D1")?;
    let q_a1 = one_minus_exp_neg(&alpha1)?;
    let inner = match mode {
        FormulaMode::Compat => dv(&one, &q_a1, "D1")? + &tail * &q_gap,
        FormulaMode::Strict => dv(&alpha1.neg().exp()?, &q_a1, "D1")? + dv(&tail, &q_gap, "D1")?,
    };
    let ln_d1 = kappa * &inner;
    let d1 = ln_d1.exp()?;

    let k = match mode {
        FormulaMode::Compat => c(1),
        FormulaMode::Strict => c(2),
    };
    let gamma0 = dv(&(k + &ln2 + c(5) * &lnln_dinv), &ln_dinv, "gamma0")?;
    let ln_c1 = start.c1.ln()?;
    let gamma1max =
        (&one - &gamma0).min(&(&one - dv(&(ln_c1.neg() + &two * &lnln_iota), &ell, "gamma1max")?));
    let gamma1 = &choices.s_gamma1 * &gamma1max;
    let gamma2 = &choices.s_gamma2 * (&one - &gamma0 - &gamma1);
    let gamma = &gamma0 + &gamma1 + &gamma2;

    let inv_c1 = dv(&one, &start.c1, "C1")?;
    let d23 = d2 * d3;
    let ln_d23 = d23.ln()?;
    let e_lam = lambda.neg().exp()?;
    let q_lam = dv(&e_lam, &one_minus_exp_neg(lambda)?, "Dhat")?;
    let ln_l1 = l1.ln()?;
    let dhat = &two
        + &two * &inv_c1 * &d23 * &q_lam
        + dv(&(&two * &d1 * &d23), &(l1.sqr() * &q_gap), "Dhat")?;

    let ell2 = ell.sqr();
    let ellm1 = &ell - &one;
    let delta_pow = (&start.iota * (&one - &gamma1) * &ln_dinv).neg().exp()?;
    let dhathat = dv(
        &((&two + dv(&(one.exp()? * &ell2), &ellm1.sqr(), "Dhathat")?)
            * dv(&ell2, &(&ell2 - &inv_c1 * &delta_pow), "Dhathat")?),
        &ellm1,
        "Dhathat",
    )?;

    let ln_dist = &ln_d23 + kappa * (&dhat * &dhathat + &inv_c1 * &d23 * &q_lam);
    let dist = ln_dist.exp()?;
    let ln_gamma1 = &ln_dist + &ln_d1 + &ln_d23 + &one + lambda0 - &ln_l1 - &ln_c1;
    let gamma1_big = ln_gamma1.exp()?;

    let k0 = k0_clamped(&ln_d1, l1, lambda0, &alpha1, &ell)?;
    let rate = lambda0 + &alpha1;
    let tau1 = dv(&two, &rate, "tau1")?;
    let tau0 = dv(&(&two + &k0), &rate, "tau0")?;

    let ln_c3 = dv(&(lambda0 + &two * &alpha1), &rate, "C3")?.neg() * &ln_d1
        + (&two + dv(&alpha1, &rate, "C3")?) * &ln_l1;
    let c3 = ln_c3.exp()?;
    let alpha1_tau1 = &alpha1 * &tau1;
    let ln_c3tilde = (&alpha1_tau1 - &one) * &ln2 + &two * &ln_l1 + &ln_c3
        - &ln2
        - &two * &ln_d1
        - &ln_dist
        - &ln_d23;
    let c3tilde = ln_c3tilde.exp()?;

    let first = &start.iota
        + dv(
            &(&ln_dist + &ln_d23 - &ln_c1 + &two * &lnln_iota),
            &ln_dinv,
            "gamma1min",
        )?;
    let second = &alpha1_tau1
        + dv(
            &(&ln_gamma1 + &ln_d23 - &ln_c3tilde + &alpha1_tau1 - &one + &two * &lnln_iota),
            &ell,
            "gamma1min",
        )?;
    let gamma1min = first.max(&second);

    let ll = match mode {
        FormulaMode::Compat => &lnln_iota,
        FormulaMode::Strict => &lnln_dinv,
    };
    let tau = dv(&tau0, &(&one - &gamma1), "tau")?
        * (&one
            + dv(
                &(geom.i_len.ln()? - &ln_gamma1 + &two * ll),
                &ln_dinv,
                "tau",
            )?);
    let alpha_den = &tau * (lambda - dv(&(&one - &gamma1), &tau0, "alpha")?) + &one;
    let alpha = alpha0.min(&dv(&(lambda - lambda0), &alpha_den, "alpha")?);

    let co_gamma = &one - &gamma;
    let etatilde = (&gamma2 * &alpha).neg().exp()?
        * (&one
            + dv(
                &(&co_gamma * &ln_dinv).neg().exp()?,
                &one_minus_exp_neg(&co_gamma)?,
                "etatilde",
            )?);
    let n = i64::try_from(start.n).map_err(|_| ChainError::InvalidInput("N too large".into()))?;
    let eta = dv(&etatilde.powi(n)?, &(&one - &etatilde), "eta")?;

    let nr_tail = dv(
        &(&two * lambda0).neg().exp()?,
        &one_minus_exp_neg(lambda0)?,
        "NR",
    )?;

    Ok(AuxChain {
        mode,
        alpha1,
        d1,
        gamma0,
        gamma1max,
        gamma1,
        gamma2,
        gamma,
        dhat,
        dhathat,
        dist,
        gamma1_big,
        k0,
        tau1,
        tau0,
        c3,
        c3tilde,
        alpha1_tau1,
        gamma1min,
        tau,
        alpha,
        etatilde,
        eta,
        nr_tail,
        ln_dist,
        ln_gamma1,
    })
}

pub fn check_conditions(
    start: &StartingConstants,
    geom: &GeometryBounds,
    aux: &AuxChain,
) -> Result<ConditionReport> {
    use Relation::{NonNegative, Positive};
    let prec = Precision::new(aux.eta.prec().max(start.lambda.prec()))?;
    let one = RInterval::one(prec);
    let ln_dinv = start.delta.ln()?.neg();
    let n = RInterval::from_int(start.n as i64, prec);

    let c1a = (&start.lambda - &start.lambda0).min(&(&start.lambda0 - &start.alpha0));
    let c1a_floor = &start.alpha0 - ln_dinv.div(&n)?;
    let log_base = match aux.mode {
        FormulaMode::Compat => ln_dinv.clone(),
        FormulaMode::Strict => &start.iota * &ln_dinv,
    };
    let c1b = log_base - ((&one + &start.lambda0).neg().mul_pow2(-1)).exp()?;

    let co_gamma0 = &one - &aux.gamma0;
    let g1_range = aux.gamma1.min(&(&co_gamma0 - &aux.gamma1));
    let g2_range = aux.gamma2.min(&(&one - &aux.gamma));
    let alpha_den = &start.lambda - (&one - &aux.gamma1).div(&aux.tau0)?;

    let checks = vec![
        ConditionCheck::new("C1a", Positive, c1a),
        ConditionCheck::new("C1a_alpha0", NonNegative, c1a_floor),
        ConditionCheck::new("C1b", NonNegative, c1b),
        ConditionCheck::new("gamma1_in_range", Positive, g1_range),
        ConditionCheck::new("gamma2_in_range", Positive, g2_range),
        ConditionCheck::new("D3_positive", Positive, geom.d3.clone()),
        ConditionCheck::new("tau_positive", Positive, aux.tau.clone()),
        ConditionCheck::new("alpha_denominator", Positive, alpha_den),
        ConditionCheck::new("alpha_positive", Positive, aux.alpha.clone()),
        ConditionCheck::new("etatilde_below_one", Positive, &one - &aux.etatilde),
        ConditionCheck::new("C2", Positive, &one - &aux.tau0 * &start.alpha0),
        ConditionCheck::new("C3", NonNegative, &aux.gamma1 - &aux.gamma1min),
        ConditionCheck::new("C4", Positive, &one - &aux.eta),
    ];
    Ok(ConditionReport { checks })
}

/// `(1 − η)·|Ω|`, the certified lower bound on the measure of good parameters.
pub fn measure_bound(eta: &RInterval, omega_len: &RInterval) -> Result<RInterval> {
    if *eta.hi() >= 1 {
        return Err(ChainError::InvalidEta(crate::arith::format_float(
            eta.hi(),
            17,
            rug::float::Round::Up,
        )));
    }
    if !omega_len.is_positive() {
        return Err(ChainError::InvalidInput("|Omega| must be positive".into()));
    }
    let one = RInterval::one(Precision::new(eta.prec())?);
    Ok((one - eta) * omega_len)
}
