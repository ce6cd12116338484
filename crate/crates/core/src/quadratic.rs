//! Closed-form starting constants for `f_a(x) = x² − a` on `Ω = [2 − ε, 2]`.
//!
//! Every expression in `a* = 2 − ε` is rewritten in terms of `ε` before it
//! is evaluated (`2 − a*² + a* = 3ε − ε²`, `4 − (δ² − a*)² = u(4 − u)` with
//! `u = δ² + ε`), so 256 bits suffice even for `ε = 10^-4990`.

use rug::{float::Round, Float};
use thiserror::Error;

use crate::arith::{ArithError, Decimal, Precision, RInterval};
use crate::chain::{FormulaMode, GeometryBounds, StartingConstants};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadraticError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-resonance margin lost: 1/2 − tail is not positive")]
    NonResonanceFailure,
}

type Result<T> = std::result::Result<T, QuadraticError>;

/// Parameter window `[a*, 2]` with `a* = 2 − ε`, `0 < ε < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyWindow {
    eps_decimal: Decimal,
    eps: RInterval,
}

impl FamilyWindow {
    pub fn new(eps: &Decimal, prec: Precision) -> Result<Self> {
        if !eps.in_open_unit() {
            return Err(QuadraticError::InvalidInput(format!(
                "eps = {eps} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            eps_decimal: eps.clone(),
            eps: eps.to_interval(prec),
        })
    }

    /// `ε = 10^{−e}`.
    pub fn from_exp(e: u32, prec: Precision) -> Result<Self> {
        let e =
            i32::try_from(e).map_err(|_| QuadraticError::InvalidInput("eps exponent".into()))?;
        Self::new(&Decimal::pow10(-e), prec)
    }

    pub fn eps_decimal(&self) -> &Decimal {
        &self.eps_decimal
    }

    pub fn eps(&self) -> &RInterval {
        &self.eps
    }

    pub fn a_star(&self) -> RInterval {
        RInterval::from_int(2, self.prec()) - &self.eps
    }

    pub fn omega_len(&self) -> &RInterval {
        &self.eps
    }

    pub fn prec(&self) -> Precision {
        Precision::new(self.eps.prec()).expect("window precision is valid")
    }

    /// Exact `a*` as a rational, for point iterations.
    pub fn a_star_rational(&self) -> rug::Rational {
        rug::Rational::from(2) - self.eps_decimal.to_rational()
    }
}

/// `(C₁, λ)` for the window.
pub fn expansivity_constants(
    delta: &RInterval,
    iota: &RInterval,
    window: &FamilyWindow,
) -> Result<(RInterval, RInterval)> {
    expansivity_constants_eps(delta, iota, window.eps())
}

/// As [`expansivity_constants`] with `ε ≥ 0` given directly (`ε = 0` is the
/// exact parameter `a* = 2`).
pub fn expansivity_constants_eps(
    delta: &RInterval,
    iota: &RInterval,
    eps: &RInterval,
) -> Result<(RInterval, RInterval)> {
    let prec = Precision::new(delta.prec())?;
    let four = RInterval::from_int(4, prec);
    let d2 = delta.sqr();
    // C₁ = √(1 − w), w = (δ^{2ι} − δ²)/(4 − δ²), evaluated as exp(½·ln1p(−w))
    // so that C₁ ≤ 1 survives rounding even when w is far below one ulp.
    let w = (delta.pow(&iota.mul_pow2(1))? - &d2).div(&(&four - &d2))?;
    let c1 = w.neg().ln_1p()?.mul_pow2(-1).exp()?;

    // λ = ln 2 + ½(ln1p(ε/(4 − u)) − ln1p(ε/δ²)),  u = δ² + ε.
    let u = &d2 + eps;
    let rest = &four - &u;
    if !u.is_positive() || !rest.is_positive() {
        return Err(ArithError::DomainError { op: "lambda" }.into());
    }
    let lambda =
        RInterval::ln2(prec) + (eps.div(&rest)?.ln_1p()? - eps.div(&d2)?.ln_1p()?).mul_pow2(-1);
    Ok((c1, lambda))
}

/// `N = ⌊log₄(1/(3ε − ε²))⌋`.
pub fn escape_time_n(window: &FamilyWindow) -> Result<u64> {
    let prec = window.prec();
    let eps = window.eps();
    escape_time_from_q(&(eps * (RInterval::from_int(3, prec) - eps)))
}

/// `⌊log₄(1/q)⌋` for `q = 2 − a*² + a*`.
pub fn escape_time_from_q(q: &RInterval) -> Result<u64> {
    let prec = Precision::new(q.prec())?;
    if !q.is_positive() || *q.hi() >= 1 {
        return Err(QuadraticError::InvalidInput(
            "3eps - eps^2 must lie in (0, 1)".into(),
        ));
    }
    let n = RInterval::one(prec).div(q)?.floor_log4()?;
    u64::try_from(n)
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| QuadraticError::InvalidInput("escape time N must be at least 1".into()))
}

/// Bits of the grid `α₀` is rounded up to.
pub const ALPHA0_BITS: u32 = 128;

/// `(α₀, λ₀)` with `α₀ = ln δ⁻¹ / N` and `λ₀ = s·λ + (1 − s)·α₀`.
///
/// `α₀` is taken as the point at the upper end of the enclosure of
/// `ln δ⁻¹ / N`: any value at least `ln δ^{-1/N}` is admissible, and a point
/// makes that inequality provable.
pub fn base_rates(
    delta: &RInterval,
    n: u64,
    lambda: &RInterval,
    s_lambda0: &RInterval,
) -> Result<(RInterval, RInterval)> {
    if n == 0 {
        return Err(QuadraticError::InvalidInput("N must be positive".into()));
    }
    let prec = Precision::new(delta.prec().max(lambda.prec()))?;
    let ratio = delta
        .ln()?
        .neg()
        .div(&RInterval::from_int(n as i64, prec))?;
    // Round the upper endpoint up to a fixed grid so the chosen constant
    // does not move with the working precision.
    let hi = Float::with_val_round(ALPHA0_BITS, ratio.hi(), Round::Up).0;
    let alpha0 = RInterval::point(Float::with_val(prec.bits().max(ALPHA0_BITS), hi))?;
    let lambda0 = s_lambda0 * lambda + (RInterval::one(prec) - s_lambda0) * &alpha0;
    Ok((alpha0, lambda0))
}

/// `N₁` for the given mode, capped at `N − 1`.
pub fn contraction_horizon_n1(
    delta: &RInterval,
    iota: &RInterval,
    n: u64,
    mode: FormulaMode,
) -> Result<u64> {
    n1_from_parts(&delta.sqr(), &delta.pow(iota)?, n, mode)
}

/// `N₁` from `δ²` and `δ^ι`: compat `⌊min(log₄((1 − δ^ι)/δ²), N − 1)⌋`,
/// strict `⌊min(log₄(1/(2δ²)), N − 1)⌋`.
pub fn n1_from_parts(
    delta_sq: &RInterval,
    delta_iota: &RInterval,
    n: u64,
    mode: FormulaMode,
) -> Result<u64> {
    if !delta_sq.is_positive() || *delta_sq.hi() >= 1 {
        return Err(QuadraticError::InvalidInput(
            "delta^2 must lie in (0, 1)".into(),
        ));
    }
    if n < 2 {
        return Err(QuadraticError::InvalidInput("N1 needs N >= 2".into()));
    }
    let prec = Precision::new(delta_sq.prec())?;
    let one = RInterval::one(prec);
    let x = match mode {
        FormulaMode::Compat => (&one - delta_iota).div(delta_sq)?,
        FormulaMode::Strict => one.div(&delta_sq.mul_pow2(1))?,
    };
    let cap = n - 1;
    let cap_pow = one.mul_pow2(
        i32::try_from(2 * cap).map_err(|_| QuadraticError::InvalidInput("N too large".into()))?,
    );
    if *x.lo() >= *cap_pow.hi() {
        return Ok(cap);
    }
    let f = x.floor_log4()?;
    if f < 1 {
        return Err(QuadraticError::InvalidInput("N1 must be at least 1".into()));
    }
    Ok((f as u64).min(cap))
}

/// `(D₂, D₃) = (3/2 + t, 1/(1/2 − t))` with `t = e^{−λ₀(N+1)}/(1 − e^{−λ₀})`.
pub fn parameter_derivative_bounds(lambda0: &RInterval, n: u64) -> Result<(RInterval, RInterval)> {
    let prec = Precision::new(lambda0.prec())?;
    let one = RInterval::one(prec);
    let np1 = RInterval::from_int(n as i64 + 1, prec);
    let t = (&np1 * lambda0)
        .neg()
        .exp()?
        .div(&lambda0.neg().exp_m1()?.neg())?;
    let half = one.mul_pow2(-1);
    let d2 = RInterval::from_ratio(3, 2, prec)? + &t;
    let den = &half - &t;
    if !den.is_positive() {
        return Err(QuadraticError::NonResonanceFailure);
    }
    Ok((d2, one.div(&den)?))
}

/// Exact inputs of the quadratic pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticInputs {
    pub delta: Decimal,
    pub iota: Decimal,
    pub eps: Decimal,
    pub s_lambda0: Decimal,
}

impl QuadraticInputs {
    /// `δ = 10^-1000`, `ι = 0.8`, `ε = 10^-4990`, `λ₀` mix `0.8`.
    pub fn reference() -> Self {
        Self {
            delta: Decimal::pow10(-1000),
            iota: Decimal::new(8, -1),
            eps: Decimal::pow10(-4990),
            s_lambda0: Decimal::new(8, -1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", &self.delta),
            ("iota", &self.iota),
            ("eps", &self.eps),
            ("s_lambda0", &self.s_lambda0),
        ] {
            let ok = if name == "s_lambda0" {
                v.is_positive() && *v <= Decimal::from_int(1)
            } else {
                v.in_open_unit()
            };
            if !ok {
                return Err(QuadraticError::InvalidInput(format!(
                    "{name} = {v} is out of range"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSetup {
    pub window: FamilyWindow,
    pub start: StartingConstants,
    pub geom: GeometryBounds,
    /// Hypotheses that still need the orbit verification.
    pub pending: Vec<&'static str>,
}

/// Starting constants and geometry (`M₁ = 4`, `M₂ = 2`, `L₁ = L₂ = 1/2`,
/// `|I| = 4`, `κ = 1`, `Ñ = N`).
pub fn quadratic_setup(
    inputs: &QuadraticInputs,
    mode: FormulaMode,
    prec: Precision,
) -> Result<QuadraticSetup> {
    inputs.validate()?;
    let window = FamilyWindow::new(&inputs.eps, prec)?;
    let delta = inputs.delta.to_interval(prec);
    let iota = inputs.iota.to_interval(prec);
    let (c1, lambda) = expansivity_constants(&delta, &iota, &window)?;
    let n = escape_time_n(&window)?;
    let (alpha0, lambda0) = base_rates(&delta, n, &lambda, &inputs.s_lambda0.to_interval(prec))?;
    let n1 = contraction_horizon_n1(&delta, &iota, n, mode)?;
    let (d2, d3) = parameter_derivative_bounds(&lambda0, n)?;
    let c = |k: i64| RInterval::from_int(k, prec);
    let half = RInterval::from_ratio(1, 2, prec)?;
    Ok(QuadraticSetup {
        window,
        start: StartingConstants {
            n,
            delta,
            iota,
            c1,
            lambda,
            alpha0,
            lambda0,
        },
        geom: GeometryBounds {
            m1: c(4),
            m2: c(2),
            l1: half.clone(),
            l2: half,
            n1,
            i_len: c(4),
            kappa: c(1),
            d2,
            d3,
            ntilde: n,
        },
        pending: vec!["A2", "A4"],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::chain()
    }

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    fn iv(s: &str) -> RInterval {
        d(s).to_interval(p())
    }

    fn close(x: &RInterval, v: &str, rel: f64) -> bool {
        x.rel_distance_to(&d(v)) <= rel
    }

    #[test]
    fn lambda_at_a_equals_two() {
        let (c1, lam) =
            expansivity_constants_eps(&iv("1"), &iv("0.3"), &RInterval::zero(p())).unwrap();
        assert!(lam.contains(&RInterval::ln2(p())) || lam == RInterval::ln2(p()));
        assert!(c1.contains_decimal(&d("1")));
    }

    #[test]
    fn small_window_closed_forms() {
        let w = FamilyWindow::new(&d("1e-2"), p()).unwrap();
        let (c1, lam) = expansivity_constants(&iv("1e-3"), &iv("0.5"), &w).unwrap();
        assert!(close(&c1, "0.9998751171709207427758237", 1e-24));
        assert!(close(&lam, "-3.910821437505970161166988", 1e-24));
    }

    #[test]
    fn escape_time_examples() {
        assert_eq!(
            escape_time_n(&FamilyWindow::from_exp(4990, p()).unwrap()).unwrap(),
            8287
        );
        assert_eq!(
            escape_time_n(&FamilyWindow::from_exp(100, p()).unwrap()).unwrap(),
            165
        );
        let quarter = RInterval::from_ratio(1, 4, p()).unwrap();
        assert_eq!(escape_time_from_q(&quarter).unwrap(), 1);
    }

    #[test]
    fn lambda0_mix_endpoints() {
        let (a0, l0) = base_rates(&iv("1e-1000"), 8287, &iv("0.6"), &iv("1")).unwrap();
        assert!(l0.contains_decimal(&d("0.6")));
        assert!(a0.is_point());
        let prec = p();
        let (_, l0) = base_rates(&iv("1e-1000"), 8287, &iv("0.6"), &iv("0.5")).unwrap();
        let expect = (iv("0.6") + &a0).mul_pow2(-1);
        assert!(l0.intersects(&expect));
        let _ = prec;
    }

    #[test]
    fn n1_examples() {
        let delta = iv("1e-1000");
        let iota = iv("0.8");
        for mode in [FormulaMode::Compat, FormulaMode::Strict] {
            assert_eq!(
                contraction_horizon_n1(&delta, &iota, 8287, mode).unwrap(),
                3321
            );
        }
        let eighth = RInterval::from_ratio(1, 8, p()).unwrap();
        assert_eq!(
            n1_from_parts(&eighth, &iv("0.5"), 100, FormulaMode::Strict).unwrap(),
            1
        );
        let d50 = iv("1e-50");
        assert_eq!(
            contraction_horizon_n1(&d50, &iota, 10_000, FormulaMode::Strict).unwrap(),
            165
        );
        assert_eq!(
            contraction_horizon_n1(&d50, &iota, 10_000, FormulaMode::Compat).unwrap(),
            166
        );
        assert_eq!(
            contraction_horizon_n1(&d50, &iota, 100, FormulaMode::Compat).unwrap(),
            99
        );
    }

    #[test]
    fn derivative_bounds_examples() {
        let (d2, d3) = parameter_derivative_bounds(&iv("0.61"), 10).unwrap();
        assert!(close(&d2, "1.502668710049073914705716", 1e-24));
        assert!(close(&d3, "2.010732122040168630156053", 1e-24));
        let (d2, _) = parameter_derivative_bounds(&RInterval::ln2(p()), 2).unwrap();
        assert!(close(&d2, "1.75", 1e-70));
        assert!(matches!(
            parameter_derivative_bounds(&iv("0.01"), 1),
            Err(QuadraticError::NonResonanceFailure)
        ));
    }

    #[test]
    fn coarse_window_has_no_escape_time() {
        let inp = QuadraticInputs {
            delta: d("0.5"),
            iota: d("0.8"),
            eps: d("0.5"),
            s_lambda0: d("0.8"),
        };
        assert!(matches!(
            quadratic_setup(&inp, FormulaMode::Compat, p()),
            Err(QuadraticError::InvalidInput(_))
        ));
    }

    #[test]
    fn setup_rejects_iota_at_one() {
        let mut inp = QuadraticInputs::reference();
        inp.iota = d("1");
        assert!(quadratic_setup(&inp, FormulaMode::Compat, p()).is_err());
    }

    #[test]
    fn mid_scale_setup() {
        let inp = QuadraticInputs {
            delta: d("1e-500"),
            iota: d("0.8"),
            eps: d("1e-2495"),
            s_lambda0: d("0.8"),
        };
        let s = quadratic_setup(&inp, FormulaMode::Compat, p()).unwrap();
        assert_eq!(s.start.n, 4143);
        assert_eq!(s.geom.n1, 1660);
        assert!(close(&s.start.lambda, "0.6931471805599453094172321", 1e-24));
        assert!(close(&s.start.alpha0, "0.277888618512436119239439", 1e-24));
        assert!(close(
            &s.start.lambda0,
            "0.6100954681504434713816735",
            1e-24
        ));
        assert!(*s.start.c1.hi() <= 1);
        assert!(s.geom.d2.contains_decimal(&d("1.5")) || close(&s.geom.d2, "1.5", 1e-70));
    }
}
