//! Contraction constants of the neutral fixed-point map on `[0, T1]`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest `T1` the bracket search will report.
pub const T1_CAP: f64 = 1e12;
/// Relative width at which bisection stops.
pub const T1_REL_TOL: f64 = 1e-13;

fn check(mg: f64, p: f64, alpha: f64, c: f64) -> Result<()> {
    if !(mg > 0.0 && mg < 1.0) {
        return Err(Error::Domain(format!("Mg must lie in (0, 1), got {mg}")));
    }
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("C_(1-alpha) must be positive, got {c}")));
    }
    Ok(())
}

fn check_t(t1: f64) -> Result<()> {
    if !(t1 >= 0.0 && t1.is_finite()) {
        return Err(Error::Domain(format!("T1 must be a nonnegative number, got {t1}")));
    }
    Ok(())
}

/// `gamma(T1) = Mg + Mg^p C^p T1^(alpha p) / ((1 - Mg)^(p - 1) alpha^p)`.
pub fn gamma_t1(mg: f64, p: f64, alpha: f64, c1ma: f64, t1: f64) -> Result<f64> {
    check(mg, p, alpha, c1ma)?;
    check_t(t1)?;
    let num = (mg * c1ma / alpha).powf(p) * t1.powf(alpha * p);
    Ok(mg + num / (1.0 - mg).powf(p - 1.0))
}

/// `Mg + (5 / (1 - Mg))^(p - 1) (C T1^alpha Mg / alpha)^p`.
pub fn cond2(mg: f64, p: f64, alpha: f64, c1ma: f64, t1: f64) -> Result<f64> {
    check(mg, p, alpha, c1ma)?;
    check_t(t1)?;
    Ok(mg + (5.0 / (1.0 - mg)).powf(p - 1.0) * (c1ma * t1.powf(alpha) * mg / alpha).powf(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T1Solution {
    pub t1: f64,
    pub gamma: f64,
    pub cond2: f64,
    /// Both conditions still held at [`T1_CAP`].
    pub capped: bool,
}

/// Largest `T1` with both `gamma(T1) < 1` and `cond2(T1) < 1`, by bisection in
/// `ln T1`. Returns the lower end of the final bracket, so both left-hand sides
/// are below one.
pub fn find_t1(mg: f64, p: f64, alpha: f64, c1ma: f64) -> Result<T1Solution> {
    if mg >= 1.0 {
        return Err(Error::NoAdmissibleT1(format!("Mg = {mg} is not below 1")));
    }
    check(mg, p, alpha, c1ma)?;
    let worst = |t: f64| -> Result<f64> { Ok(gamma_t1(mg, p, alpha, c1ma, t)?.max(cond2(mg, p, alpha, c1ma, t)?)) };
    let solution = |t: f64, capped: bool| -> Result<T1Solution> {
        Ok(T1Solution { t1: t, gamma: gamma_t1(mg, p, alpha, c1ma, t)?, cond2: cond2(mg, p, alpha, c1ma, t)?, capped })
    };

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    if worst(1.0)? < 1.0 {
        while worst(hi)? < 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > T1_CAP {
                return solution(T1_CAP, true);
            }
        }
    } else {
        while worst(lo)? >= 1.0 {
            hi = lo;
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(Error::NoAdmissibleT1("no T1 > 0 satisfies both conditions".into()));
            }
        }
    }
    while hi / lo - 1.0 > T1_REL_TOL {
        let mid = (lo * hi).sqrt();
        if worst(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solution(lo, false)
}
