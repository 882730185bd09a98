//! Series and scalars with coefficients `num / pi^den` in `L`.
//!
//! Denominators are explicit pi-power exponents; there is no general field
//! arithmetic.  These carriers exist for the formal logarithm and
//! exponential and for Coates-Wiles values, all of which have denominators
//! bounded by a declared budget.

use std::fmt;
use std::sync::Arc;

use crate::base_ring::{BaseElem, BaseRingSpec};
use crate::error::{Error, Result};
use crate::series::{is_exact_bound, IntSeries, EXACT_HI};

/// `num / pi^den`
#[derive(Clone)]
pub struct RatScalar {
    pub num: BaseElem,
    pub den: u32,
}

impl fmt::Debug for RatScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/pi^{}", self.num, self.den)
    }
}

impl RatScalar {
    pub fn from_int(num: BaseElem) -> Self {
        RatScalar { num, den: 0 }
    }

    pub fn zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        RatScalar {
            num: BaseElem::zero(spec, prec),
            den: 0,
        }
    }

    /// Strip common pi factors from numerator and denominator.
    pub fn normalize(&self) -> Self {
        let mut out = self.clone();
        while out.den > 0 {
            match out.num.valuation() {
                None => {
                    // numerator is zero at its precision; drop denominator
                    out = RatScalar {
                        num: out.num.with_prec(out.num.prec().saturating_sub(out.den)),
                        den: 0,
                    };
                    break;
                }
                Some(v) if v >= 1 => {
                    out = RatScalar {
                        num: out.num.divide_by_pi_exact(1).expect("v >= 1"),
                        den: out.den - 1,
                    };
                }
                _ => break,
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let den = self.den.max(other.den);
        let a = self.num.mul_pi_pow(den - self.den);
        let b = other.num.mul_pi_pow(den - other.den);
        RatScalar { num: a.add(&b), den }.normalize()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RatScalar {
            num: self.num.neg(),
            den: self.den,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        RatScalar {
            num: self.num.mul(&other.num),
            den: self.den + other.den,
        }
        .normalize()
    }

    pub fn mul_int(&self, other: &BaseElem) -> Self {
        RatScalar {
            num: self.num.mul(other),
            den: self.den,
        }
        .normalize()
    }

    /// Equality of values modulo `pi^t`.
    pub fn equals_mod(&self, other: &Self, t: u32) -> Result<bool> {
        let den = self.den.max(other.den);
        let need = t + den;
        if self.num.prec() + (den - self.den) < need || other.num.prec() + (den - other.den) < need
        {
            return Err(Error::PrecisionExhausted(format!(
                "rational comparison mod pi^{t} needs numerator precision {need}"
            )));
        }
        let a = self.num.mul_pi_pow(den - self.den);
        let b = other.num.mul_pi_pow(den - other.den);
        Ok(a.sub(&b).with_prec(need).valuation().is_none())
    }

    pub fn is_zero_mod(&self, t: u32) -> bool {
        match self.normalize() {
            RatScalar { num, den: 0 } => num.with_prec(t.min(num.prec())).is_zero(),
            _ => false,
        }
    }
}

/// Laurent series with `RatScalar` coefficients.
#[derive(Clone)]
pub struct RationalSeries {
    spec: Arc<BaseRingSpec>,
    /// numerator pi-adic precision
    pub prec: u32,
    pub z_low: i64,
    pub z_high: i64,
    coeffs: Vec<RatScalar>,
}

impl fmt::Debug for RationalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatSeries[Z^{}..{}]{:?}", self.z_low, self.z_high, self.coeffs)
    }
}

impl RationalSeries {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn new(
        spec: &Arc<BaseRingSpec>,
        prec: u32,
        z_low: i64,
        coeffs: Vec<RatScalar>,
        z_high: i64,
    ) -> Self {
        let mut s = RationalSeries {
            spec: Arc::clone(spec),
            prec,
            z_low,
            z_high,
            coeffs: coeffs.into_iter().map(|c| c.normalize()).collect(),
        };
        s.trim();
        s
    }

    fn trim(&mut self) {
        if !is_exact_bound(self.z_high) {
            let max_len = (self.z_high - self.z_low).max(0) as usize;
            self.coeffs.truncate(max_len);
        }
        while self
            .coeffs
            .last()
            .map(|c| c.den == 0 && c.num.is_zero())
            .unwrap_or(false)
        {
            self.coeffs.pop();
        }
        while self
            .coeffs
            .first()
            .map(|c| c.den == 0 && c.num.is_zero())
            .unwrap_or(false)
        {
            self.coeffs.remove(0);
            self.z_low += 1;
        }
    }

    pub fn zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        RationalSeries {
            spec: Arc::clone(spec),
            prec,
            z_low: 0,
            z_high: EXACT_HI,
            coeffs: vec![],
        }
    }

    pub fn from_int_series(f: &IntSeries) -> Self {
        RationalSeries {
            spec: Arc::clone(f.spec()),
            prec: f.prec,
            z_low: f.z_low,
            z_high: f.z_high,
            coeffs: f.coeffs().iter().map(|c| RatScalar::from_int(c.clone())).collect(),
        }
    }

    pub fn coeff(&self, k: i64) -> Result<RatScalar> {
        if k >= self.z_high {
            return Err(Error::WindowTooSmall(format!(
                "rational coefficient of Z^{k} beyond window {}",
                self.z_high
            )));
        }
        if k < self.z_low || k >= self.z_low + self.coeffs.len() as i64 {
            return Ok(RatScalar::zero(&self.spec, self.prec));
        }
        Ok(self.coeffs[(k - self.z_low) as usize].clone())
    }

    pub fn max_den(&self) -> u32 {
        self.coeffs.iter().map(|c| c.den).max().unwrap_or(0)
    }

    pub fn check_budget(&self, budget: u32) -> Result<()> {
        if self.max_den() > budget {
            return Err(Error::DenominatorBudgetExceeded(format!(
                "denominator pi^{} exceeds budget pi^{budget}",
                self.max_den()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Self {
        let z_high = if is_exact_bound(self.z_high) && is_exact_bound(other.z_high) {
            EXACT_HI
        } else {
            self.z_high.min(other.z_high)
        };
        let lo = self.z_low.min(other.z_low);
        let hi_store = (self.z_low + self.coeffs.len() as i64)
            .max(other.z_low + other.coeffs.len() as i64)
            .min(z_high);
        let mut coeffs = vec![];
        let mut k = lo;
        while k < hi_store {
            let a = self.coeff(k).unwrap_or_else(|_| RatScalar::zero(&self.spec, self.prec));
            let b = other
                .coeff(k)
                .unwrap_or_else(|_| RatScalar::zero(&self.spec, self.prec));
            coeffs.push(a.add(&b));
            k += 1;
        }
        RationalSeries::new(&self.spec, self.prec.min(other.prec), lo, coeffs, z_high)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RationalSeries {
            spec: Arc::clone(&self.spec),
            prec: self.prec,
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let z_high = if is_exact_bound(self.z_high) && is_exact_bound(other.z_high) {
            EXACT_HI
        } else if is_exact_bound(self.z_high) {
            other.z_high.saturating_add(self.z_low)
        } else if is_exact_bound(other.z_high) {
            self.z_high.saturating_add(other.z_low)
        } else {
            (self.z_high + other.z_low).min(other.z_high + self.z_low)
        };
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            let mut out = RationalSeries::zero(&self.spec, self.prec.min(other.prec));
            out.z_high = z_high;
            return out;
        }
        let lo = self.z_low + other.z_low;
        let full_len = self.coeffs.len() + other.coeffs.len() - 1;
        let len = if is_exact_bound(z_high) {
            full_len
        } else {
            full_len.min((z_high - lo).max(0) as usize)
        };
        let prec = self.prec.min(other.prec);
        let mut coeffs = vec![RatScalar::zero(&self.spec, prec); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        RationalSeries::new(&self.spec, prec, lo, coeffs, z_high)
    }

    pub fn mul_scalar(&self, c: &RatScalar) -> Self {
        RationalSeries {
            spec: Arc::clone(&self.spec),
            prec: self.prec,
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self.coeffs.iter().map(|x| x.mul(c)).collect(),
        }
    }

    pub fn truncate_high(&self, h: i64) -> Self {
        let mut out = self.clone();
        out.z_high = out.z_high.min(h);
        out.trim();
        out
    }

    pub fn derivative(&self) -> Self {
        let coeffs: Vec<RatScalar> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.z_low + i as i64;
                RatScalar {
                    num: c.num.mul_i64(k),
                    den: c.den,
                }
                .normalize()
            })
            .collect();
        let z_high = if is_exact_bound(self.z_high) {
            EXACT_HI
        } else {
            self.z_high - 1
        };
        RationalSeries::new(&self.spec, self.prec, self.z_low - 1, coeffs, z_high)
    }

    /// Substitute this series (order >= 1) into an integral power series.
    pub fn substituted_into(&self, f: &IntSeries) -> Result<Self> {
        if f.z_low < 0 {
            return Err(Error::IllegalSubstituend(
                "cannot substitute into a series with poles".into(),
            ));
        }
        if self.z_low < 1 {
            return Err(Error::IllegalSubstituend(
                "rational substituend must have Z-order >= 1".into(),
            ));
        }
        let z_high = if is_exact_bound(f.z_high) && is_exact_bound(self.z_high) {
            EXACT_HI
        } else if is_exact_bound(self.z_high) {
            f.z_high.saturating_mul(self.z_low).min(EXACT_HI)
        } else {
            f.z_high.min(self.z_high)
        };
        let mut acc = RationalSeries::zero(&self.spec, f.prec);
        let top = f.z_low + f.coeffs().len() as i64;
        for k in (f.z_low..top).rev() {
            acc = acc.mul(self);
            if !is_exact_bound(z_high) {
                acc = acc.truncate_high(z_high);
            }
            let c = f.coeff(k)?;
            let cs = RationalSeries::new(
                &self.spec,
                f.prec,
                0,
                vec![RatScalar::from_int(c)],
                EXACT_HI,
            );
            acc = acc.add(&cs);
        }
        if f.z_low > 0 {
            let mut pw = RationalSeries::new(
                &self.spec,
                f.prec,
                0,
                vec![RatScalar::from_int(BaseElem::one(&self.spec, f.prec))],
                EXACT_HI,
            );
            for _ in 0..f.z_low {
                pw = pw.mul(self);
                if !is_exact_bound(z_high) {
                    pw = pw.truncate_high(z_high);
                }
            }
            acc = acc.mul(&pw);
        }
        let mut out = acc;
        out.z_high = out.z_high.min(z_high);
        out.trim();
        Ok(out)
    }

    /// Exact-integral view, if no denominators remain.
    pub fn to_int_series(&self) -> Result<IntSeries> {
        let mut coeffs = vec![];
        for c in &self.coeffs {
            let c = c.normalize();
            if c.den > 0 {
                return Err(Error::NotDivisible(format!(
                    "coefficient has pi^{} in the denominator",
                    c.den
                )));
            }
            coeffs.push(c.num);
        }
        Ok(IntSeries::new(
            &self.spec,
            self.prec,
            self.z_low,
            coeffs,
            self.z_high,
        ))
    }

    /// Coefficientwise value equality modulo `pi^t` on `[lo, hi)`.
    pub fn agree_on(&self, other: &Self, lo: i64, hi: i64, t: u32) -> Result<bool> {
        if hi > self.z_high || hi > other.z_high {
            return Err(Error::WindowTooSmall(format!(
                "rational comparison on [{lo},{hi}) but windows end at {} and {}",
                self.z_high, other.z_high
            )));
        }
        for k in lo..hi {
            let a = self.coeff(k)?;
            let b = other.coeff(k)?;
            if !a.equals_mod(&b, t)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3(prec: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 1, 1, None, None, prec).unwrap()
    }

    #[test]
    fn scalar_normalization_and_arith() {
        let s = z3(8);
        let third = RatScalar {
            num: BaseElem::one(&s, 6),
            den: 1,
        };
        let sum = third.add(&third).add(&third);
        // 3 * (1/3) = 1
        assert!(sum.equals_mod(&RatScalar::from_int(BaseElem::one(&s, 5)), 4).unwrap());
        let nine_thirds = RatScalar {
            num: BaseElem::from_i64(&s, 9, 6),
            den: 1,
        }
        .normalize();
        assert_eq!(nine_thirds.den, 0);
        assert!(nine_thirds.num.equals(&BaseElem::from_i64(&s, 3, 5)));
    }

    #[test]
    fn series_mul_with_denominators() {
        let s = z3(8);
        // (Z - Z^2/2... ) style: here (1/3) Z times 3 Z = Z^2
        let a = RationalSeries::new(
            &s,
            6,
            1,
            vec![RatScalar {
                num: BaseElem::one(&s, 6),
                den: 1,
            }],
            EXACT_HI,
        );
        let b = RationalSeries::from_int_series(&IntSeries::from_i64_coeffs(&s, 6, 1, &[3]));
        let p = a.mul(&b);
        let expect = RationalSeries::from_int_series(&IntSeries::from_i64_coeffs(&s, 6, 2, &[1]));
        assert!(p.agree_on(&expect, 0, 4, 4).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let s = z3(8);
        let c = RatScalar {
            num: BaseElem::one(&s, 6),
            den: 3,
        };
        let f = RationalSeries::new(&s, 6, 0, vec![c], EXACT_HI);
        assert!(f.check_budget(2).is_err());
        assert!(f.check_budget(3).is_ok());
    }
}
