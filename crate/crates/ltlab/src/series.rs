//! Truncated Laurent series with dual precision tracking.
//!
//! A [`Series`] models an element known modulo `(pi^prec, Z^z_high)`:
//! coefficients at exponents below `z_low` are exactly zero, coefficients in
//! `[z_low, z_high)` are known (stored densely, trailing zeros implied), and
//! nothing is claimed at `z_high` or beyond.  Exact polynomials carry the
//! sentinel bound [`EXACT_HI`], which saturates under the window algebra, so
//! polynomial inputs keep exact results exact.
//!
//! The same container serves the integral ring (coefficients in `o_L/pi^N`)
//! and its residue ring (coefficients in `k_L`); the latter ignores `prec`.

use std::fmt;
use std::sync::Arc;

use crate::base_ring::{BaseElem, BaseRingSpec, ResidueElem};
use crate::error::{Error, Result};

/// Sentinel `z_high` for exactly-known series. Any bound at or above
/// `EXACT_HI / 2` is treated as "exact".
pub const EXACT_HI: i64 = i64::MAX / 8;

pub fn is_exact_bound(h: i64) -> bool {
    h >= EXACT_HI / 2
}

fn min_hi(a: i64, b: i64) -> i64 {
    if is_exact_bound(a) && is_exact_bound(b) {
        EXACT_HI
    } else {
        a.min(b)
    }
}

/// Coefficient interface shared by `BaseElem` and `ResidueElem`.
pub trait Coeff: Clone + fmt::Debug {
    fn c_zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self;
    fn c_one(spec: &Arc<BaseRingSpec>, prec: u32) -> Self;
    fn c_add(&self, other: &Self) -> Self;
    fn c_sub(&self, other: &Self) -> Self;
    fn c_mul(&self, other: &Self) -> Self;
    fn c_neg(&self) -> Self;
    fn c_mul_i64(&self, n: i64, spec: &Arc<BaseRingSpec>) -> Self;
    fn c_is_zero(&self) -> bool;
    fn c_equals(&self, other: &Self) -> bool;
    fn c_prec(&self) -> u32;
    /// clamp claimed precision (no-op for residue coefficients)
    fn c_with_prec(&self, prec: u32) -> Self;
}

impl Coeff for BaseElem {
    fn c_zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        BaseElem::zero(spec, prec)
    }
    fn c_one(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        BaseElem::one(spec, prec)
    }
    fn c_add(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn c_sub(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn c_mul(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
    fn c_mul_i64(&self, n: i64, _spec: &Arc<BaseRingSpec>) -> Self {
        self.mul_i64(n)
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_equals(&self, other: &Self) -> bool {
        self.equals(other)
    }
    fn c_prec(&self) -> u32 {
        self.prec()
    }
    fn c_with_prec(&self, prec: u32) -> Self {
        self.with_prec(prec)
    }
}

impl Coeff for ResidueElem {
    fn c_zero(spec: &Arc<BaseRingSpec>, _prec: u32) -> Self {
        ResidueElem::zero(spec)
    }
    fn c_one(spec: &Arc<BaseRingSpec>, _prec: u32) -> Self {
        ResidueElem::one(spec)
    }
    fn c_add(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn c_sub(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn c_mul(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
    fn c_mul_i64(&self, n: i64, spec: &Arc<BaseRingSpec>) -> Self {
        self.mul(&ResidueElem::from_i64(spec, n))
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_equals(&self, other: &Self) -> bool {
        self == other
    }
    fn c_prec(&self) -> u32 {
        1
    }
    fn c_with_prec(&self, _prec: u32) -> Self {
        self.clone()
    }
}

/// Truncated Laurent series over the base ring or its residue field.
#[derive(Clone)]
pub struct Series<C: Coeff> {
    spec: Arc<BaseRingSpec>,
    /// pi-adic precision of every coefficient (1 for residue series).
    pub prec: u32,
    pub z_low: i64,
    /// exclusive knowledge bound on exponents
    pub z_high: i64,
    coeffs: Vec<C>,
}

pub type IntSeries = Series<BaseElem>;
pub type ResSeries = Series<ResidueElem>;

impl<C: Coeff> fmt::Debug for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Series[Z^{}..{}; pi^{}]{:?}",
            self.z_low,
            if is_exact_bound(self.z_high) {
                -1
            } else {
                self.z_high
            },
            self.prec,
            self.coeffs
        )
    }
}

impl<C: Coeff> Series<C> {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn new(spec: &Arc<BaseRingSpec>, prec: u32, z_low: i64, coeffs: Vec<C>, z_high: i64) -> Self {
        let eff_prec = coeffs
            .iter()
            .map(|c| c.c_prec())
            .fold(prec, |a, b| a.min(b));
        let mut s = Series {
            spec: Arc::clone(spec),
            prec: eff_prec,
            z_low,
            z_high,
            coeffs,
        };
        s.clamp_store();
        s.normalize();
        s
    }

    pub fn zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        Series {
            spec: Arc::clone(spec),
            prec,
            z_low: 0,
            z_high: EXACT_HI,
            coeffs: vec![],
        }
    }

    pub fn one(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        Self::monomial(spec, prec, 0)
    }

    /// exact `Z^k`
    pub fn monomial(spec: &Arc<BaseRingSpec>, prec: u32, k: i64) -> Self {
        Series {
            spec: Arc::clone(spec),
            prec,
            z_low: k,
            z_high: EXACT_HI,
            coeffs: vec![C::c_one(spec, prec)],
        }
    }

    fn clamp_store(&mut self) {
        if !is_exact_bound(self.z_high) {
            let max_len = (self.z_high - self.z_low).max(0) as usize;
            self.coeffs.truncate(max_len);
        }
    }

    /// Trim leading (known-zero) and stored-trailing zero coefficients.
    pub fn normalize(&mut self) {
        while let Some(first) = self.coeffs.first() {
            if first.c_is_zero() {
                self.coeffs.remove(0);
                self.z_low += 1;
            } else {
                break;
            }
        }
        while let Some(last) = self.coeffs.last() {
            if last.c_is_zero() {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.is_empty() {
            self.z_low = 0;
        }
    }

    pub fn is_exact(&self) -> bool {
        is_exact_bound(self.z_high)
    }

    /// True if every known coefficient is zero.
    pub fn is_zero_within_window(&self) -> bool {
        self.coeffs.iter().all(|c| c.c_is_zero())
    }

    /// Lowest exponent with a nonzero stored coefficient.
    pub fn order(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.c_is_zero())
            .map(|i| self.z_low + i as i64)
    }

    /// Highest exponent with a nonzero stored coefficient.
    pub fn top_degree(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .rposition(|c| !c.c_is_zero())
            .map(|i| self.z_low + i as i64)
    }

    fn get(&self, k: i64) -> Option<C> {
        if k >= self.z_high {
            return None;
        }
        if k < self.z_low || k >= self.z_low + self.coeffs.len() as i64 {
            return Some(C::c_zero(&self.spec, self.prec));
        }
        Some(self.coeffs[(k - self.z_low) as usize].clone())
    }

    /// Coefficient at `Z^k`; errors when `k` is outside the window.
    pub fn coeff(&self, k: i64) -> Result<C> {
        self.get(k).ok_or_else(|| {
            Error::WindowTooSmall(format!(
                "coefficient of Z^{k} requested, window ends at Z^{}",
                self.z_high
            ))
        })
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        let prec = prec.min(self.prec);
        Series {
            spec: Arc::clone(&self.spec),
            prec,
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self.coeffs.iter().map(|c| c.c_with_prec(prec)).collect(),
        }
    }

    pub fn truncate_high(&self, h: i64) -> Self {
        let mut out = self.clone();
        out.z_high = min_hi(out.z_high, h);
        out.clamp_store();
        out.normalize();
        out
    }

    /// The stored coefficients viewed as an exact polynomial (used by
    /// algorithms whose output windows are justified by a perturbation
    /// argument rather than by step-by-step propagation).
    pub(crate) fn exact_representative(&self) -> Self {
        let mut out = self.clone();
        out.z_high = EXACT_HI;
        out
    }

    /// multiply by `Z^k`
    pub fn shift(&self, k: i64) -> Self {
        let mut out = self.clone();
        out.z_low += k;
        if !is_exact_bound(out.z_high) {
            out.z_high += k;
        }
        out
    }

    fn same_spec(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.spec, &other.spec) || *self.spec == *other.spec,
            "spec mismatch in series arithmetic"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_spec(other);
        let z_high = min_hi(self.z_high, other.z_high);
        let prec = self.prec.min(other.prec);
        let lo = self.z_low.min(other.z_low);
        let hi_store = (self.z_low + self.coeffs.len() as i64)
            .max(other.z_low + other.coeffs.len() as i64)
            .min(z_high);
        let mut coeffs = Vec::new();
        let mut k = lo;
        while k < hi_store {
            let a = self.get(k).unwrap_or_else(|| C::c_zero(&self.spec, prec));
            let b = other.get(k).unwrap_or_else(|| C::c_zero(&self.spec, prec));
            coeffs.push(a.c_add(&b));
            k += 1;
        }
        Series::new(&self.spec, prec, lo, coeffs, z_high)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Series {
            spec: Arc::clone(&self.spec),
            prec: self.prec,
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self.coeffs.iter().map(|c| c.c_neg()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same_spec(other);
        let prec = self.prec.min(other.prec);
        let mut a = self.clone();
        a.normalize();
        let mut b = other.clone();
        b.normalize();
        // first unknown exponent of the product
        let z_high = if a.coeffs.is_empty() || b.coeffs.is_empty() {
            // a known zero factor: product is zero wherever either window reaches
            if a.coeffs.is_empty() && a.is_exact() || b.coeffs.is_empty() && b.is_exact() {
                EXACT_HI
            } else {
                min_hi(
                    if a.is_exact() { EXACT_HI } else { a.z_high + b.z_low },
                    if b.is_exact() { EXACT_HI } else { b.z_high + a.z_low },
                )
            }
        } else {
            min_hi(
                if a.is_exact() {
                    EXACT_HI
                } else {
                    a.z_high.saturating_add(b.z_low)
                },
                if b.is_exact() {
                    EXACT_HI
                } else {
                    b.z_high.saturating_add(a.z_low)
                },
            )
        };
        if a.coeffs.is_empty() || b.coeffs.is_empty() {
            let mut out = Series::zero(&self.spec, prec);
            out.z_high = z_high;
            return out;
        }
        let lo = a.z_low + b.z_low;
        let full_len = a.coeffs.len() + b.coeffs.len() - 1;
        let len = if is_exact_bound(z_high) {
            full_len
        } else {
            full_len.min((z_high - lo).max(0) as usize)
        };
        let mut coeffs = vec![C::c_zero(&self.spec, prec); len];
        for (i, ca) in a.coeffs.iter().enumerate() {
            if ca.c_is_zero() {
                continue;
            }
            for (j, cb) in b.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if cb.c_is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].c_add(&ca.c_mul(cb));
            }
        }
        Series::new(&self.spec, prec, lo, coeffs, z_high)
    }

    pub fn mul_coeff(&self, c: &C) -> Self {
        Series {
            spec: Arc::clone(&self.spec),
            prec: self.prec.min(c.c_prec()),
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self.coeffs.iter().map(|x| x.c_mul(c)).collect(),
        }
    }

    pub fn mul_i64(&self, n: i64) -> Self {
        Series {
            spec: Arc::clone(&self.spec),
            prec: self.prec,
            z_low: self.z_low,
            z_high: self.z_high,
            coeffs: self
                .coeffs
                .iter()
                .map(|x| x.c_mul_i64(n, &self.spec))
                .collect(),
        }
    }

    pub fn pow(&self, ex: u64) -> Self {
        let mut acc = Series::one(&self.spec, self.prec);
        let mut base = self.clone();
        let mut ex = ex;
        while ex > 0 {
            if ex & 1 == 1 {
                acc = acc.mul(&base);
            }
            ex >>= 1;
            if ex > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// termwise d/dZ
    pub fn derivative(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.z_low + i as i64;
            coeffs.push(c.c_mul_i64(k, &self.spec));
        }
        let z_high = if is_exact_bound(self.z_high) {
            EXACT_HI
        } else {
            self.z_high - 1
        };
        Series::new(&self.spec, self.prec, self.z_low - 1, coeffs, z_high)
    }

    /// Substitute `g` (of order >= 1) into `self` (no poles allowed).
    pub fn compose(&self, g: &Self) -> Result<Self> {
        self.same_spec(g);
        let mut f = self.clone();
        f.normalize();
        if f.z_low < 0 {
            return Err(Error::IllegalSubstituend(
                "cannot substitute into a series with poles".into(),
            ));
        }
        let mut g = g.clone();
        g.normalize();
        let r = match g.order() {
            Some(r) if r >= 1 => r,
            None if !g.is_exact() && g.z_high >= 1 => {
                // g is zero within its window; substitution gives the
                // constant term, known wherever g^1 is known
                let c = f.get(0).unwrap_or_else(|| C::c_zero(&self.spec, f.prec));
                let mut out = Series::new(&self.spec, f.prec.min(g.prec), 0, vec![c], g.z_high);
                out.normalize();
                return Ok(out);
            }
            None => {
                let c = f.get(0).unwrap_or_else(|| C::c_zero(&self.spec, f.prec));
                return Ok(Series::new(&self.spec, f.prec, 0, vec![c], EXACT_HI));
            }
            _ => {
                return Err(Error::IllegalSubstituend(
                    "substituend must have Z-order >= 1".into(),
                ))
            }
        };
        let z_high = if f.is_exact() && g.is_exact() {
            EXACT_HI
        } else if g.is_exact() {
            // the unknown tail of f enters at Z^(r * f.z_high)
            f.z_high.saturating_mul(r).min(EXACT_HI)
        } else {
            min_hi(f.z_high, g.z_high)
        };
        let prec = f.prec.min(g.prec);
        // Horner from the top stored coefficient, then the leading g^z_low
        let mut acc = Series::zero(&self.spec, prec);
        let top = f.z_low + f.coeffs.len() as i64;
        for k in (f.z_low..top).rev() {
            acc = acc.mul(&g);
            if !is_exact_bound(z_high) {
                acc = acc.truncate_high(z_high);
            }
            let c = f.get(k).unwrap();
            let cs = Series::new(&self.spec, prec, 0, vec![c], EXACT_HI);
            acc = acc.add(&cs);
        }
        if f.z_low > 0 {
            acc = acc.mul(&g.pow(f.z_low as u64));
        }
        let mut out = acc;
        out.z_high = min_hi(out.z_high, z_high);
        out.clamp_store();
        out.normalize();
        Ok(out)
    }

    /// Equality of known coefficients over `[lo, hi)`; errors if either
    /// window does not cover the range.
    pub fn agree_on(&self, other: &Self, lo: i64, hi: i64) -> Result<bool> {
        if hi > self.z_high || hi > other.z_high {
            return Err(Error::WindowTooSmall(format!(
                "comparison on [{lo},{hi}) but windows end at {} and {}",
                self.z_high, other.z_high
            )));
        }
        for k in lo..hi {
            let a = self.get(k).unwrap();
            let b = other.get(k).unwrap();
            if !a.c_equals(&b) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Equality on the intersection of the known windows, starting from the
    /// smaller `z_low` of the two.
    pub fn agree_within(&self, other: &Self) -> bool {
        let lo = self.z_low.min(other.z_low);
        let hi = min_hi(self.z_high, other.z_high);
        let hi = if is_exact_bound(hi) {
            (self.z_low + self.coeffs.len() as i64).max(other.z_low + other.coeffs.len() as i64)
        } else {
            hi
        };
        self.agree_on(other, lo, hi).unwrap_or(false)
    }
}

impl IntSeries {
    /// exact polynomial with integer coefficients, lowest exponent `z_low`
    pub fn from_i64_coeffs(
        spec: &Arc<BaseRingSpec>,
        prec: u32,
        z_low: i64,
        coeffs: &[i64],
    ) -> Self {
        let cs = coeffs
            .iter()
            .map(|&c| BaseElem::from_i64(spec, c, prec))
            .collect();
        Series::new(spec, prec, z_low, cs, EXACT_HI)
    }

    pub fn constant(c: &BaseElem) -> Self {
        Series::new(c.spec(), c.prec(), 0, vec![c.clone()], EXACT_HI)
    }

    /// coefficientwise reduction into the residue ring
    pub fn reduce_mod_pi(&self) -> ResSeries {
        Series::new(
            &self.spec.clone(),
            1,
            self.z_low,
            self.coeffs.iter().map(|c| c.reduce_residue()).collect(),
            self.z_high,
        )
    }

    /// Divide every coefficient by `pi^k` (each must be divisible).
    pub fn divide_by_pi_exact(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            coeffs.push(c.divide_by_pi_exact(k)?);
        }
        Ok(Series::new(
            &self.spec,
            self.prec.saturating_sub(k),
            self.z_low,
            coeffs,
            self.z_high,
        ))
    }

    /// Multiply by `pi^k`, raising the claimed precision to `prec + k`
    /// (sound: `pi^k * (a + O(pi^prec))` is determined mod `pi^(prec+k)`;
    /// the coefficient representatives are lifted with zero upper digits).
    pub fn mul_pi_pow(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        let new_prec = self.prec + k;
        let pik = self.spec.pi(new_prec).pow(k as u64);
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let lifted = BaseElem::from_coords(&self.spec, &c.canon_coords(), new_prec)
                    .expect("coordinate length is fixed by the spec");
                lifted.mul(&pik)
            })
            .collect();
        Series::new(&self.spec, new_prec, self.z_low, coeffs, self.z_high)
    }

    /// Inverse of a unit of the Laurent ring, computed out to `want_hi`.
    ///
    /// Units factor as `Z^k * u` with `u` a unit mod `pi` possibly carrying
    /// a `pi`-divisible Laurent tail; the residue inverse of `u` is lifted
    /// and corrected by a finite geometric series in the `pi`-divisible
    /// error.  Each geometric step costs up to the pole depth of `u` in
    /// window, so the computation runs at an inflated internal width.
    pub fn invert_unit(&self, want_hi: i64) -> Result<Self> {
        let mut f = self.clone();
        f.normalize();
        let rbar = f.reduce_mod_pi();
        let k = match rbar.order() {
            Some(k) => k,
            None => {
                return Err(Error::NotAUnit(
                    "series is 0 mod pi within its window".into(),
                ))
            }
        };
        let g = f.shift(-k); // order-0 unit mod pi
        let gbar = g.reduce_mod_pi();
        let pole_depth = (-g.z_low).max(0);
        let width = (want_hi + k).max(1) + (f.prec as i64 + 1) * pole_depth + 2;
        let vbar = gbar.invert_unit_power_series(width)?;
        let v0 = vbar.lift_teichmuller(f.prec);
        let e = g
            .mul(&v0)
            .truncate_high(width)
            .sub(&IntSeries::one(&self.spec, f.prec));
        debug_assert!(e.reduce_mod_pi().is_zero_within_window());
        // (1 + e)^{-1} = 1 - e + e^2 - ...; e is divisible by pi so prec terms suffice
        let mut acc = IntSeries::one(&self.spec, f.prec);
        for _ in 0..f.prec {
            acc = IntSeries::one(&self.spec, f.prec).sub(&e.mul(&acc).truncate_high(width));
        }
        let mut out = v0.mul(&acc).shift(-k);
        out.z_high = min_hi(out.z_high, want_hi);
        out.clamp_store();
        out.normalize();
        Ok(out)
    }
}

impl ResSeries {
    pub fn from_i64_coeffs(spec: &Arc<BaseRingSpec>, z_low: i64, coeffs: &[i64]) -> Self {
        let cs = coeffs
            .iter()
            .map(|&c| ResidueElem::from_i64(spec, c))
            .collect();
        Series::new(spec, 1, z_low, cs, EXACT_HI)
    }

    /// Lift with multiplicative (Teichmuller) coefficient lifts.
    pub fn lift_teichmuller(&self, prec: u32) -> IntSeries {
        Series::new(
            &self.spec.clone(),
            prec,
            self.z_low,
            self.coeffs.iter().map(|c| c.teichmuller(prec)).collect(),
            self.z_high,
        )
    }

    /// Inverse of a unit (nonzero lowest coefficient) by convolution.
    pub fn invert_unit_power_series(&self, width: i64) -> Result<Self> {
        let mut f = self.clone();
        f.normalize();
        let k = f
            .order()
            .ok_or_else(|| Error::NotAUnit("zero residue series".into()))?;
        let g = f.shift(-k);
        let c0 = g.coeff(0)?;
        let c0inv = c0.invert()?;
        let width = if g.is_exact() {
            width
        } else {
            width.min(g.z_high)
        };
        if width < 1 {
            return Err(Error::WindowTooSmall("inverse needs width >= 1".into()));
        }
        let mut v = vec![ResidueElem::zero(&self.spec); width as usize];
        v[0] = c0inv.clone();
        for j in 1..width as usize {
            let mut s = ResidueElem::zero(&self.spec);
            for i in 1..=j {
                let gi = g
                    .get(i as i64)
                    .unwrap_or_else(|| ResidueElem::zero(&self.spec));
                s = s.add(&gi.mul(&v[j - i]));
            }
            v[j] = c0inv.mul(&s.neg());
        }
        let z_high = if g.is_exact() { width } else { min_hi(width, g.z_high) };
        let mut out = Series::new(&self.spec, 1, 0, v, z_high);
        out = out.shift(-k);
        Ok(out)
    }

    /// The `q`-power map `sum c Z^j  ->  sum c Z^(qj)` (coefficients are
    /// fixed by Frobenius in `F_q`).
    pub fn frobenius_q(&self) -> Self {
        let q = self.spec.q as i64;
        let mut out = Series::zero(&self.spec, 1);
        out.z_high = if self.is_exact() {
            EXACT_HI
        } else {
            // knowledge of f mod Z^h determines f^q mod Z^(qh)
            self.z_high.saturating_mul(q).min(EXACT_HI)
        };
        if self.coeffs.is_empty() {
            return out;
        }
        let lo = self.z_low * q;
        let len = (self.coeffs.len() - 1) * q as usize + 1;
        let mut coeffs = vec![ResidueElem::zero(&self.spec); len];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i * q as usize] = c.clone();
        }
        Series::new(&self.spec, 1, lo, coeffs, out.z_high)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z3(prec: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 1, 1, None, None, prec).unwrap()
    }

    fn rand_series(
        spec: &Arc<BaseRingSpec>,
        prec: u32,
        lo: i64,
        hi: i64,
        rng: &mut ChaCha8Rng,
    ) -> IntSeries {
        let d = spec.pdigits_for(prec);
        let m = 3u64.pow(d);
        let coeffs: Vec<BaseElem> = (lo..hi)
            .map(|_| {
                let c = rng.gen_range(0..m);
                BaseElem::from_coords(spec, &[c], prec).unwrap()
            })
            .collect();
        Series::new(spec, prec, lo, coeffs, hi)
    }

    #[test]
    fn product_of_one_plus_minus_z() {
        let s = z3(6);
        let a = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        let b = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, -1]);
        let p = a.mul(&b);
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 0, -1]);
        assert!(p.agree_on(&expect, 0, 3).unwrap());
        assert!(p.is_exact());
    }

    #[test]
    fn laurent_cancellation() {
        let s = z3(6);
        let zinv = IntSeries::monomial(&s, 4, -1);
        let z = IntSeries::monomial(&s, 4, 1);
        let p = zinv.mul(&z);
        assert!(p.agree_on(&IntSeries::one(&s, 4), -1, 2).unwrap());
    }

    #[test]
    fn mul_associativity_on_random_windows() {
        let s = z3(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let f = rand_series(&s, 5, -3, 22, &mut rng);
            let g = rand_series(&s, 5, -2, 23, &mut rng);
            let h = rand_series(&s, 5, 0, 25, &mut rng);
            let a = f.mul(&g).mul(&h);
            let b = f.mul(&g.mul(&h));
            let lo = a.z_low.min(b.z_low);
            let hi = a.z_high.min(b.z_high);
            assert!(a.agree_on(&b, lo, hi).unwrap());
        }
    }

    #[test]
    fn invert_geometric() {
        let s = z3(6);
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, -1]); // 1 - Z
        let inv = f.invert_unit(8).unwrap();
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1, 1, 1, 1, 1, 1, 1]);
        assert!(inv.agree_on(&expect, 0, 8).unwrap());
    }

    #[test]
    fn invert_monomial_and_frobenius_series() {
        let s = z3(6);
        let z = IntSeries::monomial(&s, 3, 1);
        let zinv = z.invert_unit(5).unwrap();
        assert!(zinv
            .agree_on(&IntSeries::monomial(&s, 3, -1), -1, 5)
            .unwrap());

        // [pi](Z) = 3Z + Z^3 is a unit of the Laurent ring at prec 3
        let fpi = IntSeries::from_i64_coeffs(&s, 3, 0, &[0, 3, 0, 1]);
        let inv = fpi.invert_unit(4).unwrap();
        let one = fpi.mul(&inv);
        assert!(one.agree_on(&IntSeries::one(&s, 3), -3, 4).unwrap());
    }

    #[test]
    fn invert_round_trip() {
        let s = z3(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..15 {
            let mut f = rand_series(&s, 4, -2, 14, &mut rng);
            // force a unit: nonzero residue at Z^{-2}
            let c = BaseElem::from_i64(&s, 1 + rng.gen_range(0..2), 4);
            f = f.add(&IntSeries::constant(&c).shift(-2));
            let inv = f.invert_unit(10).unwrap();
            let back = inv.invert_unit(10).unwrap();
            let lo = f.z_low.max(back.z_low);
            let hi = back.z_high.min(f.z_high).min(6);
            assert!(back.agree_on(&f, lo, hi).unwrap(), "round trip failed");
        }
    }

    #[test]
    fn compose_basics() {
        let s = z3(6);
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, 0, 1]); // Z^2
        let g = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, 1, 1]); // Z + Z^2
        let c = f.compose(&g).unwrap();
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, 0, 1, 2, 1]);
        assert!(c.agree_on(&expect, 0, 5).unwrap());

        let zg = IntSeries::monomial(&s, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rand_series(&s, 4, 0, 12, &mut rng);
        let hh = h.compose(&zg).unwrap();
        assert!(hh.agree_on(&h, 0, 12).unwrap());
    }

    #[test]
    fn derivative_rules() {
        let s = z3(6);
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, 0, 0, 1]); // Z^3
        assert!(f
            .derivative()
            .agree_on(&IntSeries::from_i64_coeffs(&s, 4, 2, &[3]), 0, 4)
            .unwrap());
        let g = IntSeries::monomial(&s, 4, -1);
        assert!(g
            .derivative()
            .agree_on(&IntSeries::from_i64_coeffs(&s, 4, -2, &[-1]), -3, 2)
            .unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let f = rand_series(&s, 4, -2, 10, &mut rng);
            let g = rand_series(&s, 4, -1, 11, &mut rng);
            let lhs = f.mul(&g).derivative();
            let rhs = f.derivative().mul(&g).add(&f.mul(&g.derivative()));
            let lo = lhs.z_low.min(rhs.z_low);
            let hi = lhs.z_high.min(rhs.z_high);
            assert!(lhs.agree_on(&rhs, lo, hi).unwrap());
        }
    }

    #[test]
    fn reduce_and_lift() {
        let s = z3(6);
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[3, 1]);
        let r = f.reduce_mod_pi();
        assert!(r.agree_on(&ResSeries::from_i64_coeffs(&s, 1, &[1]), 0, 2).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let coeffs: Vec<ResidueElem> = (0..8)
                .map(|_| ResidueElem::from_i64(&s, rng.gen_range(0..3)))
                .collect();
            let rb = Series::new(&s, 1, -2, coeffs, 6);
            let lifted = rb.lift_teichmuller(4);
            assert!(lifted.reduce_mod_pi().agree_on(&rb, -2, 6).unwrap());
        }
    }

    #[test]
    fn window_soundness_under_truncation() {
        // recomputing at a larger window and truncating matches the
        // small-window result
        let s = z3(8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f_wide = rand_series(&s, 5, -2, 20, &mut rng);
            let g_wide = rand_series(&s, 5, -1, 20, &mut rng);
            let f_narrow = f_wide.truncate_high(9);
            let g_narrow = g_wide.truncate_high(9);
            let wide = f_wide.mul(&g_wide);
            let narrow = f_narrow.mul(&g_narrow);
            let lo = narrow.z_low;
            let hi = narrow.z_high;
            assert!(wide.truncate_high(hi).agree_on(&narrow, lo, hi).unwrap());
        }
    }

    #[test]
    fn coefficient_outside_window_errors() {
        let s = z3(6);
        let f = rand_series(&s, 4, 0, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(f.coeff(4).is_ok());
        assert!(matches!(f.coeff(5), Err(Error::WindowTooSmall(_))));
        assert!(f.coeff(-7).unwrap().is_zero());
    }
}
