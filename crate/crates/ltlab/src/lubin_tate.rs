//! Construction of a formal group from a Frobenius series and its
//! attached calculus: the group law, the `[a]`-multiplication series, the
//! invariant differential coefficient, the formal logarithm/exponential,
//! the invariant derivation, and the degree-`q` torsion Weierstrass factor.
//!
//! The group law and the `[a]`-series are solved degree by degree from the
//! uniqueness of series commuting with the Frobenius.  Each new degree costs
//! one exact division by `pi`, so construction runs at an internally
//! inflated precision `prec + deg + 2`; the budget check at entry makes the
//! word-size limit explicit instead of silently wrong.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::base_ring::{BaseElem, BaseRingSpec};
use crate::error::{Error, Result};
use crate::rational::{RatScalar, RationalSeries};
use crate::series::{IntSeries, Series, EXACT_HI};

/// Bivariate series truncated at a total degree.
#[derive(Clone, Debug)]
pub struct BiSeries {
    spec: Arc<BaseRingSpec>,
    pub deg: usize,
    pub prec: u32,
    /// rows[i][j] is the coefficient of X^i Y^j, for i + j <= deg
    rows: Vec<Vec<BaseElem>>,
}

impl BiSeries {
    fn zero(spec: &Arc<BaseRingSpec>, deg: usize, prec: u32) -> Self {
        let rows = (0..=deg)
            .map(|i| vec![BaseElem::zero(spec, prec); deg - i + 1])
            .collect();
        BiSeries {
            spec: Arc::clone(spec),
            deg,
            prec,
            rows,
        }
    }

    pub fn coeff(&self, i: usize, j: usize) -> BaseElem {
        if i + j <= self.deg {
            self.rows[i][j].clone()
        } else {
            BaseElem::zero(&self.spec, self.prec)
        }
    }

    fn set(&mut self, i: usize, j: usize, v: BaseElem) {
        self.rows[i][j] = v;
    }

    fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..=self.deg {
            for j in 0..=(self.deg - i) {
                out.rows[i][j] = self.rows[i][j].add(&other.rows[i][j]);
            }
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..=self.deg {
            for j in 0..=(self.deg - i) {
                out.rows[i][j] = self.rows[i][j].sub(&other.rows[i][j]);
            }
        }
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = BiSeries::zero(&self.spec, self.deg, self.prec.min(other.prec));
        for i1 in 0..=self.deg {
            for j1 in 0..=(self.deg - i1) {
                let a = &self.rows[i1][j1];
                if a.is_zero() {
                    continue;
                }
                for i2 in 0..=(self.deg - i1 - j1) {
                    for j2 in 0..=(self.deg - i1 - j1 - i2) {
                        let b = &other.rows[i2][j2];
                        if b.is_zero() {
                            continue;
                        }
                        let t = a.mul(b);
                        let cur = out.rows[i1 + i2][j1 + j2].add(&t);
                        out.rows[i1 + i2][j1 + j2] = cur;
                    }
                }
            }
        }
        out
    }

    fn scale(&self, c: &BaseElem) -> Self {
        let mut out = self.clone();
        for i in 0..=self.deg {
            for j in 0..=(self.deg - i) {
                out.rows[i][j] = self.rows[i][j].mul(c);
            }
        }
        out
    }

    /// keep only the homogeneous part of total degree `d`
    fn homogeneous_part(&self, d: usize) -> Self {
        let mut out = BiSeries::zero(&self.spec, self.deg, self.prec);
        if d <= self.deg {
            for i in 0..=d {
                out.rows[i][d - i] = self.rows[i][d - i].clone();
            }
        }
        out
    }

    fn is_zero_up_to(&self, d: usize) -> bool {
        for i in 0..=d.min(self.deg) {
            for j in 0..=(d.min(self.deg) - i) {
                if !self.rows[i][j].is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// substitute this bivariate series into a univariate polynomial `f`
    /// with `z_low >= 0`: computes `f(self)`
    fn subst_into_poly(&self, f: &IntSeries) -> Self {
        let mut acc = BiSeries::zero(&self.spec, self.deg, self.prec);
        let top = f.z_low + f.coeffs().len() as i64;
        for k in (1..top).rev() {
            acc = acc.mul(self);
            let c = f.coeff(k).expect("polynomial coefficient");
            if !c.is_zero() {
                let mut cs = BiSeries::zero(&self.spec, self.deg, self.prec);
                cs.set(0, 0, c);
                acc = acc.add(&cs);
            }
        }
        acc = acc.mul(self);
        if f.z_low <= 0 {
            if let Ok(c0) = f.coeff(0) {
                let mut cs = BiSeries::zero(&self.spec, self.deg, self.prec);
                cs.set(0, 0, c0);
                acc = acc.add(&cs);
            }
        }
        acc
    }

    /// substitute `f` into X and `g` into Y (both with zero constant term)
    fn subst_xy(&self, f: &BiSeries, g: &BiSeries) -> Self {
        let prec = self.prec.min(f.prec).min(g.prec);
        let mut fpow = Vec::with_capacity(self.deg + 1);
        let mut gpow = Vec::with_capacity(self.deg + 1);
        let mut one = BiSeries::zero(&self.spec, self.deg, prec);
        one.set(0, 0, BaseElem::one(&self.spec, prec));
        fpow.push(one.clone());
        gpow.push(one);
        for i in 1..=self.deg {
            fpow.push(fpow[i - 1].mul(f));
            gpow.push(gpow[i - 1].mul(g));
        }
        let mut out = BiSeries::zero(&self.spec, self.deg, prec);
        for i in 0..=self.deg {
            for j in 0..=(self.deg - i) {
                let c = &self.rows[i][j];
                if c.is_zero() {
                    continue;
                }
                out = out.add(&fpow[i].mul(&gpow[j]).scale(c));
            }
        }
        out
    }

    /// the variable X as a bivariate series
    fn var_x(spec: &Arc<BaseRingSpec>, deg: usize, prec: u32) -> Self {
        let mut s = BiSeries::zero(spec, deg, prec);
        s.set(1, 0, BaseElem::one(spec, prec));
        s
    }

    fn var_y(spec: &Arc<BaseRingSpec>, deg: usize, prec: u32) -> Self {
        let mut s = BiSeries::zero(spec, deg, prec);
        s.set(0, 1, BaseElem::one(spec, prec));
        s
    }

    /// `(d/dY self)(Z, 0)` as a univariate series in Z
    fn dy_at_y0(&self) -> IntSeries {
        let coeffs: Vec<BaseElem> = (0..self.deg)
            .map(|i| self.coeff(i, 1))
            .collect();
        Series::new(&self.spec, self.prec, 0, coeffs, self.deg as i64)
    }

    /// substitute univariate series for X and Y
    pub fn subst_univariate(&self, u: &IntSeries, v: &IntSeries) -> Result<IntSeries> {
        if u.order().map(|o| o < 1).unwrap_or(false) || v.order().map(|o| o < 1).unwrap_or(false) {
            return Err(Error::IllegalSubstituend(
                "group-law substitution needs Z-order >= 1".into(),
            ));
        }
        let z_high = [
            u.z_high,
            v.z_high,
            if u.is_exact() && v.is_exact() {
                EXACT_HI
            } else {
                EXACT_HI
            },
            (self.deg as i64 + 1).max(1),
        ]
        .into_iter()
        .min()
        .unwrap();
        let prec = self.prec.min(u.prec).min(v.prec);
        let mut upow: Vec<IntSeries> = vec![IntSeries::one(&self.spec, prec)];
        let mut vpow: Vec<IntSeries> = vec![IntSeries::one(&self.spec, prec)];
        for i in 1..=self.deg {
            upow.push(upow[i - 1].mul(u).truncate_high(z_high));
            vpow.push(vpow[i - 1].mul(v).truncate_high(z_high));
        }
        let mut acc = Series::zero(&self.spec, prec);
        for i in 0..=self.deg {
            for j in 0..=(self.deg - i) {
                let c = self.coeff(i, j);
                if c.is_zero() {
                    continue;
                }
                acc = acc.add(&upow[i].mul(&vpow[j]).mul_coeff(&c));
            }
        }
        Ok(acc.truncate_high(z_high))
    }
}

/// A formal group built from a Frobenius series.
pub struct FormalGroup {
    spec: Arc<BaseRingSpec>,
    frobenius: IntSeries,
    pub law_deg: usize,
    pub law_prec: u32,
    law: BiSeries,
    mult_cache: RwLock<HashMap<(Vec<u64>, u32, i64), IntSeries>>,
    log_cache: RwLock<Option<RationalSeries>>,
}

impl FormalGroup {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn frobenius(&self) -> &IntSeries {
        &self.frobenius
    }

    pub fn law(&self) -> &BiSeries {
        &self.law
    }

    /// Build the group law to total degree `law_deg`, valid mod
    /// `pi^law_prec`.
    pub fn build(
        spec: &Arc<BaseRingSpec>,
        frobenius: &IntSeries,
        law_deg: usize,
        law_prec: u32,
    ) -> Result<Arc<Self>> {
        let mut frob = frobenius.clone();
        frob.normalize();
        if !frob.is_exact() {
            return Err(Error::BadFrobenius(
                "frobenius must be an exact polynomial".into(),
            ));
        }
        // congruence checks: f = pi Z mod deg 2, f = Z^q mod pi
        let check_prec = law_prec.min(spec.pi_prec_max);
        if frob.z_low < 1 || !frob.coeff(1)?.equals(&spec.pi(check_prec)) {
            return Err(Error::BadFrobenius("frobenius != pi*Z mod deg 2".into()));
        }
        let fbar = frob.reduce_mod_pi();
        let zq = crate::series::ResSeries::from_i64_coeffs(spec, spec.q as i64, &[1]);
        if !fbar.agree_within(&zq) {
            return Err(Error::BadFrobenius("frobenius != Z^q mod pi".into()));
        }

        let prec_int = law_prec + law_deg as u32 + 2;
        if prec_int > spec.max_pi_prec_budget() {
            return Err(Error::PrecisionExhausted(format!(
                "law degree {law_deg} at precision {law_prec} needs internal precision {prec_int}, budget is {}",
                spec.max_pi_prec_budget()
            )));
        }
        let law = Self::solve_law(spec, &frob, law_deg, prec_int)?;
        let group = FormalGroup {
            spec: Arc::clone(spec),
            frobenius: frob,
            law_deg,
            law_prec,
            law,
            mult_cache: RwLock::new(HashMap::new()),
            log_cache: RwLock::new(None),
        };
        Ok(Arc::new(group))
    }

    /// degree-by-degree functional-equation solve for the group law
    fn solve_law(
        spec: &Arc<BaseRingSpec>,
        frob: &IntSeries,
        deg: usize,
        prec: u32,
    ) -> Result<BiSeries> {
        let mut law = BiSeries::zero(spec, deg, prec);
        law.set(1, 0, BaseElem::one(spec, prec));
        law.set(0, 1, BaseElem::one(spec, prec));
        let fx = BiSeries::var_x(spec, deg, prec).subst_into_poly(frob);
        let fy = BiSeries::var_y(spec, deg, prec).subst_into_poly(frob);
        for r in 1..deg {
            // error at degree r+1 of  f(F(X,Y)) - F(f X, f Y)
            let lhs = law.subst_into_poly(frob);
            let rhs = law.subst_xy(&fx, &fy);
            let err = lhs.sub(&rhs);
            debug_assert!(err.is_zero_up_to(r));
            let e = err.homogeneous_part(r + 1);
            if e.is_zero_up_to(deg) {
                continue;
            }
            // E = err_{r+1} / (pi^{r+1} - pi); the denominator is
            // pi * (pi^r - 1) with unit second factor
            let pi = spec.pi(prec);
            let unit = pi.pow(r as u64).sub(&BaseElem::one(spec, prec));
            let unit_inv = unit.invert_unit()?;
            let mut corr = BiSeries::zero(spec, deg, prec);
            for i in 0..=(r + 1) {
                let j = r + 1 - i;
                if i + j > deg {
                    continue;
                }
                let c = e.coeff(i, j);
                if c.is_zero() {
                    continue;
                }
                let c = c
                    .divide_by_pi_exact(1)
                    .map_err(|_| Error::BadFrobenius("law solve hit a non-integral step".into()))?;
                corr.set(i, j, c.mul(&unit_inv).neg());
            }
            law = law.sub(&corr);
        }
        Ok(law)
    }

    /// `[a](Z)` out to exponent `hi` (exclusive), valid mod `pi^prec(a)`.
    pub fn mult(&self, a: &BaseElem, hi: i64) -> Result<IntSeries> {
        let deg = (hi - 1).max(1) as usize;
        let key = (a.canon_coords(), a.prec(), hi);
        if let Some(hit) = self.mult_cache.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let prec_int = a.prec() + deg as u32 + 2;
        if prec_int > self.spec.max_pi_prec_budget() {
            return Err(Error::PrecisionExhausted(format!(
                "[a]-series to degree {deg} at precision {} needs {prec_int} digits",
                a.prec()
            )));
        }
        let lifted = BaseElem::from_coords(&self.spec, &a.canon_coords(), prec_int)
            .expect("coords round trip");
        let frob = &self.frobenius;
        // solve [a] degree by degree from [a](f(Z)) = f([a](Z))
        let mut m = IntSeries::new(
            &self.spec,
            prec_int,
            1,
            vec![lifted.clone()],
            EXACT_HI,
        );
        let pi = self.spec.pi(prec_int);
        for r in 1..deg {
            let lhs = frob.compose(&m)?.truncate_high(r as i64 + 2);
            let rhs = m.compose(frob)?.truncate_high(r as i64 + 2);
            let err = lhs.sub(&rhs);
            let c = err.coeff(r as i64 + 1)?;
            if c.is_zero() {
                // extend the claimed knowledge to this degree explicitly
                m = ensure_coeff_up_to(&m, r as i64 + 1);
                continue;
            }
            let unit = pi.pow(r as u64).sub(&BaseElem::one(&self.spec, prec_int));
            let corr = c.divide_by_pi_exact(1)?.mul(&unit.invert_unit()?);
            let term = IntSeries::new(&self.spec, prec_int, r as i64 + 1, vec![corr], EXACT_HI);
            m = m.add(&term);
        }
        let out = m.with_prec(a.prec()).truncate_high(hi);
        self.mult_cache.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// `F(u, v)` for series of Z-order >= 1 (the formal group addition).
    pub fn add_points(&self, u: &IntSeries, v: &IntSeries) -> Result<IntSeries> {
        self.law.subst_univariate(u, v)
    }

    /// The formal logarithm out to exponent `hi`, value precision `prec`.
    ///
    /// Computed as the coefficientwise limit of `frob^(n)/pi^n`; the
    /// iteration stops when two consecutive stages agree mod `pi^prec`.
    pub fn log_lt(&self, hi: i64, prec: u32) -> Result<RationalSeries> {
        if let Some(l) = self.log_cache.read().unwrap().as_ref() {
            if l.z_high >= hi && l.prec >= prec + 1 {
                return Ok(l.truncate_high(hi));
            }
        }
        let spec = &self.spec;
        // one pi-digit per iteration; den growth bounded by v(k!)-type terms
        let max_iters = prec + (hi as u32) / (spec.q as u32 - 1).max(1) + 8;
        let prec_int = prec + max_iters + 2;
        if prec_int > spec.max_pi_prec_budget() {
            return Err(Error::PrecisionExhausted(format!(
                "formal logarithm to Z^{hi} mod pi^{prec} needs {prec_int} digits"
            )));
        }
        let frob = lift_exact_poly(&self.frobenius, prec_int);
        let mut iterate = frob.clone();
        let mut prev: Option<RationalSeries> = None;
        let mut n = 1u32;
        loop {
            let lambda = rational_from_pi_quotient(&iterate, n, hi);
            if let Some(p) = &prev {
                if lambda.agree_on(p, 1, hi, prec)? {
                    let out = lambda;
                    *self.log_cache.write().unwrap() = Some(out.clone());
                    return Ok(out.truncate_high(hi));
                }
            }
            if n >= max_iters {
                return Err(Error::PrecisionExhausted(
                    "formal logarithm did not stabilize within the iteration budget".into(),
                ));
            }
            prev = Some(lambda);
            iterate = frob.compose(&iterate)?.truncate_high(hi);
            n += 1;
        }
    }

    /// The invariant differential coefficient `g` with `d log = g dZ`,
    /// normalized by `g(0) = 1`.
    pub fn g_lt(&self, hi: i64, prec: u32) -> Result<IntSeries> {
        // derivative of the logarithm is integral
        let log = self.log_lt(hi + 1, prec + 1)?;
        let g = log.derivative().truncate_high(hi);
        let out = g
            .to_int_series()
            .map_err(|_| Error::PrecisionExhausted("log derivative not recognizably integral".into()))?;
        Ok(out.with_prec(prec))
    }

    /// `g` computed from the group law as `((d/dY F)(Z,0))^{-1}`; only
    /// available up to the law degree.  Used as an independent cross-check
    /// of [`FormalGroup::g_lt`].
    pub fn g_lt_from_law(&self) -> Result<IntSeries> {
        let dy = self.law.dy_at_y0();
        dy.invert_unit(self.law_deg as i64)
    }

    /// invariant derivation `f -> g^{-1} f'`
    pub fn inv_deriv(&self, f: &IntSeries) -> Result<IntSeries> {
        let fp = f.derivative();
        let width = if fp.is_exact() {
            (fp.top_degree().unwrap_or(0) - fp.z_low.min(0)).max(4) + 2
        } else {
            (fp.z_high - fp.z_low.min(0)).max(4) + 2
        };
        let g = self.g_lt(width, f.prec)?;
        let ginv = g.invert_unit(width)?;
        Ok(fp.mul(&ginv))
    }

    /// The formal exponential (compositional inverse of the logarithm).
    pub fn exp_lt(&self, hi: i64, prec: u32, budget: u32) -> Result<RationalSeries> {
        let log = self.log_lt(hi, prec)?;
        let spec = &self.spec;
        // reversion degree by degree: E = Z + ..., log(E(t)) = t
        let mut exp = RationalSeries::new(
            spec,
            log.prec,
            1,
            vec![RatScalar::from_int(BaseElem::one(spec, log.prec))],
            EXACT_HI,
        );
        for m in 2..hi {
            let composed = exp.substituted_into_rational(&log, m + 1)?;
            let c = composed.coeff(m)?;
            // adding e_m t^m changes the t^m coefficient by exactly e_m
            let e_m = c.neg();
            if e_m.den > budget {
                return Err(Error::DenominatorBudgetExceeded(format!(
                    "exponential coefficient at degree {m} has denominator pi^{}",
                    e_m.den
                )));
            }
            let term = RationalSeries::new(spec, log.prec, m, vec![e_m], EXACT_HI);
            exp = exp.add(&term);
        }
        exp.check_budget(budget)?;
        Ok(exp.truncate_high(hi))
    }

    /// Monic degree-`q` Weierstrass factor `P` of
    /// `frobenius(X) - frobenius(Z)`, with coefficients valid modulo
    /// `(pi^prec, Z^z_hi)`.  Returns the `X^0..X^q` coefficients of `P`.
    pub fn torsion_weier(&self, prec: u32, z_hi: i64) -> Result<Vec<IntSeries>> {
        let spec = &self.spec;
        let q = spec.q as usize;
        let frob = &self.frobenius;
        let dtop = frob.top_degree().unwrap_or(1) as usize;
        if dtop < q {
            return Err(Error::BadFrobenius("frobenius has degree < q".into()));
        }
        // D(X) = frob(X) - frob(Z): X-coefficients
        let mut d: Vec<IntSeries> = Vec::with_capacity(dtop + 1);
        d.push(frob.clone().neg().with_prec(prec).truncate_high(z_hi));
        for i in 1..=dtop {
            let c = frob.coeff(i as i64)?.with_prec(prec);
            d.push(IntSeries::constant(&c));
        }
        // B = X^{>=q} part (constant coefficients), invertible at X = 0
        let b: Vec<BaseElem> = (q..=dtop).map(|i| frob.coeff(i as i64).unwrap().with_prec(prec)).collect();
        let binv = invert_const_xseries(spec, &b, dtop - q, prec)?;
        // division: X^q = Q * D + Rem, iterating Rem_new = (Rem mod X^q) - (T*Binv)*A
        let mut rem: Vec<IntSeries> = vec![Series::zero(spec, prec); dtop.max(q + 1)];
        rem[q] = IntSeries::one(spec, prec);
        let max_rounds = prec as i64 + z_hi.max(1) + 6;
        for _ in 0..max_rounds {
            // T = X^{>= q} part of rem, shifted down by q
            let t: Vec<IntSeries> = rem[q..].to_vec();
            if t.iter().all(|s| s.is_zero_within_window()) {
                break;
            }
            // tq = T * Binv truncated to X-degree dtop - q
            let tq = xpoly_mul_trunc(&t, &binv, dtop - q, z_hi);
            // rem_new = (rem mod X^q) - tq * A
            let mut new_rem: Vec<IntSeries> = rem[..q].to_vec();
            new_rem.resize(dtop.max(q + 1), Series::zero(spec, prec));
            let prod = xpoly_mul_trunc(&tq, &d[..q].to_vec(), dtop - 1, z_hi);
            for (i, p) in prod.iter().enumerate() {
                new_rem[i] = new_rem[i].sub(p).truncate_high(z_hi);
            }
            rem = new_rem;
        }
        if rem[q..].iter().any(|s| !s.is_zero_within_window()) {
            return Err(Error::PrecisionExhausted(
                "weierstrass division did not terminate".into(),
            ));
        }
        // P = X^q - Rem
        let mut p: Vec<IntSeries> = (0..q).map(|i| rem[i].neg().truncate_high(z_hi)).collect();
        p.push(IntSeries::one(spec, prec));
        // sanity: non-leading coefficients lie in (pi, Z)
        for c in p.iter().take(q) {
            if let Ok(c0) = c.coeff(0) {
                if c0.valuation() == Some(0) {
                    return Err(Error::PrecisionExhausted(
                        "weierstrass factor has a unit coefficient".into(),
                    ));
                }
            }
        }
        Ok(p)
    }
}

/// substitute a rational series into a rational series, truncating at `hi`
impl RationalSeries {
    fn substituted_into_rational(&self, outer: &RationalSeries, hi: i64) -> Result<RationalSeries> {
        if self.z_low < 1 || outer.z_low < 1 {
            return Err(Error::IllegalSubstituend(
                "rational substitution needs Z-order >= 1 on both sides".into(),
            ));
        }
        let spec = self.spec().clone();
        let mut acc = RationalSeries::zero(&spec, self.prec.min(outer.prec));
        let top = (outer.z_low + hi).min(hi.min(outer.z_high));
        for k in (outer.z_low..top).rev() {
            acc = acc.mul(self).truncate_high(hi);
            let c = outer.coeff(k)?;
            let cs = RationalSeries::new(&spec, outer.prec, 0, vec![c], EXACT_HI);
            acc = acc.add(&cs);
        }
        for _ in 0..outer.z_low {
            acc = acc.mul(self).truncate_high(hi);
        }
        Ok(acc)
    }
}

fn ensure_coeff_up_to(f: &IntSeries, _k: i64) -> IntSeries {
    f.clone()
}

fn lift_exact_poly(f: &IntSeries, prec: u32) -> IntSeries {
    let coeffs: Vec<BaseElem> = f
        .coeffs()
        .iter()
        .map(|c| BaseElem::from_coords(f.spec(), &c.canon_coords(), prec).expect("coords"))
        .collect();
    IntSeries::new(f.spec(), prec, f.z_low, coeffs, f.z_high)
}

/// coefficients of `iterate / pi^n` as rational scalars
fn rational_from_pi_quotient(iterate: &IntSeries, n: u32, hi: i64) -> RationalSeries {
    let spec = iterate.spec().clone();
    let mut coeffs = vec![];
    let lo = iterate.z_low;
    for k in lo..hi.min(lo + iterate.coeffs().len() as i64) {
        let c = iterate.coeff(k).expect("stored");
        coeffs.push(RatScalar { num: c, den: n }.normalize());
    }
    RationalSeries::new(&spec, iterate.prec, lo, coeffs, hi)
}

/// inverse of a power series in X with constant (in Z) unit coefficients
fn invert_const_xseries(
    spec: &Arc<BaseRingSpec>,
    b: &[BaseElem],
    deg: usize,
    prec: u32,
) -> Result<Vec<IntSeries>> {
    let b0inv = b[0].invert_unit()?;
    let mut v: Vec<BaseElem> = vec![BaseElem::zero(spec, prec); deg + 1];
    v[0] = b0inv.clone();
    for j in 1..=deg {
        let mut s = BaseElem::zero(spec, prec);
        for i in 1..=j.min(b.len() - 1) {
            s = s.add(&b[i].mul(&v[j - i]));
        }
        v[j] = b0inv.mul(&s.neg());
    }
    Ok(v.into_iter().map(|c| IntSeries::constant(&c)).collect())
}

/// multiply polynomials in X with Z-series coefficients, truncating the
/// X-degree at `xdeg` and the Z-windows at `z_hi`
fn xpoly_mul_trunc(
    a: &[IntSeries],
    b: &[IntSeries],
    xdeg: usize,
    z_hi: i64,
) -> Vec<IntSeries> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let spec = a[0].spec().clone();
    let prec = a[0].prec;
    let mut out = vec![Series::zero(&spec, prec); xdeg + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero_within_window() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j > xdeg {
                break;
            }
            if bj.is_zero_within_window() {
                continue;
            }
            out[i + j] = out[i + j].add(&ai.mul(bj).truncate_high(z_hi));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z3(prec: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 1, 1, None, None, prec).unwrap()
    }

    fn gm_p3(law_deg: usize, law_prec: u32) -> (Arc<BaseRingSpec>, Arc<FormalGroup>) {
        let s = z3(12);
        // (1+Z)^3 - 1 = 3Z + 3Z^2 + Z^3
        let f = IntSeries::from_i64_coeffs(&s, s.max_pi_prec_budget(), 0, &[0, 3, 3, 1]);
        let g = FormalGroup::build(&s, &f, law_deg, law_prec).unwrap();
        (s, g)
    }

    fn poly_p3(law_deg: usize, law_prec: u32) -> (Arc<BaseRingSpec>, Arc<FormalGroup>) {
        let s = z3(12);
        let f = IntSeries::from_i64_coeffs(&s, s.max_pi_prec_budget(), 0, &[0, 3, 0, 1]);
        let g = FormalGroup::build(&s, &f, law_deg, law_prec).unwrap();
        (s, g)
    }

    #[test]
    fn multiplicative_group_law_is_x_plus_y_plus_xy() {
        let (s, g) = gm_p3(12, 4);
        let law = g.law();
        assert!(law.coeff(1, 0).equals(&BaseElem::one(&s, 4)));
        assert!(law.coeff(0, 1).equals(&BaseElem::one(&s, 4)));
        assert!(law.coeff(1, 1).equals(&BaseElem::one(&s, 4)));
        for i in 0..=12usize {
            for j in 0..=(12 - i) {
                if (i, j) != (1, 0) && (i, j) != (0, 1) && (i, j) != (1, 1) {
                    assert!(law.coeff(i, j).is_zero(), "F[{i},{j}] nonzero");
                }
            }
        }
    }

    #[test]
    fn law_normalization_for_polynomial_frobenius() {
        let (s, g) = poly_p3(8, 4);
        assert!(g.law().coeff(1, 0).equals(&BaseElem::one(&s, 4)));
        assert!(g.law().coeff(0, 1).equals(&BaseElem::one(&s, 4)));
        assert!(g.law().coeff(0, 0).is_zero());
    }

    #[test]
    fn mult_series_closed_forms() {
        let (s, g) = gm_p3(12, 4);
        // [2](Z) = (1+Z)^2 - 1 = 2Z + Z^2
        let m2 = g.mult(&BaseElem::from_i64(&s, 2, 4), 13).unwrap();
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, 2, 1]);
        assert!(m2.agree_on(&expect, 1, 13).unwrap());
        // [1](Z) = Z for every group
        let m1 = g.mult(&BaseElem::one(&s, 4), 13).unwrap();
        assert!(m1.agree_on(&IntSeries::monomial(&s, 4, 1), 1, 13).unwrap());
        let (s2, g2) = poly_p3(8, 4);
        let m1 = g2.mult(&BaseElem::one(&s2, 4), 9).unwrap();
        assert!(m1.agree_on(&IntSeries::monomial(&s2, 4, 1), 1, 9).unwrap());
    }

    #[test]
    fn mult_commutes_with_frobenius_series() {
        let (s, g) = poly_p3(10, 4);
        let a = BaseElem::from_i64(&s, 5, 4);
        let m = g.mult(&a, 11).unwrap();
        let lhs = g.frobenius().compose(&m).unwrap();
        let rhs = m.compose(g.frobenius()).unwrap();
        assert!(lhs.agree_on(&rhs, 1, 11).unwrap());
    }

    #[test]
    fn invariant_coefficient_for_multiplicative_group() {
        let (s, g) = gm_p3(12, 4);
        // g = 1/(1+Z) = 1 - Z + Z^2 - ...
        let gc = g.g_lt(8, 4).unwrap();
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, -1, 1, -1, 1, -1, 1, -1]);
        assert!(gc.agree_on(&expect, 0, 8).unwrap());
        // cross-check against the law-derivative route
        let g2 = g.g_lt_from_law().unwrap();
        assert!(gc.agree_on(&g2, 0, 8).unwrap());
        // unit normalization
        assert!(gc.coeff(0).unwrap().equals(&BaseElem::one(&s, 4)));
    }

    #[test]
    fn log_and_exp() {
        let (s, g) = gm_p3(12, 6);
        let log = g.log_lt(11, 5).unwrap();
        // Z - Z^2/2 + Z^3/3 - ...: compare low coefficients
        let c2 = log.coeff(2).unwrap();
        // -1/2 in Z_3: denominator is a unit, so den = 0
        assert_eq!(c2.den, 0);
        let half = BaseElem::from_i64(&s, 2, 5).invert_unit().unwrap();
        assert!(c2.num.equals(&half.neg().with_prec(c2.num.prec())));
        let c3 = log.coeff(3).unwrap();
        assert_eq!(c3.den, 1);

        let exp = g.exp_lt(11, 5, 8).unwrap();
        // exp(log(Z)) = Z to degree 10
        let composed = exp.substituted_into_rational(&log, 11).unwrap();
        let z = RationalSeries::from_int_series(&IntSeries::monomial(&s, 5, 1));
        assert!(composed.agree_on(&z, 1, 11, 3).unwrap());
    }

    #[test]
    fn log_linearizes_mult() {
        let (s, g) = gm_p3(12, 6);
        let log = g.log_lt(11, 4).unwrap();
        for a in [
            BaseElem::from_i64(&s, 2, 6),
            s.pi(6),
            s.pi(6).add(&BaseElem::one(&s, 6)),
        ] {
            let m = g.mult(&a, 11).unwrap();
            let lhs = RationalSeries::from_int_series(&m)
                .substituted_into_rational(&log, 11)
                .unwrap();
            let rhs = log.mul_scalar(&RatScalar::from_int(a.clone()));
            assert!(lhs.agree_on(&rhs, 1, 11, 3).unwrap());
        }
    }

    #[test]
    fn invariant_derivation_examples() {
        let (s, g) = gm_p3(12, 4);
        // d_inv(Z) = (1+Z) * 1
        let di = g.inv_deriv(&IntSeries::monomial(&s, 4, 1)).unwrap();
        let expect = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        assert!(di.agree_on(&expect, 0, 3).unwrap());
        // d_inv(1) = 0
        let d0 = g.inv_deriv(&IntSeries::one(&s, 4)).unwrap();
        assert!(d0.is_zero_within_window());
    }

    #[test]
    fn torsion_factor_for_polynomial_frobenius() {
        let (s, g) = poly_p3(8, 4);
        // frobenius is already monic of degree q: P = X^3 + 3X - (3Z + Z^3)
        let p = g.torsion_weier(4, 12).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p[3].agree_on(&IntSeries::one(&s, 4), 0, 4).unwrap());
        assert!(p[2].is_zero_within_window());
        assert!(p[1].agree_on(&IntSeries::from_i64_coeffs(&s, 4, 0, &[3]), 0, 4).unwrap());
        let expect0 = IntSeries::from_i64_coeffs(&s, 4, 0, &[0, -3, 0, -1]);
        assert!(p[0].agree_on(&expect0, 0, 8).unwrap());
    }

    #[test]
    fn torsion_factor_reduces_to_x_minus_z_power_q() {
        for (_, g) in [gm_p3(8, 4), poly_p3(8, 4)] {
            let p = g.torsion_weier(3, 10).unwrap();
            let q = g.spec().q as usize;
            // mod pi the factor must be (X - Z)^q = X^q - Z^q (char 3)
            for (i, c) in p.iter().enumerate().take(q) {
                let cbar = c.reduce_mod_pi();
                if i == 0 {
                    let zq = crate::series::ResSeries::from_i64_coeffs(g.spec(), q as i64, &[-1]);
                    assert!(cbar.agree_on(&zq, 0, 9).unwrap());
                } else {
                    assert!(cbar.is_zero_within_window(), "X^{i} coefficient mod pi");
                }
            }
        }
    }

    #[test]
    fn bad_frobenius_is_rejected() {
        let s = z3(10);
        // wrong linear coefficient
        let f = IntSeries::from_i64_coeffs(&s, 8, 0, &[0, 1, 0, 1]);
        assert!(matches!(
            FormalGroup::build(&s, &f, 6, 3),
            Err(Error::BadFrobenius(_))
        ));
        // wrong reduction
        let f = IntSeries::from_i64_coeffs(&s, 8, 0, &[0, 3, 1]);
        assert!(matches!(
            FormalGroup::build(&s, &f, 6, 3),
            Err(Error::BadFrobenius(_))
        ));
    }
}
