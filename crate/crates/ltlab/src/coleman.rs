//! The operator calculus on the Laurent ring attached to a formal group:
//! the Frobenius-substitution endomorphism `phi`, the unit-group action,
//! the trace-type left inverse `psi`, the multiplicative norm operator,
//! the logarithmic derivative, norm-fixed lifts of residue units, and
//! Coates-Wiles values.
//!
//! `phi` sends `f(Z)` to `f([pi](Z))`.  Since `1, Z, ..., Z^(q-1)` is a
//! basis over the image of `phi`, every series decomposes as
//! `f = sum_i phi(f_i) Z^i`; the decomposition is computed mod `pi` by
//! exponent classes and lifted digit by digit.  Trace and norm are then the
//! matrix trace and determinant of multiplication in this basis, which
//! keeps everything inside series over the base ring (no torsion points
//! are ever constructed).

use std::sync::Arc;

use crate::base_ring::{BaseElem, BaseRingSpec};
use crate::error::{Error, Result};
use crate::lubin_tate::FormalGroup;
use crate::rational::RatScalar;
use crate::series::{is_exact_bound, IntSeries, ResSeries, Series, EXACT_HI};

pub struct ColemanContext {
    group: Arc<FormalGroup>,
    /// working pi-adic precision
    pub prec: u32,
    /// default working Z-window width
    pub zwidth: i64,
    /// `psi(Z^i)` for `0 <= i < q`, exact polynomials valid mod `pi^prec`
    psi_table: Vec<IntSeries>,
    /// cached torsion Weierstrass factor at the build window
    weier: Vec<IntSeries>,
}

impl ColemanContext {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        self.group.spec()
    }

    pub fn group(&self) -> &Arc<FormalGroup> {
        &self.group
    }

    pub fn q(&self) -> u64 {
        self.spec().q
    }

    pub fn weier(&self) -> &[IntSeries] {
        &self.weier
    }

    pub fn psi_table(&self) -> &[IntSeries] {
        &self.psi_table
    }

    /// Build the context: the `psi(Z^i)` table from basis decompositions,
    /// cross-checked against Newton power sums of the torsion factor, and
    /// the norm-operator oracle gate.
    pub fn build(group: &Arc<FormalGroup>, prec: u32, zwidth: i64) -> Result<Arc<Self>> {
        let spec = group.spec().clone();
        let q = spec.q as usize;
        let mut ctx = ColemanContext {
            group: Arc::clone(group),
            prec,
            zwidth,
            psi_table: vec![],
            weier: vec![],
        };
        // trace of multiplication by Z^i in the basis 1..Z^(q-1):
        // tr(Z^i) = phi(sum_j decompose(Z^(i+j))_j), and psi(Z^i) is that
        // sum divided by pi
        let mut dec = Vec::with_capacity(2 * q - 1);
        for m in 0..(2 * q - 1) {
            dec.push(ctx.phi_decompose(&IntSeries::monomial(&spec, prec + 1, m as i64))?);
        }
        for i in 0..q {
            let mut s = IntSeries::zero(&spec, prec + 1);
            for j in 0..q {
                s = s.add(&dec[i + j][j]);
            }
            let table_entry = s.divide_by_pi_exact(1).map_err(|_| {
                Error::NotDivisible(format!("trace of Z^{i} is not divisible by pi"))
            })?;
            ctx.psi_table.push(table_entry);
        }

        // torsion Weierstrass factor and the Newton-identity cross-check
        let wz = zwidth.min(26).max(2 * q as i64 + 2);
        ctx.weier = group.torsion_weier(prec, wz)?;
        ctx.check_newton_sums(wz)?;
        ctx.norm_oracle_gate()?;
        Ok(Arc::new(ctx))
    }

    #[doc(hidden)]
    pub fn build_unchecked_for_debug(
        group: &Arc<FormalGroup>,
        prec: u32,
        zwidth: i64,
    ) -> Result<Arc<Self>> {
        let spec = group.spec().clone();
        let q = spec.q as usize;
        let mut ctx = ColemanContext {
            group: Arc::clone(group),
            prec,
            zwidth,
            psi_table: vec![],
            weier: vec![],
        };
        let mut dec = Vec::with_capacity(2 * q - 1);
        for m in 0..(2 * q - 1) {
            dec.push(ctx.phi_decompose(&IntSeries::monomial(&spec, prec + 1, m as i64))?);
        }
        for i in 0..q {
            let mut s = IntSeries::zero(&spec, prec + 1);
            for j in 0..q {
                s = s.add(&dec[i + j][j]);
            }
            ctx.psi_table.push(s.divide_by_pi_exact(1)?);
        }
        ctx.weier = group.torsion_weier(prec, zwidth.min(26))?;
        Ok(Arc::new(ctx))
    }

    /// `pi * phi(psi(Z^i))` must be the i-th power sum of the roots of the
    /// torsion factor.
    fn check_newton_sums(&self, wz: i64) -> Result<()> {
        let spec = self.spec();
        let q = spec.q as usize;
        let p = &self.weier;
        if p.len() != q + 1 {
            return Err(Error::NormOracleFailed("torsion factor has wrong degree".into()));
        }
        // e_j = (-1)^j * coefficient of X^(q-j)
        let mut e = vec![IntSeries::zero(spec, self.prec)];
        for j in 1..=q {
            let c = p[q - j].clone();
            e.push(if j % 2 == 1 { c.neg() } else { c });
        }
        // p_k = e_1 p_{k-1} - e_2 p_{k-2} + ... + (-1)^{k-1} k e_k
        let mut psums: Vec<IntSeries> = vec![IntSeries::from_i64_coeffs(spec, self.prec, 0, &[q as i64])];
        for k in 1..q {
            let mut s = IntSeries::zero(spec, self.prec);
            for j in 1..=k - 1 {
                let t = e[j].mul(&psums[k - j]);
                s = if j % 2 == 1 { s.add(&t) } else { s.sub(&t) };
            }
            let t = e[k].mul_i64(k as i64);
            s = if k % 2 == 1 { s.add(&t) } else { s.sub(&t) };
            psums.push(s);
        }
        for (i, pk) in psums.iter().enumerate() {
            let lhs = self.phi(&self.psi_table[i])?.mul_pi_pow(1).with_prec(self.prec);
            let hi = pk.z_high.min(lhs.z_high).min(wz - q as i64);
            if hi <= 0 {
                return Err(Error::WindowTooSmall(
                    "newton cross-check window is empty".into(),
                ));
            }
            if !lhs.agree_on(pk, 0, hi)? {
                return Err(Error::NormOracleFailed(format!(
                    "pi*phi(psi(Z^{i})) does not match the Newton power sum"
                )));
            }
        }
        Ok(())
    }

    /// Build-time identities guarding the norm operator: the norm of the
    /// Frobenius series is `Z^q`, and the norm of `phi(f)` is `f^q`.
    fn norm_oracle_gate(&self) -> Result<()> {
        let spec = self.spec();
        let q = spec.q;
        let nf = self.norm(self.group.frobenius())?;
        let zq = IntSeries::monomial(spec, self.prec, q as i64);
        let hi = nf.z_high.min(2 * q as i64 + 2);
        if !nf.agree_on(&zq, 0, hi)? {
            return Err(Error::NormOracleFailed("norm of [pi] is not Z^q".into()));
        }
        // exact witness
        let f1 = IntSeries::from_i64_coeffs(spec, self.prec, 0, &[1, 1]);
        let n1 = self.norm(&self.phi(&f1)?)?;
        let f1q = f1.pow(q);
        if !n1.agree_on(&f1q, 0, n1.z_high.min(q as i64 + 2))? {
            return Err(Error::NormOracleFailed("norm(phi(1+Z)) != (1+Z)^q".into()));
        }
        // windowed witness exercising the window bookkeeping
        let f2 = IntSeries::from_i64_coeffs(spec, self.prec, 0, &[1, 0, 1, 2])
            .mul_pi_pow(1)
            .with_prec(self.prec)
            .add(&IntSeries::one(spec, self.prec))
            .truncate_high(9);
        let n2 = self.norm(&self.phi(&f2)?)?;
        let f2q = f2.pow(q);
        let hi = n2.z_high.min(f2q.z_high).min(8);
        if hi < 4 || !n2.agree_on(&f2q, 0, hi)? {
            return Err(Error::NormOracleFailed(
                "norm(phi(f)) != f^q on a windowed witness".into(),
            ));
        }
        Ok(())
    }

    /// Sound output window of `phi` on input known mod `(pi^prec, Z^m)`:
    /// a tail perturbation `Z^m h` maps to `[pi]^m phi(h)`, whose visible
    /// part mod `pi^prec` starts at `Z^(qm - (q-1)(prec-1))`.
    fn phi_window(&self, m: i64, prec: u32) -> i64 {
        if is_exact_bound(m) {
            return EXACT_HI;
        }
        let q = self.q() as i64;
        m.max(q * m - (q - 1) * (prec as i64 - 1)).min(EXACT_HI)
    }

    /// `f(Z) -> f([pi](Z))`, handling Laurent tails by clearing poles with
    /// `[pi]^k` and dividing back by the inverse unit.
    pub fn phi(&self, f: &IntSeries) -> Result<IntSeries> {
        let spec = self.spec();
        let mut f = f.clone();
        f.normalize();
        if f.z_low >= 0 {
            return self.phi_nonneg(&f);
        }
        let k = (-f.z_low) as u32;
        let shifted = f.shift(k as i64); // Z^k f
        let main = self.phi_nonneg(&shifted)?;
        let frob = self.group.frobenius();
        let want = if is_exact_bound(main.z_high) {
            self.phi_window(f.z_high, f.prec)
        } else {
            main.z_high
        };
        let inv = frob
            .invert_unit(want + (k as i64) * self.q() as i64 + 2)?
            .pow(k as u64);
        Ok(main.mul(&inv))
    }

    fn phi_nonneg(&self, f: &IntSeries) -> Result<IntSeries> {
        let frob = self.group.frobenius();
        let out_hi = self.phi_window(f.z_high, f.prec);
        let mut acc = IntSeries::zero(self.spec(), f.prec);
        let top = f.z_low + f.coeffs().len() as i64;
        for k in (1..top).rev() {
            acc = acc.mul(frob);
            if !is_exact_bound(out_hi) {
                acc = acc.truncate_high(out_hi);
            }
            let c = f.coeff(k).unwrap_or_else(|_| BaseElem::zero(self.spec(), f.prec));
            if !c.is_zero() {
                acc = acc.add(&IntSeries::constant(&c));
            }
        }
        acc = acc.mul(frob);
        if !is_exact_bound(out_hi) {
            acc = acc.truncate_high(out_hi);
        }
        if f.z_low <= 0 {
            if let Ok(c0) = f.coeff(0) {
                acc = acc.add(&IntSeries::constant(&c0));
            }
        }
        let mut out = acc;
        out.z_high = out.z_high.min(out_hi);
        out.normalize();
        Ok(out)
    }

    /// The action of a unit `c`: `f(Z) -> f([c](Z))`.
    pub fn gamma_act(&self, c: &BaseElem, f: &IntSeries) -> Result<IntSeries> {
        if c.reduce_residue().is_zero() {
            return Err(Error::NotAUnit("group action needs a unit scalar".into()));
        }
        let mut f = f.clone();
        f.normalize();
        let hi = if is_exact_bound(f.z_high) {
            let top = f.top_degree().unwrap_or(1).max(1);
            top + 1
        } else {
            f.z_high
        };
        let deg = (hi - f.z_low.min(0)).max(2);
        let m = self.group.mult(c, deg + 1)?;
        if f.z_low >= 0 {
            return f.compose(&m);
        }
        let k = -f.z_low;
        let shifted = f.shift(k);
        let main = shifted.compose(&m)?;
        let minv = m.invert_unit(hi + k + 2)?.pow(k as u64);
        Ok(main.mul(&minv))
    }

    /// residue-series class extraction: coefficients at exponents
    /// `i mod q`, reindexed by `(j - i)/q`
    fn extract_class(&self, rbar: &ResSeries, i: i64) -> ResSeries {
        let spec = self.spec();
        let q = self.q() as i64;
        let hi = if is_exact_bound(rbar.z_high) {
            EXACT_HI
        } else {
            (rbar.z_high - 1 - i).div_euclid(q) + 1
        };
        let mut pairs = vec![];
        let top = rbar.z_low + rbar.coeffs().len() as i64;
        for j in rbar.z_low..top {
            if (j - i).rem_euclid(q) == 0 {
                let c = rbar.coeff(j).expect("stored coefficient");
                pairs.push(((j - i).div_euclid(q), c));
            }
        }
        if pairs.is_empty() {
            let mut z = ResSeries::zero(spec, 1);
            z.z_high = hi;
            return z;
        }
        let lo = pairs[0].0;
        let len = (pairs.last().unwrap().0 - lo + 1) as usize;
        let mut coeffs = vec![crate::base_ring::ResidueElem::zero(spec); len];
        for (e, c) in pairs {
            coeffs[(e - lo) as usize] = c;
        }
        Series::new(spec, 1, lo, coeffs, hi)
    }

    /// Decompose `f = sum_i phi(f_i) Z^i` over the basis `1..Z^(q-1)`
    /// (input must be pole-free; Laurent inputs go through `psi`/`norm`).
    ///
    /// The digit iteration runs on the exact stored representative; a tail
    /// perturbation `pi^k Z^m h` of the input only moves the parts inside
    /// `(pi^n, Z^((m-i)/q))`, which justifies the imposed output windows.
    pub fn phi_decompose(&self, f: &IntSeries) -> Result<Vec<IntSeries>> {
        let spec = self.spec();
        let q = self.q() as usize;
        let mut f = f.clone();
        f.normalize();
        if f.z_low < 0 {
            return Err(Error::IllegalSubstituend(
                "decomposition needs a pole-free input; clear poles first".into(),
            ));
        }
        let n = f.prec.min(self.prec + 1);
        let window = f.z_high;
        let mut parts = vec![IntSeries::zero(spec, n); q];
        let mut r = f.exact_representative().with_prec(n);
        for k in 0..n {
            if r.is_zero_within_window() {
                break;
            }
            let rbar = r.reduce_mod_pi();
            let mut lifts = Vec::with_capacity(q);
            for i in 0..q {
                let cls = self.extract_class(&rbar, i as i64);
                let lift = cls.lift_teichmuller(n - k);
                parts[i] = parts[i].add(&lift.mul_pi_pow(k).with_prec(n));
                lifts.push(lift);
            }
            if k + 1 == n {
                break;
            }
            let mut assembled = IntSeries::zero(spec, n - k);
            for (i, lift) in lifts.iter().enumerate() {
                assembled = assembled.add(&self.phi(lift)?.shift(i as i64));
            }
            let diff = r.sub(&assembled);
            r = diff.divide_by_pi_exact(1).map_err(|_| {
                Error::PrecisionExhausted(
                    "phi-basis decomposition failed to cancel a digit".into(),
                )
            })?;
        }
        if !is_exact_bound(window) {
            for (i, part) in parts.iter_mut().enumerate() {
                *part = part.truncate_high((window - 1 - i as i64).div_euclid(q as i64) + 1);
            }
        }
        Ok(parts)
    }

    /// Inverse of `phi` on its image; errors with `NotInImage` when a
    /// mod-`pi` exponent outside `qZ` shows up.
    pub fn phi_preimage(&self, f: &IntSeries) -> Result<IntSeries> {
        let spec = self.spec();
        let q = self.q() as usize;
        let mut f = f.clone();
        f.normalize();
        if f.z_low < 0 {
            let k = (-f.z_low) as u32;
            // phi(g) has pole order q * (pole order of g); require divisibility
            if f.z_low.rem_euclid(q as i64) != 0 {
                return Err(Error::NotInImage(
                    "pole order is not divisible by q".into(),
                ));
            }
            let cleared = f.mul(&self.group.frobenius().pow(k as u64 / q as u64));
            // f = phi(Z^{-k/q} g0): clear with [pi]^{k/q}
            let g0 = self.phi_preimage(&cleared)?;
            return Ok(g0.shift(-(k as i64) / q as i64));
        }
        let n = f.prec.min(self.prec + 1);
        let window = f.z_high;
        let mut out = IntSeries::zero(spec, n);
        let mut r = f.exact_representative().with_prec(n);
        for k in 0..n {
            if r.is_zero_within_window() {
                break;
            }
            let rbar = r.reduce_mod_pi();
            for i in 1..q {
                let cls = self.extract_class(&rbar, i as i64);
                if !cls.is_zero_within_window() {
                    return Err(Error::NotInImage(format!(
                        "mod-pi exponent class {i} is nonzero; not in the image of phi"
                    )));
                }
            }
            let lift = self.extract_class(&rbar, 0).lift_teichmuller(n - k);
            out = out.add(&lift.mul_pi_pow(k).with_prec(n));
            if k + 1 == n {
                break;
            }
            let diff = r.sub(&self.phi(&lift)?);
            r = diff.divide_by_pi_exact(1).map_err(|_| {
                Error::PrecisionExhausted("phi-preimage failed to cancel a digit".into())
            })?;
        }
        if !is_exact_bound(window) {
            out = out.truncate_high((window - 1).div_euclid(q as i64) + 1);
        }
        Ok(out)
    }

    /// The trace-type operator `psi` with `phi . psi = pi^{-1} trace`;
    /// Laurent tails are cleared by `psi(f) = Z^{-k} psi([pi]^k f)`.
    pub fn psi(&self, f: &IntSeries) -> Result<IntSeries> {
        let mut f = f.clone();
        f.normalize();
        if f.z_low < 0 {
            let k = (-f.z_low) as u32;
            let cleared = f.mul(&self.group.frobenius().pow(k as u64));
            let inner = self.psi(&cleared)?;
            return Ok(inner.shift(-(k as i64)));
        }
        let parts = self.phi_decompose(&f)?;
        let mut out = IntSeries::zero(self.spec(), f.prec.min(self.prec));
        for (i, part) in parts.iter().enumerate() {
            out = out.add(&part.mul(&self.psi_table[i]));
        }
        Ok(out.with_prec(f.prec.min(self.prec)))
    }

    /// `pi * psi`, the classical trace operator over the torsion points.
    pub fn psi_col(&self, f: &IntSeries) -> Result<IntSeries> {
        Ok(self.psi(f)?.mul_pi_pow(1).with_prec(f.prec.min(self.prec)))
    }

    /// The multiplicative norm operator: determinant of multiplication by
    /// `f` in the basis `1..Z^(q-1)` over the image of `phi`.
    pub fn norm(&self, f: &IntSeries) -> Result<IntSeries> {
        let q = self.q() as usize;
        let mut f = f.clone();
        f.normalize();
        let rbar = f.reduce_mod_pi();
        if rbar.order().is_none() {
            return Err(Error::NotAUnit(
                "norm needs a unit of the Laurent ring".into(),
            ));
        }
        if f.z_low < 0 {
            let k = (-f.z_low) as u32;
            let cleared = f.mul(&self.group.frobenius().pow(k as u64));
            let inner = self.norm(&cleared)?;
            return Ok(inner.shift(-(k as i64) * q as i64));
        }
        let mut rows = Vec::with_capacity(q);
        for j in 0..q {
            rows.push(self.phi_decompose(&f.shift(j as i64))?);
        }
        Ok(det_series(self.spec(), &rows))
    }

    /// logarithmic derivative `f -> d_inv(f) / f`
    pub fn delta(&self, f: &IntSeries) -> Result<IntSeries> {
        let mut f = f.clone();
        f.normalize();
        let rbar = f.reduce_mod_pi();
        if rbar.order().is_none() {
            return Err(Error::NotAUnit("logarithmic derivative of a non-unit".into()));
        }
        let want = if f.is_exact() {
            let top = f.top_degree().unwrap_or(1);
            self.zwidth.max(top + 2) - f.z_low.min(0)
        } else {
            f.z_high
        };
        let di = self.group.inv_deriv(&f)?;
        let finv = f.invert_unit(want)?;
        Ok(di.mul(&finv))
    }

    /// The unique norm-fixed unit lifting a residue unit, by iterating the
    /// norm operator (one exact digit per iteration).
    pub fn coleman_lift(&self, ubar: &ResSeries) -> Result<IntSeries> {
        self.coleman_lift_from(ubar, &ubar.lift_teichmuller(self.prec))
    }

    /// Same, but starting the iteration from a caller-supplied lift
    /// (the result is independent of this choice).
    pub fn coleman_lift_from(&self, ubar: &ResSeries, start: &IntSeries) -> Result<IntSeries> {
        if ubar.order().is_none() {
            return Err(Error::NotAUnit("residue series is not a unit".into()));
        }
        if !start.reduce_mod_pi().agree_within(ubar) {
            return Err(Error::BadInput("starting lift does not reduce correctly".into()));
        }
        let mut g = start.with_prec(self.prec);
        for _ in 0..self.prec {
            g = self.norm(&g)?;
        }
        Ok(g)
    }

    /// Coates-Wiles value `(1/r!) (d_inv^(r-1) delta(g))(0)`.
    pub fn coates_wiles(&self, g: &IntSeries, r: u32, r_max: u32) -> Result<RatScalar> {
        if r < 1 || r > r_max {
            return Err(Error::DenominatorBudgetExceeded(format!(
                "order {r} outside the declared budget r_max = {r_max}"
            )));
        }
        let spec = self.spec();
        let mut h = self.delta(g)?;
        for _ in 1..r {
            h = self.group.inv_deriv(&h)?;
        }
        let value = h.coeff(0)?;
        // r! = pi^v * unit
        let mut fact = BaseElem::one(spec, self.prec + 2 * spec.e * spec.fdeg * r);
        for i in 2..=r {
            fact = fact.mul_i64(i as i64);
        }
        let v = fact.valuation().ok_or_else(|| {
            Error::PrecisionExhausted("factorial valuation exceeded working precision".into())
        })?;
        let unit = fact.divide_by_pi_exact(v)?;
        let unit_inv = unit.invert_unit()?;
        Ok(RatScalar {
            num: value.mul(&unit_inv),
            den: v,
        }
        .normalize())
    }

    /// `a * delta(g)`, the map into the `psi`-fixed part.
    pub fn nabla(&self, g: &IntSeries, a: &BaseElem) -> Result<IntSeries> {
        Ok(self.delta(g)?.mul_coeff(a))
    }
}

/// determinant over the series ring by subset dynamic programming
/// (division-free)
fn det_series(spec: &Arc<BaseRingSpec>, mat: &[Vec<IntSeries>]) -> IntSeries {
    let n = mat.len();
    let full = (1usize << n) - 1;
    let mut dp: Vec<Option<IntSeries>> = vec![None; full + 1];
    dp[0] = Some(IntSeries::one(spec, mat[0][0].prec));
    for mask in 1..=full {
        let col = (mask as u32).count_ones() as usize - 1;
        let mut acc: Option<IntSeries> = None;
        let mut pos = 0usize;
        for row in 0..n {
            if mask & (1 << row) == 0 {
                continue;
            }
            let sub = dp[mask ^ (1 << row)].as_ref().expect("dp order");
            let term = mat[row][col].mul(sub);
            let term = if (pos + col) % 2 == 1 { term.neg() } else { term };
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
            pos += 1;
        }
        dp[mask] = acc;
    }
    dp[full].take().expect("nonempty matrix")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm_p3() -> Arc<ColemanContext> {
        let s = BaseRingSpec::new(3, 1, 1, None, None, 14).unwrap();
        let f = IntSeries::from_i64_coeffs(&s, s.max_pi_prec_budget(), 0, &[0, 3, 3, 1]);
        let g = FormalGroup::build(&s, &f, 10, 6).unwrap();
        ColemanContext::build(&g, 4, 14).unwrap()
    }

    fn poly_p3() -> Arc<ColemanContext> {
        let s = BaseRingSpec::new(3, 1, 1, None, None, 14).unwrap();
        let f = IntSeries::from_i64_coeffs(&s, s.max_pi_prec_budget(), 0, &[0, 3, 0, 1]);
        let g = FormalGroup::build(&s, &f, 10, 6).unwrap();
        ColemanContext::build(&g, 4, 14).unwrap()
    }

    #[test]
    fn phi_basics() {
        let ctx = poly_p3();
        let s = ctx.spec().clone();
        // phi(Z) = [pi](Z)
        let pz = ctx.phi(&IntSeries::monomial(&s, 4, 1)).unwrap();
        assert!(pz.agree_within(ctx.group().frobenius()));
        // constants are fixed
        let c = IntSeries::from_i64_coeffs(&s, 4, 0, &[7]);
        assert!(ctx.phi(&c).unwrap().agree_within(&c));
        // phi(Z^{-1}) * [pi] = 1
        let pinv = ctx.phi(&IntSeries::monomial(&s, 4, -1)).unwrap();
        let prod = pinv.mul(ctx.group().frobenius());
        assert!(prod
            .agree_on(&IntSeries::one(&s, 4), -3, prod.z_high.min(6))
            .unwrap());
        // reduction of phi(f) is f(Z^q)
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[2, 1, 0, 2, 1]);
        let red = ctx.phi(&f).unwrap().reduce_mod_pi();
        let expect = f.reduce_mod_pi().frobenius_q();
        assert!(red.agree_on(&expect, 0, 13).unwrap());
    }

    #[test]
    fn gamma_is_an_action() {
        let ctx = gm_p3();
        let s = ctx.spec().clone();
        let f = IntSeries::from_i64_coeffs(&s, 4, -1, &[1, 2, 0, 1, 1]);
        // identity acts trivially
        let g1 = ctx.gamma_act(&BaseElem::one(&s, 4), &f).unwrap();
        assert!(g1.agree_on(&f, -1, 4).unwrap());
        // composition of the action
        let c1 = BaseElem::from_i64(&s, 2, 4);
        let c2 = BaseElem::from_i64(&s, 5, 4);
        let lhs = ctx.gamma_act(&c1, &ctx.gamma_act(&c2, &f).unwrap()).unwrap();
        let rhs = ctx.gamma_act(&c1.mul(&c2), &f).unwrap();
        let hi = lhs.z_high.min(rhs.z_high);
        assert!(lhs.agree_on(&rhs, -1, hi).unwrap());
        // on the multiplicative group: gamma_c(1 + Z) = (1+Z)^c
        let opz = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        let g2 = ctx.gamma_act(&c1, &opz).unwrap();
        let expect = opz.pow(2);
        assert!(g2.agree_on(&expect, 0, g2.z_high.min(4)).unwrap());
    }

    #[test]
    fn decompose_and_reassemble() {
        let ctx = poly_p3();
        let s = ctx.spec().clone();
        let q = ctx.q() as i64;
        // single basis monomials mod pi
        for i in 0..q {
            let parts = ctx.phi_decompose(&IntSeries::monomial(&s, 4, i)).unwrap();
            for (j, part) in parts.iter().enumerate() {
                let pbar = part.reduce_mod_pi();
                if j as i64 == i {
                    assert!(pbar.agree_on(&ResSeries::from_i64_coeffs(&s, 0, &[1]), 0, 2).unwrap());
                } else {
                    assert!(pbar.is_zero_within_window() || pbar.order().is_none());
                }
            }
        }
        // reassembly on a random-ish series
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[5, 3, 1, 8, 2, 0, 4, 7, 1, 6, 2, 3]);
        let parts = ctx.phi_decompose(&f).unwrap();
        let mut back = IntSeries::zero(&s, 4);
        for (i, part) in parts.iter().enumerate() {
            back = back.add(&ctx.phi(part).unwrap().shift(i as i64));
        }
        let hi = back.z_high.min(12);
        assert!(back.agree_on(&f, 0, hi).unwrap());
    }

    #[test]
    fn psi_inverts_phi() {
        for ctx in [gm_p3(), poly_p3()] {
            let s = ctx.spec().clone();
            let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 4, 2, 0, 3, 1]);
            let psi_phi = ctx.psi(&ctx.phi(&f).unwrap()).unwrap();
            let expect = f.mul_coeff(&s.q_over_pi(4));
            let hi = psi_phi.z_high.min(expect.z_high).min(6);
            assert!(psi_phi.agree_on(&expect, 0, hi).unwrap());
            // psi_col . phi = q
            let pc = ctx.psi_col(&ctx.phi(&f).unwrap()).unwrap();
            let q = ctx.q() as i64;
            let hi = pc.z_high.min(6);
            assert!(pc.agree_on(&f.mul_i64(q), 0, hi).unwrap());
        }
    }

    #[test]
    fn psi_col_shifts_pole_clearing() {
        let ctx = poly_p3();
        let s = ctx.spec().clone();
        // psi_col([pi] f) = Z psi_col(f)
        let f = IntSeries::from_i64_coeffs(&s, 4, -1, &[2, 1, 0, 1]);
        let lhs = ctx.psi_col(&f.mul(ctx.group().frobenius())).unwrap();
        let rhs = ctx.psi_col(&f).unwrap().shift(1);
        let lo = lhs.z_low.min(rhs.z_low);
        let hi = lhs.z_high.min(rhs.z_high);
        assert!(lhs.agree_on(&rhs, lo, hi).unwrap());
    }

    #[test]
    fn norm_closed_forms() {
        let ctx = gm_p3();
        let s = ctx.spec().clone();
        // norm(1 + Z) = 1 + Z and norm(Z) = Z on the multiplicative group
        let opz = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        let n = ctx.norm(&opz).unwrap();
        assert!(n.agree_on(&opz, 0, n.z_high.min(8)).unwrap());
        let z = IntSeries::monomial(&s, 4, 1);
        let nz = ctx.norm(&z).unwrap();
        assert!(nz.agree_on(&z, 0, nz.z_high.min(8)).unwrap());
    }

    #[test]
    fn delta_examples() {
        let ctx = gm_p3();
        let s = ctx.spec().clone();
        // delta(c) = 0
        let c = IntSeries::from_i64_coeffs(&s, 4, 0, &[5]);
        assert!(ctx.delta(&c).unwrap().is_zero_within_window());
        // delta(1+Z) = 1 on the multiplicative group
        let opz = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        let d = ctx.delta(&opz).unwrap();
        assert!(d.agree_on(&IntSeries::one(&s, 4), 0, d.z_high.min(8)).unwrap());
        // multiplicativity
        let f = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 2, 1]);
        let lhs = ctx.delta(&opz.mul(&f)).unwrap();
        let rhs = ctx.delta(&opz).unwrap().add(&ctx.delta(&f).unwrap());
        let hi = lhs.z_high.min(rhs.z_high).min(8);
        assert!(lhs.agree_on(&rhs, 0, hi).unwrap());
    }

    #[test]
    fn coleman_lift_fixed_points() {
        let ctx = gm_p3();
        let s = ctx.spec().clone();
        // Z is norm-fixed on the multiplicative group
        let zbar = ResSeries::from_i64_coeffs(&s, 1, &[1]);
        let lift = ctx.coleman_lift(&zbar).unwrap();
        assert!(lift
            .agree_on(&IntSeries::monomial(&s, 4, 1), 1, lift.z_high.min(6))
            .unwrap());
        // constants lift to the multiplicative section
        let cbar = ResSeries::from_i64_coeffs(&s, 0, &[2]);
        let lift = ctx.coleman_lift(&cbar).unwrap();
        let teich = crate::base_ring::ResidueElem::from_i64(&s, 2).teichmuller(4);
        assert!(lift
            .agree_on(&IntSeries::constant(&teich), 0, lift.z_high.min(4))
            .unwrap());
    }

    #[test]
    fn coates_wiles_on_multiplicative_group() {
        let ctx = gm_p3();
        let s = ctx.spec().clone();
        let opz = IntSeries::from_i64_coeffs(&s, 4, 0, &[1, 1]);
        let v1 = ctx.coates_wiles(&opz, 1, 5).unwrap();
        assert!(v1
            .equals_mod(&RatScalar::from_int(BaseElem::one(&s, 4)), 3)
            .unwrap());
        for r in [2u32, 3] {
            let vr = ctx.coates_wiles(&opz, r, 5).unwrap();
            assert!(vr.is_zero_mod(2), "order {r} value should vanish");
        }
        // (1+Z)^a has first value a
        let a = 4i64;
        let ga = opz.pow(a as u64);
        let v = ctx.coates_wiles(&ga, 1, 5).unwrap();
        assert!(v
            .equals_mod(&RatScalar::from_int(BaseElem::from_i64(&s, a, 4)), 3)
            .unwrap());
        // constants give zero at every order
        let c = IntSeries::from_i64_coeffs(&s, 4, 0, &[7]);
        for r in 1..=3 {
            assert!(ctx.coates_wiles(&c, r, 5).unwrap().is_zero_mod(2));
        }
    }
}
