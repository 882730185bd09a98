//! Exact arithmetic in `o_L / pi^N` for a local field `L/Q_p`.
//!
//! The ring of integers is represented as a two-step tower: an unramified
//! part `W = (Z/p^m)[y]/(unram_poly)` followed by the Eisenstein quotient
//! `W[x]/(eis_poly)`, so that `x` is the uniformizer `pi` (for `e = 1` the
//! uniformizer is `p` itself).  Elements are coordinate vectors over the
//! product basis `{x^i y^j}` with `0 <= i < e`, `0 <= j < fdeg`.
//!
//! Precision model: a [`BaseElem`] carries its claimed pi-adic precision
//! `prec` together with the number `pdigits` of exact `p`-digits of its
//! coordinates.  The invariant `e * pdigits >= prec` is maintained by every
//! operation, so the class modulo `pi^prec` is always determined.  Fresh
//! elements get `pdigits = ceil(prec/e) + 1`; the extra guard digit means a
//! single division by `pi` never costs a claimed digit.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Description of the coefficient ring `o_L / pi^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaseRingSpec {
    pub p: u64,
    pub e: u32,
    pub fdeg: u32,
    /// `q = p^fdeg`, the size of the residue field.
    pub q: u64,
    /// Monic integer polynomial of degree `fdeg`, irreducible mod `p`.
    /// For `fdeg = 1` this is the trivial `y`.
    pub unram_poly: Vec<i64>,
    /// Monic Eisenstein polynomial of degree `e`; coefficients are
    /// `y`-coordinate vectors of length `fdeg` over the unramified part.
    /// For `e = 1` this is `x - p`.
    pub eis_poly: Vec<Vec<i64>>,
    /// Maximal supported pi-adic precision.
    pub pi_prec_max: u32,
    /// Largest exponent `m` such that `p^m` fits the word-size budget.
    max_pdigits: u32,
    /// `p^0 ..= p^max_pdigits`.
    powers_of_p: Vec<u64>,
    /// Inverse in `W` of the unit `-c_0 / p` where `c_0` is the constant
    /// term of `eis_poly` (used by exact division by `pi`).
    neg_c0_over_p_inv: Vec<u64>,
}

fn mod_pow_u64(mut b: u64, mut ex: u64, m: u64) -> u64 {
    let mut acc: u64 = 1 % m;
    b %= m;
    while ex > 0 {
        if ex & 1 == 1 {
            acc = ((acc as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        ex >>= 1;
    }
    acc
}

// ---- tiny F_p[y] helpers for the irreducibility check ----

fn fp_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    // m is monic
    let mut r: Vec<u64> = a.to_vec();
    fp_trim(&mut r);
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        for j in 0..=dm {
            let idx = shift + j;
            let sub = (lead as u128 * m[j] as u128 % p as u128) as u64;
            r[idx] = (r[idx] + p - sub % p) % p;
        }
        fp_trim(&mut r);
    }
    r
}

fn fp_mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    fp_rem(&prod, m, p)
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    fp_trim(&mut a);
    fp_trim(&mut b);
    while !b.is_empty() {
        // make b monic for fp_rem
        let lead = *b.last().unwrap();
        let linv = mod_pow_u64(lead, p - 2, p);
        let monic: Vec<u64> = b.iter().map(|&c| c * linv % p).collect();
        let r = fp_rem(&a, &monic, p);
        a = b;
        b = r;
    }
    a
}

impl BaseRingSpec {
    /// Build and validate a ring description.
    pub fn new(
        p: u64,
        e: u32,
        fdeg: u32,
        unram_poly: Option<Vec<i64>>,
        eis_poly: Option<Vec<Vec<i64>>>,
        pi_prec_max: u32,
    ) -> Result<Arc<Self>> {
        if e == 0 || fdeg == 0 {
            return Err(Error::BadSpec("e and fdeg must be >= 1".into()));
        }
        if p < 2 || (2..p).any(|d| d * d <= p && p % d == 0) {
            return Err(Error::BadSpec(format!("p = {p} is not prime")));
        }
        let unram = match unram_poly {
            Some(u) => {
                if u.len() != fdeg as usize + 1 || *u.last().unwrap() != 1 {
                    return Err(Error::BadSpec(
                        "unram_poly must be monic of degree fdeg".into(),
                    ));
                }
                u
            }
            None => {
                if fdeg != 1 {
                    return Err(Error::BadSpec("unram_poly required for fdeg > 1".into()));
                }
                vec![0, 1]
            }
        };
        let eis = match eis_poly {
            Some(v) => {
                if v.len() != e as usize + 1 {
                    return Err(Error::BadSpec("eis_poly must have degree e".into()));
                }
                v.into_iter()
                    .map(|mut c| {
                        c.resize(fdeg as usize, 0);
                        c
                    })
                    .collect::<Vec<_>>()
            }
            None => {
                if e != 1 {
                    return Err(Error::BadSpec("eis_poly required for e > 1".into()));
                }
                let mut c0 = vec![0i64; fdeg as usize];
                c0[0] = -(p as i64);
                let mut c1 = vec![0i64; fdeg as usize];
                c1[0] = 1;
                vec![c0, c1]
            }
        };
        // leading coefficient must be the unit 1
        let lead = &eis[e as usize];
        if lead[0] != 1 || lead[1..].iter().any(|&c| c != 0) {
            return Err(Error::BadSpec("eis_poly must be monic".into()));
        }

        // word-size budget: p^m <= 2^62
        let mut max_pdigits = 0u32;
        let mut powers_of_p = vec![1u64];
        let mut acc: u64 = 1;
        while acc <= (1u64 << 62) / p {
            acc *= p;
            powers_of_p.push(acc);
            max_pdigits += 1;
        }
        let need = (pi_prec_max + e - 1) / e + 1;
        if need > max_pdigits {
            return Err(Error::BadSpec(format!(
                "pi_prec_max = {pi_prec_max} needs {need} p-digits; only {max_pdigits} fit a word"
            )));
        }

        // irreducibility of unram mod p: gcd(y^{p^i} - y, u) = 1 for 0 < i < f,
        // and y^{p^f} = y mod u.
        let q = {
            let mut q: u64 = 1;
            for _ in 0..fdeg {
                q = q
                    .checked_mul(p)
                    .ok_or_else(|| Error::BadSpec("q overflows".into()))?;
            }
            q
        };
        {
            let u_mod_p: Vec<u64> = unram
                .iter()
                .map(|&c| (c.rem_euclid(p as i64)) as u64)
                .collect();
            let y = vec![0u64, 1];
            let mut ypow = y.clone(); // y^{p^0}
            for i in 1..=fdeg {
                // raise to the p-th power
                let mut acc = vec![1u64];
                for _ in 0..p {
                    acc = fp_mulmod(&acc, &ypow, &u_mod_p, p);
                }
                ypow = acc;
                let mut diff = ypow.clone();
                if diff.len() < 2 {
                    diff.resize(2, 0);
                }
                diff[1] = (diff[1] + p - 1) % p;
                let g = fp_gcd(&diff, &u_mod_p, p);
                if i < fdeg {
                    if g.len() > 1 {
                        return Err(Error::BadSpec(
                            "unram_poly is reducible mod p (proper-degree factor found)".into(),
                        ));
                    }
                } else {
                    let d = fp_rem(&diff, &u_mod_p, p);
                    if !d.is_empty() {
                        return Err(Error::BadSpec(
                            "unram_poly does not split F_q (y^q != y)".into(),
                        ));
                    }
                }
            }
        }

        let mut spec = BaseRingSpec {
            p,
            e,
            fdeg,
            q,
            unram_poly: unram,
            eis_poly: eis,
            pi_prec_max,
            max_pdigits,
            powers_of_p,
            neg_c0_over_p_inv: vec![],
        };

        // Eisenstein conditions in W: v_p(c_i) >= 1 for i < e, v_p(c_0) = 1.
        let m = max_pdigits;
        for i in 0..e as usize {
            let ci = spec.w_from_i64(&spec.eis_poly[i], m);
            if !ci.iter().all(|&c| c % p == 0) {
                return Err(Error::BadSpec(format!(
                    "eis_poly coefficient {i} is not divisible by p"
                )));
            }
        }
        let c0 = spec.w_from_i64(&spec.eis_poly[0], m);
        let c0p: Vec<u64> = c0.iter().map(|&c| c / p).collect();
        if c0p.iter().all(|&c| c % p == 0) {
            return Err(Error::BadSpec(
                "eis_poly constant term has v_pi > e (not Eisenstein)".into(),
            ));
        }
        let neg_c0p = spec.w_neg(&c0p, m);
        spec.neg_c0_over_p_inv = spec.w_invert(&neg_c0p, m)?;

        let spec = Arc::new(spec);

        // post-construction invariants, via the valuation operation
        let pi = spec.pi(pi_prec_max.min(spec.e * 2 + 2));
        if pi.valuation() != Some(1) {
            return Err(Error::BadSpec("v(pi) != 1".into()));
        }
        let pel = BaseElem::from_i64(&spec, p as i64, pi_prec_max.min(spec.e * 3 + 2));
        if pel.valuation() != Some(e) {
            return Err(Error::BadSpec(format!(
                "v(p) = {:?}, expected e = {e}",
                pel.valuation()
            )));
        }
        // eis_poly(pi) = 0 mod pi^N
        {
            let n = pi_prec_max.min(spec.e * 4 + 2);
            let pi = spec.pi(n);
            let mut acc = BaseElem::zero(&spec, n);
            let mut pw = BaseElem::one(&spec, n);
            for coef in spec.eis_poly.iter() {
                let c = BaseElem::from_unram_i64(&spec, coef, n);
                acc = acc.add(&c.mul(&pw));
                pw = pw.mul(&pi);
            }
            if !acc.is_zero() {
                return Err(Error::BadSpec("eis_poly(pi) != 0".into()));
            }
        }
        Ok(spec)
    }

    /// Number of `p`-digits a fresh element of pi-adic precision `prec`
    /// carries (one guard digit included).
    pub fn pdigits_for(&self, prec: u32) -> u32 {
        ((prec + self.e - 1) / self.e + 1).min(self.max_pdigits)
    }

    pub fn max_pi_prec_budget(&self) -> u32 {
        self.e * (self.max_pdigits - 1)
    }

    fn pmod(&self, d: u32) -> u64 {
        self.powers_of_p[d as usize]
    }

    /// dimension of the coordinate vector
    pub fn dim(&self) -> usize {
        (self.e * self.fdeg) as usize
    }

    // ---- W = (Z/p^d)[y]/(unram) helpers; W elements are vectors of length fdeg ----

    fn w_from_i64(&self, c: &[i64], d: u32) -> Vec<u64> {
        let m = self.pmod(d) as i64;
        let mut out = vec![0u64; self.fdeg as usize];
        for (j, &x) in c.iter().enumerate().take(self.fdeg as usize) {
            out[j] = x.rem_euclid(m) as u64;
        }
        out
    }

    fn w_add(&self, a: &[u64], b: &[u64], d: u32) -> Vec<u64> {
        let m = self.pmod(d);
        a.iter().zip(b).map(|(&x, &y)| (x % m + y % m) % m).collect()
    }

    fn w_neg(&self, a: &[u64], d: u32) -> Vec<u64> {
        let m = self.pmod(d);
        a.iter().map(|&x| (m - x % m) % m).collect()
    }

    fn w_mul(&self, a: &[u64], b: &[u64], d: u32) -> Vec<u64> {
        let m = self.pmod(d) as u128;
        let f = self.fdeg as usize;
        let mut prod = vec![0u128; 2 * f - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                prod[i + j] += (a[i] as u128 * b[j] as u128) % m;
            }
        }
        // reduce y^{f+t} via the monic unram_poly
        let mm = self.pmod(d) as i128;
        let mut prod: Vec<i128> = prod.iter().map(|&x| (x % m) as i128).collect();
        for t in (f..2 * f - 1).rev() {
            let lead = prod[t] % mm;
            if lead == 0 {
                continue;
            }
            prod[t] = 0;
            for j in 0..f {
                let c = self.unram_poly[j].rem_euclid(mm as i64) as i128;
                prod[t - f + j] = (prod[t - f + j] - lead * c).rem_euclid(mm);
            }
        }
        prod[..f].iter().map(|&x| x.rem_euclid(mm) as u64).collect()
    }

    fn w_is_unit(&self, a: &[u64]) -> bool {
        a.iter().any(|&c| c % self.p != 0)
    }

    /// Newton inversion of a unit of W at `d` digits.
    fn w_invert(&self, a: &[u64], d: u32) -> Result<Vec<u64>> {
        if !self.w_is_unit(a) {
            return Err(Error::NotAUnit("non-unit in unramified part".into()));
        }
        // inverse mod p by Fermat in F_q: a^(q-2); on the unramified part the
        // residue ring mod p is F_q with the same basis.
        let mut inv = {
            let abar: Vec<u64> = a.iter().map(|&c| c % self.p).collect();
            let mut acc = vec![0u64; self.fdeg as usize];
            acc[0] = 1;
            let mut base = abar;
            let mut ex = self.q - 2;
            while ex > 0 {
                if ex & 1 == 1 {
                    acc = self.w_mul(&acc, &base, 1);
                }
                base = self.w_mul(&base, &base, 1);
                ex >>= 1;
            }
            acc
        };
        // lift: x <- x(2 - a x)
        let mut digits = 1u32;
        while digits < d {
            digits = (digits * 2).min(d);
            let ax = self.w_mul(a, &inv, digits);
            let mut two_minus = self.w_neg(&ax, digits);
            two_minus[0] = (two_minus[0] + 2) % self.pmod(digits);
            inv = self.w_mul(&inv, &two_minus, digits);
        }
        Ok(inv)
    }

    /// The uniformizer at precision `prec`.
    pub fn pi(self: &Arc<Self>, prec: u32) -> BaseElem {
        let d = self.pdigits_for(prec);
        let mut coords = vec![0u64; self.dim()];
        if self.e == 1 {
            coords[0] = self.p % self.pmod(d);
        } else {
            coords[self.fdeg as usize] = 1;
        }
        BaseElem {
            spec: Arc::clone(self),
            coords,
            pdigits: d,
            prec,
        }
    }

    /// `q/pi` as an exact element (valuation `e*fdeg - 1`).
    pub fn q_over_pi(self: &Arc<Self>, prec: u32) -> BaseElem {
        let q = BaseElem::from_i64(self, self.q as i64, prec + 1);
        q.divide_by_pi_exact(1).expect("v(q) >= 1")
    }
}

/// An element of `o_L / pi^prec`.
#[derive(Clone)]
pub struct BaseElem {
    spec: Arc<BaseRingSpec>,
    /// coordinates over the basis `{x^i y^j}`, each reduced mod `p^pdigits`
    coords: Vec<u64>,
    /// number of exact `p`-digits of every coordinate
    pdigits: u32,
    /// claimed pi-adic precision; invariant `e * pdigits >= prec`
    prec: u32,
}

impl fmt::Debug for BaseElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@pi^{}", self.coords, self.prec)
    }
}

impl BaseElem {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn pdigits(&self) -> u32 {
        self.pdigits
    }

    pub fn zero(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        BaseElem {
            spec: Arc::clone(spec),
            coords: vec![0; spec.dim()],
            pdigits: spec.pdigits_for(prec),
            prec,
        }
    }

    pub fn one(spec: &Arc<BaseRingSpec>, prec: u32) -> Self {
        Self::from_i64(spec, 1, prec)
    }

    pub fn from_i64(spec: &Arc<BaseRingSpec>, n: i64, prec: u32) -> Self {
        let d = spec.pdigits_for(prec);
        let m = spec.pmod(d) as i64;
        let mut coords = vec![0u64; spec.dim()];
        coords[0] = n.rem_euclid(m) as u64;
        BaseElem {
            spec: Arc::clone(spec),
            coords,
            pdigits: d,
            prec,
        }
    }

    /// Element of the unramified part from `y`-coordinates.
    pub fn from_unram_i64(spec: &Arc<BaseRingSpec>, c: &[i64], prec: u32) -> Self {
        let d = spec.pdigits_for(prec);
        let m = spec.pmod(d) as i64;
        let mut coords = vec![0u64; spec.dim()];
        for (j, &x) in c.iter().enumerate().take(spec.fdeg as usize) {
            coords[j] = x.rem_euclid(m) as u64;
        }
        BaseElem {
            spec: Arc::clone(spec),
            coords,
            pdigits: d,
            prec,
        }
    }

    /// Element from raw coordinates (used by deserialization); the values
    /// are taken to be exact at the canonical digit count for `prec`.
    pub fn from_coords(spec: &Arc<BaseRingSpec>, coords: &[u64], prec: u32) -> Result<Self> {
        if coords.len() != spec.dim() {
            return Err(Error::BadInput(format!(
                "expected {} coordinates, got {}",
                spec.dim(),
                coords.len()
            )));
        }
        let d = spec.pdigits_for(prec);
        let m = spec.pmod(d);
        Ok(BaseElem {
            spec: Arc::clone(spec),
            coords: coords.iter().map(|&c| c % m).collect(),
            pdigits: d,
            prec,
        })
    }

    fn assert_same_spec(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.spec, &other.spec) || *self.spec == *other.spec,
            "spec mismatch in base ring arithmetic"
        );
    }

    fn binop(&self, other: &Self) -> (u32, u32) {
        self.assert_same_spec(other);
        let prec = self.prec.min(other.prec);
        let pd = self.pdigits.min(other.pdigits);
        (prec, pd)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (prec, pd) = self.binop(other);
        BaseElem {
            spec: Arc::clone(&self.spec),
            coords: {
                let m = self.spec.pmod(pd);
                self.coords
                    .iter()
                    .zip(&other.coords)
                    .map(|(&a, &b)| (a % m + b % m) % m)
                    .collect()
            },
            pdigits: pd,
            prec,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let m = self.spec.pmod(self.pdigits);
        BaseElem {
            spec: Arc::clone(&self.spec),
            coords: self.coords.iter().map(|&a| (m - a % m) % m).collect(),
            pdigits: self.pdigits,
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let (prec, pd) = self.binop(other);
        let spec = &self.spec;
        let e = spec.e as usize;
        let f = spec.fdeg as usize;
        // multiply as x-polynomials with W coefficients
        let mut prod: Vec<Vec<u64>> = vec![vec![0; f]; 2 * e - 1];
        for i in 0..e {
            let ai = &self.coords[i * f..(i + 1) * f];
            if ai.iter().all(|&c| c == 0) {
                continue;
            }
            for j in 0..e {
                let bj = &other.coords[j * f..(j + 1) * f];
                if bj.iter().all(|&c| c == 0) {
                    continue;
                }
                let t = spec.w_mul(ai, bj, pd);
                prod[i + j] = spec.w_add(&prod[i + j], &t, pd);
            }
        }
        // reduce x^{e+t} via the monic eis_poly: x^e = -(c_{e-1}x^{e-1}+...+c_0)
        for t in (e..2 * e - 1).rev() {
            let lead = prod[t].clone();
            if lead.iter().all(|&c| c == 0) {
                continue;
            }
            prod[t] = vec![0; f];
            for i in 0..e {
                let ci = spec.w_from_i64(&spec.eis_poly[i], pd);
                let sub = spec.w_mul(&lead, &ci, pd);
                prod[t - e + i] = spec.w_add(&prod[t - e + i], &spec.w_neg(&sub, pd), pd);
            }
        }
        let mut coords = vec![0u64; spec.dim()];
        for i in 0..e {
            coords[i * f..(i + 1) * f].copy_from_slice(&prod[i]);
        }
        BaseElem {
            spec: Arc::clone(spec),
            coords,
            pdigits: pd,
            prec,
        }
    }

    pub fn pow(&self, mut ex: u64) -> Self {
        let mut acc = BaseElem::one(&self.spec, self.prec);
        acc.pdigits = self.pdigits;
        let mut base = self.clone();
        while ex > 0 {
            if ex & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            ex >>= 1;
        }
        acc
    }

    pub fn mul_i64(&self, n: i64) -> Self {
        self.mul(&BaseElem::from_i64(&self.spec, n, self.prec))
    }

    /// Reduce the claimed precision (coordinates keep their digits).
    pub fn with_prec(&self, prec: u32) -> Self {
        let mut out = self.clone();
        out.prec = prec.min(self.prec);
        out
    }

    /// True if the element is `0 mod pi^prec`.
    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    /// Equality of the classes modulo `pi^min(prec)`.
    pub fn equals(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    /// One exact division by `pi`; per-coordinate digit bookkeeping is done
    /// by the caller (`divide_by_pi_exact`).
    ///
    /// Returns the quotient coordinates as W elements plus the index of the
    /// coordinate that lost one digit.
    fn div_pi_once(coords: &[Vec<u64>], spec: &BaseRingSpec, d: u32) -> Result<Vec<Vec<u64>>> {
        let e = spec.e as usize;
        let p = spec.p;
        // divisibility: a_0 must vanish mod p
        if coords[0].iter().any(|&c| c % p != 0) {
            return Err(Error::NotDivisible("element has valuation 0".into()));
        }
        let a0p: Vec<u64> = coords[0].iter().map(|&c| c / p).collect();
        let u = spec.w_from_i64_pub_inv(d);
        let b_top = spec.w_mul(&a0p, &u, d);
        let mut out = vec![vec![0u64; spec.fdeg as usize]; e];
        out[e - 1] = b_top.clone();
        for i in 1..e {
            let ci = spec.w_from_i64(&spec.eis_poly[i], d);
            let t = spec.w_mul(&b_top, &ci, d);
            out[i - 1] = spec.w_add(&coords[i], &t, d);
        }
        Ok(out)
    }

    /// Exact division by `pi^k` (`NotDivisible` when `v(self) < k`).
    ///
    /// The result has precision `prec - k` and loses `ceil(k/e)` digits.
    pub fn divide_by_pi_exact(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if k > self.prec {
            return Err(Error::PrecisionExhausted(format!(
                "divide by pi^{k} from precision {}",
                self.prec
            )));
        }
        let spec = &self.spec;
        let e = spec.e as usize;
        let f = spec.fdeg as usize;
        let mut w: Vec<Vec<u64>> = (0..e)
            .map(|i| self.coords[i * f..(i + 1) * f].to_vec())
            .collect();
        // digit counts per coordinate slot
        let mut digs = vec![self.pdigits; e];
        for _ in 0..k {
            let d = *digs.iter().min().unwrap();
            let new = Self::div_pi_once(&w, spec, d)?;
            // the slot e-1 received a p-division; slots 0..e-2 received
            // old values plus p*(known) and keep their digits
            let mut nd = vec![0u32; e];
            nd[e - 1] = digs[0] - 1;
            for i in 1..e {
                nd[i - 1] = digs[i].min(nd[e - 1] + 1);
            }
            digs = nd;
            w = new;
        }
        let pd = *digs.iter().min().unwrap();
        let m = spec.pmod(pd);
        let mut coords = vec![0u64; spec.dim()];
        for i in 0..e {
            for j in 0..f {
                coords[i * f + j] = w[i][j] % m;
            }
        }
        Ok(BaseElem {
            spec: Arc::clone(spec),
            coords,
            pdigits: pd,
            prec: self.prec - k,
        })
    }

    /// Largest `k <= prec` with `self` in `pi^k o_L`, or `None` for the
    /// zero class (valuation at least `prec`).
    pub fn valuation(&self) -> Option<u32> {
        let spec = &self.spec;
        let e = spec.e as usize;
        let f = spec.fdeg as usize;
        let mut w: Vec<Vec<u64>> = (0..e)
            .map(|i| self.coords[i * f..(i + 1) * f].to_vec())
            .collect();
        let mut digs = vec![self.pdigits; e];
        let mut v = 0u32;
        loop {
            if v >= self.prec {
                return None;
            }
            let d = *digs.iter().min().unwrap();
            if d == 0 {
                // no digits left: everything known is zero
                return None;
            }
            let m = spec.pmod(d);
            if w.iter().all(|c| c.iter().all(|&x| x % m == 0)) {
                // zero at e*d >= remaining precision
                return None;
            }
            if w[0].iter().any(|&c| c % spec.p != 0) {
                return Some(v);
            }
            match Self::div_pi_once(&w, spec, d) {
                Ok(new) => {
                    let mut nd = vec![0u32; e];
                    nd[e - 1] = digs[0] - 1;
                    for i in 1..e {
                        nd[i - 1] = digs[i].min(nd[e - 1] + 1);
                    }
                    digs = nd;
                    w = new;
                    v += 1;
                }
                Err(_) => return Some(v),
            }
        }
    }

    /// Reduction modulo `pi` into the residue field.
    pub fn reduce_residue(&self) -> ResidueElem {
        let p = self.spec.p;
        let f = self.spec.fdeg as usize;
        ResidueElem {
            spec: Arc::clone(&self.spec),
            coords: self.coords[..f].iter().map(|&c| c % p).collect(),
        }
    }

    /// Newton inversion of a unit.
    pub fn invert_unit(&self) -> Result<Self> {
        let r = self.reduce_residue();
        let rinv = r.invert()?;
        let mut x = rinv.teichmuller(self.prec);
        x.pdigits = x.pdigits.min(self.pdigits);
        // x <- x(2 - a x), doubling digits each round
        let two = BaseElem::from_i64(&self.spec, 2, self.prec);
        let rounds = 64 - u64::from(self.pdigits.max(1)).leading_zeros() + 2;
        for _ in 0..rounds {
            let ax = self.mul(&x);
            x = x.mul(&two.sub(&ax));
        }
        Ok(x)
    }

    /// Multiply by `pi^k`, raising the claimed precision to `prec + k`
    /// (`pi^k * (a + O(pi^prec))` is determined mod `pi^(prec+k)`; the
    /// representative is lifted with zero upper digits).
    pub fn mul_pi_pow(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        let new_prec = (self.prec + k).min(self.spec.max_pi_prec_budget());
        let lifted = BaseElem::from_coords(&self.spec, &self.canon_coords(), new_prec)
            .expect("coordinate length fixed by spec");
        lifted.mul(&self.spec.pi(new_prec).pow(k as u64))
    }

    /// Canonical serialization coordinates (reduced mod `p^pdigits`).
    pub fn canon_coords(&self) -> Vec<u64> {
        let m = self.spec.pmod(self.pdigits);
        self.coords.iter().map(|&c| c % m).collect()
    }
}

impl BaseRingSpec {
    fn w_from_i64_pub_inv(&self, d: u32) -> Vec<u64> {
        let m = self.pmod(d);
        self.neg_c0_over_p_inv.iter().map(|&c| c % m).collect()
    }
}

/// An element of the residue field `k_L = F_q`.
#[derive(Clone, PartialEq, Eq)]
pub struct ResidueElem {
    spec: Arc<BaseRingSpec>,
    coords: Vec<u64>,
}

impl fmt::Debug for ResidueElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}~", self.coords)
    }
}

impl ResidueElem {
    pub fn spec(&self) -> &Arc<BaseRingSpec> {
        &self.spec
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn zero(spec: &Arc<BaseRingSpec>) -> Self {
        ResidueElem {
            spec: Arc::clone(spec),
            coords: vec![0; spec.fdeg as usize],
        }
    }

    pub fn one(spec: &Arc<BaseRingSpec>) -> Self {
        Self::from_i64(spec, 1)
    }

    pub fn from_i64(spec: &Arc<BaseRingSpec>, n: i64) -> Self {
        let mut coords = vec![0u64; spec.fdeg as usize];
        coords[0] = n.rem_euclid(spec.p as i64) as u64;
        ResidueElem {
            spec: Arc::clone(spec),
            coords,
        }
    }

    pub fn from_coords(spec: &Arc<BaseRingSpec>, coords: &[u64]) -> Result<Self> {
        if coords.len() != spec.fdeg as usize {
            return Err(Error::BadInput("bad residue coordinate length".into()));
        }
        Ok(ResidueElem {
            spec: Arc::clone(spec),
            coords: coords.iter().map(|&c| c % spec.p).collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        ResidueElem {
            spec: Arc::clone(&self.spec),
            coords: self.spec.w_add(&self.coords, &other.coords, 1),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        ResidueElem {
            spec: Arc::clone(&self.spec),
            coords: self.spec.w_neg(&self.coords, 1),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        ResidueElem {
            spec: Arc::clone(&self.spec),
            coords: self.spec.w_mul(&self.coords, &other.coords, 1),
        }
    }

    pub fn pow(&self, mut ex: u64) -> Self {
        let mut acc = ResidueElem::one(&self.spec);
        let mut base = self.clone();
        while ex > 0 {
            if ex & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            ex >>= 1;
        }
        acc
    }

    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NotAUnit("zero in residue field".into()));
        }
        Ok(self.pow(self.spec.q - 2))
    }

    /// The multiplicative (Teichmuller) lift: the unique `w` with
    /// `w^q = w` reducing to `self`.
    pub fn teichmuller(&self, prec: u32) -> BaseElem {
        let spec = &self.spec;
        let mut w = BaseElem {
            spec: Arc::clone(spec),
            coords: {
                let mut c = vec![0u64; spec.dim()];
                for (j, &x) in self.coords.iter().enumerate() {
                    c[j] = x;
                }
                c
            },
            pdigits: spec.pdigits_for(prec),
            prec,
        };
        // one pi-digit gained per q-power
        let iters = prec + 2;
        for _ in 0..iters {
            w = w.pow(spec.q);
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn z3(prec_max: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 1, 1, None, None, prec_max).unwrap()
    }

    fn eisenstein_x2_minus_3(prec_max: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 2, 1, None, Some(vec![vec![-3], vec![0], vec![1]]), prec_max).unwrap()
    }

    fn f9(prec_max: u32) -> Arc<BaseRingSpec> {
        BaseRingSpec::new(3, 1, 2, Some(vec![1, 0, 1]), None, prec_max).unwrap()
    }

    fn rand_elem(spec: &Arc<BaseRingSpec>, prec: u32, rng: &mut ChaCha8Rng) -> BaseElem {
        let d = spec.pdigits_for(prec);
        let m = spec.powers_of_p[d as usize];
        let coords: Vec<u64> = (0..spec.dim()).map(|_| rng.gen_range(0..m)).collect();
        BaseElem::from_coords(spec, &coords, prec).unwrap()
    }

    #[test]
    fn add_over_z3() {
        let s = z3(8);
        let a = BaseElem::from_i64(&s, 2, 4);
        let b = BaseElem::from_i64(&s, 1, 4);
        assert!(a.add(&b).equals(&BaseElem::from_i64(&s, 3, 4)));
    }

    #[test]
    fn pi_squared_is_three_in_ramified_quadratic() {
        let s = eisenstein_x2_minus_3(8);
        let pi = s.pi(6);
        assert!(pi.mul(&pi).equals(&BaseElem::from_i64(&s, 3, 6)));
    }

    #[test]
    fn zero_is_absorbing() {
        let s = z3(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = BaseElem::zero(&s, 6);
        for _ in 0..20 {
            let a = rand_elem(&s, 6, &mut rng);
            assert!(a.mul(&z).is_zero());
        }
    }

    #[test]
    fn valuations() {
        let s = z3(8);
        assert_eq!(BaseElem::from_i64(&s, 6, 6).valuation(), Some(1));
        assert_eq!(BaseElem::from_i64(&s, 0, 6).valuation(), None);
        let s2 = eisenstein_x2_minus_3(8);
        assert_eq!(BaseElem::from_i64(&s2, 3, 6).valuation(), Some(2));
    }

    #[test]
    fn divide_examples() {
        let s = z3(8);
        let nine = BaseElem::from_i64(&s, 9, 6);
        let q = nine.divide_by_pi_exact(2).unwrap();
        assert_eq!(q.prec(), 4);
        assert!(q.equals(&BaseElem::from_i64(&s, 1, 4)));

        let s2 = eisenstein_x2_minus_3(8);
        let three = BaseElem::from_i64(&s2, 3, 6);
        let q = three.divide_by_pi_exact(2).unwrap();
        assert!(q.equals(&BaseElem::from_i64(&s2, 1, 4)));

        let one = BaseElem::from_i64(&s, 1, 6);
        assert!(matches!(
            one.divide_by_pi_exact(1),
            Err(Error::NotDivisible(_))
        ));
    }

    #[test]
    fn teichmuller_of_two_in_z3_is_80_mod_81() {
        let s = z3(8);
        let c = ResidueElem::from_i64(&s, 2);
        let w = c.teichmuller(4);
        assert!(w.equals(&BaseElem::from_i64(&s, 80, 4)));
        assert!(w.pow(3).equals(&w));
        let z = ResidueElem::zero(&s);
        assert!(z.teichmuller(4).is_zero());
    }

    #[test]
    fn teichmuller_is_multiplicative_over_f9() {
        let s = f9(8);
        // exhaust F_9
        let mut elems = vec![];
        for a in 0..3 {
            for b in 0..3 {
                elems.push(ResidueElem::from_coords(&s, &[a, b]).unwrap());
            }
        }
        for c in &elems {
            for c2 in &elems {
                let lhs = c.teichmuller(5).mul(&c2.teichmuller(5));
                let rhs = c.mul(c2).teichmuller(5);
                assert!(lhs.equals(&rhs));
            }
        }
    }

    #[test]
    fn teichmuller_is_a_section_and_multiplicative_section_unique() {
        let s = f9(8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = rng.gen_range(0..3);
            let b = rng.gen_range(0..3);
            let c = ResidueElem::from_coords(&s, &[a, b]).unwrap();
            let w = c.teichmuller(6);
            assert_eq!(w.reduce_residue(), c);
            if !c.is_zero() {
                assert!(w.pow(s.q - 1).equals(&BaseElem::one(&s, 6)));
            }
        }
    }

    #[test]
    fn reduce_is_a_homomorphism() {
        let s = f9(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = rand_elem(&s, 5, &mut rng);
            let b = rand_elem(&s, 5, &mut rng);
            assert_eq!(
                a.add(&b).reduce_residue(),
                a.reduce_residue().add(&b.reduce_residue())
            );
            assert_eq!(
                a.mul(&b).reduce_residue(),
                a.reduce_residue().mul(&b.reduce_residue())
            );
        }
        assert!(BaseElem::from_i64(&s, 3, 5).reduce_residue().is_zero());
    }

    #[test]
    fn valuation_is_additive_below_half_precision() {
        for spec in [z3(10), eisenstein_x2_minus_3(10), f9(10)] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..40 {
                let a = rand_elem(&spec, 10, &mut rng);
                let b = rand_elem(&spec, 10, &mut rng);
                let (va, vb) = (a.valuation(), b.valuation());
                if let (Some(va), Some(vb)) = (va, vb) {
                    if va < 5 && vb < 5 {
                        assert_eq!(a.mul(&b).valuation(), Some(va + vb));
                    }
                }
            }
        }
    }

    #[test]
    fn divide_round_trip() {
        for spec in [z3(10), eisenstein_x2_minus_3(10), f9(10)] {
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            for _ in 0..30 {
                let a = rand_elem(&spec, 7, &mut rng);
                for k in 1..=3u32 {
                    let pik = spec.pi(7).pow(k as u64);
                    let prod = pik.mul(&a);
                    let back = prod.divide_by_pi_exact(k).unwrap();
                    assert!(back.equals(&a.with_prec(7 - k)));
                }
            }
        }
    }

    #[test]
    fn invert_units() {
        for spec in [z3(10), eisenstein_x2_minus_3(10), f9(10)] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let one = BaseElem::one(&spec, 8);
            for _ in 0..20 {
                let mut a = rand_elem(&spec, 8, &mut rng);
                if a.reduce_residue().is_zero() {
                    a = a.add(&BaseElem::one(&spec, 8));
                }
                let inv = a.invert_unit().unwrap();
                assert!(a.mul(&inv).equals(&one));
            }
        }
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(BaseRingSpec::new(4, 1, 1, None, None, 4).is_err());
        // y^2 - 1 is reducible mod 3
        assert!(BaseRingSpec::new(3, 1, 2, Some(vec![-1, 0, 1]), None, 4).is_err());
        // x^2 - 9 is not Eisenstein
        assert!(
            BaseRingSpec::new(3, 2, 1, None, Some(vec![vec![-9], vec![0], vec![1]]), 4).is_err()
        );
    }
}
