//! RNS bases and the approximate (fast) basis conversion family.
//!
//! A polynomial lives as one residue vector per prime limb. Conversion
//! between coprime bases uses the fast CRT form with *centered* source
//! digits: for source basis `A = {a_i}` with product `A*`,
//!
//! ```text
//! out_j = Σ_i center(x_i · (A*/a_i)^-1 mod a_i) · (A*/a_i)   (mod b_j)
//! ```
//!
//! which represents `v + e·A*` for the exact centered value `v`, with
//! `|e| <= |A|/2 + 1`. No floating-point correction is applied; the error
//! multiple is first-class and is what the fused-conversion identity is
//! about: converting `T -> Q` directly yields `v + T·e`, while converting
//! `T -> P` and then `P -> Q` yields `v + T·e1 + P·e2`.
//!
//! [`crt_reconstruct`] is the exact big-integer oracle used to verify all of
//! this; it is deliberately independent of the conversion kernels.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};

use crate::modring::PrimeContext;
use crate::ntt::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimbRole {
    Q,
    P,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RnsError {
    DomainMismatch,
    BasisOverlap,
    MissingLimbs,
    LengthMismatch,
}

impl fmt::Display for RnsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RnsError::DomainMismatch => write!(f, "operation requires the coefficient domain"),
            RnsError::BasisOverlap => write!(f, "source and target bases share a prime"),
            RnsError::MissingLimbs => write!(f, "polynomial is missing required limbs"),
            RnsError::LengthMismatch => write!(f, "limb shapes do not match"),
        }
    }
}

impl core::error::Error for RnsError {}

/// Polynomial in RNS form: `limbs[i][c]` is coefficient `c` mod `ctxs[i].q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPolynomial {
    pub limbs: Vec<Vec<u64>>,
    pub ctxs: Vec<PrimeContext>,
    /// Multiplicative level of the ciphertext this polynomial belongs to
    /// (count of live Q-limbs minus one).
    pub level: usize,
    pub domain: Domain,
}

impl RnsPolynomial {
    pub fn zero(ctxs: &[PrimeContext], level: usize, domain: Domain) -> Self {
        let n = ctxs[0].n;
        RnsPolynomial {
            limbs: vec![vec![0; n]; ctxs.len()],
            ctxs: ctxs.to_vec(),
            level,
            domain,
        }
    }

    pub fn degree(&self) -> usize {
        self.ctxs[0].n
    }

    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    pub fn moduli(&self) -> impl Iterator<Item = u64> + '_ {
        self.ctxs.iter().map(|c| c.q)
    }

    /// Index of the limb with modulus `q`, if present.
    pub fn limb_index(&self, q: u64) -> Option<usize> {
        self.ctxs.iter().position(|c| c.q == q)
    }
}

/// Precomputed constants for one (source set, target set) conversion:
/// `src_inv[i] = ((A*/a_i)^-1 mod a_i)` and `cross[i][j] = (A*/a_i) mod b_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BconvTable {
    pub src: Vec<PrimeContext>,
    pub dst: Vec<PrimeContext>,
    pub src_inv: Vec<u64>,
    pub cross: Vec<Vec<u64>>,
}

impl BconvTable {
    pub fn new(src: &[PrimeContext], dst: &[PrimeContext]) -> Result<Self, RnsError> {
        for s in src {
            if dst.iter().any(|d| d.q == s.q) {
                return Err(RnsError::BasisOverlap);
            }
        }
        let product: BigUint = src.iter().map(|c| BigUint::from(c.q)).product();
        let mut src_inv = Vec::with_capacity(src.len());
        let mut cross = Vec::with_capacity(src.len());
        for s in src {
            let m_i = &product / BigUint::from(s.q);
            let m_mod = (&m_i % BigUint::from(s.q)).to_u64().unwrap();
            src_inv.push(s.inv(m_mod));
            cross.push(
                dst.iter()
                    .map(|d| (&m_i % BigUint::from(d.q)).to_u64().unwrap())
                    .collect(),
            );
        }
        Ok(BconvTable {
            src: src.to_vec(),
            dst: dst.to_vec(),
            src_inv,
            cross,
        })
    }

    /// Applies the conversion to raw limb data (one vec per source limb).
    pub fn apply(&self, limbs: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let n = limbs[0].len();
        let mut digits = vec![0i64; self.src.len()];
        let mut out = vec![vec![0u64; n]; self.dst.len()];
        for c in 0..n {
            for (i, s) in self.src.iter().enumerate() {
                let y = s.mul(limbs[i][c], self.src_inv[i]);
                digits[i] = s.center(y);
            }
            for (j, d) in self.dst.iter().enumerate() {
                let q = d.q;
                let thresh = u128::MAX - (q as u128 - 1) * (q as u128 - 1);
                let mut pos: u128 = 0;
                let mut neg: u128 = 0;
                for (i, &dig) in digits.iter().enumerate() {
                    let m = self.cross[i][j] as u128;
                    if dig >= 0 {
                        pos += dig as u128 * m;
                        if pos >= thresh {
                            pos %= q as u128;
                        }
                    } else {
                        neg += (-dig) as u128 * m;
                        if neg >= thresh {
                            neg %= q as u128;
                        }
                    }
                }
                let p = (pos % q as u128) as u64;
                let ng = (neg % q as u128) as u64;
                out[j][c] = d.sub(p, ng);
            }
        }
        out
    }
}

/// Ordered RNS basis with role labels and the precomputed conversion tables
/// used by the key-switch pipeline. The full limb order is Q ++ P ++ T.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    q_limbs: Vec<PrimeContext>,
    p_limbs: Vec<PrimeContext>,
    t_limbs: Vec<PrimeContext>,
    p_to_q: BconvTable,
    t_to_p: BconvTable,
    t_to_q: BconvTable,
    /// `P^-1 mod q_i` for each Q-limb (ModDown scaling).
    p_inv_mod_q: Vec<u64>,
}

impl RnsBasis {
    pub fn new(
        q_limbs: Vec<PrimeContext>,
        p_limbs: Vec<PrimeContext>,
        t_limbs: Vec<PrimeContext>,
    ) -> Result<Self, RnsError> {
        let mut all: Vec<u64> = q_limbs
            .iter()
            .chain(&p_limbs)
            .chain(&t_limbs)
            .map(|c| c.q)
            .collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(RnsError::BasisOverlap);
        }
        let p_to_q = BconvTable::new(&p_limbs, &q_limbs)?;
        let t_to_p = BconvTable::new(&t_limbs, &p_limbs)?;
        let t_to_q = BconvTable::new(&t_limbs, &q_limbs)?;
        let p_product: BigUint = p_limbs.iter().map(|c| BigUint::from(c.q)).product();
        let p_inv_mod_q = q_limbs
            .iter()
            .map(|c| c.inv((&p_product % BigUint::from(c.q)).to_u64().unwrap()))
            .collect();
        Ok(RnsBasis {
            q_limbs,
            p_limbs,
            t_limbs,
            p_to_q,
            t_to_p,
            t_to_q,
            p_inv_mod_q,
        })
    }

    pub fn q_limbs(&self) -> &[PrimeContext] {
        &self.q_limbs
    }

    pub fn p_limbs(&self) -> &[PrimeContext] {
        &self.p_limbs
    }

    pub fn t_limbs(&self) -> &[PrimeContext] {
        &self.t_limbs
    }

    /// Live Q-limbs at level `l` (the first `l + 1`).
    pub fn q_live(&self, level: usize) -> &[PrimeContext] {
        &self.q_limbs[..=level]
    }

    pub fn role_of(&self, q: u64) -> Option<LimbRole> {
        if self.q_limbs.iter().any(|c| c.q == q) {
            Some(LimbRole::Q)
        } else if self.p_limbs.iter().any(|c| c.q == q) {
            Some(LimbRole::P)
        } else if self.t_limbs.iter().any(|c| c.q == q) {
            Some(LimbRole::T)
        } else {
            None
        }
    }

    pub fn p_product(&self) -> BigUint {
        self.p_limbs.iter().map(|c| BigUint::from(c.q)).product()
    }

    pub fn t_product(&self) -> BigUint {
        self.t_limbs.iter().map(|c| BigUint::from(c.q)).product()
    }

    pub fn q_live_product(&self, level: usize) -> BigUint {
        self.q_live(level).iter().map(|c| BigUint::from(c.q)).product()
    }

    pub fn precomputed_p_to_q(&self) -> &BconvTable {
        &self.p_to_q
    }

    pub fn precomputed_t_to_p(&self) -> &BconvTable {
        &self.t_to_p
    }

    pub fn precomputed_t_to_q(&self) -> &BconvTable {
        &self.t_to_q
    }

    pub fn p_inv_mod_q(&self) -> &[u64] {
        &self.p_inv_mod_q
    }

    /// Consistency check: every stored table equals a freshly derived one.
    pub fn constants_regenerate(&self) -> bool {
        BconvTable::new(&self.p_limbs, &self.q_limbs).map(|t| t == self.p_to_q) == Ok(true)
            && BconvTable::new(&self.t_limbs, &self.p_limbs).map(|t| t == self.t_to_p) == Ok(true)
            && BconvTable::new(&self.t_limbs, &self.q_limbs).map(|t| t == self.t_to_q) == Ok(true)
    }
}

/// Approximate fast base conversion of `x` onto `target`.
///
/// The output represents `v + e·A*` where `v` is the exact centered value of
/// `x`, `A*` the source product and `|e| <= |A|/2 + 1`; no exact reduction is
/// performed.
pub fn bconv(x: &RnsPolynomial, target: &[PrimeContext]) -> Result<RnsPolynomial, RnsError> {
    if x.domain != Domain::Coefficient {
        return Err(RnsError::DomainMismatch);
    }
    let table = BconvTable::new(&x.ctxs, target)?;
    Ok(RnsPolynomial {
        limbs: table.apply(&x.limbs),
        ctxs: target.to_vec(),
        level: x.level,
        domain: Domain::Coefficient,
    })
}

/// [`bconv`] with a prebuilt table (the hot path inside key switching).
pub fn bconv_with_table(x: &RnsPolynomial, table: &BconvTable) -> Result<RnsPolynomial, RnsError> {
    if x.domain != Domain::Coefficient {
        return Err(RnsError::DomainMismatch);
    }
    if x.ctxs.len() != table.src.len() || x.ctxs.iter().zip(&table.src).any(|(a, b)| a.q != b.q) {
        return Err(RnsError::LengthMismatch);
    }
    Ok(RnsPolynomial {
        limbs: table.apply(&x.limbs),
        ctxs: table.dst.clone(),
        level: x.level,
        domain: Domain::Coefficient,
    })
}

/// Fused `T -> Q` conversion: one conversion step, so the only error term is
/// a multiple of `T` (instead of `T·e1 + P·e2` from the two-step route
/// through `P`).
pub fn bconv_fused_t_to_q(x: &RnsPolynomial, basis: &RnsBasis) -> Result<RnsPolynomial, RnsError> {
    if x.domain != Domain::Coefficient {
        return Err(RnsError::DomainMismatch);
    }
    if x.ctxs.len() != basis.t_limbs.len()
        || x.ctxs.iter().zip(&basis.t_limbs).any(|(a, b)| a.q != b.q)
    {
        return Err(RnsError::MissingLimbs);
    }
    let live = x.level.min(basis.q_limbs.len() - 1);
    let table = BconvTable {
        src: basis.t_to_q.src.clone(),
        dst: basis.t_to_q.dst[..=live].to_vec(),
        src_inv: basis.t_to_q.src_inv.clone(),
        cross: basis
            .t_to_q
            .cross
            .iter()
            .map(|row| row[..=live].to_vec())
            .collect(),
    };
    Ok(RnsPolynomial {
        limbs: table.apply(&x.limbs),
        ctxs: table.dst.clone(),
        level: x.level,
        domain: Domain::Coefficient,
    })
}

/// ModDown: divide by the special product `P` and drop the P-limbs.
///
/// `x` must carry every P-limb of `basis` plus the live Q-limbs; the output
/// is over Q at the same level and approximates `round(x / P)` up to the
/// conversion error.
pub fn mod_down(x: &RnsPolynomial, basis: &RnsBasis) -> Result<RnsPolynomial, RnsError> {
    if x.domain != Domain::Coefficient {
        return Err(RnsError::DomainMismatch);
    }
    let n = x.degree();
    let mut p_rows: Vec<Vec<u64>> = Vec::with_capacity(basis.p_limbs.len());
    for p in &basis.p_limbs {
        let idx = x.limb_index(p.q).ok_or(RnsError::MissingLimbs)?;
        p_rows.push(x.limbs[idx].clone());
    }
    let live = x.level;
    let mut q_rows: Vec<(usize, usize)> = Vec::with_capacity(live + 1); // (q index in basis, limb index in x)
    for (qi, qc) in basis.q_limbs.iter().enumerate().take(live + 1) {
        let idx = x.limb_index(qc.q).ok_or(RnsError::MissingLimbs)?;
        q_rows.push((qi, idx));
    }
    // Convert the P-part onto the live Q-limbs.
    let table = BconvTable {
        src: basis.p_to_q.src.clone(),
        dst: basis.p_to_q.dst[..=live].to_vec(),
        src_inv: basis.p_to_q.src_inv.clone(),
        cross: basis
            .p_to_q
            .cross
            .iter()
            .map(|row| row[..=live].to_vec())
            .collect(),
    };
    let converted = table.apply(&p_rows);
    let mut out_limbs = Vec::with_capacity(live + 1);
    let mut out_ctxs = Vec::with_capacity(live + 1);
    for (pos, &(qi, xi)) in q_rows.iter().enumerate() {
        let ctx = basis.q_limbs[qi];
        let pinv = basis.p_inv_mod_q[qi];
        let mut row = vec![0u64; n];
        for c in 0..n {
            let diff = ctx.sub(x.limbs[xi][c], converted[pos][c]);
            row[c] = ctx.mul(diff, pinv);
        }
        out_limbs.push(row);
        out_ctxs.push(ctx);
    }
    Ok(RnsPolynomial {
        limbs: out_limbs,
        ctxs: out_ctxs,
        level: live,
        domain: Domain::Coefficient,
    })
}

/// Exact centered CRT value of every coefficient; the big-integer oracle.
pub fn crt_reconstruct(x: &RnsPolynomial) -> Vec<BigInt> {
    let product: BigUint = x.ctxs.iter().map(|c| BigUint::from(c.q)).product();
    let half = &product / 2u32;
    let mut parts: Vec<(BigUint, u64, u64)> = Vec::with_capacity(x.ctxs.len()); // (M_i, inv_i, q_i)
    for c in &x.ctxs {
        let m_i = &product / BigUint::from(c.q);
        let inv = c.inv((&m_i % BigUint::from(c.q)).to_u64().unwrap());
        parts.push((m_i, inv, c.q));
    }
    let n = x.degree();
    let mut out = Vec::with_capacity(n);
    for coef in 0..n {
        let mut acc = BigUint::zero();
        for (i, (m_i, inv, q)) in parts.iter().enumerate() {
            let y = crate::modring::mod_mul(x.limbs[i][coef], *inv, *q);
            acc += m_i * BigUint::from(y);
        }
        acc %= &product;
        let v = if acc > half {
            BigInt::from(acc) - BigInt::from(product.clone())
        } else {
            BigInt::from(acc)
        };
        out.push(v);
    }
    out
}

/// Inverse of [`crt_reconstruct`]: residue decomposition of integer values.
pub fn decompose(
    values: &[BigInt],
    ctxs: &[PrimeContext],
    level: usize,
    domain: Domain,
) -> RnsPolynomial {
    let mut limbs = Vec::with_capacity(ctxs.len());
    for c in ctxs {
        let q = BigInt::from(c.q);
        let row = values
            .iter()
            .map(|v| {
                let mut r = v % &q;
                if r.is_negative() {
                    r += &q;
                }
                r.to_u64().unwrap()
            })
            .collect();
        limbs.push(row);
    }
    RnsPolynomial {
        limbs,
        ctxs: ctxs.to_vec(),
        level,
        domain,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::find_ntt_primes;
    use num_traits::One;

    fn rng_stream(seed: u64) -> impl FnMut() -> u64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            s ^ (s >> 31)
        }
    }

    fn random_rns(ctxs: &[PrimeContext], next: &mut impl FnMut() -> u64) -> RnsPolynomial {
        let n = ctxs[0].n;
        RnsPolynomial {
            limbs: ctxs.iter().map(|c| (0..n).map(|_| next() % c.q).collect()).collect(),
            ctxs: ctxs.to_vec(),
            level: 0,
            domain: Domain::Coefficient,
        }
    }

    fn product(ctxs: &[PrimeContext]) -> BigInt {
        ctxs.iter().map(|c| BigInt::from(c.q)).product()
    }

    #[test]
    fn crt_roundtrip() {
        let ctxs = find_ntt_primes(24, 8, 3).unwrap();
        let prod = product(&ctxs);
        let half = &prod / 2;
        let mut next = rng_stream(11);
        let values: Vec<BigInt> = (0..8)
            .map(|_| {
                let raw = BigInt::from(next()) * BigInt::from(next());
                (raw % &prod) - &half / 2
            })
            .collect();
        let poly = decompose(&values, &ctxs, 0, Domain::Coefficient);
        let back = crt_reconstruct(&poly);
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn crt_single_limb_is_centered_lift() {
        let ctxs = find_ntt_primes(24, 8, 1).unwrap();
        let q = ctxs[0].q;
        let mut poly = RnsPolynomial::zero(&ctxs, 0, Domain::Coefficient);
        poly.limbs[0][0] = 5;
        poly.limbs[0][1] = q - 3;
        let vals = crt_reconstruct(&poly);
        assert_eq!(vals[0], BigInt::from(5));
        assert_eq!(vals[1], BigInt::from(-3));
    }

    #[test]
    fn bconv_zero_and_single_limb() {
        let src = find_ntt_primes(20, 8, 1).unwrap();
        let dst = find_ntt_primes(22, 8, 2).unwrap();
        let zero = RnsPolynomial::zero(&src, 0, Domain::Coefficient);
        let out = bconv(&zero, &dst).unwrap();
        assert!(out.limbs.iter().all(|l| l.iter().all(|&v| v == 0)));

        // One-term CRT is exact: the centered value transports unchanged.
        let mut next = rng_stream(5);
        let x = random_rns(&src, &mut next);
        let out = bconv(&x, &dst).unwrap();
        assert_eq!(crt_reconstruct(&out), crt_reconstruct(&x));
    }

    #[test]
    fn bconv_error_is_small_multiple_of_source_product() {
        // N = 8: |A| = 3 source limbs, 2 large target limbs.
        let src = find_ntt_primes(20, 8, 3).unwrap();
        let dst = find_ntt_primes(40, 8, 2).unwrap();
        let src_prod = product(&src);
        let mut next = rng_stream(17);
        for _ in 0..50 {
            let x = random_rns(&src, &mut next);
            let out = bconv(&x, &dst).unwrap();
            let exact = crt_reconstruct(&x);
            let got = crt_reconstruct(&out);
            for (v, w) in exact.iter().zip(&got) {
                let err = w - v;
                assert!((&err % &src_prod).is_zero(), "error must be a multiple of A*");
                let e = err / &src_prod;
                assert!(e.abs() <= BigInt::from(2), "centered digits bound |e| <= |A|/2 + 1");
            }
        }
    }

    #[test]
    fn bconv_rejects_eval_domain_and_overlap() {
        let src = find_ntt_primes(20, 8, 2).unwrap();
        let mut x = RnsPolynomial::zero(&src, 0, Domain::Coefficient);
        x.domain = Domain::Evaluation;
        assert_eq!(bconv(&x, &src[..1]).unwrap_err(), RnsError::DomainMismatch);
        x.domain = Domain::Coefficient;
        assert_eq!(bconv(&x, &src[1..]).unwrap_err(), RnsError::BasisOverlap);
    }

    /// Basis with a small T (two 18-bit limbs) and a much larger P, so the
    /// two-step route has headroom and the error split of the fused identity
    /// is observable. Three P-limbs: with two, the centered digit fractions
    /// can never sum past 1 and the P-overflow term would vanish identically.
    fn eq8_basis(n: usize) -> RnsBasis {
        let q_limbs = find_ntt_primes(40, n, 4).unwrap();
        let p_limbs = find_ntt_primes(30, n, 3).unwrap();
        let t_limbs = find_ntt_primes(18, n, 2).unwrap();
        RnsBasis::new(q_limbs, p_limbs, t_limbs).unwrap()
    }

    #[test]
    fn fused_error_divisible_by_t_only() {
        let basis = eq8_basis(8);
        let t_prod = product(basis.t_limbs());
        let mut next = rng_stream(23);
        for _ in 0..40 {
            let mut x = random_rns(basis.t_limbs(), &mut next);
            x.level = basis.q_limbs().len() - 1;
            let out = bconv_fused_t_to_q(&x, &basis).unwrap();
            let exact = crt_reconstruct(&x);
            let got = crt_reconstruct(&out);
            for (v, w) in exact.iter().zip(&got) {
                assert!(((w - v) % &t_prod).is_zero());
            }
        }
    }

    #[test]
    fn fused_beats_two_step_on_average() {
        let basis = eq8_basis(8);
        let t_prod = product(basis.t_limbs());
        let p_prod = product(basis.p_limbs());
        let mut next = rng_stream(29);
        let mut fused_sum = BigInt::zero();
        let mut two_sum = BigInt::zero();
        let mut coeffs = 0usize;
        let mut fused_not_worse = 0usize;
        let mut p_component_seen = false;
        for _ in 0..200 {
            let mut x = random_rns(basis.t_limbs(), &mut next);
            x.level = basis.q_limbs().len() - 1;
            let exact = crt_reconstruct(&x);

            let fused = bconv_fused_t_to_q(&x, &basis).unwrap();
            let via_p = bconv_with_table(&x, basis.precomputed_t_to_p()).unwrap();
            let two_step = bconv_with_table(&via_p, basis.precomputed_p_to_q()).unwrap();

            let f = crt_reconstruct(&fused);
            let t = crt_reconstruct(&two_step);
            for i in 0..8 {
                let fe = (&f[i] - &exact[i]).abs();
                let te = (&t[i] - &exact[i]).abs();
                if fe <= te {
                    fused_not_worse += 1;
                }
                // Two-step error decomposes as T*e1 + P*e2 with the same e1
                // the single conversion produced.
                let te_signed = &t[i] - &exact[i];
                let fe_signed = &f[i] - &exact[i];
                let p_part = te_signed - &fe_signed;
                assert!((&p_part % &p_prod).is_zero(), "residual must be a P-multiple");
                if !p_part.is_zero() {
                    p_component_seen = true;
                }
                assert!((fe_signed % &t_prod).is_zero());
                fused_sum += fe;
                two_sum += te;
                coeffs += 1;
            }
        }
        assert!(coeffs >= 1000);
        assert!(fused_sum <= two_sum, "mean fused error must not exceed two-step");
        assert!(fused_not_worse * 100 >= coeffs * 95, "fused wins on >= 95% of coefficients");
        assert!(p_component_seen, "two-step error should show a P-multiple component");
    }

    #[test]
    fn mod_down_exact_on_constructed_multiples() {
        let basis = eq8_basis(8);
        let level = basis.q_limbs().len() - 1;
        let p_prod = product(basis.p_limbs());
        let mut next = rng_stream(31);
        let y: Vec<BigInt> = (0..8).map(|_| BigInt::from(next() as i64 >> 20)).collect();
        let x_vals: Vec<BigInt> = y.iter().map(|v| v * &p_prod).collect();
        let mut ctxs = basis.q_limbs().to_vec();
        ctxs.extend_from_slice(basis.p_limbs());
        let x = decompose(&x_vals, &ctxs, level, Domain::Coefficient);
        let out = mod_down(&x, &basis).unwrap();
        assert_eq!(out.level, level);
        assert_eq!(crt_reconstruct(&out), y);

        let zero = RnsPolynomial::zero(&ctxs, level, Domain::Coefficient);
        let out = mod_down(&zero, &basis).unwrap();
        assert!(crt_reconstruct(&out).iter().all(|v| v.is_zero()));
    }

    #[test]
    fn mod_down_error_bounded() {
        let basis = eq8_basis(8);
        let level = basis.q_limbs().len() - 1;
        let p_prod = product(basis.p_limbs());
        let k = basis.p_limbs().len() as i64;
        let mut next = rng_stream(37);
        let mut ctxs = basis.q_limbs().to_vec();
        ctxs.extend_from_slice(basis.p_limbs());
        for _ in 0..20 {
            let mut x = random_rns(&ctxs, &mut next);
            x.level = level;
            let exact = crt_reconstruct(&x);
            let out = mod_down(&x, &basis).unwrap();
            let got = crt_reconstruct(&out);
            // |out - x/P| <= 1/2 + |e| with |e| <= K/2 + 1, i.e.
            // |out*P - x| <= (K/2 + 1.5) * P.
            let bound = (&p_prod * BigInt::from(k + 3)) / BigInt::from(2);
            for (v, w) in exact.iter().zip(&got) {
                let err = (w * &p_prod - v).abs();
                assert!(err <= bound, "moddown residual too large");
            }
        }
    }

    #[test]
    fn mod_down_missing_limbs() {
        let basis = eq8_basis(8);
        let x = RnsPolynomial::zero(basis.q_limbs(), basis.q_limbs().len() - 1, Domain::Coefficient);
        assert_eq!(mod_down(&x, &basis).unwrap_err(), RnsError::MissingLimbs);
    }

    #[test]
    fn basis_constants_regenerate() {
        let basis = eq8_basis(8);
        assert!(basis.constants_regenerate());
        assert!(basis.role_of(basis.q_limbs()[0].q) == Some(LimbRole::Q));
        assert!(basis.role_of(basis.p_limbs()[0].q) == Some(LimbRole::P));
        assert!(basis.role_of(basis.t_limbs()[0].q) == Some(LimbRole::T));
        assert!(basis.role_of(3).is_none());
    }

    #[test]
    fn duplicate_primes_rejected() {
        let q = find_ntt_primes(24, 8, 2).unwrap();
        let err = RnsBasis::new(q.clone(), q[..1].to_vec(), Vec::new());
        assert!(err.is_err());
    }

    #[test]
    fn bconv_error_characterization_many_sizes() {
        // 100 random polynomials at N in {8, 64}; error is an integer
        // multiple of the source product with |multiplier| <= |A|.
        for &n in &[8usize, 64] {
            let src = find_ntt_primes(20, n, 4).unwrap();
            let dst = find_ntt_primes(45, n, 3).unwrap();
            let src_prod = product(&src);
            let bound = BigInt::from(src.len() as i64);
            let mut next = rng_stream(41 + n as u64);
            for _ in 0..50 {
                let x = random_rns(&src, &mut next);
                let out = bconv(&x, &dst).unwrap();
                let exact = crt_reconstruct(&x);
                let got = crt_reconstruct(&out);
                for (v, w) in exact.iter().zip(&got) {
                    let err = w - v;
                    assert!((&err % &src_prod).is_zero());
                    assert!((err / &src_prod).abs() <= bound);
                }
            }
        }
    }

    #[test]
    fn decompose_then_reconstruct_small_values() {
        let ctxs = find_ntt_primes(22, 8, 2).unwrap();
        let vals: Vec<BigInt> = vec![
            BigInt::zero(),
            BigInt::one(),
            BigInt::from(-1),
            BigInt::from(123456),
            BigInt::from(-987654),
            BigInt::from(42),
            BigInt::from(-42),
            BigInt::from(7),
        ];
        let poly = decompose(&vals, &ctxs, 0, Domain::Coefficient);
        assert_eq!(crt_reconstruct(&poly), vals);
    }
}
