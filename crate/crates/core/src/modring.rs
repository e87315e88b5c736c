//! Word-sized prime-field arithmetic and NTT-friendly prime generation.
//!
//! Every prime handled here satisfies `q ≡ 1 (mod 2N)` for a power-of-two
//! ring degree `N`, so a primitive `2N`-th root of unity exists and the
//! negacyclic transforms in [`crate::ntt`] are well defined.
//!
//! Reduction scheme: general products go through a 128-bit widening multiply
//! followed by a remainder; butterfly twiddles additionally carry a Shoup
//! companion word (`⌊w·2^64/q⌋`) so the hot NTT loops avoid the 128-bit
//! division. Both produce canonical representatives in `[0, q)`.

use alloc::vec::Vec;
use core::fmt;

/// Errors surfaced by prime generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModRingError {
    /// The scan range `[2^(bit_width-1), 2^bit_width)` holds no usable prime.
    NoPrimeFound { bit_width: u32, n: usize },
    /// Arguments outside the supported envelope (bit width or degree).
    BadArguments,
}

impl fmt::Display for ModRingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModRingError::NoPrimeFound { bit_width, n } => write!(
                f,
                "no {bit_width}-bit prime q with q = 1 mod {} exists",
                2 * n
            ),
            ModRingError::BadArguments => write!(f, "unsupported bit width or ring degree"),
        }
    }
}

impl core::error::Error for ModRingError {}

/// Precomputed context for one word-sized NTT-friendly prime.
///
/// Immutable after construction; all operations are pure, so contexts can be
/// shared freely across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeContext {
    /// Prime modulus, `q ≡ 1 (mod 2n)`.
    pub q: u64,
    /// Ring degree `N` (power of two).
    pub n: usize,
    /// `log2(N)`.
    pub log2_n: u32,
    /// Primitive `2N`-th root of unity mod `q`.
    pub psi: u64,
    /// `psi^(-1) mod q`.
    pub psi_inv: u64,
    /// `N^(-1) mod q`.
    pub n_inv: u64,
}

impl PrimeContext {
    /// Builds a context for a known prime `q` with `q ≡ 1 (mod 2n)`.
    ///
    /// `n` must be a power of two. Primality is checked (Miller–Rabin,
    /// deterministic for u64).
    pub fn new(q: u64, n: usize) -> Result<Self, ModRingError> {
        if !n.is_power_of_two() || n < 2 || q < 5 {
            return Err(ModRingError::BadArguments);
        }
        let two_n = 2 * n as u64;
        if (q - 1) % two_n != 0 || !is_prime_u64(q) {
            return Err(ModRingError::BadArguments);
        }
        let psi = primitive_root_2n(q, n);
        let psi_inv = inv_mod(psi, q);
        let n_inv = inv_mod(n as u64, q);
        let ctx = PrimeContext {
            q,
            n,
            log2_n: n.trailing_zeros(),
            psi,
            psi_inv,
            n_inv,
        };
        debug_assert!(ctx.check_invariants());
        Ok(ctx)
    }

    /// Verifies the root-of-unity invariants; used by tests and debug builds.
    pub fn check_invariants(&self) -> bool {
        let two_n = 2 * self.n as u64;
        (self.q - 1) % two_n == 0
            && pow_mod(self.psi, two_n, self.q) == 1
            && pow_mod(self.psi, self.n as u64, self.q) == self.q - 1
            && mod_mul(self.psi, self.psi_inv, self.q) == 1
            && mod_mul(self.n as u64 % self.q, self.n_inv, self.q) == 1
    }

    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mod_mul_ctx(a, b, self)
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.q && b < self.q);
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline(always)]
    pub fn neg(&self, a: u64) -> u64 {
        debug_assert!(a < self.q);
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    pub fn pow(&self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.q)
    }

    pub fn inv(&self, a: u64) -> u64 {
        inv_mod(a, self.q)
    }

    /// Reduces a signed integer into `[0, q)`.
    pub fn reduce_i64(&self, v: i64) -> u64 {
        let q = self.q as i64;
        let r = v % q;
        if r < 0 {
            (r + q) as u64
        } else {
            r as u64
        }
    }

    /// Centered representative in `(-q/2, q/2]`.
    pub fn center(&self, a: u64) -> i64 {
        debug_assert!(a < self.q);
        if a > self.q / 2 {
            a as i64 - self.q as i64
        } else {
            a as i64
        }
    }
}

/// `(a * b) mod q` with canonical output. Preconditions (`a, b < q`) are
/// programming errors and only checked in debug builds.
#[inline(always)]
pub fn mod_mul(a: u64, b: u64, q: u64) -> u64 {
    debug_assert!(a < q && b < q);
    ((a as u128 * b as u128) % q as u128) as u64
}

/// Context-flavored spelling of [`mod_mul`].
#[inline(always)]
pub fn mod_mul_ctx(a: u64, b: u64, ctx: &PrimeContext) -> u64 {
    mod_mul(a, b, ctx.q)
}

/// Shoup companion word for a fixed multiplicand: `⌊w · 2^64 / q⌋`.
#[inline(always)]
pub fn shoup_precompute(w: u64, q: u64) -> u64 {
    (((w as u128) << 64) / q as u128) as u64
}

/// `(a * w) mod q` where `w_shoup = shoup_precompute(w, q)`. Requires
/// `q < 2^63`.
#[inline(always)]
pub fn mul_shoup(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    let r = (a.wrapping_mul(w)).wrapping_sub(hi.wrapping_mul(q));
    if r >= q {
        r - q
    } else {
        r
    }
}

pub fn pow_mod(base: u64, mut exp: u64, q: u64) -> u64 {
    let mut b = base % q;
    let mut acc: u64 = 1 % q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mod_mul(acc, b, q);
        }
        b = mod_mul(b, b, q);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse via Fermat; `a` must be nonzero mod the prime `q`.
pub fn inv_mod(a: u64, q: u64) -> u64 {
    debug_assert!(a % q != 0);
    pow_mod(a, q - 2, q)
}

/// Deterministic Miller–Rabin for u64 (the standard 12-witness set).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mod_mul(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Finds the `index`-th NTT-friendly prime (descending from `2^bit_width - 1`)
/// with `q ≡ 1 (mod 2n)` and builds its context.
///
/// Deterministic for a given `(bit_width, n, index)` triple, which is what
/// makes RNS test fixtures reproducible.
pub fn find_ntt_prime(bit_width: u32, n: usize, index: usize) -> Result<PrimeContext, ModRingError> {
    if bit_width < 4 || bit_width > 62 || !n.is_power_of_two() || n < 2 {
        return Err(ModRingError::BadArguments);
    }
    let two_n = 2 * n as u64;
    let hi = (1u64 << bit_width) - 1;
    let lo = 1u64 << (bit_width - 1);
    if hi <= two_n {
        return Err(ModRingError::NoPrimeFound { bit_width, n });
    }
    // Largest candidate <= hi congruent to 1 mod 2n, then descending stride.
    let mut c = hi - (hi - 1) % two_n;
    let mut remaining = index;
    while c >= lo {
        if is_prime_u64(c) {
            if remaining == 0 {
                return PrimeContext::new(c, n);
            }
            remaining -= 1;
        }
        match c.checked_sub(two_n) {
            Some(next) => c = next,
            None => break,
        }
    }
    Err(ModRingError::NoPrimeFound { bit_width, n })
}

/// Convenience: the first `count` primes of the scan, as contexts.
pub fn find_ntt_primes(
    bit_width: u32,
    n: usize,
    count: usize,
) -> Result<Vec<PrimeContext>, ModRingError> {
    (0..count).map(|i| find_ntt_prime(bit_width, n, i)).collect()
}

/// Returns a primitive `2N`-th root of unity mod `q`.
///
/// Requires `q ≡ 1 (mod 2N)` with `N` a power of two; then an element of
/// order exactly `2N` is any `g^((q-1)/2N)` with `psi^N = -1`, and such a
/// `g` always exists because the group is cyclic.
pub fn primitive_root_2n(q: u64, n: usize) -> u64 {
    let two_n = 2 * n as u64;
    debug_assert_eq!((q - 1) % two_n, 0);
    let cofactor = (q - 1) / two_n;
    let mut g = 2u64;
    loop {
        let psi = pow_mod(g, cofactor, q);
        // For power-of-two N, psi^N = -1 forces order exactly 2N.
        if psi != 0 && pow_mod(psi, n as u64, q) == q - 1 {
            return psi;
        }
        g += 1;
        debug_assert!(g < q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Trial-division oracle, independent of Miller-Rabin.
    fn is_prime_slow(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2u64;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn mod_mul_identities() {
        let ctx = find_ntt_prime(28, 1024, 0).unwrap();
        let q = ctx.q;
        for x in [0u64, 1, 2, q / 2, q - 2, q - 1] {
            assert_eq!(mod_mul(0, x, q), 0);
            assert_eq!(mod_mul(1, x, q), x);
        }
        // (-1) * (-1) = 1
        assert_eq!(mod_mul(q - 1, q - 1, q), 1);
    }

    #[test]
    fn mod_mul_matches_wide_reference_and_is_canonical() {
        let mut state = 0x12345678_9abcdef0u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state
        };
        for &(bw, n) in &[(20u32, 8usize), (28, 1024), (36, 32), (50, 64), (62, 16)] {
            let ctx = find_ntt_prime(bw, n, 0).unwrap();
            let q = ctx.q;
            for _ in 0..2000 {
                let a = next() % q;
                let b = next() % q;
                let c = next() % q;
                let ab = mod_mul(a, b, q);
                assert!(ab < q);
                assert_eq!(ab as u128, (a as u128 * b as u128) % q as u128);
                // Associativity against the wide-integer reference.
                let left = mod_mul(a, mod_mul(b, c, q), q);
                let right = mod_mul(mod_mul(a, b, q), c, q);
                assert_eq!(left, right);
            }
        }
    }

    #[test]
    fn shoup_matches_plain_mul() {
        let ctx = find_ntt_prime(36, 64, 0).unwrap();
        let q = ctx.q;
        let mut state = 7u64;
        for _ in 0..500 {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let a = state % q;
            let w = state.rotate_left(17) % q;
            let ws = shoup_precompute(w, q);
            assert_eq!(mul_shoup(a, w, ws, q), mod_mul(a, w, q));
        }
    }

    #[test]
    fn find_prime_14_bit_n8() {
        // Oracle: exhaustive scan of 14-bit integers with trial division.
        let ctx = find_ntt_prime(14, 8, 0).unwrap();
        assert_eq!(ctx.q % 16, 1);
        assert!(ctx.q >= 1 << 13 && ctx.q < 1 << 14);
        assert!(is_prime_slow(ctx.q));
        let expected = (8192u64..16384)
            .rev()
            .find(|&c| c % 16 == 1 && is_prime_slow(c))
            .unwrap();
        assert_eq!(ctx.q, expected);
    }

    #[test]
    fn find_prime_exhausted_range() {
        // No 4-bit q = 1 mod 2048 exists.
        assert!(matches!(
            find_ntt_prime(4, 1024, 0),
            Err(ModRingError::NoPrimeFound { .. })
        ));
    }

    #[test]
    fn find_prime_36_bit_big_degree() {
        let ctx = find_ntt_prime(36, 65536, 0).unwrap();
        assert_eq!((ctx.q - 1) % 131072, 0);
        assert!(ctx.q >= 1 << 35 && ctx.q < 1 << 36);
        assert!(is_prime_u64(ctx.q));
        assert!(ctx.check_invariants());
    }

    #[test]
    fn find_prime_deterministic_and_distinct() {
        let a = find_ntt_prime(28, 1024, 0).unwrap();
        let b = find_ntt_prime(28, 1024, 0).unwrap();
        assert_eq!(a, b);
        let seq = find_ntt_primes(28, 1024, 6).unwrap();
        for w in seq.windows(2) {
            assert!(w[0].q > w[1].q, "descending scan");
        }
    }

    #[test]
    fn primitive_root_small_cases() {
        // q = 17, N = 4: exhaustive order check over Z_17*.
        let psi = primitive_root_2n(17, 4);
        let mut seen = 1u64;
        for e in 1..8 {
            seen = mod_mul(seen, psi, 17);
            if e < 8 {
                assert!(e == 7 || seen != 1, "order must be exactly 8");
            }
        }
        assert_eq!(pow_mod(psi, 8, 17), 1);
        assert_eq!(pow_mod(psi, 4, 17), 16);

        // q = 12289, N = 512 (q - 1 = 2^12 * 3).
        let psi = primitive_root_2n(12289, 512);
        assert_eq!(pow_mod(psi, 1024, 12289), 1);
        assert_eq!(pow_mod(psi, 512, 12289), 12288);
    }

    #[test]
    fn context_invariants_hold() {
        for &(bw, n) in &[(20u32, 16usize), (28, 512), (36, 2048)] {
            let ctx = find_ntt_prime(bw, n, 0).unwrap();
            assert!(ctx.check_invariants());
            assert_eq!(mod_mul(ctx.psi, ctx.psi_inv, ctx.q), 1);
            assert_eq!(pow_mod(ctx.psi, ctx.n as u64, ctx.q), ctx.q - 1);
        }
    }
}
