//! Closed-form ModMul accounting for both key-switch methods, parameter
//! selection, and the per-level alpha schedule.
//!
//! Unit costs (per prime limb of degree-N polynomials):
//!
//! * NTT / INTT: `(N/2)·log2 N` butterfly ModMuls + `N` twist ModMuls.
//! * BConv from `a` to `b` limbs: `a·N` scaling ModMuls + `a·b·N` MACs.
//! * Inner product of one limb pair: `N` ModMuls.
//! * ModDown: one BConv (`K -> l+1`) plus `(l+1)·N` per-limb corrections.
//!
//! Structural accounting (both methods count `j in {0,1}` output components
//! and one input INTT over the live limbs, since the key-switch input
//! arrives in evaluation domain):
//!
//! * Hybrid: each digit is extended onto all `l+1+K` limbs (BConv to the
//!   complement, NTT over the extension), the IP runs over `l+1+K` limbs,
//!   recovery is an INTT over `l+1+K` limbs, then ModDown.
//! * KLSS: each digit goes to `alpha'` limbs (BConv + NTT), the IP runs over
//!   `alpha'` limbs per `(j, m, n)` triple, each of the `beta_tilde`
//!   recovery groups is an INTT plus a BConv onto its `alpha'`-wide output
//!   chunk, then ModDown.
//!
//! Unless overridden, `alpha' = ceil(alpha/2)`; at the evaluation instance
//! (`N = 2^16`, `dnum = 6`, so `alpha = 7`) this gives `alpha' = 4`. At that
//! instance the key-buffer formula `2·beta·beta_tilde·alpha'` polynomials at
//! 36-bit words comes to 188,743,680 bytes — 188.7 decimal MB, the buffer
//! size quoted for this configuration.

use alloc::vec::Vec;
use core::fmt;

pub const L_BOOT: usize = 21;
pub const FFT_ITER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostError {
    /// `L <= L_boot`: no level budget left after bootstrapping.
    InsufficientDepth,
    /// An op sequence ran out of levels without a bootstrap marker.
    LevelUnderflow,
    BadParams,
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::InsufficientDepth => write!(f, "maximum level does not exceed L_boot"),
            CostError::LevelUnderflow => {
                write!(f, "op sequence exhausts levels without a bootstrap")
            }
            CostError::BadParams => write!(f, "unsupported cost-model parameters"),
        }
    }
}

impl core::error::Error for CostError {}

/// One row of the embedded security table: `(log2 N, h, log PQ, lambda,
/// L_target)` for 128-bit security.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub log2_n: u32,
    pub hamming_weight: u32,
    pub log_pq: u32,
    pub lambda: f64,
    pub l_target: usize,
}

pub const TABLE1: [Table1Row; 4] = [
    Table1Row {
        log2_n: 15,
        hamming_weight: 512,
        log_pq: 782,
        lambda: 134.4,
        l_target: 22,
    },
    Table1Row {
        log2_n: 16,
        hamming_weight: 512,
        log_pq: 1656,
        lambda: 133.0,
        l_target: 45,
    },
    Table1Row {
        log2_n: 17,
        hamming_weight: 512,
        log_pq: 3276,
        lambda: 134.5,
        l_target: 91,
    },
    Table1Row {
        log2_n: 18,
        hamming_weight: 512,
        log_pq: 6804,
        lambda: 128.3,
        l_target: 189,
    },
];

pub fn table1_row(log2_n: u32) -> Option<&'static Table1Row> {
    TABLE1.iter().find(|r| r.log2_n == log2_n)
}

/// `L = floor((dnum * L_target - 1) / (dnum + 1))`: the maximum level a
/// given digit count leaves under the `log PQ` budget.
pub fn max_level_for_dnum(dnum: usize, l_target: usize) -> usize {
    (dnum * l_target - 1) / (dnum + 1)
}

/// Cost-model parameters for one CKKS instance.
#[derive(Debug, Clone)]
pub struct CostParams {
    pub log2_n: u32,
    pub n: u64,
    pub word_bits: u32,
    pub dnum: usize,
    pub l_target: usize,
    pub max_level: usize,
    /// Limbs per digit (`ceil((L+1)/dnum)`), also the provisioned special
    /// limb count K.
    pub alpha: usize,
    /// Explicit alpha'; when absent the `ceil(alpha/2)` policy applies.
    pub alpha_prime_override: Option<usize>,
    pub hamming_weight: usize,
}

impl CostParams {
    pub fn new(
        log2_n: u32,
        word_bits: u32,
        dnum: usize,
        alpha_prime: Option<usize>,
        l_target_override: Option<usize>,
        hamming_weight: usize,
    ) -> Result<Self, CostError> {
        if dnum == 0 {
            return Err(CostError::BadParams);
        }
        let l_target = match l_target_override {
            Some(v) => v,
            None => table1_row(log2_n).ok_or(CostError::BadParams)?.l_target,
        };
        if l_target == 0 {
            return Err(CostError::BadParams);
        }
        let max_level = max_level_for_dnum(dnum, l_target);
        let alpha = (max_level + 1).div_ceil(dnum);
        Ok(CostParams {
            log2_n,
            n: 1u64 << log2_n,
            word_bits,
            dnum,
            l_target,
            max_level,
            alpha,
            alpha_prime_override: alpha_prime,
            hamming_weight,
        })
    }

    /// The paper-scale evaluation instance: `N = 2^16`, `dnum = 6`, 36-bit
    /// words, `alpha' = 4`, giving `L = 38`.
    pub fn evaluation_instance() -> Self {
        CostParams::new(16, 36, 6, Some(4), None, 512).unwrap()
    }

    /// `M = N log2 N`, the per-limb transform complexity unit.
    pub fn m(&self) -> u64 {
        self.n * self.log2_n as u64
    }

    pub fn alpha_prime_for(&self, alpha: usize) -> usize {
        self.alpha_prime_override
            .unwrap_or_else(|| alpha.div_ceil(2))
    }

    pub fn beta(&self, level: usize, alpha: usize) -> usize {
        (level + 1).div_ceil(alpha)
    }

    pub fn beta_tilde(&self, level: usize, alpha: usize) -> usize {
        (level + alpha + 1).div_ceil(self.alpha_prime_for(alpha))
    }

    /// One limb NTT: `(N/2)·log2 N + N` ModMuls.
    fn ntt_unit(&self) -> u64 {
        self.n / 2 * self.log2_n as u64 + self.n
    }

    /// BConv `a -> b` limbs: `a·N` scalings + `a·b·N` MACs.
    fn bconv_unit(&self, a: usize, b: usize) -> u64 {
        (a as u64) * self.n + (a as u64) * (b as u64) * self.n
    }

    fn digit_sizes(&self, level: usize, alpha: usize) -> Vec<usize> {
        let live = level + 1;
        (0..self.beta(level, alpha))
            .map(|n| alpha.min(live - n * alpha))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hybrid,
    Klss,
}

/// Per-kernel-class ModMul counts for one key switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub method: Method,
    pub level: usize,
    pub alpha: usize,
    pub alpha_prime: usize,
    pub dnum: usize,
    pub ntt: u64,
    pub intt: u64,
    pub bconv: u64,
    pub ip: u64,
    pub hadamard: u64,
    pub moddown: u64,
}

impl CostReport {
    pub fn total(&self) -> u64 {
        self.ntt + self.intt + self.bconv + self.ip + self.hadamard + self.moddown
    }
}

/// ModMul counts of one hybrid key switch at level `l`.
pub fn modmul_count_hybrid(p: &CostParams, level: usize) -> CostReport {
    let alpha = p.alpha;
    let live = (level + 1) as u64;
    let ext = live + alpha as u64;
    let u = p.ntt_unit();
    let mut r = CostReport {
        method: Method::Hybrid,
        level,
        alpha,
        alpha_prime: p.alpha_prime_for(alpha),
        dnum: p.dnum,
        ntt: 0,
        intt: live * u, // input INTT
        bconv: 0,
        ip: 0,
        hadamard: 0,
        moddown: 0,
    };
    for an in p.digit_sizes(level, alpha) {
        r.bconv += p.bconv_unit(an, ext as usize - an);
        r.ntt += ext * u;
    }
    let beta = p.beta(level, alpha) as u64;
    r.ip = 2 * beta * ext * p.n;
    r.intt += 2 * ext * u;
    r.moddown = 2 * (p.bconv_unit(alpha, live as usize) + live * p.n);
    r
}

/// ModMul counts of one KLSS key switch at level `l` with digit width
/// `alpha`.
pub fn modmul_count_klss(p: &CostParams, level: usize, alpha: usize) -> CostReport {
    let ap = p.alpha_prime_for(alpha);
    let live = (level + 1) as u64;
    let u = p.ntt_unit();
    let mut r = CostReport {
        method: Method::Klss,
        level,
        alpha,
        alpha_prime: ap,
        dnum: p.dnum,
        ntt: 0,
        intt: live * u, // input INTT
        bconv: 0,
        ip: 0,
        hadamard: 0,
        moddown: 0,
    };
    for an in p.digit_sizes(level, alpha) {
        r.bconv += p.bconv_unit(an, ap);
        r.ntt += ap as u64 * u;
    }
    let beta = p.beta(level, alpha) as u64;
    let bt = p.beta_tilde(level, alpha) as u64;
    r.ip = 2 * bt * beta * ap as u64 * p.n;
    r.intt += 2 * bt * ap as u64 * u;
    r.bconv += 2 * bt * p.bconv_unit(ap, ap);
    // ModDown is provisioned at K = alpha special limbs.
    r.moddown = 2 * (p.bconv_unit(alpha, live as usize) + live * p.n);
    r
}

/// Application-lifetime totals: one key switch at every level `0..=L`.
pub fn lifetime_total(p: &CostParams, method: Method) -> u64 {
    (0..=p.max_level)
        .map(|l| match method {
            Method::Hybrid => modmul_count_hybrid(p, l).total(),
            Method::Klss => modmul_count_klss(p, l, p.alpha).total(),
        })
        .sum()
}

/// One Table-3 style cell: `(klss/hybrid ratio, reduction percent)` of the
/// lifetime totals at `(log2 N, dnum)`.
pub fn table3_cell(log2_n: u32, dnum: usize) -> Result<(f64, f64), CostError> {
    let p = CostParams::new(log2_n, 36, dnum, None, None, 512)?;
    let h = lifetime_total(&p, Method::Hybrid) as f64;
    let k = lifetime_total(&p, Method::Klss) as f64;
    Ok((k / h, 100.0 * (1.0 - k / h)))
}

/// E-Key buffer byte count for explicit factors:
/// `2·beta·beta_tilde·alpha'` polynomials of `N` words,
/// `ceil(word_bits/8)` bytes each.
pub fn ekey_bytes(beta: usize, beta_tilde: usize, alpha_prime: usize, n: u64, word_bits: u32) -> u128 {
    2 * beta as u128 * beta_tilde as u128 * alpha_prime as u128 * n as u128
        * word_bits.div_ceil(8) as u128
}

/// E-Key buffer requirement of one instance at level `l`.
pub fn ekey_memory_requirement(p: &CostParams, level: usize) -> u128 {
    ekey_bytes(
        p.beta(level, p.alpha),
        p.beta_tilde(level, p.alpha),
        p.alpha_prime_for(p.alpha),
        p.n,
        p.word_bits,
    )
}

// ---------------------------------------------------------------------------
// Amortized multiplication time per slot
// ---------------------------------------------------------------------------

/// Supplies bootstrap and per-level HMULT latencies in nanoseconds.
pub trait TimingSource {
    fn t_boot_ns(&self) -> f64;
    fn t_mult_ns(&self, level: usize) -> f64;
}

/// ModMuls of one HMULT at level `l`: tensor (4 live-limb products) + KLSS
/// key switch + rescale.
pub fn hmult_modmuls(p: &CostParams, level: usize) -> u64 {
    let live = (level + 1) as u64;
    4 * live * p.n + modmul_count_klss(p, level, p.alpha).total() + live * p.n
}

/// ModMuls of one PtMatVecMult stage at level `l`: KLSS key switch plus one
/// extra accumulation IP (the two automorphisms cost no multiplications).
pub fn ptmatvec_modmuls(p: &CostParams, level: usize) -> u64 {
    let beta = p.beta(level, p.alpha) as u64;
    let bt = p.beta_tilde(level, p.alpha) as u64;
    let ap = p.alpha_prime_for(p.alpha) as u64;
    modmul_count_klss(p, level, p.alpha).total() + 2 * bt * beta * ap * p.n
}

/// Bootstrap ModMuls: `fftIter` CtS stages, 9 EvalMod HMULTs, `fftIter` StC
/// stages, consuming levels `L, L-1, ..., L-20`.
pub fn bootstrap_modmuls(p: &CostParams) -> Result<u64, CostError> {
    if p.max_level <= L_BOOT {
        return Err(CostError::InsufficientDepth);
    }
    let top = p.max_level;
    let mut total = 0u64;
    for k in 0..FFT_ITER {
        total += ptmatvec_modmuls(p, top - k);
    }
    for k in FFT_ITER..FFT_ITER + 9 {
        total += hmult_modmuls(p, top - k);
    }
    for k in FFT_ITER + 9..L_BOOT {
        total += ptmatvec_modmuls(p, top - k);
    }
    Ok(total)
}

/// Cost-proportional synthetic timing: latency = ModMuls × ns_per_modmul.
pub struct CostProportionalTiming<'a> {
    pub params: &'a CostParams,
    pub ns_per_modmul: f64,
}

impl TimingSource for CostProportionalTiming<'_> {
    fn t_boot_ns(&self) -> f64 {
        bootstrap_modmuls(self.params).unwrap_or(u64::MAX) as f64 * self.ns_per_modmul
    }

    fn t_mult_ns(&self, level: usize) -> f64 {
        hmult_modmuls(self.params, level) as f64 * self.ns_per_modmul
    }
}

/// `T_mult,a/slot = (T_boot + Σ_{l=1..L-L_boot} T_mult(l)) / (L - L_boot) · 2/N`.
pub fn t_mult_per_slot(timing: &dyn TimingSource, p: &CostParams) -> Result<f64, CostError> {
    if p.max_level <= L_BOOT {
        return Err(CostError::InsufficientDepth);
    }
    let usable = p.max_level - L_BOOT;
    let sum: f64 = (1..=usable).map(|l| timing.t_mult_ns(l)).sum();
    Ok((timing.t_boot_ns() + sum) / usable as f64 * 2.0 / p.n as f64)
}

/// Normalized-d sweep over dnum. `dnum_max` is the smallest dnum whose
/// alpha saturates at 1 (past it the decomposition is trivial and the
/// metric is flat), and `dnum(d) = 1 + round(d·(dnum_max - 1))` over
/// `d in {0, 0.2, 0.4, 0.6, 0.8, 1}`.
pub fn dnum_sweep_normalized(
    log2_n: u32,
    word_bits: u32,
    ns_per_modmul: f64,
) -> Result<Vec<(f64, usize, f64)>, CostError> {
    let l_target = table1_row(log2_n).ok_or(CostError::BadParams)?.l_target;
    let mut dnum_max = 1usize;
    for dnum in 1..=(2 * l_target) {
        dnum_max = dnum;
        let level = max_level_for_dnum(dnum, l_target);
        if (level + 1).div_ceil(dnum) == 1 {
            break;
        }
    }
    let mut out = Vec::new();
    for step in 0..=5 {
        let d = step as f64 / 5.0;
        let dnum = 1 + libm::round(d * (dnum_max as f64 - 1.0)) as usize;
        let p = CostParams::new(log2_n, word_bits, dnum, None, None, 512)?;
        let timing = CostProportionalTiming {
            params: &p,
            ns_per_modmul,
        };
        let metric = t_mult_per_slot(&timing, &p)?;
        out.push((d, dnum, metric));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Alpha schedule
// ---------------------------------------------------------------------------

/// Per-level alpha choice with the scanned cost table as provenance.
#[derive(Debug, Clone)]
pub struct AlphaChoice {
    pub level: usize,
    pub alpha: usize,
    pub modmuls: u64,
    /// Every admissible `(alpha, total)` pair examined at this level.
    pub scanned: Vec<(usize, u64)>,
}

#[derive(Debug, Clone)]
pub struct AlphaSchedule {
    pub entries: Vec<AlphaChoice>,
}

impl AlphaSchedule {
    pub fn alpha_at(&self, level: usize) -> usize {
        self.entries[level].alpha
    }

    pub fn is_constant(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].alpha == w[1].alpha)
    }
}

/// `alpha(l) = argmin` of the KLSS ModMul total over admissible
/// `1 <= alpha <= min(l+1, K_max)`; ties break toward the smaller alpha.
pub fn select_alpha_per_level(p: &CostParams) -> AlphaSchedule {
    let k_max = p.alpha;
    let entries = (0..=p.max_level)
        .map(|level| {
            let scanned: Vec<(usize, u64)> = (1..=k_max.min(level + 1))
                .map(|a| (a, modmul_count_klss(p, level, a).total()))
                .collect();
            let &(alpha, modmuls) = scanned
                .iter()
                .min_by_key(|&&(a, total)| (total, a))
                .expect("admissible alpha set is never empty");
            AlphaChoice {
                level,
                alpha,
                modmuls,
                scanned,
            }
        })
        .collect();
    AlphaSchedule { entries }
}

// ---------------------------------------------------------------------------
// Application compilation
// ---------------------------------------------------------------------------

/// HE-level operations with implicit level consumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeOp {
    HMult,
    CMult,
    Rotate { bsgs: bool },
    /// `count` mutually independent rotations (a BSGS batch).
    RotateBatch { count: usize, bsgs: bool },
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    KeySwitch {
        method: Method,
        alpha: usize,
        bsgs: bool,
    },
    Tensor,
    Rescale,
    Automorph,
    /// PtMatVecMult accumulation IP (bootstrap linear-transform stages).
    PtIp { alpha: usize },
    ModDown,
}

/// One step of a linear kernel plan. Steps sharing a `group` id are
/// mutually independent; groups execute in sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub kind: PlanKind,
    pub level: usize,
    pub group: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KernelPlan {
    pub steps: Vec<PlanStep>,
    pub groups: usize,
}

/// Lowers an HE-op sequence to a kernel plan, annotating every key switch
/// with the schedule's alpha at its level. HMULT/CMULT decrement the level;
/// a bootstrap marker expands to its stage pattern and resets the level to
/// `L - L_boot`.
pub fn compile_app(
    ops: &[HeOp],
    p: &CostParams,
    schedule: &AlphaSchedule,
) -> Result<KernelPlan, CostError> {
    let mut plan = KernelPlan::default();
    let mut level = p.max_level;
    let mut group = 0usize;
    fn push(plan: &mut KernelPlan, kind: PlanKind, level: usize, group: usize) {
        plan.steps.push(PlanStep { kind, level, group });
    }
    for op in ops {
        match *op {
            HeOp::HMult => {
                if level == 0 {
                    return Err(CostError::LevelUnderflow);
                }
                let alpha = schedule.alpha_at(level);
                push(&mut plan, PlanKind::Tensor, level, group);
                push(
                    &mut plan,
                    PlanKind::KeySwitch {
                        method: Method::Klss,
                        alpha,
                        bsgs: false,
                    },
                    level,
                    group,
                );
                push(&mut plan, PlanKind::Rescale, level, group);
                group += 1;
                level -= 1;
            }
            HeOp::CMult => {
                if level == 0 {
                    return Err(CostError::LevelUnderflow);
                }
                push(&mut plan, PlanKind::Tensor, level, group);
                push(&mut plan, PlanKind::Rescale, level, group);
                group += 1;
                level -= 1;
            }
            HeOp::Rotate { bsgs } => {
                let alpha = schedule.alpha_at(level);
                push(&mut plan, PlanKind::Automorph, level, group);
                push(
                    &mut plan,
                    PlanKind::KeySwitch {
                        method: Method::Klss,
                        alpha,
                        bsgs,
                    },
                    level,
                    group,
                );
                group += 1;
            }
            HeOp::RotateBatch { count, bsgs } => {
                let alpha = schedule.alpha_at(level);
                for _ in 0..count {
                    push(&mut plan, PlanKind::Automorph, level, group);
                    push(
                        &mut plan,
                        PlanKind::KeySwitch {
                            method: Method::Klss,
                            alpha,
                            bsgs,
                        },
                        level,
                        group,
                    );
                }
                group += 1;
            }
            HeOp::Bootstrap => {
                if p.max_level <= L_BOOT {
                    return Err(CostError::InsufficientDepth);
                }
                let top = p.max_level;
                for k in 0..L_BOOT {
                    let l = top - k;
                    let alpha = schedule.alpha_at(l);
                    if (FFT_ITER..FFT_ITER + 9).contains(&k) {
                        // EvalMod multiplication
                        push(&mut plan, PlanKind::Tensor, l, group);
                        push(
                            &mut plan,
                            PlanKind::KeySwitch {
                                method: Method::Klss,
                                alpha,
                                bsgs: false,
                            },
                            l,
                            group,
                        );
                        push(&mut plan, PlanKind::Rescale, l, group);
                    } else {
                        // CtS / StC stage: two independent BSGS rotations,
                        // then the accumulation IP and a ModDown.
                        for _ in 0..2 {
                            push(&mut plan, PlanKind::Automorph, l, group);
                            push(
                                &mut plan,
                                PlanKind::KeySwitch {
                                    method: Method::Klss,
                                    alpha,
                                    bsgs: true,
                                },
                                l,
                                group,
                            );
                        }
                        group += 1;
                        push(&mut plan, PlanKind::PtIp { alpha }, l, group);
                        push(&mut plan, PlanKind::ModDown, l, group);
                    }
                    group += 1;
                }
                level = top - L_BOOT;
            }
        }
    }
    plan.groups = group;
    Ok(plan)
}

/// Kernel-node multiset of one key switch, for cross-checking the simulator
/// against the functional module's trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelCounts {
    pub bconv: usize,
    pub ntt: usize,
    pub ip: usize,
    pub intt: usize,
    pub moddown: usize,
}

pub fn kernel_multiset(p: &CostParams, method: Method, level: usize, alpha: usize) -> KernelCounts {
    let beta = p.beta(level, alpha);
    match method {
        Method::Hybrid => KernelCounts {
            bconv: beta,
            ntt: beta,
            ip: 2 * beta,
            intt: 2,
            moddown: 1,
        },
        Method::Klss => {
            let bt = p.beta_tilde(level, alpha);
            KernelCounts {
                bconv: beta + bt,
                ntt: beta,
                ip: 2 * bt * beta,
                intt: bt,
                moddown: 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq1_values() {
        assert_eq!(max_level_for_dnum(6, 45), 38);
        assert_eq!(max_level_for_dnum(1, 1), 0);
        assert_eq!(max_level_for_dnum(2, 45), 29);
    }

    #[test]
    fn table1_rows_consistent() {
        // Every embedded row reaches 128-bit security, and the dnum sweep
        // round-trips: L(dnum) + K stays within the L_target budget.
        for row in &TABLE1 {
            assert!(row.lambda >= 128.0);
            for dnum in 1..=row.l_target {
                let level = max_level_for_dnum(dnum, row.l_target);
                let k = (level + 1).div_ceil(dnum);
                assert!(
                    level + k <= row.l_target + 1,
                    "dnum={dnum} log2N={}",
                    row.log2_n
                );
                assert!(level < row.l_target);
            }
        }
    }

    #[test]
    fn table3_signs_and_tolerances() {
        let reductions = [
            (3usize, [9.9f64, 5.7, 6.4]),
            (4, [23.8, 20.6, 17.3]),
            (5, [34.1, 32.3, 29.9]),
        ];
        for (col, log2_n) in [(0usize, 16u32), (1, 17), (2, 18)] {
            // KLSS is worse at dnum = 2.
            let (ratio, _) = table3_cell(log2_n, 2).unwrap();
            assert!(ratio > 1.0, "dnum=2 N=2^{log2_n}: ratio {ratio}");
            for &(dnum, targets) in &reductions {
                let (ratio, red) = table3_cell(log2_n, dnum).unwrap();
                assert!(ratio < 1.0, "dnum={dnum} N=2^{log2_n} must favor KLSS");
                assert!(
                    (red - targets[col]).abs() <= 3.0,
                    "dnum={dnum} N=2^{log2_n}: {red:.2}% vs {}±3",
                    targets[col]
                );
            }
        }
    }

    #[test]
    fn table3_dnum2_ratios_near_reported() {
        for (log2_n, target) in [(16u32, 1.06f64), (17, 1.12), (18, 1.17)] {
            let (ratio, _) = table3_cell(log2_n, 2).unwrap();
            assert!((ratio - target).abs() <= 0.05, "N=2^{log2_n}: got {ratio}");
        }
    }

    #[test]
    fn report_total_is_sum_of_parts() {
        let p = CostParams::evaluation_instance();
        for l in [0usize, 7, 20, 38] {
            for r in [modmul_count_hybrid(&p, l), modmul_count_klss(&p, l, p.alpha)] {
                assert_eq!(
                    r.total(),
                    r.ntt + r.intt + r.bconv + r.ip + r.hadamard + r.moddown
                );
            }
        }
    }

    #[test]
    fn hybrid_decomposition_closed_form_tiny_params() {
        // alpha = 1: at l = 0 the single digit is one BConv of 1 limb onto
        // 1 complement limb plus an NTT over both ext limbs.
        let p = CostParams::new(15, 36, 22, None, None, 512).unwrap();
        assert_eq!(p.alpha, 1);
        let r = modmul_count_hybrid(&p, 0);
        let u = p.n / 2 * 15 + p.n;
        assert_eq!(r.ntt, 2 * u);
        assert_eq!(r.bconv, p.n + p.n); // 1 scaling + 1x1 MAC
        assert_eq!(r.ip, 2 * 2 * p.n);
        // Strictly positive and dominated by the single-limb transforms.
        assert!(r.total() > 0);
        assert!(r.ntt + r.intt > r.total() / 2);
    }

    #[test]
    fn klss_single_group_collapse() {
        // alpha = l + 1 makes beta = 1: one decomposition group.
        let p = CostParams::evaluation_instance();
        let l = 5;
        assert_eq!(p.beta(l, l + 1), 1);
        let r = modmul_count_klss(&p, l, l + 1);
        let ap = p.alpha_prime_for(l + 1) as u64;
        let u = p.n / 2 * 16 + p.n;
        assert_eq!(r.ntt, ap * u);
    }

    #[test]
    fn cost_monotone_in_level() {
        let p = CostParams::evaluation_instance();
        let mut prev_h = 0;
        let mut prev_k = 0;
        for l in 0..=p.max_level {
            let h = modmul_count_hybrid(&p, l).total();
            let k = modmul_count_klss(&p, l, p.alpha).total();
            assert!(h >= prev_h && k >= prev_k, "level {l}");
            prev_h = h;
            prev_k = k;
        }
    }

    #[test]
    fn ntt_share_shifts_to_ip_under_klss() {
        let p = CostParams::evaluation_instance();
        let h = modmul_count_hybrid(&p, p.max_level);
        let k = modmul_count_klss(&p, p.max_level, p.alpha);
        let h_ntt = (h.ntt + h.intt) as f64 / h.total() as f64;
        let k_ntt = (k.ntt + k.intt) as f64 / k.total() as f64;
        let h_ip = h.ip as f64 / h.total() as f64;
        let k_ip = k.ip as f64 / k.total() as f64;
        assert!(k_ntt < h_ntt, "NTT share must fall: {k_ntt} vs {h_ntt}");
        assert!(k_ip > h_ip, "IP share must rise: {k_ip} vs {h_ip}");
    }

    #[test]
    fn ekey_memory_unit_case_and_instance() {
        // beta = beta~ = alpha' = 1, N = 8, 28-bit words -> 2 * 8 * 4 bytes.
        assert_eq!(ekey_bytes(1, 1, 1, 8, 28), 2 * 8 * 4);

        // Evaluation instance at top level: beta = 6, beta~ = 12, alpha' = 4
        // at 36-bit words -> 188,743,680 bytes (188.7 decimal MB).
        let p = CostParams::evaluation_instance();
        assert_eq!(p.max_level, 38);
        assert_eq!(p.alpha, 7);
        assert_eq!(ekey_memory_requirement(&p, p.max_level), 188_743_680);
    }

    #[test]
    fn ekey_memory_alpha_prime_rescan() {
        // Doubling alpha' shrinks beta~; the combined effect must match a
        // re-evaluation of the formula.
        let mut p = CostParams::evaluation_instance();
        let base = ekey_memory_requirement(&p, p.max_level);
        p.alpha_prime_override = Some(8);
        let doubled = ekey_memory_requirement(&p, p.max_level);
        let bt_4 = (38usize + 7 + 1).div_ceil(4) as u128;
        let bt_8 = (38usize + 7 + 1).div_ceil(8) as u128;
        assert_eq!(base / bt_4, 2 * 6 * 4 * p.n as u128 * 5);
        assert_eq!(doubled / bt_8, 2 * 6 * 8 * p.n as u128 * 5);
    }

    #[test]
    fn t_mult_single_level_closed_form() {
        struct Fixed;
        impl TimingSource for Fixed {
            fn t_boot_ns(&self) -> f64 {
                1000.0
            }
            fn t_mult_ns(&self, _level: usize) -> f64 {
                10.0
            }
        }
        // L = L_boot + 1 = 22: exactly one usable level (dnum = 1 at the
        // N = 2^16 target).
        let p = CostParams::new(16, 36, 1, None, None, 512).unwrap();
        assert_eq!(p.max_level, L_BOOT + 1);
        let got = t_mult_per_slot(&Fixed, &p).unwrap();
        let expect = (1000.0 + 10.0) * 2.0 / p.n as f64;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn t_mult_insufficient_depth() {
        let p = CostParams::new(15, 36, 1, None, None, 512).unwrap(); // L = 10
        let t = CostProportionalTiming {
            params: &p,
            ns_per_modmul: 1.0,
        };
        assert_eq!(
            t_mult_per_slot(&t, &p).unwrap_err(),
            CostError::InsufficientDepth
        );
    }

    #[test]
    fn dnum_sweep_minimum_at_second_smallest_d() {
        let sweep = dnum_sweep_normalized(16, 36, 1.0).unwrap();
        assert_eq!(sweep.len(), 6);
        let min_idx = sweep
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .2.partial_cmp(&b.1 .2).unwrap())
            .unwrap()
            .0;
        assert_eq!(min_idx, 1, "sweep: {sweep:?}");
    }

    #[test]
    fn alpha_schedule_argmin_and_nonconstant() {
        let p = CostParams::evaluation_instance();
        let schedule = select_alpha_per_level(&p);
        assert_eq!(schedule.entries.len(), p.max_level + 1);
        assert!(!schedule.is_constant(), "the L=38 instance must change alpha");
        // Exhaustive re-scan confirms the argmin at every level.
        for e in &schedule.entries {
            for &(a, total) in &e.scanned {
                assert!(
                    e.modmuls < total || (e.modmuls == total && e.alpha <= a),
                    "level {}: alpha {} not optimal vs {}",
                    e.level,
                    e.alpha,
                    a
                );
            }
            assert_eq!(modmul_count_klss(&p, e.level, e.alpha).total(), e.modmuls);
        }
    }

    #[test]
    fn alpha_schedule_degenerate_constant() {
        // Tiny instance where a single alpha dominates everywhere.
        let p = CostParams::new(16, 36, 1, None, Some(2), 512).unwrap();
        assert_eq!(p.max_level, 0);
        let schedule = select_alpha_per_level(&p);
        assert!(schedule.is_constant());
    }

    #[test]
    fn compile_app_empty_and_underflow() {
        let p = CostParams::evaluation_instance();
        let schedule = select_alpha_per_level(&p);
        let plan = compile_app(&[], &p, &schedule).unwrap();
        assert!(plan.steps.is_empty());

        let too_deep = vec![HeOp::HMult; p.max_level + 1];
        assert_eq!(
            compile_app(&too_deep, &p, &schedule).unwrap_err(),
            CostError::LevelUnderflow
        );
    }

    #[test]
    fn compile_app_alpha_annotations_follow_schedule() {
        let p = CostParams::evaluation_instance();
        let schedule = select_alpha_per_level(&p);
        let count = p.max_level - L_BOOT;
        let ops = vec![HeOp::HMult; count];
        let plan = compile_app(&ops, &p, &schedule).unwrap();
        let mut expected_level = p.max_level;
        for step in &plan.steps {
            if let PlanKind::KeySwitch { alpha, .. } = step.kind {
                assert_eq!(step.level, expected_level);
                assert_eq!(alpha, schedule.alpha_at(expected_level));
                expected_level -= 1;
            }
        }
        assert_eq!(expected_level, p.max_level - count);
    }

    #[test]
    fn compile_app_bootstrap_resets_level() {
        let p = CostParams::evaluation_instance();
        let schedule = select_alpha_per_level(&p);
        let ops = [HeOp::HMult, HeOp::Bootstrap, HeOp::HMult];
        let plan = compile_app(&ops, &p, &schedule).unwrap();
        let last_ksw = plan
            .steps
            .iter()
            .rev()
            .find(|s| matches!(s.kind, PlanKind::KeySwitch { .. }))
            .unwrap();
        assert_eq!(last_ksw.level, p.max_level - L_BOOT);
    }

    #[test]
    fn kernel_multiset_formulas() {
        let p = CostParams::evaluation_instance();
        let l = 20;
        let k = kernel_multiset(&p, Method::Klss, l, p.alpha);
        let beta = p.beta(l, p.alpha);
        let bt = p.beta_tilde(l, p.alpha);
        assert_eq!(k.ntt, beta);
        assert_eq!(k.ip, 2 * bt * beta);
        assert_eq!(k.intt, bt);
        assert_eq!(k.moddown, 1);
        let h = kernel_multiset(&p, Method::Hybrid, l, p.alpha);
        assert_eq!(h.ip, 2 * beta);
        assert_eq!(h.intt, 2);
    }
}
