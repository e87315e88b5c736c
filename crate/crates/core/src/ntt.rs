//! Negacyclic NTT in three interchangeable dataflows.
//!
//! All variants compute the same transform
//! `X_k = Σ_n x_n · psi^{(2k+1)·n} (mod q)` with natural-order input and
//! output, and are bitwise interchangeable:
//!
//! * `Standard` — iterative radix-2 with the psi powers merged into the
//!   butterfly tree (natural order outside, bit-reversal hidden inside).
//! * `FourStep` — `N = N1·N2`: negacyclic `N1`-NTT down the columns, a
//!   twist by `psi^{(2k1+1)·n2}` (transpose + Hadamard), then a plain cyclic
//!   `N2`-DFT along the rows.
//! * `MultiStep` — both factors split again (`N1 = N11·N12`,
//!   `N2 = N21·N22`), giving the seven-stage dataflow: N11-NTT,
//!   N1 intra-transpose + twist, N12-NTT, transpose-with-buffer + Hadamard,
//!   N21-NTT, N2 intra-transpose + twist, N22-NTT.
//!
//! The multi-step N12/N21/N22 stages share one twiddle bank: at butterfly
//! depth `s` the twiddle for index `j` is `W_{2N2}^{(2N2/2^s)·j}`, so each
//! stage reads from the same table `[W_{2N2}^i]` and the table carried for
//! layer `s` is identical across layers. That is the fixed-twiddle property
//! the schedule exposes for structural tests: no stage ever regenerates
//! twiddles.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::modring::{mul_shoup, shoup_precompute, PrimeContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

/// External element ordering. Public values are always `Natural`; `Internal`
/// exists so intermediate bit-reversed buffers can be tagged when exposed for
/// instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementOrder {
    Natural,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyVector {
    pub coeffs: Vec<u64>,
    pub domain: Domain,
    pub order: ElementOrder,
}

impl PolyVector {
    pub fn coefficient(coeffs: Vec<u64>) -> Self {
        PolyVector {
            coeffs,
            domain: Domain::Coefficient,
            order: ElementOrder::Natural,
        }
    }

    pub fn evaluation(coeffs: Vec<u64>) -> Self {
        PolyVector {
            coeffs,
            domain: Domain::Evaluation,
            order: ElementOrder::Natural,
        }
    }

    pub fn zero(n: usize, domain: Domain) -> Self {
        PolyVector {
            coeffs: vec![0; n],
            domain,
            order: ElementOrder::Natural,
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NttVariant {
    Standard,
    FourStep,
    MultiStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NttError {
    DomainMismatch { expected: Domain },
    BadSplit,
    LengthMismatch,
    VariantMismatch,
}

impl fmt::Display for NttError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NttError::DomainMismatch { expected } => {
                write!(f, "input polynomial must be in the {expected:?} domain")
            }
            NttError::BadSplit => write!(f, "split does not factor the ring degree"),
            NttError::LengthMismatch => write!(f, "polynomial length does not match the context"),
            NttError::VariantMismatch => write!(f, "schedule was built for a different variant"),
        }
    }
}

impl core::error::Error for NttError {}

/// Four-step split `N = n1 * n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourStepSplit {
    pub n1: usize,
    pub n2: usize,
}

impl FourStepSplit {
    /// Balanced default: `n1 = n2 = sqrt(N)` when `log2 N` is even, else
    /// `n1 = 2 * n2`.
    pub fn balanced(n: usize) -> Self {
        let log = n.trailing_zeros();
        let l2 = log / 2;
        let n2 = 1usize << l2;
        FourStepSplit { n1: n / n2, n2 }
    }
}

/// Multi-step split `N = n11 * n12 * n21 * n22`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiStepSplit {
    pub n11: usize,
    pub n12: usize,
    pub n21: usize,
    pub n22: usize,
}

impl MultiStepSplit {
    pub fn balanced(n: usize) -> Self {
        let outer = FourStepSplit::balanced(n);
        let s1 = FourStepSplit::balanced(outer.n1);
        let s2 = FourStepSplit::balanced(outer.n2);
        MultiStepSplit {
            n11: s1.n1,
            n12: s1.n2,
            n21: s2.n1,
            n22: s2.n2,
        }
    }

    pub fn n1(&self) -> usize {
        self.n11 * self.n12
    }

    pub fn n2(&self) -> usize {
        self.n21 * self.n22
    }
}

/// The seven macro-stages of the multi-step dataflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiStage {
    N11Ntt,
    N1IntraTranspose,
    N12Ntt,
    TransposeBuffer,
    N21Ntt,
    N2IntraTranspose,
    N22Ntt,
}

pub const MULTI_STAGES: [MultiStage; 7] = [
    MultiStage::N11Ntt,
    MultiStage::N1IntraTranspose,
    MultiStage::N12Ntt,
    MultiStage::TransposeBuffer,
    MultiStage::N21Ntt,
    MultiStage::N2IntraTranspose,
    MultiStage::N22Ntt,
];

/// Twiddle bank for one radix-2 sub-transform in the merged-psi form:
/// entry `i` (for `i in [1, size)`) holds `root^{bitrev(i)}`.
#[derive(Debug, Clone)]
struct StandardTables {
    size: usize,
    log2: u32,
    fwd: Vec<u64>,
    fwd_shoup: Vec<u64>,
    inv: Vec<u64>,
    inv_shoup: Vec<u64>,
}

impl StandardTables {
    fn new(size: usize, root: u64, ctx: &PrimeContext) -> Self {
        let q = ctx.q;
        let log2 = size.trailing_zeros();
        let root_inv = ctx.inv(root);
        let mut fwd = vec![0u64; size];
        let mut inv = vec![0u64; size];
        let mut pow_f = 1u64;
        let mut pow_i = 1u64;
        // fwd[bitrev(e)] = root^e
        for e in 0..size {
            fwd[bit_reverse(e, log2)] = pow_f;
            inv[bit_reverse(e, log2)] = pow_i;
            pow_f = ctx.mul(pow_f, root);
            pow_i = ctx.mul(pow_i, root_inv);
        }
        let fwd_shoup = fwd.iter().map(|&w| shoup_precompute(w, q)).collect();
        let inv_shoup = inv.iter().map(|&w| shoup_precompute(w, q)).collect();
        StandardTables {
            size,
            log2,
            fwd,
            fwd_shoup,
            inv,
            inv_shoup,
        }
    }

    /// Table for butterfly layer `s`: entries `root^{bitrev(2^s + i)}`,
    /// `i in [0, 2^s)`.
    fn layer(&self, s: u32) -> Vec<u64> {
        let m = 1usize << s;
        (0..m).map(|i| self.fwd[m + i]).collect()
    }
}

/// Per-element twist table (the Hadamard multipliers between sub-NTTs).
#[derive(Debug, Clone)]
struct TwistTable {
    rows: usize,
    cols: usize,
    fwd: Vec<u64>,
    fwd_shoup: Vec<u64>,
    inv: Vec<u64>,
    inv_shoup: Vec<u64>,
}

impl TwistTable {
    fn new(rows: usize, cols: usize, ctx: &PrimeContext, exponent: impl Fn(usize, usize) -> u64, base: u64) -> Self {
        let q = ctx.q;
        let base_inv = ctx.inv(base);
        let mut fwd = Vec::with_capacity(rows * cols);
        let mut inv = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let e = exponent(r, c);
                fwd.push(ctx.pow(base, e));
                inv.push(ctx.pow(base_inv, e));
            }
        }
        let fwd_shoup = fwd.iter().map(|&w| shoup_precompute(w, q)).collect();
        let inv_shoup = inv.iter().map(|&w| shoup_precompute(w, q)).collect();
        TwistTable {
            rows,
            cols,
            fwd,
            fwd_shoup,
            inv,
            inv_shoup,
        }
    }
}

/// Twiddle bank for one fixed-twiddle stage: `layers[s][i] = W_{2N2}^i`.
///
/// Every layer is generated independently from the closed form; the
/// layer-invariance asserted by the structural tests is a property of the
/// dataflow, not an artifact of sharing one allocation.
#[derive(Debug, Clone)]
struct FixedStage {
    sub_size: usize,
    layers: Vec<Vec<u64>>,
    layers_shoup: Vec<Vec<u64>>,
    inv_layers: Vec<Vec<u64>>,
    inv_layers_shoup: Vec<Vec<u64>>,
}

impl FixedStage {
    fn new(sub_size: usize, n2: usize, w2n2: u64, ctx: &PrimeContext) -> Self {
        let q = ctx.q;
        let w2n2_inv = ctx.inv(w2n2);
        let depth = sub_size.trailing_zeros() as usize;
        let mut layers = Vec::with_capacity(depth);
        let mut inv_layers = Vec::with_capacity(depth);
        for _s in 0..depth {
            // Closed form per layer: entry i is W_{2N2}^i, independent of s.
            let mut layer = Vec::with_capacity(n2);
            let mut inv_layer = Vec::with_capacity(n2);
            let mut pf = 1u64;
            let mut pi = 1u64;
            for _ in 0..n2 {
                layer.push(pf);
                inv_layer.push(pi);
                pf = ctx.mul(pf, w2n2);
                pi = ctx.mul(pi, w2n2_inv);
            }
            layers.push(layer);
            inv_layers.push(inv_layer);
        }
        let layers_shoup = layers
            .iter()
            .map(|l| l.iter().map(|&w| shoup_precompute(w, q)).collect())
            .collect();
        let inv_layers_shoup = inv_layers
            .iter()
            .map(|l| l.iter().map(|&w| shoup_precompute(w, q)).collect())
            .collect();
        FixedStage {
            sub_size,
            layers,
            layers_shoup,
            inv_layers,
            inv_layers_shoup,
        }
    }
}

#[derive(Debug, Clone)]
enum ScheduleKind {
    Standard {
        tables: StandardTables,
    },
    FourStep {
        split: FourStepSplit,
        sub_n1: StandardTables,
        twist: TwistTable,
        n2_stages: Vec<Vec<u64>>,
        n2_stages_shoup: Vec<Vec<u64>>,
        n2_inv_stages: Vec<Vec<u64>>,
        n2_inv_stages_shoup: Vec<Vec<u64>>,
    },
    MultiStep {
        split: MultiStepSplit,
        sub_n11: StandardTables,
        twist_n1: TwistTable,
        fixed_n12: FixedStage,
        twist_buffer: TwistTable,
        fixed_n21: FixedStage,
        twist_n2: TwistTable,
        fixed_n22: FixedStage,
    },
}

/// Precomputed twiddle schedule for one `(variant, prime, split)` triple.
#[derive(Debug, Clone)]
pub struct TwiddleSchedule {
    pub variant: NttVariant,
    pub n: usize,
    ctx: PrimeContext,
    kind: ScheduleKind,
}

fn bit_reverse(mut v: usize, bits: u32) -> usize {
    let mut out = 0usize;
    for _ in 0..bits {
        out = (out << 1) | (v & 1);
        v >>= 1;
    }
    out
}

fn bitrev_permute(a: &mut [u64]) {
    let bits = a.len().trailing_zeros();
    for i in 0..a.len() {
        let j = bit_reverse(i, bits);
        if i < j {
            a.swap(i, j);
        }
    }
}

/// Builds the twiddle schedule for `variant` over `ctx`.
///
/// `split` supplies the factorization for the four-step and multi-step
/// variants; pass `None` for the balanced default. `BadSplit` is returned
/// when the factors do not multiply to `N`, are not powers of two, or (for
/// multi-step) `n12` does not divide `2*n2`, which is what makes the shared
/// fixed-twiddle bank expressible.
pub fn twiddle_schedule(
    variant: NttVariant,
    ctx: &PrimeContext,
    split: Option<MultiStepSplit>,
) -> Result<TwiddleSchedule, NttError> {
    let n = ctx.n;
    let kind = match variant {
        NttVariant::Standard => ScheduleKind::Standard {
            tables: StandardTables::new(n, ctx.psi, ctx),
        },
        NttVariant::FourStep => {
            let fs = match split {
                Some(ms) => FourStepSplit {
                    n1: ms.n1(),
                    n2: ms.n2(),
                },
                None => FourStepSplit::balanced(n),
            };
            if fs.n1 * fs.n2 != n || !fs.n1.is_power_of_two() || !fs.n2.is_power_of_two() || fs.n1 < 2 || fs.n2 < 2 {
                return Err(NttError::BadSplit);
            }
            let psi1 = ctx.pow(ctx.psi, fs.n2 as u64); // order 2*n1
            let omega2 = ctx.pow(ctx.psi, 2 * fs.n1 as u64); // order n2
            let (stages, shoup, inv_stages, inv_shoup) = cyclic_stage_tables(fs.n2, omega2, ctx);
            ScheduleKind::FourStep {
                split: fs,
                sub_n1: StandardTables::new(fs.n1, psi1, ctx),
                twist: TwistTable::new(fs.n1, fs.n2, ctx, |k1, n2i| ((2 * k1 + 1) * n2i) as u64, ctx.psi),
                n2_stages: stages,
                n2_stages_shoup: shoup,
                n2_inv_stages: inv_stages,
                n2_inv_stages_shoup: inv_shoup,
            }
        }
        NttVariant::MultiStep => {
            let sp = split.unwrap_or_else(|| MultiStepSplit::balanced(n));
            let (n11, n12, n21, n22) = (sp.n11, sp.n12, sp.n21, sp.n22);
            let ok = n11 * n12 * n21 * n22 == n
                && [n11, n12, n21, n22].iter().all(|&m| m.is_power_of_two() && m >= 2);
            if !ok {
                return Err(NttError::BadSplit);
            }
            let n1 = sp.n1();
            let n2 = sp.n2();
            // The shared bank holds powers of W_{2N2}; the N12 stage can only
            // draw from it when its twiddles are W_{2N2} powers.
            if (2 * n2) % n12 != 0 {
                return Err(NttError::BadSplit);
            }
            let psi1 = ctx.pow(ctx.psi, n2 as u64); // order 2*n1
            let psi11 = ctx.pow(psi1, n12 as u64); // order 2*n11
            let w2n2 = ctx.pow(ctx.psi, n1 as u64); // order 2*n2
            let wn2 = ctx.mul(w2n2, w2n2); // order n2
            ScheduleKind::MultiStep {
                split: sp,
                sub_n11: StandardTables::new(n11, psi11, ctx),
                twist_n1: TwistTable::new(n11, n12, ctx, |k11, n12i| ((2 * k11 + 1) * n12i) as u64, psi1),
                fixed_n12: FixedStage::new(n12, n2, w2n2, ctx),
                twist_buffer: TwistTable::new(n1, n2, ctx, |k1, n2i| ((2 * k1 + 1) * n2i) as u64, ctx.psi),
                fixed_n21: FixedStage::new(n21, n2, w2n2, ctx),
                twist_n2: TwistTable::new(n21, n22, ctx, |k21, n22i| (k21 * n22i) as u64, wn2),
                fixed_n22: FixedStage::new(n22, n2, w2n2, ctx),
            }
        }
    };
    Ok(TwiddleSchedule {
        variant,
        n,
        ctx: *ctx,
        kind,
    })
}

/// Per-stage tables for a plain cyclic DFT of size `m` with root `omega`:
/// stage `s` entry `j` holds `omega^{(m / 2^s) * j}`.
fn cyclic_stage_tables(
    m: usize,
    omega: u64,
    ctx: &PrimeContext,
) -> (Vec<Vec<u64>>, Vec<Vec<u64>>, Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let q = ctx.q;
    let omega_inv = ctx.inv(omega);
    let depth = m.trailing_zeros();
    let mut stages = Vec::new();
    let mut inv_stages = Vec::new();
    for s in 1..=depth {
        let half = 1usize << (s - 1);
        let step = (m >> s) as u64;
        let mut fwd = Vec::with_capacity(half);
        let mut inv = Vec::with_capacity(half);
        for j in 0..half as u64 {
            fwd.push(ctx.pow(omega, step * j));
            inv.push(ctx.pow(omega_inv, step * j));
        }
        stages.push(fwd);
        inv_stages.push(inv);
    }
    let shoup = stages
        .iter()
        .map(|st| st.iter().map(|&w| shoup_precompute(w, q)).collect())
        .collect();
    let inv_shoup = inv_stages
        .iter()
        .map(|st| st.iter().map(|&w| shoup_precompute(w, q)).collect())
        .collect();
    (stages, shoup, inv_stages, inv_shoup)
}

impl TwiddleSchedule {
    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn four_step_split(&self) -> Option<FourStepSplit> {
        match &self.kind {
            ScheduleKind::FourStep { split, .. } => Some(*split),
            _ => None,
        }
    }

    pub fn multi_step_split(&self) -> Option<MultiStepSplit> {
        match &self.kind {
            ScheduleKind::MultiStep { split, .. } => Some(*split),
            _ => None,
        }
    }

    /// Layer tables of a fixed-twiddle stage (`N12Ntt`, `N21Ntt`, `N22Ntt`);
    /// `None` for the other stages or variants.
    pub fn fixed_stage_layers(&self, stage: MultiStage) -> Option<&[Vec<u64>]> {
        match &self.kind {
            ScheduleKind::MultiStep {
                fixed_n12,
                fixed_n21,
                fixed_n22,
                ..
            } => match stage {
                MultiStage::N12Ntt => Some(&fixed_n12.layers),
                MultiStage::N21Ntt => Some(&fixed_n21.layers),
                MultiStage::N22Ntt => Some(&fixed_n22.layers),
                _ => None,
            },
            _ => None,
        }
    }

    /// Closed-form regeneration of a fixed-stage entry: `W_{2N2}^i`.
    pub fn regenerate_fixed_entry(&self, i: usize) -> Option<u64> {
        let split = self.multi_step_split()?;
        let w2n2 = self.ctx.pow(self.ctx.psi, split.n1() as u64);
        Some(self.ctx.pow(w2n2, i as u64))
    }

    /// Stage-`s` table of the standard variant: `psi^{bitrev(2^s + i)}`.
    pub fn standard_stage_layer(&self, s: u32) -> Option<Vec<u64>> {
        match &self.kind {
            ScheduleKind::Standard { tables } => {
                if s >= tables.log2 {
                    None
                } else {
                    Some(tables.layer(s))
                }
            }
            _ => None,
        }
    }

    /// Stage-`s` table of the four-step N1 sub-transform.
    pub fn four_step_n1_layer(&self, s: u32) -> Option<Vec<u64>> {
        match &self.kind {
            ScheduleKind::FourStep { sub_n1, .. } => {
                if s >= sub_n1.log2 {
                    None
                } else {
                    Some(sub_n1.layer(s))
                }
            }
            _ => None,
        }
    }

    /// Test hook: flips one executed twiddle entry so verification suites can
    /// prove they detect a corrupted schedule. Never called by library code.
    pub fn inject_twiddle_fault(&mut self) {
        let q = self.ctx.q;
        let bump = |w: &mut u64| {
            *w = (*w + 1) % q;
        };
        match &mut self.kind {
            ScheduleKind::Standard { tables } => {
                bump(&mut tables.fwd[1]);
                tables.fwd_shoup[1] = shoup_precompute(tables.fwd[1], q);
            }
            ScheduleKind::FourStep { twist, .. } => {
                bump(&mut twist.fwd[1]);
                twist.fwd_shoup[1] = shoup_precompute(twist.fwd[1], q);
            }
            ScheduleKind::MultiStep { twist_buffer, .. } => {
                bump(&mut twist_buffer.fwd[1]);
                twist_buffer.fwd_shoup[1] = shoup_precompute(twist_buffer.fwd[1], q);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Merged-psi radix-2 forward pass: natural input, bit-reversed output.
fn neg_ntt_in_place(a: &mut [u64], t: &StandardTables, q: u64) {
    let n = t.size;
    debug_assert_eq!(a.len(), n);
    let mut half = n;
    let mut m = 1usize;
    while m < n {
        half >>= 1;
        for i in 0..m {
            let w = t.fwd[m + i];
            let ws = t.fwd_shoup[m + i];
            let base = 2 * i * half;
            for j in base..base + half {
                let u = a[j];
                let v = mul_shoup(a[j + half], w, ws, q);
                a[j] = if u + v >= q { u + v - q } else { u + v };
                a[j + half] = if u >= v { u - v } else { u + q - v };
            }
        }
        m <<= 1;
    }
}

/// Gentleman–Sande inverse pass: bit-reversed input, natural output, no
/// final scaling (the caller folds `1/N`).
fn neg_intt_in_place(a: &mut [u64], t: &StandardTables, q: u64) {
    let n = t.size;
    debug_assert_eq!(a.len(), n);
    let mut half = 1usize;
    let mut m = n;
    while m > 1 {
        let h = m >> 1;
        let mut j1 = 0usize;
        for i in 0..h {
            let w = t.inv[h + i];
            let ws = t.inv_shoup[h + i];
            for j in j1..j1 + half {
                let u = a[j];
                let v = a[j + half];
                a[j] = if u + v >= q { u + v - q } else { u + v };
                let d = if u >= v { u - v } else { u + q - v };
                a[j + half] = mul_shoup(d, w, ws, q);
            }
            j1 += 2 * half;
        }
        half <<= 1;
        m = h;
    }
}

/// Cyclic DFT, natural order in and out; twiddles come from the per-stage
/// accessor `(s, j) -> (w, w_shoup)` with stage depth `s in [1, log2 m]`.
fn cyc_dft_in_place(a: &mut [u64], q: u64, twiddle: impl Fn(u32, usize) -> (u64, u64)) {
    let m = a.len();
    if m == 1 {
        return;
    }
    bitrev_permute(a);
    let depth = m.trailing_zeros();
    for s in 1..=depth {
        let len = 1usize << s;
        let half = len >> 1;
        for start in (0..m).step_by(len) {
            for j in 0..half {
                let (w, ws) = twiddle(s, j);
                let u = a[start + j];
                let v = mul_shoup(a[start + j + half], w, ws, q);
                a[start + j] = if u + v >= q { u + v - q } else { u + v };
                a[start + j + half] = if u >= v { u - v } else { u + q - v };
            }
        }
    }
}

fn scale_in_place(a: &mut [u64], factor: u64, q: u64) {
    let fs = shoup_precompute(factor, q);
    for x in a.iter_mut() {
        *x = mul_shoup(*x, factor, fs, q);
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

fn check_fwd_input(p: &PolyVector, ctx: &PrimeContext) -> Result<(), NttError> {
    if p.domain != Domain::Coefficient {
        return Err(NttError::DomainMismatch {
            expected: Domain::Coefficient,
        });
    }
    if p.len() != ctx.n {
        return Err(NttError::LengthMismatch);
    }
    Ok(())
}

fn check_inv_input(p: &PolyVector, ctx: &PrimeContext) -> Result<(), NttError> {
    if p.domain != Domain::Evaluation {
        return Err(NttError::DomainMismatch {
            expected: Domain::Evaluation,
        });
    }
    if p.len() != ctx.n {
        return Err(NttError::LengthMismatch);
    }
    Ok(())
}

/// Standard iterative negacyclic NTT: `out[k] = Σ_n p[n]·psi^{n(2k+1)}`.
pub fn ntt_standard(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    check_fwd_input(p, ctx)?;
    let ScheduleKind::Standard { tables } = &sched.kind else {
        return Err(NttError::VariantMismatch);
    };
    let mut a = p.coeffs.clone();
    neg_ntt_in_place(&mut a, tables, ctx.q);
    bitrev_permute(&mut a);
    Ok(PolyVector::evaluation(a))
}

/// Exact inverse of [`ntt_standard`].
pub fn intt_standard(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    check_inv_input(p, ctx)?;
    let ScheduleKind::Standard { tables } = &sched.kind else {
        return Err(NttError::VariantMismatch);
    };
    let mut a = p.coeffs.clone();
    bitrev_permute(&mut a);
    neg_intt_in_place(&mut a, tables, ctx.q);
    scale_in_place(&mut a, ctx.n_inv, ctx.q);
    Ok(PolyVector::coefficient(a))
}

/// Four-step negacyclic NTT; bitwise identical to [`ntt_standard`].
pub fn ntt_four_step(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    check_fwd_input(p, ctx)?;
    let ScheduleKind::FourStep {
        split,
        sub_n1,
        twist,
        n2_stages,
        n2_stages_shoup,
        ..
    } = &sched.kind
    else {
        return Err(NttError::VariantMismatch);
    };
    let q = ctx.q;
    let (n1, n2) = (split.n1, split.n2);
    let mut buf = p.coeffs.clone();

    // Step 1: negacyclic N1-NTT down each column n2 (stride n2).
    let mut col = vec![0u64; n1];
    for c in 0..n2 {
        for r in 0..n1 {
            col[r] = buf[r * n2 + c];
        }
        neg_ntt_in_place(&mut col, sub_n1, q);
        bitrev_permute(&mut col);
        for r in 0..n1 {
            buf[r * n2 + c] = col[r];
        }
    }
    // Step 2: transpose + Hadamard twist psi^{(2k1+1) n2}.
    for k1 in 0..n1 {
        for c in 0..n2 {
            let idx = k1 * twist.cols + c;
            buf[k1 * n2 + c] = mul_shoup(buf[k1 * n2 + c], twist.fwd[idx], twist.fwd_shoup[idx], q);
        }
    }
    // Step 3: cyclic N2-DFT along each row.
    for k1 in 0..n1 {
        let row = &mut buf[k1 * n2..(k1 + 1) * n2];
        cyc_dft_in_place(row, q, |s, j| {
            (
                n2_stages[(s - 1) as usize][j],
                n2_stages_shoup[(s - 1) as usize][j],
            )
        });
    }
    // Step 4: output transpose out[k1 + n1*k2].
    let mut out = vec![0u64; ctx.n];
    for k1 in 0..n1 {
        for k2 in 0..n2 {
            out[k1 + n1 * k2] = buf[k1 * n2 + k2];
        }
    }
    Ok(PolyVector::evaluation(out))
}

/// Inverse of [`ntt_four_step`].
pub fn intt_four_step(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    check_inv_input(p, ctx)?;
    let ScheduleKind::FourStep {
        split,
        sub_n1,
        twist,
        n2_inv_stages,
        n2_inv_stages_shoup,
        ..
    } = &sched.kind
    else {
        return Err(NttError::VariantMismatch);
    };
    let q = ctx.q;
    let (n1, n2) = (split.n1, split.n2);
    // Undo the output transpose.
    let mut buf = vec![0u64; ctx.n];
    for k1 in 0..n1 {
        for k2 in 0..n2 {
            buf[k1 * n2 + k2] = p.coeffs[k1 + n1 * k2];
        }
    }
    // Inverse cyclic N2 rows (scale folded into the final 1/N).
    for k1 in 0..n1 {
        let row = &mut buf[k1 * n2..(k1 + 1) * n2];
        cyc_dft_in_place(row, q, |s, j| {
            (
                n2_inv_stages[(s - 1) as usize][j],
                n2_inv_stages_shoup[(s - 1) as usize][j],
            )
        });
    }
    // Inverse twist.
    for k1 in 0..n1 {
        for c in 0..n2 {
            let idx = k1 * twist.cols + c;
            buf[k1 * n2 + c] = mul_shoup(buf[k1 * n2 + c], twist.inv[idx], twist.inv_shoup[idx], q);
        }
    }
    // Inverse negacyclic N1 columns.
    let mut col = vec![0u64; n1];
    for c in 0..n2 {
        for r in 0..n1 {
            col[r] = buf[r * n2 + c];
        }
        bitrev_permute(&mut col);
        neg_intt_in_place(&mut col, sub_n1, q);
        for r in 0..n1 {
            buf[r * n2 + c] = col[r];
        }
    }
    scale_in_place(&mut buf, ctx.n_inv, ctx.q);
    Ok(PolyVector::coefficient(buf))
}

/// Multi-step negacyclic NTT (seven stages); bitwise identical to
/// [`ntt_standard`]. See [`ntt_multi_step_with_trace`] for the instrumented
/// version exposing stage boundaries.
pub fn ntt_multi_step(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    multi_step_forward(p, ctx, sched, None)
}

/// Multi-step NTT that also returns the working buffer after each of the
/// seven stages, for structural instrumentation.
pub fn ntt_multi_step_with_trace(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<(PolyVector, Vec<Vec<u64>>), NttError> {
    let mut trace = Vec::with_capacity(7);
    let out = multi_step_forward(p, ctx, sched, Some(&mut trace))?;
    Ok((out, trace))
}

fn multi_step_forward(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
    mut trace: Option<&mut Vec<Vec<u64>>>,
) -> Result<PolyVector, NttError> {
    check_fwd_input(p, ctx)?;
    let ScheduleKind::MultiStep {
        split,
        sub_n11,
        twist_n1,
        fixed_n12,
        twist_buffer,
        fixed_n21,
        twist_n2,
        fixed_n22,
    } = &sched.kind
    else {
        return Err(NttError::VariantMismatch);
    };
    let q = ctx.q;
    let (n11, n12, n21, n22) = (split.n11, split.n12, split.n21, split.n22);
    let n1 = split.n1();
    let n2 = split.n2();
    let mut buf = p.coeffs.clone();
    let snap = |buf: &Vec<u64>, trace: &mut Option<&mut Vec<Vec<u64>>>| {
        if let Some(t) = trace.as_deref_mut() {
            t.push(buf.clone());
        }
    };

    // Stage 1: negacyclic N11-NTT along the n11 axis (stride n12*n2).
    let mut sub = vec![0u64; n11];
    for n12i in 0..n12 {
        for c in 0..n2 {
            for r in 0..n11 {
                sub[r] = buf[(r * n12 + n12i) * n2 + c];
            }
            neg_ntt_in_place(&mut sub, sub_n11, q);
            bitrev_permute(&mut sub);
            for r in 0..n11 {
                buf[(r * n12 + n12i) * n2 + c] = sub[r];
            }
        }
    }
    snap(&buf, &mut trace);

    // Stage 2: N1 intra-transpose twist psi1^{(2k11+1) n12}.
    for k11 in 0..n11 {
        for n12i in 0..n12 {
            let w = twist_n1.fwd[k11 * twist_n1.cols + n12i];
            let ws = twist_n1.fwd_shoup[k11 * twist_n1.cols + n12i];
            for c in 0..n2 {
                let idx = (k11 * n12 + n12i) * n2 + c;
                buf[idx] = mul_shoup(buf[idx], w, ws, q);
            }
        }
    }
    snap(&buf, &mut trace);

    // Stage 3: cyclic N12-DFT along the n12 axis; twiddles looked up in the
    // fixed W_{2N2} bank at exponent (2*n2 >> s) * j.
    let mut sub12 = vec![0u64; n12];
    for k11 in 0..n11 {
        for c in 0..n2 {
            for r in 0..n12 {
                sub12[r] = buf[(k11 * n12 + r) * n2 + c];
            }
            cyc_dft_in_place(&mut sub12, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n12.layers[layer][idx],
                    fixed_n12.layers_shoup[layer][idx],
                )
            });
            for r in 0..n12 {
                buf[(k11 * n12 + r) * n2 + c] = sub12[r];
            }
        }
    }
    snap(&buf, &mut trace);

    // Stage 4: transpose with buffer + Hadamard. Rows are relaid from the
    // (k11, k12) layout to natural k1 = k11 + n11*k12, then twisted by
    // psi^{(2k1+1) n2}.
    let mut relaid = vec![0u64; ctx.n];
    for k11 in 0..n11 {
        for k12 in 0..n12 {
            let k1 = k11 + n11 * k12;
            let src = (k11 * n12 + k12) * n2;
            relaid[k1 * n2..(k1 + 1) * n2].copy_from_slice(&buf[src..src + n2]);
        }
    }
    buf = relaid;
    for k1 in 0..n1 {
        for c in 0..n2 {
            let idx = k1 * twist_buffer.cols + c;
            buf[k1 * n2 + c] = mul_shoup(
                buf[k1 * n2 + c],
                twist_buffer.fwd[idx],
                twist_buffer.fwd_shoup[idx],
                q,
            );
        }
    }
    snap(&buf, &mut trace);

    // Stage 5: cyclic N21-DFT along the n21 axis of each row.
    let mut sub21 = vec![0u64; n21];
    for k1 in 0..n1 {
        for n22i in 0..n22 {
            for r in 0..n21 {
                sub21[r] = buf[k1 * n2 + r * n22 + n22i];
            }
            cyc_dft_in_place(&mut sub21, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n21.layers[layer][idx],
                    fixed_n21.layers_shoup[layer][idx],
                )
            });
            for r in 0..n21 {
                buf[k1 * n2 + r * n22 + n22i] = sub21[r];
            }
        }
    }
    snap(&buf, &mut trace);

    // Stage 6: N2 intra-transpose twist W_{N2}^{k21 n22}.
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            for n22i in 0..n22 {
                let t = k21 * twist_n2.cols + n22i;
                let idx = k1 * n2 + k21 * n22 + n22i;
                buf[idx] = mul_shoup(buf[idx], twist_n2.fwd[t], twist_n2.fwd_shoup[t], q);
            }
        }
    }
    snap(&buf, &mut trace);

    // Stage 7: cyclic N22-DFT along the contiguous n22 axis.
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            let start = k1 * n2 + k21 * n22;
            let row = &mut buf[start..start + n22];
            cyc_dft_in_place(row, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n22.layers[layer][idx],
                    fixed_n22.layers_shoup[layer][idx],
                )
            });
        }
    }
    snap(&buf, &mut trace);

    // Final assembly: out[k1 + n1*(k21 + n21*k22)] = buf[k1*n2 + k21*n22 + k22].
    let mut out = vec![0u64; ctx.n];
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            for k22 in 0..n22 {
                out[k1 + n1 * (k21 + n21 * k22)] = buf[k1 * n2 + k21 * n22 + k22];
            }
        }
    }
    Ok(PolyVector::evaluation(out))
}

/// Inverse of [`ntt_multi_step`].
pub fn intt_multi_step(
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    check_inv_input(p, ctx)?;
    let ScheduleKind::MultiStep {
        split,
        sub_n11,
        twist_n1,
        fixed_n12,
        twist_buffer,
        fixed_n21,
        twist_n2,
        fixed_n22,
    } = &sched.kind
    else {
        return Err(NttError::VariantMismatch);
    };
    let q = ctx.q;
    let (n11, n12, n21, n22) = (split.n11, split.n12, split.n21, split.n22);
    let n1 = split.n1();
    let n2 = split.n2();

    // Undo the final assembly.
    let mut buf = vec![0u64; ctx.n];
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            for k22 in 0..n22 {
                buf[k1 * n2 + k21 * n22 + k22] = p.coeffs[k1 + n1 * (k21 + n21 * k22)];
            }
        }
    }
    // Stage 7 inverse.
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            let start = k1 * n2 + k21 * n22;
            let row = &mut buf[start..start + n22];
            cyc_dft_in_place(row, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n22.inv_layers[layer][idx],
                    fixed_n22.inv_layers_shoup[layer][idx],
                )
            });
        }
    }
    // Stage 6 inverse twist.
    for k1 in 0..n1 {
        for k21 in 0..n21 {
            for n22i in 0..n22 {
                let t = k21 * twist_n2.cols + n22i;
                let idx = k1 * n2 + k21 * n22 + n22i;
                buf[idx] = mul_shoup(buf[idx], twist_n2.inv[t], twist_n2.inv_shoup[t], q);
            }
        }
    }
    // Stage 5 inverse.
    let mut sub21 = vec![0u64; n21];
    for k1 in 0..n1 {
        for n22i in 0..n22 {
            for r in 0..n21 {
                sub21[r] = buf[k1 * n2 + r * n22 + n22i];
            }
            cyc_dft_in_place(&mut sub21, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n21.inv_layers[layer][idx],
                    fixed_n21.inv_layers_shoup[layer][idx],
                )
            });
            for r in 0..n21 {
                buf[k1 * n2 + r * n22 + n22i] = sub21[r];
            }
        }
    }
    // Stage 4 inverse: untwist, then relay rows back to (k11, k12).
    for k1 in 0..n1 {
        for c in 0..n2 {
            let idx = k1 * twist_buffer.cols + c;
            buf[k1 * n2 + c] = mul_shoup(
                buf[k1 * n2 + c],
                twist_buffer.inv[idx],
                twist_buffer.inv_shoup[idx],
                q,
            );
        }
    }
    let mut relaid = vec![0u64; ctx.n];
    for k11 in 0..n11 {
        for k12 in 0..n12 {
            let k1 = k11 + n11 * k12;
            let dst = (k11 * n12 + k12) * n2;
            relaid[dst..dst + n2].copy_from_slice(&buf[k1 * n2..(k1 + 1) * n2]);
        }
    }
    buf = relaid;
    // Stage 3 inverse.
    let mut sub12 = vec![0u64; n12];
    for k11 in 0..n11 {
        for c in 0..n2 {
            for r in 0..n12 {
                sub12[r] = buf[(k11 * n12 + r) * n2 + c];
            }
            cyc_dft_in_place(&mut sub12, q, |s, j| {
                let idx = ((2 * n2) >> s) * j;
                let layer = (s - 1) as usize;
                (
                    fixed_n12.inv_layers[layer][idx],
                    fixed_n12.inv_layers_shoup[layer][idx],
                )
            });
            for r in 0..n12 {
                buf[(k11 * n12 + r) * n2 + c] = sub12[r];
            }
        }
    }
    // Stage 2 inverse twist.
    for k11 in 0..n11 {
        for n12i in 0..n12 {
            let w = twist_n1.inv[k11 * twist_n1.cols + n12i];
            let ws = twist_n1.inv_shoup[k11 * twist_n1.cols + n12i];
            for c in 0..n2 {
                let idx = (k11 * n12 + n12i) * n2 + c;
                buf[idx] = mul_shoup(buf[idx], w, ws, q);
            }
        }
    }
    // Stage 1 inverse.
    let mut sub = vec![0u64; n11];
    for n12i in 0..n12 {
        for c in 0..n2 {
            for r in 0..n11 {
                sub[r] = buf[(r * n12 + n12i) * n2 + c];
            }
            bitrev_permute(&mut sub);
            neg_intt_in_place(&mut sub, sub_n11, q);
            for r in 0..n11 {
                buf[(r * n12 + n12i) * n2 + c] = sub[r];
            }
        }
    }
    scale_in_place(&mut buf, ctx.n_inv, ctx.q);
    Ok(PolyVector::coefficient(buf))
}

/// Dispatch helper used by callers that iterate over variants.
pub fn ntt_forward(
    variant: NttVariant,
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    match variant {
        NttVariant::Standard => ntt_standard(p, ctx, sched),
        NttVariant::FourStep => ntt_four_step(p, ctx, sched),
        NttVariant::MultiStep => ntt_multi_step(p, ctx, sched),
    }
}

pub fn ntt_inverse(
    variant: NttVariant,
    p: &PolyVector,
    ctx: &PrimeContext,
    sched: &TwiddleSchedule,
) -> Result<PolyVector, NttError> {
    match variant {
        NttVariant::Standard => intt_standard(p, ctx, sched),
        NttVariant::FourStep => intt_four_step(p, ctx, sched),
        NttVariant::MultiStep => intt_multi_step(p, ctx, sched),
    }
}

/// Brute-force evaluation of the defining sum; the oracle for every variant.
pub fn ntt_reference(p: &[u64], ctx: &PrimeContext) -> Vec<u64> {
    let n = ctx.n;
    let mut out = vec![0u64; n];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut acc = 0u64;
        let step = ctx.pow(ctx.psi, (2 * k + 1) as u64);
        let mut w = 1u64;
        for &x in p.iter().take(n) {
            acc = ctx.add(acc, ctx.mul(x, w));
            w = ctx.mul(w, step);
        }
        *slot = acc;
    }
    out
}

/// Schoolbook negacyclic product with `X^N = -1` reduction; convolution
/// oracle for the transform suites.
pub fn negacyclic_schoolbook(x: &[u64], y: &[u64], ctx: &PrimeContext) -> Vec<u64> {
    let n = ctx.n;
    let mut out = vec![0u64; n];
    for i in 0..n {
        if x[i] == 0 {
            continue;
        }
        for j in 0..n {
            let p = ctx.mul(x[i], y[j]);
            let k = i + j;
            if k < n {
                out[k] = ctx.add(out[k], p);
            } else {
                out[k - n] = ctx.sub(out[k - n], p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::find_ntt_prime;

    fn rng_stream(seed: u64) -> impl FnMut() -> u64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            s ^ (s >> 31)
        }
    }

    fn random_poly(n: usize, q: u64, next: &mut impl FnMut() -> u64) -> PolyVector {
        PolyVector::coefficient((0..n).map(|_| next() % q).collect())
    }

    #[test]
    fn standard_matches_naive_reference() {
        // N = 16, q = 97 (97 = 1 mod 32).
        let ctx = PrimeContext::new(97, 16).unwrap();
        let sched = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let mut next = rng_stream(42);
        for _ in 0..10 {
            let p = random_poly(16, 97, &mut next);
            let got = ntt_standard(&p, &ctx, &sched).unwrap();
            assert_eq!(got.coeffs, ntt_reference(&p.coeffs, &ctx));
        }
    }

    #[test]
    fn delta_and_zero_cases() {
        let ctx = find_ntt_prime(20, 64, 0).unwrap();
        let sched_s = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let sched_f = twiddle_schedule(NttVariant::FourStep, &ctx, None).unwrap();
        let sched_m = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();

        let mut delta = PolyVector::zero(64, Domain::Coefficient);
        let c = 12345 % ctx.q;
        delta.coeffs[0] = c;
        // Only the x_0 term survives and psi^0 = 1, so every slot is c.
        for (variant, sched) in [
            (NttVariant::Standard, &sched_s),
            (NttVariant::FourStep, &sched_f),
            (NttVariant::MultiStep, &sched_m),
        ] {
            let out = ntt_forward(variant, &delta, &ctx, sched).unwrap();
            assert!(out.coeffs.iter().all(|&v| v == c), "{variant:?}");
            let zero = PolyVector::zero(64, Domain::Coefficient);
            let out = ntt_forward(variant, &zero, &ctx, sched).unwrap();
            assert!(out.coeffs.iter().all(|&v| v == 0));
            // all-c vector -> delta under the inverse.
            let allc = PolyVector::evaluation(vec![c; 64]);
            let back = ntt_inverse(variant, &allc, &ctx, sched).unwrap();
            assert_eq!(back.coeffs[0], c);
            assert!(back.coeffs[1..].iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn variants_agree_across_sizes_and_primes() {
        for log_n in [4u32, 6, 8, 10] {
            let n = 1usize << log_n;
            for pi in 0..3 {
                let ctx = find_ntt_prime(28, n, pi).unwrap();
                let ss = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
                let sf = twiddle_schedule(NttVariant::FourStep, &ctx, None).unwrap();
                let sm = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();
                let mut next = rng_stream(0x5eed + n as u64 + pi as u64);
                for _ in 0..3 {
                    let p = random_poly(n, ctx.q, &mut next);
                    let a = ntt_standard(&p, &ctx, &ss).unwrap();
                    let b = ntt_four_step(&p, &ctx, &sf).unwrap();
                    let c = ntt_multi_step(&p, &ctx, &sm).unwrap();
                    assert_eq!(a.coeffs, b.coeffs, "four-step N={n} prime#{pi}");
                    assert_eq!(a.coeffs, c.coeffs, "multi-step N={n} prime#{pi}");
                }
            }
        }
    }

    #[test]
    fn explicit_split_n256_4x4x4x4() {
        let ctx = find_ntt_prime(28, 256, 0).unwrap();
        let split = MultiStepSplit {
            n11: 4,
            n12: 4,
            n21: 4,
            n22: 4,
        };
        let sm = twiddle_schedule(NttVariant::MultiStep, &ctx, Some(split)).unwrap();
        let ss = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let mut next = rng_stream(99);
        let p = random_poly(256, ctx.q, &mut next);
        assert_eq!(
            ntt_multi_step(&p, &ctx, &sm).unwrap().coeffs,
            ntt_standard(&p, &ctx, &ss).unwrap().coeffs
        );
    }

    #[test]
    fn explicit_split_n4096_8x8x8x8() {
        let ctx = find_ntt_prime(28, 4096, 0).unwrap();
        let split = MultiStepSplit {
            n11: 8,
            n12: 8,
            n21: 8,
            n22: 8,
        };
        let sm = twiddle_schedule(NttVariant::MultiStep, &ctx, Some(split)).unwrap();
        let ss = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let mut next = rng_stream(7);
        for _ in 0..2 {
            let p = random_poly(4096, ctx.q, &mut next);
            assert_eq!(
                ntt_multi_step(&p, &ctx, &sm).unwrap().coeffs,
                ntt_standard(&p, &ctx, &ss).unwrap().coeffs
            );
        }
    }

    #[test]
    fn roundtrip_every_variant() {
        let ctx = find_ntt_prime(28, 1024, 0).unwrap();
        let mut next = rng_stream(1234);
        for variant in [NttVariant::Standard, NttVariant::FourStep, NttVariant::MultiStep] {
            let sched = twiddle_schedule(variant, &ctx, None).unwrap();
            let p = random_poly(1024, ctx.q, &mut next);
            let fwd = ntt_forward(variant, &p, &ctx, &sched).unwrap();
            let back = ntt_inverse(variant, &fwd, &ctx, &sched).unwrap();
            assert_eq!(back.coeffs, p.coeffs, "{variant:?}");
            // and the other composition order
            let ev = PolyVector::evaluation(p.coeffs.clone());
            let inv = ntt_inverse(variant, &ev, &ctx, &sched).unwrap();
            let fwd2 = ntt_forward(variant, &inv, &ctx, &sched).unwrap();
            assert_eq!(fwd2.coeffs, p.coeffs, "{variant:?}");
        }
    }

    #[test]
    fn linearity() {
        let ctx = find_ntt_prime(28, 128, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let mut next = rng_stream(55);
        let x = random_poly(128, ctx.q, &mut next);
        let y = random_poly(128, ctx.q, &mut next);
        let (a, b) = (next() % ctx.q, next() % ctx.q);
        let mut lin = PolyVector::zero(128, Domain::Coefficient);
        for i in 0..128 {
            lin.coeffs[i] = ctx.add(ctx.mul(a, x.coeffs[i]), ctx.mul(b, y.coeffs[i]));
        }
        let lhs = ntt_standard(&lin, &ctx, &sched).unwrap();
        let fx = ntt_standard(&x, &ctx, &sched).unwrap();
        let fy = ntt_standard(&y, &ctx, &sched).unwrap();
        for i in 0..128 {
            let rhs = ctx.add(ctx.mul(a, fx.coeffs[i]), ctx.mul(b, fy.coeffs[i]));
            assert_eq!(lhs.coeffs[i], rhs);
        }
    }

    #[test]
    fn convolution_matches_schoolbook() {
        for n in [16usize, 64] {
            let ctx = find_ntt_prime(26, n, 0).unwrap();
            let mut next = rng_stream(3 + n as u64);
            for variant in [NttVariant::Standard, NttVariant::FourStep, NttVariant::MultiStep] {
                let sched = twiddle_schedule(variant, &ctx, None).unwrap();
                let x = random_poly(n, ctx.q, &mut next);
                let y = random_poly(n, ctx.q, &mut next);
                let fx = ntt_forward(variant, &x, &ctx, &sched).unwrap();
                let fy = ntt_forward(variant, &y, &ctx, &sched).unwrap();
                let mut had = PolyVector::evaluation(vec![0; n]);
                for i in 0..n {
                    had.coeffs[i] = ctx.mul(fx.coeffs[i], fy.coeffs[i]);
                }
                let got = ntt_inverse(variant, &had, &ctx, &sched).unwrap();
                assert_eq!(got.coeffs, negacyclic_schoolbook(&x.coeffs, &y.coeffs, &ctx));
            }
        }
    }

    #[test]
    fn fixed_twiddle_layers_are_invariant_and_regenerable() {
        let ctx = find_ntt_prime(28, 256, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();
        for stage in [MultiStage::N12Ntt, MultiStage::N21Ntt, MultiStage::N22Ntt] {
            let layers = sched.fixed_stage_layers(stage).unwrap();
            assert!(!layers.is_empty());
            for layer in layers.iter() {
                assert_eq!(layer, &layers[0], "{stage:?} layer differs");
                for (i, &w) in layer.iter().enumerate() {
                    assert_eq!(w, sched.regenerate_fixed_entry(i).unwrap());
                }
            }
        }
        // Layer 0 of stage N21 equals layer 1 at every butterfly index.
        let layers = sched.fixed_stage_layers(MultiStage::N21Ntt).unwrap();
        if layers.len() > 1 {
            assert_eq!(layers[0], layers[1]);
        }
    }

    #[test]
    fn standard_schedule_regeneration() {
        let ctx = find_ntt_prime(20, 16, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        for s in 0..4u32 {
            let layer = sched.standard_stage_layer(s).unwrap();
            let m = 1usize << s;
            for (i, &w) in layer.iter().enumerate() {
                let e = bit_reverse(m + i, 4) as u64;
                assert_eq!(w, ctx.pow(ctx.psi, e), "stage {s} entry {i}");
            }
        }
    }

    #[test]
    fn four_step_schedule_regeneration() {
        let ctx = find_ntt_prime(20, 64, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::FourStep, &ctx, None).unwrap();
        let split = sched.four_step_split().unwrap();
        let psi1 = ctx.pow(ctx.psi, split.n2 as u64);
        let bits = split.n1.trailing_zeros();
        for s in 0..bits {
            let layer = sched.four_step_n1_layer(s).unwrap();
            let m = 1usize << s;
            for (i, &w) in layer.iter().enumerate() {
                assert_eq!(w, ctx.pow(psi1, bit_reverse(m + i, bits) as u64));
            }
        }
    }

    #[test]
    fn bad_split_rejected() {
        let ctx = find_ntt_prime(20, 64, 0).unwrap();
        let bad = MultiStepSplit {
            n11: 4,
            n12: 4,
            n21: 4,
            n22: 2,
        };
        assert_eq!(
            twiddle_schedule(NttVariant::MultiStep, &ctx, Some(bad)).unwrap_err(),
            NttError::BadSplit
        );
        // n12 does not divide 2*n2, which breaks the shared fixed bank.
        let ctx256 = find_ntt_prime(20, 256, 0).unwrap();
        let bad2 = MultiStepSplit {
            n11: 2,
            n12: 32,
            n21: 2,
            n22: 2,
        };
        assert_eq!(
            twiddle_schedule(NttVariant::MultiStep, &ctx256, Some(bad2)).unwrap_err(),
            NttError::BadSplit
        );
    }

    #[test]
    fn domain_mismatch_rejected() {
        let ctx = find_ntt_prime(20, 16, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        let ev = PolyVector::evaluation(vec![0; 16]);
        assert!(matches!(
            ntt_standard(&ev, &ctx, &sched),
            Err(NttError::DomainMismatch { .. })
        ));
        let co = PolyVector::coefficient(vec![0; 16]);
        assert!(matches!(
            intt_standard(&co, &ctx, &sched),
            Err(NttError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn trace_has_seven_stages() {
        let ctx = find_ntt_prime(20, 256, 0).unwrap();
        let sched = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();
        let mut next = rng_stream(8);
        let p = random_poly(256, ctx.q, &mut next);
        let (out, trace) = ntt_multi_step_with_trace(&p, &ctx, &sched).unwrap();
        assert_eq!(trace.len(), 7);
        let ss = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
        assert_eq!(out.coeffs, ntt_standard(&p, &ctx, &ss).unwrap().coeffs);
    }

    #[test]
    fn injected_fault_changes_output() {
        let ctx = find_ntt_prime(20, 64, 0).unwrap();
        let good = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();
        let mut bad = good.clone();
        bad.inject_twiddle_fault();
        let mut next = rng_stream(21);
        let p = random_poly(64, ctx.q, &mut next);
        let a = ntt_multi_step(&p, &ctx, &good).unwrap();
        let b = ntt_multi_step(&p, &ctx, &bad).unwrap();
        assert_ne!(a.coeffs, b.coeffs);
    }
}
