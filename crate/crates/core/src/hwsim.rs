//! Cycle-level discrete-event simulator: an instruction generator lowers
//! kernel plans to dependence graphs of arithmetic kernels, and a hardware
//! executor times them against a component profile in serial or parallel
//! mode.
//!
//! Timing model: a kernel of element volume `v` on a component with
//! per-cycle throughput `t` and pipeline depth `d` takes `ceil(v/t) + d`
//! cycles. Serial mode runs one kernel at a time in topological order;
//! parallel mode is greedy list scheduling over per-component instance
//! pools, earliest-ready-first with FIFO (node id) tie-break.
//!
//! Two profiles are bundled: `taiyi` (dedicated high-parallelism IP unit)
//! and `sharp-like` (no HP-IP; inner products fall back to the element-wise
//! engine), which is what the bottleneck-shift experiment compares. The
//! numbers in both profiles are illustrative component geometries, not
//! synthesis results.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::costmodel::{CostParams, KernelCounts, Method, PlanKind, PlanStep};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    CyclicGraph,
    UnknownKernel(String),
    UnknownProfile(String),
    MissingComponent(Component),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::CyclicGraph => write!(f, "kernel graph contains a cycle"),
            SimError::UnknownKernel(k) => write!(f, "unrecognized kernel '{k}'"),
            SimError::UnknownProfile(p) => write!(f, "unknown hardware profile '{p}'"),
            SimError::MissingComponent(c) => write!(f, "profile lacks component {c:?}"),
        }
    }
}

impl core::error::Error for SimError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    Nttu,
    Bconvu,
    HpIp,
    Ewe,
    AutoU,
}

pub const COMPONENTS: [Component; 5] = [
    Component::Nttu,
    Component::Bconvu,
    Component::HpIp,
    Component::Ewe,
    Component::AutoU,
];

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::Nttu => "NTTU",
            Component::Bconvu => "BConvU",
            Component::HpIp => "HP-IP",
            Component::Ewe => "EWE",
            Component::AutoU => "AutoU",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KernelClass {
    Ntt,
    Intt,
    Bconv,
    Ip,
    Hadamard,
    Automorph,
    ModDownFixup,
}

pub const KERNEL_CLASSES: [KernelClass; 7] = [
    KernelClass::Ntt,
    KernelClass::Intt,
    KernelClass::Bconv,
    KernelClass::Ip,
    KernelClass::Hadamard,
    KernelClass::Automorph,
    KernelClass::ModDownFixup,
];

impl KernelClass {
    pub fn name(&self) -> &'static str {
        match self {
            KernelClass::Ntt => "ntt",
            KernelClass::Intt => "intt",
            KernelClass::Bconv => "bconv",
            KernelClass::Ip => "ip",
            KernelClass::Hadamard => "hadamard",
            KernelClass::Automorph => "automorph",
            KernelClass::ModDownFixup => "moddown-fixup",
        }
    }
}

/// One hardware component: aggregate per-instance throughput in elements
/// per cycle, pipeline depth in cycles, and how many instances exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSpec {
    pub lanes: u32,
    pub elems_per_cycle: u64,
    pub pipeline_depth: u64,
    pub instances: u32,
    /// Energy weight per element-op; 0 disables energy accounting for the
    /// component.
    pub energy_per_op: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub name: String,
    pub clock_ghz: f64,
    pub specs: BTreeMap<Component, ComponentSpec>,
    /// Optional off-chip bandwidth ceiling applied as a throughput cap on
    /// the key-fetch-heavy IP kernels (elements per cycle).
    pub ip_bandwidth_cap: Option<u64>,
}

impl HardwareProfile {
    pub fn has_hp_ip(&self) -> bool {
        self.specs.contains_key(&Component::HpIp)
    }

    /// Component executing a kernel class under this profile. Inner products
    /// run on HP-IP when present, otherwise on the element-wise engine.
    pub fn component_for(&self, class: KernelClass) -> Component {
        match class {
            KernelClass::Ntt | KernelClass::Intt => Component::Nttu,
            KernelClass::Bconv | KernelClass::ModDownFixup => Component::Bconvu,
            KernelClass::Ip => {
                if self.has_hp_ip() {
                    Component::HpIp
                } else {
                    Component::Ewe
                }
            }
            KernelClass::Hadamard => Component::Ewe,
            KernelClass::Automorph => Component::AutoU,
        }
    }

    pub fn spec(&self, c: Component) -> Result<&ComponentSpec, SimError> {
        self.specs.get(&c).ok_or(SimError::MissingComponent(c))
    }
}

fn spec(lanes: u32, elems: u64, depth: u64, energy: f64) -> ComponentSpec {
    ComponentSpec {
        lanes,
        elems_per_cycle: elems,
        pipeline_depth: depth,
        instances: 1,
        energy_per_op: energy,
    }
}

/// Profile with a dedicated high-parallelism IP unit (256 VEC-PEs of 4 PEs
/// with 6 MACs each: 6144 element products per cycle).
pub fn profile_taiyi() -> HardwareProfile {
    let mut specs = BTreeMap::new();
    specs.insert(Component::Nttu, spec(1024, 512, 48, 1.9));
    specs.insert(Component::Bconvu, spec(1024, 1024, 24, 1.1));
    specs.insert(Component::HpIp, spec(1024, 6144, 32, 0.9));
    specs.insert(Component::Ewe, spec(1024, 1024, 8, 1.0));
    specs.insert(Component::AutoU, spec(1024, 2048, 16, 0.3));
    HardwareProfile {
        name: String::from("taiyi"),
        clock_ghz: 1.0,
        specs,
        ip_bandwidth_cap: None,
    }
}

/// Profile without an IP unit: inner products are routed to the
/// element-wise engine, which is what shifts the bottleneck.
pub fn profile_sharp_like() -> HardwareProfile {
    let mut specs = BTreeMap::new();
    specs.insert(Component::Nttu, spec(1024, 512, 48, 1.9));
    specs.insert(Component::Bconvu, spec(1024, 1024, 24, 1.1));
    specs.insert(Component::Ewe, spec(1024, 1024, 8, 1.0));
    specs.insert(Component::AutoU, spec(1024, 2048, 16, 0.3));
    HardwareProfile {
        name: String::from("sharp-like"),
        clock_ghz: 1.0,
        specs,
        ip_bandwidth_cap: None,
    }
}

pub fn profile_by_name(name: &str) -> Result<HardwareProfile, SimError> {
    match name {
        "taiyi" => Ok(profile_taiyi()),
        "sharp-like" | "sharp" => Ok(profile_sharp_like()),
        other => Err(SimError::UnknownProfile(String::from(other))),
    }
}

/// One kernel instruction: class, element volume, component affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelInstr {
    pub class: KernelClass,
    pub component: Component,
    /// Element volume (limbs × N).
    pub volume: u64,
}

/// Dependence graph of kernel instructions. Edges run from producers to
/// consumers; construction keeps the graph acyclic by only adding edges
/// from lower to higher node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KernelDag {
    pub nodes: Vec<KernelInstr>,
    pub preds: Vec<Vec<usize>>,
}

impl KernelDag {
    pub fn add(&mut self, instr: KernelInstr, preds: &[usize]) -> usize {
        let id = self.nodes.len();
        debug_assert!(preds.iter().all(|&p| p < id));
        debug_assert!(instr.volume > 0);
        self.nodes.push(instr);
        self.preds.push(preds.to_vec());
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn succs(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (i, preds) in self.preds.iter().enumerate() {
            for &p in preds {
                out[p].push(i);
            }
        }
        out
    }

    /// Per-class node counts, for the cross-module structural check.
    pub fn class_counts(&self) -> BTreeMap<KernelClass, usize> {
        let mut out = BTreeMap::new();
        for n in &self.nodes {
            *out.entry(n.class).or_insert(0) += 1;
        }
        out
    }
}

/// `ceil(volume / throughput) + pipeline_depth`, with the optional
/// bandwidth ceiling applied to IP kernels.
pub fn kernel_cycles(instr: &KernelInstr, profile: &HardwareProfile) -> Result<u64, SimError> {
    let s = profile.spec(instr.component)?;
    let mut tput = s.elems_per_cycle.max(1);
    if instr.class == KernelClass::Ip {
        if let Some(cap) = profile.ip_bandwidth_cap {
            tput = tput.min(cap.max(1));
        }
    }
    Ok(instr.volume.div_ceil(tput) + s.pipeline_depth)
}

// ---------------------------------------------------------------------------
// Instruction generation
// ---------------------------------------------------------------------------

/// Lowers a kernel plan into the dependence DAG. Steps that share a plan
/// group are mutually independent; each group waits on the previous one.
pub fn generate_instructions(
    plan: &[PlanStep],
    params: &CostParams,
    profile: &HardwareProfile,
) -> Result<KernelDag, SimError> {
    let mut dag = KernelDag::default();
    let n = params.n;
    let mut prev_group: Option<usize> = None;
    let mut barrier: Vec<usize> = Vec::new(); // sinks of the previous group
    let mut current_sinks: Vec<usize> = Vec::new();
    for step in plan {
        if prev_group != Some(step.group) {
            if prev_group.is_some() {
                barrier = core::mem::take(&mut current_sinks);
            }
            prev_group = Some(step.group);
        }
        let sink = lower_step(&mut dag, step, params, profile, &barrier, n);
        current_sinks.extend(sink);
    }
    Ok(dag)
}

/// Expands one plan step; returns its sink nodes.
fn lower_step(
    dag: &mut KernelDag,
    step: &PlanStep,
    params: &CostParams,
    profile: &HardwareProfile,
    barrier: &[usize],
    n: u64,
) -> Vec<usize> {
    let live = (step.level + 1) as u64;
    let ip_comp = profile.component_for(KernelClass::Ip);
    match step.kind {
        PlanKind::Tensor => {
            // Four element-wise limb products of the tensor.
            let id = dag.add(
                KernelInstr {
                    class: KernelClass::Hadamard,
                    component: Component::Ewe,
                    volume: 4 * live * n,
                },
                barrier,
            );
            vec![id]
        }
        PlanKind::Rescale => {
            let id = dag.add(
                KernelInstr {
                    class: KernelClass::ModDownFixup,
                    component: Component::Ewe,
                    volume: 2 * live * n,
                },
                barrier,
            );
            vec![id]
        }
        PlanKind::Automorph => {
            let id = dag.add(
                KernelInstr {
                    class: KernelClass::Automorph,
                    component: Component::AutoU,
                    volume: live * n,
                },
                barrier,
            );
            vec![id]
        }
        PlanKind::PtIp { alpha } => {
            let ap = params.alpha_prime_for(alpha) as u64;
            let beta = params.beta(step.level, alpha) as u64;
            let bt = params.beta_tilde(step.level, alpha);
            let mut sinks = Vec::with_capacity(bt);
            for _ in 0..bt {
                sinks.push(dag.add(
                    KernelInstr {
                        class: KernelClass::Ip,
                        component: ip_comp,
                        volume: 2 * beta * ap * n,
                    },
                    barrier,
                ));
            }
            sinks
        }
        PlanKind::ModDown => {
            let id = dag.add(
                KernelInstr {
                    class: KernelClass::ModDownFixup,
                    component: Component::Bconvu,
                    volume: 2 * live * n,
                },
                barrier,
            );
            vec![id]
        }
        PlanKind::KeySwitch { method, alpha, bsgs } => {
            lower_keyswitch(dag, step, params, method, alpha, bsgs, ip_comp, barrier, n)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn lower_keyswitch(
    dag: &mut KernelDag,
    step: &PlanStep,
    params: &CostParams,
    method: Method,
    alpha: usize,
    bsgs: bool,
    ip_comp: Component,
    barrier: &[usize],
    n: u64,
) -> Vec<usize> {
    let live = (step.level + 1) as u64;
    let ext = live + alpha as u64;
    let beta = params.beta(step.level, alpha);
    match method {
        Method::Hybrid => {
            // beta x (BConv -> NTT), 2*beta IP, 2 INTT, 1 ModDown.
            let mut ntts = Vec::with_capacity(beta);
            for _ in 0..beta {
                let b = dag.add(
                    KernelInstr {
                        class: KernelClass::Bconv,
                        component: Component::Bconvu,
                        volume: ext * n,
                    },
                    barrier,
                );
                let t = dag.add(
                    KernelInstr {
                        class: KernelClass::Ntt,
                        component: Component::Nttu,
                        volume: ext * n,
                    },
                    &[b],
                );
                ntts.push(t);
            }
            let feed = maybe_automorph(dag, bsgs, &ntts, live * n);
            let mut intts = Vec::new();
            for _ in 0..2 {
                let mut ips = Vec::with_capacity(beta);
                for _ in 0..beta {
                    ips.push(dag.add(
                        KernelInstr {
                            class: KernelClass::Ip,
                            component: ip_comp,
                            volume: ext * n,
                        },
                        &feed,
                    ));
                }
                intts.push(dag.add(
                    KernelInstr {
                        class: KernelClass::Intt,
                        component: Component::Nttu,
                        volume: ext * n,
                    },
                    &ips,
                ));
            }
            let md = dag.add(
                KernelInstr {
                    class: KernelClass::ModDownFixup,
                    component: Component::Bconvu,
                    volume: 2 * live * n,
                },
                &intts,
            );
            vec![md]
        }
        Method::Klss => {
            let ap = params.alpha_prime_for(alpha) as u64;
            let bt = params.beta_tilde(step.level, alpha);
            // Gadget-decomp: beta x (BConv -> NTT) onto alpha' limbs.
            let mut ntts = Vec::with_capacity(beta);
            for _ in 0..beta {
                let b = dag.add(
                    KernelInstr {
                        class: KernelClass::Bconv,
                        component: Component::Bconvu,
                        volume: ap * n,
                    },
                    barrier,
                );
                let t = dag.add(
                    KernelInstr {
                        class: KernelClass::Ntt,
                        component: Component::Nttu,
                        volume: ap * n,
                    },
                    &[b],
                );
                ntts.push(t);
            }
            let feed = maybe_automorph(dag, bsgs, &ntts, ap * n * beta as u64);
            // IP: 2*bt*beta accumulations; recover: bt INTT + bt BConv.
            let mut recover_sinks = Vec::with_capacity(bt);
            for _ in 0..bt {
                let mut ips = Vec::with_capacity(2 * beta);
                for _ in 0..2 * beta {
                    ips.push(dag.add(
                        KernelInstr {
                            class: KernelClass::Ip,
                            component: ip_comp,
                            volume: ap * n,
                        },
                        &feed,
                    ));
                }
                let intt = dag.add(
                    KernelInstr {
                        class: KernelClass::Intt,
                        component: Component::Nttu,
                        volume: 2 * ap * n,
                    },
                    &ips,
                );
                recover_sinks.push(dag.add(
                    KernelInstr {
                        class: KernelClass::Bconv,
                        component: Component::Bconvu,
                        volume: 2 * ap * n,
                    },
                    &[intt],
                ));
            }
            let md = dag.add(
                KernelInstr {
                    class: KernelClass::ModDownFixup,
                    component: Component::Bconvu,
                    volume: 2 * live * n,
                },
                &recover_sinks,
            );
            vec![md]
        }
    }
}

/// For BSGS-marked rotations an AutoU permutation sits between the NTT
/// stage and the inner product.
fn maybe_automorph(dag: &mut KernelDag, bsgs: bool, ntts: &[usize], volume: u64) -> Vec<usize> {
    if !bsgs {
        return ntts.to_vec();
    }
    let a = dag.add(
        KernelInstr {
            class: KernelClass::Automorph,
            component: Component::AutoU,
            volume,
        },
        ntts,
    );
    vec![a]
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    Serial,
    Parallel,
}

impl SimMode {
    pub fn name(&self) -> &'static str {
        match self {
            SimMode::Serial => "serial",
            SimMode::Parallel => "parallel",
        }
    }
}

/// Simulation result; deterministic for identical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mode: SimMode,
    pub profile: String,
    pub total_cycles: u64,
    pub critical_path_cycles: u64,
    pub node_count: usize,
    /// `(component, busy_cycles, element_volume, utilization)`.
    pub per_component: Vec<(Component, u64, u64, f64)>,
    /// `(class, busy_cycles, element_volume)`.
    pub per_class: Vec<(KernelClass, u64, u64)>,
}

impl SimReport {
    pub fn busy_of(&self, c: Component) -> u64 {
        self.per_component
            .iter()
            .find(|e| e.0 == c)
            .map(|e| e.1)
            .unwrap_or(0)
    }

    pub fn class_cycles(&self, k: KernelClass) -> u64 {
        self.per_class
            .iter()
            .find(|e| e.0 == k)
            .map(|e| e.1)
            .unwrap_or(0)
    }
}

/// Topological order via Kahn's algorithm with node-id tie-break.
fn topo_order(dag: &KernelDag) -> Result<Vec<usize>, SimError> {
    let succs = dag.succs();
    let mut indeg: Vec<usize> = dag.preds.iter().map(|p| p.len()).collect();
    let mut ready: alloc::collections::BinaryHeap<core::cmp::Reverse<usize>> = indeg
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| core::cmp::Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(dag.len());
    while let Some(core::cmp::Reverse(i)) = ready.pop() {
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push(core::cmp::Reverse(s));
            }
        }
    }
    if order.len() != dag.len() {
        return Err(SimError::CyclicGraph);
    }
    Ok(order)
}

/// Runs the DAG on a profile. Serial: one kernel at a time, total is the
/// sum of kernel cycles. Parallel: greedy list scheduling over component
/// instances, earliest-ready-first, FIFO tie-break.
pub fn execute(dag: &KernelDag, profile: &HardwareProfile, mode: SimMode) -> Result<SimReport, SimError> {
    let order = topo_order(dag)?;
    let cycles: Vec<u64> = dag
        .nodes
        .iter()
        .map(|n| kernel_cycles(n, profile))
        .collect::<Result<_, _>>()?;

    // Critical path (sum of cycles along the longest dependency chain).
    let mut cp = vec![0u64; dag.len()];
    for &i in &order {
        let base = dag.preds[i].iter().map(|&p| cp[p]).max().unwrap_or(0);
        cp[i] = base + cycles[i];
    }
    let critical = cp.iter().copied().max().unwrap_or(0);

    let total = match mode {
        SimMode::Serial => cycles.iter().sum(),
        SimMode::Parallel => {
            let succs = dag.succs();
            let mut indeg: Vec<usize> = dag.preds.iter().map(|p| p.len()).collect();
            let mut data_ready = vec![0u64; dag.len()];
            let mut heap: alloc::collections::BinaryHeap<core::cmp::Reverse<(u64, usize)>> = indeg
                .iter()
                .enumerate()
                .filter(|(_, &d)| d == 0)
                .map(|(i, _)| core::cmp::Reverse((0u64, i)))
                .collect();
            let mut pools: BTreeMap<Component, Vec<u64>> = BTreeMap::new();
            for (c, s) in &profile.specs {
                pools.insert(*c, vec![0u64; s.instances.max(1) as usize]);
            }
            let mut finish = vec![0u64; dag.len()];
            let mut done = 0usize;
            let mut makespan = 0u64;
            while let Some(core::cmp::Reverse((ready_at, i))) = heap.pop() {
                let pool = pools
                    .get_mut(&dag.nodes[i].component)
                    .ok_or(SimError::MissingComponent(dag.nodes[i].component))?;
                let slot = pool
                    .iter_mut()
                    .min()
                    .expect("component pools are never empty");
                let start = ready_at.max(*slot);
                let end = start + cycles[i];
                *slot = end;
                finish[i] = end;
                makespan = makespan.max(end);
                done += 1;
                for &s in &succs[i] {
                    indeg[s] -= 1;
                    data_ready[s] = data_ready[s].max(end);
                    if indeg[s] == 0 {
                        heap.push(core::cmp::Reverse((data_ready[s], s)));
                    }
                }
            }
            if done != dag.len() {
                return Err(SimError::CyclicGraph);
            }
            makespan
        }
    };

    let mut comp_busy: BTreeMap<Component, (u64, u64)> = BTreeMap::new();
    let mut class_busy: BTreeMap<KernelClass, (u64, u64)> = BTreeMap::new();
    for (node, &c) in dag.nodes.iter().zip(&cycles) {
        let e = comp_busy.entry(node.component).or_insert((0, 0));
        e.0 += c;
        e.1 += node.volume;
        let e = class_busy.entry(node.class).or_insert((0, 0));
        e.0 += c;
        e.1 += node.volume;
    }
    let per_component = COMPONENTS
        .iter()
        .filter(|c| profile.specs.contains_key(c))
        .map(|&c| {
            let (busy, vol) = comp_busy.get(&c).copied().unwrap_or((0, 0));
            let inst = profile.specs[&c].instances.max(1) as u64;
            let util = if total == 0 {
                0.0
            } else {
                busy as f64 / (total * inst) as f64
            };
            (c, busy, vol, util)
        })
        .collect();
    let per_class = KERNEL_CLASSES
        .iter()
        .filter_map(|&k| class_busy.get(&k).map(|&(b, v)| (k, b, v)))
        .collect();
    Ok(SimReport {
        mode,
        profile: profile.name.clone(),
        total_cycles: total,
        critical_path_cycles: critical,
        node_count: dag.len(),
        per_component,
        per_class,
    })
}

/// Per-kernel-class share of total busy cycles; shares sum to 1 (empty
/// table for an empty report).
pub fn breakdown_report(report: &SimReport) -> Vec<(KernelClass, f64)> {
    let total: u64 = report.per_class.iter().map(|e| e.1).sum();
    if total == 0 {
        return Vec::new();
    }
    report
        .per_class
        .iter()
        .map(|&(k, b, _)| (k, b as f64 / total as f64))
        .collect()
}

/// Energy estimate: element volume per component × its configured weight.
/// Zero when all weights are absent.
pub fn energy_report(report: &SimReport, profile: &HardwareProfile) -> f64 {
    report
        .per_component
        .iter()
        .map(|&(c, _, vol, _)| {
            let w = profile.specs.get(&c).map(|s| s.energy_per_op).unwrap_or(0.0);
            vol as f64 * w
        })
        .sum()
}

/// Structural cross-check helper: per-class node counts of a single
/// key-switch expansion must match the cost model's kernel multiset.
pub fn keyswitch_node_counts(
    params: &CostParams,
    profile: &HardwareProfile,
    method: Method,
    level: usize,
    alpha: usize,
) -> KernelCounts {
    let step = PlanStep {
        kind: PlanKind::KeySwitch {
            method,
            alpha,
            bsgs: false,
        },
        level,
        group: 0,
    };
    let dag = generate_instructions(&[step], params, profile).unwrap();
    let counts = dag.class_counts();
    KernelCounts {
        bconv: counts.get(&KernelClass::Bconv).copied().unwrap_or(0),
        ntt: counts.get(&KernelClass::Ntt).copied().unwrap_or(0),
        ip: counts.get(&KernelClass::Ip).copied().unwrap_or(0),
        intt: counts.get(&KernelClass::Intt).copied().unwrap_or(0),
        moddown: counts.get(&KernelClass::ModDownFixup).copied().unwrap_or(0),
    }
}

// ---------------------------------------------------------------------------
// Built-in workloads
// ---------------------------------------------------------------------------

pub mod workloads {
    //! Parameterized HE-op approximations of the benchmark applications.
    //! These reproduce the op mix and dependence shape, not bit-exact
    //! numerics; absolute latencies of the originals are out of scope.

    use super::super::costmodel::{HeOp, L_BOOT};
    use alloc::string::String;
    use alloc::vec::Vec;

    /// One full bootstrapping invocation (CtS, EvalMod, StC pattern).
    pub fn bootstrapping() -> Vec<HeOp> {
        alloc::vec![HeOp::Bootstrap]
    }

    /// Iterated logistic-regression style batches: per iteration a BSGS
    /// rotation batch, two multiplications and a constant multiplication.
    pub fn helr_like(iterations: usize, max_level: usize) -> Vec<HeOp> {
        let mut ops = Vec::new();
        let mut budget = max_level.saturating_sub(L_BOOT);
        for _ in 0..iterations {
            if budget < 3 {
                ops.push(HeOp::Bootstrap);
                budget = max_level - L_BOOT;
            }
            ops.push(HeOp::RotateBatch {
                count: 8,
                bsgs: true,
            });
            ops.push(HeOp::HMult);
            ops.push(HeOp::HMult);
            ops.push(HeOp::CMult);
            budget -= 3;
        }
        ops
    }

    /// Convolution-as-rotations blocks: per layer a 3x3 rotation batch, a
    /// squaring activation and a rescaling constant multiplication.
    pub fn resnet_like(layers: usize, max_level: usize) -> Vec<HeOp> {
        let mut ops = Vec::new();
        let mut budget = max_level.saturating_sub(L_BOOT);
        for _ in 0..layers {
            if budget < 2 {
                ops.push(HeOp::Bootstrap);
                budget = max_level - L_BOOT;
            }
            ops.push(HeOp::RotateBatch {
                count: 9,
                bsgs: true,
            });
            ops.push(HeOp::HMult);
            ops.push(HeOp::CMult);
            budget -= 2;
        }
        ops
    }

    pub fn by_name(name: &str, max_level: usize) -> Result<Vec<HeOp>, super::SimError> {
        match name {
            "bootstrapping" => Ok(bootstrapping()),
            "helr" => Ok(helr_like(8, max_level)),
            "resnet" => Ok(resnet_like(10, max_level)),
            other => Err(super::SimError::UnknownKernel(String::from(other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::{compile_app, select_alpha_per_level, HeOp};

    fn eval_params() -> CostParams {
        CostParams::evaluation_instance()
    }

    fn rng_stream(seed: u64) -> impl FnMut() -> u64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            s ^ (s >> 31)
        }
    }

    fn random_dag(nodes: usize, seed: u64, profile: &HardwareProfile) -> KernelDag {
        let mut next = rng_stream(seed);
        let mut dag = KernelDag::default();
        for i in 0..nodes {
            let class = KERNEL_CLASSES[(next() % 7) as usize];
            let component = profile.component_for(class);
            let volume = 1 + next() % 100_000;
            let mut preds = Vec::new();
            if i > 0 {
                for p in 0..i {
                    if next() % 10 < 2 {
                        preds.push(p);
                    }
                }
            }
            dag.add(
                KernelInstr {
                    class,
                    component,
                    volume,
                },
                &preds,
            );
        }
        dag
    }

    #[test]
    fn kernel_cycles_formula() {
        let profile = profile_taiyi();
        // Volume equal to one cycle's throughput: 1 + depth.
        let s = profile.spec(Component::Nttu).unwrap();
        let instr = KernelInstr {
            class: KernelClass::Ntt,
            component: Component::Nttu,
            volume: s.elems_per_cycle,
        };
        assert_eq!(
            kernel_cycles(&instr, &profile).unwrap(),
            1 + s.pipeline_depth
        );
        // Zero-multiplication automorph of one limb.
        let a = profile.spec(Component::AutoU).unwrap();
        let n = 1u64 << 16;
        let instr = KernelInstr {
            class: KernelClass::Automorph,
            component: Component::AutoU,
            volume: n,
        };
        assert_eq!(
            kernel_cycles(&instr, &profile).unwrap(),
            n.div_ceil(a.elems_per_cycle) + a.pipeline_depth
        );
        // NTT of one limb at N = 2^16 on a 256-lane NTTU profile.
        let mut narrow = profile_taiyi();
        narrow.specs.insert(Component::Nttu, spec(256, 256, 40, 0.0));
        let instr = KernelInstr {
            class: KernelClass::Ntt,
            component: Component::Nttu,
            volume: n,
        };
        assert_eq!(kernel_cycles(&instr, &narrow).unwrap(), 65536 / 256 + 40);
    }

    #[test]
    fn two_independent_kernels_serial_vs_parallel() {
        let profile = profile_taiyi();
        let mut dag = KernelDag::default();
        dag.add(
            KernelInstr {
                class: KernelClass::Ntt,
                component: Component::Nttu,
                volume: 4096,
            },
            &[],
        );
        dag.add(
            KernelInstr {
                class: KernelClass::Hadamard,
                component: Component::Ewe,
                volume: 4096,
            },
            &[],
        );
        let c0 = kernel_cycles(&dag.nodes[0], &profile).unwrap();
        let c1 = kernel_cycles(&dag.nodes[1], &profile).unwrap();
        let serial = execute(&dag, &profile, SimMode::Serial).unwrap();
        let parallel = execute(&dag, &profile, SimMode::Parallel).unwrap();
        assert_eq!(serial.total_cycles, c0 + c1);
        assert_eq!(parallel.total_cycles, c0.max(c1));
    }

    #[test]
    fn dependent_chain_no_overlap() {
        let profile = profile_taiyi();
        let mut dag = KernelDag::default();
        let a = dag.add(
            KernelInstr {
                class: KernelClass::Bconv,
                component: Component::Bconvu,
                volume: 10_000,
            },
            &[],
        );
        let b = dag.add(
            KernelInstr {
                class: KernelClass::Ntt,
                component: Component::Nttu,
                volume: 10_000,
            },
            &[a],
        );
        dag.add(
            KernelInstr {
                class: KernelClass::Ip,
                component: Component::HpIp,
                volume: 10_000,
            },
            &[b],
        );
        let serial = execute(&dag, &profile, SimMode::Serial).unwrap();
        let parallel = execute(&dag, &profile, SimMode::Parallel).unwrap();
        assert_eq!(serial.total_cycles, parallel.total_cycles);
        assert_eq!(parallel.total_cycles, parallel.critical_path_cycles);
    }

    #[test]
    fn invariants_on_random_dags() {
        let profile = profile_taiyi();
        for seed in 0..100u64 {
            let dag = random_dag(40, 1000 + seed, &profile);
            let serial = execute(&dag, &profile, SimMode::Serial).unwrap();
            let parallel = execute(&dag, &profile, SimMode::Parallel).unwrap();
            // Conservation.
            let sum: u64 = dag
                .nodes
                .iter()
                .map(|n| kernel_cycles(n, &profile).unwrap())
                .sum();
            assert_eq!(serial.total_cycles, sum);
            // Bounds.
            assert!(parallel.total_cycles >= parallel.critical_path_cycles);
            assert!(parallel.total_cycles <= serial.total_cycles);
            let max_busy = parallel.per_component.iter().map(|e| e.1).max().unwrap();
            assert!(parallel.total_cycles >= max_busy);
            // Utilization in range.
            for &(_, _, _, u) in &parallel.per_component {
                assert!((0.0..=1.0).contains(&u));
            }
            // Determinism.
            let again = execute(&dag, &profile, SimMode::Parallel).unwrap();
            assert_eq!(parallel, again);
        }
    }

    #[test]
    fn resource_augmentation_is_monotone() {
        let base = profile_taiyi();
        let mut boosted = base.clone();
        for s in boosted.specs.values_mut() {
            s.instances = 2;
        }
        for seed in 0..60u64 {
            let dag = random_dag(30, 7000 + seed, &base);
            let one = execute(&dag, &base, SimMode::Parallel).unwrap();
            let two = execute(&dag, &boosted, SimMode::Parallel).unwrap();
            assert!(
                two.total_cycles <= one.total_cycles,
                "seed {seed}: {} > {}",
                two.total_cycles,
                one.total_cycles
            );
        }
    }

    #[test]
    fn breakdown_shares_sum_to_one() {
        let profile = profile_taiyi();
        let dag = random_dag(25, 99, &profile);
        let report = execute(&dag, &profile, SimMode::Serial).unwrap();
        let shares = breakdown_report(&report);
        let total: f64 = shares.iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-9);

        // Single-class DAG -> share 1.0.
        let mut dag = KernelDag::default();
        dag.add(
            KernelInstr {
                class: KernelClass::Ip,
                component: Component::HpIp,
                volume: 100,
            },
            &[],
        );
        let report = execute(&dag, &profile, SimMode::Serial).unwrap();
        let shares = breakdown_report(&report);
        assert_eq!(shares.len(), 1);
        assert!((shares[0].1 - 1.0).abs() < 1e-12);

        // Empty -> empty.
        let report = execute(&KernelDag::default(), &profile, SimMode::Serial).unwrap();
        assert!(breakdown_report(&report).is_empty());
    }

    #[test]
    fn energy_scaling() {
        let mut profile = profile_taiyi();
        let dag = random_dag(20, 5, &profile);
        let report = execute(&dag, &profile, SimMode::Serial).unwrap();
        let base = energy_report(&report, &profile);
        assert!(base > 0.0);
        // Doubling all weights doubles the total.
        let mut doubled = profile.clone();
        for s in doubled.specs.values_mut() {
            s.energy_per_op *= 2.0;
        }
        let twice = energy_report(&report, &doubled);
        assert!((twice - 2.0 * base).abs() < 1e-6 * base);
        // Zero weights -> zero.
        for s in profile.specs.values_mut() {
            s.energy_per_op = 0.0;
        }
        assert_eq!(energy_report(&report, &profile), 0.0);
    }

    #[test]
    fn energy_component_ratios_stable_under_scaling() {
        let profile = profile_taiyi();
        let p = eval_params();
        let schedule = select_alpha_per_level(&p);
        let ops = workloads::resnet_like(4, p.max_level);
        let plan = compile_app(&ops, &p, &schedule).unwrap();
        let dag = generate_instructions(&plan.steps, &p, &profile).unwrap();
        let report = execute(&dag, &profile, SimMode::Serial).unwrap();
        let vols: Vec<f64> = report.per_component.iter().map(|e| e.2 as f64).collect();
        let mut scaled = profile.clone();
        for s in scaled.specs.values_mut() {
            s.energy_per_op *= 3.5;
        }
        let e1 = energy_report(&report, &profile);
        let e2 = energy_report(&report, &scaled);
        assert!((e2 / e1 - 3.5).abs() < 1e-9);
        // Ratios between per-component contributions are weight-scaling
        // invariant because the volumes are unchanged.
        assert!(!vols.is_empty());
    }

    #[test]
    fn keyswitch_nodes_match_cost_model_multiset() {
        let p = eval_params();
        let profile = profile_taiyi();
        for level in [3usize, 17, 38] {
            for method in [Method::Hybrid, Method::Klss] {
                let got = keyswitch_node_counts(&p, &profile, method, level, p.alpha);
                let want = crate::costmodel::kernel_multiset(&p, method, level, p.alpha);
                assert_eq!(got.ntt, want.ntt, "{method:?} level {level}");
                assert_eq!(got.ip, want.ip, "{method:?} level {level}");
                assert_eq!(got.intt, want.intt, "{method:?} level {level}");
                assert_eq!(got.moddown, want.moddown, "{method:?} level {level}");
                assert_eq!(got.bconv, want.bconv, "{method:?} level {level}");
            }
        }
    }

    #[test]
    fn bsgs_rotation_inserts_autou_between_ntt_and_ip() {
        let p = eval_params();
        let profile = profile_taiyi();
        let step = PlanStep {
            kind: PlanKind::KeySwitch {
                method: Method::Klss,
                alpha: p.alpha,
                bsgs: true,
            },
            level: 30,
            group: 0,
        };
        let dag = generate_instructions(&[step], &p, &profile).unwrap();
        let auto_idx = dag
            .nodes
            .iter()
            .position(|n| n.class == KernelClass::Automorph)
            .expect("bsgs key switch must contain an AutoU node");
        // Predecessors of the AutoU node are NTT nodes; its successors are
        // IP nodes.
        assert!(dag.preds[auto_idx]
            .iter()
            .all(|&pr| dag.nodes[pr].class == KernelClass::Ntt));
        let succs = dag.succs();
        assert!(!succs[auto_idx].is_empty());
        assert!(succs[auto_idx]
            .iter()
            .all(|&s| dag.nodes[s].class == KernelClass::Ip));
    }

    #[test]
    fn empty_plan_empty_dag() {
        let p = eval_params();
        let profile = profile_taiyi();
        let dag = generate_instructions(&[], &p, &profile).unwrap();
        assert!(dag.is_empty());
    }

    #[test]
    fn cyclic_graph_detected() {
        let profile = profile_taiyi();
        let mut dag = KernelDag::default();
        dag.add(
            KernelInstr {
                class: KernelClass::Ntt,
                component: Component::Nttu,
                volume: 1,
            },
            &[],
        );
        dag.add(
            KernelInstr {
                class: KernelClass::Ntt,
                component: Component::Nttu,
                volume: 1,
            },
            &[0],
        );
        // Force a cycle behind the builder's back.
        dag.preds[0].push(1);
        assert_eq!(
            execute(&dag, &profile, SimMode::Serial).unwrap_err(),
            SimError::CyclicGraph
        );
    }

    #[test]
    fn bottleneck_shift_on_sharp_like() {
        let p = eval_params();
        let schedule = select_alpha_per_level(&p);
        let plan = compile_app(&workloads::bootstrapping(), &p, &schedule).unwrap();
        let profile = profile_sharp_like();
        let dag = generate_instructions(&plan.steps, &p, &profile).unwrap();
        let report = execute(&dag, &profile, SimMode::Serial).unwrap();
        let ip = report.class_cycles(KernelClass::Ip);
        let ntt = report.class_cycles(KernelClass::Ntt) + report.class_cycles(KernelClass::Intt);
        assert!(ip > ntt, "IP busy share {ip} must exceed NTT {ntt}");
    }

    #[test]
    fn taiyi_parallel_speedup_band() {
        let p = eval_params();
        let schedule = select_alpha_per_level(&p);
        let plan = compile_app(&workloads::bootstrapping(), &p, &schedule).unwrap();
        let profile = profile_taiyi();
        let dag = generate_instructions(&plan.steps, &p, &profile).unwrap();
        let serial = execute(&dag, &profile, SimMode::Serial).unwrap();
        let parallel = execute(&dag, &profile, SimMode::Parallel).unwrap();
        let speedup = serial.total_cycles as f64 / parallel.total_cycles as f64;
        assert!(
            (1.5..=5.0).contains(&speedup),
            "speedup {speedup:.2} outside [1.5, 5.0]"
        );
    }

    #[test]
    fn ip_bandwidth_cap_slows_ip_only(){
        let p = eval_params();
        let schedule = select_alpha_per_level(&p);
        let plan = compile_app(&workloads::bootstrapping(), &p, &schedule).unwrap();
        let mut profile = profile_taiyi();
        let dag = generate_instructions(&plan.steps, &p, &profile).unwrap();
        let base = execute(&dag, &profile, SimMode::Serial).unwrap();
        profile.ip_bandwidth_cap = Some(64);
        let capped = execute(&dag, &profile, SimMode::Serial).unwrap();
        assert!(capped.class_cycles(KernelClass::Ip) > base.class_cycles(KernelClass::Ip));
        assert_eq!(
            capped.class_cycles(KernelClass::Ntt),
            base.class_cycles(KernelClass::Ntt)
        );
    }

    #[test]
    fn unknown_profile_and_workload() {
        assert!(matches!(
            profile_by_name("nope"),
            Err(SimError::UnknownProfile(_))
        ));
        assert!(matches!(
            workloads::by_name("nope", 38),
            Err(SimError::UnknownKernel(_))
        ));
        assert!(profile_by_name("taiyi").is_ok());
        assert!(profile_by_name("sharp-like").is_ok());
    }

    #[test]
    fn workload_generators_compile() {
        let p = eval_params();
        let schedule = select_alpha_per_level(&p);
        for name in ["bootstrapping", "helr", "resnet"] {
            let ops = workloads::by_name(name, p.max_level).unwrap();
            let plan = compile_app(&ops, &p, &schedule).unwrap();
            assert!(!plan.steps.is_empty(), "{name}");
        }
        // HMult-only sequence too deep for the budget must underflow.
        let too_deep = vec![HeOp::HMult; p.max_level + 2];
        assert!(compile_app(&too_deep, &p, &schedule).is_err());
    }
}
