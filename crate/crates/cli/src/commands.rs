//! Drivers behind the `ksw` subcommands. Each driver consumes a parsed
//! config plus the shared flags, emits its artifacts through a
//! [`RunManifest`], and reports pass/fail for the exit-status contract
//! (exit 0 iff every suite and assertion passed).

use std::path::{Path, PathBuf};

use ksw_core::costmodel::{
    self, compile_app, dnum_sweep_normalized, ekey_memory_requirement, lifetime_total,
    modmul_count_hybrid, modmul_count_klss, select_alpha_per_level, CostParams,
    CostProportionalTiming, Method,
};
use ksw_core::hwsim::{
    self, breakdown_report, energy_report, execute, generate_instructions, profile_by_name,
    Component, ComponentSpec, HardwareProfile, SimMode,
};
use ksw_core::keyswitch::{
    gen_swk_hybrid, gen_swk_klss, keygen, keyswitch_hybrid, keyswitch_klss,
    keyswitch_residual_log2, noise_bound_log2, KswParams,
};
use ksw_core::modring::find_ntt_prime;
use ksw_core::ntt::{
    ntt_forward, ntt_inverse, twiddle_schedule, Domain, MultiStage, NttVariant, PolyVector,
};
use ksw_core::rns::crt_reconstruct;

use crate::config::{Config, ConfigError};
use crate::manifest::RunManifest;
use crate::report::{fmt_f64, Csv, Json};

#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    Params(String),
    Io(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Usage(m) => write!(f, "usage error: {m}"),
            CmdError::Params(m) => write!(f, "parameter error: {m}"),
            CmdError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Params(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn wants_csv(&self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn wants_json(&self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
}

#[derive(Debug, Default)]
pub struct CmdOutcome {
    pub pass: bool,
    pub lines: Vec<String>,
}

fn load_config(common: &CommonArgs) -> Result<Config, CmdError> {
    match &common.config {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn manifest_for(name: &str, common: &CommonArgs, cfg: &Config) -> RunManifest {
    let m = RunManifest::new(name, common.seed, &common.out);
    match &common.config {
        Some(p) => m.with_config(p, &cfg.raw),
        None => m,
    }
}

/// Emits one tabular artifact as CSV and/or JSON (array of row objects).
fn emit_table(
    manifest: &mut RunManifest,
    format: Format,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CmdError> {
    if format.wants_csv() {
        let mut csv = Csv::new(header);
        for row in rows {
            csv.row(row);
        }
        manifest.emit(&format!("{name}.csv"), &csv.into_string())?;
    }
    if format.wants_json() {
        let items = rows
            .iter()
            .map(|row| {
                Json::Object(
                    header
                        .iter()
                        .zip(row)
                        .map(|(k, v)| (k.to_string(), Json::Str(v.clone())))
                        .collect(),
                )
            })
            .collect();
        manifest.emit(&format!("{name}.json"), &Json::Array(items).render())?;
    }
    Ok(())
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// ntt-verify
// ---------------------------------------------------------------------------

/// Runs the variant-equivalence, roundtrip, convolution and fixed-twiddle
/// suites across the configured sizes.
pub fn cmd_ntt_verify(common: &CommonArgs) -> Result<CmdOutcome, CmdError> {
    let cfg = load_config(common)?;
    let n_list = cfg.usize_list_or("n_list", &[16, 64, 256, 1024, 4096])?;
    if n_list.is_empty() {
        return Err(CmdError::Usage("n_list must not be empty".into()));
    }
    let primes = cfg.usize_or("primes", 3)?;
    let inputs = cfg.usize_or("inputs", 5)?;
    let word_bits = cfg.u32_or("word_bits", 28)?;
    let conv_max = cfg.usize_or("convolution_max_n", 128)?;
    let inject_fault = cfg.bool_or("inject_twiddle_fault", false)?;

    let mut rng = common.seed;
    let mut suites: Vec<(&str, usize, usize)> = Vec::new(); // (name, cases, passed)
    let mut equiv = (0usize, 0usize);
    let mut roundtrip = (0usize, 0usize);
    let mut conv = (0usize, 0usize);
    let mut twiddle = (0usize, 0usize);

    for &n in &n_list {
        for pi in 0..primes {
            let ctx = find_ntt_prime(word_bits, n, pi)
                .map_err(|e| CmdError::Params(format!("N={n}: {e}")))?;
            let ss = twiddle_schedule(NttVariant::Standard, &ctx, None).unwrap();
            let sf = twiddle_schedule(NttVariant::FourStep, &ctx, None).unwrap();
            let mut sm = twiddle_schedule(NttVariant::MultiStep, &ctx, None).unwrap();
            if inject_fault {
                sm.inject_twiddle_fault();
            }
            // Fixed-twiddle structural suite: layer invariance + closed-form
            // regeneration for the three shared-bank stages.
            for stage in [MultiStage::N12Ntt, MultiStage::N21Ntt, MultiStage::N22Ntt] {
                twiddle.0 += 1;
                let layers = sm.fixed_stage_layers(stage).unwrap();
                let ok = layers.iter().all(|l| l == &layers[0])
                    && layers[0]
                        .iter()
                        .enumerate()
                        .all(|(i, &w)| sm.regenerate_fixed_entry(i) == Some(w));
                twiddle.1 += usize::from(ok);
            }
            for _ in 0..inputs {
                let p = PolyVector::coefficient(
                    (0..n).map(|_| splitmix(&mut rng) % ctx.q).collect(),
                );
                let a = ntt_forward(NttVariant::Standard, &p, &ctx, &ss).unwrap();
                let b = ntt_forward(NttVariant::FourStep, &p, &ctx, &sf).unwrap();
                let c = ntt_forward(NttVariant::MultiStep, &p, &ctx, &sm).unwrap();
                equiv.0 += 1;
                equiv.1 += usize::from(a.coeffs == b.coeffs && a.coeffs == c.coeffs);
                for (variant, sched) in [
                    (NttVariant::Standard, &ss),
                    (NttVariant::FourStep, &sf),
                    (NttVariant::MultiStep, &sm),
                ] {
                    let fwd = ntt_forward(variant, &p, &ctx, sched).unwrap();
                    let back = ntt_inverse(variant, &fwd, &ctx, sched).unwrap();
                    roundtrip.0 += 1;
                    roundtrip.1 += usize::from(back.coeffs == p.coeffs);
                }
                if n <= conv_max {
                    let y = PolyVector::coefficient(
                        (0..n).map(|_| splitmix(&mut rng) % ctx.q).collect(),
                    );
                    let fx = ntt_forward(NttVariant::MultiStep, &p, &ctx, &sm).unwrap();
                    let fy = ntt_forward(NttVariant::MultiStep, &y, &ctx, &sm).unwrap();
                    let had = PolyVector::evaluation(
                        fx.coeffs
                            .iter()
                            .zip(&fy.coeffs)
                            .map(|(&u, &v)| ctx.mul(u, v))
                            .collect(),
                    );
                    let got = ntt_inverse(NttVariant::MultiStep, &had, &ctx, &sm).unwrap();
                    let want = ksw_core::ntt::negacyclic_schoolbook(&p.coeffs, &y.coeffs, &ctx);
                    conv.0 += 1;
                    conv.1 += usize::from(got.coeffs == want);
                }
            }
        }
    }
    suites.push(("variant_equivalence", equiv.0, equiv.1));
    suites.push(("roundtrip", roundtrip.0, roundtrip.1));
    suites.push(("convolution", conv.0, conv.1));
    suites.push(("fixed_twiddle", twiddle.0, twiddle.1));

    let mut manifest = manifest_for("ntt-verify", common, &cfg);
    let rows: Vec<Vec<String>> = suites
        .iter()
        .map(|(name, cases, passed)| {
            vec![name.to_string(), cases.to_string(), passed.to_string()]
        })
        .collect();
    emit_table(
        &mut manifest,
        common.format,
        "ntt_verify",
        &["suite", "cases", "passed"],
        &rows,
    )?;
    manifest.finalize()?;

    let pass = suites.iter().all(|(_, cases, passed)| cases == passed);
    let lines = suites
        .iter()
        .map(|(name, cases, passed)| {
            format!(
                "[{}] {name}: {passed}/{cases}",
                if cases == passed { "pass" } else { "FAIL" }
            )
        })
        .collect();
    Ok(CmdOutcome { pass, lines })
}

// ---------------------------------------------------------------------------
// ksw-verify
// ---------------------------------------------------------------------------

/// Key-switch correctness for both methods plus hybrid/KLSS agreement at
/// desk-scale parameters; emits the per-trial noise table.
pub fn cmd_ksw_verify(common: &CommonArgs) -> Result<CmdOutcome, CmdError> {
    let cfg = load_config(common)?;
    let n = cfg.usize_or("n", 512)?;
    let max_level = cfg.usize_or("max_level", 8)?;
    let dnum = cfg.usize_or("dnum", 2)?;
    let alpha_prime = cfg.usize_or("alpha_prime", 2)?;
    let h = cfg.usize_or("h", 64)?;
    let word_bits = cfg.u32_or("word_bits", 28)?;
    let trials = cfg.usize_or("trials", 20)?;
    if h > n {
        return Err(CmdError::Params(format!("secret weight {h} exceeds degree {n}")));
    }
    let params = KswParams::new(n, word_bits, max_level, dnum, alpha_prime, h)
        .map_err(|e| CmdError::Params(e.to_string()))?;
    let s_from = keygen(&params, common.seed ^ 1).map_err(|e| CmdError::Params(e.to_string()))?;
    let s_to = keygen(&params, common.seed ^ 2).map_err(|e| CmdError::Params(e.to_string()))?;
    let swk_h = gen_swk_hybrid(&s_from, &s_to, &params, common.seed ^ 3);
    let swk_k = gen_swk_klss(&s_from, &s_to, &params, common.seed ^ 3);

    let mut rng = common.seed;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut pass = true;
    for level in [max_level, max_level / 2] {
        let bound = noise_bound_log2(&params, level, params.alpha);
        for trial in 0..trials {
            let live = params.basis().q_live(level).to_vec();
            let d = ksw_core::rns::RnsPolynomial {
                limbs: live
                    .iter()
                    .map(|c| (0..n).map(|_| splitmix(&mut rng) % c.q).collect())
                    .collect(),
                ctxs: live,
                level,
                domain: Domain::Coefficient,
            };
            let out_h = keyswitch_hybrid(&d, &swk_h, &params)
                .map_err(|e| CmdError::Params(e.to_string()))?;
            let out_k = keyswitch_klss(&d, &swk_k, &params)
                .map_err(|e| CmdError::Params(e.to_string()))?;
            let res_h = keyswitch_residual_log2(&d, &s_from, &s_to, &out_h, &params);
            let res_k = keyswitch_residual_log2(&d, &s_from, &s_to, &out_k, &params);
            // Agreement: decryption difference of the two methods.
            let zero_ref: Vec<num_bigint::BigInt> = vec![num_bigint::BigInt::from(0); n];
            let mut diff0 = out_h.c0.clone();
            let mut diff1 = out_h.c1.clone();
            for (l, c) in diff0.ctxs.clone().iter().enumerate() {
                for i in 0..n {
                    diff0.limbs[l][i] = c.sub(diff0.limbs[l][i], out_k.c0.limbs[l][i]);
                    diff1.limbs[l][i] = c.sub(diff1.limbs[l][i], out_k.c1.limbs[l][i]);
                }
            }
            let agree = ksw_core::keyswitch::noise_of(&diff0, &diff1, &s_to, &zero_ref, &params);
            let agree_bound = bound + 1.0;
            for (method, res, b) in [
                ("hybrid", res_h, bound),
                ("klss", res_k, bound),
                ("agreement", agree, agree_bound),
            ] {
                let ok = res <= b;
                pass &= ok;
                rows.push(vec![
                    method.to_string(),
                    n.to_string(),
                    dnum.to_string(),
                    level.to_string(),
                    trial.to_string(),
                    fmt_f64(res),
                    fmt_f64(b),
                    ok.to_string(),
                ]);
            }
        }
    }
    let mut manifest = manifest_for("ksw-verify", common, &cfg);
    emit_table(
        &mut manifest,
        common.format,
        "ksw_noise",
        &[
            "method",
            "n",
            "dnum",
            "level",
            "trial",
            "residual_log2",
            "bound_log2",
            "pass",
        ],
        &rows,
    )?;
    manifest.finalize()?;
    let fails = rows.iter().filter(|r| r[7] == "false").count();
    Ok(CmdOutcome {
        pass,
        lines: vec![format!(
            "[{}] keyswitch correctness: {} rows, {} failures",
            if pass { "pass" } else { "FAIL" },
            rows.len(),
            fails
        )],
    })
}

// ---------------------------------------------------------------------------
// cost
// ---------------------------------------------------------------------------

fn cost_params_from(cfg: &Config) -> Result<CostParams, CmdError> {
    let log2_n = cfg.u32_or("log2_n", 16)?;
    let word_bits = cfg.u32_or("word_bits", 36)?;
    let dnum = cfg.usize_or("dnum", 6)?;
    let alpha_prime = cfg.usize_opt("alpha_prime")?;
    if alpha_prime == Some(0) {
        return Err(CmdError::Params("alpha_prime must be positive".into()));
    }
    let l_target = cfg.usize_opt("l_target")?;
    let h = cfg.usize_or("h", 512)?;
    CostParams::new(log2_n, word_bits, dnum, alpha_prime, l_target, h)
        .map_err(|e| CmdError::Params(e.to_string()))
}

/// Emits the dnum sweeps, hybrid-vs-KLSS tables, per-level alpha curves and
/// the E-Key sizing table.
pub fn cmd_cost(common: &CommonArgs) -> Result<CmdOutcome, CmdError> {
    let cfg = load_config(common)?;
    let p = cost_params_from(&cfg)?;
    let mut manifest = manifest_for("cost", common, &cfg);
    let mut lines = Vec::new();

    // Per-level per-class breakdown for both methods.
    let mut rows = Vec::new();
    for level in 0..=p.max_level {
        for r in [modmul_count_hybrid(&p, level), modmul_count_klss(&p, level, p.alpha)] {
            rows.push(vec![
                match r.method {
                    Method::Hybrid => "hybrid".to_string(),
                    Method::Klss => "klss".to_string(),
                },
                level.to_string(),
                r.alpha.to_string(),
                r.alpha_prime.to_string(),
                r.ntt.to_string(),
                r.intt.to_string(),
                r.bconv.to_string(),
                r.ip.to_string(),
                r.hadamard.to_string(),
                r.moddown.to_string(),
                r.total().to_string(),
            ]);
        }
    }
    emit_table(
        &mut manifest,
        common.format,
        "cost_breakdown",
        &[
            "method", "l", "alpha", "alpha_prime", "ntt", "intt", "bconv", "ip", "hadamard",
            "moddown", "total",
        ],
        &rows,
    )?;

    // Hybrid-vs-KLSS comparison across dnum and N (Table-3 style).
    let mut rows = Vec::new();
    let mut signs_ok = true;
    for log2_n in [16u32, 17, 18] {
        for dnum in 2..=5usize {
            let cp = CostParams::new(log2_n, 36, dnum, None, None, 512)
                .map_err(|e| CmdError::Params(e.to_string()))?;
            let h = lifetime_total(&cp, Method::Hybrid);
            let k = lifetime_total(&cp, Method::Klss);
            let ratio = k as f64 / h as f64;
            let red = 100.0 * (1.0 - ratio);
            signs_ok &= if dnum == 2 { ratio > 1.0 } else { ratio < 1.0 };
            rows.push(vec![
                log2_n.to_string(),
                dnum.to_string(),
                h.to_string(),
                k.to_string(),
                fmt_f64(ratio),
                fmt_f64(red),
            ]);
        }
    }
    emit_table(
        &mut manifest,
        common.format,
        "method_comparison",
        &["log2_n", "dnum", "hybrid_total", "klss_total", "ratio", "reduction_pct"],
        &rows,
    )?;
    lines.push(format!(
        "[{}] method comparison signs (klss worse at dnum=2, better at dnum>=3)",
        if signs_ok { "pass" } else { "FAIL" }
    ));

    // Per-level alpha curves (one row per admissible alpha per level).
    let schedule = select_alpha_per_level(&p);
    let mut rows = Vec::new();
    for e in &schedule.entries {
        for &(alpha, total) in &e.scanned {
            rows.push(vec![e.level.to_string(), alpha.to_string(), total.to_string()]);
        }
    }
    emit_table(
        &mut manifest,
        common.format,
        "alpha_curves",
        &["l", "alpha", "modmuls"],
        &rows,
    )?;

    // Amortized-multiplication sweep over normalized dnum.
    let sweep = dnum_sweep_normalized(p.log2_n, p.word_bits, 1.0)
        .map_err(|e| CmdError::Params(e.to_string()))?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|(d, dnum, metric)| vec![fmt_f64(*d), dnum.to_string(), fmt_f64(*metric)])
        .collect();
    emit_table(
        &mut manifest,
        common.format,
        "tmult_sweep",
        &["d", "dnum", "t_mult_per_slot"],
        &rows,
    )?;

    // E-Key sizing per level.
    let rows: Vec<Vec<String>> = (0..=p.max_level)
        .map(|l| {
            vec![
                l.to_string(),
                p.beta(l, p.alpha).to_string(),
                p.beta_tilde(l, p.alpha).to_string(),
                p.alpha_prime_for(p.alpha).to_string(),
                ekey_memory_requirement(&p, l).to_string(),
            ]
        })
        .collect();
    emit_table(
        &mut manifest,
        common.format,
        "ekey",
        &["l", "beta", "beta_tilde", "alpha_prime", "bytes"],
        &rows,
    )?;
    manifest.finalize()?;

    Ok(CmdOutcome {
        pass: signs_ok,
        lines,
    })
}

// ---------------------------------------------------------------------------
// alpha-plan
// ---------------------------------------------------------------------------

/// Emits the per-level alpha schedule as JSON (and CSV), optionally
/// re-verifying the argmin property by exhaustive re-scan.
pub fn cmd_alpha_plan(common: &CommonArgs, rescan: bool) -> Result<CmdOutcome, CmdError> {
    let cfg = load_config(common)?;
    let p = cost_params_from(&cfg)?;
    let schedule = select_alpha_per_level(&p);
    let mut pass = true;
    let mut lines = Vec::new();
    if rescan {
        for e in &schedule.entries {
            for alpha in 1..=p.alpha.min(e.level + 1) {
                let total = modmul_count_klss(&p, e.level, alpha).total();
                if total < e.modmuls || (total == e.modmuls && alpha < e.alpha) {
                    pass = false;
                    lines.push(format!(
                        "[FAIL] level {}: alpha {} beats scheduled {}",
                        e.level, alpha, e.alpha
                    ));
                }
            }
        }
        lines.push(format!(
            "[{}] exhaustive argmin re-scan over {} levels",
            if pass { "pass" } else { "FAIL" },
            schedule.entries.len()
        ));
    }
    let entries = schedule
        .entries
        .iter()
        .map(|e| {
            Json::obj(vec![
                ("level", Json::Int(e.level as i128)),
                ("alpha", Json::Int(e.alpha as i128)),
                ("modmuls", Json::Int(e.modmuls as i128)),
            ])
        })
        .collect();
    let doc = Json::obj(vec![
        (
            "instance",
            Json::obj(vec![
                ("log2_n", Json::Int(p.log2_n as i128)),
                ("dnum", Json::Int(p.dnum as i128)),
                ("max_level", Json::Int(p.max_level as i128)),
                ("k_max", Json::Int(p.alpha as i128)),
                (
                    "alpha_prime",
                    Json::Int(p.alpha_prime_for(p.alpha) as i128),
                ),
            ]),
        ),
        ("rescan_verified", Json::Bool(rescan && pass)),
        ("entries", Json::Array(entries)),
    ]);
    let mut manifest = manifest_for("alpha-plan", common, &cfg);
    manifest.emit("alpha_schedule.json", &doc.render())?;
    if common.format.wants_csv() {
        let mut csv = Csv::new(&["level", "alpha", "modmuls"]);
        for e in &schedule.entries {
            csv.row(&[
                e.level.to_string(),
                e.alpha.to_string(),
                e.modmuls.to_string(),
            ]);
        }
        manifest.emit("alpha_schedule.csv", &csv.into_string())?;
    }
    manifest.finalize()?;
    lines.push(format!(
        "schedule over {} levels, constant: {}",
        schedule.entries.len(),
        schedule.is_constant()
    ));
    Ok(CmdOutcome { pass, lines })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn profile_from_file(path: &Path) -> Result<HardwareProfile, CmdError> {
    let cfg = Config::load(path)?;
    let mut specs = std::collections::BTreeMap::new();
    for (key, comp) in [
        ("nttu", Component::Nttu),
        ("bconvu", Component::Bconvu),
        ("hpip", Component::HpIp),
        ("ewe", Component::Ewe),
        ("autou", Component::AutoU),
    ] {
        let elems = cfg.usize_opt(&format!("{key}.elems_per_cycle"))?;
        if let Some(elems) = elems {
            specs.insert(
                comp,
                ComponentSpec {
                    lanes: cfg.u32_or(&format!("{key}.lanes"), 1024)?,
                    elems_per_cycle: elems as u64,
                    pipeline_depth: cfg.usize_or(&format!("{key}.pipeline_depth"), 16)? as u64,
                    instances: cfg.u32_or(&format!("{key}.instances"), 1)?,
                    energy_per_op: cfg.f64_or(&format!("{key}.energy_per_op"), 0.0)?,
                },
            );
        }
    }
    if specs.is_empty() {
        return Err(CmdError::Params(format!(
            "profile {} defines no components",
            path.display()
        )));
    }
    Ok(HardwareProfile {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string()),
        clock_ghz: cfg.f64_or("clock_ghz", 1.0)?,
        specs,
        ip_bandwidth_cap: cfg.usize_opt("ip_bandwidth_cap")?.map(|v| v as u64),
    })
}

pub fn resolve_profile(name: &str) -> Result<HardwareProfile, CmdError> {
    match profile_by_name(name) {
        Ok(p) => Ok(p),
        Err(_) if Path::new(name).exists() => profile_from_file(Path::new(name)),
        Err(e) => Err(CmdError::Params(e.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Serial,
    Parallel,
    Both,
}

impl ModeArg {
    fn modes(&self) -> Vec<SimMode> {
        match self {
            ModeArg::Serial => vec![SimMode::Serial],
            ModeArg::Parallel => vec![SimMode::Parallel],
            ModeArg::Both => vec![SimMode::Serial, SimMode::Parallel],
        }
    }
}

/// Lowers a named workload onto a profile and times it in the requested
/// mode(s); emits per-component and per-class reports.
pub fn cmd_simulate(
    common: &CommonArgs,
    workload: &str,
    profile_name: &str,
    mode: ModeArg,
) -> Result<CmdOutcome, CmdError> {
    let cfg = load_config(common)?;
    let p = cost_params_from(&cfg)?;
    let profile = resolve_profile(profile_name)?;
    let ops = hwsim::workloads::by_name(workload, p.max_level)
        .map_err(|e| CmdError::Params(e.to_string()))?;
    let schedule = select_alpha_per_level(&p);
    let plan = compile_app(&ops, &p, &schedule).map_err(|e| CmdError::Params(e.to_string()))?;
    let dag =
        generate_instructions(&plan.steps, &p, &profile).map_err(|e| CmdError::Params(e.to_string()))?;

    let mut manifest = manifest_for("simulate", common, &cfg);
    let mut lines = Vec::new();
    let mut totals = Vec::new();
    for mode in mode.modes() {
        let report = execute(&dag, &profile, mode).map_err(|e| CmdError::Params(e.to_string()))?;
        totals.push((mode, report.total_cycles));
        let rows: Vec<Vec<String>> = report
            .per_component
            .iter()
            .map(|&(c, busy, vol, util)| {
                vec![
                    c.name().to_string(),
                    busy.to_string(),
                    vol.to_string(),
                    fmt_f64(util),
                ]
            })
            .collect();
        emit_table(
            &mut manifest,
            common.format,
            &format!("simreport_components_{}", mode.name()),
            &["component", "busy_cycles", "element_volume", "utilization"],
            &rows,
        )?;
        let shares = breakdown_report(&report);
        let rows: Vec<Vec<String>> = shares
            .iter()
            .map(|&(k, share)| vec![k.name().to_string(), fmt_f64(share)])
            .collect();
        emit_table(
            &mut manifest,
            common.format,
            &format!("simreport_classes_{}", mode.name()),
            &["class", "share"],
            &rows,
        )?;
        let energy = energy_report(&report, &profile);
        let summary = Json::obj(vec![
            ("workload", Json::Str(workload.to_string())),
            ("profile", Json::Str(profile.name.clone())),
            ("mode", Json::Str(mode.name().to_string())),
            ("total_cycles", Json::Int(report.total_cycles as i128)),
            (
                "critical_path_cycles",
                Json::Int(report.critical_path_cycles as i128),
            ),
            ("node_count", Json::Int(report.node_count as i128)),
            (
                "wall_time_us",
                Json::Float(report.total_cycles as f64 / (profile.clock_ghz * 1e3)),
            ),
            ("energy_estimate", Json::Float(energy)),
        ]);
        manifest.emit(&format!("simreport_{}.json", mode.name()), &summary.render())?;
        lines.push(format!(
            "{} mode: {} cycles over {} kernels",
            mode.name(),
            report.total_cycles,
            report.node_count
        ));
    }
    manifest.finalize()?;
    let mut pass = true;
    if totals.len() == 2 {
        let serial = totals[0].1;
        let parallel = totals[1].1;
        pass = parallel <= serial;
        lines.push(format!(
            "[{}] parallel ({parallel}) <= serial ({serial}), speedup {:.2}x",
            if pass { "pass" } else { "FAIL" },
            serial as f64 / parallel as f64
        ));
    }
    Ok(CmdOutcome { pass, lines })
}
