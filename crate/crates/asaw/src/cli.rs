//! Command-line front end: flag and config-file resolution, dispatch to the
//! library, and JSON/CSV rendering.

use crate::analysis::{asm_condition, kappa_thresholds, torus_chi_derivative_check, zc_lace, zc_ratio};
use crate::enumerate::{class_series, enumeration_cap, mass_table, two_point_coeffs, WalkFilter};
use crate::error::{AsawError, Result};
use crate::flips::{flip_suite, greedy_random_suite, split_adjacency_suite};
use crate::greens::{asymptotic_ratio, green_quadrature, srw_series_coeffs, truncated_series, DEFAULT_REFINEMENT};
use crate::interaction::ModelParams;
use crate::lace::{diagram_check, pi_by_lace_size, pi_coeffs, recursion_residual};
use crate::lattice::Point;
use crate::rational::{fmt_q, parse_q, q, qi, Q};
use crate::stepdist::{make_nearest_neighbour, parse_distribution};
use crate::unfold::{
    classical_unfold, delta_default, distinct_partitions, distinct_partitions_table, hardy_ramanujan_error,
    psi_preimages, refold, unfold_suite,
};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "asaw", version, about = "Exact enumeration and lace expansion for attractive self-avoiding walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Every flag is global, so it may follow any verb and may also come from a config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Flat `key=value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// `nn` or `spread:L=<int>,shape=uniform`.
    #[arg(long, global = true)]
    pub dist: Option<String>,
    /// Attraction strength as `p/q`.
    #[arg(long, global = true)]
    pub kappa: Option<String>,
    #[arg(long = "max-n", global = true)]
    pub max_n: Option<usize>,
    /// walks | saw | bridges | halfspace
    #[arg(long, global = true)]
    pub class: Option<String>,
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Number of lace edges; 0 means the full sum.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<String>,
    /// ratio | lace
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub side: Option<i64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// A point `x1,...,xd`, or an integer r for `r e₁`.
    #[arg(long, global = true)]
    pub x: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// json | csv
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Run the invariant suite of the chosen verb instead of computing.
    #[arg(long, global = true)]
    pub selftest: bool,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Per-length masses c_n, b_n, h_n as CSV.
    Enumerate,
    /// Coefficients of the two-point function, keyed by endpoint.
    TwoPoint,
    Unfold {
        #[command(subcommand)]
        action: Option<UnfoldAction>,
    },
    /// Exhaustive flip suite, split adjacency counts and random greedy selection.
    Flips,
    Lace {
        #[command(subcommand)]
        action: Option<LaceAction>,
    },
    /// Critical point by the ratio method or from the lace expansion.
    Zc,
    /// Sufficient thresholds on κ and the default δ.
    Thresholds,
    Torus {
        #[command(subcommand)]
        action: Option<TorusAction>,
    },
    /// Random-walk Green's function by quadrature.
    Greens,
    /// Partitions into distinct parts.
    Partitions,
    /// Every module's invariant suite.
    Selftest,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum UnfoldAction {
    Check,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum LaceAction {
    Pi,
    Verify,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum TorusAction {
    Chi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub d: usize,
    pub dist: String,
    pub kappa: Q,
    pub max_n: Option<usize>,
    pub class: WalkFilter,
    pub order: Option<usize>,
    pub m: usize,
    pub delta: Option<Q>,
    pub method: String,
    pub side: i64,
    pub mu: f64,
    pub x: Option<String>,
    pub n: Option<usize>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub trials: usize,
    pub selftest: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 2,
            dist: "nn".into(),
            kappa: Q::zero(),
            max_n: None,
            class: WalkFilter::SelfAvoiding,
            order: None,
            m: 0,
            delta: None,
            method: "ratio".into(),
            side: 3,
            mu: 1.0,
            x: None,
            n: None,
            format: None,
            threads: None,
            seed: 0,
            trials: 10_000,
            selftest: false,
        }
    }
}

/// Parses a flat `key=value` text; `#` starts a comment, dashes and underscores in keys are interchangeable.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AsawError::Parse(format!("config line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| AsawError::Parse(format!("bad value for {key}: '{v}'")))
}

fn parse_format(s: &str) -> Result<Format> {
    match s {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        _ => Err(AsawError::Parse(format!("unknown format '{s}'"))),
    }
}

impl RunConfig {
    /// Merges flags over config entries over defaults; `env_threads` (from `ASAW_THREADS`) wins over both.
    pub fn resolve(flags: &Flags, config: &BTreeMap<String, String>, env_threads: Option<&str>) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        for (k, v) in config {
            match k.as_str() {
                "d" => c.d = parse_num(k, v)?,
                "dist" => c.dist = v.clone(),
                "kappa" => c.kappa = parse_q(v)?,
                "max_n" => c.max_n = Some(parse_num(k, v)?),
                "class" => c.class = WalkFilter::parse(v)?,
                "order" => c.order = Some(parse_num(k, v)?),
                "m" => c.m = parse_num(k, v)?,
                "delta" => c.delta = Some(parse_q(v)?),
                "method" => c.method = v.clone(),
                "side" => c.side = parse_num(k, v)?,
                "mu" => c.mu = parse_num(k, v)?,
                "x" => c.x = Some(v.clone()),
                "n" => c.n = Some(parse_num(k, v)?),
                "format" => c.format = Some(parse_format(v)?),
                "threads" => c.threads = Some(parse_num(k, v)?),
                "seed" => c.seed = parse_num(k, v)?,
                "trials" => c.trials = parse_num(k, v)?,
                "selftest" => c.selftest = parse_num(k, v)?,
                _ => return Err(AsawError::Parse(format!("unknown config key '{k}'"))),
            }
        }
        if let Some(v) = flags.d {
            c.d = v;
        }
        if let Some(v) = &flags.dist {
            c.dist = v.clone();
        }
        if let Some(v) = &flags.kappa {
            c.kappa = parse_q(v)?;
        }
        if flags.max_n.is_some() {
            c.max_n = flags.max_n;
        }
        if let Some(v) = &flags.class {
            c.class = WalkFilter::parse(v)?;
        }
        if flags.order.is_some() {
            c.order = flags.order;
        }
        if let Some(v) = flags.m {
            c.m = v;
        }
        if let Some(v) = &flags.delta {
            c.delta = Some(parse_q(v)?);
        }
        if let Some(v) = &flags.method {
            c.method = v.clone();
        }
        if let Some(v) = flags.side {
            c.side = v;
        }
        if let Some(v) = flags.mu {
            c.mu = v;
        }
        if flags.x.is_some() {
            c.x = flags.x.clone();
        }
        if flags.n.is_some() {
            c.n = flags.n;
        }
        if let Some(v) = &flags.format {
            c.format = Some(parse_format(v)?);
        }
        if flags.threads.is_some() {
            c.threads = flags.threads;
        }
        if let Some(v) = flags.seed {
            c.seed = v;
        }
        if let Some(v) = flags.trials {
            c.trials = v;
        }
        c.selftest |= flags.selftest;
        if let Some(t) = env_threads.map(str::trim).filter(|t| !t.is_empty()) {
            c.threads = Some(parse_num("ASAW_THREADS", t)?);
        }
        if c.kappa.is_negative() {
            return Err(AsawError::Domain("kappa must be nonnegative".into()));
        }
        if c.threads == Some(0) {
            return Err(AsawError::Domain("thread count must be positive".into()));
        }
        Ok(c)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.kappa.clone(), parse_distribution(self.d, &self.dist)?)
    }

    fn point(&self) -> Result<Point> {
        let s = self.x.as_deref().unwrap_or("10");
        if s.contains(',') {
            let x = Point::parse(s)?;
            if x.dim() != self.d {
                return Err(AsawError::DimensionMismatch(x.dim(), self.d));
            }
            Ok(x)
        } else {
            let r: i64 = parse_num("x", s)?;
            Ok(Point::origin(self.d).with(0, r))
        }
    }
}

/// Output of a verb: the rendered text and whether every checked property held.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub ok: bool,
    pub body: String,
}

impl Report {
    fn json(mut v: Value, ok: bool) -> Report {
        if let Value::Object(m) = &mut v {
            m.insert("schema".into(), json!(1));
        }
        Report { ok, body: serde_json::to_string_pretty(&v).expect("serializable") + "\n" }
    }
}

/// Exit status, standard output and standard error of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn exit_code(e: &AsawError) -> i32 {
    match e {
        AsawError::Numerical(_) => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name), resolves the configuration and runs.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env = std::env::var("ASAW_THREADS").ok();
    run_args_with_env(args, env.as_deref())
}

pub fn run_args_with_env<I, T>(args: I, env_threads: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let config = match &cli.flags.config {
        None => Ok(BTreeMap::new()),
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| AsawError::Parse(format!("cannot read {}: {e}", path.display())))
            .and_then(|t| parse_config(&t)),
    };
    let cfg = config.and_then(|c| RunConfig::resolve(&cli.flags, &c, env_threads));
    let result = cfg.and_then(|cfg| run_in_pool(&cli.command, &cfg));
    match result {
        Ok(r) => Outcome { code: if r.ok { 0 } else { 1 }, stdout: r.body, stderr: String::new() },
        Err(e) => Outcome { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

/// Runs on a dedicated pool when a thread count is configured.
pub fn run_in_pool(command: &Command, cfg: &RunConfig) -> Result<Report> {
    match cfg.threads {
        None => run(command, cfg),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| AsawError::Domain(format!("thread pool: {e}")))?
            .install(|| run(command, cfg)),
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<Report> {
    if cfg.selftest {
        let verb = match command {
            Command::Selftest => None,
            c => Some(c.clone()),
        };
        return selftest(verb.as_ref(), cfg);
    }
    match command {
        Command::Enumerate => enumerate_cmd(cfg),
        Command::TwoPoint => {
            let p = cfg.params()?;
            let order = cfg.order.unwrap_or(6);
            let g = two_point_coeffs(&p, order)?;
            Ok(Report::json(json!({ "order": order, "kappa": fmt_q(&cfg.kappa), "coefficients": g.to_json() }), true))
        }
        Command::Unfold { .. } => unfold_check(cfg),
        Command::Flips => flips_check(cfg),
        Command::Lace { action } => match action.clone().unwrap_or(LaceAction::Verify) {
            LaceAction::Pi => {
                let p = cfg.params()?;
                let order = cfg.order.unwrap_or(6);
                let pi = pi_coeffs(&p, cfg.m, order)?;
                Ok(Report::json(json!({ "m": cfg.m, "order": order, "kappa": fmt_q(&cfg.kappa), "coefficients": pi.to_json() }), true))
            }
            LaceAction::Verify => {
                let p = cfg.params()?;
                let order = cfg.order.unwrap_or(6);
                let res = recursion_residual(&p, order)?;
                let zero = res.is_zero();
                Ok(Report::json(
                    json!({ "order": order, "kappa": fmt_q(&cfg.kappa), "all_zero": zero, "max_abs_residual": fmt_q(&res.max_abs()) }),
                    zero,
                ))
            }
        },
        Command::Zc => {
            let p = cfg.params()?;
            let order = cfg.order.unwrap_or(8);
            let zc = match cfg.method.as_str() {
                "ratio" => zc_ratio(&p, order)?,
                "lace" => zc_lace(&p, order)?,
                m => return Err(AsawError::Parse(format!("unknown method '{m}'"))),
            };
            Ok(Report::json(json!({ "method": cfg.method, "order": order, "kappa": fmt_q(&cfg.kappa), "zc": zc }), true))
        }
        Command::Thresholds => {
            let dist = parse_distribution(cfg.d, &cfg.dist)?;
            let t = kappa_thresholds(&dist);
            Ok(Report::json(json!({ "d": cfg.d, "dist": cfg.dist, "thresholds": t.to_json() }), true))
        }
        Command::Torus { .. } => {
            let p = cfg.params()?;
            let order = cfg.order.unwrap_or(6);
            let grid = [p.z0(), qi(1), q(3, 2)];
            let r = torus_chi_derivative_check(&p, cfg.side, order, &grid)?;
            Ok(Report::json(json!({ "order": order, "kappa": fmt_q(&cfg.kappa), "torus": r.to_json() }), r.ok()))
        }
        Command::Greens => greens_cmd(cfg),
        Command::Partitions => {
            let n = cfg.n.ok_or_else(|| AsawError::Parse("partitions needs --n".into()))?;
            let pn = distinct_partitions(n);
            let mut v = json!({ "n": n, "P": pn.to_string() });
            if n > 0 {
                v["hardy_ramanujan_error"] = json!(hardy_ramanujan_error(n, &pn));
            }
            Ok(Report::json(v, true))
        }
        Command::Selftest => selftest(None, cfg),
    }
}

fn enumerate_cmd(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let max_n = cfg.max_n.unwrap_or(6);
    let cap = enumeration_cap(p.dist(), cfg.class);
    if max_n > cap {
        return Err(AsawError::CapExceeded(format!("max-n {max_n} exceeds the cap {cap} for this distribution")));
    }
    let format = cfg.format.unwrap_or(Format::Csv);
    if cfg.class == WalkFilter::All {
        let w = class_series(&p, max_n, WalkFilter::All)?;
        return Ok(match format {
            Format::Csv => {
                let mut s = String::from("n,w_n\n");
                for (n, x) in w.iter().enumerate() {
                    s.push_str(&format!("{n},{}\n", fmt_q(x)));
                }
                Report { ok: true, body: s }
            }
            Format::Json => Report::json(json!({ "w": w.iter().map(fmt_q).collect::<Vec<_>>() }), true),
        });
    }
    let t = mass_table(&p, max_n)?;
    Ok(match format {
        Format::Csv => Report { ok: true, body: t.to_csv() },
        Format::Json => Report::json(
            json!({
                "kappa": fmt_q(&cfg.kappa),
                "c": t.c().iter().map(fmt_q).collect::<Vec<_>>(),
                "b": t.b().iter().map(fmt_q).collect::<Vec<_>>(),
                "h": t.h().iter().map(fmt_q).collect::<Vec<_>>(),
            }),
            true,
        ),
    })
}

/// `Ψ` preimage counts of every bridge with at most `max_n` steps against `P(n)`.
fn preimage_bound(p: &ModelParams, max_n: usize) -> Result<Value> {
    let mut bridges = Vec::new();
    crate::enumerate::enumerate_walks(p, max_n, WalkFilter::Bridge, |v| bridges.push(v.walk()))?;
    let table = distinct_partitions_table(max_n);
    let mut worst = 0usize;
    let mut violations = 0usize;
    let mut round_trip_failures = 0usize;
    for b in bridges.iter().filter(|b| !b.is_empty()) {
        let pre = psi_preimages(b);
        worst = worst.max(pre.len());
        if BigUint::from(pre.len()) > table[b.len()] || pre.is_empty() {
            violations += 1;
        }
        for w in &pre {
            let r = classical_unfold(w)?;
            if refold(&r.unfolded, &r.spans).ok().as_ref() != Some(w) {
                round_trip_failures += 1;
            }
        }
    }
    Ok(json!({
        "bridges": bridges.len(),
        "max_preimages": worst,
        "violations": violations,
        "round_trip_failures": round_trip_failures,
        "ok": violations == 0 && round_trip_failures == 0,
    }))
}

fn unfold_check(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let max_n = cfg.max_n.unwrap_or(8);
    let delta = match &cfg.delta {
        Some(d) => d.clone(),
        None => delta_default(&p.with_kappa(Q::zero()))
            .ok_or_else(|| AsawError::Domain("no default delta for this distribution".into()))?,
    };
    let suite = unfold_suite(&p, max_n, &delta)?;
    let pre = preimage_bound(&p, max_n.min(10))?;
    let ok = suite.ok() && pre["ok"] == json!(true);
    Ok(Report::json(
        json!({ "max_n": max_n, "kappa": fmt_q(&cfg.kappa), "unfolding": suite.to_json(), "preimages": pre }),
        ok,
    ))
}

fn flips_check(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.params()?;
    let max_n = cfg.max_n.unwrap_or(8);
    let f = flip_suite(&p, max_n)?;
    let s = split_adjacency_suite(&p, max_n)?;
    let g = greedy_random_suite(cfg.d, cfg.trials, 10, cfg.seed)?;
    let ok = f.ok() && s.ok() && g.ok();
    Ok(Report::json(
        json!({
            "max_n": max_n,
            "kappa": fmt_q(&cfg.kappa),
            "seed": cfg.seed,
            "flips": f.to_json(),
            "split_adjacency": s.to_json(),
            "greedy": g.to_json(),
        }),
        ok,
    ))
}

fn greens_cmd(cfg: &RunConfig) -> Result<Report> {
    let dist = parse_distribution(cfg.d, &cfg.dist)?;
    let x = cfg.point()?;
    if !(0.0..=1.0).contains(&cfg.mu) {
        return Err(AsawError::Domain("mu must lie in [0, 1]".into()));
    }
    let (est, ratio) = if cfg.mu == 1.0 && cfg.d >= 3 {
        let (r, e) = asymptotic_ratio(&dist, &x)?;
        (e, Some(r))
    } else {
        (green_quadrature(&dist, cfg.mu, &x, DEFAULT_REFINEMENT)?, None)
    };
    Ok(Report::json(
        json!({
            "d": cfg.d,
            "dist": cfg.dist,
            "mu": cfg.mu,
            "x": x.to_string(),
            "value": est.value,
            "error_proxy": est.error_proxy,
            "quadrature_order": est.quadrature_order,
            "ratio": ratio,
        }),
        true,
    ))
}

fn check(name: &str, ok: bool, detail: Value) -> Value {
    json!({ "name": name, "ok": ok, "detail": detail })
}

fn selftest_enumerate(cfg: &RunConfig) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    let zero = ModelParams::new(Q::zero(), make_nearest_neighbour(2)?)?;
    let counts = [1i64, 4, 12, 36, 100, 284, 780];
    let t = mass_table(&zero, 6)?;
    let exact = t.c().iter().enumerate().all(|(n, c)| *c == q(counts[n], 4i64.pow(n as u32)));
    out.push(check("saw_counts", exact, json!({ "max_n": 6 })));
    let p = ModelParams::new(cfg.kappa.clone(), make_nearest_neighbour(2)?)?;
    let t = mass_table(&p, 7)?;
    let agree = t.c() == class_series(&p, 7, WalkFilter::SelfAvoiding)?
        && t.b() == class_series(&p, 7, WalkFilter::Bridge)?
        && t.h() == class_series(&p, 7, WalkFilter::HalfSpace)?;
    out.push(check("mass_table_matches_class_sums", agree, json!({ "kappa": fmt_q(&cfg.kappa) })));
    let b = t.b();
    let supermult = (1..7).all(|n| (1..=7 - n).all(|m| b[n + m] >= &b[n] * &b[m]));
    out.push(check("bridge_supermultiplicativity", supermult, json!({ "max_n": 7 })));
    let walks = class_series(&p, 6, WalkFilter::All)?;
    out.push(check("walk_mass_is_one", walks.iter().all(|w| *w == qi(1)), json!({})));
    let g = two_point_coeffs(&p, 6)?;
    let tot = g.total();
    let sums = (0..=6).all(|n| *tot.coeff(n) == t.c()[n]);
    let symmetric = g.entries().iter().all(|(x, s)| g.get(&x.neg()) == Some(s));
    out.push(check("two_point_sums_and_symmetry", sums && symmetric, json!({ "order": 6 })));
    Ok(out)
}

fn selftest_unfold(cfg: &RunConfig) -> Result<Vec<Value>> {
    let p = ModelParams::new(Q::zero(), make_nearest_neighbour(2)?)?;
    let delta = cfg.delta.clone().unwrap_or_else(|| q(1, 4));
    let suite = unfold_suite(&p, 6, &delta)?;
    let pre = preimage_bound(&p, 8)?;
    let table = distinct_partitions_table(12);
    let oracle = (0..=12usize).all(|n| {
        let count = (0u32..1 << n).filter(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| i + 1).sum::<usize>() == n).count();
        table[n] == BigUint::from(count)
    });
    Ok(vec![
        check("multivalued_unfolding", suite.ok(), suite.to_json()),
        check("preimage_bound", pre["ok"] == json!(true), pre),
        check("partitions_subset_oracle", oracle, json!({ "max_n": 12 })),
    ])
}

fn selftest_flips(cfg: &RunConfig) -> Result<Vec<Value>> {
    let p = ModelParams::new(cfg.kappa.clone(), make_nearest_neighbour(2)?)?;
    let f = flip_suite(&p, 6)?;
    let s = split_adjacency_suite(&p, 8)?;
    let g = greedy_random_suite(2, 500, 10, cfg.seed)?;
    Ok(vec![
        check("flip_suite", f.ok(), f.to_json()),
        check("split_adjacency", s.ok(), s.to_json()),
        check("greedy_random", g.ok(), g.to_json()),
    ])
}

fn selftest_lace(cfg: &RunConfig) -> Result<Vec<Value>> {
    let p = ModelParams::new(cfg.kappa.clone(), make_nearest_neighbour(2)?)?;
    let res = recursion_residual(&p, 6)?;
    let parts = pi_by_lace_size(&p, 6)?;
    let mut sum = crate::series::SpatialSeries::new(6);
    for s in &parts[1..] {
        sum.add_assign(s);
    }
    let mut diff = sum.clone();
    diff.sub_assign(&parts[0]);
    diff.prune();
    let diag = diagram_check(&p, &[2, 3], 6)?;
    Ok(vec![
        check("recursion_residual", res.is_zero(), json!({ "order": 6, "max_abs": fmt_q(&res.max_abs()) })),
        check("pi_sum_over_lace_sizes", diff.is_zero(), json!({ "order": 6 })),
        check(
            "diagram_bounds",
            diag.ok(),
            json!({ "walks": diag.walks_checked, "coefficients": diag.coefficients_compared, "lace_edge_violations": diag.lace_edge_violations }),
        ),
    ])
}

fn selftest_zc() -> Result<Vec<Value>> {
    let p = ModelParams::new(Q::zero(), make_nearest_neighbour(2)?)?;
    let r = zc_ratio(&p, 8)?;
    let l = zc_lace(&p, 8)?;
    let ok = r > 1.0 && l > 1.0 && ((l - r) / r).abs() <= 0.10;
    Ok(vec![check("zc_cross_validation", ok, json!({ "order": 8, "zc_ratio": r, "zc_lace": l }))])
}

fn selftest_thresholds() -> Result<Vec<Value>> {
    let dist = make_nearest_neighbour(2)?;
    let t = kappa_thresholds(&dist);
    let asm = asm_condition(2, dist.p1(), &t.kappa_asm) && !asm_condition(2, dist.p1(), &(&t.kappa_asm * qi(2)));
    let positive = t.kappa_asm.is_positive() && t.kappa_decay.is_positive() && t.delta_default.is_positive();
    Ok(vec![check("thresholds", asm && positive, t.to_json())])
}

fn selftest_torus(cfg: &RunConfig) -> Result<Vec<Value>> {
    let p = ModelParams::new(cfg.kappa.clone(), make_nearest_neighbour(2)?)?;
    let grid = [p.z0(), qi(1), q(3, 2)];
    let r = torus_chi_derivative_check(&p, 3, 6, &grid)?;
    let chi = &r.chi;
    let basics = *chi.coeff(0) == qi(1) && *chi.coeff(1) == qi(1);
    Ok(vec![check("torus_derivative_bound", r.ok() && basics, r.to_json())])
}

fn selftest_greens() -> Result<Vec<Value>> {
    let dist = make_nearest_neighbour(3)?;
    let x = Point::origin(3).with(0, 1);
    let series = srw_series_coeffs(&dist, 24)?;
    let exact = truncated_series(&series, &x, 0.3);
    let quad = green_quadrature(&dist, 0.3, &x, DEFAULT_REFINEMENT)?;
    let ok = (exact - quad.value).abs() < 1e-8;
    Ok(vec![check("quadrature_matches_series", ok, json!({ "series": exact, "quadrature": quad.value }))])
}

fn selftest_partitions() -> Result<Vec<Value>> {
    let errs: Vec<f64> = [100usize, 1000, 10000].iter().map(|&n| hardy_ramanujan_error(n, &distinct_partitions(n))).collect();
    let ok = errs[0] > errs[1] && errs[1] > errs[2] && errs[2] <= 0.1 && distinct_partitions(6) == BigUint::from(4u32);
    Ok(vec![check("hardy_ramanujan", ok, json!({ "errors": errs }))])
}

/// Runs the invariant suite of one verb, or of all of them.
pub fn selftest(verb: Option<&Command>, cfg: &RunConfig) -> Result<Report> {
    let mut checks = Vec::new();
    let all = verb.is_none();
    let is = |c: fn(&Command) -> bool| all || verb.map(c).unwrap_or(false);
    if is(|c| matches!(c, Command::Enumerate | Command::TwoPoint)) {
        checks.extend(selftest_enumerate(cfg)?);
    }
    if is(|c| matches!(c, Command::Unfold { .. })) {
        checks.extend(selftest_unfold(cfg)?);
    }
    if is(|c| matches!(c, Command::Flips)) {
        checks.extend(selftest_flips(cfg)?);
    }
    if is(|c| matches!(c, Command::Lace { .. })) {
        checks.extend(selftest_lace(cfg)?);
    }
    if is(|c| matches!(c, Command::Zc)) {
        checks.extend(selftest_zc()?);
    }
    if is(|c| matches!(c, Command::Thresholds)) {
        checks.extend(selftest_thresholds()?);
    }
    if is(|c| matches!(c, Command::Torus { .. })) {
        checks.extend(selftest_torus(cfg)?);
    }
    if is(|c| matches!(c, Command::Greens)) {
        checks.extend(selftest_greens()?);
    }
    if is(|c| matches!(c, Command::Partitions)) {
        checks.extend(selftest_partitions()?);
    }
    let ok = checks.iter().all(|c| c["ok"] == json!(true));
    let failed: Vec<Value> = checks.iter().filter(|c| c["ok"] != json!(true)).map(|c| c["name"].clone()).collect();
    Ok(Report::json(json!({ "selftest": checks, "failed": failed, "ok": ok }), ok))
}
