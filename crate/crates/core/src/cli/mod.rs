//! Command-line experiments: flat `key=value` configuration, CSV output
//! and the acceptance runner.

pub mod accept;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::func::Lattice;
use crate::maximal::{pointwise_dominate, PointwiseOptions};
use crate::multiplier::{
    default_sweep, kernel_envelope_check, miyachi_check, model_multiplier, oscillatory_kernel_transfer, propagator,
    subdyadic_check, BALL_POINTS,
};
use crate::pdo::{decay_fit, full_operator, kernel_l1, near_piece, DecompParams};
use crate::sparse::{
    corollary_endpoints, dominate, random_pair, region_vertices, region_vertices_exact, sharpness_probe,
    DominateOptions, Endpoint, ExponentPair, ProbeOptions, Q,
};
use crate::symbol::{from_preset, seminorm_check};
use crate::weights::{ap_characteristic, equivalence_exponents, equivalence_sides, rh_characteristic, weight_preset};

pub use accept::{acceptance_suite, run_criterion, CriterionRow, SuiteOptions, CRITERIA};

pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sparsepdo", version, about = "Sparse bounds for pseudodifferential operators on a periodic grid")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key=value` file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long = "n")]
    pub dim: Option<usize>,
    #[arg(long = "L")]
    pub length: Option<f64>,
    #[arg(long = "N")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to `--out`.
    #[arg(long)]
    pub plot: bool,
    #[arg(long)]
    pub quick: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Vertices of the exponent region and the corollary endpoint.
    Region {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<String>,
        #[arg(long)]
        rho: Option<String>,
    },
    /// Seminorms and decay slopes of the frequency pieces.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        symbol: Option<String>,
    },
    /// Pairing against the sparse form over seeded pairs.
    Dominate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        symbol: Option<String>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
    },
    /// Exterior-point probe.
    Sharpness {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        m: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
    },
    /// Weight characteristics and the two sides of the equivalence.
    Weights {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weight: Option<String>,
    },
    /// Stopping-time pointwise domination.
    Pointwise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        symbol: Option<String>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Miyachi and subdyadic checks of the model multiplier.
    Multiplier {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Dispersive propagator and its rescaled sparse ratio.
    Propagator {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<u32>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Kernel-to-multiplier exponent transfer and envelope check.
    Kernel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Run the acceptance criteria.
    Accept {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion numbers.
        #[arg(long)]
        only: Option<String>,
        /// Declare the decay symbols half an order too good.
        #[arg(long)]
        mislabel: bool,
    },
}

/// Resolved flat configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("bad value for {key}: `{v}`"))),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn lattice(&self, length: f64, samples: usize) -> Result<Lattice> {
        let n: usize = self.get("n", 1)?;
        let l: f64 = self.get("L", length)?;
        let s: usize = self.get("N", samples)?;
        if !s.is_power_of_two() {
            return Err(Error::Config(format!("N = {s} is not a power of two")));
        }
        Lattice::new(n, l, s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn trials(&self, default: usize) -> Result<usize> {
        let t: usize = self.get("trials", default)?;
        if t == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(t)
    }
}

fn resolve(common: &Common, extra: &[(&str, Option<String>)]) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
        None => Config::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim());
    }
    let flags: [(&str, Option<String>); 5] = [
        ("n", common.dim.map(|v| v.to_string())),
        ("L", common.length.map(|v| v.to_string())),
        ("N", common.samples.map(|v| v.to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("trials", common.trials.map(|v| v.to_string())),
    ];
    for (k, v) in flags.iter().chain(extra.iter()) {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    }
    if common.quick {
        if let Some(n) = cfg.raw("N").and_then(|v| v.parse::<usize>().ok()) {
            cfg.set("N", (n / 2).max(2));
        }
        if let Some(t) = cfg.raw("trials").and_then(|v| v.parse::<usize>().ok()) {
            cfg.set("trials", (t / 2).max(1));
        }
    }
    Ok(cfg)
}

/// CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn q_str(q: Q) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn parse_q(s: &str) -> Option<Q> {
    match s.split_once('/') {
        Some((a, b)) => Some(Q::new(a.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => {
            let v: f64 = s.trim().parse().ok()?;
            let scaled = v * 1_000_000.0;
            (scaled.fract() == 0.0 && scaled.abs() < 1e15).then(|| Q::new(scaled as i64, 1_000_000))
        }
    }
}

/// Result of one experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub table: Table,
    pub summary: String,
    /// `Some(false)` when the experiment's assertions failed.
    pub verdict: Option<bool>,
    pub plot: Option<String>,
}

fn check_finite(t: &Table) -> Result<()> {
    for r in &t.rows {
        for c in r {
            if c == "NaN" || c == "inf" || c == "-inf" {
                return Err(Error::Numerical(format!("non-finite value in row {}", r.join(","))));
            }
        }
    }
    Ok(())
}

/// Run one subcommand and return its report.
pub fn execute(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Region { common, m, rho } => region(&resolve(common, &[("m", m.clone()), ("rho", rho.clone())])?),
        Command::Decay { common, symbol } => decay(&resolve(common, &[("symbol", symbol.clone())])?),
        Command::Dominate { common, symbol, x, y } => {
            dominate_cmd(&resolve(common, &[("symbol", symbol.clone()), ("x", x.map(num)), ("y", y.map(num))])?)
        }
        Command::Sharpness { common, m, rho, x, y } => sharpness(&resolve(
            common,
            &[("m", m.map(num)), ("rho", rho.map(num)), ("x", x.map(num)), ("y", y.map(num))],
        )?),
        Command::Weights { common, weight } => weights(&resolve(common, &[("weight", weight.clone())])?),
        Command::Pointwise { common, symbol, r } => {
            pointwise(&resolve(common, &[("symbol", symbol.clone()), ("r", r.map(num))])?)
        }
        Command::Multiplier { common, alpha, beta } => {
            multiplier(&resolve(common, &[("alpha", alpha.map(num)), ("beta", beta.map(num))])?)
        }
        Command::Propagator { common, alpha, t, beta } => propagator_cmd(&resolve(
            common,
            &[("alpha", alpha.map(|v| v.to_string())), ("t", t.map(num)), ("beta", beta.map(num))],
        )?),
        Command::Kernel { common, a, b } => kernel(&resolve(common, &[("a", a.map(num)), ("b", b.map(num))])?),
        Command::Accept { common, only, mislabel } => accept_cmd(&resolve(common, &[("only", only.clone())])?, common.quick, *mislabel),
    }
}

fn region(cfg: &Config) -> Result<Report> {
    let n: i64 = cfg.get("n", 1)?;
    let ms = cfg.string("m", "-1/4");
    let rs = cfg.string("rho", "0");
    let mut t = Table::new(&["vertex", "x", "y"]);
    let mut summary = String::new();
    match (parse_q(&ms), parse_q(&rs)) {
        (Some(m), Some(rho)) => {
            let v = region_vertices_exact(m, rho, n).map_err(|e| Error::Config(e.to_string()))?;
            for (i, (x, y)) in v.iter().enumerate() {
                t.push(vec![(i + 1).to_string(), q_str(*x), q_str(*y)]);
            }
            match corollary_endpoints(m, rho, n) {
                Ok(Endpoint::R(r)) => writeln!(summary, "endpoint r_e = {}", q_str(r)).ok(),
                Ok(Endpoint::S(s)) => writeln!(summary, "endpoint s_e = {}", q_str(s)).ok(),
                Err(_) => writeln!(summary, "no corollary endpoint").ok(),
            };
        }
        _ => {
            let m: f64 = cfg.get("m", -0.25)?;
            let rho: f64 = cfg.get("rho", 0.0)?;
            let reg = region_vertices(m, rho, n as usize).map_err(|e| Error::Config(e.to_string()))?;
            for (i, (x, y)) in reg.vertices.iter().enumerate() {
                t.push(vec![(i + 1).to_string(), num(*x), num(*y)]);
            }
        }
    }
    let plot = "set datafile separator ','\nset xrange [0:1]\nset yrange [0:1]\nset xlabel '1/r'\nset ylabel \"1/s'\"\nplot DATA using 2:3 with linespoints title 'vertices'\n";
    Ok(Report { table: t, summary, verdict: None, plot: Some(plot.into()) })
}

fn decay(cfg: &Config) -> Result<Report> {
    let lat = cfg.lattice(8.0, 4096)?;
    let a = from_preset(&cfg.string("symbol", "oscillatory:m=-0.5,rho=0"), lat.length()).map_err(|e| Error::Config(e.to_string()))?;
    let params = DecompParams { epsilon: cfg.get("epsilon", 0.1)?, j_max: cfg.get("j_max", 9)?, l_range: None };
    let j_min: i32 = cfg.get("j_min", 4)?;
    let mut t = Table::new(&["j", "norm_2_2", "norm_1_inf", "kernel_l1"]);
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for j in j_min..=params.j_max {
        let near = near_piece(&a, &lat, j, &params)?;
        let v = [near.norm_2_2().estimate, near.norm_1_inf(), kernel_l1(&a, &lat, j)?];
        for (c, x) in cols.iter_mut().zip(v) {
            c.push((j, x));
        }
        t.push(vec![j.to_string(), num(v[0]), num(v[1]), num(v[2])]);
    }
    let mut summary = String::new();
    for (name, c) in ["norm_2_2", "norm_1_inf", "kernel_l1"].iter().zip(&cols) {
        if let Ok(fit) = decay_fit(c) {
            writeln!(summary, "slope {name} = {:.4}", fit.slope).ok();
        }
    }
    let semi = seminorm_check(&a, 2, (2.0, 1024.0))?;
    writeln!(summary, "seminorms {}", if semi.pass() { "pass" } else { "fail" }).ok();
    let plot = "set datafile separator ','\nset logscale y 2\nplot DATA using 1:2 with linespoints title '(2,2)', DATA using 1:3 with linespoints title '(1,inf)', DATA using 1:4 with linespoints title 'kernel L1'\n";
    Ok(Report { table: t, summary, verdict: Some(semi.pass()), plot: Some(plot.into()) })
}

fn dominate_cmd(cfg: &Config) -> Result<Report> {
    let lat = cfg.lattice(16.0, 512)?;
    let a = from_preset(&cfg.string("symbol", "oscillatory:m=-0.5,rho=0"), lat.length()).map_err(|e| Error::Config(e.to_string()))?;
    let pt = ExponentPair::from_point(cfg.get("x", 0.5)?, cfg.get("y", 0.5)?).map_err(|e| Error::Config(e.to_string()))?;
    let seed: u64 = cfg.get("seed", 0)?;
    let trials = cfg.trials(20)?;
    let params = DecompParams { epsilon: cfg.get("epsilon", 0.1)?, ..Default::default() };
    let mut t = Table::new(&["trial", "pairing", "form", "ratio", "carleson", "cubes"]);
    let mut worst = 0.0f64;
    for k in 0..trials as u64 {
        let (f, g) = random_pair(lat, seed.wrapping_add(k));
        let d = dominate(&a, &f, &g, &pt, &params, DominateOptions::default())?;
        worst = worst.max(d.ratio);
        t.push(vec![k.to_string(), num(d.pairing), num(d.form), num(d.ratio), num(d.carleson), d.collection.cubes().len().to_string()]);
    }
    Ok(Report { table: t, summary: format!("max ratio = {worst:.4}\n"), verdict: None, plot: None })
}

fn sharpness(cfg: &Config) -> Result<Report> {
    let (dm, drho, dpt) = accept::sharpness_setup()?;
    let lat = cfg.lattice(8.0, 4096)?;
    let m: f64 = cfg.get("m", dm)?;
    let rho: f64 = cfg.get("rho", drho)?;
    let (dx, dy) = dpt.point();
    let pt = ExponentPair::from_point(cfg.get("x", dx)?, cfg.get("y", dy)?).map_err(|e| Error::Config(e.to_string()))?;
    let j_min: i32 = cfg.get("j_min", 4)?;
    let j_max: i32 = cfg.get("j_max", 9)?;
    let js: Vec<i32> = (j_min..=j_max).collect();
    let rows = sharpness_probe(m, rho, 1, &pt, &js, &lat, &ProbeOptions::default())?;
    let mut t = Table::new(&["j", "l", "pairing", "single_cube", "ratio"]);
    for r in &rows {
        t.push(vec![r.j.to_string(), r.l.to_string(), num(r.pairing), num(r.single_cube), num(r.ratio)]);
    }
    let growth = rows.last().map_or(0.0, |r| r.ratio) / rows.first().map_or(1.0, |r| r.ratio);
    let plot = "set datafile separator ','\nset logscale y 2\nplot DATA using 1:5 with linespoints title 'ratio'\n";
    Ok(Report { table: t, summary: format!("growth = {growth:.4}\n"), verdict: None, plot: Some(plot.into()) })
}

fn weights(cfg: &Config) -> Result<Report> {
    let lat = cfg.lattice(1.0, 1024)?;
    let w = weight_preset(&cfg.string("weight", "power:a=0.2"), lat).map_err(|e| Error::Config(e.to_string()))?;
    let p: f64 = cfg.get("p", 2.0)?;
    let r: f64 = cfg.get("r", 1.0)?;
    let s: f64 = cfg.get("s", 4.0)?;
    let (e1, e2, e3) = equivalence_exponents(p, r, s).map_err(|e| Error::Config(e.to_string()))?;
    let sides = equivalence_sides(&w, p, r, s)?;
    let mut t = Table::new(&["quantity", "exponent", "value"]);
    t.push(vec!["A_p".into(), num(p), num(ap_characteristic(&w, p)?)]);
    t.push(vec!["RH_q".into(), num(2.0), num(rh_characteristic(&w, 2.0)?)]);
    t.push(vec!["lhs_A".into(), num(e1), num(sides.ap)]);
    t.push(vec!["lhs_RH".into(), num(e2), num(sides.rh)]);
    t.push(vec!["rhs_A".into(), num(e3), num(sides.rhs)]);
    for row in &mut t.rows {
        if row[2] == "inf" {
            row[2] = "Infinity".into();
        }
    }
    Ok(Report { table: t, summary: String::new(), verdict: None, plot: None })
}

fn pointwise(cfg: &Config) -> Result<Report> {
    let lat = cfg.lattice(16.0, 512)?;
    let a = from_preset(&cfg.string("symbol", "oscillatory:m=-0.5,rho=0.5"), lat.length()).map_err(|e| Error::Config(e.to_string()))?;
    let r: f64 = cfg.get("r", 2.0)?;
    let seed: u64 = cfg.get("seed", 0)?;
    let trials = cfg.trials(3)?;
    let op = full_operator(&a, &lat)?;
    let mut t = Table::new(&["trial", "ratio", "kappa", "carleson", "cubes"]);
    for k in 0..trials as u64 {
        let (f, _) = random_pair(lat, seed.wrapping_add(k));
        let out = pointwise_dominate(&op, &f, r, &PointwiseOptions::default())?;
        t.push(vec![k.to_string(), num(out.ratio), num(out.kappa), num(out.carleson), out.collection.cubes().len().to_string()]);
    }
    Ok(Report { table: t, summary: String::new(), verdict: None, plot: None })
}

fn multiplier(cfg: &Config) -> Result<Report> {
    let alpha: f64 = cfg.get("alpha", 0.5)?;
    let beta: f64 = cfg.get("beta", 0.25)?;
    let order: usize = cfg.get("max_order", 3)?;
    let declared: f64 = cfg.get("declared_beta", beta)?;
    let m = model_multiplier(alpha, beta).map_err(|e| Error::Config(e.to_string()))?;
    let range = default_sweep(alpha);
    let mi = miyachi_check(&m, alpha, declared, order, range)?;
    let sd = subdyadic_check(&m, alpha, declared, order.min(2), range, BALL_POINTS)?;
    let mut t = Table::new(&["check", "order", "constant", "slope", "pass"]);
    for (name, tab) in [("miyachi", &mi), ("subdyadic", &sd)] {
        for e in &tab.entries {
            t.push(vec![name.into(), e.sigma.to_string(), num(e.constant), num(e.slope), e.pass.to_string()]);
        }
    }
    let ok = mi.pass() && sd.pass();
    Ok(Report { table: t, summary: format!("multiplier checks {}\n", if ok { "pass" } else { "fail" }), verdict: Some(ok), plot: None })
}

fn propagator_cmd(cfg: &Config) -> Result<Report> {
    let lat = cfg.lattice(256.0, 4096)?;
    let alpha: u32 = cfg.get("alpha", 2)?;
    let t0: f64 = cfg.get("t", 1.0)?;
    let beta: f64 = cfg.get("beta", 0.5)?;
    let mid = lat.length() / 2.0;
    let f = accept::packet(lat, mid - 3.0, 1.5, 2.0, 1.0);
    let g = accept::packet(lat, mid + 2.0, 2.5, -1.0, 1.0);
    let pt = ExponentPair::from_point(cfg.get("x", 0.8)?, cfg.get("y", 0.8)?).map_err(|e| Error::Config(e.to_string()))?;
    let rep = propagator(alpha, t0, beta, &f, &g, &pt, None)?;
    let mut t = Table::new(&["t", "mass_error", "pairing", "form", "ratio", "cubes"]);
    t.push(vec![num(t0), num(rep.mass_error), num(rep.pairing), num(rep.form), num(rep.ratio), rep.collection.cubes().len().to_string()]);
    Ok(Report { table: t, summary: String::new(), verdict: None, plot: None })
}

fn kernel(cfg: &Config) -> Result<Report> {
    let a: f64 = cfg.get("a", 2.0)?;
    let b: f64 = cfg.get("b", 0.5)?;
    let (alpha, beta) = oscillatory_kernel_transfer(a, b, 1).map_err(|e| Error::Config(e.to_string()))?;
    let samples: usize = cfg.get("N", 1 << 17)?;
    let env = kernel_envelope_check(a, b, beta, (8.0, 128.0), cfg.get("radius", 100.0)?, samples)?;
    let mut t = Table::new(&["a", "b", "alpha", "beta", "constant", "floor", "slope", "pass"]);
    t.push(vec![num(a), num(b), num(alpha), num(beta), num(env.constant), num(env.floor), num(env.slope), env.pass.to_string()]);
    Ok(Report { table: t, summary: String::new(), verdict: Some(env.pass), plot: None })
}

fn accept_cmd(cfg: &Config, quick: bool, mislabel: bool) -> Result<Report> {
    let opts = SuiteOptions { quick, mislabel, seed: cfg.get("seed", 0)? };
    let ids: Vec<usize> = match cfg.raw("only") {
        None => (1..=CRITERIA).collect(),
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad criterion `{x}`"))))
            .collect::<Result<_>>()?,
    };
    let mut t = Table::new(&["criterion", "name", "measured", "threshold", "pass", "seconds"]);
    let mut summary = String::new();
    let mut ok = true;
    for id in ids {
        if id == 0 || id > CRITERIA {
            return Err(Error::Config(format!("no criterion {id}")));
        }
        let row = run_criterion(id, &opts)?;
        writeln!(summary, "{}", row.line()).ok();
        ok &= row.pass;
        t.push(vec![
            row.id.to_string(),
            row.name.into(),
            row.measured.replace(',', ";"),
            row.threshold.replace(',', ";"),
            row.pass.to_string(),
            format!("{:.3}", row.seconds),
        ]);
    }
    Ok(Report { table: t, summary, verdict: Some(ok), plot: None })
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Region { common, .. }
        | Command::Decay { common, .. }
        | Command::Dominate { common, .. }
        | Command::Sharpness { common, .. }
        | Command::Weights { common, .. }
        | Command::Pointwise { common, .. }
        | Command::Multiplier { common, .. }
        | Command::Propagator { common, .. }
        | Command::Kernel { common, .. }
        | Command::Accept { common, .. } => common,
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Parameter(_) => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_FAIL,
    }
}

/// Parse, run, write artifacts; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let common = common_of(&cli.command).clone();
    if let Some(th) = common.threads {
        if th == 0 {
            eprintln!("error: threads must be positive");
            return EXIT_CONFIG;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(th).build_global();
    }
    let report = match execute(&cli.command).and_then(|r| check_finite(&r.table).map(|_| r)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let csv = report.table.to_csv();
    match &common.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &csv) {
                eprintln!("error: {}: {e}", p.display());
                return EXIT_CONFIG;
            }
            if common.plot {
                if let Some(script) = &report.plot {
                    let gp = p.with_extension("gp");
                    let body = format!("DATA = '{}'\n{script}", p.display());
                    if let Err(e) = std::fs::write(&gp, body) {
                        eprintln!("error: {}: {e}", gp.display());
                        return EXIT_CONFIG;
                    }
                }
            }
        }
        None => print!("{csv}"),
    }
    eprint!("{}", report.summary);
    match report.verdict {
        Some(false) => EXIT_FAIL,
        _ => 0,
    }
}
