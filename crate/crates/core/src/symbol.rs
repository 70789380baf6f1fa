//! Symbol classes `S^m_{rho,delta}`, model symbols and finite-difference
//! seminorm sweeps.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Class parameters `(m, rho, delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassParams {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
}

impl ClassParams {
    pub fn new(m: f64, rho: f64, delta: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::Parameter(format!("order m = {m}")));
        }
        if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&delta) {
            return Err(Error::Parameter(format!("rho = {rho}, delta = {delta} must lie in [0, 1]")));
        }
        Ok(Self { m, rho, delta })
    }
}

/// Closed-form tag carried by model symbols.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolForm {
    Constant(f64),
    Oscillatory { m: f64, rho: f64, width: f64 },
    Bessel { m: f64 },
    XDependent { m: f64, rho: f64, width: f64, period: f64 },
    Multiplier { alpha: f64, beta: f64 },
    Custom,
}

type EvalFn = dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync;

/// Evaluatable `a(x, xi)` with declared class.
#[derive(Clone)]
pub struct Symbol {
    params: ClassParams,
    label: String,
    form: SymbolForm,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("params", &self.params)
            .field("form", &self.form)
            .finish()
    }
}

impl Symbol {
    pub fn new(
        params: ClassParams,
        label: impl Into<String>,
        form: SymbolForm,
        eval: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { params, label: label.into(), form, eval: Arc::new(eval) }
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.eval)(x, xi)
    }

    /// Shortcut for x-independent symbols in one dimension.
    pub fn eval_xi(&self, xi: f64) -> Complex64 {
        (self.eval)(&[0.0], &[xi])
    }

    pub fn params(&self) -> ClassParams {
        self.params
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn form(&self) -> &SymbolForm {
        &self.form
    }

    pub fn is_x_independent(&self) -> bool {
        !matches!(self.form, SymbolForm::XDependent { .. } | SymbolForm::Custom)
    }

    /// Same function, different declared class.
    pub fn with_params(&self, params: ClassParams) -> Symbol {
        Symbol { params, ..self.clone() }
    }

    /// Scalar multiple, keeping the closed-form tag only for constants.
    pub fn scaled(&self, c: f64) -> Symbol {
        let inner = self.eval.clone();
        let form = match self.form {
            SymbolForm::Constant(v) => SymbolForm::Constant(c * v),
            ref f if self.is_x_independent() => f.clone(),
            _ => SymbolForm::Custom,
        };
        Symbol {
            params: self.params,
            label: format!("{c}*{}", self.label),
            form,
            eval: Arc::new(move |x, xi| inner(x, xi) * c),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// `exp(-1/t)` for `t > 0`, else 0.
pub fn bump_tail(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    let a = bump_tail(t);
    let b = bump_tail(1.0 - t);
    if a + b == 0.0 {
        return if t >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// Default width of the smoothed support indicator.
pub const DEFAULT_CUTOFF_WIDTH: f64 = 0.5;

/// `e^{i|xi|^{1-rho}} (1+|xi|)^m` times a smoothed indicator of
/// `{|xi|^{1-rho} >= 1}`, declared in `S^m_{rho,0}`.
pub fn model_oscillatory(m: f64, rho: f64) -> Symbol {
    model_oscillatory_with_width(m, rho, DEFAULT_CUTOFF_WIDTH).expect("default width is valid")
}

/// As [`model_oscillatory`], with the indicator ramping up on
/// `[1 - width, 1]` in `|xi|`.
pub fn model_oscillatory_with_width(m: f64, rho: f64, width: f64) -> Result<Symbol> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::Parameter(format!("cutoff width {width} must lie in (0, 1]")));
    }
    let params = ClassParams::new(m, rho, 0.0)?;
    let eval = move |_x: &[f64], xi: &[f64]| oscillatory_value(m, rho, width, norm(xi));
    Ok(Symbol::new(
        params,
        format!("oscillatory:m={m},rho={rho}"),
        SymbolForm::Oscillatory { m, rho, width },
        eval,
    ))
}

fn oscillatory_value(m: f64, rho: f64, width: f64, r: f64) -> Complex64 {
    let cut = if rho >= 1.0 { 1.0 } else { smooth_step((r - (1.0 - width)) / width) };
    if cut == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(cut * (1.0 + r).powf(m), r.powf(1.0 - rho))
}

/// `(1 + |xi|^2)^{m/2}`, declared in `S^m_{1,0}`.
pub fn model_bessel(m: f64) -> Symbol {
    let params = ClassParams { m, rho: 1.0, delta: 0.0 };
    Symbol::new(params, format!("bessel:m={m}"), SymbolForm::Bessel { m }, move |_x, xi| {
        Complex64::new((1.0 + xi.iter().map(|t| t * t).sum::<f64>()).powf(0.5 * m), 0.0)
    })
}

/// `(2 + sin(2 pi x_1 / period))` times [`model_oscillatory`].
pub fn model_x_dependent(m: f64, rho: f64, period: f64) -> Symbol {
    let width = DEFAULT_CUTOFF_WIDTH;
    let params = ClassParams { m, rho, delta: 0.0 };
    let w = 2.0 * std::f64::consts::PI / period;
    Symbol::new(
        params,
        format!("xdep:m={m},rho={rho}"),
        SymbolForm::XDependent { m, rho, width, period },
        move |x, xi| (2.0 + (w * x[0]).sin()) * oscillatory_value(m, rho, width, norm(xi)),
    )
}

/// Constant symbol declared in `S^m_{rho,delta}`.
pub fn constant(c: f64, params: ClassParams) -> Symbol {
    Symbol::new(params, format!("constant:{c}"), SymbolForm::Constant(c), move |_, _| Complex64::new(c, 0.0))
}

/// Parse `name:key=value,...` presets. `period` is used by `xdep`.
pub fn from_preset(spec: &str, period: f64) -> Result<Symbol> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = std::collections::HashMap::new();
    for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Parse(format!("preset argument `{part}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Parse(format!("preset value `{part}`")))?;
        kv.insert(k.trim().to_string(), v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| Error::Parse(format!("preset `{spec}` lacks `{k}`")));
    match name.trim() {
        "oscillatory" => {
            let w = kv.get("width").copied().unwrap_or(DEFAULT_CUTOFF_WIDTH);
            model_oscillatory_with_width(get("m")?, get("rho")?, w)
        }
        "bessel" => Ok(model_bessel(get("m")?)),
        "xdep" => Ok(model_x_dependent(get("m")?, get("rho")?, period)),
        "multiplier" => crate::multiplier::model_multiplier(get("alpha")?, get("beta")?),
        other => Err(Error::Parse(format!("unknown symbol preset `{other}`"))),
    }
}

/// Central difference weights for derivative orders 0..=4 on offsets
/// `-2..=2`.
pub const STENCILS: [[f64; 5]; 5] = [
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, -2.0, 1.0, 0.0],
    [-0.5, 1.0, 0.0, -1.0, 0.5],
    [1.0, -4.0, 6.0, -4.0, 1.0],
];

/// Base step for an order-`k` difference: balances truncation against
/// rounding, which grows like `eps / h^k`.
pub fn base_step(order: usize) -> f64 {
    if order == 0 {
        1.0
    } else {
        2f64.powf(-20.0 / order as f64)
    }
}

/// `d_x^nu d_xi^sigma a(x, xi)` (one dimension) by tensor central
/// differences with steps `hx`, `hxi`.
pub fn finite_difference(a: &Symbol, x: f64, xi: f64, nu: usize, sigma: usize, hx: f64, hxi: f64) -> Result<Complex64> {
    if nu > 4 || sigma > 4 {
        return Err(Error::Parameter("derivative order above 4".into()));
    }
    if (nu > 0 && x + hx == x) || (sigma > 0 && (xi + hxi == xi || xi - 2.0 * hxi == xi)) {
        return Err(Error::StepUnderflow);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &wx) in STENCILS[nu].iter().enumerate() {
        if wx == 0.0 {
            continue;
        }
        for (j, &wk) in STENCILS[sigma].iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let xs = x + (i as f64 - 2.0) * hx;
            let ks = xi + (j as f64 - 2.0) * hxi;
            acc += a.eval(&[xs], &[ks]) * (wx * wk);
        }
    }
    Ok(acc / (hx.powi(nu as i32) * hxi.powi(sigma as i32)))
}

/// One row of a seminorm table.
#[derive(Clone, Debug, PartialEq)]
pub struct SeminormEntry {
    pub nu: usize,
    pub sigma: usize,
    /// Sup of the normalized derivative over the sample set.
    pub constant: f64,
    /// `(band lower edge, band max)` per dyadic band.
    pub bands: Vec<(f64, f64)>,
    /// Slope of `log2(band max)` against `log2 |xi|`.
    pub slope: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeminormTable {
    pub entries: Vec<SeminormEntry>,
}

impl SeminormTable {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
    pub fn get(&self, nu: usize, sigma: usize) -> Option<&SeminormEntry> {
        self.entries.iter().find(|e| e.nu == nu && e.sigma == sigma)
    }
}

/// Slope above which band maxima count as growing.
pub const GROWTH_TOLERANCE: f64 = 0.1;
/// Normalized values below this are treated as exact zeros.
const ZERO_FLOOR: f64 = 1e-8;
const POINTS_PER_BAND: usize = 12;
const X_SAMPLES: usize = 6;

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Natural x-scale of a symbol for step selection and sampling.
fn x_scale(a: &Symbol) -> f64 {
    match a.form() {
        SymbolForm::XDependent { period, .. } => *period,
        _ => 1.0,
    }
}

/// Measure `sup |d_x^nu d_xi^sigma a| (1+|xi|)^{-m + rho sigma - delta nu}`
/// for `nu + sigma <= max_order`, per dyadic band of `|xi|` in
/// `freq_range`, and flag growth across bands.
pub fn seminorm_check(a: &Symbol, max_order: usize, freq_range: (f64, f64)) -> Result<SeminormTable> {
    if max_order > 4 {
        return Err(Error::Parameter(format!("max_order {max_order} above 4")));
    }
    let (lo, hi) = freq_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("frequency range ({lo}, {hi})")));
    }
    let ClassParams { m, rho, delta } = a.params();
    let b0 = lo.log2().floor() as i32;
    let b1 = (hi.log2().ceil() as i32).max(b0 + 1);
    let xs = x_scale(a);
    let xpts: Vec<f64> = (0..X_SAMPLES).map(|i| xs * (i as f64 + 0.3) / X_SAMPLES as f64).collect();
    let mut entries = Vec::new();
    for total in 0..=max_order {
        for nu in 0..=total {
            let sigma = total - nu;
            let hx = base_step(nu) * xs;
            let mut bands = Vec::new();
            for b in b0..b1 {
                let mut bmax = 0.0f64;
                for t in 0..POINTS_PER_BAND {
                    let r = 2f64.powf(b as f64 + t as f64 / POINTS_PER_BAND as f64);
                    for xi in [r, -r] {
                        let hxi = base_step(sigma) * (1.0 + r).powf(rho);
                        let w = (1.0 + r).powf(-m + rho * sigma as f64 - delta * nu as f64);
                        for &x in &xpts {
                            let d = finite_difference(a, x, xi, nu, sigma, hx, hxi)?;
                            let v = d.norm() * w;
                            if !v.is_finite() {
                                return Err(Error::Numerical(format!("non-finite derivative at xi = {xi}")));
                            }
                            bmax = bmax.max(v);
                        }
                    }
                }
                bands.push((2f64.powi(b), bmax));
            }
            let constant = bands.iter().fold(0.0f64, |acc, b| acc.max(b.1));
            let nz: Vec<&(f64, f64)> = bands.iter().filter(|b| b.1 > ZERO_FLOOR).collect();
            let slope = if nz.len() >= 2 {
                let x: Vec<f64> = nz.iter().map(|b| b.0.log2()).collect();
                let y: Vec<f64> = nz.iter().map(|b| b.1.log2()).collect();
                ols_slope(&x, &y).unwrap_or(0.0)
            } else {
                0.0
            };
            entries.push(SeminormEntry { nu, sigma, constant, bands, slope, pass: slope <= GROWTH_TOLERANCE });
        }
    }
    Ok(SeminormTable { entries })
}
