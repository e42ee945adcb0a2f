//! Numerical checks of the existence and stationarity conditions, memory
//! classification, the regularly varying resolvent limit and path probes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::drift::{Component, DriftError, DriftMeasure, SpatialDensity};
use crate::grid::{fmt17, make_grid, Axis, Field, GridError, SpaceTimeGrid};
use crate::kernels::{effective_kernel, lp_norm, sphere_area, EffectiveKernel, Kernel, KernelError, TemporalFactor};
use crate::levy::{moment_integral, JumpCatalog, LevyBasisSpec, LevyError, Region};
use crate::quad;
use crate::resolvent::{neumann_resolvent, ClosedForm, NeumannOptions, ResolventError, ResolventKind, ResolventRepr};
use crate::simulator::cell_weight;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("kernel changes sign; the long-memory criterion needs a sign-definite kernel")]
    SignIndefinite,
    #[error("axis {axis} has {have} dyadic scales, need at least 3")]
    TooFewScales { axis: usize, have: usize },
    #[error("the càdlàg probe needs the jump catalog of the simulation")]
    NoJumpCatalog,
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    fn of(b: bool) -> Self {
        if b { Verdict::Holds } else { Verdict::Fails }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// the condition being checked, in words
    pub condition: &'static str,
    pub verdict: Verdict,
    pub values: Vec<(&'static str, f64)>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    pub checks: Vec<Check>,
}

impl ConditionReport {
    fn push(&mut self, name: &'static str, condition: &'static str, verdict: Verdict, values: Vec<(&'static str, f64)>, note: impl Into<String>) {
        self.checks.push(Check { name, condition, verdict, values, note: note.into() });
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Fails if any check fails, inconclusive if any is, otherwise holds.
    pub fn overall(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fails) {
            Verdict::Fails
        } else if self.checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Holds
        }
    }

    /// `key = value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "overall = {}", self.overall().as_str());
        for c in &self.checks {
            let _ = writeln!(s, "{}.verdict = {}", c.name, c.verdict.as_str());
            let _ = writeln!(s, "{}.condition = {}", c.name, c.condition);
            for (k, v) in &c.values {
                let _ = writeln!(s, "{}.{} = {}", c.name, k, fmt17(*v));
            }
            if !c.note.is_empty() {
                let _ = writeln!(s, "{}.note = {}", c.name, c.note);
            }
        }
        s
    }
}

/// Submultiplicative weights on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// `(1 + |x|)^eta (log(e v |x|))^gamma`
    PolyLog { eta: f64, gamma: f64 },
    /// `exp(|x|^gamma)`
    Exponential { gamma: f64 },
}

impl WeightFunction {
    pub fn validate(&self) -> Result<(), DiagError> {
        match *self {
            WeightFunction::PolyLog { eta, gamma } if eta >= 0.0 && gamma >= 0.0 => Ok(()),
            WeightFunction::Exponential { gamma } if (0.0..=1.0).contains(&gamma) => Ok(()),
            w => Err(DiagError::InvalidParameter(format!("weight {w:?}"))),
        }
    }

    pub fn eval_r(&self, r: f64) -> f64 {
        match *self {
            WeightFunction::PolyLog { eta, gamma } => (1.0 + r).powf(eta) * r.max(std::f64::consts::E).ln().powf(gamma),
            WeightFunction::Exponential { gamma } => r.powf(gamma).exp(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_r(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// First pair `(x, y)` among `pairs` with `phi(x + y) > phi(x) phi(y)`.
    pub fn submultiplicative_counterexample(&self, pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
        pairs.iter().copied().find(|&(x, y)| self.eval_r((x + y).abs()) > self.eval_r(x.abs()) * self.eval_r(y.abs()) * (1.0 + 1e-12))
    }

    /// `int_{R^d} phi^{-alpha}`, `None` when infinite.
    pub fn inverse_power_integral(&self, alpha: f64, d: usize) -> Option<f64> {
        let dd = d as f64;
        let finite = match *self {
            WeightFunction::PolyLog { eta, gamma } => eta * alpha > dd || (eta * alpha == dd && gamma * alpha > 1.0),
            WeightFunction::Exponential { gamma } => gamma > 0.0,
        };
        if !finite {
            return None;
        }
        let f = |r: f64| r.powi(d as i32 - 1) * self.eval_r(r).powf(-alpha);
        let v = quad::integrate(f, 0.0, 1.0, 1e-13, 1e-10).value + quad::integrate_to_inf(f, 1.0, 1e-13, 1e-10).value;
        Some(sphere_area(d) * v)
    }
}

/// `int_a^inf f`, `None` when the dyadic increments do not settle.
fn improper(f: &dyn Fn(f64) -> f64, a: f64) -> Option<f64> {
    let mut len = 8.0;
    let mut total = quad::integrate(f, a, a + len, 1e-13, 1e-10).value;
    let mut prev_inc = f64::INFINITY;
    for _ in 0..40 {
        let inc = quad::integrate(f, a + len, a + 2.0 * len, 1e-13, 1e-10).value;
        total += inc;
        if inc.abs() <= 1e-11 * total.abs().max(1e-300) || inc == 0.0 {
            return Some(total);
        }
        if len >= 64.0 && inc.abs() >= 0.95 * prev_inc.abs() {
            return None;
        }
        prev_inc = inc;
        len *= 2.0;
    }
    None
}

/// Box `[0, horizon] x [-radius, radius]^d` used for local integrability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBox {
    pub horizon: f64,
    pub radius: f64,
}

impl Default for LocalBox {
    fn default() -> Self {
        Self { horizon: 1.0, radius: 1.0 }
    }
}

/// Midpoint sums of `h(f)` on the box under dyadic refinement.
fn local_refined(f: &(dyn Fn(f64, &[f64]) -> f64 + Sync), h: &(dyn Fn(f64) -> f64 + Sync), bx: LocalBox, d: usize) -> (Verdict, f64, f64) {
    let (start, levels) = match d {
        1 => (16usize, 6),
        2 => (8, 5),
        _ => (4, 4),
    };
    let mut sums = Vec::with_capacity(levels);
    let mut n = start;
    for _ in 0..levels {
        let ht = bx.horizon / n as f64;
        let hx = 2.0 * bx.radius / n as f64;
        let cells = n.pow(d as u32);
        let s: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let t = (i as f64 + 0.5) * ht;
                let mut acc = 0.0;
                let mut x = [0.0; 3];
                for c in 0..cells {
                    let mut r = c;
                    for xa in x.iter_mut().take(d) {
                        *xa = -bx.radius + ((r % n) as f64 + 0.5) * hx;
                        r /= n;
                    }
                    acc += h(f(t, &x[..d]).abs());
                }
                acc
            })
            .sum();
        sums.push(s * ht * hx.powi(d as i32));
        n *= 2;
    }
    let last = sums[levels - 1];
    if !last.is_finite() {
        return (Verdict::Fails, last, f64::INFINITY);
    }
    let i1 = sums[levels - 2] - sums[levels - 3];
    let i2 = last - sums[levels - 2];
    let verdict = if i2.abs() <= 1e-2 * last.abs() + 1e-12 && i2.abs() <= i1.abs() + 1e-14 {
        Verdict::Holds
    } else if i2.abs() >= 0.9 * i1.abs() {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    (verdict, last, i2.abs())
}

fn kernel_local(g: &Kernel, h: &(dyn Fn(f64) -> f64 + Sync), bx: LocalBox, d: usize) -> (Verdict, f64, f64) {
    if let Kernel::Tabulated(f) = g {
        let gr = f.grid();
        let mut acc = 0.0;
        for (c, v) in f.values().iter().enumerate() {
            let t = gr.t(c / gr.spatial_len());
            if t <= bx.horizon + 1e-12 {
                acc += h(v.abs());
            }
        }
        let acc = acc * gr.cell_volume();
        return (Verdict::of(acc.is_finite()), acc, 0.0);
    }
    local_refined(&|t, x| g.eval(t, x), h, bx, d)
}

/// `(|b + int z 1{1 < |z| <= A} nu| / A^{1-alpha})` at `A = 10, ..., 10^6` and the
/// small-jump analogue at `a = 10^-1, ..., 10^-6`.
fn growth_ratios(levy: &LevyBasisSpec, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let big: Vec<f64> = (1..=6)
        .map(|k| {
            let a = 10f64.powi(k);
            (levy.b + levy.nu.first_moment_band(1.0, a)).abs() / a.powf(1.0 - alpha)
        })
        .collect();
    let small: Vec<f64> = (1..=6)
        .map(|k| {
            let a = 10f64.powi(-k);
            (levy.b - levy.nu.first_moment_band(a, 1.0)).abs() / a.powf(1.0 - beta)
        })
        .collect();
    (big, small)
}

fn bounded(seq: &[f64]) -> bool {
    let n = seq.len();
    seq.iter().all(|v| v.is_finite()) && seq[n - 1] <= 2.0 * seq[n / 2] + 1e-12
}

fn drift_checks(r: &mut ConditionReport, levy: &LevyBasisSpec, alpha: f64, beta: f64) {
    let (big, small) = growth_ratios(levy, alpha, beta);
    let vals = |s: &[f64]| vec![("ratio_first", s[0]), ("ratio_last", s[s.len() - 1])];
    if levy.is_symmetric() {
        for name in ["large_jump_growth", "small_jump_growth"] {
            r.push(name, "drift growth O(K) / O(k)", Verdict::Holds, vec![], "symmetric basis: the left-hand sides vanish identically");
        }
        return;
    }
    let (v, note) = if alpha <= 1.0 {
        (Verdict::Holds, "implied by the moment condition for alpha <= 1")
    } else if levy.mean_b1() == Some(0.0) {
        (Verdict::Holds, "implied by the moment condition for alpha > 1 and b1 = 0")
    } else {
        (if bounded(&big) { Verdict::Holds } else { Verdict::Fails }, "numerical growth test")
    };
    r.push("large_jump_growth", "|b + int z 1{1<|z|<=A} nu(dz)| = O(A^{1-alpha})", v, vals(&big), note);
    let (v, note) = if beta >= 1.0 {
        (Verdict::Holds, "implied by the moment condition for beta >= 1")
    } else if levy.drift_b0() == Some(0.0) {
        (Verdict::Holds, "implied by the moment condition for beta < 1 and b0 = 0")
    } else {
        (if bounded(&small) { Verdict::Holds } else { Verdict::Fails }, "numerical growth test")
    };
    r.push("small_jump_growth", "|b - int z 1{a<|z|<=1} nu(dz)| = O(a^{1-beta})", v, vals(&small), note);
}

fn moment_check(r: &mut ConditionReport, levy: &LevyBasisSpec, alpha: f64, beta: f64) -> Result<(), DiagError> {
    let tail = moment_integral(&levy.nu, alpha, Region::Tail)?;
    let core = moment_integral(&levy.nu, beta, Region::Core)?;
    r.push(
        "nu_moments",
        "int |z|^alpha 1{|z|>1} + |z|^beta 1{|z|<=1} nu(dz) < inf",
        Verdict::of(tail.is_finite() && core.is_finite()),
        vec![("tail", tail), ("core", core)],
        "",
    );
    Ok(())
}

/// `int_0^T int phi(x) |mu|(dt, dx)`, `None` when infinite or not computable.
fn weighted_mass(mu: &DriftMeasure, phi: &WeightFunction, horizon: f64) -> Option<f64> {
    let d = mu.dim();
    let sa = sphere_area(d);
    let abs_t = |k: &Arc<dyn Fn(f64) -> f64 + Send + Sync>| quad::integrate(|t| k(t).abs(), 0.0, horizon, 1e-13, 1e-10).value;
    let mut total = 0.0;
    for c in mu.components() {
        total += match c {
            Component::TemporalDirac { k } => abs_t(k),
            Component::Separable { k, f } => {
                let space = match f {
                    SpatialDensity::Lebesgue => return None,
                    _ => {
                        let pos = improper(&|x| phi.eval_r(x) * f.eval(&[x]).abs(), 0.0)?;
                        let neg = improper(&|x| phi.eval_r(x) * f.eval(&[-x]).abs(), 0.0)?;
                        pos + neg
                    }
                };
                abs_t(k) * space
            }
            Component::Heat { lambda } => {
                let inner = |t: f64| {
                    if t <= 0.0 {
                        return 1.0;
                    }
                    let norm = (4.0 * PI * t).powf(-(d as f64) / 2.0);
                    sa * quad::integrate_to_inf(|r| r.powi(d as i32 - 1) * phi.eval_r(r) * norm * (-r * r / (4.0 * t)).exp(), 0.0, 1e-13, 1e-10).value
                };
                lambda.abs() * quad::integrate(inner, 0.0, horizon, 1e-12, 1e-9).value
            }
            Component::Joint { k, .. } => {
                if d != 1 {
                    return None;
                }
                let mut acc = 0.0;
                for sgn in [1.0, -1.0] {
                    let inner = |t: f64| improper(&|x| phi.eval_r(x) * k(t, &[sgn * x]).abs(), 0.0).unwrap_or(f64::INFINITY);
                    acc += quad::integrate(inner, 0.0, horizon, 1e-12, 1e-9).value;
                }
                acc
            }
            Component::Tabulated { field } => {
                let g = field.grid();
                let mut acc = 0.0;
                let mut x = [0.0; 3];
                for (c, v) in field.values().iter().enumerate() {
                    if g.t(c / g.spatial_len()) <= horizon {
                        g.x_into(c % g.spatial_len(), &mut x[..d]);
                        acc += phi.eval(&x[..d]) * v.abs();
                    }
                }
                acc * g.cell_volume()
            }
            Component::Atom { t, mass } => {
                if *t <= horizon { mass.abs() } else { 0.0 }
            }
        };
    }
    total.is_finite().then_some(total)
}

/// `sup phi |g|` over `[0, T] x R^d` sampled along rays; `None` unless the far
/// samples decay.
fn weighted_sup(g: &Kernel, phi: &WeightFunction, horizon: f64, d: usize) -> Option<f64> {
    let mut dirs: Vec<[f64; 3]> = Vec::new();
    for a in 0..d {
        let mut e = [0.0; 3];
        e[a] = 1.0;
        dirs.push(e);
        e[a] = -1.0;
        dirs.push(e);
    }
    let diag = 1.0 / (d as f64).sqrt();
    dirs.push([diag, diag, diag]);
    let radii: Vec<f64> = std::iter::once(0.0).chain((0..=80).map(|k| 1e-2 * 10f64.powf(k as f64 / 16.0))).collect();
    let mut sup: f64 = 0.0;
    let mut far: f64 = 0.0;
    for k in 0..=32 {
        let t = horizon * k as f64 / 32.0;
        for dir in &dirs {
            for (ri, &r) in radii.iter().enumerate() {
                let x: Vec<f64> = dir[..d].iter().map(|u| u * r).collect();
                let v = phi.eval_r(r) * g.eval(t, &x).abs();
                if !v.is_finite() {
                    return None;
                }
                sup = sup.max(v);
                if ri + 8 >= radii.len() {
                    far = far.max(v);
                }
            }
        }
    }
    (far <= 1e-6 * sup.max(1e-300) || sup == 0.0).then_some(sup)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceOptions {
    pub local: LocalBox,
}

impl Default for ExistenceOptions {
    fn default() -> Self {
        Self { local: LocalBox::default() }
    }
}

/// Sufficient conditions for the local solution.
pub fn existence_report(
    g: &Kernel,
    mu: &DriftMeasure,
    levy: &LevyBasisSpec,
    alpha: f64,
    beta: f64,
    phi: Option<WeightFunction>,
) -> Result<ConditionReport, DiagError> {
    existence_report_with(g, mu, levy, alpha, beta, phi, &ExistenceOptions::default())
}

pub fn existence_report_with(
    g: &Kernel,
    mu: &DriftMeasure,
    levy: &LevyBasisSpec,
    alpha: f64,
    beta: f64,
    phi: Option<WeightFunction>,
    opts: &ExistenceOptions,
) -> Result<ConditionReport, DiagError> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(1.0..=2.0).contains(&beta) {
        return Err(DiagError::InvalidParameter(format!("alpha = {alpha} must be in (0, 1], beta = {beta} in [1, 2]")));
    }
    if let Some(p) = &phi {
        p.validate()?;
    }
    let d = mu.dim();
    let mut r = ConditionReport::default();
    r.push(
        "beta_gaussian",
        "beta = 2 when sigma != 0",
        Verdict::of(levy.sigma == 0.0 || beta == 2.0),
        vec![("sigma", levy.sigma), ("beta", beta)],
        "",
    );
    moment_check(&mut r, levy, alpha, beta)?;
    let bx = opts.local;
    for (name, cond, p) in [("g_local_alpha", "g in L^alpha_loc", alpha), ("g_local_beta", "g in L^beta_loc", beta)] {
        let (v, val, inc) = kernel_local(g, &|a: f64| a.powf(p), bx, d);
        r.push(name, cond, v, vec![("integral", val), ("last_refinement_change", inc)], format!("box [0, {}] x [-{}, {}]^d", bx.horizon, bx.radius, bx.radius));
    }
    let kk = move |a: f64| if a > 1.0 { a.powf(beta) } else { a.powf(alpha) };
    let (v, val, inc) = kernel_local(g, &kk, bx, d);
    r.push(
        "integrability_kK",
        "int |g| (k(1/|g|) 1{|g|>1} + K(1/|g|) 1{|g|<=1}) < inf with K(A) = A^{1-alpha}, k(a) = a^{1-beta}",
        v,
        vec![("integral", val), ("last_refinement_change", inc)],
        "",
    );
    drift_checks(&mut r, levy, alpha, beta);
    if alpha < 1.0 {
        match phi {
            None => r.push("phi", "a submultiplicative weight phi is supplied", Verdict::Inconclusive, vec![], "required for alpha < 1"),
            Some(w) => {
                let pairs: Vec<(f64, f64)> = (0..200)
                    .map(|k| {
                        let u = (k as f64 * 0.618_033_988_75).fract();
                        let v = (k as f64 * 0.414_213_562_37).fract();
                        (20.0 * u - 10.0, 20.0 * v - 10.0)
                    })
                    .collect();
                let ce = w.submultiplicative_counterexample(&pairs);
                r.push(
                    "phi_submultiplicative",
                    "phi(0) = 1 and phi(x + y) <= phi(x) phi(y)",
                    Verdict::of(ce.is_none() && (w.eval_r(0.0) - 1.0).abs() < 1e-12),
                    ce.map_or(vec![], |(x, y)| vec![("x", x), ("y", y)]),
                    "spot test on 200 pairs",
                );
                let ip = w.inverse_power_integral(alpha, d);
                r.push(
                    "phi_inverse_power",
                    "phi^{-alpha} in L^1",
                    Verdict::of(ip.is_some()),
                    vec![("integral", ip.unwrap_or(f64::INFINITY))],
                    "",
                );
                let wm = weighted_mass(mu, &w, bx.horizon);
                r.push(
                    "phi_mu_local",
                    "phi mu locally finite",
                    if wm.is_some() { Verdict::Holds } else { Verdict::Fails },
                    vec![("mass", wm.unwrap_or(f64::INFINITY))],
                    "",
                );
                // phi (|mu| * |g|) <= (phi |mu|)([0, t] x R^d) sup phi |g|
                let ws = weighted_sup(g, &w, bx.horizon, d);
                let v = match (wm, ws) {
                    (Some(_), Some(_)) => Verdict::Holds,
                    _ => Verdict::Inconclusive,
                };
                r.push(
                    "phi_mu_g_bounded",
                    "phi (|mu| * |g|) locally bounded",
                    v,
                    vec![("sup_phi_g", ws.unwrap_or(f64::INFINITY))],
                    "via (phi|mu|)([0,T] x R^d) * sup phi|g|",
                );
            }
        }
    }
    Ok(r)
}

fn table_like(k: &EffectiveKernel) -> Option<f64> {
    match k.factor_out().1 {
        EffectiveKernel::Gridded(f) | EffectiveKernel::Plain(Kernel::Tabulated(f)) => {
            let g = f.grid();
            Some(g.t(g.time().count - 1))
        }
        EffectiveKernel::Separable { factor: TemporalFactor::Table { dt, values }, .. } => Some(dt * (values.len() - 1) as f64),
        _ => None,
    }
}

/// Global integrability of the effective kernel plus the drift growth conditions.
pub fn stationarity_report(
    k: &EffectiveKernel,
    levy: &LevyBasisSpec,
    alpha: f64,
    beta: f64,
    d: usize,
    rho: Option<&ResolventRepr>,
) -> Result<ConditionReport, DiagError> {
    if !(alpha > 0.0 && alpha <= 2.0) || !(beta > 0.0 && beta <= 2.0) {
        return Err(DiagError::InvalidParameter(format!("alpha = {alpha}, beta = {beta} must lie in (0, 2]")));
    }
    let mut r = ConditionReport::default();
    moment_check(&mut r, levy, alpha, beta)?;
    for (name, cond, p) in [("kernel_l_alpha", "g - rho*g in L^alpha", alpha), ("kernel_l_beta", "g - rho*g in L^beta", beta)] {
        if let Some(h) = table_like(k) {
            let full = lp_norm(k, p, Some(h), d)?.value();
            let half = lp_norm(k, p, Some(0.5 * h), d)?.value();
            let v = if full.is_finite() && (full - half).abs() <= 1e-3 * full.abs() { Verdict::Holds } else { Verdict::Inconclusive };
            r.push(name, cond, v, vec![("window_norm", full), ("second_half", full - half)], "lattice kernel: tail over the second half of the window");
        } else {
            let n = lp_norm(k, p, None, d)?.value();
            r.push(name, cond, Verdict::of(n.is_finite()), vec![("norm", n)], "");
        }
    }
    drift_checks(&mut r, levy, alpha, beta);
    if let Some(rho) = rho {
        let (route, mass) = match &rho.kind {
            ResolventKind::Zero => ("finite total variation", 0.0),
            ResolventKind::ClosedForm(ClosedForm::Ou { lambda }) if *lambda > 0.0 => ("finite total variation with unit mass", 1.0),
            ResolventKind::ClosedForm(ClosedForm::Ou { .. }) => ("none", f64::INFINITY),
            ResolventKind::Gridded { measure, .. } => ("finite total variation on the window", measure.total_variation(crate::drift::TimeRule::Trapezoid)),
            ResolventKind::ClosedForm(_) => ("density (Young)", f64::NAN),
        };
        let v = if route == "none" { Verdict::Inconclusive } else { Verdict::Holds };
        r.push("rho_route", "a sufficient route for g - rho*g in L^p", v, vec![("rho_total_variation", mass)], route);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryClass {
    Short,
    Long,
    Inconclusive,
}

impl MemoryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            MemoryClass::Short => "short",
            MemoryClass::Long => "long",
            MemoryClass::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryReport {
    pub class: MemoryClass,
    /// `(T, int_0^T int |K|, int_0^T int K^2)`
    pub rows: Vec<(f64, f64, f64)>,
    pub l1_ratio: f64,
    pub l2_ratio: f64,
}

fn increment_ratio(v: &[f64]) -> (f64, bool) {
    let n = v.len();
    let i1 = v[n - 2] - v[n - 3];
    let i2 = v[n - 1] - v[n - 2];
    let tiny = i2.abs() <= 1e-9 * v[n - 1].abs().max(1e-300);
    let q = if i1 == 0.0 { if i2 == 0.0 { 0.0 } else { f64::INFINITY } } else { i2.abs() / i1.abs() };
    (q, tiny)
}

fn sign_definite(k: &EffectiveKernel, horizon: f64, d: usize) -> bool {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    let mut x = [0.0; 3];
    for i in 0..=64 {
        let t = horizon * i as f64 / 64.0;
        for j in 0..=32 {
            x[0] = -8.0 + 0.5 * j as f64;
            let v = k.eval(t, &x[..d]);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    lo >= -1e-12 * hi.abs() || hi <= 1e-12 * lo.abs()
}

/// Short or long memory from `L^1` / `L^2` norms over nested horizons
/// (a doubling schedule is expected).
pub fn memory_classify(k: &EffectiveKernel, schedule: &[f64], d: usize) -> Result<MemoryReport, DiagError> {
    if schedule.len() < 3 || schedule.windows(2).any(|w| w[1] <= w[0]) || schedule[0] <= 0.0 {
        return Err(DiagError::InvalidParameter("need at least 3 increasing positive horizons".into()));
    }
    let rows: Vec<(f64, f64, f64)> = schedule
        .par_iter()
        .map(|&t| -> Result<(f64, f64, f64), DiagError> { Ok((t, lp_norm(k, 1.0, Some(t), d)?.value(), lp_norm(k, 2.0, Some(t), d)?.value())) })
        .collect::<Result<_, _>>()?;
    let l1: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (q1, tiny1) = increment_ratio(&l1);
    let (q2, tiny2) = increment_ratio(&l2);
    let conv = |q: f64, tiny: bool| tiny || q < 0.95;
    let class = if l1.iter().all(|v| *v == 0.0) {
        MemoryClass::Short
    } else if conv(q1, tiny1) {
        if conv(q2, tiny2) { MemoryClass::Short } else { MemoryClass::Inconclusive }
    } else if q1 >= 0.98 {
        if !sign_definite(k, *schedule.last().expect("non-empty"), d) {
            return Err(DiagError::SignIndefinite);
        }
        if conv(q2, tiny2) { MemoryClass::Long } else { MemoryClass::Inconclusive }
    } else {
        MemoryClass::Inconclusive
    };
    Ok(MemoryReport { class, rows, l1_ratio: q1, l2_ratio: q2 })
}

fn temporal_grid(horizon: f64, dt: f64) -> Result<SpaceTimeGrid, DiagError> {
    let n = (horizon / dt).ceil() as usize + 1;
    Ok(make_grid(1, Axis::new(0.0, dt, n), &[Axis::new(0.0, 1.0, 1)])?)
}

/// Temporal resolvent of `k(t) = -1/(alpha (1+t)^alpha)` on `[0, horizon]`.
pub fn regvar_resolvent(alpha: f64, horizon: f64, dt: f64) -> Result<ResolventRepr, DiagError> {
    let mu = DriftMeasure::regvar(alpha, 1)?;
    Ok(neumann_resolvent(&mu, &temporal_grid(horizon, dt)?, &NeumannOptions::default())?)
}

/// `g0(x) (1 - int_0^t r)` with `g0 = e^{-|x|}` and the regularly varying drift.
pub fn regvar_example_kernel(alpha: f64, horizon: f64, dt: f64) -> Result<EffectiveKernel, DiagError> {
    let grid = temporal_grid(horizon, dt)?;
    let rho = regvar_resolvent(alpha, horizon, dt)?;
    let g = Kernel::SpatialOnly { g0: Arc::new(|x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>().sqrt()).exp()), tag: "exp".into() };
    Ok(effective_kernel(&g, &rho, &grid)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegVarSequence {
    pub alpha: f64,
    /// `sin(alpha pi) / pi`
    pub target: f64,
    /// `(t, (1 - int_0^t r) t^{1-alpha} L(t))`
    pub points: Vec<(f64, f64)>,
}

impl RegVarSequence {
    pub fn deviations(&self) -> Vec<f64> {
        self.points.iter().map(|p| (p.1 - self.target).abs()).collect()
    }
}

pub fn regvar_limit(alpha: f64, schedule: &[f64], dt: f64) -> Result<RegVarSequence, DiagError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(DiagError::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1/2)")));
    }
    let tmax = schedule.iter().copied().fold(0.0, f64::max);
    if schedule.is_empty() || tmax <= 0.0 {
        return Err(DiagError::InvalidParameter("empty schedule".into()));
    }
    let rho = regvar_resolvent(alpha, tmax, dt)?;
    let col = match &rho.kind {
        ResolventKind::Gridded { measure, .. } => measure.column.clone(),
        _ => unreachable!("temporal Neumann result is gridded"),
    };
    let mut cum = vec![0.0; col.len()];
    for k in 1..col.len() {
        cum[k] = cum[k - 1] + 0.5 * dt * (col[k - 1] + col[k]);
    }
    let points = schedule
        .iter()
        .map(|&t| {
            let k = ((t / dt).round() as usize).min(col.len() - 1);
            let tk = k as f64 * dt;
            (tk, (1.0 - cum[k]) * tk / (alpha * (1.0 + tk).powf(alpha)))
        })
        .collect();
    Ok(RegVarSequence { alpha, target: (alpha * PI).sin() / PI, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrdL2 {
    pub value: f64,
    /// exact mass of the integrand outside the truncated domain
    pub truncation_bound: f64,
    pub target: f64,
}

/// Trapezoid integral of `rt(t, x)^2`, `rt = a(x) e^{-t a(x)}`, `a(x) = (2 pi)^{-1/2} e^{-|x|}`,
/// over `[0, t_max] x [-x_max, x_max]` (`t_max = None` sums the whole time lattice).
pub fn lrd_spatial_l2(dt: f64, dx: f64, t_max: Option<f64>, x_max: f64) -> LrdL2 {
    let a0 = 1.0 / (2.0 * PI).sqrt();
    let nx = (x_max / dx).round() as usize;
    let nt = t_max.map(|t| (t / dt).round() as usize);
    let time_sum = |a: f64| {
        let q = (-2.0 * dt * a).exp();
        let one_minus_q = -(-2.0 * dt * a).exp_m1();
        let s = match nt {
            None => 1.0 / one_minus_q - 0.5,
            Some(n) => {
                let qn = q.powi(n as i32);
                (1.0 - qn * q) / one_minus_q - 0.5 * (1.0 + qn)
            }
        };
        dt * a * a * s
    };
    let mut acc = 0.0;
    for k in 0..=nx {
        let x = k as f64 * dx;
        let w = if k == nx { 0.5 } else { 1.0 };
        let v = time_sum(a0 * (-x).exp());
        acc += if k == 0 { 0.5 * v } else { w * v };
    }
    let value = 2.0 * dx * acc;
    let xm = nx as f64 * dx;
    let x_tail = a0 * (-xm).exp();
    let t_tail = match t_max {
        None => 0.0,
        Some(t) => ((-2.0 * t * a0 * (-xm).exp()).exp() - (-2.0 * t * a0).exp()) / (2.0 * t),
    };
    LrdL2 { value, truncation_bound: x_tail + t_tail, target: a0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Regular,
    /// all increments vanish
    Degenerate,
    NonContinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderEstimate {
    /// 0 for time, `k + 1` for spatial axis `k`
    pub axis: usize,
    pub exponent: f64,
    pub se: f64,
    pub scales: usize,
    pub flag: Regularity,
}

fn axis_info(g: &SpaceTimeGrid, axis: usize) -> (usize, f64, usize) {
    // (count, step, flat stride)
    if axis == 0 {
        (g.time().count, g.time().step, g.spatial_len())
    } else {
        let a = axis - 1;
        let stride: usize = g.space()[a + 1..].iter().map(|x| x.count).product();
        (g.space()[a].count, g.space()[a].step, stride)
    }
}

/// Exponents from the log-log slope of mean squared increments over dyadic lags.
pub fn holder_probe(field: &Field) -> Result<Vec<HolderEstimate>, DiagError> {
    let g = field.grid();
    let vals = field.values();
    let mut out = Vec::new();
    for axis in 0..=g.dim() {
        let (count, step, stride) = axis_info(g, axis);
        if count == 1 {
            continue;
        }
        let mut scales = Vec::new();
        let mut h = 1;
        while 4 * h < count {
            scales.push(h);
            h *= 2;
        }
        if scales.len() < 3 {
            return Err(DiagError::TooFewScales { axis, have: scales.len() });
        }
        let v2: Vec<f64> = scales
            .iter()
            .map(|&h| {
                let mut acc = 0.0;
                let mut n = 0usize;
                for (i, &v) in vals.iter().enumerate() {
                    if (i / stride) % count + h < count {
                        let w = vals[i + h * stride];
                        acc += (w - v) * (w - v);
                        n += 1;
                    }
                }
                acc / n as f64
            })
            .collect();
        if v2.iter().all(|v| *v <= 1e-300) {
            out.push(HolderEstimate { axis, exponent: 1.0, se: 0.0, scales: scales.len(), flag: Regularity::Degenerate });
            continue;
        }
        let xs: Vec<f64> = scales.iter().map(|&h| (h as f64 * step).ln()).collect();
        let ys: Vec<f64> = v2.iter().map(|v| v.max(1e-300).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b = sxy / sxx;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - b * (x - mx)).powi(2)).sum();
        let se_b = (rss / (n - 2.0) / sxx).sqrt();
        let (exponent, se) = (0.5 * b, 0.5 * se_b);
        let flag = if exponent <= 2.0 * se + 0.02 { Regularity::NonContinuous } else { Regularity::Regular };
        out.push(HolderEstimate { axis, exponent, se, scales: scales.len(), flag });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CadlagMode {
    /// approach from the future time slab
    TCadlag,
    /// approach from the future cone `|x' - x| <= c (t' - t)`
    ConeCadlag { c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpAnomaly {
    pub index: usize,
    pub size: f64,
    /// first output node reached by the jump
    pub apex: (usize, [usize; 3]),
    /// max field increment between adjacent nodes of the approach set
    pub anomaly: f64,
    /// the same pairs: sum over jumps of |z| |kernel increment| plus twice the non-jump residual
    pub bound: f64,
    /// the jump's own kernel increment on the approach set
    pub own_modulus: f64,
    /// |X(apex) - X(apex - dt)|
    pub crossing: f64,
    /// max |X - sum z K| on the neighbourhood
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CadlagReport {
    pub jumps: Vec<JumpAnomaly>,
}

impl CadlagReport {
    pub fn holds(&self) -> bool {
        self.jumps.iter().all(|j| j.anomaly <= j.bound * (1.0 + 1e-9) + 1e-12)
    }

    pub fn max_anomaly(&self) -> f64 {
        self.jumps.iter().map(|j| j.anomaly).fold(0.0, f64::max)
    }
}

/// Probe the field around the first `max_jumps` jumps whose neighbourhood of
/// `radius` nodes fits in the grid. `cells` is the increment lattice the
/// catalog refers to and `kernel` the simulated effective kernel.
pub fn cadlag_probe(
    field: &Field,
    catalog: Option<&JumpCatalog>,
    cells: &SpaceTimeGrid,
    kernel: &EffectiveKernel,
    mode: CadlagMode,
    radius: usize,
    max_jumps: usize,
) -> Result<CadlagReport, DiagError> {
    let cat = catalog.ok_or(DiagError::NoJumpCatalog)?;
    let g = field.grid();
    let d = g.dim();
    let dt = cells.time().step;
    let dx: Vec<f64> = cells.space().iter().map(|a| a.step).collect();
    let cell_corner = |c: usize| {
        let mut y = [0.0; 3];
        cells.x_into(c % cells.spatial_len(), &mut y[..d]);
        (cells.t(c / cells.spatial_len()), y)
    };
    let node_x = |j: &[usize; 3]| {
        let mut x = [0.0; 3];
        for a in 0..d {
            x[a] = g.space()[a].coord(j[a]);
        }
        x
    };
    let weight = |c: usize, n: usize, j: &[usize; 3]| {
        let (s, y) = cell_corner(c);
        let x = node_x(j);
        let mut lag = [0.0; 3];
        for a in 0..d {
            lag[a] = x[a] - y[a];
        }
        cell_weight(kernel, g.t(n) - s, &lag[..d], dt, &dx)
    };
    let mut report = CadlagReport::default();
    for (index, jump) in cat.jumps.iter().enumerate() {
        if report.jumps.len() >= max_jumps {
            break;
        }
        let (s, y) = cell_corner(jump.cell);
        let t_first = s + dt;
        let Some(n0) = (0..g.time().count).find(|&n| g.t(n) >= t_first - 1e-9 * dt) else { continue };
        if n0 == 0 || n0 + radius >= g.time().count {
            continue;
        }
        let mut k0 = [0usize; 3];
        let mut inside = true;
        for a in 0..d {
            let ax = &g.space()[a];
            let mid = y[a] + 0.5 * dx[a];
            let k = ((mid - ax.origin) / ax.step).round();
            if k < radius as f64 || k + radius as f64 >= ax.count as f64 {
                inside = false;
            }
            k0[a] = k.max(0.0) as usize;
        }
        if !inside {
            continue;
        }
        let apex_t = s + 0.5 * dt;
        let mut apex_x = [0.0; 3];
        for a in 0..d {
            apex_x[a] = y[a] + 0.5 * dx[a];
        }
        let in_set = |n: usize, j: &[usize; 3]| -> bool {
            if n < n0 {
                return false;
            }
            match mode {
                CadlagMode::TCadlag => true,
                CadlagMode::ConeCadlag { c } => {
                    let x = node_x(j);
                    let r2: f64 = (0..d).map(|a| (x[a] - apex_x[a]).powi(2)).sum();
                    r2.sqrt() <= c * (g.t(n) - apex_t) * (1.0 + 1e-12)
                }
            }
        };
        // neighbourhood nodes
        let side = 2 * radius + 1;
        let mut nodes = Vec::new();
        for dn in 0..=radius {
            for m in 0..side.pow(d as u32) {
                let mut j = [0usize; 3];
                let mut r = m;
                for a in 0..d {
                    j[a] = k0[a] + (r % side) - radius;
                    r /= side;
                }
                nodes.push((n0 + dn, j));
            }
        }
        let mut pairs = Vec::new();
        for &(n, j) in &nodes {
            if !in_set(n, &j) {
                continue;
            }
            if n < n0 + radius && in_set(n + 1, &j) {
                pairs.push(((n, j), (n + 1, j)));
            }
            for a in 0..d {
                if j[a] < k0[a] + radius {
                    let mut j2 = j;
                    j2[a] += 1;
                    if in_set(n, &j2) {
                        pairs.push(((n, j), (n, j2)));
                    }
                }
            }
        }
        let at = |n: usize, j: &[usize; 3]| field.get(n, &j[..d]);
        // the catalog's contribution at each node of the neighbourhood
        let jump_sum = |n: usize, j: &[usize; 3]| -> f64 { cat.jumps.iter().map(|q| q.size * weight(q.cell, n, j)).sum() };
        let residual = nodes.iter().map(|(n, j)| (at(*n, j) - jump_sum(*n, j)).abs()).fold(0.0, f64::max);
        let mut anomaly: f64 = 0.0;
        let mut bound: f64 = 0.0;
        let mut own: f64 = 0.0;
        let mut excess = f64::NEG_INFINITY;
        for (p, q) in &pairs {
            let dxv = (at(p.0, &p.1) - at(q.0, &q.1)).abs();
            let b: f64 = cat.jumps.iter().map(|z| z.size.abs() * (weight(z.cell, p.0, &p.1) - weight(z.cell, q.0, &q.1)).abs()).sum::<f64>() + 2.0 * residual;
            own = own.max(jump.size.abs() * (weight(jump.cell, p.0, &p.1) - weight(jump.cell, q.0, &q.1)).abs());
            anomaly = anomaly.max(dxv);
            if dxv - b > excess {
                excess = dxv - b;
                bound = b;
            }
        }
        if pairs.is_empty() {
            continue;
        }
        if excess <= 0.0 {
            // report the bound at the pair with the largest anomaly
            bound = pairs
                .iter()
                .filter(|(p, q)| ((at(p.0, &p.1) - at(q.0, &q.1)).abs() - anomaly).abs() == 0.0)
                .map(|(p, q)| cat.jumps.iter().map(|z| z.size.abs() * (weight(z.cell, p.0, &p.1) - weight(z.cell, q.0, &q.1)).abs()).sum::<f64>() + 2.0 * residual)
                .fold(0.0, f64::max);
        }
        let crossing = (at(n0, &k0) - at(n0 - 1, &k0)).abs();
        report.jumps.push(JumpAnomaly { index, size: jump.size, apex: (n0, k0), anomaly, bound, own_modulus: own, crossing, residual });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{JumpLaw, LevyMeasureModel};

    fn cp() -> LevyBasisSpec {
        LevyBasisSpec::new(0.0, 0.0, LevyMeasureModel::CompoundPoisson { rate: 1.0, law: JumpLaw::Normal { mean: 0.0, sd: 1.0 } }).unwrap()
    }

    #[test]
    fn ex1_existence_holds() {
        let alpha = 0.5;
        let r = existence_report(
            &Kernel::exp_spatial(1.0).unwrap(),
            &DriftMeasure::ou(1.0, 1).unwrap(),
            &LevyBasisSpec::new(0.3, 0.0, LevyMeasureModel::CompoundPoisson { rate: 2.0, law: JumpLaw::Normal { mean: 1.0, sd: 1.0 } }).unwrap(),
            alpha,
            1.0,
            Some(WeightFunction::PolyLog { eta: 2.0 / alpha, gamma: 0.0 }),
        )
        .unwrap();
        assert_eq!(r.overall(), Verdict::Holds, "{}", r.render());
    }

    #[test]
    fn singular_kernel_fails_l2() {
        let g = Kernel::SpatialOnly { g0: Arc::new(|x: &[f64]| 1.0 / x[0].abs()), tag: "1/|x|".into() };
        let r = existence_report(&g, &DriftMeasure::ou(1.0, 1).unwrap(), &LevyBasisSpec::gaussian(1.0), 1.0, 2.0, None).unwrap();
        assert_eq!(r.get("g_local_beta").unwrap().verdict, Verdict::Fails, "{}", r.render());
    }

    #[test]
    fn symmetric_basis_short_circuits() {
        let r = existence_report(&Kernel::exp_spatial(1.0).unwrap(), &DriftMeasure::ou(1.0, 1).unwrap(), &cp(), 1.0, 2.0, None).unwrap();
        let c = r.get("large_jump_growth").unwrap();
        assert_eq!(c.verdict, Verdict::Holds);
        assert!(c.note.contains("vanish"));
    }

    #[test]
    fn weights() {
        let w = WeightFunction::PolyLog { eta: 2.0, gamma: 0.0 };
        assert_eq!(w.eval_r(0.0), 1.0);
        assert!((w.inverse_power_integral(1.0, 1).unwrap() - 2.0).abs() < 1e-9);
        assert!(WeightFunction::PolyLog { eta: 1.0, gamma: 0.0 }.inverse_power_integral(1.0, 1).is_none());
        assert!(WeightFunction::Exponential { gamma: 0.5 }.submultiplicative_counterexample(&[(1.0, 2.0), (-3.0, 0.5)]).is_none());
        assert!(WeightFunction::PolyLog { eta: 0.0, gamma: 1.0 }.submultiplicative_counterexample(&[(3.0, 3.0)]).is_some());
    }

    #[test]
    fn stationarity_examples() {
        let l = cp();
        let ok = stationarity_report(&EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }, &l, 1.0, 2.0, 1, None).unwrap();
        assert_eq!(ok.overall(), Verdict::Holds);
        let bad = stationarity_report(&EffectiveKernel::Ex2 { lambda: -0.5, lambda_p: 1.0, c: 1.0 }, &l, 1.0, 2.0, 1, None).unwrap();
        assert_eq!(bad.get("kernel_l_alpha").unwrap().verdict, Verdict::Fails);
        assert_eq!(stationarity_report(&EffectiveKernel::Zero, &l, 1.0, 2.0, 1, None).unwrap().overall(), Verdict::Holds);
    }

    #[test]
    fn memory_short_and_zero() {
        let s = [4.0, 8.0, 16.0, 32.0];
        assert_eq!(memory_classify(&EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }, &s, 1).unwrap().class, MemoryClass::Short);
        assert_eq!(memory_classify(&EffectiveKernel::Zero, &s, 1).unwrap().class, MemoryClass::Short);
    }

    #[test]
    fn regvar_rejects_alpha() {
        assert!(matches!(regvar_limit(0.6, &[16.0], 0.1), Err(DiagError::InvalidParameter(_))));
        assert!(matches!(regvar_limit(0.0, &[16.0], 0.1), Err(DiagError::InvalidParameter(_))));
    }

    #[test]
    fn plancherel_coarse_and_fine() {
        let coarse = lrd_spatial_l2(0.5, 0.5, None, 20.0);
        assert!((coarse.value - coarse.target).abs() < 5e-2, "{coarse:?}");
        let mid = lrd_spatial_l2(0.1, 0.1, None, 20.0);
        let fine = lrd_spatial_l2(0.01, 0.01, None, 20.0);
        assert!((fine.value - fine.target).abs() < (mid.value - mid.target).abs());
        assert!((fine.value - fine.target).abs() < 1e-3, "{fine:?}");
        let cut = lrd_spatial_l2(0.01, 0.01, Some(50.0), 5.0);
        assert!(cut.truncation_bound > 0.0 && (cut.value + cut.truncation_bound - cut.target).abs() < 1e-3);
    }

    #[test]
    fn holder_constant_and_white_noise() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 64), &[Axis::new(0.0, 0.1, 64)]).unwrap();
        let c = holder_probe(&Field::from_fn(g.clone(), |_, _| 1.5).unwrap()).unwrap();
        assert!(c.iter().all(|e| e.flag == Regularity::Degenerate && e.exponent == 1.0));
        let mut rng = crate::rng::CounterRng::new(3);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.open01() - 0.5).collect();
        let w = holder_probe(&Field::new(g.clone(), vals).unwrap()).unwrap();
        assert!(w.iter().all(|e| e.flag == Regularity::NonContinuous && e.exponent.abs() < 0.02), "{w:?}");
        let small = make_grid(1, Axis::new(0.0, 0.1, 8), &[Axis::new(0.0, 0.1, 64)]).unwrap();
        assert!(matches!(holder_probe(&Field::zeros(small)), Err(DiagError::TooFewScales { axis: 0, .. })));
    }

    #[test]
    fn cadlag_needs_catalog_and_empty_for_gaussian() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 8), &[Axis::new(0.0, 0.1, 8)]).unwrap();
        let f = Field::zeros(g.clone());
        let k = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
        assert!(matches!(cadlag_probe(&f, None, &g, &k, CadlagMode::TCadlag, 2, 10), Err(DiagError::NoJumpCatalog)));
        let r = cadlag_probe(&f, Some(&JumpCatalog::default()), &g, &k, CadlagMode::TCadlag, 2, 10).unwrap();
        assert!(r.jumps.is_empty() && r.holds());
    }
}
