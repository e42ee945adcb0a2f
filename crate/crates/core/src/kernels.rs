//! Noise propagation functions `g` and effective kernels `g - rho * g`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::drift::{convolve_gridded_function, difference_lattice, DriftError, FnX, TimeRule};
use crate::grid::{Field, GridError, SpaceTimeGrid};
use crate::quad;
use crate::resolvent::{ClosedForm, ResolventError, ResolventKind, ResolventRepr};
use crate::special::{gamma, upper_gamma};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone)]
pub enum Kernel {
    /// `e^{-lambda' |x|}`
    ExpSpatial { lambda_p: f64 },
    /// `1{|x| <= ct} e^{-lambda' |x|}`
    Cone { c: f64, lambda_p: f64 },
    /// `g0(x)`, constant in time
    SpatialOnly { g0: FnX, tag: String },
    Tabulated(Field),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::ExpSpatial { lambda_p } => write!(f, "ExpSpatial({lambda_p})"),
            Kernel::Cone { c, lambda_p } => write!(f, "Cone(c={c}, {lambda_p})"),
            Kernel::SpatialOnly { tag, .. } => write!(f, "SpatialOnly({tag})"),
            Kernel::Tabulated(fd) => write!(f, "Tabulated({:?})", fd.grid()),
        }
    }
}

impl Kernel {
    pub fn exp_spatial(lambda_p: f64) -> Result<Self, KernelError> {
        if !(lambda_p > 0.0 && lambda_p.is_finite()) {
            return Err(KernelError::InvalidParameter(format!("lambda' = {lambda_p} must be > 0")));
        }
        Ok(Kernel::ExpSpatial { lambda_p })
    }

    pub fn cone(c: f64, lambda_p: f64) -> Result<Self, KernelError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(KernelError::InvalidParameter(format!("c = {c} must be > 0")));
        }
        if !lambda_p.is_finite() {
            return Err(KernelError::InvalidParameter(format!("lambda' = {lambda_p}")));
        }
        Ok(Kernel::Cone { c, lambda_p })
    }

    /// `g(t, x)`; zero for `t < 0`.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Kernel::ExpSpatial { lambda_p } => (-lambda_p * norm(x)).exp(),
            Kernel::Cone { c, lambda_p } => {
                let r = norm(x);
                if r <= c * t { (-lambda_p * r).exp() } else { 0.0 }
            }
            Kernel::SpatialOnly { g0, .. } => g0(x),
            Kernel::Tabulated(fd) => fd.interpolate(t, x),
        }
    }

    /// `g` sampled at the nodes of `grid`.
    pub fn tabulate(&self, grid: &SpaceTimeGrid) -> Result<Field, GridError> {
        Field::from_fn(grid.clone(), |t, x| self.eval(t, x))
    }
}

/// Time factor `F` of a separable effective kernel `g0(x) F(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalFactor {
    /// `e^{-lambda t}`
    Exp(f64),
    /// values at `t = k dt`, linear in between, held constant after the last node
    Table { dt: f64, values: Vec<f64> },
}

impl TemporalFactor {
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            TemporalFactor::Exp(l) => (-l * t).exp(),
            TemporalFactor::Table { dt, values } => {
                let u = t / dt;
                let k = u.floor() as usize;
                if k + 1 >= values.len() {
                    return *values.last().unwrap_or(&0.0);
                }
                let w = u - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }
}

#[derive(Clone)]
pub enum EffectiveKernel {
    Zero,
    /// `e^{-lambda t - lambda' |x|}`
    Ex1 { lambda: f64, lambda_p: f64 },
    /// `1{|x| <= ct} e^{-lambda t - (lambda' - lambda/c) |x|}`
    Ex2 { lambda: f64, lambda_p: f64, c: f64 },
    /// `g` itself (zero resolvent)
    Plain(Kernel),
    /// `g0(x) F(t)`
    Separable { g0: FnX, tag: String, factor: TemporalFactor },
    Gridded(Field),
    /// `a` times another kernel; the simulator applies `a` after convolving
    Scaled { a: f64, inner: Box<EffectiveKernel> },
}

impl fmt::Debug for EffectiveKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectiveKernel::Zero => write!(f, "Zero"),
            EffectiveKernel::Ex1 { lambda, lambda_p } => write!(f, "Ex1(lambda={lambda}, lambda'={lambda_p})"),
            EffectiveKernel::Ex2 { lambda, lambda_p, c } => write!(f, "Ex2(lambda={lambda}, lambda'={lambda_p}, c={c})"),
            EffectiveKernel::Plain(k) => write!(f, "Plain({k:?})"),
            EffectiveKernel::Separable { tag, factor, .. } => write!(f, "Separable({tag}, {factor:?})"),
            EffectiveKernel::Gridded(fd) => write!(f, "Gridded({:?})", fd.grid()),
            EffectiveKernel::Scaled { a, inner } => write!(f, "{a} * {inner:?}"),
        }
    }
}

impl EffectiveKernel {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            EffectiveKernel::Zero => 0.0,
            EffectiveKernel::Ex1 { lambda, lambda_p } => (-lambda * t - lambda_p * norm(x)).exp(),
            EffectiveKernel::Ex2 { lambda, lambda_p, c } => {
                let r = norm(x);
                if r <= c * t { (-lambda * t - (lambda_p - lambda / c) * r).exp() } else { 0.0 }
            }
            EffectiveKernel::Plain(k) => k.eval(t, x),
            EffectiveKernel::Separable { g0, factor, .. } => g0(x) * factor.eval(t),
            EffectiveKernel::Gridded(fd) => fd.interpolate(t, x),
            EffectiveKernel::Scaled { a, inner } => a * inner.eval(t, x),
        }
    }

    /// Kernels known only on a lattice.
    pub fn lattice(&self) -> Option<&Field> {
        match self {
            EffectiveKernel::Gridded(f) | EffectiveKernel::Plain(Kernel::Tabulated(f)) => Some(f),
            _ => None,
        }
    }

    pub fn scaled(self, a: f64) -> Self {
        EffectiveKernel::Scaled { a, inner: Box::new(self) }
    }

    /// Strip scalar factors: `(a, core)` with `self = a * core`.
    pub fn factor_out(&self) -> (f64, &EffectiveKernel) {
        match self {
            EffectiveKernel::Scaled { a, inner } => {
                let (b, k) = inner.factor_out();
                (a * b, k)
            }
            k => (1.0, k),
        }
    }

    /// `g - rho * g` sampled on `grid`.
    pub fn tabulate(&self, grid: &SpaceTimeGrid) -> Result<Field, GridError> {
        if let EffectiveKernel::Gridded(f) = self {
            if f.grid() == grid {
                return Ok(f.clone());
            }
        }
        Field::from_fn(grid.clone(), |t, x| self.eval(t, x))
    }
}

/// `g - rho * g`, in closed form for recognized pairs and on `grid` otherwise.
pub fn effective_kernel(g: &Kernel, rho: &ResolventRepr, grid: &SpaceTimeGrid) -> Result<EffectiveKernel, KernelError> {
    effective_kernel_with(g, rho, grid, TimeRule::Trapezoid)
}

pub fn effective_kernel_with(g: &Kernel, rho: &ResolventRepr, grid: &SpaceTimeGrid, rule: TimeRule) -> Result<EffectiveKernel, KernelError> {
    match (&rho.kind, g) {
        (ResolventKind::Zero, _) => return Ok(EffectiveKernel::Plain(g.clone())),
        (ResolventKind::ClosedForm(ClosedForm::Ou { lambda }), Kernel::ExpSpatial { lambda_p }) => {
            return Ok(EffectiveKernel::Ex1 { lambda: *lambda, lambda_p: *lambda_p })
        }
        (ResolventKind::ClosedForm(ClosedForm::Ou { lambda }), Kernel::Cone { c, lambda_p }) => {
            return Ok(EffectiveKernel::Ex2 { lambda: *lambda, lambda_p: *lambda_p, c: *c })
        }
        (ResolventKind::ClosedForm(ClosedForm::Ou { lambda }), Kernel::SpatialOnly { g0, tag }) => {
            return Ok(EffectiveKernel::Separable { g0: g0.clone(), tag: tag.clone(), factor: TemporalFactor::Exp(*lambda) })
        }
        (ResolventKind::Gridded { measure, .. }, Kernel::SpatialOnly { g0, tag }) if measure.is_temporal() && measure.atoms.is_empty() => {
            // 1 - int_0^t rho(ds) by the trapezoid rule
            let dt = measure.grid().time().step;
            let r = &measure.column;
            let mut values = Vec::with_capacity(r.len());
            let mut acc = 0.0;
            values.push(1.0);
            for k in 1..r.len() {
                acc += 0.5 * dt * (r[k - 1] + r[k]);
                values.push(1.0 - acc);
            }
            return Ok(EffectiveKernel::Separable { g0: g0.clone(), tag: tag.clone(), factor: TemporalFactor::Table { dt, values } });
        }
        _ => {}
    }
    if grid.time().origin != 0.0 {
        return Err(GridError::GridMismatch.into());
    }
    let gf = g.tabulate(grid)?;
    let lat = difference_lattice(grid)?;
    let rm = rho.on_grid(&lat)?;
    let conv = convolve_gridded_function(&rm, &gf, rule)?;
    Ok(EffectiveKernel::Gridded(gf.zip(&conv, |a, b| a - b)?))
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// `int_{R^d} e^{-a |x|} dx`
pub(crate) fn radial_exp(a: f64, d: usize) -> f64 {
    if a <= 0.0 {
        return f64::INFINITY;
    }
    sphere_area(d) * gamma(d as f64) / a.powi(d as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub quadrature: f64,
    pub exact: Option<f64>,
}

impl NormReport {
    /// The exact value when known, else the quadrature.
    pub fn value(&self) -> f64 {
        self.exact.unwrap_or(self.quadrature)
    }
}

fn time_integral(f: impl Fn(f64) -> f64, horizon: Option<f64>) -> f64 {
    match horizon {
        Some(t) => quad::integrate(&f, 0.0, t, 1e-13, 1e-10).value,
        None => {
            // divergence shows up as non-shrinking doubling increments
            let mut prev = quad::integrate(&f, 0.0, 16.0, 1e-13, 1e-10).value;
            let mut inc_prev = f64::INFINITY;
            let mut t = 16.0;
            for _ in 0..10 {
                let inc = quad::integrate(&f, t, 2.0 * t, 1e-13, 1e-10).value;
                let total = prev + inc;
                if inc.abs() <= 1e-12 * total.abs().max(1e-300) {
                    return total + quad::integrate_to_inf(&f, 2.0 * t, 1e-13, 1e-10).value;
                }
                if inc.abs() >= 0.95 * inc_prev.abs() && t >= 64.0 {
                    return f64::INFINITY;
                }
                inc_prev = inc;
                prev = total;
                t *= 2.0;
            }
            let tail = quad::integrate_to_inf(&f, t, 1e-13, 1e-10);
            if tail.converged && tail.value.is_finite() { prev + tail.value } else { f64::INFINITY }
        }
    }
}

pub(crate) fn spatial_integral(f: &dyn Fn(&[f64]) -> f64, d: usize) -> f64 {
    match d {
        1 => quad::integrate_real_line(|x| f(&[x]), 1e-13, 1e-10).value,
        2 => quad::integrate_real_line(|x| quad::integrate_real_line(|y| f(&[x, y]), 1e-13, 1e-9).value, 1e-12, 1e-9).value,
        _ => quad::integrate_real_line(
            |x| {
                quad::integrate_real_line(|y| quad::integrate_real_line(|z| f(&[x, y, z]), 1e-13, 1e-8).value, 1e-12, 1e-8).value
            },
            1e-11,
            1e-8,
        )
        .value,
    }
}

fn lattice_norm(f: &Field, p: f64, horizon: Option<f64>) -> f64 {
    let g = f.grid();
    let dt = g.time().step;
    let n = g.time().count;
    let mut acc = 0.0;
    for i in 0..n {
        let t = g.t(i);
        if horizon.is_some_and(|h| t > h + 1e-12 * dt) {
            break;
        }
        let last = i + 1 == n || horizon.is_some_and(|h| g.t(i + 1) > h + 1e-12 * dt);
        let w = if i == 0 || last { 0.5 } else { 1.0 };
        let row: f64 = f.slab(i).iter().map(|v| v.abs().powf(p)).sum();
        acc += w * row;
    }
    acc * dt * g.spatial_cell_volume()
}

/// `int_0^H int |K|^p dx dt` (`H = infinity` for `horizon = None`); `d` is the spatial dimension.
pub fn lp_norm(k: &EffectiveKernel, p: f64, horizon: Option<f64>, d: usize) -> Result<NormReport, KernelError> {
    if !(p > 0.0) {
        return Err(KernelError::InvalidParameter(format!("p = {p} must be > 0")));
    }
    let sa = sphere_area(d);
    let dd = d as i32;
    let r = match k {
        EffectiveKernel::Zero => NormReport { quadrature: 0.0, exact: Some(0.0) },
        EffectiveKernel::Ex1 { lambda, lambda_p } => {
            let space = sa * quad::integrate_to_inf(|r| r.powi(dd - 1) * (-lambda_p * p * r).exp(), 0.0, 1e-14, 1e-11).value;
            let time = match horizon {
                None if *lambda <= 0.0 => f64::INFINITY,
                _ => time_integral(|t| (-lambda * p * t).exp(), horizon),
            };
            let exact = match horizon {
                None if *lambda > 0.0 => Some(radial_exp(lambda_p * p, d) / (lambda * p)),
                None => Some(f64::INFINITY),
                Some(h) if *lambda != 0.0 => Some(radial_exp(lambda_p * p, d) * (1.0 - (-lambda * p * h).exp()) / (lambda * p)),
                Some(h) => Some(radial_exp(lambda_p * p, d) * h),
            };
            NormReport { quadrature: space * time, exact }
        }
        EffectiveKernel::Ex2 { lambda, lambda_p, c } => {
            let a = (lambda_p - lambda / c) * p;
            let inner = |t: f64| {
                let rmax = c * t;
                sa * quad::integrate(|r| r.powi(dd - 1) * (-a * r).exp(), 0.0, rmax, 1e-14, 1e-11).value * (-lambda * p * t).exp()
            };
            let quadrature = match horizon {
                None if *lambda <= 0.0 => f64::INFINITY,
                _ => time_integral(inner, horizon),
            };
            let exact = match horizon {
                None if *lambda > 0.0 && *lambda_p > 0.0 => Some(radial_exp(lambda_p * p, d) / (lambda * p)),
                None => Some(f64::INFINITY),
                Some(_) => None,
            };
            NormReport { quadrature, exact }
        }
        EffectiveKernel::Plain(g) => match g {
            Kernel::Tabulated(f) => NormReport { quadrature: lattice_norm(f, p, horizon), exact: None },
            Kernel::ExpSpatial { lambda_p } => {
                let space = radial_exp(lambda_p * p, d);
                NormReport { quadrature: horizon.map_or(f64::INFINITY, |h| h * space), exact: None }
            }
            Kernel::Cone { c, lambda_p } => {
                let inner = |t: f64| sa * quad::integrate(|r| r.powi(dd - 1) * (-lambda_p * p * r).exp(), 0.0, c * t, 1e-14, 1e-11).value;
                NormReport { quadrature: horizon.map_or(f64::INFINITY, |_| time_integral(inner, horizon)), exact: None }
            }
            Kernel::SpatialOnly { g0, .. } => {
                let space = spatial_integral(&|x| g0(x).abs().powf(p), d);
                let q = if space == 0.0 { 0.0 } else { horizon.map_or(f64::INFINITY, |h| h * space) };
                NormReport { quadrature: q, exact: None }
            }
        },
        EffectiveKernel::Separable { g0, factor, .. } => {
            let space = spatial_integral(&|x| g0(x).abs().powf(p), d);
            let time = match factor {
                TemporalFactor::Exp(l) => match horizon {
                    None if *l <= 0.0 => f64::INFINITY,
                    None => 1.0 / (l * p),
                    Some(h) if *l != 0.0 => (1.0 - (-l * p * h).exp()) / (l * p),
                    Some(h) => h,
                },
                TemporalFactor::Table { dt, values } => table_norm(values, *dt, p, horizon),
            };
            NormReport { quadrature: if space == 0.0 { 0.0 } else { space * time }, exact: None }
        }
        EffectiveKernel::Gridded(f) => NormReport { quadrature: lattice_norm(f, p, horizon), exact: None },
        EffectiveKernel::Scaled { a, inner } => {
            let r = lp_norm(inner, p, horizon, d)?;
            let s = a.abs().powf(p);
            NormReport { quadrature: s * r.quadrature, exact: r.exact.map(|e| s * e) }
        }
    };
    Ok(r)
}

/// `int_0^H |F|^p` for a tabulated factor; with `H = infinity` the dyadic partial
/// integrals must settle, otherwise the result is infinite.
fn table_norm(values: &[f64], dt: f64, p: f64, horizon: Option<f64>) -> f64 {
    let upto = |n: usize| -> f64 {
        let n = n.min(values.len() - 1);
        let mut acc = 0.0;
        for k in 0..n {
            acc += 0.5 * dt * (values[k].abs().powf(p) + values[k + 1].abs().powf(p));
        }
        acc
    };
    match horizon {
        Some(h) => upto((h / dt).round() as usize),
        None => {
            let n = values.len() - 1;
            if n < 8 {
                return upto(n);
            }
            let (a, b, c) = (upto(n / 4), upto(n / 2), upto(n));
            let (i1, i2) = (b - a, c - b);
            if i2 > 0.7 * i1 && i2 > 1e-6 * c {
                f64::INFINITY
            } else {
                c
            }
        }
    }
}

/// Fraction of `int int |K|` carried by `t > horizon`.
pub fn temporal_tail(k: &EffectiveKernel, horizon: f64, d: usize) -> Result<f64, KernelError> {
    let (_, core) = k.factor_out();
    let exact = match core {
        EffectiveKernel::Ex1 { lambda, .. } if *lambda > 0.0 => Some((-lambda * horizon).exp()),
        EffectiveKernel::Separable { factor: TemporalFactor::Exp(l), .. } if *l > 0.0 => Some((-l * horizon).exp()),
        _ => None,
    };
    if let Some(e) = exact {
        return Ok(e);
    }
    let total = lp_norm(core, 1.0, None, d)?.value();
    if !total.is_finite() {
        return Ok(1.0);
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    let part = lp_norm(core, 1.0, Some(horizon), d)?.value();
    Ok(((total - part) / total).max(0.0))
}

/// Fraction of `int int |K|` carried by `|x| > radius`, when the spatial profile is known.
pub fn spatial_tail(k: &EffectiveKernel, radius: f64, d: usize) -> Option<f64> {
    let (_, core) = k.factor_out();
    let exp_tail = |lp: f64| upper_gamma(d as f64, lp * radius) / gamma(d as f64);
    match core {
        EffectiveKernel::Zero => Some(0.0),
        EffectiveKernel::Ex1 { lambda_p, .. } | EffectiveKernel::Ex2 { lambda_p, .. } if *lambda_p > 0.0 => Some(exp_tail(*lambda_p)),
        EffectiveKernel::Plain(Kernel::ExpSpatial { lambda_p }) | EffectiveKernel::Plain(Kernel::Cone { lambda_p, .. }) if *lambda_p > 0.0 => {
            Some(exp_tail(*lambda_p))
        }
        EffectiveKernel::Separable { g0, .. } | EffectiveKernel::Plain(Kernel::SpatialOnly { g0, .. }) if d == 1 => {
            let total = quad::integrate_real_line(|x| g0(&[x]).abs(), 1e-13, 1e-10).value;
            if total == 0.0 {
                return Some(0.0);
            }
            let tail = quad::integrate_to_inf(|x| g0(&[x]).abs(), radius, 1e-14, 1e-10).value
                + quad::integrate_to_inf(|x| g0(&[-x]).abs(), radius, 1e-14, 1e-10).value;
            Some(tail / total)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftMeasure;
    use crate::grid::{make_grid, Axis};
    use crate::resolvent::closed_form_resolvent;
    use std::sync::Arc;

    fn ou(l: f64) -> ResolventRepr {
        closed_form_resolvent(&DriftMeasure::ou(l, 1).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_pairs() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::symmetric(10, 0.1)]).unwrap();
        let e1 = effective_kernel(&Kernel::exp_spatial(1.0).unwrap(), &ou(1.0), &g).unwrap();
        assert!(matches!(e1, EffectiveKernel::Ex1 { .. }));
        assert!((e1.eval(1.0, &[1.0]) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(e1.eval(0.0, &[0.0]), 1.0);
        let e2 = effective_kernel(&Kernel::cone(1.0, 1.0).unwrap(), &ou(1.0), &g).unwrap();
        assert_eq!(e2.eval(1.0, &[2.0]), 0.0);
        // lambda' = lambda / c reduces to the cone times e^{-lambda t}
        let e3 = EffectiveKernel::Ex2 { lambda: 2.0, lambda_p: 1.0, c: 2.0 };
        assert!((e3.eval(1.0, &[1.5]) - (-2.0f64).exp()).abs() < 1e-15);
        let k = Kernel::cone(0.5, 0.3).unwrap();
        let p = effective_kernel(&k, &ResolventRepr::zero(), &g).unwrap();
        for &(t, x) in &[(0.2, 0.05), (1.0, 0.4), (1.0, 0.6)] {
            assert_eq!(p.eval(t, &[x]), k.eval(t, &[x]));
        }
    }

    #[test]
    fn norm_examples() {
        let e2 = EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 };
        let r = lp_norm(&e2, 1.0, None, 1).unwrap();
        assert!((r.exact.unwrap() - 2.0).abs() < 1e-14);
        assert!((r.quadrature - 2.0).abs() < 1e-6, "{r:?}");
        let e1 = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
        let r = lp_norm(&e1, 2.0, None, 1).unwrap();
        assert!((r.exact.unwrap() - 0.5).abs() < 1e-14);
        assert!((r.quadrature - 0.5).abs() < 1e-8);
        assert_eq!(lp_norm(&EffectiveKernel::Zero, 1.7, None, 2).unwrap().value(), 0.0);
        let r3 = lp_norm(&e1, 1.5, None, 3).unwrap();
        assert!((r3.quadrature / r3.exact.unwrap() - 1.0).abs() < 1e-7);
        let e2d = EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 2.0, c: 0.5 };
        let r = lp_norm(&e2d, 1.0, None, 2).unwrap();
        assert!((r.quadrature / r.exact.unwrap() - 1.0).abs() < 1e-6);
        let plain = EffectiveKernel::Plain(Kernel::exp_spatial(1.0).unwrap());
        assert!(lp_norm(&plain, 1.0, None, 1).unwrap().value().is_infinite());
        let neg = EffectiveKernel::Ex1 { lambda: -0.5, lambda_p: 1.0 };
        assert!(lp_norm(&neg, 1.0, None, 1).unwrap().value().is_infinite());
    }

    #[test]
    fn tails() {
        let e1 = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
        assert!((temporal_tail(&e1, 2.0, 1).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!((spatial_tail(&e1, 2.0, 1).unwrap() - (-2.0f64).exp()).abs() < 1e-12);
        let e2 = EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 };
        // int_T^inf int_{|x|<=t} e^{-t} = 2 (1 + T) e^{-T}, over a total of 2
        let t = temporal_tail(&e2, 3.0, 1).unwrap();
        assert!((t - 4.0 * (-3.0f64).exp()).abs() < 1e-6, "{t}");
        let sep = EffectiveKernel::Separable { g0: Arc::new(|x: &[f64]| (-x[0].abs()).exp()), tag: "exp".into(), factor: TemporalFactor::Exp(1.0) };
        assert!((spatial_tail(&sep, 1.0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn gridded_matches_closed_form() {
        let g = make_grid(1, Axis::new(0.0, 0.02, 51), &[Axis::symmetric(50, 0.02)]).unwrap();
        let k = Kernel::exp_spatial(1.0).unwrap();
        let rho = ResolventRepr::closed(ClosedForm::Ou { lambda: 1.0 });
        let mut forced = rho.clone();
        // route through the lattice path with the same resolvent
        forced.kind = ResolventKind::Gridded { measure: rho.on_grid(&difference_lattice(&g).unwrap()).unwrap(), window: g.clone() };
        let eff = effective_kernel(&k, &forced, &g).unwrap();
        let EffectiveKernel::Gridded(f) = &eff else { panic!("{eff:?}") };
        let exact = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }.tabulate(&g).unwrap();
        let err = f.zip(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn separable_from_gridded_resolvent() {
        let g = make_grid(1, Axis::new(0.0, 0.01, 301), &[Axis::new(0.0, 1.0, 1)]).unwrap();
        let mu = DriftMeasure::ou(1.0, 1).unwrap();
        let rho = crate::resolvent::neumann_resolvent(&mu, &g, &Default::default()).unwrap();
        let k = Kernel::SpatialOnly { g0: Arc::new(|x: &[f64]| (-x[0] * x[0]).exp()), tag: "gauss".into() };
        let eff = effective_kernel(&k, &rho, &g).unwrap();
        assert!(matches!(eff, EffectiveKernel::Separable { .. }));
        assert!((eff.eval(2.0, &[0.5]) - (-2.25f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn kernel_bounds() {
        let a = Kernel::exp_spatial(0.7).unwrap();
        let b = Kernel::cone(2.0, 0.7).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.1;
            let x = [i as f64 * 0.37 - 9.0, 0.5];
            for k in [&a, &b] {
                let v = k.eval(t, &x);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert!(Kernel::exp_spatial(0.0).is_err());
        assert!(Kernel::cone(-1.0, 1.0).is_err());
    }
}
