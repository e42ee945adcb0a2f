//! Resolvents `rho` of drift measures: `rho + mu = mu * rho`.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::drift::{heat_kernel, rasterize, Component, DriftError, DriftMeasure, Family, GriddedMeasure, SpatialDensity, TimeRule};
use crate::grid::{Axis, GridError, SpaceTimeGrid};
use crate::quad;
use crate::special::{bessel_i0, bessel_j0, cauchy_resolvent_core};

#[derive(Debug, Error)]
pub enum ResolventError {
    #[error("Neumann series did not converge: term norm {norm} after {terms} terms")]
    NoConvergence { terms: usize, norm: f64 },
    #[error("no tilt m <= {m_max} makes the tilted measure contract (norm {norm})")]
    TiltingFailed { m_max: f64, norm: f64 },
    #[error("tilt {m} over horizon {horizon} overflows; use a shorter horizon or a temporal measure")]
    HorizonTooLong { m: f64, horizon: f64 },
    #[error("Laplace transform diverges at tau = {tau}")]
    TransformDiverges { tau: Complex64 },
    #[error("the Laplace criterion needs an absolutely continuous measure; component {0} is singular")]
    NotAbsolutelyContinuous(String),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Closed-form resolvents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// `lambda e^{-lambda t} dt (x) delta_0`
    Ou { lambda: f64 },
    CauchySpatial { lambda: f64 },
    ExpSpatial { lambda: f64 },
    /// `-e^{lambda t} lambda h_t(x)`, a Dirac of mass `-lambda` at `t = 0`
    Heat { lambda: f64, dim: usize },
}

impl ClosedForm {
    pub fn is_temporal(&self) -> bool {
        matches!(self, ClosedForm::Ou { .. })
    }

    /// Temporal density of the `x = 0` column.
    pub fn column_density(&self, t: f64) -> f64 {
        match *self {
            ClosedForm::Ou { lambda } => lambda * (-lambda * t).exp(),
            _ => 0.0,
        }
    }

    /// Joint density `r(t, x)` for `t > 0`.
    pub fn density(&self, t: f64, x: &[f64]) -> f64 {
        match *self {
            ClosedForm::Ou { .. } => 0.0,
            ClosedForm::CauchySpatial { lambda } => cauchy_resolvent(lambda, t, x[0]),
            ClosedForm::ExpSpatial { lambda } => exp_resolvent(lambda, t, x[0]),
            ClosedForm::Heat { lambda, .. } => -(lambda * t).exp() * lambda * heat_kernel(t, x),
        }
    }
}

/// `(lambda / pi) Re[e^{-z} sum_n z^n / prod_{k<=n}(1 + ix + k)]`, `z = lambda t`.
pub fn cauchy_resolvent(lambda: f64, t: f64, x: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    if lambda > 0.0 {
        return lambda / PI * cauchy_resolvent_core(lambda * t, x);
    }
    // all terms share one sign
    let z = -lambda * t;
    let mut c = 1.0;
    let mut s = 0.0;
    let mut n = 1usize;
    loop {
        let fnn = n as f64;
        let term = c * fnn / (x * x + fnn * fnn);
        s += term;
        if (n as f64) > z && term < 1e-17 * s {
            break;
        }
        c *= z / fnn;
        n += 1;
    }
    lambda * s / PI
}

/// `lambda e^{-x} J0(2 sqrt(lambda t x)) 1{x >= 0}` (I0 for `lambda < 0`), half value at `x = 0`.
pub fn exp_resolvent(lambda: f64, t: f64, x: f64) -> f64 {
    if x < 0.0 || lambda == 0.0 {
        return 0.0;
    }
    let y = (lambda.abs() * t * x).sqrt() * 2.0;
    let b = if lambda > 0.0 { bessel_j0(y) } else { bessel_i0(y) };
    let v = lambda * (-x).exp() * b;
    if x == 0.0 { 0.5 * v } else { v }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolventKind {
    Zero,
    ClosedForm(ClosedForm),
    /// `measure` lives on `window` padded in space; `window` is the requested lattice
    Gridded { measure: GriddedMeasure, window: SpaceTimeGrid },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventRepr {
    pub kind: ResolventKind,
    /// identity residual, when checked
    pub residual: Option<f64>,
    pub tilt: f64,
    pub terms: usize,
}

impl ResolventRepr {
    pub fn zero() -> Self {
        Self { kind: ResolventKind::Zero, residual: None, tilt: 0.0, terms: 0 }
    }

    pub fn closed(form: ClosedForm) -> Self {
        Self { kind: ResolventKind::ClosedForm(form), residual: None, tilt: 0.0, terms: 0 }
    }

    pub fn is_temporal(&self) -> bool {
        match &self.kind {
            ResolventKind::Zero => true,
            ResolventKind::ClosedForm(c) => c.is_temporal(),
            ResolventKind::Gridded { measure, .. } => measure.is_temporal(),
        }
    }

    /// `rho` tabulated on `grid` (time origin 0, spatial lattice containing 0).
    pub fn on_grid(&self, grid: &SpaceTimeGrid) -> Result<GriddedMeasure, ResolventError> {
        match &self.kind {
            ResolventKind::Zero => Ok(GriddedMeasure::zero(grid)?),
            ResolventKind::ClosedForm(c) => Ok(tabulate_closed(c, grid)?),
            ResolventKind::Gridded { measure, .. } => {
                if measure.grid() == grid {
                    return Ok(measure.clone());
                }
                if measure.is_temporal() && measure.grid().time() == grid.time() {
                    let mut m = GriddedMeasure::zero(grid)?;
                    m.column = measure.column.clone();
                    m.atoms = measure.atoms.clone();
                    return Ok(m);
                }
                Ok(measure.crop(grid)?)
            }
        }
    }

    /// The gridded resolvent on its requested window.
    pub fn window(&self) -> Option<GriddedMeasure> {
        match &self.kind {
            ResolventKind::Gridded { measure, window } => self.on_grid(window).ok().or_else(|| Some(measure.clone())),
            _ => None,
        }
    }
}

fn tabulate_closed(c: &ClosedForm, grid: &SpaceTimeGrid) -> Result<GriddedMeasure, DriftError> {
    let mut m = GriddedMeasure::zero(grid)?;
    let n = grid.time().count;
    if c.is_temporal() {
        for i in 0..n {
            m.column[i] = c.column_density(grid.t(i));
        }
        return Ok(m);
    }
    let s = grid.spatial_len();
    let d = grid.dim();
    let mut j = vec![0.0; grid.len()];
    let mut x = [0.0; 3];
    for i in 0..n {
        let t = grid.t(i);
        for k in 0..s {
            grid.x_into(k, &mut x[..d]);
            j[i * s + k] = if i == 0 {
                match *c {
                    ClosedForm::Heat { .. } => 0.0,
                    _ => c.density(0.0, &x[..d]),
                }
            } else {
                c.density(t, &x[..d])
            };
        }
    }
    if let ClosedForm::Heat { lambda, .. } = *c {
        j[m.zero_index()] = -lambda / grid.spatial_cell_volume();
    }
    m.joint = Some(j);
    Ok(m)
}

/// The exact resolvent of a recognized family.
pub fn closed_form_resolvent(mu: &DriftMeasure) -> Option<ResolventRepr> {
    let form = match mu.family()? {
        Family::Ou { lambda } => ClosedForm::Ou { lambda },
        Family::CauchySpatial { lambda } => ClosedForm::CauchySpatial { lambda },
        Family::ExpSpatial { lambda } => ClosedForm::ExpSpatial { lambda },
        Family::Heat { lambda } => ClosedForm::Heat { lambda, dim: mu.dim() },
        Family::RegVar { .. } => return None,
    };
    let zero = match form {
        ClosedForm::Ou { lambda }
        | ClosedForm::CauchySpatial { lambda }
        | ClosedForm::ExpSpatial { lambda }
        | ClosedForm::Heat { lambda, .. } => lambda == 0.0,
    };
    Some(if zero { ResolventRepr::zero() } else { ResolventRepr::closed(form) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannOptions {
    pub tol: f64,
    pub n_max: usize,
    pub rule: TimeRule,
    /// spatial padding per side in cells; `None` pads by the axis length
    pub pad: Option<usize>,
    /// first tilt tried by the doubling search (0 allows no tilt)
    pub m_start: f64,
    pub m_max: f64,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self { tol: 1e-10, n_max: 500, rule: TimeRule::Trapezoid, pad: None, m_start: 1.0, m_max: 65536.0 }
    }
}

/// Smallest `m = m_start * 2^k` with `||e^{-mt} mu|| <= 1/2`, or 0 when the untilted norm already is.
fn choose_tilt(k: &GriddedMeasure, opts: &NeumannOptions) -> Result<f64, ResolventError> {
    let tv = k.total_variation(opts.rule);
    if tv <= 0.5 && opts.m_start <= 1.0 {
        return Ok(0.0);
    }
    let mut m = opts.m_start.max(f64::MIN_POSITIVE);
    loop {
        let n = k.tilt(m).total_variation(opts.rule);
        if n <= 0.5 {
            return Ok(m);
        }
        if m >= opts.m_max {
            return Err(ResolventError::TiltingFailed { m_max: opts.m_max, norm: n });
        }
        m *= 2.0;
    }
}

/// `grid` padded by `pad` nodes on each side of every spatial axis.
pub fn padded(grid: &SpaceTimeGrid, pad: Option<usize>) -> Result<SpaceTimeGrid, GridError> {
    let space: Vec<Axis> = grid
        .space()
        .iter()
        .map(|a| {
            let p = pad.unwrap_or(a.count);
            Axis::new(a.origin - p as f64 * a.step, a.step, a.count + 2 * p)
        })
        .collect();
    SpaceTimeGrid::new(*grid.time(), &space)
}

/// `r = -sum_n mu^{*n}` on `grid` by the tilted Neumann series.
pub fn neumann_resolvent(mu: &DriftMeasure, grid: &SpaceTimeGrid, opts: &NeumannOptions) -> Result<ResolventRepr, ResolventError> {
    if mu.is_temporal() && !mu.components().iter().any(|c| matches!(c, Component::Atom { .. })) {
        let k = rasterize(mu, grid)?;
        let m = choose_tilt(&k, opts)?;
        let (col, terms) = march_temporal(&k.column, grid.time().step, m, opts)?;
        let measure = GriddedMeasure::from_parts(grid, col, None)?;
        return Ok(ResolventRepr {
            kind: ResolventKind::Gridded { measure, window: grid.clone() },
            residual: None,
            tilt: m,
            terms,
        });
    }
    let ext = if mu.is_temporal() { grid.clone() } else { padded(grid, opts.pad)? };
    let k = rasterize(mu, &ext)?;
    let m = choose_tilt(&k, opts)?;
    let horizon = grid.t(grid.time().count - 1);
    if m * horizon > 600.0 {
        return Err(ResolventError::HorizonTooLong { m, horizon });
    }
    let km = k.tilt(m);
    let untilt = |g: &GriddedMeasure| {
        let mut u = g.clone();
        u.scale_rows(|t| (m * t).exp());
        u
    };
    let mut term = km.clone();
    let mut sum = km.scaled(-1.0);
    let mut terms = 1;
    loop {
        let norm = untilt(&term).total_variation(opts.rule);
        if norm < opts.tol {
            break;
        }
        if terms >= opts.n_max {
            return Err(ResolventError::NoConvergence { terms, norm });
        }
        term = term.convolve(&km, opts.rule)?;
        sum = sum.axpy(-1.0, &term)?;
        terms += 1;
    }
    let measure = untilt(&sum);
    Ok(ResolventRepr { kind: ResolventKind::Gridded { measure, window: grid.clone() }, residual: None, tilt: m, terms })
}

/// Solve `r = -k + k (*) r` for a temporal density by blocks short enough that
/// `e^{m t}` stays bounded on each block.
pub fn march_temporal(k: &[f64], dt: f64, m: f64, opts: &NeumannOptions) -> Result<(Vec<f64>, usize), ResolventError> {
    let n = k.len();
    let mut r = vec![0.0; n];
    let block = if m > 0.0 { ((32.0 / (m * dt)).floor() as usize).max(1) } else { n };
    let trap = opts.rule == TimeRule::Trapezoid;
    let mut max_terms = 0;
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let len = end - start;
        // forcing from the known history
        let mut f = vec![0.0; len];
        for (q, fq) in f.iter_mut().enumerate() {
            let nn = start + q;
            let mut acc = 0.0;
            for (i, &ri) in r.iter().enumerate().take(start) {
                let w = if trap && i == 0 { 0.5 } else { 1.0 };
                acc += w * k[nn - i] * ri;
            }
            *fq = -k[nn] + dt * acc;
        }
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; len];
            for (q, o) in out.iter_mut().enumerate() {
                let nn = start + q;
                if nn == 0 {
                    continue;
                }
                let mut acc = 0.0;
                match opts.rule {
                    TimeRule::Trapezoid => {
                        for p in 0..=q {
                            let i = start + p;
                            let mut w = 1.0;
                            if i == nn || i == 0 {
                                w = 0.5;
                            }
                            acc += w * k[nn - i] * v[p];
                        }
                    }
                    TimeRule::Corner => {
                        for p in 0..q {
                            acc += k[nn - start - p] * v[p];
                        }
                    }
                }
                *o = dt * acc;
            }
            out
        };
        let mut term = f.clone();
        let mut sol = f;
        let mut terms = 1;
        loop {
            let norm: f64 = term.iter().map(|v| v.abs()).sum::<f64>() * dt;
            if norm < opts.tol || norm == 0.0 {
                break;
            }
            if terms >= opts.n_max {
                return Err(ResolventError::NoConvergence { terms, norm });
            }
            term = apply(&term);
            for (s, t) in sol.iter_mut().zip(&term) {
                *s += t;
            }
            terms += 1;
        }
        max_terms = max_terms.max(terms);
        r[start..end].copy_from_slice(&sol);
        start = end;
    }
    Ok((r, max_terms))
}

/// `||rho + mu - mu * rho||` on `grid`; joint measures are evaluated on a
/// padded lattice and the residual is measured on `grid`.
pub fn verify_resolvent_identity(mu: &DriftMeasure, rho: &ResolventRepr, grid: &SpaceTimeGrid, rule: TimeRule) -> Result<f64, ResolventError> {
    let spatial = !(mu.is_temporal() && rho.is_temporal());
    let work = match (&rho.kind, spatial) {
        (ResolventKind::Gridded { measure, .. }, true) => measure.grid().clone(),
        (_, true) => padded(grid, None)?,
        (_, false) => grid.clone(),
    };
    let m = rasterize(mu, &work)?;
    let r = rho.on_grid(&work)?;
    let res = r.axpy(1.0, &m)?.axpy(-1.0, &m.convolve(&r, rule)?)?;
    let res = if spatial { res.crop(grid)? } else { res };
    Ok(res.total_variation(rule))
}

/// One Laplace-condition probe result.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    pub min_distance: f64,
    pub argmin_tau: Complex64,
    pub argmin_xi: Vec<f64>,
    pub holds: bool,
}

fn spatial_transform(f: &SpatialDensity, w: f64) -> Option<Complex64> {
    match f {
        SpatialDensity::Cauchy => Some(Complex64::new((-w.abs()).exp(), 0.0)),
        SpatialDensity::OneSidedExp => Some(Complex64::new(1.0, 0.0) / Complex64::new(1.0, w)),
        // not absolutely integrable; no Fourier transform as a function
        SpatialDensity::Lebesgue => None,
        SpatialDensity::Custom { f, .. } => {
            let re = quad::integrate_real_line(|x| f(&[x]) * (w * x).cos(), 1e-12, 1e-10);
            let im = quad::integrate_real_line(|x| -f(&[x]) * (w * x).sin(), 1e-12, 1e-10);
            (re.converged && im.converged).then(|| Complex64::new(re.value, im.value))
        }
    }
}

fn temporal_transform(k: &dyn Fn(f64) -> f64, tau: Complex64, horizon: Option<f64>) -> Option<Complex64> {
    let re = |t: f64| k(t) * (Complex64::new(-tau.re * t, -tau.im * t)).exp().re;
    let im = |t: f64| k(t) * (Complex64::new(-tau.re * t, -tau.im * t)).exp().im;
    let on = |a: f64, b: f64| {
        // oscillatory integrands: split into unit panels
        let panels = ((b - a) * (1.0 + tau.im.abs()) / 4.0).ceil().clamp(1.0, 20_000.0) as usize;
        let h = (b - a) / panels as f64;
        let mut s = Complex64::default();
        for p in 0..panels {
            let (l, u) = (a + p as f64 * h, a + (p + 1) as f64 * h);
            s += Complex64::new(quad::integrate(re, l, u, 1e-14, 1e-12).value, quad::integrate(im, l, u, 1e-14, 1e-12).value);
        }
        s
    };
    match horizon {
        Some(t) => Some(on(0.0, t)),
        None => {
            let a = on(0.0, 200.0);
            let b = a + on(200.0, 400.0);
            let c = b + on(400.0, 800.0);
            let tail = (c - b).norm();
            if !c.re.is_finite() || tail > 1e-6 * (1.0 + c.norm()) || (b - a).norm() < tail * 0.9 {
                return None;
            }
            Some(c)
        }
    }
}

/// `mu^(tau, i omega) = int e^{-tau t - i omega . x} mu(dt, dx)`.
pub fn laplace_transform(mu: &DriftMeasure, tau: Complex64, omega: &[f64], horizon: Option<f64>) -> Result<Complex64, ResolventError> {
    let mut acc = Complex64::default();
    for c in mu.components() {
        match c {
            Component::Separable { k, f } => {
                let sf = spatial_transform(f, omega[0]).ok_or(ResolventError::TransformDiverges { tau })?;
                let tk = temporal_transform(&|t| k(t), tau, horizon).ok_or(ResolventError::TransformDiverges { tau })?;
                acc += sf * tk;
            }
            Component::Heat { lambda } => {
                let w2: f64 = omega.iter().map(|w| w * w).sum();
                let a = tau + w2;
                acc += match horizon {
                    Some(t) => {
                        if a.norm() < 1e-300 {
                            Complex64::new(lambda * t, 0.0)
                        } else {
                            *lambda * (1.0 - (-a * t).exp()) / a
                        }
                    }
                    None => {
                        if a.re <= 0.0 {
                            return Err(ResolventError::TransformDiverges { tau });
                        }
                        *lambda / a
                    }
                };
            }
            other => return Err(ResolventError::NotAbsolutelyContinuous(format!("{other:?}"))),
        }
    }
    Ok(acc)
}

/// `min |mu^ - 1|` over the probe lattice; the condition is violated where it reaches `tol`.
pub fn laplace_condition(
    mu: &DriftMeasure,
    tau_grid: &[Complex64],
    xi_grid: &[Vec<f64>],
    horizon: Option<f64>,
    tol: f64,
) -> Result<LaplaceReport, ResolventError> {
    let mut best = LaplaceReport { min_distance: f64::INFINITY, argmin_tau: Complex64::default(), argmin_xi: vec![0.0; mu.dim()], holds: true };
    for &tau in tau_grid {
        if tau.re < 0.0 {
            continue;
        }
        for xi in xi_grid {
            let v = laplace_transform(mu, tau, xi, horizon)?;
            let d = (v - 1.0).norm();
            if d < best.min_distance {
                best.min_distance = d;
                best.argmin_tau = tau;
                best.argmin_xi = xi.clone();
            }
        }
    }
    best.holds = best.min_distance > tol;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn tgrid(dt: f64, t: f64) -> SpaceTimeGrid {
        make_grid(1, Axis::new(0.0, dt, (t / dt).round() as usize + 1), &[Axis::new(0.0, 1.0, 1)]).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let r = closed_form_resolvent(&DriftMeasure::ou(2.0, 1).unwrap()).unwrap();
        let ResolventKind::ClosedForm(c) = r.kind else { panic!() };
        assert_eq!(c.column_density(0.0), 2.0);
        assert!((c.column_density(1.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        let h = closed_form_resolvent(&DriftMeasure::heat(1.0, 1).unwrap()).unwrap();
        let ResolventKind::ClosedForm(c) = h.kind else { panic!() };
        assert!((c.density(1.0, &[0.0]) + std::f64::consts::E / (4.0 * PI).sqrt()).abs() < 1e-14);
        assert!((c.density(1.0, &[0.0]) + 0.766_813).abs() < 1e-6);
        assert_eq!(closed_form_resolvent(&DriftMeasure::exp_spatial(0.0)).unwrap().kind, ResolventKind::Zero);
        assert!(closed_form_resolvent(&DriftMeasure::regvar(0.3, 1).unwrap()).is_none());
    }

    #[test]
    fn exp_resolvent_matches_series() {
        for &(l, t, x) in &[(1.0, 0.5, 2.0), (2.0, 1.5, 0.3), (-1.0, 0.7, 1.2), (0.5, 3.0, 4.0)] {
            let y = l * t * x;
            let mut s = 0.0;
            let mut c = 1.0;
            for k in 0..80 {
                s += c;
                c *= -y / ((k + 1) as f64).powi(2);
            }
            let want = l * (-x as f64).exp() * s;
            assert!((exp_resolvent(l, t, x) - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
        assert_eq!(exp_resolvent(1.0, 1.0, -0.1), 0.0);
    }

    #[test]
    fn cauchy_negative_lambda_matches_convolution_powers() {
        // r = -sum mu^{*n}: mu^{*n} = (-lambda)^n t^{n-1}/(n-1)! Cauchy_n(x)
        let (l, t, x) = (-0.7, 1.3, 0.4);
        let mut s = 0.0;
        let mut c = 1.0; // t^{n-1}/(n-1)!
        for n in 1..60 {
            let fnn = n as f64;
            s -= (-l as f64).powi(n) * c * fnn / (PI * (fnn * fnn + x * x));
            c *= t / fnn;
        }
        assert!((cauchy_resolvent(l, t, x) - s).abs() < 1e-13);
        let lp = 0.7;
        let mut s = 0.0;
        let mut c = 1.0;
        for n in 1..60 {
            let fnn = n as f64;
            s -= (-lp as f64).powi(n) * c * fnn / (PI * (fnn * fnn + x * x));
            c *= t / fnn;
        }
        assert!((cauchy_resolvent(lp, t, x) - s).abs() < 1e-13);
    }

    #[test]
    fn ou_neumann_matches_closed_form() {
        let g = tgrid(0.005, 5.0);
        let mu = DriftMeasure::ou(1.0, 1).unwrap();
        let r = neumann_resolvent(&mu, &g, &NeumannOptions::default()).unwrap();
        let m = r.on_grid(&g).unwrap();
        let err = (0..g.time().count)
            .map(|i| ((m.column[i] - (-g.t(i)).exp()) / (-g.t(i)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
        assert!(r.tilt > 0.0);
    }

    #[test]
    fn tilting_needed_and_residual_small() {
        let g = tgrid(0.01, 3.0);
        let mu = DriftMeasure::ou(1.0, 1).unwrap();
        let opts = NeumannOptions { tol: 1e-9, ..NeumannOptions::default() };
        let r = neumann_resolvent(&mu, &g, &opts).unwrap();
        assert!(r.tilt >= 1.0);
        let res = verify_resolvent_identity(&mu, &r, &g, TimeRule::Trapezoid).unwrap();
        assert!(res < 1e-8, "{res}");
        // a different tilt gives the same resolvent
        let r2 = neumann_resolvent(&mu, &g, &NeumannOptions { m_start: 8.0, ..opts }).unwrap();
        let a = r.on_grid(&g).unwrap();
        let b = r2.on_grid(&g).unwrap();
        assert!(a.axpy(-1.0, &b).unwrap().total_variation(TimeRule::Trapezoid) < 2e-9);
    }

    #[test]
    fn identity_residual_examples() {
        let mu = DriftMeasure::ou(1.0, 1).unwrap();
        let g = tgrid(0.01, 2.0);
        let zero = verify_resolvent_identity(&mu, &ResolventRepr::zero(), &g, TimeRule::Trapezoid).unwrap();
        assert!((zero - 2.0).abs() < 1e-12);
        let exact = closed_form_resolvent(&mu).unwrap();
        let res = verify_resolvent_identity(&mu, &exact, &g, TimeRule::Trapezoid).unwrap();
        assert!(res <= 5.0 * 0.01, "{res}");
    }

    #[test]
    fn temporal_structure_preserved() {
        let g = make_grid(1, Axis::new(0.0, 0.05, 21), &[Axis::symmetric(5, 0.1)]).unwrap();
        let r = neumann_resolvent(&DriftMeasure::ou(1.5, 1).unwrap(), &g, &NeumannOptions::default()).unwrap();
        let m = r.on_grid(&g).unwrap();
        assert!(m.joint.is_none());
    }

    #[test]
    fn laplace_examples() {
        let taus: Vec<Complex64> = (0..6).map(|k| Complex64::new(0.5 * k as f64, 0.0)).collect();
        let xis: Vec<Vec<f64>> = (-4..=4).map(|k| vec![0.5 * k as f64]).collect();
        let z = laplace_condition(&DriftMeasure::zero(1), &taus, &xis, None, 1e-6).unwrap();
        assert_eq!(z.min_distance, 1.0);
        assert!(z.holds);
        let posi: Vec<Complex64> = (1..6).map(|k| Complex64::new(0.5 * k as f64, 0.0)).collect();
        let e = laplace_condition(&DriftMeasure::exp_spatial(1.0), &posi, &xis, None, 1e-6).unwrap();
        assert!(e.holds);
        // -1 / (tau (1 + i w)) at tau = 1/2, w = 0 is -2
        let v = laplace_transform(&DriftMeasure::exp_spatial(1.0), Complex64::new(0.5, 0.0), &[0.0], None).unwrap();
        assert!((v + 2.0).norm() < 1e-8);
        let plus = DriftMeasure::new(1, vec![Component::Separable { k: Arc::new(|_| 1.0), f: SpatialDensity::Cauchy }]).unwrap();
        assert!(matches!(
            laplace_condition(&plus, &taus, &xis, None, 1e-6),
            Err(ResolventError::TransformDiverges { .. })
        ));
        let fin = laplace_condition(&plus, &taus, &xis, Some(1.0), 1e-6).unwrap();
        assert!(!fin.holds);
        assert_eq!(fin.argmin_tau, Complex64::new(0.0, 0.0));
        assert!(matches!(
            laplace_condition(&DriftMeasure::ou(1.0, 1).unwrap(), &taus, &xis, None, 1e-6),
            Err(ResolventError::NotAbsolutelyContinuous(_))
        ));
    }
}
