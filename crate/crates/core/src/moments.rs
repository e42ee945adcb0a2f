//! First and second order structure, cumulant triplets and Monte Carlo estimators.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Field, SpaceTimeGrid};
use crate::kernels::{lp_norm, radial_exp, spatial_integral, EffectiveKernel, Kernel, KernelError, TemporalFactor};
use crate::levy::{triplet_from_weights, LevyBasisSpec, LevyError, NuHistogram, Triplet};
use crate::quad;
use crate::rng::CounterRng;
use crate::simulator::cell_weight;
use crate::special::{bessel_k, gamma};

#[derive(Debug, Error)]
pub enum MomentError {
    #[error("the mean needs a finite first moment b1 of the basis")]
    MeanUndefined,
    #[error("the covariance needs a finite second moment and a square integrable kernel")]
    VarianceUndefined,
    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("lag {0} must be >= 0")]
    NegativeLag(f64),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

#[derive(Debug, Clone)]
pub enum CovarianceModel {
    Generic { kernel: EffectiveKernel, dim: usize, m2: Option<f64>, b1: Option<f64> },
    Ex1Bessel { dim: usize, lambda: f64, lambda_p: f64, m2: Option<f64>, b1: Option<f64> },
    Ex2PiecewiseD1 { lambda: f64, lambda_p: f64, c: f64, m2: Option<f64>, b1: Option<f64> },
}

impl CovarianceModel {
    /// Generic model for `kernel` driven by `levy`.
    pub fn generic(kernel: EffectiveKernel, dim: usize, levy: &LevyBasisSpec) -> Self {
        CovarianceModel::Generic { kernel, dim, m2: levy.second_moment_m2(), b1: levy.mean_b1() }
    }

    pub fn m2(&self) -> Option<f64> {
        match self {
            CovarianceModel::Generic { m2, .. } | CovarianceModel::Ex1Bessel { m2, .. } | CovarianceModel::Ex2PiecewiseD1 { m2, .. } => *m2,
        }
    }

    pub fn b1(&self) -> Option<f64> {
        match self {
            CovarianceModel::Generic { b1, .. } | CovarianceModel::Ex1Bessel { b1, .. } | CovarianceModel::Ex2PiecewiseD1 { b1, .. } => *b1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceModel::Generic { dim, .. } | CovarianceModel::Ex1Bessel { dim, .. } => *dim,
            CovarianceModel::Ex2PiecewiseD1 { .. } => 1,
        }
    }

    /// The effective kernel the model describes.
    pub fn kernel(&self) -> EffectiveKernel {
        match self {
            CovarianceModel::Generic { kernel, .. } => kernel.clone(),
            CovarianceModel::Ex1Bessel { lambda, lambda_p, .. } => EffectiveKernel::Ex1 { lambda: *lambda, lambda_p: *lambda_p },
            CovarianceModel::Ex2PiecewiseD1 { lambda, lambda_p, c, .. } => EffectiveKernel::Ex2 { lambda: *lambda, lambda_p: *lambda_p, c: *c },
        }
    }
}

/// `int_0^H int K` (signed), `H = infinity` for `None`.
pub fn kernel_integral(k: &EffectiveKernel, horizon: Option<f64>, d: usize) -> Result<f64, KernelError> {
    Ok(match k {
        EffectiveKernel::Zero => 0.0,
        EffectiveKernel::Ex1 { .. } | EffectiveKernel::Ex2 { .. } => lp_norm(k, 1.0, horizon, d)?.value(),
        EffectiveKernel::Plain(g) => match g {
            Kernel::ExpSpatial { .. } | Kernel::Cone { .. } => lp_norm(k, 1.0, horizon, d)?.value(),
            Kernel::SpatialOnly { g0, .. } => {
                let s = spatial_integral(&|x| g0(x), d);
                if s == 0.0 { 0.0 } else { horizon.map_or(f64::INFINITY * s.signum(), |h| h * s) }
            }
            Kernel::Tabulated(f) => lattice_integral(f, horizon),
        },
        EffectiveKernel::Separable { g0, factor, .. } => {
            let s = spatial_integral(&|x| g0(x), d);
            let t = match factor {
                TemporalFactor::Exp(l) => match horizon {
                    None if *l > 0.0 => 1.0 / l,
                    None => f64::INFINITY,
                    Some(h) if *l != 0.0 => (1.0 - (-l * h).exp()) / l,
                    Some(h) => h,
                },
                TemporalFactor::Table { dt, values } => {
                    let n = horizon.map_or(values.len() - 1, |h| ((h / dt).round() as usize).min(values.len() - 1));
                    (0..n).map(|k| 0.5 * dt * (values[k] + values[k + 1])).sum()
                }
            };
            if s == 0.0 { 0.0 } else { s * t }
        }
        EffectiveKernel::Gridded(f) => lattice_integral(f, horizon),
        EffectiveKernel::Scaled { a, inner } => a * kernel_integral(inner, horizon, d)?,
    })
}

fn lattice_integral(f: &Field, horizon: Option<f64>) -> f64 {
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
        acc += w * f.slab(i).iter().sum::<f64>();
    }
    acc * dt * g.spatial_cell_volume()
}

/// `E X(t, x) = b1 int_0^t int K`; `t = None` is the stationary mean.
pub fn mean_value(model: &CovarianceModel, t: Option<f64>) -> Result<f64, MomentError> {
    let b1 = model.b1().ok_or(MomentError::MeanUndefined)?;
    if b1 == 0.0 {
        return Ok(0.0);
    }
    let d = model.dim();
    let v = match model {
        CovarianceModel::Ex1Bessel { lambda, lambda_p, .. } => {
            let s = radial_exp(*lambda_p, d);
            match t {
                None if *lambda > 0.0 => s / lambda,
                None => f64::INFINITY,
                Some(h) => s * (1.0 - (-lambda * h).exp()) / lambda,
            }
        }
        _ => kernel_integral(&model.kernel(), t, d)?,
    };
    Ok(b1 * v)
}

/// `2^{nu-1} Gamma(nu)`-normalized `z^nu K_nu(z)`, equal to 1 at `z = 0`.
fn matern(nu: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    z.powf(nu) * bessel_k(nu, z).expect("z > 0") / (2f64.powf(nu - 1.0) * gamma(nu))
}

/// `Cov[X(t, x), X(t + tau, x + xi)]` of the stationary field.
pub fn covariance(model: &CovarianceModel, tau: f64, xi: &[f64]) -> Result<f64, MomentError> {
    if tau < 0.0 {
        return Err(MomentError::NegativeLag(tau));
    }
    let m2 = model.m2().ok_or(MomentError::VarianceUndefined)?;
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    match *model {
        CovarianceModel::Ex1Bessel { dim, lambda, lambda_p, .. } => {
            if !(lambda > 0.0 && lambda_p > 0.0) {
                return Err(MomentError::VarianceUndefined);
            }
            let var = m2 * radial_exp(2.0 * lambda_p, dim) / (2.0 * lambda);
            Ok(var * (-lambda * tau).exp() * matern(1.0 + dim as f64 / 2.0, lambda_p * r))
        }
        CovarianceModel::Ex2PiecewiseD1 { lambda, lambda_p, c, .. } => {
            if !(lambda > 0.0 && lambda_p > 0.0) {
                return Err(MomentError::VarianceUndefined);
            }
            Ok(ex2_covariance(m2, lambda, lambda_p, c, tau, r))
        }
        CovarianceModel::Generic { ref kernel, dim, .. } => {
            let l2 = lp_norm(kernel, 2.0, None, dim)?.value();
            if !l2.is_finite() {
                return Err(MomentError::VarianceUndefined);
            }
            Ok(m2 * generic_product_integral(kernel, tau, xi, dim)?)
        }
    }
}

/// The printed closed form for the cone model in `d = 1`.
pub fn ex2_covariance(m2: f64, l: f64, lp: f64, c: f64, tau: f64, r: f64) -> f64 {
    let a = r / c - tau;
    let ap = a.max(0.0);
    let pre = m2 / (4.0 * l) * (-l * tau).exp();
    let first = pre
        * ((l / c - lp) * r).exp()
        * (c / l * ((-l * ap).exp() + (-2.0 * l * a).exp() * (l * ap).exp() - (-2.0 * l * a).exp()) + (-2.0 * l * ap).exp() / lp);
    let second = pre * (-(l / c + lp) * r).exp() * (1.0 / lp - c / l);
    first + second
}

pub fn correlation(model: &CovarianceModel, tau: f64, xi: &[f64]) -> Result<f64, MomentError> {
    let v = covariance(model, 0.0, &vec![0.0; xi.len()])?;
    if v == 0.0 {
        return Err(MomentError::VarianceUndefined);
    }
    Ok(covariance(model, tau, xi)? / v)
}

/// Covariances at many lags in parallel.
pub fn covariance_many(model: &CovarianceModel, lags: &[(f64, Vec<f64>)]) -> Result<Vec<f64>, MomentError> {
    lags.par_iter().map(|(t, x)| covariance(model, *t, x)).collect()
}

fn breakpoints(k: &EffectiveKernel, s: f64, tau: f64, xi: f64) -> Vec<f64> {
    let mut b = vec![0.0, -xi];
    if let (_, EffectiveKernel::Ex2 { c, .. }) | (_, EffectiveKernel::Plain(Kernel::Cone { c, .. })) = k.factor_out() {
        b.extend([c * s, -c * s, -xi + c * (s + tau), -xi - c * (s + tau)]);
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn line_integral(f: &dyn Fn(f64) -> f64, br: &[f64], tol: f64) -> f64 {
    let lo = br[0];
    let hi = br[br.len() - 1];
    let mut acc = quad::integrate_to_inf(|y| f(lo - y), 0.0, tol, 1e-10).value + quad::integrate_to_inf(|y| f(hi + y), 0.0, tol, 1e-10).value;
    for w in br.windows(2) {
        acc += quad::integrate(f, w[0], w[1], tol, 1e-10).value;
    }
    acc
}

/// `int_0^inf int K(s, y) K(s + tau, y + xi) dy ds` by quadrature (lattice sum for lattice kernels).
pub fn generic_product_integral(k: &EffectiveKernel, tau: f64, xi: &[f64], d: usize) -> Result<f64, MomentError> {
    if let EffectiveKernel::Zero = k {
        return Ok(0.0);
    }
    if let Some(f) = k.factor_out().1.lattice() {
        let a = k.factor_out().0;
        return Ok(a * a * lattice_product(f, tau, xi));
    }
    if xi.len() != d {
        return Err(MomentError::Unsupported(format!("lag has {} components for d = {d}", xi.len())));
    }
    let inner = |s: f64| -> f64 {
        match d {
            1 => {
                let br = breakpoints(k, s, tau, xi[0]);
                line_integral(&|y| k.eval(s, &[y]) * k.eval(s + tau, &[y + xi[0]]), &br, 1e-14)
            }
            2 => {
                let br = breakpoints(k, s, tau, xi[0]);
                line_integral(
                    &|y0| {
                        let b2 = breakpoints(k, s, tau, xi[1]);
                        line_integral(&|y1| k.eval(s, &[y0, y1]) * k.eval(s + tau, &[y0 + xi[0], y1 + xi[1]]), &b2, 1e-13)
                    },
                    &br,
                    1e-12,
                )
            }
            _ => {
                let f = |y: &[f64]| {
                    let z = [y[0] + xi[0], y[1] + xi[1], y[2] + xi[2]];
                    k.eval(s, y) * k.eval(s + tau, &z)
                };
                spatial_integral(&f, 3)
            }
        }
    };
    Ok(quad::integrate_to_inf(inner, 0.0, 1e-12, 1e-9).value)
}

fn lattice_product(f: &Field, tau: f64, xi: &[f64]) -> f64 {
    let g = f.grid();
    let d = g.dim();
    let dt = g.time().step;
    let s = g.spatial_len();
    let mut x = [0.0; 3];
    let mut acc = 0.0;
    for i in 0..g.time().count {
        let t = g.t(i);
        let w = if i == 0 { 0.5 } else { 1.0 };
        for j in 0..s {
            let v = f.values()[i * s + j];
            if v == 0.0 {
                continue;
            }
            g.x_into(j, &mut x[..d]);
            let mut y = [0.0; 3];
            for a in 0..d {
                y[a] = x[a] + xi[a];
            }
            acc += w * v * f.interpolate(t + tau, &y[..d]);
        }
    }
    acc * dt * g.spatial_cell_volume()
}

/// Weighted space-time atoms `sum theta_i delta_(t_i, x_i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestMeasure {
    pub atoms: Vec<(f64, f64, [f64; 3])>,
}

impl TestMeasure {
    pub fn point(t: f64, x: &[f64]) -> Self {
        let mut p = [0.0; 3];
        p[..x.len()].copy_from_slice(x);
        Self { atoms: vec![(1.0, t, p)] }
    }
}

/// Triplet of `m[X] = int G dLambda`, `G(cell) = sum theta_i K(t_i - s, x_i - y)` with the
/// simulator's cell convention on the increment lattice `cells`.
pub fn cumulant_triplet(m: &TestMeasure, k: &EffectiveKernel, levy: &LevyBasisSpec, cells: &SpaceTimeGrid) -> Result<Triplet, MomentError> {
    let d = cells.dim();
    let dt = cells.time().step;
    let dx: Vec<f64> = cells.space().iter().map(|a| a.step).collect();
    let vol = cells.cell_volume();
    let s = cells.spatial_len();
    let weights: Vec<(f64, f64)> = (0..cells.len())
        .into_par_iter()
        .filter_map(|f| {
            let (i, j) = (f / s, f % s);
            let t = cells.t(i);
            let mut y = [0.0; 3];
            cells.x_into(j, &mut y[..d]);
            let mut gval = 0.0;
            for &(theta, ti, xi) in &m.atoms {
                let mut lag = [0.0; 3];
                for a in 0..d {
                    lag[a] = xi[a] - y[a];
                }
                gval += theta * cell_weight(k, ti - t, &lag[..d], dt, &dx);
            }
            (gval != 0.0).then_some((gval, vol))
        })
        .collect();
    Ok(triplet_from_weights(weights, levy, NuHistogram::default_bins())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Mean,
    Var,
    /// `Cov[X(t, x), X(t + lag_t dt, x + lag_x dx)]` in node units
    Acov { lag_t: usize, lag_x: [isize; 3] },
}

/// `(sum, leave-one-out estimates)` helper: jackknife SE of a statistic of means.
fn jackknife(n: usize, full: f64, loo: impl Fn(usize) -> f64) -> f64 {
    let nf = n as f64;
    let vals: Vec<f64> = (0..n).map(loo).collect();
    let m = vals.iter().sum::<f64>() / nf;
    let _ = full;
    ((nf - 1.0) / nf * vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
}

pub fn mean_estimate(xs: &[f64]) -> Result<Estimate, MomentError> {
    let n = xs.len();
    if n < 2 {
        return Err(MomentError::TooFewReplicates(n));
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    Ok(Estimate { value: m, se: (v / n as f64).sqrt() })
}

/// Unbiased covariance of paired samples with jackknife SE.
pub fn cov_estimate(xs: &[f64], ys: &[f64]) -> Result<Estimate, MomentError> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return Err(MomentError::TooFewReplicates(n));
    }
    let (sx, sy, sxy) = xs.iter().zip(ys).fold((0.0, 0.0, 0.0), |(a, b, c), (&x, &y)| (a + x, b + y, c + x * y));
    let cov = |sx: f64, sy: f64, sxy: f64, n: f64| (sxy - sx * sy / n) / (n - 1.0);
    let nf = n as f64;
    let value = cov(sx, sy, sxy, nf);
    let se = if n > 2 {
        jackknife(n, value, |i| cov(sx - xs[i], sy - ys[i], sxy - xs[i] * ys[i], nf - 1.0))
    } else {
        f64::NAN
    };
    Ok(Estimate { value, se })
}

/// `Cov(x, y) / sqrt(Var x Var y)` with jackknife SE.
pub fn corr_estimate(xs: &[f64], ys: &[f64]) -> Result<Estimate, MomentError> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(MomentError::TooFewReplicates(n));
    }
    let s = xs.iter().zip(ys).fold([0.0; 5], |a, (&x, &y)| [a[0] + x, a[1] + y, a[2] + x * y, a[3] + x * x, a[4] + y * y]);
    let corr = |s: [f64; 5], n: f64| {
        let c = s[2] - s[0] * s[1] / n;
        let vx = s[3] - s[0] * s[0] / n;
        let vy = s[4] - s[1] * s[1] / n;
        c / (vx * vy).sqrt()
    };
    let nf = n as f64;
    let value = corr(s, nf);
    let se = jackknife(n, value, |i| {
        let (x, y) = (xs[i], ys[i]);
        corr([s[0] - x, s[1] - y, s[2] - x * y, s[3] - x * x, s[4] - y * y], nf - 1.0)
    });
    Ok(Estimate { value, se })
}

fn shifted(node: (usize, [usize; 3]), lag_t: usize, lag_x: [isize; 3], g: &SpaceTimeGrid) -> Option<(usize, [usize; 3])> {
    let n = node.0 + lag_t;
    if n >= g.time().count {
        return None;
    }
    let mut j = [0usize; 3];
    for a in 0..g.dim() {
        let v = node.1[a] as isize + lag_x[a];
        if v < 0 || v as usize >= g.space()[a].count {
            return None;
        }
        j[a] = v as usize;
    }
    Some((n, j))
}

/// Cross-replicate estimate at output node `node`.
pub fn mc_estimate(fields: &[Field], stat: Statistic, node: (usize, [usize; 3])) -> Result<Estimate, MomentError> {
    if fields.len() < 2 {
        return Err(MomentError::TooFewReplicates(fields.len()));
    }
    let g = fields[0].grid();
    let d = g.dim();
    let at = |f: &Field, n: (usize, [usize; 3])| f.get(n.0, &n.1[..d]);
    let xs: Vec<f64> = fields.iter().map(|f| at(f, node)).collect();
    match stat {
        Statistic::Mean => mean_estimate(&xs),
        Statistic::Var => cov_estimate(&xs, &xs),
        Statistic::Acov { lag_t, lag_x } => {
            let other = shifted(node, lag_t, lag_x, g).ok_or_else(|| MomentError::Unsupported("lag leaves the grid".into()))?;
            let ys: Vec<f64> = fields.iter().map(|f| at(f, other)).collect();
            cov_estimate(&xs, &ys)
        }
    }
}

/// Slab average over one field with a moving-block bootstrap SE over time blocks.
pub fn ergodic_estimate(field: &Field, stat: Statistic, block: usize, seed: u64) -> Result<Estimate, MomentError> {
    let g = field.grid();
    let d = g.dim();
    let nt = g.time().count;
    let s = g.spatial_len();
    let (lt, lx) = match stat {
        Statistic::Acov { lag_t, lag_x } => (lag_t, lag_x),
        _ => (0, [0; 3]),
    };
    if nt <= lt + 1 {
        return Err(MomentError::TooFewReplicates(nt));
    }
    let mean_all = field.values().iter().sum::<f64>() / field.values().len() as f64;
    // per time row: (sum of terms, count)
    let rows: Vec<(f64, f64)> = (0..nt - lt)
        .map(|i| {
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for j in 0..s {
                let m = g.spatial_multi(j);
                let v = field.values()[i * s + j];
                match stat {
                    Statistic::Mean => {
                        acc += v;
                        cnt += 1.0;
                    }
                    Statistic::Var => {
                        acc += (v - mean_all) * (v - mean_all);
                        cnt += 1.0;
                    }
                    Statistic::Acov { .. } => {
                        if let Some((n2, j2)) = shifted((i, m), lt, lx, g) {
                            let w = field.get(n2, &j2[..d]);
                            acc += (v - mean_all) * (w - mean_all);
                            cnt += 1.0;
                        }
                    }
                }
            }
            (acc, cnt)
        })
        .collect();
    let total = |idx: &mut dyn Iterator<Item = usize>| {
        let (a, c) = idx.fold((0.0, 0.0), |(a, c), i| (a + rows[i].0, c + rows[i].1));
        a / c
    };
    let value = total(&mut (0..rows.len()));
    let b = block.clamp(1, rows.len());
    let nb = rows.len().div_ceil(b);
    let mut rng = CounterRng::new(seed);
    let reps = 200;
    let boot: Vec<f64> = (0..reps)
        .map(|_| {
            let mut idx = Vec::with_capacity(nb * b);
            for _ in 0..nb {
                let start = (rng.open01() * (rows.len() - b + 1) as f64) as usize;
                idx.extend(start..start + b);
            }
            total(&mut idx.into_iter())
        })
        .collect();
    let m = boot.iter().sum::<f64>() / reps as f64;
    let se = (boot.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps - 1) as f64).sqrt();
    Ok(Estimate { value, se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Axis};
    use crate::levy::char_function;
    use std::f64::consts::PI;

    fn ex1(d: usize, l: f64, lp: f64) -> CovarianceModel {
        CovarianceModel::Ex1Bessel { dim: d, lambda: l, lambda_p: lp, m2: Some(1.0), b1: Some(1.0) }
    }

    #[test]
    fn mean_examples() {
        assert!((mean_value(&ex1(1, 1.0, 1.0), None).unwrap() - 2.0).abs() < 1e-14);
        assert!((mean_value(&ex1(2, 1.0, 2.0), None).unwrap() - PI / 2.0).abs() < 1e-14);
        let g = CovarianceModel::Generic { kernel: EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 2.0 }, dim: 2, m2: Some(1.0), b1: Some(1.0) };
        assert!((mean_value(&g, None).unwrap() - PI / 2.0).abs() < 1e-8);
        let z = CovarianceModel::Generic { kernel: EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }, dim: 1, m2: Some(1.0), b1: Some(0.0) };
        assert_eq!(mean_value(&z, Some(3.0)).unwrap(), 0.0);
        let none = CovarianceModel::Generic { kernel: EffectiveKernel::Zero, dim: 1, m2: None, b1: None };
        assert!(matches!(mean_value(&none, None), Err(MomentError::MeanUndefined)));
        let e2 = CovarianceModel::Ex2PiecewiseD1 { lambda: 1.0, lambda_p: 1.0, c: 1.0, m2: Some(1.0), b1: Some(1.0) };
        assert!((mean_value(&e2, None).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ex1_correlation_values() {
        let m = ex1(1, 1.0, 1.0);
        assert!((correlation(&m, 1.0, &[0.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-14);
        assert!((correlation(&m, 0.0, &[1.0]).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(correlation(&m, 0.0, &[0.0]).unwrap(), 1.0);
        // d = 3 polynomial form
        let m3 = ex1(3, 0.5, 1.3);
        let r: f64 = 0.8;
        let z = 1.3 * r;
        let want = (-0.25f64).exp() * (z * z / 3.0 + z + 1.0) * (-z).exp();
        assert!((correlation(&m3, 0.5, &[r, 0.0, 0.0]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn ex1_closed_form_matches_quadrature_d1_d2() {
        for d in [1usize, 2] {
            let closed = ex1(d, 1.0, 1.0);
            let gen = CovarianceModel::Generic { kernel: closed.kernel(), dim: d, m2: Some(1.0), b1: None };
            for &(tau, r) in &[(0.0, 0.0), (0.4, 0.7), (1.0, 2.0)] {
                let mut xi = vec![0.0; d];
                xi[0] = r;
                let a = covariance(&closed, tau, &xi).unwrap();
                let b = covariance(&gen, tau, &xi).unwrap();
                assert!((a / b - 1.0).abs() < 1e-5, "d {d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ex2_printed_formula_matches_quadrature() {
        for &(l, lp, c) in &[(1.0, 1.0, 1.0), (1.0, 2.0, 0.7), (0.5, 1.5, 2.0)] {
            let closed = CovarianceModel::Ex2PiecewiseD1 { lambda: l, lambda_p: lp, c, m2: Some(1.0), b1: None };
            let gen = CovarianceModel::Generic { kernel: closed.kernel(), dim: 1, m2: Some(1.0), b1: None };
            for &(tau, xi) in &[(0.0, 0.0), (0.3, 0.2), (0.3, 1.5), (2.0, -0.5), (0.0, 3.0)] {
                let a = covariance(&closed, tau, &[xi]).unwrap();
                let b = covariance(&gen, tau, &[xi]).unwrap();
                assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "({l},{lp},{c}) at ({tau},{xi}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn estimators() {
        let c = vec![3.0; 10];
        let m = mean_estimate(&c).unwrap();
        assert_eq!((m.value, m.se), (3.0, 0.0));
        assert!(matches!(mean_estimate(&[1.0]), Err(MomentError::TooFewReplicates(1))));
        let mut r = CounterRng::new(4);
        let xs: Vec<f64> = (0..20_000).map(|_| r.open01()).collect();
        let v = cov_estimate(&xs, &xs).unwrap();
        assert!((v.value - 1.0 / 12.0).abs() < 3.0 * v.se, "{v:?}");
        assert!(v.se > 0.0 && v.se < 1e-3);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((corr_estimate(&xs, &ys).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triplet_of_point_measure() {
        let cells = make_grid(1, Axis::new(0.0, 0.1, 20), &[Axis::new(-10.0, 0.1, 200)]).unwrap();
        let k = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
        let spec = LevyBasisSpec::new(1.0, 1.0, crate::levy::LevyMeasureModel::Zero).unwrap();
        let zero = cumulant_triplet(&TestMeasure::default(), &k, &spec, &cells).unwrap();
        assert_eq!(char_function(&zero, 1.3), num_complex::Complex64::new(1.0, 0.0));
        let one = cumulant_triplet(&TestMeasure::point(2.0, &[0.0]), &k, &spec, &cells).unwrap();
        let two = cumulant_triplet(&TestMeasure { atoms: vec![(0.25, 2.0, [0.0; 3]), (0.75, 2.0, [0.0; 3])] }, &k, &spec, &cells).unwrap();
        assert!((one.b - two.b).abs() < 1e-12 && (one.sigma_sq - two.sigma_sq).abs() < 1e-12);
        let h = 1e-4;
        let dlog = (char_function(&one, h).ln() - char_function(&one, -h).ln()).im / (2.0 * h);
        let mean = mean_value(&CovarianceModel::Generic { kernel: k, dim: 1, m2: None, b1: Some(1.0) }, Some(2.0)).unwrap();
        // midpoint cells: O(dt^2) discretization error
        assert!((dlog / mean - 1.0).abs() < 2e-3, "{dlog} vs {mean}");
    }

    #[test]
    fn ergodic_constant_and_zero() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 40), &[Axis::new(0.0, 0.1, 5)]).unwrap();
        let f = Field::from_fn(g.clone(), |_, _| 2.5).unwrap();
        let e = ergodic_estimate(&f, Statistic::Mean, 4, 1).unwrap();
        assert!((e.value - 2.5).abs() < 1e-14 && e.se < 1e-14);
        let v = ergodic_estimate(&Field::zeros(g), Statistic::Var, 4, 1).unwrap();
        assert_eq!(v.value, 0.0);
    }
}
