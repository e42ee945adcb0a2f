//! Simulation of `X = (g - rho * g) * Lambda` on a lattice.
//!
//! A cell of the increment lattice with lower-left node `(s, y)` covers
//! `[s, s + dt) x [y, y + dx)`; it contributes to `X(t, x)` only when
//! `s + dt <= t`. Closed-form kernels are sampled at the lag-cell midpoint
//! `(t - s - dt/2, x - y - dx/2)`, lattice kernels by the average over the
//! corners of the lag cell.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::conv::{good_size, Convolver};
use crate::drift::{convolve_measure_function, DriftError, DriftMeasure, TimeRule};
use crate::grid::{Axis, Field, GridError, SpaceTimeGrid};
use crate::kernels::{lp_norm, spatial_tail, temporal_tail, EffectiveKernel, Kernel, KernelError};
use crate::levy::{char_function, sample_with_catalog, triplet_from_weights, CellSampler, JumpCatalog, LevyBasisSpec, LevyError, NuHistogram};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("kernel is not integrable on the extended window: {0}")]
    IntegrabilityViolated(String),
    #[error("FFT workspace of {needed} points exceeds the cap of {cap}")]
    MemoryCapExceeded { needed: usize, cap: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// window `[0, T]`, `V = 0`; `pad` is the spatial margin (None: from the kernel tail)
    Causal { pad: Option<f64> },
    /// window `[t0 - T0, T]`; `None` picks T0 and the pad from the kernel tails
    Stationary { burn_in: Option<f64>, pad: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Fft,
    /// fixed-order summation; exact zeros from cells with zero weight
    Direct,
}

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub grid: SpaceTimeGrid,
    pub levy: LevyBasisSpec,
    pub kernel: EffectiveKernel,
    pub mode: Mode,
    pub seed: u64,
    pub replicates: usize,
    pub method: Method,
    /// relative L1 tail mass allowed by automatic truncation
    pub tail_tol: f64,
    /// largest FFT workspace in complex points
    pub memory_cap: usize,
}

impl SimulationPlan {
    pub fn new(grid: SpaceTimeGrid, levy: LevyBasisSpec, kernel: EffectiveKernel, mode: Mode, seed: u64, replicates: usize) -> Self {
        Self { grid, levy, kernel, mode, seed, replicates, method: Method::Fft, tail_tol: 1e-3, memory_cap: 1 << 27 }
    }
}

/// Weight of a cell at lag `(lag_t, lag_x)` from its lower-left node.
pub fn cell_weight(k: &EffectiveKernel, lag_t: f64, lag_x: &[f64], dt: f64, dx: &[f64]) -> f64 {
    if lag_t < dt * (1.0 - 1e-9) {
        return 0.0;
    }
    let d = lag_x.len();
    if k.lattice().is_some() {
        let mut acc = 0.0;
        let mut x = [0.0; 3];
        for corner in 0..(1usize << (d + 1)) {
            let t = lag_t - if corner & 1 == 1 { dt } else { 0.0 };
            for a in 0..d {
                x[a] = lag_x[a] - if corner >> (a + 1) & 1 == 1 { dx[a] } else { 0.0 };
            }
            acc += k.eval(t, &x[..d]);
        }
        return acc / (1usize << (d + 1)) as f64;
    }
    let mut x = [0.0; 3];
    for a in 0..d {
        x[a] = lag_x[a] - 0.5 * dx[a];
    }
    k.eval(lag_t - 0.5 * dt, &x[..d])
}

/// Increment lattice of a plan and its placement relative to the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub cells: SpaceTimeGrid,
    /// time index of the output origin on the cell lattice
    pub time_offset: usize,
    /// spatial pad in cells per axis
    pub pad: Vec<usize>,
    pub burn_in: f64,
}

fn auto_burn_in(k: &EffectiveKernel, d: usize, tol: f64) -> Result<f64, SimError> {
    let (_, core) = k.factor_out();
    if let Some(f) = core.lattice() {
        let g = f.grid();
        return Ok(g.t(g.time().count - 1));
    }
    let mut t = 1.0;
    while temporal_tail(k, t, d)? >= tol {
        t *= 2.0;
        if t > 1e6 {
            return Err(SimError::IntegrabilityViolated("temporal tail does not decay".into()));
        }
    }
    // bisect down to the smallest adequate horizon
    let (mut lo, mut hi) = (if t > 1.0 { t / 2.0 } else { 0.0 }, t);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if temporal_tail(k, mid, d)? < tol { hi = mid } else { lo = mid }
    }
    Ok(hi)
}

fn auto_pad(k: &EffectiveKernel, d: usize, tol: f64) -> Result<f64, SimError> {
    let (_, core) = k.factor_out();
    if let Some(f) = core.lattice() {
        return Ok(f.grid().space().iter().map(|a| a.origin.abs().max((a.origin + a.extent()).abs())).fold(0.0, f64::max));
    }
    if matches!(core, EffectiveKernel::Zero) {
        return Ok(0.0);
    }
    let tail = |r: f64| spatial_tail(k, r, d).ok_or_else(|| SimError::InvalidPlan("set the spatial pad explicitly for this kernel".into()));
    let mut r = 1.0;
    while tail(r)? >= tol {
        r *= 2.0;
        if r > 1e6 {
            return Err(SimError::IntegrabilityViolated("spatial tail does not decay".into()));
        }
    }
    let (mut lo, mut hi) = (if r > 1.0 { r / 2.0 } else { 0.0 }, r);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if tail(mid)? < tol { hi = mid } else { lo = mid }
    }
    Ok(hi)
}

/// The increment lattice for `plan`.
pub fn window(plan: &SimulationPlan) -> Result<Window, SimError> {
    let g = &plan.grid;
    let d = g.dim();
    let dt = g.time().step;
    let t0 = g.time().origin;
    let (burn, pad) = match plan.mode {
        Mode::Causal { pad } => {
            let b = (t0 / dt).round();
            if t0 < 0.0 || (b * dt - t0).abs() > 1e-9 * dt.max(t0.abs()) {
                return Err(SimError::InvalidPlan(format!("causal mode needs output times on the lattice k*dt from 0; origin {t0}")));
            }
            (b as usize, pad)
        }
        Mode::Stationary { burn_in, pad } => {
            let lp = lp_norm(&plan.kernel, 1.0, None, d)?.value();
            let l2 = lp_norm(&plan.kernel, 2.0, None, d)?.value();
            if !lp.is_finite() && !l2.is_finite() {
                return Err(SimError::IntegrabilityViolated(format!("{:?} has no finite global L1 or L2 norm", plan.kernel)));
            }
            let t = match burn_in {
                Some(t) if t > 0.0 => t,
                Some(t) => return Err(SimError::InvalidPlan(format!("burn-in {t} must be > 0"))),
                None => auto_burn_in(&plan.kernel, d, plan.tail_tol)?,
            };
            if let Some(r) = pad {
                if r <= 0.0 {
                    return Err(SimError::InvalidPlan(format!("pad {r} must be > 0")));
                }
            }
            (((t / dt) - 1e-9).ceil().max(1.0) as usize, pad)
        }
    };
    let r = match pad {
        Some(r) if r >= 0.0 => r,
        Some(r) => return Err(SimError::InvalidPlan(format!("pad {r} must be >= 0"))),
        None => auto_pad(&plan.kernel, d, plan.tail_tol)?,
    };
    let pads: Vec<usize> = g.space().iter().map(|a| ((r / a.step) - 1e-9).ceil().max(0.0) as usize).collect();
    let n = g.time().count;
    // the last row never contributes but keeps the window aligned with the output grid
    let tc = burn + n;
    let time = Axis::new(t0 - burn as f64 * dt, dt, tc);
    let space: Vec<Axis> = g
        .space()
        .iter()
        .zip(&pads)
        .map(|(a, &p)| Axis::new(a.origin - p as f64 * a.step, a.step, a.count + 2 * p))
        .collect();
    Ok(Window { cells: SpaceTimeGrid::new(time, &space)?, time_offset: burn, pad: pads, burn_in: burn as f64 * dt })
}

/// Lag table `G[l][e]`, `l = 0..=lmax`, spatial lag `e_a` in `[-emax_a, emax_a]`.
struct LagTable {
    values: Vec<f64>,
    shape: Vec<usize>,
    emax: Vec<usize>,
}

fn lag_table(k: &EffectiveKernel, lmax: usize, emax: &[usize], dt: f64, dx: &[f64]) -> LagTable {
    let d = emax.len();
    let mut shape = vec![lmax + 1];
    shape.extend(emax.iter().map(|e| 2 * e + 1));
    let q: usize = shape[1..].iter().product();
    let mut values = vec![0.0; (lmax + 1) * q];
    values.par_chunks_mut(q).enumerate().for_each(|(l, row)| {
        if l == 0 {
            return;
        }
        let mut lag = [0.0; 3];
        for (f, v) in row.iter_mut().enumerate() {
            let mut rem = f;
            for a in (0..d).rev() {
                let n = 2 * emax[a] + 1;
                lag[a] = ((rem % n) as f64 - emax[a] as f64) * dx[a];
                rem /= n;
            }
            *v = cell_weight(k, l as f64 * dt, &lag[..d], dt, dx);
        }
    });
    LagTable { values, shape, emax: emax.to_vec() }
}

/// A plan with its kernel tabulated once.
pub struct Simulator {
    pub plan: SimulationPlan,
    pub window: Window,
    scale: f64,
    table: LagTable,
    fft: Option<Convolver>,
    sampler: CellSampler,
}

impl Simulator {
    pub fn new(plan: SimulationPlan) -> Result<Self, SimError> {
        if plan.replicates == 0 {
            return Err(SimError::InvalidPlan("replicates must be >= 1".into()));
        }
        plan.levy.validate()?;
        let window = window(&plan)?;
        let (scale, core) = plan.kernel.factor_out();
        let g = &plan.grid;
        let dx: Vec<f64> = g.space().iter().map(|a| a.step).collect();
        let lmax = window.cells.time().count;
        let emax: Vec<usize> = g.space().iter().zip(&window.pad).map(|(a, p)| a.count + p - 1).collect();
        let table = lag_table(core, lmax, &emax, g.time().step, &dx);
        let mut cshape = vec![window.cells.time().count];
        cshape.extend(window.cells.space().iter().map(|a| a.count));
        let fft = if plan.method == Method::Fft {
            let needed: usize = table.shape.iter().zip(&cshape).map(|(a, b)| good_size(a + b - 1)).product();
            if needed > plan.memory_cap {
                return Err(SimError::MemoryCapExceeded { needed, cap: plan.memory_cap });
            }
            Some(Convolver::new(&table.values, &table.shape, &cshape))
        } else {
            None
        };
        let sampler = plan.levy.cell_sampler(window.cells.cell_volume());
        Ok(Self { plan, window, scale, table, fft, sampler })
    }

    /// Increments of replicate `r` on the window lattice.
    pub fn increments(&self, r: usize) -> Field {
        let c = &self.window.cells;
        let d = c.dim();
        let vals: Vec<f64> = (0..c.len())
            .into_par_iter()
            .map(|f| self.sampler.draw(self.plan.seed, r as u64, c.lattice_key(f), d))
            .collect();
        Field::new(c.clone(), vals).expect("finite increments")
    }

    pub fn increments_with_catalog(&self, r: usize) -> (Field, JumpCatalog) {
        sample_with_catalog(&self.plan.levy, &self.window.cells, self.plan.seed, r as u64)
    }

    /// `X` on the output grid from given window increments.
    pub fn convolve(&self, lambda: &Field) -> Result<Field, SimError> {
        lambda.grid().check_same(&self.window.cells)?;
        let g = &self.plan.grid;
        let mut out_shape = vec![g.time().count];
        out_shape.extend(g.space().iter().map(|a| a.count));
        let mut vals = match &self.fft {
            Some(conv) => {
                let mut off = vec![self.window.time_offset];
                off.extend(self.window.cells.space().iter().map(|a| a.count - 1));
                conv.apply_window(lambda.values(), &off, &out_shape)
            }
            None => self.direct(lambda.values()),
        };
        if self.scale != 1.0 {
            vals.iter_mut().for_each(|v| *v *= self.scale);
        }
        Ok(Field::new(g.clone(), vals)?)
    }

    fn direct(&self, lam: &[f64]) -> Vec<f64> {
        let g = &self.plan.grid;
        let s = g.spatial_len();
        let out: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|f| {
                let j = g.spatial_multi(f % s);
                self.point_value(lam, f / s, &j)
            })
            .collect();
        out
    }

    /// `sum_cells G * Lambda` at output node `(n, j)` in a fixed order.
    fn point_value(&self, lam: &[f64], n: usize, j: &[usize; 3]) -> f64 {
        let c = &self.window.cells;
        let d = c.dim();
        let cs = c.spatial_len();
        let q: usize = self.table.shape[1..].iter().product();
        let nl = self.window.time_offset + n;
        let mut acc = 0.0;
        for i in 0..nl.min(c.time().count) {
            let l = nl - i;
            let row = &self.table.values[l * q..(l + 1) * q];
            let lrow = &lam[i * cs..(i + 1) * cs];
            for (kf, &lv) in lrow.iter().enumerate() {
                let k = c.spatial_multi(kf);
                let mut qf = 0;
                for a in 0..d {
                    // e = j - k + pad, shifted by emax
                    let e = j[a] as isize - k[a] as isize + self.window.pad[a] as isize + self.table.emax[a] as isize;
                    qf = qf * (2 * self.table.emax[a] + 1) + e as usize;
                }
                acc += row[qf] * lv;
            }
        }
        acc
    }

    /// Replicate `r` of the field.
    pub fn replicate(&self, r: usize) -> Result<Field, SimError> {
        self.convolve(&self.increments(r))
    }

    /// Values of replicate `r` at output nodes `(n, j)` without forming the field.
    pub fn points(&self, r: usize, nodes: &[(usize, [usize; 3])]) -> Vec<f64> {
        let c = &self.window.cells;
        let d = c.dim();
        let cs = c.spatial_len();
        let q: usize = self.table.shape[1..].iter().product();
        let mut acc = vec![0.0; nodes.len()];
        let nt = c.time().count;
        for i in 0..nt {
            let live: Vec<usize> = (0..nodes.len()).filter(|&p| self.window.time_offset + nodes[p].0 > i).collect();
            if live.is_empty() {
                continue;
            }
            for kf in 0..cs {
                let flat = i * cs + kf;
                let lv = self.sampler.draw(self.plan.seed, r as u64, c.lattice_key(flat), d);
                if lv == 0.0 {
                    continue;
                }
                let k = c.spatial_multi(kf);
                for &p in &live {
                    let (n, j) = &nodes[p];
                    let l = self.window.time_offset + n - i;
                    let mut qf = 0;
                    for a in 0..d {
                        let e = j[a] as isize - k[a] as isize + self.window.pad[a] as isize + self.table.emax[a] as isize;
                        qf = qf * (2 * self.table.emax[a] + 1) + e as usize;
                    }
                    acc[p] += self.table.values[l * q + qf] * lv;
                }
            }
        }
        acc.iter_mut().for_each(|v| *v *= self.scale);
        acc
    }

    /// `(weight, volume)` of every window cell for `X` at output node `(n, j)`.
    pub fn point_weights(&self, n: usize, j: &[usize; 3]) -> Vec<(f64, f64)> {
        let c = &self.window.cells;
        let d = c.dim();
        let cs = c.spatial_len();
        let q: usize = self.table.shape[1..].iter().product();
        let vol = c.cell_volume();
        let nl = self.window.time_offset + n;
        let mut out = Vec::new();
        for i in 0..nl.min(c.time().count) {
            let l = nl - i;
            for kf in 0..cs {
                let k = c.spatial_multi(kf);
                let mut qf = 0;
                for a in 0..d {
                    let e = j[a] as isize - k[a] as isize + self.window.pad[a] as isize + self.table.emax[a] as isize;
                    qf = qf * (2 * self.table.emax[a] + 1) + e as usize;
                }
                let v = self.table.values[l * q + qf];
                if v != 0.0 {
                    out.push((v * self.scale, vol));
                }
            }
        }
        out
    }
}

/// One field per replicate.
pub fn simulate_field(plan: &SimulationPlan) -> Result<Vec<Field>, SimError> {
    let sim = Simulator::new(plan.clone())?;
    (0..plan.replicates).map(|r| sim.replicate(r)).collect()
}

/// Increments built from point masses `(t, x, size)`; masses outside the lattice are dropped.
pub fn increments_from_jumps(grid: &SpaceTimeGrid, jumps: &[(f64, [f64; 3], f64)]) -> Field {
    let d = grid.dim();
    let mut v = vec![0.0; grid.len()];
    'outer: for &(t, x, z) in jumps {
        let i = ((t - grid.time().origin) / grid.time().step).floor();
        if i < 0.0 || i as usize >= grid.time().count {
            continue;
        }
        let mut j = [0usize; 3];
        for a in 0..d {
            let ax = &grid.space()[a];
            let k = ((x[a] - ax.origin) / ax.step).floor();
            if k < 0.0 || k as usize >= ax.count {
                continue 'outer;
            }
            j[a] = k as usize;
        }
        v[grid.index(i as usize, &j[..d])] += z;
    }
    Field::new(grid.clone(), v).expect("finite sizes")
}

/// `sup |X - mu * X - g * Lambda|` with `X`, `Lambda` on one lattice starting at `t = 0`.
pub fn vou_residual(x: &Field, mu: &DriftMeasure, g: &Kernel, lambda: &Field) -> Result<f64, SimError> {
    x.grid().check_same(lambda.grid())?;
    let grid = x.grid();
    if grid.time().origin != 0.0 {
        return Err(GridError::GridMismatch.into());
    }
    let mx = convolve_measure_function(mu, x, TimeRule::Trapezoid)?;
    let plan = SimulationPlan {
        method: Method::Fft,
        ..SimulationPlan::new(grid.clone(), LevyBasisSpec::gaussian(0.0), EffectiveKernel::Plain(g.clone()), Mode::Causal { pad: Some(0.0) }, 0, 1)
    };
    let gl = Simulator::new(plan)?.convolve(lambda)?;
    let mut sup: f64 = 0.0;
    for ((a, b), c) in x.values().iter().zip(mx.values()).zip(gl.values()) {
        sup = sup.max((a - b - c).abs());
    }
    Ok(sup)
}

/// `sup_u |mean_r e^{iu X_r} - phi(u)|` over `u_grid`.
pub fn cf_distance(samples: &[f64], phi: impl Fn(f64) -> Complex64, u_grid: &[f64]) -> f64 {
    let n = samples.len() as f64;
    u_grid
        .iter()
        .map(|&u| {
            let e: Complex64 = samples.iter().map(|&x| Complex64::new(0.0, u * x).exp()).sum::<Complex64>() / n;
            (e - phi(u)).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbePoint {
    pub t: f64,
    pub distance: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceProbe {
    pub points: Vec<ProbePoint>,
    /// false when the kernel has no stationary limit
    pub limit_exists: bool,
}

/// Distance between the law of `X(t, x0)` (causal, across replicates) and the stationary law.
pub fn convergence_probe(plan: &SimulationPlan, checkpoints: &[f64], x0: &[f64], u_grid: &[f64]) -> Result<ConvergenceProbe, SimError> {
    let d = plan.grid.dim();
    let dt = plan.grid.time().step;
    let space: Vec<Axis> = plan.grid.space().iter().zip(x0).map(|(a, &x)| Axis::new(x, a.step, 1)).collect();
    let l1 = lp_norm(&plan.kernel, 1.0, None, d)?.value();
    let l2 = lp_norm(&plan.kernel, 2.0, None, d)?.value();
    let limit_exists = l1.is_finite() && l2.is_finite();
    let pad = match plan.mode {
        Mode::Causal { pad } | Mode::Stationary { pad, .. } => pad,
    };
    let phi = if limit_exists {
        let grid = SpaceTimeGrid::new(Axis::new(0.0, dt, 1), &space)?;
        let sp = SimulationPlan { grid, mode: Mode::Stationary { burn_in: None, pad }, tail_tol: plan.tail_tol.min(1e-4), method: Method::Direct, ..plan.clone() };
        let sim = Simulator::new(sp)?;
        let w = sim.point_weights(0, &[0; 3]);
        Some(triplet_from_weights(w, &plan.levy, NuHistogram::default_bins())?)
    } else {
        None
    };
    let mut points = Vec::new();
    for &t in checkpoints {
        let grid = SpaceTimeGrid::new(Axis::new(t, dt, 1), &space)?;
        let sp = SimulationPlan { grid, mode: Mode::Causal { pad }, ..plan.clone() };
        let sim = Simulator::new(sp)?;
        let xs: Vec<f64> = (0..plan.replicates).into_par_iter().map(|r| sim.points(r, &[(0, [0; 3])])[0]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
        let distance = match &phi {
            Some(tr) => cf_distance(&xs, |u| char_function(tr, u), u_grid),
            None => f64::NAN,
        };
        points.push(ProbePoint { t, distance, variance });
    }
    Ok(ConvergenceProbe { points, limit_exists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::levy::LevyMeasureModel;

    fn grid1(dt: f64, nt: usize, half: usize) -> SpaceTimeGrid {
        make_grid(1, Axis::new(0.0, dt, nt), &[Axis::symmetric(half, dt)]).unwrap()
    }

    #[test]
    fn zero_kernel_gives_zero_field() {
        let plan = SimulationPlan::new(grid1(0.1, 6, 3), LevyBasisSpec::gaussian(1.0), EffectiveKernel::Zero, Mode::Causal { pad: Some(0.5) }, 1, 2);
        for f in simulate_field(&plan).unwrap() {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn deterministic_basis_gives_mean_curve() {
        let spec = LevyBasisSpec::new(1.0, 0.0, LevyMeasureModel::Zero).unwrap();
        let g = make_grid(1, Axis::new(0.0, 0.05, 81), &[Axis::new(0.0, 0.05, 1)]).unwrap();
        let plan = SimulationPlan::new(g.clone(), spec, EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }, Mode::Causal { pad: Some(12.0) }, 3, 1);
        let f = &simulate_field(&plan).unwrap()[0];
        for i in 0..g.time().count {
            let t = g.t(i);
            assert!((f.values()[i] - 2.0 * (1.0 - (-t).exp())).abs() < 2e-3, "{t}");
        }
    }

    #[test]
    fn fft_direct_and_points_agree() {
        let spec = LevyBasisSpec::gaussian(1.0);
        let k = EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 };
        let mut plan = SimulationPlan::new(grid1(0.1, 8, 4), spec, k, Mode::Stationary { burn_in: Some(0.5), pad: Some(0.3) }, 5, 1);
        let a = Simulator::new(plan.clone()).unwrap();
        plan.method = Method::Direct;
        let b = Simulator::new(plan).unwrap();
        let fa = a.replicate(0).unwrap();
        let fb = b.replicate(0).unwrap();
        for (x, y) in fa.values().iter().zip(fb.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        let p = b.points(0, &[(7, [8, 0, 0]), (3, [2, 0, 0])]);
        assert_eq!(p[0], fb.get(7, &[8]));
        assert_eq!(p[1], fb.get(3, &[2]));
    }

    #[test]
    fn window_layout_and_auto_truncation() {
        let g = make_grid(1, Axis::new(1.0, 0.1, 3), &[Axis::symmetric(2, 0.1)]).unwrap();
        let plan = SimulationPlan::new(g, LevyBasisSpec::gaussian(1.0), EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 2.0 }, Mode::Stationary { burn_in: None, pad: None }, 0, 1);
        let w = window(&plan).unwrap();
        // e^{-T0} = 1e-3 and e^{-2R} = 1e-3
        assert!((w.burn_in - 7.0).abs() < 0.1 + 1e-9, "{}", w.burn_in);
        assert_eq!(w.pad[0], 35);
        assert!((w.cells.time().origin - (1.0 - w.burn_in)).abs() < 1e-12);
        let bad = SimulationPlan { kernel: EffectiveKernel::Ex1 { lambda: -1.0, lambda_p: 1.0 }, ..plan };
        assert!(matches!(window(&bad), Err(SimError::IntegrabilityViolated(_))));
    }

    #[test]
    fn residual_examples() {
        let g = grid1(0.05, 21, 10);
        let mu = DriftMeasure::ou(1.0, 1).unwrap();
        let k = Kernel::exp_spatial(1.0).unwrap();
        let z = Field::zeros(g.clone());
        assert_eq!(vou_residual(&z, &mu, &k, &z).unwrap(), 0.0);
        let mut bumped = z.clone().into_values();
        bumped[g.index(10, &[10])] = 1.0;
        let b = Field::new(g.clone(), bumped).unwrap();
        let r = vou_residual(&b, &mu, &k, &z).unwrap();
        assert!(r >= 1.0 - 0.05 * 0.5, "{r}");
    }

    #[test]
    fn jumps_land_in_their_cells() {
        let g = grid1(0.1, 5, 3);
        let f = increments_from_jumps(&g, &[(0.15, [0.05, 0.0, 0.0], 2.0), (0.19, [0.01, 0.0, 0.0], 1.0), (9.0, [0.0; 3], 5.0)]);
        assert_eq!(f.get(1, &[3]), 3.0);
        assert_eq!(f.values().iter().sum::<f64>(), 3.0);
    }
}
