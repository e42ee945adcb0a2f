//! Homogeneous Lévy bases `(b, sigma^2, nu)`: jump models, moment integrals,
//! cell-increment sampling and characteristic triplets of stochastic integrals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{Field, GridError, SpaceTimeGrid};
use crate::quad;
use crate::rng::CounterRng;
use crate::special::{lower_gamma, upper_gamma};

#[derive(Debug, Error)]
pub enum LevyError {
    #[error("moment exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("invalid Lévy basis parameter: {0}")]
    InvalidParameter(String),
    #[error("stochastic integral not defined: {0}")]
    IntegrabilityViolated(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpLaw {
    Normal { mean: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    /// `z1` with probability `p`, otherwise `z2`
    TwoPoint { z1: f64, p: f64, z2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyMeasureModel {
    CompoundPoisson { rate: f64, law: JumpLaw },
    /// `nu(dz) = scale z^{-1-alpha} e^{-theta z} dz` on `z > 0`
    TemperedStable { alpha: f64, theta: f64, scale: f64 },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `|z| > 1`
    Tail,
    /// `|z| <= 1`
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallJumpMode {
    #[default]
    Discard,
    GaussianCompensate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyBasisSpec {
    pub b: f64,
    pub sigma: f64,
    pub nu: LevyMeasureModel,
    pub small_jump_cutoff: f64,
    pub small_jump_mode: SmallJumpMode,
}

// `int_lo^hi |z|^p dz` for any real interval
fn abs_pow_interval(lo: f64, hi: f64, p: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let f = |z: f64| z.signum() * z.abs().powf(p + 1.0) / (p + 1.0);
    f(hi) - f(lo)
}

fn normal_pdf(z: f64, m: f64, s: f64) -> f64 {
    let u = (z - m) / s;
    (-0.5 * u * u).exp() / (s * (2.0 * PI).sqrt())
}

impl JumpLaw {
    pub fn validate(&self) -> Result<(), LevyError> {
        let ok = match *self {
            JumpLaw::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            JumpLaw::Uniform { a, b } => a.is_finite() && b.is_finite() && a < b,
            JumpLaw::TwoPoint { z1, p, z2 } => z1.is_finite() && z2.is_finite() && (0.0..=1.0).contains(&p),
        };
        if ok { Ok(()) } else { Err(LevyError::InvalidParameter(format!("{self:?}"))) }
    }

    fn is_symmetric(&self) -> bool {
        match *self {
            JumpLaw::Normal { mean, .. } => mean == 0.0,
            JumpLaw::Uniform { a, b } => a == -b,
            JumpLaw::TwoPoint { z1, p, z2 } => (z1 == -z2 && p == 0.5) || (z1 == 0.0 && z2 == 0.0),
        }
    }

    /// `E[ w(Z) 1{lo < |Z| <= hi} ]` for `w(z) = |z|^p` (`signed = false`) or `w(z) = z`.
    fn band(&self, p: f64, signed: bool, lo: f64, hi: f64) -> f64 {
        let w = |z: f64| if signed { z } else { z.abs().powf(p) };
        let inside = |z: f64| z.abs() > lo && z.abs() <= hi;
        match *self {
            JumpLaw::TwoPoint { z1, p: q, z2 } => {
                let mut s = 0.0;
                if inside(z1) {
                    s += q * w(z1);
                }
                if inside(z2) {
                    s += (1.0 - q) * w(z2);
                }
                s
            }
            JumpLaw::Uniform { a, b } => {
                let seg = |l: f64, h: f64| {
                    let (l, h) = (l.max(a), h.min(b));
                    if h <= l {
                        0.0
                    } else if signed {
                        0.5 * (h * h - l * l)
                    } else {
                        abs_pow_interval(l, h, p)
                    }
                };
                (seg(lo, hi) + seg(-hi, -lo)) / (b - a)
            }
            JumpLaw::Normal { mean, sd } => {
                let f = |z: f64| w(z) * normal_pdf(z, mean, sd);
                let reach = mean.abs() + 40.0 * sd;
                let one_side = |sgn: f64| {
                    let h = hi.min(reach.max(lo));
                    if h <= lo {
                        return 0.0;
                    }
                    let g = |r: f64| f(sgn * r);
                    // split at the mode to help the adaptive rule
                    let m = sgn * mean;
                    if m > lo && m < h {
                        quad::integrate(g, lo, m, 1e-300, 1e-13).value + quad::integrate(g, m, h, 1e-300, 1e-13).value
                    } else {
                        quad::integrate(g, lo, h, 1e-300, 1e-13).value
                    }
                };
                one_side(1.0) + one_side(-1.0)
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Normal { mean, sd } => {
                let n: f64 = StandardNormal.sample(rng);
                mean + sd * n
            }
            JumpLaw::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            JumpLaw::TwoPoint { z1, p, z2 } => {
                if rng.random::<f64>() < p {
                    z1
                } else {
                    z2
                }
            }
        }
    }
}

impl LevyMeasureModel {
    pub fn validate(&self) -> Result<(), LevyError> {
        match *self {
            LevyMeasureModel::CompoundPoisson { rate, law } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(LevyError::InvalidParameter(format!("compound Poisson rate {rate}")));
                }
                law.validate()
            }
            LevyMeasureModel::TemperedStable { alpha, theta, scale } => {
                if !(alpha > 0.0 && alpha < 2.0) || !(theta > 0.0) || !(scale >= 0.0) || !theta.is_finite() || !scale.is_finite() {
                    return Err(LevyError::InvalidParameter(format!(
                        "tempered stable alpha {alpha}, theta {theta}, scale {scale}"
                    )));
                }
                Ok(())
            }
            LevyMeasureModel::Zero => Ok(()),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            LevyMeasureModel::CompoundPoisson { law, .. } => law.is_symmetric(),
            LevyMeasureModel::TemperedStable { scale, .. } => *scale == 0.0,
            LevyMeasureModel::Zero => true,
        }
    }

    /// `int |z|^p 1{lo < |z| <= hi} nu(dz)` (`hi` may be infinite); `p` may be 0 when `lo > 0`.
    pub fn abs_moment_band(&self, p: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match *self {
            LevyMeasureModel::Zero => 0.0,
            LevyMeasureModel::CompoundPoisson { rate, law } => rate * law.band(p, false, lo, hi),
            LevyMeasureModel::TemperedStable { alpha, theta, scale } => {
                if scale == 0.0 {
                    return 0.0;
                }
                scale * ts_band(alpha, theta, p, lo, hi)
            }
        }
    }

    /// `int z 1{lo < |z| <= hi} nu(dz)`.
    pub fn first_moment_band(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match *self {
            LevyMeasureModel::CompoundPoisson { rate, law } => rate * law.band(1.0, true, lo, hi),
            _ => self.abs_moment_band(1.0, lo, hi),
        }
    }

    /// `nu(|z| > 1)`.
    pub fn tail_mass(&self) -> f64 {
        self.abs_moment_band(0.0, 1.0, f64::INFINITY)
    }

    /// Rate of jumps with `|z| > eps`.
    pub fn jump_rate_above(&self, eps: f64) -> f64 {
        self.abs_moment_band(0.0, eps, f64::INFINITY)
    }

    /// Atom discretization of `nu` plus the second moment of the part that is
    /// too small to be represented.
    fn atoms(&self) -> (Vec<(f64, f64)>, f64, f64) {
        match *self {
            LevyMeasureModel::Zero => (Vec::new(), 0.0, 0.0),
            LevyMeasureModel::CompoundPoisson { rate, law } => match law {
                JumpLaw::TwoPoint { z1, p, z2 } => (vec![(z1, rate * p), (z2, rate * (1.0 - p))], 0.0, 0.0),
                JumpLaw::Uniform { a, b } => {
                    // composite Gauss-Legendre, 8 panels of 16 nodes
                    let (x, w) = quad::gauss_legendre(16);
                    let panels = 8;
                    let h = (b - a) / panels as f64;
                    let mut out = Vec::with_capacity(panels * 16);
                    for k in 0..panels {
                        let c = a + (k as f64 + 0.5) * h;
                        for (xi, wi) in x.iter().zip(&w) {
                            out.push((c + 0.5 * h * xi, rate * wi * 0.5 * h / (b - a)));
                        }
                    }
                    (out, 0.0, 0.0)
                }
                JumpLaw::Normal { mean, sd } => {
                    let (x, w) = quad::gauss_hermite_prob(96);
                    (x.iter().zip(&w).map(|(x, w)| (mean + sd * x, rate * w)).collect(), 0.0, 0.0)
                }
            },
            LevyMeasureModel::TemperedStable { theta, scale, .. } => {
                if scale == 0.0 {
                    return (Vec::new(), 0.0, 0.0);
                }
                let z_lo = 1e-10_f64;
                let z_hi = 60.0 / theta;
                let n = 600;
                let r = (z_hi / z_lo).powf(1.0 / n as f64);
                let mut out = Vec::with_capacity(n + 1);
                let mut lo = z_lo;
                for _ in 0..n {
                    let hi = lo * r;
                    let m = self.abs_moment_band(0.0, lo, hi);
                    if m > 0.0 {
                        out.push((self.first_moment_band(lo, hi) / m, m));
                    }
                    lo = hi;
                }
                let rest = self.abs_moment_band(0.0, z_hi, f64::INFINITY);
                if rest > 0.0 {
                    out.push((self.first_moment_band(z_hi, f64::INFINITY) / rest, rest));
                }
                (out, self.abs_moment_band(2.0, 0.0, z_lo), z_lo)
            }
        }
    }
}

fn ts_band(alpha: f64, theta: f64, p: f64, lo: f64, hi: f64) -> f64 {
    // int_lo^hi z^{p-1-alpha} e^{-theta z} dz = theta^{alpha-p} [Gamma(a, theta lo) - Gamma(a, theta hi)]
    let a = p - alpha;
    let pref = theta.powf(alpha - p);
    if lo == 0.0 {
        if a <= 0.0 {
            return f64::INFINITY;
        }
        if hi.is_infinite() {
            return pref * crate::special::gamma(a);
        }
        return pref * lower_gamma(a, theta * hi);
    }
    let up_hi = if hi.is_infinite() { 0.0 } else { upper_gamma(a, theta * hi) };
    pref * (upper_gamma(a, theta * lo) - up_hi)
}

/// `int |z|^p 1{|z| > 1} nu(dz)` or `int |z|^p 1{|z| <= 1} nu(dz)`; `+inf` when divergent.
pub fn moment_integral(nu: &LevyMeasureModel, p: f64, region: Region) -> Result<f64, LevyError> {
    if !(p > 0.0) {
        return Err(LevyError::NonPositiveExponent(p));
    }
    Ok(match region {
        Region::Tail => nu.abs_moment_band(p, 1.0, f64::INFINITY),
        Region::Core => nu.abs_moment_band(p, 0.0, 1.0),
    })
}

impl LevyBasisSpec {
    pub fn new(b: f64, sigma: f64, nu: LevyMeasureModel) -> Result<Self, LevyError> {
        let s = Self { b, sigma, nu, small_jump_cutoff: 1e-3, small_jump_mode: SmallJumpMode::Discard };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self { b: 0.0, sigma, nu: LevyMeasureModel::Zero, small_jump_cutoff: 1e-3, small_jump_mode: SmallJumpMode::Discard }
    }

    pub fn with_small_jumps(mut self, cutoff: f64, mode: SmallJumpMode) -> Result<Self, LevyError> {
        self.small_jump_cutoff = cutoff;
        self.small_jump_mode = mode;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), LevyError> {
        if !self.b.is_finite() {
            return Err(LevyError::InvalidParameter(format!("b = {}", self.b)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(LevyError::InvalidParameter(format!("sigma = {}", self.sigma)));
        }
        if !(self.small_jump_cutoff > 0.0 && self.small_jump_cutoff <= 1.0) {
            return Err(LevyError::InvalidParameter(format!("epsilon = {}", self.small_jump_cutoff)));
        }
        self.nu.validate()
    }

    /// `b = 0` and `nu` symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.b == 0.0 && self.nu.is_symmetric()
    }

    /// The mean of `Lambda` per unit volume, if it exists.
    pub fn mean_b1(&self) -> Option<f64> {
        if self.nu.abs_moment_band(1.0, 1.0, f64::INFINITY).is_finite() {
            Some(self.b + self.nu.first_moment_band(1.0, f64::INFINITY))
        } else {
            None
        }
    }

    /// The drift of `Lambda`, if the small jumps are integrable.
    pub fn drift_b0(&self) -> Option<f64> {
        if self.nu.abs_moment_band(1.0, 0.0, 1.0).is_finite() {
            Some(self.b - self.nu.first_moment_band(0.0, 1.0))
        } else {
            None
        }
    }

    /// `sigma^2 + int z^2 nu(dz)`, if finite.
    pub fn second_moment_m2(&self) -> Option<f64> {
        let v = self.sigma * self.sigma + self.nu.abs_moment_band(2.0, 0.0, f64::INFINITY);
        v.is_finite().then_some(v)
    }

    /// Sampler of single-cell increments for cells of volume `vol`.
    pub fn cell_sampler(&self, vol: f64) -> CellSampler {
        let eps = self.small_jump_cutoff;
        // compound Poisson laws may put mass exactly at small sizes; the cutoff applies to them too
        let rate = self.nu.jump_rate_above(eps);
        let comp = self.nu.first_moment_band(eps, 1.0);
        let mut var = self.sigma * self.sigma;
        if self.small_jump_mode == SmallJumpMode::GaussianCompensate {
            var += self.nu.abs_moment_band(2.0, 0.0, eps);
        }
        CellSampler {
            drift: (self.b - comp) * vol,
            sd: (var * vol).sqrt(),
            jump_mean: rate * vol,
            nu: self.nu,
            eps,
        }
    }
}

/// A sampled atom of the Lévy basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub cell: usize,
    pub t: f64,
    pub x: [f64; 3],
    pub size: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpCatalog {
    pub jumps: Vec<Jump>,
}

#[derive(Debug, Clone)]
pub struct CellSampler {
    drift: f64,
    sd: f64,
    jump_mean: f64,
    nu: LevyMeasureModel,
    eps: f64,
}

impl CellSampler {
    fn jump_count(&self, rng: &mut CounterRng) -> u64 {
        let m = self.jump_mean;
        if m <= 0.0 {
            return 0;
        }
        if m < 20.0 {
            // inversion
            let u = rng.open01();
            let mut k = 0u64;
            let mut p = (-m).exp();
            let mut c = p;
            while u > c && k < 1000 {
                k += 1;
                p *= m / k as f64;
                c += p;
            }
            k
        } else {
            Poisson::new(m).expect("positive mean").sample(rng) as u64
        }
    }

    fn jump_size(&self, rng: &mut CounterRng) -> f64 {
        match self.nu {
            LevyMeasureModel::CompoundPoisson { law, .. } => loop {
                let z = law.sample(rng);
                if z.abs() > self.eps {
                    return z;
                }
            },
            LevyMeasureModel::TemperedStable { alpha, theta, .. } => loop {
                let z = self.eps * rng.open01().powf(-1.0 / alpha);
                if rng.open01() <= (-theta * (z - self.eps)).exp() {
                    return z;
                }
            },
            LevyMeasureModel::Zero => 0.0,
        }
    }

    /// Increment of the cell with lattice key `key` in replicate `replicate`.
    pub fn draw(&self, seed: u64, replicate: u64, key: u64, dim: usize) -> f64 {
        let mut rng = CounterRng::for_cell(seed, replicate, key);
        self.sample(&mut rng, dim, |_, _| {})
    }

    /// Increment of one cell; the jump sizes are passed to `on_jump` with uniform offsets in `[0,1)^{1+d}`.
    fn sample(&self, rng: &mut CounterRng, dim: usize, mut on_jump: impl FnMut(f64, [f64; 4])) -> f64 {
        let mut v = self.drift;
        if self.sd > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            v += self.sd * n;
        }
        let k = self.jump_count(rng);
        for _ in 0..k {
            let z = self.jump_size(rng);
            let mut off = [0.0; 4];
            for o in off.iter_mut().take(dim + 1) {
                *o = rng.random::<f64>();
            }
            on_jump(z, off);
            v += z;
        }
        v
    }
}

/// Independent cell increments `Lambda(cell)`; each cell's draw depends only on
/// `(spec, cell volume, seed, absolute lattice position)`.
pub fn sample_increments(spec: &LevyBasisSpec, grid: &SpaceTimeGrid, seed: u64) -> Field {
    sample_replicate(spec, grid, seed, 0)
}

/// As [`sample_increments`] for replicate `replicate` of a Monte Carlo run.
pub fn sample_replicate(spec: &LevyBasisSpec, grid: &SpaceTimeGrid, seed: u64, replicate: u64) -> Field {
    let s = spec.cell_sampler(grid.cell_volume());
    let d = grid.dim();
    let vals: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            s.draw(seed, replicate, grid.lattice_key(c), d)
        })
        .collect();
    Field::new(grid.clone(), vals).expect("finite increments")
}

/// Increments together with the catalog of sampled jumps (exact time and site within the cell).
pub fn sample_with_catalog(spec: &LevyBasisSpec, grid: &SpaceTimeGrid, seed: u64, replicate: u64) -> (Field, JumpCatalog) {
    let s = spec.cell_sampler(grid.cell_volume());
    let d = grid.dim();
    let per_cell: Vec<(f64, Vec<Jump>)> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let mut rng = CounterRng::for_cell(seed, replicate, grid.lattice_key(c));
            let (n, j) = (c / grid.spatial_len(), c % grid.spatial_len());
            let mut base = [0.0; 3];
            grid.x_into(j, &mut base[..d]);
            let t0 = grid.t(n);
            let mut jumps = Vec::new();
            let v = s.sample(&mut rng, d, |z, off| {
                let mut x = [0.0; 3];
                for k in 0..d {
                    x[k] = base[k] + off[k + 1] * grid.space()[k].step;
                }
                jumps.push(Jump { cell: c, t: t0 + off[0] * grid.time().step, x, size: z });
            });
            (v, jumps)
        })
        .collect();
    let mut vals = Vec::with_capacity(per_cell.len());
    let mut cat = JumpCatalog::default();
    for (v, j) in per_cell {
        vals.push(v);
        cat.jumps.extend(j);
    }
    (Field::new(grid.clone(), vals).expect("finite increments"), cat)
}

/// Histogram of `nu_g` over log-spaced magnitude bins with 1 as a bin edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NuHistogram {
    pub bins_per_sign: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    /// per bin: (mass, mass * mean, mass * second moment); positive then negative sign
    pub pos: Vec<[f64; 3]>,
    pub neg: Vec<[f64; 3]>,
    /// mass beyond `max_magnitude`: (mass, first moment, second moment)
    pub above_pos: [f64; 3],
    pub above_neg: [f64; 3],
    /// `int y^2 nu_g(dy)` over `|y| < min_magnitude`
    pub below_second_moment: f64,
    pub below_first_moment: f64,
    /// exact `int y 1{|y| <= 1} nu_g(dy)`; bins carry their own compensator when absent
    pub core_compensator: Option<f64>,
}

impl NuHistogram {
    pub fn new(bins_per_sign: usize, min_magnitude: f64, max_magnitude: f64) -> Self {
        Self {
            bins_per_sign,
            min_magnitude,
            max_magnitude,
            pos: vec![[0.0; 3]; bins_per_sign],
            neg: vec![[0.0; 3]; bins_per_sign],
            above_pos: [0.0; 3],
            above_neg: [0.0; 3],
            below_second_moment: 0.0,
            below_first_moment: 0.0,
            core_compensator: None,
        }
    }

    pub fn default_bins() -> Self {
        Self::new(256, 1e-4, 1e4)
    }

    pub fn is_empty(&self) -> bool {
        self.total_mass() == 0.0 && self.below_second_moment == 0.0
    }

    pub fn total_mass(&self) -> f64 {
        self.pos.iter().chain(&self.neg).map(|b| b[0]).sum::<f64>() + self.above_pos[0] + self.above_neg[0]
    }

    pub fn add(&mut self, y: f64, w: f64) {
        let a = y.abs();
        if y == 0.0 || w == 0.0 {
            return;
        }
        let slot = if a < self.min_magnitude {
            self.below_second_moment += w * y * y;
            self.below_first_moment += w * y;
            return;
        } else if a >= self.max_magnitude {
            if y > 0.0 { &mut self.above_pos } else { &mut self.above_neg }
        } else {
            let k = ((a / self.min_magnitude).ln() / (self.max_magnitude / self.min_magnitude).ln() * self.bins_per_sign as f64)
                .floor() as usize;
            let k = k.min(self.bins_per_sign - 1);
            if y > 0.0 { &mut self.pos[k] } else { &mut self.neg[k] }
        };
        slot[0] += w;
        slot[1] += w * y;
        slot[2] += w * y * y;
    }

    /// Upper edge of bin `k` as a magnitude.
    pub fn edge(&self, k: usize) -> f64 {
        self.min_magnitude * (self.max_magnitude / self.min_magnitude).powf(k as f64 / self.bins_per_sign as f64)
    }

    fn bins(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.pos.iter().chain(&self.neg).chain([&self.above_pos, &self.above_neg])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub b: f64,
    pub sigma_sq: f64,
    pub nu: NuHistogram,
}

impl Triplet {
    pub fn zero() -> Self {
        Self { b: 0.0, sigma_sq: 0.0, nu: NuHistogram::default_bins() }
    }
}

/// Characteristic triplet of `int g dLambda` by the cell (corner) rule.
pub fn integral_triplet(g: &Field, spec: &LevyBasisSpec) -> Result<Triplet, LevyError> {
    let vol = g.grid().cell_volume();
    triplet_from_weights(g.values().iter().map(|&v| (v, vol)), spec, NuHistogram::default_bins())
}

/// Triplet of `sum_i c_i Lambda(A_i)`-type integrals from `(g value, volume)` pairs.
pub fn triplet_from_weights<I>(cells: I, spec: &LevyBasisSpec, mut hist: NuHistogram) -> Result<Triplet, LevyError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (atoms, tiny_m2, floor) = spec.nu.atoms();
    let mut compensator = 0.0;
    let has_jumps = !matches!(spec.nu, LevyMeasureModel::Zero);
    let mut b = 0.0;
    let mut s2 = 0.0;
    for (g, vol) in cells {
        if !g.is_finite() {
            return Err(LevyError::IntegrabilityViolated(format!("kernel value {g}")));
        }
        if g == 0.0 {
            continue;
        }
        b += spec.b * g * vol;
        s2 += spec.sigma * spec.sigma * g * g * vol;
        if !has_jumps {
            continue;
        }
        let a = g.abs();
        let shift = if a < 1.0 {
            g * spec.nu.first_moment_band(1.0, 1.0 / a)
        } else if a > 1.0 {
            -g * spec.nu.first_moment_band(1.0 / a, 1.0)
        } else {
            0.0
        };
        b += shift * vol;
        compensator += g * spec.nu.first_moment_band(floor, 1.0 / a) * vol;
        s2 += g * g * tiny_m2 * vol;
        for &(z, w) in &atoms {
            hist.add(g * z, w * vol);
        }
    }
    if !(b.is_finite() && s2.is_finite()) {
        return Err(LevyError::IntegrabilityViolated(format!("b_g = {b}, sigma_g^2 = {s2}")));
    }
    if has_jumps {
        hist.core_compensator = Some(compensator);
    }
    Ok(Triplet { b, sigma_sq: s2, nu: hist })
}

/// `exp(i b u - sigma^2 u^2 / 2 + int (e^{iuy} - 1 - iuy 1{|y|<=1}) nu(dy))`.
pub fn char_function(t: &Triplet, u: f64) -> Complex64 {
    let mut expo = Complex64::new(-0.5 * (t.sigma_sq + t.nu.below_second_moment) * u * u, t.b * u);
    if let Some(c) = t.nu.core_compensator {
        expo -= Complex64::new(0.0, u * (c - t.nu.below_first_moment));
    }
    for bin in t.nu.bins() {
        let m = bin[0];
        if m == 0.0 {
            continue;
        }
        let mean = bin[1] / m;
        let var = (bin[2] / m - mean * mean).max(0.0);
        let comp = if t.nu.core_compensator.is_none() && mean.abs() <= 1.0 { mean } else { 0.0 };
        let e = Complex64::new(0.0, u * mean).exp() * (1.0 - 0.5 * u * u * var);
        expo += m * (e - 1.0 - Complex64::new(0.0, u * comp));
    }
    expo.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Axis};

    fn quad_oracle_ts(p: f64, lo: f64, hi: f64) -> f64 {
        quad::integrate(|z| z.powf(p - 1.5) * (-z).exp(), lo, hi, 1e-300, 1e-13).value
    }

    #[test]
    fn moment_examples() {
        let two = LevyMeasureModel::CompoundPoisson { rate: 1.0, law: JumpLaw::TwoPoint { z1: 2.0, p: 1.0, z2: 0.0 } };
        assert_eq!(moment_integral(&two, 1.0, Region::Tail).unwrap(), 2.0);
        assert_eq!(moment_integral(&LevyMeasureModel::Zero, 3.0, Region::Core).unwrap(), 0.0);
        assert!(matches!(moment_integral(&two, 0.0, Region::Tail), Err(LevyError::NonPositiveExponent(_))));
        let ts = LevyMeasureModel::TemperedStable { alpha: 0.5, theta: 1.0, scale: 1.0 };
        let core = moment_integral(&ts, 1.0, Region::Core).unwrap();
        assert!((core - quad_oracle_ts(1.0, 0.0, 1.0)).abs() < 1e-9 * core);
        // incomplete gamma closed form: gamma(0.5, 1) = sqrt(pi) erf(1)
        assert!((core - PI.sqrt() * 0.842_700_792_949_714_9).abs() < 1e-12);
        assert!(moment_integral(&ts, 0.5, Region::Core).unwrap().is_infinite());
        let tail = moment_integral(&ts, 0.7, Region::Tail).unwrap();
        let o = quad::integrate_to_inf(|z| z.powf(-0.8) * (-z).exp(), 1.0, 1e-300, 1e-13).value;
        assert!((tail - o).abs() < 1e-8 * o);
    }

    #[test]
    fn smooth_variants_match_quadrature() {
        let n = LevyMeasureModel::CompoundPoisson { rate: 1.5, law: JumpLaw::Normal { mean: 0.3, sd: 0.8 } };
        let u = LevyMeasureModel::CompoundPoisson { rate: 2.0, law: JumpLaw::Uniform { a: -0.5, b: 2.5 } };
        for p in [0.5, 1.0, 2.0, 3.3] {
            let on = quad::integrate(|z| 1.5 * z.abs().powf(p) * normal_pdf(z, 0.3, 0.8), -1.0, 1.0, 1e-300, 1e-13).value;
            let got = moment_integral(&n, p, Region::Core).unwrap();
            assert!((got - on).abs() < 1e-8 * on, "normal core p={p}");
            let ou = quad::integrate(|z| 2.0 * z.powf(p) / 3.0, 1.0, 2.5, 1e-300, 1e-13).value;
            let got = moment_integral(&u, p, Region::Tail).unwrap();
            assert!((got - ou).abs() < 1e-8 * ou, "uniform tail p={p}");
        }
    }

    #[test]
    fn b1_b0_examples() {
        let s = LevyBasisSpec::new(1.0, 0.0, LevyMeasureModel::Zero).unwrap();
        assert_eq!((s.mean_b1(), s.drift_b0()), (Some(1.0), Some(1.0)));
        let sym = LevyBasisSpec::new(
            0.0,
            0.0,
            LevyMeasureModel::CompoundPoisson { rate: 1.0, law: JumpLaw::TwoPoint { z1: 2.0, p: 0.5, z2: -2.0 } },
        )
        .unwrap();
        assert_eq!(sym.mean_b1(), Some(0.0));
        assert!(sym.is_symmetric());
        let u = LevyBasisSpec::new(
            0.5,
            0.0,
            LevyMeasureModel::CompoundPoisson { rate: 2.0, law: JumpLaw::Uniform { a: 1.0, b: 3.0 } },
        )
        .unwrap();
        assert!((u.mean_b1().unwrap() - 4.5).abs() < 1e-14);
        // MC check of the mean of Lambda([0,1] x [0,1])
        let g = make_grid(1, Axis::new(0.0, 1.0, 1), &[Axis::new(0.0, 1.0, 1)]).unwrap();
        let n = 40_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for r in 0..n {
            let v = sample_replicate(&u, &g, 11, r).values()[0];
            s1 += v;
            s2 += v * v;
        }
        let m = s1 / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        assert!((m - 4.5).abs() < 4.0 * se, "{m} +- {se}");
        let ts = LevyBasisSpec::new(0.0, 0.0, LevyMeasureModel::TemperedStable { alpha: 1.5, theta: 1.0, scale: 1.0 }).unwrap();
        assert!(ts.drift_b0().is_none());
        assert!(ts.mean_b1().is_some());
    }

    #[test]
    fn deterministic_and_gaussian_sampling() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::new(-1.0, 0.5, 5)]).unwrap();
        let zero = LevyBasisSpec::new(0.0, 0.0, LevyMeasureModel::Zero).unwrap();
        assert!(sample_increments(&zero, &g, 3).values().iter().all(|&v| v == 0.0));
        let det = LevyBasisSpec::new(3.0, 0.0, LevyMeasureModel::Zero).unwrap();
        assert!(sample_increments(&det, &g, 3).values().iter().all(|&v| (v - 0.15).abs() < 1e-15));

        let big = make_grid(1, Axis::new(0.0, 0.1, 1000), &[Axis::new(0.0, 0.1, 1000)]).unwrap();
        let f = sample_increments(&LevyBasisSpec::gaussian(1.0), &big, 5);
        let n = f.values().len() as f64;
        let m = f.values().iter().sum::<f64>() / n;
        let v = f.values().iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        assert!((v - 0.01).abs() < 1e-4, "{v}");
        assert_eq!(f, sample_increments(&LevyBasisSpec::gaussian(1.0), &big, 5));
    }

    #[test]
    fn tempered_stable_jump_rate_and_mean() {
        let spec = LevyBasisSpec::new(0.0, 0.0, LevyMeasureModel::TemperedStable { alpha: 0.5, theta: 2.0, scale: 1.0 })
            .unwrap()
            .with_small_jumps(0.05, SmallJumpMode::Discard)
            .unwrap();
        let rate = spec.nu.jump_rate_above(0.05);
        let o = quad::integrate_to_inf(|z| z.powf(-1.5) * (-2.0 * z).exp(), 0.05, 1e-300, 1e-12).value;
        assert!((rate - o).abs() < 1e-9 * o);
        let g = make_grid(1, Axis::new(0.0, 1.0, 200), &[Axis::new(0.0, 1.0, 100)]).unwrap();
        let (f, cat) = sample_with_catalog(&spec, &g, 9, 0);
        let mean_count = cat.jumps.len() as f64 / g.len() as f64;
        assert!((mean_count - rate).abs() < 4.0 * (rate / g.len() as f64).sqrt());
        // compensated below 1: E Lambda(cell) = int_{z>1} z nu
        let m = f.values().iter().sum::<f64>() / g.len() as f64;
        let target = spec.nu.first_moment_band(1.0, f64::INFINITY);
        let var = spec.nu.abs_moment_band(2.0, 0.05, f64::INFINITY);
        assert!((m - target).abs() < 4.0 * (var / g.len() as f64).sqrt(), "{m} vs {target}");
        for j in &cat.jumps {
            assert!(j.size > 0.05);
            let (n, s) = (j.cell / g.spatial_len(), j.cell % g.spatial_len());
            assert!(j.t >= g.t(n) && j.t < g.t(n) + 1.0);
            assert!(j.x[0] >= g.space()[0].coord(s) && j.x[0] < g.space()[0].coord(s) + 1.0);
        }
    }

    #[test]
    fn triplet_examples() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 10), &[Axis::new(0.0, 0.1, 10)]).unwrap();
        let z = Field::zeros(g.clone());
        let t = integral_triplet(&z, &LevyBasisSpec::gaussian(1.0)).unwrap();
        assert_eq!((t.b, t.sigma_sq), (0.0, 0.0));
        assert!(t.nu.is_empty());
        let one = z.map(|_| 1.0).unwrap();
        let t = integral_triplet(&one, &LevyBasisSpec::gaussian(1.0)).unwrap();
        assert!((t.sigma_sq - 1.0).abs() < 1e-12);

        let fine = make_grid(1, Axis::new(0.0, 0.01, 500), &[Axis::symmetric(500, 0.01)]).unwrap();
        let e = Field::from_fn(fine, |t, x| (-t - x[0].abs()).exp()).unwrap();
        let t = integral_triplet(&e, &LevyBasisSpec::gaussian(1.0)).unwrap();
        let exact = 0.5 * (1.0 - (-10.0f64).exp()) * (1.0 - (-10.0f64).exp());
        assert!((t.sigma_sq - exact).abs() < 2e-2, "{}", t.sigma_sq);
    }

    #[test]
    fn char_function_examples() {
        let mut t = Triplet::zero();
        assert_eq!(char_function(&t, 0.0), Complex64::new(1.0, 0.0));
        t.sigma_sq = 1.0;
        assert!((char_function(&t, 1.0) - Complex64::new((-0.5f64).exp(), 0.0)).norm() < 1e-15);
        let mut t = Triplet { b: 0.3, sigma_sq: 0.2, nu: NuHistogram::default_bins() };
        t.nu.add(1.0, 0.5);
        // 1.0 sits on a bin edge inside |y| <= 1: compensated
        let want = (Complex64::new(0.0, 0.3) - 0.1 + 0.5 * (Complex64::new(0.0, 1.0).exp() - 1.0 - Complex64::new(0.0, 1.0))).exp();
        assert!((char_function(&t, 1.0) - want).norm() < 1e-14);
    }

    #[test]
    fn compound_poisson_triplet_cf_against_direct_formula() {
        // int g dLambda with g = c on a single cell of volume v is c * Lambda(cell):
        // log CF = v * rate * (E e^{iucZ} - 1) for b = 0 and |cZ| > 1 ... compare with exact law
        let spec = LevyBasisSpec::new(
            0.0,
            0.5,
            LevyMeasureModel::CompoundPoisson { rate: 1.3, law: JumpLaw::Normal { mean: 0.4, sd: 0.7 } },
        )
        .unwrap();
        let c = 0.8;
        let v = 0.7;
        let t = triplet_from_weights([(c, v)], &spec, NuHistogram::default_bins()).unwrap();
        for u in [-3.0, -1.0, 0.5, 2.0, 3.0] {
            // Gaussian part plus compensator: b * c v = -c v int_{|z|<=1} z nu(dz) from the drift convention
            let comp = -c * v * spec.nu.first_moment_band(0.0, 1.0);
            let jump_cf = (-0.5 * (0.7 * u * c).powi(2)).exp() * Complex64::new(0.0, 0.4 * u * c).exp();
            let want = (Complex64::new(-0.5 * 0.25 * c * c * v * u * u, comp * u) + v * 1.3 * (jump_cf - 1.0)).exp();
            let got = char_function(&t, u);
            assert!((got - want).norm() < 1e-3, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn symmetric_cf_is_real() {
        let spec = LevyBasisSpec::new(
            0.0,
            0.3,
            LevyMeasureModel::CompoundPoisson { rate: 2.0, law: JumpLaw::TwoPoint { z1: 1.5, p: 0.5, z2: -1.5 } },
        )
        .unwrap();
        let g = make_grid(1, Axis::new(0.0, 0.1, 10), &[Axis::symmetric(10, 0.1)]).unwrap();
        let f = Field::from_fn(g, |t, x| (-t - x[0].abs()).exp() * 3.0).unwrap();
        let t = integral_triplet(&f, &spec).unwrap();
        for k in -30..=30 {
            assert!(char_function(&t, k as f64 * 0.1).im.abs() <= 1e-12);
        }
    }
}
