//! Drift measures `mu` on `R_+ x R^d` and their gridded algebra.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::conv::Convolver;
use crate::grid::{Axis, Field, GridError, SpaceTimeGrid};
use crate::quad;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FnX = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FnTX = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("component {0} has infinite total variation on the horizon")]
    Divergent(String),
    #[error("drift measures may not charge t = 0 (atom at t = {0})")]
    AtomAtTimeZero(f64),
    #[error("lattice must start at t = 0 and contain x = 0")]
    LatticeWithoutOrigin,
    #[error("component {component} needs spatial dimension {needed}, got {got}")]
    Dimension { component: String, needed: usize, got: usize },
    #[error("invalid drift measure parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Quadrature rule along the time axis of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeRule {
    /// trapezoid in the convolution variable
    #[default]
    Trapezoid,
    /// left corner rule: `sum_{i < n} a_i b_{n-i}`
    Corner,
}

impl TimeRule {
    fn node_weight(self, n: usize, count: usize) -> f64 {
        match self {
            TimeRule::Trapezoid => {
                if count == 1 {
                    0.0
                } else if n == 0 || n + 1 == count {
                    0.5
                } else {
                    1.0
                }
            }
            TimeRule::Corner => {
                if n + 1 == count {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Spatial densities used in separable components (`d = 1`).
#[derive(Clone)]
pub enum SpatialDensity {
    /// `1 / (pi (1 + x^2))`
    Cauchy,
    /// `e^{-x} 1{x >= 0}`, value 1/2 at the jump
    OneSidedExp,
    /// Lebesgue measure (density 1)
    Lebesgue,
    Custom { f: FnX, abs_mass: f64 },
}

impl SpatialDensity {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpatialDensity::Cauchy => 1.0 / (PI * (1.0 + x[0] * x[0])),
            SpatialDensity::OneSidedExp => {
                if x[0] > 0.0 {
                    (-x[0]).exp()
                } else if x[0] == 0.0 {
                    0.5
                } else {
                    0.0
                }
            }
            SpatialDensity::Lebesgue => 1.0,
            SpatialDensity::Custom { f, .. } => f(x),
        }
    }

    pub fn abs_mass(&self) -> f64 {
        match self {
            SpatialDensity::Cauchy | SpatialDensity::OneSidedExp => 1.0,
            SpatialDensity::Lebesgue => f64::INFINITY,
            SpatialDensity::Custom { abs_mass, .. } => *abs_mass,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SpatialDensity::Cauchy => "cauchy",
            SpatialDensity::OneSidedExp => "one-sided exponential",
            SpatialDensity::Lebesgue => "lebesgue",
            SpatialDensity::Custom { .. } => "custom",
        }
    }
}

#[derive(Clone)]
pub enum Component {
    /// `k(t) dt (x) delta_0(dx)`
    TemporalDirac { k: Fn1 },
    /// `k(t) f(x) dt dx`
    Separable { k: Fn1, f: SpatialDensity },
    /// `lambda (4 pi t)^{-d/2} e^{-|x|^2 / 4t} dt dx`
    Heat { lambda: f64 },
    /// a general joint density with optional `t -> int |k(t, x)| dx`
    Joint { k: FnTX, abs_mass: Option<Fn1> },
    /// joint density tabulated on a lattice (nodes outside are zero)
    Tabulated { field: Field },
    /// `mass delta_{(t, 0)}`, `t > 0`
    Atom { t: f64, mass: f64 },
}

impl fmt::Debug for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::TemporalDirac { .. } => write!(f, "TemporalDirac"),
            Component::Separable { f: s, .. } => write!(f, "Separable({})", s.name()),
            Component::Heat { lambda } => write!(f, "Heat({lambda})"),
            Component::Joint { .. } => write!(f, "Joint"),
            Component::Tabulated { .. } => write!(f, "Tabulated"),
            Component::Atom { t, mass } => write!(f, "Atom({t}, {mass})"),
        }
    }
}

/// Named families with closed-form resolvents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Ou { lambda: f64 },
    RegVar { alpha: f64 },
    CauchySpatial { lambda: f64 },
    ExpSpatial { lambda: f64 },
    Heat { lambda: f64 },
}

#[derive(Clone, Debug)]
pub struct DriftMeasure {
    dim: usize,
    family: Option<Family>,
    components: Vec<Component>,
}

impl DriftMeasure {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self, DriftError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::DimensionUnsupported(dim).into());
        }
        for c in &components {
            match c {
                Component::Atom { t, .. } if *t <= 0.0 => return Err(DriftError::AtomAtTimeZero(*t)),
                Component::Separable { f, .. } if dim != 1 && !matches!(f, SpatialDensity::Custom { .. }) => {
                    return Err(DriftError::Dimension { component: format!("{c:?}"), needed: 1, got: dim })
                }
                Component::Tabulated { field } if field.grid().dim() != dim => {
                    return Err(DriftError::Dimension { component: "tabulated".into(), needed: field.grid().dim(), got: dim })
                }
                _ => {}
            }
        }
        Ok(Self { dim, family: None, components })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, family: None, components: Vec::new() }
    }

    /// `-lambda Leb (x) delta_0`
    pub fn ou(lambda: f64, dim: usize) -> Result<Self, DriftError> {
        let mut m = Self::new(dim, vec![Component::TemporalDirac { k: Arc::new(move |_| -lambda) }])?;
        m.family = Some(Family::Ou { lambda });
        Ok(m)
    }

    /// `k(t) = -1 / (alpha (1 + t)^alpha)` times `delta_0`
    pub fn regvar(alpha: f64, dim: usize) -> Result<Self, DriftError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DriftError::InvalidParameter(format!("regvar alpha {alpha} outside (0, 1)")));
        }
        let mut m = Self::new(dim, vec![Component::TemporalDirac { k: Arc::new(move |t| -1.0 / (alpha * (1.0 + t).powf(alpha))) }])?;
        m.family = Some(Family::RegVar { alpha });
        Ok(m)
    }

    /// `-lambda dt f(x) dx` with the Cauchy density
    pub fn cauchy_spatial(lambda: f64) -> Self {
        Self {
            dim: 1,
            family: Some(Family::CauchySpatial { lambda }),
            components: vec![Component::Separable { k: Arc::new(move |_| -lambda), f: SpatialDensity::Cauchy }],
        }
    }

    /// `-lambda dt e^{-x} 1{x >= 0} dx`
    pub fn exp_spatial(lambda: f64) -> Self {
        Self {
            dim: 1,
            family: Some(Family::ExpSpatial { lambda }),
            components: vec![Component::Separable { k: Arc::new(move |_| -lambda), f: SpatialDensity::OneSidedExp }],
        }
    }

    /// `lambda` times the heat kernel
    pub fn heat(lambda: f64, dim: usize) -> Result<Self, DriftError> {
        let mut m = Self::new(dim, vec![Component::Heat { lambda }])?;
        m.family = Some(Family::Heat { lambda });
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// No spatial spread: every component lives on the `x = 0` column.
    pub fn is_temporal(&self) -> bool {
        self.components.iter().all(|c| matches!(c, Component::TemporalDirac { .. } | Component::Atom { .. }))
    }

    /// Density of the absolutely continuous part at `(t, x)` (temporal Dirac parts excluded).
    pub fn joint_density(&self, t: f64, x: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| match c {
                Component::Separable { k, f } => k(t) * f.eval(x),
                Component::Heat { lambda } => lambda * heat_kernel(t, x),
                Component::Joint { k, .. } => k(t, x),
                Component::Tabulated { field } => tabulated_at(field, t, x),
                _ => 0.0,
            })
            .sum()
    }

    /// Density of the `x = 0` column at `t`.
    pub fn column_density(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| match c {
                Component::TemporalDirac { k } => k(t),
                _ => 0.0,
            })
            .sum()
    }
}

/// `(4 pi t)^{-d/2} e^{-|x|^2 / 4t}`, zero for `t <= 0`.
pub fn heat_kernel(t: f64, x: &[f64]) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI * t).powf(-0.5 * x.len() as f64) * (-r2 / (4.0 * t)).exp()
}

fn tabulated_at(field: &Field, t: f64, x: &[f64]) -> f64 {
    let g = field.grid();
    let locate = |a: &Axis, v: f64| {
        let k = ((v - a.origin) / a.step).round();
        if k < 0.0 || k as usize >= a.count || ((a.origin + k * a.step) - v).abs() > 1e-9 * a.step.max(v.abs()) {
            None
        } else {
            Some(k as usize)
        }
    };
    let Some(i) = locate(g.time(), t) else { return 0.0 };
    let mut j = [0usize; 3];
    for (k, a) in g.space().iter().enumerate() {
        match locate(a, x[k]) {
            Some(v) => j[k] = v,
            None => return 0.0,
        }
    }
    field.get(i, &j[..g.dim()])
}

/// `|mu|([0, T] x R^d)`.
pub fn total_variation(mu: &DriftMeasure, horizon: f64) -> Result<f64, DriftError> {
    let mut tv = 0.0;
    for c in &mu.components {
        let name = format!("{c:?}");
        let v = match c {
            Component::TemporalDirac { k } => {
                let r = quad::integrate(|t| k(t).abs(), 0.0, horizon, 1e-13, 1e-11);
                if !r.converged || !r.value.is_finite() {
                    return Err(DriftError::Divergent(name));
                }
                r.value
            }
            Component::Separable { k, f } => {
                let r = quad::integrate(|t| k(t).abs(), 0.0, horizon, 1e-13, 1e-11);
                if !r.converged || !r.value.is_finite() {
                    return Err(DriftError::Divergent(name));
                }
                if r.value == 0.0 {
                    0.0
                } else {
                    let m = f.abs_mass();
                    if !m.is_finite() {
                        return Err(DriftError::Divergent(name));
                    }
                    r.value * m
                }
            }
            Component::Heat { lambda } => lambda.abs() * horizon,
            Component::Joint { abs_mass, .. } => match abs_mass {
                Some(m) => {
                    let r = quad::integrate(|t| m(t), 0.0, horizon, 1e-13, 1e-11);
                    if !r.converged || !r.value.is_finite() {
                        return Err(DriftError::Divergent(name));
                    }
                    r.value
                }
                None => return Err(DriftError::Divergent(format!("{name} (no spatial mass available)"))),
            },
            Component::Tabulated { field } => {
                let g = field.grid();
                let mut acc = 0.0;
                for i in 0..g.time().count {
                    if g.t(i) > horizon + 1e-12 {
                        break;
                    }
                    acc += field.slab(i).iter().map(|v| v.abs()).sum::<f64>() * g.cell_volume();
                }
                acc
            }
            Component::Atom { t, mass } => {
                if *t <= horizon {
                    mass.abs()
                } else {
                    0.0
                }
            }
        };
        tv += v;
    }
    Ok(tv)
}

/// A measure tabulated on a lattice whose time axis starts at 0 and whose
/// spatial axes contain 0: a column density on `x = 0`, a joint density and
/// atoms `(time index, mass)` located at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedMeasure {
    grid: SpaceTimeGrid,
    zero: usize,
    pub column: Vec<f64>,
    pub joint: Option<Vec<f64>>,
    pub atoms: Vec<(usize, f64)>,
}

fn check_lattice(grid: &SpaceTimeGrid) -> Result<usize, DriftError> {
    if grid.time().origin != 0.0 {
        return Err(DriftError::LatticeWithoutOrigin);
    }
    grid.spatial_zero().ok_or(DriftError::LatticeWithoutOrigin)
}

impl GriddedMeasure {
    pub fn zero(grid: &SpaceTimeGrid) -> Result<Self, DriftError> {
        let zero = check_lattice(grid)?;
        Ok(Self { grid: grid.clone(), zero, column: vec![0.0; grid.time().count], joint: None, atoms: Vec::new() })
    }

    /// The unit atom at (0, 0), the unit of convolution (test helper; not a drift measure).
    pub fn unit_atom(grid: &SpaceTimeGrid) -> Result<Self, DriftError> {
        let mut m = Self::zero(grid)?;
        m.atoms.push((0, 1.0));
        Ok(m)
    }

    pub fn from_parts(grid: &SpaceTimeGrid, column: Vec<f64>, joint: Option<Vec<f64>>) -> Result<Self, DriftError> {
        let zero = check_lattice(grid)?;
        if column.len() != grid.time().count {
            return Err(GridError::LengthMismatch { expected: grid.time().count, got: column.len() }.into());
        }
        if let Some(j) = &joint {
            if j.len() != grid.len() {
                return Err(GridError::LengthMismatch { expected: grid.len(), got: j.len() }.into());
            }
        }
        Ok(Self { grid: grid.clone(), zero, column, joint, atoms: Vec::new() })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn is_temporal(&self) -> bool {
        self.joint.is_none()
    }

    fn joint_mut(&mut self) -> &mut Vec<f64> {
        let n = self.grid.len();
        self.joint.get_or_insert_with(|| vec![0.0; n])
    }

    /// Total variation on the lattice horizon with the given time rule.
    pub fn total_variation(&self, rule: TimeRule) -> f64 {
        let g = &self.grid;
        let n = g.time().count;
        let dt = g.time().step;
        let dx = g.spatial_cell_volume();
        let s = g.spatial_len();
        let mut tv = 0.0;
        for i in 0..n {
            let w = rule.node_weight(i, n) * dt;
            let mut row = self.column[i].abs();
            if let Some(j) = &self.joint {
                row += j[i * s..(i + 1) * s].iter().map(|v| v.abs()).sum::<f64>() * dx;
            }
            tv += w * row;
        }
        tv + self.atoms.iter().map(|a| a.1.abs()).sum::<f64>()
    }

    /// `e^{-m t} mu`.
    pub fn tilt(&self, m: f64) -> Self {
        let mut out = self.clone();
        out.scale_rows(|t| (-m * t).exp());
        out
    }

    pub fn scale_rows(&mut self, f: impl Fn(f64) -> f64) {
        let g = self.grid.clone();
        let s = g.spatial_len();
        for i in 0..g.time().count {
            let w = f(g.t(i));
            self.column[i] *= w;
            if let Some(j) = &mut self.joint {
                j[i * s..(i + 1) * s].iter_mut().for_each(|v| *v *= w);
            }
        }
        for a in &mut self.atoms {
            a.1 *= f(g.t(a.0));
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.column.iter_mut().for_each(|v| *v *= c);
        if let Some(j) = &mut out.joint {
            j.iter_mut().for_each(|v| *v *= c);
        }
        out.atoms.iter_mut().for_each(|a| a.1 *= c);
        out
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self, DriftError> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        for (a, b) in out.column.iter_mut().zip(&other.column) {
            *a += c * b;
        }
        if let Some(jo) = &other.joint {
            for (a, b) in out.joint_mut().iter_mut().zip(jo) {
                *a += c * b;
            }
        }
        for &(i, m) in &other.atoms {
            match out.atoms.iter_mut().find(|a| a.0 == i) {
                Some(a) => a.1 += c * m,
                None => out.atoms.push((i, c * m)),
            }
        }
        Ok(out)
    }

    /// Joint density with the column folded in at `x = 0` (weight `1 / dx^d`).
    pub fn joint_with_column(&self) -> Vec<f64> {
        let g = &self.grid;
        let s = g.spatial_len();
        let dx = g.spatial_cell_volume();
        let mut j = self.joint.clone().unwrap_or_else(|| vec![0.0; g.len()]);
        for i in 0..g.time().count {
            j[i * s + self.zero] += self.column[i] / dx;
        }
        j
    }

    /// `self * other` on the common lattice.
    pub fn convolve(&self, other: &Self, rule: TimeRule) -> Result<Self, DriftError> {
        self.grid.check_same(&other.grid)?;
        let g = &self.grid;
        let n = g.time().count;
        let s = g.spatial_len();
        let dt = g.time().step;
        let mut out = Self::zero(g)?;
        out.column = time_convolve(&self.column, &other.column, dt, rule);
        if self.joint.is_some() || other.joint.is_some() {
            let mut a = self.joint_with_column();
            let mut b = other.joint_with_column();
            apply_rule(&mut a, &mut b, s, rule);
            let mut full = spacetime_convolve(&a, &b, g);
            let scale = dt * g.spatial_cell_volume();
            full.iter_mut().for_each(|v| *v *= scale);
            if rule == TimeRule::Trapezoid {
                full[..s].iter_mut().for_each(|v| *v = 0.0);
            }
            let dx = g.spatial_cell_volume();
            for i in 0..n {
                full[i * s + self.zero] -= out.column[i] / dx;
            }
            out.joint = Some(full);
        }
        // atoms shift the other factor in time
        for (x, y) in [(self, other), (other, self)] {
            for &(k, m) in &x.atoms {
                for i in k..n {
                    out.column[i] += m * y.column[i - k];
                }
                if let Some(j) = &y.joint {
                    let dst = out.joint_mut();
                    for i in k..n {
                        for c in 0..s {
                            dst[i * s + c] += m * j[(i - k) * s + c];
                        }
                    }
                }
            }
        }
        for &(k1, m1) in &self.atoms {
            for &(k2, m2) in &other.atoms {
                if k1 + k2 < n {
                    match out.atoms.iter_mut().find(|a| a.0 == k1 + k2) {
                        Some(a) => a.1 += m1 * m2,
                        None => out.atoms.push((k1 + k2, m1 * m2)),
                    }
                }
            }
        }
        Ok(out)
    }

    /// Values of the measure as a field: joint density plus the column at `x = 0` as `c / dx^d`.
    pub fn to_field(&self) -> Result<Field, GridError> {
        Field::new(self.grid.clone(), self.joint_with_column())
    }

    /// Restriction to a spatial sub-lattice given by per-axis index offsets.
    pub fn crop(&self, target: &SpaceTimeGrid) -> Result<Self, DriftError> {
        check_lattice(target)?;
        let g = &self.grid;
        if target.dim() != g.dim() || target.time() != g.time() {
            return Err(GridError::GridMismatch.into());
        }
        let mut off = [0usize; 3];
        for k in 0..g.dim() {
            let (a, b) = (&g.space()[k], &target.space()[k]);
            let shift = ((b.origin - a.origin) / a.step).round();
            if (a.step - b.step).abs() > 1e-12 * a.step || shift < 0.0 || shift as usize + b.count > a.count {
                return Err(GridError::GridMismatch.into());
            }
            off[k] = shift as usize;
        }
        let mut out = Self::zero(target)?;
        out.column = self.column.clone();
        out.atoms = self.atoms.clone();
        if let Some(j) = &self.joint {
            let s = target.spatial_len();
            let mut v = vec![0.0; target.len()];
            for i in 0..g.time().count {
                for c in 0..s {
                    let m = target.spatial_multi(c);
                    let mut src = [0usize; 3];
                    for k in 0..g.dim() {
                        src[k] = m[k] + off[k];
                    }
                    v[i * s + c] = j[g.index(i, &src[..g.dim()])];
                }
            }
            out.joint = Some(v);
        }
        Ok(out)
    }
}

fn apply_rule(a: &mut [f64], b: &mut [f64], s: usize, rule: TimeRule) {
    match rule {
        TimeRule::Trapezoid => {
            a[..s].iter_mut().for_each(|v| *v *= 0.5);
            b[..s].iter_mut().for_each(|v| *v *= 0.5);
        }
        TimeRule::Corner => b[..s].iter_mut().for_each(|v| *v = 0.0),
    }
}

/// `dt * sum_i w_i a_i b_{n-i}` for each `n`.
pub fn time_convolve(a: &[f64], b: &[f64], dt: f64, rule: TimeRule) -> Vec<f64> {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    if a.iter().all(|v| *v == 0.0) || b.iter().all(|v| *v == 0.0) {
        return out;
    }
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        match rule {
            TimeRule::Trapezoid => {
                if k == 0 {
                    continue;
                }
                acc += 0.5 * (a[0] * b[k] + a[k] * b[0]);
                for i in 1..k {
                    acc += a[i] * b[k - i];
                }
            }
            TimeRule::Corner => {
                for i in 0..k {
                    acc += a[i] * b[k - i];
                }
            }
        }
        *o = acc * dt;
    }
    out
}

// full space-time convolution cropped to the lattice of `g` (zero at spatial index `zero` on every axis)
fn spacetime_convolve(a: &[f64], b: &[f64], g: &SpaceTimeGrid) -> Vec<f64> {
    let mut shape = vec![g.time().count];
    shape.extend(g.space().iter().map(|ax| ax.count));
    let conv = Convolver::new(a, &shape, &shape);
    let mut offset = vec![0usize];
    offset.extend(g.space().iter().map(|ax| ax.zero_index().expect("lattice contains 0")));
    conv.apply_window(b, &offset, &shape)
}

/// Tabulate `mu` on a lattice starting at `t = 0` and containing `x = 0`.
pub fn rasterize(mu: &DriftMeasure, grid: &SpaceTimeGrid) -> Result<GriddedMeasure, DriftError> {
    if grid.dim() != mu.dim {
        return Err(GridError::GridMismatch.into());
    }
    let mut out = GriddedMeasure::zero(grid)?;
    let n = grid.time().count;
    let s = grid.spatial_len();
    let d = grid.dim();
    let mut joint_any = false;
    let mut joint = vec![0.0; grid.len()];
    let mut x = [0.0; 3];
    for c in &mu.components {
        match c {
            Component::TemporalDirac { k } => {
                for i in 0..n {
                    out.column[i] += k(grid.t(i));
                }
            }
            Component::Atom { t, mass } => {
                let k = (t / grid.time().step).round();
                if k >= 0.0 && (k as usize) < n {
                    out.atoms.push((k as usize, *mass));
                }
            }
            Component::Heat { lambda } => {
                joint_any = true;
                joint[out.zero_index()] += lambda / grid.spatial_cell_volume();
                for i in 1..n {
                    let t = grid.t(i);
                    for j in 0..s {
                        grid.x_into(j, &mut x[..d]);
                        joint[i * s + j] += lambda * heat_kernel(t, &x[..d]);
                    }
                }
            }
            _ => {
                joint_any = true;
                for i in 0..n {
                    let t = grid.t(i);
                    for j in 0..s {
                        grid.x_into(j, &mut x[..d]);
                        joint[i * s + j] += match c {
                            Component::Separable { k, f } => k(t) * f.eval(&x[..d]),
                            Component::Joint { k, .. } => k(t, &x[..d]),
                            Component::Tabulated { field } => tabulated_at(field, t, &x[..d]),
                            _ => unreachable!(),
                        };
                    }
                }
            }
        }
    }
    if joint_any {
        out.joint = Some(joint);
    }
    Ok(out)
}

/// `mu * eta` tabulated on `grid`.
pub fn convolve_measures(mu: &DriftMeasure, eta: &DriftMeasure, grid: &SpaceTimeGrid, rule: TimeRule) -> Result<GriddedMeasure, DriftError> {
    rasterize(mu, grid)?.convolve(&rasterize(eta, grid)?, rule)
}

/// Lattice with the same steps, centered on 0, covering all differences of nodes of `grid`.
pub fn difference_lattice(grid: &SpaceTimeGrid) -> Result<SpaceTimeGrid, GridError> {
    let space: Vec<Axis> = grid.space().iter().map(|a| Axis::symmetric(a.count - 1, a.step)).collect();
    SpaceTimeGrid::new(Axis::new(0.0, grid.time().step, grid.time().count), &space)
}

/// `(h * mu)(t, x) = int h(t - s, x - y) mu(ds, dy)` on the grid of `h` (time origin 0).
pub fn convolve_measure_function(mu: &DriftMeasure, h: &Field, rule: TimeRule) -> Result<Field, DriftError> {
    let lat = difference_lattice(h.grid())?;
    let m = rasterize(mu, &lat)?;
    convolve_gridded_function(&m, h, rule)
}

/// As [`convolve_measure_function`] for a measure already tabulated on [`difference_lattice`] of `h`'s grid.
pub fn convolve_gridded_function(m: &GriddedMeasure, h: &Field, rule: TimeRule) -> Result<Field, DriftError> {
    let g = h.grid();
    if g.time().origin != 0.0 {
        return Err(DriftError::LatticeWithoutOrigin);
    }
    let lat = m.grid();
    if lat.time().count != g.time().count || (lat.time().step - g.time().step).abs() > 1e-15 * g.time().step {
        return Err(GridError::GridMismatch.into());
    }
    for (a, b) in lat.space().iter().zip(g.space()) {
        if a.count != 2 * b.count - 1 || (a.step - b.step).abs() > 1e-15 * b.step {
            return Err(GridError::GridMismatch.into());
        }
    }
    let n = g.time().count;
    let s = g.spatial_len();
    let dt = g.time().step;
    let hv = h.values();
    let mut out = vec![0.0; g.len()];
    // column part: temporal convolution per spatial node
    if m.column.iter().any(|v| *v != 0.0) {
        for j in 0..s {
            let col: Vec<f64> = (0..n).map(|i| hv[i * s + j]).collect();
            let r = time_convolve(&m.column, &col, dt, rule);
            for i in 0..n {
                out[i * s + j] += r[i];
            }
        }
    }
    if let Some(jm) = &m.joint {
        let mut a = jm.clone();
        let mut b = hv.to_vec();
        let ls = lat.spatial_len();
        match rule {
            TimeRule::Trapezoid => {
                a[..ls].iter_mut().for_each(|v| *v *= 0.5);
                b[..s].iter_mut().for_each(|v| *v *= 0.5);
            }
            TimeRule::Corner => b[..s].iter_mut().for_each(|v| *v = 0.0),
        }
        let mut ashape = vec![n];
        ashape.extend(lat.space().iter().map(|ax| ax.count));
        let mut bshape = vec![n];
        bshape.extend(g.space().iter().map(|ax| ax.count));
        let conv = Convolver::new(&a, &ashape, &bshape);
        let mut offset = vec![0usize];
        offset.extend(g.space().iter().map(|ax| ax.count - 1));
        let r = conv.apply_window(&b, &offset, &bshape);
        let scale = dt * g.spatial_cell_volume();
        for (i, v) in r.iter().enumerate() {
            if rule == TimeRule::Trapezoid && i < s {
                continue;
            }
            out[i] += v * scale;
        }
    }
    for &(k, mass) in &m.atoms {
        for i in k..n {
            for j in 0..s {
                out[i * s + j] += mass * hv[(i - k) * s + j];
            }
        }
    }
    Ok(Field::new(g.clone(), out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn temporal_grid(dt: f64, n: usize) -> SpaceTimeGrid {
        make_grid(1, Axis::new(0.0, dt, n), &[Axis::new(0.0, 1.0, 1)]).unwrap()
    }

    #[test]
    fn total_variation_examples() {
        assert!((total_variation(&DriftMeasure::ou(2.0, 1).unwrap(), 3.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((total_variation(&DriftMeasure::cauchy_spatial(1.0), 1.0).unwrap() - 1.0).abs() < 1e-12);
        let rv = total_variation(&DriftMeasure::regvar(0.5, 1).unwrap(), 1.0).unwrap();
        assert!((rv - 4.0 * (2f64.sqrt() - 1.0)).abs() < 1e-10);
        let leb = DriftMeasure::new(1, vec![Component::Separable { k: Arc::new(|_| 1.0), f: SpatialDensity::Lebesgue }]).unwrap();
        assert!(matches!(total_variation(&leb, 1.0), Err(DriftError::Divergent(_))));
        assert!(matches!(
            DriftMeasure::new(1, vec![Component::Atom { t: 0.0, mass: 1.0 }]),
            Err(DriftError::AtomAtTimeZero(_))
        ));
    }

    #[test]
    fn ou_squared_has_density_t() {
        let g = temporal_grid(0.01, 301);
        let ou = DriftMeasure::ou(1.0, 1).unwrap();
        let c = convolve_measures(&ou, &ou, &g, TimeRule::Trapezoid).unwrap();
        assert!(c.is_temporal());
        assert!((c.column[200] - 2.0).abs() < 1e-12);
        let cc = convolve_measures(&ou, &ou, &g, TimeRule::Corner).unwrap();
        assert!((cc.column[200] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_atom_is_identity() {
        let g = make_grid(1, Axis::new(0.0, 0.1, 20), &[Axis::symmetric(10, 0.1)]).unwrap();
        let mu = rasterize(&DriftMeasure::heat(-1.0, 1).unwrap(), &g).unwrap();
        let id = GriddedMeasure::unit_atom(&g).unwrap();
        let c = mu.convolve(&id, TimeRule::Trapezoid).unwrap();
        assert_eq!(c.column, mu.column);
        for (a, b) in c.joint.as_ref().unwrap().iter().zip(mu.joint.as_ref().unwrap()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn measure_function_examples() {
        let g = make_grid(1, Axis::new(0.0, 1e-3, 2001), &[Axis::symmetric(20, 0.1)]).unwrap();
        let one = Field::from_fn(g.clone(), |_, _| 1.0).unwrap();
        let ou = DriftMeasure::ou(1.0, 1).unwrap();
        let r = convolve_measure_function(&ou, &one, TimeRule::Trapezoid).unwrap();
        for i in [0, 500, 2000] {
            assert!((r.get(i, &[7]) + g.t(i)).abs() < 1e-12);
        }
        let zero = Field::zeros(g.clone());
        assert_eq!(convolve_measure_function(&ou, &zero, TimeRule::Trapezoid).unwrap().max_abs(), 0.0);
        let e = Field::from_fn(g.clone(), |_, x| (-x[0].abs()).exp()).unwrap();
        let r = convolve_measure_function(&DriftMeasure::ou(2.0, 1).unwrap(), &e, TimeRule::Trapezoid).unwrap();
        let want = Field::from_fn(g.clone(), |t, x| -2.0 * t * (-x[0].abs()).exp()).unwrap();
        assert!(r.zip(&want, |a, b| a - b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn joint_convolution_matches_quadrature() {
        // (mu * h)(t, x) for mu = -dt Cauchy(x) dx and h(t, x) = e^{-t} e^{-x^2}
        let dt = 0.01;
        let g = make_grid(1, Axis::new(0.0, dt, 101), &[Axis::symmetric(100, 0.05)]).unwrap();
        let h = Field::from_fn(g.clone(), |t, x| (-t - x[0] * x[0]).exp()).unwrap();
        let r = convolve_measure_function(&DriftMeasure::cauchy_spatial(1.0), &h, TimeRule::Trapezoid).unwrap();
        let t = 1.0;
        let x = 0.5;
        let inner = quad::integrate_real_line(|y| (-(x - y) * (x - y)).exp() / (PI * (1.0 + y * y)), 1e-14, 1e-12).value;
        // the lattice only reaches |x - y| <= 5, where exp(-(x-y)^2) is negligible
        let want = -(1.0 - (-t as f64).exp()) * inner;
        let got = r.get(100, &[110]);
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn gridded_tv_and_tilt() {
        let g = temporal_grid(0.1, 31);
        let m = rasterize(&DriftMeasure::ou(1.0, 1).unwrap(), &g).unwrap();
        assert!((m.total_variation(TimeRule::Trapezoid) - 3.0).abs() < 1e-12);
        let t = m.tilt(1.0);
        assert!((t.column[10] + (-1.0f64).exp()).abs() < 1e-15);
    }
}
