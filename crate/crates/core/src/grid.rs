//! Uniform space-time lattices and the [`Field`] container.
//!
//! A grid has one time axis and `d` spatial axes. Field values are stored
//! time-major: the flat index of node `(i, j1, .., jd)` is
//! `((i * n1 + j1) * n2 + j2) ...`.

use std::io::{self, Read, Write};

use thiserror::Error;

/// Default cap on the number of lattice values.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 31;

const VGF1_MAGIC: &[u8; 8] = b"VOUGRID1";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("axis {axis}: step must be positive and count at least 1 (step {step}, count {count})")]
    NonPositiveStep { axis: usize, step: f64, count: usize },
    #[error("spatial dimension {0} unsupported (expected 1, 2 or 3)")]
    DimensionUnsupported(usize),
    #[error("grid has {cells} values, above the memory cap {cap}")]
    MemoryCapExceeded { cells: usize, cap: usize },
    #[error("grids do not match")]
    GridMismatch,
    #[error("value count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("malformed VGF1 data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One uniform axis: nodes `origin + k * step` for `k < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, step: f64, count: usize) -> Self {
        Self { origin, step, count }
    }

    /// Axis with nodes `-k*step .. k*step`, which always contains 0.
    pub fn symmetric(half_count: usize, step: f64) -> Self {
        Self { origin: -(half_count as f64) * step, step, count: 2 * half_count + 1 }
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }

    /// Length covered by the cells of this axis, `count * step`.
    pub fn extent(&self) -> f64 {
        self.count as f64 * self.step
    }

    /// Index of the node at 0, if the lattice contains it.
    pub fn zero_index(&self) -> Option<usize> {
        let k = (-self.origin / self.step).round();
        if k < 0.0 || k >= self.count as f64 {
            return None;
        }
        if (self.origin + k * self.step).abs() > 1e-9 * self.step {
            return None;
        }
        Some(k as usize)
    }

    fn valid(&self) -> bool {
        self.step > 0.0 && self.step.is_finite() && self.origin.is_finite() && self.count >= 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeGrid {
    time: Axis,
    space: Vec<Axis>,
}

/// Builds a grid with `d` spatial axes, checking the default memory cap.
pub fn make_grid(d: usize, t: Axis, xs: &[Axis]) -> Result<SpaceTimeGrid, GridError> {
    if !(1..=3).contains(&d) {
        return Err(GridError::DimensionUnsupported(d));
    }
    if xs.len() != d {
        return Err(GridError::DimensionUnsupported(xs.len()));
    }
    SpaceTimeGrid::new(t, xs)
}

impl SpaceTimeGrid {
    pub fn new(time: Axis, space: &[Axis]) -> Result<Self, GridError> {
        Self::with_cap(time, space, DEFAULT_MEMORY_CAP)
    }

    pub fn with_cap(time: Axis, space: &[Axis], cap: usize) -> Result<Self, GridError> {
        if !(1..=3).contains(&space.len()) {
            return Err(GridError::DimensionUnsupported(space.len()));
        }
        for (axis, a) in std::iter::once(&time).chain(space.iter()).enumerate() {
            if !a.valid() {
                return Err(GridError::NonPositiveStep { axis, step: a.step, count: a.count });
            }
        }
        let mut cells: usize = time.count;
        for a in space {
            cells = cells
                .checked_mul(a.count)
                .ok_or(GridError::MemoryCapExceeded { cells: usize::MAX, cap })?;
        }
        if cells > cap {
            return Err(GridError::MemoryCapExceeded { cells, cap });
        }
        Ok(Self { time, space: space.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn time(&self) -> &Axis {
        &self.time
    }

    pub fn space(&self) -> &[Axis] {
        &self.space
    }

    /// Number of nodes in one time slab.
    pub fn spatial_len(&self) -> usize {
        self.space.iter().map(|a| a.count).product()
    }

    pub fn len(&self) -> usize {
        self.time.count * self.spatial_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spatial_cell_volume(&self) -> f64 {
        self.space.iter().map(|a| a.step).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.time.step * self.spatial_cell_volume()
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.time.coord(i)
    }

    /// Flat spatial index of a multi-index.
    pub fn spatial_index(&self, j: &[usize]) -> usize {
        j.iter().zip(&self.space).fold(0, |acc, (&k, a)| acc * a.count + k)
    }

    /// Multi-index of a flat spatial index (unused trailing entries are 0).
    pub fn spatial_multi(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (k, a) in self.space.iter().enumerate().rev() {
            out[k] = flat % a.count;
            flat /= a.count;
        }
        out
    }

    /// Spatial coordinates of a flat spatial index, written into `x`.
    pub fn x_into(&self, flat: usize, x: &mut [f64]) {
        let m = self.spatial_multi(flat);
        for (k, a) in self.space.iter().enumerate() {
            x[k] = a.coord(m[k]);
        }
    }

    pub fn index(&self, i: usize, j: &[usize]) -> usize {
        i * self.spatial_len() + self.spatial_index(j)
    }

    /// Index of the spatial node at the origin, if every axis contains 0.
    pub fn spatial_zero(&self) -> Option<usize> {
        let mut j = [0usize; 3];
        for (k, a) in self.space.iter().enumerate() {
            j[k] = a.zero_index()?;
        }
        Some(self.spatial_index(&j[..self.dim()]))
    }

    /// Key of node `flat` from its absolute lattice coordinates `round(coord / step)`,
    /// so overlapping windows with equal steps agree on shared nodes.
    pub fn lattice_key(&self, flat: usize) -> u64 {
        let s = self.spatial_len();
        let (i, j) = (flat / s, flat % s);
        let m = self.spatial_multi(j);
        let mut h: u64 = 0x243f_6a88_85a3_08d3;
        let mut push = |c: f64, step: f64| {
            let k = (c / step).round() as i64 as u64;
            h = (h ^ k).wrapping_mul(0x1000_0000_01b3).rotate_left(29).wrapping_add(0x9e37_79b9_7f4a_7c15);
        };
        push(self.t(i), self.time.step);
        for (k, a) in self.space.iter().enumerate() {
            push(a.coord(m[k]), a.step);
        }
        h
    }

    /// Same lattice with a different time axis.
    pub fn with_time(&self, time: Axis) -> Result<Self, GridError> {
        Self::new(time, &self.space)
    }

    pub fn check_same(&self, other: &Self) -> Result<(), GridError> {
        if self == other {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

/// Values on every node of a grid; always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    /// Samples `f(t, x)` at every node.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, &[f64]) -> f64) -> Result<Self, GridError> {
        let ns = grid.spatial_len();
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        let mut x = [0.0; 3];
        for i in 0..grid.time().count {
            let t = grid.t(i);
            for j in 0..ns {
                grid.x_into(j, &mut x);
                values.push(f(t, &x[..d]));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: &[usize]) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Row of values at time index `i`.
    pub fn slab(&self, i: usize) -> &[f64] {
        let ns = self.grid.spatial_len();
        &self.values[i * ns..(i + 1) * ns]
    }

    /// Multilinear interpolation; zero outside the grid's bounding box.
    pub fn interpolate(&self, t: f64, x: &[f64]) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        // per axis: lower node and weight of the upper node
        let mut lo = [0usize; 4];
        let mut w = [0.0f64; 4];
        let mut hi_ok = [false; 4];
        let axes = std::iter::once(&g.time).chain(g.space.iter());
        for (k, (a, &c)) in axes.zip(std::iter::once(&t).chain(x.iter())).enumerate() {
            let u = (c - a.origin) / a.step;
            let last = (a.count - 1) as f64;
            if u < -1e-9 || u > last + 1e-9 {
                return 0.0;
            }
            let u = u.clamp(0.0, last);
            let f = u.floor().min((a.count.max(2) - 2) as f64).max(0.0);
            lo[k] = f as usize;
            w[k] = if a.count == 1 { 0.0 } else { u - f };
            hi_ok[k] = a.count > 1;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << (d + 1)) {
            let mut weight = 1.0;
            let mut idx = [0usize; 4];
            for k in 0..=d {
                let up = corner >> k & 1 == 1;
                if up && !hi_ok[k] {
                    weight = 0.0;
                    break;
                }
                weight *= if up { w[k] } else { 1.0 - w[k] };
                idx[k] = lo[k] + up as usize;
            }
            if weight != 0.0 {
                acc += weight * self.values[g.index(idx[0], &idx[1..=d])];
            }
        }
        acc
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| op(v)).collect())
    }

    pub fn zip(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self, GridError> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the VGF1 binary layout.
    pub fn write_vgf1<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        w.write_all(VGF1_MAGIC)?;
        let axes: Vec<&Axis> = std::iter::once(&self.grid.time).chain(&self.grid.space).collect();
        w.write_all(&(axes.len() as u32).to_le_bytes())?;
        for a in axes {
            let count = u32::try_from(a.count).map_err(|_| GridError::Format("axis too long".into()))?;
            w.write_all(&count.to_le_bytes())?;
            w.write_all(&a.origin.to_le_bytes())?;
            w.write_all(&a.step.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_vgf1<R: Read>(mut r: R) -> Result<Self, GridError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != VGF1_MAGIC {
            return Err(GridError::Format("bad magic".into()));
        }
        let n = read_u32(&mut r)? as usize;
        if !(2..=4).contains(&n) {
            return Err(GridError::Format(format!("{n} axes")));
        }
        let mut axes = Vec::with_capacity(n);
        for _ in 0..n {
            let count = read_u32(&mut r)? as usize;
            let origin = read_f64(&mut r)?;
            let step = read_f64(&mut r)?;
            axes.push(Axis::new(origin, step, count));
        }
        let grid = SpaceTimeGrid::new(axes[0], &axes[1..])?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(grid, values)
    }

    /// One row per node: `t, x1..xd, value`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        let d = self.grid.dim();
        let mut header = String::from("t");
        for k in 1..=d {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(w, "{header},value")?;
        let ns = self.grid.spatial_len();
        let mut x = [0.0; 3];
        for i in 0..self.grid.time.count {
            let t = self.grid.t(i);
            for j in 0..ns {
                self.grid.x_into(j, &mut x);
                let mut line = fmt17(t);
                for xk in &x[..d] {
                    line.push(',');
                    line.push_str(&fmt17(*xk));
                }
                line.push(',');
                line.push_str(&fmt17(self.values[i * ns + j]));
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Formats with 17 significant digits, which round-trips any f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, GridError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, GridError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex_grid() -> SpaceTimeGrid {
        make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::new(-1.0, 0.5, 5)]).unwrap()
    }

    #[test]
    fn cell_count_and_volume() {
        let g = ex_grid();
        assert_eq!(g.len(), 55);
        assert!((g.cell_volume() - 0.05).abs() < 1e-15);
        let g2 = make_grid(2, Axis::new(0.0, 0.1, 10), &[Axis::new(-2.0, 0.1, 41); 2]).unwrap();
        assert_eq!(g2.len(), 16810);
    }

    #[test]
    fn rejects_bad_specs() {
        let e = make_grid(1, Axis::new(0.0, 0.0, 11), &[Axis::new(-1.0, 0.5, 5)]);
        assert!(matches!(e, Err(GridError::NonPositiveStep { axis: 0, .. })));
        let e = make_grid(4, Axis::new(0.0, 0.1, 2), &[Axis::new(0.0, 1.0, 2); 4]);
        assert!(matches!(e, Err(GridError::DimensionUnsupported(4))));
        let e = SpaceTimeGrid::with_cap(Axis::new(0.0, 0.1, 100), &[Axis::new(0.0, 0.1, 100)], 9999);
        assert!(matches!(e, Err(GridError::MemoryCapExceeded { cells: 10000, cap: 9999 })));
    }

    #[test]
    fn coordinates_are_origin_plus_index_times_step() {
        let g = ex_grid();
        let mut x = [0.0; 3];
        g.x_into(3, &mut x);
        assert_eq!(x[0], -1.0 + 3.0 * 0.5);
        assert_eq!(g.t(7), 7.0 * 0.1);
        assert_eq!(g.space()[0].zero_index(), Some(2));
    }

    #[test]
    fn map_zip_and_mismatch() {
        let g = ex_grid();
        let f = Field::from_fn(g.clone(), |t, x| t + x[0]).unwrap();
        let z = f.zip(&f, |a, b| a - b).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let back = f.map(|v| 2.0 * v).unwrap().map(|v| 0.5 * v).unwrap();
        assert_eq!(back, f);
        let other = Field::zeros(make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::new(-1.0, 0.5, 6)]).unwrap());
        assert!(matches!(f.zip(&other, |a, _| a), Err(GridError::GridMismatch)));
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = ex_grid();
        let mut v = vec![0.0; 55];
        v[9] = f64::NAN;
        assert!(matches!(Field::new(g, v), Err(GridError::NonFinite { index: 9, .. })));
    }

    #[test]
    fn vgf1_layout() {
        let g = make_grid(1, Axis::new(0.0, 0.5, 2), &[Axis::new(-1.0, 1.0, 3)]).unwrap();
        let f = Field::new(g, (0..6).map(f64::from).collect()).unwrap();
        let mut buf = Vec::new();
        f.write_vgf1(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"VOUGRID1");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 8 + 4 + 2 * 20 + 6 * 8);
        let last = f64::from_le_bytes(buf[buf.len() - 8..].try_into().unwrap());
        assert_eq!(last, 5.0);
        assert_eq!(Field::read_vgf1(&buf[..]).unwrap(), f);
        assert!(Field::read_vgf1(&buf[..20]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let f = Field::from_fn(ex_grid(), |t, _| t).unwrap();
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,x1,value");
        assert_eq!(lines.len(), 56);
        let v: f64 = lines[56 - 1].split(',').last().unwrap().parse().unwrap();
        assert_eq!(v, f.values()[54]);
    }
}
