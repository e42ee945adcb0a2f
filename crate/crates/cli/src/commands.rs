use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use vou::diagnostics::{
    cadlag_probe, existence_report, holder_probe, memory_classify, regvar_limit, stationarity_report, CadlagMode, MemoryClass, Regularity, Verdict,
};
use vou::drift::TimeRule;
use vou::grid::{fmt17, make_grid, Axis, Field, SpaceTimeGrid};
use vou::moments::{self, covariance_many, CovarianceModel};
use vou::resolvent::{closed_form_resolvent, neumann_resolvent, verify_resolvent_identity, ResolventKind};
use vou::simulator::{Mode, Simulator};
use vou::validation::{run_criterion, CRITERIA};

use crate::config::{hash_bytes, RunConfig};
use crate::report::{write_sidecar, Report};
use crate::{CliError, ModelKind, Stat, What};

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: e }
}

fn write_vgf(path: &Path, field: &Field, meta: &Report) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(io(path))?;
    let mut w = BufWriter::new(f);
    field.write_vgf1(&mut w)?;
    w.flush().map_err(io(path))?;
    write_sidecar(path, meta)
}

fn describe_grid(r: &mut Report, g: &SpaceTimeGrid) {
    r.num("grid.dt", g.time().step);
    r.int("grid.nt", g.time().count);
    for (a, ax) in g.space().iter().enumerate() {
        r.num(&format!("grid.x{}.origin", a + 1), ax.origin);
        r.num(&format!("grid.x{}.step", a + 1), ax.step);
        r.int(&format!("grid.x{}.count", a + 1), ax.count);
    }
}

/// Running sums for one statistic over replicates.
struct Accumulator {
    stat: Stat,
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    ab: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl Accumulator {
    fn new(stat: Stat, grid: &SpaceTimeGrid, lag: (usize, isize)) -> Result<(Self, SpaceTimeGrid), CliError> {
        let (out, pairs) = match stat {
            Stat::Mean | Stat::Var => (grid.clone(), (0..grid.len()).map(|i| (i, i)).collect()),
            Stat::Acov => {
                let (lt, lx) = lag;
                let t = grid.time();
                let x0 = grid.space()[0];
                let shift = lx.unsigned_abs();
                if lt >= t.count || shift >= x0.count {
                    return Err(CliError::Arg(format!("lag ({lt}, {lx}) exceeds the grid")));
                }
                let j0 = if lx < 0 { shift } else { 0 };
                let mut space = grid.space().to_vec();
                space[0] = Axis::new(x0.coord(j0), x0.step, x0.count - shift);
                let out = SpaceTimeGrid::new(Axis::new(t.origin, t.step, t.count - lt), &space)?;
                let mut pairs = Vec::with_capacity(out.len());
                let s = out.spatial_len();
                for f in 0..out.len() {
                    let (i, mut j) = (f / s, out.spatial_multi(f % s));
                    j[0] += j0;
                    let p = grid.index(i, &j[..grid.dim()]);
                    j[0] = (j[0] as isize + lx) as usize;
                    pairs.push((p, grid.index(i + lt, &j[..grid.dim()])));
                }
                (out, pairs)
            }
        };
        let m = pairs.len();
        Ok((Self { stat, n: 0, a: vec![0.0; m], b: vec![0.0; m], ab: vec![0.0; m], pairs }, out))
    }

    fn add(&mut self, v: &[f64]) {
        self.n += 1;
        for (k, &(p, q)) in self.pairs.iter().enumerate() {
            self.a[k] += v[p];
            self.b[k] += v[q];
            self.ab[k] += v[p] * v[q];
        }
    }

    fn finish(&self) -> Result<Vec<f64>, CliError> {
        let n = self.n as f64;
        match self.stat {
            Stat::Mean => Ok(self.a.iter().map(|s| s / n).collect()),
            _ if self.n < 2 => Err(CliError::Arg("at least 2 replicates are needed for var and acov".into())),
            _ => Ok((0..self.a.len()).map(|k| (self.ab[k] - self.a[k] * self.b[k] / n) / (n - 1.0)).collect()),
        }
    }
}

pub fn simulate(
    config: &Path,
    out_dir: &Path,
    replicates: Option<usize>,
    seed: Option<u64>,
    stats: Option<Stat>,
    lag: (usize, isize),
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut plan = cfg.plan()?;
    if let Some(r) = replicates {
        plan.replicates = r;
    }
    if plan.replicates == 0 {
        return Err(CliError::Arg("--replicates must be positive".into()));
    }
    let sim = Simulator::new(plan.clone())?;
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let header = |what: &str| {
        let mut r = Report::new("simulate", &cfg.hash, Some(cfg.seed));
        r.str("artifact", what);
        r.int("replicates", plan.replicates);
        r.str("mode", match plan.mode {
            Mode::Causal { .. } => "causal",
            Mode::Stationary { .. } => "stationary",
        });
        r.num("burn_in", sim.window.burn_in);
        r.str("kernel", &format!("{:?}", plan.kernel));
        r
    };

    let chunk = 16;
    let mut summary = header("run");
    match stats {
        None => {
            for start in (0..plan.replicates).step_by(chunk) {
                let end = (start + chunk).min(plan.replicates);
                let fields: Vec<Field> = (start..end).into_par_iter().map(|r| sim.replicate(r)).collect::<Result<_, _>>()?;
                for (r, f) in (start..end).zip(&fields) {
                    let name = format!("replicate_{r:05}.vgf");
                    let mut meta = header("field");
                    meta.int("replicate", r);
                    describe_grid(&mut meta, f.grid());
                    write_vgf(&out_dir.join(&name), f, &meta)?;
                    summary.str("file", &name);
                }
            }
        }
        Some(stat) => {
            let (mut acc, out_grid) = Accumulator::new(stat, &plan.grid, lag)?;
            for start in (0..plan.replicates).step_by(chunk) {
                let end = (start + chunk).min(plan.replicates);
                let fields: Vec<Field> = (start..end).into_par_iter().map(|r| sim.replicate(r)).collect::<Result<_, _>>()?;
                fields.iter().for_each(|f| acc.add(f.values()));
            }
            let (name, label) = match stat {
                Stat::Mean => ("mean.vgf", "mean"),
                Stat::Var => ("var.vgf", "var"),
                Stat::Acov => ("acov.vgf", "acov"),
            };
            let field = Field::new(out_grid, acc.finish()?)?;
            let mut meta = header(label);
            if let Stat::Acov = stat {
                meta.int("lag_t", lag.0);
                meta.str("lag_x", &lag.1.to_string());
            }
            describe_grid(&mut meta, field.grid());
            write_vgf(&out_dir.join(name), &field, &meta)?;
            summary.str("file", name);
        }
    }
    summary.emit(Some(&out_dir.join("run.txt")))
}

fn parse_grid(spec: &str, dim: usize) -> Result<SpaceTimeGrid, CliError> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Arg(format!("--grid {spec:?}"))))
        .collect::<Result<_, _>>()?;
    let (t_max, dt, x_max, dx) = match v[..] {
        [t, d] => (t, d, 0.0, 1.0),
        [t, d, x, e] => (t, d, x, e),
        _ => return Err(CliError::Arg(format!("--grid {spec:?}: expected t_max,dt[,x_max,dx]"))),
    };
    if !(dt > 0.0 && t_max > 0.0 && dx > 0.0 && x_max >= 0.0) {
        return Err(CliError::Arg(format!("--grid {spec:?}: steps and extents must be positive")));
    }
    let space = if x_max > 0.0 { Axis::symmetric((x_max / dx).round() as usize, dx) } else { Axis::new(0.0, dx, 1) };
    Ok(make_grid(dim, Axis::new(0.0, dt, (t_max / dt).round() as usize + 1), &vec![space; dim])?)
}

pub fn resolvent(mu_cfg: &Path, grid: Option<&str>, tol: Option<f64>, out: Option<&Path>, check: bool) -> Result<(), CliError> {
    let cfg = RunConfig::load(mu_cfg)?;
    let grid = match grid {
        Some(s) => parse_grid(s, cfg.grid.dim)?,
        None => cfg.grid()?,
    };
    let mu = cfg.mu()?;
    let mut opts = cfg.neumann_options();
    if let Some(t) = tol {
        opts.tol = t;
    }
    let rho = match closed_form_resolvent(&mu) {
        Some(r) => r,
        None => neumann_resolvent(&mu, &grid, &opts)?,
    };
    let mut rep = Report::new("resolvent", &cfg.hash, None);
    rep.str("mu", &format!("{:?}", mu.family()));
    rep.str("kind", match &rho.kind {
        ResolventKind::Zero => "zero",
        ResolventKind::ClosedForm(_) => "closed_form",
        ResolventKind::Gridded { .. } => "gridded",
    });
    rep.num("tol", opts.tol);
    rep.num("tilt", rho.tilt);
    rep.int("terms", rho.terms);
    describe_grid(&mut rep, &grid);
    if let Some(p) = out {
        let m = rho.on_grid(&grid)?;
        rep.int("atoms", m.atoms.len());
        let mut meta = rep.clone();
        meta.str("artifact", "resolvent density");
        write_vgf(p, &m.to_field()?, &meta)?;
        rep.str("out", &p.display().to_string());
    }
    if check {
        rep.num("residual", verify_resolvent_identity(&mu, &rho, &grid, TimeRule::Trapezoid)?);
    }
    rep.emit(None)
}

#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    pub dim: usize,
    pub lambda: f64,
    pub lambda_p: f64,
    pub c: f64,
    pub m2: f64,
}

fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let p: Vec<&str> = s.split(':').collect();
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| CliError::Arg(format!("lag range {s:?}")));
    match p[..] {
        [a] => Ok(vec![num(a)?]),
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| CliError::Arg(format!("lag range {s:?}")))?;
            if n == 0 {
                return Err(CliError::Arg(format!("lag range {s:?} has no points")));
            }
            Ok((0..n).map(|k| if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect())
        }
        _ => Err(CliError::Arg(format!("lag range {s:?}: expected a or a:b:n"))),
    }
}

/// Lags from `tau_range,xi_range` (first spatial axis; the others at 0) or a file of rows.
fn parse_lags(spec: &str, dim: usize) -> Result<Vec<(f64, Vec<f64>)>, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(io(path))?;
        let mut out = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("tau") {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Arg(format!("{}:{}: {line:?}", spec, ln + 1))))
                .collect::<Result<_, _>>()?;
            if v.len() != dim + 1 {
                return Err(CliError::Arg(format!("{}:{}: expected {} columns", spec, ln + 1, dim + 1)));
            }
            out.push((v[0], v[1..].to_vec()));
        }
        return Ok(out);
    }
    let (t, x) = spec.split_once(',').unwrap_or((spec, "0"));
    let (ts, xs) = (parse_range(t)?, parse_range(x)?);
    Ok(ts.iter().flat_map(|&tau| xs.iter().map(move |&xi| (tau, (0..dim).map(|a| if a == 0 { xi } else { 0.0 }).collect::<Vec<f64>>()))).collect())
}

pub fn covariance(model: ModelKind, config: Option<&Path>, p: ModelParams, lags: &str, out: Option<&Path>) -> Result<(), CliError> {
    let (m, hash, seed) = match model {
        ModelKind::Generic => {
            let path = config.ok_or_else(|| CliError::Arg("--model generic needs --config".into()))?;
            let cfg = RunConfig::load(path)?;
            (CovarianceModel::generic(cfg.effective_kernel()?, cfg.grid.dim, &cfg.levy()?), cfg.hash.clone(), Some(cfg.seed))
        }
        ModelKind::Ex1 => {
            let m = CovarianceModel::Ex1Bessel { dim: p.dim, lambda: p.lambda, lambda_p: p.lambda_p, m2: Some(p.m2), b1: None };
            (m, hash_bytes(format!("{p:?} ex1").as_bytes()), None)
        }
        ModelKind::Ex2 => {
            if p.dim != 1 {
                return Err(CliError::Arg("--model ex2 is one-dimensional".into()));
            }
            let m = CovarianceModel::Ex2PiecewiseD1 { lambda: p.lambda, lambda_p: p.lambda_p, c: p.c, m2: Some(p.m2), b1: None };
            (m, hash_bytes(format!("{p:?} ex2").as_bytes()), None)
        }
    };
    let d = m.dim();
    let lags = parse_lags(lags, d)?;
    let var = moments::covariance(&m, 0.0, &vec![0.0; d])?;
    let cov = covariance_many(&m, &lags)?;

    let mut text = String::new();
    for l in Report::new("covariance", &hash, seed).as_str().lines() {
        text.push_str(&format!("# {l}\n"));
    }
    text.push_str("tau");
    (1..=d).for_each(|a| text.push_str(&format!(",xi{a}")));
    text.push_str(",cov,corr\n");
    for ((tau, xi), c) in lags.iter().zip(&cov) {
        text.push_str(&fmt17(*tau));
        xi.iter().for_each(|x| text.push_str(&format!(",{}", fmt17(*x))));
        text.push_str(&format!(",{},{}\n", fmt17(*c), fmt17(c / var)));
    }
    match out {
        Some(path) => fs::write(path, text).map_err(io(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Report text and whether every probed condition holds.
pub fn diagnose(what: What, config: &Path, out: Option<&Path>) -> Result<bool, CliError> {
    let cfg = RunConfig::load(config)?;
    let dg = &cfg.diagnostics;
    let mut rep = Report::new("diagnose", &cfg.hash, Some(cfg.seed));
    let d = cfg.grid.dim;
    let ok = match what {
        What::Existence => {
            let r = existence_report(&cfg.g()?, &cfg.mu()?, &cfg.levy()?, dg.alpha.unwrap_or(1.0), dg.beta.unwrap_or(2.0), cfg.weight()?)?;
            rep.block("existence", &r.render());
            r.overall() != Verdict::Fails
        }
        What::Stationarity => {
            let grid = cfg.grid()?;
            let rho = cfg.resolvent(&grid)?;
            let k = cfg.effective_kernel()?;
            let r = stationarity_report(&k, &cfg.levy()?, dg.alpha.unwrap_or(2.0), dg.beta.unwrap_or(2.0), d, Some(&rho))?;
            rep.block("stationarity", &r.render());
            r.overall() != Verdict::Fails
        }
        What::Memory => {
            let schedule = dg.schedule.clone().unwrap_or_else(|| vec![64.0, 128.0, 256.0, 512.0]);
            let r = memory_classify(&cfg.effective_kernel()?, &schedule, d)?;
            rep.str("memory.class", r.class.as_str());
            rep.num("memory.l1_ratio", r.l1_ratio);
            rep.num("memory.l2_ratio", r.l2_ratio);
            for (t, l1, l2) in &r.rows {
                rep.str("memory.row", &format!("{} {} {}", fmt17(*t), fmt17(*l1), fmt17(*l2)));
            }
            r.class != MemoryClass::Inconclusive
        }
        What::Regvar => {
            let alpha = dg.regvar_alpha.or(cfg.mu.as_ref().and_then(|m| m.alpha)).unwrap_or(0.3);
            let schedule = dg.schedule.clone().unwrap_or_else(|| (4..=10).map(|k| 2f64.powi(k)).collect());
            let s = regvar_limit(alpha, &schedule, dg.regvar_dt.unwrap_or(0.1))?;
            rep.num("regvar.alpha", alpha);
            rep.num("regvar.target", s.target);
            for (t, v) in &s.points {
                rep.str("regvar.point", &format!("{} {}", fmt17(*t), fmt17(*v)));
            }
            let dev = s.deviations();
            let tail = &dev[dev.len().saturating_sub(5)..];
            let mono = tail.windows(2).all(|w| w[1] <= w[0]);
            rep.str("regvar.tail_nonincreasing", &mono.to_string());
            mono
        }
        What::Holder => {
            let f = Simulator::new(cfg.plan()?)?.replicate(0)?;
            let est = holder_probe(&f)?;
            for e in &est {
                let p = format!("holder.axis{}", e.axis);
                rep.num(&format!("{p}.exponent"), e.exponent);
                rep.num(&format!("{p}.se"), e.se);
                rep.int(&format!("{p}.scales"), e.scales);
                rep.str(&format!("{p}.flag"), &format!("{:?}", e.flag).to_lowercase());
            }
            est.iter().all(|e| e.flag != Regularity::NonContinuous)
        }
        What::Cadlag => {
            let plan = cfg.plan()?;
            let sim = Simulator::new(plan.clone())?;
            let (inc, cat) = sim.increments_with_catalog(0);
            let field = sim.convolve(&inc)?;
            let mode = match dg.cadlag.as_deref().unwrap_or("t") {
                "t" => CadlagMode::TCadlag,
                "cone" => CadlagMode::ConeCadlag { c: cfg.g.as_ref().and_then(|g| g.c).unwrap_or(1.0) },
                other => return Err(CliError::Config { key: "diagnostics.cadlag".into(), msg: format!("unknown mode `{other}`") }),
            };
            let r = cadlag_probe(&field, Some(&cat), inc.grid(), &plan.kernel, mode, dg.radius.unwrap_or(3), dg.max_jumps.unwrap_or(10))?;
            rep.int("cadlag.jumps", r.jumps.len());
            rep.num("cadlag.max_anomaly", r.max_anomaly());
            for j in &r.jumps {
                let p = format!("cadlag.jump{}", j.index);
                rep.num(&format!("{p}.size"), j.size);
                rep.num(&format!("{p}.anomaly"), j.anomaly);
                rep.num(&format!("{p}.bound"), j.bound);
            }
            rep.str("cadlag.holds", &r.holds().to_string());
            r.holds()
        }
    };
    rep.str("conditions_hold", &ok.to_string());
    rep.emit(out)?;
    Ok(ok)
}

pub fn validate(config: Option<&Path>, criteria: Option<Vec<usize>>) -> Result<bool, CliError> {
    let hash = match config {
        Some(p) => RunConfig::load(p)?.hash,
        None => "none".into(),
    };
    let ids = criteria.unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|c| c.0 == **i)) {
        return Err(CliError::Arg(format!("no criterion {bad}")));
    }
    let mut rep = Report::new("validate", &hash, None);
    let mut all = true;
    for id in ids {
        let r = run_criterion(id);
        println!("{}", r.line());
        rep.str(&format!("criterion{id}.passed"), &r.passed.to_string());
        rep.str(&format!("criterion{id}.detail"), &r.detail);
        all &= r.passed;
    }
    rep.str("all_passed", &all.to_string());
    rep.emit(None)?;
    Ok(all)
}
