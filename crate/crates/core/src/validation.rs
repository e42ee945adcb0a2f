//! The acceptance suite, shared by the `acceptance` test target and `vou validate`.

use std::f64::consts::E;
use std::time::Instant;

use rayon::prelude::*;

use crate::diagnostics::{cadlag_probe, lrd_spatial_l2, memory_classify, regvar_example_kernel, regvar_limit, CadlagMode, MemoryClass};
use crate::drift::{DriftMeasure, GriddedMeasure, TimeRule};
use crate::grid::{make_grid, Axis, Field, SpaceTimeGrid};
use crate::kernels::{effective_kernel_with, EffectiveKernel, Kernel};
use crate::levy::{char_function, JumpLaw, LevyBasisSpec, LevyMeasureModel};
use crate::moments::{corr_estimate, covariance, cumulant_triplet, mean_estimate, mean_value, CovarianceModel, TestMeasure};
use crate::resolvent::{closed_form_resolvent, neumann_resolvent, verify_resolvent_identity, ClosedForm, NeumannOptions};
use crate::rng::CounterRng;
use crate::simulator::{cf_distance, increments_from_jumps, vou_residual, Method, Mode, SimulationPlan, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {}  ({:.1} s)  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "resolvent cross-oracle"),
    (2, "resolvent identity order"),
    (3, "effective kernel"),
    (4, "stationary mean"),
    (5, "autocorrelation"),
    (6, "distribution"),
    (7, "long memory"),
    (8, "plancherel constant"),
    (9, "discrete vou residual"),
    (10, "property suites"),
];

type Outcome = Result<(bool, String), String>;

pub fn run_criterion(id: usize) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let out: Outcome = match id {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(),
        8 => c8(),
        9 => c9(),
        10 => c10(),
        _ => Err(format!("no criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, passed, detail, seconds }
}

pub fn run_all(ids: &[usize]) -> Vec<CriterionResult> {
    ids.iter().map(|&i| run_criterion(i)).collect()
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn tgrid(dt: f64, t: f64) -> SpaceTimeGrid {
    make_grid(1, Axis::new(0.0, dt, (t / dt).round() as usize + 1), &[Axis::new(0.0, 1.0, 1)]).expect("valid grid")
}

fn sgrid(d: f64, t: f64, x: f64) -> SpaceTimeGrid {
    make_grid(1, Axis::new(0.0, d, (t / d).round() as usize + 1), &[Axis::symmetric((x / d).round() as usize, d)]).expect("valid grid")
}

fn c1() -> Outcome {
    let g = tgrid(0.005, 5.0);
    let t0 = Instant::now();
    let r = neumann_resolvent(&DriftMeasure::ou(1.0, 1).map_err(e)?, &g, &NeumannOptions::default()).map_err(e)?;
    let m = r.on_grid(&g).map_err(e)?;
    let ou_err = (0..g.time().count).map(|i| ((m.column[i] - (-g.t(i)).exp()) / (-g.t(i)).exp()).abs()).fold(0.0, f64::max);
    let ou_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let lambda = -1.0;
    let hg = sgrid(0.01, 2.0, 4.0);
    let heat = DriftMeasure::heat(lambda, 1).map_err(e)?;
    let r = neumann_resolvent(&heat, &hg, &NeumannOptions::default()).map_err(e)?;
    let m = r.on_grid(&hg).map_err(e)?.to_field().map_err(e)?;
    let exact = ClosedForm::Heat { lambda, dim: 1 };
    let (mut num, mut den) = (0.0, 0.0);
    let mut x = [0.0];
    let s = hg.spatial_len();
    for i in 0..hg.time().count {
        let t = hg.t(i);
        if t < 0.05 - 1e-12 {
            continue;
        }
        for j in 0..s {
            hg.x_into(j, &mut x);
            let want = exact.density(t, &x);
            num += (m.values()[i * s + j] - want).abs();
            den += want.abs();
        }
    }
    let heat_err = num / den;
    let heat_s = t1.elapsed().as_secs_f64();
    let ok = ou_err <= 1e-2 && heat_err <= 2e-2 && ou_s <= 60.0 && heat_s <= 60.0;
    Ok((ok, format!("ou sup rel {ou_err:.2e} ({ou_s:.1} s); heat rel L1 on [0.05,2] {heat_err:.2e} ({heat_s:.1} s)")))
}

fn c2() -> Outcome {
    let cases: Vec<(&str, DriftMeasure, Box<dyn Fn(f64) -> SpaceTimeGrid>)> = vec![
        ("ou", DriftMeasure::ou(1.0, 1).map_err(e)?, Box::new(|d| tgrid(d, 2.0))),
        ("exp-spatial", DriftMeasure::exp_spatial(1.0), Box::new(|d| sgrid(d, 1.0, 2.0))),
        ("heat", DriftMeasure::heat(1.0, 1).map_err(e)?, Box::new(|d| sgrid(d, 1.0, 3.0))),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, mu, grid) in cases {
        let rho = closed_form_resolvent(&mu).ok_or("no closed form")?;
        let coarse = verify_resolvent_identity(&mu, &rho, &grid(0.04), TimeRule::Trapezoid).map_err(e)?;
        let fine = verify_resolvent_identity(&mu, &rho, &grid(0.02), TimeRule::Trapezoid).map_err(e)?;
        let f = coarse / fine;
        ok &= f >= 1.8;
        parts.push(format!("{name} {coarse:.2e}->{fine:.2e} (x{f:.2})"));
    }
    Ok((ok, parts.join("; ")))
}

fn c3() -> Outcome {
    let g = sgrid(0.01, 2.0, 2.0);
    let mu = DriftMeasure::ou(1.0, 1).map_err(e)?;
    let rho = neumann_resolvent(&mu, &g, &NeumannOptions::default()).map_err(e)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, kern, exact) in [
        ("exp-spatial", Kernel::exp_spatial(1.0).map_err(e)?, EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }),
        ("cone", Kernel::cone(1.0, 1.0).map_err(e)?, EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 }),
    ] {
        let k = effective_kernel_with(&kern, &rho, &g, TimeRule::Trapezoid).map_err(e)?;
        let EffectiveKernel::Gridded(f) = &k else { return Err(format!("{name}: expected a gridded kernel, got {k:?}")) };
        let want = exact.tabulate(&g).map_err(e)?;
        let err = f.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ok &= err <= 1e-2;
        parts.push(format!("{name} sup {err:.2e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn mc_points(sim: &Simulator, reps: usize, nodes: &[(usize, [usize; 3])]) -> Vec<Vec<f64>> {
    (0..reps).into_par_iter().map(|r| sim.points(r, nodes)).collect()
}

fn ex1_point_grid() -> SpaceTimeGrid {
    make_grid(1, Axis::new(0.0, 0.05, 21), &[Axis::symmetric(20, 0.05)]).expect("valid grid")
}

fn c4() -> Outcome {
    let k = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
    let levy = LevyBasisSpec::new(1.0, 1.0, LevyMeasureModel::Zero).map_err(e)?;
    let plan = SimulationPlan::new(ex1_point_grid(), levy, k.clone(), Mode::Stationary { burn_in: None, pad: None }, 4, 10_000);
    let sim = Simulator::new(plan).map_err(e)?;
    let xs: Vec<f64> = mc_points(&sim, 10_000, &[(0, [20, 0, 0])]).into_iter().map(|v| v[0]).collect();
    let m = mean_estimate(&xs).map_err(e)?;
    let z = (m.value - 2.0) / m.se;
    let model = CovarianceModel::Ex1Bessel { dim: 1, lambda: 1.0, lambda_p: 1.0, m2: Some(1.0), b1: Some(1.0) };
    let stat = mean_value(&model, None).map_err(e)?;

    // deterministic basis: quadrature and the simulated causal field against 2 (1 - e^{-T})
    let gen = CovarianceModel::Generic { kernel: k.clone(), dim: 1, m2: None, b1: Some(1.0) };
    let det = LevyBasisSpec::new(1.0, 0.0, LevyMeasureModel::Zero).map_err(e)?;
    let g = make_grid(1, Axis::new(0.0, 0.05, 61), &[Axis::new(0.0, 0.05, 1)]).map_err(e)?;
    let sim = Simulator::new(SimulationPlan::new(g.clone(), det, k, Mode::Causal { pad: Some(14.0) }, 1, 1)).map_err(e)?;
    let f = sim.replicate(0).map_err(e)?;
    let (mut q_err, mut s_err) = (0.0f64, 0.0f64);
    for i in [10, 20, 40, 60] {
        let t = g.t(i);
        let want = 2.0 * (1.0 - (-t).exp());
        q_err = q_err.max((mean_value(&gen, Some(t)).map_err(e)? - want).abs());
        s_err = s_err.max((f.values()[i] - want).abs());
    }
    let ok = z.abs() <= 3.0 && (stat - 2.0).abs() < 1e-12 && q_err <= 1e-8 && s_err <= 2e-3;
    Ok((ok, format!("MC mean {:.4} +- {:.4} (z = {z:.2}); deterministic: quadrature err {q_err:.1e}, simulated err {s_err:.1e}", m.value, m.se)))
}

fn c5() -> Outcome {
    let k = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
    let plan = SimulationPlan::new(ex1_point_grid(), LevyBasisSpec::gaussian(1.0), k, Mode::Stationary { burn_in: None, pad: None }, 5, 10_000);
    let sim = Simulator::new(plan).map_err(e)?;
    let pts = mc_points(&sim, 10_000, &[(0, [20, 0, 0]), (20, [20, 0, 0]), (0, [40, 0, 0])]);
    let col = |k: usize| pts.iter().map(|v| v[k]).collect::<Vec<f64>>();
    let (a, b, c) = (col(0), col(1), col(2));
    let ct = corr_estimate(&a, &b).map_err(e)?;
    let cx = corr_estimate(&a, &c).map_err(e)?;
    let zt = (ct.value - (-1.0f64).exp()) / ct.se;
    let zx = (cx.value - 2.0 / E) / cx.se;

    let closed = CovarianceModel::Ex1Bessel { dim: 1, lambda: 1.0, lambda_p: 1.0, m2: Some(1.0), b1: None };
    let gen = CovarianceModel::Generic { kernel: closed.kernel(), dim: 1, m2: Some(1.0), b1: None };
    let mut rng = CounterRng::new(55);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let tau = 3.0 * rng.open01();
        let xi = 6.0 * rng.open01() - 3.0;
        let a = covariance(&closed, tau, &[xi]).map_err(e)?;
        let b = covariance(&gen, tau, &[xi]).map_err(e)?;
        worst = worst.max((a - b).abs() / a.abs());
    }
    let ok = zt.abs() <= 3.0 && zx.abs() <= 3.0 && worst <= 1e-3;
    Ok((
        ok,
        format!(
            "Corr(1,0) {:.4} +- {:.4} (z = {zt:.2}); Corr(0,1) {:.4} +- {:.4} (z = {zx:.2}); quadrature vs Bessel max rel {worst:.1e}",
            ct.value, ct.se, cx.value, cx.se
        ),
    ))
}

fn c6() -> Outcome {
    let g = make_grid(1, Axis::new(0.0, 0.1, 21), &[Axis::symmetric(60, 0.1)]).map_err(e)?;
    let k = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
    let u: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
    let bases = [
        ("gaussian", LevyBasisSpec::new(0.5, 1.0, LevyMeasureModel::Zero).map_err(e)?),
        (
            "compound poisson",
            LevyBasisSpec::new(0.2, 0.0, LevyMeasureModel::CompoundPoisson { rate: 2.0, law: JumpLaw::Normal { mean: 0.5, sd: 1.0 } })
                .map_err(e)?,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, levy) in bases {
        let plan = SimulationPlan::new(g.clone(), levy, k.clone(), Mode::Causal { pad: Some(0.0) }, 6, 100_000);
        let sim = Simulator::new(plan).map_err(e)?;
        let xs: Vec<f64> = mc_points(&sim, 100_000, &[(20, [60, 0, 0])]).into_iter().map(|v| v[0]).collect();
        let tri = cumulant_triplet(&TestMeasure::point(2.0, &[0.0]), &k, &levy, &sim.window.cells).map_err(e)?;
        let dist = cf_distance(&xs, |v| char_function(&tri, v), &u);
        ok &= dist <= 0.02;
        parts.push(format!("{name} sup |cf diff| {dist:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn c7() -> Outcome {
    let sched: Vec<f64> = (4..=10).map(|k| 2f64.powi(k)).collect();
    let seq = regvar_limit(0.3, &sched, 0.1).map_err(e)?;
    let dev = seq.deviations();
    let tail = &dev[dev.len() - 5..];
    let mono = tail.windows(2).all(|w| w[1] <= w[0]);
    let rel = dev[dev.len() - 1] / seq.target;
    let ex1 = EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 };
    let long = regvar_example_kernel(0.3, 2048.0, 0.1).map_err(e)?;
    let mut labels = Vec::new();
    for s in [[64.0, 128.0, 256.0, 512.0], [128.0, 256.0, 512.0, 1024.0]] {
        labels.push((memory_classify(&ex1, &s, 1).map_err(e)?.class, memory_classify(&long, &s, 1).map_err(e)?.class));
    }
    let labels_ok = labels.iter().all(|l| *l == (MemoryClass::Short, MemoryClass::Long));
    let ok = mono && rel <= 0.15 && labels_ok;
    Ok((
        ok,
        format!(
            "regvar final {:.5} vs {:.5} (rel dev {rel:.3}, tail monotone {mono}); labels {}",
            seq.points.last().map_or(f64::NAN, |p| p.1),
            seq.target,
            labels.iter().map(|(a, b)| format!("{}/{}", a.as_str(), b.as_str())).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn c8() -> Outcome {
    let r = lrd_spatial_l2(0.01, 0.01, None, 20.0);
    let err = (r.value - r.target).abs();
    Ok((err <= 1e-3, format!("integral {:.6} vs {:.6} (err {err:.1e}, truncation {:.1e})", r.value, r.target, r.truncation_bound)))
}

fn fixed_jumps() -> Vec<(f64, [f64; 3], f64)> {
    let mut rng = CounterRng::new(909);
    (0..15).map(|_| (1.5 * rng.open01(), [3.0 * rng.open01() - 1.5, 0.0, 0.0], 2.0 * rng.open01() - 1.0)).collect()
}

fn c9() -> Outcome {
    let jumps = fixed_jumps();
    let mu = DriftMeasure::ou(1.0, 1).map_err(e)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, kern, k) in [
        ("ex1", Kernel::exp_spatial(1.0).map_err(e)?, EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }),
        ("ex2", Kernel::cone(1.0, 1.0).map_err(e)?, EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 }),
    ] {
        let mut res = Vec::new();
        for d in [0.01, 0.005] {
            let g = sgrid(d, 2.0, 2.0);
            let sim = Simulator::new(SimulationPlan::new(g, LevyBasisSpec::gaussian(0.0), k.clone(), Mode::Causal { pad: Some(0.0) }, 0, 1)).map_err(e)?;
            let lam = increments_from_jumps(&sim.window.cells, &jumps);
            let x = sim.convolve(&lam).map_err(e)?;
            res.push(vou_residual(&x, &mu, &kern, &lam).map_err(e)?);
        }
        let f = res[0] / res[1];
        ok &= f >= 1.8;
        parts.push(format!("{name} {:.2e}->{:.2e} (x{f:.2})", res[0], res[1]));
    }
    Ok((ok, parts.join("; ")))
}

fn c10() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    // cone causality: cells outside the past cone of p cannot change X(p)
    let k2 = EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 };
    let g = make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::symmetric(15, 0.1)]).map_err(e)?;
    let plan = SimulationPlan { method: Method::Direct, ..SimulationPlan::new(g.clone(), LevyBasisSpec::gaussian(1.0), k2.clone(), Mode::Causal { pad: Some(1.0) }, 10, 1) };
    let sim = Simulator::new(plan).map_err(e)?;
    let lam = sim.increments(0);
    let base = sim.convolve(&lam).map_err(e)?;
    let (pn, pj) = (10usize, 15usize);
    let cells = lam.grid().clone();
    let (nl, pad) = ((sim.window.time_offset + pn) as isize, sim.window.pad[0] as isize);
    let mut outside = lam.values().to_vec();
    let mut inside = lam.values().to_vec();
    let mut touched_inside = false;
    for (c, (o, i)) in outside.iter_mut().zip(inside.iter_mut()).enumerate() {
        // lattice units (dt = dx, c = 1): time lag in (l - 1, l], spatial lag in [e - 1, e]
        let l = nl - (c / cells.spatial_len()) as isize;
        let e = pj as isize - (c % cells.spatial_len()) as isize + pad;
        let nearest = if e >= 1 { e - 1 } else { -e };
        if l <= 0 || nearest > l {
            *o += 1.0;
        } else if !touched_inside && nearest < l - 1 {
            *i += 1.0;
            touched_inside = true;
        }
    }
    let xo = sim.convolve(&Field::new(cells.clone(), outside).map_err(e)?).map_err(e)?;
    let xi = sim.convolve(&Field::new(cells.clone(), inside).map_err(e)?).map_err(e)?;
    let causal = xo.get(pn, &[pj]).to_bits() == base.get(pn, &[pj]).to_bits() && xi.get(pn, &[pj]) != base.get(pn, &[pj]);
    ok &= causal;
    parts.push(format!("cone causality {}", if causal { "bit-exact" } else { "violated" }));

    // seed determinism
    let mk = |seed| SimulationPlan::new(g.clone(), LevyBasisSpec::gaussian(1.0), k2.clone(), Mode::Causal { pad: Some(1.0) }, seed, 1);
    let a = Simulator::new(mk(3)).map_err(e)?.replicate(0).map_err(e)?;
    let b = Simulator::new(mk(3)).map_err(e)?.replicate(0).map_err(e)?;
    let c = Simulator::new(mk(4)).map_err(e)?.replicate(0).map_err(e)?;
    let det = a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()) && a.values() != c.values();
    ok &= det;
    parts.push(format!("seed determinism {det}"));

    // measure algebra: ||mu * eta|| <= ||mu|| ||eta||
    let mg = make_grid(1, Axis::new(0.0, 0.1, 16), &[Axis::symmetric(6, 0.2)]).map_err(e)?;
    let mut rng = CounterRng::new(101);
    let mut worst = f64::NEG_INFINITY;
    for pair in 0..50 {
        // odd pairs are nonnegative, where the bound is nearly tight
        let shift = if pair % 2 == 1 { 0.0 } else { 1.0 };
        let mut rand_measure = || -> Result<GriddedMeasure, String> {
            let col: Vec<f64> = (0..mg.time().count).map(|_| 2.0 * rng.open01() - shift).collect();
            let joint: Vec<f64> = (0..mg.len()).map(|_| 2.0 * rng.open01() - shift).collect();
            GriddedMeasure::from_parts(&mg, col, Some(joint)).map_err(e)
        };
        let (m1, m2) = (rand_measure()?, rand_measure()?);
        for rule in [TimeRule::Corner, TimeRule::Trapezoid] {
            let lhs = m1.convolve(&m2, rule).map_err(e)?.total_variation(rule);
            let rhs = m1.total_variation(rule) * m2.total_variation(rule);
            worst = worst.max(lhs / rhs);
        }
    }
    let alg = worst <= 1.0 + 1e-12;
    ok &= alg;
    parts.push(format!("max ||mu*eta||/(||mu|| ||eta||) {worst:.3}"));

    // covariance symmetry and Cauchy-Schwarz
    let models = [
        CovarianceModel::Ex1Bessel { dim: 1, lambda: 1.0, lambda_p: 1.0, m2: Some(1.0), b1: None },
        CovarianceModel::Ex2PiecewiseD1 { lambda: 1.0, lambda_p: 1.0, c: 1.0, m2: Some(1.0), b1: None },
        CovarianceModel::Generic { kernel: k2.clone(), dim: 1, m2: Some(1.0), b1: None },
    ];
    let mut sym = 0.0f64;
    let mut cs = f64::NEG_INFINITY;
    for m in &models {
        let var = covariance(m, 0.0, &[0.0]).map_err(e)?;
        for _ in 0..20 {
            let tau = 2.0 * rng.open01();
            let xi = 4.0 * rng.open01() - 2.0;
            let p = covariance(m, tau, &[xi]).map_err(e)?;
            let q = covariance(m, tau, &[-xi]).map_err(e)?;
            sym = sym.max((p - q).abs() / var);
            cs = cs.max(p.abs() / var);
        }
    }
    let cov_ok = sym <= 1e-8 && cs <= 1.0 + 1e-9;
    ok &= cov_ok;
    parts.push(format!("cov asym {sym:.1e}, max |corr| {cs:.3}"));

    // càdlàg probe on a jump-driven cone field
    let cg = make_grid(1, Axis::new(0.0, 0.05, 81), &[Axis::symmetric(60, 0.05)]).map_err(e)?;
    let cp = LevyBasisSpec::new(0.0, 0.0, LevyMeasureModel::CompoundPoisson { rate: 1.5, law: JumpLaw::Normal { mean: 0.0, sd: 1.0 } }).map_err(e)?;
    let sim = Simulator::new(SimulationPlan::new(cg, cp, k2.clone(), Mode::Causal { pad: Some(1.0) }, 12, 1)).map_err(e)?;
    let (inc, cat) = sim.increments_with_catalog(0);
    let field = sim.convolve(&inc).map_err(e)?;
    let rep = cadlag_probe(&field, Some(&cat), inc.grid(), &k2, CadlagMode::ConeCadlag { c: 1.0 }, 3, 10).map_err(e)?;
    let own = rep.jumps.iter().map(|j| j.own_modulus / j.size.abs()).fold(0.0, f64::max);
    let cad = rep.holds() && rep.jumps.len() == 10;
    ok &= cad;
    parts.push(format!("cadlag {} jumps, max anomaly {:.3}, own kernel modulus {own:.3}", rep.jumps.len(), rep.max_anomaly()));
    Ok((ok, parts.join("; ")))
}
