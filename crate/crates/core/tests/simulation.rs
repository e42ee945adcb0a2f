use vou::grid::{make_grid, Axis};
use vou::kernels::EffectiveKernel;
use vou::levy::LevyBasisSpec;
use vou::moments::{mean_estimate, Estimate};
use vou::simulator::{convergence_probe, Mode, SimulationPlan, Simulator};

fn ex1() -> EffectiveKernel {
    EffectiveKernel::Ex1 { lambda: 1.0, lambda_p: 1.0 }
}

fn var_estimate(xs: &[f64]) -> Estimate {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    mean_estimate(&sq).unwrap()
}

#[test]
fn stationary_slabs_agree() {
    let g = make_grid(1, Axis::new(0.0, 0.1, 41), &[Axis::symmetric(5, 0.1)]).unwrap();
    let plan = SimulationPlan::new(g, LevyBasisSpec::gaussian(1.0), ex1(), Mode::Stationary { burn_in: None, pad: None }, 21, 4000);
    let sim = Simulator::new(plan).unwrap();
    // nodes 2 time units apart are nearly independent, so the two slabs give near-independent estimates
    let pts: Vec<Vec<f64>> = (0..4000).map(|r| sim.points(r, &[(0, [5, 0, 0]), (40, [5, 0, 0])])).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p[0], p[1])).unzip();
    let (ma, mb) = (mean_estimate(&a).unwrap(), mean_estimate(&b).unwrap());
    assert!((ma.value - mb.value).abs() <= 3.0 * ma.se.hypot(mb.se));
    let (va, vb) = (var_estimate(&a), var_estimate(&b));
    assert!((va.value - vb.value).abs() <= 3.0 * va.se.hypot(vb.se));
    // and both match the exact variance 1/2
    assert!((va.value - 0.5).abs() <= 3.0 * va.se);
}

#[test]
fn doubling_the_pad_stays_within_the_tail_bound() {
    let g = make_grid(1, Axis::new(0.0, 0.1, 11), &[Axis::symmetric(5, 0.1)]).unwrap();
    let mk = |pad| SimulationPlan::new(g.clone(), LevyBasisSpec::new(1.0, 0.0, vou::levy::LevyMeasureModel::Zero).unwrap(), ex1(), Mode::Causal { pad: Some(pad) }, 2, 1);
    for r in [2.0, 4.0] {
        let a = Simulator::new(mk(r)).unwrap().replicate(0).unwrap();
        let b = Simulator::new(mk(2.0 * r)).unwrap().replicate(0).unwrap();
        // deterministic unit increments: the dropped mass is int_0^1 int_{|y| > R} e^{-s - |y|} <= 2 e^{-R}
        let bound = 2.0 * (-r as f64).exp() * 1.05;
        let diff = a.zip(&b, |x, y| (x - y).abs()).unwrap().max_abs();
        assert!(diff <= bound, "{r}: {diff} > {bound}");
        assert!(diff > 0.0);
    }
}

#[test]
fn law_converges_to_the_stationary_one() {
    let g = make_grid(1, Axis::new(0.0, 0.05, 1), &[Axis::symmetric(1, 0.05)]).unwrap();
    let plan = SimulationPlan::new(g, LevyBasisSpec::gaussian(1.0), ex1(), Mode::Causal { pad: None }, 31, 10_000);
    let u: Vec<f64> = (0..=30).map(|k| -3.0 + 0.2 * k as f64).collect();
    let p = convergence_probe(&plan, &[0.5, 1.0, 2.0, 4.0], &[0.0], &u).unwrap();
    assert!(p.limit_exists);
    let d: Vec<f64> = p.points.iter().map(|q| q.distance).collect();
    assert!(d.windows(2).take(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(d[3] <= 0.03, "{d:?}");
    let v: Vec<f64> = p.points.iter().map(|q| q.variance).collect();
    assert!(v.windows(2).all(|w| w[1] > w[0] * 0.98), "{v:?}");
}

#[test]
fn growing_kernel_has_no_limit() {
    let g = make_grid(1, Axis::new(0.0, 0.1, 1), &[Axis::symmetric(1, 0.1)]).unwrap();
    let k = EffectiveKernel::Ex1 { lambda: -0.5, lambda_p: 1.0 };
    let plan = SimulationPlan::new(g, LevyBasisSpec::gaussian(1.0), k, Mode::Causal { pad: Some(4.0) }, 1, 500);
    let p = convergence_probe(&plan, &[1.0, 2.0, 4.0], &[0.0], &[0.5]).unwrap();
    assert!(!p.limit_exists);
    assert!(p.points.windows(2).all(|w| w[1].variance > w[0].variance));
}
