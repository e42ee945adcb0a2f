use proptest::prelude::*;

use vou::drift::{DriftMeasure, GriddedMeasure, TimeRule};
use vou::grid::{make_grid, Axis, Field, SpaceTimeGrid};
use vou::kernels::EffectiveKernel;
use vou::levy::LevyBasisSpec;
use vou::moments::{covariance, CovarianceModel};
use vou::resolvent::{closed_form_resolvent, neumann_resolvent, verify_resolvent_identity, NeumannOptions};
use vou::simulator::{Method, Mode, SimulationPlan, Simulator};

fn grid(nt: usize, half: usize, d: f64) -> SpaceTimeGrid {
    make_grid(1, Axis::new(0.0, d, nt), &[Axis::symmetric(half, d)]).unwrap()
}

fn ex2() -> EffectiveKernel {
    EffectiveKernel::Ex2 { lambda: 1.0, lambda_p: 1.0, c: 1.0 }
}

fn measure(g: &SpaceTimeGrid, col: &[f64], joint: &[f64]) -> GriddedMeasure {
    GriddedMeasure::from_parts(g, col.to_vec(), Some(joint.to_vec())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_norm_is_submultiplicative(
        a in prop::collection::vec(-1.0f64..1.0, 12 + 12 * 9),
        b in prop::collection::vec(-1.0f64..1.0, 12 + 12 * 9),
    ) {
        let g = grid(12, 4, 0.1);
        let m1 = measure(&g, &a[..12], &a[12..]);
        let m2 = measure(&g, &b[..12], &b[12..]);
        let lhs = m1.convolve(&m2, TimeRule::Corner).unwrap().total_variation(TimeRule::Corner);
        let rhs = m1.total_variation(TimeRule::Corner) * m2.total_variation(TimeRule::Corner);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15, "{lhs} > {rhs}");
    }

    #[test]
    fn ou_resolvent_identity_small(lambda in -2.0f64..2.0) {
        prop_assume!(lambda.abs() > 1e-3);
        let g = make_grid(1, Axis::new(0.0, 0.01, 201), &[Axis::new(0.0, 1.0, 1)]).unwrap();
        let mu = DriftMeasure::ou(lambda, 1).unwrap();
        let rho = neumann_resolvent(&mu, &g, &NeumannOptions::default()).unwrap();
        let exact = closed_form_resolvent(&mu).unwrap();
        let r_num = verify_resolvent_identity(&mu, &rho, &g, TimeRule::Trapezoid).unwrap();
        let r_exact = verify_resolvent_identity(&mu, &exact, &g, TimeRule::Trapezoid).unwrap();
        prop_assert!(r_num < 1e-8, "{r_num}");
        // trapezoid error of a density growing like e^{|lambda| t} on [0, 2]
        let scale = (1.0 + lambda * lambda) * (2.0 * lambda.abs()).exp();
        prop_assert!(r_exact < 1e-4 * scale, "{r_exact}");
    }

    #[test]
    fn covariance_symmetric_and_bounded(tau in 0.0f64..3.0, xi in -3.0f64..3.0, lp in 0.5f64..2.0, c in 0.5f64..2.0) {
        let models = [
            CovarianceModel::Ex1Bessel { dim: 1, lambda: 1.0, lambda_p: lp, m2: Some(1.0), b1: None },
            CovarianceModel::Ex1Bessel { dim: 2, lambda: 1.0, lambda_p: lp, m2: Some(1.0), b1: None },
            CovarianceModel::Ex2PiecewiseD1 { lambda: 1.0, lambda_p: lp, c, m2: Some(2.0), b1: None },
        ];
        for m in &models {
            let d = m.dim();
            let mut x = vec![0.0; d];
            x[0] = xi;
            let var = covariance(m, 0.0, &vec![0.0; d]).unwrap();
            let p = covariance(m, tau, &x).unwrap();
            x[0] = -xi;
            let q = covariance(m, tau, &x).unwrap();
            prop_assert!((p - q).abs() <= 1e-12 * var);
            prop_assert!(p.abs() <= var * (1.0 + 1e-12));
        }
    }

    #[test]
    fn same_seed_same_field(seed in any::<u64>(), r in 0usize..4) {
        let plan = SimulationPlan::new(grid(6, 5, 0.1), LevyBasisSpec::gaussian(1.0), ex2(), Mode::Causal { pad: Some(0.5) }, seed, 4);
        let a = Simulator::new(plan.clone()).unwrap().replicate(r).unwrap();
        let b = Simulator::new(plan).unwrap().replicate(r).unwrap();
        prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn cone_causality_is_exact(pn in 1usize..10, pj in 0usize..21, seed in 0u64..1000) {
        let g = grid(10, 10, 0.1);
        let plan = SimulationPlan { method: Method::Direct, ..SimulationPlan::new(g, LevyBasisSpec::gaussian(1.0), ex2(), Mode::Causal { pad: Some(1.0) }, seed, 1) };
        let sim = Simulator::new(plan).unwrap();
        let lam = sim.increments(0);
        let base = sim.convolve(&lam).unwrap().get(pn, &[pj]);
        let cells = lam.grid().clone();
        let s = cells.spatial_len();
        let (nl, pad) = ((sim.window.time_offset + pn) as isize, sim.window.pad[0] as isize);
        let mut v = lam.values().to_vec();
        for (c, x) in v.iter_mut().enumerate() {
            let l = nl - (c / s) as isize;
            let e = pj as isize - (c % s) as isize + pad;
            let nearest = if e >= 1 { e - 1 } else { -e };
            if l <= 0 || nearest > l {
                *x = 0.0;
            }
        }
        let cut = sim.convolve(&Field::new(cells, v).unwrap()).unwrap().get(pn, &[pj]);
        prop_assert_eq!(cut.to_bits(), base.to_bits());
    }

    #[test]
    fn scaling_the_kernel_scales_the_field(a in -3.0f64..3.0, seed in 0u64..1000) {
        let g = grid(6, 5, 0.1);
        let mk = |k: EffectiveKernel| SimulationPlan::new(g.clone(), LevyBasisSpec::gaussian(1.0), k, Mode::Causal { pad: Some(0.5) }, seed, 1);
        let base = Simulator::new(mk(ex2())).unwrap().replicate(0).unwrap();
        let scaled = Simulator::new(mk(ex2().scaled(a))).unwrap().replicate(0).unwrap();
        for (x, y) in base.values().iter().zip(scaled.values()) {
            prop_assert_eq!((a * x).to_bits(), y.to_bits());
        }
    }

    #[test]
    fn vgf1_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 4 * 7)) {
        let f = Field::new(grid(4, 3, 0.25), vals).unwrap();
        let mut buf = Vec::new();
        f.write_vgf1(&mut buf).unwrap();
        prop_assert_eq!(Field::read_vgf1(&buf[..]).unwrap(), f);
    }
}
