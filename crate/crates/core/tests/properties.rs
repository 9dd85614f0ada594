//! Property-based invariants of the public API.

#![allow(clippy::needless_range_loop)]

mod common;

use common::blocks;
use kvcontact::assembly::{InfluenceMatrices, LoadData};
use kvcontact::contact::{awb_to_y, mosco_bounds, y_to_awb, ContactGeometry};
use kvcontact::evolve::{adapt_tau, Schedule};
use kvcontact::kernels::{kelvin_t, kelvin_u};
use kvcontact::mesh::{build_mesh, pair_contacts, EdgeSpec, ElementTag, Material, Side};
use kvcontact::qp::{mprgp_solve, projected_gradient_norm, DenseOperator, MprgpOptions, QpProblem};
use kvcontact::runner::simulate;
use kvcontact::steklov::SteklovOperator;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::sync::OnceLock;

fn material() -> impl Strategy<Value = Material> {
    (1.0e2..1.0e5f64, 0.0..0.49f64).prop_map(|(e, nu)| Material::new(e, nu, 0.0).unwrap())
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| [x, y])
}

/// Two blocks with a shared face, A on top, sized by the arguments.
fn stacked(w: f64, ha: f64, hb: f64, na: usize, nb: usize) -> InfluenceMatrices {
    use ElementTag as T;
    let rect = |side, y0: f64, y1: f64, tags: [ElementTag; 4], div: [usize; 4]| {
        let p = [[0.0, y0], [w, y0], [w, y1], [0.0, y1]];
        let edges: Vec<EdgeSpec> = (0..4).map(|i| EdgeSpec::uniform(tags[i], div[i])).collect();
        build_mesh(side, &p, &edges).unwrap()
    };
    let a = rect(Side::A, 0.0, ha, [T::C, T::N, T::D, T::N], [na, 2, 2, 2]);
    let b = rect(Side::B, -hb, 0.0, [T::D, T::N, T::C, T::N], [2, 2, nb, 2]);
    let pair = pair_contacts(&a, &b).unwrap();
    let mats = vec![Material::new(300.0, 0.3, 0.0).unwrap(), Material::new(900.0, 0.2, 0.0).unwrap()];
    InfluenceMatrices::assemble(vec![a, b], mats, Some(pair)).unwrap()
}

fn reference_blocks() -> &'static InfluenceMatrices {
    static IM: OnceLock<InfluenceMatrices> = OnceLock::new();
    IM.get_or_init(|| stacked(1.0, 0.6, 1.0, 4, 5))
}

fn random_data(im: &InfluenceMatrices, seed: &[f64]) -> LoadData {
    let mut d = LoadData::zeros(&im.layout);
    let mut k = 0;
    let mut next = || {
        k += 1;
        seed[k % seed.len()] * (1.0 + (k as f64).sin())
    };
    for v in d.g.iter_mut().chain(d.f.iter_mut()) {
        for x in v.iter_mut() {
            *x = next();
        }
    }
    for x in d.w.iter_mut() {
        *x = 0.01 * next();
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_layer_kernel_is_symmetric(x in point(), y in point(), m in material()) {
        prop_assume!(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() > 1e-3);
        let u = kelvin_u(x, y, &m).unwrap();
        let v = kelvin_u(y, x, &m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((u[i][j] - u[j][i]).abs() <= 1e-14 * (u[i][j].abs() + 1e-30));
                prop_assert!((u[i][j] - v[i][j]).abs() <= 1e-14 * (u[i][j].abs() + 1e-30));
            }
        }
    }

    #[test]
    fn double_layer_kernel_scales_inversely_with_distance(x in point(), y in point(), m in material(), s in 0.1..10.0f64, th in 0.0..std::f64::consts::TAU) {
        let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assume!(r > 1e-3);
        let n = [th.cos(), th.sin()];
        let t = kelvin_t(x, y, n, &m).unwrap();
        let ys = [x[0] + s * (y[0] - x[0]), x[1] + s * (y[1] - x[1])];
        let ts = kelvin_t(x, ys, n, &m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((ts[i][j] * s - t[i][j]).abs() <= 1e-12 * (t[i][j].abs() + 1e-12));
            }
        }
    }

    #[test]
    fn transmission_problem_is_linear(s1 in prop::collection::vec(-1.0..1.0f64, 5), s2 in prop::collection::vec(-1.0..1.0f64, 5), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let im = reference_blocks();
        let (d1, d2) = (random_data(im, &s1), random_data(im, &s2));
        let mut d = LoadData::zeros(&im.layout);
        for (dst, (u, v)) in d.g.iter_mut().zip(d1.g.iter().zip(&d2.g)).chain(d.f.iter_mut().zip(d1.f.iter().zip(&d2.f))) {
            for (x, (p, q)) in dst.iter_mut().zip(u.iter().zip(v)) {
                *x = a * p + b * q;
            }
        }
        for (x, (p, q)) in d.w.iter_mut().zip(d1.w.iter().zip(&d2.w)) {
            *x = a * p + b * q;
        }
        let (x1, x2, x) = (im.solve_tbvp(&d1).unwrap().x, im.solve_tbvp(&d2).unwrap().x, im.solve_tbvp(&d).unwrap().x);
        let scale = x.iter().chain(&x1).chain(&x2).fold(1e-30f64, |m, v| m.max(v.abs()));
        for i in 0..x.len() {
            prop_assert!((x[i] - a * x1[i] - b * x2[i]).abs() <= 1e-9 * scale * (a.abs() + b.abs() + 1.0));
        }
    }

    #[test]
    fn assembled_system_is_symmetric(w in 0.5..3.0f64, ha in 0.2..2.0f64, hb in 0.5..3.0f64, na in 1usize..6, nb in 1usize..6) {
        let im = stacked(w, ha, hb, na, nb);
        prop_assert!(im.asymmetry() <= 1e-10, "{}", im.asymmetry());
    }

    #[test]
    fn contact_restriction_is_symmetric_positive(w in 0.5..3.0f64, ha in 0.2..2.0f64, n in 2usize..6) {
        let im = stacked(w, ha, 1.0, n, n + 1);
        let a = SteklovOperator::new(&im).unwrap().dense_contact_matrix().unwrap();
        let asym = (&a - a.transpose()).norm() / a.norm();
        prop_assert!(asym <= 1e-9, "{asym}");
        let eig = a.symmetric_eigen();
        let top = eig.eigenvalues.max();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * top));
    }

    #[test]
    fn mosco_variables_round_trip(y in prop::collection::vec(-1.0..1.0f64, 24)) {
        let geom = ContactGeometry::new(reference_blocks()).unwrap();
        prop_assert_eq!(4 * geom.num_nodes(), y.len());
        let back = awb_to_y(&y_to_awb(&y, &geom), &geom);
        for (a, b) in y.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn mosco_bounds_encode_the_previous_gap(z in prop::collection::vec(-0.1..0.1f64, 12), tau in 1e-5..1e-2f64, chi in 0.0..1e-2f64) {
        let geom = ContactGeometry::new(reference_blocks()).unwrap();
        let nc = geom.num_nodes();
        prop_assert_eq!(2 * nc, z.len());
        let m = mosco_bounds(&geom, &z, tau, chi).unwrap();
        let (zt, zn) = geom.split(&z);
        for c in 0..nc {
            prop_assert_eq!(m.xi[c], zt[c]);
            prop_assert_eq!(m.xi[nc + c], -zt[c]);
            prop_assert_eq!(m.xi[2 * nc + c], 0.0);
            prop_assert!((m.xi[3 * nc + c] + chi / tau * zn[c]).abs() <= 1e-15 * (chi / tau * zn[c]).abs().max(1.0));
        }
    }

    #[test]
    fn mprgp_meets_kkt_conditions(n in 2usize..30, seed in prop::collection::vec(-1.0..1.0f64, 64)) {
        let at = |k: usize| seed[k % seed.len()] + 0.1 * ((k * 7919) as f64).sin();
        let g = DMatrix::from_fn(n, n, |i, j| at(i * n + j));
        let a = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
        let b: Vec<f64> = (0..n).map(|i| 2.0 * at(3 * i + 1)).collect();
        let l: Vec<f64> = (0..n).map(|i| at(5 * i + 2)).collect();
        let qp = QpProblem::new(DenseOperator(a), b.clone(), 0.0, l.clone()).unwrap();
        let sol = mprgp_solve(&qp, &vec![0.0; n], &MprgpOptions::default()).unwrap();
        prop_assert!(sol.y.iter().zip(&l).all(|(y, l)| y >= l));
        let grad = qp.gradient(&sol.y).unwrap();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(projected_gradient_norm(&sol.y, &grad, &l) <= 1e-8 * bnorm.max(1e-30));
        let hist: Vec<f64> = sol.history.iter().map(|r| r.objective).collect();
        prop_assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
    }

    #[test]
    fn schedules_stay_within_their_breakpoint_values(v in prop::collection::vec(-5.0..5.0f64, 2..6), t in -1.0..2.0f64) {
        let times: Vec<f64> = (0..v.len()).map(|i| i as f64 / (v.len() - 1) as f64).collect();
        let s = Schedule::new(times.clone(), v.clone()).unwrap();
        let x = s.at(t);
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        for (ti, vi) in times.iter().zip(&v) {
            prop_assert!((s.at(*ti) - vi).abs() <= 1e-12);
        }
    }

    #[test]
    fn step_control_respects_its_limits(delta in 0.0..10.0f64, eps in 0.1..5.0f64, tau in 1e-6..1e-2f64, grow in 0.01..0.9f64) {
        let (tau_min, tau_max) = (1e-6, 1e-2);
        let d = adapt_tau(delta, eps, tau, tau_min, tau_max, grow);
        prop_assert!(d.tau >= tau_min && d.tau <= tau_max);
        if delta > eps && tau > tau_min {
            prop_assert!(!d.accept);
            prop_assert!(d.tau < tau);
        } else {
            prop_assert!(d.accept);
            prop_assert_eq!(d.forced, delta > eps);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn discrete_energy_inequality_holds(mu in 0.05..1.2f64, chi in 0.0..5e-3f64, px in -0.02..0.02f64, py in -0.03..0.0f64) {
        let s = blocks(mu, chi, [px, py], 3);
        let im = s.influence(None).unwrap();
        let report = simulate(&s, &im, None).unwrap();
        let mut total = 0.0;
        let mut previous = vec![0.0; report.steps[0].p_n.len()];
        for st in &report.steps {
            prop_assert!(st.residuum.delta >= -1e-9 * st.residuum.scale(), "{:?}", st.residuum);
            total += st.residuum.delta;
            prop_assert!(st.p_n.iter().all(|p| *p <= 0.0));
            // the slip bound of a step uses the pressure of the step before
            let pmax = previous.iter().chain(&st.p_t).chain(&st.p_n).fold(1e-12f64, |a: f64, p| a.max(p.abs()));
            for (t, n) in st.p_t.iter().zip(&previous) {
                prop_assert!(t.abs() <= mu * n.abs() + 1e-6 * pmax, "{t} vs {}", mu * n.abs());
            }
            previous.clone_from(&st.p_n);
        }
        prop_assert!((report.summary.ledger.balance() - total).abs() <= 1e-9 * total.abs().max(1e-9));
    }
}
