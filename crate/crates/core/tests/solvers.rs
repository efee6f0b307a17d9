mod common;

use cgeig_core::dense::{backward_substitute_adjoint, cholesky, forward_substitute, DenseMatrix};
use cgeig_core::estimates::{average_factor_psi2, pcg_bound, BoundInputs};
use cgeig_core::linops::{m_norm, HermitianOperator, HermitianPencil};
use cgeig_core::precond::{jacobi_preconditioner, quality_metrics, Preconditioner};
use cgeig_core::problems::{cluster_spectrum, dense_oracle, gen_diag, gen_laplace1d, lanczos_ritz_sequence};
use cgeig_core::solvers::*;
use cgeig_core::vecops::dot;
use common::*;

fn diag3() -> HermitianPencil<f64> {
    HermitianPencil::standard(HermitianOperator::from_real_diagonal(&[1.0, 2.0, 3.0]).unwrap())
}

fn cfg(m: Method) -> SolverConfig {
    let mut c = SolverConfig::with_method(m);
    c.tol_residual = 1e-10;
    c.max_iters = 500;
    c
}

fn solve_dense(t: &DenseMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let l = cholesky(t, 0.0).unwrap();
    let mut y = b.to_vec();
    forward_substitute(&l, &mut y);
    backward_substitute_adjoint(&l, &mut y);
    y
}

#[test]
fn heuristic_pcg_small_diag_obeys_bound() {
    let p = diag3();
    let t = Preconditioner::identity(3);
    let x0 = vec![1.0 / 3f64.sqrt(); 3];
    let mut c = cfg(Method::PcgHeuristic);
    c.keep_iterates = true;
    let res = solve_pcg_heuristic(&p, &t, 1.0, &x0, &c).unwrap();
    assert!(res.converged);
    let q = quality_metrics(&p, &t, 0.0).unwrap();
    let inputs = BoundInputs::new(1.0, 2.0, 3.0, 0.0, q.kappa).unwrap();
    let its = res.iterates.as_ref().unwrap();
    let n0 = m_norm(p.m(), &its[0]).unwrap().powi(2);
    let e0 = res.history.records[0].theta - 1.0;
    for (i, rec) in res.history.records.iter().enumerate() {
        let ratio = n0 / m_norm(p.m(), &its[i]).unwrap().powi(2);
        let bound = pcg_bound(&inputs, i, e0, ratio).unwrap();
        assert!(rec.theta - 1.0 <= bound + 1e-9, "step {i}: {} > {bound}", rec.theta - 1.0);
    }
}

#[test]
fn heuristic_pcg_random_pencils_bound_and_orthogonality() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let n = 20 + (seed as usize % 3) * 10;
        let p = random_pencil(n, &mut r);
        let tm = random_spd(n, 0.5, &mut r);
        let t = Preconditioner::from_dense(tm.clone()).unwrap();
        let o = dense_oracle(&p).unwrap();
        let (l1, l2, ln) = (o.values[0], o.values[1], o.values[n - 1]);
        let q = quality_metrics(&p, &t, 0.0).unwrap();
        let inputs = BoundInputs::new(l1, l2, ln, 0.0, q.kappa).unwrap();
        let x0 = normal_vec(n, &mut r);
        let mut c = cfg(Method::PcgHeuristic);
        c.keep_iterates = true;
        c.tol_residual = 1e-7;
        c.max_iters = n;
        let res = solve_pcg_heuristic(&p, &t, l1, &x0, &c).unwrap();
        let its = res.iterates.as_ref().unwrap();
        let n0 = m_norm(p.m(), &its[0]).unwrap().powi(2);
        let e0 = res.history.records[0].theta - l1;
        let x1 = o.vectors.col(0);
        let tx1 = solve_dense(&tm, &x1);
        let x1_t = dot(&x1, &tx1).sqrt();
        for (i, rec) in res.history.records.iter().enumerate() {
            let ratio = n0 / m_norm(p.m(), &its[i]).unwrap().powi(2);
            let bound = pcg_bound(&inputs, i, e0, ratio).unwrap();
            assert!(rec.theta - l1 <= bound + 1e-9 * l1.abs(), "seed {seed} step {i}");
            let d: Vec<f64> = its[i].iter().zip(&its[0]).map(|(a, b)| a - b).collect();
            if i > 0 {
                let dn = dot(&d, &solve_dense(&tm, &d)).sqrt();
                let ip = dot(&tx1, &d).abs();
                assert!(ip <= 1e-8 * x1_t * dn, "seed {seed} step {i}: {ip:e}");
            }
        }
    }
}

#[test]
fn heuristic_pcg_stays_above_lanczos() {
    let p = gen_laplace1d(40).unwrap();
    let t = Preconditioner::identity(40);
    let mut r = rng(3);
    let x0 = normal_vec(40, &mut r);
    let mut c = cfg(Method::PcgHeuristic);
    c.max_iters = 25;
    c.tol_residual = 1e-300;
    let l1 = p.exact.as_ref().unwrap()[0];
    let res = solve_pcg_heuristic(&p.pencil, &t, l1, &x0, &c).unwrap();
    let lz = lanczos_ritz_sequence(p.pencil.a(), &x0, 26).unwrap();
    for (i, rec) in res.history.records.iter().enumerate().take(lz.len()) {
        assert!(rec.theta >= lz[i] - 1e-10, "step {i}: {} < {}", rec.theta, lz[i]);
    }
}

#[test]
fn psd_two_dimensional_space_is_exact() {
    let p = HermitianPencil::standard(HermitianOperator::from_real_diagonal(&[1.0, 2.0]).unwrap());
    let t = Preconditioner::identity(2);
    let res = solve_psd(&p, &t, &[1.0, 1.0], &cfg(Method::Psd)).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, 1);
    assert!((res.theta_final - 1.0).abs() < 1e-15);
    assert!(res.x_final[1].abs() < 1e-15);
}

#[test]
fn eigenvector_start_converges_at_step_zero() {
    let p = diag3();
    let t = Preconditioner::identity(3);
    for m in Method::ALL {
        let mut c = cfg(m);
        c.lambda1_input = Some(1.0);
        let res = solve(&p, &t, &[2.0, 0.0, 0.0], &c).unwrap();
        assert!(res.converged && res.iterations == 0, "{m}");
        assert_eq!(res.nu_final, 0.0);
    }
}

#[test]
fn first_steps_coincide_with_psd() {
    let p = gen_laplace1d(30).unwrap();
    let t = Preconditioner::identity(30);
    let mut r = rng(7);
    let x0 = normal_vec(30, &mut r);
    let psd = solve_psd(&p.pencil, &t, &x0, &cfg(Method::Psd)).unwrap().history.thetas();
    for m in [Method::Lopcg, Method::Lopcgx, Method::Lopcga, Method::Gd, Method::Tpcg, Method::Tpcga] {
        let th = solve(&p.pencil, &t, &x0, &cfg(m)).unwrap().history.thetas();
        assert!((th[1] - psd[1]).abs() <= 1e-13 * psd[1], "{m}: {} vs {}", th[1], psd[1]);
    }
    for fam in ["bradbury-fletcher", "polak-ribiere", "daniel", "perdon-gambolati"] {
        let mut c = cfg(Method::Tpcg);
        c.tpcg_family = TpcgFamily::from_name(fam).unwrap();
        c.tpcg_variant = TpcgVariant::Standard;
        let th = solve(&p.pencil, &t, &x0, &c).unwrap().history.thetas();
        assert!((th[1] - psd[1]).abs() <= 1e-13 * psd[1], "{fam}");
    }
}

#[test]
fn lopcgx_matches_lopcg_for_two_steps() {
    let p = gen_laplace1d(30).unwrap();
    let t = Preconditioner::identity(30);
    let x0 = normal_vec(30, &mut rng(11));
    let a = solve_lopcg(&p.pencil, &t, &x0, &cfg(Method::Lopcg)).unwrap().history.thetas();
    let b = solve_lopcgx(&p.pencil, &t, &x0, &cfg(Method::Lopcgx)).unwrap().history.thetas();
    assert_eq!(a[..3], b[..3]);
}

#[test]
fn lopcg_laplace1d_converges_within_cap() {
    let p = gen_laplace1d(100).unwrap();
    let t = Preconditioner::identity(100);
    let x0 = vec![1.0; 100];
    let mut c = cfg(Method::Lopcg);
    c.max_iters = 200;
    let res = solve_lopcg(&p.pencil, &t, &x0, &c).unwrap();
    assert!(res.converged, "nu = {:e}", res.nu_final);
    let l1 = 2.0 - 2.0 * (std::f64::consts::PI / 101.0).cos();
    assert!((res.theta_final - l1).abs() <= 1e-12);
}

#[test]
fn lopcga_threshold_extremes() {
    let p = gen_laplace1d(40).unwrap();
    let t = Preconditioner::identity(40);
    let x0 = normal_vec(40, &mut rng(5));
    let mut c = cfg(Method::Lopcga);
    c.tau_angle = 0.0;
    let res = solve_lopcga(&p.pencil, &t, &x0, &c).unwrap();
    assert!(res.history.events().iter().all(|e| e.1 != Event::AuxUpdate));
    c.tau_angle = 1.5;
    let res = solve_lopcga(&p.pencil, &t, &x0, &c).unwrap();
    let updates = res.history.events().iter().filter(|e| e.1 == Event::AuxUpdate).count();
    assert!(updates + 1 >= res.iterations && updates <= res.iterations, "{updates} of {}", res.iterations);
}

#[test]
fn tpcga_without_peaks_matches_tpcg() {
    let p = gen_laplace1d(40).unwrap();
    let t = Preconditioner::identity(40);
    let x0 = normal_vec(40, &mut rng(9));
    let a = solve_tpcg(&p.pencil, &t, &x0, &cfg(Method::Tpcg)).unwrap();
    let mut c = cfg(Method::Tpcga);
    c.peak_factor = 1e300;
    let b = solve_tpcga(&p.pencil, &t, &x0, &c).unwrap();
    assert_eq!(a.history.thetas(), b.history.thetas());
    assert_eq!(a.history.nus(), b.history.nus());
}

#[test]
fn tpcg_family_c_keeps_w_orthogonal_to_x() {
    let p = HermitianPencil::standard(
        HermitianOperator::from_real_diagonal(&(1..=100).map(f64::from).collect::<Vec<_>>()).unwrap(),
    );
    let t = Preconditioner::identity(100);
    let x0 = normal_vec(100, &mut rng(1));
    let mut c = cfg(Method::Tpcg);
    c.tpcg_variant = TpcgVariant::Standard;
    c.tpcg_family = TpcgFamily::JACOBI;
    let res = solve_tpcg(&p, &t, &x0, &c).unwrap();
    assert!(!res.orthogonality_defects.is_empty());
    for d in &res.orthogonality_defects {
        assert!(*d <= 1e-10, "defect {d:e}");
    }
}

#[test]
fn tpcga_flag_transitions_are_ordered() {
    let pr = gen_diag(&cluster_spectrum(1e-6, 300)).unwrap();
    let t = jacobi_preconditioner(pr.pencil.a()).unwrap();
    for seed in 0..5 {
        let x0 = normal_vec(pr.pencil.dim(), &mut rng(seed));
        let res = solve_tpcga(&pr.pencil, &t, &x0, &cfg(Method::Tpcga)).unwrap();
        let mut flag = 0u8;
        for (_, e) in res.history.events() {
            flag = match (flag, e) {
                (0, Event::Flag01) => 1,
                (1, Event::Flag12) => 2,
                (2, Event::Augment) => 2,
                (2, Event::Flag20) => 0,
                (f, Event::Flag01 | Event::Flag12 | Event::Flag20 | Event::Augment) => panic!("{e:?} at flag {f}"),
                (f, _) => f,
            };
        }
    }
}

#[test]
fn rrw_methods_are_monotone_and_bounded_below() {
    for seed in 0..6 {
        let mut r = rng(100 + seed);
        let n = 40;
        let p = random_pencil(n, &mut r);
        let t = random_precond(n, &mut r);
        let l1 = dense_oracle(&p).unwrap().values[0];
        let x0 = normal_vec(n, &mut r);
        for m in [Method::Psd, Method::Gd, Method::Lopcg, Method::Lopcgx, Method::Lopcga, Method::Tpcg, Method::Tpcga] {
            let mut c = cfg(m);
            c.max_iters = 20_000;
            let res = solve(&p, &t, &x0, &c).unwrap();
            let th = res.history.thetas();
            for w in th.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{m} seed {seed}");
            }
            for v in &th {
                assert!(*v >= l1 - 1e-10 * l1.abs(), "{m} seed {seed}");
            }
            assert!(res.converged, "{m} seed {seed}");
            assert!((res.theta_final - l1).abs() <= 1e-9 * l1.abs(), "{m} seed {seed}");
        }
    }
}

#[test]
fn gd_dominates_lopcg_for_identity_preconditioner() {
    let p = gen_laplace1d(60).unwrap();
    let t = Preconditioner::identity(60);
    let x0 = normal_vec(60, &mut rng(21));
    let mut c = cfg(Method::Gd);
    c.gd_max_dim = 64;
    let gd = solve(&p.pencil, &t, &x0, &c).unwrap().history.thetas();
    let lo = solve(&p.pencil, &t, &x0, &cfg(Method::Lopcg)).unwrap().history.thetas();
    for (i, (g, l)) in gd.iter().zip(&lo).enumerate() {
        assert!(*g <= l + 1e-10 * l.abs(), "step {i}: {g} > {l}");
    }
}

#[test]
fn gd_factor_dips_below_psi2_on_cluster() {
    let pr = gen_diag(&cluster_spectrum(1e-6, 200)).unwrap();
    let t = Preconditioner::identity(pr.pencil.dim());
    let x0 = normal_vec(pr.pencil.dim(), &mut rng(2));
    let mut c = cfg(Method::Gd);
    c.gd_max_dim = 64;
    c.max_iters = 300;
    let th = solve(&pr.pencil, &t, &x0, &c).unwrap().history.thetas();
    // T = I: κ = cond(A) with σ = 0.
    let inputs = BoundInputs::new(1.0, 1.0 + 1e-6, 200.0, 0.0, 200.0).unwrap();
    let psi2 = average_factor_psi2(inputs.eta());
    let min_factor =
        th.windows(2).filter(|w| w[0] - 1.0 > 1e-13).map(|w| (w[1] - 1.0) / (w[0] - 1.0)).fold(f64::INFINITY, f64::min);
    assert!(min_factor < psi2, "{min_factor} vs {psi2}");
}

#[test]
fn identical_runs_are_identical() {
    let pr = gen_diag(&cluster_spectrum(1e-6, 200)).unwrap();
    let t = jacobi_preconditioner(pr.pencil.a()).unwrap();
    let x0 = normal_vec(pr.pencil.dim(), &mut rng(4));
    for m in [Method::Lopcga, Method::Tpcga, Method::Gd] {
        let a = solve(&pr.pencil, &t, &x0, &cfg(m)).unwrap();
        let b = solve(&pr.pencil, &t, &x0, &cfg(m)).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.x_final, b.x_final);
    }
}

#[test]
fn matvec_budget_per_iteration() {
    let p = gen_laplace1d(50).unwrap();
    let t = Preconditioner::identity(50);
    let x0 = normal_vec(50, &mut rng(8));
    for m in [Method::Lopcg, Method::Tpcg] {
        let res = solve(&p.pencil, &t, &x0, &cfg(m)).unwrap();
        // One A-apply for x⁽⁰⁾, then at most two per step.
        assert!(res.counts.a <= 1 + 2 * res.iterations, "{m}: {} for {}", res.counts.a, res.iterations);
    }
}

#[test]
fn lambda1_update_event_fires_once() {
    let p = diag3();
    let t = Preconditioner::identity(3);
    let mut c = cfg(Method::PcgHeuristic);
    c.lambda1_update_below = Some(1e-3);
    let res = solve_pcg_heuristic(&p, &t, 0.999, &[1.0, 0.7, 0.3], &c).unwrap();
    let n = res.history.events().iter().filter(|e| e.1 == Event::Lambda1Update).count();
    assert!(n <= 1);
}

#[test]
fn invalid_start_is_rejected() {
    let p = diag3();
    let t = Preconditioner::identity(3);
    assert!(solve(&p, &t, &[0.0, 0.0, 0.0], &cfg(Method::Lopcg)).is_err());
    assert!(solve(&p, &t, &[1.0, f64::NAN, 0.0], &cfg(Method::Lopcg)).is_err());
    assert!(solve(&p, &t, &[1.0, 0.0], &cfg(Method::Lopcg)).is_err());
}
