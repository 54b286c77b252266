use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tlp_core::penalty::{penalty_tlp, rd_numeric_oracle, relaxation_degree, rho, PenaltyKind};
use tlp_core::sensing::{gen_dct, gen_gaussian, gen_signal, SignalDist};
use tlp_core::solver::{
    dca_subproblem, irls_constrained, irls_tlp, j_closed_form, tail_magnitude, Convergence, InnerExit,
    SolverConfig, SubproblemWeights,
};
use tlp_core::theory::{eta_residual, normalization_beta, rip_bound, solve_eta0, stability_constants};
use tlp_core::PenaltyParams;

fn pp(a: f64, p: f64) -> PenaltyParams {
    PenaltyParams::new(a, p).unwrap()
}

fn params() -> impl Strategy<Value = PenaltyParams> {
    (1e-3f64..100.0, 0.01f64..=1.0).prop_map(|(a, p)| pp(a, p))
}

const SLACK: f64 = 1e-12;

proptest! {
    #[test]
    fn rho_is_even(par in params(), t in -1e3f64..1e3) {
        prop_assert_eq!(rho(&par, t), rho(&par, -t));
    }

    #[test]
    fn rho_scale_comparison(par in params(), t in -50f64..50.0) {
        let lhs = rho(&par, t);
        let rhs = rho(&pp(par.a(), 1.0), t.abs().powf(par.p()));
        prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.max(1.0));
    }

    #[test]
    fn rho_monotone_and_bounded(par in params(), t1 in 0f64..100.0, d in 1e-6f64..100.0) {
        let t2 = t1 + d;
        prop_assert!(rho(&par, t1) <= rho(&par, t2));
        prop_assert!(rho(&par, t2) < par.a() + 1.0 + SLACK);
        prop_assert_eq!(rho(&par, 0.0), 0.0);
        prop_assert!((rho(&par, 1.0) - 1.0).abs() <= SLACK);
    }

    #[test]
    fn rho_sandwich(par in params(), t in -20f64..20.0) {
        let (a, p) = (par.a(), par.p());
        let tp = t.abs().powf(p);
        prop_assert!(rho(&par, t) <= (a + 1.0) / a * tp * (1.0 + SLACK) + SLACK);
        if t.abs() <= 1.0 {
            prop_assert!(tp <= rho(&par, t) + SLACK);
            prop_assert!(rho(&par, t) <= 1.0 + SLACK);
        }
    }

    #[test]
    fn rho_scaling(par in params(), t in -20f64..20.0, c in -5f64..5.0) {
        let scaled = rho(&par, c * t);
        let base = c.abs().powf(par.p()) * rho(&par, t);
        if c.abs() <= 1.0 {
            prop_assert!(scaled + SLACK >= base);
        } else {
            prop_assert!(scaled <= base + SLACK);
        }
    }

    #[test]
    fn rho_quasi_triangle(par in params(), t1 in -10f64..10.0, t2 in -10f64..10.0) {
        let r = |t: f64| rho(&par, t);
        let chain = [
            (r(t1) - r(t2)).abs(),
            r(t1 + t2),
            r(t1.abs() + t2.abs()),
            r(t1) + r(t2),
            2.0 * r((t1.abs() + t2.abs()) / 2.0),
        ];
        for w in chain.windows(2) {
            prop_assert!(w[0] <= w[1] + SLACK, "{:?}", chain);
        }
    }

    #[test]
    fn rd_closed_form_matches_oracle(par in params(), n in 1usize..2000) {
        for kind in [PenaltyKind::Tlp, PenaltyKind::Lp, PenaltyKind::Lap] {
            let closed = relaxation_degree(kind, &par, n).unwrap();
            let oracle = rd_numeric_oracle(kind, &par, n).unwrap();
            prop_assert!((closed - oracle).abs() <= 1e-10 * closed, "{kind}: {closed} vs {oracle}");
        }
    }

    #[test]
    fn rd_increases_in_a_and_p(a in 0.01f64..50.0, p in 0.05f64..0.95, n in 2usize..1000) {
        let rd = |a: f64, p: f64| relaxation_degree(PenaltyKind::Tlp, &pp(a, p), n).unwrap();
        prop_assert!(rd(a, p) < rd(a * 1.5, p));
        prop_assert!(rd(a, p) < rd(a, p + 0.05));
    }

    #[test]
    fn rd_large_a_limit(p in 0.05f64..=1.0, n in 2usize..5000) {
        let tlp = relaxation_degree(PenaltyKind::Tlp, &pp(1e9, p), n).unwrap();
        let lp = relaxation_degree(PenaltyKind::Lp, &pp(1.0, p), n).unwrap();
        prop_assert!((tlp - lp).abs() <= 1e-6 * lp);
    }

    #[test]
    fn eta0_residual_and_bound_range(par in params(), gamma in 1f64..8.0) {
        let eta = solve_eta0(&par, gamma).unwrap();
        prop_assert!(eta_residual(&par, gamma, eta).abs() < 1e-12);
        let bound = rip_bound(&par, gamma).unwrap().delta_bound;
        prop_assert!(bound > 0.0 && bound < 1.0);
    }

    #[test]
    fn stability_increases_in_delta2s(par in params(), u in 0.0f64..0.98, v in 0.0f64..0.98) {
        let bound = rip_bound(&par, 1.0).unwrap();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        prop_assume!(hi - lo > 1e-6);
        let c_lo = stability_constants(&bound, lo * bound.delta_bound).unwrap();
        let c_hi = stability_constants(&bound, hi * bound.delta_bound).unwrap();
        prop_assert!(c_lo.c0 < c_hi.c0 && c_lo.c1 < c_hi.c1 && c_lo.c2 < c_hi.c2);
    }
}

#[test]
fn normalization_beta_postcondition() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10_000 {
        let par = pp(
            10f64.powf(rng.random_range(-2.0..2.0)),
            rng.random_range(0.05..=1.0),
        );
        let n = rng.random_range(1..40);
        let s = rng.random_range(1..=n);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut x = vec![0.0; n];
        for xi in x.iter_mut().take(s) {
            *xi = scale * rng.random_range(-1.0..1.0);
        }
        let beta = normalization_beta(&par, &x).unwrap();
        assert!(beta >= 1.0);
        let y: Vec<f64> = x.iter().map(|v| v / beta).collect();
        assert!(penalty_tlp(&par, &y) <= 1.0 + 1e-12, "beta {beta} x {x:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), r in 0.0f64..0.9) {
        prop_assert_eq!(gen_gaussian(6, 11, r, seed).unwrap(), gen_gaussian(6, 11, r, seed).unwrap());
        prop_assert_eq!(gen_dct(6, 11, 5.0, seed).unwrap(), gen_dct(6, 11, 5.0, seed).unwrap());
        let s1 = gen_signal(30, 4, seed, SignalDist::Gaussian).unwrap();
        prop_assert_eq!(s1, gen_signal(30, 4, seed, SignalDist::Gaussian).unwrap());
    }

    #[test]
    fn dct_entries_in_range(seed in any::<u64>(), m in 1usize..30, n in 1usize..60, f in 0.5f64..30.0) {
        let a = gen_dct(m, n, f, seed).unwrap().entries;
        let bound = 1.0 / (m as f64).sqrt();
        prop_assert!(a.iter().all(|v| v.abs() <= bound * (1.0 + 1e-15)));
        prop_assert!(a.column(0).iter().all(|&v| v == bound));
    }

    #[test]
    fn signal_has_exact_support(seed in any::<u64>(), n in 1usize..200, frac in 0.0f64..1.0, rad in any::<bool>()) {
        let s = 1 + ((n - 1) as f64 * frac) as usize;
        let dist = if rad { SignalDist::Rademacher } else { SignalDist::Gaussian };
        let sig = gen_signal(n, s, seed, dist).unwrap();
        prop_assert_eq!(sig.vector.iter().filter(|v| **v != 0.0).count(), s);
        prop_assert_eq!(sig.support.len(), s);
        for i in 0..n {
            prop_assert_eq!(sig.support.binary_search(&i).is_ok(), sig.vector[i] != 0.0);
        }
    }

    #[test]
    fn dca_system_is_spd(seed in any::<u64>(), a in 0.05f64..20.0, lambda in 1e-6f64..1.0, c in 1e-3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_mat = gen_gaussian(6, 10, 0.0, seed).unwrap().entries;
        let w: Vec<f64> = (0..10).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let mut sys = a_mat.tr_mul(&a_mat);
        for i in 0..10 {
            sys[(i, i)] += 2.0 * c + 2.0 * lambda * (a + 1.0) / a * w[i];
        }
        let min = SymmetricEigen::new(sys).eigenvalues.min();
        prop_assert!(min >= 2.0 * c * (1.0 - 1e-9));
    }

    #[test]
    fn dca_descends_and_settles(seed in any::<u64>(), a in 0.05f64..20.0, p in 0.1f64..=1.0, lambda in 1e-6f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_mat = gen_gaussian(12, 30, 0.0, seed).unwrap().entries;
        let y = DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
        let w = DVector::from_fn(30, |_, _| 10f64.powf(rng.random_range(-2.0..2.0)));
        let x0 = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let cfg = SolverConfig { lambda, inner_max: 200, ..SolverConfig::default() };
        let out = dca_subproblem(&a_mat, &y, &pp(a, p), &SubproblemWeights::new(w).unwrap(), &cfg, &x0).unwrap();
        prop_assert!(out.max_ascent() <= 1e-10);
        if out.exit == InnerExit::Tolerance {
            prop_assert!(out.last_step < cfg.inner_tol);
        }
    }

    #[test]
    fn irls_invariants(seed in any::<u64>(), s in 1usize..6) {
        let a = gen_gaussian(20, 50, 0.0, seed).unwrap().entries;
        let sig = gen_signal(50, s, seed ^ 1, SignalDist::Gaussian).unwrap();
        let y = &a * &sig.vector;
        let cfg = SolverConfig::default().with_sparsity(s);
        let res = irls_tlp(&a, &y, &pp(1.0, 0.7), &cfg).unwrap();
        prop_assert!(res.eps_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(res.final_eps <= *res.eps_trace.last().unwrap());
        prop_assert!(res.max_inner_ascent <= 1e-10);
        if res.converged == Convergence::SparsityReached {
            prop_assert!(tail_magnitude(&res.x, s) < cfg.outer_tol_mag);
        }
        prop_assert_eq!(&res, &irls_tlp(&a, &y, &pp(1.0, 0.7), &cfg).unwrap());
    }

    #[test]
    fn constrained_penalty_stays_below_initial_j(seed in any::<u64>(), s in 1usize..5) {
        let a = gen_gaussian(16, 32, 0.0, seed).unwrap().entries;
        let sig = gen_signal(32, s, seed ^ 2, SignalDist::Gaussian).unwrap();
        let y = &a * &sig.vector;
        let cfg = SolverConfig { x_update: tlp_core::solver::XUpdate::Descent, outer_max: 100, ..SolverConfig::default().with_sparsity(s) };
        let par = pp(1.0, 0.7);
        let res = irls_constrained(&a, &y, &par, &cfg).unwrap();
        let j0 = j_closed_form(&par, cfg.kappa, &DVector::zeros(32), cfg.eps0);
        prop_assert!((res.j_trace[0] - j0).abs() <= 1e-12 * j0);
        prop_assert!(res.penalty_trace.iter().all(|&pv| pv <= j0 * (1.0 + 1e-10)));
        prop_assert!(res.eps_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn gaussian_covariance_matches() {
    for (k, r) in [0.0, 0.4, 0.8].into_iter().enumerate() {
        let n = 8;
        let a: DMatrix<f64> = gen_gaussian(10_000, n, r, 40 + k as u64).unwrap().entries;
        let cov = a.tr_mul(&a) / a.nrows() as f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { r };
                assert!(
                    (cov[(i, j)] - expect).abs() < 0.05,
                    "r={r} ({i},{j}) {}",
                    cov[(i, j)]
                );
            }
        }
    }
}
