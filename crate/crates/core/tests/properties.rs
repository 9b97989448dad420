use gamma_osdp::linalg::{psd_project, Edge, Graph, ResistanceMetric, SymMatrix};
use gamma_osdp::omc::{build_gamma, embed_wpq, normalize_rows, quasi_dimension_of_factorization, SideInfo};
use gamma_osdp::osdp::{
    normalized_entry_gap, project_k, regularizer_grad, regularizer_value, strong_convexity_gap, LossCheck,
    OsdpProblem, SolverSettings,
};
use gamma_osdp::sampling::{random_feasible, random_loss, random_pd, random_psd};
use gamma_osdp::similarity::{cut_size, cut_size_per_class, ClassAssignment};
use gamma_osdp::synth::random_labels;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(seed: u64, n: usize, eps: f64, psd: bool) -> (OsdpProblem, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = random_pd(n, &mut rng);
    let beta = rng.random_range(0.5..2.0);
    let tau = rng.random_range(0.5..2.0) * n as f64;
    let g = rng.random_range(0.5..2.0);
    let p = OsdpProblem::new(gamma, beta, tau, eps, g, 1.0).unwrap();
    let p = if psd { p } else { p.with_loss_check(LossCheck::L1Only) };
    (p, rng)
}

fn eps_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(2.0)]
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, connected: bool) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let tree = connected && v == u + 1;
            if tree || rng.random_bool(0.3) {
                edges.push(Edge { u, v, w: rng.random_range(0.5..2.0) });
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), n in 2usize..=6, eps in eps_strategy()) {
        let (p, mut rng) = problem(seed, n, eps, true);
        let w = &random_feasible(&p, &mut rng).scale(0.8) + &SymMatrix::identity(n).scale(0.1 * p.beta());
        let grad = regularizer_grad(&p, &w).unwrap();
        let d = random_psd(n, n, &mut rng);
        let d = d.scale(1.0 / d.frobenius_norm());
        let h = 1e-5;
        let fd = (regularizer_value(&p, &(&w + &d.scale(h))).unwrap() - regularizer_value(&p, &(&w - &d.scale(h))).unwrap()) / (2.0 * h);
        let an: f64 = grad.as_matrix().component_mul(d.as_matrix()).sum();
        prop_assert!((fd - an).abs() <= 1e-5 * grad.frobenius_norm().max(1e-3), "fd {} vs {}", fd, an);
    }

    #[test]
    fn regularizer_range_is_at_most_h0(seed in any::<u64>(), n in 1usize..=8, eps in eps_strategy()) {
        let (p, mut rng) = problem(seed, n, eps, true);
        let (a, b) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let d = regularizer_value(&p, &a).unwrap() - regularizer_value(&p, &b).unwrap();
        prop_assert!(d <= p.h0_bound() + 1e-8);
    }

    #[test]
    fn strong_convexity_gap_is_nonnegative(seed in any::<u64>(), n in 1usize..=8, eps in eps_strategy(), psd in any::<bool>(), alpha in 0.0f64..=1.0) {
        let (p, mut rng) = problem(seed, n, eps, psd);
        let (x, y) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let l = random_loss(&p, psd, &mut rng);
        prop_assert!(strong_convexity_gap(&p, &x, &y, &l, alpha).unwrap() >= -1e-9);
    }

    #[test]
    fn entry_gap_dominates_loss_difference(seed in any::<u64>(), n in 1usize..=8, psd in any::<bool>()) {
        let (p, mut rng) = problem(seed, n, 1.0, psd);
        let (x, y) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let l = random_loss(&p, psd, &mut rng);
        let inner: f64 = l.as_matrix().component_mul(&(x.as_matrix() - y.as_matrix())).sum();
        let lhs = normalized_entry_gap(&x, &y).unwrap();
        prop_assert!(lhs >= inner.abs() / (4.0 * p.beta() * p.g()) - 1e-9);
    }

    #[test]
    fn projection_lands_in_the_decision_set(seed in any::<u64>(), n in 1usize..=5, scale in 0.1f64..5.0) {
        let (p, mut rng) = problem(seed, n, 1.0, true);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = SymMatrix::new((&g + g.transpose()) * scale).unwrap();
        let x = project_k(&p, &a, &SolverSettings::default()).unwrap();
        prop_assert!(p.feasibility(&x).unwrap().within(&p, 1e-8));
    }

    #[test]
    fn psd_projection_is_idempotent(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = SymMatrix::new(&g + g.transpose()).unwrap();
        let once = psd_project(&a).unwrap();
        let twice = psd_project(&once).unwrap();
        prop_assert!(once.max_abs_diff(&twice) <= 1e-10);
        prop_assert!(once.min_eigenvalue().unwrap() >= -1e-10);
    }

    #[test]
    fn quasi_dimension_is_gamma_trace_of_embedding(seed in any::<u64>(), m in 1usize..=6, n in 1usize..=6, d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let si = SideInfo::new(random_pd(m, &mut rng), random_pd(n, &mut rng)).unwrap();
        let p = normalize_rows(&DMatrix::from_fn(m, d, |_, _| rng.random_range(0.1..1.0))).unwrap();
        let q = normalize_rows(&DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0) + 1.5)).unwrap();
        let qd = quasi_dimension_of_factorization(&p, &q, &si).unwrap();
        let direct = build_gamma(&si).congruence(&embed_wpq(&p, &q).unwrap()).trace();
        prop_assert!((qd - direct).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn cut_sizes_per_class_sum_to_twice_the_cut(seed in any::<u64>(), n in 1usize..=12, k in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(n);
        let g = random_graph(&mut rng, n, false);
        let y = ClassAssignment::new(random_labels(n, k, &mut rng), k).unwrap();
        let per: usize = (0..k).map(|s| cut_size_per_class(&g, &y, s).unwrap()).sum();
        prop_assert_eq!(per, 2 * cut_size(&g, &y).unwrap());
    }

    #[test]
    fn effective_resistance_is_a_metric(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, true);
        let r = ResistanceMetric::new(&g).unwrap();
        for i in 0..n {
            prop_assert!(r.between(i, i).abs() <= 1e-10);
            for j in 0..n {
                prop_assert!((r.between(i, j) - r.between(j, i)).abs() <= 1e-10);
                if i != j {
                    prop_assert!(r.between(i, j) > 0.0);
                }
                for k in 0..n {
                    prop_assert!(r.between(i, k) <= r.between(i, j) + r.between(j, k) + 1e-10);
                }
            }
        }
    }
}
