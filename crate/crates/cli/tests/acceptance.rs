//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gamma_osdp::linalg::{effective_resistance, Edge, Graph, SymMatrix};
use gamma_osdp::omc::{
    build_gamma, embed_wpq, hloss_sequence, omc_run_online, quasi_dimension_of_factorization, MistakeTrace, OmcConfig,
    QueryMode, SideInfo,
};
use gamma_osdp::osdp::{regularizer_grad, regularizer_value, strong_convexity_gap, LossCheck, OsdpProblem};
use gamma_osdp::sampling::{random_feasible, random_loss, random_pd};
use gamma_osdp::similarity::{
    clique_d_hat, cut_size, cut_size_per_class, similarity_run_online, ClassAssignment, SimilarityConfig,
};
use gamma_osdp::synth::{block_labels, clique_graph, gen_bicluster, random_labels, BiclusterSpec};
use gamma_osdp_cli::osdp::{run_osdp, LossMode, OsdpRunArgs};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT_E: f64 = 1.648_721_270_700_128_1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

/// Strong convexity constant `1/(1152 √e (β + ρε)² g²)`, with `ρ = max|Γ⁻²|`, computed from scratch.
fn oracle_s(gamma: &DMatrix<f64>, beta: f64, eps: f64, g: f64) -> f64 {
    let inv = gamma.clone().try_inverse().expect("PD");
    let rho = (&inv * &inv).abs().max();
    1.0 / (1152.0 * SQRT_E * (beta + rho * eps).powi(2) * g * g)
}

/// `−ln det(ΓWΓ + εI)` through a Cholesky factor.
fn oracle_r(gamma: &DMatrix<f64>, eps: f64, w: &SymMatrix) -> f64 {
    let n = gamma.nrows();
    let a = gamma * w.as_matrix() * gamma + DMatrix::identity(n, n) * eps;
    let l = a.cholesky().expect("PD").l();
    -2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn problem(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> OsdpProblem {
    let gamma = random_pd(n, rng);
    let beta = rng.random_range(0.5..2.0);
    let tau = rng.random_range(0.5..2.0) * n as f64;
    let g = rng.random_range(0.5..2.0);
    OsdpProblem::new(gamma, beta, tau, eps, g, 1.0).unwrap()
}

fn c1_gradient() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let eps = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let p = problem(&mut rng, n, eps);
        let w = &random_feasible(&p, &mut rng).scale(0.8) + &SymMatrix::identity(n).scale(0.1 * p.beta());
        let grad = regularizer_grad(&p, &w).unwrap();
        let h = 1e-5;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in 0..n {
                // Perturb a single entry pair symmetrically and halve the off-diagonal directional derivative.
                let mut d = SymMatrix::zeros(n);
                d.set_sym(i, j, h);
                let fd = (oracle_r(p.gamma().as_matrix(), eps, &(&w + &d)) - oracle_r(p.gamma().as_matrix(), eps, &(&w - &d)))
                    / (2.0 * h);
                let fd = if i == j { fd } else { fd / 2.0 };
                num += (fd - grad.get(i, j)).powi(2);
                den += grad.get(i, j).powi(2);
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-5 && within(Duration::from_secs(10), t), format!("max rel err {worst:.2e} over 50 instances, {t:.2?}"))
}

fn c2_strong_convexity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_gap = f64::INFINITY;
    let mut max_mismatch = 0.0_f64;
    for k in 0..1000 {
        let n = rng.random_range(1..=8);
        let eps = [0.5, 1.0, 2.0][k % 3];
        let psd = rng.random_bool(0.5);
        let p = problem(&mut rng, n, eps);
        let p = if psd { p } else { p.with_loss_check(LossCheck::L1Only) };
        let (x, y) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let l = random_loss(&p, psd, &mut rng);
        let alpha: f64 = rng.random();
        let gm = p.gamma().as_matrix();
        let s = oracle_s(gm, p.beta(), eps, p.g());
        let inner = (l.as_matrix().component_mul(&(x.as_matrix() - y.as_matrix()))).sum();
        let mix = SymMatrix::new(x.as_matrix() * alpha + y.as_matrix() * (1.0 - alpha)).unwrap();
        let gap = alpha * oracle_r(gm, eps, &x) + (1.0 - alpha) * oracle_r(gm, eps, &y)
            - 0.5 * s * alpha * (1.0 - alpha) * inner * inner
            - oracle_r(gm, eps, &mix);
        let lib = strong_convexity_gap(&p, &x, &y, &l, alpha).unwrap();
        max_mismatch = max_mismatch.max((gap - lib).abs());
        min_gap = min_gap.min(gap.min(lib));
    }
    let t = start.elapsed();
    outcome(
        min_gap >= -1e-9 && max_mismatch <= 1e-8 && within(Duration::from_secs(60), t),
        format!("min gap {min_gap:.3e}, library vs oracle {max_mismatch:.1e}, 1000 triples, {t:.2?}"),
    )
}

fn c3_h0() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::NEG_INFINITY;
    for c in 0..10 {
        let n = 2 + c % 7;
        let p = problem(&mut rng, n, [0.5, 1.0, 2.0][c % 3]);
        let h0 = p.tau() / p.epsilon();
        for _ in 0..1000 {
            let (a, b) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
            let d = regularizer_value(&p, &a).unwrap() - regularizer_value(&p, &b).unwrap();
            worst = worst.max(d - h0);
        }
    }
    outcome(worst <= 1e-8, format!("max R(W)−R(W′)−τ/ε = {worst:.3e} over 10×1000 pairs"))
}

fn c4_entry_gap() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let psd = rng.random_bool(0.5);
        let p = problem(&mut rng, n, 1.0);
        let p = if psd { p } else { p.with_loss_check(LossCheck::L1Only) };
        let (x, y) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let l = random_loss(&p, psd, &mut rng);
        let mut lhs = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let den = x.get(i, i) + y.get(i, i) + x.get(j, j) + y.get(j, j);
                if den > 0.0 {
                    lhs = lhs.max((x.get(i, j) - y.get(i, j)).abs() / den);
                }
            }
        }
        let inner = (l.as_matrix().component_mul(&(x.as_matrix() - y.as_matrix()))).sum();
        worst = worst.max(inner.abs() / (4.0 * p.beta() * p.g()) - lhs);
    }
    outcome(worst <= 1e-9, format!("max rhs−lhs {worst:.3e} over 1000 triples"))
}

fn osdp_args(seed: u64) -> OsdpRunArgs {
    OsdpRunArgs {
        n: 8,
        t: 400,
        beta: 1.0,
        tau: Some(8.0),
        epsilon: 1e-3,
        g: 1.0,
        eta: None,
        eta_tuned: true,
        loss_mode: LossMode::Psd,
        support: 2,
        gamma_file: None,
        seed,
        out_dir: Default::default(),
    }
}

/// Returns the outcome and the worst iterate violation of the runs.
fn c5_regret() -> (Outcome, f64) {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_violation = 0.0_f64;
    let mut parts = Vec::new();
    for seed in 0..5 {
        let a = osdp_args(seed);
        let out = run_osdp(&a).unwrap();
        let p = &out.problem;
        // 2√(H₀T/s) with H₀ = τ/ε and s from the explicit constant.
        let s = oracle_s(p.gamma().as_matrix(), p.beta(), p.epsilon(), p.g());
        let bound = 2.0 * (p.tau() / p.epsilon() * a.t as f64 / s).sqrt();
        let regret = out.regret(a.t);
        let half = a.t / 2;
        let ts: Vec<usize> = (half..=a.t).step_by(10).collect();
        let ratio: Vec<f64> = ts.iter().map(|&t| out.regret(t) / t as f64).collect();
        let (mt, mr) = (ts.iter().sum::<usize>() as f64 / ts.len() as f64, ratio.iter().sum::<f64>() / ratio.len() as f64);
        let slope = ts.iter().zip(&ratio).map(|(&t, r)| (t as f64 - mt) * (r - mr)).sum::<f64>()
            / ts.iter().map(|&t| (t as f64 - mt).powi(2)).sum::<f64>();
        let decreasing = slope < 0.0 && ratio[ratio.len() - 1] < ratio[0];
        ok &= regret <= bound && decreasing;
        worst_violation = worst_violation.max(out.max_violation);
        parts.push(format!("seed {seed}: {regret:.1} ≤ {bound:.0}, R/t {:.3}→{:.3}", ratio[0], ratio[ratio.len() - 1]));
    }
    let t = start.elapsed();
    ok &= within(Duration::from_secs(300), t);
    (outcome(ok, format!("{}; {t:.2?}", parts.join("; "))), worst_violation)
}

struct OmcResult {
    outcome: Outcome,
    violation: f64,
}

fn plateau(trace: &MistakeTrace, rounds: usize) -> bool {
    10 * trace.mistakes_between(rounds / 2, rounds) <= trace.total_mistakes
}

fn c7_omc() -> OmcResult {
    let start = Instant::now();
    let rounds = 2000;
    let gamma = 1.0 / 3f64.sqrt();
    let mut hloss_zero = true;
    let mut plateau_ok = true;
    let mut contract_ok = true;
    let mut violation = 0.0_f64;
    let (mut side, mut ident) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let inst = gen_bicluster(&BiclusterSpec { m: 30, n: 30, k: 3, l: 3, seed, noise_rate: 0.0 }).unwrap();
        let with = OmcConfig::new(inst.side_info().unwrap(), gamma, inst.d_hat_bound);
        let without = OmcConfig::new(SideInfo::identity(30, 30), gamma, 60.0);
        let (seq, tw) = omc_run_online(&with, &inst.u, rounds, 100 + seed, QueryMode::Uniform).unwrap();
        let (seq_i, ti) = omc_run_online(&without, &inst.u, rounds, 100 + seed, QueryMode::Uniform).unwrap();
        let (p, q) = inst.planted_factors();
        hloss_zero &= hloss_sequence(&seq, &p, &q, gamma).unwrap() == 0.0;
        hloss_zero &= hloss_sequence(&seq_i, &p, &q, gamma).unwrap() == 0.0;
        plateau_ok &= plateau(&tw, rounds);
        contract_ok &= tw.check_contract(gamma).is_ok() && ti.check_contract(gamma).is_ok();
        violation = violation.max(tw.max_violation).max(ti.max_violation);
        side.push(tw.total_mistakes);
        ident.push(ti.total_mistakes);
    }
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let t = start.elapsed();
    let pass = hloss_zero && mean(&side) <= mean(&ident) && plateau_ok && contract_ok && within(Duration::from_secs(900), t);
    OmcResult {
        outcome: outcome(
            pass,
            format!(
                "(a) hloss 0: {hloss_zero}; (b) mean mistakes {:.1} side info vs {:.1} identity; (c) plateau: {plateau_ok}; side {side:?}; {t:.2?}",
                mean(&side),
                mean(&ident)
            ),
        ),
        violation,
    }
}

fn c8_quasi_dimension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
        let a = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let norms: Vec<f64> = a.row_iter().map(|row| row.norm()).collect();
        DMatrix::from_fn(r, c, |i, j| a[(i, j)] / norms[i])
    };
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (m, n, d) = (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=3));
        let (mm, nn) = (random_pd(m, &mut rng), random_pd(n, &mut rng));
        let si = SideInfo::new(mm.clone(), nn.clone()).unwrap();
        let (p, q) = (normal(&mut rng, m, d), normal(&mut rng, n, d));
        let qd = quasi_dimension_of_factorization(&p, &q, &si).unwrap();
        let direct = build_gamma(&si).congruence(&embed_wpq(&p, &q).unwrap()).trace();
        // R_M Tr(PᵀMP) + R_N Tr(QᵀNQ) with R_M = max diag M⁻¹.
        let rm = mm.as_matrix().clone().try_inverse().unwrap().diagonal().max();
        let rn = nn.as_matrix().clone().try_inverse().unwrap().diagonal().max();
        let oracle = rm * (p.transpose() * mm.as_matrix() * &p).trace() + rn * (q.transpose() * nn.as_matrix() * &q).trace();
        worst = worst.max((qd - direct).abs()).max((qd - oracle).abs());
    }
    let mut id_worst = 0.0_f64;
    for _ in 0..100 {
        let (m, n, d) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=4));
        let qd = quasi_dimension_of_factorization(&normal(&mut rng, m, d), &normal(&mut rng, n, d), &SideInfo::identity(m, n)).unwrap();
        id_worst = id_worst.max((qd - (m + n) as f64).abs());
    }
    outcome(worst <= 1e-9 && id_worst <= 1e-12, format!("max |D − Tr(ΓWΓ)| {worst:.1e}; identity |D − (m+n)| {id_worst:.1e}"))
}

fn c9_graphs() -> Outcome {
    let edge = Graph::unweighted(2, &[(0, 1)]).unwrap();
    let k3 = Graph::unweighted(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let path = Graph::unweighted(3, &[(0, 1), (1, 2)]).unwrap();
    let r = [
        effective_resistance(&edge, 0, 1).unwrap() - 1.0,
        effective_resistance(&k3, 0, 2).unwrap() - 2.0 / 3.0,
        effective_resistance(&path, 0, 2).unwrap() - 2.0,
    ];
    let res_ok = r.iter().all(|d| d.abs() <= 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut cut_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(2..=15);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.3) {
                    edges.push(Edge { u, v, w: 1.0 });
                }
            }
        }
        let g = Graph::new(n, edges).unwrap();
        let k = rng.random_range(1..=n.min(5));
        let y = ClassAssignment::new(random_labels(n, k, &mut rng), k).unwrap();
        let per: usize = (0..k).map(|s| cut_size_per_class(&g, &y, s).unwrap()).sum();
        let direct = g.edges().iter().filter(|e| y.labels()[e.u] != y.labels()[e.v]).count();
        cut_ok &= per == 2 * cut_size(&g, &y).unwrap() && cut_size(&g, &y).unwrap() == direct;
    }
    outcome(res_ok && cut_ok, format!("resistance errors {:.1e} {:.1e} {:.1e}; cut identity on 100 graphs: {cut_ok}", r[0], r[1], r[2]))
}

fn c10_similarity() -> (Outcome, f64) {
    let start = Instant::now();
    let labels = block_labels(20, 2);
    let g = clique_graph(&labels, 2).unwrap();
    let y = ClassAssignment::new(labels, 2).unwrap();
    let d_hat = clique_d_hat(&g, &y).unwrap();
    let config = SimilarityConfig::new(g, y, 0.5, d_hat);
    let mut ok = true;
    let mut worst = 0.0_f64;
    let mut mistakes = Vec::new();
    for seed in 0..5 {
        let (_, trace) = similarity_run_online(&config, 1000, seed, QueryMode::Uniform).unwrap();
        ok &= trace.check_contract(0.5).is_ok() && plateau(&trace, 1000);
        worst = worst.max(trace.max_violation);
        mistakes.push((trace.total_mistakes, trace.mistakes_between(500, 1000)));
    }
    let t = start.elapsed();
    (outcome(ok, format!("(total, second half) per seed {mistakes:?}, D̂ {d_hat:.2}; {t:.2?}")), worst)
}

fn cli(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_gamma-osdp")).args(args).current_dir(dir).output().unwrap();
    out.status.code().unwrap_or(-1)
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let runs: &[(&str, &[&str])] = &[
        ("inst", &["gen-bicluster", "--m", "12", "--n", "10", "--k", "2", "--l", "3", "--t", "200", "--seed", "7", "--out-dir", "inst"]),
        ("cl", &["gen-cliques", "--sizes", "6,6", "--out-dir", "cl"]),
        ("omc", &["omc-run", "--instance-dir", "inst", "--t", "300", "--seed", "3", "--replicas", "2", "--jobs", "2", "--out-dir", "omc"]),
        ("omcseq", &["omc-run", "--instance-dir", "inst", "--from-sequence", "--identity-side-info", "--out-dir", "omcseq"]),
        ("osdp", &["osdp-run", "--n", "5", "--t", "60", "--eta-tuned", "--seed", "2", "--out-dir", "osdp"]),
        ("osdpred", &["osdp-run", "--n", "6", "--t", "60", "--eta", "0.3", "--loss-mode", "reduction", "--out-dir", "osdpred"]),
        ("sim", &["similarity-run", "--graph", "cl/graph.txt", "--labels", "cl/labels.txt", "--gamma", "0.5", "--t", "300", "--replay-prob", "0.2", "--out-dir", "sim"]),
        ("ver", &["verify", "--suite", "all", "--trials", "10", "--seed", "5", "--out-dir", "ver"]),
    ];
    let mut bad = Vec::new();
    for (dir, args) in runs {
        if cli(d, args) != 0 {
            bad.push(format!("{dir}: run failed"));
            continue;
        }
        let manifest = format!("{dir}/manifest.json");
        let again = format!("{dir}_replay");
        if cli(d, &["replay", "--manifest", &manifest, "--out-dir", &again]) != 0 {
            bad.push(format!("{dir}: replay differs"));
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { format!("{} subcommand runs replayed byte-identically", runs.len()) } else { bad.join("; ") })
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 gradient vs finite differences", c1_gradient()));
    results.push(("2 strong convexity", c2_strong_convexity()));
    results.push(("3 H0 bound", c3_h0()));
    results.push(("4 entry-gap inequality", c4_entry_gap()));
    let (c5, v5) = c5_regret();
    results.push(("5 regret vs bound", c5));
    let c7 = c7_omc();
    let (c10, v10) = c10_similarity();
    let worst = v5.max(c7.violation).max(v10);
    results.push(("6 iterate feasibility", outcome(worst <= 1e-8, format!("worst violation {worst:.2e} over runs of 5, 7 and 10"))));
    results.push(("7 side-information benefit", c7.outcome));
    results.push(("8 quasi-dimension identities", c8_quasi_dimension()));
    results.push(("9 graph oracles", c9_graphs()));
    results.push(("10 similarity run", c10));
    results.push(("11 manifest determinism", c11_determinism()));
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
