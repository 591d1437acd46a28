//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any FAIL.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmdp_core::factorize::{factorize_biconnected, factorize_general, synthesize};
use rmdp_core::fixtures::{self, two_leaf_star};
use rmdp_core::generate::{generate_instance, GeneratorConfig, GeneratorMode};
use rmdp_core::gff::{gff_covariance, pinned_green, ray_knight_check};
use rmdp_core::mdp::{self, is_rmdp, RmdpCheckOptions};
use rmdp_core::solve::{
    brute_force_optimal, fundamental_matrix, gain, improve_biconnected, improve_nonarticulation,
    poisson_solve, policy_iterate_biconnected, policy_iterate_hybrid, policy_iterate_standard,
    PolicyIterationTrace,
};
use rmdp_core::structure::{self, block_decomposition};
use rmdp_core::{MdpInstance, Policy, RmdpError, Tolerances};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn tol() -> Tolerances {
    Tolerances::default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_instance(seed: u64, max_n: usize, max_m: usize) -> MdpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(2..=max_m);
    let mode = if seed.is_multiple_of(2) { GeneratorMode::Weighted } else { GeneratorMode::Blocks };
    generate_instance(&GeneratorConfig::new(mode, n, m), seed).expect("valid generator config")
}

fn random_policy(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Policy {
    let mut w = DMatrix::from_fn(n, m, |_, _| rng.random_range(0.01..1.0));
    for mut row in w.row_iter_mut() {
        let total: f64 = row.iter().sum();
        row /= total;
    }
    Policy::new(w).expect("normalized rows")
}

/// Moves 0.05 of probability in one row of one kernel so that the
/// action-independent ratio structure breaks: onto a non-neighbor when one
/// exists, otherwise between two entries of a complete graph.
fn perturb(inst: &MdpInstance, rng: &mut ChaCha8Rng) -> MdpInstance {
    let n = inst.n_states();
    let i = rng.random_range(0..n);
    let u = rng.random_range(0..inst.n_actions());
    let mut kernels = inst.kernels().to_vec();
    let row: Vec<f64> = kernels[u].row(i).iter().copied().collect();
    let largest = (0..n).max_by(|&a, &b| row[a].total_cmp(&row[b])).expect("n >= 2");
    let graph = structure::canonical_graph(inst, 1e-12).expect("generated instance");
    let target = (0..n)
        .find(|&k| k != i && !graph.has_edge(i, k))
        .unwrap_or_else(|| (0..n).find(|&k| k != i && k != largest).expect("n >= 3"));
    kernels[u][(i, largest)] -= 0.05;
    kernels[u][(i, target)] += 0.05;
    MdpInstance::new(
        inst.states().to_vec(),
        inst.actions().to_vec(),
        kernels,
        inst.rewards().clone(),
    )
    .expect("perturbation keeps rows stochastic")
}

fn criterion_1() -> Outcome {
    let opts = RmdpCheckOptions::default();
    let start = Instant::now();
    let mut policies = 0u64;
    for seed in 0..200 {
        let inst = random_instance(seed, 6, 3);
        let verdict = is_rmdp(&inst, &opts).map_err(|e| e.to_string())?;
        ensure(verdict.rmdp, || format!("generated instance {seed} rejected: {:?}", verdict.witness))?;
        policies += verdict.policies_checked;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut perturbed = 0;
    let mut seed = 1000;
    while perturbed < 50 {
        seed += 1;
        let inst = random_instance(seed, 6, 3);
        if inst.n_states() < 3 {
            continue;
        }
        let bad = perturb(&inst, &mut rng);
        let verdict = is_rmdp(&bad, &opts).map_err(|e| e.to_string())?;
        ensure(!verdict.rmdp && verdict.witness.is_some(), || {
            format!("perturbed instance {seed} accepted")
        })?;
        perturbed += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200 generated accepted ({policies} policies), 50 perturbed rejected with witness, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let inst = two_leaf_star(0.3, 0.7);
    let graph = structure::canonical_graph(&inst, 1e-12).map_err(|e| e.to_string())?;
    ensure(graph.edges() == [(0, 1), (0, 2)], || format!("edges {:?}", graph.edges()))?;
    ensure(
        factorize_biconnected(&inst, &tol()) == Err(RmdpError::NotBiconnected),
        || "biconnected factorization did not refuse".into(),
    )?;
    let f = factorize_general(&inst, &tol()).map_err(|e| e.to_string())?;
    let rebuilt = synthesize(&f, inst.rewards()).map_err(|e| e.to_string())?;
    let roundtrip = (0..2)
        .map(|u| (rebuilt.kernel(u) - inst.kernel(u)).amax())
        .fold(0.0, f64::max);
    ensure(roundtrip <= 1e-12, || format!("round trip error {roundtrip:e}"))?;
    let pi = mdp::stationary_distribution(&mdp::deterministic_kernel(&inst, &[0, 0, 0]))
        .map_err(|e| e.to_string())?;
    let want = DVector::from_vec(vec![0.5, 0.15, 0.35]);
    let gap = (&pi - &want).amax();
    ensure(gap <= 1e-12, || format!("stationary {pi:?}"))?;

    let bs = block_decomposition(&fixtures::nine_vertex_graph()).map_err(|e| e.to_string())?;
    let want_blocks: Vec<Vec<usize>> = fixtures::NINE_VERTEX_BLOCKS
        .iter()
        .map(|b| b.iter().map(|v| v - 1).collect())
        .collect();
    ensure(bs.blocks == want_blocks, || format!("blocks {:?}", bs.blocks))?;
    ensure(bs.articulation_points == [1, 2, 5], || {
        format!("articulation points {:?}", bs.articulation_points)
    })?;
    Ok(format!(
        "star edges, refusal, round trip {roundtrip:.1e}, stationary gap {gap:.1e}; nine-vertex blocks and cut vertices exact"
    ))
}

fn cesaro_fundamental(p: &DMatrix<f64>, pi: &DVector<f64>, big_k: usize) -> DMatrix<f64> {
    let n = p.nrows();
    let projector = DVector::from_element(n, 1.0) * pi.transpose();
    let mut power = DMatrix::identity(n, n);
    let mut partial = DMatrix::zeros(n, n);
    let mut mean = DMatrix::zeros(n, n);
    for k in 0..big_k {
        partial += &power - &projector;
        if k + 1 > big_k / 2 {
            mean += &partial;
        }
        power = &power * p;
    }
    mean / (big_k - big_k / 2) as f64
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_residual, mut worst_z) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let inst = random_instance(300 + seed, 6, 3);
        let pol = if seed.is_multiple_of(2) {
            random_policy(inst.n_states(), inst.n_actions(), &mut rng)
        } else {
            let actions: Vec<usize> = (0..inst.n_states()).map(|_| rng.random_range(0..inst.n_actions())).collect();
            Policy::deterministic(&actions, inst.n_actions())
        };
        let sol = poisson_solve(&inst, &pol).map_err(|e| e.to_string())?;
        worst_residual = worst_residual.max(sol.residual);
        let p = mdp::controlled_kernel(&inst, &pol).map_err(|e| e.to_string())?;
        let fm = fundamental_matrix(&p).map_err(|e| e.to_string())?;
        worst_z = worst_z.max(fm.residual(&p));
    }
    ensure(worst_residual <= 1e-10, || format!("Poisson residual {worst_residual:e}"))?;
    ensure(worst_z <= 1e-10, || format!("fundamental matrix residual {worst_z:e}"))?;
    let mut worst_series = 0.0f64;
    for seed in 0..10 {
        let inst = random_instance(400 + seed, 5, 2);
        let pol = random_policy(inst.n_states(), inst.n_actions(), &mut rng);
        let p = mdp::controlled_kernel(&inst, &pol).map_err(|e| e.to_string())?;
        let fm = fundamental_matrix(&p).map_err(|e| e.to_string())?;
        worst_series = worst_series.max((cesaro_fundamental(&p, &fm.pi, 100_000) - &fm.z).amax());
    }
    ensure(worst_series <= 1e-6, || format!("Cesaro series gap {worst_series:e}"))?;
    Ok(format!(
        "Poisson residual {worst_residual:.1e}, Z invariants {worst_z:.1e}, Cesaro gap {worst_series:.1e}"
    ))
}

fn check_trace(trace: &PolicyIterationTrace, best: f64, label: &str) -> Result<(), String> {
    ensure((trace.gain - best).abs() <= 1e-10, || {
        format!("{label}: gain {} vs optimum {best}", trace.gain)
    })?;
    ensure(trace.optimal, || format!("{label}: terminal policy fails the optimality test"))?;
    ensure(
        trace.steps.iter().all(|s| s.gain_after > s.gain_before),
        || format!("{label}: gain not strictly increasing"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut tested, mut biconnected_runs, mut steps) = (0, 0, 0);
    let mut seed = 500;
    while tested < 100 {
        seed += 1;
        let inst = random_instance(seed, 6, 3);
        if inst.deterministic_policy_count() > 729 {
            continue;
        }
        tested += 1;
        let best = brute_force_optimal(&inst, 1_000_000, &tol()).map_err(|e| e.to_string())?;
        let start_policy: Vec<usize> = (0..inst.n_states()).map(|_| rng.random_range(0..inst.n_actions())).collect();
        let std = policy_iterate_standard(&inst, &start_policy, &tol()).map_err(|e| e.to_string())?;
        check_trace(&std, best.gain, "standard")?;
        let f = factorize_general(&inst, &tol()).map_err(|e| e.to_string())?;
        let hybrid = policy_iterate_hybrid(&inst, &f, &start_policy, &tol()).map_err(|e| e.to_string())?;
        check_trace(&hybrid, best.gain, "hybrid")?;
        steps += std.steps.len() + hybrid.steps.len();
        if f.structure.n_blocks() == 1 {
            let factors = factorize_biconnected(&inst, &tol()).map_err(|e| e.to_string())?;
            let bic = policy_iterate_biconnected(&inst, &factors, &start_policy, &tol()).map_err(|e| e.to_string())?;
            check_trace(&bic, best.gain, "biconnected")?;
            biconnected_runs += 1;
            steps += bic.steps.len();
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 instances, {biconnected_runs} biconnected, {steps} steps, all at brute-force optimum, {elapsed:.2?}"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut accepted, mut biconnected, mut attempts) = (0usize, 0usize, 0usize);
    let mut seed = 600;
    while accepted < 10_000 {
        seed += 1;
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(format!("only {accepted} steps after {attempts} attempts"));
        }
        let inst = random_instance(seed, 6, 3);
        let f = factorize_general(&inst, &tol()).map_err(|e| e.to_string())?;
        let bic = if f.structure.n_blocks() == 1 {
            Some(factorize_biconnected(&inst, &tol()).map_err(|e| e.to_string())?)
        } else {
            None
        };
        for _ in 0..20 {
            let actions: Vec<usize> = (0..inst.n_states()).map(|_| rng.random_range(0..inst.n_actions())).collect();
            let before = gain(&inst, &actions).map_err(|e| e.to_string())?;
            if let Some(next) = improve_nonarticulation(&inst, &f, &actions, &tol()).map_err(|e| e.to_string())? {
                let changed: Vec<usize> = (0..actions.len()).filter(|&i| next[i] != actions[i]).collect();
                ensure(changed.len() == 1 && !f.structure.is_articulation(changed[0]), || {
                    format!("instance {seed}: change at {changed:?}")
                })?;
                let after = gain(&inst, &next).map_err(|e| e.to_string())?;
                ensure(after > before, || format!("instance {seed}: {before} -> {after}"))?;
                accepted += 1;
            }
            if let Some(factors) = &bic {
                if let Some(next) = improve_biconnected(&inst, factors, &actions, &tol()).map_err(|e| e.to_string())? {
                    let after = gain(&inst, &next).map_err(|e| e.to_string())?;
                    ensure(after > before, || format!("instance {seed}: {before} -> {after}"))?;
                    accepted += 1;
                    biconnected += 1;
                }
            }
        }
    }
    Ok(format!(
        "{accepted} accepted steps ({biconnected} biconnected rule) all increase the gain; none at articulation points"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut asym, mut min_eig, mut green, mut bias) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for seed in 0..50 {
        let inst = random_instance(700 + seed, 6, 3);
        let n = inst.n_states();
        let pol = random_policy(n, inst.n_actions(), &mut rng);
        let cov = gff_covariance(&inst, &pol).map_err(|e| e.to_string())?;
        asym = asym.max(cov.asymmetry);
        min_eig = min_eig.min(cov.min_eigenvalue);
        for k in 0..n {
            let g = pinned_green(&inst, &pol, k).map_err(|e| e.to_string())?.full();
            for i in 0..n {
                for j in 0..n {
                    let formula = cov.c[(i, j)] - cov.c[(i, k)] - cov.c[(k, j)] + cov.c[(k, k)];
                    green = green.max((g[(i, j)] - formula).abs());
                }
            }
        }
        let sol = poisson_solve(&inst, &pol).map_err(|e| e.to_string())?;
        let r = mdp::policy_rewards(&inst, &pol).map_err(|e| e.to_string())?;
        for i in 0..n {
            let h: f64 = (0..n).map(|j| cov.c[(i, j)] * cov.pi[j] * r[j]).sum();
            bias = bias.max((h - sol.bias[i]).abs());
        }
    }
    ensure(asym <= 1e-10, || format!("asymmetry {asym:e}"))?;
    ensure(min_eig >= -1e-9, || format!("min eigenvalue {min_eig:e}"))?;
    ensure(green <= 1e-8, || format!("pinned Green gap {green:e}"))?;
    ensure(bias <= 1e-10, || format!("bias reconstruction gap {bias:e}"))?;
    Ok(format!(
        "asymmetry {asym:.1e}, min eigenvalue {min_eig:.1e}, Green gap {green:.1e}, bias gap {bias:.1e}"
    ))
}

fn four_state_tree() -> MdpInstance {
    let mut cfg = GeneratorConfig::new(GeneratorMode::Weighted, 4, 2);
    cfg.edges = Some(vec![(1, 2), (2, 3), (2, 4)]);
    cfg.weights = Some(vec![1.0, 0.7, 1.6]);
    cfg.rho_min = 0.5;
    generate_instance(&cfg, 9).expect("valid generator config")
}

fn criterion_7() -> Outcome {
    const COUNT: usize = 200_000;
    const SEED: u64 = 2024;
    let inst = four_state_tree();
    let pol = Policy::uniform(4, 2);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    for k in 0..4 {
        for s in [0.5, 1.0] {
            let report = single
                .install(|| ray_knight_check(&inst, &pol, k, s, COUNT, SEED, 4.0))
                .map_err(|e| e.to_string())?;
            for st in &report.states {
                worst = worst.max(st.z_lhs_analytic).max(st.z_local_time);
                ensure(st.z_lhs_analytic <= 4.0 && st.z_local_time <= 4.0, || {
                    format!(
                        "pin {k}, s {s}, state {}: z_mean {:.2}, z_local {:.2}",
                        st.state, st.z_lhs_analytic, st.z_local_time
                    )
                })?;
            }
            reports.push(report);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    let again = ray_knight_check(&inst, &pol, 2, 1.0, COUNT, SEED, 4.0).map_err(|e| e.to_string())?;
    let first = serde_json::to_string(&reports[5]).map_err(|e| e.to_string())?;
    ensure(first == serde_json::to_string(&again).map_err(|e| e.to_string())?, || {
        "report differs between a single-threaded and a parallel run".into()
    })?;
    let full_pass = reports.iter().filter(|r| r.pass).count();
    Ok(format!(
        "8 runs x {COUNT} trajectories, max z {worst:.2}, {full_pass}/8 also pass the variance test, {elapsed:.2?} single-threaded, reproducible"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("reversibility characterization", criterion_1),
        ("reference fixtures", criterion_2),
        ("Poisson and fundamental matrix", criterion_3),
        ("optimization equivalence", criterion_4),
        ("simplified-rule soundness", criterion_5),
        ("free-field covariance", criterion_6),
        ("Ray-Knight identity", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
