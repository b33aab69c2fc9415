//! End-to-end acceptance gate. Each test covers one shipping criterion,
//! prints a single PASS line, and enforces its runtime budget.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coinduct::{
    approx_equiv, bisimilar, brute_force_optimal, cauchy_bound, derandomize, distance, merge,
    optimal_value, policy_value, prob_policy_value, pseudometric_axioms_report, recurrence_report,
    spectral_gap_estimate, split, stationary_distribution, validate_chain, Apg, Mdp, Policy,
    ProbPolicy, StochasticChain, Stream,
};

fn budget(start: Instant, limit: Duration, label: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed < limit,
        "{label}: runtime {elapsed:?} exceeded budget {limit:?}"
    );
    println!("criterion {label}: PASS ({elapsed:?})");
}

// ---- shared generators ----

fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> StochasticChain {
    // Half uniform mixing keeps every entry positive, so the chain is
    // ergodic and the subdominant eigenvalue is at most 1/2.
    let dist = Uniform::new(0.0f64, 1.0);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
        let sum: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x = 0.5 * (*x / sum) + 0.5 / n as f64;
        }
        let total: f64 = row.iter().sum();
        for x in &mut row {
            *x /= total;
        }
        rows.push(row);
    }
    validate_chain(rows).expect("generated rows are stochastic")
}

fn acceptance_chains() -> Vec<StochasticChain> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a1_2026);
    (0..10).map(|i| random_chain(&mut rng, 2 + i % 7)).collect()
}

fn random_mdp(rng: &mut ChaCha8Rng, discount: f64) -> Mdp {
    let ns = rng.gen_range(2..=4);
    let mut rewards = Vec::with_capacity(ns);
    let mut kernel = Vec::with_capacity(ns);
    for _ in 0..ns {
        let na = rng.gen_range(1..=3);
        let mut r_row = Vec::with_capacity(na);
        let mut k_row = Vec::with_capacity(na);
        for _ in 0..na {
            r_row.push(rng.gen_range(-1.0..1.0));
            let mut p: Vec<f64> = (0..ns).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = p.iter().sum();
            for x in &mut p {
                *x /= sum;
            }
            k_row.push(p);
        }
        rewards.push(r_row);
        kernel.push(k_row);
    }
    Mdp::new(rewards, kernel, discount).expect("generated model is valid")
}

fn acceptance_mdps() -> Vec<Mdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3d9_2026);
    (0..20)
        .map(|i| random_mdp(&mut rng, if i % 2 == 0 { 0.5 } else { 0.9 }))
        .collect()
}

fn all_policies(mdp: &Mdp) -> Vec<Policy> {
    let ns = mdp.num_states();
    let mut out = Vec::new();
    let mut counter = vec![0usize; ns];
    loop {
        out.push(Policy(counter.clone()));
        let mut i = 0;
        loop {
            if i == ns {
                return out;
            }
            counter[i] += 1;
            if counter[i] < mdp.num_actions(i) {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

fn random_apg(rng: &mut ChaCha8Rng) -> Apg {
    let n = rng.gen_range(1..=8);
    let mut children = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        children[parent].push(i);
    }
    for _ in 0..rng.gen_range(0..=n) {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        children[u].push(v);
    }
    Apg::new(children, 0).expect("every node reachable from the root by construction")
}

fn acceptance_apgs() -> Vec<Apg> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa9_2026);
    (0..200).map(|_| random_apg(&mut rng)).collect()
}

fn apg_pairs() -> Vec<(Apg, Apg)> {
    let graphs = acceptance_apgs();
    (0..50)
        .map(|i| (graphs[2 * i].clone(), graphs[2 * i + 1].clone()))
        .collect()
}

/// Direct stationary solve of uP = u, sum(u) = 1 by Gaussian elimination.
fn stationary_oracle(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-12, "singular stationary system");
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / a[col][col];
                for k in col..=n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---- the ten criteria ----

#[test]
fn criterion_01_banach_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xbabc_4a11);
    let mut maps: Vec<(f64, f64, f64)> = vec![(0.5, 0.0, 1.0)];
    for _ in 0..3 {
        maps.push((
            rng.gen_range(0.1..0.9),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-2.0..2.0),
        ));
    }
    for (c, b, x0) in maps {
        let mut orbit = vec![x0];
        for i in 0..61 {
            orbit.push(c * orbit[i] + b);
        }
        let d1 = (orbit[1] - orbit[0]).abs();
        for n in 0..=30u32 {
            for m in 1..=30u32 {
                let measured = (orbit[(n + m) as usize] - orbit[n as usize]).abs();
                let bound = cauchy_bound(c, n, m, d1).unwrap();
                assert!(
                    measured <= bound + 1e-12,
                    "map (c={c}, b={b}): d(u_{}, u_{n}) = {measured} > bound {bound}",
                    n + m
                );
            }
        }
    }
    budget(start, Duration::from_secs(1), "01 banach-bound");
}

#[test]
fn criterion_02_stream_inverse_laws() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x57e_2026);
    let alphabet = ['a', 'b', 'c', 'd'];
    let gens: Vec<Stream<char>> = (0..100)
        .map(|_| {
            let len = rng.gen_range(1..=8);
            Stream::cyclic((0..len).map(|_| alphabet[rng.gen_range(0..4)]).collect())
        })
        .collect();
    for s in &gens {
        let (evens, odds) = split(s);
        assert_eq!(merge(&evens, &odds).unfold(1024), s.unfold(1024));
    }
    for pair in gens.chunks(2) {
        let (s, t) = (&pair[0], &pair[1]);
        let (evens, odds) = split(&merge(s, t));
        assert_eq!(evens.unfold(1024), s.unfold(1024));
        assert_eq!(odds.unfold(1024), t.unfold(1024));
    }
    budget(start, Duration::from_secs(5), "02 stream-inverse-laws");
}

#[test]
fn criterion_03_stationary_convergence() {
    let start = Instant::now();
    for chain in &acceptance_chains() {
        let result = stationary_distribution(chain, 1e-11).unwrap();
        let oracle = stationary_oracle(chain.matrix());
        assert!(
            sup_dist(&result.u, &oracle) <= 1e-9,
            "iterated stationary vector disagrees with linear solve: {:?} vs {oracle:?}",
            result.u
        );
        assert!(result.residual <= 1e-10, "residual {} > 1e-10", result.residual);
    }
    budget(start, Duration::from_secs(5), "03 stationary-convergence");
}

#[test]
fn criterion_04_recurrence_limit() {
    let start = Instant::now();
    let chains: Vec<StochasticChain> = acceptance_chains()
        .into_iter()
        .filter(|c| spectral_gap_estimate(c, 2000) <= 0.7)
        .collect();
    assert!(!chains.is_empty(), "no chain passed the spectral-gap filter");
    for chain in &chains {
        for t in 0..chain.n() {
            let stats = recurrence_report(chain, t, 200).unwrap();
            assert!(
                stats.limit_residual <= 1e-4,
                "state {t}: |u_M - 1/mu| = {} > 1e-4",
                stats.limit_residual
            );
            assert!(
                stats.renewal_residual <= 1e-12,
                "state {t}: renewal residual {} > 1e-12",
                stats.renewal_residual
            );
        }
    }
    budget(start, Duration::from_secs(10), "04 recurrence-limit");
}

#[test]
fn criterion_05_mdp_optimality() {
    let start = Instant::now();
    for mdp in &acceptance_mdps() {
        let v_star = optimal_value(mdp, 1e-9).unwrap();
        let (oracle, _) = brute_force_optimal(mdp, 1e-9).unwrap();
        assert!(
            v_star.sup_dist(&oracle) <= 1e-7,
            "iterated optimum {:?} vs enumerated {:?}",
            v_star.0,
            oracle.0
        );
        for policy in all_policies(mdp) {
            let v = policy_value(mdp, &policy, 1e-9).unwrap();
            assert!(
                v.leq(&v_star, 1e-7),
                "policy {:?} value {:?} exceeds optimum {:?}",
                policy.0,
                v.0,
                v_star.0
            );
        }
    }
    budget(start, Duration::from_secs(30), "05 mdp-optimality");
}

#[test]
fn criterion_06_derandomization() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xde7a_2026);
    for mdp in &acceptance_mdps() {
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..mdp.num_states())
                .map(|s| {
                    let mut w: Vec<f64> =
                        (0..mdp.num_actions(s)).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let sum: f64 = w.iter().sum();
                    for x in &mut w {
                        *x /= sum;
                    }
                    w
                })
                .collect();
            let mu = ProbPolicy(rows);
            let v_mu = prob_policy_value(mdp, &mu, 1e-9).unwrap();
            let delta = derandomize(mdp, &mu, 1e-9).unwrap();
            let v_delta = policy_value(mdp, &delta, 1e-9).unwrap();
            assert!(
                v_mu.leq(&v_delta, 1e-7),
                "derandomized policy {:?} lost value: {:?} < {:?}",
                delta.0,
                v_delta.0,
                v_mu.0
            );
        }
    }
    budget(start, Duration::from_secs(30), "06 derandomization");
}

#[test]
fn criterion_07_numeral_omega_identity() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let omega_path = dir.path().join("omega.json");
    std::fs::write(&omega_path, r#"{"nodes":[0],"children":{"0":[0]},"root":0}"#).unwrap();
    for n in 0..=20usize {
        let numeral_path = dir.path().join(format!("numeral_{n}.json"));
        let mut f = std::fs::File::create(&numeral_path).unwrap();
        let nodes: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
        let children: Vec<String> = (0..=n)
            .map(|i| {
                if i < n {
                    format!("\"{i}\":[{}]", i + 1)
                } else {
                    format!("\"{i}\":[]")
                }
            })
            .collect();
        write!(
            f,
            r#"{{"nodes":[{}],"children":{{{}}},"root":0}}"#,
            nodes.join(","),
            children.join(",")
        )
        .unwrap();
        drop(f);
        let output = Command::new(env!("CARGO_BIN_EXE_coinduct"))
            .args(["nwf", "distance"])
            .arg(&numeral_path)
            .arg(&omega_path)
            .output()
            .unwrap();
        assert!(output.status.success(), "nwf distance exited nonzero at n={n}");
        let stdout = String::from_utf8(output.stdout).unwrap();
        let printed = stdout
            .lines()
            .find_map(|l| l.strip_prefix("distance: "))
            .unwrap_or_else(|| panic!("no distance line in {stdout:?}"));
        let expected = if n == 0 { "1".to_string() } else { format!("2^-{n}") };
        assert_eq!(printed, expected, "d(numeral {n}, loop) mismatch");
    }
    budget(start, Duration::from_secs(1), "07 numeral-omega-identity");
}

#[test]
fn criterion_08_pseudometric_axioms_and_separation() {
    let start = Instant::now();
    let graphs = acceptance_apgs();
    let report = pseudometric_axioms_report(&graphs);
    assert!(report.all_hold(), "axiom failures: {:?}", report.failures);
    for i in 0..graphs.len() {
        for j in i..graphs.len() {
            let zero = distance(&graphs[i], &graphs[j]).is_zero();
            let bisim = bisimilar(&graphs[i], &graphs[j]);
            assert_eq!(zero, bisim, "separation failed on pair ({i}, {j})");
        }
    }
    budget(start, Duration::from_secs(10), "08 pseudometric-axioms");
}

#[test]
fn criterion_09_tau_oracle_agreement() {
    let start = Instant::now();
    for (g1, g2) in &apg_pairs() {
        let exact = distance(g1, g2).to_f64();
        for k in [5usize, 10, 20] {
            let approx = coinduct::tau_iterate(g1, g2, k).root_value();
            assert!(
                (approx - exact).abs() <= (0.5f64).powi(k as i32),
                "tau at {k} iterations gave {approx}, exact {exact}"
            );
        }
    }
    budget(start, Duration::from_secs(10), "09 tau-oracle-agreement");
}

#[test]
fn criterion_10_level_lemma() {
    let start = Instant::now();
    for (g1, g2) in &apg_pairs() {
        let d = distance(g1, g2).to_f64();
        for n in 0..=(g1.node_count() + g2.node_count()) {
            let equiv = approx_equiv(g1, g2, n);
            let below = d <= (0.5f64).powi(n as i32);
            assert_eq!(
                equiv, below,
                "level {n}: approximants {} but d = {d}",
                if equiv { "agree" } else { "differ" }
            );
        }
    }
    budget(start, Duration::from_secs(10), "10 level-lemma");
}
