//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use aseq::commands::{evaluate, train_cmd};
use aseq::config::{load_config, RunConfig};
use aseq_core::game::{find_pure_nash, GameMatrix};
use aseq_core::geometry::Vec2;
use aseq_core::metrics::MetricsReport;
use aseq_core::payoff::{adaptive_safety_weight, comfort_payoff, efficiency_payoff, safety_payoff, PayoffParams, WeightMode};
use aseq_core::qlearn::{greedy, train_env, Environment, LearnerParams, QTable, Transition};
use aseq_core::scenarios::{make_case_with, run_case, CaseId};
use aseq_core::tom::{variable_elimination, BeliefNetwork, Node, Variable};
use aseq_core::training::train;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRAIN_SEED: u64 = 42;
const EVAL_SEEDS: u64 = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn calibrated() -> RunConfig {
    load_config(&repo_file("configs/calibrated.toml")).expect("calibrated config parses")
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs_f64() < limit_s as f64, format!("{:.1} s (limit {limit_s} s)", elapsed.as_secs_f64()))
}

/// Trained intersection table shared by criteria 1, 2 and 9.
fn trained_table(dir: &Path) -> QTable {
    train_cmd(Some(&repo_file("configs/calibrated.toml")), TRAIN_SEED, &dir.join("train"), None)
        .expect("training runs")
        .table
}

fn eval(id: CaseId, cfg: &RunConfig, q: &QTable) -> Vec<MetricsReport> {
    evaluate(id, cfg, Path::new("."), Some(q), EVAL_SEEDS).expect("evaluation runs")
}

fn safety_outcome(cfg: &RunConfig, q: &QTable, start: Instant) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    let collision_radius = make_case_with(CaseId::D50, cfg.decider()).scenario.collision_radius;
    for id in [CaseId::B, CaseId::C, CaseId::D25, CaseId::D50] {
        let m = eval(id, cfg, q);
        let collisions = m.iter().filter(|m| m.collided).count();
        let dmin = m.iter().map(|m| m.min_distance).fold(f64::INFINITY, f64::min);
        pass &= collisions == 0;
        if id == CaseId::D50 {
            pass &= dmin > collision_radius;
        }
        parts.push(format!("{id} {collisions}/{EVAL_SEEDS} collisions dmin {dmin:.2} m"));
    }
    let (fast, t) = within(start.elapsed(), 120);
    verdict(pass && fast, format!("{}; collision radius {collision_radius} m; {t}", parts.join(", ")))
}

fn ablation_ordering(cfg: &RunConfig, q: &QTable) -> Verdict {
    let v: Vec<f64> = [CaseId::A, CaseId::B, CaseId::C]
        .into_iter()
        .map(|id| mean(eval(id, cfg, q).iter().map(|m| m.min_speed)))
        .collect();
    let (a, b, c) = (v[0], v[1], v[2]);
    let pass = c > b && b > a && (1.5..=3.5).contains(&c);
    verdict(pass, format!("mean min speed A {a:.3}, B {b:.3}, C {c:.3} m/s over {EVAL_SEEDS} seeds (need C > B > A, C in [1.5, 3.5])"))
}

/// Least-squares slope of `ys` against their index.
fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn convergence(cfg: &RunConfig) -> Verdict {
    let start = Instant::now();
    let params = LearnerParams { episodes: 500, ..cfg.learner };
    let (_, curve) = train(&cfg.decider(), &aseq_core::tom::default_malice_network(), cfg.scenario, &params, TRAIN_SEED, None).unwrap();
    let tail = &curve[curve.len() - 100..];
    let s = slope(tail);
    let m = mean(tail.iter().copied());
    let (fast, t) = within(start.elapsed(), 300);
    verdict(
        fast && s.abs() < 0.01 * m.abs(),
        format!("last-100 slope {s:.2e}/episode vs 1% of mean {m:.4} = {:.2e}; {t}", 0.01 * m.abs()),
    )
}

fn nash_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let actions = vec![-4.0, -2.0, 0.0, 1.0, 2.0];
    let mut mismatches = 0;
    for g in 0..1000 {
        let mut draw = |_| if g % 2 == 0 { rng.random_range(0..4) as f64 * 0.25 } else { rng.random::<f64>() };
        let u_ego: Vec<f64> = (0..25).map(&mut draw).collect();
        let u_target: Vec<f64> = (0..25).map(&mut draw).collect();
        let m = GameMatrix::from_tables(actions.clone(), actions.clone(), u_ego, u_target);
        let mut brute = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                if (0..5).all(|k| m.u_ego(k, j) <= m.u_ego(i, j)) && (0..5).all(|k| m.u_target(i, k) <= m.u_target(i, j)) {
                    brute.push((i, j));
                }
            }
        }
        mismatches += (find_pure_nash(&m) != brute) as usize;
    }
    let (fast, t) = within(start.elapsed(), 5);
    verdict(fast && mismatches == 0, format!("{mismatches}/1000 games differ from brute force; {t}"))
}

fn random_network(rng: &mut ChaCha8Rng) -> BeliefNetwork {
    let n = rng.random_range(1..=12usize);
    let mut cards: Vec<usize> = Vec::new();
    let mut nodes = Vec::new();
    for i in 0..n {
        let card = rng.random_range(2..=3usize);
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.3)).collect();
        parents.truncate(3);
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let mut cpt = Vec::new();
        for _ in 0..rows {
            let w: Vec<f64> = (0..card).map(|_| rng.random::<f64>() + 0.01).collect();
            let z: f64 = w.iter().sum();
            cpt.extend(w.iter().map(|x| x / z));
        }
        let states: Vec<String> = (0..card).map(|s| s.to_string()).collect();
        let states: Vec<&str> = states.iter().map(String::as_str).collect();
        nodes.push(Node {
            variable: Variable::new(&format!("v{i}"), &states),
            parents,
            cpt,
        });
        cards.push(card);
    }
    BeliefNetwork::new(nodes).unwrap()
}

fn enumerate(bn: &BeliefNetwork, query: usize, evidence: &[(usize, usize)]) -> Vec<f64> {
    let nodes = bn.nodes();
    let cards: Vec<usize> = nodes.iter().map(|n| n.variable.cardinality()).collect();
    let total: usize = cards.iter().product();
    let mut out = vec![0.0; cards[query]];
    for mut code in 0..total {
        let mut x = vec![0; cards.len()];
        for (v, &c) in cards.iter().enumerate() {
            x[v] = code % c;
            code /= c;
        }
        if !evidence.iter().all(|&(v, s)| x[v] == s) {
            continue;
        }
        let mut p = 1.0;
        for (i, node) in nodes.iter().enumerate() {
            let row = node.parents.iter().fold(0, |r, &par| r * cards[par] + x[par]);
            p *= node.cpt[row * cards[i] + x[i]];
        }
        out[x[query]] += p;
    }
    let z: f64 = out.iter().sum();
    out.iter().map(|v| v / z).collect()
}

fn inference_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let bn = random_network(&mut rng);
        let query = rng.random_range(0..bn.len());
        let mut evidence = Vec::new();
        for v in 0..bn.len() {
            if v != query && rng.random_bool(0.3) {
                evidence.push((v, rng.random_range(0..bn.cardinality(v))));
            }
        }
        let ve = variable_elimination(&bn, query, &evidence).unwrap();
        for (a, b) in ve.iter().zip(enumerate(&bn, query, &evidence)) {
            worst = worst.max((a - b).abs());
        }
    }
    let (fast, t) = within(start.elapsed(), 30);
    verdict(fast && worst <= 1e-9, format!("max |VE - enumeration| = {worst:.1e} over 200 networks; {t}"))
}

struct Chain(u8);

fn chain_step(s: u8, a: usize) -> (f64, Option<u8>) {
    match (s, a) {
        (2, 1) => (1.0, None),
        (s, 1) => (0.0, Some(s + 1)),
        (0, _) => (0.05, Some(0)),
        (s, _) => (0.0, Some(s - 1)),
    }
}

impl Environment for Chain {
    type State = u8;
    fn n_actions(&self) -> usize {
        2
    }
    fn reset(&mut self, _: usize, rng: &mut dyn RngCore) -> u8 {
        self.0 = rng.random_range(0..3);
        self.0
    }
    fn step(&mut self, a: usize, _: &mut dyn RngCore) -> aseq_core::Result<Transition<u8>> {
        let (reward, next) = chain_step(self.0, a);
        if let Some(n) = next {
            self.0 = n;
        }
        Ok(Transition { reward, next })
    }
}

fn toy_mdp() -> Verdict {
    let start = Instant::now();
    let gamma = 0.9;
    let mut vi = [[0.0f64; 2]; 3];
    for _ in 0..2000 {
        let v: Vec<f64> = vi.iter().map(|r| r[0].max(r[1])).collect();
        for s in 0..3u8 {
            for a in 0..2 {
                let (r, n) = chain_step(s, a);
                vi[s as usize][a] = r + gamma * n.map_or(0.0, |n| v[n as usize]);
            }
        }
    }
    let params = LearnerParams {
        alpha: 0.5,
        gamma,
        epsilon_decay: 0.995,
        epsilon_floor: 0.3,
        episodes: 4000,
        ..LearnerParams::default()
    };
    let mut q: QTable<u8> = QTable::new(2);
    train_env(&mut Chain(0), &mut q, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let mut err = 0.0f64;
    let mut policy_ok = true;
    for s in 0..3u8 {
        for a in 0..2 {
            err = err.max((q.get(&s, a) - vi[s as usize][a]).abs());
        }
        let best = if vi[s as usize][1] > vi[s as usize][0] { 1 } else { 0 };
        policy_ok &= greedy(&q.row(&s), &[0, 1]) == best;
    }
    let (fast, t) = within(start.elapsed(), 5);
    verdict(fast && err < 1e-3 && policy_ok, format!("max |Q - Q*| = {err:.1e}, optimal policy {policy_ok}; {t}"))
}

fn payoff_invariants() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    const N: usize = 10_000;
    let mut fails = [0usize; 7];
    let names = ["weight sum", "w_s range", "payoff range", "safety/ttc", "efficiency/time", "comfort/|da|", "w_s/ttc"];
    for _ in 0..N {
        let ttc_min = rng.random_range(0.2..2.0);
        let p = PayoffParams {
            beta: rng.random_range(0.01..0.5),
            k1: rng.random_range(0.1..3.0),
            k2: rng.random_range(0.1..3.0),
            k3: rng.random_range(0.1..1.0),
            k: rng.random_range(0.1..3.0),
            ttc_min,
            ttc_crit: ttc_min + rng.random_range(2.0..8.0),
            ..PayoffParams::default()
        };
        let t: f64 = if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(1e-3..50.0) };
        let (ws, we, wc) = WeightMode::Adaptive.weights(t, &p);
        fails[0] += ((ws + we + wc - 1.0).abs() > 1e-12) as usize;
        fails[1] += !(1.0 / 3.0..=1.0).contains(&ws) as usize;
        let unit = |f: f64| (0.0..=1.0).contains(&f);
        let v = rng.random_range(0.0..30.0);
        let pos = Vec2::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
        let a_prev = rng.random_range(-5.0..3.0);
        let ok = unit(safety_payoff(v, pos, t, &p, Vec2::ZERO))
            && unit(efficiency_payoff(rng.random_range(0.0..100.0), rng.random_range(0.01..20.0), p.k2))
            && unit(comfort_payoff(a_prev, rng.random_range(-5.0..3.0), &p));
        fails[2] += !ok as usize;
        let t1 = p.ttc_min + rng.random_range(0.0..30.0);
        let dt = rng.random_range(1e-3..5.0);
        let (f1, f2) = (safety_payoff(5.0, pos, t1, &p, Vec2::ZERO), safety_payoff(5.0, pos, t1 + dt, &p, Vec2::ZERO));
        fails[3] += !(f2 > f1 || (f1 > 1.0 - 1e-12 && f2 == f1)) as usize;
        let t_min = rng.random_range(0.1..10.0);
        let tr = t_min + rng.random_range(0.0..10.0);
        fails[4] += (efficiency_payoff(tr + dt, t_min, p.k2) >= efficiency_payoff(tr, t_min, p.k2)) as usize;
        let d1 = rng.random_range(0.0..7.0);
        fails[5] += (comfort_payoff(a_prev, a_prev + d1 + dt.min(1.0), &p) >= comfort_payoff(a_prev, a_prev + d1, &p)) as usize;
        let tw = rng.random_range(1e-3..10.0);
        fails[6] += (adaptive_safety_weight(tw + dt, &p) > adaptive_safety_weight(tw, &p)) as usize;
    }
    let (fast, t) = within(start.elapsed(), 10);
    let failed: Vec<String> = names.iter().zip(fails).filter(|(_, f)| *f > 0).map(|(n, f)| format!("{n} {f}")).collect();
    let detail = if failed.is_empty() { "all 7 properties hold".to_string() } else { failed.join(", ") };
    verdict(fast && failed.is_empty(), format!("{detail} over {N} inputs each; {t}"))
}

fn determinism(dir: &Path) -> Verdict {
    let bin = env!("CARGO_BIN_EXE_aseq");
    let cfg = dir.join("det.toml");
    fs::write(&cfg, "[learner]\nepisodes = 40\n").unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).current_dir(dir).output().unwrap();
        o.status.code().unwrap_or(-1)
    };
    let mut codes = Vec::new();
    for tag in ["1", "2"] {
        codes.push(run(&["train", "--config", "det.toml", "--seed", "7", "--out", &format!("train{tag}")]));
        codes.push(run(&[
            "run-case",
            "--case",
            "C",
            "--qtable",
            &format!("train{tag}/qtable.json"),
            "--config",
            "det.toml",
            "--seed",
            "3",
            "--out",
            &format!("case{tag}"),
        ]));
        codes.push(run(&["corpus", "--episodes", "20", "--seed", "7", "--out", &format!("corpus{tag}")]));
        codes.push(run(&["fit-tom", "--corpus", &format!("corpus{tag}"), "--out", &format!("net{tag}")]));
    }
    let pairs = [
        ("train{}/curve.csv"),
        ("train{}/qtable.json"),
        ("case{}/trace.csv"),
        ("case{}/metrics.json"),
        ("net{}/network.json"),
    ];
    let mut differing = Vec::new();
    for p in pairs {
        let a = fs::read(dir.join(p.replace("{}", "1"))).unwrap_or_default();
        let b = fs::read(dir.join(p.replace("{}", "2"))).unwrap_or_default();
        if a.is_empty() || a != b {
            differing.push(p.replace("{}", "N"));
        }
    }
    let ok_codes = codes.iter().all(|&c| c == 0 || c == aseq::exit::COLLISION);
    verdict(
        ok_codes && differing.is_empty(),
        if differing.is_empty() {
            "train, run-case, corpus and fit-tom outputs byte-identical on rerun".to_string()
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn generalization(cfg: &RunConfig, q: &QTable) -> Verdict {
    let tune = load_config(&repo_file("configs/roundabout-finetune.toml")).expect("fine-tune config parses");
    let decider = tune.decider();
    let params = LearnerParams { episodes: 100, ..tune.learner };
    let (tuned, _) = train(&decider, &aseq_core::tom::default_malice_network(), tune.scenario, &params, TRAIN_SEED, Some(q.clone())).unwrap();
    let m = evaluate(CaseId::Roundabout, cfg, Path::new("."), Some(&tuned), EVAL_SEEDS).unwrap();
    let collisions = m.iter().filter(|m| m.collided).count();
    let case = make_case_with(CaseId::Roundabout, cfg.decider());
    let v_entry = case.scenario.ego.speed;
    // min_speed is taken near the merge point
    let drops: Vec<f64> = m.iter().map(|m| 1.0 - m.min_speed / v_entry).collect();
    let mean_drop = mean(drops.iter().copied());
    let braked = drops.iter().filter(|&&d| d >= 0.3).count();
    let nominal = run_case(&case, &aseq_core::tom::default_malice_network(), Some(&tuned), None).unwrap().metrics;
    verdict(
        collisions == 0 && mean_drop >= 0.3,
        format!(
            "{collisions}/{EVAL_SEEDS} collisions after 100 fine-tuning episodes; speed near the merge {:.0}% below the {v_entry} m/s entry speed on average, {braked}/{EVAL_SEEDS} seeds slow by 30% or more (unjittered run: min {:.2} m/s)",
            100.0 * mean_drop,
            nominal.min_speed
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = calibrated();
    let start = Instant::now();
    let q = trained_table(dir.path());
    let results = [
        ("1 safety outcome", safety_outcome(&cfg, &q, start)),
        ("2 ablation ordering", ablation_ordering(&cfg, &q)),
        ("3 convergence", convergence(&cfg)),
        ("4 nash oracle", nash_oracle()),
        ("5 inference oracle", inference_oracle()),
        ("6 toy mdp", toy_mdp()),
        ("7 payoff invariants", payoff_invariants()),
        ("8 determinism", determinism(dir.path())),
        ("9 roundabout generalization", generalization(&cfg, &q)),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
