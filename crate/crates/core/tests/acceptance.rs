//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_walk::fourier::{walk_character, CharacterCycles};
use torus_walk::hyperbolic::{expansiveness_report, shadow_orbit, wrap, HyperbolicSystem};
use torus_walk::lattice::{convergence_check, invariant_subgroup};
use torus_walk::mixing::{fit_log_n, scan, ScanSpec};
use torus_walk::pipeline::{BoundOptions, BoundSetup};
use torus_walk::symbolic::{build_partition_2d, code_point, decode_word, verify_markov, TAU_AREA};
use torus_walk::walk::{
    empirical_distribution, entropy_lower_bound, exact_distribution, simulate_walk, tv_distance, Evolution, LowerBoundMode,
    ModMatrix, Torus, WalkConfig,
};
use torus_walk::{IncrementMeasure, IntMatrix};

fn fib() -> IntMatrix {
    IntMatrix::from_slice(2, 2, &[1, 1, 1, 0])
}

fn cat() -> IntMatrix {
    IntMatrix::from_slice(2, 2, &[2, 1, 1, 1])
}

fn three_point() -> IncrementMeasure {
    IncrementMeasure::uniform(vec![vec![0, 0], vec![1, 0], vec![-1, 0]]).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn fourier_exactness() -> Verdict {
    let mu = three_point();
    let mut worst: f64 = 0.0;
    for a in [fib(), cat()] {
        for n in 3u64..=9 {
            let torus = Torus::new(n, 2);
            for t in 0..=8 {
                let p = exact_distribution(&a, &mu, n, t).unwrap();
                for r0 in 0..n {
                    for r1 in 0..n {
                        let rho = [r0, r1];
                        let mut dft = Complex64::new(0.0, 0.0);
                        for idx in 0..(n * n) as usize {
                            let x = torus.decode(idx);
                            let k = (x[0] * r0 + x[1] * r1) % n;
                            dft += Complex64::from_polar(p.get(&x), std::f64::consts::TAU * k as f64 / n as f64);
                        }
                        worst = worst.max((walk_character(&mu, &a, &rho, n, t) - dft).norm());
                    }
                }
            }
        }
    }
    verdict(worst < 1e-10, format!("max deviation {worst:.2e} (tol 1e-10)"))
}

fn bound_sandwich() -> Verdict {
    let mu = three_point();
    let mut checked = 0;
    let mut failures = Vec::new();
    for a in [fib(), cat()] {
        for n in (3u64..=9).chain(11..=17) {
            let cycles = CharacterCycles::new(&mu, &a, n).unwrap();
            let mut evo = Evolution::new(&a, &mu, n).unwrap();
            for t in 0..=30 {
                evo.advance_to(t);
                let tv = evo.tv_to_uniform();
                let lower = entropy_lower_bound(&mu, n, 2, t, LowerBoundMode::Derived).raw;
                let upper = 0.5 * cycles.bound(t).sum.sqrt();
                checked += 1;
                if lower > tv + 1e-9 || tv > upper + 1e-9 {
                    failures.push(format!("n={n} t={t}: {lower} ≤ {tv} ≤ {upper}"));
                }
            }
        }
    }
    let first = failures.first().map(|f| format!(", first {f:?}")).unwrap_or_default();
    verdict(failures.is_empty(), format!("{checked} (A, n, t) triples, {} violations{first}", failures.len()))
}

/// Irreducible and aperiodic, from a BFS of the transition graph.
fn bfs_mixes(a: &IntMatrix, mu: &IncrementMeasure, n: u64) -> bool {
    let d = a.dim();
    let torus = Torus::new(n, d);
    let size = (n as usize).pow(d as u32);
    let m = ModMatrix::new(a, n);
    let steps: Vec<Vec<u64>> = mu.support().iter().map(|b| torus.reduce(b)).collect();
    let succ = |idx: usize| -> Vec<usize> {
        let ax = m.apply(&torus.decode(idx));
        steps.iter().map(|b| torus.encode(&ax.iter().zip(b).map(|(x, y)| (x + y) % n).collect::<Vec<_>>())).collect()
    };
    let mut level = vec![usize::MAX; size];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    let mut period = 0usize;
    while let Some(u) = queue.pop_front() {
        for v in succ(u) {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                period = period.gcd(&(level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    if level.contains(&usize::MAX) {
        return false;
    }
    // every state reaches 0 as well, since the step map permutes the torus
    // and the graph is regular
    period == 1
}

fn catalog() -> Vec<(IntMatrix, IncrementMeasure)> {
    let matrices = vec![
        fib(),
        cat(),
        IntMatrix::identity(2),
        IntMatrix::from_slice(2, 2, &[1, 1, 0, 1]),
        IntMatrix::from_slice(2, 2, &[0, -1, 1, 0]),
        IntMatrix::from_slice(2, 2, &[3, 2, 1, 1]),
    ];
    let measures: Vec<Vec<Vec<i64>>> = vec![
        vec![vec![0, 0], vec![1, 0]],
        vec![vec![0, 0], vec![1, 0], vec![-1, 0]],
        vec![vec![1, 0], vec![-1, 0]],
        vec![vec![0, 0], vec![2, 0], vec![0, 2]],
        vec![vec![0, 0], vec![1, 1]],
        vec![vec![1, 0], vec![0, 1]],
        vec![vec![0, 0], vec![2, 0], vec![0, 1]],
    ];
    let mut out = Vec::new();
    for a in &matrices {
        for s in &measures {
            out.push((a.clone(), IncrementMeasure::uniform(s.clone()).unwrap()));
        }
    }
    let a3 = IntMatrix::from_slice(3, 3, &[0, 0, 1, 1, 0, -1, 0, 1, 1]);
    out.push((a3.clone(), IncrementMeasure::uniform(vec![vec![0, 0, 0], vec![1, 0, 0]]).unwrap()));
    out.push((IntMatrix::identity(3), IncrementMeasure::uniform(vec![vec![0, 0, 0], vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 3]]).unwrap()));
    out
}

fn convergence_oracle() -> Verdict {
    let pairs = catalog();
    let mut mismatches = Vec::new();
    let (mut deficient, mut even) = (0, 0);
    let mut checked = 0;
    for (a, mu) in &pairs {
        let h = invariant_subgroup(a, mu).unwrap();
        if !h.is_full_rank() {
            deficient += 1;
        }
        if h.factors.iter().any(|f| f.is_even()) {
            even += 1;
        }
        for n in 2u64..=12 {
            checked += 1;
            if convergence_check(&h, n).0 != bfs_mixes(a, mu, n) {
                mismatches.push((a.to_i64_rows(), mu.support().to_vec(), n));
            }
        }
    }
    let pass = mismatches.is_empty() && pairs.len() >= 20 && deficient > 0 && even > 0;
    let first = mismatches.first().map(|m| format!(", first {m:?}")).unwrap_or_default();
    verdict(
        pass,
        format!(
            "{} pairs ({deficient} rank-deficient, {even} with even factors), {checked} moduli, {} mismatches{first}",
            pairs.len(),
            mismatches.len()
        ),
    )
}

fn scaling_experiment() -> Verdict {
    let mut ns: Vec<u64> = (0..40).map(|i| (16.0 * 64f64.powf(i as f64 / 39.0)).round() as u64).collect();
    ns.dedup();
    let spec = ScanSpec { n_values: Some(ns), ..ScanSpec::default() };
    let rows = scan(&fib(), &three_point(), &spec, 0).unwrap();
    let Some(fit) = fit_log_n(&rows) else {
        return verdict(false, "no mixing times".into());
    };
    let band = fit.ratio_max / fit.ratio_min;
    let pass = fit.points >= 35 && fit.points == rows.len() && band <= 3.0 && fit.r_squared >= 0.9;
    verdict(
        pass,
        format!(
            "{} moduli, t_mix/log n in [{:.3}, {:.3}] (ratio {band:.3}), slope {:.3}, R² {:.4}",
            fit.points, fit.ratio_min, fit.ratio_max, fit.slope, fit.r_squared
        ),
    )
}

fn partition_quality() -> Verdict {
    let system = HyperbolicSystem::new(&cat()).unwrap();
    let p = build_partition_2d(&cat(), system.expansiveness_constant()).unwrap();
    let report = verify_markov(&p.rectangles, &system, 1000, 5);
    let area = p.rectangles.iter().map(|r| r.volume()).sum::<f64>();
    let root = p.perron_root();
    let entropy_gap = (root.estimate.ln() - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs();
    let pass = (area - 1.0).abs() <= 1e-9 && report.violations == 0 && report.passed && entropy_gap < 1e-6;
    verdict(
        pass,
        format!(
            "{} rectangles, area {area:.12} (τ_area {TAU_AREA:e}), {} Markov samples, {} violations (worst {:.1e}), |log ρ − log φ²| {entropy_gap:.1e}",
            p.len(),
            report.markov_samples,
            report.violations,
            report.worst_violation
        ),
    )
}

fn dynamics_suites() -> Verdict {
    let system = HyperbolicSystem::new(&cat()).unwrap();
    let norm = &system.norm;
    let eps = system.expansiveness_constant();
    let lambda = norm.lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let v = vec![rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
        let r = norm.norm(&v);
        v.iter().map(|c| c / r).collect()
    };

    let mut pair_failures = 0;
    for _ in 0..1000 {
        let x = vec![rng.random::<f64>(), rng.random::<f64>()];
        // offsets from ε λ^12 up to ε, so horizons of all lengths occur
        let size = eps * lambda.powf(12.0 * rng.random::<f64>());
        let y = wrap(&x.iter().zip(unit(&mut rng)).map(|(a, b)| a + size * b).collect::<Vec<_>>());
        let r = expansiveness_report(&x, &y, &system, eps, 60);
        if !(r.forward_bound_holds && r.backward_bound_holds) {
            pair_failures += 1;
        }
    }

    let alpha = 0.01;
    let beta = alpha / (1.0 - lambda);
    let mut worst_shadow: f64 = 0.0;
    let mut shadow_errors = 0;
    for _ in 0..1000 {
        let mut orbit = vec![vec![rng.random::<f64>(), rng.random::<f64>()]];
        for _ in 1..60 {
            let jump = 0.999 * alpha * rng.random::<f64>();
            let next = system.apply(orbit.last().unwrap());
            orbit.push(wrap(&next.iter().zip(unit(&mut rng)).map(|(a, b)| a + jump * b).collect::<Vec<_>>()));
        }
        match shadow_orbit(&orbit, &system, alpha) {
            Ok(s) => {
                let dev = orbit.iter().zip(&s.orbit).map(|(x, y)| system.distance(x, y)).fold(0.0, f64::max);
                worst_shadow = worst_shadow.max(dev);
            }
            Err(_) => shadow_errors += 1,
        }
    }

    let p = build_partition_2d(&cat(), eps).unwrap();
    let window = 8;
    let bound = p.diameter * lambda.powi(window as i32) + 1e-9;
    let (mut coded, mut round_trip_failures) = (0, 0);
    while coded < 1000 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let w = code_point(&x, &p, &system, window);
        if w.ambiguous || w.words.is_empty() {
            continue;
        }
        coded += 1;
        match decode_word(w.word().unwrap(), window, &p) {
            Ok(dec) if dec.radius <= bound && system.distance(&dec.point, &x) <= dec.radius + 1e-9 => {}
            _ => round_trip_failures += 1,
        }
    }

    let pass = pair_failures == 0 && shadow_errors == 0 && worst_shadow <= beta + 1e-6 && round_trip_failures == 0;
    verdict(
        pass,
        format!(
            "expansiveness failures {pair_failures}/1000, largest shadow distance {worst_shadow:.5} (α/(1−λ) = {beta:.5}, {shadow_errors} refused), round-trip failures {round_trip_failures}/1000"
        ),
    )
}

fn bound_pipeline() -> Verdict {
    let (a, mu) = (fib(), three_point());
    let setup = match BoundSetup::new(&a, &mu, &BoundOptions::default()) {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("pipeline failed: {e}")),
    };
    let ns: Vec<u64> = (2..=64).collect();
    let checks = setup.block_checks(&ns).unwrap();
    let Some(n0) = checks.threshold else {
        return verdict(false, format!("block properties fail at n = 64; gamma {}", setup.certificate.gamma));
    };
    let mut worst_bound: f64 = 0.0;
    let mut below_exact = Vec::new();
    for n in n0..=64 {
        let report = setup.report(n, None).unwrap();
        worst_bound = worst_bound.max(report.bound);
        if report.tv_exact.is_some_and(|tv| tv > report.bound) {
            below_exact.push(n);
        }
    }
    let gamma = setup.certificate.gamma;
    let pass = gamma < 1.0 && worst_bound < 0.05 && below_exact.is_empty();
    verdict(
        pass,
        format!(
            "γ {gamma:.4} (η {:.4}, m0 {}, m1 {}), reported threshold n0 = {n0}, largest bound for n0..=64 {worst_bound:.4}, bound below exact TV at {below_exact:?}",
            setup.certificate.eta, setup.classification.m0, setup.classification.m1
        ),
    )
}

fn monte_carlo_calibration() -> Verdict {
    let (a, mu) = (fib(), three_point());
    let config = WalkConfig { a: a.clone(), mu: mu.clone(), n: 7, t: 20, seed: 8, replicates: 1_000_000 };
    let states = simulate_walk(&config).unwrap();
    let empirical = empirical_distribution(&states, 7, 2).unwrap();
    let exact = exact_distribution(&a, &mu, 7, 20).unwrap();
    let err = tv_distance(&empirical, &exact);
    let tol = 3.0 * (49.0f64 / 1e6).sqrt();
    verdict(err < tol, format!("TV error {err:.5} (tol {tol:.5})"))
}

type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        ("fourier exactness", fourier_exactness, Some(Duration::from_secs(10))),
        ("bound sandwich", bound_sandwich, Some(Duration::from_secs(60))),
        ("convergence oracle", convergence_oracle, None),
        ("scaling experiment", scaling_experiment, Some(Duration::from_secs(600))),
        ("partition quality", partition_quality, None),
        ("dynamics property suites", dynamics_suites, None),
        ("bound pipeline coherence", bound_pipeline, None),
        ("monte carlo calibration", monte_carlo_calibration, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = match budget {
            Some(b) => format!("{:.1}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.1}s", elapsed.as_secs_f64()),
        };
        println!("criterion {}: {} {name}: {} [{timing}]", i + 1, if pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
