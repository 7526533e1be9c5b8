//! Acceptance gate: ten numbered criteria, each printing one
//! `criterion N: PASS` / `criterion N: FAIL` line (run with
//! `cargo test --test acceptance -- --nocapture` to see them all).

use std::path::PathBuf;
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use walras::coalitions::{
    check_equal_treatment, equal_treatment_block, find_blocking_coalition, verify_coalition,
};
use walras::convexgeom::caratheodory::approx_caratheodory;
use walras::economy::{validate_curvature, ConcavityProfile, ReplicaAllocation};
use walras::equilibrium::{gamma_formula, kappa_formula, verify_eps_walrasian};
use walras::oracle::{brute_force_block, finite_diff_gradient, grid_price_search, GridSpec};
use walras::{Allocation, Consumer, Economy, UtilitySpec};

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/fixtures");
    p.push(name);
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walras"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn report(n: usize, ok: bool) {
    println!("criterion {n}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed");
}

fn edgeworth() -> Economy {
    let u = UtilitySpec::ShiftedPower {
        rho: 0.5,
        theta: 1.0,
        normalizer: 5.0,
    };
    Economy {
        num_goods: 2,
        consumers: vec![
            Consumer {
                endowment: vec![2.0, 1.0],
                utility: u.clone(),
            },
            Consumer {
                endowment: vec![1.0, 2.0],
                utility: u,
            },
        ],
    }
}

fn random_point(rng: &mut ChaCha8Rng, l: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..l).map(|_| rng.gen_range(lo..hi)).collect()
}

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ok = true;
    let mut done = 0usize;
    while done < 200 {
        let l = rng.gen_range(2..=4);
        let spec = if rng.gen_bool(0.5) {
            UtilitySpec::ShiftedPower {
                rho: rng.gen_range(0.3..0.7),
                theta: rng.gen_range(0.8..2.0),
                normalizer: rng.gen_range(1.0..6.0),
            }
        } else {
            let pieces = rng.gen_range(1..=3);
            UtilitySpec::Plc {
                coeffs: (0..pieces)
                    .map(|_| random_point(&mut rng, l, 0.2, 3.0))
                    .collect(),
                intercepts: (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        };
        let x = random_point(&mut rng, l, 0.1, 4.0);
        // skip points sitting on (or numerically near) a kink, where the
        // finite-difference stencil straddles two pieces
        if let UtilitySpec::Plc { coeffs, intercepts } = &spec {
            let vals: Vec<f64> = coeffs
                .iter()
                .zip(intercepts)
                .map(|(a, b)| a.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() + b)
                .collect();
            let mut sorted = vals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if sorted.len() > 1 && sorted[1] - sorted[0] < 1e-3 {
                continue;
            }
        }
        let analytic = spec.supergradient(&x).unwrap();
        let fd = finite_diff_gradient(&spec, &x, 1e-5).unwrap();
        let scale = analytic.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
        let err = analytic
            .iter()
            .zip(&fd)
            .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()));
        if err / scale > 1e-6 {
            ok = false;
        }
        done += 1;
    }
    report(1, ok);
}

#[test]
fn criterion_02_symmetric_equilibrium_accepted() {
    let out = run(&[
        "test",
        &fixture("edgeworth.json"),
        &fixture("edgeworth_equilibrium.json"),
        "--epsilon",
        "0.05",
    ]);
    let mut ok = out.status.code() == Some(0);
    if ok {
        let v = stdout_json(&out);
        ok &= v["verdict"] == "yes";
        let price: Vec<f64> = serde_json::from_value(v["price"].clone()).unwrap_or_default();
        ok &= price.len() == 2 && (price[0] - 0.5).abs() <= 0.05 && (price[1] - 0.5).abs() <= 0.05;
        ok &= v["report"]["ok"] == true;
        if ok {
            // independent re-verification at the returned price
            let e = edgeworth();
            let alloc = Allocation {
                bundles: vec![vec![1.5, 1.5], vec![1.5, 1.5]],
            };
            ok &= verify_eps_walrasian(&e, &alloc, &price, 0.05).unwrap().ok;
        }
    }
    report(2, ok);
}

#[test]
fn criterion_03_irrational_allocation_rejected() {
    let out = run(&[
        "test",
        &fixture("edgeworth.json"),
        &fixture("edgeworth_irrational.json"),
        "--epsilon",
        "0.1",
    ]);
    let mut ok = out.status.code() == Some(0);
    if ok {
        ok &= stdout_json(&out)["verdict"] == "no";
    }
    if ok {
        let e = edgeworth();
        let alloc = Allocation {
            bundles: vec![vec![2.9, 2.9], vec![0.1, 0.1]],
        };
        let grid = GridSpec::new(1e-3, 6.0).unwrap();
        let found = grid_price_search(&e, &alloc, 0.1 * 0.95, &grid).unwrap();
        ok &= found.is_none();
    }
    report(3, ok);
}

#[test]
fn criterion_04_constructive_blocking() {
    let e = edgeworth();
    let alloc = Allocation {
        bundles: vec![vec![2.9, 2.9], vec![0.1, 0.1]],
    };
    let search = find_blocking_coalition(&e, &alloc, 0.1, 0.01, 8, 7).unwrap();
    let mut ok = false;
    if let Some(c) = &search.coalition {
        ok = c.size <= 8
            && verify_coalition(&e, c, true).unwrap()
            && c.surplus.iter().all(|&s| s < 0.0);
    }
    let brute = brute_force_block(&e, &alloc, 1, 0.01, 3).unwrap();
    ok &= brute.is_some();
    if let Some(c) = &brute {
        ok &= verify_coalition(&e, c, false).unwrap();
    }
    report(4, ok);
}

#[test]
fn criterion_05_caratheodory_error_bounds() {
    let mut ok = true;
    // 100 trials in R^5, 20 points of norm <= 3, k = 100: error <= 2*3/10
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial);
        let points: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let raw = random_point(&mut rng, 5, -1.0, 1.0);
                let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                let r = rng.gen_range(0.0..3.0);
                raw.iter().map(|v| v * r / n).collect()
            })
            .collect();
        let mut weights = random_point(&mut rng, 20, 0.0, 1.0);
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        let combo = approx_caratheodory(&points, &weights, 100, trial).unwrap();
        ok &= combo.error <= 0.6;
        // with k = ceil(8 * gamma^2 / delta^2) = 72 for gamma = 3, delta = 1,
        // the error must drop below delta
        let combo72 = approx_caratheodory(&points, &weights, 72, trial).unwrap();
        ok &= combo72.error < 1.0;
    }
    report(5, ok);
}

#[test]
fn criterion_06_plc_equilibrium_and_rejection() {
    let out = run(&[
        "test",
        &fixture("plc.json"),
        &fixture("plc_endowments.json"),
        "--epsilon",
        "0.05",
        "--mode",
        "plc",
    ]);
    let mut ok = out.status.code() == Some(0);
    if ok {
        let v = stdout_json(&out);
        ok &= v["verdict"] == "yes";
        let price: Vec<f64> = serde_json::from_value(v["price"].clone()).unwrap_or_default();
        // supporting prices for this fixture form the segment
        // p1 in [1/3, 2/3] (p2 = 1 - p1): consumer 1 demands good 1 iff
        // 2/p1 >= 1/p2, consumer 2 demands good 2 iff 2/p2 >= 1/p1
        ok &= price.len() == 2 && price[0] >= 1.0 / 3.0 - 0.05 && price[0] <= 2.0 / 3.0 + 0.05;
        ok &= v["report"]["ok"] == true;
    }
    let dominated = run(&[
        "test",
        &fixture("plc.json"),
        &fixture("plc_swapped.json"),
        "--epsilon",
        "0.05",
        "--mode",
        "plc",
    ]);
    ok &= dominated.status.code() == Some(0) && stdout_json(&dominated)["verdict"] == "no";
    report(6, ok);
}

#[test]
fn criterion_07_equal_treatment_block() {
    let e = edgeworth();
    let alloc = ReplicaAllocation {
        n: 2,
        bundles: vec![
            vec![2.5, 0.5],
            vec![1.0, 2.0],
            vec![1.5, 1.5],
            vec![1.0, 2.0],
        ],
    };
    // the first type (index 0) receives unequal bundles across its copies
    let mut ok = check_equal_treatment(&e, &alloc).unwrap() == Some(0);
    let block = equal_treatment_block(&e, &alloc).unwrap();
    ok &= block.size == e.num_consumers();
    ok &= verify_coalition(&e, &block, false).unwrap();
    report(7, ok);
}

#[test]
fn criterion_08_demand_side_conversion() {
    let mut ok = true;
    for (econ, alloc) in [
        ("edgeworth.json", "edgeworth_equilibrium.json"),
        ("plc.json", "plc_endowments.json"),
    ] {
        let out = run(&[
            "convert",
            &fixture(econ),
            &fixture(alloc),
            &fixture("price_half.json"),
            "--epsilon",
            "0.05",
        ]);
        ok &= out.status.code() == Some(0);
        if ok {
            let v = stdout_json(&out);
            ok &= v["ok"] == true;
            ok &= v["eps_hat"].as_f64().unwrap_or(0.0) >= 0.05;
        }
    }
    // closed-form check of the first branch of the eps_hat formula
    let v: f64 = 0.2 * 0.1 * 2.0f64.sqrt() / 2.0;
    ok &= (v - 0.01414).abs() < 1e-5;
    report(8, ok);
}

#[test]
fn criterion_09_parameter_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ok = true;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-300);
    for _ in 0..20 {
        let lambda = rng.gen_range(0.01..2.0);
        let l = rng.gen_range(2..=5usize);
        let h = rng.gen_range(2..=6usize);
        let eps = rng.gen_range(0.01..0.5);
        let alpha = rng.gen_range(1e-6..0.5);
        let delta = eps / h as f64;
        let n = rng.gen_range(1.0..8.0);
        let r = rng.gen_range(1.0..100.0);
        let theta = rng.gen_range(0.5..3.0);

        let gamma_ref = (2.0 * (lambda * l as f64 * delta + 1.0) / alpha).sqrt();
        ok &= close(gamma_formula(lambda, l, delta, alpha), gamma_ref);

        let kappa_ref =
            (16.0 / alpha * (lambda * l as f64 * h as f64 / eps + (h as f64 / eps).powi(2))).ceil();
        ok &= close(kappa_formula(alpha, lambda, l, h, eps), kappa_ref);

        let spec = UtilitySpec::ShiftedPower {
            rho: 0.5,
            theta,
            normalizer: n,
        };
        let alpha_ref = 1.0 / (4.0 * n * (r + theta).powf(1.5));
        ok &= close(spec.strong_concavity(r).unwrap().alpha, alpha_ref);

        let profile = ConcavityProfile {
            alpha,
            radius: r,
            lipschitz: lambda,
        };
        let rep = validate_curvature(&profile, eps, l, h);
        let rhs_ref = 2.0 * eps * lambda * l as f64 / h as f64 + 2.0;
        ok &= close(rep.lhs, alpha * r * r)
            && close(rep.rhs, rhs_ref)
            && rep.ok == (alpha * r * r >= rhs_ref);
    }
    report(9, ok);
}

#[test]
fn criterion_10_randomized_consistency_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ok = true;
    let mut yes = 0usize;
    let mut no = 0usize;
    for trial in 0..50 {
        let h = rng.gen_range(2..=3usize);
        let symmetric = trial % 2 == 0;
        let shared = UtilitySpec::ShiftedPower {
            rho: rng.gen_range(0.35..0.65),
            theta: rng.gen_range(0.8..2.0),
            normalizer: 1.0,
        };
        let (endowments, bundles): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if symmetric {
            // identical consumers at the equal split, endowments a zero-sum
            // perturbation of it: a genuine equilibrium with tiny budget gaps
            let split = random_point(&mut rng, 2, 0.8, 3.0);
            let mut ends = vec![split.clone(); h];
            for g in 0..2 {
                let noise: Vec<f64> = (0..h).map(|_| rng.gen_range(-0.02..0.02)).collect();
                let mean = noise.iter().sum::<f64>() / h as f64;
                for (i, e) in ends.iter_mut().enumerate() {
                    e[g] += noise[i] - mean;
                }
            }
            (ends, vec![split; h])
        } else {
            let ends: Vec<Vec<f64>> = (0..h)
                .map(|_| random_point(&mut rng, 2, 0.5, 3.0))
                .collect();
            let mut total = [0.0; 2];
            for e in &ends {
                for g in 0..2 {
                    total[g] += e[g];
                }
            }
            let mut bs = vec![vec![0.0; 2]; h];
            for g in 0..2 {
                let mut w = random_point(&mut rng, h, 0.05, 1.0);
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                for (i, b) in bs.iter_mut().enumerate() {
                    b[g] = total[g] * w[i];
                }
            }
            (ends, bs)
        };
        let consumers: Vec<Consumer> = endowments
            .into_iter()
            .map(|endowment| Consumer {
                endowment,
                utility: if symmetric {
                    shared.clone()
                } else {
                    UtilitySpec::ShiftedPower {
                        rho: rng.gen_range(0.35..0.65),
                        theta: rng.gen_range(0.8..2.0),
                        normalizer: 1.0,
                    }
                },
            })
            .collect();
        let economy = Economy {
            num_goods: 2,
            consumers,
        }
        .normalize(0.2)
        .unwrap();
        let alloc = Allocation { bundles };
        let eps = rng.gen_range(0.1..0.25);
        match walras::test_walrasian(&economy, &alloc, eps, walras::Mode::Auto) {
            Ok(walras::equilibrium::Verdict::Yes { price, .. }) => {
                yes += 1;
                if !verify_eps_walrasian(&economy, &alloc, &price, eps)
                    .map(|r| r.ok)
                    .unwrap_or(false)
                {
                    ok = false;
                }
            }
            Ok(walras::equilibrium::Verdict::No { .. }) => {
                no += 1;
                let grid = GridSpec::new(1e-3, 6.0).unwrap();
                match grid_price_search(&economy, &alloc, eps * 0.95, &grid) {
                    Ok(None) => {}
                    _ => ok = false,
                }
            }
            Err(_) => ok = false,
        }
    }
    println!("criterion 10 sweep: {yes} yes / {no} no");
    report(10, ok);
}
