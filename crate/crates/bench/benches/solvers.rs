use criterion::{criterion_group, criterion_main, Criterion};
use walras::convexgeom::{approx_caratheodory, ellipsoid_max, hull_membership, SeparationResult};
use walras::equilibrium::{build_trade_sets, compute_params, Mode};
use walras::{Allocation, Consumer, Economy, UtilitySpec};

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

fn bench_ellipsoid(c: &mut Criterion) {
    // maximize x + y + z over the unit ball; the separating direction must
    // point toward the feasible side (the oracle keeps { pi . z > pi . q })
    let oracle = |q: &[f64]| -> walras::Result<SeparationResult> {
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 <= 1.0 {
            Ok(SeparationResult::Inside)
        } else {
            Ok(SeparationResult::Hyperplane(q.iter().map(|v| -v).collect()))
        }
    };
    let obj = vec![1.0, 1.0, 1.0];
    let center = vec![0.0, 0.0, 0.0];
    c.bench_function("ellipsoid_max_unit_ball_r3", |b| {
        b.iter(|| ellipsoid_max(&oracle, &obj, &center, 2.0, 1e-6).unwrap())
    });
}

fn bench_hull_membership(c: &mut Criterion) {
    let economy = edgeworth();
    let alloc = Allocation {
        bundles: vec![vec![1.5, 1.5], vec![1.5, 1.5]],
    };
    let params = compute_params(&economy, 0.05, Mode::Auto, None).unwrap();
    let sets = build_trade_sets(&economy, &alloc, params.base_radius(), 0.0).unwrap();
    let nu = vec![-params.delta; 2];
    c.bench_function("hull_membership_edgeworth", |b| {
        b.iter(|| hull_membership(&sets, &nu, 1e-6, 50_000).unwrap())
    });
}

fn bench_caratheodory(c: &mut Criterion) {
    let points: Vec<Vec<f64>> = (0..20)
        .map(|t| {
            (0..5)
                .map(|d| ((t * 7 + d * 3) as f64 * 0.37).sin() * 3.0)
                .collect()
        })
        .collect();
    let weights = vec![1.0 / 20.0; 20];
    c.bench_function("approx_caratheodory_20pts_k100", |b| {
        b.iter(|| approx_caratheodory(&points, &weights, 100, 1).unwrap())
    });
}

criterion_group!(
    benches,
    bench_ellipsoid,
    bench_hull_membership,
    bench_caratheodory
);
criterion_main!(benches);
