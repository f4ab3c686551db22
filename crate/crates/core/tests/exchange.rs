use cqg_core::exchange::*;
use cqg_core::spin::SpinValue;
use num_bigint::BigUint;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STEPS: [(i64, i64); 3] = [(1, 0), (0, 1), (1, 1)];

/// Walks every unit-step monotone path from `start` whose displacement stays
/// below `limit` on both axes and hands each one to `visit`.
fn walk(k: u64, start: Vertex, limit: (i64, i64), visit: &mut impl FnMut(&ExchangePath)) {
    fn go(path: &mut ExchangePath, limit: (i64, i64), visit: &mut impl FnMut(&ExchangePath)) {
        visit(path);
        let (di, dj) = path.displacement();
        for (si, sj) in STEPS {
            if di + si <= limit.0 && dj + sj <= limit.1 {
                let &(i, j) = path.vertices.last().unwrap();
                path.vertices.push((i + si, j + sj));
                go(path, limit, visit);
                path.vertices.pop();
            }
        }
    }
    let mut path = ExchangePath::new(k, vec![start]).unwrap();
    go(&mut path, limit, visit);
}

fn brute_force(k: u64, start: Vertex, everywhere: bool) -> (BigUint, BigUint, Vec<Ratio<i64>>) {
    let kk = k as i64;
    let end = (start.1, start.0);
    let target = ((start.1 - start.0).rem_euclid(kk), (start.0 - start.1).rem_euclid(kk));
    let limit = if everywhere { (kk - 1, kk - 1) } else { target };
    let (mut total, mut valid) = (0u64, 0u64);
    let mut sums = Vec::new();
    walk(k, start, limit, &mut |path| {
        let c = is_valid_exchange_path(path, start, end).unwrap();
        if path.displacement() == target {
            total += 1;
        }
        if c.is_valid() {
            assert_eq!(path.displacement(), target, "valid path off the exchange target");
            valid += 1;
            let w = winding_sum(path, start, end).unwrap();
            if !sums.contains(&w) {
                sums.push(w);
            }
        }
    });
    (total.into(), valid.into(), sums)
}

#[test]
fn counts_match_depth_first_oracle() {
    for (k, everywhere) in [(4u64, true), (8, false)] {
        for a in 0..k as i64 {
            for b in 0..k as i64 {
                if a == b {
                    continue;
                }
                let report = enumerate_exchange_paths(k, (a, b), DEFAULT_ENUMERATION_BOUND, BoundaryRule::Strict).unwrap();
                let (total, valid, sums) = brute_force(k, (a, b), everywhere);
                assert_eq!(report.n_total, total, "K={k} start=({a},{b})");
                assert_eq!(report.n_valid, valid, "K={k} start=({a},{b})");
                assert_eq!(report.winding_sums, sums);
            }
        }
    }
}

#[test]
fn every_valid_exchange_winds_once() {
    for k in [4u64, 8, 16, 32, 64] {
        for a in 0..k as i64 {
            for b in 0..k as i64 {
                let r = enumerate_exchange_paths(k, (a, b), DEFAULT_ENUMERATION_BOUND, BoundaryRule::Strict).unwrap();
                if a == b {
                    assert_eq!(r.n_valid, BigUint::from(0u8));
                    continue;
                }
                assert!(r.n_valid > BigUint::from(0u8), "K={k} start=({a},{b})");
                assert_eq!(r.winding_sums, vec![Ratio::from_integer(1)], "K={k} start=({a},{b})");
            }
        }
    }
}

#[test]
fn phase_is_a_homomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let half = SpinValue::from_two_s(1);
    for t in 0..1000 {
        let n = 1 + t % 9;
        let p = Permutation::random(n, &mut rng);
        let q = Permutation::random(n, &mut rng);
        let pq = p.compose(&q);
        assert_eq!(
            action_jump(half, &pq).phase,
            action_jump(half, &p).phase * action_jump(half, &q).phase
        );
        assert_eq!(pq.signature(), p.signature() * q.signature());
    }
}

#[test]
fn phase_follows_spin_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = Permutation::random(6, &mut rng);
        for two_s in 0..8 {
            let jump = action_jump(SpinValue::from_two_s(two_s), &p);
            let expected = if two_s % 2 == 0 { 1 } else { p.signature() };
            assert_eq!(jump.phase, expected);
        }
    }
}

fn staircase() -> impl Strategy<Value = (u64, Vertex, Vec<(i64, i64)>)> {
    (3u64..24)
        .prop_flat_map(|k| (Just(k), 0..k as i64, 1..k as i64))
        .prop_flat_map(|(k, a, gap)| {
            let b = (a + gap) % k as i64;
            let kk = k as i64;
            let di = (b - a).rem_euclid(kk);
            let dj = (a - b).rem_euclid(kk);
            (0..=di.min(dj)).prop_flat_map(move |diag| {
                let mut steps = vec![(1, 1); diag as usize];
                steps.extend(std::iter::repeat((1, 0)).take((di - diag) as usize));
                steps.extend(std::iter::repeat((0, 1)).take((dj - diag) as usize));
                (Just(k), Just((a, b)), Just(steps).prop_shuffle())
            })
        })
}

proptest! {
    #[test]
    fn decomposition_rebuilds_the_permutation(seed in any::<u64>(), n in 0usize..9) {
        let p = Permutation::random(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let parity = p.parity();
        prop_assert_eq!(parity.compose(n), p.clone());
        prop_assert_eq!(parity.k_p, p.inversions());
    }

    #[test]
    fn relabeling_preserves_classification((k, start, steps) in staircase()) {
        let mut v = vec![start];
        for (si, sj) in steps {
            let &(i, j) = v.last().unwrap();
            v.push((i + si, j + sj));
        }
        let path = ExchangePath::new(k, v).unwrap();
        let end = (start.1, start.0);
        let c = is_valid_exchange_path(&path, start, end).unwrap();
        let swapped = path.relabeled();
        prop_assert_eq!(is_valid_exchange_path(&swapped, end, start).unwrap(), c);
        prop_assert_eq!(swapped.winding(), path.winding());
        if c.is_valid() {
            prop_assert_eq!(winding_sum(&path, start, end).unwrap(), Ratio::from_integer(1));
        }
    }
}
