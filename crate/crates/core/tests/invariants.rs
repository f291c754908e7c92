use gfgt_core::gridpath::{local_minima, square, MonotonePath, PathOracle};
use gfgt_core::hardchain::chain::{rho, squash_radius};
use gfgt_core::hardchain::partition::INERT;
use gfgt_core::hardchain::{ChainOracle, ChainPartition};
use proptest::prelude::*;

fn partition() -> impl Strategy<Value = ChainPartition> {
    (1usize..6, 3usize..8, 0usize..4, any::<u64>()).prop_map(|(d0, parts, inert, seed)| {
        ChainPartition::sample_with_parts(d0 * parts + inert, d0, parts, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_disjoint_and_labelled(p in partition()) {
        let mut seen = vec![false; p.d];
        for (j, part) in p.parts.iter().enumerate() {
            prop_assert_eq!(part.len(), p.d0);
            for &s in part {
                prop_assert!(!seen[s]);
                seen[s] = true;
                prop_assert_eq!(p.part_of()[s] as usize, j);
            }
        }
        let inert = p.part_of().iter().filter(|&&l| l == INERT).count();
        prop_assert_eq!(inert, p.inert_count());
        prop_assert_eq!(p.r + 2, p.parts.len());
        prop_assert_eq!(ChainPartition::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    #[test]
    fn gradient_norm_matches_gradient(p in partition(), scale in -2.0f64..1.5, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = 10f64.powf(scale);
        let x: Vec<f64> = (0..p.d).map(|_| s * rng.random_range(-1.0..1.0)).collect();
        let oracle = ChainOracle::<f64>::unscaled(p);
        let e = oracle.analyze(&x).unwrap();
        let g = oracle.try_gradient(&x).unwrap();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((n - e.gradient_norm).abs() <= 1e-9 * (1.0 + n), "{} vs {}", n, e.gradient_norm);
        prop_assert_eq!(oracle.try_value(&x).unwrap(), e.value);
    }

    #[test]
    fn inert_coordinates_do_not_move_progress(p in partition(), seed in any::<u64>(), bump in -50.0f64..50.0) {
        prop_assume!(p.inert_count() > 0);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let oracle = ChainOracle::<f64>::unscaled(p.clone());
        let mut x: Vec<f64> = (0..p.d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let before = oracle.progress(&x).unwrap();
        // Only the squashing radius couples inert coordinates, so keep the norm fixed.
        let inert: Vec<usize> = (0..p.d).filter(|&s| p.part_of()[s] == INERT).collect();
        if inert.len() >= 2 {
            let (a, b) = (inert[0], inert[1]);
            let r = (x[a] * x[a] + x[b] * x[b]).sqrt();
            let t = bump.to_radians();
            x[a] = r * t.cos();
            x[b] = r * t.sin();
            prop_assert_eq!(oracle.progress(&x).unwrap().index, before.index);
        }
    }

    #[test]
    fn rho_contracts(d in 1usize..40, r in 1usize..20, scale in -3.0f64..6.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let s = 10f64.powf(scale);
        let x: Vec<f64> = (0..d).map(|_| s * rng.random_range(-1.0..1.0)).collect();
        let radius = squash_radius(r);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(nx > 0.0);
        let ny = rho(&x, radius).iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(ny < nx.min(radius));
    }

    #[test]
    fn path_is_monotone_with_unique_minimum(n in 1usize..12, d in 1usize..4, seed in any::<u64>()) {
        let path = MonotonePath::random(n, d, seed).unwrap();
        let vs = path.vertices();
        prop_assert_eq!(vs.len(), n + 1);
        prop_assert!(vs[0].iter().all(|&c| c == 0));
        for w in vs.windows(2) {
            let diff: Vec<usize> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            prop_assert_eq!(diff.iter().sum::<usize>(), 1);
        }
        prop_assert_eq!(MonotonePath::from_json(&path.to_json().unwrap()).unwrap(), path.clone());
        let end = path.endpoint().to_vec();
        let oracle = PathOracle::new(path);
        prop_assert_eq!(local_minima(&oracle).unwrap(), vec![end.clone()]);
        let sq = square(&end, n).unwrap();
        prop_assert!(sq.sides().iter().all(|&s| (s - 1.0 / (n + 1) as f64).abs() < 1e-12));
    }
}
