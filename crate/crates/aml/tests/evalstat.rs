mod common;

use aml::evalstat::{
    activations, classify_fewest_misses, count_misses, coin_estimate, empirical_pfp, expected_pfn_atom,
    expected_pfn_subset, load_and_transition, loss_and_gradient, selection_passes, select_atom_subset, simulate_coin,
    AtomStats, MissClassifier,
};
use aml::{Atom, BitSet, Duple, LogisticHead};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn atom(n: usize, m: u32) -> Atom {
    Atom::new(BitSet::from_indices(n, bits(m)))
}

fn discriminates(a: u32, (l, r): MaskDuple) -> bool {
    a & l != 0 && a & r == 0
}

/// Masks with a negative set every atom list discriminates.
fn selection_case() -> impl Strategy<Value = (usize, Vec<u32>, Vec<MaskDuple>)> {
    (4usize..=8).prop_flat_map(|n| {
        let m = 1u32 << n;
        (Just(n), proptest::collection::vec(1..m, 2..20), proptest::collection::vec((1..m, 1..m), 1..12))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn misses_vanish_exactly_when_the_label_is_below((n, masks) in (3usize..=8).prop_flat_map(|n| (Just(n), proptest::collection::vec(1u32..1 << n, 1..20))), t in 1u32..256, label in 0usize..8) {
        let full = (1u32 << n) - 1;
        let t = t & full;
        prop_assume!(t != 0 && label < n);
        let model = model_from_masks(n, masks.iter().copied());
        let tt = term(n, t);
        let brute = model_masks(&model).iter().filter(|&&a| a >> label & 1 == 1 && a & t == 0).count();
        prop_assert_eq!(count_misses(&model, label, &tt), brute);
        prop_assert_eq!(brute == 0, model.holds(&term(n, 1 << label), &tt));
        let labels: Vec<usize> = (0..n).collect();
        let misses: Vec<usize> = labels.iter().map(|&l| count_misses(&model, l, &tt)).collect();
        let best = classify_fewest_misses(&model, &labels, &tt);
        prop_assert_eq!(best, misses.iter().position(|m| m == misses.iter().min().unwrap()).unwrap());
        let mc = MissClassifier::new(&model, &labels);
        prop_assert_eq!(mc.misses(&tt), misses);
        prop_assert_eq!(mc.classify(&tt), best);
    }

    #[test]
    fn every_selection_pass_discriminates_every_negative((n, masks, negs) in selection_case(), delta in 0.05f64..=1.0, seed in any::<u64>()) {
        let negs: Vec<MaskDuple> = negs.into_iter().filter(|&d| masks.iter().any(|&a| discriminates(a, d))).collect();
        prop_assume!(!negs.is_empty());
        let model = model_from_masks(n, masks.iter().copied());
        let atoms = model.atoms();
        let negatives: Vec<Duple> = negs.iter().map(|&(l, r)| Duple::negative(term(n, l), term(n, r))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let passes = selection_passes(atoms, &negatives, delta, &mut rng).unwrap();
        prop_assert!(!passes.is_empty());
        for pass in &passes {
            prop_assert!(pass.len() <= negs.len());
            for &d in &negs {
                prop_assert!(pass.iter().any(|&i| discriminates(mask_of(atoms[i].upper()), d)));
            }
        }
        let labels = [0usize];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel = select_atom_subset(&model, &negatives, delta, &labels, &mut rng).unwrap();
        let chosen: std::collections::BTreeSet<u32> = passes.iter().flatten().map(|&i| mask_of(atoms[i].upper())).collect();
        let expect: std::collections::BTreeSet<u32> = chosen.into_iter().filter(|a| a & 1 == 1).collect();
        prop_assert_eq!(model_masks(&sel), expect);
    }

    #[test]
    fn pfn_is_monotone(g in 0u32..1000, h in 0u64..100_000, n in 0u64..100_000, dg in 0u32..50, dh in 0u64..500, dn in 0u64..500) {
        let p = expected_pfn_atom::<f64>(g, h, n);
        prop_assert!(expected_pfn_atom::<f64>(g, h + dh, n) <= p);
        prop_assert!(expected_pfn_atom::<f64>(g, h, n + dn) <= p);
        prop_assert!(expected_pfn_atom::<f64>(g + dg, h, n) >= p);
        prop_assert!(p > 0.0 && p <= 0.5);
    }

    #[test]
    fn subset_pfn_is_additive(stats in proptest::collection::vec((0u32..50, 0u64..5000), 0..20), j in 0u64..100_000, z in 1usize..6) {
        let stats: Vec<AtomStats> = stats.into_iter().map(|(g, h)| AtomStats { g, h, empirical_pfp: None }).collect();
        let direct: f64 = stats.iter().map(|s| (1.0 / (s.h as f64 + 1.0)).min((s.g as f64 + 1.0) / (j as f64 + 1.0))).sum();
        let l = expected_pfn_subset::<f64>(&stats, j);
        prop_assert!((l - direct).abs() <= 1e-12 * (1.0 + direct));
        let rep: Vec<AtomStats> = stats.iter().flat_map(|s| std::iter::repeat_n(*s, z)).collect();
        prop_assert!((expected_pfn_subset::<f64>(&rep, j) - z as f64 * l).abs() <= 1e-9 * (1.0 + l));
        let (l2, dt) = load_and_transition::<f64>(&stats, j);
        prop_assert_eq!(l2, l);
        prop_assert!((dt - (1.0 - (-l).exp())).abs() < 1e-15);
        prop_assert!((0.0..1.0).contains(&dt));
    }

    #[test]
    fn per_atom_pfp_matches_counting((n, masks, negs) in selection_case()) {
        let atoms: Vec<Atom> = masks.iter().map(|&m| atom(n, m)).collect();
        let negatives: Vec<Duple> = negs.iter().map(|&(l, r)| Duple::negative(term(n, l), term(n, r))).collect();
        let rep = empirical_pfp(&atoms, &negatives).unwrap();
        let k = negs.len() as f64;
        for (a, &p) in masks.iter().zip(&rep.per_atom) {
            let miss = negs.iter().filter(|&&d| !discriminates(*a, d)).count() as f64;
            prop_assert!((p - miss / k).abs() < 1e-12);
        }
        let joint = negs.iter().filter(|&&d| masks.iter().all(|&a| !discriminates(a, d))).count() as f64 / k;
        prop_assert!((rep.joint - joint).abs() < 1e-12);
        prop_assert!((rep.product - rep.per_atom.iter().product::<f64>()).abs() < 1e-12);
    }

    /// Central differences on small random heads.
    #[test]
    fn logistic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (classes, dim, count) = (rng.gen_range(2..5), rng.gen_range(1..6), rng.gen_range(1..10));
        let xs: Vec<Vec<f64>> = (0..count).map(|_| (0..dim).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect()).collect();
        let ys: Vec<usize> = (0..count).map(|_| rng.gen_range(0..classes)).collect();
        let w: Vec<f64> = (0..classes * (dim + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&w, classes, dim, &xs, &ys);
        let eps = 1e-5;
        for i in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[i] += eps;
            wm[i] -= eps;
            let fd = (loss_and_gradient(&wp, classes, dim, &xs, &ys).0 - loss_and_gradient(&wm, classes, dim, &xs, &ys).0) / (2.0 * eps);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            prop_assert!(rel <= 1e-5 || (fd - grad[i]).abs() < 1e-10, "i={} fd={} g={}", i, fd, grad[i]);
        }
    }
}

#[test]
fn miss_example_from_two_atoms() {
    // constants p, a, b
    let model = model_from_masks(3, [0b011, 0b101]);
    assert_eq!(count_misses(&model, 0, &term(3, 0b010)), 1);
    assert_eq!(count_misses(&model, 0, &term(3, 0b110)), 0);
    assert_eq!(count_misses(&model_from_masks(3, [0b010]), 0, &term(3, 0b100)), 0);
}

#[test]
fn selection_rejects_an_undiscriminated_negative() {
    let model = model_from_masks(3, [0b001]);
    let neg = Duple::negative(term(3, 0b010), term(3, 0b100));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(select_atom_subset(&model, &[neg], 0.5, &[0], &mut rng).is_err());
    assert!(empirical_pfp(model.atoms(), &[]).is_err());
}

/// Two atoms whose failures are drawn independently with rate 0.1: the
/// joint failure rate approaches the product.
#[test]
fn independent_atoms_multiply_their_pfp() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 4;
    let atoms = [atom(n, 0b0010), atom(n, 0b0100)];
    let negatives: Vec<Duple> = (0..40_000)
        .map(|_| {
            let mut r = 0b1000u32;
            for c in [1, 2] {
                if rng.gen_bool(0.1) {
                    r |= 1 << c;
                }
            }
            Duple::negative(term(n, 0b0111), term(n, r))
        })
        .collect();
    let rep = empirical_pfp(&atoms, &negatives).unwrap();
    for &p in &rep.per_atom {
        assert!((p - 0.1).abs() < 0.01, "{p}");
    }
    assert!((rep.joint - rep.product).abs() < 0.002, "{} vs {}", rep.joint, rep.product);
}

#[test]
fn coin_games_respect_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (trials, j) = (4000, 5000);
    let games: Vec<_> = (0..trials).map(|_| simulate_coin(j, 0.5, &mut rng)).collect();
    for &delta in &[1e-4, 3e-4, 1e-3, 3e-3] {
        let emp = games.iter().filter(|g| g.omega >= delta).count() as f64 / trials as f64;
        let est: Vec<f64> = games.iter().map(|g| coin_estimate(delta, g.g, g.h, j)).collect();
        let mean = est.iter().sum::<f64>() / trials as f64;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / trials as f64).sqrt();
        let se = ((emp * (1.0 - emp)).max(mean * (1.0 - mean)) / trials as f64).sqrt();
        assert!(emp <= mean + 3.0 * se + 3.0 * sd / (trials as f64).sqrt(), "delta {delta}: {emp} vs {mean}");
    }
    for g in &games {
        assert!(g.omega <= 0.5 && g.h <= j);
    }
}

#[test]
fn separable_toy_is_learned() {
    let xs: Vec<Vec<f64>> = vec![vec![1.0, -1.0, 1.0], vec![1.0, 1.0, -1.0], vec![-1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0]];
    let ys = vec![0, 0, 1, 1];
    let head = LogisticHead::fit(&xs, &ys, 2, 300, 0.1).unwrap();
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(head.predict(x).unwrap(), y);
    }
    assert!(head.predict(&[1.0]).is_err());
    assert!(LogisticHead::fit(&xs, &[0, 0, 1], 2, 1, 0.1).is_err());
    let atoms = [atom(3, 0b001), atom(3, 0b110)];
    assert_eq!(activations::<f64>(&atoms, &term(3, 0b011)), vec![1.0, 1.0]);
    assert_eq!(activations::<f32>(&atoms, &term(3, 0b001)), vec![1.0, -1.0]);
}
