mod common;

use aml::dual::{build_dual, fraction_pinning, max_pinning, reduce_dual, Dual};
use aml::sparse::{
    enforce_trace_constraints, master_size_bound, simplify_preserving_constant_traces, sparse_cross_batch, train,
    training_error, BatchSchedule, Checkpoint, TracedModel, TrainConfig, Trainer, TrainingSet,
};
use aml::trace::{constant_traces, trace_of_term, AtomTraces};
use aml::{Axioms, BitSet, Model};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn freest_union(inst: &Instance) -> Model {
    model_from_masks(inst.n, freest_atoms(inst.n, &inst.positives))
}

/// Constant traces recomputed from scratch.
fn fresh_constant_traces(m: &Model, dual: &Dual) -> Vec<BitSet> {
    let tr = AtomTraces::compute(m.atoms(), dual);
    constant_traces(m.atoms(), tr.as_slice(), m.width(), dual.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dual_verdict_matches_closure_oracle(inst in instance_strategy(8, 8, 5), with_union in any::<bool>()) {
        let union = if with_union { freest_union(&inst) } else { Model::empty(inst.universe()) };
        let verdict = build_dual(union.atoms(), &inst.axioms(), &inst.universe());
        prop_assert_eq!(verdict.is_ok(), inst.consistent());
        if let Err(aml::Error::Inconsistent { index, .. }) = verdict {
            let (l, r) = inst.negatives[index];
            prop_assert!(entails(&inst.positives, l, r));
        }
    }

    #[test]
    fn reduction_keeps_every_negative_discriminated(inst in instance_strategy(8, 8, 6), kappa in 0.0f64..=1.0, seed in any::<u64>()) {
        prop_assume!(inst.consistent());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ax = inst.axioms();
        let dual = build_dual(freest_union(&inst).atoms(), &ax, &inst.universe()).unwrap();
        let red = reduce_dual(&dual, &ax.negatives, kappa, &mut rng);
        for r in &ax.negatives {
            prop_assert!(!red.discriminating(r).is_empty());
        }
        prop_assert!(red.len() <= dual.len());
        prop_assert!(red.pinning_count() <= max_pinning(red.indicator_count(), kappa));
        let fr = fraction_pinning(&dual, kappa, &mut rng);
        prop_assert_eq!(fr.indicator_count(), dual.indicator_count());
        prop_assert!(fr.pinning_count() <= max_pinning(fr.indicator_count(), kappa));
    }

    /// One full batch: master atoms are unions of freest-model atoms and the
    /// master satisfies every duple.
    #[test]
    fn one_batch_master_is_sound(inst in instance_strategy(8, 10, 6), seed in any::<u64>()) {
        prop_assume!(inst.consistent());
        let set = TrainingSet::fixed(inst.axioms());
        let cfg = TrainConfig { max_batches: 1, seed, ..TrainConfig::formal() };
        let (st, log) = train(&set, inst.universe(), cfg, None).unwrap();
        prop_assert_eq!(log.len(), 1);
        let free: Vec<u32> = freest_atoms(inst.n, &inst.positives).into_iter().collect();
        for a in model_masks(&st.master) {
            prop_assert!(admissible(a, &inst.positives));
            let cover = free.iter().filter(|&&f| f & !a == 0).fold(0, |c, &f| c | f);
            prop_assert_eq!(cover, a);
        }
        for d in inst.axioms().iter() {
            prop_assert!(st.master.satisfies(d), "master violates {:?}", d);
        }
    }

    /// Constant traces fixed by the trace constraints survive every sparse
    /// crossing and every simplification.
    #[test]
    fn constant_traces_are_invariant(inst in instance_strategy(8, 10, 6), seed in any::<u64>(), reduce in any::<bool>()) {
        prop_assume!(inst.consistent());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ax = inst.axioms();
        let master = Model::freest_empty(inst.universe()).unwrap();
        let dual = build_dual(freest_union(&inst).atoms(), &ax, &inst.universe()).unwrap();
        let dual = if reduce { reduce_dual(&dual, &ax.negatives, 0.5, &mut rng) } else { dual };
        let enforced = enforce_trace_constraints(&master, &ax, &dual, 0, &mut rng);
        let mut model = master.clone();
        model.extend(enforced.lambda.clone());
        let reference = fresh_constant_traces(&model, &dual);
        prop_assert_eq!(&reference, &enforced.constant_traces);
        for r in &ax.positives {
            prop_assert!(trace_of_term(&r.right, &model, &dual).is_subset(&trace_of_term(&r.left, &model, &dual)));
        }
        let mut tm = TracedModel { model, traces: enforced.atom_traces };
        let mut step = 0;
        for r in &ax.positives {
            sparse_cross_batch(&mut tm, std::slice::from_ref(r), &dual, 1.1, &mut step, &mut rng);
            prop_assert!(tm.model.satisfies(r));
            prop_assert_eq!(&tm.traces, &AtomTraces::compute(tm.model.atoms(), &dual).into_vec());
            prop_assert_eq!(&fresh_constant_traces(&tm.model, &dual), &reference);
            simplify_preserving_constant_traces(&mut tm, &dual, &mut rng);
            prop_assert_eq!(&fresh_constant_traces(&tm.model, &dual), &reference);
            prop_assert!(tm.model.len() <= master_size_bound(&dual, &ax.negatives) + inst.n);
        }
        for d in ax.iter() {
            prop_assert!(tm.model.satisfies(d));
        }
    }
}

#[test]
fn batch_crossing_with_threshold_keeps_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let inst = random_instance(&mut rng, 8, 10, 6, true);
        let ax = inst.axioms();
        let master = Model::freest_empty(inst.universe()).unwrap();
        let dual = build_dual(freest_union(&inst).atoms(), &ax, &inst.universe()).unwrap();
        let enforced = enforce_trace_constraints(&master, &ax, &dual, 0, &mut rng);
        let mut model = master;
        model.extend(enforced.lambda);
        let reference = fresh_constant_traces(&model, &dual);
        let mut tm = TracedModel { model, traces: enforced.atom_traces };
        let mut step = 0;
        let stats = sparse_cross_batch(&mut tm, &ax.positives, &dual, 1.01, &mut step, &mut rng);
        assert_eq!(step, ax.positives.len() as u64);
        assert!(stats.crossed <= ax.positives.len());
        assert_eq!(fresh_constant_traces(&tm.model, &dual), reference);
    }
}

#[test]
fn seeded_training_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_instance(&mut rng, 8, 10, 6, true);
    let set = TrainingSet {
        background: Axioms::default(),
        examples: inst.axioms().iter().map(|d| Axioms::from_duples([d.clone()])).collect(),
    };
    let cfg = TrainConfig { schedule: BatchSchedule::Fixed(4), max_batches: 6, seed: 42, ..TrainConfig::default() };
    let (a, la) = train(&set, inst.universe(), cfg.clone(), None).unwrap();
    let (b, lb) = train(&set, inst.universe(), cfg, None).unwrap();
    assert_eq!(a.master.canonical(), b.master.canonical());
    assert_eq!(a.union.canonical(), b.union.canonical());
    assert_eq!(la, lb);
}

#[test]
fn training_reaches_zero_error_and_checkpoint_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inst = random_instance(&mut rng, 7, 8, 5, true);
    let set = TrainingSet::fixed(inst.axioms());
    let mut t = Trainer::new(inst.universe(), TrainConfig { max_batches: 3, ..TrainConfig::formal() }, None).unwrap();
    let rep = t.run_batch(&set).unwrap();
    assert_eq!(rep.training_error, Some(0.0));
    assert_eq!(training_error(&t.state.union, &set.all()), 0.0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cp.json");
    t.checkpoint().save(&p).unwrap();
    let back = Trainer::resume(Checkpoint::load(&p).unwrap()).unwrap();
    assert_eq!(back.state.master.canonical(), t.state.master.canonical());
    assert_eq!(back.state.union.canonical(), t.state.union.canonical());
    assert_eq!((back.state.global_step, back.state.batch_index), (t.state.global_step, t.state.batch_index));
    assert_eq!(back.config, t.config);
}

#[test]
fn inconsistent_batch_is_reported_with_its_index() {
    let n = 3;
    let inst = Instance { n, positives: vec![(0b001, 0b010), (0b010, 0b100)], negatives: vec![(0b001, 0b100)] };
    let err = train(&TrainingSet::fixed(inst.axioms()), inst.universe(), TrainConfig::formal(), None).unwrap_err();
    match err {
        aml::Error::Inconsistent { index, batch, .. } => assert_eq!((index, batch), (0, Some(0))),
        e => panic!("unexpected error {e}"),
    }
}
