use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use aml::embed::hamiltonian::{random_hamiltonian_graph, solve_hamiltonian, Graph};
use aml::embed::{idx, Dataset, ImageSpec, VerticalBar};
use aml::evalstat::{activations, load_and_transition, model_stats, select_atom_subset, LogisticHead, Metrics, MissClassifier};
use aml::sparse::{
    train as run_training, training_error, write_progress_csv, BatchReport, BatchSchedule, Checkpoint, TrainConfig,
    TrainState, TrainingSet,
};
use aml::{Axioms, Model, ModelJson, Term, Universe};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{axfile, config, EvalArgs, GenerateArgs, Generated, HamiltonianArgs, InspectArgs, Task, TaskArgs, TrainArgs, Which};

/// No cycle within the attempt budget.
#[derive(Debug)]
pub struct BudgetExhausted {
    attempts: usize,
    unwanted: usize,
}

impl fmt::Display for BudgetExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no Hamiltonian cycle found within {} attempts ({} unwanted paths added)", self.attempts, self.unwanted)
    }
}

impl std::error::Error for BudgetExhausted {}

/// 2 for inconsistent axioms, 3 for an exhausted budget, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<BudgetExhausted>()) {
        3
    } else if e.chain().any(|c| matches!(c.downcast_ref::<aml::Error>(), Some(aml::Error::Inconsistent { .. }))) {
        2
    } else {
        1
    }
}

fn write_text(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let text = match a.what {
        Generated::VerticalBar => {
            let (vb, ax) = vertical_bar_axioms(a.n, a.negatives, a.seed)?;
            axfile::render(&vb.universe, &ax)
        }
        Generated::Graph => random_hamiltonian_graph(a.nodes, a.edges, &mut rng)?.to_edge_list(),
    };
    write_text(&a.out, &text)
}

fn vertical_bar_axioms(n: usize, negatives: usize, seed: u64) -> Result<(VerticalBar, Axioms)> {
    let vb = VerticalBar::new(n)?;
    let positives = vb.positives();
    let bits = n * n;
    if bits < 64 && negatives as u64 > (1u64 << bits) - positives.len() as u64 {
        bail!("only {} negative images exist for n = {n}", (1u64 << bits) - positives.len() as u64);
    }
    let neg = vb.sample_negatives(negatives, &mut ChaCha8Rng::seed_from_u64(seed));
    let ax = vb.axioms(&positives, &neg);
    Ok((vb, ax))
}

fn image_dataset(t: &TaskArgs, images: &Option<PathBuf>, labels: &Option<PathBuf>, which: &str) -> Result<Dataset> {
    let ip = images.as_ref().ok_or_else(|| anyhow!("--{which}-idx is required for the mnist task"))?;
    let lp = labels.as_ref().ok_or_else(|| anyhow!("--{which}-labels is required for the mnist task"))?;
    let img = idx::read_images(ip).with_context(|| format!("reading {}", ip.display()))?;
    let lab = idx::read_labels(lp).with_context(|| format!("reading {}", lp.display()))?;
    if let Some(&y) = lab.iter().find(|&&y| y as usize >= t.classes) {
        bail!("label {y} in {} is outside 0..{}", lp.display(), t.classes);
    }
    let spec = if t.levels == 2 {
        ImageSpec::binary(img.rows, img.cols, t.classes)
    } else {
        ImageSpec::graded(img.rows, img.cols, 1, t.levels, t.classes)
    };
    Ok(Dataset::from_idx(spec, &img, &lab, t.limit, t.threshold)?)
}

fn read_axioms(t: &TaskArgs) -> Result<(Arc<Universe>, Axioms)> {
    let p = t.axioms.as_ref().ok_or_else(|| anyhow!("--axioms is required for the axioms task"))?;
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    axfile::parse(&text).with_context(|| format!("parsing {}", p.display()))
}

/// Constants named `p` or starting with `label`.
fn default_labels(u: &Universe) -> Vec<usize> {
    (0..u.len()).filter(|&c| u.name(c) == "p" || u.name(c).starts_with("label")).collect()
}

struct Prepared {
    universe: Arc<Universe>,
    set: TrainingSet,
}

fn prepare_training(t: &TaskArgs) -> Result<Prepared> {
    Ok(match t.task {
        Task::VerticalBar => {
            let (vb, ax) = vertical_bar_axioms(t.n, t.negatives, t.data_seed)?;
            let examples = ax.iter().map(|d| Axioms::from_duples([d.clone()])).collect();
            Prepared { universe: vb.universe.clone(), set: TrainingSet { background: Axioms::default(), examples } }
        }
        Task::Mnist => {
            let ds = image_dataset(t, &t.train_idx, &t.train_labels, "train")?;
            let background = if ds.spec.is_binary() {
                Axioms::default()
            } else {
                Axioms::from_duples(ds.spec.chain_duples())
            };
            Prepared { universe: ds.universe.clone(), set: TrainingSet { background, examples: ds.groups()? } }
        }
        Task::Axioms => {
            let (universe, ax) = read_axioms(t)?;
            Prepared { universe, set: TrainingSet::fixed(ax) }
        }
    })
}

fn training_config(base: TrainConfig, file: &Option<PathBuf>) -> Result<TrainConfig> {
    let mut c = base;
    if let Some(p) = file {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        config::parse_into(&mut c, &text).with_context(|| format!("parsing {}", p.display()))?;
    }
    Ok(c)
}

fn checkpoint_of(st: &TrainState, config: &TrainConfig) -> Checkpoint {
    Checkpoint {
        master: ModelJson::from(&st.master),
        union: ModelJson::from(&st.union),
        config: config.clone(),
        global_step: st.global_step,
        batch_index: st.batch_index,
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = training_config(TrainConfig::default(), &a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = a.delta {
        cfg.delta = v;
    }
    if let Some(v) = a.max_batches {
        cfg.max_batches = v;
    }
    if let Some(s) = &a.schedule {
        cfg.schedule = config::parse_schedule(s)?;
    }
    if let Some(v) = a.error_every {
        cfg.error_every = v;
    }
    if a.no_stop {
        cfg.stop_on_zero_training_error = false;
    }
    if a.no_reduce {
        cfg.reduce_dual = false;
    }
    cfg.validate()?;
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let prep = prepare_training(&a.task)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let configs: Vec<TrainConfig> =
        (0..a.jobs).map(|j| TrainConfig { seed: cfg.seed.wrapping_add(j as u64), ..cfg.clone() }).collect();
    let results: Vec<aml::Result<(TrainState, Vec<BatchReport>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let (set, universe) = (&prep.set, prep.universe.clone());
                s.spawn(move || run_training(set, universe, c.clone(), None))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });

    let all = prep.set.all();
    let mut merged = Model::empty(prep.universe.clone());
    for (j, (res, c)) in results.into_iter().zip(&configs).enumerate() {
        let (st, log) = res?;
        let suffix = if j == 0 { String::new() } else { format!("-{j}") };
        checkpoint_of(&st, c).save(a.out.join(format!("checkpoint{suffix}.json")))?;
        let csv = fs::File::create(a.out.join(format!("progress{suffix}.csv")))?;
        write_progress_csv(&log, csv)?;
        println!(
            "replica {j} (seed {}): {} batches, master {} atoms, union {} atoms, training error {:.6}",
            c.seed,
            log.len(),
            st.master.len(),
            st.union.len(),
            training_error(&st.union, &all)
        );
        merged.extend(st.union.atoms().iter().cloned());
    }
    if a.remove_redundant {
        merged = merged.remove_redundant();
    }
    merged.save(a.out.join("model.json"))?;
    println!("model.json: {} atoms, training error {:.6}", merged.len(), training_error(&merged, &all));
    Ok(())
}

fn load_model(path: &Path, which: Which) -> Result<(Model, u64)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(cp) = serde_json::from_str::<Checkpoint>(&text) {
        let m = match which {
            Which::Union => cp.union,
            Which::Master => cp.master,
        };
        return Ok((m.into_model()?, cp.global_step));
    }
    let m = Model::from_json(&text).with_context(|| format!("{} is neither a model nor a checkpoint", path.display()))?;
    let step = m.atoms().iter().map(|a| a.birth).max().unwrap_or(0);
    Ok((m, step))
}

fn check_universe(model: &Model, u: &Universe) -> Result<()> {
    if model.universe().names() != u.names() {
        bail!(
            "model constants do not match the task ({} constants in the model, {} in the task)",
            model.width(),
            u.len()
        );
    }
    Ok(())
}

fn argmin(xs: &[usize]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] < xs[best] {
            best = i;
        }
    }
    best
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (model, step) = load_model(&a.model, a.which)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    if a.head && a.task.task != Task::Mnist {
        bail!("--head needs the mnist task");
    }
    let t = &a.task;
    let mut metrics = Metrics { model_size: model.len(), ..Metrics::default() };
    let select = |m: &Model, negatives: &[aml::Duple], labels: &[usize], rng: &mut ChaCha8Rng| -> Result<Model> {
        select_atom_subset(m, negatives, a.delta, labels, rng).context("subset selection")
    };

    let evaluated = match t.task {
        Task::VerticalBar => {
            let (vb, ax) = vertical_bar_axioms(t.n, t.negatives, t.data_seed)?;
            check_universe(&model, &vb.universe)?;
            let m = if a.select { select(&model, &ax.negatives, &[vb.label()], &mut rng)? } else { model.clone() };
            let bits = t.n * t.n;
            let images: Vec<u64> = if bits <= 20 {
                (0..1u64 << bits).collect()
            } else {
                let mask = if bits == 64 { !0 } else { (1u64 << bits) - 1 };
                (0..100_000).map(|_| rng.gen::<u64>() & mask).collect()
            };
            let p = vb.label_term();
            let mut per_class = vec![(0usize, 0usize); 2];
            for &img in &images {
                let truth = vb.is_positive(img) as usize;
                let pred = m.holds(&p, &vb.term(img)) as usize;
                per_class[truth].1 += 1;
                per_class[truth].0 += (pred == truth) as usize;
            }
            metrics.accuracy = per_class.iter().map(|c| c.0).sum::<usize>() as f64 / images.len() as f64;
            metrics.per_class = per_class;
            m
        }
        Task::Axioms => {
            let (u, ax) = read_axioms(t)?;
            check_universe(&model, &u)?;
            let m = if a.select { select(&model, &ax.negatives, &default_labels(&u), &mut rng)? } else { model.clone() };
            let ok = |ds: &[aml::Duple]| ds.iter().filter(|d| m.satisfies(d)).count();
            metrics.per_class = vec![(ok(&ax.negatives), ax.negatives.len()), (ok(&ax.positives), ax.positives.len())];
            metrics.accuracy = 1.0 - training_error(&m, &ax);
            m
        }
        Task::Mnist => {
            let test = image_dataset(t, &t.test_idx, &t.test_labels, "test")?;
            check_universe(&model, &test.universe)?;
            let labels = test.label_constants();
            let train = if a.select || a.head { Some(image_dataset(t, &t.train_idx, &t.train_labels, "train")?) } else { None };
            let m = match (&train, a.select) {
                (Some(tr), true) => {
                    let negatives: Vec<aml::Duple> = tr.groups()?.into_iter().flat_map(|g| g.negatives).collect();
                    select(&model, &negatives, &labels, &mut rng)?
                }
                _ => model.clone(),
            };
            let clf = MissClassifier::new(&m, &labels);
            let mut per_class = vec![(0usize, 0usize); t.classes];
            let mut correct = 0;
            for (term, y) in &test.examples {
                let misses = clf.misses(term);
                let pred = argmin(&misses);
                correct += (pred == *y) as usize;
                per_class[*y].1 += 1;
                per_class[*y].0 += (pred == *y) as usize;
                metrics.true_misses.push(misses[*y]);
                metrics.other_misses.extend(misses.iter().enumerate().filter(|&(k, _)| k != *y).map(|(_, &v)| v));
            }
            metrics.accuracy = correct as f64 / test.examples.len().max(1) as f64;
            metrics.per_class = per_class;
            if let (true, Some(tr)) = (a.head, &train) {
                let mut atoms = m.atoms().to_vec();
                if atoms.len() > a.head_atoms {
                    atoms.shuffle(&mut rng);
                    atoms.truncate(a.head_atoms);
                }
                let feats = |ex: &[(Term, usize)]| -> Vec<Vec<f64>> { ex.iter().map(|(t, _)| activations(&atoms, t)).collect() };
                let ys: Vec<usize> = tr.examples.iter().map(|e| e.1).collect();
                let head = LogisticHead::fit(&feats(&tr.examples), &ys, t.classes, a.epochs, a.lr)?;
                let xs = feats(&test.examples);
                let mut ok = 0;
                for (x, (_, y)) in xs.iter().zip(&test.examples) {
                    ok += (head.predict(x)? == *y) as usize;
                }
                metrics.head_accuracy = Some(ok as f64 / test.examples.len().max(1) as f64);
            }
            m
        }
    };

    let (load, transition) = load_and_transition::<f64>(&model_stats(&evaluated, step), step);
    metrics.load = load;
    metrics.transition = transition;
    metrics.subset_size = evaluated.len();
    println!("model: {} atoms", metrics.model_size);
    if a.select {
        println!("selected: {} atoms", metrics.subset_size);
    }
    println!("accuracy: {:.4}", metrics.accuracy);
    if let Some(h) = metrics.head_accuracy {
        println!("head accuracy: {h:.4}");
    }
    println!("load: {load:.6}, transition: {transition:.6}");
    if let Some(p) = &a.metrics {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        metrics.write_csv(f)?;
    }
    Ok(())
}

/// Nodes of a Hamiltonian cycle in visiting order, starting at node 0.
fn cycle_order(g: &Graph, edges: &[usize]) -> Vec<usize> {
    let mut order = vec![0];
    let mut used = vec![false; edges.len()];
    while order.len() < g.v {
        let cur = *order.last().expect("non-empty");
        let Some(i) = (0..edges.len()).find(|&i| !used[i] && (g.edges[edges[i]].0 == cur || g.edges[edges[i]].1 == cur)) else {
            break;
        };
        used[i] = true;
        let (x, y) = g.edges[edges[i]];
        order.push(if x == cur { y } else { x });
    }
    order
}

pub fn hamiltonian(a: HamiltonianArgs) -> Result<()> {
    let graph = match &a.graph {
        Some(p) => Graph::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => random_hamiltonian_graph(a.nodes, a.edges, &mut ChaCha8Rng::seed_from_u64(a.seed))?,
    };
    let mut cfg = training_config(TrainConfig { schedule: BatchSchedule::Full, ..TrainConfig::formal() }, &a.config)?;
    cfg.seed = a.seed;
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = a.kappa {
        cfg.kappa = v;
    }
    cfg.validate()?;
    println!("graph: {} nodes, {} edges", graph.v, graph.edges.len());
    let r = solve_hamiltonian(graph.clone(), cfg, a.max_attempts, a.feedback)?;
    match r.cycle {
        Some(edges) => {
            let order: Vec<String> = cycle_order(&graph, &edges).iter().map(|v| (v + 1).to_string()).collect();
            println!("cycle found at attempt {}: {} - 1", r.attempts, order.join(" - "));
            let pairs: Vec<String> =
                edges.iter().map(|&k| format!("{}-{}", graph.edges[k].0 + 1, graph.edges[k].1 + 1)).collect();
            println!("edges: {}", pairs.join(" "));
            println!("unwanted paths added: {}", r.unwanted_paths);
            Ok(())
        }
        None => Err(BudgetExhausted { attempts: r.attempts, unwanted: r.unwanted_paths }.into()),
    }
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let (model, step) = load_model(&a.model, a.which)?;
    let u = model.universe().clone();
    println!("atoms: {}", model.len());
    println!("size histogram:");
    for (size, count) in model.size_histogram() {
        println!("  {size:>5}: {count}");
    }
    let (load, transition) = load_and_transition::<f64>(&model_stats(&model, step), step);
    println!("load: {load:.6}, transition: {transition:.6}");
    let labels: Vec<usize> = if a.labels.is_empty() {
        default_labels(&u)
    } else {
        a.labels.iter().map(|n| u.index_of(n).ok_or_else(|| anyhow!("unknown constant {n:?}"))).collect::<Result<_>>()?
    };
    for l in labels {
        let mut atoms: Vec<_> = model.atoms().iter().filter(|x| x.upper().contains(l)).collect();
        atoms.sort_by_key(|x| (x.size(), x.upper().to_vec()));
        println!("label {}: {} atoms", u.name(l), atoms.len());
        for x in atoms.iter().take(a.top) {
            println!("  g={} h={} {}", x.g, x.h(step), u.describe(x.upper()));
        }
    }
    Ok(())
}
