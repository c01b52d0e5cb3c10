//! Hamiltonian-cycle embedding.
//!
//! Constants, in order: `V_i`, `E_k`, `nE_k`, `Z_k`, `g_k`, `h_k`, `id_i`,
//! `P`, `W`. A model describes a path through `P`: edge `k` belongs to the
//! path when `E_k ≤ P` holds.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::core::{Axioms, Duple, Model, Term, Universe};
use crate::error::{invalid, Error, Result};
use crate::sparse::{TrainConfig, Trainer, TrainingSet};

/// Undirected simple graph with zero-based nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub v: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(v: usize, edges: Vec<(usize, usize)>) -> Result<Graph> {
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &edges {
            if a >= v || b >= v {
                return invalid(format!("edge ({a},{b}) references a node outside 0..{v}"));
            }
            if a == b {
                return invalid(format!("self-loop on node {a}"));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return invalid(format!("duplicate edge ({a},{b})"));
            }
        }
        Ok(Graph { v, edges })
    }

    /// Parses `v e` followed by `e` lines of 1-based node pairs.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut nums = text
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Format(format!("not a number: {t:?}"))));
        let mut next = |what: &str| nums.next().unwrap_or_else(|| Err(Error::Format(format!("missing {what}"))));
        let v = next("node count")?;
        let e = next("edge count")?;
        let mut edges = Vec::with_capacity(e);
        for _ in 0..e {
            let a = next("edge endpoint")?;
            let b = next("edge endpoint")?;
            if a == 0 || b == 0 {
                return Err(Error::Format("node ids are 1-based".into()));
            }
            edges.push((a - 1, b - 1));
        }
        if nums.next().is_some() {
            return Err(Error::Format("trailing data after edge list".into()));
        }
        Graph::new(v, edges)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Graph> {
        Graph::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.v, self.edges.len());
        for &(a, b) in &self.edges {
            s.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        s
    }

    /// Edge indices incident to `i`.
    pub fn incident(&self, i: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&k| self.edges[k].0 == i || self.edges[k].1 == i).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.v == 0 {
            return true;
        }
        let mut seen = vec![false; self.v];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &(a, b) in &self.edges {
                let y = if a == x { b } else if b == x { a } else { continue };
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Every Hamiltonian cycle, as sorted edge-index lists. Exponential; for
    /// small graphs and tests.
    pub fn hamiltonian_cycles(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if self.v < 3 {
            return out;
        }
        let mut path = vec![0];
        let mut used = vec![false; self.v];
        used[0] = true;
        let mut edges = Vec::new();
        self.extend_cycles(&mut path, &mut used, &mut edges, &mut out);
        out.sort();
        out.dedup();
        out
    }

    fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.iter().position(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    fn extend_cycles(&self, path: &mut Vec<usize>, used: &mut [bool], edges: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().expect("non-empty");
        if path.len() == self.v {
            if let Some(k) = self.edge_between(last, 0) {
                let mut c = edges.clone();
                c.push(k);
                c.sort_unstable();
                out.push(c);
            }
            return;
        }
        for y in 0..self.v {
            if used[y] {
                continue;
            }
            if let Some(k) = self.edge_between(last, y) {
                used[y] = true;
                path.push(y);
                edges.push(k);
                self.extend_cycles(path, used, edges, out);
                edges.pop();
                path.pop();
                used[y] = false;
            }
        }
    }
}

/// A Hamiltonian cycle on `v` nodes plus random chords, up to `e` edges.
pub fn random_hamiltonian_graph<R: Rng>(v: usize, e: usize, rng: &mut R) -> Result<Graph> {
    if v < 3 || e < v || e > v * (v - 1) / 2 {
        return invalid(format!("cannot build a Hamiltonian graph with {v} nodes and {e} edges"));
    }
    let mut order: Vec<usize> = (0..v).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..v).map(|i| (order[i], order[(i + 1) % v])).collect();
    let mut rest: Vec<(usize, usize)> = (0..v)
        .flat_map(|a| (a + 1..v).map(move |b| (a, b)))
        .filter(|&(a, b)| !edges.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a)))
        .collect();
    rest.shuffle(rng);
    edges.extend(rest.into_iter().take(e - v));
    edges.shuffle(rng);
    Graph::new(v, edges)
}

#[derive(Debug, Clone)]
pub struct HamiltonianEmbedding {
    pub graph: Graph,
    pub universe: Arc<Universe>,
    pub axioms: Axioms,
}

impl HamiltonianEmbedding {
    pub fn node(&self, i: usize) -> usize {
        i
    }

    pub fn edge(&self, k: usize) -> usize {
        self.graph.v + k
    }

    pub fn no_edge(&self, k: usize) -> usize {
        self.graph.v + self.graph.edges.len() + k
    }

    pub fn aux(&self, k: usize) -> usize {
        self.graph.v + 2 * self.graph.edges.len() + k
    }

    pub fn context_g(&self, k: usize) -> usize {
        self.graph.v + 3 * self.graph.edges.len() + k
    }

    pub fn context_h(&self, k: usize) -> usize {
        self.graph.v + 4 * self.graph.edges.len() + k
    }

    pub fn id(&self, i: usize) -> usize {
        self.graph.v + 5 * self.graph.edges.len() + i
    }

    pub fn path(&self) -> usize {
        2 * self.graph.v + 5 * self.graph.edges.len()
    }

    pub fn wrong(&self) -> usize {
        self.path() + 1
    }

    pub fn term(&self, ids: impl IntoIterator<Item = usize>) -> Term {
        Term::new(self.universe.len(), ids).expect("embedding constants in range")
    }
}

pub fn build_hamiltonian_embedding(graph: Graph) -> Result<HamiltonianEmbedding> {
    if graph.v < 3 {
        return invalid("a Hamiltonian embedding needs at least 3 nodes");
    }
    if !graph.is_connected() {
        return invalid("graph is not connected");
    }
    let (v, e) = (graph.v, graph.edges.len());
    let mut names = Vec::with_capacity(2 * v + 5 * e + 2);
    names.extend((1..=v).map(|i| format!("V{i}")));
    for prefix in ["E", "nE", "Z", "g", "h"] {
        names.extend((1..=e).map(|k| format!("{prefix}{k}")));
    }
    names.extend((1..=v).map(|i| format!("id{i}")));
    names.push("P".into());
    names.push("W".into());
    let mut emb = HamiltonianEmbedding { graph, universe: Arc::new(Universe::new(names)?), axioms: Axioms::default() };

    let em = &emb;
    let t = |ids: Vec<usize>| em.term(ids);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let equal = |pos: &mut Vec<Duple>, a: Term, b: Term| {
        pos.push(Duple::positive(a.clone(), b.clone()));
        pos.push(Duple::positive(b, a));
    };
    let p = em.path();

    for (k, &(r, s)) in em.graph.edges.iter().enumerate() {
        pos.push(Duple::positive(t(vec![em.node(r), em.node(s)]), t(vec![em.edge(k)])));
        pos.push(Duple::positive(t(vec![em.aux(k)]), t(vec![em.edge(k), em.no_edge(k)])));
    }
    pos.push(Duple::positive(t((0..v).map(|i| em.node(i)).collect()), t(vec![p])));
    equal(&mut pos, t((0..e).map(|k| em.aux(k)).collect()), t(vec![p]));
    for k in 0..e {
        pos.push(Duple::positive(t(vec![em.wrong()]), t(vec![em.edge(k), em.no_edge(k), p])));
    }
    neg.push(Duple::negative(t(vec![em.wrong()]), t(vec![p])));

    for i in 0..v {
        let inc = em.graph.incident(i);
        for (a, &y) in inc.iter().enumerate() {
            for &z in &inc[a + 1..] {
                let mut left = vec![p];
                left.extend(inc.iter().filter(|&&x| x != y && x != z).map(|&x| em.no_edge(x)));
                equal(&mut pos, t(left), t(vec![em.edge(y), em.edge(z), p]));
            }
        }
    }

    for i in 0..v {
        let mut rhs: Vec<usize> = (0..v).filter(|&j| j != i).flat_map(|j| [em.node(j), em.id(j)]).collect();
        rhs.extend((0..e).map(|k| em.no_edge(k)));
        rhs.extend((0..e).filter(|&k| em.graph.edges[k].0 != i && em.graph.edges[k].1 != i).map(|k| em.edge(k)));
        let rhs = t(rhs);
        neg.push(Duple::negative(t(vec![em.node(i)]), rhs.clone()));
        neg.push(Duple::negative(t(vec![em.id(i)]), rhs));
    }

    for (k, &(r, s)) in em.graph.edges.iter().enumerate() {
        equal(&mut pos, t(vec![em.edge(k), em.id(r)]), t(vec![em.id(s), em.edge(k)]));
    }
    for j in 1..v {
        equal(&mut pos, t(vec![p, em.id(0)]), t(vec![em.id(j), p]));
    }
    for k in 0..e {
        equal(&mut pos, t(vec![em.context_g(k), em.aux(k)]), t(vec![em.edge(k), em.context_g(k)]));
        equal(&mut pos, t(vec![em.context_h(k), em.aux(k)]), t(vec![em.no_edge(k), em.context_h(k)]));
    }

    emb.axioms = Axioms::new(pos, neg);
    Ok(emb)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathReading {
    pub edges: Vec<usize>,
    pub hamiltonian: bool,
}

/// Reads the path off `model`: edge `k` is in it when `E_k ≤ P` holds.
pub fn interpret_path(model: &Model, emb: &HamiltonianEmbedding) -> PathReading {
    let p = emb.term([emb.path()]);
    let edges: Vec<usize> =
        (0..emb.graph.edges.len()).filter(|&k| model.holds(&emb.term([emb.edge(k)]), &p)).collect();
    let hamiltonian = is_hamiltonian_cycle(&emb.graph, &edges);
    PathReading { edges, hamiltonian }
}

/// True when `edges` form one cycle through every node exactly once.
pub fn is_hamiltonian_cycle(graph: &Graph, edges: &[usize]) -> bool {
    if graph.v < 3 || edges.len() != graph.v {
        return false;
    }
    let mut deg = vec![0usize; graph.v];
    for &k in edges {
        let (a, b) = graph.edges[k];
        deg[a] += 1;
        deg[b] += 1;
    }
    if deg.iter().any(|&d| d != 2) {
        return false;
    }
    let sub = Graph { v: graph.v, edges: edges.iter().map(|&k| graph.edges[k]).collect() };
    sub.is_connected()
}

/// Whether some Hamiltonian cycle of `graph` contains every edge in `edges`.
///
/// Structural checks first (degree ≤ 2, no short cycle); the exhaustive
/// search only runs on graphs of at most `search_limit` nodes and otherwise
/// the answer is optimistic.
pub fn can_extend_to_cycle(graph: &Graph, edges: &[usize], search_limit: usize) -> bool {
    let mut deg = vec![0usize; graph.v];
    for &k in edges {
        let (a, b) = graph.edges[k];
        deg[a] += 1;
        deg[b] += 1;
    }
    if deg.iter().any(|&d| d > 2) {
        return false;
    }
    if edges.len() < graph.v && has_cycle(graph, edges) {
        return false;
    }
    if graph.v > search_limit {
        return true;
    }
    graph.hamiltonian_cycles().iter().any(|c| edges.iter().all(|k| c.contains(k)))
}

fn has_cycle(graph: &Graph, edges: &[usize]) -> bool {
    let mut parent: Vec<usize> = (0..graph.v).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &k in edges {
        let (a, b) = graph.edges[k];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return true;
        }
        parent[ra] = rb;
    }
    false
}

/// Adds `W ≤ ⊙ E_u` over the given edges.
pub fn add_unwanted_path(emb: &mut HamiltonianEmbedding, edges: &[usize]) -> Result<()> {
    if edges.is_empty() {
        return invalid("an unwanted path needs at least one edge");
    }
    if let Some(&k) = edges.iter().find(|&&k| k >= emb.graph.edges.len()) {
        return invalid(format!("edge index {k} out of range"));
    }
    let d = Duple::positive(emb.term([emb.wrong()]), emb.term(edges.iter().map(|&k| emb.edge(k))));
    emb.axioms.positives.push(d);
    Ok(())
}

/// Outcome of [`solve_hamiltonian`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSearch {
    /// Batches run, one interpretation attempt each.
    pub attempts: usize,
    /// Edge indices of the verified cycle, if one was found.
    pub cycle: Option<Vec<usize>>,
    pub unwanted_paths: usize,
}

/// Trains on the embedding with every axiom in every batch and reads the
/// master model after each batch. With `feedback`, a path that cannot be
/// completed to a cycle is added as an unwanted path.
pub fn solve_hamiltonian(graph: Graph, config: TrainConfig, max_attempts: usize, feedback: bool) -> Result<CycleSearch> {
    let mut emb = build_hamiltonian_embedding(graph)?;
    let mut trainer = Trainer::new(emb.universe.clone(), config, None)?;
    let mut unwanted = std::collections::HashSet::new();
    let mut set = TrainingSet::fixed(emb.axioms.clone());
    for attempt in 1..=max_attempts {
        trainer.run_batch(&set)?;
        let reading = interpret_path(&trainer.state.master, &emb);
        if reading.hamiltonian {
            return Ok(CycleSearch { attempts: attempt, cycle: Some(reading.edges), unwanted_paths: unwanted.len() });
        }
        if feedback
            && !reading.edges.is_empty()
            && !can_extend_to_cycle(&emb.graph, &reading.edges, FEEDBACK_SEARCH_LIMIT)
            && unwanted.insert(reading.edges.clone())
        {
            add_unwanted_path(&mut emb, &reading.edges)?;
            set = TrainingSet::fixed(emb.axioms.clone());
        }
    }
    Ok(CycleSearch { attempts: max_attempts, cycle: None, unwanted_paths: unwanted.len() })
}

/// Largest graph on which feedback runs the exhaustive extension check.
pub const FEEDBACK_SEARCH_LIMIT: usize = 12;
