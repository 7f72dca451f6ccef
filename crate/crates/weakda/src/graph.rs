//! Labelled graphs, generators, coverings and the cycle splice.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Label = String;
pub type LabelCount = BTreeMap<Label, usize>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is disconnected")]
    Disconnected,
    #[error("self-loop at node {0}")]
    SelfLoop(String),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(String, String),
    #[error("graph has {0} nodes, at least 3 required")]
    TooFewNodes(usize),
    #[error("node {0} has no label")]
    UnlabelledNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("infeasible graph spec: {0}")]
    InfeasibleSpec(String),
    #[error("graph is not a cycle")]
    NotACycle,
    #[error("edge {0}-{1} does not lie on a cycle")]
    EdgeNotOnCycle(usize, usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finite connected simple undirected graph with a node labelling.
/// Nodes are `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelledGraph {
    labels: Vec<Label>,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl LabelledGraph {
    /// Validates and builds a graph over dense node ids.
    pub fn new(labels: Vec<Label>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::UnknownNode(u.to_string()));
            }
            if v >= n {
                return Err(GraphError::UnknownNode(v.to_string()));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u.to_string()));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(u.to_string(), v.to_string()));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        if let Some(i) = labels.iter().position(|l| l.is_empty()) {
            return Err(GraphError::UnlabelledNode(i.to_string()));
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let g = LabelledGraph { labels, adj, edges: seen.into_iter().collect() };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        if n < 3 {
            return Err(GraphError::TooFewNodes(n));
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.labels.len()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adj.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Whether no two nodes of `set` are adjacent.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(i, &u)| set[i + 1..].iter().all(|&v| u != v && !self.has_edge(u, v)))
    }

    fn is_connected(&self) -> bool {
        reachable_count(&self.adj, 0, None) == self.labels.len()
    }

    /// Same graph with different labels.
    pub fn relabel(&self, labels: Vec<Label>) -> Result<Self, GraphError> {
        LabelledGraph::new(labels, &self.edges)
    }

    /// Parses the line-oriented text format. Node identifiers are arbitrary
    /// tokens and become dense ids in order of appearance.
    pub fn parse(text: &str) -> Result<(String, Self), GraphError> {
        let mut name = None;
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |msg: &str| GraphError::Parse { line: line_no, msg: msg.to_string() };
            match toks[0] {
                "graph" => {
                    if name.is_some() {
                        return Err(perr("second graph header"));
                    }
                    if toks.len() != 2 {
                        return Err(perr("expected `graph <name>`"));
                    }
                    name = Some(toks[1].to_string());
                }
                "node" => {
                    if name.is_none() {
                        return Err(perr("missing graph header"));
                    }
                    match toks.len() {
                        2 => return Err(GraphError::UnlabelledNode(toks[1].to_string())),
                        3 => {}
                        _ => return Err(perr("expected `node <id> <label>`")),
                    }
                    if ids.contains_key(toks[1]) {
                        return Err(GraphError::DuplicateNode(toks[1].to_string()));
                    }
                    if !edges.is_empty() {
                        return Err(perr("node after edge"));
                    }
                    ids.insert(toks[1].to_string(), labels.len());
                    labels.push(toks[2].to_string());
                }
                "edge" => {
                    if toks.len() != 3 {
                        return Err(perr("expected `edge <id> <id>`"));
                    }
                    let u = *ids.get(toks[1]).ok_or_else(|| GraphError::UnknownNode(toks[1].to_string()))?;
                    let v = *ids.get(toks[2]).ok_or_else(|| GraphError::UnknownNode(toks[2].to_string()))?;
                    if u == v {
                        return Err(GraphError::SelfLoop(toks[1].to_string()));
                    }
                    edges.push((u, v));
                }
                other => return Err(perr(&format!("unknown directive `{other}`"))),
            }
        }
        let name = name.ok_or(GraphError::Parse { line: 0, msg: "missing graph header".into() })?;
        let mut seen = BTreeSet::new();
        let names: Vec<String> = {
            let mut v = vec![String::new(); labels.len()];
            for (k, &i) in &ids {
                v[i] = k.clone();
            }
            v
        };
        for &(u, v) in &edges {
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(GraphError::DuplicateEdge(names[u].clone(), names[v].clone()));
            }
        }
        Ok((name, LabelledGraph::new(labels, &edges)?))
    }

    /// Writes the text format.
    pub fn to_text(&self, name: &str) -> String {
        let mut out = format!("graph {name}\n");
        for (v, l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "node {v} {l}");
        }
        for (u, v) in &self.edges {
            let _ = writeln!(out, "edge {u} {v}");
        }
        out
    }
}

fn reachable_count(adj: &[Vec<usize>], start: usize, skip: Option<(usize, usize)>) -> usize {
    if adj.is_empty() {
        return 0;
    }
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if skip == Some((u, w)) || skip == Some((w, u)) {
                continue;
            }
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// Builds a graph over arbitrary node identifiers.
pub fn build_graph(
    nodes: &[&str],
    edges: &[(&str, &str)],
    labelling: &BTreeMap<&str, &str>,
) -> Result<LabelledGraph, GraphError> {
    let mut ids = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if ids.insert(*n, i).is_some() {
            return Err(GraphError::DuplicateNode(n.to_string()));
        }
    }
    let mut labels = Vec::with_capacity(nodes.len());
    for n in nodes {
        let l = labelling.get(n).ok_or_else(|| GraphError::UnlabelledNode(n.to_string()))?;
        labels.push(l.to_string());
    }
    let mut dense = Vec::with_capacity(edges.len());
    let mut seen = BTreeSet::new();
    for (a, b) in edges {
        let u = *ids.get(a).ok_or_else(|| GraphError::UnknownNode(a.to_string()))?;
        let v = *ids.get(b).ok_or_else(|| GraphError::UnknownNode(b.to_string()))?;
        if u == v {
            return Err(GraphError::SelfLoop(a.to_string()));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(GraphError::DuplicateEdge(a.to_string(), b.to_string()));
        }
        dense.push((u, v));
    }
    LabelledGraph::new(labels, &dense)
}

/// Graph shapes accepted by [`generate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Cycle,
    Line,
    /// Node 0 is the center.
    Star,
    Clique,
    RandomBounded(usize),
}

/// Label assignment for [`generate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelSpec {
    Positional(Vec<Label>),
    /// Expanded in key order.
    Counts(BTreeMap<Label, usize>),
}

impl LabelSpec {
    pub fn positional<S: AsRef<str>>(labels: &[S]) -> Self {
        LabelSpec::Positional(labels.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn counts<S: AsRef<str>>(counts: &[(S, usize)]) -> Self {
        LabelSpec::Counts(counts.iter().map(|(l, c)| (l.as_ref().to_string(), *c)).collect())
    }

    fn expand(&self) -> Vec<Label> {
        match self {
            LabelSpec::Positional(v) => v.clone(),
            LabelSpec::Counts(m) => m.iter().flat_map(|(l, c)| std::iter::repeat(l.clone()).take(*c)).collect(),
        }
    }
}

/// Generates a graph of the requested shape. `seed` is required for
/// `RandomBounded` and ignored otherwise.
pub fn generate(kind: GraphKind, labels: &LabelSpec, seed: Option<u64>) -> Result<LabelledGraph, GraphError> {
    let mut labels = labels.expand();
    let n = labels.len();
    if n < 3 {
        return Err(GraphError::InfeasibleSpec(format!("{kind:?} with {n} nodes")));
    }
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Cycle => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        GraphKind::Line => (0..n - 1).map(|i| (i, i + 1)).collect(),
        GraphKind::Star => (1..n).map(|i| (0, i)).collect(),
        GraphKind::Clique => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        GraphKind::RandomBounded(k) => {
            if k < 2 {
                return Err(GraphError::InfeasibleSpec("random_bounded requires k >= 2".into()));
            }
            let seed = seed.ok_or_else(|| GraphError::InfeasibleSpec("random_bounded requires a seed".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            labels.shuffle(&mut rng);
            random_bounded_edges(n, k, &mut rng)
        }
    };
    LabelledGraph::new(labels, &edges)
}

fn random_bounded_edges(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut deg = vec![0usize; n];
    let mut present = BTreeSet::new();
    let mut edges = Vec::new();
    for i in 1..n {
        let v = order[i];
        let open: Vec<usize> = order[..i].iter().copied().filter(|&u| deg[u] < k).collect();
        let u = open[rng.gen_range(0..open.len())];
        deg[u] += 1;
        deg[v] += 1;
        present.insert((u.min(v), u.max(v)));
        edges.push((u, v));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        let key = (u.min(v), u.max(v));
        if u != v && deg[u] < k && deg[v] < k && !present.contains(&key) {
            deg[u] += 1;
            deg[v] += 1;
            present.insert(key);
            edges.push((u, v));
        }
    }
    edges
}

pub fn label_count(g: &LabelledGraph) -> LabelCount {
    let mut m = LabelCount::new();
    for l in &g.labels {
        *m.entry(l.clone()).or_default() += 1;
    }
    m
}

/// A candidate covering map from `source` onto `target`.
#[derive(Clone, Debug)]
pub struct CoveringMap {
    pub source: LabelledGraph,
    pub target: LabelledGraph,
    pub map: Vec<usize>,
}

pub fn is_covering(c: &CoveringMap) -> bool {
    let (h, g) = (&c.source, &c.target);
    if c.map.len() != h.node_count() || c.map.iter().any(|&x| x >= g.node_count()) {
        return false;
    }
    let image: BTreeSet<usize> = c.map.iter().copied().collect();
    if image.len() != g.node_count() {
        return false;
    }
    h.nodes().all(|v| {
        let fv = c.map[v];
        if h.label(v) != g.label(fv) || h.degree(v) != g.degree(fv) {
            return false;
        }
        let mut img: Vec<usize> = h.neighbours(v).iter().map(|&w| c.map[w]).collect();
        img.sort_unstable();
        img.dedup();
        img == g.neighbours(fv)
    })
}

/// Cyclic node order of a cycle graph, starting at 0 towards its smaller
/// neighbour.
pub fn cycle_order(g: &LabelledGraph) -> Result<Vec<usize>, GraphError> {
    if g.nodes().any(|v| g.degree(v) != 2) {
        return Err(GraphError::NotACycle);
    }
    let mut order = vec![0];
    let mut prev = 0;
    let mut cur = g.neighbours(0)[0];
    while cur != 0 {
        order.push(cur);
        let next = if g.neighbours(cur)[0] == prev { g.neighbours(cur)[1] } else { g.neighbours(cur)[0] };
        prev = cur;
        cur = next;
    }
    if order.len() != g.node_count() {
        return Err(GraphError::NotACycle);
    }
    Ok(order)
}

/// The λ-fold cycle cover of a cycle graph.
pub fn make_cycle_cover(g: &LabelledGraph, lambda: usize) -> Result<CoveringMap, GraphError> {
    if lambda == 0 {
        return Err(GraphError::InfeasibleSpec("lambda must be positive".into()));
    }
    let order = cycle_order(g)?;
    let n = order.len();
    let m = n * lambda;
    let map: Vec<usize> = (0..m).map(|j| order[j % n]).collect();
    let labels = map.iter().map(|&v| g.label(v).to_string()).collect();
    let edges: Vec<(usize, usize)> = (0..m).map(|j| (j, (j + 1) % m)).collect();
    let source = LabelledGraph::new(labels, &edges)?;
    Ok(CoveringMap { source, target: g.clone(), map })
}

fn on_cycle(g: &LabelledGraph, (u, v): (usize, usize)) -> bool {
    g.has_edge(u, v) && reachable_count(&g.adj, u, Some((u, v))) == g.node_count()
}

/// Chains `2g+1` copies of `G` and `2h+1` copies of `H`, cutting the copies
/// of `e_G = (u_G, v_G)` and `e_H = (u_H, v_H)` and wiring `v^i` to `u^{i+1}`.
/// Copies of `G` come first, copy `i` of a graph with `n` nodes occupies
/// ids `i*n..(i+1)*n`.
pub fn splice_cyclic(
    g: &LabelledGraph,
    e_g: (usize, usize),
    h: &LabelledGraph,
    e_h: (usize, usize),
    gc: usize,
    hc: usize,
) -> Result<LabelledGraph, GraphError> {
    if !on_cycle(g, e_g) {
        return Err(GraphError::EdgeNotOnCycle(e_g.0, e_g.1));
    }
    if !on_cycle(h, e_h) {
        return Err(GraphError::EdgeNotOnCycle(e_h.0, e_h.1));
    }
    let (ng, nh) = (g.node_count(), h.node_count());
    let copies_g = 2 * gc + 1;
    let copies_h = 2 * hc + 1;
    let g_id = |i: usize, v: usize| i * ng + v;
    let h_id = |i: usize, v: usize| copies_g * ng + i * nh + v;
    let same = |a: (usize, usize), b: (usize, usize)| a == b || a == (b.1, b.0);
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for i in 0..copies_g {
        labels.extend(g.labels.iter().cloned());
        edges.extend(g.edges.iter().filter(|&&e| !same(e, e_g)).map(|&(a, b)| (g_id(i, a), g_id(i, b))));
    }
    for i in 0..copies_h {
        labels.extend(h.labels.iter().cloned());
        edges.extend(h.edges.iter().filter(|&&e| !same(e, e_h)).map(|&(a, b)| (h_id(i, a), h_id(i, b))));
    }
    for i in 0..copies_g - 1 {
        edges.push((g_id(i, e_g.1), g_id(i + 1, e_g.0)));
    }
    edges.push((g_id(copies_g - 1, e_g.1), h_id(0, e_h.0)));
    for i in 0..copies_h - 1 {
        edges.push((h_id(i, e_h.1), h_id(i + 1, e_h.0)));
    }
    LabelledGraph::new(labels, &edges)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn rec(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == p.len() {
            out.push(p.clone());
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, &mut out);
    out
}

fn edge_mask(n: usize, edges: &[(usize, usize)], perm: &[usize]) -> u64 {
    let mut m = 0u64;
    for &(u, v) in edges {
        let (a, b) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
        m |= 1 << (a * n + b);
    }
    m
}

/// All connected unlabelled graphs on `n` nodes (`3 <= n <= 7`) with
/// maximum degree at most `max_degree`, one representative per
/// isomorphism class.
pub fn enumerate_connected(n: usize, max_degree: usize) -> Vec<Vec<(usize, usize)>> {
    assert!((3..=7).contains(&n), "enumeration supports 3..=7 nodes");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let perms = permutations(n);
    let mut canon = BTreeSet::new();
    let mut reps = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
        if edges.len() < n - 1 {
            continue;
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        if adj.iter().any(|a| a.len() > max_degree) || reachable_count(&adj, 0, None) != n {
            continue;
        }
        let key = perms.iter().map(|p| edge_mask(n, &edges, p)).min().unwrap();
        if canon.insert(key) {
            reps.push(edges);
        }
    }
    reps
}

/// All connected labelled graphs on `n` nodes over `alphabet` with
/// maximum degree at most `max_degree`, up to isomorphism. `keep` filters
/// label vectors before deduplication.
pub fn enumerate_labelled(
    n: usize,
    max_degree: usize,
    alphabet: &[&str],
    mut keep: impl FnMut(&[Label]) -> bool,
) -> Vec<LabelledGraph> {
    let perms = permutations(n);
    let mut out = Vec::new();
    for edges in enumerate_connected(n, max_degree) {
        let base = edge_mask(n, &edges, &perms[0]);
        let autos: Vec<&Vec<usize>> = perms.iter().filter(|p| edge_mask(n, &edges, p) == base).collect();
        let mut seen = BTreeSet::new();
        let total = alphabet.len().pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let d = c % alphabet.len();
                    c /= alphabet.len();
                    d
                })
                .collect();
            let labels: Vec<Label> = idx.iter().map(|&i| alphabet[i].to_string()).collect();
            if !keep(&labels) {
                continue;
            }
            let key = autos
                .iter()
                .map(|p| {
                    let mut v = vec![0; n];
                    for u in 0..n {
                        v[p[u]] = idx[u];
                    }
                    v
                })
                .min()
                .unwrap();
            if seen.insert(key) {
                out.push(LabelledGraph::new(labels, &edges).expect("enumerated graphs are valid"));
            }
        }
    }
    out
}
