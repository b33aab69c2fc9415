//! Non-well-founded sets at rational-set scale: finite accessible pointed
//! graphs (APGs) as carriers, bisimulation via partition refinement, level-n
//! well-founded approximants over hash-consed hereditarily finite sets, the
//! exact dyadic pseudometric, a numeric Hausdorff-style iteration as an
//! independent oracle, and the closure-based canonical map.
//!
//! Distances are exact: every value is 0 or a power of two, stored as an
//! exponent and never as an approximate float.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NwfError {
    #[error("node {node} is not reachable from the root")]
    UnreachableNode { node: usize },
    #[error("node {node} lists child {child}, which does not exist")]
    DanglingChild { node: usize, child: usize },
    #[error("root {root} is not a node (graph has {nodes} nodes)")]
    InvalidRoot { root: usize, nodes: usize },
    #[error("level {0} is too large; iterated powersets are rejected above 4")]
    TooLarge(usize),
}

/// A finite accessible pointed graph. Every node is reachable from the
/// root; child lists are kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Apg {
    children: Vec<Vec<usize>>,
    root: usize,
}

impl Apg {
    /// Validates an APG. Unreachable nodes are an error, never pruned.
    pub fn new(mut children: Vec<Vec<usize>>, root: usize) -> Result<Self, NwfError> {
        let n = children.len();
        if root >= n {
            return Err(NwfError::InvalidRoot { root, nodes: n });
        }
        for (node, kids) in children.iter().enumerate() {
            for &child in kids {
                if child >= n {
                    return Err(NwfError::DanglingChild { node, child });
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            for &w in &children[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if let Some(node) = seen.iter().position(|&b| !b) {
            return Err(NwfError::UnreachableNode { node });
        }
        for kids in &mut children {
            kids.sort_unstable();
            kids.dedup();
        }
        Ok(Self { children, root })
    }

    pub fn node_count(&self) -> usize {
        self.children.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }
}

/// Validates node/child/root data as an APG.
pub fn validate_apg(children: Vec<Vec<usize>>, root: usize) -> Result<Apg, NwfError> {
    Apg::new(children, root)
}

// ---------------------------------------------------------------------------
// Partition refinement

/// Coarsest bisimulation on an unlabeled child structure: refine blocks by
/// children-block signatures until stable. Stabilizes within `n` rounds.
fn refine(children: &[Vec<usize>]) -> Vec<usize> {
    let n = children.len();
    let mut block = vec![0usize; n];
    let mut count = 1;
    loop {
        let mut keys: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = vec![0usize; n];
        for v in 0..n {
            let mut sig: Vec<usize> = children[v].iter().map(|&c| block[c]).collect();
            sig.sort_unstable();
            sig.dedup();
            let id = keys.len();
            let entry = keys.entry((block[v], sig)).or_insert(id);
            next[v] = *entry;
        }
        let new_count = keys.len();
        if new_count == count {
            return next;
        }
        block = next;
        count = new_count;
    }
}

/// True iff the roots of the two APGs are bisimilar, computed by partition
/// refinement on the disjoint union.
pub fn bisimilar(g1: &Apg, g2: &Apg) -> bool {
    let n1 = g1.node_count();
    let mut union: Vec<Vec<usize>> = g1.children.clone();
    union.extend(
        g2.children
            .iter()
            .map(|kids| kids.iter().map(|&c| c + n1).collect::<Vec<_>>()),
    );
    let block = refine(&union);
    block[g1.root] == block[n1 + g2.root]
}

/// Collapses bisimilar nodes to a minimal representative APG. Idempotent.
pub fn quotient(g: &Apg) -> Apg {
    let block = refine(&g.children);
    let mut rep: HashMap<usize, usize> = HashMap::new();
    let mut order = Vec::new();
    for v in 0..g.node_count() {
        rep.entry(block[v]).or_insert_with(|| {
            order.push(v);
            order.len() - 1
        });
    }
    let mut children = vec![Vec::new(); order.len()];
    for (new_id, &v) in order.iter().enumerate() {
        let mut kids: Vec<usize> = g.children[v].iter().map(|&c| rep[&block[c]]).collect();
        kids.sort_unstable();
        kids.dedup();
        children[new_id] = kids;
    }
    Apg::new(children, rep[&block[g.root]]).expect("quotient of a valid APG is valid")
}

// ---------------------------------------------------------------------------
// Hash-consed hereditarily finite sets

struct HfStore {
    /// members[id] is the sorted, deduplicated member list of set `id`.
    members: Vec<Box<[u32]>>,
    index: HashMap<Box<[u32]>, u32>,
}

static STORE: Lazy<Mutex<HfStore>> = Lazy::new(|| {
    let empty: Box<[u32]> = Box::new([]);
    let mut index = HashMap::new();
    index.insert(empty.clone(), 0);
    Mutex::new(HfStore {
        members: vec![empty],
        index,
    })
});

fn intern(mut member_ids: Vec<u32>) -> u32 {
    member_ids.sort_unstable();
    member_ids.dedup();
    let key: Box<[u32]> = member_ids.into_boxed_slice();
    let mut store = STORE.lock().expect("hash-cons store poisoned");
    if let Some(&id) = store.index.get(&key) {
        return id;
    }
    let id = store.members.len() as u32;
    store.members.push(key.clone());
    store.index.insert(key, id);
    id
}

fn members_of(id: u32) -> Vec<u32> {
    let store = STORE.lock().expect("hash-cons store poisoned");
    store.members[id as usize].to_vec()
}

/// A canonical well-founded hereditarily finite set, hash-consed so that
/// structural equality is a single id comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankedSet(u32);

impl RankedSet {
    pub fn empty() -> Self {
        RankedSet(0)
    }

    pub fn from_members(members: Vec<RankedSet>) -> Self {
        RankedSet(intern(members.into_iter().map(|m| m.0).collect()))
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn members(&self) -> Vec<RankedSet> {
        members_of(self.0).into_iter().map(RankedSet).collect()
    }

    /// Set-notation rendering; member order follows interner ids, which is
    /// deterministic within a process.
    pub fn render(&self) -> String {
        let inner: Vec<String> = self.members().iter().map(|m| m.render()).collect();
        format!("{{{}}}", inner.join(","))
    }

    /// The (well-founded) APG whose root represents this set.
    pub fn to_apg(&self) -> Apg {
        let mut ids = Vec::new();
        let mut pos: HashMap<u32, usize> = HashMap::new();
        let mut stack = vec![self.0];
        while let Some(id) = stack.pop() {
            if pos.contains_key(&id) {
                continue;
            }
            pos.insert(id, ids.len());
            ids.push(id);
            for m in members_of(id) {
                stack.push(m);
            }
        }
        let children = ids
            .iter()
            .map(|&id| members_of(id).into_iter().map(|m| pos[&m]).collect())
            .collect();
        Apg::new(children, pos[&self.0]).expect("membership closure is reachable")
    }
}

impl fmt::Display for RankedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

// ---------------------------------------------------------------------------
// Approximants

/// Per-node approximant ids for levels 0..=n.
fn approximant_levels(g: &Apg, n: usize) -> Vec<Vec<u32>> {
    let nodes = g.node_count();
    let mut levels = Vec::with_capacity(n + 1);
    levels.push(vec![0u32; nodes]);
    for k in 0..n {
        let prev = &levels[k];
        let next: Vec<u32> = (0..nodes)
            .map(|v| intern(g.children[v].iter().map(|&c| prev[c]).collect()))
            .collect();
        levels.push(next);
    }
    levels
}

/// The level-n approximant of the set at the root: the rank-n well-founded
/// projection, with level 0 collapsing everything to the empty set.
pub fn approximant(g: &Apg, n: usize) -> RankedSet {
    RankedSet(approximant_levels(g, n)[n][g.root])
}

/// Level-n equivalence: equality of level-n approximants.
pub fn approx_equiv(g1: &Apg, g2: &Apg, n: usize) -> bool {
    approximant(g1, n) == approximant(g2, n)
}

// ---------------------------------------------------------------------------
// Exact dyadic distance

/// Exactly 0 or a power of two 2^-n, stored by exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DyadicDistance {
    Zero,
    /// 2^-n.
    Pow(u32),
}

impl DyadicDistance {
    /// Exact conversion: powers of two are representable in an f64.
    pub fn to_f64(&self) -> f64 {
        match self {
            DyadicDistance::Zero => 0.0,
            DyadicDistance::Pow(n) => 0.5f64.powi(*n as i32),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DyadicDistance::Zero)
    }
}

impl fmt::Display for DyadicDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DyadicDistance::Zero => write!(f, "0"),
            DyadicDistance::Pow(0) => write!(f, "1"),
            DyadicDistance::Pow(n) => write!(f, "2^-{n}"),
        }
    }
}

impl PartialOrd for DyadicDistance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicDistance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use DyadicDistance::*;
        match (self, other) {
            (Zero, Zero) => std::cmp::Ordering::Equal,
            (Zero, Pow(_)) => std::cmp::Ordering::Less,
            (Pow(_), Zero) => std::cmp::Ordering::Greater,
            (Pow(a), Pow(b)) => b.cmp(a),
        }
    }
}

/// Exact distance between the sets at the two roots.
///
/// Level equivalence stabilizes within the combined node count N, so
/// agreement of level-N approximants is agreement at every level and the
/// distance is exactly 0; otherwise the distance is 2^-n for the largest n
/// at which the approximants still agree.
pub fn distance(g1: &Apg, g2: &Apg) -> DyadicDistance {
    let cap = g1.node_count() + g2.node_count();
    let lv1 = approximant_levels(g1, cap);
    let lv2 = approximant_levels(g2, cap);
    for n in 0..=cap {
        if lv1[n][g1.root] != lv2[n][g2.root] {
            // Level equality is downward closed; the first failure is at n,
            // so the largest agreeing level is n - 1 (level 0 always agrees).
            return DyadicDistance::Pow(n as u32 - 1);
        }
    }
    DyadicDistance::Zero
}

// ---------------------------------------------------------------------------
// Numeric oracle: the Hausdorff-style iteration

/// Table of iterated distance values over the node-pair space of two APGs.
#[derive(Debug, Clone, PartialEq)]
pub struct TauTable {
    /// values[s][t] for s a node of g1 and t a node of g2, all in [0, 1].
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    root_pair: (usize, usize),
}

impl TauTable {
    pub fn root_value(&self) -> f64 {
        self.values[self.root_pair.0][self.root_pair.1]
    }
}

/// Iterates the three-case distance map over the finite node-pair space,
/// starting from the all-zero table: 0 when both child sets are empty, 1
/// when exactly one is, otherwise half the max of the two sup-inf sweeps.
/// Each iteration halves the error, so the root entry is within 2^-iters of
/// the exact distance.
pub fn tau_iterate(g1: &Apg, g2: &Apg, iters: usize) -> TauTable {
    assert!(iters >= 1, "iters must be at least 1");
    let n1 = g1.node_count();
    let n2 = g2.node_count();
    let mut table = vec![vec![0.0f64; n2]; n1];
    for _ in 0..iters {
        let mut next = vec![vec![0.0f64; n2]; n1];
        for s in 0..n1 {
            for t in 0..n2 {
                let cs = &g1.children[s];
                let ct = &g2.children[t];
                next[s][t] = match (cs.is_empty(), ct.is_empty()) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    (false, false) => {
                        let sup_inf = |outer: &[usize], inner: &[usize], flip: bool| {
                            outer
                                .iter()
                                .map(|&u| {
                                    inner
                                        .iter()
                                        .map(|&v| if flip { table[v][u] } else { table[u][v] })
                                        .fold(f64::INFINITY, f64::min)
                                })
                                .fold(0.0f64, f64::max)
                        };
                        0.5 * sup_inf(cs, ct, false).max(sup_inf(ct, cs, true))
                    }
                };
            }
        }
        table = next;
    }
    TauTable {
        values: table,
        iterations: iters,
        root_pair: (g1.root, g2.root),
    }
}

// ---------------------------------------------------------------------------
// Canonical map

/// The closure-based canonical map, computed literally on the finite graph:
/// each node's child set is closed under distance 0 within the ambient node
/// set, i.e. extended by every node bisimilar to one of its children. On
/// finite APGs all represented sets are hereditarily finite, hence singular,
/// so closure adds only bisimilar duplicates and the result is bisimilar to
/// the quotient; this agreement is asserted.
#[allow(non_snake_case)]
pub fn canonical_F(g: &Apg) -> Apg {
    let block = refine(&g.children);
    let n = g.node_count();
    let mut children = Vec::with_capacity(n);
    for v in 0..n {
        let mut closed: Vec<usize> = (0..n)
            .filter(|&w| g.children[v].iter().any(|&c| block[c] == block[w]))
            .collect();
        closed.sort_unstable();
        closed.dedup();
        children.push(closed);
    }
    let result = Apg::new(children, g.root).expect("closure preserves reachability");
    assert!(
        bisimilar(&result, &quotient(g)),
        "canonical image must be bisimilar to the quotient on finite APGs"
    );
    result
}

// ---------------------------------------------------------------------------
// Builders

/// The empty set: a single node with no children.
pub fn empty() -> Apg {
    Apg::new(vec![vec![]], 0).expect("valid by construction")
}

/// The von Neumann-style numeral chain: 0 = {}, n+1 = {n}.
pub fn numeral(n: usize) -> Apg {
    let children = (0..=n)
        .map(|i| if i < n { vec![i + 1] } else { vec![] })
        .collect();
    Apg::new(children, 0).expect("valid by construction")
}

/// The unique set satisfying Omega = {Omega}: one self-loop node.
pub fn omega() -> Apg {
    Apg::new(vec![vec![0]], 0).expect("valid by construction")
}

/// The level-n iterated powerset of the empty set, as an APG. Rejected
/// above level 4: the next level already has 2^16 members.
pub fn s_level(n: usize) -> Result<Apg, NwfError> {
    if n > 4 {
        return Err(NwfError::TooLarge(n));
    }
    let mut current = RankedSet::empty();
    for _ in 0..n {
        let members = current.members();
        let mut subsets = Vec::with_capacity(1 << members.len());
        for mask in 0u32..(1 << members.len()) {
            let subset: Vec<RankedSet> = members
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, m)| *m)
                .collect();
            subsets.push(RankedSet::from_members(subset));
        }
        current = RankedSet::from_members(subsets);
    }
    Ok(current.to_apg())
}

// ---------------------------------------------------------------------------
// Axioms report

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomsReport {
    pub samples: usize,
    pub pairs_checked: usize,
    pub triples_checked: usize,
    pub failures: Vec<String>,
}

impl AxiomsReport {
    pub fn all_hold(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the pseudometric axioms on all sampled pairs and triples: values
/// in [0, 1], reflexive zero, symmetry and the triangle inequality, all in
/// exact dyadic arithmetic.
pub fn pseudometric_axioms_report(samples: &[Apg]) -> AxiomsReport {
    let n = samples.len();
    let mut d = vec![vec![DyadicDistance::Zero; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = distance(&samples[i], &samples[j]);
        }
    }
    let mut failures = Vec::new();
    for i in 0..n {
        if !d[i][i].is_zero() {
            failures.push(format!("d(s{i}, s{i}) = {} != 0", d[i][i]));
        }
        for j in 0..n {
            if d[i][j].to_f64() > 1.0 {
                failures.push(format!("d(s{i}, s{j}) = {} > 1", d[i][j]));
            }
            if d[i][j] != d[j][i] {
                failures.push(format!("d(s{i}, s{j}) != d(s{j}, s{i})"));
            }
        }
    }
    let mut triples_checked = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                triples_checked += 1;
                if d[i][k].to_f64() > d[i][j].to_f64() + d[j][k].to_f64() {
                    failures.push(format!(
                        "triangle violated: d(s{i}, s{k}) = {} > {} + {}",
                        d[i][k], d[i][j], d[j][k]
                    ));
                }
            }
        }
    }
    AxiomsReport {
        samples: n,
        pairs_checked: n * n,
        triples_checked,
        failures,
    }
}
