//! Decorated genus-0 stable trees and the forgetful push/pull calculus.
//!
//! Trees carry labeled tails, a degree per vertex and a multiset of decoration
//! tokens per vertex. Nothing here evaluates cohomology: decorations only
//! carry a complex degree and, for opaque tokens, whether they may be pushed
//! forward along the forgetful map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{factorial, Rational};
use crate::target::{Degree, TargetModel};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decoration {
    /// `ψ_tail^power`, the tail living on the decorated vertex.
    Psi { tail: u32, power: u32 },
    /// `κ_{a,α}` of the vertex's moduli factor.
    Kappa { a: i32, alpha: usize, degree: i64 },
    /// `ev_tail^*(e_α)`.
    Ev { tail: u32, alpha: usize, degree: i64 },
    /// Opaque class; `pushforward` marks classes with a nonzero push-forward
    /// along the map forgetting a tail at their vertex.
    Token { label: String, degree: i64, pushforward: bool },
}

impl Decoration {
    /// Complex degree.
    pub fn degree(&self) -> i64 {
        match self {
            Decoration::Psi { power, .. } => *power as i64,
            Decoration::Kappa { degree, .. }
            | Decoration::Ev { degree, .. }
            | Decoration::Token { degree, .. } => *degree,
        }
    }

    fn tail(&self) -> Option<u32> {
        match self {
            Decoration::Psi { tail, .. } | Decoration::Ev { tail, .. } => Some(*tail),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub beta: u32,
    #[serde(default)]
    pub decor: Vec<Decoration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tail {
    pub label: u32,
    pub vertex: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoratedTree {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<[usize; 2]>,
    pub tails: Vec<Tail>,
}

impl DecoratedTree {
    /// Builds and validates a tree.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<[usize; 2]>, tails: Vec<Tail>) -> Result<Self> {
        let mut t = DecoratedTree {
            vertices,
            edges,
            tails,
        };
        for v in &mut t.vertices {
            v.decor.sort();
        }
        t.tails.sort_by_key(|t| t.label);
        t.validate()?;
        Ok(t)
    }

    pub fn single(beta: u32, labels: impl IntoIterator<Item = u32>) -> Result<Self> {
        let tails = labels.into_iter().map(|label| Tail { label, vertex: 0 }).collect();
        DecoratedTree::new(vec![Vertex { beta, decor: vec![] }], vec![], tails)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if nv == 0 {
            return Err(Error::InvalidTree("no vertices".into()));
        }
        if self.edges.len() + 1 != nv {
            return Err(Error::InvalidTree(format!(
                "{} edges for {} vertices",
                self.edges.len(),
                nv
            )));
        }
        for e in &self.edges {
            if e[0] >= nv || e[1] >= nv || e[0] == e[1] {
                return Err(Error::InvalidTree(format!("bad edge {e:?}")));
            }
        }
        // Connectivity: with |E| = |V| − 1 this makes it a tree.
        let adj = self.adjacency();
        let mut seen = vec![false; nv];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidTree("graph is not connected".into()));
        }
        let mut labels = BTreeSet::new();
        for t in &self.tails {
            if t.vertex >= nv {
                return Err(Error::InvalidTree(format!("tail {} on missing vertex", t.label)));
            }
            if !labels.insert(t.label) {
                return Err(Error::InvalidTree(format!("duplicate tail {}", t.label)));
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.beta == 0 && self.valence(i) < 3 {
                return Err(Error::InvalidTree(format!("vertex {i} is unstable")));
            }
            for d in &v.decor {
                if let Some(l) = d.tail() {
                    if self.tail_vertex(l) != Some(i) {
                        return Err(Error::InvalidTree(format!(
                            "decoration on tail {l} is not at its vertex"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e[0]].push(e[1]);
            adj[e[1]].push(e[0]);
        }
        adj
    }

    /// Number of half-edges (edge ends and tails) at vertex `v`.
    pub fn valence(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e[0] == v || e[1] == v).count()
            + self.tails.iter().filter(|t| t.vertex == v).count()
    }

    pub fn degree(&self) -> Degree {
        Degree(self.vertices.iter().map(|v| v.beta).sum())
    }

    pub fn tail_vertex(&self, label: u32) -> Option<usize> {
        self.tails.iter().find(|t| t.label == label).map(|t| t.vertex)
    }

    pub fn tail_labels(&self) -> Vec<u32> {
        self.tails.iter().map(|t| t.label).collect()
    }

    pub fn tails_at(&self, v: usize) -> Vec<u32> {
        self.tails.iter().filter(|t| t.vertex == v).map(|t| t.label).collect()
    }

    fn vertex_code(&self, v: usize) -> String {
        format!(
            "{}|{:?}|{:?}",
            self.vertices[v].beta,
            self.vertices[v].decor,
            self.tails_at(v)
        )
    }

    fn rooted_code(&self, adj: &[Vec<usize>], v: usize, parent: Option<usize>) -> String {
        let mut kids: Vec<String> = adj[v]
            .iter()
            .filter(|&&w| Some(w) != parent)
            .map(|&w| self.rooted_code(adj, w, Some(v)))
            .collect();
        kids.sort();
        format!("({}[{}])", self.vertex_code(v), kids.join(","))
    }

    /// Automorphisms of the subtree below `v`, fixing `v`.
    fn rooted_aut(&self, adj: &[Vec<usize>], v: usize, parent: Option<usize>) -> BigInt {
        let mut groups: BTreeMap<String, u32> = BTreeMap::new();
        let mut acc = BigInt::one();
        for &w in adj[v].iter().filter(|&&w| Some(w) != parent) {
            acc *= self.rooted_aut(adj, w, Some(v));
            *groups.entry(self.rooted_code(adj, w, Some(v))).or_default() += 1;
        }
        for c in groups.values() {
            acc *= factorial(*c);
        }
        acc
    }

    fn centers(&self, adj: &[Vec<usize>]) -> Vec<usize> {
        let n = self.vertices.len();
        let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
        let mut alive = n;
        let mut layer: Vec<usize> = (0..n).filter(|&v| deg[v] <= 1).collect();
        let mut removed = vec![false; n];
        while alive > 2 {
            let mut next = Vec::new();
            for &v in &layer {
                removed[v] = true;
                alive -= 1;
                for &w in &adj[v] {
                    if !removed[w] {
                        deg[w] -= 1;
                        if deg[w] == 1 {
                            next.push(w);
                        }
                    }
                }
            }
            layer = next;
        }
        (0..n).filter(|&v| !removed[v]).collect()
    }

    /// Isomorphism-invariant encoding (tails keep their labels).
    pub fn canonical_form(&self) -> String {
        let adj = self.adjacency();
        let centers = self.centers(&adj);
        match centers.as_slice() {
            [c] => self.rooted_code(&adj, *c, None),
            [a, b] => {
                let ca = self.rooted_code(&adj, *a, Some(*b));
                let cb = self.rooted_code(&adj, *b, Some(*a));
                if ca <= cb {
                    format!("<{ca}{cb}>")
                } else {
                    format!("<{cb}{ca}>")
                }
            }
            _ => unreachable!("a tree has one or two centers"),
        }
    }

    /// Order of the group of automorphisms preserving degrees, decorations
    /// and tail labels.
    pub fn aut_order(&self) -> BigInt {
        let adj = self.adjacency();
        let centers = self.centers(&adj);
        match centers.as_slice() {
            [c] => self.rooted_aut(&adj, *c, None),
            [a, b] => {
                let mut acc = self.rooted_aut(&adj, *a, Some(*b)) * self.rooted_aut(&adj, *b, Some(*a));
                if self.rooted_code(&adj, *a, Some(*b)) == self.rooted_code(&adj, *b, Some(*a)) {
                    acc *= 2;
                }
                acc
            }
            _ => unreachable!("a tree has one or two centers"),
        }
    }

    /// Applies a vertex permutation; `perm[old] = new`.
    pub fn permute_vertices(&self, perm: &[usize]) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        for (old, &new) in perm.iter().enumerate() {
            vertices[new] = self.vertices[old].clone();
        }
        let edges = self.edges.iter().map(|e| [perm[e[1]], perm[e[0]]]).collect();
        let tails = self
            .tails
            .iter()
            .map(|t| Tail {
                label: t.label,
                vertex: perm[t.vertex],
            })
            .collect();
        DecoratedTree::new(vertices, edges, tails)
    }

    fn removing_vertex(&self, v: usize) -> (Vec<Vertex>, Vec<[usize; 2]>, Vec<Tail>) {
        let re = |w: usize| if w > v { w - 1 } else { w };
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != v)
            .map(|(_, x)| x.clone())
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| e[0] != v && e[1] != v)
            .map(|e| [re(e[0]), re(e[1])])
            .collect();
        let tails = self
            .tails
            .iter()
            .map(|t| Tail {
                label: t.label,
                vertex: re(t.vertex),
            })
            .collect();
        (vertices, edges, tails)
    }
}

impl fmt::Display for DecoratedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.canonical_form())
    }
}

/// Rational combination of trees up to isomorphism.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeSum {
    terms: BTreeMap<String, (DecoratedTree, Rational)>,
}

impl TreeSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (DecoratedTree, Rational)>) -> Self {
        let mut s = TreeSum::new();
        for (t, c) in terms {
            s.add(t, c);
        }
        s
    }

    pub fn add(&mut self, tree: DecoratedTree, coef: Rational) {
        if coef.is_zero() {
            return;
        }
        let key = tree.canonical_form();
        let remove = match self.terms.get_mut(&key) {
            Some((_, c)) => {
                *c += coef;
                c.is_zero()
            }
            None => {
                self.terms.insert(key.clone(), (tree, coef));
                false
            }
        };
        if remove {
            self.terms.remove(&key);
        }
    }

    pub fn extend(&mut self, other: TreeSum) {
        for (_, (t, c)) in other.terms {
            self.add(t, c);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DecoratedTree, &Rational)> {
        self.terms.values().map(|(t, c)| (t, c))
    }

    pub fn coefficient(&self, tree: &DecoratedTree) -> Rational {
        self.terms
            .get(&tree.canonical_form())
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rational::zero)
    }
}

/// Tails forced onto one side of a two-vertex tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitConstraints {
    /// Tails on the `β₁` vertex.
    pub first: Vec<u32>,
    /// Tails on the `β₂` vertex.
    pub second: Vec<u32>,
    /// No tails besides `second` on the `β₂` vertex.
    pub second_exact: bool,
    /// Require `β₂ ≠ 0`.
    pub second_positive: bool,
}

/// All stable two-vertex trees with tails `1..=n` and total degree `d`
/// satisfying `c`, each once up to isomorphism, with its automorphism order.
pub fn enumerate_two_vertex_divisors(
    n: u32,
    d: u32,
    c: &SplitConstraints,
) -> Result<Vec<(DecoratedTree, BigInt)>> {
    let labels: BTreeSet<u32> = (1..=n).collect();
    for l in c.first.iter().chain(&c.second) {
        if !labels.contains(l) {
            return Err(Error::InvalidTree(format!("pinned tail {l} not in 1..={n}")));
        }
        if c.first.contains(l) && c.second.contains(l) {
            return Err(Error::InvalidTree(format!("tail {l} pinned to both sides")));
        }
    }
    let free: Vec<u32> = labels
        .iter()
        .copied()
        .filter(|l| !c.first.contains(l) && !c.second.contains(l))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for b1 in 0..=d {
        let b2 = d - b1;
        if c.second_positive && b2 == 0 {
            continue;
        }
        for mask in 0u64..(1u64 << free.len()) {
            let mut side1 = c.first.clone();
            let mut side2 = c.second.clone();
            for (k, l) in free.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    side2.push(*l);
                } else {
                    side1.push(*l);
                }
            }
            if c.second_exact && side2.len() != c.second.len() {
                continue;
            }
            if let Some(t) = two_vertex(b1, &side1, b2, &side2, vec![], vec![]) {
                if seen.insert(t.canonical_form()) {
                    let a = t.aut_order();
                    out.push((t, a));
                }
            }
        }
    }
    Ok(out)
}

/// Two-vertex tree, or `None` when unstable.
fn two_vertex(
    b1: u32,
    side1: &[u32],
    b2: u32,
    side2: &[u32],
    decor1: Vec<Decoration>,
    decor2: Vec<Decoration>,
) -> Option<DecoratedTree> {
    if (b1 == 0 && side1.len() < 2) || (b2 == 0 && side2.len() < 2) {
        return None;
    }
    let tails = side1
        .iter()
        .map(|&label| Tail { label, vertex: 0 })
        .chain(side2.iter().map(|&label| Tail { label, vertex: 1 }))
        .collect();
    DecoratedTree::new(
        vec![
            Vertex {
                beta: b1,
                decor: decor1,
            },
            Vertex {
                beta: b2,
                decor: decor2,
            },
        ],
        vec![[0, 1]],
        tails,
    )
    .ok()
}

/// Push-forward along the map forgetting tail `label`.
pub fn forgetful_pushforward(t: &DecoratedTree, label: u32) -> Result<TreeSum> {
    t.validate()?;
    let v = t
        .tail_vertex(label)
        .ok_or_else(|| Error::InvalidTree(format!("no tail {label}")))?;
    if t.vertices[v].decor.iter().any(|d| d.tail() == Some(label)) {
        return Err(Error::NotApplicable(format!(
            "tail {label} carries a decoration; push it forward as a token instead"
        )));
    }
    let aut = Rational::from_integer(t.aut_order());
    let mut tails: Vec<Tail> = t.tails.iter().copied().filter(|x| x.label != label).collect();
    let vertex = &t.vertices[v];
    let mut out = TreeSum::new();
    if vertex.beta != 0 || t.valence(v) > 3 {
        // The vertex stays stable: the fibers of the forgetful map are curves,
        // so only a class of positive fiber degree survives.
        let Some(pos) = vertex.decor.iter().position(
            |d| matches!(d, Decoration::Token { pushforward: true, .. }),
        ) else {
            return Ok(out);
        };
        let mut vertices = t.vertices.clone();
        let pushed = match &vertex.decor[pos] {
            Decoration::Token { label: l, degree, .. } => Decoration::Token {
                label: format!("π_*({l})"),
                degree: degree - 1,
                pushforward: false,
            },
            _ => unreachable!(),
        };
        vertices[v].decor[pos] = pushed;
        let nt = DecoratedTree::new(vertices, t.edges.clone(), tails)?;
        let c = &aut / Rational::from_integer(nt.aut_order());
        out.add(nt, c);
        return Ok(out);
    }
    // Destabilizing: the vertex is contracted.
    if vertex.decor.iter().any(|d| d.degree() != 0) {
        return Ok(out);
    }
    if t.vertices.len() == 1 {
        // M_{0,2}(V, 0) does not exist.
        return Ok(out);
    }
    let neighbors: Vec<usize> = t
        .edges
        .iter()
        .filter_map(|e| {
            if e[0] == v {
                Some(e[1])
            } else if e[1] == v {
                Some(e[0])
            } else {
                None
            }
        })
        .collect();
    let other_tail = tails.iter().position(|x| x.vertex == v);
    let re = |w: usize| if w > v { w - 1 } else { w };
    let reduced = DecoratedTree {
        vertices: t.vertices.clone(),
        edges: t.edges.clone(),
        tails: tails.clone(),
    };
    let (vertices, mut edges, _) = reduced.removing_vertex(v);
    match (neighbors.as_slice(), other_tail) {
        ([w], Some(i)) => {
            tails[i].vertex = *w;
        }
        ([w1, w2], None) => edges.push([re(*w1), re(*w2)]),
        _ => return Err(Error::InvalidTree("unexpected destabilized vertex".into())),
    }
    for x in &mut tails {
        x.vertex = re(x.vertex);
    }
    let nt = DecoratedTree::new(vertices, edges, tails)?;
    let c = &aut / Rational::from_integer(nt.aut_order());
    out.add(nt, c);
    Ok(out)
}

/// Pull-back along the map forgetting a new tail `label`: one term per
/// vertex, with coefficient `|Aut Γ'| / |Aut Γ|`.
pub fn forgetful_pullback(t: &DecoratedTree, label: u32) -> Result<Vec<(DecoratedTree, Rational)>> {
    t.validate()?;
    if t.tail_vertex(label).is_some() {
        return Err(Error::InvalidTree(format!("tail {label} already present")));
    }
    let aut = Rational::from_integer(t.aut_order());
    (0..t.vertices.len())
        .map(|v| {
            let mut tails = t.tails.clone();
            tails.push(Tail { label, vertex: v });
            let nt = DecoratedTree::new(t.vertices.clone(), t.edges.clone(), tails)?;
            let c = Rational::from_integer(nt.aut_order()) / &aut;
            Ok((nt, c))
        })
        .collect()
}

/// `ψ_1^a` on `M_{0,n}(V, β)` as a sum of boundary divisors: tail 1 sits on
/// the `β₂` vertex, tails 2 and 3 on the `β₁` vertex, the remaining tails are
/// distributed freely. Higher powers carry `ψ_1^{a−1}` on the `β₂` vertex.
pub fn psi_boundary_presentation(n: u32, beta: Degree, a: u32) -> Result<TreeSum> {
    if a < 1 {
        return Err(Error::NotApplicable("ψ presentation needs a ≥ 1".into()));
    }
    if n < 3 {
        return Err(Error::NotApplicable(format!("ψ presentation needs n ≥ 3, got {n}")));
    }
    let decor2 = if a > 1 {
        vec![Decoration::Psi {
            tail: 1,
            power: a - 1,
        }]
    } else {
        vec![]
    };
    let free: Vec<u32> = (4..=n).collect();
    let mut out = TreeSum::new();
    for b1 in 0..=beta.0 {
        let b2 = beta.0 - b1;
        for mask in 0u64..(1u64 << free.len()) {
            let mut side1 = vec![2, 3];
            let mut side2 = vec![1];
            for (k, l) in free.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    side2.push(*l);
                } else {
                    side1.push(*l);
                }
            }
            if let Some(t) = two_vertex(b1, &side1, b2, &side2, vec![], decor2.clone()) {
                out.add(t, Rational::one());
            }
        }
    }
    Ok(out)
}

/// `κ_{a,α}` on `M_{0,n}(V, β)` via boundary trees: tails 1 and 2 on the
/// `β₁` vertex and `κ_{a−1,α}` on the `β₂` vertex; for `a = 0` this adds
/// `Σ_i ev_i^*(e_α)` over the remaining tails.
pub fn kappa_boundary_presentation(
    target: &TargetModel,
    n: u32,
    beta: Degree,
    a: i32,
    alpha: usize,
) -> Result<TreeSum> {
    if a < 0 {
        return Err(Error::NotApplicable("κ presentation needs a ≥ 0".into()));
    }
    if n < 2 {
        return Err(Error::NotApplicable(format!("κ presentation needs n ≥ 2, got {n}")));
    }
    if alpha >= target.rank() {
        return Err(Error::BasisIndex(alpha));
    }
    let half = target.grading(alpha) / 2;
    let decor2 = vec![Decoration::Kappa {
        a: a - 1,
        alpha,
        degree: a as i64 - 1 + half,
    }];
    let free: Vec<u32> = (3..=n).collect();
    let mut out = TreeSum::new();
    for b1 in 0..=beta.0 {
        let b2 = beta.0 - b1;
        for mask in 0u64..(1u64 << free.len()) {
            let mut side1 = vec![1, 2];
            let mut side2 = vec![];
            for (k, l) in free.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    side2.push(*l);
                } else {
                    side1.push(*l);
                }
            }
            if let Some(t) = two_vertex(b1, &side1, b2, &side2, vec![], decor2.clone()) {
                out.add(t, Rational::one());
            }
        }
    }
    if a == 0 {
        for i in 3..=n {
            let mut t = DecoratedTree::single(beta.0, 1..=n)?;
            t.vertices[0].decor.push(Decoration::Ev {
                tail: i,
                alpha,
                degree: half,
            });
            t.validate()?;
            out.add(t, Rational::one());
        }
    }
    Ok(out)
}

/// The divisor `D_{i,j}`: tails `i, j` alone on a degree-zero vertex.
pub fn pair_divisor(n: u32, beta: Degree, i: u32, j: u32) -> Result<DecoratedTree> {
    let rest: Vec<u32> = (1..=n).filter(|&l| l != i && l != j).collect();
    two_vertex(beta.0, &rest, 0, &[i, j], vec![], vec![])
        .ok_or_else(|| Error::InvalidTree(format!("D_{{{i},{j}}} is unstable for n = {n}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn token(label: &str, degree: i64, pushforward: bool) -> Decoration {
        Decoration::Token {
            label: label.into(),
            degree,
            pushforward,
        }
    }

    fn star(b1: u32, b2: u32) -> DecoratedTree {
        DecoratedTree::new(
            vec![
                Vertex { beta: 0, decor: vec![] },
                Vertex { beta: b1, decor: vec![] },
                Vertex { beta: b2, decor: vec![] },
            ],
            vec![[0, 1], [0, 2]],
            vec![
                Tail { label: 1, vertex: 0 },
                Tail { label: 2, vertex: 0 },
                Tail { label: 3, vertex: 0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn aut_orders() {
        let t = two_vertex(1, &[1, 2], 1, &[3], vec![], vec![]).unwrap();
        assert_eq!(t.aut_order(), BigInt::one());
        assert_eq!(star(1, 1).aut_order(), BigInt::from(2));
        assert_eq!(star(1, 2).aut_order(), BigInt::one());
        let bare = two_vertex(1, &[], 1, &[], vec![], vec![]).unwrap();
        assert_eq!(bare.aut_order(), BigInt::from(2));
    }

    #[test]
    fn validation() {
        assert!(DecoratedTree::single(0, [1, 2]).is_err());
        assert!(DecoratedTree::single(0, [1, 2, 3]).is_ok());
        assert!(DecoratedTree::single(1, []).is_ok());
        let dup = DecoratedTree::new(
            vec![Vertex { beta: 1, decor: vec![] }],
            vec![],
            vec![Tail { label: 1, vertex: 0 }, Tail { label: 1, vertex: 0 }],
        );
        assert!(dup.is_err());
        let cyc = DecoratedTree::new(
            vec![
                Vertex { beta: 1, decor: vec![] },
                Vertex { beta: 1, decor: vec![] },
            ],
            vec![[0, 1], [1, 0]],
            vec![],
        );
        assert!(cyc.is_err());
    }

    #[test]
    fn two_vertex_enumeration() {
        let c = SplitConstraints {
            second: vec![1],
            second_exact: true,
            ..Default::default()
        };
        let v = enumerate_two_vertex_divisors(3, 2, &c).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|(t, _)| t.vertices[1].beta != 0));

        let v = enumerate_two_vertex_divisors(4, 0, &SplitConstraints::default()).unwrap();
        assert_eq!(v.len(), 3);

        let v = enumerate_two_vertex_divisors(0, 2, &SplitConstraints::default()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].1, BigInt::from(2));
    }

    fn five_tail(b2: u32, decor: Vec<Decoration>) -> DecoratedTree {
        two_vertex(1, &[1, 2, 3], b2, &[4, 5], vec![], decor).unwrap()
    }

    #[test]
    fn pushforward_branches() {
        let g = five_tail(1, vec![token("γ'", 1, true)]);
        let p = forgetful_pushforward(&g, 5).unwrap();
        assert_eq!(p.len(), 1);
        let (t, c) = p.iter().next().unwrap();
        assert_eq!(c, &int(1));
        assert_eq!(t.tail_labels(), vec![1, 2, 3, 4]);
        assert_eq!(t.vertices.len(), 2);

        let g = five_tail(0, vec![token("γ'", 1, false)]);
        assert!(forgetful_pushforward(&g, 5).unwrap().is_empty());

        let g = five_tail(0, vec![]);
        let p = forgetful_pushforward(&g, 5).unwrap();
        let expected = DecoratedTree::single(1, [1, 2, 3, 4]).unwrap();
        assert_eq!(p.coefficient(&expected), int(1));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn pullback_coefficients() {
        let t = DecoratedTree::single(1, [1, 2, 3]).unwrap();
        let p = forgetful_pullback(&t, 4).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].1, int(1));

        let t = two_vertex(1, &[1, 2], 1, &[3], vec![], vec![]).unwrap();
        let p = forgetful_pullback(&t, 4).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|(_, c)| *c == int(1)));

        let p = forgetful_pullback(&star(1, 1), 4).unwrap();
        let coefs: Vec<Rational> = p.iter().map(|(_, c)| c.clone()).collect();
        assert_eq!(coefs, vec![int(1), rat(1, 2), rat(1, 2)]);
        assert!(forgetful_pullback(&star(1, 1), 2).is_err());
    }

    #[test]
    fn psi_presentations() {
        assert_eq!(psi_boundary_presentation(3, Degree(2), 1).unwrap().len(), 2);
        assert!(psi_boundary_presentation(3, Degree(0), 1).unwrap().is_empty());
        assert!(psi_boundary_presentation(3, Degree(1), 0).is_err());
    }

    #[test]
    fn psi_comparison_identity() {
        for n in 3..=5u32 {
            for d in 0..=2u32 {
                let lhs = psi_boundary_presentation(n + 1, Degree(d), 1).unwrap();
                let mut rhs = TreeSum::new();
                for (t, c) in psi_boundary_presentation(n, Degree(d), 1).unwrap().iter() {
                    for (nt, k) in forgetful_pullback(t, n + 1).unwrap() {
                        rhs.add(nt, c * k);
                    }
                }
                rhs.add(pair_divisor(n + 1, Degree(d), 1, n + 1).unwrap(), int(1));
                assert_eq!(lhs, rhs, "n = {n}, d = {d}");
            }
        }
    }

    #[test]
    fn kappa_presentations() {
        let p1 = TargetModel::projective_space(1);
        let p = kappa_boundary_presentation(&p1, 2, Degree(1), 1, 1).unwrap();
        let c = SplitConstraints {
            first: vec![1, 2],
            second_exact: true,
            ..Default::default()
        };
        assert_eq!(p.len(), enumerate_two_vertex_divisors(2, 1, &c).unwrap().len());

        let p = kappa_boundary_presentation(&p1, 3, Degree(0), 0, 0).unwrap();
        assert_eq!(p.len(), 1);
        let (t, _) = p.iter().next().unwrap();
        assert_eq!(t.vertices.len(), 1);
        assert!(kappa_boundary_presentation(&p1, 3, Degree(0), -1, 0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = five_tail(1, vec![token("γ'", 1, true)]);
        let s = serde_json::to_string(&t).unwrap();
        let back: DecoratedTree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(s.contains("\"beta\""));
    }
}
