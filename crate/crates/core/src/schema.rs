//! Schema graph over domain, slot and domain-slot nodes, plus the adjacency
//! masks consumed by graph-masked attention.
//!
//! Edges follow four rules: every pair of domains is linked; a slot links to
//! each domain that contains it; a domain-slot node links to exactly its
//! domain and its slot; and declared overlap pairs link two slots whose value
//! sets overlap (e.g. destination/departure). Nothing else is linked —
//! in particular, domain-slot nodes never link to each other. The diagonal is
//! all ones so a node can always attend to itself and no softmax row is ever
//! fully masked.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Binary matrix used both as the schema adjacency and as an attention mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![true; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    #[cfg(any(test, feature = "std"))]
    pub fn from_rows(rows: usize, cols: usize, entries: &[&[bool]]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (r, row) in entries.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if self.get(r, c) != self.get(c, r) {
                    return false;
                }
            }
        }
        true
    }

    pub fn has_unit_diagonal(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| self.get(i, i))
    }
}

/// Declarative schema: domains, their slots, and slot pairs whose value sets
/// overlap. Overlaps are declared rather than inferred from an ontology;
/// open-vocabulary tracking assumes full value sets are not known in advance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDef {
    domains: Vec<String>,
    slots_per_domain: Vec<Vec<String>>,
    overlap_pairs: Vec<(String, String)>,
}

impl SchemaDef {
    pub fn new(
        domains: Vec<String>,
        slots_per_domain: Vec<Vec<String>>,
        overlap_pairs: Vec<(String, String)>,
    ) -> Result<Self> {
        if domains.is_empty() {
            return Err(CoreError::Schema("empty domain list".into()));
        }
        if domains.len() != slots_per_domain.len() {
            return Err(CoreError::Schema(format!(
                "{} domains but {} slot lists",
                domains.len(),
                slots_per_domain.len()
            )));
        }
        let mut seen_domains = BTreeSet::new();
        for d in &domains {
            if !seen_domains.insert(d.as_str()) {
                return Err(CoreError::Schema(format!("duplicate domain `{d}`")));
            }
        }
        let mut all_slots = BTreeSet::new();
        for (d, slots) in domains.iter().zip(slots_per_domain.iter()) {
            let mut seen = BTreeSet::new();
            for s in slots {
                if !seen.insert(s.as_str()) {
                    return Err(CoreError::Schema(format!("duplicate slot `{s}` in `{d}`")));
                }
                all_slots.insert(s.as_str());
            }
        }
        for (a, b) in &overlap_pairs {
            if a == b {
                return Err(CoreError::Schema(format!("overlap pair of `{a}` with itself")));
            }
            for s in [a, b] {
                if !all_slots.contains(s.as_str()) {
                    return Err(CoreError::Schema(format!("overlap pair names unknown slot `{s}`")));
                }
            }
        }
        Ok(Self {
            domains,
            slots_per_domain,
            overlap_pairs,
        })
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn slots_of(&self, domain_idx: usize) -> &[String] {
        &self.slots_per_domain[domain_idx]
    }

    pub fn overlap_pairs(&self) -> &[(String, String)] {
        &self.overlap_pairs
    }
}

/// The built graph. Node order is fixed: domains, then distinct slots (in
/// first-appearance order), then domain-slot pairs.
#[derive(Debug, Clone)]
pub struct SchemaGraph {
    domains: Vec<String>,
    slots: Vec<String>,
    /// (domain index, distinct-slot index) per domain-slot node, in
    /// declaration order.
    domain_slots: Vec<(usize, usize)>,
    /// Undirected edges over global node indices, stored as (lo, hi).
    edges: BTreeSet<(usize, usize)>,
}

/// Applies the four edge rules to a schema definition.
pub fn build_schema_graph(def: &SchemaDef) -> Result<SchemaGraph> {
    let domains = def.domains().to_vec();
    let m = domains.len();

    let mut slots: Vec<String> = Vec::new();
    let slot_index = |name: &str, slots: &mut Vec<String>| -> usize {
        match slots.iter().position(|s| s == name) {
            Some(i) => i,
            None => {
                slots.push(name.into());
                slots.len() - 1
            }
        }
    };
    let mut domain_slots: Vec<(usize, usize)> = Vec::new();
    for d in 0..m {
        for s in def.slots_of(d) {
            let si = slot_index(s, &mut slots);
            domain_slots.push((d, si));
        }
    }
    let n = slots.len();
    let j = domain_slots.len();
    debug_assert!(n <= j);

    let mut edges = BTreeSet::new();
    let link = |a: usize, b: usize, edges: &mut BTreeSet<(usize, usize)>| {
        edges.insert((a.min(b), a.max(b)));
    };

    // Rule 1: every pair of domain nodes.
    for a in 0..m {
        for b in (a + 1)..m {
            link(a, b, &mut edges);
        }
    }
    // Rules 2 and 3: slot-domain membership and the two edges into each
    // domain-slot node.
    for (ord, &(d, s)) in domain_slots.iter().enumerate() {
        let slot_node = m + s;
        let pair_node = m + n + ord;
        link(slot_node, d, &mut edges); // rule 2
        link(d, pair_node, &mut edges); // rule 3
        link(slot_node, pair_node, &mut edges); // rule 3
    }
    // Rule 4: declared value overlaps between slots.
    for (a, b) in def.overlap_pairs() {
        let sa = slots.iter().position(|s| s == a);
        let sb = slots.iter().position(|s| s == b);
        match (sa, sb) {
            (Some(sa), Some(sb)) => link(m + sa, m + sb, &mut edges),
            _ => return Err(CoreError::Schema(format!("overlap pair ({a}, {b}) names unknown slot"))),
        }
    }

    Ok(SchemaGraph {
        domains,
        slots,
        domain_slots,
        edges,
    })
}

impl SchemaGraph {
    pub fn num_domains(&self) -> usize {
        self.domains.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn num_domain_slots(&self) -> usize {
        self.domain_slots.len()
    }

    pub fn node_count(&self) -> usize {
        self.num_domains() + self.num_slots() + self.num_domain_slots()
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    /// (domain name, slot name) of the j-th domain-slot pair (0-based).
    pub fn domain_slot(&self, ord: usize) -> (&str, &str) {
        let (d, s) = self.domain_slots[ord];
        (&self.domains[d], &self.slots[s])
    }

    pub fn domain_slot_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.domain_slots.iter().map(|&(d, s)| (self.domains[d].as_str(), self.slots[s].as_str()))
    }

    /// Ordinal (0-based) of a (domain, slot) pair, if declared.
    pub fn find_domain_slot(&self, domain: &str, slot: &str) -> Option<usize> {
        self.domain_slots.iter().position(|&(d, s)| self.domains[d] == domain && self.slots[s] == slot)
    }

    pub fn slot_node_index(&self, slot: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == slot).map(|i| self.num_domains() + i)
    }

    pub fn domain_node_index(&self, domain: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == domain)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Hidden-state row of the j-th domain-slot pair, `j` given as the
    /// 1-based ordinal: row `M + N + j − 1` in 0-based indexing.
    pub fn domain_slot_row_index(&self, j: usize) -> Result<usize> {
        if j == 0 || j > self.num_domain_slots() {
            return Err(CoreError::IndexOutOfRange {
                op: "domain_slot_row_index",
                index: j,
                len: self.num_domain_slots(),
            });
        }
        Ok(self.num_domains() + self.num_slots() + j - 1)
    }

    /// Square adjacency with self-loops: `A[i][j] = 1` iff edge or `i == j`.
    pub fn adjacency_matrix(&self) -> AdjacencyMatrix {
        let n = self.node_count();
        let mut a = AdjacencyMatrix::identity(n);
        for &(i, j) in &self.edges {
            a.set(i, j, true);
            a.set(j, i, true);
        }
        a
    }
}

/// Adjacency over a serialized previous-state sequence: position 0 is the
/// leading [CLS], which connects to every token as a transit node; tokens
/// within one triplet are mutually connected; tokens of different triplets
/// are not; the diagonal is all ones.
///
/// `triplet_spans` are (start, len) token ranges, all starting at 1 or later.
pub fn state_adjacency(seq_len: usize, triplet_spans: &[(usize, usize)]) -> Result<AdjacencyMatrix> {
    if seq_len == 0 {
        return Err(CoreError::Contract {
            op: "state_adjacency",
            detail: "sequence must at least hold the leading [CLS]".into(),
        });
    }
    let mut covered = 1usize;
    for &(start, len) in triplet_spans {
        if start != covered || len == 0 {
            return Err(CoreError::Contract {
                op: "state_adjacency",
                detail: format!("span ({start},{len}) not contiguous from {covered}"),
            });
        }
        covered += len;
    }
    if covered != seq_len {
        return Err(CoreError::Contract {
            op: "state_adjacency",
            detail: format!("spans cover {covered} of {seq_len} tokens"),
        });
    }
    let mut a = AdjacencyMatrix::identity(seq_len);
    for k in 0..seq_len {
        a.set(0, k, true);
        a.set(k, 0, true);
    }
    for &(start, len) in triplet_spans {
        for i in start..start + len {
            for j in start..start + len {
                a.set(i, j, true);
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn def(domains: &[&str], slots: &[&[&str]], overlaps: &[(&str, &str)]) -> SchemaDef {
        SchemaDef::new(
            domains.iter().map(|s| s.to_string()).collect(),
            slots
                .iter()
                .map(|list| list.iter().map(|s| s.to_string()).collect())
                .collect(),
            overlaps
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        )
        .unwrap()
    }

    /// The five-domain schema used in the shipped schema file.
    pub(crate) fn multiwoz_def() -> SchemaDef {
        def(
            &["restaurant", "hotel", "train", "taxi", "attraction"],
            &[
                &["area", "food", "name", "price range", "book day", "book people", "book time"],
                &[
                    "area",
                    "internet",
                    "name",
                    "parking",
                    "price range",
                    "stars",
                    "type",
                    "book day",
                    "book people",
                    "book stay",
                ],
                &["arrive by", "day", "departure", "destination", "leave at", "book people"],
                &["arrive by", "departure", "destination", "leave at"],
                &["area", "name", "type"],
            ],
            &[("destination", "departure"), ("leave at", "arrive by")],
        )
    }

    #[test]
    fn minimal_schema_three_nodes() {
        let g = build_schema_graph(&def(&["d"], &[&["s"]], &[])).unwrap();
        assert_eq!(g.node_count(), 3);
        // nodes: d=0, s=1, o=2; edges (s,d), (d,o), (s,o)
        assert!(g.has_edge(0, 1) && g.has_edge(0, 2) && g.has_edge(1, 2));
        assert_eq!(g.edge_count(), 3);
        let a = g.adjacency_matrix();
        assert_eq!(a.count_ones(), 9); // fully connected incl. self-loops
    }

    #[test]
    fn multiwoz_counts() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        assert_eq!(g.num_domains(), 5);
        assert_eq!(g.num_slots(), 17);
        assert_eq!(g.num_domain_slots(), 30);
    }

    #[test]
    fn multiwoz_domain_domain_edges() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        let m = g.num_domains();
        let mut count = 0;
        for a in 0..m {
            for b in (a + 1)..m {
                if g.has_edge(a, b) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 10); // C(5,2)
    }

    #[test]
    fn multiwoz_overlap_edge_destination_departure() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        let a = g.adjacency_matrix();
        let dest = g.slot_node_index("destination").unwrap();
        let dep = g.slot_node_index("departure").unwrap();
        assert!(a.get(dest, dep));
        assert!(a.get(dep, dest));
    }

    #[test]
    fn disjoint_slots_have_no_edge() {
        let g = build_schema_graph(&def(&["d1", "d2"], &[&["s1"], &[&"s2"[..]]], &[])).unwrap();
        let a = g.adjacency_matrix();
        let s1 = g.slot_node_index("s1").unwrap();
        let s2 = g.slot_node_index("s2").unwrap();
        assert!(!a.get(s1, s2));
        assert!(a.get(0, 1)); // rule 1
    }

    #[test]
    fn domain_slot_row_indices() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        assert_eq!(g.domain_slot_row_index(1).unwrap(), 22); // M+N+j-1 = 5+17+0
        assert_eq!(g.domain_slot_row_index(30).unwrap(), 51);
        assert!(g.domain_slot_row_index(0).is_err());
        assert!(g.domain_slot_row_index(31).is_err());

        let tiny = build_schema_graph(&def(&["d"], &[&["s"]], &[])).unwrap();
        assert_eq!(tiny.domain_slot_row_index(1).unwrap(), 2);
    }

    #[test]
    fn last_domain_slot_is_last_row() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        let last = g.domain_slot_row_index(g.num_domain_slots()).unwrap();
        assert_eq!(last, g.node_count() - 1);
    }

    #[test]
    fn domain_slot_nodes_have_exactly_their_two_edges() {
        let g = build_schema_graph(&multiwoz_def()).unwrap();
        let a = g.adjacency_matrix();
        let (m, n) = (g.num_domains(), g.num_slots());
        for ord in 0..g.num_domain_slots() {
            let node = m + n + ord;
            let ones: usize = (0..m + n).filter(|&k| a.get(node, k)).count();
            assert_eq!(ones, 2, "pair node {ord}");
            // and no pair-pair edges
            for other in 0..g.num_domain_slots() {
                if other != ord {
                    assert!(!a.get(node, m + n + other));
                }
            }
        }
    }

    #[test]
    fn removing_overlaps_changes_only_slot_slot_entries() {
        let with = build_schema_graph(&multiwoz_def()).unwrap();
        let def_no_overlap = SchemaDef::new(
            multiwoz_def().domains().to_vec(),
            (0..5).map(|d| multiwoz_def().slots_of(d).to_vec()).collect(),
            alloc::vec![],
        )
        .unwrap();
        let without = build_schema_graph(&def_no_overlap).unwrap();
        let (aw, ao) = (with.adjacency_matrix(), without.adjacency_matrix());
        let (m, n) = (with.num_domains(), with.num_slots());
        for r in 0..with.node_count() {
            for c in 0..with.node_count() {
                if aw.get(r, c) != ao.get(r, c) {
                    assert!((m..m + n).contains(&r) && (m..m + n).contains(&c), "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn schema_errors() {
        assert!(SchemaDef::new(alloc::vec![], alloc::vec![], alloc::vec![]).is_err());
        assert!(SchemaDef::new(
            alloc::vec!["d".to_string()],
            alloc::vec![alloc::vec!["s".to_string()]],
            alloc::vec![("s".to_string(), "nope".to_string())]
        )
        .is_err());
        assert!(SchemaDef::new(
            alloc::vec!["d".to_string(), "d".to_string()],
            alloc::vec![alloc::vec![], alloc::vec![]],
            alloc::vec![]
        )
        .is_err());
    }

    #[test]
    fn state_adjacency_empty_state() {
        let a = state_adjacency(1, &[]).unwrap();
        assert_eq!(a.rows(), 1);
        assert!(a.get(0, 0));
    }

    #[test]
    fn state_adjacency_single_triplet_all_ones() {
        let a = state_adjacency(6, &[(1, 5)]).unwrap();
        assert_eq!(a.count_ones(), 36);
    }

    #[test]
    fn state_adjacency_two_triplets_block_structure() {
        let a = state_adjacency(7, &[(1, 3), (4, 3)]).unwrap();
        assert!(!a.get(1, 4)); // cross-triplet
        for k in 0..7 {
            assert!(a.get(0, k) && a.get(k, 0)); // CLS transit
        }
        // brute-force check of the defining predicate
        let span_of = |i: usize| -> usize {
            if (1..4).contains(&i) {
                0
            } else {
                1
            }
        };
        for i in 0..7 {
            for j in 0..7 {
                let want = i == 0 || j == 0 || i == j || span_of(i) == span_of(j);
                assert_eq!(a.get(i, j), want, "({i},{j})");
            }
        }
    }

    #[test]
    fn state_adjacency_rejects_gaps() {
        assert!(state_adjacency(7, &[(1, 3), (5, 2)]).is_err());
        assert!(state_adjacency(7, &[(1, 3)]).is_err());
        assert!(state_adjacency(0, &[]).is_err());
    }
}
