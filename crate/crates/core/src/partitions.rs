//! Set partitions and pair partitions of `[p] = {1, ..., p}`: enumeration,
//! crossing structure, intersection graphs, and the noncrossing closure.
//!
//! Partitions are kept in canonical form: every block sorted ascending and
//! blocks ordered by their minimum element. Elements are 1-based.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_cap, domain, Error, Result};

/// Default largest ground set for pair-partition enumeration (`15!! ~ 2.0e6` pairings).
pub const DEFAULT_PAIR_CAP: usize = 16;
/// Default largest ground set for set-partition enumeration.
pub const DEFAULT_SET_CAP: usize = 12;

const UNMATCHED: usize = usize::MAX;

/// A set partition of `[p]` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    p: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates and canonicalizes a list of blocks covering `[p]`.
    pub fn new(p: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; p + 1];
        let mut blocks = blocks;
        for block in &mut blocks {
            if block.is_empty() {
                return Err(domain("partition has an empty block"));
            }
            block.sort_unstable();
            for &x in block.iter() {
                if x == 0 || x > p {
                    return Err(domain(format!("element {x} outside the ground set [1, {p}]")));
                }
                if seen[x] {
                    return Err(domain(format!("element {x} appears more than once")));
                }
                seen[x] = true;
            }
        }
        if let Some(missing) = (1..=p).find(|&x| !seen[x]) {
            return Err(domain(format!("element {missing} is not covered by any block")));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { p, blocks })
    }

    /// Builds the partition whose blocks are the level sets of `labels`
    /// (position `i` of the slice is element `i + 1`).
    pub fn from_labels<L: Eq + std::hash::Hash + Copy>(labels: &[L]) -> Self {
        let mut index: HashMap<L, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (pos, label) in labels.iter().enumerate() {
            let b = *index.entry(*label).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(pos + 1);
        }
        // First-occurrence order is already ordering by minimum element.
        Self {
            p: labels.len(),
            blocks,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_singleton(&self) -> bool {
        self.blocks.iter().any(|b| b.len() == 1)
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    /// `labels[i]` is the index of the block containing element `i + 1`.
    pub fn block_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.p];
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                labels[x - 1] = b;
            }
        }
        labels
    }

    /// Rotates the ground set cyclically: element `x` becomes `x + shift (mod p)`.
    pub fn rotate(&self, shift: usize) -> Self {
        let p = self.p;
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&x| (x - 1 + shift) % p + 1).collect())
            .collect();
        Self::new(p, blocks).expect("rotation preserves validity")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(ToString::to_string).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

/// Parses `"1,3|2,4"`; the ground set is `[max element]`. Whitespace is ignored.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Partition::new(0, Vec::new());
        }
        let mut blocks = Vec::new();
        for part in compact.split('|') {
            let block = part
                .split(',')
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad element {t:?} in {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
        }
        let p = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::new(p, blocks).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// A partition of `[p]` into blocks of size exactly two.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairPartition(Partition);

impl PairPartition {
    pub fn new(p: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let blocks = pairs.iter().map(|&(a, b)| vec![a, b]).collect();
        Self::from_partition(Partition::new(p, blocks)?)
    }

    pub fn from_partition(partition: Partition) -> Result<Self> {
        if !partition.is_pairing() {
            return Err(domain(format!("{partition} is not a pair partition")));
        }
        Ok(Self(partition))
    }

    /// Builds a pairing from a 0-based involution without fixed points.
    pub fn from_partner(partner: &[usize]) -> Self {
        let blocks = partner
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i < j)
            .map(|(i, &j)| vec![i + 1, j + 1])
            .collect();
        Self(Partition {
            p: partner.len(),
            blocks,
        })
    }

    /// 0-based involution: `partner[i]` is matched with `i`.
    pub fn partner(&self) -> Vec<usize> {
        let mut partner = vec![0; self.0.p];
        for b in &self.0.blocks {
            partner[b[0] - 1] = b[1] - 1;
            partner[b[1] - 1] = b[0] - 1;
        }
        partner
    }

    /// The blocks as `(smaller, larger)` pairs, 1-based, ordered by first element.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.blocks.iter().map(|b| (b[0], b[1]))
    }

    pub fn p(&self) -> usize {
        self.0.p
    }

    pub fn num_blocks(&self) -> usize {
        self.0.blocks.len()
    }

    pub fn as_partition(&self) -> &Partition {
        &self.0
    }

    pub fn into_partition(self) -> Partition {
        self.0
    }
}

impl From<PairPartition> for Partition {
    fn from(p: PairPartition) -> Self {
        p.0
    }
}

impl fmt::Display for PairPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for PairPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let partition: Partition = s.parse()?;
        if partition.p() == 0 {
            return Err(Error::Parse("empty pairing".into()));
        }
        PairPartition::from_partition(partition).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Whether blocks `a` and `b` (each sorted ascending) cross: there are
/// `i < k < j < l` with `i, j` in one block and `k, l` in the other.
pub fn blocks_cross(a: &[usize], b: &[usize]) -> bool {
    // Merge the two blocks and count maximal runs of elements from the same
    // block; a crossing exists iff the run sequence has length at least four.
    let (mut i, mut j) = (0, 0);
    let mut runs = 0;
    let mut last: Option<bool> = None;
    while i < a.len() || j < b.len() {
        let from_a = j == b.len() || (i < a.len() && a[i] < b[j]);
        if from_a {
            i += 1;
        } else {
            j += 1;
        }
        if last != Some(from_a) {
            runs += 1;
            if runs >= 4 {
                return true;
            }
            last = Some(from_a);
        }
    }
    false
}

/// Graph on the blocks of a partition with an edge between crossing blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionGraph {
    adjacency: Vec<Vec<bool>>,
}

impl IntersectionGraph {
    pub fn new(partition: &Partition) -> Self {
        let blocks = partition.blocks();
        let k = blocks.len();
        let mut adjacency = vec![vec![false; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                if blocks_cross(&blocks[i], &blocks[j]) {
                    adjacency[i][j] = true;
                    adjacency[j][i] = true;
                }
            }
        }
        Self { adjacency }
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i]
            .iter()
            .enumerate()
            .filter_map(|(j, &e)| e.then_some(j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let k = self.num_vertices();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Breadth-first 2-coloring.
    pub fn is_bipartite(&self) -> bool {
        let k = self.num_vertices();
        let mut color: Vec<Option<bool>> = vec![None; k];
        for start in 0..k {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let c = color[v].unwrap();
                for w in self.neighbors(v) {
                    match color[w] {
                        None => {
                            color[w] = Some(!c);
                            queue.push_back(w);
                        }
                        Some(cw) if cw == c => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }
}

/// Block count, crossing and noncrossing block counts, and the number of
/// connected components of the intersection graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PartitionStats {
    pub num_blocks: usize,
    pub cr: usize,
    pub ncr: usize,
    pub cc: usize,
}

pub fn stats(partition: &Partition) -> PartitionStats {
    let graph = IntersectionGraph::new(partition);
    stats_from_graph(&graph)
}

fn stats_from_graph(graph: &IntersectionGraph) -> PartitionStats {
    let num_blocks = graph.num_vertices();
    let cr = (0..num_blocks).filter(|&i| graph.degree(i) > 0).count();
    PartitionStats {
        num_blocks,
        cr,
        ncr: num_blocks - cr,
        cc: graph.components().len(),
    }
}

pub fn is_noncrossing(partition: &Partition) -> bool {
    let blocks = partition.blocks();
    (0..blocks.len()).all(|i| (i + 1..blocks.len()).all(|j| !blocks_cross(&blocks[i], &blocks[j])))
}

/// Connected: the intersection graph is connected and the blocks span the
/// whole ground set.
pub fn is_connected(partition: &Partition) -> bool {
    if partition.num_blocks() == 0 {
        return false;
    }
    let graph = IntersectionGraph::new(partition);
    let spans = partition.blocks().iter().map(|b| b[0]).min() == Some(1)
        && partition.blocks().iter().map(|b| *b.last().unwrap()).max() == Some(partition.p());
    spans && graph.components().len() == 1
}

pub fn is_bipartite(partition: &Partition) -> bool {
    IntersectionGraph::new(partition).is_bipartite()
}

/// Connectedness by the interval criterion: no proper, nonempty subinterval
/// of `[p]` is a union of blocks.
pub fn is_connected_by_intervals(partition: &Partition) -> bool {
    let p = partition.p();
    if p == 0 {
        return false;
    }
    let labels = partition.block_labels();
    let mut lo = vec![usize::MAX; partition.num_blocks()];
    let mut hi = vec![0; partition.num_blocks()];
    for (pos, &b) in labels.iter().enumerate() {
        lo[b] = lo[b].min(pos);
        hi[b] = hi[b].max(pos);
    }
    for start in 0..p {
        for end in start..p {
            if start == 0 && end == p - 1 {
                continue;
            }
            let closed = (start..=end).all(|pos| {
                let b = labels[pos];
                lo[b] >= start && hi[b] <= end
            });
            if closed {
                return false;
            }
        }
    }
    true
}

/// One block `T` of the noncrossing closure together with the connected
/// pairing it carries, relabeled order-preservingly onto `[|T|]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureComponent {
    pub support: Vec<usize>,
    pub pairing: PairPartition,
}

/// The image of a pairing under the noncrossing-closure bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureDecomposition {
    pub closure: Partition,
    /// One entry per closure block, in the closure's canonical block order.
    pub components: Vec<ClosureComponent>,
}

impl ClosureDecomposition {
    /// Inverse of [`noncrossing_closure`].
    pub fn reassemble(&self) -> PairPartition {
        let p = self.closure.p();
        let mut partner = vec![UNMATCHED; p];
        for comp in &self.components {
            for (a, b) in comp.pairing.pairs() {
                let x = comp.support[a - 1] - 1;
                let y = comp.support[b - 1] - 1;
                partner[x] = y;
                partner[y] = x;
            }
        }
        PairPartition::from_partner(&partner)
    }
}

pub fn noncrossing_closure(pairing: &PairPartition) -> ClosureDecomposition {
    let partition = pairing.as_partition();
    let graph = IntersectionGraph::new(partition);
    let mut components: Vec<ClosureComponent> = graph
        .components()
        .into_iter()
        .map(|comp| {
            let mut support: Vec<usize> = comp
                .iter()
                .flat_map(|&b| partition.blocks()[b].iter().copied())
                .collect();
            support.sort_unstable();
            let rank = |x: usize| support.binary_search(&x).unwrap() + 1;
            let pairs: Vec<(usize, usize)> = comp
                .iter()
                .map(|&b| {
                    let blk = &partition.blocks()[b];
                    (rank(blk[0]), rank(blk[1]))
                })
                .collect();
            let pairing = PairPartition::new(support.len(), &pairs).expect("component is a pairing");
            ClosureComponent { support, pairing }
        })
        .collect();
    components.sort_by_key(|c| c.support[0]);
    let closure = Partition {
        p: partition.p(),
        blocks: components.iter().map(|c| c.support.clone()).collect(),
    };
    ClosureDecomposition {
        closure,
        components,
    }
}

/// Streaming enumeration of the pair partitions of `[p]`.
///
/// Order: element 1 is paired with each admissible partner in increasing
/// order, then the remaining elements are paired recursively in the same way.
#[derive(Debug, Clone)]
pub struct PairPartitions {
    partner: Vec<usize>,
    stack: Vec<(usize, usize)>,
    floor: usize,
    started: bool,
    done: bool,
}

impl PairPartitions {
    fn start(p: usize, cap: usize) -> Result<Self> {
        if !p.is_multiple_of(2) {
            return Err(domain(format!("pair partitions need an even ground set, got p = {p}")));
        }
        if p < 2 {
            return Err(domain("pair partitions need p >= 2"));
        }
        check_cap("pair-partition ground set p", p, cap)?;
        Ok(Self {
            partner: vec![UNMATCHED; p],
            stack: Vec::with_capacity(p / 2),
            floor: 0,
            started: false,
            done: false,
        })
    }

    fn link(&mut self, i: usize, j: usize) {
        self.partner[i] = j;
        self.partner[j] = i;
        self.stack.push((i, j));
    }

    fn fill(&mut self) {
        let p = self.partner.len();
        let mut i = 0;
        loop {
            while i < p && self.partner[i] != UNMATCHED {
                i += 1;
            }
            if i == p {
                return;
            }
            let j = (i + 1..p).find(|&k| self.partner[k] == UNMATCHED).expect("even count");
            self.link(i, j);
        }
    }

    fn advance(&mut self) -> bool {
        let p = self.partner.len();
        while self.stack.len() > self.floor {
            let (i, j) = self.stack.pop().unwrap();
            self.partner[i] = UNMATCHED;
            self.partner[j] = UNMATCHED;
            if let Some(next) = (j + 1..p).find(|&k| self.partner[k] == UNMATCHED) {
                self.link(i, next);
                self.fill();
                return true;
            }
        }
        false
    }

    /// Only the pairings in which element 1 is matched with `first_partner`
    /// (1-based). The chunks for `first_partner = 2..=p` partition the full stream.
    pub fn with_first_partner(p: usize, first_partner: usize, cap: usize) -> Result<Self> {
        let mut it = Self::start(p, cap)?;
        if !(2..=p).contains(&first_partner) {
            return Err(domain(format!("partner of 1 must lie in [2, {p}]")));
        }
        it.link(0, first_partner - 1);
        it.floor = 1;
        Ok(it)
    }
}

impl Iterator for PairPartitions {
    type Item = PairPartition;

    fn next(&mut self) -> Option<PairPartition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill();
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(PairPartition::from_partner(&self.partner))
    }
}

pub fn enumerate_pair_partitions(p: usize) -> Result<PairPartitions> {
    enumerate_pair_partitions_capped(p, DEFAULT_PAIR_CAP)
}

pub fn enumerate_pair_partitions_capped(p: usize, cap: usize) -> Result<PairPartitions> {
    PairPartitions::start(p, cap)
}

/// Streaming enumeration of the set partitions of `[p]` whose blocks all
/// have at least `min_block_size` elements, via restricted growth strings.
#[derive(Debug, Clone)]
pub struct SetPartitions {
    rgs: Vec<usize>,
    min_block_size: usize,
    started: bool,
    done: bool,
}

impl SetPartitions {
    fn increment(&mut self) -> bool {
        let p = self.rgs.len();
        for i in (1..p).rev() {
            let prefix_max = *self.rgs[..i].iter().max().unwrap();
            if self.rgs[i] <= prefix_max {
                self.rgs[i] += 1;
                for x in &mut self.rgs[i + 1..] {
                    *x = 0;
                }
                return true;
            }
        }
        false
    }

    fn admissible(&self) -> bool {
        if self.min_block_size <= 1 {
            return true;
        }
        let mut sizes = vec![0usize; self.rgs.len()];
        for &b in &self.rgs {
            sizes[b] += 1;
        }
        sizes.iter().all(|&s| s == 0 || s >= self.min_block_size)
    }
}

impl Iterator for SetPartitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        loop {
            if self.done {
                return None;
            }
            if !self.started {
                self.started = true;
            } else if !self.increment() {
                self.done = true;
                return None;
            }
            if self.admissible() {
                return Some(Partition::from_labels(&self.rgs));
            }
        }
    }
}

pub fn enumerate_set_partitions(p: usize, min_block_size: usize) -> Result<SetPartitions> {
    enumerate_set_partitions_capped(p, min_block_size, DEFAULT_SET_CAP)
}

pub fn enumerate_set_partitions_capped(
    p: usize,
    min_block_size: usize,
    cap: usize,
) -> Result<SetPartitions> {
    if p == 0 {
        return Err(domain("set partitions need p >= 1"));
    }
    check_cap("set-partition ground set p", p, cap)?;
    Ok(SetPartitions {
        rgs: vec![0; p],
        min_block_size,
        started: false,
        done: min_block_size > p,
    })
}

/// Per-`p` tallies over all pair partitions of `[p]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PairingCensus {
    pub total: u64,
    pub noncrossing: u64,
    pub connected: u64,
    pub bipartite_connected: u64,
}

impl PairingCensus {
    fn add(self, other: Self) -> Self {
        Self {
            total: self.total + other.total,
            noncrossing: self.noncrossing + other.noncrossing,
            connected: self.connected + other.connected,
            bipartite_connected: self.bipartite_connected + other.bipartite_connected,
        }
    }
}

fn census_memo() -> &'static Mutex<HashMap<usize, PairingCensus>> {
    static MEMO: OnceLock<Mutex<HashMap<usize, PairingCensus>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// Counts pairings of `[p]` by class. Memoized per `p`; the enumeration is
/// split by the partner of element 1 and run in parallel.
pub fn pairing_census(p: usize, cap: usize) -> Result<PairingCensus> {
    PairPartitions::start(p, cap)?;
    if let Some(c) = census_memo().lock().unwrap().get(&p) {
        return Ok(*c);
    }
    let census = (2..=p)
        .into_par_iter()
        .map(|first| {
            let mut c = PairingCensus::default();
            for pi in PairPartitions::with_first_partner(p, first, cap).expect("validated") {
                let graph = IntersectionGraph::new(pi.as_partition());
                let st = stats_from_graph(&graph);
                c.total += 1;
                if st.cr == 0 {
                    c.noncrossing += 1;
                }
                // For pairings every closure block is a union of blocks, so a
                // single component already spans [p].
                if st.cc == 1 {
                    c.connected += 1;
                    if graph.is_bipartite() {
                        c.bipartite_connected += 1;
                    }
                }
            }
            c
        })
        .reduce(PairingCensus::default, PairingCensus::add);
    census_memo().lock().unwrap().insert(p, census);
    Ok(census)
}

/// Number of connected pair partitions of `[p]`.
pub fn count_connected(p: usize) -> Result<u64> {
    Ok(pairing_census(p, DEFAULT_PAIR_CAP)?.connected)
}

/// Number of connected pair partitions of `[p]` with a bipartite intersection graph.
pub fn count_bipartite_connected(p: usize) -> Result<u64> {
    Ok(pairing_census(p, DEFAULT_PAIR_CAP)?.bipartite_connected)
}
