//! Finite relational vocabularies and structures, homomorphism machinery,
//! and the Gaifman graph.
//!
//! Elements are addressed by their index in declaration order; every search
//! iterates in that order, so witnesses are canonical (lexicographically
//! first) regardless of call site.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Universe sizes above this make permutation-based canonicalization and
/// isomorphism search infeasible; operations that need them refuse larger
/// inputs instead of hanging.
pub const MAX_CANONICAL_SIZE: usize = 10;

pub fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// A relational vocabulary: an ordered list of relation symbols with arities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<(String, usize)>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<S: AsRef<str>>(symbols: &[(S, usize)]) -> Result<Self> {
        let mut v = Vocabulary {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for (name, arity) in symbols {
            v.add_symbol(name.as_ref(), *arity)?;
        }
        Ok(v)
    }

    pub fn empty() -> Self {
        Vocabulary {
            symbols: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add_symbol(&mut self, name: &str, arity: usize) -> Result<usize> {
        if !is_identifier(name) {
            return Err(Error::precondition(format!(
                "relation name `{name}` is not an identifier"
            )));
        }
        if arity == 0 {
            return Err(Error::precondition(format!(
                "relation `{name}` must have arity >= 1"
            )));
        }
        if self.index.contains_key(name) {
            return Err(Error::precondition(format!(
                "duplicate relation symbol `{name}`"
            )));
        }
        let id = self.symbols.len();
        self.index.insert(name.to_string(), id);
        self.symbols.push((name.to_string(), arity));
        Ok(id)
    }

    pub fn symbols(&self) -> &[(String, usize)] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn arity(&self, symbol: usize) -> usize {
        self.symbols[symbol].1
    }

    pub fn name(&self, symbol: usize) -> &str {
        &self.symbols[symbol].0
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Largest arity over all symbols (0 for the empty vocabulary).
    pub fn max_arity(&self) -> usize {
        self.symbols.iter().map(|(_, a)| *a).max().unwrap_or(0)
    }
}

/// A relation table: a set of tuples, kept in first-occurrence order so that
/// rendering preserves the input's declaration order.
#[derive(Debug, Clone, Default)]
pub struct TupleSet {
    rows: Vec<Vec<usize>>,
    seen: HashSet<Vec<usize>>,
}

impl TupleSet {
    fn insert(&mut self, row: Vec<usize>) -> bool {
        if self.seen.contains(&row) {
            return false;
        }
        self.seen.insert(row.clone());
        self.rows.push(row);
        true
    }

    pub fn contains(&self, row: &[usize]) -> bool {
        self.seen.contains(row)
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl PartialEq for TupleSet {
    fn eq(&self, other: &Self) -> bool {
        self.seen == other.seen
    }
}
impl Eq for TupleSet {}

/// A finite relational structure: a vocabulary, an ordered universe, one
/// tuple set per symbol, and an optional distinguished point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    vocab: Vocabulary,
    universe: Vec<String>,
    elem_index: HashMap<String, usize>,
    tables: Vec<TupleSet>,
    point: Option<usize>,
}

impl Structure {
    pub fn new(vocab: Vocabulary) -> Self {
        let tables = vec![TupleSet::default(); vocab.len()];
        Structure {
            vocab,
            universe: Vec::new(),
            elem_index: HashMap::new(),
            tables,
            point: None,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn element_name(&self, elem: usize) -> &str {
        &self.universe[elem]
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elem_index.get(name).copied()
    }

    pub fn point(&self) -> Option<usize> {
        self.point
    }

    pub fn add_element(&mut self, name: &str) -> Result<usize> {
        if !is_identifier(name) {
            return Err(Error::precondition(format!(
                "element name `{name}` is not an identifier"
            )));
        }
        if self.elem_index.contains_key(name) {
            return Err(Error::precondition(format!("duplicate element `{name}`")));
        }
        let id = self.universe.len();
        self.elem_index.insert(name.to_string(), id);
        self.universe.push(name.to_string());
        Ok(id)
    }

    pub fn set_point(&mut self, elem: usize) -> Result<()> {
        if elem >= self.size() {
            return Err(Error::precondition("point is not in the universe"));
        }
        self.point = Some(elem);
        Ok(())
    }

    /// Inserts a tuple; duplicate tuples are merged (tables are sets).
    pub fn add_tuple(&mut self, symbol: usize, row: Vec<usize>) -> Result<()> {
        if symbol >= self.vocab.len() {
            return Err(Error::precondition("unknown relation symbol"));
        }
        if row.len() != self.vocab.arity(symbol) {
            return Err(Error::precondition(format!(
                "arity mismatch for `{}`: expected {}, got {}",
                self.vocab.name(symbol),
                self.vocab.arity(symbol),
                row.len()
            )));
        }
        if row.iter().any(|&e| e >= self.size()) {
            return Err(Error::precondition("tuple entry not in the universe"));
        }
        self.tables[symbol].insert(row);
        Ok(())
    }

    pub fn add_tuple_named(&mut self, symbol: &str, elems: &[&str]) -> Result<()> {
        let sym = self
            .vocab
            .lookup(symbol)
            .ok_or_else(|| Error::precondition(format!("unknown relation `{symbol}`")))?;
        let row = elems
            .iter()
            .map(|e| {
                self.element_index(e)
                    .ok_or_else(|| Error::precondition(format!("unknown element `{e}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.add_tuple(sym, row)
    }

    pub fn table(&self, symbol: usize) -> &TupleSet {
        &self.tables[symbol]
    }

    pub fn has_tuple(&self, symbol: usize, row: &[usize]) -> bool {
        self.tables[symbol].contains(row)
    }

    pub fn tuple_count(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    pub fn same_vocabulary(&self, other: &Structure) -> bool {
        self.vocab == other.vocab
    }

    /// The Gaifman graph: vertices are the universe, with an edge between two
    /// distinct elements whenever they occur together in some tuple.
    pub fn gaifman_graph(&self) -> Graph {
        let mut edges = BTreeSet::new();
        for table in &self.tables {
            for row in table.rows() {
                for i in 0..row.len() {
                    for j in (i + 1)..row.len() {
                        let (a, b) = (row[i], row[j]);
                        if a != b {
                            edges.insert((a.min(b), a.max(b)));
                        }
                    }
                }
            }
        }
        Graph {
            vertices: self.universe.clone(),
            edges,
        }
    }

    /// Disjoint union over the same vocabulary. Elements keep their names;
    /// clashing names from `other` get a numeric suffix.
    pub fn disjoint_union(&self, other: &Structure) -> Result<Structure> {
        if !self.same_vocabulary(other) {
            return Err(Error::precondition("vocabulary mismatch"));
        }
        let mut out = self.clone();
        out.point = None;
        let mut rename = Vec::with_capacity(other.size());
        for name in other.universe() {
            let mut candidate = name.clone();
            let mut n = 2usize;
            while out.elem_index.contains_key(&candidate) {
                candidate = format!("{name}_{n}");
                n += 1;
            }
            rename.push(out.add_element(&candidate)?);
        }
        for sym in 0..self.vocab.len() {
            for row in other.table(sym).rows() {
                let mapped: Vec<usize> = row.iter().map(|&e| rename[e]).collect();
                out.add_tuple(sym, mapped)?;
            }
        }
        Ok(out)
    }

    /// Expands the vocabulary with a fresh binary symbol interpreted as the
    /// identity relation. Full and counting equivalences reflect equality;
    /// running cover constructions on the expanded structure makes that
    /// visible to purely relational machinery.
    pub fn with_identity_relation(&self) -> Structure {
        let mut name = "I".to_string();
        let mut n = 0usize;
        while self.vocab.lookup(&name).is_some() {
            name = format!("I{n}");
            n += 1;
        }
        let mut vocab = self.vocab.clone();
        vocab.add_symbol(&name, 2).expect("fresh symbol");
        let mut out = Structure::new(vocab);
        for e in &self.universe {
            out.add_element(e).expect("copied element");
        }
        out.point = self.point;
        for sym in 0..self.vocab.len() {
            for row in self.table(sym).rows() {
                out.add_tuple(sym, row.clone()).expect("copied tuple");
            }
        }
        let id_sym = out.vocab.len() - 1;
        for e in 0..out.size() {
            out.add_tuple(id_sym, vec![e, e]).expect("diagonal tuple");
        }
        out
    }

    /// Canonical isomorphism key: the minimum, over all universe
    /// permutations, of the relabelled sorted tuple list (with the point's
    /// image, so pointed structures compare as pointed).
    pub fn canonical_key(&self) -> Result<CanonicalKey> {
        let n = self.size();
        if n > MAX_CANONICAL_SIZE {
            return Err(Error::precondition(format!(
                "canonical form is only computed for universes of size <= {MAX_CANONICAL_SIZE}"
            )));
        }
        let mut best: Option<CanonicalKey> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            let key = self.key_under(&perm);
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        Ok(best.unwrap_or(CanonicalKey {
            size: 0,
            point: None,
            tuples: Vec::new(),
        }))
    }

    fn key_under(&self, perm: &[usize]) -> CanonicalKey {
        let mut tuples = Vec::with_capacity(self.tuple_count());
        for (sym, table) in self.tables.iter().enumerate() {
            for row in table.rows() {
                tuples.push((sym, row.iter().map(|&e| perm[e]).collect::<Vec<_>>()));
            }
        }
        tuples.sort_unstable();
        CanonicalKey {
            size: self.size(),
            point: self.point.map(|p| perm[p]),
            tuples,
        }
    }

    /// Canonical text rendering; parsing it back yields an equal structure.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, arity) in self.vocab.symbols() {
            writeln!(out, "rel {name} {arity}").unwrap();
        }
        for e in &self.universe {
            writeln!(out, "elem {e}").unwrap();
        }
        if let Some(p) = self.point {
            writeln!(out, "point {}", self.universe[p]).unwrap();
        }
        for (sym, table) in self.tables.iter().enumerate() {
            for row in table.rows() {
                write!(out, "tuple {}", self.vocab.name(sym)).unwrap();
                for &e in row {
                    write!(out, " {}", self.universe[e]).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Structure> {
        let directives = tokenize(text)?;
        let mut builder = StructureBuilder::new();
        for d in &directives {
            builder.apply(d, false)?;
        }
        Ok(builder.structure)
    }
}

/// Identity key of a structure up to isomorphism; `Ord` gives the canonical
/// generation order used throughout (smaller universes first, denser tuple
/// sets before sparser ones, then lexicographic).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalKey {
    pub size: usize,
    pub point: Option<usize>,
    pub tuples: Vec<(usize, Vec<usize>)>,
}

impl CanonicalKey {
    pub fn render(&self) -> String {
        let mut s = format!("n{}", self.size);
        if let Some(p) = self.point {
            write!(s, "@{p}").unwrap();
        }
        for (sym, row) in &self.tuples {
            write!(s, "|{sym}:").unwrap();
            for (i, e) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write!(s, "{e}").unwrap();
            }
        }
        s
    }
}

impl Ord for CanonicalKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.size
            .cmp(&other.size)
            .then_with(|| other.tuples.len().cmp(&self.tuples.len()))
            .then_with(|| self.tuples.cmp(&other.tuples))
            .then_with(|| self.point.cmp(&other.point))
    }
}

impl PartialOrd for CanonicalKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// An undirected loop-free graph, used for Gaifman graphs and the
/// combinatorial parameters computed on them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        a != b && self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.size()).filter(|&u| self.adjacent(v, u)).collect()
    }
}

/// A finite mapping between the universes of two structures.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMap {
    pub source: Structure,
    pub target: Structure,
    pub pairs: Vec<(usize, usize)>,
}

impl ElementMap {
    pub fn new(source: &Structure, target: &Structure, pairs: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &pairs {
            if a >= source.size() || b >= target.size() {
                return Err(Error::precondition(
                    "map entry outside the universes",
                ));
            }
        }
        Ok(ElementMap {
            source: source.clone(),
            target: target.clone(),
            pairs,
        })
    }

    pub fn identity(a: &Structure) -> Self {
        ElementMap {
            source: a.clone(),
            target: a.clone(),
            pairs: (0..a.size()).map(|i| (i, i)).collect(),
        }
    }

    /// Total maps as a vector indexed by source element; errors if some
    /// source element is unmapped or mapped twice inconsistently.
    pub fn as_total(&self) -> Result<Vec<usize>> {
        let mut img: Vec<Option<usize>> = vec![None; self.source.size()];
        for &(a, b) in &self.pairs {
            match img[a] {
                None => img[a] = Some(b),
                Some(prev) if prev == b => {}
                Some(_) => {
                    return Err(Error::precondition(format!(
                        "map is not single-valued at `{}`",
                        self.source.element_name(a)
                    )))
                }
            }
        }
        img.into_iter()
            .enumerate()
            .map(|(a, b)| {
                b.ok_or_else(|| {
                    Error::precondition(format!(
                        "map is not total: `{}` unmapped",
                        self.source.element_name(a)
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    Hom,
    Iso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialMapMode {
    PartialHom,
    PartialIso,
}

/// Is a total map a homomorphism (mode `Hom`), or additionally a bijection
/// that also reflects every relation (mode `Iso`)?
pub fn check_map(f: &ElementMap, mode: MapMode) -> Result<bool> {
    if !f.source.same_vocabulary(&f.target) {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let img = f.as_total()?;
    for sym in 0..f.source.vocabulary().len() {
        for row in f.source.table(sym).rows() {
            let mapped: Vec<usize> = row.iter().map(|&e| img[e]).collect();
            if !f.target.has_tuple(sym, &mapped) {
                return Ok(false);
            }
        }
    }
    if mode == MapMode::Iso {
        if f.source.size() != f.target.size() {
            return Ok(false);
        }
        let mut hit = vec![false; f.target.size()];
        for &b in &img {
            if hit[b] {
                return Ok(false);
            }
            hit[b] = true;
        }
        let mut inv = vec![0usize; f.target.size()];
        for (a, &b) in img.iter().enumerate() {
            inv[b] = a;
        }
        for sym in 0..f.target.vocabulary().len() {
            for row in f.target.table(sym).rows() {
                let preimage: Vec<usize> = row.iter().map(|&e| inv[e]).collect();
                if !f.source.has_tuple(sym, &preimage) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Is a pair list a partial homomorphism / partial isomorphism between A and
/// B? The list is read as a relation: repeats are fine, but it must be
/// single-valued (and, for `PartialIso`, injective and relation-reflecting).
pub fn check_partial_map(
    pairs: &[(usize, usize)],
    a: &Structure,
    b: &Structure,
    mode: PartialMapMode,
) -> Result<bool> {
    if !a.same_vocabulary(b) {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let mut fwd: HashMap<usize, usize> = HashMap::new();
    let mut bwd: HashMap<usize, usize> = HashMap::new();
    for &(x, y) in pairs {
        if x >= a.size() || y >= b.size() {
            return Err(Error::precondition(
                "pair entry outside the universes",
            ));
        }
        if *fwd.entry(x).or_insert(y) != y {
            return Ok(false);
        }
        if mode == PartialMapMode::PartialIso && *bwd.entry(y).or_insert(x) != x {
            return Ok(false);
        }
    }
    for sym in 0..a.vocabulary().len() {
        for row in a.table(sym).rows() {
            if let Some(mapped) = row
                .iter()
                .map(|e| fwd.get(e).copied())
                .collect::<Option<Vec<_>>>()
            {
                if !b.has_tuple(sym, &mapped) {
                    return Ok(false);
                }
            }
        }
        if mode == PartialMapMode::PartialIso {
            // reflect: tuples over the range must come from tuples in A
            'rows: for row_b in b.table(sym).rows() {
                let mut pre = Vec::with_capacity(row_b.len());
                for e in row_b {
                    match bwd.get(e) {
                        Some(&x) => pre.push(x),
                        None => continue 'rows,
                    }
                }
                if !a.has_tuple(sym, &pre) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

struct HomSearch<'a> {
    a: &'a Structure,
    b: &'a Structure,
    tuples_by_max: Vec<Vec<(usize, &'a [usize])>>,
    limit: Option<usize>,
    collect: bool,
    witnesses: Vec<Vec<usize>>,
    count: u64,
}

impl<'a> HomSearch<'a> {
    fn new(a: &'a Structure, b: &'a Structure, limit: Option<usize>, collect: bool) -> Self {
        let mut tuples_by_max = vec![Vec::new(); a.size()];
        for sym in 0..a.vocabulary().len() {
            for row in a.table(sym).rows() {
                let max = row.iter().copied().max().expect("arity >= 1");
                tuples_by_max[max].push((sym, row.as_slice()));
            }
        }
        HomSearch {
            a,
            b,
            tuples_by_max,
            limit,
            collect,
            witnesses: Vec::new(),
            count: 0,
        }
    }

    fn done(&self) -> bool {
        matches!(self.limit, Some(l) if self.count >= l as u64)
    }

    fn run(&mut self, img: &mut Vec<usize>) {
        if self.done() {
            return;
        }
        let next = img.len();
        if next == self.a.size() {
            self.count += 1;
            if self.collect {
                self.witnesses.push(img.clone());
            }
            return;
        }
        'cand: for y in 0..self.b.size() {
            img.push(y);
            for &(sym, row) in &self.tuples_by_max[next] {
                let mapped: Vec<usize> = row.iter().map(|&e| img[e]).collect();
                if !self.b.has_tuple(sym, &mapped) {
                    img.pop();
                    continue 'cand;
                }
            }
            self.run(img);
            img.pop();
            if self.done() {
                return;
            }
        }
    }
}

/// All homomorphisms A -> B in lexicographic order of the image vector, up
/// to `limit` when given. The empty structure has exactly one homomorphism
/// into anything.
pub fn search_homomorphisms(
    a: &Structure,
    b: &Structure,
    limit: Option<usize>,
) -> Result<Vec<ElementMap>> {
    if !a.same_vocabulary(b) {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    if limit == Some(0) {
        return Ok(Vec::new());
    }
    let mut search = HomSearch::new(a, b, limit, true);
    search.run(&mut Vec::new());
    Ok(search
        .witnesses
        .into_iter()
        .map(|img| ElementMap {
            source: a.clone(),
            target: b.clone(),
            pairs: img.into_iter().enumerate().collect(),
        })
        .collect())
}

/// Exact number of homomorphisms C -> A.
pub fn count_homomorphisms(c: &Structure, a: &Structure) -> Result<u64> {
    if !c.same_vocabulary(a) {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let mut search = HomSearch::new(c, a, None, false);
    search.run(&mut Vec::new());
    Ok(search.count)
}

/// Decides isomorphism; on success returns the lexicographically first
/// witness bijection.
pub fn is_isomorphic(a: &Structure, b: &Structure) -> Result<Option<ElementMap>> {
    if !a.same_vocabulary(b) {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    if a.size() != b.size() {
        return Ok(None);
    }
    if a.size() > MAX_CANONICAL_SIZE {
        return Err(Error::precondition(format!(
            "isomorphism search is only run for universes of size <= {MAX_CANONICAL_SIZE}"
        )));
    }
    let n = a.size();
    let mut used = vec![false; n];
    let mut img = Vec::with_capacity(n);
    if iso_search(a, b, &mut img, &mut used) {
        let pairs: Vec<(usize, usize)> = img.into_iter().enumerate().collect();
        let map = ElementMap {
            source: a.clone(),
            target: b.clone(),
            pairs,
        };
        debug_assert_eq!(check_map(&map, MapMode::Iso), Ok(true));
        Ok(Some(map))
    } else {
        Ok(None)
    }
}

fn iso_search(a: &Structure, b: &Structure, img: &mut Vec<usize>, used: &mut [bool]) -> bool {
    let next = img.len();
    if next == a.size() {
        let map = ElementMap {
            source: a.clone(),
            target: b.clone(),
            pairs: img.iter().copied().enumerate().collect(),
        };
        return check_map(&map, MapMode::Iso) == Ok(true);
    }
    for y in 0..b.size() {
        if used[y] {
            continue;
        }
        img.push(y);
        used[y] = true;
        // prune on tuples fully decided so far, in both directions
        let consistent = partial_iso_consistent(a, b, img);
        if consistent && iso_search(a, b, img, used) {
            return true;
        }
        used[y] = false;
        img.pop();
    }
    false
}

fn partial_iso_consistent(a: &Structure, b: &Structure, img: &[usize]) -> bool {
    let assigned = img.len();
    for sym in 0..a.vocabulary().len() {
        for row in a.table(sym).rows() {
            if row.iter().all(|&e| e < assigned) {
                let mapped: Vec<usize> = row.iter().map(|&e| img[e]).collect();
                if !b.has_tuple(sym, &mapped) {
                    return false;
                }
            }
        }
        let mut inv: HashMap<usize, usize> = HashMap::new();
        for (x, &y) in img.iter().enumerate() {
            inv.insert(y, x);
        }
        'rows: for row in b.table(sym).rows() {
            let mut pre = Vec::with_capacity(row.len());
            for e in row {
                match inv.get(e) {
                    Some(&x) => pre.push(x),
                    None => continue 'rows,
                }
            }
            if !a.has_tuple(sym, &pre) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// file format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) enum Directive {
    Rel { name: String, arity: usize },
    Elem { name: String },
    Tuple { rel: String, elems: Vec<String> },
    Point { name: String },
    Parent { child: String, parent: String },
    Pebble { elem: String, index: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Located {
    pub directive: Directive,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Located>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut tokens: Vec<(usize, &str)> = Vec::new();
        let mut rest = content;
        let mut offset = 0usize;
        loop {
            let trimmed = rest.trim_start();
            if trimmed.is_empty() {
                break;
            }
            offset += rest.len() - trimmed.len();
            let end = trimmed
                .find(char::is_whitespace)
                .unwrap_or(trimmed.len());
            tokens.push((offset + 1, &trimmed[..end]));
            offset += end;
            rest = &trimmed[end..];
        }
        if tokens.is_empty() {
            continue;
        }
        let (col0, head) = tokens[0];
        let args = &tokens[1..];
        let dir = match head {
            "rel" => {
                let [(c1, name), (c2, arity)] = args else {
                    return Err(Error::parse(line, col0, "expected `rel <name> <arity>`"));
                };
                let arity: usize = arity
                    .parse()
                    .map_err(|_| Error::parse(line, *c2, "arity must be a positive integer"))?;
                if arity == 0 {
                    return Err(Error::parse(line, *c2, "arity must be >= 1"));
                }
                check_ident(line, *c1, name)?;
                Directive::Rel {
                    name: name.to_string(),
                    arity,
                }
            }
            "elem" => {
                let [(c1, name)] = args else {
                    return Err(Error::parse(line, col0, "expected `elem <id>`"));
                };
                check_ident(line, *c1, name)?;
                Directive::Elem {
                    name: name.to_string(),
                }
            }
            "tuple" => {
                if args.is_empty() {
                    return Err(Error::parse(line, col0, "expected `tuple <rel> <id>...`"));
                }
                for (c, t) in args {
                    check_ident(line, *c, t)?;
                }
                Directive::Tuple {
                    rel: args[0].1.to_string(),
                    elems: args[1..].iter().map(|(_, t)| t.to_string()).collect(),
                }
            }
            "point" => {
                let [(c1, name)] = args else {
                    return Err(Error::parse(line, col0, "expected `point <id>`"));
                };
                check_ident(line, *c1, name)?;
                Directive::Point {
                    name: name.to_string(),
                }
            }
            "parent" => {
                let [(c1, child), (c2, parent)] = args else {
                    return Err(Error::parse(line, col0, "expected `parent <child> <parent>`"));
                };
                check_ident(line, *c1, child)?;
                check_ident(line, *c2, parent)?;
                Directive::Parent {
                    child: child.to_string(),
                    parent: parent.to_string(),
                }
            }
            "pebble" => {
                let [(c1, elem), (c2, index)] = args else {
                    return Err(Error::parse(line, col0, "expected `pebble <elem> <index>`"));
                };
                check_ident(line, *c1, elem)?;
                let index: usize = index
                    .parse()
                    .map_err(|_| Error::parse(line, *c2, "pebble index must be a positive integer"))?;
                if index == 0 {
                    return Err(Error::parse(line, *c2, "pebble index must be >= 1"));
                }
                Directive::Pebble {
                    elem: elem.to_string(),
                    index,
                }
            }
            other => {
                return Err(Error::parse(
                    line,
                    col0,
                    format!("unknown directive `{other}`"),
                ))
            }
        };
        out.push(Located {
            directive: dir,
            line,
            column: col0,
        });
    }
    Ok(out)
}

fn check_ident(line: usize, col: usize, s: &str) -> Result<()> {
    if is_identifier(s) {
        Ok(())
    } else {
        Err(Error::parse(
            line,
            col,
            format!("`{s}` is not an identifier ([A-Za-z0-9_]+)"),
        ))
    }
}

pub(crate) struct StructureBuilder {
    pub structure: Structure,
    pub parents: Vec<(String, String, usize, usize)>,
    pub pebbles: Vec<(String, usize, usize, usize)>,
    saw_point: bool,
}

impl StructureBuilder {
    pub fn new() -> Self {
        StructureBuilder {
            structure: Structure::new(Vocabulary::empty()),
            parents: Vec::new(),
            pebbles: Vec::new(),
            saw_point: false,
        }
    }

    pub fn apply(&mut self, d: &Located, allow_forest: bool) -> Result<()> {
        let at = |msg: String| Error::parse(d.line, d.column, msg);
        match &d.directive {
            Directive::Rel { name, arity } => {
                if self.structure.vocab.lookup(name).is_some() {
                    return Err(at(format!("duplicate relation symbol `{name}`")));
                }
                self.structure.vocab.add_symbol(name, *arity).map_err(|_| {
                    at(format!("invalid relation declaration `{name}`"))
                })?;
                self.structure.tables.push(TupleSet::default());
            }
            Directive::Elem { name } => {
                if self.structure.element_index(name).is_some() {
                    return Err(at(format!("duplicate element `{name}`")));
                }
                self.structure
                    .add_element(name)
                    .map_err(|e| at(e.to_string()))?;
            }
            Directive::Tuple { rel, elems } => {
                let sym = self
                    .structure
                    .vocab
                    .lookup(rel)
                    .ok_or_else(|| at(format!("unknown relation `{rel}`")))?;
                if elems.len() != self.structure.vocab.arity(sym) {
                    return Err(at(format!(
                        "arity mismatch for `{rel}`: expected {}, got {}",
                        self.structure.vocab.arity(sym),
                        elems.len()
                    )));
                }
                let row = elems
                    .iter()
                    .map(|e| {
                        self.structure
                            .element_index(e)
                            .ok_or_else(|| at(format!("unknown element `{e}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.structure.tables[sym].insert(row);
            }
            Directive::Point { name } => {
                if self.saw_point {
                    return Err(at("multiple `point` lines".into()));
                }
                let e = self
                    .structure
                    .element_index(name)
                    .ok_or_else(|| at(format!("unknown element `{name}`")))?;
                self.saw_point = true;
                self.structure.point = Some(e);
            }
            Directive::Parent { child, parent } => {
                if !allow_forest {
                    return Err(at("`parent` is a forest directive; not allowed here".into()));
                }
                self.parents
                    .push((child.clone(), parent.clone(), d.line, d.column));
            }
            Directive::Pebble { elem, index } => {
                if !allow_forest {
                    return Err(at("`pebble` is a forest directive; not allowed here".into()));
                }
                self.pebbles.push((elem.clone(), *index, d.line, d.column));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{clique, edgeless, graph_vocab};

    fn k(n: usize) -> Structure {
        clique(n)
    }

    #[test]
    fn parse_basic() {
        let a = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a b").unwrap();
        assert_eq!(a.universe(), &["a".to_string(), "b".to_string()]);
        let e = a.vocabulary().lookup("E").unwrap();
        assert_eq!(a.table(e).rows(), &[vec![0, 1]]);
    }

    #[test]
    fn parse_unknown_element() {
        let err = Structure::parse("rel E 2\ntuple E a b").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("unknown element"), "{message}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn parse_duplicates_and_point() {
        assert!(Structure::parse("elem a\nelem a").is_err());
        assert!(Structure::parse("rel E 1\nrel E 2").is_err());
        assert!(Structure::parse("elem a\npoint a\npoint a").is_err());
        assert!(Structure::parse("elem a\nparent a a").is_err());
        // duplicate tuples merge
        let a = Structure::parse("rel E 2\nelem a\ntuple E a a\ntuple E a a").unwrap();
        assert_eq!(a.tuple_count(), 1);
    }

    #[test]
    fn render_parse_roundtrip() {
        let text = "rel E 2\nrel P 1  # trailing comment\nelem b\nelem a\ntuple E b a\ntuple P a\npoint b\n";
        let a = Structure::parse(text).unwrap();
        let rendered = a.render();
        let b = Structure::parse(&rendered).unwrap();
        assert_eq!(a, b);
        assert_eq!(rendered, b.render());
    }

    #[test]
    fn gaifman_examples() {
        let a = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a b").unwrap();
        let g = a.gaifman_graph();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);

        let b = Structure::parse("rel E 2\nelem a\nelem b").unwrap();
        assert_eq!(b.gaifman_graph().edge_count(), 0);

        let c = Structure::parse("rel R 3\nelem a\nelem b\nelem c\ntuple R a b c").unwrap();
        assert_eq!(c.gaifman_graph().edge_count(), 3);
    }

    #[test]
    fn check_map_examples() {
        let k3 = k(3);
        let id = ElementMap::identity(&k3);
        assert_eq!(check_map(&id, MapMode::Hom), Ok(true));
        assert_eq!(check_map(&id, MapMode::Iso), Ok(true));

        // every total K3 -> K2 map collapses an edge
        let k2 = k(2);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let f = ElementMap::new(&k3, &k2, vec![(0, x), (1, y), (2, z)]).unwrap();
                    assert_eq!(check_map(&f, MapMode::Hom), Ok(false));
                }
            }
        }

        // single edge to a non-edge
        let edge = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a b").unwrap();
        let blank = edgeless(2);
        let f = ElementMap::new(&edge, &blank, vec![(0, 0), (1, 1)]).unwrap();
        assert_eq!(check_map(&f, MapMode::Hom), Ok(false));

        let partial = ElementMap::new(&edge, &blank, vec![(0, 0)]).unwrap();
        assert!(check_map(&partial, MapMode::Hom).is_err());
    }

    #[test]
    fn search_and_count_examples() {
        let one = edgeless(1);
        let three = edgeless(3);
        assert_eq!(search_homomorphisms(&one, &three, None).unwrap().len(), 3);
        assert_eq!(count_homomorphisms(&one, &three).unwrap(), 3);

        assert!(search_homomorphisms(&k(3), &k(2), None).unwrap().is_empty());
        assert_eq!(count_homomorphisms(&k(3), &k(2)).unwrap(), 0);

        let k3 = k(3);
        let homs = search_homomorphisms(&k3, &k3, None).unwrap();
        assert!(homs.iter().any(|f| f.pairs == vec![(0, 0), (1, 1), (2, 2)]));

        assert_eq!(count_homomorphisms(&k(2), &k(3)).unwrap(), 6);

        // the empty structure maps into anything, exactly once
        let empty = edgeless(0);
        assert_eq!(count_homomorphisms(&empty, &k3).unwrap(), 1);
        assert_eq!(search_homomorphisms(&empty, &k3, None).unwrap().len(), 1);
        assert_eq!(count_homomorphisms(&k3, &empty).unwrap(), 0);
    }

    #[test]
    fn search_lexicographic_order() {
        let one = edgeless(1);
        let two = edgeless(2);
        let homs = search_homomorphisms(&one, &two, None).unwrap();
        let images: Vec<usize> = homs.iter().map(|h| h.pairs[0].1).collect();
        assert_eq!(images, vec![0, 1]);
        let first = search_homomorphisms(&one, &two, Some(1)).unwrap();
        assert_eq!(first[0].pairs, vec![(0, 0)]);
    }

    #[test]
    fn partial_map_examples() {
        let a = edgeless(2);
        let b = edgeless(2);
        assert_eq!(
            check_partial_map(&[(0, 1)], &a, &b, PartialMapMode::PartialHom),
            Ok(true)
        );
        assert_eq!(
            check_partial_map(&[(0, 1)], &a, &b, PartialMapMode::PartialIso),
            Ok(true)
        );
        // not injective
        assert_eq!(
            check_partial_map(&[(0, 0), (1, 0)], &a, &b, PartialMapMode::PartialIso),
            Ok(false)
        );
        // edge to non-edge
        let edge = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a b").unwrap();
        let blank = edgeless(2);
        assert_eq!(
            check_partial_map(&[(0, 0), (1, 1)], &edge, &blank, PartialMapMode::PartialHom),
            Ok(false)
        );
        // reflection: non-edge onto an edge fails iso but not hom
        assert_eq!(
            check_partial_map(&[(0, 0), (1, 1)], &blank, &edge, PartialMapMode::PartialHom),
            Ok(true)
        );
        assert_eq!(
            check_partial_map(&[(0, 0), (1, 1)], &blank, &edge, PartialMapMode::PartialIso),
            Ok(false)
        );
    }

    #[test]
    fn iso_examples() {
        let k3 = k(3);
        let w = is_isomorphic(&k3, &k3).unwrap().unwrap();
        assert_eq!(w.pairs, vec![(0, 0), (1, 1), (2, 2)]);

        assert!(is_isomorphic(&k3, &k(2)).unwrap().is_none());

        let k2 = k(2);
        let blank = edgeless(2);
        assert!(is_isomorphic(&k2, &blank).unwrap().is_none());
    }

    #[test]
    fn iso_implies_hom() {
        let a = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a b\ntuple E b b").unwrap();
        let total = ElementMap::new(&a, &a, vec![(0, 0), (1, 1)]).unwrap();
        if check_map(&total, MapMode::Iso).unwrap() {
            assert!(check_map(&total, MapMode::Hom).unwrap());
        }
    }

    #[test]
    fn canonical_key_detects_iso() {
        let a = Structure::parse("rel E 2\nelem x\nelem y\ntuple E x y").unwrap();
        let b = Structure::parse("rel E 2\nelem p\nelem q\ntuple E q p").unwrap();
        assert_eq!(a.canonical_key().unwrap(), b.canonical_key().unwrap());
        let c = Structure::parse("rel E 2\nelem p\nelem q\ntuple E p p").unwrap();
        assert_ne!(a.canonical_key().unwrap(), c.canonical_key().unwrap());
    }

    #[test]
    fn canonical_key_pointed() {
        let mut a = edgeless(2);
        a.set_point(0).unwrap();
        let mut b = edgeless(2);
        b.set_point(1).unwrap();
        // pointed-isomorphic by swapping
        assert_eq!(a.canonical_key().unwrap(), b.canonical_key().unwrap());
        let mut c = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a a").unwrap();
        c.set_point(0).unwrap();
        let mut d = Structure::parse("rel E 2\nelem a\nelem b\ntuple E a a").unwrap();
        d.set_point(1).unwrap();
        assert_ne!(c.canonical_key().unwrap(), d.canonical_key().unwrap());
    }

    #[test]
    fn disjoint_union_counts() {
        let k3 = k(3);
        let two_k3 = k3.disjoint_union(&k3).unwrap();
        assert_eq!(two_k3.size(), 6);
        // connected C: counts add over components
        let c = k(2);
        let lhs = count_homomorphisms(&c, &two_k3).unwrap();
        let rhs = 2 * count_homomorphisms(&c, &k3).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn identity_expansion() {
        let a = edgeless(2);
        let ai = a.with_identity_relation();
        assert_eq!(ai.vocabulary().len(), graph_vocab().len() + 1);
        let id_sym = ai.vocabulary().lookup("I").unwrap();
        assert!(ai.has_tuple(id_sym, &[0, 0]));
        assert!(ai.has_tuple(id_sym, &[1, 1]));
        assert!(!ai.has_tuple(id_sym, &[0, 1]));
    }
}
