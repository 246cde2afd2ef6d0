//! Forest-ordered (and pebble-forest-ordered) structures: the objects the
//! comonadic covers live in, their branches, morphisms, and a canonical code
//! deciding isomorphism of covers.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::structure::{check_map, tokenize, ElementMap, MapMode, Structure, StructureBuilder};

/// A structure with a forest order (stored as a parent map) and an optional
/// pebbling function.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestStructure {
    base: Structure,
    parent: Vec<Option<usize>>,
    pebble: Option<Vec<usize>>,
    pebble_bound: Option<usize>,
}

/// One axiom violation found by `validate`. Violations are data, not
/// failures: a report may list several.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The parent walk from this element revisits a node.
    ParentCycle { elem: usize },
    /// Gaifman-adjacent elements that are incomparable in the order.
    ConditionE { a: usize, b: usize },
    /// Adjacent `lower < upper`, but the pebble of `lower` reappears at
    /// `conflicting` within the half-open interval above `lower`.
    ConditionP {
        lower: usize,
        upper: usize,
        conflicting: usize,
    },
    PebbleOutOfRange { elem: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Maximum chain cardinality (number of nodes), 0 for the empty forest.
    pub height: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A forest structure whose order is a single chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PathObject {
    forest: ForestStructure,
}

impl PathObject {
    pub fn as_forest(&self) -> &ForestStructure {
        &self.forest
    }

    pub fn height(&self) -> usize {
        self.forest.size()
    }
}

impl ForestStructure {
    pub fn new(base: Structure, parent: Vec<Option<usize>>) -> Result<Self> {
        if parent.len() != base.size() {
            return Err(Error::precondition(
                "parent map must cover the universe",
            ));
        }
        if parent
            .iter()
            .enumerate()
            .any(|(i, p)| p.is_some_and(|p| p >= base.size() || p == i))
        {
            return Err(Error::precondition("parent entry out of range"));
        }
        Ok(ForestStructure {
            base,
            parent,
            pebble: None,
            pebble_bound: None,
        })
    }

    pub fn with_pebbling(
        base: Structure,
        parent: Vec<Option<usize>>,
        pebble: Vec<usize>,
        bound: usize,
    ) -> Result<Self> {
        if pebble.len() != base.size() {
            return Err(Error::precondition(
                "pebbling must cover the universe",
            ));
        }
        if bound == 0 {
            return Err(Error::precondition("pebble bound must be >= 1"));
        }
        let mut f = ForestStructure::new(base, parent)?;
        f.pebble = Some(pebble);
        f.pebble_bound = Some(bound);
        Ok(f)
    }

    pub fn base(&self) -> &Structure {
        &self.base
    }

    pub fn size(&self) -> usize {
        self.base.size()
    }

    pub fn parent(&self, elem: usize) -> Option<usize> {
        self.parent[elem]
    }

    pub fn pebble(&self, elem: usize) -> Option<usize> {
        self.pebble.as_ref().map(|p| p[elem])
    }

    pub fn pebble_bound(&self) -> Option<usize> {
        self.pebble_bound
    }

    pub fn is_pebbled(&self) -> bool {
        self.pebble.is_some()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.size()).filter(|&e| self.parent[e].is_none()).collect()
    }

    pub fn children(&self, elem: usize) -> Vec<usize> {
        (0..self.size())
            .filter(|&e| self.parent[e] == Some(elem))
            .collect()
    }

    /// Chain from a root down to `elem`, inclusive; `None` if the parent walk
    /// cycles.
    pub fn ancestor_chain(&self, elem: usize) -> Option<Vec<usize>> {
        let mut chain = vec![elem];
        let mut cur = elem;
        while let Some(p) = self.parent[cur] {
            if chain.len() > self.size() {
                return None;
            }
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Some(chain)
    }

    /// 1-based depth of an element (roots have depth 1).
    pub fn depth(&self, elem: usize) -> Option<usize> {
        self.ancestor_chain(elem).map(|c| c.len())
    }

    /// Whether a <= b in the forest order.
    pub fn below(&self, a: usize, b: usize) -> bool {
        let mut cur = b;
        let mut steps = 0;
        loop {
            if cur == a {
                return true;
            }
            match self.parent[cur] {
                Some(p) if steps <= self.size() => {
                    cur = p;
                    steps += 1;
                }
                _ => return false,
            }
        }
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.below(a, b) || self.below(b, a)
    }

    pub fn height(&self) -> usize {
        (0..self.size())
            .filter_map(|e| self.depth(e))
            .max()
            .unwrap_or(0)
    }

    /// Checks the forest axioms, condition (E), and (when pebbled) pebble
    /// ranges and condition (P). Violations are reported, never thrown.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut acyclic = vec![true; self.size()];
        for (e, ok) in acyclic.iter_mut().enumerate() {
            if self.ancestor_chain(e).is_none() {
                violations.push(Violation::ParentCycle { elem: e });
                *ok = false;
            }
        }
        let gaifman = self.base.gaifman_graph();
        for (a, b) in gaifman.edges() {
            if !acyclic[a] || !acyclic[b] {
                continue;
            }
            if !self.comparable(a, b) {
                violations.push(Violation::ConditionE { a, b });
            }
        }
        if let Some(pebble) = &self.pebble {
            let bound = self.pebble_bound.unwrap_or(0);
            for (e, &ix) in pebble.iter().enumerate() {
                if ix == 0 || ix > bound {
                    violations.push(Violation::PebbleOutOfRange { elem: e, index: ix });
                }
            }
            for (a, b) in gaifman.edges() {
                if !acyclic[a] || !acyclic[b] {
                    continue;
                }
                for (lo, hi) in [(a, b), (b, a)] {
                    if lo != hi && self.below(lo, hi) {
                        // walk (lo, hi] from hi upward
                        let mut cur = hi;
                        loop {
                            if pebble[lo] == pebble[cur] {
                                violations.push(Violation::ConditionP {
                                    lower: lo,
                                    upper: hi,
                                    conflicting: cur,
                                });
                            }
                            match self.parent[cur] {
                                Some(p) if p != lo => cur = p,
                                _ => break,
                            }
                        }
                    }
                }
            }
        }
        let height = if violations.iter().any(|v| matches!(v, Violation::ParentCycle { .. })) {
            0
        } else {
            self.height()
        };
        ValidationReport { violations, height }
    }

    /// Maximal chains, each with its induced substructure.
    pub fn branches(&self) -> Result<Vec<PathObject>> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::precondition(format!(
                "invalid forest structure: {:?}",
                report.violations
            )));
        }
        let mut out = Vec::new();
        for leaf in 0..self.size() {
            if !self.children(leaf).is_empty() {
                continue;
            }
            let chain = self.ancestor_chain(leaf).expect("validated acyclic");
            out.push(self.induced_path(&chain)?);
        }
        Ok(out)
    }

    /// Induced path object on a chain (given root-first).
    pub fn induced_path(&self, chain: &[usize]) -> Result<PathObject> {
        let mut base = Structure::new(self.base.vocabulary().clone());
        let mut back: HashMap<usize, usize> = HashMap::new();
        for (i, &e) in chain.iter().enumerate() {
            base.add_element(self.base.element_name(e))?;
            back.insert(e, i);
        }
        for sym in 0..self.base.vocabulary().len() {
            for row in self.base.table(sym).rows() {
                if let Some(mapped) = row
                    .iter()
                    .map(|e| back.get(e).copied())
                    .collect::<Option<Vec<_>>>()
                {
                    base.add_tuple(sym, mapped)?;
                }
            }
        }
        let parent: Vec<Option<usize>> = (0..chain.len())
            .map(|i| if i == 0 { None } else { Some(i - 1) })
            .collect();
        let forest = match (&self.pebble, self.pebble_bound) {
            (Some(p), Some(bound)) => {
                let restricted: Vec<usize> = chain.iter().map(|&e| p[e]).collect();
                ForestStructure::with_pebbling(base, parent, restricted, bound)?
            }
            _ => ForestStructure::new(base, parent)?,
        };
        Ok(PathObject { forest })
    }

    /// Canonical code deciding isomorphism (structure + order + pebbling).
    /// Requires a valid forest whose every tuple lies within a chain; the
    /// covers built by the comonads satisfy this by construction.
    pub fn canonical_code(&self) -> Result<ForestCode> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::precondition(format!(
                "invalid forest structure: {:?}",
                report.violations
            )));
        }
        let n = self.size();
        let depth: Vec<usize> = (0..n)
            .map(|e| self.depth(e).expect("validated acyclic"))
            .collect();
        // attach every tuple to its deepest element, recording entry depths
        let mut facts: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); n];
        for sym in 0..self.base.vocabulary().len() {
            for row in self.base.table(sym).rows() {
                for i in 0..row.len() {
                    for j in (i + 1)..row.len() {
                        if !self.comparable(row[i], row[j]) {
                            return Err(Error::precondition(
                                "tuple spans incomparable elements",
                            ));
                        }
                    }
                }
                let &deepest = row.iter().max_by_key(|&&e| depth[e]).expect("arity >= 1");
                facts[deepest].push((sym, row.iter().map(|&e| depth[e]).collect()));
            }
        }
        for f in &mut facts {
            f.sort_unstable();
            f.dedup();
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for e in 0..n {
            match self.parent[e] {
                Some(p) => children[p].push(e),
                None => roots.push(e),
            }
        }
        let mut root_codes: Vec<String> = roots
            .iter()
            .map(|&r| self.node_code(r, &children, &facts))
            .collect();
        root_codes.sort_unstable();
        let mut code = String::new();
        if let Some(bound) = self.pebble_bound {
            write!(code, "k{bound}").unwrap();
        }
        code.push('{');
        code.push_str(&root_codes.join(","));
        code.push('}');
        Ok(ForestCode(code))
    }

    fn node_code(
        &self,
        e: usize,
        children: &[Vec<usize>],
        facts: &[Vec<(usize, Vec<usize>)>],
    ) -> String {
        let mut label = String::new();
        if let Some(p) = self.pebble(e) {
            write!(label, "p{p}").unwrap();
        }
        for (sym, depths) in &facts[e] {
            write!(label, ";{}:", self.base.vocabulary().name(*sym)).unwrap();
            for (i, d) in depths.iter().enumerate() {
                if i > 0 {
                    label.push('.');
                }
                write!(label, "{d}").unwrap();
            }
        }
        let mut kid_codes: Vec<String> = children[e]
            .iter()
            .map(|&c| self.node_code(c, children, facts))
            .collect();
        kid_codes.sort_unstable();
        format!("({label})[{}]", kid_codes.join(","))
    }

    /// Canonical text rendering in the forest file format.
    pub fn render(&self) -> String {
        let mut out = self.base.render();
        for e in 0..self.size() {
            if let Some(p) = self.parent[e] {
                writeln!(
                    out,
                    "parent {} {}",
                    self.base.element_name(e),
                    self.base.element_name(p)
                )
                .unwrap();
            }
        }
        if let Some(pebble) = &self.pebble {
            for (e, ix) in pebble.iter().enumerate() {
                writeln!(out, "pebble {} {ix}", self.base.element_name(e)).unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<ForestStructure> {
        let directives = tokenize(text)?;
        let mut builder = StructureBuilder::new();
        for d in &directives {
            builder.apply(d, true)?;
        }
        let base = builder.structure;
        let mut parent: Vec<Option<usize>> = vec![None; base.size()];
        let mut parent_seen = vec![false; base.size()];
        for (child, par, line, col) in &builder.parents {
            let c = base
                .element_index(child)
                .ok_or_else(|| Error::parse(*line, *col, format!("unknown element `{child}`")))?;
            let p = base
                .element_index(par)
                .ok_or_else(|| Error::parse(*line, *col, format!("unknown element `{par}`")))?;
            if parent_seen[c] {
                return Err(Error::parse(
                    *line,
                    *col,
                    format!("element `{child}` has multiple parents"),
                ));
            }
            if c == p {
                return Err(Error::parse(
                    *line,
                    *col,
                    format!("element `{child}` cannot be its own parent"),
                ));
            }
            parent_seen[c] = true;
            parent[c] = Some(p);
        }
        if builder.pebbles.is_empty() {
            return ForestStructure::new(base, parent);
        }
        let mut pebble: Vec<Option<usize>> = vec![None; base.size()];
        let (_, _, first_line, first_col) = builder.pebbles[0];
        for (elem, index, line, col) in &builder.pebbles {
            let e = base
                .element_index(elem)
                .ok_or_else(|| Error::parse(*line, *col, format!("unknown element `{elem}`")))?;
            if pebble[e].is_some() {
                return Err(Error::parse(
                    *line,
                    *col,
                    format!("element `{elem}` pebbled twice"),
                ));
            }
            pebble[e] = Some(*index);
        }
        let pebble = pebble
            .into_iter()
            .enumerate()
            .map(|(e, p)| {
                p.ok_or_else(|| {
                    Error::parse(
                        first_line,
                        first_col,
                        format!(
                            "pebbling must cover every element (`{}` is unpebbled)",
                            base.element_name(e)
                        ),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let bound = pebble.iter().copied().max().unwrap_or(1);
        ForestStructure::with_pebbling(base, parent, pebble, bound)
    }
}

/// Is f a morphism of forest-ordered structures: a homomorphism of the
/// underlying structures preserving roots, the covering relation, and (when
/// pebbled) the pebbling function?
pub fn check_forest_morphism(
    f: &ElementMap,
    from: &ForestStructure,
    to: &ForestStructure,
) -> Result<bool> {
    if f.source != *from.base() || f.target != *to.base() {
        return Err(Error::precondition(
            "map endpoints do not match the forest structures",
        ));
    }
    match (from.is_pebbled(), to.is_pebbled()) {
        (true, true) => {
            if from.pebble_bound() != to.pebble_bound() {
                return Err(Error::precondition("pebble bounds differ"));
            }
        }
        (false, false) => {}
        _ => {
            return Err(Error::precondition(
                "one side is pebbled and the other is not",
            ))
        }
    }
    let img = f.as_total()?;
    if !check_map(f, MapMode::Hom)? {
        return Ok(false);
    }
    for e in 0..from.size() {
        match from.parent(e) {
            None => {
                if to.parent(img[e]).is_some() {
                    return Ok(false);
                }
            }
            Some(p) => {
                if to.parent(img[e]) != Some(img[p]) {
                    return Ok(false);
                }
            }
        }
        if from.is_pebbled() && from.pebble(e) != to.pebble(img[e]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All forest morphisms from `from` into `to`, as total maps in
/// lexicographic order. Cover preservation prunes the search: a non-root
/// element can only go to a child of its parent's image.
pub fn enumerate_forest_morphisms(
    from: &ForestStructure,
    to: &ForestStructure,
) -> Result<Vec<Vec<usize>>> {
    for f in [from, to] {
        if !f.validate().is_valid() {
            return Err(Error::precondition("invalid forest structure"));
        }
    }
    // process elements parents-first
    let mut order: Vec<usize> = (0..from.size()).collect();
    order.sort_by_key(|&e| from.depth(e).expect("validated"));
    let mut out = Vec::new();
    let mut img: Vec<Option<usize>> = vec![None; from.size()];
    search_forest_morphisms(from, to, &order, 0, &mut img, &mut out);
    let mut maps: Vec<Vec<usize>> = out
        .into_iter()
        .filter(|img| {
            let map = ElementMap {
                source: from.base().clone(),
                target: to.base().clone(),
                pairs: img.iter().copied().enumerate().collect(),
            };
            check_forest_morphism(&map, from, to) == Ok(true)
        })
        .collect();
    maps.sort();
    Ok(maps)
}

fn search_forest_morphisms(
    from: &ForestStructure,
    to: &ForestStructure,
    order: &[usize],
    at: usize,
    img: &mut Vec<Option<usize>>,
    out: &mut Vec<Vec<usize>>,
) {
    if at == order.len() {
        out.push(img.iter().map(|i| i.expect("assigned")).collect());
        return;
    }
    let x = order[at];
    let candidates = match from.parent(x) {
        None => to.roots(),
        Some(p) => to.children(img[p].expect("parents first")),
    };
    for c in candidates {
        img[x] = Some(c);
        search_forest_morphisms(from, to, order, at + 1, img, out);
        img[x] = None;
    }
}

/// Canonical code of a forest structure; equal codes mean isomorphic
/// (structure, order, and pebbling together).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForestCode(pub String);

impl std::fmt::Display for ForestCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Structure;
    use crate::suites::{clique, edgeless};

    fn forest(base: Structure, parent: Vec<Option<usize>>) -> ForestStructure {
        ForestStructure::new(base, parent).unwrap()
    }

    #[test]
    fn condition_e_violation() {
        let f = forest(clique(2), vec![None, None]);
        let report = f.validate();
        assert_eq!(report.violations, vec![Violation::ConditionE { a: 0, b: 1 }]);
    }

    #[test]
    fn valid_chain_height() {
        let f = forest(clique(2), vec![None, Some(0)]);
        let report = f.validate();
        assert!(report.is_valid());
        assert_eq!(report.height, 2);
    }

    #[test]
    fn condition_p_violation() {
        // chain a < x < b with edge {a,b}; pebble(a) = pebble(x) = 1
        let mut base = edgeless(3);
        base.add_tuple(0, vec![0, 2]).unwrap();
        base.add_tuple(0, vec![2, 0]).unwrap();
        let f = ForestStructure::with_pebbling(
            base,
            vec![None, Some(0), Some(1)],
            vec![1, 1, 2],
            2,
        )
        .unwrap();
        let report = f.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ConditionP { lower: 0, upper: 2, conflicting: 1 })));
    }

    #[test]
    fn parent_cycle_reported() {
        let f = forest(edgeless(2), vec![Some(1), Some(0)]);
        let report = f.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ParentCycle { .. })));
    }

    #[test]
    fn branches_examples() {
        let chain = forest(edgeless(3), vec![None, Some(0), Some(1)]);
        let bs = chain.branches().unwrap();
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].height(), 3);

        let fork = forest(edgeless(3), vec![None, Some(0), Some(0)]);
        let bs = fork.branches().unwrap();
        assert_eq!(bs.len(), 2);
        assert!(bs.iter().all(|b| b.height() == 2));

        let empty = forest(edgeless(0), vec![]);
        assert!(empty.branches().unwrap().is_empty());
    }

    #[test]
    fn branch_induced_relations() {
        // edge between root and grandchild is kept in the branch
        let mut base = edgeless(3);
        base.add_tuple(0, vec![0, 2]).unwrap();
        let f = forest(base, vec![None, Some(0), Some(1)]);
        let bs = f.branches().unwrap();
        assert_eq!(bs[0].as_forest().base().tuple_count(), 1);
    }

    #[test]
    fn forest_morphism_examples() {
        let chain = forest(edgeless(2), vec![None, Some(0)]);
        let id = ElementMap::identity(chain.base());
        assert_eq!(check_forest_morphism(&id, &chain, &chain), Ok(true));

        // collapse the cover to a single node: not a forest morphism
        let single = forest(edgeless(1), vec![None]);
        let collapse = ElementMap::new(chain.base(), single.base(), vec![(0, 0), (1, 0)]).unwrap();
        assert_eq!(check_forest_morphism(&collapse, &chain, &single), Ok(false));

        // send a root to a non-root
        let two_chain = forest(edgeless(2), vec![None, Some(0)]);
        let flip = ElementMap::new(single.base(), two_chain.base(), vec![(0, 1)]).unwrap();
        assert_eq!(check_forest_morphism(&flip, &single, &two_chain), Ok(false));
    }

    #[test]
    fn codes_distinguish_shape() {
        let a = forest(edgeless(1), vec![None]);
        let b = forest(edgeless(1), vec![None]);
        assert_eq!(a.canonical_code().unwrap(), b.canonical_code().unwrap());

        let chain = forest(edgeless(2), vec![None, Some(0)]);
        let antichain = forest(edgeless(2), vec![None, None]);
        assert_ne!(
            chain.canonical_code().unwrap(),
            antichain.canonical_code().unwrap()
        );
    }

    #[test]
    fn code_invariant_under_relabeling() {
        let mut base = edgeless(3);
        base.add_tuple(0, vec![0, 1]).unwrap();
        let f = forest(base, vec![None, Some(0), Some(0)]);

        // same forest with elements declared in a different order
        let mut base2 = Structure::parse("rel E 2\nelem x2\nelem x0\nelem x1\ntuple E x0 x1").unwrap();
        base2.add_tuple(0, vec![1, 2]).unwrap(); // duplicate; merged
        let g = forest(base2, vec![Some(1), None, Some(1)]);
        assert_eq!(f.canonical_code().unwrap(), g.canonical_code().unwrap());
    }

    #[test]
    fn code_rejects_incomparable_tuple() {
        let mut base = edgeless(2);
        base.add_tuple(0, vec![0, 1]).unwrap();
        // both roots: condition (E) fails, so validation already rejects
        let f = forest(base.clone(), vec![None, None]);
        assert!(f.canonical_code().is_err());
    }

    #[test]
    fn forest_file_roundtrip() {
        let text = "rel E 2\nelem a\nelem b\nelem c\ntuple E a b\nparent b a\nparent c a\npebble a 1\npebble b 2\npebble c 2\n";
        let f = ForestStructure::parse(text).unwrap();
        assert_eq!(f.pebble_bound(), Some(2));
        let rendered = f.render();
        let g = ForestStructure::parse(&rendered).unwrap();
        assert_eq!(f, g);
        assert_eq!(rendered, g.render());
    }

    #[test]
    fn forest_parse_errors() {
        assert!(ForestStructure::parse("elem a\nelem b\nparent a b\nparent a b").is_err());
        assert!(ForestStructure::parse("elem a\npebble a 1\nelem b").is_err());
        assert!(ForestStructure::parse("elem a\nparent a c").is_err());
    }

    #[test]
    fn morphism_enumeration_counts() {
        // maps from a 2-chain into a 2-chain over an edgeless base: the
        // chain must map onto the chain
        let chain = forest(edgeless(2), vec![None, Some(0)]);
        let maps = enumerate_forest_morphisms(&chain, &chain).unwrap();
        assert_eq!(maps, vec![vec![0, 1]]);

        // a single node maps to either root of a two-root forest
        let single = forest(edgeless(1), vec![None]);
        let two_roots = forest(edgeless(2), vec![None, None]);
        let maps = enumerate_forest_morphisms(&single, &two_roots).unwrap();
        assert_eq!(maps, vec![vec![0], vec![1]]);
    }

    #[test]
    fn height_is_max_branch_height() {
        let f = forest(edgeless(4), vec![None, Some(0), Some(1), Some(0)]);
        let bs = f.branches().unwrap();
        let max_b = bs.iter().map(|b| b.height()).max().unwrap();
        assert_eq!(f.height(), max_b);
        assert_eq!(f.height(), 3);
    }
}
