//! Independent syntactic ground truth: first-order and modal formulas,
//! Tarskian evaluation, normal-form sentence enumeration for falsification,
//! and rank-k type computation for the three fragments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::structure::{Structure, Vocabulary};

/// The three resource-indexed fragments: existential positive, full
/// first-order, and the extension with counting quantifiers. Equality atoms
/// belong to `Full` and `Count` but not `Ep`, mirroring the games' partial
/// isomorphism versus partial homomorphism winning conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fragment {
    Ep,
    Full,
    Count,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom { rel: String, vars: Vec<String> },
    Eq(String, String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
    /// "there exist at least n" witnesses
    CountingExists(usize, String, Box<Formula>),
}

impl Formula {
    pub fn quantifier_rank(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom { .. } | Formula::Eq(..) => 0,
            Formula::Not(f) => f.quantifier_rank(),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().map(|f| f.quantifier_rank()).max().unwrap_or(0)
            }
            Formula::Exists(_, f) | Formula::Forall(_, f) | Formula::CountingExists(_, _, f) => {
                1 + f.quantifier_rank()
            }
        }
    }

    /// Syntax-tree size: one node per atom, connective, or quantifier.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom { .. } | Formula::Eq(..) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(|f| f.size()).sum::<usize>(),
            Formula::Exists(_, f) | Formula::Forall(_, f) | Formula::CountingExists(_, _, f) => {
                1 + f.size()
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::True | Formula::False => BTreeSet::new(),
            Formula::Atom { vars, .. } => vars.iter().cloned().collect(),
            Formula::Eq(x, y) => [x.clone(), y.clone()].into_iter().collect(),
            Formula::Not(f) => f.free_vars(),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().flat_map(|f| f.free_vars()).collect()
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) | Formula::CountingExists(_, v, f) => {
                let mut fv = f.free_vars();
                fv.remove(v);
                fv
            }
        }
    }

    pub fn in_fragment(&self, fragment: Fragment) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom { .. } => true,
            Formula::Eq(..) => fragment != Fragment::Ep,
            Formula::Not(f) => fragment != Fragment::Ep && f.in_fragment(fragment),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(|f| f.in_fragment(fragment)),
            Formula::Exists(_, f) => f.in_fragment(fragment),
            Formula::Forall(_, f) => fragment != Fragment::Ep && f.in_fragment(fragment),
            Formula::CountingExists(_, _, f) => {
                fragment == Fragment::Count && f.in_fragment(fragment)
            }
        }
    }
}

/// Standard satisfaction with the given assignment of free variables.
pub fn eval_fo(
    formula: &Formula,
    a: &Structure,
    assignment: &HashMap<String, usize>,
) -> Result<bool> {
    let mut env: Vec<(String, usize)> = assignment.iter().map(|(k, v)| (k.clone(), *v)).collect();
    env.sort(); // deterministic shadowing base
    eval_fo_env(formula, a, &mut env)
}

fn lookup(env: &[(String, usize)], var: &str) -> Option<usize> {
    env.iter().rev().find(|(v, _)| v == var).map(|&(_, e)| e)
}

fn eval_fo_env(formula: &Formula, a: &Structure, env: &mut Vec<(String, usize)>) -> Result<bool> {
    match formula {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Atom { rel, vars } => {
            let sym = a
                .vocabulary()
                .lookup(rel)
                .ok_or_else(|| Error::precondition(format!("unknown symbol `{rel}`")))?;
            if vars.len() != a.vocabulary().arity(sym) {
                return Err(Error::precondition(format!(
                    "arity mismatch for `{rel}`"
                )));
            }
            let row = vars
                .iter()
                .map(|v| {
                    lookup(env, v)
                        .ok_or_else(|| Error::precondition(format!("unassigned variable `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(a.has_tuple(sym, &row))
        }
        Formula::Eq(x, y) => {
            let ex = lookup(env, x)
                .ok_or_else(|| Error::precondition(format!("unassigned variable `{x}`")))?;
            let ey = lookup(env, y)
                .ok_or_else(|| Error::precondition(format!("unassigned variable `{y}`")))?;
            Ok(ex == ey)
        }
        Formula::Not(f) => Ok(!eval_fo_env(f, a, env)?),
        Formula::And(fs) => {
            for f in fs {
                if !eval_fo_env(f, a, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(fs) => {
            for f in fs {
                if eval_fo_env(f, a, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Exists(v, f) => {
            for e in 0..a.size() {
                env.push((v.clone(), e));
                let holds = eval_fo_env(f, a, env)?;
                env.pop();
                if holds {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, f) => {
            for e in 0..a.size() {
                env.push((v.clone(), e));
                let holds = eval_fo_env(f, a, env)?;
                env.pop();
                if !holds {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::CountingExists(n, v, f) => {
            let mut count = 0usize;
            for e in 0..a.size() {
                env.push((v.clone(), e));
                let holds = eval_fo_env(f, a, env)?;
                env.pop();
                if holds {
                    count += 1;
                    if count >= *n {
                        return Ok(true);
                    }
                }
            }
            Ok(count >= *n)
        }
    }
}

// ---------------------------------------------------------------------------
// sentence enumeration
// ---------------------------------------------------------------------------

fn var_name(depth: usize) -> String {
    format!("x{depth}")
}

/// Streams every sentence of the fragment with quantifier rank <= k and
/// syntax-tree size <= size_bound, each exactly once up to the normal form:
/// negation pushed to atoms (and counting quantifiers), flattened
/// connectives with strictly ascending distinct operands, variables named by
/// quantifier depth, `true` only as an existential body, and counting
/// thresholds in 2..=count_cap.
pub struct SentenceEnumerator {
    vocab: Vocabulary,
    fragment: Fragment,
    count_cap: usize,
    pools: HashMap<(usize, usize, usize), Rc<Vec<Formula>>>,
}

impl SentenceEnumerator {
    pub fn new(vocab: &Vocabulary, fragment: Fragment, count_cap: usize) -> Self {
        SentenceEnumerator {
            vocab: vocab.clone(),
            fragment,
            count_cap: count_cap.max(2),
            pools: HashMap::new(),
        }
    }

    /// All sentences with rank <= k and size <= size_bound, smallest first.
    pub fn sentences(&mut self, k: usize, size_bound: usize) -> Vec<Formula> {
        let mut out = Vec::new();
        for s in 1..=size_bound {
            out.extend(self.pool(0, k, s).iter().cloned());
        }
        out
    }

    /// The sentences of exactly this size, in canonical order.
    pub fn sentences_of_size(&mut self, k: usize, size: usize) -> Rc<Vec<Formula>> {
        self.pool(0, k, size)
    }

    fn pool(&mut self, depth: usize, rank: usize, size: usize) -> Rc<Vec<Formula>> {
        if let Some(p) = self.pools.get(&(depth, rank, size)) {
            return p.clone();
        }
        let mut out: Vec<Formula> = Vec::new();
        if size == 1 {
            out.extend(self.atoms(depth));
        }
        if size == 2 && self.fragment != Fragment::Ep {
            out.extend(self.atoms(depth).into_iter().map(|a| Formula::Not(Box::new(a))));
        }
        // negated counting quantifiers are the one non-atomic negation kept
        if self.fragment == Fragment::Count && size >= 3 && rank >= 1 {
            let inner = self.counting_formulas(depth, rank, size - 1);
            out.extend(inner.into_iter().map(|f| Formula::Not(Box::new(f))));
        }
        if rank >= 1 && size >= 2 {
            let v = var_name(depth);
            let bodies = self.pool(depth + 1, rank - 1, size - 1);
            for body in bodies.iter() {
                if !body.free_vars().contains(&v) {
                    continue;
                }
                out.push(Formula::Exists(v.clone(), Box::new(body.clone())));
                if self.fragment != Fragment::Ep {
                    out.push(Formula::Forall(v.clone(), Box::new(body.clone())));
                }
            }
            if size == 2 {
                out.push(Formula::Exists(v.clone(), Box::new(Formula::True)));
            }
            if self.fragment == Fragment::Count {
                for body in bodies.iter() {
                    if !body.free_vars().contains(&v) {
                        continue;
                    }
                    for n in 2..=self.count_cap {
                        out.push(Formula::CountingExists(n, v.clone(), Box::new(body.clone())));
                    }
                }
                if size == 2 {
                    for n in 2..=self.count_cap {
                        out.push(Formula::CountingExists(n, v.clone(), Box::new(Formula::True)));
                    }
                }
            }
        }
        if size >= 3 {
            self.connective_combos(depth, rank, size, &mut out);
        }
        let rc = Rc::new(out);
        self.pools.insert((depth, rank, size), rc.clone());
        rc
    }

    fn counting_formulas(&mut self, depth: usize, rank: usize, size: usize) -> Vec<Formula> {
        self.pool(depth, rank, size)
            .iter()
            .filter(|f| matches!(f, Formula::CountingExists(..)))
            .cloned()
            .collect()
    }

    fn atoms(&self, depth: usize) -> Vec<Formula> {
        let mut out = Vec::new();
        for (name, arity) in self.vocab.symbols() {
            let mut pick = vec![0usize; *arity];
            if depth == 0 {
                continue;
            }
            loop {
                out.push(Formula::Atom {
                    rel: name.clone(),
                    vars: pick.iter().map(|&d| var_name(d)).collect(),
                });
                let mut i = 0;
                loop {
                    if i == *arity {
                        break;
                    }
                    pick[i] += 1;
                    if pick[i] < depth {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
                if i == *arity {
                    break;
                }
            }
        }
        if self.fragment != Fragment::Ep {
            for i in 0..depth {
                for j in (i + 1)..depth {
                    out.push(Formula::Eq(var_name(i), var_name(j)));
                }
            }
        }
        out
    }

    fn connective_combos(
        &mut self,
        depth: usize,
        rank: usize,
        size: usize,
        out: &mut Vec<Formula>,
    ) {
        // candidates in canonical order: (size, position within pool)
        let mut candidates: Vec<Formula> = Vec::new();
        for s in 1..=(size - 2) {
            candidates.extend(self.pool(depth, rank, s).iter().cloned());
        }
        for conj in [true, false] {
            let usable: Vec<&Formula> = candidates
                .iter()
                .filter(|f| match f {
                    Formula::And(_) => !conj,
                    Formula::Or(_) => conj,
                    _ => true,
                })
                .collect();
            let mut chosen: Vec<Formula> = Vec::new();
            combo_search(&usable, 0, size - 1, &mut chosen, &mut |children| {
                out.push(if conj {
                    Formula::And(children.to_vec())
                } else {
                    Formula::Or(children.to_vec())
                });
            });
        }
    }
}

fn combo_search(
    candidates: &[&Formula],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<Formula>,
    emit: &mut impl FnMut(&[Formula]),
) {
    if remaining == 0 {
        if chosen.len() >= 2 {
            emit(chosen);
        }
        return;
    }
    for (offset, f) in candidates[start..].iter().enumerate() {
        let sz = f.size();
        if sz > remaining {
            continue;
        }
        // leave room for a second child
        if chosen.is_empty() && sz == remaining {
            continue;
        }
        chosen.push((*f).clone());
        combo_search(candidates, start + offset + 1, remaining - sz, chosen, emit);
        chosen.pop();
    }
}

/// Convenience wrapper over `SentenceEnumerator`.
pub fn enumerate_sentences(
    vocab: &Vocabulary,
    fragment: Fragment,
    k: usize,
    size_bound: usize,
    count_cap: usize,
) -> Vec<Formula> {
    SentenceEnumerator::new(vocab, fragment, count_cap).sentences(k, size_bound)
}

/// Smallest enumerated sentence of the fragment telling A and B apart,
/// together with the side it holds on. For the existential positive
/// fragment only sentences true in A and false in B count (the verdict it
/// falsifies is directional); the symmetric fragments accept either
/// direction. Sizes are searched in ascending order, stopping once `budget`
/// sentences have been generated, so `None` means no separator within the
/// bounds, not equivalence.
pub fn find_separating_sentence(
    a: &Structure,
    b: &Structure,
    fragment: Fragment,
    rank: usize,
    size_bound: usize,
    count_cap: usize,
    budget: usize,
) -> Result<Option<(Formula, bool)>> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let mut enumerator = SentenceEnumerator::new(a.vocabulary(), fragment, count_cap);
    let empty = HashMap::new();
    let mut generated = 0usize;
    for size in 1..=size_bound {
        if generated >= budget {
            break;
        }
        let pool = enumerator.sentences_of_size(rank, size);
        generated += pool.len();
        for sentence in pool.iter() {
            let in_a = eval_fo(sentence, a, &empty)?;
            let in_b = eval_fo(sentence, b, &empty)?;
            let separates = match fragment {
                Fragment::Ep => in_a && !in_b,
                Fragment::Full | Fragment::Count => in_a != in_b,
            };
            if separates {
                return Ok(Some((sentence.clone(), in_a)));
            }
        }
    }
    Ok(None)
}

/// Modal analogue of `find_separating_sentence`.
pub fn find_separating_modal(
    k1: &Structure,
    k2: &Structure,
    fragment: ModalFragment,
    depth: usize,
    size_bound: usize,
    count_cap: usize,
    budget: usize,
) -> Result<Option<(ModalFormula, bool)>> {
    if k1.vocabulary() != k2.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let mut enumerator = ModalEnumerator::new(k1.vocabulary(), fragment, count_cap);
    let mut generated = 0usize;
    for size in 1..=size_bound {
        if generated >= budget {
            break;
        }
        let pool = enumerator.pool_of_size(depth, size);
        generated += pool.len();
        for sentence in pool.iter() {
            let in_1 = eval_modal(sentence, k1)?;
            let in_2 = eval_modal(sentence, k2)?;
            let separates = match fragment {
                ModalFragment::Ep => in_1 && !in_2,
                ModalFragment::Plain | ModalFragment::Graded => in_1 != in_2,
            };
            if separates {
                return Ok(Some((sentence.clone(), in_1)));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// rank-k types
// ---------------------------------------------------------------------------

/// Decides the rank-k equivalences by the back-and-forth type recursion.
/// `Full` and `Count` are symmetric; `Ep` is the directed forth-only verdict
/// "every existential positive sentence true in A holds in B".
pub fn rank_k_equiv(a: &Structure, b: &Structure, k: usize, fragment: Fragment) -> Result<bool> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    match fragment {
        Fragment::Full => Ok(hintikka_type(a, &[], k, false) == hintikka_type(b, &[], k, false)),
        Fragment::Count => Ok(hintikka_type(a, &[], k, true) == hintikka_type(b, &[], k, true)),
        Fragment::Ep => {
            let mut memo = HashMap::new();
            Ok(forth(a, b, &[], &[], k, &mut memo))
        }
    }
}

/// Rank-k type of a tuple, serialized canonically. With `counting` the
/// extension types are collected as a multiset instead of a set.
pub fn hintikka_type(a: &Structure, tuple: &[usize], k: usize, counting: bool) -> String {
    let base = atomic_facts(a, tuple, true);
    if k == 0 {
        return base;
    }
    if counting {
        let mut children: BTreeMap<String, usize> = BTreeMap::new();
        for x in 0..a.size() {
            let mut ext = tuple.to_vec();
            ext.push(x);
            *children
                .entry(hintikka_type(a, &ext, k - 1, counting))
                .or_insert(0) += 1;
        }
        let mut s = base;
        s.push('{');
        for (child, n) in children {
            write!(s, "{n}*{child};").unwrap();
        }
        s.push('}');
        s
    } else {
        let mut children: BTreeSet<String> = BTreeSet::new();
        for x in 0..a.size() {
            let mut ext = tuple.to_vec();
            ext.push(x);
            children.insert(hintikka_type(a, &ext, k - 1, counting));
        }
        let mut s = base;
        s.push('{');
        for child in children {
            s.push_str(&child);
            s.push(';');
        }
        s.push('}');
        s
    }
}

/// Canonical atomic description of a tuple: which relations hold of which
/// index combinations, plus (optionally) the equality pattern.
fn atomic_facts(a: &Structure, tuple: &[usize], with_equality: bool) -> String {
    let mut s = String::new();
    for sym in 0..a.vocabulary().len() {
        let arity = a.vocabulary().arity(sym);
        let mut pick = vec![0usize; arity];
        if tuple.is_empty() {
            continue;
        }
        loop {
            let row: Vec<usize> = pick.iter().map(|&i| tuple[i]).collect();
            s.push(if a.has_tuple(sym, &row) { '1' } else { '0' });
            let mut i = 0;
            loop {
                if i == arity {
                    break;
                }
                pick[i] += 1;
                if pick[i] < tuple.len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == arity {
                break;
            }
        }
        s.push('.');
    }
    if with_equality {
        s.push('=');
        for i in 0..tuple.len() {
            for j in (i + 1)..tuple.len() {
                s.push(if tuple[i] == tuple[j] { '1' } else { '0' });
            }
        }
    }
    s
}

type ForthKey = (Vec<usize>, Vec<usize>, usize);

fn forth(
    a: &Structure,
    b: &Structure,
    ta: &[usize],
    tb: &[usize],
    r: usize,
    memo: &mut HashMap<ForthKey, bool>,
) -> bool {
    let key = (ta.to_vec(), tb.to_vec(), r);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let ok = forth_atomic(a, b, ta, tb)
        && (r == 0
            || (0..a.size()).all(|x| {
                let mut ea = ta.to_vec();
                ea.push(x);
                (0..b.size()).any(|y| {
                    let mut eb = tb.to_vec();
                    eb.push(y);
                    forth(a, b, &ea, &eb, r - 1, memo)
                })
            }));
    memo.insert(key, ok);
    ok
}

/// Positive atomic facts of the A-tuple are included in those of the B-tuple
/// (no equality: the existential positive fragment cannot see it).
fn forth_atomic(a: &Structure, b: &Structure, ta: &[usize], tb: &[usize]) -> bool {
    debug_assert_eq!(ta.len(), tb.len());
    for sym in 0..a.vocabulary().len() {
        let arity = a.vocabulary().arity(sym);
        if ta.is_empty() {
            continue;
        }
        let mut pick = vec![0usize; arity];
        loop {
            let row_a: Vec<usize> = pick.iter().map(|&i| ta[i]).collect();
            if a.has_tuple(sym, &row_a) {
                let row_b: Vec<usize> = pick.iter().map(|&i| tb[i]).collect();
                if !b.has_tuple(sym, &row_b) {
                    return false;
                }
            }
            let mut i = 0;
            loop {
                if i == arity {
                    break;
                }
                pick[i] += 1;
                if pick[i] < ta.len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == arity {
                break;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// modal formulas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalFragment {
    /// positive diamond-only fragment
    Ep,
    /// full modal logic
    Plain,
    /// graded modal logic
    Graded,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModalFormula {
    True,
    False,
    Prop(String),
    Not(Box<ModalFormula>),
    And(Vec<ModalFormula>),
    Or(Vec<ModalFormula>),
    Dia { rel: String, body: Box<ModalFormula> },
    Box_ { rel: String, body: Box<ModalFormula> },
    /// "at least n successors satisfy the body"
    GradedDia {
        n: usize,
        rel: String,
        body: Box<ModalFormula>,
    },
}

impl ModalFormula {
    pub fn modal_depth(&self) -> usize {
        match self {
            ModalFormula::True | ModalFormula::False | ModalFormula::Prop(_) => 0,
            ModalFormula::Not(f) => f.modal_depth(),
            ModalFormula::And(fs) | ModalFormula::Or(fs) => {
                fs.iter().map(|f| f.modal_depth()).max().unwrap_or(0)
            }
            ModalFormula::Dia { body, .. }
            | ModalFormula::Box_ { body, .. }
            | ModalFormula::GradedDia { body, .. } => 1 + body.modal_depth(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ModalFormula::True | ModalFormula::False | ModalFormula::Prop(_) => 1,
            ModalFormula::Not(f) => 1 + f.size(),
            ModalFormula::And(fs) | ModalFormula::Or(fs) => {
                1 + fs.iter().map(|f| f.size()).sum::<usize>()
            }
            ModalFormula::Dia { body, .. }
            | ModalFormula::Box_ { body, .. }
            | ModalFormula::GradedDia { body, .. } => 1 + body.size(),
        }
    }

    pub fn in_fragment(&self, fragment: ModalFragment) -> bool {
        match self {
            ModalFormula::True | ModalFormula::False | ModalFormula::Prop(_) => true,
            ModalFormula::Not(f) => fragment != ModalFragment::Ep && f.in_fragment(fragment),
            ModalFormula::And(fs) | ModalFormula::Or(fs) => {
                fs.iter().all(|f| f.in_fragment(fragment))
            }
            ModalFormula::Dia { body, .. } => body.in_fragment(fragment),
            ModalFormula::Box_ { body, .. } => {
                fragment != ModalFragment::Ep && body.in_fragment(fragment)
            }
            ModalFormula::GradedDia { body, .. } => {
                fragment == ModalFragment::Graded && body.in_fragment(fragment)
            }
        }
    }
}

/// Kripke semantics at the distinguished point.
pub fn eval_modal(formula: &ModalFormula, k: &Structure) -> Result<bool> {
    crate::modal::check_kripke(k)?;
    eval_modal_at(formula, k, k.point().expect("checked"))
}

pub fn eval_modal_at(formula: &ModalFormula, k: &Structure, state: usize) -> Result<bool> {
    match formula {
        ModalFormula::True => Ok(true),
        ModalFormula::False => Ok(false),
        ModalFormula::Prop(p) => {
            let sym = k
                .vocabulary()
                .lookup(p)
                .ok_or_else(|| Error::precondition(format!("unknown proposition `{p}`")))?;
            if k.vocabulary().arity(sym) != 1 {
                return Err(Error::precondition(format!("`{p}` is not unary")));
            }
            Ok(k.has_tuple(sym, &[state]))
        }
        ModalFormula::Not(f) => Ok(!eval_modal_at(f, k, state)?),
        ModalFormula::And(fs) => {
            for f in fs {
                if !eval_modal_at(f, k, state)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ModalFormula::Or(fs) => {
            for f in fs {
                if eval_modal_at(f, k, state)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        ModalFormula::Dia { rel, body } => {
            let succ = successors(k, rel, state)?;
            for s in succ {
                if eval_modal_at(body, k, s)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        ModalFormula::Box_ { rel, body } => {
            let succ = successors(k, rel, state)?;
            for s in succ {
                if !eval_modal_at(body, k, s)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ModalFormula::GradedDia { n, rel, body } => {
            let succ = successors(k, rel, state)?;
            let mut count = 0usize;
            for s in succ {
                if eval_modal_at(body, k, s)? {
                    count += 1;
                    if count >= *n {
                        return Ok(true);
                    }
                }
            }
            Ok(count >= *n)
        }
    }
}

fn successors(k: &Structure, rel: &str, state: usize) -> Result<Vec<usize>> {
    let sym = k
        .vocabulary()
        .lookup(rel)
        .ok_or_else(|| Error::precondition(format!("unknown relation `{rel}`")))?;
    if k.vocabulary().arity(sym) != 2 {
        return Err(Error::precondition(format!("`{rel}` is not binary")));
    }
    Ok((0..k.size())
        .filter(|&t| k.has_tuple(sym, &[state, t]))
        .collect())
}

/// Enumerates modal sentences in normal form (negation on propositions and
/// graded diamonds only, ascending distinct operands, `true` only under a
/// diamond) with modal depth <= depth and size <= size_bound.
pub struct ModalEnumerator {
    props: Vec<String>,
    rels: Vec<String>,
    fragment: ModalFragment,
    count_cap: usize,
    pools: HashMap<(usize, usize), Rc<Vec<ModalFormula>>>,
}

impl ModalEnumerator {
    pub fn new(vocab: &Vocabulary, fragment: ModalFragment, count_cap: usize) -> Self {
        let props = vocab
            .symbols()
            .iter()
            .filter(|(_, a)| *a == 1)
            .map(|(n, _)| n.clone())
            .collect();
        let rels = vocab
            .symbols()
            .iter()
            .filter(|(_, a)| *a == 2)
            .map(|(n, _)| n.clone())
            .collect();
        ModalEnumerator {
            props,
            rels,
            fragment,
            count_cap: count_cap.max(2),
            pools: HashMap::new(),
        }
    }

    pub fn sentences(&mut self, depth: usize, size_bound: usize) -> Vec<ModalFormula> {
        let mut out = Vec::new();
        for s in 1..=size_bound {
            out.extend(self.pool(depth, s).iter().cloned());
        }
        out
    }

    /// The formulas of exactly this size, in canonical order.
    pub fn pool_of_size(&mut self, depth: usize, size: usize) -> Rc<Vec<ModalFormula>> {
        self.pool(depth, size)
    }

    fn pool(&mut self, depth: usize, size: usize) -> Rc<Vec<ModalFormula>> {
        if let Some(p) = self.pools.get(&(depth, size)) {
            return p.clone();
        }
        let mut out = Vec::new();
        if size == 1 {
            out.extend(self.props.iter().cloned().map(ModalFormula::Prop));
        }
        if size == 2 && self.fragment != ModalFragment::Ep {
            out.extend(
                self.props
                    .iter()
                    .cloned()
                    .map(|p| ModalFormula::Not(Box::new(ModalFormula::Prop(p)))),
            );
        }
        if depth >= 1 && size >= 2 {
            let bodies = self.pool(depth - 1, size - 1);
            for rel in self.rels.clone() {
                for body in bodies.iter() {
                    out.push(ModalFormula::Dia {
                        rel: rel.clone(),
                        body: Box::new(body.clone()),
                    });
                    if self.fragment != ModalFragment::Ep {
                        out.push(ModalFormula::Box_ {
                            rel: rel.clone(),
                            body: Box::new(body.clone()),
                        });
                    }
                    if self.fragment == ModalFragment::Graded {
                        for n in 2..=self.count_cap {
                            out.push(ModalFormula::GradedDia {
                                n,
                                rel: rel.clone(),
                                body: Box::new(body.clone()),
                            });
                        }
                    }
                }
                if size == 2 {
                    out.push(ModalFormula::Dia {
                        rel: rel.clone(),
                        body: Box::new(ModalFormula::True),
                    });
                    if self.fragment == ModalFragment::Graded {
                        for n in 2..=self.count_cap {
                            out.push(ModalFormula::GradedDia {
                                n,
                                rel: rel.clone(),
                                body: Box::new(ModalFormula::True),
                            });
                        }
                    }
                }
            }
            // negated graded diamonds (not expressible in negation normal form)
            if self.fragment == ModalFragment::Graded && size >= 3 {
                let inner: Vec<ModalFormula> = self
                    .pool(depth, size - 1)
                    .iter()
                    .filter(|f| matches!(f, ModalFormula::GradedDia { .. }))
                    .cloned()
                    .collect();
                out.extend(inner.into_iter().map(|f| ModalFormula::Not(Box::new(f))));
            }
        }
        if size >= 3 {
            let mut candidates: Vec<ModalFormula> = Vec::new();
            for s in 1..=(size - 2) {
                candidates.extend(self.pool(depth, s).iter().cloned());
            }
            for conj in [true, false] {
                let usable: Vec<&ModalFormula> = candidates
                    .iter()
                    .filter(|f| match f {
                        ModalFormula::And(_) => !conj,
                        ModalFormula::Or(_) => conj,
                        _ => true,
                    })
                    .collect();
                let mut chosen: Vec<ModalFormula> = Vec::new();
                modal_combo_search(&usable, 0, size - 1, &mut chosen, &mut |children| {
                    out.push(if conj {
                        ModalFormula::And(children.to_vec())
                    } else {
                        ModalFormula::Or(children.to_vec())
                    });
                });
            }
        }
        let rc = Rc::new(out);
        self.pools.insert((depth, size), rc.clone());
        rc
    }
}

fn modal_combo_search(
    candidates: &[&ModalFormula],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<ModalFormula>,
    emit: &mut impl FnMut(&[ModalFormula]),
) {
    if remaining == 0 {
        if chosen.len() >= 2 {
            emit(chosen);
        }
        return;
    }
    for (offset, f) in candidates[start..].iter().enumerate() {
        let sz = f.size();
        if sz > remaining {
            continue;
        }
        if chosen.is_empty() && sz == remaining {
            continue;
        }
        chosen.push((*f).clone());
        modal_combo_search(candidates, start + offset + 1, remaining - sz, chosen, emit);
        chosen.pop();
    }
}

// ---------------------------------------------------------------------------
// s-expressions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Sexpr {
    Symbol(String),
    List(Vec<Sexpr>),
}

fn parse_sexpr_text(text: &str) -> Result<Sexpr> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' || c == ')' {
            tokens.push((i, c.to_string()));
            chars.next();
        } else {
            let mut tok = String::new();
            let start = i;
            while let Some(&(_, c)) = chars.peek() {
                if c.is_whitespace() || c == '(' || c == ')' {
                    break;
                }
                tok.push(c);
                chars.next();
            }
            tokens.push((start, tok));
        }
    }
    let mut pos = 0usize;
    let expr = parse_sexpr_tokens(&tokens, &mut pos, text)?;
    if pos != tokens.len() {
        return Err(Error::parse(1, tokens[pos].0 + 1, "trailing input"));
    }
    Ok(expr)
}

fn parse_sexpr_tokens(tokens: &[(usize, String)], pos: &mut usize, text: &str) -> Result<Sexpr> {
    let Some((offset, tok)) = tokens.get(*pos) else {
        return Err(Error::parse(1, text.len() + 1, "unexpected end of input"));
    };
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    Some((_, t)) if t == ")" => {
                        *pos += 1;
                        return Ok(Sexpr::List(items));
                    }
                    Some(_) => items.push(parse_sexpr_tokens(tokens, pos, text)?),
                    None => {
                        return Err(Error::parse(1, offset + 1, "unclosed parenthesis"));
                    }
                }
            }
        }
        ")" => Err(Error::parse(1, offset + 1, "unexpected `)`")),
        _ => Ok(Sexpr::Symbol(tok.clone())),
    }
}

/// Parses a first-order formula from the s-expression grammar:
/// `(exists x f)`, `(forall x f)`, `(geq n x f)`, `(and f...)`, `(or f...)`,
/// `(not f)`, `(= x y)`, `(R x...)`, `true`, `false`.
pub fn parse_fo_sexpr(text: &str) -> Result<Formula> {
    fo_from_sexpr(&parse_sexpr_text(text)?)
}

fn fo_from_sexpr(e: &Sexpr) -> Result<Formula> {
    match e {
        Sexpr::Symbol(s) => match s.as_str() {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            other => Err(Error::precondition(format!(
                "bare symbol `{other}` is not a formula"
            ))),
        },
        Sexpr::List(items) => {
            let Some(Sexpr::Symbol(head)) = items.first() else {
                return Err(Error::precondition("expected an operator"));
            };
            let args = &items[1..];
            match head.as_str() {
                "and" | "or" => {
                    if args.is_empty() {
                        return Err(Error::precondition(format!("`{head}` needs operands")));
                    }
                    let fs = args.iter().map(fo_from_sexpr).collect::<Result<Vec<_>>>()?;
                    Ok(if head == "and" {
                        Formula::And(fs)
                    } else {
                        Formula::Or(fs)
                    })
                }
                "not" => {
                    let [f] = args else {
                        return Err(Error::precondition("`not` takes one operand"));
                    };
                    Ok(Formula::Not(Box::new(fo_from_sexpr(f)?)))
                }
                "exists" | "forall" => {
                    let [Sexpr::Symbol(v), f] = args else {
                        return Err(Error::precondition(format!(
                            "`{head}` takes a variable and a formula"
                        )));
                    };
                    let body = Box::new(fo_from_sexpr(f)?);
                    Ok(if head == "exists" {
                        Formula::Exists(v.clone(), body)
                    } else {
                        Formula::Forall(v.clone(), body)
                    })
                }
                "geq" => {
                    let [Sexpr::Symbol(n), Sexpr::Symbol(v), f] = args else {
                        return Err(Error::precondition(
                            "`geq` takes a count, a variable, and a formula",
                        ));
                    };
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::precondition("`geq` count must be a number"))?;
                    if n == 0 {
                        return Err(Error::precondition("`geq` count must be >= 1"));
                    }
                    Ok(Formula::CountingExists(
                        n,
                        v.clone(),
                        Box::new(fo_from_sexpr(f)?),
                    ))
                }
                "=" => {
                    let [Sexpr::Symbol(x), Sexpr::Symbol(y)] = args else {
                        return Err(Error::precondition("`=` takes two variables"));
                    };
                    Ok(Formula::Eq(x.clone(), y.clone()))
                }
                rel => {
                    let vars = args
                        .iter()
                        .map(|a| match a {
                            Sexpr::Symbol(v) => Ok(v.clone()),
                            _ => Err(Error::precondition("atom arguments must be variables")),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Formula::Atom {
                        rel: rel.to_string(),
                        vars,
                    })
                }
            }
        }
    }
}

/// Parses a modal formula: `(dia R f)`, `(box R f)`, `(gdia n R f)`,
/// `(and ...)`, `(or ...)`, `(not f)`, bare propositions, `true`, `false`.
pub fn parse_modal_sexpr(text: &str) -> Result<ModalFormula> {
    modal_from_sexpr(&parse_sexpr_text(text)?)
}

fn modal_from_sexpr(e: &Sexpr) -> Result<ModalFormula> {
    match e {
        Sexpr::Symbol(s) => match s.as_str() {
            "true" => Ok(ModalFormula::True),
            "false" => Ok(ModalFormula::False),
            p => Ok(ModalFormula::Prop(p.to_string())),
        },
        Sexpr::List(items) => {
            let Some(Sexpr::Symbol(head)) = items.first() else {
                return Err(Error::precondition("expected an operator"));
            };
            let args = &items[1..];
            match head.as_str() {
                "and" | "or" => {
                    if args.is_empty() {
                        return Err(Error::precondition(format!("`{head}` needs operands")));
                    }
                    let fs = args
                        .iter()
                        .map(modal_from_sexpr)
                        .collect::<Result<Vec<_>>>()?;
                    Ok(if head == "and" {
                        ModalFormula::And(fs)
                    } else {
                        ModalFormula::Or(fs)
                    })
                }
                "not" => {
                    let [f] = args else {
                        return Err(Error::precondition("`not` takes one operand"));
                    };
                    Ok(ModalFormula::Not(Box::new(modal_from_sexpr(f)?)))
                }
                "dia" | "box" => {
                    let [Sexpr::Symbol(rel), f] = args else {
                        return Err(Error::precondition(format!(
                            "`{head}` takes a relation and a formula"
                        )));
                    };
                    let body = Box::new(modal_from_sexpr(f)?);
                    Ok(if head == "dia" {
                        ModalFormula::Dia {
                            rel: rel.clone(),
                            body,
                        }
                    } else {
                        ModalFormula::Box_ {
                            rel: rel.clone(),
                            body,
                        }
                    })
                }
                "gdia" => {
                    let [Sexpr::Symbol(n), Sexpr::Symbol(rel), f] = args else {
                        return Err(Error::precondition(
                            "`gdia` takes a count, a relation, and a formula",
                        ));
                    };
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::precondition("`gdia` count must be a number"))?;
                    if n == 0 {
                        return Err(Error::precondition("`gdia` count must be >= 1"));
                    }
                    Ok(ModalFormula::GradedDia {
                        n,
                        rel: rel.clone(),
                        body: Box::new(modal_from_sexpr(f)?),
                    })
                }
                p if args.is_empty() => Ok(ModalFormula::Prop(p.to_string())),
                other => Err(Error::precondition(format!("unknown operator `{other}`"))),
            }
        }
    }
}

pub fn fo_to_sexpr(f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom { rel, vars } => {
            let mut s = format!("({rel}");
            for v in vars {
                write!(s, " {v}").unwrap();
            }
            s.push(')');
            s
        }
        Formula::Eq(x, y) => format!("(= {x} {y})"),
        Formula::Not(f) => format!("(not {})", fo_to_sexpr(f)),
        Formula::And(fs) => {
            format!(
                "(and {})",
                fs.iter().map(fo_to_sexpr).collect::<Vec<_>>().join(" ")
            )
        }
        Formula::Or(fs) => {
            format!(
                "(or {})",
                fs.iter().map(fo_to_sexpr).collect::<Vec<_>>().join(" ")
            )
        }
        Formula::Exists(v, f) => format!("(exists {v} {})", fo_to_sexpr(f)),
        Formula::Forall(v, f) => format!("(forall {v} {})", fo_to_sexpr(f)),
        Formula::CountingExists(n, v, f) => format!("(geq {n} {v} {})", fo_to_sexpr(f)),
    }
}

pub fn modal_to_sexpr(f: &ModalFormula) -> String {
    match f {
        ModalFormula::True => "true".into(),
        ModalFormula::False => "false".into(),
        ModalFormula::Prop(p) => p.clone(),
        ModalFormula::Not(f) => format!("(not {})", modal_to_sexpr(f)),
        ModalFormula::And(fs) => format!(
            "(and {})",
            fs.iter().map(modal_to_sexpr).collect::<Vec<_>>().join(" ")
        ),
        ModalFormula::Or(fs) => format!(
            "(or {})",
            fs.iter().map(modal_to_sexpr).collect::<Vec<_>>().join(" ")
        ),
        ModalFormula::Dia { rel, body } => format!("(dia {rel} {})", modal_to_sexpr(body)),
        ModalFormula::Box_ { rel, body } => format!("(box {rel} {})", modal_to_sexpr(body)),
        ModalFormula::GradedDia { n, rel, body } => {
            format!("(gdia {n} {rel} {})", modal_to_sexpr(body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::{all_pointed_kripke_upto, clique, graph_vocab, linear_order};

    fn eval_sentence(f: &Formula, a: &Structure) -> bool {
        eval_fo(f, a, &HashMap::new()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let selfloop = Structure::parse("rel E 2\nelem a\ntuple E a a").unwrap();
        let phi = parse_fo_sexpr("(exists x (E x x))").unwrap();
        assert!(eval_sentence(&phi, &selfloop));
        assert!(!eval_sentence(&phi, &clique(2)));

        let geq2 = parse_fo_sexpr("(geq 2 x true)").unwrap();
        let one = crate::suites::edgeless(1);
        assert!(!eval_sentence(&geq2, &one));
        assert!(eval_sentence(&geq2, &clique(2)));
    }

    #[test]
    fn eval_errors() {
        let phi = parse_fo_sexpr("(E x y)").unwrap();
        assert!(eval_fo(&phi, &clique(2), &HashMap::new()).is_err());
        let unknown = parse_fo_sexpr("(exists x (Q x))").unwrap();
        assert!(eval_fo(&unknown, &clique(2), &HashMap::new()).is_err());
    }

    #[test]
    fn enumerator_contract() {
        let vocab = graph_vocab();
        for fragment in [Fragment::Ep, Fragment::Full, Fragment::Count] {
            let sentences = enumerate_sentences(&vocab, fragment, 2, 7, 3);
            let mut seen = std::collections::HashSet::new();
            for f in &sentences {
                assert!(f.quantifier_rank() <= 2, "{}", fo_to_sexpr(f));
                assert!(f.size() <= 7, "{}", fo_to_sexpr(f));
                assert!(f.in_fragment(fragment), "{}", fo_to_sexpr(f));
                assert!(f.free_vars().is_empty(), "{}", fo_to_sexpr(f));
                assert!(seen.insert(f.clone()), "duplicate {}", fo_to_sexpr(f));
            }
        }
    }

    #[test]
    fn enumerator_contains_loop_sentence() {
        let sentences = enumerate_sentences(&graph_vocab(), Fragment::Ep, 1, 4, 3);
        let loop_sentence = parse_fo_sexpr("(exists x0 (E x0 x0))").unwrap();
        assert!(sentences.contains(&loop_sentence));
    }

    #[test]
    fn rank_zero_enumeration_is_empty() {
        assert!(enumerate_sentences(&graph_vocab(), Fragment::Full, 0, 8, 3).is_empty());
    }

    #[test]
    fn rank_equiv_linear_orders() {
        let l2 = linear_order(2);
        let l3 = linear_order(3);
        let l4 = linear_order(4);
        assert_eq!(rank_k_equiv(&l3, &l4, 2, Fragment::Full), Ok(true));
        assert_eq!(rank_k_equiv(&l3, &l4, 3, Fragment::Full), Ok(false));
        assert_eq!(rank_k_equiv(&l3, &l2, 1, Fragment::Ep), Ok(true));
        assert_eq!(rank_k_equiv(&l3, &l2, 2, Fragment::Ep), Ok(false));
        // ep is directed: the smaller order maps forward into the bigger
        assert_eq!(rank_k_equiv(&l2, &l3, 2, Fragment::Ep), Ok(true));
    }

    #[test]
    fn count_equiv_needs_equal_cardinality() {
        let a = crate::suites::edgeless(2);
        let b = crate::suites::edgeless(3);
        assert_eq!(rank_k_equiv(&a, &b, 1, Fragment::Count), Ok(false));
        assert_eq!(rank_k_equiv(&a, &b, 1, Fragment::Full), Ok(true));
    }

    #[test]
    fn modal_eval_examples() {
        let dead_end = crate::suites::pointed_kripke(1, &[], &[], 0);
        let dia_top = parse_modal_sexpr("(dia R true)").unwrap();
        assert_eq!(eval_modal(&dia_top, &dead_end), Ok(false));

        let two = crate::suites::pointed_kripke(3, &[], &[(0, 1), (0, 2)], 0);
        let gdia = parse_modal_sexpr("(gdia 2 R true)").unwrap();
        assert_eq!(eval_modal(&gdia, &two), Ok(true));
    }

    #[test]
    fn box_bottom_is_not_dia_top() {
        let box_bot = parse_modal_sexpr("(box R false)").unwrap();
        let dia_top = parse_modal_sexpr("(dia R true)").unwrap();
        for k in all_pointed_kripke_upto(2).unwrap() {
            let lhs = eval_modal(&box_bot, &k).unwrap();
            let rhs = !eval_modal(&dia_top, &k).unwrap();
            assert_eq!(lhs, rhs, "on {}", k.render());
        }
    }

    #[test]
    fn modal_enumerator_contract() {
        let vocab = crate::suites::kripke_vocab();
        for fragment in [ModalFragment::Ep, ModalFragment::Plain, ModalFragment::Graded] {
            let mut e = ModalEnumerator::new(&vocab, fragment, 3);
            let sentences = e.sentences(2, 6);
            let mut seen = std::collections::HashSet::new();
            for f in &sentences {
                assert!(f.modal_depth() <= 2);
                assert!(f.size() <= 6);
                assert!(f.in_fragment(fragment), "{}", modal_to_sexpr(f));
                assert!(seen.insert(f.clone()), "duplicate {}", modal_to_sexpr(f));
            }
        }
    }

    #[test]
    fn separator_search_is_directional_for_ep() {
        let l2 = linear_order(2);
        let l3 = linear_order(3);
        // every existential positive sentence true in L2 holds in L3
        assert_eq!(
            find_separating_sentence(&l2, &l3, Fragment::Ep, 2, 12, 3, 100_000).unwrap(),
            None
        );
        let (phi, in_left) =
            find_separating_sentence(&l3, &l2, Fragment::Ep, 2, 12, 3, 100_000)
                .unwrap()
                .expect("rank-2 separator exists");
        assert!(in_left);
        assert!(phi.in_fragment(Fragment::Ep));
        // the symmetric fragments may separate in either direction
        assert!(
            find_separating_sentence(&l2, &l3, Fragment::Full, 2, 12, 3, 100_000)
                .unwrap()
                .is_some()
        );
    }

    #[test]
    fn sexpr_roundtrip() {
        let texts = [
            "(exists x (and (exists y (lt y x)) (exists y (lt x y))))",
            "(forall x (or (E x x) (not (E x x))))",
            "(geq 2 x (exists y (= x y)))",
        ];
        for t in texts {
            let f = parse_fo_sexpr(t).unwrap();
            assert_eq!(fo_to_sexpr(&f), *t);
        }
        let m = "(and p (not (gdia 2 R (box R false))))";
        let f = parse_modal_sexpr(m).unwrap();
        assert_eq!(modal_to_sexpr(&f), m);
    }
}
