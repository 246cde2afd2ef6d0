//! Fixpoint solvers for the model-comparison games: bounded-round EF games
//! (existential, back-and-forth, and bijection variants), unbounded pebble
//! games, bounded bisimulation games, and the abstract game on forest
//! structures. Duplicator wins come with a replayable strategy table.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::forest::ForestStructure;
use crate::modal::check_kripke;
use crate::structure::{check_partial_map, ElementMap, PartialMapMode, Structure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    Spoiler,
    Duplicator,
}

/// Winning-condition flavor: partial homomorphism with Spoiler restricted to
/// the left structure (`Ep`), partial isomorphism with both sides open
/// (`Full`), or the bijection variant deciding counting equivalence
/// (`Count`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameMode {
    Ep,
    Full,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfResponseEntry {
    pub position: Vec<(usize, usize)>,
    pub rounds_left: usize,
    pub side: Side,
    pub chosen: usize,
    pub response: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EfBijectionEntry {
    pub position: Vec<(usize, usize)>,
    pub rounds_left: usize,
    /// element i of the left structure pairs with the i-th entry on the right
    pub bijection: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PebbleResponseEntry {
    /// (pebble index, left element, right element), sorted by pebble
    pub position: Vec<(usize, usize, usize)>,
    pub pebble: usize,
    pub side: Side,
    pub chosen: usize,
    pub response: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PebbleBijectionEntry {
    pub position: Vec<(usize, usize, usize)>,
    /// Spoiler announces the pebble before Duplicator commits
    pub pebble: usize,
    pub bijection: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalResponseEntry {
    pub position: (usize, usize),
    pub rounds_left: usize,
    pub side: Side,
    pub rel: usize,
    pub chosen: usize,
    pub response: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalBijectionEntry {
    pub position: (usize, usize),
    pub rounds_left: usize,
    /// per transition relation, the successor pairing Duplicator commits to
    pub bijections: Vec<(usize, Vec<(usize, usize)>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArborealResponseEntry {
    /// chains are identified by their deepest element; None is the empty chain
    pub position: (Option<usize>, Option<usize>),
    pub side: Side,
    pub chosen: usize,
    pub response: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    EfResponses(Vec<EfResponseEntry>),
    EfBijections(Vec<EfBijectionEntry>),
    PebbleResponses(Vec<PebbleResponseEntry>),
    PebbleBijections(Vec<PebbleBijectionEntry>),
    ModalResponses(Vec<ModalResponseEntry>),
    ModalBijections(Vec<ModalBijectionEntry>),
    ArborealResponses(Vec<ArborealResponseEntry>),
}

/// Outcome of a solved game: the winner, the resource bound it was solved
/// at, the round bound (None for unbounded-duration games), and a strategy
/// table exactly when Duplicator wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameResult {
    pub winner: Player,
    pub mode: GameMode,
    pub resource: usize,
    pub rounds: Option<usize>,
    pub strategy: Option<Strategy>,
}

type ReplayTable = HashMap<(Vec<(usize, usize)>, usize, usize), usize>;

fn canonical_position(mut pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

// ---------------------------------------------------------------------------
// Ehrenfeucht-Fraisse games
// ---------------------------------------------------------------------------

struct EfSolver<'a> {
    a: &'a Structure,
    b: &'a Structure,
    mode: GameMode,
    memo: HashMap<(Vec<(usize, usize)>, usize), bool>,
}

impl<'a> EfSolver<'a> {
    fn condition(&self, pos: &[(usize, usize)]) -> bool {
        let mode = match self.mode {
            GameMode::Ep => PartialMapMode::PartialHom,
            GameMode::Full | GameMode::Count => PartialMapMode::PartialIso,
        };
        check_partial_map(pos, self.a, self.b, mode).expect("validated inputs")
    }

    fn wins(&mut self, pos: Vec<(usize, usize)>, r: usize) -> bool {
        if let Some(&v) = self.memo.get(&(pos.clone(), r)) {
            return v;
        }
        let result = self.compute(&pos, r);
        self.memo.insert((pos, r), result);
        result
    }

    fn compute(&mut self, pos: &[(usize, usize)], r: usize) -> bool {
        if !self.condition(pos) {
            return false;
        }
        if r == 0 {
            return true;
        }
        match self.mode {
            GameMode::Ep => (0..self.a.size()).all(|x| self.response_for(pos, r, Side::Left, x).is_some()),
            GameMode::Full => {
                (0..self.a.size()).all(|x| self.response_for(pos, r, Side::Left, x).is_some())
                    && (0..self.b.size())
                        .all(|y| self.response_for(pos, r, Side::Right, y).is_some())
            }
            GameMode::Count => self.bijection_for(pos, r).is_some(),
        }
    }

    /// Canonical (least) winning response to a Spoiler move, if any.
    fn response_for(
        &mut self,
        pos: &[(usize, usize)],
        r: usize,
        side: Side,
        chosen: usize,
    ) -> Option<usize> {
        let options = match side {
            Side::Left => self.b.size(),
            Side::Right => self.a.size(),
        };
        (0..options).find(|&resp| {
            let pair = match side {
                Side::Left => (chosen, resp),
                Side::Right => (resp, chosen),
            };
            let mut next = pos.to_vec();
            next.push(pair);
            self.wins(canonical_position(next), r - 1)
        })
    }

    /// Canonical bijection commitment surviving every Spoiler choice, if any.
    fn bijection_for(&mut self, pos: &[(usize, usize)], r: usize) -> Option<Vec<usize>> {
        let n = self.a.size();
        let m = self.b.size();
        let choices: Vec<Vec<usize>> = (0..n)
            .map(|x| {
                (0..m)
                    .filter(|&y| {
                        let mut next = pos.to_vec();
                        next.push((x, y));
                        self.wins(canonical_position(next), r - 1)
                    })
                    .collect()
            })
            .collect();
        least_sdr(&choices, m)
    }
}

/// Solves the k-round EF game between A and B in the requested mode.
pub fn solve_ef_game(a: &Structure, b: &Structure, k: usize, mode: GameMode) -> Result<GameResult> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let mut result = GameResult {
        winner: Player::Spoiler,
        mode,
        resource: k,
        rounds: Some(k),
        strategy: None,
    };
    if mode == GameMode::Count && k > 0 && a.size() != b.size() {
        return Ok(result);
    }
    let mut solver = EfSolver {
        a,
        b,
        mode,
        memo: HashMap::new(),
    };
    if !solver.wins(Vec::new(), k) {
        return Ok(result);
    }
    result.winner = Player::Duplicator;
    result.strategy = Some(extract_ef_strategy(&mut solver, k));
    Ok(result)
}

fn extract_ef_strategy(solver: &mut EfSolver, k: usize) -> Strategy {
    let mut visited = std::collections::HashSet::new();
    let mut queue = vec![(Vec::<(usize, usize)>::new(), k)];
    let mut responses = Vec::new();
    let mut bijections = Vec::new();
    while let Some((pos, r)) = queue.pop() {
        if r == 0 || !visited.insert((pos.clone(), r)) {
            continue;
        }
        match solver.mode {
            GameMode::Ep | GameMode::Full => {
                let mut moves: Vec<(Side, usize)> = (0..solver.a.size())
                    .map(|x| (Side::Left, x))
                    .collect();
                if solver.mode == GameMode::Full {
                    moves.extend((0..solver.b.size()).map(|y| (Side::Right, y)));
                }
                for (side, chosen) in moves {
                    let response = solver
                        .response_for(&pos, r, side, chosen)
                        .expect("winning position has responses");
                    responses.push(EfResponseEntry {
                        position: pos.clone(),
                        rounds_left: r,
                        side,
                        chosen,
                        response,
                    });
                    let pair = match side {
                        Side::Left => (chosen, response),
                        Side::Right => (response, chosen),
                    };
                    let mut next = pos.clone();
                    next.push(pair);
                    queue.push((canonical_position(next), r - 1));
                }
            }
            GameMode::Count => {
                let bijection = solver
                    .bijection_for(&pos, r)
                    .expect("winning position has a bijection");
                for (x, &y) in bijection.iter().enumerate() {
                    let mut next = pos.clone();
                    next.push((x, y));
                    queue.push((canonical_position(next), r - 1));
                }
                bijections.push(EfBijectionEntry {
                    position: pos,
                    rounds_left: r,
                    bijection,
                });
            }
        }
    }
    match solver.mode {
        GameMode::Count => {
            bijections.sort_by(|l, r| (l.rounds_left, &l.position).cmp(&(r.rounds_left, &r.position)).reverse());
            Strategy::EfBijections(bijections)
        }
        _ => {
            responses.sort_by(|l, r| {
                (l.rounds_left, &l.position, l.side as usize, l.chosen)
                    .cmp(&(r.rounds_left, &r.position, r.side as usize, r.chosen))
                    .reverse()
            });
            Strategy::EfResponses(responses)
        }
    }
}

/// Replays a Duplicator strategy for the existential EF game as a coKleisli
/// map: the play [a_1..a_i] goes to Duplicator's response after Spoiler
/// plays a_1, ..., a_i. The result is a homomorphism from the cover.
pub fn strategy_to_cokleisli(
    result: &GameResult,
    a: &Structure,
    b: &Structure,
    k: usize,
) -> Result<ElementMap> {
    if result.winner != Player::Duplicator
        || result.mode != GameMode::Ep
        || result.rounds != Some(k)
    {
        return Err(Error::precondition(
            "expected a Duplicator win for the k-round existential EF game",
        ));
    }
    let Some(Strategy::EfResponses(entries)) = &result.strategy else {
        return Err(Error::precondition("missing response strategy"));
    };
    let mut table: ReplayTable = HashMap::new();
    for e in entries {
        table.insert((e.position.clone(), e.rounds_left, e.chosen), e.response);
    }
    let cover = crate::ef::build_ef(a, k)?;
    let mut pairs = Vec::with_capacity(cover.size());
    for node in 0..cover.size() {
        let play = &cover.sequence(node).entries;
        let mut pos: Vec<(usize, usize)> = Vec::new();
        let mut response = None;
        for (i, &x) in play.iter().enumerate() {
            let r = k - i;
            let y = *table
                .get(&(canonical_position(pos.clone()), r, x))
                .ok_or_else(|| {
                    Error::precondition("strategy table does not cover this play")
                })?;
            pos.push((x, y));
            response = Some(y);
        }
        pairs.push((node, response.expect("nonempty play")));
    }
    let map = ElementMap::new(cover.structure(), b, pairs)?;
    debug_assert_eq!(
        crate::structure::check_map(&map, crate::structure::MapMode::Hom),
        Ok(true)
    );
    Ok(map)
}

// ---------------------------------------------------------------------------
// pebble games
// ---------------------------------------------------------------------------

struct PebbleArena<'a> {
    a: &'a Structure,
    b: &'a Structure,
    pebbles: usize,
    base: usize,
    total: usize,
}

impl<'a> PebbleArena<'a> {
    fn new(a: &'a Structure, b: &'a Structure, pebbles: usize) -> Result<Self> {
        let base = a.size() * b.size() + 1;
        let total = base.checked_pow(pebbles as u32).ok_or_else(|| {
            Error::precondition("pebble position space overflows")
        })?;
        if total > 5_000_000 {
            return Err(Error::precondition(
                "pebble position space is not desk-scale",
            ));
        }
        Ok(PebbleArena {
            a,
            b,
            pebbles,
            base,
            total,
        })
    }

    fn decode(&self, mut code: usize) -> Vec<Option<(usize, usize)>> {
        let mut slots = Vec::with_capacity(self.pebbles);
        for _ in 0..self.pebbles {
            let digit = code % self.base;
            code /= self.base;
            slots.push(if digit == 0 {
                None
            } else {
                Some(((digit - 1) / self.b.size(), (digit - 1) % self.b.size()))
            });
        }
        slots
    }

    fn with_pebble(&self, code: usize, pebble: usize, pair: (usize, usize)) -> usize {
        let digit = 1 + pair.0 * self.b.size() + pair.1;
        let weight = self.base.pow(pebble as u32);
        let old_digit = (code / weight) % self.base;
        code - old_digit * weight + digit * weight
    }

    fn pairs(&self, code: usize) -> Vec<(usize, usize)> {
        self.decode(code).into_iter().flatten().collect()
    }

    fn position_entries(&self, code: usize) -> Vec<(usize, usize, usize)> {
        self.decode(code)
            .into_iter()
            .enumerate()
            .filter_map(|(i, slot)| slot.map(|(x, y)| (i + 1, x, y)))
            .collect()
    }
}

/// Solves the unbounded-duration k-pebble game by greatest fixpoint over
/// pebbled positions: survivors are positions from which every Spoiler move
/// has a surviving response. Ep mode is the k-consistency decision for the
/// existence of a homomorphism from the (infinite) pebble cover.
pub fn solve_pebble_game(
    a: &Structure,
    b: &Structure,
    k: usize,
    mode: GameMode,
) -> Result<GameResult> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    if k == 0 {
        return Err(Error::precondition("pebble games need k >= 1"));
    }
    let mut result = GameResult {
        winner: Player::Spoiler,
        mode,
        resource: k,
        rounds: None,
        strategy: None,
    };
    if mode == GameMode::Count && a.size() != b.size() {
        return Ok(result);
    }
    let arena = PebbleArena::new(a, b, k)?;
    let cond = match mode {
        GameMode::Ep => PartialMapMode::PartialHom,
        GameMode::Full | GameMode::Count => PartialMapMode::PartialIso,
    };
    let mut alive: Vec<bool> = (0..arena.total)
        .map(|code| check_partial_map(&arena.pairs(code), a, b, cond).expect("validated"))
        .collect();
    loop {
        let mut changed = false;
        for code in 0..arena.total {
            if !alive[code] {
                continue;
            }
            let survives = match mode {
                GameMode::Ep | GameMode::Full => {
                    pebble_all_moves_answered(&arena, &alive, code, mode)
                }
                GameMode::Count => (0..k)
                    .all(|p| pebble_bijection(&arena, &alive, code, p).is_some()),
            };
            if !survives {
                alive[code] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !alive[0] {
        return Ok(result);
    }
    result.winner = Player::Duplicator;
    result.strategy = Some(extract_pebble_strategy(&arena, &alive, mode));
    Ok(result)
}

fn pebble_all_moves_answered(
    arena: &PebbleArena,
    alive: &[bool],
    code: usize,
    mode: GameMode,
) -> bool {
    for pebble in 0..arena.pebbles {
        for x in 0..arena.a.size() {
            if pebble_response(arena, alive, code, pebble, Side::Left, x).is_none() {
                return false;
            }
        }
        if mode == GameMode::Full {
            for y in 0..arena.b.size() {
                if pebble_response(arena, alive, code, pebble, Side::Right, y).is_none() {
                    return false;
                }
            }
        }
    }
    true
}

fn pebble_response(
    arena: &PebbleArena,
    alive: &[bool],
    code: usize,
    pebble: usize,
    side: Side,
    chosen: usize,
) -> Option<usize> {
    let options = match side {
        Side::Left => arena.b.size(),
        Side::Right => arena.a.size(),
    };
    (0..options).find(|&resp| {
        let pair = match side {
            Side::Left => (chosen, resp),
            Side::Right => (resp, chosen),
        };
        alive[arena.with_pebble(code, pebble, pair)]
    })
}

fn pebble_bijection(
    arena: &PebbleArena,
    alive: &[bool],
    code: usize,
    pebble: usize,
) -> Option<Vec<usize>> {
    let n = arena.a.size();
    let choices: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| alive[arena.with_pebble(code, pebble, (x, y))])
                .collect()
        })
        .collect();
    least_sdr(&choices, n)
}

fn extract_pebble_strategy(arena: &PebbleArena, alive: &[bool], mode: GameMode) -> Strategy {
    let mut visited = vec![false; arena.total];
    let mut queue = vec![0usize];
    let mut responses = Vec::new();
    let mut bijections = Vec::new();
    while let Some(code) = queue.pop() {
        if visited[code] {
            continue;
        }
        visited[code] = true;
        match mode {
            GameMode::Ep | GameMode::Full => {
                for pebble in 0..arena.pebbles {
                    let mut moves: Vec<(Side, usize)> =
                        (0..arena.a.size()).map(|x| (Side::Left, x)).collect();
                    if mode == GameMode::Full {
                        moves.extend((0..arena.b.size()).map(|y| (Side::Right, y)));
                    }
                    for (side, chosen) in moves {
                        let response = pebble_response(arena, alive, code, pebble, side, chosen)
                            .expect("alive position has responses");
                        responses.push(PebbleResponseEntry {
                            position: arena.position_entries(code),
                            pebble: pebble + 1,
                            side,
                            chosen,
                            response,
                        });
                        let pair = match side {
                            Side::Left => (chosen, response),
                            Side::Right => (response, chosen),
                        };
                        queue.push(arena.with_pebble(code, pebble, pair));
                    }
                }
            }
            GameMode::Count => {
                for p in 0..arena.pebbles {
                    let bijection = pebble_bijection(arena, alive, code, p)
                        .expect("alive position has a bijection");
                    for (x, &y) in bijection.iter().enumerate() {
                        queue.push(arena.with_pebble(code, p, (x, y)));
                    }
                    bijections.push(PebbleBijectionEntry {
                        position: arena.position_entries(code),
                        pebble: p + 1,
                        bijection,
                    });
                }
            }
        }
    }
    match mode {
        GameMode::Count => {
            bijections.sort_by(|l, r| (&l.position, l.pebble).cmp(&(&r.position, r.pebble)));
            Strategy::PebbleBijections(bijections)
        }
        _ => {
            responses.sort_by(|l, r| {
                (&l.position, l.pebble, l.side as usize, l.chosen).cmp(&(
                    &r.position,
                    r.pebble,
                    r.side as usize,
                    r.chosen,
                ))
            });
            Strategy::PebbleResponses(responses)
        }
    }
}

// ---------------------------------------------------------------------------
// modal bisimulation games
// ---------------------------------------------------------------------------

struct ModalSolver<'a> {
    k1: &'a Structure,
    k2: &'a Structure,
    props: Vec<usize>,
    rels: Vec<usize>,
    mode: GameMode,
    memo: HashMap<(usize, usize, usize), bool>,
}

impl<'a> ModalSolver<'a> {
    fn atomic(&self, u: usize, v: usize) -> bool {
        self.props.iter().all(|&p| {
            let left = self.k1.has_tuple(p, &[u]);
            let right = self.k2.has_tuple(p, &[v]);
            match self.mode {
                GameMode::Ep => !left || right,
                GameMode::Full | GameMode::Count => left == right,
            }
        })
    }

    fn successors(k: &Structure, rel: usize, s: usize) -> Vec<usize> {
        (0..k.size()).filter(|&t| k.has_tuple(rel, &[s, t])).collect()
    }

    fn wins(&mut self, u: usize, v: usize, r: usize) -> bool {
        if let Some(&w) = self.memo.get(&(u, v, r)) {
            return w;
        }
        let result = self.compute(u, v, r);
        self.memo.insert((u, v, r), result);
        result
    }

    fn compute(&mut self, u: usize, v: usize, r: usize) -> bool {
        if !self.atomic(u, v) {
            return false;
        }
        if r == 0 {
            return true;
        }
        for rel in self.rels.clone() {
            match self.mode {
                GameMode::Ep | GameMode::Full => {
                    for u2 in Self::successors(self.k1, rel, u) {
                        if self.modal_response(u, v, r, rel, Side::Left, u2).is_none() {
                            return false;
                        }
                    }
                    if self.mode == GameMode::Full {
                        for v2 in Self::successors(self.k2, rel, v) {
                            if self.modal_response(u, v, r, rel, Side::Right, v2).is_none() {
                                return false;
                            }
                        }
                    }
                }
                GameMode::Count => {
                    if self.modal_bijection(u, v, r, rel).is_none() {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn modal_response(
        &mut self,
        u: usize,
        v: usize,
        r: usize,
        rel: usize,
        side: Side,
        chosen: usize,
    ) -> Option<usize> {
        let options = match side {
            Side::Left => Self::successors(self.k2, rel, v),
            Side::Right => Self::successors(self.k1, rel, u),
        };
        options.into_iter().find(|&resp| match side {
            Side::Left => self.wins(chosen, resp, r - 1),
            Side::Right => self.wins(resp, chosen, r - 1),
        })
    }

    /// Pairing of R-successors Duplicator commits to in the counting game.
    fn modal_bijection(
        &mut self,
        u: usize,
        v: usize,
        r: usize,
        rel: usize,
    ) -> Option<Vec<(usize, usize)>> {
        let su = Self::successors(self.k1, rel, u);
        let sv = Self::successors(self.k2, rel, v);
        if su.len() != sv.len() {
            return None;
        }
        let choices: Vec<Vec<usize>> = su
            .iter()
            .map(|&u2| {
                (0..sv.len())
                    .filter(|&j| self.wins(u2, sv[j], r - 1))
                    .collect()
            })
            .collect();
        let sdr = least_sdr(&choices, sv.len())?;
        Some(
            su.iter()
                .zip(sdr)
                .map(|(&u2, j)| (u2, sv[j]))
                .collect(),
        )
    }
}

/// Solves the k-round bisimulation game from the two distinguished points.
/// Rounds count transition steps, so the k-round game captures modal
/// formulas of modal depth <= k; the counting variant has Duplicator commit
/// to a successor bijection per relation each round.
pub fn solve_modal_game(
    k1: &Structure,
    k2: &Structure,
    rounds: usize,
    mode: GameMode,
) -> Result<GameResult> {
    check_kripke(k1)?;
    check_kripke(k2)?;
    if k1.vocabulary() != k2.vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    let props = (0..k1.vocabulary().len())
        .filter(|&s| k1.vocabulary().arity(s) == 1)
        .collect();
    let rels = (0..k1.vocabulary().len())
        .filter(|&s| k1.vocabulary().arity(s) == 2)
        .collect();
    let mut solver = ModalSolver {
        k1,
        k2,
        props,
        rels,
        mode,
        memo: HashMap::new(),
    };
    let start = (k1.point().expect("checked"), k2.point().expect("checked"));
    let mut result = GameResult {
        winner: Player::Spoiler,
        mode,
        resource: rounds,
        rounds: Some(rounds),
        strategy: None,
    };
    if !solver.wins(start.0, start.1, rounds) {
        return Ok(result);
    }
    result.winner = Player::Duplicator;
    result.strategy = Some(extract_modal_strategy(&mut solver, start, rounds));
    Ok(result)
}

fn extract_modal_strategy(
    solver: &mut ModalSolver,
    start: (usize, usize),
    rounds: usize,
) -> Strategy {
    let mut visited = std::collections::HashSet::new();
    let mut queue = vec![(start, rounds)];
    let mut responses = Vec::new();
    let mut bijections = Vec::new();
    while let Some(((u, v), r)) = queue.pop() {
        if r == 0 || !visited.insert((u, v, r)) {
            continue;
        }
        match solver.mode {
            GameMode::Ep | GameMode::Full => {
                for rel in solver.rels.clone() {
                    for u2 in ModalSolver::successors(solver.k1, rel, u) {
                        let resp = solver
                            .modal_response(u, v, r, rel, Side::Left, u2)
                            .expect("winning position has responses");
                        responses.push(ModalResponseEntry {
                            position: (u, v),
                            rounds_left: r,
                            side: Side::Left,
                            rel,
                            chosen: u2,
                            response: resp,
                        });
                        queue.push(((u2, resp), r - 1));
                    }
                    if solver.mode == GameMode::Full {
                        for v2 in ModalSolver::successors(solver.k2, rel, v) {
                            let resp = solver
                                .modal_response(u, v, r, rel, Side::Right, v2)
                                .expect("winning position has responses");
                            responses.push(ModalResponseEntry {
                                position: (u, v),
                                rounds_left: r,
                                side: Side::Right,
                                rel,
                                chosen: v2,
                                response: resp,
                            });
                            queue.push(((resp, v2), r - 1));
                        }
                    }
                }
            }
            GameMode::Count => {
                let mut per_rel = Vec::new();
                for rel in solver.rels.clone() {
                    let pairing = solver
                        .modal_bijection(u, v, r, rel)
                        .expect("winning position has bijections");
                    for &(u2, v2) in &pairing {
                        queue.push(((u2, v2), r - 1));
                    }
                    per_rel.push((rel, pairing));
                }
                bijections.push(ModalBijectionEntry {
                    position: (u, v),
                    rounds_left: r,
                    bijections: per_rel,
                });
            }
        }
    }
    match solver.mode {
        GameMode::Count => {
            bijections.sort_by_key(|e| (std::cmp::Reverse(e.rounds_left), e.position));
            Strategy::ModalBijections(bijections)
        }
        _ => {
            responses.sort_by_key(|e| {
                (
                    std::cmp::Reverse(e.rounds_left),
                    e.position,
                    e.side as usize,
                    e.rel,
                    e.chosen,
                )
            });
            Strategy::ModalResponses(responses)
        }
    }
}

// ---------------------------------------------------------------------------
// the abstract game on forest structures
// ---------------------------------------------------------------------------

struct ArborealArena<'a> {
    f1: &'a ForestStructure,
    f2: &'a ForestStructure,
}

impl<'a> ArborealArena<'a> {
    fn index(&self, pos: (Option<usize>, Option<usize>)) -> usize {
        let i = pos.0.map_or(0, |t| t + 1);
        let j = pos.1.map_or(0, |t| t + 1);
        i * (self.f2.size() + 1) + j
    }

    fn total(&self) -> usize {
        (self.f1.size() + 1) * (self.f2.size() + 1)
    }

    fn decode(&self, code: usize) -> (Option<usize>, Option<usize>) {
        let i = code / (self.f2.size() + 1);
        let j = code % (self.f2.size() + 1);
        (i.checked_sub(1), j.checked_sub(1))
    }

    fn extensions(forest: &ForestStructure, top: Option<usize>) -> Vec<usize> {
        match top {
            None => forest.roots(),
            Some(t) => forest.children(t),
        }
    }

    /// Are the two chains isomorphic under the level-preserving bijection?
    fn winning(&self, pos: (Option<usize>, Option<usize>)) -> bool {
        let c1 = match pos.0 {
            None => Vec::new(),
            Some(t) => self.f1.ancestor_chain(t).expect("validated"),
        };
        let c2 = match pos.1 {
            None => Vec::new(),
            Some(t) => self.f2.ancestor_chain(t).expect("validated"),
        };
        if c1.len() != c2.len() {
            return false;
        }
        if self.f1.is_pebbled() {
            for (x, y) in c1.iter().zip(&c2) {
                if self.f1.pebble(*x) != self.f2.pebble(*y) {
                    return false;
                }
            }
        }
        let pos1: HashMap<usize, usize> = c1.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let pos2: HashMap<usize, usize> = c2.iter().enumerate().map(|(i, &y)| (y, i)).collect();
        let vocab = self.f1.base().vocabulary();
        for sym in 0..vocab.len() {
            for row in self.f1.base().table(sym).rows() {
                if let Some(levels) = row
                    .iter()
                    .map(|e| pos1.get(e).copied())
                    .collect::<Option<Vec<_>>>()
                {
                    let image: Vec<usize> = levels.iter().map(|&l| c2[l]).collect();
                    if !self.f2.base().has_tuple(sym, &image) {
                        return false;
                    }
                }
            }
            for row in self.f2.base().table(sym).rows() {
                if let Some(levels) = row
                    .iter()
                    .map(|e| pos2.get(e).copied())
                    .collect::<Option<Vec<_>>>()
                {
                    let preimage: Vec<usize> = levels.iter().map(|&l| c1[l]).collect();
                    if !self.f1.base().has_tuple(sym, &preimage) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Solves the back-and-forth game on two forest structures: positions are
/// pairs of chains-from-root with isomorphic induced substructures, each
/// round extends one side by a cover step and the other must follow, and
/// Duplicator must survive forever (greatest fixpoint).
pub fn solve_arboreal_game(f1: &ForestStructure, f2: &ForestStructure) -> Result<GameResult> {
    for f in [f1, f2] {
        let report = f.validate();
        if !report.is_valid() {
            return Err(Error::precondition(format!(
                "invalid forest structure: {:?}",
                report.violations
            )));
        }
    }
    if f1.base().vocabulary() != f2.base().vocabulary() {
        return Err(Error::precondition("vocabulary mismatch"));
    }
    if f1.is_pebbled() != f2.is_pebbled()
        || (f1.is_pebbled() && f1.pebble_bound() != f2.pebble_bound())
    {
        return Err(Error::precondition(
            "forest structures live in different pebbled categories",
        ));
    }
    let arena = ArborealArena { f1, f2 };
    let mut alive: Vec<bool> = (0..arena.total())
        .map(|code| arena.winning(arena.decode(code)))
        .collect();
    loop {
        let mut changed = false;
        for code in 0..arena.total() {
            if !alive[code] {
                continue;
            }
            let (t1, t2) = arena.decode(code);
            let mut survives = true;
            'left: for x in ArborealArena::extensions(f1, t1) {
                if !ArborealArena::extensions(f2, t2)
                    .into_iter()
                    .any(|y| alive[arena.index((Some(x), Some(y)))])
                {
                    survives = false;
                    break 'left;
                }
            }
            if survives {
                'right: for y in ArborealArena::extensions(f2, t2) {
                    if !ArborealArena::extensions(f1, t1)
                        .into_iter()
                        .any(|x| alive[arena.index((Some(x), Some(y)))])
                    {
                        survives = false;
                        break 'right;
                    }
                }
            }
            if !survives {
                alive[code] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut result = GameResult {
        winner: Player::Spoiler,
        mode: GameMode::Full,
        resource: 0,
        rounds: None,
        strategy: None,
    };
    if !alive[arena.index((None, None))] {
        return Ok(result);
    }
    result.winner = Player::Duplicator;
    let mut entries = Vec::new();
    let mut visited = vec![false; arena.total()];
    let mut queue = vec![arena.index((None, None))];
    while let Some(code) = queue.pop() {
        if visited[code] {
            continue;
        }
        visited[code] = true;
        let (t1, t2) = arena.decode(code);
        for x in ArborealArena::extensions(f1, t1) {
            let y = ArborealArena::extensions(f2, t2)
                .into_iter()
                .find(|&y| alive[arena.index((Some(x), Some(y)))])
                .expect("alive position has responses");
            entries.push(ArborealResponseEntry {
                position: (t1, t2),
                side: Side::Left,
                chosen: x,
                response: y,
            });
            queue.push(arena.index((Some(x), Some(y))));
        }
        for y in ArborealArena::extensions(f2, t2) {
            let x = ArborealArena::extensions(f1, t1)
                .into_iter()
                .find(|&x| alive[arena.index((Some(x), Some(y)))])
                .expect("alive position has responses");
            entries.push(ArborealResponseEntry {
                position: (t1, t2),
                side: Side::Right,
                chosen: y,
                response: x,
            });
            queue.push(arena.index((Some(x), Some(y))));
        }
    }
    entries.sort_by_key(|e| {
        (
            e.position.0.map_or(0, |t| t + 1),
            e.position.1.map_or(0, |t| t + 1),
            e.side as usize,
            e.chosen,
        )
    });
    result.strategy = Some(Strategy::ArborealResponses(entries));
    Ok(result)
}

// ---------------------------------------------------------------------------
// matching
// ---------------------------------------------------------------------------

/// Lexicographically least system of distinct representatives: f[i] is
/// drawn from choices[i] (values below `universe`), all distinct. Entries in
/// each choice list must be ascending for the lexicographic guarantee.
fn least_sdr(choices: &[Vec<usize>], universe: usize) -> Option<Vec<usize>> {
    fn augment(
        choices: &[Vec<usize>],
        row: usize,
        col_row: &mut [Option<usize>],
        seen: &mut [bool],
        taken: &[bool],
    ) -> bool {
        for &y in &choices[row] {
            if taken[y] || seen[y] {
                continue;
            }
            seen[y] = true;
            if col_row[y].is_none() || augment(choices, col_row[y].unwrap(), col_row, seen, taken)
            {
                col_row[y] = Some(row);
                return true;
            }
        }
        false
    }
    // can rows from..n be matched into columns not already taken?
    fn feasible(choices: &[Vec<usize>], universe: usize, taken: &[bool], from: usize) -> bool {
        let mut col_row: Vec<Option<usize>> = vec![None; universe];
        for row in from..choices.len() {
            let mut seen = vec![false; universe];
            if !augment(choices, row, &mut col_row, &mut seen, taken) {
                return false;
            }
        }
        true
    }
    let n = choices.len();
    let mut fixed = Vec::with_capacity(n);
    let mut taken = vec![false; universe];
    for i in 0..n {
        let mut found = false;
        for &y in &choices[i] {
            if taken[y] {
                continue;
            }
            taken[y] = true;
            if feasible(choices, universe, &taken, i + 1) {
                fixed.push(y);
                found = true;
                break;
            }
            taken[y] = false;
        }
        if !found {
            return None;
        }
    }
    Some(fixed)
}
