//! `gc`: batch front end for the game-comonad toolkit. One JSON object per
//! query on stdout (file-producing subcommands emit the forest format
//! directly); exit codes 0 = ok, 2 = parse error, 3 = precondition
//! violation, 4 = internal invariant or audit failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gc_core::ef::build_ef;
use gc_core::error::Error;
use gc_core::forest::ForestStructure;
use gc_core::games::{
    solve_arboreal_game, solve_ef_game, solve_modal_game, solve_pebble_game, GameMode, Player,
    Strategy,
};
use gc_core::homcount::{bounded_td_profile, lovasz_test, LovaszVerdict};
use gc_core::logic::{
    eval_fo, eval_modal, find_separating_modal, find_separating_sentence, fo_to_sexpr,
    modal_to_sexpr, parse_fo_sexpr, parse_modal_sexpr, Fragment, ModalFragment,
};
use gc_core::modal::{graded_equivalence, unravel};
use gc_core::params::{tree_depth, treewidth};
use gc_core::pebble::build_pebble_truncated;
use gc_core::structure::{is_isomorphic, search_homomorphisms, count_homomorphisms};
use gc_core::{ElementMap, Structure};

#[derive(Parser)]
#[command(name = "gc", version, about = "model-comparison games, comonadic covers, and logic oracles on finite structures")]
struct Cli {
    /// Pretty-print JSON output
    #[arg(long, global = true)]
    pretty: bool,
    /// Include wall-clock timing in JSON output (non-deterministic)
    #[arg(long, global = true)]
    timing: bool,
    /// Cap worker parallelism for parallel-capable operations
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Ep,
    Full,
    Count,
}

impl From<ModeArg> for GameMode {
    fn from(m: ModeArg) -> GameMode {
        match m {
            ModeArg::Ep => GameMode::Ep,
            ModeArg::Full => GameMode::Full,
            ModeArg::Count => GameMode::Count,
        }
    }
}

impl From<ModeArg> for Fragment {
    fn from(m: ModeArg) -> Fragment {
        match m {
            ModeArg::Ep => Fragment::Ep,
            ModeArg::Full => Fragment::Full,
            ModeArg::Count => Fragment::Count,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ComonadArg {
    Ef,
    Pebble,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModalEqMode {
    Plain,
    Graded,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and canonicalize a structure or forest file
    Fmt { file: PathBuf },
    /// Decide (or count) homomorphisms A -> B
    Hom {
        #[arg(long)]
        count: bool,
        a: PathBuf,
        b: PathBuf,
    },
    /// Decide isomorphism
    Iso { a: PathBuf, b: PathBuf },
    /// Solve the k-round Ehrenfeucht-Fraisse game
    Ef {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 12)]
        witness_size: usize,
        a: PathBuf,
        b: PathBuf,
    },
    /// Solve the unbounded k-pebble game
    Pebble {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 12)]
        witness_size: usize,
        a: PathBuf,
        b: PathBuf,
    },
    /// Solve the k-round bisimulation game between pointed structures
    Modal {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 8)]
        witness_size: usize,
        a: PathBuf,
        b: PathBuf,
    },
    /// Decide modal equivalence at formula depth k (plain or graded)
    ModalEq {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        mode: ModalEqMode,
        a: PathBuf,
        b: PathBuf,
    },
    /// Solve the abstract back-and-forth game on two forest files
    Arb { f1: PathBuf, f2: PathBuf },
    /// Materialize the EF cover of a structure (forest format on stdout)
    Gk {
        #[arg(long)]
        k: usize,
        a: PathBuf,
    },
    /// Materialize the truncated pebble cover (forest format on stdout)
    Pk {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        a: PathBuf,
    },
    /// Unravel a pointed structure to walks of <= k states
    Unravel {
        #[arg(long)]
        k: usize,
        a: PathBuf,
    },
    /// Least resource index admitting a coalgebra
    CoalgNumber {
        #[arg(long, value_enum)]
        comonad: ComonadArg,
        #[arg(long)]
        max_k: Option<usize>,
        a: PathBuf,
    },
    /// Exact tree-depth of the Gaifman graph (integer on stdout)
    Treedepth { a: PathBuf },
    /// Exact treewidth of the Gaifman graph (integer on stdout)
    Treewidth { a: PathBuf },
    /// Find a homomorphism-count distinguisher among small test structures
    Lovasz {
        #[arg(long)]
        max_size: usize,
        a: PathBuf,
        b: PathBuf,
    },
    /// Homomorphism-count profile over tree-depth-bounded test structures
    Profile {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        max_size: usize,
        a: PathBuf,
    },
    /// Evaluate a sentence (s-expression) on a structure
    Eval {
        #[arg(long)]
        formula: String,
        /// Interpret the formula in Kripke semantics at the point
        #[arg(long)]
        modal: bool,
        a: PathBuf,
    },
    /// Run the full acceptance audit (exit 0 iff every criterion passes)
    Audit {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run only these criteria (repeatable); default all
        #[arg(long = "criterion")]
        criteria: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let started = Instant::now();
    match run(&cli) {
        Ok(Output::Json(mut value)) => {
            if cli.timing {
                if let Value::Object(map) = &mut value {
                    map.insert(
                        "ms".into(),
                        json!(started.elapsed().as_secs_f64() * 1000.0),
                    );
                }
            }
            println!("{}", render(&value, cli.pretty));
            ExitCode::SUCCESS
        }
        Ok(Output::Raw(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Ok(Output::AuditReports(reports)) => {
            let mut all_pass = true;
            for r in &reports {
                all_pass &= r.pass;
                let mut line = json!({
                    "criterion": r.number,
                    "name": r.name,
                    "pass": r.pass,
                    "details": r.details,
                });
                if cli.timing {
                    if let Value::Object(map) = &mut line {
                        map.insert("ms".into(), json!(r.millis));
                        map.insert("limit_ms".into(), json!(r.limit_millis));
                    }
                }
                println!("{}", render(&line, cli.pretty));
            }
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse { .. } => ExitCode::from(2),
                Error::Precondition(_) => ExitCode::from(3),
                Error::Internal(_) => ExitCode::from(4),
            }
        }
    }
}

enum Output {
    Json(Value),
    Raw(String),
    AuditReports(Vec<gc_core::audit::CriterionReport>),
}

fn render(value: &Value, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(value).expect("serializable")
    } else {
        serde_json::to_string(value).expect("serializable")
    }
}

fn read_file(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::parse(0, 0, format!("cannot read {}: {e}", path.display())))
}

fn load_structure(path: &PathBuf) -> Result<Structure, Error> {
    Structure::parse(&read_file(path)?)
}

fn load_forest(path: &PathBuf) -> Result<ForestStructure, Error> {
    ForestStructure::parse(&read_file(path)?)
}

fn run(cli: &Cli) -> Result<Output, Error> {
    match &cli.command {
        Command::Fmt { file } => {
            let forest = load_forest(file)?;
            Ok(Output::Raw(forest.render()))
        }
        Command::Hom { count, a, b } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            if *count {
                let n = count_homomorphisms(&a, &b)?;
                Ok(Output::Json(json!({ "value": n })))
            } else {
                let found = search_homomorphisms(&a, &b, Some(1))?;
                let witness = found.first().map(map_json);
                Ok(Output::Json(json!({
                    "verdict": !found.is_empty(),
                    "witness": witness,
                })))
            }
        }
        Command::Iso { a, b } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            let witness = is_isomorphic(&a, &b)?;
            Ok(Output::Json(json!({
                "verdict": witness.is_some(),
                "witness": witness.map(|f| map_json(&f)),
            })))
        }
        Command::Ef {
            k,
            mode,
            witness_size,
            a,
            b,
        } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            let result = solve_ef_game(&a, &b, *k, (*mode).into())?;
            let witness = match result.winner {
                Player::Duplicator => strategy_json(&a, &b, result.strategy.as_ref()),
                Player::Spoiler => {
                    separating_sentence_json(&a, &b, (*mode).into(), *k, *witness_size)?
                }
            };
            Ok(Output::Json(json!({
                "winner": player_name(result.winner),
                "witness": witness,
            })))
        }
        Command::Pebble {
            k,
            mode,
            witness_size,
            a,
            b,
        } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            let result = solve_pebble_game(&a, &b, *k, (*mode).into())?;
            let witness = match result.winner {
                Player::Duplicator => strategy_json(&a, &b, result.strategy.as_ref()),
                // rank-bounded separators use at most k variables, so they
                // witness k-variable inequivalence when found
                Player::Spoiler => {
                    separating_sentence_json(&a, &b, (*mode).into(), *k, *witness_size)?
                }
            };
            Ok(Output::Json(json!({
                "winner": player_name(result.winner),
                "witness": witness,
            })))
        }
        Command::Modal {
            k,
            mode,
            witness_size,
            a,
            b,
        } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            let result = solve_modal_game(&a, &b, *k, (*mode).into())?;
            let witness = match result.winner {
                Player::Duplicator => strategy_json(&a, &b, result.strategy.as_ref()),
                Player::Spoiler => {
                    let fragment = match mode {
                        ModeArg::Ep => ModalFragment::Ep,
                        ModeArg::Full => ModalFragment::Plain,
                        ModeArg::Count => ModalFragment::Graded,
                    };
                    find_separating_modal(&a, &b, fragment, *k, *witness_size, 4, WITNESS_BUDGET)?.map(
                        |(formula, in_left)| {
                            json!({
                                "formula": modal_to_sexpr(&formula),
                                "holds_in": if in_left { "left" } else { "right" },
                            })
                        },
                    )
                }
            };
            Ok(Output::Json(json!({
                "winner": player_name(result.winner),
                "witness": witness,
            })))
        }
        Command::ModalEq { k, mode, a, b } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            let verdict = match mode {
                // formula depth k = k transition rounds = k+1 walk states
                ModalEqMode::Plain => {
                    solve_modal_game(&a, &b, *k, GameMode::Full)?.winner == Player::Duplicator
                }
                ModalEqMode::Graded => graded_equivalence(&a, &b, k + 1)?,
            };
            Ok(Output::Json(json!({ "verdict": verdict })))
        }
        Command::Arb { f1, f2 } => {
            let f1 = load_forest(f1)?;
            let f2 = load_forest(f2)?;
            let result = solve_arboreal_game(&f1, &f2)?;
            let witness = match result.winner {
                Player::Duplicator => {
                    strategy_json(f1.base(), f2.base(), result.strategy.as_ref())
                }
                Player::Spoiler => None,
            };
            Ok(Output::Json(json!({
                "winner": player_name(result.winner),
                "witness": witness,
            })))
        }
        Command::Gk { k, a } => {
            let a = load_structure(a)?;
            let cover = build_ef(&a, *k)?;
            Ok(Output::Raw(cover.forest().render()))
        }
        Command::Pk { k, n, a } => {
            let a = load_structure(a)?;
            let cover = build_pebble_truncated(&a, *k, *n)?;
            Ok(Output::Raw(cover.forest().render()))
        }
        Command::Unravel { k, a } => {
            let a = load_structure(a)?;
            let u = unravel(&a, *k)?;
            Ok(Output::Raw(u.forest().render()))
        }
        Command::CoalgNumber { comonad, max_k, a } => {
            let a = load_structure(a)?;
            let bound = max_k.unwrap_or_else(|| a.size().max(1));
            let value = match comonad {
                ComonadArg::Ef => gc_core::ef::ef_coalgebra_number(&a, bound)?,
                ComonadArg::Pebble => gc_core::pebble::pebble_coalgebra_number(&a, bound)?,
            };
            Ok(Output::Json(match value {
                Some(k) => json!({ "value": k }),
                None => json!({ "value": null, "exceeds": bound }),
            }))
        }
        Command::Treedepth { a } => {
            let a = load_structure(a)?;
            Ok(Output::Raw(format!("{}\n", tree_depth(&a)?)))
        }
        Command::Treewidth { a } => {
            let a = load_structure(a)?;
            Ok(Output::Raw(format!("{}\n", treewidth(&a)?)))
        }
        Command::Lovasz { max_size, a, b } => {
            let a = load_structure(a)?;
            let b = load_structure(b)?;
            Ok(Output::Json(match lovasz_test(&a, &b, *max_size)? {
                LovaszVerdict::Indistinguishable => json!({ "verdict": "indistinguishable" }),
                LovaszVerdict::Distinguished { witness, counts } => json!({
                    "verdict": "distinguished",
                    "witness": {
                        "structure": witness.render(),
                        "counts": [counts.0, counts.1],
                    },
                }),
            }))
        }
        Command::Profile { k, max_size, a } => {
            let a = load_structure(a)?;
            let profile = bounded_td_profile(&a, *k, *max_size)?;
            let entries: Vec<Value> = profile
                .entries
                .iter()
                .map(|(c, n)| json!({ "structure": c.render(), "count": n }))
                .collect();
            Ok(Output::Json(json!({ "profile": entries })))
        }
        Command::Eval { formula, modal, a } => {
            let a = load_structure(a)?;
            let verdict = if *modal {
                eval_modal(&parse_modal_sexpr(formula)?, &a)?
            } else {
                eval_fo(&parse_fo_sexpr(formula)?, &a, &Default::default())?
            };
            Ok(Output::Json(json!({ "verdict": verdict })))
        }
        Command::Audit { seed, criteria } => {
            let selected: Vec<usize> = if criteria.is_empty() {
                (1..=gc_core::audit::CRITERION_COUNT).collect()
            } else {
                criteria.clone()
            };
            for &n in &selected {
                if n == 0 || n > gc_core::audit::CRITERION_COUNT {
                    return Err(Error::precondition(format!(
                        "criteria are numbered 1..={}",
                        gc_core::audit::CRITERION_COUNT
                    )));
                }
            }
            let reports = selected
                .into_iter()
                .map(|n| gc_core::audit::run_criterion(n, *seed))
                .collect();
            Ok(Output::AuditReports(reports))
        }
    }
}

fn player_name(p: Player) -> &'static str {
    match p {
        Player::Spoiler => "Spoiler",
        Player::Duplicator => "Duplicator",
    }
}

fn map_json(f: &ElementMap) -> Value {
    let entries: serde_json::Map<String, Value> = f
        .pairs
        .iter()
        .map(|&(x, y)| {
            (
                f.source.element_name(x).to_string(),
                json!(f.target.element_name(y)),
            )
        })
        .collect();
    json!({ "map": entries })
}

const WITNESS_BUDGET: usize = 200_000;

fn separating_sentence_json(
    a: &Structure,
    b: &Structure,
    fragment: Fragment,
    rank: usize,
    size: usize,
) -> Result<Option<Value>, Error> {
    let cap = a.size().max(b.size()) + 1;
    Ok(
        find_separating_sentence(a, b, fragment, rank, size, cap, WITNESS_BUDGET)?.map(|(formula, in_left)| {
            json!({
                "formula": fo_to_sexpr(&formula),
                "holds_in": if in_left { "left" } else { "right" },
            })
        }),
    )
}

fn side_name(side: gc_core::games::Side) -> &'static str {
    match side {
        gc_core::games::Side::Left => "left",
        gc_core::games::Side::Right => "right",
    }
}

fn strategy_json(a: &Structure, b: &Structure, strategy: Option<&Strategy>) -> Option<Value> {
    let name_a = |x: usize| a.element_name(x).to_string();
    let name_b = |y: usize| b.element_name(y).to_string();
    let pair_list = |pos: &[(usize, usize)]| -> Value {
        Value::Array(
            pos.iter()
                .map(|&(x, y)| json!([name_a(x), name_b(y)]))
                .collect(),
        )
    };
    let strategy = strategy?;
    let entries: Vec<Value> = match strategy {
        Strategy::EfResponses(entries) => entries
            .iter()
            .map(|e| {
                let (chosen, response) = match e.side {
                    gc_core::games::Side::Left => (name_a(e.chosen), name_b(e.response)),
                    gc_core::games::Side::Right => (name_b(e.chosen), name_a(e.response)),
                };
                json!({
                    "position": pair_list(&e.position),
                    "rounds_left": e.rounds_left,
                    "side": side_name(e.side),
                    "move": chosen,
                    "response": response,
                })
            })
            .collect(),
        Strategy::EfBijections(entries) => entries
            .iter()
            .map(|e| {
                let bijection: serde_json::Map<String, Value> = e
                    .bijection
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (name_a(x), json!(name_b(y))))
                    .collect();
                json!({
                    "position": pair_list(&e.position),
                    "rounds_left": e.rounds_left,
                    "bijection": bijection,
                })
            })
            .collect(),
        Strategy::PebbleResponses(entries) => entries
            .iter()
            .map(|e| {
                let position: Vec<Value> = e
                    .position
                    .iter()
                    .map(|&(p, x, y)| json!([p, name_a(x), name_b(y)]))
                    .collect();
                let (chosen, response) = match e.side {
                    gc_core::games::Side::Left => (name_a(e.chosen), name_b(e.response)),
                    gc_core::games::Side::Right => (name_b(e.chosen), name_a(e.response)),
                };
                json!({
                    "position": position,
                    "pebble": e.pebble,
                    "side": side_name(e.side),
                    "move": chosen,
                    "response": response,
                })
            })
            .collect(),
        Strategy::PebbleBijections(entries) => entries
            .iter()
            .map(|e| {
                let position: Vec<Value> = e
                    .position
                    .iter()
                    .map(|&(p, x, y)| json!([p, name_a(x), name_b(y)]))
                    .collect();
                let bijection: serde_json::Map<String, Value> = e
                    .bijection
                    .iter()
                    .enumerate()
                    .map(|(x, &y)| (name_a(x), json!(name_b(y))))
                    .collect();
                json!({
                    "position": position,
                    "pebble": e.pebble,
                    "bijection": bijection,
                })
            })
            .collect(),
        Strategy::ModalResponses(entries) => entries
            .iter()
            .map(|e| {
                let (chosen, response) = match e.side {
                    gc_core::games::Side::Left => (name_a(e.chosen), name_b(e.response)),
                    gc_core::games::Side::Right => (name_b(e.chosen), name_a(e.response)),
                };
                json!({
                    "position": [name_a(e.position.0), name_b(e.position.1)],
                    "rounds_left": e.rounds_left,
                    "side": side_name(e.side),
                    "relation": a.vocabulary().name(e.rel),
                    "move": chosen,
                    "response": response,
                })
            })
            .collect(),
        Strategy::ModalBijections(entries) => entries
            .iter()
            .map(|e| {
                let bijections: Vec<Value> = e
                    .bijections
                    .iter()
                    .map(|(rel, pairs)| {
                        let pairing: Vec<Value> = pairs
                            .iter()
                            .map(|&(u, v)| json!([name_a(u), name_b(v)]))
                            .collect();
                        json!({
                            "relation": a.vocabulary().name(*rel),
                            "pairing": pairing,
                        })
                    })
                    .collect();
                json!({
                    "position": [name_a(e.position.0), name_b(e.position.1)],
                    "rounds_left": e.rounds_left,
                    "bijections": bijections,
                })
            })
            .collect(),
        Strategy::ArborealResponses(entries) => entries
            .iter()
            .map(|e| {
                let (chosen, response) = match e.side {
                    gc_core::games::Side::Left => (name_a(e.chosen), name_b(e.response)),
                    gc_core::games::Side::Right => (name_b(e.chosen), name_a(e.response)),
                };
                json!({
                    "position": [
                        e.position.0.map(&name_a),
                        e.position.1.map(&name_b),
                    ],
                    "side": side_name(e.side),
                    "move": chosen,
                    "response": response,
                })
            })
            .collect(),
    };
    Some(json!({ "strategy": entries }))
}
