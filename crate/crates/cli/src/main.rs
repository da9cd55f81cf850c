use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use constrained_markov::equality::{self, classify, equality_marginals, EqualitySet};
use constrained_markov::grammar::{
    check_ambiguity_bounded, check_weak_ambiguity_bounded, cyk_member, to_cnf, Cfg, CnfGrammar, SYMBOL_ORDER,
};
use constrained_markov::inside::{
    build_chart, partition_unambiguous, positional_marginals, sample_word_unambiguous, ChartOptions,
};
use constrained_markov::oracle::{oracle_distribution, oracle_marginals, oracle_partition};
use constrained_markov::reductions::{
    build_falsifying_nfa, count_sat_with_guard, unwrap_csp, verify_reduction, BinaryCsp, TwoSatFormula, SUBSET_GUARD,
};
use constrained_markov::weak::{
    build_weak_chart, check_cut_linkage_bounded, partition_weak, positional_marginals_weak, sample_word_weak,
};
use constrained_markov::{Error, MarkovModel};

#[derive(Parser)]
#[command(name = "cmseq", about = "Exact inference and sampling for Markov sequences under hard constraints")]
struct Cli {
    /// Suppress log lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for chart construction.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Write the JSON result to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability mass of the constrained set.
    Partition(Target),
    /// Exact samples from the constrained distribution.
    Sample {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-position conditional marginals.
    Marginal {
        #[command(flatten)]
        target: Target,
        /// Only this position (1-based).
        #[arg(long)]
        t: Option<usize>,
    },
    /// Topology class of an equality set.
    Classify {
        #[arg(long)]
        equalities: PathBuf,
    },
    /// Bounded ambiguity, weak-ambiguity and cut-linkage screens.
    CheckGrammar {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, default_value_t = 8)]
        bound: usize,
    },
    /// Falsifying NFA of a 2SAT formula and the exact model count.
    #[command(name = "reduce-2sat")]
    Reduce2Sat {
        #[arg(long)]
        formula: PathBuf,
        /// Include the Graphviz rendering of the NFA.
        #[arg(long)]
        dot: bool,
        /// Cap on determinized subsets per layer.
        #[arg(long, default_value_t = SUBSET_GUARD)]
        guard: usize,
    },
    /// Eulerian unwrap of a binary CSP with its verification report.
    ReduceCsp {
        #[arg(long)]
        csp: PathBuf,
    },
    /// Brute-force answers for any of the above.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Unambiguous,
    Weak,
}

#[derive(Args)]
#[command(group(ArgGroup::new("constraint").required(true).args(["grammar", "equalities"])))]
struct Target {
    /// Markov model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Grammar, as rule text or JSON.
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Equality set JSON.
    #[arg(long)]
    equalities: Option<PathBuf>,
    /// Sequence length (defaults to the equality set's length).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Unambiguous)]
    mode: Mode,
    /// Ambiguity screen bound before building a chart (0 disables).
    #[arg(long, default_value_t = 6)]
    bound: usize,
}

#[derive(Args)]
#[command(group(ArgGroup::new("problem").required(true).args(["grammar", "equalities", "formula", "csp"])))]
struct OracleArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    grammar: Option<PathBuf>,
    #[arg(long, requires = "model")]
    equalities: Option<PathBuf>,
    #[arg(long)]
    formula: Option<PathBuf>,
    #[arg(long)]
    csp: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
}

enum CliError {
    Core(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "io",
        }
    }

    fn detail(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io(msg) => msg.clone(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_grammar(path: &Path) -> CliResult<CnfGrammar> {
    let text = read(path)?;
    let cfg = if text.trim_start().starts_with('{') { Cfg::from_json(&text)? } else { Cfg::parse(&text)? };
    Ok(to_cnf(&cfg)?)
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn count_json(c: &BigUint) -> Value {
    match u64::try_from(c) {
        Ok(v) => json!(v),
        Err(_) => json!(c.to_string()),
    }
}

enum Constraint {
    Grammar(CnfGrammar),
    Equalities(EqualitySet),
}

struct Problem {
    model: MarkovModel,
    constraint: Constraint,
    n: usize,
}

impl Problem {
    fn load(model: &Path, grammar: Option<&Path>, equalities: Option<&Path>, n: Option<usize>) -> CliResult<Self> {
        let model = MarkovModel::from_json(&read(model)?)?;
        if let Some(path) = grammar {
            let g = load_grammar(path)?.align_to(model.alphabet())?;
            let n = n.unwrap_or_else(|| usage_error("--n is required with --grammar"));
            return Ok(Problem { model, constraint: Constraint::Grammar(g), n });
        }
        let path = equalities.expect("clap enforces one constraint source");
        let eqs = EqualitySet::from_json(&read(path)?, model.alphabet())?;
        if let Some(n) = n {
            if n != eqs.n() {
                return Err(Error::Domain(format!("--n {n} differs from the equality set length {}", eqs.n())).into());
            }
        }
        let n = eqs.n();
        Ok(Problem { model, constraint: Constraint::Equalities(eqs), n })
    }

    fn from_target(t: &Target) -> CliResult<Self> {
        Problem::load(&t.model, t.grammar.as_deref(), t.equalities.as_deref(), t.n)
    }

    fn header(&self, mode: Mode) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("n".into(), json!(self.n));
        m.insert("alphabet".into(), json!(self.model.alphabet().symbols()));
        match &self.constraint {
            Constraint::Grammar(_) => {
                let name = if mode == Mode::Weak { "weak" } else { "unambiguous" };
                m.insert("mode".into(), json!(name));
                m.insert("symbol_order".into(), json!(SYMBOL_ORDER));
            }
            Constraint::Equalities(eqs) => {
                m.insert("topology".into(), json!(classify(eqs).to_string()));
            }
        }
        m
    }
}

struct Logger {
    quiet: bool,
}

impl Logger {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("cmseq: {}", msg.as_ref());
        }
    }
}

fn chart_options(bound: usize, threads: usize) -> ChartOptions {
    ChartOptions { ambiguity_bound: bound, threads: threads.max(1) }
}

fn partition(t: &Target, threads: usize, log: &Logger) -> CliResult<Value> {
    let p = Problem::from_target(t)?;
    let mut out = p.header(t.mode);
    match &p.constraint {
        Constraint::Equalities(eqs) => {
            out.insert("partition".into(), json!(equality::partition(&p.model, eqs)?));
        }
        Constraint::Grammar(g) => {
            let opts = chart_options(t.bound, threads);
            let (z, warnings) = if t.mode == Mode::Weak {
                let table = build_weak_chart(&p.model, g, p.n, opts)?;
                out.insert("corrections_applied".into(), json!(table.corrections_applied()));
                (partition_weak(&table, g), table.warnings().to_vec())
            } else {
                let chart = build_chart(&p.model, g, p.n, opts)?;
                (partition_unambiguous(&chart, g), chart.warnings().to_vec())
            };
            for w in &warnings {
                log.info(format!("warning: {w}"));
            }
            out.insert("partition".into(), json!(z));
            out.insert("warnings".into(), json!(warnings));
        }
    }
    Ok(Value::Object(out))
}

fn sample(t: &Target, count: usize, seed: u64, threads: usize, log: &Logger) -> CliResult<Value> {
    let p = Problem::from_target(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = p.header(t.mode);
    let mut words = Vec::with_capacity(count);
    match &p.constraint {
        Constraint::Equalities(eqs) => {
            for _ in 0..count {
                words.push(equality::sample_equality_constrained(&p.model, eqs, &mut rng)?);
            }
        }
        Constraint::Grammar(g) => {
            let opts = chart_options(t.bound, threads);
            let warnings = if t.mode == Mode::Weak {
                let table = build_weak_chart(&p.model, g, p.n, opts)?;
                for _ in 0..count {
                    words.push(sample_word_weak(&table, &p.model, g, &mut rng)?);
                }
                out.insert("corrections_applied".into(), json!(table.corrections_applied()));
                table.warnings().to_vec()
            } else {
                let chart = build_chart(&p.model, g, p.n, opts)?;
                for _ in 0..count {
                    words.push(sample_word_unambiguous(&chart, &p.model, g, &mut rng)?);
                }
                chart.warnings().to_vec()
            };
            for w in &warnings {
                log.info(format!("warning: {w}"));
            }
            out.insert("warnings".into(), json!(warnings));
        }
    }
    log.info(format!("drew {count} samples with seed {seed}"));
    let alphabet = p.model.alphabet();
    let decoded: Vec<Vec<String>> = words.iter().map(|w| alphabet.decode(w)).collect();
    out.insert("seed".into(), json!(seed));
    out.insert("count".into(), json!(count));
    out.insert("samples".into(), json!(decoded));
    Ok(Value::Object(out))
}

fn marginal(t: &Target, pos: Option<usize>, threads: usize) -> CliResult<Value> {
    let p = Problem::from_target(t)?;
    let mut out = p.header(t.mode);
    let rows = match &p.constraint {
        Constraint::Equalities(eqs) => equality_marginals(&p.model, eqs)?,
        Constraint::Grammar(g) => {
            let opts = chart_options(t.bound, threads);
            if t.mode == Mode::Weak {
                positional_marginals_weak(&p.model, g, p.n, opts)?
            } else {
                let chart = build_chart(&p.model, g, p.n, opts)?;
                out.insert("warnings".into(), json!(chart.warnings()));
                positional_marginals(&chart, &p.model, g)?
            }
        }
    };
    match pos {
        Some(pos) if pos == 0 || pos > p.n => {
            return Err(Error::Domain(format!("position {pos} outside 1..={}", p.n)).into());
        }
        Some(pos) => {
            out.insert("t".into(), json!(pos));
            out.insert("marginal".into(), json!(rows[pos - 1]));
        }
        None => {
            out.insert("marginals".into(), json!(rows));
        }
    }
    Ok(Value::Object(out))
}

fn check_grammar(path: &Path, bound: usize) -> CliResult<Value> {
    let g = load_grammar(path)?;
    let names = g.nonterminals();
    let letters = g.terminals();
    let ambiguity = check_ambiguity_bounded(&g, bound)?;
    let weak = check_weak_ambiguity_bounded(&g, bound)?;
    let conflict = check_cut_linkage_bounded(&g, bound)?;
    let recommended = if ambiguity.is_none() {
        "unambiguous"
    } else if weak.is_none() && conflict.is_none() {
        "weak"
    } else {
        "none"
    };
    Ok(json!({
        "bound": bound,
        "start": names[g.start()],
        "nonterminals": names,
        "terminals": letters.symbols(),
        "cnf": g.to_text(),
        "symbol_order": SYMBOL_ORDER,
        "ambiguity_witness": ambiguity.map(|w| letters.decode(&w)),
        "weak_violation": weak.map(|v| json!({
            "first": names[v.first],
            "second": names[v.second],
            "word": letters.decode(&v.word),
        })),
        "cut_conflict": conflict.map(|c| json!({
            "symbol": names[c.symbol],
            "word": letters.decode(&c.word),
            "first_cut": c.first_cut,
            "second_cut": c.second_cut,
        })),
        "recommended_mode": recommended,
    }))
}

fn reduce_2sat(path: &Path, dot: bool, guard: usize) -> CliResult<Value> {
    let phi = TwoSatFormula::parse_dimacs(&read(path)?)?;
    let nfa = build_falsifying_nfa(&phi);
    let n = phi.num_vars();
    let accepted = nfa.count_accepted_with_guard(n, guard)?;
    let sat = count_sat_with_guard(&phi, guard)?;
    let mut out = json!({
        "variables": n,
        "clauses": phi.clauses().len(),
        "states": nfa.num_states,
        "transitions": nfa.transitions.len(),
        "accepted_n": count_json(&accepted),
        "sat_count": count_json(&sat),
        "nfa": nfa,
    });
    if dot {
        out["dot"] = json!(nfa.to_dot());
    }
    Ok(out)
}

fn reduce_csp(path: &Path) -> CliResult<Value> {
    let csp = BinaryCsp::from_json(&read(path)?)?;
    let unwrapped = unwrap_csp(&csp)?;
    let report = verify_reduction(&csp)?;
    Ok(json!({
        "variables": csp.variables(),
        "edges": csp.edges().len(),
        "unwrap": unwrapped.to_json(),
        "report": report,
    }))
}

type Predicate<'a> = Box<dyn Fn(&[usize]) -> bool + 'a>;

fn oracle(a: &OracleArgs) -> CliResult<Value> {
    if let Some(path) = &a.formula {
        let phi = TwoSatFormula::parse_dimacs(&read(path)?)?;
        return Ok(json!({ "variables": phi.num_vars(), "sat_count": phi.brute_force_count()? }));
    }
    if let Some(path) = &a.csp {
        let csp = BinaryCsp::from_json(&read(path)?)?;
        return Ok(json!({ "variables": csp.variables(), "count": csp.brute_force_count()? }));
    }
    let model = a.model.as_deref().expect("clap requires --model");
    let p = Problem::load(model, a.grammar.as_deref(), a.equalities.as_deref(), a.n)?;
    let pred: Predicate = match &p.constraint {
        Constraint::Grammar(g) => Box::new(move |w: &[usize]| cyk_member(g, w).is_ok_and(|c| c.accepts())),
        Constraint::Equalities(eqs) => Box::new(move |w: &[usize]| eqs.is_satisfied(w)),
    };
    let z = oracle_partition(&p.model, p.n, &pred)?;
    let (marginals, support) = if z > 0.0 {
        let m = oracle_marginals(&p.model, p.n, &pred)?;
        (json!(m), oracle_distribution(&p.model, p.n, &pred)?.len())
    } else {
        (Value::Null, 0)
    };
    let mut out = p.header(Mode::Unambiguous);
    out.remove("mode");
    out.insert("partition".into(), json!(z));
    out.insert("marginals".into(), marginals);
    out.insert("support".into(), json!(support));
    Ok(Value::Object(out))
}

fn run(cli: &Cli, log: &Logger) -> CliResult<Value> {
    match &cli.command {
        Command::Partition(t) => partition(t, cli.threads, log),
        Command::Sample { target, count, seed } => sample(target, *count, *seed, cli.threads, log),
        Command::Marginal { target, t } => marginal(target, *t, cli.threads),
        Command::Classify { equalities } => {
            let eqs = EqualitySet::structure_from_json(&read(equalities)?)?;
            Ok(json!({
                "topology": classify(&eqs).to_string(),
                "n": eqs.n(),
                "constraints": eqs.constraints().len(),
            }))
        }
        Command::CheckGrammar { grammar, bound } => check_grammar(grammar, *bound),
        Command::Reduce2Sat { formula, dot, guard } => reduce_2sat(formula, *dot, *guard),
        Command::ReduceCsp { csp } => reduce_csp(csp),
        Command::Oracle(a) => oracle(a),
    }
}

fn emit(value: &Value, output: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let version = format!("{} (symbol order {SYMBOL_ORDER})", env!("CARGO_PKG_VERSION"));
    let matches = Cli::command().version(version).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let log = Logger { quiet: cli.quiet };
    let result = run(&cli, &log).and_then(|v| emit(&v, cli.output.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log.info(format!("error: {}", e.detail()));
            let payload = json!({ "error": e.code(), "detail": e.detail() });
            println!("{}", serde_json::to_string_pretty(&payload).expect("JSON values always serialize"));
            ExitCode::from(1)
        }
    }
}
