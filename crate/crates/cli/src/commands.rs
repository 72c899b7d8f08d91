use std::fmt::Display;
use std::fs;
use std::path::Path;

use seqcover::abp_model::abp_model;
use seqcover::coverage::{coverage_ratio, CoverageTable, TestSuite};
use seqcover::criteria::CriterionSpec;
use seqcover::evolve::{best_of_k_indices, evolve_indices, random_indices, GaParams};
use seqcover::experiments::{catch_table, rank_table, rows_to_csv, CatchRow, Method, RankRow};
use seqcover::model::generate_pool;
use seqcover::risk::{max_variance_series, Convention, Observation, RiskState};
use seqcover::sut::{reference_bugs, BugSpec};
use seqcover::{experiments, risk, tictactoe, CriterionFamily, TestModel, TestPool};
use serde_json::{json, Value};

use crate::output::{emit, write_atomic};
use crate::{
    BayesArgs, Cli, Command, ExperimentArgs, ExperimentKind, Format, GaArgs, GenerateArgs,
    MethodArg,
};

pub enum Failure {
    /// Bad arguments, unreadable or invalid inputs.
    Usage(String),
    /// An experiment ran but an expected ordering did not hold.
    Check(String),
}

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Pool { walks, max_len } => pool(cli, *walks, *max_len),
        Command::Generate(args) => generate(cli, args),
        Command::Cover { suite, len_cap } => cover(cli, suite, *len_cap),
        Command::Bayes(args) => bayes(cli, args),
        Command::Experiment(args) => experiment(cli, args),
        Command::TttCount { board } => ttt_count(cli, *board),
    }
}

fn load_model(cli: &Cli) -> Result<TestModel> {
    match &cli.model {
        None => Ok(abp_model()),
        Some(path) => Ok(TestModel::load(&read(path)?)?),
    }
}

fn load_family(cli: &Cli, model: &TestModel) -> Result<CriterionFamily> {
    let spec = match &cli.criteria {
        None => CriterionSpec::KuhnHigdon { t: 2 },
        Some(path) => CriterionSpec::parse(&read(path)?)?,
    };
    Ok(spec.build(model.alphabet())?)
}

fn load_pool(path: &Path, model: &TestModel) -> Result<TestPool> {
    Ok(TestPool::parse(&read(path)?, model.alphabet())?)
}

fn load_bugs(paths: &[std::path::PathBuf]) -> Result<Vec<BugSpec>> {
    if paths.is_empty() {
        return Ok(reference_bugs());
    }
    paths
        .iter()
        .map(|p| Ok(BugSpec::parse(&read(p)?)?))
        .collect()
}

fn ga_params(n: usize, seed: u64, args: &GaArgs) -> GaParams {
    let mut p = GaParams::new(n, seed);
    if let Some(v) = args.population_size {
        p.population_size = v;
    }
    if let Some(v) = args.mutation_prob {
        p.mutation_prob = v;
    }
    if let Some(v) = args.crossover_prob {
        p.crossover_prob = v;
    }
    if let Some(v) = args.tournament_k {
        p.tournament_k = v;
    }
    if let Some(v) = args.max_generations {
        p.max_generations = v;
    }
    if let Some(v) = args.epsilon {
        p.epsilon = v;
    }
    if let Some(v) = args.window {
        p.window = v;
    }
    if let Some(v) = args.elitism {
        p.elitism = v;
    }
    p
}

fn with_seed(value: Value, seed: u64) -> String {
    let mut obj = json!({ "seed": seed });
    if let (Value::Object(target), Value::Object(source)) = (&mut obj, value) {
        target.extend(source);
    }
    serde_json::to_string_pretty(&obj).expect("json output") + "\n"
}

fn pool(cli: &Cli, walks: usize, max_len: usize) -> Result<()> {
    let model = load_model(cli)?;
    let pool = generate_pool(&model, walks, max_len, cli.seed)?;
    let s = pool.stats();
    eprintln!(
        "pool: {} distinct tests from {} walks ({} duplicates, {} retries, {} failed), seed {}",
        pool.len(),
        s.walks,
        s.duplicates_discarded,
        s.retries,
        s.failed_walks,
        s.seed
    );
    emit(cli.out.as_deref(), &pool.to_text(model.alphabet()))?;
    Ok(())
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let model = load_model(cli)?;
    let family = load_family(cli, &model)?;
    let pool = load_pool(&args.pool, &model)?;
    if args.n == 0 {
        return usage("suite size must be at least 1");
    }
    if args.n > pool.len() {
        return usage(format!(
            "suite size {} exceeds pool size {}",
            args.n,
            pool.len()
        ));
    }
    if args.log.is_some() && args.method != MethodArg::Ga {
        return usage("--log is only produced by the ga method");
    }
    let table = CoverageTable::build(&family, &pool);
    let fitness = |s: &[usize]| table.rank(s) as f64;
    let (suite, label) = match args.method {
        MethodArg::Random => (
            random_indices(pool.len(), args.n, cli.seed)?,
            "random".to_string(),
        ),
        MethodArg::BestOfK => {
            if args.k == 0 {
                return usage("k must be at least 1");
            }
            (
                best_of_k_indices(pool.len(), args.n, args.k, cli.seed, fitness)?,
                format!("best-of-{}", args.k),
            )
        }
        MethodArg::Ga => {
            let params = ga_params(args.n, cli.seed, &args.ga);
            let (ind, log) = evolve_indices(pool.len(), &params, fitness)?;
            if let Some(path) = &args.log {
                write_atomic(path, &log.to_csv())?;
            }
            eprintln!(
                "ga: {} generations, {:?}",
                log.generations.len(),
                log.termination
            );
            (ind, "ga".to_string())
        }
    };
    let rank = table.rank(&suite);
    eprintln!(
        "{label}: n={} rank={rank}/{} ({})",
        args.n,
        family.len(),
        family.id()
    );
    let mut text = format!(
        "# method={label} n={} rank={rank} criteria={} seed={}\n",
        args.n,
        family.id(),
        cli.seed
    );
    for &i in &suite {
        text.push_str(&pool.cases()[i].to_line(model.alphabet()));
        text.push('\n');
    }
    emit(cli.out.as_deref(), &text)?;
    Ok(())
}

fn cover(cli: &Cli, suite: &Path, len_cap: Option<usize>) -> Result<()> {
    let model = load_model(cli)?;
    let family = load_family(cli, &model)?;
    let tests = load_pool(suite, &model)?;
    let suite = TestSuite::new(tests.cases().to_vec());
    let report = coverage_ratio(&family, &suite, &model, len_cap)?;
    eprintln!(
        "coverage {}/{} feasible of {} indices (ratio {:.6}){}",
        report.covered,
        report.feasible,
        report.total,
        report.ratio,
        if report.capped { ", capped" } else { "" }
    );
    let text = match cli.format {
        Format::Json => with_seed(serde_json::to_value(&report)?, cli.seed),
        Format::Csv => report.to_csv(),
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(())
}

fn bayes(cli: &Cli, args: &BayesArgs) -> Result<()> {
    let model = load_model(cli)?;
    let family = load_family(cli, &model)?;
    let convention = if args.alpha_counts_bugs {
        Convention::AlphaCountsBugs
    } else {
        Convention::AlphaCountsPasses
    };
    let history: Vec<Observation> = match &args.history {
        Some(path) => risk::history_from_csv(&read(path)?)?,
        None => {
            if args.tests == 0 {
                return usage("--tests must be at least 1");
            }
            let bugs = if args.no_bugs {
                Vec::new()
            } else {
                load_bugs(&args.bugs)?
            };
            experiments::simulate_history(
                &model,
                &family,
                &bugs,
                args.tests,
                args.max_len,
                cli.seed,
            )?
        }
    };
    if let Some(path) = &args.save_history {
        write_atomic(path, &risk::history_to_csv(&history))?;
    }
    let series = max_variance_series(family.len(), &history, args.min_coverage, convention)?;
    let mut state = RiskState::new(family.len(), convention);
    for obs in &history {
        state.observe(&obs.hits, obs.passed)?;
    }
    let tracked = (0..family.len())
        .filter(|&i| state.hits(i) >= args.min_coverage)
        .count();
    let failed = history.iter().filter(|o| !o.passed).count();
    eprintln!(
        "bayes: {} tests, {failed} failed, {tracked} of {} indices tracked, final max variance {}",
        history.len(),
        family.len(),
        series
            .last()
            .map_or("n/a".to_string(), |v| format!("{v:.3e}"))
    );
    if let Some(path) = &args.snapshot {
        let labels: Vec<String> = (0..family.len()).map(|i| family.label(i)).collect();
        write_atomic(path, &(state.snapshot_json(&labels) + "\n"))?;
    }
    let text = match cli.format {
        Format::Json => with_seed(
            json!({
                "tests": history.len(),
                "failed": failed,
                "min_coverage": args.min_coverage,
                "tracked": tracked,
                "series": series,
            }),
            cli.seed,
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["step", "max_variance"])?;
            for (i, v) in series.iter().enumerate() {
                w.write_record([(i + 1).to_string(), v.to_string()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| e.to_string())?)?
        }
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(())
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> Result<()> {
    if args.reps == 0 {
        return usage("--reps must be at least 1");
    }
    if args.sizes.is_empty() || args.sizes.contains(&0) {
        return usage("--sizes must list positive suite sizes");
    }
    let model = load_model(cli)?;
    let pool = match &args.pool {
        Some(path) => load_pool(path, &model)?,
        None => generate_pool(&model, args.walks, args.max_len, cli.seed)?,
    };
    eprintln!(
        "experiment: pool of {} tests, seed {}",
        pool.len(),
        cli.seed
    );
    let ga = ga_params(0, cli.seed, &args.ga);
    let (text, violations) = match args.kind {
        ExperimentKind::Catch => {
            let bugs = load_bugs(&args.bugs)?;
            let mut rows = Vec::new();
            for &n in &args.sizes {
                rows.extend(catch_table(
                    &pool,
                    model.alphabet(),
                    &bugs,
                    &ga,
                    n,
                    args.reps,
                    cli.seed,
                )?);
            }
            let violations = catch_violations(&rows);
            let text = match cli.format {
                Format::Csv => rows_to_csv(&rows),
                Format::Json => with_seed(json!({ "rows": rows }), cli.seed),
            };
            (text, violations)
        }
        ExperimentKind::Rank => {
            let family = load_family(cli, &model)?;
            let table = CoverageTable::build(&family, &pool);
            let methods = [Method::Random, Method::BestOfK(args.k), Method::Ga(ga)];
            let rows = rank_table(
                &table,
                family.id(),
                &methods,
                &args.sizes,
                args.reps,
                cli.seed,
            )?;
            let violations = rank_violations(&rows);
            let text = match cli.format {
                Format::Csv => rows_to_csv(&rows),
                Format::Json => with_seed(json!({ "rows": rows }), cli.seed),
            };
            (text, violations)
        }
    };
    emit(cli.out.as_deref(), &text)?;
    if args.check && !violations.is_empty() {
        return Err(Failure::Check(violations.join("; ")));
    }
    Ok(())
}

/// Window-optimized suites must beat Kuhn-Higdon-optimized ones, which must
/// not fall more than 0.05 below random.
fn catch_violations(rows: &[CatchRow]) -> Vec<String> {
    let find = |method: &str, bug: &str, n: usize| {
        rows.iter()
            .find(|r| r.method == method && r.bug == bug && r.n == n)
            .map(|r| r.probability)
    };
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.method == "random") {
        let (Some(kh), Some(cw)) = (
            find("kuhn-higdon", &r.bug, r.n),
            find("consecutive-window", &r.bug, r.n),
        ) else {
            continue;
        };
        if cw <= kh {
            out.push(format!(
                "{} n={}: consecutive-window {cw} <= kuhn-higdon {kh}",
                r.bug, r.n
            ));
        }
        if kh < r.probability - 0.05 {
            out.push(format!(
                "{} n={}: kuhn-higdon {kh} < random {} - 0.05",
                r.bug, r.n, r.probability
            ));
        }
    }
    out
}

/// Per size: ga above best-of-k above random, with disjoint intervals.
fn rank_violations(rows: &[RankRow]) -> Vec<String> {
    let mut out = Vec::new();
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n).collect();
    sizes.dedup();
    for n in sizes {
        let at_n: Vec<&RankRow> = rows.iter().filter(|r| r.n == n).collect();
        let get = |prefix: &str| at_n.iter().find(|r| r.method.starts_with(prefix)).copied();
        let (Some(random), Some(bok), Some(ga)) = (get("random"), get("best-of-"), get("ga"))
        else {
            continue;
        };
        for (hi, lo) in [(ga, bok), (bok, random)] {
            if !(hi.ci_low > lo.ci_high) {
                out.push(format!(
                    "n={n}: {} [{:.3}, {:.3}] does not lie above {} [{:.3}, {:.3}]",
                    hi.method, hi.ci_low, hi.ci_high, lo.method, lo.ci_low, lo.ci_high
                ));
            }
        }
    }
    out
}

fn ttt_count(cli: &Cli, board: usize) -> Result<()> {
    let counts = tictactoe::game_counts(board)?;
    eprintln!(
        "{0}x{0}: {1} games, {2} classes, {3} permutations, {4} first-move classes",
        counts.board, counts.games, counts.classes, counts.permutations, counts.first_move_classes
    );
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&counts)? + "\n",
        Format::Csv => rows_to_csv(&[counts]),
    };
    emit(cli.out.as_deref(), &text)?;
    Ok(())
}
