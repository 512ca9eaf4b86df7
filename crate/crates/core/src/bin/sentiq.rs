use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sentiq::config::Config;
use sentiq::db::{files, BuildInputs, Database};
use sentiq::error::Error;
use sentiq::eval::{bench_csv, build_workloads, run_benchmark, timing_compare, GroundTruth};
use sentiq::model::read_jsonl;
use sentiq::query::{evaluate, evaluate_hard, parse, Variant};
use sentiq::synth::{generate_corpus, ProbePredicate, SyntheticCorpusSpec};

/// Subjective review-query engine: aggregate opinions from reviews, interpret
/// free-text predicates against the schema, and rank entities by fuzzy
/// degrees of truth.
#[derive(Parser)]
#[command(name = "sentiq", version, about)]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding the JSONL inputs (and the build/ artifacts).
    #[arg(long, global = true, default_value = "data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic review corpus with planted ground truth.
    Generate {
        #[arg(long, default_value_t = 100)]
        entities: usize,
        #[arg(long, default_value_t = 20)]
        reviews_per_entity: usize,
        #[arg(long, default_value_t = 1000)]
        labels: usize,
    },
    /// Check the inputs against the schema invariants.
    Validate,
    /// Run the full pipeline and persist the artifacts under build/.
    Build,
    /// Interpret one free-text predicate.
    Interpret {
        #[arg(long)]
        predicate: String,
    },
    /// Evaluate a query and print the ranked result.
    Query {
        #[arg(long)]
        sql: String,
        #[arg(long)]
        k: Option<usize>,
        /// product | minmax
        #[arg(long)]
        variant: Option<String>,
        /// Evaluate with hard per-condition thresholds instead of fuzzy
        /// combination.
        #[arg(long)]
        hard: bool,
    },
    /// Score the engine and baselines over generated workloads (CSV), or
    /// time the summary vs raw scoring paths with --timing.
    Eval {
        #[arg(long, default_value = "easy,medium,hard")]
        workloads: String,
        #[arg(long, default_value_t = 100)]
        queries_per_set: usize,
        #[arg(long)]
        timing: bool,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Syntax { .. }
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::MissingArtifact(_)
        | Error::ValidationFailed(_)
        | Error::InvalidSpec(_)
        | Error::UnknownRelation(_)
        | Error::UnknownObjectiveAttribute(_)
        | Error::EmptyCorpus
        | Error::UnknownDocument(_)
        | Error::UnknownEntity(_)
        | Error::MissingTruth { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::AllTokensOutOfVocabulary(_)
        | Error::DomainTooSmall { .. }
        | Error::AttributeMismatch { .. }
        | Error::DegenerateLabels
        | Error::Infeasible(_)
        | Error::FuzzyDomain(_) => 3,
    }
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn load_database(cli: &Cli, config: Config) -> Result<Database, Error> {
    Database::load(&cli.data_dir, &cli.data_dir.join(files::BUILD_DIR), config)
}

fn parse_variant(s: &str) -> Result<Variant, Error> {
    match s.to_ascii_lowercase().as_str() {
        "product" => Ok(Variant::Product),
        "minmax" => Ok(Variant::MinMax),
        other => Err(Error::Config(format!(
            "unknown variant {other:?} (expected `product` or `minmax`)"
        ))),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Generate {
            entities,
            reviews_per_entity,
            labels,
        } => {
            let spec = SyntheticCorpusSpec {
                entity_count: *entities,
                reviews_per_entity: *reviews_per_entity,
                membership_labels: *labels,
                seed: config.seed,
                ..SyntheticCorpusSpec::default()
            };
            let corpus = generate_corpus(&spec)?;
            corpus.write_to(&cli.data_dir)?;
            eprintln!(
                "generated {} entities, {} reviews, {} extractions into {}",
                corpus.entities.len(),
                corpus.reviews.len(),
                corpus.extractions.len(),
                cli.data_dir.display()
            );
            let summary = serde_json::json!({
                "entities": corpus.entities.len(),
                "reviews": corpus.reviews.len(),
                "extractions": corpus.extractions.len(),
                "predicates": corpus.predicates.len(),
                "membership_labels": corpus.membership_labels.len(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Validate => {
            let inputs = BuildInputs::load(&cli.data_dir)?;
            let report = inputs.validate();
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.is_empty() {
                Ok(())
            } else {
                Err(Error::ValidationFailed(report.len()))
            }
        }
        Command::Build => {
            let inputs = BuildInputs::load(&cli.data_dir)?;
            let report = inputs.validate();
            if !report.is_empty() {
                eprint!("{report}");
                return Err(Error::ValidationFailed(report.len()));
            }
            let (db, build_report) = Database::build(inputs, config)?;
            db.save(&cli.data_dir.join(files::BUILD_DIR))?;
            let report_path = cli.data_dir.join(files::BUILD_DIR).join(files::REPORT);
            std::fs::write(&report_path, serde_json::to_string_pretty(&build_report)?)?;
            eprintln!(
                "built {} summaries over {} attributes; artifacts in {}",
                build_report.summaries,
                build_report.markers_per_attribute.len(),
                cli.data_dir.join(files::BUILD_DIR).display()
            );
            println!("{}", serde_json::to_string_pretty(&build_report)?);
            Ok(())
        }
        Command::Interpret { predicate } => {
            let db = load_database(cli, config)?;
            let interpretation = db.interpret_cached(predicate);
            println!("{}", serde_json::to_string_pretty(&interpretation)?);
            Ok(())
        }
        Command::Query {
            sql,
            k,
            variant,
            hard,
        } => {
            let db = load_database(cli, config)?;
            let query = parse(sql)?;
            let k = k.unwrap_or(db.config.top_k);
            let variant = match variant {
                Some(v) => parse_variant(v)?,
                None => db.config.fuzzy_variant,
            };
            let result = if *hard {
                evaluate_hard(
                    &db,
                    &query,
                    &BTreeMap::new(),
                    db.config.hard_threshold,
                    k,
                    variant,
                )?
            } else {
                evaluate(&db, &query, k, variant)?
            };
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
        Command::Eval {
            workloads,
            queries_per_set,
            timing,
        } => {
            let mut config = config;
            // the harness interprets under the stricter combined gate
            config.w2v_threshold = config.combined_threshold;
            let db = load_database(cli, config)?;
            let probes: Vec<ProbePredicate> =
                read_jsonl(&need(&cli.data_dir, files::PREDICATES)?)?;
            if *timing {
                let predicates: Vec<String> = probes.iter().map(|p| p.text.clone()).collect();
                let report = timing_compare(&db, &predicates)?;
                println!("{}", serde_json::to_string_pretty(&report)?);
                return Ok(());
            }
            let truth = GroundTruth::load(&need(&cli.data_dir, files::TRUTH)?)?;
            let sizes: Vec<(&str, usize)> = workloads
                .split(',')
                .map(|name| match name.trim() {
                    "easy" => Ok(("easy", 2usize)),
                    "medium" => Ok(("medium", 4usize)),
                    "hard" => Ok(("hard", 7usize)),
                    other => Err(Error::Config(format!(
                        "unknown workload {other:?} (expected easy, medium, hard)"
                    ))),
                })
                .collect::<Result<_, _>>()?;
            let workloads = build_workloads(&probes, &sizes, *queries_per_set, db.config.seed);
            let rows = run_benchmark(&db, &workloads, &truth)?;
            print!("{}", bench_csv(&rows));
            Ok(())
        }
    }
}

fn need(dir: &Path, name: &str) -> Result<PathBuf, Error> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact(p.display().to_string()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints its own help/usage text
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
