mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use config::{config_to_text, TrainArgs};
use ebm_core::dataset::{load_inputs, make_synthetic, save_csv, Dataset, Schema, SyntheticSpec};
use ebm_core::eval::{cv_tune, evaluate_learners, reports_to_csv, subset_search, summary_table, Learner};
use ebm_core::wallcap::{compare_code, proposed_feature_set, synthetic_walls, wall_schema, CodeRule};
use ebm_core::{train_with_report, EbmModel, Regressor, TrainConfig};

type Model = EbmModel<f64>;

#[derive(Parser, Debug)]
#[command(name = "ebm", version, about = "Explainable boosting machines for tabular regression")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Schema file, or `builtin:wall` (default: the data path with a .schema extension)
    #[arg(long)]
    schema: Option<String>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Generator {
    Linear,
    Additive,
    Interaction,
    AdditivePair,
    Walls,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its schema file
    Synth {
        #[arg(long, value_enum)]
        generator: Generator,
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        /// Noise SD (relative for walls)
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model and save it
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Length unit recorded in the model
        #[arg(long, default_value = ebm_core::model::DEFAULT_UNIT)]
        unit: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict every row of a CSV
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-row contributions, largest magnitude first
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated 0-based row indices (default: all)
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean absolute score per term over a dataset
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank feature pairs on main-effect residuals
    Interactions {
        #[command(flatten)]
        data: DataArgs,
        /// Use this model's main effects instead of fitting new ones
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated random train/test splits
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 10)]
        splits: usize,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        /// Seed for the split sequence
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Also evaluate ridge regression and a decision tree on the same splits
        #[arg(long)]
        baselines: bool,
        #[arg(long, default_value_t = 1.0)]
        ridge_lambda: f64,
        #[arg(long, default_value_t = 6)]
        tree_depth: usize,
        #[arg(long, default_value_t = 5)]
        tree_min_leaf: usize,
        /// Per-split CSV report
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// k-fold grid search over training settings
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        cv_seed: u64,
        #[arg(long, value_delimiter = ',')]
        grid_learning_rate: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_max_leaves: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        grid_max_rounds: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        grid_interactions: Vec<usize>,
        /// Write the winning settings as a config file
        #[arg(long)]
        best_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate feature subsets by repeated splits
    Subsets {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated feature list; repeat for more subsets
        #[arg(long = "subset")]
        subsets: Vec<String>,
        /// Include the four-input wall configuration
        #[arg(long)]
        proposed: bool,
        /// Every subset of this many features
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 10)]
        splits: usize,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write CSV and SVG for each term
    ExportShapes {
        #[arg(long)]
        model: PathBuf,
        /// Only this term (feature name or `a × b`)
        #[arg(long)]
        term: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare model and drift-rule capacities against measured values
    CompareCode {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        axial_threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        drift_high: f64,
        #[arg(long, default_value_t = 2.0)]
        drift_low: f64,
        /// Treat drifts as plain ratios instead of percentages
        #[arg(long)]
        drift_as_ratio: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn schema_sidecar(data: &Path) -> PathBuf {
    data.with_extension("schema")
}

fn load_schema(args: &DataArgs) -> Result<Schema> {
    match args.schema.as_deref() {
        Some("builtin:wall") => Ok(wall_schema()),
        Some(spec) if spec.starts_with("builtin:") => bail!("unknown built-in schema `{spec}`"),
        spec => {
            let path = spec.map(PathBuf::from).unwrap_or_else(|| schema_sidecar(&args.data));
            let text = fs::read_to_string(&path).with_context(|| format!("reading schema {}", path.display()))?;
            let (schema, extra) = Schema::from_kv_text(&text).with_context(|| format!("in schema {}", path.display()))?;
            for (k, _) in extra {
                log::warn!("schema {}: ignoring key `{k}`", path.display());
            }
            Ok(schema)
        }
    }
}

fn load_data(args: &DataArgs) -> Result<Dataset<f64>> {
    let schema = load_schema(args)?;
    ebm_core::load_csv(&args.data, &schema).with_context(|| format!("reading {}", args.data.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_model_inputs(model: &Model, data: &Path) -> Result<(Dataset<f64>, bool)> {
    load_inputs(data, model.schema()).with_context(|| format!("reading {}", data.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn file_stem_for(label: &str) -> String {
    label.replace(" × ", "__x__").chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { generator, rows, noise, seed, out } => {
            let ds = match generator {
                Generator::Walls => synthetic_walls::<f64>(rows, noise, seed)?,
                g => {
                    let spec = match g {
                        Generator::Linear => SyntheticSpec::linear(),
                        Generator::Additive => SyntheticSpec::additive(),
                        Generator::Interaction => SyntheticSpec::interaction(),
                        _ => SyntheticSpec::additive_with_pair(),
                    };
                    make_synthetic::<f64>(rows, &spec, noise, seed)?.dataset
                }
            };
            save_csv(&ds, &out).with_context(|| format!("writing {}", out.display()))?;
            let sidecar = schema_sidecar(&out);
            fs::write(&sidecar, ds.schema().to_kv_text())?;
            info!("wrote {} rows to {} and schema {}", ds.n_rows(), out.display(), sidecar.display());
        }
        Command::Train { data, train, unit, out } => {
            let ds = load_data(&data)?;
            let config = train.resolve()?;
            let (model, report) = train_with_report(&ds, &config)?;
            let model = model.with_unit(unit);
            model.save(&out).with_context(|| format!("writing {}", out.display()))?;
            let names = ds.schema().feature_names();
            for s in report.interactions.iter().take(config.num_interactions) {
                info!("pair {} × {} strength {}", names[s.pair.0], names[s.pair.1], s.strength);
            }
            info!("trained on {} rows, {} terms, intercept {}", ds.n_rows(), model.n_terms(), model.intercept());
        }
        Command::Predict { model, data, out } => {
            let m = load_model(&model)?;
            let (ds, has_target) = load_model_inputs(&m, &data)?;
            let preds = m.predict_dataset(&ds)?;
            let mut text = String::from(if has_target { "row,prediction,actual\n" } else { "row,prediction\n" });
            for (i, p) in preds.iter().enumerate() {
                if has_target {
                    text.push_str(&format!("{i},{p},{}\n", ds.target()[i]));
                } else {
                    text.push_str(&format!("{i},{p}\n"));
                }
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Explain { model, data, rows, out } => {
            let m = load_model(&model)?;
            let (ds, _) = load_model_inputs(&m, &data)?;
            let rows = if rows.is_empty() { (0..ds.n_rows()).collect() } else { rows };
            let mut text = String::from("row,term,contribution\n");
            for r in rows {
                if r >= ds.n_rows() {
                    bail!("row {r} out of range (dataset has {} rows)", ds.n_rows());
                }
                let e = m.local_explain(&ds.row(r))?;
                text.push_str(&format!("{r},intercept,{}\n", e.intercept));
                for c in &e.contributions {
                    text.push_str(&format!("{r},{},{}\n", c.label, c.value));
                }
                text.push_str(&format!("{r},prediction,{}\n", e.prediction));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Importance { model, data, out } => {
            let m = load_model(&model)?;
            let (ds, _) = load_model_inputs(&m, &data)?;
            let mut text = String::from("term,importance\n");
            for (label, v) in m.global_importance(&ds)? {
                text.push_str(&format!("{label},{v}\n"));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Interactions { data, model, train, top, out } => {
            let ds = load_data(&data)?;
            let m = match model {
                Some(p) => load_model(&p)?,
                None => {
                    let config = TrainConfig { num_interactions: 0, ..train.resolve()? };
                    ebm_core::train(&ds, &config)?
                }
            };
            let ds = ds.project(&m.schema().feature_names())?;
            let ranked = m.rank_residual_interactions(&ds)?;
            let names = m.schema().feature_names();
            let mut text = String::from("rank,feature_a,feature_b,strength\n");
            for (i, s) in ranked.iter().take(top.unwrap_or(usize::MAX)).enumerate() {
                text.push_str(&format!("{},{},{},{}\n", i + 1, names[s.pair.0], names[s.pair.1], s.strength));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::Evaluate {
            data,
            train,
            splits,
            test_fraction,
            split_seed,
            baselines,
            ridge_lambda,
            tree_depth,
            tree_min_leaf,
            out,
        } => {
            let ds = load_data(&data)?;
            let config = train.resolve()?;
            let mut learners = vec![Learner::Ebm(config)];
            if baselines {
                learners.push(Learner::Ridge { lambda: ridge_lambda, standardize: true });
                learners.push(Learner::Tree { max_depth: tree_depth, min_leaf_size: tree_min_leaf });
            }
            let reports = evaluate_learners(&ds, &learners, splits, test_fraction, split_seed)?;
            if let Some(p) = &out {
                fs::write(p, reports_to_csv(&reports)).with_context(|| format!("writing {}", p.display()))?;
            }
            println!(
                "{} rows, {splits} splits, test fraction {test_fraction}, split seed {split_seed}",
                ds.n_rows()
            );
            for r in &reports {
                println!("{}: {}", r.learner, r.config);
            }
            print!("{}", summary_table(&reports));
        }
        Command::Tune {
            data,
            train,
            folds,
            cv_seed,
            grid_learning_rate,
            grid_max_leaves,
            grid_max_rounds,
            grid_interactions,
            best_out,
            out,
        } => {
            let ds = load_data(&data)?;
            let base = train.resolve()?;
            let or_base = |v: Vec<f64>, b: f64| if v.is_empty() { vec![b] } else { v };
            let or_base_u = |v: Vec<usize>, b: usize| if v.is_empty() { vec![b] } else { v };
            let mut grid = Vec::new();
            for &lr in &or_base(grid_learning_rate, base.learning_rate) {
                for &leaves in &or_base_u(grid_max_leaves.clone(), base.max_leaves) {
                    for &rounds in &or_base_u(grid_max_rounds.clone(), base.max_rounds) {
                        for &k in &or_base_u(grid_interactions.clone(), base.num_interactions) {
                            grid.push(TrainConfig {
                                learning_rate: lr,
                                max_leaves: leaves,
                                max_rounds: rounds,
                                num_interactions: k,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
            for c in &grid {
                c.validate()?;
            }
            let (best, outcome) = cv_tune(&ds, &grid, folds, cv_seed)?;
            let mut text = String::from("index,learning_rate,max_leaves,max_rounds,num_interactions,mean_r2\n");
            for s in &outcome.scores {
                let c = &grid[s.index];
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.index, c.learning_rate, c.max_leaves, c.max_rounds, c.num_interactions, s.mean_r2
                ));
            }
            emit(out.as_deref(), &text)?;
            eprintln!("best (index {}): mean CV R2 {:.4}", outcome.best_index, outcome.scores[outcome.best_index].mean_r2);
            eprint!("{}", config_to_text(&best));
            if let Some(p) = best_out {
                fs::write(&p, config_to_text(&best)).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Subsets { data, train, subsets, proposed, size, splits, test_fraction, split_seed, out } => {
            let ds = load_data(&data)?;
            let config = train.resolve()?;
            let mut list: Vec<Vec<String>> =
                subsets.iter().map(|s| s.split(',').map(|f| f.trim().to_string()).collect()).collect();
            if proposed {
                list.push(proposed_feature_set());
            }
            if let Some(k) = size {
                let names = ds.schema().feature_names();
                if k == 0 || k > names.len() {
                    bail!("--size must be between 1 and {}", names.len());
                }
                for combo in combinations(names.len(), k) {
                    list.push(combo.iter().map(|&i| names[i].to_string()).collect());
                }
            }
            if list.is_empty() {
                bail!("give at least one --subset, --proposed or --size");
            }
            let results = subset_search(&ds, &list, &config, splits, test_fraction, split_seed)?;
            let mut text = String::from("rank,features,mean_r2,sd_r2,mean_pa\n");
            for (i, r) in results.iter().enumerate() {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i + 1,
                    r.features.join(";"),
                    r.mean_r2,
                    r.report.sd.r2,
                    r.mean_pa
                ));
            }
            emit(out.as_deref(), &text)?;
        }
        Command::ExportShapes { model, term, out_dir } => {
            let m = load_model(&model)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let labels = match term {
                Some(t) => vec![t],
                None => m.term_labels(),
            };
            for label in labels {
                let (csv, svg) = m.render_term(&label)?;
                let stem = file_stem_for(&label);
                fs::write(out_dir.join(format!("{stem}.csv")), csv)?;
                fs::write(out_dir.join(format!("{stem}.svg")), svg)?;
                info!("exported {label}");
            }
        }
        Command::CompareCode {
            model,
            mut data,
            axial_threshold,
            drift_high,
            drift_low,
            drift_as_ratio,
            out,
        } => {
            let m = load_model(&model)?;
            if data.schema.is_none() && !schema_sidecar(&data.data).exists() {
                data.schema = Some("builtin:wall".into());
            }
            let ds = load_data(&data)?;
            let rule = CodeRule {
                axial_threshold,
                drift_high_axial: drift_high,
                drift_low_axial: drift_low,
                percent: !drift_as_ratio,
            };
            let cmp = compare_code(&m, &ds, &rule)?;
            if let Some(p) = &out {
                fs::write(p, cmp.to_csv()).with_context(|| format!("writing {}", p.display()))?;
            }
            print!("{}", cmp.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(e.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
