//! `mwords`: one binary wiring the motion-word pipeline into reproducible
//! subcommands. Primary results go to output files or stdout; progress and
//! machine-readable errors go to stderr. Runs with the same inputs, flags
//! and seed produce byte-identical primary outputs.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use motion_words::codebook::{read_token_jsonl, write_token_jsonl};
use motion_words::engine::RankedCandidate;
use motion_words::eval::{
    gen_synth_corpus, gen_synth_poses, EvalReport, QueryOutcome, SynthCorpusConfig,
    SynthPoseConfig,
};
use motion_words::pose::{read_pose_jsonl, write_pose_jsonl};
use motion_words::{
    align, evaluate, query, query_brute_force, tokenize_sequence, train_codebook, Backend,
    Codebook, EngineConfig, Error, EvalConfig, EvalProtocol, FeatureMeta, FeaturizerConfig,
    MotionIndex, PeriodicityConfig, Result, RetrievalResult, ReservoirScope, TokenSequence,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "mwords",
    version,
    about = "Motion-word tokenization and two-stage retrieval for skeleton sequences"
)]
struct Cli {
    /// Worker threads (default: DRE_THREADS env var, then machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase stderr verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a motion-word codebook from pose sequences.
    TrainCodebook(TrainCodebookArgs),
    /// Quantize pose sequences into motion-word sequences.
    Tokenize(TokenizeArgs),
    /// Build the searchable histogram index from token sequences.
    BuildIndex(BuildIndexArgs),
    /// Retrieve the most similar indexed sequences for each query.
    Query(QueryArgs),
    /// Run the retrieval evaluation harness over a labelled corpus.
    Eval(EvalArgs),
    /// Generate a seeded synthetic token or pose corpus.
    GenSynth(GenSynthArgs),
    /// Print statistics for codebook, index or token files.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainCodebookArgs {
    /// Pose sequences, JSON Lines.
    #[arg(long)]
    input: PathBuf,
    /// Output codebook file.
    #[arg(long)]
    out: PathBuf,
    /// Codebook size K.
    #[arg(long, default_value_t = 512)]
    k: usize,
    /// EMA decay.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Count floor in the EMA code update.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 8)]
    patch_len: usize,
    #[arg(long, default_value_t = 8)]
    stride: usize,
    /// Disable scale normalization by mean pairwise distance.
    #[arg(long)]
    no_scale_norm: bool,
    /// Total training epochs, including warm-up.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Leading epochs with codebook updates suspended.
    #[arg(long, default_value_t = 1)]
    warmup_epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Disable dead-code revival.
    #[arg(long)]
    no_revival: bool,
    /// Reservoir that revival draws replacement patches from.
    #[arg(long, value_enum, default_value_t = ReservoirArg::FinalBatch)]
    reservoir: ReservoirArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReservoirArg {
    FinalBatch,
    WholeEpoch,
}

#[derive(Args)]
struct TokenizeArgs {
    /// Pose sequences, JSON Lines.
    #[arg(long)]
    input: PathBuf,
    /// Codebook to quantize with; its stored featurizer settings apply.
    #[arg(long)]
    codebook: PathBuf,
    /// Output token sequences, JSON Lines.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Token sequences, JSON Lines.
    #[arg(long)]
    input: PathBuf,
    /// Output index file.
    #[arg(long)]
    out: PathBuf,
    /// Vocabulary size K (alternative: take it from --codebook).
    #[arg(long)]
    vocab: Option<usize>,
    /// Codebook file to take K from.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Periodicity threshold theta.
    #[arg(long, default_value_t = 0.6)]
    theta: f64,
    #[arg(long, default_value_t = 2)]
    min_peaks: usize,
    /// Largest autocorrelation lag; default floor(T/2) per sequence.
    #[arg(long)]
    max_lag: Option<usize>,
}

/// Engine configuration shared by `query` and `eval`. Precedence:
/// flags > config file > built-in defaults.
#[derive(Args)]
struct EngineArgs {
    /// Engine configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    w_hist: Option<f64>,
    #[arg(long)]
    w_twed: Option<f64>,
    #[arg(long)]
    w_lcss: Option<f64>,
    #[arg(long)]
    w_edr: Option<f64>,
    #[arg(long)]
    w_erp: Option<f64>,
    #[arg(long)]
    w_ngram: Option<f64>,
    /// Rescale the weights to sum to 1 after applying overrides.
    #[arg(long)]
    renormalize_weights: bool,
    #[arg(long)]
    twed_nu: Option<f64>,
    #[arg(long)]
    twed_lambda: Option<f64>,
    #[arg(long)]
    lcss_epsilon: Option<f64>,
    /// LCSS lag bound; unbounded when omitted.
    #[arg(long)]
    lcss_delta: Option<usize>,
    #[arg(long)]
    edr_epsilon: Option<f64>,
    #[arg(long)]
    erp_gap: Option<f64>,
    #[arg(long)]
    erp_beta: Option<f64>,
    #[arg(long)]
    ngram_n: Option<usize>,
    /// Hard cap on the Stage-1 shortlist length.
    #[arg(long)]
    max_shortlist: Option<usize>,
}

impl EngineArgs {
    fn resolve(&self) -> Result<EngineConfig> {
        let mut cfg = match &self.config {
            Some(path) => EngineConfig::load_raw(path)?,
            None => EngineConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag { $field = v; })*
            };
        }
        apply! {
            w_hist => cfg.weights.hist,
            w_twed => cfg.weights.twed,
            w_lcss => cfg.weights.lcss,
            w_edr => cfg.weights.edr,
            w_erp => cfg.weights.erp,
            w_ngram => cfg.weights.ngram,
            twed_nu => cfg.align.twed_nu,
            twed_lambda => cfg.align.twed_lambda,
            lcss_epsilon => cfg.align.lcss_epsilon,
            edr_epsilon => cfg.align.edr_epsilon,
            erp_gap => cfg.align.erp_gap,
            erp_beta => cfg.align.erp_beta,
            ngram_n => cfg.align.ngram_n,
        }
        if self.lcss_delta.is_some() {
            cfg.align.lcss_delta = self.lcss_delta;
        }
        if self.max_shortlist.is_some() {
            cfg.shortlist_cap = self.max_shortlist;
        }
        if self.renormalize_weights {
            cfg.weights = cfg.weights.renormalized()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct QueryArgs {
    /// Index file to search.
    #[arg(long)]
    index: PathBuf,
    /// Query token sequences, JSON Lines.
    #[arg(long)]
    queries: PathBuf,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Candidates returned per query.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Score every index entry instead of shortlisting.
    #[arg(long)]
    brute_force: bool,
    /// Drop the index entry whose id equals the query id.
    #[arg(long)]
    exclude_self: bool,
    /// Attach the raw DTW distance to each ranked candidate (diagnostic).
    #[arg(long)]
    with_dtw: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Labelled token corpus, JSON Lines.
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Loo)]
    protocol: ProtocolArg,
    /// References held out per class under leave-k-out.
    #[arg(long, default_value_t = 1)]
    refs_per_class: usize,
    /// Retrieved candidates examined per query.
    #[arg(long, default_value_t = 3)]
    top_n: usize,
    #[arg(long, value_enum, default_value_t = BackendArg::TwoStage)]
    backend: BackendArg,
    /// Vocabulary size K; derived from the corpus when omitted.
    #[arg(long)]
    vocab: Option<usize>,
    /// Seed for the leave-k-out split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the reports as a JSON array.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Also write per-query rows as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    /// Leave-one-out: every sequence queries the rest.
    Loo,
    /// Hold out --refs-per-class members per class as the database.
    LeaveKOut,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    TwoStage,
    BruteForce,
    Both,
}

#[derive(Args)]
struct GenSynthArgs {
    /// What to generate.
    #[arg(long, value_enum, default_value_t = SynthKind::Tokens)]
    kind: SynthKind,
    /// Output JSON Lines file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Token corpus: class template length.
    #[arg(long, default_value_t = 40)]
    template_len: usize,
    /// Token corpus: vocabulary size K.
    #[arg(long, default_value_t = 512)]
    vocab: usize,
    #[arg(long, default_value_t = 0.1)]
    sub_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    ins_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    del_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    tempo_jitter: f64,
    /// Fraction of a class alphabet shared with its neighbour.
    #[arg(long, default_value_t = 0.2)]
    alphabet_overlap: f64,
    /// Pose corpus: frames per sequence.
    #[arg(long, default_value_t = 64)]
    frames: usize,
    /// Pose corpus: joints per skeleton.
    #[arg(long, default_value_t = 8)]
    joints: usize,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Pose corpus: coordinate noise amplitude.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Tokens,
    Poses,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    tokens: Option<PathBuf>,
    /// With --tokens: re-emit the records as canonical JSON Lines.
    #[arg(long)]
    dump: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let threads = cli.threads.or_else(|| {
        std::env::var("DRE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already initialised: {e}");
        }
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let diag = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{diag}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainCodebook(args) => run_train_codebook(args),
        Command::Tokenize(args) => run_tokenize(args),
        Command::BuildIndex(args) => run_build_index(args),
        Command::Query(args) => run_query(args),
        Command::Eval(args) => run_eval(args),
        Command::GenSynth(args) => run_gen_synth(args),
        Command::Inspect(args) => run_inspect(args),
    }
}

fn run_train_codebook(args: TrainCodebookArgs) -> Result<()> {
    let poses = read_pose_jsonl(&args.input)?;
    if poses.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no pose sequences in {}",
            args.input.display()
        )));
    }
    let joint_count = poses[0].joint_count();
    if let Some(other) = poses.iter().find(|p| p.joint_count() != joint_count) {
        return Err(Error::ConfigMismatch(format!(
            "sequence '{}' has {} joints, expected {} like the rest of the corpus",
            other.id,
            other.joint_count(),
            joint_count
        )));
    }
    let fcfg = FeaturizerConfig {
        patch_len: args.patch_len,
        stride: args.stride,
        scale_norm: !args.no_scale_norm,
    };
    let mut patches = Vec::new();
    for seq in &poses {
        patches.extend(motion_words::featurize_sequence(seq, &fcfg)?);
    }
    log::info!(
        "featurized {} sequences into {} patches of dimension {}",
        poses.len(),
        patches.len(),
        fcfg.feature_dim(joint_count)
    );
    let tcfg = TrainConfig {
        epochs: args.epochs,
        warmup_epochs: args.warmup_epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        revival: !args.no_revival,
        reservoir: match args.reservoir {
            ReservoirArg::FinalBatch => ReservoirScope::FinalBatch,
            ReservoirArg::WholeEpoch => ReservoirScope::WholeEpoch,
        },
    };
    let meta = FeatureMeta::new(&fcfg, joint_count);
    let (cb, history) = train_codebook(&patches, args.k, args.alpha, args.epsilon, meta, &tcfg)?;
    for (epoch, health) in history.iter().enumerate() {
        log::info!(
            "epoch {}/{}: usage {:.1}% entropy {:.3} mse {:.6}{}",
            epoch + 1,
            history.len(),
            health.usage_pct,
            health.assignment_entropy,
            health.quantization_mse,
            if epoch < args.warmup_epochs {
                " (warm-up)"
            } else {
                ""
            }
        );
    }
    cb.save(&args.out)?;
    let summary = serde_json::json!({
        "codebook": args.out.display().to_string(),
        "K": cb.k(),
        "D": cb.dim(),
        "patches": patches.len(),
        "final_health": history.last(),
    });
    println!("{summary}");
    Ok(())
}

fn run_tokenize(args: TokenizeArgs) -> Result<()> {
    let cb = Codebook::load(&args.codebook)?;
    let fcfg = cb.feature_meta.featurizer_config();
    let poses = read_pose_jsonl(&args.input)?;
    let tokens: Vec<TokenSequence> = poses
        .iter()
        .map(|seq| tokenize_sequence(seq, &fcfg, &cb))
        .collect::<Result<_>>()?;
    write_token_jsonl(&args.out, &tokens)?;
    log::info!("tokenized {} sequences -> {}", tokens.len(), args.out.display());
    Ok(())
}

fn run_build_index(args: BuildIndexArgs) -> Result<()> {
    let vocab = match (args.vocab, &args.codebook) {
        (Some(k), _) => k,
        (None, Some(path)) => Codebook::load(path)?.k(),
        (None, None) => {
            return Err(Error::InvalidInput(
                "pass --vocab K or --codebook to fix the vocabulary size".into(),
            ))
        }
    };
    let tokens = read_token_jsonl(&args.input)?;
    let pcfg = PeriodicityConfig {
        theta: args.theta,
        min_peaks: args.min_peaks,
        max_lag: args.max_lag,
    };
    let index = motion_words::build_index(&tokens, vocab, &pcfg)?;
    index.save(&args.out)?;
    let periodic = index.entries.iter().filter(|e| e.periodic).count();
    log::info!(
        "indexed {} sequences (K={}, {} periodic) -> {}",
        index.len(),
        vocab,
        periodic,
        args.out.display()
    );
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<()> {
    let cfg = args.engine.resolve()?;
    let index = MotionIndex::load(&args.index)?;
    let queries = read_token_jsonl(&args.queries)?;
    let mut results = Vec::with_capacity(queries.len());
    for q in &queries {
        let mut result: RetrievalResult = if args.brute_force {
            query_brute_force(q, &index, &cfg, args.k, args.exclude_self)?
        } else {
            query(q, &index, &cfg, args.k, args.exclude_self)?
        };
        if args.with_dtw {
            attach_dtw(q, &index, &mut result.ranked)?;
        }
        log::info!(
            "query '{}': stage1 {:?} stage2 {:?}",
            q.id,
            result.timing.stage1,
            result.timing.stage2
        );
        results.push(result);
    }
    match &args.out {
        Some(path) => {
            let mut body = String::new();
            for r in &results {
                body.push_str(&to_json_line(r)?);
                body.push('\n');
            }
            std::fs::write(path, body)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for r in &results {
                writeln!(lock, "{}", to_json_line(r)?)?;
            }
        }
    }
    Ok(())
}

fn attach_dtw(
    q: &TokenSequence,
    index: &MotionIndex,
    ranked: &mut [RankedCandidate],
) -> Result<()> {
    for candidate in ranked {
        let entry = index
            .entries
            .iter()
            .find(|e| e.id == candidate.candidate_id)
            .expect("ranked candidate comes from the index");
        candidate.dtw_distance = Some(align::dtw(&q.words, &entry.words)?);
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.engine.resolve()?;
    let corpus = read_token_jsonl(&args.db)?;
    let eval_cfg = EvalConfig {
        protocol: match args.protocol {
            ProtocolArg::Loo => EvalProtocol::LeaveOneOut,
            ProtocolArg::LeaveKOut => EvalProtocol::LeaveKOut {
                refs_per_class: args.refs_per_class,
            },
        },
        top_n: args.top_n,
        vocab_k: args.vocab,
        seed: args.seed,
    };
    let backends: Vec<Backend> = match args.backend {
        BackendArg::TwoStage => vec![Backend::TwoStage],
        BackendArg::BruteForce => vec![Backend::BruteForce],
        BackendArg::Both => vec![Backend::TwoStage, Backend::BruteForce],
    };
    let mut reports = Vec::with_capacity(backends.len());
    for backend in backends {
        reports.push(evaluate(&corpus, &cfg, &eval_cfg, backend)?);
    }
    print_eval_reports(&reports);
    if let Some(path) = &args.json_out {
        let mut body = serde_json::to_string(&reports).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        body.push('\n');
        std::fs::write(path, body)?;
    }
    if let Some(path) = &args.csv_out {
        let mut body = String::from("backend,query_id,label,best_rank,score\n");
        for report in &reports {
            let backend = backend_name(report.backend);
            for row in &report.per_query {
                let QueryOutcome {
                    query_id,
                    label,
                    best_rank,
                    score,
                } = row;
                let rank = best_rank.map_or(String::new(), |r| r.to_string());
                body.push_str(&format!("{backend},{query_id},{label},{rank},{score}\n"));
            }
        }
        std::fs::write(path, body)?;
    }
    Ok(())
}

fn backend_name(backend: Backend) -> &'static str {
    match backend {
        Backend::TwoStage => "two_stage",
        Backend::BruteForce => "brute_force",
    }
}

fn print_eval_reports(reports: &[EvalReport]) {
    println!(
        "{:<12} {:>8} {:>11} {:>11} {:>6} {:>6} {:>6} {:>7}",
        "backend", "queries", "mean_score", "match_rate", "rank1", "rank2", "rank3", "beyond"
    );
    for r in reports {
        println!(
            "{:<12} {:>8} {:>11.4} {:>10.1}% {:>6} {:>6} {:>6} {:>7}",
            backend_name(r.backend),
            r.n_queries,
            r.mean_score,
            r.match_rate_pct,
            r.rank_histogram.rank1,
            r.rank_histogram.rank2,
            r.rank_histogram.rank3,
            r.rank_histogram.beyond
        );
    }
    for r in reports {
        println!();
        println!("per-class ({}):", backend_name(r.backend));
        println!(
            "{:<16} {:>8} {:>11} {:>11}",
            "label", "queries", "mean_score", "match_rate"
        );
        for c in &r.per_class {
            println!(
                "{:<16} {:>8} {:>11.4} {:>10.1}%",
                c.label, c.n_queries, c.mean_score, c.match_rate_pct
            );
        }
    }
}

fn run_gen_synth(args: GenSynthArgs) -> Result<()> {
    match args.kind {
        SynthKind::Tokens => {
            let cfg = SynthCorpusConfig {
                n_classes: args.classes,
                per_class: args.per_class,
                template_len: args.template_len,
                k: args.vocab,
                substitution_rate: args.sub_rate,
                insertion_rate: args.ins_rate,
                deletion_rate: args.del_rate,
                tempo_jitter: args.tempo_jitter,
                alphabet_overlap: args.alphabet_overlap,
                rng_seed: args.seed,
            };
            let corpus = gen_synth_corpus(&cfg)?;
            write_token_jsonl(&args.out, &corpus)?;
            log::info!("wrote {} token sequences -> {}", corpus.len(), args.out.display());
        }
        SynthKind::Poses => {
            let cfg = SynthPoseConfig {
                n_classes: args.classes,
                per_class: args.per_class,
                frames: args.frames,
                joints: args.joints,
                fps: args.fps,
                noise: args.noise,
                rng_seed: args.seed,
            };
            let corpus = gen_synth_poses(&cfg)?;
            write_pose_jsonl(&args.out, &corpus)?;
            log::info!("wrote {} pose sequences -> {}", corpus.len(), args.out.display());
        }
    }
    Ok(())
}

fn run_inspect(args: InspectArgs) -> Result<()> {
    if args.codebook.is_none() && args.index.is_none() && args.tokens.is_none() {
        return Err(Error::InvalidInput(
            "pass at least one of --codebook, --index, --tokens".into(),
        ));
    }
    if let Some(path) = &args.codebook {
        let cb = Codebook::load(path)?;
        let active = cb
            .ema_counts
            .iter()
            .filter(|&&n| n > cb.epsilon)
            .count();
        let norms: Vec<f64> = cb
            .codes
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        println!("codebook {}", path.display());
        println!("  K: {}  D: {}", cb.k(), cb.dim());
        println!("  alpha: {}  epsilon: {}", cb.alpha, cb.epsilon);
        println!(
            "  featurizer: patch_len={} stride={} scale_norm={} joints={} pair_order={}",
            cb.feature_meta.patch_len,
            cb.feature_meta.stride,
            cb.feature_meta.scale_norm,
            cb.feature_meta.joint_count,
            cb.feature_meta.pair_order
        );
        println!(
            "  lifetime active codes: {}/{} ({:.1}%)",
            active,
            cb.k(),
            100.0 * active as f64 / cb.k() as f64
        );
        println!(
            "  code norms: min {:.4} mean {:.4} max {:.4}",
            norms.iter().cloned().fold(f64::INFINITY, f64::min),
            norms.iter().sum::<f64>() / norms.len() as f64,
            norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }
    if let Some(path) = &args.index {
        let index = MotionIndex::load(path)?;
        let periodic = index.entries.iter().filter(|e| e.periodic).count();
        let labelled = index.entries.iter().filter(|e| e.label.is_some()).count();
        let lens: Vec<usize> = index.entries.iter().map(|e| e.words.len()).collect();
        println!("index {}", path.display());
        println!("  entries: {}  K: {}", index.len(), index.k);
        println!(
            "  periodic: {} ({:.1}%)",
            periodic,
            100.0 * periodic as f64 / index.len().max(1) as f64
        );
        println!("  labelled: {labelled}");
        println!(
            "  token lengths: min {} mean {:.1} max {}",
            lens.iter().min().copied().unwrap_or(0),
            lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64,
            lens.iter().max().copied().unwrap_or(0)
        );
    }
    if let Some(path) = &args.tokens {
        let tokens = read_token_jsonl(path)?;
        if args.dump {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            for t in &tokens {
                writeln!(lock, "{}", to_json_line(t)?)?;
            }
        } else {
            let lens: Vec<usize> = tokens.iter().map(|t| t.words.len()).collect();
            let max_word = tokens
                .iter()
                .flat_map(|t| t.words.iter())
                .max()
                .copied();
            println!("tokens {}", path.display());
            println!("  records: {}", tokens.len());
            println!(
                "  lengths: min {} mean {:.1} max {}",
                lens.iter().min().copied().unwrap_or(0),
                lens.iter().sum::<usize>() as f64 / lens.len().max(1) as f64,
                lens.iter().max().copied().unwrap_or(0)
            );
            println!(
                "  max word: {}",
                max_word.map_or("-".to_string(), |w| w.to_string())
            );
        }
    }
    Ok(())
}

fn to_json_line<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Parse {
        path: "<stdout>".into(),
        line: 0,
        message: e.to_string(),
    })
}
