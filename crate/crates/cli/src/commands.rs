use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use forcelang::data::{
    generate_corpus, read_dataset, split_holdout_token, split_random, write_dataset, GeneratorConfig,
    HoldoutToken, PairedSample, Provenance,
};
use forcelang::eval::{
    emit_report, run_in_distribution, run_ood_directions, run_ood_modifiers, EvalOptions, Metric, Protocol, Report,
};
use forcelang::lang::{write_table, EmbeddingProvider, HashingProvider};
use forcelang::models::{load_checkpoint, save_checkpoint, train as train_model, EpochLoss, TrainConfig};
use forcelang::profile::{ForceMatrix, ForceProfile, HORIZON_S, SAMPLES};
use forcelang::signal::grid_time;
use forcelang::vocab::{phrase_to_text, required_texts, Direction, Modifier, Phrase};
use serde::Serialize;

use crate::{usage, EvalArgs, GenDataArgs, SplitArgs, TrainArgs, TrainingArgs, TranslateArgs, VocabArgs};

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            bail!("output directory {} does not exist", dir.display())
        }
        _ => Ok(()),
    }
}

fn ensure_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{} not found", path.display());
    }
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<PairedSample>> {
    ensure_file(path)?;
    let corpus = read_dataset(path).with_context(|| format!("reading corpus {}", path.display()))?;
    log::info!("corpus {}: {} samples", path.display(), corpus.len());
    Ok(corpus)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn training_config(a: &TrainingArgs) -> anyhow::Result<TrainConfig> {
    let mut c = TrainConfig::default();
    if let Some(e) = a.epochs {
        c.epochs = e;
    }
    if let Some(b) = a.batch_size {
        c.batch_size = b;
    }
    if let Some(lr) = a.learning_rate {
        c.learning_rate = lr;
    }
    if let Some(s) = a.smoothing {
        c.impulse_smoothing = s;
    }
    if let Err(e) = c.validate() {
        return usage(e.to_string());
    }
    Ok(c)
}

#[derive(Serialize)]
struct Counts {
    total: usize,
    phrase_to_force: usize,
    force_to_phrase: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'a str,
    corpus: String,
    seed: u64,
    config: &'a GeneratorConfig,
    counts: Counts,
}

pub fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    if a.participants == 0 {
        return usage("--participants must be at least 1");
    }
    let cfg = GeneratorConfig {
        participants: a.participants,
        phrase_to_force_per_participant: a.phrase_to_force,
        force_to_phrase_per_participant: a.force_to_phrase,
        noise: a.noise,
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    if let Err(e) = cfg.validate() {
        return usage(e);
    }
    let manifest_path = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    ensure_parent(&a.out)?;
    ensure_parent(&manifest_path)?;

    let corpus = generate_corpus(&cfg);
    write_dataset(&corpus, &a.out)?;
    let count = |p: Provenance| corpus.iter().filter(|s| s.provenance == p).count();
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        corpus: a.out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        seed: cfg.seed,
        config: &cfg,
        counts: Counts {
            total: corpus.len(),
            phrase_to_force: count(Provenance::PhraseToForce),
            force_to_phrase: count(Provenance::ForceToPhrase),
        },
    };
    let mut w = BufWriter::new(File::create(&manifest_path).with_context(|| manifest_path.display().to_string())?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    println!("wrote {} samples to {}", corpus.len(), a.out.display());
    Ok(())
}

fn write_history(path: &Path, history: &[EpochLoss]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| path.display().to_string())?);
    writeln!(w, "epoch,total,recon_force,recon_phrase,contrastive,translation")?;
    for h in history {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            h.epoch, h.total, h.recon_force, h.recon_phrase, h.contrastive, h.translation
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(a: TrainArgs) -> anyhow::Result<()> {
    let config = training_config(&a.training)?;
    let history_path = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".loss.csv"));
    ensure_parent(&a.out)?;
    ensure_parent(&history_path)?;
    let corpus = load_corpus(&a.corpus)?;
    let provider = if a.variant.needs_provider() {
        Some(a.provider.build()?)
    } else {
        if a.provider.is_set() {
            log::warn!("{} does not use an embedding provider; ignoring provider flags", a.variant);
        }
        None
    };
    log::info!("training {} with seed {}", a.variant, a.seed);
    let (model, history) = train_model(a.variant, &corpus, &config, a.seed, provider)?;
    save_checkpoint(&model, &a.out)?;
    write_history(&history_path, &history)?;
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "trained {} on {} samples: loss {:.4} -> {:.4}; checkpoint {}",
            a.variant,
            corpus.len(),
            first.total,
            last.total,
            a.out.display()
        );
    }
    Ok(())
}

fn write_forces(w: impl Write, f: &ForceMatrix) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "t,Fx,Fy,Fz")?;
    for i in 0..SAMPLES {
        writeln!(w, "{},{},{},{}", grid_time(i, SAMPLES, HORIZON_S), f[[0, i]], f[[1, i]], f[[2, i]])?;
    }
    w.flush()
}

fn read_profile_csv(path: &Path) -> anyhow::Result<ForceProfile> {
    let file = File::open(path).with_context(|| path.display().to_string())?;
    let mut cols: [Vec<f64>; 4] = Default::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("{}:{}: expected 4 columns (t,Fx,Fy,Fz)", path.display(), i + 1);
        }
        for (c, f) in cols.iter_mut().zip(&fields) {
            c.push(f.trim().parse().with_context(|| format!("{}:{}", path.display(), i + 1))?);
        }
    }
    let [t, fx, fy, fz] = cols;
    Ok(ForceProfile::new(t, fx, fy, fz)?)
}

pub fn translate(a: TranslateArgs) -> anyhow::Result<()> {
    let inputs = [a.text.is_some(), a.profile.is_some(), a.profile_csv.is_some()];
    if inputs.iter().filter(|&&x| x).count() != 1 {
        return usage("give exactly one of --text, --profile or --profile-csv");
    }
    if let Some(out) = &a.out {
        ensure_parent(out)?;
    }
    ensure_file(&a.checkpoint)?;
    let override_provider = if a.provider.is_set() { Some(a.provider.build()?) } else { None };
    let model = load_checkpoint(&a.checkpoint, override_provider.clone())
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;

    if let Some(text) = &a.text {
        let provider: Arc<dyn EmbeddingProvider> = match (override_provider, model.provider()) {
            (Some(p), _) => p,
            (None, Some(p)) => p.clone(),
            (None, None) => Arc::new(HashingProvider::new(a.provider.embed_seed)),
        };
        let t = model.translate_text(text, provider.as_ref(), a.sigma)?;
        let phrase = phrase_to_text(&t.matched.phrase);
        log::info!("matched {:?} (similarity {:.4})", phrase, t.matched.similarity);
        match &a.out {
            Some(path) => {
                write_forces(File::create(path).with_context(|| path.display().to_string())?, &t.forces)?;
                println!("{phrase}");
            }
            None => write_forces(io::stdout().lock(), &t.forces)?,
        }
        return Ok(());
    }

    let profile = match (&a.profile, &a.profile_csv) {
        (Some(id), _) => {
            let corpus = load_corpus(a.corpus.as_deref().expect("clap requires --corpus"))?;
            match corpus.into_iter().find(|s| &s.id == id) {
                Some(s) => s.profile,
                None => bail!("no record {id:?} in corpus"),
            }
        }
        (None, Some(path)) => read_profile_csv(path)?,
        (None, None) => unreachable!("checked above"),
    };
    println!("{}", phrase_to_text(&model.force_to_phrase(&profile)?));
    Ok(())
}

fn print_summary(report: &Report) {
    println!("{:<8} {:<10} {:>10} {:>10} {:>6}", "variant", "metric", "mean", "sd", "count");
    for &v in &report.variants {
        for m in Metric::ALL {
            let (mean, sd, n) = report.aggregate(v, m);
            println!("{:<8} {:<10} {:>10.4} {:>10.4} {:>6}", v.as_str(), m.as_str(), mean, sd, n);
        }
    }
}

pub fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let config = training_config(&a.training)?;
    if a.protocol == Protocol::InDistribution && a.trials == 0 {
        return usage("--trials must be at least 1");
    }
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return usage("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    ensure_parent(&a.out)?;
    let corpus = load_corpus(&a.corpus)?;
    let opts = EvalOptions { config, provider: a.provider.build()? };
    log::info!("{} with seed {}", a.protocol.as_str(), a.seed);
    let report = match a.protocol {
        Protocol::InDistribution => run_in_distribution(&corpus, &a.variants, a.trials, a.seed, &opts)?,
        Protocol::OodModifiers => run_ood_modifiers(&corpus, &a.variants, a.seed, &opts)?,
        Protocol::OodDirections => run_ood_directions(&corpus, &a.variants, a.seed, &opts)?,
    };
    emit_report(&report, &a.out)?;
    print_summary(&report);
    Ok(())
}

pub fn vocab(a: VocabArgs) -> anyhow::Result<()> {
    if let Some(path) = &a.hashing_table {
        ensure_parent(path)?;
        let provider = HashingProvider::new(a.embed_seed);
        let texts = required_texts();
        let vectors = texts.iter().map(|t| provider.embed(t)).collect::<Result<Vec<_>, _>>()?;
        let file = File::create(path).with_context(|| path.display().to_string())?;
        let mut w = BufWriter::new(file);
        write_table(&mut w, texts.iter().map(String::as_str).zip(&vectors), Some(a.precision))?;
        w.flush()?;
        println!("wrote {} rows to {}", texts.len(), path.display());
        return Ok(());
    }
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "index\tmodifier\tdirection\ttext")?;
    for (i, p) in Phrase::all().iter().enumerate() {
        writeln!(out, "{i}\t{}\t{}\t{}", p.modifier_token(), p.direction_token(), phrase_to_text(p))?;
    }
    out.flush()?;
    Ok(())
}

pub fn split(a: SplitArgs) -> anyhow::Result<()> {
    let token = match (&a.holdout_modifier, &a.holdout_direction) {
        (Some(m), _) => match m.parse::<Modifier>() {
            Ok(m) => Some(HoldoutToken::Modifier(m)),
            Err(e) => return usage(e.to_string()),
        },
        (None, Some(d)) => match d.parse::<Direction>() {
            Ok(d) => Some(HoldoutToken::Direction(d)),
            Err(e) => return usage(e.to_string()),
        },
        (None, None) => None,
    };
    if token.is_none() && !(a.fraction > 0.0 && a.fraction < 1.0) {
        return usage("--fraction must lie strictly between 0 and 1");
    }
    let corpus = load_corpus(&a.corpus)?;
    let (train_set, test_set) = match token {
        Some(t) => {
            let s = split_holdout_token(&corpus, t);
            (s.train, s.test)
        }
        None => split_random(&corpus, a.fraction, a.seed)?,
    };
    fs::create_dir_all(&a.out_dir).with_context(|| a.out_dir.display().to_string())?;
    write_dataset(&train_set, a.out_dir.join("train.jsonl"))?;
    write_dataset(&test_set, a.out_dir.join("test.jsonl"))?;
    println!("train {} / test {} -> {}", train_set.len(), test_set.len(), a.out_dir.display());
    Ok(())
}
