//! One function per subcommand. Each takes explicit arguments so tests can
//! drive them without going through argument parsing.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use codemix::artifact::Artifact;
use codemix::data::{
    load_instances, load_labeled, load_wordlist, normalize_token, sample_unique, split_dataset, write_labeled,
    EncodedWord, Label, Token, SPLIT_TOTAL, TRAIN_BATCHES,
};
use codemix::ensemble::{
    evaluate_instance_level, evaluate_token_level, write_results_tsv, EnsembleModel, Metrics, Predictor,
};
use codemix::pipeline::{augment_language, train_method, TrainingData};
use codemix::synth::{generate_words, SynthLanguage};
use codemix::taggers::Method;
use codemix::train::write_jsonl;

use crate::manifest::Manifest;
use crate::{CliError, CliResult, ExperimentConfig};

/// Configuration plus the command line that is recorded in manifests.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub config: ExperimentConfig,
    pub argv: Vec<String>,
}

impl Ctx {
    pub fn new(config: ExperimentConfig, argv: Vec<String>) -> Self {
        Ctx { config, argv }
    }

    fn manifest(&self, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> CliResult<()> {
        let mut m = Manifest::new(&self.argv, &self.config);
        m.inputs = inputs;
        m.outputs = outputs;
        m.write()
    }

    pub fn lang_dir(&self, lang: u8) -> PathBuf {
        self.config.data_dir.join(format!("lang{lang}"))
    }

    pub fn split_file(&self, lang: u8, part: &str) -> PathBuf {
        self.lang_dir(lang).join(format!("{part}.tsv"))
    }

    pub fn augmented_file(&self, lang: u8, batch: usize) -> PathBuf {
        self.config.out_dir.join("augment").join(format!("lang{lang}_train{batch}.tsv"))
    }

    pub fn model_file(&self, method: Method, batch: usize) -> PathBuf {
        self.config.out_dir.join("models").join(format!("{method}_b{batch}.cmx"))
    }

    pub fn log_file(&self, name: &str) -> PathBuf {
        self.config.out_dir.join("logs").join(format!("{name}.jsonl"))
    }

    fn train_seed(&self, batch: usize) -> u64 {
        self.config.train_seed.wrapping_add(batch as u64)
    }

    fn augment_seed(&self, lang: u8, batch: usize) -> u64 {
        self.config.augment_seed.wrapping_add(((2 * batch + lang as usize) as u64) << 8)
    }
}

fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn check_batch(batch: usize) -> CliResult<()> {
    if batch >= TRAIN_BATCHES {
        return Err(CliError::Usage(format!("batch must be below {TRAIN_BATCHES}, got {batch}")));
    }
    Ok(())
}

/// Writes `count` synthetic words, one per line.
pub fn synth(lang: SynthLanguage, count: usize, seed: u64, out: &Path) -> CliResult<()> {
    let words = generate_words(lang, count, seed)?;
    create_parent(out)?;
    fs::write(out, words.join("\n") + "\n")?;
    Ok(())
}

/// Samples 6000 unique tokens per language and writes the six parts of each.
pub fn prepare(ctx: &Ctx, wordlist0: &Path, wordlist1: &Path) -> CliResult<Vec<PathBuf>> {
    let mut outputs = Vec::new();
    for (lang, path, label) in [(0u8, wordlist0, Label::Indic), (1, wordlist1, Label::English)] {
        let tokens = load_wordlist(path, label)?;
        let picked = sample_unique(tokens, SPLIT_TOTAL, ctx.config.split_seed)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let split = split_dataset(&picked, ctx.config.split_seed)?;
        fs::create_dir_all(ctx.lang_dir(lang))?;
        for (part, toks) in split.parts() {
            let file = ctx.split_file(lang, &part);
            write_labeled(&file, toks)?;
            outputs.push(file);
        }
    }
    ctx.manifest(vec![wordlist0.to_path_buf(), wordlist1.to_path_buf()], outputs.clone())?;
    Ok(outputs)
}

/// Augments both languages of one training batch.
pub fn augment(ctx: &Ctx, batch: usize) -> CliResult<Vec<PathBuf>> {
    check_batch(batch)?;
    let lm = ctx.config.methods().lm;
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for lang in [0u8, 1] {
        let input = ctx.split_file(lang, &format!("train{batch}"));
        let train = load_labeled(&input)?;
        let aug = augment_language(&train, &lm, ctx.augment_seed(lang, batch))?;
        let out = ctx.augmented_file(lang, batch);
        create_parent(&out)?;
        write_labeled(&out, &aug.tokens)?;
        let prov = out.with_extension("provenance.jsonl");
        write_jsonl(&prov, &aug.provenance)?;
        let log = ctx.log_file(&format!("lm_lang{lang}_b{batch}"));
        create_parent(&log)?;
        write_jsonl(&log, &aug.lm_logs)?;
        inputs.push(input);
        outputs.extend([out, prov, log]);
    }
    ctx.manifest(inputs, outputs.clone())?;
    Ok(outputs)
}

fn dev_set(ctx: &Ctx) -> CliResult<(Vec<Token>, Vec<PathBuf>)> {
    let files = vec![ctx.split_file(0, "dev"), ctx.split_file(1, "dev")];
    let mut dev = load_labeled(&files[0])?;
    dev.extend(load_labeled(&files[1])?);
    Ok((dev, files))
}

/// Trains one method on one batch and saves the model.
pub fn train(ctx: &Ctx, method: Method, batch: usize) -> CliResult<PathBuf> {
    check_batch(batch)?;
    let mut inputs = vec![ctx.split_file(0, &format!("train{batch}")), ctx.split_file(1, &format!("train{batch}"))];
    let train0 = load_labeled(&inputs[0])?;
    let train1 = load_labeled(&inputs[1])?;
    let (dev, dev_files) = dev_set(ctx)?;
    inputs.extend(dev_files);
    let augmented = if method == Method::Augment {
        let (f0, f1) = (ctx.augmented_file(0, batch), ctx.augmented_file(1, batch));
        for f in [&f0, &f1] {
            if !f.exists() {
                return Err(CliError::Usage(format!("{} is missing; run `augment --batch {batch}` first", f.display())));
            }
        }
        let a = (load_labeled(&f0)?, load_labeled(&f1)?);
        inputs.extend([f0, f1]);
        Some(a)
    } else {
        None
    };
    let data = TrainingData {
        train0: &train0,
        train1: &train1,
        augmented: augmented.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice())),
        dev: &dev,
    };
    let (tagger, log) = train_method(method, &data, &ctx.config.methods(), ctx.train_seed(batch))?;
    let out = ctx.model_file(method, batch);
    create_parent(&out)?;
    Artifact::Tagger(tagger).save(&out)?;
    let log_path = ctx.log_file(&format!("{method}_b{batch}"));
    create_parent(&log_path)?;
    write_jsonl(&log_path, &log)?;
    ctx.manifest(inputs, vec![out.clone(), log_path])?;
    Ok(out)
}

/// Combines single-tagger artifacts. Weights come from each member's dev
/// accuracy, or from accuracy on `accuracy_data` when given.
pub fn ensemble(ctx: &Ctx, models: &[PathBuf], accuracy_data: Option<&Path>, out: &Path) -> CliResult<EnsembleModel> {
    if models.is_empty() {
        return Err(CliError::Usage("ensemble needs at least one model".into()));
    }
    let members = models.iter().map(|m| Artifact::load(m)?.into_tagger()).collect::<Result<Vec<_>, _>>()?;
    let mut inputs = models.to_vec();
    let ens = match accuracy_data {
        None => EnsembleModel::from_dev_accuracy(members)?,
        Some(path) => {
            let data = load_labeled(path)?;
            inputs.push(path.to_path_buf());
            let accs = members.iter().map(|m| Ok(evaluate_token_level(m, &data)?.accuracy)).collect::<CliResult<Vec<_>>>()?;
            EnsembleModel::with_accuracies(members, accs)?
        }
    };
    create_parent(out)?;
    Artifact::Ensemble(ens.clone()).save(out)?;
    ctx.manifest(inputs, vec![out.to_path_buf()])?;
    Ok(ens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Token,
    Instance,
}

impl std::str::FromStr for Level {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "token" => Ok(Level::Token),
            "instance" => Ok(Level::Instance),
            _ => Err(CliError::Usage(format!("level must be token or instance, got {s:?}"))),
        }
    }
}

fn load_predictors(models: &[PathBuf]) -> CliResult<Vec<Box<dyn Predictor>>> {
    models
        .iter()
        .map(|m| {
            Ok(match Artifact::load(m)? {
                Artifact::Tagger(t) => Box::new(t) as Box<dyn Predictor>,
                Artifact::Ensemble(e) => Box::new(e),
            })
        })
        .collect()
}

/// Row names are method names, disambiguated by file stem when repeated.
fn row_names(predictors: &[Box<dyn Predictor>], models: &[PathBuf]) -> Vec<String> {
    let names: Vec<String> = predictors.iter().map(|p| p.name()).collect();
    names
        .iter()
        .zip(models)
        .map(|(n, path)| {
            if names.iter().filter(|m| *m == n).count() > 1 {
                format!("{n}:{}", path.file_stem().unwrap_or_default().to_string_lossy())
            } else {
                n.clone()
            }
        })
        .collect()
}

/// Scores every model on token or instance data and writes the results
/// table to `out` (or returns it only, when `out` is `None`).
pub fn eval(
    ctx: &Ctx,
    level: Level,
    models: &[PathBuf],
    data: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<Vec<(String, Metrics)>> {
    if models.is_empty() {
        return Err(CliError::Usage("eval needs at least one model".into()));
    }
    let predictors = load_predictors(models)?;
    let names = row_names(&predictors, models);
    let mut inputs = models.to_vec();
    let rows: Vec<(String, Metrics)> = match level {
        Level::Token => {
            let tokens = match data {
                Some(p) => {
                    inputs.push(p.to_path_buf());
                    load_labeled(p)?
                }
                None => {
                    let files = [ctx.split_file(0, "test"), ctx.split_file(1, "test")];
                    let mut t = load_labeled(&files[0])?;
                    t.extend(load_labeled(&files[1])?);
                    inputs.extend(files);
                    t
                }
            };
            let mut rows = Vec::new();
            for (name, p) in names.into_iter().zip(&predictors) {
                rows.push((name, evaluate_token_level(p.as_ref(), &tokens)?));
            }
            rows
        }
        Level::Instance => {
            let path = data
                .map(Path::to_path_buf)
                .or_else(|| ctx.config.instances.clone())
                .ok_or_else(|| CliError::Usage("instance evaluation needs --data or `instances` in the config".into()))?;
            let instances = load_instances(&path)?;
            inputs.push(path);
            let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p.as_ref()).collect();
            evaluate_instance_level(&refs, &instances)?.into_iter().zip(names).map(|((_, m), n)| (n, m)).collect()
        }
    };
    if let Some(out) = out {
        create_parent(out)?;
        write_results_tsv(fs::File::create(out)?, &rows)?;
        ctx.manifest(inputs, vec![out.to_path_buf()])?;
    }
    Ok(rows)
}

/// Reads one token per line and writes `token<TAB>label`. Blank lines pass
/// through; tokens without letters are tagged `U`.
pub fn tag<R: BufRead, W: Write>(model: &Path, input: R, mut output: W) -> CliResult<()> {
    let predictor = load_predictors(&[model.to_path_buf()])?.pop().unwrap();
    let lines: Vec<String> = input.lines().collect::<Result<_, _>>()?;
    let normalized: Vec<Option<EncodedWord>> = lines
        .iter()
        .map(|l| normalize_token(l.trim()).ok().map(|s| Token { surface: s, label: Label::Universal }.encode()))
        .collect();
    let words: Vec<EncodedWord> = normalized.iter().flatten().copied().collect();
    let mut preds = predictor.predict_words(&words)?.into_iter();
    for (line, word) in lines.iter().zip(&normalized) {
        let raw = line.trim();
        if raw.is_empty() {
            writeln!(output)?;
            continue;
        }
        let label = match word {
            Some(_) => Label::from_class(preds.next().expect("one prediction per word")).expect("0/1 prediction"),
            None => Label::Universal,
        };
        writeln!(output, "{raw}\t{label}")?;
    }
    Ok(())
}

/// Averages of the per-batch rows of one method.
fn mean_row(rows: &[&Metrics]) -> Metrics {
    let n = rows.len() as f64;
    let avg = |f: fn(&Metrics) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / n;
    let thetas: Vec<f64> = rows.iter().filter_map(|m| m.theta_used).collect();
    Metrics {
        accuracy: avg(|m| m.accuracy),
        recall: avg(|m| m.recall),
        precision: avg(|m| m.precision),
        f1: avg(|m| m.f1),
        tp: rows.iter().map(|m| m.tp).sum(),
        fp: rows.iter().map(|m| m.fp).sum(),
        fn_: rows.iter().map(|m| m.fn_).sum(),
        tn: rows.iter().map(|m| m.tn).sum(),
        theta_used: (thetas.len() == rows.len()).then(|| thetas.iter().sum::<f64>() / n),
        undefined: Vec::new(),
    }
}

/// The whole experiment: per batch augment, train all four methods, build
/// the dev-weighted ensemble and score everything on the test split. Writes
/// `results.tsv` with `method@bN` rows and `method@avg` means.
pub fn run(ctx: &Ctx, batches: &[usize]) -> CliResult<PathBuf> {
    if batches.is_empty() {
        return Err(CliError::Usage("no batches to run".into()));
    }
    let mut per_batch: Vec<(String, usize, Metrics)> = Vec::new();
    for &b in batches {
        augment(ctx, b)?;
        let models: Vec<PathBuf> = Method::ALL.iter().map(|&m| train(ctx, m, b)).collect::<CliResult<_>>()?;
        let ens_path = ctx.config.out_dir.join("models").join(format!("ensemble_b{b}.cmx"));
        ensemble(ctx, &models, None, &ens_path)?;
        let mut all = models;
        all.push(ens_path);
        for (name, m) in eval(ctx, Level::Token, &all, None, None)? {
            per_batch.push((name, b, m));
        }
    }
    let mut rows: Vec<(String, Metrics)> =
        per_batch.iter().map(|(n, b, m)| (format!("{n}@b{b}"), m.clone())).collect();
    let mut names: Vec<&String> = Vec::new();
    for (n, _, _) in &per_batch {
        if !names.contains(&n) {
            names.push(n);
        }
    }
    for n in names {
        let ms: Vec<&Metrics> = per_batch.iter().filter(|(m, _, _)| m == n).map(|(_, _, x)| x).collect();
        rows.push((format!("{n}@avg"), mean_row(&ms)));
    }
    let out = ctx.config.out_dir.join("results.tsv");
    create_parent(&out)?;
    write_results_tsv(fs::File::create(&out)?, &rows)?;
    let inputs = (0..2u8).flat_map(|l| batches.iter().map(move |b| (l, *b))).map(|(l, b)| ctx.split_file(l, &format!("train{b}"))).collect();
    ctx.manifest(inputs, vec![out.clone()])?;
    Ok(out)
}
