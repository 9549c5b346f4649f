use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bytevq_core::asrtoy::{
    corrupt_stream, evaluate, load_features, run_benchmark, save_features, synth_generate, train_asr, AsrBundle,
    AsrConfig, BenchmarkConfig, BenchmarkReport, CorruptionRates, Dataset, Language, Pipeline, Representation,
    SynthTaskSpec,
};
use bytevq_core::autoencoder::{
    loss_gradient_checks, train_autoencoder, AcousticSettings, LossWeights, ModelConfig, TrainConfig,
};
use bytevq_core::codec::{corpus_hash, format_stream, parse_stream, CodecArtifact, Provenance};
use bytevq_core::numerics::{DenseMatrix, OptimizerConfig};
use bytevq_core::quantizer::RestartConfig;
use bytevq_core::subword::SubwordVocab;
use bytevq_core::Error;
use log::info;
use serde::Serialize;

use crate::args::*;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::SynthGen(a) => synth_gen(a),
        Command::CodecTrain(a) => codec_train(a),
        Command::CodecEncode(a) => codec_encode(a),
        Command::CodecDecode(a) => codec_decode(a),
        Command::BpeTrain(a) => bpe_train(a),
        Command::AsrTrain(a) => asr_train(a),
        Command::AsrEval(a) => asr_eval(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn log_config(name: &str, args: &impl Serialize) {
    info!(
        "{name} config: {}",
        serde_json::to_string(args).unwrap_or_else(|e| format!("<unprintable: {e}>"))
    );
}

fn input_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{flag}: no such file {}", path.display())))
    }
}

fn output_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(CliError::Usage(format!("--{flag}: {} is a directory", path.display())));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Usage(format!(
            "--{flag}: parent directory of {} does not exist",
            path.display()
        ))),
        _ => Ok(()),
    }
}

fn output_dir(flag: &str, path: &Path) -> Result<()> {
    if path.exists() && !path.is_dir() {
        return Err(CliError::Usage(format!("--{flag}: {} is not a directory", path.display())));
    }
    std::fs::create_dir_all(path).map_err(|e| io(path, e))
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn load_dataset(texts: &Path, features: &Path) -> Result<Dataset> {
    let texts = read_lines(texts)?;
    let (_, features) = load_features(features)?;
    if texts.len() != features.len() {
        return Err(CliError::Core(Error::Data(format!(
            "{} transcripts but {} feature sequences",
            texts.len(),
            features.len()
        ))));
    }
    Ok(Dataset { texts, features })
}

fn synth_gen(a: SynthGenArgs) -> Result<()> {
    log_config("synth-gen", &a);
    output_dir("out-dir", &a.out_dir)?;
    let spec = SynthTaskSpec {
        latin_chars: a.latin_chars,
        cjk_chars: a.cjk_chars,
        phones: a.phones,
        homophone_rate: a.homophone_rate,
        feature_dim: a.feature_dim,
        noise: a.noise,
        utterances: a.utterances,
        cjk_fraction: a.cjk_fraction,
        lexicon_words: a.lexicon_words,
        test_fraction: a.test_fraction,
        seed: a.common.seed,
        ..SynthTaskSpec::default()
    };
    let task = synth_generate(&spec)?;
    for (name, set) in [("train", &task.train), ("test", &task.test)] {
        write_lines(&a.out_dir.join(format!("{name}.txt")), &set.texts)?;
        save_features(a.out_dir.join(format!("{name}.feats")), spec.feature_dim, &set.features)?;
    }
    let spec_json = serde_json::to_string_pretty(&spec).expect("task spec serializes");
    write_text(&a.out_dir.join("task.json"), &(spec_json + "\n"))?;
    info!(
        "wrote {} train and {} test utterances, {} homophone groups",
        task.train.len(),
        task.test.len(),
        task.lexicon.homophone_groups().len()
    );
    Ok(())
}

fn train_config(o: &CodecOpts, feature_dim: Option<usize>, seed: u64) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            dim: o.dim,
            encoder_layers: o.encoder_layers,
            levels: o.levels,
            codebook_size: o.codebook_size,
            beta: o.beta,
            acoustic: feature_dim.map(|f| AcousticSettings {
                feature_dim: f,
                context: o.acoustic_context,
                hidden: o.acoustic_hidden,
                hidden_layers: o.acoustic_layers,
            }),
        },
        weights: LossWeights {
            label_ce: o.w1,
            acoustic_ce: o.w2,
            ctc: o.w3,
            vq: o.w4,
        },
        optimizer: OptimizerConfig::adam(o.codec_lr),
        epochs: o.codec_epochs,
        batch_size: o.codec_batch_size,
        kmeans_init: o.kmeans_init,
        restart: RestartConfig {
            enabled: o.restart,
            seed,
            ..RestartConfig::default()
        },
        seed,
        ..TrainConfig::default()
    }
}

fn train_codec(
    texts: &[String],
    features: Option<&[DenseMatrix]>,
    opts: &CodecOpts,
    seed: u64,
    keep_trainer_state: bool,
) -> Result<CodecArtifact> {
    let dim = features.and_then(|f| f.first()).map(DenseMatrix::cols);
    let cfg = train_config(opts, dim, seed);
    let (model, _) = train_autoencoder(texts, features, None, &cfg)?;
    let provenance = Provenance {
        seed,
        corpus_hash: corpus_hash(texts),
    };
    Ok(CodecArtifact::from_model(&model, provenance, keep_trainer_state)?)
}

fn codec_train(a: CodecTrainArgs) -> Result<()> {
    log_config("codec-train", &a);
    input_file("text", &a.text)?;
    if let Some(f) = &a.features {
        input_file("features", f)?;
    }
    output_file("out", &a.out)?;
    let texts = read_lines(&a.text)?;
    let features = match &a.features {
        Some(f) => {
            let (_, feats) = load_features(f)?;
            Some(feats)
        }
        None => None,
    };
    let artifact = train_codec(&texts, features.as_deref(), &a.codec, a.common.seed, a.keep_trainer_state)?;
    artifact.save(&a.out)?;
    info!("wrote codec with {} symbols to {}", artifact.symbol_count(), a.out.display());
    Ok(())
}

fn codec_encode(a: CodecEncodeArgs) -> Result<()> {
    log_config("codec-encode", &a);
    input_file("codec", &a.codec)?;
    input_file("in", &a.input)?;
    output_file("out", &a.out)?;
    let codec = CodecArtifact::load(&a.codec)?;
    let streams = read_lines(&a.input)?
        .iter()
        .enumerate()
        .map(|(i, t)| codec.text_to_bytes_at(t, i + 1).map(|s| format_stream(&s)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_lines(&a.out, &streams)
}

fn codec_decode(a: CodecDecodeArgs) -> Result<()> {
    log_config("codec-decode", &a);
    input_file("codec", &a.codec)?;
    input_file("in", &a.input)?;
    output_file("out", &a.out)?;
    let codec = CodecArtifact::load(&a.codec)?;
    let texts = read_lines(&a.input)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let stream = parse_stream(l, i + 1)?;
            if a.positional {
                codec.bytes_to_labels_positional(&stream)
            } else {
                codec.bytes_to_labels(&stream)
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_lines(&a.out, &texts)
}

fn load_codec_for(rep: Representation, codec: Option<&PathBuf>) -> Result<Option<CodecArtifact>> {
    match (rep, codec) {
        (Representation::Vq, None) => Err(CliError::Usage("--codec is required for the vq representation".into())),
        (Representation::Vq, Some(p)) => {
            input_file("codec", p)?;
            Ok(Some(CodecArtifact::load(p)?))
        }
        _ => Ok(None),
    }
}

fn bpe_train(a: BpeTrainArgs) -> Result<()> {
    log_config("bpe-train", &a);
    input_file("in", &a.input)?;
    output_file("out", &a.out)?;
    if a.representation == Representation::Char {
        return Err(CliError::Usage("--representation: BPE needs utf8 or vq".into()));
    }
    let codec = load_codec_for(a.representation, a.codec.as_ref())?;
    let texts = read_lines(&a.input)?;
    match Pipeline::build(a.representation, a.size, &texts, codec.as_ref())? {
        Pipeline::Utf8(v) | Pipeline::Vq { vocab: v, .. } => {
            v.save(&a.out)?;
            info!("learned {} merges, vocabulary size {}", v.merges().len(), v.size());
            Ok(())
        }
        Pipeline::Char(_) => unreachable!("char was rejected above"),
    }
}

fn asr_config(o: &AsrOpts, seed: u64) -> AsrConfig {
    AsrConfig {
        context: o.context,
        hidden: o.hidden,
        hidden_layers: o.hidden_layers,
        epochs: o.epochs,
        batch_size: o.batch_size,
        optimizer: OptimizerConfig::adam(o.lr),
        beam_width: o.beam_width,
        seed,
    }
}

fn asr_train(a: AsrTrainArgs) -> Result<()> {
    log_config("asr-train", &a);
    input_file("text", &a.text)?;
    input_file("features", &a.features)?;
    if let Some(v) = &a.vocab {
        input_file("vocab", v)?;
    }
    output_file("out", &a.out)?;
    let codec = load_codec_for(a.representation, a.codec.as_ref())?;
    let data = load_dataset(&a.text, &a.features)?;
    let pipeline = match (&a.vocab, a.representation) {
        (None, rep) => Pipeline::build(rep, a.size, &data.texts, codec.as_ref())?,
        (Some(_), Representation::Char) => {
            return Err(CliError::Usage("--vocab does not apply to the char representation".into()))
        }
        (Some(p), Representation::Utf8) => Pipeline::Utf8(SubwordVocab::load(p)?),
        (Some(p), Representation::Vq) => Pipeline::Vq {
            codec: codec.expect("checked by load_codec_for"),
            vocab: SubwordVocab::load(p)?,
        },
    };
    let targets = data
        .texts
        .iter()
        .enumerate()
        .map(|(i, t)| pipeline.targets(t, i + 1))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let config = asr_config(&a.asr, a.common.seed);
    let (model, report) = train_asr(&targets, &data.features, pipeline.vocab_size(), &config)?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        info!("asr epoch {e}: loss {l:.4}");
    }
    if report.skipped > 0 {
        info!("{} utterances skipped (targets longer than frames allow)", report.skipped);
    }
    AsrBundle {
        pipeline,
        config,
        model,
    }
    .save(&a.out)?;
    Ok(())
}

fn fmt_ter(t: Option<f64>) -> String {
    t.map_or("n/a".into(), |v| format!("{v:.2}"))
}

fn asr_eval(a: AsrEvalArgs) -> Result<()> {
    log_config("asr-eval", &a);
    input_file("model", &a.model)?;
    input_file("text", &a.text)?;
    input_file("features", &a.features)?;
    for (flag, p) in [("hyp-out", &a.hyp_out), ("report", &a.report)] {
        if let Some(p) = p {
            output_file(flag, p)?;
        }
    }
    let bundle = AsrBundle::load(&a.model)?;
    let data = load_dataset(&a.text, &a.features)?;
    let hyps = data
        .features
        .iter()
        .map(|f| bundle.transcribe(f))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let eval = evaluate(data.texts.iter().map(String::as_str).zip(hyps.iter().map(String::as_str)));
    let mut kv = String::new();
    for (name, lang) in [("latin", Language::Latin), ("cjk", Language::Cjk)] {
        let t = eval.tally(lang);
        let _ = writeln!(kv, "{name}.ter={}", fmt_ter(t.ter_percent()));
        let _ = writeln!(kv, "{name}.utterances={}", t.utterances);
        info!("{name}: TER {} over {} utterances", fmt_ter(t.ter_percent()), t.utterances);
    }
    if let Some(p) = &a.hyp_out {
        write_lines(p, &hyps)?;
    }
    if let Some(p) = &a.report {
        write_text(p, &kv)?;
    }
    print!("{kv}");
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    log_config("benchmark", &a);
    let files = ["train.txt", "train.feats", "test.txt", "test.feats"].map(|f| a.data_dir.join(f));
    for f in &files {
        input_file("data-dir", f)?;
    }
    if let Some(c) = &a.codec {
        input_file("codec", c)?;
    }
    output_dir("out-dir", &a.out_dir)?;
    if a.sizes.is_empty() || a.representations.is_empty() {
        return Err(CliError::Usage("--sizes and --representations must not be empty".into()));
    }
    let train = load_dataset(&files[0], &files[1])?;
    let test = load_dataset(&files[2], &files[3])?;
    let config = BenchmarkConfig {
        representations: a.representations.clone(),
        sizes: a.sizes.clone(),
        asr: asr_config(&a.asr, a.common.seed),
    };
    let needs_codec = a.representations.contains(&Representation::Vq);

    let mut runs: Vec<(String, Option<CodecArtifact>)> = Vec::new();
    match (&a.w2_sweep, &a.codec) {
        (Some(sweep), _) => {
            for &w2 in sweep {
                let opts = CodecOpts { w2, ..a.codec_opts.clone() };
                info!("training codec with w2={w2}");
                let codec = train_codec(&train.texts, Some(&train.features), &opts, a.common.seed, false)?;
                runs.push((format!("w2={w2}"), Some(codec)));
            }
        }
        (None, Some(p)) => runs.push((String::new(), Some(CodecArtifact::load(p)?))),
        (None, None) if needs_codec => {
            info!("training codec on the training split");
            let codec = train_codec(&train.texts, Some(&train.features), &a.codec_opts, a.common.seed, false)?;
            runs.push((String::new(), Some(codec)));
        }
        (None, None) => runs.push((String::new(), None)),
    }

    let mut reports: Vec<BenchmarkReport> = Vec::new();
    for (label, codec) in runs {
        let mut report = run_benchmark(&train, &test, codec.as_ref(), &config)?;
        report.label = label;
        reports.push(report);
    }
    let mut table = String::new();
    let mut kv = String::new();
    for r in &reports {
        if !r.label.is_empty() {
            let _ = writeln!(table, "[{}]", r.label);
        }
        table.push_str(&r.table());
        table.push('\n');
        kv.push_str(&r.key_values());
    }
    write_text(&a.out_dir.join("report.txt"), &table)?;
    write_text(&a.out_dir.join("report.kv"), &kv)?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write_text(&a.out_dir.join("report.json"), &(json + "\n"))?;
    print!("{table}");
    Ok(())
}

fn corrupt(a: CorruptArgs) -> Result<()> {
    log_config("corrupt", &a);
    input_file("in", &a.input)?;
    if let Some(c) = &a.codec {
        input_file("codec", c)?;
    }
    output_file("out", &a.out)?;
    let symbols = match (a.symbols, &a.codec) {
        (Some(s), _) => s,
        (None, Some(c)) => CodecArtifact::load(c)?.symbol_count() as u32,
        (None, None) => return Err(CliError::Usage("one of --codec or --symbols is required".into())),
    };
    let rates = CorruptionRates {
        substitution: a.substitution,
        deletion: a.deletion,
        insertion: a.insertion,
    };
    let (mut subs, mut dels, mut ins) = (0, 0, 0);
    let mut out = Vec::new();
    for (i, line) in read_lines(&a.input)?.iter().enumerate() {
        let stream = parse_stream(line, i + 1)?;
        let (noisy, counts) = corrupt_stream(&stream, rates, symbols, a.common.seed.wrapping_add(i as u64))?;
        subs += counts.substitutions;
        dels += counts.deletions;
        ins += counts.insertions;
        out.push(format_stream(&noisy));
    }
    write_lines(&a.out, &out)?;
    info!("applied {subs} substitutions, {dels} deletions, {ins} insertions");
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    log_config("gradcheck", &a);
    if let Some(p) = &a.out {
        output_file("out", p)?;
    }
    let checks = loss_gradient_checks(a.common.seed, a.epsilon, a.tolerance)?;
    let mut failed = 0;
    for c in &checks {
        let ok = c.report.passed();
        failed += usize::from(!ok);
        println!(
            "{} {} -> {}: {} entries, max relative error {:.3e}",
            if ok { "PASS" } else { "FAIL" },
            c.term,
            c.params,
            c.report.entries.len(),
            c.report.max_rel_error()
        );
    }
    if let Some(p) = &a.out {
        let json = serde_json::to_string_pretty(&checks).expect("reports serialize");
        write_text(p, &(json + "\n"))?;
    }
    if failed > 0 {
        return Err(CliError::Core(Error::Numeric(format!("{failed} gradient checks failed"))));
    }
    Ok(())
}
