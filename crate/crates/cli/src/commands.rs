use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cover_core::corruption::{image_seed, Corruption, CorruptionSpec};
use cover_core::gmm::{apply_cover_delta, sample_gmm, verify_lemma, GmmParams, ParamDelta};
use cover_core::ingestion::{
    fit_prototype, load_class_dataset, load_flat_dataset, prototype_logits, read_logits_path, score_samples,
    select_corruptions, write_logits,
};
use cover_core::metrics::fpr_at_tpr;
use cover_core::mutation::{frequency_split_with, RadiusBasis};
use cover_core::synthetic::{gen_synthetic_benchmark, id_variances, run_cover_experiment};
use cover_core::{
    apply_corruption, evaluate, expand_dimensions, list_corruptions, CorruptionKind, DimensionSet, Image, LogitRecord,
    ScoreConfig, ScoredSplit, Split,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::report::{histogram_svg, read_rows, write_csv, ReportRow};
use crate::{Basis, CliError, CliResult, Command, Format, ScoringArgs};

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Corrupt { input, output, kind, severity, seed } => corrupt(&input, &output, kind, severity, seed),
        Command::Score { logits, dims, scoring, output } => score(&logits, &dims, &scoring, output.as_deref()),
        Command::Eval { scores, id, ood, tpr, method, dataset, rows, format, csv, plot, bins } => {
            eval(EvalArgs { scores, id, ood, tpr, method, dataset, rows, format, csv, plot, bins: bins as usize })
        }
        Command::Select { id, ood, candidates, k, scoring } => {
            select(&id, ood.as_deref(), candidates.as_deref(), k, &scoring)
        }
        Command::Simulate {
            mu_id,
            sigma_id,
            mu_ood,
            sigma_ood,
            d_mu_id,
            d_sigma_id,
            d_mu_ood,
            d_sigma_ood,
            tpr,
            samples,
            seed,
        } => simulate(
            (mu_id, sigma_id, mu_ood, sigma_ood),
            ParamDelta { d_mu_id, d_sigma_id, d_mu_ood, d_sigma_ood },
            tpr,
            samples as usize,
            seed,
        ),
        Command::Freq { input, out_dir, radius, basis } => freq(&input, &out_dir, radius, basis),
        Command::BenchSynth { n_id, n_ood, gap, tpr, seed, plot } => {
            bench_synth(n_id as usize, n_ood as usize, gap, tpr, seed, plot.as_deref())
        }
        Command::Logits { train, id, ood, dims, image_size, scale, seed, output } => {
            logits(&train, &id, &ood, &dims, image_size as usize, scale, seed, output.as_deref())
        }
        Command::List { json } => list(json),
    }
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes a line to stdout; a closed pipe (`cover list | head`) is not an error.
fn emit(text: &str) -> CliResult {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::runtime(e)),
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> CliResult {
    emit(&serde_json::to_string_pretty(value).map_err(CliError::runtime)?)
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_image(path: &Path) -> Result<Image, CliError> {
    Image::load(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn corrupt(input: &Path, output: &Path, kind: CorruptionKind, severity: u8, seed: u64) -> CliResult {
    let spec = CorruptionSpec::new(kind, severity, seed).map_err(CliError::usage)?;
    let img = load_image(input)?;
    let out = apply_corruption(&img, &spec).map_err(CliError::runtime)?;
    out.save_png(output).map_err(|e| CliError::Runtime(format!("{}: {e}", output.display())))
}

fn score_config(args: &ScoringArgs) -> Result<ScoreConfig, CliError> {
    let cfg = ScoreConfig { kind: args.score, tau: args.tau, temperature: args.temperature, neg_count: args.neg_count };
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

/// One line of `cover score` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreLine {
    pub sample_id: String,
    pub split: Split,
    pub score: f64,
}

fn score(logits: &Path, dims: &DimensionSet, args: &ScoringArgs, output: Option<&Path>) -> CliResult {
    let cfg = score_config(args)?;
    let table = read_logits_path(logits).map_err(CliError::runtime)?;
    let scores = score_samples(&table, dims, &cfg).map_err(CliError::runtime)?;
    let mut out = output_writer(output)?;
    let written = scores.into_iter().try_for_each(|s| {
        let line = ScoreLine { sample_id: s.sample_id, split: s.split, score: s.score };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)
    });
    match written.and_then(|()| out.flush().map_err(serde_json::Error::io)) {
        Err(e) if e.io_error_kind() != Some(io::ErrorKind::BrokenPipe) => Err(CliError::runtime(e)),
        _ => Ok(()),
    }
}

/// Scores from NDJSON lines that are either bare numbers or objects with a
/// `score` and an optional `split`; `None` routes by the record's split.
fn read_scores(path: &Path, only: Option<Split>, into: &mut ScoredSplit) -> CliResult {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::runtime)?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| CliError::Runtime(format!("{}:{}: {msg}", path.display(), n + 1));
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| bad(&e.to_string()))?;
        let (score, split) = match &value {
            serde_json::Value::Number(x) => (x.as_f64(), None),
            serde_json::Value::Object(map) => {
                let split = match map.get("split") {
                    None => None,
                    Some(s) => Some(Split::deserialize(s).map_err(|e| bad(&e.to_string()))?),
                };
                (map.get("score").and_then(|s| s.as_f64()), split)
            }
            _ => (None, None),
        };
        let score = score.ok_or_else(|| bad("expected a number or an object with a numeric `score`"))?;
        let target = match (only, split) {
            (Some(want), Some(got)) if want != got => continue,
            (Some(want), _) => want,
            (None, Some(got)) => got,
            (None, None) => return Err(bad("record has no `split`; pass the file with --id or --ood")),
        };
        match target {
            Split::Id => into.id_scores.push(score),
            Split::Ood => into.ood_scores.push(score),
        }
    }
    Ok(())
}

struct EvalArgs {
    scores: Vec<PathBuf>,
    id: Vec<PathBuf>,
    ood: Vec<PathBuf>,
    tpr: f64,
    method: String,
    dataset: String,
    rows: Option<PathBuf>,
    format: Format,
    csv: Option<PathBuf>,
    plot: Option<PathBuf>,
    bins: usize,
}

fn eval(a: EvalArgs) -> CliResult {
    let has_scores = !(a.scores.is_empty() && a.id.is_empty() && a.ood.is_empty());
    if !has_scores && (a.rows.is_none() || a.format == Format::Json) {
        return Err(CliError::usage("nothing to evaluate: give --scores, --id/--ood, or --rows with --format csv"));
    }
    let mut rows = Vec::new();
    let mut result = None;
    if has_scores {
        let mut split = ScoredSplit::default();
        for p in &a.scores {
            read_scores(p, None, &mut split)?;
        }
        for p in &a.id {
            read_scores(p, Some(Split::Id), &mut split)?;
        }
        for p in &a.ood {
            read_scores(p, Some(Split::Ood), &mut split)?;
        }
        let r = evaluate(&split, a.tpr).map_err(CliError::runtime)?;
        rows.push(ReportRow::from_eval(&a.method, &a.dataset, &r));
        if let Some(path) = &a.plot {
            write_file(path, &histogram_svg(&[(&format!("{} / {}", a.method, a.dataset), &split)], a.bins))?;
        }
        result = Some(json!({
            "auroc": r.auroc,
            "fpr_at_tpr": r.fpr_at_tpr,
            "threshold": r.threshold,
            "tpr_target": r.tpr_target,
            "n_id": split.id_scores.len(),
            "n_ood": split.ood_scores.len(),
        }));
    }
    if let Some(path) = &a.rows {
        rows.extend(read_rows(path)?);
    }
    if let Some(path) = &a.csv {
        let file = File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        write_csv(&rows, file)?;
    }
    match (a.format, result) {
        (Format::Json, Some(r)) => print_json(&r),
        _ => write_csv(&rows, io::stdout().lock()),
    }
}

fn parse_candidates(expr: Option<&str>) -> Result<Vec<Corruption>, CliError> {
    match expr {
        None => Ok(list_corruptions()
            .into_iter()
            .flat_map(|(kind, sevs)| sevs.into_iter().map(move |s| Corruption { kind, severity: s }))
            .collect()),
        Some(expr) => expr
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Corruption>().map_err(CliError::usage))
            .collect(),
    }
}

fn select(id: &Path, ood: Option<&Path>, candidates: Option<&str>, k: usize, args: &ScoringArgs) -> CliResult {
    let cfg = score_config(args)?;
    let candidates = parse_candidates(candidates)?;
    if candidates.is_empty() {
        return Err(CliError::usage("no candidate corruptions"));
    }
    let id_table = read_logits_path(id).map_err(CliError::runtime)?;
    let ood_table = match ood {
        Some(p) => Some(read_logits_path(p).map_err(CliError::runtime)?),
        None => None,
    };
    let result = select_corruptions(&id_table, ood_table.as_ref().unwrap_or(&id_table), &candidates, &cfg, k)
        .map_err(CliError::runtime)?;
    let dims: Vec<String> =
        std::iter::once("original".to_string()).chain(result.chosen.iter().map(|c| c.to_string())).collect();
    print_json(&json!({
        "chosen": result.chosen,
        "dims": dims.join(","),
        "baseline": result.baseline,
        "ranked": result.ranked,
    }))
}

fn simulate(params: (f64, f64, f64, f64), delta: ParamDelta, tpr: f64, samples: usize, seed: u64) -> CliResult {
    let before = GmmParams::new(params.0, params.1, params.2, params.3).map_err(CliError::usage)?;
    let after = apply_cover_delta(&before, &delta).map_err(CliError::usage)?;
    let check = verify_lemma(&before, &delta, tpr).map_err(CliError::runtime)?;
    let mc = |p: &GmmParams| -> Result<f64, CliError> {
        Ok(fpr_at_tpr(&sample_gmm(p, samples, samples, seed), tpr).map_err(CliError::runtime)?.fpr)
    };
    print_json(&json!({
        "params_before": before,
        "params_after": after,
        "delta": delta,
        "tpr": tpr,
        "fpr_before": check.fpr_before,
        "fpr_after": check.fpr_after,
        "mc_fpr_before": mc(&before)?,
        "mc_fpr_after": mc(&after)?,
        "declined": check.declined,
        "assumptions": check.assumptions,
        "samples": samples,
        "seed": seed,
    }))
}

fn freq(input: &Path, out_dir: &Path, radius: f64, basis: Basis) -> CliResult {
    let img = load_image(input)?;
    let basis = RadiusBasis::from(basis);
    let split = frequency_split_with(&img, radius, basis).map_err(CliError::runtime)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let save = |img: &Image, name: &str| {
        let path = out_dir.join(name);
        img.save_png(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    };
    save(&split.low.to_image_clipped(), "low.png")?;
    let (high_view, offset, scale) = split.high.to_viewable();
    save(&high_view, "high.png")?;
    let low_clipped = split.low.data.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    let sidecar = json!({
        "input": input.display().to_string(),
        "radius_fraction": split.radius_fraction,
        "radius_px": split.radius_px,
        "basis": basis,
        "low": {"file": "low.png", "mapping": "clipped to [0, 1]", "clipped_values": low_clipped},
        "high": {"file": "high.png", "mapping": "view = (value - offset) * scale", "offset": offset, "scale": scale},
    });
    let text = serde_json::to_string_pretty(&sidecar).map_err(CliError::runtime)?;
    write_file(&out_dir.join("freq.json"), &text)?;
    emit(&format!("radius {}", split.radius_fraction))?;
    emit(&format!("radius_px {}", split.radius_px))?;
    emit(&format!("wrote {}", out_dir.join("low.png").display()))?;
    emit(&format!("wrote {}", out_dir.join("high.png").display()))?;
    emit(&format!("wrote {}", out_dir.join("freq.json").display()))?;
    Ok(())
}

fn bench_synth(n_id: usize, n_ood: usize, gap: f64, tpr: f64, seed: u64, plot: Option<&Path>) -> CliResult {
    let bench = gen_synthetic_benchmark(n_id, n_ood, gap, seed).map_err(CliError::usage)?;
    let r = run_cover_experiment(&bench, tpr).map_err(CliError::runtime)?;
    let (var_original, var_averaged) = id_variances(&bench);
    if let Some(path) = plot {
        let averaged = bench.averaged();
        let panels = [("original", &bench.original), ("corrupted", &bench.corrupted), ("averaged", &averaged)];
        write_file(path, &histogram_svg(&panels, 40))?;
    }
    print_json(&json!({
        "n_id": n_id,
        "n_ood": n_ood,
        "mutation_gap": gap,
        "seed": seed,
        "tpr": tpr,
        "original_only": r.original_only,
        "corrupted_only": r.corrupted_only,
        "averaged": r.averaged,
        "id_variance_original": var_original,
        "id_variance_averaged": var_averaged,
    }))
}

#[allow(clippy::too_many_arguments)]
fn logits(
    train: &Path,
    id_root: &Path,
    ood_root: &Path,
    dims: &DimensionSet,
    image_size: usize,
    scale: f64,
    seed: u64,
    output: Option<&Path>,
) -> CliResult {
    let model = fit_prototype(train, image_size).map_err(CliError::runtime)?.with_scale(scale);
    let mut samples: Vec<(Split, Option<usize>, String, Image)> = Vec::new();
    for (class, items) in load_class_dataset(id_root).map_err(CliError::runtime)? {
        let label = model.class_names.iter().position(|c| *c == class);
        for (sample_id, img) in items {
            samples.push((Split::Id, label, format!("id/{sample_id}"), img));
        }
    }
    let mut ood: Vec<(String, Image)> = load_flat_dataset(ood_root).map_err(CliError::runtime)?;
    ood.extend(load_class_dataset(ood_root).map_err(CliError::runtime)?.into_iter().flat_map(|(_, v)| v));
    samples.extend(ood.into_iter().map(|(sample_id, img)| (Split::Ood, None, format!("ood/{sample_id}"), img)));
    if samples.is_empty() {
        return Err(CliError::Runtime("no images found".into()));
    }

    let mut records = Vec::with_capacity(samples.len() * dims.len());
    for (index, (split, label, sample_id, img)) in samples.into_iter().enumerate() {
        let views = expand_dimensions(&img, dims, image_seed(seed, index as u64)).map_err(CliError::runtime)?;
        for (dim, view) in views {
            let logits = prototype_logits(&model, &view).map_err(CliError::runtime)?.into_inner();
            records.push(LogitRecord { sample_id: sample_id.clone(), split, dim, label, logits });
        }
    }
    let mut out = output_writer(output)?;
    write_logits(&records, &mut out).map_err(CliError::runtime)?;
    out.flush().map_err(CliError::runtime)
}

fn list(json: bool) -> CliResult {
    let catalogue = list_corruptions();
    if json {
        let map: serde_json::Map<String, serde_json::Value> =
            catalogue.iter().map(|(k, sevs)| (k.to_string(), json!(sevs))).collect();
        return print_json(&map);
    }
    for (kind, sevs) in catalogue {
        let sevs: Vec<String> = sevs.iter().map(u8::to_string).collect();
        emit(&format!("{kind}: {}", sevs.join(" ")))?;
    }
    Ok(())
}
