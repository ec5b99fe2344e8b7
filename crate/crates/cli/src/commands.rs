use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use dialign::alignment::{RetrievalMode, Translator};
use dialign::divergence::{sweep_csv, DivergenceReport};
use dialign::embedding::{train, TrainConfig};
use dialign::engagement::{comment_share, monthly_comment_volume, monthly_series, pair_series, paired_t_test, Month};
use dialign::fetch::fetch_comments;
use dialign::ingest::{assign_users, build_corpus, parse_records, CommentRecord, VideoRecord, DEFAULT_MAX_MALFORMED};
use dialign::pipeline::{matrices_of, run_many, vocab_sweep, PipelineRun};
use dialign::synthgen::{evaluate_recovery, generate, GroundTruth, SynthConfig};
use dialign::vocab::{stopwords, VocabRole, Vocabulary};
use dialign::Error;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::svg::{Chart, Series};
use crate::workspace::{
    csv_body, read_space, read_vocab, write_file_with_sidecar, DirLock, Workspace, Wrapped, CORPORA, ENGAGEMENT, MAPS,
    REPORTS,
};
use crate::Command;

pub fn run(command: Command, mut config: PipelineConfig) -> CliResult<()> {
    match command {
        Command::Ingest {
            comments,
            channels,
            year,
            include_replies,
            no_user_filter,
        } => {
            if comments.is_some() {
                config.inputs.comments = comments;
            }
            if !channels.is_empty() {
                config.channels = channels;
            }
            if year.is_some() {
                config.period.year = year;
            }
            config.include_replies |= include_replies;
            config.user_filter &= !no_user_filter;
            ingest(&Workspace::writer(config, "ingest")?)
        }
        Command::Fetch {
            endpoint,
            channel,
            pages,
        } => fetch(&Workspace::writer(config, "fetch")?, &endpoint, &channel, pages),
        Command::Balance => balance(&Workspace::writer(config, "balance")?),
        Command::Train { corpus, output } => match (corpus, output) {
            (Some(c), Some(o)) => train_file(&config, &c, &o),
            _ => {
                let ws = Workspace::writer(config, "train")?;
                let run = ws.ensure_run()?;
                for s in &run.spaces {
                    println!("{}: {} tokens x {} dimensions", s.language_id, s.len(), s.dimension());
                }
                Ok(())
            }
        },
        Command::Align {
            src,
            tgt,
            source,
            target,
            output,
        } => align(Workspace::writer(config, "align")?, src, tgt, source, target, output),
        Command::Translate {
            map,
            src,
            tgt,
            word,
            k,
            vocab,
            csls,
        } => {
            let mode = csls.map_or(config.analysis.mode, |k| RetrievalMode::Csls { k });
            translate(&map, &src, &tgt, &word, k, vocab.as_deref(), mode)
        }
        Command::Similarity { source, target } => {
            let ws = Workspace::writer(config, "similarity")?;
            let run = ws.ensure_run()?;
            for (i, j) in pairs(&run, source, target)? {
                let report = run.report(i, j)?;
                write_report(&ws, &report)?;
                print!(
                    "{} -> {}: similarity {:.2}%",
                    report.source_id, report.target_id, report.similarity
                );
                match report.similarity_neighborhood {
                    Some(n) => println!(", neighborhood {n:.2}"),
                    None => println!(),
                }
            }
            Ok(())
        }
        Command::Misaligned { source, target, limit } => {
            let ws = Workspace::writer(config, "misaligned")?;
            misaligned(&ws, source, target, limit)
        }
        Command::Matrix => {
            let ws = Workspace::writer(config, "matrix")?;
            let m = ws.ensure_run()?.matrix()?;
            ws.write_csv("matrix.csv", &m.to_csv())?;
            print!("{}", m.to_csv());
            Ok(())
        }
        Command::Sweep { sizes, runs } => {
            if let Some(s) = sizes {
                config.sweep_sizes = s;
            }
            if let Some(r) = runs {
                config.runs = r;
            }
            sweep(&Workspace::writer(config, "sweep")?)
        }
        Command::Multirun { runs } => {
            if let Some(r) = runs {
                config.runs = r;
            }
            multirun(&Workspace::writer(config, "multirun")?)
        }
        Command::Engagement {
            videos,
            comments,
            channels,
            year,
            min_videos,
        } => {
            if videos.is_some() {
                config.inputs.videos = videos;
            }
            if comments.is_some() {
                config.inputs.comments = comments;
            }
            if !channels.is_empty() {
                config.channels = channels;
            }
            if year.is_some() {
                config.period.year = year;
            }
            if let Some(m) = min_videos {
                config.min_videos = m;
            }
            engagement(&Workspace::writer(config, "engagement")?)
        }
        Command::Synth {
            pairs,
            phrases,
            tokens,
            vocab_size,
            topics,
        } => {
            let planted = phrases
                .iter()
                .map(|p| {
                    p.split_once('|')
                        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                        .ok_or_else(|| CliError::Usage(format!("--phrase `{p}` is not of the form `a|b`")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let synth = SynthConfig {
                vocab_size,
                topics,
                random_pairs: pairs,
                planted,
                seed: config.seed,
                ..SynthConfig::default()
            }
            .with_token_budget(tokens);
            synth_cmd(&Workspace::writer(config, "synth")?, &synth)
        }
        Command::Report => report(&Workspace::writer(config, "report")?),
    }
}

fn read_jsonl<R: dialign::ingest::Record>(path: &Path) -> CliResult<Vec<R>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let parsed = parse_records::<R, _>(BufReader::new(file), DEFAULT_MAX_MALFORMED)?;
    for e in &parsed.errors {
        eprintln!("warning: {}:{}: {}", path.display(), e.line, e.reason);
    }
    Ok(parsed.records)
}

fn ingest(ws: &Workspace) -> CliResult<()> {
    let path = ws
        .config
        .inputs
        .comments
        .as_ref()
        .ok_or_else(|| CliError::Usage("ingest needs --comments or inputs.comments in the config".into()))?;
    if ws.config.channels.is_empty() {
        return Err(CliError::Usage("ingest needs at least one --channel".into()));
    }
    let comments: Vec<CommentRecord> = read_jsonl(path)?;
    let period = ws.config.period.resolve()?;
    let channels = &ws.config.channels;
    let assignment = ws.config.user_filter.then(|| assign_users(&comments, channels, period));
    for ch in channels {
        let corpus = build_corpus(&comments, ch, period, assignment.as_ref(), ws.config.include_replies)?;
        ws.write_corpus(&format!("{CORPORA}/{ch}.txt"), &corpus)?;
        println!("{ch}: {} documents, {} tokens", corpus.len(), corpus.token_count());
    }
    if let Some(a) = &assignment {
        let mut users: BTreeMap<String, usize> = channels.iter().map(|c| (c.clone(), a.users_on(c))).collect();
        users.insert("unassigned".into(), a.assigned.values().filter(|c| c.is_none()).count());
        ws.write_json(&format!("{CORPORA}/users.json"), &users)?;
    }
    Ok(())
}

fn fetch(ws: &Workspace, endpoint: &str, channel: &str, pages: usize) -> CliResult<()> {
    let token = std::env::var("DIALIGN_FETCH_TOKEN").ok();
    let records = fetch_comments(endpoint, channel, pages, token.as_deref())?;
    ws.write_with_sidecar(&format!("raw/{channel}.jsonl"), None, |w| {
        use std::io::Write;
        for r in &records {
            writeln!(w, "{}", serde_json::to_string(r).expect("record serializes"))?;
        }
        w.flush()?;
        Ok(())
    })?;
    println!("{channel}: {} comments", records.len());
    Ok(())
}

fn balance(ws: &Workspace) -> CliResult<()> {
    let (prepared, fresh) = ws.ensure_prepared()?;
    for c in &prepared.corpora {
        println!("{}: {} documents, {} tokens", c.language_id, c.len(), c.token_count());
    }
    println!(
        "vocabulary: {} source, {} target{}",
        prepared.source_vocab.len(),
        prepared.target_vocab.len(),
        if fresh { "" } else { " (cached)" }
    );
    Ok(())
}

fn train_file(config: &PipelineConfig, corpus: &Path, output: &Path) -> CliResult<()> {
    let dir = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let _lock = DirLock::acquire(&dir)?;
    let stem = corpus.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    let corpus = Workspace::read_corpus(corpus, stem)?;
    let train_config = TrainConfig {
        seed: config.seed,
        ..config.analysis.train.clone()
    };
    let space = train(&corpus, &train_config)?;
    let ws = Workspace::reader(config.clone(), "train");
    write_file_with_sidecar(output, &ws.provenance(None), |w| space.save(w))?;
    println!(
        "{}: {} tokens x {} dimensions",
        space.language_id,
        space.len(),
        space.dimension()
    );
    Ok(())
}

fn align(
    ws: Workspace,
    src: Option<std::path::PathBuf>,
    tgt: Option<std::path::PathBuf>,
    source: Option<String>,
    target: Option<String>,
    output: Option<std::path::PathBuf>,
) -> CliResult<()> {
    use dialign::alignment::{build_seed_lexicon, fit};
    let (src, tgt) = match (src, tgt) {
        (Some(s), Some(t)) => (read_space(&s, "source")?, read_space(&t, "target")?),
        _ => {
            let run = ws.ensure_run()?;
            let ids = run.ids();
            let i = source.as_deref().map_or(Ok(0), |s| run.index_of(s))?;
            let j = target
                .as_deref()
                .map_or(Ok(usize::from(ids.len() > 1)), |t| run.index_of(t))?;
            (run.spaces[i].clone(), run.spaces[j].clone())
        }
    };
    let lexicon = build_seed_lexicon(&src, &tgt, stopwords())?;
    let map = fit(&src, &tgt, &lexicon)?;
    let path = match output {
        Some(p) => {
            write_file_with_sidecar(&p, &ws.provenance(None), |w| map.save(w))?;
            p
        }
        None => ws.write_with_sidecar(
            &format!("{MAPS}/{}__{}.map", src.language_id, tgt.language_id),
            None,
            |w| map.save(w),
        )?,
    };
    println!(
        "{} -> {}: {} seed pairs ({} dropped), orthogonality error {:.2e}, written to {}",
        src.language_id,
        tgt.language_id,
        lexicon.len(),
        lexicon.dropped.len(),
        map.orthogonality_error(),
        path.display()
    );
    for w in &map.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn translate(
    map: &Path,
    src: &Path,
    tgt: &Path,
    word: &str,
    k: usize,
    vocab: Option<&Path>,
    mode: RetrievalMode,
) -> CliResult<()> {
    let file = fs::File::open(map).map_err(|e| CliError::io(map, e))?;
    let map = dialign::alignment::AlignmentMap::load(BufReader::new(file))?;
    let src = read_space(src, "source")?;
    let tgt = read_space(tgt, "target")?;
    let vocab = match vocab {
        Some(p) => read_vocab(p, VocabRole::Target)?,
        None => Vocabulary::new(
            tgt.tokens()
                .iter()
                .zip(tgt.counts())
                .filter(|(t, _)| !stopwords().contains(t))
                .map(|(t, &n)| (t.clone(), n))
                .collect(),
            VocabRole::Target,
        ),
    };
    let result = Translator::new(&map, &src, &tgt, &vocab, mode)?
        .with_alternatives(k)
        .translate(word)?;
    println!(
        "{} -> {} (cosine {:.4}, score {:.4})",
        result.source, result.target, result.cosine, result.score
    );
    for (rank, (t, s)) in result.alternatives.iter().enumerate() {
        println!("{:>3} {t} {s:.4}", rank + 1);
    }
    Ok(())
}

fn pairs(run: &PipelineRun, source: Option<String>, target: Option<String>) -> CliResult<Vec<(usize, usize)>> {
    if let (Some(s), Some(t)) = (source, target) {
        let (i, j) = (run.index_of(&s)?, run.index_of(&t)?);
        if i == j {
            return Err(CliError::Usage("source and target must differ".into()));
        }
        return Ok(vec![(i, j)]);
    }
    let n = run.spaces.len();
    Ok((0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect())
}

fn report_stem(r: &DivergenceReport) -> String {
    format!("{REPORTS}/{}__{}", r.source_id, r.target_id)
}

fn write_report(ws: &Workspace, report: &DivergenceReport) -> CliResult<()> {
    ws.write_json(&format!("{}.json", report_stem(report)), report)?;
    Ok(())
}

fn misaligned(ws: &Workspace, source: Option<String>, target: Option<String>, limit: usize) -> CliResult<()> {
    let run = ws.ensure_run()?;
    let truth: Option<GroundTruth> = fs::read_to_string(ws.path("truth.json"))
        .ok()
        .map(|t| serde_json::from_str::<Wrapped<GroundTruth>>(&t).map(|w| w.data))
        .transpose()
        .map_err(|e| {
            CliError::Core(Error::Format {
                line: 1,
                message: format!("truth.json: {e}"),
            })
        })?;
    for (i, j) in pairs(&run, source, target)? {
        let report = run.report(i, j)?;
        write_report(ws, &report)?;
        ws.write_csv(
            &format!("{}.misaligned.csv", report_stem(&report)),
            &report.misaligned_csv(),
        )?;
        println!(
            "{} -> {}: {} misaligned of {}",
            report.source_id, report.target_id, report.misaligned_count, report.evaluated
        );
        for p in report.misaligned.iter().take(limit) {
            println!("  {} -> {} ({:.4})", p.source, p.target, p.cosine);
        }
        if let Some(truth) = &truth {
            if let Ok(rec) = evaluate_recovery(&report, truth) {
                ws.write_json(&format!("{}.recovery.json", report_stem(&report)), &rec)?;
                println!(
                    "  planted recall {:.3}, partner precision {:.3}, false rate {:.3}",
                    rec.recall, rec.partner_precision, rec.false_rate
                );
            }
        }
    }
    Ok(())
}

fn sweep(ws: &Workspace) -> CliResult<()> {
    let sizes = ws.config.sweep_sizes.clone();
    let runs = if ws.config.runs <= 1 {
        vec![ws.ensure_run()?]
    } else {
        let mut analysis = ws.config.analysis.clone();
        analysis.source_size = analysis.source_size.max(sizes.iter().copied().max().unwrap_or(0));
        run_many(&ws.raw_corpora()?, &analysis, ws.config.seed, ws.config.runs)?
    };
    let points = vocab_sweep(&runs, &sizes)?;
    ws.write_csv("sweep.csv", &sweep_csv(&points))?;
    let chart = Chart {
        title: "Similarity by source vocabulary size",
        x_label: "source vocabulary size",
        y_label: "similarity (%)",
        x_ticks: sizes.iter().map(|&s| (s as f64, s.to_string())).collect(),
        series: vec![Series {
            label: "mean".into(),
            points: points.iter().map(|p| (p.source_size as f64, p.similarity)).collect(),
        }],
    };
    ws.write_svg("sweep.svg", &chart.render())?;
    print!("{}", sweep_csv(&points));
    Ok(())
}

fn multirun(ws: &Workspace) -> CliResult<()> {
    if ws.config.runs < 2 {
        return Err(CliError::Usage("multirun needs at least two runs".into()));
    }
    let runs = run_many(&ws.raw_corpora()?, &ws.config.analysis, ws.config.seed, ws.config.runs)?;
    let stats = matrices_of(&runs)?;
    ws.write_csv("multirun.csv", &stats.to_csv())?;
    ws.write_json("multirun.json", &stats)?;
    print!("{}", stats.to_csv());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PairedTest {
    a: String,
    b: String,
    months: usize,
    t: Option<f64>,
    p: Option<f64>,
    df: Option<usize>,
    note: Option<String>,
}

fn engagement(ws: &Workspace) -> CliResult<()> {
    let path = ws
        .config
        .inputs
        .videos
        .as_ref()
        .ok_or_else(|| CliError::Usage("engagement needs --videos or inputs.videos in the config".into()))?;
    let videos: Vec<VideoRecord> = read_jsonl(path)?;
    let mut channels = ws.config.channels.clone();
    if channels.is_empty() {
        channels = videos
            .iter()
            .map(|v| v.channel_id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
    }
    let period = ws.config.period.resolve()?;
    let series: Vec<_> = channels
        .iter()
        .map(|c| monthly_series(&videos, c, period, ws.config.min_videos))
        .collect();
    for s in &series {
        ws.write_csv(&format!("{ENGAGEMENT}/{}.csv", s.channel_id), &s.to_csv())?;
        println!(
            "{}: {} months, {} videos without reactions",
            s.channel_id,
            s.points.len(),
            s.undefined
        );
    }

    let months: Vec<Month> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.month))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = |m: Month| (m.year as i64 * 12 + m.month as i64 - 1) as f64;
    let step = (months.len() / 8).max(1);
    let chart = Chart {
        title: "Monthly disagreement",
        x_label: "month (UTC)",
        y_label: "mean dislike share",
        x_ticks: months
            .iter()
            .step_by(step)
            .map(|&m| (index(m), m.to_string()))
            .collect(),
        series: series
            .iter()
            .map(|s| Series {
                label: s.channel_id.clone(),
                points: s.points.iter().map(|p| (index(p.month), p.value)).collect(),
            })
            .collect(),
    };
    ws.write_svg(&format!("{ENGAGEMENT}/disagreement.svg"), &chart.render())?;

    let mut tests = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let (shared, a, b) = pair_series(&series[i], &series[j]);
            let outcome = paired_t_test(&a, &b);
            let (t, p, df, note) = match outcome {
                Ok(r) => (Some(r.t), Some(r.p), Some(r.df), None),
                Err(e) => (None, None, None, Some(format!("{}: {e}", e.kind()))),
            };
            tests.push(PairedTest {
                a: series[i].channel_id.clone(),
                b: series[j].channel_id.clone(),
                months: shared.len(),
                t,
                p,
                df,
                note,
            });
        }
    }
    ws.write_json(&format!("{ENGAGEMENT}/ttest.json"), &tests)?;

    if let Some(cpath) = &ws.config.inputs.comments {
        let comments: Vec<CommentRecord> = read_jsonl(cpath)?;
        for c in &channels {
            let volume = monthly_comment_volume(&comments, c, period);
            let mut csv = String::from("month,comments\n");
            for (m, n) in volume {
                csv.push_str(&format!("{m},{n}\n"));
            }
            ws.write_csv(&format!("{ENGAGEMENT}/volume_{c}.csv"), &csv)?;
        }
        if let (Some(year), [a, b, ..]) = (ws.config.period.year, channels.as_slice()) {
            let share = comment_share(&comments, a, b, year)?;
            ws.write_csv(&format!("{ENGAGEMENT}/comment_share_{year}.csv"), &share.to_csv())?;
        }
    }
    Ok(())
}

fn synth_cmd(ws: &Workspace, synth: &SynthConfig) -> CliResult<()> {
    let (a, b, truth) = generate(synth)?;
    for c in [&a, &b] {
        ws.write_corpus(&format!("{CORPORA}/{}.txt", c.language_id), c)?;
        println!("{}: {} documents, {} tokens", c.language_id, c.len(), c.token_count());
    }
    ws.write_json("truth.json", &truth)?;
    for (x, y) in &truth.planted {
        println!("planted: {x} <-> {y}");
    }
    Ok(())
}

fn read_artifact(ws: &Workspace, rel: &str) -> Option<String> {
    fs::read_to_string(ws.path(rel)).ok()
}

fn sorted_files(dir: &Path, suffix: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().to_str().map(str::to_string))
                .filter(|n| n.ends_with(suffix))
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

fn csv_table(text: &str) -> String {
    let mut out = String::new();
    for (k, line) in csv_body(text).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
        if k == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(cells.len())));
        }
    }
    out
}

fn report(ws: &Workspace) -> CliResult<()> {
    let mut md = String::from("# Divergence report\n");
    let mut sections = 0;

    let reports = sorted_files(&ws.path(REPORTS), ".json")
        .into_iter()
        .filter(|n| !n.ends_with(".recovery.json"))
        .collect::<Vec<_>>();
    if !reports.is_empty() {
        sections += 1;
        md.push_str("\n## Directed similarity\n\n| source | target | similarity | neighborhood | evaluated | misaligned | skipped |\n|---|---|---|---|---|---|---|\n");
        for name in &reports {
            let text = read_artifact(ws, &format!("{REPORTS}/{name}")).unwrap_or_default();
            let r: Wrapped<DivergenceReport> = serde_json::from_str(&text).map_err(|e| {
                CliError::Core(Error::Format {
                    line: 1,
                    message: format!("{name}: {e}"),
                })
            })?;
            let r = r.data;
            let n = r.similarity_neighborhood.map(|v| format!("{v:.2}")).unwrap_or_default();
            md.push_str(&format!(
                "| {} | {} | {:.2} | {n} | {} | {} | {} |\n",
                r.source_id, r.target_id, r.similarity, r.evaluated, r.misaligned_count, r.skipped
            ));
        }
        for name in &reports {
            let stem = name.trim_end_matches(".json");
            if let Some(csv) = read_artifact(ws, &format!("{REPORTS}/{stem}.misaligned.csv")) {
                md.push_str(&format!("\n### Misaligned pairs: {}\n\n", stem.replace("__", " -> ")));
                let head: String = csv_body(&csv).take(21).map(|l| format!("{l}\n")).collect();
                md.push_str(&csv_table(&head));
            }
            if let Some(rec) = read_artifact(ws, &format!("{REPORTS}/{stem}.recovery.json")) {
                let v: serde_json::Value = serde_json::from_str(&rec).unwrap_or_default();
                let d = &v["data"];
                md.push_str(&format!(
                    "\nPlanted recall {}, partner precision {}, false rate {}\n",
                    d["recall"], d["partner_precision"], d["false_rate"]
                ));
            }
        }
    }
    for (file, title) in [
        ("matrix.csv", "Similarity matrix"),
        ("multirun.csv", "Multi-run similarity (mean ± std)"),
        ("sweep.csv", "Source vocabulary sweep"),
    ] {
        if let Some(text) = read_artifact(ws, file) {
            sections += 1;
            md.push_str(&format!("\n## {title}\n\n{}", csv_table(&text)));
        }
    }
    if let Some(text) = read_artifact(ws, &format!("{ENGAGEMENT}/ttest.json")) {
        sections += 1;
        let tests: Wrapped<Vec<PairedTest>> = serde_json::from_str(&text).map_err(|e| {
            CliError::Core(Error::Format {
                line: 1,
                message: format!("ttest.json: {e}"),
            })
        })?;
        md.push_str("\n## Disagreement\n\n| a | b | months | t | p | df |\n|---|---|---|---|---|---|\n");
        for t in tests.data {
            let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                t.a,
                t.b,
                t.months,
                f(t.t),
                f(t.p),
                t.df.map(|d| d.to_string()).unwrap_or_else(|| "n/a".into())
            ));
        }
        for name in sorted_files(&ws.path(ENGAGEMENT), ".csv") {
            if name.starts_with("comment_share_") {
                let text = read_artifact(ws, &format!("{ENGAGEMENT}/{name}")).unwrap_or_default();
                md.push_str(&format!(
                    "\n### {}\n\n{}",
                    name.trim_end_matches(".csv"),
                    csv_table(&text)
                ));
            }
        }
    }
    if sections == 0 {
        return Err(CliError::Usage(format!(
            "nothing to report in {}; run similarity, matrix, sweep, multirun or engagement first",
            ws.root.display()
        )));
    }
    ws.write_markdown("report.md", &md)?;
    println!("wrote {}", ws.path("report.md").display());
    Ok(())
}
