//! One function per subcommand.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use slidegar::corpus::{ingest_corpus, read_qrels, remap_qrels, DedupReport};
use slidegar::dense::EmbeddingTable;
use slidegar::eval::{compare_runs, evaluate, EvalOptions, Gain, Metric, MetricReport, RunFile};
use slidegar::graph::{build_graph_dense, build_graph_lexical};
use slidegar::synth::{generate, SynthSpec};

use crate::config::{PipelineConfig, StrategyKind};
use crate::pipeline::{load_embeddings, load_index, load_store, open, read_judgments, Pipeline};
use crate::{Command, Failure};

type Result<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn write_run(path: &Path, run: &RunFile) -> anyhow::Result<()> {
    let out = create(path)?;
    run.write(out)
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildIndex { corpus, out, dedup } => build_index(&corpus, &out, dedup),
        Command::LoadEmbeddings {
            embeddings,
            corpus,
            out,
            dedup,
            normalize,
        } => load_embeddings_cmd(&embeddings, &corpus, &out, dedup, normalize),
        Command::BuildGraph {
            corpus,
            source,
            k,
            out,
            index,
            embeddings,
            dedup,
        } => build_graph(
            &corpus,
            &source,
            k,
            &out,
            index.as_deref(),
            embeddings.as_deref(),
            dedup,
        ),
        Command::Run { config, jobs } => run(&config, jobs),
        Command::Eval {
            run,
            qrels,
            metrics,
            budget,
            rel_threshold,
            gain,
            dedup_report,
            compare,
            json,
        } => eval(EvalArgs {
            run: &run,
            qrels: &qrels,
            metrics: &metrics,
            budget,
            rel_threshold,
            gain: &gain,
            dedup_report: dedup_report.as_deref(),
            compare: compare.as_deref(),
            json,
        }),
        Command::SweepK {
            config,
            k_list,
            metrics,
            rel_threshold,
            out_dir,
            jobs,
            json,
        } => sweep_k(
            &config,
            &k_list,
            &metrics,
            rel_threshold,
            out_dir.as_deref(),
            jobs,
            json,
        ),
        Command::Synth {
            out,
            spec,
            seed,
            retrieval_gap,
        } => synth(&out, spec.as_deref(), seed, retrieval_gap),
    }
}

fn build_index(corpus: &Path, out: &Path, dedup: bool) -> Result<()> {
    let (store, report) =
        ingest_corpus(open(corpus)?, dedup).with_context(|| format!("corpus {}", corpus.display()))?;
    let index = slidegar::lexical::InvertedIndex::build(&store);
    index
        .write_dir(out, &store)
        .with_context(|| format!("cannot write index to {}", out.display()))?;
    if dedup {
        let mut w = create(&out.join("dedup.jsonl"))?;
        report.write_jsonl(&mut w).context("dedup report")?;
    }
    println!(
        "indexed {} documents, {} terms, {} duplicates dropped",
        store.len(),
        index.vocabulary_size(),
        report.len()
    );
    Ok(())
}

fn load_embeddings_cmd(
    embeddings: &Path,
    corpus: &Path,
    out: &Path,
    dedup: bool,
    normalize: bool,
) -> Result<()> {
    let store = load_store(corpus, dedup)?;
    let file = load_embeddings(embeddings)?;
    let table = EmbeddingTable::from_file(file, &store, normalize)
        .with_context(|| format!("embeddings {}", embeddings.display()))?;
    let path = out.join("embeddings.bin");
    let mut w = create(&path)?;
    table
        .to_file(&store)
        .write(&mut w)
        .context("writing embeddings")?;
    w.flush().context("writing embeddings")?;
    println!(
        "{} vectors of dim {} -> {}",
        table.len(),
        table.dim(),
        path.display()
    );
    Ok(())
}

fn build_graph(
    corpus: &Path,
    source: &str,
    k: usize,
    out: &Path,
    index: Option<&Path>,
    embeddings: Option<&Path>,
    dedup: bool,
) -> Result<()> {
    let store = load_store(corpus, dedup)?;
    let graph = match source {
        "lexical" => {
            let idx = load_index(index, &store)?;
            build_graph_lexical(&idx, &store, k).context("lexical graph")?
        }
        _ => {
            let path = embeddings.ok_or_else(|| usage("--source dense needs --embeddings"))?;
            let table = EmbeddingTable::from_file(load_embeddings(path)?, &store, false)
                .with_context(|| format!("embeddings {}", path.display()))?;
            build_graph_dense(&table, k).context("dense graph")?
        }
    };
    graph
        .write(out, &store)
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "{source} graph over {} documents, k={k} -> {}",
        graph.len(),
        out.display()
    );
    Ok(())
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cfg = PipelineConfig::parse(&text, path).map_err(usage)?;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn run(config: &Path, jobs: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let pipeline = Pipeline::load(cfg)?;
    let (run, telemetry) = pipeline.run_with(&pipeline.cfg.rerank(), jobs)?;
    write_run(&pipeline.cfg.run, &run)?;
    let tpath = pipeline
        .cfg
        .telemetry
        .clone()
        .unwrap_or_else(|| pipeline.cfg.run.with_extension("telemetry.json"));
    write_json(&tpath, &telemetry)?;
    println!(
        "{} queries, {} ranker calls, {} escaped documents -> {}",
        telemetry.queries,
        telemetry.llm_calls,
        telemetry.escaped_docs,
        pipeline.cfg.run.display()
    );
    Ok(())
}

struct EvalArgs<'a> {
    run: &'a Path,
    qrels: &'a Path,
    metrics: &'a str,
    budget: Option<usize>,
    rel_threshold: u32,
    gain: &'a str,
    dedup_report: Option<&'a Path>,
    compare: Option<&'a Path>,
    json: bool,
}

fn read_run(path: &Path) -> anyhow::Result<RunFile> {
    RunFile::read(open(path)?).with_context(|| format!("run {}", path.display()))
}

fn eval(a: EvalArgs<'_>) -> Result<()> {
    let run = read_run(a.run)?;
    let budget = a.budget.unwrap_or_else(|| run.max_depth());
    let metrics = Metric::parse_list(a.metrics, Some(budget)).map_err(|e| usage(e.to_string()))?;
    if metrics.is_empty() {
        return Err(usage("no metrics given"));
    }
    let opts = EvalOptions {
        rel_threshold: a.rel_threshold,
        gain: if a.gain == "exponential" {
            Gain::Exponential
        } else {
            Gain::Linear
        },
    };
    let judgments = match a.dedup_report {
        Some(p) => {
            let report =
                DedupReport::read_jsonl(open(p)?).with_context(|| format!("dedup report {}", p.display()))?;
            let entries =
                read_qrels(open(a.qrels)?).with_context(|| format!("qrels {}", a.qrels.display()))?;
            remap_qrels(&entries, &report)
        }
        None => read_judgments(a.qrels)?,
    };
    if let Some(other) = a.compare {
        let b = read_run(other)?;
        let cmp = compare_runs(&run, &b, &judgments, metrics[0], opts);
        if a.json {
            println!("{}", serde_json::to_string_pretty(&cmp).context("json")?);
        } else {
            print!("{}", cmp.to_text());
        }
        return Ok(());
    }
    let report = evaluate(&run, &judgments, &metrics, opts);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).context("json")?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepRow {
    k: usize,
    llm_calls: u64,
    escaped_docs: usize,
    report: MetricReport,
}

fn sweep_k(
    config: &Path,
    k_list: &[usize],
    metrics: &str,
    rel_threshold: u32,
    out_dir: Option<&Path>,
    jobs: usize,
    json: bool,
) -> Result<()> {
    let cfg = load_config(config)?;
    if cfg.strategy != StrategyKind::Slidegar {
        return Err(usage("sweep-k needs strategy slidegar"));
    }
    if k_list.is_empty() || k_list.contains(&0) {
        return Err(usage("--k-list needs positive depths"));
    }
    let metrics = Metric::parse_list(metrics, Some(cfg.c)).map_err(|e| usage(e.to_string()))?;
    let pipeline = Pipeline::load(cfg)?;
    let judgments = pipeline
        .judgments()
        .ok_or_else(|| usage("sweep-k needs `qrels` in the config"))?;
    let opts = EvalOptions {
        rel_threshold,
        ..Default::default()
    };

    let mut rows = Vec::new();
    for &k in k_list {
        let mut rerank = pipeline.cfg.rerank();
        rerank.truncate_k = k;
        let (run, t) = pipeline.run_with(&rerank, jobs)?;
        if let Some(dir) = out_dir {
            write_run(&dir.join(format!("k{k}.run")), &run)?;
        }
        rows.push(SweepRow {
            k,
            llm_calls: t.llm_calls,
            escaped_docs: t.escaped_docs,
            report: evaluate(&run, &judgments, &metrics, opts),
        });
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).context("json")?);
        return Ok(());
    }
    print!("{}", sweep_table(&rows, &metrics));
    Ok(())
}

fn sweep_table(rows: &[SweepRow], metrics: &[Metric]) -> String {
    let mut out = format!("{:>4}", "k");
    for m in metrics {
        out.push_str(&format!("  {:>10}", m.to_string()));
    }
    out.push_str(&format!("  {:>6}  {:>7}\n", "calls", "escaped"));
    for r in rows {
        out.push_str(&format!("{:>4}", r.k));
        for &m in metrics {
            let v = r.report.mean(m).map_or("-".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!("  {v:>10}"));
        }
        out.push_str(&format!("  {:>6}  {:>7}\n", r.llm_calls, r.escaped_docs));
    }
    // informational only: single-step dips up to 0.01 count as noise
    for &m in metrics.iter().filter(|m| matches!(m, Metric::Recall(_))) {
        let vals: Vec<(usize, f64)> = rows
            .iter()
            .filter_map(|r| r.report.mean(m).map(|v| (r.k, v)))
            .collect();
        let dips: Vec<String> = vals
            .windows(2)
            .filter(|p| p[1].1 < p[0].1 - 0.01)
            .map(|p| format!("k{}->k{}", p[0].0, p[1].0))
            .collect();
        if dips.is_empty() {
            out.push_str(&format!("# trend {m}: non-decreasing\n"));
        } else {
            out.push_str(&format!("# trend {m}: dips at {}\n", dips.join(",")));
        }
    }
    out
}

fn synth(out: &Path, spec: Option<&Path>, seed: Option<u64>, gap: Option<f64>) -> Result<()> {
    let mut s: SynthSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(g) = gap {
        s.retrieval_gap = g;
    }
    s.validate().map_err(|e| usage(e.to_string()))?;
    let col = generate(&s).map_err(|e| usage(e.to_string()))?;
    col.write_dir(out)
        .with_context(|| format!("cannot write {}", out.display()))?;
    println!(
        "{} documents, {} queries, {} judgments -> {}",
        col.documents.len(),
        col.queries.len(),
        col.qrels.len(),
        out.display()
    );
    Ok(())
}
