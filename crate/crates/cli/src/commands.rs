use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use funkbqa::dataset::{self, load_split, random_plan, sample_fewshots, save_split, PlanSizes};
use funkbqa::gateway::{GenerationGateway, HttpBackend, MockBackend, Templates};
use funkbqa::kb::{DeletionPlan, KnowledgeBase};
use funkbqa::metrics::{aggregate, evaluate, records_to_csv};
use funkbqa::pipeline::{Pipeline, PipelineOutcome, QuestionTrace};
use funkbqa::query::LogicalForm;
use funkbqa::retrieval::{Retriever, SubprocessRetriever};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::{BackendKind, Config, RunManifest};
use crate::{EvalArgs, Fatal, RunArgs, Status, VerifyArgs};

fn fatal(e: impl std::fmt::Display) -> Fatal {
    Fatal::new(e.to_string())
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), Fatal> {
    std::fs::write(path, text).map_err(|e| Fatal::new(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Fatal> {
    std::fs::create_dir_all(path).map_err(|e| Fatal::new(format!("{}: {e}", path.display())))
}

fn must_exist(path: &Path, flag: &str) -> Result<(), Fatal> {
    if path.exists() {
        Ok(())
    } else {
        Err(Fatal::new(format!("{flag} {} does not exist", path.display())))
    }
}

fn load_kb(dir: &Path) -> Result<KnowledgeBase, Fatal> {
    must_exist(dir, "--kb")?;
    KnowledgeBase::load_dir(dir).map_err(fatal)
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("records serialise"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Fatal> {
    let text = std::fs::read_to_string(path).map_err(|e| Fatal::new(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Fatal::new(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn kb_validate(dir: &Path) -> Result<Status, Fatal> {
    let kb = load_kb(dir)?;
    kb.validate().map_err(fatal)?;
    println!(
        "{}: {} classes, {} relations, {} entities, {} facts",
        dir.display(),
        kb.classes().count(),
        kb.relations().count(),
        kb.entities().count(),
        kb.facts().len()
    );
    Ok(Status::Ok)
}

pub fn kb_delete(dir: &Path, plan: &Path, out: &Path) -> Result<Status, Fatal> {
    let kb = load_kb(dir)?;
    must_exist(plan, "--plan")?;
    let plan = DeletionPlan::load(plan).map_err(fatal)?;
    let pruned = kb.delete_elements(&plan).map_err(fatal)?;
    create_dir(out)?;
    pruned.save_dir(out).map_err(fatal)?;
    println!("{} facts -> {} facts", kb.facts().len(), pruned.facts().len());
    Ok(Status::Ok)
}

pub fn dataset_inject(
    dir: &Path,
    split: &Path,
    plan: Option<&Path>,
    seed: u64,
    sizes: PlanSizes,
    out: &Path,
) -> Result<Status, Fatal> {
    let kb = load_kb(dir)?;
    must_exist(split, "--dataset")?;
    let split = load_split(split).map_err(fatal)?;
    let plan = match plan {
        Some(p) => {
            must_exist(p, "--plan")?;
            DeletionPlan::load(p).map_err(fatal)?
        }
        None => random_plan(&kb, sizes, seed),
    };
    let (pruned, relabelled) = dataset::inject_unanswerability(&kb, &split, &plan).map_err(fatal)?;
    let kb_out = out.join("kb");
    create_dir(&kb_out)?;
    pruned.save_dir(&kb_out).map_err(fatal)?;
    let plan_text = serde_json::to_string_pretty(&plan).expect("plans serialise") + "\n";
    write(&out.join("plan.json"), plan_text)?;
    save_split(&relabelled, &out.join(format!("{}.jsonl", relabelled.name))).map_err(fatal)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for ex in &relabelled.examples {
        *counts.entry(format!("{}/{}", ex.label, ex.category)).or_default() += 1;
    }
    for (k, n) in counts {
        println!("{k}\t{n}");
    }
    Ok(Status::Ok)
}

pub fn dataset_sample(split: &Path, n_ans: usize, n_unans: usize, seed: u64, out: &Path) -> Result<Status, Fatal> {
    must_exist(split, "--dataset")?;
    let split = load_split(split).map_err(fatal)?;
    let sample = sample_fewshots(&split, n_ans, n_unans, seed).map_err(fatal)?;
    save_split(&sample, out).map_err(fatal)?;
    Ok(Status::Ok)
}

fn gateway(kind: BackendKind, mock: Option<&Path>, config: &Config) -> Result<GenerationGateway, Fatal> {
    match kind {
        BackendKind::Mock => {
            let path = mock.ok_or_else(|| Fatal::new("--backend mock needs --mock <fixture>"))?;
            must_exist(path, "--mock")?;
            Ok(GenerationGateway::mock(MockBackend::load(path).map_err(fatal)?))
        }
        BackendKind::Http => Ok(GenerationGateway::new(HttpBackend::new(config.http.clone()).map_err(fatal)?)),
    }
}

fn templates(config: &Config) -> Result<Templates, Fatal> {
    match &config.templates {
        Some(dir) => {
            must_exist(dir, "templates")?;
            Templates::with_overrides(dir).map_err(fatal)
        }
        None => Ok(Templates::default()),
    }
}

fn unix_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn manifest_name(path: &Path) -> &'static str {
    if path.extension().is_some_and(|e| e == "toml") {
        "manifest.toml"
    } else {
        "manifest.json"
    }
}

pub fn run(args: &RunArgs) -> Result<Status, Fatal> {
    let started = Instant::now();
    let started_at = unix_secs();
    let (mut m, verbatim) = match &args.manifest {
        Some(p) => {
            must_exist(p, "--manifest")?;
            let (m, text) = RunManifest::load(p)?;
            (m, Some((manifest_name(p), text)))
        }
        None => (RunManifest::default(), None),
    };
    if args.config.is_some() {
        m.config.clone_from(&args.config);
    }
    if args.kb.is_some() {
        m.kb.clone_from(&args.kb);
    }
    if args.dataset.is_some() {
        m.dataset.clone_from(&args.dataset);
    }
    if let Some(b) = args.backend {
        m.backend = b;
    }
    if args.mock.is_some() {
        m.mock.clone_from(&args.mock);
    }
    if args.out.is_some() {
        m.out.clone_from(&args.out);
    }
    if let Some(s) = args.seed {
        m.seed = s;
    }
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| Fatal::new(format!("run needs {flag} (flag or manifest field)")))
    };
    let (kb_dir, split_path, out) = (need(&m.kb, "--kb")?, need(&m.dataset, "--dataset")?, need(&m.out, "--out")?);

    let mut config = match &m.config {
        Some(p) => {
            must_exist(p, "--config")?;
            Config::load(p)?
        }
        None => Config::default(),
    };
    if let Some(n) = args.n_iter {
        config.pipeline.fun.n = n;
    }
    if args.answerable_mode {
        config.pipeline.fun.answerable_mode = true;
    }
    if let Some(w) = args.workers {
        config.pipeline.workers = w;
    }
    let kb = load_kb(&kb_dir)?;
    must_exist(&split_path, "--dataset")?;
    let split = load_split(&split_path).map_err(fatal)?;
    let gw = gateway(m.backend, m.mock.as_deref(), &config)?;
    let mut pipeline = Pipeline::new(gw, config.pipeline.clone());
    pipeline.templates = templates(&config)?;
    if let Some(pool) = &config.fewshots.pool {
        must_exist(pool, "fewshots.pool")?;
        let pool = load_split(pool).map_err(fatal)?;
        let shots = sample_fewshots(&pool, config.fewshots.answerable, config.fewshots.unanswerable, m.seed);
        pipeline.fewshots = shots.map_err(fatal)?.examples;
    }
    pipeline.retrievers = config
        .retrievers
        .iter()
        .map(|r| {
            Box::new(SubprocessRetriever {
                program: r.program.clone(),
                args: r.args.clone(),
                caps: config.pipeline.caps,
            }) as Box<dyn Retriever>
        })
        .collect();

    let outcomes = pipeline.run_dataset(&kb, &split);
    let records = evaluate(&split.examples, &outcomes, &kb).map_err(fatal)?;
    let report = aggregate(&records);

    create_dir(&out)?;
    match verbatim {
        Some((name, text)) => write(&out.join(name), text)?,
        None => {
            write(&out.join("manifest.json"), serde_json::to_string_pretty(&m).expect("manifest serialises") + "\n")?
        }
    }
    write(&out.join("outcomes.jsonl"), to_jsonl(&outcomes))?;
    write(&out.join("traces.jsonl"), to_jsonl(outcomes.iter().map(|o| &o.trace)))?;
    write(&out.join("report.json"), report.to_json())?;
    write(&out.join("records.csv"), records_to_csv(&records).map_err(fatal)?)?;
    let failures = outcomes.iter().filter(|o| o.error.is_some()).count();
    let log = format!(
        "started_unix {started_at}\nfinished_unix {}\nelapsed_ms {}\nquestions {}\nfailures {failures}\nworkers {}\n",
        unix_secs(),
        started.elapsed().as_millis(),
        outcomes.len(),
        config.pipeline.workers
    );
    write(&out.join("run.log"), log)?;
    print!("{}", report.to_table());
    for o in outcomes.iter().filter(|o| o.error.is_some()) {
        eprintln!("{}: {}", o.id.as_deref().unwrap_or(&o.question), o.error.as_deref().unwrap_or_default());
    }
    Ok(if failures > 0 { Status::ItemFailures } else { Status::Ok })
}

pub fn eval(args: &EvalArgs) -> Result<Status, Fatal> {
    must_exist(&args.pred, "--pred")?;
    must_exist(&args.gold, "--gold")?;
    let kb = load_kb(&args.kb)?;
    let gold = load_split(&args.gold).map_err(fatal)?;
    let pred: Vec<PipelineOutcome> = read_jsonl(&args.pred)?;
    let records = evaluate(&gold.examples, &pred, &kb).map_err(fatal)?;
    let report = aggregate(&records);
    if let Some(out) = &args.out {
        create_dir(out)?;
        write(&out.join("report.json"), report.to_json())?;
        write(&out.join("records.csv"), records_to_csv(&records).map_err(fatal)?)?;
    }
    print!("{}", report.to_table());
    Ok(Status::Ok)
}

pub fn verify(args: &VerifyArgs) -> Result<Status, Fatal> {
    let kb = load_kb(&args.kb)?;
    let mut config = match &args.config {
        Some(p) => {
            must_exist(p, "--config")?;
            Config::load(p)?
        }
        None => Config::default(),
    };
    if args.answerable_mode {
        config.pipeline.fun.answerable_mode = true;
    }
    let gw = gateway(args.backend, args.mock.as_deref(), &config)?;
    let lf = LogicalForm::from_reply(&args.lf);
    let entities = args.entities.iter().cloned().collect();
    let report = config
        .pipeline
        .suite()
        .verify(&lf, &args.question, &entities, &kb, &gw, &templates(&config)?)
        .map_err(fatal)?;
    for v in report.strong.iter().chain(&report.weak) {
        let mark = if v.passed { "pass" } else { "FAIL" };
        println!("{}\t{}\t{mark}", v.verifier, serde_json::to_value(v.strength).expect("enum").as_str().unwrap_or(""));
        for line in v.feedback.lines() {
            println!("    {line}");
        }
    }
    if let Some(answer) = &report.answer {
        println!("answer\t{}", serde_json::to_string(answer).expect("answers serialise"));
    }
    Ok(if report.all_passed() { Status::Ok } else { Status::ItemFailures })
}

fn render_trace(t: &QuestionTrace) -> String {
    let mut s = String::new();
    if let Some(id) = &t.id {
        let _ = writeln!(s, "id: {id}");
    }
    let _ = writeln!(s, "question: {}", t.question);
    for it in &t.iterations {
        let _ = writeln!(s, "iteration {}{}", it.iteration, if it.admitted { " (admitted)" } else { "" });
        let _ = writeln!(s, "  lf: {}", it.lf.surface());
        for v in &it.verdicts {
            let _ = writeln!(s, "  {} {}", v.verifier, if v.passed { "pass" } else { "FAIL" });
        }
        if let Some(a) = &it.answer {
            let _ = writeln!(s, "  answer: {}", serde_json::to_string(a).expect("answers serialise"));
        }
        for f in &it.feedback {
            for line in f.lines() {
                let _ = writeln!(s, "  > {line}");
            }
        }
    }
    if let Some(c) = &t.consensus {
        let branch = serde_json::to_value(c.branch).expect("enum");
        let _ = write!(s, "consensus: {} over {} candidates", branch.as_str().unwrap_or(""), c.candidates.len());
        if let Some(i) = c.selected_iteration {
            let _ = write!(s, ", selected iteration {i}");
        }
        if c.selection_fallback {
            s.push_str(" (selection reply ignored)");
        }
        s.push('\n');
    }
    if let Some(e) = &t.error {
        let _ = writeln!(s, "error: {e}");
    }
    s
}

pub fn trace_show(path: &Path, id: Option<&str>, index: Option<usize>) -> Result<Status, Fatal> {
    must_exist(path, "--traces")?;
    let traces: Vec<QuestionTrace> = read_jsonl(path)?;
    let found = match (id, index) {
        (Some(id), _) => traces.iter().find(|t| t.id.as_deref() == Some(id)),
        (None, Some(i)) => traces.get(i),
        (None, None) => traces.first(),
    };
    let t = found.ok_or_else(|| Fatal::new(format!("no matching trace in {}", path.display())))?;
    print!("{}", render_trace(t));
    Ok(Status::Ok)
}
