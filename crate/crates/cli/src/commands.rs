use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use relcert::certify::Analysis;
use relcert::closure::ClosureTarget;
use relcert::obstruction::{falsify_classifier, make_family, verify_bundle, SearchConfig, Target, WitnessBundle};
use relcert::pairwise::{GraphMode, PairwiseSlice, TargetKind};
use relcert::reductions::{compress_profiles, compress_slice, induce_problem, present_as_bits, transfer_check, BitMode, SpecDocument};
use relcert::stability::{gap_profile, global_stability_certificate, witness_preservation, Verdict, Witness};
use relcert::taxonomy::{classify_role, detect, landscape_table, table_integrity, Detection, Detector};
use relcert::{
    apply_trace, replay, verify_invariance, ClosureStep, ClosureTrace, Error, Limits, Result,
};

use crate::io::{self, Instance};

pub struct Report {
    pub human: String,
    pub result: Value,
    /// Seed actually used, when it did not come from the command line.
    pub seed: Option<u64>,
    /// Raised after the report is printed.
    pub failure: Option<Error>,
}

impl Report {
    fn new(human: String, result: impl Serialize) -> Self {
        Report {
            human,
            result: serde_json::to_value(result).expect("reports serialize"),
            seed: None,
            failure: None,
        }
    }
}

fn set<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let parts: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

#[derive(Serialize)]
struct ClassReport {
    optimizers: Vec<String>,
    states: Vec<String>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    kind: &'static str,
    states: usize,
    classes: Vec<ClassReport>,
    relevant: BTreeSet<usize>,
    minimal_sufficient: BTreeSet<usize>,
    srank: usize,
    quotient_count: usize,
    class_bound: u128,
    bound_holds: bool,
}

pub fn analyze(file: &Path, limits: &Limits) -> Result<Report> {
    let inst = io::load_instance(file)?;
    let problem = match &inst {
        Instance::Problem(p) => p.clone(),
        Instance::Slice(s) => s.expand(limits)?,
    };
    let analysis = Analysis::new(&problem, limits)?;
    let profile = analysis.profile()?;
    let space = problem.space();
    let classes: Vec<ClassReport> = analysis
        .quotient()
        .blocks()
        .into_iter()
        .zip(&analysis.quotient().classes)
        .map(|(states, opt)| ClassReport {
            optimizers: opt.clone(),
            states: states.iter().map(|&s| space.label(s)).collect(),
        })
        .collect();
    let mut h = String::new();
    writeln!(h, "{} with {} states", inst.tier(), problem.state_count()).unwrap();
    writeln!(h, "quotient classes: {}", profile.quotient_count).unwrap();
    for c in &classes {
        writeln!(h, "  {} -> {}", set(&c.states), set(&c.optimizers)).unwrap();
    }
    writeln!(h, "relevant: {}", set(&profile.relevant)).unwrap();
    writeln!(h, "minimal sufficient: {}", set(&profile.minimal_sufficient)).unwrap();
    writeln!(h, "srank: {}", profile.srank).unwrap();
    let holds = profile.quotient_count as u128 <= profile.class_bound;
    writeln!(
        h,
        "m = {} <= {} from the relevant coordinates: {}",
        profile.quotient_count,
        profile.class_bound,
        if holds { "holds" } else { "fails" }
    )
    .unwrap();
    if profile.relevant.is_empty() && space.is_product() {
        writeln!(h, "empty set sufficient; all coordinates irrelevant").unwrap();
    }
    let report = AnalyzeReport {
        kind: inst.tier(),
        states: problem.state_count(),
        classes,
        relevant: profile.relevant,
        minimal_sufficient: profile.minimal_sufficient,
        srank: profile.srank,
        quotient_count: profile.quotient_count,
        class_bound: profile.class_bound,
        bound_holds: holds,
    };
    Ok(Report::new(h, report))
}

fn bundle_summary(b: &WitnessBundle) -> String {
    let mut h = String::new();
    let name = match &b.kind {
        Target::Kind(k) => k.name().to_string(),
        Target::Scheme(_) => "scheme".to_string(),
    };
    writeln!(h, "target: {name}").unwrap();
    writeln!(h, "base: d = {}, actions {}", b.base.dim(), set(b.base.actions())).unwrap();
    let steps: Vec<&str> = b.trace.steps.iter().map(ClosureStep::name).collect();
    writeln!(h, "trace: {}", steps.join(", ")).unwrap();
    writeln!(h, "predicate: {} on base, {} on translate", b.report.base_value, b.report.translated_value).unwrap();
    writeln!(
        h,
        "certification: {} classes, relevant {}",
        b.report.quotient_classes,
        set(&b.report.relevant)
    )
    .unwrap();
    h
}

pub fn witness(kind: TargetKind, n: usize, limits: &Limits) -> Result<Report> {
    let bundle = make_family(kind, n, limits)?;
    Ok(Report::new(bundle_summary(&bundle), &bundle))
}

pub fn verify(file: &Path, limits: &Limits) -> Result<Report> {
    let bundle = io::load_bundle(file)?;
    let v = verify_bundle(&bundle, limits)?;
    let mut h = String::new();
    for c in &v.checks {
        match &c.detail {
            Some(d) => writeln!(h, "{}: FAIL ({d})", c.name).unwrap(),
            None => writeln!(h, "{}: ok", c.name).unwrap(),
        }
    }
    writeln!(h, "bundle {}", if v.passed() { "verified" } else { "rejected" }).unwrap();
    let mut report = Report::new(h, serde_json::json!({ "passed": v.passed(), "checks": v.checks }));
    if !v.passed() {
        report.failure = Some(Error::Verification(v.failures().join("; ")));
    }
    Ok(report)
}

pub fn graph(file: &Path, mode: GraphMode, limits: &Limits) -> Result<Report> {
    let slice = io::load_slice(file)?;
    let g = slice.interaction_graph(mode, limits)?;
    g.verify(&slice)?;
    let dot = g.to_dot();
    Ok(Report::new(dot.clone(), serde_json::json!({ "graph": g, "dot": dot })))
}

/// A bare list of steps, or a full trace whose transports are re-derived.
#[derive(Deserialize)]
#[serde(untagged)]
enum TraceFile {
    Steps(Vec<ClosureStep>),
    Trace(ClosureTrace),
}

#[derive(Serialize)]
struct TransformReport<'a, T: Serialize> {
    object: &'a T,
    trace: &'a ClosureTrace,
    invariance: relcert::InvarianceReport,
}

fn run_transform<T: ClosureTarget + Serialize>(base: &T, file: TraceFile, limits: &Limits) -> Result<Report> {
    let (result, trace) = match file {
        TraceFile::Steps(steps) => apply_trace(base, &steps, limits)?,
        TraceFile::Trace(trace) => {
            let result = replay(base, &trace, None, limits)?;
            (result, trace)
        }
    };
    let invariance = verify_invariance(base, &result, &trace, limits)?;
    let mut h = String::new();
    let steps: Vec<&str> = trace.steps.iter().map(ClosureStep::name).collect();
    writeln!(h, "applied {} step(s): {}", steps.len(), steps.join(", ")).unwrap();
    writeln!(
        h,
        "result: d = {}, actions {}",
        result.dimension(),
        set(result.action_ids())
    )
    .unwrap();
    writeln!(
        h,
        "invariance: {} subsets{}, {} optimizer states, new coordinates {} irrelevant",
        invariance.subsets_checked,
        if invariance.sampled { " (sampled)" } else { "" },
        invariance.optimizer_states_checked,
        set(&invariance.new_coordinates)
    )
    .unwrap();
    let h = h + "invariance holds\n";
    Ok(Report::new(
        h,
        TransformReport {
            object: &result,
            trace: &trace,
            invariance,
        },
    ))
}

pub fn transform(file: &Path, trace: &Path, limits: &Limits) -> Result<Report> {
    let steps: TraceFile = io::load(trace)?;
    match io::load_instance(file)? {
        Instance::Problem(p) => run_transform(&p, steps, limits),
        Instance::Slice(s) => run_transform(&s, steps, limits),
    }
}

pub fn induce(file: &Path, limits: &Limits) -> Result<Report> {
    let doc: SpecDocument = io::load(file)?;
    let space = doc.state_space()?;
    let problem = induce_problem(&doc.spec, &space, limits)?;
    let transfer = transfer_check(&doc.spec, &space, limits)?;
    let analysis = Analysis::new(&problem, limits)?;
    let mut h = String::new();
    for s in 0..problem.state_count() {
        let opt = relcert::optimizer_set(&problem, s)?;
        let shown: Vec<&str> = opt
            .iter()
            .map(|a| if a == relcert::reductions::FAILURE_TOKEN { relcert::reductions::FAILURE_DISPLAY } else { a })
            .collect();
        writeln!(h, "Adm({}) = {}", space.label(s), set(shown)).unwrap();
    }
    writeln!(h, "classes: {}", analysis.quotient().len()).unwrap();
    writeln!(h, "relevant: {}", set(&transfer.relevant)).unwrap();
    if transfer.totalized {
        writeln!(h, "empty fibers totalized with the failure token").unwrap();
    }
    writeln!(h, "relation-level and problem-level certification agree").unwrap();
    Ok(Report::new(
        h,
        serde_json::json!({ "problem": problem.to_document(), "transfer": transfer }),
    ))
}

pub fn compress(file: &Path, limits: &Limits) -> Result<Report> {
    let (object, map, before, after) = match io::load_instance(file)? {
        Instance::Problem(p) => {
            let (c, map) = compress_profiles(&p)?;
            let n = (p.actions().len(), c.actions().len());
            (serde_json::to_value(c.to_document()).expect("serializes"), map, n.0, n.1)
        }
        Instance::Slice(s) => {
            let (c, map) = compress_slice(&s, limits)?;
            let n = (s.actions().len(), c.actions().len());
            (serde_json::to_value(c.to_document()).expect("serializes"), map, n.0, n.1)
        }
    };
    let mut h = format!("{before} actions -> {after} profiles\n");
    for class in &map.classes {
        writeln!(h, "  {}", set(class)).unwrap();
    }
    Ok(Report::new(h, serde_json::json!({ "object": object, "classes": map.classes })))
}

pub fn bits(file: &Path, mode: BitMode, limits: &Limits) -> Result<Report> {
    let problem = io::load_problem(file, limits)?;
    let pres = present_as_bits(&problem, mode, limits)?;
    let original = Analysis::new(&problem, limits)?.quotient().blocks();
    let pulled = pres.pulled_back_quotient(limits)?;
    if pulled != original {
        return Err(Error::TheoryViolation("bit presentation changed the quotient".into()));
    }
    let h = format!(
        "{} states -> {} bits ({} padding states); quotient preserved\n",
        problem.state_count(),
        pres.problem.dim(),
        pres.padding_states().len()
    );
    Ok(Report::new(
        h,
        serde_json::json!({
            "mode": pres.mode,
            "problem": pres.problem.to_document(),
            "encode": pres.encode,
            "decode": pres.decode,
            "padding": pres.padding_states(),
        }),
    ))
}

pub fn stability(base: &Path, perturbed: &Path, witness: Option<&Path>, verify: bool, limits: &Limits) -> Result<Report> {
    let d = io::load_problem(base, limits)?;
    let e = io::load_problem(perturbed, limits)?;
    let cert = global_stability_certificate(&d, &e, verify, limits)?;
    let gaps = gap_profile(&d);
    let mut h = String::new();
    writeln!(h, "delta = {}", cert.delta).unwrap();
    match &cert.min_gap {
        Some(g) => writeln!(h, "min gap = {g}").unwrap(),
        None => writeln!(h, "min gap unbounded (single action)").unwrap(),
    }
    match cert.verdict {
        Verdict::Certified => writeln!(h, "certified: quotient and sufficient sets unchanged").unwrap(),
        Verdict::Refused => writeln!(h, "refused: some gap is at most 2 delta").unwrap(),
    }
    let preserved = match witness {
        None => None,
        Some(path) => {
            let w: Witness = io::load(path)?;
            let kept = witness_preservation(&d, &e, &w, verify)?;
            writeln!(h, "witness {}", if kept { "preserved" } else { "not guaranteed" }).unwrap();
            Some(kept)
        }
    };
    Ok(Report::new(
        h,
        serde_json::json!({ "certificate": cert, "gaps": gaps.gaps, "witness_preserved": preserved }),
    ))
}

fn load_target(arg: &str) -> Result<Target> {
    match arg.parse::<TargetKind>() {
        Ok(k) => Ok(Target::Kind(k)),
        Err(_) => {
            let t: Target = io::load(Path::new(arg))?;
            if let Target::Scheme(s) = &t {
                s.validate()?;
            }
            Ok(t)
        }
    }
}

pub fn classify(target: &str, slice: &Path) -> Result<Report> {
    let t = load_target(target)?;
    let s: PairwiseSlice = io::load_slice(slice)?;
    let verdict = t.evaluate(&s)?;
    Ok(Report::new(format!("{verdict}\n"), serde_json::json!({ "verdict": verdict })))
}

pub fn falsify(target: &str, config: Option<&Path>, seed: Option<u64>, limits: &Limits) -> Result<Report> {
    let t = load_target(target)?;
    let mut cfg: SearchConfig = match config {
        Some(p) => io::load(p)?,
        None => SearchConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let outcome = falsify_classifier(&t, &cfg, limits)?;
    let mut h = String::new();
    match &outcome.bundle {
        Some(b) => {
            let v = verify_bundle(b, limits)?;
            if !v.passed() {
                return Err(Error::TheoryViolation(format!("search produced a failing bundle: {}", v.failures().join("; "))));
            }
            writeln!(h, "orbit gap found and verified").unwrap();
            h.push_str(&bundle_summary(b));
        }
        None => writeln!(
            h,
            "no orbit gap found{}",
            if outcome.exhausted_budget { " before the evaluation budget ran out" } else { "" }
        )
        .unwrap(),
    }
    writeln!(
        h,
        "{} candidates, {} steps, {} evaluations",
        outcome.candidates_tried, outcome.steps_tried, outcome.evaluations
    )
    .unwrap();
    let mut report = Report::new(h, &outcome);
    report.seed = Some(cfg.seed);
    Ok(report)
}

#[derive(Serialize)]
struct DetectReport {
    detections: Vec<Detection>,
    /// Slice-only detectors not run on a problem.
    skipped: Vec<String>,
    hits: Vec<&'static str>,
    roles: Vec<String>,
}

pub fn taxonomy(detect_file: Option<&Path>, k: usize, limits: &Limits) -> Result<Report> {
    let integrity = table_integrity()?;
    let mut h = String::new();
    for r in landscape_table() {
        writeln!(h, "{:<40} {:<11} {}", r.family, r.role.to_string(), r.mechanism).unwrap();
    }
    writeln!(
        h,
        "{} rows, {} mechanisms",
        integrity.rows,
        integrity.mechanisms.len()
    )
    .unwrap();
    let detection = match detect_file {
        None => None,
        Some(path) => {
            let inst = io::load_instance(path)?;
            let mut detections = Vec::new();
            let mut skipped = Vec::new();
            for d in Detector::all(k) {
                if d.needs_slice() && matches!(inst, Instance::Problem(_)) {
                    skipped.push(d.to_string());
                    continue;
                }
                detections.push(detect(d, inst.as_core(), limits)?);
            }
            let roles = classify_role(&detections);
            writeln!(h, "detectors on {}:", path.display()).unwrap();
            for d in &detections {
                writeln!(h, "  {:<24} {}", d.detector, if d.hit { "hit" } else { "-" }).unwrap();
            }
            for s in &skipped {
                writeln!(h, "  {s:<24} skipped (needs a slice)").unwrap();
            }
            writeln!(h, "role: {}", roles.roles.join(", ")).unwrap();
            Some(DetectReport {
                detections,
                skipped,
                hits: roles.hits,
                roles: roles.roles,
            })
        }
    };
    Ok(Report::new(
        h,
        serde_json::json!({ "table": landscape_table(), "integrity": integrity, "detection": detection }),
    ))
}
