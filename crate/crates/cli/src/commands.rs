use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use gasgrid::decomposition::{gap_percent, run_overall, text_table, HeuristicResult, SolveConfig};
use gasgrid::ingest::{
    apply_stress, expand_diameters, generate_synthetic, load_assignment, load_instance, load_network, load_nomination,
    read_gaslib_network, read_gaslib_nomination, save_instance,
};
use gasgrid::relaxation::{build_misoc, export_text, fix_and_validate, solve_misoc, HeuristicOutcome, MisocStatus};
use gasgrid::subproblem::{residual_report, validate, BlockResiduals, ValidationMode, ValidationOutcome, ValidationProblem};
use gasgrid::{assignment_cost, DesignAssignment, Instance, Network, Nomination, PhysicsConstants};
use rayon::prelude::*;

use crate::args::{seconds, GenArgs, RelaxArgs, ReportArgs, SolveArgs, ValidateArgs};
use crate::record::{sha256_file, Header, RelaxRecord, SolveRecord};

fn is_xml(path: &Path, exts: &[&str]) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.contains(&e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_network(path: &Path) -> Result<Network> {
    if is_xml(path, &["net", "xml"]) {
        Ok(read_gaslib_network(&path.display().to_string(), &read_text(path)?)?.network)
    } else {
        Ok(load_network(path)?)
    }
}

fn read_nomination(path: &Path) -> Result<Nomination> {
    if is_xml(path, &["scn", "xml"]) {
        Ok(read_gaslib_nomination(&path.display().to_string(), &read_text(path)?)?)
    } else {
        Ok(load_nomination(path)?)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "nomination".into(), |s| s.to_string_lossy().into_owned())
}

/// Writes one instance per base scenario and stress level; returns the
/// paths in writing order. Nothing is written unless every instance builds.
pub fn gen(args: &GenArgs) -> Result<Vec<PathBuf>> {
    args.check()?;
    let physics = PhysicsConstants::default();
    let mut bases: Vec<(String, Network, Nomination, Option<DesignAssignment>)> = Vec::new();
    if let Some(n) = args.synthetic {
        let syn = generate_synthetic(args.seed, n, &args.mix.mix(&args.multipliers))?;
        bases.push((syn.network.name().to_string(), syn.network, syn.nomination, Some(syn.witness)));
    } else {
        let path = args.network.as_ref().expect("clap requires a network without --synthetic");
        let net = expand_diameters(&read_network(path)?, &args.multipliers, &physics)?;
        for p in &args.nominations {
            let nom = read_nomination(p)?;
            let label = if nom.name.is_empty() { stem(p) } else { nom.name.clone() };
            bases.push((format!("{}-{label}", net.name()), net.clone(), nom, None));
        }
    }
    let mut instances = Vec::new();
    for (name, net, nom, witness) in &bases {
        for &s in &args.stress {
            let mut inst = Instance::new(format!("{name}-s{s}"), net.clone(), apply_stress(nom, s)?)?;
            inst.stress = s;
            inst.diameter_multipliers = args.multipliers.clone();
            inst.seed = Some(args.seed);
            // Scaled demands need not fit the witness's potentials.
            if s == 1.0 {
                inst.witness = witness.clone();
            }
            instances.push(inst);
        }
    }
    let names: BTreeSet<&str> = instances.iter().map(|i| i.name.as_str()).collect();
    if names.len() != instances.len() {
        bail!("instance names collide; give the nominations distinct names");
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = Vec::new();
    for inst in &instances {
        let path = args.out.join(format!("{}.json", inst.name));
        save_instance(inst, &path)?;
        log::info!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

struct Job {
    path: PathBuf,
    stem: String,
    instance: Instance,
}

fn load_jobs(paths: &[PathBuf]) -> Result<Vec<Job>> {
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    for p in paths {
        let instance = load_instance(p)?;
        let stem = stem(p);
        if !seen.insert(stem.clone()) {
            bail!("two instances share the file name {stem}; their reports would overwrite each other");
        }
        jobs.push(Job { path: p.clone(), stem, instance });
    }
    Ok(jobs)
}

fn solve_one(job: &Job, config: &SolveConfig, out: &Path) -> Result<SolveRecord> {
    let header = Header::new(&job.path, &job.instance, config)?;
    log::info!("solving {} ({} binaries)", job.instance.name, job.instance.binary_count());
    let report = run_overall(&job.instance, config).with_context(|| format!("solving {}", job.path.display()))?;
    let record = SolveRecord { header, report };
    record.write(out, &job.stem)?;
    Ok(record)
}

/// Solves every instance; returns the records in input order and the exit
/// code (1 if any run failed, else the largest report code).
pub fn solve(args: &SolveArgs) -> Result<(Vec<SolveRecord>, i32)> {
    let (jobs, config) = match &args.replay {
        Some(r) => {
            let prev = SolveRecord::read(r)?;
            let path = PathBuf::from(&prev.header.instance_path);
            let hash = sha256_file(&path)?;
            if hash != prev.header.instance_sha256 {
                bail!("{} changed since the report was written (sha256 {hash})", path.display());
            }
            (load_jobs(&[path])?, prev.header.config)
        }
        None => (load_jobs(&args.instances)?, args.config()?),
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<Result<SolveRecord>> = pool.install(|| jobs.par_iter().map(|j| solve_one(j, &config, &args.out)).collect());
    let mut records = Vec::new();
    let mut code = 0;
    for r in results {
        match r {
            Ok(rec) => {
                code = code.max(rec.report.exit_code());
                records.push(rec);
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                code = -1;
            }
        }
    }
    Ok((records, if code < 0 { 1 } else { code }))
}

pub fn residual_table(r: &BlockResiduals) -> String {
    let mut out = String::new();
    let width = BlockResiduals::NAMES.iter().map(|n| n.len()).max().unwrap_or(0);
    let _ = writeln!(out, "{:<width$}  Residual", "Block");
    for (name, v) in r.entries() {
        let _ = writeln!(out, "{name:<width$}  {v:.3e}");
    }
    out
}

/// Report text and exit code: 0 feasible, 3 infeasible, 4 undecided.
pub fn validate_cmd(args: &ValidateArgs) -> Result<(String, i32)> {
    let inst = load_instance(&args.instance)?;
    let assignment = match &args.assignment {
        Some(p) => load_assignment(p)?,
        None => inst.witness.clone().ok_or_else(|| anyhow!("{} records no witness design", args.instance.display()))?,
    };
    let limit = seconds("--time-limit", args.time_limit)?;
    let mode = if args.search_states { ValidationMode::Initial } else { ValidationMode::Primal };
    let net = &inst.network;
    let problem = ValidationProblem::with_tolerance(net, &assignment, mode, args.eps_feas)?;
    let cost = assignment_cost(&assignment, net)?;
    let outcome = validate(&problem, limit);
    let mut out = String::new();
    let _ = writeln!(out, "instance  {}", inst.name);
    let _ = writeln!(out, "cost      {cost:.6e}");
    let _ = writeln!(out, "outcome   {}", outcome.label());
    let (residuals, code) = match &outcome {
        ValidationOutcome::Feasible(sol) => (Some(residual_report(sol, net)?), 0),
        ValidationOutcome::Infeasible { leaves_refuted, residuals, .. } => {
            let _ = writeln!(out, "leaves    {leaves_refuted} refuted");
            (Some(*residuals), 3)
        }
        ValidationOutcome::TimedOut { leaves_checked } => {
            let _ = writeln!(out, "leaves    {leaves_checked} checked before the limit");
            (None, 4)
        }
        ValidationOutcome::Inconclusive { leaves_refuted, leaves_unresolved } => {
            let _ = writeln!(out, "leaves    {leaves_refuted} refuted, {leaves_unresolved} undecided");
            (None, 4)
        }
    };
    if let Some(r) = residuals {
        out.push('\n');
        out.push_str(&residual_table(&r));
    }
    Ok((out, code))
}

/// Report text and exit code: 0 proven bound, 2 bound at the time limit,
/// 3 relaxation infeasible.
pub fn relax(args: &RelaxArgs) -> Result<(String, i32)> {
    let inst = load_instance(&args.instance)?;
    let cfg = args.formulation.config()?;
    let limit = seconds("--time-limit", args.time_limit)?;
    if let Some(c) = args.incumbent {
        if !(c.is_finite() && c >= 0.0) {
            bail!("--incumbent must be a finite cost, got {c}");
        }
    }
    let start = Instant::now();
    let model = build_misoc(&inst, &cfg)?;
    if let Some(p) = &args.export {
        std::fs::write(p, export_text(&model, &model.root())).with_context(|| format!("writing {}", p.display()))?;
    }
    let sol = solve_misoc(&model, limit);
    let heuristic = match &sol.point {
        Some(p) => {
            let left = limit.saturating_sub(start.elapsed()).max(std::time::Duration::from_secs(1));
            Some(match fix_and_validate(&model, p, &cfg, left)? {
                HeuristicOutcome::Feasible(d) => HeuristicResult { feasible: true, cost: Some(d.cost) },
                HeuristicOutcome::Infeasible { .. } => HeuristicResult { feasible: false, cost: None },
            })
        }
        None => None,
    };
    let wall = start.elapsed().as_secs_f64();
    let bound = sol.bound.is_finite().then_some(sol.bound);
    let record = RelaxRecord {
        instance: inst.name.clone(),
        instance_path: args.instance.display().to_string(),
        instance_sha256: sha256_file(&args.instance)?,
        perspective: cfg.perspective,
        time_limit: args.time_limit,
        status: sol.status,
        bound,
        nodes: sol.nodes,
        wall_time: wall,
        incumbent: args.incumbent,
        gap_percent: args.incumbent.zip(bound).and_then(|(u, l)| gap_percent(u, l)),
        heuristic,
    };
    if let Some(dir) = &args.out {
        record.write(dir, &stem(&args.instance))?;
    }
    let code = match sol.status {
        MisocStatus::Optimal => 0,
        MisocStatus::TimedOut => 2,
        MisocStatus::Infeasible => 3,
    };
    Ok((record.text(), code))
}

fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(".report.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no report files found");
    }
    Ok(files)
}

pub fn report(args: &ReportArgs) -> Result<String> {
    let records = report_files(&args.inputs)?.iter().map(|f| SolveRecord::read(f)).collect::<Result<Vec<_>>>()?;
    if args.json {
        let mut s = serde_json::to_string_pretty(&records)?;
        s.push('\n');
        return Ok(s);
    }
    let reports: Vec<_> = records.into_iter().map(|r| r.report).collect();
    Ok(text_table(&reports))
}
