use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use twisted_rfh::complex::ComplexRecord;
use twisted_rfh::covering::{classify_orbit_loop, lift_loop, QuotientLoop};
use twisted_rfh::cz::{cz_index_unitary, relative_index, CzIndex, UnitaryPath};
use twisted_rfh::equivariant::{build_pearl_complex, compare_with_oracle, tate_homology, HomologyReport, PearlComplexSpec};
use twisted_rfh::orbits::{
    action, analytic_orbit, analytic_spectrum, numeric_spectrum, orbit_index, period, shoot_orbit, SpectrumTable,
    TwistedOrbit,
};
use twisted_rfh::par;
use twisted_rfh::symplectic::{PhasePoint, RotationTwist, StarShapedModel};

use crate::config::{seed_point, Command, Jacobian, Method, OrbitArgs, RunConfig, SweepTask};
use crate::error::CliError;
use crate::output::{num, Document, Table};

pub const DEFAULT_ACTION_SAMPLES: usize = 1000;
const INDEX_SAMPLES: usize = 64;

pub struct Outcome {
    pub doc: Document,
    /// Set when an oracle comparison disagrees; the document is still written.
    pub mismatch: Option<String>,
}

impl Outcome {
    fn ok(doc: Document) -> Self {
        Outcome { doc, mismatch: None }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn doc(command: &str, metadata: Value, result: Value, table: Table) -> Document {
    Document { command: command.to_string(), metadata, result, table, notes: Vec::new() }
}

fn index_cell(i: Option<CzIndex>) -> String {
    i.map(|i| i.to_string()).unwrap_or_else(|| "-".into())
}

pub fn execute(cfg: &RunConfig, command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Spectrum => spectrum(cfg),
        Command::Orbit(args) => orbit(cfg, args),
        Command::Action(args) => action_cmd(cfg, args),
        Command::CzIndex => cz_index(cfg),
        Command::Complex { quotient } => complex(cfg, *quotient),
        Command::Homology => homology(cfg),
        Command::Tate { degrees } => tate(cfg, *degrees),
        Command::Lift { loop_file, basepoint } => lift(cfg, loop_file, *basepoint),
        Command::Certify(args) => certify(cfg, args),
        Command::Sweep { axes, task } => sweep(cfg, axes, *task),
    }
}

fn spectrum_table(model: &StarShapedModel, twist: &RotationTwist, window: (i64, i64), cfg: &RunConfig) -> Result<SpectrumTable, CliError> {
    Ok(if model.is_round_sphere() {
        analytic_spectrum(twist, model.n(), window)?
    } else {
        numeric_spectrum(model, twist, window, &cfg.shoot_options(Jacobian::FiniteDifference))?
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (model, twist) = cfg.model_and_twist()?;
    let window = cfg.window_or((0, 1));
    let table = spectrum_table(&model, &twist, window, cfg)?;
    let mut t = Table::new(&["tau", "support", "dim", "index"]);
    for e in &table.entries {
        let support: Vec<String> = e.support.iter().map(ToString::to_string).collect();
        t.push(vec![num(e.tau), support.join(" "), e.dim.to_string(), index_cell(e.index)]);
    }
    let mut meta = cfg.parameters_json(Some(&twist));
    meta["window"] = json!(window);
    meta["method"] = json!(if model.is_round_sphere() { "analytic" } else { "shooting" });
    Ok(Outcome::ok(doc("spectrum", meta, to_value(&table), t)))
}

struct FoundOrbit {
    orbit: TwistedOrbit,
    model: StarShapedModel,
    twist: RotationTwist,
    method: Method,
    branch: i64,
}

fn find_orbit(cfg: &RunConfig, args: &OrbitArgs) -> Result<FoundOrbit, CliError> {
    let (model, twist) = cfg.model_and_twist()?;
    let n = model.n();
    let seed = seed_point(&args.seed, n)?;
    let lead = (0..n).max_by(|&a, &b| seed.0[a].norm().total_cmp(&seed.0[b].norm())).unwrap_or(0);
    let k = twist.reduced(lead);
    let branch = args.branch.unwrap_or_else(|| first_positive_branch(twist.m(), k));
    let base_tau = period(twist.m(), k, branch);
    let method = args.method.unwrap_or(if model.is_round_sphere() { Method::Analytic } else { Method::Shoot });
    let orbit = match method {
        Method::Analytic => {
            if !model.is_round_sphere() {
                return Err(CliError::config("the analytic method needs the round sphere"));
            }
            let z = seed.scale(1.0 / seed.norm());
            let orbit = analytic_orbit(&twist, &z, args.tau.unwrap_or(base_tau))?;
            if orbit.residual > cfg.tol {
                return Err(CliError::Solver(format!(
                    "no twisted orbit through the seed at tau = {}: residual {:e}",
                    num(orbit.tau),
                    orbit.residual
                )));
            }
            orbit
        }
        Method::Shoot => {
            let tau0 = args.tau.unwrap_or_else(|| base_tau * model.radius(&seed).powi(2));
            shoot_orbit(&model, &twist, &seed, tau0, &cfg.shoot_options(args.jacobian))?
        }
    };
    Ok(FoundOrbit { orbit, model, twist, method, branch })
}

/// Smallest `l` with `π(ml - k)/m > 0`.
fn first_positive_branch(m: u32, k: i64) -> i64 {
    k.div_euclid(m as i64) + 1
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Analytic => "analytic",
        Method::Shoot => "shooting",
    }
}

fn orbit_meta(cfg: &RunConfig, found: &FoundOrbit) -> Value {
    let mut meta = cfg.parameters_json(Some(&found.twist));
    meta["branch"] = json!(found.branch);
    meta["method"] = json!(method_name(found.method));
    meta
}

fn orbit(cfg: &RunConfig, args: &OrbitArgs) -> Result<Outcome, CliError> {
    let found = find_orbit(cfg, args)?;
    let o = &found.orbit;
    let mut t = Table::new(&["tau", "support", "residual", "iterations", "component"]);
    let support: Vec<String> = o.support.iter().map(ToString::to_string).collect();
    t.push(vec![num(o.tau), support.join(" "), num(o.residual), o.iterations.to_string(), o.component_id.clone()]);
    Ok(Outcome::ok(doc("orbit", orbit_meta(cfg, &found), to_value(o), t)))
}

#[derive(Serialize)]
struct ActionResult {
    tau: f64,
    action: f64,
    error: f64,
    samples: usize,
    /// `log2(e_N / e_2N)`; absent when the error vanishes.
    order_estimate: Option<f64>,
}

fn action_cmd(cfg: &RunConfig, args: &OrbitArgs) -> Result<Outcome, CliError> {
    let found = find_orbit(cfg, args)?;
    let samples = cfg.samples.unwrap_or(DEFAULT_ACTION_SAMPLES);
    let a = action(&found.orbit, &found.model, samples)?;
    let a2 = action(&found.orbit, &found.model, 2 * samples)?;
    let tau = found.orbit.tau;
    let (e1, e2) = ((a - tau).abs(), (a2 - tau).abs());
    let order = (e1 > 0.0 && e2 > 0.0).then(|| (e1 / e2).log2());
    let result = ActionResult { tau, action: a, error: e1, samples, order_estimate: order };
    let mut t = Table::new(&["tau", "action", "error", "samples", "order"]);
    t.push(vec![num(tau), num(a), num(e1), samples.to_string(), order.map(num).unwrap_or_else(|| "-".into())]);
    Ok(Outcome::ok(doc("action", orbit_meta(cfg, &found), to_value(&result), t)))
}

#[derive(Serialize)]
struct IndexRow {
    branch: i64,
    tau: f64,
    index: Option<CzIndex>,
    /// Index minus the index of the previous branch.
    relative: Option<CzIndex>,
}

fn cz_index(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (model, twist) = cfg.model_and_twist()?;
    let window = cfg.window_or((-2, 3));
    let n = model.n();
    let branches: Vec<i64> = (window.0..=window.1).collect();
    let k = twist.reduced(0);
    let rows: Vec<Result<(f64, Option<UnitaryPath>), CliError>> = par::map(&branches, |&l| {
        let tau = period(twist.m(), k, l);
        if model.is_round_sphere() {
            return Ok((tau, Some(UnitaryPath::rotation(tau, n, INDEX_SAMPLES))));
        }
        let seed = PhasePoint::axis(n, 0);
        let tau0 = tau * model.radius(&seed).powi(2);
        let orbit = shoot_orbit(&model, &twist, &seed, tau0, &cfg.shoot_options(Jacobian::FiniteDifference))?;
        let path = UnitaryPath::from_orbit(&orbit, &model, INDEX_SAMPLES, cfg.shoot_options(Jacobian::FiniteDifference).flow.ode).ok();
        Ok((orbit.tau, path))
    });
    let mut out = Vec::new();
    let mut prev: Option<UnitaryPath> = None;
    for (l, r) in branches.iter().zip(rows) {
        let (tau, path) = r?;
        let index = path.as_ref().map(cz_index_unitary);
        let relative = match (&prev, &path) {
            (Some(a), Some(b)) => Some(relative_index(b, a)),
            _ => None,
        };
        out.push(IndexRow { branch: *l, tau, index, relative });
        prev = path;
    }
    let mut t = Table::new(&["branch", "tau", "index", "relative"]);
    for r in &out {
        t.push(vec![r.branch.to_string(), num(r.tau), index_cell(r.index), index_cell(r.relative)]);
    }
    let mut meta = cfg.parameters_json(Some(&twist));
    meta["window"] = json!(window);
    Ok(Outcome::ok(doc("cz-index", meta, to_value(&out), t)))
}

fn pearl_spec(cfg: &RunConfig, default_window: (i64, i64)) -> Result<PearlComplexSpec, CliError> {
    let (model, twist) = cfg.model_and_twist()?;
    if !model.is_round_sphere() {
        return Err(CliError::config("the pearl complex is built for the round sphere"));
    }
    Ok(PearlComplexSpec::new(twist, cfg.window_or(default_window)))
}

fn complex(cfg: &RunConfig, quotient: bool) -> Result<Outcome, CliError> {
    let spec = pearl_spec(cfg, (0, 2))?;
    let mut c = build_pearl_complex(&spec)?;
    if quotient {
        c = c.quotient_by_action().map_err(CliError::config)?;
    }
    let mut t = Table::new(&["degree", "generators", "boundary_rank"]);
    for d in c.degrees() {
        t.push(vec![d.to_string(), c.rank_of(d).to_string(), c.boundary(d).map(|b| b.rank()).unwrap_or(0).to_string()]);
    }
    let mut meta = cfg.parameters_json(Some(&spec.twist));
    meta["window"] = json!(spec.window);
    meta["quotient"] = json!(quotient);
    Ok(Outcome::ok(doc("complex", meta, to_value(&ComplexRecord::from(&c)), t)))
}

fn homology_table(report: &HomologyReport) -> Table {
    let mut t = Table::new(&["d", "dim_quotient", "dim_tate", "match"]);
    for d in &report.degrees {
        t.push(vec![d.d.to_string(), d.dim_quotient.to_string(), d.dim_tate.to_string(), d.matches.to_string()]);
    }
    t
}

fn homology(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = pearl_spec(cfg, (0, 3))?;
    let mut meta = cfg.parameters_json(Some(&spec.twist));
    meta["window"] = json!(spec.window);
    if spec.twist.m() == 1 {
        let table = build_pearl_complex(&spec)?.homology().map_err(CliError::config)?;
        let interior: Vec<_> = table.interior().copied().collect();
        let mut t = Table::new(&["d", "dim_untwisted"]);
        for e in &interior {
            t.push(vec![e.degree.to_string(), e.dim.to_string()]);
        }
        let result = json!({
            "m": 1,
            "n": spec.n,
            "window": spec.window,
            "degrees": [],
            "untwisted": interior,
        });
        let mut d = doc("homology", meta, result, t);
        d.notes.push("m = 1 acts trivially, so no quotient is formed; listing the homology of the untwisted complex".into());
        return Ok(Outcome::ok(d));
    }
    let report = compare_with_oracle(&spec)?;
    let mismatch = (!report.all_match()).then(|| format!("quotient and Tate homology differ in degrees {:?}", report.mismatches()));
    Ok(Outcome { doc: doc("homology", meta, to_value(&report), homology_table(&report)), mismatch })
}

fn tate(cfg: &RunConfig, degrees: (i64, i64)) -> Result<Outcome, CliError> {
    let m = cfg.require_m()?;
    let table = tate_homology(m, degrees);
    let mut t = Table::new(&["d", "dim"]);
    for e in &table.entries {
        t.push(vec![e.degree.to_string(), e.dim.to_string()]);
    }
    let meta = json!({"m": m, "degrees": degrees, "tolerances": cfg.tolerances_json()});
    Ok(Outcome::ok(doc("tate", meta, to_value(&table), t)))
}

fn lift(cfg: &RunConfig, path: &std::path::Path, basepoint: usize) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let raw: QuotientLoop = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let l = QuotientLoop::new(raw.samples, raw.twist)?;
    let lifted = lift_loop(&l, basepoint)?;
    let cert = lifted.certificate();
    let mut t = Table::new(&["deck", "contractible", "margin"]);
    t.push(vec![cert.deck.to_string(), cert.contractible.to_string(), num(cert.margin)]);
    let mut meta = cfg.parameters_json(Some(&l.twist));
    meta["basepoint"] = json!(basepoint);
    meta["samples"] = json!(l.samples.len());
    Ok(Outcome::ok(doc("lift", meta, to_value(&cert), t)))
}

#[derive(Serialize)]
struct CertifyResult {
    orbit: TwistedOrbit,
    action: f64,
    index: Option<CzIndex>,
    deck: u32,
    contractible: bool,
    noncontractible: bool,
    margin: f64,
}

/// Enough samples that each lifting step stays well inside the separation bound.
fn lift_samples(tau: f64, m: u32) -> usize {
    (16.0 * m as f64 * tau.abs().max(1.0)).ceil() as usize
}

fn certify_orbit(found: &FoundOrbit, action_samples: usize) -> Result<CertifyResult, CliError> {
    let a = action(&found.orbit, &found.model, action_samples)?;
    let index = orbit_index(&found.orbit, &found.model, INDEX_SAMPLES).ok();
    let lifted = classify_orbit_loop(&found.orbit, &found.model, &found.twist, lift_samples(found.orbit.tau, found.twist.m()))?;
    let cert = lifted.certificate();
    Ok(CertifyResult {
        orbit: found.orbit.clone(),
        action: a,
        index,
        deck: cert.deck,
        contractible: cert.contractible,
        noncontractible: !cert.contractible,
        margin: cert.margin,
    })
}

fn certify_row(r: &CertifyResult) -> Vec<String> {
    vec![
        num(r.orbit.tau),
        num(r.action),
        index_cell(r.index),
        r.deck.to_string(),
        r.noncontractible.to_string(),
        num(r.margin),
    ]
}

const CERTIFY_HEADERS: [&str; 6] = ["tau", "action", "index", "deck", "noncontractible", "margin"];

fn certify(cfg: &RunConfig, args: &OrbitArgs) -> Result<Outcome, CliError> {
    let found = find_orbit(cfg, args)?;
    let result = certify_orbit(&found, cfg.samples.unwrap_or(DEFAULT_ACTION_SAMPLES))?;
    let mut t = Table::new(&CERTIFY_HEADERS);
    t.push(certify_row(&result));
    let mut d = doc("certify", orbit_meta(cfg, &found), to_value(&result), t);
    if found.twist.m() % 2 == 1 && found.twist.m() > 1 {
        d.notes.push("m is odd; the certificate is still computed".into());
    }
    Ok(Outcome::ok(d))
}

fn sweep(cfg: &RunConfig, flag_axes: &[(String, Vec<i64>)], task: SweepTask) -> Result<Outcome, CliError> {
    if cfg.model_path.is_some() {
        return Err(CliError::config("sweep runs on the round sphere; drop --model"));
    }
    let mut axes: BTreeMap<String, Vec<i64>> = cfg.sweep.clone();
    for (name, values) in flag_axes {
        axes.insert(name.clone(), values.clone());
    }
    for name in axes.keys() {
        if name != "m" && name != "n" {
            return Err(CliError::config(format!("unknown sweep axis `{name}` (expected m or n)")));
        }
    }
    let ms = axes.get("m").cloned().or_else(|| cfg.m.map(|m| vec![m as i64])).ok_or_else(|| CliError::config("missing sweep axis m"))?;
    let ns = axes.get("n").cloned().unwrap_or_else(|| vec![cfg.n.unwrap_or(2) as i64]);
    if ms.iter().any(|&m| m < 1) || ns.iter().any(|&n| n < 1) {
        return Err(CliError::config("sweep values must be positive"));
    }
    let k = match cfg.k.as_deref() {
        None => 1,
        Some([k]) => *k,
        Some(_) => return Err(CliError::config("sweeps take a single --k value")),
    };
    let points: Vec<(u32, usize)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m as u32, n as usize))).collect();
    let twist_for = |m: u32, n: usize| RotationTwist::new(m, vec![k; n]).map_err(CliError::config);
    let window = cfg.window;
    let samples = cfg.samples.unwrap_or(DEFAULT_ACTION_SAMPLES);

    let mut table;
    let mut mismatch = None;
    let results: Vec<Value> = match task {
        SweepTask::Homology => {
            let reports = par::map(&points, |&(m, n)| -> Result<HomologyReport, CliError> {
                Ok(compare_with_oracle(&PearlComplexSpec::new(twist_for(m, n)?, window.unwrap_or((0, 3))))?)
            });
            table = Table::new(&["m", "n", "degrees", "dims", "all_match"]);
            let mut bad = Vec::new();
            let mut out = Vec::new();
            for r in reports {
                let r = r?;
                let dims: Vec<String> = r.degrees.iter().map(|d| d.dim_quotient.to_string()).collect();
                table.push(vec![r.m.to_string(), r.n.to_string(), r.degrees.len().to_string(), dims.join(" "), r.all_match().to_string()]);
                if !r.all_match() {
                    bad.push((r.m, r.n));
                }
                out.push(to_value(&r));
            }
            if !bad.is_empty() {
                mismatch = Some(format!("quotient and Tate homology differ at (m, n) = {bad:?}"));
            }
            out
        }
        SweepTask::Certify => {
            let runs = par::map(&points, |&(m, n)| -> Result<CertifyResult, CliError> {
                let twist = twist_for(m, n)?;
                let z = PhasePoint::axis(n, 0);
                let branch = first_positive_branch(m, twist.reduced(0));
                let orbit = analytic_orbit(&twist, &z, period(m, twist.reduced(0), branch))?;
                let found =
                    FoundOrbit { orbit, model: StarShapedModel::round_sphere(n), twist, method: Method::Analytic, branch };
                certify_orbit(&found, samples)
            });
            table = Table::new(&["m", "n", "tau", "deck", "noncontractible", "margin"]);
            let mut out = Vec::new();
            for (r, (m, n)) in runs.into_iter().zip(&points) {
                let r = r?;
                table.push(vec![m.to_string(), n.to_string(), num(r.orbit.tau), r.deck.to_string(), r.noncontractible.to_string(), num(r.margin)]);
                let mut v = to_value(&r);
                v["m"] = json!(m);
                v["n"] = json!(n);
                out.push(v);
            }
            out
        }
        SweepTask::Spectrum => {
            let w = window.unwrap_or((0, 1));
            let runs = par::map(&points, |&(m, n)| -> Result<SpectrumTable, CliError> {
                Ok(analytic_spectrum(&twist_for(m, n)?, n, w)?)
            });
            table = Table::new(&["m", "n", "tau", "dim", "index"]);
            let mut out = Vec::new();
            for (r, (m, n)) in runs.into_iter().zip(&points) {
                let r = r?;
                for e in &r.entries {
                    table.push(vec![m.to_string(), n.to_string(), num(e.tau), e.dim.to_string(), index_cell(e.index)]);
                }
                out.push(json!({"m": m, "n": n, "spectrum": to_value(&r)}));
            }
            out
        }
    };
    let meta = json!({
        "task": task,
        "grid": {"m": ms, "n": ns},
        "k": k,
        "window": window,
        "tolerances": cfg.tolerances_json(),
    });
    Ok(Outcome { doc: doc("sweep", meta, Value::Array(results), table), mismatch })
}
