use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use cpodem_core::design::{DesignPoint, DesignSpace};
use cpodem_core::diagnostics::{
    film_metrics, mean_rmsre, probe_signals, psd, remove_mean, uq_map, ProbeSet, RegionSpec, Window, MIN_PSD_SAMPLES,
};
use cpodem_core::doe::{generate_design, AnnealConfig, DesignMatrix};
use cpodem_core::emulator::{load_model, save_model, train, EmulationResult, EmulatorModel, Response};
use cpodem_core::field::{CaseGeometry, Variable};
use cpodem_core::oracle::{oracle_metrics, FlowClass};
use cpodem_core::sobol::{design_sensitivity, SobolResult};
use cpodem_core::store::{encode_series_values, read_case, read_corpus, simulate_corpus, write_case, write_corpus, Case};
use cpodem_core::tree::{classify, extract_rules, rules_text, TreeNode};

use crate::args::*;
use crate::summary::{archive_hash, prediction_id, DesignRequest, PredictSummary, Units};
use crate::{service, usage};

pub const TREE_FILE: &str = "tree.json";

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Doe(a) => doe(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Sensitivity(a) => sensitivity(&a),
        Command::Classify(a) => classify_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Predict(a) => predict(&a),
        Command::Report(a) => report(&a),
        Command::Serve(a) => serve(&a),
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Parses `--design`, in physical units unless `normalized`.
pub fn parse_design(text: &str, normalized: bool, space: &DesignSpace) -> anyhow::Result<DesignPoint> {
    let raw: DesignPoint = match text.parse() {
        Ok(d) => d,
        Err(e) => return usage("--design", e),
    };
    let req = DesignRequest { design: raw.0, units: if normalized { Units::Normalized } else { Units::Physical } };
    req.resolve(space).or_else(|e| usage("--design", e))
}

fn doe(a: &DoeArgs) -> anyhow::Result<()> {
    if a.n < 2 {
        return usage("--n", "need at least two points");
    }
    if a.p == 0 {
        return usage("--p", "need at least one dimension");
    }
    let mut cfg = AnnealConfig::default();
    cfg.n_restarts = a.restarts.unwrap_or(cfg.n_restarts);
    cfg.n_iters = a.iters.unwrap_or(cfg.n_iters);
    let d = generate_design(a.n, a.p, a.seed, &cfg)?;
    write_text(&a.out, &d.design.to_tsv(d.criterion))?;
    log::info!("maxpro n={} p={} criterion {}", a.n, a.p, d.criterion);
    Ok(())
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let rc = a.run_config();
    rc.validate()?;
    let space = rc.space()?;
    let matrix = DesignMatrix::read_tsv(&a.design).or_else(|e| usage("--design", format!("{}: {e}", a.design.display())))?;
    if matrix.p() != space.dim() {
        return usage("--design", format!("{} columns for a {}-parameter space", matrix.p(), space.dim()));
    }
    let designs = matrix.to_design_points(&space)?;
    let vars = if a.variables.is_empty() { Variable::ALL.to_vec() } else { a.variables.clone() };
    let cases = simulate_corpus(&designs, &space, &rc.sampling, rc.seed, &vars)?;
    write_corpus(&a.out, &cases)?;
    println!("wrote {} cases to {}", cases.len(), a.out.display());
    Ok(())
}

/// Sobol' indices of a scalar response through the model, or the oracle when `model` is `None`.
pub fn response_sensitivity(
    response: Response,
    model: Option<&EmulatorModel>,
    space: &DesignSpace,
    n: usize,
    seed: u64,
) -> cpodem_core::Result<SobolResult> {
    match model {
        Some(m) => design_sensitivity(
            |d: &DesignPoint| m.predict_scalar(response, d).map(|e| e.mean).expect("sample inside the design space"),
            &m.space,
            n,
            seed,
        ),
        None => design_sensitivity(
            |d: &DesignPoint| {
                let t = oracle_metrics(d, space).expect("sample inside the design space");
                match response {
                    Response::Thickness => t.h,
                    Response::Angle => t.alpha,
                }
            },
            space,
            n,
            seed,
        ),
    }
}

fn sensitivity(a: &SensitivityArgs) -> anyhow::Result<()> {
    if a.n < 64 {
        return usage("--n", "need at least 64 samples");
    }
    let response = match a.response {
        ResponseArg::Thickness => Response::Thickness,
        ResponseArg::Angle => Response::Angle,
    };
    let model = a.model.as_deref().map(load_model).transpose()?;
    let space = match &model {
        Some(m) => m.space.clone(),
        None => crate::config::RunConfig { space_file: a.space.space.clone(), ..Default::default() }.space()?,
    };
    let r = response_sensitivity(response, model.as_ref(), &space, a.n, a.seed)?;
    match &a.out {
        Some(p) => write_text(p, &r.to_tsv())?,
        None => print!("{}", r.to_tsv()),
    }
    Ok(())
}

fn read_tree(path: &Path) -> anyhow::Result<TreeNode> {
    let file = if path.is_dir() { path.join(TREE_FILE) } else { path.to_path_buf() };
    let text = fs::read_to_string(&file).or_else(|e| usage("--tree", format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).or_else(|e| usage("--tree", format!("{}: {e}", file.display())))
}

fn classify_cmd(a: &ClassifyArgs) -> anyhow::Result<()> {
    let space = crate::config::RunConfig { space_file: a.space.space.clone(), ..Default::default() }.space()?;
    let tree = read_tree(&a.tree)?;
    let d = parse_design(&a.design, a.normalized, &space)?;
    let label = classify(&tree, &space.normalize(&d)?);
    println!("classification: {label}");
    print!("{}", rules_text(&extract_rules(&tree, &space)));
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> anyhow::Result<()> {
    let rc = a.run_config();
    rc.validate()?;
    let space = rc.space()?;
    let cases = read_corpus(&a.corpus).or_else(|e| usage("--corpus", e))?;
    let Some(first) = cases.first() else {
        return usage("--corpus", format!("{} holds no cases", a.corpus.display()));
    };
    let vars = if a.variables.is_empty() { first.series.variables().collect() } else { a.variables.clone() };
    let model = train(&cases, &space, &rc.emulator_config(vars))?;
    save_model(&model, &a.out)?;
    let tree_path = a.out.join(TREE_FILE);
    match &model.tree {
        Some(t) => write_text(&tree_path, &(serde_json::to_string_pretty(t)? + "\n"))?,
        None if tree_path.exists() => fs::remove_file(&tree_path)?,
        None => {}
    }
    for p in &model.partitions {
        let modes: Vec<String> = p.variables.iter().map(|(v, m)| format!("{v} {}", m.basis.k())).collect();
        println!("{}: {} cases; modes: {}", p.label, p.cases.len(), modes.join(", "));
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Model, archive hash and emulation of one design; the CLI and HTTP paths share it.
pub fn emulate(model: &EmulatorModel, hash: &str, d: &DesignPoint) -> cpodem_core::Result<(PredictSummary, EmulationResult)> {
    let result = model.predict_field(d)?;
    let summary = PredictSummary::new(prediction_id(hash, d), &model.space, &result)?;
    Ok((summary, result))
}

fn load(path: &Path) -> anyhow::Result<(EmulatorModel, String)> {
    let model = load_model(path).or_else(|e| usage("--model", format!("{}: {e}", path.display())))?;
    let hash = archive_hash(path)?;
    Ok((model, hash))
}

fn predict(a: &PredictArgs) -> anyhow::Result<()> {
    let (model, hash) = load(&a.model)?;
    let d = parse_design(&a.design, a.normalized, &model.space)?;
    let (summary, result) = emulate(&model, &hash, &d)?;
    let body = summary.to_json();
    if let Some(dir) = &a.out {
        write_case(dir, &Case { design: d, seed: 0, series: result.fields.clone() })?;
        for (var, v) in &result.variance {
            fs::write(dir.join(format!("variance_{var}.bin")), encode_series_values(result.fields.steps(), result.fields.nodes(), v)?)?;
        }
        fs::write(dir.join("summary.json"), &body)?;
    }
    print!("{}", String::from_utf8(body)?);
    Ok(())
}

fn report(a: &ReportArgs) -> anyhow::Result<()> {
    let (model, _) = load(&a.model)?;
    let d = parse_design(&a.design, a.normalized, &model.space)?;
    let truth = read_case(&a.truth).or_else(|e| usage("--truth", e))?;
    let geom = CaseGeometry::from_design(&d);
    let emu = model.predict_field_on(&d, &truth.series.grid)?;
    fs::create_dir_all(&a.out)?;
    let series = &truth.series;
    let shared: Vec<Variable> = emu.fields.variables().filter(|v| series.has(*v)).collect();
    if shared.is_empty() {
        return usage("--truth", "the reference case shares no variable with the model");
    }

    let regions = [
        RegionSpec::overall(&series.grid),
        RegionSpec::upstream(&series.grid, &geom),
        RegionSpec::downstream(&series.grid, &geom),
    ];
    let mut rm = String::from("variable\tregion\trmsre_percent\n");
    for &v in &shared {
        for r in &regions {
            let e = mean_rmsre(series, &emu.fields, v, r)?;
            let _ = writeln!(rm, "{v}\t{}\t{e:.6}", r.name);
        }
    }
    fs::write(a.out.join("rmsre.tsv"), rm)?;

    let mut mt = String::from("quantity\temulated\treference\n");
    let truth_fm = if series.has(Variable::Density) { film_metrics(series, &geom).ok() } else { None };
    let truth_label = truth_fm.as_ref().map_or("nan", |m| FlowClass::from_angle(m.angle).name());
    let _ = writeln!(mt, "classification\t{}\t{truth_label}", emu.classification);
    let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.6}"));
    let _ = writeln!(mt, "thickness_mm\t{:.6}\t{}", emu.thickness.mean, fmt(truth_fm.as_ref().map(|m| m.thickness)));
    let _ = writeln!(mt, "thickness_ci_mm\t{:.6}\t", emu.thickness.ci);
    let _ = writeln!(mt, "angle_deg\t{:.6}\t{}", emu.angle.mean, fmt(truth_fm.as_ref().map(|m| m.angle)));
    let _ = writeln!(mt, "angle_ci_deg\t{:.6}\t", emu.angle.ci);
    if let Some(fm) = &emu.field_metrics {
        let _ = writeln!(mt, "field_thickness_mm\t{:.6}\t{}", fm.thickness, fmt(truth_fm.as_ref().map(|m| m.thickness)));
        let _ = writeln!(mt, "field_angle_deg\t{:.6}\t{}", fm.angle, fmt(truth_fm.as_ref().map(|m| m.angle)));
    }
    fs::write(a.out.join("metrics.tsv"), mt)?;

    let probe_var = if shared.contains(&Variable::Pressure) { Variable::Pressure } else { shared[0] };
    if series.steps() < MIN_PSD_SAMPLES {
        log::warn!("{} snapshots are too few for probe spectra; skipped", series.steps());
    } else if series.has(Variable::Density) {
        let probes = ProbeSet::along_film(&series.mean_field(Variable::Density)?, &series.grid, &geom, a.probes)?;
        let emu_sig = probe_signals(&emu.fields, &probes, probe_var)?;
        let ref_sig = probe_signals(series, &probes, probe_var)?;
        for (k, (e, r)) in emu_sig.iter().zip(&ref_sig).enumerate() {
            let pe = psd(&remove_mean(e), series.dt, Window::Hann)?;
            let pr = psd(&remove_mean(r), series.dt, Window::Hann)?;
            let (x, rr) = probes.positions[k];
            let mut s = format!("# {probe_var} probe {} at x={x:.4} mm r={rr:.4} mm\nfrequency_hz\temulated\treference\n", k + 1);
            for i in 0..pe.frequencies.len() {
                let _ = writeln!(s, "{:.3}\t{:.6e}\t{:.6e}", pe.frequencies[i], pe.density[i], pr.density[i]);
            }
            fs::write(a.out.join(format!("psd_probe{}.tsv", k + 1)), s)?;
        }
    } else {
        log::warn!("reference case has no density; probe spectra skipped");
    }

    for &v in &shared {
        let em = emu.fields.mean_field(v)?;
        let tm = series.mean_field(v)?;
        let n = series.nodes();
        let steps = series.steps();
        let var = &emu.variance[&v];
        let mean_var: Vec<f64> = (0..n).map(|i| (0..steps).map(|t| var[t * n + i]).sum::<f64>() / steps as f64).collect();
        let ci = uq_map(&mean_var, model.config.ci_level);
        let mut s = String::from("x_mm\tr_mm\temulated\treference\tci\n");
        for i in 0..n {
            let (x, r) = series.grid.coords(i);
            let _ = writeln!(s, "{x:.6}\t{r:.6}\t{:.6e}\t{:.6e}\t{:.6e}", em[i], tm[i], ci[i]);
        }
        fs::write(a.out.join(format!("field_{v}.tsv")), s)?;
    }
    println!("wrote report to {}", a.out.display());
    Ok(())
}

fn serve(a: &ServeArgs) -> anyhow::Result<()> {
    let rc = a.run_config();
    rc.validate()?;
    if a.cache == 0 {
        return usage("--cache", "must hold at least one prediction");
    }
    let (model, hash) = load(&a.model)?;
    let opts = service::ServiceOptions { sobol_n: a.sobol_n, seed: a.seed, cache: a.cache, static_dir: a.static_dir.clone() };
    let state = service::AppState::new(model, hash, &opts);
    let addr = format!("{}:{}", a.host, rc.port);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("serving {} on http://{addr}", a.model.display());
        axum::serve(listener, service::router(state, opts.static_dir.as_deref()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })
}
