//! Scenario pipelines. Each writes its outputs as it goes and finishes with
//! `record.json`; a failing stage still leaves the earlier outputs and a
//! record carrying the error.

use super::config::{AmbientModel, ExperimentConfig, LagrangianSpec};
use super::persist::{sha256_hex, write_csv, write_json, write_mesh, write_text};
use super::{Check, HarnessError, Ledger, LedgerEntry, RunRecord, StageContext};
use crate::ambient::{CalabiField, CalabiModelSpec, FlatField, MetricField};
use crate::fibration::{
    configuration_check, model_fibration, monodromy, null_family, Mat2, ModelFibrationOptions, Sl2zVerdict,
};
use crate::lagmesh::{
    build_flat_subtorus, build_graph, build_model_slag, measure, EigenOptions, ImmersedLagrangian, MeasureOptions,
    SlagModelSpec,
};
use crate::lmcf::{decay_monitor, drift_monitor, run_flow, smoothing_monitor, FlowOutcome, LmcfConfig};
use crate::moser::{certify_bounded_geometry, sandwich_check, transport, SymplecticPair, TransportResult};
use serde::Serialize;
use std::f64::consts::TAU;
use std::path::PathBuf;
use std::sync::Arc;

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    record: RunRecord,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, HarnessError> {
        let text = cfg.to_text();
        let dir = cfg.output_dir.clone();
        let mut run = Run {
            cfg,
            dir: dir.clone(),
            record: RunRecord {
                scenario: cfg.scenario.clone(),
                config_hash: sha256_hex(text.as_bytes()),
                output_dir: dir,
                outputs: Vec::new(),
                ledger: Ledger::new(),
                error: None,
            },
        };
        write_text(&run.dir, "config.toml", &text)?;
        run.note("config", "config.toml");
        Ok(run)
    }

    fn note(&mut self, kind: &str, file: &str) -> String {
        self.record.outputs.push((kind.into(), file.into()));
        file.into()
    }

    fn json<T: Serialize + ?Sized>(&mut self, kind: &str, file: &str, v: &T) -> Result<String, HarnessError> {
        write_json(&self.dir, file, v)?;
        Ok(self.note(kind, file))
    }

    fn csv<T: Serialize>(&mut self, kind: &str, file: &str, rows: &[T]) -> Result<String, HarnessError> {
        write_csv(&self.dir, file, rows)?;
        Ok(self.note(kind, file))
    }

    fn mesh(&mut self, file: &str, lag: &ImmersedLagrangian) -> Result<String, HarnessError> {
        write_mesh(&self.dir, file, lag)?;
        Ok(self.note("mesh", file))
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.cfg.tolerance(key, default)
    }

    fn sid(&self) -> &str {
        &self.cfg.scenario
    }

    fn enter(&mut self, id: &str, entry: LedgerEntry) {
        self.record.ledger.insert(id.into(), entry);
    }

    fn finish(mut self, outcome: Result<(), HarnessError>) -> Result<RunRecord, HarnessError> {
        if let Err(e) = &outcome {
            self.record.error = Some(e.to_string());
        }
        write_json(&self.dir, "record.json", &self.record)?;
        outcome.map(|_| self.record)
    }
}

/// Executes the configured pipeline and returns its record; the record is
/// also written to `output_dir/record.json`.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    cfg.validate()?;
    let mut run = Run::new(cfg)?;
    let outcome = match cfg.scenario.as_str() {
        "model-report" => model_report(&mut run),
        "transport" => transport_stage(&mut run).map(|_| ()),
        "flow" => flow_scenario(&mut run),
        "ty-pipeline" => ty_pipeline(&mut run),
        _ => fibration_scenario(&mut run),
    };
    run.finish(outcome)
}

fn calabi_spec(run: &Run) -> Result<CalabiModelSpec, HarnessError> {
    run.cfg.geometry()?.calabi().stage(run.sid(), "ambient")
}

fn eigen(run: &Run) -> EigenOptions {
    EigenOptions { seed: run.cfg.seed, ..EigenOptions::default() }
}

/// The ambient field without perturbation and the initial mesh.
fn build(run: &Run) -> Result<(Arc<dyn MetricField>, ImmersedLagrangian), HarnessError> {
    let sid = run.sid();
    let lag_spec = run.cfg.lagrangian.as_ref().expect("validated");
    match run.cfg.ambient.as_ref().expect("validated").model {
        AmbientModel::Calabi => {
            let spec = calabi_spec(run)?;
            let LagrangianSpec::Model { level, slope, resolution, warp, base_point } = lag_spec else {
                unreachable!("validated")
            };
            let mut s = SlagModelSpec::new((-level).exp(), *slope, *resolution).with_warp(*warp);
            s.base_point = *base_point;
            let lag = build_model_slag(&spec, &s).stage(sid, "build")?;
            Ok((Arc::new(CalabiField::new(spec)), lag))
        }
        AmbientModel::Flat => {
            let torus = run.cfg.flat_torus()?;
            let lag = match lag_spec {
                LagrangianSpec::Flat { generators, resolution } => {
                    build_flat_subtorus(&torus, *generators, *resolution)
                }
                LagrangianSpec::Graph { resolution, modes } => build_graph(&torus, modes, *resolution),
                LagrangianSpec::Model { .. } => unreachable!("validated"),
            }
            .stage(sid, "build")?;
            Ok((Arc::new(FlatField::new(torus)), lag))
        }
    }
}

fn synthetic_pair(run: &Run) -> Result<SymplecticPair, HarnessError> {
    let sid = run.sid();
    let spec = calabi_spec(run)?;
    let pert = run.cfg.geometry()?.perturbation().stage(sid, "ambient")?.expect("validated");
    SymplecticPair::synthetic(CalabiField::new(spec), pert).stage(sid, "ambient")
}

#[derive(Serialize)]
struct ClosedForms {
    volume: f64,
    lambda1: f64,
    /// Only for κ = 1.
    sup_a2: Option<f64>,
}

/// Closed forms for M_ε over a flat one-dimensional base (n = 2): the
/// fiber circle has length 2π√a and N has length √(bκ)|λ| with
/// a = L^{−1/2}/2, b = L^{1/2}.
fn closed_forms(spec: &CalabiModelSpec, level: f64, slope: [i64; 2]) -> ClosedForms {
    let kappa = spec.hermitian_curvature;
    let lambda = spec.automorphy(&slope, 0.0).lambda[0].norm();
    let n = 2.0;
    let n_length = kappa.sqrt() * lambda;
    ClosedForms {
        volume: TAU / f64::sqrt(n) * n_length,
        lambda1: (TAU / n_length).powi(2) * level.powf(-1.0 / n),
        sup_a2: ((kappa - 1.0).abs() < 1e-12).then(|| 2.0 * level.powf(-1.5)),
    }
}

fn model_report(run: &mut Run) -> Result<(), HarnessError> {
    let sid = run.sid().to_string();
    let (field, lag) = build(run)?;
    let Some(LagrangianSpec::Model { level, slope, .. }) = run.cfg.lagrangian.clone() else {
        return Err(HarnessError::Config("model-report needs a model Lagrangian".into()));
    };
    let spec = calabi_spec(run)?;
    if spec.base_dim() != 1 {
        return Err(HarnessError::Config("model-report needs dim = 2".into()));
    }
    let mesh = run.mesh("initial.mesh", &lag)?;
    let opts = MeasureOptions { eigen: Some(eigen(run)), ..MeasureOptions::quick() };
    let report = measure(field.as_ref(), &lag, &opts).stage(&sid, "measure")?;
    let rep = run.json("report", "report.json", &report)?;
    let cf = closed_forms(&spec, level, slope);
    let cff = run.json("closed-forms", "closed_forms.json", &cf)?;
    let art = vec![mesh, rep, cff];
    let vol = Check::relative("volume", report.volume, cf.volume, run.tol("A3.volume_rel", 0.01));
    run.enter("A3", LedgerEntry::new(vec![vol], art.clone()));
    let l1 =
        Check::relative("lambda1", report.lambda1.unwrap_or(f64::NAN), cf.lambda1, run.tol("A4.lambda1_rel", 0.02));
    run.enter("A4", LedgerEntry::new(vec![l1], art.clone()));
    let mut a5 = vec![Check::below("sup_h2", report.sup_h2, run.tol("A5.h2_max", 1e-4))];
    if let Some(a2) = cf.sup_a2 {
        a5.push(Check::relative("sup_a2", report.sup_a2, a2, run.tol("A5.a2_rel", 0.05)));
    }
    run.enter("A5", LedgerEntry::new(a5, art));
    Ok(())
}

#[derive(Serialize)]
struct TransportSummary<'a> {
    initial_residual: f64,
    final_residual: f64,
    scale_drift_ratio: f64,
    error_estimate: Option<f64>,
    budget: &'a crate::moser::PerturbationBudget,
}

fn transport_stage(run: &mut Run) -> Result<(SymplecticPair, TransportResult), HarnessError> {
    let sid = run.sid().to_string();
    let (_, lag) = build(run)?;
    let pair = synthetic_pair(run)?;
    let moser = run.cfg.moser.clone().expect("validated");
    let m0 = run.mesh("initial.mesh", &lag)?;
    let mut tr = transport(&pair, &lag, &moser.options()).stage(&sid, "transport")?;
    let trace = run.csv("transport-trace", "transport_trace.csv", &tr.trace)?;
    let m1 = run.mesh("transported.mesh", &tr.lag)?;
    for (k, (_, snap)) in tr.snapshots.iter().enumerate() {
        run.mesh(&format!("transport_snapshot_{k:02}.mesh"), snap)?;
    }
    let summary = TransportSummary {
        initial_residual: tr.initial_residual,
        final_residual: tr.final_residual,
        scale_drift_ratio: tr.scale_drift_ratio,
        error_estimate: tr.error_estimate,
        budget: &tr.budget,
    };
    let sum = run.json("transport", "transport.json", &summary)?;
    let rows = sandwich_check(&pair, &lag, &mut tr, Some(eigen(run))).stage(&sid, "sandwich")?;
    let sw = run.json("sandwich", "sandwich.json", &rows)?;
    let pert = run.cfg.geometry()?.perturbation().stage(&sid, "ambient")?.expect("validated");
    let [c, k] = moser.certificate;
    let (cert, _) =
        certify_bounded_geometry(pair.target.as_ref(), &tr.lag, c, k, pert.decay_rate).stage(&sid, "certificate")?;
    run.json("certificate", "certificate.json", &cert)?;
    let a7 = vec![
        Check::below("residual", tr.final_residual, run.tol("A7.residual", 1e-6)),
        Check::below("initial_residual", tr.initial_residual, run.tol("A7.initial_residual", 1e-10)),
    ];
    run.enter("A7", LedgerEntry::new(a7, vec![m0.clone(), m1, trace.clone(), sum]));
    let a8: Vec<Check> = rows.iter().map(|r| Check::flag(&format!("sandwich t={}", r.t), r.pass)).collect();
    run.enter("A8", LedgerEntry::new(a8, vec![m0, trace, sw]));
    Ok((pair, tr))
}

fn flow_outputs(run: &mut Run, out: &FlowOutcome) -> Result<Vec<String>, HarnessError> {
    let trace = run.csv("flow-trace", "flow_trace.csv", &out.trace.samples)?;
    let fit = run.json("decay-fit", "decay_fit.json", &out.trace.fitted_decay)?;
    let v = run.json("verdict", "verdict.json", &out.verdict)?;
    let m = run.mesh("flowed.mesh", &out.lag)?;
    Ok(vec![trace, fit, v, m])
}

fn convergence_checks(run: &Run, out: &FlowOutcome, n: usize) -> Vec<Check> {
    let mut checks = vec![
        Check::flag("converged", out.verdict.converged),
        Check::below(
            "special_residual",
            out.verdict.final_report.special_residual,
            run.tol("A10.special_residual", 1e-4),
        ),
    ];
    let d = decay_monitor(&out.trace, run.tol("A10.decay_slack", 0.2), 1e-14, None);
    checks.push(Check::flag("decay inequality", d.pass));
    let drift = drift_monitor(&out.trace, 0.0, n, 1e-9);
    checks.push(Check::flag("lambda1 drift", drift.lambda_ok));
    if let Some(ok) = drift.scale_ok {
        checks.push(Check::flag("scale drift", ok));
    }
    checks
}

fn smoothing_entry(run: &mut Run, out: &FlowOutcome, artifacts: Vec<String>) -> Result<(), HarnessError> {
    if let Some(s) = smoothing_monitor(&out.trace, f64::INFINITY) {
        let f = run.json("smoothing", "smoothing.json", &s)?;
        let checks = vec![
            Check::above("t·sup|∇A|² bound", s.c1, 0.0),
            Check::flag("t·sup|∇A|² bounded by its supremum", s.profile.iter().all(|p| p.1 <= s.c1)),
        ];
        run.enter("A15", LedgerEntry::new(checks, [artifacts, vec![f]].concat()));
    }
    Ok(())
}

fn lmcf_config(run: &Run) -> Result<LmcfConfig, HarnessError> {
    run.cfg.lmcf.as_ref().expect("validated").to_config()
}

fn flow_scenario(run: &mut Run) -> Result<(), HarnessError> {
    let sid = run.sid().to_string();
    let cfg = lmcf_config(run)?;
    let (model, lag) = build(run)?;
    let perturbed = run.cfg.geometry()?.perturbation.is_some();
    let field: Arc<dyn MetricField> = if perturbed { synthetic_pair(run)?.target } else { model };
    let m0 = run.mesh("initial.mesh", &lag)?;
    let out = run_flow(field.as_ref(), &lag, &cfg).stage(&sid, "flow")?;
    let art = [vec![m0], flow_outputs(run, &out)?].concat();
    if matches!(run.cfg.lagrangian, Some(LagrangianSpec::Graph { .. })) {
        let l1 = out.trace.samples[0].lambda1;
        let fit = out.trace.fitted_decay.as_ref();
        let mut checks = Vec::new();
        if let (Some(l1), Some(fit)) = (l1, fit) {
            checks.push(Check::relative("decay rate", fit.rate, 2.0 * l1, run.tol("A9.rate_rel", 0.1)));
        }
        let d = decay_monitor(&out.trace, run.tol("A9.slack", 0.2), 0.0, None);
        checks.push(Check::flag("decay inequality", d.pass));
        run.enter("A9", LedgerEntry::new(checks, art.clone()));
    } else {
        let checks = convergence_checks(run, &out, field.complex_dim());
        run.enter("A10", LedgerEntry::new(checks, art.clone()));
    }
    if cfg.smoothing {
        smoothing_entry(run, &out, art)?;
    }
    Ok(())
}

fn ty_pipeline(run: &mut Run) -> Result<(), HarnessError> {
    let sid = run.sid().to_string();
    let cfg = lmcf_config(run)?;
    let (pair, tr) = transport_stage(run)?;
    let out = run_flow(pair.target.as_ref(), &tr.lag, &cfg).stage(&sid, "flow")?;
    let art = flow_outputs(run, &out)?;
    let checks = convergence_checks(run, &out, pair.target.complex_dim());
    run.enter("A10", LedgerEntry::new(checks, art.clone()));
    if cfg.smoothing {
        smoothing_entry(run, &out, art)?;
    }
    Ok(())
}

/// A witness that multiplies out, or an obstruction whose polynomial
/// identity was checked; a search that only exhausted its bound is not a
/// certificate.
fn verdict_certified(v: &Sl2zVerdict) -> bool {
    match v {
        Sl2zVerdict::Feasible(w) => w.verify(),
        Sl2zVerdict::Infeasible(c) => c.identity_checked,
        Sl2zVerdict::InfeasibleUpToBound { .. } => false,
    }
}

fn fibration_scenario(run: &mut Run) -> Result<(), HarnessError> {
    let sid = run.sid().to_string();
    let f = run.cfg.fibration.clone().expect("validated");
    let types = f.kodaira_types()?;
    let opts = ModelFibrationOptions { steps: f.steps, resolution: f.resolution, epsilon: (-f.level).exp() };
    let d = f.degree;
    let family = model_fibration(d, &opts).stage(&sid, "model fibration")?;
    let rep = monodromy(&family).stage(&sid, "monodromy")?;
    let a = run.json("monodromy", "monodromy.json", &rep)?;
    let null = monodromy(&null_family(d, &opts).stage(&sid, "null family")?).stage(&sid, "monodromy")?;
    let b = run.json("monodromy", "null_monodromy.json", &null)?;
    let u = Mat2::new(2, 1, 1, 1);
    let changed = monodromy(&family.with_basis_change(u)).stage(&sid, "monodromy")?;
    let expected = Mat2::parabolic(d);
    let covariant = u.inverse().map(|ui| ui * expected * u);
    let a11 = vec![
        Check::flag(&format!("loop gives {expected}"), rep.monodromy.matrix() == expected),
        Check::flag("null loop is trivial", null.monodromy.matrix() == Mat2::IDENTITY),
        Check::flag("basis covariance", Some(changed.monodromy.matrix()) == covariant),
    ];
    run.enter("A11", LedgerEntry::new(a11, vec![a, b]));
    let conf = configuration_check(&types, d, None, f.search_bound).stage(&sid, "configuration")?;
    let c = run.json("configuration", "configuration.json", &conf)?;
    let mut a13 = vec![Check::absolute("euler sum", conf.euler_sum as f64, conf.chi_total as f64, 0.0)];
    if let Some(v) = &conf.monodromy {
        a13.push(Check::info("feasible", if v.feasible() { 1.0 } else { 0.0 }));
        a13.push(Check::flag("verdict certified", verdict_certified(v)));
    }
    run.enter("A13", LedgerEntry::new(a13, vec![c]));
    Ok(())
}
