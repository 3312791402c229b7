//! Lagrangian mean curvature flow by explicit Euler steps on mesh vertices,
//! with the decay, drift and smoothing monitors.

mod curve;
mod monitors;
mod tensor;

pub use curve::{circle, curve_step, flow_curve, ClosedCurve};
pub use monitors::{
    decay_monitor, drift_monitor, fit_decay, smoothing_monitor, DecayCheck, DecayFit, DriftCheck, SmoothingCheck,
};
pub use tensor::{covariant_derivative, cubic_form, derivative_norms, induced_christoffel, norm2, TensorField};

use crate::ambient::{AmbientError, MetricField};
use crate::lagmesh::{
    cell_jet, measure, noncollapse_check, second_fundamental, vertex_jet, ConstructionTag, EigenOptions,
    GeometricReport, ImmersedLagrangian, LagError, MeasureOptions,
};
use crate::{par, Point};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmcfError {
    #[error("step rejected {rejections} times at t = {t}; vertex {vertex} keeps degenerating")]
    Stiffness { vertex: usize, t: f64, rejections: usize },
    #[error("sup|A|² = {sup_a2:e} exceeds the blow-up bound {bound:e} at t = {t}")]
    Singularity { t: f64, sup_a2: f64, bound: f64, trace: Box<FlowTrace> },
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] LagError),
    #[error(transparent)]
    Ambient(#[from] AmbientError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum DtPolicy {
    Fixed(f64),
    /// dt = c_cfl·min(h_min², 1/sup|A|²) with h_min the shortest edge.
    Cfl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmcfConfig {
    pub dt_policy: DtPolicy,
    pub c_cfl: f64,
    pub stop_h2: f64,
    pub max_time: f64,
    pub monitor_stride: usize,
    /// Converged also needs special residual below 10× this.
    pub mesh_tolerance: f64,
    pub eigen: bool,
    pub smoothing: bool,
    /// (r₀, basepoints per direction) for the noncollapsing constant.
    pub noncollapse: Option<(f64, usize)>,
    /// Tangential redistribution every this many steps.
    pub redistribute: Option<usize>,
    pub blowup_factor: f64,
}

impl Default for LmcfConfig {
    fn default() -> Self {
        LmcfConfig {
            dt_policy: DtPolicy::Cfl,
            c_cfl: 0.1,
            stop_h2: 1e-12,
            max_time: 10.0,
            monitor_stride: 50,
            mesh_tolerance: 1e-5,
            eigen: true,
            smoothing: false,
            noncollapse: None,
            redistribute: None,
            blowup_factor: 100.0,
        }
    }
}

impl LmcfConfig {
    pub fn validate(&self) -> Result<(), LmcfError> {
        if let DtPolicy::Fixed(dt) = self.dt_policy {
            if !(dt > 0.0) {
                return Err(LmcfError::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.c_cfl > 0.0) {
            return Err(LmcfError::Config("c_cfl must be positive".into()));
        }
        if !(self.stop_h2 > 0.0) {
            return Err(LmcfError::Config("stop_h2 must be positive".into()));
        }
        if !(self.max_time > 0.0) || self.monitor_stride == 0 {
            return Err(LmcfError::Config("max_time and monitor_stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub volume: f64,
    pub int_h2: f64,
    pub sup_h2: f64,
    pub sup_a2: f64,
    pub lambda1: Option<f64>,
    pub mu: f64,
    /// ∫₀ᵗ sup|H| ds
    pub int_sup_h: f64,
    pub l0_min: Option<f64>,
    pub l0_max: Option<f64>,
    pub special_residual: f64,
    pub grad_a2: Option<f64>,
    pub grad2_a2: Option<f64>,
    pub noncollapse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    pub fitted_decay: Option<DecayFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    pub final_report: GeometricReport,
    /// sup over vertices of the g-length of the displacement from t = 0.
    pub limit_distance: f64,
    pub disjointness: Option<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub trace: FlowTrace,
    pub verdict: ConvergenceVerdict,
    pub lag: ImmersedLagrangian,
}

struct StepStats {
    sup_h: f64,
    sup_ha: f64,
    sup_a2: f64,
}

fn mean_curvature<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
) -> Result<(Vec<Point>, StepStats), LagError> {
    let per = par::try_map_indexed(lag.len(), |v| -> Result<(Point, f64, f64), LagError> {
        let (i, j) = lag.coords(v);
        let sf = second_fundamental(field, &vertex_jet(lag, i, j), (i, j))?;
        Ok((sf.mean, sf.h_norm2, sf.a_norm2))
    })?;
    let mut stats = StepStats { sup_h: 0.0, sup_ha: 0.0, sup_a2: 0.0 };
    let mut h = Vec::with_capacity(per.len());
    for (m, h2, a2) in per {
        stats.sup_h = stats.sup_h.max(h2.sqrt());
        stats.sup_ha = stats.sup_ha.max((h2 * a2).sqrt());
        stats.sup_a2 = stats.sup_a2.max(a2);
        h.push(m);
    }
    Ok((h, stats))
}

struct CellFrame {
    det: f64,
    t: [Point; 2],
    g: nalgebra::DMatrix<f64>,
}

fn cell_frames<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<Vec<CellFrame>, LagError> {
    let [m1, _] = lag.resolution;
    par::try_map_indexed(lag.len(), |c| -> Result<CellFrame, LagError> {
        let jet = cell_jet(lag, c % m1, c / m1);
        let g = field.metric(&jet.center)?;
        let h = nalgebra::Matrix2::from_fn(|a, b| jet.t[a].dot(&(&g * &jet.t[b])));
        Ok(CellFrame { det: h.determinant(), t: jet.t, g })
    })
}

/// A cell survives a step if its area element keeps a quarter of its value
/// and the new frame is not reflected relative to the old one.
fn cell_survives(old: &CellFrame, new: &CellFrame) -> bool {
    let cross = nalgebra::Matrix2::from_fn(|a, b| old.t[a].dot(&(&old.g * &new.t[b])));
    new.det > 0.25 * old.det && cross.determinant() > 0.0
}

fn advance<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    h: &[Point],
    dt: f64,
    t: f64,
) -> Result<(ImmersedLagrangian, f64, usize), LmcfError> {
    let before = cell_frames(field, lag)?;
    let mut dt = dt;
    let mut worst = 0;
    for rejections in 0..=10 {
        let positions: Vec<Point> = lag.positions.iter().zip(h).map(|(x, hv)| x + hv * dt).collect();
        let next = ImmersedLagrangian { positions, ..lag.clone() };
        let ok = positions_valid(field, &next).and_then(|_| cell_frames(field, &next).ok());
        if let Some(after) = ok {
            match after.iter().zip(&before).position(|(a, b)| !cell_survives(b, a)) {
                None => return Ok((next, dt, rejections)),
                Some(c) => worst = c,
            }
        }
        dt *= 0.5;
    }
    Err(LmcfError::Stiffness { vertex: worst, t, rejections: 10 })
}

fn positions_valid<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Option<()> {
    lag.positions.iter().all(|p| field.check_domain(p).is_ok()).then_some(())
}

/// One explicit Euler step x ↦ x + dt·H(x). A step that inverts or crushes
/// a cell (determinant below a quarter of its previous value) is halved, at
/// most ten times. Returns the new mesh and the dt actually taken.
pub fn lmcf_step<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    dt: f64,
) -> Result<(ImmersedLagrangian, f64), LmcfError> {
    let (h, _) = mean_curvature(field, lag)?;
    let (next, dt, _) = advance(field, lag, &h, dt, 0.0)?;
    Ok((next.with_tag(ConstructionTag::Flowed), dt))
}

/// Shortest metric edge length of the mesh.
pub fn min_edge<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<f64, LagError> {
    let [h1, h2] = lag.spacing();
    let e = par::try_map_indexed(lag.len(), |v| -> Result<f64, LagError> {
        let (i, j) = lag.coords(v);
        let jet = vertex_jet(lag, i, j);
        let g = field.metric(&jet.p)?;
        let l1 = jet.t[0].dot(&(&g * &jet.t[0])).sqrt() * h1;
        let l2 = jet.t[1].dot(&(&g * &jet.t[1])).sqrt() * h2;
        Ok(l1.min(l2))
    })?;
    Ok(e.into_iter().fold(f64::INFINITY, f64::min))
}

fn cfl_dt<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    cfg: &LmcfConfig,
    sup_a2: f64,
) -> Result<f64, LagError> {
    Ok(match cfg.dt_policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Cfl => {
            let e = min_edge(field, lag)?;
            cfg.c_cfl * (e * e).min(1.0 / sup_a2.max(1e-300))
        }
    })
}

/// Area-weighted circular mean of the Lagrangian angle arg Ω|_L.
pub fn mean_lagrangian_angle<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian) -> Result<f64, LagError> {
    let [m1, _] = lag.resolution;
    let parts = par::try_map_indexed(lag.len(), |c| -> Result<Complex64, LagError> {
        let jet = cell_jet(lag, c % m1, c / m1);
        Ok(field.frame(&jet.center)?.holo.eval(&[jet.t[0].clone(), jet.t[1].clone()]))
    })?;
    Ok(parts.into_iter().sum::<Complex64>().arg())
}

/// ∫|H|² by the cell-midpoint rule: the mean of the four corner values of
/// |H|² times the cell area.
fn midpoint_h2<F: MetricField + ?Sized>(field: &F, lag: &ImmersedLagrangian, h2: &[f64]) -> Result<f64, LagError> {
    let [m1, _] = lag.resolution;
    let [a, b] = lag.spacing();
    let per = par::try_map_indexed(lag.len(), |c| -> Result<f64, LagError> {
        let (i, j) = ((c % m1) as isize, (c / m1) as isize);
        let jet = cell_jet(lag, i as usize, j as usize);
        let g = field.metric(&jet.center)?;
        let h = nalgebra::Matrix2::from_fn(|p, q| jet.t[p].dot(&(&g * &jet.t[q])));
        let mean = 0.25
            * (h2[lag.wrapped(i, j)]
                + h2[lag.wrapped(i + 1, j)]
                + h2[lag.wrapped(i, j + 1)]
                + h2[lag.wrapped(i + 1, j + 1)]);
        Ok(mean * h.determinant().max(0.0).sqrt() * a * b)
    })?;
    Ok(per.iter().sum())
}

struct Accumulators {
    mu: f64,
    int_sup_h: f64,
}

fn take_sample<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    cfg: &LmcfConfig,
    t: f64,
    acc: &Accumulators,
) -> Result<(FlowSample, GeometricReport), LmcfError> {
    let phase = mean_lagrangian_angle(field, lag)?;
    let opts =
        MeasureOptions { eigen: cfg.eigen.then(EigenOptions::default), phase: Some(phase), ..MeasureOptions::quick() };
    let report = measure(field, lag, &opts)?;
    let h2 = par::try_map_indexed(lag.len(), |v| -> Result<f64, LagError> {
        let (i, j) = lag.coords(v);
        Ok(second_fundamental(field, &vertex_jet(lag, i, j), (i, j))?.h_norm2)
    })?;
    let int_h2 = midpoint_h2(field, lag, &h2)?;
    let (grad_a2, grad2_a2) = if cfg.smoothing {
        let (a, b) = derivative_norms(field, lag)?;
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    let noncollapse = match cfg.noncollapse {
        Some((r0, s)) => {
            let nc = noncollapse_check(field, lag, 0.0, r0, s)?;
            Some(nc.table.iter().map(|x| x.1).fold(f64::INFINITY, f64::min))
        }
        None => None,
    };
    Ok((
        FlowSample {
            t,
            volume: report.volume_cell,
            int_h2,
            sup_h2: report.sup_h2,
            sup_a2: report.sup_a2,
            lambda1: report.lambda1,
            mu: acc.mu,
            int_sup_h: acc.int_sup_h,
            l0_min: report.scale_range.map(|r| r.0),
            l0_max: report.scale_range.map(|r| r.1),
            special_residual: report.special_residual,
            grad_a2,
            grad2_a2,
            noncollapse,
        },
        report,
    ))
}

/// Tangential Laplacian smoothing at half strength: each vertex moves by the
/// tangential part of (mean of its four neighbours − itself).
pub fn redistribute<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
) -> Result<ImmersedLagrangian, LagError> {
    let positions = par::try_map_indexed(lag.len(), |v| -> Result<Point, LagError> {
        let (i, j) = lag.coords(v);
        let jet = vertex_jet(lag, i, j);
        let (i, j) = (i as isize, j as isize);
        let avg = (lag.lifted(i + 1, j) + lag.lifted(i - 1, j) + lag.lifted(i, j + 1) + lag.lifted(i, j - 1)) * 0.25;
        let d = avg - &jet.p;
        let sf = second_fundamental(field, &jet, (i as usize, j as usize))?;
        let tangential = &d - sf.normal_part(&jet.t, &d);
        Ok(&jet.p + tangential * 0.5)
    })?;
    Ok(ImmersedLagrangian { positions, ..lag.clone() })
}

/// Flows until sup|H|² < stop_h2 with special residual below 10× the mesh
/// tolerance, or until max_time. Samples every `monitor_stride` steps and at
/// the final time.
pub fn run_flow<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    cfg: &LmcfConfig,
) -> Result<FlowOutcome, LmcfError> {
    cfg.validate()?;
    let mut trace = FlowTrace::default();
    let mut acc = Accumulators { mu: 0.0, int_sup_h: 0.0 };
    let (first, _) = take_sample(field, lag, cfg, 0.0, &acc)?;
    let bound = cfg.blowup_factor * first.sup_a2.max(1e-8);
    trace.samples.push(first);
    let mut cur = lag.clone();
    let mut t = 0.0;
    let mut step = 0;
    let mut converged = false;
    let report = loop {
        let (h, stats) = mean_curvature(field, &cur)?;
        if stats.sup_a2 > bound {
            return Err(LmcfError::Singularity { t, sup_a2: stats.sup_a2, bound, trace: Box::new(trace) });
        }
        let mut dt = cfl_dt(field, &cur, cfg, stats.sup_a2)?;
        let last = t + dt >= cfg.max_time * (1.0 - 1e-12);
        if last {
            dt = cfg.max_time - t;
        }
        let (next, taken, _) = advance(field, &cur, &h, dt, t)?;
        acc.mu += 2.0 * stats.sup_ha * taken;
        acc.int_sup_h += stats.sup_h * taken;
        t += taken;
        step += 1;
        cur = next;
        if let Some(n) = cfg.redistribute {
            if step % n == 0 {
                cur = redistribute(field, &cur)?;
            }
        }
        let done = last && (t - cfg.max_time).abs() < 1e-12;
        if step % cfg.monitor_stride == 0 || done {
            let (s, r) = take_sample(field, &cur, cfg, t, &acc)?;
            let stop = s.sup_h2 < cfg.stop_h2 && s.special_residual < 10.0 * cfg.mesh_tolerance;
            trace.samples.push(s);
            if stop {
                converged = true;
                break r;
            }
            if done {
                break r;
            }
        }
    };
    trace.fitted_decay = fit_decay(&trace, None);
    let limit_distance = lag
        .positions
        .iter()
        .zip(&cur.positions)
        .map(|(a, b)| {
            let d = b - a;
            field.metric(a).map(|g| d.dot(&(&g * &d)).max(0.0).sqrt())
        })
        .collect::<Result<Vec<f64>, AmbientError>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let verdict =
        ConvergenceVerdict { converged, final_report: report, limit_distance, disjointness: None, steps: step };
    Ok(FlowOutcome { trace, verdict, lag: cur.with_tag(ConstructionTag::Flowed) })
}

/// Minimum coordinate distance between the vertices of `a` and the lifts of
/// the vertices of `b` by deck powers −1, 0, 1 in each direction.
pub fn mesh_separation(a: &ImmersedLagrangian, b: &ImmersedLagrangian) -> f64 {
    let [m1, m2] = [b.resolution[0] as isize, b.resolution[1] as isize];
    let mut lifts = Vec::with_capacity(9 * b.len());
    for da in -1..=1 {
        for db in -1..=1 {
            for v in 0..b.len() {
                let (i, j) = b.coords(v);
                lifts.push(b.lifted(i as isize + da * m1, j as isize + db * m2));
            }
        }
    }
    let per =
        par::map_indexed(a.len(), |v| lifts.iter().map(|q| (q - &a.positions[v]).norm()).fold(f64::INFINITY, f64::min));
    per.into_iter().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod model_tests;
