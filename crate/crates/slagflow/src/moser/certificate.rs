//! (C, K, δ′)-bounded geometry of a meshed Lagrangian.

use crate::ambient::MetricField;
use crate::lagmesh::NoncollapseOutcome;
use crate::lagmesh::{measure, noncollapse_check, EigenOptions, GeometricReport, ImmersedLagrangian, MeasureOptions};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Smallest relative distance to a violated bound; negative on failure.
    pub margin: f64,
}

impl Clause {
    fn between(name: &str, measured: f64, lower: Option<f64>, upper: Option<f64>, strict: bool) -> Clause {
        let lo = lower.map(|l| (measured - l) / l.abs().max(1e-300)).unwrap_or(f64::INFINITY);
        let hi = upper.map(|u| (u - measured) / u.abs().max(1e-300)).unwrap_or(f64::INFINITY);
        let margin = lo.min(hi);
        let pass = if strict { margin > 0.0 } else { margin >= 0.0 } && measured.is_finite();
        Clause { name: name.into(), pass, measured, lower, upper, margin }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    pub k: f64,
    pub delta: f64,
    pub clauses: [Clause; 6],
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<usize> {
        (0..6).filter(|&i| !self.clauses[i].pass).collect()
    }

    /// Evaluates the six clauses on measured data. The report must carry the
    /// scale range and λ₁.
    pub fn from_report(
        report: &GeometricReport,
        noncollapse: &NoncollapseOutcome,
        n: usize,
        c: f64,
        k: f64,
        delta: f64,
    ) -> Certificate {
        let (l0_min, l0_max) = report.scale_range.unwrap_or((f64::NAN, f64::NAN));
        let scale = {
            let lo = Clause::between("scale", l0_min, Some(k / c), Some(c * k), true);
            let hi = Clause::between("scale", l0_max, Some(k / c), Some(c * k), true);
            if lo.margin <= hi.margin {
                lo
            } else {
                hi
            }
        };
        let k2 = k.powi(-2);
        let h_bound = c * (-delta * k.powi(2 * n as i32)).exp();
        let nc_ratio = noncollapse.table.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        Certificate {
            c,
            k,
            delta,
            clauses: [
                scale,
                Clause::between("second fundamental form", report.sup_a2, None, Some(c * k2), false),
                Clause::between("mean curvature", report.sup_h2, None, Some(h_bound), false),
                Clause::between("volume", report.volume, Some(1.0 / c), Some(c), false),
                Clause::between(
                    "first eigenvalue",
                    report.lambda1.unwrap_or(f64::NAN),
                    Some(k2 / c),
                    Some(c * k2),
                    false,
                ),
                Clause::between("noncollapsing", nc_ratio, Some(1.0 / c), None, false),
            ],
        }
    }
}

/// Measures `lag` in `field` and checks the six clauses with noncollapsing
/// at r₀ = C⁻¹K^{1−n}.
pub fn certify_bounded_geometry<F: MetricField + ?Sized>(
    field: &F,
    lag: &ImmersedLagrangian,
    c: f64,
    k: f64,
    delta: f64,
) -> Result<(Certificate, GeometricReport), crate::lagmesh::LagError> {
    let n = field.complex_dim();
    let opts = MeasureOptions { eigen: Some(EigenOptions::default()), ..MeasureOptions::quick() };
    let report = measure(field, lag, &opts)?;
    let r0 = k.powf(1.0 - n as f64) / c;
    let nc = noncollapse_check(field, lag, 1.0 / c, r0, 3)?;
    Ok((Certificate::from_report(&report, &nc, n, c, k, delta), report))
}
