//! One-dimensional diagnostic: curve shortening of closed polygons in ℝ².

use nalgebra::Vector2;

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedCurve {
    pub points: Vec<Vector2<f64>>,
}

impl ClosedCurve {
    pub fn centroid(&self) -> Vector2<f64> {
        self.points.iter().sum::<Vector2<f64>>() / self.points.len() as f64
    }

    pub fn mean_radius(&self) -> f64 {
        let c = self.centroid();
        self.points.iter().map(|p| (p - c).norm()).sum::<f64>() / self.points.len() as f64
    }
}

pub fn circle(r: f64, m: usize) -> ClosedCurve {
    let points = (0..m)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / m as f64;
            Vector2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    ClosedCurve { points }
}

/// x ↦ x + dt·κN with κN the normal part of x″/|x′|² from central
/// differences in the parameter.
pub fn curve_step(c: &ClosedCurve, dt: f64) -> ClosedCurve {
    let m = c.points.len();
    let points = (0..m)
        .map(|i| {
            let (p, a, b) = (c.points[i], c.points[(i + m - 1) % m], c.points[(i + 1) % m]);
            let t = (b - a) * 0.5;
            let dd = b - p * 2.0 + a;
            let t2 = t.norm_squared();
            let normal = dd - t * (dd.dot(&t) / t2);
            p + normal * (dt / t2)
        })
        .collect();
    ClosedCurve { points }
}

pub fn flow_curve(c: &ClosedCurve, dt: f64, t_end: f64) -> ClosedCurve {
    let steps = (t_end / dt).round() as usize;
    (0..steps).fold(c.clone(), |cur, _| curve_step(&cur, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_shrinks_like_the_exact_solution() {
        let (r, t) = (1.0f64, 0.3);
        let want = (r * r - 2.0 * t).sqrt();
        let err = |m: usize, dt: f64| (flow_curve(&circle(r, m), dt, t).mean_radius() - want).abs();
        let coarse = err(64, 1e-4);
        let fine = err(128, 5e-5);
        assert!(coarse < 2e-3, "{coarse}");
        assert!(fine < 0.6 * coarse, "{fine} {coarse}");
    }
}
