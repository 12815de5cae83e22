use nalgebra::DVector;

use super::{check_finite, project_simplex, FeasibleSet, Vertex};
use crate::error::{check_dim, Result};

/// The l1-ball `{x : ||x||_1 <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Ball {
    dim: usize,
    radius: f64,
}

impl L1Ball {
    pub fn new(dim: usize, radius: f64) -> Self {
        assert!(dim > 0, "l1-ball dimension must be positive");
        assert!(radius > 0.0, "l1-ball radius must be positive");
        Self { dim, radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Euclidean projection onto `{||x||_1 <= radius}`, reduced to a simplex
/// projection of `|y| / radius`.
pub fn project_l1ball(y: &DVector<f64>, radius: f64) -> DVector<f64> {
    if y.lp_norm(1) <= radius {
        return y.clone();
    }
    let w = project_simplex(&y.map(|v| v.abs() / radius));
    DVector::from_iterator(
        y.len(),
        y.iter().zip(w.iter()).map(|(&yi, &wi)| yi.signum() * wi * radius),
    )
}

impl FeasibleSet for L1Ball {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex> {
        check_finite(g)?;
        let mut best = 0;
        for (i, &gi) in g.iter().enumerate().skip(1) {
            if gi.abs() > g[best].abs() {
                best = i;
            }
        }
        let sign = if g[best] < 0.0 { -1.0 } else { 1.0 };
        Ok(Vertex::new(best, -self.radius * sign))
    }

    fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim && x.lp_norm(1) <= self.radius + tol
    }

    fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(y, self.dim)?;
        Ok(project_l1ball(y, self.radius))
    }

    fn decompose(&self, x: &DVector<f64>) -> Option<Vec<(Vertex, f64)>> {
        if !self.contains(x, 1e-9) {
            return None;
        }
        let mut parts: Vec<(Vertex, f64)> = x
            .iter()
            .enumerate()
            .filter(|(_, &xi)| xi != 0.0)
            .map(|(i, &xi)| (Vertex::new(i, xi.signum() * self.radius), xi.abs() / self.radius))
            .collect();
        let slack = 1.0 - x.lp_norm(1) / self.radius;
        if slack > 0.0 {
            // split the unused mass over the two vertices of coordinate 0
            for value in [self.radius, -self.radius] {
                let vx = Vertex::new(0, value);
                match parts.iter_mut().find(|(p, _)| p.key() == vx.key()) {
                    Some((_, w)) => *w += 0.5 * slack,
                    None => parts.push((vx, 0.5 * slack)),
                }
            }
        }
        Some(parts)
    }

    fn vertices(&self) -> Vec<Vertex> {
        (0..self.dim)
            .flat_map(|i| [Vertex::new(i, self.radius), Vertex::new(i, -self.radius)])
            .collect()
    }

    fn default_start(&self) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}
