use nalgebra::DVector;

use super::{check_finite, FeasibleSet, Vertex};
use crate::error::Result;

/// The unit simplex `{x >= 0, sum x = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simplex {
    dim: usize,
}

impl Simplex {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "simplex dimension must be positive");
        Self { dim }
    }
}

/// Euclidean projection onto the unit simplex (sort-and-threshold).
pub fn project_simplex(y: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = y.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

impl FeasibleSet for Simplex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lmo(&self, g: &DVector<f64>) -> Result<Vertex> {
        check_finite(g)?;
        let mut best = 0;
        for (i, &gi) in g.iter().enumerate().skip(1) {
            if gi < g[best] {
                best = i;
            }
        }
        Ok(Vertex::new(best, 1.0))
    }

    fn diameter(&self) -> f64 {
        if self.dim > 1 {
            std::f64::consts::SQRT_2
        } else {
            0.0
        }
    }

    fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim && x.iter().all(|&v| v >= -tol) && (x.sum() - 1.0).abs() <= tol
    }

    fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        crate::error::check_dim(y, self.dim)?;
        Ok(project_simplex(y))
    }

    fn decompose(&self, x: &DVector<f64>) -> Option<Vec<(Vertex, f64)>> {
        if !self.contains(x, 1e-9) {
            return None;
        }
        Some(
            x.iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| (Vertex::new(i, 1.0), w))
                .collect(),
        )
    }

    fn vertices(&self) -> Vec<Vertex> {
        (0..self.dim).map(|i| Vertex::new(i, 1.0)).collect()
    }

    fn default_start(&self) -> DVector<f64> {
        DVector::from_element(self.dim, 1.0 / self.dim as f64)
    }
}
