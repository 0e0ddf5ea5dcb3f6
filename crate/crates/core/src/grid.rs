//! Uniform tensor grids on `[-R, R]^d` with homogeneous Dirichlet boundary.

use crate::error::{Error, Result};
use std::hash::{Hash, Hasher};

/// A uniform grid with an odd number of nodes per axis, so the origin is a
/// node. Boundary nodes carry homogeneous Dirichlet data.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    pub radius: f64,
    pub spacing: f64,
    /// nodes per axis (odd)
    pub n_axis: usize,
    axis: Vec<f64>,
    /// identity token used to detect grid mismatches cheaply
    pub id: u64,
}

impl Grid {
    pub fn new(dim: usize, radius: f64, spacing: f64) -> Result<Grid> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {dim}")));
        }
        if spacing <= 0.0 || radius <= 0.0 {
            return Err(Error::InvalidArgument("radius and spacing must be positive".into()));
        }
        let m = radius / spacing;
        if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "spacing {spacing} must divide radius {radius}"
            )));
        }
        let half = m.round() as usize;
        let n_axis = 2 * half + 1;
        let axis: Vec<f64> = (0..n_axis)
            .map(|i| (i as i64 - half as i64) as f64 * spacing)
            .collect();
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        dim.hash(&mut hasher);
        radius.to_bits().hash(&mut hasher);
        spacing.to_bits().hash(&mut hasher);
        Ok(Grid {
            dim,
            radius,
            spacing,
            n_axis,
            axis,
            id: hasher.finish(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        match self.dim {
            1 => self.n_axis,
            _ => self.n_axis * self.n_axis,
        }
    }

    /// Coordinates of node `idx`; `x[1]` is 0 in one dimension.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis[idx], 0.0],
            _ => [self.axis[idx % self.n_axis], self.axis[idx / self.n_axis]],
        }
    }

    pub fn axis_coords(&self) -> &[f64] {
        &self.axis
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let last = self.n_axis - 1;
        match self.dim {
            1 => idx == 0 || idx == last,
            _ => {
                let (i1, i2) = (idx % self.n_axis, idx / self.n_axis);
                i1 == 0 || i1 == last || i2 == 0 || i2 == last
            }
        }
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Euclidean norm of node `idx`.
    pub fn norm(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        match self.dim {
            1 => p[0].abs(),
            _ => (p[0] * p[0] + p[1] * p[1]).sqrt(),
        }
    }

    /// Indices with `|x| <= fraction * R` (the reporting core).
    pub fn core_indices(&self, fraction: f64) -> Vec<usize> {
        let cut = fraction * self.radius + 1e-12;
        (0..self.n_nodes()).filter(|&i| self.norm(i) <= cut).collect()
    }

    /// Nearest node to `x`, or None if outside the box by more than h/2.
    pub fn node_near(&self, x: &[f64]) -> Option<usize> {
        let locate = |v: f64| -> Option<usize> {
            let f = (v + self.radius) / self.spacing;
            let i = f.round();
            if i < -0.5 || i > (self.n_axis - 1) as f64 + 0.5 {
                None
            } else {
                Some(i.clamp(0.0, (self.n_axis - 1) as f64) as usize)
            }
        };
        match self.dim {
            1 => locate(x[0]),
            _ => {
                let i1 = locate(x[0])?;
                let i2 = locate(x[1])?;
                Some(i2 * self.n_axis + i1)
            }
        }
    }

    /// Cell volume `h^d` (for densities).
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// True if every node of `self` is a node of `other` (same spacing,
    /// nested extents).
    pub fn nested_in(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && (self.spacing - other.spacing).abs() < 1e-12
            && other.radius >= self.radius - 1e-12
            && {
                let shift = (other.radius - self.radius) / self.spacing;
                (shift - shift.round()).abs() < 1e-9
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_a_node() {
        let g = Grid::new(1, 4.0, 0.5).unwrap();
        assert_eq!(g.n_axis % 2, 1);
        assert!(g.axis_coords().iter().any(|&v| v == 0.0));
        assert_eq!(g.n_nodes(), 17);
    }

    #[test]
    fn spacing_must_divide_radius() {
        assert!(Grid::new(1, 4.0, 0.3).is_err());
    }

    #[test]
    fn boundary_detection_2d() {
        let g = Grid::new(2, 1.0, 0.5).unwrap();
        assert_eq!(g.n_nodes(), 25);
        let interior = g.interior_indices();
        assert_eq!(interior.len(), 9);
        for &i in &interior {
            assert!(g.norm(i) < 1.0 + 1e-12);
        }
    }

    #[test]
    fn nearest_node_lookup() {
        let g = Grid::new(1, 4.0, 0.5).unwrap();
        let idx = g.node_near(&[1.26]).unwrap();
        assert!((g.point(idx)[0] - 1.5).abs() < 1e-12);
        assert!(g.node_near(&[4.8]).is_none());
    }

    #[test]
    fn nesting() {
        let g2 = Grid::new(1, 2.0, 0.25).unwrap();
        let g4 = Grid::new(1, 4.0, 0.25).unwrap();
        assert!(g2.nested_in(&g4));
        assert!(!g4.nested_in(&g2));
    }
}
