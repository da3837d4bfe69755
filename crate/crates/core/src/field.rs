//! Posterior-mean spatial field on a regular grid.

use crate::mesh::{make_projector, Mesh, Point2};
use crate::model::FitResult;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("grid needs at least 2 x 2 nodes, got {nx} x {ny}")]
    DegenerateGrid { nx: usize, ny: usize },
    #[error("fit has no spatial field")]
    NotSpatial,
    #[error("fit has {fit} field values but the mesh has {mesh} vertices")]
    MeshMismatch { fit: usize, mesh: usize },
}

/// Values at grid nodes `(x0 + i·dx, y0 + j·dy)`, stored row-major with `j` outer.
/// Nodes outside the mesh are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub values: Vec<Option<f64>>,
}

impl Raster {
    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.x0 + i as f64 * self.dx, self.y0 + j as f64 * self.dy)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[j * self.nx + i]
    }

    pub fn nodes(&self) -> Vec<Point2> {
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| (i, j))).map(|(i, j)| self.node(i, j)).collect()
    }

    /// Smallest and largest defined value.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values.iter().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// Interpolates vertex values onto an `nx × ny` grid spanning the mesh bounding box,
/// extremes included.
pub fn project_values(vertex_values: &[f64], mesh: &Mesh, nx: usize, ny: usize) -> Result<Raster, FieldError> {
    if nx < 2 || ny < 2 {
        return Err(FieldError::DegenerateGrid { nx, ny });
    }
    if vertex_values.len() != mesh.n_vertices() {
        return Err(FieldError::MeshMismatch { fit: vertex_values.len(), mesh: mesh.n_vertices() });
    }
    let (xmin, ymin, xmax, ymax) = mesh.bounding_box();
    let mut raster = Raster {
        nx,
        ny,
        x0: xmin,
        y0: ymin,
        dx: (xmax - xmin) / (nx - 1) as f64,
        dy: (ymax - ymin) / (ny - 1) as f64,
        values: Vec::new(),
    };
    let nodes = raster.nodes();
    let projector = make_projector(mesh, &nodes);
    let values = projector.apply(vertex_values);
    raster.values = values.into_iter().enumerate().map(|(k, v)| projector.is_inside(k).then_some(v)).collect();
    Ok(raster)
}

/// Posterior mean of the spatial field on a grid.
pub fn project_field(fit: &FitResult, mesh: &Mesh, nx: usize, ny: usize) -> Result<Raster, FieldError> {
    if !fit.summary.spec.spatial {
        return Err(FieldError::NotSpatial);
    }
    let u: Vec<f64> = fit.summary.u.iter().map(|e| e.mean).collect();
    project_values(&u, mesh, nx, ny)
}
