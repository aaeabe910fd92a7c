use serde::{Deserialize, Serialize};

use crate::torus::wrap_unit;

/// Geometry a point lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Euclidean,
    /// Unit torus `[0, 1)^d`, coordinates are kept wrapped.
    Torus,
}

/// A flat real vector tagged with its space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
    pub space: Space,
}

impl Point {
    pub fn euclidean(coords: Vec<f64>) -> Self {
        Point {
            coords,
            space: Space::Euclidean,
        }
    }

    /// Torus point; coordinates are wrapped into `[0, 1)`.
    pub fn torus(coords: Vec<f64>) -> Self {
        Point {
            coords: coords.into_iter().map(wrap_unit).collect(),
            space: Space::Torus,
        }
    }

    pub fn zeros(dim: usize, space: Space) -> Self {
        Point {
            coords: vec![0.0; dim],
            space,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean distance, or the wrapped (shortest-path) distance on the torus.
    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let sq: f64 = match self.space {
            Space::Euclidean => self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| (a - b).powi(2))
                .sum(),
            Space::Torus => self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| crate::torus::wrap_centered(a - b).powi(2))
                .sum(),
        };
        sq.sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
