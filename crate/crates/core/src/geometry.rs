//! Stacked position vectors and a handful of small-vector helpers.
//!
//! Every estimator in the crate works on `x = (x_1, ..., x_n)` stored as one
//! contiguous `Vec<f64>` of length `n * p`. [`Positions`] wraps that buffer
//! together with the embedding dimension so node blocks can be borrowed as
//! slices.

use crate::error::{Error, Result};

/// Concatenated node coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    data: Vec<f64>,
    dim: usize,
}

impl Positions {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Positions {
            data: vec![0.0; n * dim],
            dim,
        }
    }

    /// Wraps a flat buffer; its length must be a multiple of `dim`.
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Positions { data, dim })
    }

    pub fn from_points(points: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * dim);
        for pt in points {
            if pt.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: pt.len(),
                });
            }
            data.extend_from_slice(pt);
        }
        Ok(Positions { data, dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the whole stacked vector.
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub(crate) fn check_shape(&self, n: usize, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim,
            });
        }
        if self.n_nodes() != n {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: self.data.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidParams("bounding box min must not exceed max".into()));
        }
        Ok(BoundingBox { min, max })
    }

    /// Tightest box around a set of points; `None` when empty.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a [f64]>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for pt in iter {
            for d in 0..min.len() {
                min[d] = min[d].min(pt[d]);
                max[d] = max[d].max(pt[d]);
            }
        }
        Some(BoundingBox { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn inflate(&self, margin: f64) -> Self {
        BoundingBox {
            min: self.min.iter().map(|v| v - margin).collect(),
            max: self.max.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn contains(&self, pt: &[f64], tol: f64) -> bool {
        pt.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_blocks() {
        let x = Positions::from_flat(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3).unwrap();
        assert_eq!(x.n_nodes(), 2);
        assert_eq!(x.node(1), &[4.0, 5.0, 6.0]);
        assert!(Positions::from_flat(vec![1.0; 5], 2).is_err());
    }

    #[test]
    fn bbox_around_points() {
        let pts = [vec![0.0, 1.0], vec![-2.0, 5.0], vec![3.0, -1.0]];
        let bb = BoundingBox::around(pts.iter().map(|p| p.as_slice())).unwrap();
        assert_eq!(bb.min, vec![-2.0, -1.0]);
        assert_eq!(bb.max, vec![3.0, 5.0]);
        assert!(bb.contains(&[0.0, 0.0], 0.0));
        assert!(!bb.contains(&[4.0, 0.0], 0.0));
    }
}
