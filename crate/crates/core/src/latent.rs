//! Per-sentence free latent codes constrained to the Euclidean ball B(r).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{GlossError, Result};
use crate::matrix::{norm, Matrix};

/// Projects `z` onto the ball of radius `radius` in place.
///
/// Points already inside are untouched. Points outside are rescaled by the
/// largest factor whose result has floating-point norm `<= radius`, so a
/// second projection is always a no-op.
pub fn project_ball_in_place(z: &mut [f64], radius: f64) {
    let n = norm(z);
    if n <= radius {
        return;
    }
    let original = z.to_vec();
    let mut factor = radius / n;
    loop {
        for (out, &x) in z.iter_mut().zip(&original) {
            *out = x * factor;
        }
        if norm(z) <= radius {
            break;
        }
        factor = factor.next_down();
    }
}

pub fn project_ball(z: &[f64], radius: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

/// Draws a d-vector with i.i.d. N(0, 1/d) coordinates and projects it onto B(r).
pub(crate) fn sample_latent(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
    let mut z: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    project_ball_in_place(&mut z, radius);
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentStore {
    codes: Matrix,
    radius: f64,
}

impl LatentStore {
    pub fn init(count: usize, dim: usize, radius: f64, seed: u64) -> Result<Self> {
        check_shape(count, dim, radius)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut codes = Matrix::zeros(count, dim);
        for i in 0..count {
            let z = sample_latent(&mut rng, dim, radius);
            codes.row_mut(i).copy_from_slice(&z);
        }
        Ok(LatentStore { codes, radius })
    }

    /// Wraps existing codes after checking every row lies within
    /// `radius + 1e-6`.
    pub fn from_matrix(codes: Matrix, radius: f64) -> Result<Self> {
        check_shape(codes.rows(), codes.cols(), radius)?;
        for i in 0..codes.rows() {
            let row = codes.row(i);
            if row.iter().any(|x| !x.is_finite()) {
                return Err(GlossError::InvalidModel(format!(
                    "latent row {i} is not finite"
                )));
            }
            let n = norm(row);
            if n > radius + 1e-6 {
                return Err(GlossError::InvalidModel(format!(
                    "latent row {i} has norm {n} > radius {radius}"
                )));
            }
        }
        Ok(LatentStore { codes, radius })
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.codes.row(i)
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.codes.row_mut(i)
    }

    pub fn project_row(&mut self, i: usize) {
        let radius = self.radius;
        project_ball_in_place(self.codes.row_mut(i), radius);
    }

    pub fn codes(&self) -> &Matrix {
        &self.codes
    }
}

fn check_shape(count: usize, dim: usize, radius: f64) -> Result<()> {
    if count == 0 {
        return Err(GlossError::InvalidArgument(
            "latent count must be positive".into(),
        ));
    }
    if dim == 0 {
        return Err(GlossError::InvalidArgument("dim must be positive".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GlossError::InvalidArgument(
            "radius must be positive".into(),
        ));
    }
    Ok(())
}
