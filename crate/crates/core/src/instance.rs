//! Seeded sparse-recovery instances.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Draws, in order:
//!
//! 1. `A`, row-major, entries `N(0, 1) / √rows`;
//! 2. the support of `x*`: a partial Fisher–Yates shuffle of `0..cols`,
//!    position `i` swapped with `i + ⌊u·(cols − i)⌋`;
//! 3. one sign per support entry, `−1` when `u < 0.5`, else `+1`;
//! 4. noise `N(0, 1)` per row, scaled by `noise_sigma`.
//!
//! Uniforms are `(next_u64 >> 11) · 2⁻⁵³`. Each normal consumes two uniforms
//! `u₁, u₂` and is `√(−2 ln(1 − u₁)) · cos(2π u₂)` (Box–Muller, cosine branch).

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{DenseMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub rows: usize,
    pub cols: usize,
    pub sparsity: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 64,
            sparsity: 4,
            noise_sigma: 0.01,
            seed: 42,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("rows/cols", "must be at least 1"));
        }
        if self.sparsity > self.cols {
            return Err(invalid(
                "sparsity",
                format!("{} exceeds cols = {}", self.sparsity, self.cols),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub a: DenseMatrix,
    pub b: Vector,
    pub x_star: Vector,
}

pub(crate) fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct Draws(Xoshiro256PlusPlus);

impl Draws {
    fn uniform(&mut self) -> f64 {
        unit_f64(self.0.next_u64())
    }

    fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = Draws(Xoshiro256PlusPlus::seed_from_u64(spec.seed));

    let scale = 1.0 / (spec.rows as f64).sqrt();
    let data: Vec<f64> = (0..spec.rows * spec.cols)
        .map(|_| rng.normal() * scale)
        .collect();
    let a = DenseMatrix::new(spec.rows, spec.cols, data)?;

    let mut idx: Vec<usize> = (0..spec.cols).collect();
    for i in 0..spec.sparsity {
        let span = spec.cols - i;
        let j = i + ((rng.uniform() * span as f64) as usize).min(span - 1);
        idx.swap(i, j);
    }
    let mut x_star = vec![0.0; spec.cols];
    for &i in &idx[..spec.sparsity] {
        x_star[i] = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    }
    let x_star = Vector::new(x_star)?;

    let clean = a.matvec(&x_star)?;
    let b: Vec<f64> = clean
        .as_slice()
        .iter()
        .map(|v| v + spec.noise_sigma * rng.normal())
        .collect();
    Ok(Instance {
        a,
        b: Vector::new(b)?,
        x_star,
    })
}
