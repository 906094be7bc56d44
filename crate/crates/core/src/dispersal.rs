//! Truncated 1-D grid and the two dispersal operators: the Laplacian with
//! zero-flux ends and convolution against a compact unit-mass kernel with
//! constant extension past the ends. Both come in the exponentially tilted
//! form used to price decaying fronts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `x_j = x_min + j h`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::input(format!("grid needs at least 3 points, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::input(format!("bad grid interval [{x_min}, {x_max}]")));
        }
        Ok(Grid { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Index of the grid point closest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.h()).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelShape {
    Uniform,
    Triangle,
    RaisedCosine,
}

impl KernelShape {
    /// Continuous unit-mass density on `[-r, r]`.
    pub fn density(self, z: f64, r: f64) -> f64 {
        let a = z.abs();
        if a > r {
            return 0.0;
        }
        match self {
            KernelShape::Uniform => 0.5 / r,
            KernelShape::Triangle => (1.0 - a / r) / r,
            KernelShape::RaisedCosine => (1.0 + (std::f64::consts::PI * z / r).cos()) / (2.0 * r),
        }
    }

    /// Closed-form `∫ κ(z) e^{-μz} dz` of the continuous density.
    pub fn exact_moment(self, mu: f64, r: f64) -> f64 {
        let s = mu * r;
        if s.abs() < 1e-4 {
            // even Taylor series in s up to s^4
            let (c2, c4) = match self {
                KernelShape::Uniform => (1.0 / 6.0, 1.0 / 120.0),
                KernelShape::Triangle => (1.0 / 12.0, 1.0 / 360.0),
                KernelShape::RaisedCosine => {
                    let p2 = std::f64::consts::PI.powi(2);
                    ((p2 - 6.0) / (6.0 * p2), (p2 * p2 - 20.0 * p2 + 120.0) / (120.0 * p2 * p2))
                }
            };
            return 1.0 + c2 * s * s + c4 * s.powi(4);
        }
        match self {
            KernelShape::Uniform => s.sinh() / s,
            KernelShape::Triangle => 2.0 * (s.cosh() - 1.0) / (s * s),
            KernelShape::RaisedCosine => {
                let p2 = std::f64::consts::PI.powi(2);
                s.sinh() / s * p2 / (p2 + s * s)
            }
        }
    }
}

/// Compact symmetric kernel sampled at a fixed spacing, stored as trapezoid
/// weights `w_j ≈ h κ(j h)` renormalized to total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    shape: KernelShape,
    radius: f64,
    h: f64,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(shape: KernelShape, radius: f64, h: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && h.is_finite() && h > 0.0) {
            return Err(Error::input("kernel radius and spacing must be positive"));
        }
        let ratio = radius / h;
        let m = (ratio + 1e-9).floor() as usize;
        if m == 0 {
            return Err(Error::input(format!(
                "kernel radius {radius} is smaller than the grid spacing {h}"
            )));
        }
        let on_edge = (ratio - m as f64).abs() < 1e-9;
        let mut weights: Vec<f64> = (0..=2 * m)
            .map(|q| {
                let j = q as isize - m as isize;
                let z = j as f64 * h;
                let mut d = shape.density(z, radius);
                if on_edge && j.unsigned_abs() == m {
                    // the uniform density jumps at ±R; the one-sided value
                    // with half trapezoid weight keeps second-order accuracy
                    d = if shape == KernelShape::Uniform { 0.5 * shape.density(0.0, radius) } else { 0.0 };
                }
                h * d
            })
            .collect();
        let mass: f64 = weights.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::input("kernel has no mass on this grid"));
        }
        for w in &mut weights {
            *w /= mass;
        }
        // enforce exact symmetry after rounding
        for q in 0..m {
            let s = 0.5 * (weights[q] + weights[2 * m - q]);
            weights[q] = s;
            weights[2 * m - q] = s;
        }
        Ok(Kernel { shape, radius, h, weights })
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Half-width in grid points.
    pub fn half_width(&self) -> usize {
        self.weights.len() / 2
    }

    /// Quadrature weights for offsets `-m..=m`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Density samples `κ(j h)` implied by the weights.
    pub fn samples(&self) -> Vec<f64> {
        let m = self.half_width();
        self.weights
            .iter()
            .enumerate()
            .map(|(q, w)| if q == 0 || q == 2 * m { 2.0 * w / self.h } else { w / self.h })
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weights of the tilted kernel `e^{-μz} κ(z)`.
    pub fn tilted_weights(&self, mu: f64) -> Vec<f64> {
        let m = self.half_width() as isize;
        self.weights
            .iter()
            .enumerate()
            .map(|(q, w)| w * (-mu * (q as isize - m) as f64 * self.h).exp())
            .collect()
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if (self.h - grid.h()).abs() > 1e-9 * grid.h() {
            return Err(Error::input(format!(
                "kernel sampled at spacing {} but grid spacing is {}",
                self.h,
                grid.h()
            )));
        }
        if self.radius >= 0.5 * grid.length() {
            return Err(Error::input(format!(
                "kernel radius {} must be below half the domain length {}",
                self.radius,
                0.5 * grid.length()
            )));
        }
        Ok(())
    }
}

/// `m(μ) = ∫ κ(z) e^{-μz} dz` by the kernel's trapezoid rule.
pub fn kernel_moment(k: &Kernel, mu: f64) -> f64 {
    k.tilted_weights(mu).iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dispersal {
    Random,
    Nonlocal(Kernel),
}

impl Dispersal {
    /// Action of the tilted operator on constants: `μ²` or `m(μ) - 1`.
    pub fn symbol(&self, mu: f64) -> f64 {
        match self {
            Dispersal::Random => mu * mu,
            Dispersal::Nonlocal(k) => kernel_moment(k, mu) - 1.0,
        }
    }

    /// Distance the operator reaches: 0 for the Laplacian, `R` for kernels.
    pub fn reach(&self) -> f64 {
        match self {
            Dispersal::Random => 0.0,
            Dispersal::Nonlocal(k) => k.radius(),
        }
    }

    pub fn is_nonlocal(&self) -> bool {
        matches!(self, Dispersal::Nonlocal(_))
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        match self {
            Dispersal::Random => Ok(()),
            Dispersal::Nonlocal(k) => k.check_grid(grid),
        }
    }

    pub fn apply(&self, u: &[f64], grid: &Grid) -> Result<Vec<f64>> {
        match self {
            Dispersal::Random => apply_random(u, grid),
            Dispersal::Nonlocal(k) => apply_nonlocal(u, grid, k),
        }
    }

    pub fn apply_tilted(&self, u: &[f64], grid: &Grid, mu: f64) -> Result<Vec<f64>> {
        match self {
            Dispersal::Random => apply_tilted_random(u, grid, mu),
            Dispersal::Nonlocal(k) => apply_tilted_nonlocal(u, grid, k, mu),
        }
    }
}

fn check_len(u: &[f64], grid: &Grid) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::input(format!("field has {} values, grid has {}", u.len(), grid.len())));
    }
    Ok(())
}

/// Second difference with reflecting ghost values `u_{-1} = u_1`, `u_n = u_{n-2}`.
pub fn apply_random(u: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    check_len(u, grid)?;
    let n = u.len();
    let ih2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (u[1] - u[0]) * ih2;
    out[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) * ih2;
    for j in 1..n - 1 {
        out[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * ih2;
    }
    Ok(out)
}

pub fn apply_tilted_random(u: &[f64], grid: &Grid, mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::input(format!("tilt must be nonnegative, got {mu}")));
    }
    let mut out = apply_random(u, grid)?;
    if mu != 0.0 {
        let m2 = mu * mu;
        for (o, &v) in out.iter_mut().zip(u) {
            *o += m2 * v;
        }
    }
    Ok(out)
}

pub fn apply_nonlocal(u: &[f64], grid: &Grid, k: &Kernel) -> Result<Vec<f64>> {
    apply_tilted_nonlocal(u, grid, k, 0.0)
}

pub fn apply_tilted_nonlocal(u: &[f64], grid: &Grid, k: &Kernel, mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::input(format!("tilt must be nonnegative, got {mu}")));
    }
    check_len(u, grid)?;
    k.check_grid(grid)?;
    let w = if mu == 0.0 { k.weights().to_vec() } else { k.tilted_weights(mu) };
    let mut out = vec![0.0; u.len()];
    let mut pad = Vec::new();
    convolve(u, &w, &mut pad, &mut out);
    for (o, &v) in out.iter_mut().zip(u) {
        *o -= v;
    }
    Ok(out)
}

/// `out_i = Σ_j w_j u_{i+j}` with the field extended by its end values.
pub(crate) fn convolve(u: &[f64], w: &[f64], pad: &mut Vec<f64>, out: &mut [f64]) {
    let m = w.len() / 2;
    let n = u.len();
    pad.clear();
    pad.extend(std::iter::repeat_n(u[0], m));
    pad.extend_from_slice(u);
    pad.extend(std::iter::repeat_n(u[n - 1], m));
    let pad = &pad[..];
    let row = |i: usize| pad[i..i + w.len()].iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    if n * w.len() > 1 << 18 {
        out.par_chunks_mut(256).enumerate().for_each(|(c, chunk)| {
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = row(c * 256 + k);
            }
        });
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = row(i);
        }
    }
}
