//! Order-preserving dispersal substeps shared by the linear and nonlinear
//! solvers.
//!
//! Every variant maps nonnegative fields to nonnegative fields and preserves
//! pointwise order: forward Euler for `dt <= h²/2`, Crank–Nicolson for
//! `dt <= h²` (the explicit half has a nonnegative stencil and the implicit
//! half is an M-matrix), and a normalized fourth-order Taylor polynomial of
//! the convolution, whose coefficients are all positive.

use crate::dispersal::{convolve, Dispersal, Grid};
use crate::error::{Error, Result};
use crate::simulator::StepMode;

#[derive(Debug, Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    pad: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Kind {
    Explicit { r: f64 },
    CrankNicolson { r: f64, cp: Vec<f64>, inv: Vec<f64> },
    Taylor { weights: Vec<f64>, dt: f64, norm: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Diffuser {
    kind: Kind,
}

/// Largest admissible step for the given dispersal and mode.
pub(crate) fn stability_bound(grid: &Grid, dispersal: &Dispersal, mode: StepMode) -> (f64, &'static str) {
    let h2 = grid.h() * grid.h();
    match (dispersal, mode) {
        (Dispersal::Random, StepMode::Explicit) => (0.5 * h2, "explicit diffusion needs dt <= h^2/2"),
        (Dispersal::Random, StepMode::Implicit) => (h2, "order-preserving Crank-Nicolson needs dt <= h^2"),
        (Dispersal::Nonlocal(_), _) => (0.5, "nonlocal dispersal step needs dt <= 1/2"),
    }
}

impl Diffuser {
    /// Substep of length `dt` for `u_t = A u` (random) or `u_t = A(μ) u` (nonlocal;
    /// the random tilt `μ² u` is a reaction term and is ignored here).
    pub(crate) fn new(grid: &Grid, dispersal: &Dispersal, mode: StepMode, dt: f64, mu: f64) -> Result<Self> {
        dispersal.check_grid(grid)?;
        let (bound, reason) = stability_bound(grid, dispersal, mode);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::Stability { dt, bound, reason });
        }
        let r = dt / (grid.h() * grid.h());
        let kind = match (dispersal, mode) {
            (Dispersal::Random, StepMode::Explicit) => Kind::Explicit { r },
            (Dispersal::Random, StepMode::Implicit) => {
                let n = grid.len();
                let diag = 1.0 + r;
                let mut cp = vec![0.0; n];
                let mut inv = vec![0.0; n];
                inv[0] = 1.0 / diag;
                cp[0] = -r * inv[0];
                for i in 1..n {
                    let sub = if i == n - 1 { -r } else { -0.5 * r };
                    let sup = if i == n - 1 { 0.0 } else { -0.5 * r };
                    inv[i] = 1.0 / (diag - sub * cp[i - 1]);
                    cp[i] = sup * inv[i];
                }
                Kind::CrankNicolson { r, cp, inv }
            }
            (Dispersal::Nonlocal(k), _) => {
                let weights = if mu == 0.0 { k.weights().to_vec() } else { k.tilted_weights(mu) };
                let norm = 1.0 + dt * (1.0 + dt / 2.0 * (1.0 + dt / 3.0 * (1.0 + dt / 4.0)));
                Kind::Taylor { weights, dt, norm }
            }
        };
        Ok(Diffuser { kind })
    }

    pub(crate) fn apply(&self, u: &mut [f64], s: &mut Scratch) {
        let n = u.len();
        match &self.kind {
            Kind::Explicit { r } => {
                s.a.clear();
                s.a.extend_from_slice(u);
                let a = &s.a;
                u[0] = a[0] + 2.0 * r * (a[1] - a[0]);
                u[n - 1] = a[n - 1] + 2.0 * r * (a[n - 2] - a[n - 1]);
                for j in 1..n - 1 {
                    u[j] = a[j] + r * (a[j - 1] - 2.0 * a[j] + a[j + 1]);
                }
            }
            Kind::CrankNicolson { r, cp, inv } => {
                let hr = 0.5 * r;
                // right-hand side (I + r/2 L) u, then forward sweep
                s.a.resize(n, 0.0);
                let d = &mut s.a;
                d[0] = u[0] + hr * 2.0 * (u[1] - u[0]);
                d[n - 1] = u[n - 1] + hr * 2.0 * (u[n - 2] - u[n - 1]);
                for j in 1..n - 1 {
                    d[j] = u[j] + hr * (u[j - 1] - 2.0 * u[j] + u[j + 1]);
                }
                d[0] *= inv[0];
                for i in 1..n {
                    let sub = if i == n - 1 { -r } else { -hr };
                    d[i] = (d[i] - sub * d[i - 1]) * inv[i];
                }
                u[n - 1] = d[n - 1];
                for i in (0..n - 1).rev() {
                    u[i] = d[i] - cp[i] * u[i + 1];
                }
            }
            Kind::Taylor { weights, dt, norm } => {
                // Horner form of Σ_{k<=4} (dt K)^k / k!
                s.a.clear();
                s.a.extend_from_slice(u);
                s.b.resize(n, 0.0);
                for k in (1..=4).rev() {
                    let c = dt / k as f64;
                    convolve(&s.a, weights, &mut s.pad, &mut s.b);
                    for j in 0..n {
                        s.a[j] = u[j] + c * s.b[j];
                    }
                }
                let inv = 1.0 / norm;
                for j in 0..n {
                    u[j] = s.a[j] * inv;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersal::{Kernel, KernelShape};

    fn grid() -> Grid {
        Grid::new(-10.0, 10.0, 201).unwrap()
    }

    #[test]
    fn steps_preserve_constants() {
        let g = grid();
        let k = Kernel::new(KernelShape::Triangle, 1.0, g.h()).unwrap();
        let cases = [
            (Dispersal::Random, StepMode::Explicit, 0.005),
            (Dispersal::Random, StepMode::Implicit, 0.01),
            (Dispersal::Nonlocal(k), StepMode::Explicit, 0.1),
        ];
        for (d, m, dt) in cases {
            let diff = Diffuser::new(&g, &d, m, dt, 0.0).unwrap();
            let mut u = vec![0.37; g.len()];
            let mut s = Scratch::default();
            for _ in 0..50 {
                diff.apply(&mut u, &mut s);
            }
            assert!(u.iter().all(|v| (v - 0.37).abs() < 1e-14), "{m:?}");
        }
    }

    #[test]
    fn stability_bounds_enforced() {
        let g = grid();
        assert!(matches!(Diffuser::new(&g, &Dispersal::Random, StepMode::Explicit, 0.006, 0.0), Err(Error::Stability { .. })));
        assert!(Diffuser::new(&g, &Dispersal::Random, StepMode::Implicit, 0.011, 0.0).is_err());
        let k = Kernel::new(KernelShape::Uniform, 1.0, g.h()).unwrap();
        assert!(Diffuser::new(&g, &Dispersal::Nonlocal(k), StepMode::Explicit, 0.6, 0.0).is_err());
    }

    #[test]
    fn crank_nicolson_matches_heat_mode() {
        // cos(πx/L) mode on the reflecting interval decays like exp(-k² t)
        let g = Grid::new(0.0, 10.0, 401).unwrap();
        let dt = g.h() * g.h();
        let diff = Diffuser::new(&g, &Dispersal::Random, StepMode::Implicit, dt, 0.0).unwrap();
        let k = std::f64::consts::PI / 10.0;
        let mut u: Vec<f64> = g.points().iter().map(|x| (k * x).cos()).collect();
        let mut s = Scratch::default();
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            diff.apply(&mut u, &mut s);
        }
        let decay = (-k * k * steps as f64 * dt).exp();
        assert!((u[0] - decay).abs() < 1e-4);
    }

    #[test]
    fn order_preserved() {
        let g = grid();
        let k = Kernel::new(KernelShape::Uniform, 1.5, g.h()).unwrap();
        for (d, m, dt) in [
            (Dispersal::Random, StepMode::Implicit, 0.01),
            (Dispersal::Random, StepMode::Explicit, 0.005),
            (Dispersal::Nonlocal(k), StepMode::Explicit, 0.5),
        ] {
            let diff = Diffuser::new(&g, &d, m, dt, 0.3).unwrap();
            let mut lo: Vec<f64> = (0..g.len()).map(|j| if j % 7 == 0 { 1.0 } else { 0.0 }).collect();
            let mut hi: Vec<f64> = lo.iter().map(|v| v + 1e-3).collect();
            let mut s = Scratch::default();
            for _ in 0..100 {
                diff.apply(&mut lo, &mut s);
                diff.apply(&mut hi, &mut s);
                assert!(lo.iter().zip(&hi).all(|(a, b)| *a >= 0.0 && a <= b));
            }
        }
    }
}
