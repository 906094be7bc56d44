//! Adaptive Dormand–Prince 5(4) integrator for small ODE systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-13, max_steps: 1_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are the embedded fourth-order ones
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1`, returning `y(t1)`.
pub fn integrate<F>(f: &F, t0: f64, y0: &[f64], t1: f64, opts: &OdeOptions) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    advance(f, t0, &mut y, t1, opts)?;
    Ok(y)
}

/// Values at each of the increasing `times`, starting from `y0` at `t0`.
pub fn integrate_samples<F>(f: &F, t0: f64, y0: &[f64], times: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(times.len());
    for &ts in times {
        if ts < t {
            return Err(Error::input("sample times must be nondecreasing"));
        }
        advance(f, t, &mut y, ts, opts)?;
        t = ts;
        out.push(y.clone());
    }
    Ok(out)
}

fn advance<F>(f: &F, t0: f64, y: &mut [f64], t1: f64, opts: &OdeOptions) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if t1 == t0 {
        return Ok(());
    }
    let n = y.len();
    let span = t1 - t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut t = t0;
    let mut h = span.abs().min(0.01 * (1.0 + t0.abs())).max(1e-6 * span.abs()).copysign(span);
    f(t, y, &mut k[0]);
    let mut steps = 0;
    let mut err = f64::NAN;
    while (t1 - t) * span.signum() > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::NoConvergence {
                what: "ODE integration".into(),
                iterations: steps,
                residual: err,
                history: vec![t],
            });
        }
        steps += 1;
        if (t + h - t1) * span.signum() > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            f(t + C[s] * h, &tmp, &mut k[s]);
        }
        // y5 is the stage-7 argument (FSAL)
        y5.copy_from_slice(&tmp);
        err = 0.0;
        for i in 0..n {
            let y4 = y[i] + h * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err += ((y5[i] - y4) / sc).powi(2);
        }
        err = (err / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::BlowUp { t, index: 0 });
        }
        if err <= 1.0 {
            t = if (t1 - (t + h)).abs() < 1e-15 * t1.abs().max(1.0) { t1 } else { t + h };
            y.copy_from_slice(&y5);
            let last = k.pop().expect("seven stages");
            k.insert(0, last);
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::NoConvergence {
                what: "ODE step size".into(),
                iterations: steps,
                residual: err,
                history: vec![t, h],
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let o = OdeOptions::default();
        let y = integrate(&|_t, y: &[f64], d: &mut [f64]| d[0] = -2.0 * y[0], 0.0, &[1.0], 3.0, &o).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
        let osc = |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let y = integrate(&osc, 0.0, &[1.0, 0.0], 10.0, &o).unwrap();
        assert!((y[0] - 10.0f64.cos()).abs() < 1e-9 && (y[1] + 10.0f64.sin()).abs() < 1e-9);
        let back = integrate(&osc, 10.0, &y, 0.0, &o).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn samples_along_the_way() {
        let o = OdeOptions::default();
        let times = [0.5, 1.0, 1.0, 2.0];
        let s = integrate_samples(&|t, _y: &[f64], d: &mut [f64]| d[0] = t.cos(), 0.0, &[0.0], &times, &o).unwrap();
        for (t, y) in times.iter().zip(&s) {
            assert!((y[0] - t.sin()).abs() < 1e-9, "{} {}", y[0], t.sin());
        }
    }
}
