//! Adaptive Dormand-Prince 5(4) integrator over flat complex state vectors.
//!
//! Steps are clipped so that every output time is hit exactly; the natural
//! step size is kept across clipped steps.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Used as both the relative and the absolute error tolerance.
    pub tol: f64,
    pub max_steps: usize,
    /// Steps shorter than this (relative to the span) abort the run.
    pub min_step: f64,
    /// Absolute upper bound on the step, e.g. from a stability estimate.
    pub max_step: Option<f64>,
    /// Error per unit step: each step may spend only its share `h / span` of
    /// the tolerance, so `tol` bounds the accumulated rather than the local
    /// error. Costs roughly 3-4x the steps on long oscillatory runs.
    pub per_unit_step: bool,
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Tolerance on the global error, see [`SolverOptions::per_unit_step`].
    pub fn global(tol: f64) -> Self {
        Self { tol, per_unit_step: true, ..Self::default() }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_steps: 50_000_000, min_step: 1e-14, max_step: None, per_unit_step: false }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

// Max norm rather than RMS: in large density matrices an RMS average would
// dilute errors confined to a few weakly populated entries.
fn error_norm(tol: f64, y: &[C64], y_new: &[C64], err: &[C64]) -> f64 {
    y.iter()
        .zip(y_new)
        .zip(err)
        // sqrt of norm_sqr: `norm` goes through the much slower hypot
        .map(|((a, b), e)| e.norm_sqr().sqrt() / (tol * (1.0 + a.norm_sqr().max(b.norm_sqr()).sqrt())))
        .fold(0.0, f64::max)
}

/// Integrates `dy/dt = rhs(t, y)` across `grid`, calling `observe` with the
/// state at every grid point (including the first).
pub fn integrate<F, O>(mut rhs: F, y0: &[C64], grid: &[f64], opts: &SolverOptions, mut observe: O) -> Result<StepStats>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty output grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("output grid must be strictly increasing".into()));
    }
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    observe(0, grid[0], &y)?;
    if grid.len() == 1 {
        return Ok(stats);
    }

    let zero = C64::new(0.0, 0.0);
    let mut k = vec![vec![zero; n]; 7];
    let mut y_stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];

    let span = grid[grid.len() - 1] - grid[0];
    let min_step = opts.min_step * span;
    let mut t = grid[0];
    rhs(t, &y, &mut k[0])?;
    stats.rhs_evaluations += 1;
    let h_max = opts.max_step.map_or(span, |m| m.min(span));
    if !(h_max > 0.0) {
        return Err(Error::InvalidParameter(format!("max_step must be positive, got {h_max}")));
    }
    // the error-per-unit-step ratio scales as h^4, not h^5
    let expo = if opts.per_unit_step { 0.25 } else { 0.2 };
    let mut h = initial_step(&mut rhs, t, &y, &k[0], opts.tol, h_max, &mut stats)?.min(h_max);

    for (j, &target) in grid.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::TooManySteps { t, max_steps: opts.max_steps });
            }
            let remaining = target - t;
            let clipped = h >= remaining * (1.0 - 1e-12);
            let step = if clipped { remaining } else { h };
            if !clipped && step < min_step {
                return Err(Error::StepUnderflow { t, h: step });
            }

            let (k_head, k_tail) = k.split_at_mut(1);
            let k1 = &k_head[0];
            let [k2, k3, k4, k5, k6, k7] = k_tail else { unreachable!() };

            for i in 0..n {
                y_stage[i] = y[i] + step * (A21 * k1[i]);
            }
            rhs(t + C2 * step, &y_stage, k2)?;
            for i in 0..n {
                y_stage[i] = y[i] + step * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * step, &y_stage, k3)?;
            for i in 0..n {
                y_stage[i] = y[i] + step * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * step, &y_stage, k4)?;
            for i in 0..n {
                y_stage[i] = y[i] + step * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * step, &y_stage, k5)?;
            for i in 0..n {
                y_stage[i] = y[i] + step * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + step, &y_stage, k6)?;
            for i in 0..n {
                y_new[i] = y[i] + step * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            rhs(t + step, &y_new, k7)?;
            stats.rhs_evaluations += 6;
            for i in 0..n {
                err[i] = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let local_tol = if opts.per_unit_step { opts.tol * step / span } else { opts.tol };
            let e = error_norm(local_tol, &y, &y_new, &err);
            if !e.is_finite() {
                return Err(Error::StepUnderflow { t, h: step });
            }

            if e <= 1.0 {
                stats.accepted += 1;
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if e == 0.0 { MAX_FACTOR } else { (SAFETY * e.powf(-expo)).clamp(MIN_FACTOR, MAX_FACTOR) };
                h = if clipped { h.max(step * factor) } else { step * factor }.min(h_max);
            } else {
                stats.rejected += 1;
                h = step * (SAFETY * e.powf(-expo)).max(MIN_FACTOR);
                if h < min_step {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        observe(j, target, &y)?;
    }
    Ok(stats)
}

fn initial_step<F>(
    rhs: &mut F,
    t: f64,
    y: &[C64],
    f0: &[C64],
    tol: f64,
    h_max: f64,
    stats: &mut StepStats,
) -> Result<f64>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let scaled = |v: &[C64]| {
        let s: f64 = v.iter().zip(y).map(|(a, b)| (a.norm() / (tol * (1.0 + b.norm()))).powi(2)).sum();
        (s / y.len().max(1) as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    // the probe must stay inside the span: the rhs may be undefined beyond it
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(h_max);
    let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
    rhs(t + h0, &y1, &mut f1)?;
    stats.rhs_evaluations += 1;
    let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    Ok((100.0 * h0).min(h1))
}
