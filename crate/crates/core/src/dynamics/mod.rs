//! Time evolution in three pictures: the 3x3 Heisenberg mode vector, the
//! Schrödinger state vector, and the Lindblad density matrix.
//!
//! All evolutions sample the solution on a fixed output grid, independent of
//! the adaptive internal steps.

mod ode;

use nalgebra::{DMatrix, Matrix3};
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FockSpace, Operator, StateVector, CAVITY1, CAVITY2, MECHANICS};
use crate::models::{ModeMatrix, ModeVector, TimeDependentHamiltonian, HERMITIAN_TOL};

pub use ode::{integrate, SolverOptions, StepStats};

/// Default relative tolerance for vector evolutions.
pub const VECTOR_TOL: f64 = 1e-9;
/// Default relative tolerance for density-matrix evolutions.
pub const DENSITY_TOL: f64 = 1e-8;
/// Default number of output samples.
pub const DEFAULT_POINTS: usize = 600;

/// Evenly spaced output times `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidParameter(format!("invalid time window [{start}, {end}]")));
        }
        if points < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 output points, got {points}")));
        }
        Ok(Self { start, end, points })
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n)
            .map(|k| if k == n { self.end } else { self.start + (self.end - self.start) * k as f64 / n as f64 })
            .collect()
    }
}

/// Solver bookkeeping attached to every trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub steps: StepStats,
    /// Largest deviation of the norm (vectors) or trace (density matrices)
    /// from its initial value over the output grid.
    pub max_norm_drift: f64,
    pub max_hermiticity_defect: f64,
    /// Smallest eigenvalue seen at positivity checkpoints.
    pub min_eigenvalue: Option<f64>,
    pub min_diagonal: Option<f64>,
    /// Largest population on the top mechanical Fock level.
    pub max_top_mech_population: Option<f64>,
    pub mech_dim: Option<usize>,
}

impl Diagnostics {
    /// Positivity violation as reported by the monitor: `max(0, -min_eigenvalue)`.
    pub fn positivity_violation(&self) -> f64 {
        self.min_eigenvalue.map_or(0.0, |l| (-l).max(0.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Diagnostics,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

/// Cavity decay, mechanical damping and bath occupancy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationRates {
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma_m: f64,
    pub n_th: f64,
}

impl DissipationRates {
    pub fn closed() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("kappa1", self.kappa1), ("kappa2", self.kappa2), ("gamma_m", self.gamma_m), ("n_th", self.n_th)]
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Collapse operators `sqrt(k1) a1`, `sqrt(k2) a2`,
    /// `sqrt(gamma (n_th + 1)) b`, `sqrt(gamma n_th) b^dag`, skipping zero rates.
    pub fn jump_operators(&self, space: &FockSpace) -> Result<Vec<Operator>> {
        self.validate()?;
        let a1 = fock::ladder(space, CAVITY1)?;
        let a2 = fock::ladder(space, CAVITY2)?;
        let b = fock::ladder(space, MECHANICS)?;
        let bd = b.adjoint();
        let ops = [
            (self.kappa1, a1),
            (self.kappa2, a2),
            (self.gamma_m * (self.n_th + 1.0), b),
            (self.gamma_m * self.n_th, bd),
        ];
        Ok(ops
            .into_iter()
            .filter(|(rate, _)| *rate > 0.0)
            .map(|(rate, op)| op.scale(C64::new(rate.sqrt(), 0.0)))
            .collect())
    }
}

/// A possibly time-dependent Hermitian generator acting on a Fock space.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// `out += coef * H(t) x`.
    fn add_apply(&self, t: f64, coef: C64, x: &[C64], out: &mut [C64]);

    /// `out += coef * H(t) m` for a square dense `m`.
    fn add_apply_left(&self, t: f64, coef: C64, m: ArrayView2<C64>, out: ArrayViewMut2<C64>);
}

impl Generator for Operator {
    fn dim(&self) -> usize {
        Operator::dim(self)
    }

    fn add_apply(&self, _t: f64, coef: C64, x: &[C64], out: &mut [C64]) {
        self.add_mul_vec(coef, x, out);
    }

    fn add_apply_left(&self, _t: f64, coef: C64, m: ArrayView2<C64>, out: ArrayViewMut2<C64>) {
        self.add_left_mul(coef, m, out);
    }
}

impl Generator for TimeDependentHamiltonian {
    fn dim(&self) -> usize {
        TimeDependentHamiltonian::dim(self)
    }

    fn add_apply(&self, t: f64, coef: C64, x: &[C64], out: &mut [C64]) {
        self.constant().add_mul_vec(coef, x, out);
        for (c, op) in self.terms_at(t) {
            if c != 0.0 {
                op.add_mul_vec(coef * c, x, out);
            }
        }
    }

    fn add_apply_left(&self, t: f64, coef: C64, m: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        self.constant().add_left_mul(coef, m, out.view_mut());
        for (c, op) in self.terms_at(t) {
            if c != 0.0 {
                op.add_left_mul(coef * c, m, out.view_mut());
            }
        }
    }
}

/// Adapts a closure `t -> H(t)` into a [`Generator`].
pub struct OperatorFn<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> Operator + Sync> OperatorFn<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64) -> Operator + Sync> Generator for OperatorFn<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn add_apply(&self, t: f64, coef: C64, x: &[C64], out: &mut [C64]) {
        (self.f)(t).add_mul_vec(coef, x, out);
    }

    fn add_apply_left(&self, t: f64, coef: C64, m: ArrayView2<C64>, out: ArrayViewMut2<C64>) {
        (self.f)(t).add_left_mul(coef, m, out);
    }
}

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

fn mode_rhs<M>(matrix_fn: &M, t: f64, v: &[C64], dv: &mut [C64], columns: usize) -> Result<()>
where
    M: Fn(f64) -> Result<ModeMatrix>,
{
    let m = matrix_fn(t)?;
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitian(defect));
    }
    for c in 0..columns {
        for r in 0..3 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..3 {
                acc += m.matrix[(r, k)] * v[3 * c + k];
            }
            dv[3 * c + r] = MINUS_I * acc;
        }
    }
    Ok(())
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Integrates `i dv/dt = M(t) v` for the mode vector `[a1, b, a2]`.
pub fn evolve_mode_vector<M>(
    matrix_fn: M,
    v0: ModeVector,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory<ModeVector>>
where
    M: Fn(f64) -> Result<ModeMatrix>,
{
    let times = grid.times();
    let n0 = v0.norm_squared();
    let mut states = Vec::with_capacity(times.len());
    let mut diagnostics = Diagnostics::default();
    diagnostics.steps = integrate(
        |t, v, dv| mode_rhs(&matrix_fn, t, v, dv, 1),
        v0.as_slice(),
        &times,
        opts,
        |_, _, v| {
            diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((norm_sqr(v) - n0).abs());
            states.push(ModeVector::from_column_slice(v));
            Ok(())
        },
    )?;
    Ok(Trajectory { times, states, diagnostics })
}

/// Propagator of `i dU/dt = M(t) U` over a span.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    pub matrix: Matrix3<C64>,
    /// `max |U^dag U - I|`.
    pub unitarity_defect: f64,
    pub steps: StepStats,
}

pub fn propagator<M>(matrix_fn: M, start: f64, end: f64, opts: &SolverOptions) -> Result<Propagator>
where
    M: Fn(f64) -> Result<ModeMatrix>,
{
    let grid = TimeGrid::new(start, end, 2)?;
    let identity = Matrix3::<C64>::identity();
    let mut last = Vec::new();
    let steps = integrate(
        |t, v, dv| mode_rhs(&matrix_fn, t, v, dv, 3),
        identity.as_slice(),
        &grid.times(),
        opts,
        |_, _, v| {
            last = v.to_vec();
            Ok(())
        },
    )?;
    // columns of U were stored column-major
    let matrix = Matrix3::from_column_slice(&last);
    let unitarity_defect = (matrix.adjoint() * matrix - identity).iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(Propagator { matrix, unitarity_defect, steps })
}

/// Integrates `i d|psi>/dt = H(t) |psi>`.
pub fn evolve_state<G: Generator + ?Sized>(
    h: &G,
    psi0: &StateVector,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<Trajectory<StateVector>> {
    if psi0.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi0.len() });
    }
    let times = grid.times();
    let psi0 = psi0.as_standard_layout().to_owned();
    let n0 = norm_sqr(psi0.as_slice().unwrap());
    let mut states = Vec::with_capacity(times.len());
    let mut diagnostics = Diagnostics::default();
    diagnostics.steps = integrate(
        |t, x, dx| {
            dx.fill(C64::new(0.0, 0.0));
            h.add_apply(t, MINUS_I, x, dx);
            Ok(())
        },
        psi0.as_slice().unwrap(),
        &times,
        opts,
        |_, _, x| {
            diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((norm_sqr(x) - n0).abs());
            states.push(StateVector::from(x.to_vec()));
            Ok(())
        },
    )?;
    Ok(Trajectory { times, states, diagnostics })
}

/// Options for [`evolve_lindblad`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LindbladOptions {
    pub solver: SolverOptions,
    /// Abort with [`Error::TruncationAlarm`] once the top mechanical level
    /// holds more than this population.
    pub truncation_threshold: Option<f64>,
    /// Full eigenvalue positivity check every this many output points (and
    /// always at the last one).
    pub positivity_stride: usize,
    /// Trace or Hermiticity defect beyond which the run is declared diverged.
    pub divergence_threshold: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::with_tol(DENSITY_TOL),
            truncation_threshold: Some(1e-6),
            positivity_stride: 50,
            divergence_threshold: 1e-3,
        }
    }
}

/// `dst[i, j] = f(src[i, j], src[j, i])` for row-major `n x n` buffers, in
/// cache-sized tiles.
fn transpose_combine(n: usize, src: &[C64], dst: &mut [C64], f: impl Fn(C64, C64) -> C64) {
    const TILE: usize = 32;
    for bi in (0..n).step_by(TILE) {
        for bj in (0..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                for j in bj..(bj + TILE).min(n) {
                    dst[i * n + j] = f(src[i * n + j], src[j * n + i]);
                }
            }
        }
    }
}

fn top_mech_population(rho: ArrayView2<C64>, space: &FockSpace) -> f64 {
    let top = space.dims()[MECHANICS] - 1;
    (0..space.total_dim()).filter(|&i| space.occupations(i)[MECHANICS] == top).map(|i| rho[[i, i]].re).sum()
}

fn min_eigenvalue(rho: ArrayView2<C64>) -> f64 {
    let n = rho.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| (rho[[i, j]] + rho[[j, i]].conj()) * 0.5);
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Streaming Lindblad evolution. `observe` sees the density matrix at every
/// output time and may abort the run by returning an error.
///
/// Solves `drho/dt = -i[H, rho] + sum_j (L_j rho L_j^dag - {L_j^dag L_j, rho}/2)`
/// with the collapse operators of [`DissipationRates::jump_operators`].
#[allow(clippy::too_many_arguments)]
pub fn evolve_lindblad_with<G, O>(
    space: &FockSpace,
    h: &G,
    rho0: &DensityMatrix,
    rates: &DissipationRates,
    grid: &TimeGrid,
    opts: &LindbladOptions,
    mut observe: O,
) -> Result<Diagnostics>
where
    G: Generator + ?Sized,
    O: FnMut(f64, ArrayView2<C64>) -> Result<()>,
{
    let d = space.total_dim();
    if h.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: h.dim() });
    }
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho0.nrows() });
    }
    let jumps = rates.jump_operators(space)?;
    let damping = jumps.iter().fold(Operator::zeros(d), |acc, l| acc.add(&l.adjoint().matmul(l)));

    let times = grid.times();
    let last_index = times.len() - 1;
    let rho0 = rho0.as_standard_layout().to_owned();
    let tr0 = fock::trace(&rho0).re;
    let mut x = Array2::<C64>::zeros((d, d));
    let mut herm_part = Array2::<C64>::zeros((d, d));
    let zero = C64::new(0.0, 0.0);

    let mut diagnostics = Diagnostics { mech_dim: Some(space.dims()[MECHANICS]), ..Default::default() };
    let mut min_eig = f64::INFINITY;
    let mut min_diag = f64::INFINITY;
    let mut max_top: f64 = 0.0;

    let steps = integrate(
        |t, r, dr| {
            // The X + X^dag form below is only the Lindblad generator on
            // Hermitian input; on an anti-Hermitian residue iB it gives the
            // anticommutator {H, B}, which grows. Evaluate it on the Hermitian part.
            transpose_combine(d, r, herm_part.as_slice_mut().unwrap(), |a, b| (a + b.conj()) * 0.5);
            let rho = herm_part.view();
            // X = (-i H - D/2) rho, then X + X^dag covers both commutator and
            // anticommutator terms.
            x.fill(zero);
            h.add_apply_left(t, MINUS_I, rho, x.view_mut());
            damping.add_left_mul(C64::new(-0.5, 0.0), rho, x.view_mut());
            transpose_combine(d, x.as_slice().unwrap(), dr, |a, b| a + b.conj());
            let mut out = ArrayViewMut2::from_shape((d, d), dr).unwrap();
            for l in &jumps {
                l.add_sandwich(rho, out.view_mut());
            }
            Ok(())
        },
        rho0.as_slice().unwrap(),
        &times,
        &opts.solver,
        |k, t, r| {
            let rho = ArrayView2::from_shape((d, d), r).unwrap();
            let tr: f64 = rho.diag().iter().map(|v| v.re).sum();
            diagnostics.max_norm_drift = diagnostics.max_norm_drift.max((tr - tr0).abs());
            let mut herm: f64 = 0.0;
            for i in 0..d {
                min_diag = min_diag.min(rho[[i, i]].re);
                for j in i..d {
                    herm = herm.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
                }
            }
            diagnostics.max_hermiticity_defect = diagnostics.max_hermiticity_defect.max(herm);
            let defect = herm.max((tr - tr0).abs());
            if !(defect <= opts.divergence_threshold) {
                return Err(Error::Diverged { t, defect });
            }
            if opts.positivity_stride > 0 && (k % opts.positivity_stride == 0 || k == last_index) {
                min_eig = min_eig.min(min_eigenvalue(rho));
            }
            let top = top_mech_population(rho, space);
            max_top = max_top.max(top);
            if let Some(threshold) = opts.truncation_threshold {
                if top > threshold {
                    return Err(Error::TruncationAlarm { t, population: top, cutoff: space.dims()[MECHANICS] });
                }
            }
            observe(t, rho)
        },
    )?;
    diagnostics.steps = steps;
    diagnostics.min_eigenvalue = min_eig.is_finite().then_some(min_eig);
    diagnostics.min_diagonal = Some(min_diag);
    diagnostics.max_top_mech_population = Some(max_top);
    Ok(diagnostics)
}

/// Lindblad evolution keeping every output density matrix.
pub fn evolve_lindblad<G: Generator + ?Sized>(
    space: &FockSpace,
    h: &G,
    rho0: &DensityMatrix,
    rates: &DissipationRates,
    grid: &TimeGrid,
    opts: &LindbladOptions,
) -> Result<Trajectory<DensityMatrix>> {
    let mut times = Vec::with_capacity(grid.points);
    let mut states = Vec::with_capacity(grid.points);
    let diagnostics = evolve_lindblad_with(space, h, rho0, rates, grid, opts, |t, rho| {
        times.push(t);
        states.push(rho.to_owned());
        Ok(())
    })?;
    Ok(Trajectory { times, states, diagnostics })
}
