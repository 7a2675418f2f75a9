//! Populations, phonon statistics, transfer fidelity and dark-mode overlap.

use ndarray::{ArrayView2, Ix1, Ix2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, FockSpace, StateVector, CAVITY1, CAVITY2};
use crate::models::{dark_mode, ModeVector};
use crate::pulses::CouplingSchedule;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("empty series")
    }

    /// `(time, value)` at the (first) maximum.
    pub fn max(&self) -> (f64, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        (self.times[k], v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean over the last `fraction` of the samples (at least one sample).
    pub fn tail_mean(&self, fraction: f64) -> f64 {
        let n = ((self.len() as f64 * fraction).round() as usize).clamp(1, self.len());
        self.values[self.len() - n..].iter().sum::<f64>() / n as f64
    }
}

/// States whose mean mode occupations can be read off the diagonal.
pub trait Occupations {
    fn dim(&self) -> usize;
    fn probability(&self, index: usize) -> f64;

    /// `<a1^dag a1>, <b^dag b>, <a2^dag a2>`.
    fn mode_occupations(&self, space: &FockSpace) -> Result<[f64; 3]> {
        if self.dim() != space.total_dim() {
            return Err(Error::DimensionMismatch { expected: space.total_dim(), found: self.dim() });
        }
        let mut out = [0.0; 3];
        for i in 0..space.total_dim() {
            let p = self.probability(i);
            let occ = space.occupations(i);
            for m in 0..3 {
                out[m] += p * occ[m] as f64;
            }
        }
        Ok(out)
    }
}

impl Occupations for ndarray::ArrayBase<ndarray::OwnedRepr<C64>, Ix1> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn probability(&self, index: usize) -> f64 {
        self[index].norm_sqr()
    }
}

impl Occupations for ndarray::ArrayBase<ndarray::OwnedRepr<C64>, Ix2> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn probability(&self, index: usize) -> f64 {
        self[[index, index]].re
    }
}

impl Occupations for ArrayView2<'_, C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn probability(&self, index: usize) -> f64 {
        self[[index, index]].re
    }
}

/// Per-mode occupation series `(cavity 1, mechanics, cavity 2)`.
pub fn populations<S: Occupations>(traj: &Trajectory<S>, space: &FockSpace) -> Result<[TimeSeries; 3]> {
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for s in &traj.states {
        let occ = s.mode_occupations(space)?;
        for m in 0..3 {
            cols[m].push(occ[m]);
        }
    }
    let [c1, mech, c2] = cols;
    Ok([
        TimeSeries::new(traj.times.clone(), c1),
        TimeSeries::new(traj.times.clone(), mech),
        TimeSeries::new(traj.times.clone(), c2),
    ])
}

/// Single-excitation reading of a mode-vector trajectory: `excitation * |v_i|^2`.
pub fn mode_populations(traj: &Trajectory<ModeVector>, excitation: f64) -> [TimeSeries; 3] {
    let col = |k: usize| {
        TimeSeries::new(traj.times.clone(), traj.states.iter().map(|v| excitation * v[k].norm_sqr()).collect())
    };
    [col(0), col(1), col(2)]
}

/// Largest mean phonon number along a trajectory.
pub fn max_phonon<S: Occupations>(traj: &Trajectory<S>, space: &FockSpace) -> Result<f64> {
    let [_, mech, _] = populations(traj, space)?;
    Ok(mech.values.iter().copied().fold(0.0, f64::max))
}

/// `F = <01| tr_m[rho] |01>`: cavity 1 empty and one photon in cavity 2, with
/// the mechanics traced out.
pub fn transfer_fidelity(rho: &DensityMatrix, space: &FockSpace) -> Result<f64> {
    let reduced = fock::partial_trace(rho, space, &[CAVITY1, CAVITY2])?;
    // reduced basis is lexicographic over (n1, n2): |0, 1> sits at index 1
    Ok(reduced[[1, 1]].re)
}

pub fn fidelity_series(traj: &Trajectory<DensityMatrix>, space: &FockSpace) -> Result<TimeSeries> {
    let values = traj.states.iter().map(|rho| transfer_fidelity(rho, space)).collect::<Result<Vec<_>>>()?;
    Ok(TimeSeries::new(traj.times.clone(), values))
}

/// `|psi_dark(t)^dag v(t)|^2 / |v(t)|^2`.
pub fn dark_mode_overlap(traj: &Trajectory<ModeVector>, s: &CouplingSchedule) -> Result<TimeSeries> {
    let values = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, v)| Ok(dark_mode(s, t)?.dotc(v).norm_sqr() / v.norm_squared()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeSeries::new(traj.times.clone(), values))
}

/// Mode occupations of a single pure state.
pub fn state_occupations(psi: &StateVector, space: &FockSpace) -> Result<[f64; 3]> {
    psi.mode_occupations(space)
}
