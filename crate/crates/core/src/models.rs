//! Mode matrices for the Heisenberg picture and the matching Fock-space
//! Hamiltonians.
//!
//! Three schemes are covered:
//!
//! * resonant red-sideband coupling, `H = sum_i delta_i a_i^dag a_i + g_i (a_i^dag b + b^dag a_i)`;
//! * the same form far detuned (`delta_i = delta'`), with couplings `G_i`;
//! * the beam-splitter Hamiltonian obtained by eliminating the mechanics.
//!
//! In the single-excitation sector `{|100>, |010>, |001>}` each Hamiltonian
//! reduces exactly to its mode matrix.

use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, FockSpace, Operator, CAVITY1, CAVITY2, MECHANICS};
use crate::pulses::{counterdiabatic_coupling, CouplingSchedule};

/// Heisenberg mode vector `[a1, b, a2]`.
pub type ModeVector = Vector3<C64>;

/// Tolerance used when a routine requires a Hermitian input.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModeMatrixKind {
    /// Sideband coupling through the mechanics.
    Adiabatic,
    /// Direct cavity-cavity counterdiabatic coupling.
    Counterdiabatic,
    /// Beam-splitter coupling after eliminating the mechanics.
    Effective,
    Custom,
}

/// The 3x3 generator of `i dv/dt = M(t) v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeMatrix {
    pub matrix: Matrix3<C64>,
    pub kind: ModeMatrixKind,
}

impl ModeMatrix {
    pub fn new(matrix: Matrix3<C64>, kind: ModeMatrixKind) -> Self {
        Self { matrix, kind }
    }

    pub fn zero() -> Self {
        Self::new(Matrix3::zeros(), ModeMatrixKind::Custom)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `[[d1, g1, 0], [g1, 0, g2], [0, g2, d2]]`.
pub fn mode_matrix_adiabatic(s: &CouplingSchedule, deltas: [f64; 2], t: f64) -> ModeMatrix {
    let (g1, g2) = (s.g1(t), s.g2(t));
    let m = Matrix3::new(re(deltas[0]), re(g1), re(0.0), re(g1), re(0.0), re(g2), re(0.0), re(g2), re(deltas[1]));
    ModeMatrix::new(m, ModeMatrixKind::Adiabatic)
}

/// `i [[0, 0, -G], [0, 0, 0], [G, 0, 0]]` with `G` the counterdiabatic coupling.
pub fn mode_matrix_tqd(s: &CouplingSchedule, t: f64) -> Result<ModeMatrix> {
    let g = counterdiabatic_coupling(s, t)?;
    let mut m = Matrix3::zeros();
    m[(0, 2)] = C64::new(0.0, -g);
    m[(2, 0)] = C64::new(0.0, g);
    Ok(ModeMatrix::new(m, ModeMatrixKind::Counterdiabatic))
}

/// Eliminated-mechanics generator `[[0, 0, G1 G2/d'], [0, 0, 0], [G1 G2/d', 0, 0]]`.
pub fn mode_matrix_effective(s: &CouplingSchedule, delta_prime: f64, t: f64) -> Result<ModeMatrix> {
    check_detuning(delta_prime)?;
    let omega = s.g1(t) * s.g2(t) / delta_prime;
    let mut m = Matrix3::zeros();
    m[(0, 2)] = re(omega);
    m[(2, 0)] = re(omega);
    Ok(ModeMatrix::new(m, ModeMatrixKind::Effective))
}

fn check_detuning(delta_prime: f64) -> Result<()> {
    if delta_prime > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("detuning must be positive, got {delta_prime}")))
    }
}

/// Stark shifts `Omega_i = G_i^2 / delta'` and the exchange coupling
/// `Omega = G1 G2 (1/delta'_1 + 1/delta'_2) / 2` of the eliminated model, for
/// equal cavity detunings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitterShifts {
    pub stark: [f64; 2],
    pub exchange: f64,
}

pub fn beam_splitter_shifts(couplings: &CouplingSchedule, delta_prime: f64, t: f64) -> Result<BeamSplitterShifts> {
    check_detuning(delta_prime)?;
    let (g1, g2) = (couplings.g1(t), couplings.g2(t));
    Ok(BeamSplitterShifts {
        stark: [g1 * g1 / delta_prime, g2 * g2 / delta_prime],
        exchange: g1 * g2 * (1.0 / delta_prime + 1.0 / delta_prime) / 2.0,
    })
}

/// Eigenpairs of a Hermitian mode matrix in ascending eigenvalue order.
///
/// Each eigenvector is normalized and its phase fixed so that its
/// largest-magnitude component (the first one, on ties) is real and positive.
pub fn eigenmodes(m: &ModeMatrix) -> Result<Vec<(f64, ModeVector)>> {
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitian(defect));
    }
    let eig = SymmetricEigen::new(m.matrix);
    let mut pairs: Vec<(f64, ModeVector)> =
        (0..3).map(|k| (eig.eigenvalues[k], fix_phase(eig.eigenvectors.column(k).into_owned()))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

fn fix_phase(v: ModeVector) -> ModeVector {
    let v = v.normalize();
    let biggest = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let pivot = v.iter().find(|c| c.norm() >= biggest - 1e-12).copied().unwrap();
    v * (pivot.conj() / pivot.norm())
}

/// Mechanical dark mode `[-g2, 0, g1] / g0`.
pub fn dark_mode(s: &CouplingSchedule, t: f64) -> Result<ModeVector> {
    // same scale-free evaluation as the mixing angle
    let theta = crate::pulses::mixing_angle(s, t)?;
    Ok(Vector3::new(re(theta.cos()), re(0.0), re(theta.sin())))
}

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `H(t) = H_c + sum_k c_k(t) H_k` with static sparse operators.
#[derive(Clone)]
pub struct TimeDependentHamiltonian {
    constant: Operator,
    terms: Vec<(Coefficient, Operator)>,
}

impl TimeDependentHamiltonian {
    pub fn new(constant: Operator) -> Self {
        Self { constant, terms: Vec::new() }
    }

    pub fn with_term<F>(mut self, coefficient: F, op: Operator) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert_eq!(op.dim(), self.constant.dim());
        self.terms.push((Arc::new(coefficient), op));
        self
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn constant(&self) -> &Operator {
        &self.constant
    }

    /// Coefficients and operators of the time-dependent terms at `t`.
    pub fn terms_at(&self, t: f64) -> impl Iterator<Item = (f64, &Operator)> + '_ {
        self.terms.iter().map(move |(c, op)| (c(t), op))
    }

    /// Materializes `H(t)`.
    pub fn at(&self, t: f64) -> Operator {
        self.terms_at(t).fold(self.constant.clone(), |acc, (c, op)| acc.add(&op.scale(re(c))))
    }
}

impl std::fmt::Debug for TimeDependentHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeDependentHamiltonian").field("dim", &self.dim()).field("terms", &self.terms.len()).finish()
    }
}

/// `a_i^dag b + b^dag a_i`.
fn exchange(space: &FockSpace, cavity: usize, other: usize) -> Result<Operator> {
    let a = fock::ladder(space, cavity)?;
    let b = fock::ladder(space, other)?;
    let hop = a.adjoint().matmul(&b);
    Ok(hop.add(&hop.adjoint()))
}

fn cavity_detunings(space: &FockSpace, deltas: [f64; 2]) -> Result<Operator> {
    let n1 = fock::number_op(space, CAVITY1)?.scale(re(deltas[0]));
    let n2 = fock::number_op(space, CAVITY2)?.scale(re(deltas[1]));
    Ok(n1.add(&n2))
}

/// Time-dependent sideband Hamiltonian
/// `sum_i delta_i a_i^dag a_i + g_i(t) (a_i^dag b + b^dag a_i)`.
pub fn rwa_generator(space: &FockSpace, s: &CouplingSchedule, deltas: [f64; 2]) -> Result<TimeDependentHamiltonian> {
    let (p1, p2) = (s.first, s.second);
    Ok(TimeDependentHamiltonian::new(cavity_detunings(space, deltas)?)
        .with_term(move |t| p1.value(t), exchange(space, CAVITY1, MECHANICS)?)
        .with_term(move |t| p2.value(t), exchange(space, CAVITY2, MECHANICS)?))
}

pub fn hamiltonian_rwa(space: &FockSpace, s: &CouplingSchedule, deltas: [f64; 2], t: f64) -> Result<Operator> {
    Ok(rwa_generator(space, s, deltas)?.at(t))
}

/// Far-detuned sideband Hamiltonian with both cavities at detuning `delta'`.
pub fn detuned_generator(
    space: &FockSpace,
    couplings: &CouplingSchedule,
    delta_prime: f64,
) -> Result<TimeDependentHamiltonian> {
    rwa_generator(space, couplings, [delta_prime, delta_prime])
}

pub fn hamiltonian_detuned(
    space: &FockSpace,
    couplings: &CouplingSchedule,
    delta_prime: f64,
    t: f64,
) -> Result<Operator> {
    Ok(detuned_generator(space, couplings, delta_prime)?.at(t))
}

/// Beam-splitter Hamiltonian
/// `sum_i (delta' + Omega_i) a_i^dag a_i + Omega (a1^dag a2 + a2^dag a1)`.
///
/// With `rotating_frame` the cavity energies `delta' + Omega_i` are dropped,
/// which is the interaction picture of `H0 = sum_i (delta' + Omega_i) a_i^dag a_i`
/// when the two shifts coincide.
pub fn beam_splitter_generator(
    space: &FockSpace,
    couplings: &CouplingSchedule,
    delta_prime: f64,
    rotating_frame: bool,
) -> Result<TimeDependentHamiltonian> {
    check_detuning(delta_prime)?;
    let (p1, p2) = (couplings.first, couplings.second);
    let omega = move |t: f64| p1.value(t) * p2.value(t) * (1.0 / delta_prime + 1.0 / delta_prime) / 2.0;
    let hop = exchange(space, CAVITY1, CAVITY2)?;
    if rotating_frame {
        return Ok(TimeDependentHamiltonian::new(Operator::zeros(space.total_dim())).with_term(omega, hop));
    }
    let h = TimeDependentHamiltonian::new(cavity_detunings(space, [delta_prime, delta_prime])?)
        .with_term(omega, hop)
        .with_term(move |t| p1.value(t).powi(2) / delta_prime, fock::number_op(space, CAVITY1)?)
        .with_term(move |t| p2.value(t).powi(2) / delta_prime, fock::number_op(space, CAVITY2)?);
    Ok(h)
}

pub fn hamiltonian_beam_splitter(
    space: &FockSpace,
    couplings: &CouplingSchedule,
    delta_prime: f64,
    t: f64,
) -> Result<Operator> {
    Ok(beam_splitter_generator(space, couplings, delta_prime, false)?.at(t))
}

/// `H - shift * (n1 + n2)`: removes a common cavity energy, i.e. moves to the
/// frame rotating at `shift` on both cavities.
pub fn remove_cavity_shift(h: &Operator, space: &FockSpace, shift: f64) -> Result<Operator> {
    Ok(h.sub(&cavity_detunings(space, [shift, shift])?))
}

/// Applies `exp(i phase (n1 + n2))` to a state: the inverse of the free
/// rotation accumulated by a common cavity energy whose time integral is
/// `phase`.
pub fn rotate_cavity_frame(psi: &fock::StateVector, space: &FockSpace, phase: f64) -> fock::StateVector {
    let mut out = psi.clone();
    for (i, v) in out.iter_mut().enumerate() {
        let occ = space.occupations(i);
        let n = (occ[CAVITY1] + occ[CAVITY2]) as f64;
        *v *= C64::from_polar(1.0, phase * n);
    }
    out
}

/// Matrix elements of `op` in the single-excitation basis
/// `{|100>, |010>, |001>}` (storage order a1, b, a2).
pub fn single_excitation_block(op: &Operator, space: &FockSpace) -> Result<Matrix3<C64>> {
    if op.dim() != space.total_dim() {
        return Err(Error::DimensionMismatch { expected: space.total_dim(), found: op.dim() });
    }
    let idx = single_excitation_indices(space)?;
    Ok(Matrix3::from_fn(|r, c| op.get(idx[r], idx[c])))
}

pub fn single_excitation_indices(space: &FockSpace) -> Result<[usize; 3]> {
    Ok([space.index([1, 0, 0])?, space.index([0, 1, 0])?, space.index([0, 0, 1])?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::excitation_number;
    use crate::pulses::{adiabatic_pulses, fitted_coupling, physical_couplings, GaussianPulse};
    use approx::assert_relative_eq;

    fn eig_values(m: &ModeMatrix) -> Vec<f64> {
        eigenmodes(m).unwrap().into_iter().map(|(l, _)| l).collect()
    }

    fn schedule(g1: f64, g2: f64) -> CouplingSchedule {
        CouplingSchedule::new(GaussianPulse::new(g1, 0.0, 1.0), GaussianPulse::new(g2, 0.0, 1.0))
    }

    fn window(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |k| -2.0 + 10.0 * k as f64 / (n - 1) as f64)
    }

    #[test]
    fn adiabatic_eigenvalues_at_edge_of_protocol() {
        let m = mode_matrix_adiabatic(&schedule(0.0, -3.0), [0.0, 0.0], 0.0);
        let vals = eig_values(&m);
        for (got, want) in vals.iter().zip([-3.0, 0.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let modes = eigenmodes(&m).unwrap();
        let dark = modes[1].1;
        assert!((dark - Vector3::new(re(1.0), re(0.0), re(0.0))).norm() < 1e-12);
    }

    #[test]
    fn dark_mode_when_only_g1() {
        let m = mode_matrix_adiabatic(&schedule(3.0, 0.0), [0.0, 0.0], 0.0);
        let dark = eigenmodes(&m).unwrap()[1].1;
        assert!((dark - Vector3::new(re(0.0), re(0.0), re(1.0))).norm() < 1e-12);
    }

    #[test]
    fn balanced_couplings() {
        let c = 3.0 / 2f64.sqrt();
        let m = mode_matrix_adiabatic(&schedule(c, -c), [0.0, 0.0], 0.0);
        let modes = eigenmodes(&m).unwrap();
        for ((l, _), want) in modes.iter().zip([-3.0, 0.0, 3.0]) {
            assert!((l - want).abs() < 1e-12);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((modes[1].1 - Vector3::new(re(s), re(0.0), re(s))).norm() < 1e-12);
    }

    #[test]
    fn crossing_point_eigenvalues() {
        let s = adiabatic_pulses(-0.95);
        let t = (3.35 + 2.4) / 2.0;
        let c = s.g1(t);
        assert_relative_eq!(c, -s.g2(t), max_relative = 1e-14);
        let vals = eig_values(&mode_matrix_adiabatic(&s, [0.0, 0.0], t));
        let r = c * 2f64.sqrt();
        for (got, want) in vals.iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bright_modes_match_closed_form() {
        let (g1, g2) = (1.3, -2.1);
        let g0 = f64::hypot(g1, g2);
        let m = mode_matrix_adiabatic(&schedule(g1, g2), [0.0, 0.0], 0.0);
        let modes = eigenmodes(&m).unwrap();
        let r2 = 2f64.sqrt();
        let lower = Vector3::new(re(g1 / g0 / r2), re(-1.0 / r2), re(g2 / g0 / r2));
        let upper = Vector3::new(re(g1 / g0 / r2), re(1.0 / r2), re(g2 / g0 / r2));
        assert!((modes[0].0 + g0).abs() < 1e-12 && (modes[2].0 - g0).abs() < 1e-12);
        assert!(modes[0].1.dotc(&lower).norm() > 1.0 - 1e-12);
        assert!(modes[2].1.dotc(&upper).norm() > 1.0 - 1e-12);
    }

    #[test]
    fn eigenmodes_rejects_non_hermitian() {
        let mut m = ModeMatrix::zero();
        m.matrix[(0, 1)] = re(1.0);
        assert!(matches!(eigenmodes(&m), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn dark_mode_is_null_vector() {
        let s = adiabatic_pulses(-0.95);
        for t in window(200) {
            let m = mode_matrix_adiabatic(&s, [0.0, 0.0], t);
            let psi = dark_mode(&s, t).unwrap();
            assert!((m.matrix * psi).norm() < 1e-12, "t={t}");
            assert_eq!(m.hermiticity_defect(), 0.0);
        }
    }

    #[test]
    fn tqd_matrix_structure() {
        let s = adiabatic_pulses(-0.95);
        for t in window(50) {
            let m = mode_matrix_tqd(&s, t).unwrap();
            let g = counterdiabatic_coupling(&s, t).unwrap();
            for k in 0..3 {
                assert_eq!(m.matrix[(1, k)], re(0.0));
                assert_eq!(m.matrix[(k, 1)], re(0.0));
            }
            assert_eq!(m.matrix[(0, 2)], C64::new(0.0, -g));
            assert_eq!(m.matrix[(0, 2)], m.matrix[(2, 0)].conj());
            assert!(m.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn effective_matrix_reproduces_fit() {
        let gp = fitted_coupling(-0.95, 1.1).unwrap();
        let s = physical_couplings(60.0, &gp).unwrap();
        for t in window(50) {
            let m = mode_matrix_effective(&s, 60.0, t).unwrap();
            assert_relative_eq!(m.matrix[(0, 2)].re, gp.value(t), max_relative = 1e-13);
            assert_eq!(m.matrix[(0, 2)], m.matrix[(2, 0)]);
            assert_eq!(m.matrix.row(1).iter().map(|v| v.norm()).sum::<f64>(), 0.0);
        }
        let peak = mode_matrix_effective(&s, 60.0, 2.875).unwrap();
        assert!((peak.matrix[(0, 2)].re - 0.95).abs() < 1e-12);
        assert!(mode_matrix_effective(&s, 0.0, 1.0).is_err());
    }

    #[test]
    fn rwa_conserves_excitations_and_is_hermitian() {
        let space = FockSpace::new(&[2, 4, 3]).unwrap();
        let s = adiabatic_pulses(-0.95);
        let n = excitation_number(&space);
        for t in window(20) {
            let h = hamiltonian_rwa(&space, &s, [0.3, -0.2], t).unwrap();
            assert!(h.hermiticity_defect() < 1e-12);
            assert!(h.commutator(&n).max_abs() < 1e-12);
        }
    }

    #[test]
    fn rwa_with_g1_off_couples_cavity2_only() {
        let space = FockSpace::new(&[2, 2, 2]).unwrap();
        let h = hamiltonian_rwa(&space, &schedule(0.0, -3.0), [0.0, 0.0], 0.0).unwrap();
        let n1 = fock::number_op(&space, CAVITY1).unwrap();
        assert!(h.commutator(&n1).max_abs() < 1e-15);
        let n2 = fock::number_op(&space, CAVITY2).unwrap();
        assert!(h.commutator(&n2).max_abs() > 1.0);
    }

    #[test]
    fn single_excitation_block_is_mode_matrix() {
        let space = FockSpace::new(&[2, 2, 2]).unwrap();
        let s = adiabatic_pulses(-0.95);
        let gen = rwa_generator(&space, &s, [0.0, 0.0]).unwrap();
        let gp = fitted_coupling(-0.95, 1.1).unwrap();
        let couplings = physical_couplings(60.0, &gp).unwrap();
        let detuned = detuned_generator(&space, &couplings, 60.0).unwrap();
        for t in window(200) {
            let block = single_excitation_block(&gen.at(t), &space).unwrap();
            let m = mode_matrix_adiabatic(&s, [0.0, 0.0], t).matrix;
            assert!((block - m).iter().all(|v| v.norm() < 1e-12));
            let block = single_excitation_block(&detuned.at(t), &space).unwrap();
            let m = mode_matrix_adiabatic(&couplings, [60.0, 60.0], t).matrix;
            assert!((block - m).iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn detuned_hamiltonian_properties() {
        let space = FockSpace::new(&[3, 3, 2]).unwrap();
        let off = schedule(0.0, 0.0);
        let h = hamiltonian_detuned(&space, &off, 60.0, 0.0).unwrap();
        for (r, c, v) in h.iter() {
            assert_eq!(r, c);
            let occ = space.occupations(r);
            assert_eq!(v, re(60.0 * (occ[0] + occ[2]) as f64));
        }
        let gp = fitted_coupling(-0.95, 1.1).unwrap();
        let s = physical_couplings(60.0, &gp).unwrap();
        let h = hamiltonian_detuned(&space, &s, 60.0, 2.875).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
        assert!(h.commutator(&excitation_number(&space)).max_abs() < 1e-12);
    }

    #[test]
    fn detuned_block_eigenvalues_by_hand() {
        // [[d, G, 0], [G, 0, G], [0, G, d]] has eigenvalue d (antisymmetric
        // cavity mode) and (d +- sqrt(d^2 + 8 G^2)) / 2.
        let (d, g) = (60.0, 7.55);
        let m = mode_matrix_adiabatic(&schedule(g, g), [d, d], 0.0);
        let root = (d * d + 8.0 * g * g).sqrt();
        let want = [(d - root) / 2.0, d, (d + root) / 2.0];
        for (got, w) in eig_values(&m).iter().zip(want) {
            assert!((got - w).abs() < 1e-10);
        }
    }

    #[test]
    fn beam_splitter_shifts_and_frame() {
        let space = FockSpace::new(&[2, 3, 2]).unwrap();
        let gp = fitted_coupling(-0.95, 1.1).unwrap();
        let s = physical_couplings(60.0, &gp).unwrap();
        let nb = fock::number_op(&space, MECHANICS).unwrap();
        for t in window(40) {
            let shifts = beam_splitter_shifts(&s, 60.0, t).unwrap();
            assert_eq!(shifts.stark[0], shifts.stark[1]);
            assert_relative_eq!(shifts.exchange, s.g1(t) * s.g2(t) / 60.0, max_relative = 1e-14);

            let h = hamiltonian_beam_splitter(&space, &s, 60.0, t).unwrap();
            assert!(h.hermiticity_defect() < 1e-12);
            assert!(h.commutator(&nb).max_abs() == 0.0);

            let shifted = remove_cavity_shift(&h, &space, 60.0 + shifts.stark[0]).unwrap();
            let block = single_excitation_block(&shifted, &space).unwrap();
            let m = mode_matrix_effective(&s, 60.0, t).unwrap().matrix;
            assert!((block - m).iter().all(|v| v.norm() < 1e-12));

            let rot = beam_splitter_generator(&space, &s, 60.0, true).unwrap().at(t);
            let block = single_excitation_block(&rot, &space).unwrap();
            assert!((block - m).iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn cavity_frame_rotation_is_phase_only() {
        let space = FockSpace::new(&[2, 2, 2]).unwrap();
        let psi = fock::basis_state(&space, [1, 1, 1]).unwrap();
        let rot = rotate_cavity_frame(&psi, &space, 0.7);
        let idx = space.index([1, 1, 1]).unwrap();
        assert!((rot[idx] - C64::from_polar(1.0, 1.4)).norm() < 1e-15);
    }

    #[test]
    fn time_dependent_at_matches_sum() {
        let space = FockSpace::new(&[2, 2, 2]).unwrap();
        let s = adiabatic_pulses(-0.95);
        let gen = rwa_generator(&space, &s, [0.0, 0.0]).unwrap();
        let t = 2.7;
        let manual: f64 = gen.terms_at(t).map(|(c, _)| c * c).sum();
        assert_relative_eq!(manual, s.g1(t).powi(2) + s.g2(t).powi(2), max_relative = 1e-14);
        assert_eq!(gen.at(t), gen.at(t));
    }
}
