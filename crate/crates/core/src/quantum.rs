//! Two-level operator algebra, the rotating-frame Hamiltonian and the
//! Lindblad generator.
//!
//! Basis ordering is `(g, e)`. The lowering operator is `σ₋ = |g⟩⟨e|`, so the
//! emission correlation `tr[σ₊ M]` picks out the `ge` entry of `M`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::pulseshape::{self, SampledEnvelope};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Static emitter parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// ω₀ − ω_L, rad/s.
    pub detuning0: f64,
    /// Radiative decay rate γ, 1/s.
    pub gamma: f64,
    /// Pure dephasing rate γ_ph, 1/s.
    pub gamma_ph: f64,
}

impl EmitterParams {
    pub fn new(detuning0: f64, gamma: f64, gamma_ph: f64) -> Result<Self> {
        let p = Self { detuning0, gamma, gamma_ph };
        p.validate()?;
        Ok(p)
    }

    /// Closed system on resonance.
    pub fn closed() -> Self {
        Self { detuning0: 0.0, gamma: 0.0, gamma_ph: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.detuning0.is_finite() && self.gamma.is_finite() && self.gamma_ph.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if self.gamma < 0.0 || self.gamma_ph < 0.0 {
            return Err(Error::InvalidParams(format!(
                "rates must be non-negative (gamma = {}, gamma_ph = {})",
                self.gamma, self.gamma_ph
            )));
        }
        Ok(())
    }

    /// Same detuning, no dissipation.
    pub fn without_dissipation(&self) -> Self {
        Self { gamma: 0.0, gamma_ph: 0.0, ..*self }
    }

    pub fn is_closed(&self) -> bool {
        self.gamma == 0.0 && self.gamma_ph == 0.0
    }

    /// Decay rate of the optical coherence under zero drive, γ/2 + γ_ph.
    pub fn coherence_decay_rate(&self) -> f64 {
        0.5 * self.gamma + self.gamma_ph
    }

    /// Angular FWHM of the free emission line, γ + 2γ_ph.
    pub fn linewidth(&self) -> f64 {
        2.0 * self.coherence_decay_rate()
    }
}

/// A general 2x2 complex operator in the `(g, e)` basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub gg: C64,
    pub ge: C64,
    pub eg: C64,
    pub ee: C64,
}

impl Operator {
    pub const fn new(gg: C64, ge: C64, eg: C64, ee: C64) -> Self {
        Self { gg, ge, eg, ee }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    /// σ₊ = |e⟩⟨g|.
    pub const fn sigma_plus() -> Self {
        Self::new(ZERO, ZERO, ONE, ZERO)
    }

    /// σ₋ = |g⟩⟨e|.
    pub const fn sigma_minus() -> Self {
        Self::new(ZERO, ONE, ZERO, ZERO)
    }

    /// σ_z = |e⟩⟨e| − |g⟩⟨g|.
    pub const fn sigma_z() -> Self {
        Self::new(C64::new(-1.0, 0.0), ZERO, ZERO, ONE)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        Self {
            gg: self.gg * rhs.gg + self.ge * rhs.eg,
            ge: self.gg * rhs.ge + self.ge * rhs.ee,
            eg: self.eg * rhs.gg + self.ee * rhs.eg,
            ee: self.eg * rhs.ge + self.ee * rhs.ee,
        }
    }

    pub fn dagger(&self) -> Self {
        Self { gg: self.gg.conj(), ge: self.eg.conj(), eg: self.ge.conj(), ee: self.ee.conj() }
    }

    pub fn trace(&self) -> C64 {
        self.gg + self.ee
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs) - rhs.matmul(self)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.gg, self.ge, self.eg, self.ee]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Distance from Hermiticity, max |A − A†|.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.dagger()).max_abs()
    }
}

impl Add for Operator {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.gg + r.gg, self.ge + r.ge, self.eg + r.eg, self.ee + r.ee)
    }
}

impl Sub for Operator {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.gg - r.gg, self.ge - r.ge, self.eg - r.eg, self.ee - r.ee)
    }
}

impl Neg for Operator {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.gg, -self.ge, -self.eg, -self.ee)
    }
}

impl Mul<f64> for Operator {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.gg * s, self.ge * s, self.eg * s, self.ee * s)
    }
}

impl Mul<C64> for Operator {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        Self::new(self.gg * s, self.ge * s, self.eg * s, self.ee * s)
    }
}

impl Mul for Operator {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        self.matmul(&r)
    }
}

/// Default slack for the trace, Hermiticity and positivity checks.
pub const STATE_TOLERANCE: f64 = 1e-9;

/// A validated two-level density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Operator", into = "Operator")]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn ground() -> Self {
        Self(Operator::new(ONE, ZERO, ZERO, ZERO))
    }

    pub fn excited() -> Self {
        Self(Operator::new(ZERO, ZERO, ZERO, ONE))
    }

    /// Pure state `a|g⟩ + b|e⟩`, normalized.
    pub fn pure(a: C64, b: C64) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite amplitudes".into()));
        }
        let (a, b) = (a / n, b / n);
        Ok(Self(Operator::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj())))
    }

    /// Validates with the default tolerance.
    pub fn from_operator(op: Operator) -> Result<Self> {
        Self::from_operator_with_tolerance(op, STATE_TOLERANCE)
    }

    pub fn from_operator_with_tolerance(op: Operator, tol: f64) -> Result<Self> {
        check_state(&op, tol)?;
        Ok(Self(op))
    }

    /// Wraps without validation. Used by the integrator, which checks
    /// invariants with its own tolerance.
    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn rho_ee(&self) -> f64 {
        self.0.ee.re
    }

    pub fn rho_gg(&self) -> f64 {
        self.0.gg.re
    }

    pub fn rho_eg(&self) -> C64 {
        self.0.eg
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.0.matmul(&self.0).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigenvalues(&self.0)
    }
}

impl TryFrom<Operator> for DensityMatrix {
    type Error = Error;
    fn try_from(op: Operator) -> Result<Self> {
        Self::from_operator(op)
    }
}

impl From<DensityMatrix> for Operator {
    fn from(d: DensityMatrix) -> Operator {
        d.0
    }
}

fn hermitian_eigenvalues(op: &Operator) -> [f64; 2] {
    let a = op.gg.re;
    let d = op.ee.re;
    let b = 0.5 * (op.ge + op.eg.conj());
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    [mean - half_gap, mean + half_gap]
}

/// Checks trace, Hermiticity, positivity and purity bounds.
pub fn check_state(op: &Operator, tol: f64) -> Result<()> {
    if !op.is_finite() {
        return Err(Error::InvalidState("non-finite entry".into()));
    }
    let herm = op.hermiticity_defect();
    if herm > tol {
        return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
    }
    let tr = op.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let [lo, hi] = hermitian_eigenvalues(op);
    if lo < -tol || hi > 1.0 + tol {
        return Err(Error::InvalidState(format!("eigenvalues ({lo:.3e}, {hi:.3e}) outside [0, 1]")));
    }
    Ok(())
}

/// Drive at one instant in the laser rotating frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveSample {
    /// Complex Rabi frequency Ω(t), rad/s.
    pub omega: C64,
    /// Coefficient of −σ_z/2, rad/s (ω₀ − ω_L for the laser frame).
    pub detuning: f64,
}

impl DriveSample {
    pub fn new(omega: C64, detuning: f64) -> Self {
        Self { omega, detuning }
    }
}

/// H/ħ = −(Δ/2)σ_z − (1/2)[Ω σ₊ + Ω* σ₋] in rad/s.
pub fn hamiltonian_rwa(drive: DriveSample) -> Operator {
    let half_det = C64::new(0.5 * drive.detuning, 0.0);
    Operator { gg: half_det, ge: -0.5 * drive.omega.conj(), eg: -0.5 * drive.omega, ee: -half_det }
}

/// dρ/dt = −i[H/ħ, ρ] + L_em[ρ] + L_ph[ρ].
///
/// Linear in `rho`, so it is also the generator used to push `σ₋ρ` forward
/// for two-time correlations.
pub fn lindblad_rhs(rho: &Operator, drive: DriveSample, params: &EmitterParams) -> Operator {
    let h = hamiltonian_rwa(drive);
    let comm = h.commutator(rho) * (-I);
    let g = params.gamma;
    let coh = params.coherence_decay_rate();
    // L_em + L_ph written out entrywise: populations relax at γ, the
    // coherences at γ/2 + γ_ph (σ_z ρ σ_z flips their sign).
    let diss = Operator { gg: rho.ee * g, ge: rho.ge * (-coh), eg: rho.eg * (-coh), ee: rho.ee * (-g) };
    comm + diss
}

/// Exact zero-drive evolution of any operator over `dt` at static detuning
/// `params.detuning0`.
pub fn free_evolution(op: &Operator, dt: f64, params: &EmitterParams) -> Operator {
    if dt == 0.0 {
        return *op;
    }
    let decay = (-params.gamma * dt).exp();
    let coh = C64::new(-params.coherence_decay_rate() * dt, -params.detuning0 * dt).exp();
    Operator { gg: op.gg + op.ee * (1.0 - decay), ge: op.ge * coh, eg: op.eg * coh.conj(), ee: op.ee * decay }
}

/// Evaluates the adiabaticity ratio
/// `|Δ̇|Ω| − Δ|Ω̇|| / (|Ω|² + Δ²)^{3/2}` on the envelope grid.
///
/// Δ(t) is the instantaneous detuning with static part `params.detuning0`.
/// Samples where the envelope is under the magnitude floor, or where the
/// denominator vanishes, are `None`.
pub fn adiabaticity_metric(envelope: &SampledEnvelope, params: &EmitterParams) -> Result<Vec<Option<f64>>> {
    let chirp = pulseshape::phase_rate(envelope)?;
    let dt = envelope.dt;
    let mag: Vec<f64> = envelope.omega_values.iter().map(|z| z.norm()).collect();
    let det: Vec<Option<f64>> = chirp.iter().map(|r| r.map(|r| params.detuning0 + r)).collect();
    let n = mag.len();
    let mut out = vec![None; n];
    for j in 1..n.saturating_sub(1) {
        let (Some(dm), Some(d), Some(dp)) = (det[j - 1], det[j], det[j + 1]) else {
            continue;
        };
        let d_det = (dp - dm) / (2.0 * dt);
        let d_mag = (mag[j + 1] - mag[j - 1]) / (2.0 * dt);
        let denom = (mag[j] * mag[j] + d * d).powf(1.5);
        if denom > 0.0 && denom.is_finite() {
            out[j] = Some((d_det * mag[j] - d * d_mag).abs() / denom);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho_with_coherence(c: C64) -> Operator {
        Operator::new(C64::new(0.6, 0.0), c.conj(), c, C64::new(0.4, 0.0))
    }

    #[test]
    fn hamiltonian_zero_drive_is_zero() {
        let h = hamiltonian_rwa(DriveSample::new(ZERO, 0.0));
        assert_eq!(h, Operator::zero());
    }

    #[test]
    fn hamiltonian_real_drive_couples_via_sigma_x() {
        let h = hamiltonian_rwa(DriveSample::new(C64::new(3.0, 0.0), 0.0));
        assert_eq!(h.ge, C64::new(-1.5, 0.0));
        assert_eq!(h.eg, C64::new(-1.5, 0.0));
        assert_eq!(h.gg, ZERO);
        assert_eq!(h.ee, ZERO);
    }

    #[test]
    fn hamiltonian_imaginary_drive_couples_via_sigma_y() {
        let h = hamiltonian_rwa(DriveSample::new(C64::new(0.0, 2.0), 0.0));
        assert_eq!(h.eg, C64::new(0.0, -1.0));
        assert_eq!(h.ge, C64::new(0.0, 1.0));
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn hamiltonian_detuning_sign() {
        let h = hamiltonian_rwa(DriveSample::new(ZERO, 2.0));
        assert_eq!(h.ee, C64::new(-1.0, 0.0));
        assert_eq!(h.gg, C64::new(1.0, 0.0));
    }

    #[test]
    fn pure_decay_rates() {
        let p = EmitterParams::new(0.0, 2.5, 0.7).unwrap();
        let rhs = lindblad_rhs(DensityMatrix::excited().as_operator(), DriveSample::new(ZERO, 0.0), &p);
        assert_eq!(rhs.ee, C64::new(-2.5, 0.0));
        assert_eq!(rhs.gg, C64::new(2.5, 0.0));
        assert_eq!(rhs.ge, ZERO);
        assert_eq!(rhs.eg, ZERO);
    }

    #[test]
    fn coherence_decays_at_half_gamma_plus_gamma_ph() {
        let p = EmitterParams::new(0.0, 2.0, 0.3).unwrap();
        let c = C64::new(0.1, -0.2);
        let rhs = lindblad_rhs(&rho_with_coherence(c), DriveSample::new(ZERO, 0.0), &p);
        let expected = -c * (0.5 * 2.0 + 0.3);
        assert!((rhs.eg - expected).norm() < 1e-15);
        assert!((rhs.ge - expected.conj()).norm() < 1e-15);
    }

    #[test]
    fn dissipator_matches_operator_form() {
        // L_em and L_ph built from the σ matrices directly.
        let p = EmitterParams::new(0.0, 1.3, 0.4).unwrap();
        let rho = rho_with_coherence(C64::new(0.2, 0.1));
        let sm = Operator::sigma_minus();
        let sp = Operator::sigma_plus();
        let sz = Operator::sigma_z();
        let pe = sp * sm;
        let l_em = (sm * rho * sp * 2.0 - pe * rho - rho * pe) * (0.5 * p.gamma);
        let l_ph = (sz * rho * sz - rho) * (0.5 * p.gamma_ph);
        let rhs = lindblad_rhs(&rho, DriveSample::new(ZERO, 0.0), &p);
        assert!((rhs - (l_em + l_ph)).max_abs() < 1e-15);
    }

    #[test]
    fn closed_rhs_is_commutator() {
        let rho = rho_with_coherence(C64::new(0.3, 0.05));
        let drive = DriveSample::new(C64::new(0.7, -1.1), 0.4);
        let rhs = lindblad_rhs(&rho, drive, &EmitterParams::closed());
        let h = hamiltonian_rwa(drive);
        let expected = h.commutator(&rho) * (-I);
        assert_eq!(rhs, expected);
    }

    #[test]
    fn free_evolution_matches_generator_derivative() {
        let p = EmitterParams::new(0.8, 1.2, 0.3).unwrap();
        let op =
            Operator::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.4), C64::new(0.5, -0.1), C64::new(0.7, 0.2));
        let h = 1e-6;
        let fd = (free_evolution(&op, h, &p) - free_evolution(&op, -h, &p)) * (0.5 / h);
        let rhs = lindblad_rhs(&op, DriveSample::new(ZERO, p.detuning0), &p);
        assert!((fd - rhs).max_abs() < 1e-8);
    }

    #[test]
    fn state_checks() {
        assert!(DensityMatrix::from_operator(Operator::identity()).is_err());
        let bad = Operator::new(C64::new(1.2, 0.0), ZERO, ZERO, C64::new(-0.2, 0.0));
        assert!(DensityMatrix::from_operator(bad).is_err());
        let ok = DensityMatrix::pure(C64::new(1.0, 0.0), C64::new(0.0, 1.0)).unwrap();
        assert!((ok.purity() - 1.0).abs() < 1e-15);
        let [lo, hi] = ok.eigenvalues();
        assert!(lo.abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(EmitterParams::new(0.0, -1.0, 0.0).is_err());
        assert!(EmitterParams::new(0.0, 1.0, -1.0).is_err());
        assert!(EmitterParams::new(f64::NAN, 1.0, 0.0).is_err());
    }
}
