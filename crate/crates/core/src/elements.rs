//! Optical elements as linear maps on the single-photon mode space.
//!
//! Every element is a square matrix over a [`ModeBasis`] acting as the
//! identity on paths it does not touch. Two-photon states evolve under the
//! lifted map `U (x) U`. Heralded loss (q-plate conversion efficiency) is a
//! per-photon transmission factor kept outside the matrix, so the matrix of
//! a lossy q-plate is still unitary on its domain.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    linear_pol, same_basis, Jones, ModeBasis, ModeIndex, Path, PhotonState, Pol, TwoPhotonState, C64, I, ONE, ZERO,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Unitary,
    Projective,
    /// Product of unitaries and projectors (the quantum transferrers).
    Composite,
}

/// Which circular polarization gains OAM at a q-plate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Handedness {
    /// `|L, m> -> |R, m + 2q>` and `|R, m> -> |L, m - 2q>`.
    #[default]
    LeftGains,
    /// `|L, m> -> |R, m - 2q>` and `|R, m> -> |L, m + 2q>`.
    RightGains,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPlateSpec {
    /// Topological charge; must be a multiple of 1/2.
    pub charge: f64,
    /// Conversion efficiency in `[0, 1]`, applied as heralded loss.
    pub efficiency: f64,
    #[serde(default)]
    pub handedness: Handedness,
}

impl Default for QPlateSpec {
    fn default() -> Self {
        QPlateSpec {
            charge: 1.0,
            efficiency: 1.0,
            handedness: Handedness::LeftGains,
        }
    }
}

impl QPlateSpec {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Experimental efficiency 0.80 at 795 nm.
    pub fn experimental() -> Self {
        QPlateSpec {
            efficiency: 0.80,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!(
                "q-plate efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        let twice = 2.0 * self.charge;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "q-plate charge must be a multiple of 1/2, got {}",
                self.charge
            )));
        }
        Ok(())
    }

    /// OAM shift `2q` given to the polarization that gains OAM.
    pub fn oam_shift(&self) -> i32 {
        (2.0 * self.charge).round() as i32
    }
}

/// Reflection convention of the beam splitter.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsConvention {
    /// Reflection inverts the OAM sign (`m -> -m`).
    pub flip_oam_on_reflection: bool,
}

impl Default for BsConvention {
    fn default() -> Self {
        BsConvention {
            flip_oam_on_reflection: true,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum DomainError {
    Closure,
    Precondition,
}

/// Linear map on one photon's mode space.
#[derive(Debug, Clone)]
pub struct ElementOperator {
    label: String,
    basis: Arc<ModeBasis>,
    matrix: DMatrix<C64>,
    kind: ElementKind,
    touched: Vec<Path>,
    /// Columns on which the element is defined.
    domain: Vec<bool>,
    domain_error: DomainError,
    /// Per-photon heralded transmission.
    transmission: f64,
}

/// Output of an element: the (possibly subnormalized) state and the
/// conditional success weight of this step.
#[derive(Debug, Clone)]
pub struct Applied<S> {
    pub state: S,
    pub weight: f64,
}

/// States an element can act on.
pub trait Evolve: Sized {
    fn evolve(&self, op: &ElementOperator) -> Result<Applied<Self>>;
}

impl ElementOperator {
    pub fn identity(basis: &Arc<ModeBasis>) -> Self {
        let n = basis.len();
        ElementOperator {
            label: "identity".into(),
            basis: Arc::clone(basis),
            matrix: DMatrix::identity(n, n),
            kind: ElementKind::Unitary,
            touched: Vec::new(),
            domain: vec![true; n],
            domain_error: DomainError::Closure,
            transmission: 1.0,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn basis(&self) -> &Arc<ModeBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn touched_paths(&self) -> &[Path] {
        &self.touched
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    pub fn is_defined_on(&self, mode: usize) -> bool {
        self.domain[mode]
    }

    /// What a success weight means for this element.
    pub fn success_semantics(&self) -> &'static str {
        match (self.kind, self.transmission < 1.0) {
            (ElementKind::Unitary, false) => "lossless",
            (ElementKind::Unitary, true) => "heralded loss: weight is the conversion efficiency",
            (ElementKind::Projective, _) => "filter: weight is the pass probability",
            (ElementKind::Composite, _) => "probabilistic: weight is the heralded success probability",
        }
    }

    /// `max |(U^+ U - I)_ij|` over the element's domain.
    pub fn unitarity_error(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for r in (0..n).filter(|&r| self.domain[r]) {
            for c in (0..n).filter(|&c| self.domain[c]) {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((g[(r, c)] - target).norm());
            }
        }
        worst
    }

    /// `max |(P^2 - P)_ij|`.
    pub fn idempotency_error(&self) -> f64 {
        let d = &self.matrix * &self.matrix - &self.matrix;
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Hermitian adjoint. The transmission factor is kept.
    pub fn adjoint(&self) -> Self {
        let matrix = self.matrix.adjoint();
        let n = matrix.nrows();
        // The adjoint is defined on the image of the original domain.
        let domain = (0..n)
            .map(|r| (0..n).any(|c| self.domain[c] && self.matrix[(r, c)] != ZERO))
            .collect();
        ElementOperator {
            label: format!("{}^+", self.label),
            matrix,
            domain,
            ..self.clone()
        }
    }

    /// `next . self`: first this element, then `next`.
    pub fn then(&self, next: &ElementOperator) -> Result<Self> {
        if !same_basis(&self.basis, &next.basis) {
            return Err(Error::BasisMismatch(format!(
                "cannot compose {} with {} on different bases",
                self.label, next.label
            )));
        }
        let matrix = &next.matrix * &self.matrix;
        let n = matrix.nrows();
        let domain = (0..n)
            .map(|c| self.domain[c] && (0..n).all(|r| self.matrix[(r, c)] == ZERO || next.domain[r]))
            .collect();
        let mut touched = self.touched.clone();
        for p in &next.touched {
            if !touched.contains(p) {
                touched.push(*p);
            }
        }
        let kind = if self.kind == ElementKind::Unitary && next.kind == ElementKind::Unitary {
            ElementKind::Unitary
        } else {
            ElementKind::Composite
        };
        Ok(ElementOperator {
            label: format!("{} -> {}", self.label, next.label),
            basis: Arc::clone(&self.basis),
            matrix,
            kind,
            touched,
            domain,
            domain_error: self.domain_error,
            transmission: self.transmission * next.transmission,
        })
    }

    /// Applies the element to a one- or two-photon state.
    pub fn apply<S: Evolve>(&self, state: &S) -> Result<Applied<S>> {
        state.evolve(self)
    }

    fn check_basis(&self, basis: &Arc<ModeBasis>) -> Result<()> {
        if same_basis(&self.basis, basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch(format!(
                "{} built on a different basis",
                self.label
            )))
        }
    }

    fn domain_violation(&self, mode: usize) -> Error {
        let msg = format!(
            "{} is undefined on populated mode {}",
            self.label,
            self.basis.mode(mode)
        );
        match self.domain_error {
            DomainError::Closure => Error::BasisClosure(msg),
            DomainError::Precondition => Error::Precondition(msg),
        }
    }
}

const POP_TOL: f64 = 1e-24;

impl Evolve for PhotonState {
    fn evolve(&self, op: &ElementOperator) -> Result<Applied<Self>> {
        op.check_basis(self.basis())?;
        let v = self.amplitudes();
        let before = self.norm_sqr();
        if before == 0.0 {
            return Err(Error::InvalidState("cannot propagate a zero-norm state".into()));
        }
        for (i, a) in v.iter().enumerate() {
            if a.norm_sqr() > POP_TOL && !op.domain[i] {
                return Err(op.domain_violation(i));
            }
        }
        let amp = C64::from(op.transmission.sqrt());
        let n = v.len();
        let mut out = vec![ZERO; n];
        for c in (0..n).filter(|&c| v[c] != ZERO) {
            for (r, o) in out.iter_mut().enumerate() {
                let m = op.matrix[(r, c)];
                if m != ZERO {
                    *o += m * v[c] * amp;
                }
            }
        }
        let state = PhotonState::unnormalized(self.basis(), out);
        let weight = state.norm_sqr() / before;
        Ok(Applied { state, weight })
    }
}

impl Evolve for TwoPhotonState {
    /// Lifted action `U (x) U` on the exchange-symmetric tensor. For each
    /// ordered input pair `(i, j)` the output accumulates
    /// `psi_ij U_ki U_lj` into the unordered key `{k, l}`; the occupation
    /// amplitudes then follow from `c_kl = sqrt2 psi_kl` (k < l), `c_kk = psi_kk`.
    fn evolve(&self, op: &ElementOperator) -> Result<Applied<Self>> {
        op.check_basis(self.basis())?;
        let before = self.norm_sqr();
        if before == 0.0 {
            return Err(Error::InvalidState("cannot propagate a zero-norm state".into()));
        }
        let n = self.basis().len();
        let columns: Vec<Vec<(usize, C64)>> = (0..n)
            .map(|c| {
                (0..n)
                    .filter_map(|r| {
                        let m = op.matrix[(r, c)];
                        (m != ZERO).then_some((r, m))
                    })
                    .collect()
            })
            .collect();

        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for ((i, j), c) in self.entries() {
            if c.norm_sqr() > POP_TOL {
                for m in [i, j] {
                    if !op.domain[m] {
                        return Err(op.domain_violation(m));
                    }
                }
            }
            let h = c * FRAC_1_SQRT_2;
            let pairs = [(i, j, h), (j, i, h)];
            let ordered = if i == j { vec![(i, i, c)] } else { pairs.to_vec() };
            for &(p, q, psi) in &ordered {
                for &(k, u) in &columns[p] {
                    for &(l, w) in &columns[q] {
                        let key = if k <= l { (k, l) } else { (l, k) };
                        *acc.entry(key).or_insert(ZERO) += psi * u * w;
                    }
                }
            }
        }
        let t = op.transmission;
        let scale = C64::from(t);
        let amps = acc
            .into_iter()
            .filter(|(_, v)| *v != ZERO)
            .map(|((k, l), s)| {
                // s = psi'_kl + psi'_lk off the diagonal, psi'_kk on it.
                let c = if k == l { s } else { s * FRAC_1_SQRT_2 };
                ((k, l), c * scale)
            })
            .collect();
        let state = TwoPhotonState::from_map(self.basis(), amps);
        let weight = state.norm_sqr() / before;
        Ok(Applied { state, weight })
    }
}

fn touched_set(basis: &Arc<ModeBasis>, on: &[Path]) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    for p in on {
        if !basis.has_path(*p) {
            return Err(Error::MissingMode(format!("path {p} not in basis")));
        }
        if !out.contains(p) {
            out.push(*p);
        }
    }
    Ok(out)
}

/// Builds an element from a 2x2 polarization matrix applied on every
/// `(path, oam)` of the touched paths.
fn polarization_element(
    label: String,
    basis: &Arc<ModeBasis>,
    on: &[Path],
    jones: Matrix2<C64>,
    kind: ElementKind,
) -> Result<ElementOperator> {
    let touched = touched_set(basis, on)?;
    let n = basis.len();
    let mut matrix = DMatrix::identity(n, n);
    for (c, mode) in basis.modes().iter().enumerate() {
        if !touched.contains(&mode.path) {
            continue;
        }
        matrix[(c, c)] = ZERO;
        let col = match mode.pol {
            Pol::L => 0,
            Pol::R => 1,
        };
        for (row, pol) in Pol::BOTH.iter().enumerate() {
            let target = ModeIndex::new(mode.path, *pol, mode.oam);
            let r = basis.require(&target)?;
            matrix[(r, c)] = jones[(row, col)];
        }
    }
    Ok(ElementOperator {
        label,
        basis: Arc::clone(basis),
        matrix,
        kind,
        touched,
        domain: vec![true; n],
        domain_error: DomainError::Closure,
        transmission: 1.0,
    })
}

/// Linear-to-circular change of basis: columns are `H` and `V` written in
/// `(L, R)` coordinates.
fn linear_to_circular() -> Matrix2<C64> {
    let s = FRAC_1_SQRT_2;
    Matrix2::new(C64::new(s, 0.0), C64::new(0.0, -s), C64::new(s, 0.0), C64::new(0.0, s))
}

/// Retarder Jones matrix in the circular basis. `theta` is the fast-axis
/// angle from horizontal, `retardance` the phase delay of the slow axis.
pub fn retarder_jones(theta: f64, retardance: f64) -> Matrix2<C64> {
    let (s, c) = theta.sin_cos();
    let rot = Matrix2::new(C64::from(c), C64::from(-s), C64::from(s), C64::from(c));
    let diag = Matrix2::new(ONE, ZERO, ZERO, C64::from_polar(1.0, retardance));
    let lin = rot * diag * rot.transpose();
    let t = linear_to_circular();
    t * lin * t.adjoint()
}

/// Half-wave plate with fast axis at `theta` (0 = horizontal).
pub fn half_wave_plate(theta: f64, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    if !theta.is_finite() {
        return Err(Error::Config("waveplate angle must be finite".into()));
    }
    polarization_element(
        format!("HWP({theta:.4})"),
        basis,
        on,
        retarder_jones(theta, std::f64::consts::PI),
        ElementKind::Unitary,
    )
}

/// Quarter-wave plate with fast axis at `theta` (0 = horizontal).
pub fn quarter_wave_plate(theta: f64, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    if !theta.is_finite() {
        return Err(Error::Config("waveplate angle must be finite".into()));
    }
    polarization_element(
        format!("QWP({theta:.4})"),
        basis,
        on,
        retarder_jones(theta, std::f64::consts::FRAC_PI_2),
        ElementKind::Unitary,
    )
}

/// Linear polarizer passing polarization at `angle` from horizontal.
pub fn polarizer(angle: f64, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    let e: Jones = linear_pol(angle);
    let proj = Matrix2::new(
        e[0] * e[0].conj(),
        e[0] * e[1].conj(),
        e[1] * e[0].conj(),
        e[1] * e[1].conj(),
    );
    polarization_element(format!("POL({angle:.4})"), basis, on, proj, ElementKind::Projective)
}

/// What happens to a q-plate conversion whose target OAM is not in the
/// basis.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Closure {
    /// Applying to such a mode is an error.
    Strict,
    /// The component is dropped (it would be rejected downstream).
    Discard,
}

fn q_plate_with(spec: &QPlateSpec, basis: &Arc<ModeBasis>, on: &[Path], closure: Closure) -> Result<ElementOperator> {
    spec.validate()?;
    let touched = touched_set(basis, on)?;
    let shift = spec.oam_shift();
    let sign = match spec.handedness {
        Handedness::LeftGains => 1,
        Handedness::RightGains => -1,
    };
    let n = basis.len();
    let mut matrix = DMatrix::identity(n, n);
    let mut domain = vec![true; n];
    for (c, mode) in basis.modes().iter().enumerate() {
        if !touched.contains(&mode.path) {
            continue;
        }
        matrix[(c, c)] = ZERO;
        let delta = match mode.pol {
            Pol::L => sign * shift,
            Pol::R => -sign * shift,
        };
        let target = ModeIndex::new(mode.path, mode.pol.flipped(), mode.oam + delta);
        match basis.index_of(&target) {
            Some(r) => matrix[(r, c)] = ONE,
            None => {
                if closure == Closure::Strict {
                    domain[c] = false;
                }
            }
        }
    }
    Ok(ElementOperator {
        label: format!("QP(q={})", spec.charge),
        basis: Arc::clone(basis),
        matrix,
        kind: ElementKind::Unitary,
        touched,
        domain,
        domain_error: DomainError::Closure,
        transmission: spec.efficiency,
    })
}

/// q-plate: `|L, m> -> |R, m + 2q>`, `|R, m> -> |L, m - 2q>` (for the
/// default handedness). Modes whose target OAM is outside the truncation set
/// are left out of the domain; propagating weight on them fails with a
/// basis-closure error.
pub fn q_plate(spec: &QPlateSpec, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    q_plate_with(spec, basis, on, Closure::Strict)
}

/// Balanced beam splitter, `a -> a'` transmitted and `b -> a'` reflected:
///
/// ```text
/// out_a' = (in_a + i F(in_b)) / sqrt2
/// out_b' = (i F(in_a) + in_b) / sqrt2
/// ```
///
/// where `F` flips `m -> -m` when the convention asks for it. Modes already
/// on `a'`/`b'` are sent back through the adjoint so the full matrix is
/// unitary.
pub fn beam_splitter(basis: &Arc<ModeBasis>, convention: BsConvention) -> Result<ElementOperator> {
    for p in Path::ALL {
        if !basis.has_path(p) {
            return Err(Error::MissingMode(format!("beam splitter needs path {p}")));
        }
    }
    let flip = |m: i32| if convention.flip_oam_on_reflection { -m } else { m };
    if convention.flip_oam_on_reflection {
        for &m in basis.oam_set() {
            if !basis.oam_set().contains(&-m) {
                return Err(Error::BasisClosure(format!(
                    "OAM set not closed under reflection: {m} has no partner {}",
                    -m
                )));
            }
        }
    }
    let n = basis.len();
    let mut matrix = DMatrix::from_element(n, n, ZERO);
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let r = I * FRAC_1_SQRT_2;
    for (c, mode) in basis.modes().iter().enumerate() {
        let (trans_path, refl_path) = match mode.path {
            Path::A => (Path::APrime, Path::BPrime),
            Path::B => (Path::BPrime, Path::APrime),
            _ => continue,
        };
        let tr = basis.require(&ModeIndex::new(trans_path, mode.pol, mode.oam))?;
        let rf = basis.require(&ModeIndex::new(refl_path, mode.pol, flip(mode.oam)))?;
        matrix[(tr, c)] = t;
        matrix[(rf, c)] = r;
        matrix[(c, tr)] = t.conj();
        matrix[(c, rf)] = r.conj();
    }
    Ok(ElementOperator {
        label: "BS".into(),
        basis: Arc::clone(basis),
        matrix,
        kind: ElementKind::Unitary,
        touched: Path::ALL.to_vec(),
        domain: vec![true; n],
        domain_error: DomainError::Closure,
        transmission: 1.0,
    })
}

/// Single-mode fiber coupler: projects the touched paths onto `m = 0`.
pub fn smf_filter(basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    let touched = touched_set(basis, on)?;
    let n = basis.len();
    let mut matrix = DMatrix::identity(n, n);
    for (c, mode) in basis.modes().iter().enumerate() {
        if touched.contains(&mode.path) && mode.oam != 0 {
            matrix[(c, c)] = ZERO;
        }
    }
    Ok(ElementOperator {
        label: "SMF".into(),
        basis: Arc::clone(basis),
        matrix,
        kind: ElementKind::Projective,
        touched,
        domain: vec![true; n],
        domain_error: DomainError::Closure,
        transmission: 1.0,
    })
}

/// Polarization-to-OAM transferrer: q-plate followed by a horizontal
/// polarizer. Maps `(alpha |L> + beta |R>)|0>` to
/// `|H>(alpha |+2q> + beta |-2q>)` with ideal success probability 1/2.
/// The input photon must carry `m = 0` on the touched paths.
pub fn transferrer_pi_to_o2(spec: &QPlateSpec, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    let qp = q_plate(spec, basis, on)?;
    for (c, mode) in basis.modes().iter().enumerate() {
        if on.contains(&mode.path) && mode.oam == 0 && !qp.domain[c] {
            return Err(Error::BasisClosure(format!(
                "transferrer target OAM {:+} missing from basis",
                spec.oam_shift()
            )));
        }
    }
    let mut op = qp.then(&polarizer(0.0, basis, on)?)?;
    for (c, mode) in basis.modes().iter().enumerate() {
        if op.touched.contains(&mode.path) && mode.oam != 0 {
            op.domain[c] = false;
        }
    }
    op.domain_error = DomainError::Precondition;
    op.label = "transferrer pi->o2".into();
    Ok(op)
}

/// OAM-to-polarization transferrer: q-plate followed by single-mode fiber
/// coupling. Maps `|H>(alpha |+2q> + beta |-2q>)` to
/// `(alpha |L> + beta |R>)|0>` with ideal success probability 1/2.
/// Conversions that leave the truncation set are dropped, since the fiber
/// rejects every `m != 0` component anyway.
pub fn transferrer_o2_to_pi(spec: &QPlateSpec, basis: &Arc<ModeBasis>, on: &[Path]) -> Result<ElementOperator> {
    let qp = q_plate_with(spec, basis, on, Closure::Discard)?;
    let mut op = qp.then(&smf_filter(basis, on)?)?;
    op.label = "transferrer o2->pi".into();
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{pol_circular, pol_h, pol_v};
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    fn pol_basis() -> Arc<ModeBasis> {
        ModeBasis::build(&[Path::A], &[0]).unwrap()
    }

    fn pol_state(basis: &Arc<ModeBasis>, j: Jones) -> PhotonState {
        PhotonState::product(basis, Path::A, j, &[(0, ONE)]).unwrap()
    }

    fn overlap(a: &PhotonState, b: &PhotonState) -> f64 {
        a.inner(b).unwrap().norm_sqr() / (a.norm_sqr() * b.norm_sqr())
    }

    #[test]
    fn half_wave_plate_examples() {
        let b = pol_basis();
        let h = pol_state(&b, pol_h());
        let v = pol_state(&b, pol_v());
        let out = half_wave_plate(0.0, &b, &[Path::A]).unwrap().apply(&h).unwrap();
        assert!((overlap(&out.state, &h) - 1.0).abs() < 1e-12);
        let out = half_wave_plate(FRAC_PI_8, &b, &[Path::A]).unwrap().apply(&h).unwrap();
        assert!((overlap(&out.state, &h) - 0.5).abs() < 1e-12);
        assert!((overlap(&out.state, &v) - 0.5).abs() < 1e-12);
        let d = pol_state(&b, linear_pol(FRAC_PI_4));
        assert!((overlap(&out.state, &d) - 1.0).abs() < 1e-12);
        let out = half_wave_plate(FRAC_PI_4, &b, &[Path::A]).unwrap().apply(&h).unwrap();
        assert!((overlap(&out.state, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_plate_examples() {
        let b = pol_basis();
        let h = pol_state(&b, pol_h());
        let out = quarter_wave_plate(FRAC_PI_4, &b, &[Path::A])
            .unwrap()
            .apply(&h)
            .unwrap();
        // Fast axis at +45 deg turns H into R in this convention.
        let r = pol_state(&b, pol_circular(Pol::R));
        assert!((overlap(&out.state, &r) - 1.0).abs() < 1e-12);

        let l = pol_state(&b, pol_circular(Pol::L));
        let out = quarter_wave_plate(0.0, &b, &[Path::A]).unwrap().apply(&l).unwrap();
        let v = pol_state(&b, pol_v());
        let h = pol_state(&b, pol_h());
        assert!((overlap(&out.state, &h) - 0.5).abs() < 1e-12);
        assert!((overlap(&out.state, &v) - 0.5).abs() < 1e-12);
        // Equal-weight and linear: lies on a +-45 deg axis.
        let d = pol_state(&b, linear_pol(FRAC_PI_4));
        let a = pol_state(&b, linear_pol(-FRAC_PI_4));
        assert!((overlap(&out.state, &d).max(overlap(&out.state, &a)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waveplates_are_unitary() {
        let b = ModeBasis::build(&[Path::A, Path::B], &[-2, 0, 2]).unwrap();
        for k in 0..16 {
            let th = k as f64 * PI / 16.0 - 0.3;
            assert!(half_wave_plate(th, &b, &[Path::A]).unwrap().unitarity_error() < 1e-12);
            assert!(quarter_wave_plate(th, &b, &[Path::B]).unwrap().unitarity_error() < 1e-12);
        }
        assert!(half_wave_plate(f64::NAN, &b, &[Path::A]).is_err());
    }

    #[test]
    fn q_plate_examples() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let qp = q_plate(&QPlateSpec::ideal(), &b, &[Path::A]).unwrap();
        let l0 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 0)).unwrap();
        let out = qp.apply(&l0).unwrap();
        assert!((out.state.amplitude(&ModeIndex::new(Path::A, Pol::R, 2)) - ONE).norm() < 1e-12);
        let r0 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::R, 0)).unwrap();
        let out = qp.apply(&r0).unwrap();
        assert!((out.state.amplitude(&ModeIndex::new(Path::A, Pol::L, -2)) - ONE).norm() < 1e-12);

        let h0 = PhotonState::product(&b, Path::A, pol_h(), &[(0, ONE)]).unwrap();
        let out = qp.apply(&h0).unwrap();
        let s = C64::from(FRAC_1_SQRT_2);
        assert!((out.state.amplitude(&ModeIndex::new(Path::A, Pol::R, 2)) - s).norm() < 1e-12);
        assert!((out.state.amplitude(&ModeIndex::new(Path::A, Pol::L, -2)) - s).norm() < 1e-12);
        assert!((out.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_plate_closure_and_efficiency() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let qp = q_plate(&QPlateSpec::ideal(), &b, &[Path::A]).unwrap();
        let l2 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 2)).unwrap();
        assert!(matches!(qp.apply(&l2), Err(Error::BasisClosure(_))));
        assert!(qp.unitarity_error() < 1e-12);

        let lossy = q_plate(&QPlateSpec::experimental(), &b, &[Path::A]).unwrap();
        assert!(lossy.unitarity_error() < 1e-12);
        let l0 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 0)).unwrap();
        assert!((lossy.apply(&l0).unwrap().weight - 0.8).abs() < 1e-12);

        let bad = QPlateSpec {
            efficiency: 1.2,
            ..QPlateSpec::ideal()
        };
        assert!(matches!(q_plate(&bad, &b, &[Path::A]), Err(Error::Config(_))));
        let bad = QPlateSpec {
            charge: 0.3,
            ..QPlateSpec::ideal()
        };
        assert!(q_plate(&bad, &b, &[Path::A]).is_err());
    }

    #[test]
    fn q_plate_handedness_flag() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let spec = QPlateSpec {
            handedness: Handedness::RightGains,
            ..QPlateSpec::ideal()
        };
        let qp = q_plate(&spec, &b, &[Path::A]).unwrap();
        let l0 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 0)).unwrap();
        let out = qp.apply(&l0).unwrap();
        assert!((out.state.amplitude(&ModeIndex::new(Path::A, Pol::R, -2)) - ONE).norm() < 1e-12);
    }

    #[test]
    fn q_plate_inverse_is_identity() {
        let b = ModeBasis::build(&[Path::A, Path::B], &[-4, -2, 0, 2, 4]).unwrap();
        let qp = q_plate(&QPlateSpec::ideal(), &b, &[Path::A]).unwrap();
        let round = qp.then(&qp.adjoint()).unwrap();
        for c in (0..b.len()).filter(|&c| qp.is_defined_on(c)) {
            for r in 0..b.len() {
                let target = if r == c { ONE } else { ZERO };
                assert!((round.matrix()[(r, c)] - target).norm() < 1e-12);
            }
        }
        // The charge -q plate with the opposite handedness is the same device.
        let mirrored = q_plate(
            &QPlateSpec {
                charge: -1.0,
                handedness: Handedness::RightGains,
                ..QPlateSpec::ideal()
            },
            &b,
            &[Path::A],
        )
        .unwrap();
        assert_eq!(mirrored.matrix(), qp.matrix());
    }

    #[test]
    fn polarizer_examples() {
        let b = pol_basis();
        let pol = polarizer(0.0, &b, &[Path::A]).unwrap();
        assert!(pol.idempotency_error() < 1e-12);
        let h = pol_state(&b, pol_h());
        let out = pol.apply(&h).unwrap();
        assert!((out.weight - 1.0).abs() < 1e-12);
        assert!((overlap(&out.state, &h) - 1.0).abs() < 1e-12);
        let out = pol.apply(&pol_state(&b, pol_v())).unwrap();
        assert!(out.weight < 1e-24);
        let out = pol.apply(&pol_state(&b, pol_circular(Pol::L))).unwrap();
        assert!((out.weight - 0.5).abs() < 1e-12);
        assert!((overlap(&out.state, &h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smf_examples() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let smf = smf_filter(&b, &[Path::A]).unwrap();
        assert!(smf.idempotency_error() < 1e-15);
        let m0 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 0)).unwrap();
        assert!((smf.apply(&m0).unwrap().weight - 1.0).abs() < 1e-15);
        let m2 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 2)).unwrap();
        assert_eq!(smf.apply(&m2).unwrap().weight, 0.0);
        let mix = PhotonState::product(&b, Path::A, pol_h(), &[(0, ONE), (2, ONE)]).unwrap();
        assert!((smf.apply(&mix).unwrap().weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_single_photon() {
        let b = ModeBasis::build(&Path::ALL, &[-2, 2]).unwrap();
        let bs = beam_splitter(&b, BsConvention::default()).unwrap();
        assert_eq!(bs.kind(), ElementKind::Unitary);
        assert!(bs.unitarity_error() < 1e-12);
        let a = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 2)).unwrap();
        let out = bs.apply(&a).unwrap().state;
        let s = FRAC_1_SQRT_2;
        assert!((out.amplitude(&ModeIndex::new(Path::APrime, Pol::L, 2)) - C64::new(s, 0.0)).norm() < 1e-12);
        assert!((out.amplitude(&ModeIndex::new(Path::BPrime, Pol::L, -2)) - C64::new(0.0, s)).norm() < 1e-12);
    }

    #[test]
    fn beam_splitter_requires_paths_and_closure() {
        let b = ModeBasis::build(&[Path::A, Path::B], &[-2, 2]).unwrap();
        assert!(matches!(
            beam_splitter(&b, BsConvention::default()),
            Err(Error::MissingMode(_))
        ));
        let b = ModeBasis::build(&Path::ALL, &[0, 2]).unwrap();
        assert!(matches!(
            beam_splitter(&b, BsConvention::default()),
            Err(Error::BasisClosure(_))
        ));
        let conv = BsConvention {
            flip_oam_on_reflection: false,
        };
        assert!(beam_splitter(&b, conv).is_ok());
    }

    #[test]
    fn beam_splitter_two_photon_coalescence() {
        let b = ModeBasis::build(&Path::ALL, &[-2, 2]).unwrap();
        let bs = beam_splitter(&b, BsConvention::default()).unwrap();
        let a2 = PhotonState::basis_state(&b, ModeIndex::new(Path::A, Pol::L, 2)).unwrap();
        let bm2 = PhotonState::basis_state(&b, ModeIndex::new(Path::B, Pol::L, -2)).unwrap();
        let b2 = PhotonState::basis_state(&b, ModeIndex::new(Path::B, Pol::L, 2)).unwrap();

        let ap2 = ModeIndex::new(Path::APrime, Pol::L, 2);
        let opposite = bs
            .apply(&TwoPhotonState::symmetrize_product(&a2, &bm2).unwrap())
            .unwrap();
        let same = bs
            .apply(&TwoPhotonState::symmetrize_product(&a2, &b2).unwrap())
            .unwrap();
        // Distinguishable reference: probability 1/4 of both photons in a'.
        let dist = 0.25;
        assert!((opposite.state.both_on_weight(Path::APrime) - 2.0 * dist).abs() < 1e-12);
        assert!((opposite.state.amplitude(&ap2, &ap2).norm_sqr() - 2.0 * dist).abs() < 1e-12);
        assert!((same.state.both_on_weight(Path::APrime) - dist).abs() < 1e-12);
        assert!((opposite.weight - 1.0).abs() < 1e-12 && (same.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transferrer_pi_to_o2_examples() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let tr = transferrer_pi_to_o2(&QPlateSpec::ideal(), &b, &[Path::A]).unwrap();
        let l0 = pol_state(&b, pol_circular(Pol::L));
        let out = tr.apply(&l0).unwrap();
        assert!((out.weight - 0.5).abs() < 1e-12);
        let expect = PhotonState::product(&b, Path::A, pol_h(), &[(2, ONE)]).unwrap();
        assert!((overlap(&out.state, &expect) - 1.0).abs() < 1e-12);

        let h0 = pol_state(&b, pol_h());
        let out = tr.apply(&h0).unwrap();
        assert!((out.weight - 0.5).abs() < 1e-12);
        let hg = PhotonState::product(&b, Path::A, pol_h(), &[(2, ONE), (-2, ONE)]).unwrap();
        assert!((overlap(&out.state, &hg) - 1.0).abs() < 1e-12);

        let not_zero = PhotonState::product(&b, Path::A, pol_h(), &[(2, ONE)]).unwrap();
        assert!(matches!(tr.apply(&not_zero), Err(Error::Precondition(_))));
    }

    #[test]
    fn transferrer_o2_to_pi_examples() {
        let b = ModeBasis::build(&[Path::A], &[-2, 0, 2]).unwrap();
        let spec = QPlateSpec::ideal();
        let back = transferrer_o2_to_pi(&spec, &b, &[Path::A]).unwrap();
        let h2 = PhotonState::product(&b, Path::A, pol_h(), &[(2, ONE)]).unwrap();
        let out = back.apply(&h2).unwrap();
        assert!((out.weight - 0.5).abs() < 1e-12);
        let l0 = pol_state(&b, pol_circular(Pol::L));
        assert!((overlap(&out.state, &l0) - 1.0).abs() < 1e-12);

        let hh = PhotonState::product(&b, Path::A, pol_h(), &[(2, ONE), (-2, ONE)]).unwrap();
        let out = back.apply(&hh).unwrap();
        assert!((overlap(&out.state, &pol_state(&b, pol_h())) - 1.0).abs() < 1e-12);

        let fwd = transferrer_pi_to_o2(&spec, &b, &[Path::A]).unwrap();
        let round = fwd.then(&back).unwrap();
        let psi = pol_state(&b, [C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let out = round.apply(&psi).unwrap();
        assert!((out.weight - 0.25).abs() < 1e-12);
        let amp = out.state.inner(&psi).unwrap();
        assert!((amp.norm_sqr() - 0.25).abs() < 1e-12);
        // Same relative phase, not just same populations.
        assert!(
            (out.state.amplitudes()[b.index_of(&ModeIndex::new(Path::A, Pol::L, 0)).unwrap()] - C64::new(0.3, 0.0))
                .norm()
                < 1e-12
        );
    }

    #[test]
    fn identity_and_chain_weights() {
        let b = pol_basis();
        let h = pol_state(&b, pol_h());
        let out = ElementOperator::identity(&b).apply(&h).unwrap();
        assert_eq!(out.weight, 1.0);
        assert_eq!(out.state.amplitudes(), h.amplitudes());

        let p1 = polarizer(0.0, &b, &[Path::A]).unwrap();
        let p2 = polarizer(FRAC_PI_4, &b, &[Path::A]).unwrap();
        let w1 = p1.apply(&pol_state(&b, pol_circular(Pol::L))).unwrap();
        let w2 = p2.apply(&w1.state).unwrap();
        let chained = p1
            .then(&p2)
            .unwrap()
            .apply(&pol_state(&b, pol_circular(Pol::L)))
            .unwrap();
        assert!((chained.weight - w1.weight * w2.weight).abs() < 1e-12);
        assert!((chained.weight - 0.25).abs() < 1e-12);
    }

    #[test]
    fn basis_mismatch_rejected() {
        let b1 = pol_basis();
        let b2 = ModeBasis::build(&[Path::A], &[0, 2]).unwrap();
        let op = polarizer(0.0, &b1, &[Path::A]).unwrap();
        let s = PhotonState::product(&b2, Path::A, pol_h(), &[(0, ONE)]).unwrap();
        assert!(matches!(op.apply(&s), Err(Error::BasisMismatch(_))));
    }
}
