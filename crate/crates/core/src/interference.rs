//! Hong-Ou-Mandel coalescence with partial temporal distinguishability.
//!
//! The post-selected rate of both photons leaving through `a'` is
//!
//! ```text
//! C(delta) = v(delta)^2 P_ind + (1 - v(delta)^2) P_dist = C_dist (1 + v^2 mu)
//! ```
//!
//! where `P_ind` comes from evolving the symmetrized two-photon state through
//! the beam splitter, `P_dist` from evolving each photon on its own, `v` is
//! the single-photon wavepacket overlap at trombone delay `delta`, and `mu`
//! the squared overlap of the internal states after the reflection OAM flip.
//!
//! Wavepackets are gaussian with the interference-filter bandwidth. For an
//! intensity spectrum of FWHM `dk = 1/l_c` in wavenumber, the overlap is
//! `v = exp(-kappa (delta/l_c)^2)` with `kappa = pi^2 / (4 ln 2)`. The excess
//! coalescence `v^2` therefore has 1/e half-width `l_c / sqrt(2 kappa)`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{beam_splitter, BsConvention, ElementOperator};
use crate::error::{Error, Result};
use crate::fock::{ModeBasis, ModeIndex, Path, PhotonState, TwoPhotonState};
use crate::sampling::poisson;

/// Shape factor of the gaussian wavepacket overlap.
pub const OVERLAP_KAPPA: f64 = std::f64::consts::PI * std::f64::consts::PI / (4.0 * std::f64::consts::LN_2);

/// Speed of light in micrometres per femtosecond.
pub const C_UM_PER_FS: f64 = 0.299_792_458;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralShape {
    #[default]
    Gaussian,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralProfile {
    pub center_wavelength_nm: f64,
    /// Full width at half maximum.
    pub bandwidth_nm: f64,
    #[serde(default)]
    pub shape: SpectralShape,
}

impl Default for SpectralProfile {
    fn default() -> Self {
        SpectralProfile {
            center_wavelength_nm: 795.0,
            bandwidth_nm: 6.0,
            shape: SpectralShape::Gaussian,
        }
    }
}

impl SpectralProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength_nm > 0.0 && self.center_wavelength_nm.is_finite()) {
            return Err(Error::Config("center wavelength must be positive".into()));
        }
        if !(self.bandwidth_nm > 0.0 && self.bandwidth_nm.is_finite()) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        Ok(())
    }
}

/// `l_c = lambda^2 / dlambda`, in micrometres.
pub fn coherence_length(profile: &SpectralProfile) -> f64 {
    profile.center_wavelength_nm * profile.center_wavelength_nm / profile.bandwidth_nm * 1e-3
}

/// Wavepacket amplitude overlap at path-length difference `delay_um`.
pub fn temporal_overlap(delay_um: f64, profile: &SpectralProfile) -> f64 {
    let x = delay_um / coherence_length(profile);
    (-OVERLAP_KAPPA * x * x).exp()
}

/// 1/e half-width of the coalescence peak `v^2`, in micrometres.
pub fn peak_half_width(profile: &SpectralProfile) -> f64 {
    coherence_length(profile) / (2.0 * OVERLAP_KAPPA).sqrt()
}

pub fn delay_to_fs(delay_um: f64) -> f64 {
    delay_um / C_UM_PER_FS
}

/// Single-photon internal state: the path label is dropped, leaving the
/// `(pol, oam)` amplitudes.
fn internal_amplitudes(psi: &PhotonState, path: Path, flip: bool) -> Vec<(ModeIndex, num_complex::Complex64)> {
    psi.basis()
        .modes()
        .iter()
        .zip(psi.amplitudes())
        .filter(|(m, a)| m.path == path && a.norm_sqr() > 0.0)
        .map(|(m, a)| {
            let oam = if flip { -m.oam } else { m.oam };
            (ModeIndex::new(Path::A, m.pol, oam), *a)
        })
        .collect()
}

fn input_path(psi: &PhotonState, name: &str) -> Result<Path> {
    match psi.occupied_paths().as_slice() {
        [p @ (Path::A | Path::B)] => Ok(*p),
        _ => Err(Error::Precondition(format!(
            "{name} must occupy exactly one input path (a or b)"
        ))),
    }
}

fn check_inputs(psi_a: &PhotonState, psi_b: &PhotonState) -> Result<(Path, Path)> {
    let pa = input_path(psi_a, "psi_a")?;
    let pb = input_path(psi_b, "psi_b")?;
    if pa == pb {
        return Err(Error::Precondition("photons must enter on distinct input paths".into()));
    }
    Ok((pa, pb))
}

/// `mu = |<psi_a | F(psi_b)>|^2` evaluated directly on the internal labels,
/// where `F` is the reflection OAM flip.
pub fn internal_overlap(psi_a: &PhotonState, psi_b: &PhotonState, convention: BsConvention) -> Result<f64> {
    let (pa, pb) = check_inputs(psi_a, psi_b)?;
    let a = internal_amplitudes(&psi_a.normalized()?, pa, false);
    let b = internal_amplitudes(&psi_b.normalized()?, pb, convention.flip_oam_on_reflection);
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (ma, ca) in &a {
        for (mb, cb) in &b {
            if ma == mb {
                acc += ca.conj() * cb;
            }
        }
    }
    Ok(acc.norm_sqr())
}

/// Both-in-`a'` probabilities from the beam-splitter evolution.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CoalescenceRates {
    /// Temporally indistinguishable photons.
    pub indistinguishable: f64,
    /// Fully distinguishable photons (baseline `C_dist`).
    pub distinguishable: f64,
}

impl CoalescenceRates {
    /// `mu` recovered from the evolved rates: `P_ind / P_dist - 1`.
    pub fn mu(&self) -> f64 {
        self.indistinguishable / self.distinguishable - 1.0
    }

    pub fn at_overlap(&self, v: f64) -> f64 {
        let v2 = v * v;
        v2 * self.indistinguishable + (1.0 - v2) * self.distinguishable
    }
}

pub fn coalescence_rates(psi_a: &PhotonState, psi_b: &PhotonState, bs: &ElementOperator) -> Result<CoalescenceRates> {
    check_inputs(psi_a, psi_b)?;
    let a = psi_a.normalized()?;
    let b = psi_b.normalized()?;
    let pair = TwoPhotonState::symmetrize_product(&a, &b)?;
    let indistinguishable = bs.apply(&pair)?.state.both_on_weight(Path::APrime);
    let pa = bs.apply(&a)?.state.path_weight(Path::APrime);
    let pb = bs.apply(&b)?.state.path_weight(Path::APrime);
    Ok(CoalescenceRates {
        indistinguishable,
        distinguishable: pa * pb,
    })
}

fn default_bs(basis: &Arc<ModeBasis>) -> Result<ElementOperator> {
    beam_splitter(basis, BsConvention::default())
}

/// Expected both-in-`a'` coincidence probability at trombone delay
/// `delay_um`.
pub fn coincidence_expectation(
    psi_a: &PhotonState,
    psi_b: &PhotonState,
    delay_um: f64,
    profile: &SpectralProfile,
) -> Result<f64> {
    if !delay_um.is_finite() {
        return Err(Error::Precondition("delay must be finite".into()));
    }
    let rates = coalescence_rates(psi_a, psi_b, &default_bs(psi_a.basis())?)?;
    Ok(rates.at_overlap(temporal_overlap(delay_um, profile)))
}

/// Coincidence curve over a delay scan.
#[derive(Clone, Debug, Serialize)]
pub struct DelayScan {
    pub delays_um: Vec<f64>,
    pub coincidences: Vec<f64>,
    /// `C(delta) / C_dist`.
    pub enhancement: Vec<f64>,
    pub baseline: f64,
    /// `R = C(0) / C_dist`.
    pub peak_enhancement: f64,
}

fn check_scan(delays_um: &[f64]) -> Result<()> {
    if delays_um.is_empty() {
        return Err(Error::Config("delay scan is empty".into()));
    }
    if delays_um.iter().any(|d| !d.is_finite()) {
        return Err(Error::Config("delay scan contains a non-finite value".into()));
    }
    Ok(())
}

fn scan_from_rates(rates: &[(f64, CoalescenceRates)], delays_um: &[f64], profile: &SpectralProfile) -> DelayScan {
    let at = |v: f64| rates.iter().map(|(w, r)| w * r.at_overlap(v)).sum::<f64>();
    let baseline = at(0.0);
    let coincidences: Vec<f64> = delays_um.iter().map(|d| at(temporal_overlap(*d, profile))).collect();
    let enhancement = coincidences.iter().map(|c| c / baseline).collect();
    DelayScan {
        delays_um: delays_um.to_vec(),
        coincidences,
        enhancement,
        baseline,
        peak_enhancement: at(1.0) / baseline,
    }
}

/// HOM curve for two pure input photons.
pub fn hom_curve(
    psi_a: &PhotonState,
    psi_b: &PhotonState,
    delays_um: &[f64],
    profile: &SpectralProfile,
) -> Result<DelayScan> {
    hom_curve_with(psi_a, psi_b, delays_um, profile, BsConvention::default())
}

/// [`hom_curve`] with an explicit reflection convention.
pub fn hom_curve_with(
    psi_a: &PhotonState,
    psi_b: &PhotonState,
    delays_um: &[f64],
    profile: &SpectralProfile,
    convention: BsConvention,
) -> Result<DelayScan> {
    check_scan(delays_um)?;
    profile.validate()?;
    let rates = coalescence_rates(psi_a, psi_b, &beam_splitter(psi_a.basis(), convention)?)?;
    Ok(scan_from_rates(&[(1.0, rates)], delays_um, profile))
}

/// HOM curve for mixed inputs given as weighted pure-state ensembles.
pub fn hom_curve_ensemble(
    ensemble_a: &[(f64, PhotonState)],
    ensemble_b: &[(f64, PhotonState)],
    delays_um: &[f64],
    profile: &SpectralProfile,
) -> Result<DelayScan> {
    check_scan(delays_um)?;
    profile.validate()?;
    let first = ensemble_a
        .first()
        .ok_or_else(|| Error::InvalidState("empty ensemble".into()))?;
    let bs = default_bs(first.1.basis())?;
    let mut rates = Vec::with_capacity(ensemble_a.len() * ensemble_b.len());
    for (wa, a) in ensemble_a {
        for (wb, b) in ensemble_b {
            rates.push((wa * wb, coalescence_rates(a, b, &bs)?));
        }
    }
    let total: f64 = rates.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState(format!("ensemble weights sum to {total}, not 1")));
    }
    Ok(scan_from_rates(&rates, delays_um, profile))
}

/// Poisson-sampled coincidence counts, scaled so that the distinguishable
/// baseline has mean `baseline_counts`.
pub fn sample_counts<R: Rng + ?Sized>(scan: &DelayScan, baseline_counts: f64, rng: &mut R) -> Vec<u64> {
    scan.enhancement
        .iter()
        .map(|e| poisson(e * baseline_counts, rng))
        .collect()
}

/// Enhancement estimated from counts: the zero-delay count over the mean of
/// the points farther than three peak half-widths.
pub fn estimate_enhancement(delays_um: &[f64], counts: &[u64], profile: &SpectralProfile) -> Result<f64> {
    if delays_um.len() != counts.len() || delays_um.is_empty() {
        return Err(Error::UndefinedEstimate(
            "delay and count lists must match and be nonempty".into(),
        ));
    }
    let far = 3.0 * peak_half_width(profile);
    let (mut sum, mut n) = (0.0, 0usize);
    for (d, c) in delays_um.iter().zip(counts) {
        if d.abs() >= far {
            sum += *c as f64;
            n += 1;
        }
    }
    if n == 0 || sum == 0.0 {
        return Err(Error::UndefinedEstimate(
            "no baseline points beyond the coalescence peak".into(),
        ));
    }
    let centre = delays_um
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(counts[centre] as f64 / (sum / n as f64))
}
