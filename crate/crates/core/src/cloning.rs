//! 1 -> 2 symmetrization cloner for OAM qubits.
//!
//! The qubit to clone enters on path `a`, an ancilla photon in the maximally
//! mixed state `(|+2><+2| + |-2><-2|)/2` enters on `b`. After the beam
//! splitter only the events with both photons in `a'` are kept; each of the
//! two photons then carries `5/6 |phi><phi| + 1/6 |phi_perp><phi_perp|`.
//!
//! Two independent routes compute the same result:
//!
//! * [`Cloner::run_full`] prepares both photons through the polarization to
//!   OAM transferrer, evolves the bosonic pair through the beam splitter,
//!   post-selects and takes the partial trace.
//! * [`Cloner::run_projector`] applies the coalescence projector
//!   `P = |Psi+><Phi+| + |Phi+><Psi+| + |Phi-><Psi-|` to the two-qubit input
//!   `|phi><phi| (x) I/2` with plain 4x4 matrices. The single-port success
//!   probability is `Tr(P rho P^+) / 2`, the `1/2` being `|t r|^2` times the
//!   two orderings of the photon pair.
//!
//! Clones leaving through `b'` carry the reflected OAM, so their target is
//! the flipped input `F(phi)` (swap of the `+2` and `-2` amplitudes).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elements::{
    beam_splitter, half_wave_plate, transferrer_pi_to_o2, BsConvention, ElementOperator, QPlateSpec,
};
use crate::error::{Error, Result};
use crate::fock::{
    mix, pol_h, pure_density, DensityOperator, ModeBasis, ModeIndex, Path, PhotonState, Pol, Space, TwoPhotonState,
    C64, ONE, ZERO,
};
use crate::sampling::{haar_state, poisson, seeded_rng};

/// OAM values spanning the cloned qubit, in amplitude order.
pub const O2: [i32; 2] = [2, -2];

/// Labels of the six states characterized experimentally.
pub const TABLE_ONE_STATES: [&str; 6] = ["h", "v", "-2", "+2", "a", "d"];

/// OAM qubit `alpha |+2> + beta |-2>`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub alpha: C64,
    pub beta: C64,
}

impl QubitSpec {
    /// Normalizes the given amplitudes.
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("qubit amplitudes are zero".into()));
        }
        Ok(QubitSpec {
            alpha: alpha / n,
            beta: beta / n,
        })
    }

    /// `cos(theta/2)|+2> + e^{i phi} sin(theta/2)|-2>`; `theta = 0` is `|+2>`.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        QubitSpec {
            alpha: C64::new((theta / 2.0).cos(), 0.0),
            beta: C64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    /// One of `h, v, a, d, +2, -2`.
    pub fn named(label: &str) -> Result<Self> {
        let s = FRAC_1_SQRT_2;
        let (alpha, beta) = match label {
            "+2" => (ONE, ZERO),
            "-2" => (ZERO, ONE),
            "h" => (C64::new(s, 0.0), C64::new(s, 0.0)),
            // (|+2> - |-2>) / (i sqrt2)
            "v" => (C64::new(0.0, -s), C64::new(0.0, s)),
            // (|h> + |v>) / sqrt2
            "a" => (C64::new(0.5, -0.5), C64::new(0.5, 0.5)),
            // (|h> - |v>) / sqrt2
            "d" => (C64::new(0.5, 0.5), C64::new(0.5, -0.5)),
            other => return Err(Error::Config(format!("unknown qubit label '{other}'"))),
        };
        Ok(QubitSpec { alpha, beta })
    }

    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let v = haar_state(2, rng);
        QubitSpec {
            alpha: v[0],
            beta: v[1],
        }
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.alpha, self.beta]
    }

    pub fn orthogonal(&self) -> Self {
        QubitSpec {
            alpha: -self.beta.conj(),
            beta: self.alpha.conj(),
        }
    }

    /// Reflection image: `|+2> <-> |-2>`.
    pub fn flipped(&self) -> Self {
        QubitSpec {
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    pub fn density(&self) -> Matrix2<C64> {
        let v = [self.alpha, self.beta];
        Matrix2::from_fn(|r, c| v[r] * v[c].conj())
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        stokes_of(&self.density())
    }
}

/// Analysis directions: `(h, v)`, `(a, d)`, `(+2, -2)`.
fn stokes_axes() -> [([C64; 2], [C64; 2]); 3] {
    let q = |l: &str| QubitSpec::named(l).expect("fixed label").amplitudes();
    [(q("h"), q("v")), (q("a"), q("d")), (q("+2"), q("-2"))]
}

fn projector_value(rho: &Matrix2<C64>, v: &[C64; 2]) -> f64 {
    let mut acc = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            acc += v[r].conj() * rho[(r, c)] * v[c];
        }
    }
    acc.re
}

fn stokes_of(rho: &Matrix2<C64>) -> [f64; 3] {
    let axes = stokes_axes();
    let mut out = [0.0; 3];
    for (k, (plus, minus)) in axes.iter().enumerate() {
        out[k] = projector_value(rho, plus) - projector_value(rho, minus);
    }
    out
}

fn as_matrix2(rho: &DensityOperator) -> Result<Matrix2<C64>> {
    match rho.space() {
        Space::Oam { oam, .. } if oam.len() == 2 => {
            let m = rho.matrix();
            Ok(Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
        }
        _ => Err(Error::BasisMismatch(
            "Stokes analysis needs a two-level OAM operator".into(),
        )),
    }
}

/// Stokes vector `(S1, S2, S3)` of a normalized OAM-qubit density operator,
/// from the `h/v`, `a/d` and `+2/-2` analysis bases.
pub fn stokes_vector(rho: &DensityOperator) -> Result<[f64; 3]> {
    let m = as_matrix2(rho)?;
    let t = rho.trace();
    let s = stokes_of(&m);
    Ok([s[0] / t, s[1] / t, s[2] / t])
}

pub fn vector_length(s: &[f64; 3]) -> f64 {
    (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
}

/// Stokes vector estimated from Poisson counts: for each axis the two
/// outcomes are counted with means `counts_per_axis * (1 +- S_k)/2`.
pub fn sample_stokes<R: Rng + ?Sized>(stokes: &[f64; 3], counts_per_axis: f64, rng: &mut R) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let plus = poisson(counts_per_axis * (1.0 + stokes[k]) / 2.0, rng) as f64;
        let minus = poisson(counts_per_axis * (1.0 - stokes[k]) / 2.0, rng) as f64;
        out[k] = if plus + minus > 0.0 {
            (plus - minus) / (plus + minus)
        } else {
            0.0
        };
    }
    out
}

/// How the ancilla's mixed state is realized.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AncillaMode {
    /// Equal mixture of the `|+2>` and `|-2>` runs.
    Exact,
    /// A half-wave plate at a uniformly random angle in front of the
    /// ancilla's transferrer, one angle per sample.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Debug)]
pub struct CloneResult {
    /// Normalized one-photon state of a clone, polarization traced out,
    /// over `(+2, -2)` of the output port.
    pub clone_density: DensityOperator,
    /// Probability of both photons leaving through the analyzed port.
    pub success_probability: f64,
    /// `<target|rho|target>`.
    pub fidelity: f64,
    pub stokes: [f64; 3],
    pub input_bloch: [f64; 3],
}

impl CloneResult {
    fn from_sector(sector: DensityOperator, input: &QubitSpec, target: &QubitSpec) -> Result<Self> {
        let success_probability = sector.trace();
        let clone_density = sector.normalized()?;
        let fidelity = clone_density.expectation_vec(&target.amplitudes())?;
        let stokes = stokes_vector(&clone_density)?;
        Ok(CloneResult {
            clone_density,
            success_probability,
            fidelity,
            stokes,
            input_bloch: input.bloch_vector(),
        })
    }

    pub fn stokes_length(&self) -> f64 {
        vector_length(&self.stokes)
    }
}

/// Serializable record of a clone run.
#[derive(Clone, Debug, Serialize)]
pub struct CloneRecord {
    pub input_bloch: [f64; 3],
    pub fidelity: f64,
    pub success_prob: f64,
    pub stokes: [f64; 3],
}

impl From<&CloneResult> for CloneRecord {
    fn from(r: &CloneResult) -> Self {
        CloneRecord {
            input_bloch: r.input_bloch,
            fidelity: r.fidelity,
            success_prob: r.success_probability,
            stokes: r.stokes,
        }
    }
}

/// Apparatus for the full Fock-space route.
#[derive(Debug, Clone)]
pub struct Cloner {
    prep_basis: Arc<ModeBasis>,
    basis: Arc<ModeBasis>,
    transferrer: ElementOperator,
    bs: ElementOperator,
}

impl Cloner {
    pub fn new() -> Result<Self> {
        Self::with_elements(&QPlateSpec::ideal(), BsConvention::default())
    }

    /// `qplate.charge` must be 1 so the transferrer lands on `+-2`.
    pub fn with_elements(qplate: &QPlateSpec, convention: BsConvention) -> Result<Self> {
        if qplate.oam_shift() != 2 {
            return Err(Error::Config("cloning the o2 qubit needs a q = 1 plate".into()));
        }
        let prep_basis = ModeBasis::build(&[Path::A, Path::B], &[-2, 0, 2])?;
        let basis = ModeBasis::build(&Path::ALL, &[-2, 2])?;
        let transferrer = transferrer_pi_to_o2(qplate, &prep_basis, &[Path::A, Path::B])?;
        let bs = beam_splitter(&basis, convention)?;
        Ok(Cloner {
            prep_basis,
            basis,
            transferrer,
            bs,
        })
    }

    pub fn basis(&self) -> &Arc<ModeBasis> {
        &self.basis
    }

    pub fn beam_splitter(&self) -> &ElementOperator {
        &self.bs
    }

    /// Encodes the qubit in polarization `alpha |L> + beta |R>` at `m = 0`,
    /// sends it through the transferrer and keeps the heralded output.
    pub fn prepare(&self, path: Path, q: &QubitSpec) -> Result<PhotonState> {
        let pol = PhotonState::superposition(
            &self.prep_basis,
            &[
                (ModeIndex::new(path, Pol::L, 0), q.alpha),
                (ModeIndex::new(path, Pol::R, 0), q.beta),
            ],
        )?;
        self.transfer(&pol)
    }

    fn transfer(&self, pol_state: &PhotonState) -> Result<PhotonState> {
        let out = self.transferrer.apply(pol_state)?;
        out.state.normalized()?.embed(&self.basis)
    }

    /// Ancilla after a half-wave plate at `theta` acting on `|H>`.
    fn prepare_rotated_ancilla(&self, theta: f64) -> Result<PhotonState> {
        let h = PhotonState::product(&self.prep_basis, Path::B, pol_h(), &[(0, ONE)])?;
        let hwp = half_wave_plate(theta, &self.prep_basis, &[Path::B])?;
        self.transfer(&hwp.apply(&h)?.state)
    }

    /// Post-selected two-photon density (trace = success probability) for a
    /// pure ancilla state.
    fn branch(&self, a: &PhotonState, b: &PhotonState, port: Path) -> Result<DensityOperator> {
        let pair = TwoPhotonState::symmetrize_product(a, b)?;
        let out = self.bs.apply(&pair)?;
        Ok(pure_density(&out.state.project_both_on(port)))
    }

    fn finish(&self, pair_rho: DensityOperator, input: &QubitSpec, port: Path) -> Result<CloneResult> {
        let single = pair_rho.partial_trace_to_single()?;
        let sector = single.trace_polarization(port, &O2)?;
        let target = if port == Path::BPrime && self.bs_flips() {
            input.flipped()
        } else {
            *input
        };
        CloneResult::from_sector(sector, input, &target)
    }

    fn bs_flips(&self) -> bool {
        // A |a, L, +2> photon reflects into |b', L, -2> when the flip is on.
        let src = self
            .basis
            .index_of(&ModeIndex::new(Path::A, Pol::L, 2))
            .expect("mode in basis");
        let dst = self
            .basis
            .index_of(&ModeIndex::new(Path::BPrime, Pol::L, -2))
            .expect("mode in basis");
        self.bs.matrix()[(dst, src)] != ZERO
    }

    /// Full route with the ancilla in the maximally mixed state.
    pub fn run_full(&self, input: &QubitSpec, mode: AncillaMode) -> Result<CloneResult> {
        self.run_full_on(input, mode, Path::APrime)
    }

    /// Full route analyzing the given output port (`a'` or `b'`).
    pub fn run_full_on(&self, input: &QubitSpec, mode: AncillaMode, port: Path) -> Result<CloneResult> {
        if !matches!(port, Path::APrime | Path::BPrime) {
            return Err(Error::Config("clones are analyzed on a' or b'".into()));
        }
        let a = self.prepare(Path::A, input)?;
        let branches = match mode {
            AncillaMode::Exact => {
                let up = self.prepare(Path::B, &QubitSpec::named("+2")?)?;
                let down = self.prepare(Path::B, &QubitSpec::named("-2")?)?;
                vec![(self.branch(&a, &up, port)?, 0.5), (self.branch(&a, &down, port)?, 0.5)]
            }
            AncillaMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::Config("Monte-Carlo ancilla needs at least one sample".into()));
                }
                let mut rng = seeded_rng(seed);
                let w = 1.0 / samples as f64;
                let mut out = Vec::with_capacity(samples);
                for _ in 0..samples {
                    let theta = rng.random_range(0.0..PI);
                    let b = self.prepare_rotated_ancilla(theta)?;
                    out.push((self.branch(&a, &b, port)?, w));
                }
                out
            }
        };
        // Mixture weights may not sum to exactly one after many samples.
        let total: f64 = branches.iter().map(|(_, w)| w).sum();
        let branches: Vec<_> = branches.into_iter().map(|(r, w)| (r, w / total)).collect();
        self.finish(mix(&branches)?, input, port)
    }

    /// Full route with a pure ancilla.
    pub fn run_with_pure_ancilla(&self, input: &QubitSpec, ancilla: &QubitSpec) -> Result<CloneResult> {
        let a = self.prepare(Path::A, input)?;
        let b = self.prepare(Path::B, ancilla)?;
        self.finish(self.branch(&a, &b, Path::APrime)?, input, Path::APrime)
    }

    /// Route through the coalescence projector on the two-qubit space.
    pub fn run_projector(&self, input: &QubitSpec) -> Result<CloneResult> {
        run_cloner_projector(input)
    }
}

/// Full-route cloning with a freshly built apparatus.
pub fn run_cloner_full(input: &QubitSpec, mode: AncillaMode) -> Result<CloneResult> {
    Cloner::new()?.run_full(input, mode)
}

/// Bell vectors in the ordered two-qubit basis `|m_a m_b>` with
/// `m in (+2, -2)`: `[Phi+, Phi-, Psi+, Psi-]`.
pub fn bell_vectors() -> [Vector4<C64>; 4] {
    let s = C64::from(FRAC_1_SQRT_2);
    [
        Vector4::new(s, ZERO, ZERO, s),
        Vector4::new(s, ZERO, ZERO, -s),
        Vector4::new(ZERO, s, s, ZERO),
        Vector4::new(ZERO, s, -s, ZERO),
    ]
}

/// `P = |Psi+><Phi+| + |Phi+><Psi+| + |Phi-><Psi-|`.
pub fn coalescence_projector() -> Matrix4<C64> {
    let [phi_p, phi_m, psi_p, psi_m] = bell_vectors();
    psi_p * phi_p.adjoint() + phi_p * psi_p.adjoint() + phi_m * psi_m.adjoint()
}

/// Projector route.
pub fn run_cloner_projector(input: &QubitSpec) -> Result<CloneResult> {
    let phi = input.density();
    let ancilla = Matrix2::identity() * C64::from(0.5);
    let rho_in = phi.kronecker(&ancilla);
    let p = coalescence_projector();
    let rho_out = p * rho_in * p.adjoint();
    // Reduced state of the first photon (the output is exchange symmetric).
    let mut reduced = DMatrix::from_element(2, 2, ZERO);
    for r in 0..2 {
        for c in 0..2 {
            for m in 0..2 {
                reduced[(r, c)] += rho_out[(2 * r + m, 2 * c + m)];
            }
        }
    }
    let both_ports = rho_out.trace().re;
    let sector = DensityOperator::from_matrix(
        Space::Oam {
            path: Path::APrime,
            oam: O2.to_vec(),
        },
        reduced * C64::from(0.5),
    )?;
    CloneResult::from_sector(sector, input, input).map(|mut r| {
        r.success_probability = both_ports / 2.0;
        r
    })
}

/// Bell states in Fock form: `[Phi+, Phi-, Psi+, Psi-]` with one photon on
/// `a` and one on `b`, all horizontally polarized.
pub fn bell_basis(basis: &Arc<ModeBasis>) -> Result<[TwoPhotonState; 4]> {
    let s = C64::from(FRAC_1_SQRT_2);
    let mode = |path, m| -> Result<PhotonState> { PhotonState::product(basis, path, pol_h(), &[(m, ONE)]) };
    let term = |ma: i32, mb: i32| -> Result<TwoPhotonState> {
        TwoPhotonState::symmetrize_product(&mode(Path::A, ma)?, &mode(Path::B, mb)?)
    };
    let combine = |x: TwoPhotonState, y: TwoPhotonState, sign: f64| -> TwoPhotonState {
        let mut entries: std::collections::BTreeMap<(usize, usize), C64> =
            x.entries().map(|(k, v)| (k, v * s)).collect();
        for (k, v) in y.entries() {
            *entries.entry(k).or_insert(ZERO) += v * s * sign;
        }
        TwoPhotonState::from_map(basis, entries)
    };
    Ok([
        combine(term(2, 2)?, term(-2, -2)?, 1.0),
        combine(term(2, 2)?, term(-2, -2)?, -1.0),
        combine(term(2, -2)?, term(-2, 2)?, 1.0),
        combine(term(2, -2)?, term(-2, 2)?, -1.0),
    ])
}

/// The same two-qubit Bell states with both photons on one path. Only the
/// exchange-symmetric ones exist there: `[Phi+, Phi-, Psi+]`.
pub fn same_path_bell_states(basis: &Arc<ModeBasis>, path: Path) -> Result<[TwoPhotonState; 3]> {
    let s = C64::from(FRAC_1_SQRT_2);
    let photon = |oam| PhotonState::product(basis, path, pol_h(), &[(oam, ONE)]);
    let pp = TwoPhotonState::creation_product(&photon(2)?, &photon(2)?);
    let mm = TwoPhotonState::creation_product(&photon(-2)?, &photon(-2)?);
    let pm = TwoPhotonState::creation_product(&photon(2)?, &photon(-2)?);
    let sum = |x: &TwoPhotonState, y: &TwoPhotonState, sign: f64| -> Result<TwoPhotonState> {
        let mut entries: std::collections::BTreeMap<(usize, usize), C64> =
            x.entries().map(|(k, v)| (k, v * s)).collect();
        for (k, v) in y.entries() {
            *entries.entry(k).or_insert(ZERO) += v * s * sign;
        }
        TwoPhotonState::from_map(basis, entries).normalized()
    };
    Ok([sum(&pp, &mm, 1.0)?, sum(&pp, &mm, -1.0)?, pm.normalized()?])
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
}

impl SweepSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::UndefinedEstimate("no values to summarize".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(SweepSummary {
            count: values.len(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std_dev: var.sqrt(),
        })
    }
}

/// The six named states followed by `n` Haar-random qubits.
pub fn sweep_inputs(n: usize, seed: u64) -> Result<Vec<(String, QubitSpec)>> {
    let mut out = Vec::with_capacity(n + 6);
    for l in TABLE_ONE_STATES {
        out.push((l.to_string(), QubitSpec::named(l)?));
    }
    let mut rng = seeded_rng(seed);
    for k in 0..n {
        out.push((format!("haar{k}"), QubitSpec::haar(&mut rng)));
    }
    Ok(out)
}

/// Fidelity statistics of an arbitrary cloning channel over the six named
/// states plus `n` Haar-random qubits.
pub fn universality_sweep_with<F>(n: usize, seed: u64, mut fidelity: F) -> Result<SweepSummary>
where
    F: FnMut(&QubitSpec) -> Result<f64>,
{
    if n == 0 {
        return Err(Error::Config("sweep needs at least one random input".into()));
    }
    let values = sweep_inputs(n, seed)?
        .iter()
        .map(|(_, q)| fidelity(q))
        .collect::<Result<Vec<_>>>()?;
    SweepSummary::from_values(&values)
}

/// Ideal-cloner universality sweep.
pub fn universality_sweep(n: usize, seed: u64) -> Result<SweepSummary> {
    let cloner = Cloner::new()?;
    universality_sweep_with(n, seed, |q| Ok(cloner.run_full(q, AncillaMode::Exact)?.fidelity))
}
