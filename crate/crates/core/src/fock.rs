//! Mode labels and the algebra of one- and two-photon bosonic states.
//!
//! A single-photon mode is the triple (spatial path, circular polarization,
//! OAM value). Two-photon states are stored as a sparse map over unordered
//! mode pairs `{i, j}` with `i <= j`, using the occupation-number convention
//!
//! ```text
//! |psi> = sum_{i<j} c_ij a_i^+ a_j^+ |0>  +  sum_i c_ii (a_i^+)^2 / sqrt(2) |0>
//! ```
//!
//! so that `sum |c|^2 = 1` for a normalized state. The equivalent
//! first-quantized (ordered, exchange-symmetric) tensor has entries
//! `psi_ij = psi_ji = c_ij / sqrt(2)` off the diagonal and `psi_ii = c_ii`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const NORM_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Spatial path of the apparatus: the two beam-splitter inputs and outputs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    A,
    B,
    APrime,
    BPrime,
}

impl Path {
    pub const ALL: [Path; 4] = [Path::A, Path::B, Path::APrime, Path::BPrime];
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Path::A => "a",
            Path::B => "b",
            Path::APrime => "a'",
            Path::BPrime => "b'",
        })
    }
}

/// Circular polarization label.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pol {
    L,
    R,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::L, Pol::R];

    pub fn flipped(self) -> Pol {
        match self {
            Pol::L => Pol::R,
            Pol::R => Pol::L,
        }
    }

    fn slot(self) -> usize {
        match self {
            Pol::L => 0,
            Pol::R => 1,
        }
    }
}

/// Jones vector in the circular `(L, R)` basis.
pub type Jones = [C64; 2];

/// Linear polarization at `angle` from horizontal, expressed in the circular
/// basis through `H = (L + R)/sqrt(2)` and `V = -i (L - R)/sqrt(2)`.
pub fn linear_pol(angle: f64) -> Jones {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [C64::from_polar(s, -angle), C64::from_polar(s, angle)]
}

pub fn pol_h() -> Jones {
    linear_pol(0.0)
}

pub fn pol_v() -> Jones {
    linear_pol(std::f64::consts::FRAC_PI_2)
}

pub fn pol_circular(pol: Pol) -> Jones {
    match pol {
        Pol::L => [ONE, ZERO],
        Pol::R => [ZERO, ONE],
    }
}

/// Label of a single-photon mode.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub path: Path,
    pub pol: Pol,
    pub oam: i32,
}

impl ModeIndex {
    pub const fn new(path: Path, pol: Pol, oam: i32) -> Self {
        ModeIndex { path, pol, oam }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{:?},{:+})", self.path, self.pol, self.oam)
    }
}

/// Ordered list of modes with a position lookup.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    modes: Vec<ModeIndex>,
    lookup: HashMap<ModeIndex, usize>,
    oam_set: Vec<i32>,
}

impl PartialEq for ModeBasis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
    }
}

impl ModeBasis {
    /// Enumerates every `(path, pol, oam)` combination. Modes are ordered
    /// path-major (in the order given), then `L` before `R`, then OAM
    /// ascending. Duplicate entries in either input are ignored.
    pub fn build(paths: &[Path], oam_set: &[i32]) -> Result<Arc<ModeBasis>> {
        if paths.is_empty() {
            return Err(Error::Config("path set is empty".into()));
        }
        if oam_set.is_empty() {
            return Err(Error::Config("OAM truncation set is empty".into()));
        }
        let mut oams = oam_set.to_vec();
        oams.sort_unstable();
        oams.dedup();
        let mut seen_paths = Vec::new();
        for p in paths {
            if !seen_paths.contains(p) {
                seen_paths.push(*p);
            }
        }
        let mut modes = Vec::with_capacity(seen_paths.len() * 2 * oams.len());
        for &path in &seen_paths {
            for pol in Pol::BOTH {
                for &oam in &oams {
                    modes.push(ModeIndex { path, pol, oam });
                }
            }
        }
        Self::with_truncation(modes, oams)
    }

    /// Basis from an explicit mode list; the truncation set is the set of
    /// OAM values that occur.
    pub fn from_modes(modes: Vec<ModeIndex>) -> Result<Arc<ModeBasis>> {
        if modes.is_empty() {
            return Err(Error::Config("mode list is empty".into()));
        }
        let mut oams: Vec<i32> = modes.iter().map(|m| m.oam).collect();
        oams.sort_unstable();
        oams.dedup();
        Self::with_truncation(modes, oams)
    }

    fn with_truncation(modes: Vec<ModeIndex>, oam_set: Vec<i32>) -> Result<Arc<ModeBasis>> {
        let mut lookup = HashMap::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            if !oam_set.contains(&m.oam) {
                return Err(Error::Config(format!("mode {m} outside OAM truncation set")));
            }
            if lookup.insert(*m, i).is_some() {
                return Err(Error::Config(format!("duplicate mode {m}")));
            }
        }
        Ok(Arc::new(ModeBasis { modes, lookup, oam_set }))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> ModeIndex {
        self.modes[i]
    }

    pub fn index_of(&self, mode: &ModeIndex) -> Option<usize> {
        self.lookup.get(mode).copied()
    }

    pub fn require(&self, mode: &ModeIndex) -> Result<usize> {
        self.index_of(mode).ok_or_else(|| Error::MissingMode(mode.to_string()))
    }

    pub fn oam_set(&self) -> &[i32] {
        &self.oam_set
    }

    pub fn has_path(&self, path: Path) -> bool {
        self.modes.iter().any(|m| m.path == path)
    }
}

pub(crate) fn same_basis(a: &Arc<ModeBasis>, b: &Arc<ModeBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_same(a: &Arc<ModeBasis>, b: &Arc<ModeBasis>) -> Result<()> {
    if same_basis(a, b) {
        Ok(())
    } else {
        Err(Error::BasisMismatch(format!(
            "bases of {} and {} modes differ",
            a.len(),
            b.len()
        )))
    }
}

/// One-photon amplitude vector. The squared norm is the recorded weight:
/// 1 for a normalized state, smaller after a lossy or projective element.
#[derive(Debug, Clone)]
pub struct PhotonState {
    basis: Arc<ModeBasis>,
    amps: Vec<C64>,
}

impl PhotonState {
    /// Normalized superposition of the listed modes. Repeated modes add.
    pub fn superposition(basis: &Arc<ModeBasis>, terms: &[(ModeIndex, C64)]) -> Result<Self> {
        let mut amps = vec![ZERO; basis.len()];
        for (mode, c) in terms {
            amps[basis.require(mode)?] += *c;
        }
        PhotonState::unnormalized(basis, amps).normalized()
    }

    pub fn basis_state(basis: &Arc<ModeBasis>, mode: ModeIndex) -> Result<Self> {
        Self::superposition(basis, &[(mode, ONE)])
    }

    /// Product of a polarization Jones vector and OAM amplitudes on one path,
    /// normalized.
    pub fn product(basis: &Arc<ModeBasis>, path: Path, pol: Jones, oam: &[(i32, C64)]) -> Result<Self> {
        let mut terms = Vec::with_capacity(2 * oam.len());
        for p in Pol::BOTH {
            for &(m, c) in oam {
                terms.push((ModeIndex::new(path, p, m), pol[p.slot()] * c));
            }
        }
        Self::superposition(basis, &terms)
    }

    /// Raw amplitudes, kept exactly as given.
    pub fn unnormalized(basis: &Arc<ModeBasis>, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), basis.len(), "amplitude vector length must match basis");
        PhotonState {
            basis: Arc::clone(basis),
            amps,
        }
    }

    pub fn basis(&self) -> &Arc<ModeBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, mode: &ModeIndex) -> C64 {
        self.basis.index_of(mode).map_or(ZERO, |i| self.amps[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Recorded weight (squared norm).
    pub fn weight(&self) -> f64 {
        self.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("state has zero norm".into()));
        }
        let s = 1.0 / n.sqrt();
        Ok(PhotonState {
            basis: Arc::clone(&self.basis),
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    pub fn scaled(&self, factor: C64) -> Self {
        PhotonState {
            basis: Arc::clone(&self.basis),
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PhotonState) -> Result<C64> {
        check_same(&self.basis, &other.basis)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Re-expresses the state in another basis. Fails if weight sits on a
    /// mode the target does not contain.
    pub fn embed(&self, target: &Arc<ModeBasis>) -> Result<Self> {
        let mut amps = vec![ZERO; target.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let mode = self.basis.mode(i);
            amps[target.require(&mode)?] = *a;
        }
        Ok(PhotonState::unnormalized(target, amps))
    }

    /// Moves every amplitude from path `from` to path `to`, keeping pol and
    /// OAM labels.
    pub fn relabel_path(&self, from: Path, to: Path) -> Result<Self> {
        let mut amps = vec![ZERO; self.basis.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let mut mode = self.basis.mode(i);
            if mode.path == from {
                mode.path = to;
            }
            if a.norm_sqr() > 0.0 {
                amps[self.basis.require(&mode)?] += *a;
            }
        }
        Ok(PhotonState::unnormalized(&self.basis, amps))
    }

    /// Paths carrying nonzero amplitude.
    pub fn occupied_paths(&self) -> Vec<Path> {
        let mut out = Vec::new();
        for (i, a) in self.amps.iter().enumerate() {
            let p = self.basis.mode(i).path;
            if a.norm_sqr() > NORM_TOL * NORM_TOL && !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Probability weight found on `path`.
    pub fn path_weight(&self, path: Path) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| self.basis.mode(*i).path == path)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// Exchange-symmetric two-photon state over unordered mode pairs.
#[derive(Debug, Clone)]
pub struct TwoPhotonState {
    basis: Arc<ModeBasis>,
    amps: BTreeMap<(usize, usize), C64>,
}

fn key(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl TwoPhotonState {
    /// Bosonic symmetrization of `psi_a (x) psi_b`, normalized.
    ///
    /// The creation-operator product `a^+(psi_a) a^+(psi_b)|0>` has squared
    /// norm `1 + |<psi_a|psi_b>|^2`; the result is divided by it.
    pub fn symmetrize_product(psi_a: &PhotonState, psi_b: &PhotonState) -> Result<Self> {
        check_same(&psi_a.basis, &psi_b.basis)?;
        for (name, s) in [("psi_a", psi_a), ("psi_b", psi_b)] {
            if !s.is_normalized() {
                return Err(Error::InvalidState(format!("{name} is not normalized")));
            }
        }
        Self::creation_product(psi_a, psi_b).normalized()
    }

    /// Unnormalized `a^+(psi_a) a^+(psi_b)|0>`.
    pub fn creation_product(psi_a: &PhotonState, psi_b: &PhotonState) -> Self {
        let n = psi_a.basis.len();
        let sqrt2 = std::f64::consts::SQRT_2;
        let nz_a: Vec<usize> = (0..n).filter(|&i| psi_a.amps[i] != ZERO).collect();
        let nz_b: Vec<usize> = (0..n).filter(|&i| psi_b.amps[i] != ZERO).collect();
        let mut amps = BTreeMap::new();
        for &i in &nz_a {
            for &j in &nz_b {
                let c = psi_a.amps[i] * psi_b.amps[j];
                let k = key(i, j);
                let contrib = if i == j { c * sqrt2 } else { c };
                *amps.entry(k).or_insert(ZERO) += contrib;
            }
        }
        amps.retain(|_, v| *v != ZERO);
        TwoPhotonState {
            basis: Arc::clone(&psi_a.basis),
            amps,
        }
    }

    /// State from explicit `{i, j}` amplitudes (occupation convention), kept
    /// unnormalized.
    pub fn from_pairs(basis: &Arc<ModeBasis>, entries: &[((ModeIndex, ModeIndex), C64)]) -> Result<Self> {
        let mut amps = BTreeMap::new();
        for ((m1, m2), c) in entries {
            let k = key(basis.require(m1)?, basis.require(m2)?);
            *amps.entry(k).or_insert(ZERO) += *c;
        }
        Ok(TwoPhotonState {
            basis: Arc::clone(basis),
            amps,
        })
    }

    pub(crate) fn from_map(basis: &Arc<ModeBasis>, amps: BTreeMap<(usize, usize), C64>) -> Self {
        TwoPhotonState {
            basis: Arc::clone(basis),
            amps,
        }
    }

    pub fn basis(&self) -> &Arc<ModeBasis> {
        &self.basis
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), C64)> + '_ {
        self.amps.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, m1: &ModeIndex, m2: &ModeIndex) -> C64 {
        match (self.basis.index_of(m1), self.basis.index_of(m2)) {
            (Some(i), Some(j)) => self.amps.get(&key(i, j)).copied().unwrap_or(ZERO),
            _ => ZERO,
        }
    }

    /// First-quantized symmetric tensor entry `psi_ij`.
    pub fn ordered_amplitude(&self, i: usize, j: usize) -> C64 {
        let c = self.amps.get(&key(i, j)).copied().unwrap_or(ZERO);
        if i == j {
            c
        } else {
            c * std::f64::consts::FRAC_1_SQRT_2
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn weight(&self) -> f64 {
        self.norm_sqr()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("two-photon state has zero norm".into()));
        }
        let s = 1.0 / n.sqrt();
        Ok(TwoPhotonState {
            basis: Arc::clone(&self.basis),
            amps: self.amps.iter().map(|(k, v)| (*k, v * s)).collect(),
        })
    }

    pub fn inner(&self, other: &TwoPhotonState) -> Result<C64> {
        check_same(&self.basis, &other.basis)?;
        Ok(self
            .amps
            .iter()
            .filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b))
            .sum())
    }

    /// Keeps only the components where both photons sit on `path`
    /// (post-selection); the result is subnormalized.
    pub fn project_both_on(&self, path: Path) -> Self {
        let amps = self
            .amps
            .iter()
            .filter(|((i, j), _)| self.basis.mode(*i).path == path && self.basis.mode(*j).path == path)
            .map(|(k, v)| (*k, *v))
            .collect();
        TwoPhotonState {
            basis: Arc::clone(&self.basis),
            amps,
        }
    }

    /// Probability that both photons are found on `path`.
    pub fn both_on_weight(&self, path: Path) -> f64 {
        self.project_both_on(path).norm_sqr()
    }

    /// One-photon reduced operator `rho1 = psi psi^+` of the symmetric tensor,
    /// without forming the pair-space density. The trace equals the norm.
    pub fn reduced_density(&self) -> DensityOperator {
        let n = self.basis.len();
        let mut psi = DMatrix::from_element(n, n, ZERO);
        for &(i, j) in self.amps.keys() {
            psi[(i, j)] = self.ordered_amplitude(i, j);
            psi[(j, i)] = psi[(i, j)];
        }
        let matrix = &psi * psi.adjoint();
        DensityOperator {
            space: Space::Single(Arc::clone(&self.basis)),
            matrix,
        }
    }
}

/// Unordered pair basis `{(i, j) : i <= j}` over a mode basis.
#[derive(Debug, Clone)]
pub struct PairBasis {
    modes: Arc<ModeBasis>,
    pairs: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl PairBasis {
    pub fn new(modes: &Arc<ModeBasis>) -> Arc<PairBasis> {
        let n = modes.len();
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                pairs.push((i, j));
            }
        }
        let index = pairs.iter().enumerate().map(|(p, k)| (*k, p)).collect();
        Arc::new(PairBasis {
            modes: Arc::clone(modes),
            pairs,
            index,
        })
    }

    pub fn modes(&self) -> &Arc<ModeBasis> {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, p: usize) -> (usize, usize) {
        self.pairs[p]
    }

    pub fn index_of(&self, i: usize, j: usize) -> usize {
        self.index[&key(i, j)]
    }
}

/// Hilbert space a density operator lives on.
#[derive(Debug, Clone)]
pub enum Space {
    Single(Arc<ModeBasis>),
    Pair(Arc<PairBasis>),
    /// Internal OAM states of one path with polarization traced out.
    Oam {
        path: Path,
        oam: Vec<i32>,
    },
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Single(b) => b.len(),
            Space::Pair(p) => p.len(),
            Space::Oam { oam, .. } => oam.len(),
        }
    }

    fn same_as(&self, other: &Space) -> bool {
        match (self, other) {
            (Space::Single(a), Space::Single(b)) => same_basis(a, b),
            (Space::Pair(a), Space::Pair(b)) => Arc::ptr_eq(a, b) || same_basis(&a.modes, &b.modes),
            (Space::Oam { path: p1, oam: o1 }, Space::Oam { path: p2, oam: o2 }) => p1 == p2 && o1 == o2,
            _ => false,
        }
    }
}

/// Hermitian positive operator with trace equal to its recorded weight
/// (1 unless it results from a post-selection).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    space: Space,
    matrix: DMatrix<C64>,
}

/// States that have a rank-1 density operator.
pub trait PureState {
    fn pure_density(&self) -> DensityOperator;
}

impl PureState for PhotonState {
    fn pure_density(&self) -> DensityOperator {
        let n = self.amps.len();
        let matrix = DMatrix::from_fn(n, n, |r, c| self.amps[r] * self.amps[c].conj());
        DensityOperator {
            space: Space::Single(Arc::clone(&self.basis)),
            matrix,
        }
    }
}

impl PureState for TwoPhotonState {
    fn pure_density(&self) -> DensityOperator {
        let pb = PairBasis::new(&self.basis);
        let n = pb.len();
        let mut matrix = DMatrix::from_element(n, n, ZERO);
        let nz: Vec<(usize, C64)> = self.amps.iter().map(|((i, j), c)| (pb.index_of(*i, *j), *c)).collect();
        for &(r, a) in &nz {
            for &(c, b) in &nz {
                matrix[(r, c)] = a * b.conj();
            }
        }
        DensityOperator {
            space: Space::Pair(pb),
            matrix,
        }
    }
}

/// Rank-1 projector `|psi><psi|` (trace equals the state's weight).
pub fn pure_density<S: PureState>(psi: &S) -> DensityOperator {
    psi.pure_density()
}

/// Convex combination of density operators on the same space.
pub fn mix(states: &[(DensityOperator, f64)]) -> Result<DensityOperator> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidState("mixture of zero states".into()))?;
    let mut total = 0.0;
    for (rho, w) in states {
        if !(*w >= 0.0) {
            return Err(Error::InvalidState(format!("negative mixture weight {w}")));
        }
        if !rho.space.same_as(&first.0.space) {
            return Err(Error::BasisMismatch(
                "mixture components live on different spaces".into(),
            ));
        }
        total += w;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidState(format!("mixture weights sum to {total}, not 1")));
    }
    let mut matrix = DMatrix::from_element(first.0.dim(), first.0.dim(), ZERO);
    for (rho, w) in states {
        matrix += &rho.matrix * C64::from(*w);
    }
    Ok(DensityOperator {
        space: first.0.space.clone(),
        matrix,
    })
}

impl DensityOperator {
    /// Wraps a matrix after checking Hermiticity and positivity.
    pub fn from_matrix(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::BasisMismatch(format!(
                "matrix is {}x{}, space has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        let rho = DensityOperator { space, matrix };
        rho.check_physical()?;
        Ok(rho)
    }

    /// Maximally mixed state `I/d` on an OAM sector.
    pub fn maximally_mixed_oam(path: Path, oam: &[i32]) -> Self {
        let d = oam.len();
        DensityOperator {
            space: Space::Oam {
                path,
                oam: oam.to_vec(),
            },
            matrix: DMatrix::identity(d, d) * C64::from(1.0 / d as f64),
        }
    }

    /// Pure state on an OAM sector from its amplitudes.
    pub fn pure_oam(path: Path, oam: &[i32], amps: &[C64]) -> Result<Self> {
        if amps.len() != oam.len() {
            return Err(Error::BasisMismatch("amplitude count differs from sector size".into()));
        }
        let n = amps.len();
        let matrix = DMatrix::from_fn(n, n, |r, c| amps[r] * amps[c].conj());
        Ok(DensityOperator {
            space: Space::Oam {
                path,
                oam: oam.to_vec(),
            },
            matrix,
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Recorded weight; equals the trace.
    pub fn weight(&self) -> f64 {
        self.trace()
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::InvalidState("density operator has zero trace".into()));
        }
        Ok(DensityOperator {
            space: self.space.clone(),
            matrix: &self.matrix / C64::from(t),
        })
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Hermitian within 1e-12 and eigenvalues above -1e-10.
    pub fn check_physical(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > NORM_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {h:e})")));
        }
        let m = self.min_eigenvalue();
        if m < -PSD_TOL {
            return Err(Error::InvalidState(format!("not positive (eigenvalue {m:e})")));
        }
        Ok(())
    }

    /// `<psi|rho|psi>` for a single-photon state on the same basis.
    pub fn expectation(&self, psi: &PhotonState) -> Result<f64> {
        match &self.space {
            Space::Single(b) => check_same(b, &psi.basis)?,
            _ => {
                return Err(Error::BasisMismatch(
                    "expectation needs a single-photon operator".into(),
                ))
            }
        }
        Ok(quadratic_form(&self.matrix, &psi.amps))
    }

    /// `<v|rho|v>` for a raw amplitude vector in this operator's basis.
    pub fn expectation_vec(&self, v: &[C64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::BasisMismatch(
                "vector length differs from operator dimension".into(),
            ));
        }
        Ok(quadratic_form(&self.matrix, v))
    }

    /// Reduced one-photon operator of a two-photon pair-basis operator:
    /// `rho1[k, l] = sum_m rho_ordered[(k, m), (l, m)]`. The trace is kept.
    pub fn partial_trace_to_single(&self) -> Result<DensityOperator> {
        let pb = match &self.space {
            Space::Pair(pb) => pb,
            _ => {
                return Err(Error::BasisMismatch(
                    "partial trace needs a two-photon pair-basis operator".into(),
                ))
            }
        };
        let n = pb.modes.len();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let orderings = |(i, j): (usize, usize)| -> ([(usize, usize); 2], usize, f64) {
            if i == j {
                ([(i, i), (i, i)], 1, 1.0)
            } else {
                ([(i, j), (j, i)], 2, s)
            }
        };
        let mut out = DMatrix::from_element(n, n, ZERO);
        for p in 0..pb.len() {
            let (op, np, fp) = orderings(pb.pair(p));
            for q in 0..pb.len() {
                let v = self.matrix[(p, q)];
                if v == ZERO {
                    continue;
                }
                let (oq, nq, fq) = orderings(pb.pair(q));
                let v = v * (fp * fq);
                for &(k, m) in &op[..np] {
                    for &(l, m2) in &oq[..nq] {
                        if m == m2 {
                            out[(k, l)] += v;
                        }
                    }
                }
            }
        }
        Ok(DensityOperator {
            space: Space::Single(Arc::clone(&pb.modes)),
            matrix: out,
        })
    }

    /// Restricts a single-photon operator to `path` and the listed OAM values,
    /// tracing over polarization. Weight outside the sector is dropped, so the
    /// result is subnormalized when the photon can be elsewhere.
    pub fn trace_polarization(&self, path: Path, oam: &[i32]) -> Result<DensityOperator> {
        let basis = match &self.space {
            Space::Single(b) => b,
            _ => {
                return Err(Error::BasisMismatch(
                    "polarization trace needs a single-photon operator".into(),
                ))
            }
        };
        let d = oam.len();
        let mut out = DMatrix::from_element(d, d, ZERO);
        for pol in Pol::BOTH {
            let idx: Vec<usize> = oam
                .iter()
                .map(|&m| basis.require(&ModeIndex::new(path, pol, m)))
                .collect::<Result<_>>()?;
            for r in 0..d {
                for c in 0..d {
                    out[(r, c)] += self.matrix[(idx[r], idx[c])];
                }
            }
        }
        Ok(DensityOperator {
            space: Space::Oam {
                path,
                oam: oam.to_vec(),
            },
            matrix: out,
        })
    }
}

fn quadratic_form(m: &DMatrix<C64>, v: &[C64]) -> f64 {
    let mut acc = ZERO;
    for r in 0..v.len() {
        if v[r] == ZERO {
            continue;
        }
        let mut row = ZERO;
        for c in 0..v.len() {
            row += m[(r, c)] * v[c];
        }
        acc += v[r].conj() * row;
    }
    acc.re
}
