//! Symmetrization cloning of a d-level photon.
//!
//! The ancilla is the equal mixture of an orthonormal basis whose first
//! element is the input itself. When the ancilla matches the input the pair
//! coalesces with twice the probability of the other `d - 1` cases, so after
//! post-selection the clone is `|phi>` with probability `2/(d+1)` and half
//! `|phi>` otherwise: `F = 1/2 + 1/(d+1)`.
//!
//! Labels are OAM values. With the reflection flip active the label set must
//! be closed under `m -> -m`; the abstract mode switches the flip off and
//! accepts any distinct integers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::elements::{beam_splitter, BsConvention};
use crate::error::{Error, Result};
use crate::fock::{pol_h, DensityOperator, ModeBasis, Path, PhotonState, TwoPhotonState, C64, NORM_TOL, ONE, ZERO};
use crate::sampling::haar_state;

/// Largest dimension the Fock channel accepts.
pub const QUDIT_CAPACITY: usize = 16;

/// Largest dimension of the dense oracle.
pub const ORACLE_CAPACITY: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct QuditSpec {
    amplitudes: Vec<C64>,
    labels: Vec<i32>,
    flip: bool,
}

impl QuditSpec {
    /// OAM labels `-(d-1), -(d-3), ..., d-1` with the reflection flip on.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let labels = symmetric_labels(amplitudes.len());
        Self::with_labels(amplitudes, labels, true)
    }

    /// Labels `0..d` with the reflection flip off.
    pub fn abstract_mode(amplitudes: Vec<C64>) -> Result<Self> {
        let labels = (0..amplitudes.len() as i32).collect();
        Self::with_labels(amplitudes, labels, false)
    }

    pub fn with_labels(amplitudes: Vec<C64>, labels: Vec<i32>, flip: bool) -> Result<Self> {
        let d = amplitudes.len();
        check_dimension(d, QUDIT_CAPACITY)?;
        if labels.len() != d {
            return Err(Error::Config(format!("{} labels given for d = {d}", labels.len())));
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != d {
            return Err(Error::Config("qudit labels must be distinct".into()));
        }
        if flip && labels.iter().any(|m| !labels.contains(&-m)) {
            return Err(Error::Config(
                "label set is not closed under m -> -m; use the abstract mode".into(),
            ));
        }
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("qudit amplitudes have norm^2 {n}")));
        }
        Ok(QuditSpec {
            amplitudes,
            labels,
            flip,
        })
    }

    /// Normalizes before validating.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState("qudit amplitudes are zero".into()));
        }
        Self::new(amplitudes.into_iter().map(|a| a / n).collect())
    }

    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::Config(format!("basis index {k} out of range for d = {d}")));
        }
        let mut v = vec![ZERO; d];
        v[k] = ONE;
        Self::new(v)
    }

    pub fn haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        check_dimension(d, QUDIT_CAPACITY)?;
        Self::new(haar_state(d, rng))
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn flip(&self) -> bool {
        self.flip
    }

    /// Amplitudes after the reflection relabeling (identity when the flip is off).
    pub fn reflect(&self, v: &[C64]) -> Vec<C64> {
        if !self.flip {
            return v.to_vec();
        }
        self.labels
            .iter()
            .map(|m| {
                let src = self.labels.iter().position(|x| x == &-m).expect("closed label set");
                v[src]
            })
            .collect()
    }
}

pub fn symmetric_labels(d: usize) -> Vec<i32> {
    let d = d as i32;
    (0..d).map(|k| 2 * k - (d - 1)).collect()
}

fn check_dimension(d: usize, cap: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::Config("qudit dimension must be at least 1".into()));
    }
    if d > cap {
        return Err(Error::Config(format!("qudit dimension {d} exceeds capacity {cap}")));
    }
    Ok(())
}

/// Orthonormal basis with `phi` first, completed by Gram-Schmidt over the
/// standard vectors in index order.
pub fn complete_basis(phi: &[C64]) -> Vec<Vec<C64>> {
    let d = phi.len();
    let mut out: Vec<Vec<C64>> = vec![phi.to_vec()];
    for pivot in 0..d {
        if out.len() == d {
            break;
        }
        let mut v = vec![ZERO; d];
        v[pivot] = ONE;
        for u in &out {
            let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= proj * y;
            }
        }
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        // A pivot already in the span leaves only rounding noise.
        if n > 1e-8 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct QuditClone {
    pub fidelity: f64,
    /// Both output ports.
    pub success_prob: f64,
    /// Clone on `a'`, normalized, over the input's labels.
    pub clone_density: DensityOperator,
    /// `[a', b']`.
    pub port_probabilities: [f64; 2],
    /// `[a', b']`; the `b'` clone is compared with the reflected input.
    pub port_fidelities: [f64; 2],
}

/// Runs the Fock-space channel.
pub fn qudit_clone(spec: &QuditSpec) -> Result<QuditClone> {
    let d = spec.dimension();
    check_dimension(d, QUDIT_CAPACITY)?;
    let basis = ModeBasis::build(&Path::ALL, &spec.labels)?;
    let bs = beam_splitter(
        &basis,
        BsConvention {
            flip_oam_on_reflection: spec.flip,
        },
    )?;
    let photon = |path: Path, v: &[C64]| -> Result<PhotonState> {
        let terms: Vec<(i32, C64)> = spec.labels.iter().copied().zip(v.iter().copied()).collect();
        PhotonState::product(&basis, path, pol_h(), &terms)
    };
    let a = photon(Path::A, &spec.amplitudes)?;
    let ports = [Path::APrime, Path::BPrime];
    let mut sums: [Option<DensityOperator>; 2] = [None, None];
    for chi in complete_basis(&spec.amplitudes) {
        // Prepared so that it arrives at the output as chi.
        let b = photon(Path::B, &spec.reflect(&chi))?;
        let out = bs.apply(&TwoPhotonState::symmetrize_product(&a, &b)?)?.state;
        for (slot, port) in sums.iter_mut().zip(ports) {
            let rho = out
                .project_both_on(port)
                .reduced_density()
                .trace_polarization(port, &spec.labels)?;
            *slot = Some(match slot.take() {
                None => rho,
                Some(acc) => add(&acc, &rho)?,
            });
        }
    }
    let w = 1.0 / d as f64;
    let targets = [spec.amplitudes.clone(), spec.reflect(&spec.amplitudes)];
    let mut probs = [0.0; 2];
    let mut fids = [0.0; 2];
    let mut clones = Vec::with_capacity(2);
    for k in 0..2 {
        let sector = sums[k].take().expect("at least one ancilla state");
        probs[k] = sector.trace() * w;
        let clone = sector.normalized()?;
        fids[k] = clone.expectation_vec(&targets[k])?;
        clones.push(clone);
    }
    Ok(QuditClone {
        fidelity: fids[0],
        success_prob: probs[0] + probs[1],
        clone_density: clones.swap_remove(0),
        port_probabilities: probs,
        port_fidelities: fids,
    })
}

fn add(x: &DensityOperator, y: &DensityOperator) -> Result<DensityOperator> {
    let space = x.space().clone();
    let sum = x.matrix() + y.matrix();
    DensityOperator::from_matrix(space, sum)
}

/// `(1/2 + 1/(d+1), (d+1)/(2d))`.
pub fn qudit_formula(d: usize) -> Result<(f64, f64)> {
    if d < 1 {
        return Err(Error::Config("qudit dimension must be at least 1".into()));
    }
    let d = d as f64;
    Ok((0.5 + 1.0 / (d + 1.0), (d + 1.0) / (2.0 * d)))
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub fidelity: f64,
    pub success_prob: f64,
    /// Probability of each ancilla case given coalescence into `a'`.
    pub case_probabilities: Vec<f64>,
    /// Clone fidelity within each case.
    pub case_fidelities: Vec<f64>,
}

/// Dense first-quantized computation over `(port x label)^2`, with the
/// ancilla basis completed by a Householder reflection.
pub fn brute_force_oracle(spec: &QuditSpec) -> Result<OracleResult> {
    let d = spec.dimension();
    check_dimension(d, ORACLE_CAPACITY)?;
    let n = 2 * d;
    let phi = DVector::from_column_slice(&spec.amplitudes);

    // Reflection relabeling as a permutation matrix.
    let mut flip = DMatrix::<C64>::zeros(d, d);
    for (r, m) in spec.labels.iter().enumerate() {
        let c = if spec.flip {
            spec.labels.iter().position(|x| *x == -m).expect("closed label set")
        } else {
            r
        };
        flip[(r, c)] = ONE;
    }
    // Single photon: index port * d + label; input ports (a, b), output (a', b').
    let t = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let r = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    let mut u = DMatrix::<C64>::zeros(n, n);
    for i in 0..d {
        u[(i, i)] = t;
        u[(d + i, d + i)] = t;
        for j in 0..d {
            u[(d + i, j)] = r * flip[(i, j)];
            u[(i, d + j)] = r * flip[(i, j)];
        }
    }
    let uu = u.kronecker(&u);

    let householder = householder_basis(&phi);
    let on_port = |v: &DVector<C64>, port: usize| -> DVector<C64> {
        let mut out = DVector::zeros(n);
        out.rows_mut(port * d, d).copy_from(v);
        out
    };
    let sym = |x: &DVector<C64>, y: &DVector<C64>| -> DVector<C64> {
        (x.kronecker(y) + y.kronecker(x)) / C64::from((2.0 + 2.0 * x.dotc(y).norm_sqr()).sqrt())
    };

    let mut case_p = Vec::with_capacity(d);
    let mut case_f = Vec::with_capacity(d);
    let mut both_ports = 0.0;
    for k in 0..d {
        let chi = householder.column(k).into_owned();
        let b_in = &flip.adjoint() * &chi;
        let psi = &uu * sym(&on_port(&phi, 0), &on_port(&b_in, 1));
        let mut port_weights = [0.0; 2];
        let mut reduced_a = DMatrix::<C64>::zeros(d, d);
        for port in 0..2 {
            // psi restricted to both photons on `port`, as a d x d tensor.
            let block = DMatrix::from_fn(d, d, |i, j| psi[(port * d + i) * n + port * d + j]);
            port_weights[port] = block.iter().map(|z| z.norm_sqr()).sum();
            if port == 0 {
                reduced_a = &block * block.adjoint();
            }
        }
        both_ports += (port_weights[0] + port_weights[1]) / d as f64;
        let fid = (phi.adjoint() * &reduced_a * &phi)[(0, 0)].re / port_weights[0];
        case_p.push(port_weights[0]);
        case_f.push(fid);
    }
    let total: f64 = case_p.iter().sum();
    let fidelity = case_p.iter().zip(&case_f).map(|(p, f)| p * f).sum::<f64>() / total;
    Ok(OracleResult {
        fidelity,
        success_prob: both_ports,
        case_probabilities: case_p.iter().map(|p| p / total).collect(),
        case_fidelities: case_f,
    })
}

/// Columns of `H = I - 2 w w^+ / |w|^2` with `H e_0 = phi` up to a phase,
/// rephased so the first column equals `phi`.
fn householder_basis(phi: &DVector<C64>) -> DMatrix<C64> {
    let d = phi.len();
    let phase = if phi[0].norm() > 0.0 {
        phi[0] / phi[0].norm()
    } else {
        ONE
    };
    let mut e0 = DVector::<C64>::zeros(d);
    e0[0] = phase;
    let w = &e0 - phi;
    let wn = w.norm_squared();
    let mut h = DMatrix::<C64>::identity(d, d);
    if wn > 1e-24 {
        h -= &w * w.adjoint() * C64::from(2.0 / wn);
    }
    // H e0' = phi, with e0' = phase * e_0.
    let mut basis = h;
    let first = basis.column(0) * phase;
    basis.set_column(0, &first);
    basis
}

/// Spectrum of a clone density, descending.
pub fn clone_spectrum(clone: &QuditClone) -> Vec<f64> {
    let mut ev = clone.clone_density.eigenvalues();
    ev.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    ev
}
