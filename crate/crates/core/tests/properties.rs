//! Randomized invariants: unitarity, norm preservation, exchange symmetry,
//! positivity and trace of every produced density operator.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use oamclone::cloning::{run_cloner_projector, stokes_vector, AncillaMode, Cloner, QubitSpec};
use oamclone::elements::{beam_splitter, half_wave_plate, q_plate, quarter_wave_plate, BsConvention, QPlateSpec};
use oamclone::experiment::{
    fidelity_from_counts, predicted_fidelity, rate_budget, ImperfectionModel, Interval, LossBudget,
};
use oamclone::fock::{mix, pure_density, ModeBasis, Path, PhotonState, TwoPhotonState};
use oamclone::interference::{coalescence_rates, temporal_overlap, SpectralProfile};
use proptest::prelude::*;

const CASES: u32 = 1000;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        ..ProptestConfig::default()
    }
}

fn amps(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let n = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
            v.into_iter().map(|(a, b)| C64::new(a / n, b / n)).collect()
        })
}

fn qubit() -> impl Strategy<Value = QubitSpec> {
    amps(2).prop_map(|v| QubitSpec::new(v[0], v[1]).unwrap())
}

fn small_basis() -> Arc<ModeBasis> {
    ModeBasis::build(&Path::ALL, &[-2, 2]).unwrap()
}

/// State supported on one input path.
fn on_path(basis: &Arc<ModeBasis>, path: Path, v: &[C64]) -> PhotonState {
    let mut full = vec![C64::new(0.0, 0.0); basis.len()];
    let mut k = 0;
    for (i, m) in basis.modes().iter().enumerate() {
        if m.path == path {
            full[i] = v[k];
            k += 1;
        }
    }
    PhotonState::unnormalized(basis, full)
}

fn dense_symmetrized(a: &PhotonState, b: &PhotonState) -> DMatrix<C64> {
    let n = a.basis().len();
    let va = a.amplitudes();
    let vb = b.amplitudes();
    let m = DMatrix::from_fn(n, n, |i, j| va[i] * vb[j] + vb[i] * va[j]);
    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    m / C64::from(norm)
}

fn hermitian_psd(m: &DMatrix<C64>) -> bool {
    let herm = (m - m.adjoint()).iter().all(|z| z.norm() < 1e-10);
    let ev = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    herm && ev.iter().all(|e| *e > -1e-10)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn waveplates_are_unitary(theta in -10.0f64..10.0) {
        let basis = small_basis();
        let hwp = half_wave_plate(theta, &basis, &[Path::A, Path::B]).unwrap();
        let qwp = quarter_wave_plate(theta, &basis, &[Path::A]).unwrap();
        prop_assert!(hwp.unitarity_error() < 1e-12);
        prop_assert!(qwp.unitarity_error() < 1e-12);
        prop_assert!(hwp.then(&qwp).unwrap().unitarity_error() < 1e-12);
    }

    #[test]
    fn q_plate_is_unitary_on_its_domain(charge2 in -3i32..=3, right in any::<bool>()) {
        prop_assume!(charge2 != 0);
        let spec = QPlateSpec {
            charge: charge2 as f64 / 2.0,
            efficiency: 1.0,
            handedness: if right { oamclone::elements::Handedness::RightGains } else { Default::default() },
        };
        let basis = ModeBasis::build(&[Path::A], &(-8..=8).collect::<Vec<_>>()).unwrap();
        let qp = q_plate(&spec, &basis, &[Path::A]).unwrap();
        prop_assert!(qp.unitarity_error() < 1e-12);
    }

    #[test]
    fn single_photon_norm_preserved(v in amps(4), flip in any::<bool>(), from_b in any::<bool>()) {
        let basis = small_basis();
        let bs = beam_splitter(&basis, BsConvention { flip_oam_on_reflection: flip }).unwrap();
        let psi = on_path(&basis, if from_b { Path::B } else { Path::A }, &v);
        let out = bs.apply(&psi).unwrap();
        prop_assert!((out.state.norm_sqr() - 1.0).abs() < 1e-12);
        let split = out.state.path_weight(Path::APrime);
        prop_assert!((split - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_photon_norm_preserved(va in amps(4), vb in amps(4), theta in 0.0f64..3.2) {
        let basis = small_basis();
        let a = on_path(&basis, Path::A, &va);
        let b = on_path(&basis, Path::B, &vb);
        let pair = TwoPhotonState::symmetrize_product(&a, &b).unwrap();
        let bs = beam_splitter(&basis, BsConvention::default()).unwrap();
        let hwp = half_wave_plate(theta, &basis, &[Path::APrime]).unwrap();
        let out = hwp.apply(&bs.apply(&pair).unwrap().state).unwrap().state;
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        let total: f64 = [Path::APrime, Path::BPrime].iter().map(|p| out.both_on_weight(*p)).sum();
        prop_assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn symmetrization_matches_dense_tensor(va in amps(16), vb in amps(16)) {
        let basis = small_basis();
        let a = PhotonState::unnormalized(&basis, va);
        let b = PhotonState::unnormalized(&basis, vb);
        let pair = TwoPhotonState::symmetrize_product(&a, &b).unwrap();
        let swapped = TwoPhotonState::symmetrize_product(&b, &a).unwrap();
        let dense = dense_symmetrized(&a, &b);
        for i in 0..16 {
            for j in 0..16 {
                prop_assert!((pair.ordered_amplitude(i, j) - dense[(i, j)]).norm() < 1e-12);
                prop_assert!((pair.ordered_amplitude(i, j) - pair.ordered_amplitude(j, i)).norm() < 1e-15);
                prop_assert!((swapped.ordered_amplitude(i, j) - pair.ordered_amplitude(i, j)).norm() < 1e-12);
            }
        }
        let overlap = a.inner(&b).unwrap().norm_sqr();
        let raw = TwoPhotonState::creation_product(&a, &b).norm_sqr();
        prop_assert!((raw - (1.0 + overlap)).abs() < 1e-12);
    }

    #[test]
    fn reduced_states_are_physical(va in amps(4), vb in amps(4)) {
        let basis = small_basis();
        let pair = TwoPhotonState::symmetrize_product(
            &on_path(&basis, Path::A, &va),
            &on_path(&basis, Path::B, &vb),
        ).unwrap();
        let out = beam_splitter(&basis, BsConvention::default()).unwrap().apply(&pair).unwrap().state;
        let rho2 = pure_density(&out);
        prop_assert!((rho2.trace() - 1.0).abs() < 1e-12);
        let rho1 = rho2.partial_trace_to_single().unwrap();
        prop_assert!((rho1.trace() - 1.0).abs() < 1e-12);
        prop_assert!(hermitian_psd(rho1.matrix()));
        let direct = out.reduced_density();
        prop_assert!((direct.matrix() - rho1.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn mixtures_stay_physical(va in amps(4), vb in amps(4), w in 0.0f64..1.0) {
        let basis = small_basis();
        let ra = pure_density(&on_path(&basis, Path::A, &va));
        let rb = pure_density(&on_path(&basis, Path::B, &vb));
        let m = mix(&[(ra, w), (rb, 1.0 - w)]).unwrap();
        prop_assert!((m.trace() - 1.0).abs() < 1e-12);
        prop_assert!(m.check_physical().is_ok());
    }

    #[test]
    fn projector_clone_is_optimal(q in qubit()) {
        let r = run_cloner_projector(&q).unwrap();
        prop_assert!((r.fidelity - 5.0 / 6.0).abs() < 1e-10);
        prop_assert!((r.success_probability - 3.0 / 8.0).abs() < 1e-12);
        prop_assert!((r.clone_density.trace() - 1.0).abs() < 1e-12);
        prop_assert!(hermitian_psd(r.clone_density.matrix()));
        let s = stokes_vector(&r.clone_density).unwrap();
        for (x, b) in s.iter().zip(r.input_bloch) {
            prop_assert!((x - 2.0 / 3.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn coalescence_between_one_and_two(va in amps(4), vb in amps(4), delay in -500.0f64..500.0) {
        let basis = small_basis();
        let a = on_path(&basis, Path::A, &va);
        let b = on_path(&basis, Path::B, &vb);
        let bs = beam_splitter(&basis, BsConvention::default()).unwrap();
        let rates = coalescence_rates(&a, &b, &bs).unwrap();
        prop_assert!((rates.distinguishable - 0.25).abs() < 1e-12);
        let v = temporal_overlap(delay, &SpectralProfile::default());
        let r = rates.at_overlap(v) / rates.distinguishable;
        prop_assert!((1.0 - 1e-12..=2.0 + 1e-12).contains(&r));
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn predicted_fidelity_monotone(f in 0.5f64..1.0, r in 1.0f64..2.0, df in 0.0f64..0.5, dr in 0.0f64..1.0) {
        let base = predicted_fidelity(&ImperfectionModel { f_prep: f, enhancement: r });
        let f2 = (f + df).min(1.0);
        let r2 = (r + dr).min(2.0);
        let more_f = predicted_fidelity(&ImperfectionModel { f_prep: f2, enhancement: r });
        let more_r = predicted_fidelity(&ImperfectionModel { f_prep: f, enhancement: r2 });
        prop_assert!(more_f >= base - 1e-15);
        prop_assert!(more_r >= base - 1e-15);
        prop_assert!((0.5..=5.0 / 6.0 + 1e-15).contains(&base));
    }

    #[test]
    fn rate_interval_is_endpoint_product(
        c in 1.0f64..1e5, eta in 0.0f64..1.0, ts in 0.0f64..1.0,
        lo in 0.0f64..0.5, width in 0.0f64..0.5, pc in 0.0f64..1.0, split in 0.0f64..1.0,
    ) {
        let b = LossBudget {
            c_source: c,
            qplate_efficiency: eta,
            transferrer_success: ts,
            fiber_coupling: Interval::new(lo, lo + width),
            p_clon: pc,
            split_factor: split,
        };
        let r = rate_budget(&b).unwrap();
        let p_prep = eta * ts;
        let at = |fc: f64| c * p_prep * p_prep * pc * (p_prep * fc) * (p_prep * fc) * split;
        prop_assert!((r.min - at(lo)).abs() <= 1e-12 * (1.0 + at(lo)));
        prop_assert!((r.max - at(lo + width)).abs() <= 1e-12 * (1.0 + at(lo + width)));
        prop_assert!(r.min <= r.max);
    }

    #[test]
    fn fidelity_from_exact_counts(n in 1u64..100_000, k in 0u64..1000) {
        let c1 = (k * n) / 1000;
        let f = fidelity_from_counts(c1, n - c1).unwrap();
        prop_assert_eq!(f.fidelity, c1 as f64 / n as f64);
        prop_assert!(f.sigma >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: CASES, ..ProptestConfig::default() })]

    #[test]
    fn full_clone_route_is_universal(q in qubit()) {
        thread_local! {
            static CLONER: Cloner = Cloner::new().unwrap();
        }
        let r = CLONER.with(|c| c.run_full(&q, AncillaMode::Exact)).unwrap();
        prop_assert!((r.fidelity - 5.0 / 6.0).abs() < 1e-10);
        prop_assert!((r.success_probability - 3.0 / 8.0).abs() < 1e-12);
        prop_assert!(r.clone_density.check_physical().is_ok());
    }
}

#[test]
fn qudit_fidelity_is_input_independent() {
    use oamclone::qudit::{qudit_clone, QuditSpec};
    use oamclone::sampling::seeded_rng;
    let mut rng = seeded_rng(21);
    for d in 2..=5 {
        let f: Vec<f64> = (0..100)
            .map(|_| qudit_clone(&QuditSpec::haar(d, &mut rng).unwrap()).unwrap().fidelity)
            .collect();
        let mean = f.iter().sum::<f64>() / 100.0;
        let sd = (f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 100.0).sqrt();
        assert!(sd < 1e-10, "d={d} sd={sd}");
    }
}
