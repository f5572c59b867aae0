//! Imperfections, loss budget and photon counting.
//!
//! A clone is scored by projecting it on the input (detector `D1`, count
//! `C1`) and on its orthogonal state (`D2`, count `C2`), each in coincidence
//! with the trigger. The two streams are independent Poisson draws.

use serde::{Deserialize, Serialize};

use crate::cloning::{sample_stokes, vector_length, AncillaMode, Cloner, QubitSpec, O2, TABLE_ONE_STATES};
use crate::error::{Error, Result};
use crate::fock::{mix, pure_density, DensityOperator, Path};
use crate::sampling::{poisson, seeded_rng, SimRng};

/// Preparation fidelity and measured HOM enhancement.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImperfectionModel {
    pub f_prep: f64,
    pub enhancement: f64,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        ImperfectionModel {
            f_prep: 0.96,
            enhancement: 1.97,
        }
    }
}

impl ImperfectionModel {
    pub fn ideal() -> Self {
        ImperfectionModel {
            f_prep: 1.0,
            enhancement: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.f_prep) {
            return Err(Error::Config(format!(
                "imperfection.f_prep = {} is outside [0.5, 1]",
                self.f_prep
            )));
        }
        if !(1.0..=2.0).contains(&self.enhancement) {
            return Err(Error::Config(format!(
                "imperfection.enhancement = {} is outside [1, 2]",
                self.enhancement
            )));
        }
        Ok(())
    }
}

/// `(F_prep R + 1/2) / (R + 1)`.
pub fn predicted_fidelity(model: &ImperfectionModel) -> f64 {
    (model.f_prep * model.enhancement + 0.5) / (model.enhancement + 1.0)
}

/// Clone fidelity from an explicit state-level model: the input is prepared
/// as `F_prep |phi><phi| + (1 - F_prep) |phi_perp><phi_perp|`, and the pair is
/// indistinguishable with probability `R - 1`. Distinguishable pairs reach
/// `a'` independently and either photon is kept as the clone.
pub fn microscopic_fidelity(cloner: &Cloner, input: &QubitSpec, model: &ImperfectionModel) -> Result<f64> {
    model.validate()?;
    let x = model.enhancement - 1.0;
    let perp = input.orthogonal();

    let good = cloner.run_full(input, AncillaMode::Exact)?;
    let bad = cloner.run_full(&perp, AncillaMode::Exact)?;
    let scaled = |r: &crate::cloning::CloneResult| -> DensityOperator {
        let m = r.clone_density.matrix() * crate::fock::C64::from(r.success_probability);
        DensityOperator::from_matrix(r.clone_density.space().clone(), m).expect("scaled clone is physical")
    };
    let indist = mix(&[(scaled(&good), model.f_prep), (scaled(&bad), 1.0 - model.f_prep)])?;

    // One photon through the beam splitter, kept on a'.
    let single = |path: Path, q: &QubitSpec| -> Result<DensityOperator> {
        let out = cloner.beam_splitter().apply(&cloner.prepare(path, q)?)?;
        pure_density(&out.state).trace_polarization(Path::APrime, &O2)
    };
    let a = mix(&[
        (single(Path::A, input)?, model.f_prep),
        (single(Path::A, &perp)?, 1.0 - model.f_prep),
    ])?;
    let b = mix(&[
        (single(Path::B, &QubitSpec::named("+2")?)?, 0.5),
        (single(Path::B, &QubitSpec::named("-2")?)?, 0.5),
    ])?;
    // Both in a' with probability w_a w_b; the kept photon is either one.
    let (wa, wb) = (a.trace(), b.trace());
    let dist = mix(&[(a.normalized()?, 0.5), (b.normalized()?, 0.5)])?;
    let dist_rate = wa * wb;

    let target = input.amplitudes();
    let num = x * indist.expectation_vec(&target)? + (1.0 - x) * dist_rate * dist.expectation_vec(&target)?;
    let den = x * indist.trace() + (1.0 - x) * dist_rate;
    Ok(num / den)
}

/// Closed interval.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    pub fn point(v: f64) -> Self {
        Interval { min: v, max: v }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.min <= other.min && other.max <= self.max
    }

    fn scale(&self, k: f64) -> Interval {
        Interval {
            min: self.min * k,
            max: self.max * k,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossBudget {
    /// Trigger-conditioned photon pairs per second.
    pub c_source: f64,
    pub qplate_efficiency: f64,
    pub transferrer_success: f64,
    pub fiber_coupling: Interval,
    pub p_clon: f64,
    pub split_factor: f64,
}

impl Default for LossBudget {
    fn default() -> Self {
        LossBudget {
            c_source: 5000.0,
            qplate_efficiency: 0.80,
            transferrer_success: 0.5,
            fiber_coupling: Interval::new(0.15, 0.25),
            p_clon: 3.0 / 8.0,
            split_factor: 0.5,
        }
    }
}

impl LossBudget {
    pub fn lossless() -> Self {
        LossBudget {
            qplate_efficiency: 1.0,
            transferrer_success: 1.0,
            fiber_coupling: Interval::point(1.0),
            ..LossBudget::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_source >= 0.0 && self.c_source.is_finite()) {
            return Err(Error::Config(format!(
                "budget.c_source = {} must be finite and >= 0",
                self.c_source
            )));
        }
        let probs = [
            ("budget.qplate_efficiency", self.qplate_efficiency),
            ("budget.transferrer_success", self.transferrer_success),
            ("budget.fiber_coupling.min", self.fiber_coupling.min),
            ("budget.fiber_coupling.max", self.fiber_coupling.max),
            ("budget.p_clon", self.p_clon),
            ("budget.split_factor", self.split_factor),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.fiber_coupling.min > self.fiber_coupling.max {
            return Err(Error::Config("budget.fiber_coupling.min exceeds max".into()));
        }
        Ok(())
    }

    pub fn p_prep(&self) -> f64 {
        self.qplate_efficiency * self.transferrer_success
    }

    pub fn p_det(&self) -> Interval {
        self.fiber_coupling.scale(self.p_prep())
    }

    /// `C_source p_prep^2 p_clon p_det^2 split` at one coupling value.
    pub fn rate_at(&self, fiber_coupling: f64) -> f64 {
        let p_det = self.p_prep() * fiber_coupling;
        self.c_source * self.p_prep().powi(2) * self.p_clon * p_det * p_det * self.split_factor
    }

    /// Rate at the middle of the coupling interval.
    pub fn point_rate(&self) -> f64 {
        self.rate_at(self.fiber_coupling.mid())
    }
}

/// Expected coincidence rate interval in Hz.
pub fn rate_budget(budget: &LossBudget) -> Result<Interval> {
    budget.validate()?;
    Ok(Interval::new(
        budget.rate_at(budget.fiber_coupling.min),
        budget.rate_at(budget.fiber_coupling.max),
    ))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FidelityEstimate {
    pub fidelity: f64,
    pub sigma: f64,
    /// Set when all counts fall on one detector, so `sigma` is zero.
    pub degenerate: bool,
}

/// `C1 / (C1 + C2)` with standard error `sqrt(F (1 - F) / C_tot)`.
pub fn fidelity_from_counts(c1: u64, c2: u64) -> Result<FidelityEstimate> {
    let total = c1 + c2;
    if total == 0 {
        return Err(Error::UndefinedEstimate("no counts recorded".into()));
    }
    let f = c1 as f64 / total as f64;
    Ok(FidelityEstimate {
        fidelity: f,
        sigma: (f * (1.0 - f) / total as f64).sqrt(),
        degenerate: c1 == 0 || c2 == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountRecord {
    pub c1: u64,
    pub c2: u64,
    pub duration: f64,
    /// `None` without counts.
    pub f_exp: Option<f64>,
    pub poisson_error: Option<f64>,
}

impl CountRecord {
    pub fn total(&self) -> u64 {
        self.c1 + self.c2
    }
}

/// Draws the two coincidence streams from a caller-owned generator.
pub fn simulate_counts_with(
    rng: &mut SimRng,
    model: &ImperfectionModel,
    budget: &LossBudget,
    duration: f64,
) -> Result<CountRecord> {
    model.validate()?;
    budget.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::Config(format!("duration = {duration} must be finite and >= 0")));
    }
    let f = predicted_fidelity(model);
    let mean = duration * budget.point_rate();
    let c1 = poisson(mean * f, rng);
    let c2 = poisson(mean * (1.0 - f), rng);
    let est = fidelity_from_counts(c1, c2).ok();
    Ok(CountRecord {
        c1,
        c2,
        duration,
        f_exp: est.map(|e| e.fidelity),
        poisson_error: est.map(|e| e.sigma),
    })
}

/// Count record for one input. The cloner is universal, so the input does
/// not change the means; it is validated and recorded by callers.
pub fn simulate_counts(
    _input: &QubitSpec,
    model: &ImperfectionModel,
    budget: &LossBudget,
    duration: f64,
    seed: u64,
) -> Result<CountRecord> {
    simulate_counts_with(&mut seeded_rng(seed), model, budget, duration)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub state_label: String,
    pub c1: u64,
    pub c2: u64,
    pub f_exp: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableOneReport {
    pub rows: Vec<TableRow>,
    pub mean: f64,
    /// Standard error of the mean from the per-state errors.
    pub mean_sigma: f64,
    pub predicted: f64,
}

/// Counts for the six standard states from one generator.
pub fn table_one_run(
    model: &ImperfectionModel,
    budget: &LossBudget,
    duration: f64,
    seed: u64,
) -> Result<TableOneReport> {
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(TABLE_ONE_STATES.len());
    for label in TABLE_ONE_STATES {
        let rec = simulate_counts_with(&mut rng, model, budget, duration)?;
        let est = fidelity_from_counts(rec.c1, rec.c2)?;
        rows.push(TableRow {
            state_label: label.to_string(),
            c1: rec.c1,
            c2: rec.c2,
            f_exp: est.fidelity,
            sigma: est.sigma,
        });
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.f_exp).sum::<f64>() / n;
    let mean_sigma = rows.iter().map(|r| r.sigma * r.sigma).sum::<f64>().sqrt() / n;
    Ok(TableOneReport {
        rows,
        mean,
        mean_sigma,
        predicted: predicted_fidelity(model),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StokesSample {
    pub input: [f64; 3],
    pub ideal: [f64; 3],
    pub measured: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StokesReport {
    pub samples: Vec<StokesSample>,
    pub counts_per_axis: f64,
    pub mean_length: f64,
    pub ideal_length: f64,
}

/// Clones of the six standard states plus `n_random` Haar inputs, analyzed
/// along three axes with the expected counts of `duration` seconds each.
pub fn stokes_run(n_random: usize, budget: &LossBudget, duration: f64, seed: u64) -> Result<StokesReport> {
    budget.validate()?;
    let cloner = Cloner::new()?;
    let counts_per_axis = duration * budget.point_rate();
    let mut rng = seeded_rng(seed);
    let mut inputs: Vec<QubitSpec> = TABLE_ONE_STATES
        .iter()
        .map(|l| QubitSpec::named(l))
        .collect::<Result<_>>()?;
    for _ in 0..n_random {
        inputs.push(QubitSpec::haar(&mut rng));
    }
    let mut samples = Vec::with_capacity(inputs.len());
    for q in &inputs {
        let r = cloner.run_full(q, AncillaMode::Exact)?;
        let measured = sample_stokes(&r.stokes, counts_per_axis, &mut rng);
        samples.push(StokesSample {
            input: r.input_bloch,
            ideal: r.stokes,
            measured,
        });
    }
    let n = samples.len() as f64;
    Ok(StokesReport {
        mean_length: samples.iter().map(|s| vector_length(&s.measured)).sum::<f64>() / n,
        ideal_length: samples.iter().map(|s| vector_length(&s.ideal)).sum::<f64>() / n,
        samples,
        counts_per_axis,
    })
}
