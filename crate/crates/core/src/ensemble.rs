//! Monte Carlo over interaction realizations.
//!
//! Every sample draws one field and runs the Hartree flow and the many-body
//! flow for each `N` against that same field, so `Y_N = |X - X_N|` is
//! evaluated pathwise.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hartree::{evolve_hartree, hartree_expectation, HartreeRunParams, NORM_TOLERANCE};
use crate::lattice::{LatticeGrid, WaveFunction};
use crate::manybody::{
    assemble_hamiltonian, build_fock_basis_with_cap, evolve_manybody_with,
    manybody_expectation_bounded, product_state_lift, FockBasis, PropagatorOptions,
    BOUND_TOLERANCE, DEFAULT_DIMENSION_CAP,
};
use crate::observable::{operator_norm, PObservable};
use crate::random_field::{derive_seed, sample_field, FieldSpec};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub grid: LatticeGrid,
    pub field_spec: FieldSpec,
    pub initial: WaveFunction,
    pub observable: PObservable,
    pub t_final: f64,
    pub dt: f64,
    pub particle_counts: Vec<usize>,
    pub samples: usize,
    pub base_seed: u64,
    pub dimension_cap: usize,
    pub propagator: PropagatorOptions,
}

impl ExperimentPlan {
    /// Plan with default dimension cap and propagator settings.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: LatticeGrid,
        field_spec: FieldSpec,
        initial: WaveFunction,
        observable: PObservable,
        t_final: f64,
        dt: f64,
        particle_counts: Vec<usize>,
        samples: usize,
        base_seed: u64,
    ) -> Result<Self> {
        let plan = ExperimentPlan {
            grid,
            field_spec,
            initial,
            observable,
            t_final,
            dt,
            particle_counts,
            samples,
            base_seed,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            propagator: PropagatorOptions::default(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.field_spec.validate(&self.grid)?;
        self.grid.check_same(self.initial.grid(), "initial state")?;
        self.grid.check_same(self.observable.grid(), "observable")?;
        self.initial.require_normalized(NORM_TOLERANCE)?;
        self.hartree_params()?;
        if !self.observable.is_self_adjoint(1e-12) {
            return Err(Error::Config("observable must be self-adjoint".into()));
        }
        if self.particle_counts.is_empty() {
            return Err(Error::Config("particle_counts must not be empty".into()));
        }
        if self.particle_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("particle_counts must be strictly ascending".into()));
        }
        let p = self.observable.p();
        if self.particle_counts[0] < p.max(1) {
            return Err(Error::Config(format!(
                "particle_counts must all be at least observable.p = {p}"
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        let largest = *self.particle_counts.last().unwrap();
        let dim = crate::manybody::sector_dimension(largest, self.grid.num_sites());
        if dim > self.dimension_cap as u128 {
            return Err(Error::Resource(format!(
                "particle_counts: Fock dimension for (N = {largest}, M = {}) exceeds the cap {}",
                self.grid.sites_per_axis(),
                self.dimension_cap
            )));
        }
        Ok(())
    }

    pub fn hartree_params(&self) -> Result<HartreeRunParams> {
        HartreeRunParams::new(self.grid, self.t_final, self.dt)
    }

    pub fn seed_for(&self, sample_index: usize) -> u64 {
        derive_seed(self.base_seed, sample_index as u64)
    }
}

/// Per-realization values.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub sample_index: usize,
    pub seed: u64,
    pub x_hartree: f64,
    pub x_manybody: BTreeMap<usize, f64>,
    pub y: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub particles: usize,
    pub mean_x_manybody: f64,
    pub mean_x_hartree: f64,
    pub mean_y: f64,
    /// Half-width `1.96 · sd / √S` with the unbiased sample deviation.
    pub ci95_y: f64,
    pub samples: usize,
}

/// A validated plan with the field-independent pieces precomputed.
#[derive(Clone, Debug)]
pub struct Ensemble {
    plan: ExperimentPlan,
    bases: Vec<Arc<FockBasis>>,
    observable_norm: f64,
    hartree: HartreeRunParams,
}

impl Ensemble {
    pub fn new(plan: ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let bases = plan
            .particle_counts
            .iter()
            .map(|&n| build_fock_basis_with_cap(n, &plan.grid, plan.dimension_cap))
            .collect::<Result<Vec<_>>>()?;
        let observable_norm = operator_norm(&plan.observable, &plan.grid)?;
        let hartree = plan.hartree_params()?;
        Ok(Ensemble {
            plan,
            bases,
            observable_norm,
            hartree,
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    /// `‖a‖` on the symmetric p-particle space.
    pub fn observable_norm(&self) -> f64 {
        self.observable_norm
    }

    pub fn run_sample(&self, sample_index: usize) -> Result<SampleResult> {
        let plan = &self.plan;
        if sample_index >= plan.samples {
            return Err(Error::Domain(format!(
                "sample index {sample_index} outside 0..{}",
                plan.samples
            )));
        }
        let annotate = |n: Option<usize>| move |e: Error| e.at_sample(sample_index, n);
        let seed = plan.seed_for(sample_index);
        let field = sample_field(&plan.field_spec, seed, &plan.grid).map_err(annotate(None))?;

        let psi_t = evolve_hartree(&plan.initial, &field, &self.hartree).map_err(annotate(None))?;
        let x_hartree = hartree_expectation(&psi_t, &plan.observable).map_err(annotate(None))?;
        if x_hartree.abs() > self.observable_norm + BOUND_TOLERANCE {
            return Err(Error::Consistency(format!(
                "|X| = {} exceeds ‖a‖ = {}",
                x_hartree.abs(),
                self.observable_norm
            ))
            .at_sample(sample_index, None));
        }

        let mut x_manybody = BTreeMap::new();
        let mut y = BTreeMap::new();
        for (&n, basis) in plan.particle_counts.iter().zip(&self.bases) {
            let value = (|| {
                let h = assemble_hamiltonian(&plan.grid, &field, n, basis)?;
                let psi0 = product_state_lift(&plan.initial, n, basis)?;
                let psi = evolve_manybody_with(&psi0, &h, plan.t_final, &plan.propagator)?;
                manybody_expectation_bounded(&psi, &plan.observable, self.observable_norm)
            })()
            .map_err(annotate(Some(n)))?;
            x_manybody.insert(n, value);
            y.insert(n, (x_hartree - value).abs());
        }
        Ok(SampleResult {
            sample_index,
            seed,
            x_hartree,
            x_manybody,
            y,
        })
    }

    /// All samples on a pool of `threads` workers (0 = available cores),
    /// returned in `sample_index` order.
    pub fn run(&self, threads: usize) -> Result<Vec<SampleResult>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
        let outcomes: Vec<Result<SampleResult>> = pool.install(|| {
            (0..self.plan.samples)
                .into_par_iter()
                .map(|i| self.run_sample(i))
                .collect()
        });
        outcomes.into_iter().collect()
    }
}

/// One sample of `plan`, computed from scratch.
pub fn run_sample(plan: &ExperimentPlan, sample_index: usize) -> Result<SampleResult> {
    Ensemble::new(plan.clone())?.run_sample(sample_index)
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let s = values.len() as f64;
    let mean = values.iter().sum::<f64>() / s;
    if values.len() < 2 || values.iter().all(|v| *v == values[0]) {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1.0);
    (mean, Z95 * var.sqrt() / s.sqrt())
}

fn sorted_results(results: &[SampleResult]) -> Result<Vec<&SampleResult>> {
    let first = results
        .first()
        .ok_or_else(|| Error::Domain("no sample results to aggregate".into()))?;
    let counts: Vec<usize> = first.x_manybody.keys().copied().collect();
    let mut sorted: Vec<&SampleResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.sample_index);
    if let Some(bad) = sorted
        .iter()
        .find(|r| !r.x_manybody.keys().copied().eq(counts.iter().copied()))
    {
        return Err(Error::Domain(format!(
            "sample {} has a different particle-count sweep",
            bad.sample_index
        )));
    }
    Ok(sorted)
}

/// Per-N sample means and 95% half-widths, folded in `sample_index` order.
pub fn estimate(results: &[SampleResult]) -> Result<Vec<SummaryRow>> {
    let sorted = sorted_results(results)?;
    let hartree: Vec<f64> = sorted.iter().map(|r| r.x_hartree).collect();
    let (mean_x_hartree, _) = mean_and_ci(&hartree);
    sorted[0]
        .x_manybody
        .keys()
        .map(|&n| {
            let xs: Vec<f64> = sorted.iter().map(|r| r.x_manybody[&n]).collect();
            let ys: Vec<f64> = sorted.iter().map(|r| r.y[&n]).collect();
            let (mean_x_manybody, _) = mean_and_ci(&xs);
            let (mean_y, ci95_y) = mean_and_ci(&ys);
            let gap = (mean_x_hartree - mean_x_manybody).abs();
            if gap > mean_y + 1e-12 {
                return Err(Error::Consistency(format!(
                    "triangle inequality fails at N = {n}: |E(X) - E(X_N)| = {gap} > E(Y_N) = {mean_y}"
                )));
            }
            Ok(SummaryRow {
                particles: n,
                mean_x_manybody,
                mean_x_hartree,
                mean_y,
                ci95_y,
                samples: sorted.len(),
            })
        })
        .collect()
}

/// Empirical tail expectations `E(|X| 1{|X| ≥ β})`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailDiagnostic {
    pub beta: f64,
    pub hartree: f64,
    pub manybody: BTreeMap<usize, f64>,
}

pub fn tail_diagnostic(results: &[SampleResult], beta: f64) -> Result<TailDiagnostic> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("β must be positive (got {beta})")));
    }
    let sorted = sorted_results(results)?;
    let s = sorted.len() as f64;
    let tail = |x: f64| if x.abs() >= beta { x.abs() } else { 0.0 };
    let hartree = sorted.iter().map(|r| tail(r.x_hartree)).sum::<f64>() / s;
    let manybody = sorted[0]
        .x_manybody
        .keys()
        .map(|&n| {
            let mean = sorted.iter().map(|r| tail(r.x_manybody[&n])).sum::<f64>() / s;
            (n, mean)
        })
        .collect();
    Ok(TailDiagnostic {
        beta,
        hartree,
        manybody,
    })
}

/// Least-squares slope of `ln mean_y` against `ln N`; `None` when fewer than
/// two rows or a nonpositive mean.
pub fn loglog_slope(rows: &[SummaryRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.mean_y > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.particles as f64).ln(), r.mean_y.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    fn synthetic(index: usize, xh: f64, xs: &[(usize, f64)]) -> SampleResult {
        SampleResult {
            sample_index: index,
            seed: index as u64,
            x_hartree: xh,
            x_manybody: xs.iter().copied().collect(),
            y: xs.iter().map(|&(n, x)| (n, (xh - x).abs())).collect(),
        }
    }

    fn small_plan(spec: FieldSpec, counts: Vec<usize>, samples: usize) -> ExperimentPlan {
        let grid = build_grid(1, 6, 6.0).unwrap();
        let phi = WaveFunction::gaussian_packet(grid, &[3.0], 1.0, 0.0).unwrap();
        let a = PObservable::condensate_projector(&phi, 1).unwrap();
        ExperimentPlan::new(grid, spec, phi, a, 0.3, 0.3 / 64.0, counts, samples, 11).unwrap()
    }

    #[test]
    fn statistics_match_direct_formula() {
        let results = vec![synthetic(1, 0.5, &[(2, 0.2)]), synthetic(0, 0.5, &[(2, 0.4)])];
        let rows = estimate(&results).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert!((r.mean_y - 0.2).abs() < 1e-15);
        // ys = {0.1, 0.3}: sd = 0.1·√2, half-width 1.96·sd/√2
        let ys = [0.3f64, 0.1];
        let m = (ys[0] + ys[1]) / 2.0;
        let sd = (((ys[0] - m).powi(2) + (ys[1] - m).powi(2)) / 1.0).sqrt();
        assert!((r.ci95_y - 1.96 * sd / 2f64.sqrt()).abs() < 1e-15);
        assert!((r.ci95_y - 0.196).abs() < 1e-12);
        assert!((r.mean_x_manybody - 0.3).abs() < 1e-15);
        assert_eq!(r.samples, 2);
    }

    #[test]
    fn identical_samples_have_zero_ci() {
        let results: Vec<_> = (0..5).map(|i| synthetic(i, 0.4, &[(1, 0.1), (3, 0.3)])).collect();
        for row in estimate(&results).unwrap() {
            assert_eq!(row.ci95_y, 0.0);
        }
    }

    #[test]
    fn empty_results_rejected() {
        assert!(matches!(estimate(&[]), Err(Error::Domain(_))));
        assert!(matches!(tail_diagnostic(&[], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn mismatched_sweeps_rejected() {
        let results = vec![synthetic(0, 0.5, &[(2, 0.2)]), synthetic(1, 0.5, &[(3, 0.2)])];
        assert!(matches!(estimate(&results), Err(Error::Domain(_))));
    }

    #[test]
    fn tail_diagnostic_limits() {
        let results = vec![
            synthetic(0, 0.9, &[(2, 0.2), (4, -0.7)]),
            synthetic(1, 0.1, &[(2, 0.6), (4, 0.3)]),
        ];
        let tiny = tail_diagnostic(&results, 1e-300).unwrap();
        assert!((tiny.hartree - 0.5).abs() < 1e-15);
        assert!((tiny.manybody[&2] - 0.4).abs() < 1e-15);
        assert!((tiny.manybody[&4] - 0.5).abs() < 1e-15);
        let big = tail_diagnostic(&results, 1.0).unwrap();
        assert_eq!(big.hartree, 0.0);
        assert!(big.manybody.values().all(|v| *v == 0.0));
        assert!(tail_diagnostic(&results, 0.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let rows: Vec<SummaryRow> = [2usize, 4, 8]
            .iter()
            .map(|&n| SummaryRow {
                particles: n,
                mean_x_manybody: 0.0,
                mean_x_hartree: 0.0,
                mean_y: 3.0 / n as f64,
                ci95_y: 0.0,
                samples: 1,
            })
            .collect();
        assert!((loglog_slope(&rows).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&rows[..1]), None);
    }

    #[test]
    fn plan_validation() {
        let grid = build_grid(1, 6, 6.0).unwrap();
        let phi = WaveFunction::gaussian_packet(grid, &[3.0], 1.0, 0.0).unwrap();
        let a = PObservable::condensate_projector(&phi, 2).unwrap();
        let mk = |counts: Vec<usize>| {
            ExperimentPlan::new(grid, FieldSpec::default(), phi.clone(), a.clone(), 0.3, 0.01, counts, 4, 0)
        };
        let err = mk(vec![4, 2]).unwrap_err();
        assert_eq!(err.to_string(), "configuration error: particle_counts must be strictly ascending");
        assert!(mk(vec![]).is_err());
        assert!(mk(vec![1, 2]).is_err());
        assert!(mk(vec![2, 3]).is_ok());
        assert!(matches!(mk(vec![2, 40]), Err(Error::Resource(_))));
    }

    #[test]
    fn deterministic_field_gives_identical_samples() {
        let spec = FieldSpec {
            base: "cosine(0.8, 1)".parse().unwrap(),
            mode_stddevs: vec![0.0],
            ..FieldSpec::default()
        };
        let ensemble = Ensemble::new(small_plan(spec, vec![1, 2, 3], 3)).unwrap();
        let results = ensemble.run(2).unwrap();
        for r in &results[1..] {
            assert_eq!(r.x_hartree, results[0].x_hartree);
            assert_eq!(r.x_manybody, results[0].x_manybody);
        }
        assert!(estimate(&results).unwrap().iter().all(|r| r.ci95_y == 0.0));
    }

    #[test]
    fn constant_field_is_exact() {
        let ensemble = Ensemble::new(small_plan(FieldSpec::constant(0.7), vec![1, 2, 3, 4], 2)).unwrap();
        for r in ensemble.run(1).unwrap() {
            assert!(r.y.values().all(|y| *y < 1e-8), "{:?}", r.y);
        }
    }

    #[test]
    fn sample_errors_are_annotated() {
        let ensemble = Ensemble::new(small_plan(FieldSpec::default(), vec![2], 2)).unwrap();
        assert!(matches!(ensemble.run_sample(2), Err(Error::Domain(_))));
        let mut plan = small_plan(FieldSpec::default(), vec![2], 1);
        plan.propagator = PropagatorOptions {
            max_substeps: 0,
            ..PropagatorOptions::krylov()
        };
        let err = run_sample(&plan, 0).unwrap_err();
        match err {
            Error::Sample {
                sample_index: 0,
                particles: Some(2),
                ..
            } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = FieldSpec {
            base: "gaussian_bump(1.0, 1.5)".parse().unwrap(),
            mode_stddevs: vec![0.5, 0.3],
            ..FieldSpec::default()
        };
        let ensemble = Ensemble::new(small_plan(spec, vec![2, 3], 6)).unwrap();
        let a = ensemble.run(1).unwrap();
        let b = ensemble.run(4).unwrap();
        assert_eq!(a, b);
        for (i, r) in a.iter().enumerate() {
            assert_eq!(r.sample_index, i);
        }
    }
}
