//! Random pair interactions `v(x, ω) = v₁(x) + v₂(x, ω)`.
//!
//! `v₁` is a deterministic profile; `v₂` is a finite Fourier sum with
//! independent standard-normal coefficients scaled by per-mode standard
//! deviations. A finite sum of bounded modes is bounded, so every realization
//! has a finite sup norm without clipping.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::LatticeGrid;

/// Deterministic part `v₁` of the interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseProfile {
    Zero,
    /// `amplitude · exp(-|x|^2 / (2 width^2))`, minimum-image distance from 0.
    GaussianBump { amplitude: f64, width: f64 },
    /// `amplitude · (1/d) Σ_a cos(2π mode x_a / L)`.
    Cosine { amplitude: f64, mode: u32 },
}

impl BaseProfile {
    fn validate(&self) -> Result<()> {
        match *self {
            BaseProfile::Zero => Ok(()),
            BaseProfile::GaussianBump { amplitude, width } => {
                if !amplitude.is_finite() || !(width.is_finite() && width > 0.0) {
                    return Err(Error::Config(format!(
                        "field.base: gaussian_bump needs finite amplitude and positive width (got {amplitude}, {width})"
                    )));
                }
                Ok(())
            }
            BaseProfile::Cosine { amplitude, .. } => {
                if !amplitude.is_finite() {
                    return Err(Error::Config("field.base: cosine amplitude must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value_at(&self, grid: &LatticeGrid, site: usize) -> f64 {
        match *self {
            BaseProfile::Zero => 0.0,
            BaseProfile::GaussianBump { amplitude, width } => {
                let r = grid.periodic_distance(site, &[0.0; 3]);
                amplitude * (-r * r / (2.0 * width * width)).exp()
            }
            BaseProfile::Cosine { amplitude, mode } => {
                let coords = grid.coordinates(site);
                let k = 2.0 * PI * mode as f64 / grid.box_length();
                let sum: f64 = coords[..grid.dim()].iter().map(|x| (k * x).cos()).sum();
                amplitude * sum / grid.dim() as f64
            }
        }
    }
}

impl fmt::Display for BaseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseProfile::Zero => write!(f, "zero"),
            BaseProfile::GaussianBump { amplitude, width } => {
                write!(f, "gaussian_bump({amplitude:?}, {width:?})")
            }
            BaseProfile::Cosine { amplitude, mode } => write!(f, "cosine({amplitude:?}, {mode})"),
        }
    }
}

impl FromStr for BaseProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::Config(format!(
                "field.base: cannot parse {s:?}; expected zero, gaussian_bump(amplitude, width) or cosine(amplitude, mode)"
            ))
        };
        if s == "zero" {
            return Ok(BaseProfile::Zero);
        }
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest
            .strip_suffix(')')
            .ok_or_else(bad)?
            .split(',')
            .map(str::trim)
            .collect();
        if args.len() != 2 {
            return Err(bad());
        }
        let amplitude: f64 = args[0].parse().map_err(|_| bad())?;
        let profile = match name.trim() {
            "gaussian_bump" => BaseProfile::GaussianBump {
                amplitude,
                width: args[1].parse().map_err(|_| bad())?,
            },
            "cosine" => BaseProfile::Cosine {
                amplitude,
                mode: args[1].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Distribution of the random interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub base: BaseProfile,
    pub gaussian_mean: f64,
    /// Standard deviations `σ_1 .. σ_K` of Fourier modes `k = 1..K`.
    pub mode_stddevs: Vec<f64>,
    pub enforce_even: bool,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            base: BaseProfile::Zero,
            gaussian_mean: 0.0,
            mode_stddevs: Vec::new(),
            enforce_even: true,
        }
    }
}

impl FieldSpec {
    /// Deterministic constant interaction `v ≡ value`.
    pub fn constant(value: f64) -> Self {
        FieldSpec {
            gaussian_mean: value,
            ..FieldSpec::default()
        }
    }

    pub fn max_mode(&self) -> usize {
        self.mode_stddevs.len()
    }

    pub fn validate(&self, grid: &LatticeGrid) -> Result<()> {
        self.base.validate()?;
        if !self.gaussian_mean.is_finite() {
            return Err(Error::Config("field.gaussian_mean must be finite".into()));
        }
        if let Some(bad) = self.mode_stddevs.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::Config(format!(
                "field.sigmas: mode standard deviations must be finite and nonnegative (got {bad})"
            )));
        }
        let m = grid.sites_per_axis();
        if 2 * self.max_mode() >= m {
            return Err(Error::Config(format!(
                "field.sigmas: highest mode K = {} must satisfy K < sites/2 = {} to avoid aliasing",
                self.max_mode(),
                m as f64 / 2.0
            )));
        }
        Ok(())
    }

    /// True when the field does not depend on the seed.
    pub fn is_deterministic(&self) -> bool {
        self.mode_stddevs.iter().all(|s| *s == 0.0)
    }
}

/// One realization `v(·, ω)` on the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomField {
    grid: LatticeGrid,
    values: Vec<f64>,
    seed: u64,
    spec: Option<FieldSpec>,
}

impl RandomField {
    /// Wrap tabulated values, e.g. a hand-built interaction.
    pub fn from_values(grid: LatticeGrid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len(), "field values")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field values must be finite".into()));
        }
        Ok(RandomField {
            grid,
            values,
            seed: 0,
            spec: None,
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> Option<&FieldSpec> {
        self.spec.as_ref()
    }

    pub fn is_even(&self) -> bool {
        (0..self.values.len()).all(|j| self.values[j] == self.values[self.grid.reflect(j)])
    }
}

/// Draw one realization. Coefficients `(A_k, B_k)` are taken in the order
/// `k = 1..K`, then axis, from a ChaCha8 stream keyed by `seed`.
pub fn sample_field(spec: &FieldSpec, seed: u64, grid: &LatticeGrid) -> Result<RandomField> {
    spec.validate(grid)?;
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = Vec::with_capacity(spec.max_mode() * dim);
    for &sigma in &spec.mode_stddevs {
        for _ in 0..dim {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            coefficients.push((sigma * a, sigma * b));
        }
    }

    let base_k = 2.0 * PI / grid.box_length();
    let raw: Vec<f64> = (0..grid.num_sites())
        .map(|site| {
            let coords = grid.coordinates(site);
            let mut v2 = spec.gaussian_mean;
            for (k_index, per_axis) in coefficients.chunks_exact(dim.max(1)).enumerate() {
                let k = (k_index + 1) as f64 * base_k;
                for (axis, &(a, b)) in per_axis.iter().enumerate() {
                    let phase = k * coords[axis];
                    v2 += a * phase.cos() + b * phase.sin();
                }
            }
            spec.base.value_at(grid, site) + v2
        })
        .collect();

    let values = if spec.enforce_even {
        (0..raw.len())
            .map(|j| 0.5 * (raw[j] + raw[grid.reflect(j)]))
            .collect()
    } else {
        raw
    };

    Ok(RandomField {
        grid: *grid,
        values,
        seed,
        spec: Some(spec.clone()),
    })
}

/// Sup norm `max_x |v(x)|` of a realization.
pub fn field_bound(field: &RandomField) -> f64 {
    field.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// SplitMix64 step.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index`, a fixed hash of `(base_seed, index)`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut state = base_seed ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    #[test]
    fn degenerate_spec_gives_zero() {
        let g = build_grid(1, 8, 8.0).unwrap();
        let f = sample_field(&FieldSpec::default(), 42, &g).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
        assert_eq!(field_bound(&f), 0.0);
    }

    #[test]
    fn cosine_base_without_noise() {
        let g = build_grid(1, 8, 8.0).unwrap();
        let spec = FieldSpec {
            base: "cosine(1.0, 1)".parse().unwrap(),
            mode_stddevs: vec![0.0, 0.0],
            ..FieldSpec::default()
        };
        let a = sample_field(&spec, 1, &g).unwrap();
        let b = sample_field(&spec, 999, &g).unwrap();
        assert_eq!(a.values(), b.values());
        for (j, v) in a.values().iter().enumerate() {
            assert!((v - (2.0 * PI * j as f64 / 8.0).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn cosine_bound() {
        let g = build_grid(1, 8, 8.0).unwrap();
        let spec = FieldSpec {
            base: BaseProfile::Cosine {
                amplitude: 2.0,
                mode: 1,
            },
            ..FieldSpec::default()
        };
        let f = sample_field(&spec, 0, &g).unwrap();
        assert_eq!(field_bound(&f), 2.0);
    }

    #[test]
    fn bound_is_max_abs() {
        let g = build_grid(2, 6, 4.0).unwrap();
        let spec = FieldSpec {
            base: "gaussian_bump(-1.0, 0.8)".parse().unwrap(),
            gaussian_mean: 0.2,
            mode_stddevs: vec![0.7, 0.4],
            enforce_even: false,
        };
        for seed in 0..20 {
            let f = sample_field(&spec, seed, &g).unwrap();
            let mut brute = 0.0;
            for v in f.values() {
                if v.abs() > brute {
                    brute = v.abs();
                }
            }
            assert_eq!(field_bound(&f), brute);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_even() {
        let g = build_grid(1, 10, 5.0).unwrap();
        let spec = FieldSpec {
            base: "gaussian_bump(1.0, 1.5)".parse().unwrap(),
            gaussian_mean: -0.3,
            mode_stddevs: vec![0.5, 0.3, 0.1],
            enforce_even: true,
        };
        for seed in [0, 1, u64::MAX] {
            let a = sample_field(&spec, seed, &g).unwrap();
            let b = sample_field(&spec, seed, &g).unwrap();
            assert_eq!(a, b);
            assert!(a.is_even());
        }
        let a = sample_field(&spec, 7, &g).unwrap();
        let b = sample_field(&spec, 8, &g).unwrap();
        assert_ne!(a.values(), b.values());
    }

    #[test]
    fn aliasing_rule() {
        let g = build_grid(1, 8, 8.0).unwrap();
        let spec = FieldSpec {
            mode_stddevs: vec![0.1; 4],
            ..FieldSpec::default()
        };
        let err = sample_field(&spec, 0, &g).unwrap_err();
        assert!(err.to_string().contains("K < sites/2"), "{err}");
        let spec = FieldSpec {
            mode_stddevs: vec![-0.1],
            ..FieldSpec::default()
        };
        assert!(matches!(sample_field(&spec, 0, &g), Err(Error::Config(_))));
    }

    #[test]
    fn base_profile_parsing() {
        assert_eq!("zero".parse::<BaseProfile>().unwrap(), BaseProfile::Zero);
        assert_eq!(
            " gaussian_bump(1, 1.5) ".parse::<BaseProfile>().unwrap(),
            BaseProfile::GaussianBump {
                amplitude: 1.0,
                width: 1.5
            }
        );
        for bad in ["gaussian_bump(1)", "cosine(1.0, x)", "bump(1,2)", "gaussian_bump(1, 0)"] {
            assert!(bad.parse::<BaseProfile>().is_err(), "{bad}");
        }
        for p in [
            BaseProfile::Zero,
            BaseProfile::Cosine {
                amplitude: 0.25,
                mode: 3,
            },
            BaseProfile::GaussianBump {
                amplitude: 1.0,
                width: 1.5,
            },
        ] {
            assert_eq!(p.to_string().parse::<BaseProfile>().unwrap(), p);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| derive_seed(5, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
        assert_ne!(derive_seed(5, 3), derive_seed(6, 3));
    }
}
