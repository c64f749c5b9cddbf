//! Analytic multiply-accumulate and parameter accounting.
//!
//! MACs count weight-matrix multiply-accumulates only; biases, sine
//! evaluations and upsampling copies are excluded. For the plain backbone the
//! per-sample cost is `sum_i d_{i-1} d_i`. For the multi-resolution model,
//! layer `i` runs once per cell of its coarse lattice and each modulator once
//! per entry of its level lattice, so the total amortizes across the grid.

use thiserror::Error;

use crate::coords::PartitionScheme;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("inconsistent config: {0}")]
    InconsistentConfig(String),
}

/// One accounted unit of work: a layer or a modulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacEntry {
    pub label: String,
    /// Grid points the unit is evaluated at.
    pub points: usize,
    pub macs: u64,
}

/// Per-layer and per-sample multiply-accumulate and parameter counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MacReport {
    pub entries: Vec<MacEntry>,
    pub total_macs: u64,
    /// Samples the total is amortized over.
    pub total_points: usize,
    pub params: usize,
}

impl MacReport {
    pub fn per_sample(&self) -> f64 {
        self.total_macs as f64 / self.total_points as f64
    }

    /// Per-sample MACs in K units, rounded to 3 significant figures, as the
    /// cost tables report them.
    pub fn per_sample_kilo(&self) -> f64 {
        round_3sf(self.per_sample() / 1000.0)
    }
}

fn round_3sf(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    let mag = v.abs().log10().floor();
    let scale = 10f64.powf(2.0 - mag);
    (v * scale).round() / scale
}

fn siren_params(widths: &[usize]) -> usize {
    widths
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

/// Cost of a plain sinusoidal MLP evaluated independently at every sample.
pub fn mac_siren(widths: &[usize], n_samples: usize) -> MacReport {
    let mut entries = Vec::new();
    let mut total = 0u64;
    for (i, w) in widths.windows(2).enumerate() {
        let macs = (n_samples * w[0] * w[1]) as u64;
        total += macs;
        entries.push(MacEntry {
            label: format!("layer{}", i + 1),
            points: n_samples,
            macs,
        });
    }
    MacReport {
        entries,
        total_macs: total,
        total_points: n_samples,
        params: siren_params(widths),
    }
}

/// Cost of the activation-sharing forward over the full grid of `scheme`.
/// The layer-`i` matrix multiply runs on the activation lattice it receives:
/// the cumulative lattice of level `i-1` (so layer 1 runs at the level-0
/// lattice and the final layer at full resolution). Modulator `i` runs on
/// the level-`i` lattice.
pub fn mac_asmr(widths: &[usize], scheme: &PartitionScheme) -> Result<MacReport, ProfileError> {
    let layers = widths.len() - 1;
    if layers != scheme.levels() {
        return Err(ProfileError::InconsistentConfig(format!(
            "{layers} layers vs {} levels",
            scheme.levels()
        )));
    }
    if widths[0] != scheme.dim() {
        return Err(ProfileError::InconsistentConfig(format!(
            "input width {} vs data dimension {}",
            widths[0],
            scheme.dim()
        )));
    }
    let d = scheme.dim();
    let mut entries = Vec::new();
    let mut total = 0u64;
    for i in 1..=layers {
        let points: usize = scheme.level_cumulative(i - 1).iter().product();
        let macs = (points * widths[i - 1] * widths[i]) as u64;
        total += macs;
        entries.push(MacEntry {
            label: format!("layer{i}"),
            points,
            macs,
        });
    }
    for i in 1..layers {
        let points: usize = scheme.level_bases(i).iter().product();
        let macs = (points * d * widths[i]) as u64;
        total += macs;
        entries.push(MacEntry {
            label: format!("modulator{i}"),
            points,
            macs,
        });
    }
    let mod_params: usize = (1..layers).map(|i| d * widths[i]).sum();
    Ok(MacReport {
        entries,
        total_macs: total,
        total_points: scheme.total_points(),
        params: siren_params(widths) + mod_params,
    })
}

/// Result of checking the geometric-sum bound for a uniform 1-D config.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub per_sample: f64,
    /// `2 M` where `M` is the single-hidden-layer MAC `width^2`.
    pub bound: f64,
    pub holds: bool,
}

/// Uniform-base 1-D case of the depth-decoupling bound. With uniform width
/// `w` every layer costs `M = w^2` per lattice point, and layer `i` of `L`
/// produces the level-`i` lattice of `B^i` points, so the total is
/// `sum_{i=1..L} B^i M` over `N = B^L` samples. Since the geometric sum is at
/// most `2 B^L` for `B >= 2`, the per-sample cost never exceeds `2 M`
/// regardless of depth.
pub fn mac_bound_check(width: usize, base: usize, levels: usize) -> BoundCheck {
    assert!(base >= 2 && levels >= 2);
    let m = (width * width) as f64;
    let mut total = 0.0;
    let mut lattice = 1.0;
    for _ in 0..levels {
        lattice *= base as f64;
        total += lattice * m;
    }
    let per_sample = total / lattice;
    let bound = 2.0 * m;
    BoundCheck {
        per_sample,
        bound,
        holds: per_sample <= bound,
    }
}

/// One row of a depth sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub levels: usize,
    pub bases: Vec<usize>,
    pub asmr_params: usize,
    pub asmr_per_sample: f64,
    pub siren_params: usize,
    pub siren_per_sample: f64,
}

/// Sweeps network depth at a fixed grid extent, demonstrating that parameter
/// count grows linearly with depth while the amortized per-sample cost stays
/// near constant (unlike the per-sample cost of the plain backbone).
///
/// For each depth `L` the axis extent is factored as `L-1` balanced factors
/// in ascending order followed by `last_base`; degenerate base-1 levels pad
/// the front when the extent runs out of factors.
pub fn sweep_depth(
    width: usize,
    dim: usize,
    extent: usize,
    last_base: usize,
    levels: impl IntoIterator<Item = usize>,
) -> Result<Vec<SweepRow>, ProfileError> {
    assert!(extent % last_base == 0, "last base must divide the extent");
    let mut rows = Vec::new();
    for l in levels {
        assert!(l >= 2, "need at least two levels");
        let mut bases = balanced_factors(extent / last_base, l - 1);
        bases.push(last_base);
        let bases_per_axis = vec![bases.clone(); dim];
        let extents = vec![extent; dim];
        let scheme = PartitionScheme::new(&bases_per_axis, &extents)
            .map_err(|e| ProfileError::InconsistentConfig(e.to_string()))?;
        let mut widths = vec![dim];
        widths.extend(std::iter::repeat(width).take(l - 1));
        widths.push(1);
        let asmr = mac_asmr(&widths, &scheme)?;
        let siren = mac_siren(&widths, scheme.total_points());
        rows.push(SweepRow {
            levels: l,
            bases,
            asmr_params: asmr.params,
            asmr_per_sample: asmr.per_sample(),
            siren_params: siren.params,
            siren_per_sample: siren.per_sample(),
        });
    }
    Ok(rows)
}

/// Factors `n` into `k` near-balanced factors, ascending; pads with 1s when
/// `n` has fewer than `k` prime factors.
pub fn balanced_factors(n: usize, k: usize) -> Vec<usize> {
    assert!(n >= 1 && k >= 1);
    let mut primes = Vec::new();
    let mut m = n;
    let mut p = 2;
    while p * p <= m {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
        p += 1;
    }
    if m > 1 {
        primes.push(m);
    }
    primes.sort_unstable_by(|a, b| b.cmp(a));
    let mut buckets = vec![1usize; k];
    for prime in primes {
        let smallest = buckets
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .unwrap();
        buckets[smallest] *= prime;
    }
    buckets.sort_unstable();
    buckets
}
