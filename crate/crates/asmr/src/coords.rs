//! Multi-resolution coordinate decomposition.
//!
//! An axis of extent `N` is factored into a list of bases `[B_0, ..., B_{L-1}]`
//! with `prod B_i = N`. The cumulative base `C_i = prod_{k<=i} B_k` is the
//! resolution reached at level `i`, and the grid size `G_i = N / C_i` is the
//! cell width at that level. A global coordinate `x` decomposes into per-level
//! digits `x_i = floor(x / G_i) mod B_i`.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoordsError {
    #[error("bases product {product} does not equal axis extent {extent} (axis {axis})")]
    BaseProductMismatch {
        axis: usize,
        product: usize,
        extent: usize,
    },
    #[error("axes disagree on level count: axis 0 has {expected}, axis {axis} has {found}")]
    RaggedLevels {
        axis: usize,
        expected: usize,
        found: usize,
    },
    #[error("base must be >= 1 (axis {axis}, level {level})")]
    NonPositiveBase { axis: usize, level: usize },
    #[error("axis {axis} has no base >= 2")]
    AllUnitBases { axis: usize },
    #[error("coordinate {value} out of range [0, {extent}) on axis {axis}")]
    CoordOutOfRange {
        axis: usize,
        value: usize,
        extent: usize,
    },
    #[error("level {level} value {value} out of range [0, {base}) on axis {axis}")]
    LevelValueOutOfRange {
        level: usize,
        axis: usize,
        value: usize,
        base: usize,
    },
    #[error("level index {index} out of range (scheme has {levels} levels)")]
    LevelOutOfRange { index: usize, levels: usize },
    #[error("cannot parse scheme string: {0}")]
    ParseScheme(String),
}

/// Per-axis bases of partition with derived cumulative bases and grid sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    bases: Vec<Vec<usize>>,
    cumulative: Vec<Vec<usize>>,
    grid_sizes: Vec<Vec<usize>>,
    extents: Vec<usize>,
}

impl PartitionScheme {
    /// Builds a scheme from per-axis base lists, validating that each axis
    /// factors its extent exactly and that all axes share the same level count.
    pub fn new(bases_per_axis: &[Vec<usize>], extents: &[usize]) -> Result<Self, CoordsError> {
        assert_eq!(
            bases_per_axis.len(),
            extents.len(),
            "one base list per axis"
        );
        assert!(!extents.is_empty(), "at least one axis");
        let levels = bases_per_axis[0].len();
        let mut bases = Vec::with_capacity(extents.len());
        let mut cumulative = Vec::with_capacity(extents.len());
        let mut grid_sizes = Vec::with_capacity(extents.len());
        for (axis, (axis_bases, &extent)) in bases_per_axis.iter().zip(extents).enumerate() {
            if axis_bases.len() != levels {
                return Err(CoordsError::RaggedLevels {
                    axis,
                    expected: levels,
                    found: axis_bases.len(),
                });
            }
            let mut product = 1usize;
            for (level, &b) in axis_bases.iter().enumerate() {
                if b == 0 {
                    return Err(CoordsError::NonPositiveBase { axis, level });
                }
                product = product
                    .checked_mul(b)
                    .expect("base product overflows usize");
            }
            if product != extent {
                return Err(CoordsError::BaseProductMismatch {
                    axis,
                    product,
                    extent,
                });
            }
            if !axis_bases.iter().any(|&b| b >= 2) {
                return Err(CoordsError::AllUnitBases { axis });
            }
            let mut cum = Vec::with_capacity(levels);
            let mut running = 1usize;
            for &b in axis_bases {
                running *= b;
                cum.push(running);
            }
            let grids = cum.iter().map(|&c| extent / c).collect();
            bases.push(axis_bases.clone());
            cumulative.push(cum);
            grid_sizes.push(grids);
        }
        Ok(Self {
            bases,
            cumulative,
            grid_sizes,
            extents: extents.to_vec(),
        })
    }

    /// Number of hierarchical levels `L`.
    pub fn levels(&self) -> usize {
        self.bases[0].len()
    }

    /// Data dimension `d`.
    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// Total number of grid points across all axes.
    pub fn total_points(&self) -> usize {
        self.extents.iter().product()
    }

    /// Base `B_i` for `axis` at `level`.
    pub fn base(&self, axis: usize, level: usize) -> usize {
        self.bases[axis][level]
    }

    /// Cumulative base `C_i` for `axis` at `level`.
    pub fn cumulative(&self, axis: usize, level: usize) -> usize {
        self.cumulative[axis][level]
    }

    /// Grid size `G_i` for `axis` at `level`.
    pub fn grid_size(&self, axis: usize, level: usize) -> usize {
        self.grid_sizes[axis][level]
    }

    /// Per-axis bases at `level`, one entry per axis.
    pub fn level_bases(&self, level: usize) -> Vec<usize> {
        self.bases.iter().map(|b| b[level]).collect()
    }

    /// Per-axis cumulative bases at `level`.
    pub fn level_cumulative(&self, level: usize) -> Vec<usize> {
        self.cumulative.iter().map(|c| c[level]).collect()
    }

    pub fn bases_per_axis(&self) -> &[Vec<usize>] {
        &self.bases
    }

    /// Decomposes a global coordinate into its `L` per-level digit vectors.
    pub fn decompose(&self, x: &[usize]) -> Result<Vec<Vec<usize>>, CoordsError> {
        assert_eq!(x.len(), self.dim(), "coordinate dimension mismatch");
        for (axis, (&v, &extent)) in x.iter().zip(&self.extents).enumerate() {
            if v >= extent {
                return Err(CoordsError::CoordOutOfRange {
                    axis,
                    value: v,
                    extent,
                });
            }
        }
        let levels = self.levels();
        let mut out = Vec::with_capacity(levels);
        for level in 0..levels {
            let digits = x
                .iter()
                .enumerate()
                .map(|(axis, &v)| (v / self.grid_sizes[axis][level]) % self.bases[axis][level])
                .collect();
            out.push(digits);
        }
        Ok(out)
    }

    /// Inverse of [`decompose`](Self::decompose): `x = sum_i x_i * G_i` per axis.
    pub fn recompose(&self, levels: &[Vec<usize>]) -> Result<Vec<usize>, CoordsError> {
        assert_eq!(levels.len(), self.levels(), "level count mismatch");
        let mut out = vec![0usize; self.dim()];
        for (level, digits) in levels.iter().enumerate() {
            assert_eq!(digits.len(), self.dim(), "digit dimension mismatch");
            for (axis, &v) in digits.iter().enumerate() {
                if v >= self.bases[axis][level] {
                    return Err(CoordsError::LevelValueOutOfRange {
                        level,
                        axis,
                        value: v,
                        base: self.bases[axis][level],
                    });
                }
                out[axis] += v * self.grid_sizes[axis][level];
            }
        }
        Ok(out)
    }

    /// Full `d`-dimensional lattice of level-`i` digits in row-major order
    /// (last axis fastest). Shape: `prod_a B_i^(a)` rows of `d` entries.
    pub fn level_grid(&self, level: usize) -> Result<Vec<Vec<usize>>, CoordsError> {
        if level >= self.levels() {
            return Err(CoordsError::LevelOutOfRange {
                index: level,
                levels: self.levels(),
            });
        }
        let bases = self.level_bases(level);
        Ok(lattice(&bases))
    }

    /// Level-`i` lattice with each axis digit mapped to `[-1, 1]`, flattened
    /// row-major into a `prod_a B_i^(a)` x `d` matrix.
    pub fn normalized_level_grid(&self, level: usize) -> Result<Vec<f64>, CoordsError> {
        let grid = self.level_grid(level)?;
        let bases = self.level_bases(level);
        let mut out = Vec::with_capacity(grid.len() * self.dim());
        for point in &grid {
            for (axis, &v) in point.iter().enumerate() {
                out.push(normalize_digit(v, bases[axis]));
            }
        }
        Ok(out)
    }

    /// All global coordinates of the scheme's grid in row-major order.
    pub fn all_coords(&self) -> Vec<Vec<usize>> {
        lattice(&self.extents)
    }

    /// Parses the textual form `axis0=4x4x4x8;axis1=4x4x6x8` (the `axisK=`
    /// prefixes are optional). Extents are the per-axis base products.
    pub fn parse(s: &str) -> Result<Self, CoordsError> {
        let mut bases_per_axis = Vec::new();
        for (idx, part) in s.split(';').enumerate() {
            let part = part.trim();
            let spec = match part.split_once('=') {
                Some((prefix, rest)) => {
                    let expected = format!("axis{idx}");
                    if prefix.trim() != expected {
                        return Err(CoordsError::ParseScheme(format!(
                            "expected prefix `{expected}`, found `{prefix}`"
                        )));
                    }
                    rest
                }
                None => part,
            };
            let bases: Result<Vec<usize>, _> =
                spec.split('x').map(|t| t.trim().parse::<usize>()).collect();
            let bases =
                bases.map_err(|e| CoordsError::ParseScheme(format!("bad base in `{spec}`: {e}")))?;
            if bases.is_empty() {
                return Err(CoordsError::ParseScheme("empty axis".into()));
            }
            bases_per_axis.push(bases);
        }
        if bases_per_axis.is_empty() {
            return Err(CoordsError::ParseScheme("empty scheme".into()));
        }
        let extents: Vec<usize> = bases_per_axis
            .iter()
            .map(|b| b.iter().product())
            .collect();
        Self::new(&bases_per_axis, &extents)
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (axis, bases) in self.bases.iter().enumerate() {
            if axis > 0 {
                write!(f, ";")?;
            }
            write!(f, "axis{axis}=")?;
            for (i, b) in bases.iter().enumerate() {
                if i > 0 {
                    write!(f, "x")?;
                }
                write!(f, "{b}")?;
            }
        }
        Ok(())
    }
}

/// Maps a digit in `[0, B-1]` linearly onto `[-1, 1]`; base-1 levels carry no
/// information and map to 0.
pub fn normalize_digit(value: usize, base: usize) -> f64 {
    if base <= 1 {
        0.0
    } else {
        2.0 * value as f64 / (base - 1) as f64 - 1.0
    }
}

/// Row-major lattice of all integer points below the given extents,
/// last axis fastest.
fn lattice(extents: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = extents.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut point = vec![0usize; extents.len()];
    for _ in 0..total {
        out.push(point.clone());
        for axis in (0..extents.len()).rev() {
            point[axis] += 1;
            if point[axis] < extents[axis] {
                break;
            }
            point[axis] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme_1d(bases: &[usize]) -> PartitionScheme {
        let extent = bases.iter().product();
        PartitionScheme::new(&[bases.to_vec()], &[extent]).unwrap()
    }

    #[test]
    fn binary_partition_of_8() {
        let s = scheme_1d(&[2, 2, 2]);
        assert_eq!(s.cumulative[0], vec![2, 4, 8]);
        assert_eq!(s.grid_sizes[0], vec![4, 2, 1]);
    }

    #[test]
    fn kodak_scheme_derived_quantities() {
        let s = PartitionScheme::new(
            &[vec![4, 4, 4, 8], vec![4, 4, 4, 8]],
            &[512, 512],
        )
        .unwrap();
        for axis in 0..2 {
            assert_eq!(s.cumulative[axis], vec![4, 16, 64, 512]);
            assert_eq!(s.grid_sizes[axis], vec![128, 32, 8, 1]);
        }
    }

    #[test]
    fn product_mismatch_rejected() {
        let err = PartitionScheme::new(&[vec![3, 3]], &[8]).unwrap_err();
        assert!(matches!(err, CoordsError::BaseProductMismatch { .. }));
    }

    #[test]
    fn ragged_levels_rejected() {
        let err =
            PartitionScheme::new(&[vec![2, 2], vec![2, 2, 2]], &[4, 8]).unwrap_err();
        assert!(matches!(err, CoordsError::RaggedLevels { .. }));
    }

    #[test]
    fn zero_base_rejected() {
        let err = PartitionScheme::new(&[vec![0, 8]], &[0]).unwrap_err();
        assert!(matches!(err, CoordsError::NonPositiveBase { .. }));
    }

    #[test]
    fn decompose_is_binary_digits() {
        let s = scheme_1d(&[2, 2, 2]);
        let levels = s.decompose(&[5]).unwrap();
        assert_eq!(levels, vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn decompose_100_in_4448() {
        let s = scheme_1d(&[4, 4, 4, 8]);
        let levels = s.decompose(&[100]).unwrap();
        assert_eq!(levels, vec![vec![0], vec![3], vec![0], vec![4]]);
        // independent check: digits recombine through the grid sizes
        assert_eq!(0 * 128 + 3 * 32 + 0 * 8 + 4 * 1, 100);
        assert_eq!(s.recompose(&levels).unwrap(), vec![100]);
    }

    #[test]
    fn decompose_maximal_coordinate() {
        let s = scheme_1d(&[4, 4, 4, 8]);
        let levels = s.decompose(&[511]).unwrap();
        assert_eq!(levels, vec![vec![3], vec![3], vec![3], vec![7]]);
        assert_eq!(s.recompose(&levels).unwrap(), vec![511]);
    }

    #[test]
    fn out_of_range_coordinate_rejected() {
        let s = scheme_1d(&[2, 2, 2]);
        assert!(matches!(
            s.decompose(&[8]),
            Err(CoordsError::CoordOutOfRange { .. })
        ));
    }

    #[test]
    fn recompose_rejects_out_of_range_digit() {
        let s = scheme_1d(&[2, 2, 2]);
        let err = s
            .recompose(&[vec![2], vec![0], vec![0]])
            .unwrap_err();
        assert!(matches!(err, CoordsError::LevelValueOutOfRange { .. }));
    }

    #[test]
    fn level_grid_2d() {
        let s = PartitionScheme::new(&[vec![2], vec![2]], &[2, 2]).unwrap();
        assert_eq!(
            s.level_grid(0).unwrap(),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn level_grid_finest_level_1d() {
        let s = scheme_1d(&[4, 4, 4, 8]);
        let grid = s.level_grid(3).unwrap();
        let values: Vec<usize> = grid.iter().map(|p| p[0]).collect();
        assert_eq!(values, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn level_grid_out_of_range() {
        let s = scheme_1d(&[4, 4, 4, 8]);
        assert!(matches!(
            s.level_grid(4),
            Err(CoordsError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn normalize_digit_endpoints() {
        assert_eq!(normalize_digit(0, 2), -1.0);
        assert_eq!(normalize_digit(1, 2), 1.0);
        let vals: Vec<f64> = (0..4).map(|v| normalize_digit(v, 4)).collect();
        let expected = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in vals.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(normalize_digit(0, 1), 0.0);
    }

    #[test]
    fn round_trip_exhaustive_small_schemes() {
        let schemes = [
            vec![vec![2, 2, 2]],
            vec![vec![4, 4, 4, 8]],
            vec![vec![3, 5, 2]],
            vec![vec![5, 1, 1, 5]],
            vec![vec![2, 2], vec![4, 2]],
            vec![vec![2, 3], vec![3, 2], vec![2, 2]],
        ];
        for bases in schemes {
            let extents: Vec<usize> = bases.iter().map(|b| b.iter().product()).collect();
            let s = PartitionScheme::new(&bases, &extents).unwrap();
            for x in s.all_coords() {
                let levels = s.decompose(&x).unwrap();
                for (level, digits) in levels.iter().enumerate() {
                    for (axis, &v) in digits.iter().enumerate() {
                        assert!(v < s.base(axis, level));
                    }
                }
                assert_eq!(s.recompose(&levels).unwrap(), x);
            }
        }
    }

    #[test]
    fn shared_prefix_digits_iff_same_cell() {
        let s = scheme_1d(&[4, 4, 4, 8]);
        for &(x, y, level) in &[(0usize, 7usize, 2usize), (0, 8, 2), (100, 101, 3), (96, 103, 2)] {
            let dx = s.decompose(&[x]).unwrap();
            let dy = s.decompose(&[y]).unwrap();
            let same_digits = (0..=level).all(|i| dx[i] == dy[i]);
            let g = s.grid_size(0, level);
            assert_eq!(same_digits, x / g == y / g, "x={x} y={y} level={level}");
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        let s = PartitionScheme::parse("axis0=4x4x4x8;axis1=4x4x6x8").unwrap();
        assert_eq!(s.extents(), &[512, 768]);
        let printed = s.to_string();
        assert_eq!(PartitionScheme::parse(&printed).unwrap(), s);
        // bare form without prefixes
        let bare = PartitionScheme::parse("2x2x2").unwrap();
        assert_eq!(bare.extents(), &[8]);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(PartitionScheme::parse("axis1=2x2").is_err());
        assert!(PartitionScheme::parse("2xq").is_err());
        assert!(PartitionScheme::parse("").is_err());
    }

    #[test]
    fn base_one_levels_allowed() {
        let s = scheme_1d(&[5, 1, 1, 5]);
        assert_eq!(s.cumulative[0], vec![5, 5, 5, 25]);
        let levels = s.decompose(&[13]).unwrap();
        assert_eq!(s.recompose(&levels).unwrap(), vec![13]);
        assert_eq!(levels[1], vec![0]);
        assert_eq!(levels[2], vec![0]);
    }
}
