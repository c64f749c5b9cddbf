//! SIREN backbone and the activation-sharing multi-resolution model.
//!
//! Both models share the layer recurrence
//! `z_i = sin(omega0 * (W_i z_{i-1} + b_i + m_i))` with a plain affine output
//! layer. For the multi-resolution model, `m_i` is the hierarchical
//! modulation: the level-`i` decomposed coordinates projected through a
//! per-level modulator matrix. The full-grid forward computes each layer once
//! per partition cell, upsamples by the level base and adds the tiled
//! modulation, so per-sample cost stays near constant in depth.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coords::{normalize_digit, CoordsError, PartitionScheme};
use crate::tensor::{Tape, Tensor, TensorError, VarId};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad layer widths: {0}")]
    BadWidths(String),
    #[error("backbone has {layers} layers but the scheme has {levels} levels")]
    LevelCountMismatch { layers: usize, levels: usize },
    #[error("instance modulation width mismatch at layer {layer}: {found} vs {expected}")]
    PhiWidthMismatch {
        layer: usize,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Coords(#[from] CoordsError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version/kind mismatch: {0}")]
    VersionMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"ASMR1";

/// Sinusoidal MLP: `widths = [d_0, ..., d_L]`, weight `W_i` of shape
/// `[d_{i-1}, d_i]`, zero-initialized biases.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenModel {
    widths: Vec<usize>,
    omega0: f64,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

/// Per-layer instance-specific bias vectors, one per hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceModulation {
    phis: Vec<Vec<f64>>,
}

impl InstanceModulation {
    pub fn new(phis: Vec<Vec<f64>>) -> Self {
        Self { phis }
    }

    pub fn zeros(hidden_widths: &[usize]) -> Self {
        Self {
            phis: hidden_widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    pub fn phis(&self) -> &[Vec<f64>] {
        &self.phis
    }
}

fn validate_widths(widths: &[usize]) -> Result<(), ModelError> {
    if widths.len() < 2 {
        return Err(ModelError::BadWidths(
            "need at least an input and an output width".into(),
        ));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(ModelError::BadWidths("zero width".into()));
    }
    Ok(())
}

impl SirenModel {
    /// Standard sinusoidal-MLP initialization: first layer
    /// `U(-1/d_0, 1/d_0)`, deeper layers `U(+-sqrt(6/fan_in)/omega0)`,
    /// zero biases. Deterministic for a fixed seed.
    pub fn init(widths: &[usize], omega0: f64, seed: u64) -> Result<Self, ModelError> {
        validate_widths(widths)?;
        assert!(omega0 > 0.0, "omega0 must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for i in 1..widths.len() {
            let fan_in = widths[i - 1];
            let bound = if i == 1 {
                1.0 / fan_in as f64
            } else {
                (6.0 / fan_in as f64).sqrt() / omega0
            };
            let data = (0..fan_in * widths[i])
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            weights.push(Tensor::new(vec![fan_in, widths[i]], data));
            biases.push(Tensor::zeros(vec![widths[i]]));
        }
        Ok(Self {
            widths: widths.to_vec(),
            omega0,
            weights,
            biases,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Number of weight layers `L`.
    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum::<usize>()
            + self.biases.iter().map(Tensor::len).sum::<usize>()
    }

    /// Flat views of all parameters in declaration order
    /// (`W_1, b_1, ..., W_L, b_L`).
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Records the forward pass on `tape`; returns parameter leaves (same
    /// order as [`params`](Self::params)) and the output node.
    pub fn build_forward(
        &self,
        tape: &mut Tape,
        coords: Tensor,
    ) -> Result<(Vec<VarId>, VarId), ModelError> {
        if *coords.shape().last().unwrap() != self.widths[0] {
            return Err(ModelError::Tensor(TensorError::ShapeMismatch(format!(
                "coords inner dim {:?} vs input width {}",
                coords.shape(),
                self.widths[0]
            ))));
        }
        let mut params = Vec::new();
        let mut z = tape.leaf(coords);
        let layers = self.layers();
        for i in 0..layers {
            let w = tape.leaf(self.weights[i].clone());
            let b = tape.leaf(self.biases[i].clone());
            params.push(w);
            params.push(b);
            let a = tape.affine(z, w, b)?;
            z = if i + 1 < layers {
                tape.sine(a, self.omega0)
            } else {
                a
            };
        }
        Ok((params, z))
    }

    /// Evaluates the model at normalized coordinates `[n, d_0]`.
    pub fn forward(&self, coords: &Tensor) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let (_, out) = self.build_forward(&mut tape, coords.clone())?;
        Ok(tape.value(out).clone())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        write_header(&mut buf, 0, &self.widths, self.omega0, "");
        for p in self.params() {
            write_tensor(&mut buf, p);
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path)?;
        let mut r = Reader::new(&bytes);
        let (kind, widths, omega0, _) = read_header(&mut r)?;
        if kind != 0 {
            return Err(ModelError::VersionMismatch(
                "checkpoint holds a multi-resolution model, not a plain backbone".into(),
            ));
        }
        let mut model = Self::init(&widths, omega0, 0)?;
        for p in model.params_mut() {
            read_tensor_into(&mut r, p)?;
        }
        r.finish()?;
        Ok(model)
    }
}

/// SIREN backbone plus per-level modulator matrices and a partition scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct AsmrModel {
    backbone: SirenModel,
    modulators: Vec<Tensor>,
    scheme: PartitionScheme,
}

impl AsmrModel {
    /// Backbone initialized as [`SirenModel::init`]; modulator matrices drawn
    /// `U(+-sqrt(1/d))` where `d` is the data dimension. The `omega0` scale of
    /// the modulation is applied inside the sine at forward time.
    pub fn init(
        widths: &[usize],
        omega0: f64,
        scheme: PartitionScheme,
        seed: u64,
    ) -> Result<Self, ModelError> {
        validate_widths(widths)?;
        if widths.len() - 1 != scheme.levels() {
            return Err(ModelError::LevelCountMismatch {
                layers: widths.len() - 1,
                levels: scheme.levels(),
            });
        }
        if widths[0] != scheme.dim() {
            return Err(ModelError::BadWidths(format!(
                "input width {} must equal the data dimension {}",
                widths[0],
                scheme.dim()
            )));
        }
        let backbone = SirenModel::init(widths, omega0, seed)?;
        let d = widths[0];
        let bound = (1.0 / d as f64).sqrt();
        // modulators draw from a stream seeded separately so backbone params
        // are identical to the bare SIREN with the same seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x6d6f_6475));
        let modulators = (1..widths.len() - 1)
            .map(|i| {
                let data = (0..d * widths[i]).map(|_| rng.gen_range(-bound..bound)).collect();
                Tensor::new(vec![d, widths[i]], data)
            })
            .collect();
        Ok(Self {
            backbone,
            modulators,
            scheme,
        })
    }

    pub fn backbone(&self) -> &SirenModel {
        &self.backbone
    }

    pub fn scheme(&self) -> &PartitionScheme {
        &self.scheme
    }

    pub fn omega0(&self) -> f64 {
        self.backbone.omega0
    }

    pub fn widths(&self) -> &[usize] {
        &self.backbone.widths
    }

    pub fn modulators(&self) -> &[Tensor] {
        &self.modulators
    }

    pub fn param_count(&self) -> usize {
        self.backbone.param_count() + self.modulators.iter().map(Tensor::len).sum::<usize>()
    }

    /// Declaration order: backbone weights/biases, then modulators.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.backbone.params();
        out.extend(self.modulators.iter());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.backbone.params_mut();
        out.extend(self.modulators.iter_mut());
        out
    }

    fn check_phi(&self, phi: Option<&InstanceModulation>) -> Result<(), ModelError> {
        if let Some(phi) = phi {
            let widths = self.widths();
            if phi.phis.len() != widths.len() - 2 {
                return Err(ModelError::PhiWidthMismatch {
                    layer: 0,
                    found: phi.phis.len(),
                    expected: widths.len() - 2,
                });
            }
            for (i, v) in phi.phis.iter().enumerate() {
                if v.len() != widths[i + 1] {
                    return Err(ModelError::PhiWidthMismatch {
                        layer: i + 1,
                        found: v.len(),
                        expected: widths[i + 1],
                    });
                }
            }
        }
        Ok(())
    }

    /// Modulator bias for hidden layer `i` (1-based): the instance vector
    /// `phi_{i-1}` when given, zeros otherwise.
    fn modulation_bias(&self, layer: usize, phi: Option<&InstanceModulation>) -> Tensor {
        let width = self.widths()[layer];
        match phi {
            Some(p) => Tensor::new(vec![width], p.phis[layer - 1].clone()),
            None => Tensor::zeros(vec![width]),
        }
    }

    /// Records the per-coordinate forward over `tape`. Each coordinate is
    /// decomposed and each level's normalized digits are projected through the
    /// level modulator. Returns parameter leaves (declaration order) and the
    /// `[n, d_L]` output node.
    pub fn build_naive(
        &self,
        tape: &mut Tape,
        xs: &[Vec<usize>],
        phi: Option<&InstanceModulation>,
    ) -> Result<(Vec<VarId>, VarId), ModelError> {
        self.check_phi(phi)?;
        let d = self.scheme.dim();
        let levels = self.scheme.levels();
        let n = xs.len();
        // per-level normalized digit matrices [n, d]
        let mut level_mats = vec![Vec::with_capacity(n * d); levels];
        for x in xs {
            let digits = self.scheme.decompose(x)?;
            for (level, dv) in digits.iter().enumerate() {
                for (axis, &v) in dv.iter().enumerate() {
                    level_mats[level].push(normalize_digit(v, self.scheme.base(axis, level)));
                }
            }
        }
        let mut mats = level_mats
            .into_iter()
            .map(|data| Tensor::new(vec![n, d], data));
        let z0 = mats.next().expect("at least one level");

        let mut params = Vec::new();
        let mut z = tape.leaf(z0);
        let layers = self.backbone.layers();
        let mut weight_vars = Vec::new();
        for i in 0..layers {
            let w = tape.leaf(self.backbone.weights[i].clone());
            let b = tape.leaf(self.backbone.biases[i].clone());
            params.push(w);
            params.push(b);
            weight_vars.push((w, b));
        }
        let mut mod_vars = Vec::new();
        for m in &self.modulators {
            let v = tape.leaf(m.clone());
            params.push(v);
            mod_vars.push(v);
        }

        for i in 1..layers {
            let (w, b) = weight_vars[i - 1];
            let a = tape.affine(z, w, b)?;
            let xhat = tape.leaf(mats.next().expect("one matrix per level"));
            let phi_bias = tape.leaf(self.modulation_bias(i, phi));
            let m = tape.affine(xhat, mod_vars[i - 1], phi_bias)?;
            let pre = tape.add(a, m)?;
            z = tape.sine(pre, self.omega0());
        }
        let (w, b) = weight_vars[layers - 1];
        let out = tape.affine(z, w, b)?;
        Ok((params, out))
    }

    /// Per-coordinate evaluation at an arbitrary subset of global
    /// coordinates.
    pub fn forward_naive(
        &self,
        xs: &[Vec<usize>],
        phi: Option<&InstanceModulation>,
    ) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let (_, out) = self.build_naive(&mut tape, xs, phi)?;
        Ok(tape.value(out).clone())
    }

    /// Records the activation-sharing full-grid forward: each layer runs on
    /// its coarse lattice, is nearest-upsampled by the level base, and the
    /// tiled modulation of the level lattice is added before the sine.
    /// The output node holds the full grid, row-major over global
    /// coordinates, flattened to `[N_total, d_L]` semantics.
    pub fn build_shared(
        &self,
        tape: &mut Tape,
        phi: Option<&InstanceModulation>,
    ) -> Result<(Vec<VarId>, VarId), ModelError> {
        self.check_phi(phi)?;
        let d = self.scheme.dim();
        let levels = self.scheme.levels();
        let layers = self.backbone.layers();

        let mut params = Vec::new();
        let mut weight_vars = Vec::new();
        for i in 0..layers {
            let w = tape.leaf(self.backbone.weights[i].clone());
            let b = tape.leaf(self.backbone.biases[i].clone());
            params.push(w);
            params.push(b);
            weight_vars.push((w, b));
        }
        let mut mod_vars = Vec::new();
        for m in &self.modulators {
            let v = tape.leaf(m.clone());
            params.push(v);
            mod_vars.push(v);
        }

        // z_0: normalized level-0 lattice, shape [B_0 per axis ..., d]
        let mut shape = self.scheme.level_bases(0);
        shape.push(d);
        let z0 = Tensor::new(shape, self.scheme.normalized_level_grid(0)?);
        let mut z = tape.leaf(z0);

        for i in 1..layers {
            let (w, b) = weight_vars[i - 1];
            let a = tape.affine(z, w, b)?;
            let u = tape.upsample_nearest(a, &self.scheme.level_bases(i))?;

            let mut mshape = self.scheme.level_bases(i);
            mshape.push(d);
            let lattice = Tensor::new(mshape, self.scheme.normalized_level_grid(i)?);
            let lattice = tape.leaf(lattice);
            let phi_bias = tape.leaf(self.modulation_bias(i, phi));
            let m = tape.affine(lattice, mod_vars[i - 1], phi_bias)?;
            let t = tape.tile_replicate(m, &self.scheme.level_cumulative(i - 1))?;

            let pre = tape.add(u, t)?;
            z = tape.sine(pre, self.omega0());
        }
        let (w, b) = weight_vars[layers - 1];
        let out = tape.affine(z, w, b)?;
        let _ = levels;
        Ok((params, out))
    }

    /// Full-grid evaluation via activation sharing, `[N_total, d_L]`
    /// row-major over global coordinates.
    pub fn forward_shared(&self, phi: Option<&InstanceModulation>) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let (_, out) = self.build_shared(&mut tape, phi)?;
        let v = tape.value(out);
        let d_out = *v.shape().last().unwrap();
        Ok(Tensor::new(
            vec![v.len() / d_out, d_out],
            v.data().to_vec(),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut buf = Vec::new();
        write_header(
            &mut buf,
            1,
            &self.backbone.widths,
            self.backbone.omega0,
            &self.scheme.to_string(),
        );
        for p in self.params() {
            write_tensor(&mut buf, p);
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path)?;
        let mut r = Reader::new(&bytes);
        let (kind, widths, omega0, scheme_str) = read_header(&mut r)?;
        if kind != 1 {
            return Err(ModelError::VersionMismatch(
                "checkpoint holds a plain backbone, not a multi-resolution model".into(),
            ));
        }
        let scheme = PartitionScheme::parse(&scheme_str)?;
        let mut model = Self::init(&widths, omega0, scheme, 0)?;
        for p in model.params_mut() {
            read_tensor_into(&mut r, p)?;
        }
        r.finish()?;
        Ok(model)
    }
}

fn write_header(buf: &mut Vec<u8>, kind: u8, widths: &[usize], omega0: f64, scheme: &str) {
    buf.write_all(CHECKPOINT_MAGIC).unwrap();
    buf.push(kind);
    buf.extend_from_slice(&(widths.len() as u32).to_le_bytes());
    for &w in widths {
        buf.extend_from_slice(&(w as u32).to_le_bytes());
    }
    buf.extend_from_slice(&omega0.to_le_bytes());
    buf.extend_from_slice(&(scheme.len() as u32).to_le_bytes());
    buf.extend_from_slice(scheme.as_bytes());
}

fn write_tensor(buf: &mut Vec<u8>, t: &Tensor) {
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.bytes.len() {
            return Err(ModelError::CorruptCheckpoint(format!(
                "truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<(), ModelError> {
        if self.pos != self.bytes.len() {
            return Err(ModelError::CorruptCheckpoint(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_header(r: &mut Reader) -> Result<(u8, Vec<usize>, f64, String), ModelError> {
    let magic = r.take(5)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(ModelError::VersionMismatch(format!(
            "bad magic {magic:?}"
        )));
    }
    let kind = r.take(1)?[0];
    if kind > 1 {
        return Err(ModelError::VersionMismatch(format!("unknown kind {kind}")));
    }
    let n_widths = r.u32()? as usize;
    if n_widths < 2 || n_widths > 1 << 16 {
        return Err(ModelError::CorruptCheckpoint(format!(
            "implausible width count {n_widths}"
        )));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(r.u32()? as usize);
    }
    let omega0 = r.f64()?;
    if !omega0.is_finite() || omega0 <= 0.0 {
        return Err(ModelError::CorruptCheckpoint(format!(
            "bad omega0 {omega0}"
        )));
    }
    let scheme_len = r.u32()? as usize;
    let scheme = String::from_utf8(r.take(scheme_len)?.to_vec())
        .map_err(|e| ModelError::CorruptCheckpoint(format!("scheme string: {e}")))?;
    Ok((kind, widths, omega0, scheme))
}

fn read_tensor_into(r: &mut Reader, t: &mut Tensor) -> Result<(), ModelError> {
    for v in t.data_mut() {
        *v = r.f64()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn scheme(bases: &[Vec<usize>]) -> PartitionScheme {
        let extents: Vec<usize> = bases.iter().map(|b| b.iter().product()).collect();
        PartitionScheme::new(bases, &extents).unwrap()
    }

    #[test]
    fn siren_param_count_cameraman_shape() {
        let m = SirenModel::init(&[2, 256, 256, 256, 1], 30.0, 0).unwrap();
        // 2*256+256 + 2*(256^2+256) + 256+1
        assert_eq!(m.param_count(), 132_609);
    }

    #[test]
    fn siren_init_deterministic() {
        let a = SirenModel::init(&[2, 16, 16, 1], 30.0, 42).unwrap();
        let b = SirenModel::init(&[2, 16, 16, 1], 30.0, 42).unwrap();
        assert_eq!(a, b);
        let c = SirenModel::init(&[2, 16, 16, 1], 30.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn siren_hidden_weight_bound() {
        let m = SirenModel::init(&[2, 256, 256, 256, 1], 30.0, 7).unwrap();
        let bound = (6.0 / 256.0_f64).sqrt() / 30.0;
        assert!((bound - 0.00510).abs() < 1e-5);
        for w in &m.weights()[1..] {
            for &v in w.data() {
                assert!(v.abs() <= bound);
            }
        }
        // first layer bound is 1/d_0
        for &v in m.weights()[0].data() {
            assert!(v.abs() <= 0.5);
        }
    }

    #[test]
    fn asmr_param_counts_match_formula() {
        let s = scheme(&[vec![4, 4, 4, 8], vec![4, 4, 4, 8]]);
        let m = AsmrModel::init(&[2, 256, 256, 256, 1], 30.0, s, 0).unwrap();
        // backbone + 3 modulators of 2x256
        assert_eq!(m.param_count(), 132_609 + 3 * 2 * 256);

        let s = scheme(&[vec![10, 10, 16, 20]]);
        let m = AsmrModel::init(&[1, 128, 128, 128, 1], 30.0, s, 0).unwrap();
        assert_eq!(m.param_count(), 33_793);
    }

    #[test]
    fn asmr_level_count_mismatch() {
        let s = scheme(&[vec![2, 2, 2]]);
        let err = AsmrModel::init(&[1, 8, 8, 8, 1], 30.0, s, 0).unwrap_err();
        assert!(matches!(err, ModelError::LevelCountMismatch { .. }));
    }

    #[test]
    fn constant_network_outputs_bias() {
        let s = scheme(&[vec![2, 2]]);
        let mut m = AsmrModel::init(&[1, 4, 1], 30.0, s, 0).unwrap();
        for p in m.params_mut() {
            for v in p.data_mut() {
                *v = 0.0;
            }
        }
        m.backbone.biases[1].data_mut()[0] = 2.5;
        let out = m.forward_naive(&[vec![0], vec![3]], None).unwrap();
        assert_eq!(out.data(), &[2.5, 2.5]);
    }

    #[test]
    fn naive_matches_hand_unrolled_two_layer() {
        let s = scheme(&[vec![2, 2]]);
        let m = AsmrModel::init(&[1, 3, 1], 30.0, s, 9).unwrap();
        let out = m.forward_naive(&[vec![0]], None).unwrap();
        // x = 0 decomposes to digits (0, 0); both levels normalize to -1
        let w1 = m.backbone.weights()[0].data();
        let b1 = m.backbone.biases()[0].data();
        let wm = m.modulators()[0].data();
        let w2 = m.backbone.weights()[1].data();
        let b2 = m.backbone.biases()[1].data();
        let mut expect = b2[0];
        for j in 0..3 {
            let pre = w1[j] * -1.0 + b1[j] + wm[j] * -1.0;
            expect += (30.0 * pre).sin() * w2[j];
        }
        assert!((out.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn shared_equals_naive_simple() {
        let s = scheme(&[vec![2, 2], vec![2, 2]]);
        let m = AsmrModel::init(&[2, 8, 1], 30.0, s, 5).unwrap();
        let shared = m.forward_shared(None).unwrap();
        let coords = m.scheme().all_coords();
        let naive = m.forward_naive(&coords, None).unwrap();
        for (a, b) in shared.data().iter().zip(naive.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_modulators_constant_within_cells() {
        let s = scheme(&[vec![4, 4]]);
        let mut m = AsmrModel::init(&[1, 6, 6, 1], 30.0, scheme(&[vec![4, 2, 2]]), 3).unwrap();
        let _ = s;
        for t in &mut m.modulators {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        // coordinates 0 and 1 share the size-G_1 cell (G_1 = 2)
        let out = m.forward_naive(&[vec![0], vec![1]], None).unwrap();
        assert!((out.data()[0] - out.data()[1]).abs() < 1e-14);
        // 0 and 2 do not share the G_1 cell but share the G_0 cell: with all
        // modulators zero the output is still constant there
        let out2 = m.forward_naive(&[vec![0], vec![2]], None).unwrap();
        assert!((out2.data()[0] - out2.data()[1]).abs() < 1e-14);
        // across level-0 cells the values differ
        let out3 = m.forward_naive(&[vec![0], vec![4]], None).unwrap();
        assert!((out3.data()[0] - out3.data()[1]).abs() > 1e-9);
    }

    #[test]
    fn phi_zero_matches_no_phi() {
        let s = scheme(&[vec![2, 2, 2]]);
        let m = AsmrModel::init(&[1, 5, 5, 1], 30.0, s, 1).unwrap();
        let zero_phi = InstanceModulation::zeros(&[5, 5]);
        let a = m.forward_shared(None).unwrap();
        let b = m.forward_shared(Some(&zero_phi)).unwrap();
        assert_eq!(a, b);
        let c = m
            .forward_naive(&m.scheme().all_coords(), Some(&zero_phi))
            .unwrap();
        for (x, y) in a.data().iter().zip(c.data()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn siren_forward_basics() {
        // zero weights -> bias everywhere
        let mut m = SirenModel::init(&[2, 4, 1], 30.0, 0).unwrap();
        for w in &mut m.weights {
            for v in w.data_mut() {
                *v = 0.0;
            }
        }
        m.biases[1].data_mut()[0] = -0.75;
        let out = m
            .forward(&Tensor::new(vec![2, 2], vec![0.1, -0.2, 0.9, 0.4]))
            .unwrap();
        assert_eq!(out.data(), &[-0.75, -0.75]);

        // single affine layer is a plain linear map
        let lin = SirenModel {
            widths: vec![2, 1],
            omega0: 30.0,
            weights: vec![Tensor::new(vec![2, 1], vec![2.0, 3.0])],
            biases: vec![Tensor::new(vec![1], vec![1.0])],
        };
        let out = lin
            .forward(&Tensor::new(vec![1, 2], vec![0.5, -1.0]))
            .unwrap();
        assert!((out.data()[0] - (2.0 * 0.5 + 3.0 * -1.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_round_trip_is_idempotent() {
        let dir = tempdir().unwrap();
        let p1 = dir.path().join("a.asmr");
        let p2 = dir.path().join("b.asmr");
        let s = scheme(&[vec![2, 2], vec![2, 2]]);
        let m = AsmrModel::init(&[2, 8, 1], 30.0, s, 12).unwrap();
        m.save(&p1).unwrap();
        let loaded = AsmrModel::load(&p1).unwrap();
        assert_eq!(loaded, m);
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("trunc.asmr");
        let s = scheme(&[vec![2, 2]]);
        let m = AsmrModel::init(&[1, 4, 1], 30.0, s, 0).unwrap();
        m.save(&p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            AsmrModel::load(&p),
            Err(ModelError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("siren.asmr");
        let m = SirenModel::init(&[2, 4, 1], 30.0, 0).unwrap();
        m.save(&p).unwrap();
        assert!(matches!(
            AsmrModel::load(&p),
            Err(ModelError::VersionMismatch(_))
        ));
        let s = scheme(&[vec![2, 2]]);
        let a = AsmrModel::init(&[1, 4, 1], 30.0, s, 0).unwrap();
        let p2 = dir.path().join("asmr.asmr");
        a.save(&p2).unwrap();
        assert!(matches!(
            SirenModel::load(&p2),
            Err(ModelError::VersionMismatch(_))
        ));
    }
}
