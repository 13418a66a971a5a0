//! Desk-scale encoder: MLP backbone with two projection heads sharing its
//! features, exact backpropagation (including the row-normalization
//! Jacobian), SGD with momentum, and the warm-up + cosine LR schedule.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::WclError;
use crate::matkernel::{l2_norm, EmbeddingBatch, Matrix, NORM_EPS};

const WCLM_MAGIC: &[u8; 4] = b"WCLM";

/// One affine layer: `out = x·w + b`, `w` is input-dim × output-dim.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
        }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul(&self.w);
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.b) {
                *o += b;
            }
        }
        out
    }
}

/// Layer widths: backbone input → hidden → feat (= h), heads feat →
/// hidden → proj. Both heads share the same two-layer shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub feat: usize,
    pub proj: usize,
}

/// Backbone and the two projection heads. The same struct doubles as the
/// gradient container since gradients shape-match parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub backbone: Vec<Layer>,
    pub head_g: Vec<Layer>,
    pub head_phi: Vec<Layer>,
}

impl ModelParams {
    /// Glorot-style uniform init in ±sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn init(dims: &ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Layer {
                w: Matrix::from_vec(fan_in, fan_out, data).unwrap(),
                b: vec![0.0; fan_out],
            }
        };
        ModelParams {
            backbone: vec![
                layer(dims.input, dims.hidden),
                layer(dims.hidden, dims.feat),
            ],
            head_g: vec![layer(dims.feat, dims.hidden), layer(dims.hidden, dims.proj)],
            head_phi: vec![layer(dims.feat, dims.hidden), layer(dims.hidden, dims.proj)],
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            backbone: self.backbone.iter().map(Layer::zeros_like).collect(),
            head_g: self.head_g.iter().map(Layer::zeros_like).collect(),
            head_phi: self.head_phi.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.backbone[0].w.rows()
    }

    fn groups(&self) -> [&[Layer]; 3] {
        [&self.backbone, &self.head_g, &self.head_phi]
    }

    fn groups_mut(&mut self) -> [&mut Vec<Layer>; 3] {
        [&mut self.backbone, &mut self.head_g, &mut self.head_phi]
    }

    /// `self += scale · other`, group by group.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (mine, theirs) in self
            .groups_mut()
            .into_iter()
            .zip(other.groups().into_iter())
        {
            for (a, b) in mine.iter_mut().zip(theirs.iter()) {
                a.w.add_scaled(&b.w, scale);
                for (x, y) in a.b.iter_mut().zip(&b.b) {
                    *x += scale * y;
                }
            }
        }
    }
}

/// Everything the forward pass caches for exact backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub h: Matrix,
    pub z: EmbeddingBatch,
    pub v: EmbeddingBatch,
    x: Matrix,
    backbone_pre: Matrix,  // pre-ReLU activations of backbone layer 0
    backbone_relu: Matrix, // ReLU output feeding backbone layer 1
    g_pre: Matrix,
    g_relu: Matrix,
    g_norms: Vec<f64>, // row norms of the pre-normalization g output
    phi_pre: Matrix,
    phi_relu: Matrix,
    phi_norms: Vec<f64>,
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

fn normalize_with_norms(m: &Matrix) -> Result<(EmbeddingBatch, Vec<f64>), WclError> {
    let mut norms = Vec::with_capacity(m.rows());
    let mut out = m.clone();
    for i in 0..out.rows() {
        let norm = l2_norm(out.row(i));
        if norm < NORM_EPS {
            return Err(WclError::ZeroRow { row: i });
        }
        norms.push(norm);
        let inv = 1.0 / norm;
        for v in out.row_mut(i) {
            *v *= inv;
        }
    }
    Ok((EmbeddingBatch::from_unit_rows(out), norms))
}

/// Full forward pass: h = backbone(x) with ReLU between layers, z and v
/// are the row-normalized head outputs.
pub fn forward(p: &ModelParams, x: &Matrix) -> Result<ForwardTrace, WclError> {
    if x.cols() != p.input_dim() {
        return Err(WclError::DimensionMismatch {
            left: format!("{} input cols", x.cols()),
            right: format!("{} expected", p.input_dim()),
        });
    }
    let backbone_pre = p.backbone[0].apply(x);
    let backbone_relu = relu(&backbone_pre);
    let h = p.backbone[1].apply(&backbone_relu);

    let g_pre = p.head_g[0].apply(&h);
    let g_relu = relu(&g_pre);
    let (z, g_norms) = normalize_with_norms(&p.head_g[1].apply(&g_relu))?;

    let phi_pre = p.head_phi[0].apply(&h);
    let phi_relu = relu(&phi_pre);
    let (v, phi_norms) = normalize_with_norms(&p.head_phi[1].apply(&phi_relu))?;

    Ok(ForwardTrace {
        h,
        z,
        v,
        x: x.clone(),
        backbone_pre,
        backbone_relu,
        g_pre,
        g_relu,
        g_norms,
        phi_pre,
        phi_relu,
        phi_norms,
    })
}

fn col_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// Backprop of `d` through row L2 normalization: for a row with unit
/// output `e` and pre-normalization norm `n`, du = (d − (d·e)e)/n.
fn normalize_backward(d: &Matrix, unit: &EmbeddingBatch, norms: &[f64]) -> Matrix {
    let mut out = d.clone();
    for i in 0..out.rows() {
        let e = unit.row(i);
        let proj = crate::matkernel::dot(out.row(i), e);
        let inv = 1.0 / norms[i];
        for (o, &ei) in out.row_mut(i).iter_mut().zip(e) {
            *o = (*o - proj * ei) * inv;
        }
    }
    out
}

fn relu_mask(d: &Matrix, pre: &Matrix) -> Matrix {
    let mut out = d.clone();
    for (o, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *o = 0.0;
        }
    }
    out
}

/// Backprop through one 2-layer ReLU head. Returns ([grad layer0, grad
/// layer1], d_input).
fn head_backward(
    layers: &[Layer],
    input: &Matrix,
    pre: &Matrix,
    relu_out: &Matrix,
    d_out: &Matrix,
) -> (Vec<Layer>, Matrix) {
    let g1 = Layer {
        w: relu_out.matmul_at_b(d_out),
        b: col_sums(d_out),
    };
    let d_relu = d_out.matmul_bt(&layers[1].w);
    let d_pre = relu_mask(&d_relu, pre);
    let g0 = Layer {
        w: input.matmul_at_b(&d_pre),
        b: col_sums(&d_pre),
    };
    let d_input = d_pre.matmul_bt(&layers[0].w);
    (vec![g0, g1], d_input)
}

/// Exact parameter gradients of Σ⟨dz,z⟩ + ⟨dv,v⟩ + ⟨dh_extra,h⟩, including
/// the normalization Jacobians of both heads.
pub fn backward(
    p: &ModelParams,
    trace: &ForwardTrace,
    dz: &Matrix,
    dv: &Matrix,
    dh_extra: &Matrix,
) -> Result<ModelParams, WclError> {
    let shape_ok = |m: &Matrix, r: usize, c: usize| m.rows() == r && m.cols() == c;
    if !shape_ok(dz, trace.z.len(), trace.z.dim())
        || !shape_ok(dv, trace.v.len(), trace.v.dim())
        || !shape_ok(dh_extra, trace.h.rows(), trace.h.cols())
    {
        return Err(WclError::ShapeMismatch {
            expected: "gradients matching z, v, h".into(),
            got: format!(
                "{}x{}, {}x{}, {}x{}",
                dz.rows(),
                dz.cols(),
                dv.rows(),
                dv.cols(),
                dh_extra.rows(),
                dh_extra.cols()
            ),
        });
    }

    let du_z = normalize_backward(dz, &trace.z, &trace.g_norms);
    let (g_grads, dh_g) = head_backward(&p.head_g, &trace.h, &trace.g_pre, &trace.g_relu, &du_z);

    let du_v = normalize_backward(dv, &trace.v, &trace.phi_norms);
    let (phi_grads, dh_phi) = head_backward(
        &p.head_phi,
        &trace.h,
        &trace.phi_pre,
        &trace.phi_relu,
        &du_v,
    );

    let mut dh = dh_g;
    dh.add_scaled(&dh_phi, 1.0);
    dh.add_scaled(dh_extra, 1.0);

    let (backbone_grads, _dx) = head_backward(
        &p.backbone,
        &trace.x,
        &trace.backbone_pre,
        &trace.backbone_relu,
        &dh,
    );

    Ok(ModelParams {
        backbone: backbone_grads,
        head_g: g_grads,
        head_phi: phi_grads,
    })
}

/// Momentum buffers plus the fixed optimizer coefficients.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    buffers: ModelParams,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, weight_decay: f64) -> Self {
        OptimizerState {
            buffers: params.zeros_like(),
            momentum: 0.9,
            weight_decay,
        }
    }
}

/// One SGD-with-momentum update: buf = m·buf + grad + wd·param, then
/// param -= lr·buf.
pub fn sgd_step(p: &mut ModelParams, grads: &ModelParams, state: &mut OptimizerState, lr: f64) {
    let m = state.momentum;
    let wd = state.weight_decay;
    for ((params, grads), bufs) in p
        .groups_mut()
        .into_iter()
        .zip(grads.groups().into_iter())
        .zip(state.buffers.groups_mut().into_iter())
    {
        for ((layer, g), buf) in params.iter_mut().zip(grads).zip(bufs.iter_mut()) {
            for ((pw, &gw), bw) in layer
                .w
                .data_mut()
                .iter_mut()
                .zip(g.w.data())
                .zip(buf.w.data_mut())
            {
                *bw = m * *bw + gw + wd * *pw;
                *pw -= lr * *bw;
            }
            for ((pb, &gb), bb) in layer.b.iter_mut().zip(&g.b).zip(buf.b.iter_mut()) {
                *bb = m * *bb + gb + wd * *pb;
                *pb -= lr * *bb;
            }
        }
    }
}

/// Linear warm-up to `base_lr` over `warmup_steps`, then cosine decay to 0
/// at `total_steps`.
pub fn lr_schedule(step: usize, warmup_steps: usize, total_steps: usize, base_lr: f64) -> f64 {
    debug_assert!(warmup_steps < total_steps);
    if step < warmup_steps {
        base_lr * step as f64 / warmup_steps as f64
    } else {
        let t = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
        base_lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Writes a checkpoint: magic "WCLM", u32-LE layer counts for the three
/// groups, then per layer u32-LE in/out dims, f64-LE weights row-major,
/// f64-LE biases.
pub fn save_checkpoint(path: &Path, p: &ModelParams) -> Result<(), WclError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(WCLM_MAGIC);
    for group in p.groups() {
        buf.extend_from_slice(&(group.len() as u32).to_le_bytes());
    }
    for group in p.groups() {
        for layer in group {
            buf.extend_from_slice(&(layer.w.rows() as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.w.cols() as u32).to_le_bytes());
            for v in layer.w.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for v in &layer.b {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, WclError> {
    let malformed = |reason: &str| WclError::MalformedFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[0..4] != WCLM_MAGIC {
        return Err(malformed("bad header"));
    }
    let mut off = 4;
    let read_u32 = |bytes: &[u8], off: &mut usize| -> Result<usize, WclError> {
        if *off + 4 > bytes.len() {
            return Err(malformed("truncated"));
        }
        let v = u32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap()) as usize;
        *off += 4;
        Ok(v)
    };
    let counts = [
        read_u32(&bytes, &mut off)?,
        read_u32(&bytes, &mut off)?,
        read_u32(&bytes, &mut off)?,
    ];
    let mut groups: Vec<Vec<Layer>> = Vec::new();
    for &count in &counts {
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = read_u32(&bytes, &mut off)?;
            let cols = read_u32(&bytes, &mut off)?;
            let need = (rows * cols + cols) * 8;
            if off + need > bytes.len() {
                return Err(malformed("truncated layer payload"));
            }
            let take = |n: usize, off: &mut usize| -> Vec<f64> {
                let out = bytes[*off..*off + 8 * n]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                *off += 8 * n;
                out
            };
            let w = Matrix::from_vec(rows, cols, take(rows * cols, &mut off))?;
            let b = take(cols, &mut off);
            layers.push(Layer { w, b });
        }
        groups.push(layers);
    }
    if off != bytes.len() {
        return Err(malformed("trailing bytes"));
    }
    let mut it = groups.into_iter();
    Ok(ModelParams {
        backbone: it.next().unwrap(),
        head_g: it.next().unwrap(),
        head_phi: it.next().unwrap(),
    })
}
