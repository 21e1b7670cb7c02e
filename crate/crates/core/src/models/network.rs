use super::linalg::{dot, softmax, vec_matmul, Matrix};
use super::params::{GradSet, ParamSet, Tensor};
use super::{ModelConfig, TaskKind};
use crate::alignment::{patchify, replicate_channels, ForecastMask, PatchSequence};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::image::GrayImage;
use crate::seeded_rng;
use crate::training::{cross_entropy, masked_mse};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Samples per gradient chunk. Chunks are reduced in index order, so the
/// summed gradient does not depend on the execution mode.
const GRAD_CHUNK: usize = 4;

/// One training or evaluation unit. Images are standardized `S×S`.
#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    Classify {
        images: Vec<GrayImage>,
        label: usize,
    },
    Forecast {
        image: GrayImage,
        target: Vec<f64>,
    },
    Reconstruct {
        input: GrayImage,
        target: GrayImage,
        mask: ForecastMask,
    },
}

/// Draws a fresh parameter set for `cfg`.
///
/// Projections are Xavier-uniform, biases zero, mask token and positional
/// embeddings `N(0, 0.02)`, layer-norm scale one.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut rng = seeded_rng(seed);
    let (f, d, n) = (cfg.patch_dim(), cfg.embed_dim, cfg.num_patches());
    let mut p = ParamSet::new();
    p.insert("embed.weight", Tensor::xavier(f, d, &mut rng));
    p.insert("embed.bias", Tensor::zeros(&[d]));
    p.insert("pos_embed", Tensor::normal(&[n, d], 0.02, &mut rng));
    if cfg.task == TaskKind::ForecastReconstruct {
        p.insert("mask_token", Tensor::normal(&[d], 0.02, &mut rng));
    }
    if cfg.arch.uses_attention() {
        for name in ["attn.query", "attn.key", "attn.value", "attn.out"] {
            p.insert(name, Tensor::xavier(d, d, &mut rng));
        }
        p.insert("norm.scale", Tensor::filled(&[d], 1.0));
        p.insert("norm.shift", Tensor::zeros(&[d]));
    } else {
        p.insert("mixer.weight", Tensor::xavier(d, d, &mut rng));
        p.insert("mixer.bias", Tensor::zeros(&[d]));
    }
    match cfg.task {
        TaskKind::Classify => {
            p.insert("head.weight", Tensor::xavier(cfg.num_images * d, cfg.num_classes, &mut rng));
            p.insert("head.bias", Tensor::zeros(&[cfg.num_classes]));
        }
        TaskKind::ForecastLinear => {
            p.insert("head.weight", Tensor::xavier(n * d, cfg.horizon, &mut rng));
            p.insert("head.bias", Tensor::zeros(&[cfg.horizon]));
        }
        TaskKind::ForecastReconstruct => {
            p.insert("decoder.weight", Tensor::xavier(d, f, &mut rng));
            p.insert("decoder.bias", Tensor::zeros(&[f]));
        }
    }
    Ok(p)
}

fn to_patches(img: &GrayImage, patch: usize) -> Result<PatchSequence> {
    patchify(&replicate_channels(img)?, patch)
}

/// Patch tokens: `W_e·patch + b + pos`, or `mask_token + pos` for masked
/// patches.
pub fn forward_embed(
    seq: &PatchSequence,
    params: &ParamSet,
    mask: Option<&ForecastMask>,
) -> Result<Matrix> {
    let flags = match mask {
        Some(m) => {
            if m.grid != seq.grid {
                return Err(Error::ShapeMismatch(format!(
                    "mask grid {:?} vs patch grid {:?}",
                    m.grid, seq.grid
                )));
            }
            m.flags()
        }
        None => vec![false; seq.len()],
    };
    embed(seq, params, &flags)
}

fn embed(seq: &PatchSequence, params: &ParamSet, masked: &[bool]) -> Result<Matrix> {
    let w = &params["embed.weight"];
    let (f, d) = (w.shape[0], w.shape[1]);
    let pos = &params["pos_embed"];
    if seq.patch_dim() != f || seq.patches.iter().any(|p| p.len() != f) {
        return Err(Error::ShapeMismatch(format!(
            "patch length {} but projection expects {f}",
            seq.patch_dim()
        )));
    }
    if pos.shape[0] != seq.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} patches but {} positional embeddings",
            seq.len(),
            pos.shape[0]
        )));
    }
    let x = Matrix::from_rows(&seq.patches);
    let mut e = x.matmul(&w.data, d);
    e.add_row_vector(&params["embed.bias"].data);
    if masked.iter().any(|&m| m) {
        let token = &params
            .get("mask_token")
            .ok_or_else(|| Error::ShapeMismatch("model has no mask token".into()))?
            .data;
        for (i, _) in masked.iter().enumerate().filter(|(_, &m)| m) {
            e.row_mut(i).copy_from_slice(token);
        }
    }
    for i in 0..e.rows {
        for (v, p) in e.row_mut(i).iter_mut().zip(&pos.data[i * d..(i + 1) * d]) {
            *v += p;
        }
    }
    Ok(e)
}

/// Linear token mixer of the `WithoutLvm` ablation.
pub fn forward_mixer(tokens: &Matrix, params: &ParamSet) -> Matrix {
    let d = tokens.cols;
    let mut h = tokens.matmul(&params["mixer.weight"].data, d);
    h.add_row_vector(&params["mixer.bias"].data);
    h
}

struct AttnCache {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Per-head `N×N` row-stochastic weights.
    weights: Vec<Matrix>,
    o: Matrix,
    xhat: Matrix,
    inv_std: Vec<f64>,
}

fn attention_cached(tokens: &Matrix, params: &ParamSet, heads: usize) -> Result<(Matrix, AttnCache)> {
    let (n, d) = (tokens.rows, tokens.cols);
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidArgument(format!("{d} dims over {heads} heads")));
    }
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();
    let q = tokens.matmul(&params["attn.query"].data, d);
    let k = tokens.matmul(&params["attn.key"].data, d);
    let v = tokens.matmul(&params["attn.value"].data, d);
    let mut o = Matrix::zeros(n, d);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = h * hd..(h + 1) * hd;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            let qi = &q.row(i)[cols.clone()];
            let scores: Vec<f64> = (0..n)
                .map(|j| scale * dot(qi, &k.row(j)[cols.clone()]))
                .collect();
            a.row_mut(i).copy_from_slice(&softmax(&scores));
        }
        for i in 0..n {
            for j in 0..n {
                let w = a.get(i, j);
                let vj = &v.row(j)[cols.clone()];
                for (dst, &x) in o.row_mut(i)[cols.clone()].iter_mut().zip(vj) {
                    *dst += w * x;
                }
            }
        }
        weights.push(a);
    }
    let z = o.matmul(&params["attn.out"].data, d);
    let mut r = tokens.clone();
    r.add_assign(&z);

    let gamma = &params["norm.scale"].data;
    let beta = &params["norm.shift"].data;
    let mut xhat = Matrix::zeros(n, d);
    let mut inv_std = Vec::with_capacity(n);
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let row = r.row(i);
        let mu = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(inv);
        for c in 0..d {
            let xh = (row[c] - mu) * inv;
            xhat.data[i * d + c] = xh;
            out.data[i * d + c] = xh * gamma[c] + beta[c];
        }
    }
    Ok((
        out,
        AttnCache {
            q,
            k,
            v,
            weights,
            o,
            xhat,
            inv_std,
        },
    ))
}

/// Multi-head self-attention with residual connection and layer norm:
/// `LN(X + concat_h(softmax(Q_h K_hᵀ/√d_h) V_h) W_o)`.
pub fn forward_attention(tokens: &Matrix, params: &ParamSet, heads: usize) -> Result<Matrix> {
    Ok(attention_cached(tokens, params, heads)?.0)
}

/// Per-head attention weights for `tokens`.
pub fn attention_weights(tokens: &Matrix, params: &ParamSet, heads: usize) -> Result<Vec<Matrix>> {
    Ok(attention_cached(tokens, params, heads)?.1.weights)
}

/// Mean-pools each variate's tokens, concatenates, applies the linear head.
pub fn forward_classify(tokens_per_variate: &[Matrix], params: &ParamSet) -> Result<Vec<f64>> {
    let pooled = pool_concat(tokens_per_variate, params)?;
    let w = &params["head.weight"];
    let mut logits = vec_matmul(&pooled, &w.data, w.shape[1]);
    for (l, b) in logits.iter_mut().zip(&params["head.bias"].data) {
        *l += b;
    }
    Ok(logits)
}

fn pool_concat(tokens_per_variate: &[Matrix], params: &ParamSet) -> Result<Vec<f64>> {
    let first = tokens_per_variate.first().ok_or(Error::EmptyInput)?;
    let (n, d) = (first.rows, first.cols);
    let w = &params["head.weight"];
    if tokens_per_variate.iter().any(|t| t.rows != n || t.cols != d) || w.shape[0] != d * tokens_per_variate.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} variates of {n}x{d} tokens for a head of width {}",
            tokens_per_variate.len(),
            w.shape[0]
        )));
    }
    let mut pooled = Vec::with_capacity(d * tokens_per_variate.len());
    for t in tokens_per_variate {
        let mut m = vec![0.0; d];
        t.add_col_sums_into(&mut m);
        pooled.extend(m.into_iter().map(|x| x / n as f64));
    }
    Ok(pooled)
}

/// Flattens tokens and maps them to `horizon` values.
pub fn forward_forecast_linear(tokens: &Matrix, params: &ParamSet, horizon: usize) -> Result<Vec<f64>> {
    let w = &params["head.weight"];
    if w.shape != [tokens.data.len(), horizon] {
        return Err(Error::ShapeMismatch(format!(
            "head {:?} for {} token values and horizon {horizon}",
            w.shape,
            tokens.data.len()
        )));
    }
    let mut out = vec_matmul(&tokens.data, &w.data, horizon);
    for (o, b) in out.iter_mut().zip(&params["head.bias"].data) {
        *o += b;
    }
    Ok(out)
}

fn mid_forward(cfg: &ModelConfig, params: &ParamSet, e: &Matrix) -> Result<(Matrix, Option<AttnCache>)> {
    if cfg.arch.uses_attention() {
        let (h, c) = attention_cached(e, params, cfg.num_heads)?;
        Ok((h, Some(c)))
    } else {
        Ok((forward_mixer(e, params), None))
    }
}

fn decode(h: &Matrix, params: &ParamSet) -> Matrix {
    let w = &params["decoder.weight"];
    let mut y = h.matmul(&w.data, w.shape[1]);
    y.add_row_vector(&params["decoder.bias"].data);
    y
}

/// Masked patches are generated by the decoder; unmasked output patches are
/// copied from the input.
pub fn forward_reconstruct(
    seq: &PatchSequence,
    mask: &ForecastMask,
    params: &ParamSet,
    cfg: &ModelConfig,
) -> Result<PatchSequence> {
    let e = forward_embed(seq, params, Some(mask))?;
    let (h, _) = mid_forward(cfg, params, &e)?;
    let y = decode(&h, params);
    let flags = mask.flags();
    let patches = seq
        .patches
        .iter()
        .enumerate()
        .map(|(i, p)| if flags[i] { y.row(i).to_vec() } else { p.clone() })
        .collect();
    Ok(PatchSequence {
        patches,
        grid: seq.grid,
        patch_size: seq.patch_size,
    })
}

/// A parameter set bound to its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let reference = init_params(&config, 0)?;
        if !reference.is_congruent(&params) {
            return Err(Error::ShapeMismatch(
                "parameter set does not match the model configuration".into(),
            ));
        }
        Ok(Self { config, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Token matrix after the projection and the middle layer.
    pub fn encode(&self, img: &GrayImage, mask: Option<&ForecastMask>) -> Result<Matrix> {
        let seq = to_patches(img, self.config.patch_size)?;
        let e = forward_embed(&seq, &self.params, mask)?;
        Ok(mid_forward(&self.config, &self.params, &e)?.0)
    }

    pub fn classify_logits(&self, images: &[GrayImage]) -> Result<Vec<f64>> {
        let tokens = images
            .iter()
            .map(|img| self.encode(img, None))
            .collect::<Result<Vec<_>>>()?;
        forward_classify(&tokens, &self.params)
    }

    /// Predicted class; ties go to the lowest index.
    pub fn predict_class(&self, images: &[GrayImage]) -> Result<usize> {
        Ok(argmax_lowest(&self.classify_logits(images)?))
    }

    pub fn forecast(&self, img: &GrayImage) -> Result<Vec<f64>> {
        let tokens = self.encode(img, None)?;
        forward_forecast_linear(&tokens, &self.params, self.config.horizon)
    }

    pub fn reconstruct(&self, seq: &PatchSequence, mask: &ForecastMask) -> Result<PatchSequence> {
        forward_reconstruct(seq, mask, &self.params, &self.config)
    }

    /// Model-space validation quantity of one example: the loss for
    /// forecasting tasks, `1.0` for a correct classification.
    pub fn example_loss(&self, ex: &Example) -> Result<f64> {
        sample_loss(&self.config, &self.params, ex)
    }
}

pub(crate) fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_kind(cfg: &ModelConfig, ex: &Example) -> Result<()> {
    let ok = matches!(
        (cfg.task, ex),
        (TaskKind::Classify, Example::Classify { .. })
            | (TaskKind::ForecastLinear, Example::Forecast { .. })
            | (TaskKind::ForecastReconstruct, Example::Reconstruct { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("example does not match task {}", cfg.task)))
    }
}

/// Loss of one example, forward pass only.
fn sample_loss(cfg: &ModelConfig, params: &ParamSet, ex: &Example) -> Result<f64> {
    check_kind(cfg, ex)?;
    let p = cfg.patch_size;
    let encode = |img: &GrayImage, mask: Option<&ForecastMask>| -> Result<Matrix> {
        let seq = to_patches(img, p)?;
        let e = forward_embed(&seq, params, mask)?;
        Ok(mid_forward(cfg, params, &e)?.0)
    };
    let loss = match ex {
        Example::Classify { images, label } => {
            let tokens = images.iter().map(|i| encode(i, None)).collect::<Result<Vec<_>>>()?;
            cross_entropy(&forward_classify(&tokens, params)?, *label)?
        }
        Example::Forecast { image, target } => {
            let f = forward_forecast_linear(&encode(image, None)?, params, target.len())?;
            f.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64
        }
        Example::Reconstruct { input, target, mask } => {
            let seq = to_patches(input, p)?;
            let out = forward_reconstruct(&seq, mask, params, cfg)?;
            masked_mse(&out, &to_patches(target, p)?, mask)?
        }
    };
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(loss)
}

/// Mean loss over `batch`, forward pass only.
pub fn batch_loss(cfg: &ModelConfig, batch: &[Example], params: &ParamSet) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for ex in batch {
        total += sample_loss(cfg, params, ex)?;
    }
    Ok(total / batch.len() as f64)
}

struct Encoded {
    x: Matrix,
    masked: Vec<bool>,
    e: Matrix,
    attn: Option<AttnCache>,
    h: Matrix,
}

fn encode_cached(cfg: &ModelConfig, params: &ParamSet, img: &GrayImage, masked: Vec<bool>) -> Result<Encoded> {
    let seq = to_patches(img, cfg.patch_size)?;
    let e = embed(&seq, params, &masked)?;
    let (h, attn) = mid_forward(cfg, params, &e)?;
    Ok(Encoded {
        x: Matrix::from_rows(&seq.patches),
        masked,
        e,
        attn,
        h,
    })
}

/// Propagates `dh` (gradient w.r.t. the encoder output) into `grads`.
fn encode_backward(cfg: &ModelConfig, params: &ParamSet, enc: &Encoded, dh: &Matrix, grads: &mut GradSet) {
    let (n, d) = (enc.e.rows, enc.e.cols);
    let de = match &enc.attn {
        None => {
            enc.e.add_t_matmul_into(dh, grads.data_mut("mixer.weight"));
            dh.add_col_sums_into(grads.data_mut("mixer.bias"));
            dh.matmul_t(&params["mixer.weight"].data, d)
        }
        Some(c) => attention_backward(cfg, params, enc, c, dh, grads),
    };
    // Embedding and positional terms.
    let dpos = grads.data_mut("pos_embed");
    for (g, x) in dpos.iter_mut().zip(&de.data) {
        *g += x;
    }
    let mut de_unmasked = de.clone();
    if enc.masked.iter().any(|&m| m) {
        let dtok = grads.data_mut("mask_token");
        for i in (0..n).filter(|&i| enc.masked[i]) {
            for (g, x) in dtok.iter_mut().zip(de.row(i)) {
                *g += x;
            }
            de_unmasked.row_mut(i).fill(0.0);
        }
    }
    enc.x.add_t_matmul_into(&de_unmasked, grads.data_mut("embed.weight"));
    de_unmasked.add_col_sums_into(grads.data_mut("embed.bias"));
}

fn attention_backward(
    cfg: &ModelConfig,
    params: &ParamSet,
    enc: &Encoded,
    c: &AttnCache,
    dh: &Matrix,
    grads: &mut GradSet,
) -> Matrix {
    let (n, d) = (enc.e.rows, enc.e.cols);
    let heads = cfg.num_heads;
    let hd = d / heads;
    let scale = 1.0 / (hd as f64).sqrt();

    // Layer norm.
    let gamma = &params["norm.scale"].data;
    {
        let dg = grads.data_mut("norm.scale");
        for i in 0..n {
            for (col, g) in dg.iter_mut().enumerate() {
                *g += dh.get(i, col) * c.xhat.get(i, col);
            }
        }
    }
    dh.add_col_sums_into(grads.data_mut("norm.shift"));
    let mut dr = Matrix::zeros(n, d);
    for i in 0..n {
        let dxhat: Vec<f64> = dh.row(i).iter().zip(gamma).map(|(a, g)| a * g).collect();
        let xh = c.xhat.row(i);
        let mean_dx = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx_xh = dot(&dxhat, xh) / d as f64;
        for (col, out) in dr.row_mut(i).iter_mut().enumerate() {
            *out = c.inv_std[i] * (dxhat[col] - mean_dx - xh[col] * mean_dx_xh);
        }
    }

    // Residual branch and output projection.
    let mut de = dr.clone();
    c.o.add_t_matmul_into(&dr, grads.data_mut("attn.out"));
    let d_o = dr.matmul_t(&params["attn.out"].data, d);

    let mut dq = Matrix::zeros(n, d);
    let mut dk = Matrix::zeros(n, d);
    let mut dv = Matrix::zeros(n, d);
    for h in 0..heads {
        let cols = h * hd..(h + 1) * hd;
        let a = &c.weights[h];
        for i in 0..n {
            let doi = &d_o.row(i)[cols.clone()];
            let da: Vec<f64> = (0..n).map(|j| dot(doi, &c.v.row(j)[cols.clone()])).collect();
            let arow = a.row(i);
            let inner = dot(arow, &da);
            for j in 0..n {
                let aij = arow[j];
                // dV_j += a_ij · dO_i
                for (dst, &g) in dv.row_mut(j)[cols.clone()].iter_mut().zip(doi) {
                    *dst += aij * g;
                }
                let ds = aij * (da[j] - inner) * scale;
                if ds == 0.0 {
                    continue;
                }
                for t in cols.clone() {
                    dq.data[i * d + t] += ds * c.k.get(j, t);
                    dk.data[j * d + t] += ds * c.q.get(i, t);
                }
            }
        }
    }
    for (name, g) in [("attn.query", &dq), ("attn.key", &dk), ("attn.value", &dv)] {
        enc.e.add_t_matmul_into(g, grads.data_mut(name));
        de.add_assign(&g.matmul_t(&params[name].data, d));
    }
    de
}

/// Accumulates one example's gradient into `grads` and returns its loss.
fn sample_backward(cfg: &ModelConfig, params: &ParamSet, ex: &Example, grads: &mut GradSet) -> Result<f64> {
    check_kind(cfg, ex)?;
    let n = cfg.num_patches();
    let loss = match ex {
        Example::Classify { images, label } => {
            let encs = images
                .iter()
                .map(|img| encode_cached(cfg, params, img, vec![false; n]))
                .collect::<Result<Vec<_>>>()?;
            let hs: Vec<Matrix> = encs.iter().map(|e| e.h.clone()).collect();
            let pooled = pool_concat(&hs, params)?;
            let logits = forward_classify(&hs, params)?;
            let loss = cross_entropy(&logits, *label)?;
            let mut dlogits = softmax(&logits);
            dlogits[*label] -= 1.0;
            let w = &params["head.weight"];
            let classes = w.shape[1];
            {
                let dw = grads.data_mut("head.weight");
                for (k, &p) in pooled.iter().enumerate() {
                    for (g, &dl) in dw[k * classes..(k + 1) * classes].iter_mut().zip(&dlogits) {
                        *g += p * dl;
                    }
                }
            }
            for (g, dl) in grads.data_mut("head.bias").iter_mut().zip(&dlogits) {
                *g += dl;
            }
            let d = cfg.embed_dim;
            for (v, enc) in encs.iter().enumerate() {
                let mut dh = Matrix::zeros(n, d);
                for col in 0..d {
                    let k = v * d + col;
                    let dp = dot(&w.data[k * classes..(k + 1) * classes], &dlogits) / n as f64;
                    for i in 0..n {
                        dh.data[i * d + col] = dp;
                    }
                }
                encode_backward(cfg, params, enc, &dh, grads);
            }
            loss
        }
        Example::Forecast { image, target } => {
            let enc = encode_cached(cfg, params, image, vec![false; n])?;
            let out = forward_forecast_linear(&enc.h, params, target.len())?;
            let t = target.len() as f64;
            let loss = out.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / t;
            let dout: Vec<f64> = out.iter().zip(target).map(|(a, b)| 2.0 * (a - b) / t).collect();
            let horizon = target.len();
            {
                let dw = grads.data_mut("head.weight");
                for (k, &hv) in enc.h.data.iter().enumerate() {
                    if hv == 0.0 {
                        continue;
                    }
                    for (g, &df) in dw[k * horizon..(k + 1) * horizon].iter_mut().zip(&dout) {
                        *g += hv * df;
                    }
                }
            }
            for (g, df) in grads.data_mut("head.bias").iter_mut().zip(&dout) {
                *g += df;
            }
            let w = &params["head.weight"].data;
            let dh_data: Vec<f64> = (0..enc.h.data.len())
                .map(|k| dot(&w[k * horizon..(k + 1) * horizon], &dout))
                .collect();
            let dh = Matrix::from_vec(enc.h.rows, enc.h.cols, dh_data);
            encode_backward(cfg, params, &enc, &dh, grads);
            loss
        }
        Example::Reconstruct { input, target, mask } => {
            if mask.grid != (cfg.grid(), cfg.grid()) {
                return Err(Error::ShapeMismatch("mask grid does not match model".into()));
            }
            let flags = mask.flags();
            let enc = encode_cached(cfg, params, input, flags.clone())?;
            let y = decode(&enc.h, params);
            let tgt = to_patches(target, cfg.patch_size)?;
            let f = cfg.patch_dim();
            let count = mask.masked_patch_indices.len() * f;
            if count == 0 {
                return Err(Error::EmptyMask);
            }
            let mut loss = 0.0;
            let mut dy = Matrix::zeros(n, f);
            for &i in &mask.masked_patch_indices {
                for (k, (&a, &b)) in y.row(i).iter().zip(&tgt.patches[i]).enumerate() {
                    loss += (a - b) * (a - b);
                    dy.data[i * f + k] = 2.0 * (a - b) / count as f64;
                }
            }
            loss /= count as f64;
            enc.h.add_t_matmul_into(&dy, grads.data_mut("decoder.weight"));
            dy.add_col_sums_into(grads.data_mut("decoder.bias"));
            let dh = dy.matmul_t(&params["decoder.weight"].data, cfg.embed_dim);
            encode_backward(cfg, params, &enc, &dh, grads);
            loss
        }
    };
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(loss)
}

/// Mean loss of `batch` and its exact gradient.
///
/// Reconstruction losses cover masked patches only. Per-chunk gradients are
/// computed through `exec` and summed in chunk order.
pub fn backward(cfg: &ModelConfig, batch: &[Example], params: &ParamSet, exec: Exec) -> Result<(f64, GradSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let chunks: Vec<&[Example]> = batch.chunks(GRAD_CHUNK).collect();
    let partials = exec::map_indexed(exec, &chunks, |_, chunk| -> Result<(f64, GradSet)> {
        let mut g = params.zeros_like();
        let mut loss = 0.0;
        for ex in chunk.iter() {
            loss += sample_backward(cfg, params, ex, &mut g)?;
        }
        Ok((loss, g))
    });
    let mut total = 0.0;
    let mut grads: Option<GradSet> = None;
    for part in partials {
        let (l, g) = part?;
        total += l;
        match grads.as_mut() {
            None => grads = Some(g),
            Some(acc) => acc.add_scaled(&g, 1.0),
        }
    }
    let mut grads = grads.expect("non-empty batch");
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((total * inv, grads))
}

/// Denominator floor of [`max_relative_gradient_error`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the analytic gradient and a
/// central finite difference with the given `step`, over every scalar
/// parameter. Relative error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn max_relative_gradient_error(
    cfg: &ModelConfig,
    batch: &[Example],
    params: &ParamSet,
    step: f64,
) -> Result<f64> {
    let (_, grads) = backward(cfg, batch, params, Exec::Sequential)?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        for k in 0..params[name.as_str()].len() {
            let orig = params[name.as_str()].data[k];
            probe.data_mut(name)[k] = orig + step;
            let up = batch_loss(cfg, batch, &probe)?;
            probe.data_mut(name)[k] = orig - step;
            let down = batch_loss(cfg, batch, &probe)?;
            probe.data_mut(name)[k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads[name.as_str()].data[k];
            let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// A small random batch of the kind `cfg.task` trains on.
pub fn random_batch(cfg: &ModelConfig, size: usize, seed: u64) -> Result<Vec<Example>> {
    use rand::Rng;
    let mut rng = seeded_rng(seed);
    let s = cfg.image_size;
    let img = |rng: &mut crate::Rng| {
        GrayImage::new(s, s, (0..s * s).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let mut out = Vec::with_capacity(size);
    for _ in 0..size {
        let ex = match cfg.task {
            TaskKind::Classify => Example::Classify {
                images: (0..cfg.num_images).map(|_| img(&mut rng)).collect::<Result<_>>()?,
                label: rng.random_range(0..cfg.num_classes),
            },
            TaskKind::ForecastLinear => Example::Forecast {
                image: img(&mut rng)?,
                target: (0..cfg.horizon).map(|_| rng.random_range(-1.0..1.0)).collect(),
            },
            TaskKind::ForecastReconstruct => {
                let g = cfg.grid();
                let lookback = rng.random_range(1..g.max(2));
                Example::Reconstruct {
                    input: img(&mut rng)?,
                    target: img(&mut rng)?,
                    mask: crate::alignment::build_forecast_mask(1, lookback, g - lookback.min(g - 1), s, cfg.patch_size)?,
                }
            }
        };
        out.push(ex);
    }
    Ok(out)
}
