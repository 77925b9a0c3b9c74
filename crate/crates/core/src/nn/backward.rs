//! Backpropagation through time for the stacked GRU/LSTM/dense networks.
//!
//! Loss convention: `L = mean over batch of 0.5 * |y - target|^2` in
//! normalized units, so the output-head bias gradient is exactly the mean
//! residual.

use nalgebra::{DMatrix, DVector};

use super::forward::{forward_cached, LayerCache};
use super::params::{Dense, GruLayer, Layer,LstmLayer, ModelParams, Tensor, TensorMut};
use crate::Result;

/// Parameter gradients, mirroring the model's tensor layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    pub head: Dense,
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => Layer::Dense(Dense::zeros(d.w.nrows(), d.w.ncols())),
                Layer::Gru(g) => Layer::Gru(GruLayer::zeros(g.uz.nrows(), g.wz.ncols())),
                Layer::Lstm(l) => Layer::Lstm(LstmLayer::zeros(l.ui.nrows(), l.wi.ncols())),
            })
            .collect();
        Gradients {
            layers,
            head: Dense::zeros(model.head.w.nrows(), model.head.w.ncols()),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_tensor_mut(&mut |t: TensorMut<'_>| {
            for x in t.into_slice() {
                *x *= s;
            }
        });
    }

    pub(crate) fn for_each_tensor<'a>(&'a self, f: &mut impl FnMut(Tensor<'a>)) {
        for layer in &self.layers {
            super::params::for_layer_tensor(layer, f);
        }
        f(Tensor::Weight(&self.head.w));
        f(Tensor::Bias(&self.head.b));
    }

    pub(crate) fn for_each_tensor_mut<'a>(&'a mut self, f: &mut impl FnMut(TensorMut<'a>)) {
        for layer in &mut self.layers {
            super::params::for_layer_tensor_mut(layer, f);
        }
        f(TensorMut::Weight(&mut self.head.w));
        f(TensorMut::Bias(&mut self.head.b));
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_tensor(&mut |t: Tensor<'_>| out.extend_from_slice(t.as_slice()));
        out
    }
}

fn outer_add(acc: &mut DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) {
    acc.ger(1.0, a, b, 1.0);
}

/// Accumulate gradients for one (sequence, target) pair; returns the sample
/// loss `0.5 * |y - target|^2`. The caller divides by the batch size.
pub fn accumulate_sample(
    model: &ModelParams,
    sequence: &[DVector<f64>],
    target: &DVector<f64>,
    grads: &mut Gradients,
) -> Result<f64> {
    let cache = forward_cached(model, sequence)?;
    let residual = &cache.output - target;
    let loss = 0.5 * residual.norm_squared();

    // Linear head.
    outer_add(&mut grads.head.w, &residual, &cache.last_hidden);
    grads.head.b += &residual;

    let t_len = sequence.len();
    // Incoming output-side gradients for the top layer: only the last step
    // receives signal from the head.
    let mut dout: Vec<DVector<f64>> = (0..t_len)
        .map(|t| {
            if t + 1 == t_len {
                model.head.w.transpose() * &residual
            } else {
                DVector::zeros(model.hidden_size)
            }
        })
        .collect();

    for (layer, layer_cache, grad_layer) in itertools_rev(model, &cache, grads) {
        match (layer, layer_cache, grad_layer) {
            (Layer::Dense(d), LayerCache::Dense(c), Layer::Dense(gd)) => {
                let da = dout[0].component_mul(&c.out.map(|y| 1.0 - y * y));
                outer_add(&mut gd.w, &da, &c.x);
                gd.b += &da;
                dout = vec![d.w.transpose() * da];
            }
            (Layer::Gru(p), LayerCache::Gru(steps), Layer::Gru(gp)) => {
                let mut dx_out = vec![DVector::zeros(p.wz.ncols()); steps.len()];
                let mut carry = DVector::zeros(p.uz.nrows());
                for t in (0..steps.len()).rev() {
                    let s = &steps[t];
                    let dh = &dout[t] + &carry;
                    let dz = dh.component_mul(&(&s.h_cand - &s.h_prev));
                    let dhc = dh.component_mul(&s.z);
                    let mut dh_prev =
                        dh.component_mul(&s.z.map(|z| 1.0 - z));

                    let da_h = dhc.component_mul(&s.h_cand.map(|y| 1.0 - y * y));
                    let rh = s.r.component_mul(&s.h_prev);
                    outer_add(&mut gp.wh, &da_h, &s.x);
                    outer_add(&mut gp.uh, &da_h, &rh);
                    gp.bh += &da_h;
                    let d_rh = p.uh.transpose() * &da_h;
                    let dr = d_rh.component_mul(&s.h_prev);
                    dh_prev += d_rh.component_mul(&s.r);

                    let da_r = dr.component_mul(&s.r.map(|r| r * (1.0 - r)));
                    outer_add(&mut gp.wr, &da_r, &s.x);
                    outer_add(&mut gp.ur, &da_r, &s.h_prev);
                    gp.br += &da_r;
                    dh_prev += p.ur.transpose() * &da_r;

                    let da_z = dz.component_mul(&s.z.map(|z| z * (1.0 - z)));
                    outer_add(&mut gp.wz, &da_z, &s.x);
                    outer_add(&mut gp.uz, &da_z, &s.h_prev);
                    gp.bz += &da_z;
                    dh_prev += p.uz.transpose() * &da_z;

                    dx_out[t] = p.wh.transpose() * &da_h
                        + p.wr.transpose() * &da_r
                        + p.wz.transpose() * &da_z;
                    carry = dh_prev;
                }
                dout = dx_out;
            }
            (Layer::Lstm(p), LayerCache::Lstm(steps), Layer::Lstm(gp)) => {
                let mut dx_out = vec![DVector::zeros(p.wi.ncols()); steps.len()];
                let mut carry_h = DVector::zeros(p.ui.nrows());
                let mut carry_c = DVector::zeros(p.ui.nrows());
                for t in (0..steps.len()).rev() {
                    let s = &steps[t];
                    let dh = &dout[t] + &carry_h;
                    let d_o = dh.component_mul(&s.tanh_c);
                    let dc = dh
                        .component_mul(&s.o)
                        .component_mul(&s.tanh_c.map(|y| 1.0 - y * y))
                        + &carry_c;
                    let d_f = dc.component_mul(&s.c_prev);
                    let d_i = dc.component_mul(&s.g);
                    let d_g = dc.component_mul(&s.i);
                    carry_c = dc.component_mul(&s.f);

                    let da_i = d_i.component_mul(&s.i.map(|v| v * (1.0 - v)));
                    let da_f = d_f.component_mul(&s.f.map(|v| v * (1.0 - v)));
                    let da_o = d_o.component_mul(&s.o.map(|v| v * (1.0 - v)));
                    let da_g = d_g.component_mul(&s.g.map(|v| 1.0 - v * v));

                    outer_add(&mut gp.wi, &da_i, &s.x);
                    outer_add(&mut gp.ui, &da_i, &s.h_prev);
                    gp.bi += &da_i;
                    outer_add(&mut gp.wf, &da_f, &s.x);
                    outer_add(&mut gp.uf, &da_f, &s.h_prev);
                    gp.bf += &da_f;
                    outer_add(&mut gp.wo, &da_o, &s.x);
                    outer_add(&mut gp.uo, &da_o, &s.h_prev);
                    gp.bo += &da_o;
                    outer_add(&mut gp.wg, &da_g, &s.x);
                    outer_add(&mut gp.ug, &da_g, &s.h_prev);
                    gp.bg += &da_g;

                    carry_h = p.ui.transpose() * &da_i
                        + p.uf.transpose() * &da_f
                        + p.uo.transpose() * &da_o
                        + p.ug.transpose() * &da_g;
                    dx_out[t] = p.wi.transpose() * &da_i
                        + p.wf.transpose() * &da_f
                        + p.wo.transpose() * &da_o
                        + p.wg.transpose() * &da_g;
                }
                dout = dx_out;
            }
            _ => unreachable!("cache layout mirrors the model"),
        }
    }
    Ok(loss)
}

/// Zip (model layer, cache layer, gradient layer) from top to bottom.
fn itertools_rev<'a>(
    model: &'a ModelParams,
    cache: &'a super::forward::ForwardCache,
    grads: &'a mut Gradients,
) -> impl Iterator<Item = (&'a Layer, &'a LayerCache, &'a mut Layer)> {
    model
        .layers
        .iter()
        .rev()
        .zip(cache.layers.iter().rev())
        .zip(grads.layers.iter_mut().rev())
        .map(|((l, c), g)| (l, c, g))
}

/// Mean-loss gradients over a batch. Returns (gradients, mean loss).
pub fn backward_batch(
    model: &ModelParams,
    batch: &[(&[DVector<f64>], &DVector<f64>)],
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(crate::Error::invalid_argument("empty batch"));
    }
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for (seq, target) in batch {
        loss += accumulate_sample(model, seq, target, &mut grads)?;
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((grads, loss * inv))
}
