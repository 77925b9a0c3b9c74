//! Forward evaluation: single cells, stacked sequences and the cached
//! variant consumed by backpropagation.

use nalgebra::DVector;

use super::params::{Arch, Dense, GruLayer, Layer, LstmLayer, ModelParams};
use crate::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_len(name: &str, v: &DVector<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::shape_mismatch(format!(
            "{name} has length {}, expected {expected}",
            v.len()
        )));
    }
    Ok(())
}

/// One GRU step:
/// `z = sig(Wz x + Uz h + bz)`, `r = sig(Wr x + Ur h + br)`,
/// `hc = tanh(Wh x + Uh (r.h) + bh)`, `h' = (1-z).h + z.hc`.
pub fn gru_cell(x: &DVector<f64>, h_prev: &DVector<f64>, p: &GruLayer) -> Result<DVector<f64>> {
    check_len("input", x, p.wz.ncols())?;
    check_len("hidden", h_prev, p.uz.ncols())?;
    Ok(gru_cell_cached(x, h_prev, p).h)
}

pub(crate) struct GruStepCache {
    pub x: DVector<f64>,
    pub h_prev: DVector<f64>,
    pub z: DVector<f64>,
    pub r: DVector<f64>,
    pub h_cand: DVector<f64>,
    pub h: DVector<f64>,
}

pub(crate) fn gru_cell_cached(x: &DVector<f64>, h_prev: &DVector<f64>, p: &GruLayer) -> GruStepCache {
    let z = (&p.wz * x + &p.uz * h_prev + &p.bz).map(sigmoid);
    let r = (&p.wr * x + &p.ur * h_prev + &p.br).map(sigmoid);
    let rh = r.component_mul(h_prev);
    let h_cand = (&p.wh * x + &p.uh * rh + &p.bh).map(f64::tanh);
    let ones = DVector::from_element(z.len(), 1.0);
    let h = (ones - &z).component_mul(h_prev) + z.component_mul(&h_cand);
    GruStepCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        z,
        r,
        h_cand,
        h,
    }
}

/// One LSTM step with input, forget and output gates; returns (hidden, cell).
pub fn lstm_cell(
    x: &DVector<f64>,
    h_prev: &DVector<f64>,
    c_prev: &DVector<f64>,
    p: &LstmLayer,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("input", x, p.wi.ncols())?;
    check_len("hidden", h_prev, p.ui.ncols())?;
    check_len("cell", c_prev, p.ui.ncols())?;
    let cache = lstm_cell_cached(x, h_prev, c_prev, p);
    Ok((cache.h, cache.c))
}

pub(crate) struct LstmStepCache {
    pub x: DVector<f64>,
    pub h_prev: DVector<f64>,
    pub c_prev: DVector<f64>,
    pub i: DVector<f64>,
    pub f: DVector<f64>,
    pub o: DVector<f64>,
    pub g: DVector<f64>,
    pub c: DVector<f64>,
    pub tanh_c: DVector<f64>,
    pub h: DVector<f64>,
}

pub(crate) fn lstm_cell_cached(
    x: &DVector<f64>,
    h_prev: &DVector<f64>,
    c_prev: &DVector<f64>,
    p: &LstmLayer,
) -> LstmStepCache {
    let i = (&p.wi * x + &p.ui * h_prev + &p.bi).map(sigmoid);
    let f = (&p.wf * x + &p.uf * h_prev + &p.bf).map(sigmoid);
    let o = (&p.wo * x + &p.uo * h_prev + &p.bo).map(sigmoid);
    let g = (&p.wg * x + &p.ug * h_prev + &p.bg).map(f64::tanh);
    let c = f.component_mul(c_prev) + i.component_mul(&g);
    let tanh_c = c.map(f64::tanh);
    let h = o.component_mul(&tanh_c);
    LstmStepCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        h,
    }
}

pub(crate) struct DenseCache {
    pub x: DVector<f64>,
    pub out: DVector<f64>,
}

pub(crate) enum LayerCache {
    Dense(DenseCache),
    Gru(Vec<GruStepCache>),
    Lstm(Vec<LstmStepCache>),
}

pub(crate) struct ForwardCache {
    pub layers: Vec<LayerCache>,
    pub last_hidden: DVector<f64>,
    pub output: DVector<f64>,
}

fn dense_forward(d: &Dense, x: &DVector<f64>, tanh_act: bool) -> DVector<f64> {
    let a = &d.w * x + &d.b;
    if tanh_act {
        a.map(f64::tanh)
    } else {
        a
    }
}

/// Run a whole input window through the stacked network. Hidden states are
/// zero-initialized per call (stateless across windows). Layer k consumes
/// layer k-1's hidden sequence; the linear head reads the top layer's last
/// hidden state.
pub fn forward_sequence(model: &ModelParams, sequence: &[DVector<f64>]) -> Result<DVector<f64>> {
    Ok(forward_cached(model, sequence)?.output)
}

pub(crate) fn forward_cached(model: &ModelParams, sequence: &[DVector<f64>]) -> Result<ForwardCache> {
    if sequence.len() != model.seq_len {
        return Err(Error::invalid_argument(format!(
            "sequence length {} does not match model window {}",
            sequence.len(),
            model.seq_len
        )));
    }
    for step in sequence {
        check_len("sequence step", step, model.input_size)?;
    }
    if model.arch == Arch::Fnn && sequence.len() != 1 {
        return Err(Error::invalid_argument("FNN consumes a single input vector"));
    }

    let mut layer_caches = Vec::with_capacity(model.layers.len());
    let mut inputs: Vec<DVector<f64>> = sequence.to_vec();
    for layer in &model.layers {
        match layer {
            Layer::Dense(d) => {
                let out = dense_forward(d, &inputs[0], true);
                layer_caches.push(LayerCache::Dense(DenseCache {
                    x: inputs[0].clone(),
                    out: out.clone(),
                }));
                inputs = vec![out];
            }
            Layer::Gru(g) => {
                let mut h = DVector::zeros(model.hidden_size);
                let mut steps = Vec::with_capacity(inputs.len());
                let mut outs = Vec::with_capacity(inputs.len());
                for x in &inputs {
                    let cache = gru_cell_cached(x, &h, g);
                    h = cache.h.clone();
                    outs.push(cache.h.clone());
                    steps.push(cache);
                }
                layer_caches.push(LayerCache::Gru(steps));
                inputs = outs;
            }
            Layer::Lstm(l) => {
                let mut h = DVector::zeros(model.hidden_size);
                let mut c = DVector::zeros(model.hidden_size);
                let mut steps = Vec::with_capacity(inputs.len());
                let mut outs = Vec::with_capacity(inputs.len());
                for x in &inputs {
                    let cache = lstm_cell_cached(x, &h, &c, l);
                    h = cache.h.clone();
                    c = cache.c.clone();
                    outs.push(cache.h.clone());
                    steps.push(cache);
                }
                layer_caches.push(LayerCache::Lstm(steps));
                inputs = outs;
            }
        }
    }
    let last_hidden = inputs.last().expect("non-empty sequence").clone();
    let output = dense_forward(&model.head, &last_hidden, false);
    Ok(ForwardCache {
        layers: layer_caches,
        last_hidden,
        output,
    })
}

/// Normalized-space inference on raw (unnormalized) inputs: normalize each
/// step, run the network, denormalize the output.
pub fn infer(model: &ModelParams, raw_sequence: &[DVector<f64>]) -> Result<DVector<f64>> {
    let normalized: Vec<DVector<f64>> = raw_sequence
        .iter()
        .map(|x| model.norm.normalize_input(x))
        .collect();
    let out = forward_sequence(model, &normalized)?;
    Ok(model.norm.denormalize_output(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{Arch, ModelParams};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn gru_zero(hidden: usize, input: usize) -> GruLayer {
        GruLayer::zeros(hidden, input)
    }

    #[test]
    fn gru_zero_weights_halves_hidden() {
        let p = gru_zero(4, 3);
        let x = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let h_prev = DVector::from_vec(vec![0.5, -1.0, 0.25, 2.0]);
        let h = gru_cell(&x, &h_prev, &p).unwrap();
        assert_relative_eq!(h, h_prev * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gru_scalar_hand_case() {
        // 1-dim cell, only Wh = 1: h = sig(0) * tanh(1) = 0.5 tanh(1).
        let mut p = gru_zero(1, 1);
        p.wh[(0, 0)] = 1.0;
        let h = gru_cell(
            &DVector::from_vec(vec![1.0]),
            &DVector::from_vec(vec![0.0]),
            &p,
        )
        .unwrap();
        assert_relative_eq!(h[0], 0.5 * 1f64.tanh(), epsilon = 1e-12);
        assert_relative_eq!(h[0], 0.380797, epsilon = 1e-6);
    }

    #[test]
    fn gru_matches_scalar_reimplementation() {
        // Straight-line scalar oracle over random weights.
        let model = ModelParams::init(Arch::Gru, 1, 3, 2, 1, 1, 7);
        let p = match &model.layers[0] {
            crate::nn::params::Layer::Gru(g) => g,
            _ => unreachable!(),
        };
        let x = DVector::from_vec(vec![0.4, -1.3]);
        let h_prev = DVector::from_vec(vec![0.2, -0.1, 0.7]);
        let h = gru_cell(&x, &h_prev, p).unwrap();
        for row in 0..3 {
            let dot = |m: &nalgebra::DMatrix<f64>, v: &DVector<f64>| -> f64 {
                (0..v.len()).map(|k| m[(row, k)] * v[k]).sum()
            };
            let z = sigmoid(dot(&p.wz, &x) + dot(&p.uz, &h_prev) + p.bz[row]);
            let r_full: Vec<f64> = (0..3)
                .map(|rr| {
                    let dotr = |m: &nalgebra::DMatrix<f64>, v: &DVector<f64>| -> f64 {
                        (0..v.len()).map(|k| m[(rr, k)] * v[k]).sum()
                    };
                    sigmoid(dotr(&p.wr, &x) + dotr(&p.ur, &h_prev) + p.br[rr])
                })
                .collect();
            let rh = DVector::from_fn(3, |k, _| r_full[k] * h_prev[k]);
            let hc = (dot(&p.wh, &x) + dot(&p.uh, &rh) + p.bh[row]).tanh();
            let expected = (1.0 - z) * h_prev[row] + z * hc;
            assert_relative_eq!(h[row], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn lstm_zero_weight_closed_forms() {
        let p = LstmLayer::zeros(1, 1);
        let x = DVector::from_vec(vec![0.0]);
        let (h, c) = lstm_cell(&x, &DVector::zeros(1), &DVector::zeros(1), &p).unwrap();
        assert_relative_eq!(h[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(c[0], 0.0, epsilon = 1e-15);

        let (h, c) = lstm_cell(&x, &DVector::zeros(1), &DVector::from_vec(vec![1.0]), &p).unwrap();
        assert_relative_eq!(c[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(h[0], 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(h[0], 0.231059, epsilon = 1e-6);
    }

    #[test]
    fn lstm_matches_scalar_reimplementation() {
        let model = ModelParams::init(Arch::Lstm, 1, 2, 2, 1, 1, 13);
        let p = match &model.layers[0] {
            crate::nn::params::Layer::Lstm(l) => l,
            _ => unreachable!(),
        };
        let x = DVector::from_vec(vec![-0.7, 0.3]);
        let h_prev = DVector::from_vec(vec![0.1, -0.4]);
        let c_prev = DVector::from_vec(vec![0.9, 0.2]);
        let (h, c) = lstm_cell(&x, &h_prev, &c_prev, p).unwrap();
        for row in 0..2 {
            let dot = |m: &nalgebra::DMatrix<f64>, v: &DVector<f64>| -> f64 {
                (0..v.len()).map(|k| m[(row, k)] * v[k]).sum()
            };
            let i = sigmoid(dot(&p.wi, &x) + dot(&p.ui, &h_prev) + p.bi[row]);
            let f = sigmoid(dot(&p.wf, &x) + dot(&p.uf, &h_prev) + p.bf[row]);
            let o = sigmoid(dot(&p.wo, &x) + dot(&p.uo, &h_prev) + p.bo[row]);
            let g = (dot(&p.wg, &x) + dot(&p.ug, &h_prev) + p.bg[row]).tanh();
            let ce = f * c_prev[row] + i * g;
            assert_relative_eq!(c[row], ce, epsilon = 1e-12);
            assert_relative_eq!(h[row], o * ce.tanh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = gru_zero(4, 3);
        let bad_x = DVector::zeros(2);
        assert!(gru_cell(&bad_x, &DVector::zeros(4), &p).is_err());
        assert!(gru_cell(&DVector::zeros(3), &DVector::zeros(5), &p).is_err());
    }

    #[test]
    fn zero_weight_network_outputs_head_bias() {
        let mut model = ModelParams::zeros(Arch::Gru, 2, 4, 3, 2, 5);
        model.head.b = DVector::from_vec(vec![0.7, -0.3]);
        let seq: Vec<DVector<f64>> = (0..5).map(|_| DVector::from_element(3, 1.0)).collect();
        let out = forward_sequence(&model, &seq).unwrap();
        assert_relative_eq!(out, DVector::from_vec(vec![0.7, -0.3]), epsilon = 1e-15);
    }

    #[test]
    fn default_shape_check() {
        let model = ModelParams::default_recurrent(Arch::Gru, 3);
        let seq: Vec<DVector<f64>> = (0..5).map(|_| DVector::zeros(12)).collect();
        let out = forward_sequence(&model, &seq).unwrap();
        assert_eq!(out.len(), 6);
        // Wrong window length is rejected.
        assert!(forward_sequence(&model, &seq[..4]).is_err());
    }

    #[test]
    fn gru_hidden_stays_in_unit_box() {
        // Convex combination of h_prev in [-1,1] and tanh candidate.
        let mut rng = crate::seed::rng_from_seed(55);
        use rand::Rng;
        for _ in 0..50 {
            let model = ModelParams::init(Arch::Gru, 1, 6, 4, 1, 1, rng.gen());
            let p = match &model.layers[0] {
                crate::nn::params::Layer::Gru(g) => g,
                _ => unreachable!(),
            };
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-3.0..3.0));
            let h_prev = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let h = gru_cell(&x, &h_prev, p).unwrap();
            assert!(h.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
