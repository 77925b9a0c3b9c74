//! Model parameters: architecture tag, per-layer tensors, output head,
//! normalization statistics and training metadata.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seed::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Fnn,
    Lstm,
    Gru,
}

impl Arch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Fnn => "fnn",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fnn" => Ok(Arch::Fnn),
            "lstm" => Ok(Arch::Lstm),
            "gru" => Ok(Arch::Gru),
            other => Err(Error::invalid_argument(format!("unknown arch '{other}'"))),
        }
    }
}

/// Linear map with bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            w: DMatrix::zeros(out, inp),
            b: DVector::zeros(out),
        }
    }
}

/// GRU gate tensors: update (z), reset (r), candidate (h).
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub wz: DMatrix<f64>,
    pub uz: DMatrix<f64>,
    pub bz: DVector<f64>,
    pub wr: DMatrix<f64>,
    pub ur: DMatrix<f64>,
    pub br: DVector<f64>,
    pub wh: DMatrix<f64>,
    pub uh: DMatrix<f64>,
    pub bh: DVector<f64>,
}

impl GruLayer {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruLayer {
            wz: DMatrix::zeros(hidden, input),
            uz: DMatrix::zeros(hidden, hidden),
            bz: DVector::zeros(hidden),
            wr: DMatrix::zeros(hidden, input),
            ur: DMatrix::zeros(hidden, hidden),
            br: DVector::zeros(hidden),
            wh: DMatrix::zeros(hidden, input),
            uh: DMatrix::zeros(hidden, hidden),
            bh: DVector::zeros(hidden),
        }
    }
}

/// LSTM gate tensors: input (i), forget (f), output (o), candidate (g).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub wi: DMatrix<f64>,
    pub ui: DMatrix<f64>,
    pub bi: DVector<f64>,
    pub wf: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub bf: DVector<f64>,
    pub wo: DMatrix<f64>,
    pub uo: DMatrix<f64>,
    pub bo: DVector<f64>,
    pub wg: DMatrix<f64>,
    pub ug: DMatrix<f64>,
    pub bg: DVector<f64>,
}

impl LstmLayer {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmLayer {
            wi: DMatrix::zeros(hidden, input),
            ui: DMatrix::zeros(hidden, hidden),
            bi: DVector::zeros(hidden),
            wf: DMatrix::zeros(hidden, input),
            uf: DMatrix::zeros(hidden, hidden),
            bf: DVector::zeros(hidden),
            wo: DMatrix::zeros(hidden, input),
            uo: DMatrix::zeros(hidden, hidden),
            bo: DVector::zeros(hidden),
            wg: DMatrix::zeros(hidden, input),
            ug: DMatrix::zeros(hidden, hidden),
            bg: DVector::zeros(hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Gru(GruLayer),
    Lstm(LstmLayer),
}

/// Per-feature z-score statistics for model inputs (one step vector) and
/// outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub in_mean: DVector<f64>,
    pub in_std: DVector<f64>,
    pub out_mean: DVector<f64>,
    pub out_std: DVector<f64>,
}

impl Normalization {
    pub fn identity(input: usize, output: usize) -> Self {
        Normalization {
            in_mean: DVector::zeros(input),
            in_std: DVector::from_element(input, 1.0),
            out_mean: DVector::zeros(output),
            out_std: DVector::from_element(output, 1.0),
        }
    }

    /// Fit per-feature mean and standard deviation. Constant features get
    /// unit scale so mixed command channels cannot produce NaNs.
    pub fn fit(inputs: &[&DVector<f64>], outputs: &[&DVector<f64>]) -> Result<Self> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::invalid_argument("cannot fit normalization on empty data"));
        }
        let stats = |vs: &[&DVector<f64>]| {
            let dim = vs[0].len();
            let n = vs.len() as f64;
            let mut mean = DVector::zeros(dim);
            for v in vs {
                mean += *v;
            }
            mean /= n;
            let mut var = DVector::zeros(dim);
            for v in vs {
                let d = *v - &mean;
                var += d.component_mul(&d);
            }
            var /= n;
            let std = var.map(|x| {
                let s = x.sqrt();
                if s < 1e-9 {
                    1.0
                } else {
                    s
                }
            });
            (mean, std)
        };
        let (in_mean, in_std) = stats(inputs);
        let (out_mean, out_std) = stats(outputs);
        Ok(Normalization {
            in_mean,
            in_std,
            out_mean,
            out_std,
        })
    }

    pub fn normalize_input(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.in_mean).component_div(&self.in_std)
    }

    pub fn normalize_output(&self, y: &DVector<f64>) -> DVector<f64> {
        (y - &self.out_mean).component_div(&self.out_std)
    }

    pub fn denormalize_output(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.out_std) + &self.out_mean
    }
}

/// Training provenance stored with the weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub final_val_mae: f64,
}

impl Default for TrainMeta {
    fn default() -> Self {
        // epochs_run == 0 marks an untrained model.
        TrainMeta {
            seed: 0,
            epochs_run: 0,
            best_epoch: 0,
            final_train_loss: 0.0,
            final_val_loss: 0.0,
            final_val_mae: 0.0,
        }
    }
}

/// A complete model: stacked layers, linear output head, normalization
/// statistics and training metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub input_size: usize,
    pub hidden_size: usize,
    pub output_size: usize,
    /// Window length consumed per forward pass (1 for the FNN).
    pub seq_len: usize,
    pub layers: Vec<Layer>,
    pub head: Dense,
    pub norm: Normalization,
    pub meta: TrainMeta,
}

impl ModelParams {
    /// Zero-initialized model of the given shape.
    pub fn zeros(arch: Arch, layers: usize, hidden: usize, input: usize, output: usize, seq_len: usize) -> Self {
        let mut stack = Vec::with_capacity(layers);
        for l in 0..layers {
            let inp = if l == 0 { input } else { hidden };
            stack.push(match arch {
                Arch::Fnn => Layer::Dense(Dense::zeros(hidden, inp)),
                Arch::Gru => Layer::Gru(GruLayer::zeros(hidden, inp)),
                Arch::Lstm => Layer::Lstm(LstmLayer::zeros(hidden, inp)),
            });
        }
        ModelParams {
            arch,
            input_size: input,
            hidden_size: hidden,
            output_size: output,
            seq_len,
            layers: stack,
            head: Dense::zeros(output, hidden),
            norm: Normalization::identity(input, output),
            meta: TrainMeta::default(),
        }
    }

    /// Seeded init: weights uniform in +-1/sqrt(fan_in), biases zero.
    pub fn init(arch: Arch, layers: usize, hidden: usize, input: usize, output: usize, seq_len: usize, seed: u64) -> Self {
        let mut model = Self::zeros(arch, layers, hidden, input, output, seq_len);
        let mut rng = rng_from_seed(seed);
        model.for_each_tensor_mut(&mut |t: TensorMut<'_>| {
            if let TensorMut::Weight(m) = t {
                let bound = 1.0 / (m.ncols() as f64).sqrt();
                fill_uniform(m, bound, &mut rng);
            }
        });
        model
    }

    /// Paper-scale recurrent default: 4 layers x 128 hidden, 12 -> 6,
    /// window 5.
    pub fn default_recurrent(arch: Arch, seed: u64) -> Self {
        Self::init(arch, 4, 128, 12, 6, 5, seed)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// All trainable scalars, head included.
    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(&mut |t: Tensor<'_>| n += t.len());
        n
    }

    /// Trainable scalars in the stacked layers only (head excluded).
    pub fn layer_parameter_count(&self) -> usize {
        let mut n = 0;
        for layer in &self.layers {
            for_layer_tensor(layer, &mut |t| n += t.len());
        }
        n
    }

    pub(crate) fn for_each_tensor<'a>(&'a self, f: &mut impl FnMut(Tensor<'a>)) {
        for layer in &self.layers {
            for_layer_tensor(layer, f);
        }
        f(Tensor::Weight(&self.head.w));
        f(Tensor::Bias(&self.head.b));
    }

    pub(crate) fn for_each_tensor_mut<'a>(&'a mut self, f: &mut impl FnMut(TensorMut<'a>)) {
        for layer in &mut self.layers {
            for_layer_tensor_mut(layer, f);
        }
        f(TensorMut::Weight(&mut self.head.w));
        f(TensorMut::Bias(&mut self.head.b));
    }

    /// Flatten every parameter into one vector (visitation order).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        self.for_each_tensor(&mut |t: Tensor<'_>| out.extend_from_slice(t.as_slice()));
        out
    }

    /// Overwrite every parameter from a flat vector (visitation order).
    pub fn from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::shape_mismatch(format!(
                "flat vector has {} entries, model has {}",
                flat.len(),
                self.parameter_count()
            )));
        }
        let mut offset = 0;
        self.for_each_tensor_mut(&mut |t: TensorMut<'_>| {
            let s = t.into_slice();
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }
}

/// Borrowed view of one parameter tensor.
pub(crate) enum Tensor<'a> {
    Weight(&'a DMatrix<f64>),
    Bias(&'a DVector<f64>),
}

pub(crate) enum TensorMut<'a> {
    Weight(&'a mut DMatrix<f64>),
    Bias(&'a mut DVector<f64>),
}

impl<'a> Tensor<'a> {
    pub fn len(&self) -> usize {
        match self {
            Tensor::Weight(m) => m.len(),
            Tensor::Bias(v) => v.len(),
        }
    }

    pub fn as_slice(&self) -> &'a [f64] {
        match self {
            Tensor::Weight(m) => m.as_slice(),
            Tensor::Bias(v) => v.as_slice(),
        }
    }
}

impl<'a> TensorMut<'a> {
    pub fn into_slice(self) -> &'a mut [f64] {
        match self {
            TensorMut::Weight(m) => m.as_mut_slice(),
            TensorMut::Bias(v) => v.as_mut_slice(),
        }
    }
}

pub(crate) fn for_layer_tensor<'a>(layer: &'a Layer, f: &mut impl FnMut(Tensor<'a>)) {
    match layer {
        Layer::Dense(d) => {
            f(Tensor::Weight(&d.w));
            f(Tensor::Bias(&d.b));
        }
        Layer::Gru(g) => {
            f(Tensor::Weight(&g.wz));
            f(Tensor::Weight(&g.uz));
            f(Tensor::Bias(&g.bz));
            f(Tensor::Weight(&g.wr));
            f(Tensor::Weight(&g.ur));
            f(Tensor::Bias(&g.br));
            f(Tensor::Weight(&g.wh));
            f(Tensor::Weight(&g.uh));
            f(Tensor::Bias(&g.bh));
        }
        Layer::Lstm(l) => {
            f(Tensor::Weight(&l.wi));
            f(Tensor::Weight(&l.ui));
            f(Tensor::Bias(&l.bi));
            f(Tensor::Weight(&l.wf));
            f(Tensor::Weight(&l.uf));
            f(Tensor::Bias(&l.bf));
            f(Tensor::Weight(&l.wo));
            f(Tensor::Weight(&l.uo));
            f(Tensor::Bias(&l.bo));
            f(Tensor::Weight(&l.wg));
            f(Tensor::Weight(&l.ug));
            f(Tensor::Bias(&l.bg));
        }
    }
}

pub(crate) fn for_layer_tensor_mut<'a>(layer: &'a mut Layer, f: &mut impl FnMut(TensorMut<'a>)) {
    match layer {
        Layer::Dense(d) => {
            f(TensorMut::Weight(&mut d.w));
            f(TensorMut::Bias(&mut d.b));
        }
        Layer::Gru(g) => {
            f(TensorMut::Weight(&mut g.wz));
            f(TensorMut::Weight(&mut g.uz));
            f(TensorMut::Bias(&mut g.bz));
            f(TensorMut::Weight(&mut g.wr));
            f(TensorMut::Weight(&mut g.ur));
            f(TensorMut::Bias(&mut g.br));
            f(TensorMut::Weight(&mut g.wh));
            f(TensorMut::Weight(&mut g.uh));
            f(TensorMut::Bias(&mut g.bh));
        }
        Layer::Lstm(l) => {
            f(TensorMut::Weight(&mut l.wi));
            f(TensorMut::Weight(&mut l.ui));
            f(TensorMut::Bias(&mut l.bi));
            f(TensorMut::Weight(&mut l.wf));
            f(TensorMut::Weight(&mut l.uf));
            f(TensorMut::Bias(&mut l.bf));
            f(TensorMut::Weight(&mut l.wo));
            f(TensorMut::Weight(&mut l.uo));
            f(TensorMut::Bias(&mut l.bo));
            f(TensorMut::Weight(&mut l.wg));
            f(TensorMut::Weight(&mut l.ug));
            f(TensorMut::Bias(&mut l.bg));
        }
    }
}

fn fill_uniform(m: &mut DMatrix<f64>, bound: f64, rng: &mut ChaCha8Rng) {
    for x in m.as_mut_slice() {
        *x = rng.gen_range(-bound..bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parameter_counts_match_shape_summation() {
        // Oracle: sum the gate shapes by hand.
        let gru = ModelParams::zeros(Arch::Gru, 4, 128, 12, 6, 5);
        let gru_layer1 = 3 * (128 * 12 + 128 * 128 + 128);
        let gru_deeper = 3 * (128 * 128 + 128 * 128 + 128);
        assert_eq!(gru.layer_parameter_count(), gru_layer1 + 3 * gru_deeper);
        assert_eq!(gru.layer_parameter_count(), 350_208);
        assert_eq!(gru.parameter_count(), 350_208 + 6 * 128 + 6);

        let lstm = ModelParams::zeros(Arch::Lstm, 4, 128, 12, 6, 5);
        assert_eq!(lstm.layer_parameter_count(), 466_944);

        let ratio = gru.layer_parameter_count() as f64 / lstm.layer_parameter_count() as f64;
        assert_relative_eq!(ratio, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ModelParams::init(Arch::Gru, 2, 8, 3, 2, 4, 99);
        let b = ModelParams::init(Arch::Gru, 2, 8, 3, 2, 4, 99);
        assert_eq!(a, b);
        let c = ModelParams::init(Arch::Gru, 2, 8, 3, 2, 4, 100);
        assert_ne!(a, c);

        let flat = a.to_flat();
        assert!(flat.iter().any(|x| *x != 0.0));
        // fan_in bound for the widest matrix.
        assert!(flat.iter().all(|x| x.abs() <= 1.0 / (3f64).sqrt() + 1e-12));
    }

    #[test]
    fn flat_round_trip() {
        let a = ModelParams::init(Arch::Lstm, 2, 6, 4, 3, 5, 1);
        let flat = a.to_flat();
        let mut b = ModelParams::zeros(Arch::Lstm, 2, 6, 4, 3, 5);
        b.from_flat(&flat).unwrap();
        assert_eq!(a.layers, b.layers);
        assert_eq!(a.head, b.head);
    }

    #[test]
    fn normalization_round_trip() {
        let xs: Vec<DVector<f64>> = (0..20)
            .map(|i| DVector::from_fn(5, |r, _| (i * 7 + r) as f64 * 0.3 - 2.0))
            .collect();
        let ys: Vec<DVector<f64>> = (0..20)
            .map(|i| DVector::from_fn(3, |r, _| (i + r) as f64))
            .collect();
        let xr: Vec<&DVector<f64>> = xs.iter().collect();
        let yr: Vec<&DVector<f64>> = ys.iter().collect();
        let norm = Normalization::fit(&xr, &yr).unwrap();
        for y in &ys {
            let back = norm.denormalize_output(&norm.normalize_output(y));
            assert_relative_eq!(back, *y, epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_feature_gets_unit_scale() {
        let xs: Vec<DVector<f64>> = (0..10)
            .map(|i| DVector::from_vec(vec![i as f64, 5.0]))
            .collect();
        let xr: Vec<&DVector<f64>> = xs.iter().collect();
        let yr = xr.clone();
        let norm = Normalization::fit(&xr, &yr).unwrap();
        assert_relative_eq!(norm.in_std[1], 1.0, epsilon = 1e-12);
    }
}
