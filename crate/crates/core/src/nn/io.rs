//! Versioned JSON weight container and CSV emitters for loss histories and
//! ablation tables.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::params::{
    Arch, Dense, GruLayer, Layer, LstmLayer, ModelParams, Normalization, TrainMeta,
};
use super::train::{AblationRow, EpochStats};
use crate::{Error, Result};

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct TensorFile {
    rows: usize,
    cols: usize,
    /// Row-major storage.
    data: Vec<f64>,
}

impl TensorFile {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        TensorFile {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        TensorFile {
            rows: v.len(),
            cols: 1,
            data: v.as_slice().to_vec(),
        }
    }

    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Parse(format!(
                "tensor data length {} does not match {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let mut m = DMatrix::zeros(self.rows, self.cols);
        let mut it = self.data.iter();
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = *it.next().expect("length checked");
            }
        }
        Ok(m)
    }

    fn to_vector(&self) -> Result<DVector<f64>> {
        if self.cols != 1 {
            return Err(Error::Parse("expected a column vector".into()));
        }
        Ok(DVector::from_vec(self.data.clone()))
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct LayerFile {
    kind: String,
    tensors: Vec<(String, TensorFile)>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelFile {
    version: u32,
    arch: Arch,
    input_size: usize,
    hidden_size: usize,
    output_size: usize,
    seq_len: usize,
    layers: Vec<LayerFile>,
    head: Vec<(String, TensorFile)>,
    in_mean: Vec<f64>,
    in_std: Vec<f64>,
    out_mean: Vec<f64>,
    out_std: Vec<f64>,
    meta: TrainMeta,
}

fn layer_to_file(layer: &Layer) -> LayerFile {
    match layer {
        Layer::Dense(d) => LayerFile {
            kind: "dense".into(),
            tensors: vec![
                ("w".into(), TensorFile::from_matrix(&d.w)),
                ("b".into(), TensorFile::from_vector(&d.b)),
            ],
        },
        Layer::Gru(g) => LayerFile {
            kind: "gru".into(),
            tensors: vec![
                ("wz".into(), TensorFile::from_matrix(&g.wz)),
                ("uz".into(), TensorFile::from_matrix(&g.uz)),
                ("bz".into(), TensorFile::from_vector(&g.bz)),
                ("wr".into(), TensorFile::from_matrix(&g.wr)),
                ("ur".into(), TensorFile::from_matrix(&g.ur)),
                ("br".into(), TensorFile::from_vector(&g.br)),
                ("wh".into(), TensorFile::from_matrix(&g.wh)),
                ("uh".into(), TensorFile::from_matrix(&g.uh)),
                ("bh".into(), TensorFile::from_vector(&g.bh)),
            ],
        },
        Layer::Lstm(l) => LayerFile {
            kind: "lstm".into(),
            tensors: vec![
                ("wi".into(), TensorFile::from_matrix(&l.wi)),
                ("ui".into(), TensorFile::from_matrix(&l.ui)),
                ("bi".into(), TensorFile::from_vector(&l.bi)),
                ("wf".into(), TensorFile::from_matrix(&l.wf)),
                ("uf".into(), TensorFile::from_matrix(&l.uf)),
                ("bf".into(), TensorFile::from_vector(&l.bf)),
                ("wo".into(), TensorFile::from_matrix(&l.wo)),
                ("uo".into(), TensorFile::from_matrix(&l.uo)),
                ("bo".into(), TensorFile::from_vector(&l.bo)),
                ("wg".into(), TensorFile::from_matrix(&l.wg)),
                ("ug".into(), TensorFile::from_matrix(&l.ug)),
                ("bg".into(), TensorFile::from_vector(&l.bg)),
            ],
        },
    }
}

fn tensor_map(tensors: &[(String, TensorFile)], name: &str) -> Result<usize> {
    tensors
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Parse(format!("missing tensor '{name}'")))
}

fn layer_from_file(file: &LayerFile) -> Result<Layer> {
    let m = |name: &str| -> Result<DMatrix<f64>> {
        file.tensors[tensor_map(&file.tensors, name)?].1.to_matrix()
    };
    let v = |name: &str| -> Result<DVector<f64>> {
        file.tensors[tensor_map(&file.tensors, name)?].1.to_vector()
    };
    match file.kind.as_str() {
        "dense" => Ok(Layer::Dense(Dense { w: m("w")?, b: v("b")? })),
        "gru" => Ok(Layer::Gru(GruLayer {
            wz: m("wz")?,
            uz: m("uz")?,
            bz: v("bz")?,
            wr: m("wr")?,
            ur: m("ur")?,
            br: v("br")?,
            wh: m("wh")?,
            uh: m("uh")?,
            bh: v("bh")?,
        })),
        "lstm" => Ok(Layer::Lstm(LstmLayer {
            wi: m("wi")?,
            ui: m("ui")?,
            bi: v("bi")?,
            wf: m("wf")?,
            uf: m("uf")?,
            bf: v("bf")?,
            wo: m("wo")?,
            uo: m("uo")?,
            bo: v("bo")?,
            wg: m("wg")?,
            ug: m("ug")?,
            bg: v("bg")?,
        })),
        other => Err(Error::Parse(format!("unknown layer kind '{other}'"))),
    }
}

/// Serialize a model to the versioned JSON weight container.
pub fn model_to_json(model: &ModelParams) -> String {
    let file = ModelFile {
        version: WEIGHT_FORMAT_VERSION,
        arch: model.arch,
        input_size: model.input_size,
        hidden_size: model.hidden_size,
        output_size: model.output_size,
        seq_len: model.seq_len,
        layers: model.layers.iter().map(layer_to_file).collect(),
        head: vec![
            ("w".into(), TensorFile::from_matrix(&model.head.w)),
            ("b".into(), TensorFile::from_vector(&model.head.b)),
        ],
        in_mean: model.norm.in_mean.as_slice().to_vec(),
        in_std: model.norm.in_std.as_slice().to_vec(),
        out_mean: model.norm.out_mean.as_slice().to_vec(),
        out_std: model.norm.out_std.as_slice().to_vec(),
        meta: model.meta.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<ModelParams> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("weight file: {e}")))?;
    if file.version != WEIGHT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: WEIGHT_FORMAT_VERSION,
            found: file.version,
        });
    }
    let layers: Result<Vec<Layer>> = file.layers.iter().map(layer_from_file).collect();
    let head_w = file.head[tensor_map(&file.head, "w")?].1.to_matrix()?;
    let head_b = file.head[tensor_map(&file.head, "b")?].1.to_vector()?;
    let model = ModelParams {
        arch: file.arch,
        input_size: file.input_size,
        hidden_size: file.hidden_size,
        output_size: file.output_size,
        seq_len: file.seq_len,
        layers: layers?,
        head: Dense { w: head_w, b: head_b },
        norm: Normalization {
            in_mean: DVector::from_vec(file.in_mean),
            in_std: DVector::from_vec(file.in_std),
            out_mean: DVector::from_vec(file.out_mean),
            out_std: DVector::from_vec(file.out_std),
        },
        meta: file.meta,
    };
    if model.norm.in_mean.len() != model.input_size || model.norm.out_mean.len() != model.output_size
    {
        return Err(Error::shape_mismatch(
            "normalization statistics do not match model sizes".to_string(),
        ));
    }
    Ok(model)
}

pub fn save_model(model: &ModelParams, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(model_to_json(model).as_bytes())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

/// `epoch,train_loss,val_loss,val_mae` rows.
pub fn loss_history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,val_mae\n");
    for e in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_loss, e.val_mae
        ));
    }
    out
}

/// Table-shaped ablation CSV.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("arch,layers,hidden,val_loss,secs_per_epoch,parameters,epochs_run\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.arch, r.layers, r.hidden, r.val_loss, r.secs_per_epoch, r.parameter_count, r.epochs_run
        ));
    }
    out
}
