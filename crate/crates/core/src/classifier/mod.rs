//! Fully connected recognition networks.
//!
//! Hidden layers use the rectifier, the output layer the softmax. Layer
//! counts include the input layer: the amplitude network is
//! `input → 64 → classes` (three layers) and the sparse persistence image
//! network is `input → 512 → 256 → 64 → classes` (five layers).

mod train;

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{Reader, Writer};
use crate::{Error, Result};

pub use train::{train, Adam, LrSchedule, TrainConfig, TrainOutcome};

const MAGIC: &[u8; 4] = b"STMD";
const VERSION: u32 = 1;

/// Tag stored in model files describing the weight initialization.
pub const INIT_SCHEME: &str = "uniform(+-sqrt(6/fan_in)) hidden, uniform(+-0.1*sqrt(3/fan_in)) output, zero bias";

/// Which topological feature a network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Amplitude,
    SparsePi,
}

impl FeatureKind {
    pub fn hidden_widths(self) -> &'static [usize] {
        match self {
            FeatureKind::Amplitude => &[64],
            FeatureKind::SparsePi => &[512, 256, 64],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Amplitude => "amplitude",
            FeatureKind::SparsePi => "sparse-pi",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            FeatureKind::Amplitude => 1,
            FeatureKind::SparsePi => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(FeatureKind::Amplitude),
            2 => Some(FeatureKind::SparsePi),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(FeatureKind::Amplitude),
            "sparse-pi" => Ok(FeatureKind::SparsePi),
            other => Err(Error::Config(format!(
                "unknown feature kind `{other}` (expected amplitude or sparse-pi)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub kind: FeatureKind,
    /// Input width, hidden widths, class count.
    pub layer_dims: Vec<usize>,
    /// One `in × out` matrix per trainable layer.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub class_labels: Vec<String>,
    pub init_scheme: String,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Fresh network for `kind`, deterministic in `seed`.
pub fn init_model(kind: FeatureKind, input_dim: usize, classes: usize, seed: u64) -> MlpModel {
    assert!(input_dim >= 1 && classes >= 2, "need input_dim >= 1 and classes >= 2");
    let mut dims = vec![input_dim];
    dims.extend_from_slice(kind.hidden_widths());
    dims.push(classes);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = dims.len() - 2;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = if l == last {
            // output logits start near zero so the initial softmax is close to uniform
            0.1 * (3.0 / fan_in as f64).sqrt()
        } else {
            (6.0 / fan_in as f64).sqrt()
        };
        weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
            rng.random_range(-limit..limit)
        }));
        biases.push(Array1::zeros(fan_out));
    }
    MlpModel {
        kind,
        layer_dims: dims,
        weights,
        biases,
        class_labels: (0..classes).map(|c| c.to_string()).collect(),
        init_scheme: INIT_SCHEME.to_owned(),
    }
}

/// Row-wise softmax in place.
fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    /// Trainable layers plus the input layer.
    pub fn layer_count(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.class_count());
        self.class_labels = labels;
        self
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Pre-softmax activations of a batch (one sample per row).
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(w) + b;
            if l < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Class probabilities for a batch.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut z = self.logits(x)?;
        softmax_rows(&mut z);
        Ok(z)
    }

    /// Class probabilities for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward_batch(view)?.row(0).to_vec())
    }

    /// Predicted class indices and probabilities for a batch.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        let probs = self.forward_batch(x)?;
        let labels = probs
            .rows()
            .into_iter()
            .map(|r| argmax(r.as_slice().expect("standard layout")))
            .collect();
        Ok((labels, probs))
    }

    /// Mean categorical cross-entropy of a batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
        let z = self.logits(x)?;
        Ok(cross_entropy(&z, labels))
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[usize],
    ) -> Result<(f64, Gradients)> {
        self.check_input(x.ncols())?;
        if labels.len() != x.nrows() {
            return Err(Error::DimMismatch {
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        let batch = x.nrows() as f64;
        let layers = self.weights.len();

        // activations[l] feeds layer l; pre[l] is layer l's output before the rectifier
        let mut activations = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = a.dot(w) + b;
            activations.push(a);
            a = if l + 1 < layers {
                z.mapv(|v| v.max(0.0))
            } else {
                z.clone()
            };
            pre.push(z);
        }
        let logits = pre.last().expect("at least one layer");
        let loss = cross_entropy(logits, labels);

        let mut delta = logits.clone();
        softmax_rows(&mut delta);
        for (mut row, &y) in delta.rows_mut().into_iter().zip(labels) {
            row[y] -= 1.0;
        }
        delta.mapv_inplace(|v| v / batch);

        let mut gw = vec![Array2::zeros((0, 0)); layers];
        let mut gb = vec![Array1::zeros(0); layers];
        for l in (0..layers).rev() {
            gw[l] = activations[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                back.zip_mut_with(&pre[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        ))
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let mut w = Writer::new(w);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u8(self.kind.code())?;
        w.usize(self.layer_dims.len())?;
        for &d in &self.layer_dims {
            w.usize(d)?;
        }
        w.str(&self.init_scheme)?;
        for (wt, b) in self.weights.iter().zip(&self.biases) {
            for row in wt.rows() {
                w.f64s(row.as_slice().expect("standard layout"))?;
            }
            w.f64s(b.as_slice().expect("standard layout"))?;
        }
        w.usize(self.class_labels.len())?;
        for label in &self.class_labels {
            w.str(label)?;
        }
        w.finish()
    }

    pub(crate) fn read_body<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let kind = FeatureKind::from_code(r.u8()?).ok_or_else(|| r.err("unknown feature kind"))?;
        let n = r.count(64)?;
        if n < 2 {
            return Err(r.err("a model needs at least two layer widths"));
        }
        let dims = (0..n).map(|_| r.count(1 << 24)).collect::<Result<Vec<_>>>()?;
        let init_scheme = r.str()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let data = r.f64s(fan_in * fan_out)?;
            weights.push(Array2::from_shape_vec((fan_in, fan_out), data).expect("sized"));
            biases.push(Array1::from(r.f64s(fan_out)?));
        }
        let classes = r.count(1 << 20)?;
        if classes != dims[n - 1] {
            return Err(r.err("class table does not match the output width"));
        }
        let class_labels = (0..classes).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            layer_dims: dims,
            weights,
            biases,
            class_labels,
            init_scheme,
        })
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r, "model");
        let m = Self::read_body(&mut r)?;
        r.end()?;
        Ok(m)
    }
}

fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn architectures() {
        let m = init_model(FeatureKind::Amplitude, 8, 70, 0);
        assert_eq!(m.layer_dims, vec![8, 64, 70]);
        assert_eq!(m.layer_count(), 3);
        let m = init_model(FeatureKind::SparsePi, 300, 70, 0);
        assert_eq!(m.layer_dims, vec![300, 512, 256, 64, 70]);
        assert_eq!(m.layer_count(), 5);
        assert!(m.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(FeatureKind::SparsePi, 40, 5, 11);
        let b = init_model(FeatureKind::SparsePi, 40, 5, 11);
        let c = init_model(FeatureKind::SparsePi, 40, 5, 12);
        let bits = |m: &MlpModel| -> Vec<u64> {
            m.weights.iter().flat_map(|w| w.iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn zero_model_is_uniform() {
        let mut m = init_model(FeatureKind::Amplitude, 3, 4, 0);
        m.weights.iter_mut().for_each(|w| w.fill(0.0));
        let p = m.forward(&[1.0, -2.0, 3.0]).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimMismatch { expected: 3, actual: 1 })));
    }

    #[test]
    fn softmax_closed_form() {
        let mut z = array![[0.0, 3f64.ln()]];
        softmax_rows(&mut z);
        assert!((z[[0, 0]] - 0.25).abs() < 1e-15);
        assert!((z[[0, 1]] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn argmax_ties_and_shift_invariance() {
        assert_eq!(argmax(&[0.25, 0.25, 0.25, 0.25]), 0);
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        let m = init_model(FeatureKind::Amplitude, 4, 6, 3);
        let x = array![[0.3, -1.0, 2.0, 0.5]];
        let (p, _) = m.predict(x.view()).unwrap();
        let mut shifted = m.clone();
        shifted.biases.last_mut().unwrap().mapv_inplace(|v| v + 17.0);
        assert_eq!(shifted.predict(x.view()).unwrap().0, p);
    }

    #[test]
    fn model_file_round_trip() {
        let m = init_model(FeatureKind::SparsePi, 7, 3, 5)
            .with_labels(vec!["apple".into(), "bat".into(), "ünïcode".into()]);
        let buf = m.write_to(Vec::new()).unwrap();
        assert_eq!(&buf[..4], b"STMD");
        let back = MlpModel::read_from(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert!(MlpModel::read_from(&buf[..buf.len() - 3]).is_err());
    }

    /// Largest relative error between backprop and central differences over
    /// every parameter tensor of `m`.
    pub(crate) fn gradient_check(m: &MlpModel, x: ArrayView2<'_, f64>, labels: &[usize], h: f64) -> f64 {
        let (_, g) = m.loss_and_gradients(x, labels).unwrap();
        let mut worst = 0.0f64;
        let rel = |num: f64, ana: f64| (num - ana).abs() / (num.abs() + ana.abs()).max(1e-8);
        for l in 0..m.weights.len() {
            for idx in 0..m.weights[l].len() {
                let (r, c) = (idx / m.weights[l].ncols(), idx % m.weights[l].ncols());
                let mut p = m.clone();
                p.weights[l][[r, c]] += h;
                let mut q = m.clone();
                q.weights[l][[r, c]] -= h;
                let num = (p.loss(x, labels).unwrap() - q.loss(x, labels).unwrap()) / (2.0 * h);
                worst = worst.max(rel(num, g.weights[l][[r, c]]));
            }
            for i in 0..m.biases[l].len() {
                let mut p = m.clone();
                p.biases[l][i] += h;
                let mut q = m.clone();
                q.biases[l][i] -= h;
                let num = (p.loss(x, labels).unwrap() - q.loss(x, labels).unwrap()) / (2.0 * h);
                worst = worst.max(rel(num, g.biases[l][i]));
            }
        }
        worst
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let labels = [0, 2, 1, 2, 0];
        let mut m = init_model(FeatureKind::Amplitude, 4, 3, 4);
        // larger output weights keep the gradients well above the difference noise
        m.weights[1].mapv_inplace(|v| v * 10.0);
        m.biases[0].fill(0.05);
        assert!(gradient_check(&m, x.view(), &labels, 1e-5) < 1e-4);
    }

    #[test]
    fn fresh_loss_is_near_log_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((140, 30), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..140).map(|i| i % 70).collect();
        for kind in [FeatureKind::Amplitude, FeatureKind::SparsePi] {
            let m = init_model(kind, 30, 70, 1);
            let loss = m.loss(x.view(), &labels).unwrap();
            assert!((loss - 70f64.ln()).abs() < 0.1, "{kind}: {loss}");
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(seed in 0u64..1000, x in prop::collection::vec(-5.0..5.0f64, 6)) {
            let m = init_model(FeatureKind::SparsePi, 6, 9, seed);
            let p = m.forward(&x).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
