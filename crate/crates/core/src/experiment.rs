//! Feature extraction over datasets and the stratified k-fold protocol.
//!
//! Everything that is learned from data (persistence image ranges and weight
//! normalizer, sampler pivots, feature standardization, network weights) is
//! fitted on the training folds only, using all four rotations of each
//! training mask. Test folds are scored on the unrotated masks.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::binio::{Reader, Writer};
use crate::classifier::{init_model, train, FeatureKind, MlpModel, TrainConfig};
use crate::features::{FeatureSet, Payload, Record, RecordKind, Sample};
use crate::filtration::{height_field, make_directions, Direction};
use crate::folds::{make_folds, FoldPlan};
use crate::manifest::DatasetManifest;
use crate::mask::{augment_rotations, load_mask, normalize_mask, BinaryMask};
use crate::metrics::{aggregate, compute_metrics, AggregateMetrics, MetricsReport};
use crate::persistence::{compute_pd0, PersistenceDiagram};
use crate::sampler::{fit_direction, image_stack, SparseSampler};
use crate::vectorize::{persistence_image, PersistenceImageConfig};
use crate::{Error, Result};

const PIPELINE_MAGIC: &[u8; 4] = b"STPL";
const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractConfig {
    pub directions: usize,
    pub image_size: usize,
    pub pi_grid: usize,
    pub pi_spread: f64,
    pub threshold: u8,
    /// Also extract the three quarter-turn rotations of every mask.
    pub augment: bool,
}

impl Default for ExtractConfig {
    /// Silhouette benchmark settings: 8 directions, 125-pixel masks, 50×50
    /// images with spread 10.
    fn default() -> Self {
        Self {
            directions: 8,
            image_size: 125,
            pi_grid: 50,
            pi_spread: 10.0,
            threshold: crate::mask::DEFAULT_THRESHOLD,
            augment: true,
        }
    }
}

impl ExtractConfig {
    /// Settings for masks cut out of cluttered scenes (wider kernel).
    pub fn scene() -> Self {
        Self {
            pi_spread: 20.0,
            ..Self::default()
        }
    }
}

/// The `d` diagrams of one mask.
pub fn mask_diagrams(mask: &BinaryMask, dirs: &[Direction]) -> Vec<PersistenceDiagram> {
    dirs.iter().map(|&d| compute_pd0(&height_field(mask, d))).collect()
}

/// Diagrams of every mask (normalized, and rotated if `cfg.augment`). Every
/// mask must carry a label; classes are the sorted distinct labels.
pub fn extract_masks(masks: &[BinaryMask], cfg: &ExtractConfig) -> Result<FeatureSet> {
    let mut classes: Vec<String> = masks
        .iter()
        .map(|m| {
            m.label
                .clone()
                .ok_or_else(|| Error::Config(format!("mask {} has no label", m.source_id)))
        })
        .collect::<Result<_>>()?;
    classes.sort();
    classes.dedup();
    let samples: Vec<Sample> = masks
        .iter()
        .map(|m| Sample {
            source: m.source_id.clone(),
            class: classes
                .binary_search(m.label.as_ref().expect("checked"))
                .expect("present"),
        })
        .collect();
    extract_inner(masks.par_iter().map(|m| Ok(m.clone())), classes, samples, cfg)
}

/// Loads and extracts every entry of `manifest`.
pub fn extract_manifest(manifest: &DatasetManifest, cfg: &ExtractConfig) -> Result<FeatureSet> {
    let samples: Vec<Sample> = manifest
        .entries
        .iter()
        .map(|e| Sample {
            source: e.path.display().to_string(),
            class: manifest.class_index(&e.label).expect("label in class table"),
        })
        .collect();
    let threshold = cfg.threshold;
    let masks = manifest
        .entries
        .par_iter()
        .map(|e| load_mask(&e.path, threshold));
    extract_inner(masks, manifest.classes.clone(), samples, cfg)
}

fn extract_inner(
    masks: impl IndexedParallelIterator<Item = Result<BinaryMask>>,
    classes: Vec<String>,
    samples: Vec<Sample>,
    cfg: &ExtractConfig,
) -> Result<FeatureSet> {
    let dirs = make_directions(cfg.directions);
    let per_mask: Vec<Vec<Record>> = masks
        .enumerate()
        .map(|(i, m)| {
            let m = normalize_mask(&m?, cfg.image_size)?;
            let views = if cfg.augment {
                augment_rotations(&m)?.to_vec()
            } else {
                vec![m]
            };
            Ok(views
                .iter()
                .enumerate()
                .map(|(a, v)| Record {
                    sample: i,
                    augmentation: a as u8,
                    payload: Payload::Diagrams(mask_diagrams(v, &dirs)),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(FeatureSet {
        kind: RecordKind::Diagrams,
        directions: cfg.directions,
        image_size: cfg.image_size,
        pi_grid: cfg.pi_grid,
        pi_spread: cfg.pi_spread,
        classes,
        samples,
        records: per_mask.into_iter().flatten().collect(),
    })
}

/// Per-feature affine map `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Column means and population standard deviations of `x`; constant
    /// columns get scale 1.
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pi_grid: usize,
    pub pi_spread: f64,
    pub standardize: bool,
}

impl PipelineConfig {
    pub fn from_features(set: &FeatureSet) -> Self {
        Self {
            pi_grid: set.pi_grid,
            pi_spread: set.pi_spread,
            standardize: true,
        }
    }
}

/// Everything between persistence diagrams and network inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub kind: FeatureKind,
    pub directions: usize,
    pub pi: Option<PersistenceImageConfig>,
    pub sampler: Option<SparseSampler>,
    pub standardizer: Standardizer,
}

fn diagrams_of<'a>(record: &'a Record) -> Result<&'a [PersistenceDiagram]> {
    match &record.payload {
        Payload::Diagrams(pds) => Ok(pds),
        Payload::Vector(_) => Err(Error::Config(
            "sparse persistence image features need a diagram feature file".into(),
        )),
    }
}

impl FeaturePipeline {
    /// Fits the pipeline on `records` of `set` and returns it together with
    /// the transformed training matrix (one row per record).
    pub fn fit(
        kind: FeatureKind,
        set: &FeatureSet,
        records: &[&Record],
        cfg: &PipelineConfig,
    ) -> Result<(Self, Array2<f64>)> {
        if records.is_empty() {
            return Err(Error::Config("no records to fit on".into()));
        }
        let d = set.directions;
        let (pi, sampler, mut x) = match kind {
            FeatureKind::Amplitude => {
                let rows = records
                    .iter()
                    .map(|r| set.amplitudes(r))
                    .collect::<Result<Vec<_>>>()?;
                let x = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j]);
                (None, None, x)
            }
            FeatureKind::SparsePi => {
                let diagrams = records
                    .iter()
                    .map(|r| diagrams_of(r))
                    .collect::<Result<Vec<_>>>()?;
                let pi = PersistenceImageConfig::fit(
                    diagrams.iter().flat_map(|pds| pds.iter()),
                    cfg.pi_grid,
                    cfg.pi_spread,
                )?;
                // one direction at a time keeps a single image stack in memory
                let mut directions = Vec::with_capacity(d);
                let mut blocks = Vec::with_capacity(d);
                for k in 0..d {
                    let images = diagrams
                        .par_iter()
                        .map(|pds| persistence_image(&pds[k], &pi))
                        .collect::<Result<Vec<_>>>()?;
                    let stack = image_stack(images.iter());
                    let samples = fit_direction(k, stack.as_ref())?;
                    log::info!("direction {k}: rank {}", samples.rank);
                    blocks.push(
                        images
                            .iter()
                            .map(|img| {
                                samples
                                    .pivots
                                    .iter()
                                    .map(|&p| img.values[p as usize])
                                    .collect::<Vec<_>>()
                            })
                            .collect::<Vec<_>>(),
                    );
                    directions.push(samples);
                }
                let sampler = SparseSampler {
                    grid_side: cfg.pi_grid,
                    directions,
                };
                let width = sampler.feature_len();
                let mut x = Array2::zeros((records.len(), width));
                for (i, mut row) in x.rows_mut().into_iter().enumerate() {
                    let flat = blocks.iter().flat_map(|b| b[i].iter());
                    for (dst, &v) in row.iter_mut().zip(flat) {
                        *dst = v;
                    }
                }
                (Some(pi), Some(sampler), x)
            }
        };
        let standardizer = if cfg.standardize {
            Standardizer::fit(&x)
        } else {
            Standardizer::identity(x.ncols())
        };
        for mut row in x.rows_mut() {
            standardizer.apply(row.as_slice_mut().expect("standard layout"));
        }
        Ok((
            Self {
                kind,
                directions: d,
                pi,
                sampler,
                standardizer,
            },
            x,
        ))
    }

    pub fn input_dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn transform(&self, set: &FeatureSet, record: &Record) -> Result<Vec<f64>> {
        if set.directions != self.directions {
            return Err(Error::WrongDirectionCount {
                expected: self.directions,
                actual: set.directions,
            });
        }
        let mut v = match self.kind {
            FeatureKind::Amplitude => set.amplitudes(record)?,
            FeatureKind::SparsePi => {
                let pi = self.pi.as_ref().expect("fitted image config");
                let sampler = self.sampler.as_ref().expect("fitted sampler");
                let images = diagrams_of(record)?
                    .iter()
                    .map(|pd| persistence_image(pd, pi))
                    .collect::<Result<Vec<_>>>()?;
                sampler.apply(&images)?
            }
        };
        self.standardizer.apply(&mut v);
        Ok(v)
    }

    /// Transformed features of several records, one per row.
    pub fn transform_all(&self, set: &FeatureSet, records: &[&Record]) -> Result<Array2<f64>> {
        let rows = records
            .par_iter()
            .map(|r| self.transform(set, r))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.input_dim();
        Ok(Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j]))
    }

    fn write_to<W: Write>(&self, mut out: W) -> Result<W> {
        let mut w = Writer::new(&mut out);
        w.bytes(PIPELINE_MAGIC)?;
        w.u32(PIPELINE_VERSION)?;
        w.u8(self.kind.code())?;
        w.usize(self.directions)?;
        match &self.pi {
            Some(pi) => {
                w.u8(1)?;
                w.usize(pi.grid_side)?;
                w.f64s(&[
                    pi.spread,
                    pi.birth_range.0,
                    pi.birth_range.1,
                    pi.persistence_range.0,
                    pi.persistence_range.1,
                    pi.max_persistence,
                ])?;
            }
            None => w.u8(0)?,
        }
        w.u8(u8::from(self.sampler.is_some()))?;
        w.finish()?;
        if let Some(s) = &self.sampler {
            s.write_to(&mut out)?;
        }
        let mut w = Writer::new(&mut out);
        w.usize(self.input_dim())?;
        w.f64s(&self.standardizer.mean)?;
        w.f64s(&self.standardizer.scale)?;
        w.finish()?;
        Ok(out)
    }

    fn read_body<R: Read>(r: &mut Reader<R>) -> Result<Self> {
        r.magic(PIPELINE_MAGIC)?;
        r.version(PIPELINE_VERSION)?;
        let kind = FeatureKind::from_code(r.u8()?).ok_or_else(|| r.err("unknown feature kind"))?;
        let directions = r.count(1 << 16)?;
        let pi = match r.u8()? {
            0 => None,
            1 => {
                let grid_side = r.count(1 << 15)?;
                let v = r.f64s(6)?;
                let cfg = PersistenceImageConfig {
                    grid_side,
                    spread: v[0],
                    birth_range: (v[1], v[2]),
                    persistence_range: (v[3], v[4]),
                    max_persistence: v[5],
                };
                cfg.validate()?;
                Some(cfg)
            }
            _ => return Err(r.err("bad image config flag")),
        };
        let sampler = match r.u8()? {
            0 => None,
            1 => Some(SparseSampler::read_body(r)?),
            _ => return Err(r.err("bad sampler flag")),
        };
        let dim = r.count(1 << 24)?;
        let mean = r.f64s(dim)?;
        let scale = r.f64s(dim)?;
        let pipeline = Self {
            kind,
            directions,
            pi,
            sampler,
            standardizer: Standardizer { mean, scale },
        };
        let expected = match (&pipeline.kind, &pipeline.sampler) {
            (FeatureKind::Amplitude, None) => directions,
            (FeatureKind::SparsePi, Some(s)) if pipeline.pi.is_some() && s.direction_count() == directions => {
                s.feature_len()
            }
            _ => return Err(r.err("pipeline parts do not match the feature kind")),
        };
        if expected != dim {
            return Err(r.err("standardizer width does not match the features"));
        }
        Ok(pipeline)
    }
}

/// A fitted feature pipeline and the network trained on its output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub pipeline: FeaturePipeline,
    pub model: MlpModel,
}

impl TrainedModel {
    /// Model file: the network section followed by the pipeline section.
    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        let w = self.model.write_to(w)?;
        self.pipeline.write_to(w)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r, "model");
        let model = MlpModel::read_body(&mut r)?;
        let pipeline = FeaturePipeline::read_body(&mut r)?;
        r.end()?;
        if model.input_dim() != pipeline.input_dim() || model.kind != pipeline.kind {
            return Err(Error::Format {
                what: "model",
                reason: "network and feature pipeline do not match".into(),
            });
        }
        Ok(Self { pipeline, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))?.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }

    /// Predicted class index per record.
    pub fn predict(&self, set: &FeatureSet, records: &[&Record]) -> Result<Vec<usize>> {
        let x = self.pipeline.transform_all(set, records)?;
        Ok(self.model.predict(x.view())?.0)
    }

    /// Scores the unrotated records of `set`. Class labels are matched by name.
    pub fn evaluate(&self, set: &FeatureSet) -> Result<MetricsReport> {
        let records: Vec<&Record> = set.records.iter().filter(|r| r.augmentation == 0).collect();
        let preds = self.predict(set, &records)?;
        let mut names = self.model.class_labels.clone();
        for c in &set.classes {
            if !names.contains(c) {
                names.push(c.clone());
            }
        }
        let index = |name: &str| names.iter().position(|n| n == name).expect("merged");
        let truths: Vec<usize> = records
            .iter()
            .map(|r| index(&set.classes[set.record_class(r)]))
            .collect();
        compute_metrics(&preds, &truths, &names)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: FeatureKind,
    pub folds: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub kind: String,
    pub seed: u64,
    pub train_samples: usize,
    pub train_records: usize,
    pub test_samples: usize,
    pub input_dim: usize,
    /// SHA-256 over the identities of every record the fold was fitted on.
    pub fit_audit: String,
    pub final_loss: Option<f64>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub report: FoldReport,
    /// `None` when the dataset has a single class and nothing was trained.
    pub model: Option<TrainedModel>,
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub kind: String,
    pub folds: usize,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub samples: usize,
    pub classes: usize,
    pub aggregate: AggregateMetrics,
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub summary: ExperimentSummary,
}

fn audit_hash(set: &FeatureSet, records: &[&Record], fold: usize) -> String {
    let mut h = Sha256::new();
    h.update((fold as u64).to_le_bytes());
    for r in records {
        h.update(set.samples[r.sample].source.as_bytes());
        h.update([0, r.augmentation]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Fits and trains on the records of `train_samples` (all augmentations).
pub fn fit_model(
    set: &FeatureSet,
    train_samples: &[usize],
    kind: FeatureKind,
    pipeline: &PipelineConfig,
    train_cfg: &TrainConfig,
) -> Result<(TrainedModel, Vec<f64>)> {
    let mut in_train = vec![false; set.samples.len()];
    train_samples.iter().for_each(|&s| in_train[s] = true);
    let records: Vec<&Record> = set.records.iter().filter(|r| in_train[r.sample]).collect();
    let labels: Vec<usize> = records.iter().map(|r| set.record_class(r)).collect();
    let (pipeline, x) = FeaturePipeline::fit(kind, set, &records, pipeline)?;
    let model = init_model(kind, pipeline.input_dim(), set.classes.len(), train_cfg.seed)
        .with_labels(set.classes.clone());
    let out = train(model, x.view(), &labels, train_cfg)?;
    Ok((
        TrainedModel {
            pipeline,
            model: out.model,
        },
        out.loss_curve,
    ))
}

/// Runs one fold of `plan`.
pub fn run_fold(set: &FeatureSet, plan: &FoldPlan, fold: usize, cfg: &ExperimentConfig) -> Result<FoldResult> {
    let train_samples = plan.train_indices(fold);
    let test_samples = plan.test_indices(fold);
    let mut is_test = vec![false; set.samples.len()];
    test_samples.iter().for_each(|&s| is_test[s] = true);
    let fit_records: Vec<&Record> = set.records.iter().filter(|r| !is_test[r.sample]).collect();
    let test_records: Vec<&Record> = set
        .records
        .iter()
        .filter(|r| is_test[r.sample] && r.augmentation == 0)
        .collect();
    let audit = audit_hash(set, &fit_records, fold);
    let truths: Vec<usize> = test_records.iter().map(|r| set.record_class(r)).collect();
    let seed = cfg.seed.wrapping_add(fold as u64);

    let (model, curve, preds, input_dim) = if set.classes.len() < 2 {
        // a single class is predicted trivially
        (None, Vec::new(), vec![0; truths.len()], 0)
    } else {
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let (trained, curve) = fit_model(set, &train_samples, cfg.kind, &cfg.pipeline, &train_cfg)?;
        let preds = trained.predict(set, &test_records)?;
        let dim = trained.pipeline.input_dim();
        (Some(trained), curve, preds, dim)
    };
    let metrics = compute_metrics(&preds, &truths, &set.classes)?;
    if (metrics.accuracy - metrics.weighted_recall).abs() > 1e-12 {
        return Err(Error::ShapeMismatch(format!(
            "accuracy {} differs from weighted recall {}",
            metrics.accuracy, metrics.weighted_recall
        )));
    }
    log::info!("fold {fold}: accuracy {:.4}", metrics.accuracy);
    Ok(FoldResult {
        report: FoldReport {
            fold,
            kind: cfg.kind.name().to_owned(),
            seed,
            train_samples: train_samples.len(),
            train_records: fit_records.len(),
            test_samples: test_records.len(),
            input_dim,
            fit_audit: audit,
            final_loss: curve.last().copied(),
            metrics,
        },
        model,
        loss_curve: curve,
    })
}

/// Stratified `cfg.folds`-fold cross-validation over the samples of `set`.
pub fn run_experiment(set: &FeatureSet, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    let plan = make_folds(&set.sample_labels(), cfg.folds, cfg.seed)?;
    let folds = (0..cfg.folds)
        .map(|f| run_fold(set, &plan, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = folds.iter().map(|f| f.report.metrics.clone()).collect();
    let summary = ExperimentSummary {
        kind: cfg.kind.name().to_owned(),
        folds: cfg.folds,
        seed: cfg.seed,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        samples: set.samples.len(),
        classes: set.classes.len(),
        aggregate: aggregate(&reports),
        fold_accuracy: reports.iter().map(|r| r.accuracy).collect(),
    };
    Ok(ExperimentResult {
        plan,
        folds,
        summary,
    })
}
