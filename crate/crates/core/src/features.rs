//! Extracted features on disk.
//!
//! A feature file holds one record per (mask, augmentation). Records carry
//! either the `d` persistence diagrams of the mask or a fixed-length vector.
//!
//! Layout (little-endian): magic `STFT`, version, kind (`0` diagrams, `1`
//! amplitude vectors), vector width (0 for diagrams), `d`, class count,
//! image size, persistence image grid side and spread, class labels, sample
//! table (source id and class per sample), then the records. A record is
//! sample index, augmentation index and the payload; a diagram payload is,
//! per direction, `h_infinity`, the pair count and the `(birth, death)` pairs.

use std::io::{Read, Write};
use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::persistence::{PersistenceDiagram, PersistencePair};
use crate::vectorize::amplitude_vector;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"STFT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Diagrams,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Diagrams(Vec<PersistenceDiagram>),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub source: String,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub sample: usize,
    /// 0 for the original mask, `r` for the rotation by `r` quarter turns.
    pub augmentation: u8,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: RecordKind,
    pub directions: usize,
    pub image_size: usize,
    pub pi_grid: usize,
    pub pi_spread: f64,
    pub classes: Vec<String>,
    pub samples: Vec<Sample>,
    pub records: Vec<Record>,
}

impl FeatureSet {
    /// Class index of every sample.
    pub fn sample_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class).collect()
    }

    pub fn record_class(&self, r: &Record) -> usize {
        self.samples[r.sample].class
    }

    /// Width of the vector payloads (0 for diagram files).
    pub fn vector_width(&self) -> usize {
        match self.kind {
            RecordKind::Diagrams => 0,
            RecordKind::Amplitude => self.directions,
        }
    }

    /// Bottleneck amplitudes of a record, computed from diagrams if needed.
    pub fn amplitudes(&self, r: &Record) -> Result<Vec<f64>> {
        match &r.payload {
            Payload::Diagrams(pds) => amplitude_vector(pds, self.directions),
            Payload::Vector(v) => Ok(v.clone()),
        }
    }

    /// The same samples with every diagram record reduced to its amplitude vector.
    pub fn to_amplitudes(&self) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(Record {
                    sample: r.sample,
                    augmentation: r.augmentation,
                    payload: Payload::Vector(self.amplitudes(r)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: RecordKind::Amplitude,
            records,
            ..self.clone()
        })
    }

    fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Format { what: "feature file", reason: m });
        for (i, s) in self.samples.iter().enumerate() {
            if s.class >= self.classes.len() {
                return fail(format!("sample {i} has class {} of {}", s.class, self.classes.len()));
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.sample >= self.samples.len() {
                return fail(format!("record {i} points at missing sample {}", r.sample));
            }
            match (&r.payload, self.kind) {
                (Payload::Diagrams(pds), RecordKind::Diagrams) if pds.len() == self.directions => {}
                (Payload::Vector(v), RecordKind::Amplitude) if v.len() == self.vector_width() => {}
                _ => return fail(format!("record {i} does not match the file kind")),
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<W> {
        self.check()?;
        let mut w = Writer::new(w);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u8(match self.kind {
            RecordKind::Diagrams => 0,
            RecordKind::Amplitude => 1,
        })?;
        w.usize(self.vector_width())?;
        w.usize(self.directions)?;
        w.usize(self.classes.len())?;
        w.usize(self.image_size)?;
        w.usize(self.pi_grid)?;
        w.f64(self.pi_spread)?;
        for c in &self.classes {
            w.str(c)?;
        }
        w.usize(self.samples.len())?;
        for s in &self.samples {
            w.str(&s.source)?;
            w.usize(s.class)?;
        }
        w.usize(self.records.len())?;
        for r in &self.records {
            w.usize(r.sample)?;
            w.u8(r.augmentation)?;
            match &r.payload {
                Payload::Diagrams(pds) => {
                    for pd in pds {
                        w.f64(pd.h_infinity)?;
                        w.usize(pd.pairs.len())?;
                        for p in &pd.pairs {
                            w.f64(p.birth)?;
                            w.f64(p.death)?;
                        }
                    }
                }
                Payload::Vector(v) => w.f64s(v)?,
            }
        }
        w.finish()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader::new(r, "feature file");
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let kind = match r.u8()? {
            0 => RecordKind::Diagrams,
            1 => RecordKind::Amplitude,
            _ => return Err(r.err("unknown record kind")),
        };
        let width = r.count(1 << 20)?;
        let directions = r.count(1 << 16)?;
        let class_count = r.count(1 << 20)?;
        let image_size = r.usize()?;
        let pi_grid = r.usize()?;
        let pi_spread = r.f64()?;
        let classes = (0..class_count).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let sample_count = r.count(1 << 28)?;
        let mut samples = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let source = r.str()?;
            let class = r.usize()?;
            samples.push(Sample { source, class });
        }
        let record_count = r.count(1 << 30)?;
        let mut records = Vec::with_capacity(record_count);
        for _ in 0..record_count {
            let sample = r.usize()?;
            let augmentation = r.u8()?;
            let payload = match kind {
                RecordKind::Diagrams => {
                    let mut pds = Vec::with_capacity(directions);
                    for k in 0..directions {
                        let h_infinity = r.f64()?;
                        let n = r.count(1 << 28)?;
                        let mut pairs = Vec::with_capacity(n);
                        for _ in 0..n {
                            let birth = r.f64()?;
                            let death = r.f64()?;
                            pairs.push(PersistencePair { birth, death });
                        }
                        pds.push(PersistenceDiagram {
                            pairs,
                            h_infinity,
                            direction_index: k,
                        });
                    }
                    Payload::Diagrams(pds)
                }
                RecordKind::Amplitude => Payload::Vector(r.f64s(width)?),
            };
            records.push(Record {
                sample,
                augmentation,
                payload,
            });
        }
        r.end()?;
        let set = Self {
            kind,
            directions,
            image_size,
            pi_grid,
            pi_spread,
            classes,
            samples,
            records,
        };
        set.check()?;
        if set.vector_width() != width {
            return Err(Error::Format {
                what: "feature file",
                reason: format!("vector width {width} does not match {} directions", directions),
            });
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = self.write_to(std::io::BufWriter::new(file))?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
