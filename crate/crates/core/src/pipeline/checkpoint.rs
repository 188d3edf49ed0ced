//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic, a little-endian `u32` format version, then
//! sections of `tag (4 bytes) | length (u64) | payload`. Every number is
//! little-endian; reals are 64-bit.

use std::path::Path;

use super::{FittedModel, ModelKind};
use crate::aam::{Aam, AamHyperparams};
use crate::baselines::{DecisionTree, LogisticHead, Node, Orientation, RfModel, Split};
use crate::dataset::{Metric, Normalizer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"AAMCKPT1";
pub const FORMAT_VERSION: u32 = 1;

/// A fitted model with everything needed to score new data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub model: FittedModel,
    pub normalizer: Normalizer,
    pub vocabulary: Vec<String>,
    pub seed: u64,
    pub threshold: f64,
    pub k_max: usize,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn reals(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn strings(&mut self, v: &[String]) {
        self.u64(v.len() as u64);
        for s in v {
            self.str(s);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated {}: needed {n} bytes at offset {}, {} left",
                self.what,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // every element takes at least one byte
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(Error::Checkpoint(format!("{}: implausible length {n}", self.what)));
        }
        Ok(n as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("{}: invalid UTF-8", self.what)))
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.len()?;
        (0..n).map(|_| self.str()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "{}: {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], body: Writer) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(body.buf.len() as u64).to_le_bytes());
    out.extend_from_slice(&body.buf);
}

fn write_node(w: &mut Writer, node: &Node) {
    match node {
        Node::Leaf(v) => {
            w.u8(0);
            w.f64(*v);
        }
        Node::Branch { split, left, right } => {
            match split {
                Split::Age(t) => {
                    w.u8(1);
                    w.f64(*t);
                }
                Split::Sex => w.u8(2),
            }
            write_node(w, left);
            write_node(w, right);
        }
    }
}

fn read_node(r: &mut Reader<'_>, depth: usize) -> Result<Node> {
    if depth > 64 {
        return Err(Error::Checkpoint("tree deeper than 64 levels".into()));
    }
    let split = match r.u8()? {
        0 => return Ok(Node::Leaf(r.f64()?)),
        1 => Split::Age(r.f64()?),
        2 => Split::Sex,
        t => return Err(Error::Checkpoint(format!("unknown tree node tag {t}"))),
    };
    let left = Box::new(read_node(r, depth + 1)?);
    let right = Box::new(read_node(r, depth + 1)?);
    Ok(Node::Branch { split, left, right })
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

        let mut meta = Writer::default();
        meta.str(self.kind.as_str());
        meta.u64(self.seed);
        meta.f64(self.threshold);
        meta.u64(self.k_max as u64);
        meta.strings(&self.vocabulary);
        section(&mut out, b"META", meta);

        let mut norm = Writer::default();
        norm.f64(self.normalizer.t_max);
        norm.u64(self.normalizer.ranges.len() as u64);
        for (lo, hi) in &self.normalizer.ranges {
            norm.f64(*lo);
            norm.f64(*hi);
        }
        section(&mut out, b"NORM", norm);

        let mut folds = Writer::default();
        folds.strings(&self.train_ids);
        folds.strings(&self.validation_ids);
        section(&mut out, b"FOLD", folds);

        match &self.model {
            FittedModel::Aam(model) => {
                let h = &model.hyper;
                let mut hyper = Writer::default();
                hyper.u64(h.hidden_units as u64);
                hyper.u64(h.layers as u64);
                hyper.f64(h.dropout);
                hyper.f64(h.l2);
                hyper.u8(h.use_demographics as u8);
                section(&mut out, b"HYPR", hyper);

                let mut params = Writer::default();
                let tensors = model.params.tensors();
                params.u64(tensors.len() as u64);
                for (t, _) in tensors {
                    params.reals(t);
                }
                section(&mut out, b"PARM", params);
            }
            FittedModel::MeanAgg(o) => {
                let mut w = Writer::default();
                w.u8(matches!(o, Orientation::Flipped) as u8);
                section(&mut out, b"MEAN", w);
            }
            FittedModel::MeanAggDemo(head) => {
                let mut w = Writer::default();
                w.f64(head.intercept);
                for v in head.weights {
                    w.f64(v);
                }
                section(&mut out, b"LOGH", w);
            }
            FittedModel::Forest(forest) => {
                let mut w = Writer::default();
                w.u64(forest.trees.len() as u64);
                for tree in &forest.trees {
                    write_node(&mut w, &tree.root);
                }
                section(&mut out, b"RFST", w);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "checkpoint header");
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})"
            )));
        }

        let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
        while r.pos < bytes.len() {
            r.what = "section header";
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            let len = r.u64()?;
            r.what = "section body";
            let body = r.take(usize::try_from(len).map_err(|_| Error::Checkpoint("section too large".into()))?)?;
            if sections.iter().any(|(t, _)| *t == tag) {
                return Err(Error::Checkpoint(format!("duplicate section {}", String::from_utf8_lossy(&tag))));
            }
            sections.push((tag, body));
        }
        let find = |tag: &[u8; 4]| sections.iter().find(|(t, _)| t == tag).map(|(_, b)| *b);
        let need = |tag: &'static [u8; 4]| {
            find(tag).ok_or_else(|| Error::Checkpoint(format!("missing section {}", String::from_utf8_lossy(tag))))
        };

        let mut meta = Reader::new(need(b"META")?, "META section");
        let kind: ModelKind = meta.str()?.parse()?;
        let seed = meta.u64()?;
        let threshold = meta.f64()?;
        let k_max = meta.u64()? as usize;
        let vocabulary = meta.strings()?;
        meta.finish()?;
        if vocabulary != Metric::vocabulary() {
            return Err(Error::Checkpoint("metric vocabulary differs from this build".into()));
        }

        let mut norm = Reader::new(need(b"NORM")?, "NORM section");
        let t_max = norm.f64()?;
        let n = norm.len()?;
        let ranges = (0..n)
            .map(|_| Ok((norm.f64()?, norm.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        norm.finish()?;
        if ranges.len() != vocabulary.len() {
            return Err(Error::Checkpoint(format!(
                "{} normalizer ranges for {} metrics",
                ranges.len(),
                vocabulary.len()
            )));
        }

        let mut folds = Reader::new(need(b"FOLD")?, "FOLD section");
        let train_ids = folds.strings()?;
        let validation_ids = folds.strings()?;
        folds.finish()?;

        let model = match kind {
            ModelKind::Aam | ModelKind::AamDemo => {
                let mut h = Reader::new(need(b"HYPR")?, "HYPR section");
                let hyper = AamHyperparams {
                    hidden_units: h.u64()? as usize,
                    layers: h.u64()? as usize,
                    dropout: h.f64()?,
                    l2: h.f64()?,
                    use_demographics: h.u8()? != 0,
                };
                h.finish()?;
                let mut model = Aam::zeroed(hyper).map_err(|e| Error::Checkpoint(format!("hyperparameters: {e}")))?;
                let mut p = Reader::new(need(b"PARM")?, "PARM section");
                let count = p.len()?;
                let mut tensors = model.params.tensors_mut();
                if count != tensors.len() {
                    return Err(Error::Checkpoint(format!(
                        "{count} parameter tensors, expected {}",
                        tensors.len()
                    )));
                }
                for (i, t) in tensors.iter_mut().enumerate() {
                    let values = p.reals()?;
                    if values.len() != t.len() {
                        return Err(Error::Checkpoint(format!(
                            "tensor {i} has {} values, expected {}",
                            values.len(),
                            t.len()
                        )));
                    }
                    t.copy_from_slice(&values);
                }
                p.finish()?;
                if !model.params.is_finite() {
                    return Err(Error::Checkpoint("non-finite parameters".into()));
                }
                FittedModel::Aam(model)
            }
            ModelKind::MeanAgg => {
                let mut r = Reader::new(need(b"MEAN")?, "MEAN section");
                let o = match r.u8()? {
                    0 => Orientation::Direct,
                    1 => Orientation::Flipped,
                    v => return Err(Error::Checkpoint(format!("unknown orientation {v}"))),
                };
                r.finish()?;
                FittedModel::MeanAgg(o)
            }
            ModelKind::MeanAggDemo => {
                let mut r = Reader::new(need(b"LOGH")?, "LOGH section");
                let intercept = r.f64()?;
                let weights = [r.f64()?, r.f64()?, r.f64()?];
                r.finish()?;
                FittedModel::MeanAggDemo(LogisticHead { weights, intercept })
            }
            ModelKind::RfDemo => {
                let mut r = Reader::new(need(b"RFST")?, "RFST section");
                let n = r.len()?;
                let trees = (0..n)
                    .map(|_| Ok(DecisionTree { root: read_node(&mut r, 0)? }))
                    .collect::<Result<Vec<_>>>()?;
                r.finish()?;
                if trees.is_empty() {
                    return Err(Error::Checkpoint("forest without trees".into()));
                }
                FittedModel::Forest(RfModel { trees })
            }
        };

        Ok(Checkpoint {
            kind,
            model,
            normalizer: Normalizer { ranges, t_max },
            vocabulary,
            seed,
            threshold,
            k_max,
            train_ids,
            validation_ids,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
