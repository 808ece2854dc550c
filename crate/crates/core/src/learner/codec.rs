//! Little-endian binary encoding for fitted forests.
//!
//! Files start with a 4-byte magic and a `u32` format version; everything
//! after that is length-prefixed so a reader never needs out-of-band schema.

use super::{DecisionTree, ForestParams, MaxFeatures, Node, RandomForest, Task};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RSAB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn with_header() -> Self {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(MAGIC);
        e.u32(FORMAT_VERSION);
        e
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn count(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }

    pub fn str(&mut self, s: &str) {
        self.count(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn forest(&mut self, f: &RandomForest) {
        let p = &f.params;
        self.u8(match p.task {
            Task::Regression => 0,
            Task::Classification => 1,
        });
        self.count(p.n_trees);
        match p.max_features {
            MaxFeatures::All => self.u8(0),
            MaxFeatures::Sqrt => self.u8(1),
            MaxFeatures::Fixed(k) => {
                self.u8(2);
                self.u64(k as u64);
            }
        }
        self.u8(u8::from(p.bootstrap));
        self.u64(p.seed);
        self.count(f.feature_names.len());
        for n in &f.feature_names {
            self.str(n);
        }
        self.count(f.classes.len());
        for &c in &f.classes {
            self.f64(c);
        }
        for t in &f.trees {
            self.count(t.nodes().len());
            for node in t.nodes() {
                match *node {
                    Node::Leaf { value } => {
                        self.u8(0);
                        self.f64(value);
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                    } => {
                        self.u8(1);
                        self.u32(feature);
                        self.f64(threshold);
                        self.u32(left);
                    }
                }
            }
        }
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn with_header(buf: &'a [u8]) -> Result<Self> {
        if buf.len() < 8 || &buf[..4] != MAGIC {
            return Err(Error::Format("not a model bank file (bad magic)".into()));
        }
        let mut d = Decoder { buf, pos: 4 };
        let version = d.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model bank format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("truncated model bank file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn count(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.count()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format("invalid utf-8 in model bank".into()))
    }

    pub fn forest(&mut self) -> Result<RandomForest> {
        let task = match self.u8()? {
            0 => Task::Regression,
            1 => Task::Classification,
            t => return Err(Error::Format(format!("unknown task tag {t}"))),
        };
        let n_trees = self.count()?;
        let max_features = match self.u8()? {
            0 => MaxFeatures::All,
            1 => MaxFeatures::Sqrt,
            2 => MaxFeatures::Fixed(self.u64()? as usize),
            t => return Err(Error::Format(format!("unknown max_features tag {t}"))),
        };
        let bootstrap = self.u8()? != 0;
        let seed = self.u64()?;
        let n_names = self.count()?;
        let names = (0..n_names).map(|_| self.str()).collect::<Result<Vec<_>>>()?;
        let n_classes = self.count()?;
        let classes = (0..n_classes).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = self.count()?;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
            for _ in 0..n_nodes {
                nodes.push(match self.u8()? {
                    0 => Node::Leaf { value: self.f64()? },
                    1 => Node::Split {
                        feature: self.u32()?,
                        threshold: self.f64()?,
                        left: self.u32()?,
                    },
                    t => return Err(Error::Format(format!("unknown node tag {t}"))),
                });
            }
            trees.push(DecisionTree::from_nodes(task, nodes)?);
        }
        RandomForest::from_parts(
            ForestParams {
                task,
                n_trees,
                max_features,
                bootstrap,
                seed,
            },
            names,
            classes,
            trees,
        )
    }
}
