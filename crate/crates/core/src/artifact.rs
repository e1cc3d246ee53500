//! Binary model files: a magic string, a format version, a JSON header and
//! the parameter tensors as little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{SYMBOLS, WORD_LEN};
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network, ParamStore, Tensor};
use crate::taggers::{Method, Scorer, TrainMeta, TrainedTagger};

pub const MAGIC: &[u8; 8] = b"CMIXMDL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub enum Artifact {
    Tagger(TrainedTagger),
    Ensemble(EnsembleModel),
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    decay: bool,
}

#[derive(Serialize, Deserialize)]
struct TaggerHeader {
    method: Method,
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    scorer: Scorer,
    theta: f64,
    dev_accuracy: f64,
    meta: TrainMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Header {
    Tagger { tagger: TaggerHeader },
    Ensemble { members: Vec<TaggerHeader>, accuracies: Vec<f64>, weights: Vec<f64> },
}

fn tagger_header(t: &TrainedTagger) -> TaggerHeader {
    TaggerHeader {
        method: t.method,
        input_shape: t.net.input_shape().to_vec(),
        specs: t.net.specs().to_vec(),
        scorer: t.scorer.clone(),
        theta: t.theta,
        dev_accuracy: t.dev_accuracy,
        meta: t.meta.clone(),
        tensors: t
            .store
            .params()
            .iter()
            .map(|p| TensorEntry { name: p.name.clone(), shape: p.value.shape().to_vec(), decay: p.decay })
            .collect(),
    }
}

fn write_tensors<W: Write>(w: &mut W, t: &TrainedTagger) -> Result<()> {
    for p in t.store.params() {
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

impl Artifact {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (header, members): (Header, Vec<&TrainedTagger>) = match self {
            Artifact::Tagger(t) => (Header::Tagger { tagger: tagger_header(t) }, vec![t]),
            Artifact::Ensemble(e) => (
                Header::Ensemble {
                    members: e.members.iter().map(tagger_header).collect(),
                    accuracies: e.accuracies.clone(),
                    weights: e.weights.clone(),
                },
                e.members.iter().collect(),
            ),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for t in members {
            write_tensors(&mut w, t)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Artifact("file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Artifact("not a model file".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(Error::Artifact(format!("format version {version}, this build reads {FORMAT_VERSION}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json).map_err(|_| Error::Artifact("truncated header".into()))?;
        let artifact = match serde_json::from_slice(&json)? {
            Header::Tagger { tagger } => Artifact::Tagger(read_tagger(tagger, &mut r)?),
            Header::Ensemble { members, accuracies, weights } => {
                let members = members.into_iter().map(|h| read_tagger(h, &mut r)).collect::<Result<Vec<_>>>()?;
                if members.len() != weights.len() || members.len() != accuracies.len() {
                    return Err(Error::Artifact("ensemble member count does not match its weights".into()));
                }
                Artifact::Ensemble(EnsembleModel { members, accuracies, weights })
            }
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Artifact("trailing bytes after the last tensor".into()));
        }
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))
    }

    pub fn into_tagger(self) -> Result<TrainedTagger> {
        match self {
            Artifact::Tagger(t) => Ok(t),
            Artifact::Ensemble(_) => Err(Error::Artifact("expected a single tagger, found an ensemble".into())),
        }
    }
}

fn read_tagger<R: Read>(h: TaggerHeader, r: &mut R) -> Result<TrainedTagger> {
    if h.input_shape != [WORD_LEN, SYMBOLS] {
        return Err(Error::Artifact(format!("unexpected input shape {:?}", h.input_shape)));
    }
    // Initial values are overwritten below; the rng only satisfies the builder.
    let mut store = ParamStore::new();
    let net = Network::build(&h.input_shape, &h.specs, &h.method.param_prefix(), &mut store, &mut ChaCha8Rng::seed_from_u64(0))?;
    let names: Vec<&str> = store.params().iter().map(|p| p.name.as_str()).collect();
    let stored: Vec<&str> = h.tensors.iter().map(|t| t.name.as_str()).collect();
    if names != stored {
        return Err(Error::Artifact(format!("parameter names {stored:?} do not match the architecture {names:?}")));
    }
    for t in &h.tensors {
        let n: usize = t.shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes).map_err(|_| Error::Artifact(format!("truncated tensor {}", t.name)))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        store.set_value(&t.name, Tensor::from_vec(&t.shape, data)?)?;
    }
    Ok(TrainedTagger {
        method: h.method,
        net,
        store,
        scorer: h.scorer,
        theta: h.theta,
        dev_accuracy: h.dev_accuracy,
        meta: h.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Token};
    use crate::taggers::{train_baseline, SeqConfig};

    fn tagger() -> TrainedTagger {
        let mk = |w: &str, l| Token::new(w, l).unwrap();
        let train = vec![mk("abc", Label::Indic), mk("xyz", Label::English)];
        train_baseline(&train, &train, &SeqConfig { epochs: 1, batch: 2, lr: 1e-3 }, 0).unwrap().0
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(matches!(Artifact::read_from(&b"nope"[..]), Err(Error::Artifact(_))));
        let mut buf = Vec::new();
        Artifact::Tagger(tagger()).write_to(&mut buf).unwrap();
        buf[8] = 9;
        let err = Artifact::read_from(&buf[..]).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let mut buf = Vec::new();
        Artifact::Tagger(tagger()).write_to(&mut buf).unwrap();
        assert!(Artifact::read_from(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(Artifact::read_from(&buf[..]).is_err());
    }

    #[test]
    fn tagger_round_trip_is_exact() {
        let t = tagger();
        let mut buf = Vec::new();
        Artifact::Tagger(t.clone()).write_to(&mut buf).unwrap();
        let back = Artifact::read_from(&buf[..]).unwrap().into_tagger().unwrap();
        assert_eq!(back.theta.to_bits(), t.theta.to_bits());
        assert_eq!(back.meta, t.meta);
        for (a, b) in back.store.params().iter().zip(t.store.params()) {
            assert_eq!(a.value, b.value);
        }
    }
}
