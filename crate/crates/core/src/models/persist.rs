//! Versioned binary model files with a plain-text sidecar.
//!
//! Layout (little-endian): magic `WHZMODEL`, u32 version, u32 family tag,
//! u32 header length + JSON header (hyperparameters), u32 blob count, then per
//! blob: u16 name length, name, u64 value count, f64 values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::boost::{RegressionTree, TreeNode};
use super::cnn::{CnnParams, PARAM_NAMES};
use super::{
    BoostModel, CnnWeights, FeatureClassifier, FeatureModel, HyperParams, LdaModel, LogisticModel, Standardizer, SvmModel, TrainedModel,
};
use crate::error::{Error, Result};
use crate::models::Family;

pub const MODEL_MAGIC: &[u8; 8] = b"WHZMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    params: HyperParams,
    converged: bool,
}

type Blobs = BTreeMap<String, Vec<f64>>;

fn blobs_of(model: &TrainedModel) -> (Header, Vec<(String, Vec<f64>)>) {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let mut put = |name: &str, v: Vec<f64>| out.push((name.to_string(), v));
    match model {
        TrainedModel::Feature(m) => {
            put("std_mean", m.standardizer.mean.clone());
            put("std_scale", m.standardizer.scale.clone());
            match &m.classifier {
                FeatureClassifier::Logistic(l) => {
                    put("weights", l.weights.clone());
                    put("intercept", vec![l.intercept]);
                    put("iterations", vec![l.iterations as f64]);
                }
                FeatureClassifier::Lda(l) => {
                    put("coef", l.coef.clone());
                    put("bias", vec![l.bias]);
                }
                FeatureClassifier::Svm(s) => {
                    let d = s.support_vectors.first().map_or(0, |v| v.len());
                    put("sv_shape", vec![s.support_vectors.len() as f64, d as f64]);
                    put("support_vectors", s.support_vectors.iter().flatten().copied().collect());
                    put("coef", s.coef.clone());
                    put("bias", vec![s.bias]);
                    put("iterations", vec![s.iterations as f64]);
                }
                FeatureClassifier::Boost(b) => {
                    let mut nodes = Vec::new();
                    let mut sizes = Vec::new();
                    for t in &b.trees {
                        sizes.push(t.nodes.len() as f64);
                        for n in &t.nodes {
                            nodes.extend_from_slice(&[
                                n.feature.map_or(-1.0, |f| f as f64),
                                n.threshold,
                                n.left as f64,
                                n.right as f64,
                                n.value,
                            ]);
                        }
                    }
                    put("tree_sizes", sizes);
                    put("tree_nodes", nodes);
                    put("learn_rate", vec![b.learn_rate]);
                    put("train_loss", b.train_loss.clone());
                }
            }
            (
                Header {
                    params: m.params.clone(),
                    converged: m.converged,
                },
                out,
            )
        }
        TrainedModel::Cnn(w) => {
            for (name, t) in PARAM_NAMES.iter().zip(w.params.tensors()) {
                put(name, t.iter().map(|&v| f64::from(v)).collect());
            }
            put("running_mean", w.running_mean.iter().map(|&v| f64::from(v)).collect());
            put("running_var", w.running_var.iter().map(|&v| f64::from(v)).collect());
            (
                Header {
                    params: HyperParams::Cnn { arch: w.arch },
                    converged: true,
                },
                out,
            )
        }
    }
}

pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let (header, blobs) = blobs_of(model);
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.family().tag().to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, values) in &blobs {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format("model file is truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn blob<'b>(blobs: &'b Blobs, name: &str) -> Result<&'b Vec<f64>> {
    blobs
        .get(name)
        .ok_or_else(|| Error::Format(format!("model file lacks the {name} blob")))
}

fn scalar(blobs: &Blobs, name: &str) -> Result<f64> {
    match blob(blobs, name)?.as_slice() {
        [v] => Ok(*v),
        other => Err(Error::Format(format!("{name} should hold one value, found {}", other.len()))),
    }
}

fn index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(Error::Format(format!("{what} is not a valid index: {v}")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!("model format version {version}")));
    }
    let tag = r.u32()?;
    let family = Family::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown family tag {tag}")))?;
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)?;
    if header.params.family() != family {
        return Err(Error::Format("family tag disagrees with the stored hyperparameters".into()));
    }
    let mut blobs = Blobs::new();
    for _ in 0..r.u32()? {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| Error::Format("blob name is not UTF-8".into()))?;
        let count = r.u64()? as usize;
        if count > (bytes.len() - r.pos) / 8 {
            return Err(Error::Format("model file is truncated".into()));
        }
        let values = r
            .take(count * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.insert(name, values);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after the last blob".into()));
    }

    if let HyperParams::Cnn { arch } = header.params {
        let to32 = |v: &Vec<f64>| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let mut params = CnnParams::<f32>::zeros(&arch);
        for (name, t) in PARAM_NAMES.iter().zip(params.tensors_mut()) {
            *t = to32(blob(&blobs, name)?);
        }
        let w = CnnWeights {
            arch,
            params,
            running_mean: to32(blob(&blobs, "running_mean")?),
            running_var: to32(blob(&blobs, "running_var")?),
        };
        w.validate().map_err(|e| Error::Format(e.to_string()))?;
        return Ok(TrainedModel::Cnn(w));
    }

    let standardizer = Standardizer {
        mean: blob(&blobs, "std_mean")?.clone(),
        scale: blob(&blobs, "std_scale")?.clone(),
    };
    let d = standardizer.dims();
    if standardizer.scale.len() != d {
        return Err(Error::Format("standardizer blobs differ in length".into()));
    }
    let expect_len = |v: &Vec<f64>, what: &str| -> Result<()> {
        if v.len() == d {
            Ok(())
        } else {
            Err(Error::Format(format!("{what} has {} values, expected {d}", v.len())))
        }
    };
    let classifier = match &header.params {
        HyperParams::Logistic { .. } => {
            let weights = blob(&blobs, "weights")?.clone();
            expect_len(&weights, "weights")?;
            FeatureClassifier::Logistic(LogisticModel {
                weights,
                intercept: scalar(&blobs, "intercept")?,
                iterations: index(scalar(&blobs, "iterations")?, "iterations")?,
            })
        }
        HyperParams::Lda { .. } => {
            let coef = blob(&blobs, "coef")?.clone();
            expect_len(&coef, "coef")?;
            FeatureClassifier::Lda(LdaModel {
                coef,
                bias: scalar(&blobs, "bias")?,
            })
        }
        HyperParams::Svm { kernel, kernel_scale, .. } => {
            let shape = blob(&blobs, "sv_shape")?;
            if shape.len() != 2 {
                return Err(Error::Format("sv_shape should hold two values".into()));
            }
            let (n_sv, dims) = (index(shape[0], "support vector count")?, index(shape[1], "support vector width")?);
            let flat = blob(&blobs, "support_vectors")?;
            let coef = blob(&blobs, "coef")?.clone();
            if flat.len() != n_sv * dims || coef.len() != n_sv || (n_sv > 0 && dims != d) {
                return Err(Error::Format("support vector blobs are inconsistent".into()));
            }
            FeatureClassifier::Svm(SvmModel {
                kernel: *kernel,
                kernel_scale: *kernel_scale,
                support_vectors: if dims == 0 {
                    Vec::new()
                } else {
                    flat.chunks(dims).map(|c| c.to_vec()).collect()
                },
                coef,
                bias: scalar(&blobs, "bias")?,
                iterations: index(scalar(&blobs, "iterations")?, "iterations")?,
            })
        }
        HyperParams::Boost { .. } => {
            let sizes = blob(&blobs, "tree_sizes")?;
            let nodes = blob(&blobs, "tree_nodes")?;
            let mut trees = Vec::new();
            let mut at = 0usize;
            for &s in sizes {
                let s = index(s, "tree size")?;
                if s == 0 || (at + s) * 5 > nodes.len() {
                    return Err(Error::Format("tree blobs are inconsistent".into()));
                }
                let mut tree = Vec::with_capacity(s);
                for k in 0..s {
                    let n = &nodes[(at + k) * 5..(at + k + 1) * 5];
                    let feature = if n[0] < 0.0 { None } else { Some(index(n[0], "split feature")?) };
                    let (left, right) = (index(n[2], "child")?, index(n[3], "child")?);
                    if feature.is_some_and(|f| f >= d || left >= s || right >= s || left <= k || right <= k) {
                        return Err(Error::Format("tree node points outside its tree".into()));
                    }
                    tree.push(TreeNode {
                        feature,
                        threshold: n[1],
                        left,
                        right,
                        value: n[4],
                    });
                }
                at += s;
                trees.push(RegressionTree { nodes: tree });
            }
            if at * 5 != nodes.len() {
                return Err(Error::Format("tree blobs are inconsistent".into()));
            }
            FeatureClassifier::Boost(BoostModel {
                trees,
                learn_rate: scalar(&blobs, "learn_rate")?,
                train_loss: blob(&blobs, "train_loss")?.clone(),
            })
        }
        HyperParams::Cnn { .. } => unreachable!("handled above"),
    };
    Ok(TrainedModel::Feature(FeatureModel {
        params: header.params,
        standardizer,
        classifier,
        converged: header.converged,
    }))
}

/// Human-readable summary written next to the binary file.
pub fn model_summary(model: &TrainedModel) -> String {
    let (header, blobs) = blobs_of(model);
    let mut s = String::new();
    let _ = writeln!(s, "family: {}", model.family());
    let _ = writeln!(s, "format_version: {FORMAT_VERSION}");
    let _ = writeln!(s, "hyperparameters: {}", serde_json::to_string(&header.params).unwrap_or_default());
    let _ = writeln!(s, "converged: {}", header.converged);
    let total: usize = blobs.iter().map(|(_, v)| v.len()).sum();
    let _ = writeln!(s, "parameters: {total}");
    for (name, v) in &blobs {
        let _ = writeln!(s, "  {name}: {}", v.len());
    }
    s
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".txt");
    path.with_file_name(name)
}

/// Writes the model and its sidecar, each through a temporary file.
pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    crate::io_util::write_atomic(path, &encode_model(model))?;
    crate::io_util::write_atomic(&sidecar_path(path), model_summary(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_feature_model, CnnArchitecture, TrainOptions};
    use rand_distr::{Distribution, StandardNormal};

    fn data() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::rng_from_seed(1);
        (0..60)
            .map(|i| {
                let pos = i % 3 == 0;
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                (vec![a + pos as u8 as f64, b, 4.0], pos)
            })
            .unzip()
    }

    #[test]
    fn every_family_round_trips() {
        let (x, y) = data();
        for f in Family::ALL.into_iter().filter(|f| f.uses_features()) {
            let mut p = HyperParams::default_for(f);
            if let HyperParams::Boost { n_learn, .. } = &mut p {
                *n_learn = 7;
            }
            let m = TrainedModel::Feature(train_feature_model(&p, &x, &y, &TrainOptions::default()).unwrap());
            let back = decode_model(&encode_model(&m)).unwrap();
            assert_eq!(back, m, "{f}");
        }
        let arch = CnnArchitecture {
            input_rows: 9,
            input_cols: 7,
            ..CnnArchitecture::new(3, 2, 2, 3)
        };
        let w = CnnWeights::<f32>::init(arch, 4).unwrap();
        let m = TrainedModel::Cnn(w);
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let (x, y) = data();
        let m =
            TrainedModel::Feature(train_feature_model(&HyperParams::default_for(Family::Lda), &x, &y, &TrainOptions::default()).unwrap());
        let bytes = encode_model(&m);
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::Format(_))));
        let mut newer = bytes.clone();
        newer[8] = 9;
        assert!(matches!(decode_model(&newer), Err(Error::Unsupported(_))));
        let mut wrong_family = bytes;
        wrong_family[12] = 5;
        assert!(matches!(decode_model(&wrong_family), Err(Error::Format(_))));
    }

    #[test]
    fn save_writes_binary_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y) = data();
        let m = TrainedModel::Feature(
            train_feature_model(&HyperParams::default_for(Family::Logistic), &x, &y, &TrainOptions::default()).unwrap(),
        );
        let path = dir.path().join("baseline.model");
        save_model(&path, &m).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
        let summary = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(summary.starts_with("family: logistic\n"));
        assert!(summary.contains("weights: 3"));
    }
}
