//! Datasets, synthetic case generators, and on-disk formats.
//!
//! Model files are JSON (schema 1). Every parameter is stored twice: as the
//! 16-hex-digit IEEE-754 bit pattern, which is authoritative, and as a
//! decimal rendering for people. Loading checks that the two agree.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::attack::Domain;
use crate::error::{Error, Result};
use crate::models::{Layer, LinearModel, Matrix, ReluNetwork};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<i64>,
    pub domain: Domain,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<i64>, domain: Domain) -> Result<Dataset> {
        if features.rows() != labels.len() {
            return Err(Error::CountMismatch { images: features.rows(), labels: labels.len() });
        }
        if let Some(v) = features.as_slice().iter().find(|&&v| !domain.contains(v)) {
            return Err(Error::DomainError(format!(
                "feature {v} outside [{}, {}]",
                domain.lo, domain.hi
            )));
        }
        Ok(Dataset { features, labels, domain })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows whose label is `neg` or `pos`, relabelled to -1 and +1.
    pub fn binary_pair(&self, neg: i64, pos: i64) -> Result<Dataset> {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.len() {
            let y = self.labels[i];
            if y == neg || y == pos {
                data.extend_from_slice(self.row(i));
                labels.push(if y == pos { 1 } else { -1 });
            }
        }
        Dataset::new(Matrix::new(labels.len(), self.dim(), data)?, labels, self.domain)
    }

    /// First `n` rows (all rows if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        self.slice(0, n.min(self.len()))
    }

    /// Rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let end = end.min(self.len());
        let start = start.min(end);
        let d = self.dim();
        let data = self.features.as_slice()[start * d..end * d].to_vec();
        Dataset {
            features: Matrix::new(end - start, d, data).expect("slice of a valid matrix"),
            labels: self.labels[start..end].to_vec(),
            domain: self.domain,
        }
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::TruncatedFile(path.to_path_buf()))
}

const IDX_IMAGES: u32 = 2051;
const IDX_LABELS: u32 = 2049;

/// Reads an IDX image/label file pair. Pixels keep their `[0, 255]` values
/// unless `rescale` maps them to `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path, rescale: bool) -> Result<Dataset> {
    let img = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lab = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let magic = read_u32(&img, 0, images_path)?;
    if magic != IDX_IMAGES {
        return Err(Error::BadMagic { expected: IDX_IMAGES, found: magic });
    }
    let magic = read_u32(&lab, 0, labels_path)?;
    if magic != IDX_LABELS {
        return Err(Error::BadMagic { expected: IDX_LABELS, found: magic });
    }
    let n = read_u32(&img, 4, images_path)? as usize;
    let rows = read_u32(&img, 8, images_path)? as usize;
    let cols = read_u32(&img, 12, images_path)? as usize;
    let n_labels = read_u32(&lab, 4, labels_path)? as usize;
    if n != n_labels {
        return Err(Error::CountMismatch { images: n, labels: n_labels });
    }
    let d = rows * cols;
    let pixels = img.get(16..16 + n * d).ok_or_else(|| Error::TruncatedFile(images_path.to_path_buf()))?;
    let labels = lab.get(8..8 + n).ok_or_else(|| Error::TruncatedFile(labels_path.to_path_buf()))?;
    let (scale, domain) = if rescale {
        (1.0 / 255.0, Domain::new(0.0, 1.0)?)
    } else {
        (1.0, Domain::new(0.0, 255.0)?)
    };
    let data = pixels.iter().map(|&p| if rescale { f64::from(p) * scale } else { f64::from(p) }).collect();
    Dataset::new(Matrix::new(n, d, data)?, labels.iter().map(|&l| i64::from(l)).collect(), domain)
}

/// IDX encoding of images and labels, the inverse of [`load_idx`] on
/// unscaled data.
pub fn encode_idx(images: &[Vec<u8>], rows: u32, cols: u32, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len() * (rows * cols) as usize);
    img.extend(IDX_IMAGES.to_be_bytes());
    img.extend((images.len() as u32).to_be_bytes());
    img.extend(rows.to_be_bytes());
    img.extend(cols.to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend(IDX_LABELS.to_be_bytes());
    lab.extend((labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

/// Random linear case: `w`, then `b`, then `x`, each entry uniform in
/// `[−1, 1]`.
pub fn gen_random_linear_case(d: usize, seed: u64) -> Result<(LinearModel, Vec<f64>)> {
    gen_random_linear_case_from(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn gen_random_linear_case_from<R: Rng>(d: usize, rng: &mut R) -> Result<(LinearModel, Vec<f64>)> {
    if d == 0 {
        return Err(Error::DomainError("dimension must be >= 1".into()));
    }
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let b = rng.random_range(-1.0..=1.0);
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Ok((LinearModel::new(w, b)?, x))
}

pub const ERROR_SCALE_W: f64 = 3.3e-9;
pub const ERROR_SCALE_B: f64 = 3.3e9;
pub const ERROR_SCALE_X: f64 = 3.3e9;

/// The badly scaled case `wᵢ = 3.3e-9`, `b = 3.3e9`, `xᵢ = 3.3e9`.
pub fn gen_error_scale_case(d: usize) -> Result<(LinearModel, Vec<f64>)> {
    if d == 0 {
        return Err(Error::DomainError("dimension must be >= 1".into()));
    }
    Ok((LinearModel::new(vec![ERROR_SCALE_W; d], ERROR_SCALE_B)?, vec![ERROR_SCALE_X; d]))
}

/// Isotropic Gaussian blobs, `per_class` points around each center, labels
/// `0..centers.len()`, interleaved by class.
pub fn gen_blobs(per_class: usize, centers: &[Vec<f64>], std: f64, seed: u64) -> Result<Dataset> {
    let d = centers.first().map_or(0, Vec::len);
    if d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(Error::DomainError("blob centers need a common positive dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(per_class * centers.len() * d);
    let mut labels = Vec::with_capacity(per_class * centers.len());
    for _ in 0..per_class {
        for (k, c) in centers.iter().enumerate() {
            for &ci in c {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(ci + std * z);
            }
            labels.push(k as i64);
        }
    }
    let domain = Domain::new(f64::NEG_INFINITY, f64::INFINITY)?;
    Dataset::new(Matrix::new(labels.len(), d, data)?, labels, domain)
}

/// Random network with layer sizes `arch`. Weights are uniform in
/// `±1/√fan_in`. With `nonnegative`, hidden weights are drawn from
/// `[0, 1/√fan_in]` and hidden biases from `[0.5, 1]`, so every ReLU is
/// active on nonnegative inputs; otherwise hidden biases are uniform in
/// `[−0.5, 0.5]`. The output layer is always signed.
pub fn gen_random_relu_net<R: Rng>(arch: &[usize], nonnegative: bool, rng: &mut R) -> Result<ReluNetwork> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(Error::InvalidConfig(format!("bad architecture {arch:?}")));
    }
    let mut layers = Vec::with_capacity(arch.len() - 1);
    for (idx, pair) in arch.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let hidden = idx + 2 < arch.len();
        let limit = 1.0 / (fan_in as f64).sqrt();
        let lo = if hidden && nonnegative { 0.0 } else { -limit };
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(lo..=limit)).collect();
        let b: Vec<f64> = (0..fan_out)
            .map(|_| match (hidden, nonnegative) {
                (true, true) => rng.random_range(0.5..=1.0),
                _ => rng.random_range(-0.5..=0.5),
            })
            .collect();
        layers.push(Layer::new(Matrix::new(fan_out, fan_in, w)?, b)?);
    }
    ReluNetwork::new(layers)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Relu(ReluNetwork),
}

impl Model {
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Relu(n) => n.input_dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedModel {
    pub model: Model,
    pub metadata: BTreeMap<String, Value>,
    /// The file carried only decimal renderings.
    pub legacy_decimal: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: u32,
    #[serde(rename = "type")]
    kind: String,
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_hex: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    biases_hex: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights_dec: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    biases_dec: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    metadata: BTreeMap<String, Value>,
}

pub fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn f64_from_hex(s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(Error::SchemaError(format!("bit pattern {s:?} is not 16 hex digits")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::SchemaError(format!("bad bit pattern {s:?}")))
}

fn model_parts(model: &Model) -> (&'static str, Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    match model {
        Model::Linear(m) => ("linear", vec![m.dim(), 1], vec![m.w.clone()], vec![vec![m.b]]),
        Model::Relu(n) => {
            let mut dims = vec![n.input_dim()];
            dims.extend(n.layers().iter().map(Layer::outputs));
            let w = n.layers().iter().map(|l| l.weights.as_slice().to_vec()).collect();
            let b = n.layers().iter().map(|l| l.bias.clone()).collect();
            ("relu", dims, w, b)
        }
    }
}

/// Canonical JSON bytes of a model file.
pub fn model_to_bytes(model: &Model, metadata: &BTreeMap<String, Value>) -> Result<Vec<u8>> {
    let (kind, dims, w, b) = model_parts(model);
    let hex = |v: &Vec<Vec<f64>>| v.iter().map(|r| r.iter().map(|&x| f64_to_hex(x)).collect()).collect();
    let file = ModelFile {
        schema: 1,
        kind: kind.to_string(),
        dims,
        weights_hex: Some(hex(&w)),
        biases_hex: Some(hex(&b)),
        weights_dec: Some(w),
        biases_dec: Some(b),
        metadata: metadata.clone(),
    };
    let mut out = serde_json::to_vec_pretty(&file).map_err(|e| Error::SchemaError(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn decode_values(
    hex: Option<Vec<Vec<String>>>,
    dec: Option<Vec<Vec<f64>>>,
    what: &str,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let (values, legacy) = match (hex, dec) {
        (Some(hex), dec) => {
            let values: Vec<Vec<f64>> =
                hex.iter().map(|r| r.iter().map(|s| f64_from_hex(s)).collect()).collect::<Result<_>>()?;
            if let Some(dec) = dec {
                if dec.len() != values.len() || dec.iter().zip(&values).any(|(a, b)| a.len() != b.len()) {
                    return Err(Error::SchemaError(format!("{what}: decimal and hex shapes differ")));
                }
                for (rd, rh) in dec.iter().zip(&values) {
                    for (d, h) in rd.iter().zip(rh) {
                        if d.to_bits() != h.to_bits() {
                            return Err(Error::BitPatternMismatch { hex: f64_to_hex(*h), decimal: *d });
                        }
                    }
                }
            }
            (values, false)
        }
        (None, Some(dec)) => (dec, true),
        (None, None) => return Err(Error::SchemaError(format!("missing {what}"))),
    };
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::SchemaError(format!("non-finite value in {what}")));
    }
    Ok((values, legacy))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| Error::SchemaError(e.to_string()))?;
    if file.schema != 1 {
        return Err(Error::SchemaError(format!("unsupported schema version {}", file.schema)));
    }
    let (w, legacy_w) = decode_values(file.weights_hex, file.weights_dec, "weights")?;
    let (b, legacy_b) = decode_values(file.biases_hex, file.biases_dec, "biases")?;
    let dims = file.dims;
    let model = match file.kind.as_str() {
        "linear" => {
            if dims.len() != 2 || dims[1] != 1 || w.len() != 1 || b.len() != 1 || b[0].len() != 1 {
                return Err(Error::SchemaError("linear model needs dims [D, 1], one weight row and one bias".into()));
            }
            if w[0].len() != dims[0] {
                return Err(Error::SchemaError(format!("expected {} weights, found {}", dims[0], w[0].len())));
            }
            Model::Linear(LinearModel::new(w[0].clone(), b[0][0]).map_err(|e| Error::SchemaError(e.to_string()))?)
        }
        "relu" => {
            if dims.len() < 2 || w.len() != dims.len() - 1 || b.len() != w.len() {
                return Err(Error::SchemaError("layer count does not match dims".into()));
            }
            let mut layers = Vec::with_capacity(w.len());
            for (i, (wl, bl)) in w.into_iter().zip(b).enumerate() {
                let m = Matrix::new(dims[i + 1], dims[i], wl).map_err(|e| Error::SchemaError(e.to_string()))?;
                layers.push(Layer::new(m, bl).map_err(|e| Error::SchemaError(e.to_string()))?);
            }
            Model::Relu(ReluNetwork::new(layers).map_err(|e| Error::SchemaError(e.to_string()))?)
        }
        other => return Err(Error::SchemaError(format!("unknown model type {other:?}"))),
    };
    Ok(LoadedModel { model, metadata: file.metadata, legacy_decimal: legacy_w || legacy_b })
}

pub fn save_model(path: &Path, model: &Model, metadata: &BTreeMap<String, Value>) -> Result<()> {
    write_atomic(path, &model_to_bytes(model, metadata)?)
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    model_from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes(header: &[&str], rows: &[Vec<String>], delimiter: u8) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_csv_atomic(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows, b',')?)
}

pub fn write_tsv_atomic(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows, b'\t')?)
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(|e| Error::Csv(e.to_string()))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| Error::Csv(e.to_string())))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Dataset as CSV with columns `x0..x{D-1},label`. Rust's float formatting
/// is shortest-round-trip, so reloading is bit-exact.
pub fn save_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| {
            let mut r: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
            r.push(data.labels[i].to_string());
            r
        })
        .collect();
    write_csv_atomic(path, &header_refs, &rows)
}

pub fn load_dataset_csv(path: &Path, domain: Domain) -> Result<Dataset> {
    let (header, rows) = read_csv(path)?;
    if header.last().map(String::as_str) != Some("label") {
        return Err(Error::Csv(format!("{}: last column must be `label`", path.display())));
    }
    let d = header.len() - 1;
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d + 1 {
            return Err(Error::Csv(format!("row {i} has {} fields, expected {}", r.len(), d + 1)));
        }
        for v in &r[..d] {
            data.push(v.parse::<f64>().map_err(|e| Error::Csv(format!("row {i}: {e}")))?);
        }
        labels.push(r[d].parse::<i64>().map_err(|e| Error::Csv(format!("row {i}: {e}")))?);
    }
    Dataset::new(Matrix::new(labels.len(), d, data)?, labels, domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn idx_roundtrip_and_errors() {
        let dir = tmp();
        let (img, lab) = encode_idx(&[vec![0, 255, 3, 4], vec![9, 8, 7, 6]], 2, 2, &[1, 7]);
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        fs::write(&ip, &img).unwrap();
        fs::write(&lp, &lab).unwrap();
        let ds = load_idx(&ip, &lp, false).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 4));
        assert_eq!(ds.row(0), &[0.0, 255.0, 3.0, 4.0]);
        assert_eq!(ds.labels, vec![1, 7]);
        let scaled = load_idx(&ip, &lp, true).unwrap();
        assert_eq!(scaled.row(0)[1], 1.0);
        assert_eq!(scaled.domain, Domain::new(0.0, 1.0).unwrap());

        let mut bad = img.clone();
        bad[3] = 0x04;
        fs::write(&ip, &bad).unwrap();
        assert_eq!(load_idx(&ip, &lp, false).unwrap_err(), Error::BadMagic { expected: 2051, found: 2052 });
        fs::write(&ip, &img[..img.len() - 1]).unwrap();
        assert!(matches!(load_idx(&ip, &lp, false), Err(Error::TruncatedFile(_))));
        fs::write(&ip, &img).unwrap();
        let (_, lab3) = encode_idx(&[], 2, 2, &[1, 2, 3]);
        fs::write(&lp, &lab3).unwrap();
        assert_eq!(load_idx(&ip, &lp, false).unwrap_err(), Error::CountMismatch { images: 2, labels: 3 });
    }

    #[test]
    fn random_cases() {
        let (m, x) = gen_random_linear_case(50, 3).unwrap();
        assert!(m.w.iter().chain(&x).chain(std::iter::once(&m.b)).all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(gen_random_linear_case(50, 3).unwrap(), (m, x));
        assert_ne!(gen_random_linear_case(50, 4).unwrap().1, gen_random_linear_case(50, 3).unwrap().1);
        assert!(gen_random_linear_case(0, 1).is_err());
    }

    #[test]
    fn error_scale_constants() {
        let (m, x) = gen_error_scale_case(20).unwrap();
        assert!(m.w.iter().all(|v| v.to_bits() == 3.3e-9f64.to_bits()));
        assert_eq!(m.b.to_bits(), 3.3e9f64.to_bits());
        assert!(x.iter().all(|v| v.to_bits() == 3.3e9f64.to_bits()));
    }

    #[test]
    fn model_roundtrip_is_bit_exact() {
        let dir = tmp();
        let path = dir.path().join("m.json");
        let m = Model::Linear(LinearModel::new(vec![0.1, -1e-310, 1.0 / 3.0], 5e-324).unwrap());
        let mut meta = BTreeMap::new();
        meta.insert("seed".to_string(), Value::from(7));
        save_model(&path, &m, &meta).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.model, m);
        assert!(!loaded.legacy_decimal);
        save_model(&path, &loaded.model, &loaded.metadata).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn legacy_and_bad_files() {
        let legacy = br#"{"schema":1,"type":"linear","dims":[2,1],"weights_dec":[[0.5,-2.0]],"biases_dec":[[1.0]]}"#;
        let l = model_from_bytes(legacy).unwrap();
        assert!(l.legacy_decimal);
        assert_eq!(l.model, Model::Linear(LinearModel::new(vec![0.5, -2.0], 1.0).unwrap()));

        let nan = format!(
            r#"{{"schema":1,"type":"linear","dims":[1,1],"weights_hex":[["{}"]],"biases_hex":[["{}"]]}}"#,
            f64_to_hex(f64::NAN),
            f64_to_hex(0.0)
        );
        assert!(matches!(model_from_bytes(nan.as_bytes()), Err(Error::SchemaError(_))));

        let clash = format!(
            r#"{{"schema":1,"type":"linear","dims":[1,1],"weights_hex":[["{}"]],"weights_dec":[[0.25]],"biases_hex":[["{}"]]}}"#,
            f64_to_hex(0.5),
            f64_to_hex(0.0)
        );
        assert!(matches!(model_from_bytes(clash.as_bytes()), Err(Error::BitPatternMismatch { .. })));
        assert!(matches!(model_from_bytes(b"{\"schema\":2}"), Err(Error::SchemaError(_))));
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        let ds = gen_blobs(5, &[vec![0.0, 0.1], vec![1.0 / 3.0, 2.0]], 0.3, 1).unwrap();
        save_dataset_csv(&path, &ds).unwrap();
        let back = load_dataset_csv(&path, ds.domain).unwrap();
        assert_eq!(back, ds);
        assert_eq!(ds.binary_pair(0, 1).unwrap().labels[..2], [-1, 1]);
        assert_eq!(ds.take(3).len(), 3);
    }
}
