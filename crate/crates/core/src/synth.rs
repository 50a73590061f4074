//! Deterministic-seeded generators for the synthetic models: well-specified
//! sparse linear and logistic regression, the signal-gap construction, and a
//! dense-tail misspecification helper. Generators are pure given
//! `(spec, n)`; the same seed reproduces the same bytes on any thread count,
//! and the first `n` samples of a stream are a prefix of the first `n' > n`,
//! so nested sample sizes share their draws.

use crate::error::{IhtError, Result};
use crate::linalg::{hard_threshold, DenseMatrix, DenseVector};
use crate::loss::{sigmoid, Dataset, LossModel};
use crate::rng::RngStream;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Substream labels used by the generators.
mod label {
    pub const TRUTH: u64 = 0x01;
    pub const DATA: u64 = 0x02;
    pub const GAP_MODEL: u64 = 0x03;
    pub const TAIL: u64 = 0x04;
}

/// Kind of synthetic data model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearGaussian,
    LogisticGaussian,
}

/// Ground-truth description of a synthetic model: the parameter vector, the
/// noise level (linear only), the signal-gap used to build it (0 when not
/// applicable) and the seed its datasets are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeSpec {
    pub kind: ModelKind,
    pub p: usize,
    /// Target sparsity the excess risk is measured against.
    pub k_bar: usize,
    /// Noise standard deviation (linear models).
    pub sigma: f64,
    /// Signal gap of the gap construction, 0 otherwise.
    pub gap: f64,
    pub w_bar: DenseVector,
    pub seed: u64,
    /// Project features onto the unit ball (the bounded-design regime).
    pub normalize_features: bool,
}

impl GenerativeSpec {
    /// Well-specified sparse linear model: `w_bar` has `k_bar` entries of
    /// size `magnitude` with random signs on a random support.
    pub fn sparse_linear(p: usize, k_bar: usize, magnitude: f64, sigma: f64, seed: u64) -> Result<Self> {
        let w_bar = random_sparse_truth(p, k_bar, magnitude, seed)?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(IhtError::InvalidConfig("sigma must be >= 0".into()));
        }
        Ok(GenerativeSpec {
            kind: ModelKind::LinearGaussian,
            p,
            k_bar,
            sigma,
            gap: 0.0,
            w_bar,
            seed,
            normalize_features: false,
        })
    }

    /// Well-specified sparse logistic model.
    pub fn sparse_logistic(p: usize, k_bar: usize, magnitude: f64, seed: u64) -> Result<Self> {
        let w_bar = random_sparse_truth(p, k_bar, magnitude, seed)?;
        Ok(GenerativeSpec {
            kind: ModelKind::LogisticGaussian,
            p,
            k_bar,
            sigma: 0.0,
            gap: 0.0,
            w_bar,
            seed,
            normalize_features: false,
        })
    }

    /// Linear model with an explicit (possibly dense) target vector; used by
    /// the signal-gap construction and the misspecified regime, where the
    /// population optimum is not `k_bar`-sparse. `k_bar` stays the sparsity
    /// level excess risk is measured against.
    pub fn linear_with_target(
        w_target: DenseVector,
        k_bar: usize,
        sigma: f64,
        gap: f64,
        seed: u64,
    ) -> Result<Self> {
        if k_bar == 0 || k_bar > w_target.dim() {
            return Err(IhtError::InvalidConfig(
                "k_bar must satisfy 1 <= k_bar <= p".into(),
            ));
        }
        if !(sigma.is_finite() && sigma >= 0.0) || !(gap.is_finite() && gap >= 0.0) {
            return Err(IhtError::InvalidConfig("sigma and gap must be >= 0".into()));
        }
        Ok(GenerativeSpec {
            kind: ModelKind::LinearGaussian,
            p: w_target.dim(),
            k_bar,
            sigma,
            gap,
            w_bar: w_target,
            seed,
            normalize_features: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_normalized_features(mut self) -> Self {
        self.normalize_features = true;
        self
    }

    pub fn loss_model(&self) -> LossModel {
        match self.kind {
            ModelKind::LinearGaussian => LossModel::Squared,
            ModelKind::LogisticGaussian => LossModel::Logistic,
        }
    }

    /// Whether the population optimum is exactly `k_bar`-sparse.
    pub fn is_well_specified(&self) -> bool {
        self.w_bar.num_nonzeros() <= self.k_bar
    }
}

fn random_sparse_truth(p: usize, k_bar: usize, magnitude: f64, seed: u64) -> Result<DenseVector> {
    if k_bar == 0 || k_bar > p {
        return Err(IhtError::InvalidConfig(
            "k_bar must satisfy 1 <= k_bar <= p".into(),
        ));
    }
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(IhtError::InvalidConfig("magnitude must be > 0".into()));
    }
    let mut rng = RngStream::root(seed).child(label::TRUTH).rng();
    let support = sample(&mut rng, p, k_bar).into_vec();
    let mut values = vec![0.0; p];
    for i in support {
        let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        values[i] = sign * magnitude;
    }
    DenseVector::new(values)
}

/// Draw one `(x, y)` sample from the spec's law.
pub(crate) fn draw_sample(spec: &GenerativeSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let mut x: Vec<f64> = (0..spec.p).map(|_| StandardNormal.sample(rng)).collect();
    if spec.normalize_features {
        let norm = crate::linalg::dot(&x, &x).sqrt();
        if norm > 1.0 {
            for v in x.iter_mut() {
                *v /= norm;
            }
        }
    }
    let margin = crate::linalg::dot(spec.w_bar.as_slice(), &x);
    let y = match spec.kind {
        ModelKind::LinearGaussian => {
            let noise: f64 = StandardNormal.sample(rng);
            margin + spec.sigma * noise
        }
        ModelKind::LogisticGaussian => {
            let u: f64 = rng.random();
            if u < sigmoid(2.0 * margin) {
                1.0
            } else {
                -1.0
            }
        }
    };
    (x, y)
}

fn generate(spec: &GenerativeSpec, n: usize) -> Result<Dataset> {
    if n == 0 {
        return Err(IhtError::EmptyDataset);
    }
    let mut rng = RngStream::root(spec.seed).child(label::DATA).rng();
    let mut entries = Vec::with_capacity(n * spec.p);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = draw_sample(spec, &mut rng);
        entries.extend_from_slice(&x);
        responses.push(y);
    }
    Dataset::new(
        DenseMatrix::new(n, spec.p, entries)?,
        responses,
        spec.loss_model(),
    )
}

/// Sample `n` points from a linear-Gaussian spec: `x ~ N(0, I)`,
/// `y = w_bar'x + sigma * eps`.
pub fn gen_linear(spec: &GenerativeSpec, n: usize) -> Result<Dataset> {
    if spec.kind != ModelKind::LinearGaussian {
        return Err(IhtError::InvalidConfig(
            "gen_linear requires a LinearGaussian spec".into(),
        ));
    }
    generate(spec, n)
}

/// Sample `n` points from a logistic spec: `x ~ N(0, I)` (optionally
/// projected onto the unit ball) and `P(y = 1 | x) = s(2 w_bar'x)`.
pub fn gen_logistic(spec: &GenerativeSpec, n: usize) -> Result<Dataset> {
    if spec.kind != ModelKind::LogisticGaussian {
        return Err(IhtError::InvalidConfig(
            "gen_logistic requires a LogisticGaussian spec".into(),
        ));
    }
    generate(spec, n)
}

/// Dispatch on the spec kind.
pub fn gen_dataset(spec: &GenerativeSpec, n: usize) -> Result<Dataset> {
    generate(spec, n)
}

/// The signal-gap construction: draw `w_hat ~ N(0, I_p)`, find the top
/// `k_bar` magnitude support J, and push those entries away from zero by
/// `gap * sign`. The result has a thresholding margin of at least `gap` at
/// position `k_bar`, with the same top-`k_bar` support as `w_hat`.
pub fn gen_gap_model(p: usize, k_bar: usize, gap: f64, seed: u64) -> Result<DenseVector> {
    gen_gap_model_scaled(p, k_bar, gap, seed, 1.0)
}

/// [`gen_gap_model`] with the base draw scaled: `w_hat ~ N(0, scale^2 I_p)`.
/// The margin guarantee is scale-independent; the scale sets how strongly
/// the untouched entries compete with the gap.
pub fn gen_gap_model_scaled(
    p: usize,
    k_bar: usize,
    gap: f64,
    seed: u64,
    scale: f64,
) -> Result<DenseVector> {
    if k_bar == 0 || k_bar >= p {
        return Err(IhtError::InvalidConfig(
            "gen_gap_model needs 1 <= k_bar < p".into(),
        ));
    }
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(IhtError::InvalidConfig("gap must be >= 0".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(IhtError::InvalidConfig("scale must be > 0".into()));
    }
    let mut rng = RngStream::root(seed).child(label::GAP_MODEL).rng();
    let w_hat = DenseVector::new(
        (0..p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect(),
    )?;
    let (_, top) = hard_threshold(&w_hat, k_bar);
    let mut values = w_hat.as_slice().to_vec();
    for &j in top.iter() {
        values[j] += gap * values[j].signum();
    }
    DenseVector::new(values)
}

/// Add a small dense tail outside `supp(w_bar)`: every unused coordinate
/// gets magnitude `tail_mass / #unused` with a random sign, so the added
/// l1 mass equals `tail_mass`. Produces a population optimum that is not
/// sparse.
pub fn misspecify(w_bar: &DenseVector, tail_mass: f64, seed: u64) -> Result<DenseVector> {
    if !(tail_mass.is_finite() && tail_mass >= 0.0) {
        return Err(IhtError::InvalidConfig("tail_mass must be >= 0".into()));
    }
    let p = w_bar.dim();
    let outside: Vec<usize> = (0..p).filter(|&i| w_bar[i] == 0.0).collect();
    if tail_mass == 0.0 || outside.is_empty() {
        return Ok(w_bar.clone());
    }
    let magnitude = tail_mass / outside.len() as f64;
    let mut rng = RngStream::root(seed).child(label::TAIL).rng();
    let mut values = w_bar.as_slice().to_vec();
    for i in outside {
        let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        values[i] = sign * magnitude;
    }
    DenseVector::new(values)
}

/// Write a dataset as CSV: header `x0,...,x{p-1},y`, one row per sample,
/// 17-significant-digit decimals so every f64 round-trips exactly.
pub fn export_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let io_err = |source| IhtError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut header: Vec<String> = (0..data.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for i in 0..data.n() {
        let (x, y) = data.row(i);
        let mut fields: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        fields.push(format!("{y:.16e}"));
        writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Read a dataset written by [`export_csv`], validating responses against
/// the given loss model.
pub fn import_csv(path: &Path, model: LossModel) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| IhtError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut responses: Vec<f64> = Vec::new();
    let mut p: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IhtError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if lineno == 0 {
            // header: x0,...,y
            p = Some(line.split(',').count().saturating_sub(1));
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| IhtError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad float {s:?}: {e}"),
            })
        };
        let fields: Vec<&str> = line.split(',').collect();
        let expect = p.unwrap_or(0) + 1;
        if fields.len() != expect {
            return Err(IhtError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected {expect} fields, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            row.push(parse(f)?);
        }
        responses.push(parse(fields[fields.len() - 1])?);
        rows.push(row);
    }
    Dataset::new(DenseMatrix::from_rows(&rows)?, responses, model)
}
