//! Loss models (squared and logistic) with empirical risk, full and
//! support-restricted gradients, and estimators for the smoothness,
//! restricted strong convexity, Lipschitz and boundedness constants that the
//! solver and diagnostics consume.

use crate::error::{IhtError, Result};
use crate::linalg::{
    dot, symmetric_eigenvalues, top_eigenvalue, DenseMatrix, DenseVector, SupportSet,
};
use crate::rng::RngStream;
use crate::stats::tree_sum;
use rand::seq::index::sample;

/// Pointwise loss family.
///
/// * `Squared`: `l(w; x, y) = (y - w'x)^2 / 2`
/// * `Logistic`: `l(w; x, y) = log(1 + exp(-2 y w'x))` with labels in
///   `{-1, +1}`, evaluated in an overflow-safe form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossModel {
    Squared,
    Logistic,
}

impl LossModel {
    pub fn name(&self) -> &'static str {
        match self {
            LossModel::Squared => "squared",
            LossModel::Logistic => "logistic",
        }
    }

    /// Pointwise loss at margin `z = w'x` and response `y`.
    pub(crate) fn pointwise(&self, z: f64, y: f64) -> f64 {
        match self {
            LossModel::Squared => {
                let r = y - z;
                0.5 * r * r
            }
            LossModel::Logistic => log1p_exp(-2.0 * y * z),
        }
    }

    /// d/dz of the pointwise loss at margin `z`; the per-sample gradient is
    /// this scalar times `x`.
    pub(crate) fn slope(&self, z: f64, y: f64) -> f64 {
        match self {
            LossModel::Squared => z - y,
            LossModel::Logistic => -2.0 * y * (1.0 - sigmoid(2.0 * y * z)),
        }
    }

    /// d^2/dz^2 of the pointwise loss; the per-sample curvature factor.
    pub(crate) fn curvature(&self, z: f64, y: f64) -> f64 {
        match self {
            LossModel::Squared => 1.0,
            LossModel::Logistic => {
                let s = sigmoid(2.0 * y * z);
                4.0 * s * (1.0 - s)
            }
        }
    }

    fn check_response(&self, index: usize, y: f64) -> Result<()> {
        let ok = match self {
            LossModel::Squared => y.is_finite(),
            LossModel::Logistic => y == 1.0 || y == -1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(IhtError::InvalidResponse {
                kind: self.name(),
                index,
                value: y,
            })
        }
    }
}

/// Stable `log(1 + exp(z))`.
pub(crate) fn log1p_exp(z: f64) -> f64 {
    if z <= 0.0 {
        z.exp().ln_1p()
    } else {
        z + (-z).exp().ln_1p()
    }
}

/// Stable logistic sigmoid `1 / (1 + exp(-z))`.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// n samples of p-dimensional features with responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    responses: Vec<f64>,
}

impl Dataset {
    /// Build a dataset and validate the response domain against the loss
    /// model it will be used with.
    pub fn new(features: DenseMatrix, responses: Vec<f64>, model: LossModel) -> Result<Self> {
        if features.n_rows() == 0 {
            return Err(IhtError::EmptyDataset);
        }
        if features.n_rows() != responses.len() {
            return Err(IhtError::DimensionMismatch {
                context: "Dataset::new responses",
                expected: features.n_rows(),
                got: responses.len(),
            });
        }
        for (i, &y) in responses.iter().enumerate() {
            model.check_response(i, y)?;
        }
        Ok(Dataset {
            features,
            responses,
        })
    }

    pub fn n(&self) -> usize {
        self.features.n_rows()
    }

    pub fn p(&self) -> usize {
        self.features.n_cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (self.features.row(i), self.responses[i])
    }

    /// Copy with sample `i` replaced; used by the leave-one-out diagnostics.
    pub fn with_replaced_sample(&self, i: usize, x: &[f64], y: f64) -> Result<Dataset> {
        if x.len() != self.p() {
            return Err(IhtError::DimensionMismatch {
                context: "with_replaced_sample",
                expected: self.p(),
                got: x.len(),
            });
        }
        let mut rows: Vec<Vec<f64>> = (0..self.n()).map(|r| self.features.row(r).to_vec()).collect();
        let mut responses = self.responses.clone();
        rows[i] = x.to_vec();
        responses[i] = y;
        Ok(Dataset {
            features: DenseMatrix::from_rows(&rows)?,
            responses,
        })
    }
}

fn check_dims(context: &'static str, w: &DenseVector, p: usize) -> Result<()> {
    if w.dim() != p {
        return Err(IhtError::DimensionMismatch {
            context,
            expected: p,
            got: w.dim(),
        });
    }
    Ok(())
}

/// Pointwise loss `l(w; x, y)`.
pub fn loss_value(model: LossModel, w: &DenseVector, x: &[f64], y: f64) -> Result<f64> {
    if x.len() != w.dim() {
        return Err(IhtError::DimensionMismatch {
            context: "loss_value",
            expected: w.dim(),
            got: x.len(),
        });
    }
    Ok(model.pointwise(dot(w.as_slice(), x), y))
}

/// Empirical risk `F_S(w)`: the mean pointwise loss over the dataset,
/// accumulated with a fixed-tree sum so the result is bit-stable.
pub fn empirical_risk(model: LossModel, w: &DenseVector, data: &Dataset) -> Result<f64> {
    check_dims("empirical_risk", w, data.p())?;
    let losses: Vec<f64> = (0..data.n())
        .map(|i| {
            let (x, y) = data.row(i);
            model.pointwise(dot(w.as_slice(), x), y)
        })
        .collect();
    Ok(tree_sum(&losses) / data.n() as f64)
}

/// Full empirical gradient of `F_S` at `w`.
pub fn empirical_gradient(model: LossModel, w: &DenseVector, data: &Dataset) -> Result<DenseVector> {
    check_dims("empirical_gradient", w, data.p())?;
    let mut g = vec![0.0; data.p()];
    for i in 0..data.n() {
        let (x, y) = data.row(i);
        let c = model.slope(dot(w.as_slice(), x), y);
        if c == 0.0 {
            continue;
        }
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += c * xj;
        }
    }
    let inv_n = 1.0 / data.n() as f64;
    for gj in g.iter_mut() {
        *gj *= inv_n;
    }
    DenseVector::new(g)
}

/// Empirical gradient zeroed outside the support `J`.
pub fn restricted_gradient(
    model: LossModel,
    w: &DenseVector,
    data: &Dataset,
    support: &SupportSet,
) -> Result<DenseVector> {
    if let Some(max) = support.max_index() {
        if max >= data.p() {
            return Err(IhtError::SupportOutOfRange {
                index: max,
                p: data.p(),
            });
        }
    }
    Ok(empirical_gradient(model, w, data)?.masked(support))
}

/// Knobs for [`estimate_constants_with`].
#[derive(Debug, Clone, Copy)]
pub struct ConstantsOptions {
    /// Number of random size-k supports sampled for the restricted
    /// strong-convexity estimate.
    pub support_samples: usize,
    /// Seed for the support sampling stream.
    pub seed: u64,
    /// Relative tolerance of the power-iteration smoothness estimate.
    pub power_tol: f64,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions {
            support_samples: 200,
            seed: 0x5eed,
            power_tol: 1e-9,
        }
    }
}

/// Estimates of the constants appearing in the regularity assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantEstimates {
    /// Restricted smoothness upper bound `L_s` (here the global
    /// `lambda_max(X'X/n)`, which dominates every restricted constant).
    pub l_smooth: f64,
    /// Restricted strong-convexity lower bound `mu_s`, estimated by sampling
    /// size-k supports; squared loss only.
    pub mu_strong: Option<f64>,
    /// Lipschitz constant of the pointwise loss over the radius-R parameter
    /// ball.
    pub g_lip: f64,
    /// Upper bound on the pointwise loss over the same ball.
    pub m_bound: f64,
}

/// Estimate `(L, mu_k, G, M)` for the given loss and data with default
/// sampling options. `radius` is the parameter-domain radius used for the
/// Lipschitz and boundedness constants.
pub fn estimate_constants(
    model: LossModel,
    data: &Dataset,
    k: usize,
    radius: f64,
) -> Result<ConstantEstimates> {
    estimate_constants_with(model, data, k, radius, &ConstantsOptions::default())
}

/// [`estimate_constants`] with explicit sampling options.
///
/// The strong-convexity constant cannot be minimized over all C(p, k)
/// supports; it is estimated as the minimum restricted eigenvalue over
/// `support_samples` random supports and should be read as an optimistic
/// estimate, not a certificate.
pub fn estimate_constants_with(
    model: LossModel,
    data: &Dataset,
    k: usize,
    radius: f64,
    opts: &ConstantsOptions,
) -> Result<ConstantEstimates> {
    if k == 0 {
        return Err(IhtError::InvalidConfig("estimate_constants needs k >= 1".into()));
    }
    if radius <= 0.0 {
        return Err(IhtError::InvalidConfig(
            "estimate_constants needs radius > 0".into(),
        ));
    }
    let l_smooth = smoothness_bound_with_tol(data, opts.power_tol)?;

    let mu_strong = match model {
        LossModel::Logistic => None,
        LossModel::Squared => Some(restricted_min_eigenvalue(data, k, opts)?.min(l_smooth)),
    };

    let max_x = data.features().max_row_norm();
    let (g_lip, m_bound) = match model {
        LossModel::Squared => {
            let max_y = data.responses().iter().fold(0.0f64, |m, y| m.max(y.abs()));
            let residual_bound = max_y + radius * max_x;
            (max_x * residual_bound, 0.5 * residual_bound * residual_bound)
        }
        LossModel::Logistic => (2.0 * max_x, log1p_exp(2.0 * radius * max_x)),
    };

    Ok(ConstantEstimates {
        l_smooth,
        mu_strong,
        g_lip,
        m_bound,
    })
}

/// `lambda_max(X'X / n)`: smoothness bound for the squared loss and, since
/// the logistic curvature factor `4s(1-s)` never exceeds 1, for the logistic
/// loss as well.
pub fn smoothness_bound(data: &Dataset) -> Result<f64> {
    smoothness_bound_with_tol(data, 1e-9)
}

fn smoothness_bound_with_tol(data: &Dataset, tol: f64) -> Result<f64> {
    let x = data.features();
    let n = data.n() as f64;
    let l = top_eigenvalue(
        |v, out| {
            let xv = x.matvec(v);
            let xtxv = x.matvec_t(&xv);
            for (o, t) in out.iter_mut().zip(&xtxv) {
                *o = t / n;
            }
        },
        data.p(),
        tol,
    )?;
    if l <= 0.0 {
        return Err(IhtError::DegenerateData(
            "design matrix has no spectral mass (all zeros?)".into(),
        ));
    }
    Ok(l)
}

fn restricted_min_eigenvalue(data: &Dataset, k: usize, opts: &ConstantsOptions) -> Result<f64> {
    let p = data.p();
    let k = k.min(p);
    let n = data.n() as f64;
    let mut rng = RngStream::root(opts.seed).child(0x30).rng();
    let draws = if k == p { 1 } else { opts.support_samples.max(1) };
    let mut min_eig = f64::INFINITY;
    for _ in 0..draws {
        let cols: Vec<usize> = if k == p {
            (0..p).collect()
        } else {
            sample(&mut rng, p, k).into_vec()
        };
        let sub = data.features().select_columns(&cols)?;
        let mut gram = sub.gram();
        gram = scale_matrix(&gram, 1.0 / n);
        let eigs = symmetric_eigenvalues(&gram)?;
        let lo = eigs.first().copied().unwrap_or(0.0);
        min_eig = min_eig.min(lo.max(0.0));
    }
    Ok(min_eig)
}

fn scale_matrix(m: &DenseMatrix, s: f64) -> DenseMatrix {
    let entries: Vec<f64> = (0..m.n_rows())
        .flat_map(|i| m.row(i).iter().map(move |v| v * s).collect::<Vec<_>>())
        .collect();
    DenseMatrix::new(m.n_rows(), m.n_cols(), entries).expect("scaled matrix stays finite")
}
