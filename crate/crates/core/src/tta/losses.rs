//! Unsupervised adaptation objectives over B×C probability matrices. Each
//! returns its value and the analytic gradient with respect to the input
//! probabilities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::TtaError;

/// Guard inside logarithms.
pub const ENTROPY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: DMatrix<f64>,
}

/// A loss over two matched prediction matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLossValue {
    pub value: f64,
    pub grad_l: DMatrix<f64>,
    pub grad_r: DMatrix<f64>,
}

/// Shannon entropy, `-(1/B) Σ p log(p + ε)`.
pub fn entropy_min_loss(p: &DMatrix<f64>) -> LossValue {
    let b = p.nrows().max(1) as f64;
    let value = -p.iter().map(|&x| x * (x + ENTROPY_EPS).ln()).sum::<f64>() / b;
    let grad = p.map(|x| -((x + ENTROPY_EPS).ln() + x / (x + ENTROPY_EPS)) / b);
    LossValue { value, grad }
}

/// Tsallis entropy of order `alpha`, `(1/B) Σ_i (1 - Σ_c p^α) / (α - 1)`.
/// For `alpha < 1` the gradient floors `p` at [`ENTROPY_EPS`].
pub fn generalized_entropy_loss(p: &DMatrix<f64>, alpha: f64) -> Result<LossValue, TtaError> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(TtaError::Config(format!("entropy order {alpha} must be positive and not 1")));
    }
    let b = p.nrows().max(1) as f64;
    let value = p
        .row_iter()
        .map(|r| (1.0 - r.iter().map(|&x| x.powf(alpha)).sum::<f64>()) / (alpha - 1.0))
        .sum::<f64>()
        / b;
    let grad = p.map(|x| {
        let x = if alpha < 1.0 { x.max(ENTROPY_EPS) } else { x };
        -alpha * x.powf(alpha - 1.0) / ((alpha - 1.0) * b)
    });
    Ok(LossValue { value, grad })
}

/// Negated nuclear norm, `-‖P‖_*`. The gradient is `-U Vᵀ` over singular
/// directions whose value exceeds a relative tolerance; directions with
/// (numerically) zero singular value contribute nothing, which is a valid
/// subgradient choice.
pub fn nuclear_norm_loss(p: &DMatrix<f64>) -> Result<LossValue, TtaError> {
    if p.nrows() == 0 || p.ncols() == 0 {
        return Err(TtaError::Shape("empty probability matrix".into()));
    }
    let svd = p.clone().try_svd(true, true, f64::EPSILON, 500).ok_or(TtaError::SvdFailed)?;
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(TtaError::SvdFailed),
    };
    let s = &svd.singular_values;
    let smax = s.iter().fold(0.0f64, |m, &x| m.max(x));
    let tol = smax * 1e-12 * p.nrows().max(p.ncols()) as f64;
    let mut grad = DMatrix::zeros(p.nrows(), p.ncols());
    for k in 0..s.len() {
        if s[k] > tol {
            grad -= u.column(k) * vt.row(k);
        }
    }
    Ok(LossValue {
        value: -s.sum(),
        grad,
    })
}

/// How the per-sample divergence between two views is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyNorm {
    /// Sum of absolute per-class differences.
    #[default]
    Literal,
    /// Euclidean norm of the per-sample difference vector.
    PerSampleL2,
}

/// `(1/B) Σ_i d(p_l[i], p_r[i])`. Zero differences get zero gradient.
pub fn consistency_loss(pl: &DMatrix<f64>, pr: &DMatrix<f64>, norm: ConsistencyNorm) -> Result<PairLossValue, TtaError> {
    if pl.shape() != pr.shape() {
        return Err(TtaError::Shape(format!("views have shapes {:?} and {:?}", pl.shape(), pr.shape())));
    }
    let b = pl.nrows().max(1) as f64;
    let d = pl - pr;
    let (value, grad_l) = match norm {
        ConsistencyNorm::Literal => (d.iter().map(|x| x.abs()).sum::<f64>() / b, d.map(|x| sign(x) / b)),
        ConsistencyNorm::PerSampleL2 => {
            let mut g = DMatrix::zeros(d.nrows(), d.ncols());
            let mut total = 0.0;
            for (i, row) in d.row_iter().enumerate() {
                let n = row.norm();
                total += n;
                if n > 0.0 {
                    g.set_row(i, &(row / (n * b)));
                }
            }
            (total / b, g)
        }
    };
    Ok(PairLossValue {
        value,
        grad_r: -&grad_l,
        grad_l,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleWeights {
    pub nnm: f64,
    pub em: f64,
    pub ge: f64,
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        Self {
            nnm: 1.0,
            em: 1.0,
            ge: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Weight of the consistency term.
    pub lambda: f64,
    pub weights: EnsembleWeights,
    /// Order of the generalized entropy.
    pub alpha: f64,
    pub consistency: ConsistencyNorm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            weights: EnsembleWeights::default(),
            alpha: 2.0,
            consistency: ConsistencyNorm::Literal,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TtaError> {
        let w = self.weights;
        let all = [self.lambda, w.nnm, w.em, w.ge];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TtaError::Config("lambda and ensemble weights must be finite and non-negative".into()));
        }
        if all.iter().all(|&v| v == 0.0) {
            return Err(TtaError::Config("every loss term has zero weight".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || self.alpha == 1.0 {
            return Err(TtaError::Config(format!("alpha {} must be positive and not 1", self.alpha)));
        }
        Ok(())
    }
}

/// Unweighted component values, each averaged over the two views.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossParts {
    pub nnm: f64,
    pub em: f64,
    pub ge: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub total: f64,
    pub parts: LossParts,
    pub grad_l: DMatrix<f64>,
    pub grad_r: DMatrix<f64>,
}

/// `L_ens + λ·L_con`, where each entropy-ensemble term is the mean of its
/// value on the two views.
pub fn combined_loss(pl: &DMatrix<f64>, pr: &DMatrix<f64>, cfg: &LossConfig) -> Result<CombinedLoss, TtaError> {
    cfg.validate()?;
    let con = consistency_loss(pl, pr, cfg.consistency)?;
    let mut grad_l = &con.grad_l * cfg.lambda;
    let mut grad_r = &con.grad_r * cfg.lambda;
    let mut parts = LossParts {
        consistency: con.value,
        ..LossParts::default()
    };
    let mut ens = 0.0;
    let mut add = |w: f64, l: LossValue, r: LossValue, slot: &mut f64| {
        *slot = 0.5 * (l.value + r.value);
        if w != 0.0 {
            ens += w * *slot;
            grad_l += l.grad * (0.5 * w);
            grad_r += r.grad * (0.5 * w);
        }
    };
    let w = cfg.weights;
    add(w.nnm, nuclear_norm_loss(pl)?, nuclear_norm_loss(pr)?, &mut parts.nnm);
    add(w.em, entropy_min_loss(pl), entropy_min_loss(pr), &mut parts.em);
    add(
        w.ge,
        generalized_entropy_loss(pl, cfg.alpha)?,
        generalized_entropy_loss(pr, cfg.alpha)?,
        &mut parts.ge,
    );
    Ok(CombinedLoss {
        total: ens + cfg.lambda * parts.consistency,
        parts,
        grad_l,
        grad_r,
    })
}
