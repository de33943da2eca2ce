//! Linear centered kernel alignment (CKA) between representation matrices.

use nalgebra::DMatrix;

use crate::domain::{MetricResult, RepresentationMatrix};
use crate::error::{AlignError, Result};

pub const CKA: &str = "cka";

/// Self-HSIC below this fraction of the uncentered Gram energy counts as a
/// constant (degenerate) representation.
pub const DEGENERATE_HSIC: f64 = 1e-12;

/// Symmetric `n × n` kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        if n != data.ncols() || n < 2 {
            return Err(AlignError::InvalidRepresentation(format!(
                "gram matrix must be square with n >= 2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (data[(i, j)] - data[(j, i)]).abs() > 1e-9 * scale {
                    return Err(AlignError::InvalidRepresentation("gram matrix is not symmetric".into()));
                }
            }
        }
        Ok(GramMatrix(data))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `HKH`: subtract row and column means, add back the grand mean.
    fn double_centered(&self) -> DMatrix<f64> {
        let n = self.n();
        let nf = n as f64;
        let row_means: Vec<f64> = (0..n).map(|i| self.0.row(i).sum() / nf).collect();
        let col_means: Vec<f64> = (0..n).map(|j| self.0.column(j).sum() / nf).collect();
        let grand = row_means.iter().sum::<f64>() / nf;
        DMatrix::from_fn(n, n, |i, j| self.0[(i, j)] - row_means[i] - col_means[j] + grand)
    }
}

fn stacked(x: &RepresentationMatrix, ids: &[&String]) -> DMatrix<f64> {
    DMatrix::from_fn(ids.len(), x.dim(), |i, j| x.rows()[ids[i]][j])
}

/// `K = X Xᵀ` with rows in sorted instance-id order.
pub fn linear_gram(x: &RepresentationMatrix) -> GramMatrix {
    let ids: Vec<&String> = x.rows().keys().collect();
    gram_over(x, &ids)
}

fn gram_over(x: &RepresentationMatrix, ids: &[&String]) -> GramMatrix {
    let m = stacked(x, ids);
    let k = &m * m.transpose();
    // exact symmetry regardless of the product kernel's summation order
    GramMatrix(DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        if i <= j {
            k[(i, j)]
        } else {
            k[(j, i)]
        }
    }))
}

/// `tr(KHLH) / (n − 1)²`.
pub fn hsic(k: &GramMatrix, l: &GramMatrix) -> Result<f64> {
    if k.n() != l.n() {
        return Err(AlignError::DimensionMismatch {
            left: k.n(),
            right: l.n(),
        });
    }
    Ok(centered_hsic(&k.double_centered(), &l.double_centered()))
}

/// Both arguments already centered; `tr(AB) = Σ AᵢⱼBᵢⱼ` for symmetric `B`.
fn centered_hsic(kc: &DMatrix<f64>, lc: &DMatrix<f64>) -> f64 {
    let n = kc.nrows() as f64;
    kc.dot(lc) / ((n - 1.0) * (n - 1.0))
}

/// Linear CKA over the instances both matrices share.
pub fn linear_cka(x: &RepresentationMatrix, y: &RepresentationMatrix) -> Result<MetricResult> {
    let ids: Vec<&String> = x.rows().keys().filter(|id| y.rows().contains_key(*id)).collect();
    if ids.len() < 2 {
        return Err(AlignError::InvalidRepresentation(format!(
            "`{}` and `{}` share {} instances, need at least 2",
            x.system_id(),
            y.system_id(),
            ids.len()
        )));
    }
    let n = ids.len();
    let k = gram_over(x, &ids);
    let l = gram_over(y, &ids);
    let kc = k.double_centered();
    let lc = l.double_centered();
    let hkk = centered_hsic(&kc, &kc);
    let hll = centered_hsic(&lc, &lc);
    let energy = |g: &GramMatrix| g.0.norm_squared() / ((n as f64 - 1.0) * (n as f64 - 1.0));
    if hkk <= DEGENERATE_HSIC * energy(&k) || hll <= DEGENERATE_HSIC * energy(&l) {
        return Ok(MetricResult::undefined(CKA, "degenerate representation", n));
    }
    let hkl = centered_hsic(&kc, &lc);
    let value = (hkl / (hkk.sqrt() * hll.sqrt())).clamp(0.0, 1.0);
    Ok(MetricResult::ok(CKA, value, n))
}
