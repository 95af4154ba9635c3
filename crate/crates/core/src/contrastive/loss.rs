//! NT-Xent loss over cosine similarities, with its analytic gradient.
//!
//! Rows `2k` and `2k + 1` of an [`EmbeddingBatch`] are the positive pair for
//! image `k`. Every row is used as an anchor, and the reported loss is the
//! mean over all `2N` anchors.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

/// `2N x D` view embeddings; rows `(2k, 2k + 1)` come from the same image.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    z: Array2<f64>,
}

impl EmbeddingBatch {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        let rows = z.nrows();
        if rows < 2 || !rows.is_multiple_of(2) {
            return Err(Error::ShapeMismatch {
                expected: "an even number (>= 2) of rows".into(),
                actual: format!("{rows} rows"),
            });
        }
        if z.ncols() == 0 {
            return Err(Error::Empty("embedding dimension is zero"));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding entry"));
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.z
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }
}

/// Index of the positive partner of row `i`.
#[inline]
pub fn partner(i: usize) -> usize {
    i ^ 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub tau: f64,
    pub per_anchor: Vec<f64>,
}

pub fn cosine_sim(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("length {}", u.len()),
            actual: format!("length {}", v.len()),
        });
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu == 0.0 {
        return Err(Error::ZeroNorm { row: 0 });
    }
    if nv == 0.0 {
        return Err(Error::ZeroNorm { row: 1 });
    }
    Ok((u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("tau", format!("{tau} (must be > 0)")));
    }
    Ok(())
}

/// Row norms and unit rows.
fn normalize(z: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(row) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroNorm { row });
    }
    let u = z / &norms.view().insert_axis(Axis(1));
    Ok((norms, u))
}

struct Forward {
    norms: Array1<f64>,
    unit: Array2<f64>,
    /// Softmax over `k != i` of `sim(i, k) / tau`; diagonal is zero.
    probs: Array2<f64>,
    per_anchor: Vec<f64>,
}

fn forward(batch: &EmbeddingBatch, tau: f64) -> Result<Forward> {
    check_tau(tau)?;
    let (norms, unit) = normalize(&batch.z)?;
    let n = batch.rows();
    let logits = unit.dot(&unit.t()) / tau;
    let mut probs = Array2::zeros((n, n));
    let mut per_anchor = Vec::with_capacity(n);
    for i in 0..n {
        let row = logits.row(i);
        let max = row
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let e = (row[k] - max).exp();
            probs[[i, k]] = e;
            sum += e;
        }
        probs.row_mut(i).mapv_inplace(|e| e / sum);
        let lse = max + sum.ln();
        // clamp absorbs the last-ulp negative when the positive dominates
        per_anchor.push((lse - row[partner(i)]).max(0.0));
    }
    Ok(Forward {
        norms,
        unit,
        probs,
        per_anchor,
    })
}

pub fn nt_xent_loss(batch: &EmbeddingBatch, tau: f64) -> Result<LossReport> {
    let f = forward(batch, tau)?;
    Ok(report(f.per_anchor, tau))
}

fn report(per_anchor: Vec<f64>, tau: f64) -> LossReport {
    let loss = per_anchor.iter().sum::<f64>() / per_anchor.len() as f64;
    LossReport {
        loss,
        tau,
        per_anchor,
    }
}

/// Gradient of the mean loss with respect to every embedding entry.
pub fn nt_xent_grad(batch: &EmbeddingBatch, tau: f64) -> Result<Array2<f64>> {
    nt_xent_loss_and_grad(batch, tau).map(|(_, g)| g)
}

pub fn nt_xent_loss_and_grad(
    batch: &EmbeddingBatch,
    tau: f64,
) -> Result<(LossReport, Array2<f64>)> {
    let Forward {
        norms,
        unit,
        mut probs,
        per_anchor,
    } = forward(batch, tau)?;
    let n = batch.rows();
    // dL/dsim(i, k) from anchor i is (P_ik - [k == partner(i)]) / (2N tau).
    for i in 0..n {
        probs[[i, partner(i)]] -= 1.0;
    }
    let scale = 1.0 / (n as f64 * tau);
    let coeff = (&probs + &probs.t()) * scale;
    // Gradient w.r.t. the unit rows, then through the normalization:
    // dL/dz_i = (g_i - (g_i . u_i) u_i) / |z_i|.
    let g_unit = coeff.dot(&unit);
    let mut grad = g_unit;
    for i in 0..n {
        let u = unit.row(i);
        let proj = grad.row(i).dot(&u);
        let inv = 1.0 / norms[i];
        grad.row_mut(i)
            .zip_mut_with(&u, |g, &ui| *g = (*g - proj * ui) * inv);
    }
    Ok((report(per_anchor, tau), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::{array, Array2};

    /// Direct summation of the per-anchor loss, no stabilization or matrix algebra.
    fn oracle_loss(z: &Array2<f64>, tau: f64) -> f64 {
        let n = z.nrows();
        let sim = |i: usize, k: usize| {
            let (a, b) = (z.row(i), z.row(k));
            a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
        };
        let mut total = 0.0;
        for i in 0..n {
            let num = (sim(i, i ^ 1) / tau).exp();
            let den: f64 = (0..n)
                .filter(|&k| k != i)
                .map(|k| (sim(i, k) / tau).exp())
                .sum();
            total += -(num / den).ln();
        }
        total / n as f64
    }

    fn random_batch(rng: &mut RngStream, rows: usize, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, dim), |_| rng.standard_normal())
    }

    #[test]
    fn cosine_examples() {
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(cosine_sim(e1.view(), e1.view()).unwrap(), 1.0);
        assert_eq!(cosine_sim(e1.view(), e2.view()).unwrap(), 0.0);
        let s = cosine_sim(array![1.0, 1.0].view(), e1.view()).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine_sim(array![0.0, 0.0].view(), e1.view()),
            Err(Error::ZeroNorm { .. })
        ));
    }

    #[test]
    fn single_pair_has_zero_loss_and_grad() {
        let b = EmbeddingBatch::new(array![[1.0, 2.0, -1.0], [0.3, -0.5, 4.0]]).unwrap();
        let (r, g) = nt_xent_loss_and_grad(&b, 0.5).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(g.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn two_pair_closed_form() {
        // each anchor: positive sim 1, negatives sim 0 twice -> log(1 + 2/e)
        let b =
            EmbeddingBatch::new(array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        let r = nt_xent_loss(&b, 1.0).unwrap();
        let expected = (1.0 + 2.0 / std::f64::consts::E).ln();
        assert!((expected - 0.5514).abs() < 1e-4);
        for l in &r.per_anchor {
            assert!((l - expected).abs() < 1e-14);
        }
        assert!((r.loss - oracle_loss(b.z(), 1.0)).abs() < 1e-14);
    }

    #[test]
    fn matches_oracle_on_random_batches() {
        let mut rng = RngStream::new(17);
        for t in 0..50 {
            let rows = 2 * (1 + t % 6);
            let z = random_batch(&mut rng, rows, 1 + t % 9);
            let b = EmbeddingBatch::new(z.clone()).unwrap();
            for tau in [0.1, 0.5, 1.0] {
                let r = nt_xent_loss(&b, tau).unwrap();
                assert!((r.loss - oracle_loss(&z, tau)).abs() < 1e-10);
                assert!(r.per_anchor.iter().all(|&l| l >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = EmbeddingBatch::new(array![[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(
            nt_xent_loss(&b, 0.5).unwrap_err(),
            Error::ZeroNorm { row: 1 }
        );
        let b = EmbeddingBatch::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(nt_xent_loss(&b, 0.0).is_err());
        assert!(nt_xent_loss(&b, -1.0).is_err());
        assert!(EmbeddingBatch::new(array![[1.0, 0.0]]).is_err());
        assert!(EmbeddingBatch::new(array![[1.0, f64::NAN], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn gradient_scales_inversely_with_rescaling() {
        let mut rng = RngStream::new(5);
        let z = random_batch(&mut rng, 6, 4);
        let c = 3.5;
        let b1 = EmbeddingBatch::new(z.clone()).unwrap();
        let b2 = EmbeddingBatch::new(&z * c).unwrap();
        let (r1, g1) = nt_xent_loss_and_grad(&b1, 0.5).unwrap();
        let (r2, g2) = nt_xent_loss_and_grad(&b2, 0.5).unwrap();
        assert!((r1.loss - r2.loss).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b * c).abs() < 1e-12);
        }
    }

    #[test]
    fn pulling_positive_closer_never_hurts_anchor() {
        let mut rng = RngStream::new(23);
        for _ in 0..20 {
            let mut z = random_batch(&mut rng, 8, 5);
            let before = nt_xent_loss(&EmbeddingBatch::new(z.clone()).unwrap(), 0.5).unwrap();
            // move z_1 a step toward the direction of z_0
            let u0 = z.row(0).to_owned() / z.row(0).dot(&z.row(0)).sqrt();
            let n1 = z.row(1).dot(&z.row(1)).sqrt();
            let moved = &z.row(1) + &(&u0 * (0.3 * n1));
            z.row_mut(1).assign(&moved);
            let after = nt_xent_loss(&EmbeddingBatch::new(z).unwrap(), 0.5).unwrap();
            assert!(after.per_anchor[0] <= before.per_anchor[0] + 1e-12);
        }
    }
}
