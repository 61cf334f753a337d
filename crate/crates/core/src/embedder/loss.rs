//! Reparametrization, KL term and reconstruction losses.

use super::Variant;
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor4};

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(a, b));
    }
    Ok(())
}

/// `z = μ + ε ⊙ exp(logvar / 2)`.
pub fn reparametrize<T: Scalar>(mu: &[T], logvar: &[T], eps: &[T]) -> Result<Vec<T>> {
    check_len(mu.len(), logvar.len())?;
    check_len(mu.len(), eps.len())?;
    let half = T::lit(0.5);
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((&m, &lv), &e)| m + e * (lv * half).exp())
        .collect())
}

/// KL divergence from `N(μ, diag(exp(logvar)))` to the standard normal.
pub fn kl_divergence<T: Scalar>(mu: &[T], logvar: &[T]) -> Result<T> {
    check_len(mu.len(), logvar.len())?;
    if mu.iter().chain(logvar).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite μ or log-variance"));
    }
    let half = T::lit(0.5);
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| half * (m * m + lv.exp() - T::one() - lv))
        .sum())
}

/// Batch-averaged loss split into its terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Squared reconstruction error summed over elements, plus the KL term for
/// the VAE; both averaged over the batch.
///
/// `mu`/`logvar` hold the batch's posterior parameters row by row and are
/// ignored for the AE.
pub fn loss<T: Scalar>(
    variant: Variant,
    x: &Tensor4<T>,
    recon: &Tensor4<T>,
    mu: &[T],
    logvar: &[T],
) -> Result<LossParts> {
    if x.shape() != recon.shape() {
        return Err(Error::shape(x.shape(), recon.shape()));
    }
    let n = x.batch().max(1) as f64;
    let sq: f64 = x
        .data()
        .iter()
        .zip(recon.data())
        .map(|(&a, &b)| {
            let d = (a - b).to_f64().unwrap_or(f64::NAN);
            d * d
        })
        .sum();
    let kl = match variant {
        Variant::Ae => 0.0,
        Variant::Vae => kl_divergence(mu, logvar)?.to_f64().unwrap_or(f64::NAN),
    };
    Ok(LossParts {
        total: (sq + kl) / n,
        recon: sq / n,
        kl: kl / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparametrize_examples() {
        assert_eq!(reparametrize(&[0.3, -1.0], &[2.0, 0.1], &[0.0, 0.0]).unwrap(), vec![0.3, -1.0]);
        assert_eq!(reparametrize(&[0.0, 0.0], &[0.0, 0.0], &[1.0, -1.0]).unwrap(), vec![1.0, -1.0]);
        let z = reparametrize(&[1.0], &[4f64.ln()], &[0.5]).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-12);
        assert!(reparametrize(&[1.0], &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0], &[0.0]).unwrap() - 0.5f64).abs() < 1e-15);
        assert!(kl_divergence(&[f64::NAN], &[0.0]).is_err());
        assert!(kl_divergence(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn loss_examples() {
        let x = Tensor4::from_vec([1, 2, 1, 1], vec![1.0f64, 0.0]).unwrap();
        let zero = Tensor4::from_vec([1, 2, 1, 1], vec![0.0f64, 0.0]).unwrap();
        assert_eq!(loss(Variant::Ae, &x, &x, &[], &[]).unwrap().total, 0.0);
        assert_eq!(loss(Variant::Vae, &x, &x, &[0.0], &[0.0]).unwrap().total, 0.0);
        assert_eq!(loss(Variant::Ae, &x, &zero, &[], &[]).unwrap().total, 1.0);
        let other = Tensor4::<f64>::zeros([1, 3, 1, 1]);
        assert!(loss(Variant::Ae, &x, &other, &[], &[]).is_err());
    }

    #[test]
    fn loss_is_a_batch_mean() {
        let x = Tensor4::from_vec([2, 1, 1, 1], vec![1.0f64, 3.0]).unwrap();
        let r = Tensor4::from_vec([2, 1, 1, 1], vec![0.0f64, 0.0]).unwrap();
        let parts = loss(Variant::Vae, &x, &r, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((parts.recon - 5.0).abs() < 1e-12);
        assert!((parts.kl - 0.5).abs() < 1e-12);
        assert!((parts.total - 5.5).abs() < 1e-12);
    }
}
