//! Ground-user placement.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::Position;
use crate::environment::GridSpec;
use crate::error::{Error, Result};
use crate::topology::UserTerminal;

/// Bivariate Gaussian over the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserDistribution {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl UserDistribution {
    pub fn validate(&self) -> Result<()> {
        let c = self.cov;
        if !c.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::config("user_cov", "entries must be finite"));
        }
        if c[0][1] != c[1][0] {
            return Err(Error::config("user_cov", "must be symmetric"));
        }
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let tol = 1e-12 * (c[0][0].abs() + c[1][1].abs()).powi(2);
        if c[0][0] < 0.0 || c[1][1] < 0.0 || det < -tol {
            return Err(Error::config("user_cov", "must be positive semi-definite"));
        }
        Ok(())
    }

    /// Lower-triangular `L` with `L·Lᵀ = cov`.
    fn cholesky(&self) -> [[f64; 2]; 2] {
        let c = self.cov;
        let l00 = c[0][0].sqrt();
        let l10 = if l00 > 0.0 { c[1][0] / l00 } else { 0.0 };
        let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
        [[l00, 0.0], [l10, l11]]
    }
}

/// Draw `n` users and clamp them into the grid's ground footprint.
pub fn sample_users<R: Rng + ?Sized>(
    dist: &UserDistribution,
    n: usize,
    spec: &GridSpec,
    rng: &mut R,
) -> Result<Vec<UserTerminal>> {
    dist.validate()?;
    let l = dist.cholesky();
    Ok((0..n)
        .map(|id| {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let x = dist.mean[0] + l[0][0] * z0;
            let y = dist.mean[1] + l[1][0] * z0 + l[1][1] * z1;
            UserTerminal {
                id,
                pos: Position::ground(x.clamp(0.0, spec.x_max()), y.clamp(0.0, spec.y_max())),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn paper_dist() -> UserDistribution {
        UserDistribution {
            mean: [70.0, 70.0],
            cov: [[100.0, 0.0], [0.0, 50.0]],
        }
    }

    #[test]
    fn zero_covariance_puts_everyone_at_the_mean() {
        let dist = UserDistribution {
            mean: [30.0, 40.0],
            cov: [[0.0; 2]; 2],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let users = sample_users(&dist, 20, &GridSpec::default(), &mut rng).unwrap();
        assert!(users.iter().all(|u| u.pos.x == 30.0 && u.pos.y == 40.0 && u.pos.z == 0.0));
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        // mean well inside a wide grid so clamping never triggers
        let spec = GridSpec {
            nx: 100,
            ny: 100,
            ..GridSpec::default()
        };
        let dist = UserDistribution {
            mean: [400.0, 500.0],
            ..paper_dist()
        };
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let users = sample_users(&dist, n, &spec, &mut rng).unwrap();
        let mx = users.iter().map(|u| u.pos.x).sum::<f64>() / n as f64;
        let my = users.iter().map(|u| u.pos.y).sum::<f64>() / n as f64;
        assert!((mx - 400.0).abs() < 3.0 * (100.0f64).sqrt() / (n as f64).sqrt());
        assert!((my - 500.0).abs() < 3.0 * (50.0f64).sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn same_seed_same_users() {
        let spec = GridSpec::default();
        let a = sample_users(&paper_dist(), 50, &spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_users(&paper_dist(), 50, &spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn users_are_clamped_into_the_grid() {
        let dist = UserDistribution {
            mean: [85.0, 85.0],
            cov: [[400.0, 0.0], [0.0, 400.0]],
        };
        let spec = GridSpec::default();
        let users = sample_users(&dist, 500, &spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(users.iter().all(|u| u.pos.x <= 90.0 && u.pos.y <= 90.0 && u.pos.x >= 0.0));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let dist = UserDistribution {
            mean: [0.0, 0.0],
            cov: [[1.0, 2.0], [2.0, 1.0]],
        };
        assert!(dist.validate().is_err());
        let asym = UserDistribution {
            mean: [0.0, 0.0],
            cov: [[1.0, 0.5], [0.0, 1.0]],
        };
        assert!(asym.validate().is_err());
    }
}
