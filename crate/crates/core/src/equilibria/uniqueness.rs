use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{impact_values, ActionProfile, GameSpec};

/// Largest follower count for which all principal minors are enumerated.
pub const MINOR_LIMIT: usize = 12;

/// Corners of the joint box are enumerated when `N * K` is at most this.
const CORNER_LIMIT: usize = 12;

/// Sampled curvature bounds of the followers' game and the matrix built from them.
///
/// The bounds are empirical: infimum and supremum are taken over sampled
/// profiles, so a positive verdict can in principle be a false positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessCertificate {
    /// `N_f x N_f`, row-major, follower order as in `GameSpec::followers`.
    pub upsilon: Vec<Vec<f64>>,
    pub alpha_min: Vec<f64>,
    pub beta_max: Vec<Vec<f64>>,
    pub is_p_matrix: bool,
    pub samples_used: usize,
}

/// Builds the followers' coupling matrix from `samples` Latin-hypercube
/// profiles plus the all-minimum and all-maximum profiles (and every box
/// corner for small games), then tests it for the P-property.
///
/// For the log-throughput utility the own curvature is `H^2 / (f + H a)^2` and
/// the cross curvature towards `m` is `H x_m / (f + H a)^2` per dimension.
pub fn uniqueness_certificate(
    spec: &GameSpec,
    samples: usize,
    seed: u64,
) -> Result<UniquenessCertificate> {
    if samples == 0 {
        return Err(GameError::InvalidArgument(
            "at least one sample required".into(),
        ));
    }
    let followers = spec.followers();
    let nf = followers.len();
    if nf > MINOR_LIMIT {
        return Err(GameError::CombinatorialLimit {
            n: nf,
            limit: MINOR_LIMIT,
        });
    }
    let n = spec.n_players();
    let k = spec.n_dims();
    let hi: Vec<Vec<f64>> = (0..n)
        .map(|p| {
            (0..k)
                .map(|d| {
                    let v = spec.action_max[p][d];
                    if v.is_finite() {
                        v
                    } else {
                        spec.budget(p).unwrap_or(f64::INFINITY)
                    }
                })
                .collect()
        })
        .collect();
    if hi.iter().flatten().any(|v| v.is_infinite()) {
        return Err(GameError::InvalidArgument(
            "sampling needs bounded action boxes".into(),
        ));
    }
    let lo = &spec.action_min;
    let mut profiles = vec![
        ActionProfile::new(lo.clone()),
        ActionProfile::new(hi.clone()),
    ];
    if n * k <= CORNER_LIMIT {
        for mask in 1..(1usize << (n * k)) - 1 {
            let actions = (0..n)
                .map(|p| {
                    (0..k)
                        .map(|d| {
                            if mask >> (p * k + d) & 1 == 1 {
                                hi[p][d]
                            } else {
                                lo[p][d]
                            }
                        })
                        .collect()
                })
                .collect();
            profiles.push(ActionProfile::new(actions));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: Vec<Vec<usize>> = (0..n * k)
        .map(|_| {
            let mut s: Vec<usize> = (0..samples).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    for i in 0..samples {
        let actions = (0..n)
            .map(|p| {
                (0..k)
                    .map(|d| {
                        let u = (strata[p * k + d][i] as f64 + rng.gen::<f64>()) / samples as f64;
                        lo[p][d] + u * (hi[p][d] - lo[p][d])
                    })
                    .collect()
            })
            .collect();
        profiles.push(ActionProfile::new(actions));
    }
    strata.clear();

    let mut alpha = vec![f64::INFINITY; nf];
    let mut beta = vec![vec![0.0f64; nf]; nf];
    for p in &profiles {
        for (i, &fi) in followers.iter().enumerate() {
            let f = impact_values(spec, p, fi);
            for d in 0..k {
                let h = spec.direct_gain(fi, d);
                let total = f[d] + h * p.actions[fi][d];
                let denom = total * total;
                alpha[i] = alpha[i].min(h * h / denom);
                for (j, &fj) in followers.iter().enumerate() {
                    if i != j {
                        beta[i][j] = beta[i][j].max(h * spec.gain(fi, fj, d) / denom);
                    }
                }
            }
        }
    }
    let upsilon: Vec<Vec<f64>> = (0..nf)
        .map(|i| {
            (0..nf)
                .map(|j| if i == j { alpha[i] } else { -beta[i][j] })
                .collect()
        })
        .collect();
    let is_p = is_p_matrix(&upsilon)?;
    Ok(UniquenessCertificate {
        upsilon,
        alpha_min: alpha,
        beta_max: beta,
        is_p_matrix: is_p,
        samples_used: profiles.len(),
    })
}

/// True iff every principal minor of the square matrix is positive.
pub fn is_p_matrix(m: &[Vec<f64>]) -> Result<bool> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(GameError::InvalidArgument("matrix must be square".into()));
    }
    if n > MINOR_LIMIT {
        return Err(GameError::CombinatorialLimit {
            n,
            limit: MINOR_LIMIT,
        });
    }
    for mask in 1usize..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[idx[r]][idx[c]]);
        if !(sub.determinant() > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Role, UtilityModel};

    #[test]
    fn p_matrix_examples() {
        assert!(is_p_matrix(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap());
        assert!(!is_p_matrix(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap());
        assert!(is_p_matrix(&[vec![0.3]]).unwrap());
        assert!(!is_p_matrix(&[vec![0.0]]).unwrap());
        // minors that are positive although the matrix is not symmetric
        assert!(is_p_matrix(&[vec![1.0, 5.0], vec![-5.0, 1.0]]).unwrap());
        assert!(matches!(
            is_p_matrix(&vec![vec![1.0; 13]; 13]),
            Err(GameError::CombinatorialLimit { n: 13, .. })
        ));
    }

    fn followers(n: usize, cross: f64) -> GameSpec {
        let mut g = vec![vec![vec![cross]; n]; n];
        for i in 0..n {
            g[i][i] = vec![1.0];
        }
        GameSpec::new(
            vec![Role::Follower; n],
            vec![vec![0.0]; n],
            vec![vec![2.0]; n],
            g,
            vec![vec![0.1]; n],
            UtilityModel::PricedThroughput {
                price: vec![0.5; n],
            },
        )
        .unwrap()
    }

    #[test]
    fn certificate_structure() {
        let spec = followers(2, 0.2);
        let c = uniqueness_certificate(&spec, 50, 7).unwrap();
        for i in 0..2 {
            assert_eq!(c.upsilon[i][i], c.alpha_min[i]);
            for j in 0..2 {
                if i != j {
                    assert_eq!(c.upsilon[i][j], -c.beta_max[i][j]);
                }
            }
        }
        // bounds reached at the all-max and all-min corners
        let alpha = 1.0 / (0.1f64 + 0.4 + 2.0).powi(2);
        let beta = 0.2 / 0.01;
        assert!((c.alpha_min[0] - alpha).abs() < 1e-12);
        assert!((c.beta_max[0][1] - beta).abs() < 1e-12);
        assert!(!c.is_p_matrix);
        assert_eq!(c.samples_used, 52 + 2);
    }

    #[test]
    fn single_follower_is_scalar() {
        let spec = followers(1, 0.0);
        let c = uniqueness_certificate(&spec, 10, 1).unwrap();
        assert_eq!(c.upsilon.len(), 1);
        assert!(c.is_p_matrix);
    }

    #[test]
    fn too_many_followers() {
        let spec = followers(13, 0.01);
        assert!(matches!(
            uniqueness_certificate(&spec, 3, 0),
            Err(GameError::CombinatorialLimit { .. })
        ));
    }
}
