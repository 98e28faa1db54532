//! Deterministic samplings of the unit sphere modulo antipodes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    AngularGrid,
    Fibonacci,
    RandomOrthant,
}

/// Unit vectors in `R^d`, one per antipodal pair. Coordinate axes are
/// always included.
#[derive(Debug, Clone, Serialize)]
pub struct SphereSampling {
    pub dim: usize,
    pub scheme: SamplingScheme,
    pub points: Vec<Vec<f64>>,
}

const SEED: u64 = 0x005e_ed0f_c04e;

impl SphereSampling {
    /// 720 half-circle angles in `d = 2`, 2048 Fibonacci points in `d = 3`,
    /// 4096 random points otherwise.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            2 => Self::with_count(2, 720),
            3 => Self::with_count(3, 2048),
            _ => Self::with_count(dim, 4096),
        }
    }

    pub fn with_count(dim: usize, count: usize) -> Self {
        assert!(dim >= 1 && count >= 1, "empty sampling");
        match dim {
            1 => SphereSampling {
                dim,
                scheme: SamplingScheme::AngularGrid,
                points: vec![vec![1.0]],
            },
            2 => {
                // θ_j = π j / count covers the half circle; count even hits e2.
                let mut points: Vec<Vec<f64>> = (0..count)
                    .map(|j| {
                        let t = std::f64::consts::PI * j as f64 / count as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect();
                points[0] = vec![1.0, 0.0];
                if count.is_multiple_of(2) {
                    points[count / 2] = vec![0.0, 1.0];
                } else {
                    points.push(vec![0.0, 1.0]);
                }
                SphereSampling {
                    dim,
                    scheme: SamplingScheme::AngularGrid,
                    points,
                }
            }
            3 => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let mut points: Vec<Vec<f64>> = (0..count)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        canonical(vec![r * phi.cos(), r * phi.sin(), z])
                    })
                    .collect();
                add_axes(&mut points, 3);
                SphereSampling {
                    dim,
                    scheme: SamplingScheme::Fibonacci,
                    points,
                }
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ dim as u64);
                let mut points = Vec::new();
                let flips = 1usize << (dim - 1);
                while points.len() < count {
                    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let n = crate::linalg::norm(&v);
                    if n < 1e-8 {
                        continue;
                    }
                    let base: Vec<f64> = v.iter().map(|x| x.abs() / n).collect();
                    // Sign patterns modulo the global sign.
                    for mask in 0..flips {
                        let p: Vec<f64> = base
                            .iter()
                            .enumerate()
                            .map(|(i, &x)| {
                                if i > 0 && mask >> (i - 1) & 1 == 1 {
                                    -x
                                } else {
                                    x
                                }
                            })
                            .collect();
                        points.push(canonical(p));
                    }
                }
                points.truncate(count.max(flips));
                add_axes(&mut points, dim);
                SphereSampling {
                    dim,
                    scheme: SamplingScheme::RandomOrthant,
                    points,
                }
            }
        }
    }

    /// Uses the given unit vectors verbatim (normalised and canonicalised).
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Self {
        let points = points
            .into_iter()
            .map(|p| {
                assert_eq!(p.len(), dim);
                let n = crate::linalg::norm(&p);
                canonical(p.iter().map(|x| x / n).collect())
            })
            .collect();
        SphereSampling {
            dim,
            scheme: SamplingScheme::AngularGrid,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Typical angular spacing between neighbouring samples.
    pub fn spacing(&self) -> f64 {
        let n = self.points.len().max(1) as f64;
        match self.dim {
            1 => std::f64::consts::PI,
            2 => std::f64::consts::PI / n,
            d => {
                // area of the half sphere split evenly among the samples
                let half_area = sphere_area(d) / 2.0;
                (half_area / n).powf(1.0 / (d as f64 - 1.0))
            }
        }
    }
}

fn sphere_area(d: usize) -> f64 {
    // |S^{d-1}| = 2 π^{d/2} / Γ(d/2)
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(d)
}

/// Γ(d/2) for positive integers d.
fn gamma_half_integer(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Representative of `{p, −p}` whose first nonzero coordinate is positive.
pub fn canonical(mut p: Vec<f64>) -> Vec<f64> {
    if let Some(first) = p.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            p.iter_mut().for_each(|x| *x = -*x);
        }
    }
    p
}

fn add_axes(points: &mut Vec<Vec<f64>>, dim: usize) {
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        points.push(e);
    }
}
