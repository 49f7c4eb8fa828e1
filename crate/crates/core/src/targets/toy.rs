use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Target;
use crate::error::{Error, Result};

/// Mode offset of the two-component mixture.
const MOG2_MU: [f64; 2] = [2.0, 0.0];
const DONUT_RADIUS: f64 = 2.6;
const DONUT_VAR: f64 = 0.033;
const FUNNEL_SCALE: f64 = 3.0;
const SQUIGGLE_SD: f64 = 0.3;

/// The six 2D benchmark densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    /// `-|x|^2 / 2`
    Gaussian,
    /// `log[exp(-|x - mu|^2 / 2) + exp(-|x + mu|^2 / 2)]`, `mu = (2, 0)`
    Mog2,
    /// `-[x1^2 / 10 + (x2 - x1^2 + 2)^2] / 2`
    Rosenbrock,
    /// `-(|x| - 2.6)^2 / (2 * 0.033)`
    Donut,
    /// `-x1^2 / 18 - x2^2 / (2 exp(x1)) - x1 / 2`
    Funnel,
    /// `-x1^2 / 4 - (x2 - sin 2x1)^2 / (2 * 0.3^2)`
    Squiggle,
}

impl TargetName {
    pub const ALL: [TargetName; 6] = [
        TargetName::Gaussian,
        TargetName::Mog2,
        TargetName::Rosenbrock,
        TargetName::Donut,
        TargetName::Funnel,
        TargetName::Squiggle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetName::Gaussian => "gaussian",
            TargetName::Mog2 => "mog2",
            TargetName::Rosenbrock => "rosenbrock",
            TargetName::Donut => "donut",
            TargetName::Funnel => "funnel",
            TargetName::Squiggle => "squiggle",
        }
    }
}

impl fmt::Display for TargetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TargetName::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown target {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Toy2d {
    pub name: TargetName,
}

pub fn make_target(name: &str) -> Result<Toy2d> {
    Ok(Toy2d { name: name.parse()? })
}

impl From<TargetName> for Toy2d {
    fn from(name: TargetName) -> Self {
        Self { name }
    }
}

/// Responsibilities of the two mixture components.
fn mog2_weights(x: &[f64]) -> (f64, f64) {
    let a1 = -0.5 * ((x[0] - MOG2_MU[0]).powi(2) + (x[1] - MOG2_MU[1]).powi(2));
    let a2 = -0.5 * ((x[0] + MOG2_MU[0]).powi(2) + (x[1] + MOG2_MU[1]).powi(2));
    let m = a1.max(a2);
    let (e1, e2) = ((a1 - m).exp(), (a2 - m).exp());
    (e1 / (e1 + e2), e2 / (e1 + e2))
}

impl Target for Toy2d {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        match self.name {
            TargetName::Gaussian => -0.5 * (x1 * x1 + x2 * x2),
            TargetName::Mog2 => {
                let a1 = -0.5 * ((x1 - MOG2_MU[0]).powi(2) + (x2 - MOG2_MU[1]).powi(2));
                let a2 = -0.5 * ((x1 + MOG2_MU[0]).powi(2) + (x2 + MOG2_MU[1]).powi(2));
                let m = a1.max(a2);
                m + ((a1 - m).exp() + (a2 - m).exp()).ln()
            }
            TargetName::Rosenbrock => {
                let t = x2 - x1 * x1 + 2.0;
                -0.5 * (x1 * x1 / 10.0 + t * t)
            }
            TargetName::Donut => {
                let r = x1.hypot(x2);
                -(r - DONUT_RADIUS).powi(2) / (2.0 * DONUT_VAR)
            }
            TargetName::Funnel => {
                -x1 * x1 / (2.0 * FUNNEL_SCALE * FUNNEL_SCALE) - x2 * x2 * (-x1).exp() / 2.0 - x1 / 2.0
            }
            TargetName::Squiggle => {
                let t = x2 - (2.0 * x1).sin();
                -x1 * x1 / 4.0 - t * t / (2.0 * SQUIGGLE_SD * SQUIGGLE_SD)
            }
        }
    }

    fn score(&self, x: &[f64], out: &mut [f64]) {
        let (x1, x2) = (x[0], x[1]);
        let (s1, s2) = match self.name {
            TargetName::Gaussian => (-x1, -x2),
            TargetName::Mog2 => {
                let (w1, w2) = mog2_weights(x);
                (
                    -(w1 * (x1 - MOG2_MU[0]) + w2 * (x1 + MOG2_MU[0])),
                    -(w1 * (x2 - MOG2_MU[1]) + w2 * (x2 + MOG2_MU[1])),
                )
            }
            TargetName::Rosenbrock => {
                let t = x2 - x1 * x1 + 2.0;
                (-x1 / 10.0 + 2.0 * x1 * t, -t)
            }
            TargetName::Donut => {
                let r = x1.hypot(x2);
                if r < 1e-12 {
                    (0.0, 0.0)
                } else {
                    let c = -(r - DONUT_RADIUS) / (DONUT_VAR * r);
                    (c * x1, c * x2)
                }
            }
            TargetName::Funnel => {
                let e = (-x1).exp();
                (-x1 / (FUNNEL_SCALE * FUNNEL_SCALE) + 0.5 * x2 * x2 * e - 0.5, -x2 * e)
            }
            TargetName::Squiggle => {
                let p = 1.0 / (SQUIGGLE_SD * SQUIGGLE_SD);
                let t = x2 - (2.0 * x1).sin();
                (-x1 / 2.0 + 2.0 * p * t * (2.0 * x1).cos(), -p * t)
            }
        };
        out[0] = s1;
        out[1] = s2;
    }

    fn score_vjp(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let (x1, x2) = (x[0], x[1]);
        // Hessian entries (h11, h12, h22).
        let (h11, h12, h22) = match self.name {
            TargetName::Gaussian => (-1.0, 0.0, -1.0),
            TargetName::Mog2 => {
                // -I + Cov_w(g) with g_k = -(x - mu_k).
                let (w1, w2) = mog2_weights(x);
                let g1 = [-(x1 - MOG2_MU[0]), -(x2 - MOG2_MU[1])];
                let g2 = [-(x1 + MOG2_MU[0]), -(x2 + MOG2_MU[1])];
                let m = [w1 * g1[0] + w2 * g2[0], w1 * g1[1] + w2 * g2[1]];
                let c = |i: usize, j: usize| w1 * g1[i] * g1[j] + w2 * g2[i] * g2[j] - m[i] * m[j];
                (-1.0 + c(0, 0), c(0, 1), -1.0 + c(1, 1))
            }
            TargetName::Rosenbrock => {
                let t = x2 - x1 * x1 + 2.0;
                (-0.1 + 2.0 * t - 4.0 * x1 * x1, 2.0 * x1, -1.0)
            }
            TargetName::Donut => {
                let r = x1.hypot(x2);
                if r < 1e-12 {
                    (0.0, 0.0, 0.0)
                } else {
                    // -(1/var) [u u^T + (r - R)/r (I - u u^T)], u = x / r
                    let (u1, u2) = (x1 / r, x2 / r);
                    let k = (r - DONUT_RADIUS) / r;
                    let h = |a: f64, b: f64, delta: f64| -(a * b + k * (delta - a * b)) / DONUT_VAR;
                    (h(u1, u1, 1.0), h(u1, u2, 0.0), h(u2, u2, 1.0))
                }
            }
            TargetName::Funnel => {
                let e = (-x1).exp();
                (-1.0 / (FUNNEL_SCALE * FUNNEL_SCALE) - 0.5 * x2 * x2 * e, x2 * e, -e)
            }
            TargetName::Squiggle => {
                let p = 1.0 / (SQUIGGLE_SD * SQUIGGLE_SD);
                let t = x2 - (2.0 * x1).sin();
                let (s, c) = (2.0 * x1).sin_cos();
                (-0.5 - 4.0 * p * c * c - 4.0 * p * t * s, 2.0 * p * c, -p)
            }
        };
        out[0] = v[0] * h11 + v[1] * h12;
        out[1] = v[0] * h12 + v[1] * h22;
    }

    fn has_analytic_hessian(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{finite_difference_score_vjp, score_vjp};
    use super::*;
    use crate::rng::Prng;

    #[test]
    fn named_examples() {
        let mut s = [0.0; 2];
        make_target("gaussian").unwrap().score(&[1.0, 2.0], &mut s);
        assert_eq!(s, [-1.0, -2.0]);

        make_target("mog2").unwrap().score(&[0.0, 0.0], &mut s);
        assert!(s.iter().all(|v| v.abs() < 1e-15));

        let donut = make_target("donut").unwrap();
        for angle in [0.0, 0.7, 2.0, 4.0] {
            let x = [DONUT_RADIUS * f64::cos(angle), DONUT_RADIUS * f64::sin(angle)];
            donut.score(&x, &mut s);
            assert!(s.iter().all(|v| v.abs() < 1e-12), "{s:?}");
        }
        assert!(matches!(make_target("banana"), Err(Error::Config(_))));
    }

    #[test]
    fn gaussian_vjp_is_negation() {
        let g = make_target("gaussian").unwrap();
        assert_eq!(score_vjp(&g, &[0.3, -2.0], &[1.5, -0.5]).unwrap(), vec![-1.5, 0.5]);
        assert_eq!(score_vjp(&g, &[0.3, -2.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn donut_radial_vjp_matches_finite_differences() {
        let donut = make_target("donut").unwrap();
        let x = [DONUT_RADIUS * 0.6, DONUT_RADIUS * 0.8];
        let v = [0.6, 0.8];
        let analytic = score_vjp(&donut, &x, &v).unwrap();
        let mut fd = [0.0; 2];
        finite_difference_score_vjp(&donut, &x, &v, &mut fd);
        assert!(analytic.iter().zip(&fd).all(|(a, b)| (a - b).abs() < 1e-4));
        // Radial curvature is -1/var.
        assert!((analytic[0] + 0.6 / DONUT_VAR).abs() < 1e-9);
    }

    #[test]
    fn scores_match_log_density_gradients() {
        let mut prng = Prng::new(11, 0);
        for name in TargetName::ALL {
            let t = Toy2d::from(name);
            for _ in 0..100 {
                let x = [6.0 * prng.uniform() - 3.0, 6.0 * prng.uniform() - 3.0];
                let mut s = [0.0; 2];
                t.score(&x, &mut s);
                assert!(rel_close(&s, &fd_gradient(&t, &x), 1e-5), "{name} at {x:?}");
            }
        }
    }

    #[test]
    fn hessians_match_score_differences_and_are_symmetric() {
        let mut prng = Prng::new(12, 0);
        for name in TargetName::ALL {
            let t = Toy2d::from(name);
            for _ in 0..50 {
                let x = [6.0 * prng.uniform() - 3.0, 6.0 * prng.uniform() - 3.0];
                let v = [prng.normal(), prng.normal()];
                let mut fd = [0.0; 2];
                finite_difference_score_vjp(&t, &x, &v, &mut fd);
                assert!(rel_close(&score_vjp(&t, &x, &v).unwrap(), &fd, 1e-5), "{name}");
                let r0 = score_vjp(&t, &x, &[1.0, 0.0]).unwrap();
                let r1 = score_vjp(&t, &x, &[0.0, 1.0]).unwrap();
                assert!((r0[1] - r1[0]).abs() <= 1e-6 * r0[1].abs().max(1.0));
            }
        }
    }

    #[test]
    fn evaluation_is_repeatable() {
        for name in TargetName::ALL {
            let t = Toy2d::from(name);
            let x = [0.37, -1.21];
            assert_eq!(t.log_density(&x).to_bits(), t.log_density(&x).to_bits());
        }
    }
}
