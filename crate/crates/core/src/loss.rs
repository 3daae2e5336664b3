//! Adversarial and cycle-reconstruction objectives over mini-batches, with exact
//! gradients for all four networks.
//!
//! Batches are `batch × dim` matrices; `batch1` is drawn from the first graph's
//! embedding and `batch2` from the second's.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{log_one_minus_prob, log_prob, CriticParams, MapperParams, ParamSet};

/// The two mappers and two critics trained jointly.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignerParams {
    /// Maps first-graph embeddings into the second graph's space.
    pub g12: MapperParams,
    /// Maps second-graph embeddings into the first graph's space.
    pub g21: MapperParams,
    /// Separates real first-graph embeddings from `g21` outputs.
    pub d1: CriticParams,
    /// Separates real second-graph embeddings from `g12` outputs.
    pub d2: CriticParams,
}

impl AlignerParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            g12: self.g12.zeros_like(),
            g21: self.g21.zeros_like(),
            d1: self.d1.zeros_like(),
            d2: self.d2.zeros_like(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g12.dim()
    }
}

impl ParamSet for AlignerParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.g12.slices();
        v.extend(self.g21.slices());
        v.extend(self.d1.slices());
        v.extend(self.d2.slices());
        v
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.g12.slices_mut();
        v.extend(self.g21.slices_mut());
        v.extend(self.d1.slices_mut());
        v.extend(self.d2.slices_mut());
        v
    }
}

/// How mappers are pushed against their critic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorLoss {
    /// Minimize `log(1 - D(G(x)))` exactly as in the minimax objective.
    Saturating,
    /// Minimize `-log D(G(x))`, same fixed point with stronger early gradients.
    #[default]
    Nonsaturating,
}

impl std::str::FromStr for GeneratorLoss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saturating" => Ok(Self::Saturating),
            "nonsaturating" => Ok(Self::Nonsaturating),
            _ => Err(Error::InvalidArgument(format!("unknown generator loss `{s}`"))),
        }
    }
}

impl std::fmt::Display for GeneratorLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Saturating => "saturating",
            Self::Nonsaturating => "nonsaturating",
        })
    }
}

fn check_batches(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Empty("mini-batch".into()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    Ok(())
}

/// Value and optional gradients of one adversarial game
/// `mean log D(real) + mean log(1 - D(G(source)))`.
pub(crate) struct AdversarialEval {
    pub value: f64,
    /// Gradient of the generator objective selected by the caller.
    pub mapper_grad: Option<MapperParams>,
    /// Gradient of `value` with respect to the critic.
    pub critic_grad: Option<CriticParams>,
}

pub(crate) fn adversarial(
    mapper: &MapperParams,
    critic: &CriticParams,
    source: &Array2<f64>,
    real: &Array2<f64>,
    mapper_objective: Option<GeneratorLoss>,
    want_critic: bool,
) -> Result<AdversarialEval> {
    check_batches(source, real)?;
    let n_real = real.nrows() as f64;
    let n_src = source.nrows() as f64;

    let real_cache = critic.forward_cached(real)?;
    let (real_vals, real_grads): (Vec<f64>, Vec<f64>) = real_cache.logits().iter().map(|&z| log_prob(z)).unzip();

    let (fake, mapper_cache) = mapper.forward_cached(source)?;
    let fake_cache = critic.forward_cached(&fake)?;
    let (fake_vals, fake_grads): (Vec<f64>, Vec<f64>) =
        fake_cache.logits().iter().map(|&z| log_one_minus_prob(z)).unzip();

    let value = real_vals.iter().sum::<f64>() / n_real + fake_vals.iter().sum::<f64>() / n_src;

    let critic_grad = if want_critic {
        let g_real = Array1::from_iter(real_grads.iter().map(|g| g / n_real));
        let g_fake = Array1::from_iter(fake_grads.iter().map(|g| g / n_src));
        let (a, _) = critic.backward(&real_cache, &g_real, true);
        let (b, _) = critic.backward(&fake_cache, &g_fake, true);
        let mut total = a.expect("requested");
        accumulate(&mut total, &b.expect("requested"), 1.0);
        Some(total)
    } else {
        None
    };

    let mapper_grad = mapper_objective.map(|mode| {
        let g_logits = match mode {
            GeneratorLoss::Saturating => Array1::from_iter(fake_grads.iter().map(|g| g / n_src)),
            GeneratorLoss::Nonsaturating => {
                Array1::from_iter(fake_cache.logits().iter().map(|&z| -log_prob(z).1 / n_src))
            }
        };
        let (_, grad_fake) = critic.backward(&fake_cache, &g_logits, false);
        mapper.backward(&mapper_cache, &grad_fake).0
    });

    Ok(AdversarialEval {
        value,
        mapper_grad,
        critic_grad,
    })
}

/// `target += scale * grad`, tensor by tensor.
pub fn accumulate<P: ParamSet>(target: &mut P, grad: &P, scale: f64) {
    for (t, g) in target.slices_mut().into_iter().zip(grad.slices()) {
        for (a, b) in t.iter_mut().zip(g) {
            *a += scale * b;
        }
    }
}

/// Mean L1 reconstruction error of `back(forth(x))` over the rows of `batch`,
/// with gradients for both mappers.
fn reconstruction(
    forth: &MapperParams,
    back: &MapperParams,
    batch: &Array2<f64>,
) -> Result<(f64, MapperParams, MapperParams)> {
    let n = batch.nrows() as f64;
    let (mid, forth_cache) = forth.forward_cached(batch)?;
    let (out, back_cache) = back.forward_cached(&mid)?;
    let diff = &out - batch;
    let value = diff.iter().map(|v| v.abs()).sum::<f64>() / n;
    // sign(0) = 0: the minimum of |.| has a zero subgradient
    let grad_out = diff.mapv(|v| if v > 0.0 { 1.0 / n } else if v < 0.0 { -1.0 / n } else { 0.0 });
    let (grad_back, grad_mid) = back.backward(&back_cache, &grad_out);
    let (grad_forth, _) = forth.backward(&forth_cache, &grad_mid);
    Ok((value, grad_forth, grad_back))
}

/// Cycle loss value with gradients `(d/d g12, d/d g21)`.
pub(crate) fn cycle_with_grads(
    g12: &MapperParams,
    g21: &MapperParams,
    batch1: &Array2<f64>,
    batch2: &Array2<f64>,
) -> Result<(f64, MapperParams, MapperParams)> {
    check_batches(batch1, batch2)?;
    let (v1, f12, b21) = reconstruction(g12, g21, batch1)?;
    let (v2, f21, b12) = reconstruction(g21, g12, batch2)?;
    let mut g12_grad = f12;
    accumulate(&mut g12_grad, &b12, 1.0);
    let mut g21_grad = b21;
    accumulate(&mut g21_grad, &f21, 1.0);
    Ok((v1 + v2, g12_grad, g21_grad))
}

/// `mean log D2(x2) + mean log(1 - D2(G12(x1)))`.
pub fn adv_loss_1to2(g12: &MapperParams, d2: &CriticParams, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<f64> {
    adversarial(g12, d2, batch1, batch2, None, false).map(|e| e.value)
}

/// `mean log D1(x1) + mean log(1 - D1(G21(x2)))`.
pub fn adv_loss_2to1(g21: &MapperParams, d1: &CriticParams, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<f64> {
    adversarial(g21, d1, batch2, batch1, None, false).map(|e| e.value)
}

/// `mean ||G21(G12(x1)) - x1||_1 + mean ||G12(G21(x2)) - x2||_1`.
pub fn cycle_loss(g12: &MapperParams, g21: &MapperParams, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<f64> {
    cycle_with_grads(g12, g21, batch1, batch2).map(|(v, _, _)| v)
}

/// The three loss components, evaluated once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub adv12: f64,
    pub adv21: f64,
    pub cycle: f64,
}

impl LossParts {
    pub fn evaluate(p: &AlignerParams, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<Self> {
        Ok(Self {
            adv12: adv_loss_1to2(&p.g12, &p.d2, batch1, batch2)?,
            adv21: adv_loss_2to1(&p.g21, &p.d1, batch1, batch2)?,
            cycle: cycle_loss(&p.g12, &p.g21, batch1, batch2)?,
        })
    }

    pub fn total(&self, lambda: f64) -> f64 {
        self.adv12 + self.adv21 + lambda * self.cycle
    }
}

pub fn total_loss(p: &AlignerParams, batch1: &Array2<f64>, batch2: &Array2<f64>, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be non-negative".into()));
    }
    Ok(LossParts::evaluate(p, batch1, batch2)?.total(lambda))
}

/// A scalar objective whose gradient [`backward`] can produce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossTerm {
    Adv12,
    Adv21,
    Cycle,
    Total { lambda: f64 },
}

impl LossTerm {
    pub fn value(&self, p: &AlignerParams, batch1: &Array2<f64>, batch2: &Array2<f64>) -> Result<f64> {
        match *self {
            LossTerm::Adv12 => adv_loss_1to2(&p.g12, &p.d2, batch1, batch2),
            LossTerm::Adv21 => adv_loss_2to1(&p.g21, &p.d1, batch1, batch2),
            LossTerm::Cycle => cycle_loss(&p.g12, &p.g21, batch1, batch2),
            LossTerm::Total { lambda } => total_loss(p, batch1, batch2, lambda),
        }
    }
}

/// Exact gradient of `term` (literal minimax form) with respect to every parameter;
/// networks that do not participate receive zeros.
pub fn backward(p: &AlignerParams, batch1: &Array2<f64>, batch2: &Array2<f64>, term: LossTerm) -> Result<(f64, AlignerParams)> {
    let mut grads = p.zeros_like();
    let sat = Some(GeneratorLoss::Saturating);
    let mut value = 0.0;
    let (do12, do21, cyc_weight) = match term {
        LossTerm::Adv12 => (true, false, None),
        LossTerm::Adv21 => (false, true, None),
        LossTerm::Cycle => (false, false, Some(1.0)),
        LossTerm::Total { lambda } => {
            if lambda < 0.0 {
                return Err(Error::InvalidArgument("lambda must be non-negative".into()));
            }
            (true, true, Some(lambda))
        }
    };
    if do12 {
        let e = adversarial(&p.g12, &p.d2, batch1, batch2, sat, true)?;
        value += e.value;
        accumulate(&mut grads.g12, &e.mapper_grad.expect("requested"), 1.0);
        accumulate(&mut grads.d2, &e.critic_grad.expect("requested"), 1.0);
    }
    if do21 {
        let e = adversarial(&p.g21, &p.d1, batch2, batch1, sat, true)?;
        value += e.value;
        accumulate(&mut grads.g21, &e.mapper_grad.expect("requested"), 1.0);
        accumulate(&mut grads.d1, &e.critic_grad.expect("requested"), 1.0);
    }
    if let Some(w) = cyc_weight {
        let (v, g12, g21) = cycle_with_grads(&p.g12, &p.g21, batch1, batch2)?;
        value += w * v;
        accumulate(&mut grads.g12, &g12, w);
        accumulate(&mut grads.g21, &g21, w);
    }
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MapperVariant, PROB_EPS};
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn identity_zero(dim: usize, hidden: usize) -> AlignerParams {
        AlignerParams {
            g12: MapperParams::identity(MapperVariant::Linear, dim),
            g21: MapperParams::identity(MapperVariant::Linear, dim),
            d1: CriticParams::zeros(dim, hidden),
            d2: CriticParams::zeros(dim, hidden),
        }
    }

    fn random_batch(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn constant_critic_value() {
        let p = identity_zero(3, 4);
        let b1 = array![[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]];
        let b2 = array![[4.0, 0.0, 1.0]];
        assert!((adv_loss_1to2(&p.g12, &p.d2, &b1, &b2).unwrap() + 2.0 * LN2).abs() < 1e-12);
        assert!((adv_loss_2to1(&p.g21, &p.d1, &b1, &b2).unwrap() + 2.0 * LN2).abs() < 1e-12);
        assert!((total_loss(&p, &b1, &b2, 10.0).unwrap() + 4.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn perfect_critic_reaches_supremum() {
        // real rows have x = +1, generated rows x = -1; a steep critic saturates on both
        let mut d2 = CriticParams::zeros(1, 1);
        d2.w1[[0, 0]] = 1.0;
        d2.w2[0] = 100.0;
        let g = MapperParams::identity(MapperVariant::Linear, 1);
        let v = adv_loss_1to2(&g, &d2, &array![[-1.0]], &array![[1.0]]).unwrap();
        assert!((v - 2.0 * (1.0 - PROB_EPS).ln()).abs() < 1e-15);
        assert!(v.abs() < 1e-6);
    }

    #[test]
    fn hand_evaluated_two_unit_critic() {
        let d2 = CriticParams {
            w1: array![[1.0, 0.0], [0.0, -1.0]],
            b1: array![0.0, 0.5],
            w2: array![1.0, 2.0],
            b2: -0.5,
            slope: 0.2,
        };
        let g12 = MapperParams::identity(MapperVariant::Linear, 2);
        let x1 = array![[0.5, 1.0]];
        let x2 = array![[-1.0, 0.25]];
        // D2(x2): hidden = leaky([-1, 0.25]) = [-0.2, 0.25]; z = -0.2 + 0.5 - 0.5 = -0.2
        // D2(x1): hidden = leaky([0.5, -0.5]) = [0.5, -0.1]; z = 0.5 - 0.2 - 0.5 = -0.2
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let expected = s(-0.2).ln() + (1.0 - s(-0.2)).ln();
        let got = adv_loss_1to2(&g12, &d2, &x1, &x2).unwrap();
        assert!((got - expected).abs() < 1e-14);
        // the mirrored game with the same networks and swapped batches agrees
        let mirrored = adv_loss_2to1(&g12, &d2, &x2, &x1).unwrap();
        assert_eq!(got, mirrored);
    }

    #[test]
    fn cycle_examples() {
        let id = MapperParams::identity(MapperVariant::Linear, 2);
        let b1 = array![[1.0, 2.0]];
        let b2 = array![[0.0, 1.0]];
        assert_eq!(cycle_loss(&id, &id, &b1, &b2).unwrap(), 0.0);

        let mut plus = id.clone();
        plus.bias.fill(1.0);
        let mut minus = id.clone();
        minus.bias.fill(-1.0);
        assert_eq!(cycle_loss(&plus, &minus, &b1, &b2).unwrap(), 0.0);

        let mut double = id.clone();
        double.weight *= 2.0;
        assert!((cycle_loss(&double, &id, &b1, &b2).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_reconstruction_has_zero_gradient() {
        let p = identity_zero(3, 2);
        let mut rng = seeded(1, 0);
        let (b1, b2) = (random_batch(&mut rng, 4, 3), random_batch(&mut rng, 5, 3));
        let (v, g) = backward(&p, &b1, &b2, LossTerm::Cycle).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.slices().iter().all(|s| s.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn swap_symmetry() {
        let mut rng = seeded(2, 0);
        let g = MapperParams::init(MapperVariant::Nonlinear, 3, 0.4, &mut rng);
        let d = CriticParams::init(3, 6, 0.5, &mut rng);
        let (b1, b2) = (random_batch(&mut rng, 4, 3), random_batch(&mut rng, 6, 3));
        assert_eq!(
            adv_loss_2to1(&g, &d, &b1, &b2).unwrap(),
            adv_loss_1to2(&g, &d, &b2, &b1).unwrap()
        );
    }

    #[test]
    fn total_is_compositional() {
        let mut rng = seeded(3, 0);
        for _ in 0..100 {
            let p = AlignerParams {
                g12: MapperParams::init(MapperVariant::Nonlinear, 3, 0.5, &mut rng),
                g21: MapperParams::init(MapperVariant::Linear, 3, 0.5, &mut rng),
                d1: CriticParams::init(3, 5, 0.7, &mut rng),
                d2: CriticParams::init(3, 5, 0.7, &mut rng),
            };
            let (b1, b2) = (random_batch(&mut rng, 3, 3), random_batch(&mut rng, 4, 3));
            let lambda = rng.random_range(0.0..100.0);
            let parts = adv_loss_1to2(&p.g12, &p.d2, &b1, &b2).unwrap()
                + adv_loss_2to1(&p.g21, &p.d1, &b1, &b2).unwrap()
                + lambda * cycle_loss(&p.g12, &p.g21, &b1, &b2).unwrap();
            assert!((total_loss(&p, &b1, &b2, lambda).unwrap() - parts).abs() < 1e-10);
            assert!(cycle_loss(&p.g12, &p.g21, &b1, &b2).unwrap() >= 0.0);
        }
    }

    #[test]
    fn lambda_zero_drops_cycle() {
        let mut rng = seeded(4, 0);
        let mut p = identity_zero(2, 3);
        p.g12.weight *= 3.0;
        let (b1, b2) = (random_batch(&mut rng, 3, 2), random_batch(&mut rng, 3, 2));
        let adv = adv_loss_1to2(&p.g12, &p.d2, &b1, &b2).unwrap() + adv_loss_2to1(&p.g21, &p.d1, &b1, &b2).unwrap();
        assert_eq!(total_loss(&p, &b1, &b2, 0.0).unwrap(), adv);
        assert!(total_loss(&p, &b1, &b2, -1.0).is_err());
    }

    #[test]
    fn batch_errors() {
        let p = identity_zero(2, 3);
        let empty = Array2::<f64>::zeros((0, 2));
        let one = array![[1.0, 2.0]];
        assert!(adv_loss_1to2(&p.g12, &p.d2, &empty, &one).is_err());
        assert!(cycle_loss(&p.g12, &p.g21, &one, &array![[1.0, 2.0, 3.0]]).is_err());
    }
}
