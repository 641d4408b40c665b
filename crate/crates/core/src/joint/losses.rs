use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, euclidean, prefixed, prefixed_mut, sigmoid, tanh_backward, tanh_vec, Linear, Params, Tensor2};

/// Probabilities are clamped to this distance from 0 and 1 before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Modality alignment (generator) term.
    pub lambda1: f64,
    /// Recipe-side semantic regularization.
    pub lambda2: f64,
    /// Image-side semantic regularization.
    pub lambda3: f64,
    pub margin: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.005,
            lambda2: 0.005,
            lambda3: 0.005,
            margin: 0.3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3, self.margin];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    /// Triplet-only configuration.
    pub fn triplet_only(margin: f64) -> Self {
        Self {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda3: 0.0,
            margin,
        }
    }
}

pub fn total_loss(tri: f64, ma_gen: f64, sem_r: f64, sem_im: f64, w: &LossWeights) -> f64 {
    tri + w.lambda1 * ma_gen + w.lambda2 * sem_r + w.lambda3 * sem_im
}

/// A loss value with its gradient for each embedding of each side.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub loss: f64,
    pub d_recipes: Vec<Vec<f64>>,
    pub d_images: Vec<Vec<f64>>,
}

fn check_batch(recipes: &[Vec<f64>], images: &[Vec<f64>], min: usize) -> Result<()> {
    if recipes.len() != images.len() || recipes.len() < min {
        return Err(Error::InvalidArgument(format!(
            "batch needs at least {min} pairs, got {} recipes and {} images",
            recipes.len(),
            images.len()
        )));
    }
    let d = recipes[0].len();
    if recipes.iter().chain(images).any(|e| e.len() != d) {
        return Err(Error::Shape("embeddings in a batch must share one dimension".into()));
    }
    Ok(())
}

/// Adds `scale * d||a-b||/da` to `da` and the opposite to `db`. The gradient
/// at zero distance is taken as zero.
fn distance_grad(a: &[f64], b: &[f64], scale: f64, da: &mut [f64], db: &mut [f64]) {
    let d = euclidean(a, b);
    if d == 0.0 {
        return;
    }
    for k in 0..a.len() {
        let g = scale * (a[k] - b[k]) / d;
        da[k] += g;
        db[k] -= g;
    }
}

/// Batch-hard triplet loss over `B` pairs `(recipes[i], images[i])`, summed
/// over both anchor directions. Each element has a single positive, its
/// pair; the hardest negative is the closest other item of the opposite
/// modality (lowest index on ties).
pub fn batch_hard_triplet_loss(recipes: &[Vec<f64>], images: &[Vec<f64>], margin: f64) -> Result<PairGrad> {
    check_batch(recipes, images, 2)?;
    let b = recipes.len();
    let dim = recipes[0].len();
    let mut out = PairGrad {
        loss: 0.0,
        d_recipes: vec![vec![0.0; dim]; b],
        d_images: vec![vec![0.0; dim]; b],
    };
    for (anchors, others, anchor_is_recipe) in [(recipes, images, true), (images, recipes, false)] {
        for i in 0..b {
            let pos = euclidean(&anchors[i], &others[i]);
            let (neg_j, neg) = (0..b)
                .filter(|&j| j != i)
                .map(|j| (j, euclidean(&anchors[i], &others[j])))
                .fold((usize::MAX, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
            let hinge = pos - neg + margin;
            if hinge <= 0.0 {
                continue;
            }
            out.loss += hinge;
            let (da, dother) = if anchor_is_recipe {
                (&mut out.d_recipes, &mut out.d_images)
            } else {
                (&mut out.d_images, &mut out.d_recipes)
            };
            let mut ga = vec![0.0; dim];
            distance_grad(&anchors[i], &others[i], 1.0, &mut ga, &mut dother[i]);
            distance_grad(&anchors[i], &others[neg_j], -1.0, &mut ga, &mut dother[neg_j]);
            for (x, g) in da[i].iter_mut().zip(ga) {
                *x += g;
            }
        }
    }
    Ok(out)
}

/// Modality discriminator: affine, tanh, affine, sigmoid. Outputs the
/// probability that an embedding came from an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub hidden: Linear,
    pub out: Linear,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(joint_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            hidden: Linear::new(joint_dim, hidden_dim, rng),
            out: Linear::new(hidden_dim, 1, rng),
        }
    }

    pub fn zeros(joint_dim: usize, hidden_dim: usize) -> Self {
        Self {
            hidden: Linear::zeros(joint_dim, hidden_dim),
            out: Linear::zeros(hidden_dim, 1),
        }
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.1)
    }

    fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let h = tanh_vec(&self.hidden.forward(x)?);
        let z = self.out.forward(&h)?[0];
        Ok((h, sigmoid(z)))
    }

    /// Backprop `dL/dp` through one evaluation; returns `dL/dx`.
    fn backward(&self, x: &[f64], h: &[f64], p: f64, dp: f64, grad: &mut Discriminator) -> Vec<f64> {
        let dz = [dp * p * (1.0 - p)];
        let dh = self.out.backward(h, &dz, &mut grad.out);
        let da = tanh_backward(h, &dh);
        self.hidden.backward(x, &da, &mut grad.hidden)
    }

    /// `mean(-log q(x))` over `xs`, where `q = p` for `target_image` and
    /// `1 - p` otherwise. Returns the loss, input gradients, and parameter
    /// gradients accumulated into `grad`.
    fn bce(&self, xs: &[Vec<f64>], target_image: bool, grad: &mut Discriminator) -> Result<(f64, Vec<Vec<f64>>)> {
        let n = xs.len() as f64;
        let mut loss = 0.0;
        let mut dxs = Vec::with_capacity(xs.len());
        for x in xs {
            let (h, p) = self.forward(x)?;
            let q = if target_image { p } else { 1.0 - p };
            let qc = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= qc.ln() / n;
            // Clamped region is flat.
            let dq = if qc == q { -1.0 / (n * q) } else { 0.0 };
            let dp = if target_image { dq } else { -dq };
            dxs.push(self.backward(x, &h, p, dp, grad));
        }
        Ok((loss, dxs))
    }
}

impl Params for Discriminator {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = prefixed("hidden", self.hidden.tensors());
        v.extend(prefixed("out", self.out.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut v = prefixed_mut("hidden", self.hidden.tensors_mut());
        v.extend(prefixed_mut("out", self.out.tensors_mut()));
        v
    }
}

/// Generator-side alignment loss `-mean log D(E_r)`: recipe embeddings are
/// pushed to look like images. Gradients for the recipe embeddings and the
/// discriminator.
pub fn generator_loss(recipes: &[Vec<f64>], disc: &Discriminator) -> Result<(f64, Vec<Vec<f64>>, Discriminator)> {
    if recipes.is_empty() {
        return Err(Error::Empty("alignment loss needs at least one embedding".into()));
    }
    let mut g = disc.zeros_like();
    let (loss, d) = disc.bce(recipes, true, &mut g)?;
    Ok((loss, d, g))
}

/// Discriminator loss `-mean log D(E_im) - mean log(1 - D(E_r))`.
pub fn discriminator_loss(
    recipes: &[Vec<f64>],
    images: &[Vec<f64>],
    disc: &Discriminator,
) -> Result<(PairGrad, Discriminator)> {
    check_batch(recipes, images, 1)?;
    let mut g = disc.zeros_like();
    let (li, d_images) = disc.bce(images, true, &mut g)?;
    let (lr, d_recipes) = disc.bce(recipes, false, &mut g)?;
    Ok((
        PairGrad {
            loss: li + lr,
            d_recipes,
            d_images,
        },
        g,
    ))
}

/// Both alignment losses as `(generator, discriminator)`.
pub fn modality_alignment_losses(recipes: &[Vec<f64>], images: &[Vec<f64>], disc: &Discriminator) -> Result<(f64, f64)> {
    Ok((generator_loss(recipes, disc)?.0, discriminator_loss(recipes, images, disc)?.0.loss))
}

/// Mean cross-entropy of a classifier head over a batch of embeddings.
/// Returns the loss and embedding gradients; head gradients go to `grad`.
pub fn semantic_loss(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    head: &Linear,
    grad: &mut Linear,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if embeddings.is_empty() || embeddings.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} embeddings with {} labels",
            embeddings.len(),
            labels.len()
        )));
    }
    let n = embeddings.len() as f64;
    let mut loss = 0.0;
    let mut d = Vec::with_capacity(embeddings.len());
    for (e, &y) in embeddings.iter().zip(labels) {
        let logits = head.forward(e)?;
        let (l, mut dl) = cross_entropy(&logits, y)?;
        loss += l / n;
        dl.iter_mut().for_each(|v| *v /= n);
        d.push(head.backward(e, &dl, grad));
    }
    Ok((loss, d))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // scalar oracles index explicitly
mod tests {
    use super::*;
    use crate::eval::tests::random_rotation;
    use crate::nn::{grad_check, seeded_rng};
    use proptest::prelude::*;
    use rand::Rng;

    fn rand_batch(rng: &mut impl Rng, b: usize, d: usize) -> Vec<Vec<f64>> {
        (0..b).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    /// Enumerates every (anchor, positive, negative) triple and keeps the
    /// hardest per anchor.
    fn oracle(recipes: &[Vec<f64>], images: &[Vec<f64>], margin: f64) -> f64 {
        let b = recipes.len();
        let mut total = 0.0;
        for (a, o) in [(recipes, images), (images, recipes)] {
            for i in 0..b {
                let mut worst = f64::NEG_INFINITY;
                for p in (0..b).filter(|&p| p == i) {
                    for n in (0..b).filter(|&n| n != i) {
                        worst = worst.max(euclidean(&a[i], &o[p]) - euclidean(&a[i], &o[n]) + margin);
                    }
                }
                total += worst.max(0.0);
            }
        }
        total
    }

    fn flat(batch: &[Vec<f64>]) -> Vec<f64> {
        batch.concat()
    }

    fn unflat(x: &[f64], d: usize) -> Vec<Vec<f64>> {
        x.chunks(d).map(|c| c.to_vec()).collect()
    }

    #[test]
    fn hand_computed_triplet_cases() {
        let r = vec![vec![0.0], vec![1.0]];
        assert_eq!(batch_hard_triplet_loss(&r, &r, 0.5).unwrap().loss, 0.0);
        assert!((batch_hard_triplet_loss(&r, &r, 1.5).unwrap().loss - 2.0).abs() < 1e-12);
        assert!(batch_hard_triplet_loss(&r[..1], &r[..1], 0.3).is_err());
        let far = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
        let got = batch_hard_triplet_loss(&far, &far, 0.3).unwrap();
        assert_eq!(got.loss, 0.0);
        assert!(got.d_recipes.iter().flatten().all(|g| *g == 0.0));
    }

    #[test]
    fn triplet_matches_enumeration_oracle() {
        let mut rng = seeded_rng(11);
        for _ in 0..200 {
            let b = rng.random_range(2..=8);
            let d = rng.random_range(1..=16);
            let r = rand_batch(&mut rng, b, d);
            let i = rand_batch(&mut rng, b, d);
            let m = rng.random_range(0.0..2.0);
            let got = batch_hard_triplet_loss(&r, &i, m).unwrap().loss;
            assert!((got - oracle(&r, &i, m)).abs() <= 1e-9);
        }
    }

    #[test]
    fn triplet_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(12);
        let (b, d) = (4, 3);
        let r = rand_batch(&mut rng, b, d);
        let i = rand_batch(&mut rng, b, d);
        let mut x = flat(&r);
        x.extend(flat(&i));
        let report = grad_check(
            |x| {
                let (r, i) = x.split_at(b * d);
                let g = batch_hard_triplet_loss(&unflat(r, d), &unflat(i, d), 1.0).unwrap();
                let mut grad = flat(&g.d_recipes);
                grad.extend(flat(&g.d_images));
                (g.loss, grad)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-3, "{report:?}");
    }

    #[test]
    fn uniform_discriminator_loss_is_two_ln2() {
        let d = Discriminator::zeros(4, 3);
        let mut rng = seeded_rng(13);
        let r = rand_batch(&mut rng, 5, 4);
        let i = rand_batch(&mut rng, 5, 4);
        let (gen, dis) = modality_alignment_losses(&r, &i, &d).unwrap();
        assert!((dis - 2.0 * std::f64::consts::LN_2).abs() <= 1e-9);
        assert!((gen - std::f64::consts::LN_2).abs() <= 1e-9);
    }

    #[test]
    fn perfect_discriminator_limits() {
        let mut d = Discriminator::zeros(1, 1);
        // D(x) = sigmoid(100 * tanh(10 x)): images at +1, recipes at -1.
        d.hidden.weight.set(0, 0, 10.0);
        d.out.weight.set(0, 0, 100.0);
        let (gen, dis) = modality_alignment_losses(&[vec![-1.0]], &[vec![1.0]], &d).unwrap();
        assert!(dis < 1e-6, "{dis}");
        assert!(gen > 15.0 && gen.is_finite(), "{gen}");
    }

    #[test]
    fn alignment_gradients_match_finite_differences() {
        let mut rng = seeded_rng(14);
        let disc = Discriminator::new(3, 4, &mut rng);
        let r = rand_batch(&mut rng, 3, 3);
        let i = rand_batch(&mut rng, 3, 3);
        // Discriminator loss w.r.t. parameters and both sides' embeddings.
        let np = disc.num_params();
        let mut x = disc.flatten();
        x.extend(flat(&r));
        x.extend(flat(&i));
        let report = grad_check(
            |x| {
                let mut d = disc.clone();
                d.assign_flat(&x[..np]);
                let (r, i) = x[np..].split_at(9);
                let (g, pg) = discriminator_loss(&unflat(r, 3), &unflat(i, 3), &d).unwrap();
                let mut grad = pg.flatten();
                grad.extend(flat(&g.d_recipes));
                grad.extend(flat(&g.d_images));
                (g.loss, grad)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-3, "disc {report:?}");
        // Generator loss w.r.t. parameters and recipe embeddings.
        let mut x = disc.flatten();
        x.extend(flat(&r));
        let report = grad_check(
            |x| {
                let mut d = disc.clone();
                d.assign_flat(&x[..np]);
                let (l, dr, pg) = generator_loss(&unflat(&x[np..], 3), &d).unwrap();
                let mut grad = pg.flatten();
                grad.extend(flat(&dr));
                (l, grad)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-3, "gen {report:?}");
    }

    #[test]
    fn semantic_loss_cases() {
        let head = Linear::zeros(2, 5);
        let mut g = head.zeros_like();
        let (l, _) = semantic_loss(&[vec![0.3, 0.1], vec![1.0, 2.0]], &[0, 4], &head, &mut g).unwrap();
        assert!((l - 5f64.ln()).abs() <= 1e-9);
        let mut sure = Linear::zeros(2, 3);
        sure.bias.set(1, 0, 50.0);
        let (l, _) = semantic_loss(&[vec![0.0, 0.0]], &[1], &sure, &mut sure.zeros_like()).unwrap();
        assert!(l < 1e-12);
        assert!(semantic_loss(&[vec![0.0, 0.0]], &[3], &sure, &mut sure.zeros_like()).is_err());
    }

    #[test]
    fn semantic_loss_matches_scalar_oracle() {
        let mut rng = seeded_rng(15);
        let head = Linear::new(3, 4, &mut rng);
        let embs = rand_batch(&mut rng, 6, 3);
        let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
        let (got, _) = semantic_loss(&embs, &labels, &head, &mut head.zeros_like()).unwrap();
        let mut want = 0.0;
        for (e, &y) in embs.iter().zip(&labels) {
            let logits: Vec<f64> = (0..4)
                .map(|c| head.bias.get(c, 0) + (0..3).map(|k| head.weight.get(c, k) * e[k]).sum::<f64>())
                .collect();
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            want -= (logits[y].exp() / z).ln();
        }
        assert!((got - want / 6.0).abs() <= 1e-9);
    }

    #[test]
    fn semantic_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(16);
        let head = Linear::new(3, 4, &mut rng);
        let embs = rand_batch(&mut rng, 3, 3);
        let labels = [0, 3, 1];
        let np = head.num_params();
        let mut x = head.flatten();
        x.extend(flat(&embs));
        let report = grad_check(
            |x| {
                let mut h = head.clone();
                h.assign_flat(&x[..np]);
                let mut g = h.zeros_like();
                let (l, de) = semantic_loss(&unflat(&x[np..], 3), &labels, &h, &mut g).unwrap();
                let mut grad = g.flatten();
                grad.extend(flat(&de));
                (l, grad)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-3, "{report:?}");
    }

    #[test]
    fn total_loss_arithmetic() {
        let w = LossWeights::default();
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert!((total_loss(1.0, 1.0, 1.0, 1.0, &w) - 1.015).abs() < 1e-12);
        assert_eq!(total_loss(0.7, 3.0, 2.0, 1.0, &LossWeights::triplet_only(0.3)), 0.7);
        assert!(LossWeights { lambda1: -1.0, ..w }.validate().is_err());
    }

    proptest! {
        #[test]
        fn triplet_nonnegative_and_zero_iff_satisfied(seed in 0u64..1000, b in 2usize..8, d in 1usize..6, m in 0.0f64..1.5) {
            let mut rng = seeded_rng(seed);
            let r = rand_batch(&mut rng, b, d);
            let i = rand_batch(&mut rng, b, d);
            let l = batch_hard_triplet_loss(&r, &i, m).unwrap().loss;
            prop_assert!(l >= 0.0);
            let satisfied = [(&r, &i), (&i, &r)].iter().all(|(a, o)| {
                (0..b).all(|k| (0..b).filter(|&j| j != k).all(|j| euclidean(&a[k], &o[k]) + m <= euclidean(&a[k], &o[j])))
            });
            prop_assert_eq!(l == 0.0, satisfied);
        }

        #[test]
        fn triplet_invariant_under_rotation(seed in 0u64..1000, b in 2usize..8, d in 1usize..8) {
            let mut rng = seeded_rng(seed);
            let r = rand_batch(&mut rng, b, d);
            let i = rand_batch(&mut rng, b, d);
            let rot = random_rotation(d, &mut rng);
            let rr: Vec<Vec<f64>> = r.iter().map(|x| rot(x)).collect();
            let ri: Vec<Vec<f64>> = i.iter().map(|x| rot(x)).collect();
            let a = batch_hard_triplet_loss(&r, &i, 0.5).unwrap().loss;
            let c = batch_hard_triplet_loss(&rr, &ri, 0.5).unwrap().loss;
            prop_assert!((a - c).abs() <= 1e-9);
        }

        #[test]
        fn discriminator_loss_ignores_recipe_order(seed in 0u64..1000, b in 2usize..6) {
            let mut rng = seeded_rng(seed);
            let disc = Discriminator::new(4, 3, &mut rng);
            let mut r = rand_batch(&mut rng, b, 4);
            let i = rand_batch(&mut rng, b, 4);
            let before = discriminator_loss(&r, &i, &disc).unwrap().0.loss;
            r.swap(0, b - 1);
            let after = discriminator_loss(&r, &i, &disc).unwrap().0.loss;
            prop_assert!((before - after).abs() <= 1e-12);
        }
    }
}
