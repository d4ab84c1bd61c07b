//! Two-class LogitBoost with small regression trees as weak learners.

use super::{check_binary, ScoreModel};
use crate::error::{Error, Result};

/// Working responses are clipped to this magnitude.
pub const Z_MAX: f64 = 4.0;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub n_learn: usize,
    pub learn_rate: f64,
    /// 1 gives stumps.
    pub max_depth: usize,
}

impl BoostParams {
    pub fn new(n_learn: usize, learn_rate: f64) -> Self {
        BoostParams {
            n_learn,
            learn_rate,
            max_depth: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_learn == 0 {
            return Err(Error::Argument("n_learn must be at least 1".into()));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate <= 1.0) {
            return Err(Error::Argument(format!("learn_rate must lie in (0, 1], got {}", self.learn_rate)));
        }
        if self.max_depth == 0 {
            return Err(Error::Argument("tree depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// A node is a leaf when `feature` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            match node.feature {
                None => return node.value,
                Some(f) => at = if x[f] <= node.threshold { node.left } else { node.right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub trees: Vec<RegressionTree>,
    pub learn_rate: f64,
    /// Mean training log-loss after each round.
    pub train_loss: Vec<f64>,
}

impl ScoreModel for BoostModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| 0.5 * self.learn_rate * t.predict(x)).sum()
    }
}

struct TreeFitter<'a> {
    columns: &'a [Vec<f64>],
    sorted: &'a [Vec<u32>],
    z: &'a [f64],
    w: &'a [f64],
    max_depth: usize,
}

impl TreeFitter<'_> {
    fn fit(&self, members: &mut [bool]) -> RegressionTree {
        let mut nodes = Vec::new();
        self.grow(members, 0, &mut nodes);
        RegressionTree { nodes }
    }

    fn grow(&self, members: &mut [bool], depth: usize, nodes: &mut Vec<TreeNode>) -> usize {
        let (mut tw, mut ts, mut count) = (0.0, 0.0, 0usize);
        for (i, _) in members.iter().enumerate().filter(|(_, &m)| m) {
            tw += self.w[i];
            ts += self.w[i] * self.z[i];
            count += 1;
        }
        let value = if tw > 0.0 { ts / tw } else { 0.0 };
        let at = nodes.len();
        nodes.push(TreeNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
        });
        if depth >= self.max_depth || count < 2 || tw <= 0.0 {
            return at;
        }

        let base = ts * ts / tw;
        let mut best: Option<(usize, f64, f64)> = None;
        for (f, order) in self.sorted.iter().enumerate() {
            let col = &self.columns[f];
            let (mut lw, mut ls) = (0.0, 0.0);
            let mut prev: Option<f64> = None;
            for &idx in order {
                let i = idx as usize;
                if !members[i] {
                    continue;
                }
                let v = col[i];
                if let Some(p) = prev {
                    let rw = tw - lw;
                    if v > p && lw > 0.0 && rw > 0.0 {
                        let rs = ts - ls;
                        let gain = ls * ls / lw + rs * rs / rw - base;
                        if gain > 1e-12 * base.abs().max(1e-300) && best.is_none_or(|b| gain > b.2) {
                            best = Some((f, 0.5 * (p + v), gain));
                        }
                    }
                }
                lw += self.w[i];
                ls += self.w[i] * self.z[i];
                prev = Some(v);
            }
        }
        let Some((feature, threshold, _)) = best else {
            return at;
        };

        let col = &self.columns[feature];
        let mut left_members: Vec<bool> = members.iter().enumerate().map(|(i, &m)| m && col[i] <= threshold).collect();
        let mut right_members: Vec<bool> = members.iter().enumerate().map(|(i, &m)| m && col[i] > threshold).collect();
        let left = self.grow(&mut left_members, depth + 1, nodes);
        let right = self.grow(&mut right_members, depth + 1, nodes);
        nodes[at] = TreeNode {
            feature: Some(feature),
            threshold,
            left,
            right,
            value,
        };
        at
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood for scores F with p = 1 / (1 + e^{-2F}).
fn log_loss(f: &[f64], y: &[bool]) -> f64 {
    f.iter()
        .zip(y)
        .map(|(&s, &l)| {
            let m = if l { 2.0 * s } else { -2.0 * s };
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / y.len() as f64
}

pub fn train_logitboost(x: &[Vec<f64>], y: &[bool], params: &BoostParams) -> Result<BoostModel> {
    check_binary(x, y)?;
    params.validate()?;
    let n = x.len();
    let d = x[0].len();
    let columns: Vec<Vec<f64>> = (0..d).map(|f| x.iter().map(|r| r[f]).collect()).collect();
    let sorted: Vec<Vec<u32>> = columns
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut scores = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_learn);
    let mut train_loss = Vec::with_capacity(params.n_learn);
    let mut prev_loss = log_loss(&scores, y);
    for _ in 0..params.n_learn {
        for i in 0..n {
            let p = sigmoid(2.0 * scores[i]);
            let weight = (p * (1.0 - p)).max(1e-10);
            let target = if y[i] { 1.0 } else { 0.0 };
            w[i] = weight;
            z[i] = ((target - p) / weight).clamp(-Z_MAX, Z_MAX);
        }
        let fitter = TreeFitter {
            columns: &columns,
            sorted: &sorted,
            z: &z,
            w: &w,
            max_depth: params.max_depth,
        };
        let mut tree = fitter.fit(&mut vec![true; n]);
        let step: Vec<f64> = x.iter().map(|row| 0.5 * params.learn_rate * tree.predict(row)).collect();
        // halve the step until the training loss does not rise
        let mut factor = 1.0;
        let mut trial: Vec<f64> = Vec::with_capacity(n);
        let mut loss = f64::INFINITY;
        for _ in 0..MAX_HALVINGS {
            trial.clear();
            trial.extend(scores.iter().zip(&step).map(|(s, d)| s + factor * d));
            loss = log_loss(&trial, y);
            if loss <= prev_loss {
                break;
            }
            factor *= 0.5;
        }
        if loss > prev_loss {
            factor = 0.0;
            trial.clone_from(&scores);
            loss = prev_loss;
        }
        if factor != 1.0 {
            tree.nodes.iter_mut().for_each(|node| node.value *= factor);
        }
        scores = trial;
        prev_loss = loss;
        trees.push(tree);
        train_loss.push(loss);
    }
    Ok(BoostModel {
        trees,
        learn_rate: params.learn_rate,
        train_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noisy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = rng.gen_range(-1.0..1.0);
                let p = 1.0 / (1.0 + (-(1.5 * a - b * b + 0.5)).exp());
                (vec![a, b, c], rng.gen::<f64>() < p)
            })
            .unzip()
    }

    #[test]
    fn single_stump_separates_threshold_data() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 12).collect();
        let m = train_logitboost(&x, &y, &BoostParams::new(1, 1.0)).unwrap();
        assert_eq!(m.trees.len(), 1);
        assert_eq!(m.trees[0].nodes.len(), 3);
        assert_eq!(m.trees[0].nodes[0].threshold, 11.5);
        assert!(x.iter().zip(&y).all(|(r, &l)| (m.decision(r) > 0.0) == l));
    }

    #[test]
    fn loss_does_not_increase() {
        let (x, y) = noisy(300, 1);
        for lr in [0.1, 0.5, 1.0] {
            let m = train_logitboost(&x, &y, &BoostParams::new(60, lr)).unwrap();
            let start = 2f64.ln();
            assert!(m.train_loss[0] <= start);
            for pair in m.train_loss.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "lr {lr}: {} -> {}", pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn stump_split_matches_brute_force() {
        let (x, y) = noisy(50, 2);
        let m = train_logitboost(&x, &y, &BoostParams::new(1, 1.0)).unwrap();
        // at F = 0 the working response is +-2 with weight 1/4
        let z: Vec<f64> = y.iter().map(|&l| if l { 2.0 } else { -2.0 }).collect();
        let mut best = (f64::INFINITY, 0, 0.0);
        for f in 0..3 {
            for r in &x {
                let t = r[f];
                let (l, rr): (Vec<f64>, Vec<f64>) = (0..50).fold((vec![], vec![]), |(mut l, mut rr), i| {
                    if x[i][f] <= t {
                        l.push(z[i])
                    } else {
                        rr.push(z[i])
                    }
                    (l, rr)
                });
                if l.is_empty() || rr.is_empty() {
                    continue;
                }
                let sse = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
                };
                let total = sse(&l) + sse(&rr);
                if total < best.0 - 1e-9 {
                    best = (total, f, t);
                }
            }
        }
        let root = &m.trees[0].nodes[0];
        assert_eq!(root.feature, Some(best.1));
        let col: Vec<f64> = x.iter().map(|r| r[best.1]).collect();
        let above = col.iter().filter(|&&v| v > best.2).fold(f64::INFINITY, |a, &b| a.min(b));
        assert!((root.threshold - 0.5 * (best.2 + above)).abs() < 1e-12);
    }

    #[test]
    fn deeper_trees_fit_interactions() {
        let (x, y): (Vec<Vec<f64>>, Vec<bool>) = (0..200)
            .map(|i| {
                let a = (i % 20) as f64 / 10.0 - 1.0;
                let b = (i / 20) as f64 / 5.0 - 1.0;
                (vec![a, b], (a > 0.0) != (b > 0.0))
            })
            .unzip();
        let mut p = BoostParams::new(30, 0.5);
        p.max_depth = 2;
        let m = train_logitboost(&x, &y, &p).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, &l)| (m.decision(r) > 0.0) == l).count();
        assert!(acc >= 190, "{acc}");
    }

    #[test]
    fn learn_rate_range() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![false, true];
        assert!(matches!(
            train_logitboost(&x, &y, &BoostParams::new(5, 0.0)),
            Err(Error::Argument(_))
        ));
        assert!(train_logitboost(&x, &y, &BoostParams::new(5, 1.5)).is_err());
        assert!(train_logitboost(&x, &y, &BoostParams::new(0, 0.5)).is_err());
    }
}
