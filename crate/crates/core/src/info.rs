//! Entropy, mutual information and L1 typicality, all in bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::check_simplex;
use crate::radix::MixedRadix;

/// Default typicality slack.
pub const DEFAULT_TYPICALITY_EPSILON: f64 = 0.05;

/// `-sum p log2 p` with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Binary entropy `H_b(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    entropy(&[p, 1.0 - p])
}

/// A probability table over a finite product of alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    shape: MixedRadix,
    probs: Vec<f64>,
}

impl JointDistribution {
    /// `probs` is laid out row-major over `sizes`.
    pub fn new(sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let shape = MixedRadix::new(sizes);
        if probs.len() != shape.size() {
            return Err(Error::LengthMismatch {
                left: probs.len(),
                right: shape.size(),
            });
        }
        check_simplex(&probs, "joint table")?;
        Ok(Self { shape, probs })
    }

    /// Builds a table from an unnormalized weight function; no check.
    pub(crate) fn from_fn(sizes: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let shape = MixedRadix::new(sizes);
        let mut digits = vec![0; shape.len()];
        let probs = (0..shape.size())
            .map(|x| {
                shape.digits_into(x, &mut digits);
                f(&digits)
            })
            .collect();
        Self { shape, probs }
    }

    /// Product of independent marginals.
    pub fn product(marginals: &[Vec<f64>]) -> Result<Self> {
        for (i, m) in marginals.iter().enumerate() {
            check_simplex(m, &format!("marginal {i}"))?;
        }
        Ok(Self::from_fn(
            marginals.iter().map(Vec::len).collect(),
            |d| d.iter().zip(marginals).map(|(&x, m)| m[x]).product(),
        ))
    }

    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    pub fn sizes(&self) -> &[usize] {
        self.shape.radices()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn shape(&self) -> &MixedRadix {
        &self.shape
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        for (n, &a) in axes.iter().enumerate() {
            if a >= self.axes() {
                return Err(Error::InvalidArgument(format!(
                    "axis {a} out of range for {} axes",
                    self.axes()
                )));
            }
            if axes[..n].contains(&a) {
                return Err(Error::InvalidArgument(format!("axis {a} repeated")));
            }
        }
        Ok(())
    }

    /// Marginal over `axes`, laid out row-major in the given axis order.
    pub fn marginal(&self, axes: &[usize]) -> Result<Vec<f64>> {
        self.check_axes(axes)?;
        let sub = MixedRadix::new(axes.iter().map(|&a| self.sizes()[a]).collect());
        let mut out = vec![0.0; sub.size()];
        let mut digits = vec![0; self.axes()];
        for (x, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.shape.digits_into(x, &mut digits);
            let j: usize = axes
                .iter()
                .zip(sub.strides())
                .map(|(&a, s)| digits[a] * s)
                .sum();
            out[j] += p;
        }
        Ok(out)
    }

    /// Joint entropy of the listed axes (0 for no axes).
    pub fn entropy_of(&self, axes: &[usize]) -> Result<f64> {
        Ok(entropy(&self.marginal(axes)?))
    }

    /// `H(X | Y) = H(X, Y) - H(Y)`.
    pub fn conditional_entropy(&self, target: &[usize], given: &[usize]) -> Result<f64> {
        disjoint(target, given)?;
        let mut both = target.to_vec();
        both.extend_from_slice(given);
        let h = self.entropy_of(&both)? - self.entropy_of(given)?;
        Ok(h.max(0.0))
    }

    /// `I(X; Y) = H(X) - H(X | Y)`.
    pub fn mutual_information(&self, x: &[usize], y: &[usize]) -> Result<f64> {
        disjoint(x, y)?;
        let hx = self.entropy_of(x)?;
        Ok((hx - self.conditional_entropy(x, y)?).max(0.0))
    }
}

fn disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    match a.iter().find(|x| b.contains(x)) {
        Some(&x) => Err(Error::OverlappingAxes(x)),
        None => Ok(()),
    }
}

/// Symbol counts `N(x | x^n)`.
pub fn counts(sequence: &[usize], alphabet: usize) -> Result<Vec<usize>> {
    let mut c = vec![0usize; alphabet];
    for &x in sequence {
        if x >= alphabet {
            return Err(Error::InvalidArgument(format!(
                "symbol {x} outside alphabet of size {alphabet}"
            )));
        }
        c[x] += 1;
    }
    Ok(c)
}

/// Empirical frequencies of a nonempty sequence.
pub fn empirical_type(sequence: &[usize], alphabet: usize) -> Result<Vec<f64>> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let n = sequence.len() as f64;
    Ok(counts(sequence, alphabet)?
        .into_iter()
        .map(|c| c as f64 / n)
        .collect())
}

/// L1 distance between the type given by `counts` and `q`.
pub fn type_distance(counts: &[usize], q: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .zip(q)
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum()
}

/// L1 typicality test on counts, with zero-support exclusion.
pub fn counts_typical(counts: &[usize], q: &[f64], epsilon: f64) -> bool {
    if counts.iter().zip(q).any(|(&c, &p)| c > 0 && p <= 0.0) {
        return false;
    }
    // the 1e-12 slack absorbs rounding in exact-type sequences
    type_distance(counts, q) <= epsilon + 1e-12
}

/// True iff `sum_x |N(x|x^n)/n - Q(x)| <= epsilon` and no zero-probability
/// symbol occurs. Symbols outside `Q`'s alphabet make the sequence atypical.
pub fn is_typical(sequence: &[usize], q: &[f64], epsilon: f64) -> bool {
    if sequence.is_empty() {
        return false;
    }
    match counts(sequence, q.len()) {
        Ok(c) => counts_typical(&c, q, epsilon),
        Err(_) => false,
    }
}

/// Joint typicality of `(x^n, y^n)` w.r.t. a two-axis joint distribution.
pub fn is_jointly_typical(
    x: &[usize],
    y: &[usize],
    joint: &JointDistribution,
    epsilon: f64,
) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if joint.axes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "joint typicality needs a 2-axis table, got {} axes",
            joint.axes()
        )));
    }
    let ny = joint.sizes()[1];
    if x.iter().any(|&a| a >= joint.sizes()[0]) || y.iter().any(|&b| b >= ny) {
        return Ok(false);
    }
    let pairs: Vec<usize> = x.iter().zip(y).map(|(&a, &b)| a * ny + b).collect();
    Ok(is_typical(&pairs, joint.probs(), epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn entropy_examples() {
        assert!(close(entropy(&[0.25; 4]), 2.0, 1e-15));
        assert_eq!(entropy(&[0.0, 1.0, 0.0]), 0.0);
        let oracle = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
        assert!(close(entropy(&[0.9, 0.1]), oracle, 1e-15));
        assert!(close(entropy(&[0.9, 0.1]), 0.4690, 5e-5));
    }

    #[test]
    fn conditional_entropy_examples() {
        let j = JointDistribution::product(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        assert!(close(
            j.conditional_entropy(&[0], &[1]).unwrap(),
            entropy(&[0.3, 0.7]),
            1e-12
        ));
        let det = JointDistribution::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(close(det.conditional_entropy(&[0], &[1]).unwrap(), 0.0, 1e-15));
        assert_eq!(
            j.conditional_entropy(&[0], &[0]).unwrap_err(),
            Error::OverlappingAxes(0)
        );
    }

    // joint of (a_2, s_1) under P*_2 = (0.9, 0.1) and a BSC with flip 1/4
    fn pd_joint(flip: f64, p: [f64; 2]) -> JointDistribution {
        JointDistribution::from_fn(vec![2, 2], |d| {
            p[d[0]] * if d[0] == d[1] { 1.0 - flip } else { flip }
        })
    }

    #[test]
    fn pd_channel_conditional_entropy() {
        let j = pd_joint(0.25, [0.9, 0.1]);
        // oracle: Bayes posterior per signal
        let mut oracle = 0.0;
        for s in 0..2 {
            let w = |a: usize| if a == s { 0.75 } else { 0.25 };
            let ps = 0.9 * w(0) + 0.1 * w(1);
            let post = [0.9 * w(0) / ps, 0.1 * w(1) / ps];
            oracle += ps * entropy(&post);
        }
        let h = j.conditional_entropy(&[0], &[1]).unwrap();
        assert!(close(h, oracle, 1e-12));
        assert!(close(h, 0.3990, 5e-5));
    }

    #[test]
    fn mutual_information_examples() {
        let ind = JointDistribution::product(&[vec![0.2, 0.8], vec![0.5, 0.5]]).unwrap();
        assert!(close(ind.mutual_information(&[0], &[1]).unwrap(), 0.0, 1e-12));
        let same = JointDistribution::new(vec![2, 2], vec![0.2, 0.0, 0.0, 0.8]).unwrap();
        assert!(close(
            same.mutual_information(&[0], &[1]).unwrap(),
            entropy(&[0.2, 0.8]),
            1e-12
        ));
        let j = pd_joint(0.25, [0.5, 0.5]);
        let oracle = 1.0 + 0.25 * 0.25f64.log2() + 0.75 * 0.75f64.log2();
        let mi = j.mutual_information(&[0], &[1]).unwrap();
        assert!(close(mi, oracle, 1e-12));
        assert!(close(mi, 0.1887, 5e-5));
    }

    #[test]
    fn empirical_type_examples() {
        assert_eq!(empirical_type(&[0, 0, 1, 1], 2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(empirical_type(&[1, 1, 1], 2).unwrap(), vec![0.0, 1.0]);
        let s = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(empirical_type(&s, 2).unwrap(), vec![0.6, 0.4]);
        assert!(empirical_type(&[], 2).is_err());
    }

    #[test]
    fn typicality_examples() {
        assert!(is_typical(&[0, 1, 0, 1], &[0.5, 0.5], 0.0));
        assert!(!is_typical(&[0, 0, 2], &[0.5, 0.5, 0.0], 10.0));
        let s = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        assert!(!is_typical(&s, &[0.5, 0.5], 0.05));
        assert!(is_typical(&s, &[0.5, 0.5], 0.2));
    }

    #[test]
    fn joint_typicality_examples() {
        let j = JointDistribution::new(vec![2, 2], vec![0.25; 4]).unwrap();
        let x = [0, 0, 1, 1];
        let y = [0, 1, 0, 1];
        assert!(is_jointly_typical(&x, &y, &j, 0.0).unwrap());
        // 20 samples: 6 (0,0), 4 (0,1), 4 (1,0), 6 (1,1) -> marginals exact, L1 = 0.2
        let mut x = vec![];
        let mut y = vec![];
        for (a, b, n) in [(0, 0, 6), (0, 1, 4), (1, 0, 4), (1, 1, 6)] {
            for _ in 0..n {
                x.push(a);
                y.push(b);
            }
        }
        // oracle: L1 of pair counts
        let l1: f64 = [6.0, 4.0, 4.0, 6.0].iter().map(|c| (c / 20.0 - 0.25f64).abs()).sum();
        assert!(close(l1, 0.2, 1e-12));
        assert!(is_typical(&x, &[0.5, 0.5], 0.0));
        assert!(is_typical(&y, &[0.5, 0.5], 0.0));
        assert!(!is_jointly_typical(&x, &y, &j, 0.1).unwrap());
        assert!(is_jointly_typical(&x, &y, &j, 0.2).unwrap());
        assert!(is_jointly_typical(&[0], &[0, 1], &j, 0.1).is_err());
    }

    #[test]
    fn typical_set_size_at_n10() {
        // exhaustive enumeration, Q = (0.5, 0.5), n = 10, eps = 0.2
        let q = [0.5, 0.5];
        let n = 10;
        let eps = 0.2;
        let mut size = 0u32;
        for mask in 0u32..1024 {
            let s: Vec<usize> = (0..n).map(|b| ((mask >> b) & 1) as usize).collect();
            if is_typical(&s, &q, eps) {
                size += 1;
            }
        }
        // ones in {4, 5, 6}: C(10,4)+C(10,5)+C(10,6)
        assert_eq!(size, 210 + 252 + 210);
        let h = entropy(&q);
        let c = (1.0 / 0.5f64).log2();
        let lo = 2f64.powf(n as f64 * (h - c * eps));
        let hi = 2f64.powf(n as f64 * (h + c * eps));
        assert!(lo <= size as f64 && size as f64 <= hi);
    }

    #[test]
    fn typicality_converges() {
        let q = [0.2, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut fractions = vec![];
        for &n in &[50usize, 200, 800] {
            let trials = 10_000;
            let mut hits = 0;
            let mut seq = vec![0; n];
            for _ in 0..trials {
                for s in seq.iter_mut() {
                    *s = crate::game::sample_index(&q, &mut rng);
                }
                if is_typical(&seq, &q, 0.1) {
                    hits += 1;
                }
            }
            fractions.push(hits as f64 / trials as f64);
        }
        assert!(fractions[0] <= fractions[1] && fractions[1] <= fractions[2]);
        assert!(fractions[2] >= 0.99, "{fractions:?}");
    }

    fn random_joint(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> JointDistribution {
        let w: Vec<f64> = (0..nx * ny)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        let s: f64 = w.iter().sum::<f64>().max(1e-300);
        let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
        if s <= 1e-300 {
            p[0] = 1.0;
        }
        JointDistribution::from_fn(vec![nx, ny], |d| p[d[0] * ny + d[1]])
    }

    proptest! {
        #[test]
        fn chain_rule_and_bounds(seed in any::<u64>(), nx in 1usize..5, ny in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, nx, ny);
            let hxy = j.entropy_of(&[0, 1]).unwrap();
            let hy = j.entropy_of(&[1]).unwrap();
            let hx = j.entropy_of(&[0]).unwrap();
            let hxgy = j.conditional_entropy(&[0], &[1]).unwrap();
            prop_assert!((hxy - (hy + hxgy)).abs() < 1e-10);
            prop_assert!(hxgy >= 0.0);
            prop_assert!(hxgy <= hx + 1e-10);
            prop_assert!(hx <= (nx as f64).log2() + 1e-10);
            let ixy = j.mutual_information(&[0], &[1]).unwrap();
            let iyx = j.mutual_information(&[1], &[0]).unwrap();
            prop_assert!(ixy >= 0.0);
            prop_assert!((ixy - iyx).abs() < 1e-10);
        }

        #[test]
        fn typical_iff_type_close(seq in proptest::collection::vec(0usize..3, 1..40),
                                  w in proptest::collection::vec(0.0f64..1.0, 3),
                                  eps in 0.0f64..0.5) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 1e-6);
            let q: Vec<f64> = w.iter().map(|x| x / s).collect();
            let t = empirical_type(&seq, 3).unwrap();
            let l1: f64 = t.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
            let zero_ok = t.iter().zip(&q).all(|(a, b)| *a == 0.0 || *b > 0.0);
            prop_assert_eq!(is_typical(&seq, &q, eps), zero_ok && l1 <= eps + 1e-12);
        }

        #[test]
        fn joint_typical_implies_marginal(pairs in proptest::collection::vec((0usize..2, 0usize..3), 1..30),
                                          seed in any::<u64>(), eps in 0.0f64..0.6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = random_joint(&mut rng, 2, 3);
            let x: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            if is_jointly_typical(&x, &y, &j, eps).unwrap() {
                prop_assert!(is_typical(&x, &j.marginal(&[0]).unwrap(), eps));
                prop_assert!(is_typical(&y, &j.marginal(&[1]).unwrap(), eps));
            }
        }
    }
}
