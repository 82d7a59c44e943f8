//! The finite control set: piecewise-constant controls `u(t) = r_j b_l` on
//! each grid interval, with magnitude levels `r_j` from the plan, directions
//! `b_l` from the σ-net, and the budget `dt * sum_i r_{j_i}^p <= r^p`.
//!
//! A zero magnitude makes the direction irrelevant, so words are kept in a
//! canonical form with `l_i = 0` wherever `j_i = 0`.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::DiscretizationPlan;
use crate::sphere::SigmaNet;
use crate::system::ProblemInstance;
use crate::vecmath::norm;

pub const DEFAULT_WORD_CAP: u64 = 10_000_000;

/// One admissible piecewise-constant control: magnitude index `j_i` in
/// `0..=q` and direction index `l_i` in `0..a` per interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ControlWord {
    pub magnitudes: Vec<u32>,
    pub directions: Vec<u32>,
}

impl ControlWord {
    pub fn zero(n_steps: usize) -> Self {
        ControlWord {
            magnitudes: vec![0; n_steps],
            directions: vec![0; n_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.magnitudes
            .iter()
            .zip(&self.directions)
            .all(|(&j, &l)| j != 0 || l == 0)
    }

    /// Control value on interval `i`, written into `out`.
    #[inline]
    pub fn value_into(&self, i: usize, plan: &DiscretizationPlan, net: &SigmaNet, out: &mut [f64]) {
        let mag = plan.magnitude(self.magnitudes[i] as usize);
        let dir = &net.points[self.directions[i] as usize];
        for (o, b) in out.iter_mut().zip(dir) {
            *o = mag * b;
        }
    }

    pub fn value(&self, i: usize, plan: &DiscretizationPlan, net: &SigmaNet) -> Vec<f64> {
        let mut out = vec![0.0; net.m];
        self.value_into(i, plan, net, &mut out);
        out
    }

    pub fn to_control(&self, plan: &DiscretizationPlan, net: &SigmaNet) -> PiecewiseControl {
        PiecewiseControl {
            t0: plan.t0,
            theta: plan.theta,
            values: (0..self.len()).map(|i| self.value(i, plan, net)).collect(),
        }
    }
}

/// Budget test in the scaled form `sum_i cost(j_i) <= limit`, with
/// `cost(j) = j^p` and `limit = r^p / (delta^p dt)`.
///
/// For integral `p` the costs are exact integers and the limit is floored,
/// so the comparison is exact given the limit. Otherwise costs are floating
/// and compared with plain `<=`. Equality is admitted either way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budget {
    pub costs: Vec<f64>,
    pub limit: f64,
    pub exact: bool,
}

impl Budget {
    pub fn new(plan: &DiscretizationPlan, instance: &ProblemInstance) -> Self {
        let p = instance.p;
        // relative slack so that e.g. 1 / (0.1^2 * 0.1) = 999.99.. still floors to 1000
        let raw_limit = instance.r.powf(p) / (plan.delta().powf(p) * plan.dt()) * (1.0 + 1e-12);
        let integral = p.fract() == 0.0 && p <= 64.0;
        // every partial sum must stay an exactly representable integer
        let max_sum = plan.n_steps as f64 * (plan.q as f64).powf(p);
        if integral && max_sum < 2f64.powi(53) {
            let e = p as i32;
            Budget {
                costs: (0..=plan.q).map(|j| (j as f64).powi(e)).collect(),
                limit: raw_limit.floor(),
                exact: true,
            }
        } else {
            Budget {
                costs: (0..=plan.q).map(|j| (j as f64).powf(p)).collect(),
                limit: raw_limit,
                exact: false,
            }
        }
    }

    pub fn admits(&self, magnitudes: &[u32]) -> bool {
        magnitudes
            .iter()
            .map(|&j| self.costs[j as usize])
            .sum::<f64>()
            <= self.limit
    }
}

fn well_formed(word: &ControlWord, plan: &DiscretizationPlan, net_len: Option<usize>) -> bool {
    word.magnitudes.len() == plan.n_steps
        && word.directions.len() == plan.n_steps
        && word.magnitudes.iter().all(|&j| j as usize <= plan.q)
        && net_len.is_none_or(|a| word.directions.iter().all(|&l| (l as usize) < a))
}

/// Budget inequality for a word; malformed words are infeasible.
pub fn feasible(word: &ControlWord, plan: &DiscretizationPlan, instance: &ProblemInstance) -> bool {
    well_formed(word, plan, None) && Budget::new(plan, instance).admits(&word.magnitudes)
}

/// `(dt * sum_i r_{j_i}^p)^{1/p}`.
pub fn word_lp_norm(
    word: &ControlWord,
    plan: &DiscretizationPlan,
    instance: &ProblemInstance,
) -> f64 {
    let s: f64 = word
        .magnitudes
        .iter()
        .map(|&j| plan.magnitude(j as usize).powf(instance.p))
        .sum();
    (plan.dt() * s).powf(1.0 / instance.p)
}

/// Exact number of canonical words, or a capacity error once it passes `cap`.
///
/// Integral budgets are counted by dynamic programming over the spent budget;
/// otherwise the feasible magnitude sequences are walked depth-first.
pub fn count_words(
    plan: &DiscretizationPlan,
    instance: &ProblemInstance,
    net_len: usize,
    cap: u64,
) -> Result<u64> {
    let budget = Budget::new(plan, instance);
    let a = net_len as u128;
    let total: u128 = if budget.exact {
        let mut layer: HashMap<u64, u128> = HashMap::from([(0, 1)]);
        for _ in 0..plan.n_steps {
            let mut next: HashMap<u64, u128> = HashMap::with_capacity(layer.len());
            for (&spent, &ways) in &layer {
                for (j, &c) in budget.costs.iter().enumerate() {
                    let s = spent as f64 + c;
                    if s > budget.limit {
                        break;
                    }
                    let mult = if j == 0 { 1 } else { a };
                    let e = next.entry(s as u64).or_insert(0);
                    *e = e.saturating_add(ways.saturating_mul(mult));
                }
            }
            layer = next;
        }
        layer.values().fold(0u128, |acc, v| acc.saturating_add(*v))
    } else {
        let mut total: u128 = 0;
        let mut aborted = false;
        for_each_magnitudes(&budget, plan.n_steps, |j| {
            let nz = j.iter().filter(|&&v| v != 0).count() as u32;
            total = total.saturating_add(a.saturating_pow(nz));
            if total > cap as u128 {
                aborted = true;
            }
            !aborted
        });
        if aborted {
            let found = total.min(u64::MAX as u128) as u64;
            return Err(Error::capacity("control words", cap, found, found));
        }
        total
    };
    if total > cap as u128 {
        let t = total.min(u64::MAX as u128) as u64;
        return Err(Error::capacity("control words", cap, t, t));
    }
    Ok(total as u64)
}

/// Depth-first walk over feasible magnitude sequences in lexicographic order.
/// `visit` returns `false` to stop.
fn for_each_magnitudes(budget: &Budget, n_steps: usize, mut visit: impl FnMut(&[u32]) -> bool) {
    let mut j = vec![0u32; n_steps];
    let mut prefix = vec![0.0f64; n_steps + 1];
    if !visit(&j) {
        return;
    }
    while advance_magnitudes(budget, &mut j, &mut prefix) {
        if !visit(&j) {
            return;
        }
    }
}

/// Next feasible magnitude sequence in lexicographic order. Costs increase
/// with `j`, so an infeasible increment at a position rules out every larger
/// value there and the whole subtree below it.
fn advance_magnitudes(budget: &Budget, j: &mut [u32], prefix: &mut [f64]) -> bool {
    let q = budget.costs.len() - 1;
    for pos in (0..j.len()).rev() {
        let next = j[pos] as usize + 1;
        if next > q {
            continue;
        }
        if prefix[pos] + budget.costs[next] <= budget.limit {
            j[pos] = next as u32;
            prefix[pos + 1] = prefix[pos] + budget.costs[next];
            for k in pos + 1..j.len() {
                j[k] = 0;
                prefix[k + 1] = prefix[k + 1 - 1];
            }
            return true;
        }
    }
    false
}

/// Streaming enumeration of the canonical word set, ordered
/// lexicographically by magnitude sequence, then by direction sequence.
#[derive(Debug, Clone)]
pub struct WordStream {
    budget: Budget,
    net_len: u32,
    magnitudes: Vec<u32>,
    prefix: Vec<f64>,
    directions: Vec<u32>,
    active: Vec<usize>,
    total: u64,
    started: bool,
    done: bool,
}

impl WordStream {
    /// Exact number of words the stream yields.
    pub fn total(&self) -> u64 {
        self.total
    }

    fn advance_directions(&mut self) -> bool {
        for &pos in self.active.iter().rev() {
            self.directions[pos] += 1;
            if self.directions[pos] < self.net_len {
                return true;
            }
            self.directions[pos] = 0;
        }
        false
    }
}

impl Iterator for WordStream {
    type Item = ControlWord;

    fn next(&mut self) -> Option<ControlWord> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
        } else if !self.advance_directions() {
            if !advance_magnitudes(&self.budget, &mut self.magnitudes, &mut self.prefix) {
                self.done = true;
                return None;
            }
            self.directions.iter_mut().for_each(|l| *l = 0);
            self.active = (0..self.magnitudes.len())
                .filter(|&i| self.magnitudes[i] != 0)
                .collect();
        }
        Some(ControlWord {
            magnitudes: self.magnitudes.clone(),
            directions: self.directions.clone(),
        })
    }
}

/// Start the word stream after checking the total against `cap`.
pub fn enumerate_words(
    plan: &DiscretizationPlan,
    instance: &ProblemInstance,
    net: &SigmaNet,
    cap: u64,
) -> Result<WordStream> {
    let total = count_words(plan, instance, net.len(), cap)?;
    Ok(WordStream {
        budget: Budget::new(plan, instance),
        net_len: net.len() as u32,
        magnitudes: vec![0; plan.n_steps],
        prefix: vec![0.0; plan.n_steps + 1],
        directions: vec![0; plan.n_steps],
        active: Vec::new(),
        total,
        started: false,
        done: false,
    })
}

/// A random feasible canonical word: each interval draws a magnitude
/// uniformly among those the remaining budget allows.
pub fn random_word<R: Rng + ?Sized>(
    plan: &DiscretizationPlan,
    instance: &ProblemInstance,
    net_len: usize,
    rng: &mut R,
) -> ControlWord {
    let budget = Budget::new(plan, instance);
    let mut spent = 0.0;
    let mut word = ControlWord::zero(plan.n_steps);
    for i in 0..plan.n_steps {
        let max_j = (0..=plan.q)
            .rev()
            .find(|&j| spent + budget.costs[j] <= budget.limit)
            .unwrap_or(0);
        let j = rng.gen_range(0..=max_j);
        spent += budget.costs[j];
        word.magnitudes[i] = j as u32;
        if j != 0 {
            word.directions[i] = rng.gen_range(0..net_len) as u32;
        }
    }
    word
}

/// Piecewise-constant control on a uniform grid over `[t0, theta]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseControl {
    pub t0: f64,
    pub theta: f64,
    pub values: Vec<Vec<f64>>,
}

impl PiecewiseControl {
    pub fn dt(&self) -> f64 {
        (self.theta - self.t0) / self.values.len() as f64
    }

    /// Value at `t`; the last interval is closed at `theta`.
    pub fn value_at(&self, t: f64) -> &[f64] {
        let n = self.values.len();
        let i = (((t - self.t0) / self.dt()).floor().max(0.0) as usize).min(n - 1);
        &self.values[i]
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| norm(v).powf(p)).sum();
        (self.dt() * s).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }
}

/// Replace `u` by its mean on each grid interval, using a midpoint rule
/// with `samples` points per interval (exact for affine `u`).
pub fn average_control(
    u: &dyn Fn(f64) -> Vec<f64>,
    plan: &DiscretizationPlan,
    samples: usize,
) -> Result<PiecewiseControl> {
    if plan.n_steps == 0 {
        return Err(Error::input("empty time grid"));
    }
    if samples == 0 {
        return Err(Error::input("samples per interval must be at least 1"));
    }
    let mut values = Vec::with_capacity(plan.n_steps);
    for i in 0..plan.n_steps {
        let (a, b) = (plan.time(i), plan.time(i + 1));
        let h = (b - a) / samples as f64;
        let mut acc: Vec<f64> = Vec::new();
        for k in 0..samples {
            let v = u(a + (k as f64 + 0.5) * h);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            acc.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
        }
        values.push(acc.into_iter().map(|s| s / samples as f64).collect());
    }
    Ok(PiecewiseControl {
        t0: plan.t0,
        theta: plan.theta,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_sigma_net, DEFAULT_NET_CAP};
    use std::collections::HashSet;

    fn setup(
        n_steps: usize,
        beta: f64,
        q: usize,
        r: f64,
    ) -> (ProblemInstance, DiscretizationPlan, SigmaNet) {
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, r).unwrap();
        let plan = DiscretizationPlan::direct(&inst, beta, n_steps, q, 1.0).unwrap();
        let net = build_sigma_net(1, 1.0, DEFAULT_NET_CAP).unwrap();
        (inst, plan, net)
    }

    fn word(j: &[u32], l: &[u32]) -> ControlWord {
        ControlWord {
            magnitudes: j.to_vec(),
            directions: l.to_vec(),
        }
    }

    #[test]
    fn boundary_words_survive_rounding() {
        // r^p / (delta^p dt) is exactly 1000 but evaluates to 999.9999999999998
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 1.0, 10, 10, 1.0).unwrap();
        assert_eq!(Budget::new(&plan, &inst).limit, 1000.0);
        let mut w = ControlWord::zero(10);
        w.magnitudes = vec![10; 10];
        assert!(feasible(&w, &plan, &inst));
        assert!((word_lp_norm(&w, &plan, &inst) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_step_three_words() {
        let (inst, plan, net) = setup(1, 1.0, 1, 1.0);
        let words: Vec<_> = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP)
            .unwrap()
            .collect();
        assert_eq!(
            words,
            vec![word(&[0], &[0]), word(&[1], &[0]), word(&[1], &[1])]
        );
        let values: Vec<f64> = words.iter().map(|w| w.value(0, &plan, &net)[0]).collect();
        assert_eq!(values, vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn two_step_nine_words() {
        let (inst, plan, net) = setup(2, 2.0, 2, 1.0);
        let stream = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP).unwrap();
        assert_eq!(stream.total(), 9);
        let words: Vec<_> = stream.collect();
        assert_eq!(words.len(), 9);
        let mags: HashSet<Vec<u32>> = words.iter().map(|w| w.magnitudes.clone()).collect();
        let expect: HashSet<Vec<u32>> = [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
            .into_iter()
            .collect();
        assert_eq!(mags, expect);
        let mut sorted = words.clone();
        sorted.sort_by(|a, b| (&a.magnitudes, &a.directions).cmp(&(&b.magnitudes, &b.directions)));
        assert_eq!(sorted, words, "lexicographic order");
    }

    #[test]
    fn zero_budget_single_word() {
        let (inst, plan, net) = setup(2, 1.0, 3, 0.0);
        let words: Vec<_> = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP)
            .unwrap()
            .collect();
        assert_eq!(words, vec![ControlWord::zero(2)]);
    }

    #[test]
    fn feasibility_examples() {
        let (inst, plan, _) = setup(1, 1.0, 1, 1.0);
        assert!(feasible(&ControlWord::zero(1), &plan, &inst));
        assert!(
            feasible(&word(&[1], &[0]), &plan, &inst),
            "equality is admitted"
        );
        let (inst, plan, _) = setup(2, 2.0, 2, 1.0);
        assert!(!feasible(&word(&[2, 0], &[0, 0]), &plan, &inst));
        assert!(feasible(&word(&[1, 1], &[1, 0]), &plan, &inst));
        assert!(!feasible(&word(&[1], &[0]), &plan, &inst), "wrong length");
        assert!(
            !feasible(&word(&[3, 0], &[0, 0]), &plan, &inst),
            "level out of range"
        );
    }

    #[test]
    fn lp_norm_examples() {
        let (inst, plan, _) = setup(1, 1.0, 1, 1.0);
        assert_eq!(word_lp_norm(&ControlWord::zero(1), &plan, &inst), 0.0);
        assert_eq!(word_lp_norm(&word(&[1], &[0]), &plan, &inst), 1.0);
        let (inst, plan, _) = setup(2, 2.0, 2, 1.0);
        assert!((word_lp_norm(&word(&[1, 1], &[0, 0]), &plan, &inst) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_error_reports_count() {
        let (inst, plan, net) = setup(6, 1.0, 4, 1.0);
        let total = count_words(&plan, &inst, net.len(), DEFAULT_WORD_CAP).unwrap();
        match enumerate_words(&plan, &inst, &net, total - 1) {
            Err(Error::Capacity(c)) => assert_eq!(c.required, total),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn non_integral_p_counts_match_stream() {
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 1.5, 0.9).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 1.3, 4, 3, 1.0).unwrap();
        let net = build_sigma_net(2, 1.0, DEFAULT_NET_CAP).unwrap();
        let stream = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP).unwrap();
        assert!(!Budget::new(&plan, &inst).exact);
        let total = stream.total();
        let words: Vec<_> = stream.collect();
        assert_eq!(words.len() as u64, total);
        assert!(words
            .iter()
            .all(|w| feasible(w, &plan, &inst) && w.is_canonical()));
        assert!(matches!(
            count_words(&plan, &inst, net.len(), 5),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn stream_matches_brute_force() {
        // all ((q+1) a)^N raw combinations, canonicalized and deduplicated
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0, 0.0], 2.0, 1.0).unwrap();
        let net = build_sigma_net(2, 1.2, DEFAULT_NET_CAP).unwrap();
        for (n, beta, q) in [(3, 2.0, 2), (2, 1.0, 4), (4, 4.0, 4)] {
            let plan = DiscretizationPlan::direct(&inst, beta, n, q, 1.2).unwrap();
            let a = net.len() as u32;
            let mut expect = HashSet::new();
            let radix = (q as u32 + 1) * a;
            for code in 0..radix.pow(n as u32) {
                let mut c = code;
                let mut w = ControlWord::zero(n);
                for i in 0..n {
                    let digit = c % radix;
                    c /= radix;
                    w.magnitudes[i] = digit / a;
                    w.directions[i] = if w.magnitudes[i] == 0 { 0 } else { digit % a };
                }
                let dt = plan.dt();
                let cost: f64 = w
                    .magnitudes
                    .iter()
                    .map(|&j| plan.magnitude(j as usize).powi(2))
                    .sum::<f64>()
                    * dt;
                if cost <= 1.0 {
                    expect.insert(w);
                }
            }
            let got: Vec<_> = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP)
                .unwrap()
                .collect();
            let set: HashSet<_> = got.iter().cloned().collect();
            assert_eq!(set.len(), got.len(), "no duplicates");
            assert_eq!(set, expect, "N={n} q={q}");
        }
    }

    #[test]
    fn distinct_words_define_distinct_controls() {
        let (inst, plan, net) = setup(3, 2.0, 2, 1.0);
        let words: Vec<_> = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP)
            .unwrap()
            .collect();
        let controls: Vec<_> = words
            .iter()
            .map(|w| w.to_control(&plan, &net).values)
            .collect();
        for (i, a) in controls.iter().enumerate() {
            for b in &controls[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn halving_delta_nests_control_sets() {
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let net = build_sigma_net(1, 1.0, DEFAULT_NET_CAP).unwrap();
        for n in 1..=3 {
            let coarse = DiscretizationPlan::direct(&inst, 2.0, n, 2, 1.0).unwrap();
            let fine = DiscretizationPlan::direct(&inst, 2.0, n, 4, 1.0).unwrap();
            let values = |plan: &DiscretizationPlan| -> HashSet<Vec<u64>> {
                enumerate_words(plan, &inst, &net, DEFAULT_WORD_CAP)
                    .unwrap()
                    .map(|w| {
                        (0..n)
                            .map(|i| w.value(i, plan, &net)[0].to_bits())
                            .collect()
                    })
                    .collect()
            };
            let (c, f) = (values(&coarse), values(&fine));
            assert!(c.is_subset(&f), "N={n}");
            assert!(f.len() > c.len());
        }
    }

    #[test]
    fn averaging_examples() {
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 1.0, 2, 1, 1.0).unwrap();
        let c = average_control(&|_| vec![0.3, -0.2], &plan, 16).unwrap();
        for v in &c.values {
            assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] + 0.2).abs() < 1e-15);
        }
        let c = average_control(&|t| vec![t], &plan, 16).unwrap();
        assert!((c.values[0][0] - 0.25).abs() < 1e-15);
        assert!((c.values[1][0] - 0.75).abs() < 1e-15);
        // sup |u - u_*| for u(t) = t: reached at interval ends
        let sup = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .map(|t| (t - c.value_at(t)[0]).abs())
            .fold(0.0, f64::max);
        assert!((sup - 0.25).abs() < 1e-12);
        assert!(sup <= 1.0 * plan.dt());
        assert!(average_control(&|t| vec![t], &plan, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn random_words_are_feasible(seed in any::<u64>(), n in 1usize..8, q in 1usize..6) {
                let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
                let plan = DiscretizationPlan::direct(&inst, 2.0, n, q, 1.0).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let w = random_word(&plan, &inst, 3, &mut rng);
                prop_assert!(feasible(&w, &plan, &inst));
                prop_assert!(w.is_canonical());
                prop_assert!(word_lp_norm(&w, &plan, &inst) <= 1.0 + 1e-12);
            }

            #[test]
            fn averaging_never_increases_lp_norm(
                values in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 12),
                p in 1.1f64..4.0,
            ) {
                // 12 fine steps averaged onto 3 coarse intervals
                let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], p, 1.0).unwrap();
                let coarse = DiscretizationPlan::direct(&inst, 1.0, 3, 1, 1.0).unwrap();
                let fine = PiecewiseControl { t0: 0.0, theta: 1.0, values };
                let avg = average_control(&|t| fine.value_at(t).to_vec(), &coarse, 4).unwrap();
                prop_assert!(avg.lp_norm(p) <= fine.lp_norm(p) * (1.0 + 1e-12));
                prop_assert!(avg.sup_norm() <= fine.sup_norm() + 1e-12);
            }
        }
    }
}
