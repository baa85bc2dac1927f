//! Bayesian machinery shared by the controller: learning the road dynamics,
//! forecasting obstacles and driver awareness, decoding driver state paths,
//! and the scalar local-level model used for ODD monitoring.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::driver::{BlinkObservation, DriverProfile, DriverState};
use crate::environment::{ObstacleKind, PerceptionWindow, TransitionTable};
use crate::error::{Error, Result};
use crate::rng::sample_categorical;

/// Dirichlet pseudo-counts over the rows of the obstacle transition table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletCounts {
    alpha: [[f64; 3]; 3],
}

impl DirichletCounts {
    pub fn uniform(prior: f64) -> Result<Self> {
        if !(prior > 0.0 && prior.is_finite()) {
            return Err(Error::InvalidArgument(format!("Dirichlet prior {prior} must be > 0")));
        }
        Ok(Self { alpha: [[prior; 3]; 3] })
    }

    pub fn from_alpha(alpha: [[f64; 3]; 3]) -> Result<Self> {
        if alpha.iter().flatten().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidArgument("pseudo-counts must be positive".into()));
        }
        Ok(Self { alpha })
    }

    pub fn update(&mut self, from: ObstacleKind, to: ObstacleKind) {
        self.alpha[from.index()][to.index()] += 1.0;
    }

    pub fn alpha(&self, from: ObstacleKind) -> &[f64; 3] {
        &self.alpha[from.index()]
    }

    /// Posterior mean of the transition row out of `from`.
    pub fn point_estimate(&self, from: ObstacleKind) -> [f64; 3] {
        let row = &self.alpha[from.index()];
        let total: f64 = row.iter().sum();
        row.map(|a| a / total)
    }

    pub fn point_estimate_table(&self) -> TransitionTable {
        let rows = ObstacleKind::ALL.map(|k| self.point_estimate(k));
        // Means of positive counts are stochastic up to rounding.
        TransitionTable::new(rows).expect("posterior means are row-stochastic")
    }
}

/// Probability that the driver is distracted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriverBelief {
    p_distracted: f64,
}

impl DriverBelief {
    pub fn new(p_distracted: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_distracted) {
            return Err(Error::InvalidArgument(format!(
                "p(distracted) = {p_distracted} outside [0, 1]"
            )));
        }
        Ok(Self { p_distracted })
    }

    pub fn certain(state: DriverState) -> Self {
        Self {
            p_distracted: match state {
                DriverState::Aware => 0.0,
                DriverState::Distracted => 1.0,
            },
        }
    }

    pub fn p_distracted(self) -> f64 {
        self.p_distracted
    }

    pub fn p_aware(self) -> f64 {
        1.0 - self.p_distracted
    }

    pub fn probability(self, state: DriverState) -> f64 {
        match state {
            DriverState::Aware => self.p_aware(),
            DriverState::Distracted => self.p_distracted,
        }
    }
}

/// Per-offset obstacle distributions for offsets `1..=k`, plus the most
/// likely joint configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleForecast {
    pub probs: Vec<[f64; 3]>,
    pub modal: Vec<ObstacleKind>,
}

impl ObstacleForecast {
    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    /// Probability of `kind` at a 1-based offset.
    pub fn prob(&self, offset: usize, kind: ObstacleKind) -> f64 {
        self.probs[offset - 1][kind.index()]
    }
}

/// The road ahead as a Markov chain conditioned on what is perceived.
///
/// Offset 1 must be fully known. Each later offset is drawn from the
/// estimated transition row of its predecessor, restricted to the kinds the
/// perception window still allows and renormalized. A kind known with
/// certainty is a point mass.
#[derive(Clone, Debug)]
pub struct ObstacleChain {
    first: ObstacleKind,
    /// `steps[i][prev]` is the distribution at offset `i + 2`.
    steps: Vec<[[f64; 3]; 3]>,
}

impl ObstacleChain {
    pub fn new(table: &TransitionTable, window: &PerceptionWindow) -> Result<Self> {
        let Some(first_view) = window.views.first() else {
            return Err(Error::InvalidState("empty perception window".into()));
        };
        let first = first_view.as_known().ok_or_else(|| {
            Error::InvalidState("offset 1 must be fully perceived to forecast".into())
        })?;
        let steps = window.views[1..]
            .iter()
            .map(|view| {
                ObstacleKind::ALL.map(|prev| {
                    let row = table.row(prev);
                    let mut dist = [0.0; 3];
                    for k in view.candidates() {
                        dist[k.index()] = row[k.index()];
                    }
                    let mass: f64 = dist.iter().sum();
                    if mass > 0.0 {
                        dist.map(|p| p / mass)
                    } else {
                        // Perceived content the estimates call impossible.
                        let n = view.candidates().count() as f64;
                        let mut uniform = [0.0; 3];
                        for k in view.candidates() {
                            uniform[k.index()] = 1.0 / n;
                        }
                        uniform
                    }
                })
            })
            .collect();
        Ok(Self { first, steps })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn marginals(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.horizon());
        let mut current = [0.0; 3];
        current[self.first.index()] = 1.0;
        out.push(current);
        for step in &self.steps {
            let mut next = [0.0; 3];
            for prev in ObstacleKind::ALL {
                let w = current[prev.index()];
                if w == 0.0 {
                    continue;
                }
                for j in 0..3 {
                    next[j] += w * step[prev.index()][j];
                }
            }
            out.push(next);
            current = next;
        }
        out
    }

    /// Most likely joint configuration (max-product). Ties favour clean,
    /// then puddle.
    pub fn most_likely(&self) -> Vec<ObstacleKind> {
        const PREFERENCE: [ObstacleKind; 3] = [ObstacleKind::Clean, ObstacleKind::Puddle, ObstacleKind::Rock];
        let mut score = [f64::NEG_INFINITY; 3];
        score[self.first.index()] = 0.0;
        let mut back: Vec<[usize; 3]> = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            let mut next = [f64::NEG_INFINITY; 3];
            let mut ptr = [0usize; 3];
            for j in PREFERENCE {
                for prev in PREFERENCE {
                    let s = score[prev.index()] + step[prev.index()][j.index()].ln();
                    if s > next[j.index()] {
                        next[j.index()] = s;
                        ptr[j.index()] = prev.index();
                    }
                }
            }
            back.push(ptr);
            score = next;
        }
        let mut last = PREFERENCE[0];
        for k in PREFERENCE {
            if score[k.index()] > score[last.index()] {
                last = k;
            }
        }
        let mut path = vec![last.index()];
        for ptr in back.iter().rev() {
            let prev = ptr[*path.last().expect("non-empty")];
            path.push(prev);
        }
        path.reverse();
        path.into_iter().map(|i| ObstacleKind::ALL[i]).collect()
    }

    pub fn forecast(&self) -> ObstacleForecast {
        ObstacleForecast {
            probs: self.marginals(),
            modal: self.most_likely(),
        }
    }

    /// Upper bound on the number of configurations with positive probability.
    pub fn lattice_size(&self) -> usize {
        self.steps
            .iter()
            .map(|step| (0..3).filter(|j| step.iter().any(|row| row[*j] > 0.0)).count().max(1))
            .product()
    }

    /// Every configuration with positive probability, with its probability.
    pub fn configurations(&self) -> Vec<(Vec<ObstacleKind>, f64)> {
        let mut out = Vec::new();
        let mut path = vec![self.first];
        self.expand(&mut path, 1.0, &mut out);
        out
    }

    fn expand(&self, path: &mut Vec<ObstacleKind>, p: f64, out: &mut Vec<(Vec<ObstacleKind>, f64)>) {
        let depth = path.len() - 1;
        if depth == self.steps.len() {
            out.push((path.clone(), p));
            return;
        }
        let prev = *path.last().expect("non-empty");
        for next in ObstacleKind::ALL {
            let q = self.steps[depth][prev.index()][next.index()];
            if q > 0.0 {
                path.push(next);
                self.expand(path, p * q, out);
                path.pop();
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ObstacleKind> {
        let mut path = Vec::with_capacity(self.horizon());
        path.push(self.first);
        for step in &self.steps {
            let prev = *path.last().expect("non-empty");
            path.push(ObstacleKind::ALL[sample_categorical(&step[prev.index()], rng)]);
        }
        path
    }
}

/// Forecast of offsets `1..=k` from learned counts and what is perceived.
pub fn forecast_obstacles(counts: &DirichletCounts, window: &PerceptionWindow) -> Result<ObstacleForecast> {
    Ok(ObstacleChain::new(&counts.point_estimate_table(), window)?.forecast())
}

/// One-step awareness prediction given the obstacle the driver is facing.
pub fn predict_driver(belief: DriverBelief, obstacle: ObstacleKind, profile: &DriverProfile) -> DriverBelief {
    let p = belief.p_distracted();
    let next = p * profile.p_distracted_next(DriverState::Distracted, obstacle)
        + (1.0 - p) * profile.p_distracted_next(DriverState::Aware, obstacle);
    DriverBelief { p_distracted: next.clamp(0.0, 1.0) }
}

/// Predictive distribution of the blink count under a predicted belief.
pub fn blink_predictive(predicted: DriverBelief, profile: &DriverProfile) -> [f64; 3] {
    let mut out = [0.0; 3];
    for state in DriverState::ALL {
        let w = predicted.probability(state);
        for (o, e) in out.iter_mut().zip(profile.blinks.get(state)) {
            *o += w * e;
        }
    }
    out
}

/// Bayes update of a predicted belief with an observed blink count.
pub fn update_driver(
    predicted: DriverBelief,
    blinks: BlinkObservation,
    profile: &DriverProfile,
) -> Result<DriverBelief> {
    let d = predicted.p_distracted() * profile.blink_likelihood(DriverState::Distracted, blinks);
    let a = predicted.p_aware() * profile.blink_likelihood(DriverState::Aware, blinks);
    let total = d + a;
    if !(total > 0.0) {
        return Err(Error::NumericalDegeneracy(format!(
            "observation of {} blinks has zero likelihood under the predicted belief",
            blinks.value()
        )));
    }
    Ok(DriverBelief { p_distracted: d / total })
}

/// Predict through the awareness dynamics, then condition on the blinks.
pub fn filter_driver(
    belief: DriverBelief,
    blinks: BlinkObservation,
    next_obstacle: ObstacleKind,
    profile: &DriverProfile,
) -> Result<DriverBelief> {
    update_driver(predict_driver(belief, next_obstacle, profile), blinks, profile)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriverForecast {
    pub p_distracted: Vec<f64>,
}

impl DriverForecast {
    pub fn max(&self) -> f64 {
        self.p_distracted.iter().copied().fold(0.0, f64::max)
    }
}

/// Awareness forecast for offsets `1..=k`, averaging the transition over the
/// obstacle forecast at each offset. No future blinks are assumed.
pub fn forecast_driver(
    belief: DriverBelief,
    obstacles: &ObstacleForecast,
    profile: &DriverProfile,
) -> DriverForecast {
    let mut p = belief.p_distracted();
    let mut out = Vec::with_capacity(obstacles.horizon());
    for dist in &obstacles.probs {
        let mut next = 0.0;
        for kind in ObstacleKind::ALL {
            let w = dist[kind.index()];
            next += w
                * (p * profile.p_distracted_next(DriverState::Distracted, kind)
                    + (1.0 - p) * profile.p_distracted_next(DriverState::Aware, kind));
        }
        p = next.clamp(0.0, 1.0);
        out.push(p);
    }
    DriverForecast { p_distracted: out }
}

/// Most likely driver state sequence.
///
/// `initial` is the distribution of the first state. The transition into
/// step `t >= 1` uses `obstacles[t]`; `obstacles[0]` is not used. Computed
/// in log space; ties resolve to `Aware`.
pub fn viterbi_path(
    blinks: &[BlinkObservation],
    obstacles: &[ObstacleKind],
    initial: DriverBelief,
    profile: &DriverProfile,
) -> Result<Vec<DriverState>> {
    if blinks.is_empty() {
        return Err(Error::InvalidArgument("Viterbi needs at least one observation".into()));
    }
    if blinks.len() != obstacles.len() {
        return Err(Error::InvalidArgument(format!(
            "{} blink observations but {} obstacles",
            blinks.len(),
            obstacles.len()
        )));
    }
    let ln_emit = |s: DriverState, x: BlinkObservation| profile.blink_likelihood(s, x).ln();
    let mut score = DriverState::ALL.map(|s| initial.probability(s).ln() + ln_emit(s, blinks[0]));
    let mut back: Vec<[DriverState; 2]> = Vec::with_capacity(blinks.len() - 1);
    for t in 1..blinks.len() {
        let mut next = [f64::NEG_INFINITY; 2];
        let mut ptr = [DriverState::Aware; 2];
        for s in DriverState::ALL {
            for prev in DriverState::ALL {
                let v = score[prev.index()] + profile.transition_row(prev, obstacles[t])[s.index()].ln();
                if v > next[s.index()] {
                    next[s.index()] = v;
                    ptr[s.index()] = prev;
                }
            }
            next[s.index()] += ln_emit(s, blinks[t]);
        }
        back.push(ptr);
        score = next;
    }
    let mut state = if score[1] > score[0] { DriverState::Distracted } else { DriverState::Aware };
    let mut path = vec![state];
    for ptr in back.iter().rev() {
        state = ptr[state.index()];
        path.push(state);
    }
    path.reverse();
    Ok(path)
}

pub(crate) fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Scalar random walk plus noise: `g_t = f_t + v_t`, `f_t = f_{t-1} + w_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalLevelFilter {
    /// Posterior mean of the level.
    pub m: f64,
    /// Posterior variance of the level.
    pub c: f64,
    /// Observation noise variance.
    pub v: f64,
    /// Level noise variance.
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianForecast {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianForecast {
    pub fn cdf(&self, x: f64) -> f64 {
        if self.variance <= 0.0 {
            return if x >= self.mean { 1.0 } else { 0.0 };
        }
        standard_normal_cdf((x - self.mean) / self.variance.sqrt())
    }

    /// Pr(G outside [lo, hi]).
    pub fn exceedance(&self, lo: f64, hi: f64) -> f64 {
        if self.variance <= 0.0 {
            return if (lo..=hi).contains(&self.mean) { 0.0 } else { 1.0 };
        }
        let below = self.cdf(lo);
        let above = 1.0 - self.cdf(hi);
        (below + above).clamp(0.0, 1.0)
    }

    /// Pr(|G - mean| >= |g - mean|).
    pub fn surprise(&self, g: f64) -> f64 {
        let d = (g - self.mean).abs();
        if self.variance <= 0.0 {
            return if d == 0.0 { 1.0 } else { 0.0 };
        }
        2.0 * standard_normal_cdf(-d / self.variance.sqrt())
    }
}

impl LocalLevelFilter {
    pub fn new(m: f64, c: f64, v: f64, w: f64) -> Result<Self> {
        if [c, v, w].iter().any(|x| !(*x >= 0.0)) || !m.is_finite() {
            return Err(Error::InvalidArgument("variances must be >= 0 and the mean finite".into()));
        }
        Ok(Self { m, c, v, w })
    }

    /// One-step Kalman update with observation `g`.
    pub fn update(&self, g: f64) -> Self {
        let r = self.c + self.w;
        let q = r + self.v;
        if q <= 0.0 {
            // Level already pinned and observations noiseless.
            return Self { c: 0.0, ..*self };
        }
        let gain = r / q;
        Self {
            m: self.m + gain * (g - self.m),
            c: r * self.v / q,
            ..*self
        }
    }

    /// Predictive distribution of the observation `k` steps ahead.
    pub fn forecast(&self, k: usize) -> GaussianForecast {
        GaussianForecast {
            mean: self.m,
            variance: self.c + k as f64 * self.w + self.v,
        }
    }
}

/// Probability, under `probs`, of an outcome at most as likely as `realized`.
/// Small values flag surprising observations; the most likely outcome scores 1.
pub fn discrete_surprise(probs: &[f64], realized: usize) -> f64 {
    let p = probs[realized];
    probs
        .iter()
        .filter(|q| **q <= p + 1e-15)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{CellView, PerObstacle};
    use approx::assert_abs_diff_eq;

    fn window(views: &[CellView]) -> PerceptionWindow {
        PerceptionWindow { views: views.to_vec() }
    }

    const NOT_ROCK: CellView = CellView::UNKNOWN;

    fn not_rock() -> CellView {
        NOT_ROCK.exclude(ObstacleKind::Rock)
    }

    #[test]
    fn dirichlet_updates() {
        let mut c = DirichletCounts::uniform(1.0).unwrap();
        assert_eq!(c.point_estimate(ObstacleKind::Clean), [1.0 / 3.0; 3]);
        c.update(ObstacleKind::Clean, ObstacleKind::Puddle);
        assert_eq!(c.alpha(ObstacleKind::Clean), &[1.0, 2.0, 1.0]);
        assert_eq!(c.point_estimate(ObstacleKind::Clean), [0.25, 0.5, 0.25]);

        let c = DirichletCounts::from_alpha([[100.0, 1.0, 1.0], [1.0; 3], [1.0; 3]]).unwrap();
        let p = c.point_estimate(ObstacleKind::Rock);
        assert_abs_diff_eq!(p[0], 100.0 / 102.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0 / 102.0, epsilon = 1e-15);
        assert!(DirichletCounts::uniform(0.0).is_err());
    }

    #[test]
    fn dirichlet_updates_commute() {
        let moves = [
            (ObstacleKind::Clean, ObstacleKind::Puddle),
            (ObstacleKind::Puddle, ObstacleKind::Clean),
            (ObstacleKind::Clean, ObstacleKind::Puddle),
            (ObstacleKind::Rock, ObstacleKind::Clean),
        ];
        let mut a = DirichletCounts::uniform(1.0).unwrap();
        let mut b = a.clone();
        moves.iter().for_each(|(f, t)| a.update(*f, *t));
        moves.iter().rev().for_each(|(f, t)| b.update(*f, *t));
        assert_eq!(a, b);
    }

    #[test]
    fn forecast_after_known_puddle() {
        let table = TransitionTable::baseline();
        let w = window(&[CellView::known(ObstacleKind::Puddle), not_rock(), not_rock(), CellView::UNKNOWN, CellView::UNKNOWN]);
        let f = ObstacleChain::new(&table, &w).unwrap().forecast();
        assert_abs_diff_eq!(f.prob(2, ObstacleKind::Puddle), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(f.prob(2, ObstacleKind::Clean), 0.6, epsilon = 1e-12);
        // Offset 3: puddle via puddle (0.4 * 0.4) or via clean (0.6 * 0.05 / 0.95).
        let expected = 0.16 + 0.6 * 0.05 / 0.95;
        assert_abs_diff_eq!(f.prob(3, ObstacleKind::Puddle), expected, epsilon = 1e-12);
        for p in &f.probs {
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn forecast_after_known_rock() {
        let table = TransitionTable::baseline();
        let w = window(&[CellView::known(ObstacleKind::Clean), not_rock(), CellView::known(ObstacleKind::Rock), CellView::UNKNOWN, CellView::UNKNOWN]);
        let f = ObstacleChain::new(&table, &w).unwrap().forecast();
        assert_eq!(f.probs[2], [1.0, 0.0, 0.0]);
        assert_eq!(f.probs[3], *table.row(ObstacleKind::Rock));
        assert_eq!(f.modal[2], ObstacleKind::Rock);
    }

    #[test]
    fn identity_estimates_keep_offset_one_content() {
        let table = TransitionTable::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let w = window(&[CellView::known(ObstacleKind::Puddle), CellView::UNKNOWN, CellView::UNKNOWN, CellView::UNKNOWN]);
        let f = ObstacleChain::new(&table, &w).unwrap().forecast();
        for p in &f.probs {
            assert_eq!(*p, [0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn forecast_requires_offset_one() {
        let table = TransitionTable::baseline();
        let w = window(&[not_rock(), CellView::UNKNOWN]);
        assert!(matches!(ObstacleChain::new(&table, &w), Err(Error::InvalidState(_))));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn unconstrained_forecast_is_a_matrix_power() {
        let table = TransitionTable::baseline();
        let w = window(&[CellView::known(ObstacleKind::Clean), CellView::UNKNOWN, CellView::UNKNOWN, CellView::UNKNOWN, CellView::UNKNOWN]);
        let f = ObstacleChain::new(&table, &w).unwrap().forecast();
        let mut v = [0.0, 0.0, 1.0];
        for offset in 1..=5 {
            for j in 0..3 {
                assert_abs_diff_eq!(f.probs[offset - 1][j], v[j], epsilon = 1e-14);
            }
            let mut next = [0.0; 3];
            for i in 0..3 {
                for j in 0..3 {
                    next[j] += v[i] * table.rows()[i][j];
                }
            }
            v = next;
        }
    }

    #[test]
    fn lattice_probabilities_sum_to_one_and_match_marginals() {
        let table = TransitionTable::baseline();
        let w = window(&[CellView::known(ObstacleKind::Puddle), not_rock(), not_rock(), CellView::UNKNOWN, CellView::UNKNOWN]);
        let chain = ObstacleChain::new(&table, &w).unwrap();
        let configs = chain.configurations();
        assert!(configs.len() <= chain.lattice_size());
        let total: f64 = configs.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let marg = chain.marginals();
        for offset in 0..5 {
            for k in ObstacleKind::ALL {
                let m: f64 = configs.iter().filter(|(c, _)| c[offset] == k).map(|(_, p)| p).sum();
                assert_abs_diff_eq!(m, marg[offset][k.index()], epsilon = 1e-12);
            }
        }
        // The modal configuration is the most probable lattice point.
        let modal = chain.most_likely();
        let best = configs.iter().map(|(_, p)| *p).fold(0.0, f64::max);
        let modal_p = configs.iter().find(|(c, _)| *c == modal).unwrap().1;
        assert_abs_diff_eq!(modal_p, best, epsilon = 1e-15);
    }

    #[test]
    fn driver_filter_hand_computed() {
        let p = DriverProfile::default();
        let b = filter_driver(DriverBelief::certain(DriverState::Aware), BlinkObservation::new(3).unwrap(), ObstacleKind::Clean, &p).unwrap();
        let expected = 0.15 * 0.7 / (0.15 * 0.7 + 0.85 * 0.1);
        assert_abs_diff_eq!(b.p_distracted(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(b.p_distracted(), 0.5526315789, epsilon = 1e-9);

        let pred = predict_driver(DriverBelief::certain(DriverState::Distracted), ObstacleKind::Rock, &p);
        assert_abs_diff_eq!(pred.p_distracted(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn uninformative_blinks_leave_the_prediction() {
        let mut p = DriverProfile::default();
        p.blinks.aware = [0.2, 0.3, 0.5];
        p.blinks.distracted = [0.2, 0.3, 0.5];
        let b0 = DriverBelief::new(0.3).unwrap();
        let pred = predict_driver(b0, ObstacleKind::Puddle, &p);
        let post = filter_driver(b0, BlinkObservation::new(2).unwrap(), ObstacleKind::Puddle, &p).unwrap();
        assert_abs_diff_eq!(pred.p_distracted(), post.p_distracted(), epsilon = 1e-15);
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let mut p = DriverProfile::default();
        p.blinks.aware = [1.0, 0.0, 0.0];
        p.blinks.distracted = [1.0, 0.0, 0.0];
        let err = filter_driver(DriverBelief::new(0.5).unwrap(), BlinkObservation::new(3).unwrap(), ObstacleKind::Clean, &p);
        assert!(matches!(err, Err(Error::NumericalDegeneracy(_))));
    }

    fn one_hot(kind: ObstacleKind) -> [f64; 3] {
        let mut v = [0.0; 3];
        v[kind.index()] = 1.0;
        v
    }

    #[test]
    fn driver_forecasts() {
        let p = DriverProfile::default();
        let f = ObstacleForecast { probs: vec![one_hot(ObstacleKind::Clean)], modal: vec![ObstacleKind::Clean] };
        let d = forecast_driver(DriverBelief::certain(DriverState::Aware), &f, &p);
        assert_abs_diff_eq!(d.p_distracted[0], 0.15, epsilon = 1e-15);

        let f = ObstacleForecast { probs: vec![[0.0, 0.5, 0.5]], modal: vec![ObstacleKind::Clean] };
        let d = forecast_driver(DriverBelief::certain(DriverState::Aware), &f, &p);
        assert_abs_diff_eq!(d.p_distracted[0], 0.08, epsilon = 1e-15);

        let mut frozen = p.clone();
        let stay = PerObstacle { rock: [1.0, 0.0], puddle: [1.0, 0.0], clean: [1.0, 0.0] };
        let stay_d = PerObstacle { rock: [0.0, 1.0], puddle: [0.0, 1.0], clean: [0.0, 1.0] };
        frozen.awareness.aware = stay;
        frozen.awareness.distracted = stay_d;
        let f = ObstacleForecast { probs: vec![[0.2, 0.3, 0.5]; 5], modal: vec![ObstacleKind::Clean; 5] };
        let d = forecast_driver(DriverBelief::new(0.37).unwrap(), &f, &frozen);
        assert!(d.p_distracted.iter().all(|x| (*x - 0.37).abs() < 1e-15));
    }

    #[test]
    fn viterbi_single_step_and_errors() {
        let p = DriverProfile::default();
        let x = [BlinkObservation::new(3).unwrap()];
        let path = viterbi_path(&x, &[ObstacleKind::Clean], DriverBelief::new(0.5).unwrap(), &p).unwrap();
        assert_eq!(path, vec![DriverState::Distracted]);
        // 0.9 * 0.1 vs 0.1 * 0.7: aware wins.
        let path = viterbi_path(&x, &[ObstacleKind::Clean], DriverBelief::new(0.1).unwrap(), &p).unwrap();
        assert_eq!(path, vec![DriverState::Aware]);
        assert!(viterbi_path(&[], &[], DriverBelief::new(0.1).unwrap(), &p).is_err());
        assert!(viterbi_path(&x, &[], DriverBelief::new(0.1).unwrap(), &p).is_err());
    }

    #[test]
    fn viterbi_tie_prefers_aware() {
        let mut p = DriverProfile::default();
        p.blinks.aware = [0.5, 0.25, 0.25];
        p.blinks.distracted = [0.5, 0.25, 0.25];
        let x = [BlinkObservation::new(1).unwrap()];
        let path = viterbi_path(&x, &[ObstacleKind::Clean], DriverBelief::new(0.5).unwrap(), &p).unwrap();
        assert_eq!(path, vec![DriverState::Aware]);
    }

    #[test]
    fn local_level_updates() {
        let f = LocalLevelFilter::new(0.0, 1.0, 1.0, 0.0).unwrap().update(2.0);
        assert_abs_diff_eq!(f.m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.c, 0.5, epsilon = 1e-15);

        let f = LocalLevelFilter::new(5.0, 2.0, 0.0, 0.3).unwrap().update(1.5);
        assert_eq!(f.m, 1.5);
        assert_eq!(f.c, 0.0);

        let pinned = LocalLevelFilter::new(0.0, 4.0, 0.0, 0.0).unwrap().update(3.0);
        assert_eq!((pinned.m, pinned.c), (3.0, 0.0));
        let again = pinned.update(-7.0);
        assert_eq!(again.m, 3.0);
    }

    #[test]
    fn local_level_forecast_and_exceedance() {
        let f = LocalLevelFilter::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let g = f.forecast(4);
        assert_eq!(g.variance, 4.0);
        assert_abs_diff_eq!(g.exceedance(-2.0, 2.0), 0.317_310_507_862_914, epsilon = 1e-9);
        // Symmetric band: twice one tail.
        assert_abs_diff_eq!(g.exceedance(-2.0, 2.0), 2.0 * (1.0 - g.cdf(2.0)), epsilon = 1e-15);

        let point = LocalLevelFilter::new(1.0, 0.0, 0.0, 0.0).unwrap().forecast(3);
        assert_eq!(point.exceedance(0.0, 2.0), 0.0);
        assert_eq!(point.exceedance(2.0, 3.0), 1.0);
    }

    #[test]
    fn discrete_surprise_rules() {
        let f = [0.7, 0.2, 0.1];
        assert_abs_diff_eq!(discrete_surprise(&f, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(discrete_surprise(&f, 2), 0.1, epsilon = 1e-15);
        assert!(discrete_surprise(&f, 2) < 0.15);
        assert_eq!(discrete_surprise(&[0.0, 1.0, 0.0], 1), 1.0);
        assert_eq!(discrete_surprise(&[0.0, 1.0, 0.0], 0), 0.0);
    }
}
