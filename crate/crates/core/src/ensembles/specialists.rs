use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::gfm::{GfmContext, Panel};
use super::matrix::{ForecastMatrix, RowOrigin};
use crate::error::{Error, Result};
use crate::evaluation::smape;
use crate::exec::Executor;
use crate::learners::GlobalModel;
use crate::rng::{derive_seed, seeded, stream};

/// Which round's models forecast once the validation error has grown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalRound {
    Last,
    #[default]
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialistSettings {
    pub specialists: usize,
    pub top_n: usize,
    pub max_rounds: usize,
    pub final_round: FinalRound,
}

impl Default for SpecialistSettings {
    fn default() -> Self {
        Self {
            specialists: 4,
            top_n: 2,
            max_rounds: 20,
            final_round: FinalRound::Previous,
        }
    }
}

/// The trace of one run of the specialist loop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpecialistState {
    /// Series each specialist trained on, per round.
    pub train_sets: Vec<Vec<Vec<usize>>>,
    /// Output of the reassignment after each round.
    pub assignments: Vec<Vec<Vec<usize>>>,
    /// `val_errors[round][series][specialist]`.
    pub val_errors: Vec<Vec<Vec<f64>>>,
    /// Mean over series of the best specialist's validation error.
    pub avg_val_error_history: Vec<f64>,
    /// `(round, specialist)` pairs whose empty train set was refilled.
    pub reseeded: Vec<(usize, usize)>,
    pub chosen_round: usize,
}

/// Each series joins the train sets of its `n` lowest-error specialists;
/// ties go to the lower specialist index.
pub fn reassign_series(val_errors: &[Vec<f64>], n: usize) -> Result<Vec<Vec<usize>>> {
    let k = val_errors.first().map_or(0, Vec::len);
    if n == 0 || n > k {
        return Err(Error::param(alloc::format!(
            "top-N of {n} needs between 1 and {k} specialists"
        )));
    }
    let mut sets = vec![Vec::new(); k];
    for (i, row) in val_errors.iter().enumerate() {
        for s in top_n(row, n) {
            sets[s].push(i);
        }
    }
    Ok(sets)
}

fn top_n(errors: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]));
    order.truncate(n);
    order
}

/// Training and validation scoring, kept abstract so the loop can be driven
/// by stubbed errors.
pub trait SpecialistBackend {
    type Model;
    fn train(&self, sets: &[Vec<usize>]) -> Result<Vec<Self::Model>>;
    /// `[series][specialist]` validation errors.
    fn validation_errors(&self, models: &[Self::Model]) -> Result<Vec<Vec<f64>>>;
}

pub struct SpecialistOutcome<M> {
    pub models: Vec<M>,
    pub val_errors: Vec<Vec<f64>>,
    pub state: SpecialistState,
}

fn random_subset(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut v = sample(&mut seeded(seed), n, size.clamp(1, n)).into_vec();
    v.sort_unstable();
    v
}

/// Models of one round and their validation errors.
type Round<M> = (Vec<M>, Vec<Vec<f64>>);

/// Round 0 gives each specialist an independent random half of the series.
/// Each round trains, scores and reassigns. The loop stops when the average
/// best-specialist error grows, when the reassignment no longer changes, or
/// after `max_rounds`.
pub fn specialists_loop<B: SpecialistBackend>(
    backend: &B,
    n_series: usize,
    settings: &SpecialistSettings,
    seed: u64,
) -> Result<SpecialistOutcome<B::Model>> {
    let k = settings.specialists;
    if k == 0 || settings.top_n == 0 || settings.top_n > k {
        return Err(Error::param("specialists need 1 <= N <= K"));
    }
    if n_series == 0 || settings.max_rounds == 0 {
        return Err(Error::param("specialists need series and at least one round"));
    }
    let mut state = SpecialistState::default();
    let mut sets: Vec<Vec<usize>> = (0..k)
        .map(|s| random_subset(n_series, n_series.div_ceil(2), derive_seed(seed, stream::SPECIALISTS, s as u64)))
        .collect();
    let mut previous: Option<Round<B::Model>> = None;
    for round in 0.. {
        let mut used = sets.clone();
        for (s, set) in used.iter_mut().enumerate() {
            if set.is_empty() {
                let counter = ((round + 1) * k + s) as u64 + (1 << 32);
                *set = random_subset(n_series, n_series.div_ceil(10), derive_seed(seed, stream::SPECIALISTS, counter));
                state.reseeded.push((round, s));
            }
        }
        let models = backend.train(&used)?;
        let errors = backend.validation_errors(&models)?;
        let avg = errors
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / n_series as f64;
        let grew = state
            .avg_val_error_history
            .last()
            .is_some_and(|&prev| avg > prev);
        state.train_sets.push(used);
        state.val_errors.push(errors.clone());
        state.avg_val_error_history.push(avg);
        if grew {
            let (models, errors, chosen) = match (settings.final_round, previous) {
                (FinalRound::Previous, Some((m, e))) => (m, e, round - 1),
                _ => (models, errors, round),
            };
            state.chosen_round = chosen;
            return Ok(SpecialistOutcome { models, val_errors: errors, state });
        }
        let next = reassign_series(&errors, settings.top_n)?;
        state.assignments.push(next.clone());
        if next == sets || round + 1 >= settings.max_rounds {
            state.chosen_round = round;
            return Ok(SpecialistOutcome { models, val_errors: errors, state });
        }
        sets = next;
        previous = Some((models, errors));
    }
    unreachable!("the loop returns")
}

/// Trains specialists on the validation panel and scores them by sMAPE on
/// the held-back points.
pub struct GfmSpecialists<'a, 'p, E> {
    pub ctx: &'a GfmContext<'p>,
    pub actuals: &'a [Vec<f64>],
    pub model_seed: u64,
    pub zero_safe: bool,
    pub epsilon: f64,
    pub exec: &'a E,
}

impl<E: Executor> SpecialistBackend for GfmSpecialists<'_, '_, E> {
    type Model = GlobalModel;

    fn train(&self, sets: &[Vec<usize>]) -> Result<Vec<GlobalModel>> {
        let all = self.ctx.all();
        self.exec
            .map(sets.len(), |s| {
                let members = if self.ctx.trainable(&sets[s]) { &sets[s] } else { &all };
                self.ctx.fit(members, self.model_seed)
            })
            .into_iter()
            .collect()
    }

    fn validation_errors(&self, models: &[GlobalModel]) -> Result<Vec<Vec<f64>>> {
        self.exec
            .map(self.ctx.len(), |i| {
                models
                    .iter()
                    .map(|m| {
                        let f = self.ctx.forecast(m, i)?;
                        smape(&f, &self.actuals[i], self.zero_safe, self.epsilon)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .into_iter()
            .collect()
    }
}

pub struct SpecialistsRun {
    pub matrix: ForecastMatrix,
    pub state: SpecialistState,
}

/// Runs the loop on the validation split of `test_ctx`'s panel, then
/// forecasts every series with its top-N specialists of the chosen round.
#[allow(clippy::too_many_arguments)]
pub fn run_specialists<E: Executor>(
    test_ctx: &GfmContext<'_>,
    tag: &str,
    settings: &SpecialistSettings,
    seed: u64,
    model_seed: u64,
    zero_safe: bool,
    epsilon: f64,
    exec: &E,
) -> Result<SpecialistsRun> {
    let (val_panel, actuals): (Panel, Vec<Vec<f64>>) = test_ctx.panel().validation()?;
    let cfg = test_ctx.config();
    let val_ctx = GfmContext::new(&val_panel, &cfg)?;
    let backend = GfmSpecialists {
        ctx: &val_ctx,
        actuals: &actuals,
        model_seed,
        zero_safe,
        epsilon,
        exec,
    };
    let out = specialists_loop(&backend, val_panel.len(), settings, seed)?;
    let picks: Vec<Vec<usize>> = out.val_errors.iter().map(|r| top_n(r, settings.top_n)).collect();
    let rows: Vec<Vec<Vec<f64>>> = exec
        .map(test_ctx.len(), |i| {
            picks[i]
                .iter()
                .map(|&s| test_ctx.forecast(&out.models[s], i))
                .collect::<Result<Vec<_>>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let mut matrix = ForecastMatrix::new(tag, test_ctx.panel().horizon, test_ctx.panel().ids.clone());
    for (i, its) in rows.into_iter().enumerate() {
        for (row, &s) in its.into_iter().zip(&picks[i]) {
            matrix.push(i, row, RowOrigin { cluster: s, fallback: false });
        }
    }
    Ok(SpecialistsRun {
        matrix,
        state: out.state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::gfm::tests_support::two_family_panel;
    use crate::ensembles::gfm::GfmConfig;
    use crate::exec::Sequential;
    use core::cell::{Cell, RefCell};

    #[test]
    fn reassignment_examples() {
        assert_eq!(reassign_series(&[vec![1.0, 2.0]], 1).unwrap(), vec![vec![0], vec![]]);
        assert_eq!(reassign_series(&[vec![1.0, 2.0]], 2).unwrap(), vec![vec![0], vec![0]]);
        assert_eq!(reassign_series(&[vec![1.0, 1.0]], 1).unwrap(), vec![vec![0], vec![]]);
        assert_eq!(reassign_series(&[vec![3.0, 1.0, 2.0]], 2).unwrap(), vec![vec![], vec![0], vec![0]]);
        assert!(reassign_series(&[vec![1.0]], 2).is_err());
    }

    /// Errors grow by one every round regardless of the models.
    struct Growing {
        round: Cell<usize>,
        n: usize,
    }

    impl SpecialistBackend for Growing {
        type Model = usize;

        fn train(&self, sets: &[Vec<usize>]) -> Result<Vec<usize>> {
            let r = self.round.get();
            self.round.set(r + 1);
            Ok(vec![r; sets.len()])
        }

        fn validation_errors(&self, models: &[usize]) -> Result<Vec<Vec<f64>>> {
            let r = models[0] as f64;
            Ok((0..self.n)
                .map(|i| (0..models.len()).map(|s| r + 0.1 * ((i + s) % 3) as f64).collect())
                .collect())
        }
    }

    #[test]
    fn growing_errors_stop_after_second_round() {
        let b = Growing { round: Cell::new(0), n: 6 };
        let settings = SpecialistSettings { specialists: 3, top_n: 2, ..Default::default() };
        let out = specialists_loop(&b, 6, &settings, 1).unwrap();
        assert_eq!(out.state.avg_val_error_history.len(), 2);
        assert_eq!(out.state.chosen_round, 0);
        assert_eq!(out.models, vec![0; 3]);

        let b = Growing { round: Cell::new(0), n: 6 };
        let last = SpecialistSettings { final_round: FinalRound::Last, ..settings };
        let out = specialists_loop(&b, 6, &last, 1).unwrap();
        assert_eq!((out.state.chosen_round, out.models[0]), (1, 1));
    }

    #[test]
    fn every_series_in_exactly_n_sets() {
        let panel = two_family_panel(5, 7);
        let cfg = GfmConfig { window: Some(3), ..GfmConfig::default() };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let settings = SpecialistSettings { specialists: 4, top_n: 2, ..Default::default() };
        let run = run_specialists(&ctx, "s", &settings, 3, 0, false, 0.1, &Sequential).unwrap();
        assert!(!run.state.assignments.is_empty());
        for sets in &run.state.assignments {
            for i in 0..panel.len() {
                assert_eq!(sets.iter().filter(|s| s.contains(&i)).count(), 2);
            }
        }
        for round in &run.state.train_sets[..1] {
            for set in round {
                assert_eq!(set.len(), panel.len().div_ceil(2));
            }
        }
        assert!((0..panel.len()).all(|i| run.matrix.iterations(i) == 2));
        assert!(run.matrix.validate().is_ok());
    }

    /// Records every model the wrapped backend trains.
    struct Recording<'a, B: SpecialistBackend> {
        inner: &'a B,
        trained: RefCell<Vec<Vec<B::Model>>>,
    }

    impl<B: SpecialistBackend> SpecialistBackend for Recording<'_, B>
    where
        B::Model: Clone,
    {
        type Model = B::Model;

        fn train(&self, sets: &[Vec<usize>]) -> Result<Vec<B::Model>> {
            let m = self.inner.train(sets)?;
            self.trained.borrow_mut().push(m.clone());
            Ok(m)
        }

        fn validation_errors(&self, models: &[B::Model]) -> Result<Vec<Vec<f64>>> {
            self.inner.validation_errors(models)
        }
    }

    #[test]
    fn single_specialist_becomes_baseline() {
        let full = two_family_panel(2, 8);
        let (panel, actuals) = full.validation().unwrap();
        let cfg = GfmConfig { window: Some(3), ..GfmConfig::default() };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let inner = GfmSpecialists {
            ctx: &ctx,
            actuals: &actuals,
            model_seed: 0,
            zero_safe: false,
            epsilon: 0.1,
            exec: &Sequential,
        };
        let rec = Recording { inner: &inner, trained: RefCell::new(Vec::new()) };
        let settings = SpecialistSettings { specialists: 1, top_n: 1, ..Default::default() };
        let out = specialists_loop(&rec, 4, &settings, 2).unwrap();
        assert_eq!(out.state.train_sets[0][0].len(), 2);
        assert_eq!(out.state.train_sets[1][0], vec![0, 1, 2, 3]);
        let trained = rec.trained.borrow();
        assert_eq!(trained[1][0], ctx.fit(&ctx.all(), 0).unwrap());
    }

    #[test]
    fn planted_specialists_win_their_family() {
        // noiseless decay and growth families; each is an exact pooled AR(1)
        // after mean normalisation
        let mut ids = Vec::new();
        let mut histories = Vec::new();
        for (f, phi) in [0.97f64, 1.03].into_iter().enumerate() {
            for j in 0..3 {
                ids.push(alloc::format!("f{f}_{j}"));
                histories.push((0..30).map(|t| (1.0 + j as f64) * libm::pow(phi, t as f64)).collect());
            }
        }
        let full = Panel { ids, histories, period: 1, horizon: 5 };
        let (panel, actuals) = full.validation().unwrap();
        let cfg = GfmConfig { window: Some(1), ..GfmConfig::default() };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let backend = GfmSpecialists {
            ctx: &ctx,
            actuals: &actuals,
            model_seed: 0,
            zero_safe: false,
            epsilon: 0.1,
            exec: &Sequential,
        };
        let models = backend.train(&[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let errors = backend.validation_errors(&models).unwrap();
        for (i, row) in errors.iter().enumerate() {
            assert_eq!(top_n(row, 1)[0], usize::from(i >= 3), "{row:?}");
        }
    }
}
