use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::learners::{fit_ffnn, fit_pr, forecast_recursive, FfnnParams, GlobalModel};
use crate::preprocess::{
    input_window_size, make_windows, FourierSpec, InputLayout, PipelineConfig, PreprocessRecord,
    Seasonality,
};
use crate::series::Dataset;

/// The series a run trains on and forecasts from. Forecasts continue from the
/// end of each history.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub ids: Vec<String>,
    pub histories: Vec<Vec<f64>>,
    pub period: usize,
    pub horizon: usize,
}

impl Panel {
    /// Training portions of a dataset: everything but the final `horizon`
    /// points.
    pub fn for_test(ds: &Dataset) -> Result<Self> {
        let period = common_period(ds)?;
        let h = ds.horizon();
        Ok(Self {
            ids: ds.series().iter().map(|s| s.id.clone()).collect(),
            histories: ds
                .series()
                .iter()
                .map(|s| s.values[..s.len() - h].to_vec())
                .collect(),
            period,
            horizon: h,
        })
    }

    /// Holds back the last `horizon` points of every history. Returns the
    /// shortened panel and the held-back actuals.
    pub fn validation(&self) -> Result<(Panel, Vec<Vec<f64>>)> {
        let h = self.horizon;
        let short: Vec<String> = self
            .ids
            .iter()
            .zip(&self.histories)
            .filter(|(_, x)| x.len() <= h)
            .map(|(id, _)| id.clone())
            .collect();
        if !short.is_empty() {
            return Err(Error::ShortSeries {
                ids: short,
                required: 2 * h + 1,
            });
        }
        let histories = self.histories.iter().map(|x| x[..x.len() - h].to_vec()).collect();
        let actuals = self.histories.iter().map(|x| x[x.len() - h..].to_vec()).collect();
        Ok((
            Panel {
                ids: self.ids.clone(),
                histories,
                period: self.period,
                horizon: h,
            },
            actuals,
        ))
    }

    pub fn subset(&self, indices: &[usize]) -> Panel {
        Panel {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            histories: indices.iter().map(|&i| self.histories[i].clone()).collect(),
            period: self.period,
            horizon: self.horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn series(&self) -> Vec<(&str, &[f64])> {
        self.ids
            .iter()
            .zip(&self.histories)
            .map(|(id, x)| (id.as_str(), x.as_slice()))
            .collect()
    }
}

fn common_period(ds: &Dataset) -> Result<usize> {
    let mut periods = ds.series().iter().map(|s| s.seasonal_period);
    let first = periods
        .next()
        .ok_or_else(|| Error::param("dataset has no series"))?;
    if periods.any(|p| p != first) {
        return Err(Error::param("all series in a dataset must share one seasonal period"));
    }
    Ok(first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Pr {
        #[serde(default)]
        l2: f64,
    },
    Ffnn(FfnnParams),
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::Pr { l2: 0.0 }
    }
}

impl LearnerSpec {
    /// Whether the fitted model depends on the model seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, LearnerSpec::Ffnn(_))
    }
}

/// Everything that determines one global model apart from its training set
/// and seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GfmConfig {
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default = "plain")]
    pub pipeline: PipelineConfig,
    /// Number of lags; derived from horizon and period when absent.
    #[serde(default)]
    pub window: Option<usize>,
    /// Clamp forecasts at zero after undoing the preprocessing.
    #[serde(default)]
    pub nonnegative: bool,
}

fn plain() -> PipelineConfig {
    PipelineConfig::PLAIN
}

impl GfmConfig {
    pub fn layout(&self, horizon: usize, period: usize) -> InputLayout {
        let lags = self.window.unwrap_or_else(|| input_window_size(horizon, period));
        let fourier = match self.pipeline.seasonality {
            Seasonality::Fourier { terms } if period > 1 => Some(FourierSpec {
                period: period as f64,
                terms,
            }),
            _ => None,
        };
        InputLayout { lags, fourier }
    }
}

/// A panel after preprocessing, ready for fitting models on any subset of its
/// series and forecasting any of them.
pub struct GfmContext<'a> {
    panel: &'a Panel,
    cfg: GfmConfig,
    layout: InputLayout,
    records: Vec<PreprocessRecord>,
    values: Vec<Vec<f64>>,
}

impl<'a> GfmContext<'a> {
    pub fn new(panel: &'a Panel, cfg: &GfmConfig) -> Result<Self> {
        let layout = cfg.layout(panel.horizon, panel.period);
        if layout.lags == 0 {
            return Err(Error::param("window size must be positive"));
        }
        let mut records = Vec::with_capacity(panel.len());
        let mut values = Vec::with_capacity(panel.len());
        for (id, x) in panel.ids.iter().zip(&panel.histories) {
            let (rec, v) = PreprocessRecord::forward(id, x, &cfg.pipeline, panel.period)?;
            records.push(rec);
            values.push(v);
        }
        Ok(Self {
            panel,
            cfg: *cfg,
            layout,
            records,
            values,
        })
    }

    pub fn config(&self) -> GfmConfig {
        self.cfg
    }

    pub fn panel(&self) -> &Panel {
        self.panel
    }

    pub fn layout(&self) -> &InputLayout {
        &self.layout
    }

    pub fn records(&self) -> &[PreprocessRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    pub fn training_rows(&self, members: &[usize]) -> usize {
        members
            .iter()
            .map(|&i| self.values[i].len().saturating_sub(self.layout.lags))
            .sum()
    }

    /// A group is trainable when it yields at least `lags + 1` windows.
    pub fn trainable(&self, members: &[usize]) -> bool {
        self.training_rows(members) > self.layout.lags
    }

    pub fn fit(&self, members: &[usize], seed: u64) -> Result<GlobalModel> {
        let series: Vec<(&str, &[f64])> = members
            .iter()
            .map(|&i| (self.panel.ids[i].as_str(), self.values[i].as_slice()))
            .collect();
        let ws = make_windows(&series, &self.layout)?;
        Ok(match self.cfg.learner {
            LearnerSpec::Pr { l2 } => GlobalModel::Pooled(fit_pr(&ws, l2)?),
            LearnerSpec::Ffnn(p) => GlobalModel::Ffnn(fit_ffnn(&ws, &FfnnParams { seed, ..p })?),
        })
    }

    /// Forecast of series `i` in its original scale.
    pub fn forecast(&self, model: &GlobalModel, i: usize) -> Result<Vec<f64>> {
        let x = &self.values[i];
        let raw = forecast_recursive(model, x, self.panel.horizon)?;
        let mut out = self.records[i].inverse(&raw, x.len());
        if self.cfg.nonnegative {
            for v in out.iter_mut() {
                *v = v.max(0.0);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} (forecast)",
                self.panel.ids[i]
            )));
        }
        Ok(out)
    }

    /// Fits one model on every series and forecasts them all.
    pub fn baseline<E: Executor>(&self, seed: u64, exec: &E) -> Result<Vec<Vec<f64>>> {
        let model = self.fit(&self.all(), seed)?;
        exec.map(self.len(), |i| self.forecast(&model, i))
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::Panel;
    use crate::rng::seeded;
    use alloc::format;
    use alloc::vec::Vec;
    use rand_distr::{Distribution, Normal};

    /// `per` series from each of two AR(1) families with distinct dynamics.
    pub(crate) fn two_family_panel(per: usize, seed: u64) -> Panel {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut ids = Vec::new();
        let mut histories = Vec::new();
        for (f, (c, phi)) in [(1.0, 0.7), (4.0, -0.6)].into_iter().enumerate() {
            for j in 0..per {
                let mut y = Vec::with_capacity(50);
                let mut last = c / (1.0 - phi) + 1.0 + j as f64 * 0.1;
                for _ in 0..50 {
                    last = c + phi * last + noise.sample(&mut rng);
                    y.push(last);
                }
                ids.push(format!("f{f}_{j}"));
                histories.push(y);
            }
        }
        Panel {
            ids,
            histories,
            period: 1,
            horizon: 5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::learners::WindowModel;
    use crate::series::TimeSeries;
    use alloc::vec;

    pub(crate) fn toy_panel() -> Panel {
        let ids = vec!["a".into(), "b".into(), "c".into()];
        let histories = vec![
            (0..30).map(|t| 10.0 + (t % 5) as f64).collect(),
            (0..30).map(|t| 20.0 + 0.5 * t as f64).collect(),
            (0..30).map(|t| 5.0 + libm::sin(t as f64)).collect(),
        ];
        Panel {
            ids,
            histories,
            period: 1,
            horizon: 4,
        }
    }

    #[test]
    fn panel_from_dataset() {
        let s = |id: &str| TimeSeries::new(id, (0..10).map(f64::from).collect(), 1).unwrap();
        let ds = Dataset::new("d", 3, vec![s("x"), s("y")]).unwrap();
        let p = Panel::for_test(&ds).unwrap();
        assert_eq!(p.histories[0], (0..7).map(f64::from).collect::<Vec<_>>());
        let (v, act) = p.validation().unwrap();
        assert_eq!(v.histories[1].len(), 4);
        assert_eq!(act[1], vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn mixed_periods_rejected() {
        let a = TimeSeries::new("a", vec![1.0; 10], 1).unwrap();
        let b = TimeSeries::new("b", vec![1.0; 10], 4).unwrap();
        let ds = Dataset::new("d", 2, vec![a, b]).unwrap();
        assert!(Panel::for_test(&ds).is_err());
    }

    #[test]
    fn baseline_matches_hand_composed_pipeline() {
        let panel = toy_panel();
        let cfg = GfmConfig {
            window: Some(3),
            ..GfmConfig::default()
        };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let got = ctx.baseline(0, &Sequential).unwrap();

        // compose by hand: mean-normalise, window, fit, iterate, rescale
        let norm: Vec<(Vec<f64>, f64)> = panel
            .histories
            .iter()
            .map(|x| {
                let m = x.iter().sum::<f64>() / x.len() as f64;
                (x.iter().map(|v| v / m).collect(), m)
            })
            .collect();
        let refs: Vec<(&str, &[f64])> = norm.iter().map(|(v, _)| ("s", v.as_slice())).collect();
        let ws = make_windows(&refs, &InputLayout::lags(3)).unwrap();
        let model = fit_pr(&ws, 0.0).unwrap();
        for (i, (v, m)) in norm.iter().enumerate() {
            let mut tail = v.clone();
            for h in 0..4 {
                let n = tail.len();
                let y = model.predict(&tail[n - 3..]);
                tail.push(y);
                assert!((got[i][h] - y * m).abs() < 1e-9 * m);
            }
        }
    }

    #[test]
    fn clamps_when_nonnegative() {
        let panel = Panel {
            ids: vec!["down".into(), "d2".into()],
            histories: vec![
                (0..20).map(|t| 20.0 - t as f64).collect(),
                (0..20).map(|t| 40.0 - 2.0 * t as f64).collect(),
            ],
            period: 1,
            horizon: 8,
        };
        let mut cfg = GfmConfig {
            window: Some(1),
            ..GfmConfig::default()
        };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let raw = ctx.baseline(0, &Sequential).unwrap();
        assert!(raw[0].iter().any(|v| *v < 0.0));
        cfg.nonnegative = true;
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        let clamped = ctx.baseline(0, &Sequential).unwrap();
        assert!(clamped.iter().flatten().all(|v| *v >= 0.0));
    }

    #[test]
    fn trainability_threshold() {
        let panel = toy_panel();
        let cfg = GfmConfig {
            window: Some(28),
            ..GfmConfig::default()
        };
        let ctx = GfmContext::new(&panel, &cfg).unwrap();
        assert_eq!(ctx.training_rows(&[0]), 2);
        assert!(!ctx.trainable(&[0, 1, 2]));
    }
}
