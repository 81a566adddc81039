//! Series, datasets and the holdout splits.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    pub seasonal_period: usize,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, seasonal_period: usize) -> Result<Self> {
        let id = id.into();
        if seasonal_period == 0 {
            return Err(Error::param("seasonal period must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(id));
        }
        Ok(Self {
            id,
            values,
            seasonal_period,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A collection of series sharing one forecast horizon.
///
/// Every series is longer than twice the horizon, which leaves room for a
/// validation holdout, a test holdout and a nonempty training remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    horizon: usize,
    series: Vec<TimeSeries>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, horizon: usize, series: Vec<TimeSeries>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::param("horizon must be positive"));
        }
        if series.is_empty() {
            return Err(Error::param("dataset has no series"));
        }
        let mut seen = BTreeSet::new();
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        let short: Vec<String> = series
            .iter()
            .filter(|s| s.len() <= 2 * horizon)
            .map(|s| s.id.clone())
            .collect();
        if !short.is_empty() {
            return Err(Error::ShortSeries {
                ids: short,
                required: 2 * horizon + 1,
            });
        }
        Ok(Self {
            name: name.into(),
            horizon,
            series,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.id.as_str()).collect()
    }

    /// New dataset holding the series at `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let series = indices.iter().map(|&i| self.series[i].clone()).collect();
        Dataset::new(name, self.horizon, series)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub id: String,
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub test: Vec<f64>,
    pub seasonal_period: usize,
}

impl SplitSeries {
    /// The holdout the split was made for: validation if present, else test.
    pub fn holdout(&self) -> &[f64] {
        if self.validation.is_empty() {
            &self.test
        } else {
            &self.validation
        }
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.train.clone();
        out.extend_from_slice(&self.validation);
        out.extend_from_slice(&self.test);
        out
    }
}

/// Holds back the final `horizon` observations of each series as validation.
pub fn split_for_validation(ds: &Dataset) -> Vec<SplitSeries> {
    ds.series
        .iter()
        .map(|s| {
            let cut = s.len() - ds.horizon;
            SplitSeries {
                id: s.id.clone(),
                train: s.values[..cut].to_vec(),
                validation: s.values[cut..].to_vec(),
                test: Vec::new(),
                seasonal_period: s.seasonal_period,
            }
        })
        .collect()
}

/// Holds back the final `horizon` observations of each series as test.
pub fn split_for_test(ds: &Dataset) -> Vec<SplitSeries> {
    ds.series
        .iter()
        .map(|s| {
            let cut = s.len() - ds.horizon;
            SplitSeries {
                id: s.id.clone(),
                train: s.values[..cut].to_vec(),
                validation: Vec::new(),
                test: s.values[cut..].to_vec(),
                seasonal_period: s.seasonal_period,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    #[default]
    Zero,
    /// Last observation carried forward; leading gaps become zero.
    Locf,
}

pub fn impute(raw: &[Option<f64>], policy: Imputation) -> Vec<f64> {
    let mut last = 0.0;
    raw.iter()
        .map(|v| match (v, policy) {
            (Some(x), _) => {
                last = *x;
                *x
            }
            (None, Imputation::Zero) => 0.0,
            (None, Imputation::Locf) => last,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ramp(id: &str, n: usize) -> TimeSeries {
        TimeSeries::new(id, (1..=n).map(|v| v as f64).collect(), 1).unwrap()
    }

    #[test]
    fn validation_split_of_ramp() {
        let ds = Dataset::new("d", 6, vec![ramp("a", 20)]).unwrap();
        let s = &split_for_validation(&ds)[0];
        assert_eq!(s.train, (1..=14).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(s.validation, (15..=20).map(|v| v as f64).collect::<Vec<_>>());
        assert!(s.test.is_empty());
    }

    #[test]
    fn horizon_one() {
        let ds = Dataset::new(
            "d",
            1,
            vec![TimeSeries::new("a", vec![5.0, 6.0, 7.0], 1).unwrap()],
        )
        .unwrap();
        let s = &split_for_validation(&ds)[0];
        assert_eq!(s.train, vec![5.0, 6.0]);
        assert_eq!(s.validation, vec![7.0]);
    }

    #[test]
    fn ids_follow_series() {
        let ds = Dataset::new("d", 2, vec![ramp("x", 9), ramp("y", 12)]).unwrap();
        let ids: Vec<_> = split_for_test(&ds).into_iter().map(|s| s.id).collect();
        assert_eq!(ids, vec!["x", "y"]);
    }

    #[test]
    fn test_split_reconstructs() {
        let ds = Dataset::new("d", 6, vec![ramp("a", 20)]).unwrap();
        let s = &split_for_test(&ds)[0];
        assert_eq!(s.train.len(), 14);
        assert_eq!(s.test, (15..=20).map(|v| v as f64).collect::<Vec<_>>());
        assert_eq!(s.reconstruct(), ds.series()[0].values);
    }

    #[test]
    fn horizon_just_below_half_is_accepted() {
        // length 20, horizon 9: 20 > 18
        assert!(Dataset::new("d", 9, vec![ramp("a", 20)]).is_ok());
        assert!(Dataset::new("d", 10, vec![ramp("a", 20)]).is_err());
    }

    #[test]
    fn short_series_are_listed() {
        let err = Dataset::new("d", 6, vec![ramp("ok", 30), ramp("bad", 10)]).unwrap_err();
        assert_eq!(
            err,
            Error::ShortSeries {
                ids: vec!["bad".into()],
                required: 13
            }
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::new("d", 2, vec![ramp("a", 9), ramp("a", 9)]).unwrap_err();
        assert_eq!(err, Error::DuplicateId("a".into()));
    }

    #[test]
    fn imputation_policies() {
        let raw = [None, Some(2.0), None, Some(3.0)];
        assert_eq!(impute(&raw, Imputation::Zero), vec![0.0, 2.0, 0.0, 3.0]);
        assert_eq!(impute(&raw, Imputation::Locf), vec![0.0, 2.0, 2.0, 3.0]);
    }
}
