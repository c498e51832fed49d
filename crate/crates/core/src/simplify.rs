//! Path-gain thresholding and the reflection-order cap.
//!
//! Both filters keep the input order. The pipeline applies the absolute
//! threshold first, then the relative one.

use serde::{Deserialize, Serialize};

use crate::qd::Mpc;
use crate::raytracer::{path_check_budget, DeterministicRay};

pub trait PathGain {
    fn path_gain_db(&self) -> f64;
}

impl PathGain for DeterministicRay {
    fn path_gain_db(&self) -> f64 {
        self.gain_db
    }
}

impl PathGain for Mpc {
    fn path_gain_db(&self) -> f64 {
        self.gain_db
    }
}

impl PathGain for f64 {
    fn path_gain_db(&self) -> f64 {
        *self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplificationSetting {
    /// Maximum reflection order R'.
    pub max_reflections: usize,
    /// gamma_th [dB], `-inf` keeps everything.
    pub rel_threshold_db: f64,
    /// Gamma_th [dB].
    pub abs_threshold_db: f64,
}

impl SimplificationSetting {
    pub fn baseline(max_reflections: usize) -> Self {
        SimplificationSetting {
            max_reflections,
            rel_threshold_db: f64::NEG_INFINITY,
            abs_threshold_db: -1000.0,
        }
    }

    /// Absolute threshold, then relative threshold.
    pub fn apply<T: PathGain + Clone>(&self, items: &[T]) -> Vec<T> {
        filter_relative(&filter_absolute(items, self.abs_threshold_db), self.rel_threshold_db)
    }
}

/// Strongest gain, first occurrence on ties.
pub fn strongest<T: PathGain>(items: &[T]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in items.iter().enumerate() {
        let g = it.path_gain_db();
        if best.is_none_or(|(_, b)| g > b) {
            best = Some((i, g));
        }
    }
    best
}

/// Keeps item `i` iff `PG_i - PG_strong >= gamma_th`.
pub fn filter_relative<T: PathGain + Clone>(items: &[T], rel_threshold_db: f64) -> Vec<T> {
    let Some((_, strong)) = strongest(items) else {
        return Vec::new();
    };
    if rel_threshold_db == f64::NEG_INFINITY {
        return items.to_vec();
    }
    items
        .iter()
        .filter(|it| it.path_gain_db() - strong >= rel_threshold_db)
        .cloned()
        .collect()
}

/// Keeps item `i` iff `PG_i >= Gamma_th`.
pub fn filter_absolute<T: PathGain + Clone>(items: &[T], abs_threshold_db: f64) -> Vec<T> {
    items
        .iter()
        .filter(|it| it.path_gain_db() >= abs_threshold_db)
        .cloned()
        .collect()
}

/// Obstruction checks avoided by discarding the given paths before the
/// obstruction phase.
pub fn saved_checks<'a>(discarded: impl IntoIterator<Item = &'a [usize]>, triangle_count: usize) -> u64 {
    discarded
        .into_iter()
        .map(|tuple| path_check_budget(tuple, triangle_count))
        .sum()
}
