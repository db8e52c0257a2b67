use serde::{Deserialize, Serialize};

use super::{TrainingConfig, TrainingHistory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` after `patience` epochs without a strict
    /// validation-accuracy improvement.
    ReduceOnPlateau {
        factor: f64,
        patience: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub learning_rate: f64,
    best: Option<f64>,
    wait: usize,
}

impl ScheduleState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            best: None,
            wait: 0,
        }
    }
}

/// Updates the schedule with the latest epoch in `history` and returns the
/// rate for the next epoch.
pub fn apply_lr_schedule(state: &mut ScheduleState, history: &TrainingHistory, config: &TrainingConfig) -> f64 {
    let LrSchedule::ReduceOnPlateau { factor, patience } = config.lr_schedule else {
        return state.learning_rate;
    };
    let Some(last) = history.records.last() else {
        return state.learning_rate;
    };
    if state.best.is_none_or(|b| last.val_acc > b) {
        state.best = Some(last.val_acc);
        state.wait = 0;
    } else {
        state.wait += 1;
        if state.wait >= patience {
            state.learning_rate *= factor;
            state.wait = 0;
        }
    }
    state.learning_rate
}
