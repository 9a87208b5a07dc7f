//! Cross-hand selection rule and the demonstration-feedback reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    UseLeftHand,
    UseRightHand,
}

/// Distances (m) from each hand to its source block and to the placement target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandSelectState {
    pub d_left_source: f64,
    pub d_left_target: f64,
    pub d_right_source: f64,
    pub d_right_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub bonus: f64,
    pub penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { bonus: 1.0, penalty: 1.0 }
    }
}

/// The hand opposite the target's side grasps: left when the target is
/// strictly closer to the right hand, right otherwise (ties go right).
///
/// Source distances are carried in the state but not consulted.
pub fn select_hand(s: &HandSelectState) -> Action {
    if s.d_right_target < s.d_left_target {
        Action::UseLeftHand
    } else {
        Action::UseRightHand
    }
}

pub fn reward(a: Action, a_star: Action, cfg: &RewardConfig) -> f64 {
    if a == a_star {
        cfg.bonus
    } else {
        -cfg.penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub agreement: f64,
    pub total_reward: f64,
    pub decisions: usize,
}

/// One logged decision with its inputs, the chosen action and the human's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    #[serde(flatten)]
    pub state: HandSelectState,
    pub chosen: Action,
    pub human: Action,
    pub reward: f64,
}

pub fn decision_log(states: &[HandSelectState], human: &[Action], cfg: &RewardConfig) -> Result<Vec<DecisionRecord>> {
    if states.len() != human.len() {
        return Err(Error::LengthMismatch { left: states.len(), right: human.len() });
    }
    Ok(states
        .iter()
        .zip(human)
        .map(|(s, &h)| {
            let chosen = select_hand(s);
            DecisionRecord { state: *s, chosen, human: h, reward: reward(chosen, h, cfg) }
        })
        .collect())
}

pub fn evaluate_policy(states: &[HandSelectState], human: &[Action], cfg: &RewardConfig) -> Result<PolicyReport> {
    let log = decision_log(states, human, cfg)?;
    if log.is_empty() {
        return Err(Error::EmptyInput);
    }
    let matches = log.iter().filter(|d| d.chosen == d.human).count();
    Ok(PolicyReport {
        agreement: matches as f64 / log.len() as f64,
        total_reward: log.iter().map(|d| d.reward).sum(),
        decisions: log.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(left_target: f64, right_target: f64) -> HandSelectState {
        HandSelectState { d_left_source: 0.3, d_left_target: left_target, d_right_source: 0.3, d_right_target: right_target }
    }

    #[test]
    fn selection_table_rows() {
        assert_eq!(select_hand(&state(0.35, 0.20)), Action::UseLeftHand);
        assert_eq!(select_hand(&state(0.10, 0.50)), Action::UseRightHand);
        assert_eq!(select_hand(&state(0.25, 0.25)), Action::UseRightHand);
    }

    #[test]
    fn reward_branches() {
        let cfg = RewardConfig::default();
        assert_eq!(reward(Action::UseLeftHand, Action::UseLeftHand, &cfg), 1.0);
        assert_eq!(reward(Action::UseLeftHand, Action::UseRightHand, &cfg), -1.0);
    }

    #[test]
    fn alternating_policy_evaluation() {
        let states: Vec<_> = (0..10).map(|_| state(0.35, 0.20)).collect();
        let human: Vec<_> =
            (0..10).map(|i| if i % 2 == 0 { Action::UseLeftHand } else { Action::UseRightHand }).collect();
        let r = evaluate_policy(&states, &human, &RewardConfig::default()).unwrap();
        assert_eq!(r.agreement, 0.5);
        assert_eq!(r.total_reward, 0.0);
        assert!(matches!(
            evaluate_policy(&states, &human[..3], &RewardConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn decision_log_serializes_flat() {
        let log = decision_log(&[state(0.1, 0.2)], &[Action::UseRightHand], &RewardConfig::default()).unwrap();
        let v = serde_json::to_value(&log[0]).unwrap();
        assert_eq!(v["d_left_target"], 0.1);
        assert_eq!(v["chosen"], "use_right_hand");
        assert_eq!(v["reward"], 1.0);
    }
}
