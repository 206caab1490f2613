//! Tabular Q-learning over the UAV's own cell.

use crate::environment::Action;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; Action::COUNT]>,
}

impl QTable {
    /// All entries start at zero.
    pub fn new(n_states: usize) -> Self {
        Self {
            values: vec![[0.0; Action::COUNT]; n_states],
        }
    }

    pub fn from_rows(values: Vec<[f64; Action::COUNT]>) -> Self {
        Self { values }
    }

    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, state: usize) -> &[f64; Action::COUNT] {
        &self.values[state]
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state][action.index()]
    }

    pub fn set(&mut self, state: usize, action: Action, value: f64) {
        self.values[state][action.index()] = value;
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.values[state].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rows(&self) -> &[[f64; Action::COUNT]] {
        &self.values
    }
}

/// `(1 − μ)·Q(s, a) + μ·(r + γ·max_a' Q(s', a'))`.
pub fn q_update(q: f64, reward: f64, next_max: f64, mu: f64, gamma: f64) -> f64 {
    (1.0 - mu) * q + mu * (reward + gamma * next_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularAgent {
    pub table: QTable,
    pub mu: f64,
    pub gamma: f64,
}

impl TabularAgent {
    pub fn new(n_states: usize, mu: f64, gamma: f64) -> Self {
        Self {
            table: QTable::new(n_states),
            mu,
            gamma,
        }
    }

    pub fn update(&mut self, state: usize, action: Action, reward: f64, next_state: usize) {
        let next_max = self.table.max_value(next_state);
        let q = self.table.get(state, action);
        self.table.set(state, action, q_update(q, reward, next_max, self.mu, self.gamma));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_example() {
        assert!((q_update(0.0, 1.0, 2.0, 0.01, 0.9) - 0.028).abs() < 1e-12);
        let mut agent = TabularAgent::new(2, 0.01, 0.9);
        agent.table.set(1, Action::West, 2.0);
        agent.update(0, Action::North, 1.0, 1);
        assert!((agent.table.get(0, Action::North) - 0.028).abs() < 1e-12);
    }

    #[test]
    fn full_step_replaces_value() {
        let mut agent = TabularAgent::new(1, 1.0, 0.0);
        agent.table.set(0, Action::Hover, 7.0);
        agent.update(0, Action::Hover, 3.0, 0);
        assert_eq!(agent.table.get(0, Action::Hover), 3.0);
    }

    #[test]
    fn zero_step_keeps_value() {
        let mut agent = TabularAgent::new(1, 0.0, 0.9);
        agent.table.set(0, Action::East, 4.0);
        agent.update(0, Action::East, 100.0, 0);
        assert_eq!(agent.table.get(0, Action::East), 4.0);
    }
}
