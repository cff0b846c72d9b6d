//! Window-scoped disturbances: load steps and admittance changes.

use serde::{Deserialize, Serialize};

use crate::attack::Window;
use crate::model::Model;

fn unity() -> f64 {
    1.0
}

/// A disturbance active over `window`.
///
/// `admittance_scale` multiplies both G and B on the listed `(i, k)` pairs
/// (and their mirror entries); an empty list scales the whole matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub window: Window,
    #[serde(default = "unity")]
    pub load_multiplier: f64,
    #[serde(default = "unity")]
    pub admittance_scale: f64,
    #[serde(default)]
    pub entries: Vec<[usize; 2]>,
}

impl FaultSpec {
    pub fn load_step(window: Window, multiplier: f64) -> Self {
        Self {
            window,
            load_multiplier: multiplier,
            admittance_scale: 1.0,
            entries: Vec::new(),
        }
    }
}

/// Network and load as seen at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingView {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub load_multiplier: f64,
}

/// Applies every fault active at `t`, then isolates `disconnected` machines
/// by zeroing their rows and columns.
pub fn inject_fault(model: &Model, faults: &[FaultSpec], disconnected: &[bool], t: f64) -> OperatingView {
    let mut view = OperatingView {
        g: model.network.g.clone(),
        b: model.network.b.clone(),
        load_multiplier: 1.0,
    };
    let n = view.g.len();
    for f in faults.iter().filter(|f| f.window.contains(t)) {
        view.load_multiplier *= f.load_multiplier;
        if f.admittance_scale == 1.0 {
            continue;
        }
        let mut scale_at = |i: usize, k: usize| {
            if i < n && k < n {
                view.g[i][k] *= f.admittance_scale;
                view.b[i][k] *= f.admittance_scale;
            }
        };
        if f.entries.is_empty() {
            for i in 0..n {
                for k in 0..n {
                    scale_at(i, k);
                }
            }
        } else {
            for &[i, k] in &f.entries {
                scale_at(i, k);
                if i != k {
                    scale_at(k, i);
                }
            }
        }
    }
    for (i, _) in disconnected.iter().enumerate().filter(|(_, d)| **d) {
        for k in 0..n {
            view.g[i][k] = 0.0;
            view.g[k][i] = 0.0;
            view.b[i][k] = 0.0;
            view.b[k][i] = 0.0;
        }
    }
    view
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_multiplier_is_identity() {
        let m = Model::desk_default();
        let f = FaultSpec::load_step(Window::new(0.0, 10.0), 1.0);
        for t in [0.0, 5.0, 20.0] {
            let v = inject_fault(&m, std::slice::from_ref(&f), &[], t);
            assert_eq!(v.g, m.network.g);
            assert_eq!(v.b, m.network.b);
            assert_eq!(v.load_multiplier, 1.0);
        }
    }

    #[test]
    fn window_semantics() {
        let m = Model::desk_default();
        let f = FaultSpec::load_step(Window::new(1.0, 1.2), 10.0);
        assert_eq!(
            inject_fault(&m, std::slice::from_ref(&f), &[], 0.5).load_multiplier,
            1.0
        );
        assert_eq!(
            inject_fault(&m, std::slice::from_ref(&f), &[], 1.0).load_multiplier,
            10.0
        );
        assert_eq!(
            inject_fault(&m, std::slice::from_ref(&f), &[], 1.1).load_multiplier,
            10.0
        );
        assert_eq!(inject_fault(&m, &[f], &[], 1.2).load_multiplier, 1.0);
    }

    #[test]
    fn selected_entries_stay_symmetric() {
        let m = Model::desk_default();
        let f = FaultSpec {
            window: Window::from(0.0),
            load_multiplier: 1.0,
            admittance_scale: 3.0,
            entries: vec![[0, 1]],
        };
        let v = inject_fault(&m, &[f], &[], 1.0);
        assert_eq!(v.g[0][1], 0.8 * 3.0);
        assert_eq!(v.g[1][0], 0.8 * 3.0);
        assert_eq!(v.b[0][1], 12.0);
        assert_eq!(v.g[0][0], 0.2);
    }

    #[test]
    fn disconnected_machine_is_isolated() {
        let m = Model::desk_default();
        let v = inject_fault(&m, &[], &[true, false], 0.0);
        assert_eq!(v.g, vec![vec![0.0, 0.0], vec![0.0, 0.2]]);
        assert_eq!(v.b, vec![vec![0.0, 0.0], vec![0.0, -4.0]]);
    }
}
