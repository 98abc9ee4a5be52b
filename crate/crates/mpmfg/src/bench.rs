//! The three-population epidemic benchmark.
//!
//! Two states (healthy/sick), two actions (wear a mask or not), three
//! populations that differ in how costly sickness is for them. Infection
//! pressure on a healthy agent grows with the sick share of its aggregated
//! impact; recovery is state-only. Populations are coupled by a fixed
//! symmetric connectivity matrix.

use std::sync::Arc;

use crate::game::{GameModel, LipschitzConstants};
use crate::population::SbmModel;
use crate::types::FiniteSpace;

/// State indices.
pub const HEALTHY: usize = 0;
pub const SICK: usize = 1;
/// Action indices.
pub const MASK: usize = 0;
pub const NO_MASK: usize = 1;

/// Number of populations.
pub const POPULATIONS: usize = 3;

/// Cross-population connectivity.
pub const CONNECTIVITY: [[f64; 3]; 3] = [
    [0.5, 0.4, 0.5],
    [0.4, 0.6, 0.3],
    [0.5, 0.3, 0.7],
];

/// Builds the benchmark game and its block model (no agent counts attached;
/// finite-agent runs pick their own sizes).
///
/// Transitions: a sick agent recovers with probability 0.3 regardless of
/// action; a healthy agent falls sick with probability `0.8 z(sick) + 0.1`
/// when masked and `0.55 z(sick) + 0.3` when unmasked. Rewards: population k
/// (1-based) pays `2k` while sick, `1` for wearing a mask, and an extra `0.5`
/// when sick and unmasked. Rewards do not depend on the impact vector.
pub fn build_epidemic() -> (GameModel, SbmModel) {
    let transition = Arc::new(|s: usize, a: usize, z: &[f64], out: &mut [f64]| {
        let p_sick = if s == SICK {
            0.7
        } else if a == MASK {
            0.8 * z[SICK] + 0.1
        } else {
            0.55 * z[SICK] + 0.3
        };
        out[HEALTHY] = 1.0 - p_sick;
        out[SICK] = p_sick;
    });
    let reward = Arc::new(|k: usize, s: usize, a: usize, _z: &[f64]| {
        let mut r = 0.0;
        if s == SICK {
            r -= 2.0 * (k + 1) as f64;
        }
        if a == MASK {
            r -= 1.0;
        }
        if s == SICK && a == NO_MASK {
            r -= 0.5;
        }
        r
    });
    // Constants read off the transition/reward forms above. The sup of the
    // L1 transition gap across impacts is 2*0.8; across states 2*|0.6 - 0.8 z|
    // at z = 0; across actions 2*|0.25 z - 0.2| at z = 0.
    let lipschitz = LipschitzConstants {
        p_mu: 1.6,
        p_s: 1.2,
        p_a: 0.4,
        r_mu: 0.0,
        r_s: 6.5,
        r_a: 1.0,
    };
    let model = GameModel::new(
        FiniteSpace::new(2).unwrap(),
        FiniteSpace::new(2).unwrap(),
        0.95,
        (-7.0, 0.0),
        Some(lipschitz),
        transition,
        reward,
    )
    .unwrap();
    let sbm = SbmModel::new(
        &CONNECTIVITY.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        None,
    )
    .unwrap();
    (model, sbm)
}
