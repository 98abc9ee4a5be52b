//! Exact policy evaluation under a frozen mean-field ensemble.
//!
//! Action values solve the Bellman expectation equations as a dense linear
//! system (the problem sizes here make a direct solve the natural oracle for
//! the sampling-based learners). The regularized optimal value comes from
//! value iteration with an exact inner maximization per state.

use nalgebra::{DMatrix, DVector};

use crate::game::GameModel;
use crate::population::{aggregated_impact, SbmModel};
use crate::regularizer::{Regularizer, RegularizerKind};
use crate::simplex::{logsumexp, project_to_simplex, softmax_into};
use crate::types::{Distribution, ImpactVector, MeanFieldEnsemble, Policy, PolicyProfile, QTable};
use crate::{Error, Result};

/// Solves q = b + discount * M q where M[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
/// `p_row(s, a)` supplies the transition row; this lets the exact solver and
/// the estimated-kernel solver share one code path.
pub(crate) fn solve_bellman_linear(
    num_states: usize,
    num_actions: usize,
    discount: f64,
    p_row: &mut dyn FnMut(usize, usize, &mut [f64]),
    b: &[f64],
    pi: &Policy,
) -> Result<QTable> {
    let n = num_states * num_actions;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    let mut row = vec![0.0; num_states];
    for s in 0..num_states {
        for a in 0..num_actions {
            let i = s * num_actions + a;
            mat[(i, i)] += 1.0;
            p_row(s, a, &mut row);
            for (s_next, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a_next, &pa) in pi.row(s_next).iter().enumerate() {
                    let j = s_next * num_actions + a_next;
                    mat[(i, j)] -= discount * p * pa;
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(b);
    let lu = mat.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Bellman system".into()))?;
    QTable::from_data(num_states, num_actions, sol.iter().copied().collect())
}

/// Unregularized-at-the-root action values of population `k` under `profile`
/// with the ensemble frozen at `mu`: the reward plus the discounted
/// continuation of the regularized value.
pub fn exact_q(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    mu: &MeanFieldEnsemble,
    k: usize,
) -> Result<QTable> {
    let z = aggregated_impact(sbm, mu, k)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let pi = profile.policy(k);
    let h_pi: Vec<f64> = (0..ns).map(|s| h.eval(pi.row(s))).collect();
    let mut b = vec![0.0; ns * na];
    let mut row = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..na {
            model.transition_into(s, a, z.weights(), &mut row);
            let cont: f64 = row.iter().zip(&h_pi).map(|(p, hh)| p * hh).sum();
            b[s * na + a] = model.reward(k, s, a, z.weights()) + model.discount() * cont;
        }
    }
    solve_bellman_linear(
        ns,
        na,
        model.discount(),
        &mut |s, a, out| model.transition_into(s, a, z.weights(), out),
        &b,
        pi,
    )
}

/// Regularized action values: the bonus for the current state's strategy is
/// paid up front, so Q(s, a) = q(s, a) + h(pi(s)).
pub fn exact_regularized_q(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    mu: &MeanFieldEnsemble,
    k: usize,
) -> Result<QTable> {
    let mut q = exact_q(model, h, sbm, profile, mu, k)?;
    let pi = profile.policy(k);
    for s in 0..q.states() {
        let bonus = h.eval(pi.row(s));
        for a in 0..q.actions() {
            q.set(s, a, q.get(s, a) + bonus);
        }
    }
    Ok(q)
}

/// State values: the policy-average of the regularized action values.
pub fn exact_value(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    mu: &MeanFieldEnsemble,
    k: usize,
) -> Result<Vec<f64>> {
    let q = exact_regularized_q(model, h, sbm, profile, mu, k)?;
    let pi = profile.policy(k);
    Ok((0..q.states())
        .map(|s| {
            pi.row(s)
                .iter()
                .zip(q.row(s))
                .map(|(p, v)| p * v)
                .sum::<f64>()
        })
        .collect())
}

/// Per-state inner maximization of `<u, x> + h(u)` over the simplex.
/// Returns (value, maximizer).
pub(crate) fn regularized_max(h: &Regularizer, x: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    match h.kind {
        RegularizerKind::Entropy if h.scale > 0.0 => {
            let lam = h.scale;
            let scaled: Vec<f64> = x.iter().map(|v| v / lam).collect();
            let value = lam * logsumexp(&scaled);
            let mut u = vec![0.0; n];
            softmax_into(&scaled, &mut u);
            (value, u)
        }
        RegularizerKind::NegSquaredL2 if h.scale > 0.0 => {
            // <u,x> + lam(1 - ||u||^2) = -lam ||u - x/(2 lam)||^2 + const:
            // the maximizer is the projection of x/(2 lam); polish it with
            // projected ascent (step 1/(2 lam)) to the stated tolerance.
            let lam = h.scale;
            let mut u: Vec<f64> = x.iter().map(|v| v / (2.0 * lam)).collect();
            project_to_simplex(&mut u);
            let step = 1.0 / (2.0 * lam);
            for _ in 0..1000 {
                let mut next: Vec<f64> = u
                    .iter()
                    .zip(x)
                    .map(|(ui, xi)| ui + step * (xi - 2.0 * lam * ui))
                    .collect();
                project_to_simplex(&mut next);
                let moved: f64 = next
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                u = next;
                if moved <= 1e-10 {
                    break;
                }
            }
            let val: f64 = u.iter().zip(x).map(|(ui, xi)| ui * xi).sum::<f64>() + h.eval(&u);
            (val, u)
        }
        _ => {
            // hard maximum, ties to the lowest action index
            let mut best = 0;
            for (i, &v) in x.iter().enumerate() {
                if v > x[best] {
                    best = i;
                }
            }
            let mut u = vec![0.0; n];
            u[best] = 1.0;
            (x[best], u)
        }
    }
}

/// Regularized optimal state values and a maximizing policy for population
/// `k` with the ensemble frozen at `mu`, by value iteration to sup-norm
/// change `tol`.
pub fn best_response(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    mu: &MeanFieldEnsemble,
    k: usize,
    tol: f64,
) -> Result<(Vec<f64>, Policy, usize)> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be > 0".into()));
    }
    let z = aggregated_impact(sbm, mu, k)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let gamma = model.discount();
    let mut v = vec![0.0; ns];
    let mut x = vec![0.0; na];
    let mut row = vec![0.0; ns];
    let max_sweeps = 10_000_000usize;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        let mut v_new = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                model.transition_into(s, a, z.weights(), &mut row);
                let cont: f64 = row.iter().zip(&v).map(|(p, vv)| p * vv).sum();
                x[a] = model.reward(k, s, a, z.weights()) + gamma * cont;
            }
            let (val, _) = regularized_max(h, &x);
            delta = delta.max((val - v[s]).abs());
            v_new[s] = val;
        }
        v = v_new;
        if delta <= tol {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::Numerical(
                "best-response value iteration exceeded sweep budget".into(),
            ));
        }
    }
    // extract the maximizing policy from the final values
    let mut rows = Vec::with_capacity(ns);
    for s in 0..ns {
        for a in 0..na {
            model.transition_into(s, a, z.weights(), &mut row);
            let cont: f64 = row.iter().zip(&v).map(|(p, vv)| p * vv).sum();
            x[a] = model.reward(k, s, a, z.weights()) + gamma * cont;
        }
        let (_, u) = regularized_max(h, &x);
        rows.push(Distribution::new(u)?);
    }
    Ok((v, Policy::from_rows(rows)?, sweeps))
}

/// Sup-norm defect of `q` against one application of the expectation
/// operator for population `k`'s policy (in the regularized-Q form).
pub fn bellman_residual(
    model: &GameModel,
    h: &Regularizer,
    sbm: &SbmModel,
    profile: &PolicyProfile,
    mu: &MeanFieldEnsemble,
    k: usize,
    q: &QTable,
) -> Result<f64> {
    let z = aggregated_impact(sbm, mu, k)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let pi = profile.policy(k);
    let mut row = vec![0.0; ns];
    let mut worst: f64 = 0.0;
    for s in 0..ns {
        let bonus = h.eval(pi.row(s));
        for a in 0..na {
            model.transition_into(s, a, z.weights(), &mut row);
            let mut cont = 0.0;
            for (s_next, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let ev: f64 = pi
                    .row(s_next)
                    .iter()
                    .zip(q.row(s_next))
                    .map(|(pa, qv)| pa * qv)
                    .sum();
                cont += p * ev;
            }
            let t = model.reward(k, s, a, z.weights()) + bonus + model.discount() * cont;
            worst = worst.max((q.get(s, a) - t).abs());
        }
    }
    Ok(worst)
}

/// Convenience: the impact vector for population `k` at ensemble `mu`.
pub fn impact_at(sbm: &SbmModel, mu: &MeanFieldEnsemble, k: usize) -> Result<ImpactVector> {
    aggregated_impact(sbm, mu, k)
}
