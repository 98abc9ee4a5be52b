//! Simplex utilities: Euclidean projection and stable softmax.

/// Projects `v` in place onto the probability simplex, minimizing Euclidean
/// distance (sort-based algorithm).
pub fn project_to_simplex(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n > 0);
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cssv += ui;
        let t = (cssv - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // all entries equal and tiny, or degenerate input: fall back to argmax
        let (idx, _) = v
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .unwrap();
        v.fill(0.0);
        v[idx] = 1.0;
        return;
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// log(sum(exp(x))) computed with the max-shift trick.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// out[i] = exp(x[i] - max) / sum, a valid distribution.
pub fn softmax_into(xs: &[f64], out: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = (x - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_of_point_on_simplex_is_identity() {
        let mut v = vec![0.2, 0.3, 0.5];
        project_to_simplex(&mut v);
        assert!((v[0] - 0.2).abs() < 1e-12);
        assert!((v[1] - 0.3).abs() < 1e-12);
        assert!((v[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projection_lands_on_simplex() {
        let mut v = vec![3.0, -1.0, 0.5];
        project_to_simplex(&mut v);
        let sum: f64 = v.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&x| x >= 0.0));
        // dominant coordinate keeps the mass
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn projection_is_shift_invariant() {
        let mut a = vec![0.1, 0.7, 0.4];
        let mut b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        project_to_simplex(&mut a);
        project_to_simplex(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn logsumexp_matches_direct_sum() {
        let xs = [0.1, -2.0, 1.5];
        let direct: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let xs = [5.0, 1.0, -3.0];
        let mut out = [0.0; 3];
        softmax_into(&xs, &mut out);
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(out[0] > out[1] && out[1] > out[2]);
    }
}
