#![allow(dead_code)]

use ancova_core::rng::Stream;
use ancova_core::TrialDataset;

/// Random heteroscedastic dataset with `k` covariates; arms drawn with
/// probability `pi`, both arms guaranteed non-empty.
pub fn random_dataset(seed: u64, n: usize, k: usize, pi: f64) -> TrialDataset {
    let mut s = Stream::new(seed, 0xdead_beef);
    let mut arms: Vec<u8> = (0..n).map(|_| u8::from(s.next_f64() < pi)).collect();
    arms[0] = 1;
    arms[1] = 0;
    let mut w = Vec::with_capacity(n * k);
    let mut y = Vec::with_capacity(n);
    for &a in &arms {
        let row: Vec<f64> = (0..k).map(|_| 4.0 * s.next_f64() - 2.0).collect();
        let slope = if a == 1 { 1.5 } else { -0.5 };
        let sd = if a == 1 { 0.5 } else { 2.0 };
        let mean = 0.3 * f64::from(a) + row.iter().map(|x| slope * x + 0.2 * x * x).sum::<f64>();
        y.push(mean + sd * s.standard_normal());
        w.extend(row);
    }
    let names = (1..=k).map(|j| format!("W{j}")).collect();
    TrialDataset::new(y, arms, w, names).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `||M A||^2` with `M` the projection off `[1, W]`, by modified
/// Gram-Schmidt.
pub fn projected_arm_norm(data: &TrialDataset) -> f64 {
    let n = data.n();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut columns = vec![vec![1.0; n]];
    for j in 0..data.k() {
        columns.push(data.covariate_column(j));
    }
    for mut c in columns {
        for b in &basis {
            let d: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in c.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(c.into_iter().map(|x| x / norm).collect());
    }
    let mut a: Vec<f64> = data.arms().iter().map(|&v| f64::from(v)).collect();
    for b in &basis {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in a.iter_mut().zip(b) {
            *x -= d * y;
        }
    }
    a.iter().map(|x| x * x).sum()
}
