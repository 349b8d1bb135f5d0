//! Exact fractional Gaussian noise.
//!
//! Circulant embedding of the fGn autocovariance (Davies-Harte / Wood-Chan)
//! is the main path. If the embedding has a negative eigenvalue the
//! Durbin-Levinson recursion is used instead; it is exact but O(n^2).

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{check, FlowError};

/// Autocovariance of unit-variance fGn at integer lag `k`.
pub(crate) fn autocovariance(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Smallest even size >= `target` whose only prime factors are 2, 3 and 5.
fn embedding_size(target: usize) -> usize {
    let mut m = target.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Unit-variance fGn sample of length `n` with Hurst exponent `hurst`.
pub fn fgn<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>, FlowError> {
    check("H_s", hurst, hurst > 0.0 && hurst < 1.0, "0 < H < 1")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![rng.sample(StandardNormal)]);
    }
    match circulant(n, hurst, rng) {
        Some(x) => Ok(x),
        None => fgn_levinson(n, hurst, rng),
    }
}

fn circulant<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Option<Vec<f64>> {
    let m = embedding_size(2 * (n - 1));
    let half = m / 2;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex::new(autocovariance(lag, hurst), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let max_eig = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
    if row.iter().any(|c| c.re < -1e-10 * max_eig) {
        return None;
    }
    let scale = 1.0 / m as f64;
    for c in row.iter_mut() {
        let w = (c.re.max(0.0) * scale).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *c = Complex::new(w * re, w * im);
    }
    fft.process(&mut row);
    // Real and imaginary parts are independent draws with the target
    // covariance; keep the real part.
    row.truncate(n);
    Some(row.into_iter().map(|c| c.re).collect())
}

/// Sequential exact generator (Durbin-Levinson / Hosking).
pub fn fgn_levinson<R: Rng + ?Sized>(n: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>, FlowError> {
    check("H_s", hurst, hurst > 0.0 && hurst < 1.0, "0 < H < 1")?;
    let gamma: Vec<f64> = (0..n).map(|k| autocovariance(k, hurst)).collect();
    let mut out = Vec::with_capacity(n);
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut prev: Vec<f64> = Vec::with_capacity(n);
    let mut var = gamma[0];
    for t in 0..n {
        let mean: f64 = phi.iter().zip(out.iter().rev()).map(|(p, x)| p * x).sum();
        let z: f64 = rng.sample(StandardNormal);
        out.push(mean + var.sqrt() * z);
        if t + 1 == n {
            break;
        }
        // extend the predictor to order t+1
        let num = gamma[t + 1] - phi.iter().enumerate().map(|(j, p)| p * gamma[t - j]).sum::<f64>();
        let k = num / var;
        prev.clear();
        prev.extend_from_slice(&phi);
        for j in 0..phi.len() {
            phi[j] = prev[j] - k * prev[prev.len() - 1 - j];
        }
        phi.push(k);
        var *= 1.0 - k * k;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_acf(x: &[f64], lag: usize) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let cov = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / (n - lag) as f64;
        cov / var
    }

    #[test]
    fn embedding_sizes_are_smooth_and_even() {
        assert_eq!(embedding_size(2), 2);
        assert_eq!(embedding_size(14), 16);
        assert_eq!(embedding_size(4_799_998), 4_800_000);
        assert_eq!(embedding_size(1), 2);
    }

    #[test]
    fn white_noise_at_half() {
        for k in 1..10 {
            assert!(autocovariance(k, 0.5).abs() < 1e-12);
        }
        assert!((autocovariance(0, 0.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circulant_matches_target_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 0.8;
        let x = fgn(400_000, h, &mut rng).unwrap();
        for lag in [1, 2, 5, 20] {
            let want = autocovariance(lag, h);
            let got = sample_acf(&x, lag);
            assert!((got - want).abs() < 0.02, "lag {lag}: {got} vs {want}");
        }
    }

    #[test]
    fn levinson_matches_target_autocorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 0.75;
        let mut acc = [0.0; 3];
        let reps = 40;
        for _ in 0..reps {
            let x = fgn_levinson(2000, h, &mut rng).unwrap();
            for (i, lag) in [1, 3, 10].into_iter().enumerate() {
                acc[i] += sample_acf(&x, lag) / reps as f64;
            }
        }
        for (i, lag) in [1, 3, 10].into_iter().enumerate() {
            let want = autocovariance(lag, h);
            // short series bias the sample acf down a little
            assert!((acc[i] - want).abs() < 0.05, "lag {lag}: {} vs {want}", acc[i]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = fgn(1000, 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = fgn(1000, 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(fgn(1, 0.7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().len(), 1);
        assert!(fgn(10, 1.0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }
}
