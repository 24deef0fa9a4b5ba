/// Number of batches used for batch-means confidence intervals.
pub const BATCHES: usize = 20;

// Two-sided 95% Student-t quantile with BATCHES - 1 = 19 degrees of freedom.
const T_975_DF19: f64 = 2.093_024_054_408_263;

/// 95% half-width from non-overlapping batch means. `None` when there are
/// fewer samples than batches. Trailing samples that do not fill a batch are
/// left out of the interval (they still count in the point estimate).
pub fn batch_means_half_width(samples: &[f64]) -> Option<f64> {
    let size = samples.len() / BATCHES;
    if size == 0 {
        return None;
    }
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Some(T_975_DF19 * (var / BATCHES as f64).sqrt())
}

pub fn mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        Some(samples.iter().sum::<f64>() / samples.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_samples() {
        assert_eq!(batch_means_half_width(&[1.0; 19]), None);
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        assert_eq!(batch_means_half_width(&[3.0; 400]), Some(0.0));
    }

    #[test]
    fn known_batch_spread() {
        // batch k (k = 0..20) holds the value k; batch-mean sd = sqrt(35)
        let samples: Vec<f64> = (0..20).flat_map(|k| [k as f64; 5]).collect();
        let hw = batch_means_half_width(&samples).unwrap();
        let expected = T_975_DF19 * (35.0f64 / 20.0).sqrt();
        assert!((hw - expected).abs() < 1e-12);
    }
}
