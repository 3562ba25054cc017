/// Ceiling that ignores float noise of a few ulps above an integer, so that
/// e.g. `160 * ln(1/e^-1)` rounds to 160 rather than 161.
pub(crate) fn ceil_tol(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Lower median; sorts a copy.
pub(crate) fn lower_median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_tol_absorbs_rounding_noise() {
        assert_eq!(ceil_tol(160.00000000000003), 160.0);
        assert_eq!(ceil_tol(110.524), 111.0);
        assert_eq!(ceil_tol(3.0), 3.0);
        assert_eq!(ceil_tol(2.5), 3.0);
    }

    #[test]
    fn compensated_sum_of_many_small_terms() {
        let k = 1_000_000;
        let s = compensated_sum(std::iter::repeat_n(1.0 / k as f64, k));
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lower_median_even_and_odd() {
        assert_eq!(lower_median(&[1.0, 100.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(&[7.0]), 7.0);
    }
}
