use nalgebra::SVector;

const INNER_ITERS: usize = 8;
const EPS: f64 = 1e-9;

/// Weighted geometric median by Weiszfeld iterations started at the weighted
/// mean. Points with non-positive weight are ignored; with no usable weight
/// the plain mean is returned.
pub fn geometric_median<const D: usize>(pts: &[SVector<f64, D>], w: &[f64]) -> SVector<f64, D> {
    debug_assert_eq!(pts.len(), w.len());
    let total: f64 = w.iter().filter(|&&x| x > 0.0).sum();
    if pts.is_empty() {
        return SVector::zeros();
    }
    if !(total > 0.0) {
        return pts.iter().sum::<SVector<f64, D>>() / pts.len() as f64;
    }
    let mut m: SVector<f64, D> = pts
        .iter()
        .zip(w)
        .filter(|(_, &x)| x > 0.0)
        .map(|(p, &x)| p * x)
        .sum::<SVector<f64, D>>()
        / total;
    for _ in 0..INNER_ITERS {
        let mut num = SVector::<f64, D>::zeros();
        let mut den = 0.0;
        for (p, &x) in pts.iter().zip(w) {
            if x <= 0.0 {
                continue;
            }
            let k = x / (p - m).norm().max(EPS);
            num += p * k;
            den += k;
        }
        let next = num / den;
        let step = (next - m).norm();
        m = next;
        if step < EPS {
            break;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn identical_points_are_a_fixed_point() {
        let p = vec![Vector2::new(0.3, -0.2); 5];
        assert!((geometric_median(&p, &[1.0; 5]) - p[0]).norm() < 1e-15);
    }

    #[test]
    fn rejects_an_outlier() {
        let mut p: Vec<Vector2<f64>> = (0..9).map(|i| Vector2::new(i as f64 * 1e-3, 0.0)).collect();
        p.push(Vector2::new(100.0, 100.0));
        let m = geometric_median(&p, &[1.0; 10]);
        assert!(m.norm() < 0.05, "{m}");
    }

    #[test]
    fn zero_weights_fall_back_to_mean() {
        let p = vec![Vector2::new(0.0, 0.0), Vector2::new(2.0, 0.0)];
        assert_eq!(geometric_median(&p, &[0.0, 0.0]), Vector2::new(1.0, 0.0));
    }
}
