use std::f64::consts::PI;

/// Orthonormal DCT-II.
pub fn dct2_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / nf).sqrt()
            } else {
                (2.0 / nf).sqrt()
            };
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Orthonormal DCT-III, the inverse of [`dct2_ortho`].
pub fn dct3_ortho(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let scale = if k == 0 {
                        (1.0 / nf).sqrt()
                    } else {
                        (2.0 / nf).sqrt()
                    };
                    scale * v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_maps_to_dc_only() {
        let c = dct2_ortho(&[3.0; 8]);
        assert!((c[0] - 3.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn dct_round_trip(x in prop::collection::vec(-50.0f64..50.0, 1..64)) {
            let back = dct3_ortho(&dct2_ortho(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn dct_preserves_energy(x in prop::collection::vec(-10.0f64..10.0, 1..64)) {
            let e1: f64 = x.iter().map(|v| v * v).sum();
            let e2: f64 = dct2_ortho(&x).iter().map(|v| v * v).sum();
            prop_assert!((e1 - e2).abs() < 1e-9 * (1.0 + e1));
        }
    }
}
