use nalgebra::DMatrix;

use super::{Matrix, RngStream};

/// Orthogonal (or semi-orthogonal) `rows × cols` matrix scaled by `gain`.
///
/// A Gaussian matrix is QR-factorized; signs of `diag(R)` are folded into
/// `Q` so the result is uniformly distributed over the orthogonal group.
/// For `rows <= cols` the rows are orthonormal, otherwise the columns are.
pub fn orthogonal_init(rows: usize, cols: usize, gain: f64, rng: &mut RngStream) -> Matrix {
    assert!(rows >= 1 && cols >= 1, "orthogonal_init needs a non-empty shape");
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let draws: Vec<f64> = (0..tall * short).map(|_| rng.normal()).collect();
    let gaussian = DMatrix::from_row_slice(tall, short, &draws);
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            data.push(gain * v);
        }
    }
    Matrix::from_vec(rows, cols, data).expect("orthogonal factor is finite")
}

/// `fan_out × fan_in` matrix with entries uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform_init(fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Matrix {
    assert!(fan_in >= 1 && fan_out >= 1, "xavier_uniform_init needs positive fans");
    let bound = xavier_bound(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.uniform(-bound, bound))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("uniform draws are finite")
}

pub(crate) fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(w: &Matrix, gain: f64) -> f64 {
        let g = w.matmul(&w.transpose()).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let expect = if i == j { gain * gain } else { 0.0 };
                worst = worst.max((g.get(i, j) - expect).abs());
            }
        }
        worst
    }

    #[test]
    fn square_is_orthogonal() {
        let mut rng = RngStream::new(3);
        for &gain in &[1.0, 2f64.sqrt(), 0.01] {
            let w = orthogonal_init(64, 64, gain, &mut rng);
            assert!(gram_error(&w, gain) < 1e-9);
        }
    }

    #[test]
    fn wide_has_orthonormal_rows_and_tall_orthonormal_columns() {
        let mut rng = RngStream::new(4);
        let wide = orthogonal_init(3, 10, 1.0, &mut rng);
        assert!(gram_error(&wide, 1.0) < 1e-9);
        let tall = orthogonal_init(10, 3, 1.0, &mut rng);
        assert!(gram_error(&tall.transpose(), 1.0) < 1e-9);
    }

    #[test]
    fn zero_gain_gives_zero_matrix() {
        let w = orthogonal_init(5, 7, 0.0, &mut RngStream::new(1));
        assert!(w.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn orthogonal_is_deterministic() {
        let a = orthogonal_init(8, 5, 1.0, &mut RngStream::new(11));
        let b = orthogonal_init(8, 5, 1.0, &mut RngStream::new(11));
        assert_eq!(a, b);
    }

    #[test]
    fn xavier_bound_and_support() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        let mut rng = RngStream::new(5);
        let w = xavier_uniform_init(17, 256, &mut rng);
        let b = xavier_bound(17, 256);
        assert_eq!((w.rows(), w.cols()), (256, 17));
        assert!(w.data().iter().all(|v| v.abs() <= b));
        let again = xavier_uniform_init(17, 256, &mut RngStream::new(5));
        assert_eq!(w, again);
    }
}
