/// A `side x side` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub side: usize,
    pub data: Vec<f64>,
}

/// Smallest `d` with `d * d >= len`.
pub fn square_side(len: usize) -> usize {
    let mut d = (len as f64).sqrt().ceil() as usize;
    while d * d < len {
        d += 1;
    }
    while d > 0 && (d - 1) * (d - 1) >= len {
        d -= 1;
    }
    d
}

/// Row-major fill into the closest square, zero padded.
pub fn square_wrap(v: &[f64]) -> SquareMatrix {
    let side = square_side(v.len());
    let mut data = vec![0.0; side * side];
    data[..v.len()].copy_from_slice(v);
    SquareMatrix { side, data }
}

pub fn square_unwrap(m: &SquareMatrix, len: usize) -> Vec<f64> {
    m.data[..len].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_wraps_to_three_by_three() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        let m = square_wrap(&v);
        assert_eq!(m.side, 3);
        assert_eq!(m.data[8], 0.0);
        assert_eq!(square_unwrap(&m, 8), v);
    }

    #[test]
    fn nine_needs_no_padding() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        let m = square_wrap(&v);
        assert_eq!(m.side, 3);
        assert_eq!(m.data, v);
    }

    #[test]
    fn sides() {
        assert_eq!(square_side(1), 1);
        assert_eq!(square_side(2), 2);
        assert_eq!(square_side(16), 4);
        assert_eq!(square_side(17), 5);
    }
}
