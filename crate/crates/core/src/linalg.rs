//! Small slice helpers with a fixed (ascending index) summation order.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `max(0, z)`, propagating NaN.
pub fn relu(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        z
    }
}

/// `sgn` with `sgn(0) = 0`; a zero prediction never matches a label.
pub fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Median of a non-empty slice (mean of the two central values for even
/// lengths). NaNs are not expected.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}
