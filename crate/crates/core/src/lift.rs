/// Corotational lift of a radial value to the sphere `S^d ⊂ R^{d+1}`:
/// `(sin(|X| u) X/|X|, cos(|X| u))`, the north pole at `X = 0`.
pub fn corotational_lift(u_value: f64, x: &[f64]) -> Vec<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut out = vec![0.0; x.len() + 1];
    if r == 0.0 {
        out[x.len()] = 1.0;
        return out;
    }
    let (s, c) = (r * u_value).sin_cos();
    for (o, xi) in out.iter_mut().zip(x) {
        *o = s * xi / r;
    }
    out[x.len()] = c;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poles_and_equator() {
        assert_eq!(
            corotational_lift(0.0, &[0.3, -1.0, 2.0]),
            vec![0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(
            corotational_lift(5.0, &[0.0, 0.0, 0.0]),
            vec![0.0, 0.0, 0.0, 1.0]
        );
        let x = [1.0, 1.0, 0.0];
        let u = std::f64::consts::FRAC_PI_2 / 2f64.sqrt();
        let p = corotational_lift(u, &x);
        assert!(p[3].abs() < 1e-15);
    }
}
