use super::{Frame, FrameError, GroupLaw};
use crate::fields::{rat, DilationWeights, PolyVectorField, Polynomial};

/// Heisenberg group `Hᵐ` on `(x₁…x_m, y₁…y_m, t)` with
/// `Xᵢ = ∂_{xᵢ} + (yᵢ/2)∂_t` and `Yᵢ = ∂_{yᵢ} − (xᵢ/2)∂_t`.
pub fn heisenberg(m: usize) -> Frame {
    assert!(m >= 1);
    let n = 2 * m + 1;
    let half = rat(1, 2);
    let mut fields = Vec::with_capacity(2 * m);
    for i in 0..m {
        let mut c = vec![Polynomial::zero(n); n];
        c[i] = Polynomial::one(n);
        c[n - 1] = Polynomial::var(n, m + i).scale(&half);
        fields.push(PolyVectorField::new(c).unwrap());
    }
    for i in 0..m {
        let mut c = vec![Polynomial::zero(n); n];
        c[m + i] = Polynomial::one(n);
        c[n - 1] = Polynomial::var(n, i).scale(&-half.clone());
        fields.push(PolyVectorField::new(c).unwrap());
    }
    let mut sigma = vec![1; n];
    sigma[n - 1] = 2;
    Frame::new(fields, DilationWeights::new(sigma).unwrap()).expect("valid Heisenberg frame")
}

/// `(z*z')_t = t + t' + ½ Σ (x'ᵢyᵢ − xᵢy'ᵢ)`, whose Jacobian basis is the frame of [`heisenberg`] plus `∂_t`.
pub fn heisenberg_group_law(m: usize) -> GroupLaw {
    let n = 2 * m + 1;
    let v = |i: usize| Polynomial::var(2 * n, i);
    let mut product: Vec<Polynomial> = (0..n - 1).map(|j| &v(j) + &v(n + j)).collect();
    let mut t = &v(n - 1) + &v(2 * n - 1);
    let half = rat(1, 2);
    for i in 0..m {
        let (x, y, xp, yp) = (v(i), v(m + i), v(n + i), v(n + m + i));
        t = &t + &(&(&xp * &y) - &(&x * &yp)).scale(&half);
    }
    product.push(t);
    GroupLaw::new(product).expect("valid Heisenberg group law")
}

/// Grushin plane: `X₁ = ∂₁`, `X₂ = x₁∂₂`, weights `(1, 2)`.
pub fn grushin() -> Frame {
    let fields = vec![
        PolyVectorField::partial(2, 0),
        PolyVectorField::parse(&["0", "x1"]).unwrap(),
    ];
    Frame::new(fields, DilationWeights::new(vec![1, 2]).unwrap()).expect("valid Grushin frame")
}

/// Resolves `grushin` or `heisenberg:<m>`.
pub fn frame_from_preset(name: &str) -> Result<Frame, FrameError> {
    if name == "grushin" {
        return Ok(grushin());
    }
    if let Some(m) = name.strip_prefix("heisenberg:") {
        return match m.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(heisenberg(m)),
            _ => Err(FrameError::UnknownPreset(name.to_string())),
        };
    }
    Err(FrameError::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        assert_eq!(frame_from_preset("grushin").unwrap().n(), 2);
        assert_eq!(frame_from_preset("heisenberg:2").unwrap().n(), 5);
        assert!(frame_from_preset("heisenberg:0").is_err());
        assert!(frame_from_preset("euclid").is_err());
    }

    #[test]
    fn heisenberg_frame_is_horizontal_part_of_jacobian_basis() {
        for m in 1..=3 {
            let basis = heisenberg_group_law(m).jacobian_basis();
            let frame = heisenberg(m);
            assert_eq!(&basis[..2 * m], frame.fields());
            assert_eq!(basis[2 * m], PolyVectorField::partial(2 * m + 1, 2 * m));
        }
    }
}
