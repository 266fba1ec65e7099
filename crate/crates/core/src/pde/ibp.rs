use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::CompiledField;
use crate::hoermander::Frame;

use super::grid::BoxDomain;
use super::PdeError;

/// Accepted band for `defect(h) / defect(h/2)`.
pub const IBP_RATIO: (f64, f64) = (1.75, 2.25);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpTrial {
    pub defects: Vec<f64>,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    pub passes: bool,
    /// Spacing of each level (first axis).
    pub h: Vec<f64>,
    pub trials: Vec<IbpTrial>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// `u ↦ Xᵢu` by the upwinded one-sided stencil of the scheme, at every node whose
/// stencil stays in the box; zero elsewhere.
fn apply_first_order(field: &CompiledField, d: &BoxDomain, u: &[f64], out: &mut [f64]) {
    let n = d.dim();
    let h = d.spacing();
    let mut idx = vec![0i64; n];
    let mut x = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut nb = vec![0i64; n];
    for (lin, o) in out.iter_mut().enumerate() {
        d.unravel(lin, &mut idx);
        d.coord(&idx, &h, &mut x);
        field.eval_into(&x, &mut a);
        let mut acc = 0.0;
        let mut inside = true;
        for k in 0..n {
            if a[k] == 0.0 {
                continue;
            }
            let s: i64 = if a[k] > 0.0 { 1 } else { -1 };
            nb.copy_from_slice(&idx);
            nb[k] += s;
            if nb[k] < 0 || nb[k] > d.cells[k] as i64 {
                inside = false;
                break;
            }
            acc += a[k].abs() * (u[d.ravel(&nb)] - u[lin]) / h[k];
        }
        *o = if inside { acc } else { 0.0 };
    }
}

/// `Σᵢ |Σ_nodes (v Xᵢu + u Xᵢv) |cell||` for divergence-free `Xᵢ`; vanishes in the
/// continuum when `u, v` have compact support in the box.
pub fn ibp_defect(frame: &Frame, d: &BoxDomain, u: impl Fn(&[f64]) -> f64, v: impl Fn(&[f64]) -> f64) -> f64 {
    let uf = super::grid::GridField::from_fn(d, u).values;
    let vf = super::grid::GridField::from_fn(d, v).values;
    let cell: f64 = d.spacing().iter().product();
    let mut xu = vec![0.0; uf.len()];
    let mut xv = vec![0.0; uf.len()];
    frame
        .fields()
        .iter()
        .map(|f| {
            let c = f.compile();
            apply_first_order(&c, d, &uf, &mut xu);
            apply_first_order(&c, d, &vf, &mut xv);
            let s: f64 = (0..uf.len()).map(|p| vf[p] * xu[p] + uf[p] * xv[p]).sum();
            (s * cell).abs()
        })
        .sum()
}

/// Smooth bump `exp(1 − 1/(1 − s²))` on `s = |x − c| / r < 1`.
fn bump(c: &[f64], r: f64, x: &[f64]) -> f64 {
    let s2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (r * r);
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// Discrete integration by parts for the first-order stencil: for pairs of
/// overlapping bumps the defect is `O(h)`, so it halves under each refinement of
/// `dom` (cells doubled `levels − 1` times).
pub fn discrete_ibp_test(
    frame: &Frame,
    dom: &BoxDomain,
    levels: usize,
    trials: usize,
    seed: u64,
) -> Result<IbpReport, PdeError> {
    let n = frame.n();
    if dom.dim() != n {
        return Err(PdeError::Dimension {
            expected: n,
            found: dom.dim(),
        });
    }
    if levels < 2 || trials == 0 {
        return Err(PdeError::Config("need at least two levels and one trial".into()));
    }
    if frame.fields().iter().any(|f| !f.divergence().is_zero()) {
        return Err(PdeError::Config(
            "integration by parts needs divergence-free fields".into(),
        ));
    }
    let grids: Vec<BoxDomain> = (0..levels)
        .map(|l| {
            BoxDomain::new(
                dom.lo.clone(),
                dom.hi.clone(),
                dom.cells.iter().map(|c| c << l).collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    let mid: Vec<f64> = (0..n).map(|k| 0.5 * (dom.lo[k] + dom.hi[k])).collect();
    let half = (0..n)
        .map(|k| 0.5 * (dom.hi[k] - dom.lo[k]))
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let r = half * rng.gen_range(0.45..0.6);
        let cu: Vec<f64> = mid.iter().map(|m| m + half * rng.gen_range(-0.15..0.15)).collect();
        let cv: Vec<f64> = cu.iter().map(|c| c + 0.2 * r * rng.gen_range(-1.0..1.0)).collect();
        let rv = r * rng.gen_range(0.8..1.0);
        let defects: Vec<f64> = grids
            .iter()
            .map(|g| ibp_defect(frame, g, |x| bump(&cu, r, x), |x| bump(&cv, rv, x)))
            .collect();
        let ratios = defects.windows(2).map(|w| w[0] / w[1]).collect();
        out.push(IbpTrial { defects, ratios });
    }
    let all = out.iter().flat_map(|t| t.ratios.iter().copied());
    let (min_ratio, max_ratio) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
    Ok(IbpReport {
        passes: min_ratio >= IBP_RATIO.0 && max_ratio <= IBP_RATIO.1,
        h: grids.iter().map(|g| g.spacing()[0]).collect(),
        trials: out,
        min_ratio,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoermander::grushin;

    #[test]
    fn compact_support_defect_halves_on_grushin() {
        let dom = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![64, 64]).unwrap();
        let r = discrete_ibp_test(&grushin(), &dom, 3, 3, 7).unwrap();
        assert!(r.passes, "{:?}", r);
    }

    #[test]
    fn zero_function_has_no_defect() {
        let dom = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![16, 16]).unwrap();
        assert_eq!(
            ibp_defect(&grushin(), &dom, |_| 0.0, |x| bump(&[0.0, 0.0], 0.5, x)),
            0.0
        );
    }

    #[test]
    fn constant_partner_sums_to_zero() {
        let dom = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![32, 32]).unwrap();
        let d = ibp_defect(&grushin(), &dom, |x| bump(&[0.1, -0.2], 0.6, x), |_| 1.0);
        assert!(d < 1e-14, "{d}");
    }
}
