//! Open uniform B-spline bases on `[0, 1]`.

/// Non-zero basis functions at one coordinate: `(control index, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1d {
    pub terms: Vec<(usize, f64)>,
    /// The coordinate was outside `[0, 1]` and has been clamped.
    pub clamped: bool,
}

/// Evaluates the `degree`-`m` open uniform B-spline basis with
/// `kernel_size` control points at `u`.
///
/// Returns the `m + 1` consecutive non-zero functions. A kernel of size 1
/// has a single constant basis function.
///
/// # Panics
/// If `kernel_size` is 0, `degree` is 0, or `1 < kernel_size <= degree`.
pub fn bspline_basis(u: f64, degree: usize, kernel_size: usize) -> Basis1d {
    assert!(degree >= 1, "spline degree must be at least 1");
    assert!(
        kernel_size == 1 || kernel_size > degree,
        "kernel size {kernel_size} too small for degree {degree}"
    );
    let clamped = !(0.0..=1.0).contains(&u);
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
    if kernel_size == 1 {
        return Basis1d {
            terms: vec![(0, 1.0)],
            clamped,
        };
    }
    let terms = if degree == 1 {
        let v = u * (kernel_size - 1) as f64;
        let i = (v.floor() as usize).min(kernel_size - 2);
        let frac = v - i as f64;
        vec![(i, 1.0 - frac), (i + 1, frac)]
    } else {
        cox_de_boor(u, degree, kernel_size)
    };
    Basis1d { terms, clamped }
}

/// Knot `j` of the clamped uniform knot vector with `k + m + 1` entries.
fn knot(j: usize, m: usize, k: usize) -> f64 {
    let interior = (k - m) as f64;
    if j <= m {
        0.0
    } else if j >= k {
        1.0
    } else {
        (j - m) as f64 / interior
    }
}

fn cox_de_boor(u: f64, m: usize, k: usize) -> Vec<(usize, f64)> {
    // Knot span containing u; u = 1 belongs to the last non-empty span.
    let mut span = m;
    while span < k - 1 && u >= knot(span + 1, m, k) {
        span += 1;
    }
    let mut n = vec![0.0; m + 1];
    let mut left = vec![0.0; m + 1];
    let mut right = vec![0.0; m + 1];
    n[0] = 1.0;
    for j in 1..=m {
        left[j] = u - knot(span + 1 - j, m, k);
        right[j] = knot(span + j, m, k) - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let tmp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    (0..=m).map(|r| (span - m + r, n[r])).collect()
}

/// Tensor-product basis over two pseudo-coordinate dimensions. Control point
/// `(a, b)` is flattened to `a * kernel_size[1] + b`.
pub fn kernel_basis(u: [f64; 2], degree: usize, kernel_size: [usize; 2]) -> (Vec<(usize, f64)>, bool) {
    let b0 = bspline_basis(u[0], degree, kernel_size[0]);
    let b1 = bspline_basis(u[1], degree, kernel_size[1]);
    let mut out = Vec::with_capacity(b0.terms.len() * b1.terms.len());
    for &(i, wi) in &b0.terms {
        for &(j, wj) in &b1.terms {
            out.push((i * kernel_size[1] + j, wi * wj));
        }
    }
    (out, b0.clamped || b1.clamped)
}
