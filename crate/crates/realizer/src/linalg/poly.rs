//! Roots of real monic polynomials (Durand-Kerner) and unit-disc reflection.

/// Roots of `z^d + c[0] z^{d-1} + ... + c[d-1]` as (re, im) pairs.
///
/// Durand-Kerner iteration from a fixed starting configuration; the result
/// is deterministic for a given coefficient vector.
pub fn monic_roots(c: &[f64]) -> Vec<(f64, f64)> {
    let d = c.len();
    if d == 0 {
        return Vec::new();
    }
    if d == 1 {
        return vec![(-c[0], 0.0)];
    }
    // radius bound: 1 + max |c_i|
    let r = 1.0 + c.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut z: Vec<(f64, f64)> = (0..d)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            (0.9 * r * ang.cos(), 0.9 * r * ang.sin())
        })
        .collect();

    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for j in 0..d {
            let pj = eval(c, z[j]);
            let mut denom = (1.0, 0.0);
            for k in 0..d {
                if k != j {
                    denom = cmul(denom, csub(z[j], z[k]));
                }
            }
            let dn = denom.0 * denom.0 + denom.1 * denom.1;
            if dn == 0.0 {
                // perturb coincident estimates deterministically
                z[j].0 += 1e-8 * (j as f64 + 1.0);
                continue;
            }
            let step = cdiv(pj, denom);
            z[j] = csub(z[j], step);
            let mag = (step.0 * step.0 + step.1 * step.1).sqrt();
            max_step = max_step.max(mag / (1.0 + cabs(z[j])));
        }
        if max_step < 1e-14 {
            break;
        }
    }
    // canonical order: by real part then imaginary part
    z.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    z
}

/// Largest root magnitude of `z^d + c[0] z^{d-1} + ... + c[d-1]`.
pub fn max_root_magnitude(c: &[f64]) -> f64 {
    monic_roots(c).iter().map(|z| cabs(*z)).fold(0.0, f64::max)
}

/// Reflect roots with |z| > 1 to 1/conj(z) and rebuild real coefficients.
/// Identity on polynomials that already have all roots in the closed disc.
pub fn reflect_into_unit_disc(c: &[f64]) -> Vec<f64> {
    let roots = monic_roots(c);
    if roots.iter().all(|z| cabs(*z) <= 1.0) {
        return c.to_vec();
    }
    let reflected: Vec<(f64, f64)> = roots
        .iter()
        .map(|&z| {
            let m2 = z.0 * z.0 + z.1 * z.1;
            if m2 > 1.0 {
                (z.0 / m2, z.1 / m2) // 1 / conj(z)
            } else {
                z
            }
        })
        .collect();
    // product of (z - r_i); conjugate pairs keep coefficients real
    let mut coeffs: Vec<(f64, f64)> = vec![(1.0, 0.0)];
    for r in reflected {
        let mut next = vec![(0.0, 0.0); coeffs.len() + 1];
        for (i, &ci) in coeffs.iter().enumerate() {
            next[i] = cadd(next[i], ci);
            next[i + 1] = csub(next[i + 1], cmul(ci, r));
        }
        coeffs = next;
    }
    coeffs.iter().skip(1).map(|z| z.0).collect()
}

fn eval(c: &[f64], z: (f64, f64)) -> (f64, f64) {
    let mut acc = (1.0, 0.0);
    for &ci in c {
        acc = cadd(cmul(acc, z), (ci, 0.0));
    }
    acc
}

fn cadd(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn csub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cdiv(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn cabs(a: (f64, f64)) -> f64 {
    (a.0 * a.0 + a.1 * a.1).sqrt()
}
