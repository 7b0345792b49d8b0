use super::ContactError;

/// `b(d) = −(d − d̂)² ln(d / d̂)` for `d < d̂`, zero beyond.
/// Returns `(b, b', b'')` in `d`.
pub fn barrier(d: f64, dhat: f64) -> Result<(f64, f64, f64), ContactError> {
    if !(d > 0.0) {
        return Err(ContactError::NonPositiveDistance { distance: d });
    }
    if d >= dhat {
        return Ok((0.0, 0.0, 0.0));
    }
    let r = d - dhat;
    let l = (d / dhat).ln();
    let b = -r * r * l;
    let db = -2.0 * r * l - r * r / d;
    let ddb = -2.0 * l - 4.0 * r / d + r * r / (d * d);
    Ok((b, db, ddb))
}

/// Same barrier as a function of the squared distance `s = d²`.
pub fn barrier_sq(s: f64, dhat: f64) -> Result<(f64, f64, f64), ContactError> {
    let d = s.sqrt();
    let (b, db, ddb) = barrier(d, dhat)?;
    if b == 0.0 && db == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let bs = db / (2.0 * d);
    let bss = (ddb - db / d) / (4.0 * s);
    Ok((b, bs, bss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clamped_at_dhat() {
        assert_eq!(barrier(1e-3, 1e-3).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(barrier(2e-3, 1e-3).unwrap(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn half_dhat_closed_form() {
        let dhat = 1e-3;
        let (b, _, _) = barrier(dhat / 2.0, dhat).unwrap();
        assert_relative_eq!(b, dhat * dhat / 4.0 * 2f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_contact() {
        assert!(barrier(0.0, 1e-3).is_err());
        assert!(barrier(-1.0, 1e-3).is_err());
    }

    #[test]
    fn smooth_at_boundary() {
        let dhat = 1.0;
        let (b, db, ddb) = barrier(dhat * (1.0 - 1e-7), dhat).unwrap();
        assert!(b.abs() < 1e-20 && db.abs() < 1e-12 && ddb.abs() < 1e-6);
    }

    #[test]
    fn squared_form_chain_rule() {
        let dhat = 1e-2;
        let s = 3e-5;
        let (_, bs, bss) = barrier_sq(s, dhat).unwrap();
        let h = 1e-10;
        let f = |s: f64| barrier_sq(s, dhat).unwrap();
        assert_relative_eq!(bs, (f(s + h).0 - f(s - h).0) / (2.0 * h), max_relative = 1e-5);
        assert_relative_eq!(bss, (f(s + h).1 - f(s - h).1) / (2.0 * h), max_relative = 1e-5);
    }
}
