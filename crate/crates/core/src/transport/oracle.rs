use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// `∫ |F_μ(t) - F_ν(t)| dt` for 1-D measures, by sweeping sorted breakpoints.
///
/// Independent of the network simplex path; used to cross-check it.
pub fn w1_1d_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(Error::dims(1, m.dim()));
        }
    }
    let mut events: Vec<(f64, f64)> = mu
        .iter()
        .map(|(p, w)| (p.coords()[0], w))
        .chain(nu.iter().map(|(p, w)| (p.coords()[0], -w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total = 0.0;
    let mut cdf_gap = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: &[f64], w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::from_scalars(v, w).unwrap()
    }

    #[test]
    fn hand_integrals() {
        assert_eq!(w1_1d_oracle(&m(&[0.0], &[1.0]), &m(&[1.0], &[1.0])).unwrap(), 1.0);
        assert_eq!(w1_1d_oracle(&m(&[0.0, 1.0], &[0.5, 0.5]), &m(&[0.0], &[1.0])).unwrap(), 0.5);
        let third = 1.0 / 3.0;
        let a = m(&[0.0, third, 2.0 * third], &[third; 3]);
        let b = m(&[third, 2.0 * third, 1.0], &[third; 3]);
        assert!((w1_1d_oracle(&a, &b).unwrap() - third).abs() < 1e-15);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let p = crate::measures::Point::new(vec![0.0, 0.0]).unwrap();
        let d2 = DiscreteMeasure::dirac(p);
        assert!(w1_1d_oracle(&d2, &d2).is_err());
    }
}
