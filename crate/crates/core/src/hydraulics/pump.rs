use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PumpCurveError {
    #[error("pump curve has no points")]
    Empty,
    #[error("pump curve must have increasing flows and decreasing heads")]
    NonMonotone,
    #[error("pump curve points must have positive flow and head")]
    NonPositive,
    #[error("power-law fit produced exponent {0}")]
    BadExponent(f64),
}

/// Head gain `h0 - c * q^m` at nominal speed; at relative speed ω the
/// affinity laws give `ω² h0 - c ω^(2-m) q^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCurve {
    pub shutoff_head: f64,
    pub coefficient: f64,
    pub exponent: f64,
}

impl PumpCurve {
    /// Fit a power curve to (flow, head) points given in SI.
    ///
    /// A single design point uses the usual convention of a shutoff head of
    /// 4/3 the design head and a quadratic law. Three points starting at zero
    /// flow are interpolated exactly. Any other shape is fitted by least
    /// squares on `ln(h0 - h) = ln c + m ln q`, with `h0` taken from the
    /// zero-flow point or extrapolated linearly from the first two points.
    pub fn fit(points: &[(f64, f64)]) -> Result<PumpCurve, PumpCurveError> {
        if points.is_empty() {
            return Err(PumpCurveError::Empty);
        }
        if points.iter().any(|&(q, h)| q < 0.0 || h < 0.0) {
            return Err(PumpCurveError::NonPositive);
        }
        if points
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0 && w[1].1 < w[0].1))
        {
            return Err(PumpCurveError::NonMonotone);
        }
        if let [(q1, h1)] = *points {
            if q1 <= 0.0 || h1 <= 0.0 {
                return Err(PumpCurveError::NonPositive);
            }
            let h0 = 4.0 / 3.0 * h1;
            return Ok(PumpCurve {
                shutoff_head: h0,
                coefficient: (h0 - h1) / (q1 * q1),
                exponent: 2.0,
            });
        }
        if let [(q0, h0), (q1, h1), (q2, h2)] = *points {
            if q0 == 0.0 {
                let m = ((h0 - h2) / (h0 - h1)).ln() / (q2 / q1).ln();
                if !(m.is_finite() && m > 0.0) {
                    return Err(PumpCurveError::BadExponent(m));
                }
                return Ok(PumpCurve {
                    shutoff_head: h0,
                    coefficient: (h0 - h1) / q1.powf(m),
                    exponent: m,
                });
            }
        }

        let h0 = if points[0].0 == 0.0 {
            points[0].1
        } else {
            let (qa, ha) = points[0];
            let (qb, hb) = points[1];
            ha + (ha - hb) / (qb - qa) * qa
        };
        let fit_points: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.0 > 0.0)
            .map(|&(q, h)| (q.ln(), (h0 - h).ln()))
            .collect();
        if fit_points.iter().any(|p| !p.1.is_finite()) {
            return Err(PumpCurveError::NonMonotone);
        }
        let (m, ln_c) = if let [(x, y)] = fit_points[..] {
            (2.0, y - 2.0 * x)
        } else {
            let n = fit_points.len() as f64;
            let mx = fit_points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = fit_points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = fit_points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = fit_points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let m = sxy / sxx;
            (m, my - m * mx)
        };
        if !(m.is_finite() && m > 0.0) {
            return Err(PumpCurveError::BadExponent(m));
        }
        Ok(PumpCurve {
            shutoff_head: h0,
            coefficient: ln_c.exp(),
            exponent: m,
        })
    }

    /// Head gain at flow `q >= 0` and relative speed `speed`.
    pub fn head_gain(&self, q: f64, speed: f64) -> f64 {
        speed * speed * self.shutoff_head
            - self.coefficient * speed.powf(2.0 - self.exponent) * q.powf(self.exponent)
    }
}
