use std::io::Read;

use serde::{Deserialize, Serialize};

use super::CostError;

/// Efficiency that rises with workload size and saturates:
/// `rate(x) = peak * x / (x + half_point)`, plus a fixed per-invocation `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturatingCurve {
    pub peak: f64,
    pub half_point: f64,
    #[serde(default)]
    pub floor: f64,
}

/// Piecewise-linear rate table, clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableCurve {
    pub table: Vec<(f64, f64)>,
    #[serde(default)]
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curve {
    Saturating(SaturatingCurve),
    Table(TableCurve),
}

impl SaturatingCurve {
    pub fn rate(&self, x: f64) -> f64 {
        if x <= 0.0 {
            if self.half_point == 0.0 {
                self.peak
            } else {
                0.0
            }
        } else {
            self.peak * x / (x + self.half_point)
        }
    }

    /// `floor + x / rate(x)`, which simplifies to `floor + (x + half_point) / peak`.
    pub fn cost(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.floor
        } else {
            self.floor + (x + self.half_point) / self.peak
        }
    }
}

impl TableCurve {
    pub fn rate(&self, x: f64) -> f64 {
        let t = &self.table;
        if x <= t[0].0 {
            return t[0].1;
        }
        if x >= t[t.len() - 1].0 {
            return t[t.len() - 1].1;
        }
        let i = t.partition_point(|p| p.0 <= x);
        let (x0, y0) = t[i - 1];
        let (x1, y1) = t[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

impl Curve {
    pub fn rate(&self, x: f64) -> f64 {
        match self {
            Curve::Saturating(c) => c.rate(x),
            Curve::Table(t) => t.rate(x),
        }
    }

    pub fn floor(&self) -> f64 {
        match self {
            Curve::Saturating(c) => c.floor,
            Curve::Table(t) => t.floor,
        }
    }

    /// Invocation cost (cycles or nJ) of `x` units of work.
    pub fn cost(&self, x: f64) -> f64 {
        match self {
            Curve::Saturating(c) => c.cost(x),
            Curve::Table(t) => {
                if x <= 0.0 {
                    t.floor
                } else {
                    t.floor + x / t.rate(x)
                }
            }
        }
    }

    /// Upper bound on the rate.
    pub fn peak(&self) -> f64 {
        match self {
            Curve::Saturating(c) => c.peak,
            Curve::Table(t) => t.table.iter().map(|p| p.1).fold(0.0, f64::max),
        }
    }

    pub(crate) fn check(&self, path: &str) -> Result<(), CostError> {
        match self {
            Curve::Saturating(c) => {
                if !(c.peak.is_finite() && c.peak > 0.0) {
                    return Err(CostError::NonPositivePeak(format!("{path}.peak")));
                }
                if !(c.half_point.is_finite() && c.half_point >= 0.0) {
                    return Err(CostError::Invalid(format!(
                        "{path}.half_point must be >= 0"
                    )));
                }
                if !(c.floor.is_finite() && c.floor >= 0.0) {
                    return Err(CostError::Invalid(format!("{path}.floor must be >= 0")));
                }
            }
            Curve::Table(t) => {
                if t.table.is_empty() {
                    return Err(CostError::Invalid(format!("{path}.table is empty")));
                }
                if let Some((i, _)) = t
                    .table
                    .iter()
                    .enumerate()
                    .find(|(_, p)| !(p.1.is_finite() && p.1 > 0.0))
                {
                    return Err(CostError::NonPositivePeak(format!("{path}.table[{i}]")));
                }
                if t.table.iter().any(|p| !p.0.is_finite() || p.0 < 0.0)
                    || t.table.windows(2).any(|w| w[0].0 >= w[1].0)
                {
                    return Err(CostError::Invalid(format!(
                        "{path}.table workloads must be nonnegative and strictly ascending"
                    )));
                }
                if !(t.floor.is_finite() && t.floor >= 0.0) {
                    return Err(CostError::Invalid(format!("{path}.floor must be >= 0")));
                }
            }
        }
        Ok(())
    }
}

/// Result of [`fit_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub curve: SaturatingCurve,
    /// Root-mean-square relative error of the fitted rates.
    pub rms_relative_residual: f64,
    pub max_relative_residual: f64,
    /// Set when the rms residual exceeds [`FitReport::RESIDUAL_THRESHOLD`]:
    /// the data do not look like a saturating curve.
    pub flagged: bool,
}

impl FitReport {
    pub const RESIDUAL_THRESHOLD: f64 = 0.05;
}

fn residuals(samples: &[(f64, f64)], peak: f64, half: f64) -> impl Iterator<Item = f64> + '_ {
    samples
        .iter()
        .map(move |&(x, y)| peak * x / ((x + half) * y) - 1.0)
}

fn sse(samples: &[(f64, f64)], peak: f64, half: f64) -> f64 {
    residuals(samples, peak, half).map(|r| r * r).sum()
}

/// Best peak for a fixed half point (the model is linear in peak).
fn best_peak(samples: &[(f64, f64)], half: f64) -> f64 {
    let (num, den) = samples.iter().fold((0.0, 0.0), |(n, d), &(x, y)| {
        let a = x / ((x + half) * y);
        (n + a, d + a * a)
    });
    num / den
}

/// Fits `peak * x / (x + half_point)` to `(workload, rate)` samples by least
/// squares on relative error. The double-reciprocal line gives the starting
/// point, Gauss-Newton refines it; `half_point` is kept nonnegative.
pub fn fit_curve(samples: &[(f64, f64)]) -> Result<FitReport, CostError> {
    if samples.len() < 3 {
        return Err(CostError::InvalidSamples(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if let Some(&(x, y)) = samples
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0))
    {
        return Err(CostError::InvalidSamples(format!(
            "workloads and rates must be positive and finite, got ({x}, {y})"
        )));
    }
    let x0 = samples[0].0;
    if samples.iter().all(|s| s.0 == x0) {
        return Err(CostError::DegenerateSamples);
    }

    // 1/y = 1/peak + (half/peak) * (1/x)
    let n = samples.len() as f64;
    let (su, sv, suu, suv) = samples.iter().fold((0.0, 0.0, 0.0, 0.0), |a, &(x, y)| {
        let (u, v) = (1.0 / x, 1.0 / y);
        (a.0 + u, a.1 + v, a.2 + u * u, a.3 + u * v)
    });
    let slope = (n * suv - su * sv) / (n * suu - su * su);
    let intercept = (sv - slope * su) / n;
    let mut half = if intercept > 0.0 && slope > 0.0 {
        slope / intercept
    } else {
        0.0
    };
    let mut peak = best_peak(samples, half);
    let mut err = sse(samples, peak, half);

    for _ in 0..200 {
        // normal equations of the 2x2 Gauss-Newton step
        let (mut jtj, mut jtr) = ([0.0f64; 3], [0.0f64; 2]);
        for &(x, y) in samples {
            let d = (x + half) * y;
            let r = peak * x / d - 1.0;
            let jp = x / d;
            let jh = -peak * x / (d * (x + half));
            jtj[0] += jp * jp;
            jtj[1] += jp * jh;
            jtj[2] += jh * jh;
            jtr[0] += jp * r;
            jtr[1] += jh * r;
        }
        let det = jtj[0] * jtj[2] - jtj[1] * jtj[1];
        if !det.is_finite() || det.abs() < f64::MIN_POSITIVE {
            break;
        }
        let dp = -(jtj[2] * jtr[0] - jtj[1] * jtr[1]) / det;
        let dh = -(jtj[0] * jtr[1] - jtj[1] * jtr[0]) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let (p2, h2) = (peak + t * dp, (half + t * dh).max(0.0));
            if p2 > 0.0 {
                let e2 = sse(samples, p2, h2);
                if e2 < err {
                    let step = ((p2 - peak) / peak)
                        .abs()
                        .max((h2 - half).abs() / half.max(1.0));
                    peak = p2;
                    half = h2;
                    err = e2;
                    improved = step > 1e-15;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let rs: Vec<f64> = residuals(samples, peak, half).collect();
    let rms = (rs.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    let max = rs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(FitReport {
        curve: SaturatingCurve {
            peak,
            half_point: half,
            floor: 0.0,
        },
        rms_relative_residual: rms,
        max_relative_residual: max,
        flagged: rms > FitReport::RESIDUAL_THRESHOLD,
    })
}

/// Reads `workload,rate` rows (header required).
pub fn read_calibration_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, CostError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CostError::Parse(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["workload", "rate"] {
        return Err(CostError::Parse(format!(
            "expected header `workload,rate`, found `{}`",
            names.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
        out.push(rec.map_err(|e| CostError::Parse(format!("row {}: {e}", i + 2)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(peak: f64, half: f64) -> Vec<(f64, f64)> {
        [10.0, 30.0, 100.0, 300.0, 1000.0, 5000.0]
            .iter()
            .map(|&x| (x, peak * x / (x + half)))
            .collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let r = fit_curve(&synth(2.0, 100.0)).unwrap();
        assert!((r.curve.peak - 2.0).abs() / 2.0 < 1e-6, "{:?}", r);
        assert!((r.curve.half_point - 100.0).abs() / 100.0 < 1e-6, "{:?}", r);
        assert!(!r.flagged);
    }

    #[test]
    fn degenerate_and_invalid_samples() {
        let same = vec![(5.0, 1.0), (5.0, 1.1), (5.0, 0.9)];
        assert!(matches!(
            fit_curve(&same),
            Err(CostError::DegenerateSamples)
        ));
        assert!(matches!(
            fit_curve(&[(1.0, 1.0), (2.0, 1.0)]),
            Err(CostError::InvalidSamples(_))
        ));
        assert!(matches!(
            fit_curve(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]),
            Err(CostError::InvalidSamples(_))
        ));
    }

    #[test]
    fn decreasing_data_is_flagged() {
        let s: Vec<_> = (1..=8)
            .map(|i| (i as f64 * 100.0, 10.0 / i as f64))
            .collect();
        let r = fit_curve(&s).unwrap();
        assert!(r.flagged, "{r:?}");
        assert!(r.curve.half_point >= 0.0);
    }

    #[test]
    fn table_interpolation_clamps() {
        let t = Curve::Table(TableCurve {
            table: vec![(10.0, 1.0), (20.0, 3.0)],
            floor: 0.0,
        });
        assert_eq!(t.rate(0.0), 1.0);
        assert_eq!(t.rate(15.0), 2.0);
        assert_eq!(t.rate(100.0), 3.0);
        assert_eq!(t.cost(15.0), 7.5);
    }

    #[test]
    fn csv_ingestion() {
        let text = "workload,rate\n10,1.5\n20,2.0\n";
        assert_eq!(
            read_calibration_csv(text.as_bytes()).unwrap(),
            vec![(10.0, 1.5), (20.0, 2.0)]
        );
        assert!(read_calibration_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_calibration_csv("workload,rate\n1,abc\n".as_bytes()).is_err());
    }
}
