//! Ground metrics on `R^n` and product metrics on `X × Y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::measures::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    L1,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn dist(self, a: &Point, b: &Point) -> f64 {
        self.distance(a.coords(), b.coords())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::L1 => "l1",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "l1" => Ok(Metric::L1),
            other => Err(format!("unknown metric `{other}` (expected euclidean|l1)")),
        }
    }
}

/// Metric on the product space `X × Y`.
///
/// `Sum` adds the ground metric on `X` to the euclidean norm on `Y`;
/// `EuclidConcat` is the euclidean norm of the concatenated vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductMetric {
    #[default]
    Sum,
    #[serde(rename = "euclid")]
    EuclidConcat,
}

impl ProductMetric {
    pub fn distance(self, x_metric: Metric, x: (&[f64], &[f64]), y: (&[f64], &[f64])) -> f64 {
        match self {
            ProductMetric::Sum => x_metric.distance(x.0, x.1) + Metric::Euclidean.distance(y.0, y.1),
            ProductMetric::EuclidConcat => {
                let dx = Metric::Euclidean.distance(x.0, x.1);
                let dy = Metric::Euclidean.distance(y.0, y.1);
                dx.hypot(dy)
            }
        }
    }
}

impl fmt::Display for ProductMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProductMetric::Sum => "sum",
            ProductMetric::EuclidConcat => "euclid",
        })
    }
}

impl FromStr for ProductMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(ProductMetric::Sum),
            "euclid" | "euclid-concat" => Ok(ProductMetric::EuclidConcat),
            other => Err(format!("unknown product metric `{other}` (expected sum|euclid)")),
        }
    }
}
