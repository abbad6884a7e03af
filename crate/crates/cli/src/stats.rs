use serde::Serialize;

/// Median and interquartile range; both absent for an empty sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: Option<f64>,
    pub iqr: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn spread(values: impl IntoIterator<Item = f64>) -> Spread {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return Spread { median: None, iqr: None };
    }
    v.sort_by(f64::total_cmp);
    Spread { median: Some(quantile(&v, 0.5)), iqr: Some(quantile(&v, 0.75) - quantile(&v, 0.25)) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quartiles() {
        let s = spread([4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(s, Spread { median: Some(3.0), iqr: Some(2.0) });
        let s = spread([1.0, 2.0]);
        assert_eq!(s.median, Some(1.5));
        assert_eq!(spread([]), Spread { median: None, iqr: None });
    }
}
