//! Flag value parsers shared by several subcommands.

use std::fmt;

use adalidar::PixelRect;

/// Bad flag values; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Range grid: `a:b:logN` (log-spaced), `a:b:N` (linear) or a comma list.
pub fn range_grid(spec: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || usage(format!("invalid range grid '{spec}'; use a:b:N, a:b:logN or a comma list"));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let (log, n) = match n.trim().strip_prefix("log") {
                Some(rest) => (true, rest),
                None => (false, n.trim()),
            };
            let n: usize = n.parse().map_err(|_| bad())?;
            if log && !(a > 0.0 && b > 0.0) {
                return Err(usage("log-spaced grids need positive end points"));
            }
            (0..n)
                .map(|i| {
                    let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if log {
                        a * (b / a).powf(t)
                    } else {
                        a + t * (b - a)
                    }
                })
                .collect()
        }
        [list] => number_list(list).map_err(|_| bad())?,
        _ => return Err(bad()),
    };
    Ok(values)
}

pub fn number_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("'{t}' is not a number"))))
        .collect()
}

/// `x0,y0,x1,y1` in pixels, half-open.
pub fn rect(s: &str) -> anyhow::Result<PixelRect> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("invalid rectangle '{s}'; expected x0,y0,x1,y1")))?;
    match v.as_slice() {
        &[x0, y0, x1, y1] if x0 < x1 && y0 < y1 => Ok(PixelRect::new(x0, y0, x1, y1)),
        _ => Err(usage(format!("invalid rectangle '{s}'; expected x0,y0,x1,y1 with x0<x1, y0<y1"))),
    }
}

/// `fps:samples`.
pub fn budget_pair(s: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || usage(format!("invalid pair '{s}'; expected fps:samples"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = range_grid("0.5:100:log50").unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[49] - 100.0).abs() < 1e-12);
        assert_eq!(range_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(range_grid("2,4.5").unwrap(), vec![2.0, 4.5]);
        assert!(range_grid("1:2:0").unwrap().is_empty());
        assert!(range_grid("0:2:log4").is_err());
        assert!(range_grid("a:b").is_err());
    }

    #[test]
    fn rects_and_pairs() {
        assert_eq!(rect("1,2,30,40").unwrap(), PixelRect::new(1, 2, 30, 40));
        assert!(rect("5,5,5,9").is_err());
        assert_eq!(budget_pair("30:28").unwrap(), (30.0, 28.0));
        assert!(budget_pair("30").is_err());
    }
}
