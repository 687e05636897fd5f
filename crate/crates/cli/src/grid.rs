//! Grid option syntax: `start:stop:step` or a comma-separated list.

pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty grid".into());
    }
    let parse = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("not a number: {x:?}"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("range must be start:stop:step, got {s:?}"));
        };
        let (start, stop, step) = (parse(start)?, parse(stop)?, parse(step)?);
        if step <= 0.0 || stop < start {
            return Err(format!("bad range {s:?}"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(format!("range {s:?} has too many points"));
        }
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    s.split(',').map(parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let g = parse_grid("0:0.6:0.02").unwrap();
        assert_eq!(g.len(), 31);
        assert!((g[30] - 0.6).abs() < 1e-12);
        assert_eq!(parse_grid("0.2:1:0.05").unwrap().len(), 17);
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_grid("0.1, 0.3").unwrap(), vec![0.1, 0.3]);
    }

    #[test]
    fn malformed() {
        for bad in [
            "", "a,b", "0:1", "1:0:0.1", "0:1:0", "0:1:-1", "nan", "0:1:1e-9",
        ] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
