use crate::CliError;

fn number(s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("{s:?} is not finite")));
    }
    Ok(v)
}

/// `start:stop:step` with both ends included, a comma list, or one value.
/// Grid points are rounded to 1e-9 so `0:1:0.1` yields `0.3`, not `0.30000000000000004`.
pub fn parse_snr_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::Usage(format!("SNR grid {spec:?}: {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(step > 0.0) {
                return Err(bad("step must be positive"));
            }
            if stop < start {
                return Err(bad("stop is below start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 100_000 {
                return Err(bad("too many points"));
            }
            (0..count)
                .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                .collect()
        }
        [list] => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(number)
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad("expected start:stop:step or a comma list")),
    };
    if grid.is_empty() {
        return Err(bad("no points"));
    }
    Ok(grid)
}
